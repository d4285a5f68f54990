//! Stacked-metasurface propagation: meta-atom geometry, Rayleigh-Sommerfeld
//! transmission matrices and the cascaded wave-domain beamformer.
//!
//! Every SIM in the network shares one geometry, so a single
//! [`DiffractionSet`] serves all APs. Layers lie parallel to the ground with
//! the boresight pointing down; antennas sit at `z = 0`, layer `m`
//! (1-based) at `z = m * d_layer`. Meta-atom `n` of a layer is at grid cell
//! `(n / ny, n % ny)`, i.e. row-major over `(x, y)`.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::{cis, wrap_phase, CMat, Float};
use crate::scenario::SystemConfig;

#[derive(Clone, Debug)]
pub struct SimGeometry<T: Float> {
    pub nx: usize,
    pub ny: usize,
    pub layers: usize,
    /// Meta-atom pitch.
    pub d_meta: T,
    /// Meta-atom side length (`d_x = d_y`); equals the pitch unless set.
    pub atom_size: T,
    pub d_layer: T,
    /// Atom positions of one layer in the `z = 0` plane, row-major.
    pub grid: Vec<[T; 2]>,
    /// Antenna positions, all at `z = 0`.
    pub antennas: Vec<[T; 3]>,
}

impl<T: Float> SimGeometry<T> {
    pub fn new(
        nx: usize,
        ny: usize,
        layers: usize,
        u: usize,
        d_meta: T,
        d_layer: T,
        antenna_spacing: T,
    ) -> Self {
        let half = T::of(0.5);
        let cx = T::of(nx as f64 - 1.0) * half;
        let cy = T::of(ny as f64 - 1.0) * half;
        let mut grid = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                grid.push([
                    (T::of(ix as f64) - cx) * d_meta,
                    (T::of(iy as f64) - cy) * d_meta,
                ]);
            }
        }
        let cu = T::of(u as f64 - 1.0) * half;
        let antennas = (0..u)
            .map(|i| [(T::of(i as f64) - cu) * antenna_spacing, T::zero(), T::zero()])
            .collect();
        Self {
            nx,
            ny,
            layers,
            d_meta,
            atom_size: d_meta,
            d_layer,
            grid,
            antennas,
        }
    }

    pub fn with_atom_size(mut self, size: T) -> Self {
        self.atom_size = size;
        self
    }

    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let (nx, ny) = cfg.grid()?;
        Ok(Self::new(
            nx,
            ny,
            cfg.m,
            cfg.u,
            T::of(cfg.d_meta()),
            T::of(cfg.d_layer()),
            T::of(cfg.antenna_spacing()),
        )
        .with_atom_size(T::of(cfg.atom_size())))
    }

    pub fn atoms_per_layer(&self) -> usize {
        self.nx * self.ny
    }

    /// 3-D position of atom `n` on layer `m` (1-based).
    pub fn atom(&self, m: usize, n: usize) -> [T; 3] {
        let [x, y] = self.grid[n];
        [x, y, T::of(m as f64) * self.d_layer]
    }
}

/// Rayleigh-Sommerfeld transmission coefficient between two meta-atoms (or
/// an antenna and a meta-atom) whose planes are normal to `z`.
pub fn diffraction_coefficient<T: Float>(
    src: [T; 3],
    dst: [T; 3],
    atom_area: T,
    wavelength: T,
) -> Result<Complex<T>> {
    let dx = dst[0] - src[0];
    let dy = dst[1] - src[1];
    let dz = dst[2] - src[2];
    let d = (dx * dx + dy * dy + dz * dz).sqrt();
    if d <= T::zero() {
        return Err(Error::ZeroDistance);
    }
    let cos_chi = dz.abs() / d;
    let amp = atom_area * cos_chi / d;
    let tail = Complex::new(T::one() / (T::TAU() * d), -T::one() / wavelength);
    Ok(tail * cis(T::TAU() * d / wavelength) * amp)
}

/// Fixed transmission matrices of one SIM.
#[derive(Clone, Debug)]
pub struct DiffractionSet<T: Float> {
    /// N×U, antenna `u` to layer-1 atom `n`.
    pub w1: CMat<T>,
    /// `w[i]` is the N×N matrix from layer `i + 1` to layer `i + 2`
    /// (entry `(n, n')`: source atom `n'`, target atom `n`).
    pub w: Vec<CMat<T>>,
}

impl<T: Float> DiffractionSet<T> {
    pub fn layers(&self) -> usize {
        self.w.len() + 1
    }

    pub fn atoms(&self) -> usize {
        self.w1.nrows()
    }
}

pub fn build_diffraction_set<T: Float>(
    geom: &SimGeometry<T>,
    wavelength: T,
) -> Result<DiffractionSet<T>> {
    let n = geom.atoms_per_layer();
    let area = geom.atom_size * geom.atom_size;
    let mut w1 = CMat::zeros(n, geom.antennas.len());
    for (u, &ant) in geom.antennas.iter().enumerate() {
        for t in 0..n {
            w1[(t, u)] = diffraction_coefficient(ant, geom.atom(1, t), area, wavelength)?;
        }
    }
    let mut w = Vec::with_capacity(geom.layers.saturating_sub(1));
    for m in 2..=geom.layers {
        let mut wm = CMat::zeros(n, n);
        for t in 0..n {
            for s in 0..n {
                wm[(t, s)] =
                    diffraction_coefficient(geom.atom(m - 1, s), geom.atom(m, t), area, wavelength)?;
            }
        }
        w.push(wm);
    }
    Ok(DiffractionSet { w1, w })
}

/// Phase shifts of every meta-atom in the network, stored flat in
/// `(ap, layer, atom)` order, each in `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTensor<T: Float> {
    pub aps: usize,
    pub layers: usize,
    pub atoms: usize,
    pub phi: Vec<T>,
}

impl<T: Float> PhaseTensor<T> {
    pub fn zeros(aps: usize, layers: usize, atoms: usize) -> Self {
        Self {
            aps,
            layers,
            atoms,
            phi: vec![T::zero(); aps * layers * atoms],
        }
    }

    pub fn random<R: rand::Rng + ?Sized>(aps: usize, layers: usize, atoms: usize, rng: &mut R) -> Self {
        let phi = (0..aps * layers * atoms)
            .map(|_| wrap_phase(T::sample_unit(rng) * T::TAU()))
            .collect();
        Self {
            aps,
            layers,
            atoms,
            phi,
        }
    }

    #[inline]
    pub fn index(&self, l: usize, m: usize, n: usize) -> usize {
        (l * self.layers + m) * self.atoms + n
    }

    pub fn get(&self, l: usize, m: usize, n: usize) -> T {
        self.phi[self.index(l, m, n)]
    }

    pub fn set(&mut self, l: usize, m: usize, n: usize, v: T) {
        let i = self.index(l, m, n);
        self.phi[i] = wrap_phase(v);
    }

    /// All `layers * atoms` phases of one SIM, layer-major.
    pub fn ap(&self, l: usize) -> &[T] {
        let len = self.layers * self.atoms;
        &self.phi[l * len..(l + 1) * len]
    }

    /// Writes the tensor as text: a header line then one phase per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# phase-tensor {} {} {}", self.aps, self.layers, self.atoms)?;
        for v in &self.phi {
            writeln!(w, "{:e}", v.as_f64())?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty phase file".into()))??;
        let dims: Vec<usize> = header
            .strip_prefix("# phase-tensor ")
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|e| Error::Parse(format!("{e}"))))
            .collect::<Result<_>>()?;
        let [aps, layers, atoms] = dims[..] else {
            return Err(Error::Parse("header needs three dimensions".into()));
        };
        let mut phi = Vec::with_capacity(aps * layers * atoms);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{e}: {line:?}")))?;
            phi.push(T::of(v));
        }
        if phi.len() != aps * layers * atoms {
            return Err(Error::Parse(format!(
                "expected {} phases, found {}",
                aps * layers * atoms,
                phi.len()
            )));
        }
        Ok(Self {
            aps,
            layers,
            atoms,
            phi,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn check_phases<T: Float>(ds: &DiffractionSet<T>, phi: &[T]) -> Result<()> {
    let want = ds.layers() * ds.atoms();
    if phi.len() != want {
        return Err(Error::Shape(format!(
            "phase slice has {} entries, SIM has {} layers x {} atoms",
            phi.len(),
            ds.layers(),
            ds.atoms()
        )));
    }
    Ok(())
}

/// `Φ_M W_M ⋯ Φ_2 W_2 Φ_1` for one SIM (`phi` is layer-major, `M·N` long).
pub fn cascade<T: Float>(ds: &DiffractionSet<T>, phi: &[T]) -> Result<CMat<T>> {
    check_phases(ds, phi)?;
    let n = ds.atoms();
    let mut g = CMat::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| cis(phi[i])));
    for (i, wm) in ds.w.iter().enumerate() {
        let layer = &phi[(i + 1) * n..(i + 2) * n];
        let mut next = wm * &g;
        scale_rows(&mut next, layer);
        g = next;
    }
    Ok(g)
}

/// `G W1` (N×U) computed right-to-left without forming `G`.
pub fn cascade_with_feed<T: Float>(ds: &DiffractionSet<T>, phi: &[T]) -> Result<CMat<T>> {
    check_phases(ds, phi)?;
    let n = ds.atoms();
    let mut b = ds.w1.clone();
    scale_rows(&mut b, &phi[..n]);
    for (i, wm) in ds.w.iter().enumerate() {
        let mut next = wm * &b;
        scale_rows(&mut next, &phi[(i + 1) * n..(i + 2) * n]);
        b = next;
    }
    Ok(b)
}

fn scale_rows<T: Float>(a: &mut CMat<T>, phi: &[T]) {
    for (r, &p) in phi.iter().enumerate() {
        let e = cis(p);
        for c in 0..a.ncols() {
            a[(r, c)] *= e;
        }
    }
}

/// True when every entry is finite.
pub fn is_finite<T: Float>(a: &CMat<T>) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Unit-modulus diagonal `Φ` as a dense matrix.
pub fn phase_matrix<T: Float>(phi: &[T]) -> CMat<T> {
    let n = phi.len();
    let mut m = CMat::from_element(n, n, Complex::zero());
    for (i, &p) in phi.iter().enumerate() {
        m[(i, i)] = cis(p);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn geom(nx: usize, layers: usize, u: usize, d_layer: f64) -> SimGeometry<f64> {
        SimGeometry::new(nx, nx, layers, u, 0.5, d_layer, 0.5)
    }

    #[test]
    fn axial_coefficient() {
        let w = diffraction_coefficient([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.25, 1.0).unwrap();
        let want = Complex::new(0.25 / std::f64::consts::TAU, -0.25);
        assert!((w - want).norm() < 1e-14, "{w}");
    }

    #[test]
    fn transverse_offset_shrinks_obliquity() {
        // same distance, one axial one oblique: only the cos χ prefactor differs
        let a = diffraction_coefficient::<f64>([0.0, 0.0, 0.0], [0.0, 0.0, 2.0], 0.25, 1.0).unwrap();
        let b = diffraction_coefficient::<f64>([0.0, 0.0, 0.0], [1.2, 0.0, 1.6], 0.25, 1.0).unwrap();
        assert!((b.norm() / a.norm() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_error() {
        let r = diffraction_coefficient([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.25, 1.0);
        assert!(matches!(r, Err(Error::ZeroDistance)));
    }

    #[test]
    fn w_matrix_matches_scalar_loop() {
        let g = geom(2, 2, 1, 0.7);
        let ds = build_diffraction_set(&g, 1.0).unwrap();
        // independent re-implementation from raw coordinates
        let pts = [[-0.25, -0.25], [-0.25, 0.25], [0.25, -0.25], [0.25, 0.25]];
        for t in 0..4 {
            for s in 0..4 {
                let dx: f64 = pts[t][0] - pts[s][0];
                let dy: f64 = pts[t][1] - pts[s][1];
                let d = (dx * dx + dy * dy + 0.49f64).sqrt();
                let cos_chi = 0.7 / d;
                let k = std::f64::consts::TAU * d;
                let pre = 0.25 * cos_chi / d;
                let re = pre * (k.cos() / (std::f64::consts::TAU * d) + k.sin());
                let im = pre * (k.sin() / (std::f64::consts::TAU * d) - k.cos());
                let got = ds.w[0][(t, s)];
                assert!((got.re - re).abs() < 1e-14 && (got.im - im).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn congruent_layers_give_symmetric_w() {
        let ds = build_diffraction_set(&geom(3, 3, 2, 0.5), 1.0).unwrap();
        for w in &ds.w {
            assert!((w - w.transpose()).norm() < 1e-15);
            assert!(is_finite(w));
        }
    }

    #[test]
    fn frobenius_falls_with_spacing() {
        let mut prev = f64::INFINITY;
        for i in 0..12 {
            let d_layer = 0.25 + 0.25 * i as f64;
            let ds = build_diffraction_set(&geom(4, 2, 1, d_layer), 1.0).unwrap();
            let f = ds.w[0].norm();
            assert!(f < prev, "d_layer {d_layer}: {f} >= {prev}");
            prev = f;
        }
    }

    #[test]
    fn single_layer_cascade_is_diagonal() {
        let ds = build_diffraction_set(&geom(2, 1, 1, 0.5), 1.0).unwrap();
        let phi = [0.1, 0.2, 0.3, 0.4];
        let g = cascade(&ds, &phi).unwrap();
        assert!((g - phase_matrix(&phi)).norm() < 1e-15);
    }

    #[test]
    fn zero_phases_give_plain_product() {
        let ds = build_diffraction_set(&geom(2, 3, 1, 0.5), 1.0).unwrap();
        let g = cascade(&ds, &[0.0; 12]).unwrap();
        let want = &ds.w[1] * &ds.w[0];
        assert!((g - want).norm() < 1e-14);
    }

    #[test]
    fn cascade_matches_sequential_multiply() {
        let ds = build_diffraction_set(&geom(2, 3, 2, 0.4), 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t = PhaseTensor::<f64>::random(1, 3, 4, &mut rng);
        let phi = t.ap(0);
        let p = |m: usize| phase_matrix(&phi[m * 4..(m + 1) * 4]);
        let naive = p(2) * &ds.w[1] * p(1) * &ds.w[0] * p(0);
        let g = cascade(&ds, phi).unwrap();
        assert!((&g - &naive).norm() < 1e-13);
        let b = cascade_with_feed(&ds, phi).unwrap();
        assert!((b - naive * &ds.w1).norm() < 1e-13);
    }

    #[test]
    fn cascade_rejects_wrong_shape() {
        let ds = build_diffraction_set(&geom(2, 2, 1, 0.5), 1.0).unwrap();
        assert!(matches!(cascade(&ds, &[0.0; 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn cascade_is_linear_in_each_w() {
        let mut ds = build_diffraction_set(&geom(2, 3, 1, 0.5), 1.0).unwrap();
        let phi: Vec<f64> = (0..12).map(|i| 0.3 * i as f64).collect();
        let g1 = cascade(&ds, &phi).unwrap();
        ds.w[0] *= Complex::new(2.0, -1.0);
        let g2 = cascade(&ds, &phi).unwrap();
        assert!((g1 * Complex::new(2.0, -1.0) - g2).norm() < 1e-13);
    }

    #[test]
    fn phase_file_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let t = PhaseTensor::<f64>::random(3, 2, 4, &mut rng);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = PhaseTensor::<f64>::read_from(&buf[..]).unwrap();
        assert_eq!(t, back);
        assert_eq!(back.get(2, 1, 3), t.phi[2 * 8 + 4 + 3]);
        assert!(PhaseTensor::<f64>::read_from(&b"# phase-tensor 1 1 2\n0.5\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn two_pi_shift_leaves_g(seed in 0u64..1000) {
            let ds = build_diffraction_set(&geom(2, 2, 1, 0.5), 1.0).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t = PhaseTensor::<f64>::random(1, 2, 4, &mut rng);
            let shifted: Vec<f64> = t.phi.iter().map(|p| p + std::f64::consts::TAU).collect();
            let a = cascade(&ds, &t.phi).unwrap();
            let b = cascade(&ds, &shifted).unwrap();
            prop_assert!((a - b).norm() <= 1e-12);
        }

        #[test]
        fn diagonal_phase_preserves_norm(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t = PhaseTensor::<f64>::random(1, 1, 9, &mut rng);
            let x = crate::num::CVec::<f64>::from_fn(9, |_, _| crate::num::sample_cn(&mut rng));
            let y = phase_matrix(&t.phi) * &x;
            prop_assert!((y.norm() - x.norm()).abs() < 1e-12 * x.norm());
            prop_assert!(t.phi.iter().all(|&p| (0.0..std::f64::consts::TAU).contains(&p)));
        }
    }
}
