//! Truncated phase space of a real scalar field on a periodic box.
//!
//! Conventions. Momenta are `k = (2 pi / L) z` with `z` in the symmetric
//! window `{-n/2, ..., n/2 - 1}^d`, stored in FFT order (row-major, axis 0
//! slowest). Momentum integrals become sums with weight `w = (2 pi / L)^d`
//! and `delta(k - k')` becomes `delta_{ii'} / w`. The Cauchy data are
//!
//! ```text
//! phi(x) = sum_i c / omega_i ( abar_i e^{-i k_i x} + a_i e^{+i k_i x} )
//! pi(x)  = i sum_i c          ( abar_i e^{-i k_i x} - a_i e^{+i k_i x} )
//! ```
//!
//! with `c = w / (2 (2 pi)^{d/2})`. Under these conventions the free energy is
//! exactly `H0 = sum_i (w/2) abar_i a_i`, and a real field has
//! `abar_i = conj(a_i)` mode by mode.
//!
//! Lattice sites sit at `x_s = s dx`, `dx = L / n`; the sawtooth coordinate of a
//! site is its representative in `[-L/2, L/2)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fft::FftNd;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// User-facing grid parameters (the JSON grid config).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n_per_axis: usize,
    pub box_length: f64,
    pub mass: f64,
}

impl GridSpec {
    pub fn new(d: usize, n_per_axis: usize, box_length: f64, mass: f64) -> Self {
        GridSpec {
            d,
            n_per_axis,
            box_length,
            mass,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::InvalidGrid(format!("d = {} (must be 1, 2 or 3)", self.d)));
        }
        if self.n_per_axis < 2 || !self.n_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_per_axis = {} (must be a power of two, at least 2)",
                self.n_per_axis
            )));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(Error::InvalidGrid(format!("box_length = {}", self.box_length)));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "mass = {} (only the massive case m > 0 is supported)",
                self.mass
            )));
        }
        Ok(())
    }
}

/// Momentum grid, dispersion relation and Fourier machinery of the box.
pub struct ModeGrid {
    spec: GridSpec,
    labels: Vec<[i64; 3]>,
    omegas: Vec<f64>,
    reflection: Vec<usize>,
    weight: f64,
    fft: FftNd,
}

impl std::fmt::Debug for ModeGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModeGrid").field("spec", &self.spec).finish()
    }
}

impl PartialEq for ModeGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl ModeGrid {
    pub fn new(spec: GridSpec) -> Result<Arc<ModeGrid>> {
        spec.validate()?;
        let (d, n) = (spec.d, spec.n_per_axis);
        let count = n.pow(d as u32);
        let dk = 2.0 * PI / spec.box_length;
        let mut labels = Vec::with_capacity(count);
        for idx in 0..count {
            let mut label = [0i64; 3];
            let mut rem = idx;
            for axis in (0..d).rev() {
                let j = (rem % n) as i64;
                rem /= n;
                label[axis] = if j < (n / 2) as i64 { j } else { j - n as i64 };
            }
            labels.push(label);
        }
        let omegas = labels
            .iter()
            .map(|z| {
                let k2: f64 = z[..d].iter().map(|&zi| (dk * zi as f64).powi(2)).sum();
                (k2 + spec.mass * spec.mass).sqrt()
            })
            .collect();
        let mut grid = ModeGrid {
            spec,
            labels,
            omegas,
            reflection: Vec::new(),
            weight: dk.powi(d as i32),
            fft: FftNd::new(&vec![n; d]),
        };
        grid.reflection = (0..count)
            .map(|i| {
                let z = grid.labels[i];
                let mut r = [0i64; 3];
                for axis in 0..d {
                    r[axis] = -z[axis];
                }
                grid.wrapped_index(&r)
            })
            .collect();
        Ok(Arc::new(grid))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn n_per_axis(&self) -> usize {
        self.spec.n_per_axis
    }

    pub fn mass(&self) -> f64 {
        self.spec.mass
    }

    pub fn box_length(&self) -> f64 {
        self.spec.box_length
    }

    /// Number of modes, equal to the number of lattice sites.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Quadrature weight standing in for `d^d k`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.spec.box_length
    }

    pub fn dx(&self) -> f64 {
        self.spec.box_length / self.spec.n_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.spec.d as i32)
    }

    pub fn volume(&self) -> f64 {
        self.spec.box_length.powi(self.spec.d as i32)
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.omegas[i]
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Integer momentum label `z` (only the first `d` entries are meaningful).
    pub fn label(&self, i: usize) -> [i64; 3] {
        self.labels[i]
    }

    pub fn momentum(&self, i: usize, axis: usize) -> f64 {
        self.dk() * self.labels[i][axis] as f64
    }

    /// Index of the mode whose momentum is `-k_i` modulo the lattice.
    pub fn reflection(&self, i: usize) -> usize {
        self.reflection[i]
    }

    /// Modes sitting on the lower edge `z_axis = -n/2` of the window in some axis.
    pub fn is_nyquist(&self, i: usize) -> bool {
        let half = (self.spec.n_per_axis / 2) as i64;
        self.labels[i][..self.spec.d].iter().any(|&z| z == -half)
    }

    /// Index of an integer label, wrapped periodically into the window.
    pub fn wrapped_index(&self, label: &[i64; 3]) -> usize {
        let n = self.spec.n_per_axis as i64;
        label[..self.spec.d]
            .iter()
            .fold(0usize, |acc, &z| acc * n as usize + z.rem_euclid(n) as usize)
    }

    /// Index of an integer label inside the window, if it is there.
    pub fn index_of(&self, label: &[i64; 3]) -> Option<usize> {
        let half = (self.spec.n_per_axis / 2) as i64;
        if label[..self.spec.d].iter().all(|&z| -half <= z && z < half) {
            Some(self.wrapped_index(label))
        } else {
            None
        }
    }

    /// Sawtooth coordinate of lattice site `s` along `axis`, in `[-L/2, L/2)`.
    pub fn site_position(&self, s: usize, axis: usize) -> f64 {
        let n = self.spec.n_per_axis;
        let d = self.spec.d;
        let stride = n.pow((d - 1 - axis) as u32);
        let j = (s / stride) % n;
        let centered = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
        centered * self.dx()
    }

    /// The constant `c = w / (2 (2 pi)^{d/2})` of the mode expansion.
    pub fn field_constant(&self) -> f64 {
        self.weight / (2.0 * (2.0 * PI).powf(self.spec.d as f64 / 2.0))
    }

    /// Stable identifier of the grid parameters.
    pub fn grid_hash(&self) -> String {
        let canonical = format!(
            "d={};n={};L={:e};m={:e}",
            self.spec.d, self.spec.n_per_axis, self.spec.box_length, self.spec.mass
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub(crate) fn fft(&self) -> &FftNd {
        &self.fft
    }
}

/// A point of the (complexified) truncated phase space.
#[derive(Clone, Debug)]
pub struct ModeVector {
    pub grid: Arc<ModeGrid>,
    pub abar: Vec<C64>,
    pub a: Vec<C64>,
}

impl ModeVector {
    pub fn new(grid: Arc<ModeGrid>, abar: Vec<C64>, a: Vec<C64>) -> Result<Self> {
        for len in [abar.len(), a.len()] {
            if len != grid.len() {
                return Err(Error::Shape {
                    expected: grid.len(),
                    got: len,
                });
            }
        }
        Ok(ModeVector { grid, abar, a })
    }

    pub fn zeros(grid: Arc<ModeGrid>) -> Self {
        let n = grid.len();
        ModeVector {
            grid,
            abar: vec![C64::default(); n],
            a: vec![C64::default(); n],
        }
    }

    /// Real field with the given `a` amplitudes (`abar = conj(a)`).
    pub fn real(grid: Arc<ModeGrid>, a: Vec<C64>) -> Result<Self> {
        let abar = a.iter().map(|z| z.conj()).collect();
        ModeVector::new(grid, abar, a)
    }

    /// Largest `|abar_i - conj(a_i)|`; zero for a real field.
    pub fn reality_defect(&self) -> f64 {
        self.abar
            .iter()
            .zip(&self.a)
            .map(|(b, a)| (b - a.conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.reality_defect() <= tol * (1.0 + self.max_abs())
    }

    /// Coordinates in phase-space order: the `abar` block, then the `a` block.
    pub fn coords(&self) -> Vec<C64> {
        let mut z = self.abar.clone();
        z.extend_from_slice(&self.a);
        z
    }

    pub fn from_coords(grid: Arc<ModeGrid>, z: &[C64]) -> Result<Self> {
        let n = grid.len();
        if z.len() != 2 * n {
            return Err(Error::Shape {
                expected: 2 * n,
                got: z.len(),
            });
        }
        ModeVector::new(grid, z[..n].to_vec(), z[n..].to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.abar
            .iter()
            .chain(&self.a)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Discrete `L^2` norm of `(a_+, a_-)`: `sqrt(w sum |abar|^2 + |a|^2)`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.abar.iter().chain(&self.a).map(|z| z.norm_sqr()).sum();
        (self.grid.weight() * s).sqrt()
    }

    pub fn sub(&self, other: &ModeVector) -> Result<ModeVector> {
        same_grid(&self.grid, &other.grid)?;
        Ok(ModeVector {
            grid: self.grid.clone(),
            abar: self.abar.iter().zip(&other.abar).map(|(x, y)| x - y).collect(),
            a: self.a.iter().zip(&other.a).map(|(x, y)| x - y).collect(),
        })
    }

    pub fn add_scaled(&self, other: &ModeVector, s: C64) -> Result<ModeVector> {
        same_grid(&self.grid, &other.grid)?;
        Ok(ModeVector {
            grid: self.grid.clone(),
            abar: self.abar.iter().zip(&other.abar).map(|(x, y)| x + s * y).collect(),
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + s * y).collect(),
        })
    }

    pub fn scale(&self, s: C64) -> ModeVector {
        ModeVector {
            grid: self.grid.clone(),
            abar: self.abar.iter().map(|x| x * s).collect(),
            a: self.a.iter().map(|x| x * s).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut data = Vec::with_capacity(4 * self.a.len());
        for z in self.abar.iter().chain(&self.a) {
            data.push(z.re);
            data.push(z.im);
        }
        FieldFile::new(&self.grid, FieldKind::ModeVector, data).to_json()
    }

    pub fn from_json(grid: Arc<ModeGrid>, text: &str) -> Result<Self> {
        let file = FieldFile::parse(&grid, FieldKind::ModeVector, text)?;
        let z: Vec<C64> = file
            .data
            .chunks(2)
            .map(|p| C64::new(p[0], p[1]))
            .collect();
        ModeVector::from_coords(grid, &z)
    }
}

pub(crate) fn same_grid(a: &Arc<ModeGrid>, b: &Arc<ModeGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Field and conjugate momentum sampled on the lattice.
#[derive(Clone, Debug)]
pub struct CauchyData {
    pub grid: Arc<ModeGrid>,
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
}

impl CauchyData {
    pub fn new(grid: Arc<ModeGrid>, phi: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        for len in [phi.len(), pi.len()] {
            if len != grid.len() {
                return Err(Error::Shape {
                    expected: grid.len(),
                    got: len,
                });
            }
        }
        if phi.iter().chain(&pi).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(CauchyData { grid, phi, pi })
    }

    pub fn zeros(grid: Arc<ModeGrid>) -> Self {
        let n = grid.len();
        CauchyData {
            grid,
            phi: vec![0.0; n],
            pi: vec![0.0; n],
        }
    }

    /// Samples `(phi, pi)` from functions of the sawtooth position.
    pub fn sample<F, G>(grid: Arc<ModeGrid>, phi: F, pi: G) -> Self
    where
        F: Fn(&[f64]) -> f64,
        G: Fn(&[f64]) -> f64,
    {
        let d = grid.d();
        let mut x = vec![0.0; d];
        let mut phis = Vec::with_capacity(grid.len());
        let mut pis = Vec::with_capacity(grid.len());
        for s in 0..grid.len() {
            for (axis, xa) in x.iter_mut().enumerate() {
                *xa = grid.site_position(s, axis);
            }
            phis.push(phi(&x));
            pis.push(pi(&x));
        }
        CauchyData {
            grid,
            phi: phis,
            pi: pis,
        }
    }

    pub fn max_abs(&self) -> (f64, f64) {
        let m = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        (m(&self.phi), m(&self.pi))
    }

    pub fn to_json(&self) -> String {
        let mut data = self.phi.clone();
        data.extend_from_slice(&self.pi);
        FieldFile::new(&self.grid, FieldKind::CauchyData, data).to_json()
    }

    pub fn from_json(grid: Arc<ModeGrid>, text: &str) -> Result<Self> {
        let file = FieldFile::parse(&grid, FieldKind::CauchyData, text)?;
        let n = grid.len();
        CauchyData::new(grid, file.data[..n].to_vec(), file.data[n..].to_vec())
    }
}

/// Position-space coordinates `(a_+, a_-)` of a mode vector.
#[derive(Clone, Debug)]
pub struct PmVector {
    pub grid: Arc<ModeGrid>,
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
}

/// Splits Cauchy data into definite-energy mode amplitudes.
pub fn decompose(data: &CauchyData) -> Result<ModeVector> {
    let grid = &data.grid;
    let n = grid.len();
    if data.phi.len() != n || data.pi.len() != n {
        return Err(Error::Shape {
            expected: n,
            got: data.phi.len().max(data.pi.len()),
        });
    }
    let mut phi_hat: Vec<C64> = data.phi.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut pi_hat: Vec<C64> = data.pi.iter().map(|&v| C64::new(v, 0.0)).collect();
    grid.fft().forward(&mut phi_hat);
    grid.fft().forward(&mut pi_hat);
    Ok(modes_from_spectra(grid, &phi_hat, &pi_hat))
}

pub(crate) fn modes_from_spectra(grid: &Arc<ModeGrid>, phi_hat: &[C64], pi_hat: &[C64]) -> ModeVector {
    let n = grid.len();
    let norm = 2.0 * n as f64 * grid.field_constant();
    let mut abar = vec![C64::default(); n];
    let mut a = vec![C64::default(); n];
    for j in 0..n {
        let w = grid.omega(j);
        a[j] = (w * phi_hat[j] + I * pi_hat[j]) / norm;
        abar[grid.reflection(j)] = (w * phi_hat[j] - I * pi_hat[j]) / norm;
    }
    ModeVector {
        grid: grid.clone(),
        abar,
        a,
    }
}

/// Complex Cauchy data of an arbitrary (possibly non-real) mode vector.
pub fn reconstruct_complex(modes: &ModeVector) -> (Vec<C64>, Vec<C64>) {
    let grid = &modes.grid;
    let n = grid.len();
    let c = grid.field_constant();
    let mut phi = vec![C64::default(); n];
    let mut pi = vec![C64::default(); n];
    for i in 0..n {
        let r = grid.reflection(i);
        let w = grid.omega(i);
        phi[i] += c / w * modes.a[i];
        phi[r] += c / w * modes.abar[i];
        pi[i] -= I * c * modes.a[i];
        pi[r] += I * c * modes.abar[i];
    }
    grid.fft().inverse(&mut phi);
    grid.fft().inverse(&mut pi);
    (phi, pi)
}

/// Inverse of [`decompose`]. Fails if the amplitudes do not describe a real field.
pub fn reconstruct(modes: &ModeVector) -> Result<CauchyData> {
    let (phi, pi) = reconstruct_complex(modes);
    let scale = phi
        .iter()
        .chain(&pi)
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let max_imag = phi
        .iter()
        .chain(&pi)
        .map(|z| z.im.abs())
        .fold(0.0, f64::max);
    if max_imag > 1e-10 * scale {
        return Err(Error::NotReal { max_imag });
    }
    Ok(CauchyData {
        grid: modes.grid.clone(),
        phi: phi.iter().map(|z| z.re).collect(),
        pi: pi.iter().map(|z| z.re).collect(),
    })
}

fn pm_constant(grid: &ModeGrid) -> f64 {
    grid.weight() / (2.0 * PI).powf(grid.d() as f64 / 2.0)
}

/// `a_+(x) = i w/(2pi)^{d/2} sum abar_k e^{-ikx}`, `a_-(x) = -i w/(2pi)^{d/2} sum a_k e^{ikx}`.
pub fn to_pm(modes: &ModeVector) -> PmVector {
    let grid = &modes.grid;
    let n = grid.len();
    let c = pm_constant(grid);
    let mut plus = vec![C64::default(); n];
    let mut minus = vec![C64::default(); n];
    for i in 0..n {
        plus[grid.reflection(i)] = I * c * modes.abar[i];
        minus[i] = -I * c * modes.a[i];
    }
    grid.fft().inverse(&mut plus);
    grid.fft().inverse(&mut minus);
    PmVector {
        grid: grid.clone(),
        plus,
        minus,
    }
}

pub fn from_pm(pm: &PmVector) -> Result<ModeVector> {
    let grid = &pm.grid;
    let n = grid.len();
    for len in [pm.plus.len(), pm.minus.len()] {
        if len != n {
            return Err(Error::Shape { expected: n, got: len });
        }
    }
    let c = pm_constant(grid);
    let mut plus = pm.plus.clone();
    let mut minus = pm.minus.clone();
    grid.fft().forward(&mut plus);
    grid.fft().forward(&mut minus);
    let mut abar = vec![C64::default(); n];
    let mut a = vec![C64::default(); n];
    for i in 0..n {
        abar[i] = plus[grid.reflection(i)] / (I * c * n as f64);
        a[i] = minus[i] / (-I * c * n as f64);
    }
    ModeVector::new(grid.clone(), abar, a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    ModeVector,
    CauchyData,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldHeader {
    pub d: usize,
    pub n_per_axis: usize,
    pub kind: FieldKind,
}

/// On-disk field snapshot: a header and one flat array of reals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldFile {
    pub header: FieldHeader,
    pub data: Vec<f64>,
}

impl FieldFile {
    fn new(grid: &ModeGrid, kind: FieldKind, data: Vec<f64>) -> Self {
        FieldFile {
            header: FieldHeader {
                d: grid.d(),
                n_per_axis: grid.n_per_axis(),
                kind,
            },
            data,
        }
    }

    fn to_json(&self) -> String {
        serde_json::to_string(self).expect("field file serializes")
    }

    fn parse(grid: &ModeGrid, kind: FieldKind, text: &str) -> Result<Self> {
        let file: FieldFile = serde_json::from_str(text)?;
        if file.header.d != grid.d() || file.header.n_per_axis != grid.n_per_axis() {
            return Err(Error::GridMismatch);
        }
        if file.header.kind != kind {
            return Err(Error::Invalid(format!(
                "expected a {kind:?} snapshot, found {:?}",
                file.header.kind
            )));
        }
        let per_site = match kind {
            FieldKind::ModeVector => 4,
            FieldKind::CauchyData => 2,
        };
        if file.data.len() != per_site * grid.len() {
            return Err(Error::Shape {
                expected: per_site * grid.len(),
                got: file.data.len(),
            });
        }
        Ok(file)
    }
}
