//! Torus grid, Fourier transforms, quadrature norms and dealiased products.
//!
//! The torus is `[0,1)²` with `n` points per axis. Coefficients follow the
//! convention `coeff(k) = ∫ f(x) e^{-2πi k·x} dx`, so `f(x) = Σ coeff(k) e^{2πi k·x}`
//! and the zero mode is the mean value.
//!
//! Spectral coefficients are stored in FFT order (`0, 1, …, n/2-1, -n/2, …, -1`
//! along each axis); the mode-ordered layout is only used by the snapshot format.
//! Modes with a component equal to `-n/2` are the Nyquist line. They survive
//! transforms and radial multipliers unchanged, but every dealiased product
//! drops them on input and output, so products only ever see the symmetric
//! mode box `|k_i| ≤ n/2 - 1`.

use std::cell::RefCell;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Magic bytes of the field snapshot format.
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"TWL1";

/// Relative tolerance of the Hermitian-symmetry check on real output.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    pub k1: i64,
    pub k2: i64,
}

impl Mode {
    pub const ZERO: Mode = Mode { k1: 0, k2: 0 };

    pub const fn new(k1: i64, k2: i64) -> Self {
        Mode { k1, k2 }
    }

    pub fn norm_sq(self) -> i64 {
        self.k1 * self.k1 + self.k2 * self.k2
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }
}

impl std::ops::Add for Mode {
    type Output = Mode;
    fn add(self, rhs: Mode) -> Mode {
        Mode::new(self.k1 + rhs.k1, self.k2 + rhs.k2)
    }
}

impl std::ops::Neg for Mode {
    type Output = Mode;
    fn neg(self) -> Mode {
        Mode::new(-self.k1, -self.k2)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.k1, self.k2)
    }
}

/// Uniform `n × n` grid on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(n));
        }
        Ok(TorusGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points (and of modes).
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Grid with twice the resolution, used for dealiasing.
    pub fn padded(&self) -> TorusGrid {
        TorusGrid { n: 2 * self.n }
    }

    pub fn half(&self) -> i64 {
        (self.n / 2) as i64
    }

    /// Wavenumber stored at FFT index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    fn axis_index(&self, k: i64) -> Option<usize> {
        let h = self.half();
        if k < -h || k >= h {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n as i64) as usize)
        }
    }

    /// Storage index of a mode, or `None` if the mode is off the grid.
    pub fn index(&self, mode: Mode) -> Option<usize> {
        Some(self.axis_index(mode.k1)? * self.n + self.axis_index(mode.k2)?)
    }

    pub fn mode_at(&self, idx: usize) -> Mode {
        Mode::new(self.wavenumber(idx / self.n), self.wavenumber(idx % self.n))
    }

    pub fn contains(&self, mode: Mode) -> bool {
        self.index(mode).is_some()
    }

    pub fn is_nyquist(&self, mode: Mode) -> bool {
        mode.k1 == -self.half() || mode.k2 == -self.half()
    }

    /// All modes in storage order.
    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.len()).map(move |idx| self.mode_at(idx))
    }

    /// `|k|` for every mode, in storage order.
    pub fn radii(&self) -> Vec<f64> {
        self.modes().map(Mode::norm).collect()
    }

    /// Largest mode radius on the grid.
    pub fn max_radius(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.half() as f64
    }

    /// Physical coordinates of grid point `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.spacing(), j as f64 * self.spacing())
    }

    /// Storage index of the mode `-k` under periodic wrap-around.
    fn periodic_negation(&self, idx: usize) -> usize {
        let n = self.n;
        let (i, j) = (idx / n, idx % n);
        ((n - i) % n) * n + (n - j) % n
    }
}

/// Real samples on the grid, row-major with the first index along `x₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(RealField { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        RealField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        RealField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                let (x1, x2) = grid.point(i, j);
                values.push(f(x1, x2));
            }
        }
        RealField { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &RealField, beta: f64) -> Result<RealField> {
        same_grid(self.grid, other.grid)?;
        Ok(RealField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &RealField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Fourier coefficients of a function on the torus, one per grid mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl SpectralField {
    pub fn zeros(grid: TorusGrid) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
            real: true,
        }
    }

    /// Builds a field from coefficients in storage (FFT) order.
    pub fn from_coeffs(grid: TorusGrid, coeffs: Vec<Complex64>, real: bool) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::domain(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { grid, coeffs, real })
    }

    pub fn from_fn(grid: TorusGrid, real: bool, f: impl Fn(Mode) -> Complex64) -> Self {
        let coeffs = grid.modes().map(f).collect();
        SpectralField { grid, coeffs, real }
    }

    /// A real trigonometric polynomial from `(mode, coefficient)` pairs; the
    /// conjugate partner of each listed mode is filled in automatically.
    pub fn from_real_modes(grid: TorusGrid, modes: &[(Mode, Complex64)]) -> Result<Self> {
        let mut field = SpectralField::zeros(grid);
        for &(mode, c) in modes {
            let idx = grid
                .index(mode)
                .ok_or_else(|| Error::domain(format!("mode {mode} is off the grid")))?;
            let neg = grid.periodic_negation(idx);
            field.coeffs[idx] = c;
            field.coeffs[neg] = c.conj();
            if neg == idx {
                field.coeffs[idx] = Complex64::new(c.re, 0.0);
            }
        }
        Ok(field)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn set_real(&mut self, real: bool) {
        self.real = real;
    }

    /// Coefficient at `mode`; zero for modes off the grid.
    pub fn coeff(&self, mode: Mode) -> Complex64 {
        self.grid
            .index(mode)
            .map_or(Complex64::new(0.0, 0.0), |idx| self.coeffs[idx])
    }

    pub fn set(&mut self, mode: Mode, value: Complex64) -> Result<()> {
        let idx = self
            .grid
            .index(mode)
            .ok_or_else(|| Error::domain(format!("mode {mode} is off the grid")))?;
        self.coeffs[idx] = value;
        Ok(())
    }

    /// Largest `|coeff(-k) - conj(coeff(k))|` relative to the largest
    /// coefficient, with the mode where it occurs.
    pub fn hermitian_defect(&self) -> (Mode, f64) {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return (Mode::ZERO, 0.0);
        }
        let mut worst = (Mode::ZERO, 0.0);
        for idx in 0..self.coeffs.len() {
            let neg = self.grid.periodic_negation(idx);
            let d = (self.coeffs[neg] - self.coeffs[idx].conj()).norm() / scale;
            if d > worst.1 {
                worst = (self.grid.mode_at(idx), d);
            }
        }
        worst
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let (mode, defect) = self.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::SymmetryViolation {
                k1: mode.k1,
                k2: mode.k2,
                mismatch: defect,
            });
        }
        Ok(())
    }

    /// Multiplies every coefficient by `factor(|k|)`.
    pub fn map_radial(&self, factor: impl Fn(f64) -> f64) -> SpectralField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| c * factor(self.grid.mode_at(idx).norm()))
            .collect();
        SpectralField {
            grid: self.grid,
            coeffs,
            real: self.real,
        }
    }

    pub fn scale(&self, alpha: f64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * alpha).collect(),
            real: self.real,
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &SpectralField, beta: f64) -> Result<SpectralField> {
        same_grid(self.grid, other.grid)?;
        Ok(SpectralField {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a * alpha + b * beta)
                .collect(),
            real: self.real && other.real,
        })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.combine(1.0, other, -1.0)
    }

    pub(crate) fn add_assign(&mut self, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        self.real &= other.real;
    }

    /// Copy with every Nyquist-line coefficient set to zero.
    pub fn without_nyquist(&self) -> SpectralField {
        let mut out = self.clone();
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            if self.grid.is_nyquist(self.grid.mode_at(idx)) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `∫ f g dx` for real `f`, `g` given by their coefficients.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        same_grid(self.grid, other.grid)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum())
    }
}

pub(crate) fn same_grid(a: TorusGrid, b: TorusGrid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(a.n(), b.n()));
    }
    Ok(())
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Unnormalized 2-D DFT in place.
fn fft_2d(data: &mut [Complex64], n: usize, direction: FftDirection) {
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
    fft.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
}

pub fn forward_transform(f: &RealField) -> SpectralField {
    let grid = f.grid;
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_2d(&mut data, grid.n(), FftDirection::Forward);
    let norm = 1.0 / grid.len() as f64;
    for c in &mut data {
        *c *= norm;
    }
    SpectralField {
        grid,
        coeffs: data,
        real: true,
    }
}

/// Real samples of `Σ coeff(k) e^{2πi k·x}`; fails on non-Hermitian input.
pub fn inverse_transform(field: &SpectralField) -> Result<RealField> {
    field.check_hermitian()?;
    Ok(synthesize(field))
}

/// Inverse transform without the symmetry check; imaginary parts are dropped.
pub(crate) fn synthesize(field: &SpectralField) -> RealField {
    let grid = field.grid;
    let mut data = field.coeffs.clone();
    fft_2d(&mut data, grid.n(), FftDirection::Inverse);
    RealField {
        grid,
        values: data.into_iter().map(|c| c.re).collect(),
    }
}

/// Grid-average `L^r` norm; `r = f64::INFINITY` gives the max norm.
pub fn lp_norm(f: &RealField, r: f64) -> Result<f64> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::domain(format!("L^r exponent must be >= 1, got {r}")));
    }
    Ok(lp_norm_of(&f.values, r))
}

pub(crate) fn lp_norm_of(values: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    let count = values.len() as f64;
    if r == 2.0 {
        return (values.iter().map(|v| v * v).sum::<f64>() / count).sqrt();
    }
    if r == 1.0 {
        return values.iter().map(|v| v.abs()).sum::<f64>() / count;
    }
    (values.iter().map(|v| v.abs().powf(r)).sum::<f64>() / count).powf(1.0 / r)
}

pub fn plancherel_l2(field: &SpectralField) -> f64 {
    field.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// How pointwise products are formed in spectral space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dealias {
    /// Zero-pad to `2n` points per axis, multiply, truncate.
    #[default]
    Padded,
    /// Multiply on the native grid; aliased modes fold back. Test hook only.
    Unpadded,
}

fn pad(field: &SpectralField) -> Vec<Complex64> {
    let grid = field.grid;
    let big = grid.padded();
    let mut out = vec![Complex64::new(0.0, 0.0); big.len()];
    for (idx, &c) in field.coeffs.iter().enumerate() {
        let mode = grid.mode_at(idx);
        if !grid.is_nyquist(mode) {
            // Every non-Nyquist mode of the small grid lies on the padded grid.
            out[big.index(mode).unwrap()] = c;
        }
    }
    out
}

fn truncate(grid: TorusGrid, padded: &[Complex64], real: bool) -> SpectralField {
    let big = grid.padded();
    let norm = 1.0 / big.len() as f64;
    let coeffs = grid
        .modes()
        .map(|mode| {
            if grid.is_nyquist(mode) {
                Complex64::new(0.0, 0.0)
            } else {
                padded[big.index(mode).unwrap()] * norm
            }
        })
        .collect();
    SpectralField { grid, coeffs, real }
}

/// Samples of the band-limited interpolant on the padded grid (Nyquist line dropped).
pub(crate) fn padded_samples(field: &SpectralField) -> Vec<f64> {
    let n2 = field.grid.padded().n();
    let mut data = pad(field);
    fft_2d(&mut data, n2, FftDirection::Inverse);
    data.into_iter().map(|c| c.re).collect()
}

fn from_padded_samples(grid: TorusGrid, samples: &[f64]) -> SpectralField {
    let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_2d(&mut data, grid.padded().n(), FftDirection::Forward);
    truncate(grid, &data, true)
}

/// Coefficients of `u³` restricted to the grid.
pub fn cube_spectral(u: &SpectralField, dealias: Dealias) -> SpectralField {
    match dealias {
        Dealias::Padded => {
            let samples: Vec<f64> = padded_samples(u).into_iter().map(|v| v * v * v).collect();
            from_padded_samples(u.grid, &samples)
        }
        Dealias::Unpadded => {
            let cubed = synthesize(u).map(|v| v * v * v);
            forward_transform(&cubed)
        }
    }
}

/// Coefficients of `f g` restricted to the grid, computed without aliasing.
pub fn dealiased_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    same_grid(f.grid, g.grid)?;
    let a = padded_samples(f);
    let b = padded_samples(g);
    let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    Ok(from_padded_samples(f.grid, &prod))
}

/// Pointwise cube with aliased contributions removed.
pub fn dealiased_cube(f: &RealField) -> RealField {
    synthesize(&cube_spectral(&forward_transform(f), Dealias::Padded))
}

/// Exact `∫ f⁴` of the band-limited interpolant (Nyquist line dropped).
///
/// `f⁴` has modes up to `2n - 4` per axis, so the average over the `2n` grid
/// is exact.
pub fn quartic_integral(field: &SpectralField) -> f64 {
    let samples = padded_samples(field);
    samples.iter().map(|v| (v * v) * (v * v)).sum::<f64>() / samples.len() as f64
}

pub fn write_snapshot<W: Write>(mut w: W, field: &SpectralField) -> Result<()> {
    let grid = field.grid;
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&[field.real as u8])?;
    let h = grid.half();
    for k1 in -h..h {
        for k2 in -h..h {
            let c = field.coeff(Mode::new(k1, k2));
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let grid = TorusGrid::new(n).map_err(|_| Error::Format(format!("bad grid size {n}")))?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let real = match flag[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("bad real flag {other}"))),
    };
    let mut field = SpectralField::zeros(grid);
    field.real = real;
    let h = grid.half();
    let mut buf = [0u8; 8];
    for k1 in -h..h {
        for k2 in -h..h {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            field.set(Mode::new(k1, k2), Complex64::new(re, im))?;
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after coefficients".into()));
    }
    Ok(field)
}

pub fn save_snapshot(path: &Path, field: &SpectralField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<SpectralField> {
    read_snapshot(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    fn random_field(g: TorusGrid, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealField::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct O(n⁴) DFT with the torus normalization.
    fn brute_dft(f: &RealField) -> SpectralField {
        let g = f.grid();
        let n = g.n();
        SpectralField::from_fn(g, true, |mode| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let (x1, x2) = g.point(i, j);
                    let phase = -2.0 * PI * (mode.k1 as f64 * x1 + mode.k2 as f64 * x2);
                    acc += Complex64::from_polar(f.values()[i * n + j], phase);
                }
            }
            acc / (n * n) as f64
        })
    }

    /// Triple convolution of the coefficient array over ℤ², restricted to the grid box.
    fn brute_cube(c: &SpectralField) -> SpectralField {
        let g = c.grid();
        let modes: Vec<Mode> = g.modes().filter(|m| !g.is_nyquist(*m)).collect();
        let mut out = SpectralField::zeros(g);
        for &a in &modes {
            for &b in &modes {
                for &d in &modes {
                    let k = a + b + d;
                    if g.contains(k) && !g.is_nyquist(k) {
                        let idx = g.index(k).unwrap();
                        out.coeffs_mut()[idx] += c.coeff(a) * c.coeff(b) * c.coeff(d);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(2).is_err());
        assert!(TorusGrid::new(12).is_err());
        let g = grid(8);
        assert_eq!(g.len(), 64);
        assert_eq!(g.modes().count(), 64);
        for idx in 0..g.len() {
            assert_eq!(g.index(g.mode_at(idx)), Some(idx));
        }
        assert!(!g.contains(Mode::new(4, 0)));
        assert!(g.contains(Mode::new(-4, 3)));
    }

    #[test]
    fn constant_transform() {
        let g = grid(8);
        let f = forward_transform(&RealField::constant(g, 1.0));
        assert!((f.coeff(Mode::ZERO) - 1.0).norm() < 1e-15);
        let rest: f64 = g
            .modes()
            .filter(|m| *m != Mode::ZERO)
            .map(|m| f.coeff(m).norm())
            .fold(0.0, f64::max);
        assert!(rest < 1e-15);
    }

    #[test]
    fn cosine_transform() {
        let g = grid(16);
        let f = forward_transform(&RealField::from_fn(g, |x1, _| (2.0 * PI * x1).cos()));
        for m in g.modes() {
            let expected = if m == Mode::new(1, 0) || m == Mode::new(-1, 0) {
                0.5
            } else {
                0.0
            };
            assert!((f.coeff(m) - expected).norm() < 1e-14, "mode {m}");
        }
    }

    #[test]
    fn matches_direct_dft() {
        let f = random_field(grid(4), 1);
        let fast = forward_transform(&f);
        let slow = brute_dft(&f);
        assert!(fast.max_abs_diff(&slow) < 1e-12);
    }

    #[test]
    fn inverse_of_single_mode() {
        let g = grid(16);
        let c = SpectralField::from_real_modes(g, &[(Mode::new(1, 0), Complex64::new(0.5, 0.0))])
            .unwrap();
        let f = inverse_transform(&c).unwrap();
        let expected = RealField::from_fn(g, |x1, _| (2.0 * PI * x1).cos());
        assert!(f.max_abs_diff(&expected) < 1e-14);

        let one = SpectralField::from_real_modes(g, &[(Mode::ZERO, Complex64::new(1.0, 0.0))])
            .unwrap();
        assert!(inverse_transform(&one).unwrap().max_abs_diff(&RealField::constant(g, 1.0)) < 1e-15);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let g = grid(8);
        let mut c = SpectralField::zeros(g);
        c.set(Mode::new(1, 2), Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            inverse_transform(&c),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn lp_norms_of_cosine() {
        let g = grid(32);
        let f = RealField::from_fn(g, |x1, _| (2.0 * PI * x1).cos());
        assert!((lp_norm(&f, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((lp_norm(&f, 4.0).unwrap() - 0.375f64.powf(0.25)).abs() < 1e-14);
        assert!((lp_norm(&f, f64::INFINITY).unwrap() - 1.0).abs() < 1e-14);
        assert!(lp_norm(&f, 0.5).is_err());
        let c = RealField::constant(g, -3.0);
        for r in [1.0, 1.5, 2.0, 3.0, 7.0, f64::INFINITY] {
            assert!((lp_norm(&c, r).unwrap() - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn plancherel_small_cases() {
        let g = grid(8);
        assert_eq!(plancherel_l2(&SpectralField::zeros(g)), 0.0);
        let c = SpectralField::from_real_modes(g, &[(Mode::new(1, 0), Complex64::new(0.5, 0.0))])
            .unwrap();
        assert!((plancherel_l2(&c) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cube_of_constant_and_cosine() {
        let g = grid(8);
        let c = dealiased_cube(&RealField::constant(g, 1.5));
        assert!(c.max_abs_diff(&RealField::constant(g, 3.375)) < 1e-13);

        // cos³ = 3/4 cos + 1/4 cos 3x; mode 3 fits on the 8-grid but not on the 4-grid.
        let cos = |x1: f64, _x2: f64| (2.0 * PI * x1).cos();
        let cube8 = dealiased_cube(&RealField::from_fn(g, cos));
        let expected8 = RealField::from_fn(g, |x1, _| {
            0.75 * (2.0 * PI * x1).cos() + 0.25 * (6.0 * PI * x1).cos()
        });
        assert!(cube8.max_abs_diff(&expected8) < 1e-13);

        let g4 = grid(4);
        let cube4 = forward_transform(&dealiased_cube(&RealField::from_fn(g4, cos)));
        assert!((cube4.coeff(Mode::new(1, 0)) - 0.375).norm() < 1e-14);
        assert!((cube4.coeff(Mode::new(-1, 0)) - 0.375).norm() < 1e-14);
        // The naive cube would alias mode 3 onto mode -1.
        let naive = forward_transform(&RealField::from_fn(g4, cos).map(|v| v * v * v));
        assert!((naive.coeff(Mode::new(-1, 0)) - 0.5).norm() < 1e-14);
    }

    #[test]
    fn cube_matches_triple_convolution() {
        let f = random_field(grid(8), 7);
        let c = forward_transform(&f);
        let fast = cube_spectral(&c, Dealias::Padded);
        let slow = brute_cube(&c);
        assert!(fast.max_abs_diff(&slow) < 1e-10 * slow.max_abs().max(1.0));
    }

    #[test]
    fn snapshot_roundtrip_and_layout() {
        let g = grid(4);
        let field = forward_transform(&random_field(g, 3));
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &field).unwrap();
        assert_eq!(bytes.len(), 4 + 4 + 1 + 16 * 16);
        assert_eq!(&bytes[..4], b"TWL1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 4);
        // First coefficient is mode (-2, -2).
        let re = f64::from_le_bytes(bytes[9..17].try_into().unwrap());
        assert_eq!(re, field.coeff(Mode::new(-2, -2)).re);
        let back = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(back, field);

        bytes[0] = b'X';
        assert!(matches!(read_snapshot(bytes.as_slice()), Err(Error::Format(_))));
    }
}
