//! Functionals of states and trajectories: energies, Sobolev and mixed
//! space-time norms, the dispersive functional `Z`, the mollified-energy
//! increment computed two independent ways, the multiplier `μ` and the
//! smoothing norms of the linear/nonlinear split.
//!
//! All `L_t^q` integrals use the composite trapezoid rule over the trajectory
//! samples; `q = ∞` is the sample maximum.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::multipliers::{
    apply_table, dyadic_levels, m_radial, m_symbol, phi, psi, IMethodParams, Symbol,
};
use crate::solver::{window_decompose, Trajectory, WaveState};
use crate::spectral::{
    cube_spectral, lp_norm_of, quartic_integral, synthesize, Dealias, Mode, SpectralField,
    TorusGrid,
};

/// Largest grid accepted by [`increment_fourier`].
pub const MAX_FOURIER_GRID: usize = 16;

/// `½∑|v̂|² + ½∑4π²|n|²|û|² + ¼∫u⁴`, the last term evaluated exactly.
pub fn energy_spectral(u: &SpectralField, v: &SpectralField) -> f64 {
    let grid = u.grid();
    let mut quadratic = 0.0;
    for (i, (cu, cv)) in u.coeffs().iter().zip(v.coeffs()).enumerate() {
        let k2 = grid.mode_at(i).norm_sq() as f64;
        quadratic += cv.norm_sqr() + 4.0 * PI * PI * k2 * cu.norm_sqr();
    }
    0.5 * quadratic + 0.25 * quartic_integral(u)
}

pub fn energy(state: &WaveState) -> f64 {
    energy_spectral(&state.u_hat(), &state.v_hat())
}

fn i_table(grid: TorusGrid, params: &IMethodParams) -> Vec<f64> {
    Symbol::M(*params).tabulate(grid)
}

pub fn mollified_energy(state: &WaveState, params: &IMethodParams) -> f64 {
    let table = i_table(state.grid(), params);
    energy_spectral(
        &apply_table(&state.u_hat(), &table),
        &apply_table(&state.v_hat(), &table),
    )
}

fn sobolev_sq(field: &SpectralField, s: f64) -> f64 {
    let grid = field.grid();
    field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| (1.0 + grid.mode_at(i).norm_sq() as f64).powf(s) * c.norm_sqr())
        .sum()
}

/// `(‖u‖²_{H^s} + ‖v‖²_{H^{s−1}})^{1/2}`.
pub fn sobolev_pair_norm(state: &WaveState, s: f64) -> f64 {
    (sobolev_sq(&state.u_hat(), s) + sobolev_sq(&state.v_hat(), s - 1.0)).sqrt()
}

/// `max_t ‖Iu(t)‖_{L⁴}`, with the spatial integral evaluated exactly.
pub fn potential_norm(traj: &Trajectory, params: &IMethodParams) -> f64 {
    let table = i_table(traj.grid(), params);
    traj.states()
        .iter()
        .map(|s| quartic_integral(&apply_table(&s.u_hat(), &table)).max(0.0).powf(0.25))
        .fold(0.0, f64::max)
}

/// `‖⟨D⟩Iu‖_{L_t^∞ L_x^2}`: the bound on `‖Iu‖_{L⁴}` available from the
/// kinetic energy alone.
pub fn kinetic_norm(traj: &Trajectory, params: &IMethodParams) -> f64 {
    let symbol = Symbol::JapPower { sigma: 1.0 }.times(Symbol::M(*params));
    mixed_norm(
        traj,
        MixedNormSpec::new(f64::INFINITY, 2.0).expect("valid exponents"),
        Some(&symbol),
        Component::U,
    )
}

/// Time exponent `q` and space exponent `r` of an `L_t^q L_x^r` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedNormSpec {
    pub q: f64,
    pub r: f64,
}

impl MixedNormSpec {
    pub fn new(q: f64, r: f64) -> Result<Self> {
        if !(q >= 1.0) || !(r >= 1.0) {
            return Err(Error::domain(format!("exponents must be >= 1, got q = {q}, r = {r}")));
        }
        Ok(MixedNormSpec { q, r })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    U,
    /// The velocity `∂ₜu`.
    V,
}

/// Composite trapezoid `(∫ f^q dt)^{1/q}`, or the maximum for `q = ∞`.
pub fn time_norm(times: &[f64], values: &[f64], q: f64) -> f64 {
    debug_assert_eq!(times.len(), values.len());
    if q.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    let integral: f64 = trapezoid_weights(times)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v.powf(q))
        .sum();
    integral.powf(1.0 / q)
}

/// Weights of the composite trapezoid rule on the given nodes.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; times.len()];
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        w[i - 1] += 0.5 * h;
        w[i] += 0.5 * h;
    }
    w
}

fn spatial_norms(
    traj: &Trajectory,
    r: f64,
    preop: Option<&Symbol>,
    component: Component,
) -> Vec<f64> {
    let table = preop.map(|s| s.tabulate(traj.grid()));
    traj.states()
        .iter()
        .map(|state| {
            let values = match (&table, component) {
                (None, Component::U) => state.u.values().to_vec(),
                (None, Component::V) => state.v.values().to_vec(),
                (Some(t), c) => {
                    let hat = if c == Component::U { state.u_hat() } else { state.v_hat() };
                    synthesize(&apply_table(&hat, t)).into_values()
                }
            };
            lp_norm_of(&values, r)
        })
        .collect()
}

/// `‖preop(component)‖_{L_t^q L_x^r}` over the samples of `traj`.
pub fn mixed_norm(
    traj: &Trajectory,
    spec: MixedNormSpec,
    preop: Option<&Symbol>,
    component: Component,
) -> f64 {
    let norms = spatial_norms(traj, spec.r, preop, component);
    time_norm(&traj.times(), &norms, spec.q)
}

/// Exponent pair `(3/m, 6/(3−4m))` of `Z_{m,s}`.
pub fn z_exponents(m: f64) -> Result<(f64, f64)> {
    if m == 0.25 {
        Ok((12.0, 3.0))
    } else if m == 0.375 {
        Ok((8.0, 4.0))
    } else {
        Err(Error::domain(format!("Z is defined for m in {{1/4, 3/8}}, got {m}")))
    }
}

/// `‖(⟨D⟩^{1−m} Iu, ∂ₜ⟨D⟩^{−m} Iu)‖_{L_t^q L_x^r}`, the two components
/// combined in `ℓ²`.
pub fn z_functional(traj: &Trajectory, m: f64, params: &IMethodParams) -> Result<f64> {
    let (q, r) = z_exponents(m)?;
    let spec = MixedNormSpec::new(q, r)?;
    let i = Symbol::M(*params);
    let pos = Symbol::JapPower { sigma: 1.0 - m }.times(i.clone());
    let neg = Symbol::JapPower { sigma: -m }.times(i);
    let a = mixed_norm(traj, spec, Some(&pos), Component::U);
    let b = mixed_norm(traj, spec, Some(&neg), Component::V);
    Ok(a.hypot(b))
}

/// A Lebesgue exponent in `[1, ∞]`, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lebesgue {
    Finite(Ratio<i64>),
    Infinity,
}

impl Lebesgue {
    pub fn int(p: i64) -> Self {
        Lebesgue::Finite(Ratio::from_integer(p))
    }

    fn reciprocal(self) -> Ratio<i64> {
        match self {
            Lebesgue::Finite(p) => p.recip(),
            Lebesgue::Infinity => Ratio::zero(),
        }
    }
}

impl fmt::Display for Lebesgue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lebesgue::Finite(p) => write!(f, "{p}"),
            Lebesgue::Infinity => write!(f, "inf"),
        }
    }
}

/// Whether `(q, r)` is a wave-admissible pair with gain `1/q + 2/r = 1 − m`.
pub fn admissible(q: Lebesgue, r: Lebesgue, m: Ratio<i64>) -> bool {
    let two = Ratio::from_integer(2);
    let at_least_two = |p: Lebesgue| match p {
        Lebesgue::Finite(p) => p >= two,
        Lebesgue::Infinity => true,
    };
    if !at_least_two(q) || !at_least_two(r) {
        return false;
    }
    if q == Lebesgue::Infinity && r == Lebesgue::Infinity {
        return false;
    }
    let (iq, ir) = (q.reciprocal(), r.reciprocal());
    iq + ir / two <= Ratio::new(1, 4) && iq + two * ir == Ratio::one() - m
}

/// `μ = 1 − m(n₁) / (m(n₂) m(n₃) m(n₄))`.
pub fn mu_symbol(n1: Mode, n2: Mode, n3: Mode, n4: Mode, params: &IMethodParams) -> f64 {
    1.0 - m_symbol(n1, params) / (m_symbol(n2, params) * m_symbol(n3, params) * m_symbol(n4, params))
}

/// The two sides of the mollified-energy balance over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalIncrement {
    /// `∫_J ∫ ∂ₜIu ((Iu)³ − I(u³)) dx dt`.
    pub integral: f64,
    /// `E(Iu(b)) − E(Iu(a))`.
    pub energy_change: f64,
}

struct ISamples {
    times: Vec<f64>,
    iu: Vec<SpectralField>,
    iv: Vec<SpectralField>,
    table: Vec<f64>,
    u: Vec<SpectralField>,
}

fn i_samples(traj: &Trajectory, params: &IMethodParams) -> ISamples {
    let table = i_table(traj.grid(), params);
    let mut out = ISamples {
        times: traj.times(),
        iu: Vec::new(),
        iv: Vec::new(),
        table,
        u: Vec::new(),
    };
    for s in traj.states() {
        let u = s.u_hat();
        out.iu.push(apply_table(&u, &out.table));
        out.iv.push(apply_table(&s.v_hat(), &out.table));
        out.u.push(u);
    }
    out
}

pub fn increment_physical(traj: &Trajectory, params: &IMethodParams) -> PhysicalIncrement {
    increment_physical_with(traj, params, Dealias::Padded)
}

/// As [`increment_physical`] with a chosen cube evaluation.
pub fn increment_physical_with(
    traj: &Trajectory,
    params: &IMethodParams,
    dealias: Dealias,
) -> PhysicalIncrement {
    let data = i_samples(traj, params);
    let weights = trapezoid_weights(&data.times);
    let mut integral = 0.0;
    for k in 0..data.times.len() {
        if weights[k] == 0.0 {
            continue;
        }
        let cube_of_i = cube_spectral(&data.iu[k], dealias);
        let i_of_cube = apply_table(&cube_spectral(&data.u[k], dealias), &data.table);
        let defect = cube_of_i.sub(&i_of_cube).expect("same grid");
        integral += weights[k] * data.iv[k].inner(&defect).expect("same grid");
    }
    let last = data.times.len() - 1;
    let energy_change =
        energy_spectral(&data.iu[last], &data.iv[last]) - energy_spectral(&data.iu[0], &data.iv[0]);
    PhysicalIncrement {
        integral,
        energy_change,
    }
}

/// The increment as a constrained four-mode sum, split over dyadic shells.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementReport {
    pub window: (f64, f64),
    pub physical: PhysicalIncrement,
    pub fourier: f64,
    /// Contributions keyed by the shell scales `(M₁, M₂, M₃, M₄)`; they sum to
    /// `fourier`.
    pub shells: BTreeMap<[u64; 4], f64>,
}

/// Shell memberships of every mode: `(level index, weight)` pairs whose
/// weights sum to one.
fn shell_weights(grid: TorusGrid, levels: &[u64]) -> Vec<Vec<(usize, f64)>> {
    grid.radii()
        .into_iter()
        .map(|r| {
            let mut parts: Vec<(usize, f64)> = levels
                .iter()
                .enumerate()
                .map(|(i, &m)| (i, if m == 0 { phi(r) } else { psi(r / m as f64) }))
                .filter(|&(_, w)| w > 0.0)
                .collect();
            let total: f64 = parts.iter().map(|p| p.1).sum();
            for p in &mut parts {
                p.1 /= total;
            }
            parts
        })
        .collect()
}

/// `∑_{n₁+n₂+n₃+n₄=0} ∫_J μ ∂ₜÎu(n₁) Îu(n₂) Îu(n₃) Îu(n₄) dt` by direct
/// enumeration; every mode ranges over the grid minus its Nyquist line.
pub fn increment_fourier(traj: &Trajectory, params: &IMethodParams) -> Result<IncrementReport> {
    let grid = traj.grid();
    if grid.n() > MAX_FOURIER_GRID {
        return Err(Error::Resource(format!(
            "four-mode sum needs grid <= {MAX_FOURIER_GRID}, got {}",
            grid.n()
        )));
    }
    let data = i_samples(traj, params);
    let weights = trapezoid_weights(&data.times);
    let levels = dyadic_levels(grid);
    let nl = levels.len();
    let shells_of = shell_weights(grid, &levels);
    let active: Vec<usize> = (0..grid.len())
        .filter(|&i| !grid.is_nyquist(grid.mode_at(i)))
        .collect();
    let m: Vec<f64> = grid.radii().into_iter().map(|r| m_radial(r, params)).collect();

    let mut dense = vec![0.0; nl * nl * nl * nl];
    let mut total = 0.0;
    for &i2 in &active {
        let n2 = grid.mode_at(i2);
        for &i3 in &active {
            let n3 = grid.mode_at(i3);
            for &i4 in &active {
                let n4 = grid.mode_at(i4);
                let n1 = -(n2 + n3 + n4);
                let Some(i1) = grid.index(n1) else { continue };
                if grid.is_nyquist(n1) {
                    continue;
                }
                let mu = 1.0 - m[i1] / (m[i2] * m[i3] * m[i4]);
                if mu == 0.0 {
                    continue;
                }
                let mut value = 0.0;
                for k in 0..data.times.len() {
                    if weights[k] == 0.0 {
                        continue;
                    }
                    let term: Complex64 = data.iv[k].coeffs()[i1]
                        * data.iu[k].coeffs()[i2]
                        * data.iu[k].coeffs()[i3]
                        * data.iu[k].coeffs()[i4];
                    value += weights[k] * term.re;
                }
                let value = mu * value;
                total += value;
                for &(a, wa) in &shells_of[i1] {
                    for &(b, wb) in &shells_of[i2] {
                        for &(c, wc) in &shells_of[i3] {
                            for &(d, wd) in &shells_of[i4] {
                                dense[((a * nl + b) * nl + c) * nl + d] += value * wa * wb * wc * wd;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut shells = BTreeMap::new();
    for (idx, &v) in dense.iter().enumerate() {
        if v != 0.0 {
            let key = [
                levels[idx / (nl * nl * nl)],
                levels[(idx / (nl * nl)) % nl],
                levels[(idx / nl) % nl],
                levels[idx % nl],
            ];
            shells.insert(key, v);
        }
    }
    Ok(IncrementReport {
        window: traj.window(),
        physical: increment_physical(traj, params),
        fourier: total,
        shells,
    })
}

/// Regimes of the `μ` estimates, with `M₂ ≥ M₃ ≥ M₄` after symmetrization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MuCase {
    /// The two largest scales are `M₁, M₂` and `M₃ ≳ N`: `|μ| ≲ 1/(m(M₃)m(M₄))`.
    OneA,
    /// The two largest scales are `M₁, M₂` and `M₃ ≪ N`: `|μ| ≲ M₃/M₂`.
    OneB,
    /// The two largest scales are `M₂, M₃`: `|μ| ≲ m(M₁)/(m(M₂)² m(M₄))`.
    Two,
}

impl fmt::Display for MuCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MuCase::OneA => "1.a",
            MuCase::OneB => "1.b",
            MuCase::Two => "2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuCaseStats {
    pub case: MuCase,
    pub samples: usize,
    /// Largest `|μ| / bound` observed.
    pub max_ratio: f64,
    pub worst: Option<[Mode; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuCaseReport {
    pub cases: Vec<MuCaseStats>,
    /// Quadruples with every `|nᵢ| ≤ N` among the samples.
    pub low_samples: usize,
    /// Largest `|μ|` among those; zero when `μ` vanishes there.
    pub low_max_mu: f64,
}

impl MuCaseReport {
    pub fn case(&self, case: MuCase) -> &MuCaseStats {
        self.cases.iter().find(|c| c.case == case).expect("every case present")
    }
}

fn dyadic_scale(mode: Mode) -> u64 {
    let r = mode.norm();
    if r < 1.0 {
        0
    } else {
        1u64 << (r.log2().floor() as u32)
    }
}

/// Modes sampled by the case sweep: the lattice ball of radius 2 plus points
/// at radii `M` and `3M/2` for every dyadic `M ≤ grid_max`, at eight angles.
fn case_sample_modes(grid_max: f64) -> Vec<Mode> {
    let mut modes = Vec::new();
    for k1 in -2i64..=2 {
        for k2 in -2i64..=2 {
            if k1 * k1 + k2 * k2 <= 4 {
                modes.push(Mode { k1, k2 });
            }
        }
    }
    let mut m = 1.0;
    while m <= grid_max {
        for radius in [m, 1.5 * m] {
            for a in 0..8 {
                let angle = PI / 4.0 * a as f64 + 0.3;
                let mode = Mode {
                    k1: (radius * angle.cos()).round() as i64,
                    k2: (radius * angle.sin()).round() as i64,
                };
                if !modes.contains(&mode) {
                    modes.push(mode);
                }
            }
        }
        m *= 2.0;
    }
    modes
}

/// Samples constrained quadruples in each regime and records the worst ratio
/// of `|μ|` to the regime's bound, with `m` evaluated at the shell scales.
pub fn mu_case_bounds_check(params: &IMethodParams, grid_max: f64) -> Result<MuCaseReport> {
    let n = params.cutoff();
    if grid_max > 64.0 * n {
        return Err(Error::Resource(format!(
            "grid_max {grid_max} exceeds 64 N = {}",
            64.0 * n
        )));
    }
    let samples = case_sample_modes(grid_max);
    let ms: Vec<f64> = samples.iter().map(|&k| m_symbol(k, params)).collect();
    let m_at = |scale: u64| m_radial(scale as f64, params);
    let mut stats: Vec<MuCaseStats> = [MuCase::OneA, MuCase::OneB, MuCase::Two]
        .into_iter()
        .map(|case| MuCaseStats {
            case,
            samples: 0,
            max_ratio: 0.0,
            worst: None,
        })
        .collect();
    let mut low_samples = 0;
    let mut low_max_mu: f64 = 0.0;
    let norms: Vec<f64> = samples.iter().map(|k| k.norm()).collect();
    for i2 in 0..samples.len() {
        for i3 in 0..samples.len() {
            if norms[i3] > norms[i2] {
                continue;
            }
            for i4 in 0..samples.len() {
                if norms[i4] > norms[i3] {
                    continue;
                }
                let (n2, n3, n4) = (samples[i2], samples[i3], samples[i4]);
                let n1 = -(n2 + n3 + n4);
                if n1.norm() > grid_max {
                    continue;
                }
                let mu = 1.0 - m_symbol(n1, params) / (ms[i2] * ms[i3] * ms[i4]);
                if n1.norm() <= n && norms[i2] <= n {
                    low_samples += 1;
                    low_max_mu = low_max_mu.max(mu.abs());
                    continue;
                }
                let scales = [dyadic_scale(n1), dyadic_scale(n2), dyadic_scale(n3), dyadic_scale(n4)];
                let mut sorted = scales;
                sorted.sort_unstable_by(|a, b| b.cmp(a));
                if (sorted[0] as f64) < n || sorted[0] > 4 * sorted[1].max(1) {
                    continue;
                }
                let [m1, m2, m3, m4] = scales;
                let (case, bound) = if m1 >= m3 {
                    if m3 as f64 >= n {
                        (MuCase::OneA, 1.0 / (m_at(m3) * m_at(m4)))
                    } else {
                        (MuCase::OneB, m3.max(1) as f64 / m2 as f64)
                    }
                } else {
                    (MuCase::Two, m_at(m1) / (m_at(m2) * m_at(m2) * m_at(m4)))
                };
                let entry = &mut stats[case as usize];
                entry.samples += 1;
                let ratio = mu.abs() / bound;
                if ratio > entry.max_ratio {
                    entry.max_ratio = ratio;
                    entry.worst = Some([n1, n2, n3, n4]);
                }
            }
        }
    }
    Ok(MuCaseReport {
        cases: stats,
        low_samples,
        low_max_mu,
    })
}

/// `(X_l, X_nl)`: the four high-frequency Strichartz norms of the linear and
/// nonlinear parts of the window, each part reduced to its maximum.
pub fn smoothing_norms(traj: &Trajectory, params: &IMethodParams) -> Result<(f64, f64)> {
    let (linear, nonlinear) = window_decompose(traj)?;
    let high = Symbol::high_part(params).times(Symbol::M(*params));
    let filtered = |sigma: f64| Symbol::JapPower { sigma }.times(high.clone());
    let norms = [
        (filtered(1.0 - 3.0 / 8.0), MixedNormSpec::new(8.0, 4.0)?, Component::U),
        (filtered(-3.0 / 8.0), MixedNormSpec::new(8.0, 4.0)?, Component::V),
        (filtered(1.0 - 1.0 / 4.0), MixedNormSpec::new(12.0, 3.0)?, Component::U),
        (filtered(-1.0 / 4.0), MixedNormSpec::new(12.0, 3.0)?, Component::V),
    ];
    let x = |part: &Trajectory| {
        norms
            .iter()
            .map(|(sym, spec, c)| mixed_norm(part, *spec, Some(sym), *c))
            .fold(0.0, f64::max)
    };
    Ok((x(&linear), x(&nonlinear)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupSeries {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Set when some sample exceeds `growth_factor` times the initial norm.
    pub flagged: bool,
}

pub fn blowup_monitor(traj: &Trajectory, s: f64, growth_factor: f64) -> BlowupSeries {
    let norms: Vec<f64> = traj.states().iter().map(|st| sobolev_pair_norm(st, s)).collect();
    let limit = growth_factor * norms[0];
    let flagged = norms.iter().any(|&x| x > limit);
    BlowupSeries {
        times: traj.times(),
        norms,
        flagged,
    }
}
