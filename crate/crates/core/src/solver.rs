//! Time evolution of `∂ₜₜu − Δu = −u³` on the unit torus.
//!
//! The linear flow is applied exactly per Fourier mode with `ω(n) = 2π|n|`;
//! the cubic term enters through a Strang split
//! `L(dt/2) ∘ K(dt) ∘ L(dt/2)` with the dealiased cube in the kick `K`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{
    cube_spectral, forward_transform, inverse_transform, same_grid, Dealias, RealField,
    SpectralField, TorusGrid,
};

/// Relative slack when matching sample times to requested instants.
const TIME_TOL: f64 = 1e-12;

/// Displacement, velocity and time.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u: RealField,
    pub v: RealField,
    pub time: f64,
}

impl WaveState {
    pub fn new(u: RealField, v: RealField, time: f64) -> Result<Self> {
        same_grid(u.grid(), v.grid())?;
        Ok(WaveState { u, v, time })
    }

    pub fn zeros(grid: TorusGrid, time: f64) -> Self {
        WaveState {
            u: RealField::zeros(grid),
            v: RealField::zeros(grid),
            time,
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.u.grid()
    }

    pub fn from_spectral(u: &SpectralField, v: &SpectralField, time: f64) -> Result<Self> {
        same_grid(u.grid(), v.grid())?;
        Ok(WaveState {
            u: inverse_transform(u)?,
            v: inverse_transform(v)?,
            time,
        })
    }

    pub fn u_hat(&self) -> SpectralField {
        forward_transform(&self.u)
    }

    pub fn v_hat(&self) -> SpectralField {
        forward_transform(&self.v)
    }

    fn difference(&self, other: &WaveState) -> Result<WaveState> {
        Ok(WaveState {
            u: self.u.combine(1.0, &other.u, -1.0)?,
            v: self.v.combine(1.0, &other.v, -1.0)?,
            time: self.time,
        })
    }
}

/// Samples of one evolution over `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    window: (f64, f64),
    dt: f64,
    states: Vec<WaveState>,
}

impl Trajectory {
    fn from_states(dt: f64, states: Vec<WaveState>) -> Self {
        let window = (states[0].time, states[states.len() - 1].time);
        Trajectory { window, dt, states }
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[WaveState] {
        &self.states
    }

    pub fn into_states(self) -> Vec<WaveState> {
        self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn grid(&self) -> TorusGrid {
        self.states[0].grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn first(&self) -> &WaveState {
        &self.states[0]
    }

    pub fn last(&self) -> &WaveState {
        &self.states[self.states.len() - 1]
    }

    /// The samples lying in `[a, b]`; both endpoints must be sample times.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Trajectory> {
        if b < a {
            return Err(Error::domain(format!("empty window [{a}, {b}]")));
        }
        let tol = TIME_TOL * (1.0 + a.abs().max(b.abs()));
        let find = |t: f64| self.states.iter().position(|s| (s.time - t).abs() <= tol);
        let (Some(i), Some(j)) = (find(a), find(b)) else {
            return Err(Error::domain(format!(
                "window [{a}, {b}] endpoints are not sample times of the trajectory"
            )));
        };
        Ok(Trajectory::from_states(self.dt, self.states[i..=j].to_vec()))
    }
}

/// Angular frequency `2π|n|` at every mode of the grid.
fn frequencies(grid: TorusGrid) -> Vec<f64> {
    grid.radii().into_iter().map(|r| 2.0 * PI * r).collect()
}

/// The exact linear flow over a fixed duration, tabulated per mode.
struct Propagator {
    cos: Vec<f64>,
    /// `sin(ωt)/ω`, with the limit `t` at `ω = 0`.
    sinc: Vec<f64>,
    /// `−ω sin(ωt)`.
    msin: Vec<f64>,
}

impl Propagator {
    fn new(omega: &[f64], t: f64) -> Self {
        let mut cos = Vec::with_capacity(omega.len());
        let mut sinc = Vec::with_capacity(omega.len());
        let mut msin = Vec::with_capacity(omega.len());
        for &w in omega {
            let (s, c) = (w * t).sin_cos();
            cos.push(c);
            sinc.push(if w == 0.0 { t } else { s / w });
            msin.push(-w * s);
        }
        Propagator { cos, sinc, msin }
    }

    fn apply(&self, u: &mut SpectralField, v: &mut SpectralField) {
        let uc = u.coeffs_mut();
        let vc = v.coeffs_mut();
        for i in 0..uc.len() {
            let (a, b) = (uc[i], vc[i]);
            uc[i] = a * self.cos[i] + b * self.sinc[i];
            vc[i] = a * self.msin[i] + b * self.cos[i];
        }
    }
}

/// Exact linear evolution of spectral data by a (possibly negative) duration.
pub fn linear_propagate_spectral(
    u: &SpectralField,
    v: &SpectralField,
    t: f64,
) -> Result<(SpectralField, SpectralField)> {
    same_grid(u.grid(), v.grid())?;
    let (mut u, mut v) = (u.clone(), v.clone());
    Propagator::new(&frequencies(u.grid()), t).apply(&mut u, &mut v);
    Ok((u, v))
}

pub fn linear_propagate(state: &WaveState, t: f64) -> WaveState {
    let (u, v) = linear_propagate_spectral(&state.u_hat(), &state.v_hat(), t)
        .expect("state fields share a grid");
    WaveState::from_spectral(&u, &v, state.time + t).expect("real data stays real")
}

/// Largest admissible step on an `n × n` grid: `0.5 / (π n)`.
pub fn cfl_limit(grid: TorusGrid) -> f64 {
    0.5 / (PI * grid.n() as f64)
}

/// Step size, sampling cadence and forced stop times of one evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolvePlan {
    pub dt: f64,
    /// Record a sample every this many steps (at least 1).
    pub sample_every: usize,
    /// Instants the integrator lands on exactly and always records.
    pub stops: Vec<f64>,
}

impl EvolvePlan {
    pub fn new(dt: f64) -> Self {
        EvolvePlan {
            dt,
            sample_every: 1,
            stops: Vec::new(),
        }
    }
}

/// Split-step integrator; `coupling` multiplies the cubic term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub coupling: f64,
    pub dealias: Dealias,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            coupling: 1.0,
            dealias: Dealias::Padded,
        }
    }
}

struct SpectralStepper {
    integrator: Integrator,
    omega: Vec<f64>,
    half: Option<(f64, Propagator)>,
}

impl SpectralStepper {
    fn new(integrator: Integrator, grid: TorusGrid) -> Self {
        SpectralStepper {
            integrator,
            omega: frequencies(grid),
            half: None,
        }
    }

    fn step(&mut self, u: &mut SpectralField, v: &mut SpectralField, dt: f64) {
        let cached = matches!(&self.half, Some((h, _)) if *h == dt);
        if !cached {
            self.half = Some((dt, Propagator::new(&self.omega, dt / 2.0)));
        }
        let prop = &self.half.as_ref().unwrap().1;
        prop.apply(u, v);
        if self.integrator.coupling != 0.0 {
            let cube = cube_spectral(u, self.integrator.dealias);
            let kick = -dt * self.integrator.coupling;
            for (vc, cc) in v.coeffs_mut().iter_mut().zip(cube.coeffs()) {
                *vc += cc * kick;
            }
        }
        prop.apply(u, v);
    }
}

impl Integrator {
    /// A step without the cubic term; the evolution reduces to the linear flow.
    pub fn linear() -> Self {
        Integrator {
            coupling: 0.0,
            ..Integrator::default()
        }
    }

    pub fn step(&self, state: &WaveState, dt: f64) -> Result<WaveState> {
        if !(dt > 0.0) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        let (mut u, mut v) = (state.u_hat(), state.v_hat());
        SpectralStepper::new(*self, state.grid()).step(&mut u, &mut v, dt);
        WaveState::from_spectral(&u, &v, state.time + dt)
    }

    /// Evolves from `state` (at time `a`) to `b`, sampling after every step.
    pub fn evolve(&self, state: &WaveState, window: (f64, f64), dt: f64) -> Result<Trajectory> {
        self.evolve_planned(state, window, &EvolvePlan::new(dt))
    }

    pub fn evolve_planned(
        &self,
        state: &WaveState,
        window: (f64, f64),
        plan: &EvolvePlan,
    ) -> Result<Trajectory> {
        let (a, b) = window;
        let grid = state.grid();
        if !(b >= a) {
            return Err(Error::domain(format!("window [{a}, {b}] is reversed")));
        }
        if (state.time - a).abs() > TIME_TOL * (1.0 + a.abs()) {
            return Err(Error::domain(format!(
                "state time {} differs from window start {a}",
                state.time
            )));
        }
        let limit = cfl_limit(grid);
        if !(plan.dt > 0.0) {
            return Err(Error::config(format!("time step must be positive, got {}", plan.dt)));
        }
        if plan.dt > limit {
            return Err(Error::config(format!(
                "time step {} exceeds the CFL limit {limit:.6e} for grid {}",
                plan.dt,
                grid.n()
            )));
        }
        let every = plan.sample_every.max(1);
        let mut targets: Vec<f64> = plan.stops.iter().copied().filter(|&t| t > a && t < b).collect();
        targets.push(b);
        targets.sort_by(f64::total_cmp);
        targets.dedup_by(|x, y| (*x - *y).abs() <= TIME_TOL * (1.0 + y.abs()));

        let mut states = vec![WaveState { time: a, ..state.clone() }];
        let (mut u, mut v) = (state.u_hat(), state.v_hat());
        let mut stepper = SpectralStepper::new(*self, grid);
        let mut count = 0usize;
        let mut start = a;
        for &target in &targets {
            if target <= start {
                continue;
            }
            let length = target - start;
            // Steps of exactly dt, then a shortened remainder; a remainder below
            // rounding level is absorbed into the previous step.
            let full = ((length / plan.dt) * (1.0 + 1e-12)).floor() as usize;
            let remainder = length - full as f64 * plan.dt;
            let absorb = remainder <= 1e-9 * plan.dt;
            let steps = if absorb { full.max(1) } else { full + 1 };
            for i in 0..steps {
                let t0 = start + i as f64 * plan.dt;
                let last = i + 1 == steps;
                let t1 = if last { target } else { t0 + plan.dt };
                stepper.step(&mut u, &mut v, t1 - t0);
                count += 1;
                if last || count % every == 0 {
                    states.push(WaveState::from_spectral(&u, &v, t1)?);
                }
            }
            start = target;
        }
        Ok(Trajectory::from_states(plan.dt, states))
    }
}

/// Splits each sample into the free evolution of the window's initial data
/// and the exact remainder `u − u_l`.
pub fn window_decompose(traj: &Trajectory) -> Result<(Trajectory, Trajectory)> {
    let first = traj.first();
    let (u0, v0) = (first.u_hat(), first.v_hat());
    let omega = frequencies(traj.grid());
    let mut linear = Vec::with_capacity(traj.len());
    let mut nonlinear = Vec::with_capacity(traj.len());
    for (i, state) in traj.states().iter().enumerate() {
        let free = if i == 0 {
            first.clone()
        } else {
            let (mut u, mut v) = (u0.clone(), v0.clone());
            Propagator::new(&omega, state.time - first.time).apply(&mut u, &mut v);
            WaveState::from_spectral(&u, &v, state.time)?
        };
        nonlinear.push(state.difference(&free)?);
        linear.push(free);
    }
    Ok((
        Trajectory::from_states(traj.dt, linear),
        Trajectory::from_states(traj.dt, nonlinear),
    ))
}

/// Spectral coefficients of a whole trajectory, for diagnostics that sweep
/// over samples repeatedly.
pub fn spectral_samples(traj: &Trajectory) -> Vec<(f64, SpectralField, SpectralField)> {
    traj.states()
        .iter()
        .map(|s| (s.time, s.u_hat(), s.v_hat()))
        .collect()
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spectral::Mode;

    fn smooth_data(grid: TorusGrid, seed: u64, amplitude: f64) -> WaveState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes_u = Vec::new();
        let mut modes_v = Vec::new();
        let kmax = 4.min(grid.half() - 1);
        for k1 in -kmax..=kmax {
            for k2 in -kmax..=kmax {
                let mode = Mode { k1, k2 };
                let w = amplitude / (1.0 + mode.norm_sq() as f64).powi(2);
                let mut draw = || {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * w
                };
                modes_u.push((mode, draw()));
                modes_v.push((mode, draw()));
            }
        }
        let fix_zero = |m: &mut Vec<(Mode, Complex64)>| {
            for (mode, c) in m.iter_mut() {
                if *mode == Mode::ZERO {
                    c.im = 0.0;
                }
            }
        };
        fix_zero(&mut modes_u);
        fix_zero(&mut modes_v);
        let u = SpectralField::from_real_modes(grid, &modes_u).unwrap();
        let v = SpectralField::from_real_modes(grid, &modes_v).unwrap();
        WaveState::from_spectral(&u, &v, 0.0).unwrap()
    }

    fn linear_energy(state: &WaveState) -> f64 {
        let (u, v) = (state.u_hat(), state.v_hat());
        let grid = state.grid();
        let mut e = 0.0;
        for (i, r) in grid.radii().into_iter().enumerate() {
            let w = 2.0 * PI * r;
            e += 0.5 * v.coeffs()[i].norm_sqr() + 0.5 * w * w * u.coeffs()[i].norm_sqr();
        }
        e
    }

    fn state_diff(a: &WaveState, b: &WaveState) -> f64 {
        a.u.max_abs_diff(&b.u).max(a.v.max_abs_diff(&b.v))
    }

    #[test]
    fn eigenmode_propagation() {
        let grid = TorusGrid::new(16).unwrap();
        let u0 = RealField::from_fn(grid, |x1, _| (2.0 * PI * x1).cos());
        let state = WaveState::new(u0, RealField::zeros(grid), 0.0).unwrap();
        for t in [0.1, 0.37, 1.0, 2.25] {
            let out = linear_propagate(&state, t);
            let expected = RealField::from_fn(grid, |x1, _| (2.0 * PI * t).cos() * (2.0 * PI * x1).cos());
            assert!(out.u.max_abs_diff(&expected) < 1e-12);
            assert_eq!(out.time, t);
        }
    }

    #[test]
    fn zero_mode_is_free_motion() {
        let grid = TorusGrid::new(8).unwrap();
        let state = WaveState::new(
            RealField::constant(grid, 1.5),
            RealField::constant(grid, -0.25),
            0.0,
        )
        .unwrap();
        let out = linear_propagate(&state, 2.0);
        assert!(out.u.max_abs_diff(&RealField::constant(grid, 1.0)) < 1e-14);
        assert!(out.v.max_abs_diff(&RealField::constant(grid, -0.25)) < 1e-14);
    }

    #[test]
    fn linear_group_property_and_energy() {
        let grid = TorusGrid::new(32).unwrap();
        let state = smooth_data(grid, 1, 1.0);
        let e0 = linear_energy(&state);
        for t in [0.013, 0.5, 3.7] {
            let fwd = linear_propagate(&state, t);
            assert!((linear_energy(&fwd) - e0).abs() < 1e-12 * e0.max(1.0));
            let back = linear_propagate(&fwd, -t);
            assert!(state_diff(&back, &state) < 1e-12);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = TorusGrid::new(8).unwrap();
        let out = Integrator::default().step(&WaveState::zeros(grid, 0.0), 0.01).unwrap();
        assert_eq!(out.u.max_abs(), 0.0);
        assert_eq!(out.v.max_abs(), 0.0);
        assert!(Integrator::default().step(&WaveState::zeros(grid, 0.0), 0.0).is_err());
    }

    #[test]
    fn constant_data_matches_split_ode() {
        let grid = TorusGrid::new(8).unwrap();
        let (c, h) = (0.8, 0.01);
        let state = WaveState::new(RealField::constant(grid, c), RealField::zeros(grid), 0.0).unwrap();
        let out = Integrator::default().step(&state, h).unwrap();
        // Drift h/2, kick h, drift h/2 for u'' = -u^3 with u(0) = c, u'(0) = 0.
        let v1 = -h * c * c * c;
        let u1 = c + 0.5 * h * v1;
        assert!(out.u.max_abs_diff(&RealField::constant(grid, u1)) < 1e-15);
        assert!(out.v.max_abs_diff(&RealField::constant(grid, v1)) < 1e-15);
    }

    #[test]
    fn second_order_convergence() {
        let grid = TorusGrid::new(32).unwrap();
        let state = smooth_data(grid, 7, 3.0);
        let integ = Integrator::default();
        let run = |dt: f64| integ.evolve(&state, (0.0, 0.5), dt).unwrap().last().clone();
        let reference = run(1.0 / 16384.0);
        let errors: Vec<f64> = [256.0, 512.0, 1024.0, 2048.0]
            .iter()
            .map(|d| state_diff(&run(1.0 / d), &reference))
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.2, "order {order}, errors {errors:?}");
        }
    }

    #[test]
    fn step_is_time_reversible() {
        let grid = TorusGrid::new(16).unwrap();
        let state = smooth_data(grid, 3, 2.0);
        let integ = Integrator::default();
        let flip = |s: WaveState| WaveState {
            v: s.v.map(|x| -x),
            ..s
        };
        let back = flip(integ.step(&flip(integ.step(&state, 0.005).unwrap()), 0.005).unwrap());
        assert!(state_diff(&back, &state) < 1e-12);
    }

    #[test]
    fn evolve_window_handling() {
        let grid = TorusGrid::new(16).unwrap();
        let state = smooth_data(grid, 4, 1.0);
        let integ = Integrator::default();
        let single = integ.evolve(&state, (0.0, 0.0), 0.005).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.first(), &state);

        let traj = integ.evolve(&state, (0.0, 0.0123), 0.005).unwrap();
        assert_eq!(traj.times(), vec![0.0, 0.005, 0.01, 0.0123]);

        let err = integ.evolve(&state, (0.0, 1.0), 0.05).unwrap_err();
        assert!(matches!(err, Error::Config(ref msg) if msg.contains("9.947")), "{err}");
        assert!(integ.evolve(&state, (0.1, 1.0), 0.005).is_err());
    }

    #[test]
    fn planned_stops_and_sampling() {
        let grid = TorusGrid::new(16).unwrap();
        let state = smooth_data(grid, 5, 1.0);
        let integ = Integrator::default();
        let plan = EvolvePlan {
            dt: 0.004,
            sample_every: 3,
            stops: vec![0.01, 0.03],
        };
        let traj = integ.evolve_planned(&state, (0.0, 0.05), &plan).unwrap();
        let times = traj.times();
        for t in [0.0, 0.01, 0.03, 0.05] {
            assert!(times.iter().any(|&s| s == t), "{t} missing from {times:?}");
        }
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        let sub = traj.restrict(0.01, 0.03).unwrap();
        assert_eq!(sub.window(), (0.01, 0.03));
        assert!(traj.restrict(0.011, 0.03).is_err());
    }

    #[test]
    fn linear_integrator_matches_exact_flow() {
        let grid = TorusGrid::new(16).unwrap();
        let state = smooth_data(grid, 6, 2.0);
        let traj = Integrator::linear().evolve(&state, (0.0, 0.2), 0.005).unwrap();
        for s in traj.states() {
            let exact = linear_propagate(&state, s.time);
            assert!(state_diff(s, &exact) < 1e-10);
        }
        let (_, nonlinear) = window_decompose(&traj).unwrap();
        for s in nonlinear.states() {
            assert!(s.u.max_abs() < 1e-10 && s.v.max_abs() < 1e-10);
        }
    }

    #[test]
    fn decomposition_is_exact_complement() {
        let grid = TorusGrid::new(16).unwrap();
        let state = smooth_data(grid, 8, 3.0);
        let traj = Integrator::default().evolve(&state, (0.0, 0.1), 0.005).unwrap();
        let (lin, nl) = window_decompose(&traj).unwrap();
        assert_eq!(nl.first().u.max_abs(), 0.0);
        assert_eq!(nl.first().v.max_abs(), 0.0);
        for ((s, l), n) in traj.states().iter().zip(lin.states()).zip(nl.states()) {
            let sum_u = l.u.combine(1.0, &n.u, 1.0).unwrap();
            let sum_v = l.v.combine(1.0, &n.v, 1.0).unwrap();
            assert!(sum_u.max_abs_diff(&s.u) < 1e-14);
            assert!(sum_v.max_abs_diff(&s.v) < 1e-14);
        }
    }

    /// `−∫_a^t sin((t−τ)D)/D (u³)(τ) dτ` by the composite trapezoid rule.
    fn duhamel_oracle(traj: &Trajectory, k: usize) -> SpectralField {
        let states = traj.states();
        let t = states[k].time;
        let grid = traj.grid();
        let mut acc = SpectralField::zeros(grid);
        for j in 0..=k {
            let weight = if j == 0 || j == k { 0.5 } else { 1.0 };
            let cube = cube_spectral(&states[j].u_hat(), Dealias::Padded);
            let (moved, _) =
                linear_propagate_spectral(&SpectralField::zeros(grid), &cube, t - states[j].time)
                    .unwrap();
            acc.add_assign(&moved.scale(-weight));
        }
        // Uniform samples: the trapezoid step is the stride.
        acc.scale(states[1].time - states[0].time)
    }

    #[test]
    fn complement_matches_duhamel_quadrature() {
        let grid = TorusGrid::new(8).unwrap();
        let state = smooth_data(grid, 9, 4.0);
        let integ = Integrator::default();
        let mut errors = Vec::new();
        for dt in [0.01, 0.005] {
            let traj = integ.evolve(&state, (0.0, 0.2), dt).unwrap();
            let (_, nl) = window_decompose(&traj).unwrap();
            let k = traj.len() - 1;
            let oracle = duhamel_oracle(&traj, k);
            errors.push(nl.states()[k].u_hat().max_abs_diff(&oracle));
        }
        assert!(errors[0] < 1e-3, "{errors:?}");
        let order = (errors[0] / errors[1]).log2();
        assert!(order > 1.7, "order {order}, errors {errors:?}");
    }
}
