//! One configured evolution: diagnostics per sample and per window, persisted
//! as a run directory.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.toml      configuration echo
//! record.toml      version, completion flag, step size, drift and blow-up flags
//! series.csv       time,energy,mollified_energy,hs_pair_norm,potential_norm
//! windows.csv      index,start,end,z_quarter,z_three_eighths,increment_physical,
//!                  increment_fourier,energy_change,sup_variation,x_linear,x_nonlinear
//! snapshots.csv    index,time,u_file,v_file
//! snapshots/       u_NNNNN.twl, v_NNNNN.twl
//! ```
//!
//! `increment_fourier` is empty on grids above the direct-enumeration limit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    blowup_monitor, energy_spectral, increment_fourier, increment_physical, mollified_energy,
    smoothing_norms, sobolev_pair_norm, z_functional, MAX_FOURIER_GRID,
};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::data::initial_state;
use crate::harness::VERSION;
use crate::multipliers::{apply_table, Symbol};
use crate::solver::{EvolvePlan, Integrator, Trajectory, WaveState};
use crate::spectral::{quartic_integral, save_snapshot};

/// Growth of the `H^s × H^{s−1}` norm that marks a run as suspicious.
pub const BLOWUP_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub time: f64,
    /// The conserved energy of the evolution (quadratic part only for linear runs).
    pub energy: f64,
    pub mollified_energy: f64,
    pub hs_pair_norm: f64,
    /// `‖Iu(t)‖_{L⁴}`.
    pub potential_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub z_quarter: f64,
    pub z_three_eighths: f64,
    pub increment_physical: f64,
    pub increment_fourier: Option<f64>,
    pub energy_change: f64,
    /// `sup_t |E(Iu(t)) − E(Iu(start))|` over the window's samples.
    pub sup_variation: f64,
    pub x_linear: f64,
    pub x_nonlinear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub index: usize,
    pub time: f64,
    pub u_file: String,
    pub v_file: String,
}

/// Contents of `record.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub version: String,
    pub complete: bool,
    pub dt: f64,
    pub samples: usize,
    pub windows: usize,
    /// `max_t |E(t) − E(0)| / E(0)`, absolute when `E(0) = 0`.
    pub energy_drift: f64,
    pub blowup_flagged: bool,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: RunConfig,
    pub summary: RunSummary,
    pub series: Vec<SeriesRow>,
    pub windows: Vec<WindowRow>,
    pub snapshots: Vec<SnapshotRow>,
    pub final_state: WaveState,
    snapshot_states: Vec<WaveState>,
}

fn conserved_energy(state: &WaveState, linear: bool) -> f64 {
    let (u, v) = (state.u_hat(), state.v_hat());
    let e = energy_spectral(&u, &v);
    if linear {
        e - 0.25 * quartic_integral(&u)
    } else {
        e
    }
}

fn evolve(config: &RunConfig) -> Result<Trajectory> {
    let windows = config.windows()?;
    let mut plan = EvolvePlan::new(config.resolved_dt()?);
    plan.sample_every = config.sample_stride;
    plan.stops = windows.iter().flat_map(|&(a, b)| [a, b]).collect();
    let integrator = if config.linear { Integrator::linear() } else { Integrator::default() };
    let state = initial_state(config)?;
    integrator.evolve_planned(&state, (0.0, config.horizon), &plan)
}

/// Evolves the configured data and evaluates every diagnostic.
pub fn run_experiment(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let params = config.params()?;
    let s = config.s_f64();
    let traj = evolve(config)?;

    let i_table = Symbol::M(params).tabulate(traj.grid());
    let series: Vec<SeriesRow> = traj
        .states()
        .iter()
        .map(|st| SeriesRow {
            time: st.time,
            energy: conserved_energy(st, config.linear),
            mollified_energy: mollified_energy(st, &params),
            hs_pair_norm: sobolev_pair_norm(st, s),
            potential_norm: quartic_integral(&apply_table(&st.u_hat(), &i_table))
                .max(0.0)
                .powf(0.25),
        })
        .collect();

    let mut windows = Vec::new();
    for (index, (a, b)) in config.windows()?.into_iter().enumerate() {
        let part = traj.restrict(a, b)?;
        let physical = increment_physical(&part, &params);
        let fourier = if traj.grid().n() <= MAX_FOURIER_GRID {
            Some(increment_fourier(&part, &params)?.fourier)
        } else {
            None
        };
        let base = mollified_energy(part.first(), &params);
        let sup_variation = part
            .states()
            .iter()
            .map(|st| (mollified_energy(st, &params) - base).abs())
            .fold(0.0, f64::max);
        let (x_linear, x_nonlinear) = smoothing_norms(&part, &params)?;
        windows.push(WindowRow {
            index,
            start: a,
            end: b,
            z_quarter: z_functional(&part, 0.25, &params)?,
            z_three_eighths: z_functional(&part, 0.375, &params)?,
            increment_physical: physical.integral,
            increment_fourier: fourier,
            energy_change: physical.energy_change,
            sup_variation,
            x_linear,
            x_nonlinear,
        });
    }

    let e0 = series[0].energy;
    let deviation = series.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max);
    let energy_drift = if e0 > 0.0 { deviation / e0 } else { deviation };
    let blowup = blowup_monitor(&traj, s, BLOWUP_FACTOR);
    let blowup_flagged = blowup.flagged || blowup.norms.iter().any(|x| !x.is_finite());

    let mut snapshots = Vec::new();
    let mut snapshot_states = Vec::new();
    if config.snapshot_stride > 0 {
        for (k, st) in traj.states().iter().enumerate().step_by(config.snapshot_stride) {
            snapshots.push(SnapshotRow {
                index: k,
                time: st.time,
                u_file: format!("snapshots/u_{k:05}.twl"),
                v_file: format!("snapshots/v_{k:05}.twl"),
            });
            snapshot_states.push(st.clone());
        }
    }

    Ok(RunRecord {
        config: config.clone(),
        summary: RunSummary {
            version: VERSION.to_string(),
            complete: true,
            dt: config.resolved_dt()?,
            samples: traj.len(),
            windows: windows.len(),
            energy_drift,
            blowup_flagged,
        },
        series,
        windows,
        snapshots,
        final_state: traj.last().clone(),
        snapshot_states,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    if rows.is_empty() {
        w.write_record(header).map_err(csv_error)?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

fn write_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    let text = toml::to_string(summary).expect("summary serializes");
    fs::write(dir.join("record.toml"), text)?;
    Ok(())
}

impl RunRecord {
    /// Writes every file of the run directory; `record.toml` goes last.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), self.config.to_toml_string())?;
        write_csv(
            &dir.join("series.csv"),
            &self.series,
            &["time", "energy", "mollified_energy", "hs_pair_norm", "potential_norm"],
        )?;
        write_csv(
            &dir.join("windows.csv"),
            &self.windows,
            &[
                "index",
                "start",
                "end",
                "z_quarter",
                "z_three_eighths",
                "increment_physical",
                "increment_fourier",
                "energy_change",
                "sup_variation",
                "x_linear",
                "x_nonlinear",
            ],
        )?;
        write_csv(&dir.join("snapshots.csv"), &self.snapshots, &["index", "time", "u_file", "v_file"])?;
        if !self.snapshots.is_empty() {
            fs::create_dir_all(dir.join("snapshots"))?;
        }
        for (row, st) in self.snapshots.iter().zip(&self.snapshot_states) {
            save_snapshot(&dir.join(&row.u_file), &st.u_hat())?;
            save_snapshot(&dir.join(&row.v_file), &st.v_hat())?;
        }
        write_summary(dir, &self.summary)
    }
}

/// Runs `config` into `dir`. The directory is marked incomplete before the
/// evolution starts and only marked complete once every file is written.
pub fn run_experiment_in(config: &RunConfig, dir: &Path) -> Result<RunRecord> {
    config.validate()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), config.to_toml_string())?;
    write_summary(
        dir,
        &RunSummary {
            version: VERSION.to_string(),
            complete: false,
            dt: config.resolved_dt()?,
            samples: 0,
            windows: 0,
            energy_drift: 0.0,
            blowup_flagged: false,
        },
    )?;
    let record = run_experiment(config)?;
    record.persist(dir)?;
    Ok(record)
}

/// Reads `record.toml` from a run directory.
pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(dir.join("record.toml"))?;
    toml::from_str(&text).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{DataSpec, SizeRule, TimeStep, WindowPlan};
    use crate::ledger::Q;
    use crate::spectral::load_snapshot;

    fn base(grid_n: usize, horizon: f64) -> RunConfig {
        RunConfig::new(Q::new(1, 2), 2.0, grid_n, horizon, 3)
    }

    /// Classical RK4 for `u'' = −u³` with a tiny step.
    fn oscillator_reference(c: f64, t: f64) -> f64 {
        let f = |y: [f64; 2]| [y[1], -y[0].powi(3)];
        let steps = 200_000;
        let h = t / steps as f64;
        let mut y = [c, 0.0];
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f([y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = f([y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y[0]
    }

    #[test]
    fn constant_data_follows_the_cubic_oscillator() {
        let reference = oscillator_reference(1.0, 1.0);
        let mut errors = Vec::new();
        for dt in [0.02, 0.01] {
            let mut config = base(4, 1.0);
            config.data = DataSpec::Constant { c: 1.0 };
            config.dt = TimeStep::Fixed(dt);
            let record = run_experiment(&config).unwrap();
            let u = record.final_state.u.values();
            assert!(u.iter().all(|x| (x - u[0]).abs() < 1e-14));
            errors.push((u[0] - reference).abs());
        }
        assert!(errors[1] < 1e-4, "{errors:?}");
        let order = (errors[0] / errors[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn zero_data_gives_zero_diagnostics() {
        let mut config = base(8, 0.05);
        config.data = DataSpec::Constant { c: 0.0 };
        let record = run_experiment(&config).unwrap();
        for r in &record.series {
            assert_eq!([r.energy, r.mollified_energy, r.hs_pair_norm, r.potential_norm], [0.0; 4]);
        }
        let w = &record.windows[0];
        let values = [
            w.z_quarter,
            w.z_three_eighths,
            w.increment_physical,
            w.increment_fourier.unwrap(),
            w.energy_change,
            w.sup_variation,
            w.x_linear,
            w.x_nonlinear,
        ];
        assert_eq!(values, [0.0; 8]);
        assert!(!record.summary.blowup_flagged && record.summary.energy_drift == 0.0);
    }

    #[test]
    fn linear_eigenmode_run_is_clean() {
        let mut config = base(16, 0.5);
        config.linear = true;
        config.data = DataSpec::Eigenmode { n: [2, 1], amplitude: 0.7 };
        let record = run_experiment(&config).unwrap();
        assert!(record.summary.energy_drift <= 1e-10, "{}", record.summary.energy_drift);
        assert!(!record.summary.blowup_flagged);
        assert!(record.windows[0].x_nonlinear == 0.0);
    }

    #[test]
    fn windows_and_increments_agree() {
        let mut config = base(8, 0.2);
        config.window_plan = Some(WindowPlan {
            size_rule: SizeRule::Length { length: 0.1 },
            count: 2,
        });
        let record = run_experiment(&config).unwrap();
        assert_eq!(record.windows.len(), 2);
        for w in &record.windows {
            let f = w.increment_fourier.unwrap();
            assert!((f - w.increment_physical).abs() <= 1e-8 * (1e-12 + f.abs()));
        }
        let times: Vec<f64> = record.series.iter().map(|r| r.time).collect();
        assert!(times.iter().any(|&t| (t - 0.1).abs() < 1e-12));
    }

    #[test]
    fn run_directory_is_complete_and_reproducible() {
        let mut config = base(8, 0.05);
        config.snapshot_stride = 4;
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let record = run_experiment_in(&config, d1.path()).unwrap();
        run_experiment_in(&config, d2.path()).unwrap();
        for name in ["config.toml", "record.toml", "series.csv", "windows.csv", "snapshots.csv"] {
            let a = fs::read(d1.path().join(name)).unwrap();
            assert_eq!(a, fs::read(d2.path().join(name)).unwrap(), "{name}");
        }
        let summary = read_summary(d1.path()).unwrap();
        assert!(summary.complete);
        assert_eq!(summary.version, VERSION);
        let echo = RunConfig::load(&d1.path().join("config.toml")).unwrap();
        assert_eq!(echo, config);

        let header = fs::read_to_string(d1.path().join("series.csv")).unwrap();
        assert!(header.starts_with("time,energy,mollified_energy,hs_pair_norm,potential_norm\n"));
        let first = &record.snapshots[0];
        let u = load_snapshot(&d1.path().join(&first.u_file)).unwrap();
        assert_eq!(u.coeffs(), record.snapshot_states[0].u_hat().coeffs());
    }

    #[test]
    fn failed_runs_stay_marked_incomplete() {
        let mut config = base(8, 0.05);
        config.data = DataSpec::File { path: "/nonexistent/data".into() };
        let dir = tempfile::tempdir().unwrap();
        assert!(run_experiment_in(&config, dir.path()).is_err());
        assert!(!read_summary(dir.path()).unwrap().complete);
    }
}
