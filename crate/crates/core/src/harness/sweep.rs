//! Scaling experiments: the same seed family evaluated at several cutoffs `N`.

use std::fmt::{self, Write as _};
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::{kinetic_norm, mollified_energy, potential_norm, z_functional};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::data::initial_state;
use crate::harness::fit::{fit_power_law, SlopeFit};
use crate::solver::{EvolvePlan, Integrator};

/// Quantities recorded per `(seed, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `E(Iu₀)`.
    MollifiedEnergy,
    /// `sup_{t∈J} |E(Iu(t)) − E(Iu₀)|`.
    SupVariation,
    /// `‖Iu‖_{L_t^∞ L_x^4}`.
    Potential,
    /// `‖⟨D⟩Iu‖_{L_t^∞ L_x^2}`.
    Kinetic,
    ZQuarter,
    ZThreeEighths,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::MollifiedEnergy,
        Quantity::SupVariation,
        Quantity::Potential,
        Quantity::Kinetic,
        Quantity::ZQuarter,
        Quantity::ZThreeEighths,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::MollifiedEnergy => "mollified_energy",
            Quantity::SupVariation => "sup_variation",
            Quantity::Potential => "potential",
            Quantity::Kinetic => "kinetic",
            Quantity::ZQuarter => "z_quarter",
            Quantity::ZThreeEighths => "z_three_eighths",
        }
    }

    fn index(self) -> usize {
        Quantity::ALL.iter().position(|&q| q == self).expect("listed")
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub seed: u64,
    #[serde(rename = "N")]
    pub cutoff: f64,
    pub window: f64,
    pub mollified_energy: f64,
    pub sup_variation: f64,
    pub potential: f64,
    pub kinetic: f64,
    pub z_quarter: f64,
    pub z_three_eighths: f64,
}

impl SweepRow {
    pub fn get(&self, q: Quantity) -> f64 {
        match q {
            Quantity::MollifiedEnergy => self.mollified_energy,
            Quantity::SupVariation => self.sup_variation,
            Quantity::Potential => self.potential,
            Quantity::Kinetic => self.kinetic,
            Quantity::ZQuarter => self.z_quarter,
            Quantity::ZThreeEighths => self.z_three_eighths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SlopeRow {
    quantity: Quantity,
    slope: f64,
    stderr: f64,
    ci_low: f64,
    ci_high: f64,
    r_squared: f64,
    points: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub cutoffs: Vec<f64>,
    pub rows: Vec<SweepRow>,
    fits: Vec<SlopeFit>,
}

impl SweepReport {
    /// Seed average of `q` at each cutoff, in the order of `cutoffs`.
    pub fn means(&self, q: Quantity) -> Vec<f64> {
        self.cutoffs
            .iter()
            .map(|&n| {
                let vals: Vec<f64> =
                    self.rows.iter().filter(|r| r.cutoff == n).map(|r| r.get(q)).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect()
    }

    /// Log–log slope of the seed average of `q` against `N`.
    pub fn fit(&self, q: Quantity) -> &SlopeFit {
        &self.fits[q.index()]
    }

    pub fn slope_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<18} {:>8} {:>8} {:>20} {:>7}", "quantity", "slope", "stderr", "slope ± 2·stderr", "R²")
            .unwrap();
        for q in Quantity::ALL {
            let f = self.fit(q);
            let (lo, hi) = f.interval();
            writeln!(
                out,
                "{:<18} {:>8.4} {:>8.4} {:>9.4} .. {:<8.4} {:>7.4}",
                q.name(),
                f.slope,
                f.stderr,
                lo,
                hi,
                f.r_squared
            )
            .unwrap();
        }
        out
    }

    /// Writes `sweep.csv` (one row per seed and cutoff) and `slopes.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let err = |e: csv::Error| Error::Format(e.to_string());
        let mut w = csv::Writer::from_path(dir.join("sweep.csv")).map_err(err)?;
        for row in &self.rows {
            w.serialize(row).map_err(err)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("slopes.csv")).map_err(err)?;
        for q in Quantity::ALL {
            let f = self.fit(q);
            let (ci_low, ci_high) = f.interval();
            w.serialize(SlopeRow {
                quantity: q,
                slope: f.slope,
                stderr: f.stderr,
                ci_low,
                ci_high,
                r_squared: f.r_squared,
                points: f.points,
            })
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Window `[0, |J|]` used at cutoff `n`: the first window of the plan, or
/// `[0, T]` without a plan.
fn window_for(base: &RunConfig, n: f64) -> Result<f64> {
    match &base.window_plan {
        Some(plan) => plan.size_rule.length(base.s, n),
        None => Ok(base.horizon),
    }
}

/// Runs seeds `base.seed, base.seed + 1, …` once each and evaluates every
/// cutoff in `cutoffs` on the shared trajectory.
pub fn sweep_n(base: &RunConfig, cutoffs: &[f64], seeds: usize) -> Result<SweepReport> {
    if cutoffs.len() < 3 {
        return Err(Error::config(format!(
            "an N-sweep needs at least 3 cutoffs, got {}",
            cutoffs.len()
        )));
    }
    if seeds == 0 {
        return Err(Error::config("an N-sweep needs at least one seed"));
    }
    base.validate()?;
    let mut windows = Vec::new();
    let mut params = Vec::new();
    for &n in cutoffs {
        let mut cfg = base.clone();
        cfg.cutoff = n;
        params.push(cfg.params().map_err(|e| Error::config(e.to_string()))?);
        let len = window_for(base, n)?;
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::config(format!("window length {len} at N = {n} must be positive")));
        }
        windows.push(len);
    }
    let end = windows.iter().copied().fold(0.0, f64::max);
    let mut plan = EvolvePlan::new(base.resolved_dt()?);
    plan.sample_every = base.sample_stride;
    plan.stops = windows.clone();
    let integrator = if base.linear { Integrator::linear() } else { Integrator::default() };

    let mut rows = Vec::new();
    for k in 0..seeds as u64 {
        let mut cfg = base.clone();
        cfg.seed = base.seed.wrapping_add(k);
        let traj = integrator.evolve_planned(&initial_state(&cfg)?, (0.0, end), &plan)?;
        for ((&n, p), &len) in cutoffs.iter().zip(&params).zip(&windows) {
            let part = traj.restrict(0.0, len)?;
            let e0 = mollified_energy(part.first(), p);
            let sup_variation = part
                .states()
                .iter()
                .map(|st| (mollified_energy(st, p) - e0).abs())
                .fold(0.0, f64::max);
            rows.push(SweepRow {
                seed: cfg.seed,
                cutoff: n,
                window: len,
                mollified_energy: e0,
                sup_variation,
                potential: potential_norm(&part, p),
                kinetic: kinetic_norm(&part, p),
                z_quarter: z_functional(&part, 0.25, p)?,
                z_three_eighths: z_functional(&part, 0.375, p)?,
            });
        }
    }
    let mut report = SweepReport {
        cutoffs: cutoffs.to_vec(),
        rows,
        fits: Vec::new(),
    };
    report.fits = Quantity::ALL
        .iter()
        .map(|&q| fit_power_law(cutoffs, &report.means(q)))
        .collect::<Result<_>>()?;
    Ok(report)
}
