//! Initial data: random `H^s` pairs and the simple deterministic families.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harness::config::{DataSpec, RunConfig};
use crate::solver::WaveState;
use crate::spectral::{load_snapshot, save_snapshot, RealField, SpectralField, TorusGrid};

/// Hermitian field with `ĝ(n) = g_n·weight(|n|)`, `g_n` standard complex
/// Gaussians (`E|g|² = 1`), a real `N(0,1)` zero mode and an empty Nyquist line.
fn gaussian_field(grid: TorusGrid, rng: &mut ChaCha8Rng, weight: impl Fn(f64) -> f64) -> SpectralField {
    let mut field = SpectralField::zeros(grid);
    for idx in 0..grid.len() {
        let mode = grid.mode_at(idx);
        if grid.is_nyquist(mode) {
            continue;
        }
        let partner = grid.index(-mode).expect("non-Nyquist modes have partners");
        if partner < idx {
            continue;
        }
        let w = weight(mode.norm());
        let value = if partner == idx {
            Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0)
        } else {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * FRAC_1_SQRT_2
        } * w;
        field.coeffs_mut()[idx] = value;
        field.coeffs_mut()[partner] = value.conj();
    }
    field
}

/// `û₀(n) = g_n⟨n⟩^{−(s+1+δ)}`, `û₁(n) = g′_n⟨n⟩^{−(s+δ)}`, deterministic in `seed`.
pub fn generate_hs_data(grid: TorusGrid, s: f64, delta: f64, seed: u64) -> Result<WaveState> {
    if !(delta > 0.0) {
        return Err(Error::domain(format!("roughness margin must be positive, got {delta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let japanese = |r: f64| (1.0 + r * r).sqrt();
    let u = gaussian_field(grid, &mut rng, |r| japanese(r).powf(-(s + 1.0 + delta)));
    let v = gaussian_field(grid, &mut rng, |r| japanese(r).powf(-(s + delta)));
    WaveState::from_spectral(&u, &v, 0.0)
}

/// `E‖u₀‖²_{H^s}` for [`generate_hs_data`]: `Σ ⟨n⟩^{−2−2δ}` over non-Nyquist modes.
pub fn expected_hs_norm_sq(grid: TorusGrid, delta: f64) -> f64 {
    grid.modes()
        .filter(|&m| !grid.is_nyquist(m))
        .map(|m| (1.0 + m.norm_sq() as f64).powf(-1.0 - delta))
        .sum()
}

/// Initial state described by `config.data`.
pub fn initial_state(config: &RunConfig) -> Result<WaveState> {
    let grid = config.grid()?;
    match &config.data {
        DataSpec::RandomHs { decay_delta } => {
            generate_hs_data(grid, config.s_f64(), *decay_delta, config.seed)
        }
        DataSpec::Eigenmode { n, amplitude } => {
            let (k1, k2) = (n[0] as f64, n[1] as f64);
            let u = RealField::from_fn(grid, |x, y| amplitude * (2.0 * PI * (k1 * x + k2 * y)).cos());
            WaveState::new(u, RealField::zeros(grid), 0.0)
        }
        DataSpec::Constant { c } => WaveState::new(RealField::constant(grid, *c), RealField::zeros(grid), 0.0),
        DataSpec::File { path } => load_state(path, grid),
    }
}

/// Writes `u.twl` and `v.twl` into `dir`.
pub fn save_state(dir: &Path, state: &WaveState) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_snapshot(&dir.join("u.twl"), &state.u_hat())?;
    save_snapshot(&dir.join("v.twl"), &state.v_hat())
}

/// Reads a pair written by [`save_state`], checking it lives on `grid`.
pub fn load_state(dir: &Path, grid: TorusGrid) -> Result<WaveState> {
    let read = |name: &str| {
        let path = dir.join(name);
        load_snapshot(&path).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    };
    let (u, v) = (read("u.twl")?, read("v.twl")?);
    for f in [&u, &v] {
        if f.grid() != grid {
            return Err(Error::GridMismatch(f.grid().n(), grid.n()));
        }
    }
    WaveState::from_spectral(&u, &v, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::energy;
    use crate::spectral::Mode;

    fn mode_weight(mode: Mode, exponent: f64) -> f64 {
        (1.0 + mode.norm_sq() as f64).powf(exponent / 2.0)
    }

    #[test]
    fn deterministic_in_seed() {
        let grid = TorusGrid::new(16).unwrap();
        let a = generate_hs_data(grid, 0.5, 0.1, 11).unwrap();
        let b = generate_hs_data(grid, 0.5, 0.1, 11).unwrap();
        let c = generate_hs_data(grid, 0.5, 0.1, 12).unwrap();
        assert_eq!(a.u.values(), b.u.values());
        assert_eq!(a.v.values(), b.v.values());
        assert_ne!(a.u.values(), c.u.values());
    }

    #[test]
    fn hermitian_with_empty_nyquist_line() {
        let grid = TorusGrid::new(8).unwrap();
        let state = generate_hs_data(grid, 0.5, 0.1, 1).unwrap();
        for f in [state.u_hat(), state.v_hat()] {
            f.check_hermitian().unwrap();
            for m in grid.modes().filter(|&m| grid.is_nyquist(m)) {
                assert!(f.coeff(m).norm() < 1e-14);
            }
        }
        assert!(generate_hs_data(grid, 0.5, 0.0, 1).is_err());
    }

    #[test]
    fn smooth_data_has_small_energy() {
        let grid = TorusGrid::new(32).unwrap();
        let state = generate_hs_data(grid, 0.5, 10.0, 5).unwrap();
        let e = energy(&state);
        assert!(e.is_finite() && e < 10.0, "{e}");
        let high = state.u_hat().coeff(Mode { k1: 8, k2: 0 }).norm();
        assert!(high < 1e-9, "{high}");
    }

    #[test]
    fn hs_norm_matches_expectation() {
        // u₀ has H^s weight ⟨n⟩^{2s} times variance ⟨n⟩^{−2(s+1+δ)}.
        let grid = TorusGrid::new(16).unwrap();
        let (s, delta) = (0.5, 0.1);
        let expected = expected_hs_norm_sq(grid, delta);
        let samples: Vec<f64> = (0..100)
            .map(|seed| {
                let u = generate_hs_data(grid, s, delta, seed).unwrap().u_hat();
                u.coeffs()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| mode_weight(grid.mode_at(i), 2.0 * s) * c.norm_sqr())
                    .sum::<f64>()
            })
            .collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let stderr = (var / n).sqrt();
        assert!((mean - expected).abs() <= 3.0 * stderr, "{mean} vs {expected} ± {stderr}");
    }

    #[test]
    fn deterministic_families_and_files() {
        let mut config = RunConfig::new(crate::ledger::Q::new(1, 2), 2.0, 8, 0.1, 0);
        config.data = DataSpec::Eigenmode { n: [1, 0], amplitude: 2.0 };
        let state = initial_state(&config).unwrap();
        assert!((state.u_hat().coeff(Mode { k1: 1, k2: 0 }).re - 1.0).abs() < 1e-14);
        config.data = DataSpec::Constant { c: 0.5 };
        assert!((initial_state(&config).unwrap().u.values()[5] - 0.5).abs() < 1e-15);

        let dir = tempfile::tempdir().unwrap();
        let random = generate_hs_data(config.grid().unwrap(), 0.5, 0.1, 4).unwrap();
        save_state(dir.path(), &random).unwrap();
        config.data = DataSpec::File { path: dir.path().to_path_buf() };
        let loaded = initial_state(&config).unwrap();
        assert!(loaded.u.max_abs_diff(&random.u) < 1e-14);
        config.grid_n = 16;
        assert!(initial_state(&config).is_err());
    }
}
