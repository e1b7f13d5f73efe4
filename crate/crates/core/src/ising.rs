//! Zero-field nearest-neighbour Ising model on a periodic square lattice,
//! sampled with single-spin-flip Metropolis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Ensemble, Provenance, SpinConfig, SpinKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    /// Ferromagnetic coupling J in energy units. The external field is zero.
    pub coupling: f64,
}

impl Default for IsingModel {
    fn default() -> Self {
        Self { coupling: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSchedule {
    pub burn_in_sweeps: usize,
    pub thinning_sweeps: usize,
    pub n_samples: usize,
}

impl Default for McSchedule {
    fn default() -> Self {
        Self { burn_in_sweeps: 1000, thinning_sweeps: 10, n_samples: 2000 }
    }
}

impl McSchedule {
    pub fn with_samples(n_samples: usize) -> Self {
        Self { n_samples, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.burn_in_sweeps == 0 || self.thinning_sweeps == 0 {
            return Err(Error::domain("burn-in and thinning sweeps must be positive"));
        }
        Ok(())
    }
}

/// Onsager critical temperature `2J / ln(1 + √2)` (k = 1).
pub fn critical_temperature(coupling: f64) -> Result<f64> {
    if !(coupling > 0.0) {
        return Err(Error::domain(format!("coupling must be positive, got {coupling}")));
    }
    Ok(2.0 * coupling / (1.0 + 2f64.sqrt()).ln())
}

/// `-J Σ σ_i σ_j` over the 2L² periodic bonds, each counted once.
pub fn ising_energy(model: &IsingModel, config: &SpinConfig) -> Result<f64> {
    if config.kind() != SpinKind::Binary {
        return Err(Error::Kind("energy needs a ±1 configuration".into()));
    }
    let l = config.side();
    let mut sum = 0.0;
    for r in 0..l {
        for c in 0..l {
            let s = config.get(r, c);
            sum += s * (config.get((r + 1) % l, c) + config.get(r, (c + 1) % l));
        }
    }
    Ok(-model.coupling * sum)
}

#[inline]
fn neighbour_sum(config: &SpinConfig, site: usize) -> f64 {
    let l = config.side();
    let (r, c) = (site / l, site % l);
    let up = if r == 0 { l - 1 } else { r - 1 };
    let down = if r + 1 == l { 0 } else { r + 1 };
    let left = if c == 0 { l - 1 } else { c - 1 };
    let right = if c + 1 == l { 0 } else { c + 1 };
    config.get(up, c) + config.get(down, c) + config.get(r, left) + config.get(r, right)
}

/// One sweep: L² flip proposals at uniformly random sites, each accepted with
/// probability `min(1, exp(-β ΔE))`.
pub fn metropolis_sweep<R: Rng + ?Sized>(
    model: &IsingModel,
    config: &mut SpinConfig,
    beta: f64,
    rng: &mut R,
) -> Result<()> {
    if config.kind() != SpinKind::Binary {
        return Err(Error::Kind("Metropolis needs a ±1 configuration".into()));
    }
    if !(beta >= 0.0) {
        return Err(Error::domain(format!("beta must be non-negative, got {beta}")));
    }
    // ΔE = 2Jσ·(neighbour sum) ∈ {±8J, ±4J, 0}; table for the positive ones.
    let accept4 = (-beta * 4.0 * model.coupling).exp();
    let accept8 = (-beta * 8.0 * model.coupling).exp();
    let n = config.len();
    for _ in 0..n {
        let site = rng.gen_range(0..n);
        let de = 2.0 * model.coupling * config.values()[site] * neighbour_sum(config, site);
        let accept = if de <= 0.0 {
            true
        } else {
            let p = if de < 6.0 * model.coupling { accept4 } else { accept8 };
            rng.gen::<f64>() < p
        };
        if accept {
            config.flip(site);
        }
    }
    Ok(())
}

/// Runs one chain from a uniformly random start: burn-in, then one sample
/// every `thinning_sweeps` sweeps.
pub fn sample_ensemble(
    model: &IsingModel,
    side: usize,
    temperature: f64,
    schedule: &McSchedule,
    seed: u64,
) -> Result<Ensemble> {
    if !(temperature > 0.0) {
        return Err(Error::domain(format!("temperature must be positive, got {temperature}")));
    }
    if side == 0 {
        return Err(Error::domain("lattice side must be positive"));
    }
    schedule.validate()?;
    let beta = 1.0 / temperature;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = SpinConfig::random(side, &mut rng);
    let mut ens = Ensemble::empty(side, SpinKind::Binary, temperature, Provenance::MonteCarlo, seed);
    if schedule.n_samples == 0 {
        return Ok(ens);
    }
    for _ in 0..schedule.burn_in_sweeps {
        metropolis_sweep(model, &mut config, beta, &mut rng)?;
    }
    for _ in 0..schedule.n_samples {
        for _ in 0..schedule.thinning_sweeps {
            metropolis_sweep(model, &mut config, beta, &mut rng)?;
        }
        ens.push(config.clone())?;
    }
    Ok(ens)
}

pub fn magnetization(config: &SpinConfig) -> f64 {
    config.values().iter().sum::<f64>() / config.len() as f64
}

/// Mean of |m| over the ensemble, so the two ordered branches do not cancel.
pub fn average_magnetization(ensemble: &Ensemble) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::Empty("average magnetization of an empty ensemble"));
    }
    Ok(ensemble.iter().map(|c| magnetization(c).abs()).sum::<f64>() / ensemble.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tc_values() {
        let tc = critical_temperature(1.0).unwrap();
        assert!((tc - 2.269_185_314_213_022).abs() < 1e-12);
        assert!(((2.0 / tc).sinh() - 1.0).abs() < 1e-12);
        assert!((critical_temperature(2.0).unwrap() - 2.0 * tc).abs() < 1e-12);
        assert!(critical_temperature(0.0).is_err());
        assert!(critical_temperature(-1.0).is_err());
    }

    #[test]
    fn energy_small_cases() {
        let m = IsingModel::default();
        let up = SpinConfig::uniform(3, 1.0);
        assert_eq!(ising_energy(&m, &up).unwrap(), -18.0);
        let mut one = up.clone();
        one.flip(4);
        assert_eq!(ising_energy(&m, &one).unwrap(), -10.0);
        let real = SpinConfig::uniform(3, 0.5);
        assert!(matches!(ising_energy(&m, &real), Err(Error::Kind(_))));
    }

    #[test]
    fn frozen_sweep_keeps_ground_state() {
        let m = IsingModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = SpinConfig::uniform(6, 1.0);
        for _ in 0..20 {
            metropolis_sweep(&m, &mut c, f64::INFINITY, &mut rng).unwrap();
        }
        assert_eq!(c, SpinConfig::uniform(6, 1.0));
    }

    #[test]
    fn sweep_is_deterministic() {
        let m = IsingModel::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut c = SpinConfig::checkerboard(8);
            metropolis_sweep(&m, &mut c, 0.4, &mut rng).unwrap();
            c
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_samples_is_empty() {
        let e = sample_ensemble(&IsingModel::default(), 4, 2.0, &McSchedule::with_samples(0), 3).unwrap();
        assert!(e.is_empty());
        assert!(average_magnetization(&e).is_err());
        assert!(sample_ensemble(&IsingModel::default(), 4, 0.0, &McSchedule::default(), 3).is_err());
    }

    #[test]
    fn magnetization_cases() {
        assert_eq!(magnetization(&SpinConfig::uniform(4, 1.0)), 1.0);
        assert_eq!(magnetization(&SpinConfig::checkerboard(4)), 0.0);
        let half = SpinConfig::new(2, vec![1.0, 1.0, -1.0, -1.0], SpinKind::Binary).unwrap();
        assert_eq!(magnetization(&half), 0.0);
    }
}
