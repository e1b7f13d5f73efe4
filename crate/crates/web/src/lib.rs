//! Browser bindings for the static demo page in `www/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use rglab::ising::{critical_temperature, metropolis_sweep, sample_ensemble, IsingModel, McSchedule};
use rglab::lattice::SpinConfig;
use rglab::observables::{default_fit_range, fit_power_law, two_point_function, FieldKind};
use rglab::rg::{binarize, block_average, TiePolicy};

fn js_err(e: rglab::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn critical_temp() -> f64 {
    critical_temperature(1.0).expect("unit coupling")
}

/// A live Metropolis chain the page animates.
#[wasm_bindgen]
pub struct Lattice {
    config: SpinConfig,
    temperature: f64,
    rng: ChaCha8Rng,
}

#[wasm_bindgen]
impl Lattice {
    #[wasm_bindgen(constructor)]
    pub fn new(side: usize, temperature: f64, seed: u64) -> Lattice {
        // The page only offers valid sides; temperatures are clamped by `set_temperature`.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Lattice { config: SpinConfig::random(side.max(2), &mut rng), temperature: temperature.max(1e-3), rng }
    }

    pub fn side(&self) -> usize {
        self.config.side()
    }

    /// Non-positive or NaN input is clamped to a small positive temperature.
    pub fn set_temperature(&mut self, t: f64) {
        self.temperature = if t > 1e-3 { t } else { 1e-3 };
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn sweep(&mut self, n: usize) {
        let model = IsingModel::default();
        for _ in 0..n {
            metropolis_sweep(&model, &mut self.config, 1.0 / self.temperature, &mut self.rng).expect("binary config and positive beta");
        }
    }

    pub fn magnetization(&self) -> f64 {
        rglab::ising::magnetization(&self.config)
    }

    /// Row-major ±1 values.
    pub fn spins(&self) -> Vec<f64> {
        self.config.values().to_vec()
    }

    /// The current lattice after `steps` 2×2 block-average RG steps, each
    /// binarized with fair tie-breaking.
    pub fn coarse_grained(&self, steps: usize, seed: u64) -> Result<Vec<f64>, JsError> {
        self.coarse_grain(steps, seed).map_err(js_err)
    }
}

impl Lattice {
    pub fn coarse_grain(&self, steps: usize, seed: u64) -> rglab::Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = self.config.clone();
        for _ in 0..steps {
            c = binarize(&block_average(&c)?, &mut rng, TiePolicy::RandomFair);
        }
        Ok(c.into_values())
    }
}

/// Fresh MC ensemble → spin two-point function. Returns `[r0, C0, r1, C1, …]`
/// over integer shells.
#[wasm_bindgen]
pub fn spin_correlation(side: usize, temperature: f64, samples: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    correlation_pairs(side, temperature, samples, seed).map_err(js_err)
}

pub fn correlation_pairs(side: usize, temperature: f64, samples: usize, seed: u64) -> rglab::Result<Vec<f64>> {
    let sched = McSchedule { burn_in_sweeps: 300, thinning_sweeps: 5, n_samples: samples };
    let ens = sample_ensemble(&IsingModel::default(), side, temperature, &sched, seed)?;
    let p = two_point_function(&ens, FieldKind::Spin)?.shells();
    Ok(p.entries.iter().flat_map(|e| [e.distance, e.value]).collect())
}

/// Δ from a power-law fit of `[r, C, …]` pairs over the default window; NaN
/// when the fit fails.
#[wasm_bindgen]
pub fn fit_delta(pairs: &[f64], side: usize) -> f64 {
    let p = rglab::observables::CorrelationProfile {
        entries: pairs.chunks_exact(2).map(|c| rglab::observables::ProfileEntry { distance: c[0], value: c[1], pair_count: 1 }).collect(),
    };
    let (lo, hi) = default_fit_range(&p, side);
    fit_power_law(&p, lo, hi).map_or(f64::NAN, |f| f.exponent.estimate)
}
