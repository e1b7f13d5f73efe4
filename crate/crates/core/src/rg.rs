//! Block-spin renormalization: each disjoint 2×2 block is replaced by the
//! average of its four spins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Ensemble, Provenance, SpinConfig, SpinKind};

/// How [`binarize`] resolves a value of exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    #[default]
    RandomFair,
    Plus,
    Minus,
}

pub fn block_average(config: &SpinConfig) -> Result<SpinConfig> {
    let l = config.side();
    if !l.is_multiple_of(2) {
        return Err(Error::Divisibility { side: l, divisor: 2 });
    }
    let half = l / 2;
    let mut out = Vec::with_capacity(half * half);
    for i in 0..half {
        for j in 0..half {
            let (r, c) = (2 * i, 2 * j);
            let sum = config.get(r, c) + config.get(r, c + 1) + config.get(r + 1, c) + config.get(r + 1, c + 1);
            out.push(sum / 4.0);
        }
    }
    SpinConfig::new(half, out, SpinKind::Real)
}

/// Sign function with zeros resolved by `policy`.
pub fn binarize<R: Rng + ?Sized>(config: &SpinConfig, rng: &mut R, policy: TiePolicy) -> SpinConfig {
    let values = config
        .values()
        .iter()
        .map(|&v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                match policy {
                    TiePolicy::Plus => 1.0,
                    TiePolicy::Minus => -1.0,
                    TiePolicy::RandomFair => {
                        if rng.gen::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                }
            }
        })
        .collect();
    SpinConfig::new(config.side(), values, SpinKind::Binary).expect("sign values are ±1")
}

pub fn binarize_ensemble(ensemble: &Ensemble, seed: u64, policy: TiePolicy) -> Result<Ensemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Ensemble::empty(ensemble.side(), SpinKind::Binary, ensemble.temperature, ensemble.provenance, ensemble.seed);
    for c in ensemble {
        out.push(binarize(c, &mut rng, policy))?;
    }
    Ok(out)
}

/// Stage k holds the ensemble after k block-averaging steps (side L/2^k).
#[derive(Debug, Clone, PartialEq)]
pub struct RgFlowTrace {
    pub stages: Vec<Ensemble>,
}

/// Applies `steps` block averages to every config, recording each stage.
/// With `binarize_each_step`, every coarse stage is re-binarized (fair-coin ties,
/// seeded by `seed`) before the next step.
pub fn rg_flow(ensemble: &Ensemble, steps: usize, binarize_each_step: bool, seed: u64) -> Result<RgFlowTrace> {
    let divisor = 1usize << steps;
    if !ensemble.side().is_multiple_of(divisor) {
        return Err(Error::Divisibility { side: ensemble.side(), divisor });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stages = vec![ensemble.clone()];
    for k in 1..=steps {
        let prev = &stages[k - 1];
        let side = prev.side() / 2;
        let kind = if binarize_each_step { SpinKind::Binary } else { SpinKind::Real };
        let mut next = Ensemble::empty(side, kind, prev.temperature, Provenance::RgStep(k as u32), ensemble.seed);
        for c in prev {
            let coarse = block_average(c)?;
            let coarse = if binarize_each_step { binarize(&coarse, &mut rng, TiePolicy::RandomFair) } else { coarse };
            next.push(coarse)?;
        }
        stages.push(next);
    }
    Ok(RgFlowTrace { stages })
}
