//! RBM flows: repeated v → h → v reconstructions through a trained network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{Ensemble, Matrix, Provenance, SpinKind};
use crate::rbm::{Propagation, RbmParams};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    /// Stage 0 is the input ensemble.
    pub stages: Vec<Ensemble>,
    pub mode: Propagation,
    pub seed: u64,
}

/// One reconstruction `v' = visible_map(hidden_map(v))`.
pub fn flow_step<R: Rng + ?Sized>(params: &RbmParams, v: &[f64], mode: Propagation, rng: &mut R) -> Result<Vec<f64>> {
    if v.len() != params.n_visible() {
        return Err(Error::dim(params.n_visible(), v.len()));
    }
    let m = Matrix::from_vec(1, v.len(), v.to_vec());
    let h = params.propagate_up(&m, mode, rng)?;
    Ok(params.propagate_down(&h, mode, rng)?.as_slice().to_vec())
}

/// Batched form of [`flow_step`] over the rows of `v`.
pub fn flow_step_batch<R: Rng + ?Sized>(params: &RbmParams, v: &Matrix, mode: Propagation, rng: &mut R) -> Result<Matrix> {
    let h = params.propagate_up(v, mode, rng)?;
    params.propagate_down(&h, mode, rng)
}

/// Sign of every entry, with exact zeros resolved by a fair coin. Flow stages
/// pass through this before the ±1-trained classifier sees them.
pub fn binarize_rows<R: Rng + ?Sized>(m: &Matrix, rng: &mut R) -> Matrix {
    let data = m
        .as_slice()
        .iter()
        .map(|&x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else if rng.gen::<bool>() {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Matrix::from_vec(m.rows(), m.cols(), data)
}

pub fn generate_flow(params: &RbmParams, initial: &Ensemble, n_steps: usize, mode: Propagation, seed: u64) -> Result<FlowTrace> {
    if initial.sites() != params.n_visible() {
        return Err(Error::dim(params.n_visible(), initial.sites()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = match mode {
        Propagation::Expectation => SpinKind::Real,
        Propagation::Stochastic => SpinKind::Binary,
    };
    let mut stages = vec![initial.clone()];
    let mut current = initial.to_matrix();
    for k in 1..=n_steps {
        current = flow_step_batch(params, &current, mode, &mut rng)?;
        stages.push(Ensemble::from_matrix(&current, kind, initial.temperature, Provenance::RbmFlow(k as u32), seed)?);
    }
    Ok(FlowTrace { stages, mode, seed })
}
