//! Restricted Boltzmann machine with ±1 units.
//!
//! Energy `E(v, h) = −Σ_a b^(h)_a h_a − Σ_ia v_i W_ia h_a − Σ_i b^(v)_i v_i`,
//! joint `p(v, h) = e^(−E) / Z`. Training follows contrastive divergence
//! with tanh expectations propagated between layers by default.

pub mod exact;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{gemm, Ensemble, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    n_visible: usize,
    n_hidden: usize,
    /// Row-major N_v × N_h.
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl RbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            weights: vec![0.0; n_visible * n_hidden],
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    pub fn new(n_visible: usize, n_hidden: usize, weights: Vec<f64>, visible_bias: Vec<f64>, hidden_bias: Vec<f64>) -> Result<Self> {
        if weights.len() != n_visible * n_hidden {
            return Err(Error::dim(n_visible * n_hidden, weights.len()));
        }
        if visible_bias.len() != n_visible {
            return Err(Error::dim(n_visible, visible_bias.len()));
        }
        if hidden_bias.len() != n_hidden {
            return Err(Error::dim(n_hidden, hidden_bias.len()));
        }
        if weights.iter().chain(&visible_bias).chain(&hidden_bias).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("RBM parameters must be finite".into()));
        }
        Ok(Self { n_visible, n_hidden, weights, visible_bias, hidden_bias })
    }

    /// Weights uniform in (−scale, scale), biases zero.
    pub fn random<R: Rng + ?Sized>(n_visible: usize, n_hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(n_visible, n_hidden);
        for w in &mut p.weights {
            *w = rng.gen_range(-scale..scale);
        }
        p
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    #[inline]
    pub fn weight(&self, i: usize, a: usize) -> f64 {
        self.weights[i * self.n_hidden + a]
    }

    fn check_visible(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_visible {
            return Err(Error::dim(self.n_visible, v.len()));
        }
        Ok(())
    }

    fn check_hidden(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.n_hidden {
            return Err(Error::dim(self.n_hidden, h.len()));
        }
        Ok(())
    }

    pub fn energy(&self, v: &[f64], h: &[f64]) -> Result<f64> {
        self.check_visible(v)?;
        self.check_hidden(h)?;
        let mut e = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            let row = &self.weights[i * self.n_hidden..(i + 1) * self.n_hidden];
            e -= vi * row.iter().zip(h).map(|(w, ha)| w * ha).sum::<f64>();
            e -= self.visible_bias[i] * vi;
        }
        e -= self.hidden_bias.iter().zip(h).map(|(b, ha)| b * ha).sum::<f64>();
        Ok(e)
    }

    /// `Σ_i W_ia v_i + b^(h)_a` for every hidden unit.
    pub fn hidden_field(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_visible(v)?;
        let mut x = self.hidden_bias.clone();
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                let row = &self.weights[i * self.n_hidden..(i + 1) * self.n_hidden];
                for (xa, w) in x.iter_mut().zip(row) {
                    *xa += w * vi;
                }
            }
        }
        Ok(x)
    }

    /// `Σ_a W_ia h_a + b^(v)_i` for every visible unit.
    pub fn visible_field(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.check_hidden(h)?;
        Ok((0..self.n_visible)
            .map(|i| {
                let row = &self.weights[i * self.n_hidden..(i + 1) * self.n_hidden];
                self.visible_bias[i] + row.iter().zip(h).map(|(w, ha)| w * ha).sum::<f64>()
            })
            .collect())
    }

    /// p(h_a = +1 | v) = ½(1 + tanh(Σ_i W_ia v_i + b^(h)_a)).
    pub fn hidden_conditional(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.hidden_field(v)?.into_iter().map(|x| 0.5 * (1.0 + x.tanh())).collect())
    }

    /// p(v_i = +1 | h) = ½(1 + tanh(Σ_a W_ia h_a + b^(v)_i)).
    pub fn visible_conditional(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.visible_field(h)?.into_iter().map(|x| 0.5 * (1.0 + x.tanh())).collect())
    }

    pub fn hidden_expectation(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.hidden_field(v)?.into_iter().map(f64::tanh).collect())
    }

    pub fn visible_expectation(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.visible_field(h)?.into_iter().map(f64::tanh).collect())
    }

    /// The RBM with visible and hidden roles exchanged.
    pub fn transposed(&self) -> Self {
        let mut w = vec![0.0; self.weights.len()];
        for i in 0..self.n_visible {
            for a in 0..self.n_hidden {
                w[a * self.n_visible + i] = self.weight(i, a);
            }
        }
        Self {
            n_visible: self.n_hidden,
            n_hidden: self.n_visible,
            weights: w,
            visible_bias: self.hidden_bias.clone(),
            hidden_bias: self.visible_bias.clone(),
        }
    }

    /// Flips the sign of hidden unit `a`; the visible marginal is unchanged.
    pub fn gauge_flip_hidden(&mut self, a: usize) {
        for i in 0..self.n_visible {
            self.weights[i * self.n_hidden + a] *= -1.0;
        }
        self.hidden_bias[a] *= -1.0;
    }

    /// Batched `tanh(V W + b^(h))` for an n × N_v matrix.
    pub fn hidden_expectation_batch(&self, v: &Matrix) -> Result<Matrix> {
        let mut out = self.hidden_field_batch(v)?;
        out.as_mut_slice().iter_mut().for_each(|x| *x = x.tanh());
        Ok(out)
    }

    /// Batched `tanh(H Wᵀ + b^(v))` for an n × N_h matrix.
    pub fn visible_expectation_batch(&self, h: &Matrix) -> Result<Matrix> {
        let mut out = self.visible_field_batch(h)?;
        out.as_mut_slice().iter_mut().for_each(|x| *x = x.tanh());
        Ok(out)
    }

    fn hidden_field_batch(&self, v: &Matrix) -> Result<Matrix> {
        if v.cols() != self.n_visible {
            return Err(Error::dim(self.n_visible, v.cols()));
        }
        let n = v.rows();
        let mut out = Matrix::zeros(n, self.n_hidden);
        for r in 0..n {
            out.row_mut(r).copy_from_slice(&self.hidden_bias);
        }
        gemm(n, self.n_visible, self.n_hidden, v.as_slice(), false, &self.weights, false, out.as_mut_slice(), 1.0, true);
        Ok(out)
    }

    fn visible_field_batch(&self, h: &Matrix) -> Result<Matrix> {
        if h.cols() != self.n_hidden {
            return Err(Error::dim(self.n_hidden, h.cols()));
        }
        let n = h.rows();
        let mut out = Matrix::zeros(n, self.n_visible);
        for r in 0..n {
            out.row_mut(r).copy_from_slice(&self.visible_bias);
        }
        gemm(n, self.n_hidden, self.n_visible, h.as_slice(), false, &self.weights, true, out.as_mut_slice(), 1.0, true);
        Ok(out)
    }

    /// Hidden layer map: tanh expectations, or ±1 samples of p(h|v).
    pub fn propagate_up<R: Rng + ?Sized>(&self, v: &Matrix, mode: Propagation, rng: &mut R) -> Result<Matrix> {
        let mut x = self.hidden_field_batch(v)?;
        apply_mode(&mut x, mode, rng);
        Ok(x)
    }

    /// Visible layer map: tanh expectations, or ±1 samples of p(v|h).
    pub fn propagate_down<R: Rng + ?Sized>(&self, h: &Matrix, mode: Propagation, rng: &mut R) -> Result<Matrix> {
        let mut x = self.visible_field_batch(h)?;
        apply_mode(&mut x, mode, rng);
        Ok(x)
    }
}

fn apply_mode<R: Rng + ?Sized>(fields: &mut Matrix, mode: Propagation, rng: &mut R) {
    match mode {
        Propagation::Expectation => fields.as_mut_slice().iter_mut().for_each(|x| *x = x.tanh()),
        Propagation::Stochastic => fields.as_mut_slice().iter_mut().for_each(|x| {
            let p_up = 0.5 * (1.0 + x.tanh());
            *x = if rng.gen::<f64>() < p_up { 1.0 } else { -1.0 };
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    /// Deterministic tanh expectation values.
    #[default]
    Expectation,
    /// ±1 samples drawn from the conditionals.
    Stochastic,
}

impl Propagation {
    pub fn code(self) -> u8 {
        match self {
            Propagation::Expectation => 0,
            Propagation::Stochastic => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Propagation::Expectation),
            1 => Ok(Propagation::Stochastic),
            c => Err(Error::Format(format!("unknown propagation code {c}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    /// Number of model-side reconstruction rounds (the k of CD-k).
    pub cd_steps: usize,
    /// `None` uses the whole dataset for every update.
    pub batch_size: Option<usize>,
    pub propagation: Propagation,
    pub seed: u64,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, iterations: 500, cd_steps: 1, batch_size: None, propagation: Propagation::Expectation, seed: 0 }
    }
}

impl CdConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::domain("learning rate must be positive"));
        }
        if self.cd_steps == 0 {
            return Err(Error::domain("cd_steps must be >= 1"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::domain("batch size must be positive"));
        }
        Ok(())
    }
}

/// Scale of the default weight initialization, uniform(−0.01, 0.01).
pub const INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainStats {
    /// Mean squared difference between data and first reconstruction.
    pub reconstruction_error: Vec<f64>,
    /// Euclidean norm of the full parameter gradient estimate.
    pub gradient_norm: Vec<f64>,
}

/// Contrastive-divergence gradient estimates for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct CdStatistics {
    /// ⟨v_i h_a⟩_data − ⟨v_i h_a⟩_model, row-major N_v × N_h.
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub reconstruction_error: f64,
}

impl CdStatistics {
    pub fn norm(&self) -> f64 {
        self.weights.iter().chain(&self.visible_bias).chain(&self.hidden_bias).map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Data-minus-model statistics: ĥ from the data, then k rounds of ṽ, h̃.
pub fn cd_statistics<R: Rng + ?Sized>(params: &RbmParams, batch: &Matrix, config: &CdConfig, rng: &mut R) -> Result<CdStatistics> {
    if batch.cols() != params.n_visible {
        return Err(Error::dim(params.n_visible, batch.cols()));
    }
    if batch.rows() == 0 {
        return Err(Error::Empty("CD update needs a non-empty batch"));
    }
    let (n, nv, nh) = (batch.rows(), params.n_visible, params.n_hidden);
    let mode = config.propagation;
    let h_data = params.propagate_up(batch, mode, rng)?;
    let mut v_model = params.propagate_down(&h_data, mode, rng)?;
    let reconstruction_error =
        batch.as_slice().iter().zip(v_model.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (n * nv) as f64;
    let mut h_model = params.propagate_up(&v_model, mode, rng)?;
    for _ in 1..config.cd_steps {
        v_model = params.propagate_down(&h_model, mode, rng)?;
        h_model = params.propagate_up(&v_model, mode, rng)?;
    }

    let scale = 1.0 / n as f64;
    let mut weights = vec![0.0; nv * nh];
    gemm(nv, n, nh, batch.as_slice(), true, h_data.as_slice(), false, &mut weights, scale, false);
    gemm(nv, n, nh, v_model.as_slice(), true, h_model.as_slice(), false, &mut weights, -scale, true);
    let col_mean_diff = |a: &Matrix, b: &Matrix, cols: usize| -> Vec<f64> {
        let mut out = vec![0.0; cols];
        for r in 0..n {
            for ((o, x), y) in out.iter_mut().zip(a.row(r)).zip(b.row(r)) {
                *o += x - y;
            }
        }
        out.iter_mut().for_each(|o| *o *= scale);
        out
    };
    let visible_bias = col_mean_diff(batch, &v_model, nv);
    let hidden_bias = col_mean_diff(&h_data, &h_model, nh);
    Ok(CdStatistics { weights, visible_bias, hidden_bias, reconstruction_error })
}

/// One CD step. The KL gradient is ∂D/∂θ = ⟨·⟩_model − ⟨·⟩_data, so descending
/// it moves each parameter by +η(⟨·⟩_data − ⟨·⟩_model).
pub fn cd_update<R: Rng + ?Sized>(params: &RbmParams, batch: &Matrix, config: &CdConfig, rng: &mut R) -> Result<(RbmParams, CdStatistics)> {
    config.validate()?;
    let stats = cd_statistics(params, batch, config, rng)?;
    let eta = config.learning_rate;
    let mut next = params.clone();
    for (w, g) in next.weights.iter_mut().zip(&stats.weights) {
        *w += eta * g;
    }
    for (b, g) in next.visible_bias.iter_mut().zip(&stats.visible_bias) {
        *b += eta * g;
    }
    for (b, g) in next.hidden_bias.iter_mut().zip(&stats.hidden_bias) {
        *b += eta * g;
    }
    Ok((next, stats))
}

/// Runs `config.iterations` CD updates over minibatches of `data` rows.
pub fn train_matrix(params0: &RbmParams, data: &Matrix, config: &CdConfig) -> Result<(RbmParams, TrainStats)> {
    config.validate()?;
    if data.rows() == 0 {
        return Err(Error::Empty("RBM training needs a non-empty dataset"));
    }
    if data.cols() != params0.n_visible {
        return Err(Error::dim(params0.n_visible, data.cols()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = params0.clone();
    let mut stats = TrainStats::default();
    let batch_size = config.batch_size.unwrap_or(data.rows()).min(data.rows());
    let mut order: Vec<usize> = (0..data.rows()).collect();
    let mut cursor = data.rows();
    for _ in 0..config.iterations {
        let (next, s) = if batch_size == data.rows() {
            cd_update(&params, data, config, &mut rng)?
        } else {
            if cursor + batch_size > order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let batch = data.select_rows(&order[cursor..cursor + batch_size]);
            cursor += batch_size;
            cd_update(&params, &batch, config, &mut rng)?
        };
        stats.reconstruction_error.push(s.reconstruction_error);
        stats.gradient_norm.push(s.norm());
        params = next;
    }
    Ok((params, stats))
}

pub fn train(params0: &RbmParams, dataset: &Ensemble, config: &CdConfig) -> Result<(RbmParams, TrainStats)> {
    if dataset.is_empty() {
        return Err(Error::Empty("RBM training needs a non-empty dataset"));
    }
    train_matrix(params0, &dataset.to_matrix(), config)
}

/// Greedy layer-wise training. Layer k+1 trains on layer k's hidden
/// representation of the data, produced per `config.propagation`.
/// Returns the trained layers and the propagated datasets (one per layer).
pub fn stack_train_matrix(data: &Matrix, layer_sizes: &[usize], config: &CdConfig) -> Result<(Vec<RbmParams>, Vec<Matrix>)> {
    if layer_sizes.len() < 2 {
        return Err(Error::Invalid("a stack needs at least a visible and one hidden size".into()));
    }
    if layer_sizes[0] != data.cols() {
        return Err(Error::dim(layer_sizes[0], data.cols()));
    }
    if layer_sizes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid(format!("layer sizes must strictly decrease: {layer_sizes:?}")));
    }
    let mut layers = Vec::new();
    let mut outputs = Vec::new();
    let mut current = data.clone();
    for (k, w) in layer_sizes.windows(2).enumerate() {
        let layer_cfg = CdConfig { seed: crate::lattice::derive_seed(config.seed, k as u64), ..*config };
        let mut init_rng = ChaCha8Rng::seed_from_u64(crate::lattice::derive_seed(config.seed, 1000 + k as u64));
        let init = RbmParams::random(w[0], w[1], INIT_SCALE, &mut init_rng);
        let (trained, _) = train_matrix(&init, &current, &layer_cfg)?;
        let mut prop_rng = ChaCha8Rng::seed_from_u64(crate::lattice::derive_seed(config.seed, 2000 + k as u64));
        current = trained.propagate_up(&current, config.propagation, &mut prop_rng)?;
        outputs.push(current.clone());
        layers.push(trained);
    }
    Ok((layers, outputs))
}

pub fn stack_train(dataset: &Ensemble, layer_sizes: &[usize], config: &CdConfig) -> Result<Vec<RbmParams>> {
    Ok(stack_train_matrix(&dataset.to_matrix(), layer_sizes, config)?.0)
}
