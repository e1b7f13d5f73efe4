//! Feedforward temperature classifier: one tanh hidden layer, softmax output
//! over a grid of temperature bins, trained on KL (cross-entropy) loss.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{sample_ensemble, IsingModel, McSchedule};
use crate::lattice::{derive_seed, gemm, Ensemble, Matrix, SpinConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TempBins {
    temperatures: Vec<f64>,
}

impl Default for TempBins {
    /// T = 0, 0.1, …, 5.9.
    fn default() -> Self {
        Self::grid(0.0, 0.1, 60).expect("default grid is increasing")
    }
}

impl TempBins {
    pub fn new(temperatures: Vec<f64>) -> Result<Self> {
        if temperatures.is_empty() {
            return Err(Error::Empty("temperature bins"));
        }
        if temperatures.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::domain("bin temperatures must be finite and non-negative"));
        }
        if temperatures.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("bin temperatures must be strictly increasing"));
        }
        Ok(Self { temperatures })
    }

    /// `count` bins `start, start + step, …`, rounded to 1e-9.
    pub fn grid(start: f64, step: f64, count: usize) -> Result<Self> {
        Self::new((0..count).map(|k| ((start + step * k as f64) * 1e9).round() / 1e9).collect())
    }

    pub fn len(&self) -> usize {
        self.temperatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temperatures.is_empty()
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    pub fn temperature(&self, bin: usize) -> f64 {
        self.temperatures[bin]
    }

    /// The bin whose temperature lies within 1e-6 of `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.temperatures
            .iter()
            .position(|b| (b - t).abs() < 1e-6)
            .ok_or_else(|| Error::domain(format!("temperature {t} is not a bin")))
    }
}

/// One MC ensemble per bin, bin b seeded with `derive_seed(seed, b)`. A T = 0
/// bin is sampled at the lowest positive bin temperature, since Boltzmann
/// sampling degenerates at T = 0; its ensemble keeps the label 0.
pub fn grid_ensembles(model: &IsingModel, side: usize, bins: &TempBins, schedule: &McSchedule, seed: u64) -> Result<Vec<Ensemble>> {
    let lowest = bins.temperatures().iter().copied().find(|t| *t > 0.0).ok_or_else(|| Error::domain("bins need a positive temperature"))?;
    bins.temperatures()
        .iter()
        .enumerate()
        .map(|(b, &t)| {
            let mut e = sample_ensemble(model, side, if t > 0.0 { t } else { lowest }, schedule, derive_seed(seed, b as u64))?;
            e.temperature = t;
            Ok(e)
        })
        .collect()
}

/// Labelled classifier data for [`grid_ensembles`] output (ensemble k ↦ bin k).
pub fn grid_dataset(ensembles: &[Ensemble]) -> Result<LabeledData> {
    let labels: Vec<usize> = (0..ensembles.len()).collect();
    LabeledData::from_ensembles(ensembles, &labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    /// Row-major n_in × n_hidden.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major n_hidden × n_out.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Hidden width for `n_in` inputs: 80 % of the input size, at least 16.
pub fn hidden_size_for(n_in: usize) -> usize {
    ((0.8 * n_in as f64).round() as usize).max(16)
}

impl MlpParams {
    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_hidden,
            n_out,
            w1: vec![0.0; n_in * n_hidden],
            b1: vec![0.0; n_hidden],
            w2: vec![0.0; n_hidden * n_out],
            b2: vec![0.0; n_out],
        }
    }

    pub fn new(n_in: usize, n_hidden: usize, n_out: usize, w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: Vec<f64>) -> Result<Self> {
        for (want, got) in [(n_in * n_hidden, w1.len()), (n_hidden, b1.len()), (n_hidden * n_out, w2.len()), (n_out, b2.len())] {
            if want != got {
                return Err(Error::dim(want, got));
            }
        }
        let p = Self { n_in, n_hidden, n_out, w1, b1, w2, b2 };
        if p.blocks().iter().any(|b| b.iter().any(|x| !x.is_finite())) {
            return Err(Error::Invalid("classifier parameters must be finite".into()));
        }
        Ok(p)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(n_in: usize, n_hidden: usize, n_out: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(n_in, n_hidden, n_out);
        let l1 = (6.0 / (n_in + n_hidden) as f64).sqrt();
        p.w1.iter_mut().for_each(|w| *w = rng.gen_range(-l1..l1));
        let l2 = (6.0 / (n_hidden + n_out) as f64).sqrt();
        p.w2.iter_mut().for_each(|w| *w = rng.gen_range(-l2..l2));
        p
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn blocks(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    /// Pre-softmax scores for one input.
    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.n_in {
            return Err(Error::dim(self.n_in, input.len()));
        }
        let m = Matrix::from_vec(1, self.n_in, input.to_vec());
        let (_, z) = self.forward_pass(&m);
        Ok(z.into_vec())
    }

    fn forward_pass(&self, x: &Matrix) -> (Matrix, Matrix) {
        let n = x.rows();
        let mut hidden = Matrix::zeros(n, self.n_hidden);
        for r in 0..n {
            hidden.row_mut(r).copy_from_slice(&self.b1);
        }
        gemm(n, self.n_in, self.n_hidden, x.as_slice(), false, &self.w1, false, hidden.as_mut_slice(), 1.0, true);
        hidden.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh());
        let mut logits = Matrix::zeros(n, self.n_out);
        for r in 0..n {
            logits.row_mut(r).copy_from_slice(&self.b2);
        }
        gemm(n, self.n_hidden, self.n_out, hidden.as_slice(), false, &self.w2, false, logits.as_mut_slice(), 1.0, true);
        (hidden, logits)
    }

    /// Softmax probabilities for every row of `x`.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_in {
            return Err(Error::dim(self.n_in, x.cols()));
        }
        let (_, mut z) = self.forward_pass(x);
        for r in 0..z.rows() {
            softmax_in_place(z.row_mut(r));
        }
        Ok(z)
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

pub fn forward(params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    let mut z = params.logits(input)?;
    softmax_in_place(&mut z);
    Ok(z)
}

/// KL divergence to a one-hot target, i.e. `−ln p[target]`.
pub fn kl_loss(predicted: &[f64], target: usize) -> Result<f64> {
    let p = *predicted.get(target).ok_or_else(|| Error::dim(target + 1, predicted.len()))?;
    if !(p > 0.0) {
        return Err(Error::Overflow(format!("zero predicted probability for target bin {target}")));
    }
    Ok(-p.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub validation_fraction: f64,
    /// Minibatch size; `None` takes one gradient step per epoch on the whole
    /// training split.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, epochs: 3000, validation_fraction: 0.4, batch_size: Some(32), seed: 0 }
    }
}

impl MlpTrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::domain("learning rate must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::domain(format!("validation fraction must be in (0, 1), got {}", self.validation_fraction)));
        }
        if self.batch_size == Some(0) {
            return Err(Error::domain("batch size must be positive"));
        }
        Ok(())
    }
}

/// Inputs (one row per sample) with bin labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

impl LabeledData {
    /// Stacks ensembles, labelling each with `labels[k]`.
    pub fn from_ensembles(ensembles: &[Ensemble], labels: &[usize]) -> Result<Self> {
        if ensembles.len() != labels.len() {
            return Err(Error::dim(ensembles.len(), labels.len()));
        }
        let sites = ensembles.first().ok_or(Error::Empty("labeled dataset"))?.sites();
        let mut data = Vec::new();
        let mut out_labels = Vec::new();
        for (e, &label) in ensembles.iter().zip(labels) {
            if e.sites() != sites {
                return Err(Error::dim(sites, e.sites()));
            }
            for c in e {
                data.extend_from_slice(c.values());
                out_labels.push(label);
            }
        }
        let rows = out_labels.len();
        Ok(Self { inputs: Matrix::from_vec(rows, sites, data), labels: out_labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurves {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

impl LearningCurves {
    /// `epoch,train_loss,val_loss` rows, epochs counted from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for (k, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            s.push_str(&format!("{},{},{}\n", k + 1, t, v));
        }
        s
    }
}

/// Seeded split with each label's samples divided in the same proportion.
/// Returns (train indices, validation indices).
pub fn stratified_split(labels: &[usize], validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_label = vec![Vec::new(); n_labels];
    for (i, &l) in labels.iter().enumerate() {
        by_label[l].push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for mut group in by_label {
        group.shuffle(&mut rng);
        let n_val = (group.len() as f64 * validation_fraction).round() as usize;
        val.extend_from_slice(&group[..n_val]);
        train.extend_from_slice(&group[n_val..]);
    }
    (train, val)
}

/// Mean loss and accuracy over `x`, plus the gradient of the mean loss
/// when `grad` is supplied (accumulated in w1, b1, w2, b2 order).
fn loss_and_gradient(params: &MlpParams, x: &Matrix, labels: &[usize], grad: Option<&mut MlpParams>) -> Result<(f64, f64)> {
    let n = x.rows();
    let (hidden, mut probs) = params.forward_pass(x);
    let mut loss = 0.0;
    let mut correct = 0usize;
    for r in 0..n {
        let row = probs.row_mut(r);
        softmax_in_place(row);
        loss += kl_loss(row, labels[r])?;
        let best = argmax(row);
        if best == labels[r] {
            correct += 1;
        }
    }
    let Some(g) = grad else {
        return Ok((loss / n as f64, correct as f64 / n as f64));
    };
    // δ2 = (p − onehot)/n, shape n × n_out
    let scale = 1.0 / n as f64;
    let mut d2 = probs;
    for r in 0..n {
        d2.row_mut(r)[labels[r]] -= 1.0;
    }
    d2.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
    let (ni, nh, no) = (params.n_in, params.n_hidden, params.n_out);
    gemm(nh, n, no, hidden.as_slice(), true, d2.as_slice(), false, &mut g.w2, 1.0, false);
    g.b2.iter_mut().for_each(|v| *v = 0.0);
    for r in 0..n {
        for (b, d) in g.b2.iter_mut().zip(d2.row(r)) {
            *b += d;
        }
    }
    // δ1 = (δ2 W2ᵀ) ⊙ (1 − hidden²)
    let mut d1 = Matrix::zeros(n, nh);
    gemm(n, no, nh, d2.as_slice(), false, &params.w2, true, d1.as_mut_slice(), 1.0, false);
    for (d, h) in d1.as_mut_slice().iter_mut().zip(hidden.as_slice()) {
        *d *= 1.0 - h * h;
    }
    gemm(ni, n, nh, x.as_slice(), true, d1.as_slice(), false, &mut g.w1, 1.0, false);
    g.b1.iter_mut().for_each(|v| *v = 0.0);
    for r in 0..n {
        for (b, d) in g.b1.iter_mut().zip(d1.row(r)) {
            *b += d;
        }
    }
    Ok((loss / n as f64, correct as f64 / n as f64))
}

/// Gradient of the mean KL loss over `x` with respect to every parameter.
pub fn loss_gradient(params: &MlpParams, x: &Matrix, labels: &[usize]) -> Result<(f64, MlpParams)> {
    check_data(params, x, labels)?;
    let mut g = MlpParams::zeros(params.n_in, params.n_hidden, params.n_out);
    let (loss, _) = loss_and_gradient(params, x, labels, Some(&mut g))?;
    Ok((loss, g))
}

fn check_data(params: &MlpParams, x: &Matrix, labels: &[usize]) -> Result<()> {
    if x.cols() != params.n_in {
        return Err(Error::dim(params.n_in, x.cols()));
    }
    if x.rows() != labels.len() {
        return Err(Error::dim(x.rows(), labels.len()));
    }
    if x.rows() == 0 {
        return Err(Error::Empty("classifier dataset"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= params.n_out) {
        return Err(Error::domain(format!("label {bad} outside {} bins", params.n_out)));
    }
    Ok(())
}

fn apply_step(params: &mut MlpParams, g: &MlpParams, eta: f64) {
    for (p, d) in [(&mut params.w1, &g.w1), (&mut params.b1, &g.b1), (&mut params.w2, &g.w2), (&mut params.b2, &g.b2)] {
        for (x, dx) in p.iter_mut().zip(d) {
            *x -= eta * dx;
        }
    }
}

/// Gradient descent from `init`. Training loss per epoch is the mean over the
/// epoch's batches (evaluated before each step); validation loss is
/// evaluated after the epoch.
pub fn train_classifier_from(init: &MlpParams, data: &LabeledData, config: &MlpTrainConfig) -> Result<(MlpParams, LearningCurves)> {
    config.validate()?;
    check_data(init, &data.inputs, &data.labels)?;
    let (train_idx, val_idx) = stratified_split(&data.labels, config.validation_fraction, config.seed);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Empty("train or validation split"));
    }
    let val_x = data.inputs.select_rows(&val_idx);
    let val_y: Vec<usize> = val_idx.iter().map(|&i| data.labels[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::lattice::derive_seed(config.seed, 1));
    let mut params = init.clone();
    let mut grad = MlpParams::zeros(init.n_in, init.n_hidden, init.n_out);
    let mut curves = LearningCurves::default();
    let batch = config.batch_size.unwrap_or(train_idx.len()).min(train_idx.len());
    let full_x = if batch == train_idx.len() { Some(data.inputs.select_rows(&train_idx)) } else { None };
    let full_y: Vec<usize> = train_idx.iter().map(|&i| data.labels[i]).collect();
    let mut order = train_idx.clone();
    for _ in 0..config.epochs {
        let mut epoch_loss = 0.0;
        if let Some(x) = &full_x {
            let (loss, _) = loss_and_gradient(&params, x, &full_y, Some(&mut grad))?;
            apply_step(&mut params, &grad, config.learning_rate);
            epoch_loss = loss;
        } else {
            order.shuffle(&mut rng);
            let mut seen = 0usize;
            for chunk in order.chunks(batch) {
                let x = data.inputs.select_rows(chunk);
                let y: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
                let (loss, _) = loss_and_gradient(&params, &x, &y, Some(&mut grad))?;
                apply_step(&mut params, &grad, config.learning_rate);
                epoch_loss += loss * chunk.len() as f64;
                seen += chunk.len();
            }
            epoch_loss /= seen as f64;
        }
        let (val_loss, val_acc) = loss_and_gradient(&params, &val_x, &val_y, None)?;
        curves.train_loss.push(epoch_loss);
        curves.val_loss.push(val_loss);
        curves.val_accuracy.push(val_acc);
    }
    Ok((params, curves))
}

/// Glorot initialization from `config.seed` followed by training.
pub fn train_classifier(data: &LabeledData, n_hidden: usize, n_out: usize, config: &MlpTrainConfig) -> Result<(MlpParams, LearningCurves)> {
    if data.is_empty() {
        return Err(Error::Empty("classifier dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = MlpParams::glorot(data.inputs.cols(), n_hidden, n_out, &mut rng);
    train_classifier_from(&init, data, config)
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Temperature of the most probable bin for one ±1 configuration.
pub fn measure_temperature(params: &MlpParams, bins: &TempBins, config: &SpinConfig) -> Result<f64> {
    if bins.len() != params.n_out {
        return Err(Error::dim(params.n_out, bins.len()));
    }
    Ok(bins.temperature(argmax(&forward(params, config.values())?)))
}

/// Bin-wise mean of the classifier output over the ensemble.
pub fn measure_ensemble(params: &MlpParams, ensemble: &Ensemble) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return Err(Error::Empty("ensemble to measure"));
    }
    let probs = params.forward_batch(&ensemble.to_matrix())?;
    let mut mean = vec![0.0; params.n_out];
    for r in 0..probs.rows() {
        for (m, p) in mean.iter_mut().zip(probs.row(r)) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m /= probs.rows() as f64);
    Ok(mean)
}

/// How a bin-probability vector is turned into one temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// Temperature of the most probable bin.
    #[default]
    Argmax,
    /// Probability-weighted mean of the bin temperatures.
    Mean,
}

pub fn read_temperature(probabilities: &[f64], bins: &TempBins, readout: Readout) -> Result<f64> {
    if probabilities.len() != bins.len() {
        return Err(Error::dim(bins.len(), probabilities.len()));
    }
    Ok(match readout {
        Readout::Argmax => bins.temperature(argmax(probabilities)),
        Readout::Mean => {
            let total: f64 = probabilities.iter().sum();
            probabilities.iter().zip(bins.temperatures()).map(|(p, t)| p * t).sum::<f64>() / total
        }
    })
}

/// Histogram of per-config argmax bins, normalized to fractions.
pub fn argmax_histogram(params: &MlpParams, ensemble: &Ensemble) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return Err(Error::Empty("ensemble to measure"));
    }
    let probs = params.forward_batch(&ensemble.to_matrix())?;
    let mut hist = vec![0.0; params.n_out];
    for r in 0..probs.rows() {
        hist[argmax(probs.row(r))] += 1.0;
    }
    hist.iter_mut().for_each(|h| *h /= probs.rows() as f64);
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_mlp(n_in: usize, n_hid: usize, n_out: usize, seed: u64) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = MlpParams::glorot(n_in, n_hid, n_out, &mut rng);
        p.b1.iter_mut().for_each(|b| *b = rng.gen_range(-0.3..0.3));
        p.b2.iter_mut().for_each(|b| *b = rng.gen_range(-0.3..0.3));
        p
    }

    #[test]
    fn default_bins() {
        let b = TempBins::default();
        assert_eq!(b.len(), 60);
        assert_eq!(b.temperature(0), 0.0);
        assert_eq!(b.temperature(59), 5.9);
        assert_eq!(b.index_of(2.3).unwrap(), 23);
        assert!(b.index_of(2.35).is_err());
        assert!(TempBins::new(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn hidden_sizes() {
        assert_eq!(hidden_size_for(100), 80);
        assert_eq!(hidden_size_for(64), 51);
        assert_eq!(hidden_size_for(4), 16);
        assert_eq!(hidden_size_for(1024), 819);
    }

    #[test]
    fn zero_params_uniform_output() {
        let p = MlpParams::zeros(100, 80, 60);
        let out = forward(&p, &[1.0; 100]).unwrap();
        assert!(out.iter().all(|x| (x - 1.0 / 60.0).abs() < 1e-15));
        assert!((kl_loss(&out, 7).unwrap() - 60f64.ln()).abs() < 1e-12);
        assert!(forward(&p, &[1.0; 99]).is_err());
    }

    #[test]
    fn matches_naive_evaluation() {
        let p = random_mlp(5, 4, 3, 1);
        let x = [1.0, -1.0, 0.5, 0.0, -0.2];
        let mut h = [0.0; 4];
        for a in 0..4 {
            let mut s = p.b1[a];
            for i in 0..5 {
                s += x[i] * p.w1[i * 4 + a];
            }
            h[a] = s.tanh();
        }
        let mut z = [0.0; 3];
        for k in 0..3 {
            z[k] = p.b2[k] + (0..4).map(|a| h[a] * p.w2[a * 3 + k]).sum::<f64>();
        }
        let norm: f64 = z.iter().map(|v| v.exp()).sum();
        let out = forward(&p, &x).unwrap();
        for k in 0..3 {
            assert!((out[k] - z[k].exp() / norm).abs() < 1e-14);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut a = vec![0.3, -1.2, 2.0];
        let mut b: Vec<f64> = a.iter().map(|v| v + 17.5).collect();
        softmax_in_place(&mut a);
        softmax_in_place(&mut b);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn loss_cases() {
        assert_eq!(kl_loss(&[0.0, 1.0], 1).unwrap(), 0.0);
        assert!(matches!(kl_loss(&[0.0, 1.0], 0), Err(Error::Overflow(_))));
        assert!(kl_loss(&[1.0], 3).is_err());
    }

    #[test]
    fn logit_gradient_is_p_minus_target() {
        let z = [0.2, -0.5, 1.1, 0.0];
        let mut p = z.to_vec();
        softmax_in_place(&mut p);
        let h = 1e-6;
        for k in 0..4 {
            let loss = |delta: f64| {
                let mut q = z.to_vec();
                q[k] += delta;
                softmax_in_place(&mut q);
                kl_loss(&q, 2).unwrap()
            };
            let fd = (loss(h) - loss(-h)) / (2.0 * h);
            let expected = p[k] - if k == 2 { 1.0 } else { 0.0 };
            assert!((fd - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let p = random_mlp(6, 5, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_vec(7, 6, (0..42).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let y: Vec<usize> = (0..7).map(|i| i % 4).collect();
        let (_, g) = loss_gradient(&p, &x, &y).unwrap();
        let loss = |q: &MlpParams| loss_gradient(q, &x, &y).unwrap().0;
        let h = 1e-6;
        let check = |get: &dyn Fn(&mut MlpParams) -> &mut Vec<f64>, analytic: &[f64]| {
            for k in 0..analytic.len() {
                let (mut a, mut b) = (p.clone(), p.clone());
                get(&mut a)[k] += h;
                get(&mut b)[k] -= h;
                let fd = (loss(&a) - loss(&b)) / (2.0 * h);
                let scale = fd.abs().max(analytic[k].abs()).max(1e-4);
                assert!((fd - analytic[k]).abs() / scale < 1e-5, "k={k} fd={fd} an={}", analytic[k]);
            }
        };
        check(&|q| &mut q.w1, &g.w1);
        check(&|q| &mut q.b1, &g.b1);
        check(&|q| &mut q.w2, &g.w2);
        check(&|q| &mut q.b2, &g.b2);
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let (train, val) = stratified_split(&labels, 0.4, 1);
        assert_eq!(val.len(), 40);
        assert_eq!(train.len(), 60);
        for l in 0..4 {
            assert_eq!(val.iter().filter(|&&i| labels[i] == l).count(), 10);
        }
        assert_eq!(stratified_split(&labels, 0.4, 1), (train, val));
    }

    #[test]
    fn zero_epochs_returns_init() {
        let data = LabeledData { inputs: Matrix::from_vec(4, 2, vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]), labels: vec![0, 1, 0, 1] };
        let cfg = MlpTrainConfig { epochs: 0, validation_fraction: 0.5, ..MlpTrainConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = MlpParams::glorot(2, 16, 2, &mut rng);
        let (p, curves) = train_classifier(&data, 16, 2, &cfg).unwrap();
        assert_eq!(p, init);
        assert!(curves.train_loss.is_empty());
        let bad = MlpTrainConfig { validation_fraction: 1.0, ..cfg };
        assert!(train_classifier(&data, 16, 2, &bad).is_err());
    }

    #[test]
    fn readouts() {
        let bins = TempBins::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(read_temperature(&[0.2, 0.5, 0.3], &bins, Readout::Argmax).unwrap(), 2.0);
        assert!((read_temperature(&[0.2, 0.5, 0.3], &bins, Readout::Mean).unwrap() - 2.1).abs() < 1e-12);
    }
}
