//! Correlation measurements and scaling-dimension fits.
//!
//! All distances are minimal-image Euclidean distances on the periodic
//! lattice. Profiles keep every distinct distance as its own entry.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitkit::{least_squares_fit, t_confidence_interval, FitProblem, FitResult};
use crate::lattice::{gemm, Ensemble, Matrix};

/// Confidence level used for every reported interval.
pub const CONFIDENCE_LEVEL: f64 = 0.90;

/// A real-valued field on an L×L periodic lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub side: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.values[(r % self.side) * self.side + c % self.side]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// s = σ − σ̄
    Spin,
    /// ε = s·(sum of the four neighbours of s) − ε̄
    Epsilon,
}

fn ensemble_mean(ensemble: &Ensemble) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::Empty("field centering needs a non-empty ensemble"));
    }
    let total: f64 = ensemble.iter().map(|c| c.values().iter().sum::<f64>()).sum();
    Ok(total / (ensemble.len() * ensemble.sites()) as f64)
}

/// `s_ij = σ_ij − σ̄` with σ̄ the mean over every site of every config.
pub fn spin_field(ensemble: &Ensemble) -> Result<Vec<ScalarField>> {
    let mean = ensemble_mean(ensemble)?;
    Ok(ensemble
        .iter()
        .map(|c| ScalarField { side: c.side(), values: c.values().iter().map(|v| v - mean).collect() })
        .collect())
}

/// `ε_ij = s_ij (s_{i+1,j} + s_{i−1,j} + s_{i,j+1} + s_{i,j−1}) − ε̄`, periodic,
/// with ε̄ the ensemble mean of the first term.
pub fn epsilon_field(ensemble: &Ensemble) -> Result<Vec<ScalarField>> {
    let spins = spin_field(ensemble)?;
    let mut raw: Vec<ScalarField> = spins.iter().map(epsilon_raw).collect();
    let count: usize = raw.iter().map(|f| f.values.len()).sum();
    let mean = raw.iter().flat_map(|f| f.values.iter()).sum::<f64>() / count as f64;
    for f in &mut raw {
        for v in &mut f.values {
            *v -= mean;
        }
    }
    Ok(raw)
}

fn epsilon_raw(s: &ScalarField) -> ScalarField {
    let l = s.side;
    let mut values = Vec::with_capacity(l * l);
    for r in 0..l {
        for c in 0..l {
            let nb = s.at(r + 1, c) + s.at(r + l - 1, c) + s.at(r, c + 1) + s.at(r, c + l - 1);
            values.push(s.at(r, c) * nb);
        }
    }
    ScalarField { side: l, values }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub distance: f64,
    pub value: f64,
    /// Unordered site pairs contributing, summed over samples.
    pub pair_count: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationProfile {
    pub entries: Vec<ProfileEntry>,
}

impl CorrelationProfile {
    pub fn distances(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.distance).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pair-weighted merge into unit-width shells `[k − ½, k + ½)`, distance k.
    /// Smooths the direction-dependent jitter between nearby exact distances.
    pub fn shells(&self) -> CorrelationProfile {
        let mut acc: BTreeMap<u64, (f64, u64)> = BTreeMap::new();
        for e in &self.entries {
            let k = e.distance.round() as u64;
            let slot = acc.entry(k).or_insert((0.0, 0));
            slot.0 += e.value * e.pair_count as f64;
            slot.1 += e.pair_count;
        }
        CorrelationProfile {
            entries: acc
                .into_iter()
                .map(|(k, (sum, n))| ProfileEntry { distance: k as f64, value: sum / n as f64, pair_count: n })
                .collect(),
        }
    }

    /// Entries with `r_min <= r <= r_max`.
    pub fn window(&self, r_min: f64, r_max: f64) -> CorrelationProfile {
        CorrelationProfile {
            entries: self.entries.iter().copied().filter(|e| e.distance >= r_min && e.distance <= r_max).collect(),
        }
    }

    /// Parses [`CorrelationProfile::to_csv`] output; the count column is optional.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Format(format!("profile line {}: `{line}`", n + 1));
            if cols.len() < 2 {
                return Err(bad());
            }
            let distance = cols[0].parse().map_err(|_| bad())?;
            let value = cols[1].parse().map_err(|_| bad())?;
            let pair_count = match cols.get(2) {
                Some(c) => c.parse().map_err(|_| bad())?,
                None => 1,
            };
            entries.push(ProfileEntry { distance, value, pair_count });
        }
        Ok(Self { entries })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,C,count\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{}", e.distance, e.value, e.pair_count);
        }
        out
    }
}

/// Groups the L² displacement vectors by minimal-image distance.
struct DistanceClasses {
    side: usize,
    class_of: Vec<usize>,
    distances: Vec<f64>,
    members: Vec<u64>,
}

impl DistanceClasses {
    fn new(side: usize) -> Self {
        let mut d2_of = Vec::with_capacity(side * side);
        for dr in 0..side {
            for dc in 0..side {
                let a = dr.min(side - dr);
                let b = dc.min(side - dc);
                d2_of.push(a * a + b * b);
            }
        }
        let mut uniq: Vec<usize> = d2_of.iter().copied().filter(|&d| d > 0).collect();
        uniq.sort_unstable();
        uniq.dedup();
        let index: BTreeMap<usize, usize> = uniq.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        let mut members = vec![0u64; uniq.len()];
        let class_of = d2_of
            .iter()
            .map(|d| match index.get(d) {
                Some(&k) => {
                    members[k] += 1;
                    k
                }
                None => usize::MAX,
            })
            .collect();
        Self { side, class_of, distances: uniq.iter().map(|&d| (d as f64).sqrt()).collect(), members }
    }
}

/// C(r) averaged over samples and over all site pairs at distance r (r > 0).
pub fn field_two_point<F: AsRef<[f64]>>(fields: &[F], side: usize) -> Result<CorrelationProfile> {
    if fields.is_empty() {
        return Err(Error::Empty("two-point function needs at least one sample"));
    }
    let n = side * side;
    let classes = DistanceClasses::new(side);
    let mut sums = vec![0.0; classes.distances.len()];
    let mut disp = vec![0.0; n];
    for field in fields {
        let f = field.as_ref();
        if f.len() != n {
            return Err(Error::dim(n, f.len()));
        }
        disp.iter_mut().for_each(|d| *d = 0.0);
        // S(d) = Σ_i f_i f_{i+d} for every displacement d = (dr, dc).
        for r in 0..side {
            for c in 0..side {
                let fi = f[r * side + c];
                if fi == 0.0 {
                    continue;
                }
                for dr in 0..side {
                    let row = ((r + dr) % side) * side;
                    let out = &mut disp[dr * side..(dr + 1) * side];
                    let (tail, head) = (&f[row + c..row + side], &f[row..row + c]);
                    for (o, v) in out.iter_mut().zip(tail.iter().chain(head)) {
                        *o += fi * v;
                    }
                }
            }
        }
        for (d, &s) in disp.iter().enumerate() {
            let k = classes.class_of[d];
            if k != usize::MAX {
                sums[k] += s;
            }
        }
    }
    let samples = fields.len() as f64;
    let entries = classes
        .distances
        .iter()
        .zip(&sums)
        .zip(&classes.members)
        .map(|((&distance, &sum), &m)| ProfileEntry {
            distance,
            value: sum / (samples * n as f64 * m as f64),
            pair_count: fields.len() as u64 * n as u64 * m / 2,
        })
        .collect();
    debug_assert_eq!(classes.side, side);
    Ok(CorrelationProfile { entries })
}

pub fn two_point_function(ensemble: &Ensemble, kind: FieldKind) -> Result<CorrelationProfile> {
    let fields = match kind {
        FieldKind::Spin => spin_field(ensemble)?,
        FieldKind::Epsilon => epsilon_field(ensemble)?,
    };
    let values: Vec<Vec<f64>> = fields.into_iter().map(|f| f.values).collect();
    field_two_point(&values, ensemble.side())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// B for correlators, A/Tc for the magnetization law.
    pub amplitude: ParamEstimate,
    /// Δ (scaling dimension).
    pub exponent: ParamEstimate,
    pub range: (f64, f64),
    pub n_points: usize,
    pub residual_norm: f64,
}

impl PowerLawFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,estimate,se,ci_low,ci_high\n");
        for p in [&self.amplitude, &self.exponent] {
            let _ = writeln!(out, "{},{},{},{},{}", p.name, p.estimate, p.standard_error, p.ci_low, p.ci_high);
        }
        out
    }
}

fn estimates(fit: &FitResult, names: [&str; 2]) -> Result<[ParamEstimate; 2]> {
    let make = |k: usize| -> Result<ParamEstimate> {
        let se = fit.standard_error(k);
        let (lo, hi) = t_confidence_interval(fit.params[k], se, fit.dof as f64, CONFIDENCE_LEVEL)?;
        Ok(ParamEstimate { name: names[k].to_string(), estimate: fit.params[k], standard_error: se, ci_low: lo, ci_high: hi })
    };
    Ok([make(0)?, make(1)?])
}

/// Ordinary least squares of ln y on ln x: returns (ln amplitude, slope).
fn loglog_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

fn power_model(p: &[f64], x: f64) -> f64 {
    p[0] * x.powf(-2.0 * p[1])
}

fn power_jacobian(p: &[f64], x: f64, out: &mut [f64]) {
    let base = x.powf(-2.0 * p[1]);
    out[0] = base;
    out[1] = -2.0 * x.ln() * p[0] * base;
}

/// Fits `C(r) = B r^(−2Δ)` in linear space over `r_min <= r <= r_max`.
pub fn fit_power_law(profile: &CorrelationProfile, r_min: f64, r_max: f64) -> Result<PowerLawFit> {
    let win = profile.window(r_min, r_max);
    if win.len() < 3 {
        return Err(Error::Invalid(format!("power-law fit needs >= 3 points in [{r_min}, {r_max}], found {}", win.len())));
    }
    let (x, y) = (win.distances(), win.values());
    let initial = match loglog_line(&x, &y) {
        Some((ln_b, slope)) => vec![ln_b.exp(), -slope / 2.0],
        None => vec![y[0] * x[0].powf(0.25), 0.125],
    };
    let problem = FitProblem::new(&power_model, initial, x, y).with_jacobian(&power_jacobian);
    let fit = least_squares_fit(&problem)?;
    let [amplitude, exponent] = estimates(&fit, ["B", "Delta"])?;
    Ok(PowerLawFit { amplitude, exponent, range: (r_min, r_max), n_points: win.len(), residual_norm: fit.residual_norm() })
}

/// Log-log linear cross-check of [`fit_power_law`]; returns (B, Δ).
pub fn fit_power_law_loglog(profile: &CorrelationProfile, r_min: f64, r_max: f64) -> Result<(f64, f64)> {
    let win = profile.window(r_min, r_max);
    loglog_line(&win.distances(), &win.values())
        .map(|(ln_b, slope)| (ln_b.exp(), -slope / 2.0))
        .ok_or_else(|| Error::Invalid("log-log fit needs >= 2 positive points".into()))
}

/// Default window: r ∈ [1, L/2] minus the largest 10% of those distances,
/// where periodic wraparound flattens C(r).
pub fn default_fit_range(profile: &CorrelationProfile, side: usize) -> (f64, f64) {
    let half = side as f64 / 2.0;
    let inside: Vec<f64> = profile.distances().into_iter().filter(|&r| (1.0..=half).contains(&r)).collect();
    let drop = inside.len() / 10;
    let keep = inside.len().saturating_sub(drop).max(1);
    (1.0, inside.get(keep - 1).copied().unwrap_or(half))
}

/// Fits `m = (A/Tc)·|T − Tc|^Δm` to (T, m) points; amplitude is A/Tc.
pub fn fit_magnetization(points: &[(f64, f64)], tc: f64) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::Invalid(format!("magnetization fit needs >= 3 points, got {}", points.len())));
    }
    let x: Vec<f64> = points.iter().map(|p| (p.0 - tc).abs()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    if x.contains(&0.0) {
        return Err(Error::domain("magnetization points must avoid T = Tc"));
    }
    let model = |p: &[f64], d: f64| p[0] * d.powf(p[1]);
    let jac = |p: &[f64], d: f64, out: &mut [f64]| {
        let base = d.powf(p[1]);
        out[0] = base;
        out[1] = p[0] * base * d.ln();
    };
    let initial = match loglog_line(&x, &y) {
        Some((ln_a, slope)) => vec![ln_a.exp(), slope],
        None => vec![1.0, 0.125],
    };
    let problem = FitProblem::new(&model, initial, x.clone(), y).with_jacobian(&jac);
    let fit = least_squares_fit(&problem)?;
    let [amplitude, exponent] = estimates(&fit, ["A_over_Tc", "Delta_m"])?;
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(PowerLawFit { amplitude, exponent, range: (lo, hi), n_points: points.len(), residual_norm: fit.residual_norm() })
}

/// ⟨v_i h_a⟩ for every hidden unit a, each laid out on the visible lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct VhCorrelationMap {
    pub visible_side: usize,
    /// One row of N_v values per hidden unit.
    pub grids: Vec<Vec<f64>>,
}

impl VhCorrelationMap {
    pub fn n_hidden(&self) -> usize {
        self.grids.len()
    }

    pub fn grid_csv(&self, unit: usize) -> String {
        let l = self.visible_side;
        let mut out = String::new();
        for row in self.grids[unit].chunks(l) {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Long format, one `unit,row,col,value` line per map entry.
    pub fn to_long_csv(&self) -> String {
        let l = self.visible_side;
        let mut s = String::from("unit,row,col,value\n");
        for (a, g) in self.grids.iter().enumerate() {
            for (i, v) in g.iter().enumerate() {
                s.push_str(&format!("{a},{},{},{v}\n", i / l, i % l));
            }
        }
        s
    }

    pub fn from_long_csv(text: &str) -> Result<Self> {
        let mut cells: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("map line {}: `{line}`", n + 1));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(bad());
            }
            cells.push((cols[0].parse().map_err(|_| bad())?, cols[1].parse().map_err(|_| bad())?, cols[2].parse().map_err(|_| bad())?, cols[3].parse().map_err(|_| bad())?));
        }
        if cells.is_empty() {
            return Err(Error::Empty("map CSV has no entries"));
        }
        let side = cells.iter().map(|c| c.1.max(c.2)).max().unwrap_or(0) + 1;
        let units = cells.iter().map(|c| c.0).max().unwrap_or(0) + 1;
        if cells.len() != units * side * side {
            return Err(Error::Format(format!("map CSV has {} entries, expected {units}×{side}×{side}", cells.len())));
        }
        let mut grids = vec![vec![f64::NAN; side * side]; units];
        for (a, r, c, v) in cells {
            grids[a][r * side + c] = v;
        }
        if grids.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Format("map CSV repeats or omits entries".into()));
        }
        Ok(Self { visible_side: side, grids })
    }
}

/// `⟨v_i h_a⟩ =(1/N_s) Σ_A v_i^(A) h_a^(A)` with samples paired by row.
pub fn vh_correlator_matrix(visible: &Matrix, hidden: &Matrix, visible_side: usize) -> Result<VhCorrelationMap> {
    if visible.rows() != hidden.rows() {
        return Err(Error::dim(visible.rows(), hidden.rows()));
    }
    if visible.cols() != visible_side * visible_side {
        return Err(Error::dim(visible_side * visible_side, visible.cols()));
    }
    if visible.rows() == 0 {
        return Err(Error::Empty("vh correlator needs samples"));
    }
    let (ns, nv, nh) = (visible.rows(), visible.cols(), hidden.cols());
    // (N_h × N_s)·(N_s × N_v) gives one grid per hidden unit.
    let mut out = vec![0.0; nh * nv];
    gemm(nh, ns, nv, hidden.as_slice(), true, visible.as_slice(), false, &mut out, 1.0 / ns as f64, false);
    Ok(VhCorrelationMap { visible_side, grids: out.chunks(nv).map(<[f64]>::to_vec).collect() })
}

pub fn vh_correlator(visible: &Ensemble, hidden: &Ensemble) -> Result<VhCorrelationMap> {
    vh_correlator_matrix(&visible.to_matrix(), &hidden.to_matrix(), visible.side())
}

/// `⟨x_i x_j⟩ = (1/N_h) Σ_a ⟨v_i h_a⟩⟨v_j h_a⟩`, averaged over site pairs at
/// equal lattice distance.
pub fn patch_two_point(map: &VhCorrelationMap) -> Result<CorrelationProfile> {
    field_two_point(&map.grids, map.visible_side)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    WhiteNoise,
    Checkerboard,
}

/// A single-hidden-unit map: i.i.d. uniform [−1, 1] noise, or ±1 blocks of
/// `block_size` alternating like a checkerboard.
pub fn synthetic_map(kind: SyntheticKind, side: usize, block_size: usize, seed: u64) -> Result<VhCorrelationMap> {
    let grid = match kind {
        SyntheticKind::WhiteNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..side * side).map(|_| rng.gen_range(-1.0..=1.0)).collect()
        }
        SyntheticKind::Checkerboard => {
            if block_size == 0 || !side.is_multiple_of(block_size) {
                return Err(Error::Divisibility { side, divisor: block_size });
            }
            (0..side * side)
                .map(|k| if (k / side / block_size + k % side / block_size).is_multiple_of(2) { 1.0 } else { -1.0 })
                .collect()
        }
    };
    Ok(VhCorrelationMap { visible_side: side, grids: vec![grid] })
}

/// Qualitative shape statistics of a profile.
pub mod shape {
    /// Indices of strict interior local maxima.
    pub fn interior_peaks(values: &[f64]) -> Vec<usize> {
        (1..values.len().saturating_sub(1))
            .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
            .collect()
    }

    pub fn is_non_increasing(values: &[f64]) -> bool {
        values.windows(2).all(|w| w[1] <= w[0])
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    }

    /// Spearman rank correlation (average ranks for ties).
    pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
        let (rx, ry) = (ranks(x), ranks(y));
        let n = rx.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Provenance, SpinConfig};

    fn ens(configs: Vec<SpinConfig>) -> Ensemble {
        Ensemble::new(configs, 2.0, Provenance::MonteCarlo, 0).unwrap()
    }

    /// Direct O(N²) pair loop over i < j.
    fn brute_two_point(fields: &[Vec<f64>], side: usize) -> Vec<(f64, f64)> {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        let n = side * side;
        for f in fields {
            for i in 0..n {
                for j in i + 1..n {
                    let dr = (i / side).abs_diff(j / side);
                    let dc = (i % side).abs_diff(j % side);
                    let (dr, dc) = (dr.min(side - dr), dc.min(side - dc));
                    let e = acc.entry(dr * dr + dc * dc).or_insert((0.0, 0));
                    e.0 += f[i] * f[j];
                    e.1 += 1;
                }
            }
        }
        acc.into_iter().map(|(d2, (s, c))| ((d2 as f64).sqrt(), s / c as f64)).collect()
    }

    #[test]
    fn uniform_ensemble_has_zero_spin_field() {
        let e = ens(vec![SpinConfig::uniform(4, 1.0); 3]);
        for f in spin_field(&e).unwrap() {
            assert!(f.values.iter().all(|&v| v == 0.0));
        }
        let p = two_point_function(&e, FieldKind::Spin).unwrap();
        assert!(p.entries.iter().all(|x| x.value == 0.0));
        let eps = epsilon_field(&e).unwrap();
        assert!(eps.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn zero_mean_ensemble_field_is_raw() {
        let a = SpinConfig::checkerboard(4);
        let e = ens(vec![a.clone(), a.flipped()]);
        let f = spin_field(&e).unwrap();
        assert_eq!(f[0].values, a.values());
    }

    #[test]
    fn centering_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = ens((0..5).map(|_| SpinConfig::random(5, &mut rng)).collect());
        let f = spin_field(&e).unwrap();
        let total: f64 = f.iter().flat_map(|x| x.values.iter()).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn epsilon_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = ens((0..3).map(|_| SpinConfig::random(4, &mut rng)).collect());
        let s = spin_field(&e).unwrap();
        let eps = epsilon_field(&e).unwrap();
        let l = 4isize;
        let idx = |r: isize, c: isize| (r.rem_euclid(l) * l + c.rem_euclid(l)) as usize;
        let mut raw = Vec::new();
        for f in &s {
            for r in 0..l {
                for c in 0..l {
                    let nb = f.values[idx(r + 1, c)] + f.values[idx(r - 1, c)] + f.values[idx(r, c + 1)] + f.values[idx(r, c - 1)];
                    raw.push(f.values[idx(r, c)] * nb);
                }
            }
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let flat: Vec<f64> = eps.iter().flat_map(|f| f.values.iter().copied()).collect();
        for (a, b) in flat.iter().zip(&raw) {
            assert!((a - (b - mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_matches_brute_force() {
        for side in [3, 4, 5] {
            let mut rng = ChaCha8Rng::seed_from_u64(side as u64);
            let e = ens((0..2).map(|_| SpinConfig::random(side, &mut rng)).collect());
            let fields: Vec<Vec<f64>> = spin_field(&e).unwrap().into_iter().map(|f| f.values).collect();
            let fast = field_two_point(&fields, side).unwrap();
            let slow = brute_two_point(&fields, side);
            assert_eq!(fast.len(), slow.len());
            for (a, (r, v)) in fast.entries.iter().zip(&slow) {
                assert!((a.distance - r).abs() < 1e-12);
                assert!((a.value - v).abs() < 1e-12, "side {side} r {r}: {} vs {v}", a.value);
            }
            let pairs: u64 = fast.entries.iter().map(|e| e.pair_count).sum();
            let n = (side * side) as u64;
            assert_eq!(pairs, 2 * n * (n - 1) / 2);
        }
    }

    #[test]
    fn synthetic_power_law_recovered() {
        let profile = CorrelationProfile {
            entries: (1..=8).map(|r| ProfileEntry { distance: r as f64, value: (r as f64).powf(-0.25), pair_count: 1 }).collect(),
        };
        let fit = fit_power_law(&profile, 1.0, 8.0).unwrap();
        assert!((fit.exponent.estimate - 0.125).abs() < 1e-6);
        assert!((fit.amplitude.estimate - 1.0).abs() < 1e-6);
        let (b, d) = fit_power_law_loglog(&profile, 1.0, 8.0).unwrap();
        assert!((b - 1.0).abs() < 1e-9 && (d - 0.125).abs() < 1e-9);
    }

    #[test]
    fn magnetization_law_recovered() {
        let tc = 2.269;
        let pts: Vec<(f64, f64)> = [2.1f64, 2.2, 2.25, 2.0].iter().map(|&t| (t, 0.942 * (tc - t).powf(0.126))).collect();
        let fit = fit_magnetization(&pts, tc).unwrap();
        assert!((fit.amplitude.estimate - 0.942).abs() < 1e-6);
        assert!((fit.exponent.estimate - 0.126).abs() < 1e-6);
        assert!(fit_magnetization(&pts[..2], tc).is_err());
    }

    #[test]
    fn constant_map_gives_constant_profile() {
        let map = VhCorrelationMap { visible_side: 6, grids: vec![vec![0.3; 36]; 2] };
        let p = patch_two_point(&map).unwrap();
        assert!(p.entries.iter().all(|e| (e.value - 0.09).abs() < 1e-12));
    }

    #[test]
    fn copied_visible_unit_gives_correlation_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vis = ens((0..50).map(|_| SpinConfig::random(4, &mut rng)).collect());
        let k = 5;
        let vm = vis.to_matrix();
        let hidden = Matrix::from_vec(vm.rows(), 1, (0..vm.rows()).map(|r| vm.get(r, k)).collect());
        let map = vh_correlator_matrix(&vm, &hidden, 4).unwrap();
        let g = &map.grids[0];
        assert_eq!(g[k], 1.0);
        assert!(g.iter().all(|&x| x <= 1.0));
        assert!(vh_correlator_matrix(&vm, &Matrix::zeros(3, 1), 4).is_err());
    }

    #[test]
    fn checkerboard_divisibility() {
        assert!(synthetic_map(SyntheticKind::Checkerboard, 32, 5, 0).is_err());
        let m = synthetic_map(SyntheticKind::Checkerboard, 8, 2, 0).unwrap();
        assert_eq!(&m.grids[0][..8], &[1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn default_range_drops_tail() {
        let p = field_two_point(&[vec![1.0; 100]], 10).unwrap();
        let (lo, hi) = default_fit_range(&p, 10);
        assert_eq!(lo, 1.0);
        assert!((hi - 20f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn shape_helpers() {
        assert_eq!(shape::interior_peaks(&[3.0, 1.0, 2.0, 0.0, 0.5, 0.4]), vec![2, 4]);
        assert!(shape::is_non_increasing(&[3.0, 3.0, 1.0]));
        assert!((shape::spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
