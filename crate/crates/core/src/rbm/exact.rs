//! Exact quantities for small RBMs by enumerating every visible state.
//!
//! Summing out the hidden layer gives the free energy
//! `−F(v) = Σ_i b^(v)_i v_i + Σ_a ln 2cosh(Σ_i W_ia v_i + b^(h)_a)`,
//! so `p(v) = e^(−F(v)) / Z` costs 2^N_v evaluations.

use super::RbmParams;
use crate::error::{Error, Result};
use crate::lattice::fill_spin_vector;

/// Enumeration limit on N_v + N_h.
pub const MAX_EXACT_UNITS: usize = 24;

fn check_size(params: &RbmParams) -> Result<()> {
    let units = params.n_visible() + params.n_hidden();
    if units > MAX_EXACT_UNITS {
        return Err(Error::TooLarge { units, limit: MAX_EXACT_UNITS });
    }
    Ok(())
}

/// `ln 2cosh(x)` without overflow for large |x|.
pub fn ln_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `−F(v)`, the log of the unnormalized visible marginal.
pub fn negative_free_energy(params: &RbmParams, v: &[f64]) -> Result<f64> {
    let x = params.hidden_field(v)?;
    let vis: f64 = params.visible_bias.iter().zip(v).map(|(b, vi)| b * vi).sum();
    Ok(vis + x.into_iter().map(ln_2cosh).sum::<f64>())
}

/// `ln Z` by enumeration over the visible layer.
pub fn log_partition(params: &RbmParams) -> Result<f64> {
    check_size(params)?;
    Ok(log_sum_exp(&negative_free_energies(params)?))
}

fn negative_free_energies(params: &RbmParams) -> Result<Vec<f64>> {
    let n = params.n_visible();
    let mut v = vec![0.0; n];
    (0..1usize << n)
        .map(|idx| {
            fill_spin_vector(idx, &mut v);
            negative_free_energy(params, &v)
        })
        .collect()
}

/// `p_λ(v)` for every visible state, indexed as in [`crate::lattice::spin_vector`].
pub fn visible_distribution(params: &RbmParams) -> Result<Vec<f64>> {
    check_size(params)?;
    let logs = negative_free_energies(params)?;
    let lz = log_sum_exp(&logs);
    Ok(logs.into_iter().map(|l| (l - lz).exp()).collect())
}

/// Exact KL divergence `Σ_v q(v) ln(q(v)/p_λ(v))` and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactKl {
    pub divergence: f64,
    /// ∂D/∂W_ia = ⟨v_i h_a⟩_model − ⟨v_i h_a⟩_data, row-major N_v × N_h.
    pub grad_weights: Vec<f64>,
    pub grad_visible_bias: Vec<f64>,
    pub grad_hidden_bias: Vec<f64>,
}

/// `target` is a distribution over the 2^N_v visible states. States with
/// q = 0 contribute nothing to the divergence.
pub fn exact_kl_and_gradient(params: &RbmParams, target: &[f64]) -> Result<ExactKl> {
    check_size(params)?;
    let (nv, nh) = (params.n_visible(), params.n_hidden());
    let states = 1usize << nv;
    if target.len() != states {
        return Err(Error::dim(states, target.len()));
    }
    if target.iter().any(|q| !(*q >= 0.0)) {
        return Err(Error::domain("target probabilities must be non-negative"));
    }
    let total: f64 = target.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("target must sum to 1, got {total}")));
    }

    let logs = negative_free_energies(params)?;
    let lz = log_sum_exp(&logs);
    let mut divergence = 0.0;
    let mut gw = vec![0.0; nv * nh];
    let mut gv = vec![0.0; nv];
    let mut gh = vec![0.0; nh];
    let mut v = vec![0.0; nv];
    for idx in 0..states {
        fill_spin_vector(idx, &mut v);
        let q = target[idx];
        let p = (logs[idx] - lz).exp();
        if q > 0.0 {
            divergence += q * (q.ln() - (logs[idx] - lz));
        }
        // weight of this state in ⟨·⟩_model − ⟨·⟩_data
        let w = p - q;
        if w == 0.0 {
            continue;
        }
        let t: Vec<f64> = params.hidden_field(&v)?.into_iter().map(f64::tanh).collect();
        for i in 0..nv {
            gv[i] += w * v[i];
            let row = &mut gw[i * nh..(i + 1) * nh];
            for (g, ta) in row.iter_mut().zip(&t) {
                *g += w * v[i] * ta;
            }
        }
        for (g, ta) in gh.iter_mut().zip(&t) {
            *g += w * ta;
        }
    }
    Ok(ExactKl { divergence: divergence.max(0.0), grad_weights: gw, grad_visible_bias: gv, grad_hidden_bias: gh })
}

/// Empirical distribution of ±1 rows over the 2^n visible states.
pub fn empirical_distribution<'a, I>(rows: I, n_visible: usize) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if n_visible > MAX_EXACT_UNITS {
        return Err(Error::TooLarge { units: n_visible, limit: MAX_EXACT_UNITS });
    }
    let mut counts = vec![0.0; 1 << n_visible];
    let mut n = 0usize;
    for row in rows {
        if row.len() != n_visible {
            return Err(Error::dim(n_visible, row.len()));
        }
        let mut idx = 0usize;
        for (i, &x) in row.iter().enumerate() {
            if x == 1.0 {
                idx |= 1 << i;
            } else if x != -1.0 {
                return Err(Error::Kind("empirical distribution needs ±1 rows".into()));
            }
        }
        counts[idx] += 1.0;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("empirical distribution of no rows"));
    }
    counts.iter_mut().for_each(|c| *c /= n as f64);
    Ok(counts)
}

/// Full joint `p(v, h)` indexed `v_index * 2^N_h + h_index`.
pub fn joint_distribution(params: &RbmParams) -> Result<Vec<f64>> {
    check_size(params)?;
    let (nv, nh) = (params.n_visible(), params.n_hidden());
    let mut v = vec![0.0; nv];
    let mut h = vec![0.0; nh];
    let mut logs = Vec::with_capacity(1 << (nv + nh));
    for vi in 0..1usize << nv {
        fill_spin_vector(vi, &mut v);
        for hi in 0..1usize << nh {
            fill_spin_vector(hi, &mut h);
            logs.push(-params.energy(&v, &h)?);
        }
    }
    let lz = log_sum_exp(&logs);
    Ok(logs.into_iter().map(|l| (l - lz).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(nv: usize, nh: usize, seed: u64) -> RbmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = RbmParams::random(nv, nh, 0.8, &mut rng);
        p.visible_bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        p.hidden_bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        p
    }

    #[test]
    fn ln_2cosh_stable() {
        assert!((ln_2cosh(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((ln_2cosh(0.7) - (2.0 * 0.7f64.cosh()).ln()).abs() < 1e-14);
        assert!((ln_2cosh(1000.0) - 1000.0).abs() < 1e-12);
        assert_eq!(ln_2cosh(-3.0), ln_2cosh(3.0));
    }

    #[test]
    fn zero_params_uniform() {
        let p = RbmParams::zeros(3, 2);
        let d = visible_distribution(&p).unwrap();
        assert!(d.iter().all(|x| (x - 0.125).abs() < 1e-15));
        assert!((log_partition(&p).unwrap() - 32f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn marginal_matches_joint() {
        let p = random_params(3, 3, 1);
        let joint = joint_distribution(&p).unwrap();
        assert!((joint.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let marg = visible_distribution(&p).unwrap();
        for (vi, m) in marg.iter().enumerate() {
            let s: f64 = joint[vi * 8..(vi + 1) * 8].iter().sum();
            assert!((s - m).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = random_params(3, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut q: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= s);
        let g = exact_kl_and_gradient(&p, &q).unwrap();
        let h = 1e-6;
        let kl = |p: &RbmParams| exact_kl_and_gradient(p, &q).unwrap().divergence;
        for k in 0..p.weights.len() {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.weights[k] += h;
            b.weights[k] -= h;
            assert!(((kl(&a) - kl(&b)) / (2.0 * h) - g.grad_weights[k]).abs() < 1e-7);
        }
        for k in 0..3 {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.visible_bias[k] += h;
            b.visible_bias[k] -= h;
            assert!(((kl(&a) - kl(&b)) / (2.0 * h) - g.grad_visible_bias[k]).abs() < 1e-7);
        }
        for k in 0..2 {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.hidden_bias[k] += h;
            b.hidden_bias[k] -= h;
            assert!(((kl(&a) - kl(&b)) / (2.0 * h) - g.grad_hidden_bias[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn self_target_has_zero_kl() {
        let p = random_params(4, 2, 5);
        let q = visible_distribution(&p).unwrap();
        let g = exact_kl_and_gradient(&p, &q).unwrap();
        assert!(g.divergence.abs() < 1e-12);
        assert!(g.grad_weights.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn gauge_flip_keeps_marginal() {
        let p = random_params(4, 3, 6);
        let mut f = p.clone();
        f.gauge_flip_hidden(1);
        let (a, b) = (visible_distribution(&p).unwrap(), visible_distribution(&f).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-13));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(visible_distribution(&RbmParams::zeros(20, 5)), Err(Error::TooLarge { units: 25, .. })));
        let p = RbmParams::zeros(2, 1);
        assert!(exact_kl_and_gradient(&p, &[0.5, 0.5]).is_err());
        assert!(exact_kl_and_gradient(&p, &[0.5, 0.5, 0.5, 0.5]).is_err());
        assert!(empirical_distribution(std::iter::empty::<&[f64]>(), 2).is_err());
    }

    #[test]
    fn empirical_counts() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, -1.0], vec![1.0, -1.0], vec![-1.0, -1.0], vec![1.0, 1.0]];
        let d = empirical_distribution(rows.iter().map(Vec::as_slice), 2).unwrap();
        assert_eq!(d, vec![0.25, 0.5, 0.0, 0.25]);
    }
}
