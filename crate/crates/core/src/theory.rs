//! Exact-enumeration checks relating a variational RG transformation
//! `T(v, h)` to an RBM, on systems small enough to tabulate.
//!
//! With `T(v, h) = −E(v, h) + H(v)` the coarse Hamiltonian
//! `H^RG(h) = −ln Σ_v e^(T(v,h) − H(v))` coincides with the RBM hidden-marginal
//! Hamiltonian `−ln Σ_v e^(−E(v,h))`. The transformation is exact when
//! `Σ_h e^(T(v,h)) = 1` for every v.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::fill_spin_vector;
use crate::rbm::exact::{ln_2cosh, log_sum_exp};
use crate::rbm::RbmParams;

/// Enumeration limit on the total number of units in a table.
pub const MAX_THEORY_UNITS: usize = 20;

fn check_units(units: usize) -> Result<()> {
    if units > MAX_THEORY_UNITS {
        return Err(Error::TooLarge { units, limit: MAX_THEORY_UNITS });
    }
    Ok(())
}

fn state_label(index: usize, n: usize) -> String {
    (0..n).map(|k| if index >> k & 1 == 1 { '+' } else { '-' }).collect()
}

/// An energy for every ±1 vector of length `n_units`, indexed as in
/// [`crate::lattice::spin_vector`].
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTable {
    n_units: usize,
    energies: Vec<f64>,
}

impl HamiltonianTable {
    pub fn new(n_units: usize, energies: Vec<f64>) -> Result<Self> {
        check_units(n_units)?;
        if energies.len() != 1 << n_units {
            return Err(Error::dim(1 << n_units, energies.len()));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Invalid("Hamiltonian entries must be finite".into()));
        }
        Ok(Self { n_units, energies })
    }

    pub fn from_fn(n_units: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        check_units(n_units)?;
        let mut v = vec![0.0; n_units];
        let energies = (0..1usize << n_units)
            .map(|i| {
                fill_spin_vector(i, &mut v);
                f(&v)
            })
            .collect();
        Self::new(n_units, energies)
    }

    /// Independent uniform(−scale, scale) energy per state.
    pub fn random<R: Rng + ?Sized>(n_units: usize, scale: f64, rng: &mut R) -> Result<Self> {
        check_units(n_units)?;
        Self::new(n_units, (0..1usize << n_units).map(|_| rng.gen_range(-scale..scale)).collect())
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, index: usize) -> f64 {
        self.energies[index]
    }

    /// Boltzmann distribution `e^(−H) / Z`.
    pub fn boltzmann(&self) -> ExactDistribution {
        let logs: Vec<f64> = self.energies.iter().map(|e| -e).collect();
        ExactDistribution::from_log_weights(self.n_units, &logs).expect("table size already checked")
    }

    /// `state,energy` rows with states written as `+`/`-` strings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("state,energy\n");
        for (i, e) in self.energies.iter().enumerate() {
            s.push_str(&format!("{},{}\n", state_label(i, self.n_units), e));
        }
        s
    }
}

/// Probabilities over every ±1 vector of length `n_units`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    n_units: usize,
    probabilities: Vec<f64>,
}

impl ExactDistribution {
    pub fn new(n_units: usize, probabilities: Vec<f64>) -> Result<Self> {
        check_units(n_units)?;
        if probabilities.len() != 1 << n_units {
            return Err(Error::dim(1 << n_units, probabilities.len()));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::domain("probabilities must be non-negative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { n_units, probabilities })
    }

    /// Normalizes `exp(log_weights)` with a log-sum-exp.
    pub fn from_log_weights(n_units: usize, log_weights: &[f64]) -> Result<Self> {
        check_units(n_units)?;
        if log_weights.len() != 1 << n_units {
            return Err(Error::dim(1 << n_units, log_weights.len()));
        }
        let lz = log_sum_exp(log_weights);
        let mut p: Vec<f64> = log_weights.iter().map(|l| (l - lz).exp()).collect();
        // Pin the sum to 1 against accumulated rounding.
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        Self::new(n_units, p)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// ⟨s_k⟩ for every unit.
    pub fn means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_units];
        for (i, p) in self.probabilities.iter().enumerate() {
            for (k, mk) in m.iter_mut().enumerate() {
                *mk += if i >> k & 1 == 1 { *p } else { -*p };
            }
        }
        m
    }
}

/// A table over (v, h) pairs, indexed `v_index · 2^N_h + h_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub values: Vec<f64>,
}

impl JointTable {
    #[inline]
    pub fn get(&self, v_index: usize, h_index: usize) -> f64 {
        self.values[(v_index << self.n_hidden) + h_index]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("v,h,value\n");
        for vi in 0..1usize << self.n_visible {
            for hi in 0..1usize << self.n_hidden {
                s.push_str(&format!("{},{},{}\n", state_label(vi, self.n_visible), state_label(hi, self.n_hidden), self.get(vi, hi)));
            }
        }
        s
    }
}

/// A normalized distribution over (v, h), indexed like [`JointTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    n_visible: usize,
    n_hidden: usize,
    probabilities: Vec<f64>,
}

impl JointDistribution {
    pub fn from_log_weights(n_visible: usize, n_hidden: usize, log_weights: &[f64]) -> Result<Self> {
        let d = ExactDistribution::from_log_weights(n_visible + n_hidden, log_weights)?;
        Ok(Self { n_visible, n_hidden, probabilities: d.probabilities })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn visible_marginal(&self) -> ExactDistribution {
        let nh = 1usize << self.n_hidden;
        let p = (0..1usize << self.n_visible).map(|v| self.probabilities[v * nh..(v + 1) * nh].iter().sum()).collect();
        ExactDistribution { n_units: self.n_visible, probabilities: p }
    }

    pub fn hidden_marginal(&self) -> ExactDistribution {
        let nh = 1usize << self.n_hidden;
        let mut p = vec![0.0; nh];
        for (i, q) in self.probabilities.iter().enumerate() {
            p[i % nh] += q;
        }
        ExactDistribution { n_units: self.n_hidden, probabilities: p }
    }

    /// ⟨v_j h_b⟩ − ⟨v_j⟩⟨h_b⟩, row-major N_v × N_h.
    pub fn connected_correlations(&self) -> Vec<f64> {
        let (nv, nh) = (self.n_visible, self.n_hidden);
        let mut vh = vec![0.0; nv * nh];
        let mut mv = vec![0.0; nv];
        let mut mh = vec![0.0; nh];
        let sign = |idx: usize, k: usize| if idx >> k & 1 == 1 { 1.0 } else { -1.0 };
        for (i, p) in self.probabilities.iter().enumerate() {
            let (vi, hi) = (i >> nh, i & ((1 << nh) - 1));
            for j in 0..nv {
                let sv = sign(vi, j);
                mv[j] += p * sv;
                for b in 0..nh {
                    vh[j * nh + b] += p * sv * sign(hi, b);
                }
            }
            for b in 0..nh {
                mh[b] += p * sign(hi, b);
            }
        }
        for j in 0..nv {
            for b in 0..nh {
                vh[j * nh + b] -= mv[j] * mh[b];
            }
        }
        vh
    }
}

fn check_pair(rbm: &RbmParams, h_visible: &HamiltonianTable) -> Result<()> {
    check_units(rbm.n_visible() + rbm.n_hidden())?;
    if h_visible.n_units() != rbm.n_visible() {
        return Err(Error::dim(rbm.n_visible(), h_visible.n_units()));
    }
    Ok(())
}

fn rbm_energy_table(rbm: &RbmParams) -> Result<Vec<f64>> {
    let (nv, nh) = (rbm.n_visible(), rbm.n_hidden());
    let mut v = vec![0.0; nv];
    let mut h = vec![0.0; nh];
    let mut out = Vec::with_capacity(1 << (nv + nh));
    for vi in 0..1usize << nv {
        fill_spin_vector(vi, &mut v);
        for hi in 0..1usize << nh {
            fill_spin_vector(hi, &mut h);
            out.push(rbm.energy(&v, &h)?);
        }
    }
    Ok(out)
}

/// `T(v, h) = −E(v, h) + H(v)` over all pairs.
pub fn t_operator(rbm: &RbmParams, h_visible: &HamiltonianTable) -> Result<JointTable> {
    check_pair(rbm, h_visible)?;
    let nh = rbm.n_hidden();
    let values = rbm_energy_table(rbm)?.into_iter().enumerate().map(|(i, e)| -e + h_visible.energy(i >> nh)).collect();
    Ok(JointTable { n_visible: rbm.n_visible(), n_hidden: nh, values })
}

/// `H^RG(h) = −ln Σ_v e^(T(v,h) − H(v))`, summed over the tabulated T.
pub fn rg_hamiltonian_exact(rbm: &RbmParams, h_visible: &HamiltonianTable) -> Result<HamiltonianTable> {
    let t = t_operator(rbm, h_visible)?;
    let (nv, nh) = (rbm.n_visible(), rbm.n_hidden());
    let mut terms = vec![0.0; 1 << nv];
    let energies = (0..1usize << nh)
        .map(|hi| {
            for (vi, term) in terms.iter_mut().enumerate() {
                *term = t.get(vi, hi) - h_visible.energy(vi);
            }
            -log_sum_exp(&terms)
        })
        .collect();
    HamiltonianTable::new(nh, energies)
}

/// RBM hidden-marginal Hamiltonian in closed form: the visible sum factorizes,
/// `−ln Σ_v e^(−E) = −b^(h)·h − Σ_i ln 2cosh(Σ_a W_ia h_a + b^(v)_i)`.
pub fn rbm_hidden_hamiltonian(rbm: &RbmParams) -> Result<HamiltonianTable> {
    let nh = rbm.n_hidden();
    check_units(nh)?;
    let mut h = vec![0.0; nh];
    let energies = (0..1usize << nh)
        .map(|hi| {
            fill_spin_vector(hi, &mut h);
            let field = rbm.visible_field(&h).expect("hidden length matches");
            -rbm.hidden_bias.iter().zip(&h).map(|(b, x)| b * x).sum::<f64>() - field.into_iter().map(ln_2cosh).sum::<f64>()
        })
        .collect();
    HamiltonianTable::new(nh, energies)
}

/// `max_v |ln Σ_h e^(T(v,h))|`; zero exactly when the transformation is exact.
pub fn exactness_defect(rbm: &RbmParams, h_visible: &HamiltonianTable) -> Result<f64> {
    let t = t_operator(rbm, h_visible)?;
    let nh = 1usize << rbm.n_hidden();
    Ok((0..1usize << rbm.n_visible()).map(|vi| log_sum_exp(&t.values[vi * nh..(vi + 1) * nh]).abs()).fold(0.0, f64::max))
}

/// The joint `Z⁻¹ e^(T(v,h) − H(v))` defined by a T table.
pub fn rg_joint(rbm: &RbmParams, h_visible: &HamiltonianTable) -> Result<JointDistribution> {
    let t = t_operator(rbm, h_visible)?;
    let nh = rbm.n_hidden();
    let logs: Vec<f64> = t.values.iter().enumerate().map(|(i, x)| x - h_visible.energy(i >> nh)).collect();
    JointDistribution::from_log_weights(rbm.n_visible(), nh, &logs)
}

/// The RBM joint `Z⁻¹ e^(−E(v,h))`.
pub fn rbm_joint(rbm: &RbmParams) -> Result<JointDistribution> {
    check_units(rbm.n_visible() + rbm.n_hidden())?;
    let logs: Vec<f64> = rbm_energy_table(rbm)?.into_iter().map(|e| -e).collect();
    JointDistribution::from_log_weights(rbm.n_visible(), rbm.n_hidden(), &logs)
}

/// The product `ρ̃(h) ρ(v)`: same marginals, no visible–hidden correlation.
pub fn factorized_joint(rho_v: &ExactDistribution, rho_h: &ExactDistribution) -> Result<JointDistribution> {
    check_units(rho_v.n_units + rho_h.n_units)?;
    let mut p = Vec::with_capacity(rho_v.probabilities.len() * rho_h.probabilities.len());
    for pv in &rho_v.probabilities {
        for ph in &rho_h.probabilities {
            p.push(pv * ph);
        }
    }
    Ok(JointDistribution { n_visible: rho_v.n_units, n_hidden: rho_h.n_units, probabilities: p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rbm(nv: usize, nh: usize, seed: u64) -> RbmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = RbmParams::random(nv, nh, 1.0, &mut rng);
        p.visible_bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        p.hidden_bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        p
    }

    #[test]
    fn t_operator_cases() {
        let h = HamiltonianTable::from_fn(2, |v| -v[0] * v[1]).unwrap();
        let t = t_operator(&RbmParams::zeros(2, 1), &h).unwrap();
        for vi in 0..4 {
            for hi in 0..2 {
                assert_eq!(t.get(vi, hi), h.energy(vi));
            }
        }
        let rbm = random_rbm(3, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = HamiltonianTable::random(3, 1.0, &mut rng).unwrap();
        let t = t_operator(&rbm, &h).unwrap();
        let v = crate::lattice::spin_vector(5, 3);
        let hh = crate::lattice::spin_vector(2, 2);
        assert!((t.get(5, 2) - (-rbm.energy(&v, &hh).unwrap() + h.energy(5))).abs() < 1e-14);
    }

    #[test]
    fn rg_hamiltonian_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..10 {
            let rbm = random_rbm(4, 2, seed);
            let h = HamiltonianTable::random(4, 2.0, &mut rng).unwrap();
            let a = rg_hamiltonian_exact(&rbm, &h).unwrap();
            let b = rbm_hidden_hamiltonian(&rbm).unwrap();
            for (x, y) in a.energies().iter().zip(b.energies()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_rbm_gives_uniform_hidden() {
        let h = HamiltonianTable::from_fn(3, |v| v.iter().sum::<f64>()).unwrap();
        let hr = rg_hamiltonian_exact(&RbmParams::zeros(3, 2), &h).unwrap();
        assert!(hr.energies().iter().all(|e| (e - hr.energy(0)).abs() < 1e-14));
        let d = hr.boltzmann();
        assert!(d.probabilities().iter().all(|p| (p - 0.25).abs() < 1e-14));
    }

    #[test]
    fn exact_transformation_has_zero_defect() {
        // H(v) = −ln Σ_h e^(−E(v,h)) makes Σ_h e^T = 1 for every v.
        let rbm = RbmParams::new(1, 1, vec![0.7], vec![0.2], vec![-0.4]).unwrap();
        let h = HamiltonianTable::from_fn(1, |v| -0.2 * v[0] - ln_2cosh(0.7 * v[0] - 0.4)).unwrap();
        assert!(exactness_defect(&rbm, &h).unwrap() < 1e-10);
        let marginal = crate::rbm::exact::visible_distribution(&rbm).unwrap();
        for (p, q) in marginal.iter().zip(h.boltzmann().probabilities()) {
            assert!((p - q).abs() < 1e-10);
        }
        let nonconst = HamiltonianTable::from_fn(2, |v| v[0]).unwrap();
        assert!(exactness_defect(&RbmParams::zeros(2, 1), &nonconst).unwrap() > 0.0);
    }

    #[test]
    fn defect_gauge_invariant() {
        let rbm = random_rbm(3, 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = HamiltonianTable::random(3, 1.0, &mut rng).unwrap();
        let mut flipped = rbm.clone();
        flipped.gauge_flip_hidden(2);
        assert!((exactness_defect(&rbm, &h).unwrap() - exactness_defect(&flipped, &h).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn factorized_joint_is_uncorrelated() {
        let rbm = random_rbm(4, 2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = HamiltonianTable::random(4, 1.0, &mut rng).unwrap();
        let joint = rg_joint(&rbm, &h).unwrap();
        let (rv, rh) = (joint.visible_marginal(), joint.hidden_marginal());
        let a = factorized_joint(&rv, &rh).unwrap();
        assert!(a.connected_correlations().iter().all(|c| c.abs() < 1e-14));
        for (x, y) in a.visible_marginal().probabilities().iter().zip(rv.probabilities()) {
            assert!((x - y).abs() < 1e-15);
        }
        for (x, y) in a.hidden_marginal().probabilities().iter().zip(rh.probabilities()) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(joint.connected_correlations().iter().any(|c| c.abs() > 1e-3));
    }

    #[test]
    fn rg_joint_equals_rbm_joint() {
        let rbm = random_rbm(3, 2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = HamiltonianTable::random(3, 1.0, &mut rng).unwrap();
        let a = rg_joint(&rbm, &h).unwrap();
        let b = rbm_joint(&rbm).unwrap();
        for (x, y) in a.probabilities().iter().zip(b.probabilities()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn size_cap_and_csv() {
        assert!(matches!(HamiltonianTable::from_fn(21, |_| 0.0), Err(Error::TooLarge { .. })));
        let h = HamiltonianTable::from_fn(2, |v| v[0]).unwrap();
        assert_eq!(h.to_csv(), "state,energy\n--,-1\n+-,1\n-+,-1\n++,1\n");
        assert!(ExactDistribution::new(1, vec![0.5, 0.6]).is_err());
    }
}
