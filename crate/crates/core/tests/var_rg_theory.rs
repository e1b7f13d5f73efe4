use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rglab::rbm::exact::{negative_free_energy, visible_distribution};
use rglab::rbm::RbmParams;
use rglab::theory::{exactness_defect, factorized_joint, rbm_hidden_hamiltonian, rg_hamiltonian_exact, ExactDistribution, HamiltonianTable};

fn rbm(nv: usize, nh: usize, seed: u64, scale: f64) -> RbmParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = RbmParams::random(nv, nh, scale, &mut rng);
    p.visible_bias.iter_mut().for_each(|b| *b = rng.gen_range(-scale..scale));
    p.hidden_bias.iter_mut().for_each(|b| *b = rng.gen_range(-scale..scale));
    p
}

fn distribution(n: usize, seed: u64) -> ExactDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..1usize << n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    ExactDistribution::new(n, w.into_iter().map(|x| x / s).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rg_hamiltonian_is_the_hidden_marginal(nv in 1usize..6, nh in 1usize..5, seed in any::<u64>(), scale in 0.1f64..4.0) {
        let p = rbm(nv, nh, seed, scale);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 9);
        let h = HamiltonianTable::random(nv, scale, &mut rng).unwrap();
        let a = rg_hamiltonian_exact(&p, &h).unwrap();
        let b = rbm_hidden_hamiltonian(&p).unwrap();
        for (x, y) in a.energies().iter().zip(b.energies()) {
            prop_assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn factorized_joint_has_both_marginals(nv in 1usize..6, nh in 1usize..5, seed in any::<u64>()) {
        let (rv, rh) = (distribution(nv, seed), distribution(nh, seed ^ 3));
        let j = factorized_joint(&rv, &rh).unwrap();
        for (a, b) in j.visible_marginal().probabilities().iter().zip(rv.probabilities()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in j.hidden_marginal().probabilities().iter().zip(rh.probabilities()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        prop_assert!(j.connected_correlations().iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn zero_defect_means_exact_marginal(nv in 1usize..6, nh in 1usize..5, seed in any::<u64>(), scale in 0.1f64..3.0) {
        let p = rbm(nv, nh, seed, scale);
        // H = F(v) is the Hamiltonian the RBM reproduces exactly.
        let h = HamiltonianTable::from_fn(nv, |v| -negative_free_energy(&p, v).unwrap()).unwrap();
        prop_assert!(exactness_defect(&p, &h).unwrap() < 1e-12);
        for (a, b) in visible_distribution(&p).unwrap().iter().zip(h.boltzmann().probabilities()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
