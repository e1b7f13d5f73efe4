use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rglab::io::{dataset_from_csv, dataset_to_csv, decode_dataset, decode_rbm, encode_dataset, encode_rbm, read_dataset, write_dataset, RbmCheckpoint};
use rglab::lattice::{Ensemble, Provenance, SpinConfig, SpinKind};
use rglab::rbm::{Propagation, RbmParams};

fn ensemble(side: usize, n: usize, real: bool, seed: u64) -> Ensemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs = (0..n)
        .map(|_| {
            let c = SpinConfig::random(side, &mut rng);
            if real {
                SpinConfig::new(side, c.values().iter().map(|v| v * 0.375).collect(), SpinKind::Real).unwrap()
            } else {
                c
            }
        })
        .collect();
    Ensemble::new(configs, 2.25, Provenance::MonteCarlo, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn binary_and_csv_round_trip(side in 1usize..12, n in 1usize..6, real in any::<bool>(), seed in any::<u64>()) {
        let e = ensemble(side, n, real, seed);
        prop_assert_eq!(&decode_dataset(&encode_dataset(&e).unwrap(), Provenance::MonteCarlo).unwrap(), &e);
        let back = dataset_from_csv(&dataset_to_csv(&e)).unwrap();
        prop_assert_eq!(back.configs(), e.configs());
    }

    #[test]
    fn any_truncation_is_an_error(side in 1usize..9, cut in 1usize..40, seed in any::<u64>()) {
        let bytes = encode_dataset(&ensemble(side, 3, false, seed)).unwrap();
        let cut = cut.min(bytes.len());
        prop_assert!(decode_dataset(&bytes[..bytes.len() - cut], Provenance::MonteCarlo).is_err());
    }
}

#[test]
fn rbm_checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ckpt = RbmCheckpoint { params: RbmParams::random(7, 3, 0.5, &mut rng), propagation: Propagation::Stochastic, seed: 99 };
    let bytes = encode_rbm(&ckpt);
    assert_eq!(&bytes[..4], b"RBM1");
    assert_eq!(decode_rbm(&bytes).unwrap(), ckpt);
    assert!(decode_rbm(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn file_write_is_readable_and_leaves_no_temp() {
    let d = tempfile::tempdir().unwrap();
    let e = ensemble(5, 4, false, 1);
    write_dataset(&d.path().join("a.isng"), &e).unwrap();
    assert_eq!(read_dataset(&d.path().join("a.isng")).unwrap().configs(), e.configs());
    assert_eq!(std::fs::read_dir(d.path()).unwrap().count(), 1);
}
