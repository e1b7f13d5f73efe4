//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs at desk scale. Criterion 10's Δ_m run needs `RGLAB_PAPER_SCALE=1`
//! (hours). The process exits non-zero only when a criterion fails that is
//! not listed in `KNOWN_FAILURES`.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rglab::classifier::{grid_dataset, grid_ensembles, hidden_size_for, measure_ensemble, read_temperature, train_classifier, MlpTrainConfig, Readout, TempBins};
use rglab::experiment::{run_experiment, ExperimentSpec, Scale, StageStatus, BUILTINS};
use rglab::flow::generate_flow;
use rglab::ising::{average_magnetization, critical_temperature, sample_ensemble, IsingModel, McSchedule};
use rglab::lattice::{derive_seed, Ensemble};
use rglab::observables::{
    default_fit_range, fit_power_law, patch_two_point, shape, synthetic_map, two_point_function, vh_correlator, FieldKind, SyntheticKind,
};
use rglab::rbm::exact::exact_kl_and_gradient;
use rglab::rbm::{train, CdConfig, Propagation, RbmParams};
use rglab::rg::rg_flow;
use rglab::theory::{factorized_joint, rbm_hidden_hamiltonian, rg_hamiltonian_exact, ExactDistribution, HamiltonianTable};

/// Criteria that fail for documented reasons (see the README's results table).
const KNOWN_FAILURES: &[u32] = &[3, 7];

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

fn pass_if(pass: bool, detail: String) -> Outcome {
    Outcome { pass: Some(pass), detail }
}

fn tc() -> f64 {
    critical_temperature(1.0).unwrap()
}

fn delta(e: &Ensemble, kind: FieldKind) -> f64 {
    let p = two_point_function(e, kind).unwrap();
    let (lo, hi) = default_fit_range(&p, e.side());
    fit_power_law(&p, lo, hi).unwrap().exponent.estimate
}

fn c1_critical_temperature() -> Outcome {
    let t = tc();
    pass_if(format!("{t:.4}") == "2.2692" && (t - 2.269185314213022).abs() < 1e-12, format!("Tc = {t:.9}"))
}

fn c2_mc_validity() -> Outcome {
    let start = Instant::now();
    let t = 1.5f64;
    let onsager = (1.0 - (2.0 / t).sinh().powi(-4)).powf(0.125);
    let e = sample_ensemble(&IsingModel::default(), 10, t, &McSchedule::with_samples(2000), 101).unwrap();
    let m = average_magnetization(&e).unwrap();
    let secs = start.elapsed().as_secs_f64();
    pass_if((m - onsager).abs() <= 0.02 && secs < 60.0, format!("<|m|> = {m:.4}, Onsager {onsager:.4}, {secs:.1}s"))
}

fn c3_delta_s() -> Outcome {
    let e = sample_ensemble(&IsingModel::default(), 10, tc(), &McSchedule::with_samples(5000), 303).unwrap();
    let d = delta(&e, FieldKind::Spin);
    pass_if((0.10..=0.15).contains(&d), format!("Δ_s = {d:.4} (target [0.10, 0.15])"))
}

fn c4_delta_eps() -> Outcome {
    // The critical chain's magnetization decorrelates slowly; see README.
    let sched = McSchedule { burn_in_sweeps: 1000, thinning_sweeps: 400, n_samples: 10000 };
    let mut parts = Vec::new();
    let mut ok = true;
    for side in [9usize, 10] {
        let e = sample_ensemble(&IsingModel::default(), side, tc(), &sched, 400 + side as u64).unwrap();
        let d = delta(&e, FieldKind::Epsilon);
        ok &= (0.85..=1.20).contains(&d);
        parts.push(format!("L={side}: Δ_ε = {d:.4}"));
    }
    pass_if(ok, format!("{} (target [0.85, 1.20])", parts.join(", ")))
}

fn c5_exact_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut p = RbmParams::random(4, 3, 1.0, &mut rng);
        p.visible_bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        p.hidden_bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        let raw: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let g = exact_kl_and_gradient(&p, &q).unwrap();
        let analytic: Vec<f64> = [g.grad_weights, g.grad_visible_bias, g.grad_hidden_bias].concat();
        let mut numeric = Vec::with_capacity(analytic.len());
        for k in 0..analytic.len() {
            let kl_at = |dx: f64| {
                let mut pp = p.clone();
                let (nw, nv) = (pp.weights.len(), pp.visible_bias.len());
                match k {
                    k if k < nw => pp.weights[k] += dx,
                    k if k < nw + nv => pp.visible_bias[k - nw] += dx,
                    k => pp.hidden_bias[k - nw - nv] += dx,
                }
                exact_kl_and_gradient(&pp, &q).unwrap().divergence
            };
            numeric.push((kl_at(h) - kl_at(-h)) / (2.0 * h));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
    }
    pass_if(worst < 1e-6, format!("worst relative error {worst:.2e} over 100 instances"))
}

fn c6_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_h, mut worst_c) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let mut rbm = RbmParams::random(4, 2, 1.0, &mut rng);
        rbm.visible_bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        rbm.hidden_bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        let h = HamiltonianTable::random(4, 1.0, &mut rng).unwrap();
        let a = rg_hamiltonian_exact(&rbm, &h).unwrap();
        let b = rbm_hidden_hamiltonian(&rbm).unwrap();
        worst_h = a.energies().iter().zip(b.energies()).map(|(x, y)| (x - y).abs()).fold(worst_h, f64::max);
        let rv: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
        let rh: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
        let norm = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let joint = factorized_joint(&ExactDistribution::new(4, norm(rv)).unwrap(), &ExactDistribution::new(2, norm(rh)).unwrap()).unwrap();
        worst_c = joint.connected_correlations().into_iter().map(f64::abs).fold(worst_c, f64::max);
    }
    pass_if(worst_h < 1e-12 && worst_c < 1e-14, format!("max |H_RG − H_RBM| = {worst_h:.1e}, max |<vh>−<v><h>| = {worst_c:.1e}"))
}

fn c7_classifier() -> Outcome {
    let model = IsingModel::default();
    let bins = TempBins::default();
    let sched = McSchedule::with_samples(2000);
    let data = grid_dataset(&grid_ensembles(&model, 10, &bins, &sched, 707).unwrap()).unwrap();
    let cfg = MlpTrainConfig { epochs: 300, seed: 7, ..Default::default() };
    let (params, _) = train_classifier(&data, hidden_size_for(100), bins.len(), &cfg).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, t) in [0.5, 2.3, 5.5].into_iter().enumerate() {
        let e = sample_ensemble(&model, 10, t, &McSchedule::with_samples(1000), derive_seed(7007, k as u64)).unwrap();
        let probs = measure_ensemble(&params, &e).unwrap();
        let got = read_temperature(&probs, &bins, Readout::Argmax).unwrap();
        ok &= (got - t).abs() <= 0.3 + 1e-9;
        // Diagnostics only: the verdict uses the argmax readout.
        let mean = read_temperature(&probs, &bins, Readout::Mean).unwrap();
        let aligned = e.iter().filter(|c| c.values().iter().all(|&v| v == c.values()[0])).count() as f64 / e.len() as f64;
        parts.push(format!("T={t} → {got:.2} (mean readout {mean:.2}, fully aligned {:.0}%)", 100.0 * aligned));
    }
    pass_if(ok, parts.join(", "))
}

fn c8_rg_temperature() -> Outcome {
    let model = IsingModel::default();
    let bins = TempBins::grid(0.0, 0.1, 120).unwrap();
    let big = sample_ensemble(&model, 64, 2.7, &McSchedule::with_samples(300), 808).unwrap();
    let trace = rg_flow(&big, 3, true, 809).unwrap();
    let mut temps = Vec::new();
    for (k, (side, n)) in [(32usize, 300usize), (16, 1000), (8, 2000)].into_iter().enumerate() {
        let ens = grid_ensembles(&model, side, &bins, &McSchedule::with_samples(n), derive_seed(810, k as u64)).unwrap();
        let cfg = MlpTrainConfig { epochs: 20, seed: 811 + k as u64, ..Default::default() };
        let (params, _) = train_classifier(&grid_dataset(&ens).unwrap(), hidden_size_for(side * side), bins.len(), &cfg).unwrap();
        let probs = measure_ensemble(&params, &trace.stages[k + 1]).unwrap();
        temps.push(read_temperature(&probs, &bins, Readout::Argmax).unwrap());
    }
    let increasing = temps.windows(2).all(|w| w[1] > w[0]);
    let growth = temps[0] > 0.0 && temps[1] >= 1.5 * temps[0] && temps[2] >= 1.5 * temps[1];
    pass_if(increasing && growth, format!("layer temperatures {temps:?}"))
}

fn c9_patch() -> Outcome {
    let e = sample_ensemble(&IsingModel::default(), 32, tc(), &McSchedule::with_samples(2000), 909).unwrap();
    let trace = rg_flow(&e, 1, true, 910).unwrap();
    let rg = patch_two_point(&vh_correlator(&trace.stages[0], &trace.stages[1]).unwrap()).unwrap().shells().values();
    let q = rg.len().div_ceil(4);
    let argmax = (0..rg.len()).max_by(|&a, &b| rg[a].total_cmp(&rg[b])).unwrap();
    let a = argmax == 0 && shape::is_non_increasing(&rg[..q]);

    let cb = |b: usize| patch_two_point(&synthetic_map(SyntheticKind::Checkerboard, 32, b, 0).unwrap()).unwrap().shells().values();
    let (p4, p8) = (shape::interior_peaks(&cb(4)), shape::interior_peaks(&cb(8)));
    let v16 = cb(16);
    let b = !p4.is_empty() && !p8.is_empty() && shape::interior_peaks(&v16).is_empty() && shape::is_non_increasing(&v16[..15]);

    let mut worst = 0.0f64;
    for seed in 0..5 {
        let p = patch_two_point(&synthetic_map(SyntheticKind::WhiteNoise, 32, 1, 920 + seed).unwrap()).unwrap();
        worst = worst.max(shape::spearman(&p.distances(), &p.values()).abs());
    }
    let c = worst < 0.3;
    pass_if(
        a && b && c,
        format!("(a) argmax shell {argmax}, first quarter non-increasing {a}; (b) peaks block4 {} block8 {} block16 none {b}; (c) max |ρ| {worst:.3}", p4.len(), p8.len()),
    )
}

fn c10_flow() -> Outcome {
    // Flow invariants on a trained RBM.
    let e = sample_ensemble(&IsingModel::default(), 6, tc(), &McSchedule::with_samples(200), 1001).unwrap();
    let cfg = CdConfig { iterations: 100, batch_size: Some(50), seed: 1002, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let (rbm, _) = train(&RbmParams::random(36, 25, 0.01, &mut rng), &e, &cfg).unwrap();
    let a = generate_flow(&rbm, &e, 26, Propagation::Expectation, 1004).unwrap();
    let b = generate_flow(&rbm, &e, 26, Propagation::Expectation, 1004).unwrap();
    let lengths = a.stages.len() == 27 && a.stages.iter().all(|s| s.len() == e.len() && s.side() == 6);
    let range = a.stages[1..].iter().all(|s| s.iter().all(|c| c.values().iter().all(|x| x.abs() < 1.0)));
    let invariants = lengths && range && a == b;
    let inv = format!("flow invariants: lengths {lengths}, range (−1,1) {range}, deterministic {}", a == b);

    if std::env::var("RGLAB_PAPER_SCALE").as_deref() != Ok("1") {
        return Outcome { pass: if invariants { None } else { Some(false) }, detail: format!("{inv}; Δ_m run needs RGLAB_PAPER_SCALE=1") };
    }
    let dir = std::env::temp_dir().join("rglab-acceptance-fig-scaling-dm");
    let spec = ExperimentSpec::builtin("fig-scaling-dm", Scale::Paper).unwrap();
    let report = run_experiment(&spec, Some(&dir)).unwrap();
    let text = std::fs::read_to_string(report.dir.join("dm-vs-flow.csv")).unwrap();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect();
    let (dm, a_tc) = (last[2], last[6]);
    let ok = (0.105..=0.145).contains(&dm) && (0.90..=0.99).contains(&a_tc);
    pass_if(invariants && ok, format!("{inv}; flow length 26: Δ_m = {dm:.4}, A/Tc = {a_tc:.4}"))
}

fn csv_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            csv_files(&p, out);
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
}

fn c11_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut mismatches = Vec::new();
    let mut all_skipped = true;
    for name in BUILTINS {
        let spec = ExperimentSpec::builtin(name, Scale::Quick).unwrap();
        let (a, b) = (root.path().join("a").join(name), root.path().join("b").join(name));
        run_experiment(&spec, Some(&a)).unwrap();
        run_experiment(&spec, Some(&b)).unwrap();
        let again = run_experiment(&spec, Some(&a)).unwrap();
        all_skipped &= again.stages.iter().all(|(_, s)| *s == StageStatus::Skipped);
        let mut files = Vec::new();
        csv_files(&a, &mut files);
        for f in files {
            let twin = b.join(f.strip_prefix(&a).unwrap());
            compared += 1;
            if std::fs::read(&f).ok() != std::fs::read(&twin).ok() {
                mismatches.push(twin.display().to_string());
            }
        }
    }
    pass_if(mismatches.is_empty() && all_skipped && compared > 0, format!("{compared} CSV files compared across {} built-ins, {} differ, re-runs skipped every stage: {all_skipped}", BUILTINS.len(), mismatches.len()))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "critical temperature", c1_critical_temperature),
        (2, "MC validity vs Onsager", c2_mc_validity),
        (3, "Δ_s at Tc", c3_delta_s),
        (4, "Δ_ε at Tc", c4_delta_eps),
        (5, "exact KL gradient vs finite differences", c5_exact_gradient),
        (6, "variational-RG identity", c6_identity),
        (7, "classifier sanity", c7_classifier),
        (8, "RG temperature growth", c8_rg_temperature),
        (9, "patch correlator signatures", c9_patch),
        (10, "RBM-flow Δ_m", c10_flow),
        (11, "pipeline determinism", c11_determinism),
    ];
    let only: Option<Vec<u32>> = std::env::var("RGLAB_ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let word = match o.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!("criterion {n:>2} {word} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if o.pass == Some(false) && !KNOWN_FAILURES.contains(&n) {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
