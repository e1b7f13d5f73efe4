use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rglab::experiment::{run_experiment, sha256_hex, ExperimentSpec, Scale, StageStatus, MANIFEST_FILE};

fn files(dir: &Path, root: &Path, out: &mut BTreeSet<String>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files(&p, root, out);
        } else {
            out.insert(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
        }
    }
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    for name in ["fig-vh-maps", "fig-temp-layers", "fig-eps"] {
        let d = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::builtin(name, Scale::Quick).unwrap();
        let report = run_experiment(&spec, Some(d.path())).unwrap();
        let mut on_disk = BTreeSet::new();
        files(d.path(), d.path(), &mut on_disk);
        on_disk.remove(MANIFEST_FILE);
        let listed: BTreeSet<String> = report.manifest.stages.iter().flat_map(|s| s.artifacts.iter().map(|a| a.path.clone())).collect();
        assert_eq!(on_disk, listed, "{name}");
        for a in report.manifest.stages.iter().flat_map(|s| &s.artifacts) {
            assert_eq!(sha256_hex(&fs::read(d.path().join(&a.path)).unwrap()), a.sha256);
        }
    }
}

#[test]
fn edited_artifact_reruns_its_stage_and_dependents() {
    let d = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::builtin("fig-vh-maps", Scale::Quick).unwrap();
    run_experiment(&spec, Some(d.path())).unwrap();
    fs::write(d.path().join("data/rg-1.isng"), b"corrupt").unwrap();
    let r = run_experiment(&spec, Some(d.path())).unwrap();
    let status = |s: &str| r.stages.iter().find(|(n, _)| n == s).unwrap().1;
    assert_eq!(status("mc"), StageStatus::Skipped);
    assert_eq!(status("rg"), StageStatus::Ran);
    assert_eq!(status("rbm-stack"), StageStatus::Skipped);
    assert_eq!(fs::read(d.path().join("data/rg-1.isng")).unwrap()[..4], *b"ISNG");
}

#[test]
fn changed_parameter_invalidates_downstream() {
    let d = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::builtin("fig-vh-maps", Scale::Quick).unwrap();
    run_experiment(&spec, Some(d.path())).unwrap();
    spec.cd_iterations += 1;
    let r = run_experiment(&spec, Some(d.path())).unwrap();
    let ran: Vec<&str> = r.stages.iter().filter(|(_, s)| *s == StageStatus::Ran).map(|(n, _)| n.as_str()).collect();
    assert_eq!(ran, ["rbm-stack", "vh"]);
}

#[test]
fn stage_failure_names_the_stage() {
    let d = tempfile::tempdir().unwrap();
    // A plain file where the data directory should go.
    fs::write(d.path().join("data"), b"").unwrap();
    let spec = ExperimentSpec::builtin("fig-vh-maps", Scale::Quick).unwrap();
    let err = run_experiment(&spec, Some(d.path())).unwrap_err().to_string();
    assert!(err.contains("mc"), "{err}");
}

#[test]
fn invalid_spec_is_rejected_before_running() {
    let d = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::builtin("fig-temp-layers", Scale::Quick).unwrap();
    spec.layer_sizes[1] = 65;
    assert!(run_experiment(&spec, Some(d.path())).is_err());
    assert!(!d.path().join(MANIFEST_FILE).exists());
    let mut spec = ExperimentSpec::builtin("theory-checks", Scale::Quick).unwrap();
    spec.theory_visible = 0;
    assert!(spec.validate().is_err());
}
