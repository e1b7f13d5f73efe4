//! Declarative experiment pipelines. Each built-in regenerates the CSV data
//! behind one figure: stages persist their outputs under the experiment
//! directory and are skipped on re-runs whose parameters and inputs hash the
//! same as the recorded ones.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::classifier::{
    argmax, grid_dataset, grid_ensembles, hidden_size_for, measure_ensemble, read_temperature, train_classifier, MlpTrainConfig, Readout,
    TempBins,
};
use crate::error::{Error, Result};
use crate::flow::{binarize_rows, flow_step_batch};
use crate::io::{decode_dataset, decode_mlp, decode_rbm, encode_dataset, encode_mlp, encode_rbm, write_atomic, MlpCheckpoint, RbmCheckpoint};
use crate::ising::{critical_temperature, sample_ensemble, IsingModel, McSchedule};
use crate::lattice::{derive_seed, Ensemble, Matrix, Provenance, SpinConfig, SpinKind};
use crate::observables::{
    default_fit_range, fit_magnetization, fit_power_law, patch_two_point, synthetic_map, two_point_function, vh_correlator_matrix,
    CorrelationProfile, FieldKind, PowerLawFit, ProfileEntry, SyntheticKind,
};
use crate::rbm::exact::{empirical_distribution, exact_kl_and_gradient, negative_free_energy};
use crate::rbm::{stack_train_matrix, train, train_matrix, CdConfig, Propagation, RbmParams, INIT_SCALE};
use crate::rg::rg_flow;
use crate::theory::{factorized_joint, rbm_hidden_hamiltonian, rbm_joint, rg_hamiltonian_exact, exactness_defect, ExactDistribution, HamiltonianTable};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Environment variable naming the default root for experiment outputs.
pub const OUTPUT_ROOT_ENV: &str = "RGLAB_OUT";

pub const BUILTINS: [&str; 7] = ["fig-scaling-dm", "fig-vh-maps", "fig-temp-layers", "fig-ds-flow", "fig-eps", "fig-48", "theory-checks"];

// Seed streams, combined with the spec seed through `derive_seed`.
const MC_STREAM: u64 = 1;
const CLASSIFIER_STREAM: u64 = 2;
const RBM_STREAM: u64 = 3;
const FLOW_INPUT_STREAM: u64 = 4;
const FLOW_STREAM: u64 = 5;
const BINARIZE_STREAM: u64 = 6;
const SCAN_STREAM: u64 = 7;
const RG_STREAM: u64 = 8;
const SYNTHETIC_STREAM: u64 = 9;
const THEORY_STREAM: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Seconds; exercises every stage with toy sizes.
    Quick,
    #[default]
    Desk,
    /// Full-size sample counts and iteration budgets.
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Scale::Quick),
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::Config(format!("unknown scale `{s}` (quick, desk, paper)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// RBM flows, classifier selection at the target temperatures, Δ_m per flow length.
    FlowMagnetization,
    /// The same flows with Δ_s per flow length, plus Δ_s of the MC grid versus T.
    FlowSpin,
    /// The same flows with Δ_ε per flow length, plus Δ_ε of fresh MC data versus T and size.
    FlowEpsilon,
    /// ⟨v h⟩ maps and patch correlators for RG steps and a stacked RBM.
    VhMaps,
    /// Classifier-measured temperature of each RG step and stacked-RBM layer.
    TempLayers,
    /// Enumeration checks of the variational-RG identities.
    Theory,
}

/// Every hyperparameter of every pipeline, in one flat table. A pipeline
/// reads the fields it needs and ignores the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub pipeline: Pipeline,
    pub scale: Scale,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,

    pub side: usize,
    pub temperature: f64,
    pub samples: usize,
    pub burn_in: usize,
    pub thinning: usize,

    pub bin_start: f64,
    pub bin_step: f64,
    pub bin_count: usize,

    pub classifier_epochs: usize,
    pub classifier_learning_rate: f64,
    /// 0 selects full-batch gradient descent.
    pub classifier_batch: usize,
    pub validation_fraction: f64,
    /// Samples per temperature for each per-layer classifier.
    pub classifier_samples: Vec<usize>,

    /// Visible size first; one RBM per consecutive pair.
    pub layer_sizes: Vec<usize>,
    pub cd_iterations: usize,
    pub cd_learning_rate: f64,
    /// 0 selects the whole dataset per update.
    pub cd_batch: usize,
    pub cd_steps: usize,
    pub propagation: Propagation,

    pub flow_length: usize,
    /// Held-out MC configs per grid temperature used as flow inputs.
    pub flow_inputs: usize,
    pub flow_targets: Vec<f64>,

    pub rg_steps: usize,
    pub binarize: bool,

    pub scan_sides: Vec<usize>,
    pub scan_temperatures: Vec<f64>,
    pub scan_samples: usize,
    pub scan_thinning: usize,

    pub checkerboard_blocks: Vec<usize>,

    pub instances: usize,
    pub theory_visible: usize,
    pub theory_hidden: usize,
}

fn tc() -> f64 {
    critical_temperature(1.0).expect("unit coupling is valid")
}

fn grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| ((start + step * k as f64) * 1e9).round() / 1e9).collect()
}

impl ExperimentSpec {
    fn base(name: &str, pipeline: Pipeline, scale: Scale) -> Self {
        Self {
            name: name.to_string(),
            pipeline,
            scale,
            seed: 2024,
            output: None,
            side: 10,
            temperature: tc(),
            samples: 2000,
            burn_in: 1000,
            thinning: 10,
            bin_start: 0.0,
            bin_step: 0.1,
            bin_count: 60,
            classifier_epochs: 300,
            classifier_learning_rate: 0.1,
            classifier_batch: 32,
            validation_fraction: 0.4,
            classifier_samples: Vec::new(),
            layer_sizes: vec![100, 81],
            cd_iterations: 500,
            cd_learning_rate: 0.01,
            cd_batch: 100,
            cd_steps: 1,
            propagation: Propagation::Expectation,
            flow_length: 26,
            flow_inputs: 100,
            flow_targets: vec![2.1, 2.2, 2.3],
            rg_steps: 0,
            binarize: true,
            scan_sides: Vec::new(),
            scan_temperatures: Vec::new(),
            scan_samples: 0,
            scan_thinning: 10,
            checkerboard_blocks: Vec::new(),
            instances: 0,
            theory_visible: 4,
            theory_hidden: 2,
        }
    }

    /// Preset for a built-in experiment at the given scale.
    pub fn builtin(name: &str, scale: Scale) -> Result<Self> {
        use Scale::*;
        let pipeline = match name {
            "fig-scaling-dm" => Pipeline::FlowMagnetization,
            "fig-ds-flow" => Pipeline::FlowSpin,
            "fig-eps" => Pipeline::FlowEpsilon,
            "fig-vh-maps" | "fig-48" => Pipeline::VhMaps,
            "fig-temp-layers" => Pipeline::TempLayers,
            "theory-checks" => Pipeline::Theory,
            _ => return Err(Error::Config(format!("unknown built-in experiment `{name}`; known: {}", BUILTINS.join(", ")))),
        };
        let mut s = Self::base(name, pipeline, scale);
        match pipeline {
            Pipeline::FlowMagnetization | Pipeline::FlowSpin | Pipeline::FlowEpsilon => {
                match pipeline {
                    Pipeline::FlowSpin => {
                        s.flow_targets = vec![2.2, 2.3];
                        s.scan_temperatures = grid(1.5, 0.1, 21);
                    }
                    Pipeline::FlowEpsilon => {
                        s.flow_targets = vec![2.2, 2.3, 2.4];
                        s.scan_sides = vec![9, 10];
                        let mut ts = grid(1.9, 0.1, 9);
                        ts.push(tc());
                        ts.sort_by(f64::total_cmp);
                        s.scan_temperatures = ts;
                        s.scan_samples = 10000;
                        s.scan_thinning = 400;
                    }
                    _ => {}
                }
                match scale {
                    Quick => {
                        s.samples = 40;
                        s.burn_in = 200;
                        s.thinning = 2;
                        s.classifier_epochs = 2;
                        s.cd_iterations = 20;
                        s.flow_length = 3;
                        s.flow_inputs = 4;
                        s.scan_samples = s.scan_samples.min(100);
                        s.scan_thinning = 2;
                        if pipeline == Pipeline::FlowEpsilon {
                            s.scan_temperatures = vec![2.0, tc(), 2.6];
                        }
                    }
                    Desk => {}
                    Paper => {
                        s.samples = 20000;
                        s.classifier_epochs = 3000;
                        s.cd_iterations = 10000;
                        s.cd_batch = 1000;
                        s.flow_inputs = 1000;
                    }
                }
            }
            Pipeline::VhMaps => {
                let fig48 = name == "fig-48";
                s.temperature = tc();
                s.side = if fig48 { 48 } else { 32 };
                s.rg_steps = if fig48 { 1 } else { 2 };
                s.layer_sizes = if fig48 { vec![2304, 576] } else { vec![1024, 256, 64] };
                s.checkerboard_blocks = if fig48 { Vec::new() } else { vec![4, 8, 16] };
                s.cd_iterations = if fig48 { 200 } else { 500 };
                match scale {
                    Quick => {
                        s.side = if fig48 { 8 } else { 16 };
                        s.layer_sizes = if fig48 { vec![64, 16] } else { vec![256, 64, 16] };
                        s.checkerboard_blocks = if fig48 { Vec::new() } else { vec![2, 4, 8] };
                        s.samples = 30;
                        s.burn_in = 100;
                        s.thinning = 2;
                        s.cd_iterations = 5;
                    }
                    Desk => {}
                    Paper => {
                        s.samples = if fig48 { 40000 } else { 20000 };
                        s.cd_iterations = 10000;
                        s.cd_batch = 1000;
                    }
                }
            }
            Pipeline::TempLayers => {
                s.side = 64;
                s.temperature = 2.7;
                s.samples = 300;
                s.rg_steps = 3;
                s.layer_sizes = vec![4096, 1024, 256, 64];
                s.cd_iterations = 100;
                s.cd_batch = 50;
                s.bin_count = 120;
                s.classifier_samples = vec![300, 1000, 2000];
                s.classifier_epochs = 20;
                match scale {
                    Quick => {
                        s.side = 16;
                        s.layer_sizes = vec![256, 64, 16, 4];
                        s.samples = 20;
                        s.burn_in = 100;
                        s.thinning = 2;
                        s.classifier_samples = vec![10, 10, 10];
                        s.classifier_epochs = 2;
                        s.cd_iterations = 5;
                        s.cd_batch = 10;
                    }
                    Desk => {}
                    Paper => {
                        s.samples = 2000;
                        s.classifier_samples = vec![20000; 3];
                        s.classifier_epochs = 3000;
                        s.cd_iterations = 10000;
                        s.cd_batch = 1000;
                    }
                }
            }
            Pipeline::Theory => {
                s.side = 2;
                s.temperature = tc();
                s.instances = 50;
                s.layer_sizes = vec![4, 2];
                s.cd_iterations = 2000;
                s.cd_learning_rate = 0.05;
                s.cd_batch = 0;
                if scale == Quick {
                    s.instances = 5;
                    s.samples = 200;
                    s.burn_in = 100;
                    s.cd_iterations = 50;
                }
            }
        }
        Ok(s)
    }

    /// Reads a flat TOML spec. `base` names a built-in preset (otherwise the
    /// first built-in of `pipeline` is used), `scale` defaults to desk, `seed`
    /// is mandatory, and every other key overrides the preset.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let scale = match table.get("scale") {
            Some(v) => v.as_str().ok_or_else(|| Error::Config("`scale` must be a string".into()))?.parse()?,
            None => Scale::Desk,
        };
        let base = match table.remove("base") {
            Some(v) => v.as_str().ok_or_else(|| Error::Config("`base` must be a string".into()))?.to_string(),
            None => {
                let p = table.get("pipeline").ok_or_else(|| Error::Config("spec needs `base` or `pipeline`".into()))?;
                let p: Pipeline = p.clone().try_into().map_err(|e: toml::de::Error| Error::Config(format!("pipeline: {e}")))?;
                BUILTINS
                    .iter()
                    .find(|b| Self::builtin(b, scale).map(|s| s.pipeline == p).unwrap_or(false))
                    .expect("every pipeline has a built-in")
                    .to_string()
            }
        };
        if !table.contains_key("seed") {
            return Err(Error::Config("spec must set `seed`".into()));
        }
        let preset = Self::builtin(&base, scale)?;
        let mut merged = toml::Table::try_from(&preset).map_err(|e| Error::Config(e.to_string()))?;
        merged.extend(table);
        let spec: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec fields are TOML-representable")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("{}: {msg}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return fail("name must be a non-empty path segment".into());
        }
        if self.side < 2 || self.samples == 0 || self.burn_in == 0 || self.thinning == 0 {
            return fail("side >= 2 and positive samples, burn-in and thinning are required".into());
        }
        if !(self.temperature > 0.0) {
            return fail(format!("temperature must be positive, got {}", self.temperature));
        }
        match self.pipeline {
            Pipeline::FlowMagnetization | Pipeline::FlowSpin | Pipeline::FlowEpsilon => {
                if self.layer_sizes.len() != 2 || self.layer_sizes[0] != self.side * self.side {
                    return fail(format!("flow pipelines need layer_sizes = [{}, hidden]", self.side * self.side));
                }
                let bins = self.bins()?;
                for t in self.flow_targets.iter().chain(if self.pipeline == Pipeline::FlowSpin { &self.scan_temperatures[..] } else { &[] }) {
                    bins.index_of(*t).map_err(|_| Error::Config(format!("{}: {t} is not a bin temperature", self.name)))?;
                }
                if self.flow_inputs == 0 {
                    return fail("flow_inputs must be positive".into());
                }
                if self.pipeline == Pipeline::FlowEpsilon && (self.scan_samples == 0 || self.scan_thinning == 0) {
                    return fail("scan_samples and scan_thinning must be positive".into());
                }
            }
            Pipeline::VhMaps | Pipeline::TempLayers => {
                if !self.side.is_multiple_of(1usize << self.rg_steps) {
                    return fail(format!("side {} is not divisible by 2^{}", self.side, self.rg_steps));
                }
                if self.layer_sizes.first() != Some(&(self.side * self.side)) {
                    return fail(format!("layer_sizes must start with {}", self.side * self.side));
                }
                if self.pipeline == Pipeline::TempLayers {
                    if self.layer_sizes.len() != self.rg_steps + 1 || self.classifier_samples.len() != self.rg_steps {
                        return fail("temp-layers needs one RBM layer and one classifier sample count per RG step".into());
                    }
                    for (k, &n) in self.layer_sizes.iter().enumerate().skip(1) {
                        let side = self.side >> k;
                        if n != side * side {
                            return fail(format!("layer {k} must have {} units to match the RG step", side * side));
                        }
                    }
                    self.bins()?;
                }
            }
            Pipeline::Theory => {
                if self.layer_sizes.len() != 2 || self.layer_sizes[0] != self.side * self.side {
                    return fail(format!("theory-checks trains one RBM with layer_sizes = [{}, hidden]", self.side * self.side));
                }
                if self.theory_visible == 0 || self.theory_hidden == 0 {
                    return fail("theory instances need at least one visible and one hidden unit".into());
                }
                if self.theory_visible + self.theory_hidden > crate::theory::MAX_THEORY_UNITS {
                    return fail("theory instances exceed the enumeration limit".into());
                }
            }
        }
        Ok(())
    }

    pub fn bins(&self) -> Result<TempBins> {
        TempBins::grid(self.bin_start, self.bin_step, self.bin_count)
    }

    pub fn schedule(&self) -> McSchedule {
        McSchedule { burn_in_sweeps: self.burn_in, thinning_sweeps: self.thinning, n_samples: self.samples }
    }

    fn cd_config(&self, stream: u64) -> CdConfig {
        CdConfig {
            learning_rate: self.cd_learning_rate,
            iterations: self.cd_iterations,
            cd_steps: self.cd_steps,
            batch_size: (self.cd_batch > 0).then_some(self.cd_batch),
            propagation: self.propagation,
            seed: derive_seed(self.seed, stream),
        }
    }

    fn mlp_config(&self, stream: u64) -> MlpTrainConfig {
        MlpTrainConfig {
            learning_rate: self.classifier_learning_rate,
            epochs: self.classifier_epochs,
            validation_fraction: self.validation_fraction,
            batch_size: (self.classifier_batch > 0).then_some(self.classifier_batch),
            seed: derive_seed(self.seed, stream),
        }
    }

    /// `output`, else `$RGLAB_OUT/<name>`, else `rglab-out/<name>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(o) = &self.output {
            return o.clone();
        }
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.name),
            _ => PathBuf::from("rglab-out").join(&self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// Hash of the stage's parameters and its dependencies' keys.
    pub key: String,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub pipeline: Pipeline,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub stages: Vec<(String, StageStatus)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Collects a running stage's files.
struct Outputs {
    dir: PathBuf,
    records: Vec<ArtifactRecord>,
}

impl Outputs {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write_atomic(&path, bytes)?;
        self.records.push(ArtifactRecord { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    fn csv(&mut self, rel: &str, text: &str) -> Result<()> {
        self.write(rel, text.as_bytes())
    }
}

struct Runner {
    dir: PathBuf,
    previous: BTreeMap<String, StageRecord>,
    keys: BTreeMap<String, String>,
    manifest: Manifest,
    statuses: Vec<(String, StageStatus)>,
}

impl Runner {
    fn open(spec: &ExperimentSpec, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        // An unreadable manifest only means nothing can be skipped.
        let previous = fs::read(dir.join(MANIFEST_FILE))
            .ok()
            .and_then(|b| serde_json::from_slice::<Manifest>(&b).ok())
            .map(|m| m.stages.into_iter().map(|s| (s.stage.clone(), s)).collect())
            .unwrap_or_default();
        Ok(Self {
            dir: dir.to_path_buf(),
            previous,
            keys: BTreeMap::new(),
            manifest: Manifest { experiment: spec.name.clone(), pipeline: spec.pipeline, stages: Vec::new() },
            statuses: Vec::new(),
        })
    }

    fn intact(&self, record: &StageRecord) -> bool {
        record.artifacts.iter().all(|a| fs::read(self.dir.join(&a.path)).map(|b| sha256_hex(&b) == a.sha256).unwrap_or(false))
    }

    fn stage<F>(&mut self, name: &str, deps: &[&str], params: serde_json::Value, run: F) -> Result<()>
    where
        F: FnOnce(&Runner, &mut Outputs) -> Result<()>,
    {
        let mut dep_keys = Vec::with_capacity(deps.len());
        for d in deps {
            let k = self.keys.get(*d).ok_or_else(|| Error::Config(format!("stage `{name}` depends on `{d}`, which has not run")))?;
            dep_keys.push(k.clone());
        }
        let material = serde_json::to_vec(&json!({ "stage": name, "params": params, "deps": dep_keys })).expect("JSON values serialize");
        let key = sha256_hex(&material);
        let record = match self.previous.get(name) {
            Some(prev) if prev.key == key && self.intact(prev) => {
                self.statuses.push((name.to_string(), StageStatus::Skipped));
                prev.clone()
            }
            _ => {
                let mut out = Outputs { dir: self.dir.clone(), records: Vec::new() };
                run(self, &mut out).map_err(|e| Error::Stage { stage: name.to_string(), source: Box::new(e) })?;
                self.statuses.push((name.to_string(), StageStatus::Ran));
                StageRecord { stage: name.to_string(), key: key.clone(), artifacts: out.records }
            }
        };
        self.keys.insert(name.to_string(), key);
        self.manifest.stages.push(record);
        let json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(&self.dir.join(MANIFEST_FILE), &json)
    }

    fn read(&self, rel: &str) -> Result<Vec<u8>> {
        let path = self.dir.join(rel);
        if !path.is_file() {
            return Err(Error::Config(format!("missing artifact {}", path.display())));
        }
        Ok(fs::read(path)?)
    }

    fn dataset(&self, rel: &str, provenance: Provenance) -> Result<Ensemble> {
        decode_dataset(&self.read(rel)?, provenance)
    }

    fn text(&self, rel: &str) -> Result<String> {
        String::from_utf8(self.read(rel)?).map_err(|_| Error::Format(format!("{rel} is not UTF-8")))
    }
}

/// Runs every stage of `spec` in `dir` (default [`ExperimentSpec::output_dir`]).
pub fn run_experiment(spec: &ExperimentSpec, dir: Option<&Path>) -> Result<RunReport> {
    spec.validate()?;
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| spec.output_dir());
    let mut r = Runner::open(spec, &dir)?;
    match spec.pipeline {
        Pipeline::FlowMagnetization | Pipeline::FlowSpin | Pipeline::FlowEpsilon => flow_study(&mut r, spec)?,
        Pipeline::VhMaps => vh_maps(&mut r, spec)?,
        Pipeline::TempLayers => temp_layers(&mut r, spec)?,
        Pipeline::Theory => theory_checks(&mut r, spec)?,
    }
    Ok(RunReport { dir, manifest: r.manifest, stages: r.statuses })
}

fn stack_ensembles(ensembles: &[Ensemble]) -> Matrix {
    let cols = ensembles.first().map_or(0, Ensemble::sites);
    let mut data = Vec::new();
    for e in ensembles {
        data.extend(e.iter().flat_map(|c| c.values().iter().copied()));
    }
    Matrix::from_vec(data.len() / cols.max(1), cols, data)
}

fn fmt_fit(fit: &Result<PowerLawFit>) -> String {
    match fit {
        Ok(f) => {
            let (a, d) = (&f.amplitude, &f.exponent);
            format!("{},{},{},{},{},{},{},{}", d.estimate, d.standard_error, d.ci_low, d.ci_high, a.estimate, a.standard_error, a.ci_low, a.ci_high)
        }
        Err(_) => ["NaN"; 8].join(","),
    }
}

const FIT_COLUMNS: &str = "delta,delta_se,delta_ci_low,delta_ci_high,amplitude,amplitude_se,amplitude_ci_low,amplitude_ci_high";

fn fit_profile(profile: &CorrelationProfile, side: usize) -> Result<PowerLawFit> {
    let (lo, hi) = default_fit_range(profile, side);
    fit_power_law(profile, lo, hi)
}

/// Data rows of a CSV written by this module, split on commas.
fn csv_rows(text: &str) -> Vec<Vec<&str>> {
    text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect()
}

fn parse<T: std::str::FromStr>(field: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Format(format!("bad CSV field `{field}`")))
}

fn field_name(f: FieldKind) -> &'static str {
    match f {
        FieldKind::Spin => "spin",
        FieldKind::Epsilon => "epsilon",
    }
}

fn flow_study(r: &mut Runner, s: &ExperimentSpec) -> Result<()> {
    let bins = s.bins()?;
    let model = IsingModel::default();
    let grid_files: Vec<String> = (0..bins.len()).map(|b| format!("data/grid-{b:03}.isng")).collect();
    let input_files: Vec<String> = (0..bins.len()).map(|b| format!("data/flow-input-{b:03}.isng")).collect();
    let load = |r: &Runner, files: &[String]| -> Result<Vec<Ensemble>> {
        files.iter().map(|f| r.dataset(f, Provenance::MonteCarlo)).collect()
    };

    let sched = s.schedule();
    r.stage("mc-grid", &[], json!({ "side": s.side, "bins": bins, "schedule": sched, "seed": s.seed }), |_, out| {
        for (f, e) in grid_files.iter().zip(grid_ensembles(&model, s.side, &bins, &sched, derive_seed(s.seed, MC_STREAM))?) {
            out.write(f, &encode_dataset(&e)?)?;
        }
        Ok(())
    })?;

    let mlp_cfg = s.mlp_config(CLASSIFIER_STREAM);
    r.stage("classifier", &["mc-grid"], json!({ "config": mlp_cfg }), |r, out| {
        let data = grid_dataset(&load(r, &grid_files)?)?;
        let (params, curves) = train_classifier(&data, hidden_size_for(s.side * s.side), bins.len(), &mlp_cfg)?;
        out.write("classifier.mlp", &encode_mlp(&MlpCheckpoint { params, bins: bins.clone() }))?;
        out.csv("classifier-curves.csv", &curves.to_csv())
    })?;

    let cd = s.cd_config(RBM_STREAM);
    r.stage("rbm", &["mc-grid"], json!({ "layers": s.layer_sizes, "config": cd }), |r, out| {
        let data = stack_ensembles(&load(r, &grid_files)?);
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, RBM_STREAM + 1000));
        let init = RbmParams::random(s.layer_sizes[0], s.layer_sizes[1], INIT_SCALE, &mut init_rng);
        let (params, stats) = train_matrix(&init, &data, &cd)?;
        out.write("rbm.rbm", &encode_rbm(&RbmCheckpoint { params, propagation: cd.propagation, seed: cd.seed }))?;
        let mut csv = String::from("iteration,reconstruction_error,gradient_norm\n");
        for (k, (e, g)) in stats.reconstruction_error.iter().zip(&stats.gradient_norm).enumerate() {
            let _ = writeln!(csv, "{},{e},{g}", k + 1);
        }
        out.csv("rbm-training.csv", &csv)
    })?;

    let input_sched = McSchedule { n_samples: s.flow_inputs, ..sched };
    r.stage("flow-inputs", &[], json!({ "side": s.side, "bins": bins, "schedule": input_sched, "seed": s.seed }), |_, out| {
        for (f, e) in input_files.iter().zip(grid_ensembles(&model, s.side, &bins, &input_sched, derive_seed(s.seed, FLOW_INPUT_STREAM))?) {
            out.write(f, &encode_dataset(&e)?)?;
        }
        Ok(())
    })?;

    let fields: Vec<FieldKind> = match s.pipeline {
        Pipeline::FlowSpin => vec![FieldKind::Spin],
        Pipeline::FlowEpsilon => vec![FieldKind::Epsilon],
        _ => Vec::new(),
    };
    let flow_params = json!({ "length": s.flow_length, "targets": s.flow_targets, "fields": fields, "seed": s.seed });
    r.stage("flow-measure", &["classifier", "rbm", "flow-inputs"], flow_params, |r, out| {
        let mlp = decode_mlp(&r.read("classifier.mlp")?)?;
        let rbm = decode_rbm(&r.read("rbm.rbm")?)?;
        let inputs = load(r, &input_files)?;
        let targets: Vec<usize> = s.flow_targets.iter().map(|t| bins.index_of(*t)).collect::<Result<_>>()?;
        let mut states: Vec<Matrix> = inputs.iter().map(Ensemble::to_matrix).collect();
        let mut rngs: Vec<ChaCha8Rng> = (0..states.len()).map(|b| ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(s.seed, FLOW_STREAM), b as u64))).collect();
        let mut bin_rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, BINARIZE_STREAM));
        let mut hist = String::from("stage,T,fraction\n");
        let mut mags = String::from("stage,T,count,m\n");
        let mut profiles = String::from("stage,T,field,r,C,count\n");
        for k in 0..=s.flow_length {
            if k > 0 {
                for (m, rng) in states.iter_mut().zip(&mut rngs) {
                    *m = flow_step_batch(&rbm.params, m, rbm.propagation, rng)?;
                }
            }
            let mut counts = vec![0usize; bins.len()];
            let mut selected: Vec<Vec<SpinConfig>> = vec![Vec::new(); targets.len()];
            for m in &states {
                let probs = mlp.params.forward_batch(&binarize_rows(m, &mut bin_rng))?;
                for row in 0..m.rows() {
                    let b = argmax(probs.row(row));
                    counts[b] += 1;
                    if let Some(t) = targets.iter().position(|&x| x == b) {
                        selected[t].push(SpinConfig::new(s.side, m.row(row).to_vec(), SpinKind::Real)?);
                    }
                }
            }
            let total: usize = counts.iter().sum();
            for (b, c) in counts.iter().enumerate() {
                let _ = writeln!(hist, "{k},{},{}", bins.temperature(b), *c as f64 / total as f64);
            }
            for (t, configs) in targets.iter().zip(selected) {
                let temp = bins.temperature(*t);
                let n = configs.len();
                let m = if n == 0 { f64::NAN } else { configs.iter().map(|c| crate::ising::magnetization(c).abs()).sum::<f64>() / n as f64 };
                let _ = writeln!(mags, "{k},{temp},{n},{m}");
                if n == 0 || fields.is_empty() {
                    continue;
                }
                let ens = Ensemble::new(configs, temp, Provenance::RbmFlow(k as u32), s.seed)?;
                for f in &fields {
                    for e in two_point_function(&ens, *f)?.entries {
                        let _ = writeln!(profiles, "{k},{temp},{},{},{},{}", field_name(*f), e.distance, e.value, e.pair_count);
                    }
                }
            }
        }
        out.csv("flow-histogram.csv", &hist)?;
        out.csv("flow-magnetization.csv", &mags)?;
        if !fields.is_empty() {
            out.csv("flow-profiles.csv", &profiles)?;
        }
        Ok(())
    })?;

    match s.pipeline {
        Pipeline::FlowMagnetization => r.stage("fit", &["flow-measure"], json!({ "tc": tc() }), |r, out| {
            let text = r.text("flow-magnetization.csv")?;
            let mut by_stage: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
            for row in csv_rows(&text) {
                let (k, t, n, m): (usize, f64, usize, f64) = (parse(row[0])?, parse(row[1])?, parse(row[2])?, parse(row[3])?);
                let points = by_stage.entry(k).or_default();
                if n > 0 {
                    points.push((t, m));
                }
            }
            let mut csv = format!("stage,points,{FIT_COLUMNS}\n");
            for (k, points) in by_stage {
                let _ = writeln!(csv, "{k},{},{}", points.len(), fmt_fit(&fit_magnetization(&points, tc())));
            }
            out.csv("dm-vs-flow.csv", &csv)
        }),
        _ => {
            r.stage("fit", &["flow-measure"], json!({ "side": s.side }), |r, out| {
                let text = r.text("flow-profiles.csv")?;
                let mut groups: BTreeMap<(usize, String, String), CorrelationProfile> = BTreeMap::new();
                for row in csv_rows(&text) {
                    let entry = ProfileEntry { distance: parse(row[3])?, value: parse(row[4])?, pair_count: parse(row[5])? };
                    groups.entry((parse(row[0])?, row[1].to_string(), row[2].to_string())).or_default().entries.push(entry);
                }
                let mut csv = format!("stage,T,field,{FIT_COLUMNS}\n");
                for ((k, t, f), p) in &groups {
                    let _ = writeln!(csv, "{k},{t},{f},{}", fmt_fit(&fit_profile(p, s.side)));
                }
                let name = if s.pipeline == Pipeline::FlowSpin { "ds-vs-flow.csv" } else { "de-vs-flow.csv" };
                out.csv(name, &csv)
            })?;
            if s.pipeline == Pipeline::FlowSpin {
                r.stage("mc-scan", &["mc-grid"], json!({ "temperatures": s.scan_temperatures }), |r, out| {
                    let mut csv = format!("side,T,{FIT_COLUMNS}\n");
                    for &t in &s.scan_temperatures {
                        let ens = r.dataset(&grid_files[bins.index_of(t)?], Provenance::MonteCarlo)?;
                        let _ = writeln!(csv, "{},{t},{}", s.side, fmt_fit(&two_point_function(&ens, FieldKind::Spin).and_then(|p| fit_profile(&p, s.side))));
                    }
                    out.csv("ds-vs-temperature.csv", &csv)
                })
            } else {
                let scan = McSchedule { burn_in_sweeps: s.burn_in, thinning_sweeps: s.scan_thinning, n_samples: s.scan_samples };
                let params = json!({ "sides": s.scan_sides, "temperatures": s.scan_temperatures, "schedule": scan, "seed": s.seed });
                r.stage("mc-scan", &[], params, |_, out| {
                    let mut csv = format!("side,T,{FIT_COLUMNS}\n");
                    for (i, &side) in s.scan_sides.iter().enumerate() {
                        for (j, &t) in s.scan_temperatures.iter().enumerate() {
                            let seed = derive_seed(derive_seed(s.seed, SCAN_STREAM), (i * 1000 + j) as u64);
                            let ens = sample_ensemble(&model, side, t, &scan, seed)?;
                            let p = two_point_function(&ens, FieldKind::Epsilon)?;
                            out.csv(&format!("profiles/epsilon-L{side}-T{t:.4}.csv"), &p.to_csv())?;
                            let _ = writeln!(csv, "{side},{t},{}", fmt_fit(&fit_profile(&p, side)));
                        }
                    }
                    out.csv("de-vs-temperature.csv", &csv)
                })
            }
        }
    }
}

fn vh_maps(r: &mut Runner, s: &ExperimentSpec) -> Result<()> {
    let sched = s.schedule();
    r.stage("mc", &[], json!({ "side": s.side, "temperature": s.temperature, "schedule": sched, "seed": s.seed }), |_, out| {
        let e = sample_ensemble(&IsingModel::default(), s.side, s.temperature, &sched, derive_seed(s.seed, MC_STREAM))?;
        out.write("data/mc.isng", &encode_dataset(&e)?)
    })?;
    r.stage("rg", &["mc"], json!({ "steps": s.rg_steps, "binarize": s.binarize }), |r, out| {
        let trace = rg_flow(&r.dataset("data/mc.isng", Provenance::MonteCarlo)?, s.rg_steps, s.binarize, derive_seed(s.seed, RG_STREAM))?;
        for (k, e) in trace.stages.iter().enumerate().skip(1) {
            out.write(&format!("data/rg-{k}.isng"), &encode_dataset(e)?)?;
        }
        Ok(())
    })?;
    let cd = s.cd_config(RBM_STREAM);
    r.stage("rbm-stack", &["mc"], json!({ "layers": s.layer_sizes, "config": cd }), |r, out| {
        let mc = r.dataset("data/mc.isng", Provenance::MonteCarlo)?;
        let (layers, outputs) = stack_train_matrix(&mc.to_matrix(), &s.layer_sizes, &cd)?;
        for (k, (p, h)) in layers.into_iter().zip(outputs).enumerate() {
            out.write(&format!("rbm-layer-{}.rbm", k + 1), &encode_rbm(&RbmCheckpoint { params: p, propagation: cd.propagation, seed: cd.seed }))?;
            out.csv(&format!("data/rbm-hidden-{}.csv", k + 1), &matrix_csv(&h))?;
        }
        Ok(())
    })?;
    r.stage("vh", &["rg", "rbm-stack"], json!({}), |r, out| {
        let mc = r.dataset("data/mc.isng", Provenance::MonteCarlo)?.to_matrix();
        let mut sources = Vec::new();
        for k in 1..=s.rg_steps {
            sources.push((format!("rg-{k}"), r.dataset(&format!("data/rg-{k}.isng"), Provenance::RgStep(k as u32))?.to_matrix()));
        }
        for k in 1..s.layer_sizes.len() {
            sources.push((format!("rbm-{k}"), parse_matrix_csv(&r.text(&format!("data/rbm-hidden-{k}.csv"))?)?));
        }
        for (name, hidden) in sources {
            let map = vh_correlator_matrix(&mc, &hidden, s.side)?;
            out.csv(&format!("vh/{name}.csv"), &map.to_long_csv())?;
            let profile = patch_two_point(&map)?;
            out.csv(&format!("patch/{name}.csv"), &profile.to_csv())?;
            out.csv(&format!("patch/{name}-shells.csv"), &profile.shells().to_csv())?;
        }
        Ok(())
    })?;
    if s.checkerboard_blocks.is_empty() {
        return Ok(());
    }
    r.stage("synthetic", &[], json!({ "side": s.side, "blocks": s.checkerboard_blocks, "seed": s.seed }), |_, out| {
        let mut maps = Vec::new();
        for &b in &s.checkerboard_blocks {
            maps.push((format!("checkerboard-{b}"), synthetic_map(SyntheticKind::Checkerboard, s.side, b, 0)?));
        }
        maps.push(("white-noise".to_string(), synthetic_map(SyntheticKind::WhiteNoise, s.side, 1, derive_seed(s.seed, SYNTHETIC_STREAM))?));
        for (name, map) in maps {
            out.csv(&format!("vh/{name}.csv"), &map.to_long_csv())?;
            let profile = patch_two_point(&map)?;
            out.csv(&format!("patch/{name}.csv"), &profile.to_csv())?;
            out.csv(&format!("patch/{name}-shells.csv"), &profile.shells().to_csv())?;
        }
        Ok(())
    })
}

fn matrix_csv(m: &Matrix) -> String {
    let mut s = String::new();
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(f64::to_string).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let rows = text
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(parse::<f64>).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

fn temp_layers(r: &mut Runner, s: &ExperimentSpec) -> Result<()> {
    let bins = s.bins()?;
    let sched = s.schedule();
    let model = IsingModel::default();
    r.stage("mc", &[], json!({ "side": s.side, "temperature": s.temperature, "schedule": sched, "seed": s.seed }), |_, out| {
        let e = sample_ensemble(&model, s.side, s.temperature, &sched, derive_seed(s.seed, MC_STREAM))?;
        out.write("data/mc.isng", &encode_dataset(&e)?)
    })?;
    r.stage("rg", &["mc"], json!({ "steps": s.rg_steps, "binarize": s.binarize }), |r, out| {
        let trace = rg_flow(&r.dataset("data/mc.isng", Provenance::MonteCarlo)?, s.rg_steps, s.binarize, derive_seed(s.seed, RG_STREAM))?;
        for (k, e) in trace.stages.iter().enumerate().skip(1) {
            out.write(&format!("data/rg-{k}.isng"), &encode_dataset(e)?)?;
        }
        Ok(())
    })?;
    let cd = s.cd_config(RBM_STREAM);
    r.stage("rbm-stack", &["mc"], json!({ "layers": s.layer_sizes, "config": cd }), |r, out| {
        let mc = r.dataset("data/mc.isng", Provenance::MonteCarlo)?;
        let (layers, outputs) = stack_train_matrix(&mc.to_matrix(), &s.layer_sizes, &cd)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, BINARIZE_STREAM));
        for (k, (p, h)) in layers.into_iter().zip(outputs).enumerate() {
            out.write(&format!("rbm-layer-{}.rbm", k + 1), &encode_rbm(&RbmCheckpoint { params: p, propagation: cd.propagation, seed: cd.seed }))?;
            let e = Ensemble::from_matrix(&binarize_rows(&h, &mut rng), SpinKind::Binary, s.temperature, Provenance::LayerOutput(k as u32 + 1), s.seed)?;
            out.write(&format!("data/rbm-layer-{}.isng", k + 1), &encode_dataset(&e)?)?;
        }
        Ok(())
    })?;
    let mut classifier_stages = Vec::new();
    for k in 1..=s.rg_steps {
        let side = s.side >> k;
        let name = format!("classifier-L{side}");
        let layer_sched = McSchedule { n_samples: s.classifier_samples[k - 1], ..sched };
        let cfg = s.mlp_config(CLASSIFIER_STREAM + 100 * k as u64);
        let params = json!({ "side": side, "bins": bins, "schedule": layer_sched, "config": cfg, "seed": s.seed });
        r.stage(&name, &[], params, |_, out| {
            let ens = grid_ensembles(&model, side, &bins, &layer_sched, derive_seed(derive_seed(s.seed, MC_STREAM), 100 + k as u64))?;
            let (params, curves) = train_classifier(&grid_dataset(&ens)?, hidden_size_for(side * side), bins.len(), &cfg)?;
            out.write(&format!("classifier-L{side}.mlp"), &encode_mlp(&MlpCheckpoint { params, bins: bins.clone() }))?;
            out.csv(&format!("classifier-L{side}-curves.csv"), &curves.to_csv())
        })?;
        classifier_stages.push(name);
    }
    let mut deps: Vec<&str> = vec!["rg", "rbm-stack"];
    deps.extend(classifier_stages.iter().map(String::as_str));
    r.stage("measure", &deps, json!({}), |r, out| {
        let mut long = String::from("source,layer,side,T,probability\n");
        let mut summary = String::from("source,layer,side,argmax_T,mean_T\n");
        for k in 1..=s.rg_steps {
            let side = s.side >> k;
            let mlp = decode_mlp(&r.read(&format!("classifier-L{side}.mlp"))?)?;
            let sources = [
                ("rg", r.dataset(&format!("data/rg-{k}.isng"), Provenance::RgStep(k as u32))?),
                ("rbm", r.dataset(&format!("data/rbm-layer-{k}.isng"), Provenance::LayerOutput(k as u32))?),
            ];
            for (source, ens) in sources {
                let probs = measure_ensemble(&mlp.params, &ens)?;
                for (b, p) in probs.iter().enumerate() {
                    let _ = writeln!(long, "{source},{k},{side},{},{p}", mlp.bins.temperature(b));
                }
                let arg = read_temperature(&probs, &mlp.bins, Readout::Argmax)?;
                let mean = read_temperature(&probs, &mlp.bins, Readout::Mean)?;
                let _ = writeln!(summary, "{source},{k},{side},{arg},{mean}");
            }
        }
        out.csv("temp-layers.csv", &long)?;
        out.csv("temp-layers-summary.csv", &summary)
    })
}

fn theory_checks(r: &mut Runner, s: &ExperimentSpec) -> Result<()> {
    let (nv, nh) = (s.theory_visible, s.theory_hidden);
    r.stage("identities", &[], json!({ "instances": s.instances, "visible": nv, "hidden": nh, "seed": s.seed }), |_, out| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, THEORY_STREAM));
        let mut ident = String::from("instance,max_abs_difference,exactness_defect,matched_defect\n");
        let mut corr = String::from("case,instance,max_abs_connected\n");
        for i in 0..s.instances {
            let mut rbm = RbmParams::random(nv, nh, 1.0, &mut rng);
            rbm.visible_bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
            rbm.hidden_bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
            let h = HamiltonianTable::random(nv, 1.0, &mut rng)?;
            let via_t = rg_hamiltonian_exact(&rbm, &h)?;
            let closed = rbm_hidden_hamiltonian(&rbm)?;
            let diff = via_t.energies().iter().zip(closed.energies()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            // H(v) = F(v) makes Σ_h e^T = 1 exactly.
            let matched = HamiltonianTable::from_fn(nv, |v| -negative_free_energy(&rbm, v).expect("visible length matches"))?;
            let _ = writeln!(ident, "{i},{diff},{},{}", exactness_defect(&rbm, &h)?, exactness_defect(&rbm, &matched)?);
            let joint = rbm_joint(&rbm)?;
            let product = factorized_joint(&joint.visible_marginal(), &joint.hidden_marginal())?;
            let max_abs = |v: Vec<f64>| v.into_iter().map(f64::abs).fold(0.0, f64::max);
            let _ = writeln!(corr, "rbm,{i},{}", max_abs(joint.connected_correlations()));
            let _ = writeln!(corr, "factorized,{i},{}", max_abs(product.connected_correlations()));
        }
        out.csv("rg-identity.csv", &ident)?;
        out.csv("joint-correlations.csv", &corr)
    })?;

    let sched = s.schedule();
    let cd = s.cd_config(RBM_STREAM);
    let params = json!({ "side": s.side, "temperature": s.temperature, "schedule": sched, "layers": s.layer_sizes, "config": cd, "seed": s.seed });
    r.stage("trained-rbm", &[], params, |_, out| {
        let data = sample_ensemble(&IsingModel::default(), s.side, s.temperature, &sched, derive_seed(s.seed, MC_STREAM))?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, RBM_STREAM + 1000));
        let init = RbmParams::random(s.layer_sizes[0], s.layer_sizes[1], INIT_SCALE, &mut init_rng);
        let (rbm, _) = train(&init, &data, &cd)?;
        let target = empirical_distribution(data.iter().map(SpinConfig::values), rbm.n_visible())?;
        let kl = exact_kl_and_gradient(&rbm, &target)?.divergence;
        let kl0 = exact_kl_and_gradient(&init, &target)?.divergence;
        let joint = rbm_joint(&rbm)?;
        let connected = joint.connected_correlations().into_iter().map(f64::abs).fold(0.0, f64::max);
        let marginal = joint.visible_marginal();
        let rg = rg_hamiltonian_exact(&rbm, &HamiltonianTable::from_fn(rbm.n_visible(), |_| 0.0)?)?;
        out.write("trained.rbm", &encode_rbm(&RbmCheckpoint { params: rbm, propagation: cd.propagation, seed: cd.seed }))?;
        out.csv("trained-summary.csv", &format!("initial_kl,trained_kl,max_abs_connected\n{kl0},{kl},{connected}\n"))?;
        let mut dist = String::from("state,data,model\n");
        for (i, (q, p)) in target.iter().zip(ExactDistribution::probabilities(&marginal)).enumerate() {
            let _ = writeln!(dist, "{i},{q},{p}");
        }
        out.csv("trained-distribution.csv", &dist)?;
        out.csv("trained-hidden-hamiltonian.csv", &rg.to_csv())
    })
}
