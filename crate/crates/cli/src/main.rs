mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rglab::classifier::{
    argmax_histogram, grid_dataset, grid_ensembles, hidden_size_for, measure_ensemble, read_temperature, train_classifier, LabeledData,
    MlpTrainConfig, Readout, TempBins,
};
use rglab::experiment::{run_experiment, ExperimentSpec, Scale, StageStatus, BUILTINS};
use rglab::flow::generate_flow;
use rglab::io::{self, MlpCheckpoint, RbmCheckpoint};
use rglab::ising::{critical_temperature, sample_ensemble, IsingModel, McSchedule};
use rglab::lattice::{derive_seed, square_side, Ensemble, Provenance, SpinKind};
use rglab::observables::{
    default_fit_range, fit_magnetization, fit_power_law, patch_two_point, synthetic_map, two_point_function, vh_correlator, CorrelationProfile,
    FieldKind, SyntheticKind, VhCorrelationMap,
};
use rglab::rbm::{stack_train_matrix, train, CdConfig, Propagation, RbmParams, INIT_SCALE};
use rglab::rg::rg_flow;
use rglab::{Error, Result};

#[derive(Parser)]
#[command(name = "rglab", version, about = "Ising ensembles, block-spin RG, RBM flows and their correlators")]
struct Cli {
    /// Flat TOML file of flag values; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Use the full-size sample counts and iteration budgets as defaults.
    #[arg(long, global = true, env = "RGLAB_PAPER_SCALE", value_parser = clap::builder::FalseyValueParser::new())]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metropolis samples of the 2D Ising model.
    Sample(SampleArgs),
    /// Block-spin RG steps of a dataset.
    Rg(RgArgs),
    /// Train one RBM with contrastive divergence.
    TrainRbm(TrainRbmArgs),
    /// Greedy layer-wise training of a stack of RBMs.
    StackTrain(StackTrainArgs),
    /// Repeated v→h→v reconstructions through a trained RBM.
    Flow(FlowArgs),
    /// Train the temperature classifier on a grid of MC ensembles.
    TrainClassifier(TrainClassifierArgs),
    /// Measure the temperature of a dataset with a trained classifier.
    MeasureTemp(MeasureTempArgs),
    /// Two-point function of the spin or energy field.
    Correlate(CorrelateArgs),
    /// ⟨v h⟩ maps between visible and hidden datasets.
    VhMap(VhMapArgs),
    /// Patch two-point function of a ⟨v h⟩ map.
    PatchCorr(PatchCorrArgs),
    /// Power-law fit of a correlation profile or magnetization points.
    Fit(FitArgs),
    /// Enumeration checks of the variational-RG identities.
    TheoryCheck(TheoryArgs),
    /// Built-in or file-defined experiment pipelines.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Inspect and convert dataset files.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run a built-in by name, or a TOML spec file.
    #[command(args_override_self = true)]
    Run(ExperimentRunArgs),
    /// List the built-in experiments.
    List,
    /// Print a built-in's spec as TOML.
    #[command(args_override_self = true)]
    Show {
        name: String,
        #[arg(long, value_enum)]
        scale: Option<ScaleArg>,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Print the header of a binary dataset.
    Inspect { path: PathBuf },
    /// Convert between the binary format and CSV, chosen by extension.
    Convert { input: PathBuf, output: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Quick,
    Desk,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Quick => Scale::Quick,
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PropagationArg {
    Expectation,
    Stochastic,
}

impl From<PropagationArg> for Propagation {
    fn from(p: PropagationArg) -> Self {
        match p {
            PropagationArg::Expectation => Propagation::Expectation,
            PropagationArg::Stochastic => Propagation::Stochastic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Spin,
    Epsilon,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReadoutArg {
    Argmax,
    Mean,
    /// Per-config argmax histogram instead of one temperature.
    Histogram,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitKind {
    PowerLaw,
    Magnetization,
}

#[derive(Clone, Copy, ValueEnum)]
enum SyntheticArg {
    Checkerboard,
    WhiteNoise,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct SampleArgs {
    #[arg(long, default_value_t = 10)]
    side: usize,
    /// Defaults to the critical temperature.
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    /// Default 2000, or 20000 with --paper-scale.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thinning: usize,
    #[arg(long)]
    seed: u64,
    /// `.csv` writes CSV, anything else the binary format.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct RgArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    steps: usize,
    /// Keep the real-valued block averages.
    #[arg(long)]
    no_binarize: bool,
    #[arg(long)]
    seed: u64,
    /// Directory receiving `rg-1.isng`, `rg-2.isng`, …
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct CdArgs {
    /// Default 500, or 10000 with --paper-scale.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    /// Minibatch size; 0 uses the whole dataset.
    #[arg(long, default_value_t = 0)]
    batch: usize,
    #[arg(long, default_value_t = 1)]
    cd_steps: usize,
    #[arg(long, value_enum, default_value = "expectation")]
    propagation: PropagationArg,
    #[arg(long)]
    seed: u64,
}

impl CdArgs {
    fn config(&self, paper: bool) -> CdConfig {
        CdConfig {
            learning_rate: self.learning_rate,
            iterations: self.iterations.unwrap_or(if paper { 10000 } else { 500 }),
            cd_steps: self.cd_steps,
            batch_size: (self.batch > 0).then_some(self.batch),
            propagation: self.propagation.into(),
            seed: self.seed,
        }
    }
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TrainRbmArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long)]
    hidden: usize,
    #[command(flatten)]
    cd: CdArgs,
    #[arg(long, short)]
    out: PathBuf,
    /// Per-iteration reconstruction error and gradient norm.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct StackTrainArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Hidden sizes of successive layers, e.g. `256,64`.
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<usize>,
    #[command(flatten)]
    cd: CdArgs,
    /// Directory receiving `layer-k.rbm` and, for square layers, `hidden-k.isng`.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct FlowArgs {
    #[arg(long)]
    rbm: PathBuf,
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value_t = 26)]
    steps: usize,
    /// Defaults to the mode stored in the checkpoint.
    #[arg(long, value_enum)]
    propagation: Option<PropagationArg>,
    #[arg(long)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TrainClassifierArgs {
    /// Labelled datasets, binned by their header temperature. Without these
    /// a fresh MC ensemble is sampled for every bin.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    side: usize,
    /// Per bin. Default 2000, or 20000 with --paper-scale.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thinning: usize,
    #[arg(long, default_value_t = 0.0)]
    bin_start: f64,
    #[arg(long, default_value_t = 0.1)]
    bin_step: f64,
    #[arg(long, default_value_t = 60)]
    bin_count: usize,
    /// Default 300, or 3000 with --paper-scale.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// Minibatch size; 0 uses the whole training set.
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.4)]
    validation_fraction: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct MeasureTempArgs {
    #[arg(long)]
    classifier: PathBuf,
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "argmax")]
    readout: ReadoutArg,
    /// Also write the mean bin-probability vector (or histogram) as CSV.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct CorrelateArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "spin")]
    field: FieldArg,
    /// Merge distances into integer shells.
    #[arg(long)]
    shells: bool,
    /// Standard output when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct VhMapArgs {
    #[arg(long)]
    visible: PathBuf,
    /// Hidden dataset paired row by row with the visible one.
    #[arg(long, conflicts_with = "rbm")]
    hidden: Option<PathBuf>,
    /// Use the RBM's ⟨h|v⟩ as hidden values.
    #[arg(long)]
    rbm: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct PatchCorrArgs {
    /// Long-format map written by `vh-map`.
    #[arg(long, required_unless_present = "synthetic")]
    map: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "map")]
    synthetic: Option<SyntheticArg>,
    #[arg(long, default_value_t = 32)]
    side: usize,
    #[arg(long, default_value_t = 4)]
    block: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    shells: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct FitArgs {
    /// Profile CSV (`r,C[,count]`) or magnetization CSV (`T,m`).
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "power-law")]
    kind: FitKind,
    /// Lattice side, for the default fit range.
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    /// Defaults to the critical temperature.
    #[arg(long)]
    tc: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TheoryArgs {
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 4)]
    visible: usize,
    #[arg(long, default_value_t = 2)]
    hidden: usize,
    #[arg(long)]
    seed: u64,
    /// Output directory; defaults to the experiment output root.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentRunArgs {
    /// Built-in name or path to a TOML spec.
    target: String,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to $RGLAB_OUT/<name>.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn load_dataset(path: &Path) -> Result<Ensemble> {
    if is_csv(path) {
        io::dataset_from_csv(&fs::read_to_string(path)?)
    } else {
        io::read_dataset(path)
    }
}

fn save_dataset(path: &Path, e: &Ensemble) -> Result<()> {
    ensure_parent(path)?;
    if is_csv(path) {
        io::write_atomic(path, io::dataset_to_csv(e).as_bytes())
    } else {
        io::write_dataset(path, e)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => Ok(fs::create_dir_all(p)?),
        _ => Ok(()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            ensure_parent(p)?;
            io::write_atomic(p, text.as_bytes())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let paper = cli.paper_scale;
    match cli.command {
        Command::Sample(a) => {
            let model = IsingModel { coupling: a.coupling };
            let t = match a.temperature {
                Some(t) => t,
                None => critical_temperature(a.coupling)?,
            };
            let sched = McSchedule { burn_in_sweeps: a.burn_in, thinning_sweeps: a.thinning, n_samples: a.samples.unwrap_or(if paper { 20000 } else { 2000 }) };
            let e = sample_ensemble(&model, a.side, t, &sched, a.seed)?;
            save_dataset(&a.out, &e)?;
            eprintln!("wrote {} configs of {}x{} at T={t} to {}", e.len(), a.side, a.side, a.out.display());
        }
        Command::Rg(a) => {
            let trace = rg_flow(&load_dataset(&a.input)?, a.steps, !a.no_binarize, a.seed)?;
            fs::create_dir_all(&a.out)?;
            for (k, e) in trace.stages.iter().enumerate().skip(1) {
                save_dataset(&a.out.join(format!("rg-{k}.isng")), e)?;
            }
        }
        Command::TrainRbm(a) => {
            let data = load_dataset(&a.input)?;
            let cfg = a.cd.config(paper);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1000));
            let init = RbmParams::random(data.sites(), a.hidden, INIT_SCALE, &mut rng);
            let (params, stats) = train(&init, &data, &cfg)?;
            ensure_parent(&a.out)?;
            io::write_rbm(&a.out, &RbmCheckpoint { params, propagation: cfg.propagation, seed: cfg.seed })?;
            if let Some(log) = &a.log {
                let mut csv = String::from("iteration,reconstruction_error,gradient_norm\n");
                for (k, (e, g)) in stats.reconstruction_error.iter().zip(&stats.gradient_norm).enumerate() {
                    csv.push_str(&format!("{},{e},{g}\n", k + 1));
                }
                emit(Some(log), &csv)?;
            }
            if let Some(e) = stats.reconstruction_error.last() {
                eprintln!("final reconstruction error {e}");
            }
        }
        Command::StackTrain(a) => {
            let data = load_dataset(&a.input)?;
            let cfg = a.cd.config(paper);
            let mut sizes = vec![data.sites()];
            sizes.extend(&a.layers);
            let (layers, outputs) = stack_train_matrix(&data.to_matrix(), &sizes, &cfg)?;
            fs::create_dir_all(&a.out)?;
            for (k, (p, h)) in layers.into_iter().zip(outputs).enumerate() {
                io::write_rbm(&a.out.join(format!("layer-{}.rbm", k + 1)), &RbmCheckpoint { params: p, propagation: cfg.propagation, seed: cfg.seed })?;
                if square_side(h.cols()).is_ok() {
                    let e = Ensemble::from_matrix(&h, SpinKind::Real, data.temperature, Provenance::LayerOutput(k as u32 + 1), cfg.seed)?;
                    io::write_dataset(&a.out.join(format!("hidden-{}.isng", k + 1)), &e)?;
                }
            }
        }
        Command::Flow(a) => {
            let ckpt = io::read_rbm(&a.rbm)?;
            let mode = a.propagation.map_or(ckpt.propagation, Propagation::from);
            let trace = generate_flow(&ckpt.params, &load_dataset(&a.input)?, a.steps, mode, a.seed)?;
            io::write_flow(&a.out, &trace)?;
        }
        Command::TrainClassifier(a) => {
            let bins = TempBins::grid(a.bin_start, a.bin_step, a.bin_count)?;
            let data = if a.inputs.is_empty() {
                let sched = McSchedule { burn_in_sweeps: a.burn_in, thinning_sweeps: a.thinning, n_samples: a.samples.unwrap_or(if paper { 20000 } else { 2000 }) };
                grid_dataset(&grid_ensembles(&IsingModel::default(), a.side, &bins, &sched, a.seed)?)?
            } else {
                let ens = a.inputs.iter().map(|p| load_dataset(p)).collect::<Result<Vec<_>>>()?;
                let labels = ens.iter().map(|e| bins.index_of(e.temperature)).collect::<Result<Vec<_>>>()?;
                LabeledData::from_ensembles(&ens, &labels)?
            };
            let cfg = MlpTrainConfig {
                learning_rate: a.learning_rate,
                epochs: a.epochs.unwrap_or(if paper { 3000 } else { 300 }),
                validation_fraction: a.validation_fraction,
                batch_size: (a.batch > 0).then_some(a.batch),
                seed: derive_seed(a.seed, 2),
            };
            let n_in = data.inputs.cols();
            let (params, curves) = train_classifier(&data, hidden_size_for(n_in), bins.len(), &cfg)?;
            ensure_parent(&a.out)?;
            io::write_mlp(&a.out, &MlpCheckpoint { params, bins })?;
            if let Some(c) = &a.curves {
                emit(Some(c), &curves.to_csv())?;
            }
        }
        Command::MeasureTemp(a) => {
            let ckpt = io::read_mlp(&a.classifier)?;
            let e = load_dataset(&a.input)?;
            let probs = match a.readout {
                ReadoutArg::Histogram => argmax_histogram(&ckpt.params, &e)?,
                _ => measure_ensemble(&ckpt.params, &e)?,
            };
            let readout = match a.readout {
                ReadoutArg::Mean => Readout::Mean,
                _ => Readout::Argmax,
            };
            println!("{}", read_temperature(&probs, &ckpt.bins, readout)?);
            if let Some(out) = &a.out {
                let mut csv = String::from("T,probability\n");
                for (t, p) in ckpt.bins.temperatures().iter().zip(&probs) {
                    csv.push_str(&format!("{t},{p}\n"));
                }
                emit(Some(out), &csv)?;
            }
        }
        Command::Correlate(a) => {
            let kind = match a.field {
                FieldArg::Spin => FieldKind::Spin,
                FieldArg::Epsilon => FieldKind::Epsilon,
            };
            let mut p = two_point_function(&load_dataset(&a.input)?, kind)?;
            if a.shells {
                p = p.shells();
            }
            emit(a.out.as_deref(), &p.to_csv())?;
        }
        Command::VhMap(a) => {
            let vis = load_dataset(&a.visible)?;
            let map = match (&a.hidden, &a.rbm) {
                (Some(h), _) => vh_correlator(&vis, &load_dataset(h)?)?,
                (None, Some(r)) => {
                    let ckpt = io::read_rbm(r)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(0);
                    let h = ckpt.params.propagate_up(&vis.to_matrix(), Propagation::Expectation, &mut rng)?;
                    rglab::observables::vh_correlator_matrix(&vis.to_matrix(), &h, vis.side())?
                }
                (None, None) => return Err(Error::Config("vh-map needs --hidden or --rbm".into())),
            };
            emit(Some(&a.out), &map.to_long_csv())?;
        }
        Command::PatchCorr(a) => {
            let map = match (&a.map, a.synthetic) {
                (Some(p), _) => VhCorrelationMap::from_long_csv(&fs::read_to_string(p)?)?,
                (None, Some(SyntheticArg::Checkerboard)) => synthetic_map(SyntheticKind::Checkerboard, a.side, a.block, a.seed)?,
                (None, Some(SyntheticArg::WhiteNoise)) => synthetic_map(SyntheticKind::WhiteNoise, a.side, a.block, a.seed)?,
                (None, None) => unreachable!("clap requires --map or --synthetic"),
            };
            let mut p = patch_two_point(&map)?;
            if a.shells {
                p = p.shells();
            }
            emit(a.out.as_deref(), &p.to_csv())?;
        }
        Command::Fit(a) => {
            let text = fs::read_to_string(&a.input)?;
            let fit = match a.kind {
                FitKind::PowerLaw => {
                    let p = CorrelationProfile::from_csv(&text)?;
                    let (lo, hi) = match (a.r_min, a.r_max, a.side) {
                        (Some(lo), Some(hi), _) => (lo, hi),
                        (lo, hi, Some(side)) => {
                            let (dlo, dhi) = default_fit_range(&p, side);
                            (lo.unwrap_or(dlo), hi.unwrap_or(dhi))
                        }
                        _ => return Err(Error::Config("fit needs --side or both --r-min and --r-max".into())),
                    };
                    fit_power_law(&p, lo, hi)?
                }
                FitKind::Magnetization => {
                    let points = CorrelationProfile::from_csv(&text)?.entries.iter().map(|e| (e.distance, e.value)).collect::<Vec<_>>();
                    let tc = match a.tc {
                        Some(t) => t,
                        None => critical_temperature(1.0)?,
                    };
                    fit_magnetization(&points, tc)?
                }
            };
            emit(a.out.as_deref(), &fit.to_csv())?;
        }
        Command::TheoryCheck(a) => {
            let mut spec = ExperimentSpec::builtin("theory-checks", if paper { Scale::Paper } else { Scale::Desk })?;
            spec.instances = a.instances;
            spec.theory_visible = a.visible;
            spec.theory_hidden = a.hidden;
            spec.seed = a.seed;
            spec.output = a.out;
            let report = run_experiment(&spec, None)?;
            summarize_theory(&report.dir)?;
        }
        Command::Experiment(ExperimentCommand::List) => {
            for b in BUILTINS {
                println!("{b}");
            }
        }
        Command::Experiment(ExperimentCommand::Show { name, scale }) => {
            let scale = scale.map(Scale::from).unwrap_or(if paper { Scale::Paper } else { Scale::Desk });
            print!("{}", ExperimentSpec::builtin(&name, scale)?.to_toml());
        }
        Command::Experiment(ExperimentCommand::Run(a)) => {
            let scale = a.scale.map(Scale::from).unwrap_or(if paper { Scale::Paper } else { Scale::Desk });
            let mut spec = if BUILTINS.contains(&a.target.as_str()) {
                ExperimentSpec::builtin(&a.target, scale)?
            } else {
                let text = fs::read_to_string(&a.target).map_err(|e| Error::Config(format!("`{}` is neither a built-in nor a readable spec: {e}", a.target)))?;
                ExperimentSpec::from_toml(&text)?
            };
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            if a.out.is_some() {
                spec.output = a.out;
            }
            let report = run_experiment(&spec, None)?;
            for (stage, status) in &report.stages {
                let word = match status {
                    StageStatus::Ran => "ran",
                    StageStatus::Skipped => "skipped (up to date)",
                };
                eprintln!("{stage}: {word}");
            }
            println!("{}", report.dir.join(rglab::experiment::MANIFEST_FILE).display());
        }
        Command::Dataset(DatasetCommand::Inspect { path }) => {
            println!("{}", io::read_dataset_header(&path)?);
        }
        Command::Dataset(DatasetCommand::Convert { input, output }) => {
            save_dataset(&output, &load_dataset(&input)?)?;
        }
    }
    Ok(())
}

fn summarize_theory(dir: &Path) -> Result<()> {
    let max_col = |file: &str, col: usize| -> Result<f64> {
        let text = fs::read_to_string(dir.join(file))?;
        Ok(text.lines().skip(1).filter_map(|l| l.split(',').nth(col)?.parse::<f64>().ok()).fold(0.0, f64::max))
    };
    let text = fs::read_to_string(dir.join("joint-correlations.csv"))?;
    let factorized = text.lines().filter(|l| l.starts_with("factorized,")).filter_map(|l| l.split(',').nth(2)?.parse::<f64>().ok()).fold(0.0, f64::max);
    println!("max |H_RG - H_RBM|            {:e}", max_col("rg-identity.csv", 1)?);
    println!("max defect with H = F         {:e}", max_col("rg-identity.csv", 3)?);
    println!("max |<vh>-<v><h>| factorized  {factorized:e}");
    println!("tables in {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
