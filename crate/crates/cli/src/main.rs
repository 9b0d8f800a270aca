use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use survshap::classifiers::{random_search_tune, train, Family, SavedModel, TrainConfig};
use survshap::data::{
    generate_synthetic_cohort, label_progression, load_cohort_events, write_outcomes, Standardizer,
    SurvivalDataset, SyntheticConfig, ZERO_DURATION_SHIFT,
};
use survshap::explain::{explain_model, mean_abs_ranking, Background, FeatureRanking};
use survshap::metrics::BrierMode;
use survshap::pipeline::{
    cox_summary, cox_summary_csv, emit_report, load_report, run_pipeline, select_features, selected_features_csv, Arm,
    Cohort, Manifest, RunConfig,
};
use survshap::rng::{derive_seed, stream};
use survshap::survival::{fit_cox, schoenfeld_residuals, CoxOptions, TieRule};
use survshap::Error;

#[derive(Parser)]
#[command(name = "survshap", version, about = "Shapley-guided feature selection for Cox models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort: features.csv, outcomes.csv, truth.json.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Number of subjects; overrides the config.
        #[arg(long)]
        n_subjects: Option<usize>,
    },
    /// Label CKD progression from a diagnosis CSV (subject_id,icd9_code,date) into outcomes.csv.
    Label {
        #[command(flatten)]
        common: Common,
        /// Diagnosis event CSV.
        #[arg(long)]
        input: PathBuf,
    },
    /// Train one classifier family on the whole cohort: model.json, standardizer.json.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        pipeline: PipelineFlags,
        /// Classifier settings as JSON, e.g. the `best` entry of tune.json.
        #[arg(long)]
        train_config: Option<PathBuf>,
    },
    /// Random-search hyperparameters for one family: tune.json.
    Tune {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        pipeline: PipelineFlags,
        /// Number of sampled configurations.
        #[arg(long, default_value_t = 20)]
        budget: usize,
    },
    /// Shapley attributions of a trained model: attributions.csv, ranking.csv.
    Explain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        /// model.json written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// standardizer.json written by `train`.
        #[arg(long)]
        standardizer: PathBuf,
    },
    /// Union the top-j ranked features with KFRE-8: selected_features.csv.
    Select {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pipeline: PipelineFlags,
        /// ranking.csv written by `explain`.
        #[arg(long)]
        ranking: PathBuf,
    },
    /// Fit a penalized Cox model: cox_summary.csv, cox_model.json.
    Cox {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        pipeline: PipelineFlags,
        /// selected_features.csv restricting the covariates; all columns otherwise.
        #[arg(long)]
        selected: Option<PathBuf>,
    },
    /// Cross-validated end-to-end run; prints the manifest of report files.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        pipeline: PipelineFlags,
    },
    /// Re-emit report files from a saved metrics.json.
    Report {
        #[command(flatten)]
        common: Common,
        /// metrics.json written by `run`.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; nothing is written elsewhere.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed for every random stage.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a config key with a JSON value, e.g. `--set explainer.background=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct DataFlags {
    /// Feature CSV with a subject_id column.
    #[arg(long, requires = "outcomes")]
    features: Option<PathBuf>,
    /// Outcome CSV: subject_id,duration_days,event.
    #[arg(long, requires = "features")]
    outcomes: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineFlags {
    /// Classifier family or `baseline` (KFRE-8 only): lr, dt, rf, gbt, mlp, resmlp, baseline.
    #[arg(long)]
    family: Option<Arm>,
    /// Number of top-ranked features joined with KFRE-8.
    #[arg(long)]
    top_j: Option<usize>,
    /// Ridge penalty on the Cox coefficients.
    #[arg(long, allow_hyphen_values = true)]
    penalizer: Option<f64>,
    /// Tied event times: efron or breslow.
    #[arg(long)]
    tie_rule: Option<TieRule>,
    /// Brier estimator: literal or ipcw.
    #[arg(long)]
    brier_mode: Option<BrierMode>,
    /// Select from the union of every family's ranking.
    #[arg(long)]
    union_all_families: bool,
    /// Folds run concurrently.
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if is_validation(&e) {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e)
        }
    }
}

fn is_validation(e: &Error) -> bool {
    match e {
        Error::InvalidConfig(_) => true,
        Error::Stage { source, .. } => is_validation(source),
        _ => false,
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Config file (or defaults), then `--set` overrides, then `--seed`.
/// Relative data paths resolve against the config file's directory.
fn load_config(common: &Common) -> CliResult<(RunConfig, PathBuf)> {
    let (mut config, base) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let config: RunConfig =
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (config, base)
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    if !common.overrides.is_empty() {
        let mut tree = serde_json::to_value(&config).map_err(Error::from)?;
        for o in &common.overrides {
            apply_override(&mut tree, o)?;
        }
        config = serde_json::from_value(tree).map_err(|e| Failure::Usage(format!("--set: {e}")))?;
    }
    if let Some(seed) = common.seed {
        config.pipeline.seed = seed;
    }
    Ok((config, base))
}

fn apply_override(tree: &mut Value, spec: &str) -> CliResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{spec}`")))?;
    let mut node = tree;
    for part in key.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| Failure::Usage(format!("unknown config key `{key}`")))?;
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

fn apply_flags(config: &mut RunConfig, flags: &PipelineFlags) -> CliResult<()> {
    let p = &mut config.pipeline;
    if let Some(f) = flags.family {
        p.family = f;
    }
    if let Some(j) = flags.top_j {
        p.top_j = j;
    }
    if let Some(x) = flags.penalizer {
        p.penalizer = x;
    }
    if let Some(t) = flags.tie_rule {
        p.tie_rule = t;
    }
    if let Some(b) = flags.brier_mode {
        p.brier_mode = b;
    }
    if flags.union_all_families {
        p.union_all_families = true;
    }
    if let Some(j) = flags.jobs {
        p.jobs = j;
    }
    p.validate()?;
    Ok(())
}

fn load_cohort(config: &RunConfig, base: &Path, flags: &DataFlags) -> CliResult<Cohort> {
    let mut source = config.data.clone();
    if let (Some(f), Some(o)) = (&flags.features, &flags.outcomes) {
        source.synthetic = None;
        source.features = Some(f.clone());
        source.outcomes = Some(o.clone());
        return Ok(source.load(Path::new(""))?);
    }
    Ok(source.load(base)?)
}

fn classifier_family(config: &RunConfig) -> CliResult<Family> {
    match config.pipeline.family {
        Arm::Classifier(f) => Ok(f),
        Arm::Baseline => Err(Failure::Usage("this subcommand needs a classifier family, not `baseline`".into())),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(io_error(dir, e)))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Failure::Runtime(io_error(&path, e)))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn json_bytes<T: serde::Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v).map_err(Error::from)?;
    b.push(b'\n');
    Ok(b)
}

fn print_manifest(m: &Manifest) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(m).map_err(Error::from)?);
    Ok(())
}

/// Synthetic cohort used when the config has none: KFRE-8 columns, five
/// signal features and ten noise features.
fn default_synthetic() -> SyntheticConfig {
    SyntheticConfig {
        n_subjects: 1000,
        n_signal_features: 5,
        n_noise_features: 10,
        true_beta: vec![0.8, -0.6, 0.5, 0.4, -0.5],
        kfre_beta: Some(vec![0.2, 0.1, -0.4, 0.3, 0.0, 0.1, 0.0, -0.2]),
        ..Default::default()
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Synth { common, n_subjects } => {
            let (config, _) = load_config(&common)?;
            let mut synth = config.data.synthetic.clone().unwrap_or_else(default_synthetic);
            synth.seed = common.seed.unwrap_or(synth.seed);
            if let Some(n) = n_subjects {
                synth.n_subjects = n;
            }
            let cohort = generate_synthetic_cohort(&synth)?;
            let mut features = Vec::new();
            cohort.features.write_csv(&mut features)?;
            let mut outcomes = Vec::new();
            cohort.survival.write_outcomes_csv(&mut outcomes)?;
            write_file(&common.out, "features.csv", &features)?;
            write_file(&common.out, "outcomes.csv", &outcomes)?;
            write_file(&common.out, "truth.json", &json_bytes(&cohort.truth)?)
        }
        Command::Label { common, input } => {
            let timelines = load_cohort_events(&input)?;
            let mut rows = Vec::new();
            for t in &timelines {
                match label_progression(t) {
                    Ok(l) => {
                        let d = if l.duration_days <= 0 {
                            ZERO_DURATION_SHIFT
                        } else {
                            l.duration_days as f64
                        };
                        rows.push((t.subject_id().to_string(), d, l.progressed));
                    }
                    Err(Error::NotStageable(id)) => log::warn!("subject {id} has no staged diagnosis; skipped"),
                    Err(e) => return Err(e.into()),
                }
            }
            if rows.is_empty() {
                return Err(Failure::Runtime(Error::Empty("no stageable subjects".into())));
            }
            let mut buf = Vec::new();
            write_outcomes(&mut buf, rows.iter().map(|(id, d, e)| (id.as_str(), *d, *e)))?;
            write_file(&common.out, "outcomes.csv", &buf)
        }
        Command::Train {
            common,
            data,
            pipeline,
            train_config,
        } => {
            let (mut config, base) = load_config(&common)?;
            apply_flags(&mut config, &pipeline)?;
            let family = classifier_family(&config)?;
            let tc: TrainConfig = match &train_config {
                Some(p) => read_json(p)?,
                None => config.pipeline.train_config(family),
            };
            let cohort = load_cohort(&config, &base, &data)?;
            let standardizer = Standardizer::fit(&cohort.features, config.pipeline.imputation)?;
            let x = standardizer.transform(&cohort.features)?;
            let model = train(&tc, x.values(), &cohort.labels, derive_seed(config.pipeline.seed, stream::CLASSIFIER))?;
            let saved = SavedModel::new(tc, x.column_names().to_vec(), model);
            write_file(&common.out, "model.json", saved.to_json()?.as_bytes())?;
            write_file(&common.out, "standardizer.json", &json_bytes(&standardizer)?)
        }
        Command::Tune {
            common,
            data,
            pipeline,
            budget,
        } => {
            let (mut config, base) = load_config(&common)?;
            apply_flags(&mut config, &pipeline)?;
            let family = classifier_family(&config)?;
            let cohort = load_cohort(&config, &base, &data)?;
            let standardizer = Standardizer::fit(&cohort.features, config.pipeline.imputation)?;
            let x = standardizer.transform(&cohort.features)?;
            let result = random_search_tune(
                family,
                x.values(),
                &cohort.labels,
                config.pipeline.k_folds,
                budget,
                config.pipeline.seed,
            )?;
            write_file(&common.out, "tune.json", &json_bytes(&result)?)
        }
        Command::Explain {
            common,
            data,
            model,
            standardizer,
        } => {
            let (config, base) = load_config(&common)?;
            let saved = SavedModel::load(&model)?;
            let standardizer: Standardizer = read_json(&standardizer)?;
            let cohort = load_cohort(&config, &base, &data)?;
            let x = standardizer.transform(&cohort.features)?;
            if x.column_names() != saved.feature_names.as_slice() {
                return Err(Failure::Usage("model features do not match the data columns".into()));
            }
            let seed = config.pipeline.seed;
            let budget = &config.pipeline.explainer;
            let background = Background::sample(x.values(), budget.background, derive_seed(seed, stream::BACKGROUND))?;
            let rows = Background::sample(x.values(), budget.explain_rows, derive_seed(seed, stream::EXPLAIN))?;
            let attributions = explain_model(
                &saved.model,
                rows.rows(),
                &background,
                x.column_names().to_vec(),
                budget,
                derive_seed(seed, stream::EXPLAIN),
            )?;
            let ranking = mean_abs_ranking(&attributions)?;
            let mut a = Vec::new();
            attributions.write_csv(&mut a)?;
            let mut r = Vec::new();
            ranking.write_csv(&mut r)?;
            write_file(&common.out, "attributions.csv", &a)?;
            write_file(&common.out, "ranking.csv", &r)
        }
        Command::Select {
            common,
            pipeline,
            ranking,
        } => {
            let (mut config, _) = load_config(&common)?;
            apply_flags(&mut config, &pipeline)?;
            let ranking = FeatureRanking::load_csv(&ranking)?;
            let selected = select_features(&ranking, config.pipeline.top_j, &config.pipeline.kfre8)?;
            write_file(&common.out, "selected_features.csv", &selected_features_csv(&selected)?)
        }
        Command::Cox {
            common,
            data,
            pipeline,
            selected,
        } => {
            let (mut config, base) = load_config(&common)?;
            apply_flags(&mut config, &pipeline)?;
            let cohort = load_cohort(&config, &base, &data)?;
            let standardizer = Standardizer::fit(&cohort.features, config.pipeline.imputation)?;
            let x = standardizer.transform(&cohort.features)?;
            let x = match &selected {
                Some(path) => {
                    let names = read_selected(path)?;
                    x.select_columns(&names)?
                }
                None => x,
            };
            let ds: SurvivalDataset = cohort.survival.with_features(x)?;
            let options = CoxOptions {
                penalizer: config.pipeline.penalizer,
                tie_rule: config.pipeline.tie_rule,
                ..Default::default()
            };
            let fitted = fit_cox(&ds, &options)?;
            let summary = cox_summary(&fitted, &ds)?;
            let ph = match schoenfeld_residuals(&fitted, &ds) {
                Ok(s) => s.tests,
                Err(e) => {
                    log::warn!("proportional-hazards test skipped: {e}");
                    Vec::new()
                }
            };
            write_file(&common.out, "cox_summary.csv", &cox_summary_csv(&summary, &ph)?)?;
            write_file(&common.out, "cox_model.json", &json_bytes(&fitted)?)
        }
        Command::Run { common, data, pipeline } => {
            let (mut config, base) = load_config(&common)?;
            apply_flags(&mut config, &pipeline)?;
            let cohort = load_cohort(&config, &base, &data)?;
            let report = run_pipeline(&cohort.features, &cohort.survival, &cohort.labels, &config.pipeline)?;
            let manifest = emit_report(&report, &common.out)?;
            print_manifest(&manifest)
        }
        Command::Report { common, input } => {
            let report = load_report(&input)?;
            let manifest = emit_report(&report, &common.out)?;
            print_manifest(&manifest)
        }
    }
}

/// Feature names from the first column of a selected_features.csv.
fn read_selected(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.split(',').next() == Some("feature") => {}
        _ => return Err(Failure::Usage(format!("{}: expected a `feature` column first", path.display()))),
    }
    Ok(lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').next().unwrap_or_default().to_string())
        .collect())
}
