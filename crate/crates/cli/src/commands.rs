use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use gazedp_core::bench::{run_benchmark, write_bench_outputs, BenchConfig};
use gazedp_core::dataset::{validate_dataset, TaskKind};
use gazedp_core::dpmap::{mapping_table, MappingKind, MappingSpec};
use gazedp_core::error::{Error, Result};
use gazedp_core::events::{
    dataset_features, detect_fixations, detect_saccades, DetectorConfig, FEATURE_NAMES,
};
use gazedp_core::audit::{audit_advantage, CountLaplace, RandomizedResponse};
use gazedp_core::mechanisms::{pdp_query, BudgetedRecord, QueryKind, SampleMechanismSpec};
use gazedp_core::models::{ModelKind, ModelSpec};
use gazedp_core::predict::{cross_validate, fit, derive_labels, PredictionTask, SplitKind, TaskSpec};
use gazedp_core::stats::{dunn_bonferroni, kruskal_wallis, mann_whitney_u};
use gazedp_core::synth::{synthesize_dataset, SynthSpec};
use gazedp_core::table::{parse_dataset, write_dataset};

#[derive(Parser)]
#[command(name = "gazedp", version, about = "Gaze-based perceived privacy and personalized DP")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Validate a dataset file; exits 1 when violations exist.
    Validate(ValidateArgs),
    /// Detect fixations and saccades, writing one table per event kind.
    Detect(DetectArgs),
    /// Extract the per-trial feature table.
    Features(FeaturesArgs),
    /// Rank tests of a feature across rating or participant groups.
    Stats(StatsArgs),
    /// Train one model and save it.
    Train(TrainArgs),
    /// Cross-validated evaluation of one model on one task.
    Eval(EvalArgs),
    /// Print the level-to-budget mapping table.
    Map(MapArgs),
    /// Run a personalized query over a dataset.
    Query(QueryArgs),
    /// Empirically audit a mechanism against the advantage bound.
    Audit(AuditArgs),
    /// Run the full utility benchmark.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Synthesis config (JSON, SynthSpec fields); defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for dataset.csv and sidecars.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset table (.csv).
    data: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    dispersion_deg: f64,
    #[arg(long, default_value_t = 100.0)]
    min_fixation_ms: f64,
    #[arg(long, default_value_t = 400.0)]
    max_fixation_ms: f64,
    #[arg(long, default_value_t = 30.0)]
    velocity_thresh: f64,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Append demographic context columns.
    #[arg(long)]
    context: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
    /// Feature column to test (see `features` header for names).
    #[arg(long)]
    feature: String,
    /// Grouping: rating | expertise | attribute.
    #[arg(long, default_value = "rating")]
    group_by: String,
    /// Write the JSON result here as well as stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// binary_privacy | level_privacy | contextual_privacy |
    /// attribute_recognition | expertise | identification
    #[arg(long)]
    task: String,
    /// decision_tree | linear_svm | logistic_regression | random_forest | knn
    #[arg(long)]
    model: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    task: String,
    #[arg(long)]
    model: String,
    /// person_independent | person_specific
    #[arg(long, default_value = "person_independent")]
    split: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    /// linear | exponential | sequential | sigmoid
    #[arg(long)]
    kind: String,
    #[arg(long)]
    eps_min: f64,
    #[arg(long)]
    eps_max: f64,
    #[arg(long, default_value_t = 7)]
    levels: u32,
    /// Sigmoid steepness.
    #[arg(long, default_value_t = 1.5)]
    k: f64,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    /// count | median | min
    #[arg(long)]
    kind: String,
    #[arg(long)]
    data: PathBuf,
    /// Mapping that assigns each record its budget from the trial rating.
    #[arg(long, default_value = "linear")]
    mapping: String,
    #[arg(long, default_value_t = 0.05)]
    eps_min: f64,
    #[arg(long, default_value_t = 5.0)]
    eps_max: f64,
    #[arg(long, default_value_t = 1.5)]
    k: f64,
    /// Sample-mechanism threshold; defaults to eps_max.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// laplace | randomized_response
    #[arg(long)]
    mechanism: String,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark config (JSON, BenchConfig fields); defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Derive budgets from cross-validated predicted levels.
    #[arg(long)]
    predicted: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Validate(args) => validate(args),
        Command::Detect(args) => detect(args),
        Command::Features(args) => features(args),
        Command::Stats(args) => stats(args),
        Command::Train(args) => train_cmd(args),
        Command::Eval(args) => eval_cmd(args),
        Command::Map(args) => map_cmd(args),
        Command::Query(args) => query_cmd(args),
        Command::Audit(args) => audit_cmd(args),
        Command::Bench(args) => bench_cmd(args),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let mut spec: SynthSpec = match &args.config {
        Some(path) => read_json(path)?,
        None => SynthSpec::uniform(4, 10, 0),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let dataset = synthesize_dataset(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    write_dataset(&dataset, &args.out.join("dataset.csv"))?;
    // Echo the resolved config for replay.
    write_json(&spec, &args.out.join("synth_config.json"))?;
    println!(
        "wrote {} trials for {} participants to {}",
        dataset.trials.len(),
        dataset.profiles.len(),
        args.out.display()
    );
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    let dataset = parse_dataset(&args.data)?;
    let report = validate_dataset(&dataset);
    if report.is_clean() {
        println!("ok: {} trials, {} participants", dataset.trials.len(), dataset.profiles.len());
        Ok(())
    } else {
        for v in &report.violations {
            eprintln!("{}: {}", v.location, v.message);
        }
        Err(Error::validation(format!("{} violations", report.violations.len())))
    }
}

fn detect(args: DetectArgs) -> Result<()> {
    let dataset = parse_dataset(&args.data)?;
    let config = DetectorConfig {
        dispersion_deg: args.dispersion_deg,
        min_fixation_ms: args.min_fixation_ms,
        max_fixation_ms: args.max_fixation_ms,
        velocity_thresh_deg_s: args.velocity_thresh,
    };
    std::fs::create_dir_all(&args.out)?;
    let mut fx_out = String::from(
        "trial,participant,stimulus,onset_ms,offset_ms,centroid_x_px,centroid_y_px,dispersion_deg,mean_pupil\n",
    );
    let mut sc_out =
        String::from("trial,participant,stimulus,onset_ms,offset_ms,amplitude_deg,peak_velocity_deg_s\n");
    for (i, trial) in dataset.trials.iter().enumerate() {
        for f in detect_fixations(&trial.samples, &dataset.geometry, &config)? {
            fx_out.push_str(&format!(
                "{i},{},{},{},{},{},{},{},{}\n",
                trial.participant_id,
                trial.stimulus_id,
                f.onset_ms,
                f.offset_ms,
                f.centroid_x_px,
                f.centroid_y_px,
                f.dispersion_deg,
                f.mean_pupil
            ));
        }
        for s in detect_saccades(&trial.samples, &dataset.geometry, config.velocity_thresh_deg_s)? {
            sc_out.push_str(&format!(
                "{i},{},{},{},{},{},{}\n",
                trial.participant_id,
                trial.stimulus_id,
                s.onset_ms,
                s.offset_ms,
                s.amplitude_deg,
                s.peak_velocity_deg_s
            ));
        }
    }
    std::fs::write(args.out.join("fixations.csv"), fx_out)?;
    std::fs::write(args.out.join("saccades.csv"), sc_out)?;
    write_json(&config, &args.out.join("detect_config.json"))?;
    println!("wrote event tables to {}", args.out.display());
    Ok(())
}

fn features(args: FeaturesArgs) -> Result<()> {
    let dataset = parse_dataset(&args.data)?;
    let rows = dataset_features(&dataset, &DetectorConfig::default(), args.context)?;
    let context_width = rows.iter().map(|f| f.context.len()).max().unwrap_or(0);
    let mut out = String::from("participant,stimulus,task,attribute,rating,valid");
    for name in FEATURE_NAMES {
        out.push(',');
        out.push_str(name);
    }
    for c in 0..context_width {
        out.push_str(&format!(",context_{c}"));
    }
    out.push('\n');
    for (trial, fv) in dataset.trials.iter().zip(&rows) {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            trial.participant_id,
            trial.stimulus_id,
            trial.task_kind.name(),
            trial.attribute,
            trial.rating,
            fv.valid
        ));
        for v in fv.numeric() {
            out.push_str(&format!(",{v}"));
        }
        for c in 0..context_width {
            let v = fv.context.get(c).copied().unwrap_or(0.0);
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&args.out, out)?;
    println!("wrote {} feature rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let dataset = parse_dataset(&args.data)?;
    let rows = dataset_features(&dataset, &DetectorConfig::default(), false)?;
    let feature_idx = FEATURE_NAMES
        .iter()
        .position(|n| *n == args.feature)
        .ok_or_else(|| Error::argument(format!("unknown feature '{}'", args.feature)))?;

    // Group feature values.
    let mut groups: std::collections::BTreeMap<String, Vec<f64>> = std::collections::BTreeMap::new();
    for (trial, fv) in dataset.trials.iter().zip(&rows) {
        if !fv.valid {
            continue;
        }
        let key = match args.group_by.as_str() {
            "rating" => format!("level_{}", trial.rating),
            "attribute" => trial.attribute.clone(),
            "expertise" => {
                let expert = dataset
                    .profile(&trial.participant_id)
                    .map(|p| p.privacy_expert)
                    .unwrap_or(false);
                if expert { "expert".into() } else { "non_expert".into() }
            }
            other => return Err(Error::argument(format!("unknown group-by '{other}'"))),
        };
        groups.entry(key).or_default().push(fv.numeric()[feature_idx]);
    }
    let names: Vec<String> = groups.keys().cloned().collect();
    let values: Vec<Vec<f64>> = groups.into_values().collect();
    if values.len() < 2 {
        return Err(Error::argument("need at least two groups"));
    }

    #[derive(serde::Serialize)]
    struct StatsOutput {
        feature: String,
        group_by: String,
        groups: Vec<String>,
        group_sizes: Vec<usize>,
        kruskal_wallis: gazedp_core::stats::TestResult,
        dunn: Vec<gazedp_core::stats::DunnPair>,
        mann_whitney: Option<gazedp_core::stats::TestResult>,
    }
    let output = StatsOutput {
        feature: args.feature.clone(),
        group_by: args.group_by.clone(),
        group_sizes: values.iter().map(Vec::len).collect(),
        kruskal_wallis: kruskal_wallis(&values)?,
        dunn: dunn_bonferroni(&values)?,
        mann_whitney: if values.len() == 2 {
            Some(mann_whitney_u(&values[0], &values[1])?)
        } else {
            None
        },
        groups: names,
    };
    let text = serde_json::to_string_pretty(&output)? + "\n";
    print!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn model_and_task(model: &str, task: &str, split: &str, seed: u64) -> Result<(ModelSpec, TaskSpec)> {
    let kind: ModelKind = model.parse()?;
    let task: PredictionTask = task.parse()?;
    let split: SplitKind = split.parse()?;
    Ok((ModelSpec::new(kind, seed), TaskSpec::new(task, split)))
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let dataset = parse_dataset(&args.data)?;
    let (model_spec, task_spec) =
        model_and_task(&args.model, &args.task, "person_independent", args.seed)?;
    let with_context = task_spec.task == PredictionTask::ContextualPrivacy;
    let rows = dataset_features(&dataset, &DetectorConfig::default(), with_context)?;
    let (_, labels) = derive_labels(&task_spec, &dataset)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, fv) in rows.iter().enumerate() {
        if let (true, Some(label)) = (fv.valid, labels[i]) {
            x.push(fv.full());
            y.push(label);
        }
    }
    let model = fit(&model_spec, &x, &y)?;
    std::fs::write(&args.out, model.to_json()? + "\n")?;
    println!("trained {} on {} trials -> {}", args.model, x.len(), args.out.display());
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let dataset = parse_dataset(&args.data)?;
    let (model_spec, task_spec) = model_and_task(&args.model, &args.task, &args.split, args.seed)?;
    let report = cross_validate(
        &model_spec,
        &task_spec,
        &dataset,
        args.folds,
        &DetectorConfig::default(),
    )?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    print!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn map_cmd(args: MapArgs) -> Result<()> {
    let kind: MappingKind = args.kind.parse()?;
    let spec = MappingSpec::new(kind, args.eps_min, args.eps_max, args.levels)?
        .with_steepness(args.k)?;
    let rows = mapping_table(&spec)?;
    let mut csv = String::from("l,g,epsilon,kind,eps_min,eps_max,k\n");
    println!("{:>3} {:>12} {:>12}", "l", "g", "epsilon");
    for row in &rows {
        println!("{:>3} {:>12.6} {:>12.6}", row.level, row.advantage, row.epsilon);
        csv.push_str(&format!(
            "{},{:.9},{:.9},{},{},{},{}\n",
            row.level, row.advantage, row.epsilon, kind.name(), args.eps_min, args.eps_max, args.k
        ));
    }
    if let Some(path) = &args.out {
        std::fs::write(path, csv)?;
    }
    Ok(())
}

fn query_cmd(args: QueryArgs) -> Result<()> {
    let kind: QueryKind = args.kind.parse()?;
    let dataset = parse_dataset(&args.data)?;
    let mapping_kind: MappingKind = args.mapping.parse()?;
    let spec = MappingSpec::new(mapping_kind, args.eps_min, args.eps_max, dataset.levels)?
        .with_steepness(args.k)?;

    let rows = dataset_features(&dataset, &DetectorConfig::default(), false)?;
    let mut records = Vec::new();
    for (trial, fv) in dataset.trials.iter().zip(&rows) {
        if kind == QueryKind::Count && trial.task_kind != TaskKind::Search {
            continue;
        }
        if !fv.valid {
            continue;
        }
        let value = match kind {
            QueryKind::Count => 1.0,
            _ => fv.fixation_count,
        };
        let eps = gazedp_core::dpmap::map_level(&spec, trial.rating)?.epsilon();
        records.push(BudgetedRecord::new(value, eps)?);
    }
    if records.is_empty() {
        return Err(Error::argument("no records match this query (count needs search trials)"));
    }
    let mech_spec = SampleMechanismSpec::new(args.threshold.unwrap_or(args.eps_max), args.seed)?;
    let result = pdp_query(kind, &records, &mech_spec)?;
    let text = serde_json::to_string_pretty(&result)? + "\n";
    print!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn audit_cmd(args: AuditArgs) -> Result<()> {
    let report = match args.mechanism.as_str() {
        "laplace" => {
            let d0 = vec![1.0; 20];
            let d1 = vec![1.0; 21];
            audit_advantage(&CountLaplace { epsilon: args.eps }, &d0, &d1, args.trials, args.seed)?
        }
        "randomized_response" => audit_advantage(
            &RandomizedResponse { epsilon: args.eps },
            &[0.0],
            &[1.0],
            args.trials,
            args.seed,
        )?,
        other => return Err(Error::argument(format!("unknown mechanism '{other}'"))),
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    print!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> Result<()> {
    let mut config: BenchConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => BenchConfig::default_skewed(0),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.predicted {
        config.predicted_levels = true;
    }
    let report = run_benchmark(&config)?;
    write_bench_outputs(&report, &args.out)?;
    println!("wrote benchmark report to {}", args.out.display());
    Ok(())
}
