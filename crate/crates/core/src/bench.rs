//! End-to-end benchmark: synthesize a rated dataset, derive per-record
//! budgets from privacy levels under each mapping, run the personalized
//! mechanisms, and score utility against the plain, static, and random
//! baselines.
//!
//! Per repetition the count query runs over the search-task trials (one
//! record per searched document), median and min over per-trial fixation
//! counts, and the learning tasks regress response time on the gaze
//! features with budget weighting or budget sampling.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TaskKind};
use crate::dpmap::{map_level, mapping_table, MappingKind, MappingSpec};
use crate::error::{Error, Result};
use crate::events::{dataset_features, DetectorConfig, FeatureVector};
use crate::mechanisms::{pdp_query, BudgetedRecord, QueryKind, SampleMechanismSpec};
use crate::models::{ModelKind, ModelSpec};
use crate::predict::{cross_validate_with_predictions, PredictionTask, SplitKind, TaskSpec};
use crate::regression::{
    dp_regression, predict_linear, r_squared, ridge, RegressionHyper, RegressionStrategy,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::synth::{synthesize_dataset, SynthSpec};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchTask {
    Count,
    Median,
    Min,
    RegressionWeighting,
    RegressionSampling,
}

impl BenchTask {
    pub const ALL: [BenchTask; 5] = [
        BenchTask::Count,
        BenchTask::Median,
        BenchTask::Min,
        BenchTask::RegressionWeighting,
        BenchTask::RegressionSampling,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BenchTask::Count => "count",
            BenchTask::Median => "median",
            BenchTask::Min => "min",
            BenchTask::RegressionWeighting => "regression_weighting",
            BenchTask::RegressionSampling => "regression_sampling",
        }
    }

    pub fn is_query(&self) -> bool {
        matches!(self, BenchTask::Count | BenchTask::Median | BenchTask::Min)
    }
}

impl std::str::FromStr for BenchTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchTask::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown bench task '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Plain,
    Static,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "mapping")]
pub enum Condition {
    Plain,
    Static,
    Random,
    Mapped(MappingKind),
}

impl Condition {
    pub fn name(&self) -> String {
        match self {
            Condition::Plain => "plain".into(),
            Condition::Static => "static".into(),
            Condition::Random => "random".into(),
            Condition::Mapped(kind) => kind.name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub synth: SynthSpec,
    pub mappings: Vec<MappingSpec>,
    pub tasks: Vec<BenchTask>,
    pub baselines: Vec<Baseline>,
    pub repetitions: usize,
    pub seed: u64,
    /// Derive budgets from cross-validated predicted levels instead of
    /// the recorded ratings.
    #[serde(default)]
    pub predicted_levels: bool,
    /// Sample-mechanism threshold for the personalized conditions;
    /// defaults to the first mapping's eps_max.
    #[serde(default)]
    pub threshold_t: Option<f64>,
}

impl BenchConfig {
    /// The default desk-scale configuration: private-skewed ratings with a
    /// strong gaze signal, a dozen searched documents for the count query,
    /// and all four mappings against all three baselines.
    pub fn default_skewed(seed: u64) -> Self {
        let mut synth = SynthSpec::skewed_private(6, 20, seed).with_signal(1.0);
        synth.n_search_trials_per_participant = 2;
        let mappings = MappingKind::ALL
            .iter()
            .map(|&kind| {
                MappingSpec::new(kind, 0.05, 5.0, 7)
                    .expect("valid default mapping")
            })
            .collect();
        BenchConfig {
            synth,
            mappings,
            tasks: BenchTask::ALL.to_vec(),
            baselines: vec![Baseline::Plain, Baseline::Static, Baseline::Random],
            repetitions: 30,
            seed,
            predicted_levels: false,
            threshold_t: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.synth.check()?;
        if self.repetitions < 1 {
            return Err(Error::argument("repetitions must be >= 1"));
        }
        if self.tasks.is_empty() {
            return Err(Error::argument("at least one task required"));
        }
        if self.mappings.is_empty() {
            return Err(Error::argument("at least one mapping required"));
        }
        for m in &self.mappings {
            m.check()?;
            if m.levels != self.synth.levels {
                return Err(Error::argument(format!(
                    "mapping levels {} disagree with synthesis levels {}",
                    m.levels, self.synth.levels
                )));
            }
        }
        if self.tasks.contains(&BenchTask::Count)
            && self.synth.n_search_trials_per_participant == 0
        {
            return Err(Error::argument(
                "count task needs n_search_trials_per_participant > 0",
            ));
        }
        if let Some(t) = self.threshold_t {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::argument(format!("threshold_t must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn conditions(&self) -> Vec<Condition> {
        let mut conditions: Vec<Condition> = self
            .baselines
            .iter()
            .map(|b| match b {
                Baseline::Plain => Condition::Plain,
                Baseline::Static => Condition::Static,
                Baseline::Random => Condition::Random,
            })
            .collect();
        conditions.extend(self.mappings.iter().map(|m| Condition::Mapped(m.kind)));
        conditions
    }
}

/// Utility score. For query tasks `noisy_answer` is the mechanism output
/// and the score is `100 * max(0, 1 - |noisy - true| / max(|true|, 1))`;
/// for learning tasks `noisy_answer` is the held-out R^2, clamped to
/// [0, 1].
pub fn utility(task: BenchTask, true_answer: f64, noisy_answer: f64) -> f64 {
    if task.is_query() {
        let denom = true_answer.abs().max(1.0);
        100.0 * (1.0 - (noisy_answer - true_answer).abs() / denom).max(0.0)
    } else {
        noisy_answer.clamp(0.0, 1.0)
    }
}

/// One (task, condition) cell of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub task: String,
    pub condition: String,
    pub utility_mean: f64,
    pub utility_std: f64,
    pub utility_median: f64,
    /// Mean absolute error of the raw answers (query tasks only).
    pub raw_error_mean: Option<f64>,
    pub repetitions: usize,
    /// Per-repetition utilities, in repetition order.
    pub utilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub conditions: Vec<String>,
    pub tasks: Vec<String>,
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    pub fn cell(&self, task: BenchTask, condition: &str) -> Option<&BenchCell> {
        self.cells
            .iter()
            .find(|c| c.task == task.name() && c.condition == condition)
    }
}

/// Privacy levels used for budget assignment, one per trial.
fn trial_levels(config: &BenchConfig, dataset: &Dataset, rep: u64) -> Result<Vec<u32>> {
    let truth: Vec<u32> = dataset.trials.iter().map(|t| t.rating).collect();
    if !config.predicted_levels {
        return Ok(truth);
    }
    let model = ModelSpec::new(
        ModelKind::LogisticRegression,
        derive_seed(config.seed, "predict", rep),
    );
    let task = TaskSpec::new(PredictionTask::LevelPrivacy, SplitKind::PersonIndependent);
    let (_, predictions) = cross_validate_with_predictions(
        &model,
        &task,
        dataset,
        5,
        &DetectorConfig::default(),
    )?;
    Ok(predictions
        .iter()
        .zip(&truth)
        .map(|(p, &t)| p.map(|class| class as u32 + 1).unwrap_or(t))
        .collect())
}

struct RepetitionData {
    dataset: Dataset,
    features: Vec<FeatureVector>,
    levels: Vec<u32>,
}

fn budgets_for(
    condition: Condition,
    config: &BenchConfig,
    data: &RepetitionData,
    trial_indices: &[usize],
    rep: u64,
) -> Result<Vec<f64>> {
    let reference = &config.mappings[0];
    match condition {
        Condition::Plain => Err(Error::argument("the plain condition carries no budgets")),
        Condition::Static => {
            // Worst case over the budgets the reference mapping would hand
            // out to these records.
            let mapped: Result<Vec<f64>> = trial_indices
                .iter()
                .map(|&i| Ok(map_level(reference, data.levels[i])?.epsilon()))
                .collect();
            let min = mapped?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            Ok(vec![min; trial_indices.len()])
        }
        Condition::Random => {
            let mut rng = rng_from_seed(derive_seed(config.seed, "random-budgets", rep));
            Ok(trial_indices
                .iter()
                .map(|_| reference.eps_min + rng.random::<f64>() * (reference.eps_max - reference.eps_min))
                .collect())
        }
        Condition::Mapped(kind) => {
            let spec = config
                .mappings
                .iter()
                .find(|m| m.kind == kind)
                .expect("condition built from config");
            trial_indices
                .iter()
                .map(|&i| Ok(map_level(spec, data.levels[i])?.epsilon()))
                .collect()
        }
    }
}

fn run_query_task(
    task: BenchTask,
    condition: Condition,
    config: &BenchConfig,
    data: &RepetitionData,
    rep: u64,
    condition_idx: usize,
) -> Result<(f64, f64)> {
    // Count: one record per searched document. Median/min: per-trial
    // fixation counts.
    let trial_indices: Vec<usize> = match task {
        BenchTask::Count => (0..data.dataset.trials.len())
            .filter(|&i| data.dataset.trials[i].task_kind == TaskKind::Search)
            .collect(),
        _ => (0..data.dataset.trials.len()).collect(),
    };
    let values: Vec<f64> = match task {
        BenchTask::Count => vec![1.0; trial_indices.len()],
        _ => trial_indices
            .iter()
            .map(|&i| data.features[i].fixation_count)
            .collect(),
    };
    let true_answer = match task {
        BenchTask::Count => values.len() as f64,
        BenchTask::Median => {
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            sorted[(sorted.len() - 1) / 2]
        }
        BenchTask::Min => values.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
        _ => unreachable!("query tasks only"),
    };

    if condition == Condition::Plain {
        return Ok((true_answer, true_answer));
    }

    let budgets = budgets_for(condition, config, data, &trial_indices, rep)?;
    let records: Vec<BudgetedRecord> = values
        .iter()
        .zip(&budgets)
        .map(|(&v, &eps)| BudgetedRecord::new(v, eps))
        .collect::<Result<_>>()?;
    // Static answers at its own uniform budget on the full data; the
    // personalized conditions answer at the analyst threshold (the
    // mapping ceiling unless configured).
    let threshold = match condition {
        Condition::Static => budgets[0],
        _ => config.threshold_t.unwrap_or(config.mappings[0].eps_max),
    };
    let kind = match task {
        BenchTask::Count => QueryKind::Count,
        BenchTask::Median => QueryKind::Median,
        BenchTask::Min => QueryKind::Min,
        _ => unreachable!(),
    };
    let spec = SampleMechanismSpec::new(
        threshold,
        derive_seed(config.seed, "query", rep * 64 + condition_idx as u64),
    )?;
    let result = pdp_query(kind, &records, &spec)?;
    Ok((true_answer, result.value.scalar().expect("query output")))
}

fn zscore_fit(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut sd = vec![0.0; d];
    for r in rows {
        for (s, (v, m)) in sd.iter_mut().zip(r.iter().zip(&mean)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut sd {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    (mean, sd)
}

fn zscore_apply(rows: &[Vec<f64>], mean: &[f64], sd: &[f64]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(mean.iter().zip(sd))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect()
}

fn run_regression_task(
    task: BenchTask,
    condition: Condition,
    config: &BenchConfig,
    data: &RepetitionData,
    rep: u64,
) -> Result<f64> {
    let strategy = match task {
        BenchTask::RegressionWeighting => RegressionStrategy::Weighting,
        BenchTask::RegressionSampling => RegressionStrategy::Sampling,
        _ => unreachable!("learning tasks only"),
    };
    // Gaze features predict response time; the target is excluded from
    // the feature block.
    let usable: Vec<usize> = (0..data.dataset.trials.len())
        .filter(|&i| data.features[i].valid)
        .collect();
    let rows: Vec<Vec<f64>> = usable
        .iter()
        .map(|&i| data.features[i].numeric()[..9].to_vec())
        .collect();
    let targets: Vec<f64> = usable
        .iter()
        .map(|&i| data.dataset.trials[i].response_time_ms / 1000.0)
        .collect();

    // Deterministic 80/20 split.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = rng_from_seed(derive_seed(config.seed, "reg-split", rep));
    order.shuffle(&mut rng);
    let n_test = (rows.len() / 5).max(1);
    let (test_pos, train_pos) = order.split_at(n_test);

    let gather = |positions: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
        let x = positions.iter().map(|&p| rows[p].clone()).collect();
        let y = positions.iter().map(|&p| targets[p]).collect();
        let idx = positions.iter().map(|&p| usable[p]).collect();
        (x, y, idx)
    };
    let (train_x, train_y, train_trials) = gather(train_pos);
    let (test_x, test_y, _) = gather(test_pos);

    let (mx, sx) = zscore_fit(&train_x);
    let train_xz = zscore_apply(&train_x, &mx, &sx);
    let test_xz = zscore_apply(&test_x, &mx, &sx);
    let (my, sy) = {
        let wrapped: Vec<Vec<f64>> = train_y.iter().map(|&v| vec![v]).collect();
        let (m, s) = zscore_fit(&wrapped);
        (m[0], s[0])
    };
    let train_yz: Vec<f64> = train_y.iter().map(|v| (v - my) / sy).collect();
    let test_yz: Vec<f64> = test_y.iter().map(|v| (v - my) / sy).collect();

    let coefficients = if condition == Condition::Plain {
        // Tiny penalty: the gaze feature block contains exact
        // collinearities (saccade count tracks fixation count).
        ridge(&train_xz, &train_yz, 1e-6)?
    } else {
        let budgets = budgets_for(condition, config, data, &train_trials, rep)?;
        let hyper = RegressionHyper {
            clip_norm: 1.0,
            epochs: 60,
            rate: 0.1,
            seed: derive_seed(config.seed, "reg", rep),
            noiseless: false,
            threshold: Some(config.threshold_t.unwrap_or(config.mappings[0].eps_max)),
        };
        let ids: Vec<u64> = train_trials.iter().map(|&i| i as u64).collect();
        let fitted = dp_regression(&train_xz, &train_yz, &budgets, strategy, &hyper, Some(&ids))?;
        match fitted.value {
            crate::mechanisms::MechanismValue::Coefficients(c) => c,
            _ => unreachable!("regression emits coefficients"),
        }
    };
    let r2 = r_squared(&test_yz, &predict_linear(&coefficients, &test_xz));
    Ok(r2.clamp(0.0, 1.0))
}

/// Run the full benchmark described by `config`.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.check()?;
    let conditions = config.conditions();
    let mut utilities: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::new(); conditions.len()]; config.tasks.len()];
    let mut raw_errors: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::new(); conditions.len()]; config.tasks.len()];

    for rep in 0..config.repetitions as u64 {
        let mut synth = config.synth.clone();
        synth.seed = derive_seed(config.seed, "rep", rep);
        let dataset = synthesize_dataset(&synth)?;
        let features = dataset_features(&dataset, &DetectorConfig::default(), false)?;
        let levels = trial_levels(config, &dataset, rep)?;
        let data = RepetitionData {
            dataset,
            features,
            levels,
        };

        for (ti, &task) in config.tasks.iter().enumerate() {
            for (ci, &condition) in conditions.iter().enumerate() {
                if task.is_query() {
                    let (truth, noisy) =
                        run_query_task(task, condition, config, &data, rep, ci)?;
                    utilities[ti][ci].push(utility(task, truth, noisy));
                    raw_errors[ti][ci].push((noisy - truth).abs());
                } else {
                    let r2 = run_regression_task(task, condition, config, &data, rep)?;
                    utilities[ti][ci].push(utility(task, 1.0, r2));
                }
            }
        }
    }

    let mut cells = Vec::new();
    for (ti, &task) in config.tasks.iter().enumerate() {
        for (ci, condition) in conditions.iter().enumerate() {
            let series = &utilities[ti][ci];
            let n = series.len() as f64;
            let mean = series.iter().sum::<f64>() / n;
            let std = (series.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / n).sqrt();
            let mut sorted = series.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[sorted.len() / 2];
            let raw = &raw_errors[ti][ci];
            cells.push(BenchCell {
                task: task.name().into(),
                condition: condition.name(),
                utility_mean: mean,
                utility_std: std,
                utility_median: median,
                raw_error_mean: if raw.is_empty() {
                    None
                } else {
                    Some(raw.iter().sum::<f64>() / raw.len() as f64)
                },
                repetitions: series.len(),
                utilities: series.clone(),
            });
        }
    }

    Ok(BenchReport {
        config: config.clone(),
        conditions: conditions.iter().map(Condition::name).collect(),
        tasks: config.tasks.iter().map(|t| t.name().into()).collect(),
        cells,
    })
}

/// Write the report artifacts: full JSON, the grid CSV, the mapping
/// tables, and the per-repetition plot data.
pub fn write_bench_outputs(report: &BenchReport, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;

    let mut grid = String::from("task");
    for c in &report.conditions {
        grid.push(',');
        grid.push_str(c);
    }
    grid.push('\n');
    for t in &report.tasks {
        grid.push_str(t);
        for c in &report.conditions {
            let cell = report
                .cells
                .iter()
                .find(|cell| &cell.task == t && &cell.condition == c)
                .expect("cell exists for every task x condition");
            grid.push_str(&format!(",{:.4}", cell.utility_mean));
        }
        grid.push('\n');
    }
    std::fs::write(dir.join("report.csv"), grid)?;

    let mut mapping_csv = String::from("kind,eps_min,eps_max,k,l,g,epsilon\n");
    for spec in &report.config.mappings {
        for row in mapping_table(spec)? {
            mapping_csv.push_str(&format!(
                "{},{},{},{},{},{:.9},{:.9}\n",
                spec.kind.name(),
                spec.eps_min,
                spec.eps_max,
                spec.k,
                row.level,
                row.advantage,
                row.epsilon
            ));
        }
    }
    std::fs::write(dir.join("mapping_table.csv"), mapping_csv)?;

    let mut plot = String::from("x,y,series\n");
    for cell in &report.cells {
        for (rep, u) in cell.utilities.iter().enumerate() {
            plot.push_str(&format!("{rep},{u:.6},{}/{}\n", cell.task, cell.condition));
        }
    }
    std::fs::write(dir.join("plotdata.csv"), plot)?;
    Ok(())
}
