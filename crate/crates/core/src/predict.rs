//! Perceived-privacy prediction tasks and their evaluation protocols.
//!
//! Labels derive from trials (rating-based tasks) or from participant
//! profiles (expertise, identification). Two split protocols are
//! supported: person-independent (one pooled model, tested on a held-out
//! slice of every participant's trials per fold) and person-specific
//! (one model per participant, folded within their own trials).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::events::{dataset_features, DetectorConfig};
use crate::models::{train, Model, ModelSpec};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionTask {
    BinaryPrivacy,
    LevelPrivacy,
    ContextualPrivacy,
    AttributeRecognition,
    Expertise,
    Identification,
}

impl PredictionTask {
    pub fn name(&self) -> &'static str {
        match self {
            PredictionTask::BinaryPrivacy => "binary_privacy",
            PredictionTask::LevelPrivacy => "level_privacy",
            PredictionTask::ContextualPrivacy => "contextual_privacy",
            PredictionTask::AttributeRecognition => "attribute_recognition",
            PredictionTask::Expertise => "expertise",
            PredictionTask::Identification => "identification",
        }
    }
}

impl std::str::FromStr for PredictionTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use PredictionTask::*;
        match s {
            "binary_privacy" => Ok(BinaryPrivacy),
            "level_privacy" => Ok(LevelPrivacy),
            "contextual_privacy" => Ok(ContextualPrivacy),
            "attribute_recognition" => Ok(AttributeRecognition),
            "expertise" => Ok(Expertise),
            "identification" => Ok(Identification),
            other => Err(Error::argument(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    PersonIndependent,
    PersonSpecific,
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "person_independent" => Ok(SplitKind::PersonIndependent),
            "person_specific" => Ok(SplitKind::PersonSpecific),
            other => Err(Error::argument(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: PredictionTask,
    pub split: SplitKind,
    /// Ratings at or below this are "private"; the mirror band at the top
    /// is "safe"; the middle is dropped. Binary task only.
    #[serde(default = "default_cutoff")]
    pub private_cutoff: u32,
}

fn default_cutoff() -> u32 {
    3
}

impl TaskSpec {
    pub fn new(task: PredictionTask, split: SplitKind) -> Self {
        TaskSpec {
            task,
            split,
            private_cutoff: default_cutoff(),
        }
    }
}

/// Class names plus a per-trial label (None = trial dropped by the task).
pub fn derive_labels(spec: &TaskSpec, dataset: &Dataset) -> Result<(Vec<String>, Vec<Option<usize>>)> {
    match spec.task {
        PredictionTask::BinaryPrivacy => {
            let cutoff = spec.private_cutoff;
            if cutoff == 0 || 2 * cutoff > dataset.levels {
                return Err(Error::argument(format!(
                    "private_cutoff {cutoff} incompatible with {} levels",
                    dataset.levels
                )));
            }
            let safe_floor = dataset.levels + 1 - cutoff;
            let labels = dataset
                .trials
                .iter()
                .map(|t| {
                    if t.rating <= cutoff {
                        Some(0)
                    } else if t.rating >= safe_floor {
                        Some(1)
                    } else {
                        None
                    }
                })
                .collect();
            Ok((vec!["private".into(), "safe".into()], labels))
        }
        PredictionTask::LevelPrivacy | PredictionTask::ContextualPrivacy => {
            let classes = (1..=dataset.levels).map(|l| format!("level_{l}")).collect();
            let labels = dataset
                .trials
                .iter()
                .map(|t| Some((t.rating - 1) as usize))
                .collect();
            Ok((classes, labels))
        }
        PredictionTask::AttributeRecognition => {
            let mut classes: Vec<String> =
                dataset.trials.iter().map(|t| t.attribute.clone()).collect();
            classes.sort();
            classes.dedup();
            let index: BTreeMap<&str, usize> = classes
                .iter()
                .enumerate()
                .map(|(i, c)| (c.as_str(), i))
                .collect();
            let labels = dataset
                .trials
                .iter()
                .map(|t| Some(index[t.attribute.as_str()]))
                .collect();
            Ok((classes, labels))
        }
        PredictionTask::Expertise => {
            let labels = dataset
                .trials
                .iter()
                .map(|t| {
                    dataset
                        .profile(&t.participant_id)
                        .map(|p| p.privacy_expert as usize)
                })
                .collect::<Option<Vec<usize>>>()
                .ok_or_else(|| Error::argument("trial references missing participant"))?
                .into_iter()
                .map(Some)
                .collect();
            Ok((vec!["non_expert".into(), "expert".into()], labels))
        }
        PredictionTask::Identification => {
            let mut classes: Vec<String> = dataset
                .profiles
                .iter()
                .map(|p| p.participant_id.clone())
                .collect();
            classes.sort();
            let index: BTreeMap<&str, usize> = classes
                .iter()
                .enumerate()
                .map(|(i, c)| (c.as_str(), i))
                .collect();
            let labels = dataset
                .trials
                .iter()
                .map(|t| index.get(t.participant_id.as_str()).copied())
                .collect();
            Ok((classes, labels))
        }
    }
}

/// Cross-validated evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub split: SplitKind,
    pub model: ModelSpec,
    pub classes: Vec<String>,
    /// Pooled accuracy: trace of the confusion matrix over its total.
    pub accuracy: f64,
    /// Person-specific protocol also reports the per-participant mean.
    pub mean_participant_accuracy: Option<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub folds: usize,
    pub evaluated: u64,
    pub c_map: Option<f64>,
    /// Participants or folds that could not be evaluated, with reasons.
    pub skipped: Vec<String>,
}

impl EvalReport {
    #[allow(clippy::too_many_arguments)]
    fn from_confusion(
        confusion: Vec<Vec<u64>>,
        classes: Vec<String>,
        task: &TaskSpec,
        model: &ModelSpec,
        folds: usize,
        c_map: Option<f64>,
        mean_participant_accuracy: Option<f64>,
        skipped: Vec<String>,
    ) -> Self {
        let k = classes.len();
        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let mut precision = vec![0.0; k];
        let mut recall = vec![0.0; k];
        for c in 0..k {
            let predicted: u64 = (0..k).map(|r| confusion[r][c]).sum();
            let support: u64 = confusion[c].iter().sum();
            precision[c] = if predicted > 0 {
                confusion[c][c] as f64 / predicted as f64
            } else {
                0.0
            };
            recall[c] = if support > 0 {
                confusion[c][c] as f64 / support as f64
            } else {
                0.0
            };
        }
        EvalReport {
            task: task.task.name().to_string(),
            split: task.split,
            model: *model,
            classes,
            accuracy: if total > 0 { trace as f64 / total as f64 } else { 0.0 },
            mean_participant_accuracy,
            precision,
            recall,
            confusion,
            folds,
            evaluated: total,
            c_map,
            skipped,
        }
    }
}

struct FoldData {
    /// Kept trial indices grouped per participant, shuffled.
    by_participant: Vec<(String, Vec<usize>)>,
}

fn prepare_folds(
    dataset: &Dataset,
    kept: &[usize],
    seed: u64,
) -> FoldData {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for &i in kept {
        groups
            .entry(dataset.trials[i].participant_id.clone())
            .or_default()
            .push(i);
    }
    let by_participant = groups
        .into_iter()
        .enumerate()
        .map(|(ordinal, (id, mut indices))| {
            let mut rng = rng_from_seed(derive_seed(seed, "folds", ordinal as u64));
            indices.shuffle(&mut rng);
            (id, indices)
        })
        .collect();
    FoldData { by_participant }
}

/// Train once on explicit matrices (the low-level entry the protocols
/// build on).
pub fn fit(model: &ModelSpec, x: &[Vec<f64>], y: &[usize]) -> Result<Model> {
    train(model, x, y)
}

/// Cross-validate `model` on `task` over `dataset`.
pub fn cross_validate(
    model: &ModelSpec,
    task: &TaskSpec,
    dataset: &Dataset,
    folds: usize,
    detectors: &DetectorConfig,
) -> Result<EvalReport> {
    Ok(cross_validate_with_predictions(model, task, dataset, folds, detectors)?.0)
}

/// Like [`cross_validate`] but also returns each trial's out-of-fold
/// predicted class (None when the trial was dropped or never tested).
pub fn cross_validate_with_predictions(
    model: &ModelSpec,
    task: &TaskSpec,
    dataset: &Dataset,
    folds: usize,
    detectors: &DetectorConfig,
) -> Result<(EvalReport, Vec<Option<usize>>)> {
    if folds < 2 {
        return Err(Error::argument(format!("folds must be >= 2, got {folds}")));
    }
    let report = crate::dataset::validate_dataset(dataset);
    if let Some(v) = report.violations.first() {
        return Err(Error::validation(format!("{}: {}", v.location, v.message)));
    }
    let with_context = task.task == PredictionTask::ContextualPrivacy;
    let features = dataset_features(dataset, detectors, with_context)?;
    let rows: Vec<Vec<f64>> = features.iter().map(|f| f.full()).collect();
    let (classes, labels) = derive_labels(task, dataset)?;
    let kept: Vec<usize> = (0..dataset.trials.len())
        .filter(|&i| features[i].valid && labels[i].is_some())
        .collect();
    if kept.is_empty() {
        return Err(Error::argument("no usable trials for this task"));
    }
    let k = classes.len();
    let fold_data = prepare_folds(dataset, &kept, model.seed);

    let mut confusion = vec![vec![0u64; k]; k];
    let mut predictions: Vec<Option<usize>> = vec![None; dataset.trials.len()];
    let mut scores: Vec<Option<Vec<f64>>> = vec![None; dataset.trials.len()];
    let mut skipped = Vec::new();
    let mut participant_acc: Vec<f64> = Vec::new();

    match task.split {
        SplitKind::PersonIndependent => {
            for fold in 0..folds {
                let mut test: Vec<usize> = Vec::new();
                let mut train_idx: Vec<usize> = Vec::new();
                for (_, indices) in &fold_data.by_participant {
                    for (j, &idx) in indices.iter().enumerate() {
                        if j % folds == fold {
                            test.push(idx);
                        } else {
                            train_idx.push(idx);
                        }
                    }
                }
                if test.is_empty() {
                    continue;
                }
                match fit_fold(model, &rows, &labels, &train_idx) {
                    Ok(fitted) => {
                        score_fold(&fitted, &rows, &labels, &test, k, &mut confusion, &mut predictions, &mut scores);
                    }
                    Err(e) => skipped.push(format!("fold {fold}: {e}")),
                }
            }
        }
        SplitKind::PersonSpecific => {
            for (participant, indices) in &fold_data.by_participant {
                if indices.len() < folds {
                    skipped.push(format!(
                        "{participant}: {} trials < {folds} folds",
                        indices.len()
                    ));
                    continue;
                }
                let mut local_hits = 0u64;
                let mut local_total = 0u64;
                for fold in 0..folds {
                    let test: Vec<usize> = indices
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| j % folds == fold)
                        .map(|(_, &i)| i)
                        .collect();
                    let train_idx: Vec<usize> = indices
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| j % folds != fold)
                        .map(|(_, &i)| i)
                        .collect();
                    match fit_fold(model, &rows, &labels, &train_idx) {
                        Ok(fitted) => {
                            let (hits, total) = score_fold(
                                &fitted,
                                &rows,
                                &labels,
                                &test,
                                k,
                                &mut confusion,
                                &mut predictions,
                                &mut scores,
                            );
                            local_hits += hits;
                            local_total += total;
                        }
                        Err(e) => skipped.push(format!("{participant} fold {fold}: {e}")),
                    }
                }
                if local_total > 0 {
                    participant_acc.push(local_hits as f64 / local_total as f64);
                }
            }
        }
    }

    let c_map = if task.task == PredictionTask::AttributeRecognition {
        let mut score_rows = Vec::new();
        let mut label_rows = Vec::new();
        for &i in &kept {
            if let (Some(s), Some(l)) = (&scores[i], labels[i]) {
                score_rows.push(s.clone());
                label_rows.push(l);
            }
        }
        if score_rows.is_empty() {
            None
        } else {
            Some(class_mean_average_precision(&score_rows, &label_rows)?.c_map)
        }
    } else {
        None
    };

    let mean_participant_accuracy = if task.split == SplitKind::PersonSpecific
        && !participant_acc.is_empty()
    {
        Some(participant_acc.iter().sum::<f64>() / participant_acc.len() as f64)
    } else {
        None
    };

    let report = EvalReport::from_confusion(
        confusion,
        classes,
        task,
        model,
        folds,
        c_map,
        mean_participant_accuracy,
        skipped,
    );
    Ok((report, predictions))
}

fn fit_fold(
    model: &ModelSpec,
    rows: &[Vec<f64>],
    labels: &[Option<usize>],
    train_idx: &[usize],
) -> Result<Model> {
    let x: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
    let y: Vec<usize> = train_idx
        .iter()
        .map(|&i| labels[i].expect("kept trials are labelled"))
        .collect();
    train(model, &x, &y)
}

#[allow(clippy::too_many_arguments)]
fn score_fold(
    fitted: &Model,
    rows: &[Vec<f64>],
    labels: &[Option<usize>],
    test: &[usize],
    k: usize,
    confusion: &mut [Vec<u64>],
    predictions: &mut [Option<usize>],
    scores: &mut [Option<Vec<f64>>],
) -> (u64, u64) {
    let mut hits = 0u64;
    for &i in test {
        let truth = labels[i].expect("kept trials are labelled");
        let mut class_scores = fitted.scores(&rows[i]);
        class_scores.resize(k, f64::NEG_INFINITY);
        let mut predicted = 0usize;
        for (c, s) in class_scores.iter().enumerate() {
            if *s > class_scores[predicted] {
                predicted = c;
            }
        }
        confusion[truth][predicted] += 1;
        predictions[i] = Some(predicted);
        scores[i] = Some(class_scores);
        if predicted == truth {
            hits += 1;
        }
    }
    (hits, test.len() as u64)
}

/// Macro-averaged average precision over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmapResult {
    pub c_map: f64,
    /// Classes with no positive example, excluded from the average.
    pub excluded_classes: Vec<usize>,
}

/// Average precision per class by step interpolation of the PR curve
/// (precision accumulated at each positive, averaged over positives),
/// macro-averaged across classes that have at least one positive.
pub fn class_mean_average_precision(scores: &[Vec<f64>], labels: &[usize]) -> Result<CmapResult> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::argument("scores and labels must align and be nonempty"));
    }
    let k = scores[0].len();
    if scores.iter().any(|row| row.len() != k) {
        return Err(Error::argument("score rows must share one width"));
    }
    let mut aps = Vec::new();
    let mut excluded = Vec::new();
    for class in 0..k {
        let positives = labels.iter().filter(|&&l| l == class).count();
        if positives == 0 {
            excluded.push(class);
            continue;
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b][class].total_cmp(&scores[a][class]).then(a.cmp(&b)));
        let mut seen_pos = 0usize;
        let mut ap = 0.0;
        for (rank, &idx) in order.iter().enumerate() {
            if labels[idx] == class {
                seen_pos += 1;
                ap += seen_pos as f64 / (rank + 1) as f64;
            }
        }
        aps.push(ap / positives as f64);
    }
    if aps.is_empty() {
        return Err(Error::argument("every class lacks positives"));
    }
    Ok(CmapResult {
        c_map: aps.iter().sum::<f64>() / aps.len() as f64,
        excluded_classes: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::synth::SynthSpec;

    fn quick_eval(
        kind: ModelKind,
        task: PredictionTask,
        split: SplitKind,
        signal: f64,
        seed: u64,
    ) -> EvalReport {
        let spec = SynthSpec::uniform(6, 30, seed).with_signal(signal);
        let dataset = crate::synth::synthesize_dataset(&spec).unwrap();
        cross_validate(
            &ModelSpec::new(kind, seed),
            &TaskSpec::new(task, split),
            &dataset,
            5,
            &DetectorConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn confusion_matrix_is_consistent() {
        let report = quick_eval(
            ModelKind::DecisionTree,
            PredictionTask::BinaryPrivacy,
            SplitKind::PersonIndependent,
            0.5,
            1,
        );
        let total: u64 = report.confusion.iter().flatten().sum();
        assert_eq!(total, report.evaluated);
        let trace: u64 = (0..report.classes.len())
            .map(|i| report.confusion[i][i])
            .sum();
        assert!((report.accuracy - trace as f64 / total as f64).abs() < 1e-12);
        // Row sums match per-class support counted through recall.
        for (c, row) in report.confusion.iter().enumerate() {
            let support: u64 = row.iter().sum();
            if support > 0 {
                assert!((report.recall[c] - row[c] as f64 / support as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_task_on_strong_signal_is_accurate() {
        let report = quick_eval(
            ModelKind::LogisticRegression,
            PredictionTask::BinaryPrivacy,
            SplitKind::PersonIndependent,
            1.0,
            2,
        );
        assert!(report.accuracy > 0.8, "accuracy {}", report.accuracy);
    }

    #[test]
    fn signal_free_level_task_sits_at_chance() {
        // Single runs have correlated predictions (wider than binomial),
        // so average a few seeds before comparing against chance.
        let accs: Vec<f64> = (0..5)
            .map(|seed| {
                quick_eval(
                    ModelKind::LogisticRegression,
                    PredictionTask::LevelPrivacy,
                    SplitKind::PersonIndependent,
                    0.0,
                    100 + seed,
                )
                .accuracy
            })
            .collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let chance = 1.0 / 7.0;
        assert!(
            (mean - chance).abs() < 0.05,
            "mean accuracy {mean} vs chance {chance} ({accs:?})"
        );
    }

    #[test]
    fn every_kept_trial_is_tested_exactly_once() {
        // The fold partition must cover each participant's kept trials
        // exactly once across test slices.
        let spec = SynthSpec::uniform(5, 23, 6).with_signal(0.3);
        let dataset = crate::synth::synthesize_dataset(&spec).unwrap();
        let task = TaskSpec::new(PredictionTask::LevelPrivacy, SplitKind::PersonIndependent);
        let (report, predictions) = cross_validate_with_predictions(
            &ModelSpec::new(ModelKind::DecisionTree, 1),
            &task,
            &dataset,
            5,
            &DetectorConfig::default(),
        )
        .unwrap();
        let predicted = predictions.iter().filter(|p| p.is_some()).count() as u64;
        assert_eq!(predicted, report.evaluated);
        assert_eq!(predicted, 5 * 23);
    }

    #[test]
    fn person_specific_reports_participant_mean() {
        let report = quick_eval(
            ModelKind::Knn,
            PredictionTask::BinaryPrivacy,
            SplitKind::PersonSpecific,
            1.0,
            4,
        );
        assert!(report.mean_participant_accuracy.is_some());
    }

    #[test]
    fn attribute_task_reports_cmap() {
        let report = quick_eval(
            ModelKind::RandomForest,
            PredictionTask::AttributeRecognition,
            SplitKind::PersonIndependent,
            0.5,
            8,
        );
        let c_map = report.c_map.expect("attribute task computes C-MAP");
        assert!((0.0..=1.0).contains(&c_map), "c_map {c_map}");
        assert_eq!(report.classes.len(), 9);
    }

    #[test]
    fn contextual_task_uses_demographic_features() {
        // The contextual task must run with the widened feature rows and
        // the same label space as the level task.
        let spec = SynthSpec::uniform(4, 20, 12).with_signal(0.5);
        let dataset = crate::synth::synthesize_dataset(&spec).unwrap();
        let report = cross_validate(
            &ModelSpec::new(ModelKind::LogisticRegression, 2),
            &TaskSpec::new(PredictionTask::ContextualPrivacy, SplitKind::PersonIndependent),
            &dataset,
            4,
            &DetectorConfig::default(),
        )
        .unwrap();
        assert_eq!(report.classes.len(), 7);
        assert_eq!(report.evaluated, 80);
    }

    #[test]
    fn sparse_participants_are_skipped_and_reported() {
        let spec = SynthSpec::uniform(3, 4, 9).with_signal(0.0);
        let dataset = crate::synth::synthesize_dataset(&spec).unwrap();
        let report = cross_validate(
            &ModelSpec::new(ModelKind::DecisionTree, 0),
            &TaskSpec::new(PredictionTask::LevelPrivacy, SplitKind::PersonSpecific),
            &dataset,
            5,
            &DetectorConfig::default(),
        )
        .unwrap();
        assert!(!report.skipped.is_empty());
    }

    #[test]
    fn monotone_signal_response_for_logistic_regression() {
        // Median over seeds of held-out accuracy must not decrease with
        // signal strength.
        let mut medians = Vec::new();
        for &signal in &[0.0, 0.5, 1.0] {
            let mut accs: Vec<f64> = (0..5)
                .map(|seed| {
                    quick_eval(
                        ModelKind::LogisticRegression,
                        PredictionTask::BinaryPrivacy,
                        SplitKind::PersonIndependent,
                        signal,
                        40 + seed,
                    )
                    .accuracy
                })
                .collect();
            accs.sort_by(f64::total_cmp);
            medians.push(accs[2]);
        }
        assert!(
            medians[0] <= medians[1] + 0.05 && medians[1] <= medians[2] + 0.05,
            "medians {medians:?}"
        );
        assert!(medians[2] > medians[0], "medians {medians:?}");
    }

    #[test]
    fn cmap_perfect_scores() {
        let labels = vec![0, 1, 2, 0, 1, 2];
        let scores: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                let mut row = vec![0.0; 3];
                row[l] = 1.0;
                row
            })
            .collect();
        let r = class_mean_average_precision(&scores, &labels).unwrap();
        assert!((r.c_map - 1.0).abs() < 1e-12);
        assert!(r.excluded_classes.is_empty());
    }

    #[test]
    fn cmap_single_class_ranked_on_top() {
        // Class 0 positives all outrank the negatives: AP = 1 for class 0.
        let labels = vec![0, 0, 1, 1];
        let scores = vec![
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.3, 0.6],
            vec![0.2, 0.9],
        ];
        let r = class_mean_average_precision(&scores, &labels).unwrap();
        assert!((r.c_map - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cmap_random_scores_near_prior() {
        use rand::Rng;
        let mut deviations = Vec::new();
        for draw in 0..30u64 {
            let mut rng = rng_from_seed(1000 + draw);
            let n = 200;
            let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
            let scores: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
                .collect();
            let r = class_mean_average_precision(&scores, &labels).unwrap();
            deviations.push(r.c_map - 0.25);
        }
        let mean_dev = deviations.iter().sum::<f64>() / deviations.len() as f64;
        assert!(mean_dev.abs() < 0.05, "mean deviation {mean_dev}");
    }

    #[test]
    fn cmap_excludes_missing_classes() {
        let labels = vec![0, 0, 2];
        let scores = vec![
            vec![0.9, 0.0, 0.1],
            vec![0.8, 0.1, 0.0],
            vec![0.1, 0.0, 0.9],
        ];
        let r = class_mean_average_precision(&scores, &labels).unwrap();
        assert_eq!(r.excluded_classes, vec![1]);
    }
}
