//! Differentially private primitives and the personalized sample
//! mechanism.
//!
//! The sample mechanism includes record `i` with probability
//! `(e^eps_i - 1) / (e^t - 1)` (capped at 1) and answers the query on the
//! subsample with a `t`-DP mechanism: Laplace for counts, the exponential
//! mechanism over the observed values for medians and minimums.

use serde::{Deserialize, Serialize};

use crate::dpmap::PrivacyBudget;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, sample_laplace};
use rand::Rng;

/// One record of a personalized-DP computation: a value and the privacy
/// budget its owner granted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetedRecord {
    pub value: f64,
    pub epsilon: f64,
}

impl BudgetedRecord {
    pub fn new(value: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::argument(format!(
                "record budget must be positive, got {epsilon}"
            )));
        }
        Ok(BudgetedRecord { value, epsilon })
    }
}

/// Threshold configuration of the sample mechanism. The mechanism run on
/// the subsample spends `threshold_t` per query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMechanismSpec {
    pub threshold_t: f64,
    pub seed: u64,
}

impl SampleMechanismSpec {
    pub fn new(threshold_t: f64, seed: u64) -> Result<Self> {
        if !(threshold_t.is_finite() && threshold_t > 0.0) {
            return Err(Error::argument(format!(
                "threshold must be positive, got {threshold_t}"
            )));
        }
        Ok(SampleMechanismSpec { threshold_t, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "value")]
pub enum MechanismValue {
    Scalar(f64),
    Coefficients(Vec<f64>),
}

impl MechanismValue {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            MechanismValue::Scalar(v) => Some(*v),
            MechanismValue::Coefficients(_) => None,
        }
    }
}

/// Output of a mechanism run, with enough provenance to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismResult {
    pub value: MechanismValue,
    pub mechanism: String,
    pub seed: u64,
    /// Per-record budgets that went into the run.
    pub epsilon_spent: Vec<f64>,
}

/// Laplace mechanism: `true_value + Laplace(sensitivity / eps)`.
pub fn laplace_mechanism(
    true_value: f64,
    sensitivity: f64,
    eps: PrivacyBudget,
    seed: u64,
) -> Result<MechanismResult> {
    if !(sensitivity.is_finite() && sensitivity > 0.0) {
        return Err(Error::argument(format!(
            "sensitivity must be positive, got {sensitivity}"
        )));
    }
    let epsilon = eps.epsilon();
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::argument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let noise = sample_laplace(&mut rng, sensitivity / epsilon);
    Ok(MechanismResult {
        value: MechanismValue::Scalar(true_value + noise),
        mechanism: "laplace".into(),
        seed,
        epsilon_spent: vec![epsilon],
    })
}

/// Exponential mechanism: sample candidate `c` with probability
/// proportional to `exp(eps * quality(c) / (2 * sensitivity_q))`.
pub fn exponential_mechanism<T: Copy>(
    candidates: &[T],
    quality: impl Fn(&T) -> f64,
    sensitivity_q: f64,
    eps: PrivacyBudget,
    seed: u64,
) -> Result<T> {
    if candidates.is_empty() {
        return Err(Error::argument("exponential mechanism needs candidates"));
    }
    if !(sensitivity_q.is_finite() && sensitivity_q > 0.0) {
        return Err(Error::argument(format!(
            "quality sensitivity must be positive, got {sensitivity_q}"
        )));
    }
    let epsilon = eps.epsilon();
    let scores: Vec<f64> = candidates.iter().map(&quality).collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::argument("quality scores must be finite"));
    }
    let max_score = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let weights: Vec<f64> = scores
        .iter()
        .map(|&s| (epsilon * (s - max_score) / (2.0 * sensitivity_q)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut rng = rng_from_seed(seed);
    let mut u: f64 = rng.random::<f64>() * total;
    for (c, w) in candidates.iter().zip(&weights) {
        u -= w;
        if u <= 0.0 {
            return Ok(*c);
        }
    }
    Ok(*candidates.last().expect("nonempty"))
}

/// Inclusion probability of the sample mechanism:
/// `(e^eps_i - 1) / (e^t - 1)` for `eps_i < t`, else 1.
pub fn sample_inclusion_probability(eps_i: PrivacyBudget, threshold: PrivacyBudget) -> Result<f64> {
    let e = eps_i.epsilon();
    let t = threshold.epsilon();
    if !(e > 0.0 && t > 0.0) {
        return Err(Error::argument("budgets must be positive"));
    }
    if e >= t {
        return Ok(1.0);
    }
    Ok(e.exp_m1() / t.exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Count,
    Median,
    Min,
}

impl QueryKind {
    pub fn name(&self) -> &'static str {
        match self {
            QueryKind::Count => "count",
            QueryKind::Median => "median",
            QueryKind::Min => "min",
        }
    }
}

impl std::str::FromStr for QueryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(QueryKind::Count),
            "median" => Ok(QueryKind::Median),
            "min" => Ok(QueryKind::Min),
            other => Err(Error::argument(format!("unknown query kind '{other}'"))),
        }
    }
}

/// Personalized query through the sample mechanism.
///
/// Count answers are the subsample count through Laplace noise at the
/// threshold budget (no reweighting: excluded records are simply absent).
/// Median and min answers come from the exponential mechanism over the
/// observed subsample values.
pub fn pdp_query(
    kind: QueryKind,
    records: &[BudgetedRecord],
    spec: &SampleMechanismSpec,
) -> Result<MechanismResult> {
    if records.is_empty() {
        return Err(Error::argument("pdp_query needs at least one record"));
    }
    let t = PrivacyBudget::new(spec.threshold_t)?;
    let mut sample_rng = rng_from_seed(derive_seed(spec.seed, "sample", 0));
    let mut subsample = Vec::with_capacity(records.len());
    for r in records {
        let pi = sample_inclusion_probability(PrivacyBudget::new(r.epsilon)?, t)?;
        // Draw for every record so inclusion decisions are independent of
        // the other records' budgets.
        let u: f64 = sample_rng.random();
        if u < pi {
            subsample.push(r.value);
        }
    }
    let budgets: Vec<f64> = records.iter().map(|r| r.epsilon).collect();

    let value = match kind {
        QueryKind::Count => {
            let noisy = laplace_mechanism(subsample.len() as f64, 1.0, t, spec.seed)?;
            noisy.value.scalar().expect("scalar laplace output")
        }
        QueryKind::Median => {
            if subsample.is_empty() {
                0.0
            } else {
                let mut sorted = subsample.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
                let target = (sorted.len() as f64 - 1.0) / 2.0;
                // Rank-distance quality; adding or removing one record moves
                // the count and the target together, so the quality shifts
                // by at most 1/2.
                let quality = |v: &f64| {
                    let below = sorted.partition_point(|x| x < v) as f64;
                    -(below - target).abs()
                };
                exponential_mechanism(&sorted, quality, 0.5, t, spec.seed)?
            }
        }
        QueryKind::Min => {
            if subsample.is_empty() {
                0.0
            } else {
                let lo = subsample.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                let hi = subsample.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let range = (hi - lo).max(1e-12);
                let quality = |v: &f64| -((v - lo) / range);
                exponential_mechanism(&subsample, quality, 1.0, t, spec.seed)?
            }
        }
    };

    Ok(MechanismResult {
        value: MechanismValue::Scalar(value),
        mechanism: format!("sample+{}", kind.name()),
        seed: spec.seed,
        epsilon_spent: budgets,
    })
}

/// The worst-case (minimum) budget across records: what a standard,
/// non-personalized deployment would have to use for everyone.
pub fn static_epsilon(records: &[BudgetedRecord]) -> Result<PrivacyBudget> {
    if records.is_empty() {
        return Err(Error::argument("static_epsilon needs at least one record"));
    }
    let min = records
        .iter()
        .map(|r| r.epsilon)
        .fold(f64::INFINITY, f64::min);
    PrivacyBudget::new(min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(eps: f64) -> PrivacyBudget {
        PrivacyBudget::new(eps).unwrap()
    }

    #[test]
    fn laplace_vanishing_noise_limit() {
        let r = laplace_mechanism(42.0, 1.0, budget(1e9), 3).unwrap();
        assert!((r.value.scalar().unwrap() - 42.0).abs() < 1e-6);
    }

    #[test]
    fn laplace_fixed_seed_repeats() {
        let a = laplace_mechanism(10.0, 2.0, budget(0.5), 77).unwrap();
        let b = laplace_mechanism(10.0, 2.0, budget(0.5), 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn laplace_is_unbiased() {
        let n = 100_000;
        let scale = 2.0 / 0.5;
        let mean: f64 = (0..n)
            .map(|i| {
                laplace_mechanism(7.0, 2.0, budget(0.5), i)
                    .unwrap()
                    .value
                    .scalar()
                    .unwrap()
            })
            .sum::<f64>()
            / n as f64;
        assert!(
            (mean - 7.0).abs() < 4.0 * scale / (n as f64).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn laplace_rejects_bad_arguments() {
        assert!(laplace_mechanism(0.0, 0.0, budget(1.0), 0).is_err());
        assert!(PrivacyBudget::new(0.0).is_err());
        assert!(PrivacyBudget::new(-1.0).is_err());
    }

    #[test]
    fn exponential_single_candidate() {
        for seed in 0..20 {
            let c = exponential_mechanism(&[5.0], |_| 0.0, 1.0, budget(1.0), seed).unwrap();
            assert_eq!(c, 5.0);
        }
    }

    #[test]
    fn exponential_prefers_better_candidate_at_high_eps() {
        let candidates = [0usize, 1usize];
        let quality = |c: &usize| if *c == 1 { 1.0 } else { 0.0 };
        let wins: usize = (0..10_000)
            .filter(|&seed| {
                exponential_mechanism(&candidates, quality, 1.0, budget(20.0), seed).unwrap() == 1
            })
            .count();
        assert!(wins > 9900, "wins {wins}");
    }

    #[test]
    fn exponential_uniform_quality_is_uniform() {
        let candidates = [0usize, 1, 2, 3];
        let mut counts = [0usize; 4];
        let n = 8000;
        for seed in 0..n {
            let c = exponential_mechanism(&candidates, |_| 1.0, 1.0, budget(1.0), seed).unwrap();
            counts[c] += 1;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 0.99 quantile of chi-square with 3 dof is 11.34.
        assert!(chi2 < 11.34, "chi2 {chi2} counts {counts:?}");
    }

    #[test]
    fn inclusion_probability_closed_forms() {
        assert_eq!(
            sample_inclusion_probability(budget(2.0), budget(2.0)).unwrap(),
            1.0
        );
        assert_eq!(
            sample_inclusion_probability(budget(3.0), budget(2.0)).unwrap(),
            1.0
        );
        let p = sample_inclusion_probability(budget(2f64.ln()), budget(3f64.ln())).unwrap();
        assert!((p - 0.5).abs() < 1e-12, "p {p}");
        let tiny = sample_inclusion_probability(budget(1e-9), budget(1.0)).unwrap();
        assert!(tiny < 1e-8);
    }

    #[test]
    fn inclusion_probability_monotone_in_budget() {
        let t = budget(5.0);
        let mut prev = 0.0;
        for i in 1..=60 {
            let eps = i as f64 * 0.1;
            let p = sample_inclusion_probability(budget(eps), t).unwrap();
            assert!(p >= prev);
            assert!((0.0..=1.0).contains(&p));
            prev = p;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn full_inclusion_count_matches_plain_laplace() {
        let records: Vec<BudgetedRecord> = (0..25)
            .map(|i| BudgetedRecord::new(i as f64, 2.0).unwrap())
            .collect();
        let spec = SampleMechanismSpec::new(2.0, 99).unwrap();
        let via_pdp = pdp_query(QueryKind::Count, &records, &spec).unwrap();
        let direct = laplace_mechanism(25.0, 1.0, budget(2.0), 99).unwrap();
        assert_eq!(via_pdp.value.scalar(), direct.value.scalar());
    }

    #[test]
    fn near_zero_budgets_count_concentrates_at_noise() {
        let records: Vec<BudgetedRecord> = (0..50)
            .map(|i| BudgetedRecord::new(i as f64, 1e-6).unwrap())
            .collect();
        let spec_t = 5.0;
        let mean: f64 = (0..300)
            .map(|seed| {
                let spec = SampleMechanismSpec::new(spec_t, seed).unwrap();
                pdp_query(QueryKind::Count, &records, &spec)
                    .unwrap()
                    .value
                    .scalar()
                    .unwrap()
            })
            .sum::<f64>()
            / 300.0;
        // Everyone excluded: the answer is Laplace noise around zero.
        assert!(mean.abs() < 0.5, "mean {mean}");
    }

    #[test]
    fn median_concentrates_on_true_median() {
        let records: Vec<BudgetedRecord> = (1..=9)
            .map(|i| BudgetedRecord::new(i as f64, 5.0).unwrap())
            .collect();
        let hits = (0..1000)
            .filter(|&seed| {
                let spec = SampleMechanismSpec::new(5.0, seed).unwrap();
                let r = pdp_query(QueryKind::Median, &records, &spec).unwrap();
                r.value.scalar().unwrap() == 5.0
            })
            .count();
        assert!(hits > 900, "median hit {hits}/1000");
    }

    #[test]
    fn static_epsilon_is_the_minimum() {
        let records = vec![
            BudgetedRecord::new(0.0, 0.1).unwrap(),
            BudgetedRecord::new(0.0, 1.0).unwrap(),
            BudgetedRecord::new(0.0, 5.0).unwrap(),
        ];
        assert_eq!(static_epsilon(&records).unwrap().epsilon(), 0.1);
        let mut shuffled = records.clone();
        shuffled.rotate_left(1);
        assert_eq!(static_epsilon(&shuffled).unwrap().epsilon(), 0.1);
        let equal = vec![BudgetedRecord::new(1.0, 0.7).unwrap(); 4];
        assert_eq!(static_epsilon(&equal).unwrap().epsilon(), 0.7);
        assert!(static_epsilon(&[]).is_err());
    }
}
