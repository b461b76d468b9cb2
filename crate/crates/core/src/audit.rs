//! Empirical audit of DP mechanisms via the distinguishing game.
//!
//! Per trial a challenger flips a bit, runs the mechanism on the chosen
//! one of two adjacent inputs, and hands the output to a distinguisher.
//! The empirical advantage `2 * win_rate - 1` is compared against the
//! theoretical bound `(e^eps - 1) / (e^eps + 1)`.
//!
//! Where the output distribution is known (Laplace queries, randomized
//! response) the distinguisher is the exact likelihood-ratio test, the
//! strongest adversary the game admits. Otherwise a threshold on the 1-D
//! output is fitted on half the trials and scored on the other half.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpmap::adversary_advantage;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, sample_laplace};

/// A mechanism under audit: seeded, one scalar output per run.
pub trait AuditedMechanism {
    fn name(&self) -> &str;
    fn epsilon(&self) -> f64;
    fn run(&self, data: &[f64], seed: u64) -> f64;
    /// Log-likelihood of `output` given `data`, when the density is known.
    fn log_likelihood(&self, data: &[f64], output: f64) -> Option<f64>;
}

/// Counting query with Laplace noise at sensitivity 1.
pub struct CountLaplace {
    pub epsilon: f64,
}

impl AuditedMechanism for CountLaplace {
    fn name(&self) -> &str {
        "count_laplace"
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn run(&self, data: &[f64], seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        data.len() as f64 + sample_laplace(&mut rng, 1.0 / self.epsilon)
    }

    fn log_likelihood(&self, data: &[f64], output: f64) -> Option<f64> {
        let scale = 1.0 / self.epsilon;
        let center = data.len() as f64;
        Some(-(output - center).abs() / scale - (2.0 * scale).ln())
    }
}

/// One-bit randomized response: the input is a single bit, reported
/// truthfully with probability `e^eps / (1 + e^eps)`.
pub struct RandomizedResponse {
    pub epsilon: f64,
}

impl RandomizedResponse {
    fn truth_probability(&self) -> f64 {
        let e = self.epsilon.exp();
        e / (1.0 + e)
    }
}

impl AuditedMechanism for RandomizedResponse {
    fn name(&self) -> &str {
        "randomized_response"
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn run(&self, data: &[f64], seed: u64) -> f64 {
        let bit = data.first().copied().unwrap_or(0.0);
        let mut rng = rng_from_seed(seed);
        if rng.random::<f64>() < self.truth_probability() {
            bit
        } else {
            1.0 - bit
        }
    }

    fn log_likelihood(&self, data: &[f64], output: f64) -> Option<f64> {
        let bit = data.first().copied().unwrap_or(0.0);
        let p = self.truth_probability();
        let mass = if (output - bit).abs() < 0.5 { p } else { 1.0 - p };
        Some(mass.ln())
    }
}

/// A mechanism known only through its outputs; audited with the fitted
/// threshold distinguisher.
pub struct OpaqueMechanism<F: Fn(&[f64], u64) -> f64> {
    pub name: String,
    pub epsilon: f64,
    pub run: F,
}

impl<F: Fn(&[f64], u64) -> f64> AuditedMechanism for OpaqueMechanism<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn run(&self, data: &[f64], seed: u64) -> f64 {
        (self.run)(data, seed)
    }

    fn log_likelihood(&self, _data: &[f64], _output: f64) -> Option<f64> {
        None
    }
}

/// Result of one audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mechanism: String,
    pub epsilon: f64,
    /// `max(0, 2 * win_rate - 1)` over the scored trials.
    pub empirical_advantage: f64,
    /// `(e^eps - 1) / (e^eps + 1)`.
    pub theoretical_bound: f64,
    /// Trials the advantage was estimated on (after any fitting split).
    pub trials: u64,
    pub win_rate: f64,
    pub std_error: f64,
    pub seed: u64,
}

impl AuditReport {
    /// Whether the estimate respects the bound within `sigmas` standard
    /// errors.
    pub fn within_bound(&self, sigmas: f64) -> bool {
        self.empirical_advantage <= self.theoretical_bound + sigmas * self.std_error
    }
}

/// Multiset adjacency: the inputs differ by at most one record.
pub fn is_adjacent(a: &[f64], b: &[f64]) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if large.len() - small.len() > 1 {
        return false;
    }
    let mut sa: Vec<f64> = small.to_vec();
    let mut sb: Vec<f64> = large.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    // Count multiset intersection.
    let mut common = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < sa.len() && j < sb.len() {
        match sa[i].total_cmp(&sb[j]) {
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    let sym_diff = (sa.len() - common) + (sb.len() - common);
    if sa.len() == sb.len() {
        sym_diff <= 2
    } else {
        sym_diff == 1
    }
}

/// Run the distinguishing game for `trials` rounds.
pub fn audit_advantage(
    mechanism: &dyn AuditedMechanism,
    d0: &[f64],
    d1: &[f64],
    trials: u64,
    seed: u64,
) -> Result<AuditReport> {
    if trials < 1000 {
        return Err(Error::argument(format!(
            "audit needs at least 1000 trials, got {trials}"
        )));
    }
    if !is_adjacent(d0, d1) {
        return Err(Error::argument("audit inputs must be adjacent"));
    }

    let mut outputs: Vec<(f64, bool)> = Vec::with_capacity(trials as usize);
    for j in 0..trials {
        let mut coin = rng_from_seed(derive_seed(seed, "bit", j));
        let b = coin.random::<f64>() < 0.5;
        let mech_seed = derive_seed(seed, "mech", j);
        let out = mechanism.run(if b { d1 } else { d0 }, mech_seed);
        outputs.push((out, b));
    }

    let has_density = mechanism.log_likelihood(d0, outputs[0].0).is_some();
    let (wins, scored) = if has_density {
        let wins = outputs
            .iter()
            .filter(|&&(out, b)| {
                let l0 = mechanism.log_likelihood(d0, out).expect("density available");
                let l1 = mechanism.log_likelihood(d1, out).expect("density available");
                let guess = l1 > l0; // ties resolve to 0
                guess == b
            })
            .count() as u64;
        (wins, trials)
    } else {
        threshold_distinguisher(&outputs)
    };

    let win_rate = wins as f64 / scored as f64;
    let std_error = 2.0 * (win_rate * (1.0 - win_rate) / scored as f64).sqrt();
    Ok(AuditReport {
        mechanism: mechanism.name().to_string(),
        epsilon: mechanism.epsilon(),
        empirical_advantage: (2.0 * win_rate - 1.0).max(0.0),
        theoretical_bound: adversary_advantage(mechanism.epsilon())?,
        trials: scored,
        win_rate,
        std_error: std_error.max(f64::MIN_POSITIVE),
        seed,
    })
}

/// Fit the best threshold-and-direction rule on even-indexed trials, score
/// it on odd-indexed ones.
fn threshold_distinguisher(outputs: &[(f64, bool)]) -> (u64, u64) {
    let fit: Vec<(f64, bool)> = outputs.iter().step_by(2).copied().collect();
    let eval: Vec<(f64, bool)> = outputs.iter().skip(1).step_by(2).copied().collect();

    let mut sorted = fit.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_ones = sorted.iter().filter(|&&(_, b)| b).count();
    let n = sorted.len();

    // Guessing "1 when output > threshold": sweep all cut positions.
    // ones_left = ones at or below the cut.
    let mut best_correct = 0usize;
    let mut best_cut = f64::NEG_INFINITY;
    let mut best_dir_gt = true;
    let mut ones_left = 0usize;
    for cut in 0..=n {
        // correct = zeros at or below cut + ones above cut
        let zeros_left = cut - ones_left;
        let ones_right = total_ones - ones_left;
        let correct_gt = zeros_left + ones_right;
        let correct_le = cut - zeros_left + (n - cut - ones_right);
        let threshold = if cut == 0 {
            f64::NEG_INFINITY
        } else {
            sorted[cut - 1].0
        };
        if correct_gt > best_correct {
            best_correct = correct_gt;
            best_cut = threshold;
            best_dir_gt = true;
        }
        if correct_le > best_correct {
            best_correct = correct_le;
            best_cut = threshold;
            best_dir_gt = false;
        }
        if cut < n && sorted[cut].1 {
            ones_left += 1;
        }
    }

    let wins = eval
        .iter()
        .filter(|&&(out, b)| {
            let guess = if best_dir_gt { out > best_cut } else { out <= best_cut };
            guess == b
        })
        .count() as u64;
    (wins, eval.len() as u64)
}
