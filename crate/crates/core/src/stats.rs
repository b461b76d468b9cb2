//! Rank-based hypothesis tests: Mann-Whitney U, Kruskal-Wallis H, and
//! Dunn's pairwise test with Bonferroni correction.
//!
//! Ties are handled with midranks throughout. The Mann-Whitney test is
//! exact (full enumeration of group assignments) for pooled sizes up to
//! [`EXACT_ENUMERATION_LIMIT`] and falls back to the tie-corrected normal
//! approximation with continuity correction above that.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Pooled-size cutoff for the exact Mann-Whitney enumeration.
pub const EXACT_ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    MannWhitneyExact,
    MannWhitneyNormal,
    KruskalWallis,
    DunnBonferroni,
}

/// Statistic and two-sided p-value of one hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
}

/// One pairwise comparison from Dunn's test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DunnPair {
    pub group_a: usize,
    pub group_b: usize,
    pub p_unadjusted: f64,
    pub result: TestResult,
}

/// Midranks of `values` (average rank across each tie run), 1-based.
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("NaN in rank input"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average of ranks i+1..=j+1.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sum of t^3 - t over tie runs, used by the tie-corrected variances.
fn tie_term(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in rank input"));
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::argument(format!("{name} must be nonempty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument(format!("{name} contains a non-finite value")));
    }
    Ok(())
}

/// Two-sided Mann-Whitney U test.
///
/// The reported statistic is `min(U_a, U_b)`; the two-sided p doubles the
/// lower tail `P(U <= u_obs)` and clamps at 1.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_finite("group a", a)?;
    check_finite("group b", b)?;
    let n_a = a.len();
    let n_b = b.len();
    let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let u_a = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let u_b = (n_a * n_b) as f64 - u_a;
    let u_obs = u_a.min(u_b);

    if n_a + n_b <= EXACT_ENUMERATION_LIMIT {
        let p_one = exact_lower_tail(&ranks, n_a, u_obs);
        return Ok(TestResult {
            statistic: u_obs,
            p_value: (2.0 * p_one).min(1.0),
            method: TestMethod::MannWhitneyExact,
        });
    }

    let n = (n_a + n_b) as f64;
    let mean = (n_a * n_b) as f64 / 2.0;
    let tie = tie_term(&pooled);
    let var = (n_a * n_b) as f64 / 12.0 * ((n + 1.0) - tie / (n * (n - 1.0)));
    if var <= 0.0 {
        // Every observation tied: nothing to distinguish.
        return Ok(TestResult {
            statistic: u_obs,
            p_value: 1.0,
            method: TestMethod::MannWhitneyNormal,
        });
    }
    // Continuity correction toward the mean; u_obs <= mean by construction.
    let z = (u_obs - mean + 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p_one = normal.cdf(z);
    Ok(TestResult {
        statistic: u_obs,
        p_value: (2.0 * p_one).min(1.0),
        method: TestMethod::MannWhitneyNormal,
    })
}

/// P(U <= u_obs) over all C(n, n_a) assignments of the observed pooled ranks
/// to group a, via Gosper's-hack subset iteration.
fn exact_lower_tail(ranks: &[f64], n_a: usize, u_obs: f64) -> f64 {
    let n = ranks.len();
    debug_assert!(n <= EXACT_ENUMERATION_LIMIT);
    let offset = (n_a * (n_a + 1)) as f64 / 2.0;
    let mut hits: u64 = 0;
    let mut total: u64 = 0;
    let mut mask: u32 = (1u32 << n_a) - 1;
    let end: u32 = 1u32 << n;
    while mask < end {
        let mut rank_sum = 0.0;
        let mut bits = mask;
        while bits != 0 {
            let idx = bits.trailing_zeros() as usize;
            rank_sum += ranks[idx];
            bits &= bits - 1;
        }
        let u = rank_sum - offset;
        if u <= u_obs + 1e-9 {
            hits += 1;
        }
        total += 1;
        // Gosper's hack: next subset with the same popcount.
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        if r >= end || c == 0 {
            break;
        }
        mask = r | (((mask ^ r) / c) >> 2);
    }
    hits as f64 / total as f64
}

/// Kruskal-Wallis H test across two or more groups, with tie correction;
/// p-value from the chi-squared distribution with k - 1 degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::argument(format!(
            "kruskal_wallis needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    for (i, g) in groups.iter().enumerate() {
        check_finite(&format!("group {i}"), g)?;
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let ranks = midranks(&pooled);

    let mut h = 0.0;
    let mut start = 0;
    for g in groups {
        let len = g.len();
        let rank_sum: f64 = ranks[start..start + len].iter().sum();
        h += rank_sum * rank_sum / len as f64;
        start += len;
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

    let correction = 1.0 - tie_term(&pooled) / (n * n * n - n);
    if correction <= 0.0 {
        // All observations identical.
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            method: TestMethod::KruskalWallis,
        });
    }
    h /= correction;
    // Guard against tiny negative drift when all rank sums are equal.
    if h < 0.0 && h > -1e-9 {
        h = 0.0;
    }
    let df = (groups.len() - 1) as f64;
    let chi = ChiSquared::new(df).expect("positive dof");
    let p = (1.0 - chi.cdf(h)).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic: h,
        p_value: p,
        method: TestMethod::KruskalWallis,
    })
}

/// Dunn's z-tests on mean ranks for every pair of groups, Bonferroni-scaled
/// by the number of pairs and clamped to 1.
pub fn dunn_bonferroni(groups: &[Vec<f64>]) -> Result<Vec<DunnPair>> {
    if groups.len() < 2 {
        return Err(Error::argument(format!(
            "dunn_bonferroni needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    for (i, g) in groups.iter().enumerate() {
        check_finite(&format!("group {i}"), g)?;
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let ranks = midranks(&pooled);

    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut start = 0;
    for g in groups {
        let len = g.len();
        let sum: f64 = ranks[start..start + len].iter().sum();
        mean_ranks.push(sum / len as f64);
        start += len;
    }

    let variance_base = n * (n + 1.0) / 12.0 - tie_term(&pooled) / (12.0 * (n - 1.0));
    let pairs = groups.len() * (groups.len() - 1) / 2;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut out = Vec::with_capacity(pairs);
    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            let se2 = variance_base * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64);
            let z = if se2 > 0.0 {
                (mean_ranks[i] - mean_ranks[j]) / se2.sqrt()
            } else {
                0.0
            };
            let p_raw = (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0);
            let p_adj = (p_raw * pairs as f64).min(1.0);
            out.push(DunnPair {
                group_a: i,
                group_b: j,
                p_unadjusted: p_raw,
                result: TestResult {
                    statistic: z,
                    p_value: p_adj,
                    method: TestMethod::DunnBonferroni,
                },
            });
        }
    }
    Ok(out)
}
