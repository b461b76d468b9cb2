//! K-means clustering and silhouette scoring for gaze-behaviour
//! profiling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 300;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from a seeded k-means++ initialization. Runs until
/// assignments stabilize or 300 iterations. Empty clusters are reseeded to
/// the point farthest from its centroid.
pub fn kmeans(x: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterAssignment> {
    if k < 1 || k > x.len() {
        return Err(Error::argument(format!(
            "k must lie in 1..={} (rows), got {k}",
            x.len()
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::argument("cluster input must be finite"));
    }
    let n = x.len();
    let mut rng = rng_from_seed(seed);

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(x[rng.random_range(0..n)].clone());
    let mut min_d2: Vec<f64> = x.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a centroid.
            rng.random_range(0..n)
        } else {
            let mut u: f64 = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in min_d2.iter().enumerate() {
                u -= d;
                if u <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(x[next].clone());
        for (d, p) in min_d2.iter_mut().zip(x) {
            *d = d.min(squared_distance(p, centroids.last().expect("just pushed")));
        }
    }

    let mut assignment = vec![0usize; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        for (i, p) in x.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = squared_distance(p, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = squared_distance(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }

        let d = x[0].len();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in x.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed to the point farthest from its own centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        squared_distance(&x[a], &centroids[assignment[a]])
                            .total_cmp(&squared_distance(&x[b], &centroids[assignment[b]]))
                    })
                    .expect("nonempty");
                centroids[c] = x[far].clone();
                changed = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centroids[c][j] = s / counts[c] as f64;
                }
            }
        }

        if !changed || iterations >= MAX_ITERATIONS {
            break;
        }
    }

    let inertia = x
        .iter()
        .zip(&assignment)
        .map(|(p, &c)| squared_distance(p, &centroids[c]))
        .sum();
    Ok(ClusterAssignment {
        assignment,
        centroids,
        inertia,
        iterations,
    })
}

/// Mean silhouette coefficient under Euclidean distance; singleton
/// clusters contribute 0.
pub fn silhouette(x: &[Vec<f64>], assignment: &[usize]) -> Result<f64> {
    if x.len() != assignment.len() || x.is_empty() {
        return Err(Error::argument("points and assignment must align"));
    }
    let k = assignment.iter().copied().max().expect("nonempty") + 1;
    let mut counts = vec![0usize; k];
    for &c in assignment {
        counts[c] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::argument("silhouette needs at least 2 nonempty clusters"));
    }

    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = assignment[i];
        if counts[own] == 1 {
            continue; // singleton: s = 0
        }
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            sums[assignment[j]] += squared_distance(&x[i], &x[j]).sqrt();
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    Ok(total / n as f64)
}

/// Silhouette scores across a k range; `best_k` maximizes the score
/// (ties resolve to the smaller k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSweep {
    pub best_k: usize,
    pub scores: Vec<(usize, f64)>,
}

pub fn profile_sweep(
    x: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<ProfileSweep> {
    if k_range.is_empty() {
        return Err(Error::argument("empty k range"));
    }
    if *k_range.start() < 2 || *k_range.end() >= x.len() {
        return Err(Error::argument(format!(
            "k range must lie within 2..={} for {} rows",
            x.len().saturating_sub(1),
            x.len()
        )));
    }
    let mut scores = Vec::new();
    for k in k_range {
        let clustering = kmeans(x, k, derive_seed(seed, "sweep", k as u64))?;
        scores.push((k, silhouette(x, &clustering.assignment)?));
    }
    let best_k = scores
        .iter()
        .fold((0usize, f64::NEG_INFINITY), |acc, &(k, s)| {
            if s > acc.1 {
                (k, s)
            } else {
                acc
            }
        })
        .0;
    Ok(ProfileSweep { best_k, scores })
}
