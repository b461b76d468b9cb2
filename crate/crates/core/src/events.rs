//! Fixation and saccade detection plus per-trial feature extraction.
//!
//! Fixations come from a dispersion-threshold pass (I-DT): a window is a
//! fixation once it spans the minimum duration inside the dispersion
//! limit, grows while the dispersion holds, and is split at the maximum
//! duration. Saccades come from a velocity-threshold pass (I-VT) on a
//! symmetric-difference velocity trace. Invalid samples are excluded from
//! both, never interpolated.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, GazeSample, Trial};
use crate::error::{Error, Result};
use crate::geometry::{mean_px_per_degree, px_per_degree, ScreenGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub onset_ms: f64,
    pub offset_ms: f64,
    pub centroid_x_px: f64,
    pub centroid_y_px: f64,
    pub dispersion_deg: f64,
    pub mean_pupil: f64,
}

impl Fixation {
    pub fn duration_ms(&self) -> f64 {
        self.offset_ms - self.onset_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saccade {
    pub onset_ms: f64,
    pub offset_ms: f64,
    pub amplitude_deg: f64,
    pub peak_velocity_deg_s: f64,
}

/// Detector thresholds shared by both passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub dispersion_deg: f64,
    pub min_fixation_ms: f64,
    pub max_fixation_ms: f64,
    pub velocity_thresh_deg_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        // 1 degree dispersion, 100-400 ms duration band, 30 deg/s.
        DetectorConfig {
            dispersion_deg: 1.0,
            min_fixation_ms: 100.0,
            max_fixation_ms: 400.0,
            velocity_thresh_deg_s: 30.0,
        }
    }
}

impl DetectorConfig {
    fn check(&self) -> Result<()> {
        if !(self.dispersion_deg > 0.0
            && self.min_fixation_ms > 0.0
            && self.max_fixation_ms > self.min_fixation_ms
            && self.velocity_thresh_deg_s > 0.0)
        {
            return Err(Error::argument(
                "detector thresholds must be positive with min_fixation_ms < max_fixation_ms",
            ));
        }
        Ok(())
    }
}

fn check_ordered(samples: &[GazeSample]) -> Result<()> {
    if samples.windows(2).any(|w| w[1].t_us < w[0].t_us) {
        return Err(Error::argument("samples must be timestamp-ordered"));
    }
    Ok(())
}

fn valid_samples(samples: &[GazeSample]) -> Vec<GazeSample> {
    samples.iter().copied().filter(|s| s.valid).collect()
}

/// Salvucci-style dispersion: (max x - min x) + (max y - min y), each axis
/// converted to degrees by its own px/deg factor.
fn dispersion_deg(window: &[GazeSample], px_deg_h: f64, px_deg_v: f64) -> f64 {
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for s in window {
        min_x = min_x.min(s.x_px);
        max_x = max_x.max(s.x_px);
        min_y = min_y.min(s.y_px);
        max_y = max_y.max(s.y_px);
    }
    (max_x - min_x) / px_deg_h + (max_y - min_y) / px_deg_v
}

fn t_ms(sample: &GazeSample) -> f64 {
    sample.t_us as f64 / 1000.0
}

/// Dispersion-threshold fixation detection over the valid samples.
///
/// Windows never include samples moving faster than the velocity
/// threshold; without that guard a window could swallow the slow opening
/// of an adjacent saccade and the two event streams would overlap.
pub fn detect_fixations(
    samples: &[GazeSample],
    geometry: &ScreenGeometry,
    config: &DetectorConfig,
) -> Result<Vec<Fixation>> {
    config.check()?;
    check_ordered(samples)?;
    let (px_deg_h, px_deg_v) = px_per_degree(geometry)?;
    let samples = valid_samples(samples);
    let n = samples.len();
    let velocity = velocities_deg_s(&samples, px_deg_h, px_deg_v);
    let fast: Vec<bool> = velocity
        .iter()
        .map(|&v| v > config.velocity_thresh_deg_s)
        .collect();
    let mut fixations = Vec::new();
    let mut start = 0;

    while start < n {
        // Smallest window spanning the minimum duration.
        let mut end = start;
        while end + 1 < n && t_ms(&samples[end]) - t_ms(&samples[start]) < config.min_fixation_ms {
            end += 1;
        }
        if t_ms(&samples[end]) - t_ms(&samples[start]) < config.min_fixation_ms {
            break; // not enough trace left
        }
        if let Some(fast_idx) = (start..=end).find(|&i| fast[i]) {
            start = fast_idx + 1;
            continue;
        }
        if dispersion_deg(&samples[start..=end], px_deg_h, px_deg_v) > config.dispersion_deg {
            start += 1;
            continue;
        }
        // Grow while the dispersion holds; split at the duration cap.
        while end + 1 < n {
            if fast[end + 1] {
                break;
            }
            let duration = t_ms(&samples[end + 1]) - t_ms(&samples[start]);
            if duration > config.max_fixation_ms {
                break;
            }
            if dispersion_deg(&samples[start..=end + 1], px_deg_h, px_deg_v)
                > config.dispersion_deg
            {
                break;
            }
            end += 1;
        }
        let window = &samples[start..=end];
        let len = window.len() as f64;
        let pupils: Vec<f64> = window.iter().filter_map(|s| s.pupil).collect();
        fixations.push(Fixation {
            onset_ms: t_ms(&samples[start]),
            offset_ms: t_ms(&samples[end]),
            centroid_x_px: window.iter().map(|s| s.x_px).sum::<f64>() / len,
            centroid_y_px: window.iter().map(|s| s.y_px).sum::<f64>() / len,
            dispersion_deg: dispersion_deg(window, px_deg_h, px_deg_v),
            mean_pupil: if pupils.is_empty() {
                0.0
            } else {
                pupils.iter().sum::<f64>() / pupils.len() as f64
            },
        });
        start = end + 1;
    }
    Ok(fixations)
}

/// Half-width of the symmetric velocity window in milliseconds. A
/// time-based window keeps tracker jitter below threshold regardless of
/// the sampling rate; at low rates it degrades to a plain central
/// difference.
const VELOCITY_HALF_WINDOW_MS: f64 = 8.0;

fn velocities_deg_s(samples: &[GazeSample], px_deg_h: f64, px_deg_v: f64) -> Vec<f64> {
    let n = samples.len();
    let mut v = vec![0.0; n];
    for i in 0..n {
        let mut lo = i;
        while lo > 0 && t_ms(&samples[i]) - t_ms(&samples[lo - 1]) <= VELOCITY_HALF_WINDOW_MS {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && t_ms(&samples[hi + 1]) - t_ms(&samples[i]) <= VELOCITY_HALF_WINDOW_MS
        {
            hi += 1;
        }
        // Always span at least one neighbour on each available side.
        lo = lo.min(i.saturating_sub(1));
        hi = hi.max((i + 1).min(n - 1));
        let dt_s = (t_ms(&samples[hi]) - t_ms(&samples[lo])) / 1000.0;
        if dt_s <= 0.0 {
            continue;
        }
        let dx = (samples[hi].x_px - samples[lo].x_px) / px_deg_h;
        let dy = (samples[hi].y_px - samples[lo].y_px) / px_deg_v;
        v[i] = (dx * dx + dy * dy).sqrt() / dt_s;
    }
    v
}

/// Velocity-threshold saccade detection over the valid samples. Returns an
/// empty list when fewer than 3 valid samples exist.
///
/// Runs are found on the windowed velocity, then trimmed to the span where
/// the sample-to-sample velocity itself exceeds the threshold, so the
/// smoothing window cannot bleed a run into the surrounding fixations.
pub fn detect_saccades(
    samples: &[GazeSample],
    geometry: &ScreenGeometry,
    velocity_thresh_deg_s: f64,
) -> Result<Vec<Saccade>> {
    if !velocity_thresh_deg_s.is_finite() || velocity_thresh_deg_s <= 0.0 {
        return Err(Error::argument("velocity threshold must be positive"));
    }
    check_ordered(samples)?;
    let (px_deg_h, px_deg_v) = px_per_degree(geometry)?;
    let samples = valid_samples(samples);
    if samples.len() < 3 {
        return Ok(Vec::new());
    }
    let velocity = velocities_deg_s(&samples, px_deg_h, px_deg_v);
    // Forward-step velocity between consecutive samples.
    let step: Vec<f64> = samples
        .windows(2)
        .map(|w| {
            let dt_s = (t_ms(&w[1]) - t_ms(&w[0])) / 1000.0;
            if dt_s <= 0.0 {
                return 0.0;
            }
            let dx = (w[1].x_px - w[0].x_px) / px_deg_h;
            let dy = (w[1].y_px - w[0].y_px) / px_deg_v;
            (dx * dx + dy * dy).sqrt() / dt_s
        })
        .collect();

    let mut saccades = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        if velocity[i] <= velocity_thresh_deg_s {
            i += 1;
            continue;
        }
        let mut start = i;
        while i + 1 < samples.len() && velocity[i + 1] > velocity_thresh_deg_s {
            i += 1;
        }
        let mut end = i;
        i += 1;
        // Trim to the fast core.
        while start < end && step[start] <= velocity_thresh_deg_s {
            start += 1;
        }
        while end > start && step[end - 1] <= velocity_thresh_deg_s {
            end -= 1;
        }
        if end <= start {
            continue; // smoothing artefact with no fast step inside
        }
        let dx = (samples[end].x_px - samples[start].x_px) / px_deg_h;
        let dy = (samples[end].y_px - samples[start].y_px) / px_deg_v;
        saccades.push(Saccade {
            onset_ms: t_ms(&samples[start]),
            offset_ms: t_ms(&samples[end]),
            amplitude_deg: (dx * dx + dy * dy).sqrt(),
            peak_velocity_deg_s: velocity[start..=end]
                .iter()
                .fold(0.0f64, |a, &b| a.max(b)),
        });
    }
    Ok(saccades)
}

/// Per-trial gaze statistics. `valid` is false when the trial had no
/// usable samples; all statistics are zero in that case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub fixation_count: f64,
    pub mean_fixation_ms: f64,
    pub total_fixation_ms: f64,
    pub saccade_count: f64,
    pub mean_amplitude_deg: f64,
    pub mean_peak_velocity_deg_s: f64,
    pub pupil_mean: f64,
    pub pupil_std: f64,
    pub scanpath_len_deg: f64,
    pub response_time_ms: f64,
    pub valid: bool,
    /// Demographic context (age, expert flag, one-hot gender and
    /// nationality); empty unless requested.
    pub context: Vec<f64>,
}

/// Names of the numeric features, in the order [`FeatureVector::numeric`]
/// emits them.
pub const FEATURE_NAMES: [&str; 10] = [
    "fixation_count",
    "mean_fixation_ms",
    "total_fixation_ms",
    "saccade_count",
    "mean_amplitude_deg",
    "mean_peak_velocity_deg_s",
    "pupil_mean",
    "pupil_std",
    "scanpath_len_deg",
    "response_time_ms",
];

impl FeatureVector {
    /// The numeric feature row (without context).
    pub fn numeric(&self) -> Vec<f64> {
        vec![
            self.fixation_count,
            self.mean_fixation_ms,
            self.total_fixation_ms,
            self.saccade_count,
            self.mean_amplitude_deg,
            self.mean_peak_velocity_deg_s,
            self.pupil_mean,
            self.pupil_std,
            self.scanpath_len_deg,
            self.response_time_ms,
        ]
    }

    /// Numeric features followed by any context features.
    pub fn full(&self) -> Vec<f64> {
        let mut row = self.numeric();
        row.extend_from_slice(&self.context);
        row
    }
}

/// Extract the per-trial feature vector: both detectors plus pupil and
/// scanpath statistics. Scanpath length is the total distance between
/// consecutive fixation centroids.
pub fn extract_features(
    trial: &Trial,
    geometry: &ScreenGeometry,
    config: &DetectorConfig,
) -> Result<FeatureVector> {
    let fixations = detect_fixations(&trial.samples, geometry, config)?;
    let saccades = detect_saccades(&trial.samples, geometry, config.velocity_thresh_deg_s)?;
    let mean_px_deg = mean_px_per_degree(geometry)?;

    let valid: Vec<&GazeSample> = trial.samples.iter().filter(|s| s.valid).collect();
    if valid.is_empty() {
        return Ok(FeatureVector {
            fixation_count: 0.0,
            mean_fixation_ms: 0.0,
            total_fixation_ms: 0.0,
            saccade_count: 0.0,
            mean_amplitude_deg: 0.0,
            mean_peak_velocity_deg_s: 0.0,
            pupil_mean: 0.0,
            pupil_std: 0.0,
            scanpath_len_deg: 0.0,
            response_time_ms: trial.response_time_ms,
            valid: false,
            context: Vec::new(),
        });
    }

    let total_fixation_ms: f64 = fixations.iter().map(Fixation::duration_ms).sum();
    let mean_fixation_ms = if fixations.is_empty() {
        0.0
    } else {
        total_fixation_ms / fixations.len() as f64
    };
    let mean_amplitude_deg = if saccades.is_empty() {
        0.0
    } else {
        saccades.iter().map(|s| s.amplitude_deg).sum::<f64>() / saccades.len() as f64
    };
    let mean_peak_velocity = if saccades.is_empty() {
        0.0
    } else {
        saccades.iter().map(|s| s.peak_velocity_deg_s).sum::<f64>() / saccades.len() as f64
    };

    let pupils: Vec<f64> = valid.iter().filter_map(|s| s.pupil).collect();
    let (pupil_mean, pupil_std) = if pupils.is_empty() {
        (0.0, 0.0)
    } else {
        let mean = pupils.iter().sum::<f64>() / pupils.len() as f64;
        let var = pupils.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>()
            / pupils.len() as f64;
        (mean, var.sqrt())
    };

    let scanpath_len_deg: f64 = fixations
        .windows(2)
        .map(|w| {
            let dx = w[1].centroid_x_px - w[0].centroid_x_px;
            let dy = w[1].centroid_y_px - w[0].centroid_y_px;
            (dx * dx + dy * dy).sqrt() / mean_px_deg
        })
        .sum();

    Ok(FeatureVector {
        fixation_count: fixations.len() as f64,
        mean_fixation_ms,
        total_fixation_ms,
        saccade_count: saccades.len() as f64,
        mean_amplitude_deg,
        mean_peak_velocity_deg_s: mean_peak_velocity,
        pupil_mean,
        pupil_std,
        scanpath_len_deg,
        response_time_ms: trial.response_time_ms,
        valid: true,
        context: Vec::new(),
    })
}

/// Context feature layout for a dataset: the categorical vocabularies that
/// one-hot context columns are built against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVocab {
    pub genders: Vec<String>,
    pub nationalities: Vec<String>,
}

impl ContextVocab {
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let mut genders: Vec<String> =
            dataset.profiles.iter().map(|p| p.gender.clone()).collect();
        genders.sort();
        genders.dedup();
        let mut nationalities: Vec<String> = dataset
            .profiles
            .iter()
            .map(|p| p.nationality.clone())
            .collect();
        nationalities.sort();
        nationalities.dedup();
        ContextVocab {
            genders,
            nationalities,
        }
    }

    /// Context row for one participant: [age, expert, gender one-hot...,
    /// nationality one-hot...].
    pub fn encode(&self, dataset: &Dataset, participant_id: &str) -> Vec<f64> {
        let profile = match dataset.profile(participant_id) {
            Some(p) => p,
            None => return vec![0.0; 2 + self.genders.len() + self.nationalities.len()],
        };
        let mut row = vec![profile.age_years as f64, profile.privacy_expert as u8 as f64];
        for g in &self.genders {
            row.push((g == &profile.gender) as u8 as f64);
        }
        for n in &self.nationalities {
            row.push((n == &profile.nationality) as u8 as f64);
        }
        row
    }
}

/// Feature rows for every trial of a dataset (optionally with context).
pub fn dataset_features(
    dataset: &Dataset,
    config: &DetectorConfig,
    with_context: bool,
) -> Result<Vec<FeatureVector>> {
    let vocab = ContextVocab::from_dataset(dataset);
    dataset
        .trials
        .iter()
        .map(|trial| {
            let mut fv = extract_features(trial, &dataset.geometry, config)?;
            if with_context {
                fv.context = vocab.encode(dataset, &trial.participant_id);
            }
            Ok(fv)
        })
        .collect()
}
