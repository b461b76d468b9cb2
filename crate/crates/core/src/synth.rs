//! Deterministic synthetic dataset generation.
//!
//! Per trial the generator draws a rating from the per-attribute
//! distribution, then builds a gaze trace whose statistics depend on the
//! rating in proportion to `signal_strength`: more and longer fixations
//! (and a wider pupil and a longer response time) for more private
//! ratings, none of it at `signal_strength = 0`. Fixations are clusters of
//! mean-reverting jitter around well-separated centres, connected by
//! minimum-jerk saccade sweeps, so the event detectors can recover the
//! planted structure.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::dataset::{Category, Dataset, GazeSample, ParticipantProfile, TaskKind, Trial};
use crate::error::{Error, Result};
use crate::geometry::{px_per_degree, ScreenGeometry};
use crate::rng::{derive_seed, rng_from_seed};

/// Rating distribution for one stimulus attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMix {
    pub attribute: String,
    pub category: Category,
    /// Probability of each rating 1..=levels; must sum to 1.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_participants: usize,
    pub n_trials_per_participant: usize,
    pub rating_distribution: Vec<AttributeMix>,
    /// 0 = rating-independent gaze, 1 = full rating-conditioned shift.
    pub signal_strength: f64,
    pub seed: u64,
    /// Search-task trials appended per participant (free-view trials are
    /// the `n_trials_per_participant` above).
    #[serde(default)]
    pub n_search_trials_per_participant: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_levels")]
    pub levels: u32,
}

fn default_sample_rate() -> f64 {
    500.0
}

fn default_levels() -> u32 {
    7
}

const ATTRIBUTES: [(&str, Category); 9] = [
    ("credit_card", Category::Documents),
    ("medical_history", Category::Medical),
    ("password", Category::OnlineActivity),
    ("political_opinion", Category::Life),
    ("home_address", Category::Whereabouts),
    ("personal_relationship", Category::Relationship),
    ("occupation", Category::Employment),
    ("face", Category::PersonalInformation),
    ("license_plate", Category::Automobile),
];

impl SynthSpec {
    /// Uniform rating distribution over every attribute.
    pub fn uniform(n_participants: usize, n_trials_per_participant: usize, seed: u64) -> Self {
        let levels = default_levels();
        let w = vec![1.0 / levels as f64; levels as usize];
        SynthSpec {
            n_participants,
            n_trials_per_participant,
            rating_distribution: ATTRIBUTES
                .iter()
                .map(|&(a, c)| AttributeMix {
                    attribute: a.to_string(),
                    category: c,
                    weights: w.clone(),
                })
                .collect(),
            signal_strength: 0.0,
            seed,
            n_search_trials_per_participant: 0,
            sample_rate_hz: default_sample_rate(),
            levels,
        }
    }

    /// Rating mass concentrated on the private end of the scale, with the
    /// per-attribute spread ranging from clearly private (credit cards)
    /// to mostly safe (license plates).
    pub fn skewed_private(
        n_participants: usize,
        n_trials_per_participant: usize,
        seed: u64,
    ) -> Self {
        let strongly = vec![0.45, 0.25, 0.10, 0.05, 0.05, 0.05, 0.05];
        let mixed = vec![0.25, 0.20, 0.15, 0.10, 0.10, 0.10, 0.10];
        let safer = vec![0.08, 0.07, 0.05, 0.08, 0.12, 0.22, 0.38];
        let weights_for = |attribute: &str| match attribute {
            "credit_card" | "medical_history" | "password" => strongly.clone(),
            "political_opinion" | "home_address" | "personal_relationship" => mixed.clone(),
            _ => safer.clone(),
        };
        SynthSpec {
            n_participants,
            n_trials_per_participant,
            rating_distribution: ATTRIBUTES
                .iter()
                .map(|&(a, c)| AttributeMix {
                    attribute: a.to_string(),
                    category: c,
                    weights: weights_for(a),
                })
                .collect(),
            signal_strength: 0.0,
            seed,
            n_search_trials_per_participant: 0,
            sample_rate_hz: default_sample_rate(),
            levels: default_levels(),
        }
    }

    pub fn with_signal(mut self, signal_strength: f64) -> Self {
        self.signal_strength = signal_strength;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.n_participants == 0 || self.n_trials_per_participant == 0 {
            return Err(Error::argument(
                "need at least one participant and one trial per participant",
            ));
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return Err(Error::argument(format!(
                "signal_strength must lie in [0, 1], got {}",
                self.signal_strength
            )));
        }
        if self.levels < 2 {
            return Err(Error::argument("levels must be >= 2"));
        }
        if self.rating_distribution.is_empty() {
            return Err(Error::argument("rating_distribution must name at least one attribute"));
        }
        for mix in &self.rating_distribution {
            if mix.weights.len() != self.levels as usize {
                return Err(Error::argument(format!(
                    "attribute {}: expected {} weights, got {}",
                    mix.attribute,
                    self.levels,
                    mix.weights.len()
                )));
            }
            if mix.weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
                return Err(Error::argument(format!(
                    "attribute {}: weights must be nonnegative",
                    mix.attribute
                )));
            }
            let sum: f64 = mix.weights.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::argument(format!(
                    "attribute {}: weights sum to {sum}, expected 1",
                    mix.attribute
                )));
            }
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz >= 50.0) {
            return Err(Error::argument(format!(
                "sample_rate_hz must be >= 50, got {}",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }

    fn geometry(&self) -> ScreenGeometry {
        let mut g = ScreenGeometry::lab_default();
        g.sample_rate_hz = self.sample_rate_hz;
        g
    }
}

/// Tuning constants for the trace generator.
mod shape {
    /// Mean fixation count at zero privacy pressure and its relative gain
    /// at full pressure.
    pub const FIX_COUNT_BASE: f64 = 6.0;
    pub const FIX_COUNT_GAIN: f64 = 0.8;
    /// Median fixation duration (ms) and its relative gain.
    pub const FIX_DUR_BASE_MS: f64 = 160.0;
    pub const FIX_DUR_GAIN: f64 = 0.9;
    pub const FIX_DUR_SIGMA: f64 = 0.22;
    pub const FIX_DUR_MIN_MS: f64 = 110.0;
    pub const FIX_DUR_MAX_MS: f64 = 380.0;
    /// Saccade amplitude lognormal (degrees) and clamp.
    pub const SACC_AMP_MEDIAN_DEG: f64 = 4.0;
    pub const SACC_AMP_SIGMA: f64 = 0.4;
    pub const SACC_AMP_MIN_DEG: f64 = 1.8;
    pub const SACC_AMP_MAX_DEG: f64 = 12.0;
    /// Mean-reverting jitter inside fixations: stationary SD in degrees
    /// and reversion rate per millisecond (discretized per sample).
    pub const JITTER_SD_DEG: f64 = 0.08;
    pub const JITTER_REVERSION_PER_MS: f64 = 0.06;
    /// Pupil model (arbitrary tracker units).
    pub const PUPIL_BASE: f64 = 500.0;
    pub const PUPIL_GAIN: f64 = 0.12;
    pub const PUPIL_NOISE_SD: f64 = 6.0;
    /// Participant idiosyncrasy scales (multiplied by signal_strength).
    pub const PARTICIPANT_DUR_SD: f64 = 0.12;
    pub const PARTICIPANT_PUPIL_SD: f64 = 0.15;
    /// Decision time appended to the viewing span (ms, lognormal median).
    pub const DECISION_MEDIAN_MS: f64 = 320.0;
    pub const DECISION_SIGMA: f64 = 0.35;
    /// Probability that a trial contains one blink (invalid run).
    pub const BLINK_PROB: f64 = 0.05;
    pub const SCREEN_MARGIN_PX: f64 = 120.0;
}

struct ParticipantTraits {
    duration_mult: f64,
    count_mult: f64,
    pupil_base: f64,
}

/// Generate a dataset from `spec`. Deterministic: equal specs produce
/// bit-identical datasets.
#[allow(clippy::needless_range_loop)]
pub fn synthesize_dataset(spec: &SynthSpec) -> Result<Dataset> {
    spec.check()?;
    let geometry = spec.geometry();
    let (px_deg_h, px_deg_v) = px_per_degree(&geometry)?;
    let nationalities = ["de", "in", "cn", "us", "eg"];
    let genders = ["female", "male"];

    let profiles: Vec<ParticipantProfile> = (0..spec.n_participants)
        .map(|p| ParticipantProfile {
            participant_id: format!("p{:03}", p + 1),
            age_years: 20 + ((p * 7) % 16) as u32,
            gender: genders[p % 2].to_string(),
            nationality: nationalities[p % nationalities.len()].to_string(),
            // Exactly half the panel are experts.
            privacy_expert: p % 2 == 1,
        })
        .collect();

    let s = spec.signal_strength;
    let mut trials = Vec::new();
    for p in 0..spec.n_participants {
        let mut prng = rng_from_seed(derive_seed(spec.seed, "participant", p as u64));
        let traits = ParticipantTraits {
            duration_mult: (1.0 + s * shape::PARTICIPANT_DUR_SD * standard_normal(&mut prng))
                .max(0.5),
            count_mult: (1.0 + s * shape::PARTICIPANT_DUR_SD * standard_normal(&mut prng)).max(0.5),
            pupil_base: shape::PUPIL_BASE
                * (1.0 + s * shape::PARTICIPANT_PUPIL_SD * standard_normal(&mut prng)).max(0.4),
        };
        let block = 1 + (p % 4) as u32;
        let total = spec.n_trials_per_participant + spec.n_search_trials_per_participant;
        for t in 0..total {
            let task = if t < spec.n_trials_per_participant {
                TaskKind::FreeView
            } else {
                TaskKind::Search
            };
            let stimulus_id = match task {
                TaskKind::FreeView => format!("st{t:03}"),
                TaskKind::Search => format!("sr{:03}", t - spec.n_trials_per_participant),
            };
            let mut rng = rng_from_seed(derive_seed(
                spec.seed,
                "trial",
                (p as u64) << 20 | t as u64,
            ));
            let mix = &spec.rating_distribution
                [rng.random_range(0..spec.rating_distribution.len())];
            let rating = draw_categorical(&mut rng, &mix.weights) as u32 + 1;
            let trial = generate_trial(
                spec,
                &geometry,
                px_deg_h,
                px_deg_v,
                &traits,
                &profiles[p].participant_id,
                block,
                task,
                stimulus_id,
                mix,
                rating,
                &mut rng,
            );
            trials.push(trial);
        }
    }

    Ok(Dataset {
        geometry,
        profiles,
        trials,
        levels: spec.levels,
    })
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

fn draw_categorical<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

#[allow(clippy::too_many_arguments)]
fn generate_trial(
    spec: &SynthSpec,
    geometry: &ScreenGeometry,
    px_deg_h: f64,
    px_deg_v: f64,
    traits: &ParticipantTraits,
    participant_id: &str,
    block: u32,
    task: TaskKind,
    stimulus_id: String,
    mix: &AttributeMix,
    rating: u32,
    rng: &mut impl Rng,
) -> Trial {
    let s = spec.signal_strength;
    // 1 for the most private rating, 0 for the safest.
    let pressure = (spec.levels - rating) as f64 / (spec.levels - 1) as f64;

    let count_mean =
        shape::FIX_COUNT_BASE * (1.0 + s * pressure * shape::FIX_COUNT_GAIN) * traits.count_mult;
    let count_draw: f64 = Poisson::new(count_mean.max(0.5))
        .expect("positive mean")
        .sample(rng);
    let n_fixations = (count_draw as usize).max(2);

    let dur_median = shape::FIX_DUR_BASE_MS
        * (1.0 + s * pressure * shape::FIX_DUR_GAIN)
        * traits.duration_mult;
    let dur_dist = LogNormal::new(dur_median.ln(), shape::FIX_DUR_SIGMA).expect("valid lognormal");
    let amp_dist = LogNormal::new(
        shape::SACC_AMP_MEDIAN_DEG.ln(),
        shape::SACC_AMP_SIGMA,
    )
    .expect("valid lognormal");

    let pupil_level = traits.pupil_base * (1.0 + s * pressure * shape::PUPIL_GAIN);
    let dt_ms = 1000.0 / geometry.sample_rate_hz;

    let mut samples: Vec<GazeSample> = Vec::new();
    let mut t_ms = 0.0f64;
    // Start somewhere central.
    let mut cx = geometry.width_px * (0.3 + 0.4 * rng.random::<f64>());
    let mut cy = geometry.height_px * (0.3 + 0.4 * rng.random::<f64>());
    let mut pupil_noise = 0.0f64;

    for f in 0..n_fixations {
        let duration = dur_dist
            .sample(rng)
            .clamp(shape::FIX_DUR_MIN_MS, shape::FIX_DUR_MAX_MS);
        emit_fixation(
            &mut samples,
            &mut t_ms,
            duration,
            cx,
            cy,
            px_deg_h,
            px_deg_v,
            pupil_level,
            &mut pupil_noise,
            dt_ms,
            rng,
        );
        if f + 1 == n_fixations {
            break;
        }
        // Hop to the next fixation centre.
        let amp_deg = amp_dist
            .sample(rng)
            .clamp(shape::SACC_AMP_MIN_DEG, shape::SACC_AMP_MAX_DEG);
        let (nx, ny) = next_center(geometry, cx, cy, amp_deg, px_deg_h, px_deg_v, rng);
        let flight_ms = 18.0 + 2.2 * amp_deg;
        emit_saccade(
            &mut samples,
            &mut t_ms,
            flight_ms,
            cx,
            cy,
            nx,
            ny,
            pupil_level,
            &mut pupil_noise,
            dt_ms,
            rng,
        );
        cx = nx;
        cy = ny;
    }

    // Occasionally blank out a short run as a blink.
    if rng.random::<f64>() < shape::BLINK_PROB && samples.len() > 60 {
        let span = (0.08 * samples.len() as f64) as usize;
        let start = rng.random_range(10..samples.len() - span - 10);
        for sample in &mut samples[start..start + span] {
            sample.valid = false;
            sample.pupil = None;
        }
    }

    let decision = LogNormal::new(shape::DECISION_MEDIAN_MS.ln(), shape::DECISION_SIGMA)
        .expect("valid lognormal")
        .sample(rng);
    Trial {
        participant_id: participant_id.to_string(),
        block,
        task_kind: task,
        stimulus_id,
        attribute: mix.attribute.clone(),
        category: mix.category,
        rating,
        response_time_ms: t_ms + decision,
        samples,
    }
}

#[allow(clippy::too_many_arguments)]
fn emit_fixation(
    samples: &mut Vec<GazeSample>,
    t_ms: &mut f64,
    duration_ms: f64,
    cx: f64,
    cy: f64,
    px_deg_h: f64,
    px_deg_v: f64,
    pupil_level: f64,
    pupil_noise: &mut f64,
    dt_ms: f64,
    rng: &mut impl Rng,
) {
    let n = (duration_ms / dt_ms).round().max(2.0) as usize;
    let reversion = (shape::JITTER_REVERSION_PER_MS * dt_ms).min(0.5);
    let step_sd = shape::JITTER_SD_DEG * (2.0 * reversion).sqrt();
    let mut jx = 0.0f64;
    let mut jy = 0.0f64;
    for _ in 0..n {
        jx += -reversion * jx + step_sd * standard_normal(rng);
        jy += -reversion * jy + step_sd * standard_normal(rng);
        *pupil_noise +=
            -0.1 * *pupil_noise + shape::PUPIL_NOISE_SD * 0.45 * standard_normal(rng);
        samples.push(GazeSample {
            t_us: (*t_ms * 1000.0) as i64,
            x_px: cx + jx * px_deg_h,
            y_px: cy + jy * px_deg_v,
            pupil: Some((pupil_level + *pupil_noise).max(0.0)),
            valid: true,
        });
        *t_ms += dt_ms;
    }
}

#[allow(clippy::too_many_arguments)]
fn emit_saccade(
    samples: &mut Vec<GazeSample>,
    t_ms: &mut f64,
    flight_ms: f64,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    pupil_level: f64,
    pupil_noise: &mut f64,
    dt_ms: f64,
    rng: &mut impl Rng,
) {
    let n = (flight_ms / dt_ms).round().max(2.0) as usize;
    for i in 0..n {
        let u = (i + 1) as f64 / (n + 1) as f64;
        // Minimum-jerk position profile: 10u^3 - 15u^4 + 6u^5.
        let w = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        *pupil_noise +=
            -0.1 * *pupil_noise + shape::PUPIL_NOISE_SD * 0.45 * standard_normal(rng);
        samples.push(GazeSample {
            t_us: (*t_ms * 1000.0) as i64,
            x_px: x0 + (x1 - x0) * w,
            y_px: y0 + (y1 - y0) * w,
            pupil: Some((pupil_level + *pupil_noise).max(0.0)),
            valid: true,
        });
        *t_ms += dt_ms;
    }
}

fn next_center(
    geometry: &ScreenGeometry,
    cx: f64,
    cy: f64,
    amp_deg: f64,
    px_deg_h: f64,
    px_deg_v: f64,
    rng: &mut impl Rng,
) -> (f64, f64) {
    for _ in 0..16 {
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        let nx = cx + amp_deg * angle.cos() * px_deg_h;
        let ny = cy + amp_deg * angle.sin() * px_deg_v;
        let m = shape::SCREEN_MARGIN_PX;
        if nx > m && nx < geometry.width_px - m && ny > m && ny < geometry.height_px - m {
            return (nx, ny);
        }
    }
    // Fall back toward the centre when cornered.
    (geometry.width_px / 2.0, geometry.height_px / 2.0)
}
