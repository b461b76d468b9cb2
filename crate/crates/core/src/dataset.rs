//! Trial-level dataset model: raw gaze samples grouped into rated trials,
//! participant profiles, and whole-dataset validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ScreenGeometry;

/// The nine attribute groups a stimulus can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    PersonalInformation,
    Documents,
    Medical,
    Employment,
    Life,
    Relationship,
    Whereabouts,
    OnlineActivity,
    Automobile,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::PersonalInformation,
        Category::Documents,
        Category::Medical,
        Category::Employment,
        Category::Life,
        Category::Relationship,
        Category::Whereabouts,
        Category::OnlineActivity,
        Category::Automobile,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Category::PersonalInformation => "personal_information",
            Category::Documents => "documents",
            Category::Medical => "medical",
            Category::Employment => "employment",
            Category::Life => "life",
            Category::Relationship => "relationship",
            Category::Whereabouts => "whereabouts",
            Category::OnlineActivity => "online_activity",
            Category::Automobile => "automobile",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.iter().copied().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FreeView,
    Search,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::FreeView => "free_view",
            TaskKind::Search => "search",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        match s {
            "free_view" => Some(TaskKind::FreeView),
            "search" => Some(TaskKind::Search),
            _ => None,
        }
    }
}

/// One tracker sample. Invalid samples (blinks, track loss) keep their
/// timestamp but are skipped by event detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Microseconds since trial onset.
    pub t_us: i64,
    pub x_px: f64,
    pub y_px: f64,
    /// Pupil area in arbitrary tracker units; `None` when not recorded.
    pub pupil: Option<f64>,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub participant_id: String,
    pub age_years: u32,
    pub gender: String,
    pub nationality: String,
    pub privacy_expert: bool,
}

/// One stimulus presentation: context, the 1..=L privacy rating, and the
/// raw gaze samples recorded while it was shown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub participant_id: String,
    pub block: u32,
    pub task_kind: TaskKind,
    pub stimulus_id: String,
    pub attribute: String,
    pub category: Category,
    pub rating: u32,
    pub response_time_ms: f64,
    pub samples: Vec<GazeSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub geometry: ScreenGeometry,
    pub profiles: Vec<ParticipantProfile>,
    pub trials: Vec<Trial>,
    /// Number of privacy levels; ratings run 1..=levels.
    pub levels: u32,
}

impl Dataset {
    pub fn profile(&self, participant_id: &str) -> Option<&ParticipantProfile> {
        self.profiles.iter().find(|p| p.participant_id == participant_id)
    }
}

/// A single invariant violation, with enough location detail to find it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

/// All violations found in a dataset. Empty iff every invariant holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

/// Check every dataset, profile, and trial invariant. Violations are data,
/// not errors; parsing and synthesis both promise to pass this cleanly.
pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();

    if let Err(e) = dataset.geometry.check() {
        report.push("geometry", e.to_string());
    }
    if dataset.levels < 2 {
        report.push("dataset", format!("levels must be >= 2, got {}", dataset.levels));
    }

    let mut seen = std::collections::BTreeSet::new();
    for profile in &dataset.profiles {
        let loc = format!("profile {}", profile.participant_id);
        if !seen.insert(profile.participant_id.clone()) {
            report.push(&loc, "duplicate participant_id");
        }
        if !(18..=120).contains(&profile.age_years) {
            report.push(&loc, format!("age_years {} outside 18..=120", profile.age_years));
        }
    }

    for (t_idx, trial) in dataset.trials.iter().enumerate() {
        let loc = format!(
            "trial {} (participant {}, stimulus {})",
            t_idx, trial.participant_id, trial.stimulus_id
        );
        if !seen.contains(&trial.participant_id) {
            report.push(&loc, "participant_id not present in profiles");
        }
        if trial.rating < 1 || trial.rating > dataset.levels {
            report.push(
                &loc,
                format!("rating {} outside 1..={}", trial.rating, dataset.levels),
            );
        }
        if !(1..=4).contains(&trial.block) {
            report.push(&loc, format!("block {} outside 1..=4", trial.block));
        }
        if trial.samples.is_empty() {
            report.push(&loc, "trial has no samples");
        }
        if trial.response_time_ms < 0.0 || !trial.response_time_ms.is_finite() {
            report.push(&loc, format!("response_time_ms {} invalid", trial.response_time_ms));
        }
        let mut prev = i64::MIN;
        for (s_idx, sample) in trial.samples.iter().enumerate() {
            if sample.t_us < prev {
                report.push(
                    &loc,
                    format!(
                        "sample {s_idx}: timestamp {} not nondecreasing (previous {prev})",
                        sample.t_us
                    ),
                );
                break;
            }
            prev = sample.t_us;
            if let Some(p) = sample.pupil {
                if p < 0.0 || !p.is_finite() {
                    report.push(&loc, format!("sample {s_idx}: pupil {p} negative or non-finite"));
                    break;
                }
            }
        }
    }

    report
}

/// Decimate a timestamp-ordered sample list to at most `target_hz` by
/// nearest-sample selection; the first sample is always retained and no
/// interpolation happens.
pub fn downsample(samples: &[GazeSample], target_hz: f64) -> Result<Vec<GazeSample>> {
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::argument(format!(
            "target_hz must be positive, got {target_hz}"
        )));
    }
    if samples.windows(2).any(|w| w[1].t_us < w[0].t_us) {
        return Err(Error::argument("samples must be timestamp-ordered"));
    }
    let period_us = 1e6 / target_hz;
    let mut out = Vec::new();
    let mut next_t = f64::NEG_INFINITY;
    for &s in samples {
        if (s.t_us as f64) >= next_t {
            out.push(s);
            next_t = s.t_us as f64 + period_us;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t_us: i64) -> GazeSample {
        GazeSample {
            t_us,
            x_px: 960.0,
            y_px: 540.0,
            pupil: Some(500.0),
            valid: true,
        }
    }

    fn small_dataset() -> Dataset {
        Dataset {
            geometry: ScreenGeometry::lab_default(),
            profiles: vec![ParticipantProfile {
                participant_id: "p01".into(),
                age_years: 25,
                gender: "female".into(),
                nationality: "de".into(),
                privacy_expert: false,
            }],
            trials: vec![Trial {
                participant_id: "p01".into(),
                block: 1,
                task_kind: TaskKind::FreeView,
                stimulus_id: "s001".into(),
                attribute: "credit_card".into(),
                category: Category::Documents,
                rating: 2,
                response_time_ms: 1500.0,
                samples: (0..10).map(|i| sample(i * 500)).collect(),
            }],
            levels: 7,
        }
    }

    #[test]
    fn valid_dataset_has_empty_report() {
        assert!(validate_dataset(&small_dataset()).is_clean());
    }

    #[test]
    fn missing_participant_is_reported() {
        let mut d = small_dataset();
        d.trials[0].participant_id = "ghost".into();
        let report = validate_dataset(&d);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].message.contains("not present"));
    }

    #[test]
    fn nonmonotone_timestamps_name_trial_and_sample() {
        let mut d = small_dataset();
        d.trials[0].samples[4].t_us = 0;
        let report = validate_dataset(&d);
        assert!(!report.is_clean());
        let v = &report.violations[0];
        assert!(v.location.contains("trial 0"), "{}", v.location);
        assert!(v.message.contains("sample 4"), "{}", v.message);
    }

    #[test]
    fn rating_above_levels_is_reported() {
        let mut d = small_dataset();
        d.trials[0].rating = 9;
        let report = validate_dataset(&d);
        assert!(report.violations.iter().any(|v| v.message.contains("rating 9")));
    }

    #[test]
    fn downsample_2khz_to_30hz_keeps_about_30() {
        let samples: Vec<GazeSample> = (0..2000).map(|i| sample(i * 500)).collect();
        let out = downsample(&samples, 30.0).unwrap();
        assert!(
            (out.len() as i64 - 30).abs() <= 1,
            "kept {} samples",
            out.len()
        );
        assert_eq!(out[0].t_us, 0);
        // Spacing respects the target period.
        for w in out.windows(2) {
            assert!(w[1].t_us - w[0].t_us >= (1e6 / 30.0) as i64);
        }
    }

    #[test]
    fn downsample_at_source_rate_is_identity() {
        let samples: Vec<GazeSample> = (0..100).map(|i| sample(i * 1000)).collect();
        let out = downsample(&samples, 1000.0).unwrap();
        assert_eq!(out, samples);
    }

    #[test]
    fn downsample_halving_keeps_every_second_sample() {
        let samples: Vec<GazeSample> = (0..6).map(|i| sample(i * 1000)).collect();
        let out = downsample(&samples, 500.0).unwrap();
        let kept: Vec<i64> = out.iter().map(|s| s.t_us).collect();
        assert_eq!(kept, vec![0, 2000, 4000]);
    }

    #[test]
    fn downsample_is_idempotent() {
        let samples: Vec<GazeSample> = (0..500).map(|i| sample(i * 700 + (i % 3) * 13)).collect();
        let once = downsample(&samples, 120.0).unwrap();
        let twice = downsample(&once, 120.0).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn downsample_rejects_bad_rate_and_order() {
        assert!(downsample(&[sample(0)], 0.0).is_err());
        let bad = vec![sample(1000), sample(0)];
        assert!(downsample(&bad, 10.0).is_err());
    }
}
