//! Flat-table dataset files.
//!
//! The main file is a UTF-8 delimited table with a mandatory header row:
//! one row per gaze sample, columns `participant, block, task, stimulus,
//! attribute, category, rating, response_time_ms, t_us, x_px, y_px, pupil,
//! valid`. Trial boundaries are inferred from a change in
//! `(participant, stimulus, task)`. Missing pupil values are written as an
//! empty field.
//!
//! Demographics and recording geometry do not fit the per-sample grid, so
//! they live in two sidecar files next to the main table
//! (`<stem>.profiles.csv`, `<stem>.meta.json`). Both are optional when
//! parsing; defaults are substituted if absent.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{
    Category, Dataset, GazeSample, ParticipantProfile, TaskKind, Trial, validate_dataset,
};
use crate::error::{Error, Result};
use crate::geometry::ScreenGeometry;

pub const SAMPLE_HEADER: [&str; 13] = [
    "participant",
    "block",
    "task",
    "stimulus",
    "attribute",
    "category",
    "rating",
    "response_time_ms",
    "t_us",
    "x_px",
    "y_px",
    "pupil",
    "valid",
];

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    format: String,
    geometry: ScreenGeometry,
    levels: u32,
}

const META_FORMAT: &str = "gazedp-dataset/1";

fn profiles_path(table: &Path) -> PathBuf {
    table.with_extension("profiles.csv")
}

fn meta_path(table: &Path) -> PathBuf {
    table.with_extension("meta.json")
}

/// Write `dataset` as a flat sample table plus its two sidecar files.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SAMPLE_HEADER)?;
    for trial in &dataset.trials {
        for s in &trial.samples {
            w.write_record([
                trial.participant_id.as_str(),
                &trial.block.to_string(),
                trial.task_kind.name(),
                trial.stimulus_id.as_str(),
                trial.attribute.as_str(),
                trial.category.name(),
                &trial.rating.to_string(),
                &format_float(trial.response_time_ms),
                &s.t_us.to_string(),
                &format_float(s.x_px),
                &format_float(s.y_px),
                &s.pupil.map(format_float).unwrap_or_default(),
                if s.valid { "true" } else { "false" },
            ])?;
        }
    }
    w.flush()?;

    let mut pw = csv::Writer::from_path(profiles_path(path))?;
    pw.write_record(["participant", "age_years", "gender", "nationality", "privacy_expert"])?;
    for p in &dataset.profiles {
        pw.write_record([
            p.participant_id.as_str(),
            &p.age_years.to_string(),
            p.gender.as_str(),
            p.nationality.as_str(),
            if p.privacy_expert { "true" } else { "false" },
        ])?;
    }
    pw.flush()?;

    let meta = DatasetMeta {
        format: META_FORMAT.to_string(),
        geometry: dataset.geometry,
        levels: dataset.levels,
    };
    std::fs::write(meta_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Shortest representation that round-trips the f64 exactly.
fn format_float(v: f64) -> String {
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // `{}` on f64 prints the shortest string that parses back to the same
    // bits, which is exactly the round-trip guarantee the table needs.
    format!("{v}")
}

struct RowCtx {
    line: usize,
}

impl RowCtx {
    fn parse<T: std::str::FromStr>(&self, field: &str, name: &str) -> Result<T> {
        field.trim().parse().map_err(|_| Error::Parse {
            line: self.line,
            message: format!("cannot parse {name} from '{field}'"),
        })
    }
}

/// Parse a flat sample table (and any sidecars) back into a [`Dataset`].
///
/// Row order is preserved into trial sample order. The result is guaranteed
/// to pass [`validate_dataset`]; violations surface as errors here.
pub fn parse_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    {
        let headers = reader.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got != SAMPLE_HEADER {
            return Err(Error::Schema {
                line: 1,
                message: format!(
                    "header mismatch: expected {:?}, got {:?}",
                    SAMPLE_HEADER, got
                ),
            });
        }
    }

    let meta = read_meta(path)?;
    let mut trials: Vec<Trial> = Vec::new();
    let mut current_key: Option<(String, String, TaskKind)> = None;

    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let ctx = RowCtx { line };
        let record = record?;
        if record.len() != SAMPLE_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", SAMPLE_HEADER.len(), record.len()),
            });
        }
        let participant = record[0].trim().to_string();
        if participant.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty participant id".into(),
            });
        }
        let block: u32 = ctx.parse(&record[1], "block")?;
        let task = TaskKind::parse(record[2].trim()).ok_or_else(|| Error::Schema {
            line,
            message: format!("unknown task '{}'", &record[2]),
        })?;
        let stimulus = record[3].trim().to_string();
        let attribute = record[4].trim().to_string();
        if attribute.is_empty() {
            return Err(Error::Schema {
                line,
                message: "empty attribute".into(),
            });
        }
        let category = Category::parse(record[5].trim()).ok_or_else(|| Error::Schema {
            line,
            message: format!("unknown category '{}'", &record[5]),
        })?;
        let rating: u32 = ctx.parse(&record[6], "rating")?;
        if rating < 1 || rating > meta.levels {
            return Err(Error::Validation(format!(
                "line {line}: rating {rating} outside 1..={}",
                meta.levels
            )));
        }
        let response_time_ms: f64 = ctx.parse(&record[7], "response_time_ms")?;
        let t_us: i64 = ctx.parse(&record[8], "t_us")?;
        let x_px: f64 = ctx.parse(&record[9], "x_px")?;
        let y_px: f64 = ctx.parse(&record[10], "y_px")?;
        let pupil = if record[11].trim().is_empty() {
            None
        } else {
            Some(ctx.parse::<f64>(&record[11], "pupil")?)
        };
        let valid: bool = ctx.parse(&record[12], "valid")?;

        let sample = GazeSample { t_us, x_px, y_px, pupil, valid };
        let key = (participant.clone(), stimulus.clone(), task);
        if current_key.as_ref() != Some(&key) {
            trials.push(Trial {
                participant_id: participant,
                block,
                task_kind: task,
                stimulus_id: stimulus,
                attribute,
                category,
                rating,
                response_time_ms,
                samples: Vec::new(),
            });
            current_key = Some(key);
        }
        trials.last_mut().expect("trial pushed above").samples.push(sample);
    }

    let profiles = read_profiles(path, &trials)?;
    let dataset = Dataset {
        geometry: meta.geometry,
        profiles,
        trials,
        levels: meta.levels,
    };
    let report = validate_dataset(&dataset);
    if let Some(v) = report.violations.first() {
        return Err(Error::Validation(format!("{}: {}", v.location, v.message)));
    }
    Ok(dataset)
}

fn read_meta(table: &Path) -> Result<DatasetMeta> {
    let p = meta_path(table);
    if p.exists() {
        let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        Ok(meta)
    } else {
        Ok(DatasetMeta {
            format: META_FORMAT.to_string(),
            geometry: ScreenGeometry::lab_default(),
            levels: 7,
        })
    }
}

fn read_profiles(table: &Path, trials: &[Trial]) -> Result<Vec<ParticipantProfile>> {
    let p = profiles_path(table);
    if p.exists() {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(p)?;
        let mut out = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let ctx = RowCtx { line };
            let record = record?;
            out.push(ParticipantProfile {
                participant_id: record[0].trim().to_string(),
                age_years: ctx.parse(&record[1], "age_years")?,
                gender: record[2].trim().to_string(),
                nationality: record[3].trim().to_string(),
                privacy_expert: ctx.parse(&record[4], "privacy_expert")?,
            });
        }
        Ok(out)
    } else {
        // No sidecar: synthesize neutral profiles from the ids seen in the
        // table so the dataset still validates.
        let mut ids: Vec<&str> = trials.iter().map(|t| t.participant_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        Ok(ids
            .into_iter()
            .map(|id| ParticipantProfile {
                participant_id: id.to_string(),
                age_years: 30,
                gender: "unknown".into(),
                nationality: "unknown".into(),
                privacy_expert: false,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_trial_csv() -> String {
        let mut s = String::from(
            "participant,block,task,stimulus,attribute,category,rating,response_time_ms,t_us,x_px,y_px,pupil,valid\n",
        );
        for t in 0..2 {
            for i in 0..3 {
                s.push_str(&format!(
                    "p01,1,free_view,s{t},credit_card,documents,{},1200,{},960,540,{},true\n",
                    t + 2,
                    i * 500,
                    if i == 1 { "" } else { "480" },
                ));
            }
        }
        s
    }

    #[test]
    fn parses_minimal_two_trial_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, two_trial_csv()).unwrap();
        let d = parse_dataset(&path).unwrap();
        assert_eq!(d.trials.len(), 2);
        assert_eq!(d.profiles.len(), 1);
        assert_eq!(d.trials[0].samples.len(), 3);
        assert_eq!(d.trials[0].samples[1].pupil, None);
        assert!(validate_dataset(&d).is_clean());
    }

    #[test]
    fn rating_out_of_bounds_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut text = two_trial_csv();
        text.push_str("p01,1,free_view,s9,credit_card,documents,9,1200,0,960,540,480,true\n");
        std::fs::write(&path, text).unwrap();
        let err = parse_dataset(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rating 9"), "{msg}");
        assert!(msg.contains("line 8"), "{msg}");
    }

    #[test]
    fn unknown_category_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut text = two_trial_csv();
        text.push_str("p01,1,free_view,s9,credit_card,secrets,3,1200,0,960,540,480,true\n");
        std::fs::write(&path, text).unwrap();
        let err = parse_dataset(&path).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "{err}");
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut text = two_trial_csv();
        text.push_str("p01,1,free_view,s9,credit_card,documents,not_a_number,1200,0,960,540,480,true\n");
        std::fs::write(&path, text).unwrap();
        let err = parse_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("line 8"), "{err}");
    }
}
