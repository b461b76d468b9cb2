//! Recording geometry and pixel/degree conversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical layout of a recording: screen size in pixels and millimetres,
/// viewing distance, and the tracker's sampling rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenGeometry {
    pub width_px: f64,
    pub height_px: f64,
    pub width_mm: f64,
    pub height_mm: f64,
    pub eye_distance_mm: f64,
    pub sample_rate_hz: f64,
}

impl ScreenGeometry {
    pub fn new(
        width_px: f64,
        height_px: f64,
        width_mm: f64,
        height_mm: f64,
        eye_distance_mm: f64,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let g = ScreenGeometry {
            width_px,
            height_px,
            width_mm,
            height_mm,
            eye_distance_mm,
            sample_rate_hz,
        };
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<()> {
        let fields = [
            ("width_px", self.width_px),
            ("height_px", self.height_px),
            ("width_mm", self.width_mm),
            ("height_mm", self.height_mm),
            ("eye_distance_mm", self.eye_distance_mm),
            ("sample_rate_hz", self.sample_rate_hz),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!(
                    "geometry field {name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.sample_rate_hz < 1.0 {
            return Err(Error::validation(format!(
                "sample_rate_hz must be >= 1, got {}",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// A 1920x1080 screen of 545x303 mm viewed from 700 mm, sampled at 2 kHz.
    pub fn lab_default() -> Self {
        ScreenGeometry {
            width_px: 1920.0,
            height_px: 1080.0,
            width_mm: 545.0,
            height_mm: 303.0,
            eye_distance_mm: 700.0,
            sample_rate_hz: 2000.0,
        }
    }
}

/// Pixels per degree of visual angle along each screen axis:
/// `2 * d * tan(0.5 deg)` millimetres per degree, scaled by px/mm per axis.
pub fn px_per_degree(g: &ScreenGeometry) -> Result<(f64, f64)> {
    g.check()?;
    let mm_per_degree = 2.0 * g.eye_distance_mm * (0.5f64.to_radians()).tan();
    let horizontal = mm_per_degree * g.width_px / g.width_mm;
    let vertical = mm_per_degree * g.height_px / g.height_mm;
    Ok((horizontal, vertical))
}

/// Mean of the horizontal and vertical px/deg factors, used for distances
/// that mix both axes (amplitudes, scanpath lengths).
pub fn mean_px_per_degree(g: &ScreenGeometry) -> Result<f64> {
    let (h, v) = px_per_degree(g)?;
    Ok(0.5 * (h + v))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Hand evaluation of the small-angle formula on the lab geometry:
    //   mm/deg = 2 * 700 * tan(0.5 deg) = 12.21730...
    //   horizontal: 12.21730 * 1920 / 545 = 43.0407 px/deg
    //   vertical:   12.21730 * 1080 / 303 = 43.5466 px/deg
    #[test]
    fn lab_geometry_px_per_degree() {
        let (h, v) = px_per_degree(&ScreenGeometry::lab_default()).unwrap();
        assert!((h - 43.04).abs() < 0.01, "horizontal {h}");
        assert!((v - 43.55).abs() < 0.01, "vertical {v}");
    }

    #[test]
    fn doubling_eye_distance_doubles_px_per_degree() {
        let near = ScreenGeometry::lab_default();
        let mut far = near;
        far.eye_distance_mm *= 2.0;
        let (h1, _) = px_per_degree(&near).unwrap();
        let (h2, _) = px_per_degree(&far).unwrap();
        assert!(((h2 / h1) - 2.0).abs() < 0.001 * 2.0);
    }

    #[test]
    fn rejects_nonpositive_fields() {
        let mut g = ScreenGeometry::lab_default();
        g.width_mm = 0.0;
        assert!(px_per_degree(&g).is_err());
    }
}
