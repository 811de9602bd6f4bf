//! Main and secondary peak detection on sampled correlation curves.

use std::f64::consts::{PI, TAU};

use crate::correlations::CorrelationCurve;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 1e-3;

/// Relative tolerance on the spacing of a "uniform" grid.
const GRID_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub u: f64,
    /// Value minus the baseline 1.
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakReport {
    pub main_peaks: Vec<Peak>,
    pub secondary_peaks: Vec<Peak>,
    /// Maxima under the diffraction sidelobe envelope of a main peak.
    pub sidelobes: Vec<Peak>,
    pub threshold: f64,
    pub grid_points: usize,
}

impl PeakReport {
    /// Tallest secondary peak, or 0 when there is none.
    pub fn secondary_height(&self) -> f64 {
        self.secondary_peaks.iter().fold(0.0, |h, p| h.max(p.height))
    }

    pub fn main_height(&self) -> f64 {
        self.main_peaks.iter().fold(0.0, |h, p| h.max(p.height))
    }
}

pub fn find_peaks(curve: &CorrelationCurve, threshold: f64, sites: usize) -> Result<PeakReport> {
    find_peaks_in(&curve.u_grid, &curve.values, threshold, sites)
}

/// Peaks of `values` sampled on the uniform grid `u`.
///
/// A peak is an interior point strictly above both neighbours with
/// value − 1 > `threshold`. It is main when within π/M of some 2πp, p ≥ 1.
/// Other maxima no taller than h/(M² sin²(δ/2)), with h the main height at the
/// nearest 2πp and δ the distance to it, are sidelobes; the rest are secondary.
pub fn find_peaks_in(u: &[f64], values: &[f64], threshold: f64, sites: usize) -> Result<PeakReport> {
    if u.len() != values.len() {
        return Err(Error::LengthMismatch { expected: u.len(), found: values.len() });
    }
    if sites == 0 {
        return Err(Error::InvalidInput("peak classification needs M >= 1".into()));
    }
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidInput(format!("threshold must be finite and >= 0, got {threshold}")));
    }
    check_uniform(u)?;

    let m = sites as f64;
    let window = PI / m;
    // grid-sampled main height near each 2πp, p = 0 included for the self-peak's sidelobes
    let main_height = |p: i64| -> f64 {
        let centre = TAU * p as f64;
        u.iter().zip(values).filter(|(&x, _)| (x - centre).abs() < window).fold(0.0f64, |h, (_, &v)| h.max(v - 1.0))
    };

    let mut report = PeakReport {
        main_peaks: Vec::new(),
        secondary_peaks: Vec::new(),
        sidelobes: Vec::new(),
        threshold,
        grid_points: u.len(),
    };
    for i in 1..values.len().saturating_sub(1) {
        let v = values[i];
        if !(v > values[i - 1] && v > values[i + 1] && v - 1.0 > threshold) {
            continue;
        }
        let peak = Peak { u: u[i], height: v - 1.0 };
        let p = (u[i] / TAU).round() as i64;
        let delta = u[i] - TAU * p as f64;
        if p >= 1 && delta.abs() < window {
            report.main_peaks.push(peak);
            continue;
        }
        let s = (0.5 * delta).sin();
        let envelope = main_height(p) / (m * m * s * s);
        if peak.height <= envelope * (1.0 + 1e-9) + 1e-12 {
            report.sidelobes.push(peak);
        } else {
            report.secondary_peaks.push(peak);
        }
    }
    Ok(report)
}

fn check_uniform(u: &[f64]) -> Result<()> {
    if u.len() < 2 {
        return Ok(());
    }
    let step = u[1] - u[0];
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidInput("u grid must be increasing".into()));
    }
    for w in u.windows(2) {
        if ((w[1] - w[0]) - step).abs() > GRID_TOLERANCE * step {
            return Err(Error::InvalidInput(format!(
                "u grid is not uniform: step {} differs from {step}",
                w[1] - w[0]
            )));
        }
    }
    Ok(())
}
