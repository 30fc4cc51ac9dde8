//! Classification of an Average CPDM series into a shift pattern.
//!
//! Values are normalized by `k`. Windows without activity are gaps and take
//! no part in the slope or reversal counts. Precedence: too few measured
//! points is `indeterminate`; two or more qualifying reversals is
//! `oscillatory`; a least-squares slope at or below `-slope_eps` is
//! `shift_away`; anything else is `steady`.

use serde::{Deserialize, Serialize};

use crate::coreness::CpdmSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftThresholds {
    /// Per-window slope of the normalized series counted as a decline.
    pub slope_eps: f64,
    /// Minimum normalized step size on both sides of a reversal.
    pub amp_eps: f64,
    pub min_points: usize,
}

impl Default for ShiftThresholds {
    fn default() -> Self {
        ShiftThresholds {
            slope_eps: 0.05,
            amp_eps: 0.10,
            min_points: 3,
        }
    }
}

impl ShiftThresholds {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.slope_eps) || !positive(self.amp_eps) || self.min_points == 0 {
            return Err(Error::InvalidParameter(
                "shift thresholds must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftLabel {
    ShiftAway,
    Oscillatory,
    Steady,
    Indeterminate,
}

impl ShiftLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShiftLabel::ShiftAway => "shift_away",
            ShiftLabel::Oscillatory => "oscillatory",
            ShiftLabel::Steady => "steady",
            ShiftLabel::Indeterminate => "indeterminate",
        }
    }
}

impl std::fmt::Display for ShiftLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    pub label: ShiftLabel,
    /// Least-squares slope of the normalized series per window.
    pub slope: f64,
    pub reversals: usize,
    pub touched_zero: bool,
    /// Core-periphery shift structure clash: raised for `shift_away`.
    pub stsc_flag: bool,
    pub measured_points: usize,
    /// Window indices without any activity.
    pub no_activity_windows: Vec<usize>,
    /// Longest run of consecutive no-activity windows.
    pub longest_gap: usize,
}

/// One series point as seen by the classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub index: usize,
    pub average: f64,
    pub no_activity: bool,
}

impl SeriesValue {
    pub fn measured(index: usize, average: f64) -> Self {
        SeriesValue {
            index,
            average,
            no_activity: false,
        }
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn count_reversals(ys: &[f64], amp_eps: f64) -> usize {
    let deltas: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    deltas
        .windows(2)
        .filter(|d| {
            d[0].abs() >= amp_eps && d[1].abs() >= amp_eps && d[0].signum() != d[1].signum()
        })
        .count()
}

pub fn classify_values(values: &[SeriesValue], k: f64, thresholds: &ShiftThresholds) -> Result<ShiftReport> {
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    thresholds.validate()?;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidParameter(format!("k = {k} must be positive")));
    }

    let measured: Vec<&SeriesValue> = values.iter().filter(|v| !v.no_activity).collect();
    let xs: Vec<f64> = measured.iter().map(|v| v.index as f64).collect();
    let ys: Vec<f64> = measured.iter().map(|v| v.average / k).collect();
    let slope = least_squares_slope(&xs, &ys);
    let reversals = count_reversals(&ys, thresholds.amp_eps);

    let label = if measured.len() < thresholds.min_points {
        ShiftLabel::Indeterminate
    } else if reversals >= 2 {
        ShiftLabel::Oscillatory
    } else if slope <= -thresholds.slope_eps {
        ShiftLabel::ShiftAway
    } else {
        ShiftLabel::Steady
    };

    let no_activity_windows: Vec<usize> = values.iter().filter(|v| v.no_activity).map(|v| v.index).collect();
    let mut longest_gap = 0;
    let mut run = 0;
    for v in values {
        run = if v.no_activity { run + 1 } else { 0 };
        longest_gap = longest_gap.max(run);
    }

    Ok(ShiftReport {
        label,
        slope,
        reversals,
        touched_zero: measured.iter().any(|v| v.average == 0.0),
        stsc_flag: label == ShiftLabel::ShiftAway,
        measured_points: measured.len(),
        no_activity_windows,
        longest_gap,
    })
}

pub fn classify_shift(series: &CpdmSeries, k: usize, thresholds: &ShiftThresholds) -> Result<ShiftReport> {
    let values: Vec<SeriesValue> = series
        .points
        .iter()
        .map(|p| SeriesValue {
            index: p.window_index,
            average: p.average,
            no_activity: p.no_activity,
        })
        .collect();
    classify_values(&values, k as f64, thresholds)
}
