//! Entropy keyframes and the smoothing/differencing helpers used on 1-D traces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{GrayFrame, VideoSequence};

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesOrigin {
    Entropy,
    Smoothed,
    Diff1,
    Diff2,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSeries {
    pub values: Vec<f64>,
    pub origin: SeriesOrigin,
}

impl ScalarSeries {
    pub fn new(values: Vec<f64>, origin: SeriesOrigin) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("series", "must be non-empty"));
        }
        Ok(Self { values, origin })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Shannon entropy in bits, `0 log 0 = 0`.
pub fn entropy(probabilities: &[f64]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::InvalidDistribution("no probabilities".into()));
    }
    if let Some(p) = probabilities
        .iter()
        .find(|p| !(**p >= 0.0) || !p.is_finite())
    {
        return Err(Error::InvalidDistribution(format!(
            "invalid probability {p}"
        )));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    let h: f64 = probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    // a single certain outcome gives -0.0
    Ok(h.max(0.0))
}

/// Entropy of the normalized 256-bin intensity histogram.
pub fn frame_entropy(frame: &GrayFrame) -> f64 {
    let mut counts = [0u64; 256];
    for &p in frame.pixels() {
        counts[p as usize] += 1;
    }
    let n = frame.pixels().len() as f64;
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    entropy(&probs).expect("histogram is a valid distribution")
}

pub fn entropy_series(seq: &VideoSequence) -> ScalarSeries {
    let values = seq.frames().par_iter().map(frame_entropy).collect();
    ScalarSeries {
        values,
        origin: SeriesOrigin::Entropy,
    }
}

/// Centered moving average; near the ends the window shrinks symmetrically so
/// it stays centered. `window` must be odd.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let r = half.min(i).min(n - 1 - i);
            let slice = &values[i - r..=i + r];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

pub fn smooth(series: &ScalarSeries, window: usize) -> Result<ScalarSeries> {
    if window == 0 || window % 2 == 0 || window > series.len() {
        return Err(Error::param(
            "window",
            format!("{window} must be odd and in 1..={}", series.len()),
        ));
    }
    Ok(ScalarSeries {
        values: moving_average(&series.values, window),
        origin: SeriesOrigin::Smoothed,
    })
}

pub fn difference(series: &ScalarSeries, order: usize) -> Result<ScalarSeries> {
    let origin = match order {
        1 => SeriesOrigin::Diff1,
        2 => SeriesOrigin::Diff2,
        _ => return Err(Error::param("order", format!("{order} not in {{1, 2}}"))),
    };
    if series.len() <= order {
        return Err(Error::param(
            "series",
            format!("length {} too short for order {order}", series.len()),
        ));
    }
    let mut v = series.values.clone();
    for _ in 0..order {
        v = v.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(ScalarSeries { values: v, origin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframes {
    pub indices: Vec<usize>,
    /// Fewer qualifying peaks than requested.
    pub shortfall: bool,
}

/// Strict local maxima of `values`; a plateau counts once at its first index
/// when both neighbours of the plateau are lower. The ends qualify when their
/// single neighbour is lower.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == n || values[j + 1] < values[i];
        if left_lower && right_lower && n > 1 && !(i == 0 && j + 1 == n) {
            peaks.push(i);
        }
        i = j + 1;
    }
    peaks
}

/// Greedy top-`count` peaks of `series` (already smoothed by the caller) with
/// pairwise separation of at least `min_separation`. Ties go to the lower index.
pub fn extract_keyframes(
    series: &ScalarSeries,
    count: usize,
    min_separation: usize,
) -> Result<Keyframes> {
    if series.len() < count {
        return Err(Error::param(
            "count",
            format!("{count} exceeds series length {}", series.len()),
        ));
    }
    let v = &series.values;
    let mut peaks = local_maxima(v);
    peaks.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    for p in peaks {
        if chosen.len() == count {
            break;
        }
        if chosen.iter().all(|&c| c.abs_diff(p) >= min_separation) {
            chosen.push(p);
        }
    }
    Ok(Keyframes {
        shortfall: chosen.len() < count,
        indices: chosen,
    })
}
