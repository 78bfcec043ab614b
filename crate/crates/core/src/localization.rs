//! Coarse sheath localization on the column-sum signal.
//!
//! The frame collapses to `v(n) = sum_m P(n, m)`. A two-component intensity
//! GMM separates hyperechoic fat from the sheath, the 0.5-crossing of the
//! fat's cumulative column mass seeds a downhill walk on `v` to the sheath
//! trough, and the nearest peaks either side of it bound the search for the
//! walls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::imaging::{BinaryMask, GrayFrame};
use crate::keyframe::moving_average;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSignal {
    pub values: Vec<f64>,
}

impl ColumnSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("signal", "must be non-empty"));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Centered moving average with shrinking windows at the ends.
    pub fn smoothed(&self, window: usize) -> Result<Self> {
        if window == 0 || window % 2 == 0 {
            return Err(Error::param(
                "smoothing window",
                format!("{window} must be odd"),
            ));
        }
        Ok(Self {
            values: moving_average(&self.values, window),
        })
    }
}

pub fn column_sum_signal(frame: &GrayFrame) -> ColumnSignal {
    let mut values = vec![0.0; frame.width()];
    for y in 0..frame.height() {
        for (v, &p) in values.iter_mut().zip(frame.row(y)) {
            *v += p as f64;
        }
    }
    ColumnSignal { values }
}

/// Cumulative normalized fat mass per column, `kappa(N-1) = 1`.
pub fn cumulative_mass(mask: &BinaryMask) -> Result<Vec<f64>> {
    let cols = column_mass(mask);
    let total: usize = cols.iter().sum();
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    let mut acc = 0;
    Ok(cols
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect())
}

fn column_mass(mask: &BinaryMask) -> Vec<usize> {
    let mut cols = vec![0usize; mask.width()];
    for y in 0..mask.height() {
        for (x, c) in cols.iter_mut().enumerate() {
            *c += mask.is_on(x, y) as usize;
        }
    }
    cols
}

/// Smallest column where the cumulative fat mass reaches one half.
pub fn mass_midpoint(mask: &BinaryMask) -> Result<usize> {
    let cols = column_mass(mask);
    let total: usize = cols.iter().sum();
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    let mut acc = 0;
    for (n, &c) in cols.iter().enumerate() {
        acc += c;
        if 2 * acc >= total {
            return Ok(n);
        }
    }
    unreachable!("cumulative mass reaches the total")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after initialization and after every EM step.
    pub trace: Vec<f64>,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.means.len()
    }

    /// Index of the component with the largest mean (lowest index on ties).
    pub fn brightest(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.means.iter().enumerate() {
            if m > self.means[best] {
                best = i;
            }
        }
        best
    }

    fn log_joint(&self, x: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let v = self.variances[k];
            let d = x - self.means[k];
            *o = self.weights[k].ln()
                - 0.5 * (2.0 * std::f64::consts::PI * v).ln()
                - d * d / (2.0 * v);
        }
    }

    /// Posterior responsibilities of every component for intensity `x`.
    pub fn posterior(&self, x: f64) -> Vec<f64> {
        let mut lj = vec![0.0; self.components()];
        self.log_joint(x, &mut lj);
        let m = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = lj.iter().map(|l| (l - m).exp()).sum();
        lj.iter().map(|l| (l - m).exp() / z).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub components: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Phase of the pixel subsampling used when fitting a frame.
    pub seed: u64,
    /// Fit on every `subsample`-th pixel.
    pub subsample: usize,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            components: 2,
            max_iters: 100,
            tol: 1e-6,
            seed: 0,
            subsample: 4,
        }
    }
}

impl GmmParams {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::param("gmm components", "must be >= 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("gmm max_iters", "must be >= 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param("gmm tol", "must be >= 0"));
        }
        if self.subsample == 0 {
            return Err(Error::param("gmm subsample", "must be >= 1"));
        }
        Ok(())
    }
}

pub const VARIANCE_FLOOR: f64 = 1e-3;

fn sample_variance(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// One-dimensional EM. Means start at the `(k + 0.5) / C` quantiles of the data,
/// variances at the overall variance, weights uniform.
pub fn gmm_fit(data: &[f64], components: usize, max_iters: usize, tol: f64) -> Result<GmmModel> {
    if components == 0 {
        return Err(Error::param("components", "must be >= 1"));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < components.max(2) {
        return Err(Error::DegenerateData(format!(
            "{} distinct intensities for {components} components; fit a single component instead",
            sorted.len()
        )));
    }
    let n = data.len();
    let (mean, var) = sample_variance(data);

    if components == 1 {
        let model = GmmModel {
            weights: vec![1.0],
            means: vec![mean],
            variances: vec![var.max(VARIANCE_FLOOR)],
            iterations: 0,
            log_likelihood: 0.0,
            trace: Vec::new(),
        };
        let ll = log_likelihood(&model, data);
        return Ok(GmmModel {
            log_likelihood: ll,
            trace: vec![ll],
            ..model
        });
    }

    let mut ordered = data.to_vec();
    ordered.sort_by(f64::total_cmp);
    let means = (0..components)
        .map(|k| {
            let q = (k as f64 + 0.5) / components as f64;
            ordered[((q * n as f64) as usize).min(n - 1)]
        })
        .collect();
    let mut model = GmmModel {
        weights: vec![1.0 / components as f64; components],
        means,
        variances: vec![var.max(VARIANCE_FLOOR); components],
        iterations: 0,
        log_likelihood: 0.0,
        trace: Vec::new(),
    };
    let mut ll = log_likelihood(&model, data);
    model.trace.push(ll);

    let mut lj = vec![0.0; components];
    let mut resp = vec![0.0; n * components];
    for _ in 0..max_iters {
        // E step
        for (i, &x) in data.iter().enumerate() {
            model.log_joint(x, &mut lj);
            let m = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = lj.iter().map(|l| (l - m).exp()).sum();
            for k in 0..components {
                resp[i * components + k] = (lj[k] - m).exp() / z;
            }
        }
        // M step
        for k in 0..components {
            let nk: f64 = (0..n).map(|i| resp[i * components + k]).sum();
            if nk <= 0.0 {
                continue;
            }
            let mk = (0..n)
                .map(|i| resp[i * components + k] * data[i])
                .sum::<f64>()
                / nk;
            let vk = (0..n)
                .map(|i| resp[i * components + k] * (data[i] - mk).powi(2))
                .sum::<f64>()
                / nk;
            model.weights[k] = nk / n as f64;
            model.means[k] = mk;
            model.variances[k] = vk.max(VARIANCE_FLOOR);
        }
        model.iterations += 1;
        let next = log_likelihood(&model, data);
        model.trace.push(next);
        let gain = next - ll;
        ll = next;
        if gain < tol {
            break;
        }
    }
    model.log_likelihood = ll;
    Ok(model)
}

pub fn log_likelihood(model: &GmmModel, data: &[f64]) -> f64 {
    let mut lj = vec![0.0; model.components()];
    data.iter()
        .map(|&x| {
            model.log_joint(x, &mut lj);
            let m = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            m + lj.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
        })
        .sum()
}

/// Fits the intensity model on a phase-shifted subsample of the frame's pixels.
pub fn fit_frame(frame: &GrayFrame, params: &GmmParams) -> Result<GmmModel> {
    params.validate()?;
    let step = params.subsample;
    let phase = (params.seed % step as u64) as usize;
    let mut data: Vec<f64> = frame
        .pixels()
        .iter()
        .skip(phase)
        .step_by(step)
        .map(|&p| p as f64)
        .collect();
    if data.len() < params.components {
        data = frame.pixels().iter().map(|&p| p as f64).collect();
    }
    gmm_fit(&data, params.components, params.max_iters, params.tol)
}

/// Fat mask: the brightest component's posterior is at least one half.
pub fn foreground_mask(frame: &GrayFrame, model: &GmmModel) -> Result<BinaryMask> {
    if model.components() < 2 {
        return Err(Error::param(
            "model",
            "foreground needs at least two components",
        ));
    }
    let top = model.brightest();
    let lut: Vec<bool> = (0..=255u8)
        .map(|v| model.posterior(v as f64)[top] >= 0.5)
        .collect();
    Ok(BinaryMask::from_predicate(
        frame.width(),
        frame.height(),
        |x, y| lut[frame.get(x, y) as usize],
    ))
}

/// Walks downhill on `v` one column at a time from `d_start` until both
/// neighbours are no lower. Reaching either end of the signal is an error.
pub fn locate_center(v: &ColumnSignal, d_start: usize) -> Result<usize> {
    let n = v.len();
    if d_start == 0 || d_start >= n.saturating_sub(1) {
        return Err(Error::NoInteriorTrough { start: d_start });
    }
    let s = &v.values;
    let mut d = d_start;
    for _ in 0..n {
        if d == 0 || d == n - 1 {
            return Err(Error::NoInteriorTrough { start: d_start });
        }
        // backward differences at d and d + 1
        let left = s[d] - s[d - 1];
        let right = s[d + 1] - s[d];
        if left <= 0.0 && right >= 0.0 {
            return Ok(d);
        }
        if left > 0.0 && (right >= 0.0 || s[d - 1] <= s[d + 1]) {
            d -= 1;
        } else {
            d += 1;
        }
    }
    Err(Error::NoInteriorTrough { start: d_start })
}

/// Nearest strict peak of `v` on `side` of `d_center` rising at least
/// `min_rise` above the lowest value between it and the center. Endpoints
/// never qualify; a plateau counts if both its outer neighbours are lower and
/// resolves to its column nearest the center.
pub fn nearest_peak(v: &[f64], d_center: usize, side: Side, min_rise: f64) -> Result<usize> {
    let n = v.len();
    let err = || Error::NoFlankPeak {
        side,
        center: d_center,
    };
    let mut i = match side {
        Side::Left => d_center.checked_sub(1).ok_or_else(err)?,
        Side::Right => d_center + 1,
    };
    while i > 0 && i < n.saturating_sub(1) {
        let (mut a, mut b) = (i, i);
        while a > 0 && v[a - 1] == v[i] {
            a -= 1;
        }
        while b + 1 < n && v[b + 1] == v[i] {
            b += 1;
        }
        if a > 0 && b + 1 < n && v[a - 1] < v[i] && v[b + 1] < v[i] {
            let peak = match side {
                Side::Left => b.min(d_center - 1),
                Side::Right => a.max(d_center + 1),
            };
            let between = match side {
                Side::Left => &v[peak..=d_center],
                Side::Right => &v[d_center..=peak],
            };
            let floor = between.iter().cloned().fold(f64::INFINITY, f64::min);
            if v[peak] - floor >= min_rise {
                return Ok(peak);
            }
        }
        i = match side {
            Side::Left => match a.checked_sub(1) {
                Some(j) => j,
                None => break,
            },
            Side::Right => b + 1,
        };
    }
    Err(err())
}

/// Flank peaks of the `window`-smoothed signal either side of the trough.
///
/// A peak must rise above the trough by `prominence` times the range of the
/// smoothed signal, which skips speckle ripples inside the sheath.
pub fn find_flank_peaks(
    v: &ColumnSignal,
    d_center: usize,
    window: usize,
    prominence: f64,
) -> Result<(usize, usize)> {
    if d_center >= v.len() {
        return Err(Error::param(
            "d_center",
            format!("{d_center} outside signal of {}", v.len()),
        ));
    }
    if !(0.0..=1.0).contains(&prominence) {
        return Err(Error::param(
            "prominence",
            format!("{prominence} not in [0, 1]"),
        ));
    }
    let s = v.smoothed(window)?;
    let hi = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = s.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_rise = prominence * (hi - lo);
    Ok((
        nearest_peak(&s.values, d_center, Side::Left, min_rise)?,
        nearest_peak(&s.values, d_center, Side::Right, min_rise)?,
    ))
}

/// Coarse indices from localization plus the wall positions found by refinement.
///
/// Refined walls are pixel-edge coordinates: edge `e` lies between columns
/// `e - 1` and `e`, so the sheath covers columns `refined_left..refined_right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub d_left: usize,
    pub d_center: usize,
    pub d_right: usize,
    pub refined_left: Option<usize>,
    pub refined_right: Option<usize>,
}

impl BoundarySet {
    pub fn new(d_left: usize, d_center: usize, d_right: usize) -> Result<Self> {
        if !(d_left < d_center && d_center < d_right) {
            return Err(Error::param(
                "boundaries",
                format!("need d_left < d_center < d_right, got {d_left}, {d_center}, {d_right}"),
            ));
        }
        Ok(Self {
            d_left,
            d_center,
            d_right,
            refined_left: None,
            refined_right: None,
        })
    }
}
