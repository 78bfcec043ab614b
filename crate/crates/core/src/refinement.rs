//! Wall refinement with position KL-divergence signals and pixel-to-mm mapping.
//!
//! For the left wall, each column `d` in `[d_left, d_center]` gets
//! `L(d) = D(GL_d || GL_center)` where `GL` is an intensity histogram. The
//! signal is weighted by a Gaussian centered in its domain and the wall is the
//! dominant stationary point of the weighted signal. The right wall mirrors this.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::imaging::GrayFrame;
use crate::localization::{
    column_sum_signal, find_flank_peaks, fit_frame, foreground_mask, locate_center, mass_midpoint,
    BoundarySet, ColumnSignal, GmmModel, GmmParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayDistribution {
    pub bins: Vec<f64>,
    pub epsilon: f64,
}

impl GrayDistribution {
    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    /// Normalizes raw counts, adding `epsilon` to every bin before renormalizing.
    pub fn from_counts(counts: &[u64], epsilon: f64) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(Error::InvalidDistribution("no samples".into()));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::param("epsilon", "must be >= 0"));
        }
        let b = counts.len() as f64;
        let bins = counts
            .iter()
            .map(|&c| (c as f64 / total as f64 + epsilon) / (1.0 + b * epsilon))
            .collect();
        Ok(Self { bins, epsilon })
    }

    pub fn from_masses(bins: Vec<f64>) -> Result<Self> {
        let total: f64 = bins.iter().sum();
        if bins.is_empty() || bins.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("masses {bins:?}")));
        }
        Ok(Self { bins, epsilon: 0.0 })
    }
}

pub fn bin_of(value: u8, bin_count: usize) -> usize {
    value as usize * bin_count / 256
}

/// Raw histogram counts of every pixel in `columns` (half-open).
pub fn column_counts(
    frame: &GrayFrame,
    columns: std::ops::Range<usize>,
    bin_count: usize,
) -> Result<Vec<u64>> {
    if columns.is_empty() || columns.end > frame.width() {
        return Err(Error::param(
            "columns",
            format!("{columns:?} is empty or outside width {}", frame.width()),
        ));
    }
    if bin_count == 0 || bin_count > 256 {
        return Err(Error::param(
            "bin_count",
            format!("{bin_count} not in 1..=256"),
        ));
    }
    let mut counts = vec![0u64; bin_count];
    for y in 0..frame.height() {
        for &p in &frame.row(y)[columns.clone()] {
            counts[bin_of(p, bin_count)] += 1;
        }
    }
    Ok(counts)
}

pub fn gray_distribution(
    frame: &GrayFrame,
    columns: std::ops::Range<usize>,
    bin_count: usize,
    epsilon: f64,
) -> Result<GrayDistribution> {
    GrayDistribution::from_counts(&column_counts(frame, columns, bin_count)?, epsilon)
}

/// `D(p || q) = sum p ln(p / q)`, with `0 ln 0 = 0`.
pub fn kl_divergence(p: &GrayDistribution, q: &GrayDistribution) -> Result<f64> {
    if p.bin_count() != q.bin_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} bins vs {} bins",
            p.bin_count(),
            q.bin_count()
        )));
    }
    let mut d = 0.0;
    for (&a, &b) in p.bins.iter().zip(&q.bins) {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::InvalidDistribution(
                    "q lacks support where p > 0".into(),
                ));
            }
            d += a * (a / b).ln();
        }
    }
    Ok(d.max(0.0))
}

/// How `GL_d` is gathered for each position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlMode {
    /// Column `d` alone.
    Column,
    /// Accumulated strip from the outer bound to `d`.
    Strip,
}

impl std::str::FromStr for GlMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column" => Ok(Self::Column),
            "strip" => Ok(Self::Strip),
            _ => Err(Error::param(
                "gl_mode",
                format!("`{s}` is not column or strip"),
            )),
        }
    }
}

impl std::fmt::Display for GlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Column => "column",
            Self::Strip => "strip",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlParams {
    pub bin_count: usize,
    pub epsilon: f64,
    pub mode: GlMode,
}

impl Default for KlParams {
    fn default() -> Self {
        Self {
            bin_count: 32,
            epsilon: 1e-6,
            mode: GlMode::Column,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSignal {
    pub side: Side,
    /// First column of the domain; `raw[i]` belongs to column `start + i`.
    pub start: usize,
    pub raw: Vec<f64>,
    pub weighted: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

impl KlSignal {
    /// Last column of the domain (inclusive).
    pub fn end(&self) -> usize {
        self.start + self.raw.len() - 1
    }

    pub fn columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.start..=self.end()
    }
}

/// `L(d)` over `[d_left, d_center]` (left) or `[d_center, d_right]` (right),
/// compared against the single column at `d_center`.
pub fn kl_signal(
    frame: &GrayFrame,
    bounds: &BoundarySet,
    side: Side,
    params: &KlParams,
) -> Result<KlSignal> {
    if bounds.d_right >= frame.width() {
        return Err(Error::param(
            "boundaries",
            format!("d_right {} outside width {}", bounds.d_right, frame.width()),
        ));
    }
    let c = bounds.d_center;
    let center = gray_distribution(frame, c..c + 1, params.bin_count, params.epsilon)?;
    let (start, end) = match side {
        Side::Left => (bounds.d_left, c),
        Side::Right => (c, bounds.d_right),
    };
    let raw = (start..=end)
        .map(|d| {
            let cols = match (params.mode, side) {
                (GlMode::Column, _) => d..d + 1,
                (GlMode::Strip, Side::Left) => bounds.d_left..d + 1,
                (GlMode::Strip, Side::Right) => d..bounds.d_right + 1,
            };
            kl_divergence(
                &gray_distribution(frame, cols, params.bin_count, params.epsilon)?,
                &center,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KlSignal {
        side,
        start,
        raw,
        weighted: Vec::new(),
        mu: f64::NAN,
        sigma: f64::NAN,
    })
}

pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Multiplies `L` by a normal density with `mu` at the domain midpoint and
/// `sigma` a sixth of the domain range.
pub fn apply_gaussian_weight(signal: &KlSignal) -> Result<KlSignal> {
    let range = (signal.raw.len() as f64) - 1.0;
    if range <= 0.0 {
        return Err(Error::param("kl domain", "zero-width domain"));
    }
    let mu = signal.start as f64 + range / 2.0;
    let sigma = range / 6.0;
    let weighted = signal
        .raw
        .iter()
        .zip(signal.columns())
        .map(|(&l, d)| normal_pdf(d as f64, mu, sigma) * l)
        .collect();
    Ok(KlSignal {
        weighted,
        mu,
        sigma,
        ..signal.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedBoundary {
    /// Column of the selected stationary point of the weighted signal.
    pub peak: usize,
    /// Wall position as a pixel-edge coordinate.
    pub edge: usize,
    /// No interior stationary point existed; `peak` is the argmax fallback.
    pub low_confidence: bool,
}

/// Picks the stationary point of the weighted signal.
///
/// Scanning from the outer end of the domain toward the center, every interior
/// local maximum is a candidate and the one with the largest weighted value
/// wins (earliest in scan order on ties). Without any candidate the argmax is
/// used and flagged. The peak is the last fat column before the sheath, so the
/// wall edge sits just inside it: `peak + 1` on the left, `peak` on the right.
pub fn refine_boundary(signal: &KlSignal) -> Result<RefinedBoundary> {
    let n = signal.weighted.len();
    if n < 3 || n != signal.raw.len() {
        return Err(Error::param(
            "kl domain",
            format!("need a weighted domain of at least 3 columns, got {n}"),
        ));
    }
    // scan order: outer end first
    let order: Vec<usize> = match signal.side {
        Side::Left => (0..n).collect(),
        Side::Right => (0..n).rev().collect(),
    };
    let w: Vec<f64> = order.iter().map(|&i| signal.weighted[i]).collect();
    let mut best: Option<usize> = None;
    for k in 1..n - 1 {
        if w[k] - w[k - 1] > 0.0 && w[k + 1] - w[k] <= 0.0 && best.is_none_or(|b| w[k] > w[b]) {
            best = Some(k);
        }
    }
    let low_confidence = best.is_none();
    let k = best.unwrap_or_else(|| {
        let mut arg = 0;
        for k in 1..n {
            if w[k] > w[arg] {
                arg = k;
            }
        }
        arg
    });
    let peak = signal.start + order[k];
    let edge = match signal.side {
        Side::Left => (peak + 1).min(signal.end()),
        Side::Right => peak.max(signal.start),
    };
    Ok(RefinedBoundary {
        peak,
        edge,
        low_confidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Mm,
    Px,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diameter {
    pub value: f64,
    pub unit: Unit,
}

/// `(right - left) * mm_per_pixel`; without calibration the pixel width is
/// returned tagged as pixels.
pub fn map_to_mm(left: usize, right: usize, mm_per_pixel: Option<f64>) -> Result<Diameter> {
    if right <= left {
        return Err(Error::param(
            "boundaries",
            format!("right wall {right} is not right of left wall {left}"),
        ));
    }
    let px = (right - left) as f64;
    Ok(match mm_per_pixel {
        Some(s) => Diameter {
            value: px * s,
            unit: Unit::Mm,
        },
        None => Diameter {
            value: px,
            unit: Unit::Px,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    pub gmm: GmmParams,
    pub kl: KlParams,
    /// Moving-average window applied to `v(n)` before the trough walk and peak search.
    pub smoothing_window: usize,
    /// Minimum flank peak rise over the trough, as a fraction of the signal range.
    pub peak_prominence: f64,
}

impl Default for MeasureParams {
    fn default() -> Self {
        Self {
            gmm: GmmParams::default(),
            kl: KlParams::default(),
            smoothing_window: 9,
            peak_prominence: 0.25,
        }
    }
}

impl MeasureParams {
    pub fn validate(&self) -> Result<()> {
        self.gmm.validate()?;
        if self.kl.bin_count == 0 || self.kl.bin_count > 256 {
            return Err(Error::param("bins", "must be in 1..=256"));
        }
        if !(self.kl.epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be > 0"));
        }
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(Error::param("smoothing window", "must be odd"));
        }
        if !(0.0..=1.0).contains(&self.peak_prominence) {
            return Err(Error::param("peak prominence", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Every intermediate of one measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub signal: ColumnSignal,
    pub smoothed: ColumnSignal,
    pub kappa: Vec<f64>,
    pub gmm: GmmModel,
    pub d_start: usize,
    pub bounds: BoundarySet,
    pub left: KlSignal,
    pub right: KlSignal,
    pub left_wall: RefinedBoundary,
    pub right_wall: RefinedBoundary,
    /// Rows `[start, end)` the histograms were drawn from.
    pub rows: (usize, usize),
    pub diameter_px: f64,
    pub diameter: Diameter,
}

impl Measurement {
    pub fn low_confidence(&self) -> bool {
        self.left_wall.low_confidence || self.right_wall.low_confidence
    }
}

/// Localizes and measures the sheath on one frame.
///
/// `v(n)`, the GMM and the mass midpoint use the whole frame; the KL histograms
/// use only `rows` (the whole frame when `None`), which places the measurement
/// depth. Errors carry the failing stage and `frame_index`.
pub fn measure_onsd(
    frame: &GrayFrame,
    rows: Option<(usize, usize)>,
    params: &MeasureParams,
    frame_index: usize,
) -> Result<Measurement> {
    params.validate()?;
    let tag = |stage: &'static str| move |e: Error| e.at_stage(stage, frame_index);

    let rows = rows.unwrap_or((0, frame.height()));
    if rows.0 >= rows.1 || rows.1 > frame.height() {
        return Err(Error::param(
            "measure rows",
            format!("{}..{} outside height {}", rows.0, rows.1, frame.height()),
        ));
    }

    let signal = column_sum_signal(frame);
    let smoothed = signal
        .smoothed(params.smoothing_window)
        .map_err(tag("column signal"))?;
    let gmm = fit_frame(frame, &params.gmm).map_err(tag("gmm"))?;
    let mask = foreground_mask(frame, &gmm).map_err(tag("foreground"))?;
    let kappa = crate::localization::cumulative_mass(&mask).map_err(tag("mass midpoint"))?;
    let d_start = mass_midpoint(&mask).map_err(tag("mass midpoint"))?;
    let d_center = locate_center(&smoothed, d_start).map_err(tag("center"))?;
    let (d_left, d_right) = find_flank_peaks(
        &signal,
        d_center,
        params.smoothing_window,
        params.peak_prominence,
    )
    .map_err(tag("flank peaks"))?;
    let mut bounds = BoundarySet::new(d_left, d_center, d_right).map_err(tag("flank peaks"))?;

    let band = frame.rows(rows.0, rows.1).map_err(tag("kl"))?;
    let left = kl_signal(&band, &bounds, Side::Left, &params.kl)
        .and_then(|s| apply_gaussian_weight(&s))
        .map_err(tag("kl"))?;
    let right = kl_signal(&band, &bounds, Side::Right, &params.kl)
        .and_then(|s| apply_gaussian_weight(&s))
        .map_err(tag("kl"))?;
    let left_wall = refine_boundary(&left).map_err(tag("refine"))?;
    let right_wall = refine_boundary(&right).map_err(tag("refine"))?;
    bounds.refined_left = Some(left_wall.edge);
    bounds.refined_right = Some(right_wall.edge);

    let diameter =
        map_to_mm(left_wall.edge, right_wall.edge, frame.mm_per_pixel()).map_err(tag("mapping"))?;
    Ok(Measurement {
        signal,
        smoothed,
        kappa,
        gmm,
        d_start,
        bounds,
        left,
        right,
        left_wall,
        right_wall,
        rows,
        diameter_px: (right_wall.edge - left_wall.edge) as f64,
        diameter,
    })
}
