//! End-to-end measurement of one video and the plain-text configuration.
//!
//! Tracking, frame scoring, measurement on the best frame and entropy
//! keyframes, in that order.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::io::parse_key_values;
use crate::imaging::VideoSequence;
use crate::keyframe::{entropy_series, extract_keyframes, smooth, Keyframes, ScalarSeries};
use crate::localization::BoundarySet;
use crate::refinement::{measure_onsd, MeasureParams, Measurement, Unit};
use crate::superpixel::{select_optimal_frame, FrameScore, SelectionParams};
use crate::tracking::{track_sequence, KcfParams, RoiBox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyframeParams {
    pub count: usize,
    pub separation: usize,
    pub smoothing: usize,
}

impl Default for KeyframeParams {
    fn default() -> Self {
        Self {
            count: 2,
            separation: 5,
            smoothing: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub selection: SelectionParams,
    pub kcf: KcfParams,
    pub measure: MeasureParams,
    pub keyframe: KeyframeParams,
    pub seed_box: Option<RoiBox>,
    /// Rows `[start, end)` the wall histograms are drawn from.
    pub measure_rows: Option<(usize, usize)>,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            selection: SelectionParams::default(),
            kcf: KcfParams::default(),
            measure: MeasureParams::default(),
            keyframe: KeyframeParams::default(),
            seed_box: None,
            measure_rows: None,
            output_dir: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        what: "config".into(),
        reason: format!("`{key}`: cannot parse `{value}`"),
    })
}

/// Parses a `start,end` row band with `start < end`.
pub fn parse_rows(value: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse {
        what: "config".into(),
        reason: format!("`measure_rows`: expected start,end, got `{value}`"),
    };
    let (a, b) = value.split_once(',').ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    if a >= b {
        return Err(bad());
    }
    Ok((a, b))
}

impl PipelineConfig {
    /// Reads `key=value` lines; keys not given keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (key, value) in parse_key_values(text, "config")? {
            let v = value.as_str();
            let k = key.as_str();
            match k {
                "slic.clusters" => c.selection.target_clusters = parse_num(k, v)?,
                "slic.compactness" => c.selection.compactness = parse_num(k, v)?,
                "slic.iters" => c.selection.max_iters = parse_num(k, v)?,
                "slic.top_k" => c.selection.top_k = parse_num(k, v)?,
                "kcf.lambda" => c.kcf.lambda = parse_num(k, v)?,
                "kcf.kernel_sigma" => c.kcf.kernel_sigma = parse_num(k, v)?,
                "kcf.learning_rate" => c.kcf.learning_rate = parse_num(k, v)?,
                "kcf.padding" => c.kcf.padding = parse_num(k, v)?,
                "kcf.target_sigma" => c.kcf.target_sigma_factor = parse_num(k, v)?,
                "gmm.components" => c.measure.gmm.components = parse_num(k, v)?,
                "gmm.iters" => c.measure.gmm.max_iters = parse_num(k, v)?,
                "gmm.tol" => c.measure.gmm.tol = parse_num(k, v)?,
                "gmm.seed" => c.measure.gmm.seed = parse_num(k, v)?,
                "gmm.subsample" => c.measure.gmm.subsample = parse_num(k, v)?,
                "localize.smoothing" => c.measure.smoothing_window = parse_num(k, v)?,
                "localize.prominence" => c.measure.peak_prominence = parse_num(k, v)?,
                "refine.bins" => c.measure.kl.bin_count = parse_num(k, v)?,
                "refine.epsilon" => c.measure.kl.epsilon = parse_num(k, v)?,
                "refine.gl_mode" => c.measure.kl.mode = v.parse()?,
                "keyframe.count" => c.keyframe.count = parse_num(k, v)?,
                "keyframe.separation" => c.keyframe.separation = parse_num(k, v)?,
                "keyframe.smoothing" => c.keyframe.smoothing = parse_num(k, v)?,
                "seed_box" => c.seed_box = (v != "none").then(|| RoiBox::parse(v)).transpose()?,
                "measure_rows" => {
                    c.measure_rows = (v != "none").then(|| parse_rows(v)).transpose()?
                }
                "output_dir" => c.output_dir = (v != "none").then(|| PathBuf::from(v)),
                _ => {
                    return Err(Error::Parse {
                        what: "config".into(),
                        reason: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Every key in a fixed order; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("slic.clusters", self.selection.target_clusters.to_string());
        kv("slic.compactness", self.selection.compactness.to_string());
        kv("slic.iters", self.selection.max_iters.to_string());
        kv("slic.top_k", self.selection.top_k.to_string());
        kv("kcf.lambda", self.kcf.lambda.to_string());
        kv("kcf.kernel_sigma", self.kcf.kernel_sigma.to_string());
        kv("kcf.learning_rate", self.kcf.learning_rate.to_string());
        kv("kcf.padding", self.kcf.padding.to_string());
        kv("kcf.target_sigma", self.kcf.target_sigma_factor.to_string());
        kv("gmm.components", self.measure.gmm.components.to_string());
        kv("gmm.iters", self.measure.gmm.max_iters.to_string());
        kv("gmm.tol", self.measure.gmm.tol.to_string());
        kv("gmm.seed", self.measure.gmm.seed.to_string());
        kv("gmm.subsample", self.measure.gmm.subsample.to_string());
        kv(
            "localize.smoothing",
            self.measure.smoothing_window.to_string(),
        );
        kv(
            "localize.prominence",
            self.measure.peak_prominence.to_string(),
        );
        kv("refine.bins", self.measure.kl.bin_count.to_string());
        kv("refine.epsilon", self.measure.kl.epsilon.to_string());
        kv("refine.gl_mode", self.measure.kl.mode.to_string());
        kv("keyframe.count", self.keyframe.count.to_string());
        kv("keyframe.separation", self.keyframe.separation.to_string());
        kv("keyframe.smoothing", self.keyframe.smoothing.to_string());
        kv(
            "seed_box",
            self.seed_box.map_or("none".into(), |b| b.to_string()),
        );
        kv(
            "measure_rows",
            self.measure_rows
                .map_or("none".into(), |(a, b)| format!("{a},{b}")),
        );
        kv(
            "output_dir",
            self.output_dir
                .as_ref()
                .map_or("none".into(), |p| p.display().to_string()),
        );
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.selection.validate()?;
        self.kcf.validate()?;
        self.measure.validate()?;
        if self.keyframe.smoothing == 0 || self.keyframe.smoothing % 2 == 0 {
            return Err(Error::param("keyframe.smoothing", "must be odd"));
        }
        if self.keyframe.count == 0 {
            return Err(Error::param("keyframe.count", "must be >= 1"));
        }
        Ok(())
    }
}

/// Values read off the measurement, kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub gmm_means: Vec<f64>,
    pub gmm_weights: Vec<f64>,
    pub gmm_variances: Vec<f64>,
    pub gmm_iterations: usize,
    pub mass_midpoint: usize,
    pub left_peak: usize,
    pub right_peak: usize,
    pub left_mu: f64,
    pub left_sigma: f64,
    pub right_mu: f64,
    pub right_sigma: f64,
    pub measure_rows: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    pub video_id: String,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub mm_per_pixel: Option<f64>,
    pub optimal_frame: usize,
    pub optimal_dice: f64,
    pub scores: Vec<FrameScore>,
    pub rois: Vec<RoiBox>,
    pub keyframes: Keyframes,
    pub boundaries: BoundarySet,
    pub onsd_px: f64,
    pub onsd_mm: Option<f64>,
    /// A wall fell back to the argmax of its weighted signal.
    pub low_confidence: bool,
    pub diagnostics: Diagnostics,
    pub config: String,
}

/// The report plus the signals behind it.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: MeasurementReport,
    pub measurement: Measurement,
    pub entropy: ScalarSeries,
}

/// Runs the whole pipeline. The seed box comes from the config.
pub fn run(video_id: &str, seq: &VideoSequence, config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let seed = config
        .seed_box
        .ok_or_else(|| Error::param("seed_box", "no seed box supplied"))?;

    let rois = track_sequence(seq, seed, config.kcf).map_err(|e| match e {
        Error::Stage { .. } => e,
        other => other.at_stage("tracking", 0),
    })?;
    let (best, scores) = select_optimal_frame(seq, &rois, &config.selection)?;
    let measurement = measure_onsd(
        &seq.frames()[best],
        config.measure_rows,
        &config.measure,
        best,
    )?;

    let entropy = entropy_series(seq);
    let window = config.keyframe.smoothing.min(if entropy.len() % 2 == 0 {
        entropy.len() - 1
    } else {
        entropy.len()
    });
    let smoothed = smooth(&entropy, window).map_err(|e| e.at_stage("keyframes", 0))?;
    let keyframes = extract_keyframes(
        &smoothed,
        config.keyframe.count.min(smoothed.len()),
        config.keyframe.separation,
    )
    .map_err(|e| e.at_stage("keyframes", 0))?;

    let m = &measurement;
    let report = MeasurementReport {
        video_id: video_id.to_string(),
        frame_count: seq.len(),
        width: seq.width(),
        height: seq.height(),
        mm_per_pixel: seq.mm_per_pixel(),
        optimal_frame: best,
        optimal_dice: scores[best].dice,
        scores,
        rois,
        keyframes,
        boundaries: m.bounds,
        onsd_px: m.diameter_px,
        onsd_mm: (m.diameter.unit == Unit::Mm).then_some(m.diameter.value),
        low_confidence: m.low_confidence(),
        diagnostics: Diagnostics {
            gmm_means: m.gmm.means.clone(),
            gmm_weights: m.gmm.weights.clone(),
            gmm_variances: m.gmm.variances.clone(),
            gmm_iterations: m.gmm.iterations,
            mass_midpoint: m.d_start,
            left_peak: m.left_wall.peak,
            right_peak: m.right_wall.peak,
            left_mu: m.left.mu,
            left_sigma: m.left.sigma,
            right_mu: m.right.mu,
            right_sigma: m.right.sigma,
            measure_rows: m.rows,
        },
        config: config.to_text(),
    };
    Ok(PipelineOutput {
        report,
        measurement,
        entropy,
    })
}
