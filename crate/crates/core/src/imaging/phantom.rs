//! Synthetic ocular-ultrasound phantom with known sheath geometry.
//!
//! Each frame is a dark background with a cone of bright retrobulbar fat: a
//! band across the top of the cone and two flank columns either side of a dark
//! vertical sheath band. Everything drifts laterally at a fixed rate. Every
//! frame except `clean_frame_index` carries additive Gaussian speckle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::frame::{GrayFrame, VideoSequence, MIN_HEIGHT, MIN_WIDTH};
use super::io::parse_key_values;
use crate::error::{Error, Result};
use crate::tracking::RoiBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub true_sheath_width: usize,
    pub sheath_center_column: f64,
    pub flank_width: usize,
    pub top_band_height: usize,
    pub fat_mean: f64,
    pub fat_sigma: f64,
    pub sheath_mean: f64,
    pub sheath_sigma: f64,
    pub background_mean: f64,
    pub speckle_sigma: f64,
    /// Lateral drift of the whole structure, pixels per frame.
    pub drift_per_frame: f64,
    /// Frame rendered without speckle, if any.
    pub clean_frame_index: Option<usize>,
    pub mm_per_pixel: Option<f64>,
    pub frame_rate: Option<f64>,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 192,
            true_sheath_width: 60,
            sheath_center_column: 128.0,
            flank_width: 24,
            top_band_height: 40,
            fat_mean: 200.0,
            fat_sigma: 8.0,
            sheath_mean: 45.0,
            sheath_sigma: 6.0,
            background_mean: 20.0,
            speckle_sigma: 15.0,
            drift_per_frame: 0.0,
            clean_frame_index: Some(0),
            mm_per_pixel: Some(0.05),
            frame_rate: Some(30.0),
        }
    }
}

/// Ground truth for one rendered frame. Edges are column boundaries: the sheath
/// occupies columns `left_edge..right_edge`, so their difference is the width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub index: usize,
    pub center: f64,
    pub left_edge: usize,
    pub right_edge: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomTruth {
    pub spec: PhantomSpec,
    pub n_frames: usize,
    pub seed: u64,
    pub true_width_px: usize,
    pub true_width_mm: Option<f64>,
    pub clean_frame_index: Option<usize>,
    /// Tracker seed covering the fat cone on frame 0.
    pub seed_box: RoiBox,
    /// Row band below the top fat band where the diameter is read.
    pub measure_rows: (usize, usize),
    pub frames: Vec<FrameTruth>,
}

const BOX_MARGIN: usize = 4;
const ROW_MARGIN: usize = 4;

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::param(name, reason));
        if self.width < MIN_WIDTH || self.height < MIN_HEIGHT {
            return bad("frame size", format!("{}x{}", self.width, self.height));
        }
        if self.true_sheath_width == 0 || self.true_sheath_width >= self.width {
            return bad(
                "true_sheath_width",
                format!("{} not in 1..{}", self.true_sheath_width, self.width),
            );
        }
        if self.top_band_height + ROW_MARGIN >= self.height {
            return bad(
                "top_band_height",
                format!("{} leaves no rows below the band", self.top_band_height),
            );
        }
        for (name, v) in [
            ("fat_mean", self.fat_mean),
            ("sheath_mean", self.sheath_mean),
            ("background_mean", self.background_mean),
        ] {
            if !(0.0..=255.0).contains(&v) {
                return bad(name, format!("{v} outside [0, 255]"));
            }
        }
        for (name, v) in [
            ("fat_sigma", self.fat_sigma),
            ("sheath_sigma", self.sheath_sigma),
            ("speckle_sigma", self.speckle_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(name, format!("{v} must be a non-negative number"));
            }
        }
        if self.fat_mean <= self.sheath_mean {
            return bad(
                "fat_mean",
                format!(
                    "fat ({}) must be brighter than sheath ({})",
                    self.fat_mean, self.sheath_mean
                ),
            );
        }
        if !self.drift_per_frame.is_finite() || !self.sheath_center_column.is_finite() {
            return bad("drift_per_frame", "must be finite".into());
        }
        if let Some(s) = self.mm_per_pixel {
            if !(s > 0.0) {
                return bad("mm_per_pixel", format!("{s} must be positive"));
            }
        }
        Ok(())
    }

    /// Sheath center on frame `k`, drift accumulated.
    pub fn center_at(&self, k: usize) -> f64 {
        self.sheath_center_column + self.drift_per_frame * k as f64
    }

    /// Sheath column boundaries on frame `k`, or an error if the band leaves the frame.
    pub fn edges_at(&self, k: usize) -> Result<(usize, usize)> {
        let left = (self.center_at(k) - self.true_sheath_width as f64 / 2.0).round();
        let right = left + self.true_sheath_width as f64;
        if left < 0.0 || right > self.width as f64 {
            return Err(Error::Phantom(format!(
                "sheath leaves the frame at frame {k} (columns {left}..{right}, width {})",
                self.width
            )));
        }
        Ok((left as usize, right as usize))
    }

    pub fn seed_box(&self) -> Result<RoiBox> {
        let (left, right) = self.edges_at(0)?;
        let x0 = left.saturating_sub(self.flank_width + BOX_MARGIN);
        let x1 = (right + self.flank_width + BOX_MARGIN).min(self.width);
        let h = (3 * self.top_band_height).clamp(MIN_HEIGHT, self.height);
        RoiBox::new(x0 as i64, 0, x1 - x0, h)
    }

    pub fn measure_rows(&self) -> (usize, usize) {
        (self.top_band_height + ROW_MARGIN, self.height)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (key, value) in parse_key_values(text, "phantom spec")? {
            let perr = |_| Error::Parse {
                what: "phantom spec".into(),
                reason: format!("bad value for `{key}`: {value}"),
            };
            let opt = |v: &str| -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
                if v == "none" {
                    Ok(None)
                } else {
                    v.parse().map(Some)
                }
            };
            match key.as_str() {
                "width" => spec.width = value.parse().map_err(|_| perr(()))?,
                "height" => spec.height = value.parse().map_err(|_| perr(()))?,
                "true_sheath_width" => {
                    spec.true_sheath_width = value.parse().map_err(|_| perr(()))?
                }
                "sheath_center_column" => {
                    spec.sheath_center_column = value.parse().map_err(|_| perr(()))?
                }
                "flank_width" => spec.flank_width = value.parse().map_err(|_| perr(()))?,
                "top_band_height" => spec.top_band_height = value.parse().map_err(|_| perr(()))?,
                "fat_mean" => spec.fat_mean = value.parse().map_err(|_| perr(()))?,
                "fat_sigma" => spec.fat_sigma = value.parse().map_err(|_| perr(()))?,
                "sheath_mean" => spec.sheath_mean = value.parse().map_err(|_| perr(()))?,
                "sheath_sigma" => spec.sheath_sigma = value.parse().map_err(|_| perr(()))?,
                "background_mean" => spec.background_mean = value.parse().map_err(|_| perr(()))?,
                "speckle_sigma" => spec.speckle_sigma = value.parse().map_err(|_| perr(()))?,
                "drift_per_frame" => spec.drift_per_frame = value.parse().map_err(|_| perr(()))?,
                "clean_frame_index" => {
                    spec.clean_frame_index = if value == "none" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| perr(()))?)
                    }
                }
                "mm_per_pixel" => spec.mm_per_pixel = opt(&value).map_err(|_| perr(()))?,
                "frame_rate" => spec.frame_rate = opt(&value).map_err(|_| perr(()))?,
                _ => {
                    return Err(Error::Parse {
                        what: "phantom spec".into(),
                        reason: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |v| v.to_string());
        format!(
            "width={}\nheight={}\ntrue_sheath_width={}\nsheath_center_column={}\nflank_width={}\n\
             top_band_height={}\nfat_mean={}\nfat_sigma={}\nsheath_mean={}\nsheath_sigma={}\n\
             background_mean={}\nspeckle_sigma={}\ndrift_per_frame={}\nclean_frame_index={}\n\
             mm_per_pixel={}\nframe_rate={}\n",
            self.width,
            self.height,
            self.true_sheath_width,
            self.sheath_center_column,
            self.flank_width,
            self.top_band_height,
            self.fat_mean,
            self.fat_sigma,
            self.sheath_mean,
            self.sheath_sigma,
            self.background_mean,
            self.speckle_sigma,
            self.drift_per_frame,
            self.clean_frame_index
                .map_or("none".to_string(), |v| v.to_string()),
            opt(self.mm_per_pixel),
            opt(self.frame_rate),
        )
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Tissue {
    Fat,
    Sheath,
    Background,
}

fn tissue_at(spec: &PhantomSpec, left: usize, right: usize, x: usize, y: usize) -> Tissue {
    let cone_lo = left.saturating_sub(spec.flank_width);
    let cone_hi = right + spec.flank_width;
    if x < cone_lo || x >= cone_hi {
        Tissue::Background
    } else if y < spec.top_band_height || x < left || x >= right {
        Tissue::Fat
    } else {
        Tissue::Sheath
    }
}

fn normal(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite non-negative sigma"))
}

/// Renders `n_frames` frames. A pure function of `(spec, n_frames, seed)`.
pub fn generate_phantom(
    spec: &PhantomSpec,
    n_frames: usize,
    seed: u64,
) -> Result<(VideoSequence, PhantomTruth)> {
    spec.validate()?;
    if n_frames == 0 {
        return Err(Error::param("n_frames", "must be at least 1"));
    }
    if let Some(c) = spec.clean_frame_index {
        if c >= n_frames {
            return Err(Error::param(
                "clean_frame_index",
                format!("{c} is beyond the last frame ({})", n_frames - 1),
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fat_noise = normal(spec.fat_sigma);
    let sheath_noise = normal(spec.sheath_sigma);
    let speckle = normal(spec.speckle_sigma);

    let mut frames = Vec::with_capacity(n_frames);
    let mut truth = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let (left, right) = spec.edges_at(k)?;
        let noisy = spec.clean_frame_index != Some(k);
        let mut pixels = Vec::with_capacity(spec.width * spec.height);
        for y in 0..spec.height {
            for x in 0..spec.width {
                let (mean, tissue_noise) = match tissue_at(spec, left, right, x, y) {
                    Tissue::Fat => (spec.fat_mean, fat_noise.as_ref()),
                    Tissue::Sheath => (spec.sheath_mean, sheath_noise.as_ref()),
                    Tissue::Background => (spec.background_mean, sheath_noise.as_ref()),
                };
                let mut v = mean;
                if let Some(d) = tissue_noise {
                    v += d.sample(&mut rng);
                }
                if noisy {
                    if let Some(d) = speckle.as_ref() {
                        v += d.sample(&mut rng);
                    }
                }
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        frames.push(
            GrayFrame::new(spec.width, spec.height, pixels)?.with_calibration(spec.mm_per_pixel)?,
        );
        truth.push(FrameTruth {
            index: k,
            center: spec.center_at(k),
            left_edge: left,
            right_edge: right,
        });
    }

    let seq = VideoSequence::new(frames, spec.frame_rate)?;
    let record = PhantomTruth {
        spec: spec.clone(),
        n_frames,
        seed,
        true_width_px: spec.true_sheath_width,
        true_width_mm: spec.mm_per_pixel.map(|s| s * spec.true_sheath_width as f64),
        clean_frame_index: spec.clean_frame_index,
        seed_box: spec.seed_box()?,
        measure_rows: spec.measure_rows(),
        frames: truth,
    };
    Ok((seq, record))
}
