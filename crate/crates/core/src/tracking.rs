//! Kernelized correlation filter (KCF) tracking of the sheath ROI.
//!
//! Single-scale KCF on raw grayscale features with a Gaussian kernel. The
//! tracker learns a ridge regressor over all cyclic shifts of a padded,
//! raised-cosine windowed patch; detection evaluates it over the search window
//! in the Fourier domain and moves the box to the response peak.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{GrayFrame, VideoSequence};

/// Axis-aligned box, top-left corner plus extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoiBox {
    pub x: i64,
    pub y: i64,
    pub w: usize,
    pub h: usize,
}

impl RoiBox {
    pub fn new(x: i64, y: i64, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::param("roi", format!("{w}x{h} has zero area")));
        }
        Ok(Self { x, y, w, h })
    }

    /// Parses `x,y,w,h`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::Parse {
            what: "box".into(),
            reason: format!("expected x,y,w,h, got `{s}`"),
        };
        if parts.len() != 4 {
            return Err(bad());
        }
        let x = parts[0].parse().map_err(|_| bad())?;
        let y = parts[1].parse().map_err(|_| bad())?;
        let w = parts[2].parse().map_err(|_| bad())?;
        let h = parts[3].parse().map_err(|_| bad())?;
        Self::new(x, y, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn intersects(&self, width: usize, height: usize) -> bool {
        self.x < width as i64
            && self.y < height as i64
            && self.x + self.w as i64 > 0
            && self.y + self.h as i64 > 0
    }

    /// Keeps the extents and shifts the box inside the frame. A box larger than
    /// the frame is pinned to the origin.
    pub fn clamped(&self, width: usize, height: usize) -> Self {
        let max_x = (width as i64 - self.w as i64).max(0);
        let max_y = (height as i64 - self.h as i64).max(0);
        Self {
            x: self.x.clamp(0, max_x),
            y: self.y.clamp(0, max_y),
            ..*self
        }
    }

    /// The part of the box inside a `width` x `height` frame, as `(x, y, w, h)`.
    pub fn visible(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let x0 = self.x.max(0);
        let y0 = self.y.max(0);
        let x1 = (self.x + self.w as i64).min(width as i64);
        let y1 = (self.y + self.h as i64).min(height as i64);
        (x1 > x0 && y1 > y0).then(|| {
            (
                x0 as usize,
                y0 as usize,
                (x1 - x0) as usize,
                (y1 - y0) as usize,
            )
        })
    }
}

impl fmt::Display for RoiBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KcfParams {
    /// Ridge regularization.
    pub lambda: f64,
    /// Gaussian kernel bandwidth on normalized features.
    pub kernel_sigma: f64,
    /// Model interpolation rate per frame.
    pub learning_rate: f64,
    /// Search window size relative to the box.
    pub padding: f64,
    /// Target response bandwidth as a fraction of `sqrt(w*h)`.
    pub target_sigma_factor: f64,
}

impl Default for KcfParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            kernel_sigma: 0.5,
            learning_rate: 0.02,
            padding: 2.5,
            target_sigma_factor: 0.1,
        }
    }
}

impl KcfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::param("kcf lambda", "must be > 0"));
        }
        if !(self.kernel_sigma > 0.0) {
            return Err(Error::param("kcf kernel_sigma", "must be > 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::param("kcf learning_rate", "must be in (0, 1]"));
        }
        if !(self.padding >= 1.0) {
            return Err(Error::param("kcf padding", "must be >= 1"));
        }
        if !(self.target_sigma_factor > 0.0) {
            return Err(Error::param("kcf target_sigma_factor", "must be > 0"));
        }
        Ok(())
    }
}

struct Fft2 {
    w: usize,
    h: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(w: usize, h: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            w,
            h,
            row_fwd: planner.plan_fft_forward(w),
            col_fwd: planner.plan_fft_forward(h),
            row_inv: planner.plan_fft_inverse(w),
            col_inv: planner.plan_fft_inverse(h),
        }
    }

    fn run(&self, data: &mut [Complex<f64>], inverse: bool) {
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(data);
        let mut column = vec![Complex::default(); self.h];
        for x in 0..self.w {
            for y in 0..self.h {
                column[y] = data[y * self.w + x];
            }
            col.process(&mut column);
            for y in 0..self.h {
                data[y * self.w + x] = column[y];
            }
        }
        if inverse {
            let n = (self.w * self.h) as f64;
            data.iter_mut().for_each(|v| *v /= n);
        }
    }

    fn forward(&self, real: &[f64]) -> Vec<Complex<f64>> {
        let mut data: Vec<Complex<f64>> = real.iter().map(|&r| Complex::new(r, 0.0)).collect();
        self.run(&mut data, false);
        data
    }

    fn inverse_real(&self, spectrum: Vec<Complex<f64>>) -> Vec<f64> {
        let mut data = spectrum;
        self.run(&mut data, true);
        data.into_iter().map(|c| c.re).collect()
    }
}

/// Raised-cosine (Hann) taper of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Learned correlation filter for one sequence.
#[derive(Clone)]
pub struct TrackerState {
    params: KcfParams,
    frame_w: usize,
    frame_h: usize,
    roi: RoiBox,
    win_w: usize,
    win_h: usize,
    cos_window: Vec<f64>,
    target_f: Vec<Complex<f64>>,
    model_x: Vec<f64>,
    alpha_f: Vec<Complex<f64>>,
    fft: Arc<Fft2>,
}

impl fmt::Debug for TrackerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrackerState")
            .field("roi", &self.roi)
            .field("window", &(self.win_w, self.win_h))
            .field("params", &self.params)
            .finish()
    }
}

/// Correlation response over the search window; zero displacement sits at
/// `(width / 2, height / 2)`.
#[derive(Debug, Clone)]
pub struct ResponseMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ResponseMap {
    /// Location of the first maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}

impl TrackerState {
    pub fn init(frame: &GrayFrame, seed: RoiBox, params: KcfParams) -> Result<Self> {
        params.validate()?;
        if seed.visible(frame.width(), frame.height()).is_none() {
            return Err(Error::param(
                "seed box",
                format!(
                    "{seed} lies outside the {}x{} frame",
                    frame.width(),
                    frame.height()
                ),
            ));
        }
        let win_w = ((seed.w as f64 * params.padding).round() as usize).max(1);
        let win_h = ((seed.h as f64 * params.padding).round() as usize).max(1);
        let hx = hann(win_w);
        let hy = hann(win_h);
        let cos_window: Vec<f64> = (0..win_h)
            .flat_map(|y| {
                let wy = hy[y];
                hx.iter().map(move |&wx| wx * wy)
            })
            .collect();

        let sigma = (seed.w as f64 * seed.h as f64).sqrt() * params.target_sigma_factor;
        let (cx, cy) = ((win_w / 2) as f64, (win_h / 2) as f64);
        let target: Vec<f64> = (0..win_h)
            .flat_map(|y| {
                (0..win_w).map(move |x| {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    (-0.5 * d2 / (sigma * sigma)).exp()
                })
            })
            .collect();
        let fft = Arc::new(Fft2::new(win_w, win_h));
        let target_f = fft.forward(&target);

        let mut state = Self {
            params,
            frame_w: frame.width(),
            frame_h: frame.height(),
            roi: seed,
            win_w,
            win_h,
            cos_window,
            target_f,
            model_x: Vec::new(),
            alpha_f: Vec::new(),
            fft,
        };
        let x = state.features(frame, seed);
        state.alpha_f = state.train(&x);
        state.model_x = x;
        Ok(state)
    }

    pub fn roi(&self) -> RoiBox {
        self.roi
    }

    pub fn params(&self) -> &KcfParams {
        &self.params
    }

    pub fn window_size(&self) -> (usize, usize) {
        (self.win_w, self.win_h)
    }

    /// Current appearance model (windowed, mean-removed patch).
    pub fn appearance(&self) -> &[f64] {
        &self.model_x
    }

    /// Top-left frame coordinate of the search window for `roi`.
    pub fn window_origin(&self, roi: RoiBox) -> (i64, i64) {
        let (cx, cy) = (roi.x + (roi.w / 2) as i64, roi.y + (roi.h / 2) as i64);
        (cx - (self.win_w / 2) as i64, cy - (self.win_h / 2) as i64)
    }

    fn features(&self, frame: &GrayFrame, roi: RoiBox) -> Vec<f64> {
        let (ox, oy) = self.window_origin(roi);
        let mut patch = Vec::with_capacity(self.win_w * self.win_h);
        for y in 0..self.win_h as i64 {
            for x in 0..self.win_w as i64 {
                patch.push(frame.get_clamped(ox + x, oy + y) as f64 / 255.0);
            }
        }
        let mean = patch.iter().sum::<f64>() / patch.len() as f64;
        patch
            .iter()
            .zip(&self.cos_window)
            .map(|(p, w)| (p - mean) * w)
            .collect()
    }

    fn kernel_f(&self, x: &[f64], z: &[f64]) -> Vec<Complex<f64>> {
        let xf = self.fft.forward(x);
        let zf = self.fft.forward(z);
        let cross: Vec<Complex<f64>> = xf.iter().zip(&zf).map(|(a, b)| a.conj() * b).collect();
        let c = self.fft.inverse_real(cross);
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let zz: f64 = z.iter().map(|v| v * v).sum();
        let n = x.len() as f64;
        let s2 = self.params.kernel_sigma * self.params.kernel_sigma;
        let k: Vec<f64> = c
            .iter()
            .map(|&cv| (-((xx + zz - 2.0 * cv) / n).max(0.0) / s2).exp())
            .collect();
        self.fft.forward(&k)
    }

    fn train(&self, x: &[f64]) -> Vec<Complex<f64>> {
        let kf = self.kernel_f(x, x);
        self.target_f
            .iter()
            .zip(&kf)
            .map(|(y, k)| y / (k + self.params.lambda))
            .collect()
    }

    /// Filter response over the search window centred on the current box.
    pub fn response(&self, frame: &GrayFrame) -> ResponseMap {
        let z = self.features(frame, self.roi);
        let kf = self.kernel_f(&self.model_x, &z);
        let prod: Vec<Complex<f64>> = kf.iter().zip(&self.alpha_f).map(|(k, a)| k * a).collect();
        ResponseMap {
            width: self.win_w,
            height: self.win_h,
            values: self.fft.inverse_real(prod),
        }
    }

    /// Locates the target in `frame`, moves the box and updates the model.
    pub fn update(&mut self, frame: &GrayFrame) -> Result<RoiBox> {
        if frame.width() != self.frame_w || frame.height() != self.frame_h {
            return Err(Error::DimensionMismatch(format!(
                "tracker initialised on {}x{}, got {}x{}",
                self.frame_w,
                self.frame_h,
                frame.width(),
                frame.height()
            )));
        }
        let (px, py) = self.response(frame).argmax();
        let dx = px as i64 - (self.win_w / 2) as i64;
        let dy = py as i64 - (self.win_h / 2) as i64;
        self.roi = RoiBox {
            x: self.roi.x + dx,
            y: self.roi.y + dy,
            ..self.roi
        }
        .clamped(self.frame_w, self.frame_h);

        let x_new = self.features(frame, self.roi);
        let alpha_new = self.train(&x_new);
        let eta = self.params.learning_rate;
        for (m, n) in self.model_x.iter_mut().zip(&x_new) {
            *m = (1.0 - eta) * *m + eta * n;
        }
        for (a, n) in self.alpha_f.iter_mut().zip(&alpha_new) {
            *a = *a * (1.0 - eta) + n * eta;
        }
        Ok(self.roi)
    }
}

/// Tracks from `seed` on frame 0 through the whole sequence; one box per frame.
pub fn track_sequence(seq: &VideoSequence, seed: RoiBox, params: KcfParams) -> Result<Vec<RoiBox>> {
    let frames = seq.frames();
    let mut state = TrackerState::init(&frames[0], seed, params)?;
    let mut boxes = Vec::with_capacity(frames.len());
    boxes.push(state.roi());
    for frame in &frames[1..] {
        boxes.push(state.update(frame)?);
    }
    Ok(boxes)
}
