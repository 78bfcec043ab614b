use crate::error::{Error, Result};

/// Smallest frame the 3x6 echogenicity template can be laid over.
pub const MIN_WIDTH: usize = 6;
pub const MIN_HEIGHT: usize = 3;

/// Single-channel 8-bit image, row-major, with optional physical calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    mm_per_pixel: Option<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width < MIN_WIDTH || height < MIN_HEIGHT {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} is smaller than the {MIN_WIDTH}x{MIN_HEIGHT} minimum"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            mm_per_pixel: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a frame from a per-pixel function of `(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn with_calibration(mut self, mm_per_pixel: Option<f64>) -> Result<Self> {
        if let Some(s) = mm_per_pixel {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidFrame(format!(
                    "mm_per_pixel must be strictly positive, got {s}"
                )));
            }
        }
        self.mm_per_pixel = mm_per_pixel;
        Ok(self)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn mm_per_pixel(&self) -> Option<f64> {
        self.mm_per_pixel
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with coordinates clamped to the frame (border replication).
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(x, y)
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Copies the rectangle `[x, x+w) x [y, y+h)`; calibration is carried over.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::InvalidFrame(format!(
                "crop {w}x{h}+{x}+{y} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(w * h);
        for row in y..y + h {
            pixels.extend_from_slice(&self.row(row)[x..x + w]);
        }
        Self::new(w, h, pixels)?.with_calibration(self.mm_per_pixel)
    }

    /// Keeps only rows `[start, end)`, full width.
    pub fn rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.height {
            return Err(Error::InvalidFrame(format!(
                "row band {start}..{end} outside 0..{}",
                self.height
            )));
        }
        self.crop(0, start, self.width, end - start)
    }
}

/// Per-pixel {0, 255} mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub const ON: u8 = 255;
    pub const OFF: u8 = 0;

    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask {width}x{height} needs {} values, got {}",
                width * height,
                bits.len()
            )));
        }
        if let Some(v) = bits.iter().find(|&&v| v != Self::ON && v != Self::OFF) {
            return Err(Error::InvalidFrame(format!(
                "mask value {v} is not 0 or 255"
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![Self::OFF; width * height],
        }
    }

    pub fn from_predicate(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(if f(x, y) { Self::ON } else { Self::OFF });
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn is_on(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] == Self::ON
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = if on { Self::ON } else { Self::OFF };
    }

    pub fn count_on(&self) -> usize {
        self.bits.iter().filter(|&&b| b == Self::ON).count()
    }
}

/// Ordered frames sharing dimensions and calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    frames: Vec<GrayFrame>,
    frame_rate: Option<f64>,
}

impl VideoSequence {
    pub fn new(frames: Vec<GrayFrame>, frame_rate: Option<f64>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidFrame("sequence has no frames".into()))?;
        for (i, f) in frames.iter().enumerate().skip(1) {
            if f.width() != first.width() || f.height() != first.height() {
                return Err(Error::Ingest {
                    frame: i,
                    reason: format!(
                        "dimension mismatch: {}x{} vs {}x{} for frame 0",
                        f.width(),
                        f.height(),
                        first.width(),
                        first.height()
                    ),
                });
            }
            if f.mm_per_pixel() != first.mm_per_pixel() {
                return Err(Error::Ingest {
                    frame: i,
                    reason: "calibration differs from frame 0".into(),
                });
            }
        }
        if let Some(r) = frame_rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::param(
                    "frame_rate",
                    format!("must be positive, got {r}"),
                ));
            }
        }
        Ok(Self { frames, frame_rate })
    }

    pub fn frames(&self) -> &[GrayFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_rate(&self) -> Option<f64> {
        self.frame_rate
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn mm_per_pixel(&self) -> Option<f64> {
        self.frames[0].mm_per_pixel()
    }
}
