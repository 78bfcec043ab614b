//! Automated optic nerve sheath diameter (ONSD) measurement from ocular
//! ultrasound frame sequences.
//!
//! The pipeline runs in three stages:
//!
//! 1. **Optimal frame selection** ([`tracking`], [`superpixel`]): a kernelized
//!    correlation filter carries the sheath ROI through the sequence, each ROI is
//!    segmented into superpixels, the brightest superpixels are binarized and
//!    Dice-scored against a 3x6 echogenicity template. The best-scoring frame wins.
//! 2. **Localization** ([`localization`]): column sums of the frame give a 1-D
//!    profile whose trough between two peaks is the sheath. A two-component
//!    Gaussian mixture picks a starting column, a descent walk finds the trough
//!    and the flank peaks bound the coarse search region.
//! 3. **Refinement** ([`refinement`]): position-wise KL divergence between column
//!    intensity histograms and the center column, weighted by a Gaussian prior,
//!    pins each boundary; the difference is mapped to millimetres.
//!
//! [`keyframe`] adds entropy-based keyframes, [`evaluation`] the agreement
//! statistics and [`pipeline`] the end-to-end driver with its config and report.

pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod keyframe;
pub mod localization;
pub mod pipeline;
pub mod refinement;
pub mod superpixel;
pub mod tracking;

pub use error::{Error, Result, Side};
