//! Agreement statistics between two measurement series.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

/// Measurements keyed by subject or video id, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSeries {
    pub label: String,
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

impl MeasurementSeries {
    pub fn new(label: impl Into<String>, ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: ids.len(),
                right: values.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for id in &ids {
            if !seen.insert(id) {
                return Err(Error::Parse {
                    what: "series".into(),
                    reason: format!("duplicate id `{id}`"),
                });
            }
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::param(
                "measurement",
                format!("{v} must be a positive number"),
            ));
        }
        Ok(Self {
            label: label.into(),
            ids,
            values,
        })
    }

    /// Values of both series paired by id, in `self`'s order. Ids present in
    /// only one series are reported together.
    pub fn align(&self, other: &Self) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
        let missing_b: Vec<&str> = self
            .ids
            .iter()
            .filter(|id| !other.ids.contains(id))
            .map(String::as_str)
            .collect();
        let missing_a: Vec<&str> = other
            .ids
            .iter()
            .filter(|id| !self.ids.contains(id))
            .map(String::as_str)
            .collect();
        if !missing_a.is_empty() || !missing_b.is_empty() {
            return Err(Error::Parse {
                what: "series ids".into(),
                reason: format!(
                    "missing from {}: [{}]; missing from {}: [{}]",
                    other.label,
                    missing_b.join(", "),
                    self.label,
                    missing_a.join(", ")
                ),
            });
        }
        let b = self
            .ids
            .iter()
            .map(|id| other.values[other.ids.iter().position(|o| o == id).unwrap()])
            .collect();
        Ok((self.ids.clone(), self.values.clone(), b))
    }
}

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < min {
        return Err(Error::param(
            "series",
            format!("need at least {min} pairs, got {}", a.len()),
        ));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with `n - 1` in the denominator.
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Mean relative error of `candidate` against `reference`, in percent.
pub fn mean_error(candidate: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(candidate, reference, 1)?;
    if reference.contains(&0.0) {
        return Err(Error::param("reference", "contains a zero"));
    }
    let total: f64 = candidate
        .iter()
        .zip(reference)
        .map(|(a, b)| (1.0 - a / b).abs())
        .sum();
    Ok(total / candidate.len() as f64 * 100.0)
}

/// `||a - b||_2 / n`.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 1)?;
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(ss.sqrt() / a.len() as f64)
}

/// Mean of squared differences.
pub fn mse_conventional(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 1)?;
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(ss / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Icc {
    pub icc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// No between-subject or between-rater variation; ICC set to 1.
    pub degenerate: bool,
    pub ms_rows: f64,
    pub ms_cols: f64,
    pub ms_error: f64,
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater, with
/// the 95% confidence interval from the F-distribution approximation.
pub fn icc(a: &[f64], b: &[f64]) -> Result<Icc> {
    check_pair(a, b, 5)?;
    let n = a.len() as f64;
    let k = 2.0;
    let grand = (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (n * k);
    let ss_rows: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| ((x + y) / k - grand).powi(2))
        .sum::<f64>()
        * k;
    let ss_cols = n * ((mean(a) - grand).powi(2) + (mean(b) - grand).powi(2));
    let ss_total: f64 = a.iter().chain(b).map(|x| (x - grand).powi(2)).sum();
    let (ma, mb) = (mean(a), mean(b));
    let ss_error: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let row = (x + y) / k;
            (x - row - ma + grand).powi(2) + (y - row - mb + grand).powi(2)
        })
        .sum();
    let msr = ss_rows / (n - 1.0);
    let msc = ss_cols / (k - 1.0);
    let mse = ss_error / ((n - 1.0) * (k - 1.0));

    let denom = msr + (k - 1.0) * mse + k * (msc - mse) / n;
    if denom.abs() < 1e-300 || ss_total < 1e-300 {
        return Ok(Icc {
            icc: 1.0,
            ci_low: 1.0,
            ci_high: 1.0,
            degenerate: true,
            ms_rows: msr,
            ms_cols: msc,
            ms_error: mse,
        });
    }
    let value = (msr - mse) / denom;
    if mse == 0.0 && msc == 0.0 {
        return Ok(Icc {
            icc: value,
            ci_low: value,
            ci_high: value,
            degenerate: false,
            ms_rows: msr,
            ms_cols: msc,
            ms_error: mse,
        });
    }

    let alpha = 0.05;
    let aa = k * value / (n * (1.0 - value));
    let bb = 1.0 + k * value * (n - 1.0) / (n * (1.0 - value));
    let v = (aa * msc + bb * mse).powi(2)
        / ((aa * msc).powi(2) / (k - 1.0) + (bb * mse).powi(2) / ((n - 1.0) * (k - 1.0)));
    let q = |d1: f64, d2: f64| -> Result<f64> {
        FisherSnedecor::new(d1, d2)
            .map(|f| f.inverse_cdf(1.0 - alpha / 2.0))
            .map_err(|e| Error::DegenerateData(format!("F({d1}, {d2}): {e}")))
    };
    let f_low = q(n - 1.0, v)?;
    let f_high = q(v, n - 1.0)?;
    let ci_low = n * (msr - f_low * mse) / (f_low * (k * msc + (k * n - k - n) * mse) + n * msr);
    let ci_high = n * (f_high * msr - mse) / (k * msc + (k * n - k - n) * mse + n * f_high * msr);
    Ok(Icc {
        icc: value,
        ci_low,
        ci_high,
        degenerate: false,
        ms_rows: msr,
        ms_cols: msc,
        ms_error: mse,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub bias: f64,
    pub sd: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    /// `(mean of pair, a - b)` for plotting.
    pub points: Vec<(f64, f64)>,
}

pub const LOA_Z: f64 = 1.96;

pub fn bland_altman(a: &[f64], b: &[f64]) -> Result<BlandAltman> {
    check_pair(a, b, 2)?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let bias = mean(&diffs);
    let sd = variance(&diffs).sqrt();
    Ok(BlandAltman {
        bias,
        sd,
        loa_low: bias - LOA_Z * sd,
        loa_high: bias + LOA_Z * sd,
        points: a
            .iter()
            .zip(b)
            .map(|(x, y)| ((x + y) / 2.0, x - y))
            .collect(),
    })
}

/// Standardized mean difference with the pooled `n - 1` standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::param("series", "both need at least 2 values"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(Error::DegenerateData(
            "pooled standard deviation is zero".into(),
        ));
    }
    Ok((mean(a) - mean(b)) / pooled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub candidate: String,
    pub reference: String,
    pub n: usize,
    pub mean_error: f64,
    pub mse: f64,
    pub mse_conventional: f64,
    pub icc: Icc,
    pub bland_altman: BlandAltman,
    /// Absent when both series have zero spread.
    pub cohens_d: Option<f64>,
}

/// Every statistic for `candidate` against `reference`, paired by id.
pub fn agreement(
    candidate: &MeasurementSeries,
    reference: &MeasurementSeries,
) -> Result<AgreementReport> {
    let (_, a, b) = candidate.align(reference)?;
    let cohens = match cohens_d(&a, &b) {
        Ok(d) => Some(d),
        Err(Error::DegenerateData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(AgreementReport {
        candidate: candidate.label.clone(),
        reference: reference.label.clone(),
        n: a.len(),
        mean_error: mean_error(&a, &b)?,
        mse: mse(&a, &b)?,
        mse_conventional: mse_conventional(&a, &b)?,
        icc: icc(&a, &b)?,
        bland_altman: bland_altman(&a, &b)?,
        cohens_d: cohens,
    })
}
