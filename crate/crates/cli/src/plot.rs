//! CSV dumps and bare SVG line plots of the 1-D signals.

use std::fmt::Write as _;
use std::path::Path;

use onsd_core::keyframe::ScalarSeries;
use onsd_core::refinement::{KlSignal, Measurement};
use onsd_core::superpixel::FrameScore;
use onsd_core::tracking::RoiBox;

use crate::error::{write_file, CliError, CliResult};

const W: f64 = 640.0;
const H: f64 = 240.0;
const PAD: f64 = 20.0;

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Pipeline(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Pipeline(format!("csv: {e}")))
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> CliResult<()> {
    write_file(path, csv_bytes(header, rows)?)
}

/// One polyline per series over a shared x axis. Series are scaled together.
pub fn svg_lines(title: &str, xs: &[f64], series: &[(&str, &[f64])]) -> String {
    let all = series.iter().flat_map(|(_, v)| v.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (x0, x1) = (
        xs.first().copied().unwrap_or(0.0),
        xs.last().copied().unwrap_or(1.0),
    );
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(f64::EPSILON) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - lo) / (hi - lo).max(f64::EPSILON) * (H - 2.0 * PAD);
    let colors = ["#1f77b4", "#d62728", "#2ca02c"];

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<title>{title}</title>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#999"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for (i, (name, v)) in series.iter().enumerate() {
        let mut d = String::new();
        for (k, (&x, &y)) in xs.iter().zip(v.iter()).enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2}",
                if k == 0 { "M" } else { " L" },
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.2"><title>{name}</title></path>"#,
            colors[i % colors.len()]
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_scores(dir: &Path, scores: &[FrameScore]) -> CliResult<()> {
    write_csv(
        &dir.join("scores.csv"),
        &["frame_index", "dice"],
        scores
            .iter()
            .map(|s| vec![s.frame_index.to_string(), s.dice.to_string()]),
    )
}

pub fn write_rois(dir: &Path, rois: &[RoiBox]) -> CliResult<()> {
    write_csv(
        &dir.join("rois.csv"),
        &["frame_index", "x", "y", "w", "h"],
        rois.iter().enumerate().map(|(i, b)| {
            vec![
                i.to_string(),
                b.x.to_string(),
                b.y.to_string(),
                b.w.to_string(),
                b.h.to_string(),
            ]
        }),
    )
}

fn write_kl(dir: &Path, name: &str, kl: &KlSignal) -> CliResult<()> {
    let cols: Vec<usize> = (kl.start..=kl.end()).collect();
    write_csv(
        &dir.join(format!("{name}.csv")),
        &["d", "raw", "weighted"],
        cols.iter().enumerate().map(|(i, d)| {
            vec![
                d.to_string(),
                kl.raw[i].to_string(),
                kl.weighted[i].to_string(),
            ]
        }),
    )?;
    let xs: Vec<f64> = cols.iter().map(|&d| d as f64).collect();
    // weighted values are tiny next to raw ones, so each gets its own panel
    write_file(
        &dir.join(format!("{name}_raw.svg")),
        svg_lines(&format!("{name} raw"), &xs, &[("raw", &kl.raw)]),
    )?;
    write_file(
        &dir.join(format!("{name}_weighted.svg")),
        svg_lines(
            &format!("{name} weighted"),
            &xs,
            &[("weighted", &kl.weighted)],
        ),
    )
}

/// v(n), kappa(n), both KL signals and the entropy trace.
pub fn write_signals(dir: &Path, m: &Measurement, entropy: &ScalarSeries) -> CliResult<()> {
    let v = &m.signal.values;
    write_csv(
        &dir.join("signal.csv"),
        &["n", "v", "kappa"],
        (0..v.len()).map(|n| vec![n.to_string(), v[n].to_string(), m.kappa[n].to_string()]),
    )?;
    let xs: Vec<f64> = (0..v.len()).map(|n| n as f64).collect();
    write_file(
        &dir.join("signal.svg"),
        svg_lines(
            "column sum",
            &xs,
            &[("v", v), ("smoothed", &m.smoothed.values)],
        ),
    )?;
    write_kl(dir, "kl_left", &m.left)?;
    write_kl(dir, "kl_right", &m.right)?;

    write_csv(
        &dir.join("entropy.csv"),
        &["frame_index", "entropy_bits"],
        entropy
            .values
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i.to_string(), e.to_string()]),
    )?;
    let xs: Vec<f64> = (0..entropy.len()).map(|i| i as f64).collect();
    write_file(
        &dir.join("entropy.svg"),
        svg_lines("frame entropy", &xs, &[("entropy", &entropy.values)]),
    )
}

pub fn write_bland_altman(path: &Path, points: &[(f64, f64)]) -> CliResult<()> {
    write_csv(
        path,
        &["mean", "difference"],
        points
            .iter()
            .map(|(m, d)| vec![m.to_string(), d.to_string()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_has_one_path_per_series() {
        let s = svg_lines(
            "t",
            &[0.0, 1.0, 2.0],
            &[("a", &[1.0, 2.0, 3.0]), ("b", &[3.0, 2.0, 1.0])],
        );
        assert_eq!(s.matches("<path").count(), 2);
        assert!(s.starts_with("<svg"));
        assert!(s.contains("M20.00,220.00 L320.00,120.00 L620.00,20.00"));
    }

    #[test]
    fn flat_series_does_not_divide_by_zero() {
        let s = svg_lines("flat", &[0.0], &[("c", &[5.0])]);
        assert!(!s.contains("NaN") && !s.contains("inf"));
    }
}
