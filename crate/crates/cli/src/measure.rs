//! `onsd measure`: one video directory, or a directory of video directories.

use std::io::Write;
use std::path::{Path, PathBuf};

use onsd_core::imaging::io::FRAME_EXT;
use onsd_core::imaging::{load_sequence, PhantomTruth};
use onsd_core::pipeline::{run, MeasurementReport, PipelineConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{create_dir, stdout_err, write_file, CliError, CliResult};
use crate::plot;

/// Ground-truth record written next to phantom frames.
pub const TRUTH_FILE: &str = "truth.json";
pub const INDEX_FILE: &str = "index.json";

pub struct MeasureOpts {
    pub input: PathBuf,
    pub out: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    pub id: Option<String>,
    pub dump_signals: bool,
    pub jobs: usize,
}

#[derive(Debug, Serialize)]
struct IndexEntry {
    video_id: String,
    ok: bool,
    report: Option<String>,
    onsd_px: Option<f64>,
    onsd_mm: Option<f64>,
    error: Option<String>,
}

fn has_frames(dir: &Path) -> CliResult<bool> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == FRAME_EXT) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn video_dirs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() && has_frames(&path)? {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn dir_id(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into())
}

/// Fills a missing seed box or row band from the phantom ground truth, if the
/// video directory carries one.
fn resolve_config(dir: &Path, base: &PipelineConfig) -> CliResult<PipelineConfig> {
    let mut config = base.clone();
    let truth_path = dir.join(TRUTH_FILE);
    if (config.seed_box.is_none() || config.measure_rows.is_none()) && truth_path.exists() {
        let text =
            std::fs::read_to_string(&truth_path).map_err(|e| CliError::io(&truth_path, e))?;
        let truth: PhantomTruth = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", truth_path.display())))?;
        config.seed_box.get_or_insert(truth.seed_box);
        config.measure_rows.get_or_insert(truth.measure_rows);
    }
    if config.seed_box.is_none() {
        return Err(CliError::Config(format!(
            "no seed box for {}: pass --seed-box x,y,w,h, set seed_box in the config, \
             or provide {TRUTH_FILE}",
            dir.display()
        )));
    }
    Ok(config)
}

fn report_json(report: &MeasurementReport) -> CliResult<String> {
    serde_json::to_string_pretty(report)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Pipeline(format!("serializing report: {e}")))
}

/// Measures one video. Returns the report and, when written, its path.
fn measure_one(
    dir: &Path,
    id: &str,
    meta: Option<&Path>,
    base: &PipelineConfig,
    out: Option<&Path>,
    dump_signals: bool,
) -> CliResult<(MeasurementReport, Option<PathBuf>)> {
    let mut config = resolve_config(dir, base)?;
    if let Some(out) = out {
        config.output_dir = Some(out.to_path_buf());
    }
    let seq = load_sequence(dir, meta).map_err(CliError::input)?;
    let output = run(id, &seq, &config).map_err(CliError::run)?;
    let Some(out) = out else {
        return Ok((output.report, None));
    };

    create_dir(out)?;
    let path = out.join(format!("{id}.json"));
    write_file(&path, report_json(&output.report)?)?;
    let data = create_dir(&out.join(id))?;
    plot::write_scores(&data, &output.report.scores)?;
    plot::write_rois(&data, &output.report.rois)?;
    if dump_signals {
        plot::write_signals(&data, &output.measurement, &output.entropy)?;
    }
    Ok((output.report, Some(path)))
}

/// Summaries, or the bare report when there is no output directory, go to `stdout`.
pub fn cmd_measure(
    opts: &MeasureOpts,
    base: &PipelineConfig,
    stdout: &mut impl Write,
) -> CliResult<()> {
    let out = opts.out.clone().or_else(|| base.output_dir.clone());
    if !opts.input.is_dir() {
        return Err(CliError::Input(format!(
            "{} is not a directory",
            opts.input.display()
        )));
    }
    if has_frames(&opts.input)? {
        if opts.dump_signals && out.is_none() {
            return Err(CliError::Config(
                "--dump-signals needs an output directory".into(),
            ));
        }
        let id = opts.id.clone().unwrap_or_else(|| dir_id(&opts.input));
        let (report, path) = measure_one(
            &opts.input,
            &id,
            opts.meta.as_deref(),
            base,
            out.as_deref(),
            opts.dump_signals,
        )
        .map_err(|e| e.with_context(&id))?;
        match path {
            Some(p) => writeln!(
                stdout,
                "{id}: onsd {} px -> {}",
                report.onsd_px,
                p.display()
            ),
            None => write!(stdout, "{}", report_json(&report)?),
        }
        .map_err(stdout_err)?;
        return Ok(());
    }

    let dirs = video_dirs(&opts.input)?;
    if dirs.is_empty() {
        return Err(CliError::Input(format!(
            "no frames or video directories in {}",
            opts.input.display()
        )));
    }
    let out = out.ok_or_else(|| CliError::Config("batch mode needs an output directory".into()))?;
    create_dir(&out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let results: Vec<(String, CliResult<(MeasurementReport, Option<PathBuf>)>)> =
        pool.install(|| {
            dirs.par_iter()
                .map(|dir| {
                    let id = dir_id(dir);
                    let r = measure_one(
                        dir,
                        &id,
                        opts.meta.as_deref(),
                        base,
                        Some(&out),
                        opts.dump_signals,
                    );
                    (id, r)
                })
                .collect()
        });

    let mut first_failure = None;
    let index: Vec<IndexEntry> = results
        .into_iter()
        .map(|(id, r)| match r {
            Ok((report, path)) => {
                let _ = writeln!(stdout, "{id}: onsd {} px", report.onsd_px);
                IndexEntry {
                    video_id: id,
                    ok: true,
                    report: path
                        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())),
                    onsd_px: Some(report.onsd_px),
                    onsd_mm: report.onsd_mm,
                    error: None,
                }
            }
            Err(e) => {
                let e = e.with_context(&id);
                eprintln!("{e}");
                let msg = e.to_string();
                first_failure.get_or_insert(e);
                IndexEntry {
                    video_id: id,
                    ok: false,
                    report: None,
                    onsd_px: None,
                    onsd_mm: None,
                    error: Some(msg),
                }
            }
        })
        .collect();
    let json = serde_json::to_string_pretty(&index)
        .map_err(|e| CliError::Pipeline(format!("serializing index: {e}")))?;
    write_file(&out.join(INDEX_FILE), json + "\n")?;
    match first_failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
