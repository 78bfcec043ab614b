use std::io::Write;
use std::path::{Path, PathBuf};

use onsd_core::evaluation::{agreement, MeasurementSeries};

use crate::error::{create_dir, stdout_err, write_file, CliError, CliResult};
use crate::plot;

pub struct EvaluateOpts {
    pub candidate: PathBuf,
    pub reference: PathBuf,
    pub out: Option<PathBuf>,
}

#[derive(Debug, serde::Deserialize)]
struct Row {
    id: String,
    value: f64,
}

/// Reads an `id,value` CSV. The series label is the file stem.
pub fn read_series(path: &Path) -> CliResult<MeasurementSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if headers.iter().collect::<Vec<_>>() != ["id", "value"] {
        return Err(CliError::Input(format!(
            "{}: expected header `id,value`",
            path.display()
        )));
    }
    let (mut ids, mut values) = (Vec::new(), Vec::new());
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        ids.push(row.id);
        values.push(row.value);
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    MeasurementSeries::new(label, ids, values)
        .map_err(|e| CliError::input(e).with_context(&path.display().to_string()))
}

pub fn cmd_evaluate(opts: &EvaluateOpts, stdout: &mut impl Write) -> CliResult<()> {
    let a = read_series(&opts.candidate)?;
    let b = read_series(&opts.reference)?;
    a.align(&b).map_err(CliError::input)?;
    let report = agreement(&a, &b).map_err(CliError::run)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Pipeline(format!("serializing report: {e}")))?
        + "\n";
    match &opts.out {
        None => write!(stdout, "{json}").map_err(stdout_err)?,
        Some(out) => {
            create_dir(out)?;
            write_file(&out.join("agreement.json"), &json)?;
            plot::write_bland_altman(&out.join("bland_altman.csv"), &report.bland_altman.points)?;
            writeln!(
                stdout,
                "n={} mean_error={}% icc={} -> {}",
                report.n,
                report.mean_error,
                report.icc.icc,
                out.display()
            )
            .map_err(stdout_err)?;
        }
    }
    Ok(())
}
