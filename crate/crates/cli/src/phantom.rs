use std::io::Write;
use std::path::{Path, PathBuf};

use onsd_core::imaging::{generate_phantom, write_sequence, PhantomSpec};

use crate::error::{stdout_err, write_file, CliError, CliResult};
use crate::measure::TRUTH_FILE;

pub struct PhantomOpts {
    pub spec: Option<PathBuf>,
    pub frames: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn load_spec(path: Option<&Path>) -> CliResult<PhantomSpec> {
    match path {
        None => Ok(PhantomSpec::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            PhantomSpec::parse(&text)
                .map_err(|e| CliError::config(e).with_context(&p.display().to_string()))
        }
    }
}

/// Frames, `meta.txt` and the ground-truth record.
pub fn cmd_phantom(opts: &PhantomOpts, stdout: &mut impl Write) -> CliResult<()> {
    let spec = load_spec(opts.spec.as_deref())?;
    let (seq, truth) = generate_phantom(&spec, opts.frames, opts.seed).map_err(CliError::config)?;
    write_sequence(&seq, &opts.out).map_err(CliError::input)?;
    let json = serde_json::to_string_pretty(&truth)
        .map_err(|e| CliError::Pipeline(format!("serializing truth: {e}")))?;
    write_file(&opts.out.join(TRUTH_FILE), json + "\n")?;
    writeln!(
        stdout,
        "{} frames, sheath {} px -> {}",
        opts.frames,
        truth.true_width_px,
        opts.out.display()
    )
    .map_err(stdout_err)
}
