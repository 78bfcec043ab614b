//! Frame ingestion and export.
//!
//! Frames live in a directory as binary portable graymaps (`P5`, maxval 255)
//! named by zero-padded frame index (`00000.pgm`, `00001.pgm`, ...). An
//! optional `meta.txt` sidecar carries `mm_per_pixel=<float>` and
//! `frame_rate=<float>`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::frame::{GrayFrame, VideoSequence};
use crate::error::{Error, Result};

pub const META_FILE: &str = "meta.txt";
pub const FRAME_EXT: &str = "pgm";
const INDEX_DIGITS: usize = 5;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Calibration read from the sidecar file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SequenceMeta {
    pub mm_per_pixel: Option<f64>,
    pub frame_rate: Option<f64>,
}

impl SequenceMeta {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = SequenceMeta::default();
        for (key, value) in parse_key_values(text, "metadata")? {
            let v: f64 = value.parse().map_err(|_| Error::Parse {
                what: "metadata".into(),
                reason: format!("`{key}` is not a number: {value}"),
            })?;
            match key.as_str() {
                "mm_per_pixel" => meta.mm_per_pixel = Some(v),
                "frame_rate" => meta.frame_rate = Some(v),
                _ => {
                    return Err(Error::Parse {
                        what: "metadata".into(),
                        reason: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        Ok(meta)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(v) = self.mm_per_pixel {
            s.push_str(&format!("mm_per_pixel={v}\n"));
        }
        if let Some(v) = self.frame_rate {
            s.push_str(&format!("frame_rate={v}\n"));
        }
        s
    }
}

/// Parses `key=value` lines, skipping blanks and `#` comments. Keys are kept in
/// file order; a repeated key is an error.
pub fn parse_key_values(text: &str, what: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            what: what.into(),
            reason: format!("line {}: expected key=value, got `{line}`", lineno + 1),
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if out.iter().any(|(seen, _)| *seen == k) {
            return Err(Error::Parse {
                what: what.into(),
                reason: format!("line {}: duplicate key `{k}`", lineno + 1),
            });
        }
        out.push((k, v));
    }
    Ok(out)
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}

/// Decodes a binary 8-bit PGM. Header comments (`#` to end of line) are allowed.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayFrame, String> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?);
    }
    if fields[0] != "P5" {
        return Err(format!("unsupported magic `{}` (want P5)", fields[0]));
    }
    let num = |s: &str, name: &str| -> std::result::Result<usize, String> {
        s.parse().map_err(|_| format!("bad {name} `{s}`"))
    };
    let width = num(fields[1], "width")?;
    let height = num(fields[2], "height")?;
    let maxval = num(fields[3], "maxval")?;
    if maxval != 255 {
        return Err(format!("maxval {maxval} unsupported (want 255)"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(format!(
            "raster truncated: need {n} bytes, have {}",
            bytes.len().saturating_sub(pos)
        ));
    }
    GrayFrame::new(width, height, bytes[pos..pos + n].to_vec()).map_err(|e| e.to_string())
}

pub fn frame_file_name(index: usize) -> String {
    format!("{index:0width$}.{FRAME_EXT}", width = INDEX_DIGITS)
}

fn indexed_frame_files(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(FRAME_EXT) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let index: usize = stem.parse().map_err(|_| Error::Parse {
            what: path.display().to_string(),
            reason: "frame files must be named by numeric index".into(),
        })?;
        if let Some(prev) = files.insert(index, path.clone()) {
            return Err(Error::Ingest {
                frame: index,
                reason: format!("duplicate index: {} and {}", prev.display(), path.display()),
            });
        }
    }
    Ok(files.into_iter().collect())
}

/// Loads every frame in `dir`, ordered by index. Calibration comes from `meta`
/// when given, otherwise from `dir/meta.txt` if present; without either the
/// sequence loads uncalibrated.
pub fn load_sequence(dir: &Path, meta: Option<&Path>) -> Result<VideoSequence> {
    let meta_path = meta
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(META_FILE));
    let meta = if meta_path.exists() {
        SequenceMeta::parse(&fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?)?
    } else {
        SequenceMeta::default()
    };

    let files = indexed_frame_files(dir)?;
    if files.is_empty() {
        return Err(Error::EmptySequence(dir.to_path_buf()));
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut dims = None;
    for (index, path) in files {
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let frame = decode_pgm(&bytes).map_err(|reason| Error::Ingest {
            frame: index,
            reason,
        })?;
        let d = (frame.width(), frame.height());
        match dims {
            None => dims = Some(d),
            Some(first) if first != d => {
                return Err(Error::Ingest {
                    frame: index,
                    reason: format!(
                        "dimension mismatch: {}x{} vs {}x{}",
                        d.0, d.1, first.0, first.1
                    ),
                })
            }
            _ => {}
        }
        frames.push(
            frame
                .with_calibration(meta.mm_per_pixel)
                .map_err(|e| Error::Ingest {
                    frame: index,
                    reason: e.to_string(),
                })?,
        );
    }
    VideoSequence::new(frames, meta.frame_rate)
}

/// Writes frames and the metadata sidecar into `dir` (created if missing).
pub fn write_sequence(seq: &VideoSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (i, frame) in seq.frames().iter().enumerate() {
        let path = dir.join(frame_file_name(i));
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(&encode_pgm(frame)).map_err(io_err(&path))?;
    }
    let meta = SequenceMeta {
        mm_per_pixel: seq.mm_per_pixel(),
        frame_rate: seq.frame_rate(),
    };
    let path = dir.join(META_FILE);
    fs::write(&path, meta.to_text()).map_err(io_err(&path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n6 3\n255\n".to_vec();
        bytes.extend(0..18u8);
        let f = decode_pgm(&bytes).unwrap();
        assert_eq!((f.width(), f.height()), (6, 3));
        assert_eq!(f.get(5, 2), 17);
    }

    #[test]
    fn pgm_rejects_ascii_and_16bit() {
        assert!(decode_pgm(b"P2\n6 3\n255\n").is_err());
        let mut bytes = b"P5 6 3 65535\n".to_vec();
        bytes.extend([0u8; 36]);
        assert!(decode_pgm(&bytes).is_err());
    }

    #[test]
    fn metadata_parsing() {
        let m = SequenceMeta::parse("# calib\nmm_per_pixel=0.05\n\nframe_rate = 30\n").unwrap();
        assert_eq!(m.mm_per_pixel, Some(0.05));
        assert_eq!(m.frame_rate, Some(30.0));
        assert!(SequenceMeta::parse("gain=3").is_err());
        assert!(SequenceMeta::parse("mm_per_pixel=abc").is_err());
        assert_eq!(SequenceMeta::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn three_identical_frames() {
        let dir = tempfile::tempdir().unwrap();
        let f = GrayFrame::filled(64, 48, 9).unwrap();
        let seq = VideoSequence::new(vec![f.clone(), f.clone(), f], None).unwrap();
        write_sequence(&seq, dir.path()).unwrap();
        let loaded = load_sequence(dir.path(), None).unwrap();
        assert_eq!(loaded.len(), 3);
        assert!(loaded
            .frames()
            .iter()
            .all(|f| f.width() == 64 && f.height() == 48));
        assert_eq!(loaded.mm_per_pixel(), None);
    }

    #[test]
    fn mismatched_dimensions_cite_the_frame() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(frame_file_name(0)),
            encode_pgm(&GrayFrame::filled(64, 48, 0).unwrap()),
        )
        .unwrap();
        fs::write(
            dir.path().join(frame_file_name(1)),
            encode_pgm(&GrayFrame::filled(32, 48, 0).unwrap()),
        )
        .unwrap();
        match load_sequence(dir.path(), None) {
            Err(Error::Ingest { frame, reason }) => {
                assert_eq!(frame, 1);
                assert!(reason.contains("dimension mismatch"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_sequence(dir.path(), None),
            Err(Error::EmptySequence(_))
        ));
    }

    #[test]
    fn frames_are_ordered_by_index_not_listing() {
        let dir = tempfile::tempdir().unwrap();
        for (name, v) in [("10.pgm", 3u8), ("2.pgm", 2), ("00001.pgm", 1)] {
            fs::write(
                dir.path().join(name),
                encode_pgm(&GrayFrame::filled(6, 3, v).unwrap()),
            )
            .unwrap();
        }
        let seq = load_sequence(dir.path(), None).unwrap();
        let firsts: Vec<u8> = seq.frames().iter().map(|f| f.get(0, 0)).collect();
        assert_eq!(firsts, vec![1, 2, 3]);
    }
}
