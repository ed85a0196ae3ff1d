//! End-to-end flows behind the CLI: frame sampling, manifests, prediction
//! backends, extraction (predict, refine, emit) and evaluation runs.

mod backend;
mod config;
mod formats;
mod run;
pub mod synthetic;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::AlignError;
use crate::corpus::CorpusError;
use crate::metrics::MetricsError;
use crate::rate::Rate;
use crate::s3::S3Error;
use crate::srt::SrtError;

pub use backend::{backend_for, BackendKind, FileBackend, PredictionBackend, SyntheticBackend};
pub use config::{PipelineConfig, RefineSettings, SyntheticSettings};
pub use formats::{
    format_predictions, parse_ocr_manifest, parse_predictions, read_ocr_manifest, read_predictions,
    write_ocr_manifest,
};
pub use run::{
    read_video_meta, run_corpus_prep, run_eval, run_extract, run_extract_all, run_extract_with, run_refine,
    CorpusItem, CorpusPrep, Extracted, ManifestOutcome, Rejection,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid rate: {0}")]
    InvalidRate(String),
    #[error("video {0}: no prediction backend available")]
    MissingBackend(String),
    #[error("{}: not found", .0.display())]
    ManifestNotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Syntax { path: PathBuf, line: usize, message: String },
    #[error("invalid manifest entry {id}: {message}")]
    InvalidManifest { id: String, message: String },
    #[error("{}: {source}", path.display())]
    Srt {
        path: PathBuf,
        #[source]
        source: SrtError,
    },
    #[error("{0}")]
    Usage(String),
    #[error("no hypothesis for {}", .0.display())]
    Unpaired(PathBuf),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    S3(#[from] S3Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl PipelineError {
    /// Process exit status: 2 for violated internal invariants, 1 for bad
    /// input.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Invariant(_)
            | PipelineError::Srt {
                source: SrtError::InvariantViolation { .. },
                ..
            }
            | PipelineError::S3(S3Error::NonFinite(_) | S3Error::GradMismatch { .. }) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            PipelineError::ManifestNotFound(path.to_path_buf())
        } else {
            PipelineError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    pub(crate) fn syntax(path: &Path, line: usize, message: impl Into<String>) -> Self {
        PipelineError::Syntax {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

// FNV-1a, for seeds that follow an id rather than a position in a file
pub(crate) fn stable_hash(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// `floor(duration * raw_fps)`.
pub fn total_frames(duration: f64, raw_fps: Rate) -> u64 {
    (duration * raw_fps.numer() as f64 / raw_fps.denom() as f64 + 1e-9).floor() as u64
}

/// Full-rate frame indices seen by a model sampling at `sampling_rate`:
/// `round(k * raw_fps / sampling_rate)` for `k = 0, 1, ...` while below the
/// frame count, without duplicates.
pub fn sample_frames(duration: f64, raw_fps: Rate, sampling_rate: Rate) -> Result<Vec<u64>, PipelineError> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(PipelineError::InvalidRate(format!("duration {duration} must be positive")));
    }
    if sampling_rate > raw_fps {
        return Err(PipelineError::InvalidRate(format!(
            "sampling rate {sampling_rate} exceeds raw fps {raw_fps}"
        )));
    }
    let total = total_frames(duration, raw_fps);
    let mut out: Vec<u64> = Vec::new();
    for k in 0.. {
        let idx = raw_fps.scale_round(k, sampling_rate);
        if idx >= total {
            break;
        }
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    Ok(out)
}

/// One video to process. Relative paths are resolved against the manifest
/// file's directory by [`load_manifest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub id: String,
    /// Seconds.
    pub duration: f64,
    pub raw_fps: Rate,
    #[serde(rename = "ocr")]
    pub ocr_path: PathBuf,
    #[serde(rename = "predictions", default, skip_serializing_if = "Option::is_none")]
    pub predictions_path: Option<PathBuf>,
    /// Ground-truth SRT, used by the synthetic backend.
    #[serde(rename = "truth", default, skip_serializing_if = "Option::is_none")]
    pub truth_path: Option<PathBuf>,
}

impl VideoManifest {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |message: String| PipelineError::InvalidManifest {
            id: self.id.clone(),
            message,
        };
        if self.id.is_empty() || self.id.contains(['/', '\\']) || self.id == "." || self.id == ".." {
            return Err(bad(format!("id {:?} is not a plain file name", self.id)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(bad(format!("duration {} must be positive", self.duration)));
        }
        if self.total_frames() < 1 {
            return Err(bad("shorter than one frame".into()));
        }
        Ok(())
    }

    pub fn total_frames(&self) -> u64 {
        total_frames(self.duration, self.raw_fps)
    }

    fn resolve(mut self, base: &Path) -> Self {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.ocr_path);
        if let Some(p) = self.predictions_path.as_mut() {
            join(p);
        }
        if let Some(p) = self.truth_path.as_mut() {
            join(p);
        }
        self
    }
}

/// Reads a line-delimited JSON manifest, one video per line. Blank lines and
/// lines starting with `#` are skipped. Ids must be unique.
pub fn load_manifest(path: &Path) -> Result<Vec<VideoManifest>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out: Vec<VideoManifest> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let m: VideoManifest = serde_json::from_str(line).map_err(|e| PipelineError::syntax(path, i + 1, e.to_string()))?;
        m.validate()?;
        if out.iter().any(|o| o.id == m.id) {
            return Err(PipelineError::syntax(path, i + 1, format!("duplicate id {:?}", m.id)));
        }
        out.push(m.resolve(base));
    }
    Ok(out)
}

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| PipelineError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| PipelineError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| PipelineError::io(path, e))?;
    tmp.persist(path).map_err(|e| PipelineError::io(path, e.error))?;
    Ok(())
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool
/// when `workers` is `None`.
pub fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, PipelineError> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| PipelineError::Invariant(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rate(s: &str) -> Rate {
        s.parse().unwrap()
    }

    // independent oracle: exact rational arithmetic on the index formula
    fn oracle(duration_ms: u64, fps_num: u64, fps_den: u64, sr: u64) -> Vec<u64> {
        let total = duration_ms * fps_num / (1000 * fps_den);
        let mut out = Vec::new();
        for k in 0u64.. {
            // round(k * fps / sr) = floor((2 k num + sr den) / (2 sr den))
            let idx = (2 * k * fps_num + sr * fps_den) / (2 * sr * fps_den);
            if idx >= total {
                break;
            }
            if out.last() != Some(&idx) {
                out.push(idx);
            }
        }
        out
    }

    #[test]
    fn sampling_examples() {
        assert_eq!(sample_frames(1.0, rate("30"), rate("2")).unwrap(), vec![0, 15]);
        assert_eq!(sample_frames(2.5, rate("24"), rate("2")).unwrap(), vec![0, 12, 24, 36, 48]);
        assert_eq!(sample_frames(0.5, rate("24"), rate("24")).unwrap(), (0..12).collect::<Vec<_>>());
        assert!(matches!(
            sample_frames(1.0, rate("1"), rate("2")),
            Err(PipelineError::InvalidRate(_))
        ));
        assert!(sample_frames(0.0, rate("30"), rate("2")).is_err());
    }

    #[test]
    fn sampling_matches_oracle() {
        for (num, den) in [(24, 1), (25, 1), (30, 1), (60, 1), (30000, 1001), (24000, 1001)] {
            for sr in [1, 2, 5] {
                for duration_ms in [500, 1000, 2500, 10_000, 61_234] {
                    let got = sample_frames(duration_ms as f64 / 1000.0, Rate::new(num, den).unwrap(), rate(&sr.to_string())).unwrap();
                    assert_eq!(got, oracle(duration_ms, num, den, sr), "{num}/{den} {sr} {duration_ms}");
                    assert!(got.windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
    }

    #[test]
    fn ntsc_total_frames() {
        assert_eq!(total_frames(10.0, rate("30000/1001")), 299);
        assert_eq!(total_frames(1.0, rate("30")), 30);
    }

    #[test]
    fn manifest_paths_resolve_against_its_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("videos.jsonl");
        std::fs::write(
            &path,
            "# demo\n{\"id\":\"a\",\"duration\":2.5,\"raw_fps\":\"30000/1001\",\"ocr\":\"a.ocr.jsonl\",\"predictions\":\"/abs/a.pred\"}\n\n",
        )
        .unwrap();
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].ocr_path, dir.path().join("a.ocr.jsonl"));
        assert_eq!(m[0].predictions_path.as_deref(), Some(Path::new("/abs/a.pred")));
        assert_eq!(m[0].raw_fps, Rate::new(30000, 1001).unwrap());
    }

    #[test]
    fn manifest_rejects_bad_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        for body in [
            r#"{"id":"a","duration":0.01,"raw_fps":30,"ocr":"x"}"#,
            r#"{"id":"../a","duration":1,"raw_fps":30,"ocr":"x"}"#,
            "{\"id\":\"a\",\"duration\":1,\"raw_fps\":30,\"ocr\":\"x\"}\n{\"id\":\"a\",\"duration\":1,\"raw_fps\":30,\"ocr\":\"x\"}",
            r#"{"id":"a","raw_fps":30,"ocr":"x"}"#,
        ] {
            std::fs::write(&path, body).unwrap();
            let err = load_manifest(&path).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{err}");
        }
        assert!(matches!(
            load_manifest(&dir.path().join("missing.jsonl")),
            Err(PipelineError::ManifestNotFound(_))
        ));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
