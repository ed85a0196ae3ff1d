use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{refine_all, Diagnostic, OcrIndex, PredictedSubtitle, RefineConfig};
use crate::corpus::{clip_movie, corpus_stats, filter_short_video, CorpusStats, FilterDecision, RejectReason, Source, VideoMeta};
use crate::metrics::{evaluate, EvalReport, EvalSample, SuberConfig};
use crate::pipeline::{
    backend_for, read_ocr_manifest, read_predictions, sample_frames, stable_hash, with_workers, write_atomic,
    PipelineConfig, PipelineError, PredictionBackend, VideoManifest,
};
use crate::srt::{emit_srt, parse_srt, SrtDocument};

/// Result of extracting one video.
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub id: String,
    pub document: SrtDocument,
    /// `document` rendered as SRT.
    pub srt: String,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug)]
pub struct ManifestOutcome {
    pub id: String,
    pub result: Result<Extracted, PipelineError>,
}

fn diagnostic_cue(d: &Diagnostic) -> usize {
    match d {
        Diagnostic::NoMatch { cue, .. } | Diagnostic::InvertedSpan { cue, .. } | Diagnostic::OutOfRange { cue, .. } => *cue,
    }
}

fn finish(
    id: &str,
    preds: &[PredictedSubtitle],
    ocr: &OcrIndex,
    refine: &RefineConfig,
    total_frames: Option<u64>,
    sort: bool,
) -> Result<Extracted, PipelineError> {
    let refined = refine_all(preds, ocr, refine)?;
    let mut diagnostics = refined.diagnostics;
    if let Some(total) = total_frames {
        for (i, span) in refined.spans.iter().enumerate() {
            for frame in [span.coarse.0, span.coarse.1] {
                if frame >= total {
                    diagnostics.push(Diagnostic::OutOfRange {
                        cue: i + 1,
                        frame,
                        total_frames: total,
                    });
                }
            }
        }
        diagnostics.sort_by_key(diagnostic_cue);
    }
    let mut document = refined.document;
    if sort {
        document.sort_by_time();
        document.renumber();
    }
    let srt = emit_srt(&document).map_err(|e| PipelineError::Invariant(format!("{id}: {e}")))?;
    Ok(Extracted {
        id: id.to_string(),
        document,
        srt,
        diagnostics,
    })
}

/// Predicts with the configured backend, refines against the video's OCR
/// and renders SRT.
pub fn run_extract(video: &VideoManifest, cfg: &PipelineConfig) -> Result<Extracted, PipelineError> {
    run_extract_with(video, cfg, backend_for(cfg).as_ref())
}

pub fn run_extract_with(
    video: &VideoManifest,
    cfg: &PipelineConfig,
    backend: &dyn PredictionBackend,
) -> Result<Extracted, PipelineError> {
    video.validate()?;
    let sampled = sample_frames(video.duration, video.raw_fps, cfg.sampling_rate)?;
    let refine = cfg.refine_config(video.raw_fps);
    refine.validate()?;
    let ocr = OcrIndex::new(read_ocr_manifest(&video.ocr_path)?)?;
    let preds = backend.predict(video, &sampled, cfg)?;
    finish(&video.id, &preds, &ocr, &refine, Some(video.total_frames()), cfg.sort_output)
}

/// Extracts every video on a pool of `cfg.workers` threads. Outcomes keep
/// manifest order.
pub fn run_extract_all(videos: &[VideoManifest], cfg: &PipelineConfig) -> Result<Vec<ManifestOutcome>, PipelineError> {
    let backend = backend_for(cfg);
    with_workers(cfg.workers, || {
        videos
            .par_iter()
            .map(|v| ManifestOutcome {
                id: v.id.clone(),
                result: run_extract_with(v, cfg, backend.as_ref()),
            })
            .collect()
    })
}

/// Refines a prediction file against an OCR manifest.
pub fn run_refine(pred_path: &Path, ocr_path: &Path, refine: &RefineConfig, sort: bool) -> Result<Extracted, PipelineError> {
    refine.validate()?;
    let preds = read_predictions(pred_path)?;
    let ocr = OcrIndex::new(read_ocr_manifest(ocr_path)?)?;
    let id = pred_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    finish(&id, &preds, &ocr, refine, None, sort)
}

fn read_srt(path: &Path) -> Result<SrtDocument, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    parse_srt(&text).map_err(|source| PipelineError::Srt {
        path: path.to_path_buf(),
        source,
    })
}

fn srt_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))? {
        let path = entry.map_err(|e| PipelineError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("srt")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Scores a hypothesis against a reference. Both paths are SRT files, or
/// both are directories whose `.srt` files are paired by name; every
/// reference needs a hypothesis, extra hypotheses are ignored.
pub fn run_eval(hyp: &Path, reference: &Path, cfg: &SuberConfig) -> Result<EvalReport, PipelineError> {
    let samples = if reference.is_dir() {
        if !hyp.is_dir() {
            return Err(PipelineError::Usage(format!(
                "{} is a directory but {} is not",
                reference.display(),
                hyp.display()
            )));
        }
        srt_files(reference)?
            .into_iter()
            .map(|r| {
                let h = hyp.join(r.file_name().expect("listed file"));
                if !h.is_file() {
                    return Err(PipelineError::Unpaired(r));
                }
                Ok(EvalSample {
                    id: stem(&r),
                    hyp: read_srt(&h)?,
                    reference: read_srt(&r)?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        vec![EvalSample {
            id: stem(reference),
            hyp: read_srt(hyp)?,
            reference: read_srt(reference)?,
        }]
    };
    Ok(evaluate(&samples, cfg)?)
}

/// One corpus entry: a whole short video or a movie clip. `meta.id` names
/// the entry, `parent` the source video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub parent: String,
    pub start: f64,
    pub end: f64,
    #[serde(flatten)]
    pub meta: VideoMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPrep {
    pub accepted: Vec<CorpusItem>,
    pub rejected: Vec<Rejection>,
    /// Over `accepted`.
    pub stats: CorpusStats,
}

fn prepare(meta: &VideoMeta, seed: u64) -> Result<Vec<CorpusItem>, RejectReason> {
    let item = |id: String, start: f64, end: f64| CorpusItem {
        parent: meta.id.clone(),
        start,
        end,
        meta: VideoMeta {
            id,
            duration: end - start,
            ..meta.clone()
        },
    };
    match meta.source {
        Source::ShortVideo => match filter_short_video(meta) {
            FilterDecision::Accept => Ok(vec![item(meta.id.clone(), 0.0, meta.duration)]),
            FilterDecision::Reject(r) => Err(r),
        },
        Source::Movie => {
            let clips = clip_movie(meta.duration, seed ^ stable_hash(&meta.id)).map_err(|_| RejectReason::Duration)?;
            Ok(clips
                .into_iter()
                .enumerate()
                .map(|(k, (s, e))| item(format!("{}_clip{:03}", meta.id, k), s, e))
                .collect())
        }
    }
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("plain data serializes") + "\n")
        .collect()
}

pub fn read_video_meta(path: &Path) -> Result<Vec<VideoMeta>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let m: VideoMeta = serde_json::from_str(line).map_err(|e| PipelineError::syntax(path, i + 1, e.to_string()))?;
        m.validate()?;
        out.push(m);
    }
    Ok(out)
}

/// Filters short videos, clips movies, and writes `accepted.jsonl`,
/// `rejected.jsonl`, `stats.txt` (table) and `stats.kv` into `out_dir`.
/// Each movie's clips depend only on `seed` and the movie id.
pub fn run_corpus_prep(meta_path: &Path, out_dir: &Path, seed: u64) -> Result<CorpusPrep, PipelineError> {
    let metas = read_video_meta(meta_path)?;
    let outcomes: Vec<Result<Vec<CorpusItem>, RejectReason>> = metas.par_iter().map(|m| prepare(m, seed)).collect();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (m, o) in metas.iter().zip(outcomes) {
        match o {
            Ok(items) => accepted.extend(items),
            Err(reason) => rejected.push(Rejection { id: m.id.clone(), reason }),
        }
    }
    let stats = corpus_stats(&accepted.iter().map(|c| c.meta.clone()).collect::<Vec<_>>());

    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    write_atomic(&out_dir.join("accepted.jsonl"), to_jsonl(&accepted).as_bytes())?;
    write_atomic(&out_dir.join("rejected.jsonl"), to_jsonl(&rejected).as_bytes())?;
    write_atomic(&out_dir.join("stats.txt"), stats.to_table().as_bytes())?;
    write_atomic(&out_dir.join("stats.kv"), stats.to_key_values().as_bytes())?;
    Ok(CorpusPrep {
        accepted,
        rejected,
        stats,
    })
}
