//! OCR-guided timestamp refinement.
//!
//! The model sees the video at a low sampling rate and predicts
//! `(start_frame, end_frame, text)` triples in sampled-frame units. Each
//! boundary is first rescaled to a coarse full-frame-rate index, then moved
//! to the nearest frame within `range` frames whose OCR output contains the
//! predicted text:
//!
//! * start: frames `center - range ..= center + range` scanned upward, first
//!   hit wins;
//! * end: the same window scanned downward, so the latest frame still showing
//!   the text wins.
//!
//! A frame matches when the smallest normalized edit distance between the
//! prediction and any of its OCR strings is below `1 - sim`. Frames missing
//! from the OCR index, and frames with no text, are skipped. A boundary with
//! no match keeps its coarse position.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::normalized_edit_distance;
use crate::rate::Rate;
use crate::srt::{frame_to_timestamp, SrtDocument, SubtitleCue, MAX_LINES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("invalid refine config: {0}")]
    InvalidConfig(String),
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("frame {0} appears more than once in the OCR manifest")]
    DuplicateFrame(u64),
}

/// A model prediction in sampled-frame units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictedSubtitle {
    pub start_frame: u64,
    pub end_frame: u64,
    /// Lines separated by `\n`.
    pub text: String,
}

impl PredictedSubtitle {
    pub fn new(start_frame: u64, end_frame: u64, text: impl Into<String>) -> Result<Self, AlignError> {
        let p = Self {
            start_frame,
            end_frame,
            text: text.into(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if self.start_frame > self.end_frame {
            return Err(AlignError::InvalidPrediction(format!(
                "start frame {} after end frame {}",
                self.start_frame, self.end_frame
            )));
        }
        let lines: Vec<&str> = self.text.split('\n').collect();
        if lines.len() > MAX_LINES {
            return Err(AlignError::InvalidPrediction(format!(
                "{} lines in {:?}, at most {MAX_LINES} allowed",
                lines.len(),
                self.text
            )));
        }
        if lines.iter().any(|l| l.trim().is_empty() || l.contains('\r')) {
            return Err(AlignError::InvalidPrediction(format!(
                "empty or blank line in {:?}",
                self.text
            )));
        }
        Ok(())
    }
}

/// One recognized string. The box, when present, is carried through
/// untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "OcrTextRepr", into = "OcrTextRepr")]
pub struct OcrText {
    pub text: String,
    pub bbox: Option<[f64; 4]>,
}

impl From<&str> for OcrText {
    fn from(text: &str) -> Self {
        Self {
            text: text.to_string(),
            bbox: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OcrTextRepr {
    Plain(String),
    Boxed {
        text: String,
        #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
        bbox: Option<[f64; 4]>,
    },
}

impl From<OcrTextRepr> for OcrText {
    fn from(r: OcrTextRepr) -> Self {
        match r {
            OcrTextRepr::Plain(text) => Self { text, bbox: None },
            OcrTextRepr::Boxed { text, bbox } => Self { text, bbox },
        }
    }
}

impl From<OcrText> for OcrTextRepr {
    fn from(t: OcrText) -> Self {
        match t.bbox {
            None => OcrTextRepr::Plain(t.text),
            bbox => OcrTextRepr::Boxed { text: t.text, bbox },
        }
    }
}

/// Everything recognized on one full-frame-rate frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrFrameResult {
    #[serde(rename = "frame", alias = "frame_index")]
    pub frame_index: u64,
    #[serde(default)]
    pub texts: Vec<OcrText>,
}

/// OCR results keyed by frame index. Frames may be sparse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OcrIndex {
    frames: BTreeMap<u64, OcrFrameResult>,
}

impl OcrIndex {
    pub fn new(frames: impl IntoIterator<Item = OcrFrameResult>) -> Result<Self, AlignError> {
        let mut map = BTreeMap::new();
        for f in frames {
            let idx = f.frame_index;
            if map.insert(idx, f).is_some() {
                return Err(AlignError::DuplicateFrame(idx));
            }
        }
        Ok(Self { frames: map })
    }

    pub fn get(&self, frame: u64) -> Option<&OcrFrameResult> {
        self.frames.get(&frame)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = &OcrFrameResult> {
        self.frames.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    /// Required similarity in `(0, 1]`.
    pub sim: f64,
    pub raw_fps: Rate,
    /// Search radius in full-rate frames.
    pub range: u64,
    pub sampling_rate: Rate,
}

pub const DEFAULT_SIM: f64 = 0.8;

impl RefineConfig {
    /// Defaults: `sim` 0.8, a one-second search radius and 2 samples per
    /// second (or `raw_fps`, if lower).
    pub fn new(raw_fps: Rate) -> Self {
        let two = Rate::integer(2).expect("nonzero");
        Self {
            sim: DEFAULT_SIM,
            raw_fps,
            range: raw_fps.round().max(1),
            sampling_rate: two.min(raw_fps),
        }
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if !(self.sim > 0.0 && self.sim <= 1.0) {
            return Err(AlignError::InvalidConfig(format!("sim {} outside (0, 1]", self.sim)));
        }
        if self.range < 1 {
            return Err(AlignError::InvalidConfig("range must be at least 1".into()));
        }
        if self.sampling_rate > self.raw_fps {
            return Err(AlignError::InvalidConfig(format!(
                "sampling rate {} exceeds raw fps {}",
                self.sampling_rate, self.raw_fps
            )));
        }
        Ok(())
    }

    /// Largest accepted normalized edit distance (exclusive).
    pub fn max_dissimilarity(&self) -> f64 {
        1.0 - self.sim
    }
}

/// `round(raw_fps * b / sampling_rate)`.
pub fn coarse_frame(sampled: u64, cfg: &RefineConfig) -> u64 {
    cfg.raw_fps.scale_round(sampled, cfg.sampling_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Start,
    End,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Start => "start",
            Boundary::End => "end",
        })
    }
}

/// Smallest normalized edit distance between `text` and the frame's OCR
/// output, or `None` for a frame without text.
///
/// For multi-line predictions the frame's strings joined by `\n` are tried
/// as well, since OCR reports each rendered line separately.
pub fn frame_dissimilarity(text: &str, frame: &OcrFrameResult) -> Option<f64> {
    let mut best = frame
        .texts
        .iter()
        .map(|o| normalized_edit_distance(text, &o.text))
        .min_by(f64::total_cmp)?;
    if text.contains('\n') && frame.texts.len() > 1 {
        let joined = frame.texts.iter().map(|o| o.text.as_str()).collect::<Vec<_>>().join("\n");
        best = best.min(normalized_edit_distance(text, &joined));
    }
    Some(best)
}

fn accepts(dissimilarity: f64, cfg: &RefineConfig) -> bool {
    // an exact match always counts, so sim = 1 means "identical text"
    dissimilarity == 0.0 || dissimilarity < cfg.max_dissimilarity()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryMatch {
    pub frame: u64,
    /// False when nothing in the window matched and `frame` is the coarse
    /// position.
    pub matched: bool,
}

pub fn refine_boundary(
    text: &str,
    center: u64,
    boundary: Boundary,
    ocr: &OcrIndex,
    cfg: &RefineConfig,
) -> BoundaryMatch {
    let lo = center.saturating_sub(cfg.range);
    let hi = center.saturating_add(cfg.range);
    let hit = |i: &u64| {
        ocr.get(*i)
            .and_then(|f| frame_dissimilarity(text, f))
            .is_some_and(|d| accepts(d, cfg))
    };
    let found = match boundary {
        Boundary::Start => (lo..=hi).find(hit),
        Boundary::End => (lo..=hi).rev().find(hit),
    };
    match found {
        Some(frame) => BoundaryMatch {
            frame,
            matched: true,
        },
        None => BoundaryMatch {
            frame: center,
            matched: false,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    /// No OCR match in the window; the coarse frame was kept.
    NoMatch { cue: usize, boundary: Boundary, coarse: u64 },
    /// The refined end did not come after the start; the end was set to
    /// `start + 1`.
    InvertedSpan { cue: usize, start: u64, end: u64 },
    /// A predicted frame lies past the end of the video.
    OutOfRange { cue: usize, frame: u64, total_frames: u64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoMatch { cue, boundary, coarse } => {
                write!(f, "cue {cue}: no OCR match for {boundary}, kept coarse frame {coarse}")
            }
            Diagnostic::InvertedSpan { cue, start, end } => {
                write!(f, "cue {cue}: refined end {end} not after start {start}, clamped to {}", start + 1)
            }
            Diagnostic::OutOfRange { cue, frame, total_frames } => {
                write!(f, "cue {cue}: frame {frame} beyond last frame {}", total_frames.saturating_sub(1))
            }
        }
    }
}

/// Refined frame span for one prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinedSpan {
    pub start: BoundaryMatch,
    pub end: BoundaryMatch,
    pub coarse: (u64, u64),
}

/// Both boundaries of one prediction, with diagnostics. `cue` is the 1-based
/// position used in diagnostics.
pub fn refine_prediction(
    cue: usize,
    pred: &PredictedSubtitle,
    ocr: &OcrIndex,
    cfg: &RefineConfig,
) -> (RefinedSpan, Vec<Diagnostic>) {
    let coarse = (coarse_frame(pred.start_frame, cfg), coarse_frame(pred.end_frame, cfg));
    let start = refine_boundary(&pred.text, coarse.0, Boundary::Start, ocr, cfg);
    let mut end = refine_boundary(&pred.text, coarse.1, Boundary::End, ocr, cfg);
    let mut diags = Vec::new();
    for (m, boundary, c) in [(start, Boundary::Start, coarse.0), (end, Boundary::End, coarse.1)] {
        if !m.matched {
            diags.push(Diagnostic::NoMatch { cue, boundary, coarse: c });
        }
    }
    if end.frame <= start.frame {
        diags.push(Diagnostic::InvertedSpan {
            cue,
            start: start.frame,
            end: end.frame,
        });
        end.frame = start.frame + 1;
    }
    (RefinedSpan { start, end, coarse }, diags)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub document: SrtDocument,
    pub spans: Vec<RefinedSpan>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Converts predictions to an SRT document with refined timestamps. Text is
/// copied unchanged; cues are numbered in prediction order.
///
/// Predictions are refined in parallel on the current rayon pool; output
/// order does not depend on scheduling.
pub fn refine_all(
    preds: &[PredictedSubtitle],
    ocr: &OcrIndex,
    cfg: &RefineConfig,
) -> Result<Refined, AlignError> {
    cfg.validate()?;
    for p in preds {
        p.validate()?;
    }
    let results: Vec<(RefinedSpan, Vec<Diagnostic>)> = preds
        .par_iter()
        .enumerate()
        .map(|(i, p)| refine_prediction(i + 1, p, ocr, cfg))
        .collect();

    let mut cues = Vec::with_capacity(preds.len());
    let mut spans = Vec::with_capacity(preds.len());
    let mut diagnostics = Vec::new();
    for (i, (pred, (span, diags))) in preds.iter().zip(results).enumerate() {
        cues.push(SubtitleCue::new(
            i as u32 + 1,
            frame_to_timestamp(span.start.frame, cfg.raw_fps),
            frame_to_timestamp(span.end.frame, cfg.raw_fps),
            pred.text.split('\n').map(str::to_string).collect(),
        ));
        spans.push(span);
        diagnostics.extend(diags);
    }
    Ok(Refined {
        document: SrtDocument::new(cues),
        spans,
        diagnostics,
    })
}
