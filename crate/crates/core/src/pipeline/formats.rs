//! Line-oriented input files.
//!
//! OCR manifest, one JSON object per frame:
//!
//! ```text
//! {"frame": 120, "texts": ["first line", {"text": "second", "box": [0, 0, 10, 4]}]}
//! ```
//!
//! Predictions, one `<b><e>text` record per line in sampled-frame units.
//! Inside `text`, `\n` separates subtitle lines and `\\` is a backslash.

use std::fmt::Write;
use std::path::Path;

use crate::align::{OcrFrameResult, PredictedSubtitle};
use crate::pipeline::PipelineError;

fn skip(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

pub fn parse_ocr_manifest(text: &str, path: &Path) -> Result<Vec<OcrFrameResult>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if skip(line) {
            continue;
        }
        let frame = serde_json::from_str(line).map_err(|e| PipelineError::syntax(path, i + 1, e.to_string()))?;
        out.push(frame);
    }
    Ok(out)
}

pub fn read_ocr_manifest(path: &Path) -> Result<Vec<OcrFrameResult>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    parse_ocr_manifest(&text, path)
}

pub fn write_ocr_manifest(frames: &[OcrFrameResult]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

fn take_index<'a>(s: &'a str) -> Result<(u64, &'a str), String> {
    let rest = s.strip_prefix('<').ok_or("expected '<'")?;
    let (num, rest) = rest.split_once('>').ok_or("unterminated '<'")?;
    let num = num.trim();
    if num.is_empty() || !num.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("frame index {num:?} is not a non-negative integer"));
    }
    Ok((num.parse().map_err(|_| format!("frame index {num} too large"))?, rest))
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => return Err(format!("unknown escape \\{other}")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

pub fn parse_predictions(text: &str, path: &Path) -> Result<Vec<PredictedSubtitle>, PipelineError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if skip(raw) {
            continue;
        }
        let err = |m: String| PipelineError::syntax(path, i + 1, m);
        let line = raw.trim();
        let (b, rest) = take_index(line).map_err(err)?;
        let (e, rest) = take_index(rest).map_err(err)?;
        let text = unescape(rest.trim()).map_err(err)?;
        out.push(PredictedSubtitle::new(b, e, text).map_err(|x| err(x.to_string()))?);
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictedSubtitle>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    parse_predictions(&text, path)
}

pub fn format_predictions(preds: &[PredictedSubtitle]) -> String {
    let mut out = String::new();
    for p in preds {
        let _ = writeln!(out, "<{}><{}>{}", p.start_frame, p.end_frame, escape(&p.text));
    }
    out
}
