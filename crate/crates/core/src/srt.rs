//! SubRip (`.srt`) documents.
//!
//! The parser is lenient about cue numbering, BOMs, CRLF line endings and
//! trailing whitespace, but strict about timestamp syntax. The emitter always
//! writes LF line endings, renumbered ordinals and zero-padded timestamps, so
//! `emit_srt(parse_srt(t))` is the normalized form of `t`.

use std::fmt;
use std::str::FromStr;

use crate::rate::{div_round_half_up, Rate};

/// Largest value that fits in `HH:MM:SS,mmm` with two hour digits.
pub const MAX_MILLIS: u64 = 99 * 3_600_000 + 59 * 60_000 + 59 * 1000 + 999;

/// Maximum number of text lines per cue.
pub const MAX_LINES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SrtError {
    #[error("line {line}: malformed timestamp {text:?}")]
    MalformedTimestamp { line: usize, text: String },
    #[error("line {line}: expected \"-->\" between timestamps")]
    MissingArrow { line: usize },
    #[error("line {line}: cue has no text")]
    EmptyCue { line: usize },
    #[error("line {line}: malformed cue index {text:?}")]
    MalformedIndex { line: usize, text: String },
    #[error("cue {index}: {reason}")]
    InvariantViolation { index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// The cue number is not the previous number plus one.
    NonMonotonicIndex { line: usize, expected: u32, found: u32 },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::NonMonotonicIndex {
                line,
                expected,
                found,
            } => write!(f, "line {line}: expected cue index {expected}, found {found}"),
        }
    }
}

/// Milliseconds since the start of the video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn from_millis(millis: u64) -> Self {
        Timestamp(millis)
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    /// Whether the value fits in the two-hour-digit SRT field.
    pub fn is_representable(self) -> bool {
        self.0 <= MAX_MILLIS
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0 % 1000;
        let secs = self.0 / 1000;
        write!(
            f,
            "{:02}:{:02}:{:02},{:03}",
            secs / 3600,
            (secs / 60) % 60,
            secs % 60,
            ms
        )
    }
}

impl FromStr for Timestamp {
    type Err = ();

    /// Strict `HH:MM:SS,mmm`.
    fn from_str(s: &str) -> Result<Self, ()> {
        let b = s.as_bytes();
        if b.len() != 12 || b[2] != b':' || b[5] != b':' || b[8] != b',' {
            return Err(());
        }
        let field = |r: std::ops::Range<usize>| -> Result<u64, ()> {
            let part = &b[r];
            if !part.iter().all(u8::is_ascii_digit) {
                return Err(());
            }
            Ok(part.iter().fold(0u64, |acc, d| acc * 10 + u64::from(d - b'0')))
        };
        let (h, m, sec, ms) = (field(0..2)?, field(3..5)?, field(6..8)?, field(9..12)?);
        if m >= 60 || sec >= 60 {
            return Err(());
        }
        Ok(Timestamp(((h * 60 + m) * 60 + sec) * 1000 + ms))
    }
}

/// Converts a frame index to wall-clock time: `round(1000 * frame / fps)`,
/// half-up.
pub fn frame_to_timestamp(frame_index: u64, fps: Rate) -> Timestamp {
    let num = 1000u128 * frame_index as u128 * fps.denom() as u128;
    Timestamp(div_round_half_up(num, fps.numer() as u128) as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtitleCue {
    /// Ordinal as read from the source. The emitter ignores it and writes
    /// the cue's position instead.
    pub index: u32,
    pub start: Timestamp,
    pub end: Timestamp,
    pub lines: Vec<String>,
}

impl SubtitleCue {
    pub fn new(index: u32, start: Timestamp, end: Timestamp, lines: Vec<String>) -> Self {
        Self {
            index,
            start,
            end,
            lines,
        }
    }

    /// Text lines joined with `\n`.
    pub fn text(&self) -> String {
        self.lines.join("\n")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.start >= self.end {
            return Err(format!("start {} is not before end {}", self.start, self.end));
        }
        if !self.end.is_representable() {
            return Err(format!("end time {}ms exceeds 99:59:59,999", self.end.millis()));
        }
        if self.lines.is_empty() {
            return Err("cue has no text lines".into());
        }
        if self.lines.len() > MAX_LINES {
            return Err(format!("{} text lines, at most {MAX_LINES} allowed", self.lines.len()));
        }
        for line in &self.lines {
            if line.contains(['\n', '\r']) {
                return Err("text line contains a line break".into());
            }
            if line.trim().is_empty() {
                return Err("text line is blank".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SrtDocument {
    pub cues: Vec<SubtitleCue>,
}

impl SrtDocument {
    pub fn new(cues: Vec<SubtitleCue>) -> Self {
        Self { cues }
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    /// Rewrites cue indices to `1..=n` in current order.
    pub fn renumber(&mut self) {
        for (i, cue) in self.cues.iter_mut().enumerate() {
            cue.index = i as u32 + 1;
        }
    }

    /// Stable sort by start time (then end time), followed by renumbering.
    pub fn sort_by_time(&mut self) {
        self.cues.sort_by_key(|c| (c.start, c.end));
        self.renumber();
    }

    pub fn validate(&self) -> Result<(), SrtError> {
        for (i, cue) in self.cues.iter().enumerate() {
            cue.validate()
                .map_err(|reason| SrtError::InvariantViolation { index: i + 1, reason })?;
        }
        Ok(())
    }
}

/// Parses an SRT document, discarding warnings.
pub fn parse_srt(text: &str) -> Result<SrtDocument, SrtError> {
    parse_srt_with_warnings(text).map(|(doc, _)| doc)
}

pub fn parse_srt_with_warnings(text: &str) -> Result<(SrtDocument, Vec<ParseWarning>), SrtError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();

    let mut cues = Vec::new();
    let mut warnings = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let block_start = i;
        while i < lines.len() && !lines[i].trim().is_empty() {
            i += 1;
        }
        let cue = parse_block(&lines[block_start..i], block_start + 1)?;
        let expected = cues.last().map_or(1, |c: &SubtitleCue| c.index.saturating_add(1));
        if cue.index != expected {
            warnings.push(ParseWarning::NonMonotonicIndex {
                line: block_start + 1,
                expected,
                found: cue.index,
            });
        }
        cue.validate().map_err(|reason| SrtError::InvariantViolation {
            index: cues.len() + 1,
            reason,
        })?;
        cues.push(cue);
    }
    Ok((SrtDocument { cues }, warnings))
}

/// `first_line` is the 1-based line number of `block[0]`.
fn parse_block(block: &[&str], first_line: usize) -> Result<SubtitleCue, SrtError> {
    let header = block[0].trim();
    let index = if header.bytes().all(|b| b.is_ascii_digit()) {
        header.parse::<u32>().ok().filter(|&n| n > 0)
    } else {
        None
    }
    .ok_or_else(|| SrtError::MalformedIndex {
        line: first_line,
        text: header.to_string(),
    })?;

    let timing_line = first_line + 1;
    let timing = block.get(1).ok_or(SrtError::MissingArrow { line: timing_line })?;
    let (start, end) = timing
        .split_once("-->")
        .ok_or(SrtError::MissingArrow { line: timing_line })?;
    let parse_ts = |s: &str| {
        let s = s.trim();
        s.parse::<Timestamp>().map_err(|_| SrtError::MalformedTimestamp {
            line: timing_line,
            text: s.to_string(),
        })
    };
    let (start, end) = (parse_ts(start)?, parse_ts(end)?);

    if block.len() < 3 {
        return Err(SrtError::EmptyCue { line: first_line });
    }
    let lines = block[2..].iter().map(|l| l.to_string()).collect();
    Ok(SubtitleCue {
        index,
        start,
        end,
        lines,
    })
}

/// Writes the document in canonical form. Cues are numbered by position.
pub fn emit_srt(doc: &SrtDocument) -> Result<String, SrtError> {
    doc.validate()?;
    let mut out = String::new();
    for (i, cue) in doc.cues.iter().enumerate() {
        use fmt::Write;
        let _ = write!(out, "{}\n{} --> {}\n", i + 1, cue.start, cue.end);
        for line in &cue.lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}
