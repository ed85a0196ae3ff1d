use std::fmt;

use crate::srt::SrtDocument;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Word(String),
    /// End of a subtitle block.
    Break,
}

impl Token {
    pub fn is_break(&self) -> bool {
        matches!(self, Token::Break)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => f.write_str(w),
            Token::Break => f.write_str("<eob>"),
        }
    }
}

/// Closed interval of milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeSpan {
    pub start: u64,
    pub end: u64,
}

impl TimeSpan {
    /// Whether the spans overlap once `self` is widened by `tolerance_ms` on
    /// both sides.
    pub fn overlaps_within(self, other: TimeSpan, tolerance_ms: u64) -> bool {
        self.start.saturating_sub(tolerance_ms) < other.end
            && other.start < self.end.saturating_add(tolerance_ms)
    }
}

/// Spans are compatible when either side is untimed or they overlap within
/// the tolerance.
pub fn spans_compatible(a: Option<TimeSpan>, b: Option<TimeSpan>, tolerance_ms: u64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a.overlaps_within(b, tolerance_ms),
        _ => true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedSubtitleStream {
    pub tokens: Vec<Token>,
    /// Parallel to `tokens`.
    pub spans: Vec<Option<TimeSpan>>,
}

impl TokenizedSubtitleStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// An untimed stream.
    pub fn from_tokens(tokens: Vec<Token>) -> Self {
        let spans = vec![None; tokens.len()];
        Self { tokens, spans }
    }

    pub fn push(&mut self, token: Token, span: Option<TimeSpan>) {
        self.tokens.push(token);
        self.spans.push(span);
    }

    pub fn word_count(&self) -> usize {
        self.tokens.iter().filter(|t| !t.is_break()).count()
    }

    pub fn break_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_break()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TokenizeOptions {
    /// Lowercase words and strip trailing punctuation.
    pub normalize: bool,
}

/// Characters from scripts written without spaces between words. Each one
/// becomes its own token.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3000..=0x303F      // CJK symbols and punctuation
        | 0x3040..=0x30FF    // hiragana, katakana
        | 0x3400..=0x4DBF    // extension A
        | 0x4E00..=0x9FFF    // unified ideographs
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0xFF00..=0xFFEF    // half/fullwidth forms
        | 0x20000..=0x2FA1F) // extensions B-F, compatibility supplement
}

/// Splits one line into word strings: whitespace first, then each CJK
/// character separately. Non-CJK runs inside a word stay together.
pub fn split_words(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in line.split_whitespace() {
        let mut run = String::new();
        for c in chunk.chars() {
            if is_cjk(c) {
                if !run.is_empty() {
                    out.push(std::mem::take(&mut run));
                }
                out.push(c.to_string());
            } else {
                run.push(c);
            }
        }
        if !run.is_empty() {
            out.push(run);
        }
    }
    out
}

fn normalize_word(word: &str) -> Option<String> {
    let trimmed = word.trim_end_matches(|c: char| c.is_ascii_punctuation() || (is_cjk(c) && !c.is_alphanumeric()));
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

/// Flattens a document into words plus one [`Token::Break`] per cue. Every
/// token carries its cue's time span.
pub fn tokenize_with_breaks(doc: &SrtDocument, opts: TokenizeOptions) -> TokenizedSubtitleStream {
    let mut stream = TokenizedSubtitleStream::default();
    for cue in &doc.cues {
        let span = Some(TimeSpan {
            start: cue.start.millis(),
            end: cue.end.millis(),
        });
        for line in &cue.lines {
            for word in split_words(line) {
                let word = if opts.normalize {
                    match normalize_word(&word) {
                        Some(w) => w,
                        None => continue,
                    }
                } else {
                    word
                };
                stream.push(Token::Word(word), span);
            }
        }
        stream.push(Token::Break, span);
    }
    stream
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srt::{SubtitleCue, Timestamp};

    fn doc(lines: &[&str]) -> SrtDocument {
        SrtDocument::new(vec![SubtitleCue::new(
            1,
            Timestamp::from_millis(0),
            Timestamp::from_millis(1000),
            lines.iter().map(|s| s.to_string()).collect(),
        )])
    }

    fn words(stream: &TokenizedSubtitleStream) -> Vec<String> {
        stream.tokens.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn latin_split_on_whitespace() {
        let s = tokenize_with_breaks(&doc(&["Then who am I?"]), TokenizeOptions::default());
        assert_eq!(words(&s), ["Then", "who", "am", "I?", "<eob>"]);
        assert_eq!(s.spans, vec![Some(TimeSpan { start: 0, end: 1000 }); 5]);
    }

    #[test]
    fn cjk_split_per_character() {
        let s = tokenize_with_breaks(&doc(&["那么我是谁?"]), TokenizeOptions::default());
        assert_eq!(words(&s), ["那", "么", "我", "是", "谁", "?", "<eob>"]);
    }

    #[test]
    fn mixed_and_bilingual() {
        let s = tokenize_with_breaks(&doc(&["那么我是谁?", "Then who am I?"]), TokenizeOptions::default());
        assert_eq!(s.word_count(), 10);
        assert_eq!(s.break_count(), 1);
        assert_eq!(split_words("iPhone手机"), ["iPhone", "手", "机"]);
    }

    #[test]
    fn empty_document() {
        assert!(tokenize_with_breaks(&SrtDocument::default(), TokenizeOptions::default()).is_empty());
    }

    #[test]
    fn one_break_per_cue() {
        let mut d = doc(&["a b"]);
        d.cues.push(SubtitleCue::new(
            2,
            Timestamp::from_millis(1000),
            Timestamp::from_millis(2000),
            vec!["c".into()],
        ));
        let s = tokenize_with_breaks(&d, TokenizeOptions::default());
        assert_eq!(s.break_count(), 2);
        assert_eq!(words(&s), ["a", "b", "<eob>", "c", "<eob>"]);
    }

    #[test]
    fn normalization() {
        let opts = TokenizeOptions { normalize: true };
        let s = tokenize_with_breaks(&doc(&["Then WHO am I? !"]), opts);
        assert_eq!(words(&s), ["then", "who", "am", "i", "<eob>"]);
        let s = tokenize_with_breaks(&doc(&["我是谁？"]), opts);
        assert_eq!(words(&s), ["我", "是", "谁", "<eob>"]);
    }

    #[test]
    fn overlap_with_tolerance() {
        let a = TimeSpan { start: 0, end: 1000 };
        let b = TimeSpan { start: 1500, end: 2000 };
        assert!(!a.overlaps_within(b, 0));
        assert!(!a.overlaps_within(b, 500));
        assert!(a.overlaps_within(b, 501));
        assert!(b.overlaps_within(a, 501));
        assert!(spans_compatible(None, Some(b), 0));
    }
}
