//! Subtitle edit rate.
//!
//! A TER-style score over word-and-break token streams:
//!
//! ```text
//! SubER = (word edits + break edits + shifts) / (reference words + reference breaks)
//! ```
//!
//! Shifts are searched greedily. A shift moves a contiguous block of at most
//! [`SuberConfig::max_block`] hypothesis tokens to a new position. It is
//! legal when the block equals a reference phrase whose tokens are
//! time-compatible with the block's tokens, and when a token next to the
//! insertion point is time-compatible with the start of that phrase. Each
//! round applies the legal shift with the largest reduction in edit distance,
//! but only if that reduction is at least [`MIN_SHIFT_GAIN`]; a shift costs
//! one edit, so accepted shifts always lower the total.
//!
//! Tokens match only when they are equal and their time spans overlap once
//! widened by the tolerance.

use crate::metrics::edit::{edit_distance_by, edit_script_by, EditOp};
use crate::metrics::tokenize::{
    spans_compatible, tokenize_with_breaks, TimeSpan, Token, TokenizeOptions,
    TokenizedSubtitleStream,
};
use crate::metrics::MetricsError;
use crate::srt::SrtDocument;

/// Minimum edit-distance reduction for a shift to be accepted.
pub const MIN_SHIFT_GAIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuberConfig {
    pub tolerance_ms: u64,
    pub max_block: usize,
    pub tokenize: TokenizeOptions,
}

impl Default for SuberConfig {
    fn default() -> Self {
        Self {
            tolerance_ms: 1000,
            max_block: 10,
            tokenize: TokenizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuberCounts {
    pub word_edits: usize,
    pub break_edits: usize,
    pub shifts: usize,
    pub ref_words: usize,
    pub ref_breaks: usize,
}

impl SuberCounts {
    pub fn edits(&self) -> usize {
        self.word_edits + self.break_edits + self.shifts
    }

    pub fn ref_len(&self) -> usize {
        self.ref_words + self.ref_breaks
    }

    /// Edit rate as a fraction. Zero when the reference is empty.
    pub fn value(&self) -> f64 {
        if self.ref_len() == 0 {
            return 0.0;
        }
        self.edits() as f64 / self.ref_len() as f64
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.value()
    }
}

impl std::ops::Add for SuberCounts {
    type Output = SuberCounts;

    fn add(self, o: SuberCounts) -> SuberCounts {
        SuberCounts {
            word_edits: self.word_edits + o.word_edits,
            break_edits: self.break_edits + o.break_edits,
            shifts: self.shifts + o.shifts,
            ref_words: self.ref_words + o.ref_words,
            ref_breaks: self.ref_breaks + o.ref_breaks,
        }
    }
}

impl std::iter::Sum for SuberCounts {
    fn sum<I: Iterator<Item = SuberCounts>>(iter: I) -> Self {
        iter.fold(SuberCounts::default(), |a, b| a + b)
    }
}

/// A block move: `len` tokens starting at `from` are removed and reinserted
/// so that the block starts at index `to` of the resulting sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shift {
    pub from: usize,
    pub len: usize,
    pub to: usize,
}

impl Shift {
    pub fn apply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        let mut rest: Vec<T> = Vec::with_capacity(items.len());
        rest.extend_from_slice(&items[..self.from]);
        rest.extend_from_slice(&items[self.from + self.len..]);
        let mut out = Vec::with_capacity(items.len());
        out.extend_from_slice(&rest[..self.to]);
        out.extend_from_slice(&items[self.from..self.from + self.len]);
        out.extend_from_slice(&rest[self.to..]);
        out
    }
}

#[derive(Clone, Copy)]
struct Tok<'a> {
    token: &'a Token,
    span: Option<TimeSpan>,
}

fn view(stream: &TokenizedSubtitleStream) -> Vec<Tok<'_>> {
    stream
        .tokens
        .iter()
        .zip(&stream.spans)
        .map(|(token, &span)| Tok { token, span })
        .collect()
}

struct Matcher {
    tolerance_ms: u64,
}

impl Matcher {
    fn time_ok(&self, a: Option<TimeSpan>, b: Option<TimeSpan>) -> bool {
        spans_compatible(a, b, self.tolerance_ms)
    }

    fn eq(&self, h: &Tok<'_>, r: &Tok<'_>) -> bool {
        h.token == r.token && self.time_ok(h.span, r.span)
    }

    fn distance(&self, hyp: &[Tok<'_>], reference: &[Tok<'_>]) -> usize {
        edit_distance_by(hyp, reference, |h, r| self.eq(h, r))
    }
}

/// Every legal shift of `hyp` against `reference`, in a fixed order.
fn legal_shifts(hyp: &[Tok<'_>], reference: &[Tok<'_>], cfg: &SuberConfig) -> Vec<Shift> {
    let m = Matcher {
        tolerance_ms: cfg.tolerance_ms,
    };
    let n = hyp.len();
    let mut shifts = Vec::new();
    let mut allowed = vec![false; n + 1];
    for from in 0..n {
        for len in 1..=cfg.max_block.min(n - from) {
            let block = &hyp[from..from + len];
            allowed.iter_mut().for_each(|a| *a = false);
            let mut any = false;
            for start in 0..reference.len().saturating_sub(len - 1) {
                let phrase = &reference[start..start + len];
                if !block.iter().zip(phrase).all(|(h, r)| m.eq(h, r)) {
                    continue;
                }
                let anchor = reference[start].span;
                // neighbours of insertion point `to` in the sequence with
                // the block removed
                let rest_len = n - len;
                let rest = |k: usize| if k < from { &hyp[k] } else { &hyp[k + len] };
                for (to, slot) in allowed.iter_mut().enumerate().take(rest_len + 1) {
                    if *slot {
                        continue;
                    }
                    let left = (to > 0).then(|| rest(to - 1));
                    let right = (to < rest_len).then(|| rest(to));
                    let ok = match (left, right) {
                        (None, None) => true,
                        _ => [left, right]
                            .into_iter()
                            .flatten()
                            .any(|t| m.time_ok(t.span, anchor)),
                    };
                    if ok {
                        *slot = true;
                        any = true;
                    }
                }
            }
            if !any {
                continue;
            }
            for (to, &ok) in allowed.iter().enumerate().take(n - len + 1) {
                if ok && to != from {
                    shifts.push(Shift { from, len, to });
                }
            }
        }
    }
    shifts
}

/// The full set of legal shifts for a stream pair. Exposed for oracles and
/// diagnostics.
pub fn candidate_shifts(
    hyp: &TokenizedSubtitleStream,
    reference: &TokenizedSubtitleStream,
    cfg: &SuberConfig,
) -> Vec<Shift> {
    legal_shifts(&view(hyp), &view(reference), cfg)
}

/// Result of the greedy search: counts plus the shifts that were applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuberAlignment {
    pub counts: SuberCounts,
    pub shifts: Vec<Shift>,
}

/// SubER counts for two token streams.
pub fn suber_streams(
    hyp: &TokenizedSubtitleStream,
    reference: &TokenizedSubtitleStream,
    cfg: &SuberConfig,
) -> Result<SuberAlignment, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let m = Matcher {
        tolerance_ms: cfg.tolerance_ms,
    };
    let reference_view = view(reference);
    let mut current = view(hyp);
    let mut applied = Vec::new();
    let mut distance = m.distance(&current, &reference_view);

    while distance >= MIN_SHIFT_GAIN {
        let mut best: Option<(usize, Shift)> = None;
        for shift in legal_shifts(&current, &reference_view, cfg) {
            let d = m.distance(&shift.apply(&current), &reference_view);
            if d + MIN_SHIFT_GAIN <= distance && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, shift));
            }
        }
        let Some((d, shift)) = best else { break };
        current = shift.apply(&current);
        applied.push(shift);
        distance = d;
    }

    let mut counts = SuberCounts {
        shifts: applied.len(),
        ref_words: reference.word_count(),
        ref_breaks: reference.break_count(),
        ..Default::default()
    };
    for op in edit_script_by(&current, &reference_view, |h, r| m.eq(h, r)) {
        let touches_break = match op {
            EditOp::Match { .. } => continue,
            EditOp::Substitute { a, b } => {
                current[a].token.is_break() || reference_view[b].token.is_break()
            }
            EditOp::Delete { a } => current[a].token.is_break(),
            EditOp::Insert { b } => reference_view[b].token.is_break(),
        };
        if touches_break {
            counts.break_edits += 1;
        } else {
            counts.word_edits += 1;
        }
    }
    debug_assert_eq!(counts.word_edits + counts.break_edits, distance);
    Ok(SuberAlignment {
        counts,
        shifts: applied,
    })
}

/// Stream used for a document in SubER. A reference without cues (a
/// negative sample) scores against a lone break so the rate stays defined;
/// an empty hypothesis for such a reference gets the same lone break and
/// therefore scores zero.
fn document_streams(
    hyp: &SrtDocument,
    reference: &SrtDocument,
    opts: TokenizeOptions,
) -> (TokenizedSubtitleStream, TokenizedSubtitleStream) {
    let lone_break = || TokenizedSubtitleStream::from_tokens(vec![Token::Break]);
    let ref_stream = if reference.is_empty() {
        lone_break()
    } else {
        tokenize_with_breaks(reference, opts)
    };
    let hyp_stream = if hyp.is_empty() && reference.is_empty() {
        lone_break()
    } else {
        tokenize_with_breaks(hyp, opts)
    };
    (hyp_stream, ref_stream)
}

/// SubER counts for two documents.
pub fn suber(
    hyp: &SrtDocument,
    reference: &SrtDocument,
    cfg: &SuberConfig,
) -> Result<SuberCounts, MetricsError> {
    let (h, r) = document_streams(hyp, reference, cfg.tokenize);
    suber_streams(&h, &r, cfg).map(|a| a.counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::edit::edit_distance;
    use crate::srt::{SubtitleCue, Timestamp};

    fn words(s: &str) -> Vec<Token> {
        s.split_whitespace()
            .map(|w| {
                if w == "|" {
                    Token::Break
                } else {
                    Token::Word(w.to_string())
                }
            })
            .collect()
    }

    fn stream(s: &str) -> TokenizedSubtitleStream {
        TokenizedSubtitleStream::from_tokens(words(s))
    }

    fn counts(h: &str, r: &str) -> SuberCounts {
        suber_streams(&stream(h), &stream(r), &SuberConfig::default())
            .unwrap()
            .counts
    }

    /// Minimum edits over every alignment: no shifts, plain DP, checked by
    /// brute-force recursion over insert/delete/substitute choices.
    fn brute_force_edits(h: &[Token], r: &[Token]) -> usize {
        match (h.split_first(), r.split_first()) {
            (None, _) => r.len(),
            (_, None) => h.len(),
            (Some((x, hs)), Some((y, rs))) => {
                let diag = brute_force_edits(hs, rs) + usize::from(x != y);
                diag.min(brute_force_edits(hs, r) + 1)
                    .min(brute_force_edits(h, rs) + 1)
            }
        }
    }

    #[test]
    fn identity_scores_zero() {
        let c = counts("a b | c d e |", "a b | c d e |");
        assert_eq!(
            c,
            SuberCounts {
                ref_words: 5,
                ref_breaks: 2,
                ..Default::default()
            }
        );
        assert_eq!(c.value(), 0.0);
    }

    #[test]
    fn one_substitution() {
        let (h, r) = ("a x c |", "a b c |");
        assert_eq!(brute_force_edits(&words(h), &words(r)), 1);
        let c = counts(h, r);
        assert_eq!((c.word_edits, c.break_edits, c.shifts), (1, 0, 0));
    }

    #[test]
    fn swapped_pair_costs_one_shift() {
        let (h, r) = ("a b | d c |", "a b | c d |");
        assert_eq!(brute_force_edits(&words(h), &words(r)), 2);
        let c = counts(h, r);
        assert_eq!((c.word_edits, c.break_edits, c.shifts), (0, 0, 1));
    }

    #[test]
    fn single_token_move() {
        let c = counts("b c a", "a b c");
        assert_eq!((c.shifts, c.word_edits), (1, 0));
    }

    #[test]
    fn gain_of_one_is_rejected() {
        // the best move saves a single edit
        let (h, r) = ("a a b", "a b x");
        let base = brute_force_edits(&words(h), &words(r));
        let best = candidate_shifts(&stream(h), &stream(r), &SuberConfig::default())
            .into_iter()
            .map(|s| brute_force_edits(&s.apply(&words(h)), &words(r)))
            .min()
            .unwrap();
        assert_eq!(base - best, 1);
        let c = counts(h, r);
        assert_eq!((c.shifts, c.edits()), (0, base));
    }

    proptest::proptest! {
        #[test]
        fn accepted_shifts_each_save_two(h in "[abc|]{0,9}", r in "[abc|]{1,9}") {
            let split = |s: &str| s.chars().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
            let (hs, rs) = (stream(&split(&h)), stream(&split(&r)));
            let cfg = SuberConfig::default();
            let out = suber_streams(&hs, &rs, &cfg).unwrap();
            let mut tokens = hs.tokens.clone();
            let mut d = edit_distance(&tokens, &rs.tokens);
            let plain = d;
            for s in &out.shifts {
                tokens = s.apply(&tokens);
                let next = edit_distance(&tokens, &rs.tokens);
                proptest::prop_assert!(next + MIN_SHIFT_GAIN <= d);
                d = next;
            }
            proptest::prop_assert_eq!(out.counts.word_edits + out.counts.break_edits, d);
            proptest::prop_assert!(out.counts.edits() <= plain);
        }
    }

    #[test]
    fn long_block_shift() {
        let c = counts("d e f a b c", "a b c d e f");
        assert_eq!(c.shifts, 1);
        assert_eq!(c.word_edits, 0);
    }

    #[test]
    fn break_edits_are_separated() {
        let c = counts("a b c |", "a | b c |");
        assert_eq!((c.word_edits, c.break_edits), (0, 1));
        let c = counts("a | b |", "a x b |");
        assert_eq!((c.word_edits, c.break_edits), (0, 1));
    }

    #[test]
    fn empty_reference_stream_is_an_error() {
        assert_eq!(
            suber_streams(&stream("a"), &stream(""), &SuberConfig::default()),
            Err(MetricsError::EmptyReference)
        );
    }

    fn cue(start: u64, end: u64, text: &str) -> SubtitleCue {
        SubtitleCue::new(
            1,
            Timestamp::from_millis(start),
            Timestamp::from_millis(end),
            vec![text.into()],
        )
    }

    #[test]
    fn time_mismatch_blocks_matching() {
        let reference = SrtDocument::new(vec![cue(0, 1000, "hello there")]);
        let near = SrtDocument::new(vec![cue(1500, 2500, "hello there")]);
        let far = SrtDocument::new(vec![cue(5000, 6000, "hello there")]);
        let cfg = SuberConfig::default();
        assert_eq!(suber(&near, &reference, &cfg).unwrap().edits(), 0);
        // nothing aligns: 3 substitutions
        assert_eq!(suber(&far, &reference, &cfg).unwrap().edits(), 3);
    }

    #[test]
    fn shifts_respect_time() {
        // the swapped words sit in a cue far away from their reference cue
        let reference = SrtDocument::new(vec![cue(0, 1000, "a b c"), cue(10_000, 11_000, "d e f")]);
        let hyp = SrtDocument::new(vec![cue(0, 1000, "d e f"), cue(10_000, 11_000, "a b c")]);
        let c = suber(&hyp, &reference, &SuberConfig::default()).unwrap();
        assert_eq!(c.shifts, 0);
        let untimed = SuberConfig {
            tolerance_ms: u64::MAX / 4,
            ..SuberConfig::default()
        };
        let c = suber(&hyp, &reference, &untimed).unwrap();
        assert!(c.shifts >= 1);
        assert!(c.edits() < 6);
    }

    #[test]
    fn negative_samples() {
        let empty = SrtDocument::default();
        let cfg = SuberConfig::default();
        let c = suber(&empty, &empty, &cfg).unwrap();
        assert_eq!((c.edits(), c.ref_len()), (0, 1));
        let hyp = SrtDocument::new(vec![cue(0, 1000, "false alarm")]);
        let c = suber(&hyp, &empty, &cfg).unwrap();
        assert_eq!((c.word_edits, c.break_edits, c.ref_len()), (2, 0, 1));
        assert_eq!(c.percent(), 200.0);
    }

    #[test]
    fn empty_hypothesis_is_all_deletions() {
        let reference = SrtDocument::new(vec![cue(0, 1000, "a b"), cue(1000, 2000, "c")]);
        let c = suber(&SrtDocument::default(), &reference, &SuberConfig::default()).unwrap();
        assert_eq!(c.percent(), 100.0);
    }

    #[test]
    fn shift_apply() {
        let s = Shift { from: 0, len: 2, to: 1 };
        assert_eq!(s.apply(&[1, 2, 3, 4]), vec![3, 1, 2, 4]);
        let s = Shift { from: 2, len: 1, to: 0 };
        assert_eq!(s.apply(&[1, 2, 3, 4]), vec![3, 1, 2, 4]);
    }
}
