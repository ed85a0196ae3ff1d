//! Evaluation metrics: corpus NED and SubER.

mod edit;
mod report;
mod suber;
mod tokenize;

pub use edit::{
    char_edit_distance, edit_distance, edit_distance_by, edit_script_by, normalized_edit_distance,
    EditOp,
};
pub use report::{evaluate, pair_cues, EvalReport, EvalSample, SampleScore, TextPair};
pub use suber::{
    candidate_shifts, suber, suber_streams, Shift, SuberAlignment, SuberConfig, SuberCounts,
    MIN_SHIFT_GAIN,
};
pub use tokenize::{
    is_cjk, spans_compatible, split_words, tokenize_with_breaks, TimeSpan, Token, TokenizeOptions,
    TokenizedSubtitleStream,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("corpus has no samples")]
    EmptyCorpus,
    #[error("reference stream has no tokens")]
    EmptyReference,
}

/// Corpus-level normalized edit distance score,
/// `1 - mean(ED(hyp, ref) / max(|hyp|, |ref|))`, over characters.
///
/// A pair of two empty strings contributes a ratio of 0.
pub fn ned_corpus<H, R>(pairs: &[(H, R)]) -> Result<f64, MetricsError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let total: f64 = pairs
        .iter()
        .map(|(h, r)| normalized_edit_distance(h.as_ref(), r.as_ref()))
        .sum();
    Ok(1.0 - total / pairs.len() as f64)
}
