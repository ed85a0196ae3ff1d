use std::fmt::Write;

use rayon::prelude::*;

use crate::metrics::suber::{suber, SuberConfig, SuberCounts};
use crate::metrics::{char_edit_distance, MetricsError};
use crate::srt::{SrtDocument, SubtitleCue};

/// A hypothesis/reference document pair.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub id: String,
    pub hyp: SrtDocument,
    pub reference: SrtDocument,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleScore {
    pub id: String,
    pub ed: usize,
    pub max_len: usize,
    pub suber: SuberCounts,
}

impl SampleScore {
    pub fn ned_ratio(&self) -> f64 {
        if self.max_len == 0 {
            0.0
        } else {
            self.ed as f64 / self.max_len as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ned: f64,
    pub suber_percent: f64,
    pub totals: SuberCounts,
    pub per_sample: Vec<SampleScore>,
}

/// Cue texts paired by time overlap; either side may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPair {
    pub hyp: String,
    pub reference: String,
}

fn overlap_ms(a: &SubtitleCue, b: &SubtitleCue) -> u64 {
    let start = a.start.max(b.start).millis();
    let end = a.end.min(b.end).millis();
    end.saturating_sub(start)
}

fn cue_text(cue: &SubtitleCue) -> String {
    cue.lines.join(" ")
}

/// Greedy maximum-overlap matching of hypothesis cues to reference cues.
/// Unmatched cues pair with the empty string. Pairs come back in time order.
pub fn pair_cues(hyp: &SrtDocument, reference: &SrtDocument) -> Vec<TextPair> {
    let mut edges = Vec::new();
    for (i, h) in hyp.cues.iter().enumerate() {
        for (j, r) in reference.cues.iter().enumerate() {
            let ov = overlap_ms(h, r);
            if ov > 0 {
                edges.push((ov, j, i));
            }
        }
    }
    edges.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut hyp_used = vec![false; hyp.len()];
    let mut ref_match = vec![None; reference.len()];
    for (_, j, i) in edges {
        if !hyp_used[i] && ref_match[j].is_none() {
            hyp_used[i] = true;
            ref_match[j] = Some(i);
        }
    }

    // (time key, tie-break, pair)
    let mut keyed: Vec<(u64, usize, TextPair)> = Vec::new();
    for (j, r) in reference.cues.iter().enumerate() {
        keyed.push((
            r.start.millis(),
            2 * j,
            TextPair {
                hyp: ref_match[j].map(|i| cue_text(&hyp.cues[i])).unwrap_or_default(),
                reference: cue_text(r),
            },
        ));
    }
    for (i, h) in hyp.cues.iter().enumerate() {
        if !hyp_used[i] {
            keyed.push((
                h.start.millis(),
                2 * i + 1,
                TextPair {
                    hyp: cue_text(h),
                    reference: String::new(),
                },
            ));
        }
    }
    keyed.sort_by_key(|k| (k.0, k.1));
    keyed.into_iter().map(|(_, _, p)| p).collect()
}

fn join_nonempty<'a>(parts: impl Iterator<Item = &'a str>) -> String {
    parts.filter(|p| !p.is_empty()).collect::<Vec<_>>().join(" ")
}

fn score(sample: &EvalSample, cfg: &SuberConfig) -> Result<SampleScore, MetricsError> {
    let pairs = pair_cues(&sample.hyp, &sample.reference);
    let hyp = join_nonempty(pairs.iter().map(|p| p.hyp.as_str()));
    let reference = join_nonempty(pairs.iter().map(|p| p.reference.as_str()));
    let max_len = hyp.chars().count().max(reference.chars().count());
    Ok(SampleScore {
        id: sample.id.clone(),
        ed: char_edit_distance(&hyp, &reference),
        max_len,
        suber: suber(&sample.hyp, &sample.reference, cfg)?,
    })
}

/// Scores every sample, in parallel on the current rayon pool, and reduces
/// in sample order.
///
/// For NED each sample contributes one string pair: its time-paired cue
/// texts concatenated. SubER is corpus-level (summed counts).
pub fn evaluate(samples: &[EvalSample], cfg: &SuberConfig) -> Result<EvalReport, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let per_sample = samples
        .par_iter()
        .map(|s| score(s, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let ratio_sum: f64 = per_sample.iter().map(SampleScore::ned_ratio).sum();
    let ned = 1.0 - ratio_sum / per_sample.len() as f64;
    let totals: SuberCounts = per_sample.iter().map(|s| s.suber).sum();
    Ok(EvalReport {
        ned,
        suber_percent: totals.percent(),
        totals,
        per_sample,
    })
}

impl EvalReport {
    /// `name=value` lines.
    pub fn to_key_values(&self) -> String {
        let t = &self.totals;
        let mut out = String::new();
        let _ = writeln!(out, "samples={}", self.per_sample.len());
        let _ = writeln!(out, "ned={:.6}", self.ned);
        let _ = writeln!(out, "suber={:.6}", self.suber_percent);
        let _ = writeln!(out, "word_edits={}", t.word_edits);
        let _ = writeln!(out, "break_edits={}", t.break_edits);
        let _ = writeln!(out, "shifts={}", t.shifts);
        let _ = writeln!(out, "ref_words={}", t.ref_words);
        let _ = writeln!(out, "ref_breaks={}", t.ref_breaks);
        out
    }

    /// Fixed-width table, one row per sample plus a total row.
    pub fn to_table(&self) -> String {
        let width = self
            .per_sample
            .iter()
            .map(|s| s.id.chars().count())
            .max()
            .unwrap_or(0)
            .max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>7}  {:>7}  {:>6}  {:>6}  {:>6}  {:>8}",
            "sample", "ed", "max_len", "ned", "words", "breaks", "shifts", "suber%"
        );
        for s in &self.per_sample {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>7}  {:>7.4}  {:>6}  {:>6}  {:>6}  {:>8.2}",
                s.id,
                s.ed,
                s.max_len,
                1.0 - s.ned_ratio(),
                s.suber.word_edits,
                s.suber.break_edits,
                s.suber.shifts,
                s.suber.percent()
            );
        }
        let t = &self.totals;
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>7}  {:>7.4}  {:>6}  {:>6}  {:>6}  {:>8.2}",
            "TOTAL",
            self.per_sample.iter().map(|s| s.ed).sum::<usize>(),
            self.per_sample.iter().map(|s| s.max_len).sum::<usize>(),
            self.ned,
            t.word_edits,
            t.break_edits,
            t.shifts,
            self.suber_percent
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srt::Timestamp;

    fn cue(start: u64, end: u64, text: &str) -> SubtitleCue {
        SubtitleCue::new(
            1,
            Timestamp::from_millis(start),
            Timestamp::from_millis(end),
            vec![text.into()],
        )
    }

    fn sample(hyp: Vec<SubtitleCue>, reference: Vec<SubtitleCue>) -> EvalSample {
        EvalSample {
            id: "s".into(),
            hyp: SrtDocument::new(hyp),
            reference: SrtDocument::new(reference),
        }
    }

    #[test]
    fn pairing_prefers_largest_overlap() {
        let hyp = SrtDocument::new(vec![cue(0, 900, "A"), cue(900, 3000, "B")]);
        let reference = SrtDocument::new(vec![cue(0, 1000, "a"), cue(1000, 2000, "b"), cue(5000, 6000, "c")]);
        let pairs = pair_cues(&hyp, &reference);
        let got: Vec<(&str, &str)> = pairs.iter().map(|p| (p.hyp.as_str(), p.reference.as_str())).collect();
        assert_eq!(got, [("A", "a"), ("B", "b"), ("", "c")]);
    }

    #[test]
    fn unmatched_hypothesis_cues_are_kept_in_time_order() {
        let hyp = SrtDocument::new(vec![cue(0, 1000, "x"), cue(3000, 4000, "y")]);
        let reference = SrtDocument::new(vec![cue(3000, 4000, "y")]);
        let pairs = pair_cues(&hyp, &reference);
        assert_eq!(pairs[0], TextPair { hyp: "x".into(), reference: String::new() });
        assert_eq!(pairs[1], TextPair { hyp: "y".into(), reference: "y".into() });
    }

    #[test]
    fn identical_documents_hit_fixed_points() {
        let cues = vec![cue(0, 1000, "hello there"), cue(1000, 2000, "你好")];
        let r = evaluate(&[sample(cues.clone(), cues)], &SuberConfig::default()).unwrap();
        assert_eq!(r.ned, 1.0);
        assert_eq!(r.suber_percent, 0.0);
    }

    #[test]
    fn two_cue_substitution() {
        let reference = vec![cue(0, 1000, "the cat sat"), cue(1000, 2000, "on a mat")];
        let hyp = vec![cue(0, 1000, "the cat sat"), cue(1000, 2000, "on a hat")];
        let r = evaluate(&[sample(hyp, reference)], &SuberConfig::default()).unwrap();
        let s = &r.per_sample[0];
        // "the cat sat on a hat" vs "the cat sat on a mat"
        assert_eq!((s.ed, s.max_len), (1, 20));
        assert_eq!(r.ned, 1.0 - 1.0 / 20.0);
        assert_eq!(
            r.totals,
            SuberCounts { word_edits: 1, break_edits: 0, shifts: 0, ref_words: 6, ref_breaks: 2 }
        );
        assert_eq!(r.suber_percent, 12.5);
    }

    #[test]
    fn empty_hypothesis() {
        let reference = vec![cue(0, 1000, "a b"), cue(1000, 2000, "c")];
        let r = evaluate(&[sample(vec![], reference)], &SuberConfig::default()).unwrap();
        assert_eq!(r.ned, 0.0);
        assert_eq!(r.suber_percent, 100.0);
    }

    #[test]
    fn report_formats() {
        let cues = vec![cue(0, 1000, "x")];
        let r = evaluate(&[sample(cues.clone(), cues)], &SuberConfig::default()).unwrap();
        let kv = r.to_key_values();
        assert!(kv.starts_with("samples=1\nned=1.000000\nsuber=0.000000\n"));
        assert!(r.to_table().contains("TOTAL"));
    }
}
