//! Dataset construction rules over video metadata.
//!
//! Short videos are kept when they last between 10 and 120 seconds
//! (inclusive) and carry at least five OCR text tracklets. Long movies are
//! cut into consecutive clips of random length between 15 and 60 seconds.

use std::collections::BTreeMap;
use std::fmt::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MIN_SHORT_DURATION: f64 = 10.0;
pub const MAX_SHORT_DURATION: f64 = 120.0;
pub const MIN_TRACKLETS: u32 = 5;
pub const MIN_CLIP: f64 = 15.0;
pub const MAX_CLIP: f64 = 60.0;
pub const HISTOGRAM_BUCKET: f64 = 10.0;
/// Regular buckets cover `[0, 120]`; one more collects longer videos.
pub const HISTOGRAM_BUCKETS: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("movie of {0}s is shorter than one {MIN_CLIP}s clip")]
    TooShort(f64),
    #[error("{id}: duration must be positive, got {duration}")]
    InvalidDuration { id: String, duration: f64 },
    #[error("unknown {kind} {value:?}")]
    UnknownLabel { kind: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Language {
    Chinese,
    English,
    Bilingual,
    NoneText,
}

impl Language {
    pub const ALL: [Language; 4] = [Language::Chinese, Language::English, Language::Bilingual, Language::NoneText];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Chinese => "chinese",
            Language::English => "english",
            Language::Bilingual => "bilingual",
            Language::NoneText => "none_text",
        }
    }
}

impl FromStr for Language {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        match key.as_str() {
            "chinese" | "zh" => Ok(Language::Chinese),
            "english" | "en" => Ok(Language::English),
            "bilingual" => Ok(Language::Bilingual),
            "nonetext" | "none" => Ok(Language::NoneText),
            _ => Err(CorpusError::UnknownLabel {
                kind: "language",
                value: s.to_string(),
            }),
        }
    }
}

impl TryFrom<String> for Language {
    type Error = CorpusError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Language> for String {
    fn from(l: Language) -> String {
        l.as_str().to_string()
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ShortVideo,
    Movie,
}

impl Source {
    pub const ALL: [Source; 2] = [Source::ShortVideo, Source::Movie];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::ShortVideo => "short_video",
            Source::Movie => "movie",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub id: String,
    /// Seconds.
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default)]
    pub tracklet_count: u32,
    pub language: Language,
    pub source: Source,
}

impl VideoMeta {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(CorpusError::InvalidDuration {
                id: self.id.clone(),
                duration: self.duration,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Duration,
    Tracklets,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Duration => "duration",
            RejectReason::Tracklets => "tracklets",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Accept,
    Reject(RejectReason),
}

/// Short-video rule: reject when shorter than 10 s or longer than 120 s,
/// otherwise reject when fewer than five tracklets. Duration is checked
/// first.
pub fn filter_short_video(meta: &VideoMeta) -> FilterDecision {
    if meta.duration < MIN_SHORT_DURATION || meta.duration > MAX_SHORT_DURATION {
        FilterDecision::Reject(RejectReason::Duration)
    } else if meta.tracklet_count < MIN_TRACKLETS {
        FilterDecision::Reject(RejectReason::Tracklets)
    } else {
        FilterDecision::Accept
    }
}

/// Cuts `[0, total]` into consecutive clips with lengths drawn uniformly
/// from `[15, 60]`. A final remainder shorter than 15 s is merged into the
/// previous clip, so clip lengths lie in `[15, 75)`.
pub fn clip_movie(total_duration: f64, seed: u64) -> Result<Vec<(f64, f64)>, CorpusError> {
    if !(total_duration >= MIN_CLIP) || !total_duration.is_finite() {
        return Err(CorpusError::TooShort(total_duration));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clips = Vec::new();
    let mut start = 0.0;
    loop {
        let len: f64 = rng.gen_range(MIN_CLIP..=MAX_CLIP);
        let end = start + len;
        if total_duration - end < MIN_CLIP {
            clips.push((start, total_duration));
            return Ok(clips);
        }
        clips.push((start, end));
        start = end;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusStats {
    /// `(language, source) -> count`, every combination present.
    pub counts: BTreeMap<(Language, Source), usize>,
    /// 10-second buckets over `[0, 120]`, plus a final bucket for longer
    /// videos.
    pub histogram: [usize; HISTOGRAM_BUCKETS + 1],
    pub total: usize,
}

pub fn histogram_bucket(duration: f64) -> usize {
    if duration > MAX_SHORT_DURATION {
        return HISTOGRAM_BUCKETS;
    }
    // 120 itself belongs to the last regular bucket
    ((duration / HISTOGRAM_BUCKET).floor() as usize).min(HISTOGRAM_BUCKETS - 1)
}

impl CorpusStats {
    pub fn empty() -> Self {
        let mut counts = BTreeMap::new();
        for l in Language::ALL {
            for s in Source::ALL {
                counts.insert((l, s), 0);
            }
        }
        Self {
            counts,
            ..Default::default()
        }
    }

    pub fn add(&mut self, meta: &VideoMeta) {
        *self.counts.entry((meta.language, meta.source)).or_default() += 1;
        self.histogram[histogram_bucket(meta.duration)] += 1;
        self.total += 1;
    }

    pub fn merge(mut self, other: &CorpusStats) -> Self {
        for (k, v) in &other.counts {
            *self.counts.entry(*k).or_default() += v;
        }
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self.total += other.total;
        self
    }

    pub fn language_count(&self, language: Language) -> usize {
        self.counts.iter().filter(|((l, _), _)| *l == language).map(|(_, v)| v).sum()
    }

    fn bucket_label(i: usize) -> String {
        if i == HISTOGRAM_BUCKETS {
            format!("{:.0}+", MAX_SHORT_DURATION)
        } else {
            format!("{:.0}-{:.0}", i as f64 * HISTOGRAM_BUCKET, (i + 1) as f64 * HISTOGRAM_BUCKET)
        }
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>12} {:>12} {:>12}", "language", "short_video", "movie", "total");
        for l in Language::ALL {
            let sv = self.counts.get(&(l, Source::ShortVideo)).copied().unwrap_or(0);
            let mv = self.counts.get(&(l, Source::Movie)).copied().unwrap_or(0);
            let _ = writeln!(out, "{:<10} {:>12} {:>12} {:>12}", l.as_str(), sv, mv, sv + mv);
        }
        let _ = writeln!(out, "{:<10} {:>12}", "total", self.total);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<10} {:>12}", "duration_s", "videos");
        for (i, n) in self.histogram.iter().enumerate() {
            let _ = writeln!(out, "{:<10} {:>12}", Self::bucket_label(i), n);
        }
        out
    }

    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "total={}", self.total);
        for ((l, s), n) in &self.counts {
            let _ = writeln!(out, "count.{}.{}={n}", l.as_str(), s.as_str());
        }
        for (i, n) in self.histogram.iter().enumerate() {
            let _ = writeln!(out, "duration.{}={n}", Self::bucket_label(i));
        }
        out
    }
}

pub fn corpus_stats(metas: &[VideoMeta]) -> CorpusStats {
    let mut stats = CorpusStats::empty();
    for m in metas {
        stats.add(m);
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta(duration: f64, tracklets: u32) -> VideoMeta {
        VideoMeta {
            id: "v".into(),
            duration,
            fps: Some(30.0),
            tracklet_count: tracklets,
            language: Language::Chinese,
            source: Source::ShortVideo,
        }
    }

    #[test]
    fn short_video_boundaries() {
        assert_eq!(filter_short_video(&meta(9.9, 20)), FilterDecision::Reject(RejectReason::Duration));
        assert_eq!(filter_short_video(&meta(60.0, 5)), FilterDecision::Accept);
        assert_eq!(filter_short_video(&meta(60.0, 4)), FilterDecision::Reject(RejectReason::Tracklets));
        assert_eq!(filter_short_video(&meta(10.0, 5)), FilterDecision::Accept);
        assert_eq!(filter_short_video(&meta(120.0, 5)), FilterDecision::Accept);
        assert_eq!(filter_short_video(&meta(120.01, 50)), FilterDecision::Reject(RejectReason::Duration));
        // one reason only, duration first
        assert_eq!(filter_short_video(&meta(5.0, 0)), FilterDecision::Reject(RejectReason::Duration));
    }

    #[test]
    fn clip_minimum_movie() {
        assert_eq!(clip_movie(15.0, 0).unwrap(), vec![(0.0, 15.0)]);
        assert_eq!(clip_movie(14.9, 0), Err(CorpusError::TooShort(14.9)));
        assert!(clip_movie(f64::NAN, 0).is_err());
    }

    #[test]
    fn clip_is_deterministic() {
        assert_eq!(clip_movie(1800.0, 7).unwrap(), clip_movie(1800.0, 7).unwrap());
        assert_ne!(clip_movie(1800.0, 7).unwrap(), clip_movie(1800.0, 8).unwrap());
    }

    fn check_tiling(total: f64, clips: &[(f64, f64)]) {
        assert_eq!(clips.first().unwrap().0, 0.0);
        assert_eq!(clips.last().unwrap().1, total);
        for w in clips.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        for &(s, e) in clips {
            let len = e - s;
            assert!((MIN_CLIP..MAX_CLIP + MIN_CLIP).contains(&len), "{len}");
        }
        let sum: f64 = clips.iter().map(|(s, e)| e - s).sum();
        assert!((sum - total).abs() < 1e-9);
    }

    #[test]
    fn clip_long_movie_tiles() {
        check_tiling(1800.0, &clip_movie(1800.0, 7).unwrap());
    }

    #[test]
    fn stats_empty_and_table_row() {
        let s = corpus_stats(&[]);
        assert_eq!(s.total, 0);
        assert!(s.counts.values().all(|&v| v == 0));
        assert_eq!(s.counts.len(), 8);

        let mut metas = Vec::new();
        for (lang, n) in [
            (Language::Chinese, 93871),
            (Language::English, 1196),
            (Language::Bilingual, 464),
            (Language::NoneText, 9693),
        ] {
            for i in 0..n {
                metas.push(VideoMeta {
                    id: format!("{lang}-{i}"),
                    duration: 10.0 + (i % 110) as f64,
                    fps: None,
                    tracklet_count: 5,
                    language: lang,
                    source: Source::ShortVideo,
                });
            }
        }
        let s = corpus_stats(&metas);
        assert_eq!(s.language_count(Language::Chinese), 93871);
        assert_eq!(s.language_count(Language::English), 1196);
        assert_eq!(s.language_count(Language::Bilingual), 464);
        assert_eq!(s.language_count(Language::NoneText), 9693);
        assert_eq!(s.histogram.iter().sum::<usize>(), s.total);
    }

    #[test]
    fn histogram_edges() {
        assert_eq!(histogram_bucket(0.5), 0);
        assert_eq!(histogram_bucket(10.0), 1);
        assert_eq!(histogram_bucket(119.9), 11);
        assert_eq!(histogram_bucket(120.0), 11);
        assert_eq!(histogram_bucket(3600.0), 12);
    }

    #[test]
    fn language_labels() {
        assert_eq!("None-Text".parse::<Language>().unwrap(), Language::NoneText);
        assert_eq!("Bilingual".parse::<Language>().unwrap(), Language::Bilingual);
        assert!("klingon".parse::<Language>().is_err());
        let m: VideoMeta = serde_json::from_str(
            r#"{"id":"a","duration":12.5,"fps":25,"tracklet_count":7,"language":"English","source":"short_video"}"#,
        )
        .unwrap();
        assert_eq!(m.language, Language::English);
        assert!(serde_json::to_string(&m).unwrap().contains(r#""language":"english""#));
    }

    #[test]
    fn report_formats() {
        let s = corpus_stats(&[meta(12.0, 5)]);
        assert!(s.to_key_values().contains("count.chinese.short_video=1"));
        assert!(s.to_key_values().contains("duration.10-20=1"));
        assert!(s.to_table().contains("chinese"));
    }

    proptest! {
        #[test]
        fn tiling_property(total in 15.0f64..5000.0, seed in any::<u64>()) {
            check_tiling(total, &clip_movie(total, seed).unwrap());
        }

        #[test]
        fn filter_is_order_independent(
            raw in prop::collection::vec((1.0f64..200.0, 0u32..10), 0..40),
            seed in any::<u64>(),
        ) {
            let metas: Vec<VideoMeta> = raw
                .iter()
                .enumerate()
                .map(|(i, &(d, t))| VideoMeta { id: i.to_string(), ..meta(d, t) })
                .collect();
            let accepted = |ms: &[VideoMeta]| {
                let mut ids: Vec<String> = ms
                    .iter()
                    .filter(|m| filter_short_video(m) == FilterDecision::Accept)
                    .map(|m| m.id.clone())
                    .collect();
                ids.sort();
                ids
            };
            let mut shuffled = metas.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(accepted(&metas), accepted(&shuffled));
        }

        #[test]
        fn stats_merge_is_order_free(raw in prop::collection::vec(1.0f64..400.0, 0..30), split in 0usize..30) {
            let metas: Vec<VideoMeta> = raw.iter().map(|&d| meta(d, 5)).collect();
            let k = split.min(metas.len());
            let merged = corpus_stats(&metas[k..]).merge(&corpus_stats(&metas[..k]));
            prop_assert_eq!(merged, corpus_stats(&metas));
        }
    }
}
