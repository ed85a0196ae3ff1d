//! Synthetic videos with known subtitles: a ground-truth SRT and the
//! full-frame-rate OCR output such a video would produce.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::{OcrFrameResult, OcrText};
use crate::pipeline::{
    format_predictions, total_frames, write_atomic, write_ocr_manifest, PipelineError, SyntheticBackend,
    SyntheticSettings, VideoManifest,
};
use crate::rate::Rate;
use crate::srt::{emit_srt, frame_to_timestamp, SrtDocument, SubtitleCue};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOptions {
    pub raw_fps: Rate,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
    /// Probability that OCR misreads a character.
    pub char_noise: f64,
    /// Probability that a cue has two lines.
    pub two_line: f64,
}

impl SyntheticOptions {
    pub fn new(raw_fps: Rate, duration: f64, seed: u64) -> Self {
        Self {
            raw_fps,
            duration,
            seed,
            char_noise: 0.0,
            two_line: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub id: String,
    pub raw_fps: Rate,
    pub duration: f64,
    pub truth: SrtDocument,
    /// Inclusive full-rate frame span of each truth cue.
    pub spans: Vec<(u64, u64)>,
    /// One entry per frame, empty where no subtitle is shown.
    pub ocr: Vec<OcrFrameResult>,
}

fn word(rng: &mut ChaCha8Rng, cjk: bool) -> String {
    if cjk {
        (0..rng.gen_range(1..=3))
            .map(|_| char::from_u32(0x4E00 + rng.gen_range(0..2000)).expect("CJK block"))
            .collect()
    } else {
        (0..rng.gen_range(2..=7)).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
    }
}

fn line(rng: &mut ChaCha8Rng, cjk: bool) -> String {
    let n = rng.gen_range(2..=5);
    let words: Vec<String> = (0..n).map(|_| word(rng, cjk)).collect();
    if cjk {
        words.concat()
    } else {
        words.join(" ")
    }
}

fn misread(text: &str, p: f64, rng: &mut ChaCha8Rng) -> String {
    text.chars()
        .map(|c| {
            if c == ' ' || !rng.gen_bool(p) {
                return c;
            }
            loop {
                let r = rng.gen_range(b'a'..=b'z') as char;
                if r != c {
                    return r;
                }
            }
        })
        .collect()
}

/// Lays out non-overlapping cues of one to three seconds separated by gaps
/// of half a second to two seconds.
pub fn generate(id: &str, opts: &SyntheticOptions) -> SyntheticVideo {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let total = total_frames(opts.duration, opts.raw_fps);
    let fps = opts.raw_fps.round().max(2);
    let cjk = rng.gen_bool(0.3);

    let mut spans = Vec::new();
    let mut cues = Vec::new();
    let mut cursor = 0;
    loop {
        let start = cursor + rng.gen_range(fps / 2..=2 * fps);
        let end = start + rng.gen_range(fps..=3 * fps);
        if end + fps / 2 >= total {
            break;
        }
        let mut lines = vec![line(&mut rng, cjk)];
        if rng.gen_bool(opts.two_line) {
            lines.push(line(&mut rng, cjk));
        }
        cues.push(SubtitleCue::new(
            cues.len() as u32 + 1,
            frame_to_timestamp(start, opts.raw_fps),
            frame_to_timestamp(end, opts.raw_fps),
            lines,
        ));
        spans.push((start, end));
        cursor = end + 1;
    }

    let mut ocr: Vec<OcrFrameResult> = (0..total)
        .map(|frame_index| OcrFrameResult {
            frame_index,
            texts: Vec::new(),
        })
        .collect();
    for (cue, &(start, end)) in cues.iter().zip(&spans) {
        for f in start..=end {
            ocr[f as usize].texts = cue
                .lines
                .iter()
                .map(|l| {
                    if opts.char_noise > 0.0 {
                        OcrText::from(misread(l, opts.char_noise, &mut rng).as_str())
                    } else {
                        OcrText::from(l.as_str())
                    }
                })
                .collect();
        }
    }

    SyntheticVideo {
        id: id.to_string(),
        raw_fps: opts.raw_fps,
        duration: opts.duration,
        truth: SrtDocument::new(cues),
        spans,
        ocr,
    }
}

/// Writes each video's OCR manifest, ground truth and (with `predictions`)
/// a prediction file from the synthetic backend into `dir`, plus a
/// `videos.jsonl` manifest listing them. Returns the manifest path.
pub fn write_synthetic_set(
    dir: &Path,
    videos: &[SyntheticVideo],
    sampling_rate: Rate,
    predictions: Option<SyntheticSettings>,
) -> Result<PathBuf, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut manifest = String::new();
    for v in videos {
        let ocr = format!("{}.ocr.jsonl", v.id);
        let truth = format!("{}.truth.srt", v.id);
        write_atomic(&dir.join(&ocr), write_ocr_manifest(&v.ocr).as_bytes())?;
        let srt = emit_srt(&v.truth).map_err(|source| PipelineError::Srt {
            path: dir.join(&truth),
            source,
        })?;
        write_atomic(&dir.join(&truth), srt.as_bytes())?;
        let predictions_path = match predictions {
            Some(settings) => {
                let name = format!("{}.pred.txt", v.id);
                let preds = SyntheticBackend::new(settings).predict_from_truth(&v.id, &v.truth, sampling_rate)?;
                write_atomic(&dir.join(&name), format_predictions(&preds).as_bytes())?;
                Some(PathBuf::from(name))
            }
            None => None,
        };
        let entry = VideoManifest {
            id: v.id.clone(),
            duration: v.duration,
            raw_fps: v.raw_fps,
            ocr_path: ocr.into(),
            predictions_path,
            truth_path: Some(truth.into()),
        };
        manifest.push_str(&serde_json::to_string(&entry).expect("plain data serializes"));
        manifest.push('\n');
    }
    let path = dir.join("videos.jsonl");
    write_atomic(&path, manifest.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_consistent() {
        for fps in ["24", "30", "60", "30000/1001"] {
            let opts = SyntheticOptions::new(fps.parse().unwrap(), 30.0, 3);
            let v = generate("v", &opts);
            assert!(!v.truth.is_empty());
            v.truth.validate().unwrap();
            assert_eq!(v.ocr.len() as u64, total_frames(30.0, opts.raw_fps));
            for w in v.spans.windows(2) {
                assert!(w[0].1 < w[1].0);
            }
            for (cue, &(s, e)) in v.truth.cues.iter().zip(&v.spans) {
                assert_eq!(v.ocr[s as usize].texts.len(), cue.lines.len());
                assert!(v.ocr[s as usize - 1].texts.is_empty());
                assert!(v.ocr[e as usize + 1].texts.is_empty());
            }
        }
    }

    #[test]
    fn same_seed_same_video() {
        let opts = SyntheticOptions::new(Rate::integer(25).unwrap(), 20.0, 9);
        assert_eq!(generate("a", &opts), generate("a", &opts));
    }

    #[test]
    fn noise_changes_characters_only() {
        let mut opts = SyntheticOptions::new(Rate::integer(30).unwrap(), 20.0, 4);
        opts.char_noise = 0.1;
        let noisy = generate("a", &opts);
        opts.char_noise = 0.0;
        let clean = generate("a", &opts);
        assert_eq!(noisy.truth, clean.truth);
        let mut changed = 0;
        for (n, c) in noisy.ocr.iter().zip(&clean.ocr) {
            for (a, b) in n.texts.iter().zip(&c.texts) {
                assert_eq!(a.text.chars().count(), b.text.chars().count());
                changed += usize::from(a.text != b.text);
            }
        }
        assert!(changed > 0);
    }
}
