use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::PredictedSubtitle;
use crate::pipeline::{read_predictions, stable_hash, PipelineConfig, PipelineError, SyntheticSettings, VideoManifest};
use crate::rate::Rate;
use crate::srt::parse_srt;

/// Produces `<b><e>text` predictions for a video, in sampled-frame units.
/// Stands in for the language model.
pub trait PredictionBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// `sampled` lists the full-rate frame indices the model would see.
    fn predict(
        &self,
        video: &VideoManifest,
        sampled: &[u64],
        cfg: &PipelineConfig,
    ) -> Result<Vec<PredictedSubtitle>, PipelineError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// Precomputed predictions from the manifest's `predictions` file.
    File,
    /// Predictions derived from the manifest's `truth` SRT.
    Synthetic,
}

impl FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "file" => Ok(BackendKind::File),
            "synthetic" => Ok(BackendKind::Synthetic),
            _ => Err(format!("unknown backend {s:?} (expected file or synthetic)")),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::File => "file",
            BackendKind::Synthetic => "synthetic",
        })
    }
}

pub fn backend_for(cfg: &PipelineConfig) -> Box<dyn PredictionBackend> {
    match cfg.backend {
        BackendKind::File => Box::new(FileBackend),
        BackendKind::Synthetic => Box::new(SyntheticBackend::new(cfg.synthetic)),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FileBackend;

impl PredictionBackend for FileBackend {
    fn name(&self) -> &'static str {
        "file"
    }

    fn predict(
        &self,
        video: &VideoManifest,
        _sampled: &[u64],
        _cfg: &PipelineConfig,
    ) -> Result<Vec<PredictedSubtitle>, PipelineError> {
        let path = video
            .predictions_path
            .as_deref()
            .ok_or_else(|| PipelineError::MissingBackend(video.id.clone()))?;
        read_predictions(path)
    }
}

/// Reads the ground-truth SRT and predicts each cue at the nearest sampled
/// frames, then moves every boundary by a seeded offset of at most
/// `noise` sampled frames.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticBackend {
    settings: SyntheticSettings,
}

impl SyntheticBackend {
    pub fn new(settings: SyntheticSettings) -> Self {
        Self { settings }
    }

    /// Predictions for an already-parsed truth document.
    pub fn predict_from_truth(
        &self,
        id: &str,
        truth: &crate::srt::SrtDocument,
        sampling_rate: Rate,
    ) -> Result<Vec<PredictedSubtitle>, PipelineError> {
        let per_ms = Rate::integer(1000).expect("nonzero");
        let mut rng = ChaCha8Rng::seed_from_u64(self.settings.seed ^ stable_hash(id));
        let noise = self.settings.noise as i64;
        let mut jitter = |v: u64| {
            if noise == 0 {
                v
            } else {
                v.saturating_add_signed(rng.gen_range(-noise..=noise))
            }
        };
        truth
            .cues
            .iter()
            .map(|c| {
                let b = jitter(sampling_rate.scale_round(c.start.millis(), per_ms));
                let e = jitter(sampling_rate.scale_round(c.end.millis(), per_ms)).max(b);
                Ok(PredictedSubtitle::new(b, e, c.lines.join("\n"))?)
            })
            .collect()
    }
}

impl PredictionBackend for SyntheticBackend {
    fn name(&self) -> &'static str {
        "synthetic"
    }

    fn predict(
        &self,
        video: &VideoManifest,
        _sampled: &[u64],
        cfg: &PipelineConfig,
    ) -> Result<Vec<PredictedSubtitle>, PipelineError> {
        let path = video
            .truth_path
            .as_deref()
            .ok_or_else(|| PipelineError::MissingBackend(video.id.clone()))?;
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let truth = parse_srt(&text).map_err(|source| PipelineError::Srt {
            path: path.to_path_buf(),
            source,
        })?;
        self.predict_from_truth(&video.id, &truth, cfg.sampling_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srt::{SrtDocument, SubtitleCue, Timestamp};

    fn truth() -> SrtDocument {
        SrtDocument::new(vec![
            SubtitleCue::new(1, Timestamp::from_millis(1000), Timestamp::from_millis(2400), vec!["a".into()]),
            SubtitleCue::new(
                2,
                Timestamp::from_millis(3250),
                Timestamp::from_millis(5000),
                vec!["b".into(), "c".into()],
            ),
        ])
    }

    #[test]
    fn noiseless_predictions_round_to_sampled_frames() {
        let b = SyntheticBackend::new(SyntheticSettings::default());
        let p = b.predict_from_truth("v", &truth(), Rate::integer(2).unwrap()).unwrap();
        // 2.4 s -> 4.8 -> 5; 3.25 s -> 6.5 -> 7 (half up)
        assert_eq!((p[0].start_frame, p[0].end_frame), (2, 5));
        assert_eq!((p[1].start_frame, p[1].end_frame), (7, 10));
        assert_eq!(p[1].text, "b\nc");
    }

    #[test]
    fn noise_is_bounded_and_seeded() {
        let settings = SyntheticSettings { noise: 2, seed: 11 };
        let b = SyntheticBackend::new(settings);
        let sr = Rate::integer(2).unwrap();
        let p = b.predict_from_truth("v", &truth(), sr).unwrap();
        assert_eq!(p, b.predict_from_truth("v", &truth(), sr).unwrap());
        assert!(p[0].start_frame.abs_diff(2) <= 2 && p[1].end_frame.abs_diff(10) <= 2);
        assert!(p.iter().all(|x| x.start_frame <= x.end_frame));
    }

    #[test]
    fn missing_inputs_mean_no_backend() {
        let video = VideoManifest {
            id: "v".into(),
            duration: 1.0,
            raw_fps: Rate::integer(30).unwrap(),
            ocr_path: "o".into(),
            predictions_path: None,
            truth_path: None,
        };
        let cfg = PipelineConfig::default();
        for backend in [&FileBackend as &dyn PredictionBackend, &SyntheticBackend::new(cfg.synthetic)] {
            assert!(matches!(
                backend.predict(&video, &[], &cfg),
                Err(PipelineError::MissingBackend(_))
            ));
        }
    }
}
