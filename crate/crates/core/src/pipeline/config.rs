use std::fmt::Write;
use std::path::Path;

use crate::align::{RefineConfig, DEFAULT_SIM};
use crate::metrics::SuberConfig;
use crate::pipeline::{BackendKind, PipelineError};
use crate::rate::Rate;
use crate::s3::S3Config;

/// Refinement settings that do not depend on the video.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineSettings {
    pub sim: f64,
    /// Search radius in full-rate frames; `None` means one second of frames.
    pub range: Option<u64>,
}

impl Default for RefineSettings {
    fn default() -> Self {
        Self {
            sim: DEFAULT_SIM,
            range: None,
        }
    }
}

/// Knobs of the scripted backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SyntheticSettings {
    /// Largest offset, in sampled frames, added to each predicted boundary.
    pub noise: u64,
    pub seed: u64,
}

/// Everything read from a config file. Keys are flat with section prefixes:
///
/// ```text
/// sampling_rate = 2
/// sort_output = false
/// workers = 4
/// backend = file
/// refine.sim = 0.8
/// refine.range = 30
/// s3.p = 4
/// suber.tolerance_ms = 1000
/// synthetic.noise = 1
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub sampling_rate: Rate,
    pub refine: RefineSettings,
    pub s3: S3Config,
    pub sort_output: bool,
    pub workers: Option<usize>,
    pub backend: BackendKind,
    pub synthetic: SyntheticSettings,
    pub suber: SuberConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sampling_rate: Rate::integer(2).expect("nonzero"),
            refine: RefineSettings::default(),
            s3: S3Config::default(),
            sort_output: false,
            workers: None,
            backend: BackendKind::File,
            synthetic: SyntheticSettings::default(),
            suber: SuberConfig::default(),
        }
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| format!("{v:?}: {e}"))
}

impl PipelineConfig {
    /// Refinement config for a video at `raw_fps`.
    pub fn refine_config(&self, raw_fps: Rate) -> RefineConfig {
        let mut cfg = RefineConfig::new(raw_fps);
        cfg.sim = self.refine.sim;
        cfg.sampling_rate = self.sampling_rate;
        if let Some(r) = self.refine.range {
            cfg.range = r;
        }
        cfg
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "sampling_rate" => self.sampling_rate = parse_num(v)?,
            "sort_output" => self.sort_output = parse_bool(v)?,
            "workers" => {
                let n: usize = parse_num(v)?;
                self.workers = (n > 0).then_some(n);
            }
            "backend" => self.backend = parse_num(v)?,
            "refine.sim" => {
                let sim: f64 = parse_num(v)?;
                if !(sim > 0.0 && sim <= 1.0) {
                    return Err(format!("refine.sim {sim} outside (0, 1]"));
                }
                self.refine.sim = sim;
            }
            "refine.range" => {
                let r: u64 = parse_num(v)?;
                if r == 0 {
                    return Err("refine.range must be at least 1".into());
                }
                self.refine.range = Some(r);
            }
            "s3.p" => self.s3.p = parse_num(v)?,
            "s3.k" => self.s3.k = parse_num(v)?,
            "s3.window" => self.s3.window = parse_num(v)?,
            "s3.c" => self.s3.c = parse_num(v)?,
            "s3.d" => self.s3.d = parse_num(v)?,
            "s3.frame_index_slots" => self.s3.frame_index_slots = parse_bool(v)?,
            "suber.tolerance_ms" => self.suber.tolerance_ms = parse_num(v)?,
            "suber.max_block" => self.suber.max_block = parse_num(v)?,
            "suber.normalize" => self.suber.tokenize.normalize = parse_bool(v)?,
            "synthetic.noise" => self.synthetic.noise = parse_num(v)?,
            "synthetic.seed" => self.synthetic.seed = parse_num(v)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Parses config text. `#` starts a comment; unknown or repeated keys are
    /// errors. `path` only labels error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self, PipelineError> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::syntax(path, i + 1, "expected key = value"))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(PipelineError::syntax(path, i + 1, format!("{key} set twice")));
            }
            seen.push(key);
            cfg.set(key, value).map_err(|m| PipelineError::syntax(path, i + 1, m))?;
        }
        cfg.s3.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Canonical text form; `parse(to_text())` gives back the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sampling_rate = {}", self.sampling_rate);
        let _ = writeln!(out, "sort_output = {}", self.sort_output);
        let _ = writeln!(out, "workers = {}", self.workers.unwrap_or(0));
        let _ = writeln!(out, "backend = {}", self.backend);
        let _ = writeln!(out, "refine.sim = {}", self.refine.sim);
        if let Some(r) = self.refine.range {
            let _ = writeln!(out, "refine.range = {r}");
        }
        let s3 = &self.s3;
        let _ = writeln!(out, "s3.p = {}", s3.p);
        let _ = writeln!(out, "s3.k = {}", s3.k);
        let _ = writeln!(out, "s3.window = {}", s3.window);
        let _ = writeln!(out, "s3.c = {}", s3.c);
        let _ = writeln!(out, "s3.d = {}", s3.d);
        let _ = writeln!(out, "s3.frame_index_slots = {}", s3.frame_index_slots);
        let _ = writeln!(out, "suber.tolerance_ms = {}", self.suber.tolerance_ms);
        let _ = writeln!(out, "suber.max_block = {}", self.suber.max_block);
        let _ = writeln!(out, "suber.normalize = {}", self.suber.tokenize.normalize);
        let _ = writeln!(out, "synthetic.noise = {}", self.synthetic.noise);
        let _ = writeln!(out, "synthetic.seed = {}", self.synthetic.seed);
        out
    }
}
