use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subext::pipeline::synthetic::{generate, write_synthetic_set, SyntheticOptions};
use subext::pipeline::{
    load_manifest, run_corpus_prep, run_eval, run_extract_all, run_refine, write_atomic, PipelineConfig, PipelineError,
};
use subext::s3::{grad_check, random_frames, S3Config, S3Params, DEFAULT_FD_STEP, DEFAULT_GRAD_TOL};
use subext::Rate;

/// Timed subtitle extraction: refine, evaluate, prepare corpora.
#[derive(Parser)]
#[command(name = "subext", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict, refine and write one SRT per video in a manifest.
    Extract(ExtractArgs),
    /// Refine a prediction file against an OCR manifest.
    Refine(RefineArgs),
    /// Score hypothesis subtitles against references (files or directories).
    Eval(EvalArgs),
    /// Filter short videos, clip movies and report corpus statistics.
    CorpusPrep(CorpusArgs),
    /// Write synthetic videos (OCR, truth, predictions) and a manifest.
    Synth(SynthArgs),
    /// Check adapter gradients against finite differences.
    S3Check(S3CheckArgs),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Sort cues by start time before numbering.
    #[arg(long)]
    sort: bool,
    /// `file` or `synthetic`.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    sampling_rate: Option<String>,
    #[arg(long)]
    sim: Option<String>,
    #[arg(long)]
    range: Option<String>,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    ocr: PathBuf,
    /// Full frame rate, e.g. `30` or `30000/1001`.
    #[arg(long)]
    fps: Rate,
    #[arg(long)]
    sim: Option<f64>,
    /// Search radius in frames; defaults to one second.
    #[arg(long)]
    range: Option<u64>,
    #[arg(long)]
    sampling_rate: Option<Rate>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sort: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Report file (key=value lines).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lowercase and strip punctuation before SubER tokenization.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    tolerance_ms: Option<u64>,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    meta: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    videos: usize,
    #[arg(long, default_value = "30")]
    fps: Rate,
    /// Seconds per video.
    #[arg(long, default_value_t = 30.0)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability of an OCR character error.
    #[arg(long, default_value_t = 0.0)]
    char_noise: f64,
    /// Largest prediction offset in sampled frames.
    #[arg(long, default_value_t = 1)]
    noise: u64,
    #[arg(long, default_value = "2")]
    sampling_rate: Rate,
}

#[derive(Args)]
struct S3CheckArgs {
    /// Adapter sizes from the `s3.*` keys; without it a small instance
    /// (p=2, K=2, C=4, D=3) is checked.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Finite-difference step.
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = DEFAULT_GRAD_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    frames: usize,
    /// Frame height and width.
    #[arg(long, default_value_t = 4)]
    size: usize,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    path.map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
}

fn override_with(cfg: &mut PipelineConfig, key: &str, value: Option<String>) -> Result<(), PipelineError> {
    match value {
        Some(v) => cfg
            .set(key, &v)
            .map_err(|m| PipelineError::Usage(format!("--{}: {m}", key.rsplit('.').next().unwrap_or(key)))),
        None => Ok(()),
    }
}

fn extract(a: ExtractArgs) -> Result<(), PipelineError> {
    let mut cfg = load_config(a.config.as_deref())?;
    override_with(&mut cfg, "workers", a.workers.map(|w| w.to_string()))?;
    override_with(&mut cfg, "backend", a.backend)?;
    override_with(&mut cfg, "sampling_rate", a.sampling_rate)?;
    override_with(&mut cfg, "refine.sim", a.sim)?;
    override_with(&mut cfg, "refine.range", a.range)?;
    if a.sort {
        cfg.sort_output = true;
    }
    let videos = load_manifest(&a.manifest)?;
    std::fs::create_dir_all(&a.out).map_err(|e| PipelineError::Usage(format!("{}: {e}", a.out.display())))?;

    let mut worst: Option<PipelineError> = None;
    for outcome in run_extract_all(&videos, &cfg)? {
        match outcome.result {
            Ok(x) => {
                for d in &x.diagnostics {
                    eprintln!("{}: {d}", x.id);
                }
                write_atomic(&a.out.join(format!("{}.srt", x.id)), x.srt.as_bytes())?;
                println!("{}: {} cues", x.id, x.document.len());
            }
            Err(e) => {
                eprintln!("{}: {e}", outcome.id);
                if worst.as_ref().map_or(true, |w| e.exit_code() > w.exit_code()) {
                    worst = Some(e);
                }
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

fn refine(a: RefineArgs) -> Result<(), PipelineError> {
    let mut cfg = subext::align::RefineConfig::new(a.fps);
    if let Some(sim) = a.sim {
        cfg.sim = sim;
    }
    if let Some(r) = a.range {
        cfg.range = r;
    }
    if let Some(sr) = a.sampling_rate {
        cfg.sampling_rate = sr;
    }
    let x = run_refine(&a.pred, &a.ocr, &cfg, a.sort)?;
    for d in &x.diagnostics {
        eprintln!("{d}");
    }
    write_atomic(&a.out, x.srt.as_bytes())
}

fn eval(a: EvalArgs) -> Result<(), PipelineError> {
    let mut cfg = load_config(a.config.as_deref())?;
    override_with(&mut cfg, "suber.tolerance_ms", a.tolerance_ms.map(|t| t.to_string()))?;
    if a.normalize {
        cfg.suber.tokenize.normalize = true;
    }
    let report = run_eval(&a.hyp, &a.reference, &cfg.suber)?;
    write_atomic(&a.out, report.to_key_values().as_bytes())?;
    print!("{}", report.to_table());
    Ok(())
}

fn corpus_prep(a: CorpusArgs) -> Result<(), PipelineError> {
    let prep = run_corpus_prep(&a.meta, &a.out, a.seed)?;
    println!("accepted={} rejected={}", prep.accepted.len(), prep.rejected.len());
    print!("{}", prep.stats.to_table());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), PipelineError> {
    let videos: Vec<_> = (0..a.videos)
        .map(|i| {
            let mut opts = SyntheticOptions::new(a.fps, a.duration, a.seed.wrapping_add(i as u64));
            opts.char_noise = a.char_noise;
            generate(&format!("video{i:03}"), &opts)
        })
        .collect();
    let settings = subext::pipeline::SyntheticSettings {
        noise: a.noise,
        seed: a.seed,
    };
    let manifest = write_synthetic_set(&a.out, &videos, a.sampling_rate, Some(settings))?;
    println!("{}", manifest.display());
    Ok(())
}

fn s3_check(a: S3CheckArgs) -> Result<(), PipelineError> {
    let cfg = match a.config.as_deref() {
        Some(path) => PipelineConfig::load(path)?.s3,
        None => S3Config {
            p: 2,
            k: 2,
            window: 1,
            c: 4,
            d: 3,
            frame_index_slots: false,
        },
    };
    let params = S3Params::init(&cfg, a.seed)?;
    let frames = random_frames(a.frames, a.size, a.size, cfg.c, a.seed);
    let report = grad_check(&params, &frames, &cfg, a.step, a.tol)?;
    for p in &report.params {
        println!("{:<14} rel={:.3e} abs={:.3e}", p.name, p.max_rel_error, p.max_abs_error);
    }
    println!("max_rel_error={:.3e}", report.max_rel_error);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // bad arguments are input errors; help and version are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Refine(a) => refine(a),
        Command::Eval(a) => eval(a),
        Command::CorpusPrep(a) => corpus_prep(a),
        Command::Synth(a) => synth(a),
        Command::S3Check(a) => s3_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
