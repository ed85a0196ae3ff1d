//! Toolkit for extracting timed subtitles from video.
//!
//! * [`srt`]: SubRip parsing and emission, frame/time conversion.
//! * [`metrics`]: normalized edit distance and subtitle edit rate (SubER).
//! * [`align`]: refines coarse model predictions to exact frames using
//!   full-frame-rate OCR.
//! * [`s3`]: the spatiotemporal token-compression adapter (pooling, query
//!   cross-attention, projectors) with analytic gradients.
//! * [`pipeline`]: frame sampling, file formats, prediction backends and the
//!   end-to-end extract/evaluate flows behind the `subext` CLI.
//! * [`corpus`]: dataset filtering rules, movie clipping and statistics.

pub mod align;
pub mod corpus;
pub mod metrics;
pub mod pipeline;
pub mod rate;
pub mod s3;
pub mod srt;

pub use rate::Rate;
