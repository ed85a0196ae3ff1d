//! Spatiotemporal subtitle-salient adapter.
//!
//! Per frame, dense encoder features `H×W×C` are reduced to two token sets:
//!
//! * a `p×p` grid of spatially average-pooled tokens (global context);
//! * `K` tokens produced by learnable queries cross-attending to the frame
//!   and its temporal neighbours (subtitle evidence).
//!
//! Each set goes through its own affine projector into the language-model
//! width `D`, and the per-frame blocks are interleaved
//! `[v0, t0, v1, t1, ...]`. With the defaults `p = 4`, `K = 10` that is 26
//! tokens per frame.
//!
//! Attention is single-head scaled dot-product with learned `C×C`
//! query/key/value maps and no normalization layers. Everything is `f64`;
//! [`model::backward`] gives exact gradients of the sum-of-squares loss and
//! [`gradcheck`] compares them with central differences.

mod gradcheck;
mod model;
mod ops;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, ParamError, DEFAULT_FD_STEP, DEFAULT_GRAD_TOL};
pub use model::{backward, forward, forward_with_cache, sum_of_squares_loss, ForwardCache};
pub use ops::{
    attention_weights, cross_attention, interleave, interleave_with_slots, project, ssca_pool,
    tstq_window,
};
pub use params::{AttentionParams, ProjectorParams, QuerySet, S3Params};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum S3Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("gradient mismatch in {param}: relative error {rel_error:.3e}")]
    GradMismatch { param: String, rel_error: f64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("malformed parameter file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct S3Config {
    /// Side of the pooled grid; `p²` context tokens per frame.
    pub p: usize,
    /// Number of learnable queries.
    pub k: usize,
    /// Temporal radius of the attention context.
    pub window: usize,
    /// Encoder channel width.
    pub c: usize,
    /// Language-model embedding width.
    pub d: usize,
    /// Reserve one row per frame, ahead of its tokens, for a frame-index
    /// prefix supplied by the language model's own embedding table. The
    /// reserved rows are zero here.
    pub frame_index_slots: bool,
}

impl Default for S3Config {
    fn default() -> Self {
        Self {
            p: 4,
            k: 10,
            window: 1,
            c: 8,
            d: 8,
            frame_index_slots: false,
        }
    }
}

impl S3Config {
    pub fn validate(&self) -> Result<(), S3Error> {
        if self.p == 0 || self.k == 0 || self.c == 0 || self.d == 0 {
            return Err(S3Error::InvalidConfig(format!(
                "p, k, c and d must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.p * self.p + self.k + usize::from(self.frame_index_slots)
    }

    /// Rows of the adapter output for `frames` frames.
    pub fn output_rows(&self, frames: usize) -> usize {
        frames * self.tokens_per_frame()
    }
}

/// Dense features of one frame, shape `H×W×C`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeature {
    tensor: Tensor,
}

impl FrameFeature {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self, S3Error> {
        let tensor = Tensor::new(vec![height, width, channels], data)?;
        tensor.ensure_finite("frame features")?;
        Ok(Self { tensor })
    }

    pub fn from_tensor(tensor: Tensor) -> Result<Self, S3Error> {
        if tensor.shape().len() != 3 {
            return Err(S3Error::ShapeMismatch(format!(
                "frame features must be H×W×C, got {:?}",
                tensor.shape()
            )));
        }
        tensor.ensure_finite("frame features")?;
        Ok(Self { tensor })
    }

    pub fn height(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.tensor.shape()[2]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    /// The features as an `(H·W)×C` token matrix.
    pub fn tokens(&self) -> Tensor {
        self.tensor
            .clone()
            .reshape(vec![self.height() * self.width(), self.channels()])
            .expect("same element count")
    }
}

/// Seeded uniform values in `[-scale, scale]`.
pub fn seeded_uniform(len: usize, scale: f64, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-scale..=scale)).collect()
}

/// `n` random frames of shape `h×w×c` with values in `[-1, 1]`.
pub fn random_frames(n: usize, h: usize, w: usize, c: usize, seed: u64) -> Vec<FrameFeature> {
    (0..n)
        .map(|i| {
            let data = seeded_uniform(h * w * c, 1.0, seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            FrameFeature::new(h, w, c, data).expect("consistent shape")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_budget_is_26_per_frame() {
        let cfg = S3Config::default();
        assert_eq!(cfg.p * cfg.p, 16);
        assert_eq!(cfg.k, 10);
        assert_eq!(cfg.tokens_per_frame(), 26);
        let slots = S3Config {
            frame_index_slots: true,
            ..cfg
        };
        assert_eq!(slots.output_rows(3), 81);
    }

    #[test]
    fn frames_reject_non_finite() {
        assert!(FrameFeature::new(1, 1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(FrameFeature::new(1, 1, 2, vec![0.0]).is_err());
    }

    #[test]
    fn seeded_values_are_reproducible_and_bounded() {
        let a = seeded_uniform(100, 0.1, 7);
        assert_eq!(a, seeded_uniform(100, 0.1, 7));
        assert_ne!(a, seeded_uniform(100, 0.1, 8));
        assert!(a.iter().all(|v| v.abs() <= 0.1));
    }
}
