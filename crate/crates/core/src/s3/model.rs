//! Full adapter forward pass and its reverse-mode derivative.

use rayon::prelude::*;

use crate::s3::ops::{attend, project, ssca_pool, window_context, AttentionTrace};
use crate::s3::{interleave_with_slots, FrameFeature, S3Config, S3Error, S3Params, Tensor};

struct FrameCache {
    /// `p²×C` pooled tokens (input of the visual projector).
    pooled: Tensor,
    /// `K×C` query tokens (input of the textual projector).
    queried: Tensor,
    trace: AttentionTrace,
}

/// Values saved by [`forward_with_cache`] for [`backward`].
pub struct ForwardCache {
    cfg: S3Config,
    frames: Vec<FrameCache>,
}

fn check_inputs(params: &S3Params, frames: &[FrameFeature], cfg: &S3Config) -> Result<(), S3Error> {
    cfg.validate()?;
    params.validate()?;
    if frames.is_empty() {
        return Err(S3Error::ShapeMismatch("no frames".into()));
    }
    if params.queries.len() != cfg.k || params.attention.channels() != cfg.c || params.proj_v.bias.len() != cfg.d {
        return Err(S3Error::ShapeMismatch(format!(
            "parameters do not match config (k={}, c={}, d={})",
            cfg.k, cfg.c, cfg.d
        )));
    }
    let (h, w) = (frames[0].height(), frames[0].width());
    for (i, f) in frames.iter().enumerate() {
        if f.channels() != cfg.c || f.height() != h || f.width() != w {
            return Err(S3Error::ShapeMismatch(format!(
                "frame {i} is {}×{}×{}, expected {h}×{w}×{}",
                f.height(),
                f.width(),
                f.channels(),
                cfg.c
            )));
        }
    }
    Ok(())
}

pub(crate) fn forward_shifted(
    params: &S3Params,
    frames: &[FrameFeature],
    cfg: &S3Config,
    logit_shift: f64,
) -> Result<(Tensor, ForwardCache), S3Error> {
    check_inputs(params, frames, cfg)?;
    let per_frame: Vec<FrameCache> = (0..frames.len())
        .into_par_iter()
        .map(|i| {
            let pooled = ssca_pool(&frames[i], cfg.p)?.reshape(vec![cfg.p * cfg.p, cfg.c])?;
            let context = window_context(frames, i, cfg.window)?;
            let (queried, trace) = attend(&params.queries, &context, &params.attention, logit_shift)?;
            Ok(FrameCache { pooled, queried, trace })
        })
        .collect::<Result<_, S3Error>>()?;

    let blocks = per_frame
        .iter()
        .map(|f| Ok((project(&f.pooled, &params.proj_v)?, project(&f.queried, &params.proj_t)?)))
        .collect::<Result<Vec<_>, S3Error>>()?;
    let out = interleave_with_slots(&blocks, cfg.frame_index_slots)?;
    out.ensure_finite("adapter output")?;
    Ok((
        out,
        ForwardCache {
            cfg: *cfg,
            frames: per_frame,
        },
    ))
}

/// Adapter output, `N·(p² + K)` rows of width `D` (plus one reserved row per
/// frame when `frame_index_slots` is set).
pub fn forward(params: &S3Params, frames: &[FrameFeature], cfg: &S3Config) -> Result<Tensor, S3Error> {
    forward_shifted(params, frames, cfg, 0.0).map(|(out, _)| out)
}

pub fn forward_with_cache(
    params: &S3Params,
    frames: &[FrameFeature],
    cfg: &S3Config,
) -> Result<(Tensor, ForwardCache), S3Error> {
    forward_shifted(params, frames, cfg, 0.0)
}

/// Sum of squared output values.
pub fn sum_of_squares_loss(params: &S3Params, frames: &[FrameFeature], cfg: &S3Config) -> Result<f64, S3Error> {
    forward(params, frames, cfg).map(|o| o.sum_of_squares())
}

fn rows(t: &Tensor, start: usize, count: usize) -> Tensor {
    let (_, cols) = t.dims().expect("matrix");
    Tensor::new(vec![count, cols], t.data()[start * cols..(start + count) * cols].to_vec()).expect("in bounds")
}

fn accumulate_projector(grad_w: &mut Tensor, grad_b: &mut Tensor, input: &Tensor, d_out: &Tensor) -> Result<(), S3Error> {
    grad_w.add_assign(&input.t_matmul(d_out)?)?;
    let (n, _) = d_out.dims()?;
    for r in 0..n {
        for (g, d) in grad_b.data_mut().iter_mut().zip(d_out.row(r)) {
            *g += d;
        }
    }
    Ok(())
}

/// Gradients of `sum(d_out ⊙ output)` with respect to every parameter, i.e.
/// the vector-Jacobian product for upstream gradient `d_out`.
pub fn backward(params: &S3Params, cache: &ForwardCache, d_out: &Tensor) -> Result<S3Params, S3Error> {
    let cfg = &cache.cfg;
    let expected = [cfg.output_rows(cache.frames.len()), cfg.d];
    if d_out.shape() != expected {
        return Err(S3Error::ShapeMismatch(format!(
            "upstream gradient {:?}, expected {expected:?}",
            d_out.shape()
        )));
    }
    let mut grads = params.zeros_like();
    let scale = 1.0 / (cfg.c as f64).sqrt();
    let (pp, k) = (cfg.p * cfg.p, cfg.k);
    let slot = usize::from(cfg.frame_index_slots);

    for (i, f) in cache.frames.iter().enumerate() {
        let base = i * cfg.tokens_per_frame() + slot;
        let d_vis = rows(d_out, base, pp);
        let d_txt = rows(d_out, base + pp, k);

        accumulate_projector(&mut grads.proj_v.weight, &mut grads.proj_v.bias, &f.pooled, &d_vis)?;
        accumulate_projector(&mut grads.proj_t.weight, &mut grads.proj_t.bias, &f.queried, &d_txt)?;

        // through the textual projector into the attention output
        let d_att = d_txt.matmul_t(&params.proj_t.weight)?;
        let t = &f.trace;

        // out = A·V
        let d_v = t.weights.t_matmul(&d_att)?;
        let d_a = d_att.matmul_t(&t.v_proj)?;

        // row-wise softmax
        let mut d_logits = d_a;
        for r in 0..k {
            let a = t.weights.row(r);
            let row = d_logits.row_mut(r);
            let dot: f64 = row.iter().zip(a).map(|(g, w)| g * w).sum();
            for (g, w) in row.iter_mut().zip(a) {
                *g = w * (*g - dot);
            }
        }
        let d_logits = d_logits.scale(scale);

        // logits = Qp·Kpᵀ
        let d_qp = d_logits.matmul(&t.k_proj)?;
        let d_kp = d_logits.t_matmul(&t.q_proj)?;

        grads.queries.0.add_assign(&d_qp.matmul_t(&params.attention.w_q)?)?;
        grads.attention.w_q.add_assign(&params.queries.0.t_matmul(&d_qp)?)?;
        grads.attention.w_k.add_assign(&t.context.t_matmul(&d_kp)?)?;
        grads.attention.w_v.add_assign(&t.context.t_matmul(&d_v)?)?;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::s3::random_frames;

    fn small() -> S3Config {
        S3Config {
            p: 2,
            k: 2,
            window: 1,
            c: 4,
            d: 3,
            frame_index_slots: false,
        }
    }

    #[test]
    fn output_rows_follow_budget() {
        let cfg = small();
        let params = S3Params::init(&cfg, 1).unwrap();
        for n in [1, 2, 5] {
            let frames = random_frames(n, 4, 4, cfg.c, 9);
            assert_eq!(forward(&params, &frames, &cfg).unwrap().shape(), &[n * 6, 3]);
        }
    }

    #[test]
    fn mismatched_frames_are_rejected() {
        let cfg = small();
        let params = S3Params::init(&cfg, 1).unwrap();
        let mut frames = random_frames(2, 4, 4, cfg.c, 1);
        frames.extend(random_frames(1, 2, 2, cfg.c, 2));
        assert!(forward(&params, &frames, &cfg).is_err());
        assert!(forward(&params, &[], &cfg).is_err());
        assert!(forward(&params, &random_frames(1, 4, 4, 5, 1), &cfg).is_err());
        // indivisible grid
        assert!(forward(&params, &random_frames(1, 3, 4, cfg.c, 1), &cfg).is_err());
    }

    #[test]
    fn slots_are_zero_rows() {
        let cfg = S3Config {
            frame_index_slots: true,
            ..small()
        };
        let params = S3Params::init(&cfg, 1).unwrap();
        let out = forward(&params, &random_frames(2, 4, 4, cfg.c, 3), &cfg).unwrap();
        assert_eq!(out.shape(), &[14, 3]);
        assert_eq!(out.row(0), &[0.0; 3]);
        assert_eq!(out.row(7), &[0.0; 3]);
    }

    #[test]
    fn backward_with_slots_matches_without() {
        let base = small();
        let slotted = S3Config {
            frame_index_slots: true,
            ..base
        };
        let params = S3Params::init(&base, 4).unwrap();
        let frames = random_frames(3, 4, 4, base.c, 4);
        let (o1, c1) = forward_with_cache(&params, &frames, &base).unwrap();
        let (o2, c2) = forward_with_cache(&params, &frames, &slotted).unwrap();
        let g1 = backward(&params, &c1, &o1.scale(2.0)).unwrap();
        let g2 = backward(&params, &c2, &o2.scale(2.0)).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn logit_shift_leaves_output_unchanged() {
        let cfg = small();
        let params = S3Params::init(&cfg, 2).unwrap();
        let frames = random_frames(3, 4, 4, cfg.c, 5);
        let (base, _) = forward_shifted(&params, &frames, &cfg, 0.0).unwrap();
        let (shifted, _) = forward_shifted(&params, &frames, &cfg, 7.25).unwrap();
        for (a, b) in base.data().iter().zip(shifted.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn logit_shift_has_zero_directional_derivative() {
        let cfg = small();
        let params = S3Params::init(&cfg, 6).unwrap();
        let frames = random_frames(3, 4, 4, cfg.c, 6);
        let loss = |s: f64| forward_shifted(&params, &frames, &cfg, s).unwrap().0.sum_of_squares();
        let h = 1e-5;
        let derivative = (loss(h) - loss(-h)) / (2.0 * h);
        assert!(derivative.abs() < 1e-9, "{derivative}");
    }
}
