use crate::s3::{AttentionParams, FrameFeature, ProjectorParams, QuerySet, S3Error, Tensor};

/// Average-pools an `H×W×C` frame to `p×p×C`; each output cell is the mean
/// of an `(H/p)×(W/p)` block.
pub fn ssca_pool(frame: &FrameFeature, p: usize) -> Result<Tensor, S3Error> {
    let (h, w, c) = (frame.height(), frame.width(), frame.channels());
    if p == 0 || h % p != 0 || w % p != 0 {
        return Err(S3Error::ShapeMismatch(format!(
            "{h}×{w} frame is not divisible into a {p}×{p} grid"
        )));
    }
    let (bh, bw) = (h / p, w / p);
    let src = frame.tensor().data();
    let mut out = vec![0.0; p * p * c];
    for y in 0..h {
        for x in 0..w {
            let cell = ((y / bh) * p + x / bw) * c;
            let at = (y * w + x) * c;
            for ch in 0..c {
                out[cell + ch] += src[at + ch];
            }
        }
    }
    let inv = 1.0 / (bh * bw) as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Tensor::new(vec![p, p, c], out)
}

/// Intermediate values of one attention evaluation, kept for the backward
/// pass.
#[derive(Debug, Clone)]
pub(crate) struct AttentionTrace {
    pub context: Tensor,
    pub q_proj: Tensor,
    pub k_proj: Tensor,
    pub v_proj: Tensor,
    /// Row-stochastic `K×M`.
    pub weights: Tensor,
}

fn check_widths(queries: &QuerySet, context: &Tensor, params: &AttentionParams) -> Result<usize, S3Error> {
    params.validate()?;
    let c = params.channels();
    let (_, qc) = queries.0.dims()?;
    let (m, cc) = context.dims()?;
    if qc != c || cc != c || m == 0 {
        return Err(S3Error::ShapeMismatch(format!(
            "queries {:?}, context {:?}, attention width {c}",
            queries.0.shape(),
            context.shape()
        )));
    }
    Ok(c)
}

fn softmax_rows(t: &mut Tensor) {
    let (rows, _) = t.dims().expect("matrix");
    for i in 0..rows {
        let row = t.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

/// `logit_shift` is added to every logit; the output must not depend on it.
pub(crate) fn attend(
    queries: &QuerySet,
    context: &Tensor,
    params: &AttentionParams,
    logit_shift: f64,
) -> Result<(Tensor, AttentionTrace), S3Error> {
    let c = check_widths(queries, context, params)?;
    let q_proj = queries.0.matmul(&params.w_q)?;
    let k_proj = context.matmul(&params.w_k)?;
    let v_proj = context.matmul(&params.w_v)?;
    let mut weights = q_proj.matmul_t(&k_proj)?.scale(1.0 / (c as f64).sqrt());
    if logit_shift != 0.0 {
        weights.data_mut().iter_mut().for_each(|v| *v += logit_shift);
    }
    softmax_rows(&mut weights);
    let out = weights.matmul(&v_proj)?;
    out.ensure_finite("attention output")?;
    Ok((
        out,
        AttentionTrace {
            context: context.clone(),
            q_proj,
            k_proj,
            v_proj,
            weights,
        },
    ))
}

/// Attention matrix `softmax((Q·w_q)(X·w_k)ᵀ / √C)`, shape `K×M`.
pub fn attention_weights(queries: &QuerySet, context: &Tensor, params: &AttentionParams) -> Result<Tensor, S3Error> {
    attend(queries, context, params, 0.0).map(|(_, t)| t.weights)
}

/// Single-head scaled dot-product attention of the queries over `context`
/// (`M×C`), returning `K×C`.
pub fn cross_attention(queries: &QuerySet, context: &Tensor, params: &AttentionParams) -> Result<Tensor, S3Error> {
    attend(queries, context, params, 0.0).map(|(out, _)| out)
}

/// Token rows of frames `i - window ..= i + window`, truncated at the ends of
/// the sequence.
pub(crate) fn window_context(frames: &[FrameFeature], i: usize, window: usize) -> Result<Tensor, S3Error> {
    if i >= frames.len() {
        return Err(S3Error::ShapeMismatch(format!(
            "frame {i} out of range for {} frames",
            frames.len()
        )));
    }
    let lo = i.saturating_sub(window);
    let hi = (i + window).min(frames.len() - 1);
    let tokens: Vec<Tensor> = frames[lo..=hi].iter().map(FrameFeature::tokens).collect();
    Tensor::concat_rows(&tokens.iter().collect::<Vec<_>>())
}

/// Query attention over frame `i` and its temporal neighbours.
pub fn tstq_window(
    queries: &QuerySet,
    frames: &[FrameFeature],
    i: usize,
    window: usize,
    params: &AttentionParams,
) -> Result<Tensor, S3Error> {
    cross_attention(queries, &window_context(frames, i, window)?, params)
}

/// `x·weight + bias` for every row of `x`.
pub fn project(x: &Tensor, proj: &ProjectorParams) -> Result<Tensor, S3Error> {
    proj.validate()?;
    let mut out = x.matmul(&proj.weight)?;
    let (rows, _) = out.dims()?;
    for r in 0..rows {
        for (o, b) in out.row_mut(r).iter_mut().zip(proj.bias.data()) {
            *o += b;
        }
    }
    Ok(out)
}

/// `[v0, t0, v1, t1, ...]` from per-frame `(visual, textual)` blocks.
pub fn interleave(per_frame: &[(Tensor, Tensor)]) -> Result<Tensor, S3Error> {
    interleave_with_slots(per_frame, false)
}

/// As [`interleave`], optionally reserving one zero row ahead of each
/// frame's block.
pub fn interleave_with_slots(per_frame: &[(Tensor, Tensor)], slots: bool) -> Result<Tensor, S3Error> {
    let (first, _) = per_frame
        .first()
        .ok_or_else(|| S3Error::ShapeMismatch("no frames to interleave".into()))?;
    let (_, d) = first.dims()?;
    let slot = Tensor::zeros(&[1, d]);
    let mut parts = Vec::with_capacity(per_frame.len() * 3);
    for (v, t) in per_frame {
        if slots {
            parts.push(&slot);
        }
        parts.push(v);
        parts.push(t);
    }
    Tensor::concat_rows(&parts)
}
