//! Finite-difference verification of [`backward`](crate::s3::backward).

use crate::s3::model::{backward, forward_with_cache};
use crate::s3::{FrameFeature, S3Config, S3Error, S3Params};

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_GRAD_TOL: f64 = 1e-5;

/// Gradient magnitudes below this are compared absolutely; relative error
/// is meaningless for entries that are zero up to rounding.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub params: Vec<ParamError>,
    pub loss: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients of `sum(output²)` with central differences
/// for every parameter entry. Fails with [`S3Error::GradMismatch`] naming the
/// worst parameter when its relative error reaches `tol`.
pub fn grad_check(
    params: &S3Params,
    frames: &[FrameFeature],
    cfg: &S3Config,
    step: f64,
    tol: f64,
) -> Result<GradCheckReport, S3Error> {
    let (out, cache) = forward_with_cache(params, frames, cfg)?;
    let analytic = backward(params, &cache, &out.scale(2.0))?;
    let loss_at = |p: &S3Params| forward_with_cache(p, frames, cfg).map(|(o, _)| o.sum_of_squares());

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        params: Vec::new(),
        loss: out.sum_of_squares(),
    };
    for (slot, (name, grad)) in analytic.named().into_iter().enumerate() {
        let mut entry = ParamError {
            name,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_index: 0,
        };
        for j in 0..grad.len() {
            let original = probe.named()[slot].1.data()[j];
            probe.named_mut()[slot].1.data_mut()[j] = original + step;
            let plus = loss_at(&probe)?;
            probe.named_mut()[slot].1.data_mut()[j] = original - step;
            let minus = loss_at(&probe)?;
            probe.named_mut()[slot].1.data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let a = grad.data()[j];
            let rel = relative_error(a, numeric);
            entry.max_abs_error = entry.max_abs_error.max((a - numeric).abs());
            if rel > entry.max_rel_error {
                entry.max_rel_error = rel;
                entry.worst_index = j;
            }
        }
        report.max_rel_error = report.max_rel_error.max(entry.max_rel_error);
        report.params.push(entry);
    }

    if let Some(worst) = report
        .params
        .iter()
        .filter(|p| p.max_rel_error >= tol)
        .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    {
        return Err(S3Error::GradMismatch {
            param: worst.name.to_string(),
            rel_error: worst.max_rel_error,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::s3::{random_frames, Tensor};

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
    fn seed_zero_passes() {
        let cfg = small();
        let params = S3Params::init(&cfg, 0).unwrap();
        let frames = random_frames(3, 4, 4, cfg.c, 0);
        let report = grad_check(&params, &frames, &cfg, DEFAULT_FD_STEP, DEFAULT_GRAD_TOL).unwrap();
        assert!(report.max_rel_error < DEFAULT_GRAD_TOL, "{report:?}");
        assert_eq!(report.params.len(), 8);
    }

    #[test]
    fn uniform_attention_passes() {
        let cfg = small();
        let mut params = S3Params::init(&cfg, 1).unwrap();
        params.attention.w_q = Tensor::zeros(&[4, 4]);
        params.attention.w_k = Tensor::zeros(&[4, 4]);
        let frames = random_frames(3, 4, 4, cfg.c, 1);
        grad_check(&params, &frames, &cfg, DEFAULT_FD_STEP, DEFAULT_GRAD_TOL).unwrap();
    }

    #[test]
    fn detects_a_broken_gradient() {
        // a wrong step size for the difference quotient skews every entry
        let cfg = small();
        let params = S3Params::init(&cfg, 2).unwrap();
        let frames = random_frames(2, 4, 4, cfg.c, 2);
        let err = grad_check(&params, &frames, &cfg, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, S3Error::GradMismatch { .. }));
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.0 + 1e-9) - 1e-9).abs() < 1e-15);
        assert!((relative_error(1e-12, 0.0) - 1e-6).abs() < 1e-18);
    }
}
