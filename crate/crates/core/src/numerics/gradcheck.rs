//! Central-difference gradient verification.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    /// Per parameter: `max|analytic − numeric| / max(‖analytic‖∞, ‖numeric‖∞)`.
    pub per_param: Vec<f64>,
    pub max_rel_err: f64,
    pub h: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Compares the analytic gradient returned by `f` against central
/// differences `(f(p+h) − f(p−h)) / 2h`, one coordinate at a time.
///
/// `f` maps parameter values to `(value, gradients)`; the gradients are
/// read once at `params`.
pub fn gradcheck<F>(mut f: F, params: &[Matrix], h: f64, tol: f64) -> Result<GradcheckReport>
where
    F: FnMut(&[Matrix]) -> Result<(f64, Vec<Matrix>)>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Config(format!(
            "finite-difference step {h} must be positive"
        )));
    }
    let (f0, analytic) = f(params)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!("objective value {f0}")));
    }
    if analytic.len() != params.len() {
        return Err(Error::Model(format!(
            "gradcheck: {} gradients for {} parameters",
            analytic.len(),
            params.len()
        )));
    }

    let mut work: Vec<Matrix> = params.to_vec();
    let mut per_param = Vec::with_capacity(params.len());
    for (p, grad) in analytic.iter().enumerate() {
        if grad.shape() != params[p].shape() {
            return Err(Error::shape("gradcheck", params[p].shape(), grad.shape()));
        }
        let mut numeric = Matrix::zeros(grad.rows(), grad.cols());
        for k in 0..grad.as_slice().len() {
            let orig = work[p].as_slice()[k];
            work[p].as_mut_slice()[k] = orig + h;
            let (fp, _) = f(&work)?;
            work[p].as_mut_slice()[k] = orig - h;
            let (fm, _) = f(&work)?;
            work[p].as_mut_slice()[k] = orig;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFinite(format!(
                    "objective near parameter {p}[{k}]"
                )));
            }
            numeric.as_mut_slice()[k] = (fp - fm) / (2.0 * h);
        }
        let denom = grad.max_abs().max(numeric.max_abs());
        let err = if denom == 0.0 {
            0.0
        } else {
            grad.max_abs_diff(&numeric) / denom
        };
        per_param.push(err);
    }
    let max_rel_err = per_param.iter().cloned().fold(0.0, f64::max);
    Ok(GradcheckReport {
        per_param,
        max_rel_err,
        h,
        tol,
        passed: max_rel_err <= tol,
    })
}
