//! Comparison estimators.

use crate::error::{check_range, Error, Result};
use crate::estimator::{sum_outer, CovEstimate, Method};
use crate::linalg::{orthonormalize, Basis, DataMatrix, SymMatrix};
use crate::sampling::RngStream;

/// `(1/n) Σ_t x_t x_t^T`.
pub fn sample_covariance(x: &DataMatrix) -> SymMatrix {
    let (d, n) = (x.dim(), x.count());
    let sum = sum_outer(d, n, |t| Ok(x.column(t).to_vec())).expect("infallible accumulation");
    let c = 1.0 / n as f64;
    SymMatrix::from_symmetric_unchecked(d, sum.into_iter().map(|v| c * v).collect())
}

/// Shared-sketch matrix approximation: `Y = XR` with Gaussian `R` (`n x m`),
/// `Q = orth(Y)`, `X̂ = QQ^T X`, estimate `(1/n) X̂ X̂^T`.
pub fn hmt_estimate(x: &DataMatrix, m: usize, rng: &mut RngStream) -> Result<CovEstimate> {
    hmt_estimate_with(x, m, 0, rng)
}

/// [`hmt_estimate`] with `oversampling` extra sketch columns.
pub fn hmt_estimate_with(
    x: &DataMatrix,
    m: usize,
    oversampling: usize,
    rng: &mut RngStream,
) -> Result<CovEstimate> {
    let (d, n) = (x.dim(), x.count());
    let width = m + oversampling;
    check_range("m", m, 1, d.min(n))?;
    check_range("sketch width", width, 1, d.min(n))?;

    let q = match orthonormalize(d, width, &sketch(x, width, rng)) {
        Err(Error::DegenerateInput(_)) => orthonormalize(d, width, &sketch(x, width, rng))?,
        other => other?,
    };
    // (1/n) QQ^T X X^T QQ^T
    let matrix = q.projector().sandwich(&sample_covariance(x));
    Ok(CovEstimate {
        matrix,
        d,
        m,
        n,
        method: Method::Hmt,
    })
}

/// `X R`, column-major `d x width`.
fn sketch(x: &DataMatrix, width: usize, rng: &mut RngStream) -> Vec<f64> {
    let d = x.dim();
    let mut y = vec![0.0; d * width];
    for col in x.columns() {
        for j in 0..width {
            let r = rng.standard_normal();
            for (yi, xi) in y[j * d..(j + 1) * d].iter_mut().zip(col) {
                *yi += r * xi;
            }
        }
    }
    y
}

/// `Π Σ̂ Π` with `Π = A A^T`: keep what the shared projection observes.
pub fn shared_projection_estimate(sigma_hat: &SymMatrix, a: &Basis) -> Result<SymMatrix> {
    if a.dim() != sigma_hat.dim() {
        return Err(Error::InvalidInput(format!(
            "basis dimension {} does not match matrix dimension {}",
            a.dim(),
            sigma_hat.dim()
        )));
    }
    Ok(a.projector().sandwich(sigma_hat))
}

/// Lower bound `η/√2 · (1 − m/d)^{1/4}` on the error of any estimator that
/// sees every sample through one shared rank-`m` projection.
pub fn fixed_projection_floor(eta: f64, m: usize, d: usize) -> Result<f64> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidInput(format!("eta must be finite and >= 0, got {eta}")));
    }
    check_range("m", m, 1, d)?;
    Ok(eta / 2f64.sqrt() * (1.0 - m as f64 / d as f64).powf(0.25))
}
