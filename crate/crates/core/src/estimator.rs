//! The de-biased covariance estimator and its derived quantities.
//!
//! Each sample is observed only as `z_t = A_t^T x_t`. The back-projections
//! `Φ_t x_t = A_t z_t` give the rescaled observed covariance
//! `Σ̂₁ = d²/(n m²) Σ_t (Φ_t x_t)(Φ_t x_t)^T`, which is biased towards the
//! identity. [`debias`] applies the closed-form linear correction that makes
//! the result exactly unbiased for the sample covariance.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::linalg::{self, sym_eig, top_k_projector, DataMatrix, SymMatrix};
use crate::sampling::{sample_basis_for, Observation};

/// Samples per reduction block. Partial sums are combined in block order, so
/// results do not depend on the thread count.
const BLOCK: usize = 256;

/// Which estimator produced a [`CovEstimate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Debiased,
    Observed,
    Truncated(usize),
    SampleCovariance,
    Hmt,
    SharedProjection,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Debiased => f.write_str("debiased"),
            Method::Observed => f.write_str("observed"),
            Method::Truncated(k) => write!(f, "truncated({k})"),
            Method::SampleCovariance => f.write_str("sample"),
            Method::Hmt => f.write_str("hmt"),
            Method::SharedProjection => f.write_str("shared_projection"),
        }
    }
}

/// A covariance estimate together with the problem shape it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct CovEstimate {
    pub matrix: SymMatrix,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub method: Method,
}

/// Ordering used by [`rank_truncate_with`] to pick the retained eigenvalues.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationOrder {
    /// Algebraically largest (the natural choice for PSD targets).
    #[default]
    Signed,
    /// Largest in absolute value.
    Magnitude,
}

/// `Σ_t y_t y_t^T` over `t in 0..n`, with `y_t = vector(t)`.
pub(crate) fn sum_outer<F>(d: usize, n: usize, vector: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let partials: Vec<Vec<f64>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; d * d];
            for t in b * BLOCK..n.min((b + 1) * BLOCK) {
                let y = vector(t)?;
                for i in 0..d {
                    let yi = y[i];
                    let row = &mut acc[i * d + i..(i + 1) * d];
                    for (a, yj) in row.iter_mut().zip(&y[i..]) {
                        *a += yi * yj;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![0.0; d * d];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    for i in 0..d {
        for j in 0..i {
            total[i * d + j] = total[j * d + i];
        }
    }
    Ok(total)
}

fn observed_scale(d: usize, m: usize, n: usize) -> f64 {
    (d * d) as f64 / (n as f64 * (m * m) as f64)
}

/// `Σ̂₁ = d²/(n m²) Σ_t (A_t z_t)(A_t z_t)^T`.
pub fn observed_covariance(obs: &[Observation]) -> Result<SymMatrix> {
    let first = obs
        .first()
        .ok_or_else(|| Error::InvalidInput("no observations".into()))?;
    let (d, m) = (first.dim(), first.rank());
    if let Some(bad) = obs.iter().position(|o| o.dim() != d || o.rank() != m) {
        return Err(Error::InvalidInput(format!(
            "observation {bad} has shape {}x{}, expected {d}x{m}",
            obs[bad].dim(),
            obs[bad].rank()
        )));
    }
    let sum = sum_outer(d, obs.len(), |t| Ok(obs[t].backproject()))?;
    finish_observed(sum, d, m, obs.len())
}

/// [`observed_covariance`] of `compress(x, m, seed)` without materialising
/// the observations. Bitwise identical to the two-step route.
pub fn observed_covariance_streaming(x: &DataMatrix, m: usize, seed: u64) -> Result<SymMatrix> {
    let (d, n) = (x.dim(), x.count());
    check_range("m", m, 1, d)?;
    let sum = sum_outer(d, n, |t| {
        let obs = Observation::measure(sample_basis_for(seed, t, d, m)?, x.column(t))?;
        Ok(obs.backproject())
    })?;
    finish_observed(sum, d, m, n)
}

/// Fusion-centre entry point: back-projected vectors already in hand.
pub fn observed_covariance_from_backprojections(
    vectors: &[Vec<f64>],
    d: usize,
    m: usize,
) -> Result<SymMatrix> {
    if vectors.is_empty() {
        return Err(Error::InvalidInput("no observations".into()));
    }
    check_range("m", m, 1, d)?;
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidInput("back-projection has wrong length".into()));
    }
    let sum = sum_outer(d, vectors.len(), |t| Ok(vectors[t].clone()))?;
    finish_observed(sum, d, m, vectors.len())
}

fn finish_observed(sum: Vec<f64>, d: usize, m: usize, n: usize) -> Result<SymMatrix> {
    let c = observed_scale(d, m, n);
    SymMatrix::from_row_major(d, sum.into_iter().map(|v| c * v).collect())
}

fn check_debias_shape(d: usize, m: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "the de-biasing map needs d >= 2",
        });
    }
    check_range("m", m, 1, d)
}

/// The de-biasing map
/// `m((d+2)(d−1)S − (d−m) tr(S) I) / (d(dm+d−2))`.
pub fn debias(s1: &SymMatrix, m: usize) -> Result<SymMatrix> {
    let d = s1.dim();
    check_debias_shape(d, m)?;
    // Integer numerators/denominators so that m = d gives exactly (1, 0).
    let denom = (d * (d * m + d - 2)) as f64;
    let a = (m * (d + 2) * (d - 1)) as f64 / denom;
    let b = (m * (d - m)) as f64 / denom;
    Ok(s1.affine_identity(a, -b * s1.trace()))
}

/// `E Σ̂₁ = (d(dm+d−2) Σ + d(d−m) tr(Σ) I) / (m(d+2)(d−1))` for fixed data
/// with sample covariance `Σ`.
pub fn expected_observed_cov(sigma: &SymMatrix, m: usize) -> Result<SymMatrix> {
    let d = sigma.dim();
    check_debias_shape(d, m)?;
    let denom = (m * (d + 2) * (d - 1)) as f64;
    let a = (d * (d * m + d - 2)) as f64 / denom;
    let b = (d * (d - m)) as f64 / denom;
    Ok(sigma.affine_identity(a, b * sigma.trace()))
}

/// Observed covariance followed by [`debias`].
pub fn estimate(obs: &[Observation]) -> Result<CovEstimate> {
    let s1 = observed_covariance(obs)?;
    let (d, m) = (obs[0].dim(), obs[0].rank());
    Ok(CovEstimate {
        matrix: debias(&s1, m)?,
        d,
        m,
        n: obs.len(),
        method: Method::Debiased,
    })
}

/// [`estimate`] of `compress(x, m, seed)`, streamed.
pub fn estimate_streaming(x: &DataMatrix, m: usize, seed: u64) -> Result<CovEstimate> {
    let s1 = observed_covariance_streaming(x, m, seed)?;
    Ok(CovEstimate {
        matrix: debias(&s1, m)?,
        d: x.dim(),
        m,
        n: x.count(),
        method: Method::Debiased,
    })
}

/// Optional post-processor: zero out negative eigenvalues.
///
/// Not applied by default, since it destroys unbiasedness.
pub fn clamp_psd(m: &SymMatrix) -> Result<SymMatrix> {
    Ok(sym_eig(m)?.map_values(|_, lam| lam.max(0.0)))
}

/// Keeps the `k` algebraically largest eigenvalues.
pub fn rank_truncate(est: &CovEstimate, k: usize) -> Result<CovEstimate> {
    rank_truncate_with(est, k, TruncationOrder::Signed)
}

pub fn rank_truncate_with(
    est: &CovEstimate,
    k: usize,
    order: TruncationOrder,
) -> Result<CovEstimate> {
    let d = est.matrix.dim();
    check_range("k", k, 1, d)?;
    let spec = sym_eig(&est.matrix)?;
    let keep: Vec<usize> = match order {
        TruncationOrder::Signed => (0..k).collect(),
        TruncationOrder::Magnitude => {
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&i, &j| spec.values()[j].abs().total_cmp(&spec.values()[i].abs()));
            idx.truncate(k);
            idx
        }
    };
    let matrix = if k == d {
        est.matrix.clone()
    } else {
        spec.map_values(|i, lam| if keep.contains(&i) { lam } else { 0.0 })
    };
    Ok(CovEstimate {
        matrix,
        method: Method::Truncated(k),
        ..est.clone()
    })
}

/// Projector onto the top-`k` eigenvectors of the estimate.
pub fn subspace_estimate(est: &CovEstimate, k: usize) -> Result<SymMatrix> {
    check_range("k", k, 1, est.matrix.dim())?;
    top_k_projector(&sym_eig(&est.matrix)?, k)
}

/// Tolerance used to recognise projector inputs.
const PROJECTOR_TOL: f64 = 1e-6;

/// Sine of the largest principal angle between two equal-rank subspaces,
/// given by their orthogonal projectors.
pub fn subspace_error(p: &SymMatrix, q: &SymMatrix) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidInput("projector dimensions differ".into()));
    }
    let eye = SymMatrix::identity(p.dim());
    for (name, m) in [("first", p), ("second", q)] {
        if m.sandwich(&eye).max_abs_diff(m) > PROJECTOR_TOL {
            return Err(Error::InvalidInput(format!("{name} argument is not idempotent")));
        }
    }
    if (p.trace() - q.trace()).abs() > PROJECTOR_TOL {
        return Err(Error::InvalidInput(format!(
            "projector ranks differ ({} vs {})",
            p.trace(),
            q.trace()
        )));
    }
    Ok(linalg::spectral_norm(&(p - q))?.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Basis;
    use crate::sampling::compress;

    fn diag_obs() -> Observation {
        let h = 0.5_f64.sqrt();
        Observation::new(Basis::new(2, 1, vec![h, h]).unwrap(), vec![h]).unwrap()
    }

    fn sample_cov(x: &DataMatrix) -> SymMatrix {
        let d = x.dim();
        let n = x.count() as f64;
        SymMatrix::from_fn(d, |i, j| x.columns().map(|c| c[i] * c[j]).sum::<f64>() / n).unwrap()
    }

    #[test]
    fn observed_single_example() {
        let s1 = observed_covariance(&[diag_obs()]).unwrap();
        let want = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(s1.max_abs_diff(&want) < 1e-15);

        let est = estimate(&[diag_obs()]).unwrap();
        let want = SymMatrix::from_rows(&[vec![0.5, 1.0], vec![1.0, 0.5]]).unwrap();
        assert!(est.matrix.max_abs_diff(&want) < 1e-15);
        assert_eq!(est.method, Method::Debiased);
    }

    #[test]
    fn observed_rejects_empty_and_mixed() {
        assert!(observed_covariance(&[]).is_err());
        let other = Observation::new(Basis::standard(3, 1).unwrap(), vec![1.0]).unwrap();
        assert!(matches!(
            observed_covariance(&[diag_obs(), other]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn full_rank_matches_sample_covariance() {
        let x = DataMatrix::from_columns(&[vec![1.0, 2.0, -1.0], vec![0.5, 0.0, 3.0]]).unwrap();
        let obs = compress(&x, 3, 5).unwrap();
        let s = sample_cov(&x);
        assert!(observed_covariance(&obs).unwrap().max_abs_diff(&s) < 1e-12);
        assert!(estimate(&obs).unwrap().matrix.max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn debias_examples() {
        let s1 = SymMatrix::diag(&[2.0, 0.0]).unwrap();
        let out = debias(&s1, 1).unwrap();
        assert_eq!(out, SymMatrix::diag(&[1.5, -0.5]).unwrap());

        let s = SymMatrix::from_rows(&[vec![1.0, 0.3, 2.0], vec![0.3, -1.0, 0.0], vec![2.0, 0.0, 4.0]])
            .unwrap();
        assert_eq!(debias(&s, 3).unwrap(), s);

        assert!(matches!(
            debias(&SymMatrix::identity(1), 1),
            Err(Error::UnsupportedDimension { d: 1, .. })
        ));
        assert!(debias(&SymMatrix::identity(3), 0).is_err());
        assert!(debias(&SymMatrix::identity(3), 4).is_err());
    }

    #[test]
    fn expected_observed_examples() {
        for d in 2..6 {
            for m in 1..=d {
                let e = expected_observed_cov(&SymMatrix::identity(d), m).unwrap();
                let want = SymMatrix::identity(d).scale(d as f64 / m as f64);
                assert!(e.max_abs_diff(&want) < 1e-13);
            }
        }
        let e = expected_observed_cov(&SymMatrix::diag(&[1.0, 0.0]).unwrap(), 1).unwrap();
        assert_eq!(e, SymMatrix::diag(&[1.5, 0.5]).unwrap());
    }

    #[test]
    fn truncation_examples() {
        let est = CovEstimate {
            matrix: SymMatrix::diag(&[3.0, 1.0, 0.0]).unwrap(),
            d: 3,
            m: 1,
            n: 1,
            method: Method::Debiased,
        };
        let t = rank_truncate(&est, 1).unwrap();
        assert!(t.matrix.max_abs_diff(&SymMatrix::diag(&[3.0, 0.0, 0.0]).unwrap()) < 1e-15);
        assert_eq!(t.method, Method::Truncated(1));
        assert_eq!(rank_truncate(&est, 3).unwrap().matrix, est.matrix);
        assert!(rank_truncate(&est, 0).is_err());
        assert!(rank_truncate(&est, 4).is_err());
    }

    #[test]
    fn magnitude_truncation_keeps_large_negative() {
        let est = CovEstimate {
            matrix: SymMatrix::diag(&[1.0, 0.5, -2.0]).unwrap(),
            d: 3,
            m: 1,
            n: 1,
            method: Method::Debiased,
        };
        let signed = rank_truncate(&est, 1).unwrap();
        let mag = rank_truncate_with(&est, 1, TruncationOrder::Magnitude).unwrap();
        assert!(signed.matrix.max_abs_diff(&SymMatrix::diag(&[1.0, 0.0, 0.0]).unwrap()) < 1e-15);
        assert!(mag.matrix.max_abs_diff(&SymMatrix::diag(&[0.0, 0.0, -2.0]).unwrap()) < 1e-15);
    }

    #[test]
    fn subspace_examples() {
        let sigma = SymMatrix::diag(&[3.0, 2.0, 1.0]).unwrap();
        let est = CovEstimate {
            matrix: sigma.clone(),
            d: 3,
            m: 3,
            n: 1,
            method: Method::Debiased,
        };
        let p = subspace_estimate(&est, 2).unwrap();
        assert_eq!(p, SymMatrix::diag(&[1.0, 1.0, 0.0]).unwrap());
        assert_eq!(subspace_error(&p, &p).unwrap(), 0.0);

        let e1 = SymMatrix::diag(&[1.0, 0.0]).unwrap();
        let e2 = SymMatrix::diag(&[0.0, 1.0]).unwrap();
        assert!((subspace_error(&e1, &e2).unwrap() - 1.0).abs() < 1e-15);

        let h = 0.5_f64.sqrt();
        let diag = SymMatrix::outer(&[h, h]).unwrap();
        assert!((subspace_error(&e1, &diag).unwrap() - h).abs() < 1e-12);

        assert!(subspace_error(&e1, &SymMatrix::identity(2)).is_err());
        assert!(subspace_error(&e1, &SymMatrix::diag(&[2.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn clamp_removes_negative_part() {
        let m = SymMatrix::diag(&[1.0, -0.5]).unwrap();
        let c = clamp_psd(&m).unwrap();
        assert!(c.max_abs_diff(&SymMatrix::diag(&[1.0, 0.0]).unwrap()) < 1e-15);
    }

    #[test]
    fn streaming_is_bitwise_identical() {
        let cols: Vec<Vec<f64>> = (0..700)
            .map(|t| (0..5).map(|i| ((t * 7 + i * 3) % 11) as f64 - 5.0).collect())
            .collect();
        let x = DataMatrix::from_columns(&cols).unwrap();
        let obs = compress(&x, 2, 42).unwrap();
        let a = estimate(&obs).unwrap();
        let b = estimate_streaming(&x, 2, 42).unwrap();
        assert_eq!(a, b);
        let vs: Vec<Vec<f64>> = obs.iter().map(Observation::backproject).collect();
        let c = observed_covariance_from_backprojections(&vs, 5, 2).unwrap();
        assert_eq!(c, observed_covariance(&obs).unwrap());
    }
}
