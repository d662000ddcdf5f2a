//! Closed-form error bounds and Monte-Carlo checks of the distributional
//! identities behind the estimator.
//!
//! The universal constants in the bounds are never instantiated, so every
//! evaluator takes them as explicit arguments (`1.0` is the conventional
//! default). They are meant for shape checks and rate rescaling, not for
//! certifying absolute error levels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{check_range, Error, Result};
use crate::estimator::{debias, observed_covariance_streaming, sum_outer};
use crate::linalg::{self, inf_norm, sym_eig, two_inf_norm, Basis, DataMatrix, SymMatrix};
use crate::sampling::{derive_seed, sample_gaussian, sample_random_basis, GaussianSpec, RngStream};

/// Data-dependent quantities appearing in the distribution-free bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleStats {
    /// `‖X‖_∞`, the largest absolute entry.
    pub inf_x: f64,
    /// `‖X‖_{2,∞}`, the largest column norm.
    pub two_inf_x: f64,
    /// `‖(1/n) Σ ‖x_t‖² x_t x_t^T‖₂`.
    pub s1: f64,
    /// `(1/n) Σ ‖x_t‖⁴`.
    pub s2: f64,
    pub n: usize,
    pub d: usize,
}

pub fn compute_stats(x: &DataMatrix) -> Result<SampleStats> {
    let (d, n) = (x.dim(), x.count());
    let weighted = sum_outer(d, n, |t| {
        let c = x.column(t);
        let norm = linalg::dot(c, c).sqrt();
        Ok(c.iter().map(|v| v * norm).collect())
    })?;
    let inv_n = 1.0 / n as f64;
    let weighted = SymMatrix::from_row_major(d, weighted.into_iter().map(|v| v * inv_n).collect())?;
    let s2 = x
        .columns()
        .map(|c| {
            let sq = linalg::dot(c, c);
            sq * sq
        })
        .sum::<f64>()
        * inv_n;
    Ok(SampleStats {
        inf_x: inf_norm(x),
        two_inf_x: two_inf_norm(x),
        s1: linalg::spectral_norm(&weighted)?,
        s2,
        n,
        d,
    })
}

/// A bound value and whether the bound's side condition on `δ` holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub precondition_met: bool,
}

fn check_bound_inputs(stats: &SampleStats, m: usize, delta: f64) -> Result<()> {
    if stats.d < 2 {
        return Err(Error::UnsupportedDimension {
            d: stats.d,
            reason: "the error bounds need d >= 2",
        });
    }
    check_range("m", m, 1, stats.d)?;
    if stats.n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must be in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Entrywise bound
/// `κ₁‖X‖²_∞ √(d² log²(nd/δ)/(nm²)) + κ₂‖X‖²_∞ d² log²(nd/δ)/(nm²)`,
/// valid when `δ ≥ 4d² exp(−n/12)`.
pub fn thm1_bound(stats: &SampleStats, m: usize, delta: f64, k1: f64, k2: f64) -> Result<BoundValue> {
    check_bound_inputs(stats, m, delta)?;
    let (d, n, m) = (stats.d as f64, stats.n as f64, m as f64);
    let log = (n * d / delta).ln();
    let ratio = d * d * log * log / (n * m * m);
    let scale = stats.inf_x * stats.inf_x;
    Ok(BoundValue {
        value: k1 * scale * ratio.sqrt() + k2 * scale * ratio,
        precondition_met: delta >= 4.0 * d * d * (-n / 12.0).exp(),
    })
}

/// Spectral bound
/// `κ₁(√((d/m)S₁) + √((d/m²)S₂))√(log(d/δ)/n) + κ₂ d‖X‖²_{2,∞} log(d/δ)/(nm)`.
pub fn thm2_bound(stats: &SampleStats, m: usize, delta: f64, k1: f64, k2: f64) -> Result<BoundValue> {
    check_bound_inputs(stats, m, delta)?;
    let (d, n, m) = (stats.d as f64, stats.n as f64, m as f64);
    let log = (d / delta).ln();
    let lead = ((d / m) * stats.s1).sqrt() + ((d / (m * m)) * stats.s2).sqrt();
    let tail = d * stats.two_inf_x * stats.two_inf_x * log / (n * m);
    Ok(BoundValue {
        value: k1 * lead * (log / n).sqrt() + k2 * tail,
        precondition_met: true,
    })
}

/// High-probability thresholds for Gaussian data `N(0, Σ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailBounds {
    /// `√(2‖Σ‖_∞ log(nd/δ))` for `‖X‖_∞`.
    pub x_inf: f64,
    /// `√(2 tr(Σ) log(nd/δ))` for `‖X‖_{2,∞}`.
    pub x_two_inf: f64,
    /// `‖Σ‖₂ √(c log(2/δ)/n)` for the sample covariance in spectral norm.
    pub cov_spectral: f64,
    /// `‖Σ‖_∞ √(log(2d/δ)/n)` for the sample covariance entrywise.
    pub cov_inf: f64,
}

/// [`gaussian_tail_bounds_with`] with the spectral constant `c = 1`.
pub fn gaussian_tail_bounds(sigma: &SymMatrix, n: usize, delta: f64) -> Result<TailBounds> {
    gaussian_tail_bounds_with(sigma, n, delta, 1.0)
}

pub fn gaussian_tail_bounds_with(
    sigma: &SymMatrix,
    n: usize,
    delta: f64,
    c: f64,
) -> Result<TailBounds> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must be in (0, 1), got {delta}")));
    }
    let (d, nf) = (sigma.dim() as f64, n as f64);
    let log_nd = (nf * d / delta).ln();
    let sup = inf_norm(sigma);
    Ok(TailBounds {
        x_inf: (2.0 * sup * log_nd).sqrt(),
        x_two_inf: (2.0 * sigma.trace() * log_nd).sqrt(),
        cov_spectral: linalg::spectral_norm(sigma)? * (c * (2.0 / delta).ln() / nf).sqrt(),
        cov_inf: sup * ((2.0 * d / delta).ln() / nf).sqrt(),
    })
}

/// Fraction of `trials` Gaussian data sets whose `‖X‖_∞` exceeds the
/// [`TailBounds::x_inf`] threshold.
pub fn tail_violation_frequency(
    sigma: &SymMatrix,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    let threshold = gaussian_tail_bounds(sigma, n, delta)?.x_inf;
    let spec = GaussianSpec::new(sigma.clone())?;
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            let x = sample_gaussian(&spec, n, &mut RngStream::new(seed, t as u64))?;
            Ok(usize::from(inf_norm(&x) > threshold))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / trials as f64)
}

/// Relative eigenvalue floor below which a compressed covariance counts as singular.
const EIG_FLOOR: f64 = 1e-12;

/// `KL(N(0, U^T Σ₁ U) ‖ N(0, U^T Σ₀ U))`.
///
/// Uses an eigendecomposition of `U^T Σ₀ U` rather than an explicit inverse.
/// Returns `+∞` when `U^T Σ₁ U` is singular.
pub fn kl_compressed_gaussian(sigma0: &SymMatrix, sigma1: &SymMatrix, u: &Basis) -> Result<f64> {
    if sigma0.dim() != u.dim() || sigma1.dim() != u.dim() {
        return Err(Error::InvalidInput("covariance and basis dimensions differ".into()));
    }
    let c0 = u.compress_matrix(sigma0);
    let c1 = u.compress_matrix(sigma1);
    let m = u.rank();
    if c0 == c1 {
        return Ok(0.0);
    }

    let e0 = sym_eig(&c0)?;
    let top = e0.values()[0];
    let bottom = e0.values()[m - 1];
    if !(top > 0.0 && bottom > EIG_FLOOR * top) {
        return Err(Error::InvalidInput(
            "compressed reference covariance is singular".into(),
        ));
    }
    // W = Λ^{-1/2} V^T C₁ V Λ^{-1/2} is similar to C₀⁻¹ C₁.
    let scaled: Vec<f64> = (0..m)
        .flat_map(|i| {
            let s = 1.0 / e0.values()[i].sqrt();
            e0.vector(i).iter().map(move |v| v * s).collect::<Vec<_>>()
        })
        .collect();
    let w_basis = Basis::from_orthonormal_unchecked(m, m, scaled);
    let w = w_basis.compress_matrix(&c1);
    let mu = sym_eig(&w)?;
    if mu.values()[m - 1] <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let kl = 0.5 * mu.values().iter().map(|&x| x - 1.0 - x.ln()).sum::<f64>();
    Ok(kl.max(0.0))
}

/// A Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub reps: usize,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        let reps = values.len();
        let mean = values.iter().sum::<f64>() / reps as f64;
        let std_err = if reps > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
            (var / reps as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_err,
            reps,
        }
    }

    /// `|mean − target| ≤ k · std_err`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Evaluates `f` on one Haar basis per repetition (stream `(seed, rep)`).
fn haar_average<F>(d: usize, m: usize, reps: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&Basis) -> Result<f64> + Sync,
{
    check_range("m", m, 1, d)?;
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be positive".into()));
    }
    let values = (0..reps)
        .into_par_iter()
        .map(|r| f(&sample_random_basis(d, m, &mut RngStream::new(seed, r as u64))?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_values(&values))
}

/// Per-sample KL between compressed `N(0, ηI + γe₁e₁^T)` and `N(0, ηI)`,
/// averaged over Haar bases.
pub fn mc_kl_contraction(
    d: usize,
    m: usize,
    gamma: f64,
    eta: f64,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(eta > 0.0 && eta.is_finite()) || !(gamma >= -eta && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need eta > 0 and gamma >= -eta, got eta={eta}, gamma={gamma}"
        )));
    }
    let sigma0 = SymMatrix::identity(d).scale(eta);
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let sigma1 = &sigma0 + &SymMatrix::outer(&e1)?.scale(gamma);
    haar_average(d, m, reps, seed, |u| kl_compressed_gaussian(&sigma0, &sigma1, u))
}

/// The per-sample contraction bound `(3/2)(γ/η)² m²/d²`.
pub fn kl_contraction_bound(d: usize, m: usize, gamma: f64, eta: f64) -> f64 {
    let r = gamma / eta;
    1.5 * r * r * (m * m) as f64 / (d * d) as f64
}

/// `E ‖U^T e₁ e₁^T U‖_F² = E ‖U^T e₁‖⁴` over Haar `U`.
pub fn frob_projection_moment(d: usize, m: usize, reps: usize, seed: u64) -> Result<McEstimate> {
    haar_average(d, m, reps, seed, |u| {
        let sq: f64 = (0..m).map(|j| u.column(j)[0] * u.column(j)[0]).sum();
        Ok(sq * sq)
    })
}

/// `3m²/d²`.
pub fn frob_moment_bound(d: usize, m: usize) -> f64 {
    3.0 * (m * m) as f64 / (d * d) as f64
}

/// Which error norm a quantity refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Infinity,
    Spectral,
}

/// Spectral rescaling convention: `√(nm²/d³)` (`Text`) or `√(nm²/d²)` (`Caption`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleVariant {
    #[default]
    Text,
    Caption,
}

/// Multiplier applied by [`rescale_error`]. The infinity-norm factor is
/// `√(nm²/(d² log³ d))` under both variants.
pub fn rescale_factor(
    n: usize,
    m: usize,
    d: usize,
    norm: NormKind,
    variant: RescaleVariant,
) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("n and m must be positive".into()));
    }
    if d < 2 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "rescaling needs log d > 0",
        });
    }
    let (n, m, d) = (n as f64, m as f64, d as f64);
    let denom = match (norm, variant) {
        (NormKind::Infinity, _) => d * d * d.ln().powi(3),
        (NormKind::Spectral, RescaleVariant::Text) => d * d * d,
        (NormKind::Spectral, RescaleVariant::Caption) => d * d,
    };
    Ok((n * m * m / denom).sqrt())
}

pub fn rescale_error(
    err: f64,
    n: usize,
    m: usize,
    d: usize,
    norm: NormKind,
    variant: RescaleVariant,
) -> Result<f64> {
    if !(err >= 0.0) {
        return Err(Error::InvalidInput(format!("error must be >= 0, got {err}")));
    }
    Ok(err * rescale_factor(n, m, d, norm, variant)?)
}

/// `‖E‖₂ / gap`.
pub fn davis_kahan_bound(gap: f64, perturbation_norm: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::InvalidInput(format!("eigengap must be positive, got {gap}")));
    }
    if !(perturbation_norm >= 0.0) {
        return Err(Error::InvalidInput("perturbation norm must be >= 0".into()));
    }
    Ok(perturbation_norm / gap)
}

/// Which stage of the estimator to average in [`mc_redraw_mean`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Observed,
    Debiased,
}

/// Entrywise Monte-Carlo mean and standard error of a matrix-valued statistic.
#[derive(Clone, Debug)]
pub struct McMatrix {
    pub mean: SymMatrix,
    pub std_err: SymMatrix,
    pub reps: usize,
}

impl McMatrix {
    /// Largest `|mean − target| / std_err` over entries (entries with zero
    /// standard error must match exactly).
    pub fn max_z_score(&self, target: &SymMatrix) -> f64 {
        let d = self.mean.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let diff = (self.mean.get(i, j) - target.get(i, j)).abs();
                let se = self.std_err.get(i, j);
                let z = if se > 0.0 {
                    diff / se
                } else if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(z);
            }
        }
        worst
    }
}

/// Holds `x` fixed and redraws all projections `reps` times, averaging the
/// observed or de-biased covariance. Redraw `r` uses master seed
/// `derive_seed(seed, [r])`.
pub fn mc_redraw_mean(x: &DataMatrix, m: usize, reps: usize, seed: u64, stage: Stage) -> Result<McMatrix> {
    if reps < 2 {
        return Err(Error::InvalidInput("need at least two redraws".into()));
    }
    let d = x.dim();
    const BLOCK: usize = 1024;
    let partials = (0..reps.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut sum = vec![0.0; d * d];
            let mut sq = vec![0.0; d * d];
            for r in b * BLOCK..reps.min((b + 1) * BLOCK) {
                let s1 = observed_covariance_streaming(x, m, derive_seed(seed, &[r as u64]))?;
                let est = match stage {
                    Stage::Observed => s1,
                    Stage::Debiased => debias(&s1, m)?,
                };
                for (k, v) in est.as_slice().iter().enumerate() {
                    sum[k] += v;
                    sq[k] += v * v;
                }
            }
            Ok((sum, sq))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; d * d];
    let mut sq = vec![0.0; d * d];
    for (s, q) in &partials {
        for k in 0..d * d {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    let r = reps as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / r).collect();
    let se: Vec<f64> = sq
        .iter()
        .zip(&mean)
        .map(|(q, mu)| (((q - r * mu * mu) / (r - 1.0)).max(0.0) / r).sqrt())
        .collect();
    Ok(McMatrix {
        mean: SymMatrix::from_row_major(d, mean)?,
        std_err: SymMatrix::from_row_major(d, se)?,
        reps,
    })
}

/// CDF of `Beta(a, b)`.
pub fn beta_cdf(a: f64, b: f64, x: f64) -> Result<f64> {
    let dist = Beta::new(a, b).map_err(|e| Error::InvalidInput(format!("Beta({a}, {b}): {e}")))?;
    Ok(dist.cdf(x))
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at significance 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// KS statistic of `‖A^T x‖²/‖x‖²` over `draws` Haar bases against
/// `Beta(m/2, (d−m)/2)`, for a fixed `x`.
pub fn projection_length_ks(d: usize, m: usize, x: &[f64], draws: usize, seed: u64) -> Result<f64> {
    if m >= d {
        return Err(Error::InvalidInput("projection-length law needs m < d".into()));
    }
    if x.len() != d {
        return Err(Error::InvalidInput("test vector has wrong length".into()));
    }
    let norm_sq = linalg::dot(x, x);
    if !(norm_sq > 0.0) {
        return Err(Error::InvalidInput("test vector must be nonzero".into()));
    }
    check_range("m", m, 1, d)?;
    let ratios = (0..draws)
        .into_par_iter()
        .map(|r| {
            let a = sample_random_basis(d, m, &mut RngStream::new(seed, r as u64))?;
            let z = a.compress(x);
            Ok(linalg::dot(&z, &z) / norm_sq)
        })
        .collect::<Result<Vec<f64>>>()?;
    let dist = Beta::new(m as f64 / 2.0, (d - m) as f64 / 2.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(ks_statistic(&ratios, |v| dist.cdf(v)))
}
