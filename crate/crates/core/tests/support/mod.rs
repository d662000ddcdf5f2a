//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use covest::linalg::SymMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_symmetric(d: usize, rng: &mut impl Rng) -> SymMatrix {
    let raw: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    SymMatrix::from_row_major(d, raw).unwrap()
}

/// `G G^T / d` for a Gaussian-ish `G`, so PSD and generically full rank.
pub fn random_psd(d: usize, rng: &mut impl Rng) -> SymMatrix {
    let g: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    SymMatrix::from_fn(d, |i, j| (0..d).map(|k| g[i * d + k] * g[j * d + k]).sum::<f64>() / d as f64)
        .unwrap()
}

pub fn dense(m: &SymMatrix) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| m.row(i).to_vec()).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    (0..r)
        .map(|i| (0..c).map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum()).collect())
        .collect()
}

/// Number of eigenvalues of `m` strictly below `x`: the count of negative
/// pivots in the LDL^T factorization of `m − xI` (Sylvester's law of inertia).
pub fn count_below(m: &SymMatrix, x: f64) -> usize {
    let d = m.dim();
    let mut a: Vec<Vec<f64>> = dense(m);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= x;
    }
    let mut negatives = 0;
    for k in 0..d {
        let mut pivot = a[k][k];
        if pivot == 0.0 {
            pivot = -1e-300;
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in k + 1..d {
            let l = a[i][k] / pivot;
            for j in k + 1..d {
                a[i][j] -= l * a[k][j];
            }
        }
    }
    negatives
}

/// Eigenvalues in descending order by bisection on the inertia count.
pub fn oracle_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let d = m.dim();
    let radius = (0..d)
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    // ascending: the j-th smallest is the least x with count_below(x) > j
    let mut ascending: Vec<f64> = (0..d)
        .map(|j| {
            let (mut lo, mut hi) = (-radius, radius);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(m, mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    ascending.reverse();
    ascending
}

/// `∫_0^{θ_max} 2 sin^{2a−1}θ cos^{2b−1}θ dθ` by composite Simpson; this is
/// the unnormalized Beta(a, b) mass below `sin²θ_max`, smooth for `a, b ≥ 1/2`.
fn beta_mass(a: f64, b: f64, theta_max: f64, intervals: usize) -> f64 {
    let f = |t: f64| 2.0 * t.sin().powf(2.0 * a - 1.0) * t.cos().powf(2.0 * b - 1.0);
    let n = intervals + intervals % 2;
    let h = theta_max / n as f64;
    let mut s = f(0.0) + f(theta_max);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Beta CDF by quadrature.
pub fn beta_cdf_quad(a: f64, b: f64, x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    beta_mass(a, b, x.sqrt().asin(), 4000) / beta_mass(a, b, std::f64::consts::FRAC_PI_2, 4000)
}

/// Tabulated Beta CDF on a fine `θ` grid with linear interpolation, for
/// evaluating many points.
pub struct BetaTable {
    cdf: Vec<f64>,
    step: f64,
}

impl BetaTable {
    pub fn new(a: f64, b: f64, cells: usize) -> Self {
        let f = |t: f64| 2.0 * t.sin().powf(2.0 * a - 1.0) * t.cos().powf(2.0 * b - 1.0);
        let step = std::f64::consts::FRAC_PI_2 / cells as f64;
        let mut cdf = vec![0.0; cells + 1];
        for i in 0..cells {
            let (t0, t1) = (i as f64 * step, (i + 1) as f64 * step);
            cdf[i + 1] = cdf[i] + step / 6.0 * (f(t0) + 4.0 * f(0.5 * (t0 + t1)) + f(t1));
        }
        let total = cdf[cells];
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { cdf, step }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = x.clamp(0.0, 1.0).sqrt().asin() / self.step;
        let i = (t.floor() as usize).min(self.cdf.len() - 2);
        let w = t - i as f64;
        self.cdf[i] * (1.0 - w) + self.cdf[i + 1] * w
    }
}

/// `E[ω^i]` for `ω ~ Beta(a, b)` by quadrature; `b = 0` is the point mass at 1.
pub fn beta_moment_quad(a: f64, b: f64, i: i32) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    let g = |t: f64| 2.0 * t.sin().powf(2.0 * a - 1.0) * t.cos().powf(2.0 * b - 1.0);
    let n = 4000;
    let h = std::f64::consts::FRAC_PI_2 / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=n {
        let t = k as f64 * h;
        let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let s2 = t.sin().powi(2);
        num += w * g(t) * s2.powi(i);
        den += w * g(t);
    }
    num / den
}

/// Least-squares slope of `log y` on `log x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Population covariance check helper: `(1/n) Σ x x^T` written out directly.
pub fn naive_sample_cov(cols: &[&[f64]]) -> Vec<Vec<f64>> {
    let d = cols[0].len();
    let n = cols.len() as f64;
    let mut s = vec![vec![0.0; d]; d];
    for c in cols {
        for i in 0..d {
            for j in 0..d {
                s[i][j] += c[i] * c[j] / n;
            }
        }
    }
    s
}
