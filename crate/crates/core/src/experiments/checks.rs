//! Self-contained pass/fail checks of the estimator's theoretical properties.
//! Each returns a [`CheckResult`] carrying the statistic, its target and the
//! tolerance used.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::sample_covariance;
use crate::error::Result;
use crate::estimator::{debias, estimate_streaming, expected_observed_cov, rank_truncate, subspace_estimate, subspace_error};
use crate::linalg::{spectral_norm, sym_eig, top_k_projector, DataMatrix, SymMatrix};
use crate::sampling::{beta_moment, derive_seed, sample_gaussian, GaussianSpec, RngStream};
use crate::simnet::{run_network, CostLedger, Protocol};
use crate::theory::{
    frob_moment_bound, frob_projection_moment, kl_contraction_bound, ks_critical_01, mc_kl_contraction,
    mc_redraw_mean, projection_length_ks, tail_violation_frequency, Stage,
};

use super::config::SigmaKind;
use super::sigma::{eigengap, make_sigma};
use crate::theory::NormKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The measured statistic.
    pub estimate: f64,
    /// What it is compared against.
    pub target: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, estimate: f64, target: f64, tolerance: f64, seed: u64, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        estimate,
        target,
        tolerance,
        seed,
        detail,
    }
}

fn log_uniform(rng: &mut RngStream, lo: f64, hi: f64) -> usize {
    rng.random_range(lo.ln()..hi.ln()).exp().round() as usize
}

/// `debias(expected_observed_cov(Σ, m), m) = Σ` for random PSD `Σ`,
/// `d ∈ [2, 64]`, `m ∈ [1, d]`.
pub fn debias_inversion(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut worst = 0.0_f64;
    for i in 0..instances {
        let mut rng = RngStream::new(seed, i as u64);
        let d = rng.random_range(2..=64);
        let m = rng.random_range(1..=d);
        let sigma = make_sigma(SigmaKind::RandomPsd, d, d, NormKind::Infinity, &mut rng)?;
        let back = debias(&expected_observed_cov(&sigma, m)?, m)?;
        worst = worst.max(back.max_abs_diff(&sigma));
    }
    Ok(check(
        "debias_inversion",
        worst <= 1e-12,
        worst,
        0.0,
        1e-12,
        seed,
        format!("max entrywise deviation over {instances} matrices"),
    ))
}

/// Monte-Carlo mean of the observed and de-biased covariance over `reps`
/// projection redraws of one fixed `6 x 4` data set.
pub fn redraw_unbiasedness(m: usize, reps: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let d = 6;
    let x = sample_gaussian(&GaussianSpec::new(SymMatrix::identity(d))?, 4, &mut RngStream::new(seed, 0))?;
    let s = sample_covariance(&x);
    let mut out = Vec::new();
    for (stage, label, target) in [
        (Stage::Debiased, "debiased", s.clone()),
        (Stage::Observed, "observed", expected_observed_cov(&s, m)?),
    ] {
        let mc = mc_redraw_mean(&x, m, reps, derive_seed(seed, &[1]), stage)?;
        let z = mc.max_z_score(&target);
        out.push(check(
            format!("redraw_mean_{label}_m{m}"),
            z <= 3.0,
            z,
            0.0,
            3.0,
            seed,
            format!("largest entrywise z-score over {reps} redraws (d = {d}, n = 4)"),
        ));
    }
    Ok(out)
}

/// KS test of `‖A^T x‖²/‖x‖²` against `Beta(m/2, (d−m)/2)`.
pub fn projection_law(d: usize, m: usize, draws: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = RngStream::new(seed, 0);
    let x: Vec<f64> = rng.normals(d);
    let stat = projection_length_ks(d, m, &x, draws, derive_seed(seed, &[1]))?;
    let crit = ks_critical_01(draws);
    Ok(check(
        format!("projection_law_d{d}_m{m}"),
        stat < crit,
        stat,
        0.0,
        crit,
        seed,
        format!("KS statistic over {draws} draws vs critical value at p = 0.01"),
    ))
}

/// Estimate equals the sample covariance when `m = d`.
pub fn full_rank_degeneracy(d: usize, seed: u64) -> Result<CheckResult> {
    let x = sample_gaussian(&GaussianSpec::new(SymMatrix::identity(d))?, 3 * d, &mut RngStream::new(seed, 0))?;
    let est = estimate_streaming(&x, d, derive_seed(seed, &[1]))?;
    let diff = est.matrix.max_abs_diff(&sample_covariance(&x));
    Ok(check(
        format!("full_rank_degeneracy_d{d}"),
        diff <= 1e-9,
        diff,
        0.0,
        1e-9,
        seed,
        "max entrywise deviation from the sample covariance".into(),
    ))
}

/// Haar-averaged KL between compressed spiked and isotropic Gaussians
/// against `1.05 · (3/2)(γ/η)² m²/d²`.
pub fn kl_contraction(d: usize, m: usize, ratio: f64, reps: usize, seed: u64) -> Result<CheckResult> {
    let est = mc_kl_contraction(d, m, ratio, 1.0, reps, seed)?;
    let bound = kl_contraction_bound(d, m, ratio, 1.0);
    Ok(check(
        format!("kl_contraction_d{d}_m{m}_r{ratio}"),
        est.mean <= 1.05 * bound,
        est.mean,
        bound,
        0.05 * bound,
        seed,
        format!("mean over {reps} bases (se {:.3e})", est.std_err),
    ))
}

pub fn kl_gamma_zero(reps: usize, seed: u64) -> Result<CheckResult> {
    let est = mc_kl_contraction(8, 2, 0.0, 1.0, reps, seed)?;
    Ok(check(
        "kl_gamma_zero",
        est.mean == 0.0,
        est.mean,
        0.0,
        0.0,
        seed,
        "identical distributions".into(),
    ))
}

/// `E ‖U^T e₁‖⁴` against the Beta moment, and against `3m²/d²`.
pub fn frob_moment(d: usize, m: usize, reps: usize, seed: u64) -> Result<CheckResult> {
    let est = frob_projection_moment(d, m, reps, seed)?;
    let exact = beta_moment(m, d, 2);
    let bound = frob_moment_bound(d, m);
    Ok(check(
        format!("frob_moment_d{d}_m{m}"),
        est.within(exact, 3.0) && est.mean <= bound,
        est.mean,
        exact,
        3.0 * est.std_err,
        seed,
        format!("bound 3m²/d² = {bound:.6}"),
    ))
}

/// Frequency with which `‖X‖_∞` exceeds its `δ = 0.05` tail threshold.
pub fn gaussian_tail(trials: usize, seed: u64) -> Result<CheckResult> {
    let delta = 0.05;
    let freq = tail_violation_frequency(&SymMatrix::identity(10), 1000, delta, trials, seed)?;
    let slack = 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    Ok(check(
        "gaussian_tail_x_inf",
        freq <= delta + slack,
        freq,
        delta,
        slack,
        seed,
        format!("{trials} data sets, d = 10, n = 1000"),
    ))
}

fn instance_data(
    kind: SigmaKind,
    d: usize,
    k: usize,
    seed: u64,
    i: usize,
) -> Result<(SymMatrix, DataMatrix, usize, u64)> {
    let mut rng = RngStream::new(seed, i as u64);
    let sigma = make_sigma(kind, d, k, NormKind::Spectral, &mut rng)?;
    let n = log_uniform(&mut rng, 100.0, 10_000.0);
    let m = rng.random_range(1..=d);
    let x = sample_gaussian(&GaussianSpec::new(sigma.clone())?, n, &mut rng)?;
    Ok((sigma, x, m, derive_seed(seed, &[i as u64])))
}

/// `‖Σ̂_k − Σ‖₂ ≤ 2‖Σ̂ − Σ‖₂` for rank-`k` `Σ`.
pub fn truncation_inequality(instances: usize, d: usize, k: usize, seed: u64) -> Result<CheckResult> {
    let mut violations = 0;
    let mut worst = 0.0_f64;
    for i in 0..instances {
        let (sigma, x, m, s) = instance_data(SigmaKind::RankK, d, k, seed, i)?;
        let est = estimate_streaming(&x, m, s)?;
        let full = spectral_norm(&(&est.matrix - &sigma))?;
        let trunc = spectral_norm(&(&rank_truncate(&est, k)?.matrix - &sigma))?;
        let ratio = trunc / full;
        worst = worst.max(ratio);
        if trunc > 2.0 * full {
            violations += 1;
        }
    }
    Ok(check(
        "truncation_inequality",
        violations == 0,
        worst,
        2.0,
        0.0,
        seed,
        format!("{violations} violations in {instances} instances (d = {d}, k = {k}); estimate is the worst ratio"),
    ))
}

/// `sin θ(Π̂_k, Π_k) ≤ ‖Σ̂ − Σ‖₂ / γ_k` on spiked covariances.
pub fn davis_kahan(instances: usize, d: usize, k: usize, seed: u64) -> Result<CheckResult> {
    let mut violations = 0;
    let mut worst = 0.0_f64;
    for i in 0..instances {
        let (sigma, x, m, s) = instance_data(SigmaKind::Spiked, d, k, seed, i)?;
        let gap = eigengap(&sigma, k)?;
        debug_assert!(gap >= 0.5);
        let est = estimate_streaming(&x, m, s)?;
        let pert = spectral_norm(&(&est.matrix - &sigma))?;
        let truth = top_k_projector(&sym_eig(&sigma)?, k)?;
        let angle = subspace_error(&subspace_estimate(&est, k)?, &truth)?;
        let bound = pert / gap;
        worst = worst.max(angle / bound);
        if angle > bound {
            violations += 1;
        }
    }
    Ok(check(
        "davis_kahan",
        violations == 0,
        worst,
        1.0,
        0.0,
        seed,
        format!("{violations} violations in {instances} instances (d = {d}, k = {k}); estimate is the worst ratio to the bound"),
    ))
}

/// Ledgers match the closed forms and the two compressive protocols agree
/// bit for bit, over random `(n, d, m)`.
pub fn network_ledgers(triples: usize, seed: u64) -> Result<CheckResult> {
    let mut failures = 0;
    for i in 0..triples {
        let mut rng = RngStream::new(seed, i as u64);
        let d = rng.random_range(2..=24);
        let m = rng.random_range(1..=d);
        let n = rng.random_range(1..=400);
        let x = sample_gaussian(&GaussianSpec::new(SymMatrix::identity(d))?, n, &mut rng)?;
        let s = derive_seed(seed, &[i as u64]);
        let mut estimates = Vec::new();
        for p in Protocol::ALL {
            let (est, ledger) = run_network(&x, m, p, s)?;
            if ledger != CostLedger::predicted(p, n, d, m) {
                failures += 1;
            }
            estimates.push(est);
        }
        if estimates[1] != estimates[2] || estimates[0].matrix != sample_covariance(&x) {
            failures += 1;
        }
    }
    Ok(check(
        "network_ledgers",
        failures == 0,
        failures as f64,
        0.0,
        0.0,
        seed,
        format!("{triples} random (n, d, m) triples"),
    ))
}

/// The full battery at `reps` Monte-Carlo repetitions.
pub fn all_checks(reps: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let s = |tag: u64| derive_seed(seed, &[tag]);
    let mut out = vec![debias_inversion(200, s(1))?];
    for m in [1, 2] {
        out.extend(redraw_unbiasedness(m, 2 * reps, s(2 + m as u64))?);
    }
    for (d, m) in [(4, 1), (4, 2), (8, 1), (8, 4)] {
        out.push(projection_law(d, m, reps, s(10 + d as u64 * 10 + m as u64))?);
    }
    for d in [2, 8, 32] {
        out.push(full_rank_degeneracy(d, s(200 + d as u64))?);
    }
    for d in [4, 8, 16] {
        for m in [1, 2, 4] {
            for ratio in [0.5, 1.0] {
                out.push(kl_contraction(d, m, ratio, reps, s(300 + d as u64 * 10 + m as u64))?);
            }
            out.push(frob_moment(d, m, reps, s(400 + d as u64 * 10 + m as u64))?);
        }
    }
    out.push(kl_gamma_zero(reps.min(1000), s(500))?);
    out.push(gaussian_tail(1000, s(600))?);
    out.push(truncation_inequality(500, 8, 2, s(700))?);
    out.push(davis_kahan(500, 8, 2, s(800))?);
    out.push(network_ledgers(20, s(900))?);
    Ok(out)
}
