//! The five experiment drivers.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{fixed_projection_floor, hmt_estimate_with, sample_covariance};
use crate::error::Result;
use crate::estimator::{clamp_psd, estimate_streaming, rank_truncate_with, subspace_estimate, subspace_error};
use crate::linalg::{inf_norm, spectral_norm, sym_eig, top_k_projector, DataMatrix, SymMatrix};
use crate::sampling::{derive_seed, sample_gaussian, GaussianSpec, RngStream};
use crate::simnet::{aggregate, sweep_trial, CostLedger, SweepRow, TrialOutcome};
use crate::theory::{rescale_error, NormKind};

use super::checks::{all_checks, CheckResult};
use super::config::{ErrorTarget, ExperimentConfig, ExperimentKind};
use super::output::{loglog_slope, ResultRow};

/// Rows plus any pass/fail checks and summary tables.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub checks: Vec<CheckResult>,
    pub tables: BTreeMap<String, serde_json::Value>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    match config.experiment {
        ExperimentKind::Rates => run_rates(config),
        ExperimentKind::CompareHmt => run_compare_hmt(config),
        ExperimentKind::TheoryChecks => run_theory_checks(config),
        ExperimentKind::NetworkSweep => run_network_sweep(config),
        ExperimentKind::Lowrank => run_lowrank(config),
    }
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    d: usize,
    m: usize,
    n: usize,
    trial: usize,
    seed: u64,
}

/// All `(d, m, n, trial)` cells in output order.
fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for (d, m) in config.pairs() {
        for &n in &config.n_grid {
            for trial in 0..config.trials {
                let seed = derive_seed(config.master_seed, &[d as u64, m as u64, n as u64, trial as u64]);
                out.push(Cell { d, m, n, trial, seed });
            }
        }
    }
    out
}

/// Fresh `Σ` (stream 0) and `X` (stream 1) for a cell.
fn cell_data(config: &ExperimentConfig, c: &Cell) -> Result<(SymMatrix, DataMatrix)> {
    let sigma = super::sigma::make_sigma(
        config.sigma_kind,
        c.d,
        config.k,
        config.norm_target,
        &mut RngStream::new(c.seed, 0),
    )?;
    let x = sample_gaussian(&GaussianSpec::new(sigma.clone())?, c.n, &mut RngStream::new(c.seed, 1))?;
    let target = match config.error_target {
        ErrorTarget::Population => sigma,
        ErrorTarget::Sample => sample_covariance(&x),
    };
    Ok((target, x))
}

fn csl(config: &ExperimentConfig, c: &Cell, x: &DataMatrix) -> Result<crate::estimator::CovEstimate> {
    let mut est = estimate_streaming(x, c.m, derive_seed(c.seed, &[2]))?;
    if config.psd_clamp {
        est.matrix = clamp_psd(&est.matrix)?;
    }
    Ok(est)
}

fn make_row(
    config: &ExperimentConfig,
    c: &Cell,
    method: String,
    est: &SymMatrix,
    target: &SymMatrix,
    subspace_err: Option<f64>,
    started: Instant,
) -> Result<ResultRow> {
    let err = est - target;
    let err_inf = inf_norm(&err);
    let err_spec = spectral_norm(&err)?;
    let v = config.rescale_variant;
    Ok(ResultRow {
        experiment: config.experiment.to_string(),
        d: c.d,
        m: c.m,
        n: c.n,
        trial: c.trial,
        seed: c.seed,
        method,
        err_inf,
        err_spec,
        err_inf_rescaled: rescale_error(err_inf, c.n, c.m, c.d, NormKind::Infinity, v)?,
        err_spec_rescaled: rescale_error(err_spec, c.n, c.m, c.d, NormKind::Spectral, v)?,
        subspace_err,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

fn per_cell<F>(config: &ExperimentConfig, f: F) -> Result<Vec<ResultRow>>
where
    F: Fn(&Cell) -> Result<Vec<ResultRow>> + Sync + Send,
{
    let nested = cells(config).par_iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Mean of `field` over rows matching `(d, m, n, method)`.
fn mean_of(rows: &[ResultRow], d: usize, m: usize, n: usize, method: &str, field: fn(&ResultRow) -> f64) -> f64 {
    let picked: Vec<f64> = rows
        .iter()
        .filter(|r| r.d == d && r.m == m && r.n == n && r.method == method)
        .map(field)
        .collect();
    picked.iter().sum::<f64>() / picked.len() as f64
}

#[derive(Serialize)]
struct SlopeSummary {
    d: usize,
    m: usize,
    method: String,
    slope_err_inf: Option<f64>,
    slope_err_spec: Option<f64>,
    slope_err_inf_rescaled: Option<f64>,
    slope_err_spec_rescaled: Option<f64>,
}

fn slopes(config: &ExperimentConfig, rows: &[ResultRow], method: &str) -> Vec<SlopeSummary> {
    let ns: Vec<f64> = config.n_grid.iter().map(|&n| n as f64).collect();
    config
        .pairs()
        .into_iter()
        .map(|(d, m)| {
            let slope = |f: fn(&ResultRow) -> f64| {
                let ys: Vec<f64> = config.n_grid.iter().map(|&n| mean_of(rows, d, m, n, method, f)).collect();
                loglog_slope(&ns, &ys)
            };
            SlopeSummary {
                d,
                m,
                method: method.to_owned(),
                slope_err_inf: slope(|r| r.err_inf),
                slope_err_spec: slope(|r| r.err_spec),
                slope_err_inf_rescaled: slope(|r| r.err_inf_rescaled),
                slope_err_spec_rescaled: slope(|r| r.err_spec_rescaled),
            }
        })
        .collect()
}

pub fn run_rates(config: &ExperimentConfig) -> Result<RunOutput> {
    let rows = per_cell(config, |c| {
        let (target, x) = cell_data(config, c)?;
        let started = Instant::now();
        let est = csl(config, c, &x)?;
        Ok(vec![make_row(config, c, est.method.to_string(), &est.matrix, &target, None, started)?])
    })?;
    let mut tables = BTreeMap::new();
    tables.insert(
        "slopes".into(),
        serde_json::to_value(slopes(config, &rows, "debiased")).expect("serializable"),
    );
    Ok(RunOutput {
        rows,
        checks: Vec::new(),
        tables,
    })
}

pub fn run_compare_hmt(config: &ExperimentConfig) -> Result<RunOutput> {
    let rows = per_cell(config, |c| {
        let (target, x) = cell_data(config, c)?;
        let started = Instant::now();
        let est = csl(config, c, &x)?;
        let csl_row = make_row(config, c, est.method.to_string(), &est.matrix, &target, None, started)?;
        let started = Instant::now();
        let hmt = hmt_estimate_with(&x, c.m, config.hmt_oversampling, &mut RngStream::new(c.seed, 3))?;
        let hmt_row = make_row(config, c, hmt.method.to_string(), &hmt.matrix, &target, None, started)?;
        Ok(vec![csl_row, hmt_row])
    })?;

    let mut checks = Vec::new();
    let (n_lo, n_hi) = (config.n_grid[0], *config.n_grid.last().expect("validated"));
    if n_hi >= 100 * n_lo {
        for (d, m) in config.pairs() {
            let spec = |method: &str, n| mean_of(&rows, d, m, n, method, |r| r.err_spec);
            let csl_ratio = spec("debiased", n_hi) / spec("debiased", n_lo);
            let hmt_ratio = spec("hmt", n_hi) / spec("hmt", n_lo);
            checks.push(CheckResult {
                name: format!("csl_consistent_d{d}_m{m}"),
                passed: csl_ratio < 0.5,
                estimate: csl_ratio,
                target: 0.5,
                tolerance: 0.0,
                seed: config.master_seed,
                detail: format!("mean spectral error ratio n = {n_hi} over n = {n_lo}; must be < 0.5"),
            });
            checks.push(CheckResult {
                name: format!("hmt_plateau_d{d}_m{m}"),
                passed: hmt_ratio > 0.5,
                estimate: hmt_ratio,
                target: 0.5,
                tolerance: 0.0,
                seed: config.master_seed,
                detail: format!("mean spectral error ratio n = {n_hi} over n = {n_lo}; must be > 0.5"),
            });
            if config.norm_target == NormKind::Spectral && m < d {
                let floor = fixed_projection_floor(1.0, m, d)?;
                let hmt_hi = spec("hmt", n_hi);
                checks.push(CheckResult {
                    name: format!("hmt_above_floor_d{d}_m{m}"),
                    passed: hmt_hi > 0.25 * floor,
                    estimate: hmt_hi,
                    target: floor,
                    tolerance: 0.75 * floor,
                    seed: config.master_seed,
                    detail: format!("mean hmt spectral error at n = {n_hi} vs a quarter of the fixed-projection floor"),
                });
            }
        }
    }
    Ok(RunOutput {
        rows,
        checks,
        tables: BTreeMap::new(),
    })
}

pub fn run_lowrank(config: &ExperimentConfig) -> Result<RunOutput> {
    let k = config.k;
    let rows = per_cell(config, |c| {
        let (target, x) = cell_data(config, c)?;
        let started = Instant::now();
        let est = csl(config, c, &x)?;
        let full = make_row(config, c, est.method.to_string(), &est.matrix, &target, None, started)?;
        let started = Instant::now();
        let trunc = rank_truncate_with(&est, k, config.truncation_order)?;
        let truth = top_k_projector(&sym_eig(&target)?, k)?;
        let angle = subspace_error(&subspace_estimate(&est, k)?, &truth)?;
        let trunc_row = make_row(config, c, trunc.method.to_string(), &trunc.matrix, &target, Some(angle), started)?;
        Ok(vec![full, trunc_row])
    })?;

    let mut violations = 0;
    let mut worst = 0.0_f64;
    for pair in rows.chunks(2) {
        let (full, trunc) = (&pair[0], &pair[1]);
        worst = worst.max(trunc.err_spec / full.err_spec);
        if trunc.err_spec > 2.0 * full.err_spec {
            violations += 1;
        }
    }
    let checks = vec![CheckResult {
        name: "truncation_inequality".into(),
        passed: violations == 0,
        estimate: worst,
        target: 2.0,
        tolerance: 0.0,
        seed: config.master_seed,
        detail: format!("{violations} rows with truncated error above twice the full error"),
    }];
    Ok(RunOutput {
        rows,
        checks,
        tables: BTreeMap::new(),
    })
}

#[derive(Serialize)]
struct SweepTable {
    d: usize,
    n: usize,
    rows: Vec<SweepRow>,
}

pub fn run_network_sweep(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut d_grid: Vec<usize> = config.pairs().into_iter().map(|(d, _)| d).collect();
    d_grid.dedup();
    let mut rows = Vec::new();
    let mut tables = Vec::new();
    let mut checks = Vec::new();
    for d in d_grid {
        let ms: Vec<usize> = config.pairs().into_iter().filter(|&(dd, _)| dd == d).map(|(_, m)| m).collect();
        for &n in &config.n_grid {
            let seed = derive_seed(config.master_seed, &[d as u64, n as u64]);
            let sigma = super::sigma::make_sigma(
                config.sigma_kind,
                d,
                config.k,
                config.norm_target,
                &mut RngStream::new(seed, 0),
            )?;
            let spec = GaussianSpec::new(sigma)?;
            let mut summary = Vec::new();
            for &m in &ms {
                let timed = (0..config.trials)
                    .into_par_iter()
                    .map(|trial| {
                        let started = Instant::now();
                        let o = sweep_trial(&spec, n, m, config.protocol, trial, seed)?;
                        Ok((o, started.elapsed().as_secs_f64() * 1e3))
                    })
                    .collect::<Result<Vec<(TrialOutcome, f64)>>>()?;
                let v = config.rescale_variant;
                for (o, wall_ms) in &timed {
                    rows.push(ResultRow {
                        experiment: config.experiment.to_string(),
                        d,
                        m,
                        n,
                        trial: o.trial,
                        seed: o.seed,
                        method: config.protocol.to_string(),
                        err_inf: o.err_inf,
                        err_spec: o.err_spec,
                        err_inf_rescaled: rescale_error(o.err_inf, n, m, d, NormKind::Infinity, v)?,
                        err_spec_rescaled: rescale_error(o.err_spec, n, m, d, NormKind::Spectral, v)?,
                        subspace_err: None,
                        wall_ms: *wall_ms,
                    });
                }
                let outcomes: Vec<TrialOutcome> = timed.into_iter().map(|(o, _)| o).collect();
                let ledger_ok = outcomes
                    .iter()
                    .all(|o| o.ledger == CostLedger::predicted(config.protocol, n, d, m));
                checks.push(CheckResult {
                    name: format!("ledger_d{d}_n{n}_m{m}"),
                    passed: ledger_ok,
                    estimate: outcomes[0].ledger.scalars_transmitted as f64,
                    target: CostLedger::predicted(config.protocol, n, d, m).scalars_transmitted as f64,
                    tolerance: 0.0,
                    seed,
                    detail: "every trial's ledger matches the closed form".into(),
                });
                summary.push(aggregate(m, &outcomes));
            }
            for w in summary.windows(2) {
                let slack = 3.0 * w[0].se_err_spec.hypot(w[1].se_err_spec);
                checks.push(CheckResult {
                    name: format!("error_nonincreasing_d{d}_n{n}_m{}_to_m{}", w[0].m, w[1].m),
                    passed: w[1].mean_err_spec <= w[0].mean_err_spec + slack,
                    estimate: w[1].mean_err_spec,
                    target: w[0].mean_err_spec,
                    tolerance: slack,
                    seed,
                    detail: "mean spectral error may not grow by more than 3 standard errors".into(),
                });
            }
            tables.push(SweepTable { d, n, rows: summary });
        }
    }
    let mut t = BTreeMap::new();
    t.insert("sweep".into(), serde_json::to_value(tables).expect("serializable"));
    Ok(RunOutput { rows, checks, tables: t })
}

pub fn run_theory_checks(config: &ExperimentConfig) -> Result<RunOutput> {
    Ok(RunOutput {
        rows: Vec::new(),
        checks: all_checks(config.mc_reps, config.master_seed)?,
        tables: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind);
        c.d_grid = vec![6];
        c.m_grid = vec![2, 6];
        c.n_grid = vec![50, 200];
        c.trials = 3;
        c
    }

    #[test]
    fn rows_are_ordered_and_reproducible() {
        let c = small(ExperimentKind::Rates);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 3);
        let strip = |rows: &[ResultRow]| {
            rows.iter()
                .map(|r| ResultRow { wall_ms: 0.0, ..r.clone() })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a.rows), strip(&b.rows));
        let keys: Vec<_> = a.rows.iter().map(|r| (r.m, r.n, r.trial)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn full_rank_compare_coincides() {
        let mut c = small(ExperimentKind::CompareHmt);
        c.m_grid = vec![6];
        c.error_target = ErrorTarget::Sample;
        let out = run(&c).unwrap();
        for pair in out.rows.chunks(2) {
            assert!(pair[0].err_spec < 1e-9 && pair[1].err_spec < 1e-9);
        }
    }

    #[test]
    fn lowrank_full_k_rows_identical() {
        let mut c = small(ExperimentKind::Lowrank);
        c.k = 6;
        let out = run(&c).unwrap();
        assert!(out.passed());
        for pair in out.rows.chunks(2) {
            assert_eq!(pair[0].err_spec, pair[1].err_spec);
            assert_eq!(pair[1].method, "truncated(6)");
        }
    }

    #[test]
    fn sweep_ledgers_pass() {
        let c = small(ExperimentKind::NetworkSweep);
        let out = run(&c).unwrap();
        assert!(out.checks.iter().filter(|c| c.name.starts_with("ledger")).all(|c| c.passed));
        assert_eq!(out.rows.len(), 2 * 2 * 3);
    }
}
