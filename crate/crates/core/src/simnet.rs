//! In-process simulation of a sensor network reporting to a fusion center.
//!
//! Sensor `t` holds `x_t`. Depending on the [`Protocol`] it transmits the
//! raw vector, the back-projection `A_t A_t^T x_t`, or just the `m`
//! coordinates `A_t^T x_t` (the fusion center regenerates `A_t` from the
//! shared seed). The [`CostLedger`] counts scalars, not bytes.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::sample_covariance;
use crate::error::{check_range, Error, Result};
use crate::estimator::{debias, observed_covariance_from_backprojections, CovEstimate, Method};
use crate::linalg::{self, inf_norm, DataMatrix};
use crate::sampling::{derive_seed, sample_basis_for, sample_gaussian, GaussianSpec, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// No compression: each sensor measures and sends all `d` coordinates.
    NaiveFull,
    /// Sensors send `Φ_t x_t ∈ R^d`.
    Backprojected,
    /// Sensors send `A_t^T x_t ∈ R^m`; bases are agreed before acquisition.
    SynchronizedSeed,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [
        Protocol::NaiveFull,
        Protocol::Backprojected,
        Protocol::SynchronizedSeed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::NaiveFull => "naive_full",
            Protocol::Backprojected => "backprojected",
            Protocol::SynchronizedSeed => "synchronized_seed",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown protocol {s:?}")))
    }
}

/// Measurement and communication totals for one network run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub scalar_measurements: u64,
    pub scalars_transmitted: u64,
    pub messages: u64,
}

impl CostLedger {
    /// Closed-form totals for `n` sensors.
    pub fn predicted(protocol: Protocol, n: usize, d: usize, m: usize) -> Self {
        let (n, d, m) = (n as u64, d as u64, m as u64);
        let (measured, sent) = match protocol {
            Protocol::NaiveFull => (n * d, n * d),
            Protocol::Backprojected => (n * m, n * d),
            Protocol::SynchronizedSeed => (n * m, n * m),
        };
        Self {
            scalar_measurements: measured,
            scalars_transmitted: sent,
            messages: n,
        }
    }
}

struct Message {
    measurements: usize,
    payload: Vec<f64>,
}

struct Sensor<'a> {
    id: usize,
    signal: &'a [f64],
}

impl Sensor<'_> {
    fn transmit(&self, protocol: Protocol, m: usize, seed: u64) -> Result<Message> {
        let d = self.signal.len();
        Ok(match protocol {
            Protocol::NaiveFull => Message {
                measurements: d,
                payload: self.signal.to_vec(),
            },
            Protocol::Backprojected => {
                let basis = sample_basis_for(seed, self.id, d, m)?;
                Message {
                    measurements: m,
                    payload: basis.lift(&basis.compress(self.signal)),
                }
            }
            Protocol::SynchronizedSeed => {
                let basis = sample_basis_for(seed, self.id, d, m)?;
                Message {
                    measurements: m,
                    payload: basis.compress(self.signal),
                }
            }
        })
    }
}

/// Runs every sensor, delivers the messages, and returns the fusion
/// center's estimate with the cost tally.
///
/// The compressive protocols reproduce `estimate(compress(x, m, seed))`
/// bit for bit; `naive_full` reproduces the sample covariance.
pub fn run_network(
    x: &DataMatrix,
    m: usize,
    protocol: Protocol,
    seed: u64,
) -> Result<(CovEstimate, CostLedger)> {
    let (d, n) = (x.dim(), x.count());
    let m = match protocol {
        Protocol::NaiveFull => d,
        _ => {
            check_range("m", m, 1, d)?;
            m
        }
    };
    let inbox = (0..n)
        .into_par_iter()
        .map(|t| {
            Sensor {
                id: t,
                signal: x.column(t),
            }
            .transmit(protocol, m, seed)
        })
        .collect::<Result<Vec<Message>>>()?;

    let mut ledger = CostLedger::default();
    for msg in &inbox {
        ledger.scalar_measurements += msg.measurements as u64;
        ledger.scalars_transmitted += msg.payload.len() as u64;
        ledger.messages += 1;
    }

    let estimate = match protocol {
        Protocol::NaiveFull => {
            let data: Vec<f64> = inbox.into_iter().flat_map(|msg| msg.payload).collect();
            CovEstimate {
                matrix: sample_covariance(&DataMatrix::from_column_major(d, n, data)?),
                d,
                m: d,
                n,
                method: Method::SampleCovariance,
            }
        }
        Protocol::Backprojected | Protocol::SynchronizedSeed => {
            let lifted = inbox
                .into_par_iter()
                .enumerate()
                .map(|(t, msg)| match protocol {
                    Protocol::SynchronizedSeed => {
                        Ok(sample_basis_for(seed, t, d, m)?.lift(&msg.payload))
                    }
                    _ => Ok(msg.payload),
                })
                .collect::<Result<Vec<_>>>()?;
            let s1 = observed_covariance_from_backprojections(&lifted, d, m)?;
            CovEstimate {
                matrix: debias(&s1, m)?,
                d,
                m,
                n,
                method: Method::Debiased,
            }
        }
    };
    Ok((estimate, ledger))
}

/// Errors of one network run against the population covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    pub err_inf: f64,
    pub err_spec: f64,
    pub ledger: CostLedger,
}

/// Aggregate over trials for one measurement budget `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub mean_err_inf: f64,
    pub mean_err_spec: f64,
    pub se_err_inf: f64,
    pub se_err_spec: f64,
    pub ledger: CostLedger,
}

/// One trial: data from stream `(derive(seed, [trial]), 0)`, shared across
/// all `m`; bases from `derive(seed, [trial, m])`.
pub fn sweep_trial(
    spec: &GaussianSpec,
    n: usize,
    m: usize,
    protocol: Protocol,
    trial: usize,
    seed: u64,
) -> Result<TrialOutcome> {
    let data_seed = derive_seed(seed, &[trial as u64]);
    let x = sample_gaussian(spec, n, &mut RngStream::new(data_seed, 0))?;
    let basis_seed = derive_seed(seed, &[trial as u64, m as u64]);
    let (est, ledger) = run_network(&x, m, protocol, basis_seed)?;
    let err = &est.matrix - spec.covariance();
    Ok(TrialOutcome {
        m,
        trial,
        seed: basis_seed,
        err_inf: inf_norm(&err),
        err_spec: linalg::spectral_norm(&err)?,
        ledger,
    })
}

pub fn aggregate(m: usize, outcomes: &[TrialOutcome]) -> SweepRow {
    let mean_se = |f: fn(&TrialOutcome) -> f64| {
        let k = outcomes.len() as f64;
        let mean = outcomes.iter().map(f).sum::<f64>() / k;
        let var = if outcomes.len() > 1 {
            outcomes.iter().map(|o| (f(o) - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        (mean, (var / k).sqrt())
    };
    let (mean_err_inf, se_err_inf) = mean_se(|o| o.err_inf);
    let (mean_err_spec, se_err_spec) = mean_se(|o| o.err_spec);
    SweepRow {
        m,
        mean_err_inf,
        mean_err_spec,
        se_err_inf,
        se_err_spec,
        ledger: outcomes.first().map(|o| o.ledger).unwrap_or_default(),
    }
}

/// Mean errors and costs for each `m` in `m_grid`.
pub fn sweep_tradeoff(
    spec: &GaussianSpec,
    n: usize,
    m_grid: &[usize],
    protocol: Protocol,
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if trials == 0 || m_grid.is_empty() {
        return Err(Error::InvalidInput("need at least one trial and one m".into()));
    }
    m_grid
        .iter()
        .map(|&m| {
            let outcomes = (0..trials)
                .into_par_iter()
                .map(|trial| sweep_trial(spec, n, m, protocol, trial, seed))
                .collect::<Result<Vec<_>>>()?;
            Ok(aggregate(m, &outcomes))
        })
        .collect()
}
