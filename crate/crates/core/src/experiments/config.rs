//! Experiment configuration: TOML parsing, per-experiment defaults, validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::estimator::TruncationOrder;
use crate::simnet::Protocol;
use crate::theory::{NormKind, RescaleVariant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rates,
    CompareHmt,
    TheoryChecks,
    NetworkSweep,
    Lowrank,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Rates,
        ExperimentKind::CompareHmt,
        ExperimentKind::TheoryChecks,
        ExperimentKind::NetworkSweep,
        ExperimentKind::Lowrank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Rates => "rates",
            ExperimentKind::CompareHmt => "compare_hmt",
            ExperimentKind::TheoryChecks => "theory_checks",
            ExperimentKind::NetworkSweep => "network_sweep",
            ExperimentKind::Lowrank => "lowrank",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Covariance ensemble drawn fresh for every trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    Identity,
    /// `QΛQ^T`, Haar `Q`, eigenvalues uniform on `[0.1, 1]`.
    RandomPsd,
    /// `k` spikes of height in `[1, 1.5]` over a `0.1 I` floor.
    Spiked,
    /// Rank `k`, nonzero eigenvalues uniform on `[0.5, 1]`.
    RankK,
}

/// What the errors are measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTarget {
    Population,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub d_grid: Vec<usize>,
    pub m_grid: Vec<usize>,
    /// Explicit `(d, m)` pairs; replaces the `d_grid x m_grid` product.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dm_pairs: Option<Vec<(usize, usize)>>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    /// Σ is scaled to unit norm of this kind.
    pub norm_target: NormKind,
    pub sigma_kind: SigmaKind,
    /// Rank for `spiked`, `rank_k` and the `lowrank` truncation.
    pub k: usize,
    pub rescale_variant: RescaleVariant,
    pub error_target: ErrorTarget,
    pub hmt_oversampling: usize,
    pub truncation_order: TruncationOrder,
    pub psd_clamp: bool,
    pub protocol: Protocol,
    pub mc_reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// `count` points log-spaced from `lo` to `hi`, rounded.
pub fn log_grid(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as usize)
        .collect()
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            d_grid: vec![16, 32],
            m_grid: vec![1, 2, 4],
            dm_pairs: None,
            n_grid: log_grid(100, 100_000, 5),
            trials: 20,
            master_seed: 20_240_601,
            norm_target: NormKind::Infinity,
            sigma_kind: SigmaKind::RandomPsd,
            k: 2,
            rescale_variant: RescaleVariant::Text,
            error_target: ErrorTarget::Population,
            hmt_oversampling: 0,
            truncation_order: TruncationOrder::Signed,
            psd_clamp: false,
            protocol: Protocol::SynchronizedSeed,
            mc_reps: 100_000,
            output: None,
            threads: None,
        };
        match kind {
            ExperimentKind::Rates | ExperimentKind::TheoryChecks => base,
            ExperimentKind::CompareHmt => Self {
                d_grid: vec![40],
                m_grid: vec![5],
                n_grid: vec![1_000, 10_000, 100_000],
                trials: 10,
                norm_target: NormKind::Spectral,
                ..base
            },
            ExperimentKind::NetworkSweep => Self {
                d_grid: vec![16],
                m_grid: vec![1, 2, 4, 8, 16],
                n_grid: vec![2_000],
                trials: 10,
                norm_target: NormKind::Spectral,
                ..base
            },
            ExperimentKind::Lowrank => Self {
                d_grid: vec![16],
                m_grid: vec![2, 4, 8],
                n_grid: vec![1_000, 10_000],
                trials: 10,
                norm_target: NormKind::Spectral,
                sigma_kind: SigmaKind::RankK,
                ..base
            },
        }
    }

    /// Parses TOML over the defaults for `kind`. With `kind = None` the file
    /// must name its experiment.
    pub fn from_toml_str(text: &str, kind: Option<ExperimentKind>) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let named = match table.get("experiment") {
            None => None,
            Some(v) => Some(
                v.clone()
                    .try_into::<ExperimentKind>()
                    .map_err(|e| ConfigError::field("experiment", e.to_string()))?,
            ),
        };
        let kind = match (kind, named) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError::field(
                    "experiment",
                    format!("config names {b} but {a} was requested"),
                ))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(ConfigError::field("experiment", "missing".into())),
        };
        let mut merged = toml::Table::try_from(Self::defaults(kind))
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        merged.extend(table);
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path, kind: Option<ExperimentKind>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, kind)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The `(d, m)` combinations to run, in row order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        match &self.dm_pairs {
            Some(p) => p.clone(),
            None => self
                .d_grid
                .iter()
                .flat_map(|&d| self.m_grid.iter().filter(move |&&m| m <= d).map(move |&m| (d, m)))
                .collect(),
        }
    }

    /// Every problem found, keyed by field name.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |field: &'static str, message: String| issues.push(FieldIssue { field, message });

        if self.d_grid.is_empty() {
            bad("d_grid", "must be nonempty".into());
        }
        if let Some(d) = self.d_grid.iter().find(|&&d| d < 2) {
            bad("d_grid", format!("dimensions must be >= 2, got {d}"));
        }
        if self.m_grid.is_empty() {
            bad("m_grid", "must be nonempty".into());
        }
        if self.m_grid.contains(&0) {
            bad("m_grid", "measurement counts must be >= 1".into());
        }
        if let Some(pairs) = &self.dm_pairs {
            if pairs.is_empty() {
                bad("dm_pairs", "must be nonempty when given".into());
            }
            for &(d, m) in pairs {
                if d < 2 || m == 0 || m > d {
                    bad("dm_pairs", format!("need 2 <= d and 1 <= m <= d, got ({d}, {m})"));
                }
            }
        } else if !self.d_grid.is_empty() && !self.m_grid.is_empty() && self.pairs().is_empty() {
            bad("m_grid", "no m is <= any d in d_grid".into());
        }
        if self.n_grid.is_empty() {
            bad("n_grid", "must be nonempty".into());
        }
        if self.n_grid.contains(&0) {
            bad("n_grid", "sample counts must be >= 1".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            bad("n_grid", "must be strictly increasing".into());
        }
        if self.trials == 0 {
            bad("trials", "must be >= 1".into());
        }
        if self.mc_reps < 2 {
            bad("mc_reps", "must be >= 2".into());
        }
        if self.threads == Some(0) {
            bad("threads", "must be >= 1".into());
        }

        let pairs = self.pairs();
        let needs_k = matches!(self.sigma_kind, SigmaKind::Spiked | SigmaKind::RankK)
            || self.experiment == ExperimentKind::Lowrank;
        if needs_k {
            if let Some(&(d, _)) = pairs.iter().find(|&&(d, _)| self.k == 0 || self.k > d) {
                bad("k", format!("need 1 <= k <= d, got k = {} with d = {d}", self.k));
            }
        }
        if self.experiment == ExperimentKind::CompareHmt {
            let n_min = self.n_grid.iter().copied().min().unwrap_or(0);
            if let Some(&(d, m)) = pairs
                .iter()
                .find(|&&(d, m)| m + self.hmt_oversampling > d.min(n_min))
            {
                bad(
                    "hmt_oversampling",
                    format!("sketch width m + oversampling exceeds min(d, n) for (d, m) = ({d}, {m})"),
                );
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("invalid TOML: {0}")]
    Parse(String),
    #[error("invalid config: {}", format_issues(.0))]
    Invalid(Vec<FieldIssue>),
}

impl ConfigError {
    fn field(field: &'static str, message: String) -> Self {
        ConfigError::Invalid(vec![FieldIssue { field, message }])
    }

    /// Field names mentioned by an [`ConfigError::Invalid`].
    pub fn fields(&self) -> Vec<&'static str> {
        match self {
            ConfigError::Invalid(issues) => issues.iter().map(|i| i.field).collect(),
            _ => Vec::new(),
        }
    }
}

fn format_issues(issues: &[FieldIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("{}: {}", i.field, i.message))
        .collect::<Vec<_>>()
        .join("; ")
}
