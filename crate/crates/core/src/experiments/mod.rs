//! Monte Carlo experiments.
//!
//! An [`ExperimentConfig`] describes a grid of `(n, m/n)` cells with a number
//! of trials per cell. Trials inside a cell run on a rayon pool; cells are
//! processed in grid order and rows are collected in trial order, so the
//! output does not depend on the number of workers.
//!
//! The seed of trial `t` in cell `(n, ratio_values[r])` is
//! `derive_seed(base_seed, [label(experiment), n, r, t])`. The ensemble,
//! signal and noise of a trial use `derive_seed(trial_seed, [label(tag)])`
//! with tags `"ensemble"`, `"signal"` and `"noise"`.

mod runs;
mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{Model, NoiseModel};
use crate::rng::{derive_seed, label};
use crate::solver::SolverOptions;

pub use runs::{run_cert_sweep, run_stability, run_transition, run_universality, verify_injectivity};
pub use table::{max_finite, mean_bool, median, Cell, ExperimentTable, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Transition,
    Universality,
    Stability,
    Injectivity,
    CertSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Transition => "transition",
            ExperimentKind::Universality => "universality",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Injectivity => "injectivity",
            ExperimentKind::CertSweep => "cert_sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentKind::Transition,
            ExperimentKind::Universality,
            ExperimentKind::Stability,
            ExperimentKind::Injectivity,
            ExperimentKind::CertSweep,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    AdversarialSign,
}

impl NoiseKind {
    pub fn at(self, level: f64) -> NoiseModel {
        match self {
            NoiseKind::Gaussian => NoiseModel::Gaussian { sigma: level },
            NoiseKind::Uniform => NoiseModel::Uniform { eta: level },
            NoiseKind::AdversarialSign => NoiseModel::AdversarialSign { epsilon: level },
        }
    }
}

/// Noise levels swept by the stability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub levels: Vec<f64>,
    /// Multiply each level by the mean of the clean `b` of the trial.
    #[serde(default)]
    pub relative_to_mean_b: bool,
}

fn default_model() -> Model {
    Model::RealGaussian
}

fn default_n_values() -> Vec<usize> {
    vec![8, 16, 32]
}

fn default_ratio_values() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0]
}

fn default_trials() -> usize {
    50
}

fn default_success_tol() -> f64 {
    1e-3
}

fn default_ensembles() -> usize {
    5
}

fn default_threshold() -> f64 {
    crate::certificate::DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_model")]
    pub model: Model,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    #[serde(default = "default_ratio_values")]
    pub ratio_values: Vec<f64>,
    /// Trials per cell; for universality, the number of random signals per
    /// ensemble.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    #[serde(default)]
    pub output_path: Option<String>,
    /// Universality: ensembles per cell.
    #[serde(default = "default_ensembles")]
    pub ensembles: usize,
    /// Universality: also solve for every standard basis vector.
    #[serde(default)]
    pub include_basis: bool,
    /// Certificate sweep: truncation threshold.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            model: default_model(),
            n_values: default_n_values(),
            ratio_values: default_ratio_values(),
            trials: default_trials(),
            base_seed: 0,
            noise: None,
            success_tol: default_success_tol(),
            output_path: None,
            ensembles: default_ensembles(),
            include_basis: false,
            threshold: default_threshold(),
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad("n_values must be a nonempty list of positive integers".into());
        }
        if self.ratio_values.is_empty() || self.ratio_values.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("ratio_values must be a nonempty list of positive numbers".into());
        }
        if !(self.success_tol.is_finite() && self.success_tol > 0.0) {
            return bad(format!("success_tol must be positive, got {}", self.success_tol));
        }
        if self.model.is_explicit() {
            return bad(format!(
                "experiments sample their ensembles; `{}` is not a sampled model",
                self.model
            ));
        }
        match self.experiment {
            ExperimentKind::Universality if self.ensembles == 0 => {
                return bad("ensembles must be at least 1".into());
            }
            ExperimentKind::Stability => {
                let Some(noise) = &self.noise else {
                    return bad("stability needs a noise spec".into());
                };
                if noise.levels.is_empty() || noise.levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return bad("noise levels must be a nonempty list of nonnegative numbers".into());
                }
            }
            ExperimentKind::Injectivity | ExperimentKind::CertSweep
                if self.model.field() != crate::scalar::Field::Real =>
            {
                return Err(Error::Unsupported(format!(
                    "{} is implemented for real models only",
                    self.experiment
                )));
            }
            _ => {}
        }
        if self.experiment == ExperimentKind::CertSweep && !(self.threshold.is_finite() && self.threshold > 0.0) {
            return bad(format!("threshold must be positive, got {}", self.threshold));
        }
        Ok(())
    }

    /// `m = max(1, round(ratio · n))`.
    pub fn m_for(n: usize, ratio: f64) -> usize {
        ((ratio * n as f64).round() as usize).max(1)
    }

    pub fn trial_seed(&self, n: usize, ratio_index: usize, trial: usize) -> u64 {
        derive_seed(
            self.base_seed,
            &[
                label(self.experiment.name()),
                n as u64,
                ratio_index as u64,
                trial as u64,
            ],
        )
    }

    /// Cells in output order: `(n, ratio_index, ratio, m)`.
    pub fn cells(&self) -> Vec<(usize, usize, f64, usize)> {
        self.n_values
            .iter()
            .flat_map(|&n| {
                self.ratio_values
                    .iter()
                    .enumerate()
                    .map(move |(r, &ratio)| (n, r, ratio, Self::m_for(n, ratio)))
            })
            .collect()
    }
}

pub(crate) fn sub_seed(trial_seed: u64, tag: &str) -> u64 {
    derive_seed(trial_seed, &[label(tag)])
}

/// Runs `config` on a pool of `jobs` workers (all cores when `None`),
/// reporting each finished cell through `progress`.
pub fn run_experiment(
    config: &ExperimentConfig,
    jobs: Option<usize>,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<ExperimentTable> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::InvalidArgument("jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match config.experiment {
        ExperimentKind::Transition => run_transition(config, progress),
        ExperimentKind::Universality => run_universality(config, progress),
        ExperimentKind::Stability => run_stability(config, progress),
        ExperimentKind::Injectivity => verify_injectivity(config, progress),
        ExperimentKind::CertSweep => run_cert_sweep(config, progress),
    })
}

fn ratio_label(r: f64) -> String {
    format!("{r}")
}

/// Whitespace-delimited curves, one file per curve: `(file name, contents)`.
pub fn plot_data(kind: ExperimentKind, table: &ExperimentTable) -> Vec<(String, String)> {
    let agg = &table.agg;
    let ns = agg.f64s("n");
    let ratios = agg.f64s("ratio");
    let mut keys: Vec<(usize, String)> = Vec::new();
    let mut files: Vec<(String, String)> = Vec::new();
    let curve_of = |i: usize| -> (usize, String) {
        let n = ns[i] as usize;
        match kind {
            ExperimentKind::Stability => (n, format!("stability_n{n}_r{}.dat", ratio_label(ratios[i]))),
            _ => (n, format!("{}_n{n}.dat", kind.name())),
        }
    };
    let (x_col, y_cols): (&str, &[&str]) = match kind {
        ExperimentKind::Transition => ("ratio", &["success_rate"]),
        ExperimentKind::Universality => ("ratio", &["all_recovered_rate"]),
        ExperimentKind::Stability => ("median_noise_l1_over_m", &["median_frob_error"]),
        ExperimentKind::Injectivity => ("ratio", &["both_rate"]),
        ExperimentKind::CertSweep => ("ratio", &["inexact_rate", "core_rate", "median_tperp_shift_norm"]),
    };
    let x = agg.f64s(x_col);
    let ys: Vec<Vec<f64>> = y_cols.iter().map(|c| agg.f64s(c)).collect();
    for i in 0..agg.len() {
        let key = curve_of(i);
        let idx = match keys.iter().position(|k| *k == key) {
            Some(p) => p,
            None => {
                keys.push(key.clone());
                files.push((key.1.clone(), format!("# {x_col} {}\n", y_cols.join(" "))));
                files.len() - 1
            }
        };
        let mut line = format!("{}", x[i]);
        for y in &ys {
            line.push_str(&format!(" {}", y[i]));
        }
        line.push('\n');
        files[idx].1.push_str(&line);
    }
    files
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_from_minimal_json() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"experiment": "transition"}"#).unwrap();
        assert_eq!(c, ExperimentConfig::new(ExperimentKind::Transition));
        assert_eq!(c.n_values, vec![8, 16, 32]);
        assert_eq!(c.ratio_values.len(), 9);
        assert_eq!(c.trials, 50);
        assert_eq!(c.success_tol, 1e-3);
        c.validate().unwrap();
    }

    #[test]
    fn config_rejects_unknown_fields_and_bad_values() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "transition", "trails": 3}"#).is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::Transition);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::Transition);
        c.ratio_values = vec![1.0, -2.0];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::Transition);
        c.success_tol = 0.0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::new(ExperimentKind::Stability).validate().is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::CertSweep);
        c.model = Model::ComplexGaussian;
        assert!(matches!(c.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let c = ExperimentConfig::new(ExperimentKind::Transition);
        let mut seen = std::collections::HashSet::new();
        for (n, r, _, _) in c.cells() {
            for t in 0..10 {
                assert!(seen.insert(c.trial_seed(n, r, t)));
            }
        }
        let mut d = c.clone();
        d.experiment = ExperimentKind::Stability;
        assert_ne!(c.trial_seed(8, 0, 0), d.trial_seed(8, 0, 0));
        assert_eq!(c.trial_seed(8, 0, 0), c.clone().trial_seed(8, 0, 0));
    }

    #[test]
    fn m_rounds_and_stays_positive() {
        assert_eq!(ExperimentConfig::m_for(8, 1.5), 12);
        assert_eq!(ExperimentConfig::m_for(3, 0.1), 1);
        assert_eq!(ExperimentConfig::m_for(20, 10.0), 200);
    }
}
