use num_complex::Complex64;
use rayon::prelude::*;

use super::table::{max_finite, mean_bool, median, Cell, ExperimentTable, Table};
use super::{sub_seed, ExperimentConfig, ExperimentKind};
use crate::certificate::build_certificate_with;
use crate::error::{Error, Result};
use crate::linalg::{phase_distance, project_psd, spectral_norm, SymMatrix};
use crate::measurement::{add_noise, sample_ensemble, Ensemble, Observations};
use crate::rng::{derive_seed, label, unit_vector, Stream};
use crate::scalar::{norm2, Field, Scalar};
use crate::solver::{solve, SolverResult};

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    config.validate()?;
    if config.experiment != kind {
        return Err(Error::InvalidArgument(format!(
            "config is for `{}`, not `{kind}`",
            config.experiment
        )));
    }
    Ok(())
}

fn cell_done(progress: &(dyn Fn(&str) + Sync), kind: ExperimentKind, n: usize, ratio: f64, m: usize) {
    progress(&format!("{kind}: n={n} ratio={ratio} m={m} done"));
}

fn error_text(e: &Error) -> String {
    format!("{}: {e}", e.kind())
}

/// Outcome of one noiseless or noisy solve against a known signal.
struct SolveOutcome {
    rel_frob_error: f64,
    frob_error: f64,
    signal_error: f64,
    iterations: usize,
    converged: bool,
    trace: f64,
    error: String,
}

impl SolveOutcome {
    fn failed(e: &Error) -> Self {
        Self {
            rel_frob_error: f64::NAN,
            frob_error: f64::NAN,
            signal_error: f64::NAN,
            iterations: 0,
            converged: false,
            trace: f64::NAN,
            error: error_text(e),
        }
    }

    fn success(&self, tol: f64) -> bool {
        self.rel_frob_error <= tol
    }
}

fn solve_against<S: Scalar>(
    ens: &Ensemble<S>,
    obs: &Observations<S>,
    x0: &[S],
    config: &ExperimentConfig,
) -> SolveOutcome {
    let run = || -> Result<(SolverResult<S>, f64)> {
        let r = solve(ens, obs, &config.solver)?;
        let d = phase_distance(&r.x_hat, x0)?;
        Ok((r, d))
    };
    match run() {
        Ok((r, d)) => SolveOutcome {
            rel_frob_error: r.relative_frob_error(x0),
            frob_error: r.frob_error(x0),
            signal_error: d,
            iterations: r.iterations,
            converged: r.converged,
            trace: r.trace,
            error: String::new(),
        },
        Err(e) => SolveOutcome::failed(&e),
    }
}

fn trials_in_parallel<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).into_par_iter().map(f).collect()
}

// ---------------------------------------------------------------- transition

/// Noiseless recovery of a fresh unit-norm signal on a fresh ensemble per
/// trial.
///
/// Raw columns: `n, m, trial, seed, rel_frob_error, success, iterations,
/// converged, trace, error`. Aggregates per cell: `n, ratio, m, trials,
/// success_rate, median_rel_frob_error, mean_iterations, failures`.
pub fn run_transition(config: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<ExperimentTable> {
    expect_kind(config, ExperimentKind::Transition)?;
    match config.model.field() {
        Field::Real => transition_typed::<f64>(config, progress),
        Field::Complex => transition_typed::<Complex64>(config, progress),
    }
}

fn transition_typed<S: Scalar>(config: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<ExperimentTable> {
    let mut raw = Table::new(&[
        "n",
        "m",
        "trial",
        "seed",
        "rel_frob_error",
        "success",
        "iterations",
        "converged",
        "trace",
        "error",
    ]);
    let mut agg = Table::new(&[
        "n",
        "ratio",
        "m",
        "trials",
        "success_rate",
        "median_rel_frob_error",
        "mean_iterations",
        "failures",
    ]);
    for (n, ri, ratio, m) in config.cells() {
        let outcomes = trials_in_parallel(config.trials, |t| {
            let seed = config.trial_seed(n, ri, t);
            let run = || -> Result<SolveOutcome> {
                let ens = sample_ensemble::<S>(config.model, n, m, sub_seed(seed, "ensemble"))?;
                let x0: Vec<S> = unit_vector(sub_seed(seed, "signal"), n);
                let obs = ens.measure(&x0)?;
                Ok(solve_against(&ens, &obs, &x0, config))
            };
            (seed, run().unwrap_or_else(|e| SolveOutcome::failed(&e)))
        });
        let first = raw.len();
        for (t, (seed, o)) in outcomes.iter().enumerate() {
            raw.push(vec![
                n.into(),
                m.into(),
                t.into(),
                (*seed).into(),
                o.rel_frob_error.into(),
                o.success(config.success_tol).into(),
                o.iterations.into(),
                o.converged.into(),
                o.trace.into(),
                o.error.clone().into(),
            ]);
        }
        let errs: Vec<f64> = outcomes.iter().map(|(_, o)| o.rel_frob_error).collect();
        let ok: Vec<bool> = raw.bools("success")[first..].to_vec();
        let iters = outcomes.iter().map(|(_, o)| o.iterations as f64).sum::<f64>() / outcomes.len() as f64;
        let failures = outcomes.iter().filter(|(_, o)| !o.error.is_empty()).count();
        agg.push(vec![
            n.into(),
            ratio.into(),
            m.into(),
            config.trials.into(),
            mean_bool(&ok).into(),
            median(&errs).into(),
            iters.into(),
            failures.into(),
        ]);
        cell_done(progress, config.experiment, n, ratio, m);
    }
    Ok(ExperimentTable { raw, agg })
}

// -------------------------------------------------------------- universality

/// Many signals against one ensemble.
///
/// Trial `e` of a cell is ensemble `e` (`config.ensembles` of them); each
/// ensemble is probed with `config.trials` random unit signals, followed by
/// the standard basis vectors when `include_basis` is set. Signal `k` uses
/// seed `derive_seed(trial_seed, [label("signal"), k])`.
///
/// Raw columns: `n, m, trial, seed, signal, signal_kind, rel_frob_error,
/// success, iterations, converged, error`. Aggregates per ensemble: `n,
/// ratio, m, trial, seed, signals, recovered, all_recovered,
/// max_rel_frob_error, all_recovered_rate` where the last column is the
/// fraction of the cell's ensembles with every signal recovered.
pub fn run_universality(config: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<ExperimentTable> {
    expect_kind(config, ExperimentKind::Universality)?;
    match config.model.field() {
        Field::Real => universality_typed::<f64>(config, progress),
        Field::Complex => universality_typed::<Complex64>(config, progress),
    }
}

fn universality_typed<S: Scalar>(
    config: &ExperimentConfig,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<ExperimentTable> {
    let mut raw = Table::new(&[
        "n",
        "m",
        "trial",
        "seed",
        "signal",
        "signal_kind",
        "rel_frob_error",
        "success",
        "iterations",
        "converged",
        "error",
    ]);
    let mut agg = Table::new(&[
        "n",
        "ratio",
        "m",
        "trial",
        "seed",
        "signals",
        "recovered",
        "all_recovered",
        "max_rel_frob_error",
        "all_recovered_rate",
    ]);
    for (n, ri, ratio, m) in config.cells() {
        let signals = config.trials + if config.include_basis { n } else { 0 };
        let seeds: Vec<u64> = (0..config.ensembles).map(|e| config.trial_seed(n, ri, e)).collect();
        let ensembles: Vec<Result<Ensemble<S>>> = seeds
            .iter()
            .map(|&s| sample_ensemble::<S>(config.model, n, m, sub_seed(s, "ensemble")))
            .collect();
        let jobs: Vec<(usize, usize)> = (0..config.ensembles)
            .flat_map(|e| (0..signals).map(move |k| (e, k)))
            .collect();
        let outcomes: Vec<(String, SolveOutcome)> = jobs
            .par_iter()
            .map(|&(e, k)| {
                let (kind, x0): (String, Vec<S>) = if k < config.trials {
                    (
                        "random".into(),
                        unit_vector(derive_seed(seeds[e], &[label("signal"), k as u64]), n),
                    )
                } else {
                    let j = k - config.trials;
                    let mut v = vec![S::zero(); n];
                    v[j] = S::one();
                    (format!("basis:{j}"), v)
                };
                let outcome = match &ensembles[e] {
                    Ok(ens) => match ens.measure(&x0) {
                        Ok(obs) => solve_against(ens, &obs, &x0, config),
                        Err(err) => SolveOutcome::failed(&err),
                    },
                    Err(err) => SolveOutcome::failed(err),
                };
                (kind, outcome)
            })
            .collect();
        let mut per_ensemble = Vec::with_capacity(config.ensembles);
        for (e, chunk) in outcomes.chunks(signals).enumerate() {
            for (k, (kind, o)) in chunk.iter().enumerate() {
                raw.push(vec![
                    n.into(),
                    m.into(),
                    e.into(),
                    seeds[e].into(),
                    k.into(),
                    kind.as_str().into(),
                    o.rel_frob_error.into(),
                    o.success(config.success_tol).into(),
                    o.iterations.into(),
                    o.converged.into(),
                    o.error.clone().into(),
                ]);
            }
            let recovered = chunk.iter().filter(|(_, o)| o.success(config.success_tol)).count();
            let errs: Vec<f64> = chunk.iter().map(|(_, o)| o.rel_frob_error).collect();
            let worst = if errs.iter().any(|v| v.is_nan()) {
                f64::NAN
            } else {
                max_finite(&errs)
            };
            per_ensemble.push((e, recovered, worst));
        }
        let rate = mean_bool(&per_ensemble.iter().map(|p| p.1 == signals).collect::<Vec<_>>());
        for (e, recovered, worst) in per_ensemble {
            agg.push(vec![
                n.into(),
                ratio.into(),
                m.into(),
                e.into(),
                seeds[e].into(),
                signals.into(),
                recovered.into(),
                (recovered == signals).into(),
                worst.into(),
                rate.into(),
            ]);
        }
        cell_done(progress, config.experiment, n, ratio, m);
    }
    Ok(ExperimentTable { raw, agg })
}

// ----------------------------------------------------------------- stability

/// Noisy recovery over a list of noise levels.
///
/// Every level of a trial shares the trial's ensemble, signal and noise seed,
/// so the levels differ only in scale for sign and uniform noise. With
/// `relative_to_mean_b` the absolute level is `level · mean(b)` of the clean
/// data.
///
/// Raw columns: `n, m, trial, seed, level, noise_level, noise_l1_over_m,
/// frob_error, rel_frob_error, signal_error, c0_ratio, signal_c0_ratio,
/// success, iterations, converged, error` with
/// `c0_ratio = frob_error / (‖w‖₁/m)` and
/// `signal_c0_ratio = signal_error / min(‖x0‖, ‖w‖₁/(m‖x0‖))`, both NaN when
/// `w = 0`. Aggregates per `(n, ratio, level)`: `n, ratio, m, level, trials,
/// median_noise_l1_over_m, median_frob_error, fitted_c0, median_c0,
/// max_signal_c0_ratio, success_rate`, where `fitted_c0` is the largest
/// `c0_ratio` over the trials.
pub fn run_stability(config: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<ExperimentTable> {
    expect_kind(config, ExperimentKind::Stability)?;
    match config.model.field() {
        Field::Real => stability_typed::<f64>(config, progress),
        Field::Complex => stability_typed::<Complex64>(config, progress),
    }
}

struct StabilityRow {
    noise_level: f64,
    noise_l1_over_m: f64,
    c0_ratio: f64,
    signal_c0_ratio: f64,
    outcome: SolveOutcome,
}

fn stability_typed<S: Scalar>(config: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<ExperimentTable> {
    let noise = config.noise.as_ref().expect("validated");
    let mut raw = Table::new(&[
        "n",
        "m",
        "trial",
        "seed",
        "level",
        "noise_level",
        "noise_l1_over_m",
        "frob_error",
        "rel_frob_error",
        "signal_error",
        "c0_ratio",
        "signal_c0_ratio",
        "success",
        "iterations",
        "converged",
        "error",
    ]);
    let mut agg = Table::new(&[
        "n",
        "ratio",
        "m",
        "level",
        "trials",
        "median_noise_l1_over_m",
        "median_frob_error",
        "fitted_c0",
        "median_c0",
        "max_signal_c0_ratio",
        "success_rate",
    ]);
    for (n, ri, ratio, m) in config.cells() {
        let trials = trials_in_parallel(config.trials, |t| {
            let seed = config.trial_seed(n, ri, t);
            let setup = || -> Result<(Ensemble<S>, Vec<S>, Observations<S>)> {
                let ens = sample_ensemble::<S>(config.model, n, m, sub_seed(seed, "ensemble"))?;
                let x0: Vec<S> = unit_vector(sub_seed(seed, "signal"), n);
                let obs = ens.measure(&x0)?;
                Ok((ens, x0, obs))
            };
            let rows: Vec<StabilityRow> = match setup() {
                Ok((ens, x0, clean)) => {
                    let scale = if noise.relative_to_mean_b { clean.mean_b() } else { 1.0 };
                    let x0_norm = norm2(&x0);
                    noise
                        .levels
                        .iter()
                        .map(|&level| {
                            let abs_level = level * scale;
                            match add_noise(&clean, noise.kind.at(abs_level), sub_seed(seed, "noise")) {
                                Ok(obs) => {
                                    let w1 = obs.noise_l1() / m as f64;
                                    let o = solve_against(&ens, &obs, &x0, config);
                                    let guard = |v: f64| if w1 > 0.0 { v } else { f64::NAN };
                                    StabilityRow {
                                        noise_level: abs_level,
                                        noise_l1_over_m: w1,
                                        c0_ratio: guard(o.frob_error / w1),
                                        signal_c0_ratio: guard(o.signal_error / x0_norm.min(w1 / x0_norm)),
                                        outcome: o,
                                    }
                                }
                                Err(e) => StabilityRow {
                                    noise_level: abs_level,
                                    noise_l1_over_m: f64::NAN,
                                    c0_ratio: f64::NAN,
                                    signal_c0_ratio: f64::NAN,
                                    outcome: SolveOutcome::failed(&e),
                                },
                            }
                        })
                        .collect()
                }
                Err(e) => noise
                    .levels
                    .iter()
                    .map(|_| StabilityRow {
                        noise_level: f64::NAN,
                        noise_l1_over_m: f64::NAN,
                        c0_ratio: f64::NAN,
                        signal_c0_ratio: f64::NAN,
                        outcome: SolveOutcome::failed(&e),
                    })
                    .collect(),
            };
            (seed, rows)
        });
        for (t, (seed, rows)) in trials.iter().enumerate() {
            for (level, r) in noise.levels.iter().zip(rows) {
                let o = &r.outcome;
                raw.push(vec![
                    n.into(),
                    m.into(),
                    t.into(),
                    (*seed).into(),
                    (*level).into(),
                    r.noise_level.into(),
                    r.noise_l1_over_m.into(),
                    o.frob_error.into(),
                    o.rel_frob_error.into(),
                    o.signal_error.into(),
                    r.c0_ratio.into(),
                    r.signal_c0_ratio.into(),
                    o.success(config.success_tol).into(),
                    o.iterations.into(),
                    o.converged.into(),
                    o.error.clone().into(),
                ]);
            }
        }
        for (li, &level) in noise.levels.iter().enumerate() {
            let pick = |f: &dyn Fn(&StabilityRow) -> f64| -> Vec<f64> {
                trials.iter().map(|(_, rows)| f(&rows[li])).collect()
            };
            let c0 = pick(&|r| r.c0_ratio);
            let ok: Vec<bool> = trials
                .iter()
                .map(|(_, rows)| rows[li].outcome.success(config.success_tol))
                .collect();
            agg.push(vec![
                n.into(),
                ratio.into(),
                m.into(),
                level.into(),
                config.trials.into(),
                median(&pick(&|r| r.noise_l1_over_m)).into(),
                median(&pick(&|r| r.outcome.frob_error)).into(),
                max_finite(&c0).into(),
                median(&c0).into(),
                max_finite(&pick(&|r| r.signal_c0_ratio)).into(),
                mean_bool(&ok).into(),
            ]);
        }
        cell_done(progress, config.experiment, n, ratio, m);
    }
    Ok(ExperimentTable { raw, agg })
}

// --------------------------------------------------------------- injectivity

/// Upper factor on PSD matrices: `m⁻¹‖A(X)‖₁ ≤ (9/8) tr X`.
pub const INJECTIVITY_UPPER: f64 = 9.0 / 8.0;
/// Lower factor on rank-2 matrices: `m⁻¹‖A(X)‖₁ ≥ 0.94 · (7/8) ‖X‖`.
pub const INJECTIVITY_LOWER: f64 = 0.94 * 7.0 / 8.0;

/// Gaussian symmetric matrix (`N(0, 1)` diagonal, `N(0, 1/2)` off-diagonal)
/// projected onto the PSD cone and scaled to unit trace.
pub(crate) fn random_psd(stream: &mut Stream, n: usize) -> SymMatrix<f64> {
    loop {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = stream.normal();
            for j in i + 1..n {
                let v = stream.normal() * std::f64::consts::FRAC_1_SQRT_2;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        let p = project_psd(&SymMatrix::from_raw_hermitian(n, data)).expect("symmetric by construction");
        let tr = p.trace();
        if tr > 0.0 {
            return p.scaled(1.0 / tr);
        }
    }
}

/// `s₁ u₁u₁ᵀ + s₂ u₂u₂ᵀ` with a random orthonormal pair, random signs, and
/// magnitudes `1` and `Uniform(0, 1]`, so the spectral norm is 1. For
/// `n = 1` only the first term exists.
pub(crate) fn random_rank2(stream: &mut Stream, n: usize) -> SymMatrix<f64> {
    let unit = |s: &mut Stream| loop {
        let v: Vec<f64> = s.gaussian_vec(n);
        let nv = norm2(&v);
        if nv > 0.0 {
            return v.into_iter().map(|e| e / nv).collect::<Vec<f64>>();
        }
    };
    let u1 = unit(stream);
    let mut x = SymMatrix::zeros(n);
    x.add_outer(stream.rademacher(), &u1);
    if n >= 2 {
        let u2 = loop {
            let mut v = unit(stream);
            let c: f64 = v.iter().zip(&u1).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(&u1).for_each(|(a, b)| *a -= c * b);
            let nv = norm2(&v);
            if nv > 1e-8 {
                break v.into_iter().map(|e| e / nv).collect::<Vec<f64>>();
            }
        };
        let mag = 1.0 - stream.uniform();
        x.add_outer(stream.rademacher() * mag, &u2);
    }
    x
}

/// Samples a fresh ensemble per trial, one random unit-trace PSD matrix and
/// one random rank-2 matrix of unit spectral norm, and checks both
/// injectivity inequalities.
///
/// Raw columns: `n, m, trial, seed, psd_ratio, upper_slack, rank2_ratio,
/// lower_slack, upper_ok, lower_ok, both_ok` with
/// `psd_ratio = m⁻¹‖A(X)‖₁ / tr X`, `upper_slack = (9/8) tr X − m⁻¹‖A(X)‖₁`,
/// `rank2_ratio = m⁻¹‖A(X)‖₁ / ‖X‖` and
/// `lower_slack = m⁻¹‖A(X)‖₁ − 0.8225 ‖X‖`. Aggregates per cell: `n, ratio,
/// m, trials, upper_rate, lower_rate, both_rate, min_upper_slack,
/// min_lower_slack`.
pub fn verify_injectivity(config: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<ExperimentTable> {
    expect_kind(config, ExperimentKind::Injectivity)?;
    let mut raw = Table::new(&[
        "n",
        "m",
        "trial",
        "seed",
        "psd_ratio",
        "upper_slack",
        "rank2_ratio",
        "lower_slack",
        "upper_ok",
        "lower_ok",
        "both_ok",
    ]);
    let mut agg = Table::new(&[
        "n",
        "ratio",
        "m",
        "trials",
        "upper_rate",
        "lower_rate",
        "both_rate",
        "min_upper_slack",
        "min_lower_slack",
    ]);
    for (n, ri, ratio, m) in config.cells() {
        let rows = trials_in_parallel(config.trials, |t| -> Result<(u64, [f64; 4])> {
            let seed = config.trial_seed(n, ri, t);
            let ens = sample_ensemble::<f64>(config.model, n, m, sub_seed(seed, "ensemble"))?;
            let mut stream = Stream::new(sub_seed(seed, "matrix"), 0);
            let psd = random_psd(&mut stream, n);
            let r2 = random_rank2(&mut stream, n);
            let l1 = |x: &SymMatrix<f64>| -> Result<f64> {
                Ok(ens.apply_a(x)?.iter().map(|v| v.abs()).sum::<f64>() / m as f64)
            };
            let (a_psd, tr) = (l1(&psd)?, psd.trace());
            let (a_r2, spec) = (l1(&r2)?, spectral_norm(&r2)?);
            Ok((
                seed,
                [
                    a_psd / tr,
                    INJECTIVITY_UPPER * tr - a_psd,
                    a_r2 / spec,
                    a_r2 - INJECTIVITY_LOWER * spec,
                ],
            ))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let first = raw.len();
        for (t, (seed, v)) in rows.iter().enumerate() {
            raw.push(vec![
                n.into(),
                m.into(),
                t.into(),
                (*seed).into(),
                v[0].into(),
                v[1].into(),
                v[2].into(),
                v[3].into(),
                (v[1] >= 0.0).into(),
                (v[3] >= 0.0).into(),
                (v[1] >= 0.0 && v[3] >= 0.0).into(),
            ]);
        }
        let col = |c: &str| raw.bools(c)[first..].to_vec();
        let slack = |i: usize| rows.iter().map(|(_, v)| v[i]).fold(f64::INFINITY, f64::min);
        agg.push(vec![
            n.into(),
            ratio.into(),
            m.into(),
            config.trials.into(),
            mean_bool(&col("upper_ok")).into(),
            mean_bool(&col("lower_ok")).into(),
            mean_bool(&col("both_ok")).into(),
            slack(1).into(),
            slack(3).into(),
        ]);
        cell_done(progress, config.experiment, n, ratio, m);
    }
    Ok(ExperimentTable { raw, agg })
}

// ---------------------------------------------------------------- cert sweep

/// Builds the truncated certificate for a fresh ensemble and unit signal per
/// trial.
///
/// Raw columns: `n, m, trial, seed, tperp_shift_norm, t_frob,
/// tperp_max_eigenvalue, lambda_inf_m, core_ok, inexact_ok`. Aggregates per
/// cell: `n, ratio, m, trials, inexact_rate, core_rate,
/// median_tperp_shift_norm, median_t_frob, max_lambda_inf_m`.
pub fn run_cert_sweep(config: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<ExperimentTable> {
    expect_kind(config, ExperimentKind::CertSweep)?;
    let mut raw = Table::new(&[
        "n",
        "m",
        "trial",
        "seed",
        "tperp_shift_norm",
        "t_frob",
        "tperp_max_eigenvalue",
        "lambda_inf_m",
        "core_ok",
        "inexact_ok",
    ]);
    let mut agg = Table::new(&[
        "n",
        "ratio",
        "m",
        "trials",
        "inexact_rate",
        "core_rate",
        "median_tperp_shift_norm",
        "median_t_frob",
        "max_lambda_inf_m",
    ]);
    for (n, ri, ratio, m) in config.cells() {
        let rows = trials_in_parallel(config.trials, |t| -> Result<Vec<Cell>> {
            let seed = config.trial_seed(n, ri, t);
            let ens = sample_ensemble::<f64>(config.model, n, m, sub_seed(seed, "ensemble"))?;
            let x0: Vec<f64> = unit_vector(sub_seed(seed, "signal"), n);
            let cert = build_certificate_with(&ens, &x0, config.threshold)?;
            let r = &cert.report;
            let lambda_inf = cert.lambda.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            Ok(vec![
                n.into(),
                m.into(),
                t.into(),
                seed.into(),
                r.tperp_shift_norm.into(),
                r.t_frob.into(),
                r.tperp_max_eigenvalue.unwrap_or(f64::NAN).into(),
                (lambda_inf * m as f64).into(),
                r.core_ok.into(),
                r.inexact_ok.into(),
            ])
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let first = raw.len();
        for r in rows {
            raw.push(r);
        }
        let f = |c: &str| raw.f64s(c)[first..].to_vec();
        let b = |c: &str| raw.bools(c)[first..].to_vec();
        agg.push(vec![
            n.into(),
            ratio.into(),
            m.into(),
            config.trials.into(),
            mean_bool(&b("inexact_ok")).into(),
            mean_bool(&b("core_ok")).into(),
            median(&f("tperp_shift_norm")).into(),
            median(&f("t_frob")).into(),
            max_finite(&f("lambda_inf_m")).into(),
        ]);
        cell_done(progress, config.experiment, n, ratio, m);
    }
    Ok(ExperimentTable { raw, agg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_experiment, NoiseKind, NoiseSpec};
    use crate::linalg::eig_sym;

    fn quiet(_: &str) {}

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.n_values = vec![4];
        c.ratio_values = vec![1.0, 8.0];
        c.trials = 6;
        c.base_seed = 17;
        c
    }

    #[test]
    fn transition_aggregates_match_raw_rows() {
        let t = run_transition(&small(ExperimentKind::Transition), &quiet).unwrap();
        assert_eq!(t.raw.len(), 12);
        assert_eq!(t.agg.len(), 2);
        let ok = t.raw.bools("success");
        for (c, chunk) in ok.chunks(6).enumerate() {
            let rate = t.agg.f64s("success_rate")[c];
            assert!((rate - mean_bool(chunk)).abs() < 1e-12);
        }
        assert!(t.agg.f64s("success_rate")[1] >= 0.8, "{:?}", t.agg);
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let c = small(ExperimentKind::Transition);
        let a = run_experiment(&c, Some(1), &quiet).unwrap().to_csv();
        let b = run_experiment(&c, Some(3), &quiet).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        assert!(run_stability(&small(ExperimentKind::Transition), &quiet).is_err());
    }

    #[test]
    fn universality_with_basis_vectors() {
        let mut c = small(ExperimentKind::Universality);
        c.ratio_values = vec![12.0];
        c.trials = 3;
        c.ensembles = 2;
        c.include_basis = true;
        let t = run_universality(&c, &quiet).unwrap();
        assert_eq!(t.raw.len(), 2 * (3 + 4));
        assert_eq!(t.agg.len(), 2);
        assert!(t.agg.bools("all_recovered").iter().all(|&b| b), "{}", t.to_csv());
        assert_eq!(t.raw.get(3, "signal_kind"), &Cell::Text("basis:0".into()));
    }

    #[test]
    fn universality_with_one_signal_is_a_transition_trial() {
        let mut c = small(ExperimentKind::Universality);
        c.trials = 1;
        c.ensembles = 3;
        let t = run_universality(&c, &quiet).unwrap();
        assert_eq!(t.raw.len(), 6);
        assert_eq!(t.raw.bools("success"), t.agg.bools("all_recovered"));
    }

    #[test]
    fn stability_zero_noise_and_scaling() {
        let mut c = small(ExperimentKind::Stability);
        c.ratio_values = vec![10.0];
        c.trials = 4;
        c.noise = Some(NoiseSpec {
            kind: NoiseKind::AdversarialSign,
            levels: vec![0.0, 0.02, 0.04],
            relative_to_mean_b: true,
        });
        let t = run_stability(&c, &quiet).unwrap();
        assert_eq!(t.raw.len(), 12);
        let c0 = t.raw.f64s("c0_ratio");
        let frob = t.raw.f64s("frob_error");
        for k in 0..4 {
            assert!(c0[3 * k].is_nan());
            assert!(frob[3 * k] < 1e-3, "{}", frob[3 * k]);
        }
        let med = t.agg.f64s("median_frob_error");
        let ratio = med[2] / med[1];
        assert!((1.3..2.7).contains(&ratio), "{med:?}");
        let w = t.raw.f64s("noise_l1_over_m");
        let lvl = t.raw.f64s("noise_level");
        for k in 0..12 {
            assert!((w[k] - lvl[k]).abs() <= 1e-12 * (1.0 + lvl[k]));
        }
    }

    #[test]
    fn injectivity_samplers() {
        let mut s = Stream::new(5, 0);
        for _ in 0..20 {
            let p = random_psd(&mut s, 6);
            assert!((p.trace() - 1.0).abs() < 1e-12);
            assert!(eig_sym(&p).unwrap().min_value() >= -1e-12);
            let r = random_rank2(&mut s, 6);
            let e = eig_sym(&r).unwrap();
            let nonzero = e.values.iter().filter(|v| v.abs() > 1e-10).count();
            assert!(nonzero <= 2);
            assert!((spectral_norm(&r).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn injectivity_at_high_oversampling() {
        let mut c = small(ExperimentKind::Injectivity);
        c.n_values = vec![6];
        c.ratio_values = vec![64.0];
        c.trials = 20;
        let t = verify_injectivity(&c, &quiet).unwrap();
        assert_eq!(t.agg.f64s("both_rate")[0], 1.0);
        let up = t.raw.f64s("psd_ratio");
        assert!(up.iter().all(|v| (0.8..1.2).contains(v)), "{up:?}");
    }

    #[test]
    fn cert_sweep_lambda_bound() {
        let mut c = small(ExperimentKind::CertSweep);
        c.ratio_values = vec![2.0, 16.0];
        let t = run_cert_sweep(&c, &quiet).unwrap();
        assert!(t.raw.f64s("lambda_inf_m").iter().all(|&v| v <= 7.0));
        assert_eq!(t.agg.len(), 2);
    }
}
