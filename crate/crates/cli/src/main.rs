//! `phaselift` command-line tool.
//!
//! Experiment configs are JSON files with the field names of
//! `ExperimentConfig`; any flag given on the command line replaces the value
//! from the file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phaselift::certificate::build_certificate_with;
use phaselift::experiments::{plot_data, run_experiment, ExperimentConfig};
use phaselift::io::{decode_vector, read_json, to_json, write_atomic, MeasurementFile, Problem, SolverReport};
use phaselift::measurement::{add_noise, sample_ensemble};
use phaselift::rng::{derive_seed, label, unit_vector};
use phaselift::{truncation_constants, Ensemble, Error, Field, Model, NoiseModel, Result, Scalar, SolverOptions};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)");

#[derive(Parser)]
#[command(name = "phaselift", version = VERSION, about = "Phase retrieval by lifting: simulate, solve, certify, experiment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an ensemble and observations and write them as JSON.
    Simulate(SimulateArgs),
    /// Solve the ℓ1-fit program for a measurement file.
    Solve(SolveArgs),
    /// Build and verify the truncated dual certificate (real models).
    Certify(CertifyArgs),
    /// Run an experiment config and write CSV plus plot data.
    Experiment(ExperimentArgs),
    /// Print the truncated Gaussian moments for a threshold.
    Constants(ConstantsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: Model,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    seed: u64,
    /// `unit-random`, `basis:k`, or an inline JSON vector (`[1, 0]` or `[[re, im], ...]`).
    #[arg(long, default_value = "unit-random")]
    x0: String,
    /// `kind:level` with kind gaussian, uniform or adversarial_sign.
    #[arg(long)]
    noise: Option<NoiseModel>,
    /// Seed for the noise draw; defaults to one derived from `--seed`.
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Store the measurement vectors instead of regenerating them from the seed.
    #[arg(long)]
    include_vectors: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    primal_tol: Option<f64>,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Anchor signal; defaults to the `x0` stored in the input file.
    #[arg(long)]
    x0: Option<String>,
    /// Truncation threshold.
    #[arg(long, default_value_t = 3.0)]
    t: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    model: Option<Model>,
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    ratio_values: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    success_tol: Option<f64>,
    #[arg(long)]
    output_path: Option<String>,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long, default_value_t = 3.0)]
    t: f64,
}

fn parse_x0<S: Scalar>(spec: &str, n: usize, seed: u64) -> Result<Vec<S>> {
    let spec = spec.trim();
    if spec == "unit-random" {
        return Ok(unit_vector(derive_seed(seed, &[label("x0")]), n));
    }
    if let Some(k) = spec.strip_prefix("basis:") {
        let k: usize = k
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("basis index `{k}` is not a nonnegative integer")))?;
        if k >= n {
            return Err(Error::Dimension(format!("basis index {k} out of range for n = {n}")));
        }
        let mut v = vec![S::zero(); n];
        v[k] = S::one();
        return Ok(v);
    }
    if spec.starts_with('[') {
        let value: serde_json::Value = serde_json::from_str(spec)?;
        let pairs: Vec<[f64; 2]> = match value {
            serde_json::Value::Array(items) if items.iter().all(|v| v.is_number()) => {
                items.iter().map(|v| [v.as_f64().unwrap_or(f64::NAN), 0.0]).collect()
            }
            other => serde_json::from_value(other)?,
        };
        if pairs.len() != n {
            return Err(Error::Dimension(format!("x0 has length {} but n = {n}", pairs.len())));
        }
        return decode_vector(&pairs, "x0");
    }
    Err(Error::InvalidArgument(format!(
        "x0 spec `{spec}` is not `unit-random`, `basis:k` or a JSON vector"
    )))
}

fn simulate_typed<S: Scalar>(a: &SimulateArgs) -> Result<MeasurementFile> {
    let ens: Ensemble<S> = sample_ensemble(a.model, a.n, a.m, a.seed)?;
    let x0 = parse_x0::<S>(&a.x0, a.n, a.seed)?;
    let mut obs = ens.measure(&x0)?;
    if let Some(noise) = a.noise {
        let seed = a.noise_seed.unwrap_or_else(|| derive_seed(a.seed, &[label("noise")]));
        obs = add_noise(&obs, noise, seed)?;
    }
    Ok(MeasurementFile::from_parts(&ens, &obs, a.include_vectors, a.noise))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    if a.model.is_explicit() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample the explicit model `{}`",
            a.model
        )));
    }
    let file = match a.model.field() {
        Field::Real => simulate_typed::<f64>(a)?,
        Field::Complex => simulate_typed::<phaselift::Complex64>(a)?,
    };
    write_atomic(&a.out, to_json(&file)?.as_bytes())?;
    println!("wrote {} (n={}, m={})", a.out.display(), file.n, file.m);
    Ok(())
}

fn solve(a: &SolveArgs) -> Result<()> {
    let file: MeasurementFile = read_json(&a.input)?;
    let opts = SolverOptions {
        max_iters: a.max_iters.unwrap_or(SolverOptions::default().max_iters),
        primal_tol: a.primal_tol.unwrap_or(SolverOptions::default().primal_tol),
        residual_tol: a.residual_tol,
        step_rho: a.rho,
        step_mu: a.mu,
        record_history: false,
    };
    let report = match file.load()? {
        Problem::Real(ens, obs) => {
            let r = phaselift::solve(&ens, &obs, &opts)?;
            SolverReport::new(&r, obs.ground_truth.as_deref())
        }
        Problem::Complex(ens, obs) => {
            let r = phaselift::solve(&ens, &obs, &opts)?;
            SolverReport::new(&r, obs.ground_truth.as_deref())
        }
    };
    write_atomic(&a.out, to_json(&report)?.as_bytes())?;
    let err = report
        .frob_error_vs_truth
        .map(|e| format!(" frob_error_vs_truth={e:e}"))
        .unwrap_or_default();
    println!(
        "converged={} iterations={} l1_residual={:e}{err}",
        report.converged, report.iterations, report.l1_residual
    );
    Ok(())
}

fn certify(a: &CertifyArgs) -> Result<()> {
    let file: MeasurementFile = read_json(&a.input)?;
    let (ens, obs) = match file.load()? {
        Problem::Real(e, o) => (e, o),
        Problem::Complex(..) => {
            return Err(Error::Unsupported("certificates are built for real models only".into()));
        }
    };
    let x0: Vec<f64> = match (&a.x0, obs.ground_truth) {
        (Some(spec), _) => parse_x0(spec, ens.n(), ens.seed())?,
        (None, Some(x)) => x,
        (None, None) => {
            return Err(Error::InvalidArgument("input has no x0; pass --x0".into()));
        }
    };
    let cert = build_certificate_with(&ens, &x0, a.t)?;
    let r = cert.report;
    let out = serde_json::json!({
        "schema_version": phaselift::SCHEMA_VERSION,
        "n": ens.n(),
        "m": ens.m(),
        "threshold": a.t,
        "tperp_shift_norm": r.tperp_shift_norm,
        "t_frob": r.t_frob,
        "tperp_max_eigenvalue": r.tperp_max_eigenvalue,
        "lambda_inf": r.lambda_inf,
        "lambda_inf_m": r.lambda_inf.map(|l| l * ens.m() as f64),
        "core_ok": r.core_ok,
        "inexact_ok": r.inexact_ok,
    });
    write_atomic(&a.out, to_json(&out)?.as_bytes())?;
    println!(
        "inexact_ok={} core_ok={} tperp_shift_norm={:.4} t_frob={:.4}",
        r.inexact_ok, r.core_ok, r.tperp_shift_norm, r.t_frob
    );
    Ok(())
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut c: ExperimentConfig = read_json(&a.config)?;
    if let Some(v) = a.model {
        c.model = v;
    }
    if let Some(v) = &a.n_values {
        c.n_values = v.clone();
    }
    if let Some(v) = &a.ratio_values {
        c.ratio_values = v.clone();
    }
    if let Some(v) = a.trials {
        c.trials = v;
    }
    if let Some(v) = a.base_seed {
        c.base_seed = v;
    }
    if let Some(v) = a.success_tol {
        c.success_tol = v;
    }
    if let Some(v) = &a.output_path {
        c.output_path = Some(v.clone());
    }
    c.validate()?;
    Ok(c)
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let config = experiment_config(a)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let table = run_experiment(&config, a.jobs, &|line| eprintln!("{line}"))?;
    let csv_name = config
        .output_path
        .clone()
        .unwrap_or_else(|| format!("{}.csv", config.experiment));
    let csv_path = resolve(&a.out_dir, &csv_name);
    write_atomic(&csv_path, table.to_csv().as_bytes())?;
    for (name, contents) in plot_data(config.experiment, &table) {
        write_atomic(&a.out_dir.join(name), contents.as_bytes())?;
    }
    println!("wrote {} ({} rows)", csv_path.display(), table.raw.len());
    Ok(())
}

fn resolve(dir: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn constants(a: &ConstantsArgs) -> Result<()> {
    let c = truncation_constants(a.t)?;
    println!("alpha={:.4} beta={:.4} delta={:.4}", c.alpha, c.beta, c.delta);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve(a),
        Command::Certify(a) => certify(a),
        Command::Experiment(a) => experiment(a),
        Command::Constants(a) => constants(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_mentions_schema() {
        assert!(VERSION.contains(&format!("schema {}", phaselift::SCHEMA_VERSION)));
    }

    #[test]
    fn x0_specs() {
        assert_eq!(parse_x0::<f64>("basis:1", 3, 0).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(parse_x0::<f64>("basis:3", 3, 0).is_err());
        assert_eq!(parse_x0::<f64>("[0.6, 0.8]", 2, 0).unwrap(), vec![0.6, 0.8]);
        assert!(parse_x0::<f64>("[[0.6, 0.1], [0.8, 0]]", 2, 0).is_err());
        let v = parse_x0::<f64>("unit-random", 4, 9).unwrap();
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(parse_x0::<f64>("random", 4, 9).is_err());
    }
}
