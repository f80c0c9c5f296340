//! ℓ1 data fit over the PSD cone:
//!
//! ```text
//! minimize ‖A(X) − b‖₁  subject to  X ⪰ 0
//! ```
//!
//! With noiseless data and a valid dual certificate the lifted signal is the
//! only PSD matrix consistent with `b`, so the same program doubles as the
//! noiseless recovery engine.
//!
//! The solver is a linearized ADMM on the splitting `f(X) = ι{X ⪰ 0}`,
//! `g(z) = ‖z − b‖₁`, `A(X) = z`:
//!
//! ```text
//! X ← Π_psd(X − (ρ/μ) A*(A(X) − z + u))
//! z ← b + soft(A(X) + u − b, 1/ρ)
//! u ← u + A(X) − z
//! ```
//!
//! Every step needs only `A`, `A*`, a PSD projection and soft-thresholding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{phase_distance, psd_part, rank1_from_eig, SymMatrix, WarmEigen};
use crate::measurement::{Ensemble, Observations};
use crate::scalar::Scalar;

const OPNORM_ITERS: usize = 50;
const OPNORM_TOL: f64 = 1e-6;
/// Safety factor between `μ/ρ` and the estimated `‖A‖²_op`.
pub const STEP_SAFETY: f64 = 1.1;

/// Largest singular value of `A`, by power iteration on `X ↦ A*(A(X))`.
///
/// `A*A` maps the PSD cone into itself, so its leading eigenvector is PSD
/// and the identity start always has a component along it. The returned
/// value is a Rayleigh quotient and therefore never exceeds `‖A‖_op`.
pub fn estimate_opnorm<S: Scalar>(ens: &Ensemble<S>) -> f64 {
    let n = ens.n();
    let mut x = SymMatrix::<S>::identity(n).scaled(1.0 / (n as f64).sqrt());
    let mut ax = vec![0.0; ens.m()];
    let mut estimate = 0.0;
    for _ in 0..OPNORM_ITERS {
        ens.apply_a_into(&x, &mut ax);
        let sq: f64 = ax.iter().map(|v| v * v).sum();
        let next = sq.sqrt();
        let y = ens.apply_at_unchecked(&ax);
        let ny = y.frobenius();
        let done = (next - estimate).abs() <= OPNORM_TOL * next.max(f64::MIN_POSITIVE);
        estimate = next;
        if ny == 0.0 || done {
            break;
        }
        x = y.scaled(1.0 / ny);
    }
    estimate
}

/// User-facing knobs. `None` fields take data-dependent defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop when the relative change of `X` and the relative constraint
    /// violation `‖A(X) − z‖₂ / ‖b‖₂` both drop below this.
    pub primal_tol: f64,
    /// Stop as soon as `‖A(X) − b‖₁` drops below this; default `1e-8 ‖b‖₁`.
    pub residual_tol: Option<f64>,
    /// Augmented-Lagrangian penalty; default `1 / mean(positive b)`.
    pub step_rho: Option<f64>,
    /// Linearization constant; default `1.1 ρ ‖A‖²_op`.
    pub step_mu: Option<f64>,
    /// Keep per-iteration diagnostics in [`SolverResult::history`].
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            primal_tol: 1e-7,
            residual_tol: None,
            step_rho: None,
            step_mu: None,
            record_history: false,
        }
    }
}

/// Options with every default filled in and validated against the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedOptions {
    pub max_iters: usize,
    pub primal_tol: f64,
    pub residual_tol: f64,
    pub step_rho: f64,
    pub step_mu: f64,
    pub opnorm: f64,
}

impl SolverOptions {
    pub fn resolve<S: Scalar>(&self, ens: &Ensemble<S>, b: &[f64]) -> Result<ResolvedOptions> {
        let positive = |name: &str, v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        let primal_tol = positive("primal_tol", self.primal_tol)?;
        let b_l1: f64 = b.iter().map(|v| v.abs()).sum();
        let residual_tol = match self.residual_tol {
            Some(t) => positive("residual_tol", t)?,
            None => 1e-8 * b_l1,
        };
        let step_rho = match self.step_rho {
            Some(r) => positive("step_rho", r)?,
            None => {
                let pos: Vec<f64> = b.iter().copied().filter(|&v| v > 0.0).collect();
                if pos.is_empty() {
                    1.0
                } else {
                    pos.len() as f64 / pos.iter().sum::<f64>()
                }
            }
        };
        let opnorm = estimate_opnorm(ens);
        let floor = step_rho * opnorm * opnorm;
        let step_mu = match self.step_mu {
            Some(mu) => {
                let mu = positive("step_mu", mu)?;
                if mu < floor {
                    return Err(Error::InvalidArgument(format!(
                        "step_mu = {mu} is below step_rho * opnorm^2 = {floor}"
                    )));
                }
                mu
            }
            None => STEP_SAFETY * floor,
        };
        Ok(ResolvedOptions {
            max_iters: self.max_iters,
            primal_tol,
            residual_tol,
            step_rho,
            step_mu,
            opnorm,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult<S: Scalar> {
    pub x_hat_matrix: SymMatrix<S>,
    /// Leading rank-one factor of `x_hat_matrix`.
    pub x_hat: Vec<S>,
    pub l1_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub options: Option<ResolvedOptions>,
    pub history: SolverHistory,
}

/// Per-iteration diagnostics, filled only when
/// [`SolverOptions::record_history`] is set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverHistory {
    /// `‖A(X_k) − b‖₁`. ADMM does not decrease this monotonically.
    pub objective: Vec<f64>,
    /// Distance between consecutive iterates `(X, z, u)` in the metric
    /// `μ‖ΔX‖² − ρ‖A(ΔX)‖² + ρ‖Δz‖² + ρ‖Δu‖²`, which linearized ADMM
    /// decreases monotonically whenever `μ ≥ ρ‖A‖²`.
    pub fixed_point_residual: Vec<f64>,
}

impl<S: Scalar> SolverResult<S> {
    /// `‖X̂ − x0 x0*‖_F / ‖x0 x0*‖_F` (absolute error when `x0 = 0`).
    pub fn relative_frob_error(&self, x0: &[S]) -> f64 {
        let truth = SymMatrix::outer(x0);
        let err = self.x_hat_matrix.sub(&truth).frobenius();
        let scale = truth.frobenius();
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }

    pub fn frob_error(&self, x0: &[S]) -> f64 {
        self.x_hat_matrix.sub(&SymMatrix::outer(x0)).frobenius()
    }
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn l2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Solves the ℓ1 fit for `obs.b`. Non-convergence is reported through
/// `converged = false`, not as an error.
pub fn solve<S: Scalar>(ens: &Ensemble<S>, obs: &Observations<S>, opts: &SolverOptions) -> Result<SolverResult<S>> {
    let b = &obs.b;
    let (n, m) = (ens.n(), ens.m());
    if b.len() != m {
        return Err(Error::Dimension(format!(
            "observations have {} entries but the ensemble has m = {m}",
            b.len()
        )));
    }
    if let Some(x0) = &obs.ground_truth {
        if x0.len() != n {
            return Err(Error::Dimension(format!(
                "ground truth has length {} but n = {n}",
                x0.len()
            )));
        }
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("observations contain non-finite values".into()));
    }
    if b.iter().all(|&v| v == 0.0) {
        return Ok(SolverResult {
            x_hat_matrix: SymMatrix::zeros(n),
            x_hat: vec![S::zero(); n],
            l1_residual: 0.0,
            iterations: 0,
            converged: true,
            trace: 0.0,
            min_eigenvalue: 0.0,
            options: None,
            history: SolverHistory::default(),
        });
    }
    let o = opts.resolve(ens, b)?;
    let step = o.step_rho / o.step_mu;
    let threshold = 1.0 / o.step_rho;
    let b_l2 = l2(b);

    let mut eig = WarmEigen::new();
    let inv_m = 1.0 / m as f64;
    let mut x = ens.apply_at_unchecked(b).scaled(inv_m);
    let mut ax = vec![0.0; m];
    ens.apply_a_into(&x, &mut ax);
    let mut z = ax.clone();
    let mut u = vec![0.0; m];
    let mut r = vec![0.0; m];
    let mut history = SolverHistory::default();
    let mut z_prev = z.clone();
    let mut u_prev = u.clone();

    let mut converged = false;
    let mut iterations = 0;
    let mut last_eig = None;
    for k in 1..=o.max_iters {
        iterations = k;
        for i in 0..m {
            r[i] = ax[i] - z[i] + u[i];
        }
        let mut g = x.clone();
        g.axpy(-step, &ens.apply_at_unchecked(&r));
        let e = eig.decompose(&g);
        let x_next = psd_part(&e);
        ens.apply_a_into(&x_next, &mut ax);
        for i in 0..m {
            let v = ax[i] + u[i] - b[i];
            z[i] = b[i] + soft_threshold(v, threshold);
            u[i] += ax[i] - z[i];
        }

        let residual = l1_distance(&ax, b);
        if opts.record_history {
            let dx = x_next.sub(&x);
            let adx = ens.apply_a(&dx)?;
            let rho = o.step_rho;
            let g_part = o.step_mu * dx.frobenius().powi(2) - rho * adx.iter().map(|v| v * v).sum::<f64>();
            let dz: f64 = z.iter().zip(&z_prev).map(|(a, b)| (a - b).powi(2)).sum();
            let du: f64 = u.iter().zip(&u_prev).map(|(a, b)| (a - b).powi(2)).sum();
            history.objective.push(residual);
            history
                .fixed_point_residual
                .push((g_part + rho * (dz + du)).max(0.0).sqrt());
            z_prev.copy_from_slice(&z);
            u_prev.copy_from_slice(&u);
        }
        let change = x_next.sub(&x).frobenius() / x_next.frobenius().max(f64::MIN_POSITIVE);
        let violation = ax.iter().zip(&z).map(|(a, z)| (a - z).powi(2)).sum::<f64>().sqrt() / b_l2;
        x = x_next;
        last_eig = Some(e);
        if residual <= o.residual_tol || (change <= o.primal_tol && violation <= o.primal_tol) {
            converged = true;
            break;
        }
    }

    // eigenpairs of x = Π(g) are those of g with negative eigenvalues zeroed
    let mut e = last_eig.expect("at least one iteration runs");
    for v in e.values.iter_mut() {
        *v = v.max(0.0);
    }
    let x_hat = rank1_from_eig(&e);
    let l1_residual = l1_distance(&ax, b);
    Ok(SolverResult {
        trace: x.trace(),
        min_eigenvalue: e.min_value(),
        x_hat_matrix: x,
        x_hat,
        l1_residual,
        iterations,
        converged,
        options: Some(o),
        history,
    })
}

/// Signal estimate and, when `x0` is known, its distance to `x0` up to
/// global phase. The distance is `NaN` without ground truth.
pub fn estimate_signal<S: Scalar>(result: &SolverResult<S>, x0: Option<&[S]>) -> Result<(Vec<S>, f64)> {
    let x_hat = crate::linalg::rank1_extract(&result.x_hat_matrix)?;
    let dist = match x0 {
        Some(x0) => phase_distance(&x_hat, x0)?,
        None => f64::NAN,
    };
    Ok((x_hat, dist))
}
