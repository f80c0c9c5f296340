//! Dual certificates for exact recovery.
//!
//! For a unit anchor `x0` the tangent space is `T = {x x0* + x0 x*}` with
//! projector `X_T = PX + XP − PXP`, `P = x0 x0*`, and complement
//! `X_{T⊥} = (I − P) X (I − P)`. A matrix `Y = A*(λ)` certifies that `x0 x0*`
//! is the unique PSD point consistent with the data when
//!
//! * `Y_{T⊥} ⪯ −I_{T⊥}` and `‖Y_T‖_F ≤ 1/2` (the inexact-duality conditions),
//!
//! and the explicit construction below is expected to satisfy the stronger
//!
//! * `‖Y_{T⊥} + 1.7 I_{T⊥}‖ ≤ 0.1` and `‖Y_T‖_F ≤ 0.15`.
//!
//! The construction uses truncated weights
//! `λ_i = (|⟨a_i, x0⟩|² 1(|⟨a_i, x0⟩| ≤ t) − β(t)) / m` with `β(t) = E z⁴ 1(|z| ≤ t)`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, SymMatrix};
use crate::measurement::Ensemble;
use crate::scalar::{dot, norm2, Field, Scalar};

/// Default truncation threshold.
pub const DEFAULT_THRESHOLD: f64 = 3.0;
/// Center of the `T⊥` block targeted by the construction.
pub const TPERP_CENTER: f64 = 1.7;
pub const CORE_TPERP_RADIUS: f64 = 0.1;
pub const CORE_T_FROB: f64 = 0.15;
pub const INEXACT_T_FROB: f64 = 0.5;
/// Bound on `m · max|λ_i|`.
pub const LAMBDA_BOUND: f64 = 7.0;

/// Tangent space at a unit-normalized anchor, with an orthonormal basis of
/// the anchor's orthogonal complement.
#[derive(Debug, Clone)]
pub struct TangentSpace<S: Scalar> {
    x0: Vec<S>,
    /// Row-major `n × (n−1)`; columns span `x0^⊥`.
    complement: Vec<S>,
}

impl<S: Scalar> TangentSpace<S> {
    pub fn new(x0: &[S]) -> Result<Self> {
        let norm = norm2(x0);
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument(
                "tangent space anchor must be a nonzero finite vector".into(),
            ));
        }
        let x0: Vec<S> = x0.iter().map(|v| v.scale(1.0 / norm)).collect();
        let complement = complement_basis(&x0);
        Ok(Self { x0, complement })
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    pub fn anchor(&self) -> &[S] {
        &self.x0
    }

    /// `P = x0 x0*`.
    pub fn projector(&self) -> SymMatrix<S> {
        SymMatrix::outer(&self.x0)
    }

    /// `U* X U` where the columns of `U` span `x0^⊥`: the `T⊥` block as an
    /// `(n−1) × (n−1)` matrix.
    pub fn restrict_to_complement(&self, x: &SymMatrix<S>) -> SymMatrix<S> {
        x.congruence(&self.complement, self.n() - 1)
    }

    fn check(&self, x: &SymMatrix<S>) -> Result<()> {
        if x.n() != self.n() {
            return Err(Error::Dimension(format!(
                "matrix is {0}x{0} but the tangent space has n = {1}",
                x.n(),
                self.n()
            )));
        }
        Ok(())
    }
}

/// Modified Gram–Schmidt (two passes) of the standard basis vectors other
/// than the one best aligned with `x0`.
fn complement_basis<S: Scalar>(x0: &[S]) -> Vec<S> {
    let n = x0.len();
    let k = n - 1;
    let pivot = (0..n)
        .max_by(|&i, &j| x0[i].abs2().total_cmp(&x0[j].abs2()))
        .unwrap_or(0);
    let mut cols: Vec<Vec<S>> = Vec::with_capacity(k);
    for j in (0..n).filter(|&j| j != pivot) {
        let mut v = vec![S::zero(); n];
        v[j] = S::one();
        for _ in 0..2 {
            for q in std::iter::once(x0).chain(cols.iter().map(Vec::as_slice)) {
                let c = dot(q, &v);
                for (vi, &qi) in v.iter_mut().zip(q) {
                    *vi -= qi * c;
                }
            }
        }
        let nv = norm2(&v);
        cols.push(v.into_iter().map(|e| e.scale(1.0 / nv)).collect());
    }
    let mut out = vec![S::zero(); n * k];
    for (c, col) in cols.iter().enumerate() {
        for i in 0..n {
            out[i * k + c] = col[i];
        }
    }
    out
}

/// `X_T = PX + XP − PXP`.
pub fn project_t<S: Scalar>(x: &SymMatrix<S>, ts: &TangentSpace<S>) -> Result<SymMatrix<S>> {
    ts.check(x)?;
    let u = ts.anchor();
    let v = x.mul_vec(u);
    let s = dot(u, &v).re();
    let n = ts.n();
    let mut data = vec![S::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = u[i] * v[j].conj() + v[i] * u[j].conj() - (u[i] * u[j].conj()).scale(s);
        }
    }
    Ok(SymMatrix::from_raw_hermitian(n, data))
}

/// `X_{T⊥} = (I − P) X (I − P) = X − X_T`.
pub fn project_tperp<S: Scalar>(x: &SymMatrix<S>, ts: &TangentSpace<S>) -> Result<SymMatrix<S>> {
    Ok(x.sub(&project_t(x, ts)?))
}

/// Truncated Gaussian moments for `z ~ N(0, 1)` and threshold `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConstants {
    pub threshold: f64,
    /// `E z² 1(|z| ≤ t)`.
    pub alpha: f64,
    /// `E z⁴ 1(|z| ≤ t)`.
    pub beta: f64,
    /// `E (z³ 1(|z| ≤ t) − β z)² = E z⁶ 1(|z| ≤ t) − β²`.
    pub delta: f64,
}

/// Closed-form truncated moments. `t = +∞` gives the full moments `(1, 3, 6)`.
pub fn truncation_constants(t: f64) -> Result<TruncationConstants> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "truncation threshold must be positive, got {t}"
        )));
    }
    if t.is_infinite() {
        return Ok(TruncationConstants {
            threshold: t,
            alpha: 1.0,
            beta: 3.0,
            delta: 6.0,
        });
    }
    let pdf = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    // 2Φ(t) − 1
    let mass = erf(t / std::f64::consts::SQRT_2);
    let m2 = mass - 2.0 * t * pdf;
    let m4 = 3.0 * m2 - 2.0 * t.powi(3) * pdf;
    let m6 = 5.0 * m4 - 2.0 * t.powi(5) * pdf;
    Ok(TruncationConstants {
        threshold: t,
        alpha: m2,
        beta: m4,
        delta: m6 - m4 * m4,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `‖Y_{T⊥} + 1.7 I_{T⊥}‖` (spectral).
    pub tperp_shift_norm: f64,
    /// `‖Y_T‖_F`.
    pub t_frob: f64,
    /// Largest eigenvalue of `Y_{T⊥}` restricted to `x0^⊥`; `None` when
    /// `n = 1` and the complement is trivial.
    pub tperp_max_eigenvalue: Option<f64>,
    /// `max_i |λ_i|`, known only when the certificate was built from `λ`.
    pub lambda_inf: Option<f64>,
    pub core_ok: bool,
    pub inexact_ok: bool,
}

#[derive(Debug, Clone)]
pub struct Certificate<S: Scalar> {
    pub lambda: Vec<f64>,
    pub y: SymMatrix<S>,
    pub report: CertificateReport,
}

/// Checks the certificate conditions for `Y` at anchor `x0`.
///
/// The order condition `Y_{T⊥} ⪯ −I_{T⊥}` is evaluated on `x0^⊥`, where
/// `I_{T⊥}` acts as the identity; the structural zero eigenvalue of
/// `(I − P) Y (I − P)` along `x0` is not part of `T⊥`.
pub fn verify_certificate<S: Scalar>(y: &SymMatrix<S>, x0: &[S]) -> Result<CertificateReport> {
    let ts = TangentSpace::new(x0)?;
    ts.check(y)?;
    let t_frob = project_t(y, &ts)?.frobenius();
    let (tperp_shift_norm, tperp_max_eigenvalue) = if ts.n() > 1 {
        let block = eig_sym(&ts.restrict_to_complement(y))?;
        let shift = block
            .values
            .iter()
            .fold(0.0_f64, |acc, l| acc.max((l + TPERP_CENTER).abs()));
        (shift, Some(block.max_value()))
    } else {
        (0.0, None)
    };
    let core_ok = tperp_shift_norm <= CORE_TPERP_RADIUS && t_frob <= CORE_T_FROB;
    let inexact_ok = tperp_max_eigenvalue.is_none_or(|l| l <= -1.0) && t_frob <= INEXACT_T_FROB;
    Ok(CertificateReport {
        tperp_shift_norm,
        t_frob,
        tperp_max_eigenvalue,
        lambda_inf: None,
        core_ok,
        inexact_ok,
    })
}

fn check_real_anchor<S: Scalar>(ens: &Ensemble<S>, x0: &[S]) -> Result<Vec<S>> {
    if S::FIELD != Field::Real {
        return Err(Error::Unsupported(
            "certificate construction is implemented for real ensembles only".into(),
        ));
    }
    if x0.len() != ens.n() {
        return Err(Error::Dimension(format!(
            "signal has length {} but the ensemble has n = {}",
            x0.len(),
            ens.n()
        )));
    }
    let norm = norm2(x0);
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::InvalidArgument("certificate anchor x0 must be nonzero".into()));
    }
    Ok(x0.iter().map(|v| v.scale(1.0 / norm)).collect())
}

/// Truncated-weight multipliers `λ_i = (q_i² 1(|q_i| ≤ t) − β(t)) / m` with
/// `q_i = ⟨a_i, x0/‖x0‖⟩`.
pub fn certificate_multipliers<S: Scalar>(ens: &Ensemble<S>, x0: &[S], threshold: f64) -> Result<Vec<f64>> {
    let unit = check_real_anchor(ens, x0)?;
    let beta = truncation_constants(threshold)?.beta;
    let inv_m = 1.0 / ens.m() as f64;
    Ok(ens
        .rows()
        .map(|a| {
            let q = dot(a, &unit).abs();
            let kept = if q <= threshold { q * q } else { 0.0 };
            (kept - beta) * inv_m
        })
        .collect())
}

pub fn build_certificate<S: Scalar>(ens: &Ensemble<S>, x0: &[S]) -> Result<Certificate<S>> {
    build_certificate_with(ens, x0, DEFAULT_THRESHOLD)
}

pub fn build_certificate_with<S: Scalar>(ens: &Ensemble<S>, x0: &[S], threshold: f64) -> Result<Certificate<S>> {
    let lambda = certificate_multipliers(ens, x0, threshold)?;
    let y = ens.apply_at(&lambda)?;
    let mut report = verify_certificate(&y, x0)?;
    report.lambda_inf = Some(lambda.iter().fold(0.0_f64, |acc, l| acc.max(l.abs())));
    Ok(Certificate { lambda, y, report })
}

/// Intermediate quantities of the construction `Y = Y⁽⁰⁾ − Y⁽¹⁾`.
#[derive(Debug, Clone)]
pub struct CertificateDiagnostics<S: Scalar> {
    pub constants: TruncationConstants,
    /// `(1/m) Σ q_i² 1(|q_i| ≤ t) a_i a_i*`.
    pub y0: SymMatrix<S>,
    /// `(β/m) Σ a_i a_i*`.
    pub y1: SymMatrix<S>,
    pub y: SymMatrix<S>,
    pub summary: DiagnosticsSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    /// `‖Y⁽¹⁾ − β I‖`.
    pub wishart_dev: f64,
    /// `‖Y⁽¹⁾_{T⊥} − β I_{T⊥}‖`; the construction aims for `β/40`.
    pub wishart_tperp_dev: f64,
    /// `‖Y⁽⁰⁾_{T⊥} − α I_{T⊥}‖`; the construction aims for `α/40`.
    pub truncated_tperp_dev: f64,
    /// `|⟨y, x0⟩|²` with `y = Y x0`; target `≤ 1/20`.
    pub y_along_sq: f64,
    /// `‖y′‖²` for the part of `y` orthogonal to `x0`; target `≤ 1/10`.
    pub y_perp_sq: f64,
    /// `‖c‖² / m` with `c_i = q_i³ 1(|q_i| ≤ t) − β q_i`; concentrates at `δ`.
    pub c_norm_sq_over_m: f64,
    /// `‖Z′c‖² / m²`, equal to `‖y′‖²` for real ensembles.
    pub zc_norm_sq_over_m2: f64,
    /// `‖Y_T‖²_F`, equal to `|⟨y, x0⟩|² + 2 ‖y′‖²`.
    pub t_frob_sq: f64,
}

pub fn certificate_diagnostics<S: Scalar>(
    ens: &Ensemble<S>,
    x0: &[S],
    threshold: f64,
) -> Result<CertificateDiagnostics<S>> {
    let unit = check_real_anchor(ens, x0)?;
    let constants = truncation_constants(threshold)?;
    let (n, m) = (ens.n(), ens.m());
    let inv_m = 1.0 / m as f64;
    let q: Vec<f64> = ens.rows().map(|a| dot(a, &unit).re()).collect();
    let w0: Vec<f64> = q
        .iter()
        .map(|&qi| if qi.abs() <= threshold { qi * qi * inv_m } else { 0.0 })
        .collect();
    let w1 = vec![constants.beta * inv_m; m];
    let y0 = ens.apply_at(&w0)?;
    let y1 = ens.apply_at(&w1)?;
    let y = y0.sub(&y1);

    let ts = TangentSpace::new(&unit)?;
    let shifted_norm = |mat: &SymMatrix<S>, shift: f64| -> Result<f64> {
        if n == 1 {
            return Ok(0.0);
        }
        let block = eig_sym(&ts.restrict_to_complement(mat))?;
        Ok(block.values.iter().fold(0.0_f64, |acc, l| acc.max((l - shift).abs())))
    };
    let mut wishart = y1.clone();
    wishart.axpy(-constants.beta, &SymMatrix::identity(n));
    let wishart_dev = crate::linalg::spectral_norm(&wishart)?;

    let yx = y.mul_vec(&unit);
    let along = dot(&unit, &yx);
    let y_perp: Vec<S> = yx.iter().zip(&unit).map(|(&v, &u)| v - u * along).collect();

    // y′ = (1/m) Z′ c, Z′ = columns a_i′ (rows projected off x0)
    let c: Vec<f64> = q
        .iter()
        .map(|&qi| {
            let cube = if qi.abs() <= threshold { qi.powi(3) } else { 0.0 };
            cube - constants.beta * qi
        })
        .collect();
    let mut zc = vec![S::zero(); n];
    for (a, &ci) in ens.rows().zip(&c) {
        let qa = dot(&unit, a);
        for ((z, &ai), &ui) in zc.iter_mut().zip(a).zip(&unit) {
            *z += (ai - ui * qa).scale(ci);
        }
    }

    let summary = DiagnosticsSummary {
        wishart_dev,
        wishart_tperp_dev: shifted_norm(&y1, constants.beta)?,
        truncated_tperp_dev: shifted_norm(&y0, constants.alpha)?,
        y_along_sq: along.abs2(),
        y_perp_sq: norm2(&y_perp).powi(2),
        c_norm_sq_over_m: c.iter().map(|v| v * v).sum::<f64>() * inv_m,
        zc_norm_sq_over_m2: norm2(&zc).powi(2) * inv_m * inv_m,
        t_frob_sq: project_t(&y, &ts)?.frobenius().powi(2),
    };
    Ok(CertificateDiagnostics {
        constants,
        y0,
        y1,
        y,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{sample_ensemble, Model};
    use crate::rng::{unit_vector, Stream};
    use num_complex::Complex64;

    /// Composite Simpson on [-t, t] with 2·10⁵ panels; independent of the
    /// closed forms.
    fn quad(t: f64, f: impl Fn(f64) -> f64) -> f64 {
        let panels = 200_000;
        let h = 2.0 * t / panels as f64;
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let g = |z: f64| f(z) * phi(z);
        let mut s = g(-t) + g(t);
        for i in 1..panels {
            let z = -t + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(z);
        }
        s * h / 3.0
    }

    #[test]
    fn constants_at_three() {
        let c = truncation_constants(3.0).unwrap();
        assert_eq!(format!("{:.4}", c.alpha), "0.9707");
        assert_eq!(format!("{:.4}", c.beta), "2.6728");
        assert_eq!(format!("{:.4}", c.delta), "4.0663");
    }

    #[test]
    fn constants_at_infinity() {
        let c = truncation_constants(f64::INFINITY).unwrap();
        assert_eq!((c.alpha, c.beta, c.delta), (1.0, 3.0, 6.0));
        let far = truncation_constants(40.0).unwrap();
        assert!((far.alpha - 1.0).abs() < 1e-12 && (far.beta - 3.0).abs() < 1e-12 && (far.delta - 6.0).abs() < 1e-11);
    }

    #[test]
    fn constants_match_quadrature() {
        for t in [0.5, 1.0, 2.0, 3.0, 4.5] {
            let c = truncation_constants(t).unwrap();
            let alpha = quad(t, |z| z * z);
            let beta = quad(t, |z| z.powi(4));
            // E (z³1 − βz)² = ∫_{|z|≤t} (z³ − βz)² φ + β² P(|z| > t)
            let inside = quad(t, |z| (z.powi(3) - beta * z).powi(2));
            let tail = 1.0 - quad(t, |z| z * z);
            let delta = inside + beta * beta * tail;
            assert!((c.alpha - alpha).abs() < 1e-8, "t={t}");
            assert!((c.beta - beta).abs() < 1e-8, "t={t}");
            assert!((c.delta - delta).abs() < 1e-8, "t={t}: {} vs {delta}", c.delta);
        }
    }

    #[test]
    fn constants_reject_nonpositive() {
        assert!(truncation_constants(0.0).is_err());
        assert!(truncation_constants(-1.0).is_err());
        assert!(truncation_constants(f64::NAN).is_err());
    }

    #[test]
    fn project_t_examples() {
        let x0 = vec![0.6, 0.0, 0.8];
        let ts = TangentSpace::new(&x0).unwrap();
        let p = SymMatrix::outer(&x0);
        assert!(project_t(&p, &ts).unwrap().sub(&p).frobenius() < 1e-15);

        let e1 = TangentSpace::new(&[1.0, 0.0, 0.0]).unwrap();
        let e2e2 = SymMatrix::outer(&[0.0, 1.0, 0.0]);
        assert_eq!(project_t(&e2e2, &e1).unwrap().frobenius(), 0.0);

        let mut s = Stream::new(5, 0);
        let g: Vec<f64> = s.gaussian_vec(3);
        let mut x = SymMatrix::outer(&g);
        x.axpy(-0.3, &SymMatrix::identity(3));
        let once = project_t(&x, &ts).unwrap();
        assert!(project_t(&once, &ts).unwrap().sub(&once).frobenius() < 1e-12);
        assert!(project_t(&SymMatrix::identity(2), &ts).is_err());
    }

    #[test]
    fn tangent_space_projector() {
        let ts = TangentSpace::new(&[3.0, -4.0, 0.0, 12.0]).unwrap();
        let p = ts.projector();
        let p2 = SymMatrix::from_raw_hermitian(4, crate::linalg::mat_mul(p.as_slice(), p.as_slice(), 4, 4, 4));
        assert!(p2.sub(&p).frobenius() < 1e-12);
        assert!((p.trace() - 1.0).abs() < 1e-12);
        assert!(TangentSpace::<f64>::new(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn projection_geometry_random() {
        let mut s = Stream::new(21, 0);
        for trial in 0..100 {
            let n = 2 + trial % 9;
            let x0: Vec<Complex64> = s.gaussian_vec(n);
            let ts = TangentSpace::new(&x0).unwrap();
            let rand_herm = |s: &mut Stream| {
                let raw: Vec<Complex64> = s.gaussian_vec(n * n);
                let mut d = vec![Complex64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for j in 0..n {
                        d[i * n + j] = (raw[i * n + j] + raw[j * n + i].conj()) * 0.5;
                    }
                }
                SymMatrix::from_row_major(n, d).unwrap()
            };
            let x = rand_herm(&mut s);
            let z = rand_herm(&mut s);
            let xt = project_t(&x, &ts).unwrap();
            let zp = project_tperp(&z, &ts).unwrap();
            assert!(xt.inner(&zp).abs() < 1e-10);
            let xp = project_tperp(&x, &ts).unwrap();
            let lhs = x.frobenius().powi(2);
            let rhs = xt.frobenius().powi(2) + xp.frobenius().powi(2);
            assert!((lhs - rhs).abs() < 1e-10 * lhs.max(1.0));
        }
    }

    #[test]
    fn verify_examples() {
        let n = 4;
        let x0 = [0.5, 0.5, -0.5, 0.5];
        let p = SymMatrix::outer(&x0);
        let mut iperp = SymMatrix::identity(n);
        iperp.axpy(-1.0, &p);

        let ideal = iperp.scaled(-1.7);
        let r = verify_certificate(&ideal, &x0).unwrap();
        assert!(r.tperp_shift_norm < 1e-12 && r.t_frob < 1e-12);
        assert!(r.core_ok && r.inexact_ok);

        let r = verify_certificate(&SymMatrix::<f64>::zeros(n), &x0).unwrap();
        assert!(!r.inexact_ok);
        assert_eq!(r.tperp_max_eigenvalue, Some(0.0));

        // E symmetric with unit spectral norm; (I−P)E(I−P) keeps norm 1 when
        // E's top eigenvector lies in x0^⊥
        let v = [0.5, -0.5, 0.5, 0.5];
        let mut e = SymMatrix::outer(&v);
        e.axpy(-0.5, &SymMatrix::outer(&[0.5, 0.5, 0.5, -0.5]));
        let pe = project_tperp(&e, &TangentSpace::new(&x0).unwrap()).unwrap();
        let mut y = ideal.clone();
        y.axpy(0.2, &pe);
        let r = verify_certificate(&y, &x0).unwrap();
        assert!((r.tperp_shift_norm - 0.2).abs() < 1e-12, "{}", r.tperp_shift_norm);
        assert!(!r.core_ok);
        assert!(r.inexact_ok);
    }

    #[test]
    fn multiplier_examples() {
        let beta = truncation_constants(3.0).unwrap().beta;
        let e = Ensemble::from_rows(&[vec![1.0, 0.0], vec![4.0, 1.0], vec![-3.0, 0.0]]).unwrap();
        let lam = certificate_multipliers(&e, &[2.0, 0.0], 3.0).unwrap();
        assert!((lam[0] - (1.0 - beta) / 3.0).abs() < 1e-15);
        assert!((lam[1] + beta / 3.0).abs() < 1e-15);
        assert!((lam[2] - (9.0 - beta) / 3.0).abs() < 1e-15);
        assert!((lam[0] * 3.0 + 1.6728).abs() < 1e-4);
    }

    #[test]
    fn build_rejects_complex_and_zero() {
        let ec = sample_ensemble::<Complex64>(Model::ComplexGaussian, 3, 9, 1).unwrap();
        let x: Vec<Complex64> = unit_vector(2, 3);
        assert!(matches!(build_certificate(&ec, &x), Err(Error::Unsupported(_))));
        let e = sample_ensemble::<f64>(Model::RealGaussian, 3, 9, 1).unwrap();
        assert!(build_certificate(&e, &[0.0; 3]).is_err());
        assert!(build_certificate(&e, &[1.0; 2]).is_err());
    }

    #[test]
    fn certificate_invariants() {
        let e = sample_ensemble::<f64>(Model::RealGaussian, 8, 200, 4).unwrap();
        let x0: Vec<f64> = unit_vector(3, 8);
        let cert = build_certificate(&e, &x0).unwrap();
        let again = e.apply_at(&cert.lambda).unwrap();
        assert!(cert.y.sub(&again).frobenius() <= 1e-10 * cert.y.frobenius());
        assert!(cert.report.lambda_inf.unwrap() * 200.0 <= LAMBDA_BOUND);
        if cert.report.core_ok {
            assert!(cert.report.inexact_ok);
        }
        // scaling the anchor does not change anything
        let scaled: Vec<f64> = x0.iter().map(|v| v * 3.0).collect();
        let rescaled = build_certificate(&e, &scaled).unwrap().lambda;
        for (a, b) in rescaled.iter().zip(&cert.lambda) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn diagnostics_identities() {
        let e = sample_ensemble::<f64>(Model::RealGaussian, 6, 300, 8).unwrap();
        let x0: Vec<f64> = unit_vector(1, 6);
        let d = certificate_diagnostics(&e, &x0, 3.0).unwrap();
        let s = d.summary;
        let cert = build_certificate(&e, &x0).unwrap();
        assert!(d.y.sub(&cert.y).frobenius() <= 1e-12 * cert.y.frobenius().max(1.0));
        assert!((s.t_frob_sq - (s.y_along_sq + 2.0 * s.y_perp_sq)).abs() < 1e-10);
        assert!((s.zc_norm_sq_over_m2 - s.y_perp_sq).abs() < 1e-10);
        assert!((s.t_frob_sq.sqrt() - cert.report.t_frob).abs() < 1e-10);
    }

    #[test]
    fn wishart_part_concentrates() {
        let x0 = [1.0, 0.0, 0.0, 0.0];
        let mut ok = 0;
        for seed in 0..20 {
            let e = sample_ensemble::<f64>(Model::RealGaussian, 4, 100_000, 1000 + seed).unwrap();
            let d = certificate_diagnostics(&e, &x0, 3.0).unwrap();
            if d.summary.wishart_dev <= 0.1 {
                ok += 1;
            }
        }
        assert!(ok >= 19, "{ok}/20");
    }

    #[test]
    fn verify_supports_complex() {
        let x0: Vec<Complex64> = unit_vector(4, 3);
        let ts = TangentSpace::new(&x0).unwrap();
        let mut iperp = SymMatrix::identity(3);
        iperp.axpy(-1.0, &ts.projector());
        let r = verify_certificate(&iperp.scaled(-1.7), &x0).unwrap();
        assert!(r.core_ok && r.inexact_ok);
    }
}
