//! Sensing ensembles, the lifted linear map `A(X) = {a_i* X a_i}` and its
//! adjoint, and clean or noisy quadratic observations.
//!
//! Inner products conjugate the sensing vector: `⟨a, x⟩ = a* x`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::rng::{derive_seed, label, Stream};
use crate::scalar::{dot, Field, Scalar};

/// Distribution of the sensing vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `N(0, I_n)`.
    RealGaussian,
    /// Uniform on the real sphere of radius `√n`.
    RealSphere,
    /// `N(0, I_n/2) + i N(0, I_n/2)`.
    ComplexGaussian,
    /// Uniform on the complex sphere of radius `√n`.
    ComplexSphere,
    /// Real vectors supplied verbatim rather than sampled.
    ExplicitReal,
    /// Complex vectors supplied verbatim rather than sampled.
    ExplicitComplex,
}

impl Model {
    pub const SAMPLED: [Model; 4] = [
        Model::RealGaussian,
        Model::RealSphere,
        Model::ComplexGaussian,
        Model::ComplexSphere,
    ];

    pub fn field(self) -> Field {
        match self {
            Model::RealGaussian | Model::RealSphere | Model::ExplicitReal => Field::Real,
            Model::ComplexGaussian | Model::ComplexSphere | Model::ExplicitComplex => Field::Complex,
        }
    }

    pub fn is_sphere(self) -> bool {
        matches!(self, Model::RealSphere | Model::ComplexSphere)
    }

    pub fn is_explicit(self) -> bool {
        matches!(self, Model::ExplicitReal | Model::ExplicitComplex)
    }

    pub fn explicit(field: Field) -> Model {
        match field {
            Field::Real => Model::ExplicitReal,
            Field::Complex => Model::ExplicitComplex,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::RealGaussian => "real_gaussian",
            Model::RealSphere => "real_sphere",
            Model::ComplexGaussian => "complex_gaussian",
            Model::ComplexSphere => "complex_sphere",
            Model::ExplicitReal => "explicit_real",
            Model::ExplicitComplex => "explicit_complex",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Model::RealGaussian,
            Model::RealSphere,
            Model::ComplexGaussian,
            Model::ComplexSphere,
            Model::ExplicitReal,
            Model::ExplicitComplex,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

/// `m` sensing vectors of length `n`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<S: Scalar> {
    model: Model,
    n: usize,
    m: usize,
    seed: u64,
    vectors: Vec<S>,
}

/// Draws `m` i.i.d. sensing vectors; row `i` reads stream `i` of `seed`.
pub fn sample_ensemble<S: Scalar>(model: Model, n: usize, m: usize, seed: u64) -> Result<Ensemble<S>> {
    if model.is_explicit() {
        return Err(Error::InvalidArgument(format!(
            "model `{model}` cannot be sampled; supply the vectors"
        )));
    }
    if model.field() != S::FIELD {
        return Err(Error::FieldMismatch {
            expected: S::FIELD,
            found: model.field(),
        });
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "ensemble needs n >= 1 and m >= 1, got n = {n}, m = {m}"
        )));
    }
    let radius = (n as f64).sqrt();
    let mut vectors = Vec::with_capacity(n * m);
    for i in 0..m {
        let mut stream = Stream::new(seed, i as u64);
        let mut row: Vec<S> = stream.gaussian_vec(n);
        if model.is_sphere() {
            let norm = crate::scalar::norm2(&row);
            for e in row.iter_mut() {
                *e = e.scale(radius / norm);
            }
        }
        vectors.extend(row);
    }
    Ok(Ensemble {
        model,
        n,
        m,
        seed,
        vectors,
    })
}

impl<S: Scalar> Ensemble<S> {
    /// Ensemble from explicit sensing vectors.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one non-empty row".into(),
            ));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {i} has length {} but row 0 has length {n}",
                r.len()
            )));
        }
        Ok(Self {
            model: Model::explicit(S::FIELD),
            n,
            m,
            seed: 0,
            vectors: rows.iter().flatten().copied().collect(),
        })
    }

    /// Replaces the model tag and seed, e.g. after loading vectors that were
    /// stored alongside their generating parameters.
    pub(crate) fn with_provenance(mut self, model: Model, seed: u64) -> Self {
        self.model = model;
        self.seed = seed;
        self
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.vectors.chunks(self.n)
    }

    /// The first `m` rows as a new ensemble.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {m} of {} measurements",
                self.m
            )));
        }
        Ok(Self {
            m,
            vectors: self.vectors[..m * self.n].to_vec(),
            ..self.clone()
        })
    }

    fn check_signal(&self, x: &[S]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "signal has length {} but the ensemble has n = {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    fn check_matrix(&self, x: &SymMatrix<S>) -> Result<()> {
        if x.n() != self.n {
            return Err(Error::Dimension(format!(
                "matrix is {0}x{0} but the ensemble has n = {1}",
                x.n(),
                self.n
            )));
        }
        Ok(())
    }

    /// `b_i = |⟨a_i, x0⟩|²`.
    pub fn measure(&self, x0: &[S]) -> Result<Observations<S>> {
        self.check_signal(x0)?;
        let b = self.rows().map(|a| dot(a, x0).abs2()).collect();
        Ok(Observations {
            b,
            w: None,
            ground_truth: Some(x0.to_vec()),
        })
    }

    /// `A(X)_i = a_i* X a_i`.
    pub fn apply_a(&self, x: &SymMatrix<S>) -> Result<Vec<f64>> {
        self.check_matrix(x)?;
        let mut out = vec![0.0; self.m];
        self.apply_a_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked `A(X)` into a preallocated buffer of length `m`.
    pub(crate) fn apply_a_into(&self, x: &SymMatrix<S>, out: &mut [f64]) {
        let n = self.n;
        let xs = x.as_slice();
        for (o, a) in out.iter_mut().zip(self.rows()) {
            // Hermitian X: a* X a = Σ_k X_kk |a_k|² + 2 Re Σ_{k<l} conj(a_k) X_kl a_l
            let mut diag = 0.0;
            let mut off = S::zero();
            for k in 0..n {
                let row = &xs[k * n..(k + 1) * n];
                diag += row[k].re() * a[k].abs2();
                let mut acc = S::zero();
                for l in (k + 1)..n {
                    acc += row[l] * a[l];
                }
                off += a[k].conj() * acc;
            }
            *o = diag + 2.0 * off.re();
        }
    }

    /// `A*(y) = Σ_i y_i a_i a_i*`.
    pub fn apply_at(&self, y: &[f64]) -> Result<SymMatrix<S>> {
        if y.len() != self.m {
            return Err(Error::Dimension(format!(
                "adjoint input has length {} but m = {}",
                y.len(),
                self.m
            )));
        }
        Ok(self.apply_at_unchecked(y))
    }

    pub(crate) fn apply_at_unchecked(&self, y: &[f64]) -> SymMatrix<S> {
        let n = self.n;
        let mut data = vec![S::zero(); n * n];
        for (&yi, a) in y.iter().zip(self.rows()) {
            if yi == 0.0 {
                continue;
            }
            for k in 0..n {
                let ak = a[k].scale(yi);
                let row = &mut data[k * n..(k + 1) * n];
                for l in k..n {
                    row[l] += ak * a[l].conj();
                }
            }
        }
        for k in 0..n {
            for l in (k + 1)..n {
                data[l * n + k] = data[k * n + l].conj();
            }
        }
        SymMatrix::from_raw_hermitian(n, data)
    }
}

/// Measurement values with optional noise realization and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations<S: Scalar> {
    pub b: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub ground_truth: Option<Vec<S>>,
}

impl<S: Scalar> Observations<S> {
    pub fn from_values(b: Vec<f64>) -> Self {
        Self {
            b,
            w: None,
            ground_truth: None,
        }
    }

    pub fn noise_l1(&self) -> f64 {
        self.w.as_ref().map_or(0.0, |w| w.iter().map(|v| v.abs()).sum())
    }

    pub fn mean_b(&self) -> f64 {
        if self.b.is_empty() {
            0.0
        } else {
            self.b.iter().sum::<f64>() / self.b.len() as f64
        }
    }
}

/// Additive noise `w` in `b_i = |⟨a_i, x0⟩|² + w_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// i.i.d. `N(0, σ²)`.
    Gaussian { sigma: f64 },
    /// i.i.d. `Uniform[−η, η]`.
    Uniform { eta: f64 },
    /// `w_i = ε s_i` with Rademacher signs, so `‖w‖₁ = ε m`.
    AdversarialSign { epsilon: f64 },
}

impl NoiseModel {
    pub fn level(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma,
            NoiseModel::Uniform { eta } => eta,
            NoiseModel::AdversarialSign { epsilon } => epsilon,
        }
    }

    pub fn with_level(&self, level: f64) -> Self {
        match self {
            NoiseModel::Gaussian { .. } => NoiseModel::Gaussian { sigma: level },
            NoiseModel::Uniform { .. } => NoiseModel::Uniform { eta: level },
            NoiseModel::AdversarialSign { .. } => NoiseModel::AdversarialSign { epsilon: level },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::Uniform { .. } => "uniform",
            NoiseModel::AdversarialSign { .. } => "adversarial_sign",
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// `kind:level`, e.g. `gaussian:0.1` or `adversarial_sign:0.05`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, level) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("noise spec `{s}` is not `kind:level`")))?;
        let level: f64 = level
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("noise level `{level}` is not a number")))?;
        let model = match kind {
            "gaussian" => NoiseModel::Gaussian { sigma: level },
            "uniform" => NoiseModel::Uniform { eta: level },
            "adversarial_sign" => NoiseModel::AdversarialSign { epsilon: level },
            other => return Err(Error::InvalidArgument(format!("unknown noise kind `{other}`"))),
        };
        Ok(model)
    }
}

/// Draws `w` from `noise` (stream 0 of a seed derived from `seed`) and
/// returns observations with `b + w`.
pub fn add_noise<S: Scalar>(obs: &Observations<S>, noise: NoiseModel, seed: u64) -> Result<Observations<S>> {
    let level = noise.level();
    if level.is_nan() || level < 0.0 || level.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "{} noise level must be finite and nonnegative, got {level}",
            noise.kind()
        )));
    }
    if obs.w.is_some() {
        return Err(Error::InvalidArgument("observations already carry noise".into()));
    }
    let mut stream = Stream::new(derive_seed(seed, &[label("noise")]), 0);
    let w: Vec<f64> = obs
        .b
        .iter()
        .map(|_| {
            // `+ 0.0` folds -0.0 into 0.0 for zero levels
            let v = match noise {
                NoiseModel::Gaussian { sigma } => sigma * stream.normal(),
                NoiseModel::Uniform { eta } => eta * (2.0 * stream.uniform() - 1.0),
                NoiseModel::AdversarialSign { epsilon } => epsilon * stream.rademacher(),
            };
            v + 0.0
        })
        .collect();
    let b = obs.b.iter().zip(&w).map(|(b, w)| b + w).collect();
    Ok(Observations {
        b,
        w: Some(w),
        ground_truth: obs.ground_truth.clone(),
    })
}
