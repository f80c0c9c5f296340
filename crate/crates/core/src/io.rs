//! JSON files exchanged by the command-line tools.
//!
//! Measurement file:
//!
//! ```json
//! {"schema_version": 1, "model": "real_gaussian", "n": 2, "m": 4, "seed": 1,
//!  "vectors": [[[re, im], ...], ...], "b": [...], "w": [...], "x0": [[re, im], ...]}
//! ```
//!
//! `vectors` (one row of `[re, im]` pairs per measurement), `w` and `x0` are
//! optional; without `vectors` the ensemble is regenerated from
//! `(model, n, m, seed)`. Explicit models always carry `vectors`.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{sample_ensemble, Ensemble, Model, NoiseModel, Observations};
use crate::scalar::{Field, Scalar};
use crate::solver::SolverResult;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

pub fn encode_vector<S: Scalar>(v: &[S]) -> Vec<[f64; 2]> {
    v.iter().map(|e| [e.re(), e.im()]).collect()
}

pub fn decode_vector<S: Scalar>(pairs: &[[f64; 2]], what: &str) -> Result<Vec<S>> {
    pairs
        .iter()
        .map(|&[re, im]| {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Parse(format!("{what} contains a non-finite entry")));
            }
            if S::FIELD == Field::Real && im != 0.0 {
                return Err(Error::FieldMismatch {
                    expected: Field::Real,
                    found: Field::Complex,
                });
            }
            Ok(S::from_parts(re, im))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub model: Model,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<[f64; 2]>>>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<[f64; 2]>>,
    /// Noise model that produced `w`, for provenance only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
}

/// A loaded ensemble with its observations, in whichever field the file uses.
#[derive(Debug, Clone)]
pub enum Problem {
    Real(Ensemble<f64>, Observations<f64>),
    Complex(Ensemble<Complex64>, Observations<Complex64>),
}

impl MeasurementFile {
    pub fn from_parts<S: Scalar>(
        ens: &Ensemble<S>,
        obs: &Observations<S>,
        include_vectors: bool,
        noise: Option<NoiseModel>,
    ) -> Self {
        let vectors = (include_vectors || ens.model().is_explicit()).then(|| ens.rows().map(encode_vector).collect());
        Self {
            schema_version: SCHEMA_VERSION,
            model: ens.model(),
            n: ens.n(),
            m: ens.m(),
            seed: ens.seed(),
            vectors,
            b: obs.b.clone(),
            w: obs.w.clone(),
            x0: obs.ground_truth.as_deref().map(encode_vector),
            noise,
        }
    }

    pub fn load(&self) -> Result<Problem> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        Ok(match self.model.field() {
            Field::Real => {
                let (e, o) = self.load_typed::<f64>()?;
                Problem::Real(e, o)
            }
            Field::Complex => {
                let (e, o) = self.load_typed::<Complex64>()?;
                Problem::Complex(e, o)
            }
        })
    }

    fn load_typed<S: Scalar>(&self) -> Result<(Ensemble<S>, Observations<S>)> {
        let (n, m) = (self.n, self.m);
        if self.b.len() != m {
            return Err(Error::Dimension(format!("b has {} entries but m = {m}", self.b.len())));
        }
        if let Some(w) = &self.w {
            if w.len() != m {
                return Err(Error::Dimension(format!("w has {} entries but m = {m}", w.len())));
            }
        }
        let ens = match &self.vectors {
            Some(rows) => {
                if rows.len() != m {
                    return Err(Error::Dimension(format!("vectors has {} rows but m = {m}", rows.len())));
                }
                if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
                    return Err(Error::Dimension(format!(
                        "vectors row {i} has length {} but n = {n}",
                        r.len()
                    )));
                }
                let decoded = rows
                    .iter()
                    .map(|r| decode_vector::<S>(r, "vectors"))
                    .collect::<Result<Vec<_>>>()?;
                Ensemble::from_rows(&decoded)?.with_provenance(self.model, self.seed)
            }
            None if self.model.is_explicit() => {
                return Err(Error::Parse(format!("model `{}` requires `vectors`", self.model)));
            }
            None => sample_ensemble::<S>(self.model, n, m, self.seed)?,
        };
        let ground_truth = match &self.x0 {
            Some(x) => {
                if x.len() != n {
                    return Err(Error::Dimension(format!("x0 has length {} but n = {n}", x.len())));
                }
                Some(decode_vector::<S>(x, "x0")?)
            }
            None => None,
        };
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("b contains a non-finite entry".into()));
        }
        Ok((
            ens,
            Observations {
                b: self.b.clone(),
                w: self.w.clone(),
                ground_truth,
            },
        ))
    }
}

/// Solver output as written by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub schema_version: u32,
    pub l1_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: f64,
    pub x_hat: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frob_error_vs_truth: Option<f64>,
}

impl SolverReport {
    pub fn new<S: Scalar>(result: &SolverResult<S>, truth: Option<&[S]>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            l1_residual: result.l1_residual,
            iterations: result.iterations,
            converged: result.converged,
            trace: result.trace,
            x_hat: encode_vector(&result.x_hat),
            frob_error_vs_truth: truth.map(|x0| result.frob_error(x0)),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Writes `contents` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
