//! JSON interchange formats.
//!
//! Decompositions:
//!
//! ```json
//! {"m":2,"p":2,"n":2,"F":7,"U":[[[1,0],[0,1]], ...],"V":[...],"W":[...]}
//! ```
//!
//! `U` holds `F` row-major `p×m` arrays, `V` holds `n×p` and `W` holds `m×n`.
//!
//! Transforms use a 1-based permutation:
//!
//! ```json
//! {"sigma":[...],"lambda":[...],"mu":[...],"nu":[...],"P":[[..]],"Q":[[..]],"R":[[..]]}
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::decomposition::{Decomposition, Mode};
use crate::equivalence::{EquivalenceCertificate, Rejection, Verdict};
use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, to_f64, Real};
use crate::transforms::InvarianceTransform;

type RowMajor = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionJson {
    pub m: usize,
    pub p: usize,
    pub n: usize,
    #[serde(rename = "F")]
    pub f: usize,
    #[serde(rename = "U")]
    pub u: Vec<RowMajor>,
    #[serde(rename = "V")]
    pub v: Vec<RowMajor>,
    #[serde(rename = "W")]
    pub w: Vec<RowMajor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformJson {
    pub sigma: Vec<usize>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    #[serde(rename = "P")]
    pub p: RowMajor,
    #[serde(rename = "Q")]
    pub q: RowMajor,
    #[serde(rename = "R")]
    pub r: RowMajor,
}

/// Certificate as emitted by the CLI. Timing is left out so that repeated
/// runs produce identical output; the permutation is 1-based like `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateJson {
    pub verdict: Verdict,
    pub permutation: Option<Vec<usize>>,
    pub residual: Option<f64>,
    pub transform: Option<TransformJson>,
    pub mode: Option<Mode>,
    pub reason: Option<Rejection>,
    pub nodes_visited: usize,
    pub leaves: usize,
    pub depth: usize,
}

impl CertificateJson {
    pub fn from_certificate<T: Real>(c: &EquivalenceCertificate<T>) -> Self {
        CertificateJson {
            verdict: c.verdict,
            permutation: c.permutation.as_ref().map(|p| p.iter().map(|&s| s + 1).collect()),
            residual: c.residual,
            transform: c.transform.as_ref().map(TransformJson::from_transform),
            mode: c.mode,
            reason: c.reason.clone(),
            nodes_visited: c.probe_stats.nodes_visited,
            leaves: c.probe_stats.leaves,
            depth: c.probe_stats.depth,
        }
    }
}

fn to_rows<T: Real>(m: &DMatrix<T>) -> RowMajor {
    m.row_iter()
        .map(|row| row.iter().map(|&x| to_f64(x)).collect())
        .collect()
}

fn from_rows<T: Real>(name: &str, rows: &RowMajor, shape: (usize, usize)) -> Result<DMatrix<T>> {
    let (nr, nc) = shape;
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(invalid(format!("{name} is not a {nr}x{nc} array")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{name} contains a non-finite value")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| lit::<T>(rows[i][j])))
}

impl DecompositionJson {
    pub fn from_decomposition<T: Real>(d: &Decomposition<T>) -> Self {
        let (m, p, n) = d.dims();
        DecompositionJson {
            m,
            p,
            n,
            f: d.terms(),
            u: d.u().iter().map(to_rows).collect(),
            v: d.v().iter().map(to_rows).collect(),
            w: d.w().iter().map(to_rows).collect(),
        }
    }

    pub fn to_decomposition<T: Real>(&self) -> Result<Decomposition<T>> {
        let (m, p, n, f) = (self.m, self.p, self.n, self.f);
        if self.u.len() != f || self.v.len() != f || self.w.len() != f {
            return Err(invalid(format!("F = {f} but factor arrays have lengths {}, {}, {}",
                self.u.len(), self.v.len(), self.w.len())));
        }
        let conv = |name: &str, mats: &[RowMajor], shape| -> Result<Vec<DMatrix<T>>> {
            mats.iter()
                .enumerate()
                .map(|(r, x)| from_rows(&format!("{name}[{r}]"), x, shape))
                .collect()
        };
        Decomposition::new(
            (m, p, n),
            conv("U", &self.u, (p, m))?,
            conv("V", &self.v, (n, p))?,
            conv("W", &self.w, (m, n))?,
        )
    }
}

impl TransformJson {
    pub fn from_transform<T: Real>(t: &InvarianceTransform<T>) -> Self {
        let v = |xs: &[T]| xs.iter().map(|&x| to_f64(x)).collect();
        TransformJson {
            sigma: t.sigma().iter().map(|&s| s + 1).collect(),
            lambda: v(t.lambda()),
            mu: v(t.mu()),
            nu: v(t.nu()),
            p: to_rows(t.p()),
            q: to_rows(t.q()),
            r: to_rows(t.r()),
        }
    }

    pub fn to_transform<T: Real>(&self) -> Result<InvarianceTransform<T>> {
        let square = |name: &str, rows: &RowMajor| -> Result<DMatrix<T>> {
            from_rows(name, rows, (rows.len(), rows.len()))
        };
        let sigma = self
            .sigma
            .iter()
            .map(|&s| s.checked_sub(1).ok_or_else(|| invalid("sigma is 1-based")))
            .collect::<Result<Vec<_>>>()?;
        let v = |name: &str, xs: &[f64]| -> Result<Vec<T>> {
            if xs.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("{name} contains a non-finite value")));
            }
            Ok(xs.iter().map(|&x| lit::<T>(x)).collect())
        };
        InvarianceTransform::new(
            sigma,
            v("lambda", &self.lambda)?,
            v("mu", &self.mu)?,
            v("nu", &self.nu)?,
            square("P", &self.p)?,
            square("Q", &self.q)?,
            square("R", &self.r)?,
        )
    }
}

fn parse_err(e: serde_json::Error) -> Error {
    invalid(format!("malformed JSON: {e}"))
}

pub fn decomposition_from_json<T: Real>(text: &str) -> Result<Decomposition<T>> {
    serde_json::from_str::<DecompositionJson>(text)
        .map_err(parse_err)?
        .to_decomposition()
}

pub fn decomposition_to_json<T: Real>(d: &Decomposition<T>) -> String {
    serde_json::to_string_pretty(&DecompositionJson::from_decomposition(d))
        .expect("plain data serializes")
}

pub fn transform_from_json<T: Real>(text: &str) -> Result<InvarianceTransform<T>> {
    serde_json::from_str::<TransformJson>(text)
        .map_err(parse_err)?
        .to_transform()
}

pub fn transform_to_json<T: Real>(t: &InvarianceTransform<T>) -> String {
    serde_json::to_string_pretty(&TransformJson::from_transform(t)).expect("plain data serializes")
}
