//! Polyadic decompositions of matrix multiplication tensors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::scalar::{lit, to_f64, Real};
use crate::tensor::MatMulTensor;

/// Acceptance threshold on the entrywise residual of a decomposition.
pub const DEFAULT_VERIFY_TOL: f64 = 1e-9;

/// One of the three factor slots of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    U,
    V,
    W,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::U, Mode::V, Mode::W];

    pub fn index(self) -> usize {
        match self {
            Mode::U => 0,
            Mode::V => 1,
            Mode::W => 2,
        }
    }

    /// Rotation shift that moves this mode into the `U` slot.
    pub fn shift_to_front(self) -> usize {
        match self {
            Mode::U => 0,
            Mode::W => 1,
            Mode::V => 2,
        }
    }
}

/// An `F`-term decomposition `Φ(A,B) = Σ trace(U_r A) trace(V_r B) W_r`.
///
/// `U_r` is `p×m`, `V_r` is `n×p` and `W_r` is `m×n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T: Real> {
    m: usize,
    p: usize,
    n: usize,
    u: Vec<DMatrix<T>>,
    v: Vec<DMatrix<T>>,
    w: Vec<DMatrix<T>>,
}

/// Factors gathered column-wise: column `r` of `ut` is `vec(U_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedFactors<T: Real> {
    pub ut: DMatrix<T>,
    pub vt: DMatrix<T>,
    pub wt: DMatrix<T>,
}

impl<T: Real> StackedFactors<T> {
    pub fn mode(&self, mode: Mode) -> &DMatrix<T> {
        match mode {
            Mode::U => &self.ut,
            Mode::V => &self.vt,
            Mode::W => &self.wt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationReport {
    pub max_residual: f64,
    pub frobenius_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpanCheck {
    pub spans: bool,
    pub rank: usize,
    pub required: usize,
    pub smallest_singular_value: f64,
}

impl<T: Real> Decomposition<T> {
    pub fn new(
        (m, p, n): (usize, usize, usize),
        u: Vec<DMatrix<T>>,
        v: Vec<DMatrix<T>>,
        w: Vec<DMatrix<T>>,
    ) -> Result<Self> {
        if m == 0 || p == 0 || n == 0 {
            return Err(invalid("dimensions must be positive"));
        }
        let f = u.len();
        if f == 0 {
            return Err(invalid("a decomposition needs at least one term"));
        }
        if v.len() != f || w.len() != f {
            return Err(invalid(format!(
                "factor counts differ: {} U, {} V, {} W",
                f,
                v.len(),
                w.len()
            )));
        }
        let check = |name: &str, mats: &[DMatrix<T>], shape: (usize, usize)| -> Result<()> {
            for (r, mat) in mats.iter().enumerate() {
                if mat.shape() != shape {
                    return Err(invalid(format!(
                        "{name}[{r}] has shape {:?}, expected {:?}",
                        mat.shape(),
                        shape
                    )));
                }
                if mat.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(format!("{name}[{r}] has a non-finite entry")));
                }
            }
            Ok(())
        };
        check("U", &u, (p, m))?;
        check("V", &v, (n, p))?;
        check("W", &w, (m, n))?;
        Ok(Decomposition { m, p, n, u, v, w })
    }

    /// Rebuilds a decomposition from stacked factor matrices.
    pub fn from_stacked(dims: (usize, usize, usize), s: &StackedFactors<T>) -> Result<Self> {
        let (m, p, n) = dims;
        let f = s.ut.ncols();
        if s.ut.nrows() != p * m || s.vt.nrows() != n * p || s.wt.nrows() != m * n {
            return Err(invalid("stacked factor heights do not match dimensions"));
        }
        if s.vt.ncols() != f || s.wt.ncols() != f {
            return Err(invalid("stacked factors have different term counts"));
        }
        let split = |mat: &DMatrix<T>, rows, cols| -> Vec<DMatrix<T>> {
            (0..f)
                .map(|r| linalg::unvec(mat.column(r).as_slice(), rows, cols))
                .collect()
        };
        Decomposition::new(dims, split(&s.ut, p, m), split(&s.vt, n, p), split(&s.wt, m, n))
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.p, self.n)
    }

    /// Number of rank-1 terms `F`.
    pub fn terms(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self) -> &[DMatrix<T>] {
        &self.u
    }

    pub fn v(&self) -> &[DMatrix<T>] {
        &self.v
    }

    pub fn w(&self) -> &[DMatrix<T>] {
        &self.w
    }

    pub fn factors(&self, mode: Mode) -> &[DMatrix<T>] {
        match mode {
            Mode::U => &self.u,
            Mode::V => &self.v,
            Mode::W => &self.w,
        }
    }

    pub fn into_parts(self) -> (Vec<DMatrix<T>>, Vec<DMatrix<T>>, Vec<DMatrix<T>>) {
        (self.u, self.v, self.w)
    }

    pub fn stacked(&self) -> StackedFactors<T> {
        let stack = |mats: &[DMatrix<T>]| {
            let rows = mats[0].len();
            let mut out = DMatrix::zeros(rows, mats.len());
            for (r, mat) in mats.iter().enumerate() {
                out.column_mut(r).copy_from_slice(mat.as_slice());
            }
            out
        };
        StackedFactors {
            ut: stack(&self.u),
            vt: stack(&self.v),
            wt: stack(&self.w),
        }
    }

    pub fn tensor(&self) -> MatMulTensor {
        MatMulTensor::new(self.m, self.p, self.n).expect("dimensions validated at construction")
    }

    /// Dense `Σ_r vec(U_r) ⊗ vec(V_r) ⊗ vec(W_r)` laid out like
    /// [`MatMulTensor::entries`].
    pub fn reconstruct(&self) -> Vec<T> {
        let s = self.stacked();
        let (ni, nj, nk) = (s.ut.nrows(), s.vt.nrows(), s.wt.nrows());
        let mut out = vec![T::zero(); ni * nj * nk];
        for r in 0..self.terms() {
            for i in 0..ni {
                let a = s.ut[(i, r)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..nj {
                    let ab = a * s.vt[(j, r)];
                    if ab == T::zero() {
                        continue;
                    }
                    let base = (i * nj + j) * nk;
                    for k in 0..nk {
                        out[base + k] += ab * s.wt[(k, r)];
                    }
                }
            }
        }
        out
    }

    /// Entrywise residual against the matrix multiplication tensor.
    pub fn verify(&self, tol: f64) -> VerificationReport {
        let tensor = self.tensor();
        let rec = self.reconstruct();
        let mut max = 0.0f64;
        let mut sq = 0.0f64;
        for (x, &e) in rec.iter().zip(tensor.entries()) {
            let d = (to_f64(*x) - f64::from(e)).abs();
            max = max.max(d);
            sq += d * d;
        }
        VerificationReport {
            max_residual: max,
            frobenius_residual: sq.sqrt(),
            tol,
            passed: max < tol,
        }
    }

    /// Cyclic rotation of the factor slots.
    ///
    /// `shift = 1` gives `(W, U, V)`, a decomposition of `Φ(n, m, p)`;
    /// `shift = 2` gives `(V, W, U)` for `Φ(p, n, m)`.
    pub fn cyclic_rotate(&self, shift: usize) -> Result<Self> {
        let (m, p, n) = self.dims();
        match shift % 3 {
            0 => Ok(self.clone()),
            1 => Decomposition::new((n, m, p), self.w.clone(), self.u.clone(), self.v.clone()),
            _ => Decomposition::new((p, n, m), self.v.clone(), self.w.clone(), self.u.clone()),
        }
    }

    /// Applies a term permutation: term `r` of the output is term
    /// `sigma[r]` of `self`.
    pub fn permuted(&self, sigma: &[usize]) -> Result<Self> {
        let f = self.terms();
        check_permutation(sigma, f)?;
        let pick = |mats: &[DMatrix<T>]| sigma.iter().map(|&s| mats[s].clone()).collect();
        Decomposition::new(self.dims(), pick(&self.u), pick(&self.v), pick(&self.w))
    }

    /// Triple products `M_r = W_r V_r U_r` (each `m×m`).
    pub fn triple_products(&self) -> Vec<DMatrix<T>> {
        (0..self.terms())
            .map(|r| &self.w[r] * &self.v[r] * &self.u[r])
            .collect()
    }

    /// Numerical rank of the `F` rank-1 terms viewed as vectors of the
    /// tensor space.
    pub fn term_rank(&self, rel_tol: T) -> usize {
        let s = self.stacked();
        let (ni, nj, nk) = (s.ut.nrows(), s.vt.nrows(), s.wt.nrows());
        let f = self.terms();
        let mut terms = DMatrix::zeros(ni * nj * nk, f);
        for r in 0..f {
            for i in 0..ni {
                for j in 0..nj {
                    let ab = s.ut[(i, r)] * s.vt[(j, r)];
                    for k in 0..nk {
                        terms[((i * nj + j) * nk + k, r)] = ab * s.wt[(k, r)];
                    }
                }
            }
        }
        linalg::numerical_rank(&terms, rel_tol)
    }

    /// Largest absolute difference between corresponding factor entries.
    pub fn max_entry_deviation(&self, other: &Self) -> Result<f64> {
        if self.dims() != other.dims() || self.terms() != other.terms() {
            return Err(invalid("decompositions have different shapes"));
        }
        let mut dev = 0.0f64;
        for mode in Mode::ALL {
            for (a, b) in self.factors(mode).iter().zip(other.factors(mode)) {
                dev = dev.max(to_f64((a - b).amax()));
            }
        }
        Ok(dev)
    }

    /// Checks that the factors indexed by `index_set` span the full factor
    /// space of `mode`.
    ///
    /// For a valid decomposition this holds whenever `|I|` plus the
    /// dimension opposite to the mode exceeds `F`; sets that are too small
    /// are rejected because nothing is guaranteed for them.
    pub fn factor_span_check(&self, mode: Mode, index_set: &[usize], rel_tol: T) -> Result<SpanCheck> {
        let (m, p, n) = self.dims();
        let f = self.terms();
        let (opposite, required) = match mode {
            Mode::U => (n, p * m),
            Mode::V => (m, n * p),
            Mode::W => (p, m * n),
        };
        let mut seen = vec![false; f];
        for &r in index_set {
            if r >= f || std::mem::replace(&mut seen[r], true) {
                return Err(invalid(format!("index set entry {r} out of range or repeated")));
            }
        }
        if index_set.len() + opposite < f + 1 {
            return Err(invalid(format!(
                "index set of size {} is too small: need |I| + {opposite} >= {}",
                index_set.len(),
                f + 1
            )));
        }
        let stacked = self.stacked();
        let full = stacked.mode(mode);
        let sub = full.select_columns(index_set.iter());
        let sv = linalg::singular_values(&sub);
        let s0 = sv.first().copied().unwrap_or_else(T::zero);
        let rank = sv.iter().filter(|&&s| s > rel_tol * s0).count();
        let smallest = if sv.len() >= required { sv[required - 1] } else { T::zero() };
        Ok(SpanCheck {
            spans: rank == required,
            rank,
            required,
            smallest_singular_value: to_f64(smallest),
        })
    }

    /// Converts the scalar type.
    pub fn cast<S: Real>(&self) -> Decomposition<S> {
        let conv = |mats: &[DMatrix<T>]| -> Vec<DMatrix<S>> {
            mats.iter().map(|x| x.map(|e| lit::<S>(to_f64(e)))).collect()
        };
        Decomposition {
            m: self.m,
            p: self.p,
            n: self.n,
            u: conv(&self.u),
            v: conv(&self.v),
            w: conv(&self.w),
        }
    }
}

pub(crate) fn check_permutation(sigma: &[usize], f: usize) -> Result<()> {
    if sigma.len() != f {
        return Err(invalid(format!("permutation has length {}, expected {f}", sigma.len())));
    }
    let mut seen = vec![false; f];
    for &s in sigma {
        if s >= f || std::mem::replace(&mut seen[s], true) {
            return Err(Error::InvalidArgument(format!("{sigma:?} is not a permutation")));
        }
    }
    Ok(())
}
