//! Dense linear-algebra helpers built on nalgebra.
//!
//! Vectorization is column stacking everywhere in the crate, which is also
//! nalgebra's storage order, so `vec(X)` is a copy of the backing slice.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{lit, Real};

pub fn vec_of<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec<T: Real>(v: &[T], rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_column_slice(rows, cols, v)
}

pub fn kron<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// Singular value decomposition with singular values sorted in descending
/// order and a complete set of right singular vectors.
///
/// Wide matrices are padded with zero rows so that the right factor spans the
/// whole domain; the padded singular values are exact zeros.
pub struct FullSvd<T: Real> {
    pub singular_values: Vec<T>,
    /// Columns are right singular vectors, ordered like `singular_values`.
    pub v: DMatrix<T>,
}

pub fn full_svd<T: Real>(a: &DMatrix<T>) -> FullSvd<T> {
    let (rows, cols) = a.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut v = DMatrix::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        v.set_column(dst, &v_t.row(src).transpose());
    }
    FullSvd {
        singular_values: order.iter().map(|&i| sv[i]).collect(),
        v,
    }
}

/// Descending singular values (length `min(rows, cols)`).
pub fn singular_values<T: Real>(a: &DMatrix<T>) -> Vec<T> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<T> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Rank counted as the singular values strictly above `rel_tol * sigma_max`.
pub fn numerical_rank<T: Real>(a: &DMatrix<T>, rel_tol: T) -> usize {
    let sv = singular_values(a);
    match sv.first() {
        Some(&s0) if s0 > T::zero() => sv.iter().filter(|&&s| s > rel_tol * s0).count(),
        _ => 0,
    }
}

/// Ratio of the extreme singular values of a square matrix; infinite when
/// singular.
pub fn condition_number<T: Real>(a: &DMatrix<T>) -> T {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() => hi / lo,
        _ => lit(f64::INFINITY),
    }
}

/// Numerical nullspace of a (possibly wide) matrix.
#[derive(Debug, Clone)]
pub struct Nullspace<T: Real> {
    /// Columns form an orthonormal basis of the nullspace.
    pub basis: DMatrix<T>,
    /// All `ncols` singular values in descending order, zero-padded.
    pub spectrum: Vec<T>,
}

impl<T: Real> Nullspace<T> {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `sigma_k / sigma_{k+1}` around the nullspace boundary, where `k` is
    /// the rank. Large values mean a clean gap.
    pub fn gap_ratio(&self) -> Option<f64> {
        let rank = self.spectrum.len() - self.dim();
        if rank == 0 || rank == self.spectrum.len() {
            return None;
        }
        let above = crate::scalar::to_f64(self.spectrum[rank - 1]);
        let below = crate::scalar::to_f64(self.spectrum[rank]);
        Some(if below > 0.0 { above / below } else { f64::INFINITY })
    }

    pub fn spectrum_f64(&self) -> Vec<f64> {
        self.spectrum.iter().map(|&s| crate::scalar::to_f64(s)).collect()
    }
}

/// Nullspace from the singular values below `rel_tol * sigma_max`.
pub fn nullspace<T: Real>(a: &DMatrix<T>, rel_tol: T) -> Nullspace<T> {
    let cols = a.ncols();
    if cols == 0 {
        return Nullspace {
            basis: DMatrix::zeros(0, 0),
            spectrum: Vec::new(),
        };
    }
    let FullSvd { singular_values, v } = full_svd(a);
    let s0 = singular_values[0];
    let rank = if s0 > T::zero() {
        singular_values.iter().filter(|&&s| s > rel_tol * s0).count()
    } else {
        0
    };
    let basis = v.columns(rank, cols - rank).into_owned();
    Nullspace {
        basis,
        spectrum: singular_values,
    }
}

/// Nearest Kronecker product `a ⊗ b` to `m` via the rearrangement that turns
/// a Kronecker product into a rank-one matrix.
///
/// Returns `(a, b, sigma_2 / sigma_1)`; the ratio is zero for an exact
/// Kronecker product.
pub fn nearest_kronecker<T: Real>(
    m: &DMatrix<T>,
    a_shape: (usize, usize),
    b_shape: (usize, usize),
) -> (DMatrix<T>, DMatrix<T>, T) {
    let (ar, ac) = a_shape;
    let (br, bc) = b_shape;
    assert_eq!(m.shape(), (ar * br, ac * bc));
    // Row (i + ar*j) of the rearrangement holds vec of block (i, j).
    let mut rearranged = DMatrix::zeros(ar * ac, br * bc);
    for j in 0..ac {
        for i in 0..ar {
            let block = m.view((i * br, j * bc), (br, bc));
            for (k, &x) in block.iter().enumerate() {
                rearranged[(i + ar * j, k)] = x;
            }
        }
    }
    let svd = rearranged.clone().svd(false, true);
    let v_t = svd.v_t.expect("right vectors requested");
    let sv = &svd.singular_values;
    let (mut i0, mut i1) = (0usize, usize::MAX);
    for i in 1..sv.len() {
        if sv[i] > sv[i0] {
            i0 = i;
        }
    }
    for i in 0..sv.len() {
        if i != i0 && (i1 == usize::MAX || sv[i] > sv[i1]) {
            i1 = i;
        }
    }
    let s0 = sv[i0];
    let ratio = if i1 == usize::MAX || s0 <= T::zero() {
        T::zero()
    } else {
        sv[i1] / s0
    };
    let root = s0.sqrt();
    // Left factor from the right singular vector: nalgebra's left vectors
    // can lose accuracy when the trailing singular values are degenerate.
    let v = v_t.row(i0).transpose();
    let a_vec: Vec<T> = if root > T::zero() {
        (&rearranged * &v).iter().map(|&x| x / root).collect()
    } else {
        vec![T::zero(); ar * ac]
    };
    let b_vec: Vec<T> = v.iter().map(|&x| x * root).collect();
    (unvec(&a_vec, ar, ac), unvec(&b_vec, br, bc), ratio)
}

/// Greedy column selection with pivoting on the largest remaining residual
/// norm (modified Gram-Schmidt). Returns at most `max_cols` indices of
/// columns judged independent at relative tolerance `rel_tol`.
pub fn pivoted_columns<T: Real>(a: &DMatrix<T>, max_cols: usize, rel_tol: T) -> Vec<usize> {
    let (rows, cols) = a.shape();
    let mut residual = a.clone();
    let scale = (0..cols)
        .map(|j| a.column(j).norm())
        .fold(T::zero(), |acc, x| acc.max(x));
    let mut chosen = Vec::new();
    if scale <= T::zero() {
        return chosen;
    }
    let mut used = vec![false; cols];
    while chosen.len() < max_cols.min(rows) {
        let mut best = None;
        let mut best_norm = T::zero();
        for j in 0..cols {
            if used[j] {
                continue;
            }
            let nrm = residual.column(j).norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        if best_norm <= rel_tol * scale {
            break;
        }
        used[j] = true;
        chosen.push(j);
        let q = residual.column(j) / best_norm;
        for k in 0..cols {
            if !used[k] {
                let proj = q.dot(&residual.column(k));
                let mut col = residual.column_mut(k);
                col.axpy(-proj, &q, T::one());
            }
        }
    }
    chosen
}

/// Picks, in the given order, the first columns that increase the rank.
pub fn ordered_columns<T: Real>(
    a: &DMatrix<T>,
    order: &[usize],
    max_cols: usize,
    rel_tol: T,
) -> Vec<usize> {
    let rows = a.nrows();
    let scale = (0..a.ncols())
        .map(|j| a.column(j).norm())
        .fold(T::zero(), |acc, x| acc.max(x));
    let mut basis: Vec<DVector<T>> = Vec::new();
    let mut chosen = Vec::new();
    for &j in order {
        if chosen.len() == max_cols.min(rows) {
            break;
        }
        let mut r: DVector<T> = a.column(j).into_owned();
        for q in &basis {
            let proj = q.dot(&r);
            r.axpy(-proj, q, T::one());
        }
        // second pass for stability
        for q in &basis {
            let proj = q.dot(&r);
            r.axpy(-proj, q, T::one());
        }
        let nrm = r.norm();
        if nrm > rel_tol * scale && scale > T::zero() {
            basis.push(r / nrm);
            chosen.push(j);
        }
    }
    chosen
}
