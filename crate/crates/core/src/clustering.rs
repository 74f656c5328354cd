//! Clustering number of a matrix: the largest number of linearly
//! independent subspaces whose union contains every column.
//!
//! Two routes are provided. The graph route needs full row rank and no zero
//! columns: express all columns in a basis made of `m` of them and count the
//! connected components of the "shares a nonzero coordinate" graph. The
//! nullspace route works for any matrix: the solution space of
//! `M A = A diag(ξ)` has dimension `cl(A) + (m-1)(m-r) + Z` where `r` is the
//! rank and `Z` the number of zero columns.

use nalgebra::DMatrix;
use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::decomposition::{Decomposition, Mode};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{lit, Real};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_ENTRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Graph,
    Nullspace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringReport {
    pub value: usize,
    pub method: Method,
    /// Graph route: basis columns grouped by connected component (0-based
    /// column indices of the input, each group sorted).
    pub components: Option<Vec<Vec<usize>>>,
    /// Graph route: every column assigned to its component, same order as
    /// `components`.
    pub column_groups: Option<Vec<Vec<usize>>>,
    pub rank: usize,
    pub zero_columns: usize,
    /// Nullspace route: `dim(S)`.
    pub nullspace_dim: Option<usize>,
    /// Nullspace route: descending singular values of the linearized system.
    pub spectrum: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisSelection {
    /// Column-pivoted Gram-Schmidt on unit-normalized columns; ties go to
    /// the lower index.
    Pivoted,
    /// First independent columns in the given order.
    Ordered(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphOptions {
    pub rank_tol: f64,
    /// A coordinate counts as nonzero above `entry_tol` times the largest
    /// coordinate magnitude of its column.
    pub entry_tol: f64,
    pub basis: BasisSelection,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            rank_tol: DEFAULT_RANK_TOL,
            entry_tol: DEFAULT_ENTRY_TOL,
            basis: BasisSelection::Pivoted,
        }
    }
}

fn column_norms<T: Real>(a: &DMatrix<T>) -> Vec<T> {
    (0..a.ncols()).map(|j| a.column(j).norm()).collect()
}

/// Columns whose norm is at most `rel_tol` times the largest column norm.
/// An all-zero matrix has only zero columns.
pub fn zero_column_mask<T: Real>(a: &DMatrix<T>, rel_tol: T) -> Vec<bool> {
    let norms = column_norms(a);
    let max = norms.iter().fold(T::zero(), |acc, &x| acc.max(x));
    norms.iter().map(|&x| max <= T::zero() || x <= rel_tol * max).collect()
}

/// Pivoted selection on unit columns, preferring lower indices on ties.
fn pivoted_basis<T: Real>(a: &DMatrix<T>, rel_tol: T) -> Vec<usize> {
    let (m, n) = a.shape();
    let mut residual = a.clone();
    for j in 0..n {
        let nrm = residual.column(j).norm();
        if nrm > T::zero() {
            residual.column_mut(j).unscale_mut(nrm);
        }
    }
    let tie = T::one() + lit::<T>(1e-12);
    let mut used = vec![false; n];
    let mut chosen = Vec::with_capacity(m);
    while chosen.len() < m {
        let mut best: Option<(usize, T)> = None;
        for j in (0..n).filter(|&j| !used[j]) {
            let nrm = residual.column(j).norm();
            if best.is_none_or(|(_, b)| nrm > b * tie) {
                best = Some((j, nrm));
            }
        }
        let Some((j, nrm)) = best else { break };
        if nrm <= rel_tol {
            break;
        }
        used[j] = true;
        chosen.push(j);
        let q = residual.column(j) / nrm;
        for k in (0..n).filter(|&k| !used[k]) {
            let proj = q.dot(&residual.column(k));
            residual.column_mut(k).axpy(-proj, &q, T::one());
        }
    }
    chosen
}

/// Clustering number through the connected components of the coordinate
/// graph. Requires full row rank and no zero columns.
pub fn clustering_graph<T: Real>(a: &DMatrix<T>, opts: &GraphOptions) -> Result<ClusteringReport> {
    let (m, n) = a.shape();
    let rank_tol = lit::<T>(opts.rank_tol);
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if zero_column_mask(a, rank_tol).iter().any(|&z| z) {
        return Err(Error::PreconditionViolation(
            "matrix has a zero column; use clustering_general".into(),
        ));
    }
    let basis = match &opts.basis {
        BasisSelection::Pivoted => pivoted_basis(a, rank_tol),
        BasisSelection::Ordered(order) => {
            let mut seen = vec![false; n];
            if order.len() != n || order.iter().any(|&j| j >= n || std::mem::replace(&mut seen[j], true)) {
                return Err(Error::InvalidArgument("basis order must be a permutation of the columns".into()));
            }
            linalg::ordered_columns(a, order, m, rank_tol)
        }
    };
    if basis.len() < m {
        return Err(Error::PreconditionViolation(format!(
            "matrix has numerical rank {} < {m} rows; use clustering_general",
            basis.len()
        )));
    }
    let a_basis = a.select_columns(basis.iter());
    let lu = a_basis.clone().lu();
    let coords = lu.solve(a).ok_or_else(|| {
        Error::PreconditionViolation("selected basis is singular; use clustering_general".into())
    })?;

    let entry_tol = lit::<T>(opts.entry_tol);
    let mut uf = UnionFind::<usize>::new(m);
    let is_basis = {
        let mut mask = vec![false; n];
        for &b in &basis {
            mask[b] = true;
        }
        mask
    };
    let mut support_of = vec![Vec::new(); n];
    for j in 0..n {
        let col = coords.column(j);
        let scale = col.amax();
        let support: Vec<usize> = (0..m).filter(|&i| col[i].abs() > entry_tol * scale).collect();
        if !is_basis[j] {
            for w in support.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        support_of[j] = support;
    }
    for (node, &b) in basis.iter().enumerate() {
        support_of[b] = vec![node];
    }

    let labels = uf.into_labeling();
    let mut roots: Vec<usize> = labels.clone();
    roots.sort_unstable();
    roots.dedup();
    let group_of = |node: usize| roots.binary_search(&labels[node]).expect("root present");
    let mut components = vec![Vec::new(); roots.len()];
    for (node, &b) in basis.iter().enumerate() {
        components[group_of(node)].push(b);
    }
    let mut column_groups = vec![Vec::new(); roots.len()];
    for (j, support) in support_of.iter().enumerate() {
        if let Some(&node) = support.first() {
            column_groups[group_of(node)].push(j);
        }
    }
    // Order groups by their smallest basis column for stable output.
    let mut order: Vec<usize> = (0..components.len()).collect();
    for c in components.iter_mut() {
        c.sort_unstable();
    }
    order.sort_by_key(|&g| components[g][0]);
    let components: Vec<Vec<usize>> = order.iter().map(|&g| components[g].clone()).collect();
    let column_groups: Vec<Vec<usize>> = order.iter().map(|&g| column_groups[g].clone()).collect();

    Ok(ClusteringReport {
        value: components.len(),
        method: Method::Graph,
        components: Some(components),
        column_groups: Some(column_groups),
        rank: m,
        zero_columns: 0,
        nullspace_dim: None,
        spectrum: None,
    })
}

/// The homogeneous system `M A - A' diag(ξ) = 0` in the unknowns
/// `(vec(M), ξ)`, one block of `m` rows per column.
pub fn linearized_system<T: Real>(a: &DMatrix<T>, a_prime: &DMatrix<T>) -> DMatrix<T> {
    let (m, n) = a.shape();
    assert_eq!(a_prime.shape(), (m, n));
    let mut sys = DMatrix::zeros(m * n, m * m + n);
    for j in 0..n {
        for i in 0..m {
            let row = j * m + i;
            for c in 0..m {
                sys[(row, i + m * c)] = a[(c, j)];
            }
            sys[(row, m * m + j)] = -a_prime[(i, j)];
        }
    }
    sys
}

/// Clustering number of any real matrix from the dimension of the solution
/// space of `M A = A diag(ξ)`.
pub fn clustering_general<T: Real>(a: &DMatrix<T>, rank_tol: f64) -> Result<ClusteringReport> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let tol = lit::<T>(rank_tol);
    let ns = linalg::nullspace(&linearized_system(a, a), tol);
    let rank = linalg::numerical_rank(a, tol);
    let zero_columns = zero_column_mask(a, tol).iter().filter(|&&z| z).count();
    let dim = ns.dim();
    let offset = (m - 1) * (m - rank) + zero_columns;
    let spectrum = ns.spectrum_f64();
    if dim < offset + 1 {
        return Err(Error::NumericalRankAmbiguity {
            message: format!(
                "dim(S) = {dim} but (m-1)(m-r) + Z = {offset} with m = {m}, r = {rank}, Z = {zero_columns}"
            ),
            spectrum,
        });
    }
    Ok(ClusteringReport {
        value: dim - offset,
        method: Method::Nullspace,
        components: None,
        column_groups: None,
        rank,
        zero_columns,
        nullspace_dim: Some(dim),
        spectrum: Some(spectrum),
    })
}

/// Clustering numbers of the three stacked factor matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringVector {
    pub u: ClusteringReport,
    pub v: ClusteringReport,
    pub w: ClusteringReport,
}

impl ClusteringVector {
    pub fn values(&self) -> [usize; 3] {
        [self.u.value, self.v.value, self.w.value]
    }

    pub fn get(&self, mode: Mode) -> &ClusteringReport {
        match mode {
            Mode::U => &self.u,
            Mode::V => &self.v,
            Mode::W => &self.w,
        }
    }

    /// Modes whose clustering number is one.
    pub fn unit_modes(&self) -> Vec<Mode> {
        Mode::ALL.into_iter().filter(|&md| self.get(md).value == 1).collect()
    }
}

pub fn clustering_vector<T: Real>(dec: &Decomposition<T>, rank_tol: f64) -> Result<ClusteringVector> {
    let s = dec.stacked();
    Ok(ClusteringVector {
        u: clustering_general(&s.ut, rank_tol)?,
        v: clustering_general(&s.vt, rank_tol)?,
        w: clustering_general(&s.wt, rank_tol)?,
    })
}
