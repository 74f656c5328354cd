//! Known exact decompositions.
//!
//! Products are written the way they appear in the literature,
//! `M_r = (Σ a·A[x,z]) (Σ b·B[z,y])` with `C[x,y] = Σ c·M_r`, and translated
//! into trace-pairing factors `U_r = (A-coefficients)^T`,
//! `V_r = (B-coefficients)^T`, `W_r = C-coefficients`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::decomposition::Decomposition;
use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Strassen,
    Laderman,
    /// One term per scalar product `A[x,z] B[z,y]`.
    Naive(usize, usize, usize),
    /// The two-term inner product of length-2 vectors.
    DotProd121,
}

/// 1-based `(row, col, coefficient)` entries.
type Terms = &'static [(usize, usize, i8)];

/// `(A terms, B terms, C terms)` for one product.
type Product = (Terms, Terms, Terms);

const STRASSEN: [Product; 7] = [
    (&[(1, 1, 1), (2, 2, 1)], &[(1, 1, 1), (2, 2, 1)], &[(1, 1, 1), (2, 2, 1)]),
    (&[(2, 1, 1), (2, 2, 1)], &[(1, 1, 1)], &[(2, 1, 1), (2, 2, -1)]),
    (&[(1, 1, 1)], &[(1, 2, 1), (2, 2, -1)], &[(1, 2, 1), (2, 2, 1)]),
    (&[(2, 2, 1)], &[(2, 1, 1), (1, 1, -1)], &[(1, 1, 1), (2, 1, 1)]),
    (&[(1, 1, 1), (1, 2, 1)], &[(2, 2, 1)], &[(1, 1, -1), (1, 2, 1)]),
    (&[(2, 1, 1), (1, 1, -1)], &[(1, 1, 1), (1, 2, 1)], &[(2, 2, 1)]),
    (&[(1, 2, 1), (2, 2, -1)], &[(2, 1, 1), (2, 2, 1)], &[(1, 1, 1)]),
];

const LADERMAN: [Product; 23] = [
    (
        &[(1, 1, 1), (1, 2, 1), (1, 3, 1), (2, 1, -1), (2, 2, -1), (3, 2, -1), (3, 3, -1)],
        &[(2, 2, 1)],
        &[(1, 2, 1)],
    ),
    (&[(1, 1, 1), (2, 1, -1)], &[(1, 2, -1), (2, 2, 1)], &[(2, 1, 1), (2, 2, 1)]),
    (
        &[(2, 2, 1)],
        &[(1, 1, -1), (1, 2, 1), (2, 1, 1), (2, 2, -1), (2, 3, -1), (3, 1, -1), (3, 3, 1)],
        &[(2, 1, 1)],
    ),
    (
        &[(1, 1, -1), (2, 1, 1), (2, 2, 1)],
        &[(1, 1, 1), (1, 2, -1), (2, 2, 1)],
        &[(1, 2, 1), (2, 1, 1), (2, 2, 1)],
    ),
    (&[(2, 1, 1), (2, 2, 1)], &[(1, 1, -1), (1, 2, 1)], &[(1, 2, 1), (2, 2, 1)]),
    (
        &[(1, 1, 1)],
        &[(1, 1, 1)],
        &[(1, 1, 1), (1, 2, 1), (1, 3, 1), (2, 1, 1), (2, 2, 1), (3, 1, 1), (3, 3, 1)],
    ),
    (
        &[(1, 1, -1), (3, 1, 1), (3, 2, 1)],
        &[(1, 1, 1), (1, 3, -1), (2, 3, 1)],
        &[(1, 3, 1), (3, 1, 1), (3, 3, 1)],
    ),
    (&[(1, 1, -1), (3, 1, 1)], &[(1, 3, 1), (2, 3, -1)], &[(3, 1, 1), (3, 3, 1)]),
    (&[(3, 1, 1), (3, 2, 1)], &[(1, 1, -1), (1, 3, 1)], &[(1, 3, 1), (3, 3, 1)]),
    (
        &[(1, 1, 1), (1, 2, 1), (1, 3, 1), (2, 2, -1), (2, 3, -1), (3, 1, -1), (3, 2, -1)],
        &[(2, 3, 1)],
        &[(1, 3, 1)],
    ),
    (
        &[(3, 2, 1)],
        &[(1, 1, -1), (1, 3, 1), (2, 1, 1), (2, 2, -1), (2, 3, -1), (3, 1, -1), (3, 2, 1)],
        &[(3, 1, 1)],
    ),
    (
        &[(1, 3, -1), (3, 2, 1), (3, 3, 1)],
        &[(2, 2, 1), (3, 1, 1), (3, 2, -1)],
        &[(1, 2, 1), (3, 1, 1), (3, 2, 1)],
    ),
    (&[(1, 3, 1), (3, 3, -1)], &[(2, 2, 1), (3, 2, -1)], &[(3, 1, 1), (3, 2, 1)]),
    (
        &[(1, 3, 1)],
        &[(3, 1, 1)],
        &[(1, 1, 1), (1, 2, 1), (1, 3, 1), (2, 1, 1), (2, 3, 1), (3, 1, 1), (3, 2, 1)],
    ),
    (&[(3, 2, 1), (3, 3, 1)], &[(3, 1, -1), (3, 2, 1)], &[(1, 2, 1), (3, 2, 1)]),
    (
        &[(1, 3, -1), (2, 2, 1), (2, 3, 1)],
        &[(2, 3, 1), (3, 1, 1), (3, 3, -1)],
        &[(1, 3, 1), (2, 1, 1), (2, 3, 1)],
    ),
    (&[(1, 3, 1), (2, 3, -1)], &[(2, 3, 1), (3, 3, -1)], &[(2, 1, 1), (2, 3, 1)]),
    (&[(2, 2, 1), (2, 3, 1)], &[(3, 1, -1), (3, 3, 1)], &[(1, 3, 1), (2, 3, 1)]),
    (&[(1, 2, 1)], &[(2, 1, 1)], &[(1, 1, 1)]),
    (&[(2, 3, 1)], &[(3, 2, 1)], &[(2, 2, 1)]),
    (&[(2, 1, 1)], &[(1, 3, 1)], &[(2, 3, 1)]),
    (&[(3, 1, 1)], &[(1, 2, 1)], &[(3, 2, 1)]),
    (&[(3, 3, 1)], &[(3, 3, 1)], &[(3, 3, 1)]),
];

fn dense<T: Real>(rows: usize, cols: usize, terms: &[(usize, usize, i8)]) -> DMatrix<T> {
    let mut out = DMatrix::zeros(rows, cols);
    for &(r, c, x) in terms {
        out[(r - 1, c - 1)] += lit::<T>(f64::from(x));
    }
    out
}

/// Builds a decomposition from literature-style bilinear products.
fn from_products<T: Real>(m: usize, p: usize, n: usize, products: &[Product]) -> Decomposition<T> {
    let mut u = Vec::with_capacity(products.len());
    let mut v = Vec::with_capacity(products.len());
    let mut w = Vec::with_capacity(products.len());
    for (a, b, c) in products {
        u.push(dense::<T>(m, p, a).transpose());
        v.push(dense::<T>(p, n, b).transpose());
        w.push(dense::<T>(m, n, c));
    }
    Decomposition::new((m, p, n), u, v, w).expect("fixture shapes are consistent")
}

fn naive<T: Real>(m: usize, p: usize, n: usize) -> Decomposition<T> {
    let (mut u, mut v, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for x in 0..m {
        for z in 0..p {
            for y in 0..n {
                let mut ur = DMatrix::zeros(p, m);
                ur[(z, x)] = T::one();
                let mut vr = DMatrix::zeros(n, p);
                vr[(y, z)] = T::one();
                let mut wr = DMatrix::zeros(m, n);
                wr[(x, y)] = T::one();
                u.push(ur);
                v.push(vr);
                w.push(wr);
            }
        }
    }
    Decomposition::new((m, p, n), u, v, w).expect("naive shapes are consistent")
}

impl Fixture {
    pub fn build<T: Real>(self) -> Decomposition<T> {
        match self {
            Fixture::Strassen => from_products(2, 2, 2, &STRASSEN),
            Fixture::Laderman => from_products(3, 3, 3, &LADERMAN),
            Fixture::Naive(m, p, n) => naive(m, p, n),
            Fixture::DotProd121 => naive(1, 2, 1),
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fixture::Strassen => write!(f, "strassen"),
            Fixture::Laderman => write!(f, "laderman"),
            Fixture::Naive(m, p, n) => write!(f, "naive({m},{p},{n})"),
            Fixture::DotProd121 => write!(f, "dotprod121"),
        }
    }
}

impl FromStr for Fixture {
    type Err = Error;

    /// Accepts `strassen`, `laderman`, `dotprod121`, and `naive(m,p,n)` or
    /// `naive:m,p,n`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "strassen" => return Ok(Fixture::Strassen),
            "laderman" => return Ok(Fixture::Laderman),
            "dotprod121" => return Ok(Fixture::DotProd121),
            _ => {}
        }
        let args = s
            .strip_prefix("naive(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("naive:"))
            .ok_or_else(|| invalid(format!("unknown fixture '{s}'")))?;
        let dims: Vec<usize> = args
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| invalid(format!("bad naive dimensions '{args}': {e}")))?;
        match dims[..] {
            [m, p, n] if m > 0 && p > 0 && n > 0 => Ok(Fixture::Naive(m, p, n)),
            _ => Err(invalid(format!("naive needs three positive dimensions, got '{args}'"))),
        }
    }
}
