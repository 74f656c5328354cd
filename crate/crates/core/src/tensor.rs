//! The matrix multiplication tensor as a dense 0/1 array.
//!
//! Slot coordinates follow the trace pairing `f(A) = trace(U A)`: a factor
//! `U` of shape `p×m` pairs with `A` of shape `m×p`, so entry `U[(z, x)]`
//! multiplies `A[(x, z)]`. With column-stacking vectorization the three slot
//! indices of the monomial `A[(x,z)] B[(z,y)] C[(x,y)]` are
//!
//! * `i = z + p·x` (position of `U[(z,x)]` in `vec(U)`),
//! * `j = y + n·z` (position of `V[(y,z)]` in `vec(V)`),
//! * `k = x + m·y` (position of `W[(x,y)]` in `vec(W)`).

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatMulTensor {
    m: usize,
    p: usize,
    n: usize,
    entries: Vec<u8>,
}

impl MatMulTensor {
    /// Builds the `(m, p, n)` tensor of shape `(mp) × (pn) × (nm)`.
    pub fn new(m: usize, p: usize, n: usize) -> Result<Self> {
        if m == 0 || p == 0 || n == 0 {
            return Err(invalid(format!("tensor dimensions must be positive, got ({m},{p},{n})")));
        }
        let mut t = MatMulTensor {
            m,
            p,
            n,
            entries: vec![0; m * p * p * n * n * m],
        };
        for x in 0..m {
            for z in 0..p {
                for y in 0..n {
                    let idx = t.index(z + p * x, y + n * z, x + m * y);
                    t.entries[idx] = 1;
                }
            }
        }
        Ok(t)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.p, self.n)
    }

    /// Array shape `(pm, np, mn)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.p * self.m, self.n * self.p, self.m * self.n)
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let (_, nj, nk) = self.shape();
        (i * nj + j) * nk + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.entries[self.index(i, j, k)]
    }

    /// Flat entries in `(i, j, k)` row-major order.
    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn count_ones(&self) -> usize {
        self.entries.iter().filter(|&&e| e == 1).count()
    }

    /// Contracts the tensor against the slot coordinates of `A` (m×p) and
    /// `B` (p×n), which yields `AB`.
    pub fn contract<T: Real>(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
        let (m, p, n) = self.dims();
        if a.shape() != (m, p) || b.shape() != (p, n) {
            return Err(invalid("operand shapes do not match the tensor"));
        }
        let (ni, nj, nk) = self.shape();
        let mut c = DMatrix::zeros(m, n);
        for i in 0..ni {
            let (z, x) = (i % p, i / p);
            let ai = a[(x, z)];
            for j in 0..nj {
                let (y, z2) = (j % n, j / n);
                let bj = b[(z2, y)];
                for k in 0..nk {
                    if self.get(i, j, k) == 1 {
                        c[(k % m, k / m)] += ai * bj;
                    }
                }
            }
        }
        Ok(c)
    }
}
