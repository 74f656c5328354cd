//! Permutation, scaling and trace transformations between decompositions.
//!
//! A transform is kept in the normal form "permute, then scale, then
//! conjugate":
//!
//! ```text
//! U'_r = λ_r Q⁻¹ U_σ(r) P,   V'_r = μ_r R⁻¹ V_σ(r) Q,   W'_r = ν_r P⁻¹ W_σ(r) R
//! ```
//!
//! with `λ_r μ_r ν_r = 1`. Permutations are stored 0-based.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::decomposition::{check_permutation, Decomposition};
use crate::error::{invalid, Result};
use crate::linalg;
use crate::scalar::{lit, to_f64, Real};

/// Default floor on the smallest singular value of `P`, `Q`, `R`.
pub const DEFAULT_SINGULAR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceTransform<T: Real> {
    sigma: Vec<usize>,
    lambda: Vec<T>,
    mu: Vec<T>,
    nu: Vec<T>,
    p: DMatrix<T>,
    q: DMatrix<T>,
    r: DMatrix<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTransformOptions {
    /// Bounds of the log-uniform distribution for `λ_r` and `μ_r`.
    pub scale_range: (f64, f64),
    /// Largest accepted condition number of `P`, `Q`, `R`.
    pub condition_cap: f64,
}

impl Default for RandomTransformOptions {
    fn default() -> Self {
        RandomTransformOptions {
            scale_range: (0.25, 4.0),
            condition_cap: 1e4,
        }
    }
}

fn scaling_tolerance<T: Real>() -> f64 {
    1e-12f64.max(100.0 * to_f64(T::default_epsilon()))
}

impl<T: Real> InvarianceTransform<T> {
    /// Validates and assembles a transform. `sigma` is 0-based.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sigma: Vec<usize>,
        lambda: Vec<T>,
        mu: Vec<T>,
        nu: Vec<T>,
        p: DMatrix<T>,
        q: DMatrix<T>,
        r: DMatrix<T>,
    ) -> Result<Self> {
        let f = sigma.len();
        check_permutation(&sigma, f)?;
        if lambda.len() != f || mu.len() != f || nu.len() != f {
            return Err(invalid("scaling vectors must have one entry per term"));
        }
        let tol = scaling_tolerance::<T>();
        for i in 0..f {
            let prod = to_f64(lambda[i] * mu[i] * nu[i]);
            if !prod.is_finite() || (prod - 1.0).abs() > tol {
                return Err(invalid(format!(
                    "scaling product of term {i} is {prod}, expected 1"
                )));
            }
        }
        for (name, mat) in [("P", &p), ("Q", &q), ("R", &r)] {
            if !mat.is_square() || mat.is_empty() {
                return Err(invalid(format!("{name} must be a non-empty square matrix")));
            }
            let sv = linalg::singular_values(mat);
            let smallest = to_f64(*sv.last().expect("non-empty"));
            if !(smallest > DEFAULT_SINGULAR_FLOOR) {
                return Err(invalid(format!(
                    "{name} is numerically singular (smallest singular value {smallest:e})"
                )));
            }
        }
        Ok(InvarianceTransform {
            sigma,
            lambda,
            mu,
            nu,
            p,
            q,
            r,
        })
    }

    pub fn identity((m, p, n): (usize, usize, usize), terms: usize) -> Self {
        InvarianceTransform {
            sigma: (0..terms).collect(),
            lambda: vec![T::one(); terms],
            mu: vec![T::one(); terms],
            nu: vec![T::one(); terms],
            p: DMatrix::identity(m, m),
            q: DMatrix::identity(p, p),
            r: DMatrix::identity(n, n),
        }
    }

    pub fn permutation(sigma: Vec<usize>, dims: (usize, usize, usize)) -> Result<Self> {
        let mut t = Self::identity(dims, sigma.len());
        check_permutation(&sigma, sigma.len())?;
        t.sigma = sigma;
        Ok(t)
    }

    pub fn terms(&self) -> usize {
        self.sigma.len()
    }

    /// `(m, p, n)` inferred from the trace matrices.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.p.nrows(), self.q.nrows(), self.r.nrows())
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn nu(&self) -> &[T] {
        &self.nu
    }

    pub fn p(&self) -> &DMatrix<T> {
        &self.p
    }

    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<T> {
        &self.r
    }

    fn check_compatible(&self, dims: (usize, usize, usize), terms: usize) -> Result<()> {
        if self.dims() != dims || self.terms() != terms {
            return Err(invalid(format!(
                "transform for {:?} with {} terms cannot act on {:?} with {} terms",
                self.dims(),
                self.terms(),
                dims,
                terms
            )));
        }
        Ok(())
    }

    fn inverses(&self) -> Result<(DMatrix<T>, DMatrix<T>, DMatrix<T>)> {
        let inv = |name: &str, m: &DMatrix<T>| {
            m.clone()
                .try_inverse()
                .ok_or_else(|| invalid(format!("{name} is singular")))
        };
        Ok((inv("P", &self.p)?, inv("Q", &self.q)?, inv("R", &self.r)?))
    }

    pub fn apply(&self, dec: &Decomposition<T>) -> Result<Decomposition<T>> {
        self.check_compatible(dec.dims(), dec.terms())?;
        let (p_inv, q_inv, r_inv) = self.inverses()?;
        let f = self.terms();
        let mut u = Vec::with_capacity(f);
        let mut v = Vec::with_capacity(f);
        let mut w = Vec::with_capacity(f);
        for r in 0..f {
            let s = self.sigma[r];
            u.push((&q_inv * &dec.u()[s] * &self.p) * self.lambda[r]);
            v.push((&r_inv * &dec.v()[s] * &self.q) * self.mu[r]);
            w.push((&p_inv * &dec.w()[s] * &self.r) * self.nu[r]);
        }
        Decomposition::new(dec.dims(), u, v, w)
    }

    /// The transform equal to applying `first` and then `self`.
    pub fn compose(&self, first: &Self) -> Result<Self> {
        first.check_compatible(self.dims(), self.terms())?;
        let f = self.terms();
        let sigma = (0..f).map(|r| first.sigma[self.sigma[r]]).collect();
        let scale = |outer: &[T], inner: &[T]| -> Vec<T> {
            (0..f).map(|r| outer[r] * inner[self.sigma[r]]).collect()
        };
        let mut lambda = scale(&self.lambda, &first.lambda);
        let mu = scale(&self.mu, &first.mu);
        let nu = scale(&self.nu, &first.nu);
        renormalize(&mut lambda, &mu, &nu);
        Ok(InvarianceTransform {
            sigma,
            lambda,
            mu,
            nu,
            p: &first.p * &self.p,
            q: &first.q * &self.q,
            r: &first.r * &self.r,
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        let (p_inv, q_inv, r_inv) = self.inverses()?;
        let f = self.terms();
        let mut sigma = vec![0; f];
        for (r, &s) in self.sigma.iter().enumerate() {
            sigma[s] = r;
        }
        let recip = |xs: &[T]| -> Vec<T> { sigma.iter().map(|&s| T::one() / xs[s]).collect() };
        let mut lambda = recip(&self.lambda);
        let mu = recip(&self.mu);
        let nu = recip(&self.nu);
        renormalize(&mut lambda, &mu, &nu);
        Ok(InvarianceTransform {
            sigma,
            lambda,
            mu,
            nu,
            p: p_inv,
            q: q_inv,
            r: r_inv,
        })
    }

    /// Re-expresses the transform for decompositions rotated by
    /// [`Decomposition::cyclic_rotate`] with the same shift, so that
    /// `t.rotated(s).apply(d.rotate(s)) == t.apply(d).rotate(s)`.
    pub fn rotated(&self, shift: usize) -> Self {
        let mut t = self.clone();
        for _ in 0..shift % 3 {
            t = InvarianceTransform {
                sigma: t.sigma,
                lambda: t.nu,
                mu: t.lambda,
                nu: t.mu,
                p: t.r,
                q: t.p,
                r: t.q,
            };
        }
        t
    }

    pub fn cast<S: Real>(&self) -> InvarianceTransform<S> {
        let v = |xs: &[T]| xs.iter().map(|&x| lit::<S>(to_f64(x))).collect();
        let m = |x: &DMatrix<T>| x.map(|e| lit::<S>(to_f64(e)));
        InvarianceTransform {
            sigma: self.sigma.clone(),
            lambda: v(&self.lambda),
            mu: v(&self.mu),
            nu: v(&self.nu),
            p: m(&self.p),
            q: m(&self.q),
            r: m(&self.r),
        }
    }

    /// Draws a random transform: uniform permutation, log-uniform `λ`, `μ`
    /// with `ν = 1/(λμ)`, and Gaussian `P`, `Q`, `R` resampled until their
    /// condition number is below the cap.
    pub fn random<R: Rng + ?Sized>(
        dims: (usize, usize, usize),
        terms: usize,
        rng: &mut R,
        opts: &RandomTransformOptions,
    ) -> Self {
        let (m, p, n) = dims;
        let mut sigma: Vec<usize> = (0..terms).collect();
        sigma.shuffle(rng);
        let (lo, hi) = opts.scale_range;
        let (llo, lhi) = (lo.ln(), hi.ln());
        let draw_scale = |rng: &mut R| -> f64 {
            if lhi > llo {
                rng.random_range(llo..lhi).exp()
            } else {
                lo
            }
        };
        let mut lambda = Vec::with_capacity(terms);
        let mut mu = Vec::with_capacity(terms);
        let mut nu = Vec::with_capacity(terms);
        for _ in 0..terms {
            let l = draw_scale(rng);
            let u = draw_scale(rng);
            lambda.push(lit::<T>(l));
            mu.push(lit::<T>(u));
            nu.push(lit::<T>(1.0 / (l * u)));
        }
        renormalize(&mut lambda, &mu, &nu);
        let pm = random_conditioned(m, opts.condition_cap, rng);
        let qm = random_conditioned(p, opts.condition_cap, rng);
        let rm = random_conditioned(n, opts.condition_cap, rng);
        InvarianceTransform {
            sigma,
            lambda,
            mu,
            nu,
            p: pm,
            q: qm,
            r: rm,
        }
    }
}

/// Absorbs the rounding error of `λμν` into `λ`.
fn renormalize<T: Real>(lambda: &mut [T], mu: &[T], nu: &[T]) {
    for i in 0..lambda.len() {
        let prod = lambda[i] * mu[i] * nu[i];
        lambda[i] /= prod;
    }
}

fn random_conditioned<T: Real, R: Rng + ?Sized>(size: usize, cap: f64, rng: &mut R) -> DMatrix<T> {
    loop {
        let m = DMatrix::from_fn(size, size, |_, _| lit::<T>(rng.sample::<f64, _>(StandardNormal)));
        let cond = to_f64(linalg::condition_number(&m));
        if cond.is_finite() && cond <= cap {
            return m;
        }
    }
}
