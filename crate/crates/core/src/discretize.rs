//! Necessary criterion for a decomposition to be equivalent to one with all
//! factor entries in `qℤ`: integer combinations of the triple products,
//! scaled by `1/q³`, must have characteristic polynomials with integer
//! coefficients.

use nalgebra::DMatrix;
use num_rational::Ratio;
use num_traits::Num;
use rand::Rng;
use serde::Serialize;

use crate::decomposition::Decomposition;
use crate::error::{invalid, Result};
use crate::scalar::{lit, to_f64, Real};

pub const DEFAULT_DRAWS: usize = 16;
pub const DEFAULT_BETA_BOUND: i32 = 5;
pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// Coefficients `(α_{m-1}, …, α_0)` of `det(tI - A) = tᵐ + α_{m-1}tᵐ⁻¹ + … + α_0`
/// by the Faddeev–LeVerrier recursion, exact for exact number types
/// (e.g. `num_rational::Ratio`).
pub fn char_poly_exact<N: Num + Clone>(rows: &[Vec<N>]) -> Result<Vec<N>> {
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(invalid("characteristic polynomial needs a nonempty square matrix"));
    }
    let mul = |a: &[Vec<N>], b: &[Vec<N>]| -> Vec<Vec<N>> {
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| (0..m).fold(N::zero(), |acc, k| acc + a[i][k].clone() * b[k][j].clone()))
                    .collect()
            })
            .collect()
    };
    let trace = |a: &[Vec<N>]| (0..m).fold(N::zero(), |acc, i| acc + a[i][i].clone());
    let mut coeffs = Vec::with_capacity(m);
    // M_k = A M_{k-1} + c_{m-k+1} I, c_{m-k} = -tr(A M_k) / k.
    let mut mk: Vec<Vec<N>> = vec![vec![N::zero(); m]; m];
    let mut c_prev = N::one();
    let mut k_as_n = N::zero();
    for _ in 1..=m {
        let mut next = mul(rows, &mk);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] = row[i].clone() + c_prev.clone();
        }
        mk = next;
        k_as_n = k_as_n + N::one();
        let c = N::zero() - trace(&mul(rows, &mk)) / k_as_n.clone();
        coeffs.push(c.clone());
        c_prev = c;
    }
    Ok(coeffs)
}

/// Neumaier-compensated sum.
fn compensated_sum<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn compensated_mul<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let m = a.nrows();
    DMatrix::from_fn(m, b.ncols(), |i, j| compensated_sum((0..a.ncols()).map(|k| a[(i, k)] * b[(k, j)])))
}

/// Entries as exact integers, if they all are and the recursion provably
/// stays within `i128` (intermediates are bounded by `(m·max|a|)^m` times
/// small factorial factors).
fn integer_rows<T: Real>(a: &DMatrix<T>) -> Option<Vec<Vec<Ratio<i128>>>> {
    let m = a.nrows();
    let mut peak = 0.0f64;
    for x in a.iter().map(|&x| to_f64(x)) {
        if x != x.round() || !x.is_finite() {
            return None;
        }
        peak = peak.max(x.abs());
    }
    let bits = m as f64 * ((m as f64) * peak + 1.0).log2() + 2.0 * (m as f64 + 1.0).log2() * m as f64;
    (bits <= 100.0).then(|| {
        (0..m).map(|i| (0..m).map(|j| Ratio::from_integer(to_f64(a[(i, j)]) as i128)).collect()).collect()
    })
}

/// Characteristic polynomial. Integer-valued input goes through the exact
/// recursion in rationals; anything else through the floating recursion
/// with compensated summation in every inner product and trace.
pub fn char_poly<T: Real>(a: &DMatrix<T>) -> Result<Vec<T>> {
    let m = a.nrows();
    if m == 0 || a.ncols() != m {
        return Err(invalid(format!("characteristic polynomial needs a square matrix, got {}x{}", m, a.ncols())));
    }
    if let Some(rows) = integer_rows(a) {
        return Ok(char_poly_exact(&rows)?.into_iter().map(|c| lit::<T>(*c.numer() as f64 / *c.denom() as f64)).collect());
    }
    let mut coeffs = Vec::with_capacity(m);
    let mut mk = DMatrix::<T>::zeros(m, m);
    let mut c_prev = T::one();
    for k in 1..=m {
        mk = compensated_mul(a, &mk);
        for i in 0..m {
            mk[(i, i)] += c_prev;
        }
        let amk = compensated_mul(a, &mk);
        let c = -compensated_sum((0..m).map(|i| amk[(i, i)])) / lit::<T>(k as f64);
        coeffs.push(c);
        c_prev = c;
    }
    Ok(coeffs)
}

/// Closed forms for `m ≤ 3`: minus the trace, the sum of principal 2×2
/// minors, minus the determinant.
pub fn char_poly_closed_form<T: Real>(a: &DMatrix<T>) -> Option<Vec<T>> {
    let m = a.nrows();
    if a.ncols() != m || m == 0 || m > 3 {
        return None;
    }
    let tr = a.trace();
    let minors = {
        let mut s = T::zero();
        for i in 0..m {
            for j in i + 1..m {
                s += a[(i, i)] * a[(j, j)] - a[(i, j)] * a[(j, i)];
            }
        }
        s
    };
    let det = a.determinant();
    Some(match m {
        1 => vec![-tr],
        2 => vec![-tr, det],
        _ => vec![-tr, minors, -det],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrawRecord {
    pub beta: Vec<i32>,
    pub coefficients: Vec<f64>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizabilityReport {
    pub q: f64,
    pub nd_score: f64,
    pub per_draw: Vec<DrawRecord>,
    pub draws: usize,
    pub beta_range: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Passes,
    Fails,
}

fn distance_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Coefficients of the characteristic polynomial of `(1/q³) Σ β_r M_r`.
pub fn combination_char_poly<T: Real>(products: &[DMatrix<T>], beta: &[i32], q: f64) -> Result<Vec<f64>> {
    let m = products.first().map_or(0, |x| x.nrows());
    let scale = lit::<T>(1.0 / (q * q * q));
    let mut acc = DMatrix::<T>::zeros(m, m);
    for (mr, &b) in products.iter().zip(beta) {
        acc += mr * lit::<T>(b as f64);
    }
    Ok(char_poly(&(acc * scale))?.into_iter().map(to_f64).collect())
}

/// The ND statistic: the largest distance of any characteristic polynomial
/// coefficient to the nearest integer over `draws` random integer vectors β
/// with entries in `[-beta_bound, beta_bound]`.
pub fn nd_score<T: Real, R: Rng + ?Sized>(
    dec: &Decomposition<T>,
    q: f64,
    draws: usize,
    beta_bound: i32,
    rng: &mut R,
) -> Result<DiscretizabilityReport> {
    if !(q.is_finite() && q > 0.0) {
        return Err(invalid(format!("q must be positive, got {q}")));
    }
    if beta_bound < 0 {
        return Err(invalid("beta bound must be nonnegative"));
    }
    let products = dec.triple_products();
    let mut per_draw = Vec::with_capacity(draws);
    let mut nd = 0.0f64;
    for _ in 0..draws {
        let beta: Vec<i32> = (0..dec.terms()).map(|_| rng.random_range(-beta_bound..=beta_bound)).collect();
        let coefficients = combination_char_poly(&products, &beta, q)?;
        let max_deviation = coefficients.iter().map(|&c| distance_to_integer(c)).fold(0.0, f64::max);
        nd = nd.max(max_deviation);
        per_draw.push(DrawRecord { beta, coefficients, max_deviation });
    }
    Ok(DiscretizabilityReport { q, nd_score: nd, per_draw, draws, beta_range: beta_bound })
}

/// Fails iff the ND score reaches `threshold`. Failing shows the
/// decomposition is not equivalent to a discrete one for this `q`; passing
/// proves nothing.
pub fn criterion<T: Real, R: Rng + ?Sized>(
    dec: &Decomposition<T>,
    q: f64,
    draws: usize,
    beta_bound: i32,
    rng: &mut R,
    threshold: f64,
) -> Result<(Criterion, DiscretizabilityReport)> {
    let report = nd_score(dec, q, draws, beta_bound, rng)?;
    let verdict = if report.nd_score >= threshold { Criterion::Fails } else { Criterion::Passes };
    Ok((verdict, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Fixture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ratio_rows(a: &[&[i64]]) -> Vec<Vec<Ratio<i64>>> {
        a.iter().map(|r| r.iter().map(|&x| Ratio::from_integer(x)).collect()).collect()
    }

    #[test]
    fn small_cases() {
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(char_poly(&eye).unwrap(), vec![-2.0, 1.0]);
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(char_poly(&nil).unwrap(), vec![0.0, 0.0]);
        assert!(char_poly(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn exact_path_matches_known_polynomial() {
        // det(tI - A) = t³ - 6t² + 11t - 6 for diag-similar A with eigenvalues 1, 2, 3.
        let a = ratio_rows(&[&[2, 1, 0], &[0, 1, 0], &[1, 1, 3]]);
        let c = char_poly_exact(&a).unwrap();
        let expect: Vec<Ratio<i64>> = [-6, 11, -6].iter().map(|&x| Ratio::from_integer(x)).collect();
        assert_eq!(c, expect);
    }

    #[test]
    fn exact_path_has_integer_coefficients_for_integer_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in 1..6 {
            let rows: Vec<Vec<Ratio<i64>>> = (0..m)
                .map(|_| (0..m).map(|_| Ratio::from_integer(rng.random_range(-4..=4))).collect())
                .collect();
            assert!(char_poly_exact(&rows).unwrap().iter().all(|c| c.is_integer()));
        }
    }

    #[test]
    fn integer_input_takes_exact_path() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 3.0]);
        assert_eq!(char_poly(&a).unwrap(), vec![-6.0, 11.0, -6.0]);
        assert!(integer_rows(&a).is_some());
        assert!(integer_rows(&(a * 0.5)).is_none());
    }

    #[test]
    fn float_path_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 1..=3 {
            for _ in 0..20 {
                let a = DMatrix::<f64>::from_fn(m, m, |_, _| rng.random_range(-3.0..3.0));
                let c = char_poly(&a).unwrap();
                let closed = char_poly_closed_form(&a).unwrap();
                for (x, y) in c.iter().zip(&closed) {
                    assert!((x - y).abs() < 1e-12, "{c:?} vs {closed:?}");
                }
            }
        }
    }

    #[test]
    fn strassen_is_discrete_at_q_one_and_half() {
        let d: Decomposition<f64> = Fixture::Strassen.build();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rep = nd_score(&d, 1.0, 16, 5, &mut rng).unwrap();
        assert!(rep.nd_score < 1e-9);
        assert_eq!(rep.per_draw.len(), 16);
        let (verdict, _) = criterion(&d, 0.5, 16, 5, &mut rng, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(verdict, Criterion::Passes);
    }

    #[test]
    fn non_integer_scale_fails() {
        // Entries in (1/3)ℤ but not ℤ give fractional coefficients at q = 1.
        let d: Decomposition<f64> = Fixture::Naive(1, 1, 1).build();
        let (u, v, w) = d.into_parts();
        let third = |x: &Vec<DMatrix<f64>>| x.iter().map(|m| m / 3.0_f64.cbrt()).collect::<Vec<_>>();
        let scaled = Decomposition::new((1, 1, 1), third(&u), third(&v), third(&w)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rep = nd_score(&scaled, 1.0, 16, 5, &mut rng).unwrap();
        assert!(rep.nd_score > 0.1 && rep.nd_score <= 0.5);
    }
}
