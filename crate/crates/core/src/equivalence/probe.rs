//! Randomized necessary test for simultaneous similarity: for random real
//! weights α, `Σ α_i A_i` and `Σ α_i B_i` must share their spectrum.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::discretize::char_poly;
use crate::scalar::{lit, to_f64, Real};

type Complex64 = Complex<f64>;

pub const DEFAULT_TRIALS: usize = 3;
pub const DEFAULT_EIG_TOL: f64 = 1e-6;

/// Eigenvalues as `f64` complex numbers.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(to_f64(z.re), to_f64(z.im)))
        .collect()
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(n³)). Returns `assignment[row] = col`. Non-finite costs are treated as
/// a penalty above every finite one.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let finite_max = cost.iter().flatten().filter(|c| c.is_finite()).fold(0.0f64, |a, &c| a.max(c.abs()));
    let penalty = 2.0 * finite_max * n as f64 + 1.0;
    let cost: Vec<Vec<f64>> =
        cost.iter().map(|row| row.iter().map(|&c| if c.is_finite() { c } else { penalty }).collect()).collect();
    // Potentials and matching with a 1-based sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_match = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_match[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_match[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_match[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_match[j0] = col_match[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if col_match[j] != 0 {
            assignment[col_match[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Largest pairwise distance under the minimum-cost matching of two
/// eigenvalue multisets.
/// Infinite if either spectrum has a non-finite entry.
pub fn spectral_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.iter().chain(b).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return f64::INFINITY;
    }
    let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| (x - y).norm()).collect()).collect();
    min_cost_assignment(&cost)
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .fold(0.0, f64::max)
}

/// Scale for relative tolerances: the larger of the spectral radius and the
/// Frobenius norm.
fn spectral_scale(a: &[Complex64], fro: f64) -> f64 {
    a.iter().map(|z| z.norm()).fold(fro, f64::max).max(f64::MIN_POSITIVE)
}

/// Whether `a` and `b` look isospectral at relative tolerance `tol`.
///
/// Eigenvalues of a defective matrix move like `ε^(1/k)` under rounding, so
/// a failed eigenvalue match is re-checked on characteristic polynomial
/// coefficients, which are well conditioned; either test accepting is enough.
pub fn isospectral<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, tol: f64) -> bool {
    let (ea, eb) = (eigenvalues(a), eigenvalues(b));
    let scale = spectral_scale(&ea, to_f64(a.norm())).max(spectral_scale(&eb, to_f64(b.norm())));
    if spectral_distance(&ea, &eb) <= tol * scale {
        return true;
    }
    let (Ok(ca), Ok(cb)) = (char_poly(a), char_poly(b)) else {
        return false;
    };
    ca.iter()
        .zip(&cb)
        .enumerate()
        .all(|(k, (&x, &y))| (to_f64(x) - to_f64(y)).abs() <= tol * scale.powi(k as i32 + 1))
}

/// Draws `trials` standard-normal weight vectors and compares the spectra of
/// the weighted sums. `false` certifies (up to tolerance) that the families
/// are not simultaneously similar; `true` is only evidence.
pub fn similarity_probe<T: Real, R: Rng + ?Sized>(
    ms: &[&DMatrix<T>],
    ms2: &[&DMatrix<T>],
    rng: &mut R,
    trials: usize,
    eig_tol: f64,
) -> bool {
    assert_eq!(ms.len(), ms2.len(), "families must have equal length");
    let Some(first) = ms.first() else { return true };
    let shape = first.shape();
    for _ in 0..trials {
        let alpha: Vec<T> = (0..ms.len()).map(|_| lit::<T>(rng.sample::<f64, _>(StandardNormal))).collect();
        let mut a = DMatrix::<T>::zeros(shape.0, shape.1);
        let mut b = DMatrix::<T>::zeros(shape.0, shape.1);
        for ((x, y), &w) in ms.iter().zip(ms2).zip(&alpha) {
            a += *x * w;
            b += *y * w;
        }
        if !isospectral(&a, &b, eig_tol) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_min_cost(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + rec(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost.len()])
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..7 {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
                let a = min_cost_assignment(&cost);
                let mut seen = a.clone();
                seen.sort_unstable();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
                let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
                assert!((total - brute_min_cost(&cost)).abs() < 1e-9);
            }
        }
    }

    fn random_family(rng: &mut ChaCha8Rng, k: usize, m: usize) -> Vec<DMatrix<f64>> {
        (0..k).map(|_| DMatrix::from_fn(m, m, |_, _| rng.sample(StandardNormal))).collect()
    }

    #[test]
    fn conjugated_family_is_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for m in 1..4 {
            let ms = random_family(&mut rng, 4, m);
            let x = DMatrix::<f64>::from_fn(m, m, |_, _| rng.sample(StandardNormal));
            let xi = x.clone().try_inverse().unwrap();
            let ms2: Vec<_> = ms.iter().map(|a| &xi * a * &x).collect();
            let (r1, r2): (Vec<_>, Vec<_>) = (ms.iter().collect(), ms2.iter().collect());
            assert!(similarity_probe(&r1, &r2, &mut rng, 3, DEFAULT_EIG_TOL));
        }
    }

    #[test]
    fn transpose_plus_identity_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ms = random_family(&mut rng, 3, 3);
        let mut ms2 = ms.clone();
        ms2[1] = ms[1].transpose() + DMatrix::identity(3, 3);
        let (r1, r2): (Vec<_>, Vec<_>) = (ms.iter().collect(), ms2.iter().collect());
        assert!(!similarity_probe(&r1, &r2, &mut rng, 3, DEFAULT_EIG_TOL));
    }

    #[test]
    fn non_finite_costs_terminate() {
        let cost = vec![vec![f64::NAN, 1.0], vec![2.0, f64::INFINITY]];
        assert_eq!(min_cost_assignment(&cost), vec![1, 0]);
        let nan = [Complex64::new(f64::NAN, 0.0)];
        assert_eq!(spectral_distance(&nan, &[Complex64::new(1.0, 0.0)]), f64::INFINITY);
    }

    #[test]
    fn zero_matrices() {
        let z = DMatrix::<f64>::zeros(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        assert!(similarity_probe(&[&z], &[&z], &mut rng, 3, DEFAULT_EIG_TOL));
    }

    #[test]
    fn defective_blocks_survive_conjugation() {
        // A 3×3 Jordan block conjugated by a badly scaled matrix: eigenvalues
        // scatter far beyond the tolerance, coefficients do not.
        let j = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let x = DMatrix::from_row_slice(3, 3, &[3.0, -1.0, 7.0, 0.5, 2.0, -4.0, 1.0, 9.0, 0.25]);
        let jc = x.clone().try_inverse().unwrap() * &j * &x;
        assert!(isospectral(&j, &jc, DEFAULT_EIG_TOL));
        assert!(!isospectral(&j, &DMatrix::identity(3, 3), DEFAULT_EIG_TOL));
    }
}
