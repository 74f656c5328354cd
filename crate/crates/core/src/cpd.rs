//! Numerical sampling of `F`-term decompositions of small matrix
//! multiplication tensors.
//!
//! Each restart draws factor entries uniformly from `init_range`, runs a few
//! alternating least squares sweeps, then switches to Levenberg–Marquardt on
//! the summed squared residual. The normal equations are assembled in closed
//! form from Gram matrices, so a step costs one dense Cholesky of size
//! `(pm + np + mn)·F`. Converged factors are returned as they are: no
//! rounding toward "nice" values is attempted.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{Decomposition, StackedFactors};
use crate::error::{invalid, Result};
use crate::tensor::MatMulTensor;

/// Solver knobs. `damping` is the initial Levenberg parameter relative to
/// the largest diagonal entry of the Gauss–Newton matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_restarts: usize,
    pub max_iters: usize,
    pub als_sweeps: usize,
    pub init_range: (f64, f64),
    pub damping: f64,
    pub residual_target: f64,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_restarts: 200,
            max_iters: 400,
            als_sweeps: 20,
            init_range: (-1.0, 1.0),
            damping: 1e-3,
            residual_target: 1e-9,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.residual_target > 0.0) {
            return Err(invalid("residual target must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if self.max_restarts == 0 {
            return Err(invalid("max_restarts must be at least 1"));
        }
        let (lo, hi) = self.init_range;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid("init_range must be a finite interval lo < hi"));
        }
        if !(self.damping > 0.0) {
            return Err(invalid("damping must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one [`decompose_with_stats`] call.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub decomposition: Option<Decomposition<f64>>,
    /// Restarts consumed, including the successful one.
    pub trials: usize,
    pub max_residual: Option<f64>,
}

/// Returns a decomposition passing `verify(cfg.residual_target)`, or `None`
/// once `max_restarts` initial points have failed.
pub fn decompose(tensor: &MatMulTensor, f: usize, cfg: &SolveConfig) -> Result<Option<Decomposition<f64>>> {
    Ok(decompose_with_stats(tensor, f, cfg)?.decomposition)
}

pub fn decompose_with_stats(tensor: &MatMulTensor, f: usize, cfg: &SolveConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    if f == 0 {
        return Err(invalid("term count must be at least 1"));
    }
    let problem = Problem::new(tensor, f);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for trial in 1..=cfg.max_restarts {
        let x = problem.random_start(&mut rng, cfg.init_range);
        let Some(x) = problem.solve(x, cfg) else { continue };
        let dec = problem.to_decomposition(tensor.dims(), &x)?;
        let report = dec.verify(cfg.residual_target);
        if report.passed {
            return Ok(SolveOutcome {
                decomposition: Some(dec),
                trials: trial,
                max_residual: Some(report.max_residual),
            });
        }
    }
    Ok(SolveOutcome {
        decomposition: None,
        trials: cfg.max_restarts,
        max_residual: None,
    })
}

/// One member of a sampled population.
#[derive(Debug, Clone)]
pub struct Sample {
    pub decomposition: Decomposition<f64>,
    pub seed: u64,
    pub trials: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Population {
    pub samples: Vec<Sample>,
    /// Restarts consumed over all attempts, failed ones included.
    pub total_trials: usize,
    /// Set when the budget ran out before `count` samples were found.
    pub partial: bool,
}

/// Seed of the `index`-th sampling attempt (splitmix64 of the base seed).
pub fn derived_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `count` decompositions, attempt `k` using `derived_seed(cfg.seed, k)`.
///
/// The total budget is `count · max_restarts` restarts; an attempt that
/// fails consumes its restarts and the next attempt gets a fresh seed.
pub fn sample_population(tensor: &MatMulTensor, f: usize, count: usize, cfg: &SolveConfig) -> Result<Population> {
    cfg.validate()?;
    if count == 0 {
        return Err(invalid("count must be at least 1"));
    }
    let budget = count.saturating_mul(cfg.max_restarts);
    let mut samples = Vec::with_capacity(count);
    let mut total = 0usize;
    let mut attempt = 0u64;
    while samples.len() < count && total < budget {
        let seed = derived_seed(cfg.seed, attempt);
        attempt += 1;
        let sub = SolveConfig {
            seed,
            max_restarts: cfg.max_restarts.min(budget - total),
            ..cfg.clone()
        };
        let out = decompose_with_stats(tensor, f, &sub)?;
        total += out.trials;
        if let (Some(d), Some(res)) = (out.decomposition, out.max_residual) {
            samples.push(Sample {
                decomposition: d,
                seed,
                trials: out.trials,
                max_residual: res,
            });
        }
    }
    let partial = samples.len() < count;
    Ok(Population {
        samples,
        total_trials: total,
        partial,
    })
}

/// Least-squares problem over `x = (A, B, C)` with `A` of shape `I×F`
/// stored row-major, then `B`, then `C`.
struct Problem {
    dims: [usize; 3],
    f: usize,
    target: Vec<f64>,
    ones: Vec<[usize; 3]>,
}

/// Factor norms above this mean the iterate is drifting toward a border
/// rank approximation; such restarts are abandoned.
const DIVERGENCE_BOUND: f64 = 1e4;

impl Problem {
    fn new(tensor: &MatMulTensor, f: usize) -> Self {
        let (ni, nj, nk) = tensor.shape();
        let mut ones = Vec::new();
        for i in 0..ni {
            for j in 0..nj {
                for k in 0..nk {
                    if tensor.get(i, j, k) == 1 {
                        ones.push([i, j, k]);
                    }
                }
            }
        }
        Problem {
            dims: [ni, nj, nk],
            f,
            target: tensor.entries().iter().map(|&e| f64::from(e)).collect(),
            ones,
        }
    }

    fn len(&self) -> usize {
        self.dims.iter().sum::<usize>() * self.f
    }

    fn random_start(&self, rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> Vec<f64> {
        (0..self.len()).map(|_| rng.random_range(lo..hi)).collect()
    }

    fn factor(&self, x: &[f64], mode: usize) -> DMatrix<f64> {
        let off: usize = self.dims[..mode].iter().sum::<usize>() * self.f;
        DMatrix::from_row_slice(self.dims[mode], self.f, &x[off..off + self.dims[mode] * self.f])
    }

    fn store(&self, x: &mut [f64], mode: usize, m: &DMatrix<f64>) {
        let off: usize = self.dims[..mode].iter().sum::<usize>() * self.f;
        for r in 0..self.dims[mode] {
            for c in 0..self.f {
                x[off + r * self.f + c] = m[(r, c)];
            }
        }
    }

    fn residuals(&self, fac: &[DMatrix<f64>; 3]) -> Vec<f64> {
        let [ni, nj, nk] = self.dims;
        let mut out: Vec<f64> = self.target.iter().map(|t| -t).collect();
        for r in 0..self.f {
            for i in 0..ni {
                let a = fac[0][(i, r)];
                for j in 0..nj {
                    let ab = a * fac[1][(j, r)];
                    let base = (i * nj + j) * nk;
                    for k in 0..nk {
                        out[base + k] += ab * fac[2][(k, r)];
                    }
                }
            }
        }
        out
    }

    fn factors(&self, x: &[f64]) -> [DMatrix<f64>; 3] {
        [self.factor(x, 0), self.factor(x, 1), self.factor(x, 2)]
    }

    /// `Σ_{(i,j,k): T=1} (product of the other two factors' rows)`, i.e. the
    /// tensor-times-Khatri–Rao product for `mode`.
    fn mttkrp(&self, fac: &[DMatrix<f64>; 3], mode: usize) -> DMatrix<f64> {
        let (o1, o2) = others(mode);
        let mut g = DMatrix::zeros(self.dims[mode], self.f);
        for idx in &self.ones {
            for r in 0..self.f {
                g[(idx[mode], r)] += fac[o1][(idx[o1], r)] * fac[o2][(idx[o2], r)];
            }
        }
        g
    }

    fn als_sweep(&self, x: &mut [f64]) {
        for mode in 0..3 {
            let fac = self.factors(x);
            let (o1, o2) = others(mode);
            let mut h = (fac[o1].transpose() * &fac[o1]).component_mul(&(fac[o2].transpose() * &fac[o2]));
            let ridge = 1e-9 * h.diagonal().max().max(1e-300);
            for d in 0..self.f {
                h[(d, d)] += ridge;
            }
            let g = self.mttkrp(&fac, mode);
            let Some(chol) = h.cholesky() else { return };
            // new factor = G H⁻¹, solved as H Xᵀ = Gᵀ
            let next = chol.solve(&g.transpose()).transpose();
            self.store(x, mode, &next);
        }
    }

    /// Gradient and Gauss–Newton matrix `JᵀJ` of `½‖residual‖²`.
    fn normal_equations(&self, x: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let fac = self.factors(x);
        let f = self.f;
        let grams: Vec<DMatrix<f64>> = fac.iter().map(|a| a.transpose() * a).collect();
        let offs = [0, self.dims[0] * f, (self.dims[0] + self.dims[1]) * f];
        let n = self.len();
        let mut jtj = DMatrix::zeros(n, n);
        let mut grad = DVector::zeros(n);
        for mode in 0..3 {
            let (o1, o2) = others(mode);
            let h = grams[o1].component_mul(&grams[o2]);
            let g = &fac[mode] * &h - self.mttkrp(&fac, mode);
            for r in 0..self.dims[mode] {
                for a in 0..f {
                    grad[offs[mode] + r * f + a] = g[(r, a)];
                    for b in 0..f {
                        jtj[(offs[mode] + r * f + a, offs[mode] + r * f + b)] = h[(a, b)];
                    }
                }
            }
        }
        // off-diagonal blocks: [(r,a) of mode s, (q,b) of mode t] =
        //   X_s[r,b] X_t[q,a] (Gram of the remaining mode)[a,b]
        for (s, t, rest) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
            for r in 0..self.dims[s] {
                for q in 0..self.dims[t] {
                    for a in 0..f {
                        for b in 0..f {
                            let v = fac[t][(q, a)] * fac[s][(r, b)] * grams[rest][(a, b)];
                            let (row, col) = (offs[s] + r * f + a, offs[t] + q * f + b);
                            jtj[(row, col)] = v;
                            jtj[(col, row)] = v;
                        }
                    }
                }
            }
        }
        (jtj, grad)
    }

    fn cost(&self, x: &[f64]) -> (f64, f64) {
        let res = self.residuals(&self.factors(x));
        let sq = res.iter().map(|r| r * r).sum::<f64>();
        let max = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        (0.5 * sq, max)
    }

    /// Runs one restart from `x`; `None` if it stalls or diverges.
    fn solve(&self, mut x: Vec<f64>, cfg: &SolveConfig) -> Option<Vec<f64>> {
        for _ in 0..cfg.als_sweeps {
            self.als_sweep(&mut x);
        }
        // Polish well below the acceptance threshold so downstream linear
        // algebra sees clean data.
        let polish = (cfg.residual_target * 1e-4).max(1e-15);
        let (mut cost, mut max) = self.cost(&x);
        if !cost.is_finite() {
            return None;
        }
        let mut mu = f64::NAN;
        for _ in 0..cfg.max_iters {
            if max < polish {
                break;
            }
            let (jtj, grad) = self.normal_equations(&x);
            if mu.is_nan() {
                mu = cfg.damping * jtj.diagonal().max().max(1e-12);
            }
            let mut accepted = false;
            while mu < 1e12 {
                let mut sys = jtj.clone();
                for d in 0..sys.nrows() {
                    sys[(d, d)] += mu;
                }
                let Some(chol) = sys.cholesky() else {
                    mu *= 10.0;
                    continue;
                };
                let step = chol.solve(&grad);
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - s).collect();
                let (c, m) = self.cost(&trial);
                if c.is_finite() && c < cost {
                    x = trial;
                    cost = c;
                    max = m;
                    mu = (mu / 10.0).max(1e-15);
                    accepted = true;
                    break;
                }
                mu *= 10.0;
            }
            if !accepted || x.iter().any(|v| v.abs() > DIVERGENCE_BOUND) {
                break;
            }
        }
        (max < cfg.residual_target).then_some(x)
    }

    fn to_decomposition(&self, dims: (usize, usize, usize), x: &[f64]) -> Result<Decomposition<f64>> {
        let [ut, vt, wt] = self.factors(x);
        Decomposition::from_stacked(dims, &StackedFactors { ut, vt, wt })
    }
}

fn others(mode: usize) -> (usize, usize) {
    match mode {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}
