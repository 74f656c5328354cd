//! Deciding equivalence of two decompositions under permutation, scaling and
//! trace transformations.
//!
//! The permutation is found by depth-first extension of partial permutations
//! `π` (injective maps from a set of positions of the second decomposition
//! to terms of the first): a partial permutation survives only if the triple
//! products `(M_{π(k)})` and `(M'_k)` over its positions pass the randomized
//! simultaneous similarity probe. Every completed permutation is handed to
//! the scaling+trace solver.
//!
//! Highly symmetric inputs (Laderman's decomposition, say) defeat the probe
//! alone, so by default the search also keeps candidate sets per position,
//! pruned by pairwise trace invariants and by any linear map the partial
//! permutation already determines, and fills the most constrained position
//! first. Each of these is a necessary condition, so no equivalence is lost;
//! they can be switched off in [`EquivalenceOptions`].

mod probe;
mod scaling_trace;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decomposition::{Decomposition, Mode};
use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};
use crate::transforms::InvarianceTransform;

pub use probe::{
    eigenvalues, isospectral, min_cost_assignment, similarity_probe, spectral_distance, DEFAULT_EIG_TOL,
    DEFAULT_TRIALS,
};
pub use scaling_trace::{
    solve_scaling_trace, solve_scaling_trace_general, solve_scaling_trace_in_mode, LinearSystem, Rejection,
    ScalingTrace, SolveTolerances,
};

/// Largest term count accepted by the exhaustive oracle.
pub const BRUTEFORCE_MAX_TERMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Equivalent,
    Inequivalent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Run the scaling+trace solver on every completed permutation.
    #[default]
    Full,
    /// Stop at the first completed permutation; usable without a
    /// clustering-number-one mode.
    NoAssumption,
}

/// Triple products `M_r = W_r V_r U_r` of a decomposition, together with
/// their cyclic companions `U_r W_r V_r` (conjugated by `Q`) and
/// `V_r U_r W_r` (conjugated by `R`).
#[derive(Debug, Clone, PartialEq)]
pub struct TripleProducts<T: Real> {
    pub m: Vec<DMatrix<T>>,
    pub k: Vec<DMatrix<T>>,
    pub l: Vec<DMatrix<T>>,
}

impl<T: Real> TripleProducts<T> {
    pub fn of(dec: &Decomposition<T>) -> Self {
        let (u, v, w) = (dec.u(), dec.v(), dec.w());
        TripleProducts {
            m: dec.triple_products(),
            k: (0..dec.terms()).map(|r| &u[r] * &w[r] * &v[r]).collect(),
            l: (0..dec.terms()).map(|r| &v[r] * &u[r] * &w[r]).collect(),
        }
    }

    fn families(&self, all: bool) -> Vec<&[DMatrix<T>]> {
        if all {
            vec![&self.m, &self.k, &self.l]
        } else {
            vec![&self.m]
        }
    }
}

/// Pairwise trace invariants: for each pair of terms, traces of cyclic words
/// in which each term contributes one `U`, one `V` and one `W`, so that the
/// scalings cancel and `P`, `Q`, `R` conjugate away. Each entry keeps a
/// roundoff scale (product of the factor norms in the word).
#[derive(Debug, Clone)]
struct PairInvariants {
    f: usize,
    values: Vec<[f64; 4]>,
    scales: Vec<[f64; 4]>,
}

impl PairInvariants {
    fn of<T: Real>(dec: &Decomposition<T>) -> Self {
        let f = dec.terms();
        let (u, v, w) = (dec.u(), dec.v(), dec.w());
        let norm = |x: &DMatrix<T>| to_f64(x.norm());
        let mut values = vec![[0.0; 4]; f * f];
        let mut scales = vec![[0.0; 4]; f * f];
        for r in 0..f {
            for s in 0..f {
                let words: [[(&DMatrix<T>, &DMatrix<T>, &DMatrix<T>); 2]; 4] = [
                    [(&w[r], &v[r], &u[r]), (&w[s], &v[s], &u[s])],
                    [(&w[r], &v[s], &u[r]), (&w[s], &v[r], &u[s])],
                    [(&w[r], &v[r], &u[s]), (&w[s], &v[s], &u[r])],
                    [(&w[r], &v[s], &u[s]), (&w[s], &v[r], &u[r])],
                ];
                for (k, [(w1, v1, u1), (w2, v2, u2)]) in words.into_iter().enumerate() {
                    let first = w1 * v1 * u1;
                    let second = w2 * v2 * u2;
                    values[r * f + s][k] = to_f64((first * second).trace());
                    scales[r * f + s][k] = norm(w1) * norm(v1) * norm(u1) * norm(w2) * norm(v2) * norm(u2);
                }
            }
        }
        PairInvariants { f, values, scales }
    }

    /// Whether term `a` of the first decomposition against term `b` of the
    /// second agrees with term `c` against term `d`.
    ///
    /// Roundoff in a trace of a product is bounded by a multiple of machine
    /// precision times the product of the factor norms; `tol` adds slack
    /// relative to the values themselves.
    fn agree(&self, other: &PairInvariants, (a, c): (usize, usize), (b, d): (usize, usize), tol: f64) -> bool {
        let (x, sx) = (&self.values[a * self.f + c], &self.scales[a * self.f + c]);
        let (y, sy) = (&other.values[b * other.f + d], &other.scales[b * other.f + d]);
        (0..4).all(|k| (x[k] - y[k]).abs() <= tol * x[k].abs().max(y[k].abs()) + PAIR_ROUNDOFF * (sx[k] + sy[k]))
    }
}

/// Roundoff allowance per unit of norm product in the pair invariants.
const PAIR_ROUNDOFF: f64 = 1e-11;

/// Which solver completes a permutation.
#[derive(Debug, Clone, Copy)]
enum LeafSolver {
    InMode(Mode),
    General,
}

impl LeafSolver {
    fn solve<T: Real>(
        self,
        d1: &Decomposition<T>,
        d2: &Decomposition<T>,
        tols: &SolveTolerances,
    ) -> Result<ScalingTrace<T>> {
        match self {
            LeafSolver::InMode(mode) => solve_scaling_trace_in_mode(d1, d2, mode, tols),
            LeafSolver::General => solve_scaling_trace_general(d1, d2, tols),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceOptions {
    pub trials: usize,
    pub eig_tol: f64,
    pub mode: SearchMode,
    pub seed: u64,
    pub tols: SolveTolerances,
    /// Try extensions in ascending single-term spectral distance.
    pub order_children: bool,
    /// Keep every prefix rejected by the probe in the statistics.
    pub record_rejections: bool,
    /// Probe the cyclic companions `U_r W_r V_r` and `V_r U_r W_r` as well
    /// as the triple products.
    pub probe_all_cyclic: bool,
    /// Without a clustering-number-one mode, complete permutations with the
    /// general solver instead of failing with an assumption violation.
    pub general_fallback: bool,
    /// Also prune partial permutations with exact linear tests: the
    /// conjugation system of each probed family, and (with a
    /// clustering-number-one mode) the first system restricted to the prefix,
    /// must keep a nontrivial solution.
    pub prefix_solve: bool,
    /// Match pairwise trace invariants along the prefix before probing.
    pub pair_invariants: bool,
    /// Fill the position with fewest remaining candidates next instead of
    /// the positions in order.
    pub dynamic_order: bool,
    /// Give up with `Inconclusive` after this many probed prefixes.
    pub max_nodes: Option<usize>,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        EquivalenceOptions {
            trials: DEFAULT_TRIALS,
            eig_tol: DEFAULT_EIG_TOL,
            mode: SearchMode::Full,
            seed: 0,
            tols: SolveTolerances::default(),
            order_children: true,
            record_rejections: false,
            probe_all_cyclic: false,
            general_fallback: true,
            prefix_solve: true,
            pair_invariants: true,
            dynamic_order: true,
            max_nodes: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProbeStats {
    /// Partial permutations submitted to the probe.
    pub nodes_visited: usize,
    /// Completed permutations reached.
    pub leaves: usize,
    /// Longest rejected partial permutation (a rejected complete one counts
    /// as `F`).
    pub depth: usize,
    pub elapsed_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    /// Rejected partial permutations as `(position, term)` pairs in the
    /// order they were assigned.
    pub rejected_prefixes: Option<Vec<Vec<(usize, usize)>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCertificate<T: Real> {
    pub verdict: Verdict,
    /// Maps the first decomposition onto the second when equivalent.
    pub transform: Option<InvarianceTransform<T>>,
    /// The completed permutation (0-based) for equivalent and inconclusive
    /// verdicts.
    pub permutation: Option<Vec<usize>>,
    /// Max entry deviation of the transformed first decomposition from the
    /// second.
    pub residual: Option<f64>,
    pub probe_stats: ProbeStats,
    /// Mode placed in the `U` slot of the solver; `None` when the general
    /// solver was used or no solver ran.
    pub mode: Option<Mode>,
    /// Why a negative verdict was reached before the search, if it was.
    pub reason: Option<Rejection>,
}

impl<T: Real> EquivalenceCertificate<T> {
    fn early(verdict: Verdict, reason: Option<Rejection>, started: Instant) -> Self {
        EquivalenceCertificate {
            verdict,
            transform: None,
            permutation: None,
            residual: None,
            probe_stats: ProbeStats { elapsed_secs: started.elapsed().as_secs_f64(), ..Default::default() },
            mode: None,
            reason,
        }
    }
}

struct Search<'a, T: Real> {
    d1: &'a Decomposition<T>,
    d2: &'a Decomposition<T>,
    p1: TripleProducts<T>,
    p2: TripleProducts<T>,
    /// `order[k]`: candidate terms of `d1` for position `k`.
    order: Vec<Vec<usize>>,
    opts: &'a EquivalenceOptions,
    solver: Option<LeafSolver>,
    pairs: Option<(PairInvariants, PairInvariants)>,
    /// Unit-normalized stacked factors for the prefix test.
    prefix_columns: Option<(DMatrix<T>, DMatrix<T>)>,
    rng: ChaCha8Rng,
    stats: ProbeStats,
}

enum Leaf<T: Real> {
    Found(InvarianceTransform<T>, f64),
    Inconclusive,
    OutOfBudget,
}

/// State below a partial permutation: candidate terms per position, and the
/// maps that the partial permutation already pins down. Once a map is fixed,
/// the candidates agree with it, so it need not be solved for again.
#[derive(Clone)]
struct Node<T: Real> {
    /// `dom[k][l]`: term `l` of `d1` may still go to position `k` of `d2`.
    dom: Vec<Vec<bool>>,
    /// Conjugators of the triple products and their two cyclic companions.
    conjugators: [Option<DMatrix<T>>; 3],
    first_map: Option<DMatrix<T>>,
}

impl<T: Real> Search<'_, T> {
    /// The exact conjugation test and the spectral probe on the prefix.
    fn prefix_survives(&mut self, pairs: &[(usize, usize)]) -> bool {
        let (tol, nstol) = (self.opts.eig_tol, self.opts.tols.nstol);
        let all = self.opts.probe_all_cyclic;
        for (f1, f2) in self.p1.families(all).into_iter().zip(self.p2.families(all)) {
            let fam1: Vec<&DMatrix<T>> = pairs.iter().map(|&(_, l)| &f1[l]).collect();
            let fam2: Vec<&DMatrix<T>> = pairs.iter().map(|&(k, _)| &f2[k]).collect();
            if self.opts.prefix_solve && !scaling_trace::conjugation_feasible(&fam2, &fam1, nstol) {
                return false;
            }
            if !similarity_probe(&fam1, &fam2, &mut self.rng, self.opts.trials, tol) {
                return false;
            }
        }
        true
    }

    /// Forward check after the last assignment in `pairs`: candidates of the
    /// open positions must agree with it on the pair invariants, and the open
    /// positions must still admit a perfect matching.
    ///
    /// With `prefix_solve`, once the prefix determines a conjugator of the
    /// cyclic triple products, or the map of the first system, candidates are
    /// narrowed to the terms that this map carries onto the position.
    fn narrowed(&self, node: &Node<T>, pairs: &[(usize, usize)], open: &[bool]) -> Option<Node<T>> {
        let (k, l) = pairs[pairs.len() - 1];
        let tol = self.opts.eig_tol;
        let mut next = node.clone();
        for (kk, row) in next.dom.iter_mut().enumerate() {
            if !open[kk] {
                continue;
            }
            row[l] = false;
            if let Some((i1, i2)) = &self.pairs {
                for (ll, ok) in row.iter_mut().enumerate() {
                    *ok = *ok && i1.agree(i2, (ll, l), (kk, k), tol);
                }
            }
        }
        if self.opts.prefix_solve && open.iter().any(|&o| o) {
            let nstol = self.opts.tols.nstol;
            let families = [(&self.p1.m, &self.p2.m), (&self.p1.k, &self.p2.k), (&self.p1.l, &self.p2.l)];
            for ((f1, f2), slot) in families.into_iter().zip(next.conjugators.iter_mut()) {
                if slot.is_some() {
                    continue;
                }
                let fam1: Vec<&DMatrix<T>> = pairs.iter().map(|&(_, ll)| &f1[ll]).collect();
                let fam2: Vec<&DMatrix<T>> = pairs.iter().map(|&(kk, _)| &f2[kk]).collect();
                let Some(x) = scaling_trace::determined_conjugator(&fam2, &fam1, nstol) else { continue };
                let xn = to_f64(x.norm());
                for (kk, row) in next.dom.iter_mut().enumerate() {
                    if !open[kk] {
                        continue;
                    }
                    let m2 = &f2[kk];
                    for (ll, ok) in row.iter_mut().enumerate() {
                        if *ok {
                            let gap = to_f64((&x * m2 - &f1[ll] * &x).norm());
                            *ok = gap <= tol * xn * (to_f64(f1[ll].norm()) + to_f64(m2.norm()));
                        }
                    }
                }
                *slot = Some(x);
            }
            if let (Some((a1, a2)), None) = (&self.prefix_columns, &next.first_map) {
                let cols1: Vec<usize> = pairs.iter().map(|&(_, ll)| ll).collect();
                let cols2: Vec<usize> = pairs.iter().map(|&(kk, _)| kk).collect();
                match scaling_trace::first_system_on_prefix(a1, a2, &cols1, &cols2, nstol) {
                    scaling_trace::PrefixSystem::Infeasible => return None,
                    scaling_trace::PrefixSystem::Open => {}
                    scaling_trace::PrefixSystem::Determined(map) => {
                        let images = &map * a1;
                        for (kk, row) in next.dom.iter_mut().enumerate() {
                            if !open[kk] {
                                continue;
                            }
                            let target = a2.column(kk);
                            for (ll, ok) in row.iter_mut().enumerate() {
                                if *ok {
                                    let y = images.column(ll);
                                    let off = to_f64((&y - target * y.dot(&target)).norm());
                                    *ok = off <= tol * to_f64(y.norm());
                                }
                            }
                        }
                        next.first_map = Some(map);
                    }
                }
            }
        }
        let rows: Vec<Vec<bool>> = (0..open.len()).filter(|&kk| open[kk]).map(|kk| next.dom[kk].clone()).collect();
        perfect_matching_exists(&rows).then_some(next)
    }

    /// Next position to fill: the open one with fewest candidates under
    /// `dynamic_order`, else the first open one.
    fn next_position(&self, node: &Node<T>, open: &[bool]) -> usize {
        let candidates = |k: usize| node.dom[k].iter().filter(|&&ok| ok).count();
        let mut open_positions = (0..open.len()).filter(|&k| open[k]);
        if self.opts.dynamic_order {
            open_positions.min_by_key(|&k| (candidates(k), k)).expect("an open position")
        } else {
            open_positions.next().expect("an open position")
        }
    }

    fn complete(&mut self, pairs: &[(usize, usize)]) -> Result<Option<Leaf<T>>> {
        let f = self.d1.terms();
        self.stats.leaves += 1;
        let mut pi = vec![0; f];
        for &(k, l) in pairs {
            pi[k] = l;
        }
        let Some(solver) = self.solver.filter(|_| self.opts.mode == SearchMode::Full) else {
            return Ok(Some(Leaf::Inconclusive));
        };
        let permuted = self.d1.permuted(&pi)?;
        Ok(match solver.solve(&permuted, self.d2, &self.opts.tols)? {
            ScalingTrace::Found { transform, .. } => {
                let full = transform.compose(&InvarianceTransform::permutation(pi, self.d1.dims())?)?;
                let residual = full.apply(self.d1)?.max_entry_deviation(self.d2)?;
                Some(Leaf::Found(full, residual))
            }
            ScalingTrace::Rejected(_) => {
                self.stats.depth = self.stats.depth.max(f);
                None
            }
        })
    }

    /// Depth-first extension of `pairs` (position of `d2`, term of `d1`).
    fn run(&mut self, pairs: &mut Vec<(usize, usize)>, open: &mut [bool], node: &Node<T>) -> Result<Option<Leaf<T>>> {
        if pairs.len() == self.d1.terms() {
            return self.complete(pairs);
        }
        let k = self.next_position(node, open);
        open[k] = false;
        for idx in 0..self.order[k].len() {
            let l = self.order[k][idx];
            if !node.dom[k][l] {
                continue;
            }
            if self.opts.max_nodes.is_some_and(|cap| self.stats.nodes_visited >= cap) {
                open[k] = true;
                return Ok(Some(Leaf::OutOfBudget));
            }
            pairs.push((k, l));
            self.stats.nodes_visited += 1;
            let next = self.narrowed(node, pairs, open).filter(|_| self.prefix_survives(pairs));
            if let Some(next) = next {
                let found = self.run(pairs, open, &next)?;
                if found.is_some() {
                    open[k] = true;
                    return Ok(found);
                }
            } else {
                self.stats.depth = self.stats.depth.max(pairs.len());
                if let Some(rec) = self.stats.rejected_prefixes.as_mut() {
                    rec.push(pairs.clone());
                }
            }
            pairs.pop();
        }
        open[k] = true;
        Ok(None)
    }
}

/// Decides whether `d1` and `d2` are equivalent.
///
/// In [`SearchMode::Full`] completed permutations go to the scaling+trace
/// solver in a clustering-number-one mode; without one, the general solver
/// is used, or [`Error::AssumptionViolation`] is returned if
/// `general_fallback` is off. An `Equivalent` verdict carries the
/// connecting transform. In
/// [`SearchMode::NoAssumption`] a completed permutation yields
/// `Inconclusive`. Exhausting the search yields `Inequivalent` in both modes;
/// running past `max_nodes` yields `Inconclusive` without a permutation.
pub fn check_equivalence<T: Real>(
    d1: &Decomposition<T>,
    d2: &Decomposition<T>,
    opts: &EquivalenceOptions,
) -> Result<EquivalenceCertificate<T>> {
    let started = Instant::now();
    let require = opts.mode == SearchMode::Full && !opts.general_fallback;
    let mode = match scaling_trace::select_mode(d1, d2, &opts.tols, require)? {
        Ok(mode) => mode,
        Err(rejection) => return Ok(EquivalenceCertificate::early(Verdict::Inequivalent, Some(rejection), started)),
    };
    let solver = match (opts.mode, mode) {
        (SearchMode::NoAssumption, _) => None,
        (SearchMode::Full, Some(md)) => Some(LeafSolver::InMode(md)),
        (SearchMode::Full, None) => Some(LeafSolver::General),
    };
    let p1 = TripleProducts::of(d1);
    let p2 = TripleProducts::of(d2);
    let f = d1.terms();
    let order: Vec<Vec<usize>> = if opts.order_children {
        let families1 = p1.families(opts.probe_all_cyclic);
        let families2 = p2.families(opts.probe_all_cyclic);
        let spectra1: Vec<Vec<_>> = families1.iter().map(|fam| fam.iter().map(eigenvalues).collect()).collect();
        (0..f)
            .map(|k| {
                let targets: Vec<_> = families2.iter().map(|fam| eigenvalues(&fam[k])).collect();
                let distance = |l: usize| -> f64 {
                    spectra1.iter().zip(&targets).map(|(s1, t)| spectral_distance(&s1[l], t)).sum()
                };
                let mut cand: Vec<(f64, usize)> = (0..f).map(|l| (distance(l), l)).collect();
                cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                cand.into_iter().map(|(_, l)| l).collect()
            })
            .collect()
    } else {
        vec![(0..f).collect(); f]
    };
    let prefix_columns = match (opts.prefix_solve, mode) {
        (true, Some(md)) => scaling_trace::first_system_columns(d1, md).zip(scaling_trace::first_system_columns(d2, md)),
        _ => None,
    };
    let mut search = Search {
        d1,
        d2,
        p1,
        p2,
        order,
        opts,
        solver,
        pairs: opts.pair_invariants.then(|| (PairInvariants::of(d1), PairInvariants::of(d2))),
        prefix_columns,
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
        stats: ProbeStats {
            rejected_prefixes: opts.record_rejections.then(Vec::new),
            ..Default::default()
        },
    };
    let mut pairs = Vec::with_capacity(f);
    let dom: Vec<Vec<bool>> = (0..f)
        .map(|k| {
            (0..f)
                .map(|l| search.pairs.as_ref().is_none_or(|(i1, i2)| i1.agree(i2, (l, l), (k, k), opts.eig_tol)))
                .collect()
        })
        .collect();
    let outcome = if perfect_matching_exists(&dom) {
        let root = Node { dom, conjugators: [None, None, None], first_map: None };
        search.run(&mut pairs, &mut vec![true; f], &root)?
    } else {
        None
    };
    let mut pi = vec![0; f];
    for &(k, l) in &pairs {
        pi[k] = l;
    }
    let mut stats = search.stats;
    stats.elapsed_secs = started.elapsed().as_secs_f64();
    let (verdict, transform, permutation, residual) = match outcome {
        Some(Leaf::Found(t, res)) => (Verdict::Equivalent, Some(t), Some(pi), Some(res)),
        Some(Leaf::Inconclusive) => (Verdict::Inconclusive, None, Some(pi), None),
        Some(Leaf::OutOfBudget) => (Verdict::Inconclusive, None, None, None),
        None => (Verdict::Inequivalent, None, None, None),
    };
    let mode = match solver {
        Some(LeafSolver::InMode(md)) => Some(md),
        _ => None,
    };
    Ok(EquivalenceCertificate { verdict, transform, permutation, residual, probe_stats: stats, mode, reason: None })
}

/// Whether every row can be matched to a distinct allowed column
/// (augmenting paths).
fn perfect_matching_exists(allowed: &[Vec<bool>]) -> bool {
    fn augment(row: usize, allowed: &[Vec<bool>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for col in 0..seen.len() {
            if allowed[row][col] && !seen[col] {
                seen[col] = true;
                if owner[col].is_none_or(|other| augment(other, allowed, seen, owner)) {
                    owner[col] = Some(row);
                    return true;
                }
            }
        }
        false
    }
    let Some(cols) = allowed.first().map(Vec::len) else { return true };
    let mut owner = vec![None; cols];
    (0..allowed.len()).all(|row| augment(row, allowed, &mut vec![false; cols], &mut owner))
}

/// Exhaustive oracle: runs the scaling+trace solver on every permutation
/// (the general solver when no factor matrix has clustering number one).
/// Refuses more than [`BRUTEFORCE_MAX_TERMS`] terms.
pub fn check_equivalence_bruteforce<T: Real>(
    d1: &Decomposition<T>,
    d2: &Decomposition<T>,
    tols: &SolveTolerances,
) -> Result<EquivalenceCertificate<T>> {
    let started = Instant::now();
    let f = d1.terms();
    if f > BRUTEFORCE_MAX_TERMS {
        return Err(Error::Refused(format!(
            "exhaustive search over {f}! permutations; at most {BRUTEFORCE_MAX_TERMS} terms allowed"
        )));
    }
    let mode = match scaling_trace::select_mode(d1, d2, tols, false)? {
        Ok(mode) => mode,
        Err(rejection) => return Ok(EquivalenceCertificate::early(Verdict::Inequivalent, Some(rejection), started)),
    };
    let solver = mode.map_or(LeafSolver::General, LeafSolver::InMode);
    let mut sigma: Vec<usize> = (0..f).collect();
    let mut stats = ProbeStats::default();
    loop {
        stats.leaves += 1;
        let permuted = d1.permuted(&sigma)?;
        if let ScalingTrace::Found { transform, .. } = solver.solve(&permuted, d2, tols)? {
            let full = transform.compose(&InvarianceTransform::permutation(sigma.clone(), d1.dims())?)?;
            let residual = full.apply(d1)?.max_entry_deviation(d2)?;
            stats.elapsed_secs = started.elapsed().as_secs_f64();
            return Ok(EquivalenceCertificate {
                verdict: Verdict::Equivalent,
                transform: Some(full),
                permutation: Some(sigma),
                residual: Some(residual),
                probe_stats: stats,
                mode,
                reason: None,
            });
        }
        if !next_permutation(&mut sigma) {
            break;
        }
    }
    stats.depth = f;
    stats.elapsed_secs = started.elapsed().as_secs_f64();
    Ok(EquivalenceCertificate {
        verdict: Verdict::Inequivalent,
        transform: None,
        permutation: None,
        residual: None,
        probe_stats: stats,
        mode,
        reason: None,
    })
}

/// Lexicographic successor; `false` after the last permutation.
fn next_permutation(a: &mut [usize]) -> bool {
    let n = a.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| a[i] < a[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| a[j] > a[i]).expect("successor exists");
    a.swap(i, j);
    a[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Fixture;
    use rand::Rng;

    #[test]
    fn permutations_are_enumerated_once() {
        let mut a = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut a) {
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(a, vec![3, 2, 1, 0]);
    }

    #[test]
    fn self_equivalence_uses_identity_permutation() {
        let d: Decomposition<f64> = Fixture::Strassen.build();
        let cert = check_equivalence(&d, &d, &EquivalenceOptions::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Equivalent);
        assert_eq!(cert.permutation.unwrap(), (0..7).collect::<Vec<_>>());
        assert!(cert.residual.unwrap() < 1e-10);
    }

    #[test]
    fn random_transform_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for fixture in [Fixture::Strassen, Fixture::DotProd121, Fixture::Naive(2, 3, 2), Fixture::Laderman] {
            let d: Decomposition<f64> = fixture.build();
            let t = InvarianceTransform::random(d.dims(), d.terms(), &mut rng, &Default::default());
            let d2 = t.apply(&d).unwrap();
            let opts = EquivalenceOptions { seed: rng.random(), ..Default::default() };
            let cert = check_equivalence(&d, &d2, &opts).unwrap();
            assert_eq!(cert.verdict, Verdict::Equivalent, "{fixture}");
            assert!(cert.residual.unwrap() < 1e-8, "{fixture}: {:?}", cert.residual);
        }
    }

    #[test]
    fn naive_and_dotprod_agree() {
        let a: Decomposition<f64> = Fixture::Naive(1, 2, 1).build();
        let b: Decomposition<f64> = Fixture::DotProd121.build();
        let cert = check_equivalence_bruteforce(&a, &b, &SolveTolerances::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Equivalent);
    }

    #[test]
    fn bruteforce_refuses_large_inputs() {
        let d: Decomposition<f64> = Fixture::Laderman.build();
        assert!(matches!(
            check_equivalence_bruteforce(&d, &d, &SolveTolerances::default()),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn no_assumption_mode_is_inconclusive_on_match() {
        let d: Decomposition<f64> = Fixture::Strassen.build();
        let opts = EquivalenceOptions { mode: SearchMode::NoAssumption, ..Default::default() };
        let cert = check_equivalence(&d, &d, &opts).unwrap();
        assert_eq!(cert.verdict, Verdict::Inconclusive);
        assert!(cert.transform.is_none());
    }
}

