//! Population experiments: pairwise equivalence rates, ND histograms and
//! clustering-vector tallies over a directory of decompositions.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mmt_core::clustering::{clustering_vector, DEFAULT_RANK_TOL};
use mmt_core::cpd::derived_seed;
use mmt_core::discretize::nd_score;
use mmt_core::equivalence::{check_equivalence, EquivalenceOptions, Verdict};
use mmt_core::io::decomposition_from_json;
use mmt_core::Decomposition64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Bin edges for ND scores; the last bin is closed on the right.
pub const ND_EDGES: [f64; 9] = [0.0, 1e-9, 1e-6, 1e-3, 0.1, 0.2, 0.3, 0.4, 0.5];

/// Name of the manifest written next to sampled decompositions; skipped when
/// loading a population.
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct BatchOptions {
    /// Pairs to check; `None` checks all of them.
    pub pairs: Option<usize>,
    pub seed: u64,
    pub jobs: usize,
    pub q: f64,
    pub draws: usize,
    pub beta_bound: i32,
    pub rank_tol: f64,
    pub equivalence: EquivalenceOptions,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            pairs: None,
            seed: 0,
            jobs: 1,
            q: 1.0,
            draws: 16,
            beta_bound: 5,
            rank_tol: DEFAULT_RANK_TOL,
            equivalence: EquivalenceOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of(values: &[f64], edges: &[f64]) -> Self {
        let mut counts = vec![0; edges.len() - 1];
        for &v in values {
            let bin = edges[1..]
                .iter()
                .position(|&hi| v < hi)
                .unwrap_or(edges.len() - 2);
            counts[bin] += 1;
        }
        Histogram { edges: edges.to_vec(), counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    /// `(m,p,n;F)`.
    pub case: String,
    pub sample_count: usize,
    pub pair_count: usize,
    pub equivalent_percentage: f64,
    pub nd_histogram: Histogram,
    /// Clustering vectors `(u,v,w)` and how many samples have each.
    pub clustering_tally: BTreeMap<String, usize>,
    pub mean_equivalence_secs: f64,
    pub max_depth: usize,
    pub mean_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub idx1: usize,
    pub idx2: usize,
    pub verdict: String,
    pub millis: f64,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub report: BatchReport,
    pub rows: Vec<PairRow>,
    /// Per-sample ND scores in file order.
    pub nd_scores: Vec<f64>,
    pub files: Vec<PathBuf>,
}

/// Decomposition files of a population directory, sorted by name.
pub fn population_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != MANIFEST))
        .collect();
    files.sort();
    Ok(files)
}

fn load_population(dir: &Path) -> Result<(Vec<PathBuf>, Vec<Decomposition64>), CliError> {
    let files = population_files(dir)?;
    if files.is_empty() {
        return Err(CliError::Core(mmt_core::Error::InvalidArgument(format!(
            "no decomposition files in {}",
            dir.display()
        ))));
    }
    let mut decs = Vec::with_capacity(files.len());
    for f in &files {
        let text = std::fs::read_to_string(f)?;
        let d = decomposition_from_json::<f64>(&text).map_err(|e| CliError::Parse(format!("{}: {e}", f.display())))?;
        decs.push(d);
    }
    let key = |d: &Decomposition64| (d.dims(), d.terms());
    if let Some(bad) = decs.iter().position(|d| key(d) != key(&decs[0])) {
        return Err(CliError::Core(mmt_core::Error::InvalidArgument(format!(
            "mixed cases: {} differs from {}",
            files[bad].display(),
            files[0].display()
        ))));
    }
    Ok((files, decs))
}

/// Pairs `i < j`, shuffled with `seed`, truncated to `limit`.
pub fn sample_pairs(n: usize, limit: Option<usize>, seed: u64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    if let Some(k) = limit {
        pairs.truncate(k);
    }
    pairs
}

pub fn run_batch(dir: &Path, opts: &BatchOptions) -> Result<BatchOutput, CliError> {
    let (files, decs) = load_population(dir)?;
    let (m, p, n) = decs[0].dims();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;

    let per_sample: Vec<Result<(f64, [usize; 3]), mmt_core::Error>> = pool.install(|| {
        decs.par_iter()
            .enumerate()
            .map(|(i, d)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(opts.seed, i as u64));
                let nd = nd_score(d, opts.q, opts.draws, opts.beta_bound, &mut rng)?.nd_score;
                let cv = clustering_vector(d, opts.rank_tol)?.values();
                Ok((nd, cv))
            })
            .collect()
    });
    let mut nd_scores = Vec::with_capacity(decs.len());
    let mut tally = BTreeMap::new();
    for r in per_sample {
        let (nd, cv) = r?;
        nd_scores.push(nd);
        *tally.entry(format!("({},{},{})", cv[0], cv[1], cv[2])).or_insert(0) += 1;
    }

    let pairs = sample_pairs(decs.len(), opts.pairs, opts.seed);
    let checked: Vec<Result<PairRow, mmt_core::Error>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let t = Instant::now();
                let cert = check_equivalence(&decs[i], &decs[j], &opts.equivalence)?;
                let verdict = match cert.verdict {
                    Verdict::Equivalent => "equivalent",
                    Verdict::Inequivalent => "inequivalent",
                    Verdict::Inconclusive => "inconclusive",
                };
                Ok(PairRow {
                    idx1: i,
                    idx2: j,
                    verdict: verdict.to_string(),
                    millis: t.elapsed().as_secs_f64() * 1e3,
                    depth: cert.probe_stats.depth,
                })
            })
            .collect()
    });
    let rows = checked.into_iter().collect::<Result<Vec<_>, _>>()?;

    let count = rows.len();
    let equivalent = rows.iter().filter(|r| r.verdict == "equivalent").count();
    let mean = |xs: &mut dyn Iterator<Item = f64>| if count == 0 { 0.0 } else { xs.sum::<f64>() / count as f64 };
    let report = BatchReport {
        case: format!("({m},{p},{n};{})", decs[0].terms()),
        sample_count: decs.len(),
        pair_count: count,
        equivalent_percentage: if count == 0 { 0.0 } else { 100.0 * equivalent as f64 / count as f64 },
        nd_histogram: Histogram::of(&nd_scores, &ND_EDGES),
        clustering_tally: tally,
        mean_equivalence_secs: mean(&mut rows.iter().map(|r| r.millis / 1e3)),
        max_depth: rows.iter().map(|r| r.depth).max().unwrap_or(0),
        mean_depth: mean(&mut rows.iter().map(|r| r.depth as f64)),
    };
    Ok(BatchOutput { report, rows, nd_scores, files })
}

pub fn write_csv<W: Write>(rows: &[PairRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
