use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mmt_core::clustering::{clustering_vector, DEFAULT_RANK_TOL};
use mmt_core::cpd::{sample_population, SolveConfig};
use mmt_core::discretize::{criterion, Criterion};
use mmt_core::equivalence::{check_equivalence, EquivalenceOptions, SearchMode, Verdict};
use mmt_core::io::{decomposition_to_json, transform_to_json, CertificateJson};
use mmt_core::transforms::RandomTransformOptions;
use mmt_core::{MatMulTensor, Transform64};
use mmt_cli::batch::{run_batch, write_csv, BatchOptions};
use mmt_cli::{load_decomposition, CliError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Equivalence, clustering and discretizability tools for polyadic
/// decompositions of matrix multiplication tensors.
///
/// Decomposition arguments accept a JSON file, `-` for stdin, or a fixture
/// name (strassen, laderman, dotprod121, naive(m,p,n)).
#[derive(Parser)]
#[command(name = "mmt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    NoAssumption,
}

#[derive(Subcommand)]
enum Command {
    /// Check a decomposition against its tensor; exit 1 if it fails.
    Verify {
        file: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Print the clustering vector with per-mode evidence as JSON.
    Cluster {
        file: String,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
    },
    /// Decide equivalence: exit 0 equivalent, 1 inequivalent, 2 inconclusive.
    Equiv {
        file1: String,
        file2: String,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the full certificate instead of the verdict line.
        #[arg(long)]
        json: bool,
    },
    /// Discretizability criterion report; exit 1 if the criterion fails.
    Discretize {
        file: String,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 16)]
        draws: usize,
        #[arg(long, default_value_t = 5)]
        beta_bound: i32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
    },
    /// Sample decompositions numerically into DIR with a manifest.
    Decompose {
        /// Dimensions as M,P,N.
        #[arg(long, value_parser = parse_mpn)]
        mpn: (usize, usize, usize),
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_restarts: usize,
        #[arg(long, default_value_t = 400)]
        max_iters: usize,
    },
    /// Apply a random invariance transform; the result goes to stdout (or
    /// --out), the transform to --transform-out (or stderr).
    Gen {
        file: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        transform_out: Option<PathBuf>,
    },
    /// Pairwise equivalence, ND histogram and clustering tally over DIR.
    Batch {
        dir: PathBuf,
        /// Number of sampled pairs (default: all).
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 16)]
        draws: usize,
        #[arg(long, default_value_t = 5)]
        beta_bound: i32,
        /// Write the report here instead of stdout.
        #[arg(long)]
        json_out: Option<PathBuf>,
        /// Write per-pair rows here.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
}

fn parse_mpn(s: &str) -> Result<(usize, usize, usize), String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("{x}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [m, p, n] if m > 0 && p > 0 && n > 0 => Ok((m, p, n)),
        _ => Err("expected three positive integers M,P,N".into()),
    }
}

/// Writes a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json<T: Serialize>(value: &T) {
    emit(&serde_json::to_string_pretty(value).expect("plain data serializes"));
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    seed: u64,
    trials: usize,
    max_residual: f64,
}

#[derive(Serialize)]
struct Manifest {
    case: String,
    seed: u64,
    requested: usize,
    produced: usize,
    partial: bool,
    total_trials: usize,
    samples: Vec<ManifestEntry>,
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Verify { file, tol } => {
            let d = load_decomposition(&file)?;
            let report = d.verify(tol);
            emit(&format!("max residual {:.3e} ({})", report.max_residual, if report.passed { "pass" } else { "fail" }));
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Cluster { file, rank_tol } => {
            let d = load_decomposition(&file)?;
            print_json(&clustering_vector(&d, rank_tol)?);
            Ok(0)
        }
        Command::Equiv { file1, file2, mode, seed, json } => {
            let d1 = load_decomposition(&file1)?;
            let d2 = load_decomposition(&file2)?;
            let opts = EquivalenceOptions {
                seed,
                mode: match mode {
                    ModeArg::Full => SearchMode::Full,
                    ModeArg::NoAssumption => SearchMode::NoAssumption,
                },
                ..EquivalenceOptions::default()
            };
            let cert = check_equivalence(&d1, &d2, &opts)?;
            if json {
                print_json(&CertificateJson::from_certificate(&cert));
            } else {
                match cert.residual {
                    Some(r) => emit(&format!("{:?} (residual {r:.3e})", cert.verdict)),
                    None => emit(&format!("{:?}", cert.verdict)),
                }
            }
            Ok(match cert.verdict {
                Verdict::Equivalent => 0,
                Verdict::Inequivalent => 1,
                Verdict::Inconclusive => 2,
            })
        }
        Command::Discretize { file, q, draws, beta_bound, seed, threshold } => {
            let d = load_decomposition(&file)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (verdict, report) = criterion(&d, q, draws, beta_bound, &mut rng, threshold)?;
            print_json(&report);
            Ok(if verdict == Criterion::Passes { 0 } else { 1 })
        }
        Command::Decompose { mpn: (m, p, n), rank, count, seed, out, max_restarts, max_iters } => {
            let tensor = MatMulTensor::new(m, p, n)?;
            let cfg = SolveConfig { seed, max_restarts, max_iters, ..SolveConfig::default() };
            let pop = sample_population(&tensor, rank, count, &cfg)?;
            fs::create_dir_all(&out)?;
            let mut samples = Vec::with_capacity(pop.samples.len());
            for (i, s) in pop.samples.iter().enumerate() {
                let name = format!("dec_{:04}.json", i + 1);
                fs::write(out.join(&name), decomposition_to_json(&s.decomposition))?;
                samples.push(ManifestEntry { file: name, seed: s.seed, trials: s.trials, max_residual: s.max_residual });
            }
            let manifest = Manifest {
                case: format!("({m},{p},{n};{rank})"),
                seed,
                requested: count,
                produced: samples.len(),
                partial: pop.partial,
                total_trials: pop.total_trials,
                samples,
            };
            fs::write(out.join(mmt_cli::batch::MANIFEST), serde_json::to_string_pretty(&manifest).expect("serializes"))?;
            if pop.partial {
                eprintln!("warning: restart budget exhausted after {} of {count} samples", manifest.produced);
                return Ok(1);
            }
            Ok(0)
        }
        Command::Gen { file, seed, out, transform_out } => {
            let d = load_decomposition(&file)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = Transform64::random(d.dims(), d.terms(), &mut rng, &RandomTransformOptions::default());
            let transformed = t.apply(&d)?;
            let dec_json = decomposition_to_json(&transformed);
            match out {
                Some(path) => fs::write(path, dec_json)?,
                None => emit(&dec_json),
            }
            let t_json = transform_to_json(&t);
            match transform_out {
                Some(path) => fs::write(path, t_json)?,
                None => eprintln!("{t_json}"),
            }
            Ok(0)
        }
        Command::Batch { dir, pairs, seed, jobs, q, draws, beta_bound, json_out, csv_out } => {
            let opts = BatchOptions { pairs, seed, jobs, q, draws, beta_bound, ..BatchOptions::default() };
            let output = run_batch(&dir, &opts)?;
            let text = serde_json::to_string_pretty(&output.report).expect("serializes");
            match json_out {
                Some(path) => fs::write(path, text)?,
                None => emit(&text),
            }
            if let Some(path) = csv_out {
                write_csv(&output.rows, fs::File::create(path)?)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CliError::PARSE_EXIT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => {
            let _ = std::io::stdout().flush();
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
