//! Command-line benchmark runner: factorize a Matrix Market file or a
//! synthetic matrix, write the per-sweep residual trace and summarize
//! repeated runs.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use arknls::io::{read_matrix_market, write_trace_csv};
use arknls::synth::{generate, SynthSpec};
use arknls::{Matrix, Nmf, SolverConfig, TraceRecord};
use clap::{ArgGroup, CommandFactory, Parser};

#[derive(Debug, Parser)]
#[command(
    name = "arknls",
    version,
    about = "Nonnegative matrix factorization with closed-form rank-k block updates",
    group(ArgGroup::new("source").required(true).args(["input", "synthetic"]))
)]
pub struct Args {
    /// Matrix Market file holding the nonnegative input matrix.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Generate the input instead: rows, columns, planted rank, noise std and
    /// sparsity (0 for dense).
    #[arg(long, value_name = "M,N,RANK,NOISE,SPARSITY", value_parser = parse_synthetic)]
    pub synthetic: Option<SyntheticArgs>,

    /// Factorization rank.
    #[arg(long, value_name = "R", value_parser = clap::value_parser!(u64).range(1..))]
    pub rank: u64,

    /// Block width.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=3))]
    pub k: u64,

    #[arg(long, value_name = "N", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_sweeps: u64,

    /// Wall-clock budget per run, checked after each sweep.
    #[arg(long, value_name = "SECONDS", value_parser = parse_positive)]
    pub time_limit: Option<f64>,

    /// Stop when the relative residual changes by less than this over a sweep.
    #[arg(long, value_name = "T", value_parser = parse_nonnegative)]
    pub tol: Option<f64>,

    /// Seeds the synthetic data; run `i` (from 0) starts from seed + i.
    #[arg(long, value_name = "S", default_value_t = 0)]
    pub seed: u64,

    /// Number of repeated runs.
    #[arg(long, value_name = "C", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,

    /// Trace CSV. With several runs, run `i` goes to `<stem>-rep<i>.<ext>`.
    #[arg(long, value_name = "PATH.csv")]
    pub out: Option<PathBuf>,

    /// Print the mean ± std of the final residual and the mean time.
    #[arg(long)]
    pub summary: bool,

    /// Write 0 in the elapsed_s column so traces are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticArgs {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub noise: f64,
    pub sparsity: f64,
}

fn parse_synthetic(s: &str) -> Result<SyntheticArgs, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(format!(
            "expected 5 comma-separated values, got {}",
            parts.len()
        ));
    }
    let int = |i: usize, what: &str| -> Result<usize, String> {
        parts[i]
            .parse()
            .map_err(|_| format!("{what} `{}` is not a nonnegative integer", parts[i]))
    };
    let real = |i: usize, what: &str| -> Result<f64, String> {
        parts[i]
            .parse()
            .map_err(|_| format!("{what} `{}` is not a number", parts[i]))
    };
    let args = SyntheticArgs {
        m: int(0, "m")?,
        n: int(1, "n")?,
        rank: int(2, "rank")?,
        noise: real(3, "noise")?,
        sparsity: real(4, "sparsity")?,
    };
    if args.m == 0 || args.n == 0 || args.rank == 0 {
        return Err("dimensions and rank must be positive".into());
    }
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(format!("noise {} must be nonnegative", args.noise));
    }
    if !(0.0..1.0).contains(&args.sparsity) {
        return Err(format!("sparsity {} must lie in [0, 1)", args.sparsity));
    }
    Ok(args)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn parse_nonnegative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a nonnegative number")),
    }
}

/// Where run `rep` (1-based) of `reps` writes its trace.
pub fn trace_path(out: &Path, rep: u64, reps: u64) -> PathBuf {
    if reps == 1 {
        return out.to_path_buf();
    }
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}-rep{rep}.{}", ext.to_string_lossy()),
        None => format!("{stem}-rep{rep}"),
    };
    out.with_file_name(name)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub sweeps: usize,
    pub final_rel_residual: f64,
    pub time_s: f64,
}

fn load_input(args: &Args) -> arknls::Result<Matrix> {
    match (&args.input, args.synthetic) {
        (Some(path), _) => read_matrix_market(path),
        (None, Some(s)) => generate(&SynthSpec {
            m: s.m,
            n: s.n,
            true_rank: s.rank,
            noise_std: s.noise,
            sparsity: s.sparsity,
            seed: args.seed,
        }),
        (None, None) => unreachable!("clap requires one input source"),
    }
}

/// Runs every repetition and writes traces; returns one result per run.
pub fn execute(args: &Args) -> arknls::Result<Vec<RunResult>> {
    let a = load_input(args)?;
    let mut results = Vec::with_capacity(args.reps as usize);
    for rep in 0..args.reps {
        let seed = args.seed.wrapping_add(rep);
        let config = SolverConfig {
            max_sweeps: args.max_sweeps as usize,
            time_limit: args.time_limit,
            tol_residual_change: args.tol,
            seed,
            ..SolverConfig::new(args.rank as usize, args.k as usize)
        };
        let start = Instant::now();
        let nmf = Nmf::new(&a, config)?;
        let mut factors = nmf.initialize()?;
        let mut trace = nmf.run(&mut factors, &mut |_| {})?;
        let time_s = start.elapsed().as_secs_f64();

        if let Some(out) = &args.out {
            if args.no_timing {
                trace
                    .records
                    .iter_mut()
                    .for_each(|r: &mut TraceRecord| r.elapsed_s = 0.0);
            }
            write_trace_csv(&trace.records, trace_path(out, rep + 1, args.reps))?;
        }
        let last = trace.records.last().expect("at least one sweep runs");
        results.push(RunResult {
            seed,
            sweeps: last.sweep,
            final_rel_residual: last.rel_residual,
            time_s,
        });
    }
    Ok(results)
}

/// Parses `argv` (including the program name), runs, and returns the exit
/// code: 0 on success, 2 for flag errors, 1 for runtime failures.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(args) => args,
        Err(e) => {
            let code = e.exit_code();
            let mut text = e.render().to_string();
            if e.use_stderr() && !text.contains("Usage:") {
                text.push_str(&format!("\n{}\n", Args::command().render_usage()));
            }
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    let results = match execute(&args) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    };
    for r in &results {
        let _ = writeln!(
            stdout,
            "seed={} sweeps={} final_rel_residual={:.6e} time_s={:.3}",
            r.seed, r.sweeps, r.final_rel_residual, r.time_s
        );
    }
    if args.summary {
        let residuals: Vec<f64> = results.iter().map(|r| r.final_rel_residual).collect();
        let times: Vec<f64> = results.iter().map(|r| r.time_s).collect();
        let (mean, std) = mean_std(&residuals);
        let (time, _) = mean_std(&times);
        let _ = writeln!(
            stdout,
            "k={} rank={} final_rel_residual={mean:.6e}±{std:.6e} time_s={time:.3}",
            args.k, args.rank
        );
    }
    0
}
