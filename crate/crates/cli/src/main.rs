use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use bloch_fermi::config::{parse_config, Format};
use bloch_fermi::driver::{default_out_dir, exit_code_for, run_config, RunOptions, EXIT_CONFIG, EXIT_IO};
use bloch_fermi::output::Payload;
use clap::Parser;

/// Band structures, Fermi surfaces and spectral measures of periodic lattice operators.
#[derive(Parser, Debug)]
#[command(name = "bloch-fermi", version)]
struct Args {
    /// Run configuration (key=value lines)
    config: PathBuf,

    /// Output directory; overrides output_dir in the config
    #[arg(long)]
    out: Option<PathBuf>,

    /// Grid points per torus dimension; overrides grid_N
    #[arg(long)]
    grid: Option<usize>,

    /// csv, json or gnuplot; overrides format
    #[arg(long)]
    format: Option<Format>,

    /// Worker threads
    #[arg(long, env = "BLOCH_FERMI_THREADS")]
    threads: Option<usize>,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("bloch-fermi: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();

    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_IO, format!("cannot read {}: {e}", args.config.display())),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", args.config.display())),
    };
    if let Some(n) = args.grid {
        if n < 2 {
            return fail(EXIT_CONFIG, format!("--grid must be at least 2, got {n}"));
        }
        cfg.grid_n = n;
    }
    let threads = args.threads.or(cfg.threads);
    if threads == Some(0) {
        return fail(EXIT_CONFIG, "thread count must be positive");
    }
    let opts = RunOptions {
        out_dir: args.out.clone().unwrap_or_else(|| default_out_dir(&cfg).to_path_buf()),
        format: args.format.unwrap_or(cfg.format),
        parallel: threads != Some(1),
        threads,
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, format!("cannot start thread pool: {e}")),
    };

    let outcome = match pool.install(|| run_config(&cfg, &opts)) {
        Ok(o) => o,
        Err(e) => return fail(exit_code_for(&e), e),
    };
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    for r in &outcome.records {
        if let Payload::Verify(v) = &r.data {
            for c in v.failures() {
                eprintln!(
                    "FAIL {}: residual {:e} > tolerance {:e}",
                    c.name, c.residual, c.tolerance
                );
            }
            println!(
                "verify {}: {}/{} checks passed",
                v.model,
                v.checks.iter().filter(|c| c.passed || c.informational).count(),
                v.checks.len()
            );
        }
    }
    ExitCode::from(outcome.exit_code() as u8)
}
