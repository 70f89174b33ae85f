use std::path::PathBuf;
use std::process::ExitCode;

use besov_lab::cli::{exit_code, run, validate, ExperimentManifest};
use besov_lab::error::Error;
use clap::Parser;

/// Runs one experiment described by a TOML manifest.
#[derive(Parser, Debug)]
#[command(name = "besov-lab", version)]
struct Args {
    /// Experiment manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Runs on one thread; output is then byte-identical across runs.
    #[arg(long, conflicts_with = "threads")]
    sequential: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Validates the manifest and exits.
    #[arg(long)]
    check: bool,
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e) as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut m = match ExperimentManifest::load(&args.manifest) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    if let Some(seed) = args.seed {
        m.seed = seed;
    }
    if let Some(dir) = args.out_dir {
        m.output.dir = Some(dir);
    }
    let problems = validate(&m);
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("invalid manifest: {p}");
        }
        return ExitCode::from(2);
    }
    if args.check {
        println!("manifest ok");
        return ExitCode::SUCCESS;
    }
    let threads = if args.sequential { Some(1) } else { args.threads };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => return fail(&Error::InvalidParams(format!("thread pool: {e}"))),
    };
    match pool.install(|| run(&m)) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(out.status as u8)
        }
        Err(e) => fail(&e),
    }
}
