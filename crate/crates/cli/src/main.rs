use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use polylab::{batch_exit_code, collect_scenario_paths, emit, load_all, run_batch, Format};

/// Run polydisc operator checks described by scenario files.
///
/// Exit codes: 0 when every scenario meets its `expect` block, 1 on a
/// mismatch (including an unexpected error status), 2 on invalid input.
#[derive(Parser, Debug)]
#[command(name = "polylab", version)]
struct Cli {
    /// Scenario file, or a directory of `.scn` files. Repeatable.
    #[arg(long = "config", env = "POLYLAB_CONFIG", value_delimiter = ',', required = true)]
    config: Vec<PathBuf>,

    /// Write the reports here instead of stdout.
    #[arg(long, env = "POLYLAB_OUT")]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "json", env = "POLYLAB_FORMAT")]
    format: Format,

    /// Override every scenario's seed.
    #[arg(long, env = "POLYLAB_SEED")]
    seed: Option<u64>,

    /// Override every scenario's residual tolerance.
    #[arg(long, env = "POLYLAB_TOL")]
    tol: Option<f64>,

    /// Override every scenario's grid caps, e.g. `6,6`.
    #[arg(long, env = "POLYLAB_DEGREE", value_delimiter = ',')]
    degree: Option<Vec<usize>>,

    /// Include wall-clock runtime in the reports.
    #[arg(long, env = "POLYLAB_TIMING")]
    timing: bool,
}

fn fail(message: String) -> ExitCode {
    eprintln!("polylab: {message}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.tol {
        if t <= 0.0 || t.is_nan() {
            return fail(format!("--tol must be positive, got {t}"));
        }
    }
    if let Some(d) = &cli.degree {
        if d.is_empty() || d.contains(&0) {
            return fail("--degree caps must all be at least 1".into());
        }
    }
    let paths = match collect_scenario_paths(&cli.config) {
        Ok(p) if p.is_empty() => return fail("no scenario files found".into()),
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let mut scenarios = match load_all(&paths) {
        Ok(s) => s,
        Err((path, e)) => return fail(format!("{}: {e}", path.display())),
    };
    for s in &mut scenarios {
        s.override_with(cli.seed, cli.tol, cli.degree.as_deref());
    }
    let reports = run_batch(&scenarios, cli.timing);
    let text = emit(&reports, cli.format);
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                return fail(format!("{}: {e}", path.display()));
            }
        }
        None => print!("{text}"),
    }
    for r in &reports {
        for m in &r.mismatches {
            eprintln!("{}: {m}", r.id);
        }
    }
    ExitCode::from(batch_exit_code(&reports) as u8)
}
