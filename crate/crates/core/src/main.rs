use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hexnls::experiment::{run, ExperimentKind, ExperimentSpec};
use hexnls::Error;

/// Run one batch experiment and check its assertions.
///
/// Exit status: 0 when every assertion passes, 1 when one fails, 2 on usage
/// or I/O errors.
#[derive(Parser, Debug)]
#[command(name = "hexnls", version = hexnls::experiment::VERSION)]
struct Cli {
    /// inequalities, trial-forms, phase-diagram, critical-mass, unbounded-p6
    /// or soliton-check
    kind: ExperimentKind,
    /// JSON spec; omitted fields keep the kind's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the exponent list (comma separated).
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Replace the mass list (comma separated).
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    /// Truncation radius of lattice graphs.
    #[arg(long)]
    radius: Option<usize>,
    /// Seed for corpus, ascent and random initializers.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<ExperimentSpec, Error> {
    let mut spec = match &cli.config {
        Some(path) => ExperimentSpec::from_json(cli.kind, &std::fs::read_to_string(path)?)?,
        None => ExperimentSpec::defaults(cli.kind),
    };
    if let Some(p) = &cli.p {
        spec.p = p.clone();
    }
    if let Some(mu) = &cli.mu {
        spec.mu = mu.clone();
    }
    if let Some(r) = cli.radius {
        spec.radius = Some(r);
    }
    if let Some(s) = cli.seed {
        spec.seed = s;
        spec.solver.seed = s;
    }
    if let Some(out) = &cli.out {
        spec.out = out.clone();
    }
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let spec = match load(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&spec) {
        Ok(report) => {
            for a in &report.assertions {
                println!("[{}] {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            println!("wrote {} files to {}", report.files.len() + 1, spec.out.display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("assertion failure");
                ExitCode::from(1)
            }
        }
        Err(e @ (Error::Io(_) | Error::Json(_) | Error::Parse(_) | Error::InvalidParameter(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("experiment failed: {e}");
            ExitCode::from(1)
        }
    }
}
