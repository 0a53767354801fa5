use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracsector::config::RunConfig;
use fracsector::pipeline::{run, Command};
use fracsector::Error;

#[derive(Parser)]
#[command(name = "fracsector", version, about = "Sector, spectrum and trace-type checks for fractional elliptic operators")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single resolution instead of the configured `N_list`
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Every claim at every resolution, plus refinement checks
    Report(Common),
    /// Eigenvalues, s-numbers and numerical ranges
    Spectrum(Common),
    /// Boundedness, accretivity, sector and factorization claims
    Sector(Common),
    /// Weyl comparison and decay of the real component
    Weyl(Common),
    /// Schatten-class membership of the resolvent
    Schatten(Common),
    /// Partial-sum bounds for eigenvalues of the resolvent
    Sumbound(Common),
    /// Analytic self-tests of the discretization
    Oracle(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Report(c) => (Command::Report, c),
        Cmd::Spectrum(c) => (Command::Spectrum, c),
        Cmd::Sector(c) => (Command::Sector, c),
        Cmd::Weyl(c) => (Command::Weyl, c),
        Cmd::Schatten(c) => (Command::Schatten, c),
        Cmd::Sumbound(c) => (Command::Sumbound, c),
        Cmd::Oracle(c) => (Command::Oracle, c),
    };

    let mut cfg = match RunConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    if let Some(n) = common.n {
        cfg.grid.n_list = vec![n];
        if let Err(e) = cfg.validate() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let out = common.out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));

    match run(&cfg, cmd, Some(&out)) {
        Ok(doc) => {
            for c in &doc.claims {
                let v = match &c.verdict {
                    fracsector::verify::Verdict::Pass => "PASS".to_string(),
                    fracsector::verify::Verdict::Fail => "FAIL".to_string(),
                    fracsector::verify::Verdict::NotApplicable(r) => format!("N/A ({r})"),
                };
                println!("{:<32} {v}", c.id);
            }
            if doc.has_failures() { ExitCode::from(1) } else { ExitCode::SUCCESS }
        }
        Err(e @ (Error::Config(_) | Error::Io { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
