//! `trapcert`: certify traps, run parameter sweeps and check spectroscopic
//! data from TOML configs.
//!
//! Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 on a
//! configuration or solver error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trapcert::report::{self, RunConfig, RunOutcome};

#[derive(Parser)]
#[command(name = "trapcert", version, about = "Certify variance bounds and sum rules for confining traps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and certify a 1D trap.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Directory for certificate.json and summary.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify every value of a parameter sweep and write a CSV table.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Plot-ready companion table.
        #[arg(long)]
        plot_csv: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long, env = "TRAPCERT_WORKERS")]
        workers: Option<usize>,
    },
    /// Certify a 2D trap in a uniform magnetic field.
    Magnetic {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check measured gaps and a ground density against the sharp bound.
    Spectro {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Number of eigenpairs (overrides the config).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
}

impl Common {
    fn load(&self) -> trapcert::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(k) = self.k {
            cfg.solver.k = k;
            if let Some(setup) = cfg.setup.as_mut() {
                setup.k = k;
            }
        }
        if let Some(r) = self.rtol {
            cfg.solver.rtol = r;
        }
        if let Some(t) = self.tau {
            cfg.solver.tau = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> trapcert::Result<RunOutcome> {
    match cli.command {
        Command::Certify { common, out } => {
            let mut cfg = common.load()?;
            cfg.output.dir = out.or(cfg.output.dir);
            report::run_certify_1d(&cfg)
        }
        Command::Sweep {
            common,
            csv,
            plot_csv,
            workers,
        } => {
            let mut cfg = common.load()?;
            cfg.output.csv = csv.or(cfg.output.csv);
            cfg.output.plot_csv = plot_csv.or(cfg.output.plot_csv);
            report::run_sweep(&cfg, workers)
        }
        Command::Magnetic { common, out } => {
            let mut cfg = common.load()?;
            cfg.output.dir = out.or(cfg.output.dir);
            report::run_certify_2d(&cfg)
        }
        Command::Spectro { common, out } => {
            let mut cfg = common.load()?;
            cfg.output.dir = out.or(cfg.output.dir);
            report::run_spectro(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.all_pass {
                println!("all checks passed");
                ExitCode::SUCCESS
            } else {
                println!("some checks failed");
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
