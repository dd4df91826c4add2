use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stfv::problems::Preset;
use stfv_cli::run::execute;
use stfv_cli::verify::{verify, Suite, VerifyOptions, DEFAULT_SEED};
use stfv_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "stfv", version, about = "Entropy-stable space-time finite volumes for 1D Euler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Write outputs here instead of the directory named in the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run a seeded randomized certification sweep.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Number of random samples (suite default when omitted).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// List the built-in problems.
    Presets,
}

fn triple(x: &[f64; 3]) -> String {
    format!("[{:.3e}, {:.3e}, {:.3e}]", x[0], x[1], x[2])
}

fn run(config_path: &Path, output_dir: Option<PathBuf>) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out = output_dir.unwrap_or_else(|| config.output_dir(base));
    let outcome = execute(&config, &out)?;
    let s = &outcome.summary;
    println!(
        "{} cells, {} slabs, t = {:.6}, CFL {:.3}",
        s.grid.n_cells, s.grid.n_slabs, s.grid.final_time, s.grid.cfl
    );
    println!(
        "Newton: {} solves, {} iterations (max {}), final residual <= {:.2e}",
        s.newton.solves, s.newton.total_iterations, s.newton.max_iterations, s.newton.max_final_residual
    );
    println!(
        "total U {:.10e} -> {:.10e}, monotone decrease: {}",
        s.entropy.initial_total_u, s.entropy.final_total_u, s.entropy.monotone_decrease
    );
    println!("conservation drift {}", triple(&s.conservation.relative_drift));
    if let Some(n) = &s.error_norms {
        println!("L1 error (rho, u, p) {}", triple(&n.l1));
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output_dir } => run(&config, output_dir),
        Command::Verify {
            suite,
            seed,
            samples,
            inject_fault,
        } => {
            let opts = VerifyOptions {
                seed,
                samples,
                inject_fault,
                ..VerifyOptions::default()
            };
            verify(suite, &opts).and_then(|report| {
                println!("{report}");
                if report.passed() {
                    Ok(())
                } else {
                    Err(CliError::Verification(format!(
                        "{} of suite {} breached tolerance",
                        report.failure_count,
                        suite.name()
                    )))
                }
            })
        }
        Command::Presets => {
            for p in Preset::ALL {
                let s = p.setup();
                println!("{:<14} {:?} boundary, t_final {}", p.name(), s.boundary, s.final_time);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
