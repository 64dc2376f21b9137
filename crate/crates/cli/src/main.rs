use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use natmaplab::{report, run, Experiment};

#[derive(Parser)]
#[command(name = "natmaplab", version, about = "Run and report natmaplab experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run { config: PathBuf },
    /// Consolidate every result.json under a directory.
    Report { dir: PathBuf },
    /// Print the experiment names.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => match run::run(&config) {
            Ok(out) => {
                for r in &out.result.rows {
                    let measured = r.measured.map_or_else(|| "NA".into(), |m| format!("{m:.6e}"));
                    let status = if r.pass { "pass" } else { "FAIL" };
                    println!("{status}  {}  {measured} (bound {:.6e})", r.name, r.bound);
                    if let Some(e) = &r.error {
                        println!("      error: {e}");
                    }
                }
                println!(
                    "{}: {:?} in {:.1} s -> {}",
                    out.result.experiment,
                    out.result.verdict,
                    out.elapsed.as_secs_f64(),
                    out.dir.display()
                );
                out.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Report { dir } => match report::report(&dir) {
            Ok(rep) => {
                print!("{}", rep.to_table());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<20} {}", e.name(), e.describe());
            }
            0
        }
    };
    ExitCode::from(code as u8)
}
