use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shelab_cli::{list_experiments, load_run_file, run, validate, RunOptions};

#[derive(Parser)]
#[command(
    name = "shelab",
    version,
    about = "Simulation and verification lab for the 2D stochastic heat equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a run file and print resource estimates.
    Validate { file: PathBuf },
    /// Execute a run file.
    Run {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Skip jobs whose recorded outputs are intact.
        #[arg(long)]
        resume: bool,
    },
    /// Print experiment ids, descriptions and config keys.
    ListExperiments,
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code.clamp(0, 255) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListExperiments => {
            print!("{}", list_experiments());
            Ok(0)
        }
        Command::Validate { file } => load_run_file(&file).and_then(|f| validate(&f)).map(|jobs| {
            println!("ok");
            for (id, r) in jobs {
                println!("{id}: {:.3e} bytes, {:.4} core-hours", r.bytes, r.core_hours);
            }
            0
        }),
        Command::Run {
            file,
            out,
            threads,
            resume,
        } => load_run_file(&file).and_then(|f| {
            let (m, code) = run(&f, &RunOptions { out, threads, resume })?;
            for j in &m.jobs {
                let err = j.error.as_ref().map(|e| e.message.as_str()).unwrap_or("");
                println!(
                    "{}: {:?}, {} checks passed, {} failed {err}",
                    j.id, j.status, j.checks_passed, j.checks_failed
                );
            }
            Ok(code)
        }),
    };
    match result {
        Ok(code) => exit(code),
        Err(e) => {
            eprintln!("{e}");
            exit(e.code)
        }
    }
}
