use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wolff_toolkit::task::{run_task, write_error_file, TaskDocument};

#[derive(Parser)]
#[command(name = "toolkit", version, about = "Wolff-potential and p-Laplace toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a task document and write its output files.
    Run {
        /// Path to the task document.
        task: PathBuf,
        /// Worker thread count (defaults to the number of cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { task, threads } = cli.command;
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("toolkit: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let doc = match TaskDocument::load(&task) {
        Ok(doc) => doc,
        Err(e) => {
            eprintln!("toolkit: {e}");
            return ExitCode::from(e.exit_status() as u8);
        }
    };
    match run_task(&doc) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("toolkit: {e}");
            let status = e.exit_status();
            if status == 3 {
                match write_error_file(&doc, &e) {
                    Ok(p) => eprintln!("toolkit: error report written to {}", p.display()),
                    Err(w) => eprintln!("toolkit: cannot write error report: {w}"),
                }
            }
            ExitCode::from(status as u8)
        }
    }
}
