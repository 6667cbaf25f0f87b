use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vardiss::cli::{eig_file, load_config, run};
use vardiss::Error;

#[derive(Parser)]
#[command(name = "vardiss", version, about = "Variational dissipation experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Check a config and report every problem found.
    Validate { config: PathBuf },
    /// Exact ground energy of a Pauli-string Hamiltonian file.
    Eig { hamiltonian: PathBuf },
}

fn report(err: &Error) {
    match err {
        Error::Config(problems) => {
            eprintln!("invalid configuration:");
            for p in problems {
                eprintln!("  - {p}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match args.command {
        Command::Validate { config } => load_config(&config).map(|_| {
            println!("{}: ok", config.display());
            ExitCode::SUCCESS
        }),
        Command::Eig { hamiltonian } => eig_file(&hamiltonian).map(|(n, e0)| {
            println!("qubits {n}\nE0 {e0}");
            ExitCode::SUCCESS
        }),
        Command::Run { config } => load_config(&config).and_then(|cfg| run(&cfg)).map(|outcome| {
            for v in &outcome.report.variants {
                let fmt = |x: Option<f64>| x.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
                println!("{}: median final {} gain {}", v.variant, fmt(v.median_final_metric), fmt(v.median_gain));
            }
            if let Some(e0) = outcome.report.e0 {
                println!("E0 {e0}");
            }
            println!("outputs in {}", outcome.output_dir.display());
            if outcome.success() {
                ExitCode::SUCCESS
            } else {
                for e in &outcome.errors {
                    eprintln!("failed {} seed {:?}: {}", e.variant, e.seed, e.message);
                }
                ExitCode::FAILURE
            }
        }),
    };
    result.unwrap_or_else(|e| {
        report(&e);
        ExitCode::from(2)
    })
}
