use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use carbon_fbsde::{exit, run, write_outcome, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "carbon-fbsde", version, about = "Run allowance-price experiments and write CSV tables")]
struct Cli {
    /// Print the available experiments and exit.
    #[arg(long, global = true)]
    list_experiments: bool,
    /// Worker threads for parallel solves and path batches.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a `key = value` configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    if cli.list_experiments {
        for e in Experiment::ALL {
            println!("{:<18} {}", e.name(), e.description());
        }
        return ExitCode::from(exit::OK);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(exit::USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(exit::USAGE);
        }
    }
    let Some(Command::Run { config, output_dir, seed }) = cli.command else {
        eprintln!("error: nothing to do; use `run <config>` or `--list-experiments`");
        return ExitCode::from(exit::USAGE);
    };
    let mut cfg = match ExperimentConfig::read(&config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit::USAGE);
        }
    };
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }

    let start = Instant::now();
    let outcome = match run(&cfg).and_then(|o| write_outcome(&cfg, &o).map(|files| (o, files))) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let (outcome, files) = outcome;
    for f in &files {
        println!("wrote {}", f.display());
    }
    for c in &outcome.checks {
        println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{} finished in {:.2} s", cfg.experiment, start.elapsed().as_secs_f64());
    let failed = outcome.failed();
    if failed.is_empty() {
        ExitCode::from(exit::OK)
    } else {
        let names: Vec<&str> = failed.iter().map(|c| c.name).collect();
        eprintln!("failed checks: {}", names.join(", "));
        ExitCode::from(exit::CHECK_FAILED)
    }
}
