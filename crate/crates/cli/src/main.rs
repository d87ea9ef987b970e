use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lentpart::configuration::write_configuration;
use lentpart::rng::Jobs;
use lentpart::runner::{self, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "lentpart", version, about = "Lent-particle carré du champ and Poisson chaos experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the seed in the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Artifact directory
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config
    Run { config: PathBuf },
    /// List a registry: models, functionals, gammas, experiments or probes
    List { registry: String },
    /// Write the fixture configurations into the artifact directory
    Fixtures,
}

fn fail(err: RunError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn run(path: &Path, opts: &RunOptions) -> Result<bool, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let outcome = runner::run(&text, base, opts)?;
    print!("{}", outcome.summary);
    for a in &outcome.artifacts {
        println!("wrote {}", a.display());
    }
    Ok(outcome.pass)
}

fn fixtures(out_dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    for (name, cfg) in runner::fixtures() {
        let path = out_dir.join(format!("{name}.txt"));
        let file = fs::File::create(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        write_configuration(&cfg, file)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions { seed: cli.seed, jobs: Jobs(cli.jobs.unwrap_or(0)), out_dir: cli.out_dir.clone() };
    match cli.command {
        Command::Run { config } => match run(&config, &opts) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => fail(e),
        },
        Command::List { registry } => match runner::list(&registry) {
            Ok(table) => {
                print!("{table}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Fixtures => match fixtures(&cli.out_dir) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
    }
}
