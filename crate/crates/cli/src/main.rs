use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use efimov_core::config::{validate_config, RunConfig};
use efimov_core::pipeline::{run_calibrate, run_density, run_radii, run_scan, run_twobody, OutputFile};
use efimov_core::Error;

/// Three-body bound states of two heavy and one light particle in continuous dimension.
#[derive(Parser)]
#[command(name = "efimov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `run.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads, overriding `run.workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Three-body level for radii and densities, 0 for the ground state.
    #[arg(long, global = true)]
    state: Option<usize>,

    /// Jacobi set for radii and densities.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    set: Option<u8>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the Gaussian depth to the target critical dimension.
    Calibrate,
    /// Three-body spectrum and radii over the dimension scan.
    Scan,
    /// Radii tables alone.
    Radii,
    /// Density grids for each dimension and set.
    Density,
    /// Heavy-light bound states over the dimension scan.
    Twobody,
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config {
            key: "--config".into(),
            msg: "a configuration file is required".into(),
        })?;
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = validate_config(&text)?;
    if let Some(out) = &cli.out {
        cfg.run.out = out.display().to_string();
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(k) = cli.state {
        cfg.observables.state = k;
        cfg.observables.levels = cfg.observables.levels.max(k + 1);
    }
    if let Some(set) = cli.set {
        cfg.observables.sets = vec![set as usize];
    }
    // Overrides go through the same checks as the file.
    validate_config(&cfg.to_text())
}

fn write_all(dir: &Path, files: &[OutputFile]) -> Result<(), Error> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io(&path))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load(cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build_global()
        .map_err(|e| Error::Config {
            key: "run.workers".into(),
            msg: e.to_string(),
        })?;
    let files = match cli.command {
        Command::Calibrate => vec![run_calibrate(&cfg)?],
        Command::Scan => run_scan(&cfg)?,
        Command::Radii => run_radii(&cfg)?,
        Command::Density => run_density(&cfg)?,
        Command::Twobody => vec![run_twobody(&cfg)?],
    };
    write_all(Path::new(&cfg.run.out), &files)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Domain(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
