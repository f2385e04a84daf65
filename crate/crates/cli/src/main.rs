use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikefield::{preset, study, Error, ExperimentConfig, Result, StudyKind};

#[derive(Parser, Debug)]
#[command(name = "spikefield", version, about = "Mean-field integrate-and-fire simulations and convergence checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate particle trajectories and spike rasters.
    Simulate(Common),
    /// Solve the Fokker-Planck equation.
    Pde(Common),
    /// W1 distance between particle systems and the PDE over a list of N.
    Convergence(Common),
    /// Energy estimates of the mollified empirical densities.
    Energy(Common),
    /// Spike cascades and cross-population delays.
    Spikes(Common),
    /// Compare McKean-Vlasov samples against the PDE marginal.
    MkvCheck(Common),
    /// Mild and weak residuals of the PDE and of particle paths.
    MildCheck(Common),
    /// Strong order of the Euler scheme by path refinement.
    EulerOrder(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "path", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario instead of a file: fig1, fig2, fig3, zero-coupling.
    #[arg(long, value_name = "name")]
    preset: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "dir")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "u64")]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, value_name = "n")]
    threads: Option<usize>,
    /// Also write SVG figures.
    #[arg(long)]
    plot: bool,
}

impl Command {
    fn split(self) -> (StudyKind, Common) {
        match self {
            Command::Simulate(c) => (StudyKind::Trajectories, c),
            Command::Pde(c) => (StudyKind::Pde, c),
            Command::Convergence(c) => (StudyKind::Convergence, c),
            Command::Energy(c) => (StudyKind::Energy, c),
            Command::Spikes(c) => (StudyKind::Spikes, c),
            Command::MkvCheck(c) => (StudyKind::MkvCheck, c),
            Command::MildCheck(c) => (StudyKind::MildCheck, c),
            Command::EulerOrder(c) => (StudyKind::EulerOrder, c),
        }
    }
}

fn load(kind: StudyKind, args: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        _ => return Err(Error::Usage("pass either --config <path> or --preset <name>".into())),
    };
    cfg.study = kind;
    if let Some(dir) = &args.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.plot |= args.plot;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(kind: StudyKind, args: Common) -> Result<study::Report> {
    let cfg = load(kind, &args)?;
    match args.threads {
        Some(0) => Err(Error::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(e.to_string()))?
            .install(|| study::run(&cfg)),
        None => study::run(&cfg),
    }
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    match execute(kind, args) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("spikefield: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
