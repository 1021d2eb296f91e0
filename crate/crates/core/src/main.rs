use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use otoc_qsl::bath::build_kernel;
use otoc_qsl::error::Result;
use otoc_qsl::exact::ChainEvolution;
use otoc_qsl::harness::{
    run_experiment, run_haar_check, run_sweep, write_haar_csv, ExperimentConfig, HaarCheck, SweepParam, SweepSpec,
};
use otoc_qsl::params::{BathMode, CorrelatorMode, ModelSign};

#[derive(Parser)]
#[command(name = "otoc-qsl", version, about = "OTOC speed-limit bounds for the transverse-field Ising chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline for one parameter point.
    Run {
        /// JSON configuration; paper defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep one parameter over a list of values.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Haar Monte Carlo estimate against the exact purity.
    HaarCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        samples: usize,
        /// Comma-separated physical times.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        times: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Bath correlator only.
    Kernel {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: KernelMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelMode {
    Numeric,
    #[value(name = "analytic_afm")]
    AnalyticAfm,
    Nonstationary,
}

fn load(config: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let cfg = load(&config, &out)?;
            let seed = seed.unwrap_or(cfg.params.seed);
            let art = run_experiment(&cfg, seed)?;
            println!("{}", art.series_csv[0].display());
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
            seed,
        } => {
            let mut cfg = load(&config, &out)?;
            cfg.sweep = Some(SweepSpec {
                param: SweepParam::parse(&param)?,
                values,
            });
            cfg.validate()?;
            let seed = seed.unwrap_or(cfg.params.seed);
            let art = run_sweep(&cfg, seed)?;
            if let Some(p) = art.sweep_csv {
                println!("{}", p.display());
            }
        }
        Command::HaarCheck {
            config,
            samples,
            times,
            out,
            seed,
        } => {
            let cfg = load(&config, &out)?;
            let check = HaarCheck {
                n_samples: samples,
                times,
            };
            let mut probe = cfg.clone();
            probe.haar_check = Some(check.clone());
            probe.validate()?;
            let seed = seed.unwrap_or(cfg.params.seed);
            let reports = run_haar_check(&cfg.params, &check, seed)?;
            fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("haar_check.csv");
            let mut buf = Vec::new();
            write_haar_csv(&reports, &mut buf)?;
            fs::write(&path, &buf)?;
            std::io::stdout().write_all(&buf)?;
        }
        Command::Kernel { config, mode, out } => {
            let mut cfg = load(&config, &out)?;
            let p = &mut cfg.params;
            let name = match mode {
                KernelMode::Numeric => {
                    p.correlator_mode = CorrelatorMode::Numeric;
                    p.bath_mode = BathMode::Stationary;
                    "numeric"
                }
                KernelMode::AnalyticAfm => {
                    p.correlator_mode = CorrelatorMode::AnalyticAfm;
                    p.bath_mode = BathMode::Stationary;
                    p.model = ModelSign::Antiferro;
                    "analytic_afm"
                }
                KernelMode::Nonstationary => {
                    p.correlator_mode = CorrelatorMode::Numeric;
                    p.bath_mode = BathMode::Nonstationary;
                    "nonstationary"
                }
            };
            p.validate()?;
            let grid = p.grid()?;
            let evo = match mode {
                KernelMode::Nonstationary => Some(ChainEvolution::new(p)?),
                _ => None,
            };
            let kernel = build_kernel(p, &grid, evo.as_ref())?;
            fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join(format!("kernel_{name}.csv"));
            let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
            kernel.write_csv(&mut w)?;
            w.flush()?;
            info!("kernel decays below 1/e at {:?}", kernel.decay_time((-1.0f64).exp()));
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
