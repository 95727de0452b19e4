mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};
use commands::Ctx;
use config::Config;
use error::CliError;
use output::Artifacts;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "holomera", version, about = "Bulk excitation energetics of the wavelet MERA")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Configuration override `key=value`; repeatable.
    #[arg(long = "set", global = true)]
    sets: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Network depth `D` (N = 2^D sites).
    #[arg(long = "d", global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground energy, energy density and, for small chains, the ED overlap.
    GsEnergy,
    /// Connected two-point functions of the ground state.
    Correlators,
    /// Scaling spectrum of an ascension superoperator.
    Spectrum {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        variant: Option<String>,
        /// Also extract the coefficient table (k = 5).
        #[arg(long)]
        coefficients: bool,
    },
    /// Single-hologron energies along a radial lineage.
    #[command(name = "hologron-1")]
    Hologron1,
    /// Two-hologron interaction potentials.
    #[command(name = "hologron-2")]
    Hologron2 {
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        ds: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
    },
    /// Radial collapse family and its quality.
    Collapse {
        #[arg(long)]
        dmax: Option<usize>,
    },
    /// Fits of earlier artifacts.
    Fit {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        ell: Option<f64>,
    },
    /// Closed-form AdS3 and BTZ prediction curves.
    AdsPredict,
    /// Noisy gate fidelities and Monte-Carlo noisy radial potentials.
    NoiseSweep {
        #[arg(long)]
        noise: Option<String>,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Engine versus statevector cross-check for small chains.
    VerifyEd {
        #[arg(long)]
        n: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GsEnergy => "gs-energy",
            Command::Correlators => "correlators",
            Command::Spectrum { .. } => "spectrum",
            Command::Hologron1 => "hologron-1",
            Command::Hologron2 { .. } => "hologron-2",
            Command::Collapse { .. } => "collapse",
            Command::Fit { .. } => "fit",
            Command::AdsPredict => "ads-predict",
            Command::NoiseSweep { .. } => "noise-sweep",
            Command::VerifyEd { .. } => "verify-ed",
        }
    }

    /// Flag values as configuration overrides.
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, x: Option<String>| {
            if let Some(x) = x {
                v.push((k, x));
            }
        };
        match self {
            Command::Spectrum { k, variant, coefficients } => {
                put("k", k.map(|x| x.to_string()));
                put("variant", variant.clone());
                put("coefficients", coefficients.then(|| "true".to_string()));
            }
            Command::Hologron2 { mode, ds, s } => {
                put("mode", mode.clone());
                put("ds", ds.map(|x| x.to_string()));
                put("s", s.map(|x| x.to_string()));
            }
            Command::Collapse { dmax } => put("dmax", dmax.map(|x| x.to_string())),
            Command::Fit { model, input, ell } => {
                put("model", model.clone());
                put("input", input.as_ref().map(|p| p.display().to_string()));
                put("ell", ell.map(|x| x.to_string()));
            }
            Command::NoiseSweep { noise, epsilon, samples } => {
                put("noise", noise.clone());
                put("epsilon", epsilon.clone());
                put("samples", samples.map(|x| x.to_string()));
            }
            Command::VerifyEd { n } => put("n", n.map(|x| x.to_string())),
            Command::GsEnergy | Command::Correlators | Command::Hologron1 | Command::AdsPredict => {}
        }
        v
    }
}

fn resolve(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = Config::defaults();
    if let Some(path) = &cli.config {
        cfg.load(path)?;
    }
    for s in &cli.sets {
        cfg.apply_override(s)?;
    }
    if let Some(d) = cli.depth {
        cfg.set("depth", &d.to_string())?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    for (k, v) in cli.command.overrides() {
        cfg.set(k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let cfg = resolve(&cli)?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let name = cli.command.name();
    let hash = cfg.hash(name);
    let seed = cfg.get("seed")?;
    let out = Artifacts::new(&cli.out, name, hash.clone(), seed)?;
    let mut ctx = Ctx { cfg, out };
    let result = match cli.command {
        Command::GsEnergy => commands::gs_energy(&mut ctx),
        Command::Correlators => commands::correlators(&mut ctx),
        Command::Spectrum { .. } => commands::spectrum(&mut ctx),
        Command::Hologron1 => commands::hologron_1(&mut ctx),
        Command::Hologron2 { .. } => commands::hologron_2(&mut ctx),
        Command::Collapse { .. } => commands::collapse(&mut ctx),
        Command::Fit { .. } => commands::fit(&mut ctx),
        Command::AdsPredict => commands::ads_predict(&mut ctx),
        Command::NoiseSweep { .. } => commands::noise_sweep(&mut ctx),
        Command::VerifyEd { .. } => commands::verify_ed(&mut ctx),
    }?;
    let files: Vec<String> = ctx.out.written().iter().map(|p| p.display().to_string()).collect();
    Ok(serde_json::json!({
        "command": name,
        "config": hash,
        "files": files,
        "result": result,
    }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
