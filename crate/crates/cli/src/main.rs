use std::path::PathBuf;
use std::process::ExitCode;

use ahm_core::config::{Command, GrowthSpec, RunConfig};
use ahm_core::run::run;
use clap::{Args, Parser, Subcommand};

/// Numerical checks for almost Hermitian manifolds and almost holomorphic maps.
#[derive(Parser, Debug)]
#[command(name = "ahm", version)]
struct Cli {
    /// JSON run configuration; flags given on the command line override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Leave the timestamp out of the JSON output.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Write the CSV series here (schwarz, hessian-compare).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Finite-difference step.
    #[arg(long, global = true)]
    step: Option<f64>,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Args, Debug, Default)]
struct ManifoldArg {
    /// Catalog name or chart definition file.
    #[arg(long)]
    manifold: Option<String>,
}

#[derive(Args, Debug, Default)]
struct GrowthArgs {
    /// Hand-set growth constants `B,A1,A2` instead of fitted ones.
    #[arg(long, value_delimiter = ',')]
    growth: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Curvature, torsion and growth constants of catalog entries.
    Report(ManifoldArg),
    /// Schwarz inequality for a map between two charts.
    Schwarz {
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        map: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        k1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        k2: Option<f64>,
        #[arg(long)]
        auto_bounds: bool,
    },
    /// Distance Hessian against the comparison bound along seeded rays.
    HessianCompare {
        #[command(flatten)]
        manifold: ManifoldArg,
        #[command(flatten)]
        growth: GrowthArgs,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
    /// Gradient and Hessian certificate for log(1 + r²).
    ExhaustionCertify {
        #[command(flatten)]
        manifold: ManifoldArg,
        #[command(flatten)]
        growth: GrowthArgs,
    },
    /// Identity suite at seeded sample points.
    Verify(ManifoldArg),
}

fn growth_spec(v: Option<Vec<f64>>) -> Result<Option<GrowthSpec>, String> {
    match v.as_deref() {
        None => Ok(None),
        Some(&[b, a1, a2]) => Ok(Some(GrowthSpec {
            b,
            a1,
            a2,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        })),
        Some(_) => Err("--growth takes exactly three values B,A1,A2".into()),
    }
}

fn build_config(cli: Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Some(Sub::Report(m)) => {
            cfg.command = Command::Report;
            cfg.manifold = m.manifold.or(cfg.manifold);
        }
        Some(Sub::Verify(m)) => {
            cfg.command = Command::Verify;
            cfg.manifold = m.manifold.or(cfg.manifold);
        }
        Some(Sub::Schwarz {
            source,
            target,
            map,
            k1,
            k2,
            auto_bounds,
        }) => {
            cfg.command = Command::Schwarz;
            cfg.source = source.or(cfg.source);
            cfg.target = target.or(cfg.target);
            cfg.map = map.or(cfg.map);
            cfg.k1 = k1.or(cfg.k1);
            cfg.k2 = k2.or(cfg.k2);
            cfg.auto_bounds |= auto_bounds;
        }
        Some(Sub::HessianCompare {
            manifold,
            growth,
            radii,
        }) => {
            cfg.command = Command::HessianCompare;
            cfg.manifold = manifold.manifold.or(cfg.manifold);
            cfg.growth = growth_spec(growth.growth)?.or(cfg.growth);
            cfg.radii = radii.or(cfg.radii);
        }
        Some(Sub::ExhaustionCertify { manifold, growth }) => {
            cfg.command = Command::ExhaustionCertify;
            cfg.manifold = manifold.manifold.or(cfg.manifold);
            cfg.growth = growth_spec(growth.growth)?.or(cfg.growth);
        }
        None if cli.config.is_some() => {}
        None => return Err("a subcommand or --config is required".into()),
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.samples {
        cfg.samples = Some(n);
    }
    if let Some(step) = cli.step {
        cfg.step = step;
    }
    cfg.no_timestamp |= cli.no_timestamp;
    cfg.output = cli.output.or(cfg.output);
    cfg.csv = cli.csv.or(cfg.csv);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match build_config(cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            if cfg.output.is_none() {
                print!("{}", outcome.json);
            }
            if !outcome.verdict {
                eprintln!("verdict: fail");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
