use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dimerloop_cli::{
    cmd_ed_check, cmd_measure, cmd_mirror, cmd_perimeter_tail, cmd_render, cmd_repair_audit, cmd_sample,
    cmd_series_check, CliError, CliResult, RunConfig,
};

#[derive(Parser)]
#[command(name = "dimerloop", version, about = "Monte Carlo lab for random loop models of quantum spin chains")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Run configuration file (`key = value`, dotted keys or `[section]`s).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    chains: Option<usize>,
    /// Override any configuration key, e.g. `--set model.kappa=0.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long = "L", global = true)]
    l: Option<String>,
    #[arg(long, global = true)]
    u: Option<String>,
    #[arg(long, global = true)]
    beta: Option<String>,
    #[arg(long, global = true)]
    kappa: Option<String>,
    /// torus, primal-rect or dual-rect.
    #[arg(long, global = true)]
    kind: Option<String>,
    #[arg(long, global = true)]
    sweeps: Option<String>,
    #[arg(long, global = true)]
    burnin: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write an NDJSON stream of sampled configurations.
    Sample,
    /// Estimate loop, cluster and order-parameter observables.
    Measure {
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Compare the loop estimator of ⟨Q⟩ with exact diagonalisation.
    EdCheck,
    /// Compare the partition series with the exact trace.
    SeriesCheck,
    /// Run the repair map on every sample and check its guarantees.
    RepairAudit,
    /// Survival table of the boundary-component perimeter (CSV).
    PerimeterTail {
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Black/white order parameter of the mirror model.
    Mirror,
    /// Draw one sample as SVG.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Shade clusters computed with the configured κ.
        #[arg(long)]
        clusters: bool,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::parse_text(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v)?;
    }
    let flags = [
        ("model.n", &cli.n),
        ("lattice.L", &cli.l),
        ("model.u", &cli.u),
        ("lattice.beta", &cli.beta),
        ("model.kappa", &cli.kappa),
        ("lattice.kind", &cli.kind),
        ("mcmc.sweeps", &cli.sweeps),
        ("mcmc.burnin", &cli.burnin),
    ];
    for (key, v) in flags {
        if let Some(v) = v {
            cfg.set(key, v)?;
        }
    }
    if let Some(s) = cli.seed {
        cfg.mcmc.seed = s;
    }
    if let Some(c) = cli.chains {
        cfg.mcmc.chains = c;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let out = cli.out.as_deref();
    match &cli.cmd {
        Cmd::Sample => cmd_sample(&cfg, out),
        Cmd::Measure { input } => cmd_measure(&cfg, input.as_deref(), out),
        Cmd::EdCheck => cmd_ed_check(&cfg, out),
        Cmd::SeriesCheck => cmd_series_check(&cfg, out),
        Cmd::RepairAudit => cmd_repair_audit(&cfg, out),
        Cmd::PerimeterTail { input } => cmd_perimeter_tail(&cfg, input.as_deref(), out),
        Cmd::Mirror => cmd_mirror(&cfg, out),
        Cmd::Render { input, index, clusters } => cmd_render(&cfg, input, *index, *clusters, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
