use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dnls_cli::commands::{cmd_evolve, cmd_probe, cmd_sweep, cmd_transform, describe_model, Which};
use dnls_cli::config::{bundled, RunConfig};
use dnls_cli::validate::{default_config, summary_json, Validator};

/// Scattering diagnostics for the nonlinear Schrödinger equation with a
/// point interaction.
#[derive(Debug, Parser)]
#[command(name = "dnls", version)]
struct Cli {
    /// Run configuration (TOML, or JSON). `bundled:NAME` selects a shipped
    /// configuration.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed (overrides `rng_seed`).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=dnls_cli::config::MAX_SEED))]
    seed: Option<u64>,
    /// Only print errors and the final result.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the acceptance checks; stops at the first failure.
    Validate,
    /// Run the scattering probe and write report, series and snapshots.
    Probe,
    /// Apply a transform to a snapshot file.
    Transform {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// Evolve the initial datum and write the mass/sup-norm series.
    Evolve,
    /// Run a probe for every (p, alpha, sign) cell of the [sweep] section.
    Sweep,
}

fn load_config(spec: Option<&str>) -> Result<Option<RunConfig>> {
    match spec {
        None => Ok(None),
        Some(s) => match s.strip_prefix("bundled:") {
            Some(name) => bundled(name).map(Some),
            None => RunConfig::load(&PathBuf::from(s)).map(Some),
        },
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let loaded = load_config(cli.config.as_deref())?;
    let needs_config = !matches!(cli.command, Command::Validate);
    let mut cfg = match loaded {
        Some(c) => c,
        None if needs_config => anyhow::bail!("--config is required for this subcommand"),
        None => default_config(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if let Some(out) = &cli.output {
        cfg.output_dir = out.clone();
    }
    let out_dir = cfg.output_dir.clone();
    let quiet = cli.quiet;
    match cli.command {
        Command::Validate => {
            let v = Validator::new(cfg.rng_seed, &out_dir.join("validate"));
            let results = v.run_all(true, |r| {
                if !quiet {
                    println!("{}", r.line());
                }
            });
            let summary = summary_json(&results);
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join("validate.json"), serde_json::to_string_pretty(&summary)?)?;
            println!("{}", serde_json::to_string(&summary)?);
            Ok(summary["passed"].as_bool().unwrap_or(false))
        }
        Command::Probe => {
            if !quiet {
                println!("{}", describe_model(&cfg)?);
            }
            let s = cmd_probe(&cfg, &out_dir)?;
            if !quiet {
                let r = &s.report;
                println!(
                    "b = {:.4e} ± {:.1e} (r² = {:.4}), C tail mean = {:.3e}, tail variation = {:.3e}, FTC mismatch = {:.2e}",
                    r.fit_log.b, r.fit_log.sigma_b, r.fit_log.r2, r.fit_const.mean, r.tail_variation, r.ftc_max_relative
                );
                for d in &r.diagnostics {
                    println!("diagnostic: {d}");
                }
                println!("report: {}", s.report_path.display());
            }
            println!("verdict: {}", s.verdict());
            Ok(true)
        }
        Command::Transform { input, which } => {
            let output = out_dir.join(format!("{}.bin", which_name(which)));
            let s = cmd_transform(&cfg, &input, which, &output)?;
            println!(
                "{}: |in| = {:.6e}, |out| = {:.6e} -> {}",
                which_name(which),
                s.norm_in,
                s.norm_out,
                output.display()
            );
            Ok(true)
        }
        Command::Evolve => {
            let s = cmd_evolve(&cfg, &out_dir)?;
            println!(
                "t = {} after {} steps: mass drift {:.2e}, sup norm {:.4e}",
                s.t_end, s.steps, s.max_mass_drift, s.final_sup_norm
            );
            Ok(true)
        }
        Command::Sweep => {
            let cells = cmd_sweep(&cfg, &out_dir)?;
            for c in &cells {
                let v = c
                    .verdict
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| format!("error: {}", c.error.as_deref().unwrap_or("?")));
                if !quiet {
                    println!("p = {}, alpha = {}, {:?}: {v}", c.p, c.alpha, c.sign);
                }
            }
            println!("index: {}", out_dir.join("index.json").display());
            Ok(cells.iter().all(|c| c.error.is_none()))
        }
    }
}

fn which_name(w: Which) -> &'static str {
    match w {
        Which::Fourier => "fourier",
        Which::Genft => "genft",
        Which::GenftAdjoint => "genft_adjoint",
        Which::Waveop => "waveop",
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
