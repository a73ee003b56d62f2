use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rsma_core::channel::sample_scenario;
use rsma_core::seed::{splitmix64, trial_seed};
use rsma_core::solver::{solve_with_clock, SolveOptions};
use rsma_sim::bench::run_benchmark;
use rsma_sim::check::run_checks;
use rsma_sim::config::{label, parse_override, resolve, Access, Antenna, ModeSpec, Ris, RunConfig, SweepKind};
use rsma_sim::experiment::{means, num, run_experiment};
use rsma_sim::InstantClock;
use toml::Value;

#[derive(Parser)]
#[command(name = "rsma-sim", version, about = "Sum-rate sweeps for RSMA with movable antennas and a RIS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single trial and print its rates.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run a Monte Carlo sweep and write summary.csv, traces and manifest.toml.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        sweep: Option<SweepArg>,
    },
    /// Time the antenna-position gradient over array and user sizes.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Timing budget per (M, K) pair, milliseconds.
        #[arg(long, default_value_t = 200)]
        budget_ms: u64,
    },
    /// Check solver invariants on random instances.
    Check {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 20)]
        instances: u64,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Restrict to one access scheme.
    #[arg(long, value_enum)]
    mode: Option<AccessArg>,
    #[arg(long, value_enum)]
    antenna: Option<AntennaArg>,
    #[arg(long, value_enum)]
    ris: Option<RisArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set system.antennas=16`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Record wall time per solve.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Power,
    Users,
    Convergence,
    Benchmark,
}

#[derive(Clone, Copy, ValueEnum)]
enum AccessArg {
    Rsma,
    Sdma,
}

#[derive(Clone, Copy, ValueEnum)]
enum AntennaArg {
    Ma,
    Fpa,
}

#[derive(Clone, Copy, ValueEnum)]
enum RisArg {
    Optimized,
    Random,
    None,
}

impl CommonArgs {
    fn resolve(&self, sweep: Option<SweepArg>) -> Result<RunConfig> {
        let mut overrides = Vec::new();
        if let Some(s) = sweep {
            let kind = match s {
                SweepArg::Power => SweepKind::Power,
                SweepArg::Users => SweepKind::Users,
                SweepArg::Convergence => SweepKind::Convergence,
                SweepArg::Benchmark => SweepKind::Benchmark,
            };
            overrides.push(("experiment.sweep".to_string(), Value::String(label(kind))));
        }
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed).context("--seed must fit in a signed 64-bit integer")?;
            overrides.push(("system.seed".to_string(), Value::Integer(seed)));
        }
        if let Some(t) = self.trials {
            overrides.push(("experiment.trials".to_string(), Value::Integer(t as i64)));
        }
        if let Some(out) = &self.out {
            overrides.push(("experiment.out".to_string(), Value::String(out.display().to_string())));
        }
        if self.timing {
            overrides.push(("experiment.timing".to_string(), Value::Boolean(true)));
        }
        for raw in &self.set {
            overrides.push(parse_override(raw)?);
        }
        let mut cfg = resolve(self.config.as_deref(), &overrides)?;
        self.filter_modes(&mut cfg)?;
        Ok(cfg)
    }

    /// Keeps the configured modes matching the mode flags. When no
    /// configured mode matches, the flags define the single mode, with
    /// RSMA, movable antennas and an optimized RIS filling the gaps.
    fn filter_modes(&self, cfg: &mut RunConfig) -> Result<()> {
        if self.mode.is_none() && self.antenna.is_none() && self.ris.is_none() {
            return Ok(());
        }
        let access = self.mode.map(|m| match m {
            AccessArg::Rsma => Access::Rsma,
            AccessArg::Sdma => Access::Sdma,
        });
        let antenna = self.antenna.map(|a| match a {
            AntennaArg::Ma => Antenna::Ma,
            AntennaArg::Fpa => Antenna::Fpa,
        });
        let ris = self.ris.map(|r| match r {
            RisArg::Optimized => Ris::Optimized,
            RisArg::Random => Ris::Random,
            RisArg::None => Ris::None,
        });
        let keep = |m: &ModeSpec| {
            access.map_or(true, |a| a == m.access) && antenna.map_or(true, |a| a == m.antenna) && ris.map_or(true, |r| r == m.ris)
        };
        cfg.experiment.modes.retain(keep);
        if cfg.experiment.modes.is_empty() {
            cfg.experiment.modes.push(ModeSpec {
                access: access.unwrap_or(Access::Rsma),
                antenna: antenna.unwrap_or(Antenna::Ma),
                ris: ris.unwrap_or(Ris::Optimized),
            });
        }
        Ok(())
    }
}

fn solve_one(cfg: &RunConfig, trial: usize) -> Result<()> {
    let value = *cfg.experiment.sweep_values().first().context("no sweep values")?;
    let seed = trial_seed(cfg.system.seed, trial as u64);
    let system = rsma_core::config::SystemConfig { seed, ..cfg.system_at(value)? };
    let real = sample_scenario(&system)?;
    println!("trial {trial} seed {seed} sweep_param {value}");
    for &mode in &cfg.experiment.modes {
        let (access, antenna, ris) = mode.solver_modes();
        let opts = SolveOptions {
            mode: access,
            antenna,
            ris,
            r_max: cfg.experiment.r_max,
            eps_outer: cfg.experiment.eps_outer,
            phase_seed: splitmix64(seed),
            ..SolveOptions::default()
        };
        let res = solve_with_clock(&system, &real, &opts, &InstantClock::default())?;
        println!(
            "{mode}: sum_rate {} bits/s/Hz, {} iterations, converged {}",
            num(res.report.sum_rate),
            res.iterations,
            res.converged
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { common, trial } => solve_one(&common.resolve(None)?, trial),
        Command::Sweep { common, sweep } => {
            let cfg = common.resolve(sweep)?;
            if cfg.experiment.sweep == SweepKind::Benchmark {
                bail!("benchmark sweeps are run with the `bench` subcommand");
            }
            let records = run_experiment(&cfg)?;
            for (value, mode, mean) in means(&records) {
                println!("{value} {mode} {mean:.4}");
            }
            println!("wrote {}", cfg.experiment.out.display());
            Ok(())
        }
        Command::Bench { common, budget_ms } => {
            let cfg = common.resolve(Some(SweepArg::Benchmark))?;
            let report = run_benchmark(&cfg.system.to_system()?, Duration::from_millis(budget_ms))?;
            print!("{report}");
            let out = &cfg.experiment.out;
            std::fs::create_dir_all(out).with_context(|| out.display().to_string())?;
            let path = out.join("bench.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["antennas", "users", "gradient_us"])?;
            for r in &report.rows {
                w.write_record([r.antennas.to_string(), r.users.to_string(), num(r.micros)])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Check { common, instances } => {
            let cfg = common.resolve(None)?;
            let results = run_checks(&cfg.system.to_system()?, instances)?;
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                bail!("{failed} check(s) failed");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
