//! `qclab`: command-line driver for quasi-classical limit experiments.
//!
//! Exit codes: 0 when everything ran and every declared check passed, 2 when a
//! check failed, 1 on any execution error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use qclab_core::harness::experiment::{
    limit_trajectory, micro_trajectory, run_configured_heisenberg, run_convergence_experiment, setup_epsilon,
    ExperimentResult, ResultRow,
};
use qclab_core::harness::{output, run_checks, ExperimentConfig};
use qclab_core::micro::{number_moment, save_checkpoint};
use qclab_core::NuRegime;

#[derive(Parser, Debug)]
#[command(name = "qclab", version, about = "Quasi-classical limit experiments for particle-field models")]
struct Cli {
    /// Overrides the seed stored in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV, JSON, SVG and checkpoint output.
    #[arg(long, global = true, default_value = "qclab-out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate the microscopic state at one ε and write moments and checkpoints.
    SimulateMicro {
        config: PathBuf,
        /// Defaults to the smallest ε of the sweep.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Evolve the limit state-valued measure and write it at each time.
    SimulateQc { config: PathBuf },
    /// Run the ε sweep and compare both sides.
    Compare { config: PathBuf },
    /// Heisenberg-picture comparison for the configured symbol.
    Heisenberg { config: PathBuf },
    /// Assumption and invariant checks; exits with 2 when one fails.
    Check { config: PathBuf },
    /// Plot one metric from a results JSON file.
    Plot {
        results: PathBuf,
        #[arg(long, default_value = "qc_distance_total")]
        metric: String,
        /// Defaults to `<out-dir>/<metric>.svg`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the built-in one-dimensional Nelson config.
    Template {
        #[arg(long, value_enum, default_value_t = Regime::Free)]
        regime: Regime,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Regime {
    Constant,
    Free,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn simulate_micro(cfg: &ExperimentConfig, epsilon: Option<f64>, out: &Path) -> Result<()> {
    let eps = epsilon.unwrap_or(*cfg.epsilon_list.last().expect("validated"));
    let setup = setup_epsilon(cfg, eps).context("building the microscopic model")?;
    let traj = micro_trajectory(cfg, &setup).context("microscopic propagation")?;
    std::fs::create_dir_all(out)?;
    let hash = cfg.hash();
    let mut rows = Vec::new();
    for (t, state) in &traj {
        let row = |metric: &str, value: f64| ResultRow { epsilon: eps, t: *t, metric: metric.into(), value };
        rows.push(row("number_moment", number_moment(state, &setup.basis, 1.0)?));
        rows.push(row("norm_defect", state.norm_defect()));
        save_checkpoint(&out.join(format!("micro_eps{eps}_t{t}.ckpt")), state, &hash, eps, *t)?;
    }
    let res = ExperimentResult { name: cfg.name.clone(), config_hash: hash, seed: cfg.seed, rows, warnings: vec![] };
    output::write_csv(&res, &out.join("micro.csv"))?;
    output::write_json(&res, &out.join("micro.json"))?;
    println!("microscopic run at eps = {eps}: Fock dimension {}, {} checkpoints", setup.basis.dim(), traj.len());
    Ok(())
}

fn simulate_qc(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let basis = qclab_core::fock::build_basis(cfg.fock_spec(cfg.epsilon_list[0])?)?;
    let limit = qclab_core::harness::build_initial_state(cfg, &basis)?.limit;
    let traj = limit_trajectory(cfg, &limit).context("evolving the limit measure")?;
    std::fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    for (t, m) in &traj {
        std::fs::write(out.join(format!("measure_t{t}.json")), m.to_json()?)?;
        let row = |metric: &str, value: f64| ResultRow { epsilon: 0.0, t: *t, metric: metric.into(), value };
        rows.push(row("measure_mass", m.total_mass()));
        rows.push(row("norm_moment_1", m.norm_moment(1)));
    }
    let res = ExperimentResult { name: cfg.name.clone(), config_hash: cfg.hash(), seed: cfg.seed, rows, warnings: vec![] };
    output::write_csv(&res, &out.join("qc.csv"))?;
    output::write_json(&res, &out.join("qc.json"))?;
    println!("limit measure with {} atoms written at {} times", limit.len(), traj.len());
    Ok(())
}

fn print_series(res: &ExperimentResult, metric: &str) {
    for t in res.times() {
        let s = res.series(metric, t);
        if s.is_empty() {
            continue;
        }
        let cells: Vec<String> = s.iter().map(|(e, v)| format!("eps={e}: {v:.4e}")).collect();
        println!("{metric} t={t}: {}", cells.join(", "));
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::SimulateMicro { config, epsilon } => simulate_micro(&load(&config, cli.seed)?, epsilon, out)?,
        Command::SimulateQc { config } => simulate_qc(&load(&config, cli.seed)?, out)?,
        Command::Compare { config } => {
            let cfg = load(&config, cli.seed)?;
            let res = run_convergence_experiment(&cfg)
                .with_context(|| format!("convergence experiment (config {})", cfg.hash()))?;
            output::write_all(&res, out, "compare", "qc_distance_total")?;
            print_series(&res, "qc_distance_total");
        }
        Command::Heisenberg { config } => {
            let cfg = load(&config, cli.seed)?;
            let res = run_configured_heisenberg(&cfg)
                .with_context(|| format!("Heisenberg experiment (config {})", cfg.hash()))?;
            for w in &res.warnings {
                eprintln!("warning: {w}");
            }
            output::write_all(&res, out, "heisenberg", "heisenberg_discrepancy")?;
            print_series(&res, "heisenberg_discrepancy");
        }
        Command::Check { config } => {
            let cfg = load(&config, cli.seed)?;
            let (report, res) = run_checks(&cfg).with_context(|| format!("check suite (config {})", cfg.hash()))?;
            std::fs::create_dir_all(out)?;
            std::fs::write(out.join("check.json"), serde_json::to_string_pretty(&report)?)?;
            output::write_all(&res, out, "compare", "qc_distance_total")?;
            for c in &report.checks {
                println!("{}", c.line());
            }
            if !report.all_passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Plot { results, metric, output: target } => {
            let res = output::read_json(&results).with_context(|| format!("reading {}", results.display()))?;
            if !res.rows.iter().any(|r| r.metric == metric) {
                bail!("metric {metric} not present in {}", results.display());
            }
            let target = match target {
                Some(p) => p,
                None => {
                    std::fs::create_dir_all(out)?;
                    out.join(format!("{metric}.svg"))
                }
            };
            output::plot_metric(&res, &metric, &target)?;
            println!("wrote {}", target.display());
        }
        Command::Template { regime } => {
            let r = match regime {
                Regime::Constant => NuRegime::Constant,
                Regime::Free => NuRegime::Free,
            };
            let mut cfg = ExperimentConfig::headline(r);
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            println!("{}", cfg.to_json_pretty()?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
