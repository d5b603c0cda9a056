use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crowdmine::adversary::{
    run_short_term_51, run_solution_steal, AttackPlan, DoubleSpendParams, FeeGrabParams, RaceSetup, ShortTermMode,
    ShortTermParams,
};
use crowdmine::harness::{
    report, run_experiment, verify_chain, write_report, ExperimentConfig, HarnessError, RunSeries,
};
use crowdmine::ledger::{Amount, Difficulty, Ratio};

#[derive(Parser)]
#[command(name = "crowdmine", version, about = "CrowdMine simulator and experiment harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write metrics, the chain dump and the block store.
    Run(RunArgs),
    /// Aggregate finished runs into summary tables and plot-ready CSVs.
    Report {
        /// Run output directories (each holding series.json).
        runs: Vec<PathBuf>,
        #[arg(long, env = "CROWDMINE_OUT", default_value = "out/report")]
        out: PathBuf,
    },
    /// Replay a chain dump through full validation.
    Verify {
        /// A run directory or a chain.jsonl file.
        path: PathBuf,
        /// Experiment config; defaults to config.json next to the dump.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run an attack scenario.
    Attack(AttackArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    problem_rate: Option<f64>,
    #[arg(long)]
    tx_rate: Option<f64>,
    #[arg(long)]
    burn_ratio: Option<f64>,
    /// PoCW difficulty as a per-unit probability or 0x-prefixed threshold.
    #[arg(long)]
    difficulty: Option<String>,
    #[arg(long)]
    tmin: Option<u64>,
    #[arg(long)]
    tmax: Option<u64>,
    #[arg(long)]
    tsearch: Option<u64>,
    /// Minimum portion for the lowest reward level.
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long)]
    trace: bool,
    #[arg(long, env = "CROWDMINE_OUT", default_value = "out/run")]
    out: PathBuf,
    /// JSON config; its fields override the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackKindArg {
    DoubleSpend,
    FeeGrab,
    Steal,
    ShortTerm,
}

#[derive(Args)]
struct AttackArgs {
    /// A serialized attack plan; other flags are ignored when given.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "double-spend")]
    kind: AttackKindArg,
    #[arg(long, default_value_t = 0.05)]
    burn_ratio: f64,
    /// Value of the transfer to revert.
    #[arg(long, default_value_t = 1000)]
    value: u64,
    /// Reward of the honest block carrying the target.
    #[arg(long, default_value_t = 100_000)]
    reward: u64,
    /// Reward of the attacker's own problem.
    #[arg(long, default_value_t = 30_000)]
    attacker_reward: u64,
    #[arg(long, default_value_t = 5)]
    tmin: u64,
    /// Attacker share of total power for solution stealing.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    #[arg(long, default_value_t = 3)]
    boost: u64,
    #[arg(long, default_value_t = 50)]
    duration: u64,
    #[arg(long, default_value_t = 3)]
    depth: u64,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cmd {
        Cmd::Run(a) => run(a),
        Cmd::Report { runs, out } => {
            let series = runs
                .iter()
                .map(|d| -> Result<RunSeries, Box<dyn std::error::Error>> {
                    let text = std::fs::read_to_string(d.join("series.json")).map_err(|e| format!("{}: {e}", d.display()))?;
                    Ok(serde_json::from_str(&text)?)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let r = report(&series)?;
            write_report(&out, &r, &series)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { path, config } => verify(&path, config.as_deref()),
        Cmd::Attack(a) => attack(a),
    }
}

fn run(a: RunArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::default();
    if let Some(v) = a.nodes {
        cfg.nodes = v;
    }
    if let Some(v) = a.problem_rate {
        cfg.workload.problem_rate = v;
    }
    if let Some(v) = a.tx_rate {
        cfg.workload.tx_rate = v;
    }
    if let Some(v) = a.burn_ratio {
        cfg.chain.burn_ratio = Ratio::from_f64(v);
    }
    if let Some(v) = &a.difficulty {
        cfg.chain.pocw_difficulty = Difficulty::parse(v)?;
    }
    if let Some(v) = a.tmin {
        cfg.chain.t_min = v;
    }
    if let Some(v) = a.tmax {
        cfg.chain.t_max = v;
    }
    if let Some(v) = a.tsearch {
        cfg.chain.t_search_default = v;
    }
    if let Some(v) = a.xi {
        cfg.chain.min_portion = Ratio::from_f64(v);
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.ticks {
        cfg.ticks = v;
    }
    cfg.trace |= a.trace;
    cfg.out = Some(a.out);
    if let Some(p) = &a.config {
        let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        let overlay: serde_json::Value = serde_json::from_str(&text)?;
        cfg = cfg.overlay(&overlay)?;
    }
    let out = run_experiment(&cfg)?;
    let s = &out.series;
    let mean = |f: fn(&crowdmine::harness::MetricsSample) -> f64| s.rows.iter().map(f).sum::<f64>() / s.rows.len().max(1) as f64;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "ticks": s.ticks,
            "height": s.stats.main_height,
            "block_rate": mean(|r| r.block_rate),
            "problem_rate": mean(|r| r.problem_rate),
            "tx_rate": mean(|r| r.tx_rate),
            "utilization": mean(|r| r.utilization),
            "final_supply": s.rows.last().map(|r| r.supply),
            "checks": s.stats.checks,
            "violations": out.violations.len(),
            "out": cfg.out,
        }))?
    );
    match out.check() {
        Ok(()) => Ok(ExitCode::SUCCESS),
        Err(e @ HarnessError::InvariantViolation { .. }) => {
            eprintln!("{e}");
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e.into()),
    }
}

fn verify(path: &Path, config: Option<&Path>) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let (dump, dir) = if path.is_dir() {
        (path.join("chain.jsonl"), path.to_path_buf())
    } else {
        (path.to_path_buf(), path.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let cfg_path = config.map(Path::to_path_buf).unwrap_or_else(|| dir.join("config.json"));
    let cfg = ExperimentConfig::load(&cfg_path)?;
    match verify_chain(&dump, &cfg.chain) {
        Ok(r) => {
            let st = r.final_state();
            println!(
                "{}",
                json!({"ok": true, "height": r.height, "tip": r.tip, "supply": st.total_supply(), "conservation_gap": st.conservation_gap()})
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            println!("{}", json!({"ok": false, "error": e.to_string()}));
            Ok(ExitCode::from(1))
        }
    }
}

fn attack(a: AttackArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if let Some(p) = &a.plan {
        let plan: AttackPlan = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        println!("{}", serde_json::to_string_pretty(&plan.run()?)?);
        return Ok(ExitCode::SUCCESS);
    }
    let k = Ratio::from_f64(a.burn_ratio);
    let setup = RaceSetup::default();
    match a.kind {
        AttackKindArg::DoubleSpend => {
            let plan = AttackPlan::DoubleSpend(DoubleSpendParams {
                k,
                v_tx: Amount(a.value),
                r_problem: Amount(a.reward),
                r_attacker: Amount(a.attacker_reward),
                conflict_amount: Amount(0),
                seed: a.seed,
            });
            println!("{}", serde_json::to_string_pretty(&plan.run()?)?);
        }
        AttackKindArg::FeeGrab => {
            let plan = AttackPlan::FeeGrab(FeeGrabParams {
                k,
                r_attacker: Amount(a.attacker_reward),
                // Fee equal to amount: the most a transfer can hand the block's miner.
                transfers: vec![(Amount(a.value), Amount(a.value))],
                seed: a.seed,
            });
            println!("{}", serde_json::to_string_pretty(&plan.run()?)?);
        }
        AttackKindArg::Steal => {
            let (stats, _) = run_solution_steal(&setup, a.tmin, a.alpha, a.trials, a.seed)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        AttackKindArg::ShortTerm => {
            let mut setup = setup;
            setup.chain.burn_ratio = k;
            let params = ShortTermParams {
                mode: ShortTermMode::CrowdMine,
                attacker_power: 40,
                boost: a.boost,
                duration: a.duration,
                depth: a.depth,
                value: Amount(a.value),
            };
            let (stats, _) = run_short_term_51(&setup, &params, a.trials, a.seed)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
