//! Command-line front end: loads a JSON scenario, then computes contact
//! windows, classifies connectivity, or sweeps federated-learning
//! simulations over strategies and seeds.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use leofl_core::{
    run, write_gantt_csv, write_metrics_csv, write_trace_csv, write_windows_csv, RunManifest,
    Scenario, ScenarioConfig, Strategy,
};

#[derive(Parser)]
#[command(
    name = "leofl",
    version,
    about = "Deterministic simulator for federated learning in LEO constellations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute contact windows; writes windows.csv and gantt.csv.
    Contacts(ContactsCmd),
    /// Classify scenario connectivity; prints a JSON report to stdout.
    Classify(ClassifyCmd),
    /// Simulate federated learning over strategies and seeds.
    Simulate(SimulateCmd),
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the simulation horizon in seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the visibility sampling step in seconds.
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct ContactsCmd {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyCmd {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SimulateCmd {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for metrics, traces, manifests, and summary.csv.
    #[arg(long)]
    out: PathBuf,
    /// Seed override for a single run.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds for a sweep.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Comma-separated strategy names; defaults to the scenario's list.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<Strategy>,
    /// Parallel workers for the sweep; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

type CmdResult = Result<(), Failure>;

fn config_err(e: impl Display) -> Failure {
    Failure {
        code: 1,
        msg: e.to_string(),
    }
}

fn runtime_err(e: impl Display) -> Failure {
    Failure {
        code: 2,
        msg: e.to_string(),
    }
}

impl ConfigArgs {
    fn load(&self) -> Result<ScenarioConfig, Failure> {
        let mut cfg = ScenarioConfig::from_path(&self.config).map_err(config_err)?;
        if let Some(h) = self.horizon {
            cfg.horizon_s = h;
        }
        if let Some(s) = self.step {
            cfg.step_s = s;
        }
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    // Die quietly when the reader of a pipe goes away (e.g. piping into
    // `head`), as terminal tools conventionally do, instead of panicking on
    // the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Contacts(c) => cmd_contacts(c),
        Cmd::Classify(c) => cmd_classify(c),
        Cmd::Simulate(c) => cmd_simulate(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn assemble(cfg: ScenarioConfig) -> Result<Scenario, Failure> {
    let sc = Scenario::assemble(cfg).map_err(config_err)?;
    for w in &sc.warnings {
        eprintln!("warning: {w}");
    }
    Ok(sc)
}

fn cmd_contacts(c: ContactsCmd) -> CmdResult {
    let sc = assemble(c.config.load()?)?;
    fs::create_dir_all(&c.out).map_err(runtime_err)?;

    let windows_path = c.out.join("windows.csv");
    let file = fs::File::create(&windows_path).map_err(runtime_err)?;
    write_windows_csv(&sc.graph.windows, file).map_err(runtime_err)?;

    let rows = sc.gantt_rows();
    let gantt_path = c.out.join("gantt.csv");
    let file = fs::File::create(&gantt_path).map_err(runtime_err)?;
    write_gantt_csv(&rows, file).map_err(runtime_err)?;

    println!(
        "wrote {} windows to {} and {} rows to {}",
        sc.graph.windows.len(),
        windows_path.display(),
        rows.len(),
        gantt_path.display()
    );
    Ok(())
}

fn cmd_classify(c: ClassifyCmd) -> CmdResult {
    let sc = assemble(c.config.load()?)?;
    let report = sc.classify().map_err(runtime_err)?;
    let json = serde_json::to_string_pretty(&report).map_err(runtime_err)?;
    println!("{json}");
    Ok(())
}

/// One line of summary.csv.
struct SummaryRow {
    strategy: Strategy,
    seed: u64,
    time_to_target_s: Option<f64>,
    final_version: u64,
    final_loss: f64,
    final_accuracy: f64,
    bits_gs: u64,
    bits_ring: u64,
    bits_ps: u64,
    ps_msgs: u64,
}

fn cmd_simulate(c: SimulateCmd) -> CmdResult {
    let cfg = c.config.load()?;
    let seeds: Vec<u64> = if !c.seeds.is_empty() {
        c.seeds.clone()
    } else if let Some(s) = c.seed {
        vec![s]
    } else {
        vec![cfg.seed]
    };
    let requested: Vec<Strategy> = if !c.strategies.is_empty() {
        c.strategies.clone()
    } else {
        cfg.effective_strategies()
    };

    let mut runnable = Vec::new();
    for s in requested {
        match cfg.check_strategy(s) {
            Ok(()) => runnable.push(s),
            Err(e) => eprintln!("skipping {s}: {e}"),
        }
    }
    if runnable.is_empty() {
        return Err(config_err("no runnable strategy for this scenario"));
    }

    let target = cfg.target_accuracy;
    let sc = assemble(cfg)?;
    fs::create_dir_all(&c.out).map_err(runtime_err)?;

    let jobs: Vec<(Strategy, u64)> = runnable
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.jobs.unwrap_or(0))
        .build()
        .map_err(runtime_err)?;
    let results: Vec<Result<SummaryRow, Failure>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(strategy, seed)| run_one(&sc, strategy, seed, target, &c.out))
            .collect()
    });

    let mut rows = Vec::new();
    for r in results {
        rows.push(r?);
    }
    rows.sort_by(|a, b| {
        a.strategy
            .name()
            .cmp(b.strategy.name())
            .then(a.seed.cmp(&b.seed))
    });

    let summary_path = c.out.join("summary.csv");
    let file = fs::File::create(&summary_path).map_err(runtime_err)?;
    write_summary_csv(&rows, target, file).map_err(runtime_err)?;

    for r in &rows {
        match r.time_to_target_s {
            Some(t) => println!(
                "{} seed {}: accuracy {target} sustained from {t} s (final acc {:.4})",
                r.strategy, r.seed, r.final_accuracy
            ),
            None => println!(
                "{} seed {}: accuracy {target} not sustained (final acc {:.4})",
                r.strategy, r.seed, r.final_accuracy
            ),
        }
    }
    println!("wrote {}", summary_path.display());
    Ok(())
}

fn run_one(
    sc: &Scenario,
    strategy: Strategy,
    seed: u64,
    target: f64,
    out: &Path,
) -> Result<SummaryRow, Failure> {
    let output = run(sc, strategy, seed).map_err(runtime_err)?;
    let stem = format!("{}_seed{}", strategy.name(), seed);

    let file = fs::File::create(out.join(format!("{stem}_metrics.csv"))).map_err(runtime_err)?;
    write_metrics_csv(&output.metrics, file).map_err(runtime_err)?;
    let file = fs::File::create(out.join(format!("{stem}_trace.csv"))).map_err(runtime_err)?;
    write_trace_csv(&output.trace, file).map_err(runtime_err)?;
    let manifest = RunManifest::new(&sc.config, strategy, seed);
    let file = fs::File::create(out.join(format!("{stem}_manifest.json"))).map_err(runtime_err)?;
    serde_json::to_writer_pretty(file, &manifest).map_err(runtime_err)?;

    let last = output.metrics.last();
    Ok(SummaryRow {
        strategy,
        seed,
        time_to_target_s: output.time_to_target(target, sc.config.target_hold_s),
        final_version: last.map_or(0, |r| r.version),
        final_loss: last.map_or(f64::NAN, |r| r.loss),
        final_accuracy: last.map_or(f64::NAN, |r| r.accuracy),
        bits_gs: output.summary.bits_gs,
        bits_ring: output.summary.bits_ring,
        bits_ps: output.summary.bits_ps,
        ps_msgs: output.summary.ps_msgs,
    })
}

fn write_summary_csv(
    rows: &[SummaryRow],
    target: f64,
    out: impl std::io::Write,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "strategy",
        "seed",
        "target_accuracy",
        "time_to_target_s",
        "final_version",
        "final_loss",
        "final_accuracy",
        "bits_gs",
        "bits_ring",
        "bits_ps",
        "ps_msgs",
    ])?;
    for r in rows {
        w.write_record([
            r.strategy.name().to_string(),
            r.seed.to_string(),
            target.to_string(),
            r.time_to_target_s
                .map(|t| t.to_string())
                .unwrap_or_default(),
            r.final_version.to_string(),
            r.final_loss.to_string(),
            r.final_accuracy.to_string(),
            r.bits_gs.to_string(),
            r.bits_ring.to_string(),
            r.bits_ps.to_string(),
            r.ps_msgs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
