use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use chainscope::output::fmt_num;
use chainscope::scenario::{
    analyze_f, output_dir, run_in, sweep, verdict_from_snapshots, RunSummary, Scenario,
};

/// Phase-plane chain census and long-time audits for u_t = u_xx + f(u).
#[derive(Parser)]
#[command(name = "chainscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Census of chains, loops and components only.
    AnalyzeF {
        /// Scenario config file or bundled preset name.
        config: PathBuf,
    },
    /// Solve, audit and emit verdicts.
    Simulate { config: PathBuf },
    /// Audits and verdicts on an existing snapshots.csv.
    Verdict {
        config: PathBuf,
        #[arg(long)]
        snapshots: PathBuf,
    },
    /// Run the scenario once per value of a numeric config field.
    Sweep {
        config: PathBuf,
        /// Dotted config path, e.g. solver.initial.amplitude.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, or start:stop:step.
        #[arg(long)]
        values: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let [start, stop, step] = [parts[0], parts[1], parts[2]].map(|s| s.trim().parse::<f64>());
        let (start, stop, step) = (start?, stop?, step?);
        if !(step > 0.0) || stop < start {
            bail!("range {spec} must have start <= stop and a positive step");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| start + k as f64 * step).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad sweep value {s:?}")))
        .collect()
}

fn load(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading {}", path.display()))
}

fn report(summary: &RunSummary) {
    println!("scenario   {}", summary.name);
    println!("output     {}", summary.dir.display());
    match summary.chain_id {
        Some(c) => println!("verdict    {} (chain {c})", summary.kind),
        None => println!("verdict    {}", summary.kind),
    }
    if let (Some(s), Some(u)) = (summary.settle_metric, summary.ut_metric) {
        println!("settle     {}", fmt_num(s));
        println!("ut         {}", fmt_num(u));
    }
    if let Some(g) = summary.morse_groups {
        println!("groups     {g}");
    }
    println!("final sup  {}", fmt_num(summary.final_sup));
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::AnalyzeF { config } => {
            let sc = load(&config)?;
            let dir = output_dir(&sc);
            let prepared = analyze_f(&sc, &dir).context("census failed")?;
            println!("scenario   {}", sc.name);
            println!("output     {}", dir.display());
            for c in &prepared.census.chains {
                println!(
                    "chain {:>3}  {}  [{}, {}]  energy {}  saddles {:?}",
                    c.id,
                    if c.trivial { "trivial   " } else { "nontrivial" },
                    fmt_num(c.p),
                    fmt_num(c.q),
                    fmt_num(c.energy),
                    c.saddles.iter().map(|s| fmt_num(*s)).collect::<Vec<_>>()
                );
            }
        }
        Command::Simulate { config } => {
            let sc = load(&config)?;
            let dir = output_dir(&sc);
            let summary = run_in(&sc, &dir).with_context(|| format!("scenario {} failed", sc.name))?;
            report(&summary);
        }
        Command::Verdict { config, snapshots } => {
            let sc = load(&config)?;
            let dir = output_dir(&sc);
            let summary = verdict_from_snapshots(&sc, &snapshots, &dir)
                .with_context(|| format!("verdict on {} failed", snapshots.display()))?;
            report(&summary);
        }
        Command::Sweep {
            config,
            axis,
            values,
            workers,
        } => {
            let sc = load(&config)?;
            let values = parse_values(&values)?;
            let root = output_dir(&sc);
            let summary = sweep(&sc, &axis, &values, workers, &root)?;
            println!("{:>6}  {:>14}  {:<26} {:>14}", "index", axis, "kind", "final_sup");
            for r in &summary.rows {
                println!(
                    "{:>6}  {:>14}  {:<26} {:>14}",
                    r.index,
                    fmt_num(r.value),
                    r.kind,
                    r.final_sup.map(fmt_num).unwrap_or_else(|| "-".into())
                );
            }
            match summary.bracket {
                Some((a, b)) => println!("bracket    [{}, {}]", fmt_num(a), fmt_num(b)),
                None => println!("bracket    none (no change of outcome)"),
            }
            println!("output     {}", root.display());
        }
    }
    Ok(())
}
