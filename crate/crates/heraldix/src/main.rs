//! Scenario runner for the heralded-CNOT simulator: truth tables under
//! configurable imperfections, heralding-efficiency sweeps, and a full
//! report checking every shipped reference value.

mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use heraldix_core::devices::{DetectorKind, DetectorModel};
use heraldix_core::fidelity::{hofmann_f1, simulate_tomography, FidelityError, Protocol};
use heraldix_core::herald::{herald_budget_bruteforce, p2_terms_closed_form};
use heraldix_core::network::heralded_cnot_network;
use heraldix_core::scalar::format_significant;

use scenario::{load_scenario, resolve_detector, DetectorSpec, Scenario};

#[derive(Parser)]
#[command(
    name = "heraldix",
    about = "Exact few-photon simulator for a heralded linear-optics CNOT gate",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
struct CommonArgs {
    /// Scenario file (JSON). Defaults to ideal sources and detectors with a
    /// `plusH` input.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Write machine-readable results here.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Format of the --out file.
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,

    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,

    /// Override every documented tolerance (reproduce-paper only).
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the heralded truth table under the scenario's imperfections.
    /// With ideal parameters the table is asserted exact.
    TruthTable {
        #[command(flatten)]
        common: CommonArgs,
    },

    /// Sweep the heralding efficiency over source efficiencies, comparing
    /// the exhaustive simulation against the closed form.
    HeraldSweep {
        #[command(flatten)]
        common: CommonArgs,

        /// Grid of source efficiencies: comma list (`0.1,0.2`) or
        /// `start:stop:count`.
        #[arg(long)]
        etas: String,

        /// Detector kind (`ideal`, `pseudo`, `standard`,
        /// `standard_physical`); all three families when omitted.
        #[arg(long)]
        detector: Option<String>,

        /// Element efficiency for lossy detectors.
        #[arg(long, default_value_t = 0.8)]
        eta_d: f64,

        /// Element count of the multiplexed detector.
        #[arg(long, default_value_t = 4)]
        k: u32,
    },

    /// Recompute every shipped reference value and print a pass/fail line
    /// per item; exits nonzero if any item fails.
    ReproducePaper {
        #[command(flatten)]
        common: CommonArgs,
    },

    /// Dump the demultiplexer routing table for one switching cycle as CSV.
    DemuxSchedule {
        #[command(flatten)]
        common: CommonArgs,
    },
}

enum Outcome {
    Pass,
    AssertionFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::AssertionFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::TruthTable { common } => truth_table(&common),
        Command::HeraldSweep {
            common,
            etas,
            detector,
            eta_d,
            k,
        } => herald_sweep(&common, &etas, detector.as_deref(), eta_d, k),
        Command::ReproducePaper { common } => reproduce_paper(&common),
        Command::DemuxSchedule { common } => demux_schedule(&common),
    }
}

fn demux_schedule(common: &CommonArgs) -> Result<Outcome> {
    let scenario = load_scenario(common.config.as_deref())?;
    let cfg = scenario.demux;
    let mut csv = String::from("pulse_index,channel\n");
    for (pulse, channel) in cfg.schedule() {
        csv.push_str(&format!("{pulse},{channel}\n"));
    }
    print!("{csv}");
    eprintln!(
        "switch rate {} Hz, single-photon budget eta_s = {}",
        format_significant(cfg.pc_rep_hz, 12),
        format_significant(cfg.efficiency_budget(), 12)
    );
    let json = serde_json::json!({
        "schedule": cfg.schedule(),
        "pc_rep_hz": cfg.pc_rep_hz,
        "eta_s": cfg.efficiency_budget(),
    });
    write_output(common, &csv, &json)?;
    Ok(Outcome::Pass)
}

fn write_output(common: &CommonArgs, csv: &str, json: &serde_json::Value) -> Result<()> {
    if let Some(path) = &common.out {
        let payload = match common.format {
            OutputFormat::Csv => csv.to_string(),
            OutputFormat::Json => serde_json::to_string_pretty(json)? + "\n",
        };
        std::fs::write(path, payload)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn is_ideal(s: &Scenario) -> bool {
    s.source.eta_s == 1.0
        && s.source.overlap_x == 1.0
        && s.detector.kind == DetectorKind::IdealPnrd
        && s.detector.eta_d == 1.0
}

fn truth_table(common: &CommonArgs) -> Result<Outcome> {
    let scenario = load_scenario(common.config.as_deref())?;
    let net = heralded_cnot_network::<f64>();
    let table = match simulate_tomography(&net, &scenario.source, &scenario.detector, Protocol::F1)
    {
        Ok(t) => t,
        Err(FidelityError::NoHeralds) => {
            eprintln!("error: {}", FidelityError::NoHeralds);
            return Ok(Outcome::AssertionFailed);
        }
        Err(e) => return Err(e.into()),
    };

    println!("heralded truth table (columns are inputs):");
    print!("{table}");

    let json = serde_json::json!({
        "in_labels": table.in_labels,
        "out_labels": table.out_labels,
        "cells": table.cells,
    });
    write_output(common, &table.to_csv_grid(), &json)?;

    if is_ideal(&scenario) {
        let expected_row = [0usize, 1, 3, 2];
        let mut worst = 0.0f64;
        for (col, &row) in expected_row.iter().enumerate() {
            for r in 0..4 {
                let want = if r == row { 1.0 } else { 0.0 };
                worst = worst.max((table.cells[r][col] - want).abs());
            }
        }
        if worst > 1e-10 {
            eprintln!("truth table deviates from the exact gate by {worst:.3e}");
            return Ok(Outcome::AssertionFailed);
        }
        println!("exact: columns match the gate logic (max deviation {worst:.2e})");
    } else {
        let f1 = hofmann_f1(&table)?;
        println!(
            "computational-basis fidelity under this scenario: {}",
            format_significant(f1, 12)
        );
    }
    Ok(Outcome::Pass)
}

fn parse_eta_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid: Vec<f64> = if parts.len() == 3 {
        let start: f64 = parts[0].parse().context("bad grid start")?;
        let stop: f64 = parts[1].parse().context("bad grid stop")?;
        let count: usize = parts[2].parse().context("bad grid count")?;
        if count < 2 {
            vec![start]
        } else {
            (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect()
        }
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().context("bad grid value"))
            .collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() {
        bail!("empty eta_s grid");
    }
    for &eta in &grid {
        if !(0.0..=1.0).contains(&eta) {
            bail!("eta_s {eta} outside [0, 1]");
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRowOut {
    eta_s: f64,
    eta_d: f64,
    detector_kind: String,
    p4: f64,
    p2: f64,
    eta_h: f64,
    eta_h_closed_form: f64,
    abs_err: f64,
}

fn herald_sweep(
    common: &CommonArgs,
    etas: &str,
    detector: Option<&str>,
    eta_d: f64,
    k: u32,
) -> Result<Outcome> {
    let scenario = load_scenario(common.config.as_deref())?;
    let grid = parse_eta_grid(etas)?;
    eprintln!(
        "sweeping {} source efficiencies for input {}",
        grid.len(),
        scenario.input_label
    );

    let families: Vec<(String, DetectorModel<f64>)> = match detector {
        Some(kind) => {
            let det = resolve_detector(&DetectorSpec {
                kind: kind.to_string(),
                // A number-resolving detector has no element efficiency.
                eta_d: if matches!(kind, "ideal" | "ideal_pnrd") {
                    1.0
                } else {
                    eta_d
                },
                k: matches!(kind, "pseudo" | "pseudo_pnrd").then_some(k),
            })?;
            vec![(kind.to_string(), det)]
        }
        None => vec![
            ("ideal".into(), DetectorModel::ideal()),
            (
                "pseudo".into(),
                DetectorModel::new(DetectorKind::PseudoPnrd { elements: k }, eta_d),
            ),
            ("standard".into(), DetectorModel::standard(eta_d)),
        ],
    };

    let points: Vec<(String, DetectorModel<f64>, f64)> = families
        .iter()
        .flat_map(|(label, det)| grid.iter().map(move |&eta| (label.clone(), *det, eta)))
        .collect();

    let (ca, cb) = scenario.control;
    let (ta, tb) = scenario.target;
    let evaluate = |(label, det, eta_s): &(String, DetectorModel<f64>, f64)| -> Result<SweepRowOut> {
        let brute = herald_budget_bruteforce(ca, cb, ta, tb, *eta_s, det)?;
        let closed = p2_terms_closed_form(ca, cb, ta, tb, *eta_s, det)?;
        Ok(SweepRowOut {
            eta_s: *eta_s,
            eta_d: det.eta_d,
            detector_kind: label.clone(),
            p4: brute.p4,
            p2: brute.p2_total(),
            eta_h: brute.eta_h,
            eta_h_closed_form: closed.eta_h,
            abs_err: (brute.eta_h - closed.eta_h).abs(),
        })
    };

    // Fan out across a bounded pool; rows come back in grid order.
    let rows: Vec<SweepRowOut> = if let Some(jobs) = common.jobs {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .context("cannot build worker pool")?;
        pool.install(|| points.par_iter().map(evaluate).collect::<Result<Vec<_>>>())?
    } else {
        points.par_iter().map(evaluate).collect::<Result<Vec<_>>>()?
    };

    let mut csv = String::from(
        "eta_s,eta_d,detector_kind,p4,p2,eta_h,eta_h_closed_form,abs_err\n",
    );
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            format_significant(row.eta_s, 12),
            format_significant(row.eta_d, 12),
            row.detector_kind,
            format_significant(row.p4, 12),
            format_significant(row.p2, 12),
            format_significant(row.eta_h, 12),
            format_significant(row.eta_h_closed_form, 12),
            format_significant(row.abs_err, 12),
        ));
    }
    print!("{csv}");
    write_output(common, &csv, &serde_json::to_value(&rows)?)?;
    Ok(Outcome::Pass)
}

fn golden_dir() -> PathBuf {
    std::env::var_os("HERALDIX_GOLDEN_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("golden"))
}

fn reproduce_paper(common: &CommonArgs) -> Result<Outcome> {
    let items = report::build_report(&golden_dir(), common.tolerance)?;
    for item in &items {
        println!("{}", item.line());
    }
    let failed = items.iter().filter(|i| !i.pass).count();
    if failed == 0 {
        println!("all {} reference checks passed", items.len());
    } else {
        println!("{failed} of {} reference checks FAILED", items.len());
    }
    write_output(
        common,
        &report::report_to_csv(&items),
        &serde_json::to_value(&items)?,
    )?;
    Ok(if failed == 0 {
        Outcome::Pass
    } else {
        Outcome::AssertionFailed
    })
}
