//! Command-line driver for the betting experiments.
//!
//! Subcommands: `trace` (bound-asserting CSV trace), `growth` (growth rates
//! vs the information-projection reference), `lil` (iterated-logarithm
//! ratios), `ville` (coverage of the Ville event under a null stream), and
//! `check-bounds` (the invariant suite on a randomized corpus).
//!
//! Every run flag can also come from a JSON config (`--config run.json`)
//! whose keys mirror the flags; explicit flags win. Exit code is nonzero iff
//! a bound violation row was emitted.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use villebet::error::{Error, Result};
use villebet::experiments::{
    geometric_checkpoints, growth_rate, lil_trace, run_trace, standard_corpus, ville_coverage,
    write_trace_csv, CorpusOptions, ExperimentConfig, DEFAULT_NODES_PER_SIDE,
};
use villebet::priors::PriorKind;
use villebet::streams::{parse_stream, StreamSpec};

#[derive(Parser)]
#[command(name = "villebet", version, about = "Mixture betting wealth processes on bounded data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one stream through the selected mixtures and emit the CSV trace.
    Trace(RunArgs),
    /// Growth rates at the horizon against the optimal-rate reference.
    Growth(RunArgs),
    /// Self-normalized iterated-logarithm ratios and regret in ln ln V units.
    Lil(RunArgs),
    /// Empirical Ville-event exceedance under a null stream.
    Ville(RunArgs),
    /// Run the invariant suite on a randomized stream corpus.
    CheckBounds(CheckArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON file whose keys mirror these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Null mean in (0,1).
    #[arg(long)]
    m0: Option<f64>,
    /// Stream description, e.g. bernoulli:p=0.8, beta:a=2,b=5,
    /// discrete:xs=0.1;0.9,ws=1;1, pointmass:x=1,
    /// nsm-adv:delta=0.1,l1=1,l2=-1,pi=0.5.
    #[arg(long)]
    stream: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Comma-separated subset of {uniform,robbins,oj}, or "all".
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Aggregate split; the 50-50 hedge is the default.
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    nodes_per_side: Option<usize>,
    #[arg(long)]
    replications: Option<u64>,
    /// "geometric", "all", or a comma-separated list of times.
    #[arg(long)]
    checkpoints: Option<String>,
    /// CSV output path (trace and lil).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Comma-separated null means.
    #[arg(long, default_value = "0.25,0.5,0.7")]
    m0: String,
    #[arg(long, default_value_t = 2000)]
    horizon: u64,
    #[arg(long, default_value_t = 256)]
    nodes_per_side: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Streams per family per null mean (scales the corpus down or up).
    #[arg(long, default_value_t = 2)]
    seeds_per_family: u64,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    m0: Option<f64>,
    stream: Option<String>,
    seed: Option<u64>,
    horizon: Option<u64>,
    prior: Option<String>,
    alpha: Option<f64>,
    s0: Option<f64>,
    nodes_per_side: Option<usize>,
    replications: Option<u64>,
    checkpoints: Option<String>,
    out: Option<PathBuf>,
}

fn parse_priors(s: &str) -> Result<Vec<PriorKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(vec![
            PriorKind::Uniform,
            PriorKind::Robbins,
            PriorKind::OrabonaJun,
        ]);
    }
    s.split(',').map(|p| p.trim().parse()).collect()
}

fn parse_checkpoints(s: &str, horizon: u64) -> Result<Vec<u64>> {
    match s {
        "geometric" => Ok(geometric_checkpoints(horizon)),
        "all" => Ok((1..=horizon).collect()),
        list => {
            let mut cp: Vec<u64> = list
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<u64>()
                        .map_err(|e| Error::Config(format!("bad checkpoint {t:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            cp.sort_unstable();
            cp.dedup();
            Ok(cp)
        }
    }
}

/// Resolve the experiment config and the optional output path: explicit
/// flags win over JSON keys, which win over defaults.
fn build_config(args: &RunArgs) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let file: FileConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        None => FileConfig::default(),
    };
    let m0 = args.m0.or(file.m0).unwrap_or(0.5);
    let stream_str = args
        .stream
        .clone()
        .or(file.stream)
        .ok_or_else(|| Error::Config("--stream is required".into()))?;
    let horizon = args.horizon.or(file.horizon).unwrap_or(10_000);
    let spec = StreamSpec {
        kind: parse_stream(&stream_str)?,
        seed: args.seed.or(file.seed).unwrap_or(0),
        horizon,
    };
    let mut config = ExperimentConfig::new(m0, spec);
    config.priors = parse_priors(
        args.prior
            .as_deref()
            .or(file.prior.as_deref())
            .unwrap_or("all"),
    )?;
    config.alpha = args.alpha.or(file.alpha).unwrap_or(0.05);
    config.s0 = args.s0.or(file.s0).unwrap_or(0.5);
    config.nodes_per_side = args
        .nodes_per_side
        .or(file.nodes_per_side)
        .unwrap_or(DEFAULT_NODES_PER_SIDE);
    config.replications = args.replications.or(file.replications).unwrap_or(1);
    config.checkpoints = parse_checkpoints(
        args.checkpoints
            .as_deref()
            .or(file.checkpoints.as_deref())
            .unwrap_or("geometric"),
        horizon,
    )?;
    Ok((config, args.out.clone().or(file.out)))
}

fn cmd_trace(args: &RunArgs) -> Result<bool> {
    let (config, out) = build_config(args)?;
    let out = out.ok_or_else(|| Error::Config("--out FILE.csv is required".into()))?;
    let result = run_trace(&config)?;
    let mut buf = Vec::new();
    write_trace_csv(&result, &mut buf)?;
    fs::write(&out, buf)?;
    println!(
        "trace: {} rows -> {} (eps_quad {:.3e})",
        result.rows.len(),
        out.display(),
        result.eps_quad
    );
    for v in &result.violations {
        eprintln!(
            "VIOLATION rep {} n {} {}: slack {:.6e}",
            v.replication, v.n, v.check, v.slack
        );
    }
    Ok(result.violations.is_empty())
}

fn cmd_growth(args: &RunArgs) -> Result<bool> {
    let (config, _) = build_config(args)?;
    let g = growth_rate(&config)?;
    println!(
        "growth at n={} (V_n={:.6}): mean={:.6} var={:.6}",
        g.n, g.v_n, g.mean, g.variance
    );
    println!(
        "  reference: klinf={:.6} half={:.6} self-normalized={} strong-drift={}",
        g.klinf_ref,
        g.half_klinf_ref,
        g.self_normalized_ref
            .map(|x| format!("{x:.6}"))
            .unwrap_or_else(|| "n/a".into()),
        g.strong_drift_condition
    );
    for e in &g.estimates {
        println!(
            "  {:<8} lnW/n={:+.6} lnW/V={}",
            e.prior.label(),
            e.per_n,
            e.per_v
                .map(|x| format!("{x:+.6}"))
                .unwrap_or_else(|| "n/a".into())
        );
    }
    if let Some(a) = g.aggregate_per_n {
        println!("  {:<8} lnW/n={:+.6}", "agg", a);
    }
    Ok(true)
}

fn cmd_lil(args: &RunArgs) -> Result<bool> {
    let (config, out) = build_config(args)?;
    let report = lil_trace(&config)?;
    let mut csv = String::from("replication,n,lil_ratio,regret_over_lnlnv\n");
    for seed in &report.seeds {
        println!(
            "seed {}: max ratio {} final regret/lnlnV {}",
            seed.replication,
            seed.max_ratio
                .map(|x| format!("{x:.4}"))
                .unwrap_or_else(|| "n/a".into()),
            seed.final_regret_over_lnlnv
                .map(|x| format!("{x:.4}"))
                .unwrap_or_else(|| "n/a".into()),
        );
        for row in &seed.rows {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                seed.replication,
                row.n,
                row.lil_ratio.map(|x| format!("{x:.16e}")).unwrap_or_default(),
                row.regret_over_lnlnv
                    .map(|x| format!("{x:.16e}"))
                    .unwrap_or_default()
            ));
        }
    }
    if let Some(out) = &out {
        fs::write(out, csv)?;
        println!("rows -> {}", out.display());
    }
    Ok(true)
}

fn cmd_ville(args: &RunArgs) -> Result<bool> {
    let (config, _) = build_config(args)?;
    let report = ville_coverage(&config)?;
    let ci = 3.0 * (report.alpha * (1.0 - report.alpha) / report.replications as f64).sqrt();
    println!(
        "ville coverage: alpha={} horizon={} replications={} (bound {:.4})",
        report.alpha,
        report.horizon,
        report.replications,
        report.alpha + ci
    );
    let mut ok = true;
    for (label, frac) in &report.entries {
        let within = *frac <= report.alpha + ci;
        ok &= within;
        println!(
            "  {:<16} exceedance {:.4} {}",
            label,
            frac,
            if within { "ok" } else { "EXCEEDS" }
        );
    }
    Ok(ok)
}

fn cmd_check_bounds(args: &CheckArgs) -> Result<bool> {
    let m0s: Vec<f64> = args
        .m0
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad m0 {t:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    let opts = CorpusOptions {
        bernoulli_seeds: args.seeds_per_family.max(1),
        drift_seeds: args.seeds_per_family.max(1),
        fine_drift_seeds: 1,
        beta_seeds: args.seeds_per_family.max(1),
        discrete_seeds: 3 * args.seeds_per_family.max(1),
    };
    let corpus = standard_corpus(&m0s, &opts);
    println!(
        "check-bounds: {} streams, horizon {}, {} nodes per side",
        corpus.len(),
        args.horizon,
        args.nodes_per_side
    );
    use rayon::prelude::*;
    let results: Vec<Result<(String, villebet::experiments::TraceResult)>> = corpus
        .par_iter()
        .map(|entry| {
            let mut config = ExperimentConfig::new(
                entry.m0,
                StreamSpec {
                    kind: entry.kind.clone(),
                    seed: entry.seed,
                    horizon: args.horizon,
                },
            );
            config.nodes_per_side = args.nodes_per_side;
            config.alpha = args.alpha;
            config.checkpoints = vec![];
            run_trace(&config).map(|r| (entry.label.clone(), r))
        })
        .collect();
    let mut violations = 0usize;
    let mut max_gap = 0.0f64;
    let mut branch_counts = [0u64; 5];
    for r in results {
        let (label, res) = r?;
        max_gap = max_gap.max(res.eps_quad);
        for (i, c) in res.branch_counts.iter().enumerate() {
            branch_counts[i] += c;
        }
        for v in &res.violations {
            eprintln!("VIOLATION [{label}] n {} {}: slack {:.6e}", v.n, v.check, v.slack);
            violations += 1;
        }
    }
    println!("  max refinement gap: {max_gap:.3e}");
    println!(
        "  branch visits: small-interior {} small-boundary {} medium {} large {} degenerate {}",
        branch_counts[0], branch_counts[1], branch_counts[2], branch_counts[3], branch_counts[4]
    );
    println!(
        "  {}",
        if violations == 0 {
            "all bounds hold".to_string()
        } else {
            format!("{violations} violations")
        }
    );
    Ok(violations == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Cmd::Trace(args) => cmd_trace(args),
        Cmd::Growth(args) => cmd_growth(args),
        Cmd::Lil(args) => cmd_lil(args),
        Cmd::Ville(args) => cmd_ville(args),
        Cmd::CheckBounds(args) => cmd_check_bounds(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
