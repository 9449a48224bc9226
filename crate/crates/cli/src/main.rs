//! Command line front end for the curvature pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data or artifact error,
//! 4 stage failure, 5 partial run (some days failed, artifacts for the rest
//! were written).

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use curvflow::curvature::curvature_map;
use curvflow::entity::EntityId;
use curvflow::error::CoreError;
use curvflow::pipeline::artifacts::{
    read_scoreboard_csv, render_rca_dot, write_atomic, write_curvature_csv, write_delta_csv,
    write_json, write_scoreboard_csv, write_topk_csv, FlowExport, GraphExport, RcaExport,
};
use curvflow::pipeline::config::PipelineConfig;
use curvflow::pipeline::run::{
    attribute_day, build_day_graph, curvature_options, day_delta, flow_day, run_range,
    run_range_with, score_day, Dataset, RunManifest,
};
use curvflow::pipeline::artifacts::read_delta_csv;
use curvflow::scoring::ScoreEntry;
use curvflow::stress::{
    inject_shock, run_protocol, sensitivity_sweep, summary_markdown, write_trials_csv, ShockSpec,
    SweepParam, SweepPoint,
};
use serde::Serialize;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const RUN_ROOT_ENV: &str = "CURVFLOW_RUN_ROOT";

#[derive(Parser)]
#[command(
    name = "curvflow",
    version,
    about = "Curvature-based market graph analytics"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Run directory for artifacts; overrides the CURVFLOW_RUN_ROOT
    /// environment variable.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags that override single config values; the effective configuration
/// (and its hash) reflects them.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// Score blend weight α.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Unstable zone threshold θ.
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Flow step size η.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Flow iteration count.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Curvature kind: ollivier or forman.
    #[arg(long, global = true)]
    kind: Option<String>,
    /// Lazy random walk idling mass.
    #[arg(long, global = true)]
    p_idle: Option<f64>,
    /// Shock trial count.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Shock protocol seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// First day to score (YYYY-MM-DD).
    #[arg(long, global = true)]
    start: Option<NaiveDate>,
    /// Last day to score (YYYY-MM-DD).
    #[arg(long, global = true)]
    end: Option<NaiveDate>,
    /// Recommendation list size K.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Forecast horizon in trading days.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Score form: alpha or lambda.
    #[arg(long, global = true)]
    form: Option<String>,
    /// Exposure charge λ for the lambda form.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Forecaster: momentum or vol_adjusted.
    #[arg(long, global = true)]
    forecaster: Option<String>,
    /// Δκ source: flow or cross_day.
    #[arg(long, global = true)]
    shift_source: Option<String>,
    /// No-shock control mode for eval.
    #[arg(long, global = true)]
    control: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = self.alpha {
            cfg.scoring.alpha = v;
        }
        if let Some(v) = self.theta {
            cfg.rca.theta = v;
        }
        if let Some(v) = self.eta {
            cfg.flow.eta = v;
        }
        if let Some(v) = self.iterations {
            cfg.flow.iterations = v;
        }
        if let Some(v) = &self.kind {
            cfg.curvature.kind = v.clone();
        }
        if let Some(v) = self.p_idle {
            cfg.curvature.p_idle = v;
        }
        if let Some(v) = self.trials {
            cfg.eval.trials = v;
        }
        if let Some(v) = self.seed {
            cfg.eval.seed = v;
        }
        if let Some(v) = self.start {
            cfg.dates.start = Some(v);
        }
        if let Some(v) = self.end {
            cfg.dates.end = Some(v);
        }
        if let Some(v) = self.k {
            cfg.scoring.k = v;
        }
        if let Some(v) = self.horizon {
            cfg.scoring.horizon = v;
        }
        if let Some(v) = &self.form {
            cfg.scoring.form = v.clone();
        }
        if let Some(v) = self.lambda {
            cfg.scoring.lambda = v;
        }
        if let Some(v) = &self.forecaster {
            cfg.scoring.forecaster = v.clone();
        }
        if let Some(v) = &self.shift_source {
            cfg.rca.shift_source = v.clone();
        }
        if self.control {
            cfg.eval.control = true;
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline over every scoreable day in range.
    Run,
    /// Build and write one day's graph.
    BuildGraph {
        #[arg(long)]
        date: NaiveDate,
    },
    /// Compute edge curvature from a written graph.
    Curvature {
        #[arg(long)]
        date: NaiveDate,
    },
    /// Run the flow on a written graph; writes the trace and the Δκ map.
    Flow {
        #[arg(long)]
        date: NaiveDate,
    },
    /// Score one day from its written graph and Δκ map.
    Score {
        #[arg(long)]
        date: NaiveDate,
    },
    /// Cut the top-K list from a written scoreboard.
    Rank {
        #[arg(long)]
        date: NaiveDate,
    },
    /// Backward path search for one day's ranked assets.
    Rca {
        #[arg(long)]
        date: NaiveDate,
    },
    /// Run the full range on shocked inputs; targets become attribution
    /// ground truth.
    Perturb {
        /// Comma-separated asset ids to shock.
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<String>,
    },
    /// Run the synthetic shock protocol and write metrics.
    Eval,
    /// Rerun the protocol over a one-parameter grid.
    Sweep {
        /// Which parameter to vary: alpha or theta.
        #[arg(long)]
        param: String,
        /// Grid values, space- or comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, required = true)]
        values: Vec<f64>,
    },
    /// Print a summary of a finished run directory.
    Report,
}

fn exit_code_for(e: &CoreError) -> u8 {
    match e {
        CoreError::Config(_) => 2,
        CoreError::Io { .. }
        | CoreError::Malformed { .. }
        | CoreError::Data(_)
        | CoreError::Schema { .. }
        | CoreError::HashMismatch { .. } => 3,
        _ => 4,
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    if let Some(out) = &cli.out {
        return out.clone();
    }
    if let Ok(root) = std::env::var(RUN_ROOT_ENV) {
        if !root.is_empty() {
            return PathBuf::from(root);
        }
    }
    PathBuf::from("run")
}

fn load_config(cli: &Cli) -> Result<(PipelineConfig, PathBuf), CoreError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        CoreError::Config("a config file is required (pass --config <file>)".into())
    })?;
    let (mut cfg, base) = PipelineConfig::load(path)?;
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok((cfg, base))
}

fn day_dir(out: &Path, date: NaiveDate) -> PathBuf {
    out.join("days").join(date.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, CoreError> {
    let out = out_dir(cli);
    match &cli.cmd {
        Cmd::Run => {
            let (cfg, base) = load_config(cli)?;
            let dataset = Dataset::load(&cfg, &base)?;
            let manifest = run_range(&dataset, &cfg, &out)?;
            let done = manifest.days.len();
            let failed = manifest.failures.len();
            println!(
                "run complete: {done} day(s) written to {}, {failed} failed",
                out.display()
            );
            if manifest.partial {
                for (date, err) in &manifest.failures {
                    eprintln!("  {date}: {err}");
                }
                return Ok(ExitCode::from(5));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::BuildGraph { date } => {
            let (cfg, base) = load_config(cli)?;
            let dataset = Dataset::load(&cfg, &base)?;
            let graph = build_day_graph(&dataset, &cfg, &dataset.frames, *date)?;
            let hash = cfg.config_hash();
            let path = day_dir(&out, *date).join("graph.json");
            write_json(&path, &GraphExport::new(&graph, &hash))?;
            println!(
                "graph for {date}: {} nodes, {} edges -> {}",
                graph.nodes().len(),
                graph.collapsed().edge_count(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Curvature { date } => {
            let (cfg, _) = load_config(cli)?;
            let hash = cfg.config_hash();
            let dir = day_dir(&out, *date);
            let graph = GraphExport::read(&dir.join("graph.json"), &hash)?.to_graph()?;
            let map = curvature_map(&graph, cfg.curvature_kind()?, &curvature_options(&cfg))?;
            let path = dir.join("curvature.csv");
            write_curvature_csv(&path, &map, &hash)?;
            println!("curvature for {date}: {} edges -> {}", map.len(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Flow { date } => {
            let (cfg, base) = load_config(cli)?;
            let dataset = Dataset::load(&cfg, &base)?;
            let hash = cfg.config_hash();
            let dir = day_dir(&out, *date);
            let graph = GraphExport::read(&dir.join("graph.json"), &hash)?.to_graph()?;
            let initial = curvature_map(&graph, cfg.curvature_kind()?, &curvature_options(&cfg))?;
            let trace = flow_day(&graph, &cfg)?;
            let delta = day_delta(&dataset, &cfg, &dataset.frames, *date, &initial, &trace)?;
            write_json(&dir.join("flow.json"), &FlowExport::new(&trace, &hash))?;
            write_delta_csv(&dir.join("delta.csv"), &delta, &hash)?;
            println!(
                "flow for {date}: {} iterations over {} edges -> {}",
                cfg.flow.iterations,
                graph.collapsed().edge_count(),
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Score { date } => {
            let (cfg, base) = load_config(cli)?;
            let dataset = Dataset::load(&cfg, &base)?;
            let hash = cfg.config_hash();
            let dir = day_dir(&out, *date);
            let graph = GraphExport::read(&dir.join("graph.json"), &hash)?.to_graph()?;
            let delta = read_delta_csv(&dir.join("delta.csv"), &hash)?;
            let board = score_day(&cfg, &graph, &dataset.frames, *date, &delta)?;
            let path = dir.join("scoreboard.csv");
            write_scoreboard_csv(&path, &board, &hash)?;
            println!(
                "scores for {date}: {} assets -> {}",
                board.entries.len(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Rank { date } => {
            let (cfg, _) = load_config(cli)?;
            let hash = cfg.config_hash();
            let dir = day_dir(&out, *date);
            let rows = read_scoreboard_csv(&dir.join("scoreboard.csv"), &hash)?;
            let entries: Vec<ScoreEntry<f64>> = rows
                .into_iter()
                .take(cfg.scoring.k)
                .map(|(asset, r_hat, risk, score)| ScoreEntry {
                    asset,
                    r_hat,
                    risk,
                    score,
                })
                .collect();
            let path = dir.join("topk.csv");
            write_topk_csv(&path, *date, &entries, &hash)?;
            println!("top {} for {date} -> {}", entries.len(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Rca { date } => {
            let (cfg, _) = load_config(cli)?;
            let hash = cfg.config_hash();
            let dir = day_dir(&out, *date);
            let graph = GraphExport::read(&dir.join("graph.json"), &hash)?.to_graph()?;
            let delta = read_delta_csv(&dir.join("delta.csv"), &hash)?;
            let rows = read_scoreboard_csv(&dir.join("scoreboard.csv"), &hash)?;
            let top: Vec<EntityId> = rows
                .into_iter()
                .take(cfg.scoring.k)
                .map(|(asset, ..)| asset)
                .collect();
            let none = BTreeSet::new();
            let (zone, report) = attribute_day(&cfg, &graph, *date, &delta, &top, &none)?;
            let export = RcaExport::new(&report, &zone, &hash);
            write_json(&dir.join("rca.json"), &export)?;
            write_atomic(&dir.join("rca.dot"), render_rca_dot(&export).as_bytes())?;
            let found = export.entries.iter().filter(|e| e.path.is_some()).count();
            println!(
                "paths for {date}: {found} of {} assets -> {}",
                export.entries.len(),
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Perturb { targets } => {
            let (cfg, base) = load_config(cli)?;
            let dataset = Dataset::load(&cfg, &base)?;
            let spec = ShockSpec {
                targets: targets.iter().map(|t| EntityId::from(t.as_str())).collect(),
                vol_multiplier: cfg.eval.vol_multiplier,
                sentiment_delta: cfg.eval.sentiment_delta,
            };
            let shocked = inject_shock(&dataset.frames, &spec)?;
            let manifest = run_range_with(&dataset, &cfg, &out, &shocked, &spec.targets)?;
            println!(
                "perturbed run complete: {} day(s) written to {}",
                manifest.days.len(),
                out.display()
            );
            if manifest.partial {
                return Ok(ExitCode::from(5));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Eval => {
            let (cfg, base) = load_config(cli)?;
            let dataset = Dataset::load(&cfg, &base)?;
            let (report, trials) = run_protocol(&dataset, &cfg)?;
            let dir = out.join("eval");
            write_json(&dir.join("metrics.json"), &report)?;
            write_trials_csv(&dir.join("trials.csv"), &trials, &report.config_hash)?;
            write_atomic(
                &dir.join("summary.md"),
                summary_markdown(&report, &trials).as_bytes(),
            )?;
            println!(
                "eval complete: NDCG@10 {:.4}, top-10 volatility {:.4}, fidelity {} -> {}",
                report.ndcg,
                report.top10_volatility,
                report
                    .rca_fidelity
                    .map(|f| format!("{f:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep { param, values } => {
            let (cfg, base) = load_config(cli)?;
            let dataset = Dataset::load(&cfg, &base)?;
            let param = match param.as_str() {
                "alpha" => SweepParam::Alpha,
                "theta" => SweepParam::Theta,
                other => {
                    return Err(CoreError::Config(format!(
                        "unknown sweep parameter {other:?} (want \"alpha\" or \"theta\")"
                    )))
                }
            };
            let points = sensitivity_sweep(&dataset, &cfg, param, values)?;
            #[derive(Serialize)]
            struct SweepExport<'a> {
                schema_version: u32,
                config_hash: String,
                param: SweepParam,
                points: &'a [SweepPoint],
            }
            let (name, table_name, label) = match param {
                SweepParam::Alpha => ("sweep_alpha.json", "sweep_alpha.md", "alpha"),
                SweepParam::Theta => ("sweep_theta.json", "sweep_theta.md", "theta"),
            };
            let path = out.join("eval").join(name);
            write_json(
                &path,
                &SweepExport {
                    schema_version: curvflow::pipeline::SCHEMA_VERSION,
                    config_hash: cfg.config_hash(),
                    param,
                    points: &points,
                },
            )?;
            let mut table = String::new();
            table.push_str(&format!(
                "| {label} | ndcg@10 | ndcg baseline | top-10 volatility | rca fidelity |\n"
            ));
            table.push_str("|---|---|---|---|---|\n");
            for point in &points {
                let fidelity = point
                    .report
                    .rca_fidelity
                    .map_or_else(|| "n/a".to_string(), |f| format!("{f:.4}"));
                table.push_str(&format!(
                    "| {} | {:.6} | {:.6} | {:.6} | {} |\n",
                    point.value,
                    point.report.ndcg,
                    point.report.ndcg_baseline,
                    point.report.top10_volatility,
                    fidelity
                ));
            }
            let table_path = out.join("eval").join(table_name);
            write_atomic(&table_path, table.as_bytes())?;
            for point in &points {
                let fidelity = point
                    .report
                    .rca_fidelity
                    .map_or_else(|| "n/a".to_string(), |f| format!("{f:.4}"));
                println!(
                    "{param:?} = {}: NDCG@10 {:.4}, top-10 volatility {:.6}, fidelity {}",
                    point.value, point.report.ndcg, point.report.top10_volatility, fidelity
                );
            }
            println!("sweep written to {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Report => {
            let manifest = RunManifest::read(&out.join("manifest.json"))?;
            println!("run {}", out.display());
            println!("  config hash: {}", manifest.config_hash);
            println!("  inputs: {}", manifest.inputs.len());
            println!(
                "  days: {} ok, {} failed{}",
                manifest.days.len(),
                manifest.failures.len(),
                if manifest.partial { " (partial)" } else { "" }
            );
            for (date, err) in &manifest.failures {
                println!("    {date}: {err}");
            }
            let metrics_path = out.join("eval").join("metrics.json");
            if metrics_path.exists() {
                let text = std::fs::read_to_string(&metrics_path)
                    .map_err(|e| CoreError::Data(format!("{}: {e}", metrics_path.display())))?;
                let metrics: curvflow::stress::MetricsReport = serde_json::from_str(&text)
                    .map_err(|e| CoreError::Data(format!("{}: {e}", metrics_path.display())))?;
                println!("  eval: NDCG@10 {:.4} (baseline {:.4}), top-10 volatility {:.6}, fidelity {}",
                    metrics.ndcg,
                    metrics.ndcg_baseline,
                    metrics.top10_volatility,
                    metrics.rca_fidelity.map(|f| format!("{f:.4}")).unwrap_or_else(|| "n/a".into()),
                );
            }
            if manifest.partial {
                return Ok(ExitCode::from(5));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
