//! Day-by-day orchestration: load the dataset once, then for each scoreable
//! day build the graph, run curvature and flow, derive the curvature shift,
//! score, rank and attribute. `run_range` adds artifact files and a
//! manifest on top of `run_day`.

use crate::curvature::{curvature_map, CurvatureMap, CurvatureOptions};
use crate::entity::{EdgeKey, EntityId};
use crate::error::{CoreError, Result};
use crate::flow::{cross_day_shift, simulate_flow, FlowConfig, FlowTrace};
use crate::graph::{
    assemble_graph, correlation_edges, knowledge_edges, load_comention, load_knowledge,
    semantic_edges, EmbeddingTable, FinGraph, KnowledgeLink, NodeKind,
};
use crate::market::{
    build_frames, load_macro, load_prices, load_sentiment, trading_calendar, FeatureParams,
    MarketFrame, NormalizationStats,
};
use crate::rca::{rca_report, unstable_zone, RcaParams, RcaReport, UnstableZone};
use crate::scoring::{
    risk_exposures, top_k, Forecaster, MomentumForecaster, ReturnForecast, ScoreBoard, ScoreForm,
    VolAdjustedForecaster,
};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::artifacts::{
    file_digest, render_rca_dot, write_atomic, write_curvature_csv, write_delta_csv, write_json,
    write_scoreboard_csv, write_topk_csv, FlowExport, GraphExport, RcaExport,
};
use super::config::{PipelineConfig, ShiftSource, SCHEMA_VERSION};

/// Everything loaded from disk, shared by every day of a run.
pub struct Dataset {
    pub calendar: Vec<NaiveDate>,
    pub universe: Vec<EntityId>,
    pub frames: Vec<MarketFrame<f64>>,
    pub stats: NormalizationStats<f64>,
    /// Forward-filled closes, for realized forward returns.
    pub closes: BTreeMap<(EntityId, NaiveDate), f64>,
    pub embeddings: Option<EmbeddingTable<f64>>,
    pub comention: BTreeMap<NaiveDate, BTreeSet<EdgeKey>>,
    pub knowledge: Vec<KnowledgeLink>,
    pub macro_ids: Vec<EntityId>,
    /// Role name -> SHA-256 of each input file, for the manifest.
    pub input_digests: BTreeMap<String, String>,
}

fn feature_params(cfg: &PipelineConfig) -> FeatureParams {
    FeatureParams {
        min_history: cfg.features.min_history,
        vol_window: cfg.features.vol_window,
        ffill_limit: cfg.features.ffill_limit,
    }
}

impl Dataset {
    /// Load and validate every input named in the config. Relative paths
    /// resolve against `base`.
    pub fn load(cfg: &PipelineConfig, base: &Path) -> Result<Self> {
        cfg.validate()?;
        let resolve = |rel: &str| -> PathBuf {
            let p = Path::new(rel);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut input_digests = BTreeMap::new();
        let mut digest = |role: &str, path: &Path| -> Result<()> {
            input_digests.insert(role.to_string(), file_digest(path)?);
            Ok(())
        };

        let prices_path = resolve(&cfg.data.prices);
        digest("prices", &prices_path)?;
        let prices = load_prices(&prices_path)?;
        if prices.is_empty() {
            return Err(CoreError::Data(format!(
                "{} has no rows",
                prices_path.display()
            )));
        }
        let calendar = trading_calendar(&prices);
        let universe: Vec<EntityId> = prices
            .iter()
            .map(|p| p.ticker.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let sentiments = match &cfg.data.sentiment {
            Some(rel) => {
                let path = resolve(rel);
                digest("sentiment", &path)?;
                load_sentiment(&path)?
            }
            None => Vec::new(),
        };
        let macro_ids = match &cfg.data.macros {
            Some(rel) => {
                let path = resolve(rel);
                digest("macros", &path)?;
                let rows = load_macro(&path)?;
                rows.iter()
                    .map(|r| r.indicator_id.clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect()
            }
            None => Vec::new(),
        };
        let knowledge = match &cfg.data.knowledge {
            Some(rel) => {
                let path = resolve(rel);
                digest("knowledge", &path)?;
                load_knowledge(&path)?
            }
            None => Vec::new(),
        };
        let embeddings = match &cfg.data.embeddings {
            Some(rel) => {
                let path = resolve(rel);
                digest("embeddings", &path)?;
                Some(EmbeddingTable::load(&path)?)
            }
            None => None,
        };
        let comention = match &cfg.data.comention {
            Some(rel) => {
                let path = resolve(rel);
                digest("comention", &path)?;
                load_comention(&path)?
            }
            None => BTreeMap::new(),
        };

        let params = feature_params(cfg);
        let first = *calendar.first().expect("non-empty calendar");
        let warmup_end_idx = (params.min_history - 1).min(calendar.len() - 1);
        let training_start = cfg.data.training_start.unwrap_or(first);
        let training_end = cfg.data.training_end.unwrap_or(calendar[warmup_end_idx]);
        let stats =
            NormalizationStats::fit(&prices, &universe, &params, training_start, training_end)?;
        let frames = build_frames(&prices, &sentiments, &universe, &stats, &params)?;
        if frames.is_empty() {
            return Err(CoreError::Data(format!(
                "no frames: calendar has {} days, min_history is {}",
                calendar.len(),
                params.min_history
            )));
        }

        let filled = crate::market::forward_fill(&prices, &calendar, params.ffill_limit)?;
        let closes = filled
            .iter()
            .map(|r| ((r.ticker.clone(), r.date), r.close))
            .collect();

        Ok(Dataset {
            calendar,
            universe,
            frames,
            stats,
            closes,
            embeddings,
            comention,
            knowledge,
            macro_ids,
            input_digests,
        })
    }

    /// Position of `date` in the trading calendar.
    pub fn calendar_index(&self, date: NaiveDate) -> Option<usize> {
        self.calendar.binary_search(&date).ok()
    }

    /// Days with enough trailing frames behind them to build a graph,
    /// clipped to the configured date range.
    pub fn scoreable_dates(&self, cfg: &PipelineConfig) -> Vec<NaiveDate> {
        let w = cfg.features.corr_window;
        self.frames
            .iter()
            .enumerate()
            .filter(|(i, _)| i + 1 >= w)
            .map(|(_, f)| f.date)
            .filter(|d| cfg.dates.start.is_none_or(|s| *d >= s))
            .filter(|d| cfg.dates.end.is_none_or(|e| *d <= e))
            .collect()
    }

    /// Realized forward log return over `horizon` trading days from `date`,
    /// per asset; assets without both closes are absent.
    pub fn forward_returns(
        &self,
        date: NaiveDate,
        horizon: usize,
    ) -> Result<BTreeMap<EntityId, f64>> {
        let idx = self
            .calendar_index(date)
            .ok_or_else(|| CoreError::Data(format!("{date} is not a trading day")))?;
        let future_idx = idx + horizon;
        if future_idx >= self.calendar.len() {
            return Err(CoreError::Data(format!(
                "no {horizon}-day forward window after {date}"
            )));
        }
        let future = self.calendar[future_idx];
        let mut out = BTreeMap::new();
        for ticker in &self.universe {
            let now = self.closes.get(&(ticker.clone(), date));
            let later = self.closes.get(&(ticker.clone(), future));
            if let (Some(&c0), Some(&c1)) = (now, later) {
                out.insert(ticker.clone(), (c1 / c0).ln());
            }
        }
        Ok(out)
    }
}

/// Everything one day of the pipeline produces.
#[derive(Clone, Debug)]
pub struct DayOutputs {
    pub date: NaiveDate,
    pub graph: FinGraph<f64>,
    /// Curvature of the assembled graph before any flow.
    pub initial_curvature: CurvatureMap<f64>,
    pub trace: FlowTrace<f64>,
    /// The Δκ map the zone, scoring and path search consumed.
    pub delta: BTreeMap<EdgeKey, f64>,
    pub zone: UnstableZone<f64>,
    pub board: ScoreBoard<f64>,
    pub top: Vec<EntityId>,
    pub report: RcaReport<f64>,
}

fn flow_config(cfg: &PipelineConfig) -> Result<FlowConfig<f64>> {
    Ok(FlowConfig {
        eta: cfg.flow.eta,
        iterations: cfg.flow.iterations,
        renormalize: cfg.flow.renormalize,
        kind: cfg.curvature_kind()?,
        options: CurvatureOptions {
            p_idle: cfg.curvature.p_idle,
            augmented_forman: cfg.curvature.augmented_forman,
        },
        recompute: cfg.flow.recompute,
    })
}

fn score_form(cfg: &PipelineConfig) -> ScoreForm<f64> {
    match cfg.scoring.form.as_str() {
        "lambda" => ScoreForm::Lambda {
            lambda: cfg.scoring.lambda,
        },
        _ => ScoreForm::Alpha {
            alpha: cfg.scoring.alpha,
        },
    }
}

fn forecaster(cfg: &PipelineConfig) -> Box<dyn Forecaster<f64>> {
    match cfg.scoring.forecaster.as_str() {
        "vol_adjusted" => Box::new(VolAdjustedForecaster {
            vol_penalty: cfg.scoring.vol_penalty,
            sentiment_tilt: cfg.scoring.sentiment_tilt,
        }),
        _ => Box::new(MomentumForecaster),
    }
}

/// Build one day's graph from the trailing frame window.
pub fn build_day_graph(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    frames: &[MarketFrame<f64>],
    date: NaiveDate,
) -> Result<FinGraph<f64>> {
    let w = cfg.features.corr_window;
    let pos = frames
        .binary_search_by_key(&date, |f| f.date)
        .map_err(|_| CoreError::Data(format!("no frame for {date}")))?;
    if pos + 1 < w {
        return Err(CoreError::Data(format!(
            "{date} has only {} trailing frames, the correlation window needs {w}",
            pos + 1
        )));
    }
    let window = &frames[pos + 1 - w..=pos];
    let today = &frames[pos];

    let mut nodes: BTreeMap<EntityId, NodeKind> = BTreeMap::new();
    for asset in today.features.keys() {
        nodes.insert(asset.clone(), NodeKind::Asset);
    }
    for id in &dataset.macro_ids {
        nodes.entry(id.clone()).or_insert(NodeKind::MacroIndicator);
    }
    let empty = BTreeSet::new();
    let mentions = dataset.comention.get(&date).unwrap_or(&empty);
    if let Some(embeddings) = &dataset.embeddings {
        for key in mentions {
            for id in [key.first(), key.second()] {
                if embeddings.get(id).is_some() {
                    nodes.entry(id.clone()).or_insert(NodeKind::NewsEntity);
                }
            }
        }
    }

    let assets_today: Vec<EntityId> = today.features.keys().cloned().collect();
    let correlation = correlation_edges(window, &assets_today, w)?;
    let semantic = match &dataset.embeddings {
        Some(embeddings) => {
            let known: BTreeSet<EdgeKey> = mentions
                .iter()
                .filter(|k| nodes.contains_key(k.first()) && nodes.contains_key(k.second()))
                .cloned()
                .collect();
            semantic_edges(embeddings, &known)
        }
        None => BTreeMap::new(),
    };
    let knowledge = knowledge_edges(&dataset.knowledge, date, &nodes);

    assemble_graph(
        date,
        nodes,
        &correlation,
        &semantic,
        &knowledge,
        cfg.graph.top_k,
        cfg.graph.weight_floor,
    )
}

/// Curvature options as configured.
pub fn curvature_options(cfg: &PipelineConfig) -> CurvatureOptions<f64> {
    CurvatureOptions {
        p_idle: cfg.curvature.p_idle,
        augmented_forman: cfg.curvature.augmented_forman,
    }
}

/// Run the configured flow on one day's graph.
pub fn flow_day(graph: &FinGraph<f64>, cfg: &PipelineConfig) -> Result<FlowTrace<f64>> {
    simulate_flow(graph, &flow_config(cfg)?).map_err(|e| e.in_stage("flow"))
}

/// The Δκ map downstream stages consume: the flow's own shift by default,
/// or the difference against the graph one horizon earlier.
pub fn day_delta(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    frames: &[MarketFrame<f64>],
    date: NaiveDate,
    initial_curvature: &CurvatureMap<f64>,
    trace: &FlowTrace<f64>,
) -> Result<BTreeMap<EdgeKey, f64>> {
    match cfg.shift_source()? {
        ShiftSource::Flow => Ok(trace.delta.clone()),
        ShiftSource::CrossDay => {
            let pos = frames
                .binary_search_by_key(&date, |f| f.date)
                .map_err(|_| CoreError::Data(format!("no frame for {date}")))?;
            let h = cfg.scoring.horizon;
            if pos < h {
                return Err(CoreError::Data(format!(
                    "cross-day shift needs a frame {h} days before {date}"
                ))
                .in_stage("curvature shift"));
            }
            let prev_date = frames[pos - h].date;
            let prev_graph = build_day_graph(dataset, cfg, frames, prev_date)
                .map_err(|e| e.in_stage("curvature shift"))?;
            let prev_map = curvature_map(&prev_graph, cfg.curvature_kind()?, &curvature_options(cfg))
                .map_err(|e| e.in_stage("curvature shift"))?;
            Ok(cross_day_shift(&prev_map, initial_curvature)
                .map_err(|e| e.in_stage("curvature shift"))?
                .delta)
        }
    }
}

/// Forecast, risk-adjust and sort one day's assets.
pub fn score_day(
    cfg: &PipelineConfig,
    graph: &FinGraph<f64>,
    frames: &[MarketFrame<f64>],
    date: NaiveDate,
    delta: &BTreeMap<EdgeKey, f64>,
) -> Result<ScoreBoard<f64>> {
    let pos = frames
        .binary_search_by_key(&date, |f| f.date)
        .map_err(|_| CoreError::Data(format!("no frame for {date}")).in_stage("scoring"))?;
    let w = cfg.features.corr_window;
    if pos + 1 < w {
        return Err(CoreError::Data(format!(
            "{date} has only {} trailing frames, the scoring window needs {w}",
            pos + 1
        ))
        .in_stage("scoring"));
    }
    let window = &frames[pos + 1 - w..=pos];
    let caster = forecaster(cfg);
    let mut forecasts: BTreeMap<EntityId, ReturnForecast<f64>> = BTreeMap::new();
    for asset in frames[pos].features.keys() {
        if let Some(f) = caster.forecast(window, asset, cfg.scoring.horizon) {
            forecasts.insert(asset.clone(), f);
        }
    }
    let candidates: Vec<EntityId> = forecasts.keys().cloned().collect();
    let exposures =
        risk_exposures(graph.collapsed(), delta, &candidates).map_err(|e| e.in_stage("scoring"))?;
    ScoreBoard::build(date, score_form(cfg), &forecasts, &exposures)
        .map_err(|e| e.in_stage("scoring"))
}

/// Zone extraction plus one backward search per ranked asset.
pub fn attribute_day(
    cfg: &PipelineConfig,
    graph: &FinGraph<f64>,
    date: NaiveDate,
    delta: &BTreeMap<EdgeKey, f64>,
    top: &[EntityId],
    perturbed: &BTreeSet<EntityId>,
) -> Result<(UnstableZone<f64>, RcaReport<f64>)> {
    let zone = unstable_zone(graph.collapsed(), delta, cfg.rca.theta, Some(date));
    let params = RcaParams {
        theta: cfg.rca.theta,
        h_max: cfg.rca.h_max,
        epsilon: cfg.rca.epsilon,
    };
    params.validate()?;
    let report = rca_report(date, graph.collapsed(), delta, top, &zone, perturbed, &params)
        .map_err(|e| e.in_stage("path search"))?;
    Ok((zone, report))
}

/// One full day: graph, curvature, flow, shift, zone, scores, ranking and
/// attribution, in that order. `frames` is the frame store to read from
/// (the dataset's own frames, or a perturbed copy); `perturbed` carries a
/// trial's ground-truth shock targets and is empty outside evaluation.
pub fn run_day(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    frames: &[MarketFrame<f64>],
    date: NaiveDate,
    perturbed: &BTreeSet<EntityId>,
) -> Result<DayOutputs> {
    let graph =
        build_day_graph(dataset, cfg, frames, date).map_err(|e| e.in_stage("graph assembly"))?;
    let initial_curvature = curvature_map(&graph, cfg.curvature_kind()?, &curvature_options(cfg))
        .map_err(|e| e.in_stage("curvature"))?;
    let trace = flow_day(&graph, cfg)?;
    let delta = day_delta(dataset, cfg, frames, date, &initial_curvature, &trace)?;
    let board = score_day(cfg, &graph, frames, date, &delta)?;
    let top = top_k(&board, cfg.scoring.k).map_err(|e| e.in_stage("ranking"))?;
    let (zone, report) = attribute_day(cfg, &graph, date, &delta, &top, perturbed)?;

    Ok(DayOutputs {
        date,
        graph,
        initial_curvature,
        trace,
        delta,
        zone,
        board,
        top,
        report,
    })
}

/// Artifact digests for one completed day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayManifest {
    /// File name -> SHA-256, for every artifact in the day directory.
    pub files: BTreeMap<String, String>,
}

/// Deterministic record of a run: inputs, per-day artifact digests and any
/// failures. Byte-identical across reruns on the same inputs and config;
/// wall-clock timings live in a separate file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub days: BTreeMap<NaiveDate, DayManifest>,
    pub failures: BTreeMap<NaiveDate, String>,
    pub partial: bool,
}

/// Write one day's artifacts under `dir` and return their digests.
pub fn write_day_artifacts(
    dir: &Path,
    day: &DayOutputs,
    config_hash: &str,
) -> Result<DayManifest> {
    let mut files = BTreeMap::new();
    let graph_export = GraphExport::new(&day.graph, config_hash);
    files.insert(
        "graph.json".to_string(),
        write_json(&dir.join("graph.json"), &graph_export)?,
    );
    files.insert(
        "curvature.csv".to_string(),
        write_curvature_csv(&dir.join("curvature.csv"), &day.initial_curvature, config_hash)?,
    );
    let flow_export = FlowExport::new(&day.trace, config_hash);
    files.insert(
        "flow.json".to_string(),
        write_json(&dir.join("flow.json"), &flow_export)?,
    );
    files.insert(
        "delta.csv".to_string(),
        write_delta_csv(&dir.join("delta.csv"), &day.delta, config_hash)?,
    );
    let rca_export = RcaExport::new(&day.report, &day.zone, config_hash);
    files.insert(
        "rca.json".to_string(),
        write_json(&dir.join("rca.json"), &rca_export)?,
    );
    files.insert(
        "rca.dot".to_string(),
        write_atomic(&dir.join("rca.dot"), render_rca_dot(&rca_export).as_bytes())?,
    );
    files.insert(
        "scoreboard.csv".to_string(),
        write_scoreboard_csv(&dir.join("scoreboard.csv"), &day.board, config_hash)?,
    );
    let top_entries: Vec<crate::scoring::ScoreEntry<f64>> = day
        .board
        .entries
        .iter()
        .take(day.top.len())
        .cloned()
        .collect();
    files.insert(
        "topk.csv".to_string(),
        write_topk_csv(&dir.join("topk.csv"), day.date, &top_entries, config_hash)?,
    );
    Ok(DayManifest { files })
}

/// Run every scoreable day in the configured range, writing artifacts under
/// `out_dir`. Failing days are recorded in the manifest and skipped; the
/// manifest is marked partial when any day failed.
pub fn run_range(dataset: &Dataset, cfg: &PipelineConfig, out_dir: &Path) -> Result<RunManifest> {
    let none = BTreeSet::new();
    run_range_with(dataset, cfg, out_dir, &dataset.frames, &none)
}

/// `run_range` over an explicit frame store (for example a shocked copy)
/// with ground-truth perturbation targets passed through to attribution.
pub fn run_range_with(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    out_dir: &Path,
    frames: &[MarketFrame<f64>],
    perturbed: &BTreeSet<EntityId>,
) -> Result<RunManifest> {
    cfg.validate()?;
    let config_hash = cfg.config_hash();
    let dates = dataset.scoreable_dates(cfg);
    if dates.is_empty() {
        return Err(CoreError::Data(
            "no scoreable days in the configured range".into(),
        ));
    }

    let mut days = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut timings: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    let started = Instant::now();
    for &date in &dates {
        let day_started = Instant::now();
        match run_day(dataset, cfg, frames, date, perturbed) {
            Ok(day) => {
                let dir = out_dir.join("days").join(date.to_string());
                let manifest = write_day_artifacts(&dir, &day, &config_hash)?;
                days.insert(date, manifest);
            }
            Err(e) => {
                log::error!("{date} failed: {e}");
                failures.insert(date, e.to_string());
            }
        }
        timings.insert(date, day_started.elapsed().as_millis() as u64);
    }

    let mut inputs = dataset.input_digests.clone();
    inputs.insert(
        "config".to_string(),
        write_json(&out_dir.join("config.json"), cfg)?,
    );

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        config_hash,
        inputs,
        partial: !failures.is_empty(),
        days,
        failures,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;

    #[derive(Serialize)]
    struct Timings {
        total_millis: u64,
        days: BTreeMap<NaiveDate, u64>,
    }
    write_json(
        &out_dir.join("timings.json"),
        &Timings {
            total_millis: started.elapsed().as_millis() as u64,
            days: timings,
        },
    )?;

    Ok(manifest)
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(CoreError::Schema {
                path: path.to_path_buf(),
                expected: SCHEMA_VERSION,
                found: manifest.schema_version.to_string(),
            });
        }
        Ok(manifest)
    }
}
