//! Synthetic shock evaluation: perturb volatility and sentiment on sampled
//! targets, rerun the pipeline, and measure ranking quality (NDCG@10),
//! ranking stability (Top-10 Volatility) and attribution quality (the
//! fraction of trials whose paths reach a truly shocked node).

use crate::entity::EntityId;
use crate::error::{CoreError, Result};
use crate::market::MarketFrame;
use crate::num::{real, Real};
use crate::pipeline::config::{PipelineConfig, SCHEMA_VERSION};
use crate::pipeline::run::{run_day, Dataset, DayOutputs};
use crate::rca::{rca_fidelity, TrialAttribution};
use chrono::NaiveDate;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// One trial's perturbation: which assets are hit and how hard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockSpec {
    pub targets: BTreeSet<EntityId>,
    /// Realised volatility is multiplied by this; must exceed 1.
    pub vol_multiplier: f64,
    /// Added to sentiment, then clamped to [-1, 1]; must be non-positive.
    pub sentiment_delta: f64,
}

impl ShockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(CoreError::Config("a shock needs at least one target".into()));
        }
        if !(self.vol_multiplier > 1.0 && self.vol_multiplier.is_finite()) {
            return Err(CoreError::Config(format!(
                "vol_multiplier must be a finite value above 1, got {}",
                self.vol_multiplier
            )));
        }
        if !(self.sentiment_delta <= 0.0) || !self.sentiment_delta.is_finite() {
            return Err(CoreError::Config(format!(
                "sentiment_delta must be finite and non-positive, got {}",
                self.sentiment_delta
            )));
        }
        Ok(())
    }
}

/// Apply a shock to every frame: target assets get their volatility
/// multiplied and their sentiment shifted (clamped to [-1, 1]). Errors if a
/// target appears in no frame.
pub fn inject_shock<F: Real>(
    frames: &[MarketFrame<F>],
    spec: &ShockSpec,
) -> Result<Vec<MarketFrame<F>>> {
    spec.validate()?;
    let mult = real::<F>(spec.vol_multiplier);
    let delta = real::<F>(spec.sentiment_delta);
    let mut seen: BTreeSet<&EntityId> = BTreeSet::new();
    let mut out = frames.to_vec();
    for frame in &mut out {
        for target in &spec.targets {
            if let Some(fv) = frame.features.get_mut(target) {
                seen.insert(target);
                fv.realised_vol *= mult;
                fv.sentiment = (fv.sentiment + delta)
                    .max(-F::one())
                    .min(F::one());
            }
        }
    }
    for target in &spec.targets {
        if !seen.contains(target) {
            return Err(CoreError::Data(format!(
                "shock target {target} appears in no frame"
            )));
        }
    }
    Ok(out)
}

/// NDCG@10: DCG of the first ten ranked assets against the ideal ordering
/// of the full gain pool, with linear gains and a log2(position + 2)
/// discount. Zero when the pool carries no gain at all.
pub fn ndcg_at_10(ranking: &[EntityId], gains: &BTreeMap<EntityId, f64>) -> Result<f64> {
    if ranking.is_empty() {
        return Err(CoreError::Data("cannot score an empty ranking".into()));
    }
    for (asset, &g) in gains {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(CoreError::Data(format!(
                "gain for {asset} must be finite and non-negative, got {g}"
            )));
        }
    }
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(10)
        .enumerate()
        .map(|(i, asset)| gains.get(asset).copied().unwrap_or(0.0) / discount(i))
        .sum();
    let mut ideal: Vec<f64> = gains.values().copied().collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).expect("finite gains"));
    let idcg: f64 = ideal
        .iter()
        .take(10)
        .enumerate()
        .map(|(i, g)| g / discount(i))
        .sum();
    if idcg == 0.0 {
        return Ok(0.0);
    }
    Ok(dcg / idcg)
}

/// Quintile relevance gains from realized returns: rank the pool by return
/// (ties toward the smaller id) and pay 4 for the top fifth down to 0 for
/// the bottom fifth.
pub fn quintile_gains(returns: &BTreeMap<EntityId, f64>) -> BTreeMap<EntityId, f64> {
    let mut order: Vec<(&EntityId, f64)> = returns.iter().map(|(a, &r)| (a, r)).collect();
    order.sort_by(|(ia, ra), (ib, rb)| {
        rb.partial_cmp(ra)
            .expect("finite returns")
            .then_with(|| ia.cmp(ib))
    });
    let n = order.len();
    order
        .into_iter()
        .enumerate()
        .map(|(pos, (asset, _))| (asset.clone(), (4 - pos * 5 / n) as f64))
        .collect()
}

fn population_std(values: &[f64]) -> f64 {
    // The naive formula leaves rounding residue even when every value is
    // identical; identical samples have zero dispersion by definition.
    if values.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Dispersion of the mean top-10 score across trials; needs at least two
/// trials to mean anything.
pub fn top10_volatility(per_trial_means: &[f64]) -> Result<f64> {
    if per_trial_means.len() < 2 {
        return Err(CoreError::Data(format!(
            "top-10 volatility needs at least 2 trials, got {}",
            per_trial_means.len()
        )));
    }
    Ok(population_std(per_trial_means))
}

/// One shock trial's outcome, aggregated over the evaluation days.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub targets: BTreeSet<EntityId>,
    /// Mean NDCG@10 of the perturbed ranking over the evaluation days.
    pub ndcg: f64,
    /// Mean over days of the mean top-10 score.
    pub top10_mean: f64,
    /// Mean over days of the within-list top-10 score spread.
    pub within_list_std: f64,
    /// Whether any attribution path ended on a shocked node.
    pub hit: bool,
}

/// Aggregate metrics for one protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub trials: usize,
    /// Evaluation days each trial ran over.
    pub days: usize,
    /// Mean NDCG@10 of the unperturbed ranking.
    pub ndcg_baseline: f64,
    /// Mean NDCG@10 across trials.
    pub ndcg: f64,
    /// Std of the mean top-10 score across trials.
    pub top10_volatility: f64,
    /// Mean within-list top-10 score spread (secondary diagnostic).
    pub within_list_volatility: f64,
    /// Fraction of trials whose paths reached a shocked node; absent when
    /// no trials ran.
    pub rca_fidelity: Option<f64>,
}

fn top10_scores(day: &DayOutputs) -> Vec<f64> {
    day.board.entries.iter().take(10).map(|e| e.score).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Pick `n` distinct targets from the pool (kept in sorted order) with a
/// partial Fisher-Yates shuffle driven by the protocol RNG.
fn sample_targets(pool: &[EntityId], n: usize, rng: &mut ChaCha8Rng) -> BTreeSet<EntityId> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    for i in 0..n {
        let j = i + (rng.next_u64() as usize) % (idx.len() - i);
        idx.swap(i, j);
    }
    idx[..n].iter().map(|&i| pool[i].clone()).collect()
}

/// Days the protocol evaluates: scoreable, inside the eval range, and with
/// a full forward-return window after them.
pub fn evaluation_dates(dataset: &Dataset, cfg: &PipelineConfig) -> Result<Vec<NaiveDate>> {
    let horizon = cfg.scoring.horizon;
    let dates: Vec<NaiveDate> = dataset
        .scoreable_dates(cfg)
        .into_iter()
        .filter(|d| cfg.eval.eval_start.is_none_or(|s| *d >= s))
        .filter(|d| cfg.eval.eval_end.is_none_or(|e| *d <= e))
        .filter(|d| {
            dataset
                .calendar_index(*d)
                .is_some_and(|i| i + horizon < dataset.calendar.len())
        })
        .collect();
    if dates.is_empty() {
        return Err(CoreError::Data(
            "no evaluation days: none of the scoreable days has a full forward window".into(),
        ));
    }
    Ok(dates)
}

fn resolve_target_pool(dataset: &Dataset, cfg: &PipelineConfig) -> Result<Vec<EntityId>> {
    let pool: Vec<EntityId> = if cfg.eval.target_pool.is_empty() {
        dataset.universe.clone()
    } else {
        let known: BTreeSet<&EntityId> = dataset.universe.iter().collect();
        let mut pool = Vec::new();
        for name in &cfg.eval.target_pool {
            let id = EntityId::from(name.as_str());
            if !known.contains(&id) {
                return Err(CoreError::Config(format!(
                    "target_pool entry {id} is not a priced asset"
                )));
            }
            pool.push(id);
        }
        pool.sort();
        pool.dedup();
        pool
    };
    if cfg.eval.targets_per_trial > pool.len() {
        return Err(CoreError::Config(format!(
            "targets_per_trial {} exceeds the target pool size {}",
            cfg.eval.targets_per_trial,
            pool.len()
        )));
    }
    Ok(pool)
}

/// Run the shock protocol: seeded target sampling, one perturbed pipeline
/// run per trial, metrics over all trials. In control mode the trial runs
/// use the unperturbed frames, so every trial reproduces the baseline and
/// Top-10 Volatility is exactly zero.
pub fn run_protocol(
    dataset: &Dataset,
    cfg: &PipelineConfig,
) -> Result<(MetricsReport, Vec<TrialResult>)> {
    cfg.validate()?;
    let dates = evaluation_dates(dataset, cfg)?;
    let pool = resolve_target_pool(dataset, cfg)?;
    let config_hash = cfg.config_hash();

    let mut gains_by_date: BTreeMap<NaiveDate, BTreeMap<EntityId, f64>> = BTreeMap::new();
    for &date in &dates {
        let forward = dataset.forward_returns(date, cfg.scoring.horizon)?;
        if forward.is_empty() {
            return Err(CoreError::Data(format!(
                "no asset has a realized forward return on {date}"
            )));
        }
        gains_by_date.insert(date, quintile_gains(&forward));
    }

    let none = BTreeSet::new();
    let mut baseline_ndcgs = Vec::with_capacity(dates.len());
    for &date in &dates {
        let day = run_day(dataset, cfg, &dataset.frames, date, &none)?;
        baseline_ndcgs.push(ndcg_at_10(&day.board.ranking(), &gains_by_date[&date])?);
    }
    let ndcg_baseline = mean(&baseline_ndcgs);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.eval.seed);
    let mut results = Vec::with_capacity(cfg.eval.trials);
    let mut attributions = Vec::with_capacity(cfg.eval.trials);
    for trial in 0..cfg.eval.trials {
        let targets = sample_targets(&pool, cfg.eval.targets_per_trial, &mut rng);
        let spec = ShockSpec {
            targets: targets.clone(),
            vol_multiplier: cfg.eval.vol_multiplier,
            sentiment_delta: cfg.eval.sentiment_delta,
        };
        let shocked;
        let frames: &[MarketFrame<f64>] = if cfg.eval.control {
            &dataset.frames
        } else {
            shocked = inject_shock(&dataset.frames, &spec)?;
            &shocked
        };

        let mut ndcgs = Vec::with_capacity(dates.len());
        let mut top10_means = Vec::with_capacity(dates.len());
        let mut within_stds = Vec::with_capacity(dates.len());
        let mut terminals = Vec::new();
        for &date in &dates {
            let day = run_day(dataset, cfg, frames, date, &targets)?;
            ndcgs.push(ndcg_at_10(&day.board.ranking(), &gains_by_date[&date])?);
            let scores = top10_scores(&day);
            if scores.is_empty() {
                return Err(CoreError::Data(format!("empty scoreboard on {date}")));
            }
            top10_means.push(mean(&scores));
            within_stds.push(population_std(&scores));
            terminals.extend(day.report.terminals());
        }
        let attribution = TrialAttribution {
            perturbed: targets.clone(),
            terminals,
        };
        results.push(TrialResult {
            trial,
            targets,
            ndcg: mean(&ndcgs),
            top10_mean: mean(&top10_means),
            within_list_std: mean(&within_stds),
            hit: attribution.hit(),
        });
        attributions.push(attribution);
    }

    let per_trial_means: Vec<f64> = results.iter().map(|r| r.top10_mean).collect();
    let top10_vol = if per_trial_means.len() >= 2 {
        top10_volatility(&per_trial_means)?
    } else {
        log::warn!("single trial: reporting top-10 volatility as 0");
        0.0
    };
    let report = MetricsReport {
        schema_version: SCHEMA_VERSION,
        config_hash,
        trials: results.len(),
        days: dates.len(),
        ndcg_baseline,
        ndcg: mean(&results.iter().map(|r| r.ndcg).collect::<Vec<_>>()),
        top10_volatility: top10_vol,
        within_list_volatility: mean(
            &results.iter().map(|r| r.within_list_std).collect::<Vec<_>>(),
        ),
        rca_fidelity: rca_fidelity(&attributions),
    };
    Ok((report, results))
}

/// Which hyperparameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Score blend weight; forces the alpha score form.
    Alpha,
    /// Zone threshold θ.
    Theta,
}

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: MetricsReport,
}

/// Rerun the protocol once per grid value, varying a single parameter.
pub fn sensitivity_sweep(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(CoreError::Config("sweep needs at least one grid value".into()));
    }
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        let mut point_cfg = cfg.clone();
        match param {
            SweepParam::Alpha => {
                point_cfg.scoring.form = "alpha".into();
                point_cfg.scoring.alpha = value;
            }
            SweepParam::Theta => point_cfg.rca.theta = value,
        }
        point_cfg.validate()?;
        let (report, _) = run_protocol(dataset, &point_cfg)?;
        out.push(SweepPoint { value, report });
    }
    Ok(out)
}

/// `trial,targets,ndcg,top10_mean,within_list_std,hit` rows with the usual
/// provenance comment line.
pub fn write_trials_csv(
    path: &std::path::Path,
    trials: &[TrialResult],
    config_hash: &str,
) -> Result<String> {
    let mut out = format!("# schema_version={SCHEMA_VERSION} config_hash={config_hash}\n");
    out.push_str("trial,targets,ndcg,top10_mean,within_list_std,hit\n");
    for t in trials {
        let targets: Vec<&str> = t.targets.iter().map(|t| t.as_str()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.trial,
            targets.join("|"),
            t.ndcg,
            t.top10_mean,
            t.within_list_std,
            t.hit
        ));
    }
    crate::pipeline::artifacts::write_atomic(path, out.as_bytes())
}

/// Human-readable recap of a protocol run.
pub fn summary_markdown(report: &MetricsReport, trials: &[TrialResult]) -> String {
    let mut out = String::new();
    out.push_str("# Shock evaluation\n\n");
    out.push_str(&format!("- config hash: `{}`\n", report.config_hash));
    out.push_str(&format!("- trials: {}\n", report.trials));
    out.push_str(&format!("- evaluation days: {}\n\n", report.days));
    out.push_str("| metric | value |\n|---|---|\n");
    out.push_str(&format!("| NDCG@10 (baseline) | {:.6} |\n", report.ndcg_baseline));
    out.push_str(&format!("| NDCG@10 (shocked) | {:.6} |\n", report.ndcg));
    out.push_str(&format!("| Top-10 Volatility | {:.6} |\n", report.top10_volatility));
    out.push_str(&format!(
        "| Within-list volatility | {:.6} |\n",
        report.within_list_volatility
    ));
    match report.rca_fidelity {
        Some(f) => out.push_str(&format!("| RCA fidelity | {f:.6} |\n")),
        None => out.push_str("| RCA fidelity | n/a |\n"),
    }
    out.push_str("\n| trial | targets | NDCG@10 | top-10 mean | hit |\n|---|---|---|---|---|\n");
    for t in trials {
        let targets: Vec<&str> = t.targets.iter().map(|t| t.as_str()).collect();
        out.push_str(&format!(
            "| {} | {} | {:.6} | {:.6} | {} |\n",
            t.trial,
            targets.join(", "),
            t.ndcg,
            t.top10_mean,
            t.hit
        ));
    }
    out
}
