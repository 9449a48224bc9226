//! Forecasts, structural risk exposure, combined scores and Top-K ranking.
//!
//! Two scoring forms exist and are never mixed within a run: the default
//! blends a return forecast with max-normalized risk,
//! s = α·r̂ − (1−α)·risk, while the alternative charges raw exposure
//! directly, s = r̂ − λ·ρ.

use crate::entity::{EdgeKey, EntityId};
use crate::error::{CoreError, Result};
use crate::graph::WeightedGraph;
use crate::market::MarketFrame;
use crate::num::{real, to_f64, Real};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnForecast<F> {
    pub asset: EntityId,
    pub horizon: usize,
    pub value: F,
}

/// A pluggable return forecaster over trailing frames.
pub trait Forecaster<F: Real> {
    fn name(&self) -> &'static str;

    /// Forecast the `horizon`-day return for `asset`, or `None` when the
    /// trailing frames carry too little history.
    fn forecast(
        &self,
        frames: &[MarketFrame<F>],
        asset: &EntityId,
        horizon: usize,
    ) -> Option<ReturnForecast<F>>;
}

fn trailing_features<'a, F>(
    frames: &'a [MarketFrame<F>],
    asset: &EntityId,
    count: usize,
) -> Option<Vec<&'a crate::market::FeatureVector<F>>> {
    let present: Vec<&crate::market::FeatureVector<F>> = frames
        .iter()
        .filter_map(|f| f.features.get(asset))
        .collect();
    if present.len() < count {
        return None;
    }
    Some(present[present.len() - count..].to_vec())
}

/// Momentum: mean of the asset's last `horizon` daily log returns, scaled
/// by the horizon.
pub fn momentum_forecast<F: Real>(
    frames: &[MarketFrame<F>],
    asset: &EntityId,
    horizon: usize,
) -> Option<ReturnForecast<F>> {
    if horizon < 1 {
        return None;
    }
    let recent = trailing_features(frames, asset, horizon)?;
    let h = real::<F>(horizon as f64);
    let mean = recent.iter().map(|fv| fv.log_return).sum::<F>() / h;
    Some(ReturnForecast {
        asset: asset.clone(),
        horizon,
        value: mean * h,
    })
}

/// The default forecaster.
#[derive(Clone, Copy, Debug, Default)]
pub struct MomentumForecaster;

impl<F: Real> Forecaster<F> for MomentumForecaster {
    fn name(&self) -> &'static str {
        "momentum"
    }

    fn forecast(
        &self,
        frames: &[MarketFrame<F>],
        asset: &EntityId,
        horizon: usize,
    ) -> Option<ReturnForecast<F>> {
        momentum_forecast(frames, asset, horizon)
    }
}

/// Momentum tilted by recent sentiment and penalized by recent realised
/// volatility: r̂ = momentum + tilt·mean(sentiment) − penalty·mean(vol).
/// This forecaster reacts to volatility and sentiment shocks, which pure
/// momentum ignores.
#[derive(Clone, Copy, Debug)]
pub struct VolAdjustedForecaster<F> {
    pub vol_penalty: F,
    pub sentiment_tilt: F,
}

impl<F: Real> Default for VolAdjustedForecaster<F> {
    fn default() -> Self {
        VolAdjustedForecaster {
            vol_penalty: real(0.01),
            sentiment_tilt: real(0.01),
        }
    }
}

impl<F: Real> Forecaster<F> for VolAdjustedForecaster<F> {
    fn name(&self) -> &'static str {
        "vol_adjusted"
    }

    fn forecast(
        &self,
        frames: &[MarketFrame<F>],
        asset: &EntityId,
        horizon: usize,
    ) -> Option<ReturnForecast<F>> {
        let base = momentum_forecast(frames, asset, horizon)?;
        let recent = trailing_features(frames, asset, horizon)?;
        let h = real::<F>(horizon as f64);
        let mean_sentiment = recent.iter().map(|fv| fv.sentiment).sum::<F>() / h;
        let mean_vol = recent.iter().map(|fv| fv.realised_vol).sum::<F>() / h;
        Some(ReturnForecast {
            value: base.value + self.sentiment_tilt * mean_sentiment - self.vol_penalty * mean_vol,
            ..base
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskExposure<F> {
    pub asset: EntityId,
    /// Σ |Δκ| over the asset's incident edges.
    pub raw: F,
    /// Raw exposure divided by the day's maximum raw exposure, in [0, 1];
    /// zero when every asset's exposure is zero.
    pub normalized: F,
}

/// Raw structural exposure of one asset: the sum of |Δκ| over its incident
/// edges (edges without a Δκ value contribute nothing).
pub fn risk_exposure_raw<F: Real>(
    graph: &WeightedGraph<F>,
    delta: &BTreeMap<EdgeKey, F>,
    asset: &EntityId,
) -> Result<F> {
    let idx = graph
        .index_of(asset)
        .ok_or_else(|| CoreError::Graph(format!("asset {asset} not in graph")))?;
    let mut sum = F::zero();
    for &(_, e) in graph.neighbors(idx) {
        if let Some(&d) = delta.get(&graph.edge_key_at(e)) {
            sum += d.abs();
        }
    }
    Ok(sum)
}

/// Exposures for a day's asset list, normalized by the maximum raw value
/// within that list.
pub fn risk_exposures<F: Real>(
    graph: &WeightedGraph<F>,
    delta: &BTreeMap<EdgeKey, F>,
    assets: &[EntityId],
) -> Result<BTreeMap<EntityId, RiskExposure<F>>> {
    let mut raw = BTreeMap::new();
    for asset in assets {
        raw.insert(asset.clone(), risk_exposure_raw(graph, delta, asset)?);
    }
    let max = raw
        .values()
        .copied()
        .fold(F::zero(), |acc, v| if v > acc { v } else { acc });
    let out = raw
        .into_iter()
        .map(|(asset, r)| {
            let normalized = if max > F::zero() { r / max } else { F::zero() };
            (
                asset.clone(),
                RiskExposure {
                    asset,
                    raw: r,
                    normalized,
                },
            )
        })
        .collect();
    Ok(out)
}

/// Blended score s = α·r̂ − (1−α)·risk with α in [0, 1].
pub fn score<F: Real>(alpha: F, r_hat: F, normalized_risk: F) -> Result<F> {
    if !(alpha >= F::zero() && alpha <= F::one()) {
        return Err(CoreError::Config(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(alpha * r_hat - (F::one() - alpha) * normalized_risk)
}

/// Exposure-charged score s = r̂ − λ·ρ with λ > 0 and raw ρ.
pub fn lambda_score<F: Real>(lambda: F, r_hat: F, raw_rho: F) -> Result<F> {
    if !(lambda > F::zero()) {
        return Err(CoreError::Config(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(r_hat - lambda * raw_rho)
}

/// Which scoring rule a board was built with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreForm<F> {
    /// s = α·r̂ − (1−α)·normalized risk.
    Alpha { alpha: F },
    /// s = r̂ − λ·raw ρ.
    Lambda { lambda: F },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry<F> {
    pub asset: EntityId,
    pub r_hat: F,
    /// Normalized risk under the alpha form, raw ρ under the lambda form.
    pub risk: F,
    pub score: F,
}

/// Scored assets for one day, sorted by score descending with ties broken
/// by asset id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBoard<F> {
    pub date: NaiveDate,
    pub form: ScoreForm<F>,
    pub entries: Vec<ScoreEntry<F>>,
}

impl<F: Real> ScoreBoard<F> {
    /// Score every forecast asset and sort. Assets appear in the board only
    /// when both a forecast and an exposure exist for them.
    pub fn build(
        date: NaiveDate,
        form: ScoreForm<F>,
        forecasts: &BTreeMap<EntityId, ReturnForecast<F>>,
        exposures: &BTreeMap<EntityId, RiskExposure<F>>,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(forecasts.len());
        for (asset, forecast) in forecasts {
            let exposure = match exposures.get(asset) {
                Some(e) => e,
                None => {
                    log::warn!("asset {asset} has a forecast but no exposure, excluded");
                    continue;
                }
            };
            let (risk, s) = match form {
                ScoreForm::Alpha { alpha } => {
                    let s = score(alpha, forecast.value, exposure.normalized)?;
                    (exposure.normalized, s)
                }
                ScoreForm::Lambda { lambda } => {
                    let s = lambda_score(lambda, forecast.value, exposure.raw)?;
                    (exposure.raw, s)
                }
            };
            if !s.is_finite() {
                return Err(CoreError::Data(format!(
                    "non-finite score {} for {asset} on {date}",
                    to_f64(s)
                )));
            }
            entries.push(ScoreEntry {
                asset: asset.clone(),
                r_hat: forecast.value,
                risk,
                score: s,
            });
        }
        entries.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then_with(|| a.asset.cmp(&b.asset))
        });
        Ok(ScoreBoard {
            date,
            form,
            entries,
        })
    }

    /// Ranked asset ids, best first.
    pub fn ranking(&self) -> Vec<EntityId> {
        self.entries.iter().map(|e| e.asset.clone()).collect()
    }
}

/// First `k` assets of the board; the whole board when it is smaller.
pub fn top_k<F: Real>(board: &ScoreBoard<F>, k: usize) -> Result<Vec<EntityId>> {
    if k < 1 {
        return Err(CoreError::Config(format!("top_k must be at least 1, got {k}")));
    }
    if board.entries.len() < k {
        log::info!(
            "top_k: board for {} holds {} assets, fewer than k = {k}",
            board.date,
            board.entries.len()
        );
    }
    Ok(board.entries.iter().take(k).map(|e| e.asset.clone()).collect())
}
