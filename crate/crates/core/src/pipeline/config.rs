//! Run configuration: TOML file, defaults, validation and the provenance
//! hash embedded in every artifact.
//!
//! Paths inside the file are kept verbatim (they participate in the config
//! hash) and resolved against the config file's directory only when data is
//! loaded. Command-line overrides are applied by the caller before
//! validation; the hash always reflects the effective configuration.

use crate::curvature::CurvatureKind;
use crate::error::{CoreError, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Schema version stamped on every artifact this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Prices CSV (`date,ticker,close,volume`); required.
    pub prices: String,
    /// Sentiment CSV (`date,ticker,polarity`).
    pub sentiment: Option<String>,
    /// Macro CSV (`date,indicator_id,value`).
    pub macros: Option<String>,
    /// Knowledge links CSV (`src,dst,relation,weight[,valid_from,valid_to]`).
    pub knowledge: Option<String>,
    /// Embeddings text file (id then floats per line).
    pub embeddings: Option<String>,
    /// Co-mention CSV (`date,entity_a,entity_b`).
    pub comention: Option<String>,
    /// Normalization training range; defaults to the warm-up period
    /// (calendar start through the day before frames begin).
    pub training_start: Option<NaiveDate>,
    pub training_end: Option<NaiveDate>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatesSection {
    /// First day to score (defaults to the earliest scoreable day).
    pub start: Option<NaiveDate>,
    /// Last day to score (defaults to the latest scoreable day).
    pub end: Option<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    /// Trading days of warm-up before the first frame.
    pub min_history: usize,
    /// Rolling window for realised volatility, in returns.
    pub vol_window: usize,
    /// Trailing frames aligned per pair for correlation edges.
    pub corr_window: usize,
    /// Longest forward-filled gap, in days.
    pub ffill_limit: usize,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            min_history: 252,
            vol_window: 30,
            corr_window: 30,
            ffill_limit: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    /// Edges each node keeps per edge kind.
    pub top_k: usize,
    /// Optional global weight floor applied before top-k selection.
    pub weight_floor: Option<f64>,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            top_k: 10,
            weight_floor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureSection {
    /// "ollivier" or "forman".
    pub kind: String,
    pub p_idle: f64,
    /// Add the triangle term to Forman curvature.
    pub augmented_forman: bool,
}

impl Default for CurvatureSection {
    fn default() -> Self {
        CurvatureSection {
            kind: "forman".into(),
            p_idle: 0.5,
            augmented_forman: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub iterations: usize,
    pub eta: f64,
    pub renormalize: bool,
    /// Recompute curvature every iteration (false = frozen starting
    /// curvature drives all steps).
    pub recompute: bool,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            iterations: 50,
            eta: 0.1,
            renormalize: true,
            recompute: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcaSection {
    pub theta: f64,
    pub h_max: usize,
    pub epsilon: f64,
    /// Where Δκ comes from: "flow" (within-snapshot flow shift) or
    /// "cross_day" (κ today minus κ one horizon earlier).
    pub shift_source: String,
}

impl Default for RcaSection {
    fn default() -> Self {
        RcaSection {
            theta: -0.05,
            h_max: 6,
            epsilon: 0.01,
            shift_source: "flow".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    pub alpha: f64,
    /// Forecast horizon H in trading days.
    pub horizon: usize,
    /// Recommendation list size K.
    pub k: usize,
    /// "alpha" (s = α·r̂ − (1−α)·risk) or "lambda" (s = r̂ − λ·ρ).
    pub form: String,
    pub lambda: f64,
    /// "momentum" or "vol_adjusted".
    pub forecaster: String,
    /// Volatility penalty used by the vol_adjusted forecaster.
    pub vol_penalty: f64,
    /// Sentiment tilt used by the vol_adjusted forecaster.
    pub sentiment_tilt: f64,
}

impl Default for ScoringSection {
    fn default() -> Self {
        ScoringSection {
            alpha: 0.7,
            horizon: 5,
            k: 10,
            form: "alpha".into(),
            lambda: 1.0,
            forecaster: "momentum".into(),
            vol_penalty: 0.01,
            sentiment_tilt: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub trials: usize,
    pub seed: u64,
    pub vol_multiplier: f64,
    pub sentiment_delta: f64,
    pub targets_per_trial: usize,
    /// Candidate shock targets; empty means every asset.
    pub target_pool: Vec<String>,
    pub eval_start: Option<NaiveDate>,
    pub eval_end: Option<NaiveDate>,
    /// No-shock control mode: the trial pipeline runs unperturbed.
    pub control: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            trials: 20,
            seed: 7,
            vol_multiplier: 3.0,
            sentiment_delta: -0.5,
            targets_per_trial: 1,
            target_pool: Vec::new(),
            eval_start: None,
            eval_end: None,
            control: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataSection,
    pub dates: DatesSection,
    pub features: FeaturesSection,
    pub graph: GraphSection,
    pub curvature: CurvatureSection,
    pub flow: FlowSection,
    pub rca: RcaSection,
    pub scoring: ScoringSection,
    pub eval: EvalSection,
}

/// Δκ source for downstream stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftSource {
    Flow,
    CrossDay,
}

impl PipelineConfig {
    /// Parse a TOML config file; returns the config and the directory its
    /// relative paths resolve against.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((cfg, base))
    }

    pub fn curvature_kind(&self) -> Result<CurvatureKind> {
        self.curvature.kind.parse()
    }

    pub fn shift_source(&self) -> Result<ShiftSource> {
        match self.rca.shift_source.as_str() {
            "flow" => Ok(ShiftSource::Flow),
            "cross_day" => Ok(ShiftSource::CrossDay),
            other => Err(CoreError::Config(format!(
                "unknown shift source {other:?} (want \"flow\" or \"cross_day\")"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.prices.is_empty() {
            return Err(CoreError::Config("data.prices is required".into()));
        }
        if self.features.min_history < 1 {
            return Err(CoreError::Config("features.min_history must be at least 1".into()));
        }
        if self.features.vol_window < 2 {
            return Err(CoreError::Config("features.vol_window must be at least 2".into()));
        }
        if self.features.corr_window < 2 {
            return Err(CoreError::Config("features.corr_window must be at least 2".into()));
        }
        if self.graph.top_k < 1 {
            return Err(CoreError::Config("graph.top_k must be at least 1".into()));
        }
        if let Some(floor) = self.graph.weight_floor {
            if !(floor > 0.0 && floor.is_finite()) {
                return Err(CoreError::Config(format!(
                    "graph.weight_floor must be positive and finite, got {floor}"
                )));
            }
        }
        self.curvature_kind()?;
        if !(0.0..1.0).contains(&self.curvature.p_idle) {
            return Err(CoreError::Config(format!(
                "curvature.p_idle must lie in [0, 1), got {}",
                self.curvature.p_idle
            )));
        }
        if !(self.flow.eta > 0.0 && self.flow.eta.is_finite()) {
            return Err(CoreError::Config(format!(
                "flow.eta must be positive and finite, got {}",
                self.flow.eta
            )));
        }
        if self.rca.h_max < 1 {
            return Err(CoreError::Config("rca.h_max must be at least 1".into()));
        }
        if !(self.rca.epsilon > 0.0) {
            return Err(CoreError::Config(format!(
                "rca.epsilon must be positive, got {}",
                self.rca.epsilon
            )));
        }
        if self.rca.theta.is_nan() {
            return Err(CoreError::Config("rca.theta must not be NaN".into()));
        }
        self.shift_source()?;
        match self.scoring.form.as_str() {
            "alpha" => {
                if !(0.0..=1.0).contains(&self.scoring.alpha) {
                    return Err(CoreError::Config(format!(
                        "scoring.alpha must lie in [0, 1], got {}",
                        self.scoring.alpha
                    )));
                }
            }
            "lambda" => {
                if !(self.scoring.lambda > 0.0) {
                    return Err(CoreError::Config(format!(
                        "scoring.lambda must be positive, got {}",
                        self.scoring.lambda
                    )));
                }
            }
            other => {
                return Err(CoreError::Config(format!(
                    "unknown scoring form {other:?} (want \"alpha\" or \"lambda\")"
                )))
            }
        }
        if self.scoring.horizon < 1 {
            return Err(CoreError::Config("scoring.horizon must be at least 1".into()));
        }
        if self.scoring.k < 1 {
            return Err(CoreError::Config("scoring.k must be at least 1".into()));
        }
        match self.scoring.forecaster.as_str() {
            "momentum" | "vol_adjusted" => {}
            other => {
                return Err(CoreError::Config(format!(
                    "unknown forecaster {other:?} (want \"momentum\" or \"vol_adjusted\")"
                )))
            }
        }
        if self.eval.trials < 1 {
            return Err(CoreError::Config("eval.trials must be at least 1".into()));
        }
        if !(self.eval.vol_multiplier > 1.0) {
            return Err(CoreError::Config(format!(
                "eval.vol_multiplier must exceed 1, got {}",
                self.eval.vol_multiplier
            )));
        }
        if self.eval.sentiment_delta > 0.0 {
            return Err(CoreError::Config(format!(
                "eval.sentiment_delta must be non-positive, got {}",
                self.eval.sentiment_delta
            )));
        }
        if self.eval.targets_per_trial < 1 {
            return Err(CoreError::Config("eval.targets_per_trial must be at least 1".into()));
        }
        if let (Some(s), Some(e)) = (self.dates.start, self.dates.end) {
            if s > e {
                return Err(CoreError::Config(format!(
                    "dates.start {s} is after dates.end {e}"
                )));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON serialization; the provenance tag
    /// written into every artifact.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
