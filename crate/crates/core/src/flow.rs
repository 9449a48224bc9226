//! Discrete Ricci flow on edge weights.
//!
//! Each iteration applies the explicit Euler rule w' = w · (1 − η·κ) to
//! every edge, optionally rescales the weights back to their initial total,
//! and recomputes curvature. The curvature shift Δκ compares the last
//! iteration's curvature against the starting one.

use crate::curvature::{
    collapsed_curvature_map, edge_curvatures, CurvatureKind, CurvatureMap, CurvatureOptions,
};
use crate::entity::EdgeKey;
use crate::error::{CoreError, Result};
use crate::graph::{FinGraph, WeightedGraph};
use crate::num::{real, to_f64, Real};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig<F> {
    /// Euler step size, > 0. The run aborts if any edge would see
    /// η·|κ| ≥ 1, which would push its weight through zero.
    pub eta: F,
    pub iterations: usize,
    /// Rescale weights after each step so their total stays at the initial
    /// value.
    pub renormalize: bool,
    pub kind: CurvatureKind,
    pub options: CurvatureOptions<F>,
    /// Recompute curvature every iteration; when false the starting
    /// curvature drives every step (cheaper, coarser) and only the final
    /// map is recomputed.
    pub recompute: bool,
}

impl<F: Real> Default for FlowConfig<F> {
    fn default() -> Self {
        FlowConfig {
            eta: real(0.1),
            iterations: 50,
            renormalize: true,
            kind: CurvatureKind::Forman,
            options: CurvatureOptions::default(),
            recompute: true,
        }
    }
}

impl<F: Real> FlowConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > F::zero()) {
            return Err(CoreError::Config(format!(
                "flow step size must be positive and finite, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Weights and curvature after one iteration (iteration 0 is the input
/// graph).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState<F> {
    pub iteration: usize,
    pub weights: BTreeMap<EdgeKey, F>,
    pub kappa: BTreeMap<EdgeKey, F>,
}

/// Full record of a flow run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace<F> {
    pub date: Option<NaiveDate>,
    pub kind: CurvatureKind,
    /// One state per iteration, starting with iteration 0.
    pub states: Vec<FlowState<F>>,
    pub initial: CurvatureMap<F>,
    pub final_kappa: CurvatureMap<F>,
    /// κ_final − κ_initial per edge; keys are exactly the graph's edges.
    pub delta: BTreeMap<EdgeKey, F>,
}

/// One Euler step over all edges, in place. `kappas` is indexed like the
/// graph's edges.
pub fn flow_step<F: Real>(graph: &mut WeightedGraph<F>, kappas: &[F], eta: F) -> Result<()> {
    debug_assert_eq!(kappas.len(), graph.edge_count());
    for e in 0..graph.edge_count() as u32 {
        let kappa = kappas[e as usize];
        let product = eta * kappa.abs();
        if product >= F::one() {
            let key = graph.edge_key_at(e);
            let (u, v) = key.endpoints();
            return Err(CoreError::StepSize {
                u: u.clone(),
                v: v.clone(),
                kappa: to_f64(kappa),
                product: to_f64(product),
            });
        }
        let w = graph.weight_at(e) * (F::one() - eta * kappa);
        graph.set_weight_at(e, w);
    }
    Ok(())
}

/// Scale all weights by one global factor so they sum to `target_total`.
pub fn renormalize_weights<F: Real>(graph: &mut WeightedGraph<F>, target_total: F) -> Result<()> {
    let current = graph.total_weight();
    if !(current > F::zero()) {
        return Err(CoreError::Graph(format!(
            "cannot renormalize: total weight {current} is not positive"
        )));
    }
    graph.scale_weights(target_total / current);
    Ok(())
}

fn check_weights<F: Real>(graph: &WeightedGraph<F>, iteration: usize) -> Result<()> {
    for e in 0..graph.edge_count() as u32 {
        let w = graph.weight_at(e);
        if !w.is_finite() {
            let key = graph.edge_key_at(e);
            return Err(CoreError::NonFinite {
                u: key.first().clone(),
                v: key.second().clone(),
                iteration,
            });
        }
        if w <= F::zero() {
            return Err(CoreError::Graph(format!(
                "weight {w} on edge {} not positive at iteration {iteration}",
                graph.edge_key_at(e)
            )));
        }
    }
    Ok(())
}

fn snapshot<F: Real>(graph: &WeightedGraph<F>, kappas: &[F], iteration: usize) -> FlowState<F> {
    let mut weights = BTreeMap::new();
    let mut kappa = BTreeMap::new();
    for e in 0..graph.edge_count() as u32 {
        let key = graph.edge_key_at(e);
        weights.insert(key.clone(), graph.weight_at(e));
        kappa.insert(key, kappas[e as usize]);
    }
    FlowState {
        iteration,
        weights,
        kappa,
    }
}

/// Run the flow on the day's collapsed graph.
pub fn simulate_flow<F: Real>(graph: &FinGraph<F>, cfg: &FlowConfig<F>) -> Result<FlowTrace<F>> {
    simulate_flow_collapsed(graph.collapsed(), Some(graph.date()), cfg)
}

/// Run the flow on a bare weighted graph.
pub fn simulate_flow_collapsed<F: Real>(
    start: &WeightedGraph<F>,
    date: Option<NaiveDate>,
    cfg: &FlowConfig<F>,
) -> Result<FlowTrace<F>> {
    cfg.validate()?;
    if start.edge_count() == 0 {
        return Err(CoreError::Graph("flow requires a graph with at least one edge".into()));
    }
    let mut graph = start.clone();
    let target_total = graph.total_weight();

    let kappa0 = edge_curvatures(&graph, cfg.kind, &cfg.options)?;
    let initial = map_of(&graph, date, cfg.kind, &kappa0);
    let mut states = vec![snapshot(&graph, &kappa0, 0)];

    let mut kappa = kappa0.clone();
    for iteration in 1..=cfg.iterations {
        flow_step(&mut graph, &kappa, cfg.eta)?;
        if cfg.renormalize {
            renormalize_weights(&mut graph, target_total)?;
        }
        check_weights(&graph, iteration)?;
        if cfg.recompute {
            kappa = edge_curvatures(&graph, cfg.kind, &cfg.options)?;
        }
        states.push(snapshot(&graph, &kappa, iteration));
    }

    let final_kappa = if cfg.recompute || cfg.iterations == 0 {
        map_of(&graph, date, cfg.kind, &kappa)
    } else {
        // Frozen-curvature runs recompute once at the end so the shift is
        // measured on the evolved weights.
        collapsed_curvature_map(&graph, date, cfg.kind, &cfg.options)?
    };

    let mut delta = BTreeMap::new();
    for (key, &k_end) in final_kappa.values() {
        let k_start = initial.get(key).expect("edge sets are identical");
        delta.insert(key.clone(), k_end - k_start);
    }
    Ok(FlowTrace {
        date,
        kind: cfg.kind,
        states,
        initial,
        final_kappa,
        delta,
    })
}

fn map_of<F: Real>(
    graph: &WeightedGraph<F>,
    date: Option<NaiveDate>,
    kind: CurvatureKind,
    kappas: &[F],
) -> CurvatureMap<F> {
    let values = kappas
        .iter()
        .enumerate()
        .map(|(e, &k)| (graph.edge_key_at(e as u32), k))
        .collect();
    CurvatureMap::from_values(date, kind, values)
}

/// Curvature shift between two daily snapshots of the same kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport<F> {
    pub kind: CurvatureKind,
    /// κ_curr − κ_prev on edges present in both snapshots.
    pub delta: BTreeMap<EdgeKey, F>,
    /// Edges only in the current snapshot.
    pub born: Vec<EdgeKey>,
    /// Edges only in the previous snapshot.
    pub died: Vec<EdgeKey>,
}

pub fn cross_day_shift<F: Real>(
    prev: &CurvatureMap<F>,
    curr: &CurvatureMap<F>,
) -> Result<ShiftReport<F>> {
    if prev.kind != curr.kind {
        return Err(CoreError::KindMismatch {
            left: prev.kind.to_string(),
            right: curr.kind.to_string(),
        });
    }
    let mut delta = BTreeMap::new();
    let mut born = Vec::new();
    let mut died = Vec::new();
    for (key, &k_curr) in curr.values() {
        match prev.get(key) {
            Some(k_prev) => {
                delta.insert(key.clone(), k_curr - k_prev);
            }
            None => born.push(key.clone()),
        }
    }
    for key in prev.values().keys() {
        if curr.get(key).is_none() {
            died.push(key.clone());
        }
    }
    Ok(ShiftReport {
        kind: curr.kind,
        delta,
        born,
        died,
    })
}
