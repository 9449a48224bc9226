//! Discrete Ricci curvature on the collapsed market graph.
//!
//! Ollivier curvature compares the lazy random-walk measures of an edge's
//! endpoints through an exact Wasserstein-1 transport under hop-count ground
//! distance; since adjacent nodes are one hop apart, κ(u,v) = 1 − W1(μ_u, μ_v)
//! on edges. Forman curvature is the weighted combinatorial form with unit
//! node weights.

use crate::entity::{EdgeKey, EntityId};
use crate::error::{CoreError, Result};
use crate::graph::{FinGraph, WeightedGraph};
use crate::num::{real, to_f64, Real};
use crate::transport::min_cost_transport;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureKind {
    Ollivier,
    Forman,
}

impl std::fmt::Display for CurvatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurvatureKind::Ollivier => f.write_str("ollivier"),
            CurvatureKind::Forman => f.write_str("forman"),
        }
    }
}

impl std::str::FromStr for CurvatureKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ollivier" => Ok(CurvatureKind::Ollivier),
            "forman" => Ok(CurvatureKind::Forman),
            other => Err(CoreError::Config(format!(
                "unknown curvature kind {other:?} (want \"ollivier\" or \"forman\")"
            ))),
        }
    }
}

/// Knobs shared by the curvature entry points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureOptions<F> {
    /// Mass the lazy walk keeps at its base node, in [0, 1).
    pub p_idle: F,
    /// Add the triangle term to Forman curvature (3 per triangle through
    /// the edge).
    pub augmented_forman: bool,
}

impl<F: Real> Default for CurvatureOptions<F> {
    fn default() -> Self {
        CurvatureOptions {
            p_idle: real(0.5),
            augmented_forman: false,
        }
    }
}

fn check_p_idle<F: Real>(p_idle: F) -> Result<()> {
    if !(p_idle >= F::zero() && p_idle < F::one()) {
        return Err(CoreError::Config(format!(
            "p_idle must lie in [0, 1), got {p_idle}"
        )));
    }
    Ok(())
}

/// Probability measure of a lazy random walk seated at `base`: `p_idle`
/// stays put, the rest spreads over neighbors proportionally to edge
/// weight. Entries are strictly positive; zero-mass nodes are absent.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborhoodMeasure<F> {
    base: EntityId,
    p_idle: F,
    masses: BTreeMap<EntityId, F>,
}

impl<F: Real> NeighborhoodMeasure<F> {
    pub fn base(&self) -> &EntityId {
        &self.base
    }

    pub fn p_idle(&self) -> F {
        self.p_idle
    }

    pub fn masses(&self) -> &BTreeMap<EntityId, F> {
        &self.masses
    }

    pub fn total_mass(&self) -> F {
        self.masses.values().copied().sum()
    }
}

/// Walk measure for `node`. An isolated node keeps all mass on itself.
pub fn neighborhood_measure<F: Real>(
    graph: &WeightedGraph<F>,
    node: &EntityId,
    p_idle: F,
) -> Result<NeighborhoodMeasure<F>> {
    check_p_idle(p_idle)?;
    let idx = graph
        .index_of(node)
        .ok_or_else(|| CoreError::Graph(format!("node {node} not in graph")))?;
    let mut masses = BTreeMap::new();
    let neighbors = graph.neighbors(idx);
    if neighbors.is_empty() {
        masses.insert(node.clone(), F::one());
    } else {
        if p_idle > F::zero() {
            masses.insert(node.clone(), p_idle);
        }
        let total: F = neighbors.iter().map(|&(_, e)| graph.weight_at(e)).sum();
        let spread = F::one() - p_idle;
        for &(nbr, e) in neighbors {
            let mass = spread * graph.weight_at(e) / total;
            masses.insert(graph.id_at(nbr).clone(), mass);
        }
    }
    Ok(NeighborhoodMeasure {
        base: node.clone(),
        p_idle,
        masses,
    })
}

/// Exact Wasserstein-1 distance between two measures on the graph under
/// hop-count ground distance.
pub fn wasserstein1<F: Real>(
    graph: &WeightedGraph<F>,
    mu: &NeighborhoodMeasure<F>,
    nu: &NeighborhoodMeasure<F>,
) -> Result<F> {
    let resolve = |m: &NeighborhoodMeasure<F>| -> Result<(Vec<u32>, Vec<F>)> {
        let mut nodes = Vec::with_capacity(m.masses.len());
        let mut masses = Vec::with_capacity(m.masses.len());
        for (id, &mass) in &m.masses {
            let idx = graph
                .index_of(id)
                .ok_or_else(|| CoreError::Graph(format!("measure node {id} not in graph")))?;
            nodes.push(idx);
            masses.push(mass);
        }
        Ok((nodes, masses))
    };
    let (src_nodes, supply) = resolve(mu)?;
    let (dst_nodes, demand) = resolve(nu)?;

    let mut cost = vec![vec![F::zero(); dst_nodes.len()]; src_nodes.len()];
    for (i, &s) in src_nodes.iter().enumerate() {
        let dist = graph.hop_distances(s);
        for (j, &t) in dst_nodes.iter().enumerate() {
            match dist[t as usize] {
                Some(d) => cost[i][j] = real(d as f64),
                None => {
                    return Err(CoreError::DisconnectedSupport {
                        from: graph.id_at(s).clone(),
                        to: graph.id_at(t).clone(),
                    })
                }
            }
        }
    }
    Ok(min_cost_transport(&supply, &demand, &cost))
}

/// Ollivier curvature of an existing edge: κ = 1 − W1(μ_u, μ_v) because the
/// hop distance across an edge is one.
pub fn ollivier_curvature<F: Real>(
    graph: &WeightedGraph<F>,
    u: &EntityId,
    v: &EntityId,
    p_idle: F,
) -> Result<F> {
    graph
        .edge_index(u, v)
        .ok_or_else(|| CoreError::Graph(format!("no edge ({u}, {v})")))?;
    let mu = neighborhood_measure(graph, u, p_idle)?;
    let nu = neighborhood_measure(graph, v, p_idle)?;
    Ok(F::one() - wasserstein1(graph, &mu, &nu)?)
}

fn forman_at<F: Real>(graph: &WeightedGraph<F>, e: u32) -> F {
    let (u, v) = graph.endpoints_at(e);
    let we = graph.weight_at(e);
    let side = |node: u32| -> F {
        graph
            .neighbors(node)
            .iter()
            .filter(|&&(_, other)| other != e)
            .map(|&(_, other)| F::one() / (we * graph.weight_at(other)).sqrt())
            .sum()
    };
    // Node weights are fixed at one, so each endpoint contributes 1/w_e.
    we * (F::one() / we + F::one() / we - side(u) - side(v))
}

/// Weighted Forman curvature of an existing edge (unit node weights). On an
/// unweighted graph this reduces to 4 − deg(u) − deg(v).
pub fn forman_curvature<F: Real>(graph: &WeightedGraph<F>, u: &EntityId, v: &EntityId) -> Result<F> {
    let e = graph
        .edge_index(u, v)
        .ok_or_else(|| CoreError::Graph(format!("no edge ({u}, {v})")))?;
    Ok(forman_at(graph, e))
}

/// Forman curvature with the triangle contribution: each triangle through
/// the edge adds 3.
pub fn forman_curvature_augmented<F: Real>(
    graph: &WeightedGraph<F>,
    u: &EntityId,
    v: &EntityId,
) -> Result<F> {
    let e = graph
        .edge_index(u, v)
        .ok_or_else(|| CoreError::Graph(format!("no edge ({u}, {v})")))?;
    Ok(forman_at(graph, e) + real::<F>(3.0) * real(graph.triangles_at(e) as f64))
}

/// Curvature of every edge by edge index, in edge order.
pub(crate) fn edge_curvatures<F: Real>(
    graph: &WeightedGraph<F>,
    kind: CurvatureKind,
    options: &CurvatureOptions<F>,
) -> Result<Vec<F>> {
    check_p_idle(options.p_idle)?;
    let mut out = Vec::with_capacity(graph.edge_count());
    for e in 0..graph.edge_count() as u32 {
        let kappa = match kind {
            CurvatureKind::Forman => {
                if options.augmented_forman {
                    forman_at(graph, e) + real::<F>(3.0) * real(graph.triangles_at(e) as f64)
                } else {
                    forman_at(graph, e)
                }
            }
            CurvatureKind::Ollivier => {
                let (u, v) = graph.endpoints_at(e);
                let mu = neighborhood_measure(graph, graph.id_at(u), options.p_idle)?;
                let nu = neighborhood_measure(graph, graph.id_at(v), options.p_idle)?;
                let key = graph.edge_key_at(e);
                let w1 = wasserstein1(graph, &mu, &nu)
                    .map_err(|err| match err {
                        CoreError::DisconnectedSupport { from, to } => {
                            CoreError::Graph(format!(
                                "edge {key}: measure supports disconnected between {from} and {to}"
                            ))
                        }
                        other => other,
                    })?;
                F::one() - w1
            }
        };
        if !kappa.is_finite() {
            return Err(CoreError::Graph(format!(
                "non-finite curvature {} on edge {}",
                to_f64(kappa),
                graph.edge_key_at(e)
            )));
        }
        out.push(kappa);
    }
    Ok(out)
}

/// Curvature per edge for one graph snapshot. Holds exactly one value for
/// every edge of the graph it was computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureMap<F> {
    pub date: Option<NaiveDate>,
    pub kind: CurvatureKind,
    values: BTreeMap<EdgeKey, F>,
}

impl<F: Real> CurvatureMap<F> {
    pub(crate) fn from_values(
        date: Option<NaiveDate>,
        kind: CurvatureKind,
        values: BTreeMap<EdgeKey, F>,
    ) -> Self {
        CurvatureMap { date, kind, values }
    }

    pub fn get(&self, key: &EdgeKey) -> Option<F> {
        self.values.get(key).copied()
    }

    pub fn values(&self) -> &BTreeMap<EdgeKey, F> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Curvature for every edge of a collapsed graph.
pub fn collapsed_curvature_map<F: Real>(
    graph: &WeightedGraph<F>,
    date: Option<NaiveDate>,
    kind: CurvatureKind,
    options: &CurvatureOptions<F>,
) -> Result<CurvatureMap<F>> {
    let kappas = edge_curvatures(graph, kind, options)?;
    let values = kappas
        .into_iter()
        .enumerate()
        .map(|(e, k)| (graph.edge_key_at(e as u32), k))
        .collect();
    Ok(CurvatureMap::from_values(date, kind, values))
}

/// Curvature for every edge of the day's graph (collapsed view).
pub fn curvature_map<F: Real>(
    graph: &FinGraph<F>,
    kind: CurvatureKind,
    options: &CurvatureOptions<F>,
) -> Result<CurvatureMap<F>> {
    collapsed_curvature_map(graph.collapsed(), Some(graph.date()), kind, options)
}
