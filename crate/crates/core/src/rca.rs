//! Unstable-zone detection and root-cause path extraction.
//!
//! An edge is traversable when its curvature shift is strong enough:
//! |Δκ| > |θ| and |Δκ| ≥ ε. The nominal threshold θ is negative (default
//! −0.05); taken literally, |Δκ| > θ would always hold, so the magnitude
//! reading |Δκ| > |θ| is used. The search walks simple paths of at most
//! `h_max` edges from an asset and stops at the first target node reached;
//! among all such paths the one with the highest cumulative |Δκ| wins, with
//! ties broken by fewer edges and then by lexicographically smaller node
//! sequence.

use crate::entity::{EdgeKey, EntityId};
use crate::error::{CoreError, Result};
use crate::graph::WeightedGraph;
use crate::num::Real;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcaParams<F> {
    /// Curvature change threshold; admissibility uses its magnitude.
    pub theta: F,
    /// Maximum number of edges in a path.
    pub h_max: usize,
    /// Decay floor: a frontier edge with |Δκ| below this is pruned.
    pub epsilon: F,
}

impl<F: Real> Default for RcaParams<F> {
    fn default() -> Self {
        RcaParams {
            theta: crate::num::real(-0.05),
            h_max: 6,
            epsilon: crate::num::real(0.01),
        }
    }
}

impl<F: Real> RcaParams<F> {
    pub fn validate(&self) -> Result<()> {
        if self.h_max < 1 {
            return Err(CoreError::Config("h_max must be at least 1".into()));
        }
        if !(self.epsilon > F::zero()) {
            return Err(CoreError::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.theta.is_nan() {
            return Err(CoreError::Config("theta must not be NaN".into()));
        }
        Ok(())
    }
}

/// Nodes whose average incident curvature shift fell below θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnstableZone<F> {
    pub date: Option<NaiveDate>,
    /// Node id → its average incident Δκ (strictly below θ).
    pub members: BTreeMap<EntityId, F>,
}

impl<F> UnstableZone<F> {
    pub fn contains(&self, id: &EntityId) -> bool {
        self.members.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &EntityId> {
        self.members.keys()
    }
}

/// Signed mean of Δκ over the node's incident edges that carry a value;
/// `None` when no incident edge does.
pub fn avg_curv_change<F: Real>(
    graph: &WeightedGraph<F>,
    delta: &BTreeMap<EdgeKey, F>,
    node: &EntityId,
) -> Option<F> {
    let idx = graph.index_of(node)?;
    let mut sum = F::zero();
    let mut count = 0usize;
    for &(_, e) in graph.neighbors(idx) {
        if let Some(&d) = delta.get(&graph.edge_key_at(e)) {
            sum += d;
            count += 1;
        }
    }
    if count == 0 {
        None
    } else {
        Some(sum / crate::num::real(count as f64))
    }
}

/// All nodes with `avg_curv_change < θ` (strict).
pub fn unstable_zone<F: Real>(
    graph: &WeightedGraph<F>,
    delta: &BTreeMap<EdgeKey, F>,
    theta: F,
    date: Option<NaiveDate>,
) -> UnstableZone<F> {
    let mut members = BTreeMap::new();
    for id in graph.ids() {
        if let Some(avg) = avg_curv_change(graph, delta, id) {
            if avg < theta {
                members.insert(id.clone(), avg);
            }
        }
    }
    UnstableZone { date, members }
}

/// Search targets, split by why each node is interesting. The search treats
/// the union as terminal; the split only labels the outcome.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TargetSet {
    pub perturbed: BTreeSet<EntityId>,
    pub unstable: BTreeSet<EntityId>,
}

impl TargetSet {
    pub fn contains(&self, id: &EntityId) -> bool {
        self.perturbed.contains(id) || self.unstable.contains(id)
    }

    pub fn is_empty(&self) -> bool {
        self.perturbed.is_empty() && self.unstable.is_empty()
    }

    fn classify(&self, id: &EntityId) -> Terminal {
        match (self.perturbed.contains(id), self.unstable.contains(id)) {
            (true, true) => Terminal::Both,
            (true, false) => Terminal::Perturbed,
            (false, true) => Terminal::Unstable,
            (false, false) => unreachable!("classify is only called on targets"),
        }
    }
}

/// What kind of target a found path ends on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Perturbed,
    Unstable,
    Both,
}

impl std::fmt::Display for Terminal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Terminal::Perturbed => f.write_str("perturbed"),
            Terminal::Unstable => f.write_str("unstable"),
            Terminal::Both => f.write_str("both"),
        }
    }
}

/// Why a search returned no path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Truncated branches at the hop limit dominated.
    HopLimit,
    /// Edges pruned below the decay floor dominated.
    DecayStop,
    /// The admissible region was fully explored without reaching a target.
    Exhausted,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::HopLimit => f.write_str("hop_limit"),
            StopReason::DecayStop => f.write_str("decay_stop"),
            StopReason::Exhausted => f.write_str("exhausted"),
        }
    }
}

/// A root-cause path from an asset to a target node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcaPath<F> {
    pub nodes: Vec<EntityId>,
    /// Traversed edges with their Δκ, in path order.
    pub edges: Vec<(EdgeKey, F)>,
    /// Sum of |Δκ| over the path's edges.
    pub cumulative: F,
    pub terminal: Terminal,
}

/// Outcome of one backward search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SearchResult<F> {
    Found(RcaPath<F>),
    NotFound { reason: StopReason },
}

impl<F> SearchResult<F> {
    pub fn path(&self) -> Option<&RcaPath<F>> {
        match self {
            SearchResult::Found(p) => Some(p),
            SearchResult::NotFound { .. } => None,
        }
    }
}

struct SearchCtx<'a, F> {
    graph: &'a WeightedGraph<F>,
    delta_by_edge: Vec<Option<F>>,
    is_target: Vec<bool>,
    theta_abs: F,
    epsilon: F,
    h_max: usize,
    hop_events: u64,
    decay_events: u64,
    best: Option<(Vec<u32>, F)>,
}

impl<F: Real> SearchCtx<'_, F> {
    fn admissible(&self, e: u32) -> Option<F> {
        let d = self.delta_by_edge[e as usize]?;
        if d.abs() > self.theta_abs && d.abs() >= self.epsilon {
            Some(d)
        } else {
            None
        }
    }

    /// Does an edge pass the θ filter but fall under the decay floor?
    fn decayed(&self, e: u32) -> bool {
        match self.delta_by_edge[e as usize] {
            Some(d) => d.abs() > self.theta_abs && d.abs() < self.epsilon,
            None => false,
        }
    }

    fn offer(&mut self, path: &[u32], cum: F) {
        let replace = match &self.best {
            None => true,
            Some((best_path, best_cum)) => {
                if cum > *best_cum {
                    true
                } else if cum < *best_cum {
                    false
                } else if path.len() != best_path.len() {
                    path.len() < best_path.len()
                } else {
                    // Node indices order exactly like ids: the graph keeps
                    // its ids sorted.
                    path < best_path.as_slice()
                }
            }
        };
        if replace {
            self.best = Some((path.to_vec(), cum));
        }
    }

    fn walk(&mut self, node: u32, depth: usize, cum: F, visited: &mut Vec<bool>, path: &mut Vec<u32>) {
        if depth == self.h_max {
            let truncated = self.graph.neighbors(node).iter().any(|&(nbr, e)| {
                !visited[nbr as usize] && self.admissible(e).is_some()
            });
            if truncated {
                self.hop_events += 1;
            }
            return;
        }
        // Split borrows: copy the neighbor list indices up front.
        for k in 0..self.graph.neighbors(node).len() {
            let (nbr, e) = self.graph.neighbors(node)[k];
            if visited[nbr as usize] {
                continue;
            }
            if self.decayed(e) {
                self.decay_events += 1;
                continue;
            }
            let d = match self.admissible(e) {
                Some(d) => d,
                None => continue,
            };
            if self.is_target[nbr as usize] {
                path.push(nbr);
                let cum = cum + d.abs();
                let snapshot = path.clone();
                self.offer(&snapshot, cum);
                path.pop();
                continue; // walks stop at the first target they touch
            }
            visited[nbr as usize] = true;
            path.push(nbr);
            self.walk(nbr, depth + 1, cum + d.abs(), visited, path);
            path.pop();
            visited[nbr as usize] = false;
        }
    }
}

/// Backward search from `asset` toward the target set over strong-shift
/// edges. Returns the best reaching path, or the dominant stop reason.
pub fn backward_search<F: Real>(
    graph: &WeightedGraph<F>,
    delta: &BTreeMap<EdgeKey, F>,
    asset: &EntityId,
    targets: &TargetSet,
    params: &RcaParams<F>,
) -> Result<SearchResult<F>> {
    params.validate()?;
    let start = graph
        .index_of(asset)
        .ok_or_else(|| CoreError::Graph(format!("asset {asset} not in graph")))?;
    if targets.contains(asset) {
        return Ok(SearchResult::Found(RcaPath {
            nodes: vec![asset.clone()],
            edges: Vec::new(),
            cumulative: F::zero(),
            terminal: targets.classify(asset),
        }));
    }

    let delta_by_edge: Vec<Option<F>> = (0..graph.edge_count() as u32)
        .map(|e| delta.get(&graph.edge_key_at(e)).copied())
        .collect();
    let is_target: Vec<bool> = graph.ids().iter().map(|id| targets.contains(id)).collect();
    let mut ctx = SearchCtx {
        graph,
        delta_by_edge,
        is_target,
        theta_abs: params.theta.abs(),
        epsilon: params.epsilon,
        h_max: params.h_max,
        hop_events: 0,
        decay_events: 0,
        best: None,
    };
    let mut visited = vec![false; graph.node_count()];
    visited[start as usize] = true;
    let mut path = vec![start];
    ctx.walk(start, 0, F::zero(), &mut visited, &mut path);

    match ctx.best {
        Some((indices, cumulative)) => {
            let nodes: Vec<EntityId> = indices
                .iter()
                .map(|&i| graph.id_at(i).clone())
                .collect();
            let mut edges = Vec::with_capacity(nodes.len() - 1);
            for pair in indices.windows(2) {
                let key = EdgeKey::new(
                    graph.id_at(pair[0]).clone(),
                    graph.id_at(pair[1]).clone(),
                )
                .expect("path steps connect distinct nodes");
                let d = delta[&key];
                edges.push((key, d));
            }
            let terminal = targets.classify(nodes.last().expect("paths are nonempty"));
            Ok(SearchResult::Found(RcaPath {
                nodes,
                edges,
                cumulative,
                terminal,
            }))
        }
        None => {
            let reason = if ctx.hop_events == 0 && ctx.decay_events == 0 {
                StopReason::Exhausted
            } else if ctx.hop_events >= ctx.decay_events {
                StopReason::HopLimit
            } else {
                StopReason::DecayStop
            };
            Ok(SearchResult::NotFound { reason })
        }
    }
}

/// Per-asset search results for one day's ranked list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcaReport<F> {
    pub date: NaiveDate,
    pub results: BTreeMap<EntityId, SearchResult<F>>,
}

impl<F> RcaReport<F> {
    /// Terminal node of every found path, in asset order.
    pub fn terminals(&self) -> Vec<EntityId> {
        self.results
            .values()
            .filter_map(|r| r.path())
            .filter_map(|p| p.nodes.last().cloned())
            .collect()
    }
}

/// One search per ranked asset; targets are the unstable zone plus any
/// externally flagged perturbed nodes.
pub fn rca_report<F: Real>(
    date: NaiveDate,
    graph: &WeightedGraph<F>,
    delta: &BTreeMap<EdgeKey, F>,
    top_assets: &[EntityId],
    zone: &UnstableZone<F>,
    perturbed: &BTreeSet<EntityId>,
    params: &RcaParams<F>,
) -> Result<RcaReport<F>> {
    let targets = TargetSet {
        perturbed: perturbed.clone(),
        unstable: zone.members.keys().cloned().collect(),
    };
    let mut results = BTreeMap::new();
    for asset in top_assets {
        let result = backward_search(graph, delta, asset, &targets, params)?;
        results.insert(asset.clone(), result);
    }
    Ok(RcaReport { date, results })
}

/// Ground truth and path terminals for one perturbation trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialAttribution {
    pub perturbed: BTreeSet<EntityId>,
    /// Terminal node of every path returned in the trial.
    pub terminals: Vec<EntityId>,
}

impl TrialAttribution {
    pub fn hit(&self) -> bool {
        self.terminals.iter().any(|t| self.perturbed.contains(t))
    }
}

/// Fraction of trials where at least one path ended on a truly perturbed
/// node; `None` when there are no trials.
pub fn rca_fidelity(trials: &[TrialAttribution]) -> Option<f64> {
    if trials.is_empty() {
        return None;
    }
    let hits = trials.iter().filter(|t| t.hit()).count();
    Some(hits as f64 / trials.len() as f64)
}
