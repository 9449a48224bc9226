//! Daily heterogeneous market graph and its collapsed analytical view.
//!
//! [`FinGraph`] keeps the kind-tagged edge set exactly as built (correlation,
//! semantic, knowledge). The curvature, flow and path machinery work on the
//! collapsed [`WeightedGraph`], where a pair connected by several kinds
//! carries the maximum weight over those kinds.

use crate::entity::{EdgeKey, EntityId};
use crate::error::{CoreError, Result};
use crate::market::MarketFrame;
use crate::num::{real, Real};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Asset,
    MacroIndicator,
    NewsEntity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Correlation,
    Semantic,
    Knowledge,
}

impl std::fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EdgeKind::Correlation => "correlation",
            EdgeKind::Semantic => "semantic",
            EdgeKind::Knowledge => "knowledge",
        };
        f.write_str(name)
    }
}

impl std::fmt::Display for NodeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            NodeKind::Asset => "asset",
            NodeKind::MacroIndicator => "macro_indicator",
            NodeKind::NewsEntity => "news_entity",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for EdgeKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(EdgeKind::Correlation),
            "semantic" => Ok(EdgeKind::Semantic),
            "knowledge" => Ok(EdgeKind::Knowledge),
            other => Err(CoreError::Data(format!("unknown edge kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeLink {
    pub src: EntityId,
    pub dst: EntityId,
    pub relation: String,
    pub weight: f64,
    pub valid_from: Option<NaiveDate>,
    pub valid_to: Option<NaiveDate>,
}

/// Fixed-dimension dense embeddings keyed by entity.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable<F> {
    dim: usize,
    vectors: BTreeMap<EntityId, Vec<F>>,
}

impl<F: Real> EmbeddingTable<F> {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, id: EntityId, vector: Vec<F>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(CoreError::Data(format!(
                "embedding for {id} has dimension {}, table uses {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Data(format!("embedding for {id} has non-finite entries")));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &EntityId) -> Option<&[F]> {
        self.vectors.get(id).map(|v| v.as_slice())
    }

    pub fn ids(&self) -> impl Iterator<Item = &EntityId> {
        self.vectors.keys()
    }

    /// Parse the whitespace-delimited format: entity id then `dim` floats
    /// per line. The dimension is taken from the first line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let mut table: Option<EmbeddingTable<F>> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let id = EntityId::new(parts.next().expect("non-empty line has a token"));
            let mut vector = Vec::new();
            for tok in parts {
                let v: f64 = tok.parse().map_err(|_| {
                    CoreError::malformed(path, lineno as u64 + 1, format!("bad float {tok:?}"))
                })?;
                vector.push(real::<F>(v));
            }
            if vector.is_empty() {
                return Err(CoreError::malformed(path, lineno as u64 + 1, "no vector components"));
            }
            let table = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
            if vector.len() != table.dim {
                return Err(CoreError::malformed(
                    path,
                    lineno as u64 + 1,
                    format!("dimension {} does not match first line's {}", vector.len(), table.dim),
                ));
            }
            table.insert(id, vector)?;
        }
        table.ok_or_else(|| CoreError::Data(format!("{}: empty embeddings file", path.display())))
    }
}

/// Load `src,dst,relation,weight` rows, optionally extended with
/// `valid_from,valid_to` columns (empty cells leave a side open).
pub fn load_knowledge(path: &Path) -> Result<Vec<KnowledgeLink>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    let base = ["src", "dst", "relation", "weight"];
    let extended = ["src", "dst", "relation", "weight", "valid_from", "valid_to"];
    let has_validity = if headers == extended {
        true
    } else if headers == base {
        false
    } else {
        return Err(CoreError::malformed(
            path,
            1,
            format!("expected header {:?} or {:?}, found {:?}", base.join(","), extended.join(","), headers.join(",")),
        ));
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let weight: f64 = record[3]
            .parse()
            .map_err(|_| CoreError::malformed(path, line, format!("bad weight {:?}", &record[3])))?;
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(CoreError::malformed(
                path,
                line,
                format!("knowledge weight {weight} outside (0, 1]"),
            ));
        }
        let parse_opt_date = |field: &str| -> Result<Option<NaiveDate>> {
            if field.is_empty() {
                return Ok(None);
            }
            NaiveDate::parse_from_str(field, "%Y-%m-%d")
                .map(Some)
                .map_err(|_| CoreError::malformed(path, line, format!("bad date {field:?}")))
        };
        let (valid_from, valid_to) = if has_validity {
            (parse_opt_date(&record[4])?, parse_opt_date(&record[5])?)
        } else {
            (None, None)
        };
        out.push(KnowledgeLink {
            src: EntityId::new(&record[0]),
            dst: EntityId::new(&record[1]),
            relation: record[2].to_owned(),
            weight,
            valid_from,
            valid_to,
        });
    }
    Ok(out)
}

/// Load `date,entity_a,entity_b` co-mention rows into per-day pair sets.
pub fn load_comention(path: &Path) -> Result<BTreeMap<NaiveDate, BTreeSet<EdgeKey>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
    let headers: Vec<&str> = reader
        .headers()
        .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .collect();
    if headers != ["date", "entity_a", "entity_b"] {
        return Err(CoreError::malformed(
            path,
            1,
            format!("expected header date,entity_a,entity_b, found {:?}", headers.join(",")),
        ));
    }
    let mut out: BTreeMap<NaiveDate, BTreeSet<EdgeKey>> = BTreeMap::new();
    for row in reader.records() {
        let record = row.map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|_| CoreError::malformed(path, line, format!("bad date {:?}", &record[0])))?;
        let a = EntityId::new(&record[1]);
        let b = EntityId::new(&record[2]);
        match EdgeKey::new(a, b) {
            Some(key) => {
                out.entry(date).or_default().insert(key);
            }
            None => {
                log::warn!("{}:{line}: co-mention of an entity with itself, skipped", path.display());
            }
        }
    }
    Ok(out)
}

/// Absolute Pearson correlation edges over the trailing frames.
///
/// For each asset pair the returns are aligned on days where both are
/// present; pairs with fewer than `window` common days, or with a constant
/// series, are omitted. When more than `window` common days exist, the most
/// recent `window` of them are used.
pub fn correlation_edges<F: Real>(
    frames: &[MarketFrame<F>],
    universe: &[EntityId],
    window: usize,
) -> Result<BTreeMap<EdgeKey, F>> {
    if window < 2 {
        return Err(CoreError::Config(format!(
            "correlation window must be at least 2, got {window}"
        )));
    }
    let mut series: BTreeMap<&EntityId, Vec<(NaiveDate, F)>> = BTreeMap::new();
    for frame in frames {
        for ticker in universe {
            if let Some(fv) = frame.features.get(ticker) {
                series.entry(ticker).or_default().push((frame.date, fv.log_return));
            }
        }
    }
    let present: Vec<&EntityId> = series.keys().copied().collect();
    let mut out = BTreeMap::new();
    for (i, &u) in present.iter().enumerate() {
        for &v in present.iter().skip(i + 1) {
            let su = &series[u];
            let sv = &series[v];
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut iu = su.iter().peekable();
            let mut iv = sv.iter().peekable();
            while let (Some(&&(du, ru)), Some(&&(dv, rv))) = (iu.peek(), iv.peek()) {
                match du.cmp(&dv) {
                    std::cmp::Ordering::Less => {
                        iu.next();
                    }
                    std::cmp::Ordering::Greater => {
                        iv.next();
                    }
                    std::cmp::Ordering::Equal => {
                        xs.push(ru);
                        ys.push(rv);
                        iu.next();
                        iv.next();
                    }
                }
            }
            if xs.len() < window {
                continue;
            }
            let xs = &xs[xs.len() - window..];
            let ys = &ys[ys.len() - window..];
            match pearson_abs(xs, ys) {
                Some(w) if w > F::zero() => {
                    let key = EdgeKey::new(u.clone(), v.clone()).expect("distinct ids");
                    out.insert(key, w);
                }
                Some(_) => {
                    log::debug!("correlation of ({u}, {v}) is zero, edge omitted");
                }
                None => {
                    log::debug!("constant return series for ({u}, {v}), edge omitted");
                }
            }
        }
    }
    Ok(out)
}

/// |Pearson| via single-pass co-moment accumulation; `None` on zero variance.
fn pearson_abs<F: Real>(xs: &[F], ys: &[F]) -> Option<F> {
    let mut mean_x = F::zero();
    let mut mean_y = F::zero();
    let mut m2x = F::zero();
    let mut m2y = F::zero();
    let mut cxy = F::zero();
    let mut count = F::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        count += F::one();
        let dx = x - mean_x;
        mean_x += dx / count;
        let dy0 = y - mean_y;
        mean_y += dy0 / count;
        let dy = y - mean_y;
        m2x += dx * (x - mean_x);
        m2y += dy0 * dy;
        cxy += dx * dy;
    }
    if m2x == F::zero() || m2y == F::zero() {
        return None;
    }
    let rho = cxy / (m2x.sqrt() * m2y.sqrt());
    // Floating error can push |rho| a hair past 1.
    Some(rho.abs().min(F::one()))
}

/// Cosine-similarity edges between co-mentioned entities; non-positive
/// similarity yields no edge, zero-norm vectors are skipped with a log line.
pub fn semantic_edges<F: Real>(
    embeddings: &EmbeddingTable<F>,
    comention: &BTreeSet<EdgeKey>,
) -> BTreeMap<EdgeKey, F> {
    let mut out = BTreeMap::new();
    for key in comention {
        let (a, b) = key.endpoints();
        let (va, vb) = match (embeddings.get(a), embeddings.get(b)) {
            (Some(va), Some(vb)) => (va, vb),
            _ => {
                log::warn!("co-mentioned pair {key} lacks embeddings, skipped");
                continue;
            }
        };
        let dot: F = va.iter().zip(vb).map(|(&x, &y)| x * y).sum();
        let na: F = va.iter().map(|&x| x * x).sum::<F>().sqrt();
        let nb: F = vb.iter().map(|&x| x * x).sum::<F>().sqrt();
        if na == F::zero() || nb == F::zero() {
            log::warn!("zero-norm embedding in pair {key}, skipped");
            continue;
        }
        let cos = (dot / (na * nb)).min(F::one());
        if cos > F::zero() {
            out.insert(key.clone(), cos);
        }
    }
    out
}

/// Knowledge edges valid on `date` between already-known nodes. Duplicate
/// pairs keep the maximum weight.
pub fn knowledge_edges<F: Real>(
    links: &[KnowledgeLink],
    date: NaiveDate,
    nodes: &BTreeMap<EntityId, NodeKind>,
) -> BTreeMap<EdgeKey, F> {
    let mut out: BTreeMap<EdgeKey, F> = BTreeMap::new();
    for link in links {
        if link.valid_from.is_some_and(|d| date < d) || link.valid_to.is_some_and(|d| date > d) {
            continue;
        }
        if !nodes.contains_key(&link.src) || !nodes.contains_key(&link.dst) {
            log::warn!(
                "knowledge link ({}, {}) references an unknown node, skipped",
                link.src,
                link.dst
            );
            continue;
        }
        let key = match EdgeKey::new(link.src.clone(), link.dst.clone()) {
            Some(key) => key,
            None => {
                log::warn!("knowledge link from {} to itself, skipped", link.src);
                continue;
            }
        };
        let w = real::<F>(link.weight);
        out.entry(key)
            .and_modify(|cur| {
                if w > *cur {
                    *cur = w;
                }
            })
            .or_insert(w);
    }
    out
}

/// Collapsed positive-weight simple graph: sorted node ids, canonical edge
/// list, adjacency indexed by position. This is the substrate the curvature,
/// flow and path search operate on.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph<F> {
    ids: Vec<EntityId>,
    pairs: Vec<(u32, u32)>,
    weights: Vec<F>,
    adjacency: Vec<Vec<(u32, u32)>>,
}

impl<F: Real> WeightedGraph<F> {
    /// Build from explicit nodes (isolated ones allowed) and weighted edges.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = EntityId>,
        edges: impl IntoIterator<Item = (EntityId, EntityId, F)>,
    ) -> Result<Self> {
        let mut ids: Vec<EntityId> = nodes.into_iter().collect();
        ids.sort();
        ids.dedup();
        let index: BTreeMap<&EntityId, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id, i as u32))
            .collect();
        let mut pair_weights: BTreeMap<(u32, u32), F> = BTreeMap::new();
        for (u, v, w) in edges {
            let (iu, iv) = match (index.get(&u), index.get(&v)) {
                (Some(&a), Some(&b)) => (a, b),
                _ => {
                    return Err(CoreError::Graph(format!(
                        "edge ({u}, {v}) references a node outside the graph"
                    )))
                }
            };
            if iu == iv {
                return Err(CoreError::Graph(format!("self loop on {u}")));
            }
            if !(w.is_finite() && w > F::zero()) {
                return Err(CoreError::Graph(format!(
                    "edge ({u}, {v}) has non-positive or non-finite weight {w}"
                )));
            }
            let key = if iu < iv { (iu, iv) } else { (iv, iu) };
            if pair_weights.insert(key, w).is_some() {
                return Err(CoreError::Graph(format!("duplicate edge ({u}, {v})")));
            }
        }
        let mut pairs = Vec::with_capacity(pair_weights.len());
        let mut weights = Vec::with_capacity(pair_weights.len());
        let mut adjacency = vec![Vec::new(); ids.len()];
        for (e, ((a, b), w)) in pair_weights.into_iter().enumerate() {
            pairs.push((a, b));
            weights.push(w);
            adjacency[a as usize].push((b, e as u32));
            adjacency[b as usize].push((a, e as u32));
        }
        for list in &mut adjacency {
            list.sort();
        }
        Ok(WeightedGraph {
            ids,
            pairs,
            weights,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn ids(&self) -> &[EntityId] {
        &self.ids
    }

    pub fn id_at(&self, node: u32) -> &EntityId {
        &self.ids[node as usize]
    }

    pub fn index_of(&self, id: &EntityId) -> Option<u32> {
        self.ids.binary_search(id).ok().map(|i| i as u32)
    }

    /// Endpoint indices of edge `e`, first < second.
    pub fn endpoints_at(&self, e: u32) -> (u32, u32) {
        self.pairs[e as usize]
    }

    pub fn edge_key_at(&self, e: u32) -> EdgeKey {
        let (a, b) = self.pairs[e as usize];
        EdgeKey::new(self.ids[a as usize].clone(), self.ids[b as usize].clone())
            .expect("stored edges are never self loops")
    }

    pub fn weight_at(&self, e: u32) -> F {
        self.weights[e as usize]
    }

    pub fn set_weight_at(&mut self, e: u32, w: F) {
        self.weights[e as usize] = w;
    }

    pub fn edge_index(&self, u: &EntityId, v: &EntityId) -> Option<u32> {
        let iu = self.index_of(u)?;
        let iv = self.index_of(v)?;
        self.adjacency[iu as usize]
            .iter()
            .find(|&&(nbr, _)| nbr == iv)
            .map(|&(_, e)| e)
    }

    /// Neighbors of `node` as (neighbor index, edge index), sorted by
    /// neighbor index.
    pub fn neighbors(&self, node: u32) -> &[(u32, u32)] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: u32) -> usize {
        self.adjacency[node as usize].len()
    }

    pub fn total_weight(&self) -> F {
        self.weights.iter().copied().sum()
    }

    pub fn scale_weights(&mut self, factor: F) {
        for w in &mut self.weights {
            *w *= factor;
        }
    }

    /// Unweighted breadth-first hop distances from `from`.
    pub fn hop_distances(&self, from: u32) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.ids.len()];
        dist[from as usize] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize].expect("queued nodes have distances");
            for &(v, _) in &self.adjacency[u as usize] {
                if dist[v as usize].is_none() {
                    dist[v as usize] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Number of triangles through edge `e` (common neighbors of its
    /// endpoints).
    pub fn triangles_at(&self, e: u32) -> usize {
        let (a, b) = self.pairs[e as usize];
        let la = &self.adjacency[a as usize];
        let lb = &self.adjacency[b as usize];
        let mut i = 0;
        let mut j = 0;
        let mut count = 0;
        while i < la.len() && j < lb.len() {
            match la[i].0.cmp(&lb[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        count
    }

    pub fn weights_map(&self) -> BTreeMap<EdgeKey, F> {
        (0..self.edge_count() as u32)
            .map(|e| (self.edge_key_at(e), self.weight_at(e)))
            .collect()
    }
}

/// The daily graph: kind-tagged edges plus the collapsed analytical view.
/// Immutable once constructed.
#[derive(Clone, Debug, PartialEq)]
pub struct FinGraph<F> {
    date: NaiveDate,
    nodes: BTreeMap<EntityId, NodeKind>,
    edges: BTreeMap<(EdgeKey, EdgeKind), F>,
    collapsed: WeightedGraph<F>,
}

impl<F: Real> FinGraph<F> {
    pub fn new(
        date: NaiveDate,
        nodes: BTreeMap<EntityId, NodeKind>,
        edges: BTreeMap<(EdgeKey, EdgeKind), F>,
    ) -> Result<Self> {
        for ((key, kind), &w) in &edges {
            let (a, b) = key.endpoints();
            if !nodes.contains_key(a) || !nodes.contains_key(b) {
                return Err(CoreError::Graph(format!(
                    "{kind} edge {key} references a node outside the graph"
                )));
            }
            if !(w.is_finite() && w > F::zero()) {
                return Err(CoreError::Graph(format!(
                    "{kind} edge {key} has non-positive or non-finite weight {w}"
                )));
            }
        }
        // Collapse to one weight per pair: the maximum over kinds.
        let mut combined: BTreeMap<EdgeKey, F> = BTreeMap::new();
        for ((key, _), &w) in &edges {
            combined
                .entry(key.clone())
                .and_modify(|cur| {
                    if w > *cur {
                        *cur = w;
                    }
                })
                .or_insert(w);
        }
        let collapsed = WeightedGraph::from_edges(
            nodes.keys().cloned(),
            combined
                .into_iter()
                .map(|(key, w)| (key.first().clone(), key.second().clone(), w)),
        )?;
        Ok(FinGraph {
            date,
            nodes,
            edges,
            collapsed,
        })
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn nodes(&self) -> &BTreeMap<EntityId, NodeKind> {
        &self.nodes
    }

    pub fn typed_edges(&self) -> &BTreeMap<(EdgeKey, EdgeKind), F> {
        &self.edges
    }

    /// The collapsed max-over-kinds view used by curvature and flow.
    pub fn collapsed(&self) -> &WeightedGraph<F> {
        &self.collapsed
    }
}

/// Per-node, per-kind top-k pruning followed by union assembly.
///
/// Within each edge kind every node keeps its `top_k` heaviest incident
/// edges (ties broken toward the lexicographically smaller neighbor); an
/// edge survives when either endpoint keeps it. An optional global weight
/// floor drops weaker edges first.
pub fn assemble_graph<F: Real>(
    date: NaiveDate,
    nodes: BTreeMap<EntityId, NodeKind>,
    correlation: &BTreeMap<EdgeKey, F>,
    semantic: &BTreeMap<EdgeKey, F>,
    knowledge: &BTreeMap<EdgeKey, F>,
    top_k: usize,
    weight_floor: Option<F>,
) -> Result<FinGraph<F>> {
    if top_k < 1 {
        return Err(CoreError::Config(format!("top_k must be at least 1, got {top_k}")));
    }
    let mut edges: BTreeMap<(EdgeKey, EdgeKind), F> = BTreeMap::new();
    for (kind, set) in [
        (EdgeKind::Correlation, correlation),
        (EdgeKind::Semantic, semantic),
        (EdgeKind::Knowledge, knowledge),
    ] {
        // Incident lists per node for this kind.
        let mut incident: BTreeMap<&EntityId, Vec<(&EdgeKey, F)>> = BTreeMap::new();
        for (key, &w) in set {
            if let Some(floor) = weight_floor {
                if w < floor {
                    continue;
                }
            }
            incident.entry(key.first()).or_default().push((key, w));
            incident.entry(key.second()).or_default().push((key, w));
        }
        let mut kept: BTreeSet<&EdgeKey> = BTreeSet::new();
        for (node, mut list) in incident {
            list.sort_by(|(ka, wa), (kb, wb)| {
                wb.partial_cmp(wa)
                    .expect("edge weights are finite")
                    .then_with(|| {
                        let na = ka.other(node).expect("incident edge");
                        let nb = kb.other(node).expect("incident edge");
                        na.cmp(nb)
                    })
            });
            for (key, _) in list.into_iter().take(top_k) {
                kept.insert(key);
            }
        }
        for key in kept {
            edges.insert((key.clone(), kind), set[key]);
        }
    }
    FinGraph::new(date, nodes, edges)
}
