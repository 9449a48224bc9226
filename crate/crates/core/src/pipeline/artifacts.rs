//! Artifact files written under a run directory.
//!
//! Every artifact carries `schema_version` and the config hash of the run
//! that produced it: JSON files as top-level fields, CSV files as a leading
//! `# schema_version=1 config_hash=...` comment line. Readers check both and
//! refuse files from a different configuration, so artifacts from separate
//! runs cannot be mixed silently.
//!
//! Writes go through a temp file in the target directory followed by a
//! rename, so a crash never leaves a half-written artifact behind.

use crate::curvature::CurvatureMap;
use crate::entity::{EdgeKey, EntityId};
use crate::error::{CoreError, Result};
use crate::flow::FlowTrace;
use crate::graph::{FinGraph, NodeKind};
use crate::rca::{RcaPath, RcaReport, StopReason, UnstableZone};
use crate::scoring::ScoreBoard;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use super::config::{hex, SCHEMA_VERSION};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Write `bytes` to `path` atomically (temp file in the same directory,
/// then rename). Returns the SHA-256 hex digest of the bytes.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<String> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let stamp = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(
        ".{}.{}.{stamp}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact"),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| CoreError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| CoreError::io(&tmp, e))?;
        f.sync_all().map_err(|e| CoreError::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| CoreError::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    Ok(hex(&hasher.finalize()))
}

/// Pretty-printed JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CoreError::Data(format!("serializing {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// SHA-256 hex digest of a file on disk.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex(&hasher.finalize()))
}

fn csv_header_line(config_hash: &str) -> String {
    format!("# schema_version={SCHEMA_VERSION} config_hash={config_hash}\n")
}

/// Check the `# schema_version=... config_hash=...` comment line of a CSV
/// artifact and return the body after it.
pub fn check_csv_header<'a>(path: &Path, text: &'a str, config_hash: &str) -> Result<&'a str> {
    let (first, rest) = text
        .split_once('\n')
        .ok_or_else(|| CoreError::malformed(path, 1, "empty artifact"))?;
    let tail = first
        .strip_prefix("# ")
        .ok_or_else(|| CoreError::malformed(path, 1, "missing provenance comment line"))?;
    let mut version = None;
    let mut hash = None;
    for part in tail.split_whitespace() {
        if let Some(v) = part.strip_prefix("schema_version=") {
            version = Some(v.to_string());
        } else if let Some(h) = part.strip_prefix("config_hash=") {
            hash = Some(h.to_string());
        }
    }
    let version = version.ok_or_else(|| CoreError::malformed(path, 1, "missing schema_version"))?;
    if version != SCHEMA_VERSION.to_string() {
        return Err(CoreError::Schema {
            path: path.to_path_buf(),
            expected: SCHEMA_VERSION,
            found: version,
        });
    }
    let hash = hash.ok_or_else(|| CoreError::malformed(path, 1, "missing config_hash"))?;
    if hash != config_hash {
        return Err(CoreError::HashMismatch {
            path: path.to_path_buf(),
            expected: config_hash.to_string(),
            found: hash,
        });
    }
    Ok(rest)
}

fn check_json_header(path: &Path, version: u32, hash: &str, config_hash: &str) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(CoreError::Schema {
            path: path.to_path_buf(),
            expected: SCHEMA_VERSION,
            found: version.to_string(),
        });
    }
    if hash != config_hash {
        return Err(CoreError::HashMismatch {
            path: path.to_path_buf(),
            expected: config_hash.to_string(),
            found: hash.to_string(),
        });
    }
    Ok(())
}

/// Graph snapshot: node inventory plus one row per typed edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub schema_version: u32,
    pub config_hash: String,
    pub date: NaiveDate,
    pub nodes: Vec<(EntityId, NodeKind)>,
    pub edges: Vec<(EntityId, EntityId, String, f64)>,
}

impl GraphExport {
    pub fn new(graph: &FinGraph<f64>, config_hash: &str) -> Self {
        let nodes = graph
            .nodes()
            .iter()
            .map(|(id, kind)| (id.clone(), *kind))
            .collect();
        let mut edges = Vec::new();
        for ((key, kind), w) in graph.typed_edges() {
            let (u, v) = key.endpoints();
            edges.push((u.clone(), v.clone(), kind.to_string(), *w));
        }
        GraphExport {
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash.to_string(),
            date: graph.date(),
            nodes,
            edges,
        }
    }

    pub fn read(path: &Path, config_hash: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let export: GraphExport = serde_json::from_str(&text)
            .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        check_json_header(path, export.schema_version, &export.config_hash, config_hash)?;
        Ok(export)
    }

    /// Rebuild the graph this export was taken from.
    pub fn to_graph(&self) -> Result<FinGraph<f64>> {
        let nodes: BTreeMap<EntityId, NodeKind> = self.nodes.iter().cloned().collect();
        let mut edges = BTreeMap::new();
        for (u, v, kind, w) in &self.edges {
            let key = EdgeKey::new(u.clone(), v.clone())
                .ok_or_else(|| CoreError::Data(format!("self-loop edge on {u}")))?;
            let kind: crate::graph::EdgeKind = kind.parse()?;
            edges.insert((key, kind), *w);
        }
        FinGraph::new(self.date, nodes, edges)
    }
}

/// One flow iteration: edge weights and the curvature that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowIteration {
    pub iter: usize,
    pub edges: Vec<(EntityId, EntityId, f64, f64)>,
}

/// Full flow trajectory for one day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowExport {
    pub schema_version: u32,
    pub config_hash: String,
    pub date: Option<NaiveDate>,
    pub kind: String,
    pub iterations: Vec<FlowIteration>,
}

impl FlowExport {
    pub fn new(trace: &FlowTrace<f64>, config_hash: &str) -> Self {
        let iterations = trace
            .states
            .iter()
            .map(|state| {
                let edges = state
                    .weights
                    .iter()
                    .map(|(key, w)| {
                        let (u, v) = key.endpoints();
                        let kappa = state.kappa.get(key).copied().unwrap_or(f64::NAN);
                        (u.clone(), v.clone(), *w, kappa)
                    })
                    .collect();
                FlowIteration {
                    iter: state.iteration,
                    edges,
                }
            })
            .collect();
        FlowExport {
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash.to_string(),
            date: trace.date,
            kind: trace.kind.to_string(),
            iterations,
        }
    }

    pub fn read(path: &Path, config_hash: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let export: FlowExport = serde_json::from_str(&text)
            .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        check_json_header(path, export.schema_version, &export.config_hash, config_hash)?;
        Ok(export)
    }
}

/// Curvature CSV: `u,v,kind,kappa`, sorted by edge key.
pub fn write_curvature_csv(path: &Path, map: &CurvatureMap<f64>, config_hash: &str) -> Result<String> {
    let mut out = csv_header_line(config_hash);
    out.push_str("u,v,kind,kappa\n");
    for (key, kappa) in map.values() {
        let (u, v) = key.endpoints();
        out.push_str(&format!("{u},{v},{},{kappa}\n", map.kind));
    }
    write_atomic(path, out.as_bytes())
}

/// Curvature-shift CSV: `u,v,delta_kappa`, sorted by edge key.
pub fn write_delta_csv(
    path: &Path,
    delta: &BTreeMap<EdgeKey, f64>,
    config_hash: &str,
) -> Result<String> {
    let mut out = csv_header_line(config_hash);
    out.push_str("u,v,delta_kappa\n");
    for (key, d) in delta {
        let (u, v) = key.endpoints();
        out.push_str(&format!("{u},{v},{d}\n"));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_delta_csv(path: &Path, config_hash: &str) -> Result<BTreeMap<EdgeKey, f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let body = check_csv_header(path, &text, config_hash)?;
    let mut out = BTreeMap::new();
    for (i, line) in body.lines().enumerate() {
        let lineno = (i + 2) as u64;
        if i == 0 {
            if line != "u,v,delta_kappa" {
                return Err(CoreError::malformed(path, lineno, "unexpected column header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (u, v, d) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(v), Some(d), None) => (u, v, d),
            _ => return Err(CoreError::malformed(path, lineno, "expected 3 fields")),
        };
        let key = EdgeKey::new(EntityId::from(u), EntityId::from(v))
            .ok_or_else(|| CoreError::malformed(path, lineno, "self-loop edge"))?;
        let d: f64 = d
            .parse()
            .map_err(|_| CoreError::malformed(path, lineno, "bad delta_kappa"))?;
        out.insert(key, d);
    }
    Ok(out)
}

/// One asset's entry in the day's attribution report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcaEntry {
    pub asset: EntityId,
    pub path: Option<Vec<EntityId>>,
    pub edges: Option<Vec<(EntityId, EntityId, f64)>>,
    pub cumulative: Option<f64>,
    pub reason: String,
}

/// Attribution report for one day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcaExport {
    pub schema_version: u32,
    pub config_hash: String,
    pub date: NaiveDate,
    pub zone: BTreeMap<EntityId, f64>,
    pub entries: Vec<RcaEntry>,
}

fn stop_reason_name(reason: StopReason) -> &'static str {
    match reason {
        StopReason::HopLimit => "hop_limit",
        StopReason::DecayStop => "decay_stop",
        StopReason::Exhausted => "exhausted",
    }
}

fn path_entry(asset: &EntityId, path: &RcaPath<f64>) -> RcaEntry {
    RcaEntry {
        asset: asset.clone(),
        path: Some(path.nodes.clone()),
        edges: Some(
            path.edges
                .iter()
                .map(|(key, d)| {
                    let (u, v) = key.endpoints();
                    (u.clone(), v.clone(), *d)
                })
                .collect(),
        ),
        cumulative: Some(path.cumulative),
        reason: format!("{:?}", path.terminal).to_lowercase(),
    }
}

impl RcaExport {
    pub fn new(report: &RcaReport<f64>, zone: &UnstableZone<f64>, config_hash: &str) -> Self {
        let entries = report
            .results
            .iter()
            .map(|(asset, result)| match result {
                crate::rca::SearchResult::Found(path) => path_entry(asset, path),
                crate::rca::SearchResult::NotFound { reason } => RcaEntry {
                    asset: asset.clone(),
                    path: None,
                    edges: None,
                    cumulative: None,
                    reason: stop_reason_name(*reason).to_string(),
                },
            })
            .collect();
        RcaExport {
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash.to_string(),
            date: report.date,
            zone: zone.members.clone(),
            entries,
        }
    }

    pub fn read(path: &Path, config_hash: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let export: RcaExport = serde_json::from_str(&text)
            .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        check_json_header(path, export.schema_version, &export.config_hash, config_hash)?;
        Ok(export)
    }
}

/// Graphviz rendering of the day's attribution paths. Zone nodes are
/// shaded, path edges labelled with their curvature shift.
pub fn render_rca_dot(export: &RcaExport) -> String {
    let mut nodes: BTreeMap<&EntityId, bool> = BTreeMap::new();
    let mut edges: BTreeMap<(&EntityId, &EntityId), f64> = BTreeMap::new();
    for entry in &export.entries {
        if let Some(path) = &entry.path {
            for node in path {
                nodes.entry(node).or_insert(false);
            }
        }
        if let Some(path_edges) = &entry.edges {
            for (u, v, d) in path_edges {
                let (a, b) = if u <= v { (u, v) } else { (v, u) };
                edges.insert((a, b), *d);
            }
        }
    }
    for member in export.zone.keys() {
        nodes.insert(member, true);
    }
    let mut out = String::from("graph rca {\n");
    out.push_str(&format!("  label=\"{}\";\n", export.date));
    for (node, in_zone) in &nodes {
        if *in_zone {
            out.push_str(&format!(
                "  \"{node}\" [style=filled, fillcolor=lightsalmon];\n"
            ));
        } else {
            out.push_str(&format!("  \"{node}\";\n"));
        }
    }
    for ((u, v), d) in &edges {
        out.push_str(&format!("  \"{u}\" -- \"{v}\" [label=\"{d:.4}\"];\n"));
    }
    out.push_str("}\n");
    out
}

/// Scoreboard CSV: `date,asset,r_hat,risk,score,rank`.
pub fn write_scoreboard_csv(path: &Path, board: &ScoreBoard<f64>, config_hash: &str) -> Result<String> {
    let mut out = csv_header_line(config_hash);
    out.push_str("date,asset,r_hat,risk,score,rank\n");
    for (rank, entry) in board.entries.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            board.date,
            entry.asset,
            entry.r_hat,
            entry.risk,
            entry.score,
            rank + 1
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Top-K CSV: `date,rank,asset,score`.
pub fn write_topk_csv(
    path: &Path,
    date: NaiveDate,
    top: &[crate::scoring::ScoreEntry<f64>],
    config_hash: &str,
) -> Result<String> {
    let mut out = csv_header_line(config_hash);
    out.push_str("date,rank,asset,score\n");
    for (rank, entry) in top.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            date,
            rank + 1,
            entry.asset,
            entry.score
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Parse a scoreboard CSV back into (asset, r_hat, risk, score) rows in
/// rank order.
pub fn read_scoreboard_csv(
    path: &Path,
    config_hash: &str,
) -> Result<Vec<(EntityId, f64, f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let body = check_csv_header(path, &text, config_hash)?;
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let lineno = (i + 2) as u64;
        if i == 0 {
            if line != "date,asset,r_hat,risk,score,rank" {
                return Err(CoreError::malformed(path, lineno, "unexpected column header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CoreError::malformed(path, lineno, "expected 6 fields"));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| CoreError::malformed(path, lineno, format!("bad {what}")))
        };
        out.push((
            EntityId::from(fields[1]),
            parse(fields[2], "r_hat")?,
            parse(fields[3], "risk")?,
            parse(fields[4], "score")?,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn atomic_write_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nested").join("x.json");
        let digest = write_atomic(&path, b"hello\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"hello\n");
        assert_eq!(digest, file_digest(&path).unwrap());
        assert_eq!(digest.len(), 64);
    }

    #[test]
    fn csv_header_rejects_other_config() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut delta = BTreeMap::new();
        delta.insert(
            EdgeKey::new(EntityId::from("A"), EntityId::from("B")).unwrap(),
            -0.25,
        );
        write_delta_csv(&path, &delta, "abc123").unwrap();
        let back = read_delta_csv(&path, "abc123").unwrap();
        assert_eq!(back, delta);
        let err = read_delta_csv(&path, "zzz").unwrap_err();
        assert!(matches!(err, CoreError::HashMismatch { .. }));
    }

    #[test]
    fn schema_version_is_checked() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(
            &path,
            "# schema_version=999 config_hash=h\nu,v,delta_kappa\n",
        )
        .unwrap();
        let err = read_delta_csv(&path, "h").unwrap_err();
        assert!(matches!(err, CoreError::Schema { .. }));
    }

    #[test]
    fn dot_marks_zone_members() {
        let export = RcaExport {
            schema_version: SCHEMA_VERSION,
            config_hash: "h".into(),
            date: NaiveDate::from_ymd_opt(2024, 3, 1).unwrap(),
            zone: [(EntityId::from("HUB"), -0.3)].into_iter().collect(),
            entries: vec![RcaEntry {
                asset: EntityId::from("AAA"),
                path: Some(vec![EntityId::from("AAA"), EntityId::from("HUB")]),
                edges: Some(vec![(EntityId::from("AAA"), EntityId::from("HUB"), -0.2)]),
                cumulative: Some(0.2),
                reason: "perturbed".into(),
            }],
        };
        let dot = render_rca_dot(&export);
        assert!(dot.contains("\"HUB\" [style=filled"));
        assert!(dot.contains("\"AAA\" -- \"HUB\""));
    }
}
