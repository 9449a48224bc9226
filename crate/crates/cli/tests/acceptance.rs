//! Acceptance gate for the whole artifact. Each test covers one numbered
//! criterion, prints exactly one PASS or FAIL line for it, and enforces the
//! criterion's runtime budget. Run with `-- --nocapture` to see every line.

use chrono::NaiveDate;
use curvflow::curvature::{
    forman_curvature, neighborhood_measure, ollivier_curvature, wasserstein1, CurvatureKind,
    CurvatureOptions, NeighborhoodMeasure,
};
use curvflow::entity::{EdgeKey, EntityId};
use curvflow::flow::{simulate_flow_collapsed, FlowConfig};
use curvflow::graph::WeightedGraph;
use curvflow::rca::{
    backward_search, rca_fidelity, rca_report, unstable_zone, RcaParams, SearchResult, TargetSet,
    TrialAttribution,
};
use curvflow::scoring::{risk_exposures, ReturnForecast, ScoreBoard, ScoreForm};
use curvflow::stress::ndcg_at_10;
use curvflow_testkit::fixtures::{barbell, clique, cycle, grid, node_names, path, star};
use curvflow_testkit::paths::{best_path, PathQuery};
use curvflow_testkit::reference::{forman_reference, hop_distances, lazy_measure};
use curvflow_testkit::transport::lp_transport;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn criterion(n: u32, name: &str, limit_secs: Option<f64>, body: impl FnOnce() -> Check) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            if let Some(limit) = limit_secs {
                if elapsed >= limit {
                    println!(
                        "criterion {n} ({name}): FAIL — checks passed but runtime \
                         {elapsed:.1}s exceeded the {limit:.0}s budget"
                    );
                    panic!("criterion {n} exceeded its runtime budget");
                }
            }
            println!("criterion {n} ({name}): PASS — {detail} [{elapsed:.1}s]");
        }
        Err(why) => {
            println!("criterion {n} ({name}): FAIL — {why}");
            panic!("criterion {n} failed: {why}");
        }
    }
}

fn fixture_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .join("config.toml")
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curvflow"))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let output = cli()
        .args(args)
        .output()
        .map_err(|e| format!("could not launch the binary: {e}"))?;
    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    if !output.status.success() {
        return Err(format!(
            "`curvflow {}` exited with {:?}: {stderr}",
            args.join(" "),
            output.status.code()
        ));
    }
    Ok(stdout)
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let bytes =
        std::fs::read(path).map_err(|e| format!("could not read {}: {e}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| format!("bad JSON in {}: {e}", path.display()))
}

fn build(n: usize, edges: &[(usize, usize)], weights: &[f64]) -> WeightedGraph<f64> {
    let names = node_names(n);
    WeightedGraph::from_edges(
        names.iter().map(|s| EntityId::new(s)),
        edges
            .iter()
            .zip(weights)
            .map(|(&(u, v), &w)| (EntityId::new(&names[u]), EntityId::new(&names[v]), w)),
    )
    .expect("fixture graphs are valid")
}

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 2).expect("valid date")
}

/// Deterministic weight in [0.2, 2.0] keyed by graph and edge index.
fn pseudo_weight(graph_idx: usize, edge_idx: usize) -> f64 {
    let mut x = (graph_idx as u64 + 1) * 2654435761 ^ (edge_idx as u64 + 1) * 40503;
    x ^= x >> 13;
    x = x.wrapping_mul(0x2545F4914F6CDD1D);
    x ^= x >> 31;
    0.2 + 1.8 * ((x % 10_000) as f64 / 10_000.0)
}

fn graph_battery() -> Vec<(&'static str, usize, Vec<(usize, usize)>)> {
    vec![
        ("path4", 4, path(4)),
        ("path8", 8, path(8)),
        ("cycle4", 4, cycle(4)),
        ("cycle6", 6, cycle(6)),
        ("star5", 5, star(5)),
        ("star8", 8, star(8)),
        ("clique4", 4, clique(4)),
        ("clique5", 5, clique(5)),
        ("barbell3", 6, barbell(3)),
        ("barbell4", 8, barbell(4)),
        ("grid2x3", 6, grid(2, 3)),
        ("grid2x4", 8, grid(2, 4)),
    ]
}

/// Ollivier curvature through an LP transport oracle: dense walk measures,
/// hop-count costs between supports, minilp for the plan.
fn ollivier_lp_oracle(
    n: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
    p_idle: f64,
    u: usize,
    v: usize,
) -> f64 {
    let mu = lazy_measure(n, edges, weights, u, p_idle);
    let nu = lazy_measure(n, edges, weights, v, p_idle);
    let src: Vec<usize> = (0..n).filter(|&i| mu[i] > 0.0).collect();
    let dst: Vec<usize> = (0..n).filter(|&j| nu[j] > 0.0).collect();
    let mut cost = vec![vec![0.0; dst.len()]; src.len()];
    for (a, &i) in src.iter().enumerate() {
        let dist = hop_distances(n, edges, i);
        for (b, &j) in dst.iter().enumerate() {
            cost[a][b] = dist[j].expect("battery graphs are connected") as f64;
        }
    }
    let supply: Vec<f64> = src.iter().map(|&i| mu[i]).collect();
    let demand: Vec<f64> = dst.iter().map(|&j| nu[j]).collect();
    1.0 - lp_transport(&supply, &demand, &cost)
}

#[test]
fn criterion_1_curvature_oracle_equivalence() {
    criterion(1, "curvature oracle equivalence", Some(10.0), || {
        let mut ollivier_checked = 0usize;
        let mut forman_checked = 0usize;
        for (gi, (name, n, edges)) in graph_battery().into_iter().enumerate() {
            let names = node_names(n);
            for unit in [true, false] {
                let weights: Vec<f64> = (0..edges.len())
                    .map(|e| if unit { 1.0 } else { pseudo_weight(gi, e) })
                    .collect();
                let graph = build(n, &edges, &weights);
                for (e, &(u, v)) in edges.iter().enumerate() {
                    let (idu, idv) = (EntityId::new(&names[u]), EntityId::new(&names[v]));
                    let got = ollivier_curvature(&graph, &idu, &idv, 0.5)
                        .map_err(|e| format!("{name}: {e}"))?;
                    let want = ollivier_lp_oracle(n, &edges, &weights, 0.5, u, v);
                    ensure!(
                        (got - want).abs() <= 1e-9,
                        "{name} unit={unit} edge ({u},{v}): ollivier {got} vs oracle {want}"
                    );
                    ollivier_checked += 1;

                    let got = forman_curvature(&graph, &idu, &idv)
                        .map_err(|e| format!("{name}: {e}"))?;
                    let want = forman_reference(n, &edges, &weights, e);
                    ensure!(
                        (got - want).abs() <= 1e-9,
                        "{name} unit={unit} edge ({u},{v}): forman {got} vs reference {want}"
                    );
                    forman_checked += 1;
                }
            }
        }
        // Unweighted triangle-free fixtures: the degree formula is exact.
        for (name, n, edges) in [
            ("path8", 8usize, path(8)),
            ("cycle6", 6, cycle(6)),
            ("star8", 8, star(8)),
            ("grid2x4", 8, grid(2, 4)),
        ] {
            let graph = build(n, &edges, &vec![1.0; edges.len()]);
            let names = node_names(n);
            let deg = |x: usize| edges.iter().filter(|&&(a, b)| a == x || b == x).count();
            for &(u, v) in &edges {
                let got =
                    forman_curvature(&graph, &EntityId::new(&names[u]), &EntityId::new(&names[v]))
                        .map_err(|e| format!("{name}: {e}"))?;
                let want = 4.0 - deg(u) as f64 - deg(v) as f64;
                ensure!(got == want, "{name} edge ({u},{v}): {got} != {want} exactly");
            }
        }
        Ok(format!(
            "12 graphs, {ollivier_checked} ollivier and {forman_checked} forman edges vs oracle \
             at 1e-9, degree formula exact on 4 triangle-free fixtures"
        ))
    });
}

#[test]
fn criterion_2_w1_metric_axioms() {
    criterion(2, "W1 metric axioms", Some(30.0), || {
        const MAX_DEGREE: usize = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for round in 0..1_000 {
            let n = rng.gen_range(4..=8);
            let mut degree = vec![0usize; n];
            let mut edges: Vec<(usize, usize)> = Vec::new();
            let mut weights: Vec<f64> = Vec::new();
            for v in 1..n {
                let parent = loop {
                    let p = rng.gen_range(0..v);
                    if degree[p] < MAX_DEGREE {
                        break p;
                    }
                };
                degree[parent] += 1;
                degree[v] += 1;
                edges.push((parent, v));
                weights.push(rng.gen_range(0.2..2.0));
            }
            for _ in 0..rng.gen_range(0..=2) {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                let key = (u.min(v), u.max(v));
                if u == v
                    || degree[u] >= MAX_DEGREE
                    || degree[v] >= MAX_DEGREE
                    || edges.contains(&key)
                {
                    continue;
                }
                degree[u] += 1;
                degree[v] += 1;
                edges.push(key);
                weights.push(rng.gen_range(0.2..2.0));
            }
            let graph = build(n, &edges, &weights);
            let names = node_names(n);
            let p_idle = *[0.0, 0.3, 0.5].choose(&mut rng).expect("nonempty");
            let mut picks: Vec<usize> = (0..n).collect();
            picks.shuffle(&mut rng);
            let measure = |node: usize| {
                neighborhood_measure(&graph, &EntityId::new(&names[node]), p_idle)
                    .expect("nodes are in the graph")
            };
            let (mu, nu, xi) = (measure(picks[0]), measure(picks[1]), measure(picks[2]));
            let d = |x: &NeighborhoodMeasure<f64>, y: &NeighborhoodMeasure<f64>| {
                wasserstein1(&graph, x, y).expect("sampled graphs are connected")
            };
            let (ab, ba, aa, ac, bc) = (d(&mu, &nu), d(&nu, &mu), d(&mu, &mu), d(&mu, &xi), d(&nu, &xi));
            ensure!(ab >= 0.0, "round {round}: negative distance {ab}");
            ensure!((ab - ba).abs() <= 1e-9, "round {round}: symmetry {ab} vs {ba}");
            ensure!(aa.abs() <= 1e-9, "round {round}: identity gives {aa}");
            ensure!(ac <= ab + bc + 1e-9, "round {round}: triangle {ac} > {ab} + {bc}");
        }
        Ok("symmetry, identity and triangle inequality on 1000 seeded triples at 1e-9".into())
    });
}

#[test]
fn criterion_3_flow_conservation_and_fixed_points() {
    criterion(3, "flow conservation and fixed points", Some(10.0), || {
        for (name, n, edges) in [
            ("barbell4", 8usize, barbell(4)),
            ("grid3x3", 9, grid(3, 3)),
            ("star7", 7, star(7)),
        ] {
            let weights: Vec<f64> = (0..edges.len())
                .map(|e| 0.3 + 0.13 * ((e * 7 + 3) % 11) as f64)
                .collect();
            let graph = build(n, &edges, &weights);
            let total0: f64 = weights.iter().sum();
            let cfg = FlowConfig {
                eta: 0.005,
                iterations: 50,
                renormalize: true,
                kind: CurvatureKind::Forman,
                options: CurvatureOptions::default(),
                recompute: true,
            };
            let trace =
                simulate_flow_collapsed(&graph, None, &cfg).map_err(|e| format!("{name}: {e}"))?;
            ensure!(trace.states.len() == 51, "{name}: expected 51 states");
            for state in &trace.states {
                let total: f64 = state.weights.values().sum();
                ensure!(
                    ((total - total0) / total0).abs() <= 1e-9,
                    "{name} iteration {}: total {total} drifted from {total0}",
                    state.iteration
                );
            }
        }
        for n in [6usize, 9] {
            let edges = cycle(n);
            let graph = build(n, &edges, &vec![1.0; edges.len()]);
            for kind in [CurvatureKind::Forman, CurvatureKind::Ollivier] {
                let cfg = FlowConfig {
                    eta: 0.1,
                    iterations: 50,
                    renormalize: true,
                    kind,
                    options: CurvatureOptions::default(),
                    recompute: true,
                };
                let trace = simulate_flow_collapsed(&graph, None, &cfg)
                    .map_err(|e| format!("cycle{n} {kind}: {e}"))?;
                for state in &trace.states {
                    ensure!(
                        state.weights == trace.states[0].weights,
                        "cycle{n} {kind}: weights moved at iteration {}",
                        state.iteration
                    );
                }
                ensure!(
                    trace.delta.values().all(|&d| d == 0.0),
                    "cycle{n} {kind}: nonzero shift on a flat graph"
                );
            }
        }
        Ok("totals within 1e-9 relative over 50 iterations on 3 graphs; \
            flat cycles bitwise fixed under both curvature kinds"
            .into())
    });
}

#[test]
fn criterion_4_rca_oracle_equivalence() {
    criterion(4, "RCA oracle equivalence", Some(30.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for round in 0..400 {
            let n = rng.gen_range(4..=12);
            let names = node_names(n);
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for v in 1..n {
                edges.push((rng.gen_range(0..v), v));
            }
            for _ in 0..rng.gen_range(0..=n / 2) {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                let key = (u.min(v), u.max(v));
                if u != v && !edges.contains(&key) {
                    edges.push(key);
                }
            }
            let graph = build(n, &edges, &vec![1.0; edges.len()]);
            let mut delta = BTreeMap::new();
            let mut delta_dense = BTreeMap::new();
            for &(u, v) in &edges {
                if rng.gen_bool(0.85) {
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    let d = sign * rng.gen_range(0.0..0.2);
                    delta.insert(
                        EdgeKey::new(EntityId::new(&names[u]), EntityId::new(&names[v]))
                            .expect("distinct endpoints"),
                        d,
                    );
                    delta_dense.insert((u.min(v), u.max(v)), d);
                }
            }
            let params = RcaParams {
                theta: -*[0.03, 0.05, 0.1].choose(&mut rng).expect("nonempty"),
                h_max: *[2, 3, 6].choose(&mut rng).expect("nonempty"),
                epsilon: *[0.01, 0.06].choose(&mut rng).expect("nonempty"),
            };
            let target_flags: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.25)).collect();
            let targets = TargetSet {
                perturbed: BTreeSet::new(),
                unstable: target_flags
                    .iter()
                    .enumerate()
                    .filter(|(_, &t)| t)
                    .map(|(i, _)| EntityId::new(&names[i]))
                    .collect(),
            };
            let start = rng.gen_range(0..n);
            let got = backward_search(
                &graph,
                &delta,
                &EntityId::new(&names[start]),
                &targets,
                &params,
            )
            .map_err(|e| format!("round {round}: {e}"))?;

            let mut adj = vec![Vec::new(); n];
            for &(u, v) in &edges {
                adj[u].push(v);
                adj[v].push(u);
            }
            let delta_fn =
                |u: usize, v: usize| delta_dense.get(&(u.min(v), u.max(v))).copied();
            let want = best_path(
                &PathQuery {
                    adj: &adj,
                    delta: &delta_fn,
                    targets: &target_flags,
                    theta_abs: params.theta.abs(),
                    epsilon: params.epsilon,
                    h_max: params.h_max,
                },
                start,
            );
            match (got, want) {
                (SearchResult::Found(p), Some((ref_nodes, ref_cum))) => {
                    let got_nodes: Vec<usize> = p
                        .nodes
                        .iter()
                        .map(|id| {
                            names
                                .iter()
                                .position(|s| s == id.as_str())
                                .expect("path nodes come from the graph")
                        })
                        .collect();
                    ensure!(
                        got_nodes == ref_nodes,
                        "round {round}: path {got_nodes:?} vs oracle {ref_nodes:?}"
                    );
                    ensure!(
                        (p.cumulative - ref_cum).abs() <= 1e-12,
                        "round {round}: cumulative {} vs {ref_cum}",
                        p.cumulative
                    );
                }
                (SearchResult::NotFound { .. }, None) => {}
                (got, want) => {
                    return Err(format!("round {round}: search {got:?} vs oracle {want:?}"))
                }
            }
        }

        // Single shock on connected graphs: every trial must land on it.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = RcaParams {
            theta: -0.05,
            h_max: 12,
            epsilon: 0.01,
        };
        let mut trials = Vec::new();
        for _ in 0..20 {
            let n = rng.gen_range(4..=12);
            let names = node_names(n);
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for v in 1..n {
                edges.push((rng.gen_range(0..v), v));
            }
            let graph = build(n, &edges, &vec![1.0; edges.len()]);
            let mut delta = BTreeMap::new();
            for e in 0..graph.edge_count() as u32 {
                delta.insert(graph.edge_key_at(e), -0.2);
            }
            let shocked = EntityId::new(&names[rng.gen_range(0..n)]);
            let perturbed: BTreeSet<EntityId> = [shocked.clone()].into();
            let zone = unstable_zone(&graph, &delta, -1e300, None);
            let top: Vec<EntityId> = names
                .iter()
                .filter(|s| s.as_str() != shocked.as_str())
                .take(3)
                .map(|s| EntityId::new(s))
                .collect();
            let report = rca_report(day(), &graph, &delta, &top, &zone, &perturbed, &params)
                .map_err(|e| format!("single shock: {e}"))?;
            trials.push(TrialAttribution {
                perturbed,
                terminals: report.terminals(),
            });
        }
        ensure!(
            rca_fidelity(&trials) == Some(1.0),
            "single-shock fidelity was {:?}, want exactly 1.0",
            rca_fidelity(&trials)
        );

        // Perturbed node in a separate component: nothing may reach it.
        let mut trials = Vec::new();
        for round in 0..20 {
            let names = node_names(6);
            let edges = [(0usize, 1usize), (1, 2), (3, 4), (4, 5)];
            let graph = build(6, &edges, &[1.0; 4]);
            let mut delta = BTreeMap::new();
            for e in 0..graph.edge_count() as u32 {
                delta.insert(graph.edge_key_at(e), -0.3);
            }
            let shocked = EntityId::new(&names[3 + round % 3]);
            let perturbed: BTreeSet<EntityId> = [shocked].into();
            let zone = unstable_zone(&graph, &delta, -1e300, None);
            let top: Vec<EntityId> = names[0..3].iter().map(|s| EntityId::new(s)).collect();
            let report = rca_report(
                day(),
                &graph,
                &delta,
                &top,
                &zone,
                &perturbed,
                &RcaParams::default(),
            )
            .map_err(|e| format!("disconnected shock: {e}"))?;
            trials.push(TrialAttribution {
                perturbed,
                terminals: report.terminals(),
            });
        }
        ensure!(
            rca_fidelity(&trials) == Some(0.0),
            "disconnected-shock fidelity was {:?}, want exactly 0.0",
            rca_fidelity(&trials)
        );

        Ok("400 seeded searches equal exhaustive enumeration; single-shock fidelity 1.0; \
            disconnected-shock fidelity 0.0"
            .into())
    });
}

#[test]
fn criterion_5_scoring_boundary_behavior() {
    criterion(5, "scoring boundary behavior", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let edges = barbell(4);
        let names = node_names(8);
        let graph = build(8, &edges, &vec![1.0; edges.len()]);
        let assets: Vec<EntityId> = names.iter().map(|s| EntityId::new(s)).collect();
        for board_idx in 0..100 {
            let forecasts: BTreeMap<EntityId, ReturnForecast<f64>> = assets
                .iter()
                .map(|a| {
                    (
                        a.clone(),
                        ReturnForecast {
                            asset: a.clone(),
                            horizon: 5,
                            value: rng.gen_range(-0.05..0.05),
                        },
                    )
                })
                .collect();
            let deltas: Vec<f64> = (0..edges.len())
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect();
            let delta_map = |scale: f64| -> BTreeMap<EdgeKey, f64> {
                edges
                    .iter()
                    .zip(&deltas)
                    .map(|(&(u, v), &d)| {
                        (
                            EdgeKey::new(EntityId::new(&names[u]), EntityId::new(&names[v]))
                                .expect("distinct endpoints"),
                            scale * d,
                        )
                    })
                    .collect()
            };
            let exposures = risk_exposures(&graph, &delta_map(1.0), &assets)
                .map_err(|e| format!("board {board_idx}: {e}"))?;

            let board = ScoreBoard::build(day(), ScoreForm::Alpha { alpha: 1.0 }, &forecasts, &exposures)
                .map_err(|e| format!("board {board_idx}: {e}"))?;
            let mut by_r_hat: Vec<EntityId> = assets.clone();
            by_r_hat.sort_by(|a, b| {
                forecasts[b]
                    .value
                    .partial_cmp(&forecasts[a].value)
                    .expect("finite forecasts")
                    .then_with(|| a.cmp(b))
            });
            ensure!(
                board.ranking() == by_r_hat,
                "board {board_idx}: alpha=1 ranking differs from the pure forecast order"
            );

            let board = ScoreBoard::build(day(), ScoreForm::Alpha { alpha: 0.0 }, &forecasts, &exposures)
                .map_err(|e| format!("board {board_idx}: {e}"))?;
            let mut by_risk: Vec<EntityId> = assets.clone();
            by_risk.sort_by(|a, b| {
                exposures[a]
                    .normalized
                    .partial_cmp(&exposures[b].normalized)
                    .expect("finite exposures")
                    .then_with(|| a.cmp(b))
            });
            ensure!(
                board.ranking() == by_risk,
                "board {board_idx}: alpha=0 ranking differs from the ascending-risk order"
            );

            let reference = ScoreBoard::build(
                day(),
                ScoreForm::Alpha { alpha: 0.7 },
                &forecasts,
                &exposures,
            )
            .map_err(|e| format!("board {board_idx}: {e}"))?
            .ranking();
            for scale in [0.5, 1.7, 3.0] {
                let scaled = risk_exposures(&graph, &delta_map(scale), &assets)
                    .map_err(|e| format!("board {board_idx}: {e}"))?;
                let scaled_board =
                    ScoreBoard::build(day(), ScoreForm::Alpha { alpha: 0.7 }, &forecasts, &scaled)
                        .map_err(|e| format!("board {board_idx}: {e}"))?;
                ensure!(
                    scaled_board.ranking() == reference,
                    "board {board_idx}: ranking moved under delta scaling by {scale}"
                );
            }
        }
        Ok("alpha=1 equals the forecast order and alpha=0 the ascending-risk order on 100 \
            seeded boards; rankings unchanged under delta scaling by 0.5, 1.7 and 3.0"
            .into())
    });
}

#[test]
fn criterion_6_metric_correctness() {
    criterion(6, "metric correctness", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for round in 0..100 {
            let assets: Vec<EntityId> =
                (0..15).map(|i| EntityId::new(format!("a{i:02}"))).collect();
            let gains: BTreeMap<EntityId, f64> = assets
                .iter()
                .map(|a| (a.clone(), rng.gen_range(0.0..4.0)))
                .collect();
            let mut ranking = assets.clone();
            ranking.shuffle(&mut rng);

            let got = ndcg_at_10(&ranking, &gains).map_err(|e| format!("round {round}: {e}"))?;
            let dcg: f64 = ranking
                .iter()
                .take(10)
                .enumerate()
                .map(|(i, a)| gains[a] / ((i + 2) as f64).log2())
                .sum();
            let mut sorted: Vec<f64> = gains.values().copied().collect();
            sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite gains"));
            let idcg: f64 = sorted
                .iter()
                .take(10)
                .enumerate()
                .map(|(i, g)| g / ((i + 2) as f64).log2())
                .sum();
            let want = if idcg == 0.0 { 0.0 } else { dcg / idcg };
            ensure!(
                (got - want).abs() <= 1e-12,
                "round {round}: ndcg {got} vs brute force {want}"
            );
        }

        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = fixture_config("desk40");
        run_cli(&[
            "--config",
            config.to_str().expect("utf-8 path"),
            "--out",
            out.path().to_str().expect("utf-8 path"),
            "--control",
            "eval",
        ])?;
        let metrics = read_json(&out.path().join("eval/metrics.json"))?;
        let vol = metrics["top10_volatility"]
            .as_f64()
            .ok_or("metrics.json lacks top10_volatility")?;
        ensure!(vol == 0.0, "control top-10 volatility was {vol}, want exactly 0");
        Ok("ndcg matches the definitional form at 1e-12 on 100 instances; \
            no-shock control volatility is exactly 0"
            .into())
    });
}

#[test]
fn criterion_7_end_to_end_determinism() {
    criterion(7, "end-to-end determinism", None, || {
        let config = fixture_config("desk40");
        let config = config.to_str().expect("utf-8 path");
        let out_a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out_b = tempfile::tempdir().map_err(|e| e.to_string())?;

        let started = Instant::now();
        run_cli(&["--config", config, "--out", out_a.path().to_str().expect("utf-8"), "run"])?;
        let first_run = started.elapsed().as_secs_f64();
        ensure!(
            first_run < 60.0,
            "run_range took {first_run:.1}s, the budget is 60s"
        );
        run_cli(&["--config", config, "--out", out_b.path().to_str().expect("utf-8"), "run"])?;

        let manifest_a =
            std::fs::read(out_a.path().join("manifest.json")).map_err(|e| e.to_string())?;
        let manifest_b =
            std::fs::read(out_b.path().join("manifest.json")).map_err(|e| e.to_string())?;
        ensure!(
            manifest_a == manifest_b,
            "manifests differ between two identical runs"
        );
        let parsed: serde_json::Value =
            serde_json::from_slice(&manifest_a).map_err(|e| e.to_string())?;
        let days = parsed["days"].as_object().map(|m| m.len()).unwrap_or(0);
        ensure!(days == 20, "expected 20 scored days in the manifest, found {days}");

        let eval_a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let eval_b = tempfile::tempdir().map_err(|e| e.to_string())?;
        for out in [&eval_a, &eval_b] {
            run_cli(&[
                "--config",
                config,
                "--out",
                out.path().to_str().expect("utf-8"),
                "--trials",
                "20",
                "eval",
            ])?;
        }
        let metrics_a =
            std::fs::read(eval_a.path().join("eval/metrics.json")).map_err(|e| e.to_string())?;
        let metrics_b =
            std::fs::read(eval_b.path().join("eval/metrics.json")).map_err(|e| e.to_string())?;
        ensure!(
            metrics_a == metrics_b,
            "metric JSON differs between two seeded evaluations"
        );
        Ok(format!(
            "run_range finished in {first_run:.1}s with byte-identical manifests over 20 days; \
             20-trial evaluations reproduce identical metrics JSON"
        ))
    });
}

#[test]
fn criterion_8_sensitivity_harness_parity() {
    criterion(8, "sensitivity harness parity", None, || {
        let config = fixture_config("desk40");
        let config = config.to_str().expect("utf-8 path");
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out_str = out.path().to_str().expect("utf-8 path");

        run_cli(&[
            "--config", config, "--out", out_str, "sweep", "--param", "alpha", "--values",
            "0.5,0.7,0.9",
        ])?;
        run_cli(&[
            "--config", config, "--out", out_str, "sweep", "--param", "theta",
            "--values=-0.03,-0.05,-0.07",
        ])?;

        for (file, grid) in [
            ("sweep_alpha.json", vec![0.5, 0.7, 0.9]),
            ("sweep_theta.json", vec![-0.03, -0.05, -0.07]),
        ] {
            let sweep = read_json(&out.path().join("eval").join(file))?;
            let points = sweep["points"]
                .as_array()
                .ok_or_else(|| format!("{file} lacks points"))?;
            let values: Vec<f64> = points
                .iter()
                .map(|p| p["value"].as_f64().expect("numeric grid value"))
                .collect();
            ensure!(values == grid, "{file}: grid {values:?}, want {grid:?}");
            for point in points {
                ensure!(
                    point["report"]["ndcg"].as_f64().is_some(),
                    "{file}: a sweep point lacks metrics"
                );
            }
        }
        for table in ["sweep_alpha.md", "sweep_theta.md"] {
            let text = std::fs::read_to_string(out.path().join("eval").join(table))
                .map_err(|e| format!("missing comparison table {table}: {e}"))?;
            let rows = text.lines().count();
            ensure!(rows == 5, "{table}: expected header + separator + 3 rows, got {rows} lines");
        }
        Ok("alpha and theta grids ran end to end; metrics JSON and comparison tables emitted \
            for all 6 points"
            .into())
    });
}

#[test]
fn criterion_9_supply_chain_attribution() {
    criterion(9, "supply-chain attribution", None, || {
        let config = fixture_config("supply_chain");
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        run_cli(&[
            "--config",
            config.to_str().expect("utf-8 path"),
            "--out",
            out.path().to_str().expect("utf-8 path"),
            "eval",
        ])?;
        let metrics = read_json(&out.path().join("eval/metrics.json"))?;
        let fidelity = metrics["rca_fidelity"]
            .as_f64()
            .ok_or("metrics.json lacks rca_fidelity")?;
        let trials = metrics["trials"].as_u64().unwrap_or(0);
        ensure!(trials == 20, "expected 20 trials, ran {trials}");
        ensure!(fidelity == 1.0, "fidelity was {fidelity}, want exactly 1.0");

        let csv = std::fs::read_to_string(out.path().join("eval/trials.csv"))
            .map_err(|e| e.to_string())?;
        let rows: Vec<&str> = csv
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("trial,"))
            .collect();
        ensure!(rows.len() == 20, "trials.csv holds {} rows, want 20", rows.len());
        for row in &rows {
            let fields: Vec<&str> = row.split(',').collect();
            ensure!(
                fields[1] == "HUB",
                "a trial targeted {} instead of the hub",
                fields[1]
            );
            ensure!(
                fields.last() == Some(&"true"),
                "a trial's paths never reached the hub: {row}"
            );
        }
        Ok("all 20 seeded trials produced a path terminating at the shocked hub".into())
    });
}
