//! Exact solvers for the balanced transportation problem, used as oracles.
//!
//! Two independent routes: a linear program handed to `minilp`, and for small
//! instances brute-force enumeration of every spanning-tree basis of the
//! bipartite transport graph. The optimum of a transportation problem is
//! attained at a basic solution, and the bases are exactly the spanning trees,
//! so the enumeration is exact by construction.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

const FEAS_TOL: f64 = 1e-9;

/// Minimum transport cost via linear programming.
///
/// `cost[i][j]` is the unit cost of moving mass from supply `i` to demand `j`.
/// Supplies and demands must balance to within `1e-9`.
pub fn lp_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let m = supply.len();
    let n = demand.len();
    assert!(m > 0 && n > 0, "empty transport instance");
    assert_eq!(cost.len(), m);
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    assert!(
        (total_s - total_d).abs() <= FEAS_TOL,
        "unbalanced instance: supply {total_s} vs demand {total_d}"
    );

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut rows: Vec<LinearExpr> = (0..m).map(|_| LinearExpr::empty()).collect();
    let mut cols: Vec<LinearExpr> = (0..n).map(|_| LinearExpr::empty()).collect();
    for i in 0..m {
        assert_eq!(cost[i].len(), n);
        for j in 0..n {
            let var = problem.add_var(cost[i][j], (0.0, f64::INFINITY));
            rows[i].add(var, 1.0);
            cols[j].add(var, 1.0);
        }
    }
    for (i, row) in rows.into_iter().enumerate() {
        problem.add_constraint(row, ComparisonOp::Eq, supply[i]);
    }
    for (j, col) in cols.into_iter().enumerate() {
        problem.add_constraint(col, ComparisonOp::Eq, demand[j]);
    }
    problem.solve().expect("transport LP is feasible").objective()
}

/// Minimum transport cost by enumerating all spanning-tree bases.
///
/// Only sensible for small instances; panics if `m * n > 20`.
pub fn enumerate_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let m = supply.len();
    let n = demand.len();
    assert!(m > 0 && n > 0, "empty transport instance");
    assert!(m * n <= 20, "enumeration oracle limited to m*n <= 20");
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    assert!((total_s - total_d).abs() <= FEAS_TOL, "unbalanced instance");

    // All candidate edges of the bipartite transport graph.
    let mut edges = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            edges.push((i, m + j));
        }
    }
    let nodes = m + n;
    let basis_size = nodes - 1;
    let mut best = f64::INFINITY;
    let mut chosen = vec![0usize; basis_size];
    enumerate_subsets(&edges, 0, 0, &mut chosen, &mut |subset| {
        if let Some(c) = tree_cost(subset, supply, demand, cost, m, nodes) {
            if c < best {
                best = c;
            }
        }
    });
    assert!(best.is_finite(), "no feasible spanning-tree basis found");
    best
}

fn enumerate_subsets(
    edges: &[(usize, usize)],
    start: usize,
    depth: usize,
    chosen: &mut [usize],
    visit: &mut dyn FnMut(&[(usize, usize)]),
) {
    let want = chosen.len();
    if depth == want {
        let subset: Vec<(usize, usize)> = chosen.iter().map(|&k| edges[k]).collect();
        visit(&subset);
        return;
    }
    let remaining = want - depth;
    for k in start..=edges.len().saturating_sub(remaining) {
        chosen[depth] = k;
        enumerate_subsets(edges, k + 1, depth + 1, chosen, visit);
    }
}

/// Solve the flows implied by a spanning-tree subset via leaf elimination.
/// Returns `None` when the subset is not a tree or the basic solution is
/// infeasible (some flow negative).
fn tree_cost(
    subset: &[(usize, usize)],
    supply: &[f64],
    demand: &[f64],
    cost: &[Vec<f64>],
    m: usize,
    nodes: usize,
) -> Option<f64> {
    let mut degree = vec![0usize; nodes];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (e, &(a, b)) in subset.iter().enumerate() {
        degree[a] += 1;
        degree[b] += 1;
        incident[a].push(e);
        incident[b].push(e);
    }
    // Net balance: positive for supply nodes, negative for demand nodes.
    let mut balance: Vec<f64> = supply
        .iter()
        .copied()
        .chain(demand.iter().map(|&d| -d))
        .collect();

    let mut used = vec![false; subset.len()];
    let mut total = 0.0;
    let mut leaves: Vec<usize> = (0..nodes).filter(|&v| degree[v] == 1).collect();
    let mut processed = 0;
    while let Some(v) = leaves.pop() {
        let e = match incident[v].iter().find(|&&e| !used[e]) {
            Some(&e) => e,
            None => continue,
        };
        used[e] = true;
        processed += 1;
        let (a, b) = subset[e];
        let other = if a == v { b } else { a };
        debug_assert!((v < m) != (other < m), "transport edges are bipartite");
        let (src, dst) = if a < m { (a, b - m) } else { (b, a - m) };
        // Flow on the tree edge is whatever clears this leaf's balance.
        let flow = if v < m { balance[v] } else { -balance[v] };
        if flow < -FEAS_TOL {
            return None;
        }
        total += flow.max(0.0) * cost[src][dst];
        if v < m {
            balance[other] += flow; // the sink side receives
        } else {
            balance[other] -= flow; // the source side ships
        }
        balance[v] = 0.0;
        degree[v] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
    }
    if processed != subset.len() {
        return None; // subset contained a cycle / was disconnected
    }
    if balance.iter().any(|&b| b.abs() > FEAS_TOL) {
        return None;
    }
    Some(total)
}

/// Exact transport cost: enumeration when tiny, LP otherwise.
pub fn exact_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    if supply.len() * demand.len() <= 20 {
        enumerate_transport(supply, demand, cost)
    } else {
        lp_transport(supply, demand, cost)
    }
}
