//! Exhaustive search for the strongest admissible path to a target set.
//!
//! Node indices are assumed to sort in the same order as the node names they
//! stand for, so lexicographic comparison of index sequences matches
//! comparison of name sequences.

pub struct PathQuery<'a> {
    /// Adjacency lists by node index (any order).
    pub adj: &'a [Vec<usize>],
    /// Curvature shift for an edge, `None` when the edge carries no value.
    pub delta: &'a dyn Fn(usize, usize) -> Option<f64>,
    /// Marks target nodes.
    pub targets: &'a [bool],
    /// Admissibility threshold on `|delta|` (strict).
    pub theta_abs: f64,
    /// Decay floor on `|delta|` (inclusive).
    pub epsilon: f64,
    /// Maximum number of edges in a path.
    pub h_max: usize,
}

/// Enumerate every simple path of admissible edges from `start` that ends at
/// the first target it touches, then pick the best one: highest cumulative
/// `|delta|`, then fewest edges, then lexicographically smallest sequence.
pub fn best_path(q: &PathQuery, start: usize) -> Option<(Vec<usize>, f64)> {
    if q.targets[start] {
        return Some((vec![start], 0.0));
    }
    let mut candidates: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut visited = vec![false; q.adj.len()];
    visited[start] = true;
    let mut path = vec![start];
    walk(q, start, 0, 0.0, &mut visited, &mut path, &mut candidates);
    candidates.sort_by(|(pa, ca), (pb, cb)| {
        cb.partial_cmp(ca)
            .unwrap()
            .then(pa.len().cmp(&pb.len()))
            .then(pa.cmp(pb))
    });
    candidates.into_iter().next()
}

fn walk(
    q: &PathQuery,
    node: usize,
    depth: usize,
    cum: f64,
    visited: &mut Vec<bool>,
    path: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, f64)>,
) {
    if depth == q.h_max {
        return;
    }
    for &nbr in &q.adj[node] {
        if visited[nbr] {
            continue;
        }
        let d = match (q.delta)(node, nbr) {
            Some(d) => d,
            None => continue,
        };
        if !(d.abs() > q.theta_abs && d.abs() >= q.epsilon) {
            continue;
        }
        if q.targets[nbr] {
            let mut p = path.clone();
            p.push(nbr);
            out.push((p, cum + d.abs()));
            continue; // the walk stops at the first target it reaches
        }
        visited[nbr] = true;
        path.push(nbr);
        walk(q, nbr, depth + 1, cum + d.abs(), visited, path, out);
        path.pop();
        visited[nbr] = false;
    }
}
