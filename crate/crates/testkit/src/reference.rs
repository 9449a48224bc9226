//! Dense, naive reference routines for graph curvature.
//!
//! Graphs are given as `(n, edges, weights)` with `edges[k] = (u, v)` and
//! `weights[k]` the positive weight of that edge. Measures are dense vectors
//! of length `n`. Costs between nodes are unweighted hop counts.

/// Breadth-first hop distances from `from`; `None` marks unreachable nodes.
pub fn hop_distances(n: usize, edges: &[(usize, usize)], from: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut dist = vec![None; n];
    dist[from] = Some(0);
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Lazy random-walk measure seated at `node`: `p_idle` stays put, the rest
/// spreads over neighbors in proportion to edge weight. A node with no
/// neighbors keeps all its mass.
pub fn lazy_measure(
    n: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
    node: usize,
    p_idle: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let mut incident = Vec::new();
    for (k, &(u, v)) in edges.iter().enumerate() {
        if u == node {
            incident.push((v, weights[k]));
        } else if v == node {
            incident.push((u, weights[k]));
        }
    }
    if incident.is_empty() {
        out[node] = 1.0;
        return out;
    }
    let total: f64 = incident.iter().map(|&(_, w)| w).sum();
    out[node] = p_idle;
    for (nbr, w) in incident {
        out[nbr] += (1.0 - p_idle) * w / total;
    }
    out
}

/// First Wasserstein distance between two dense measures under hop-count
/// costs. Returns `None` when some target of `nu` is unreachable from the
/// support of `mu`.
pub fn w1_reference(n: usize, edges: &[(usize, usize)], mu: &[f64], nu: &[f64]) -> Option<f64> {
    let support = |m: &[f64]| -> Vec<usize> {
        (0..n).filter(|&i| m[i] > 0.0).collect()
    };
    let src = support(mu);
    let dst = support(nu);
    let mut cost = vec![vec![0.0; dst.len()]; src.len()];
    for (a, &i) in src.iter().enumerate() {
        let dist = hop_distances(n, edges, i);
        for (b, &j) in dst.iter().enumerate() {
            cost[a][b] = dist[j]? as f64;
        }
    }
    let supply: Vec<f64> = src.iter().map(|&i| mu[i]).collect();
    let demand: Vec<f64> = dst.iter().map(|&j| nu[j]).collect();
    Some(crate::transport::exact_transport(&supply, &demand, &cost))
}

/// Ollivier Ricci curvature of the edge `(u, v)`: one minus the transport
/// cost between the endpoint walk measures (the hop length of an edge is 1).
pub fn ollivier_reference(
    n: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
    p_idle: f64,
    u: usize,
    v: usize,
) -> Option<f64> {
    let mu = lazy_measure(n, edges, weights, u, p_idle);
    let nu = lazy_measure(n, edges, weights, v, p_idle);
    Some(1.0 - w1_reference(n, edges, &mu, &nu)?)
}

/// Weighted Forman curvature of edge index `e` with unit node weights.
pub fn forman_reference(n: usize, edges: &[(usize, usize)], weights: &[f64], e: usize) -> f64 {
    let _ = n;
    let (u, v) = edges[e];
    let we = weights[e];
    let side = |node: usize| -> f64 {
        let mut s = 0.0;
        for (k, &(a, b)) in edges.iter().enumerate() {
            if k == e {
                continue;
            }
            if a == node || b == node {
                s += 1.0 / (we * weights[k]).sqrt();
            }
        }
        s
    };
    we * (1.0 / we + 1.0 / we - side(u) - side(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hop_distances_on_a_path() {
        let edges = [(0, 1), (1, 2), (2, 3)];
        let d = hop_distances(4, &edges, 0);
        assert_eq!(d, vec![Some(0), Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn measure_mass_sums_to_one() {
        let edges = [(0, 1), (1, 2), (0, 2)];
        let w = [1.0, 2.0, 4.0];
        let m = lazy_measure(3, &edges, &w, 0, 0.5);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((m[0] - 0.5).abs() < 1e-12);
        assert!((m[1] - 0.5 * 1.0 / 5.0).abs() < 1e-12);
        assert!((m[2] - 0.5 * 4.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn single_edge_curvature_depends_on_idling() {
        // At half idling both endpoint measures are (1/2, 1/2), so the
        // transport cost vanishes and the curvature is one. With no idling
        // each measure sits entirely on the opposite node and every unit of
        // mass must cross the edge, so the curvature is zero.
        let edges = [(0, 1)];
        let w = [1.0];
        let half = ollivier_reference(2, &edges, &w, 0.5, 0, 1).unwrap();
        assert!((half - 1.0).abs() < 1e-12);
        let none = ollivier_reference(2, &edges, &w, 0.0, 0, 1).unwrap();
        assert!(none.abs() < 1e-12);
    }

    #[test]
    fn forman_matches_degree_formula_without_weights() {
        // For unit weights the expression collapses to 4 - deg(u) - deg(v).
        let edges = [(0, 1), (1, 2), (2, 3), (1, 3)];
        let w = [1.0; 4];
        for (e, &(u, v)) in edges.iter().enumerate() {
            let deg = |x: usize| edges.iter().filter(|&&(a, b)| a == x || b == x).count();
            let expect = 4.0 - deg(u) as f64 - deg(v) as f64;
            let got = forman_reference(4, &edges, &w, e);
            assert!((got - expect).abs() < 1e-12, "edge {e}: {got} vs {expect}");
        }
    }
}
