//! Exact minimum-cost transport between two small discrete measures,
//! solved by successive shortest paths with node potentials.
//!
//! The instances here are tiny (measure supports are bounded by node degree
//! plus one), so the Dijkstra inside uses plain scans. Every augmentation
//! saturates a supply or a demand, which bounds the number of rounds.

use crate::num::{real, Real};

/// Minimum total cost of moving `supply` onto `demand` where `cost[i][j]`
/// is the unit cost from supply `i` to demand `j`.
///
/// Requires balanced masses (up to float error) and finite costs; both are
/// the caller's responsibility.
pub(crate) fn min_cost_transport<F: Real>(supply: &[F], demand: &[F], cost: &[Vec<F>]) -> F {
    let m = supply.len();
    let n = demand.len();
    debug_assert!(m > 0 && n > 0);
    let total: F = supply.iter().copied().sum();
    // Mass below this is floating-point residue, not signal.
    let settle = total * F::epsilon() * real(16.0);

    let mut rs: Vec<F> = supply.to_vec();
    let mut rd: Vec<F> = demand.to_vec();
    let mut x = vec![vec![F::zero(); n]; m];
    // One potential per node: sources 0..m, sinks m..m+n.
    let mut pi = vec![F::zero(); m + n];

    loop {
        let remaining: F = rs.iter().copied().sum();
        if remaining <= settle {
            break;
        }

        // Multi-source Dijkstra over the residual bipartite graph using
        // reduced costs. Scan-based; the graphs are tiny.
        let inf = F::infinity();
        let mut dist = vec![inf; m + n];
        let mut prev: Vec<Option<usize>> = vec![None; m + n];
        let mut done = vec![false; m + n];
        for i in 0..m {
            if rs[i] > F::zero() {
                dist[i] = F::zero();
            }
        }
        loop {
            let mut u = None;
            let mut best = inf;
            for v in 0..m + n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = Some(v);
                }
            }
            let u = match u {
                Some(u) => u,
                None => break,
            };
            done[u] = true;
            if u < m {
                // Forward arcs source -> every sink.
                for (j, &c) in cost[u].iter().enumerate() {
                    let v = m + j;
                    if done[v] {
                        continue;
                    }
                    let reduced = (c + pi[u] - pi[v]).max(F::zero());
                    let cand = dist[u] + reduced;
                    if cand < dist[v] {
                        dist[v] = cand;
                        prev[v] = Some(u);
                    }
                }
            } else {
                // Backward arcs sink -> sources with positive flow.
                let j = u - m;
                for i in 0..m {
                    if done[i] || x[i][j] <= F::zero() {
                        continue;
                    }
                    let reduced = (-cost[i][j] + pi[u] - pi[i]).max(F::zero());
                    let cand = dist[u] + reduced;
                    if cand < dist[i] {
                        dist[i] = cand;
                        prev[i] = Some(u);
                    }
                }
            }
        }

        // Cheapest reachable sink that still wants mass.
        let mut sink = None;
        let mut best = inf;
        for j in 0..n {
            if rd[j] > F::zero() && dist[m + j] < best {
                best = dist[m + j];
                sink = Some(m + j);
            }
        }
        let sink = match sink {
            Some(s) => s,
            None => break, // nothing reachable: disconnected beyond tolerance
        };

        // Walk the path back to its source, finding the bottleneck.
        let mut bottleneck = rd[sink - m];
        let mut node = sink;
        let source = loop {
            let p = prev[node].expect("path nodes have predecessors");
            if node >= m {
                // arrived via forward arc p -> node
            } else {
                // arrived via backward arc p -> node, capacity x[node][p - m]
                bottleneck = bottleneck.min(x[node][p - m]);
            }
            node = p;
            if node < m && prev[node].is_none() {
                break node;
            }
        };
        bottleneck = bottleneck.min(rs[source]);

        // Apply the augmentation.
        let mut node = sink;
        while let Some(p) = prev[node] {
            if node >= m {
                x[p][node - m] += bottleneck;
            } else {
                x[node][p - m] -= bottleneck;
            }
            node = p;
        }
        rs[source] -= bottleneck;
        rd[sink - m] -= bottleneck;

        // Shift potentials so reduced costs stay nonnegative.
        let reach_cap = dist[sink];
        for v in 0..m + n {
            pi[v] += if dist[v] < reach_cap { dist[v] } else { reach_cap };
        }
    }

    let mut out = F::zero();
    for i in 0..m {
        for j in 0..n {
            if x[i][j] > F::zero() {
                out += x[i][j] * cost[i][j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn identity_transport_costs_nothing() {
        let cost = grid(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let c = min_cost_transport(&[0.5, 0.5], &[0.5, 0.5], &cost);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn point_mass_across_one_hop() {
        let cost = grid(&[&[1.0]]);
        let c = min_cost_transport(&[1.0], &[1.0], &cost);
        assert!((c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chooses_cheap_routes_first() {
        // Source 0 is near sink 0, source 1 near sink 1; crossing costs 3.
        let cost = grid(&[&[1.0, 3.0], &[3.0, 1.0]]);
        let c = min_cost_transport(&[0.7, 0.3], &[0.3, 0.7], &cost);
        // 0.3 to sink 0 (1.0), 0.3 to sink 1 from source 1 (1.0), remaining
        // 0.4 from source 0 crosses at 3.0.
        let want = 0.3 * 1.0 + 0.3 * 1.0 + 0.4 * 3.0;
        assert!((c - want).abs() < 1e-12, "{c} vs {want}");
    }

    #[test]
    fn rectangular_instance() {
        let cost = grid(&[&[0.0, 2.0, 2.0], &[2.0, 0.0, 1.0]]);
        let c = min_cost_transport(&[0.6, 0.4], &[0.3, 0.3, 0.4], &cost);
        // Optimal: 0.3 at cost 0, 0.3 at cost 0 (source 1 -> sink 1),
        // source 1's remaining 0.1 -> sink 2 at 1, source 0's 0.3 -> sink 2
        // at 2.
        let want = 0.1 * 1.0 + 0.3 * 2.0;
        assert!((c - want).abs() < 1e-12, "{c} vs {want}");
    }

    #[test]
    fn works_in_f32_too() {
        let cost: Vec<Vec<f32>> = vec![vec![1.0, 3.0], vec![3.0, 1.0]];
        let c = min_cost_transport(&[0.5f32, 0.5], &[0.5, 0.5], &cost);
        assert!((c - 1.0).abs() < 1e-6);
    }
}
