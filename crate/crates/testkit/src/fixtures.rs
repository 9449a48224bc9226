//! Edge lists for the small named graphs used across the test suites.

/// Path graph on `n` nodes: 0 - 1 - ... - (n-1).
pub fn path(n: usize) -> Vec<(usize, usize)> {
    (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect()
}

/// Cycle on `n >= 3` nodes.
pub fn cycle(n: usize) -> Vec<(usize, usize)> {
    assert!(n >= 3);
    let mut e = path(n);
    e.push((0, n - 1));
    e
}

/// Star on `n >= 2` nodes, node 0 in the center.
pub fn star(n: usize) -> Vec<(usize, usize)> {
    assert!(n >= 2);
    (1..n).map(|i| (0, i)).collect()
}

/// Complete graph on `n` nodes.
pub fn clique(n: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            e.push((i, j));
        }
    }
    e
}

/// Two `k`-cliques joined by a single bridge edge; `2k` nodes, the bridge
/// runs between node `k - 1` and node `k`.
pub fn barbell(k: usize) -> Vec<(usize, usize)> {
    assert!(k >= 2);
    let mut e = clique(k);
    for i in 0..k {
        for j in (i + 1)..k {
            e.push((k + i, k + j));
        }
    }
    e.push((k - 1, k));
    e
}

/// Grid graph with `rows * cols` nodes in row-major order.
pub fn grid(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                e.push((i, i + 1));
            }
            if r + 1 < rows {
                e.push((i, i + cols));
            }
        }
    }
    e
}

/// Zero-padded node names "n00", "n01", ... so that index order equals
/// lexicographic name order for up to 100 nodes.
pub fn node_names(n: usize) -> Vec<String> {
    assert!(n <= 100);
    (0..n).map(|i| format!("n{i:02}")).collect()
}
