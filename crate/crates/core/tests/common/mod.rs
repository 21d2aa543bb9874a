//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

/// Exact transportation optimum between uniform empirical measures by
/// min-cost flow in integer mass units (each source atom carries `m`
/// units, each sink atom absorbs `n`).
pub fn transport_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let source = n + m;
    let sink = source + 1;
    let nodes = sink + 1;
    struct Edge {
        to: usize,
        cap: i64,
        cost: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |edges: &mut Vec<Edge>, u: usize, v: usize, cap: i64, cost: f64| {
        adj[u].push(edges.len());
        edges.push(Edge { to: v, cap, cost });
        adj[v].push(edges.len());
        edges.push(Edge { to: u, cap: 0, cost: -cost });
    };
    for i in 0..n {
        add(&mut edges, source, i, m as i64, 0.0);
        for j in 0..m {
            add(&mut edges, i, n + j, i64::MAX / 4, (a[i] - b[j]).abs());
        }
    }
    for j in 0..m {
        add(&mut edges, n + j, sink, n as i64, 0.0);
    }
    let total_units = (n * m) as i64;
    let mut flow = 0;
    let mut cost = 0.0;
    while flow < total_units {
        // Bellman-Ford shortest path in the residual graph.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<usize>> = vec![None; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if !dist[u].is_finite() {
                    continue;
                }
                for &e in &adj[u] {
                    let edge = &edges[e];
                    let candidate = dist[u] + edge.cost;
                    if edge.cap > 0 && candidate < dist[edge.to] - 1e-12 * (1.0 + candidate.abs()) {
                        dist[edge.to] = candidate;
                        prev[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut push = total_units - flow;
        let mut v = sink;
        while let Some(e) = prev[v] {
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while let Some(e) = prev[v] {
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            cost += push as f64 * edges[e].cost;
            v = edges[e ^ 1].to;
        }
        flow += push;
    }
    cost / total_units as f64
}

/// Forgetting and BWT by direct loops over a lower-triangular table.
pub fn brute_metrics(m: &[Vec<f64>]) -> (f64, f64) {
    let t = m.len();
    let mut fgt = 0.0;
    let mut bwt = 0.0;
    for j in 0..t - 1 {
        let mut best = m[j][j];
        for row in m.iter().take(t - 1).skip(j + 1) {
            if row[j] < best {
                best = row[j];
            }
        }
        fgt += m[t - 1][j] - best;
        bwt += m[j][j] - m[t - 1][j];
    }
    (fgt / (t - 1) as f64, bwt / (t - 1) as f64)
}
