//! Exact discrete optimal transport by the primal network simplex method on
//! the bipartite supply/demand graph.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct Arc {
    src: usize,
    dst: usize,
    flow: f64,
    cost: f64,
}

struct Tree {
    n: usize,
    arcs: Vec<Arc>,
    /// arc ids incident to each node; sources are `0..n`, sinks `n..n+m`
    incident: Vec<Vec<usize>>,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
}

impl Tree {
    fn rebuild(&mut self) {
        let nodes = self.incident.len();
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::with_capacity(nodes);
        self.parent[0] = usize::MAX;
        self.depth[0] = 0;
        self.potential[0] = 0.0;
        seen[0] = true;
        queue.push_back(0);
        while let Some(v) = queue.pop_front() {
            for &id in &self.incident[v] {
                let arc = self.arcs[id];
                let (u, w) = (arc.src, self.n + arc.dst);
                let other = if v == u { w } else { u };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                self.parent[other] = v;
                self.parent_arc[other] = id;
                self.depth[other] = self.depth[v] + 1;
                // reduced cost zero on basic arcs: c = pi_src - pi_dst
                self.potential[other] =
                    if other == w { self.potential[u] - arc.cost } else { self.potential[w] + arc.cost };
                queue.push_back(other);
            }
        }
    }

    fn detach(&mut self, id: usize) {
        let arc = self.arcs[id];
        for node in [arc.src, self.n + arc.dst] {
            let list = &mut self.incident[node];
            if let Some(pos) = list.iter().position(|&a| a == id) {
                list.swap_remove(pos);
            }
        }
    }

    fn attach(&mut self, id: usize) {
        let arc = self.arcs[id];
        self.incident[arc.src].push(id);
        self.incident[self.n + arc.dst].push(id);
    }
}

/// Minimum of `sum pi_ij c(i, j)` over couplings of `supply` and `demand`.
///
/// Both weight vectors must be nonnegative with equal totals (up to rounding).
pub fn transport_cost(
    supply: &[f64],
    demand: &[f64],
    mut cost: impl FnMut(usize, usize) -> f64,
) -> Result<f64> {
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 {
        return Err(Error::Invalid("transport between empty measures".into()));
    }
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    if (total_a - total_b).abs() > 1e-9 * total_a.max(total_b).max(1.0) {
        return Err(Error::MassMismatch(total_a - total_b));
    }
    if n == 1 || m == 1 {
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..m {
                let w = if n == 1 { demand[j] } else { supply[i] };
                total += w * cost(i, j);
            }
        }
        return Ok(total);
    }

    // Northwest-corner staircase: n + m - 1 arcs forming a spanning tree.
    let mut ra = supply.to_vec();
    let mut rb: Vec<f64> = demand.iter().map(|b| b * total_a / total_b).collect();
    let mut arcs = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let f = ra[i].min(rb[j]).max(0.0);
        ra[i] -= f;
        rb[j] -= f;
        arcs.push(Arc { src: i, dst: j, flow: f, cost: cost(i, j) });
        if i == n - 1 && j == m - 1 {
            break;
        }
        if i == n - 1 {
            j += 1;
        } else if j == m - 1 || ra[i] <= rb[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(arcs.len(), n + m - 1);

    let nodes = n + m;
    let mut tree = Tree {
        n,
        arcs,
        incident: vec![Vec::new(); nodes],
        parent: vec![usize::MAX; nodes],
        parent_arc: vec![usize::MAX; nodes],
        depth: vec![0; nodes],
        potential: vec![0.0; nodes],
    };
    for id in 0..tree.arcs.len() {
        tree.attach(id);
    }
    tree.rebuild();

    let max_cost = tree.arcs.iter().map(|a| a.cost.abs()).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-12 * max_cost;
    let total_arcs = n * m;
    let block = ((total_arcs as f64).sqrt().ceil() as usize).max(16).min(total_arcs);
    let max_pivots = 50 * nodes * nodes.max(64);
    let mut cursor = 0usize;
    let mut pivots = 0usize;

    loop {
        // block search pricing
        let mut best = (0.0f64, usize::MAX, usize::MAX);
        let mut scanned = 0usize;
        while scanned < total_arcs {
            let stop = (scanned + block).min(total_arcs);
            while scanned < stop {
                let idx = cursor;
                cursor += 1;
                if cursor == total_arcs {
                    cursor = 0;
                }
                scanned += 1;
                let (p, q) = (idx / m, idx % m);
                let reduced = cost(p, q) - tree.potential[p] + tree.potential[n + q];
                if reduced < best.0 {
                    best = (reduced, p, q);
                }
            }
            if best.0 < -eps {
                break;
            }
        }
        if best.0 >= -eps {
            break;
        }
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver(format!("network simplex exceeded {max_pivots} pivots")));
        }
        let (_, p, q) = best;
        let sink = n + q;

        // Cycle: entering arc p -> sink carries +theta; walk the tree path back.
        // Traversing an arc from its sink end to its source end carries -theta.
        let mut up_from_sink = Vec::new();
        let mut up_from_src = Vec::new();
        let (mut a, mut b) = (sink, p);
        while a != b {
            if tree.depth[a] >= tree.depth[b] {
                up_from_sink.push(a);
                a = tree.parent[a];
            } else {
                up_from_src.push(b);
                b = tree.parent[b];
            }
        }
        // (arc id, sign) along the cycle
        let mut cycle: Vec<(usize, bool)> = Vec::with_capacity(up_from_sink.len() + up_from_src.len());
        for &child in &up_from_sink {
            // child -> parent; minus when child is a sink
            cycle.push((tree.parent_arc[child], child < n));
        }
        for &child in up_from_src.iter().rev() {
            // parent -> child; minus when child is a source
            cycle.push((tree.parent_arc[child], child >= n));
        }
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for &(id, plus) in &cycle {
            if !plus && tree.arcs[id].flow < theta {
                theta = tree.arcs[id].flow;
                leaving = id;
            }
        }
        if leaving == usize::MAX {
            return Err(Error::Solver("unbounded transport cycle".into()));
        }
        for &(id, plus) in &cycle {
            let f = &mut tree.arcs[id].flow;
            if plus {
                *f += theta;
            } else {
                *f = (*f - theta).max(0.0);
            }
        }
        tree.detach(leaving);
        tree.arcs[leaving] = Arc { src: p, dst: q, flow: theta, cost: cost(p, q) };
        tree.attach(leaving);
        tree.rebuild();
    }

    Ok(tree.arcs.iter().map(|a| a.flow * a.cost).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_permutation(x: &[f64], y: &[f64]) -> f64 {
        // equal weights 1/n: optimal plan is a permutation
        fn rec(x: &[f64], y: &mut Vec<f64>, k: usize, acc: f64, best: &mut f64) {
            if k == x.len() {
                *best = best.min(acc);
                return;
            }
            for j in k..y.len() {
                y.swap(k, j);
                rec(x, y, k + 1, acc + (x[k] - y[k]).abs(), best);
                y.swap(k, j);
            }
        }
        let mut best = f64::INFINITY;
        rec(x, &mut y.to_vec(), 0, 0.0, &mut best);
        best / x.len() as f64
    }

    #[test]
    fn matches_permutation_brute_force() {
        let x: [f64; 6] = [0.3, -1.2, 2.5, 0.9, -0.4, 1.7];
        let y = [1.1, 0.0, -2.0, 0.6, 3.3, -0.8];
        let w = vec![1.0 / 6.0; 6];
        let got = transport_cost(&w, &w, |i, j| (x[i] - y[j]).abs()).unwrap();
        assert!((got - brute_force_permutation(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn split_mass() {
        let got = transport_cost(&[0.5, 0.5], &[1.0], |i, _| [1.0, 1.0][i]).unwrap();
        assert!((got - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_monotone_cost_needs_pivots() {
        // cost favours the anti-diagonal, northwest corner starts on the diagonal
        let c = [[5.0, 1.0, 4.0], [1.0, 5.0, 4.0], [4.0, 4.0, 0.5]];
        let w = [1.0 / 3.0; 3];
        let got = transport_cost(&w, &w, |i, j| c[i][j]).unwrap();
        assert!((got - 2.5 / 3.0).abs() < 1e-12);
    }
}
