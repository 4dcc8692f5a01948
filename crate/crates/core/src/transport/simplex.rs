//! Primal network simplex for uncapacitated minimum-cost flow.
//!
//! Big-M start with one artificial arc per node to an extra root, strongly
//! feasible spanning trees and Cunningham's leaving-arc rule (last blocking
//! arc around the cycle), block pricing. On each pivot only the subtree cut
//! off by the leaving arc is re-hung, so the work per pivot is proportional
//! to the cycle plus that subtree.

use crate::{Error, Result};

/// An optimal flow with node potentials certifying it: every arc has
/// reduced cost `c + π_source − π_target ≥ −tol`, tree arcs exactly 0.
#[derive(Clone, Debug)]
pub struct FlowSolution {
    pub flow: Vec<f64>,
    pub potential: Vec<f64>,
    pub cost: f64,
    pub pivots: usize,
}

impl FlowSolution {
    /// `primal − dual` for the given problem (zero at optimality up to
    /// round-off); the dual objective is `−Σ_v b_v π_v`.
    pub fn duality_gap(&self, supply: &[f64]) -> f64 {
        let dual: f64 = -supply
            .iter()
            .zip(&self.potential)
            .map(|(b, p)| b * p)
            .sum::<f64>();
        self.cost - dual
    }
}

struct Tree {
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
}

impl Tree {
    fn other(&self, arc: usize, node: usize) -> usize {
        if self.source[arc] == node {
            self.target[arc]
        } else {
            self.source[arc]
        }
    }

    fn reduced_cost(&self, arc: usize) -> f64 {
        self.cost[arc] + self.pi[self.source[arc]] - self.pi[self.target[arc]]
    }

    fn attach(&mut self, child: usize, parent: usize, arc: usize) {
        self.parent[child] = parent;
        self.pred[child] = arc;
        self.up[child] = self.source[arc] == child;
        self.depth[child] = self.depth[parent] + 1;
        self.pi[child] = if self.up[child] {
            self.pi[parent] - self.cost[arc]
        } else {
            self.pi[parent] + self.cost[arc]
        };
    }

    fn remove_adjacent(&mut self, node: usize, arc: usize) {
        let list = &mut self.adjacency[node];
        if let Some(pos) = list.iter().position(|&a| a == arc) {
            list.swap_remove(pos);
        }
    }

    /// Re-hangs the subtree containing `q` below `p` through `arc`.
    fn rehang(&mut self, q: usize, p: usize, arc: usize) {
        self.attach(q, p, arc);
        let mut stack = vec![q];
        while let Some(u) = stack.pop() {
            for k in 0..self.adjacency[u].len() {
                let e = self.adjacency[u][k];
                if e == self.pred[u] {
                    continue;
                }
                let v = self.other(e, u);
                self.attach(v, u, e);
                stack.push(v);
            }
        }
    }
}

/// Solves `min Σ c_a f_a` subject to `outflow(v) − inflow(v) = supply[v]`,
/// `f ≥ 0`, over the directed arcs `(source, target, cost)`.
pub fn min_cost_flow(
    nodes: usize,
    supply: &[f64],
    arcs: &[(usize, usize, f64)],
) -> Result<FlowSolution> {
    if supply.len() != nodes {
        return Err(Error::InvalidArgument(
            "supply length differs from node count".into(),
        ));
    }
    let total_supply: f64 = supply.iter().filter(|b| **b > 0.0).sum();
    let net: f64 = supply.iter().sum();
    if net.abs() > 1e-9 * total_supply.max(1.0) {
        return Err(Error::Unbalanced(total_supply, total_supply - net));
    }
    let mut max_cost: f64 = 0.0;
    for &(s, t, c) in arcs {
        if s >= nodes || t >= nodes {
            return Err(Error::InvalidArgument(format!(
                "arc ({s}, {t}) out of range"
            )));
        }
        if !c.is_finite() {
            return Err(Error::NonFiniteCost(s, t));
        }
        if c < 0.0 {
            return Err(Error::InvalidArgument(
                "arc costs must be nonnegative".into(),
            ));
        }
        max_cost = max_cost.max(c);
    }
    let root = nodes;
    let big_m = (nodes as f64 + 1.0) * (max_cost + 1.0);
    let real = arcs.len();
    let total = real + nodes;

    let mut tree = Tree {
        source: Vec::with_capacity(total),
        target: Vec::with_capacity(total),
        cost: Vec::with_capacity(total),
        flow: vec![0.0; total],
        in_tree: vec![false; total],
        parent: vec![root; nodes + 1],
        pred: vec![usize::MAX; nodes + 1],
        up: vec![false; nodes + 1],
        depth: vec![0; nodes + 1],
        pi: vec![0.0; nodes + 1],
        adjacency: vec![Vec::new(); nodes + 1],
    };
    for &(s, t, c) in arcs {
        tree.source.push(s);
        tree.target.push(t);
        tree.cost.push(c);
    }
    for v in 0..nodes {
        let a = real + v;
        if supply[v] >= 0.0 {
            tree.source.push(v);
            tree.target.push(root);
            tree.flow[a] = supply[v];
        } else {
            tree.source.push(root);
            tree.target.push(v);
            tree.flow[a] = -supply[v];
        }
        tree.cost.push(big_m);
        tree.in_tree[a] = true;
        tree.adjacency[v].push(a);
        tree.adjacency[root].push(a);
        tree.attach(v, root, a);
    }

    let tol = 64.0 * f64::EPSILON * big_m;
    let block = ((total as f64).sqrt().ceil() as usize).max(16);
    let mut next = 0usize;
    let mut pivots = 0usize;
    loop {
        // block pricing
        let mut entering = None;
        let mut best = -tol;
        let mut scanned = 0;
        while scanned < total {
            let end = (scanned + block).min(total);
            for _ in scanned..end {
                let a = next;
                next = if next + 1 == total { 0 } else { next + 1 };
                if !tree.in_tree[a] {
                    let rc = tree.reduced_cost(a);
                    if rc < best {
                        best = rc;
                        entering = Some(a);
                    }
                }
            }
            scanned = end;
            if entering.is_some() {
                break;
            }
        }
        let Some(a) = entering else { break };
        pivots += 1;

        let (first, second) = (tree.source[a], tree.target[a]);
        let join = {
            let (mut u, mut w) = (first, second);
            while u != w {
                if tree.depth[u] > tree.depth[w] {
                    u = tree.parent[u];
                } else if tree.depth[w] > tree.depth[u] {
                    w = tree.parent[w];
                } else {
                    u = tree.parent[u];
                    w = tree.parent[w];
                }
            }
            u
        };
        let mut delta = f64::INFINITY;
        let mut leaving = usize::MAX;
        let mut on_first = true;
        let mut u = first;
        while u != join {
            if tree.up[u] && tree.flow[tree.pred[u]] < delta {
                delta = tree.flow[tree.pred[u]];
                leaving = u;
                on_first = true;
            }
            u = tree.parent[u];
        }
        let mut u = second;
        while u != join {
            if !tree.up[u] && tree.flow[tree.pred[u]] <= delta {
                delta = tree.flow[tree.pred[u]];
                leaving = u;
                on_first = false;
            }
            u = tree.parent[u];
        }
        if leaving == usize::MAX {
            return Err(Error::InvalidArgument(
                "unbounded flow problem (negative cycle)".into(),
            ));
        }

        tree.flow[a] += delta;
        let mut u = first;
        while u != join {
            let e = tree.pred[u];
            if tree.up[u] {
                tree.flow[e] -= delta;
            } else {
                tree.flow[e] += delta;
            }
            u = tree.parent[u];
        }
        let mut u = second;
        while u != join {
            let e = tree.pred[u];
            if tree.up[u] {
                tree.flow[e] += delta;
            } else {
                tree.flow[e] -= delta;
            }
            u = tree.parent[u];
        }

        let out = tree.pred[leaving];
        let out_parent = tree.parent[leaving];
        tree.in_tree[out] = false;
        tree.remove_adjacent(leaving, out);
        tree.remove_adjacent(out_parent, out);
        tree.in_tree[a] = true;
        tree.adjacency[first].push(a);
        tree.adjacency[second].push(a);
        let (q, p) = if on_first {
            (first, second)
        } else {
            (second, first)
        };
        tree.rehang(q, p, a);
    }

    let residual: f64 = (real..total).map(|a| tree.flow[a]).sum();
    if residual > 1e-9 * total_supply.max(1.0) {
        return Err(Error::Disconnected(format!(
            "{residual} units could not be routed"
        )));
    }
    let flow: Vec<f64> = tree.flow[..real].to_vec();
    let cost = flow
        .iter()
        .zip(&tree.cost[..real])
        .map(|(f, c)| f * c)
        .sum();
    let mut potential = tree.pi[..nodes].to_vec();
    // potentials are defined up to a constant; anchor node 0 at zero
    if let Some(&p0) = potential.first() {
        potential.iter_mut().for_each(|p| *p -= p0);
    }
    Ok(FlowSolution {
        flow,
        potential,
        cost,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_moves_mass_along_the_line() {
        let arcs = vec![(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)];
        let s = min_cost_flow(3, &[0.5, 0.0, -0.5], &arcs).unwrap();
        assert!((s.cost - 1.0).abs() < 1e-15);
        assert!(s.duality_gap(&[0.5, 0.0, -0.5]).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(matches!(
            min_cost_flow(2, &[1.0, -0.5], &[(0, 1, 1.0)]),
            Err(Error::Unbalanced(..))
        ));
        assert!(matches!(
            min_cost_flow(2, &[1.0, -1.0], &[(0, 1, f64::NAN)]),
            Err(Error::NonFiniteCost(0, 1))
        ));
        assert!(matches!(
            min_cost_flow(2, &[1.0, -1.0], &[]),
            Err(Error::Disconnected(_))
        ));
    }
}
