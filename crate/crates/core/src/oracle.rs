//! Shortest-path ground truth for STNs.
//!
//! The network is encoded as a distance graph over the variables plus an
//! origin vertex: a constraint `a <= w - v <= b` becomes the edges `v -> w`
//! with weight `b` and `w -> v` with weight `-a` (infinite bounds produce no
//! edge), and a domain `[a, b]` of `v` becomes `o -> v` (weight `b`) and
//! `v -> o` (weight `-a`). The network is consistent iff this graph has no
//! negative cycle, and then the minimal domain of `v` is
//! `[-dist(v, o), dist(o, v)]`.
//!
//! This module shares no code with the propagation solvers.

use std::fmt;

use crate::error::{Error, Result};
use crate::interval::{Bound, Interval};
use crate::stn::{Stn, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Origin,
    Var(VarId),
}

impl Vertex {
    fn index(self) -> usize {
        match self {
            Vertex::Origin => 0,
            Vertex::Var(v) => v.index() + 1,
        }
    }

    fn from_index(i: usize) -> Vertex {
        if i == 0 {
            Vertex::Origin
        } else {
            Vertex::Var(VarId::from(i - 1))
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Origin => f.write_str("o"),
            Vertex::Var(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistanceGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize, i64)>,
}

impl DistanceGraph {
    pub fn new(net: &Stn) -> DistanceGraph {
        let mut edges = Vec::with_capacity(2 * (net.e() + net.n()));
        let mut push_pair = |v: usize, w: usize, ivl: &Interval| match ivl.bounds() {
            Some((lo, hi)) => {
                if let Bound::Finite(b) = hi {
                    edges.push((v, w, b));
                }
                if let Bound::Finite(a) = lo {
                    edges.push((w, v, -a));
                }
            }
            // An emptied constraint keeps no bounds; `0 <= w - v <= -1` is an
            // equally unsatisfiable stand-in.
            None => {
                edges.push((v, w, -1));
                edges.push((w, v, 0));
            }
        };
        for v in net.var_ids() {
            push_pair(0, v.index() + 1, &net.domain(v));
        }
        for ((v, w), ivl) in net.constraints() {
            push_pair(v.index() + 1, w.index() + 1, &ivl);
        }
        DistanceGraph { vertex_count: net.n() + 1, edges }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn weight(&self, u: usize, v: usize) -> Option<i64> {
        self.edges
            .iter()
            .filter(|(a, b, _)| *a == u && *b == v)
            .map(|(_, _, w)| *w)
            .min()
    }

    /// Single-source shortest paths from the origin, over the graph or its
    /// reverse. Returns distances, or a negative cycle in forward order.
    fn bellman_ford(&self, reversed: bool) -> Result<std::result::Result<Vec<i64>, Vec<usize>>> {
        let nv = self.vertex_count;
        let mut dist: Vec<Option<i64>> = vec![None; nv];
        let mut pred: Vec<Option<usize>> = vec![None; nv];
        dist[0] = Some(0);
        let arc = |&(u, v, w): &(usize, usize, i64)| if reversed { (v, u, w) } else { (u, v, w) };

        let mut last_relaxed = None;
        for _round in 0..nv {
            last_relaxed = None;
            for e in &self.edges {
                let (u, v, w) = arc(e);
                if let Some(du) = dist[u] {
                    let cand = du.checked_add(w).ok_or(Error::Overflow)?;
                    if dist[v].map_or(true, |dv| cand < dv) {
                        dist[v] = Some(cand);
                        pred[v] = Some(u);
                        last_relaxed = Some(v);
                    }
                }
            }
            if last_relaxed.is_none() {
                break;
            }
        }

        // Still relaxing in round |V| means a negative cycle.
        if let Some(x) = last_relaxed {
            let mut y = x;
            for _ in 0..nv {
                y = pred[y].expect("relaxed vertex has a predecessor");
            }
            let mut cycle = vec![y];
            let mut cur = pred[y].expect("cycle vertex has a predecessor");
            while cur != y {
                cycle.push(cur);
                cur = pred[cur].expect("cycle vertex has a predecessor");
            }
            cycle.reverse();
            if reversed {
                cycle.reverse();
            }
            return Ok(Err(cycle));
        }
        Ok(Ok(dist
            .into_iter()
            .map(|d| d.expect("every vertex is reachable through its domain edges"))
            .collect()))
    }

    /// Total weight of the closed walk `cycle[0] -> ... -> cycle[last] -> cycle[0]`
    /// using the lightest parallel edge at each step.
    pub fn cycle_weight(&self, cycle: &[usize]) -> Option<i64> {
        let mut total: i64 = 0;
        for (i, &u) in cycle.iter().enumerate() {
            let v = cycle[(i + 1) % cycle.len()];
            total = total.checked_add(self.weight(u, v)?)?;
        }
        Some(total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    NegativeCycle { cycle: Vec<Vertex>, weight: i64 },
    Minimal(Vec<Interval>),
}

impl OracleOutcome {
    pub fn is_consistent(&self) -> bool {
        matches!(self, OracleOutcome::Minimal(_))
    }

    pub fn domains(&self) -> Option<&[Interval]> {
        match self {
            OracleOutcome::Minimal(d) => Some(d),
            OracleOutcome::NegativeCycle { .. } => None,
        }
    }
}

/// Consistency and minimal domains by two Bellman-Ford passes (to and from
/// the origin).
pub fn oracle_minimal_domains(net: &Stn) -> Result<OracleOutcome> {
    let graph = DistanceGraph::new(net);
    let to_vars = match graph.bellman_ford(false)? {
        Ok(d) => d,
        Err(cycle) => {
            let weight = graph
                .cycle_weight(&cycle)
                .ok_or_else(|| Error::Contract("negative cycle uses a missing edge".into()))?;
            if weight >= 0 {
                return Err(Error::Contract(format!("cycle witness has weight {weight} >= 0")));
            }
            return Ok(OracleOutcome::NegativeCycle {
                cycle: cycle.into_iter().map(Vertex::from_index).collect(),
                weight,
            });
        }
    };
    let to_origin = match graph.bellman_ford(true)? {
        Ok(d) => d,
        Err(_) => return Err(Error::Contract("reverse pass found a cycle the forward pass missed".into())),
    };
    Ok(OracleOutcome::Minimal(
        (1..graph.vertex_count)
            .map(|i| Interval::finite(-to_origin[i], to_vars[i]))
            .collect(),
    ))
}

/// All-pairs shortest paths over the distance graph (origin included), for
/// minimal constraints on small consistent networks.
#[derive(Debug, Clone)]
pub struct MinimalNetwork {
    size: usize,
    dist: Vec<Option<i64>>,
    next: Vec<Option<usize>>,
}

impl MinimalNetwork {
    pub fn compute(net: &Stn) -> Result<MinimalNetwork> {
        let graph = DistanceGraph::new(net);
        let size = graph.vertex_count;
        let mut dist: Vec<Option<i64>> = vec![None; size * size];
        let mut next: Vec<Option<usize>> = vec![None; size * size];
        for i in 0..size {
            dist[i * size + i] = Some(0);
            next[i * size + i] = Some(i);
        }
        for &(u, v, w) in &graph.edges {
            let slot = &mut dist[u * size + v];
            if slot.map_or(true, |d| w < d) {
                *slot = Some(w);
                next[u * size + v] = Some(v);
            }
        }
        for k in 0..size {
            for i in 0..size {
                let Some(dik) = dist[i * size + k] else { continue };
                for j in 0..size {
                    let Some(dkj) = dist[k * size + j] else { continue };
                    let cand = dik.checked_add(dkj).ok_or(Error::Overflow)?;
                    if dist[i * size + j].map_or(true, |d| cand < d) {
                        dist[i * size + j] = Some(cand);
                        next[i * size + j] = next[i * size + k];
                    }
                }
            }
        }
        if (0..size).any(|i| dist[i * size + i].is_some_and(|d| d < 0)) {
            return Err(Error::Contract("minimal constraints requested for an inconsistent network".into()));
        }
        Ok(MinimalNetwork { size, dist, next })
    }

    fn upper(&self, from: Vertex, to: Vertex) -> Bound {
        match self.dist[from.index() * self.size + to.index()] {
            Some(d) => Bound::Finite(d),
            None => Bound::PosInf,
        }
    }

    /// Minimal `I_vw`: `[-dist(w, v), dist(v, w)]`.
    pub fn constraint(&self, v: VarId, w: VarId) -> Interval {
        self.between(Vertex::Var(v), Vertex::Var(w))
    }

    pub fn between(&self, from: Vertex, to: Vertex) -> Interval {
        let lo = match self.upper(to, from) {
            Bound::Finite(d) => Bound::Finite(-d),
            _ => Bound::NegInf,
        };
        Interval::new(lo, self.upper(from, to))
    }

    /// A shortest path realizing `dist(from, to)`, endpoints included.
    pub fn path(&self, from: Vertex, to: Vertex) -> Option<Vec<Vertex>> {
        let (mut i, j) = (from.index(), to.index());
        self.next[i * self.size + j]?;
        let mut path = vec![from];
        while i != j {
            i = self.next[i * self.size + j]?;
            path.push(Vertex::from_index(i));
        }
        Some(path)
    }

    /// Vertex count of the distance graph, i.e. variables plus the origin.
    pub fn vertex_count(&self) -> usize {
        self.size
    }
}

pub fn oracle_minimal_constraint(net: &Stn, v: VarId, w: VarId) -> Result<Interval> {
    Ok(MinimalNetwork::compute(net)?.constraint(v, w))
}
