//! Exact s-t maximum flow / minimum cut on graphs with real capacities.
//!
//! The solver grows two search trees, one from each terminal, and reuses
//! them across augmentations (the Boykov-Kolmogorov scheme). Trees are
//! repaired after each augmentation by re-adopting orphaned nodes. All
//! traversal follows arc insertion order, so results are deterministic.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Index of a node in a [`FlowNetwork`].
pub type NodeId = usize;

#[derive(Debug, Clone, Copy)]
struct Arc {
    head: NodeId,
    cap: f64,
}

/// Directed graph with paired reverse arcs and two terminals.
///
/// Arcs are stored in pairs: arc `2i` and `2i + 1` are each other's
/// reverse.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    num_nodes: usize,
    source: NodeId,
    sink: NodeId,
    tails: Vec<NodeId>,
    arcs: Vec<Arc>,
}

impl FlowNetwork {
    pub fn new(num_nodes: usize, source: NodeId, sink: NodeId) -> Self {
        FlowNetwork {
            num_nodes,
            source,
            sink,
            tails: Vec::new(),
            arcs: Vec::new(),
        }
    }

    pub fn with_capacity(num_nodes: usize, source: NodeId, sink: NodeId, edges: usize) -> Self {
        let mut net = Self::new(num_nodes, source, sink);
        net.tails.reserve(2 * edges);
        net.arcs.reserve(2 * edges);
        net
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    /// Adds `u -> v` with capacity `cap` and `v -> u` with `rev_cap`.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId, cap: f64, rev_cap: f64) {
        self.tails.push(u);
        self.arcs.push(Arc { head: v, cap });
        self.tails.push(v);
        self.arcs.push(Arc {
            head: u,
            cap: rev_cap,
        });
    }

    /// All arcs as `(tail, head, capacity)`, reverse arcs included.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.tails
            .iter()
            .zip(&self.arcs)
            .map(|(&t, a)| (t, a.head, a.cap))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        if self.source >= n || self.sink >= n {
            return Err(Error::MalformedNetwork(format!(
                "terminal out of range for {n} nodes"
            )));
        }
        if self.source == self.sink {
            return Err(Error::MalformedNetwork("source equals sink".into()));
        }
        for (i, (t, h, c)) in self.arcs().enumerate() {
            if t >= n || h >= n {
                return Err(Error::MalformedNetwork(format!(
                    "arc {i} ({t} -> {h}) references a missing node"
                )));
            }
            if !c.is_finite() || c < 0.0 {
                return Err(Error::MalformedNetwork(format!(
                    "arc {i} ({t} -> {h}) has capacity {c}"
                )));
            }
        }
        Ok(())
    }

    /// Capacity of the cut defined by `source_side`: total original capacity
    /// of arcs leaving the source side.
    pub fn cut_capacity(&self, source_side: &[bool]) -> f64 {
        self.arcs()
            .filter(|&(t, h, _)| source_side[t] && !source_side[h])
            .map(|(_, _, c)| c)
            .sum()
    }
}

/// Result of [`max_flow`].
#[derive(Debug, Clone)]
pub struct MinCut {
    pub flow: f64,
    /// `true` for nodes reachable from the source in the final residual
    /// graph.
    pub source_side: Vec<bool>,
    /// Flow on each arc, indexed like [`FlowNetwork::arcs`]; antisymmetric
    /// within each pair.
    pub arc_flow: Vec<f64>,
}

impl MinCut {
    pub fn is_source_side(&self, node: NodeId) -> bool {
        self.source_side[node]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parent {
    None,
    Terminal,
    Orphan,
    /// Arc from the node to its parent.
    Arc(usize),
}

struct Solver<'a> {
    net: &'a FlowNetwork,
    first: Vec<usize>,
    adj: Vec<usize>,
    cap: Vec<f64>,
    tree: Vec<Tree>,
    parent: Vec<Parent>,
    // distance-to-terminal heuristic, valid when ts matches
    dist: Vec<u32>,
    ts: Vec<u64>,
    time: u64,
    active: VecDeque<NodeId>,
    in_active: Vec<bool>,
    orphans: VecDeque<NodeId>,
    flow: f64,
}

const REV: usize = 1;

impl<'a> Solver<'a> {
    fn new(net: &'a FlowNetwork) -> Self {
        let n = net.num_nodes;
        // CSR adjacency over outgoing arcs, in insertion order
        let mut first = vec![0usize; n + 1];
        for &t in &net.tails {
            first[t + 1] += 1;
        }
        for i in 0..n {
            first[i + 1] += first[i];
        }
        let mut fill = first.clone();
        let mut adj = vec![0usize; net.arcs.len()];
        for (a, &t) in net.tails.iter().enumerate() {
            adj[fill[t]] = a;
            fill[t] += 1;
        }
        Solver {
            net,
            first,
            adj,
            cap: net.arcs.iter().map(|a| a.cap).collect(),
            tree: vec![Tree::Free; n],
            parent: vec![Parent::None; n],
            dist: vec![0; n],
            ts: vec![0; n],
            time: 0,
            active: VecDeque::new(),
            in_active: vec![false; n],
            orphans: VecDeque::new(),
            flow: 0.0,
        }
    }

    fn head(&self, a: usize) -> NodeId {
        self.net.arcs[a].head
    }

    fn out_arcs(&self, u: NodeId) -> std::ops::Range<usize> {
        self.first[u]..self.first[u + 1]
    }

    fn activate(&mut self, u: NodeId) {
        // terminals never need rescanning: a node with residual capacity to
        // a terminal always keeps that terminal as a valid parent
        if u == self.net.source || u == self.net.sink {
            return;
        }
        if !self.in_active[u] {
            self.in_active[u] = true;
            self.active.push_back(u);
        }
    }

    /// Residual capacity usable for extending tree `t` from `u` along arc `a`
    /// (`a` leaves `u`).
    fn grow_cap(&self, t: Tree, a: usize) -> f64 {
        match t {
            Tree::Source => self.cap[a],
            _ => self.cap[a ^ REV],
        }
    }

    fn run(mut self) -> MinCut {
        let (s, t) = (self.net.source, self.net.sink);
        self.tree[s] = Tree::Source;
        self.parent[s] = Parent::Terminal;
        self.tree[t] = Tree::Sink;
        self.parent[t] = Parent::Terminal;
        for (root, tree) in [(s, Tree::Source), (t, Tree::Sink)] {
            for i in self.out_arcs(root) {
                let a = self.adj[i];
                let v = self.head(a);
                if v == t && tree == Tree::Source {
                    // direct terminal arc
                    self.flow += self.cap[a];
                    self.cap[a ^ REV] += self.cap[a];
                    self.cap[a] = 0.0;
                    continue;
                }
                if self.grow_cap(tree, a) > 0.0 && self.tree[v] == Tree::Free {
                    self.tree[v] = tree;
                    self.parent[v] = Parent::Arc(a ^ REV);
                    self.dist[v] = 1;
                    self.activate(v);
                }
            }
        }

        let mut current: Option<NodeId> = None;
        loop {
            // pick an active node
            let u = match current {
                Some(u) if self.tree[u] != Tree::Free => u,
                _ => match self.next_active() {
                    Some(u) => u,
                    None => break,
                },
            };

            match self.grow(u) {
                Some(bridge) => {
                    current = Some(u);
                    self.time += 1;
                    self.augment(bridge);
                    self.adopt();
                }
                None => {
                    current = None;
                }
            }
        }

        let n = self.net.num_nodes;
        let source_side: Vec<bool> = (0..n).map(|u| self.tree[u] == Tree::Source).collect();
        let arc_flow = (0..self.cap.len())
            .map(|a| {
                let fwd = a & !REV;
                let f = self.net.arcs[fwd].cap - self.cap[fwd];
                if a == fwd {
                    f
                } else {
                    -f
                }
            })
            .collect();
        MinCut {
            flow: self.flow,
            source_side,
            arc_flow,
        }
    }

    fn next_active(&mut self) -> Option<NodeId> {
        while let Some(u) = self.active.pop_front() {
            self.in_active[u] = false;
            if self.tree[u] != Tree::Free {
                return Some(u);
            }
        }
        None
    }

    /// Expands the tree of `u` across its residual arcs. Returns the arc
    /// joining the two trees, oriented from the source tree to the sink
    /// tree, if one is found.
    fn grow(&mut self, u: NodeId) -> Option<usize> {
        let tu = self.tree[u];
        for i in self.out_arcs(u) {
            let a = self.adj[i];
            if self.grow_cap(tu, a) <= 0.0 {
                continue;
            }
            let v = self.head(a);
            match self.tree[v] {
                Tree::Free => {
                    self.tree[v] = tu;
                    self.parent[v] = Parent::Arc(a ^ REV);
                    self.ts[v] = self.ts[u];
                    self.dist[v] = self.dist[u] + 1;
                    self.activate(v);
                }
                tv if tv != tu => {
                    return Some(if tu == Tree::Source { a } else { a ^ REV });
                }
                _ => {}
            }
        }
        None
    }

    fn augment(&mut self, bridge: usize) {
        let from = self.head(bridge ^ REV);
        let to = self.head(bridge);

        // bottleneck
        let mut delta = self.cap[bridge];
        let mut v = from;
        while let Parent::Arc(a) = self.parent[v] {
            delta = delta.min(self.cap[a ^ REV]);
            v = self.head(a);
        }
        let mut v = to;
        while let Parent::Arc(a) = self.parent[v] {
            delta = delta.min(self.cap[a]);
            v = self.head(a);
        }

        self.cap[bridge] -= delta;
        self.cap[bridge ^ REV] += delta;

        // source side: flow runs parent -> v along a ^ REV
        let mut v = from;
        while let Parent::Arc(a) = self.parent[v] {
            self.cap[a ^ REV] -= delta;
            self.cap[a] += delta;
            let next = self.head(a);
            if self.cap[a ^ REV] <= 0.0 {
                self.cap[a ^ REV] = 0.0;
                self.parent[v] = Parent::Orphan;
                self.orphans.push_back(v);
            }
            v = next;
        }
        // sink side: flow runs v -> parent along a
        let mut v = to;
        while let Parent::Arc(a) = self.parent[v] {
            self.cap[a] -= delta;
            self.cap[a ^ REV] += delta;
            let next = self.head(a);
            if self.cap[a] <= 0.0 {
                self.cap[a] = 0.0;
                self.parent[v] = Parent::Orphan;
                self.orphans.push_back(v);
            }
            v = next;
        }
        if self.cap[bridge] <= 0.0 {
            self.cap[bridge] = 0.0;
        }
        self.flow += delta;
    }

    /// Residual capacity of arc `a` (leaving `u`, towards a candidate parent)
    /// in the direction tree `t` needs.
    fn parent_cap(&self, t: Tree, a: usize) -> f64 {
        match t {
            Tree::Source => self.cap[a ^ REV],
            _ => self.cap[a],
        }
    }

    /// Distance from `v` to its terminal, or `None` if the path hits an
    /// orphan or a free node.
    fn origin_distance(&mut self, v: NodeId) -> Option<u32> {
        let mut d = 0u32;
        let mut w = v;
        loop {
            if self.ts[w] == self.time {
                d += self.dist[w];
                break;
            }
            match self.parent[w] {
                Parent::Terminal => {
                    self.ts[w] = self.time;
                    self.dist[w] = 0;
                    break;
                }
                Parent::Arc(a) => {
                    d += 1;
                    w = self.head(a);
                }
                Parent::Orphan | Parent::None => return None,
            }
        }
        // stamp the path so later searches stop early
        let mut w = v;
        let mut dd = d;
        while self.ts[w] != self.time {
            self.ts[w] = self.time;
            self.dist[w] = dd;
            dd = dd.saturating_sub(1);
            match self.parent[w] {
                Parent::Arc(a) => w = self.head(a),
                _ => break,
            }
        }
        Some(d)
    }

    fn adopt(&mut self) {
        while let Some(u) = self.orphans.pop_front() {
            let tu = self.tree[u];
            let mut best: Option<(usize, u32)> = None;
            for i in self.out_arcs(u) {
                let a = self.adj[i];
                if self.parent_cap(tu, a) <= 0.0 {
                    continue;
                }
                let v = self.head(a);
                if self.tree[v] != tu {
                    continue;
                }
                if let Some(d) = self.origin_distance(v) {
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((a, d));
                    }
                }
            }
            match best {
                Some((a, d)) => {
                    self.parent[u] = Parent::Arc(a);
                    self.ts[u] = self.time;
                    self.dist[u] = d + 1;
                }
                None => {
                    for i in self.out_arcs(u) {
                        let a = self.adj[i];
                        let v = self.head(a);
                        if self.tree[v] != tu {
                            continue;
                        }
                        if self.parent_cap(tu, a) > 0.0 {
                            self.activate(v);
                        }
                        if let Parent::Arc(pa) = self.parent[v] {
                            if self.head(pa) == u {
                                self.parent[v] = Parent::Orphan;
                                self.orphans.push_back(v);
                            }
                        }
                    }
                    self.tree[u] = Tree::Free;
                    self.parent[u] = Parent::None;
                }
            }
        }
    }
}

/// Computes a maximum s-t flow and the minimum cut it certifies.
pub fn max_flow(net: &FlowNetwork) -> Result<MinCut> {
    net.validate()?;
    Ok(Solver::new(net).run())
}
