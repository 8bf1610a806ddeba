//! Directed acyclic graphs, d-separation and the graphical adjustment oracle.
//!
//! Node identifiers are strings at the edges of the API and dense indices
//! everywhere else. Latent nodes take part in every query; the `observed`
//! mask only restricts what may be placed in an adjustment set.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::nodeset::NodeSet;

/// Default cap on the size of a brute-force enumeration pool.
pub const DEFAULT_POOL_CAP: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    observed: NodeSet,
    topo: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct DagBuilder {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    latent: NodeSet,
}

impl DagBuilder {
    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Declares a node (idempotent) and returns its index.
    pub fn node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn edge(&mut self, parent: &str, child: &str) -> Result<&mut Self> {
        if parent == child {
            return Err(Error::SelfLoop(parent.to_string()));
        }
        let p = self.node(parent);
        let c = self.node(child);
        if self.edges.contains(&(p, c)) {
            return Err(Error::DuplicateEdge(parent.to_string(), child.to_string()));
        }
        self.edges.push((p, c));
        Ok(self)
    }

    pub fn latent(&mut self, name: &str) -> &mut Self {
        let i = self.node(name);
        self.latent.insert(i);
        self
    }

    pub fn build(&self) -> Result<Dag> {
        let n = self.names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in &self.edges {
            parents[c].push(p);
            children[p].push(c);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        // Kahn's algorithm; smallest available index first keeps the order stable.
        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            topo.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo.len() < n {
            let stuck = (0..n)
                .filter(|&v| indegree[v] > 0)
                .map(|v| self.names[v].clone())
                .collect();
            return Err(Error::Cycle(stuck));
        }

        Ok(Dag {
            names: self.names.clone(),
            index: self.index.clone(),
            parents,
            children,
            observed: NodeSet::full(n).difference(&self.latent),
            topo,
        })
    }
}

/// Which way a path entered a node during a reachability sweep.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Entry {
    /// Arrived from a child, i.e. travelling against the edge.
    FromChild,
    /// Arrived from a parent, along the edge.
    FromParent,
}

impl Dag {
    pub fn builder() -> DagBuilder {
        DagBuilder::default()
    }

    /// Builds a DAG from node names, `(parent, child)` pairs and latent names.
    pub fn from_edges(nodes: &[&str], edges: &[(&str, &str)], latent: &[&str]) -> Result<Dag> {
        let mut b = Dag::builder();
        for n in nodes {
            b.node(n);
        }
        for (p, c) in edges {
            b.edge(p, c)?;
        }
        for l in latent {
            if !b.index.contains_key(*l) {
                return Err(Error::UnknownNode(l.to_string()));
            }
            b.latent(l);
        }
        b.build()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn set_of<S: AsRef<str>>(&self, names: &[S]) -> Result<NodeSet> {
        names.iter().map(|n| self.index_of(n.as_ref())).collect()
    }

    pub fn names_of(&self, set: &NodeSet) -> Vec<String> {
        set.iter().map(|i| self.names[i].clone()).collect()
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(p, cs)| cs.iter().map(move |&c| (p, c)))
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.children[parent].binary_search(&child).is_ok()
    }

    pub fn observed(&self) -> &NodeSet {
        &self.observed
    }

    pub fn latent(&self) -> NodeSet {
        NodeSet::full(self.len()).difference(&self.observed)
    }

    pub fn is_observed(&self, node: usize) -> bool {
        self.observed.contains(node)
    }

    /// A topological order of all nodes.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    fn check_known(&self, set: &NodeSet) -> Result<()> {
        match set.iter().find(|&i| i >= self.len()) {
            Some(i) => Err(Error::UnknownNode(format!("#{i}"))),
            None => Ok(()),
        }
    }

    /// All nodes with a directed path (possibly empty) into `s`.
    pub fn ancestors(&self, s: &NodeSet) -> Result<NodeSet> {
        self.check_known(s)?;
        Ok(self.closure(s, |v| &self.parents[v], &NodeSet::new()))
    }

    /// All nodes reachable from `s` along directed edges, `s` included.
    pub fn descendants(&self, s: &NodeSet) -> Result<NodeSet> {
        self.check_known(s)?;
        Ok(self.closure(s, |v| &self.children[v], &NodeSet::new()))
    }

    /// Reflexive closure of `start` under `step`, never expanding into `stop`.
    fn closure<'a, F>(&'a self, start: &NodeSet, step: F, stop: &NodeSet) -> NodeSet
    where
        F: Fn(usize) -> &'a [usize],
    {
        let mut seen = start.clone();
        let mut stack = start.to_vec();
        while let Some(v) = stack.pop() {
            for &w in step(v) {
                if !stop.contains(w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    fn check_disjoint(&self, sets: &[&NodeSet]) -> Result<()> {
        for (i, a) in sets.iter().enumerate() {
            self.check_known(a)?;
            for b in &sets[i + 1..] {
                if let Some(n) = a.intersection(b).first() {
                    return Err(Error::Overlap(self.names[n].clone()));
                }
            }
        }
        Ok(())
    }

    /// Nodes reachable by a d-connecting walk from the `starts` states.
    ///
    /// `active` holds the nodes that open when they are colliders (the
    /// ancestors of the conditioning set), `keep_edge` filters edges and no
    /// walk ever enters a node of `forbidden`.
    fn reach<K>(
        &self,
        starts: &[(usize, Entry)],
        cond: &NodeSet,
        active: &NodeSet,
        forbidden: &NodeSet,
        keep_edge: K,
    ) -> NodeSet
    where
        K: Fn(usize, usize) -> bool,
    {
        let n = self.len();
        let mut seen_up = vec![false; n];
        let mut seen_down = vec![false; n];
        let mut reached = NodeSet::new();
        let mut stack: Vec<(usize, Entry)> = starts.to_vec();
        while let Some((v, entry)) = stack.pop() {
            let seen = match entry {
                Entry::FromChild => &mut seen_up[v],
                Entry::FromParent => &mut seen_down[v],
            };
            if *seen {
                continue;
            }
            *seen = true;
            let conditioned = cond.contains(v);
            if !conditioned {
                reached.insert(v);
            }
            let to_parents = match entry {
                Entry::FromChild => !conditioned,
                Entry::FromParent => active.contains(v),
            };
            let to_children = !conditioned;
            if to_parents {
                for &p in &self.parents[v] {
                    if !forbidden.contains(p) && keep_edge(p, v) {
                        stack.push((p, Entry::FromChild));
                    }
                }
            }
            if to_children {
                for &c in &self.children[v] {
                    if !forbidden.contains(c) && keep_edge(v, c) {
                        stack.push((c, Entry::FromParent));
                    }
                }
            }
        }
        reached
    }

    /// True iff every path between `x` and `y` is blocked given `z`.
    pub fn d_separated(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> Result<bool> {
        if x.is_empty() {
            return Err(Error::EmptySet("x"));
        }
        if y.is_empty() {
            return Err(Error::EmptySet("y"));
        }
        self.check_disjoint(&[x, y, z])?;
        let active = self.ancestors(z)?;
        let starts: Vec<_> = x.iter().map(|v| (v, Entry::FromChild)).collect();
        let reached = self.reach(&starts, z, &active, &NodeSet::new(), |_, _| true);
        Ok(reached.is_disjoint(y))
    }

    /// One d-connecting path between `x` and `y` given `z`, if any exists.
    ///
    /// Depth-first over simple paths in ascending neighbour order, pruning as
    /// soon as an interior node blocks. Exponential in the worst case; meant
    /// for diagnostics on small graphs.
    pub fn find_open_path(
        &self,
        x: &NodeSet,
        y: &NodeSet,
        z: &NodeSet,
    ) -> Result<Option<PathWitness>> {
        if x.is_empty() {
            return Err(Error::EmptySet("x"));
        }
        if y.is_empty() {
            return Err(Error::EmptySet("y"));
        }
        self.check_disjoint(&[x, y, z])?;
        let active = self.ancestors(z)?;
        let endpoints = x.union(y);
        for start in x.iter() {
            let mut path = vec![start];
            let mut on_path = NodeSet::singleton(start);
            if let Some(found) =
                self.extend_open(&mut path, &mut on_path, y, z, &active, &endpoints)
            {
                return Ok(Some(PathWitness::from_nodes(self, found)));
            }
        }
        Ok(None)
    }

    fn extend_open(
        &self,
        path: &mut Vec<usize>,
        on_path: &mut NodeSet,
        y: &NodeSet,
        z: &NodeSet,
        active: &NodeSet,
        endpoints: &NodeSet,
    ) -> Option<Vec<usize>> {
        let cur = *path.last().unwrap();
        let prev = path.len().checked_sub(2).map(|i| path[i]);
        let mut next: Vec<usize> = self.parents[cur]
            .iter()
            .chain(self.children[cur].iter())
            .copied()
            .collect();
        next.sort_unstable();
        for nb in next {
            if on_path.contains(nb) {
                continue;
            }
            if let Some(p) = prev {
                let collider = self.has_edge(p, cur) && self.has_edge(nb, cur);
                let open = if collider {
                    active.contains(cur)
                } else {
                    !z.contains(cur)
                };
                if !open {
                    continue;
                }
            }
            if y.contains(nb) {
                let mut found = path.clone();
                found.push(nb);
                return Some(found);
            }
            if endpoints.contains(nb) {
                continue;
            }
            path.push(nb);
            on_path.insert(nb);
            if let Some(found) = self.extend_open(path, on_path, y, z, active, endpoints) {
                return Some(found);
            }
            path.pop();
            on_path.remove(nb);
        }
        None
    }

    fn check_adjustment_inputs(
        &self,
        x: &NodeSet,
        y: &NodeSet,
        z: &NodeSet,
        allow_latent: bool,
    ) -> Result<()> {
        if x.is_empty() {
            return Err(Error::EmptySet("treatments"));
        }
        if y.is_empty() {
            return Err(Error::EmptySet("outcomes"));
        }
        self.check_disjoint(&[x, y, z])?;
        if !allow_latent {
            if let Some(l) = z.difference(&self.observed).first() {
                return Err(Error::LatentInAdjustment(self.names[l].clone()));
            }
        }
        Ok(())
    }

    /// Nodes other than `x` lying on a proper causal path from `x` to `y`.
    fn proper_causal_nodes(&self, x: &NodeSet, y: &NodeSet) -> NodeSet {
        // Descendants of x without re-entering x, intersected with ancestors
        // of y reached without passing through x.
        let down = self
            .closure(x, |v| &self.children[v], x)
            .difference(x);
        let up = self.closure(y, |v| &self.parents[v], x);
        down.intersection(&up)
    }

    /// Graphical adjustment criterion: `z` contains no descendant of a
    /// non-treatment node on a proper causal path and blocks every proper
    /// non-causal path from `x` to `y`. Requires `z` to be observed.
    pub fn is_adjustment_set(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> Result<bool> {
        self.is_adjustment_set_with(x, y, z, false)
    }

    pub fn is_adjustment_set_with(
        &self,
        x: &NodeSet,
        y: &NodeSet,
        z: &NodeSet,
        allow_latent: bool,
    ) -> Result<bool> {
        self.check_adjustment_inputs(x, y, z, allow_latent)?;
        let causal = self.proper_causal_nodes(x, y);
        let forbidden = self.descendants(&causal)?;
        if !z.is_disjoint(&forbidden) {
            return Ok(false);
        }
        // Proper back-door graph: drop the first edge of every proper causal
        // path, then ask for d-separation of x and y given z.
        // z avoids De(causal), so the dropped edges never lie above z.
        let keep = |p: usize, c: usize| !(x.contains(p) && causal.contains(c));
        let active = self.ancestors(z)?;
        let starts: Vec<_> = x.iter().map(|v| (v, Entry::FromChild)).collect();
        let reached = self.reach(&starts, z, &active, &NodeSet::new(), keep);
        Ok(reached.is_disjoint(y))
    }

    /// Back-door criterion for a set of treatments: `z` avoids `De(x)` and,
    /// for every treatment, `z` plus the other treatments blocks each path
    /// that starts with an edge into that treatment.
    pub fn is_backdoor_adjustment_set(
        &self,
        x: &NodeSet,
        y: &NodeSet,
        z: &NodeSet,
    ) -> Result<bool> {
        self.check_adjustment_inputs(x, y, z, false)?;
        if !z.is_disjoint(&self.descendants(x)?) {
            return Ok(false);
        }
        for t in x.iter() {
            let cond = z.union(&x.without(t));
            let active = self.ancestors(&cond)?;
            let starts: Vec<_> = self.parents[t]
                .iter()
                .map(|&p| (p, Entry::FromChild))
                .collect();
            let reached = self.reach(&starts, &cond, &active, &NodeSet::singleton(t), |_, _| true);
            if !reached.is_disjoint(y) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Every subset of `pool` that is an adjustment set, in canonical order.
    pub fn enumerate_adjustment_sets(
        &self,
        x: &NodeSet,
        y: &NodeSet,
        pool: &NodeSet,
        cap: usize,
        execution: Execution,
    ) -> Result<Vec<NodeSet>> {
        self.check_adjustment_inputs(x, y, pool, false)?;
        let members = pool.to_vec();
        if members.len() > cap {
            return Err(Error::PoolTooLarge {
                size: members.len(),
                cap,
            });
        }
        let total = 1usize << members.len();
        let hits = exec::map_range(execution, total, |mask| {
            let z: NodeSet = members
                .iter()
                .enumerate()
                .filter(|(bit, _)| mask & (1 << bit) != 0)
                .map(|(_, &v)| v)
                .collect();
            match self.is_adjustment_set(x, y, &z) {
                Ok(true) => Some(z),
                _ => None,
            }
        });
        let mut out: Vec<NodeSet> = hits.into_iter().flatten().collect();
        out.sort();
        Ok(out)
    }

    /// True iff no node of a later tier is an ancestor of a node in an
    /// earlier tier.
    pub fn consistent_with_tiers(&self, tiers: &TierKnowledge) -> Result<bool> {
        let mut later = NodeSet::new();
        for tier in tiers.tiers().iter().rev() {
            self.check_known(tier)?;
            let anc = self.ancestors(tier)?;
            if !anc.is_disjoint(&later) {
                return Ok(false);
            }
            later = later.union(tier);
        }
        Ok(true)
    }
}

/// Ordered partition of variables; earlier tiers causally precede later ones.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TierKnowledge {
    tiers: Vec<NodeSet>,
}

impl TierKnowledge {
    pub fn new(tiers: Vec<NodeSet>) -> Result<Self> {
        let mut seen = NodeSet::new();
        for t in &tiers {
            if let Some(n) = t.intersection(&seen).first() {
                return Err(Error::Overlap(format!("#{n}")));
            }
            seen = seen.union(t);
        }
        Ok(Self { tiers })
    }

    /// Resolves named tiers through `lookup`.
    pub fn from_names<S, F>(tiers: &[Vec<S>], lookup: F) -> Result<Self>
    where
        S: AsRef<str>,
        F: Fn(&str) -> Result<usize>,
    {
        let mut sets = Vec::with_capacity(tiers.len());
        let mut seen: HashMap<usize, &str> = HashMap::new();
        for tier in tiers {
            let mut set = NodeSet::new();
            for name in tier {
                let i = lookup(name.as_ref())?;
                if seen.insert(i, name.as_ref()).is_some() {
                    return Err(Error::Overlap(name.as_ref().to_string()));
                }
                set.insert(i);
            }
            sets.push(set);
        }
        Ok(Self { tiers: sets })
    }

    pub fn tiers(&self) -> &[NodeSet] {
        &self.tiers
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    pub fn members(&self) -> NodeSet {
        self.tiers.iter().fold(NodeSet::new(), |acc, t| acc.union(t))
    }

    pub fn tier_of(&self, node: usize) -> Option<usize> {
        self.tiers.iter().position(|t| t.contains(node))
    }

    /// Everything in a tier strictly before `tier`.
    pub fn before(&self, tier: usize) -> NodeSet {
        self.tiers[..tier.min(self.tiers.len())]
            .iter()
            .fold(NodeSet::new(), |acc, t| acc.union(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathRole {
    Endpoint,
    Collider,
    NonCollider,
}

/// A concrete path together with the role of each node on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathWitness {
    pub nodes: Vec<usize>,
    pub roles: Vec<PathRole>,
    arrows: Vec<bool>,
    labels: Vec<String>,
}

impl PathWitness {
    fn from_nodes(dag: &Dag, nodes: Vec<usize>) -> Self {
        let last = nodes.len() - 1;
        let roles = (0..nodes.len())
            .map(|i| {
                if i == 0 || i == last {
                    PathRole::Endpoint
                } else if dag.has_edge(nodes[i - 1], nodes[i]) && dag.has_edge(nodes[i + 1], nodes[i])
                {
                    PathRole::Collider
                } else {
                    PathRole::NonCollider
                }
            })
            .collect();
        let arrows = nodes.windows(2).map(|w| dag.has_edge(w[0], w[1])).collect();
        let labels = nodes.iter().map(|&v| dag.name(v).to_string()).collect();
        Self {
            nodes,
            roles,
            arrows,
            labels,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }
}

impl fmt::Display for PathWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.labels[0])?;
        for (label, forward) in self.labels[1..].iter().zip(&self.arrows) {
            write!(f, " {} {label}", if *forward { "->" } else { "<-" })?;
        }
        Ok(())
    }
}
