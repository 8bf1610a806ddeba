//! Brute-force reference implementations over explicit path enumeration.
//! Deliberately naive: they share nothing with the library's sweeps.

#![allow(dead_code)]

use adjset::graph::Dag;
use adjset::nodeset::NodeSet;
use adjset::sem::{self, GenConfig, TieredDag};

pub struct Adjacency {
    pub parents: Vec<Vec<usize>>,
    pub children: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn new(dag: &Dag) -> Self {
        let n = dag.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (p, c) in dag.edges() {
            parents[c].push(p);
            children[p].push(c);
        }
        Self { parents, children }
    }

    fn edge(&self, a: usize, b: usize) -> bool {
        self.children[a].contains(&b)
    }

    fn neighbours(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.parents[v].iter().chain(&self.children[v]).copied().collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn ancestors(&self, s: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.parents.len()];
        let mut stack: Vec<usize> = s.to_vec();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(&self.parents[v]);
            }
        }
        seen
    }

    pub fn descendants(&self, s: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.parents.len()];
        let mut stack: Vec<usize> = s.to_vec();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(&self.children[v]);
            }
        }
        seen
    }

    /// Every simple path from `a` to `b` whose interior avoids `avoid`.
    pub fn paths(&self, a: usize, b: usize, avoid: &[usize]) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = vec![a];
        self.extend(&mut path, b, avoid, &mut out);
        out
    }

    fn extend(&self, path: &mut Vec<usize>, b: usize, avoid: &[usize], out: &mut Vec<Vec<usize>>) {
        let cur = *path.last().unwrap();
        for nb in self.neighbours(cur) {
            if path.contains(&nb) {
                continue;
            }
            if nb == b {
                let mut p = path.clone();
                p.push(nb);
                out.push(p);
                continue;
            }
            if avoid.contains(&nb) {
                continue;
            }
            path.push(nb);
            self.extend(path, b, avoid, out);
            path.pop();
        }
    }

    /// Blocking definition applied to one path.
    pub fn is_open(&self, path: &[usize], z: &[usize]) -> bool {
        let anc = self.ancestors(z);
        (1..path.len().saturating_sub(1)).all(|i| {
            let (p, v, n) = (path[i - 1], path[i], path[i + 1]);
            if self.edge(p, v) && self.edge(n, v) {
                anc[v]
            } else {
                !z.contains(&v)
            }
        })
    }

    fn is_directed(&self, path: &[usize]) -> bool {
        path.windows(2).all(|w| self.edge(w[0], w[1]))
    }
}

pub fn brute_d_separated(dag: &Dag, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
    let adj = Adjacency::new(dag);
    let zv = z.to_vec();
    for a in x.iter() {
        for b in y.iter() {
            if adj.paths(a, b, &[]).iter().any(|p| adj.is_open(p, &zv)) {
                return false;
            }
        }
    }
    true
}

/// Adjustment criterion by enumerating proper paths from `x` to `y`.
pub fn brute_is_adjustment_set(dag: &Dag, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
    let adj = Adjacency::new(dag);
    let xv = x.to_vec();
    let zv = z.to_vec();
    let mut forbidden_roots = Vec::new();
    for a in x.iter() {
        for b in y.iter() {
            for p in adj.paths(a, b, &xv) {
                if adj.is_directed(&p) {
                    forbidden_roots.extend(p[1..].iter().copied());
                } else if adj.is_open(&p, &zv) {
                    return false;
                }
            }
        }
    }
    let forbidden = adj.descendants(&forbidden_roots);
    z.iter().all(|v| !forbidden[v])
}

pub fn brute_is_backdoor_set(dag: &Dag, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
    let adj = Adjacency::new(dag);
    let de = adj.descendants(&x.to_vec());
    if z.iter().any(|v| de[v]) {
        return false;
    }
    for a in x.iter() {
        let cond: Vec<usize> = z.union(&x.without(a)).to_vec();
        for b in y.iter() {
            for p in adj.paths(a, b, &[]) {
                let into_a = adj.edge(p[1], a);
                if into_a && adj.is_open(&p, &cond) {
                    return false;
                }
            }
        }
    }
    true
}

/// All subsets of `pool` passing the brute-force adjustment criterion,
/// sorted canonically.
pub fn brute_adjustment_sets(dag: &Dag, x: &NodeSet, y: &NodeSet, pool: &NodeSet) -> Vec<NodeSet> {
    let members = pool.to_vec();
    let mut out = Vec::new();
    for mask in 0..(1usize << members.len()) {
        let z: NodeSet = members
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        if brute_is_adjustment_set(dag, x, y, &z) {
            out.push(z);
        }
    }
    out.sort();
    out
}

pub fn set(dag: &Dag, names: &[&str]) -> NodeSet {
    dag.set_of(names).unwrap()
}

pub fn idx(dag: &Dag, name: &str) -> usize {
    dag.index_of(name).unwrap()
}

/// Small tiered DAG from the generator, sized for exhaustive checks.
pub fn small_tiered(seed: u64, covariates: usize, latents: usize, treatments: usize, p: f64) -> TieredDag {
    let cfg = GenConfig {
        covariates,
        latents,
        treatments,
        edge_prob: p,
        seed,
        ..GenConfig::default()
    };
    let mut rng = sem::rng_from_seed(seed);
    sem::random_tiered_dag(&cfg, &mut rng).unwrap()
}

/// DAG over `n` nodes with edges `i -> j` (i < j) picked by `mask` bits and
/// the given latent nodes.
pub fn dag_from_mask(n: usize, mask: u64, latent: &[usize]) -> Dag {
    let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let mut b = Dag::builder();
    for name in &names {
        b.node(name);
    }
    let mut bit = 0;
    for i in 0..n {
        for j in i + 1..n {
            if mask >> bit & 1 == 1 {
                b.edge(&names[i], &names[j]).unwrap();
            }
            bit += 1;
        }
    }
    for &l in latent {
        b.latent(&names[l]);
    }
    b.build().unwrap()
}
