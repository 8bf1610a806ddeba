//! Adjustment set discovery from conditional (in)dependence statements.
//!
//! Every rule here is phrased purely in terms of a [`CiBackend`]. An
//! inconclusive verdict never satisfies a condition, whether the condition
//! asks for dependence or for independence.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::citest::{CiBackend, CiQuery, CiVerdict, Decision};
use crate::error::{Error, Result};
use crate::graph::{TierKnowledge, DEFAULT_POOL_CAP};
use crate::nodeset::{canonical_subsets, NodeSet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    /// Largest conditioning subset drawn from the pool; `None` is exhaustive.
    pub max_cond_size: Option<usize>,
    /// Return the first certificate instead of one per distinct set.
    pub stop_at_first: bool,
    /// Refuse pools larger than this.
    pub max_pool: usize,
    /// When present, inputs must respect `pool < treatments < outcome`.
    pub tiers: Option<TierKnowledge>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_cond_size: None,
            stop_at_first: true,
            max_pool: DEFAULT_POOL_CAP,
            tiers: None,
        }
    }
}

impl SearchConfig {
    pub fn all_hits() -> Self {
        Self {
            stop_at_first: false,
            ..Self::default()
        }
    }

    fn cond_cap(&self, pool: &NodeSet) -> usize {
        self.max_cond_size.unwrap_or(pool.len()).min(pool.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Entner,
    Build,
    Combine,
    CEquivalence,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Entner => "entner",
            Rule::Build => "build",
            Rule::Combine => "combine",
            Rule::CEquivalence => "c_equivalence",
        }
    }
}

/// One consumed CI query and its verdict, by variable name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub a: String,
    pub b: String,
    pub cond: Vec<String>,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    /// Treatment this witness speaks for.
    pub treatment: String,
    pub node: String,
    /// Conditioning set the witness conditions were checked under.
    pub conditioning: Vec<String>,
    /// Minimal subset the conditioning set was reduced to, where applicable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_to: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableClass {
    Precision,
    Overadjustment,
    Unclassified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub class: VariableClass,
    /// Both the precision and the overadjustment independence held;
    /// precision was reported.
    pub ambiguous: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub variables: Vec<String>,
    pub class: VariableClass,
    #[serde(default)]
    pub ambiguous: bool,
}

/// A discovered adjustment set together with everything needed to re-check
/// it by replaying the evidence against a backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentCertificate {
    pub rule: Rule,
    pub treatments: Vec<String>,
    pub outcome: String,
    pub adjustment_set: Vec<String>,
    pub witnesses: Vec<Witness>,
    pub evidence: Vec<Evidence>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
}

impl AdjustmentCertificate {
    /// The adjustment set as indices of `names`.
    pub fn adjustment(&self, names: &[String]) -> Result<NodeSet> {
        resolve(names, &self.adjustment_set)
    }

    pub fn treatment_set(&self, names: &[String]) -> Result<NodeSet> {
        resolve(names, &self.treatments)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Re-runs every evidence query and returns the positions whose decision
    /// differs from the recorded one.
    pub fn replay<B: CiBackend + ?Sized>(&self, ci: &B) -> Result<Vec<usize>> {
        let names = ci.variables();
        let mut mismatches = Vec::new();
        for (i, e) in self.evidence.iter().enumerate() {
            let a = ci.variable_index(&e.a)?;
            let b = ci.variable_index(&e.b)?;
            let cond = resolve(names, &e.cond)?;
            let q = CiQuery::new(a, b, cond)?;
            if ci.test(&q)?.decision != e.decision {
                mismatches.push(i);
            }
        }
        Ok(mismatches)
    }
}

fn resolve(names: &[String], list: &[String]) -> Result<NodeSet> {
    list.iter()
        .map(|n| {
            names
                .iter()
                .position(|v| v == n)
                .ok_or_else(|| Error::UnknownNode(n.clone()))
        })
        .collect()
}

type Log = Vec<(CiQuery, CiVerdict)>;

/// Thin wrapper that records every query it issues.
struct Tester<'a, B: ?Sized> {
    ci: &'a B,
}

impl<'a, B: CiBackend + ?Sized> Tester<'a, B> {
    fn new(ci: &'a B) -> Self {
        Self { ci }
    }

    fn query(&self, a: usize, b: usize, cond: &NodeSet, log: &mut Log) -> Result<Decision> {
        let q = CiQuery::new(a, b, cond.clone())?;
        let v = self.ci.test(&q)?;
        log.push((q, v));
        Ok(v.decision)
    }

    fn dep(&self, a: usize, b: usize, cond: &NodeSet, log: &mut Log) -> Result<bool> {
        Ok(self.query(a, b, cond, log)? == Decision::Dependent)
    }

    fn indep(&self, a: usize, b: usize, cond: &NodeSet, log: &mut Log) -> Result<bool> {
        Ok(self.query(a, b, cond, log)? == Decision::Independent)
    }

    /// `A ⊥ B | C` as the conjunction of pairwise statements over `A∖C` and
    /// `B∖C`. Vacuously true when either side is empty.
    fn set_indep(&self, a: &NodeSet, b: &NodeSet, cond: &NodeSet, log: &mut Log) -> Result<bool> {
        let a = a.difference(cond);
        let b = b.difference(cond);
        if !a.is_disjoint(&b) {
            return Ok(false);
        }
        for i in a.iter() {
            for j in b.iter() {
                if !self.indep(i, j, cond, log)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn evidence(&self, log: &Log) -> Vec<Evidence> {
        let names = self.ci.variables();
        log.iter()
            .map(|(q, v)| Evidence {
                a: names[q.a].clone(),
                b: names[q.b].clone(),
                cond: q.cond.iter().map(|i| names[i].clone()).collect(),
                decision: v.decision,
                p_value: v.p_value,
            })
            .collect()
    }

    fn names(&self, set: &NodeSet) -> Vec<String> {
        let names = self.ci.variables();
        set.iter().map(|i| names[i].clone()).collect()
    }
}

fn check_inputs<B: CiBackend + ?Sized>(
    ci: &B,
    pool: &NodeSet,
    xs: &[usize],
    y: usize,
    cfg: &SearchConfig,
) -> Result<()> {
    let names = ci.variables();
    let n = names.len();
    if xs.is_empty() {
        return Err(Error::EmptySet("treatments"));
    }
    if let Some(bad) = pool.iter().chain(xs.iter().copied()).chain([y]).find(|&v| v >= n) {
        return Err(Error::UnknownNode(format!("#{bad}")));
    }
    let treat: NodeSet = xs.iter().collect();
    if treat.len() != xs.len() {
        return Err(Error::InvalidQuery("duplicate treatment".into()));
    }
    if treat.contains(y) {
        return Err(Error::Overlap(names[y].clone()));
    }
    if let Some(v) = pool.intersection(&treat.with(y)).first() {
        return Err(Error::Overlap(names[v].clone()));
    }
    if pool.len() > cfg.max_pool {
        return Err(Error::PoolTooLarge {
            size: pool.len(),
            cap: cfg.max_pool,
        });
    }
    if let Some(tiers) = &cfg.tiers {
        check_tiers(names, tiers, pool, xs, y)?;
    }
    Ok(())
}

/// Requires `pool < x_1 <= ... <= x_k < y` in the tier order.
pub fn check_tiers(
    names: &[String],
    tiers: &TierKnowledge,
    pool: &NodeSet,
    xs: &[usize],
    y: usize,
) -> Result<()> {
    let tier = |v: usize| {
        tiers
            .tier_of(v)
            .ok_or_else(|| Error::TierViolation(format!("`{}` is not in any tier", names[v])))
    };
    let ty = tier(y)?;
    let mut prev: Option<(usize, usize)> = None;
    for &x in xs {
        let tx = tier(x)?;
        if tx >= ty {
            return Err(Error::TierViolation(format!(
                "treatment `{}` is not before outcome `{}`",
                names[x], names[y]
            )));
        }
        if let Some((p, tp)) = prev {
            if tx < tp {
                return Err(Error::TierViolation(format!(
                    "treatment `{}` is listed after `{}` but sits in an earlier tier",
                    names[x], names[p]
                )));
            }
        }
        prev = Some((x, tx));
    }
    let first_x = xs.iter().map(|&x| tier(x)).collect::<Result<Vec<_>>>()?;
    let min_x = first_x.into_iter().min().unwrap_or(ty);
    for w in pool.iter() {
        if tier(w)? >= min_x {
            return Err(Error::TierViolation(format!(
                "covariate `{}` is not before every treatment",
                names[w]
            )));
        }
    }
    Ok(())
}

struct Collector {
    stop_at_first: bool,
    seen: HashSet<NodeSet>,
    out: Vec<AdjustmentCertificate>,
}

impl Collector {
    fn new(cfg: &SearchConfig) -> Self {
        Self {
            stop_at_first: cfg.stop_at_first,
            seen: HashSet::new(),
            out: Vec::new(),
        }
    }

    /// Keeps the first certificate per distinct set; true when the search
    /// should stop.
    fn offer(&mut self, set: &NodeSet, make: impl FnOnce() -> AdjustmentCertificate) -> bool {
        if self.seen.insert(set.clone()) {
            self.out.push(make());
        }
        self.stop_at_first
    }
}

/// Single-treatment rule: a witness `W` in the pool and `Z ⊆ pool∖{W}` with
/// `W ⊥̸ Y | Z` and `W ⊥ Y | Z ∪ {X}` certify `Z`.
///
/// Witnesses are tried in index order, then `Z` in canonical order.
pub fn r1_entner<B: CiBackend + ?Sized>(
    ci: &B,
    pool: &NodeSet,
    x: usize,
    y: usize,
    cfg: &SearchConfig,
) -> Result<Vec<AdjustmentCertificate>> {
    check_inputs(ci, pool, &[x], y, cfg)?;
    let t = Tester::new(ci);
    let mut hits = Collector::new(cfg);
    for w in pool.iter() {
        let rest = pool.without(w);
        for z in canonical_subsets(&rest, cfg.cond_cap(&rest)) {
            let mut log = Log::new();
            if t.dep(w, y, &z, &mut log)? && t.indep(w, y, &z.with(x), &mut log)? {
                let stop = hits.offer(&z, || AdjustmentCertificate {
                    rule: Rule::Entner,
                    treatments: t.names(&NodeSet::singleton(x)),
                    outcome: ci.variables()[y].clone(),
                    adjustment_set: t.names(&z),
                    witnesses: vec![Witness {
                        treatment: ci.variables()[x].clone(),
                        node: ci.variables()[w].clone(),
                        conditioning: t.names(&z),
                        reduced_to: None,
                    }],
                    evidence: t.evidence(&log),
                    annotations: Vec::new(),
                });
                if stop {
                    return Ok(hits.out);
                }
            }
        }
    }
    Ok(hits.out)
}

/// Visits assignments of pairwise distinct witnesses, one from each
/// candidate list, in lexicographic order until `visit` returns true.
fn distinct_assignments<T>(
    options: &[Vec<(usize, T)>],
    visit: &mut dyn FnMut(&[usize]) -> Result<bool>,
) -> Result<()> {
    fn go<T>(
        options: &[Vec<(usize, T)>],
        picked: &mut Vec<usize>,
        used: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> Result<bool>,
    ) -> Result<bool> {
        let depth = picked.len();
        if depth == options.len() {
            return visit(picked);
        }
        for (k, (w, _)) in options[depth].iter().enumerate() {
            if used.contains(w) {
                continue;
            }
            picked.push(k);
            used.push(*w);
            let stop = go(options, picked, used, visit)?;
            picked.pop();
            used.pop();
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }
    go(options, &mut Vec::new(), &mut Vec::new(), visit)?;
    Ok(())
}

/// Multiple-treatment rule with one common `Z`: distinct witnesses
/// `W_1..W_k ∈ pool∖Z` with `W_i ⊥̸ Y | Z ∪ {X_1..X_{i-1}}` and
/// `W_i ⊥ Y | Z ∪ {X_1..X_i}` certify `Z`.
///
/// `xs` must be listed in a causal order. `Z` is searched first, then the
/// witness assignment.
pub fn r1_build<B: CiBackend + ?Sized>(
    ci: &B,
    pool: &NodeSet,
    xs: &[usize],
    y: usize,
    cfg: &SearchConfig,
) -> Result<Vec<AdjustmentCertificate>> {
    check_inputs(ci, pool, xs, y, cfg)?;
    let t = Tester::new(ci);
    let names = ci.variables();
    let k = xs.len();
    let mut hits = Collector::new(cfg);
    if pool.len() < k {
        return Ok(hits.out);
    }
    let cap = cfg.cond_cap(pool).min(pool.len() - k);
    'z: for z in canonical_subsets(pool, cap) {
        let remaining = pool.difference(&z);
        let mut options: Vec<Vec<(usize, Log)>> = Vec::with_capacity(k);
        for i in 0..k {
            let before: NodeSet = xs[..i].iter().collect();
            let cond = z.union(&before);
            let mut valid = Vec::new();
            for w in remaining.iter() {
                let mut log = Log::new();
                if t.dep(w, y, &cond, &mut log)? && t.indep(w, y, &cond.with(xs[i]), &mut log)? {
                    valid.push((w, log));
                }
            }
            if valid.is_empty() {
                continue 'z;
            }
            options.push(valid);
        }
        let mut stop = false;
        distinct_assignments(&options, &mut |picked| {
            stop = hits.offer(&z, || {
                let mut log = Log::new();
                let witnesses = picked
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let (w, l) = &options[i][p];
                        log.extend(l.iter().cloned());
                        let before: NodeSet = xs[..i].iter().collect();
                        Witness {
                            treatment: names[xs[i]].clone(),
                            node: names[*w].clone(),
                            conditioning: t.names(&z.union(&before)),
                            reduced_to: None,
                        }
                    })
                    .collect();
                AdjustmentCertificate {
                    rule: Rule::Build,
                    treatments: xs.iter().map(|&x| names[x].clone()).collect(),
                    outcome: names[y].clone(),
                    adjustment_set: t.names(&z),
                    witnesses,
                    evidence: t.evidence(&log),
                    annotations: Vec::new(),
                }
            });
            // One certificate per Z is enough; later assignments add nothing.
            Ok(true)
        })?;
        if stop {
            break;
        }
    }
    Ok(hits.out)
}

struct CombineOption {
    t: NodeSet,
    z: NodeSet,
    log: Log,
}

/// Multiple-treatment rule with per-treatment sets: for each `i` a witness
/// `W_i` and `T_i ⊆ (pool∖{W_i}) ∪ {X_1..X_{i-1}}` with `W_i ⊥̸ Y | T_i` and
/// `W_i ⊥ Y | T_i ∪ {X_i}`; each `T_i` is reduced to a minimal `Z_i` and
/// the certificate holds `(∪ Z_i) ∖ xs`. Witnesses are pairwise distinct.
pub fn r1_combine<B: CiBackend + ?Sized>(
    ci: &B,
    pool: &NodeSet,
    xs: &[usize],
    y: usize,
    cfg: &SearchConfig,
) -> Result<Vec<AdjustmentCertificate>> {
    check_inputs(ci, pool, xs, y, cfg)?;
    let t = Tester::new(ci);
    let names = ci.variables();
    let k = xs.len();
    let treat: NodeSet = xs.iter().collect();
    let mut options: Vec<Vec<(usize, CombineOption)>> = Vec::with_capacity(k);
    for i in 0..k {
        let before: NodeSet = xs[..i].iter().collect();
        let mut valid = Vec::new();
        for w in pool.iter() {
            let base = pool.without(w);
            let cand = base.union(&before);
            let cap = cfg.cond_cap(&base) + before.len();
            let mut seen: Vec<NodeSet> = Vec::new();
            for ti in canonical_subsets(&cand, cap) {
                let mut log = Log::new();
                if !(t.dep(w, y, &ti, &mut log)? && t.indep(w, y, &ti.with(xs[i]), &mut log)?) {
                    continue;
                }
                let Some(zi) = reduce_logged(&t, &ti, xs[i], y, &mut log)? else {
                    continue;
                };
                if !seen.contains(&zi) {
                    seen.push(zi.clone());
                    valid.push((w, CombineOption { t: ti, z: zi, log }));
                }
                if cfg.stop_at_first {
                    break;
                }
            }
        }
        if valid.is_empty() {
            return Ok(Vec::new());
        }
        options.push(valid);
    }
    let mut hits = Collector::new(cfg);
    distinct_assignments(&options, &mut |picked| {
        let chosen: Vec<(usize, &CombineOption)> = picked
            .iter()
            .enumerate()
            .map(|(i, &p)| (options[i][p].0, &options[i][p].1))
            .collect();
        let set = chosen
            .iter()
            .fold(NodeSet::new(), |acc, (_, o)| acc.union(&o.z))
            .difference(&treat);
        Ok(hits.offer(&set, || {
            let mut log = Log::new();
            let witnesses = chosen
                .iter()
                .enumerate()
                .map(|(i, (w, o))| {
                    log.extend(o.log.iter().cloned());
                    Witness {
                        treatment: names[xs[i]].clone(),
                        node: names[*w].clone(),
                        conditioning: t.names(&o.t),
                        reduced_to: Some(t.names(&o.z)),
                    }
                })
                .collect();
            AdjustmentCertificate {
                rule: Rule::Combine,
                treatments: xs.iter().map(|&x| names[x].clone()).collect(),
                outcome: names[y].clone(),
                adjustment_set: t.names(&set),
                witnesses,
                evidence: t.evidence(&log),
                annotations: Vec::new(),
            }
        }))
    })?;
    Ok(hits.out)
}

fn minimal_logged<B: CiBackend + ?Sized>(
    t: &Tester<'_, B>,
    set: &NodeSet,
    x: usize,
    y: usize,
    log: &mut Log,
) -> Result<bool> {
    for v in set.iter() {
        let rest = set.without(v);
        if !(t.dep(x, v, &rest, log)? && t.dep(y, v, &rest.with(x), log)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn reduce_logged<B: CiBackend + ?Sized>(
    t: &Tester<'_, B>,
    set: &NodeSet,
    x: usize,
    y: usize,
    log: &mut Log,
) -> Result<Option<NodeSet>> {
    let mut attempt = Log::new();
    if minimal_logged(t, set, x, y, &mut attempt)? {
        log.extend(attempt);
        return Ok(Some(set.clone()));
    }
    let top = set.len().saturating_sub(1);
    for z in canonical_subsets(set, top) {
        let mut attempt = Log::new();
        if !minimal_logged(t, &z, x, y, &mut attempt)? {
            continue;
        }
        let dropped = set.difference(&z);
        let ok = t.set_indep(&NodeSet::singleton(y), &dropped, &z.with(x), &mut attempt)?
            || t.set_indep(&NodeSet::singleton(x), &dropped, &z, &mut attempt)?;
        if ok {
            log.extend(attempt);
            return Ok(Some(z));
        }
    }
    Ok(None)
}

/// Elementwise minimality: every `T ∈ t` satisfies `X ⊥̸ T | t∖{T}` and
/// `Y ⊥̸ T | (t∖{T}) ∪ {X}`.
pub fn is_minimal<B: CiBackend + ?Sized>(ci: &B, t: &NodeSet, x: usize, y: usize) -> Result<bool> {
    minimal_logged(&Tester::new(ci), t, x, y, &mut Log::new())
}

/// `t` itself when minimal, otherwise the first proper subset in canonical
/// order that is elementwise minimal and whose complement in `t` is
/// independent of `Y` given the subset and `X`, or of `X` given the subset.
/// `None` means no such subset exists.
pub fn reduce_to_minimal<B: CiBackend + ?Sized>(
    ci: &B,
    t: &NodeSet,
    x: usize,
    y: usize,
) -> Result<Option<NodeSet>> {
    reduce_logged(&Tester::new(ci), t, x, y, &mut Log::new())
}

fn c_equivalent_logged<B: CiBackend + ?Sized>(
    t: &Tester<'_, B>,
    x: &NodeSet,
    y: usize,
    z: &NodeSet,
    other: &NodeSet,
    log: &mut Log,
) -> Result<bool> {
    let ys = NodeSet::singleton(y);
    let z_only = z.difference(other);
    let t_only = other.difference(z);
    let mut first = Log::new();
    if t.set_indep(x, &z_only, other, &mut first)?
        && t.set_indep(&ys, &t_only, &z.union(x), &mut first)?
    {
        log.extend(first);
        return Ok(true);
    }
    let mut second = Log::new();
    if t.set_indep(x, &t_only, z, &mut second)?
        && t.set_indep(&ys, &z_only, &other.union(x), &mut second)?
    {
        log.extend(second);
        return Ok(true);
    }
    Ok(false)
}

fn check_equivalence_inputs<B: CiBackend + ?Sized>(
    ci: &B,
    x: &NodeSet,
    y: usize,
    sets: &[&NodeSet],
) -> Result<()> {
    let names = ci.variables();
    if x.is_empty() {
        return Err(Error::EmptySet("treatments"));
    }
    let all = sets.iter().fold(x.with(y), |acc, s| acc.union(s));
    if let Some(bad) = all.iter().find(|&v| v >= names.len()) {
        return Err(Error::UnknownNode(format!("#{bad}")));
    }
    if x.contains(y) {
        return Err(Error::Overlap(names[y].clone()));
    }
    for s in sets {
        if let Some(v) = s.intersection(&x.with(y)).first() {
            return Err(Error::Overlap(names[v].clone()));
        }
    }
    Ok(())
}

/// Probabilistic criterion for c-equivalence of `z` and `t` relative to
/// `(x, y)`, applied to the set differences so overlapping sets work.
pub fn c_equivalent<B: CiBackend + ?Sized>(
    ci: &B,
    x: &NodeSet,
    y: usize,
    z: &NodeSet,
    t: &NodeSet,
) -> Result<bool> {
    check_equivalence_inputs(ci, x, y, &[z, t])?;
    c_equivalent_logged(&Tester::new(ci), x, y, z, t, &mut Log::new())
}

/// Every subset of `pool` c-equivalent to `z` (including `z`), in canonical
/// order.
pub fn expand_c_equivalents<B: CiBackend + ?Sized>(
    ci: &B,
    x: &NodeSet,
    y: usize,
    z: &NodeSet,
    pool: &NodeSet,
    cfg: &SearchConfig,
) -> Result<Vec<NodeSet>> {
    Ok(expand_logged(ci, x, y, z, pool, cfg)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

fn expand_logged<B: CiBackend + ?Sized>(
    ci: &B,
    x: &NodeSet,
    y: usize,
    z: &NodeSet,
    pool: &NodeSet,
    cfg: &SearchConfig,
) -> Result<Vec<(NodeSet, Log)>> {
    check_equivalence_inputs(ci, x, y, &[z, pool])?;
    if pool.len() > cfg.max_pool {
        return Err(Error::PoolTooLarge {
            size: pool.len(),
            cap: cfg.max_pool,
        });
    }
    let t = Tester::new(ci);
    let mut out = Vec::new();
    for cand in canonical_subsets(pool, cfg.cond_cap(pool)) {
        let mut log = Log::new();
        if c_equivalent_logged(&t, x, y, z, &cand, &mut log)? {
            out.push((cand, log));
        }
    }
    if !out.iter().any(|(s, _)| s == z) {
        out.push((z.clone(), Log::new()));
        out.sort_by(|a, b| a.0.cmp(&b.0));
    }
    Ok(out)
}

/// Certificates for every set c-equivalent to the one in `base`, excluding
/// the base set itself. Evidence holds the base evidence followed by the
/// equivalence queries.
pub fn expand_certificate<B: CiBackend + ?Sized>(
    ci: &B,
    base: &AdjustmentCertificate,
    pool: &NodeSet,
    cfg: &SearchConfig,
) -> Result<Vec<AdjustmentCertificate>> {
    let names = ci.variables();
    let x = base.treatment_set(names)?;
    let y = ci.variable_index(&base.outcome)?;
    let z = base.adjustment(names)?;
    let t = Tester::new(ci);
    Ok(expand_logged(ci, &x, y, &z, pool, cfg)?
        .into_iter()
        .filter(|(s, _)| s != &z)
        .map(|(s, log)| {
            let mut evidence = base.evidence.clone();
            evidence.extend(t.evidence(&log));
            AdjustmentCertificate {
                rule: Rule::CEquivalence,
                treatments: base.treatments.clone(),
                outcome: base.outcome.clone(),
                adjustment_set: t.names(&s),
                witnesses: base.witnesses.clone(),
                evidence,
                annotations: Vec::new(),
            }
        })
        .collect())
}

/// Precision variables satisfy `X ⊥ T | Z`, overadjustment variables
/// `Y ⊥ T | Z ∪ X`. Precision wins when both hold, and the result is marked
/// ambiguous.
pub fn classify_variable<B: CiBackend + ?Sized>(
    ci: &B,
    x: &NodeSet,
    y: usize,
    z: &NodeSet,
    t: &NodeSet,
) -> Result<Classification> {
    check_equivalence_inputs(ci, x, y, &[z, t])?;
    if let Some(v) = z.intersection(t).first() {
        return Err(Error::Overlap(ci.variables()[v].clone()));
    }
    let tester = Tester::new(ci);
    let mut log = Log::new();
    let precision = tester.set_indep(x, t, z, &mut log)?;
    let over = tester.set_indep(&NodeSet::singleton(y), t, &z.union(x), &mut log)?;
    let class = match (precision, over) {
        (true, _) => VariableClass::Precision,
        (false, true) => VariableClass::Overadjustment,
        (false, false) => VariableClass::Unclassified,
    };
    Ok(Classification {
        class,
        ambiguous: precision && over,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citest::OracleCi;
    use crate::graph::Dag;

    fn collider() -> Dag {
        // W -> X -> Y with an unrelated covariate V.
        Dag::from_edges(&["W", "V", "X", "Y"], &[("W", "X"), ("X", "Y")], &[]).unwrap()
    }

    #[test]
    fn empty_pool_finds_nothing() {
        let g = collider();
        let ci = OracleCi::new(&g);
        let found = r1_entner(&ci, &NodeSet::new(), 2, 3, &SearchConfig::default()).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn instrument_certifies_empty_set() {
        let g = collider();
        let ci = OracleCi::new(&g);
        let pool: NodeSet = [0, 1].into_iter().collect();
        let found = r1_entner(&ci, &pool, 2, 3, &SearchConfig::all_hits()).unwrap();
        let sets: Vec<Vec<String>> = found.iter().map(|c| c.adjustment_set.clone()).collect();
        assert_eq!(sets, vec![Vec::<String>::new(), vec!["V".to_string()]]);
        assert!(found.iter().all(|c| c.replay(&ci).unwrap().is_empty()));
    }

    #[test]
    fn rejects_overlapping_inputs_and_large_pools() {
        let g = collider();
        let ci = OracleCi::new(&g);
        let pool: NodeSet = [0, 2].into_iter().collect();
        assert!(matches!(
            r1_entner(&ci, &pool, 2, 3, &SearchConfig::default()),
            Err(Error::Overlap(_))
        ));
        let cfg = SearchConfig {
            max_pool: 1,
            ..SearchConfig::default()
        };
        let pool: NodeSet = [0, 1].into_iter().collect();
        assert!(matches!(
            r1_entner(&ci, &pool, 2, 3, &cfg),
            Err(Error::PoolTooLarge { size: 2, cap: 1 })
        ));
    }

    #[test]
    fn tier_violations_are_reported() {
        let g = collider();
        let ci = OracleCi::new(&g);
        let tiers = TierKnowledge::new(vec![
            NodeSet::singleton(2),
            [0, 1].into_iter().collect(),
            NodeSet::singleton(3),
        ])
        .unwrap();
        let cfg = SearchConfig {
            tiers: Some(tiers),
            ..SearchConfig::default()
        };
        let pool: NodeSet = [0, 1].into_iter().collect();
        assert!(matches!(
            r1_entner(&ci, &pool, 2, 3, &cfg),
            Err(Error::TierViolation(_))
        ));
    }

    #[test]
    fn trivial_minimality() {
        let g = collider();
        let ci = OracleCi::new(&g);
        assert!(is_minimal(&ci, &NodeSet::new(), 2, 3).unwrap());
        assert_eq!(
            reduce_to_minimal(&ci, &NodeSet::new(), 2, 3).unwrap(),
            Some(NodeSet::new())
        );
        // V is independent of everything, so {V} reduces to the empty set.
        assert_eq!(
            reduce_to_minimal(&ci, &NodeSet::singleton(1), 2, 3).unwrap(),
            Some(NodeSet::new())
        );
    }

    #[test]
    fn identical_sets_are_c_equivalent() {
        let g = collider();
        let ci = OracleCi::new(&g);
        let z: NodeSet = [0, 1].into_iter().collect();
        assert!(c_equivalent(&ci, &NodeSet::singleton(2), 3, &z, &z).unwrap());
    }

    #[test]
    fn certificate_json_round_trip() {
        let g = collider();
        let ci = OracleCi::new(&g);
        let pool: NodeSet = [0, 1].into_iter().collect();
        let cert = r1_entner(&ci, &pool, 2, 3, &SearchConfig::default())
            .unwrap()
            .remove(0);
        let back = AdjustmentCertificate::from_json(&cert.to_json()).unwrap();
        assert_eq!(back, cert);
    }
}
