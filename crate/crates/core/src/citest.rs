//! Conditional independence queries.
//!
//! Two backends answer the same [`CiQuery`]: an exact d-separation oracle on
//! a known DAG, and a Fisher-z partial-correlation test on data paired with a
//! [`ThresholdPolicy`]. [`CachedCi`] memoizes either one.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::nodeset::NodeSet;

/// Eigenvalue floor below which a correlation submatrix counts as singular.
pub const SINGULAR_EIGENVALUE: f64 = 1e-12;

/// Smallest p-value written to logs and reports.
pub const P_FLOOR: f64 = 1e-300;

/// Is `a` independent of `b` given `cond`? Indices are backend variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CiQuery {
    pub a: usize,
    pub b: usize,
    pub cond: NodeSet,
}

impl CiQuery {
    pub fn new(a: usize, b: usize, cond: NodeSet) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidQuery(format!(
                "variable #{a} tested against itself"
            )));
        }
        if cond.contains(a) || cond.contains(b) {
            return Err(Error::InvalidQuery(
                "tested variable appears in the conditioning set".into(),
            ));
        }
        Ok(Self { a, b, cond })
    }

    /// Symmetric form used as the cache key.
    pub fn canonical(&self) -> Self {
        Self {
            a: self.a.min(self.b),
            b: self.a.max(self.b),
            cond: self.cond.clone(),
        }
    }

    pub fn render(&self, names: &[String]) -> String {
        let cond: Vec<&str> = self.cond.iter().map(|i| names[i].as_str()).collect();
        format!(
            "{} ⫫? {} | {{{}}}",
            names[self.a],
            names[self.b],
            cond.join(", ")
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Dependent,
    Independent,
    Inconclusive,
}

impl Decision {
    pub fn code(self) -> &'static str {
        match self {
            Decision::Dependent => "d",
            Decision::Independent => "i",
            Decision::Inconclusive => "inc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiVerdict {
    pub decision: Decision,
    /// Present for data backends only.
    pub p_value: Option<f64>,
}

impl CiVerdict {
    pub fn exact(independent: bool) -> Self {
        Self {
            decision: if independent {
                Decision::Independent
            } else {
                Decision::Dependent
            },
            p_value: None,
        }
    }
}

/// Maps p-values to decisions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Dependent iff `p < alpha`, otherwise independent.
    Single { alpha: f64 },
    /// Dependent iff `p < alpha_dep`, independent iff `p > alpha_indep`,
    /// inconclusive in between.
    Mixed { alpha_dep: f64, alpha_indep: f64 },
}

impl ThresholdPolicy {
    pub fn single(alpha: f64) -> Result<Self> {
        let p = ThresholdPolicy::Single { alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn mixed(alpha_dep: f64, alpha_indep: f64) -> Result<Self> {
        let p = ThresholdPolicy::Mixed {
            alpha_dep,
            alpha_indep,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdPolicy::Single { alpha } if alpha > 0.0 && alpha < 1.0 => Ok(()),
            ThresholdPolicy::Single { alpha } => Err(Error::InvalidPolicy(format!(
                "alpha must lie in (0, 1), got {alpha}"
            ))),
            ThresholdPolicy::Mixed {
                alpha_dep,
                alpha_indep,
            } if 0.0 < alpha_dep && alpha_dep < alpha_indep && alpha_indep < 1.0 => Ok(()),
            ThresholdPolicy::Mixed {
                alpha_dep,
                alpha_indep,
            } => Err(Error::InvalidPolicy(format!(
                "need 0 < alpha_dep < alpha_indep < 1, got {alpha_dep} and {alpha_indep}"
            ))),
        }
    }

    /// Short label used in reports, e.g. `single(0.05)`.
    pub fn label(&self) -> String {
        match self {
            ThresholdPolicy::Single { alpha } => format!("single({alpha})"),
            ThresholdPolicy::Mixed {
                alpha_dep,
                alpha_indep,
            } => format!("mixed({alpha_dep};{alpha_indep})"),
        }
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn decide(policy: &ThresholdPolicy, p: f64) -> CiVerdict {
    let decision = match *policy {
        ThresholdPolicy::Single { alpha } => {
            if p < alpha {
                Decision::Dependent
            } else {
                Decision::Independent
            }
        }
        ThresholdPolicy::Mixed {
            alpha_dep,
            alpha_indep,
        } => {
            if p < alpha_dep {
                Decision::Dependent
            } else if p > alpha_indep {
                Decision::Independent
            } else {
                Decision::Inconclusive
            }
        }
    };
    CiVerdict {
        decision,
        p_value: Some(p),
    }
}

/// Something that answers conditional independence queries over a fixed,
/// named set of variables.
pub trait CiBackend: Sync {
    fn variables(&self) -> &[String];

    fn test(&self, q: &CiQuery) -> Result<CiVerdict>;

    fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables()
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }
}

impl<B: CiBackend + ?Sized> CiBackend for &B {
    fn variables(&self) -> &[String] {
        (**self).variables()
    }

    fn test(&self, q: &CiQuery) -> Result<CiVerdict> {
        (**self).test(q)
    }
}

pub fn oracle_ci(dag: &Dag, q: &CiQuery) -> Result<CiVerdict> {
    let sep = dag.d_separated(
        &NodeSet::singleton(q.a),
        &NodeSet::singleton(q.b),
        &q.cond,
    )?;
    Ok(CiVerdict::exact(sep))
}

/// d-separation in a known DAG, read as (in)dependence.
#[derive(Clone, Copy, Debug)]
pub struct OracleCi<'a> {
    dag: &'a Dag,
}

impl<'a> OracleCi<'a> {
    pub fn new(dag: &'a Dag) -> Self {
        Self { dag }
    }

    pub fn dag(&self) -> &Dag {
        self.dag
    }
}

impl CiBackend for OracleCi<'_> {
    fn variables(&self) -> &[String] {
        self.dag.names()
    }

    fn test(&self, q: &CiQuery) -> Result<CiVerdict> {
        oracle_ci(self.dag, q)
    }
}

/// Inverse of a correlation submatrix, refusing near-singular input.
fn correlation_inverse(sub: &DMatrix<f64>, names: impl Fn() -> Vec<String>) -> Result<DMatrix<f64>> {
    if let Some(chol) = sub.clone().cholesky() {
        let inv = chol.inverse();
        // lambda_min >= 1 / trace(inverse), so this settles most cases cheaply.
        if 1.0 / inv.trace() >= SINGULAR_EIGENVALUE {
            return Ok(inv);
        }
    }
    let eig = SymmetricEigen::new(sub.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < SINGULAR_EIGENVALUE {
        return Err(Error::Singular { columns: names() });
    }
    sub.clone()
        .pseudo_inverse(SINGULAR_EIGENVALUE)
        .map_err(|_| Error::Singular { columns: names() })
}

/// Sample partial correlation of columns `a` and `b` given `cond`.
pub fn partial_correlation(data: &Dataset, q: &CiQuery) -> Result<f64> {
    let p = data.n_cols();
    if q.a >= p || q.b >= p || q.cond.iter().any(|c| c >= p) {
        return Err(Error::InvalidQuery("variable outside the dataset".into()));
    }
    let q = q.canonical();
    let vars: Vec<usize> = [q.a, q.b].into_iter().chain(q.cond.iter()).collect();
    let corr = data.correlation();
    let sub = DMatrix::from_fn(vars.len(), vars.len(), |i, j| corr[(vars[i], vars[j])]);
    let inv = correlation_inverse(&sub, || {
        vars.iter().map(|&v| data.columns()[v].clone()).collect()
    })?;
    let r = -inv[(0, 1)] / (inv[(0, 0)] * inv[(1, 1)]).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}

/// Two-sided p-value for zero partial correlation via the Fisher z-transform,
/// with `n - |cond| - 3` effective degrees of freedom.
pub fn fisher_z(data: &Dataset, q: &CiQuery) -> Result<f64> {
    Ok(fisher_z_statistic(data, q)?.1)
}

/// The standardized z-statistic and its two-sided p-value.
pub fn fisher_z_statistic(data: &Dataset, q: &CiQuery) -> Result<(f64, f64)> {
    let n = data.n_rows();
    let needed = q.cond.len() + 3;
    if n <= needed {
        return Err(Error::InsufficientSamples { n, needed });
    }
    let r = partial_correlation(data, q)?;
    if r.abs() >= 1.0 {
        return Ok((f64::INFINITY, 0.0));
    }
    let stat = ((n - needed) as f64).sqrt() * r.atanh();
    let p = erfc(stat.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok((stat, p))
}

/// Fisher-z tests on a dataset, thresholded by a policy.
#[derive(Clone, Copy, Debug)]
pub struct FisherZCi<'a> {
    data: &'a Dataset,
    policy: ThresholdPolicy,
}

impl<'a> FisherZCi<'a> {
    pub fn new(data: &'a Dataset, policy: ThresholdPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Self { data, policy })
    }

    pub fn policy(&self) -> ThresholdPolicy {
        self.policy
    }
}

impl CiBackend for FisherZCi<'_> {
    fn variables(&self) -> &[String] {
        self.data.columns()
    }

    fn test(&self, q: &CiQuery) -> Result<CiVerdict> {
        Ok(decide(&self.policy, fisher_z(self.data, q)?))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

/// Memoizing wrapper keyed on the canonical query.
///
/// Concurrent readers share the map; inserts take the write lock. Only
/// cache misses, i.e. tests actually run, reach the trace.
pub struct CachedCi<B> {
    inner: B,
    cache: RwLock<HashMap<CiQuery, CiVerdict>>,
    hits: AtomicU64,
    misses: AtomicU64,
    trace: Option<Mutex<Vec<String>>>,
}

impl<B: CiBackend> CachedCi<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            cache: RwLock::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            trace: None,
        }
    }

    pub fn with_trace(inner: B) -> Self {
        Self {
            trace: Some(Mutex::new(Vec::new())),
            ..Self::new(inner)
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    pub fn trace_lines(&self) -> Vec<String> {
        self.trace
            .as_ref()
            .map(|t| t.lock().unwrap().clone())
            .unwrap_or_default()
    }
}

/// One trace line: `a ⫫? b | {cond} p=<val> verdict=<d|i|inc>`.
pub fn trace_line(names: &[String], q: &CiQuery, v: &CiVerdict) -> String {
    let p = match v.p_value {
        Some(p) => format!("{:.6e}", p.clamp(P_FLOOR, 1.0)),
        None => "-".to_string(),
    };
    format!("{} p={p} verdict={}", q.render(names), v.decision.code())
}

impl<B: CiBackend> CiBackend for CachedCi<B> {
    fn variables(&self) -> &[String] {
        self.inner.variables()
    }

    fn test(&self, q: &CiQuery) -> Result<CiVerdict> {
        let key = q.canonical();
        if let Some(v) = self.cache.read().unwrap().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(*v);
        }
        let v = self.inner.test(&key)?;
        self.misses.fetch_add(1, Ordering::Relaxed);
        if let Some(trace) = &self.trace {
            trace
                .lock()
                .unwrap()
                .push(trace_line(self.inner.variables(), &key, &v));
        }
        self.cache.write().unwrap().insert(key, v);
        Ok(v)
    }
}
