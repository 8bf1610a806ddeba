//! Random tiered DAGs and linear-Gaussian structural equation models.

use std::collections::{BTreeMap, HashMap};

use log::debug;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::format::GraphFile;
use crate::graph::{Dag, TierKnowledge};
use crate::nodeset::NodeSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub covariates: usize,
    pub latents: usize,
    pub treatments: usize,
    pub edge_prob: f64,
    /// Coefficient magnitudes are uniform on `[weight_min, weight_max]` with
    /// a random sign.
    pub weight_min: f64,
    pub weight_max: f64,
    pub noise_variance: f64,
    pub seed: u64,
    /// Give up after this many rejected draws.
    pub max_redraws: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            covariates: 10,
            latents: 5,
            treatments: 2,
            edge_prob: 0.3,
            weight_min: 0.1,
            weight_max: 1.0,
            noise_variance: 1.0,
            seed: 0,
            max_redraws: 10_000,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.treatments == 0 {
            return bad("need at least one treatment".into());
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return bad(format!("edge_prob {} outside [0, 1]", self.edge_prob));
        }
        if !(self.weight_min >= 0.1 && self.weight_min <= self.weight_max) {
            return bad(format!(
                "weight magnitudes need 0.1 <= weight_min <= weight_max, got [{}, {}]",
                self.weight_min, self.weight_max
            ));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return bad(format!("noise_variance {} must be positive", self.noise_variance));
        }
        if self.max_redraws == 0 {
            return bad("max_redraws must be positive".into());
        }
        Ok(())
    }
}

/// Independent per-trial seed derived from a master seed (SplitMix64).
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A generated DAG with its roles spelled out.
///
/// Nodes are laid out as `W1..Wn, X1..Xk, Y, U1..Um`.
#[derive(Clone, Debug, PartialEq)]
pub struct TieredDag {
    pub dag: Dag,
    pub tiers: TierKnowledge,
    pub covariates: NodeSet,
    /// In causal order: `X_i` is never a descendant of `X_j` for `j > i`.
    pub treatments: Vec<usize>,
    pub outcome: usize,
    /// Rejected draws before this one was accepted.
    pub redraws: usize,
}

/// Draws a DAG whose observed edges respect `W < X < Y` (and index order
/// within a tier) and whose latents are roots with at least two observed
/// children. Every treatment has a directed path to the outcome unless the
/// edge probability is zero.
pub fn random_tiered_dag<R: Rng>(cfg: &GenConfig, rng: &mut R) -> Result<TieredDag> {
    cfg.validate()?;
    let (nw, nx, nu) = (cfg.covariates, cfg.treatments, cfg.latents);
    let n_obs = nw + nx + 1;
    let mut names: Vec<String> = (1..=nw).map(|i| format!("W{i}")).collect();
    names.extend((1..=nx).map(|i| format!("X{i}")));
    names.push("Y".into());
    names.extend((1..=nu).map(|i| format!("U{i}")));
    let outcome = nw + nx;
    let treatments: Vec<usize> = (nw..nw + nx).collect();
    let covariates: NodeSet = (0..nw).collect();
    let tiers = TierKnowledge::new(vec![
        covariates.clone(),
        treatments.iter().collect(),
        NodeSet::singleton(outcome),
    ])?;

    let p = cfg.edge_prob;
    for redraws in 0..cfg.max_redraws {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for i in 0..n_obs {
            for j in i + 1..n_obs {
                if rng.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        if p > 0.0 {
            for u in n_obs..n_obs + nu {
                let children = latent_children(rng, n_obs, p, cfg.max_redraws)?;
                edges.extend(children.into_iter().map(|c| (u, c)));
            }
        }
        let mut b = Dag::builder();
        for name in &names {
            b.node(name);
        }
        for &(a, c) in &edges {
            b.edge(&names[a], &names[c])?;
        }
        for name in &names[n_obs..] {
            b.latent(name);
        }
        let dag = b.build()?;
        if p > 0.0 {
            let reaches = dag.ancestors(&NodeSet::singleton(outcome))?;
            if !treatments.iter().all(|&x| reaches.contains(x)) {
                continue;
            }
        }
        if redraws > 0 {
            debug!("accepted tiered DAG after {redraws} redraws");
        }
        return Ok(TieredDag {
            dag,
            tiers,
            covariates,
            treatments,
            outcome,
            redraws,
        });
    }
    Err(Error::InvalidConfig(format!(
        "no DAG with a causal path from every treatment after {} draws",
        cfg.max_redraws
    )))
}

fn latent_children<R: Rng>(rng: &mut R, n_obs: usize, p: f64, cap: usize) -> Result<Vec<usize>> {
    for _ in 0..cap {
        let children: Vec<usize> = (0..n_obs).filter(|_| rng.random_bool(p)).collect();
        if children.len() >= 2 {
            return Ok(children);
        }
    }
    Err(Error::InvalidConfig(format!(
        "could not give a latent two observed children at edge_prob {p}"
    )))
}

/// Linear-Gaussian SEM: each node is the weighted sum of its parents plus
/// independent Gaussian noise.
#[derive(Clone, Debug, PartialEq)]
pub struct SemModel {
    pub dag: Dag,
    pub weights: BTreeMap<(usize, usize), f64>,
    pub variances: Vec<f64>,
}

impl SemModel {
    pub fn new(dag: Dag, weights: BTreeMap<(usize, usize), f64>, variances: Vec<f64>) -> Result<Self> {
        if variances.len() != dag.len() {
            return Err(Error::InvalidConfig(format!(
                "{} variances for {} nodes",
                variances.len(),
                dag.len()
            )));
        }
        if let Some(v) = variances.iter().find(|v| v.is_nan() || **v <= 0.0) {
            return Err(Error::InvalidConfig(format!("noise variance {v} is not positive")));
        }
        for &(p, c) in weights.keys() {
            if !dag.has_edge(p, c) {
                return Err(Error::InvalidConfig(format!(
                    "weight on missing edge {} -> {}",
                    dag.name(p),
                    dag.name(c)
                )));
            }
        }
        if weights.len() != dag.edge_count() {
            return Err(Error::InvalidConfig("every edge needs a weight".into()));
        }
        Ok(Self {
            dag,
            weights,
            variances,
        })
    }

    /// Uses the file's weights and variances; missing variances default to 1.
    pub fn from_graph_file(file: &GraphFile) -> Result<Self> {
        let weights = file.weights.iter().map(|(&k, &w)| (k, w)).collect();
        let variances = (0..file.dag.len())
            .map(|i| file.variances.get(&i).copied().unwrap_or(1.0))
            .collect();
        Self::new(file.dag.clone(), weights, variances)
    }

    pub fn to_graph_file(&self, tiers: Option<TierKnowledge>) -> GraphFile {
        GraphFile {
            dag: self.dag.clone(),
            tiers,
            weights: self.weights.iter().map(|(&k, &w)| (k, w)).collect::<HashMap<_, _>>(),
            variances: self.variances.iter().copied().enumerate().collect(),
        }
    }

    pub fn weight(&self, parent: usize, child: usize) -> f64 {
        self.weights.get(&(parent, child)).copied().unwrap_or(0.0)
    }

    /// Covariance over all nodes, `(I - B)^-1 Ω (I - B)^-T`.
    pub fn implied_covariance(&self) -> DMatrix<f64> {
        let n = self.dag.len();
        // Total-effect matrix: column x holds the effects of x on every node.
        let mut total = DMatrix::<f64>::zeros(n, n);
        for &v in self.dag.topological_order() {
            total[(v, v)] = 1.0;
            for &p in self.dag.parents(v) {
                let w = self.weight(p, v);
                for s in 0..n {
                    total[(v, s)] += w * total[(p, s)];
                }
            }
        }
        let omega = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.variances.clone()));
        &total * omega * total.transpose()
    }
}

/// Weights uniform on `[-max, -min] ∪ [min, max]`, variances from `cfg`.
pub fn random_sem<R: Rng>(dag: &Dag, cfg: &GenConfig, rng: &mut R) -> Result<SemModel> {
    cfg.validate()?;
    let mut weights = BTreeMap::new();
    for (p, c) in dag.edges() {
        let magnitude = rng.random_range(cfg.weight_min..=cfg.weight_max);
        let w = if rng.random_bool(0.5) { magnitude } else { -magnitude };
        weights.insert((p, c), w);
    }
    SemModel::new(dag.clone(), weights, vec![cfg.noise_variance; dag.len()])
}

/// `n` samples of the observed nodes.
pub fn sample<R: Rng>(model: &SemModel, n: usize, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample size must be positive".into()));
    }
    let dag = &model.dag;
    let mut all = DMatrix::<f64>::zeros(n, dag.len());
    for &v in dag.topological_order() {
        let noise = Normal::new(0.0, model.variances[v].sqrt())
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for r in 0..n {
            all[(r, v)] = noise.sample(rng);
        }
        for &p in dag.parents(v) {
            let w = model.weight(p, v);
            for r in 0..n {
                all[(r, v)] += w * all[(r, p)];
            }
        }
    }
    let observed = dag.observed().to_vec();
    let values = all.select_columns(&observed);
    Dataset::new(observed.iter().map(|&v| dag.name(v).to_string()).collect(), values)
}

/// Sum over directed paths from `x` to `y` of the product of edge weights.
pub fn true_total_effect(model: &SemModel, x: usize, y: usize) -> Result<f64> {
    let n = model.dag.len();
    if x >= n || y >= n {
        return Err(Error::UnknownNode(format!("#{}", x.max(y))));
    }
    if x == y {
        return Err(Error::InvalidQuery("total effect of a node on itself".into()));
    }
    let mut effect = vec![0.0; n];
    effect[x] = 1.0;
    for &v in model.dag.topological_order() {
        if v == x {
            continue;
        }
        effect[v] = model
            .dag
            .parents(v)
            .iter()
            .map(|&p| model.weight(p, v) * effect[p])
            .sum();
    }
    Ok(effect[y])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub effect: f64,
    pub std_error: f64,
}

/// OLS coefficient of `x` in the regression of `y` on `x`, `z` and an
/// intercept, with its classical standard error. Indices are dataset columns.
pub fn estimate_effect(data: &Dataset, x: usize, y: usize, z: &NodeSet) -> Result<Estimate> {
    let p = data.n_cols();
    if x >= p || y >= p || z.iter().any(|c| c >= p) {
        return Err(Error::InvalidQuery("variable outside the dataset".into()));
    }
    let name = |c: usize| data.columns()[c].clone();
    if x == y || z.contains(y) {
        return Err(Error::Degenerate(format!("outcome `{}` is also a regressor", name(y))));
    }
    if z.contains(x) {
        return Err(Error::Overlap(name(x)));
    }
    let regressors: Vec<usize> = std::iter::once(x).chain(z.iter()).collect();
    let n = data.n_rows();
    let k = regressors.len();
    if n <= k + 1 {
        return Err(Error::InsufficientSamples { n, needed: k + 1 });
    }

    let center = |c: usize| {
        let col = data.values().column(c);
        let mean = col.mean();
        col.add_scalar(-mean)
    };
    let mut xm = DMatrix::<f64>::zeros(n, k);
    for (j, &c) in regressors.iter().enumerate() {
        xm.set_column(j, &center(c));
    }
    let yc = center(y);

    let gram = xm.transpose() * &xm;
    let scale: Vec<f64> = (0..k).map(|j| gram[(j, j)].sqrt()).collect();
    let rank_err = || Error::RankDeficient(regressors.iter().map(|&c| name(c)).collect());
    if scale.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(rank_err());
    }
    let corr = DMatrix::from_fn(k, k, |i, j| gram[(i, j)] / (scale[i] * scale[j]));
    let min_eig = SymmetricEigen::new(corr.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < 1e-10 {
        return Err(rank_err());
    }
    let inv = corr.cholesky().ok_or_else(rank_err)?.inverse();
    let gram_inv = DMatrix::from_fn(k, k, |i, j| inv[(i, j)] / (scale[i] * scale[j]));
    let beta = &gram_inv * (xm.transpose() * &yc);
    let resid = &yc - &xm * &beta;
    let rss = resid.norm_squared();
    let tss = yc.norm_squared();
    if rss <= 1e-12 * tss.max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(format!(
            "`{}` is an exact linear function of the regressors",
            name(y)
        )));
    }
    let sigma2 = rss / (n - k - 1) as f64;
    Ok(Estimate {
        effect: beta[0],
        std_error: (sigma2 * gram_inv[(0, 0)]).sqrt(),
    })
}
