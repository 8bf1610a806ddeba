//! Simulation study: generate, sample, discover, verify, report precision.

use std::fmt::Write as _;
use std::io::Write;
use std::time::{Duration, Instant};

use log::info;
use serde::{Deserialize, Serialize};

use crate::citest::{CachedCi, CiBackend, FisherZCi, OracleCi, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::nodeset::NodeSet;
use crate::rules::{self, AdjustmentCertificate, SearchConfig};
use crate::sem::{self, GenConfig, SemModel, TieredDag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Entner,
    Build,
    Combine,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Entner => "entner",
            Method::Build => "build",
            Method::Combine => "combine",
        }
    }

    /// Runs the method over `pool` for the treatments in causal order.
    pub fn run<B: CiBackend + ?Sized>(
        self,
        ci: &B,
        pool: &NodeSet,
        xs: &[usize],
        y: usize,
        cfg: &SearchConfig,
    ) -> Result<Vec<AdjustmentCertificate>> {
        match self {
            Method::Entner => match xs {
                [x] => rules::r1_entner(ci, pool, *x, y, cfg),
                _ => Err(Error::InvalidQuery(
                    "the single-treatment rule needs exactly one treatment".into(),
                )),
            },
            Method::Build => rules::r1_build(ci, pool, xs, y, cfg),
            Method::Combine => rules::r1_combine(ci, pool, xs, y, cfg),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entner" => Ok(Method::Entner),
            "build" => Ok(Method::Build),
            "combine" => Ok(Method::Combine),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GenConfig,
    pub trials: usize,
    pub sample_sizes: Vec<usize>,
    pub policies: Vec<ThresholdPolicy>,
    pub methods: Vec<Method>,
    /// Answer CI queries by d-separation on the true DAG instead of data.
    pub oracle: bool,
    pub max_cond_size: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GenConfig::default(),
            trials: 40,
            sample_sizes: vec![500, 1000, 5000],
            policies: vec![
                ThresholdPolicy::Single { alpha: 0.05 },
                ThresholdPolicy::Mixed {
                    alpha_dep: 0.01,
                    alpha_indep: 0.1,
                },
            ],
            methods: vec![Method::Build, Method::Combine],
            oracle: false,
            max_cond_size: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        self.generator.validate()?;
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("no methods selected");
        }
        if self.methods.contains(&Method::Entner) && self.generator.treatments != 1 {
            return bad("method `entner` needs exactly one treatment");
        }
        if !self.oracle {
            if self.sample_sizes.is_empty() {
                return bad("no sample sizes given");
            }
            if self.sample_sizes.contains(&0) {
                return bad("sample sizes must be positive");
            }
            if self.policies.is_empty() {
                return bad("no threshold policies given");
            }
            for p in &self.policies {
                p.validate()?;
            }
        }
        Ok(())
    }

    fn search(&self) -> SearchConfig {
        SearchConfig {
            max_cond_size: self.max_cond_size,
            ..SearchConfig::default()
        }
    }
}

/// One discovery attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    /// Absent in oracle mode.
    pub policy: Option<ThresholdPolicy>,
    /// Absent in oracle mode.
    pub sample_size: Option<usize>,
    pub found: Option<Vec<String>>,
    /// Present iff `found` is.
    pub verified: Option<bool>,
    /// Distinct CI tests actually run.
    pub ci_queries: u64,
    pub wall_time: Duration,
    pub error: Option<String>,
    pub certificate: Option<AdjustmentCertificate>,
}

/// The DAG and model of one trial, reproducible from the master seed.
pub fn trial_model(cfg: &GenConfig, trial: usize) -> Result<(TieredDag, SemModel)> {
    let mut rng = sem::rng_from_seed(sem::trial_seed(cfg.seed, trial as u64));
    let tiered = sem::random_tiered_dag(cfg, &mut rng)?;
    let model = sem::random_sem(&tiered.dag, cfg, &mut rng)?;
    Ok((tiered, model))
}

fn attempt<B: CiBackend>(
    ci: CachedCi<B>,
    tiered: &TieredDag,
    method: Method,
    search: &SearchConfig,
) -> (Result<Option<AdjustmentCertificate>>, u64, Duration) {
    let start = Instant::now();
    let found = method
        .run(&ci, &tiered.covariates, &tiered.treatments, tiered.outcome, search)
        .map(|mut v| (!v.is_empty()).then(|| v.swap_remove(0)));
    (found, ci.stats().misses, start.elapsed())
}

fn record(
    trial: usize,
    method: Method,
    policy: Option<ThresholdPolicy>,
    sample_size: Option<usize>,
    tiered: &TieredDag,
    outcome: (Result<Option<AdjustmentCertificate>>, u64, Duration),
) -> TrialRecord {
    let (found, ci_queries, wall_time) = outcome;
    let mut rec = TrialRecord {
        trial,
        method,
        policy,
        sample_size,
        found: None,
        verified: None,
        ci_queries,
        wall_time,
        error: None,
        certificate: None,
    };
    match found.and_then(|cert| {
        let Some(cert) = cert else { return Ok(None) };
        let dag = &tiered.dag;
        let z = cert.adjustment(dag.names())?;
        let xs: NodeSet = tiered.treatments.iter().collect();
        let ok = dag.is_adjustment_set(&xs, &NodeSet::singleton(tiered.outcome), &z)?;
        Ok(Some((cert, ok)))
    }) {
        Ok(Some((cert, ok))) => {
            rec.found = Some(cert.adjustment_set.clone());
            rec.verified = Some(ok);
            rec.certificate = Some(cert);
        }
        Ok(None) => {}
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Vec<TrialRecord> {
    let search = cfg.search();
    let (tiered, model) = match trial_model(&cfg.generator, trial) {
        Ok(m) => m,
        Err(e) => return failed_trial(cfg, trial, &e.to_string()),
    };
    let mut out = Vec::new();
    if cfg.oracle {
        for &method in &cfg.methods {
            let ci = CachedCi::new(OracleCi::new(&tiered.dag));
            let outcome = attempt(ci, &tiered, method, &search);
            out.push(record(trial, method, None, None, &tiered, outcome));
        }
        return out;
    }
    // Datasets are drawn in size order from the trial's own stream, after
    // the DAG and the weights.
    let mut rng = sem::rng_from_seed(sem::trial_seed(cfg.generator.seed, trial as u64) ^ 0x5A5A_5A5A);
    let datasets: Vec<_> = cfg
        .sample_sizes
        .iter()
        .map(|&n| sem::sample(&model, n, &mut rng))
        .collect();
    for &method in &cfg.methods {
        for &policy in &cfg.policies {
            for (&n, data) in cfg.sample_sizes.iter().zip(&datasets) {
                let outcome = match data {
                    Ok(data) => match FisherZCi::new(data, policy) {
                        Ok(backend) => attempt(CachedCi::new(backend), &tiered, method, &search),
                        Err(e) => (Err(e), 0, Duration::ZERO),
                    },
                    Err(e) => (Err(Error::Dataset(e.to_string())), 0, Duration::ZERO),
                };
                out.push(record(trial, method, Some(policy), Some(n), &tiered, outcome));
            }
        }
    }
    out
}

fn failed_trial(cfg: &ExperimentConfig, trial: usize, message: &str) -> Vec<TrialRecord> {
    let blank = |method, policy, sample_size| TrialRecord {
        trial,
        method,
        policy,
        sample_size,
        found: None,
        verified: None,
        ci_queries: 0,
        wall_time: Duration::ZERO,
        error: Some(message.to_string()),
        certificate: None,
    };
    let mut out = Vec::new();
    for &method in &cfg.methods {
        if cfg.oracle {
            out.push(blank(method, None, None));
            continue;
        }
        for &policy in &cfg.policies {
            for &n in &cfg.sample_sizes {
                out.push(blank(method, Some(policy), Some(n)));
            }
        }
    }
    out
}

/// Runs every trial; records come back ordered by trial, method, policy and
/// sample size regardless of `execution`.
pub fn run_experiment(cfg: &ExperimentConfig, execution: Execution) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    info!(
        "running {} trials ({})",
        cfg.trials,
        if execution.is_parallel() { "parallel" } else { "sequential" }
    );
    let per_trial = exec::map_range(execution, cfg.trials, |t| run_trial(cfg, t));
    Ok(per_trial.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrecisionRow {
    pub method: Method,
    pub policy: Option<String>,
    pub sample_size: Option<usize>,
    pub attempts: usize,
    pub discoveries: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub errors: usize,
    /// `tp / (tp + fp)`; absent without discoveries.
    pub precision: Option<f64>,
}

/// Groups records by (method, policy, sample size) in order of first
/// appearance.
pub fn precision(records: &[TrialRecord]) -> Vec<PrecisionRow> {
    let mut rows: Vec<PrecisionRow> = Vec::new();
    for r in records {
        let policy = r.policy.map(|p| p.label());
        let idx = match rows.iter().position(|row| {
            row.method == r.method && row.policy == policy && row.sample_size == r.sample_size
        }) {
            Some(i) => i,
            None => {
                rows.push(PrecisionRow {
                    method: r.method,
                    policy,
                    sample_size: r.sample_size,
                    attempts: 0,
                    discoveries: 0,
                    true_positives: 0,
                    false_positives: 0,
                    errors: 0,
                    precision: None,
                });
                rows.len() - 1
            }
        };
        let row = &mut rows[idx];
        row.attempts += 1;
        if r.error.is_some() {
            row.errors += 1;
        }
        match r.verified {
            Some(true) => row.true_positives += 1,
            Some(false) => row.false_positives += 1,
            None => {}
        }
    }
    for row in &mut rows {
        row.discoveries = row.true_positives + row.false_positives;
        if row.discoveries > 0 {
            row.precision = Some(row.true_positives as f64 / row.discoveries as f64);
        }
    }
    rows
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// One row per attempt. Wall times live in [`write_timings_csv`] so this
/// file is identical across runs with the same seed.
pub fn write_records_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "method",
        "policy",
        "sample_size",
        "found",
        "verified",
        "ci_queries",
        "error",
    ])?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.method.name().to_string(),
            r.policy.map(|p| p.label()).unwrap_or_default(),
            opt(&r.sample_size),
            r.found
                .as_ref()
                .map(|f| format!("{{{}}}", f.join(" ")))
                .unwrap_or_default(),
            opt(&r.verified),
            r.ci_queries.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "method", "policy", "sample_size", "wall_time_ms"])?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.method.name().to_string(),
            r.policy.map(|p| p.label()).unwrap_or_default(),
            opt(&r.sample_size),
            format!("{:.3}", r.wall_time.as_secs_f64() * 1e3),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_csv<W: Write>(rows: &[PrecisionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "policy",
        "sample_size",
        "attempts",
        "discoveries",
        "true_positives",
        "false_positives",
        "errors",
        "precision",
    ])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.policy.clone().unwrap_or_else(|| "oracle".into()),
            opt(&r.sample_size),
            r.attempts.to_string(),
            r.discoveries.to_string(),
            r.true_positives.to_string(),
            r.false_positives.to_string(),
            r.errors.to_string(),
            r.precision.map(|p| format!("{p:.4}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table: one line per (method, policy), one column per sample
/// size, each cell `precision (tp/discoveries)`.
pub fn format_report(rows: &[PrecisionRow]) -> String {
    let mut sizes: Vec<Option<usize>> = Vec::new();
    let mut lines: Vec<(Method, Option<String>)> = Vec::new();
    for r in rows {
        if !sizes.contains(&r.sample_size) {
            sizes.push(r.sample_size);
        }
        let key = (r.method, r.policy.clone());
        if !lines.contains(&key) {
            lines.push(key);
        }
    }
    sizes.sort();
    let header: Vec<String> = sizes
        .iter()
        .map(|s| s.map(|n| format!("n={n}")).unwrap_or_else(|| "oracle".into()))
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:<10} {:<20}", "method", "policy");
    for h in &header {
        let _ = write!(out, " {h:>18}");
    }
    out.push('\n');
    for (method, policy) in &lines {
        let _ = write!(
            out,
            "{:<10} {:<20}",
            method.name(),
            policy.as_deref().unwrap_or("oracle")
        );
        for s in &sizes {
            let cell = rows
                .iter()
                .find(|r| r.method == *method && &r.policy == policy && r.sample_size == *s)
                .map(|r| {
                    let p = r.precision.map(|p| format!("{p:.3}")).unwrap_or_else(|| "-".into());
                    format!("{p} ({}/{})", r.true_positives, r.discoveries)
                })
                .unwrap_or_default();
            let _ = write!(out, " {cell:>18}");
        }
        out.push('\n');
    }
    out
}
