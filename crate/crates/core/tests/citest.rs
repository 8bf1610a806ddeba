mod common;

use adjset::citest::{
    decide, fisher_z, fisher_z_statistic, oracle_ci, CachedCi, CiBackend, CiQuery, Decision, OracleCi,
    ThresholdPolicy,
};
use adjset::dataset::Dataset;
use adjset::fixtures;
use adjset::nodeset::{canonical_subsets, NodeSet};
use adjset::rules::{r1_entner, SearchConfig};
use adjset::sem;
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn oracle_statements_on_confounded_witness() {
    let g = fixtures::load("confounded_witness").dag;
    let (w, y) = (idx(&g, "W"), idx(&g, "Y"));
    let v = oracle_ci(&g, &CiQuery::new(w, y, set(&g, &["Z", "X"])).unwrap()).unwrap();
    assert_eq!(v.decision, Decision::Independent);
    let v = oracle_ci(&g, &CiQuery::new(w, y, set(&g, &["Z"])).unwrap()).unwrap();
    assert_eq!(v.decision, Decision::Dependent);
    assert!(v.p_value.is_none());
}

#[test]
fn decision_examples() {
    let single = ThresholdPolicy::single(0.05).unwrap();
    let mixed = ThresholdPolicy::mixed(0.01, 0.1).unwrap();
    assert_eq!(decide(&single, 0.03).decision, Decision::Dependent);
    assert_eq!(decide(&mixed, 0.05).decision, Decision::Inconclusive);
    assert_eq!(decide(&mixed, 0.2).decision, Decision::Independent);
}

/// `n` rows where column 0 and 1 are conditionally independent given the
/// remaining `k` columns, which drive both.
fn null_data<R: Rng>(rng: &mut R, n: usize, k: usize) -> Dataset {
    let mut m = DMatrix::<f64>::zeros(n, k + 2);
    for r in 0..n {
        let mut drive = 0.0;
        for c in 0..k {
            let v: f64 = rng.sample(StandardNormal);
            m[(r, c + 2)] = v;
            drive += 0.5 * v;
        }
        m[(r, 0)] = drive + rng.sample::<f64, _>(StandardNormal);
        m[(r, 1)] = -drive + rng.sample::<f64, _>(StandardNormal);
    }
    let names = (0..k + 2).map(|i| format!("C{i}")).collect();
    Dataset::new(names, m).unwrap()
}

#[test]
fn type_one_error_is_calibrated() {
    let reps = 2000;
    let alpha: f64 = 0.05;
    let band = 2.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
    let mut rng = sem::rng_from_seed(20261018);
    for k in [0usize, 1, 3] {
        let cond: NodeSet = (2..k + 2).collect();
        let q = CiQuery::new(0, 1, cond).unwrap();
        let rejections = (0..reps)
            .filter(|_| fisher_z(&null_data(&mut rng, 1000, k), &q).unwrap() < alpha)
            .count();
        let rate = rejections as f64 / reps as f64;
        assert!((rate - alpha).abs() <= band, "|cond| = {k}: rejection rate {rate}");
    }
}

#[test]
fn confounded_witness_statements_hold_in_samples() {
    let model = fixtures::model("confounded_witness").unwrap();
    let g = &model.dag;
    let seeds = 100;
    let (mut dep_found, mut indep_kept) = (0, 0);
    for seed in 0..seeds {
        let data = sem::sample(&model, 5000, &mut sem::rng_from_seed(seed)).unwrap();
        let col = |n: &str| data.column_index(n).unwrap();
        let cond = |names: &[&str]| names.iter().map(|n| col(n)).collect::<NodeSet>();
        let (w, y) = (col("W"), col("Y"));
        if fisher_z(&data, &CiQuery::new(w, y, cond(&["Z"])).unwrap()).unwrap() < 0.01 {
            dep_found += 1;
        }
        if fisher_z(&data, &CiQuery::new(w, y, cond(&["Z", "X"])).unwrap()).unwrap() > 0.1 {
            indep_kept += 1;
        }
    }
    assert!(g.len() == 5);
    assert!(dep_found as f64 >= 0.95 * seeds as f64, "dependence detected in {dep_found}");
    // Under a true null P(p > 0.1) = 0.9; allow three binomial standard errors.
    let floor = 0.9 - 3.0 * (0.09f64 / seeds as f64).sqrt();
    assert!(indep_kept as f64 >= floor * seeds as f64, "independence kept in {indep_kept}");
}

#[test]
fn oracle_verdicts_are_semi_graphoid_on_small_fixtures() {
    for name in ["confounded_witness", "combine_only"] {
        let g = fixtures::load(name).dag;
        assert!(g.len() <= 6);
        let all = NodeSet::full(g.len());
        for a in 0..g.len() {
            for b in 0..g.len() {
                if a == b {
                    continue;
                }
                let rest = all.without(a).without(b);
                for cond in canonical_subsets(&rest, rest.len()) {
                    let ab = oracle_ci(&g, &CiQuery::new(a, b, cond.clone()).unwrap()).unwrap();
                    let ba = oracle_ci(&g, &CiQuery::new(b, a, cond.clone()).unwrap()).unwrap();
                    assert_eq!(ab, ba);
                    // Decomposition: a ⊥ {b, c} | cond implies a ⊥ b | cond.
                    for c in rest.difference(&cond).iter() {
                        let pair = NodeSet::singleton(b).with(c);
                        if g.d_separated(&NodeSet::singleton(a), &pair, &cond).unwrap() {
                            assert_eq!(ab.decision, Decision::Independent, "{name}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn cache_reports_hits_after_repeated_search() {
    let g = fixtures::load("confounded_witness").dag;
    let ci = CachedCi::new(OracleCi::new(&g));
    let pool = set(&g, &["W", "Z"]);
    let (x, y) = (idx(&g, "X"), idx(&g, "Y"));
    let first = r1_entner(&ci, &pool, x, y, &SearchConfig::default()).unwrap();
    let misses = ci.stats().misses;
    let second = r1_entner(&ci, &pool, x, y, &SearchConfig::default()).unwrap();
    assert_eq!(first, second);
    assert!(ci.stats().hits >= 1);
    assert_eq!(ci.stats().misses, misses);

    let q = CiQuery::new(idx(&g, "W"), y, set(&g, &["Z"])).unwrap();
    let swapped = CiQuery::new(y, idx(&g, "W"), set(&g, &["Z"])).unwrap();
    assert_eq!(ci.test(&q).unwrap(), ci.test(&swapped).unwrap());
}

#[test]
fn trace_records_p_values() {
    let model = fixtures::model("confounded_witness").unwrap();
    let data = sem::sample(&model, 500, &mut sem::rng_from_seed(3)).unwrap();
    let backend = adjset::FisherZCi::new(&data, ThresholdPolicy::single(0.05).unwrap()).unwrap();
    let ci = CachedCi::with_trace(backend);
    let q = CiQuery::new(0, 3, NodeSet::singleton(1)).unwrap();
    ci.test(&q).unwrap();
    ci.test(&q).unwrap();
    let lines = ci.trace_lines();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("W ⫫? Y | {Z} p="), "{}", lines[0]);
    assert!(lines[0].ends_with("verdict=d") || lines[0].ends_with("verdict=i"));
}

fn random_data(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = sem::rng_from_seed(seed);
    let mut m = DMatrix::<f64>::zeros(n, p);
    for r in 0..n {
        let shared: f64 = rng.sample(StandardNormal);
        for c in 0..p {
            m[(r, c)] = 0.4 * shared + rng.sample::<f64, _>(StandardNormal);
        }
    }
    Dataset::new((0..p).map(|i| format!("C{i}")).collect(), m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decide_is_monotone(p in 0.0f64..=1.0, q in 0.0f64..=1.0, single in any::<bool>()) {
        let policy = if single {
            ThresholdPolicy::single(0.05).unwrap()
        } else {
            ThresholdPolicy::mixed(0.01, 0.1).unwrap()
        };
        let rank = |d: Decision| match d {
            Decision::Dependent => 0,
            Decision::Inconclusive => 1,
            Decision::Independent => 2,
        };
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(rank(decide(&policy, lo).decision) <= rank(decide(&policy, hi).decision));
    }

    #[test]
    fn fisher_z_is_affine_invariant_and_symmetric(
        seed in 0u64..1000,
        column in 0usize..5,
        scale in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        shift in -100.0f64..100.0,
        cond_mask in 0u8..8,
    ) {
        let data = random_data(seed, 200, 5);
        let cond: NodeSet = (0..3).filter(|i| cond_mask >> i & 1 == 1).map(|i| i + 2).collect();
        let q = CiQuery::new(0, 1, cond.clone()).unwrap();
        let (z0, p0) = fisher_z_statistic(&data, &q).unwrap();
        let swapped = CiQuery::new(1, 0, cond).unwrap();
        prop_assert_eq!(p0, fisher_z(&data, &swapped).unwrap());

        let mut values = data.values().clone();
        for r in 0..values.nrows() {
            values[(r, column)] = values[(r, column)] * scale + shift;
        }
        let moved = Dataset::new(data.columns().to_vec(), values).unwrap();
        let (z1, _) = fisher_z_statistic(&moved, &q).unwrap();
        // A negative scale on exactly one tested column flips the sign.
        let flips = scale < 0.0 && column < 2;
        let z1 = if flips { -z1 } else { z1 };
        prop_assert!((z0 - z1).abs() <= 1e-9, "z moved from {} to {}", z0, z1);
    }
}
