use std::fmt::Write as _;

use adjset::bench::Method;
use adjset::citest::{CachedCi, CiBackend, FisherZCi, ThresholdPolicy};
use adjset::dataset::Dataset;
use adjset::format::parse_tiers_document;
use adjset::graph::TierKnowledge;
use adjset::nodeset::NodeSet;
use adjset::rules::{self, AdjustmentCertificate, Annotation, SearchConfig, VariableClass};
use anyhow::{bail, Context, Result};
use serde_json::json;

use crate::manifest::{self, RunManifest};
use crate::DiscoverArgs;

fn policy(args: &DiscoverArgs) -> Result<ThresholdPolicy> {
    let p = match (args.alpha, args.alpha_dep, args.alpha_indep) {
        (_, Some(dep), Some(indep)) => ThresholdPolicy::mixed(dep, indep)?,
        (alpha, _, _) => ThresholdPolicy::single(alpha.unwrap_or(0.05))?,
    };
    Ok(p)
}

fn column(data: &Dataset, name: &str, role: &str, source: &str) -> Result<usize> {
    data.column_index(name)
        .map_err(|_| anyhow::anyhow!("{role} `{name}` is not a column of {source}"))
}

pub fn run(args: &DiscoverArgs, argv: &[String]) -> Result<()> {
    let data_src = args.data.display().to_string();
    let know_src = args.knowledge.display().to_string();
    let data_bytes = manifest::read_input(&args.data)?;
    let know_bytes = manifest::read_input(&args.knowledge)?;
    let data = Dataset::from_csv(&data_bytes[..]).with_context(|| data_src.clone())?;
    let know_text = String::from_utf8(know_bytes.clone()).with_context(|| format!("{know_src} is not UTF-8"))?;
    let named_tiers = parse_tiers_document(&know_text).with_context(|| know_src.clone())?;
    for name in named_tiers.iter().flatten() {
        if data.column_index(name).is_err() {
            bail!("{know_src}: tier variable `{name}` is not a column of {data_src}");
        }
    }
    let tiers = TierKnowledge::from_names(&named_tiers, |n| data.column_index(n))
        .with_context(|| know_src.clone())?;

    let xs: Vec<usize> = args
        .treatments
        .iter()
        .map(|t| column(&data, t, "treatment", &data_src))
        .collect::<Result<_>>()?;
    let y = column(&data, &args.outcome, "outcome", &data_src)?;
    let pool: NodeSet = match &args.pool {
        Some(names) => names
            .iter()
            .map(|n| column(&data, n, "pool variable", &data_src))
            .collect::<Result<_>>()?,
        None => {
            let first = xs.iter().filter_map(|&x| tiers.tier_of(x)).min().unwrap_or(0);
            tiers.before(first)
        }
    };
    rules::check_tiers(data.columns(), &tiers, &pool, &xs, y).with_context(|| know_src.clone())?;

    let method: Method = args.method.parse()?;
    if method == Method::Entner && xs.len() != 1 {
        bail!("method `entner` takes exactly one treatment, got {}", xs.len());
    }
    let policy = policy(args)?;
    let cfg = SearchConfig {
        max_cond_size: args.max_cond_size,
        stop_at_first: !args.all,
        tiers: Some(tiers),
        ..SearchConfig::default()
    };

    let backend = FisherZCi::new(&data, policy)?;
    let ci = if args.trace {
        CachedCi::with_trace(backend)
    } else {
        CachedCi::new(backend)
    };
    let mut certs = method.run(&ci, &pool, &xs, y, &cfg)?;
    if args.expand {
        let mut extra = Vec::new();
        for c in &certs {
            for e in rules::expand_certificate(&ci, c, &pool, &cfg)? {
                let known = certs.iter().chain(&extra).any(|k: &AdjustmentCertificate| {
                    k.adjustment_set == e.adjustment_set
                });
                if !known {
                    extra.push(e);
                }
            }
        }
        certs.extend(extra);
    }
    if args.classify {
        let xset: NodeSet = xs.iter().collect();
        for c in &mut certs {
            let z = c.adjustment(ci.variables())?;
            for v in pool.difference(&z).iter() {
                let t = NodeSet::singleton(v);
                let class = rules::classify_variable(&ci, &xset, y, &z, &t)?;
                if class.class != VariableClass::Unclassified {
                    c.annotations.push(Annotation {
                        variables: vec![data.columns()[v].clone()],
                        class: class.class,
                        ambiguous: class.ambiguous,
                    });
                }
            }
        }
    }

    let dir = manifest::output_dir(args.out.as_ref())?;
    manifest::write_file(&dir.join("certificates.json"), serde_json::to_string_pretty(&certs)? + "\n")?;
    let summary = summary(args, &data, &policy, &certs, ci.stats().misses);
    manifest::write_file(&dir.join("summary.txt"), &summary)?;
    if args.trace {
        let mut lines = ci.trace_lines().join("\n");
        lines.push('\n');
        manifest::write_file(&dir.join("trace.txt"), lines)?;
    }
    let config = json!({
        "method": method,
        "policy": policy,
        "treatments": args.treatments,
        "outcome": args.outcome,
        "pool": data.columns().iter().enumerate().filter(|(i, _)| pool.contains(*i)).map(|(_, n)| n).collect::<Vec<_>>(),
        "all": args.all,
        "max_cond_size": args.max_cond_size,
        "expand": args.expand,
        "classify": args.classify,
    });
    let mut m = RunManifest::new(argv, config, args.seed);
    m.add_input(&args.data, &data_bytes);
    m.add_input(&args.knowledge, &know_bytes);
    m.write(&dir)?;
    print!("{summary}");
    Ok(())
}

fn summary(
    args: &DiscoverArgs,
    data: &Dataset,
    policy: &ThresholdPolicy,
    certs: &[AdjustmentCertificate],
    tests: u64,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method: {}", args.method);
    let _ = writeln!(s, "policy: {policy}");
    let _ = writeln!(s, "treatments: {}", args.treatments.join(" "));
    let _ = writeln!(s, "outcome: {}", args.outcome);
    let _ = writeln!(s, "rows: {}", data.n_rows());
    let _ = writeln!(s, "ci tests: {tests}");
    let _ = writeln!(s, "adjustment sets found: {}", certs.len());
    for c in certs {
        let _ = writeln!(s, "  {{{}}} via {}", c.adjustment_set.join(", "), c.rule.name());
        for a in &c.annotations {
            let class = match a.class {
                VariableClass::Precision => "precision",
                VariableClass::Overadjustment => "overadjustment",
                VariableClass::Unclassified => "unclassified",
            };
            let flag = if a.ambiguous { " (ambiguous)" } else { "" };
            let _ = writeln!(s, "    {}: {class}{flag}", a.variables.join(", "));
        }
    }
    s
}
