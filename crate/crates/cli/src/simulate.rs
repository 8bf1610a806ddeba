use std::fs::File;
use std::io::BufWriter;

use adjset::bench::{self, ExperimentConfig};
use adjset::exec::Execution;
use anyhow::{Context, Result};

use crate::manifest::{self, RunManifest};
use crate::SimulateArgs;

pub fn run(args: &SimulateArgs, argv: &[String]) -> Result<()> {
    let src = args.config.display().to_string();
    let bytes = manifest::read_input(&args.config)?;
    let text = String::from_utf8(bytes.clone()).with_context(|| format!("{src} is not UTF-8"))?;
    let mut cfg: ExperimentConfig = toml::from_str(&text).with_context(|| src.clone())?;
    if let Some(seed) = args.seed {
        cfg.generator.seed = seed;
    }
    cfg.validate().with_context(|| src.clone())?;

    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let records = bench::run_experiment(&cfg, execution)?;
    let rows = bench::precision(&records);

    let dir = manifest::output_dir(args.out.as_ref())?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = dir.join(name);
        let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(BufWriter::new(f))
    };
    bench::write_records_csv(&records, create("records.csv")?)?;
    bench::write_timings_csv(&records, create("timings.csv")?)?;
    bench::write_report_csv(&rows, create("report.csv")?)?;
    let report = bench::format_report(&rows);
    manifest::write_file(&dir.join("report.txt"), &report)?;

    let mut m = RunManifest::new(argv, serde_json::to_value(&cfg)?, cfg.generator.seed);
    m.add_input(&args.config, &bytes);
    m.write(&dir)?;
    print!("{report}");
    Ok(())
}
