use adjset::exec::Execution;
use adjset::format::GraphFile;
use adjset::graph::{Dag, DEFAULT_POOL_CAP};
use adjset::nodeset::NodeSet;
use anyhow::{Context, Result};

use crate::manifest;
use crate::{OracleArgs, OracleQuery};

fn render(dag: &Dag, set: &NodeSet) -> String {
    format!("{{{}}}", dag.names_of(set).join(", "))
}

pub fn run(args: &OracleArgs) -> Result<()> {
    let src = args.graph.display().to_string();
    let bytes = manifest::read_input(&args.graph)?;
    let text = String::from_utf8(bytes).with_context(|| format!("{src} is not UTF-8"))?;
    let dag = GraphFile::parse(&text).with_context(|| src.clone())?.dag;
    match &args.query {
        OracleQuery::Dsep { a, b, cond } => {
            let a = dag.set_of(&[a])?;
            let b = dag.set_of(&[b])?;
            let z = dag.set_of(cond)?;
            if dag.d_separated(&a, &b, &z)? {
                println!("separated");
            } else {
                println!("connected");
                if let Some(path) = dag.find_open_path(&a, &b, &z)? {
                    println!("open path: {path}");
                }
            }
        }
        OracleQuery::Adjust { x, y, z } => {
            let ok = dag.is_adjustment_set(&dag.set_of(x)?, &dag.set_of(y)?, &dag.set_of(z)?)?;
            println!("{ok}");
        }
        OracleQuery::Enumerate { x, y, pool } => {
            let xs = dag.set_of(x)?;
            let ys = dag.set_of(y)?;
            let pool = match pool {
                Some(p) => dag.set_of(p)?,
                None => dag.observed().difference(&xs).difference(&ys),
            };
            for s in dag.enumerate_adjustment_sets(&xs, &ys, &pool, DEFAULT_POOL_CAP, Execution::Sequential)? {
                println!("{}", render(&dag, &s));
            }
        }
    }
    Ok(())
}
