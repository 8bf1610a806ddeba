//! Plain-text edge-list format.
//!
//! ```text
//! # nodes: W Z X Y U
//! # latent: U
//! # tiers: [W Z] [X] [Y]
//! # variance: X=1 Y=0.5
//! U -> X
//! X -> Y weight=0.8
//! ```
//!
//! Every directive is optional. `# nodes:` fixes the node order (otherwise
//! nodes are numbered by first appearance) and a bare identifier on its own
//! line declares an isolated node. Other `#` lines are comments.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{Dag, TierKnowledge};

#[derive(Clone, Debug, PartialEq)]
pub struct GraphFile {
    pub dag: Dag,
    pub tiers: Option<TierKnowledge>,
    /// Edge coefficients keyed by `(parent, child)`.
    pub weights: HashMap<(usize, usize), f64>,
    pub variances: HashMap<usize, f64>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn check_ident(tok: &str, line: usize) -> Result<()> {
    if tok.is_empty()
        || tok
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '[' | ']' | '=' | '#' | ',' | '{' | '}'))
        || tok.contains("->")
    {
        return Err(parse_err(line, format!("invalid node identifier `{tok}`")));
    }
    Ok(())
}

/// Parses `[A B] [C] [D E]` into named tiers.
pub fn parse_tier_list(spec: &str, line: usize) -> Result<Vec<Vec<String>>> {
    let mut tiers = Vec::new();
    let mut rest = spec.trim();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('[')
            .ok_or_else(|| parse_err(line, "expected `[` to open a tier"))?;
        let close = body
            .find(']')
            .ok_or_else(|| parse_err(line, "unterminated tier, missing `]`"))?;
        let tier: Vec<String> = body[..close].split_whitespace().map(str::to_string).collect();
        for t in &tier {
            check_ident(t, line)?;
        }
        tiers.push(tier);
        rest = body[close + 1..].trim_start();
    }
    Ok(tiers)
}

/// Extracts the tier list from a knowledge document: the first line of the
/// form `tiers: [..] ..` or `# tiers: [..] ..`.
pub fn parse_tiers_document(text: &str) -> Result<Vec<Vec<String>>> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let line = line.strip_prefix('#').map(str::trim_start).unwrap_or(line);
        if let Some(spec) = line.strip_prefix("tiers:") {
            return parse_tier_list(spec, i + 1);
        }
    }
    Err(parse_err(0, "no `tiers:` line found"))
}

pub fn parse_graph(text: &str) -> Result<GraphFile> {
    let mut order: Option<(usize, Vec<String>)> = None;
    let mut latent: Vec<(usize, String)> = Vec::new();
    let mut tiers: Option<(usize, Vec<Vec<String>>)> = None;
    let mut variances: Vec<(usize, String, f64)> = Vec::new();
    let mut edges: Vec<(usize, String, String, Option<f64>)> = Vec::new();
    let mut bare: Vec<(usize, String)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("nodes:") {
                if order.is_some() {
                    return Err(parse_err(lineno, "repeated `# nodes:` directive"));
                }
                let names: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
                for n in &names {
                    check_ident(n, lineno)?;
                }
                order = Some((lineno, names));
            } else if let Some(rest) = comment.strip_prefix("latent:") {
                for n in rest.split_whitespace() {
                    check_ident(n, lineno)?;
                    latent.push((lineno, n.to_string()));
                }
            } else if let Some(rest) = comment.strip_prefix("tiers:") {
                if tiers.is_some() {
                    return Err(parse_err(lineno, "repeated `# tiers:` directive"));
                }
                tiers = Some((lineno, parse_tier_list(rest, lineno)?));
            } else if let Some(rest) = comment.strip_prefix("variance:") {
                for entry in rest.split_whitespace() {
                    let (name, value) = entry
                        .split_once('=')
                        .ok_or_else(|| parse_err(lineno, format!("expected NAME=VALUE, got `{entry}`")))?;
                    check_ident(name, lineno)?;
                    let v: f64 = value
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("invalid variance `{value}`")))?;
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(parse_err(lineno, format!("variance must be positive, got {v}")));
                    }
                    variances.push((lineno, name.to_string(), v));
                }
            }
            continue;
        }
        if let Some((lhs, rhs)) = line.split_once("->") {
            let parent = lhs.trim();
            let mut parts = rhs.split_whitespace();
            let child = parts
                .next()
                .ok_or_else(|| parse_err(lineno, "missing child after `->`"))?;
            check_ident(parent, lineno)?;
            check_ident(child, lineno)?;
            let mut weight = None;
            for attr in parts {
                let value = attr
                    .strip_prefix("weight=")
                    .ok_or_else(|| parse_err(lineno, format!("unknown edge attribute `{attr}`")))?;
                let w: f64 = value
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("invalid weight `{value}`")))?;
                if !w.is_finite() {
                    return Err(parse_err(lineno, format!("invalid weight `{value}`")));
                }
                weight = Some(w);
            }
            edges.push((lineno, parent.to_string(), child.to_string(), weight));
            continue;
        }
        check_ident(line, lineno)?;
        bare.push((lineno, line.to_string()));
    }

    let mut b = Dag::builder();
    let declared = order.is_some();
    if let Some((lineno, names)) = &order {
        for n in names {
            if b.contains(n) {
                return Err(parse_err(*lineno, format!("node `{n}` declared twice")));
            }
            b.node(n);
        }
    }
    let known = |b: &mut crate::graph::DagBuilder, name: &str, lineno: usize| -> Result<usize> {
        if declared && !b.contains(name) {
            return Err(parse_err(lineno, format!("node `{name}` missing from `# nodes:`")));
        }
        Ok(b.node(name))
    };
    for (lineno, n) in &bare {
        known(&mut b, n, *lineno)?;
    }
    let mut weights = HashMap::new();
    for (lineno, p, c, w) in &edges {
        let pi = known(&mut b, p, *lineno)?;
        let ci = known(&mut b, c, *lineno)?;
        b.edge(p, c).map_err(|e| parse_err(*lineno, e.to_string()))?;
        if let Some(w) = w {
            weights.insert((pi, ci), *w);
        }
    }
    for (lineno, n) in &latent {
        known(&mut b, n, *lineno)?;
        b.latent(n);
    }
    let dag = b.build()?;

    let tiers = match tiers {
        Some((lineno, named)) => Some(
            TierKnowledge::from_names(&named, |n| dag.index_of(n))
                .map_err(|e| parse_err(lineno, e.to_string()))?,
        ),
        None => None,
    };
    let mut var_map = HashMap::new();
    for (lineno, n, v) in variances {
        let i = dag.index_of(&n).map_err(|e| parse_err(lineno, e.to_string()))?;
        var_map.insert(i, v);
    }
    Ok(GraphFile {
        dag,
        tiers,
        weights,
        variances: var_map,
    })
}

impl GraphFile {
    pub fn from_dag(dag: Dag) -> Self {
        Self {
            dag,
            tiers: None,
            weights: HashMap::new(),
            variances: HashMap::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_graph(text)
    }

    /// Canonical text form; parsing it yields an equal `GraphFile`.
    pub fn serialize(&self) -> String {
        let dag = &self.dag;
        let mut out = String::new();
        let _ = writeln!(out, "# nodes: {}", dag.names().join(" "));
        let latent = dag.latent();
        if !latent.is_empty() {
            let _ = writeln!(out, "# latent: {}", dag.names_of(&latent).join(" "));
        }
        if let Some(tiers) = &self.tiers {
            let rendered: Vec<String> = tiers
                .tiers()
                .iter()
                .map(|t| format!("[{}]", dag.names_of(t).join(" ")))
                .collect();
            let _ = writeln!(out, "# tiers: {}", rendered.join(" "));
        }
        if !self.variances.is_empty() {
            let mut entries: Vec<_> = self.variances.iter().collect();
            entries.sort_by_key(|(i, _)| **i);
            let rendered: Vec<String> = entries
                .into_iter()
                .map(|(i, v)| format!("{}={v}", dag.name(*i)))
                .collect();
            let _ = writeln!(out, "# variance: {}", rendered.join(" "));
        }
        for (p, c) in dag.edges() {
            match self.weights.get(&(p, c)) {
                Some(w) => {
                    let _ = writeln!(out, "{} -> {} weight={w}", dag.name(p), dag.name(c));
                }
                None => {
                    let _ = writeln!(out, "{} -> {}", dag.name(p), dag.name(c));
                }
            }
        }
        out
    }
}
