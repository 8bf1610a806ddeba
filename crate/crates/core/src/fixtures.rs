//! Small reference graphs shipped with the crate.
//!
//! Each file under `fixtures/` declares its nodes, latents, tiers and edge
//! weights, so it doubles as a linear-Gaussian model.

use crate::error::Result;
use crate::format::GraphFile;
use crate::sem::SemModel;

/// `(name, file contents)` for every bundled fixture.
pub const ALL: &[(&str, &str)] = &[
    ("confounded_witness", include_str!("../fixtures/confounded_witness.graph")),
    ("precision_and_overadjust", include_str!("../fixtures/precision_and_overadjust.graph")),
    ("two_treatment_build", include_str!("../fixtures/two_treatment_build.graph")),
    ("combine_only", include_str!("../fixtures/combine_only.graph")),
    ("naive_union_fails", include_str!("../fixtures/naive_union_fails.graph")),
];

pub fn text(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a bundled fixture. Panics on an unknown name.
pub fn load(name: &str) -> GraphFile {
    let text = text(name).unwrap_or_else(|| panic!("no fixture named `{name}`"));
    GraphFile::parse(text).expect("bundled fixtures parse")
}

pub fn model(name: &str) -> Result<SemModel> {
    SemModel::from_graph_file(&load(name))
}
