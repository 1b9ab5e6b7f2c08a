//! Query paths committed under `fixtures/`, so reports are reproducible.

use crate::error::{Error, Result};
use crate::timegrid_paths::{io::parse_path, Path};

pub const FIXTURE_IDS: &[&str] = &["constant", "ramp", "step", "sine"];

fn source(id: &str) -> Option<&'static str> {
    Some(match id {
        "constant" => include_str!("../../fixtures/constant.path"),
        "ramp" => include_str!("../../fixtures/ramp.path"),
        "step" => include_str!("../../fixtures/step.path"),
        "sine" => include_str!("../../fixtures/sine.path"),
        _ => return None,
    })
}

pub fn fixture(id: &str) -> Result<Path> {
    let text = source(id).ok_or_else(|| Error::config("fixture", format!("unknown fixture `{id}`; known: {FIXTURE_IDS:?}")))?;
    parse_path(text)
}

pub fn all_fixtures() -> Vec<(&'static str, Path)> {
    FIXTURE_IDS.iter().map(|&id| (id, fixture(id).unwrap())).collect()
}
