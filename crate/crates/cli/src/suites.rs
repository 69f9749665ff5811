//! Experiment configs shipped with the binary.

use std::fs;
use std::io;
use std::path::Path;

use crate::config::{ExperimentConfig, ParseError};

/// A named config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suite {
    pub name: String,
    pub text: String,
}

impl Suite {
    pub fn parse(&self) -> Result<ExperimentConfig, ParseError> {
        ExperimentConfig::parse(&self.text, &self.name)
    }

    /// The `description` entry, or an empty string.
    pub fn description(&self) -> String {
        self.text
            .lines()
            .filter_map(|l| l.trim().strip_prefix("description"))
            .filter_map(|rest| rest.trim_start().strip_prefix('='))
            .map(|d| d.split('#').next().unwrap_or("").trim().to_string())
            .next()
            .unwrap_or_default()
    }
}

const BUNDLED: [(&str, &str); 6] = [
    ("laplacian_ball", include_str!("../suites/laplacian_ball.cfg")),
    ("pucci_ball", include_str!("../suites/pucci_ball.cfg")),
    ("sharp_p2", include_str!("../suites/sharp_p2.cfg")),
    ("singular_p_half", include_str!("../suites/singular_p_half.cfg")),
    ("abp_sweep", include_str!("../suites/abp_sweep.cfg")),
    ("barrier_sweep", include_str!("../suites/barrier_sweep.cfg")),
];

pub fn bundled() -> Vec<Suite> {
    BUNDLED
        .iter()
        .map(|(name, text)| Suite {
            name: name.to_string(),
            text: text.to_string(),
        })
        .collect()
}

/// The `*.cfg` files of a directory, sorted by name.
pub fn from_dir(dir: &Path) -> io::Result<Vec<Suite>> {
    let mut suites = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("cfg") {
            continue;
        }
        let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        suites.push(Suite {
            name: name.to_string(),
            text: fs::read_to_string(&path)?,
        });
    }
    suites.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(suites)
}

pub fn find(name: &str) -> Option<Suite> {
    bundled().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_suite_parses_and_is_described() {
        for s in bundled() {
            let cfg = s.parse().unwrap_or_else(|e| panic!("{}: {e}", s.name));
            assert_eq!(cfg.name, s.name);
            assert!(!s.description().is_empty(), "{}", s.name);
        }
    }
}
