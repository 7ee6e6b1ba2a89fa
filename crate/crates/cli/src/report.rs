use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
}

impl Relation {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
            Relation::Above => value > bound,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
        }
    }
}

/// A measured value against its acceptance bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(value: f64, relation: Relation, bound: f64) -> Self {
        Self {
            value,
            relation,
            bound,
            pass: relation.holds(value, bound),
        }
    }
}

/// Contents of `report.json`. Everything in it is a function of the
/// resolved configuration, so reruns produce identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub passed: bool,
    pub checks: BTreeMap<String, Check>,
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
    pub config: ExperimentConfig,
}

impl Report {
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            passed: true,
            checks: BTreeMap::new(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            config: config.clone(),
        }
    }

    pub fn check(&mut self, name: &str, value: f64, relation: Relation, bound: f64) {
        let c = Check::new(value, relation, bound);
        self.passed &= c.pass;
        self.checks.insert(name.to_string(), c);
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn artifact(&mut self, file: &str) {
        self.artifacts.push(file.to_string());
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        fs::write(&path, self.to_json()?).with_context(|| format!("writing {}", path.display()))
    }
}
