//! Catalog of pre-written composite statements for `negation.composite`.
//!
//! Each statement carries a predicate over the view factors. The question
//! asks whether it is false to say the statement; the answer is "no" when
//! the predicate holds on the scene and "yes" otherwise.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metadata::{ViewFactor, ViewFactors};

const DEFAULT_CATALOG: &str = include_str!("../../../../config/composite_catalog.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Gt,
    Ge,
    Lt,
    Le,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Gt => lhs > rhs,
            Comparison::Ge => lhs >= rhs,
            Comparison::Lt => lhs < rhs,
            Comparison::Le => lhs <= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub factor: ViewFactor,
    pub op: Comparison,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    All,
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeStatement {
    pub id: String,
    pub statement: String,
    pub mode: Mode,
    pub conditions: Vec<Condition>,
}

impl CompositeStatement {
    pub fn holds(&self, vf: &ViewFactors) -> bool {
        let mut results = self
            .conditions
            .iter()
            .map(|c| c.op.holds(vf.get(c.factor), c.value));
        match self.mode {
            Mode::All => results.all(|b| b),
            Mode::Any => results.any(|b| b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeCatalog {
    pub version: u32,
    pub statements: Vec<CompositeStatement>,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing catalog: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog is invalid: {0}")]
    Invalid(String),
}

impl CompositeCatalog {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let catalog: CompositeCatalog = serde_json::from_str(text)?;
        catalog.check()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, id: &str) -> Option<&CompositeStatement> {
        self.statements.iter().find(|s| s.id == id)
    }

    fn check(&self) -> Result<(), CatalogError> {
        let mut ids: Vec<&str> = self.statements.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(CatalogError::Invalid("duplicate statement id".into()));
        }
        if let Some(s) = self.statements.iter().find(|s| s.conditions.is_empty()) {
            return Err(CatalogError::Invalid(format!("statement `{}` has no conditions", s.id)));
        }
        Ok(())
    }
}

impl Default for CompositeCatalog {
    fn default() -> Self {
        CompositeCatalog::from_json(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }
}
