//! Structured pass/fail output shared by every check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A located failure inside a [`CheckReport`]. Indices refer to the row and
/// column order of the matrix or node set under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    SelfLoop { node: usize, count: usize },
    ParallelEdges { i: usize, j: usize, count: usize },
    PositiveOffDiagonal { i: usize, j: usize, value: f64 },
    NonPositiveDiagonal { i: usize, value: f64 },
    MissingEdge { i: usize, j: usize },
    ExtraEdge { i: usize, j: usize, value: f64 },
    /// Conditional (in)dependence disagrees with graph separation.
    Faithfulness {
        i: usize,
        j: usize,
        subset: Vec<usize>,
        partial_correlation: f64,
        separated: bool,
    },
    Deviation { i: usize, j: usize, value: f64, reference: f64, relative: f64 },
    Tolerance { quantity: String, value: f64, limit: f64 },
    Precondition { message: String },
    KernelInvalid { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub violations: Vec<Violation>,
    pub params: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measurements: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
}

impl CheckReport {
    pub fn new(check: impl Into<String>) -> Self {
        CheckReport {
            check: check.into(),
            pass: true,
            violations: Vec::new(),
            params: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            measurements: BTreeMap::new(),
            verdict: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn with_tolerance(mut self, key: &str, value: f64) -> Self {
        self.tolerances.insert(key.to_string(), value);
        self
    }

    pub fn measure(&mut self, key: &str, value: f64) {
        self.measurements.insert(key.to_string(), value);
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    /// Set `pass` from the violation list.
    pub fn finish(mut self) -> Self {
        self.pass = self.violations.is_empty();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_layout() {
        let mut r = CheckReport::new("mtp2")
            .with_param("n", 3)
            .with_tolerance("zero_tol", 1e-8);
        r.push(Violation::PositiveOffDiagonal { i: 0, j: 2, value: 0.5 });
        let r = r.finish();
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["check"], "mtp2");
        assert_eq!(v["pass"], false);
        assert_eq!(v["violations"][0]["kind"], "positive_off_diagonal");
        assert_eq!(v["params"]["n"], 3);
        assert_eq!(v["tolerances"]["zero_tol"], 1e-8);
        assert!(v.get("measurements").is_none());
        let back: CheckReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
