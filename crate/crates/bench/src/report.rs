use rscd_core::metrics::{de_db, ser_db};
use serde::{Deserialize, Serialize};

/// Pass condition for one measured value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Lt(f64),
    Le(f64),
    Gt(f64),
    Ge(f64),
    /// `|value - target| <= tol`
    Within { target: f64, tol: f64 },
}

impl Check {
    pub fn holds(&self, v: f64) -> bool {
        if v.is_nan() {
            return false;
        }
        match *self {
            Check::Lt(l) => v < l,
            Check::Le(l) => v <= l,
            Check::Gt(l) => v > l,
            Check::Ge(l) => v >= l,
            Check::Within { target, tol } => (v - target).abs() <= tol,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Check::Lt(l) => write!(f, "< {l:e}"),
            Check::Le(l) => write!(f, "<= {l:e}"),
            Check::Gt(l) => write!(f, "> {l}"),
            Check::Ge(l) => write!(f, ">= {l}"),
            Check::Within { target, tol } => write!(f, "= {target} ± {tol:e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub value: f64,
    pub check: Check,
    pub passed: bool,
}

impl Measurement {
    pub fn new(name: impl Into<String>, value: f64, check: Check) -> Self {
        Self {
            name: name.into(),
            value,
            check,
            passed: check.holds(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    /// Set when the criterion could not run to completion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CriterionReport {
    pub fn from_measurements(id: u8, title: &str, measurements: Vec<Measurement>) -> Self {
        Self {
            id,
            title: title.to_owned(),
            passed: !measurements.is_empty() && measurements.iter().all(|m| m.passed),
            measurements,
            error: None,
        }
    }

    pub fn failed(id: u8, title: &str, error: String) -> Self {
        Self {
            id,
            title: title.to_owned(),
            passed: false,
            measurements: vec![],
            error: Some(error),
        }
    }

    /// One line: `PASS C5 rectification round trip: name=value (check), ...`.
    pub fn summary(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("{verdict} C{} {}", self.id, self.title);
        if let Some(e) = &self.error {
            s += &format!(": error: {e}");
        }
        for (i, m) in self.measurements.iter().enumerate() {
            s += if i == 0 { ": " } else { ", " };
            s += &format!("{}={:.6e} ({})", m.name, m.value, m.check);
            if !m.passed {
                s += " FAILED";
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub spec_version: String,
    pub config: crate::SuiteConfig,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}
