use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// Worst observed value; `null` when the check could not be evaluated.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.to_string(),
            value: Some(value),
            tolerance,
            pass: value <= tolerance,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = Some(detail.into());
        self
    }

    pub fn errored(name: &str, tolerance: f64, err: &mpray::Error) -> Check {
        Check {
            name: name.to_string(),
            value: None,
            tolerance,
            pass: false,
            detail: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    /// Command-specific results.
    pub outputs: Value,
    pub pass: bool,
    /// Absent (`null`) in deterministic mode.
    pub wall_time_seconds: Option<f64>,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }
}
