use std::fmt;

use serde::{Deserialize, Serialize};

/// Outcome of a validator: pass, or the first violated check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Name of the violated clause or check, e.g. `"iv"` or `"spectrum"`.
    pub clause: String,
    /// Step index n (number of vectors in the partial sequence).
    pub n: usize,
    /// 1-based eigenvalue index, when the violation is entrywise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub detail: String,
}

impl ValidationReport {
    pub fn pass() -> Self {
        ValidationReport {
            passed: true,
            violation: None,
        }
    }

    pub fn fail(clause: &str, n: usize, m: Option<usize>, detail: impl Into<String>) -> Self {
        ValidationReport {
            passed: false,
            violation: Some(Violation {
                clause: clause.to_string(),
                n,
                m,
                detail: detail.into(),
            }),
        }
    }

    pub fn clause(&self) -> Option<&str> {
        self.violation.as_ref().map(|v| v.clause.as_str())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => write!(f, "pass"),
            Some(v) => {
                write!(f, "fail: clause {} at n={}", v.clause, v.n)?;
                if let Some(m) = v.m {
                    write!(f, ", m={m}")?;
                }
                write!(f, " ({})", v.detail)
            }
        }
    }
}
