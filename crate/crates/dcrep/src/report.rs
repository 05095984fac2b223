//! Verdicts shared by the solvers and classifiers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ColorRep,
    NoColorRep,
    Undetermined,
}

/// Which thresholds a verdict speaks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// h = 0 only.
    ZeroH,
    /// A single given h.
    FixedH,
    /// All sufficiently small h > 0.
    SmallH,
    /// All sufficiently large h.
    LargeH,
    /// Every h.
    AllH,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Name of the check that produced the verdict.
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ClassificationReport {
    pub fn new(verdict: Verdict, regime: Regime, method: impl Into<String>) -> Self {
        ClassificationReport { verdict, regime, h: None, method: method.into(), detail: None }
    }

    pub fn at(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}
