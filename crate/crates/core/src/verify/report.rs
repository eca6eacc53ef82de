use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// A theoretical value together with the statement it comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub source: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Passed,
    Failed,
    /// A control check that failed, as it should.
    FailedAsExpected,
    /// A control check that passed: the check has no teeth.
    UnexpectedPass,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub citation: String,
    pub measured: BTreeMap<String, f64>,
    pub bound: BTreeMap<String, Bound>,
    /// Worst-case slack of the checked inequality; negative means violated.
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub status: Status,
    pub notes: Vec<String>,
    pub runtime_seconds: f64,
}

impl VerificationReport {
    /// True for genuine failures (including controls that passed).
    pub fn is_failure(&self) -> bool {
        matches!(self.status, Status::Failed | Status::UnexpectedPass)
    }

    pub fn summary_line(&self) -> String {
        let tag = match self.status {
            Status::Passed => "PASS",
            Status::Failed => "FAIL",
            Status::FailedAsExpected => "PASS (control failed as expected)",
            Status::UnexpectedPass => "FAIL (control passed)",
            Status::NotApplicable => "N/A",
        };
        format!("{tag}  {}  margin={:.3e}", self.check, self.margin)
    }
}

pub(crate) struct ReportBuilder {
    check: String,
    citation: String,
    measured: BTreeMap<String, f64>,
    bound: BTreeMap<String, Bound>,
    notes: Vec<String>,
    start: Instant,
    control: bool,
}

impl ReportBuilder {
    pub fn new(check: impl Into<String>, citation: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            citation: citation.into(),
            measured: BTreeMap::new(),
            bound: BTreeMap::new(),
            notes: Vec::new(),
            start: Instant::now(),
            control: false,
        }
    }

    pub fn control(mut self) -> Self {
        self.control = true;
        self
    }

    pub fn measure(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.measured.insert(key.into(), value);
        self
    }

    pub fn bound(&mut self, key: impl Into<String>, value: f64, source: impl Into<String>) -> &mut Self {
        self.bound.insert(key.into(), Bound { value, source: source.into() });
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    /// `passed = margin >= -tolerance`; a NaN margin fails.
    pub fn finish(self, margin: f64, tolerance: f64) -> VerificationReport {
        let passed = margin >= -tolerance;
        let status = match (self.control, passed) {
            (false, true) => Status::Passed,
            (false, false) => Status::Failed,
            (true, false) => Status::FailedAsExpected,
            (true, true) => Status::UnexpectedPass,
        };
        self.build(margin, tolerance, passed, status)
    }

    pub fn not_applicable(mut self, reason: impl Into<String>) -> VerificationReport {
        self.notes.push(reason.into());
        self.build(f64::NAN, 0.0, false, Status::NotApplicable)
    }

    fn build(self, margin: f64, tolerance: f64, passed: bool, status: Status) -> VerificationReport {
        VerificationReport {
            check: self.check,
            citation: self.citation,
            measured: self.measured,
            bound: self.bound,
            margin,
            tolerance,
            passed,
            status,
            notes: self.notes,
            runtime_seconds: self.start.elapsed().as_secs_f64(),
        }
    }
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares fit `y = a + b x`, returned as `(a, b)`.
pub(crate) fn lsq_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let b = lsq_slope(xs, ys);
    let n = xs.len() as f64;
    let a = (ys.iter().sum::<f64>() - b * xs.iter().sum::<f64>()) / n;
    (a, b)
}

/// Observed convergence order between consecutive refinements.
pub(crate) fn orders(h: &[f64], err: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(err.windows(2))
        .map(|(hh, ee)| (ee[0] / ee[1]).ln() / (hh[0] / hh[1]).ln())
        .collect()
}
