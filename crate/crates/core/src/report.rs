//! Verification configuration, per-check results and report rendering.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::manifold::SampleBox;

pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            tol: DEFAULT_TOL,
            seed: DEFAULT_SEED,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(GeometryError::InvalidConfig(
                "samples must be at least 1".into(),
            ));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(GeometryError::InvalidConfig(format!(
                "tolerance must be a positive finite number, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Seeded sample points plus per-point random streams.
#[derive(Clone, Debug)]
pub struct SamplePoints {
    pub points: Vec<Vec<f64>>,
    seed: u64,
}

impl SamplePoints {
    /// Draws `cfg.samples` points; `stream` separates independent draws
    /// sharing one seed.
    pub fn draw(bx: &SampleBox, cfg: &VerifyConfig, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let points = bx.sample_n(cfg.samples, &mut rng);
        Self {
            points,
            seed: cfg.seed ^ stream.rotate_left(32),
        }
    }

    pub fn from_points(points: Vec<Vec<f64>>, seed: u64) -> Self {
        Self { points, seed }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Independent generator for random vectors at point `i`.
    pub fn rng_for(&self, i: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64 + 1);
        rng
    }

    /// Evaluates `f` at every point in parallel; results keep point order.
    pub fn map<T: Send>(&self, f: impl Fn(usize, &[f64]) -> T + Sync + Send) -> Vec<T> {
        self.points
            .par_iter()
            .enumerate()
            .map(|(i, p)| f(i, p))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Info,
    Error,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Info => "info",
            CheckStatus::Error => "ERROR",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub anchor: String,
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub samples: usize,
    pub status: CheckStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    /// Residual as a plain number; missing residuals count as infinite.
    pub fn residual(&self) -> f64 {
        self.max_residual.unwrap_or(f64::INFINITY)
    }

    pub fn error(id: &str, anchor: &str, tolerance: f64, detail: String) -> Self {
        Self {
            id: id.to_string(),
            anchor: anchor.to_string(),
            max_residual: None,
            tolerance,
            samples: 0,
            status: CheckStatus::Error,
            value: None,
            detail: Some(detail),
        }
    }

    pub fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    /// Turns a gating check into an informational one.
    pub fn informational(mut self) -> Self {
        if matches!(self.status, CheckStatus::Pass | CheckStatus::Fail) {
            self.status = CheckStatus::Info;
        }
        self
    }

    /// Informational regardless of outcome, including evaluation errors.
    pub fn advisory(mut self) -> Self {
        self.status = CheckStatus::Info;
        self
    }

    /// A pass/fail outcome with no residual, e.g. an expected verdict.
    pub fn outcome(id: &str, anchor: &str, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            id: id.to_string(),
            anchor: anchor.to_string(),
            max_residual: None,
            tolerance: 0.0,
            samples: 0,
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            value: None,
            detail: Some(detail.into()),
        }
    }
}

/// Running maximum of a residual over samples.
#[derive(Clone, Debug)]
pub struct Check {
    id: String,
    anchor: String,
    tol: f64,
    informational: bool,
    max: f64,
    samples: usize,
    error: Option<String>,
    value: Option<f64>,
    detail: Option<String>,
}

impl Check {
    pub fn new(id: &str, anchor: &str, tol: f64) -> Self {
        Self {
            id: id.to_string(),
            anchor: anchor.to_string(),
            tol,
            informational: false,
            max: 0.0,
            samples: 0,
            error: None,
            value: None,
            detail: None,
        }
    }

    pub fn info(id: &str, anchor: &str, tol: f64) -> Self {
        Self {
            informational: true,
            ..Self::new(id, anchor, tol)
        }
    }

    pub fn record(&mut self, r: f64) {
        self.samples += 1;
        self.max = if r.is_nan() {
            f64::INFINITY
        } else {
            self.max.max(r.abs())
        };
    }

    pub fn record_all(&mut self, rs: impl IntoIterator<Item = f64>) {
        let mut any = false;
        let mut m: f64 = 0.0;
        for r in rs {
            any = true;
            m = if r.is_nan() {
                f64::INFINITY
            } else {
                m.max(r.abs())
            };
        }
        if any {
            self.record(m);
        } else {
            self.samples += 1;
        }
    }

    pub fn fail_with(&mut self, e: &GeometryError) {
        if self.error.is_none() {
            self.error = Some(e.to_string());
        }
    }

    pub fn set_value(&mut self, v: f64) {
        self.value = Some(v);
    }

    pub fn set_detail(&mut self, d: impl Into<String>) {
        self.detail = Some(d.into());
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn finish(self) -> CheckResult {
        let (status, max_residual, detail) = match self.error {
            Some(e) => (CheckStatus::Error, None, Some(e)),
            None => {
                let st = if self.informational {
                    CheckStatus::Info
                } else if self.max <= self.tol {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                };
                (st, Some(self.max), self.detail)
            }
        };
        CheckResult {
            id: self.id,
            anchor: self.anchor,
            max_residual: max_residual.map(|m| if m.is_finite() { m } else { f64::MAX }),
            tolerance: self.tol,
            samples: self.samples,
            status,
            value: self.value,
            detail,
        }
    }
}

/// Runs several residual families at once: `f` returns, per point, one
/// residual list per entry of `checks`.
pub fn run_checks(
    mut checks: Vec<Check>,
    samples: &SamplePoints,
    f: impl Fn(usize, &[f64]) -> Result<Vec<Vec<f64>>> + Sync + Send,
) -> Vec<CheckResult> {
    let per_point = samples.map(|i, p| f(i, p));
    for r in per_point {
        match r {
            Ok(groups) => {
                debug_assert_eq!(groups.len(), checks.len());
                for (c, g) in checks.iter_mut().zip(groups) {
                    c.record_all(g);
                }
            }
            Err(e) => {
                for c in &mut checks {
                    c.fail_with(&e);
                }
            }
        }
    }
    checks.into_iter().map(Check::finish).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub config: VerifyConfig,
    pub verdicts: BTreeMap<String, String>,
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(scenario: &str, config: VerifyConfig) -> Self {
        Self {
            scenario: scenario.to_string(),
            config,
            verdicts: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
        self.refresh();
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = CheckResult>) {
        self.checks.extend(cs);
        self.refresh();
    }

    pub fn verdict(&mut self, key: &str, value: impl Into<String>) {
        self.verdicts.insert(key.to_string(), value.into());
    }

    pub fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }

    fn refresh(&mut self) {
        self.pass = self
            .checks
            .iter()
            .all(|c| matches!(c.status, CheckStatus::Pass | CheckStatus::Info));
    }

    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn has_errors(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Error)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        let _ = writeln!(
            out,
            "config:   samples={} tol={:e} seed={}",
            self.config.samples, self.config.tol, self.config.seed
        );
        for (k, v) in &self.verdicts {
            let _ = writeln!(out, "verdict:  {k} = {v}");
        }
        let idw = self
            .checks
            .iter()
            .map(|c| c.id.len())
            .max()
            .unwrap_or(2)
            .max(5);
        let _ = writeln!(
            out,
            "\n{:<idw$}  {:<6}  {:>12}  {:>9}  {:>7}  anchor",
            "check", "status", "residual", "tol", "samples"
        );
        for c in &self.checks {
            let res = c
                .max_residual
                .map_or_else(|| "-".to_string(), |r| format!("{r:.3e}"));
            let _ = write!(
                out,
                "{:<idw$}  {:<6}  {:>12}  {:>9.1e}  {:>7}  {}",
                c.id, c.status, res, c.tolerance, c.samples, c.anchor
            );
            if let Some(v) = c.value {
                let _ = write!(out, "  [value {v:.6}]");
            }
            out.push('\n');
            if let Some(d) = &c.detail {
                let _ = writeln!(out, "{:idw$}  {d}", "");
            }
        }
        if !self.notes.is_empty() {
            out.push_str("\nnotes:\n");
            for n in &self.notes {
                let _ = writeln!(out, "  - {n}");
            }
        }
        let _ = writeln!(
            out,
            "\noverall: {}",
            if self.pass { "PASS" } else { "FAIL" }
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_samples_rejected() {
        let cfg = VerifyConfig {
            samples: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(VerifyConfig::default().validate().is_ok());
    }

    #[test]
    fn check_status_and_nan() {
        let mut c = Check::new("a", "x", 1e-8);
        c.record(1e-9);
        assert!(c.clone().finish().passed());
        c.record(f64::NAN);
        let r = c.finish();
        assert_eq!(r.status, CheckStatus::Fail);
        let mut i = Check::info("b", "y", 1e-8);
        i.record(1.0);
        assert_eq!(i.finish().status, CheckStatus::Info);
    }

    #[test]
    fn overall_pass_ignores_info() {
        let mut rep = VerificationReport::new("s", VerifyConfig::default());
        let mut i = Check::info("b", "y", 1e-8);
        i.record(1.0);
        rep.push(i.finish());
        assert!(rep.pass);
        let mut f = Check::new("c", "z", 1e-8);
        f.record(1.0);
        rep.push(f.finish());
        assert!(!rep.pass);
    }

    #[test]
    fn draws_are_deterministic() {
        let bx = SampleBox(vec![[0.0, 1.0], [2.0, 3.0]]);
        let cfg = VerifyConfig::default();
        let a = SamplePoints::draw(&bx, &cfg, 3);
        let b = SamplePoints::draw(&bx, &cfg, 3);
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, SamplePoints::draw(&bx, &cfg, 4).points);
        assert!(a
            .points
            .iter()
            .all(|p| (0.0..=1.0).contains(&p[0]) && (2.0..=3.0).contains(&p[1])));
    }
}
