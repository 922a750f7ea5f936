//! Scenario files, the builtin registry and the verification battery.
//!
//! A scenario is one JSON document declaring charts, metrics, an optional
//! paracontact structure, an optional immersion with distributions, and
//! optional warped-product, splitting and leaf tests. [`run_scenario`]
//! executes every applicable check and assembles a [`VerificationReport`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::GeometryError;
use crate::expr::ScalarExpr;
use crate::linalg::Mat;
use crate::manifold::{
    christoffel, metric_compatibility_residual, random_vector_field, torsion_residual, Chart,
    Interval, MetricField, SampleBox, Signature, TensorField, VectorField,
};
use crate::paracontact::{
    check_almost_paracontact_metric, classify_structure, ParacontactStructure,
};
use crate::report::{
    run_checks, Check, CheckResult, SamplePoints, VerificationReport, VerifyConfig,
};
use crate::submanifold::{
    build_point_frame, check_distributions, check_fundamental_identities, classify_submanifold,
    classify_umbilic, distribution_integrability, submanifold_property_checks,
    warped_shape_criterion, DistributionSpec, Immersion, Orientation, UmbilicClass, WarpClaim,
};
use crate::warped::{
    build_doubly_warped_metric, build_warped_metric, detect_warped_splitting, factor_leaves,
    forced_constant_warp, project_samples, verify_doubly_formula, verify_warped_connection,
    xi_fiber_component, xi_in_fiber_forcing, Factor, WarpedSpec,
};

/// Caps the worker threads used for sample fan-out.
pub const THREADS_ENV: &str = "PARAVERIFY_THREADS";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}` (see `list`)")]
    Unknown(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario schema error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scenario field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn field_err(field: impl Into<String>, message: impl ToString) -> ScenarioError {
    ScenarioError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDef {
    pub name: String,
    pub coords: Vec<String>,
    /// Open interval per coordinate; `null` bounds are infinite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[Option<f64>; 2]>>,
    #[serde(rename = "box")]
    pub sample_box: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDef {
    pub chart: String,
    /// `[positive, negative]` eigenvalue counts.
    pub signature: [usize; 2],
    /// Row-major expressions.
    pub entries: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDef {
    pub chart: String,
    /// Row-major `φⁱⱼ`.
    pub phi: Vec<String>,
    pub xi: Vec<String>,
    pub eta: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionDef {
    pub source: String,
    pub ambient: String,
    pub components: Vec<String>,
    /// Compare the induced metric with the metric declared on the source chart.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub compare_induced: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpClaimDef {
    /// Fitted warp is reported as a power of this function.
    pub base: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stated: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionDef {
    pub name: String,
    pub invariant: Vec<Vec<String>>,
    pub anti_invariant: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warp_claim: Option<WarpClaimDef>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub informational: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChristoffelEntryDef {
    /// `∇_{∂direction} ∂field` has this `∂component` coefficient.
    pub direction: String,
    pub field: String,
    pub component: String,
    pub value: String,
}

fn default_table_tol() -> f64 {
    1e-9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChristoffelTableDef {
    pub chart: String,
    #[serde(default = "default_table_tol")]
    pub tol: f64,
    /// Entries not listed are expected to vanish.
    pub nonzero: Vec<ChristoffelEntryDef>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedDef {
    pub base: String,
    pub fiber: String,
    pub f1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_factor: Option<Factor>,
    #[serde(default = "yes")]
    pub leaves: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingDef {
    pub name: String,
    pub base: Vec<String>,
    pub fiber: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stated_warp: Option<String>,
    /// Factor that should contain `ξ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Factor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafDef {
    pub name: String,
    pub chart: String,
    pub free: Vec<String>,
    /// Accepted umbilicity classes.
    pub expect: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// Check groups a scenario may restrict itself to via `checks`.
pub const CHECK_GROUPS: &[&str] = &[
    "metric",
    "christoffel_table",
    "structure",
    "classification",
    "submanifold",
    "identities",
    "distributions",
    "splitting",
    "leaves",
    "warped",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub charts: Vec<ChartDef>,
    pub metrics: Vec<MetricDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub immersion: Option<ImmersionDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distributions: Vec<DistributionDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub christoffel_table: Option<ChristoffelTableDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warped: Option<WarpedDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub splittings: Vec<SplittingDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leaves: Vec<LeafDef>,
    /// Check groups to run; empty means all applicable.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingDef>,
    /// Verdict key → expected value.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expected: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

const BUILTINS: &[(&str, &str)] = &[
    ("example21", include_str!("../scenarios/example21.json")),
    (
        "example21_flat",
        include_str!("../scenarios/example21_flat.json"),
    ),
    ("example51", include_str!("../scenarios/example51.json")),
    (
        "synthetic_warped",
        include_str!("../scenarios/synthetic_warped.json"),
    ),
    (
        "synthetic_doubly",
        include_str!("../scenarios/synthetic_doubly.json"),
    ),
    (
        "synthetic_bxf",
        include_str!("../scenarios/synthetic_bxf.json"),
    ),
    ("xi_normal", include_str!("../scenarios/xi_normal.json")),
];

/// `(name, description)` of every builtin scenario.
pub fn list_scenarios() -> Vec<(String, String)> {
    BUILTINS
        .iter()
        .map(|(name, _)| {
            let sc = builtin(name).expect("builtin scenarios parse");
            (sc.name, sc.description)
        })
        .collect()
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    let (_, text) = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::Unknown(name.to_string()))?;
    parse_scenario(text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let sc: Scenario = serde_json::from_str(text)?;
    Compiled::new(&sc)?;
    Ok(sc)
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

/// Builtin name or path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<Scenario, ScenarioError> {
    match builtin(name_or_path) {
        Err(ScenarioError::Unknown(_)) => {
            let path = Path::new(name_or_path);
            if path.exists() {
                load_scenario_file(path)
            } else {
                Err(ScenarioError::Unknown(name_or_path.to_string()))
            }
        }
        other => other,
    }
}

pub fn export_scenario(sc: &Scenario) -> String {
    let mut s = serde_json::to_string_pretty(sc).expect("scenario serializes");
    s.push('\n');
    s
}

impl Scenario {
    /// Scenario sampling defaults overridden by explicit values.
    pub fn config(
        &self,
        samples: Option<usize>,
        tol: Option<f64>,
        seed: Option<u64>,
    ) -> VerifyConfig {
        let d = VerifyConfig::default();
        let s = self.sampling.clone().unwrap_or_default();
        VerifyConfig {
            samples: samples.or(s.n).unwrap_or(d.samples),
            tol: tol.or(s.tol).unwrap_or(d.tol),
            seed: seed.or(s.seed).unwrap_or(d.seed),
        }
    }

    fn wants(&self, group: &str) -> bool {
        self.checks.is_empty() || self.checks.iter().any(|c| c == group)
    }
}

struct CompiledChart {
    chart: Chart,
    sample_box: SampleBox,
    stream: u64,
}

struct CompiledDistribution {
    spec: DistributionSpec,
    claim: Option<WarpClaim>,
}

struct CompiledTable {
    chart: String,
    tol: f64,
    expected: BTreeMap<(usize, usize, usize), ScalarExpr>,
}

struct CompiledSplitting {
    name: String,
    base: Vec<usize>,
    fiber: Vec<usize>,
    warp: Option<ScalarExpr>,
    stated: Option<(ScalarExpr, String)>,
    xi: Option<Factor>,
}

struct CompiledLeaf {
    name: String,
    chart: String,
    free: Vec<usize>,
    expect: Vec<String>,
}

struct CompiledWarped {
    spec: WarpedSpec,
    sample_box: SampleBox,
    leaves: bool,
}

struct Compiled {
    charts: BTreeMap<String, CompiledChart>,
    metrics: BTreeMap<String, MetricField>,
    structure: Option<ParacontactStructure>,
    immersion: Option<(Immersion, bool)>,
    distributions: Vec<CompiledDistribution>,
    table: Option<CompiledTable>,
    warped: Option<CompiledWarped>,
    splittings: Vec<CompiledSplitting>,
    leaves: Vec<CompiledLeaf>,
}

fn parse_list(
    chart: &Chart,
    items: &[String],
    field: &str,
) -> Result<Vec<ScalarExpr>, ScenarioError> {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| {
            chart
                .parse(s)
                .map_err(|e| field_err(format!("{field}[{i}]"), e))
        })
        .collect()
}

fn expect_len(field: &str, expected: usize, found: usize) -> Result<(), ScenarioError> {
    if expected == found {
        Ok(())
    } else {
        Err(field_err(
            field,
            format!("expected {expected} entries, found {found}"),
        ))
    }
}

impl Compiled {
    fn new(sc: &Scenario) -> Result<Self, ScenarioError> {
        if sc.name.trim().is_empty() {
            return Err(field_err("name", "must not be empty"));
        }
        for (i, c) in sc.checks.iter().enumerate() {
            if !CHECK_GROUPS.contains(&c.as_str()) {
                return Err(field_err(
                    format!("checks[{i}]"),
                    format!("unknown check group `{c}`"),
                ));
            }
        }
        if sc.sampling.is_some() {
            sc.config(None, None, None)
                .validate()
                .map_err(|e| field_err("sampling", e))?;
        }

        let mut charts = BTreeMap::new();
        for (ci, def) in sc.charts.iter().enumerate() {
            let f = format!("charts[{ci}]");
            let mut chart = Chart::new(&def.name, def.coords.clone())
                .map_err(|e| field_err(format!("{f}.coords"), e))?;
            if let Some(dom) = &def.domain {
                expect_len(&format!("{f}.domain"), chart.dim(), dom.len())?;
                let iv = dom
                    .iter()
                    .map(|[lo, hi]| {
                        Interval::new(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
                    })
                    .collect();
                chart = chart
                    .with_domain(iv)
                    .map_err(|e| field_err(format!("{f}.domain"), e))?;
            }
            let sample_box = SampleBox(def.sample_box.clone());
            sample_box
                .validate(&chart)
                .map_err(|e| field_err(format!("{f}.box"), e))?;
            if charts
                .insert(
                    def.name.clone(),
                    CompiledChart {
                        chart,
                        sample_box,
                        stream: 100 * (ci as u64 + 1),
                    },
                )
                .is_some()
            {
                return Err(field_err(
                    format!("{f}.name"),
                    format!("duplicate chart `{}`", def.name),
                ));
            }
        }
        let chart_of = |name: &str, field: &str| -> Result<&CompiledChart, ScenarioError> {
            charts
                .get(name)
                .ok_or_else(|| field_err(field, format!("unknown chart `{name}`")))
        };

        let mut metrics = BTreeMap::new();
        for (mi, def) in sc.metrics.iter().enumerate() {
            let f = format!("metrics[{mi}]");
            let chart = &chart_of(&def.chart, &format!("{f}.chart"))?.chart;
            let n = chart.dim();
            expect_len(&format!("{f}.entries"), n * n, def.entries.len())?;
            let entries = parse_list(chart, &def.entries, &format!("{f}.entries"))?;
            let sig = Signature::new(def.signature[0], def.signature[1]);
            let m = MetricField::from_row_major(n, entries, sig).map_err(|e| field_err(&f, e))?;
            if metrics.insert(def.chart.clone(), m).is_some() {
                return Err(field_err(
                    format!("{f}.chart"),
                    format!("second metric for chart `{}`", def.chart),
                ));
            }
        }
        let metric_of = |chart: &str, field: &str| -> Result<&MetricField, ScenarioError> {
            metrics.get(chart).ok_or_else(|| {
                field_err(field, format!("chart `{chart}` has no entry in `metrics`"))
            })
        };

        let structure = match &sc.structure {
            None => None,
            Some(def) => {
                let chart = &chart_of(&def.chart, "structure.chart")?.chart;
                let n = chart.dim();
                expect_len("structure.phi", n * n, def.phi.len())?;
                expect_len("structure.xi", n, def.xi.len())?;
                expect_len("structure.eta", n, def.eta.len())?;
                let phi = TensorField::new(n, 1, 1, parse_list(chart, &def.phi, "structure.phi")?)?;
                let xi = VectorField::new(parse_list(chart, &def.xi, "structure.xi")?);
                let eta = TensorField::new(n, 0, 1, parse_list(chart, &def.eta, "structure.eta")?)?;
                let g = metric_of(&def.chart, "structure.chart")?.clone();
                Some(
                    ParacontactStructure::new(chart.clone(), phi, xi, eta, g)
                        .map_err(|e| field_err("structure", e))?,
                )
            }
        };

        let immersion = match &sc.immersion {
            None => None,
            Some(def) => {
                let src = chart_of(&def.source, "immersion.source")?.chart.clone();
                let amb = chart_of(&def.ambient, "immersion.ambient")?.chart.clone();
                expect_len("immersion.components", amb.dim(), def.components.len())?;
                let comps = parse_list(&src, &def.components, "immersion.components")?;
                let imm = match &structure {
                    Some(s) if s.chart().name() == amb.name() => {
                        Immersion::into_structure(src, s.clone(), comps)
                    }
                    _ => Immersion::new(
                        src,
                        amb,
                        comps,
                        metric_of(&def.ambient, "immersion.ambient")?.clone(),
                    ),
                }
                .map_err(|e| field_err("immersion", e))?;
                if def.compare_induced {
                    metric_of(&def.source, "immersion.compare_induced")?;
                }
                Some((imm, def.compare_induced))
            }
        };

        let mut distributions = Vec::new();
        for (di, def) in sc.distributions.iter().enumerate() {
            let f = format!("distributions[{di}]");
            let (imm, _) = immersion
                .as_ref()
                .ok_or_else(|| field_err(&f, "distributions need an immersion"))?;
            let src = imm.source();
            let fields =
                |list: &[Vec<String>], sub: &str| -> Result<Vec<VectorField>, ScenarioError> {
                    list.iter()
                        .enumerate()
                        .map(|(k, comps)| {
                            let ff = format!("{f}.{sub}[{k}]");
                            expect_len(&ff, src.dim(), comps.len())?;
                            Ok(VectorField::new(parse_list(src, comps, &ff)?))
                        })
                        .collect()
                };
            let invariant = fields(&def.invariant, "invariant")?;
            let anti_invariant = fields(&def.anti_invariant, "anti_invariant")?;
            let xi = match &def.xi {
                Some(c) => {
                    expect_len(&format!("{f}.xi"), src.dim(), c.len())?;
                    Some(VectorField::new(parse_list(src, c, &format!("{f}.xi"))?))
                }
                None => None,
            };
            let warp = def
                .warp
                .as_ref()
                .map(|w| src.parse(w).map_err(|e| field_err(format!("{f}.warp"), e)))
                .transpose()?;
            let claim = match &def.warp_claim {
                Some(c) => Some(WarpClaim {
                    base: src
                        .parse(&c.base)
                        .map_err(|e| field_err(format!("{f}.warp_claim.base"), e))?,
                    stated: c
                        .stated
                        .as_ref()
                        .map(|s| {
                            src.parse(s)
                                .map_err(|e| field_err(format!("{f}.warp_claim.stated"), e))
                        })
                        .transpose()?,
                    stated_text: c.stated.clone(),
                }),
                None => None,
            };
            distributions.push(CompiledDistribution {
                spec: DistributionSpec {
                    name: def.name.clone(),
                    invariant,
                    anti_invariant,
                    xi,
                    orientation: def.orientation,
                    warp,
                    informational: def.informational,
                },
                claim,
            });
        }

        let table = match &sc.christoffel_table {
            None => None,
            Some(def) => {
                let chart = &chart_of(&def.chart, "christoffel_table.chart")?.chart;
                metric_of(&def.chart, "christoffel_table.chart")?;
                let mut expected = BTreeMap::new();
                for (ei, e) in def.nonzero.iter().enumerate() {
                    let f = format!("christoffel_table.nonzero[{ei}]");
                    let idx = |name: &str, sub: &str| {
                        chart.index_of(name).ok_or_else(|| {
                            field_err(format!("{f}.{sub}"), format!("unknown coordinate `{name}`"))
                        })
                    };
                    let key = (
                        idx(&e.component, "component")?,
                        idx(&e.direction, "direction")?,
                        idx(&e.field, "field")?,
                    );
                    let v = chart
                        .parse(&e.value)
                        .map_err(|err| field_err(format!("{f}.value"), err))?;
                    expected.insert(key, v);
                }
                Some(CompiledTable {
                    chart: def.chart.clone(),
                    tol: def.tol,
                    expected,
                })
            }
        };

        let warped = match &sc.warped {
            None => None,
            Some(def) => {
                let b = chart_of(&def.base, "warped.base")?;
                let fch = chart_of(&def.fiber, "warped.fiber")?;
                let gb = metric_of(&def.base, "warped.base")?.clone();
                let gf = metric_of(&def.fiber, "warped.fiber")?.clone();
                let f1 = b
                    .chart
                    .parse(&def.f1)
                    .map_err(|e| field_err("warped.f1", e))?;
                let spec = match &def.f2 {
                    None => WarpedSpec::warped(b.chart.clone(), gb, fch.chart.clone(), gf, f1),
                    Some(f2) => {
                        let f2 = fch.chart.parse(f2).map_err(|e| field_err("warped.f2", e))?;
                        WarpedSpec::doubly(b.chart.clone(), gb, fch.chart.clone(), gf, f1, f2)
                    }
                }
                .map_err(|e| field_err("warped", e))?;
                let spec = match def.xi_factor {
                    Some(x) => spec.with_xi(x),
                    None => spec,
                };
                spec.product_chart().map_err(|e| field_err("warped", e))?;
                let sample_box = SampleBox(
                    b.sample_box
                        .0
                        .iter()
                        .chain(&fch.sample_box.0)
                        .copied()
                        .collect(),
                );
                Some(CompiledWarped {
                    spec,
                    sample_box,
                    leaves: def.leaves,
                })
            }
        };

        let mut splittings = Vec::new();
        for (si, def) in sc.splittings.iter().enumerate() {
            let f = format!("splittings[{si}]");
            let (imm, _) = immersion
                .as_ref()
                .ok_or_else(|| field_err(&f, "splittings need an immersion"))?;
            let src = imm.source();
            let idx = |names: &[String], sub: &str| -> Result<Vec<usize>, ScenarioError> {
                names
                    .iter()
                    .map(|n| {
                        src.index_of(n).ok_or_else(|| {
                            field_err(format!("{f}.{sub}"), format!("unknown coordinate `{n}`"))
                        })
                    })
                    .collect()
            };
            let base = idx(&def.base, "base")?;
            let fiber = idx(&def.fiber, "fiber")?;
            let mut all: Vec<usize> = base.iter().chain(&fiber).copied().collect();
            all.sort_unstable();
            all.dedup();
            if all.len() != src.dim() || base.len() + fiber.len() != src.dim() {
                return Err(field_err(
                    &f,
                    "base and fiber must partition the source coordinates",
                ));
            }
            let parse = |s: &Option<String>, sub: &str| {
                s.as_ref()
                    .map(|w| src.parse(w).map_err(|e| field_err(format!("{f}.{sub}"), e)))
                    .transpose()
            };
            let warp = parse(&def.warp, "warp")?;
            let stated = parse(&def.stated_warp, "stated_warp")?.zip(def.stated_warp.clone());
            if def.xi.is_some() && imm.structure().is_none() {
                return Err(field_err(format!("{f}.xi"), "needs an ambient structure"));
            }
            splittings.push(CompiledSplitting {
                name: def.name.clone(),
                base,
                fiber,
                warp,
                stated,
                xi: def.xi,
            });
        }

        let mut leaves = Vec::new();
        for (li, def) in sc.leaves.iter().enumerate() {
            let f = format!("leaves[{li}]");
            let chart = &chart_of(&def.chart, &format!("{f}.chart"))?.chart;
            metric_of(&def.chart, &format!("{f}.chart"))?;
            let free = def
                .free
                .iter()
                .map(|n| {
                    chart.index_of(n).ok_or_else(|| {
                        field_err(format!("{f}.free"), format!("unknown coordinate `{n}`"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            for e in &def.expect {
                if !UMBILIC_CLASSES.contains(&e.as_str()) {
                    return Err(field_err(
                        format!("{f}.expect"),
                        format!("unknown class `{e}`"),
                    ));
                }
            }
            leaves.push(CompiledLeaf {
                name: def.name.clone(),
                chart: def.chart.clone(),
                free,
                expect: def.expect.clone(),
            });
        }

        Ok(Self {
            charts,
            metrics,
            structure,
            immersion,
            distributions,
            table,
            warped,
            splittings,
            leaves,
        })
    }

    fn samples(&self, chart: &str, cfg: &VerifyConfig, offset: u64) -> SamplePoints {
        let c = &self.charts[chart];
        SamplePoints::draw(&c.sample_box, cfg, c.stream + offset)
    }
}

const UMBILIC_CLASSES: &[&str] = &[
    "totally_geodesic",
    "totally_umbilical",
    "minimal",
    "quasi_minimal",
    "generic",
];

fn prefixed(results: impl IntoIterator<Item = CheckResult>, prefix: &str) -> Vec<CheckResult> {
    results
        .into_iter()
        .map(|mut c| {
            c.id = format!("{prefix}.{}", c.id);
            c
        })
        .collect()
}

fn error_check(id: &str, e: &GeometryError) -> CheckResult {
    CheckResult::error(id, "evaluation", 0.0, e.to_string())
}

/// Runs `f` on a pool capped by [`THREADS_ENV`] when it is set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok());
    match cap.filter(|&n| n > 0) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Executes the full applicable battery. Configuration and schema problems
/// are returned as errors; numerical degeneracy shows up as `ERROR` checks.
pub fn run_scenario(
    sc: &Scenario,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, ScenarioError> {
    cfg.validate()?;
    let compiled = Compiled::new(sc)?;
    Ok(with_thread_cap(|| execute(sc, &compiled, cfg)))
}

fn execute(sc: &Scenario, cx: &Compiled, cfg: &VerifyConfig) -> VerificationReport {
    let mut rep = VerificationReport::new(&sc.name, *cfg);
    if sc.wants("metric") {
        for (name, g) in &cx.metrics {
            rep.extend(prefixed(
                metric_properties(g, &cx.samples(name, cfg, 0), cfg),
                &format!("metric.{name}"),
            ));
        }
    }
    if let (Some(t), true) = (&cx.table, sc.wants("christoffel_table")) {
        rep.push(christoffel_table_check(
            t,
            &cx.metrics[&t.chart],
            &cx.samples(&t.chart, cfg, 1),
        ));
    }
    if let Some(s) = &cx.structure {
        let samples = cx.samples(s.chart().name(), cfg, 2);
        if sc.wants("structure") {
            rep.extend(prefixed(
                check_almost_paracontact_metric(s, &samples, cfg),
                "structure",
            ));
        }
        if sc.wants("classification") {
            let cl = classify_structure(s, &samples, cfg);
            rep.verdict("structure_class", cl.class.to_string());
            rep.extend(prefixed(cl.checks, "classification"));
        }
    }
    if let Some((imm, compare)) = &cx.immersion {
        run_immersion(sc, cx, imm, *compare, cfg, &mut rep);
    }
    if let (Some(w), true) = (&cx.warped, sc.wants("warped")) {
        run_warped(w, cfg, &mut rep);
    }
    for (k, expected) in &sc.expected {
        let found = rep.verdicts.get(k).cloned();
        let ok = found.as_deref() == Some(expected.as_str());
        let detail = format!(
            "expected {expected}, found {}",
            found.as_deref().unwrap_or("no verdict")
        );
        rep.push(CheckResult::outcome(
            &format!("expected.{k}"),
            "declared verdict",
            ok,
            detail,
        ));
    }
    for n in &sc.notes {
        rep.note(n.clone());
    }
    rep
}

fn metric_properties(
    g: &MetricField,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Vec<CheckResult> {
    let checks = vec![
        Check::new(
            "compatibility",
            "X g(Y,Z) = g(nabla_X Y, Z) + g(Y, nabla_X Z)",
            cfg.tol,
        ),
        Check::new("torsion_free", "nabla_X Y - nabla_Y X = [X,Y]", cfg.tol),
        Check::new("christoffel_symmetric", "Gamma^k_ij = Gamma^k_ji", 1e-12),
    ];
    run_checks(checks, samples, |i, p| {
        let mut rng = samples.rng_for(i);
        let n = g.dim();
        let x = random_vector_field(n, &mut rng);
        let y = random_vector_field(n, &mut rng);
        let z = random_vector_field(n, &mut rng);
        let comp = metric_compatibility_residual(g, &x, &y, &z, p)?;
        let tors = torsion_residual(g, &x, &y, p)?;
        let asym = christoffel(g, p)?.max_asymmetry();
        Ok(vec![vec![comp], tors, vec![asym]])
    })
}

fn christoffel_table_check(
    t: &CompiledTable,
    g: &MetricField,
    samples: &SamplePoints,
) -> CheckResult {
    let check = Check::new(
        "christoffel_table",
        "listed connection coefficients; all others vanish",
        t.tol,
    );
    let n = g.dim();
    let mut r = run_checks(vec![check], samples, |_, p| {
        let gam = christoffel(g, p)?;
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let e = match t.expected.get(&(k, i, j)) {
                        Some(v) => v.eval(p)?,
                        None => 0.0,
                    };
                    out.push(gam.get(k, i, j) - e);
                }
            }
        }
        Ok(vec![out])
    });
    r.remove(0)
        .with_value(t.expected.len() as f64)
        .with_detail(format!(
            "{} nonzero entries of {}",
            t.expected.len(),
            n * n * n
        ))
}

fn run_immersion(
    sc: &Scenario,
    cx: &Compiled,
    imm: &Immersion,
    compare: bool,
    cfg: &VerifyConfig,
    rep: &mut VerificationReport,
) {
    let src = imm.source().name().to_string();
    let samples = cx.samples(&src, cfg, 3);
    if sc.wants("submanifold") {
        if compare {
            rep.push(induced_metric_check(imm, &cx.metrics[&src], &samples));
        }
        rep.extend(prefixed(
            submanifold_property_checks(imm, &samples, cfg),
            "submanifold",
        ));
        let u = classify_umbilic(imm, &samples, cfg, "umbilic");
        rep.verdict("umbilic_class", u.class.to_string());
        rep.extend(u.checks);
    }
    if imm.structure().is_none() {
        return;
    }
    if sc.wants("submanifold") {
        match classify_submanifold(imm, &samples, cfg) {
            Ok(cl) => {
                rep.verdict("submanifold_class", cl.class.to_string());
                rep.verdict("p1_rank", format!("{:.0}", cl.p1_rank));
                rep.extend(prefixed(cl.checks, "pr"));
            }
            Err(e) => rep.push(error_check("pr.classification", &e)),
        }
    }
    if sc.wants("identities") {
        match check_fundamental_identities(imm, &samples, cfg) {
            Ok(rs) => rep.extend(prefixed(rs, "identities")),
            Err(GeometryError::Inapplicable(why)) => {
                rep.note(format!("covariant-derivative identities skipped: {why}"))
            }
            Err(e) => rep.push(error_check("identities", &e)),
        }
    }
    if sc.wants("distributions") {
        for d in &cx.distributions {
            run_distribution(imm, d, &samples, cfg, rep);
        }
    }
    if sc.wants("splitting") {
        for s in &cx.splittings {
            run_splitting(imm, s, &samples, cfg, rep);
        }
    }
    if sc.wants("leaves") {
        for l in &cx.leaves {
            run_leaf(cx, l, cfg, rep);
        }
    }
}

fn induced_metric_check(
    imm: &Immersion,
    declared: &MetricField,
    samples: &SamplePoints,
) -> CheckResult {
    let check = Check::new(
        "induced_metric",
        "g(dOmega e_i, dOmega e_j) equals the declared metric",
        1e-9,
    );
    let mut r = run_checks(vec![check], samples, |_, p| {
        let frame = build_point_frame(imm, p)?;
        Ok(vec![frame
            .induced
            .sub(&declared.value(p)?)
            .as_slice()
            .to_vec()])
    });
    r.remove(0)
}

fn run_distribution(
    imm: &Immersion,
    d: &CompiledDistribution,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
    rep: &mut VerificationReport,
) {
    let advisory = |rs: Vec<CheckResult>| -> Vec<CheckResult> {
        if d.spec.informational {
            rs.into_iter().map(CheckResult::advisory).collect()
        } else {
            rs
        }
    };
    rep.extend(advisory(check_distributions(imm, &d.spec, samples, cfg)));
    rep.extend(advisory(distribution_integrability(
        imm, &d.spec, samples, cfg,
    )));
    if d.spec.orientation.is_none() {
        return;
    }
    match warped_shape_criterion(imm, &d.spec, d.claim.as_ref(), samples, cfg) {
        Ok(w) => {
            if let Some(e) = w.exponent {
                rep.verdict(&format!("{}.warp_exponent", d.spec.name), format!("{e:.6}"));
            }
            if let Some(k) = w.kappa {
                rep.verdict(&format!("{}.leaf_kappa", d.spec.name), format!("{k:.6}"));
            }
            rep.extend(advisory(w.checks));
            for n in w.notes {
                rep.note(n);
            }
        }
        Err(e) => {
            let c = error_check(&format!("{}.warped_criterion", d.spec.name), &e);
            rep.extend(advisory(vec![c]));
        }
    }
}

fn run_splitting(
    imm: &Immersion,
    s: &CompiledSplitting,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
    rep: &mut VerificationReport,
) {
    let metric =
        |p: &[f64]| -> crate::error::Result<Mat> { Ok(build_point_frame(imm, p)?.induced) };
    match detect_warped_splitting(
        &metric,
        &s.base,
        &s.fiber,
        s.warp.as_ref(),
        samples,
        cfg,
        &s.name,
    ) {
        Ok(r) => {
            rep.verdict(
                &format!("{}.split", s.name),
                if r.split { "split" } else { "not_split" },
            );
            let matched = r.checks.iter().all(CheckResult::passed);
            if let (Some(w), true) = (&s.warp, matched) {
                let scale = w.powi(2);
                rep.verdict(
                    &format!("{}.fiber_scale", s.name),
                    scale.display(imm.source().coords()).to_string(),
                );
            }
            rep.extend(r.checks);
        }
        Err(e) => rep.push(error_check(&format!("{}.splitting", s.name), &e)),
    }
    if let Some((stated, text)) = &s.stated {
        let prefix = format!("{}.stated", s.name);
        match detect_warped_splitting(
            &metric,
            &s.base,
            &s.fiber,
            Some(stated),
            samples,
            cfg,
            &prefix,
        ) {
            Ok(r) => {
                let matched = r.checks.iter().all(CheckResult::passed);
                let names = imm.source().coords();
                let fitted = s
                    .warp
                    .as_ref()
                    .map(|w| w.display(names).to_string())
                    .unwrap_or_default();
                rep.note(if matched {
                    format!("{}: stated warping function f = {text} reproduces the fiber scale", s.name)
                } else {
                    format!(
                        "{}: stated warping function f = {text} does not match the fiber scale s = f^2; the fit gives f = {fitted}",
                        s.name
                    )
                });
                rep.extend(r.checks.into_iter().map(CheckResult::advisory));
            }
            Err(e) => rep.push(error_check(&prefix, &e).advisory()),
        }
    }
    let xi = match s.xi {
        Some(Factor::Base) => xi_fiber_component(
            imm,
            &s.fiber,
            samples,
            cfg,
            &format!("{}.xi_on_base", s.name),
        ),
        Some(Factor::Fiber) => xi_in_fiber_forcing(
            imm,
            &s.base,
            samples,
            cfg,
            &format!("{}.xi_forces_constant_warp", s.name),
        ),
        None => return,
    };
    match xi {
        Ok(c) => rep.push(c),
        Err(e) => rep.push(error_check(&format!("{}.xi", s.name), &e)),
    }
}

fn run_leaf(cx: &Compiled, l: &CompiledLeaf, cfg: &VerifyConfig, rep: &mut VerificationReport) {
    let c = &cx.charts[&l.chart];
    let rest: Vec<usize> = (0..c.chart.dim()).filter(|i| !l.free.contains(i)).collect();
    let reference = c.sample_box.center();
    let id = format!("leaf.{}", l.name);
    let leaf = match factor_leaves(&c.chart, &cx.metrics[&l.chart], &l.free, &rest, &reference) {
        Ok((leaf, _)) => leaf,
        Err(e) => return rep.push(error_check(&id, &e)),
    };
    let samples = project_samples(&cx.samples(&l.chart, cfg, 4), &l.free, cfg.seed);
    let u = classify_umbilic(&leaf, &samples, cfg, &id);
    let class = u.class.to_string();
    let ok = l.expect.contains(&class);
    let mut detail = format!("class {class}; accepted: {}", l.expect.join(", "));
    if let UmbilicClass::TotallyUmbilical { .. } = u.class {
        let ls: Vec<String> = u.lambdas.iter().map(|x| format!("{x:.6}")).collect();
        detail.push_str(&format!(
            "; lambda per normal at first sample: [{}]",
            ls.join(", ")
        ));
    }
    rep.verdict(&format!("{id}.class"), class);
    rep.push(CheckResult::outcome(
        &format!("{id}.class"),
        "leaf umbilicity class",
        ok,
        detail,
    ));
    rep.extend(u.checks);
}

fn run_warped(w: &CompiledWarped, cfg: &VerifyConfig, rep: &mut VerificationReport) {
    let spec = &w.spec;
    let samples = SamplePoints::draw(&w.sample_box, cfg, 900);
    let doubly = spec.f2.is_some();
    let metric = if doubly {
        build_doubly_warped_metric(spec)
    } else {
        build_warped_metric(spec)
    };
    let metric = match metric {
        Ok(m) => m,
        Err(e) => return rep.push(error_check("warped.metric", &e)),
    };
    rep.extend(prefixed(
        metric_properties(&metric, &samples, cfg),
        "warped.metric",
    ));
    let connection = if doubly {
        verify_doubly_formula(spec, &samples, cfg)
    } else {
        verify_warped_connection(spec, &samples, cfg)
    };
    match connection {
        Ok(rs) => rep.extend(prefixed(rs, "warped")),
        Err(e) => rep.push(error_check("warped.connection", &e)),
    }
    if spec.xi_factor.is_some() {
        match forced_constant_warp(spec, &samples, cfg) {
            Ok(c) => {
                if let Some(v) = c.value {
                    rep.verdict("warped.xi_warp_derivative", format!("{v:.6}"));
                }
                rep.extend(prefixed([c], "warped"));
            }
            Err(e) => rep.push(error_check("warped.forced_constant_warp", &e)),
        }
    }
    let (nb, n) = (spec.base_dim(), spec.dim());
    let base: Vec<usize> = (0..nb).collect();
    let fiber: Vec<usize> = (nb..n).collect();
    if !doubly {
        let g = |p: &[f64]| metric.value(p);
        match detect_warped_splitting(
            &g,
            &base,
            &fiber,
            Some(&spec.lifted_f1()),
            &samples,
            cfg,
            "warped.splitting",
        ) {
            Ok(r) => {
                rep.verdict("warped.split", if r.split { "split" } else { "not_split" });
                rep.extend(r.checks);
            }
            Err(e) => rep.push(error_check("warped.splitting", &e)),
        }
    }
    if !w.leaves {
        return;
    }
    let chart = match spec.product_chart() {
        Ok(c) => c,
        Err(e) => return rep.push(error_check("warped.leaves", &e)),
    };
    let (bl, fl) = match factor_leaves(&chart, &metric, &base, &fiber, &w.sample_box.center()) {
        Ok(x) => x,
        Err(e) => return rep.push(error_check("warped.leaves", &e)),
    };
    let bu = classify_umbilic(
        &bl,
        &project_samples(&samples, &base, cfg.seed),
        cfg,
        "warped.base_leaf",
    );
    let fu = classify_umbilic(
        &fl,
        &project_samples(&samples, &fiber, cfg.seed),
        cfg,
        "warped.fiber_leaf",
    );
    let base_ok = matches!(bu.class, UmbilicClass::TotallyGeodesic);
    let fiber_ok = matches!(
        fu.class,
        UmbilicClass::TotallyGeodesic | UmbilicClass::TotallyUmbilical { .. }
    );
    // doubly warped bases are umbilical, not geodesic
    let base_ok = base_ok || (doubly && matches!(bu.class, UmbilicClass::TotallyUmbilical { .. }));
    rep.verdict("warped.base_leaf", bu.class.to_string());
    rep.verdict("warped.fiber_leaf", fu.class.to_string());
    rep.push(CheckResult::outcome(
        "warped.base_leaf.class",
        "base leaves totally geodesic",
        base_ok,
        format!("class {}", bu.class),
    ));
    rep.push(CheckResult::outcome(
        "warped.fiber_leaf.class",
        "fiber leaves totally umbilical",
        fiber_ok,
        format!("class {}", fu.class),
    ));
    rep.extend(bu.checks);
    rep.extend(fu.checks);
}
