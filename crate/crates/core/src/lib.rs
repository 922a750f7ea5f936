//! Numerical verification of almost paracontact metric geometry.
//!
//! Geometric objects are coordinate expression fields ([`ScalarExpr`]) on
//! charts. Identities are checked pointwise at seeded random samples with
//! exact first and second partials from hyper-dual evaluation.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod expr;
pub mod hyperdual;
pub mod linalg;
pub mod manifold;
pub mod paracontact;
pub mod report;
pub mod scenario;
pub mod submanifold;
pub mod warped;

pub use error::{GeometryError, Result};
pub use expr::{ExprError, Func, Rational, ScalarExpr};
pub use hyperdual::{Dual, HyperDual, Number};
pub use linalg::Mat;
pub use manifold::{
    christoffel, cov_deriv_tensor, cov_deriv_vector, lie_bracket, Chart, ChristoffelAtPoint,
    Interval, MetricField, SampleBox, Signature, TensorField, VectorField,
};
pub use paracontact::{
    check_almost_paracontact_metric, classify_structure, fundamental_two_form,
    ParacontactStructure, StructureClass,
};
pub use report::{CheckResult, CheckStatus, SamplePoints, VerificationReport, VerifyConfig};
pub use scenario::{
    builtin, export_scenario, list_scenarios, load_scenario_file, parse_scenario, resolve_scenario,
    run_scenario, Scenario, ScenarioError,
};
pub use submanifold::{
    classify_submanifold, classify_umbilic, DistributionSpec, Immersion, Orientation,
    SubmanifoldClass, UmbilicClass,
};
pub use warped::{detect_warped_splitting, Factor, WarpedSpec};
