//! Isometric immersions into pseudo-Riemannian manifolds.
//!
//! All quantities are computed at sample points of the source chart. Vector
//! fields along the submanifold live in the source chart and are pushed
//! forward through the Jacobian; ambient extensions are never built. The
//! covariant derivative along the map is
//! `D_i J_j = ∂ᵢ∂ⱼΩ + Γ̃(Ω)(J_i, J_j)`, whose normal part is `h(∂ᵢ, ∂ⱼ)`.
//!
//! Derivatives of frame-dependent operators (`t`, `n`, the tangent
//! projection) along a coordinate direction are obtained by re-running the
//! same linear algebra on [`Dual`] numbers seeded with exact jets of `Ω`,
//! `g` and `φ`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::expr::ScalarExpr;
use crate::hyperdual::Dual;
use crate::linalg::{self, Mat};
use crate::manifold::{lie_bracket, Chart, ChristoffelAtPoint, MetricField, VectorField};
use crate::paracontact::{classify_structure, ParacontactStructure, StructureClass};
use crate::report::{run_checks, Check, CheckResult, SamplePoints, VerifyConfig};

/// Normal candidates with `|g(ζ,ζ)| / |ζ|²` below this are treated as null.
pub const NULL_NORMAL_THRESHOLD: f64 = 1e-10;
/// Normal-projection size below which ξ counts as tangent.
pub const XI_TANGENT_THRESHOLD: f64 = 1e-9;
/// Relative singular-value floor for a full-rank Jacobian.
pub const JACOBIAN_RANK_THRESHOLD: f64 = 1e-10;
/// Smallest `‖tU‖` accepted by the shape-operator fits.
pub const FIT_CONDITION_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Immersion {
    source: Chart,
    ambient: Chart,
    map: Vec<ScalarExpr>,
    metric: MetricField,
    structure: Option<ParacontactStructure>,
}

impl Immersion {
    pub fn new(
        source: Chart,
        ambient: Chart,
        map: Vec<ScalarExpr>,
        metric: MetricField,
    ) -> Result<Self> {
        if map.len() != ambient.dim() {
            return Err(GeometryError::DimensionMismatch {
                what: "immersion components".into(),
                expected: ambient.dim(),
                found: map.len(),
            });
        }
        if metric.dim() != ambient.dim() {
            return Err(GeometryError::DimensionMismatch {
                what: "ambient metric".into(),
                expected: ambient.dim(),
                found: metric.dim(),
            });
        }
        if source.dim() > ambient.dim() {
            return Err(GeometryError::InvalidConfig(format!(
                "source dimension {} exceeds ambient dimension {}",
                source.dim(),
                ambient.dim()
            )));
        }
        if let Some(i) = map
            .iter()
            .flat_map(|c| c.coordinates())
            .find(|&i| i >= source.dim())
        {
            return Err(GeometryError::Expr(
                crate::expr::ExprError::CoordinateOutOfRange {
                    index: i,
                    dim: source.dim(),
                },
            ));
        }
        Ok(Self {
            source,
            ambient,
            map,
            metric,
            structure: None,
        })
    }

    /// Immersion into an almost paracontact metric manifold; the metric is
    /// the structure's.
    pub fn into_structure(
        source: Chart,
        structure: ParacontactStructure,
        map: Vec<ScalarExpr>,
    ) -> Result<Self> {
        let mut imm = Self::new(
            source,
            structure.chart().clone(),
            map,
            structure.metric().clone(),
        )?;
        imm.structure = Some(structure);
        Ok(imm)
    }

    /// `id: M → M`.
    pub fn identity(chart: Chart, metric: MetricField) -> Result<Self> {
        let map = (0..chart.dim()).map(ScalarExpr::coord).collect();
        Self::new(chart.clone(), chart, map, metric)
    }

    pub fn identity_of(structure: ParacontactStructure) -> Result<Self> {
        let chart = structure.chart().clone();
        let map = (0..chart.dim()).map(ScalarExpr::coord).collect();
        Self::into_structure(chart, structure, map)
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }
    pub fn ambient(&self) -> &Chart {
        &self.ambient
    }
    pub fn components(&self) -> &[ScalarExpr] {
        &self.map
    }
    pub fn metric(&self) -> &MetricField {
        &self.metric
    }
    pub fn structure(&self) -> Option<&ParacontactStructure> {
        self.structure.as_ref()
    }
    pub fn dim(&self) -> usize {
        self.source.dim()
    }
    pub fn ambient_dim(&self) -> usize {
        self.ambient.dim()
    }
    pub fn codim(&self) -> usize {
        self.ambient_dim() - self.dim()
    }

    pub fn image(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .map
            .iter()
            .map(|c| c.eval(p))
            .collect::<Result<Vec<_>, _>>()?)
    }

    /// Image points of a sample set, for ambient-side checks.
    pub fn image_samples(&self, samples: &SamplePoints, seed: u64) -> Result<SamplePoints> {
        let pts = samples
            .points
            .iter()
            .map(|p| self.image(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(SamplePoints::from_points(pts, seed))
    }
}

/// Tangent and normal frames at one source point.
#[derive(Clone, Debug)]
pub struct PointFrame {
    pub point: Vec<f64>,
    pub image: Vec<f64>,
    /// `N × m`, column `i` is `dΩ(∂ᵢ)`.
    pub jacobian: Mat,
    /// `hessian[a]` is the `m × m` matrix `∂ᵢ∂ⱼΩᵃ`.
    pub hessian: Vec<Mat>,
    pub ambient_metric: Mat,
    pub ambient_metric_partials: Vec<Mat>,
    pub ambient_christoffel: ChristoffelAtPoint,
    pub induced: Mat,
    pub induced_inv: Mat,
    pub normals: Vec<Vec<f64>>,
    pub normal_gram: Mat,
}

impl PointFrame {
    pub fn dim(&self) -> usize {
        self.jacobian.cols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.jacobian.rows()
    }

    pub fn tangent(&self, i: usize) -> Vec<f64> {
        self.jacobian.column(i)
    }

    pub fn push(&self, coeffs: &[f64]) -> Vec<f64> {
        self.jacobian.mul_vec(coeffs)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.ambient_metric.bilinear(a, b)
    }

    /// Coordinates of the tangential part of an ambient vector.
    pub fn tangent_coeffs(&self, w: &[f64]) -> Vec<f64> {
        let gw = self.ambient_metric.mul_vec(w);
        let rhs = self.jacobian.transpose().mul_vec(&gw);
        self.induced_inv.mul_vec(&rhs)
    }

    pub fn tangent_part(&self, w: &[f64]) -> Vec<f64> {
        self.push(&self.tangent_coeffs(w))
    }

    pub fn normal_part(&self, w: &[f64]) -> Vec<f64> {
        linalg::vsub(w, &self.tangent_part(w))
    }

    /// Coordinates of the normal part in the normal frame.
    pub fn normal_coeffs(&self, w: &[f64]) -> Vec<f64> {
        self.normals
            .iter()
            .enumerate()
            .map(|(a, z)| self.inner(w, z) / self.normal_gram[(a, a)])
            .collect()
    }

    /// `D_i` of an ambient vector field along the map given its value `w`
    /// and coordinate derivative `dw = ∂ᵢ w`.
    pub fn along_derivative(&self, i: usize, w: &[f64], dw: &[f64]) -> Vec<f64> {
        linalg::vadd(dw, &self.ambient_christoffel.contract(&self.tangent(i), w))
    }

    /// Jacobian as dual numbers moving along source coordinate `k`.
    pub fn jacobian_jet(&self, k: usize) -> Mat<Dual> {
        let (n, m) = (self.ambient_dim(), self.dim());
        Mat::from_fn(n, m, |a, i| {
            Dual::new(self.jacobian[(a, i)], self.hessian[a][(i, k)])
        })
    }

    /// An ambient matrix field composed with `Ω`, as duals along coordinate `k`.
    pub fn ambient_jet(&self, value: &Mat, partials: &[Mat], k: usize) -> Mat<Dual> {
        let dq = self.tangent(k);
        Mat::from_fn(value.rows(), value.cols(), |r, c| {
            let eps = partials.iter().zip(&dq).map(|(d, &s)| d[(r, c)] * s).sum();
            Dual::new(value[(r, c)], eps)
        })
    }

    /// `∂ₖ G` computed from `∂g` and `∂²Ω`.
    pub fn induced_partials(&self) -> Vec<Mat> {
        (0..self.dim())
            .map(|k| {
                let j = self.jacobian_jet(k);
                let g = self.ambient_jet(&self.ambient_metric, &self.ambient_metric_partials, k);
                let big_g = j.transpose().mul(&g).mul(&j);
                big_g.map(|d| Dual::constant(d.eps)).re()
            })
            .collect()
    }
}

fn pseudo_gram_schmidt(
    g: &Mat,
    candidates: Vec<Vec<f64>>,
    want: usize,
    p: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let mut pool = candidates;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(want);
    let mut signs: Vec<f64> = Vec::with_capacity(want);
    let orth = |v: &[f64], out: &[Vec<f64>], signs: &[f64]| -> Vec<f64> {
        let mut v = v.to_vec();
        for (z, &s) in out.iter().zip(signs) {
            let c = g.bilinear(&v, z) * s;
            linalg::axpy(-c, z, &mut v);
        }
        v
    };
    let non_null = |v: &[f64]| {
        let n2 = linalg::dot(v, v);
        n2 > 0.0 && g.bilinear(v, v).abs() > NULL_NORMAL_THRESHOLD * n2
    };
    while out.len() < want {
        let reduced: Vec<Vec<f64>> = pool.iter().map(|v| orth(v, &out, &signs)).collect();
        let mut pick = reduced
            .iter()
            .position(|v| non_null(v))
            .map(|i| (i, reduced[i].clone()));
        if pick.is_none() {
            // all remaining candidates null: try pairwise combinations
            'outer: for i in 0..reduced.len() {
                for j in i + 1..reduced.len() {
                    for s in [1.0, -1.0] {
                        let mut v = reduced[i].clone();
                        linalg::axpy(s, &reduced[j], &mut v);
                        if non_null(&v) {
                            pick = Some((i, v));
                            break 'outer;
                        }
                    }
                }
            }
        }
        let (idx, v) =
            pick.ok_or_else(|| GeometryError::DegenerateNormalFrame { point: p.to_vec() })?;
        pool.remove(idx);
        let q = g.bilinear(&v, &v);
        let mut v = linalg::vscale(1.0 / q.abs().sqrt(), &v);
        let scale = linalg::max_abs(&v);
        if let Some(&lead) = v.iter().find(|c| c.abs() > 1e-9 * scale) {
            if lead < 0.0 {
                v = linalg::vscale(-1.0, &v);
            }
        }
        signs.push(q.signum());
        out.push(v);
    }
    Ok(out)
}

pub fn build_point_frame(imm: &Immersion, p: &[f64]) -> Result<PointFrame> {
    imm.source.check_point(p)?;
    let q = imm.image(p)?;
    imm.ambient.check_point(&q)?;
    let (n, m) = (imm.ambient_dim(), imm.dim());

    let mut jacobian = Mat::zeros(n, m);
    let mut hessian = vec![Mat::zeros(m, m); n];
    for (a, comp) in imm.map.iter().enumerate() {
        for i in 0..m {
            for j in 0..m {
                let hd = comp.eval_hyperdual(p, i, j)?;
                if i == j {
                    jacobian[(a, i)] = hd.d1;
                }
                hessian[a][(i, j)] = hd.d12;
            }
        }
    }
    let sv = linalg::singular_values(&jacobian);
    if sv.is_empty() || sv[m - 1] <= JACOBIAN_RANK_THRESHOLD * sv[0].max(1e-300) {
        return Err(GeometryError::RankDeficientJacobian { point: p.to_vec() });
    }

    let g = imm.metric.check_at(&q)?;
    let dg = imm.metric.partials(&q)?;
    let g_inv = g.inverse().map_err(|s| GeometryError::DegenerateMetric {
        point: q.clone(),
        detail: s.to_string(),
    })?;
    let gamma = ChristoffelAtPoint::from_metric_data(&g_inv, &dg);

    let gj = g.mul(&jacobian);
    let induced = jacobian.transpose().mul(&gj);
    let induced_inv = induced
        .inverse()
        .map_err(|_| GeometryError::LightlikeTangent { point: p.to_vec() })?;

    let normals = if n > m {
        let cands = linalg::nullspace(&gj.transpose(), 1e-12);
        if cands.len() != n - m {
            return Err(GeometryError::DegenerateNormalFrame { point: p.to_vec() });
        }
        pseudo_gram_schmidt(&g, cands, n - m, p)?
    } else {
        Vec::new()
    };
    let normal_gram = Mat::from_fn(normals.len(), normals.len(), |a, b| {
        g.bilinear(&normals[a], &normals[b])
    });

    Ok(PointFrame {
        point: p.to_vec(),
        image: q,
        jacobian,
        hessian,
        ambient_metric: g,
        ambient_metric_partials: dg,
        ambient_christoffel: gamma,
        induced,
        induced_inv,
        normals,
        normal_gram,
    })
}

/// Gram matrix `g(dΩ ∂ᵢ, dΩ ∂ⱼ)`.
pub fn induced_metric(imm: &Immersion, p: &[f64]) -> Result<Mat> {
    Ok(build_point_frame(imm, p)?.induced)
}

#[derive(Clone, Debug)]
pub struct SecondFundamentalData {
    /// `h[i][j]` is the ambient normal vector `h(∂ᵢ, ∂ⱼ)`.
    pub h: Vec<Vec<Vec<f64>>>,
    /// Induced connection from the tangential part of the Gauss formula.
    pub christoffel: ChristoffelAtPoint,
    pub mean_curvature: Vec<f64>,
}

impl SecondFundamentalData {
    pub fn compute(frame: &PointFrame) -> Self {
        let m = frame.dim();
        let n = frame.ambient_dim();
        let mut h = vec![vec![Vec::new(); m]; m];
        let mut christoffel = ChristoffelAtPoint::zeros(m);
        for i in 0..m {
            for j in 0..m {
                let d2: Vec<f64> = (0..n).map(|a| frame.hessian[a][(i, j)]).collect();
                let d = linalg::vadd(
                    &d2,
                    &frame
                        .ambient_christoffel
                        .contract(&frame.tangent(i), &frame.tangent(j)),
                );
                let coeffs = frame.tangent_coeffs(&d);
                for (k, c) in coeffs.iter().enumerate() {
                    christoffel.set(k, i, j, *c);
                }
                h[i][j] = linalg::vsub(&d, &frame.push(&coeffs));
            }
        }
        let mut mean_curvature = vec![0.0; n];
        for i in 0..m {
            for j in 0..m {
                linalg::axpy(
                    frame.induced_inv[(i, j)] / m as f64,
                    &h[i][j],
                    &mut mean_curvature,
                );
            }
        }
        Self {
            h,
            christoffel,
            mean_curvature,
        }
    }

    /// `h(X, Y)` for coordinate vectors `x`, `y`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.h[0][0].len();
        let mut out = vec![0.0; n];
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                let c = xi * yj;
                if c != 0.0 {
                    linalg::axpy(c, &self.h[i][j], &mut out);
                }
            }
        }
        out
    }

    /// `[g(h(∂ᵢ,∂ⱼ), ζ)]`.
    pub fn pairing(&self, frame: &PointFrame, zeta: &[f64]) -> Mat {
        let m = frame.dim();
        Mat::from_fn(m, m, |i, j| frame.inner(&self.h[i][j], zeta))
    }

    /// `A_ζ = G⁻¹ [g(h(∂ᵢ,∂ⱼ), ζ)]`; column `i` is `A_ζ ∂ᵢ`.
    pub fn shape_operator(&self, frame: &PointFrame, zeta: &[f64]) -> Mat {
        frame.induced_inv.mul(&self.pairing(frame, zeta))
    }
}

/// `h(X, Y)` at `p` for tangent fields given in source coordinates.
pub fn second_fundamental_form(
    imm: &Immersion,
    x: &VectorField,
    y: &VectorField,
    p: &[f64],
) -> Result<Vec<f64>> {
    let frame = build_point_frame(imm, p)?;
    let sff = SecondFundamentalData::compute(&frame);
    Ok(sff.eval(&x.eval(p)?, &y.eval(p)?))
}

/// `A_ζ` at `p` for an ambient normal vector `ζ`.
pub fn shape_operator(imm: &Immersion, zeta: &[f64], p: &[f64]) -> Result<Mat> {
    let frame = build_point_frame(imm, p)?;
    Ok(SecondFundamentalData::compute(&frame).shape_operator(&frame, zeta))
}

/// Ambient structure tensors and their partials at `Ω(p)`.
#[derive(Clone, Debug)]
pub struct StructureJet {
    pub phi: Mat,
    pub phi_partials: Vec<Mat>,
    pub xi: Vec<f64>,
    pub xi_partials: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
}

impl StructureJet {
    pub fn at(s: &ParacontactStructure, q: &[f64]) -> Result<Self> {
        let n = s.dim();
        let phi = s.phi().eval_matrix(q)?;
        let phi_partials = s
            .phi()
            .partials(q)?
            .into_iter()
            .map(|v| Mat::from_row_major(n, n, v))
            .collect();
        let xi = s.xi().eval(q)?;
        let xi_partials = (0..n)
            .map(|c| {
                s.xi()
                    .components()
                    .iter()
                    .map(|e| e.partial(q, c).map_err(GeometryError::from))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            phi,
            phi_partials,
            xi,
            xi_partials,
            eta: s.eta().eval(q)?,
        })
    }
}

/// `φX = tX + nX` on tangents and `φN = t′N + n′N` on normals, in the point
/// frames (coordinate basis for tangents, normal frame for normals).
#[derive(Clone, Debug, PartialEq)]
pub struct TNDecomposition {
    pub t: Mat,
    pub n: Mat,
    pub t_prime: Mat,
    pub n_prime: Mat,
    pub xi_tangent: Vec<f64>,
    pub xi_normal: Vec<f64>,
    /// `max |φX − tX − nX|` over the frame.
    pub reconstruction: f64,
}

pub fn tn_decompose(frame: &PointFrame, jet: &StructureJet) -> TNDecomposition {
    let (m, k) = (frame.dim(), frame.normals.len());
    let mut t = Mat::zeros(m, m);
    let mut n = Mat::zeros(k, m);
    let mut reconstruction: f64 = 0.0;
    for i in 0..m {
        let w = jet.phi.mul_vec(&frame.tangent(i));
        let tc = frame.tangent_coeffs(&w);
        let nc = frame.normal_coeffs(&w);
        let mut back = frame.push(&tc);
        for (a, c) in nc.iter().enumerate() {
            linalg::axpy(*c, &frame.normals[a], &mut back);
        }
        reconstruction = reconstruction.max(linalg::max_abs(&linalg::vsub(&w, &back)));
        for r in 0..m {
            t[(r, i)] = tc[r];
        }
        for a in 0..k {
            n[(a, i)] = nc[a];
        }
    }
    let mut t_prime = Mat::zeros(m, k);
    let mut n_prime = Mat::zeros(k, k);
    for b in 0..k {
        let w = jet.phi.mul_vec(&frame.normals[b]);
        let tc = frame.tangent_coeffs(&w);
        let nc = frame.normal_coeffs(&w);
        for r in 0..m {
            t_prime[(r, b)] = tc[r];
        }
        for a in 0..k {
            n_prime[(a, b)] = nc[a];
        }
    }
    TNDecomposition {
        t,
        n,
        t_prime,
        n_prime,
        xi_tangent: frame.tangent_coeffs(&jet.xi),
        xi_normal: frame.normal_coeffs(&jet.xi),
        reconstruction,
    }
}

/// Frame, second fundamental form and (when a structure is present) the
/// t/n data at one point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub frame: PointFrame,
    pub sff: SecondFundamentalData,
    pub jet: Option<StructureJet>,
    pub tn: Option<TNDecomposition>,
}

impl PointGeometry {
    pub fn at(imm: &Immersion, p: &[f64]) -> Result<Self> {
        let frame = build_point_frame(imm, p)?;
        let sff = SecondFundamentalData::compute(&frame);
        let (jet, tn) = match &imm.structure {
            Some(s) => {
                let jet = StructureJet::at(s, &frame.image)?;
                let tn = tn_decompose(&frame, &jet);
                (Some(jet), Some(tn))
            }
            None => (None, None),
        };
        Ok(Self {
            frame,
            sff,
            jet,
            tn,
        })
    }

    fn require_tn(&self) -> Result<(&StructureJet, &TNDecomposition)> {
        match (&self.jet, &self.tn) {
            (Some(j), Some(t)) => Ok((j, t)),
            _ => Err(GeometryError::Inapplicable(
                "immersion has no ambient structure".into(),
            )),
        }
    }

    /// `φ(dΩ X)` as an ambient vector.
    pub fn phi_push(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (jet, _) = self.require_tn()?;
        Ok(jet.phi.mul_vec(&self.frame.push(x)))
    }

    /// `n X` as an ambient normal vector.
    pub fn n_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.frame.normal_part(&self.phi_push(x)?))
    }

    /// `t X` in source coordinates.
    pub fn t_of(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, tn) = self.require_tn()?;
        Ok(tn.t.mul_vec(x))
    }

    /// `A_ζ X` in source coordinates.
    pub fn shape(&self, zeta: &[f64], x: &[f64]) -> Vec<f64> {
        self.sff.shape_operator(&self.frame, zeta).mul_vec(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmanifoldClass {
    Invariant,
    AntiInvariant,
    PrSemiInvariant,
    Generic,
    XiNotTangent,
}

impl fmt::Display for SubmanifoldClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubmanifoldClass::Invariant => "invariant",
            SubmanifoldClass::AntiInvariant => "anti_invariant",
            SubmanifoldClass::PrSemiInvariant => "pr_semi_invariant",
            SubmanifoldClass::Generic => "generic",
            SubmanifoldClass::XiNotTangent => "xi_not_tangent",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SubmanifoldClassification {
    pub class: SubmanifoldClass,
    pub checks: Vec<CheckResult>,
    /// Mean of `trace(t²)`, the rank of `P₁`.
    pub p1_rank: f64,
}

fn mat_max(m: &Mat) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        0.0
    } else {
        m.max_abs()
    }
}

/// Invariant / anti-invariant / PR-semi-invariant classification via the
/// `n∘t = 0` criterion, with the projection algebra `P₁ = t²`, `P₂ = Id − t²`.
pub fn classify_submanifold(
    imm: &Immersion,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Result<SubmanifoldClassification> {
    if imm.structure.is_none() {
        return Err(GeometryError::Inapplicable(
            "classification needs an ambient structure".into(),
        ));
    }
    let tol = cfg.tol;
    let checks = vec![
        Check::new(
            "xi_tangent",
            "xi is tangent to M (normal part of xi)",
            XI_TANGENT_THRESHOLD,
        ),
        Check::info("n_norm", "|n| (invariant iff 0)", tol),
        Check::info("t_norm", "|t| (anti-invariant iff 0)", tol),
        Check::info("n_of_t", "n o t = 0 (PR-semi-invariant criterion)", tol),
        Check::new(
            "tn_reconstruction",
            "phi X = tX + nX, phi N = t'N + n'N",
            tol,
        ),
        Check::new("t_skew", "g(X, tY) = -g(tX, Y)", tol),
        Check::new("identity_a", "X - eta(X) xi = t^2 X + t'n X", tol),
        Check::new("p_sum", "P1 + P2 = Id", tol),
        Check::new("p1_idempotent", "P1^2 = P1", tol),
        Check::new("p2_idempotent", "P2^2 = P2", tol),
        Check::new("p1_p2", "P1 P2 = P2 P1 = 0", tol),
        Check::new("t_cubed", "t^3 = t", tol),
        Check::new("n_prime_cubed", "n'^3 = n'", tol),
        Check::new("t_t_prime", "t t' = 0", tol),
        Check::new("t_prime_n_prime", "t' n' = 0", tol),
        Check::new("n_prime_n", "n' n = 0", tol),
    ];
    let traces = std::sync::Mutex::new(Vec::with_capacity(samples.len()));
    let mut results = run_checks(checks, samples, |idx, p| {
        let geo = PointGeometry::at(imm, p)?;
        let (jet, tn) = geo.require_tn()?;
        let f = &geo.frame;
        let m = f.dim();
        let id = Mat::identity(m);
        let t = &tn.t;
        let t2 = t.mul(t);
        let p1 = t2.clone();
        let p2 = id.sub(&t2);

        let gt = f.induced.mul(t);
        let skew = gt.add(&gt.transpose());

        let phi_n_recon: f64 = (0..f.normals.len())
            .map(|b| {
                let w = jet.phi.mul_vec(&f.normals[b]);
                let mut back = f.push(&tn.t_prime.column(b));
                for a in 0..f.normals.len() {
                    linalg::axpy(tn.n_prime[(a, b)], &f.normals[a], &mut back);
                }
                linalg::max_abs(&linalg::vsub(&w, &back))
            })
            .fold(0.0, f64::max);

        // X − η(X)ξ − t²X − t′nX with ξ in tangent coordinates
        let eta_t: Vec<f64> = (0..m)
            .map(|i| linalg::dot(&jet.eta, &f.tangent(i)))
            .collect();
        let mut ident_a = id.sub(&t2).sub(&tn.t_prime.mul(&tn.n));
        for r in 0..m {
            for c in 0..m {
                ident_a[(r, c)] -= tn.xi_tangent[r] * eta_t[c];
            }
        }
        let np = &tn.n_prime;
        traces
            .lock()
            .expect("unpoisoned")
            .push((idx, (0..m).map(|i| t2[(i, i)]).sum::<f64>()));
        Ok(vec![
            tn.xi_normal.clone(),
            vec![mat_max(&tn.n)],
            vec![mat_max(t)],
            vec![mat_max(&tn.n.mul(t))],
            vec![tn.reconstruction, phi_n_recon],
            vec![mat_max(&skew)],
            vec![mat_max(&ident_a)],
            vec![mat_max(&p1.add(&p2).sub(&id))],
            vec![mat_max(&p1.mul(&p1).sub(&p1))],
            vec![mat_max(&p2.mul(&p2).sub(&p2))],
            vec![mat_max(&p1.mul(&p2)), mat_max(&p2.mul(&p1))],
            vec![mat_max(&t2.mul(t).sub(t))],
            vec![mat_max(&np.mul(np).mul(np).sub(np))],
            vec![mat_max(&t.mul(&tn.t_prime))],
            vec![mat_max(&tn.t_prime.mul(np))],
            vec![mat_max(&np.mul(&tn.n))],
        ])
    });
    let res = |id: &str| {
        results
            .iter()
            .find(|c| c.id == id)
            .map_or(f64::INFINITY, |c| c.residual())
    };
    let errored = results
        .iter()
        .any(|c| c.status == crate::report::CheckStatus::Error);
    let class = if errored || res("xi_tangent") > XI_TANGENT_THRESHOLD {
        SubmanifoldClass::XiNotTangent
    } else if res("n_norm") <= tol {
        SubmanifoldClass::Invariant
    } else if res("t_norm") <= tol {
        SubmanifoldClass::AntiInvariant
    } else if res("n_of_t") <= tol {
        SubmanifoldClass::PrSemiInvariant
    } else {
        SubmanifoldClass::Generic
    };
    let pr_like = matches!(
        class,
        SubmanifoldClass::Invariant
            | SubmanifoldClass::AntiInvariant
            | SubmanifoldClass::PrSemiInvariant
    );
    let mut traces = traces.into_inner().expect("unpoisoned");
    traces.sort_by_key(|(i, _)| *i);
    let p1_rank = if traces.is_empty() {
        0.0
    } else {
        traces.iter().map(|(_, v)| v).sum::<f64>() / traces.len() as f64
    };
    for c in results.iter_mut() {
        let pr_only = matches!(
            c.id.as_str(),
            "p_sum"
                | "p1_idempotent"
                | "p2_idempotent"
                | "p1_p2"
                | "t_cubed"
                | "n_prime_cubed"
                | "t_t_prime"
                | "t_prime_n_prime"
                | "n_prime_n"
                | "identity_a"
        );
        let discriminator = c.id == "xi_tangent" && class == SubmanifoldClass::XiNotTangent;
        if (pr_only && !pr_like) || discriminator {
            *c = c.clone().informational();
        }
        if c.id == "p1_idempotent" {
            *c = c.clone().with_value(p1_rank);
        }
        // n∘t = 0 is the defining criterion once the class is decided by it
        if c.id == "n_of_t" && class == SubmanifoldClass::PrSemiInvariant {
            c.status = crate::report::CheckStatus::Pass;
        }
    }
    Ok(SubmanifoldClassification {
        class,
        checks: results,
        p1_rank,
    })
}

/// Solves `G x = b` with duals through the generic LU.
fn dual_tangent_coeffs(j: &Mat<Dual>, g: &Mat<Dual>, w: &[Dual]) -> Result<Vec<Dual>> {
    let big_g = j.transpose().mul(&g.mul(j));
    let rhs = j.transpose().mul_vec(&g.mul_vec(w));
    let lu = big_g
        .lu()
        .map_err(|s| GeometryError::IllConditionedFit(s.to_string()))?;
    Ok(lu.solve_vec(&rhs))
}

/// Jets along coordinate `k` of `t` (coordinate matrix) and of the ambient
/// vectors `n ∂ⱼ`: returns `(∂ₖ t, [∂ₖ (n ∂ⱼ)])`.
fn tn_jets(geo: &PointGeometry, jet: &StructureJet, k: usize) -> Result<(Mat, Vec<Vec<f64>>)> {
    let f = &geo.frame;
    let m = f.dim();
    let j = f.jacobian_jet(k);
    let g = f.ambient_jet(&f.ambient_metric, &f.ambient_metric_partials, k);
    let phi = jet_phi(f, jet, k);
    let phij = phi.mul(&j);
    let mut dt = Mat::zeros(m, m);
    let mut dn = Vec::with_capacity(m);
    for col in 0..m {
        let w = phij.column(col);
        let c = dual_tangent_coeffs(&j, &g, &w)?;
        for r in 0..m {
            dt[(r, col)] = c[r].eps;
        }
        let tan = j.mul_vec(&c);
        dn.push(linalg::vsub(&w, &tan).iter().map(|d| d.eps).collect());
    }
    Ok((dt, dn))
}

fn jet_phi(f: &PointFrame, jet: &StructureJet, k: usize) -> Mat<Dual> {
    f.ambient_jet(&jet.phi, &jet.phi_partials, k)
}

/// Residuals of the covariant-derivative identities for `t` and `n` and of
/// `∇ξ = 0`, `h(·, ξ) = 0` on tangent coordinate fields. Requires a
/// paracosymplectic ambient, checked on the image points.
pub fn check_fundamental_identities(
    imm: &Immersion,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckResult>> {
    let s = imm
        .structure
        .as_ref()
        .ok_or_else(|| GeometryError::Inapplicable("immersion has no ambient structure".into()))?;
    let images = imm.image_samples(samples, cfg.seed)?;
    let amb = classify_structure(s, &images, cfg);
    if amb.class != StructureClass::Paracosymplectic {
        return Err(GeometryError::Inapplicable(format!(
            "ambient structure is {}, not paracosymplectic",
            amb.class
        )));
    }
    let tol = cfg.tol;
    let checks = vec![
        Check::new("nabla_t", "(nabla_X t)Y = A_{nY} X + t'h(X,Y)", tol),
        Check::new("nabla_n", "(nabla_X n)Y = n'h(X,Y) - h(X,tY)", tol),
        Check::new("nabla_xi_induced", "nabla_X xi = 0 on M", tol),
        Check::new("h_xi", "h(X, xi) = 0", tol),
    ];
    Ok(run_checks(checks, samples, |_, p| {
        let geo = PointGeometry::at(imm, p)?;
        let (jet, tn) = geo.require_tn()?;
        let f = &geo.frame;
        let gm = &geo.sff.christoffel;
        let m = f.dim();
        let mut r_t = Vec::new();
        let mut r_n = Vec::new();
        let mut r_xi = Vec::new();
        let mut r_hxi = Vec::new();
        for k in 0..m {
            let (dt, dn) = tn_jets(&geo, jet, k)?;
            let ek = unit(m, k);
            for j in 0..m {
                let ej = unit(m, j);
                let nabla_kj: Vec<f64> = (0..m).map(|i| gm.get(i, k, j)).collect();
                // (∇ₖ t)ⁱⱼ = ∂ₖ tⁱⱼ + Γⁱₖₗ tˡⱼ − Γˡₖⱼ tⁱₗ
                let tj = tn.t.column(j);
                let lhs_t = linalg::vsub(
                    &linalg::vadd(&dt.column(j), &gm.contract(&ek, &tj)),
                    &tn.t.mul_vec(&nabla_kj),
                );
                let nj = geo.n_vector(&ej)?;
                let h_kj = &geo.sff.h[k][j];
                let rhs_t = linalg::vadd(
                    &geo.shape(&nj, &ek),
                    &f.tangent_coeffs(&jet.phi.mul_vec(h_kj)),
                );
                r_t.extend(linalg::vsub(&lhs_t, &rhs_t));

                // ∇⊥ₖ(n∂ⱼ) − n(∇ₖ∂ⱼ)
                let perp = f.normal_part(&f.along_derivative(k, &nj, &dn[j]));
                let lhs_n = linalg::vsub(&perp, &geo.n_vector(&nabla_kj)?);
                let rhs_n = linalg::vsub(
                    &f.normal_part(&jet.phi.mul_vec(h_kj)),
                    &geo.sff.eval(&ek, &tj),
                );
                r_n.extend(f.normal_coeffs(&linalg::vsub(&lhs_n, &rhs_n)));
            }
            // ∇̃_{∂ₖ}ξ along the map, tangential part
            let dxi: Vec<f64> = (0..f.ambient_dim())
                .map(|a| {
                    (0..f.ambient_dim())
                        .map(|c| jet.xi_partials[c][a] * f.jacobian[(c, k)])
                        .sum()
                })
                .collect();
            r_xi.extend(f.tangent_coeffs(&f.along_derivative(k, &jet.xi, &dxi)));
            r_hxi.extend(f.normal_coeffs(&geo.sff.eval(&ek, &tn.xi_tangent)));
        }
        Ok(vec![r_t, r_n, r_xi, r_hxi])
    }))
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[i] = 1.0;
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// `B ×_f F`, invariant factor first, warp on `B`.
    #[serde(rename = "bxf")]
    BxF,
    /// `F ×_f B`, anti-invariant factor first, warp on `F`.
    #[serde(rename = "fxb")]
    FxB,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::BxF => "bxf",
            Orientation::FxB => "fxb",
        })
    }
}

/// Generators of `𝔇`, `𝔇⊥` and `⟨ξ⟩` as source-chart vector fields.
#[derive(Clone, Debug)]
pub struct DistributionSpec {
    pub name: String,
    pub invariant: Vec<VectorField>,
    pub anti_invariant: Vec<VectorField>,
    pub xi: Option<VectorField>,
    pub orientation: Option<Orientation>,
    /// Warping function on the source chart for the warped-product identities.
    pub warp: Option<ScalarExpr>,
    /// All checks reported but none gating.
    pub informational: bool,
}

/// Evaluated `𝔇`, `𝔇⊥` generators and `ξ` at a point.
type Generators = (Vec<Vec<f64>>, Vec<Vec<f64>>, Option<Vec<f64>>);

impl DistributionSpec {
    fn gens(&self, p: &[f64]) -> Result<Generators> {
        let d = self
            .invariant
            .iter()
            .map(|v| v.eval(p))
            .collect::<Result<Vec<_>>>()?;
        let dp = self
            .anti_invariant
            .iter()
            .map(|v| v.eval(p))
            .collect::<Result<Vec<_>>>()?;
        let xi = self.xi.as_ref().map(|v| v.eval(p)).transpose()?;
        Ok((d, dp, xi))
    }

    fn tag(&self, id: &str) -> String {
        format!("{}.{id}", self.name)
    }
}

fn finish_dist(spec: &DistributionSpec, checks: Vec<CheckResult>) -> Vec<CheckResult> {
    if spec.informational {
        checks.into_iter().map(CheckResult::informational).collect()
    } else {
        checks
    }
}

/// Orthogonality, direct-sum, invariance and agreement with `P₁ = t²`.
pub fn check_distributions(
    imm: &Immersion,
    spec: &DistributionSpec,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Vec<CheckResult> {
    let tol = cfg.tol;
    let checks = vec![
        Check::new(
            &spec.tag("orthogonal"),
            "D, D-perp and <xi> pairwise g-orthogonal",
            tol,
        ),
        Check::new(
            &spec.tag("direct_sum"),
            "TM = D + D-perp + <xi> (|det Gram| bounded away from 0)",
            1.0,
        ),
        Check::new(
            &spec.tag("invariant"),
            "phi(D) tangent: n V = 0 for V in D",
            tol,
        ),
        Check::new(
            &spec.tag("anti_invariant"),
            "phi(D-perp) normal: t X = 0 for X in D-perp",
            tol,
        ),
        Check::new(
            &spec.tag("projection"),
            "P1 = t^2 fixes D and kills D-perp and xi",
            tol,
        ),
        Check::new(
            &spec.tag("xi_field"),
            "declared xi equals the tangent part of the ambient xi",
            tol,
        ),
    ];
    let res = run_checks(checks, samples, |_, p| {
        let geo = PointGeometry::at(imm, p)?;
        let (_, tn) = geo.require_tn()?;
        let g = &geo.frame.induced;
        let (d, dp, xi) = spec.gens(p)?;
        let m = geo.frame.dim();
        let mut orth = Vec::new();
        for a in &d {
            for b in &dp {
                orth.push(g.bilinear(a, b));
            }
            if let Some(x) = &xi {
                orth.push(g.bilinear(a, x));
            }
        }
        for b in &dp {
            if let Some(x) = &xi {
                orth.push(g.bilinear(b, x));
            }
        }
        let mut all: Vec<Vec<f64>> = d.iter().chain(&dp).cloned().collect();
        if let Some(x) = &xi {
            all.push(x.clone());
        }
        let direct = if all.len() != m {
            f64::INFINITY
        } else {
            let gram = Mat::from_fn(m, m, |i, j| g.bilinear(&all[i], &all[j]));
            let det = gram.lu().map(|lu| lu.det().abs()).unwrap_or(0.0);
            if det > 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let mut inv = Vec::new();
        let mut proj = Vec::new();
        let p1 = tn.t.mul(&tn.t);
        for v in &d {
            inv.extend(geo.frame.normal_coeffs(&geo.n_vector(v)?));
            proj.extend(linalg::vsub(&p1.mul_vec(v), v));
        }
        let mut anti = Vec::new();
        for x in &dp {
            anti.extend(geo.t_of(x)?);
            proj.extend(p1.mul_vec(x));
        }
        let mut xi_res = Vec::new();
        if let Some(x) = &xi {
            proj.extend(p1.mul_vec(x));
            xi_res.extend(linalg::vsub(x, &tn.xi_tangent));
        }
        Ok(vec![orth, vec![direct], inv, anti, proj, xi_res])
    });
    finish_dist(spec, res)
}

/// `n([V,U]) = 0` for `V, U ∈ 𝔇` and `t([X,Y]) = 0` for `X, Y ∈ 𝔇⊥`.
pub fn distribution_integrability(
    imm: &Immersion,
    spec: &DistributionSpec,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Vec<CheckResult> {
    let checks = vec![
        Check::new(
            &spec.tag("integrable_d"),
            "n([V,U]) = 0 for V, U in D",
            cfg.tol,
        ),
        Check::new(
            &spec.tag("integrable_d_perp"),
            "t([X,Y]) = 0 for X, Y in D-perp",
            cfg.tol,
        ),
    ];
    let res = run_checks(checks, samples, |_, p| {
        let geo = PointGeometry::at(imm, p)?;
        let mut rd = Vec::new();
        for (i, v) in spec.invariant.iter().enumerate() {
            for u in &spec.invariant[i + 1..] {
                let b = lie_bracket(v, u, p)?;
                rd.extend(geo.frame.normal_coeffs(&geo.n_vector(&b)?));
            }
        }
        let mut rp = Vec::new();
        for (i, x) in spec.anti_invariant.iter().enumerate() {
            for y in &spec.anti_invariant[i + 1..] {
                let b = lie_bracket(x, y, p)?;
                rp.extend(geo.t_of(&b)?);
            }
        }
        Ok(vec![rd, rp])
    });
    finish_dist(spec, res)
}

/// Optional warp adjudication: fit `μ = a · ln(base)` and compare with a
/// stated warping function.
#[derive(Clone, Debug)]
pub struct WarpClaim {
    pub base: ScalarExpr,
    pub stated: Option<ScalarExpr>,
    pub stated_text: Option<String>,
}

#[derive(Clone, Debug)]
pub struct WarpedCriterion {
    pub checks: Vec<CheckResult>,
    /// Mean fitted `dμ` per sample, in source coordinates.
    pub grad_mu: Vec<Vec<f64>>,
    /// Fitted exponent `a` in `f = base^a`, when a claim was supplied.
    pub exponent: Option<f64>,
    /// Exponent implied by the stated warp.
    pub stated_exponent: Option<f64>,
    /// Mean fitted `κ` in `𝔥(Z,W) = κ g(Z,W) ∇μ`.
    pub kappa: Option<f64>,
    pub notes: Vec<String>,
}

struct FitRow {
    coeffs: Vec<f64>,
    rhs: f64,
}

/// Least-squares `c` in `a ≈ −c·b` (Euclidean in source coordinates) and the
/// residual `|a + c b|∞`.
fn rank_one_fit(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let bb = linalg::dot(b, b);
    if bb.sqrt() < FIT_CONDITION_THRESHOLD {
        return Err(GeometryError::IllConditionedFit(format!(
            "|b| = {:e}",
            bb.sqrt()
        )));
    }
    let c = -linalg::dot(a, b) / bb;
    let mut r = a.to_vec();
    linalg::axpy(c, b, &mut r);
    Ok((c, linalg::max_abs(&r)))
}

struct WarpPoint {
    groups: Vec<Vec<f64>>,
    grad_mu: Vec<f64>,
    exponent: Option<f64>,
    stated_exponent: Option<f64>,
    kappa: Option<f64>,
}

/// Shape-operator characterizations of PR-semi-invariant warped products.
///
/// For `B ×_f F` the gating identity is `A_{nZ}X = −(tX)(μ) Z`
/// (`X ∈ 𝔇 ⊕ ⟨ξ⟩`, `Z ∈ 𝔇⊥`); for `F ×_f B` it is `A_{nX}U = −X(μ) tU`
/// (`X ∈ 𝔇⊥`, `U ∈ 𝔇`). The per-sample coefficients are collected into a
/// least-squares fit for `dμ`. The identities of the other
/// orientation are reported informationally.
pub fn warped_shape_criterion(
    imm: &Immersion,
    spec: &DistributionSpec,
    claim: Option<&WarpClaim>,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Result<WarpedCriterion> {
    let orientation = spec.orientation.ok_or_else(|| {
        GeometryError::InvalidConfig(format!("distribution `{}` has no orientation", spec.name))
    })?;
    if spec.anti_invariant.is_empty() || spec.invariant.is_empty() {
        return Err(GeometryError::Inapplicable(format!(
            "distribution `{}` needs non-trivial D and D-perp",
            spec.name
        )));
    }
    let tol = cfg.tol;
    let bxf = orientation == Orientation::BxF;
    let ids: Vec<(&str, &str, bool)> = vec![
        (
            "bxf_rank_one",
            "A_{phi Z} X = -(phi X)(mu) Z, X in D + <xi>, Z in D-perp",
            bxf,
        ),
        (
            "fxb_rank_one",
            "A_{phi X} U = -X(mu) phi U, X in D-perp, U in D",
            !bxf,
        ),
        (
            "mu_fit",
            "consistent least-squares d(mu) with V(mu) = 0 on the fiber-side factor",
            true,
        ),
        (
            "leaf_umbilic",
            "leaf second fundamental form h(Z,W) = kappa g(Z,W) grad mu",
            bxf,
        ),
        (
            "warp_exponent",
            "fitted warp exponent constant across samples",
            claim.is_some(),
        ),
        ("xi_log_f", "xi(ln f) = 0", bxf && spec.warp.is_some()),
        ("shape_nz_t_prime", "A_{nZ} X = -t'h(X,Z)", bxf),
        (
            "h_nz_warp",
            "g(h(X,W), nZ) = -tX(ln f) g(Z,W)",
            bxf && spec.warp.is_some(),
        ),
        (
            "shape_nx_u_warp",
            "A_{nX} U = -X(ln f) tU",
            !bxf && spec.warp.is_some(),
        ),
        (
            "shape_ny_x_zero",
            "A_{nY} X = A_{nX} Y = t'h(X,Y) = 0",
            !bxf,
        ),
        ("h_t_symmetric", "h(U,tV) = h(V,tU)", !bxf),
    ];
    let checks: Vec<Check> = ids
        .iter()
        .map(|(id, anchor, gate)| {
            let tag = spec.tag(id);
            if *gate && !spec.informational {
                Check::new(&tag, anchor, tol)
            } else {
                Check::info(&tag, anchor, tol)
            }
        })
        .collect();

    let per_point: Vec<Result<WarpPoint>> =
        samples.map(|_, p| warp_point(imm, spec, claim, bxf, p));
    let mut checks = checks;
    let mut grad_mu = Vec::new();
    let mut exps = Vec::new();
    let mut stated_exps = Vec::new();
    let mut kappas = Vec::new();
    for r in per_point {
        match r {
            Ok(wp) => {
                for (c, g) in checks.iter_mut().zip(wp.groups) {
                    c.record_all(g);
                }
                grad_mu.push(wp.grad_mu);
                exps.extend(wp.exponent);
                stated_exps.extend(wp.stated_exponent);
                kappas.extend(wp.kappa);
            }
            Err(e) => {
                for c in &mut checks {
                    c.fail_with(&e);
                }
            }
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let exponent = mean(&exps);
    let stated_exponent = mean(&stated_exps);
    let kappa = mean(&kappas);
    let mut notes = Vec::new();
    let mut results: Vec<CheckResult> = Vec::new();
    for c in checks {
        let mut r = c.finish();
        if r.id.ends_with("warp_exponent") {
            if let Some(e) = exponent {
                r = r.with_value(e);
            }
        }
        if r.id.ends_with("leaf_umbilic") {
            if let Some(k) = kappa {
                r = r
                    .with_value(k)
                    .with_detail(format!("fitted kappa = {k:.6}"));
            }
        }
        results.push(r);
    }
    if let (Some(e), Some(cl)) = (exponent, claim) {
        let base = cl.base.display(imm.source.coords()).to_string();
        let mut note = format!("{}: fitted warping function f = ({base})^{e:.6}", spec.name);
        if let (Some(se), Some(txt)) = (stated_exponent, &cl.stated_text) {
            if (se - e).abs() > 1e-6 {
                note.push_str(&format!(
                    "; stated warping function f = {txt} (exponent {se:.6}) disagrees with the fit"
                ));
            } else {
                note.push_str(&format!("; agrees with stated f = {txt}"));
            }
        }
        notes.push(note);
    }
    Ok(WarpedCriterion {
        checks: results,
        grad_mu,
        exponent,
        stated_exponent,
        kappa,
        notes,
    })
}

fn warp_point(
    imm: &Immersion,
    spec: &DistributionSpec,
    claim: Option<&WarpClaim>,
    bxf: bool,
    p: &[f64],
) -> Result<WarpPoint> {
    let geo = PointGeometry::at(imm, p)?;
    let f = &geo.frame;
    let m = f.dim();
    let (d, dp, xi) = spec.gens(p)?;
    let g = &f.induced;
    let mut rows: Vec<FitRow> = Vec::new();

    // orientation fits
    let mut r_bxf = Vec::new();
    let mut r_fxb = Vec::new();
    let base_side: Vec<Vec<f64>> = d.iter().cloned().chain(xi.clone()).collect();
    for x in &base_side {
        let tx = geo.t_of(x)?;
        let mut cs = Vec::new();
        for z in &dp {
            let a = geo.shape(&geo.n_vector(z)?, x);
            let (c, r) = rank_one_fit(&a, z)?;
            r_bxf.push(r);
            cs.push(c);
        }
        if bxf {
            let c = cs.iter().sum::<f64>() / cs.len() as f64;
            r_bxf.extend(cs.iter().map(|ci| ci - c));
            rows.push(FitRow { coeffs: tx, rhs: c });
        }
    }
    for x in &dp {
        let nx = geo.n_vector(x)?;
        let mut cs = Vec::new();
        for u in &d {
            let tu = geo.t_of(u)?;
            match rank_one_fit(&geo.shape(&nx, u), &tu) {
                Ok((c, r)) => {
                    r_fxb.push(r);
                    cs.push(c);
                }
                Err(_) if bxf => r_fxb.push(f64::INFINITY),
                Err(e) => return Err(e),
            }
        }
        if !bxf {
            let c = cs.iter().sum::<f64>() / cs.len().max(1) as f64;
            r_fxb.extend(cs.iter().map(|ci| ci - c));
            rows.push(FitRow {
                coeffs: x.clone(),
                rhs: c,
            });
        }
    }
    // V(μ) = 0 on the side the warp does not depend on; ξ(μ) = 0
    let flat_side = if bxf { &dp } else { &d };
    for v in flat_side {
        rows.push(FitRow {
            coeffs: v.clone(),
            rhs: 0.0,
        });
    }
    if let Some(x) = &xi {
        rows.push(FitRow {
            coeffs: x.clone(),
            rhs: 0.0,
        });
    }
    let a = Mat::from_fn(rows.len(), m, |r, c| rows[r].coeffs[c]);
    let b: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
    let dmu = linalg::least_squares(&a, &b)
        .map_err(|s| GeometryError::IllConditionedFit(format!("d(mu) fit: {s}")))?;
    let fit_res = linalg::vsub(&a.mul_vec(&dmu), &b);

    // leaf umbilicity: normal-to-leaf part of ∇_Z W
    let mut r_leaf = Vec::new();
    let mut kappa = None;
    if bxf {
        let grad = f.induced_inv.mul_vec(&dmu);
        let gm = &geo.sff.christoffel;
        let mut pairs = Vec::new();
        for (i, zf) in spec.anti_invariant.iter().enumerate() {
            for wf in &spec.anti_invariant[i..] {
                let z = zf.eval(p)?;
                let w = wf.eval(p)?;
                let dw = wf.derivative_along(p, &z)?;
                let nabla = linalg::vadd(&dw, &gm.contract(&z, &w));
                let leaf = project_out(g, &nabla, &dp);
                let scale = g.bilinear(&z, &w);
                pairs.push((leaf, scale));
            }
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (leaf, s) in &pairs {
            let v = linalg::vscale(*s, &grad);
            num += linalg::dot(leaf, &v);
            den += linalg::dot(&v, &v);
        }
        if den.sqrt() > FIT_CONDITION_THRESHOLD {
            let k = num / den;
            for (leaf, s) in &pairs {
                let mut r = leaf.clone();
                linalg::axpy(-k * s, &grad, &mut r);
                r_leaf.push(linalg::max_abs(&r));
            }
            kappa = Some(k);
        } else {
            // no gradient: leaf must be totally geodesic
            for (leaf, _) in &pairs {
                r_leaf.push(linalg::max_abs(leaf));
            }
        }
    }

    // exponent adjudication
    let (mut exponent, mut stated_exponent) = (None, None);
    let mut r_exp = Vec::new();
    if let Some(cl) = claim {
        let dlb: Vec<f64> = cl.base.gradient(p)?;
        let bval = cl.base.eval(p)?;
        let dlnb = linalg::vscale(1.0 / bval, &dlb);
        let nn = linalg::dot(&dlnb, &dlnb);
        if nn.sqrt() > FIT_CONDITION_THRESHOLD {
            let e = linalg::dot(&dmu, &dlnb) / nn;
            let mut r = dmu.clone();
            linalg::axpy(-e, &dlnb, &mut r);
            r_exp.push(linalg::max_abs(&r));
            exponent = Some(e);
            if let Some(st) = &cl.stated {
                let sval = st.eval(p)?;
                let dls = linalg::vscale(1.0 / sval, &st.gradient(p)?);
                stated_exponent = Some(linalg::dot(&dls, &dlnb) / nn);
            }
        }
    }

    // warped-product identities
    let (mut r_xi_lnf, mut r_anz, mut r_hnz, mut r_anxu, mut r_anyx, mut r_hsym) = (
        Vec::new(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
    );
    let dlnf = match &spec.warp {
        Some(w) => {
            let val = w.eval(p)?;
            if val <= 0.0 {
                return Err(GeometryError::NonPositiveWarp {
                    point: p.to_vec(),
                    value: val,
                });
            }
            Some(linalg::vscale(1.0 / val, &w.gradient(p)?))
        }
        None => None,
    };
    let (jet, _) = geo.require_tn()?;
    let t_prime_of = |v: &[f64]| f.tangent_coeffs(&jet.phi.mul_vec(v));
    if let (Some(dl), Some(x)) = (&dlnf, &xi) {
        r_xi_lnf.push(linalg::dot(dl, x));
    }
    for x in &base_side {
        for z in &dp {
            let nz = geo.n_vector(z)?;
            let lhs = geo.shape(&nz, x);
            let rhs = linalg::vscale(-1.0, &t_prime_of(&geo.sff.eval(x, z)));
            r_anz.extend(linalg::vsub(&lhs, &rhs));
            if let Some(dl) = &dlnf {
                let tx_lnf = linalg::dot(dl, &geo.t_of(x)?);
                for w in &dp {
                    r_hnz.push(f.inner(&geo.sff.eval(x, w), &nz) + tx_lnf * g.bilinear(z, w));
                }
            }
        }
    }
    for x in &dp {
        let nx = geo.n_vector(x)?;
        for u in &d {
            if let Some(dl) = &dlnf {
                let lhs = geo.shape(&nx, u);
                let mut r = lhs;
                linalg::axpy(linalg::dot(dl, x), &geo.t_of(u)?, &mut r);
                r_anxu.extend(r);
            }
        }
        for y in &dp {
            r_anyx.extend(geo.shape(&geo.n_vector(y)?, x));
            r_anyx.extend(t_prime_of(&geo.sff.eval(x, y)));
        }
    }
    for u in &d {
        for v in &d {
            let a = geo.sff.eval(u, &geo.t_of(v)?);
            let b = geo.sff.eval(v, &geo.t_of(u)?);
            r_hsym.extend(f.normal_coeffs(&linalg::vsub(&a, &b)));
        }
    }

    Ok(WarpPoint {
        groups: vec![
            r_bxf, r_fxb, fit_res, r_leaf, r_exp, r_xi_lnf, r_anz, r_hnz, r_anxu, r_anyx, r_hsym,
        ],
        grad_mu: dmu,
        exponent,
        stated_exponent,
        kappa,
    })
}

/// Removes the `g`-orthogonal projection onto `span(basis)`.
fn project_out(g: &Mat, v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    if basis.is_empty() {
        return v.to_vec();
    }
    let k = basis.len();
    let gram = Mat::from_fn(k, k, |i, j| g.bilinear(&basis[i], &basis[j]));
    let rhs: Vec<f64> = basis.iter().map(|b| g.bilinear(b, v)).collect();
    let c = match gram.lu() {
        Ok(lu) => lu.solve_vec(&rhs),
        Err(_) => return vec![f64::NAN; v.len()],
    };
    let mut out = v.to_vec();
    for (ci, b) in c.iter().zip(basis) {
        linalg::axpy(-ci, b, &mut out);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UmbilicClass {
    TotallyGeodesic,
    TotallyUmbilical { lambda: f64 },
    Minimal,
    QuasiMinimal,
    Generic,
}

impl fmt::Display for UmbilicClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UmbilicClass::TotallyGeodesic => f.write_str("totally_geodesic"),
            UmbilicClass::TotallyUmbilical { .. } => f.write_str("totally_umbilical"),
            UmbilicClass::Minimal => f.write_str("minimal"),
            UmbilicClass::QuasiMinimal => f.write_str("quasi_minimal"),
            UmbilicClass::Generic => f.write_str("generic"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct UmbilicClassification {
    pub class: UmbilicClass,
    pub checks: Vec<CheckResult>,
    /// Fitted `λ` per normal frame vector at the first sample; the sign
    /// follows the normal orientation there.
    pub lambdas: Vec<f64>,
}

pub fn classify_umbilic(
    imm: &Immersion,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
    prefix: &str,
) -> UmbilicClassification {
    let tol = cfg.tol;
    let id = |s: &str| {
        if prefix.is_empty() {
            s.to_string()
        } else {
            format!("{prefix}.{s}")
        }
    };
    let checks = vec![
        Check::info(&id("h_norm"), "h = 0 (totally geodesic)", tol),
        Check::info(
            &id("umbilic"),
            "A_zeta = lambda Id for every normal zeta",
            tol,
        ),
        Check::info(&id("mean_curvature"), "H = 0 (minimal)", tol),
        Check::info(
            &id("mean_curvature_null"),
            "g(H,H) = 0 (quasi-minimal)",
            tol,
        ),
    ];
    let lam = std::sync::Mutex::new(Vec::new());
    let res = run_checks(checks, samples, |idx, p| {
        let frame = build_point_frame(imm, p)?;
        let sff = SecondFundamentalData::compute(&frame);
        let m = frame.dim();
        let hmax = sff
            .h
            .iter()
            .flatten()
            .map(|v| linalg::max_abs(v))
            .fold(0.0, f64::max);
        let mut umb = Vec::new();
        let mut ls = Vec::new();
        for z in &frame.normals {
            let a = sff.shape_operator(&frame, z);
            let l = (0..m).map(|i| a[(i, i)]).sum::<f64>() / m as f64;
            umb.push(mat_max(&a.sub(&Mat::identity(m).scale(l))));
            ls.push(l);
        }
        lam.lock().expect("unpoisoned").push((idx, ls));
        let hh = frame.inner(&sff.mean_curvature, &sff.mean_curvature);
        Ok(vec![vec![hmax], umb, sff.mean_curvature.clone(), vec![hh]])
    });
    let lam = lam.into_inner().expect("unpoisoned");
    let lambdas: Vec<f64> = lam
        .into_iter()
        .min_by_key(|(i, _)| *i)
        .map(|(_, l)| l)
        .unwrap_or_default();
    let r = |i: usize| res[i].residual();
    let errored = res
        .iter()
        .any(|c| c.status == crate::report::CheckStatus::Error);
    let class = if errored {
        UmbilicClass::Generic
    } else if r(0) <= tol {
        UmbilicClass::TotallyGeodesic
    } else if r(1) <= tol {
        UmbilicClass::TotallyUmbilical {
            lambda: lambdas.first().copied().unwrap_or(0.0),
        }
    } else if r(2) <= tol {
        UmbilicClass::Minimal
    } else if r(3) <= tol {
        UmbilicClass::QuasiMinimal
    } else {
        UmbilicClass::Generic
    };
    let mut checks = res;
    if let Some(c) = checks.get_mut(1) {
        if !lambdas.is_empty() {
            let txt: Vec<String> = lambdas.iter().map(|l| format!("{l:.6}")).collect();
            c.detail = Some(format!(
                "lambda per normal at first sample: [{}]",
                txt.join(", ")
            ));
        }
    }
    UmbilicClassification {
        class,
        checks,
        lambdas,
    }
}

/// Duality `g(A_ζX,Y) = g(h(X,Y),ζ)`, symmetry of `h`, and agreement of the
/// Gauss-formula connection with the Christoffels of the induced metric.
pub fn submanifold_property_checks(
    imm: &Immersion,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Vec<CheckResult> {
    let tol = cfg.tol;
    let checks = vec![
        Check::new("frame_orthogonal", "g(tangent, normal) = 0", tol),
        Check::new("shape_duality", "g(A_zeta X, Y) = g(h(X,Y), zeta)", tol),
        Check::new("h_symmetric", "h(X,Y) = h(Y,X)", tol),
        Check::new(
            "gauss_consistency",
            "tangential part of D_X Y = induced Levi-Civita nabla_X Y",
            tol,
        ),
    ];
    run_checks(checks, samples, |_, p| {
        let frame = build_point_frame(imm, p)?;
        let sff = SecondFundamentalData::compute(&frame);
        let m = frame.dim();
        let mut orth = Vec::new();
        for i in 0..m {
            for z in &frame.normals {
                orth.push(frame.inner(&frame.tangent(i), z));
            }
        }
        let mut dual = Vec::new();
        for z in &frame.normals {
            let a = sff.shape_operator(&frame, z);
            let ga = frame.induced.mul(&a);
            for i in 0..m {
                for j in 0..m {
                    dual.push(ga[(j, i)] - frame.inner(&sff.h[i][j], z));
                }
            }
        }
        let mut sym = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                sym.extend(linalg::vsub(&sff.h[i][j], &sff.h[j][i]));
            }
        }
        let induced_gamma =
            ChristoffelAtPoint::from_metric_data(&frame.induced_inv, &frame.induced_partials());
        let mut gauss = Vec::new();
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    gauss.push(sff.christoffel.get(k, i, j) - induced_gamma.get(k, i, j));
                }
            }
        }
        Ok(vec![orth, dual, sym, gauss])
    })
}
