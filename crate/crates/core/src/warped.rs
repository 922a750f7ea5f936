//! Warped and doubly warped product metrics on a product chart `B × F`,
//! connection formulas, and detectors for warped splittings of a given
//! metric.
//!
//! Product coordinates are the base coordinates followed by the fiber
//! coordinates; fiber expressions are lifted by shifting their coordinate
//! indices.

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::expr::ScalarExpr;
use crate::linalg::{self, Mat};
use crate::manifold::{christoffel, Chart, Interval, MetricField, Signature};
use crate::report::{run_checks, Check, CheckResult, SamplePoints, VerifyConfig};
use crate::submanifold::{build_point_frame, Immersion};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Base,
    Fiber,
}

#[derive(Clone, Debug)]
pub struct WarpedSpec {
    pub base: Chart,
    pub base_metric: MetricField,
    pub fiber: Chart,
    pub fiber_metric: MetricField,
    /// Warp on the base, multiplying `g_F`.
    pub f1: ScalarExpr,
    /// Warp on the fiber, multiplying `g_B` (doubly warped only).
    pub f2: Option<ScalarExpr>,
    /// Factor carrying `ξ`, if any; `ξ` is the last coordinate field of it.
    pub xi_factor: Option<Factor>,
}

impl WarpedSpec {
    pub fn warped(
        base: Chart,
        base_metric: MetricField,
        fiber: Chart,
        fiber_metric: MetricField,
        f: ScalarExpr,
    ) -> Result<Self> {
        let spec = Self {
            base,
            base_metric,
            fiber,
            fiber_metric,
            f1: f,
            f2: None,
            xi_factor: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn doubly(
        base: Chart,
        base_metric: MetricField,
        fiber: Chart,
        fiber_metric: MetricField,
        f1: ScalarExpr,
        f2: ScalarExpr,
    ) -> Result<Self> {
        let mut spec = Self::warped(base, base_metric, fiber, fiber_metric, f1)?;
        spec.f2 = Some(f2);
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_xi(mut self, factor: Factor) -> Self {
        self.xi_factor = Some(factor);
        self
    }

    fn validate(&self) -> Result<()> {
        let check = |what: &str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(GeometryError::DimensionMismatch {
                    what: what.into(),
                    expected,
                    found,
                })
            }
        };
        check("base metric", self.base.dim(), self.base_metric.dim())?;
        check("fiber metric", self.fiber.dim(), self.fiber_metric.dim())?;
        let out_of = |e: &ScalarExpr, dim: usize| e.coordinates().into_iter().find(|&i| i >= dim);
        if let Some(i) = out_of(&self.f1, self.base.dim()) {
            return Err(GeometryError::InvalidConfig(format!(
                "base warp depends on coordinate {i} outside the base"
            )));
        }
        if let Some(i) = self.f2.as_ref().and_then(|f| out_of(f, self.fiber.dim())) {
            return Err(GeometryError::InvalidConfig(format!(
                "fiber warp depends on coordinate {i} outside the fiber"
            )));
        }
        Ok(())
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber.dim()
    }

    pub fn dim(&self) -> usize {
        self.base_dim() + self.fiber_dim()
    }

    pub fn product_chart(&self) -> Result<Chart> {
        let coords: Vec<String> = self
            .base
            .coords()
            .iter()
            .chain(self.fiber.coords())
            .cloned()
            .collect();
        let domain: Vec<Interval> = self
            .base
            .domain()
            .iter()
            .chain(self.fiber.domain())
            .copied()
            .collect();
        Chart::new(
            &format!("{}x{}", self.base.name(), self.fiber.name()),
            coords,
        )?
        .with_domain(domain)
    }

    pub fn lifted_f1(&self) -> ScalarExpr {
        self.f1.clone()
    }

    pub fn lifted_f2(&self) -> Option<ScalarExpr> {
        self.f2.as_ref().map(|f| f.shift_coords(self.base_dim()))
    }

    fn base_point<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[..self.base_dim()]
    }

    fn fiber_point<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.base_dim()..]
    }

    /// `NonPositiveWarp` at the first sample where a warp is `≤ 0`.
    pub fn check_warps(&self, samples: &SamplePoints) -> Result<()> {
        for p in &samples.points {
            let v = self.f1.eval(self.base_point(p))?;
            if v <= 0.0 || !v.is_finite() {
                return Err(GeometryError::NonPositiveWarp {
                    point: p.clone(),
                    value: v,
                });
            }
            if let Some(f2) = &self.f2 {
                let v = f2.eval(self.fiber_point(p))?;
                if v <= 0.0 || !v.is_finite() {
                    return Err(GeometryError::NonPositiveWarp {
                        point: p.clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    fn signature(&self) -> Signature {
        let (b, f) = (self.base_metric.signature(), self.fiber_metric.signature());
        Signature::new(b.positive + f.positive, b.negative + f.negative)
    }

    fn assemble(
        &self,
        base_warp: Option<&ScalarExpr>,
        fiber_warp: &ScalarExpr,
    ) -> Result<MetricField> {
        let (nb, n) = (self.base_dim(), self.dim());
        let square = |f: &ScalarExpr| (f.as_constant() != Some(1.0)).then(|| f.powi(2));
        let scale = |e: ScalarExpr, s: &Option<ScalarExpr>| match s {
            Some(s) if !e.is_zero() => &e * s,
            _ => e,
        };
        let f1sq = square(fiber_warp);
        let f2sq = base_warp.and_then(square);
        let mut entries = vec![ScalarExpr::zero(); n * n];
        for i in 0..nb {
            for j in 0..nb {
                entries[i * n + j] = scale(self.base_metric.entry(i, j).clone(), &f2sq);
            }
        }
        for i in 0..self.fiber_dim() {
            for j in 0..self.fiber_dim() {
                entries[(nb + i) * n + nb + j] =
                    scale(self.fiber_metric.entry(i, j).shift_coords(nb), &f1sq);
            }
        }
        MetricField::from_row_major(n, entries, self.signature())
    }
}

/// `g = g_B + f² g_F`.
pub fn build_warped_metric(spec: &WarpedSpec) -> Result<MetricField> {
    spec.assemble(None, &spec.lifted_f1())
}

/// `g = f₂² g_B + f₁² g_F`.
pub fn build_doubly_warped_metric(spec: &WarpedSpec) -> Result<MetricField> {
    spec.assemble(spec.lifted_f2().as_ref(), &spec.lifted_f1())
}

fn grad_ln(f: &ScalarExpr, p: &[f64]) -> Result<Vec<f64>> {
    let v = f.eval(p)?;
    if v <= 0.0 {
        return Err(GeometryError::NonPositiveWarp {
            point: p.to_vec(),
            value: v,
        });
    }
    Ok(linalg::vscale(1.0 / v, &f.gradient(p)?))
}

/// Connection of `g_B + f² g_F` on lifted coordinate fields:
/// (1) `∇_X Y` is the lift of `∇ᴮ_X Y`; (2) `∇_X U = ∇_U X = X(ln f) U`;
/// (3) `∇_U V = ∇′_U V − g(U,V) grad(ln f)`.
pub fn verify_warped_connection(
    spec: &WarpedSpec,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckResult>> {
    spec.check_warps(samples)?;
    let metric = build_warped_metric(spec)?;
    let f = spec.lifted_f1();
    let (nb, n) = (spec.base_dim(), spec.dim());
    let tol = cfg.tol;
    let checks = vec![
        Check::new(
            "warped_base_connection",
            "nabla_X Y is the lift of the base connection (no fiber part)",
            tol,
        ),
        Check::new("warped_mixed_connection", "nabla_X U = X(ln f) U", tol),
        Check::new(
            "warped_mixed_symmetric",
            "nabla_X U = nabla_U X",
            tol.min(1e-9),
        ),
        Check::new(
            "warped_fiber_connection",
            "nabla_U V = nabla'_U V - g(U,V) grad(ln f)",
            tol,
        ),
        Check::new(
            "grad_block_equivalence",
            "grad(ln f) from g equals grad from g_B lifted",
            tol,
        ),
    ];
    Ok(run_checks(checks, samples, |_, p| {
        let gam = christoffel(&metric, p)?;
        let gb = christoffel(&spec.base_metric, spec.base_point(p))?;
        let gf = christoffel(&spec.fiber_metric, spec.fiber_point(p))?;
        let g = metric.value(p)?;
        let dlnf = grad_ln(&f, p)?;
        let ginv = g.inverse().map_err(|s| GeometryError::DegenerateMetric {
            point: p.to_vec(),
            detail: s.to_string(),
        })?;
        let grad = ginv.mul_vec(&dlnf);
        let gb_inv = spec
            .base_metric
            .value(spec.base_point(p))?
            .inverse()
            .map_err(|s| GeometryError::DegenerateMetric {
                point: p.to_vec(),
                detail: s.to_string(),
            })?;
        let mut grad_b = gb_inv.mul_vec(&dlnf[..nb]);
        grad_b.resize(n, 0.0);

        let (mut r1, mut r2, mut r2s, mut r3) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for a in 0..nb {
            for b in 0..nb {
                for k in 0..n {
                    let expect = if k < nb { gb.get(k, a, b) } else { 0.0 };
                    r1.push(gam.get(k, a, b) - expect);
                }
            }
            for u in nb..n {
                for k in 0..n {
                    let expect = if k == u { dlnf[a] } else { 0.0 };
                    r2.push(gam.get(k, a, u) - expect);
                    r2s.push(gam.get(k, a, u) - gam.get(k, u, a));
                }
            }
        }
        for u in nb..n {
            for v in nb..n {
                for k in 0..n {
                    let prime = if k >= nb {
                        gf.get(k - nb, u - nb, v - nb)
                    } else {
                        0.0
                    };
                    r3.push(gam.get(k, u, v) - prime + g[(u, v)] * grad[k]);
                }
            }
        }
        Ok(vec![r1, r2, r2s, r3, linalg::vsub(&grad, &grad_b)])
    }))
}

/// `∇_X V = X(ln f₁) V + V(ln f₂) X` for `X` on the base and `V` on the
/// fiber of `f₂² g_B + f₁² g_F`, in both argument orders.
pub fn verify_doubly_formula(
    spec: &WarpedSpec,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckResult>> {
    spec.check_warps(samples)?;
    let metric = build_doubly_warped_metric(spec)?;
    let f1 = spec.lifted_f1();
    let f2 = spec.lifted_f2().unwrap_or_else(ScalarExpr::one);
    let (nb, n) = (spec.base_dim(), spec.dim());
    let tol = cfg.tol;
    let checks = vec![
        Check::new("doubly_formula", "nabla_X V = X(ln f1) V + V(ln f2) X", tol),
        Check::new(
            "doubly_formula_swapped",
            "nabla_V X = X(ln f1) V + V(ln f2) X",
            tol,
        ),
    ];
    Ok(run_checks(checks, samples, |_, p| {
        let gam = christoffel(&metric, p)?;
        let d1 = grad_ln(&f1, p)?;
        let d2 = grad_ln(&f2, p)?;
        let (mut r, mut rs) = (Vec::new(), Vec::new());
        for x in 0..nb {
            for v in nb..n {
                for k in 0..n {
                    let mut e = 0.0;
                    if k == v {
                        e += d1[x];
                    }
                    if k == x {
                        e += d2[v];
                    }
                    r.push(gam.get(k, x, v) - e);
                    rs.push(gam.get(k, v, x) - e);
                }
            }
        }
        Ok(vec![r, rs])
    }))
}

/// If `ξ` lies in one factor of a doubly warped product and is parallel,
/// the warp multiplying that factor must be constant. Reports the fitted
/// coefficient `X(ln f)` in `∇_X ξ = X(ln f) ξ + ξ(ln f') X` for `X` in
/// the other factor; a nonzero value means `∇ξ = 0` is impossible here.
pub fn forced_constant_warp(
    spec: &WarpedSpec,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
) -> Result<CheckResult> {
    let factor = spec.xi_factor.ok_or_else(|| {
        GeometryError::InvalidConfig("forced-constant test needs the factor carrying xi".into())
    })?;
    spec.check_warps(samples)?;
    let metric = build_doubly_warped_metric(spec)?;
    let (nb, n) = (spec.base_dim(), spec.dim());
    let (xi, others): (usize, Vec<usize>) = match factor {
        Factor::Fiber => (n - 1, (0..nb).collect()),
        Factor::Base => (nb - 1, (nb..n).collect()),
    };
    let check = Check::info(
        "forced_constant_warp",
        "nabla xi = 0 with xi in one factor forces the warp on that factor to be constant",
        cfg.tol,
    );
    let mut res = run_checks(vec![check], samples, |_, p| {
        let gam = christoffel(&metric, p)?;
        Ok(vec![others.iter().map(|&x| gam.get(xi, x, xi)).collect()])
    });
    let mut r = res.remove(0);
    let m = r.residual();
    r.value = Some(m);
    r.detail = Some(if m > cfg.tol {
        format!("fitted X(ln f) reaches {m:.3e}: xi cannot be parallel unless the warp is constant")
    } else {
        "fitted X(ln f) = 0: warp constant along the other factor".into()
    });
    Ok(r)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplittingReport {
    pub checks: Vec<CheckResult>,
    /// Fitted fiber scale `s(p)` per sample.
    pub fitted_scale: Vec<f64>,
    pub split: bool,
}

/// Tests whether `G(p)` splits as `G_B(base) ⊕ s(p)·M(fiber)` for the given
/// coordinate partition. `s` is normalized against `candidate²` at the
/// first sample when a candidate warp is given, otherwise to 1 there.
pub fn detect_warped_splitting(
    metric: &(dyn Fn(&[f64]) -> Result<Mat> + Sync),
    base_idx: &[usize],
    fiber_idx: &[usize],
    candidate: Option<&ScalarExpr>,
    samples: &SamplePoints,
    cfg: &VerifyConfig,
    prefix: &str,
) -> Result<SplittingReport> {
    let first = samples
        .points
        .first()
        .ok_or_else(|| GeometryError::InvalidConfig("splitting needs at least one sample".into()))?
        .clone();
    let fiber_block = |g: &Mat| {
        Mat::from_fn(fiber_idx.len(), fiber_idx.len(), |i, j| {
            g[(fiber_idx[i], fiber_idx[j])]
        })
    };
    let base_block = |g: &Mat| {
        Mat::from_fn(base_idx.len(), base_idx.len(), |i, j| {
            g[(base_idx[i], base_idx[j])]
        })
    };
    let with = |p: &[f64], idx: &[usize], from: &[f64]| {
        let mut q = p.to_vec();
        for &i in idx {
            q[i] = from[i];
        }
        q
    };
    let norm0 = match candidate {
        Some(f) => f.eval(&first)?.powi(2),
        None => 1.0,
    };
    if fiber_block(&metric(&first)?).max_abs() < 1e-12 {
        return Err(GeometryError::IllConditionedFit(
            "fiber block vanishes at the reference sample".into(),
        ));
    }
    // projection of the fiber block of `g` onto `m`: `(s, relative residual)`
    let fit = |g: &Mat, m: &Mat| -> (f64, f64) {
        let fb = fiber_block(g);
        let m_sq: f64 = m.as_slice().iter().map(|x| x * x).sum();
        let s = fb
            .as_slice()
            .iter()
            .zip(m.as_slice())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / m_sq.max(1e-300);
        let r = fb.sub(&m.scale(s)).max_abs() / fb.max_abs().max(1e-300);
        (s, r)
    };
    let id = |s: &str| {
        if prefix.is_empty() {
            s.to_string()
        } else {
            format!("{prefix}.{s}")
        }
    };
    let tol = cfg.tol;
    let mut checks = vec![
        Check::new(
            &id("block_orthogonal"),
            "base and fiber blocks g-orthogonal",
            tol,
        ),
        Check::new(
            &id("fiber_factorization"),
            "fiber block = s(p) times a base-independent matrix",
            tol,
        ),
        Check::new(
            &id("scale_base_only"),
            "s depends on base coordinates only",
            tol,
        ),
        Check::new(
            &id("base_block_fiber_independent"),
            "base block independent of fiber coordinates",
            tol,
        ),
    ];
    if candidate.is_some() {
        checks.push(Check::new(
            &id("scale_matches_candidate"),
            "s = f^2 for the candidate warp",
            tol,
        ));
    }
    let scales = std::sync::Mutex::new(Vec::new());
    let checks = run_checks(checks, samples, |i, p| {
        let g = metric(p)?;
        let mut orth = Vec::new();
        for &b in base_idx {
            for &f in fiber_idx {
                orth.push(g[(b, f)]);
            }
        }
        // M(fiber) is the fiber block at the reference base point
        let r = with(p, base_idx, &first);
        let m = fiber_block(&metric(&r)?).scale(1.0 / norm0);
        let (s, fact) = fit(&g, &m);
        // moving the fiber point to the reference must not change s
        let q = with(p, fiber_idx, &first);
        let gq = metric(&q)?;
        let m_ref = fiber_block(&metric(&first)?).scale(1.0 / norm0);
        let (sq, _) = fit(&gq, &m_ref);
        let base_dep = base_block(&g).sub(&base_block(&gq)).max_abs();
        scales.lock().expect("unpoisoned").push((i, s));
        let mut groups = vec![
            orth,
            vec![fact],
            vec![(s - sq) / s.abs().max(1e-300)],
            vec![base_dep],
        ];
        if let Some(f) = candidate {
            let f2 = f.eval(p)?.powi(2);
            groups.push(vec![(s - f2) / f2.abs().max(1e-300)]);
        }
        Ok(groups)
    });
    let mut scales = scales.into_inner().expect("unpoisoned");
    scales.sort_by_key(|(i, _)| *i);
    let split = checks.iter().take(4).all(CheckResult::passed);
    Ok(SplittingReport {
        checks,
        fitted_scale: scales.into_iter().map(|(_, s)| s).collect(),
        split,
    })
}

/// Fiber components of the tangential part of `ξ` on an immersed warped
/// product; must vanish when the product is a PR-semi-invariant warped
/// product with `ξ` on the base.
pub fn xi_fiber_component(
    imm: &Immersion,
    fiber_idx: &[usize],
    samples: &SamplePoints,
    cfg: &VerifyConfig,
    id: &str,
) -> Result<CheckResult> {
    let s = imm
        .structure()
        .ok_or_else(|| GeometryError::Inapplicable("immersion has no ambient structure".into()))?
        .clone();
    let check = Check::new(id, "xi has no fiber component", cfg.tol);
    let mut r = run_checks(vec![check], samples, |_, p| {
        let frame = build_point_frame(imm, p)?;
        let xi = s.xi().eval(&frame.image)?;
        let c = frame.tangent_coeffs(&xi);
        Ok(vec![fiber_idx.iter().map(|&i| c[i]).collect()])
    });
    Ok(r.remove(0))
}

/// Coefficient `X(ln f)` in `∇_X ξ = X(ln f) ξ` on an immersed product whose
/// fiber contains `ξ`, using the induced connection. Parallel `ξ` forces it
/// to vanish, i.e. the warp is constant.
pub fn xi_in_fiber_forcing(
    imm: &Immersion,
    base_idx: &[usize],
    samples: &SamplePoints,
    cfg: &VerifyConfig,
    id: &str,
) -> Result<CheckResult> {
    let s = imm
        .structure()
        .ok_or_else(|| GeometryError::Inapplicable("immersion has no ambient structure".into()))?
        .clone();
    let check = Check::new(
        id,
        "xi in the fiber: fitted X(ln f) = 0 (warp forced constant)",
        cfg.tol,
    );
    let mut r = run_checks(vec![check], samples, |_, p| {
        let frame = build_point_frame(imm, p)?;
        let xi_amb = s.xi().eval(&frame.image)?;
        let xi = frame.tangent_coeffs(&xi_amb);
        let gxx = frame.induced.bilinear(&xi, &xi);
        let mut out = Vec::new();
        for &b in base_idx {
            // ∇_X ξ = tangential part of the along-map derivative of ξ̃(Ω)
            let dq = frame.tangent(b);
            let dxi: Vec<f64> = s
                .xi()
                .components()
                .iter()
                .map(|e| Ok(linalg::dot(&e.gradient(&frame.image)?, &dq)))
                .collect::<Result<Vec<_>>>()?;
            let nabla = frame.tangent_coeffs(&frame.along_derivative(b, &xi_amb, &dxi));
            out.push(frame.induced.bilinear(&nabla, &xi) / gxx);
        }
        Ok(vec![out])
    });
    Ok(r.remove(0))
}

/// Canonical leaves `b ↦ (b, fiber_ref)` and `φ ↦ (base_ref, φ)` of a product
/// chart carrying `metric`.
pub fn factor_leaves(
    product: &Chart,
    metric: &MetricField,
    base_idx: &[usize],
    fiber_idx: &[usize],
    reference: &[f64],
) -> Result<(Immersion, Immersion)> {
    let leaf = |free: &[usize], name: &str| -> Result<Immersion> {
        let coords: Vec<String> = free.iter().map(|&i| product.coords()[i].clone()).collect();
        let domain: Vec<Interval> = free.iter().map(|&i| product.domain()[i]).collect();
        let src = Chart::new(name, coords)?.with_domain(domain)?;
        let map = (0..product.dim())
            .map(|a| match free.iter().position(|&i| i == a) {
                Some(j) => ScalarExpr::coord(j),
                None => ScalarExpr::constant(reference[a]),
            })
            .collect();
        Immersion::new(src, product.clone(), map, metric.clone())
    };
    Ok((leaf(base_idx, "base_leaf")?, leaf(fiber_idx, "fiber_leaf")?))
}

/// Restriction of product samples to a subset of coordinates.
pub fn project_samples(samples: &SamplePoints, idx: &[usize], seed: u64) -> SamplePoints {
    SamplePoints::from_points(
        samples
            .points
            .iter()
            .map(|p| idx.iter().map(|&i| p[i]).collect())
            .collect(),
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::SampleBox;

    fn line(name: &str, coord: &str) -> (Chart, MetricField) {
        let c = Chart::new(name, [coord]).unwrap();
        let g = MetricField::diagonal(vec![ScalarExpr::one()], Signature::new(1, 0)).unwrap();
        (c, g)
    }

    fn samples(n: usize) -> (SamplePoints, VerifyConfig) {
        let cfg = VerifyConfig {
            samples: n,
            ..Default::default()
        };
        let bx = SampleBox(vec![[-1.0, 1.0], [-1.0, 1.0]]);
        (SamplePoints::draw(&bx, &cfg, 5), cfg)
    }

    fn exp_warp() -> WarpedSpec {
        let (b, gb) = line("B", "x");
        let (f, gf) = line("F", "u");
        let w = b.parse("exp(x)").unwrap();
        WarpedSpec::warped(b, gb, f, gf, w).unwrap()
    }

    #[test]
    fn exponential_warp_metric_and_connection() {
        let spec = exp_warp();
        let g = build_warped_metric(&spec).unwrap();
        let p = [0.3, -0.2];
        let m = g.value(&p).unwrap();
        assert!((m[(1, 1)] - (0.6f64).exp()).abs() < 1e-14 && m[(0, 1)] == 0.0);
        let gam = christoffel(&g, &p).unwrap();
        assert!((gam.get(1, 0, 1) - 1.0).abs() < 1e-14);
        let (s, cfg) = samples(20);
        for c in verify_warped_connection(&spec, &s, &cfg).unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn unit_warp_is_product() {
        let (b, gb) = line("B", "x");
        let (f, gf) = line("F", "u");
        let spec = WarpedSpec::doubly(b, gb, f, gf, ScalarExpr::one(), ScalarExpr::one()).unwrap();
        let g = build_doubly_warped_metric(&spec).unwrap();
        let m = g.value(&[0.4, 0.9]).unwrap();
        assert!(m.sub(&Mat::identity(2)).max_abs() < 1e-12);
        let (s, cfg) = samples(5);
        for c in verify_warped_connection(&spec, &s, &cfg).unwrap() {
            assert!(c.passed() && c.residual() == 0.0, "{c:?}");
        }
    }

    #[test]
    fn doubly_warped_formula_and_forcing() {
        let (b, gb) = line("B", "x");
        let (f, gf) = line("F", "u");
        let f1 = b.parse("exp(x)").unwrap();
        let f2 = f.parse("exp(u)").unwrap();
        let spec = WarpedSpec::doubly(b, gb, f, gf, f1, f2)
            .unwrap()
            .with_xi(Factor::Fiber);
        let g = build_doubly_warped_metric(&spec).unwrap();
        let gam = christoffel(&g, &[0.1, 0.2]).unwrap();
        // ∇_∂x ∂u = ∂u + ∂x
        assert!((gam.get(0, 0, 1) - 1.0).abs() < 1e-13 && (gam.get(1, 0, 1) - 1.0).abs() < 1e-13);
        let (s, cfg) = samples(20);
        for c in verify_doubly_formula(&spec, &s, &cfg).unwrap() {
            assert!(c.passed(), "{c:?}");
        }
        let forced = forced_constant_warp(&spec, &s, &cfg).unwrap();
        assert!((forced.value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_positive_warp_rejected() {
        let (b, gb) = line("B", "x");
        let (f, gf) = line("F", "u");
        let spec = WarpedSpec::warped(b.clone(), gb, f, gf, b.parse("x").unwrap()).unwrap();
        let (s, cfg) = samples(10);
        assert!(matches!(
            verify_warped_connection(&spec, &s, &cfg),
            Err(GeometryError::NonPositiveWarp { .. })
        ));
    }

    #[test]
    fn splitting_detection() {
        let (s, cfg) = samples(20);
        let c = Chart::new("P", ["x", "u"]).unwrap();
        let warped = MetricField::diagonal(
            vec![c.parse("1").unwrap(), c.parse("exp(2*x)").unwrap()],
            Signature::new(2, 0),
        )
        .unwrap();
        let f = c.parse("exp(x)").unwrap();
        let g = |p: &[f64]| warped.value(p);
        let rep = detect_warped_splitting(&g, &[0], &[1], Some(&f), &s, &cfg, "").unwrap();
        assert!(rep.split);
        assert!(rep.checks.iter().all(CheckResult::passed));
        let p = &s.points[3];
        assert!((rep.fitted_scale[3] - (2.0 * p[0]).exp()).abs() < 1e-12);

        let bent = MetricField::diagonal(
            vec![c.parse("1").unwrap(), c.parse("2+x*u").unwrap()],
            Signature::new(2, 0),
        )
        .unwrap();
        let g = |p: &[f64]| bent.value(p);
        let rep = detect_warped_splitting(&g, &[0], &[1], None, &s, &cfg, "").unwrap();
        assert!(!rep.split);
    }

    #[test]
    fn leaves_of_warped_product() {
        let spec = exp_warp();
        let g = build_warped_metric(&spec).unwrap();
        let chart = spec.product_chart().unwrap();
        let (base, fiber) = factor_leaves(&chart, &g, &[0], &[1], &[0.2, 0.1]).unwrap();
        let (s, cfg) = samples(10);
        let ub =
            crate::submanifold::classify_umbilic(&base, &project_samples(&s, &[0], 1), &cfg, "");
        assert_eq!(ub.class, crate::submanifold::UmbilicClass::TotallyGeodesic);
        let uf =
            crate::submanifold::classify_umbilic(&fiber, &project_samples(&s, &[1], 1), &cfg, "");
        assert!(matches!(
            uf.class,
            crate::submanifold::UmbilicClass::TotallyUmbilical { .. }
        ));
    }
}
