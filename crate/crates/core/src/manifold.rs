//! Charts, coordinate fields and pseudo-Riemannian metrics.
//!
//! Everything here works pointwise: fields are [`ScalarExpr`] components,
//! derivatives come from hyper-dual evaluation, and the Levi-Civita
//! connection is assembled at each sample point from `∂g` and a pivoted LU
//! inverse of `g`.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::expr::{ExprError, Func, ScalarExpr};
use crate::linalg::{self, Mat};

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

/// A coordinate chart: names plus an open box domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    name: String,
    coords: Vec<String>,
    domain: Vec<Interval>,
}

impl Chart {
    pub fn new<S: Into<String>>(name: &str, coords: impl IntoIterator<Item = S>) -> Result<Self> {
        let coords: Vec<String> = coords.into_iter().map(Into::into).collect();
        if coords.is_empty() {
            return Err(GeometryError::InvalidConfig(format!(
                "chart `{name}` has no coordinates"
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            let valid_ident = c
                .chars()
                .next()
                .is_some_and(|ch| ch.is_alphabetic() || ch == '_')
                && c.chars().all(|ch| ch.is_alphanumeric() || ch == '_');
            if !valid_ident || c == "pi" || Func::from_name(c).is_some() {
                return Err(GeometryError::InvalidConfig(format!(
                    "chart `{name}`: `{c}` is not a usable coordinate name"
                )));
            }
            if coords[..i].contains(c) {
                return Err(GeometryError::InvalidConfig(format!(
                    "chart `{name}`: duplicate coordinate `{c}`"
                )));
            }
        }
        let domain = vec![Interval::UNBOUNDED; coords.len()];
        Ok(Self {
            name: name.to_string(),
            coords,
            domain,
        })
    }

    pub fn with_domain(mut self, domain: Vec<Interval>) -> Result<Self> {
        if domain.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                what: format!("domain of chart `{}`", self.name),
                expected: self.dim(),
                found: domain.len(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && self.domain.iter().zip(p).all(|(iv, &x)| iv.contains(x))
    }

    pub fn parse(&self, text: &str) -> Result<ScalarExpr, ExprError> {
        ScalarExpr::parse(text, &self.coords)
    }

    pub fn print(&self, e: &ScalarExpr) -> String {
        e.display(&self.coords).to_string()
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(GeometryError::OutOfDomain {
                chart: self.name.clone(),
                point: p.to_vec(),
            })
        }
    }
}

/// Closed, finite sampling box; one `[lo, hi]` per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBox(pub Vec<[f64; 2]>);

impl SampleBox {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.0.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    /// Box must be finite, non-empty and strictly inside the chart's open domain.
    pub fn validate(&self, chart: &Chart) -> Result<()> {
        if self.dim() != chart.dim() {
            return Err(GeometryError::DimensionMismatch {
                what: format!("sampling box of chart `{}`", chart.name()),
                expected: chart.dim(),
                found: self.dim(),
            });
        }
        for (k, ([lo, hi], iv)) in self.0.iter().zip(chart.domain()).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(GeometryError::InvalidConfig(format!(
                    "sampling interval [{lo}, {hi}] for `{}` is not a finite interval",
                    chart.coords()[k]
                )));
            }
            if !(iv.contains(*lo) && iv.contains(*hi)) {
                return Err(GeometryError::InvalidConfig(format!(
                    "sampling interval [{lo}, {hi}] for `{}` leaves the chart domain ({}, {})",
                    chart.coords()[k],
                    iv.lo,
                    iv.hi
                )));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.0
            .iter()
            .map(|&[lo, hi]| {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            })
            .collect()
    }

    pub fn sample_n(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Random components in `[-1, 1]`.
pub fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random vector field whose components are affine-plus-sine functions of the
/// coordinates, so that derivative terms are exercised.
pub fn random_vector_field(dim: usize, rng: &mut ChaCha8Rng) -> VectorField {
    let comps = (0..dim)
        .map(|_| {
            let mut e = ScalarExpr::constant(rng.random_range(-1.0..1.0));
            for j in 0..dim {
                let a: f64 = rng.random_range(-0.5..0.5);
                e = e + a * ScalarExpr::coord(j);
            }
            let j = rng.random_range(0..dim);
            let b: f64 = rng.random_range(-0.5..0.5);
            e + b * ScalarExpr::coord(j).sin()
        })
        .collect();
    VectorField::new(comps)
}

/// Vector field `Xⁱ ∂ᵢ` with expression components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarExpr>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarExpr>) -> Self {
        Self { components }
    }

    /// The coordinate field `∂ᵢ`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        Self::new(
            (0..dim)
                .map(|k| ScalarExpr::constant(if k == i { 1.0 } else { 0.0 }))
                .collect(),
        )
    }

    pub fn constant(v: &[f64]) -> Self {
        Self::new(v.iter().map(|&c| ScalarExpr::constant(c)).collect())
    }

    pub fn parse<S: AsRef<str>>(chart: &Chart, comps: &[S]) -> Result<Self> {
        if comps.len() != chart.dim() {
            return Err(GeometryError::DimensionMismatch {
                what: "vector field components".into(),
                expected: chart.dim(),
                found: comps.len(),
            });
        }
        let c = comps
            .iter()
            .map(|s| chart.parse(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(c))
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .components
            .iter()
            .map(|c| c.eval(p))
            .collect::<Result<Vec<_>, _>>()?)
    }

    /// Directional derivative of each component along `v`: `v(Yᵏ)`.
    pub fn derivative_along(&self, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .components
            .iter()
            .map(|c| c.eval_dual(p, v).map(|d| d.eps))
            .collect::<Result<Vec<_>, _>>()?)
    }

    pub fn scaled(&self, f: &ScalarExpr) -> VectorField {
        VectorField::new(self.components.iter().map(|c| f * c).collect())
    }

    pub fn plus(&self, o: &VectorField) -> VectorField {
        VectorField::new(
            self.components
                .iter()
                .zip(&o.components)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

/// Tensor field of valence `(upper, lower)` with row-major components;
/// for `(1,1)` entry `i*dim + j` is `Tⁱⱼ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    dim: usize,
    upper: usize,
    lower: usize,
    components: Vec<ScalarExpr>,
}

impl TensorField {
    pub fn new(
        dim: usize,
        upper: usize,
        lower: usize,
        components: Vec<ScalarExpr>,
    ) -> Result<Self> {
        let expected = dim.pow((upper + lower) as u32);
        if components.len() != expected {
            return Err(GeometryError::DimensionMismatch {
                what: format!("({upper},{lower}) tensor components"),
                expected,
                found: components.len(),
            });
        }
        Ok(Self {
            dim,
            upper,
            lower,
            components,
        })
    }

    pub fn covector(components: Vec<ScalarExpr>) -> Self {
        let dim = components.len();
        Self {
            dim,
            upper: 0,
            lower: 1,
            components,
        }
    }

    pub fn parse<S: AsRef<str>>(
        chart: &Chart,
        upper: usize,
        lower: usize,
        comps: &[S],
    ) -> Result<Self> {
        let c = comps
            .iter()
            .map(|s| chart.parse(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(chart.dim(), upper, lower, c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn valence(&self) -> (usize, usize) {
        (self.upper, self.lower)
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn component(&self, idx: &[usize]) -> &ScalarExpr {
        let flat = idx.iter().fold(0, |acc, &i| acc * self.dim + i);
        &self.components[flat]
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .components
            .iter()
            .map(|c| c.eval(p))
            .collect::<Result<Vec<_>, _>>()?)
    }

    /// `(1,1)` tensor evaluated as a matrix.
    pub fn eval_matrix(&self, p: &[f64]) -> Result<Mat> {
        debug_assert_eq!(self.upper + self.lower, 2);
        Ok(Mat::from_row_major(self.dim, self.dim, self.eval(p)?))
    }

    /// Partial derivatives `∂ₖ` of every component, `out[k][flat]`.
    pub fn partials(&self, p: &[f64]) -> Result<Vec<Vec<f64>>> {
        (0..self.dim)
            .map(|k| {
                self.components
                    .iter()
                    .map(|c| c.partial(p, k).map_err(GeometryError::from))
                    .collect()
            })
            .collect()
    }
}

/// Counts of positive and negative eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
}

impl Signature {
    pub fn new(positive: usize, negative: usize) -> Self {
        Self { positive, negative }
    }

    pub fn dim(&self) -> usize {
        self.positive + self.negative
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.positive, self.negative)
    }
}

/// Symmetric metric tensor with a declared signature.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    dim: usize,
    entries: Vec<ScalarExpr>,
    signature: Signature,
}

impl MetricField {
    /// Builds from the upper triangle (row-major, `i <= j`); symmetric by construction.
    pub fn from_upper(dim: usize, upper: Vec<ScalarExpr>, signature: Signature) -> Result<Self> {
        let expected = dim * (dim + 1) / 2;
        if upper.len() != expected {
            return Err(GeometryError::DimensionMismatch {
                what: "metric upper triangle".into(),
                expected,
                found: upper.len(),
            });
        }
        let mut entries = vec![ScalarExpr::zero(); dim * dim];
        let mut it = upper.into_iter();
        for i in 0..dim {
            for j in i..dim {
                let e = it.next().expect("length checked");
                entries[i * dim + j] = e.clone();
                entries[j * dim + i] = e;
            }
        }
        Self::checked(dim, entries, signature)
    }

    /// Builds from a full row-major matrix whose mirrored entries must agree.
    pub fn from_row_major(
        dim: usize,
        entries: Vec<ScalarExpr>,
        signature: Signature,
    ) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(GeometryError::DimensionMismatch {
                what: "metric entries".into(),
                expected: dim * dim,
                found: entries.len(),
            });
        }
        for i in 0..dim {
            for j in i + 1..dim {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(GeometryError::InvalidConfig(format!(
                        "metric entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Self::checked(dim, entries, signature)
    }

    pub fn diagonal(diag: Vec<ScalarExpr>, signature: Signature) -> Result<Self> {
        let dim = diag.len();
        let mut entries = vec![ScalarExpr::zero(); dim * dim];
        for (i, d) in diag.into_iter().enumerate() {
            entries[i * dim + i] = d;
        }
        Self::checked(dim, entries, signature)
    }

    fn checked(dim: usize, entries: Vec<ScalarExpr>, signature: Signature) -> Result<Self> {
        if signature.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                what: "declared signature".into(),
                expected: dim,
                found: signature.dim(),
            });
        }
        Ok(Self {
            dim,
            entries,
            signature,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarExpr {
        &self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[ScalarExpr] {
        &self.entries
    }

    pub fn value(&self, p: &[f64]) -> Result<Mat> {
        let v = self
            .entries
            .iter()
            .map(|e| e.eval(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Mat::from_row_major(self.dim, self.dim, v))
    }

    /// `∂ₖ g` for every coordinate `k`.
    pub fn partials(&self, p: &[f64]) -> Result<Vec<Mat>> {
        (0..self.dim)
            .map(|k| {
                let v = self
                    .entries
                    .iter()
                    .map(|e| e.partial(p, k))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Mat::from_row_major(self.dim, self.dim, v))
            })
            .collect()
    }

    pub fn inner(&self, p: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self.value(p)?.bilinear(a, b))
    }

    /// Nondegeneracy and declared signature at `p`; returns the evaluated matrix.
    pub fn check_at(&self, p: &[f64]) -> Result<Mat> {
        let g = self.value(p)?;
        let found = signature_of(&g).map_err(|detail| GeometryError::DegenerateMetric {
            point: p.to_vec(),
            detail,
        })?;
        if found != self.signature {
            return Err(GeometryError::SignatureMismatch {
                expected: self.signature,
                found,
                point: p.to_vec(),
            });
        }
        Ok(g)
    }

    /// The scalar expression `g(X, Y)` for two vector fields.
    pub fn inner_expr(&self, x: &VectorField, y: &VectorField) -> ScalarExpr {
        let mut terms = Vec::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let gij = self.entry(i, j);
                if gij.is_zero() {
                    continue;
                }
                terms.push(gij * &x.components()[i] * y.components()[j].clone());
            }
        }
        ScalarExpr::sum(terms)
    }
}

/// Eigenvalue-sign signature of a symmetric matrix; fails when degenerate.
pub fn signature_of(g: &Mat) -> Result<Signature, String> {
    let det = g.lu().map(|lu| lu.det()).unwrap_or(0.0);
    if det.abs() <= 1e-12 {
        return Err(format!("|det g| = {:e}", det.abs()));
    }
    let ev = linalg::symmetric_eigenvalues(g);
    let scale = ev.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if ev.iter().any(|x| x.abs() <= 1e-12 * scale) {
        return Err(format!("near-zero eigenvalue among {ev:?}"));
    }
    Ok(Signature::new(
        ev.iter().filter(|&&x| x > 0.0).count(),
        ev.iter().filter(|&&x| x < 0.0).count(),
    ))
}

/// Levi-Civita symbols `Γᵏᵢⱼ` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelAtPoint {
    dim: usize,
    data: Vec<f64>,
}

impl ChristoffelAtPoint {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γᵏᵢⱼ`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.dim + i) * self.dim + j] = v;
    }

    /// `Γ(a, b)ᵏ = Γᵏᵢⱼ aⁱ bʲ`.
    pub fn contract(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        s += self.get(k, i, j) * a[i] * b[j];
                    }
                }
                s
            })
            .collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut m: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    m = m.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        m
    }

    /// Christoffels from a metric value, its inverse and partials `∂ₗ g`.
    pub fn from_metric_data(g_inv: &Mat, dg: &[Mat]) -> Self {
        let n = g_inv.rows();
        let mut out = Self::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    out.set(k, i, j, 0.5 * s);
                    out.set(k, j, i, 0.5 * s);
                }
            }
        }
        out
    }
}

pub fn metric_inverse(g: &MetricField, p: &[f64]) -> Result<Mat> {
    g.value(p)?
        .inverse()
        .map_err(|s| GeometryError::DegenerateMetric {
            point: p.to_vec(),
            detail: s.to_string(),
        })
}

/// `Γᵏᵢⱼ = ½ gᵏˡ (∂ᵢ gⱼₗ + ∂ⱼ gᵢₗ − ∂ₗ gᵢⱼ)` at `p`.
pub fn christoffel(g: &MetricField, p: &[f64]) -> Result<ChristoffelAtPoint> {
    let g_inv = metric_inverse(g, p)?;
    let dg = g.partials(p)?;
    Ok(ChristoffelAtPoint::from_metric_data(&g_inv, &dg))
}

/// `(∇_X Y)ᵏ = X(Yᵏ) + Γᵏᵢⱼ Xⁱ Yʲ` at `p`.
pub fn cov_deriv_vector(
    g: &MetricField,
    x: &VectorField,
    y: &VectorField,
    p: &[f64],
) -> Result<Vec<f64>> {
    let gamma = christoffel(g, p)?;
    cov_deriv_with(&gamma, x, y, p)
}

pub(crate) fn cov_deriv_with(
    gamma: &ChristoffelAtPoint,
    x: &VectorField,
    y: &VectorField,
    p: &[f64],
) -> Result<Vec<f64>> {
    let xv = x.eval(p)?;
    let yv = y.eval(p)?;
    let dy = y.derivative_along(p, &xv)?;
    Ok(linalg::vadd(&dy, &gamma.contract(&xv, &yv)))
}

/// Covariant derivative `∇ₖ T` of a tensor field along coordinate `k`.
/// Supported valences: (1,0), (0,1), (0,2), (1,1). Output uses the same
/// row-major component layout as `T`.
pub fn cov_deriv_tensor(g: &MetricField, t: &TensorField, k: usize, p: &[f64]) -> Result<Vec<f64>> {
    let gamma = christoffel(g, p)?;
    cov_deriv_tensor_with(&gamma, t, k, p)
}

pub(crate) fn cov_deriv_tensor_with(
    gamma: &ChristoffelAtPoint,
    t: &TensorField,
    k: usize,
    p: &[f64],
) -> Result<Vec<f64>> {
    let n = t.dim();
    let vals = t.eval(p)?;
    let dk: Vec<f64> = t
        .components()
        .iter()
        .map(|c| c.partial(p, k))
        .collect::<Result<_, _>>()?;
    let mut out = dk;
    match t.valence() {
        (1, 0) => {
            for i in 0..n {
                for l in 0..n {
                    out[i] += gamma.get(i, k, l) * vals[l];
                }
            }
        }
        (0, 1) => {
            for i in 0..n {
                for l in 0..n {
                    out[i] -= gamma.get(l, k, i) * vals[l];
                }
            }
        }
        (0, 2) => {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        out[i * n + j] -= gamma.get(l, k, i) * vals[l * n + j]
                            + gamma.get(l, k, j) * vals[i * n + l];
                    }
                }
            }
        }
        (1, 1) => {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        out[i * n + j] += gamma.get(i, k, l) * vals[l * n + j]
                            - gamma.get(l, k, j) * vals[i * n + l];
                    }
                }
            }
        }
        (upper, lower) => return Err(GeometryError::UnsupportedValence { upper, lower }),
    }
    Ok(out)
}

/// `[X, Y]ᵏ = X(Yᵏ) − Y(Xᵏ)` at `p`.
pub fn lie_bracket(x: &VectorField, y: &VectorField, p: &[f64]) -> Result<Vec<f64>> {
    let xv = x.eval(p)?;
    let yv = y.eval(p)?;
    Ok(linalg::vsub(
        &y.derivative_along(p, &xv)?,
        &x.derivative_along(p, &yv)?,
    ))
}

/// `X g(Y,Z) − g(∇_X Y, Z) − g(Y, ∇_X Z)` at `p`.
pub fn metric_compatibility_residual(
    g: &MetricField,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
    p: &[f64],
) -> Result<f64> {
    let gamma = christoffel(g, p)?;
    let gm = g.value(p)?;
    let xv = x.eval(p)?;
    let lhs = g.inner_expr(y, z).eval_dual(p, &xv)?.eps;
    let nxy = cov_deriv_with(&gamma, x, y, p)?;
    let nxz = cov_deriv_with(&gamma, x, z, p)?;
    Ok(lhs - gm.bilinear(&nxy, &z.eval(p)?) - gm.bilinear(&y.eval(p)?, &nxz))
}

/// `∇_X Y − ∇_Y X − [X, Y]` at `p`.
pub fn torsion_residual(
    g: &MetricField,
    x: &VectorField,
    y: &VectorField,
    p: &[f64],
) -> Result<Vec<f64>> {
    let gamma = christoffel(g, p)?;
    let a = cov_deriv_with(&gamma, x, y, p)?;
    let b = cov_deriv_with(&gamma, y, x, p)?;
    let br = lie_bracket(x, y, p)?;
    Ok(linalg::vsub(&linalg::vsub(&a, &b), &br))
}
