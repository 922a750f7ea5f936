//! Expression trees for smooth coordinate functions.
//!
//! A [`ScalarExpr`] is an immutable, cheaply clonable tree over the
//! coordinates of a chart. Evaluation is generic over [`Number`], so the
//! same tree yields plain values, first-order [`Dual`] directional
//! derivatives or full [`HyperDual`] second-order information.
//!
//! Grammar accepted by [`ScalarExpr::parse`]:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | factor
//! factor := base ('^' rational)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | tan | sec | sinh | cosh | exp | ln | sqrt | abs
//! ```
//!
//! The identifier `pi` is the constant π; every other identifier must be a
//! coordinate name.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

use crate::hyperdual::{Dual, HyperDual, Number};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("coordinate index {index} out of range for a {dim}-dimensional point")]
    CoordinateOutOfRange { index: usize, dim: usize },
}

/// Elementary functions available in expressions. Angles are in radians.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sec,
    Sinh,
    Cosh,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sec,
        Func::Sinh,
        Func::Cosh,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sec => "sec",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Value, first and second derivative at `a`.
    fn jet(self, a: f64) -> Result<(f64, f64, f64), ExprError> {
        let domain = |what: &str| Err(ExprError::Domain(format!("{}({a}): {what}", self.name())));
        Ok(match self {
            Func::Sin => (a.sin(), a.cos(), -a.sin()),
            Func::Cos => (a.cos(), -a.sin(), -a.cos()),
            Func::Tan | Func::Sec => {
                let c = a.cos();
                if c.abs() < 1e-15 {
                    return domain("argument is an odd multiple of pi/2");
                }
                let sec = 1.0 / c;
                let tan = a.sin() * sec;
                if self == Func::Tan {
                    (tan, sec * sec, 2.0 * sec * sec * tan)
                } else {
                    (sec, sec * tan, sec * (tan * tan + sec * sec))
                }
            }
            Func::Sinh => (a.sinh(), a.cosh(), a.sinh()),
            Func::Cosh => (a.cosh(), a.sinh(), a.cosh()),
            Func::Exp => {
                let e = a.exp();
                (e, e, e)
            }
            Func::Ln => {
                if a <= 0.0 {
                    return domain("logarithm of a non-positive number");
                }
                (a.ln(), 1.0 / a, -1.0 / (a * a))
            }
            Func::Sqrt => {
                if a < 0.0 {
                    return domain("square root of a negative number");
                }
                let s = a.sqrt();
                (s, 0.5 / s, -0.25 / (s * a))
            }
            Func::Abs => {
                let sign = if a > 0.0 {
                    1.0
                } else if a < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                (a.abs(), sign, 0.0)
            }
        })
    }
}

/// Exponent `num/den` of a power node, kept in lowest terms with `den > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Rational {
        assert!(den != 0, "zero denominator");
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let s = if den < 0 { -1 } else { 1 };
        Rational {
            num: s * num / g.max(1),
            den: s * den / g.max(1),
        }
    }

    pub fn integer(k: i64) -> Rational {
        Rational { num: k, den: 1 }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn is_integer(self) -> bool {
        self.den == 1
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 && self.num >= 0 {
            write!(f, "{}", self.num)
        } else if self.den == 1 {
            write!(f, "({})", self.num)
        } else {
            write!(f, "({}/{})", self.num, self.den)
        }
    }
}

#[derive(Debug, PartialEq)]
enum Node {
    Const(f64),
    Coord(usize),
    Add(ScalarExpr, ScalarExpr),
    Sub(ScalarExpr, ScalarExpr),
    Mul(ScalarExpr, ScalarExpr),
    Div(ScalarExpr, ScalarExpr),
    Pow(ScalarExpr, Rational),
    Neg(ScalarExpr),
    Func(Func, ScalarExpr),
}

/// Smooth function of chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarExpr(Arc<Node>);

impl ScalarExpr {
    fn node(n: Node) -> ScalarExpr {
        ScalarExpr(Arc::new(n))
    }

    pub fn constant(v: f64) -> ScalarExpr {
        Self::node(Node::Const(v))
    }

    pub fn zero() -> ScalarExpr {
        Self::constant(0.0)
    }

    pub fn one() -> ScalarExpr {
        Self::constant(1.0)
    }

    pub fn coord(index: usize) -> ScalarExpr {
        Self::node(Node::Coord(index))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn pow(&self, exponent: Rational) -> ScalarExpr {
        if exponent.num == 0 {
            return Self::one();
        }
        if exponent == Rational::integer(1) {
            return self.clone();
        }
        if let Some(c) = self.as_constant() {
            if c > 0.0 || exponent.is_integer() {
                return Self::constant(c.powf(exponent.to_f64()));
            }
        }
        Self::node(Node::Pow(self.clone(), exponent))
    }

    pub fn powi(&self, k: i64) -> ScalarExpr {
        self.pow(Rational::integer(k))
    }

    pub fn apply(&self, f: Func) -> ScalarExpr {
        Self::node(Node::Func(f, self.clone()))
    }

    pub fn sin(&self) -> ScalarExpr {
        self.apply(Func::Sin)
    }
    pub fn cos(&self) -> ScalarExpr {
        self.apply(Func::Cos)
    }
    pub fn tan(&self) -> ScalarExpr {
        self.apply(Func::Tan)
    }
    pub fn sec(&self) -> ScalarExpr {
        self.apply(Func::Sec)
    }
    pub fn sinh(&self) -> ScalarExpr {
        self.apply(Func::Sinh)
    }
    pub fn cosh(&self) -> ScalarExpr {
        self.apply(Func::Cosh)
    }
    pub fn exp(&self) -> ScalarExpr {
        self.apply(Func::Exp)
    }
    pub fn ln(&self) -> ScalarExpr {
        self.apply(Func::Ln)
    }
    pub fn sqrt(&self) -> ScalarExpr {
        self.apply(Func::Sqrt)
    }
    pub fn abs(&self) -> ScalarExpr {
        self.apply(Func::Abs)
    }

    /// Sum of a sequence, skipping literal zeros.
    pub fn sum<I: IntoIterator<Item = ScalarExpr>>(terms: I) -> ScalarExpr {
        terms.into_iter().fold(Self::zero(), |acc, t| acc + t)
    }

    /// True if the tree contains a division node (domain checked at evaluation).
    pub fn has_division(&self) -> bool {
        match &*self.0 {
            Node::Const(_) | Node::Coord(_) => false,
            Node::Div(..) => true,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
                a.has_division() || b.has_division()
            }
            Node::Pow(a, _) | Node::Neg(a) | Node::Func(_, a) => a.has_division(),
        }
    }

    /// Coordinate indices the expression depends on.
    pub fn coordinates(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_coords(&mut out);
        out
    }

    fn collect_coords(&self, out: &mut BTreeSet<usize>) {
        match &*self.0 {
            Node::Const(_) => {}
            Node::Coord(i) => {
                out.insert(*i);
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_coords(out);
                b.collect_coords(out);
            }
            Node::Pow(a, _) | Node::Neg(a) | Node::Func(_, a) => a.collect_coords(out),
        }
    }

    /// Replaces every coordinate `i` by `f(i)`.
    pub fn substitute(&self, f: &dyn Fn(usize) -> ScalarExpr) -> ScalarExpr {
        match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Coord(i) => f(*i),
            Node::Add(a, b) => a.substitute(f) + b.substitute(f),
            Node::Sub(a, b) => a.substitute(f) - b.substitute(f),
            Node::Mul(a, b) => a.substitute(f) * b.substitute(f),
            Node::Div(a, b) => a.substitute(f) / b.substitute(f),
            Node::Pow(a, r) => a.substitute(f).pow(*r),
            Node::Neg(a) => -a.substitute(f),
            Node::Func(g, a) => a.substitute(f).apply(*g),
        }
    }

    /// Reindexes coordinates, e.g. to lift a factor function to a product chart.
    pub fn shift_coords(&self, offset: usize) -> ScalarExpr {
        self.substitute(&|i| ScalarExpr::coord(i + offset))
    }

    /// Evaluates on any [`Number`] type; `vars[i]` is coordinate `i`.
    pub fn eval_with<N: Number>(&self, vars: &[N]) -> Result<N, ExprError> {
        let out = match &*self.0 {
            Node::Const(c) => N::from_f64(*c),
            Node::Coord(i) => *vars.get(*i).ok_or(ExprError::CoordinateOutOfRange {
                index: *i,
                dim: vars.len(),
            })?,
            Node::Add(a, b) => a.eval_with(vars)? + b.eval_with(vars)?,
            Node::Sub(a, b) => a.eval_with(vars)? - b.eval_with(vars)?,
            Node::Mul(a, b) => a.eval_with(vars)? * b.eval_with(vars)?,
            Node::Div(a, b) => {
                let den = b.eval_with(vars)?;
                if den.re() == 0.0 {
                    return Err(ExprError::Domain("division by zero".into()));
                }
                a.eval_with(vars)? / den
            }
            Node::Neg(a) => -a.eval_with(vars)?,
            Node::Pow(a, r) => pow_number(a.eval_with(vars)?, *r)?,
            Node::Func(f, a) => {
                let x = a.eval_with(vars)?;
                let (f0, f1, f2) = f.jet(x.re())?;
                x.chain(f0, f1, f2)
            }
        };
        if !out.is_finite() {
            return Err(ExprError::Domain(format!(
                "non-finite result at point {:?}",
                vars.iter().map(|v| v.re()).collect::<Vec<_>>()
            )));
        }
        Ok(out)
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64, ExprError> {
        self.eval_with(p)
    }

    /// Value plus exact partials along coordinates `dir1`, `dir2` and the
    /// mixed second partial. `dir1 == dir2` gives the pure second partial.
    pub fn eval_hyperdual(
        &self,
        p: &[f64],
        dir1: usize,
        dir2: usize,
    ) -> Result<HyperDual, ExprError> {
        for d in [dir1, dir2] {
            if d >= p.len() {
                return Err(ExprError::CoordinateOutOfRange {
                    index: d,
                    dim: p.len(),
                });
            }
        }
        let vars: Vec<HyperDual> = p
            .iter()
            .enumerate()
            .map(|(i, &x)| HyperDual::variable(x, i == dir1, i == dir2))
            .collect();
        self.eval_with(&vars)
    }

    /// Value and directional derivative along `direction` (a tangent vector in
    /// coordinate components).
    pub fn eval_dual(&self, p: &[f64], direction: &[f64]) -> Result<Dual, ExprError> {
        let vars: Vec<Dual> = p
            .iter()
            .enumerate()
            .map(|(i, &x)| Dual::new(x, direction.get(i).copied().unwrap_or(0.0)))
            .collect();
        self.eval_with(&vars)
    }

    /// Partial derivative along coordinate `i`.
    pub fn partial(&self, p: &[f64], i: usize) -> Result<f64, ExprError> {
        Ok(self.eval_hyperdual(p, i, i)?.d1)
    }

    pub fn gradient(&self, p: &[f64]) -> Result<Vec<f64>, ExprError> {
        (0..p.len()).map(|i| self.partial(p, i)).collect()
    }

    /// Parses `text` with `names[i]` naming coordinate `i`.
    pub fn parse<S: AsRef<str>>(text: &str, names: &[S]) -> Result<ScalarExpr, ExprError> {
        let names: Vec<&str> = names.iter().map(|s| s.as_ref()).collect();
        let tokens = tokenize(text)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            names: &names,
        };
        let e = parser.expr()?;
        match parser.peek() {
            Tok::End => Ok(e),
            _ => Err(parser.error("unexpected trailing input")),
        }
    }

    /// Printer with explicit parentheses; output reparses to the same tree value.
    pub fn display<'a, S: AsRef<str>>(&'a self, names: &'a [S]) -> impl fmt::Display + 'a {
        Printer { expr: self, names }
    }

    fn write<S: AsRef<str>>(&self, f: &mut fmt::Formatter<'_>, names: &[S]) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Node::Coord(i) => match names.get(*i) {
                Some(n) => write!(f, "{}", n.as_ref()),
                None => write!(f, "_{i}"),
            },
            Node::Add(a, b) => binary(f, names, a, " + ", b),
            Node::Sub(a, b) => binary(f, names, a, " - ", b),
            Node::Mul(a, b) => binary(f, names, a, " * ", b),
            Node::Div(a, b) => binary(f, names, a, " / ", b),
            Node::Pow(a, r) => {
                write!(f, "(")?;
                a.write(f, names)?;
                write!(f, ")^{r}")
            }
            Node::Neg(a) => {
                write!(f, "(-")?;
                a.write(f, names)?;
                write!(f, ")")
            }
            Node::Func(g, a) => {
                write!(f, "{}(", g.name())?;
                a.write(f, names)?;
                write!(f, ")")
            }
        }
    }
}

fn binary<S: AsRef<str>>(
    f: &mut fmt::Formatter<'_>,
    names: &[S],
    a: &ScalarExpr,
    op: &str,
    b: &ScalarExpr,
) -> fmt::Result {
    write!(f, "(")?;
    a.write(f, names)?;
    write!(f, "{op}")?;
    b.write(f, names)?;
    write!(f, ")")
}

struct Printer<'a, S> {
    expr: &'a ScalarExpr,
    names: &'a [S],
}

impl<S: AsRef<str>> fmt::Display for Printer<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.write(f, self.names)
    }
}

fn pow_number<N: Number>(x: N, r: Rational) -> Result<N, ExprError> {
    let a = x.re();
    if r.is_integer() {
        let k = r.num;
        if k < 0 && a == 0.0 {
            return Err(ExprError::Domain("negative power of zero".into()));
        }
        let kf = k as f64;
        let powi = |e: i64| a.powi(e as i32);
        let f1 = if k == 0 { 0.0 } else { kf * powi(k - 1) };
        let f2 = if k == 0 || k == 1 {
            0.0
        } else {
            kf * (kf - 1.0) * powi(k - 2)
        };
        return Ok(x.chain(powi(k), f1, f2));
    }
    if a <= 0.0 {
        return Err(ExprError::Domain(format!(
            "non-integer power {} of non-positive base {a}",
            r.to_f64()
        )));
    }
    let e = r.to_f64();
    Ok(x.chain(
        a.powf(e),
        e * a.powf(e - 1.0),
        e * (e - 1.0) * a.powf(e - 2.0),
    ))
}

// ---------------------------------------------------------------------------
// Operators with light constant folding
// ---------------------------------------------------------------------------

impl Add for ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, o: ScalarExpr) -> ScalarExpr {
        match (self.as_constant(), o.as_constant()) {
            (Some(a), Some(b)) => ScalarExpr::constant(a + b),
            (Some(0.0), _) => o,
            (_, Some(0.0)) => self,
            _ => ScalarExpr::node(Node::Add(self, o)),
        }
    }
}

impl Sub for ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, o: ScalarExpr) -> ScalarExpr {
        match (self.as_constant(), o.as_constant()) {
            (Some(a), Some(b)) => ScalarExpr::constant(a - b),
            (Some(0.0), _) => -o,
            (_, Some(0.0)) => self,
            _ => ScalarExpr::node(Node::Sub(self, o)),
        }
    }
}

impl Mul for ScalarExpr {
    type Output = ScalarExpr;
    fn mul(self, o: ScalarExpr) -> ScalarExpr {
        match (self.as_constant(), o.as_constant()) {
            (Some(a), Some(b)) => ScalarExpr::constant(a * b),
            (Some(0.0), _) | (_, Some(0.0)) => ScalarExpr::zero(),
            (Some(1.0), _) => o,
            (_, Some(1.0)) => self,
            _ => ScalarExpr::node(Node::Mul(self, o)),
        }
    }
}

impl Div for ScalarExpr {
    type Output = ScalarExpr;
    fn div(self, o: ScalarExpr) -> ScalarExpr {
        match (self.as_constant(), o.as_constant()) {
            (Some(a), Some(b)) if b != 0.0 => ScalarExpr::constant(a / b),
            (_, Some(1.0)) => self,
            _ => ScalarExpr::node(Node::Div(self, o)),
        }
    }
}

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        match self.as_constant() {
            Some(c) => ScalarExpr::constant(-c),
            None => ScalarExpr::node(Node::Neg(self)),
        }
    }
}

macro_rules! ref_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<&ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $m(self, o: &ScalarExpr) -> ScalarExpr {
                self.clone().$m(o.clone())
            }
        }
        impl $tr<f64> for ScalarExpr {
            type Output = ScalarExpr;
            fn $m(self, o: f64) -> ScalarExpr {
                self.$m(ScalarExpr::constant(o))
            }
        }
        impl $tr<ScalarExpr> for f64 {
            type Output = ScalarExpr;
            fn $m(self, o: ScalarExpr) -> ScalarExpr {
                ScalarExpr::constant(self).$m(o)
            }
        }
    )*};
}

ref_ops!(Add add, Sub sub, Mul mul, Div div);

impl Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        -self.clone()
    }
}

impl From<f64> for ScalarExpr {
    fn from(v: f64) -> Self {
        ScalarExpr::constant(v)
    }
}

// ---------------------------------------------------------------------------
// Tokenizer and recursive-descent parser
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Sym(char),
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i].1 == 'e' || chars[i].1 == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = chars.get(i).map_or(text.len(), |c| c.0);
            let lit = &text[off..end];
            let v: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                offset: off,
                message: format!("malformed number `{lit}`"),
            })?;
            let _ = start;
            out.push((Tok::Num(v, lit.to_string()), off));
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let end = chars.get(i).map_or(text.len(), |c| c.0);
            out.push((Tok::Ident(text[off..end].to_string()), off));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), off));
            i += 1;
        } else {
            return Err(ExprError::Syntax {
                offset: off,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    names: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            message: message.to_string(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    acc = ScalarExpr::node(Node::Add(acc, self.term()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    acc = ScalarExpr::node(Node::Sub(acc, self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, ExprError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    acc = ScalarExpr::node(Node::Mul(acc, self.unary()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    acc = ScalarExpr::node(Node::Div(acc, self.unary()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<ScalarExpr, ExprError> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(ScalarExpr::node(Node::Neg(self.unary()?)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<ScalarExpr, ExprError> {
        let base = self.base()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let r = self.rational()?;
            return Ok(ScalarExpr::node(Node::Pow(base, r)));
        }
        Ok(base)
    }

    fn rational(&mut self) -> Result<Rational, ExprError> {
        let parens = *self.peek() == Tok::Sym('(');
        if parens {
            self.bump();
        }
        let negative = *self.peek() == Tok::Sym('-');
        if negative {
            self.bump();
        }
        let mut r = self.decimal()?;
        if parens && *self.peek() == Tok::Sym('/') {
            self.bump();
            let d = self.decimal()?;
            if d.num == 0 {
                return Err(self.error("zero denominator in exponent"));
            }
            r = Rational::new(r.num * d.den, r.den * d.num);
        }
        if parens {
            self.expect(')')?;
        }
        Ok(if negative {
            Rational::new(-r.num, r.den)
        } else {
            r
        })
    }

    fn decimal(&mut self) -> Result<Rational, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(_, lit) => decimal_to_rational(&lit).ok_or(ExprError::Syntax {
                offset,
                message: format!("exponent `{lit}` is not a rational literal"),
            }),
            _ => Err(ExprError::Syntax {
                offset,
                message: "expected a rational exponent".into(),
            }),
        }
    }

    fn base(&mut self) -> Result<ScalarExpr, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(v, _) => Ok(ScalarExpr::constant(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(ScalarExpr::node(Node::Func(f, arg)));
                }
                if let Some(i) = self.names.iter().position(|n| *n == name) {
                    return Ok(ScalarExpr::coord(i));
                }
                if name == "pi" {
                    return Ok(ScalarExpr::constant(std::f64::consts::PI));
                }
                Err(ExprError::UnknownIdentifier { name, offset })
            }
            Tok::End => Err(ExprError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            Tok::Sym(c) => Err(ExprError::Syntax {
                offset,
                message: format!("unexpected `{c}`"),
            }),
        }
    }
}

/// Exact rational value of a plain decimal literal such as `2`, `0.5` or `1.25`.
fn decimal_to_rational(lit: &str) -> Option<Rational> {
    if lit.contains(['e', 'E']) {
        return None;
    }
    let (int, frac) = lit.split_once('.').unwrap_or((lit, ""));
    if frac.len() > 15 || int.len() + frac.len() > 18 {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: i64 = if digits.is_empty() {
        return None;
    } else {
        digits.parse().ok()?
    };
    Some(Rational::new(num, 10i64.pow(frac.len() as u32)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const XY: [&str; 2] = ["x", "y"];

    #[test]
    fn metric_entry_x_squared() {
        let e = ScalarExpr::parse("x^2", &["x", "y", "z"]).unwrap();
        assert_eq!(e.eval(&[2.0, 0.0, 0.0]).unwrap(), 4.0);
    }

    #[test]
    fn constant_one() {
        let e = ScalarExpr::parse("1", &XY).unwrap();
        assert_eq!(e.eval(&[3.0, -7.0]).unwrap(), 1.0);
        let h = e.eval_hyperdual(&[3.0, -7.0], 0, 1).unwrap();
        assert_eq!((h.d1, h.d2, h.d12), (0.0, 0.0, 0.0));
    }

    #[test]
    fn v_sec_theta() {
        let e = ScalarExpr::parse("v*sec(theta)", &["v", "theta"]).unwrap();
        let val = e.eval(&[2.0, PI / 3.0]).unwrap();
        assert!((val - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_partial_of_v_sec_theta() {
        let e = ScalarExpr::parse("v*sec(theta)", &["v", "theta"]).unwrap();
        let h = e.eval_hyperdual(&[1.0, PI / 4.0], 0, 1).unwrap();
        assert!((h.d12 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn power_rule() {
        let e = ScalarExpr::parse("x^2", &XY).unwrap();
        let h = e.eval_hyperdual(&[2.0, 0.0], 0, 0).unwrap();
        assert_eq!((h.value, h.d1, h.d12), (4.0, 4.0, 2.0));
    }

    #[test]
    fn precedence() {
        let e = ScalarExpr::parse("-x^2 + 2*y/4 - (x - y)", &XY).unwrap();
        assert_eq!(e.eval(&[3.0, 2.0]).unwrap(), -9.0 + 1.0 - 1.0);
        let e = ScalarExpr::parse("x^(1/2) * x^-1", &XY).unwrap();
        assert!((e.eval(&[4.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        let e = ScalarExpr::parse("x^0.5", &XY).unwrap();
        assert!((e.eval(&[9.0, 0.0]).unwrap() - 3.0).abs() < 1e-15);
        let e = ScalarExpr::parse("2*pi", &XY).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 2.0 * PI);
    }

    #[test]
    fn unknown_identifier() {
        let err = ScalarExpr::parse("x + z", &XY).unwrap_err();
        assert_eq!(
            err,
            ExprError::UnknownIdentifier {
                name: "z".into(),
                offset: 4
            }
        );
    }

    #[test]
    fn malformed_syntax() {
        for bad in ["x +", "(x", "sin x", "x ^ y", "x $ y", "x y", "", "1e"] {
            let r = ScalarExpr::parse(bad, &XY);
            assert!(r.is_err(), "`{bad}` should not parse, got {r:?}");
        }
    }

    #[test]
    fn division_flagged_and_checked_at_evaluation() {
        let e = ScalarExpr::parse("1/(x - y)", &XY).unwrap();
        assert!(e.has_division());
        assert!(matches!(e.eval(&[1.0, 1.0]), Err(ExprError::Domain(_))));
        assert!(!ScalarExpr::parse("x*y", &XY).unwrap().has_division());
    }

    #[test]
    fn domain_errors() {
        let ln = ScalarExpr::parse("ln(x)", &XY).unwrap();
        assert!(matches!(ln.eval(&[0.0, 0.0]), Err(ExprError::Domain(_))));
        assert!(matches!(ln.eval(&[-1.0, 0.0]), Err(ExprError::Domain(_))));
        let sec = ScalarExpr::parse("sec(x)", &XY).unwrap();
        assert!(matches!(
            sec.eval(&[PI / 2.0, 0.0]),
            Err(ExprError::Domain(_))
        ));
        let root = ScalarExpr::parse("x^(1/3)", &XY).unwrap();
        assert!(matches!(root.eval(&[-8.0, 0.0]), Err(ExprError::Domain(_))));
    }

    #[test]
    fn print_parse_roundtrip_examples() {
        for src in [
            "x^2 - -3*y",
            "v*sec(theta)",
            "exp(-x)*sinh(y)/cosh(x+y)^(3/2)",
            "abs(x - 0.1) + sqrt(1 + y^2) + ln(2 + x^2)",
            "-(x^-2)*tan(y)",
        ] {
            let names = ["x", "y", "v", "theta"];
            let e = ScalarExpr::parse(src, &names).unwrap();
            let printed = e.display(&names).to_string();
            let again = ScalarExpr::parse(&printed, &names).unwrap();
            assert_eq!(e, again, "{src} -> {printed}");
        }
    }

    #[test]
    fn substitution_composes() {
        let e = ScalarExpr::parse("x*y", &XY).unwrap();
        let s = ScalarExpr::parse("sin(x)", &XY).unwrap();
        let c = e.substitute(&|i| {
            if i == 0 {
                s.clone()
            } else {
                ScalarExpr::coord(1)
            }
        });
        assert!((c.eval(&[0.3, 2.0]).unwrap() - 0.3f64.sin() * 2.0).abs() < 1e-15);
        assert_eq!(
            e.shift_coords(3).coordinates(),
            [3, 4].into_iter().collect()
        );
    }

    #[test]
    fn folding() {
        let x = ScalarExpr::coord(0);
        assert!((x.clone() * 0.0).is_zero());
        assert_eq!(x.clone() * 1.0, x);
        assert_eq!(ScalarExpr::zero() + x.clone(), x);
        assert_eq!((2.0 * ScalarExpr::constant(3.0)).as_constant(), Some(6.0));
    }
}
