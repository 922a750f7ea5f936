//! Small dense matrices generic over [`Number`].
//!
//! Dimensions in this crate never exceed a handful of rows, so everything is
//! a row-major `Vec`. LU, solves and inverses work for dual-number entries
//! (pivoting looks at the real part), which is how directional derivatives
//! of projected quantities are obtained exactly.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::hyperdual::Number;

/// Pivots smaller than this in absolute value are treated as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("matrix is singular (pivot {pivot:e} in column {column})")]
pub struct Singular {
    pub column: usize,
    pub pivot: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type Vector<T = f64> = Vec<T>;

impl<T: Number> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vector<T>]) -> Self {
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn diagonal(d: &[T]) -> Self {
        Self::from_fn(
            d.len(),
            d.len(),
            |i, j| if i == j { d[i] } else { T::zero() },
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vector<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> Vector<T> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn columns(&self) -> Vec<Vector<T>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map<U: Number>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn mul(&self, o: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, o.rows, "dimension mismatch in product");
        Mat::from_fn(self.rows, o.cols, |i, j| {
            let mut s = T::zero();
            for k in 0..self.cols {
                s += self[(i, k)] * o[(k, j)];
            }
            s
        })
    }

    pub fn mul_vec(&self, v: &[T]) -> Vector<T> {
        assert_eq!(
            self.cols,
            v.len(),
            "dimension mismatch in matrix-vector product"
        );
        (0..self.rows)
            .map(|i| {
                let mut s = T::zero();
                for k in 0..self.cols {
                    s += self[(i, k)] * v[k];
                }
                s
            })
            .collect()
    }

    pub fn add(&self, o: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + o[(i, j)])
    }

    pub fn sub(&self, o: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - o[(i, j)])
    }

    pub fn scale(&self, k: T) -> Mat<T> {
        self.map(|x| x * k)
    }

    /// Bilinear form `aᵀ M b`.
    pub fn bilinear(&self, a: &[T], b: &[T]) -> T {
        let mb = self.mul_vec(b);
        dot(a, &mb)
    }

    /// Largest absolute real part of any entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.re().abs()).fold(0.0, f64::max)
    }

    pub fn re(&self) -> Mat<f64> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.re()).collect(),
        }
    }

    pub fn lu(&self) -> Result<Lu<T>, Singular> {
        Lu::new(self)
    }

    pub fn inverse(&self) -> Result<Mat<T>, Singular> {
        Ok(self.lu()?.inverse())
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Number>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

pub fn axpy<T: Number>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

pub fn vsub<T: Number>(a: &[T], b: &[T]) -> Vector<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn vadd<T: Number>(a: &[T], b: &[T]) -> Vector<T> {
    a.iter().zip(b).map(|(x, y)| *x + *y).collect()
}

pub fn vscale<T: Number>(k: T, a: &[T]) -> Vector<T> {
    a.iter().map(|x| k * *x).collect()
}

/// Largest absolute real part of a vector's components.
pub fn max_abs<T: Number>(v: &[T]) -> f64 {
    v.iter().map(|x| x.re().abs()).fold(0.0, f64::max)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
    sign: f64,
}

impl<T: Number> Lu<T> {
    pub fn new(a: &Mat<T>) -> Result<Self, Singular> {
        assert_eq!(a.rows, a.cols, "LU requires a square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].re().abs().total_cmp(&lu[(j, k)].re().abs()))
                .unwrap_or(k);
            let pivot = lu[(p, k)].re();
            if pivot.abs() < PIVOT_THRESHOLD || !pivot.is_finite() {
                return Err(Singular { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                let factor = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let ukj = lu[(k, j)];
                    lu[(i, j)] -= factor * ukj;
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn solve_vec(&self, b: &[T]) -> Vector<T> {
        let n = self.lu.rows;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= l * xk;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= u * xk;
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &Mat<T>) -> Mat<T> {
        let cols: Vec<Vector<T>> = (0..b.cols).map(|j| self.solve_vec(&b.column(j))).collect();
        Mat::from_columns(b.rows, &cols)
    }

    pub fn inverse(&self) -> Mat<T> {
        self.solve(&Mat::identity(self.lu.rows))
    }

    pub fn det(&self) -> T {
        let mut d = T::from_f64(self.sign);
        for i in 0..self.lu.rows {
            d *= self.lu[(i, i)];
        }
        d
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Mat<f64>) -> Vec<f64> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 * (1.0 + m.max_abs().powi(2)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Singular values by one-sided Jacobi (Hestenes), descending.
pub fn singular_values(a: &Mat<f64>) -> Vec<f64> {
    let (rows, cols) = (a.rows, a.cols);
    let mut u = a.clone();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols).map(|j| norm(&u.column(j))).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Basis of the right nullspace of `a` via reduced row echelon form with
/// complete column search; entries below `tol · max|a|` count as zero.
pub fn nullspace(a: &Mat<f64>, tol: f64) -> Vec<Vector<f64>> {
    let (rows, cols) = (a.rows, a.cols);
    let mut m = a.clone();
    let scale = m.max_abs().max(1.0);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let p = (r..rows)
            .max_by(|&i, &j| m[(i, c)].abs().total_cmp(&m[(j, c)].abs()))
            .unwrap();
        if m[(p, c)].abs() <= tol * scale {
            continue;
        }
        for j in 0..cols {
            let tmp = m[(r, j)];
            m[(r, j)] = m[(p, j)];
            m[(p, j)] = tmp;
        }
        let piv = m[(r, c)];
        for j in 0..cols {
            m[(r, j)] /= piv;
        }
        for i in 0..rows {
            if i != r {
                let f = m[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        m[(i, j)] -= f * m[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![0.0; cols];
            v[f] = 1.0;
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[(row, f)];
            }
            v
        })
        .collect()
}

/// Least-squares solution of `A x ≈ b` via the normal equations.
pub fn least_squares(a: &Mat<f64>, b: &[f64]) -> Result<Vector<f64>, Singular> {
    let at = a.transpose();
    let ata = at.mul(a);
    let atb = at.mul_vec(b);
    Ok(ata.lu()?.solve_vec(&atb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperdual::Dual;

    #[test]
    fn lu_inverse_roundtrip() {
        let a = Mat::from_row_major(3, 3, vec![4.0, 1.0, 2.0, 1.0, -3.0, 0.5, 2.0, 0.5, 5.0]);
        let inv = a.inverse().unwrap();
        let id = a.mul(&inv);
        assert!(id.sub(&Mat::identity(3)).max_abs() < 1e-14);
        let det = a.lu().unwrap().det();
        // cofactor expansion
        let expect = 4.0 * (-15.0 - 0.25) - 1.0 * (5.0 - 1.0) + 2.0 * (0.5 + 6.0);
        assert!((det - expect).abs() < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let a = Mat::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(a.lu().is_err());
    }

    #[test]
    fn dual_inverse_derivative() {
        // d/ds (A + sB)^-1 = -A^-1 B A^-1
        let a = Mat::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 3.0]);
        let b = Mat::from_row_major(2, 2, vec![0.5, -1.0, 0.0, 2.0]);
        let ad = Mat::from_fn(2, 2, |i, j| Dual::new(a[(i, j)], b[(i, j)]));
        let inv = ad.inverse().unwrap();
        let ai = a.inverse().unwrap();
        let expect = ai.mul(&b).mul(&ai).scale(-1.0);
        let got = inv.map(|x| x.eps);
        assert!(got.sub(&expect).max_abs() < 1e-14);
    }

    #[test]
    fn jacobi_eigenvalues_signature() {
        let a = Mat::diagonal(&[4.0, 1.0, -4.0, -1.0, 1.0]);
        let ev = symmetric_eigenvalues(&a);
        assert_eq!(ev, vec![-4.0, -1.0, 1.0, 1.0, 4.0]);
        let b = Mat::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let ev = symmetric_eigenvalues(&b);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_values_rank_deficient() {
        let a = Mat::from_row_major(3, 3, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let sv = singular_values(&a);
        assert_eq!(sv, vec![1.0, 1.0, 0.0]);
        let b = Mat::from_row_major(2, 2, vec![3.0, 0.0, 4.0, 5.0]);
        let sv = singular_values(&b);
        // σ² are eigenvalues of BᵀB = [[25, 20], [20, 25]] -> 45, 5
        assert!((sv[0] - 45f64.sqrt()).abs() < 1e-13);
        assert!((sv[1] - 5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn nullspace_of_wide_matrix() {
        let a = Mat::from_row_major(2, 4, vec![1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, -1.0]);
        let ns = nullspace(&a, 1e-12);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(max_abs(&a.mul_vec(v)) < 1e-14);
        }
    }
}
