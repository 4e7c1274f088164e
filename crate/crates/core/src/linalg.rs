//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here is sized for system dimensions of a few to a few dozen:
//! row-major storage, no blocking, no sparse formats.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

/// Complex column vector.
#[derive(Clone, PartialEq)]
pub struct CVector {
    data: Vec<C64>,
}

impl CVector {
    pub fn new(data: Vec<C64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("vector", "dimension must be at least 1"));
        }
        if data.iter().any(|z| !z.is_finite()) {
            return Err(Error::invalid("vector", "entries must be finite"));
        }
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector dimension must be at least 1");
        Self {
            data: vec![C64::new(0.0, 0.0); dim],
        }
    }

    /// Standard basis vector `e_k`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.data[k] = C64::new(1.0, 0.0);
        v
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub(crate) fn from_vec_unchecked(data: Vec<C64>) -> Self {
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.data)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &CVector) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        inner(&self.data, &other.data)
    }

    pub fn scale(&self, s: C64) -> CVector {
        CVector {
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Returns the normalized vector, or `None` for a zero vector.
    pub fn normalized(&self) -> Option<CVector> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// Outer product `|self><other|`.
    pub fn outer(&self, other: &CVector) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), other.dim());
        for i in 0..self.dim() {
            for j in 0..other.dim() {
                m[(i, j)] = self.data[i] * other.data[j].conj();
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }
}

impl fmt::Debug for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.iter()).finish()
    }
}

impl Index<usize> for CVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.data[i]
    }
}

impl Add for &CVector {
    type Output = CVector;
    fn add(self, rhs: &CVector) -> CVector {
        assert_eq!(self.dim(), rhs.dim(), "vector add dimension mismatch");
        CVector {
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CVector {
    type Output = CVector;
    fn sub(self, rhs: &CVector) -> CVector {
        assert_eq!(self.dim(), rhs.dim(), "vector sub dimension mismatch");
        CVector {
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix", "dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                op: "CMatrix::new",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.is_finite()) {
            return Err(Error::invalid("matrix", "entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from rows of entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::invalid("matrix", "rows have different lengths"));
        }
        Self::new(n, m, rows.concat())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        norm_sqr(&self.data).sqrt()
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> CMatrix {
        (self + &self.adjoint()).scale_real(0.5)
    }

    /// `(M − M†)/(2i)`, Hermitian; `M = herm + i·this`.
    pub fn anti_hermitian_part(&self) -> CMatrix {
        (self - &self.adjoint()).scale(C64::new(0.0, -0.5))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && (self - &self.adjoint()).max_abs() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    /// `<u|M|v>`.
    pub fn sandwich(&self, u: &CVector, v: &CVector) -> C64 {
        assert_eq!(self.rows, u.dim(), "sandwich dimension mismatch");
        assert_eq!(self.cols, v.dim(), "sandwich dimension mismatch");
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            acc += u[i].conj() * dot(row, v.as_slice());
        }
        acc
    }

    /// Matrix product with dimension checking.
    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                op: "matmul",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Writes `M·src` into `dst` without allocating. Slices must match the
    /// matrix shape.
    #[inline]
    pub fn matvec_into(&self, src: &[C64], dst: &mut [C64]) {
        debug_assert_eq!(src.len(), self.cols);
        debug_assert_eq!(dst.len(), self.rows);
        for (i, out) in dst.iter_mut().enumerate() {
            *out = dot(&self.data[i * self.cols..(i + 1) * self.cols], src);
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[C64]> = self.data.chunks(self.cols).collect();
        f.debug_struct("CMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &rows)
            .finish()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "matrix add shape mismatch"
        );
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "matrix add shape mismatch"
        );
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "matrix sub shape mismatch"
        );
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Mul<&CVector> for &CMatrix {
    type Output = CVector;
    fn mul(self, rhs: &CVector) -> CVector {
        matvec(self, rhs).expect("matrix-vector shape mismatch")
    }
}

#[inline]
fn dot(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Matrix-vector product.
pub fn matvec(m: &CMatrix, v: &CVector) -> Result<CVector> {
    if m.cols() != v.dim() {
        return Err(Error::Dimension {
            op: "matvec",
            expected: m.cols(),
            found: v.dim(),
        });
    }
    let mut out = vec![C64::new(0.0, 0.0); m.rows()];
    m.matvec_into(v.as_slice(), &mut out);
    Ok(CVector::from_vec_unchecked(out))
}

/// 2×2 Hermitian matrix `[[a11, a12], [conj(a12), a22]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Herm2 {
    pub a11: f64,
    pub a22: f64,
    pub a12: C64,
}

impl Herm2 {
    pub fn new(a11: f64, a22: f64, a12: C64) -> Self {
        Self { a11, a22, a12 }
    }

    pub fn to_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(self.a11, 0.0);
        m[(1, 1)] = C64::new(self.a22, 0.0);
        m[(0, 1)] = self.a12;
        m[(1, 0)] = self.a12.conj();
        m
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12.norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a22.is_finite() && self.a12.is_finite()
    }
}

/// Eigenpairs of a [`Herm2`], values in descending order.
#[derive(Clone, Debug)]
pub struct Eigen2 {
    pub values: [f64; 2],
    pub vectors: [CVector; 2],
}

/// Closed-form eigendecomposition of a 2×2 Hermitian matrix.
///
/// Values are returned in descending order. A degenerate matrix returns the
/// standard basis; a diagonal matrix returns basis vectors with ties broken in
/// basis order.
pub fn eig_herm2(g: &Herm2) -> Eigen2 {
    let e1 = CVector::basis(2, 0);
    let e2 = CVector::basis(2, 1);
    let half_diff = 0.5 * (g.a11 - g.a22);
    let mean = 0.5 * (g.a11 + g.a22);
    let b = g.a12;

    if b == C64::new(0.0, 0.0) {
        return if g.a11 >= g.a22 {
            Eigen2 {
                values: [g.a11, g.a22],
                vectors: [e1, e2],
            }
        } else {
            Eigen2 {
                values: [g.a22, g.a11],
                vectors: [e2, e1],
            }
        };
    }

    let r = half_diff.hypot(b.norm());
    let hi = mean + r;
    let lo = mean - r;

    // Two algebraically equivalent eigenvectors of `hi`; pick the one whose
    // large component avoids cancellation.
    let (x, y) = if half_diff >= 0.0 {
        (C64::new(half_diff + r, 0.0), b.conj())
    } else {
        (b, C64::new(r - half_diff, 0.0))
    };
    let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
    let (x, y) = (x / n, y / n);
    let v1 = CVector::from_vec_unchecked(vec![x, y]);
    let v2 = CVector::from_vec_unchecked(vec![-y.conj(), x.conj()]);
    Eigen2 {
        values: [hi, lo],
        vectors: [v1, v2],
    }
}

/// One classical fourth-order Runge–Kutta step of `dv/dt = deriv(t, v)`.
pub fn rk4_step<F>(deriv: F, v: &CVector, t: f64, dt: f64) -> Result<CVector>
where
    F: Fn(f64, &CVector) -> CVector,
{
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "timestep must be positive"));
    }
    let axpy = |a: &CVector, k: &CVector, s: f64| -> CVector {
        CVector::from_vec_unchecked(a.as_slice().iter().zip(k.as_slice()).map(|(x, y)| x + y * s).collect())
    };
    let k1 = deriv(t, v);
    let k2 = deriv(t + 0.5 * dt, &axpy(v, &k1, 0.5 * dt));
    let k3 = deriv(t + 0.5 * dt, &axpy(v, &k2, 0.5 * dt));
    let k4 = deriv(t + dt, &axpy(v, &k3, dt));
    let out: Vec<C64> = (0..v.dim())
        .map(|i| v[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0))
        .collect();
    let out = CVector::from_vec_unchecked(out);
    if !out.is_finite() {
        return Err(Error::Propagation { t: t + dt });
    }
    Ok(out)
}

/// Right-hand side `−i·H·v` of a Schrödinger-type equation.
pub fn schrodinger_rhs(h: &CMatrix) -> impl Fn(f64, &CVector) -> CVector + '_ {
    move |_, v| (h * v).scale(-I)
}

/// The matrix that one RK4 step of size `dt` applies for a constant
/// generator `−i·H`: `1 + A + A²/2 + A³/6 + A⁴/24` with `A = −i·H·dt`.
pub fn rk4_propagator(h: &CMatrix, dt: f64) -> CMatrix {
    assert!(h.is_square(), "generator must be square");
    let a = h.scale(-I * dt);
    let n = h.rows();
    let mut out = CMatrix::identity(n);
    let mut term = CMatrix::identity(n);
    for k in 1..=4 {
        term = (&term * &a).scale_real(1.0 / k as f64);
        out += &term;
    }
    out
}

/// Cholesky-based positive-semidefiniteness test for Hermitian matrices,
/// accepting eigenvalues down to `-tol`.
pub fn is_positive_semidefinite(m: &CMatrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.rows();
    let mut a = m.hermitian_part();
    for i in 0..n {
        a[(i, i)] += C64::new(tol, 0.0);
    }
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d < 0.0 {
            return false;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = if djj > 0.0 { s / djj } else { C64::new(0.0, 0.0) };
        }
    }
    true
}

/// Two-level operators in the basis `index 0 = ground, index 1 = excited`.
pub mod two_level {
    use super::*;

    /// Lowering operator `σ⁻ = |g><e|`.
    pub fn sigma_minus() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap()
    }

    pub fn sigma_plus() -> CMatrix {
        sigma_minus().adjoint()
    }

    /// Excited-state projector `σ⁺σ⁻`.
    pub fn excited_projector() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]).unwrap()
    }

    pub fn sigma_x() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn sigma_y() -> CMatrix {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = -I;
        m[(1, 0)] = I;
        m
    }

    /// `σ_z = |e><e| − |g><g|`.
    pub fn sigma_z() -> CMatrix {
        CMatrix::from_real_rows(&[&[-1.0, 0.0], &[0.0, 1.0]]).unwrap()
    }

    pub fn ground() -> CVector {
        CVector::basis(2, 0)
    }

    pub fn excited() -> CVector {
        CVector::basis(2, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::two_level::*;
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matvec_identity() {
        let v = CVector::from_real(&[1.0, 0.0]).unwrap();
        assert_eq!(matvec(&CMatrix::identity(2), &v).unwrap(), v);
    }

    #[test]
    fn matvec_lowering_takes_excited_to_ground() {
        assert_eq!(matvec(&sigma_minus(), &excited()).unwrap(), ground());
    }

    #[test]
    fn matvec_pauli_y() {
        let out = matvec(&sigma_y(), &ground()).unwrap();
        assert_eq!(out.as_slice(), &[c(0.0, 0.0), c(0.0, 1.0)]);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let err = matvec(&CMatrix::identity(3), &ground()).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(CVector::new(vec![c(f64::NAN, 0.0)]).is_err());
        assert!(CMatrix::new(1, 1, vec![c(f64::INFINITY, 0.0)]).is_err());
        assert!(CMatrix::new(2, 2, vec![c(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn eig_diagonal() {
        let e = eig_herm2(&Herm2::new(3.0, 2.0, c(0.0, 0.0)));
        assert_eq!(e.values, [3.0, 2.0]);
        assert_eq!(e.vectors[0], CVector::basis(2, 0));
        assert_eq!(e.vectors[1], CVector::basis(2, 1));

        let e = eig_herm2(&Herm2::new(2.0, 3.0, c(0.0, 0.0)));
        assert_eq!(e.values, [3.0, 2.0]);
        assert_eq!(e.vectors[0], CVector::basis(2, 1));
    }

    #[test]
    fn eig_degenerate_returns_standard_basis() {
        let e = eig_herm2(&Herm2::new(1.5, 1.5, c(0.0, 0.0)));
        assert_eq!(e.values, [1.5, 1.5]);
        assert_eq!(e.vectors[0], CVector::basis(2, 0));
        assert_eq!(e.vectors[1], CVector::basis(2, 1));
    }

    #[test]
    fn eig_vacuum_correlation_matrix() {
        let e = eig_herm2(&Herm2::new(1.0, 0.0, c(0.0, 0.0)));
        assert_eq!(e.values, [1.0, 0.0]);
    }

    #[test]
    fn eig_perfect_squeezing_n1() {
        let s = 2f64.sqrt();
        let e = eig_herm2(&Herm2::new(2.0, 1.0, c(-s, 0.0)));
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 0.0, epsilon = 1e-14);
    }

    fn reconstruct(e: &Eigen2) -> CMatrix {
        let mut m = CMatrix::zeros(2, 2);
        for k in 0..2 {
            m += &e.vectors[k].outer(&e.vectors[k]).scale_real(e.values[k]);
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn eig_reconstructs_and_is_orthonormal(
            a11 in -10.0f64..10.0,
            a22 in -10.0f64..10.0,
            re in -10.0f64..10.0,
            im in -10.0f64..10.0,
        ) {
            let g = Herm2::new(a11, a22, c(re, im));
            let e = eig_herm2(&g);
            prop_assert!(e.values[0] >= e.values[1]);
            let scale = g.to_matrix().norm_fro().max(1e-300);
            let err = (&reconstruct(&e) - &g.to_matrix()).norm_fro() / scale;
            prop_assert!(err <= 1e-12, "reconstruction error {err}");
            let [u, v] = &e.vectors;
            prop_assert!((u.norm_sqr() - 1.0).abs() <= 1e-12);
            prop_assert!((v.norm_sqr() - 1.0).abs() <= 1e-12);
            prop_assert!(u.inner(v).norm() <= 1e-12);
        }
    }

    #[test]
    fn rk4_null_generator_is_identity() {
        let h = CMatrix::zeros(2, 2);
        let v = CVector::new(vec![c(0.6, 0.1), c(-0.2, 0.7)]).unwrap();
        let out = rk4_step(schrodinger_rhs(&h), &v, 0.0, 0.1).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn rk4_hermitian_step_preserves_norm_to_fifth_order() {
        let h = &sigma_x().scale_real(3.0) + &sigma_z().scale_real(1.3);
        let v = CVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        for dt in [1e-2, 1e-3] {
            let out = rk4_step(schrodinger_rhs(&h), &v, 0.0, dt).unwrap();
            let drift = (out.norm_sqr() - 1.0).abs();
            // |λ|≈3.27; the leading norm defect of RK4 is O((|λ|dt)^6)/72.
            assert!(drift <= (3.3 * dt).powi(5), "dt={dt} drift={drift}");
        }
    }

    fn decay_error(dt: f64) -> f64 {
        // H_eff = (ω − iγ/2)σ⁺σ⁻, excited start, exact |ψ|² = e^{−γt}.
        let gamma = 1.0;
        let h = excited_projector().scale(c(2.0, -gamma / 2.0));
        let t_end = 2.0;
        let n = (t_end / dt).round() as usize;
        let mut v = excited();
        for k in 0..n {
            v = rk4_step(schrodinger_rhs(&h), &v, k as f64 * dt, dt).unwrap();
        }
        (v.norm_sqr() - (-gamma * t_end).exp()).abs()
    }

    #[test]
    fn rk4_decay_matches_analytic_solution() {
        assert!(decay_error(1e-3) < 1e-12);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let ratio = decay_error(0.1) / decay_error(0.05);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn rk4_rejects_bad_step_and_reports_blowup() {
        let h = CMatrix::identity(1);
        let v = CVector::basis(1, 0);
        assert!(rk4_step(schrodinger_rhs(&h), &v, 0.0, 0.0).is_err());
        let blow = |_: f64, x: &CVector| x.scale(c(f64::MAX, 0.0));
        match rk4_step(blow, &v, 1.5, 1.0) {
            Err(Error::Propagation { t }) => assert_eq!(t, 2.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn propagator_matches_rk4_step() {
        let h = &(&sigma_x().scale_real(5.0) + &excited_projector().scale(c(0.3, -0.5))) + &sigma_y().scale_real(0.2);
        let v = CVector::new(vec![c(0.3, -0.4), c(0.5, 0.7)]).unwrap();
        let dt = 0.013;
        let a = rk4_step(schrodinger_rhs(&h), &v, 0.0, dt).unwrap();
        let b = &rk4_propagator(&h, dt) * &v;
        assert!((&a - &b).norm() < 1e-15);
    }

    #[test]
    fn psd_test() {
        assert!(is_positive_semidefinite(&excited_projector(), 1e-12));
        assert!(!is_positive_semidefinite(&sigma_z(), 1e-12));
        let rho = CMatrix::identity(3).scale_real(1.0 / 3.0);
        assert!(is_positive_semidefinite(&rho, 0.0));
    }
}
