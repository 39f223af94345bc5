//! Quaternion arithmetic and the complex-matrix kernel.
//!
//! Provides the embedding `M(q)` of the quaternions into 2x2 complex
//! matrices, dense complex matrices with the small amount of linear algebra
//! the rest of the library needs, block-quaternionic pattern tests, and
//! Hermitian inverse square roots via cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::scalar::{cx, rl, Real, C};
use serde::{Deserialize, Serialize};

/// A quaternion q = w + x i + y j + z k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<T: Real> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quaternion<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn zero() -> Self {
        Quaternion::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn one() -> Self {
        Quaternion::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn i() -> Self {
        Quaternion::new(T::zero(), T::one(), T::zero(), T::zero())
    }

    pub fn j() -> Self {
        Quaternion::new(T::zero(), T::zero(), T::one(), T::zero())
    }

    pub fn k() -> Self {
        Quaternion::new(T::zero(), T::zero(), T::zero(), T::one())
    }

    /// Build from the complex pair q = a + b j.
    pub fn from_complex_pair(a: C<T>, b: C<T>) -> Self {
        Quaternion::new(a.re, a.im, b.re, b.im)
    }

    /// The complex pair (a, b) with q = a + b j.
    pub fn complex_pair(&self) -> (C<T>, C<T>) {
        (C::new(self.w, self.x), C::new(self.y, self.z))
    }

    pub fn conj(&self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sq(&self) -> T {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Norm of the imaginary (vector) part.
    pub fn imag_norm(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn inverse(&self) -> Result<Self> {
        let n = self.norm_sq();
        if n == T::zero() {
            return Err(Error::SingularSystem("zero quaternion inverse".into()));
        }
        Ok(self.conj().scale(T::one() / n))
    }
}

impl<T: Real> std::ops::Add for Quaternion<T> {
    type Output = Quaternion<T>;
    fn add(self, o: Self) -> Self {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> std::ops::Sub for Quaternion<T> {
    type Output = Quaternion<T>;
    fn sub(self, o: Self) -> Self {
        Quaternion::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> std::ops::Neg for Quaternion<T> {
    type Output = Quaternion<T>;
    fn neg(self) -> Self {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl<T: Real> std::ops::Mul for Quaternion<T> {
    type Output = Quaternion<T>;
    /// Hamilton product from the i j k table.
    fn mul(self, o: Self) -> Self {
        Quaternion::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix<T: Real> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// 2x2 matrix from row-major entries.
    pub fn two_by_two(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> Self {
        CMatrix {
            rows: 2,
            cols: 2,
            data: vec![a, b, c, d],
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn dagger(&self) -> Self {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].conj())
    }

    pub fn scale(&self, s: C<T>) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "add shape");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "sub shape");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "mul shape");
        let mut out = CMatrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..o.cols {
                    out[(i, j)] = out[(i, j)] + a * o[(k, j)];
                }
            }
        }
        out
    }

    pub fn commutator(&self, o: &Self) -> Self {
        self.mul(o).sub(&o.mul(self))
    }

    pub fn trace(&self) -> C<T> {
        let mut t = C::new(T::zero(), T::zero());
        for i in 0..self.rows.min(self.cols) {
            t = t + self[(i, i)];
        }
        t
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .map(|v| v.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Residual from being Hermitian (Frobenius norm of M - M^dagger).
    pub fn hermitian_residual(&self) -> T {
        self.sub(&self.dagger()).frobenius_norm()
    }

    /// Stack vertically: self on top of `o`.
    pub fn vstack(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.cols, "vstack shape");
        let mut m = CMatrix::zeros(self.rows + o.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..o.rows {
            for j in 0..self.cols {
                m[(self.rows + i, j)] = o[(i, j)];
            }
        }
        m
    }

    /// Stack horizontally: self to the left of `o`.
    pub fn hstack(&self, o: &Self) -> Self {
        assert_eq!(self.rows, o.rows, "hstack shape");
        let mut m = CMatrix::zeros(self.rows, self.cols + o.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self[(i, j)];
            }
            for j in 0..o.cols {
                m[(i, self.cols + j)] = o[(i, j)];
            }
        }
        m
    }

    /// Copy a sub-block into this matrix with top-left corner (r, c).
    pub fn set_block(&mut self, r: usize, c: usize, b: &Self) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r + i, c + j)] = b[(i, j)];
            }
        }
    }

    /// Extract the sub-block of shape (rows, cols) at (r, c).
    pub fn block(&self, r: usize, c: usize, rows: usize, cols: usize) -> Self {
        CMatrix::from_fn(rows, cols, |i, j| self[(r + i, c + j)])
    }

    /// Solve self * X = B by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &Self) -> Result<Self> {
        if !self.is_square() || self.rows != b.rows {
            return Err(Error::Shape(format!(
                "solve: {}x{} vs {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let n = self.rows;
        let m = b.cols;
        let mut a = self.clone();
        let mut x = b.clone();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[(col, col)].norm();
            for r in col + 1..n {
                let v = a[(r, col)].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= T::epsilon() * rl::<T>(1e3) * (T::one() + a.frobenius_norm()) {
                return Err(Error::SingularSystem(format!("pivot {:e} at column {col}", {
                    let b64: f64 = best.to_f64().unwrap_or(0.0);
                    b64
                })));
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(col * n + j, piv * n + j);
                }
                for j in 0..m {
                    x.data.swap(col * m + j, piv * m + j);
                }
            }
            let d = a[(col, col)];
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)] / d;
                if f.re == T::zero() && f.im == T::zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] = a[(r, j)] - f * v;
                }
                for j in 0..m {
                    let v = x[(col, j)];
                    x[(r, j)] = x[(r, j)] - f * v;
                }
            }
        }
        for r in 0..n {
            let d = a[(r, r)];
            for j in 0..m {
                x[(r, j)] = x[(r, j)] / d;
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.solve(&CMatrix::identity(self.rows))
    }

    /// Matrix exponential by scaling and squaring with a Taylor kernel.
    pub fn expm(&self) -> Self {
        assert!(self.is_square(), "expm needs a square matrix");
        let norm = self.frobenius_norm();
        let mut s = 0u32;
        let mut scaled = self.clone();
        let half = rl::<T>(0.5);
        let mut nf = norm;
        while nf > half {
            nf = nf * half;
            s += 1;
        }
        if s > 0 {
            let f = C::new(T::one() / rl::<T>(f64::from(1u32 << s.min(30))), T::zero());
            // for very large s fall back to repeated halving
            if s <= 30 {
                scaled = scaled.scale(f);
            } else {
                for _ in 0..s {
                    scaled = scaled.scale(cx(0.5, 0.0));
                }
            }
        }
        let n = self.rows;
        let mut term = CMatrix::identity(n);
        let mut sum = CMatrix::identity(n);
        for k in 1..=16 {
            term = term.mul(&scaled).scale(C::new(T::one() / rl::<T>(k as f64), T::zero()));
            sum = sum.add(&term);
        }
        for _ in 0..s {
            sum = sum.mul(&sum);
        }
        sum
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        let c = self.cols;
        &mut self.data[i * c + j]
    }
}

/// Closed-form exponential of a 2x2 complex matrix.
///
/// Splits off the trace and uses A^2 = -det(A) I for the traceless part,
/// with a series fallback near the degenerate case.
pub fn exp2x2<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    assert!(a.rows == 2 && a.cols == 2, "exp2x2 needs 2x2");
    let half = cx::<T>(0.5, 0.0);
    let tr = a.trace();
    let mean = tr * half;
    let a0 = a.sub(&CMatrix::identity(2).scale(mean));
    // a0 is traceless: a0^2 = -det(a0) I = mu^2 I
    let det0 = a0[(0, 0)] * a0[(1, 1)] - a0[(0, 1)] * a0[(1, 0)];
    let mu2 = -det0;
    let mu = mu2.sqrt();
    let (ch, shm) = if mu.norm() < rl::<T>(1e-6) {
        // cosh(mu) ~ 1 + mu^2/2, sinh(mu)/mu ~ 1 + mu^2/6
        (
            C::new(T::one(), T::zero()) + mu2 * half,
            C::new(T::one(), T::zero()) + mu2 / cx::<T>(6.0, 0.0),
        )
    } else {
        let e = mu.exp();
        let einv = (-mu).exp();
        ((e + einv) * half, (e - einv) * half / mu)
    };
    let pref = mean.exp();
    CMatrix::identity(2)
        .scale(ch)
        .add(&a0.scale(shm))
        .scale(pref)
}

/// The 2x2 complex matrix M(q) representing right multiplication by q,
/// with q = a + b j written through its complex pair (a, b).
pub fn embed<T: Real>(q: &Quaternion<T>) -> CMatrix<T> {
    let (a, b) = q.complex_pair();
    CMatrix::two_by_two(a, -b.conj(), b, a.conj())
}

/// Inverse of [`embed`]; errors if the block pattern is violated beyond tol.
pub fn extract<T: Real>(m: &CMatrix<T>, tol: T) -> Result<Quaternion<T>> {
    if m.rows != 2 || m.cols != 2 {
        return Err(Error::Shape("extract expects 2x2".into()));
    }
    let a = (m[(0, 0)] + m[(1, 1)].conj()).scale(rl(0.5));
    let b = (m[(1, 0)] - m[(0, 1)].conj()).scale(rl(0.5));
    let resid = ((m[(0, 0)] - m[(1, 1)].conj()).norm_sqr()
        + (m[(1, 0)] + m[(0, 1)].conj()).norm_sqr())
    .sqrt();
    let scale = T::one().max(m.frobenius_norm());
    if resid > tol * scale {
        return Err(Error::NotQuaternionic {
            residual: resid.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Quaternion::from_complex_pair(a, b))
}

trait ComplexScale<T: Real> {
    fn scale(self, s: T) -> Self;
}

impl<T: Real> ComplexScale<T> for C<T> {
    fn scale(self, s: T) -> Self {
        C::new(self.re * s, self.im * s)
    }
}

/// True iff every 2x2 block of M matches the M(q) pattern within tol.
pub fn is_quaternionic_block<T: Real>(m: &CMatrix<T>, tol: T) -> Result<bool> {
    if m.rows % 2 != 0 || m.cols % 2 != 0 {
        return Err(Error::Shape("is_quaternionic_block expects even dimensions".into()));
    }
    let scale = T::one().max(m.max_abs());
    for bi in 0..m.rows / 2 {
        for bj in 0..m.cols / 2 {
            let a = m[(2 * bi, 2 * bj)];
            let b = m[(2 * bi, 2 * bj + 1)];
            let c = m[(2 * bi + 1, 2 * bj)];
            let d = m[(2 * bi + 1, 2 * bj + 1)];
            let resid = ((a - d.conj()).norm_sqr() + (c + b.conj()).norm_sqr()).sqrt();
            if resid > tol * scale {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Matrix with quaternion entries; complexifies to 2x2 M(q) blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuatMatrix<T: Real> {
    pub qrows: usize,
    pub qcols: usize,
    pub entries: Vec<Quaternion<T>>,
}

impl<T: Real> QuatMatrix<T> {
    pub fn zeros(qrows: usize, qcols: usize) -> Self {
        QuatMatrix {
            qrows,
            qcols,
            entries: vec![Quaternion::zero(); qrows * qcols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = QuatMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Quaternion::one();
        }
        m
    }

    pub fn from_fn(qrows: usize, qcols: usize, mut f: impl FnMut(usize, usize) -> Quaternion<T>) -> Self {
        let mut m = QuatMatrix::zeros(qrows, qcols);
        for i in 0..qrows {
            for j in 0..qcols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.qcols, o.qrows, "quat mul shape");
        QuatMatrix::from_fn(self.qrows, o.qcols, |i, j| {
            let mut s = Quaternion::zero();
            for k in 0..self.qcols {
                s = s + self[(i, k)] * o[(k, j)];
            }
            s
        })
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.qrows, self.qcols), (o.qrows, o.qcols), "quat sub shape");
        QuatMatrix::from_fn(self.qrows, self.qcols, |i, j| self[(i, j)] - o[(i, j)])
    }

    pub fn frobenius_norm(&self) -> T {
        self.entries
            .iter()
            .map(|q| q.norm_sq())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Frobenius norm of the imaginary parts of all entries.
    pub fn imag_norm(&self) -> T {
        self.entries
            .iter()
            .map(|q| q.x * q.x + q.y * q.y + q.z * q.z)
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Entrywise quaternion conjugation.
    pub fn conj_entries(&self) -> Self {
        QuatMatrix::from_fn(self.qrows, self.qcols, |i, j| self[(i, j)].conj())
    }

    /// Replace each entry by M(q); shape doubles to (2 qrows) x (2 qcols).
    pub fn complexify(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(2 * self.qrows, 2 * self.qcols);
        for i in 0..self.qrows {
            for j in 0..self.qcols {
                m.set_block(2 * i, 2 * j, &embed(&self[(i, j)]));
            }
        }
        m
    }

    /// Recover the quaternionic matrix from a block-pattern complex matrix.
    pub fn from_complex(m: &CMatrix<T>, tol: T) -> Result<Self> {
        if m.rows % 2 != 0 || m.cols % 2 != 0 {
            return Err(Error::Shape("from_complex expects even dimensions".into()));
        }
        let qr = m.rows / 2;
        let qc = m.cols / 2;
        let mut out = QuatMatrix::zeros(qr, qc);
        for i in 0..qr {
            for j in 0..qc {
                out[(i, j)] = extract(&m.block(2 * i, 2 * j, 2, 2), tol)?;
            }
        }
        Ok(out)
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for QuatMatrix<T> {
    type Output = Quaternion<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Quaternion<T> {
        &self.entries[i * self.qcols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for QuatMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Quaternion<T> {
        let c = self.qcols;
        &mut self.entries[i * c + j]
    }
}

/// The quaternionic conjugate transpose, using M(q)^dagger = M(conj q).
pub fn quat_conj_transpose<T: Real>(m: &QuatMatrix<T>) -> QuatMatrix<T> {
    QuatMatrix::from_fn(m.qcols, m.qrows, |i, j| m[(j, i)].conj())
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns (eigenvalues ascending, unitary V with H = V diag V^dagger).
pub fn hermitian_eigen<T: Real>(h: &CMatrix<T>, tol: T) -> Result<(Vec<T>, CMatrix<T>)> {
    if !h.is_square() {
        return Err(Error::Shape("hermitian_eigen expects square".into()));
    }
    let scale = T::one().max(h.frobenius_norm());
    let herm_resid = h.hermitian_residual();
    if herm_resid > tol * scale * rl(10.0) {
        return Err(Error::NotHermitian {
            residual: herm_resid.to_f64().unwrap_or(f64::NAN),
        });
    }
    let n = h.rows;
    // symmetrize to kill roundoff asymmetry
    let mut a = h.add(&h.dagger()).scale(cx(0.5, 0.0));
    let mut v = CMatrix::identity(n);
    let thresh = rl::<T>(1e-13) * scale;
    for _sweep in 0..60 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= thresh {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.norm() <= thresh * rl(1e-3) {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let absq = apq.norm();
                let phase = apq / C::new(absq, T::zero());
                // rotation angle zeroing the off-diagonal entry
                let diff = app - aqq;
                let theta = (rl::<T>(2.0) * absq).atan2(diff) / rl::<T>(2.0);
                let c = theta.cos();
                let s = theta.sin();
                let cp = C::new(c, T::zero());
                let sp = phase.scale(s);
                // columns p, q of A and V: right-multiply by rotation J
                // J = [[c, -s*phase],[s*conj(phase)... ]] built so J^dagger A J diagonalizes
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * cp + aiq * sp.conj();
                    a[(i, q)] = -aip * sp + aiq * cp;
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * cp + viq * sp.conj();
                    v[(i, q)] = -vip * sp + viq * cp;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = cp.conj() * apj + sp * aqj;
                    a[(q, j)] = -sp.conj() * apj + cp * aqj;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let eig: Vec<T> = (0..n).map(|i| a[(i, i)].re).collect();
    idx.sort_by(|&i, &j| eig[i].partial_cmp(&eig[j]).unwrap());
    let eig_sorted: Vec<T> = idx.iter().map(|&i| eig[i]).collect();
    let v_sorted = CMatrix::from_fn(n, n, |i, j| v[(i, idx[j])]);
    Ok((eig_sorted, v_sorted))
}

/// Inverse square root of a Hermitian positive definite matrix.
pub fn hermitian_inv_sqrt<T: Real>(h: &CMatrix<T>, tol: T) -> Result<CMatrix<T>> {
    let (eig, v) = hermitian_eigen(h, tol)?;
    if let Some(&min) = eig.first() {
        if min <= tol {
            return Err(Error::NotPositiveDefinite {
                eigenvalue: min.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let n = h.rows;
    let mut d = CMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = C::new(T::one() / eig[i].sqrt(), T::zero());
    }
    Ok(v.mul(&d).mul(&v.dagger()))
}

/// Inverse square root by the Denman-Beavers iteration.
///
/// Valid for any matrix with no eigenvalues on the closed negative real
/// axis; used on holomorphic extensions of Hermitian positive definite
/// matrices, where the Jacobi route does not apply.
pub fn inv_sqrt_denman_beavers<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    if !m.is_square() {
        return Err(Error::Shape("inv_sqrt expects square".into()));
    }
    let n = m.rows;
    let mut y = m.clone();
    let mut z = CMatrix::identity(n);
    let half = cx::<T>(0.5, 0.0);
    let tol = T::epsilon() * rl::<T>(64.0) * (T::one() + m.frobenius_norm());
    for _ in 0..80 {
        let yi = y.inverse()?;
        let zi = z.inverse()?;
        let y_next = y.add(&zi).scale(half);
        let z_next = z.add(&yi).scale(half);
        let delta = y_next.sub(&y).frobenius_norm();
        y = y_next;
        z = z_next;
        if delta <= tol {
            break;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Q = Quaternion<f64>;

    fn qc(w: f64, x: f64, y: f64, z: f64) -> Q {
        Quaternion::new(w, x, y, z)
    }

    #[test]
    fn embed_unit_is_identity() {
        let m = embed(&Q::one());
        assert_eq!(m, CMatrix::identity(2));
    }

    #[test]
    fn embed_j_matches_block() {
        let m = embed(&Q::j());
        assert_eq!(m[(0, 0)].re, 0.0);
        assert_eq!(m[(0, 1)].re, -1.0);
        assert_eq!(m[(1, 0)].re, 1.0);
        assert_eq!(m[(1, 1)].re, 0.0);
        assert!(m.data.iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn embed_is_anti_homomorphism() {
        // M(a) M(b) = M(b a), oracle: direct Hamilton product
        let a = qc(0.3, -1.2, 0.7, 2.0);
        let b = qc(-0.5, 0.1, 1.5, -0.2);
        let lhs = embed(&a).mul(&embed(&b));
        let rhs = embed(&(b * a));
        assert!(lhs.sub(&rhs).max_abs() < 1e-14);
    }

    #[test]
    fn embed_i_times_j() {
        // j * i = -k, so M(i) M(j) = M(-k)
        let lhs = embed(&Q::i()).mul(&embed(&Q::j()));
        let rhs = embed(&-Q::k());
        assert!(lhs.sub(&rhs).max_abs() < 1e-15);
    }

    #[test]
    fn embed_det_is_norm_sq() {
        let q = qc(1.0, 2.0, -0.5, 0.25);
        let m = embed(&q);
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        assert!((det.re - q.norm_sq()).abs() < 1e-14);
        assert!(det.im.abs() < 1e-15);
    }

    #[test]
    fn extract_round_trip() {
        let q = qc(0.1, 0.2, 0.3, 0.4);
        let r = extract(&embed(&q), 1e-12).unwrap();
        assert_eq!(q, r);
    }

    #[test]
    fn extract_rejects_non_quaternionic() {
        let m = CMatrix::two_by_two(
            C::new(1.0, 0.0),
            C::new(1.0, 0.0),
            C::new(0.0, 0.0),
            C::new(1.0, 0.0),
        );
        assert!(matches!(
            extract(&m, 1e-12),
            Err(Error::NotQuaternionic { .. })
        ));
    }

    #[test]
    fn dagger_matches_quaternion_conjugate() {
        let q = qc(0.4, -0.9, 1.1, 0.6);
        assert!(embed(&q).dagger().sub(&embed(&q.conj())).max_abs() < 1e-15);
    }

    #[test]
    fn quat_conj_transpose_complexifies() {
        let m = QuatMatrix::from_fn(2, 3, |i, j| qc(i as f64, j as f64, 0.5, -1.0));
        let lhs = quat_conj_transpose(&m).complexify();
        let rhs = m.complexify().dagger();
        assert!(lhs.sub(&rhs).max_abs() < 1e-15);
    }

    #[test]
    fn single_i_conjugates() {
        let m = QuatMatrix::from_fn(1, 1, |_, _| Q::i());
        let t = quat_conj_transpose(&m);
        assert_eq!(t[(0, 0)], -Q::i());
    }

    #[test]
    fn jacobi_identity_matrix() {
        let r = hermitian_inv_sqrt(&CMatrix::<f64>::identity(3), 1e-12).unwrap();
        assert!(r.sub(&CMatrix::identity(3)).max_abs() < 1e-13);
    }

    #[test]
    fn jacobi_scalar_case() {
        let h = CMatrix::<f64>::identity(2).scale(C::new(2.0, 0.0));
        let r = hermitian_inv_sqrt(&h, 1e-12).unwrap();
        let want = 1.0 / 2.0_f64.sqrt();
        assert!((r[(0, 0)].re - want).abs() < 1e-14);
        assert!(r[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn inv_sqrt_residual() {
        // H = I + L^dagger L for a fixed L, check R H R = I
        let l = CMatrix::from_fn(3, 3, |i, j| C::new((i + 2 * j) as f64 * 0.21 - 0.5, (i * j) as f64 * 0.13));
        let h = CMatrix::identity(3).add(&l.dagger().mul(&l));
        let r = hermitian_inv_sqrt(&h, 1e-12).unwrap();
        let resid = r.mul(&h).mul(&r).sub(&CMatrix::identity(3)).max_abs();
        assert!(resid < 1e-12, "resid {resid:e}");
        assert!(r.hermitian_residual() < 1e-12);
    }

    #[test]
    fn denman_beavers_matches_jacobi() {
        let l = CMatrix::from_fn(4, 2, |i, j| C::new(0.3 * i as f64 - 0.2 * j as f64, 0.11 * (i + j) as f64));
        let h = CMatrix::identity(2).add(&l.dagger().mul(&l));
        let a = hermitian_inv_sqrt(&h, 1e-12).unwrap();
        let b = inv_sqrt_denman_beavers(&h).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-12);
    }

    #[test]
    fn jacobi_commutes_with_unitary_conjugation() {
        let l = CMatrix::from_fn(3, 3, |i, j| C::new(0.4 * i as f64 + 0.1, 0.2 * j as f64 - 0.3));
        let h = CMatrix::identity(3).add(&l.dagger().mul(&l));
        // unitary from the eigenvectors of another Hermitian matrix
        let g = CMatrix::from_fn(3, 3, |i, j| C::new((i * j) as f64 * 0.17, (i as f64 - j as f64) * 0.29));
        let hg = g.add(&g.dagger());
        let (_, u) = hermitian_eigen(&hg, 1e-12).unwrap();
        let lhs = hermitian_inv_sqrt(&u.mul(&h).mul(&u.dagger()), 1e-12).unwrap();
        let rhs = u.mul(&hermitian_inv_sqrt(&h, 1e-12).unwrap()).mul(&u.dagger());
        assert!(lhs.sub(&rhs).max_abs() < 1e-11);
    }

    #[test]
    fn exp2x2_matches_series() {
        let a = CMatrix::two_by_two(
            C::new(0.3, 0.2),
            C::new(-0.4, 0.9),
            C::new(0.1, -0.6),
            C::new(-0.3, -0.2),
        );
        let e1 = exp2x2(&a);
        let e2 = a.expm();
        assert!(e1.sub(&e2).max_abs() < 1e-12);
    }

    #[test]
    fn solve_round_trip() {
        let a = CMatrix::from_fn(3, 3, |i, j| C::new(((i + 1) * (j + 2)) as f64 % 5.0 + if i == j { 4.0 } else { 0.0 }, (i as f64) - (j as f64)));
        let b = CMatrix::from_fn(3, 2, |i, j| C::new(i as f64, j as f64 + 1.0));
        let x = a.solve(&b).unwrap();
        assert!(a.mul(&x).sub(&b).max_abs() < 1e-12);
    }

    #[test]
    fn is_quaternionic_block_detects() {
        let q1 = qc(1.0, -2.0, 0.5, 0.3);
        let q2 = qc(0.0, 1.0, 2.0, -1.0);
        let mut m = CMatrix::zeros(2, 4);
        m.set_block(0, 0, &embed(&q1));
        m.set_block(0, 2, &embed(&q2));
        assert!(is_quaternionic_block(&m, 1e-12).unwrap());
        m[(0, 1)] = m[(0, 1)] + C::new(1e-3, 0.0);
        assert!(!is_quaternionic_block(&m, 1e-12).unwrap());
    }
}
