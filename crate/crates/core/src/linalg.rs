//! Dense complex matrices and a Hermitian eigenvalue solver.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::{cr, Real, C};

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator<T: Real> {
    dim: usize,
    data: Vec<C<T>>,
    hermitian: bool,
}

impl<T: Real> DenseOperator<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![cr(T::zero()); dim * dim], hermitian: true }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = cr(T::one());
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = cr(d);
        }
        m
    }

    /// Wraps row-major entries. The Hermitian flag is left unset.
    pub fn from_rows(dim: usize, data: Vec<C<T>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        Ok(Self { dim, data, hermitian: false })
    }

    /// Wraps row-major entries and checks Hermiticity to within
    /// [`Real::structural_tol`] (scaled by the largest entry).
    pub fn hermitian_from_rows(dim: usize, data: Vec<C<T>>) -> Result<Self> {
        let mut m = Self::from_rows(dim, data)?;
        m.mark_hermitian()?;
        Ok(m)
    }

    /// Sets the Hermitian flag after verifying the property.
    pub fn mark_hermitian(&mut self) -> Result<()> {
        let dev = self.hermitian_deviation();
        let scale = self.max_abs().max(T::one());
        if dev > T::structural_tol() * scale {
            return Err(Error::NotHermitian(dev.to_f64_lossy()));
        }
        self.hermitian = true;
        Ok(())
    }

    /// Replaces the matrix with `(M + M^dag) / 2` and sets the flag.
    pub fn symmetrize(&mut self) {
        let n = self.dim;
        let half = T::lit(0.5);
        for i in 0..n {
            for j in i..n {
                let a = self.data[i * n + j];
                let b = self.data[j * n + i].conj();
                let avg = (a + b) * half;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
        self.hermitian = true;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C<T> {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: C<T>) {
        self.data[row * self.dim + col] = v;
        self.hermitian = false;
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn hermitian_deviation(&self) -> T {
        let n = self.dim;
        let mut dev = T::zero();
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out.hermitian = self.hermitian;
        out
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
            hermitian: self.hermitian,
        }
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * k).collect(),
            hermitian: self.hermitian,
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = vec![cr(T::zero()); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Self { dim: n, data: out, hermitian: false }
    }

    /// `self ⊗ rhs` with `self` on the more significant qubits.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (n, m) = (self.dim, rhs.dim);
        let d = n * m;
        let mut out = vec![cr(T::zero()); d * d];
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k) * d + (j * m + l)] = a * rhs.data[k * m + l];
                    }
                }
            }
        }
        Self { dim: d, data: out, hermitian: self.hermitian && rhs.hermitian }
    }

    pub fn apply(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(v.len(), self.dim, "apply dimension mismatch");
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .fold(cr(T::zero()), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `U^dag D U` for a real diagonal `D`.
    pub fn conjugate_diagonal(u: &Self, diag: &[T]) -> Self {
        let n = u.dim;
        assert_eq!(diag.len(), n);
        let mut out = vec![cr(T::zero()); n * n];
        for (k, &d) in diag.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            let row = &u.data[k * n..(k + 1) * n];
            for i in 0..n {
                let a = row[i].conj() * d;
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let dst = &mut out[i * n..(i + 1) * n];
                for (x, &b) in dst.iter_mut().zip(row) {
                    *x += a * b;
                }
            }
        }
        let mut m = Self { dim: n, data: out, hermitian: false };
        m.symmetrize();
        m
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).fold(cr(T::zero()), |acc, i| acc + self.data[i * self.dim + i])
    }

    /// Largest entry of `|U U^dag - I|`.
    pub fn unitarity_deviation(&self) -> T {
        let p = self.matmul(&self.adjoint());
        let id = Self::identity(self.dim);
        p.data
            .iter()
            .zip(&id.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    ///
    /// Uses the real embedding `[[Re, -Im], [Im, Re]]`, whose spectrum is
    /// the Hermitian spectrum with every eigenvalue doubled, and cyclic
    /// Jacobi rotations on that symmetric matrix.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<T>> {
        if !self.hermitian {
            return Err(Error::NotHermitian(self.hermitian_deviation().to_f64_lossy()));
        }
        let n = self.dim;
        let m = 2 * n;
        let mut a = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                let z = self.data[i * n + j];
                a[i * m + j] = z.re;
                a[(i + n) * m + (j + n)] = z.re;
                a[i * m + (j + n)] = -z.im;
                a[(i + n) * m + j] = z.im;
            }
        }
        let mut evals = jacobi_eigenvalues(&mut a, m);
        evals.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        // Each eigenvalue appears twice; take every other one.
        Ok(evals.into_iter().step_by(2).collect())
    }
}

fn jacobi_eigenvalues<T: Real>(a: &mut [T], m: usize) -> Vec<T> {
    let frob: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let tol = T::epsilon() * frob.max(T::min_positive_value());
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..m {
            for q in (p + 1)..m {
                off += a[p * m + q] * a[p * m + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = cs * akp - sn * akq;
                    a[k * m + q] = sn * akp + cs * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = cs * apk - sn * aqk;
                    a[q * m + k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i * m + i]).collect()
}

impl<T: Real> Add for &DenseOperator<T> {
    type Output = DenseOperator<T>;
    fn add(self, rhs: Self) -> DenseOperator<T> {
        assert_eq!(self.dim, rhs.dim);
        DenseOperator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl<T: Real> Sub for &DenseOperator<T> {
    type Output = DenseOperator<T>;
    fn sub(self, rhs: Self) -> DenseOperator<T> {
        assert_eq!(self.dim, rhs.dim);
        DenseOperator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl<T: Real> Mul for &DenseOperator<T> {
    type Output = DenseOperator<T>;
    fn mul(self, rhs: Self) -> DenseOperator<T> {
        self.matmul(rhs)
    }
}
