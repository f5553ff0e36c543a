//! Dense complex matrices backed by LAPACK (zgetrf/zgetri/zgeev) and BLAS
//! (zgemm). Storage is column-major to match the Fortran interface.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

#[allow(non_camel_case_types)]
type lapack_int = i32;

#[link(name = "lapack")]
#[link(name = "blas")]
extern "C" {
    fn zgetrf_(
        m: *const lapack_int,
        n: *const lapack_int,
        a: *mut C64,
        lda: *const lapack_int,
        ipiv: *mut lapack_int,
        info: *mut lapack_int,
    );
    fn zgetri_(
        n: *const lapack_int,
        a: *mut C64,
        lda: *const lapack_int,
        ipiv: *const lapack_int,
        work: *mut C64,
        lwork: *const lapack_int,
        info: *mut lapack_int,
    );
    fn zgeev_(
        jobvl: *const u8,
        jobvr: *const u8,
        n: *const lapack_int,
        a: *mut C64,
        lda: *const lapack_int,
        w: *mut C64,
        vl: *mut C64,
        ldvl: *const lapack_int,
        vr: *mut C64,
        ldvr: *const lapack_int,
        work: *mut C64,
        lwork: *const lapack_int,
        rwork: *mut f64,
        info: *mut lapack_int,
    );
    fn zgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const lapack_int,
        n: *const lapack_int,
        k: *const lapack_int,
        alpha: *const C64,
        a: *const C64,
        lda: *const lapack_int,
        b: *const C64,
        ldb: *const lapack_int,
        beta: *const C64,
        c: *mut C64,
        ldc: *const lapack_int,
    );
}

/// Square complex matrix, column-major.
#[derive(Clone, Debug)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i + i * n] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i + j * self.n]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        &mut self.data[i + j * self.n]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// I - self.
    pub fn one_minus(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.n);
        for (o, a) in out.data.iter_mut().zip(self.data.iter()) {
            *o = -a;
        }
        for i in 0..self.n {
            out.data[i + i * self.n] += 1.0;
        }
        out
    }

    pub fn add(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(rhs.data.iter()) {
            *o += b;
        }
        out
    }

    /// self * rhs via zgemm.
    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        crate::par::ensure_runtime();
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        if n == 0 {
            return out;
        }
        let ni = n as lapack_int;
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        unsafe {
            zgemm_(
                b"N".as_ptr(),
                b"N".as_ptr(),
                &ni,
                &ni,
                &ni,
                &one,
                self.data.as_ptr(),
                &ni,
                rhs.data.as_ptr(),
                &ni,
                &zero,
                out.data.as_mut_ptr(),
                &ni,
            );
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.data[i + i * self.n]).sum()
    }

    /// tr(self * rhs) without forming the product.
    pub fn trace_product(&self, rhs: &CMatrix) -> C64 {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                acc += self.data[i + j * n] * rhs.data[j + i * n];
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn lu(&self) -> Result<LuFactors> {
        crate::par::ensure_runtime();
        let n = self.n;
        if n == 0 {
            return Ok(LuFactors { n, data: Vec::new(), ipiv: Vec::new() });
        }
        let mut data = self.data.clone();
        let mut ipiv = vec![0 as lapack_int; n];
        let ni = n as lapack_int;
        let mut info: lapack_int = 0;
        unsafe { zgetrf_(&ni, &ni, data.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), &mut info) };
        if info < 0 {
            return Err(Error::Linalg(format!("zgetrf: illegal argument {}", -info)));
        }
        // info > 0 marks an exactly-singular U; keep the factors, det() will be 0.
        Ok(LuFactors { n, data, ipiv })
    }

    /// All eigenvalues via zgeev (no eigenvectors).
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        crate::par::ensure_runtime();
        let n = self.n;
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut a = self.data.clone();
        let mut w = vec![C64::new(0.0, 0.0); n];
        let ni = n as lapack_int;
        let mut info: lapack_int = 0;
        let mut rwork = vec![0.0f64; 2 * n];
        // workspace query
        let mut wkopt = C64::new(0.0, 0.0);
        let m1: lapack_int = -1;
        let ldv: lapack_int = 1;
        unsafe {
            zgeev_(
                b"N".as_ptr(),
                b"N".as_ptr(),
                &ni,
                a.as_mut_ptr(),
                &ni,
                w.as_mut_ptr(),
                std::ptr::null_mut(),
                &ldv,
                std::ptr::null_mut(),
                &ldv,
                &mut wkopt,
                &m1,
                rwork.as_mut_ptr(),
                &mut info,
            );
        }
        let lwork = (wkopt.re as usize).max(2 * n) as lapack_int;
        let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
        unsafe {
            zgeev_(
                b"N".as_ptr(),
                b"N".as_ptr(),
                &ni,
                a.as_mut_ptr(),
                &ni,
                w.as_mut_ptr(),
                std::ptr::null_mut(),
                &ldv,
                std::ptr::null_mut(),
                &ldv,
                work.as_mut_ptr(),
                &lwork,
                rwork.as_mut_ptr(),
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Linalg(format!("zgeev: info = {info}")));
        }
        Ok(w)
    }
}

/// LU factorization of a square complex matrix.
pub struct LuFactors {
    n: usize,
    data: Vec<C64>,
    ipiv: Vec<lapack_int>,
}

impl LuFactors {
    /// Determinant from the factorization, with exponent renormalization so
    /// long diagonals cannot overflow.
    pub fn det(&self) -> C64 {
        let n = self.n;
        let mut mant = C64::new(1.0, 0.0);
        let mut exp2: i64 = 0;
        for i in 0..n {
            mant *= self.data[i + i * n];
            if self.ipiv[i] as usize != i + 1 {
                mant = -mant;
            }
            let norm = mant.norm();
            if norm != 0.0 && norm.is_finite() {
                let e = norm.log2().floor() as i64;
                if e.abs() > 60 {
                    mant *= (2.0f64).powi(-e as i32);
                    exp2 += e;
                }
            } else if norm == 0.0 {
                return C64::new(0.0, 0.0);
            }
        }
        mant * (2.0f64).powi(exp2.clamp(-1020, 1020) as i32)
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        let n = self.n;
        if n == 0 {
            return Ok(CMatrix::zeros(0));
        }
        let mut data = self.data.clone();
        let ni = n as lapack_int;
        let mut info: lapack_int = 0;
        let m1: lapack_int = -1;
        let mut wkopt = C64::new(0.0, 0.0);
        unsafe { zgetri_(&ni, data.as_mut_ptr(), &ni, self.ipiv.as_ptr(), &mut wkopt, &m1, &mut info) };
        let lwork = (wkopt.re as usize).max(n) as lapack_int;
        let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
        unsafe {
            zgetri_(&ni, data.as_mut_ptr(), &ni, self.ipiv.as_ptr(), work.as_mut_ptr(), &lwork, &mut info)
        };
        if info > 0 {
            return Err(Error::Linalg("zgetri: singular matrix".into()));
        }
        if info < 0 {
            return Err(Error::Linalg(format!("zgetri: illegal argument {}", -info)));
        }
        Ok(CMatrix { n, data })
    }
}

/// Real rectangular matrix, row-major. Used for the small unitary
/// representation blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct RMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, rhs: &RMatrix) -> RMatrix {
        assert_eq!(self.cols, rhs.rows);
        let mut out = RMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> RMatrix {
        let mut out = RMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diff(&self, rhs: &RMatrix) -> f64 {
        self.data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_det_and_inverse_roundtrip() {
        let n = 5;
        let mut a = CMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                *a.get_mut(i, j) += C64::new(0.1 * ((i * 3 + j) % 7) as f64, 0.05 * (i as f64 - j as f64));
            }
        }
        let lu = a.lu().unwrap();
        let inv = lu.inverse().unwrap();
        let prod = a.mul(&inv);
        let err = prod.one_minus().max_abs();
        assert!(err < 1e-12, "A * A^-1 != I, err = {err}");
        // det of a triangular-ish known case
        let mut t = CMatrix::identity(3);
        *t.get_mut(0, 0) = C64::new(2.0, 0.0);
        *t.get_mut(1, 1) = C64::new(0.0, 3.0);
        let det = t.lu().unwrap().det();
        assert!((det - C64::new(0.0, 6.0)).norm() < 1e-13);
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let mut a = CMatrix::zeros(3);
        *a.get_mut(0, 0) = C64::new(2.0, 0.0);
        *a.get_mut(1, 1) = C64::new(-1.0, 0.5);
        *a.get_mut(2, 2) = C64::new(0.25, 0.0);
        let mut eigs = a.eigenvalues().unwrap();
        eigs.sort_by(|x, y| y.norm().partial_cmp(&x.norm()).unwrap());
        assert!((eigs[0] - C64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((eigs[1] - C64::new(-1.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn zero_dimensional_edge_cases() {
        let a = CMatrix::zeros(0);
        assert_eq!(a.lu().unwrap().det(), C64::new(1.0, 0.0));
        assert_eq!(a.frobenius_norm(), 0.0);
        assert!(a.eigenvalues().unwrap().is_empty());
    }
}
