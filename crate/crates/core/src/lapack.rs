//! Thin FFI wrappers around the system LAPACK (zheev / dsyev).

use crate::error::{MflabError, Result};
use num_complex::Complex64;
use std::os::raw::c_char;

extern "C" {
    fn zheev_(
        jobz: *const c_char,
        uplo: *const c_char,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        info: *mut i32,
    );

    fn dsyev_(
        jobz: *const c_char,
        uplo: *const c_char,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );

    fn openblas_set_num_threads(n: i32);
}

/// Pin BLAS to a single thread. Parallelism lives in rayon; a threaded BLAS
/// underneath would make summation order depend on the machine.
pub fn pin_blas_single_thread() {
    unsafe { openblas_set_num_threads(1) };
}

/// Eigendecomposition of a Hermitian matrix given in row-major order.
///
/// Returns ascending eigenvalues and the eigenvectors as rows of the second
/// output (`vecs[k]` is the k-th eigenvector).
pub fn eigh_complex(a: &[Complex64], n: usize) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    assert_eq!(a.len(), n * n);
    // Row-major Hermitian input: the column-major reinterpretation is the
    // transpose, i.e. the conjugate of the same matrix. Conjugating restores
    // column-major layout.
    let mut m: Vec<Complex64> = a.iter().map(|z| z.conj()).collect();
    let nn = n as i32;
    let mut w = vec![0.0f64; n];
    let lwork = (2 * n.max(1) * 32) as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0f64; (3 * n).max(1)];
    let mut info = 0i32;
    unsafe {
        zheev_(
            b"V".as_ptr() as _,
            b"L".as_ptr() as _,
            &nn,
            m.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(MflabError::Lapack { routine: "zheev", info });
    }
    // Column j of the column-major output is eigenvector j.
    let vecs = (0..n)
        .map(|j| (0..n).map(|i| m[j * n + i]).collect())
        .collect();
    Ok((w, vecs))
}

/// Eigendecomposition of a real symmetric matrix in row-major order.
pub fn eigh_real(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec(); // symmetric: layout transpose is a no-op
    let nn = n as i32;
    let mut w = vec![0.0f64; n];
    let lwork = (n.max(1) * 34) as i32;
    let mut work = vec![0.0f64; lwork as usize];
    let mut info = 0i32;
    unsafe {
        dsyev_(
            b"V".as_ptr() as _,
            b"L".as_ptr() as _,
            &nn,
            m.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(MflabError::Lapack { routine: "dsyev", info });
    }
    let vecs = (0..n)
        .map(|j| (0..n).map(|i| m[j * n + i]).collect())
        .collect();
    Ok((w, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zheev_pauli_y_like() {
        let a = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(2.0, 0.0),
        ];
        let (w, v) = eigh_complex(&a, 2).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!((w[1] - 3.0).abs() < 1e-12);
        // residual check A v = w v
        for k in 0..2 {
            for i in 0..2 {
                let av: Complex64 = (0..2).map(|j| a[i * 2 + j] * v[k][j]).sum();
                assert!((av - v[k][i] * w[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dsyev_diag() {
        let a = vec![3.0, 1.0, 1.0, 3.0];
        let (w, _) = eigh_real(&a, 2).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12 && (w[1] - 4.0).abs() < 1e-12);
    }
}
