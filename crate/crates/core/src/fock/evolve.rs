//! Time propagation on Fock bases: dense eigendecomposition below dimension
//! 4000, Lanczos-Krylov exponential-times-vector above (and for one-shot
//! applications of Weyl and quadratic generators).

use crate::error::{MflabError, Result};
use crate::lapack::{eigh_complex, eigh_real};
use crate::linalg::{self, C64, ZERO};

use super::op::SparseOperator;

pub const FULL_EIG_LIMIT: usize = 4000;

/// e^{z T} e_1 for a real symmetric tridiagonal T given by (alpha, beta).
fn tridiag_exp_e1(alpha: &[f64], beta: &[f64], z: C64) -> Result<Vec<C64>> {
    let j = alpha.len();
    let mut t = vec![0.0f64; j * j];
    for i in 0..j {
        t[i * j + i] = alpha[i];
        if i + 1 < j {
            t[i * j + i + 1] = beta[i];
            t[(i + 1) * j + i] = beta[i];
        }
    }
    let (w, v) = eigh_real(&t, j)?;
    // y = V e^{z w} V^T e_1
    let mut y = vec![ZERO; j];
    for (k, vec) in v.iter().enumerate() {
        let coef = (z * w[k]).exp() * vec[0];
        for i in 0..j {
            y[i] += coef * vec[i];
        }
    }
    Ok(y)
}

/// e^{z H} psi for Hermitian H given through its action. `norm_est` is any
/// upper bound on the spectral radius; it only sets the substep count.
pub fn lanczos_expm_multiply(
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    psi: &[C64],
    z: C64,
    tol: f64,
    norm_est: f64,
) -> Result<Vec<C64>> {
    let psi_norm = linalg::norm(psi);
    if psi_norm == 0.0 || z == ZERO {
        return Ok(psi.to_vec());
    }
    let mut n_sub = ((z.norm() * norm_est / 15.0).ceil() as usize).max(1);
    let m_max = 90usize.min(psi.len());
    'retry: loop {
        let zs = z / n_sub as f64;
        let mut cur = psi.to_vec();
        for _ in 0..n_sub {
            let cur_norm = linalg::norm(&cur);
            if cur_norm < 1e-300 {
                return Ok(cur);
            }
            let mut vs: Vec<Vec<C64>> = vec![cur.iter().map(|x| x / cur_norm).collect()];
            let mut alpha: Vec<f64> = Vec::new();
            let mut beta: Vec<f64> = Vec::new();
            let mut accepted: Option<Vec<C64>> = None;
            for j in 0..m_max {
                let mut w = apply(&vs[j]);
                if j > 0 {
                    linalg::axpy(C64::new(-beta[j - 1], 0.0), &vs[j - 1], &mut w);
                }
                let a = linalg::dot(&vs[j], &w).re;
                alpha.push(a);
                linalg::axpy(C64::new(-a, 0.0), &vs[j], &mut w);
                // full reorthogonalization keeps the recursion stable
                for v in &vs {
                    let c = linalg::dot(v, &w);
                    linalg::axpy(-c, v, &mut w);
                }
                let b = linalg::norm(&w);
                let y = tridiag_exp_e1(&alpha, &beta, zs)?;
                let err = b * y[j].norm();
                if b < 1e-13 || err < tol {
                    let mut out = vec![ZERO; cur.len()];
                    for (yi, v) in y.iter().zip(&vs) {
                        linalg::axpy(*yi * cur_norm, v, &mut out);
                    }
                    accepted = Some(out);
                    break;
                }
                beta.push(b);
                vs.push(w.iter().map(|x| x / b).collect());
            }
            match accepted {
                Some(next) => cur = next,
                None => {
                    if n_sub > 1_000_000 {
                        return Err(MflabError::KrylovFailure(format!(
                            "no convergence with {n_sub} substeps (tol {tol:.1e})"
                        )));
                    }
                    n_sub *= 2;
                    continue 'retry;
                }
            }
        }
        return Ok(cur);
    }
}

/// Cached dense eigendecomposition of a Hermitian operator, for repeated
/// propagation with different times.
pub struct EigPropagator {
    pub eigs: Vec<f64>,
    /// vecs[k] is the k-th eigenvector.
    pub vecs: Vec<Vec<C64>>,
}

impl EigPropagator {
    pub fn new(h: &SparseOperator) -> Result<Self> {
        let dense = h.to_dense();
        let (eigs, vecs) = eigh_complex(&dense.data, dense.n)?;
        Ok(EigPropagator { eigs, vecs })
    }

    /// e^{z H} psi.
    pub fn apply_exp(&self, psi: &[C64], z: C64) -> Vec<C64> {
        let mut out = vec![ZERO; psi.len()];
        for (w, v) in self.eigs.iter().zip(&self.vecs) {
            let coef = (z * *w).exp() * linalg::dot(v, psi);
            linalg::axpy(coef, v, &mut out);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolveMethod {
    FullEig,
    Krylov,
    Auto,
}

/// psi(t) = e^{-i H t} psi.
pub fn evolve_state(
    h: &SparseOperator,
    psi: &[C64],
    t: f64,
    method: EvolveMethod,
) -> Result<Vec<C64>> {
    let use_eig = match method {
        EvolveMethod::FullEig => true,
        EvolveMethod::Krylov => false,
        EvolveMethod::Auto => h.dim < FULL_EIG_LIMIT,
    };
    let z = C64::new(0.0, -t);
    let out = if use_eig {
        EigPropagator::new(h)?.apply_exp(psi, z)
    } else {
        lanczos_expm_multiply(&|x| h.apply(x), psi, z, 1e-10, h.norm_bound())?
    };
    let drift = (linalg::norm(&out) - linalg::norm(psi)).abs();
    if drift > 1e-9 {
        return Err(MflabError::KrylovFailure(format!(
            "norm drift {drift:.3e} after evolution over t = {t}"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::basis::{OccupationBasis, Sector};
    use crate::fock::op::{build_hamiltonian, number_operator};
    use crate::linalg::C64;
    use crate::space::two_mode_space;
    use crate::util::DetRng;

    fn random_unit(rng: &mut DetRng, n: usize) -> Vec<C64> {
        let mut v = rng.complex_vec(n);
        let nrm = linalg::norm(&v);
        for c in v.iter_mut() {
            *c /= nrm;
        }
        v
    }

    #[test]
    fn diagonal_hamiltonian_gives_exact_phases() {
        let b = OccupationBasis::new(2, Sector::Truncated(5)).unwrap();
        let n_op = number_operator(&b);
        let mut rng = DetRng::new(7);
        let psi = random_unit(&mut rng, b.dim());
        let t = 0.83;
        for method in [EvolveMethod::FullEig, EvolveMethod::Krylov] {
            let out = evolve_state(&n_op, &psi, t, method).unwrap();
            for i in 0..b.dim() {
                let expect = psi[i] * (C64::new(0.0, -t) * b.total(i) as f64).exp();
                assert!((out[i] - expect).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn forward_backward_returns_state() {
        let space = two_mode_space(0.8, 0.6);
        let b = OccupationBasis::new(2, Sector::FixedN(6)).unwrap();
        let h = build_hamiltonian(&space, 6, &b).unwrap();
        let mut rng = DetRng::new(8);
        let psi = random_unit(&mut rng, b.dim());
        let fwd = evolve_state(&h, &psi, 1.3, EvolveMethod::Krylov).unwrap();
        let back = evolve_state(&h, &fwd, -1.3, EvolveMethod::Krylov).unwrap();
        let err: f64 = psi
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-9, "round trip error {err:.3e}");
    }

    #[test]
    fn krylov_agrees_with_full_eig_at_dim_1000() {
        let space = two_mode_space(0.5, 0.8);
        let b = OccupationBasis::new(2, Sector::FixedN(999)).unwrap();
        assert_eq!(b.dim(), 1000);
        let h = build_hamiltonian(&space, 999, &b).unwrap();
        let mut rng = DetRng::new(9);
        let psi = random_unit(&mut rng, b.dim());
        let t = 0.5;
        let e0 = h.expectation(&psi).re;
        let a = evolve_state(&h, &psi, t, EvolveMethod::FullEig).unwrap();
        let k = evolve_state(&h, &psi, t, EvolveMethod::Krylov).unwrap();
        let err: f64 = a.iter().zip(&k).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-9, "method discrepancy {err:.3e}");
        // energy conservation, relative 1e-8
        let e1 = h.expectation(&k).re;
        assert!((e1 - e0).abs() <= 1e-8 * e0.abs().max(1.0));
    }
}
