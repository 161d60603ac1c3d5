//! Weyl operators, coherent states, and product states.

use crate::error::{MflabError, Result};
use crate::linalg::{self, C64, CMat, ZERO};
use crate::util::ln_factorial;

use super::basis::{OccupationBasis, Sector};
use super::evolve::lanczos_expm_multiply;
use super::op::{annihilator, creator, SparseOperator};

pub fn vacuum(basis: &OccupationBasis) -> Result<Vec<C64>> {
    let idx = basis
        .vacuum_index()
        .ok_or_else(|| MflabError::Basis("basis has no vacuum state".into()))?;
    let mut psi = vec![ZERO; basis.dim()];
    psi[idx] = linalg::ONE;
    Ok(psi)
}

/// Truncation needed so the Poisson(|f|^2) occupation tail beyond n_max stays
/// below 1e-10.
pub fn required_n_max(f_norm: f64) -> usize {
    (f_norm * f_norm + 10.0 * f_norm + 20.0).ceil() as usize
}

pub fn check_weyl_truncation(basis: &OccupationBasis, f: &[C64]) -> Result<()> {
    if !basis.is_truncated() {
        return Err(MflabError::Basis("Weyl operators need a truncated basis".into()));
    }
    let norm = linalg::norm(f);
    let required = required_n_max(norm);
    if basis.n_max() < required {
        return Err(MflabError::Truncation(format!(
            "n_max = {} but displacement norm {norm:.3} requires n_max >= {required}",
            basis.n_max()
        )));
    }
    Ok(())
}

/// Occupation coefficient prod_a f_a^{n_a} / sqrt(n_a!) evaluated in
/// log-magnitude + phase form (safe for large displacements).
fn monomial_log_polar(f: &[C64], occ: &[u32]) -> Option<(f64, f64)> {
    let mut ln_mag = 0.0f64;
    let mut phase = 0.0f64;
    for (fa, &na) in f.iter().zip(occ) {
        if na == 0 {
            continue;
        }
        if fa.norm() == 0.0 {
            return None;
        }
        ln_mag += na as f64 * fa.norm().ln() - 0.5 * ln_factorial(na as usize);
        phase += na as f64 * fa.arg();
    }
    Some((ln_mag, phase))
}

fn monomial_over_sqrt_factorials(f: &[C64], occ: &[u32]) -> C64 {
    match monomial_log_polar(f, occ) {
        Some((ln_mag, phase)) => C64::from_polar(ln_mag.exp(), phase),
        None => ZERO,
    }
}

/// W(f) Omega in closed form: e^{-|f|^2/2} sum_n prod f_a^{n_a}/sqrt(n_a!).
pub fn coherent_state(basis: &OccupationBasis, f: &[C64]) -> Result<Vec<C64>> {
    check_weyl_truncation(basis, f)?;
    let norm2 = f.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let pref = (-norm2 / 2.0).exp();
    let mut psi = vec![ZERO; basis.dim()];
    for i in 0..basis.dim() {
        psi[i] = monomial_over_sqrt_factorials(f, basis.occ(i)) * pref;
    }
    Ok(psi)
}

/// phi^{tensor N} on the fixed-N sector: coefficient of occupation n is
/// sqrt(N!/prod n_a!) prod phi_a^{n_a}.
pub fn product_state(phi: &[C64], basis: &OccupationBasis) -> Result<Vec<C64>> {
    let n = match basis.sector {
        Sector::FixedN(n) => n,
        Sector::Truncated(_) => {
            return Err(MflabError::Basis("product states live in a fixed-N sector".into()))
        }
    };
    let defect = (linalg::norm(phi) - 1.0).abs();
    if defect > 1e-8 {
        return Err(MflabError::InvalidInput(format!(
            "mode-projected state has norm defect {defect:.3e}; choose a compatible phi"
        )));
    }
    let ln_n_fact = ln_factorial(n);
    let mut psi = vec![ZERO; basis.dim()];
    for i in 0..basis.dim() {
        let occ = basis.occ(i);
        // sqrt(N!/prod n_a!) * prod phi^n; the logs are combined before the
        // single exp because e^{lnN!/2} alone overflows f64 for N >= 512.
        if let Some((ln_mag, phase)) = monomial_log_polar(phi, occ) {
            psi[i] = C64::from_polar((ln_mag + 0.5 * ln_n_fact).exp(), phase);
        }
    }
    let nrm = linalg::norm(&psi);
    if !((nrm - 1.0).abs() <= 1e-10) {
        return Err(MflabError::Basis(format!(
            "product state norm {nrm} out of tolerance; N too large for f64 coefficients?"
        )));
    }
    Ok(psi)
}

/// Hermitian Weyl generator H_w = i(a*(f) - a(f)), so that
/// W(f) = e^{-i H_w} = e^{a*(f) - a(f)}.
pub fn weyl_generator(basis: &OccupationBasis, f: &[C64]) -> Result<SparseOperator> {
    let a = annihilator(basis, f)?.scale(-linalg::I);
    let c = creator(basis, f)?.scale(linalg::I);
    let mut sum = a.add(&c)?;
    sum.hermitian = true;
    Ok(sum)
}

/// W(f) psi (or W*(f) psi with `dagger`), by Krylov exponentiation; the
/// displacement must satisfy the truncation precondition.
pub fn weyl_apply(
    basis: &OccupationBasis,
    f: &[C64],
    psi: &[C64],
    dagger: bool,
) -> Result<Vec<C64>> {
    check_weyl_truncation(basis, f)?;
    let g: Vec<C64> = if dagger { f.iter().map(|z| -z).collect() } else { f.to_vec() };
    let h = weyl_generator(basis, &g)?;
    lanczos_expm_multiply(
        &|x| h.apply(x),
        psi,
        C64::new(0.0, -1.0),
        1e-11,
        h.norm_bound(),
    )
}

/// W(f) as an operator, built column by column (test-scale bases only; the
/// matrix is dense).
pub fn weyl(basis: &OccupationBasis, f: &[C64]) -> Result<SparseOperator> {
    let w = weyl_matrix(basis, f)?;
    let mut triplets = Vec::new();
    for i in 0..w.n {
        for j in 0..w.n {
            triplets.push((i, j, w[(i, j)]));
        }
    }
    SparseOperator::from_triplets(w.n, triplets, false)
}

/// Dense matrix of W(f), built column by column (test-scale bases only).
pub fn weyl_matrix(basis: &OccupationBasis, f: &[C64]) -> Result<CMat> {
    let dim = basis.dim();
    let mut w = CMat::zeros(dim);
    let mut e = vec![ZERO; dim];
    for col in 0..dim {
        e[col] = linalg::ONE;
        let wc = weyl_apply(basis, f, &e, false)?;
        for row in 0..dim {
            w[(row, col)] = wc[row];
        }
        e[col] = ZERO;
    }
    Ok(w)
}
