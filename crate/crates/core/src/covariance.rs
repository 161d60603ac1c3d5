//! Fluctuation vectors g_{j,t}, the complex covariance matrix Sigma(t), and
//! the limiting Gaussian functionals built from it.
//!
//! Comparisons against many-body data are made on the characteristic-function
//! side; the complex "density" is provided but needs Re Sigma strictly
//! positive. The square root of det Sigma is fixed by the factorization
//! Sigma = P^{1/2} (1 + i P^{-1/2} R P^{-1/2}) P^{1/2} with P = Re Sigma,
//! R = Im Sigma: the eigenvalues of 1 + iK have real part 1, so the principal
//! branch is well-defined with no path tracking.

use crate::bogoliubov::BogoliubovPair;
use crate::error::{MflabError, Result};
use crate::lapack::{eigh_complex, eigh_real};
use crate::linalg::{C64, CMat, ONE, ZERO};
use crate::space::{Field, Observable, SingleParticleSpace};
use serde_json::json;

/// g_{j,t} = U(t;0) O_j phi_t + J(V(t;0) O_j phi_t).
#[derive(Clone, Debug)]
pub struct FluctuationVector {
    pub g: Field,
    pub t: f64,
    /// <phi_0, g>; real up to numerics.
    pub mean: C64,
    pub label: Option<String>,
}

pub fn fluctuation_vector(
    space: &SingleParticleSpace,
    pair: &BogoliubovPair,
    phi_t: &[C64],
    phi_0: &[C64],
    obs: &Observable,
    t: f64,
) -> Result<FluctuationVector> {
    if (pair.t - t).abs() > 1e-12 {
        return Err(MflabError::InvalidInput(format!(
            "Bogoliubov pair is at t = {}, state at t = {t}",
            pair.t
        )));
    }
    let ophi = obs.apply(phi_t);
    let u_part = pair.u.matvec(&ophi);
    let v_part = space.conjugate(&pair.v.matvec(&ophi));
    let g: Field = u_part.iter().zip(&v_part).map(|(a, b)| a + b).collect();
    let mean = space.inner(phi_0, &g);
    let scale = space.norm(&g).max(1.0);
    // exact in the continuum; numerically limited by the O(dt^2) Theta error
    if mean.im.abs() > 1e-6 * scale {
        return Err(MflabError::InvalidInput(format!(
            "<phi_0, g> has imaginary part {:.3e}; Bogoliubov blocks inconsistent",
            mean.im
        )));
    }
    Ok(FluctuationVector { g, t, mean, label: obs.label.clone() })
}

#[derive(Clone, Debug)]
pub struct CovarianceMatrix {
    /// Complex symmetric k x k matrix.
    pub sigma: CMat,
    pub t: f64,
    pub provenance: String,
    /// Ascending eigenvalues of P = Re Sigma.
    pub eigs_re_p: Vec<f64>,
}

/// Sigma_ij = <g_i, g_j> - <g_i, phi><phi, g_j> for i <= j; entries below the
/// diagonal are copied (not conjugated), making Sigma complex symmetric.
pub fn covariance_matrix(
    space: &SingleParticleSpace,
    gs: &[FluctuationVector],
    phi_0: &[C64],
    provenance: impl Into<String>,
) -> Result<CovarianceMatrix> {
    let k = gs.len();
    if k == 0 {
        return Err(MflabError::InvalidInput("no fluctuation vectors given".into()));
    }
    let t = gs[0].t;
    if gs.iter().any(|g| (g.t - t).abs() > 1e-12) {
        return Err(MflabError::InvalidInput(
            "fluctuation vectors come from different times".into(),
        ));
    }
    for g in gs {
        let mean = space.inner(phi_0, &g.g);
        if (mean - g.mean).norm() > 1e-9 * space.norm(&g.g).max(1.0) {
            return Err(MflabError::InvalidInput(format!(
                "stored mean for '{}' disagrees with <phi_0, g>; wrong initial state?",
                g.label.as_deref().unwrap_or("?")
            )));
        }
    }
    let mut sigma = CMat::zeros(k);
    for i in 0..k {
        for j in i..k {
            let gi_gj = space.inner(&gs[i].g, &gs[j].g);
            // <g_i, phi><phi, g_j> with mean = <phi_0, g>
            let val = gi_gj - gs[i].mean.conj() * gs[j].mean;
            sigma[(i, j)] = val;
            if i != j {
                sigma[(j, i)] = val;
            }
        }
    }
    let p: Vec<f64> = sigma.data.iter().map(|z| z.re).collect();
    let (eigs_re_p, _) = eigh_real(&p, k)?;
    if eigs_re_p[0] < -1e-8 {
        return Err(MflabError::CovarianceIndefinite(eigs_re_p[0]));
    }
    Ok(CovarianceMatrix { sigma, t, provenance: provenance.into(), eigs_re_p })
}

impl CovarianceMatrix {
    pub fn k(&self) -> usize {
        self.sigma.n
    }

    pub fn max_imag(&self) -> f64 {
        self.sigma.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let k = self.k();
        let grid = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
            (0..k).map(|i| (0..k).map(|j| f(i, j)).collect()).collect()
        };
        json!({
            "t": self.t,
            "k": k,
            "re": grid(&|i, j| self.sigma[(i, j)].re),
            "im": grid(&|i, j| self.sigma[(i, j)].im),
            "eigs_reP": self.eigs_re_p,
            "provenance": self.provenance,
        })
    }
}

/// e^{-(1/2) sum_ij Sigma_ij tau_i tau_j}.
pub fn gaussian_charfn(sigma: &CMat, tau: &[f64]) -> C64 {
    let k = sigma.n;
    assert_eq!(tau.len(), k);
    let mut q = ZERO;
    for i in 0..k {
        for j in 0..k {
            q += sigma[(i, j)] * tau[i] * tau[j];
        }
    }
    (-q / 2.0).exp()
}

/// Symmetric function of a real symmetric matrix via eigendecomposition.
fn real_matrix_function(a: &[f64], k: usize, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let (w, v) = eigh_real(a, k)?;
    let mut out = vec![0.0; k * k];
    for (idx, vec) in v.iter().enumerate() {
        let fw = f(w[idx]);
        for i in 0..k {
            for j in 0..k {
                out[i * k + j] += fw * vec[i] * vec[j];
            }
        }
    }
    Ok(out)
}

/// Complex Gaussian density (1.11): e^{-(1/2) x^T Sigma^{-1} x} /
/// sqrt((2 pi)^k det Sigma), branch fixed as described in the module docs.
pub fn gaussian_density(cov: &CovarianceMatrix, x: &[f64]) -> Result<C64> {
    let k = cov.k();
    assert_eq!(x.len(), k);
    if cov.eigs_re_p[0] < 1e-10 {
        return Err(MflabError::CovarianceSingular(cov.eigs_re_p[0]));
    }
    let p: Vec<f64> = cov.sigma.data.iter().map(|z| z.re).collect();
    let r: Vec<f64> = cov.sigma.data.iter().map(|z| z.im).collect();
    let p_inv_sqrt = real_matrix_function(&p, k, |w| 1.0 / w.sqrt())?;
    // K = P^{-1/2} R P^{-1/2}, real symmetric.
    let mut tmp = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            tmp[i * k + j] = (0..k).map(|l| p_inv_sqrt[i * k + l] * r[l * k + j]).sum();
        }
    }
    let mut kk = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            kk[i * k + j] = (0..k).map(|l| tmp[i * k + l] * p_inv_sqrt[l * k + j]).sum();
        }
    }
    let (mu, _) = eigh_real(&kk, k)?;
    // det P from its (positive) eigenvalues; principal sqrt of det(1 + iK)
    // factor by factor (each 1 + i mu has real part 1).
    let det_p: f64 = {
        let (wp, _) = eigh_real(&p, k)?;
        wp.iter().product()
    };
    let mut sqrt_det = C64::new(det_p.sqrt(), 0.0);
    for m in &mu {
        sqrt_det *= C64::new(1.0, *m).sqrt();
    }
    let (inv, _) = cov.sigma.inverse_det()?;
    let xc: Vec<C64> = x.iter().map(|&xi| C64::new(xi, 0.0)).collect();
    let ix = inv.matvec(&xc);
    let quad: C64 = xc.iter().zip(&ix).map(|(a, b)| a * b).sum();
    let norm = (2.0 * std::f64::consts::PI).powf(k as f64 / 2.0);
    Ok((-quad / 2.0).exp() / (norm * sqrt_det))
}

/// Result of the Fourier-side expectation quadrature.
#[derive(Clone, Debug)]
pub struct ExpectationResult {
    pub value: C64,
    /// |full grid - half grid| refinement estimate.
    pub est_error: f64,
    /// Set when the sampled f-hat tails have not decayed at the grid edge.
    pub tail_warning: bool,
}

/// E[f_1(X_1) ... f_k(X_k)] = (2 pi)^{-k} integral of
/// prod_j fhat_j(tau_j) e^{-(1/2) tau^T Sigma tau}, with the convention
/// fhat(tau) = integral f(x) e^{-i tau x} dx. Each `fhat` is sampled on the
/// same uniform tau grid.
pub fn gaussian_expectation(
    sigma: &CMat,
    tau_grid: &[f64],
    fhats: &[Vec<C64>],
) -> Result<ExpectationResult> {
    let k = sigma.n;
    let n = tau_grid.len();
    if fhats.len() != k {
        return Err(MflabError::InvalidInput(format!(
            "{} sampled transforms for k = {k}",
            fhats.len()
        )));
    }
    if n < 5 || fhats.iter().any(|f| f.len() != n) {
        return Err(MflabError::InvalidInput("tau grid too short or mismatched".into()));
    }
    let dt = tau_grid[1] - tau_grid[0];
    let mut tail_warning = false;
    for f in fhats {
        let peak = f.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        if f[0].norm() > 1e-8 * peak || f[n - 1].norm() > 1e-8 * peak {
            tail_warning = true;
        }
    }
    // Tensor-product trapezoid sum over the k-dimensional grid with stride s
    // (s = 1 full, s = 2 refinement check).
    let quad = |stride: usize| -> C64 {
        let idxs: Vec<usize> = (0..n).step_by(stride).collect();
        let np = idxs.len();
        let mut counter = vec![0usize; k];
        let mut acc = ZERO;
        loop {
            let mut weight = 1.0;
            let mut prod = ONE;
            let mut tau = vec![0.0; k];
            for (dim, &ci) in counter.iter().enumerate() {
                let gi = idxs[ci];
                if ci == 0 || ci == np - 1 {
                    weight *= 0.5;
                }
                tau[dim] = tau_grid[gi];
                prod *= fhats[dim][gi];
            }
            acc += prod * gaussian_charfn(sigma, &tau) * weight;
            // mixed-radix increment
            let mut dim = 0;
            loop {
                if dim == k {
                    return acc * (dt * stride as f64 / (2.0 * std::f64::consts::PI)).powi(k as i32);
                }
                counter[dim] += 1;
                if counter[dim] < np {
                    break;
                }
                counter[dim] = 0;
                dim += 1;
            }
        }
    };
    let full = quad(1);
    let coarse = quad(2);
    Ok(ExpectationResult { value: full, est_error: (full - coarse).norm(), tail_warning })
}

/// Verification helper: trace-norm style maximum deviation between the
/// charfn and the Fourier transform of the density over a tau list.
pub fn charfn_density_consistency(
    cov: &CovarianceMatrix,
    x_extent: f64,
    x_points: usize,
    taus: &[Vec<f64>],
) -> Result<f64> {
    let k = cov.k();
    let dx = 2.0 * x_extent / (x_points - 1) as f64;
    let mut worst: f64 = 0.0;
    for tau in taus {
        // integral of density(x) e^{i tau . x} dx over the box
        let mut counter = vec![0usize; k];
        let mut acc = ZERO;
        'outer: loop {
            let mut x = vec![0.0; k];
            let mut weight = 1.0;
            for (dim, &c) in counter.iter().enumerate() {
                x[dim] = -x_extent + c as f64 * dx;
                if c == 0 || c == x_points - 1 {
                    weight *= 0.5;
                }
            }
            let phase: f64 = tau.iter().zip(&x).map(|(t, xi)| t * xi).sum();
            acc += gaussian_density(cov, &x)? * C64::new(0.0, phase).exp() * weight;
            let mut dim = 0;
            loop {
                if dim == k {
                    break 'outer;
                }
                counter[dim] += 1;
                if counter[dim] < x_points {
                    break;
                }
                counter[dim] = 0;
                dim += 1;
            }
        }
        let integral = acc * dx.powi(k as i32);
        let cf = gaussian_charfn(&cov.sigma, tau);
        worst = worst.max((integral - cf).norm());
    }
    Ok(worst)
}

/// Eigendecomposition helper for observers of Re Sigma (used in reports).
pub fn hermitian_eigs(m: &CMat) -> Result<Vec<f64>> {
    Ok(eigh_complex(&m.data, m.n)?.0)
}
