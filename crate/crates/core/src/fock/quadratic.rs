//! The limiting quadratic generator on Fock space and the fluctuation
//! dynamics it approximates.

use crate::bogoliubov::assemble_generator;
use crate::error::{MflabError, Result};
use crate::hartree::HartreeTrajectory;
use crate::linalg::{self, C64, CMat, ZERO};
use crate::space::SingleParticleSpace;

use super::basis::OccupationBasis;
use super::evolve::{evolve_state, lanczos_expm_multiply, EvolveMethod};
use super::op::{build_hamiltonian, second_quantize, SparseOperator};
use super::weyl::{coherent_state, weyl_apply};

/// P_ab = sum_cd W_abcd phi_c phi_d (symmetric).
pub fn pair_matrix(space: &SingleParticleSpace, phi: &[C64]) -> CMat {
    let m = space.dim;
    let mut p = CMat::zeros(m);
    let mut e = vec![ZERO; m];
    for b in 0..m {
        e[b] = linalg::ONE;
        let col = space.w_apply(&e, phi, phi);
        for a in 0..m {
            p[(a, b)] = col[a];
        }
        e[b] = ZERO;
    }
    p
}

/// L(t) = dGamma(D(t)) + (1/2) sum_ab (P_ab a_a* a_b* + conj(P_ab) a_b a_a).
pub fn assemble_quadratic_generator(
    space: &SingleParticleSpace,
    phi: &[C64],
    t: f64,
    basis: &OccupationBasis,
) -> Result<SparseOperator> {
    if !basis.is_truncated() {
        return Err(MflabError::Basis(
            "the quadratic generator does not conserve particle number; use a truncated basis"
                .into(),
        ));
    }
    if basis.m != space.dim {
        return Err(MflabError::Basis(format!(
            "space has {} modes, basis has {}",
            space.dim, basis.m
        )));
    }
    let blocks = assemble_generator(space, phi, t)?;
    let quad = second_quantize(basis, &blocks.d)?;
    let p = pair_matrix(space, phi);
    let m = basis.m;
    let mut triplets = Vec::new();
    for i in 0..quad.dim {
        for k in quad.row_ptr[i]..quad.row_ptr[i + 1] {
            triplets.push((i, quad.col_idx[k], quad.vals[k]));
        }
    }
    for i in 0..basis.dim() {
        let occ = basis.occ(i);
        for a in 0..m {
            for b in 0..m {
                let pab = p[(a, b)];
                if pab == ZERO {
                    continue;
                }
                // (1/2) P_ab a_a* a_b*
                let mut target = occ.to_vec();
                let mut amp = (target[b] as f64 + 1.0).sqrt();
                target[b] += 1;
                amp *= (target[a] as f64 + 1.0).sqrt();
                target[a] += 1;
                if let Some(j) = basis.index_of(&target) {
                    triplets.push((j, i, pab * (0.5 * amp)));
                }
                // (1/2) conj(P_ab) a_b a_a
                if occ[a] > 0 {
                    let mut target = occ.to_vec();
                    let mut amp = (target[a] as f64).sqrt();
                    target[a] -= 1;
                    if target[b] > 0 {
                        amp *= (target[b] as f64).sqrt();
                        target[b] -= 1;
                        let j = basis.index_of(&target).expect("lower state always kept");
                        triplets.push((j, i, pab.conj() * (0.5 * amp)));
                    }
                }
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, true)
}

/// Propagate psi under the time-dependent quadratic generator with midpoint
/// frozen-coefficient steps e^{-i dt L(t_mid)}.
pub fn evolve_quadratic(
    space: &SingleParticleSpace,
    traj: &HartreeTrajectory,
    basis: &OccupationBasis,
    psi0: &[C64],
    t: f64,
    dt: f64,
) -> Result<Vec<C64>> {
    if t < 0.0 || dt <= 0.0 {
        return Err(MflabError::InvalidInput("need t >= 0 and dt > 0".into()));
    }
    let n_steps = (t / dt).round() as usize;
    if (n_steps as f64 * dt - t).abs() > 1e-9 {
        return Err(MflabError::InvalidInput(format!("dt = {dt} does not divide t = {t}")));
    }
    let norm0 = linalg::norm(psi0);
    let mut psi = psi0.to_vec();
    for step in 0..n_steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let mut phi = traj.state_at(t_mid)?;
        let nrm = space.norm(&phi);
        for c in phi.iter_mut() {
            *c /= nrm;
        }
        let gen = assemble_quadratic_generator(space, &phi, t_mid, basis)?;
        psi = lanczos_expm_multiply(
            &|x| gen.apply(x),
            &psi,
            C64::new(0.0, -dt),
            1e-11,
            gen.norm_bound(),
        )?;
        let drift = (linalg::norm(&psi) - norm0).abs();
        if drift > 1e-5 {
            return Err(MflabError::Truncation(format!(
                "norm drift {drift:.3e} at t = {:.6}; pair creation leaks past the \
                 truncation edge, raise n_max",
                (step + 1) as f64 * dt
            )));
        }
    }
    Ok(psi)
}

/// Integral over [0, t] of Q(phi_s) = <phi phi, W phi phi> along the
/// trajectory (composite Simpson on the interpolant).
pub fn hartree_scalar_integral(
    space: &SingleParticleSpace,
    traj: &HartreeTrajectory,
    t: f64,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let q_at = |s: f64| -> Result<f64> {
        let mut phi = traj.state_at(s)?;
        let nrm = space.norm(&phi);
        for c in phi.iter_mut() {
            *c /= nrm;
        }
        Ok(space.inner(&phi, &space.w_apply(&phi, &phi, &phi)).re)
    };
    let mut n = (t / traj.dt).round() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let h = t / n as f64;
    let mut acc = q_at(0.0)? + q_at(t)?;
    for k in 1..n {
        acc += q_at(k as f64 * h)? * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(acc * h / 3.0)
}

/// Exact fluctuation state
/// e^{-i (N/2) int_0^t Q(phi_s) ds} W*(sqrt(N) phi_t) e^{-i H_N t} W(sqrt(N) phi_0) Omega
/// on the truncated basis.
///
/// The Weyl conjugation leaves a scalar -(N/2) Q(phi_t) in the generator; the
/// quadratic limit drops it, so the bare conjugated dynamics differs from
/// U_inf by a phase growing linearly in N. The prefactor removes it.
pub fn fluctuation_state(
    space: &SingleParticleSpace,
    traj: &HartreeTrajectory,
    basis: &OccupationBasis,
    n_particles: usize,
    t: f64,
) -> Result<Vec<C64>> {
    let scale = (n_particles as f64).sqrt();
    let f0: Vec<C64> = traj.states[0].iter().map(|&c| c * scale).collect();
    let displaced = coherent_state(basis, &f0)?;
    let h = build_hamiltonian(space, n_particles, basis)?;
    let evolved = evolve_state(&h, &displaced, t, EvolveMethod::Auto)?;
    let phi_t = traj.state_at(t)?;
    // interpolation leaves the unit sphere by O(dt^4); the displacement must
    // be exactly sqrt(N) times a unit vector
    let nrm = space.norm(&phi_t);
    let ft: Vec<C64> = phi_t.iter().map(|&c| c * (scale / nrm)).collect();
    let mut psi = weyl_apply(basis, &ft, &evolved, true)?;
    let theta = -0.5 * n_particles as f64 * hartree_scalar_integral(space, traj, t)?;
    let phase = C64::new(0.0, theta).exp();
    for c in psi.iter_mut() {
        *c *= phase;
    }
    Ok(psi)
}
