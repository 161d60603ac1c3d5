//! Joint characteristic function of centered fluctuation observables on a
//! many-body state.

use crate::error::{MflabError, Result};
use crate::linalg::{self, C64, CMat};
use crate::space::SingleParticleSpace;

use super::basis::OccupationBasis;
use super::evolve::{lanczos_expm_multiply, EigPropagator, FULL_EIG_LIMIT};
use super::op::{second_quantize, SparseOperator};

/// One centered, 1/sqrt(N)-scaled observable dGamma(O - <phi,O phi>)/sqrt(N),
/// with a cached eigendecomposition when the dimension allows it.
struct CenteredObservable {
    op: SparseOperator,
    prop: Option<EigPropagator>,
}

/// Evaluates chi(tau) = <psi, prod_j e^{i tau_j O_j} psi> for a family of
/// fluctuation observables, with the rightmost factor applied first.
pub struct JointCharfn {
    obs: Vec<CenteredObservable>,
    psi: Vec<C64>,
}

impl JointCharfn {
    pub fn new(
        space: &SingleParticleSpace,
        basis: &OccupationBasis,
        psi: &[C64],
        observables: &[CMat],
        phi_t: &[C64],
        n_particles: usize,
    ) -> Result<Self> {
        if psi.len() != basis.dim() {
            return Err(MflabError::Basis("state length does not match basis".into()));
        }
        if n_particles == 0 {
            return Err(MflabError::InvalidInput("need N >= 1".into()));
        }
        let inv_sqrt_n = 1.0 / (n_particles as f64).sqrt();
        let mut obs = Vec::with_capacity(observables.len());
        for o in observables {
            if o.hermiticity_defect() > 1e-10 * o.max_abs().max(1.0) {
                return Err(MflabError::InvalidInput("observable is not Hermitian".into()));
            }
            let ophi = o.matvec(phi_t);
            let mean = space.inner(phi_t, &ophi);
            let mut centered = o.clone();
            for a in 0..centered.n {
                centered[(a, a)] -= mean;
            }
            let op = second_quantize(basis, &centered)?.scale(C64::new(inv_sqrt_n, 0.0));
            let prop = if basis.dim() < FULL_EIG_LIMIT {
                Some(EigPropagator::new(&op)?)
            } else {
                None
            };
            obs.push(CenteredObservable { op, prop });
        }
        Ok(JointCharfn { obs, psi: psi.to_vec() })
    }

    pub fn k(&self) -> usize {
        self.obs.len()
    }

    pub fn eval(&self, tau: &[f64]) -> Result<C64> {
        if tau.len() != self.obs.len() {
            return Err(MflabError::InvalidInput(format!(
                "got {} frequencies for {} observables",
                tau.len(),
                self.obs.len()
            )));
        }
        let mut chi = self.psi.clone();
        for (ob, &t) in self.obs.iter().zip(tau).rev() {
            if t == 0.0 {
                continue;
            }
            let z = C64::new(0.0, t);
            chi = match &ob.prop {
                Some(p) => p.apply_exp(&chi, z),
                None => lanczos_expm_multiply(
                    &|x| ob.op.apply(x),
                    &chi,
                    z,
                    1e-11,
                    ob.op.norm_bound(),
                )?,
            };
        }
        let value = linalg::dot(&self.psi, &chi);
        let norm2 = self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if value.norm() > norm2 + 1e-9 {
            return Err(MflabError::KrylovFailure(format!(
                "characteristic function modulus {:.12} exceeds the state norm",
                value.norm()
            )));
        }
        Ok(value)
    }
}

/// Factorization oracle at t = 0 on a product state:
/// chi(tau) = (<phi, prod_j e^{i tau_j (O_j - <phi,O_j phi>)/sqrt(N)} phi>)^N.
pub fn product_oracle_t0(
    space: &SingleParticleSpace,
    phi: &[C64],
    observables: &[CMat],
    n_particles: usize,
    tau: &[f64],
) -> Result<C64> {
    if tau.len() != observables.len() {
        return Err(MflabError::InvalidInput("tau/observable length mismatch".into()));
    }
    let sqrt_n = (n_particles as f64).sqrt();
    let mut chi = phi.to_vec();
    for (o, &t) in observables.iter().zip(tau).rev() {
        let mean = space.inner(phi, &o.matvec(phi));
        let mut gen = o.scale(C64::new(0.0, t / sqrt_n));
        for a in 0..gen.n {
            gen[(a, a)] -= C64::new(0.0, t / sqrt_n) * mean;
        }
        chi = gen.expm().matvec(&chi);
    }
    let single = space.inner(phi, &chi);
    Ok(single.powu(n_particles as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::basis::{OccupationBasis, Sector};
    use crate::fock::weyl::product_state;
    use crate::linalg::{ONE, ZERO};
    use crate::space::two_mode_space;
    use crate::util::DetRng;

    fn random_hermitian(rng: &mut DetRng, m: usize) -> CMat {
        let mut o = CMat::zeros(m);
        for i in 0..m {
            o[(i, i)] = C64::new(rng.next_f64(), 0.0);
            for j in i + 1..m {
                o[(i, j)] = rng.next_complex();
                o[(j, i)] = o[(i, j)].conj();
            }
        }
        o
    }

    #[test]
    fn zero_frequencies_give_one() {
        let space = two_mode_space(0.8, 0.5);
        let b = OccupationBasis::new(2, Sector::FixedN(6)).unwrap();
        let phi = vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)];
        let psi = product_state(&phi, &b).unwrap();
        let mut rng = DetRng::new(3);
        let obs = vec![random_hermitian(&mut rng, 2), random_hermitian(&mut rng, 2)];
        let cf = JointCharfn::new(&space, &b, &psi, &obs, &phi, 6).unwrap();
        let v = cf.eval(&[0.0, 0.0]).unwrap();
        assert!((v - ONE).norm() < 1e-12);
    }

    #[test]
    fn identity_observables_give_one() {
        // centered identity vanishes on the fixed-N sector
        let space = two_mode_space(0.8, 0.5);
        let b = OccupationBasis::new(2, Sector::FixedN(5)).unwrap();
        let phi = vec![C64::new(0.28, 0.96), ZERO];
        let psi = product_state(&phi, &b).unwrap();
        let obs = vec![CMat::eye(2)];
        let cf = JointCharfn::new(&space, &b, &psi, &obs, &phi, 5).unwrap();
        for tau in [0.3, -1.7, 3.9] {
            let v = cf.eval(&[tau]).unwrap();
            // dGamma(1 - 1) = 0 except the constant shift N<phi,phi> - N = 0
            assert!((v - ONE).norm() < 1e-10, "tau = {tau}: {v}");
        }
    }

    #[test]
    fn product_state_matches_factorization_oracle() {
        let space = two_mode_space(0.8, 0.5);
        let mut rng = DetRng::new(17);
        let obs = vec![
            random_hermitian(&mut rng, 2),
            random_hermitian(&mut rng, 2),
            random_hermitian(&mut rng, 2),
        ];
        let phi = {
            let mut v = rng.complex_vec(2);
            let nrm = space.norm(&v);
            for c in v.iter_mut() {
                *c /= nrm;
            }
            v
        };
        for n in [4usize, 16, 64] {
            let b = OccupationBasis::new(2, Sector::FixedN(n)).unwrap();
            let psi = product_state(&phi, &b).unwrap();
            let cf = JointCharfn::new(&space, &b, &psi, &obs, &phi, n).unwrap();
            for tau in [[0.5, -0.3, 1.1], [2.0, 4.0, -1.5], [-3.7, 0.0, 0.4]] {
                let got = cf.eval(&tau).unwrap();
                let oracle = product_oracle_t0(&space, &phi, &obs, n, &tau).unwrap();
                assert!(
                    (got - oracle).norm() < 1e-9,
                    "N = {n}, tau = {tau:?}: {got} vs {oracle}"
                );
                assert!(got.norm() <= 1.0 + 1e-9);
            }
        }
    }
}
