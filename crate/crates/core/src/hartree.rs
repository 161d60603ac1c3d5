//! Hartree flow i d/dt phi = K phi + (V*|phi|^2) phi.
//!
//! Two integrators: Strang splitting on position grids (the potential substep
//! is exact, see below) and classical RK4 on any space. Norm is never
//! renormalized; drift is a diagnostic and aborts the run past 1e-6.

use crate::error::{MflabError, Result};
use crate::linalg::{self, C64, ZERO};
use crate::space::{BasisKind, Field, SingleParticleSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HartreeMethod {
    Strang,
    Rk4,
}

impl std::str::FromStr for HartreeMethod {
    type Err = MflabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strang" => Ok(HartreeMethod::Strang),
            "rk4" => Ok(HartreeMethod::Rk4),
            other => Err(MflabError::Config(format!("unknown hartree method '{other}'"))),
        }
    }
}

/// Time derivative -i(K c + (V*|c|^2) c).
pub fn hartree_rhs(space: &SingleParticleSpace, c: &[C64]) -> Field {
    let mut out = space.apply_kinetic(c);
    let nl = space.w_apply(c, c, c);
    for (o, n) in out.iter_mut().zip(&nl) {
        *o = -linalg::I * (*o + n);
    }
    out
}

/// Conserved energy <c, K c> + (1/2) <|c|^2, V*|c|^2>.
pub fn hartree_energy(space: &SingleParticleSpace, c: &[C64]) -> f64 {
    let kc = space.apply_kinetic(c);
    space.inner(c, &kc).re + space.interaction_energy(c)
}

/// Dense trajectory of the Hartree flow from t = 0.
#[derive(Clone, Debug)]
pub struct HartreeTrajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub energy: Vec<f64>,
    pub norms: Vec<f64>,
}

impl HartreeTrajectory {
    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().unwrap()
    }

    /// State at an arbitrary time by cubic 4-point Lagrange interpolation on
    /// the stored nodes (linear if fewer than 4 nodes exist).
    pub fn state_at(&self, t: f64) -> Result<Field> {
        let t_max = self.t_max();
        if t < -1e-12 || t > t_max + 1e-12 {
            return Err(MflabError::OutOfRange { t, t_max });
        }
        let n = self.times.len();
        let pos = (t / self.dt).round();
        if (t - pos * self.dt).abs() < 1e-12 && (pos as usize) < n {
            return Ok(self.states[pos as usize].clone());
        }
        let i = ((t / self.dt).floor() as usize).min(n - 2);
        if n < 4 {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            let w = (t - t0) / (t1 - t0);
            return Ok(self.states[i]
                .iter()
                .zip(&self.states[i + 1])
                .map(|(a, b)| a * (1.0 - w) + b * w)
                .collect());
        }
        let lo = i.saturating_sub(1).min(n - 4);
        let dim = self.states[0].len();
        let mut out = vec![ZERO; dim];
        for j in lo..lo + 4 {
            let mut lj = 1.0;
            for k in lo..lo + 4 {
                if k != j {
                    lj *= (t - self.times[k]) / (self.times[j] - self.times[k]);
                }
            }
            linalg::axpy(C64::new(lj, 0.0), &self.states[j], &mut out);
        }
        Ok(out)
    }
}

fn rk4_step(space: &SingleParticleSpace, phi: &[C64], dt: f64) -> Field {
    let k1 = hartree_rhs(space, phi);
    let stage = |base: &[C64], k: &[C64], h: f64| -> Field {
        base.iter().zip(k).map(|(b, ki)| b + ki * h).collect()
    };
    let k2 = hartree_rhs(space, &stage(phi, &k1, dt / 2.0));
    let k3 = hartree_rhs(space, &stage(phi, &k2, dt / 2.0));
    let k4 = hartree_rhs(space, &stage(phi, &k3, dt));
    phi.iter()
        .enumerate()
        .map(|(a, p)| p + (k1[a] + (k2[a] + k3[a]) * 2.0 + k4[a]) * (dt / 6.0))
        .collect()
}

fn strang_step(space: &SingleParticleSpace, phi: &[C64], dt: f64) -> Result<Field> {
    let mult = space
        .kinetic_multiplier
        .as_ref()
        .ok_or_else(|| MflabError::InvalidInput("strang splitting needs a grid space".into()))?;
    let mut buf = phi.to_vec();
    let half_kinetic = |buf: &mut Vec<C64>| -> Result<()> {
        space.fft_forward(buf)?;
        for (z, e) in buf.iter_mut().zip(mult) {
            *z *= C64::new(0.0, -e * dt / 2.0).exp();
        }
        space.fft_inverse(buf)
    };
    half_kinetic(&mut buf)?;
    // Potential substep: during i d/dt phi = (V*|phi|^2) phi the potential is
    // real, so |phi(x)| is pointwise conserved, hence V*|phi|^2 is constant
    // over the substep and the phase rotation below is exact.
    let density: Vec<C64> = buf.iter().map(|z| C64::new(z.norm_sqr(), 0.0)).collect();
    let u = space.convolve_potential(&density)?;
    for (z, ua) in buf.iter_mut().zip(&u) {
        *z *= C64::new(0.0, -ua.re * dt).exp();
    }
    half_kinetic(&mut buf)?;
    Ok(buf)
}

pub fn evolve_hartree(
    space: &SingleParticleSpace,
    phi0: &[C64],
    t_final: f64,
    dt: f64,
    method: HartreeMethod,
) -> Result<HartreeTrajectory> {
    if (space.norm(phi0) - 1.0).abs() > 1e-10 {
        return Err(MflabError::InvalidInput(format!(
            "initial state has norm {}, expected 1",
            space.norm(phi0)
        )));
    }
    if dt <= 0.0 || t_final < 0.0 {
        return Err(MflabError::InvalidInput("need dt > 0 and T >= 0".into()));
    }
    let n_steps_f = t_final / dt;
    let n_steps = n_steps_f.round() as usize;
    if (n_steps_f - n_steps as f64).abs() > 1e-9 * n_steps_f.max(1.0) {
        return Err(MflabError::InvalidInput(format!(
            "dt = {dt} does not divide T = {t_final}"
        )));
    }
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut energy = Vec::with_capacity(n_steps + 1);
    let mut norms = Vec::with_capacity(n_steps + 1);
    let mut phi = phi0.to_vec();
    for step in 0..=n_steps {
        let t = step as f64 * dt;
        let nrm = space.norm(&phi);
        if (nrm - 1.0).abs() > 1e-6 {
            return Err(MflabError::NormDrift { t, drift: (nrm - 1.0).abs(), tol: 1e-6 });
        }
        times.push(t);
        norms.push(nrm);
        energy.push(hartree_energy(space, &phi));
        states.push(phi.clone());
        if step < n_steps {
            phi = match method {
                HartreeMethod::Rk4 => rk4_step(space, &phi, dt),
                HartreeMethod::Strang => strang_step(space, &phi, dt)?,
            };
        }
    }
    Ok(HartreeTrajectory { dt, times, states, energy, norms })
}

/// Normalized uniform state (constant density) on any backend: the zero-mode
/// plane wave.
pub fn uniform_state(space: &SingleParticleSpace) -> Field {
    match &space.kind {
        BasisKind::Grid1d { length, points } => {
            vec![C64::new(1.0 / length.sqrt(), 0.0); *points]
        }
        BasisKind::FourierModes { k_max, .. } => {
            let mut f = vec![ZERO; space.dim];
            f[*k_max as usize] = linalg::ONE;
            f
        }
        BasisKind::Abstract => {
            let mut f = vec![ZERO; space.dim];
            f[0] = linalg::ONE;
            f
        }
    }
}
