//! Finite-dimensional single-particle Hilbert spaces.
//!
//! Two interchangeable backends sit behind one interface: a periodic position
//! grid in one dimension (FFT convolution) and a mode-truncated space carrying
//! the full two-body tensor W_{abcd}. Mode spaces are mandatory when
//! cross-validating against many-body Fock simulations so both sides use the
//! identical single-particle space.
//!
//! All pointwise products needed by mode spaces (e.g. (V*(phibar f))phi) are
//! evaluated through the defining contractions of W rather than by
//! transforming to a grid; this avoids aliasing decisions.
//!
//! Fields are plain coefficient vectors; the owning space is always passed
//! explicitly, which keeps the types free of lifetimes and maps directly onto
//! the Python bindings.

use crate::error::{MflabError, Result};
use crate::linalg::{self, C64, CMat, ZERO};
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub type Field = Vec<C64>;

/// Named interaction kernels V(x) on the torus of length L. All are real and
/// even; `Tabulated` samples are checked for evenness at construction.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    Zero,
    /// v0 * exp(-x^2 / (2 sigma^2)), periodized over the torus.
    Gaussian { v0: f64, sigma: f64 },
    /// v0 * cos(2 pi n x / L).
    Cosine { v0: f64, n: i64 },
    /// Samples V(x_j) at x_j = j L / len on a uniform grid.
    Tabulated(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BasisKind {
    Grid1d { points: usize, length: f64 },
    FourierModes { length: f64, k_max: i64 },
    Abstract,
}

enum Interaction {
    /// Kernel sampled at grid points; convolution by FFT.
    GridKernel { values: Vec<f64> },
    /// Full two-body tensor, row-major over (a, b, c, d).
    Tensor { w: Vec<C64> },
}

pub struct SingleParticleSpace {
    pub dim: usize,
    pub kind: BasisKind,
    /// Hermitian matrix of -Laplacian projected to the basis.
    pub kinetic: CMat,
    /// Kinetic Fourier multiplier in FFT-bin order (grid spaces only).
    pub kinetic_multiplier: Option<Vec<f64>>,
    /// Quadrature weight of the inner product (h for grids, 1 otherwise).
    pub weight: f64,
    /// Conjugation permutation: (Jf)_a = conj(f_{pi(a)}).
    pub conj_perm: Vec<usize>,
    /// V-hat(k) for k = -2 k_max .. 2 k_max (Fourier-mode spaces only).
    vhat_table: Option<Vec<f64>>,
    interaction: Interaction,
    fft_fwd: Option<Arc<dyn Fft<f64>>>,
    fft_inv: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for SingleParticleSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SingleParticleSpace")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Evenness check for tabulated kernels; names the first asymmetric sample.
fn check_even_samples(v: &[f64]) -> Result<()> {
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for j in 1..v.len() {
        let mirror = v[v.len() - j];
        if (v[j] - mirror).abs() > 1e-12 * scale {
            return Err(MflabError::KernelNotEven(format!(
                "sample {j} = {} but sample {} = {}",
                v[j],
                v.len() - j,
                mirror
            )));
        }
    }
    Ok(())
}

/// Kernel values V(x_j) on the uniform grid x_j = j L / M.
fn kernel_on_grid(kernel: &KernelSpec, m_points: usize, length: f64) -> Result<Vec<f64>> {
    match kernel {
        KernelSpec::Zero => Ok(vec![0.0; m_points]),
        KernelSpec::Cosine { v0, n } => Ok((0..m_points)
            .map(|j| v0 * (2.0 * PI * (*n as f64) * j as f64 / m_points as f64).cos())
            .collect()),
        KernelSpec::Gaussian { v0, sigma } => {
            if *sigma <= 0.0 {
                return Err(MflabError::InvalidInput("gaussian kernel needs sigma > 0".into()));
            }
            let images = (10.0 * sigma / length).ceil() as i64 + 1;
            Ok((0..m_points)
                .map(|j| {
                    let x = j as f64 * length / m_points as f64;
                    (-images..=images)
                        .map(|p| {
                            let u = x - p as f64 * length;
                            v0 * (-u * u / (2.0 * sigma * sigma)).exp()
                        })
                        .sum()
                })
                .collect())
        }
        KernelSpec::Tabulated(v) => {
            if v.len() != m_points {
                return Err(MflabError::InvalidInput(format!(
                    "tabulated kernel has {} samples, grid has {m_points}",
                    v.len()
                )));
            }
            check_even_samples(v)?;
            Ok(v.clone())
        }
    }
}

/// Fourier coefficient V-hat(k) = integral over the torus of V(x) e^{-2 pi i k x / L}.
/// Real for every supported kernel because V is even.
pub fn kernel_fourier(kernel: &KernelSpec, length: f64, k: i64) -> Result<f64> {
    match kernel {
        KernelSpec::Zero => Ok(0.0),
        KernelSpec::Cosine { v0, n } => {
            Ok(if k.abs() == n.abs() && *n != 0 { v0 * length / 2.0 } else if *n == 0 && k == 0 { v0 * length } else { 0.0 })
        }
        KernelSpec::Gaussian { v0, sigma } => {
            // Periodization leaves Fourier coefficients of the infinite-line
            // gaussian untouched (Poisson summation).
            let omega = 2.0 * PI * k as f64 / length;
            Ok(v0 * sigma * (2.0 * PI).sqrt() * (-omega * omega * sigma * sigma / 2.0).exp())
        }
        KernelSpec::Tabulated(v) => {
            check_even_samples(v)?;
            let mt = v.len() as i64;
            if 2 * k.abs() >= mt {
                return Err(MflabError::InvalidInput(format!(
                    "V-hat({k}) requested but only {mt} kernel samples are tabulated"
                )));
            }
            let h = length / mt as f64;
            Ok(h * v
                .iter()
                .enumerate()
                .map(|(j, vj)| vj * (2.0 * PI * k as f64 * j as f64 / mt as f64).cos())
                .sum::<f64>())
        }
    }
}

/// Periodic position grid on [0, L) with M points, d = 1 only.
pub fn make_grid_space(
    d: usize,
    m_points: usize,
    length: f64,
    kernel: &KernelSpec,
) -> Result<SingleParticleSpace> {
    if d != 1 {
        return Err(MflabError::InvalidInput(format!(
            "only d = 1 grids are supported (requested d = {d})"
        )));
    }
    if m_points < 4 || !m_points.is_power_of_two() {
        return Err(MflabError::InvalidInput(format!(
            "grid points must be a power of two >= 4 (got {m_points})"
        )));
    }
    if length <= 0.0 {
        return Err(MflabError::InvalidInput("box length must be positive".into()));
    }
    let values = kernel_on_grid(kernel, m_points, length)?;
    let mut planner = FftPlanner::new();
    let fft_fwd = planner.plan_fft_forward(m_points);
    let fft_inv = planner.plan_fft_inverse(m_points);
    // FFT bin j carries integer frequency k = j for j < M/2, else j - M; the
    // M/2 bin is conventionally assigned k = -M/2.
    let multiplier: Vec<f64> = (0..m_points)
        .map(|j| {
            let k = if j < m_points / 2 { j as i64 } else { j as i64 - m_points as i64 };
            let omega = 2.0 * PI * k as f64 / length;
            omega * omega
        })
        .collect();
    // Dense kinetic = F^{-1} diag(multiplier) F, built column by column.
    let mut kinetic = CMat::zeros(m_points);
    for c in 0..m_points {
        let mut buf = vec![ZERO; m_points];
        buf[c] = linalg::ONE;
        fft_fwd.process(&mut buf);
        for (z, e) in buf.iter_mut().zip(&multiplier) {
            *z *= *e;
        }
        fft_inv.process(&mut buf);
        let inv_m = 1.0 / m_points as f64;
        for r in 0..m_points {
            kinetic[(r, c)] = buf[r] * inv_m;
        }
    }
    Ok(SingleParticleSpace {
        dim: m_points,
        kind: BasisKind::Grid1d { points: m_points, length },
        kinetic,
        kinetic_multiplier: Some(multiplier),
        weight: length / m_points as f64,
        conj_perm: (0..m_points).collect(),
        vhat_table: None,
        interaction: Interaction::GridKernel { values },
        fft_fwd: Some(fft_fwd),
        fft_inv: Some(fft_inv),
    })
}

/// Plane-wave modes k = -k_max .. k_max on the torus of length L; index
/// a = k + k_max. W carries momentum conservation.
pub fn make_fourier_mode_space(
    length: f64,
    k_max: i64,
    kernel: &KernelSpec,
) -> Result<SingleParticleSpace> {
    if k_max < 1 {
        return Err(MflabError::InvalidInput(format!("k_max must be >= 1 (got {k_max})")));
    }
    if length <= 0.0 {
        return Err(MflabError::InvalidInput("box length must be positive".into()));
    }
    let m = (2 * k_max + 1) as usize;
    let mut vhat = Vec::with_capacity((4 * k_max + 1) as usize);
    for q in -2 * k_max..=2 * k_max {
        vhat.push(kernel_fourier(kernel, length, q)?);
    }
    let lookup = |q: i64| vhat[(q + 2 * k_max) as usize];
    let mut kinetic = CMat::zeros(m);
    for a in 0..m {
        let k = a as i64 - k_max;
        let omega = 2.0 * PI * k as f64 / length;
        kinetic[(a, a)] = C64::new(omega * omega, 0.0);
    }
    let mut w = vec![ZERO; m * m * m * m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let (ka, kb, kc, kd) = (
                        a as i64 - k_max,
                        b as i64 - k_max,
                        c as i64 - k_max,
                        d as i64 - k_max,
                    );
                    if ka + kb == kc + kd {
                        w[((a * m + b) * m + c) * m + d] =
                            C64::new(lookup(ka - kc) / length, 0.0);
                    }
                }
            }
        }
    }
    Ok(SingleParticleSpace {
        dim: m,
        kind: BasisKind::FourierModes { length, k_max },
        kinetic,
        kinetic_multiplier: None,
        weight: 1.0,
        conj_perm: (0..m).rev().collect(),
        vhat_table: Some(vhat),
        interaction: Interaction::Tensor { w },
        fft_fwd: None,
        fft_inv: None,
    })
}

/// Abstract mode space from explicit kinetic matrix, W tensor and conjugation
/// permutation. All structural invariants are verified here.
pub fn make_abstract_space(
    kinetic: CMat,
    w: Vec<C64>,
    conj_perm: Vec<usize>,
) -> Result<SingleParticleSpace> {
    let m = kinetic.n;
    if w.len() != m * m * m * m {
        return Err(MflabError::InvalidInput(format!(
            "W tensor has {} entries, expected m^4 = {}",
            w.len(),
            m * m * m * m
        )));
    }
    if conj_perm.len() != m || (0..m).any(|a| conj_perm[a] >= m || conj_perm[conj_perm[a]] != a) {
        return Err(MflabError::InvalidInput(
            "conj_perm must be an involution on 0..m".into(),
        ));
    }
    let scale = kinetic.max_abs().max(1.0);
    if kinetic.hermiticity_defect() > 1e-12 * scale {
        return Err(MflabError::InvalidInput("kinetic matrix is not Hermitian".into()));
    }
    let wscale = w.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * m + b) * m + c) * m + d;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let x = w[idx(a, b, c, d)];
                    if (x - w[idx(b, a, d, c)]).norm() > 1e-12 * wscale {
                        return Err(MflabError::InvalidInput(format!(
                            "W tensor breaks W_abcd = W_badc at ({a},{b},{c},{d})"
                        )));
                    }
                    if (x - w[idx(c, d, a, b)].conj()).norm() > 1e-12 * wscale {
                        return Err(MflabError::InvalidInput(format!(
                            "W tensor breaks W_abcd = conj(W_cdab) at ({a},{b},{c},{d})"
                        )));
                    }
                }
            }
        }
    }
    Ok(SingleParticleSpace {
        dim: m,
        kind: BasisKind::Abstract,
        kinetic,
        kinetic_multiplier: None,
        weight: 1.0,
        conj_perm,
        vhat_table: None,
        interaction: Interaction::Tensor { w },
        fft_fwd: None,
        fft_inv: None,
    })
}

/// Two-mode model: K = diag(0, eps), W_abcd = g iff a != c and b != d.
///
/// This is the L-periodic interval restricted to the real basis
/// {1/sqrt(L), sqrt(2) cos(2 pi x / L)/sqrt(L)} with a pure cosine kernel;
/// both basis functions are real, so conjugation is entrywise (pi = id).
pub fn two_mode_space(eps: f64, g: f64) -> SingleParticleSpace {
    let mut kinetic = CMat::zeros(2);
    kinetic[(1, 1)] = C64::new(eps, 0.0);
    let mut w = vec![ZERO; 16];
    for a in 0..2usize {
        for b in 0..2usize {
            for c in 0..2usize {
                for d in 0..2usize {
                    if a != c && b != d {
                        w[((a * 2 + b) * 2 + c) * 2 + d] = C64::new(g, 0.0);
                    }
                }
            }
        }
    }
    make_abstract_space(kinetic, w, vec![0, 1]).expect("two-mode tensor satisfies all invariants")
}

impl SingleParticleSpace {
    /// Inner product with quadrature weight, conjugate-linear in `f`.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        linalg::dot(f, g) * self.weight
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        linalg::norm(f) * self.weight.sqrt()
    }

    pub fn apply_kinetic(&self, f: &[C64]) -> Field {
        self.kinetic.matvec(f)
    }

    /// Antilinear conjugation (Jf)_a = conj(f_{pi(a)}).
    pub fn conjugate(&self, f: &[C64]) -> Field {
        (0..self.dim).map(|a| f[self.conj_perm[a]].conj()).collect()
    }

    /// W tensor entry; only defined on tensor-backed spaces.
    pub fn w_entry(&self, a: usize, b: usize, c: usize, d: usize) -> Result<C64> {
        match &self.interaction {
            Interaction::Tensor { w } => {
                let m = self.dim;
                Ok(w[((a * m + b) * m + c) * m + d])
            }
            Interaction::GridKernel { .. } => Err(MflabError::InvalidInput(
                "W tensor entries are not materialized on grid spaces".into(),
            )),
        }
    }

    fn circular_convolve(&self, rho: &[C64]) -> Field {
        let (values, fwd, inv) = match (&self.interaction, &self.fft_fwd, &self.fft_inv) {
            (Interaction::GridKernel { values }, Some(f), Some(i)) => (values, f, i),
            _ => unreachable!("circular_convolve is grid-only"),
        };
        let m = self.dim;
        let mut vb: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut rb = rho.to_vec();
        fwd.process(&mut vb);
        fwd.process(&mut rb);
        for (r, v) in rb.iter_mut().zip(&vb) {
            *r *= *v;
        }
        inv.process(&mut rb);
        // One 1/M for the inverse transform; the quadrature weight h turns the
        // circular sum into the periodic integral.
        let scale = self.weight / m as f64;
        rb.iter().map(|z| z * scale).collect()
    }

    /// Convolution V * rho for an (approximately real) density. On mode
    /// spaces the kernel acts diagonally through V-hat.
    pub fn convolve_potential(&self, rho: &[C64]) -> Result<Field> {
        let scale = rho.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let imag_defect = match &self.kind {
            BasisKind::Grid1d { .. } => {
                rho.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
            }
            // Real density in mode coefficients means J rho = rho.
            _ => {
                let jr = self.conjugate(rho);
                rho.iter().zip(&jr).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
            }
        };
        if imag_defect > 1e-10 * scale {
            return Err(MflabError::InvalidInput(format!(
                "density is not real (defect {imag_defect:.3e}); upstream normalization bug"
            )));
        }
        match (&self.kind, &self.vhat_table) {
            (BasisKind::Grid1d { .. }, _) => Ok(self.circular_convolve(rho)),
            (BasisKind::FourierModes { k_max, .. }, Some(vhat)) => Ok((0..self.dim)
                .map(|a| {
                    let k = a as i64 - k_max;
                    rho[a] * vhat[(k + 2 * k_max) as usize]
                })
                .collect()),
            _ => Err(MflabError::InvalidInput(
                "abstract spaces carry no kernel; use w_apply".into(),
            )),
        }
    }

    /// The fundamental contraction (V * (conj(f) g)) h, i.e.
    /// out_a = sum_{bcd} W_{abcd} conj(f_b) h_c g_d.
    ///
    /// Every interaction term in the pipeline is an instance of this:
    /// Hartree nonlinearity w_apply(phi, phi, phi), mean-field multiplication
    /// w_apply(phi, phi, f), the D-operator exchange term w_apply(phi, f, phi),
    /// and B w_apply(phi, f, J phi).
    pub fn w_apply(&self, f: &[C64], g: &[C64], h: &[C64]) -> Field {
        let m = self.dim;
        match &self.interaction {
            Interaction::GridKernel { .. } => {
                let density: Vec<C64> = f.iter().zip(g).map(|(fb, gb)| fb.conj() * gb).collect();
                let u = self.circular_convolve(&density);
                u.iter().zip(h).map(|(ua, ha)| ua * ha).collect()
            }
            Interaction::Tensor { w } => {
                let mut out = vec![ZERO; m];
                for a in 0..m {
                    let mut acc = ZERO;
                    for b in 0..m {
                        let fb = f[b].conj();
                        if fb == ZERO {
                            continue;
                        }
                        for c in 0..m {
                            let base = ((a * m + b) * m + c) * m;
                            let hc = h[c];
                            if hc == ZERO {
                                continue;
                            }
                            let mut inner = ZERO;
                            for d in 0..m {
                                inner += w[base + d] * g[d];
                            }
                            acc += fb * hc * inner;
                        }
                    }
                    out[a] = acc;
                }
                out
            }
        }
    }

    /// In-place forward FFT (grid spaces only).
    pub(crate) fn fft_forward(&self, buf: &mut [C64]) -> Result<()> {
        match &self.fft_fwd {
            Some(f) => {
                f.process(buf);
                Ok(())
            }
            None => Err(MflabError::InvalidInput("FFT is grid-only".into())),
        }
    }

    /// In-place normalized inverse FFT (grid spaces only).
    pub(crate) fn fft_inverse(&self, buf: &mut [C64]) -> Result<()> {
        match &self.fft_inv {
            Some(f) => {
                f.process(buf);
                let inv_m = 1.0 / self.dim as f64;
                for z in buf.iter_mut() {
                    *z *= inv_m;
                }
                Ok(())
            }
            None => Err(MflabError::InvalidInput("FFT is grid-only".into())),
        }
    }

    /// Interaction energy (1/2) <phi, (V*|phi|^2) phi>.
    pub fn interaction_energy(&self, phi: &[C64]) -> f64 {
        let nl = self.w_apply(phi, phi, phi);
        0.5 * self.inner(phi, &nl).re
    }
}

/// Hermitian observable matrix with an optional label.
#[derive(Clone, Debug)]
pub struct Observable {
    pub matrix: CMat,
    pub label: Option<String>,
}

impl Observable {
    pub fn new(matrix: CMat, label: Option<String>) -> Result<Self> {
        let scale = matrix.max_abs().max(1.0);
        if matrix.hermiticity_defect() > 1e-12 * scale {
            return Err(MflabError::InvalidInput(format!(
                "observable {} is not Hermitian",
                label.as_deref().unwrap_or("<unlabeled>")
            )));
        }
        Ok(Observable { matrix, label })
    }

    pub fn apply(&self, f: &[C64]) -> Field {
        self.matrix.matvec(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::DetRng;

    #[test]
    fn grid_kinetic_spectrum() {
        let s = make_grid_space(1, 8, 2.0 * PI, &KernelSpec::Zero).unwrap();
        let mut mult = s.kinetic_multiplier.clone().unwrap();
        mult.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0, 16.0];
        for (m, e) in mult.iter().zip(expected) {
            assert!((m - e).abs() < 1e-12);
        }
        // Dense matrix agrees with the multiplier spectrum.
        let (eigs, _) = crate::lapack::eigh_complex(&s.kinetic.data, 8).unwrap();
        for (w, e) in eigs.iter().zip(expected) {
            assert!((w - e).abs() < 1e-10);
        }
        assert!(s.kinetic.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn cosine_kernel_even_on_grid() {
        let s = make_grid_space(1, 16, 2.0 * PI, &KernelSpec::Cosine { v0: 1.0, n: 1 }).unwrap();
        let values = match &s.interaction {
            Interaction::GridKernel { values } => values.clone(),
            _ => unreachable!(),
        };
        for j in 0..16 {
            let x = j as f64 * 2.0 * PI / 16.0;
            assert!((values[j] - x.cos()).abs() < 1e-15);
            assert!((values[j] - values[(16 - j) % 16]).abs() < 1e-15);
        }
    }

    #[test]
    fn tabulated_kernel_rejects_odd_samples() {
        let mut v = vec![0.0; 8];
        v[3] = 1.0; // mirror sample v[5] stays 0
        let err = make_grid_space(1, 8, 1.0, &KernelSpec::Tabulated(v)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("not even") && msg.contains("sample 3"), "{msg}");
    }

    #[test]
    fn rejects_higher_dimensions_and_bad_grids() {
        assert!(make_grid_space(2, 8, 1.0, &KernelSpec::Zero).is_err());
        assert!(make_grid_space(1, 6, 1.0, &KernelSpec::Zero).is_err());
        assert!(make_grid_space(1, 2, 1.0, &KernelSpec::Zero).is_err());
    }

    #[test]
    fn grid_convolution_matches_direct_sum() {
        for (m_points, length) in [(8usize, 1.0), (32, 2.0 * PI), (64, 3.0)] {
            let kernel = KernelSpec::Gaussian { v0: 1.0, sigma: 0.2 };
            let s = make_grid_space(1, m_points, length, &kernel).unwrap();
            let values = kernel_on_grid(&kernel, m_points, length).unwrap();
            let mut rng = DetRng::new(m_points as u64);
            let rho: Vec<C64> =
                (0..m_points).map(|_| C64::new(rng.next_f64(), 0.0)).collect();
            let conv = s.convolve_potential(&rho).unwrap();
            let h = length / m_points as f64;
            for a in 0..m_points {
                let direct: C64 = (0..m_points)
                    .map(|b| rho[b] * values[(a + m_points - b) % m_points] * h)
                    .sum();
                assert!((conv[a] - direct).norm() < 1e-12, "M={m_points} a={a}");
            }
        }
    }

    #[test]
    fn convolve_rejects_complex_density() {
        let s = make_grid_space(1, 8, 1.0, &KernelSpec::Zero).unwrap();
        let mut rho = vec![linalg::ONE; 8];
        rho[2] = C64::new(1.0, 1e-6);
        assert!(s.convolve_potential(&rho).is_err());
    }

    #[test]
    fn convolve_cosine_against_uniform_density_vanishes() {
        let length = 2.0 * PI;
        let s = make_grid_space(1, 16, length, &KernelSpec::Cosine { v0: 1.0, n: 1 }).unwrap();
        let rho = vec![C64::new(1.0 / length, 0.0); 16];
        let conv = s.convolve_potential(&rho).unwrap();
        for z in conv {
            assert!(z.norm() < 1e-14);
        }
    }

    #[test]
    fn fourier_zero_kernel() {
        let s = make_fourier_mode_space(2.0 * PI, 1, &KernelSpec::Zero).unwrap();
        assert_eq!(s.dim, 3);
        for (a, e) in [(0usize, 1.0), (1, 0.0), (2, 1.0)] {
            assert!((s.kinetic[(a, a)] - C64::new(e, 0.0)).norm() < 1e-14);
        }
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        assert_eq!(s.w_entry(a, b, c, d).unwrap(), ZERO);
                    }
                }
            }
        }
    }

    /// Oracle: W_{abcd} = double integral of conj(e_a(x) e_b(y)) V(x-y)
    /// e_c(x) e_d(y), evaluated by trigonometric quadrature on a fine grid
    /// (exact for band-limited integrands).
    #[test]
    fn fourier_w_matches_defining_integral() {
        let length = 2.0 * PI;
        let k_max = 1i64;
        let kernel = KernelSpec::Cosine { v0: 0.7, n: 1 };
        let s = make_fourier_mode_space(length, k_max, &kernel).unwrap();
        let mq = 64usize;
        let h = length / mq as f64;
        let mode = |k: i64, x: f64| {
            C64::new(0.0, 2.0 * PI * k as f64 * x / length).exp() / length.sqrt()
        };
        let v = |x: f64| 0.7 * x.cos();
        for a in 0..3usize {
            for b in 0..3usize {
                for c in 0..3usize {
                    for d in 0..3usize {
                        let (ka, kb, kc, kd) = (
                            a as i64 - k_max,
                            b as i64 - k_max,
                            c as i64 - k_max,
                            d as i64 - k_max,
                        );
                        let mut integral = ZERO;
                        for jx in 0..mq {
                            let x = jx as f64 * h;
                            for jy in 0..mq {
                                let y = jy as f64 * h;
                                integral += mode(ka, x).conj()
                                    * mode(kb, y).conj()
                                    * v(x - y)
                                    * mode(kc, x)
                                    * mode(kd, y)
                                    * h
                                    * h;
                            }
                        }
                        let got = s.w_entry(a, b, c, d).unwrap();
                        assert!(
                            (got - integral).norm() < 1e-12,
                            "({ka},{kb},{kc},{kd}): got {got}, integral {integral}"
                        );
                        if ka + kb != kc + kd {
                            assert_eq!(got, ZERO);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fourier_w_symmetries() {
        let s = make_fourier_mode_space(
            2.0 * PI,
            2,
            &KernelSpec::Gaussian { v0: 0.8, sigma: 0.5 },
        )
        .unwrap();
        let m = s.dim;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let x = s.w_entry(a, b, c, d).unwrap();
                        assert!((x - s.w_entry(b, a, d, c).unwrap()).norm() < 1e-15);
                        assert!((x - s.w_entry(c, d, a, b).unwrap().conj()).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn conjugation_properties() {
        let grid = make_grid_space(1, 16, 2.0, &KernelSpec::Zero).unwrap();
        let modes = make_fourier_mode_space(2.0, 2, &KernelSpec::Zero).unwrap();
        for s in [&grid, &modes] {
            let mut rng = DetRng::new(7);
            let f = rng.complex_vec(s.dim);
            let g = rng.complex_vec(s.dim);
            let jf = s.conjugate(&f);
            let jg = s.conjugate(&g);
            // J^2 = id exactly
            assert_eq!(s.conjugate(&jf), f);
            // <Jf, Jg> = conj(<f, g>)
            assert!((s.inner(&jf, &jg) - s.inner(&f, &g).conj()).norm() < 1e-13);
            // J antilinear
            let alpha = C64::new(0.3, -1.1);
            let af: Vec<C64> = f.iter().map(|z| z * alpha).collect();
            let jaf = s.conjugate(&af);
            for (x, y) in jaf.iter().zip(&jf) {
                assert!((x - alpha.conj() * y).norm() < 1e-15);
            }
            // J(Kf) = K(Jf)
            let lhs = s.conjugate(&s.apply_kinetic(&f));
            let rhs = s.apply_kinetic(&s.conjugate(&f));
            for (x, y) in lhs.iter().zip(&rhs) {
                assert!((x - y).norm() < 1e-12);
            }
        }
        // Grid: real field is conjugation-invariant.
        let f: Vec<C64> = (0..16).map(|j| C64::new((j as f64).sin(), 0.0)).collect();
        assert_eq!(grid.conjugate(&f), f);
        // Fourier: e_k maps to e_{-k}.
        let mut ek = vec![ZERO; 5];
        ek[4] = linalg::ONE; // k = +2
        let jek = modes.conjugate(&ek);
        assert_eq!(jek[0], linalg::ONE);
        assert!(jek[1..].iter().all(|z| *z == ZERO));
    }

    #[test]
    fn fourier_convolve_is_vhat_diagonal() {
        let length = 2.0 * PI;
        let kernel = KernelSpec::Gaussian { v0: 1.3, sigma: 0.4 };
        let s = make_fourier_mode_space(length, 2, &kernel).unwrap();
        // Real density: coefficients symmetric under J.
        let mut rng = DetRng::new(11);
        let mut rho = rng.complex_vec(5);
        let jr = s.conjugate(&rho);
        for (r, j) in rho.iter_mut().zip(&jr) {
            *r = (*r + j) * 0.5;
        }
        let conv = s.convolve_potential(&rho).unwrap();
        for a in 0..5usize {
            let k = a as i64 - 2;
            let vh = kernel_fourier(&kernel, length, k).unwrap();
            assert!((conv[a] - rho[a] * vh).norm() < 1e-14);
        }
    }

    /// w_apply on a grid vs the tensor definition restricted to the grid's
    /// effective W_{abcd} = h V(x_a - x_b) delta_ac delta_bd.
    #[test]
    fn grid_w_apply_matches_effective_tensor() {
        let m_points = 8usize;
        let length = 1.0;
        let kernel = KernelSpec::Gaussian { v0: 0.9, sigma: 0.15 };
        let s = make_grid_space(1, m_points, length, &kernel).unwrap();
        let values = kernel_on_grid(&kernel, m_points, length).unwrap();
        let h = length / m_points as f64;
        let mut rng = DetRng::new(3);
        let f = rng.complex_vec(m_points);
        let g = rng.complex_vec(m_points);
        let hf = rng.complex_vec(m_points);
        let out = s.w_apply(&f, &g, &hf);
        for a in 0..m_points {
            let direct: C64 = (0..m_points)
                .map(|b| {
                    C64::new(h * values[(a + m_points - b) % m_points], 0.0)
                        * f[b].conj()
                        * g[b]
                        * hf[a]
                })
                .sum();
            assert!((out[a] - direct).norm() < 1e-13);
        }
    }

    /// Mode-space w_apply agrees with a grid evaluation of (V*(conj(f)g))h
    /// when the fields are band-limited to the kept modes.
    #[test]
    fn mode_w_apply_matches_grid_evaluation() {
        let length = 2.0 * PI;
        let k_max = 2i64;
        let kernel = KernelSpec::Cosine { v0: 0.6, n: 1 };
        let s = make_fourier_mode_space(length, k_max, &kernel).unwrap();
        let mut rng = DetRng::new(21);
        let f = rng.complex_vec(s.dim);
        let g = rng.complex_vec(s.dim);
        let hf = rng.complex_vec(s.dim);
        let out = s.w_apply(&f, &g, &hf);

        // Evaluate the same contraction on a fine quadrature grid.
        let mq = 128usize;
        let hq = length / mq as f64;
        let eval = |coef: &[C64], x: f64| -> C64 {
            (0..s.dim)
                .map(|a| {
                    let k = a as i64 - k_max;
                    coef[a] * C64::new(0.0, 2.0 * PI * k as f64 * x / length).exp()
                        / length.sqrt()
                })
                .sum()
        };
        let v = |x: f64| 0.6 * x.cos();
        for a in 0..s.dim {
            let ka = a as i64 - k_max;
            let mut integral = ZERO;
            for jx in 0..mq {
                let x = jx as f64 * hq;
                let mut conv = ZERO;
                for jy in 0..mq {
                    let y = jy as f64 * hq;
                    conv += C64::new(v(x - y) * hq, 0.0) * eval(&f, y).conj() * eval(&g, y);
                }
                let ea = C64::new(0.0, 2.0 * PI * ka as f64 * x / length).exp()
                    / length.sqrt();
                integral += ea.conj() * conv * eval(&hf, x) * hq;
            }
            assert!(
                (out[a] - integral).norm() < 1e-11,
                "mode {ka}: {} vs {}",
                out[a],
                integral
            );
        }
    }

    #[test]
    fn two_mode_space_structure() {
        let s = two_mode_space(1.5, 0.3);
        assert_eq!(s.dim, 2);
        assert_eq!(s.conj_perm, vec![0, 1]);
        assert!((s.kinetic[(1, 1)] - C64::new(1.5, 0.0)).norm() < 1e-15);
        assert_eq!(s.w_entry(0, 1, 1, 0).unwrap(), C64::new(0.3, 0.0));
        assert_eq!(s.w_entry(0, 1, 0, 0).unwrap(), ZERO);
        assert_eq!(s.w_entry(0, 0, 1, 1).unwrap(), C64::new(0.3, 0.0));
        // interaction energy of phi = (1,0): only W_0011-type terms with
        // conj(phi_a phi_b) phi_c phi_d nonzero require a=b=0 and c=d... none,
        // since a != c forces c = 1. So the energy is purely kinetic-free.
        let phi = vec![linalg::ONE, ZERO];
        assert!(s.interaction_energy(&phi).abs() < 1e-15);
    }

    #[test]
    fn observable_requires_hermiticity() {
        let mut good = CMat::zeros(2);
        good[(0, 1)] = C64::new(0.0, -1.0);
        good[(1, 0)] = C64::new(0.0, 1.0);
        assert!(Observable::new(good, Some("sy".into())).is_ok());
        let mut bad = CMat::zeros(2);
        bad[(0, 1)] = linalg::ONE;
        assert!(Observable::new(bad, None).is_err());
    }
}
