//! Python bindings: thin wrappers over the core single-particle spaces,
//! Hartree flow, Bogoliubov propagation, covariance assembly, and the xi
//! coefficient machinery. Complex vectors cross the boundary as lists of
//! Python complex numbers, matrices as nested lists (row-major).

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mflab::bogoliubov::{propagate_theta, symplectic_residuals, BogoliubovPair};
use mflab::covariance::{covariance_matrix, fluctuation_vector, gaussian_charfn};
use mflab::hartree::{evolve_hartree, hartree_energy, uniform_state, HartreeTrajectory};
use mflab::linalg::CMat;
use mflab::space::{
    make_fourier_mode_space, make_grid_space, two_mode_space, KernelSpec, Observable,
    SingleParticleSpace,
};
use mflab::xi;

fn err(e: mflab::MflabError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_cmat(rows: &[Vec<Complex64>]) -> PyResult<CMat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let mut m = CMat::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn from_cmat(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.n).map(|i| (0..m.n).map(|j| m[(i, j)]).collect()).collect()
}

#[pyclass(frozen)]
struct Space {
    inner: SingleParticleSpace,
}

#[pymethods]
impl Space {
    #[staticmethod]
    fn two_mode(eps: f64, coupling: f64) -> Space {
        Space { inner: two_mode_space(eps, coupling) }
    }

    #[staticmethod]
    fn grid(points: usize, length: f64, v0: f64, sigma: f64) -> PyResult<Space> {
        let kernel = KernelSpec::Gaussian { v0, sigma };
        Ok(Space { inner: make_grid_space(1, points, length, &kernel).map_err(err)? })
    }

    #[staticmethod]
    fn fourier(length: f64, k_max: i64, v0: f64, n: i64) -> PyResult<Space> {
        let kernel = KernelSpec::Cosine { v0, n };
        Ok(Space { inner: make_fourier_mode_space(length, k_max, &kernel).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    fn uniform_state(&self) -> Vec<Complex64> {
        uniform_state(&self.inner)
    }

    fn norm(&self, f: Vec<Complex64>) -> f64 {
        self.inner.norm(&f)
    }

    fn energy(&self, state: Vec<Complex64>) -> f64 {
        hartree_energy(&self.inner, &state)
    }
}

#[pyclass(frozen)]
struct Trajectory {
    inner: HartreeTrajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn t_max(&self) -> f64 {
        self.inner.t_max()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.energy.clone()
    }

    fn state_at(&self, t: f64) -> PyResult<Vec<Complex64>> {
        self.inner.state_at(t).map_err(err)
    }
}

#[pyclass(frozen)]
struct Theta {
    pairs: Vec<BogoliubovPair>,
}

#[pymethods]
impl Theta {
    fn at(&self, t: f64) -> PyResult<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
        let pair = self
            .pairs
            .iter()
            .find(|p| (p.t - t).abs() < 1e-9)
            .ok_or_else(|| PyValueError::new_err(format!("no Theta node at t = {t}")))?;
        Ok((from_cmat(&pair.u), from_cmat(&pair.v)))
    }

    fn residuals(
        &self,
        space: &Space,
        traj: &Trajectory,
        t: f64,
    ) -> PyResult<(f64, f64, f64)> {
        let pair = self
            .pairs
            .iter()
            .find(|p| (p.t - t).abs() < 1e-9)
            .ok_or_else(|| PyValueError::new_err(format!("no Theta node at t = {t}")))?;
        let mut phi_t = traj.inner.state_at(t).map_err(err)?;
        let nrm = space.inner.norm(&phi_t);
        for c in phi_t.iter_mut() {
            *c /= nrm;
        }
        Ok(symplectic_residuals(&space.inner, pair, &phi_t, &traj.inner.states[0]))
    }
}

#[pyfunction]
fn hartree(
    space: &Space,
    initial: Vec<Complex64>,
    t_final: f64,
    dt: f64,
    method: &str,
) -> PyResult<Trajectory> {
    let method = method.parse().map_err(err)?;
    let traj = evolve_hartree(&space.inner, &initial, t_final, dt, method).map_err(err)?;
    Ok(Trajectory { inner: traj })
}

#[pyfunction]
fn theta(space: &Space, traj: &Trajectory, dt: f64, integrator: &str) -> PyResult<Theta> {
    let integrator = integrator.parse().map_err(err)?;
    let pairs = propagate_theta(&space.inner, &traj.inner, dt, integrator).map_err(err)?;
    Ok(Theta { pairs })
}

/// Limiting covariance Sigma(t) for the given observable matrices.
#[pyfunction]
fn covariance(
    space: &Space,
    traj: &Trajectory,
    theta: &Theta,
    observables: Vec<Vec<Vec<Complex64>>>,
    t: f64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let pair = theta
        .pairs
        .iter()
        .find(|p| (p.t - t).abs() < 1e-9)
        .ok_or_else(|| PyValueError::new_err(format!("no Theta node at t = {t}")))?;
    let mut phi_t = traj.inner.state_at(t).map_err(err)?;
    let nrm = space.inner.norm(&phi_t);
    for c in phi_t.iter_mut() {
        *c /= nrm;
    }
    let phi0 = &traj.inner.states[0];
    let gs = observables
        .iter()
        .map(|rows| {
            let obs = Observable::new(to_cmat(rows)?, None).map_err(err)?;
            fluctuation_vector(&space.inner, pair, &phi_t, phi0, &obs, t).map_err(err)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let cov = covariance_matrix(&space.inner, &gs, phi0, "py").map_err(err)?;
    Ok(from_cmat(&cov.sigma))
}

/// Characteristic function of the centered Gaussian with covariance sigma.
#[pyfunction]
fn gaussian_charfn_py(sigma: Vec<Vec<Complex64>>, tau: Vec<f64>) -> PyResult<Complex64> {
    Ok(gaussian_charfn(&to_cmat(&sigma)?, &tau))
}

/// Scaled coefficients w_l = sqrt(l!) xi^(l) by upward recursion.
#[pyfunction]
fn xi_coefficients(n: usize, l_max: usize) -> PyResult<Vec<f64>> {
    Ok(xi::xi_recursion(n, l_max).map_err(err)?.w)
}

#[pyfunction]
fn xi_infinity(l_max: usize) -> Vec<f64> {
    xi::xi_infinity(l_max).w
}

/// Norm sums: (apriori, total, diff5, d_n_sq, l_max_used).
#[pyfunction]
fn xi_norms(n: usize, l_max: usize) -> PyResult<(f64, f64, f64, f64, usize)> {
    let nm = xi::xi_norms(n, l_max).map_err(err)?;
    Ok((nm.apriori, nm.total, nm.diff5, nm.d_n_sq, nm.l_max_used))
}

#[pymodule]
fn mflab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Space>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Theta>()?;
    m.add_function(wrap_pyfunction!(hartree, m)?)?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_charfn_py, m)?)?;
    m.add_function(wrap_pyfunction!(xi_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(xi_infinity, m)?)?;
    m.add_function(wrap_pyfunction!(xi_norms, m)?)?;
    Ok(())
}
