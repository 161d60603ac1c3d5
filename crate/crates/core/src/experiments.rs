//! Orchestrated studies pitting exact many-body simulation against the
//! mean-field limit: characteristic-function CLT rates, Berry-Esseen interval
//! probabilities, reduced-density trace norms, fluctuation dynamics, and the
//! Bogoliubov action identity.
//!
//! Everything here is deterministic given its inputs. Scans over N run in
//! parallel but are reduced in index order, so results are bit-identical at
//! any worker count.

use rayon::prelude::*;
use serde_json::json;

use crate::bogoliubov::BogoliubovPair;
use crate::covariance::{covariance_matrix, fluctuation_vector, gaussian_charfn, CovarianceMatrix};
use crate::error::{MflabError, Result};
use crate::fock::{
    annihilator, build_hamiltonian, creator, evolve_quadratic, fluctuation_state,
    number_operator, product_state, reduced_density_1, required_n_max, second_quantize,
    vacuum, EigPropagator, JointCharfn, OccupationBasis, Sector,
};
use crate::hartree::HartreeTrajectory;
use crate::lapack::eigh_complex;
use crate::linalg::{self, linfit, C64, CMat, ZERO};
use crate::space::{Observable, SingleParticleSpace};
use crate::util::{normal_cdf, normal_interval_prob};

pub use crate::fock::charfn::product_oracle_t0;

/// Least-squares fit of log(err) against log(N).
#[derive(Clone, Debug)]
pub struct RateFit {
    pub quantity: String,
    /// (N, err) pairs, all of them (including any excluded from the window).
    pub points: Vec<(f64, f64)>,
    /// points skipped at the small-N end (pre-asymptotic window).
    pub skip_first: usize,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// rms residual of the fit in log space.
    pub residual: f64,
}

pub fn rate_fit(quantity: &str, points: &[(f64, f64)], skip_first: usize) -> Result<RateFit> {
    let window = &points[skip_first.min(points.len())..];
    if window.len() < 3 {
        return Err(MflabError::InvalidInput(format!(
            "rate fit for '{quantity}' needs at least 3 points, got {}",
            window.len()
        )));
    }
    if window.iter().any(|&(_, e)| e <= 0.0) {
        return Err(MflabError::InvalidInput(format!(
            "rate fit for '{quantity}' hit a non-positive error value"
        )));
    }
    let xs: Vec<f64> = window.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = window.iter().map(|(_, e)| e.ln()).collect();
    let (intercept, slope, slope_stderr, residual) = linfit(&xs, &ys);
    Ok(RateFit {
        quantity: quantity.into(),
        points: points.to_vec(),
        skip_first,
        slope,
        intercept,
        slope_stderr,
        residual,
    })
}

impl RateFit {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "quantity": self.quantity,
            "points": self.points.iter().map(|&(n, e)| json!([n, e])).collect::<Vec<_>>(),
            "skip_first": self.skip_first,
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_stderr": self.slope_stderr,
            "residual": self.residual,
        })
    }
}

/// Default tensor grid over [-3, 3] with 13 points per axis.
pub fn default_tau_grid(k: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..13).map(|i| -3.0 + 0.5 * i as f64).collect();
    let mut grid = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::with_capacity(grid.len() * axis.len());
        for point in &grid {
            for &v in &axis {
                let mut p = point.clone();
                p.push(v);
                next.push(p);
            }
        }
        grid = next;
    }
    grid
}

fn renormalized(space: &SingleParticleSpace, phi: &[C64]) -> Vec<C64> {
    let nrm = space.norm(phi);
    phi.iter().map(|&c| c / nrm).collect()
}

fn pair_at(pairs: &[BogoliubovPair], t: f64) -> Result<&BogoliubovPair> {
    pairs
        .iter()
        .find(|p| (p.t - t).abs() < 1e-9)
        .ok_or_else(|| MflabError::OutOfRange { t, t_max: pairs.last().map(|p| p.t).unwrap_or(0.0) })
}

/// Limiting covariance matrices for a family of observables at the requested
/// times, from the Hartree trajectory and the Bogoliubov pairs.
pub fn covariances_along(
    space: &SingleParticleSpace,
    traj: &HartreeTrajectory,
    pairs: &[BogoliubovPair],
    observables: &[Observable],
    times: &[f64],
    provenance: &str,
) -> Result<Vec<CovarianceMatrix>> {
    let phi0 = &traj.states[0];
    times
        .iter()
        .map(|&t| {
            let phi_t = renormalized(space, &traj.state_at(t)?);
            let pair = pair_at(pairs, t)?;
            let gs: Vec<_> = observables
                .iter()
                .map(|o| fluctuation_vector(space, pair, &phi_t, phi0, o, t))
                .collect::<Result<_>>()?;
            covariance_matrix(space, &gs, phi0, provenance)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct CltRow {
    pub n: usize,
    pub t: f64,
    pub tau_index: usize,
    pub err_abs: f64,
    pub charfn_re: f64,
    pub charfn_im: f64,
    pub gauss_re: f64,
    pub gauss_im: f64,
}

#[derive(Clone, Debug)]
pub struct CltStudy {
    pub rows: Vec<CltRow>,
    /// per-N maximum error over times and the tau grid.
    pub errs: Vec<(f64, f64)>,
    pub fit: RateFit,
}

/// Max-over-tau characteristic function error against the limiting Gaussian,
/// fitted over N.
pub fn clt_convergence_study(
    space: &SingleParticleSpace,
    traj: &HartreeTrajectory,
    pairs: &[BogoliubovPair],
    observables: &[Observable],
    times: &[f64],
    n_list: &[usize],
    tau_grid: &[Vec<f64>],
    skip_first: usize,
) -> Result<CltStudy> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MflabError::InvalidInput("N list must be strictly increasing".into()));
    }
    let covs = covariances_along(space, traj, pairs, observables, times, "clt")?;
    let obs_mats: Vec<CMat> = observables.iter().map(|o| o.matrix.clone()).collect();
    let phi0 = &traj.states[0];
    let per_n: Vec<Result<(Vec<CltRow>, f64)>> = n_list
        .par_iter()
        .map(|&n| {
            let basis = OccupationBasis::new(space.dim, Sector::FixedN(n))?;
            let h = build_hamiltonian(space, n, &basis)?;
            let prop = EigPropagator::new(&h)?;
            let psi0 = product_state(phi0, &basis)?;
            let mut rows = Vec::new();
            let mut max_err = 0.0f64;
            for (&t, cov) in times.iter().zip(&covs) {
                let psi_t = prop.apply_exp(&psi0, C64::new(0.0, -t));
                let phi_t = renormalized(space, &traj.state_at(t)?);
                let cf = JointCharfn::new(space, &basis, &psi_t, &obs_mats, &phi_t, n)?;
                for (ti, tau) in tau_grid.iter().enumerate() {
                    let many = cf.eval(tau)?;
                    let gauss = gaussian_charfn(&cov.sigma, tau);
                    let err = (many - gauss).norm();
                    max_err = max_err.max(err);
                    rows.push(CltRow {
                        n,
                        t,
                        tau_index: ti,
                        err_abs: err,
                        charfn_re: many.re,
                        charfn_im: many.im,
                        gauss_re: gauss.re,
                        gauss_im: gauss.im,
                    });
                }
            }
            Ok((rows, max_err))
        })
        .collect();
    let mut rows = Vec::new();
    let mut errs = Vec::new();
    for (n, res) in n_list.iter().zip(per_n) {
        let (r, e) = res?;
        rows.extend(r);
        errs.push((*n as f64, e));
    }
    let fit = rate_fit("clt_charfn_max_err", &errs, skip_first)?;
    Ok(CltStudy { rows, errs, fit })
}

#[derive(Clone, Debug)]
pub struct BerryEsseenRow {
    pub n: usize,
    pub t: f64,
    pub p_exact: f64,
    pub p_gauss: f64,
    pub err_abs: f64,
    /// sup over x in [alpha, beta] of |F_N(x) - Phi_sigma(x)|.
    pub cdf_err: f64,
}

#[derive(Clone, Debug)]
pub struct BerryEsseenStudy {
    pub rows: Vec<BerryEsseenRow>,
    pub errs: Vec<(f64, f64)>,
    pub fit: RateFit,
    pub sigma: Vec<f64>,
}

/// Interval probabilities of a single rescaled observable: exact spectral
/// measure on the fixed-N sector against the limiting normal law. The rate
/// is fitted on the sup-CDF (Kolmogorov) distance over the interval, which
/// decays smoothly; the plain interval-probability error oscillates with N
/// because the spectral lattice drifts past the endpoints.
pub fn berry_esseen_study(
    space: &SingleParticleSpace,
    traj: &HartreeTrajectory,
    pairs: &[BogoliubovPair],
    obs: &Observable,
    times: &[f64],
    n_list: &[usize],
    interval: (f64, f64),
    skip_first: usize,
) -> Result<BerryEsseenStudy> {
    let (alpha, beta) = interval;
    if alpha >= beta {
        return Err(MflabError::InvalidInput("need alpha < beta".into()));
    }
    let covs = covariances_along(space, traj, pairs, std::slice::from_ref(obs), times, "be")?;
    let mut sigma = Vec::with_capacity(times.len());
    for cov in &covs {
        let s2 = cov.sigma[(0, 0)];
        if s2.re < 1e-8 {
            return Err(MflabError::CovarianceSingular(s2.re));
        }
        sigma.push(s2.re.sqrt());
    }
    let phi0 = &traj.states[0];
    let per_n: Vec<Result<Vec<BerryEsseenRow>>> = n_list
        .par_iter()
        .map(|&n| {
            let basis = OccupationBasis::new(space.dim, Sector::FixedN(n))?;
            if basis.dim() > 4000 {
                return Err(MflabError::Basis(format!(
                    "sector dimension {} too large for full diagonalization; use m = 2",
                    basis.dim()
                )));
            }
            let h = build_hamiltonian(space, n, &basis)?;
            let prop = EigPropagator::new(&h)?;
            let psi0 = product_state(phi0, &basis)?;
            let inv_sqrt_n = 1.0 / (n as f64).sqrt();
            let mut rows = Vec::new();
            for (i, &t) in times.iter().enumerate() {
                let psi_t = prop.apply_exp(&psi0, C64::new(0.0, -t));
                let phi_t = renormalized(space, &traj.state_at(t)?);
                let mean = space.inner(&phi_t, &obs.matrix.matvec(&phi_t));
                let mut centered = obs.matrix.clone();
                for a in 0..centered.n {
                    centered[(a, a)] -= mean;
                }
                let scaled = second_quantize(&basis, &centered)?
                    .scale(C64::new(inv_sqrt_n, 0.0));
                let (eigs, vecs) = eigh_complex(&scaled.to_dense().data, basis.dim())?;
                let mut spectral: Vec<(f64, f64)> = eigs
                    .iter()
                    .zip(&vecs)
                    .map(|(lam, v)| (*lam, linalg::dot(v, &psi_t).norm_sqr()))
                    .collect();
                spectral.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut p_exact = 0.0f64;
                // Kolmogorov-style sup of |F_N - Phi| over the interval; the
                // step function F_N attains the sup at a jump (either side)
                // or at an endpoint of the interval.
                let mut cdf_err = 0.0f64;
                let mut cum = 0.0f64;
                let cum_at = |x: f64, cum: f64| (cum - normal_cdf(sigma[i], x)).abs();
                let mut f_alpha = 0.0f64;
                let mut f_beta = 0.0f64;
                for &(lam, w) in &spectral {
                    if lam < alpha {
                        cum += w;
                        f_alpha = cum;
                        f_beta = cum;
                        continue;
                    }
                    if lam <= beta {
                        p_exact += w;
                        cdf_err = cdf_err.max(cum_at(lam, cum));
                        cum += w;
                        f_beta = cum;
                        cdf_err = cdf_err.max(cum_at(lam, cum));
                    } else {
                        break;
                    }
                }
                cdf_err = cdf_err.max(cum_at(alpha, f_alpha)).max(cum_at(beta, f_beta));
                let p_gauss = normal_interval_prob(sigma[i], alpha, beta);
                rows.push(BerryEsseenRow {
                    n,
                    t,
                    p_exact,
                    p_gauss,
                    err_abs: (p_exact - p_gauss).abs(),
                    cdf_err,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    let mut errs = Vec::new();
    for (n, res) in n_list.iter().zip(per_n) {
        let r = res?;
        let e = r.iter().map(|row| row.cdf_err).fold(0.0, f64::max);
        rows.extend(r);
        errs.push((*n as f64, e));
    }
    let fit = rate_fit("berry_esseen_cdf_err", &errs, skip_first)?;
    Ok(BerryEsseenStudy { rows, errs, fit, sigma })
}

#[derive(Clone, Debug)]
pub struct DensityRow {
    pub n: usize,
    pub t: f64,
    pub trace_dist: f64,
    /// N * Var(dGamma(O)/N) under psi_t; bounded by the law of large numbers.
    pub lln_scaled_var: f64,
}

#[derive(Clone, Debug)]
pub struct DensityStudy {
    pub rows: Vec<DensityRow>,
    pub errs: Vec<(f64, f64)>,
    pub fit: RateFit,
}

/// Trace-norm distance of the one-particle reduced density from the Hartree
/// projector, fitted over N; also reports the scaled variance of the averaged
/// observable.
pub fn density_matrix_rate_study(
    space: &SingleParticleSpace,
    traj: &HartreeTrajectory,
    obs: &Observable,
    times: &[f64],
    n_list: &[usize],
    skip_first: usize,
) -> Result<DensityStudy> {
    let phi0 = &traj.states[0];
    let per_n: Vec<Result<Vec<DensityRow>>> = n_list
        .par_iter()
        .map(|&n| {
            let basis = OccupationBasis::new(space.dim, Sector::FixedN(n))?;
            let h = build_hamiltonian(space, n, &basis)?;
            let prop = EigPropagator::new(&h)?;
            let psi0 = product_state(phi0, &basis)?;
            let dg = second_quantize(&basis, &obs.matrix)?;
            let mut rows = Vec::new();
            for &t in times {
                let psi_t = prop.apply_exp(&psi0, C64::new(0.0, -t));
                let phi_t = renormalized(space, &traj.state_at(t)?);
                let gamma = reduced_density_1(&basis, &psi_t, n)?;
                let mut diff = gamma.clone();
                for a in 0..space.dim {
                    for b in 0..space.dim {
                        diff[(a, b)] -= phi_t[a] * phi_t[b].conj();
                    }
                }
                let (eigs, _) = eigh_complex(&diff.data, space.dim)?;
                let trace_dist: f64 = eigs.iter().map(|e| e.abs()).sum();
                let dpsi = dg.apply(&psi_t);
                let mean = linalg::dot(&psi_t, &dpsi).re;
                let second = linalg::dot(&dpsi, &dpsi).re;
                let var = (second - mean * mean) / (n as f64 * n as f64);
                rows.push(DensityRow { n, t, trace_dist, lln_scaled_var: n as f64 * var });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    let mut errs = Vec::new();
    for (n, res) in n_list.iter().zip(per_n) {
        let r = res?;
        let e = r.iter().map(|row| row.trace_dist).fold(0.0, f64::max);
        rows.extend(r);
        errs.push((*n as f64, e));
    }
    let fit = rate_fit("gamma1_trace_dist", &errs, skip_first)?;
    Ok(DensityStudy { rows, errs, fit })
}

#[derive(Clone, Debug)]
pub struct FluctuationRow {
    pub n: usize,
    pub t: f64,
    pub n_mean: f64,
    pub n_sq_mean: f64,
    /// || (U_N(t;0) - U_inf(t;0)) Omega ||.
    pub diff_norm: f64,
}

#[derive(Clone, Debug)]
pub struct FluctuationStudy {
    pub rows: Vec<FluctuationRow>,
    /// (N, diff at the final time).
    pub diffs: Vec<(f64, f64)>,
    pub fit: RateFit,
}

/// Exact fluctuation dynamics against the limiting quadratic flow: particle
/// number growth table and the vector difference rate.
pub fn fluctuation_growth_study(
    space: &SingleParticleSpace,
    traj: &HartreeTrajectory,
    times: &[f64],
    n_list: &[usize],
    dt_quad: f64,
    skip_first: usize,
) -> Result<FluctuationStudy> {
    let per_n: Vec<Result<Vec<FluctuationRow>>> = n_list
        .par_iter()
        .map(|&n| {
            let n_max = required_n_max((n as f64).sqrt());
            let basis = OccupationBasis::new(space.dim, Sector::Truncated(n_max))?;
            let n_op = number_operator(&basis);
            let vac = vacuum(&basis)?;
            let mut rows = Vec::new();
            for &t in times {
                let psi_n = fluctuation_state(space, traj, &basis, n, t)?;
                let norm_loss = (linalg::norm(&psi_n) - 1.0).abs();
                if norm_loss > 1e-5 {
                    return Err(MflabError::Truncation(format!(
                        "fluctuation state lost {norm_loss:.3e} of its norm at N = {n}, \
                         t = {t}; raise n_max"
                    )));
                }
                let psi_inf = evolve_quadratic(space, traj, &basis, &vac, t, dt_quad)?;
                let npsi = n_op.apply(&psi_n);
                let n_mean = linalg::dot(&psi_n, &npsi).re;
                let n_sq_mean = linalg::dot(&npsi, &npsi).re;
                let diff_norm: f64 = psi_n
                    .iter()
                    .zip(&psi_inf)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                rows.push(FluctuationRow { n, t, n_mean, n_sq_mean, diff_norm });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    let mut diffs = Vec::new();
    for (n, res) in n_list.iter().zip(per_n) {
        let r = res?;
        let d = r.last().map(|row| row.diff_norm).unwrap_or(0.0);
        rows.extend(r);
        diffs.push((*n as f64, d));
    }
    let fit = rate_fit("fluctuation_diff_norm", &diffs, skip_first)?;
    Ok(FluctuationStudy { rows, diffs, fit })
}

#[derive(Clone, Debug)]
pub struct CrosscheckReport {
    pub t: f64,
    /// (n_max, max deviation) at successive truncations.
    pub deviations: Vec<(usize, f64)>,
}

/// Max deviation of <chi| U_inf* a(f) U_inf |chi'> from the Bogoliubov action
/// a(Uf) + a*(conj(Vf)), over a mode basis of f's and low-lying chi, chi'.
pub fn bogoliubov_crosscheck(
    space: &SingleParticleSpace,
    traj: &HartreeTrajectory,
    pair: &BogoliubovPair,
    t: f64,
    dt_quad: f64,
    n_max_list: &[usize],
) -> Result<CrosscheckReport> {
    if (pair.t - t).abs() > 1e-9 {
        return Err(MflabError::InvalidInput("Bogoliubov pair is for a different time".into()));
    }
    let m = space.dim;
    let mut deviations = Vec::new();
    for &n_max in n_max_list {
        let basis = OccupationBasis::new(m, Sector::Truncated(n_max))?;
        let low: Vec<usize> = (0..basis.dim()).filter(|&i| basis.total(i) <= 3).collect();
        let mut evolved: Vec<Option<Vec<C64>>> = vec![None; basis.dim()];
        for &i in &low {
            let mut e = vec![ZERO; basis.dim()];
            e[i] = linalg::ONE;
            evolved[i] = Some(evolve_quadratic(space, traj, &basis, &e, t, dt_quad)?);
        }
        let mut dev = 0.0f64;
        for mode in 0..m {
            let mut f = vec![ZERO; m];
            f[mode] = linalg::ONE;
            let uf = pair.u.matvec(&f);
            let vf_conj = space.conjugate(&pair.v.matvec(&f));
            let a_f = annihilator(&basis, &f)?;
            let rhs_op = annihilator(&basis, &uf)?.add(&creator(&basis, &vf_conj)?)?;
            for &col in &low {
                let lhs_col = a_f.apply(evolved[col].as_ref().unwrap());
                for &row in &low {
                    let lhs = linalg::dot(evolved[row].as_ref().unwrap(), &lhs_col);
                    let rhs = rhs_op.get(row, col);
                    dev = dev.max((lhs - rhs).norm());
                }
            }
        }
        deviations.push((n_max, dev));
    }
    Ok(CrosscheckReport { t, deviations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bogoliubov::{propagate_theta, ThetaIntegrator};
    use crate::hartree::{evolve_hartree, HartreeMethod};
    use crate::space::two_mode_space;

    fn setup(t_final: f64) -> (SingleParticleSpace, HartreeTrajectory, Vec<BogoliubovPair>) {
        let space = two_mode_space(1.0, 0.4);
        let mut phi0 = vec![ZERO; 2];
        phi0[0] = C64::new(0.8, 0.0);
        phi0[1] = C64::new(0.0, 0.6);
        let traj = evolve_hartree(&space, &phi0, t_final, 1e-3, HartreeMethod::Rk4).unwrap();
        let pairs = propagate_theta(&space, &traj, 1e-3, ThetaIntegrator::MidpointMagnus).unwrap();
        (space, traj, pairs)
    }

    fn pauli_z() -> Observable {
        let mut m = CMat::zeros(2);
        m[(0, 0)] = linalg::ONE;
        m[(1, 1)] = -linalg::ONE;
        Observable::new(m, Some("sz".into())).unwrap()
    }

    fn pauli_x() -> Observable {
        let mut m = CMat::zeros(2);
        m[(0, 1)] = linalg::ONE;
        m[(1, 0)] = linalg::ONE;
        Observable::new(m, Some("sx".into())).unwrap()
    }

    #[test]
    fn tau_grid_is_a_tensor_product() {
        let grid = default_tau_grid(2);
        assert_eq!(grid.len(), 169);
        assert_eq!(grid[0], vec![-3.0, -3.0]);
        assert_eq!(grid[168], vec![3.0, 3.0]);
        assert_eq!(grid[84], vec![0.0, 0.0]);
    }

    #[test]
    fn rate_fit_recovers_a_power_law() {
        let points: Vec<(f64, f64)> =
            [8.0f64, 16.0, 32.0, 64.0].iter().map(|&n| (n, 3.2 / n.sqrt())).collect();
        let fit = rate_fit("synthetic", &points, 0).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.2f64.ln()).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(rate_fit("short", &points, 2).is_err());
    }

    #[test]
    fn rate_fit_window_drops_preasymptotic_points() {
        // first point off the power law by a factor of 10
        let mut points: Vec<(f64, f64)> =
            [4.0, 8.0, 16.0, 32.0, 64.0].iter().map(|&n| (n, 1.0 / n)).collect();
        points[0].1 *= 10.0;
        let fit = rate_fit("windowed", &points, 1).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert_eq!(fit.points.len(), 5);
        assert_eq!(fit.skip_first, 1);
    }

    #[test]
    fn clt_errors_shrink_with_n() {
        let (space, traj, pairs) = setup(0.2);
        let obs = vec![pauli_z()];
        let tau_grid: Vec<Vec<f64>> = [-2.0, -1.0, 1.0, 2.0].iter().map(|&t| vec![t]).collect();
        let study = clt_convergence_study(
            &space, &traj, &pairs, &obs, &[0.0, 0.2], &[8, 16, 32, 64], &tau_grid, 0,
        )
        .unwrap();
        assert_eq!(study.errs.len(), 4);
        assert!(study.errs[0].1 > study.errs[3].1);
        assert!(study.fit.slope < -0.3, "slope = {}", study.fit.slope);
        assert_eq!(study.rows.len(), 4 * 2 * 4);
    }

    #[test]
    fn clt_rejects_unsorted_n_list() {
        let (space, traj, pairs) = setup(0.2);
        let err = clt_convergence_study(
            &space, &traj, &pairs, &[pauli_z()], &[0.0], &[16, 8], &[vec![1.0]], 0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn berry_esseen_probabilities_converge() {
        let (space, traj, pairs) = setup(0.2);
        let study = berry_esseen_study(
            &space, &traj, &pairs, &pauli_x(), &[0.0, 0.2], &[16, 32, 64, 128], (-1.0, 1.0), 0,
        )
        .unwrap();
        for s in &study.sigma {
            assert!(*s > 0.1 && *s < 10.0);
        }
        for row in &study.rows {
            assert!(row.p_exact >= 0.0 && row.p_exact <= 1.0 + 1e-12);
        }
        assert!(study.errs[0].1 > study.errs[3].1);
        assert!(study.fit.slope < -0.2, "slope = {}", study.fit.slope);
    }

    #[test]
    fn berry_esseen_rejects_bad_interval() {
        let (space, traj, pairs) = setup(0.2);
        let err = berry_esseen_study(
            &space, &traj, &pairs, &pauli_x(), &[0.0], &[8, 16, 32], (1.0, -1.0), 0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn density_rate_is_one_over_n() {
        let (space, traj, _) = setup(0.5);
        let study = density_matrix_rate_study(
            &space, &traj, &pauli_z(), &[0.5], &[8, 16, 32, 64], 0,
        )
        .unwrap();
        assert!(
            study.fit.slope > -1.4 && study.fit.slope < -0.6,
            "slope = {}",
            study.fit.slope
        );
        // law of large numbers: N * Var(dGamma(O)/N) stays bounded
        for row in &study.rows {
            assert!(row.lln_scaled_var < 10.0);
        }
    }

    #[test]
    fn fluctuation_difference_decays_and_number_stays_uniform() {
        let (space, traj, _) = setup(0.3);
        let study =
            fluctuation_growth_study(&space, &traj, &[0.3], &[2, 4, 8, 16], 1e-3, 0).unwrap();
        assert!(study.diffs[0].1 > study.diffs[3].1);
        assert!(study.fit.slope < -0.3, "slope = {}", study.fit.slope);
        let means: Vec<f64> = study.rows.iter().map(|r| r.n_mean).collect();
        let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = means.iter().cloned().fold(0.0, f64::max);
        assert!(hi <= 2.0 * lo.max(1e-3), "n_mean spread [{lo}, {hi}]");
    }

    #[test]
    fn crosscheck_deviation_is_small_and_improves() {
        let (space, traj, pairs) = setup(0.3);
        let pair = pair_at(&pairs, 0.3).unwrap();
        let report =
            bogoliubov_crosscheck(&space, &traj, pair, 0.3, 1e-3, &[12, 24]).unwrap();
        assert_eq!(report.deviations.len(), 2);
        assert!(report.deviations[0].1 < 1e-4);
        assert!(report.deviations[1].1 <= report.deviations[0].1);
    }
}
