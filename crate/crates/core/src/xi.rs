//! The coefficient family xi_N^(l), its N -> infinity limit, and the weighted
//! norms controlling the expansion of the product state around the coherent
//! state.
//!
//! Everything is stored in the scaled variable w_l = sqrt(l!) xi^(l), the
//! natural Fock-norm weight (|a*(phi)^l Omega|^2 = l!). xi^(l) and l!
//! separately overflow near l = 170 while w_l stays O(1).

use crate::error::{MflabError, Result};
use crate::util::ln_gamma;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XiMethod {
    /// Upward three-term recursion; accurate while l stays below ~N.
    Upward,
    /// Downward (Miller-style) recursion, normalized by w_0 = 1; needed for
    /// the norm sums whose mass sits near l ~ N.
    Downward,
    /// Limiting coefficients.
    Infinity,
}

#[derive(Clone, Debug)]
pub struct XiCoefficients {
    /// None encodes N = infinity.
    pub n: Option<usize>,
    pub l_max: usize,
    /// w[l] = sqrt(l!) xi^(l), indices 0..=l_max.
    pub w: Vec<f64>,
    pub method: XiMethod,
}

/// Upward scaled recursion
/// w_l = -((l-1)/sqrt(l N)) w_{l-1} - sqrt((l-1)/l) w_{l-2},
/// equivalent to xi_N^(l) = ((1-l)/l) N^{-1/2} xi^(l-1) - (1/l) xi^(l-2).
pub fn xi_recursion(n: usize, l_max: usize) -> Result<XiCoefficients> {
    if n == 0 {
        return Err(MflabError::InvalidInput("need N >= 1".into()));
    }
    if l_max < 2 {
        return Err(MflabError::InvalidInput("need l_max >= 2".into()));
    }
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut w = vec![0.0f64; l_max + 1];
    w[0] = 1.0;
    w[1] = 0.0;
    for l in 2..=l_max {
        let lf = l as f64;
        w[l] = -((lf - 1.0) / lf.sqrt()) * inv_sqrt_n * w[l - 1]
            - ((lf - 1.0) / lf).sqrt() * w[l - 2];
    }
    Ok(XiCoefficients { n: Some(n), l_max, w, method: XiMethod::Upward })
}

/// Natural log of |x| for a big integer with arbitrary magnitude.
fn ln_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.abs().to_string().parse::<f64>().map(f64::ln).unwrap_or(f64::NEG_INFINITY);
    }
    let shift = bits - 52;
    let top: BigInt = x.abs() >> shift;
    let top_f: f64 = top.to_string().parse().unwrap();
    top_f.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Closed form
/// xi_N^(l) = sum_{j=0}^l (-1)^j N^{j-l/2} N!/((N-l+j)! (l-j)! j!),
/// returned in the scaled variable w_l = sqrt(l!) xi_N^(l).
///
/// The alternating terms cancel almost completely, so the integer sum
/// S = sum_j (-1)^j N^j falling(N, l-j) binom(l, j) = l! N^{l/2} xi_N^(l)
/// is evaluated exactly before taking logs.
pub fn xi_closed_form(n: usize, l: usize) -> Result<f64> {
    if l > n {
        return Err(MflabError::InvalidInput(format!(
            "closed form needs l <= N (got l = {l}, N = {n})"
        )));
    }
    let n_big = BigInt::from(n);
    let mut sum = BigInt::zero();
    for j in 0..=l {
        // N^j * N!/(N-l+j)! * C(l, j)
        let mut term = n_big.pow(j as u32);
        for i in 0..(l - j) {
            term *= BigInt::from(n - i);
        }
        let mut binom = BigInt::from(1);
        for i in 0..j {
            binom = binom * BigInt::from(l - i) / BigInt::from(i + 1);
        }
        term *= binom;
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return Ok(0.0);
    }
    let sign = if sum.is_negative() { -1.0 } else { 1.0 };
    // w_l = S / (N^{l/2} sqrt(l!))
    let ln_mag = ln_big(&sum)
        - 0.5 * l as f64 * (n as f64).ln()
        - 0.5 * ln_gamma(l as f64 + 1.0);
    Ok(sign * ln_mag.exp())
}

/// Limiting coefficients xi_inf^(2m) = (-1)^m / (2^m m!), odd l zero; in the
/// scaled variable the recursion is w_l = -sqrt((l-1)/l) w_{l-2}.
pub fn xi_infinity(l_max: usize) -> XiCoefficients {
    let mut w = vec![0.0f64; l_max + 1];
    w[0] = 1.0;
    for l in (2..=l_max).step_by(2) {
        let lf = l as f64;
        w[l] = -((lf - 1.0) / lf).sqrt() * w[l - 2];
    }
    XiCoefficients { n: None, l_max, w, method: XiMethod::Infinity }
}

/// Downward recursion from trial values at l_top, rescaled so that w_0 = 1.
/// The upward recursion is unstable once l exceeds ~N (the wanted solution is
/// subdominant there); downward it is the growing one.
fn xi_downward(n: usize, l_top: usize) -> Result<XiCoefficients> {
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut w = vec![0.0f64; l_top + 1];
    w[l_top] = 1e-280;
    if l_top >= 1 {
        w[l_top - 1] = 0.0;
    }
    // solve w_{l-2} from the three-term recursion at index l
    for l in (2..=l_top).rev() {
        let lf = l as f64;
        let val = -(w[l] + (lf - 1.0) / lf.sqrt() * inv_sqrt_n * w[l - 1])
            / ((lf - 1.0) / lf).sqrt();
        w[l - 2] = val;
        if val.abs() > 1e280 {
            // rescale to avoid overflow; only the direction matters
            let s = 1.0 / val.abs();
            for x in w[l - 2..].iter_mut() {
                *x *= s;
            }
        }
    }
    if w[0] == 0.0 {
        return Err(MflabError::InvalidInput("downward recursion lost the w_0 component".into()));
    }
    let s = 1.0 / w[0];
    for x in w.iter_mut() {
        *x *= s;
    }
    if w[1].abs() > 1e-8 {
        return Err(MflabError::InvalidInput(format!(
            "downward recursion inconsistent: w_1 = {:.3e} (expected 0)",
            w[1]
        )));
    }
    Ok(XiCoefficients { n: Some(n), l_max: l_top, w, method: XiMethod::Downward })
}

#[derive(Clone, Copy, Debug)]
pub struct XiNorms {
    pub n: usize,
    /// sum_l w_l^2 / (l+1); uniformly bounded in N.
    pub apriori: f64,
    /// sum_l w_l^2; equals d_N^2.
    pub total: f64,
    /// sum_l (w_l(N) - w_l(inf))^2 / (l+1)^5; decays like 1/N.
    pub diff5: f64,
    /// d_N^2 = e^N N^{-N} N! computed in log space.
    pub d_n_sq: f64,
    /// truncation actually used after adaptive doubling.
    pub l_max_used: usize,
}

const L_MAX_CAP: usize = 1 << 18;

/// Weighted norm summary. `l_max` is a starting hint; the truncation doubles
/// until the tail contribution of every sum drops below 1e-12 relative.
pub fn xi_norms(n: usize, l_max: usize) -> Result<XiNorms> {
    if n == 0 {
        return Err(MflabError::InvalidInput("need N >= 1".into()));
    }
    let ln_d_sq = n as f64 - n as f64 * (n as f64).ln() + ln_gamma(n as f64 + 1.0);
    let d_n_sq = ln_d_sq.exp();
    let mut l_top = l_max.max(64);
    loop {
        // too small an l_top fails the w_1 consistency check (not enough
        // runway above the occupation bulk near l ~ N); treat that the same
        // as an unconverged tail
        let xi = match xi_downward(n, l_top) {
            Ok(xi) => xi,
            Err(_) if l_top < L_MAX_CAP => {
                l_top *= 2;
                continue;
            }
            Err(e) => return Err(e),
        };
        let winf = xi_infinity(l_top);
        let mut apriori = 0.0f64;
        let mut total = 0.0f64;
        let mut diff5 = 0.0f64;
        let mut tail_apriori = 0.0f64;
        let mut tail_total = 0.0f64;
        let mut tail_diff5 = 0.0f64;
        let tail_start = l_top - l_top / 8;
        for l in 0..=l_top {
            let wl = xi.w[l];
            let lp = (l + 1) as f64;
            let a = wl * wl / lp;
            let t = wl * wl;
            let d = (wl - winf.w[l]).powi(2) / lp.powi(5);
            apriori += a;
            total += t;
            diff5 += d;
            if l >= tail_start {
                tail_apriori += a;
                tail_total += t;
                tail_diff5 += d;
            }
        }
        let converged = tail_apriori <= 1e-12 * apriori
            && tail_total <= 1e-12 * total
            && tail_diff5 <= 1e-12 * diff5.max(1e-300);
        if converged {
            return Ok(XiNorms { n, apriori, total, diff5, d_n_sq, l_max_used: l_top });
        }
        if l_top >= L_MAX_CAP {
            return Err(MflabError::Truncation(format!(
                "xi norm tails not converged by l_max = {l_top} for N = {n}"
            )));
        }
        l_top *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::linfit;

    fn xi_from_w(w: f64, l: usize) -> f64 {
        w * (-0.5 * ln_gamma(l as f64 + 1.0)).exp()
    }

    #[test]
    fn low_order_values() {
        for n in [1usize, 2, 10, 1000] {
            let xi = xi_recursion(n, 6).unwrap();
            assert_eq!(xi.w[0], 1.0);
            assert_eq!(xi.w[1], 0.0);
            // xi^(2) = -1/2 for every N
            assert!((xi_from_w(xi.w[2], 2) + 0.5).abs() < 1e-14);
            // xi^(3) = (1/3) N^{-1/2}
            let expect3 = (n as f64).powf(-0.5) / 3.0;
            assert!((xi_from_w(xi.w[3], 3) - expect3).abs() < 1e-14);
        }
        // xi^(4) -> 1/8 for large N
        let xi = xi_recursion(100_000_000, 4).unwrap();
        assert!((xi_from_w(xi.w[4], 4) - 0.125).abs() < 1e-3);
    }

    #[test]
    fn closed_form_matches_recursion() {
        assert!((xi_closed_form(50, 0).unwrap() - 1.0).abs() < 1e-14);
        let w2 = xi_closed_form(50, 2).unwrap();
        assert!((xi_from_w(w2, 2) + 0.5).abs() < 1e-12);
        for n in [100usize, 1000, 1_000_000] {
            let l_hi = 60.min(n);
            let xi = xi_recursion(n, l_hi).unwrap();
            for l in [5usize, 10, 25, 60] {
                if l > l_hi {
                    continue;
                }
                let cf = xi_closed_form(n, l).unwrap();
                let rec = xi.w[l];
                assert!(
                    (cf - rec).abs() <= 1e-10 * rec.abs().max(1e-30),
                    "N = {n}, l = {l}: closed {cf:e} vs recursion {rec:e}"
                );
            }
        }
    }

    #[test]
    fn closed_form_rejects_l_above_n() {
        assert!(xi_closed_form(5, 6).is_err());
    }

    #[test]
    fn infinity_closed_form() {
        let xi = xi_infinity(9);
        // xi^(2m) = (-1)^m / (2^m m!)
        assert!((xi_from_w(xi.w[2], 2) + 0.5).abs() < 1e-14);
        assert!((xi_from_w(xi.w[4], 4) - 0.125).abs() < 1e-14);
        for l in [1usize, 3, 5, 7, 9] {
            assert_eq!(xi.w[l], 0.0);
        }
    }

    #[test]
    fn pointwise_convergence_rates() {
        // the parity-mixing term enters at order N^{-1/2}, so odd
        // coefficients (zero in the limit) vanish like N^{-1/2} while even
        // ones converge like N^{-1}: one recursion step gives
        // xi^(4) = 1/8 - 1/(4N) exactly
        let winf = xi_infinity(12);
        let slope_of = |l: usize| {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for n in [100usize, 400, 1600, 6400, 25600] {
                let xi = xi_recursion(n, 12).unwrap();
                let err = (xi.w[l] - winf.w[l]).abs();
                xs.push((n as f64).ln());
                ys.push(err.ln());
            }
            let (_, slope, _, _) = linfit(&xs, &ys);
            slope
        };
        for l in [3usize, 7, 11] {
            let s = slope_of(l);
            assert!((-0.6..=-0.4).contains(&s), "odd l = {l}: slope {s:.3}");
        }
        for l in [4usize, 8, 12] {
            let s = slope_of(l);
            assert!((-1.1..=-0.9).contains(&s), "even l = {l}: slope {s:.3}");
        }
    }

    #[test]
    fn downward_agrees_with_upward_at_low_l() {
        for n in [10usize, 100] {
            let up = xi_recursion(n, n).unwrap();
            let down = xi_downward(n, (8 * n).max(128)).unwrap();
            for l in 0..=n / 2 {
                assert!(
                    (up.w[l] - down.w[l]).abs() < 1e-9 * (up.w[l].abs() + 1.0),
                    "N = {n}, l = {l}: up {:.15e} vs down {:.15e}",
                    up.w[l],
                    down.w[l]
                );
            }
        }
    }

    #[test]
    fn norm_sums_match_paper_bounds() {
        let mut diff5s = Vec::new();
        for n in [10usize, 100, 1000, 10000] {
            let norms = xi_norms(n, 64).unwrap();
            // total = d_N^2
            let ratio = norms.total / norms.d_n_sq;
            assert!(
                (0.999..=1.001).contains(&ratio),
                "N = {n}: total/d_N^2 = {ratio:.6}"
            );
            // uniform a priori bound
            assert!(norms.apriori <= 10.0, "N = {n}: apriori = {}", norms.apriori);
            diff5s.push((n as f64, norms.diff5));
        }
        assert!(xi_norms(2, 64).unwrap().apriori <= 10.0);
        // diff5 decays like 1/N
        let xs: Vec<f64> = diff5s.iter().map(|(n, _)| n.ln()).collect();
        let ys: Vec<f64> = diff5s.iter().map(|(_, d)| d.ln()).collect();
        let (_, slope, _, _) = linfit(&xs, &ys);
        assert!(slope <= -0.9, "diff5 slope {slope:.3}");
        // and N * diff5 shows no upward trend
        for win in diff5s.windows(2) {
            assert!(win[1].0 * win[1].1 <= 1.5 * win[0].0 * win[0].1);
        }
    }

    #[test]
    fn norm_sums_stable_under_doubling() {
        let a = xi_norms(100, 64).unwrap();
        let b = xi_norms(100, 2 * a.l_max_used).unwrap();
        assert!((a.apriori - b.apriori).abs() < 1e-10 * a.apriori);
        assert!((a.total - b.total).abs() < 1e-10 * a.total);
        assert!((a.diff5 - b.diff5).abs() < 1e-10 * a.diff5);
    }
}
