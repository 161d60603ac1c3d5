//! Small dense complex matrices (row-major) used by the single-particle
//! kernels. Dimensions here are tiny (m <= a few dozen), so everything is
//! plain O(n^3) code.

use crate::error::{MflabError, Result};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = Complex64::new(0.0, 0.0);
pub const ONE: C64 = Complex64::new(1.0, 0.0);
pub const I: C64 = Complex64::new(0.0, 1.0);

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![ZERO; n * n] }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n);
            data.extend_from_slice(r);
        }
        CMat { n, data }
    }

    pub fn from_real(n: usize, re: &[f64]) -> Self {
        assert_eq!(re.len(), n * n);
        CMat { n, data: re.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n;
        assert_eq!(x.len(), n);
        let mut y = vec![ZERO; n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = ZERO;
            for j in 0..n {
                acc += row[j] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        let n = self.n;
        assert_eq!(other.n, n);
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn conj_elementwise(&self) -> CMat {
        CMat { n: self.n, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, c: C64) -> CMat {
        CMat { n: self.n, data: self.data.iter().map(|&z| z * c).collect() }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        CMat {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        CMat {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    /// exp(A) by scaling-and-squaring with a Taylor core.
    pub fn expm(&self) -> CMat {
        let norm = self.one_norm();
        let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let a = self.scale(C64::new(1.0 / (1u64 << s) as f64, 0.0));
        // Taylor on the scaled matrix (|A| <= 0.5 converges fast).
        let mut term = CMat::eye(self.n);
        let mut sum = CMat::eye(self.n);
        for k in 1..=24 {
            term = term.matmul(&a).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
            if term.max_abs() < 1e-18 {
                break;
            }
        }
        let mut out = sum;
        for _ in 0..s {
            out = out.matmul(&out);
        }
        out
    }

    /// LU decomposition with partial pivoting; returns (inverse, determinant).
    pub fn inverse_det(&self) -> Result<(CMat, C64)> {
        let n = self.n;
        let mut lu = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut det = ONE;
        for col in 0..n {
            let (pivot, pmax) = (col..n)
                .map(|r| (r, lu[r * n + col].norm()))
                .fold((col, -1.0), |acc, (r, v)| if v > acc.1 { (r, v) } else { acc });
            if pmax < 1e-300 {
                return Err(MflabError::InvalidInput("singular matrix in inverse".into()));
            }
            if pivot != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot * n + j);
                }
                perm.swap(col, pivot);
                det = -det;
            }
            det *= lu[col * n + col];
            for r in (col + 1)..n {
                let f = lu[r * n + col] / lu[col * n + col];
                lu[r * n + col] = f;
                for j in (col + 1)..n {
                    let sub = f * lu[col * n + j];
                    lu[r * n + j] -= sub;
                }
            }
        }
        // Solve A X = I column by column.
        let mut inv = CMat::zeros(n);
        for rhs in 0..n {
            let mut y = vec![ZERO; n];
            for i in 0..n {
                let mut acc = if perm[i] == rhs { ONE } else { ZERO };
                for j in 0..i {
                    acc -= lu[i * n + j] * y[j];
                }
                y[i] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = y[i];
                for j in (i + 1)..n {
                    acc -= lu[i * n + j] * y[j];
                }
                y[i] = acc / lu[i * n + i];
            }
            for i in 0..n {
                inv[(i, rhs)] = y[i];
            }
        }
        Ok((inv, det))
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        let n = self.n;
        &mut self.data[i * n + j]
    }
}

pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Ordinary least squares fit y = a + b x; returns (intercept, slope,
/// slope standard error, rms residual).
pub fn linfit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    assert!(x.len() == y.len() && x.len() >= 3);
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (intercept + slope * xi);
            r * r
        })
        .sum();
    let dof = (x.len() - 2).max(1) as f64;
    let stderr = (ss_res / dof / sxx).sqrt();
    let rms = (ss_res / n).sqrt();
    (intercept, slope, stderr, rms)
}
