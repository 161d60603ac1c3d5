//! Sparse second-quantized operators on occupation bases.

use crate::error::{MflabError, Result};
use crate::linalg::{C64, CMat, ZERO};
use crate::space::SingleParticleSpace;
use crate::util::DetRng;

use super::basis::OccupationBasis;

/// CSR sparse complex matrix tied to a basis dimension.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<C64>,
    pub hermitian: bool,
}

impl SparseOperator {
    /// Build from (row, col, value) triplets; duplicates are summed. When
    /// `hermitian` is claimed it is verified on up to 100 sampled entries.
    pub fn from_triplets(
        dim: usize,
        mut triplets: Vec<(usize, usize, C64)>,
        hermitian: bool,
    ) -> Result<Self> {
        triplets.retain(|t| t.2 != ZERO);
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_counts = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if prev == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_counts[r + 1] += 1;
                prev = Some((r, c));
            }
        }
        for r in 0..dim {
            row_counts[r + 1] += row_counts[r];
        }
        let op = SparseOperator { dim, row_ptr: row_counts, col_idx, vals, hermitian };
        if hermitian {
            op.verify_hermitian()?;
        }
        Ok(op)
    }

    fn verify_hermitian(&self) -> Result<()> {
        let nnz = self.col_idx.len();
        if nnz == 0 {
            return Ok(());
        }
        let mut rng = DetRng::new(0x5eed);
        let samples = nnz.min(100);
        for _ in 0..samples {
            let k = rng.next_usize(nnz);
            let row = self.row_ptr.partition_point(|&p| p <= k) - 1;
            let col = self.col_idx[k];
            let mirror = self.get(col, row);
            if (self.vals[k] - mirror.conj()).norm() > 1e-12 * self.vals[k].norm().max(1.0) {
                return Err(MflabError::InvalidInput(format!(
                    "operator claimed hermitian but A[{row},{col}] != conj(A[{col},{row}])"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => ZERO,
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![ZERO; self.dim];
        for i in 0..self.dim {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
        y
    }

    pub fn expectation(&self, x: &[C64]) -> C64 {
        crate::linalg::dot(x, &self.apply(x))
    }

    pub fn scale(&self, c: C64) -> SparseOperator {
        SparseOperator {
            dim: self.dim,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            vals: self.vals.iter().map(|&v| v * c).collect(),
            hermitian: self.hermitian && c.im == 0.0,
        }
    }

    /// Sum of two operators on the same basis.
    pub fn add(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.dim != other.dim {
            return Err(MflabError::InvalidInput("operator dimension mismatch".into()));
        }
        let mut triplets = Vec::with_capacity(self.vals.len() + other.vals.len());
        for op in [self, other] {
            for i in 0..op.dim {
                for k in op.row_ptr[i]..op.row_ptr[i + 1] {
                    triplets.push((i, op.col_idx[k], op.vals[k]));
                }
            }
        }
        SparseOperator::from_triplets(self.dim, triplets, false)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = self.vals[k];
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Cheap upper bound on the spectral radius (max row sum).
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.vals[k].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderKind {
    Create,
    Annihilate,
}

/// Single-mode ladder operator; truncated bases only (the fixed-N sector is
/// not invariant under either kind).
pub fn ladder(basis: &OccupationBasis, mode: usize, kind: LadderKind) -> Result<SparseOperator> {
    if !basis.is_truncated() {
        return Err(MflabError::Basis(
            "ladder operators need a truncated basis; the fixed-N sector is not invariant".into(),
        ));
    }
    if mode >= basis.m {
        return Err(MflabError::Basis(format!("mode {mode} out of range")));
    }
    let mut triplets = Vec::new();
    for i in 0..basis.dim() {
        let occ = basis.occ(i);
        match kind {
            LadderKind::Annihilate => {
                if occ[mode] > 0 {
                    let mut target = occ.to_vec();
                    target[mode] -= 1;
                    let j = basis.index_of(&target).expect("lower state always kept");
                    triplets.push((j, i, C64::new((occ[mode] as f64).sqrt(), 0.0)));
                }
            }
            LadderKind::Create => {
                let mut target = occ.to_vec();
                target[mode] += 1;
                // beyond the truncation edge the column is simply dropped
                if let Some(j) = basis.index_of(&target) {
                    triplets.push((j, i, C64::new((occ[mode] as f64 + 1.0).sqrt(), 0.0)));
                }
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, false)
}

/// a(f) = sum_a conj(f_a) a_a (antilinear in f).
pub fn annihilator(basis: &OccupationBasis, f: &[C64]) -> Result<SparseOperator> {
    if !basis.is_truncated() {
        return Err(MflabError::Basis("a(f) needs a truncated basis".into()));
    }
    let mut triplets = Vec::new();
    for i in 0..basis.dim() {
        let occ = basis.occ(i);
        for mode in 0..basis.m {
            if occ[mode] > 0 && f[mode] != ZERO {
                let mut target = occ.to_vec();
                target[mode] -= 1;
                let j = basis.index_of(&target).unwrap();
                triplets.push((j, i, f[mode].conj() * (occ[mode] as f64).sqrt()));
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, false)
}

/// a*(f) = sum_a f_a a_a* (linear in f).
pub fn creator(basis: &OccupationBasis, f: &[C64]) -> Result<SparseOperator> {
    if !basis.is_truncated() {
        return Err(MflabError::Basis("a*(f) needs a truncated basis".into()));
    }
    let mut triplets = Vec::new();
    for i in 0..basis.dim() {
        let occ = basis.occ(i);
        for mode in 0..basis.m {
            if f[mode] != ZERO {
                let mut target = occ.to_vec();
                target[mode] += 1;
                if let Some(j) = basis.index_of(&target) {
                    triplets.push((j, i, f[mode] * (occ[mode] as f64 + 1.0).sqrt()));
                }
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, false)
}

/// Selfadjoint field operator phi(f) = a(f) + a*(f).
pub fn field_operator(basis: &OccupationBasis, f: &[C64]) -> Result<SparseOperator> {
    let a = annihilator(basis, f)?;
    let c = creator(basis, f)?;
    let sum = a.add(&c)?;
    // hermitian on the truncated space except at the edge; don't claim it
    Ok(sum)
}

/// Number operator (diagonal).
pub fn number_operator(basis: &OccupationBasis) -> SparseOperator {
    let triplets = (0..basis.dim())
        .map(|i| (i, i, C64::new(basis.total(i) as f64, 0.0)))
        .collect();
    SparseOperator::from_triplets(basis.dim(), triplets, true).expect("diagonal real")
}

/// Second quantization dGamma(O) = sum_ab O_ab a_a* a_b; particle-number
/// conserving, works on both sector kinds.
pub fn second_quantize(basis: &OccupationBasis, o: &CMat) -> Result<SparseOperator> {
    if o.n != basis.m {
        return Err(MflabError::Basis(format!(
            "observable is {}x{} but the basis has {} modes",
            o.n, o.n, basis.m
        )));
    }
    let hermitian = o.hermiticity_defect() <= 1e-12 * o.max_abs().max(1.0);
    let mut triplets = Vec::new();
    for i in 0..basis.dim() {
        let occ = basis.occ(i);
        for b in 0..basis.m {
            if occ[b] == 0 {
                continue;
            }
            for a in 0..basis.m {
                let coef = o[(a, b)];
                if coef == ZERO {
                    continue;
                }
                if a == b {
                    triplets.push((i, i, coef * occ[b] as f64));
                } else {
                    let mut target = occ.to_vec();
                    target[b] -= 1;
                    target[a] += 1;
                    if let Some(j) = basis.index_of(&target) {
                        let amp = (occ[b] as f64).sqrt() * (occ[a] as f64 + 1.0).sqrt();
                        triplets.push((j, i, coef * amp));
                    }
                }
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, hermitian)
}

/// H_N = dGamma(K) + (1/2N) sum_abcd W_abcd a_a* a_b* a_d a_c on a
/// tensor-backed space.
pub fn build_hamiltonian(
    space: &SingleParticleSpace,
    n_particles: usize,
    basis: &OccupationBasis,
) -> Result<SparseOperator> {
    if space.dim != basis.m {
        return Err(MflabError::Basis(format!(
            "space has {} modes, basis has {}",
            space.dim, basis.m
        )));
    }
    if n_particles == 0 {
        return Err(MflabError::InvalidInput("need N >= 1".into()));
    }
    let m = basis.m;
    // reject grid-backed spaces up front (w_entry errors there)
    space.w_entry(0, 0, 0, 0)?;
    let mut triplets = Vec::new();
    let kinetic = second_quantize(basis, &space.kinetic)?;
    for i in 0..kinetic.dim {
        for k in kinetic.row_ptr[i]..kinetic.row_ptr[i + 1] {
            triplets.push((i, kinetic.col_idx[k], kinetic.vals[k]));
        }
    }
    let pref = 1.0 / (2.0 * n_particles as f64);
    for i in 0..basis.dim() {
        let occ = basis.occ(i);
        for c in 0..m {
            if occ[c] == 0 {
                continue;
            }
            for d in 0..m {
                // apply a_d a_c to |occ>
                let mut work = occ.to_vec();
                let mut amp = (work[c] as f64).sqrt();
                work[c] -= 1;
                if work[d] == 0 {
                    continue;
                }
                amp *= (work[d] as f64).sqrt();
                work[d] -= 1;
                for b in 0..m {
                    for a in 0..m {
                        let w = space.w_entry(a, b, c, d)?;
                        if w == ZERO {
                            continue;
                        }
                        let mut target = work.clone();
                        let mut amp2 = amp * (target[b] as f64 + 1.0).sqrt();
                        target[b] += 1;
                        amp2 *= (target[a] as f64 + 1.0).sqrt();
                        target[a] += 1;
                        // number conserving: target always in the basis
                        let j = basis.index_of(&target).expect("interaction conserves N");
                        triplets.push((j, i, w * amp2 * pref));
                    }
                }
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, true)
}

/// One-particle reduced density gamma^(1)_ab = <a_b* a_a> / N on a fixed-N
/// state.
pub fn reduced_density_1(
    basis: &OccupationBasis,
    psi: &[C64],
    n_particles: usize,
) -> Result<CMat> {
    let m = basis.m;
    let mut gamma = CMat::zeros(m);
    for i in 0..basis.dim() {
        if psi[i] == ZERO {
            continue;
        }
        let occ = basis.occ(i);
        for a in 0..m {
            if occ[a] == 0 {
                continue;
            }
            for b in 0..m {
                // a_b* a_a |occ>
                let mut target = occ.to_vec();
                let mut amp = (target[a] as f64).sqrt();
                target[a] -= 1;
                amp *= (target[b] as f64 + 1.0).sqrt();
                target[b] += 1;
                if let Some(j) = basis.index_of(&target) {
                    gamma[(a, b)] += psi[j].conj() * amp * psi[i];
                }
            }
        }
    }
    // gamma_ab accumulated as <a_b* a_a>; normalize by N
    let gamma = gamma.scale(C64::new(1.0 / n_particles as f64, 0.0));
    Ok(gamma)
}

/// Two-particle reduced density on mode pairs:
/// gamma^(2)[(a,b),(c,d)] = <a_c* a_d* a_b a_a> / (N(N-1)).
pub fn reduced_density_2(
    basis: &OccupationBasis,
    psi: &[C64],
    n_particles: usize,
) -> Result<CMat> {
    if n_particles < 2 {
        return Err(MflabError::InvalidInput("gamma^(2) needs N >= 2".into()));
    }
    let m = basis.m;
    let mut gamma = CMat::zeros(m * m);
    for i in 0..basis.dim() {
        if psi[i] == ZERO {
            continue;
        }
        let occ = basis.occ(i);
        for a in 0..m {
            for b in 0..m {
                // a_b a_a |occ>
                let mut work = occ.to_vec();
                if work[a] == 0 {
                    continue;
                }
                let mut amp = (work[a] as f64).sqrt();
                work[a] -= 1;
                if work[b] == 0 {
                    continue;
                }
                amp *= (work[b] as f64).sqrt();
                work[b] -= 1;
                for c in 0..m {
                    for d in 0..m {
                        let mut target = work.clone();
                        let mut amp2 = amp * (target[d] as f64 + 1.0).sqrt();
                        target[d] += 1;
                        amp2 *= (target[c] as f64 + 1.0).sqrt();
                        target[c] += 1;
                        if let Some(j) = basis.index_of(&target) {
                            gamma[(a * m + b, c * m + d)] += psi[j].conj() * amp2 * psi[i];
                        }
                    }
                }
            }
        }
    }
    let norm = 1.0 / (n_particles as f64 * (n_particles as f64 - 1.0));
    Ok(gamma.scale(C64::new(norm, 0.0)))
}
