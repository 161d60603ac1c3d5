//! Occupation-number bases: the fixed-N sector and the particle-number
//! truncated Fock space, both lexicographically ordered.

use crate::error::{MflabError, Result};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    /// Exactly N particles.
    FixedN(usize),
    /// All occupations with total <= n_max.
    Truncated(usize),
}

#[derive(Clone, Debug)]
pub struct OccupationBasis {
    pub m: usize,
    pub sector: Sector,
    occs: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

fn enumerate_fixed(m: usize, total: usize, out: &mut Vec<Vec<u32>>, prefix: &mut Vec<u32>) {
    if m == 1 {
        prefix.push(total as u32);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for n in 0..=total {
        prefix.push(n as u32);
        enumerate_fixed(m - 1, total - n, out, prefix);
        prefix.pop();
    }
}

impl OccupationBasis {
    pub fn new(m: usize, sector: Sector) -> Result<Self> {
        if m == 0 {
            return Err(MflabError::Basis("need at least one mode".into()));
        }
        let mut occs = Vec::new();
        let mut prefix = Vec::with_capacity(m);
        match sector {
            Sector::FixedN(n) => {
                enumerate_fixed(m, n, &mut occs, &mut prefix);
                occs.sort();
                debug_assert_eq!(occs.len(), binomial(n + m - 1, m - 1));
            }
            Sector::Truncated(n_max) => {
                for n in 0..=n_max {
                    enumerate_fixed(m, n, &mut occs, &mut prefix);
                }
                occs.sort();
            }
        }
        let index = occs.iter().cloned().enumerate().map(|(i, o)| (o, i)).collect();
        Ok(OccupationBasis { m, sector, occs, index })
    }

    pub fn dim(&self) -> usize {
        self.occs.len()
    }

    pub fn occ(&self, i: usize) -> &[u32] {
        &self.occs[i]
    }

    pub fn total(&self, i: usize) -> u32 {
        self.occs[i].iter().sum()
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn n_max(&self) -> usize {
        match self.sector {
            Sector::FixedN(n) => n,
            Sector::Truncated(n) => n,
        }
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self.sector, Sector::Truncated(_))
    }

    /// Index of the vacuum (all zeros); only present on truncated bases or
    /// the N = 0 sector.
    pub fn vacuum_index(&self) -> Option<usize> {
        self.index_of(&vec![0u32; self.m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_sector_dimension_and_roundtrip() {
        for (m, n) in [(2usize, 5usize), (3, 4), (4, 3)] {
            let b = OccupationBasis::new(m, Sector::FixedN(n)).unwrap();
            assert_eq!(b.dim(), binomial(n + m - 1, m - 1));
            for i in 0..b.dim() {
                assert_eq!(b.total(i) as usize, n);
                assert_eq!(b.index_of(b.occ(i)), Some(i));
            }
            // lexicographic order
            for i in 1..b.dim() {
                assert!(b.occ(i - 1) < b.occ(i));
            }
        }
    }

    #[test]
    fn truncated_dimension() {
        // sum_{n=0}^{n_max} C(n+m-1, m-1) = C(n_max+m, m)
        for (m, n_max) in [(2usize, 6usize), (3, 5)] {
            let b = OccupationBasis::new(m, Sector::Truncated(n_max)).unwrap();
            assert_eq!(b.dim(), binomial(n_max + m, m));
            assert_eq!(b.vacuum_index(), Some(0));
        }
    }

    #[test]
    fn two_mode_sector_is_n_plus_one() {
        let b = OccupationBasis::new(2, Sector::FixedN(1024)).unwrap();
        assert_eq!(b.dim(), 1025);
    }
}
