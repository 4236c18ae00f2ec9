//! Computational basis with bit `i` of a mask set when emitter `i` is excited.

use num_complex::Complex64;

use crate::couplings::CouplingMatrices;

/// All masks with a fixed number of excitations, plus the sparse
/// off-diagonal part of the effective Hamiltonian restricted to them.
///
/// Row `r` lists `(c, h)` with `⟨masks[r]| H_eff |masks[c]⟩ = h`; the diagonal
/// is the constant `−i·m/2`.
#[derive(Clone, Debug)]
pub struct Sector {
    pub m: usize,
    pub masks: Vec<u32>,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<Complex64>,
}

/// Masks of popcount `m` in increasing order.
pub fn masks_with(n: usize, m: usize) -> Vec<u32> {
    (0u32..1 << n).filter(|x| x.count_ones() as usize == m).collect()
}

impl Sector {
    /// `index[mask]` must give the position of `mask` within its own sector.
    pub fn new(c: &CouplingMatrices, m: usize, index: &[u32]) -> Self {
        let n = c.n();
        let masks = masks_with(n, m);
        let mut row_ptr = Vec::with_capacity(masks.len() + 1);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        row_ptr.push(0);
        for &target in &masks {
            // ⟨target| σₐ⁺σᵦ⁻ |source⟩ ≠ 0 for a ∈ target, b ∉ target, source = target − a + b
            for a in 0..n {
                if target >> a & 1 == 0 {
                    continue;
                }
                for b in 0..n {
                    if b == a || target >> b & 1 == 1 {
                        continue;
                    }
                    let source = (target & !(1 << a)) | (1 << b);
                    cols.push(index[source as usize]);
                    vals.push(Complex64::new(c.j(a, b), -0.5 * c.gamma(a, b)));
                }
            }
            row_ptr.push(cols.len());
        }
        Self { m, masks, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    /// `out = H_eff · psi`.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let diag = Complex64::new(0.0, -0.5 * self.m as f64);
        for r in 0..self.dim() {
            let mut acc = diag * psi[r];
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[e] * psi[self.cols[e] as usize];
            }
            out[r] = acc;
        }
    }
}

/// Position of every mask inside the sector with the same popcount.
pub fn sector_index(n: usize) -> Vec<u32> {
    let mut next = vec![0u32; n + 1];
    (0u32..1 << n)
        .map(|x| {
            let m = x.count_ones() as usize;
            let i = next[m];
            next[m] += 1;
            i
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_sizes_and_index() {
        let idx = sector_index(5);
        for m in 0..=5 {
            let s = masks_with(5, m);
            for (i, &x) in s.iter().enumerate() {
                assert_eq!(idx[x as usize] as usize, i);
            }
        }
        assert_eq!(masks_with(5, 2).len(), 10);
    }

    #[test]
    fn dicke_pair_hamiltonian() {
        let c = CouplingMatrices::dicke(2);
        let idx = sector_index(2);
        let s = Sector::new(&c, 1, &idx);
        // symmetric state decays at 2Γ₀, antisymmetric is dark
        let r = 0.5f64.sqrt();
        let mut out = vec![Complex64::new(0.0, 0.0); 2];
        s.apply(&[Complex64::new(r, 0.0), Complex64::new(r, 0.0)], &mut out);
        assert!((out[0] - Complex64::new(0.0, -r)).norm() < 1e-15);
        s.apply(&[Complex64::new(r, 0.0), Complex64::new(-r, 0.0)], &mut out);
        assert!(out[0].norm() < 1e-15 && out[1].norm() < 1e-15);
    }
}
