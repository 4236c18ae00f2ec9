use nalgebra::{DMatrix, SymmetricEigen};

use crate::couplings::CouplingMatrices;
use crate::error::{Error, Result};

/// Eigenrates below this (in Γ₀) are clipped to zero; anything lower is an error.
pub const NEGATIVE_RATE_LIMIT: f64 = -1e-6;

/// Collective decay channels `c_k = √λ_k Σᵢ v[k][i] σᵢ⁻` diagonalizing Γ.
#[derive(Clone, Debug)]
pub struct JumpOperatorSet {
    pub eigenrates: Vec<f64>,
    /// `modes[k]` is the unit vector `v[k]`.
    pub modes: Vec<Vec<f64>>,
}

impl JumpOperatorSet {
    pub fn n(&self) -> usize {
        self.eigenrates.len()
    }

    /// Largest entry of `|Σ_k λ_k v_k v_kᵀ − Γ|`.
    pub fn reconstruction_residual(&self, c: &CouplingMatrices) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let g: f64 = (0..n).map(|k| self.eigenrates[k] * self.modes[k][a] * self.modes[k][b]).sum();
                worst = worst.max((g - c.gamma(a, b)).abs());
            }
        }
        worst
    }
}

pub fn diagonalize_gamma(c: &CouplingMatrices) -> Result<JumpOperatorSet> {
    let n = c.n();
    let g = DMatrix::from_row_slice(n, n, c.gamma_matrix());
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigenrates = Vec::with_capacity(n);
    let mut modes = Vec::with_capacity(n);
    for k in order {
        let lam = eig.eigenvalues[k];
        if lam < NEGATIVE_RATE_LIMIT {
            return Err(Error::InvalidCouplings(format!("Γ has negative eigenvalue {lam:.3e}")));
        }
        eigenrates.push(lam.max(0.0));
        modes.push(eig.eigenvectors.column(k).iter().copied().collect());
    }
    Ok(JumpOperatorSet { eigenrates, modes })
}
