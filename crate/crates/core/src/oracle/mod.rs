//! Exact small-N dynamics used as benchmarks for the cumulant solvers.

mod basis;
mod jumps;
mod lindblad;
mod mcwf;

pub use jumps::{diagonalize_gamma, JumpOperatorSet};
pub use lindblad::lindblad_dense;
pub use mcwf::{mcwf_ensemble, mcwf_trajectory, McwfSystem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::TimeSeries;
use crate::ode::Tolerances;

pub const MCWF_CAP: usize = 14;
pub const LINDBLAD_CAP: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Largest emitter count accepted.
    pub cap: usize,
    pub tol: Tolerances,
}

impl OracleOptions {
    pub fn mcwf() -> Self {
        Self { cap: MCWF_CAP, tol: Tolerances { rtol: 1e-8, atol: 1e-10 } }
    }

    pub fn lindblad() -> Self {
        Self { cap: LINDBLAD_CAP, tol: Tolerances { rtol: 1e-8, atol: 1e-10 } }
    }
}

/// Oracle output: emission curves plus per-site populations `site_pop[t][i]`.
#[derive(Clone, Debug)]
pub struct ExactSeries {
    pub series: TimeSeries,
    pub site_pop: Vec<Vec<f64>>,
    /// Largest |Tr ρ − 1| on the grid (density-matrix runs only).
    pub trace_error: Option<f64>,
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(Error::invalid("oracle time grids must start at t = 0"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("oracle time grid must be strictly increasing"));
    }
    Ok(())
}
