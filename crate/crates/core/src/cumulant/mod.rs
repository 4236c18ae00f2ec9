//! Cumulant-expansion dynamics at orders 1–3.

mod layout;
mod rhs;
mod state;
#[cfg(test)]
mod symbolic;

pub use layout::{Layout, Order};
pub use rhs::{rhs, CumulantRhs, RhsSpec};
pub use state::{init_state, product_state, CumulantState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{gamma_tot, TimeSeries};
use crate::ode::{integrate_sampled, sample_grid, Tolerances};

/// Time window and accuracy of one integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub t_max: f64,
    pub sample_dt: f64,
    pub tol: Tolerances,
}

impl Default for IntegrationSpec {
    fn default() -> Self {
        Self { t_max: 10.0, sample_dt: 1e-2, tol: Tolerances::default() }
    }
}

impl IntegrationSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        sample_grid(self.t_max, self.sample_dt)
    }
}

#[derive(Clone, Debug)]
pub struct CumulantRun {
    pub series: TimeSeries,
    pub final_state: CumulantState,
    /// Smallest single-site population seen on the sample grid. Values below
    /// zero are a known failure mode of truncated expansions and are reported,
    /// not corrected.
    pub min_population: f64,
}

/// Order 3 is known to misbehave for large, dense arrays.
pub fn order3_outside_validity(n: usize, spacing: f64) -> bool {
    n > 100 && spacing < 0.1
}

/// Integrate from `state0` and sample p_exc and γ_tot on the uniform grid.
pub fn integrate(state0: &CumulantState, spec: &RhsSpec, integ: &IntegrationSpec) -> Result<CumulantRun> {
    let mut sys = CumulantRhs::new(spec)?;
    sys.check(state0)?;
    let times = integ.grid()?;
    let n = state0.n();
    let layout = state0.layout().clone();
    let mut p = vec![0.0; times.len()];
    let mut g = vec![0.0; times.len()];
    let mut min_pop = f64::INFINITY;
    let mut snap = state0.clone();
    let y_end = integrate_sampled(&mut sys, state0.data(), &times, integ.tol, |idx, _t, y| {
        snap.data_mut().copy_from_slice(y);
        p[idx] = snap.p_exc();
        g[idx] = gamma_tot(&snap, &spec.couplings);
        min_pop = y[..n].iter().copied().fold(min_pop, f64::min);
    })?;
    let t_end = *times.last().unwrap();
    if min_pop < -1e-8 {
        log::debug!("cumulant populations went negative (min {min_pop:.3e}); results past that point are unphysical");
    }
    let final_state = CumulantState::from_data(layout, y_end, t_end)?;
    if !final_state.is_finite() {
        return Err(Error::NumericalBlowup { t: t_end });
    }
    let series = TimeSeries::new(n, times, p, g)?;
    Ok(CumulantRun { series, final_state, min_population: min_pop })
}
