//! Emission observables, burst criteria and scaling fits.

use serde::{Deserialize, Serialize};

use crate::couplings::CouplingMatrices;
use crate::cumulant::{CumulantState, Order};
use crate::error::{Error, Result};
use crate::lattice::ExcitationPattern;

/// Populations below this are treated as fully decayed when forming γ_inst.
pub const P_EXC_FLOOR: f64 = 1e-12;

/// Sampled emission curves.
///
/// `n_sites` is the emitter count used to normalize peaks (the lattice size,
/// which can exceed the number of simulated emitters when holes are present).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub n_sites: usize,
    pub t: Vec<f64>,
    pub p_exc: Vec<f64>,
    pub gamma_tot: Vec<f64>,
    /// `γ_tot / p_exc`; NaN where `p_exc ≤ P_EXC_FLOOR`.
    pub gamma_inst: Vec<f64>,
    pub p_exc_stderr: Option<Vec<f64>>,
    pub gamma_tot_stderr: Option<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(n_sites: usize, t: Vec<f64>, p_exc: Vec<f64>, gamma_tot: Vec<f64>) -> Result<Self> {
        if t.len() != p_exc.len() || t.len() != gamma_tot.len() {
            return Err(Error::invalid("time series columns differ in length"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time series times must be strictly increasing"));
        }
        let gamma_inst = instantaneous_rate(&p_exc, &gamma_tot);
        Ok(Self { n_sites, t, p_exc, gamma_tot, gamma_inst, p_exc_stderr: None, gamma_tot_stderr: None })
    }

    pub fn with_stderr(mut self, p_exc: Vec<f64>, gamma_tot: Vec<f64>) -> Result<Self> {
        if p_exc.len() != self.len() || gamma_tot.len() != self.len() {
            return Err(Error::invalid("standard-error columns differ in length"));
        }
        self.p_exc_stderr = Some(p_exc);
        self.gamma_tot_stderr = Some(gamma_tot);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

pub fn instantaneous_rate(p_exc: &[f64], gamma_tot: &[f64]) -> Vec<f64> {
    p_exc
        .iter()
        .zip(gamma_tot)
        .map(|(&p, &g)| if p > P_EXC_FLOOR { g / p } else { f64::NAN })
        .collect()
}

/// `γ_tot = Σᵢ⟨σᵢᵉᵉ⟩ + Σ_{i≠j} Γᵢⱼ⟨σᵢᵉᵍσⱼᵍᵉ⟩`.
pub fn gamma_tot(state: &CumulantState, couplings: &CouplingMatrices) -> f64 {
    let n = state.n();
    let mut g = state.p_exc() * couplings.gamma0();
    if state.order() >= Order::Second {
        for i in 0..n {
            for j in i + 1..n {
                // c_ji = conj(c_ij), so the pair sum is twice the real part
                g += 2.0 * couplings.gamma(i, j) * state.coh(i, j).re;
            }
        }
    }
    g
}

/// Initial slope of the emission rate for an incoherent state with the given
/// site occupations in {0, 1}.
pub fn gamma_dot0_occupations(occ: &[f64], c: &CouplingMatrices) -> f64 {
    let n = c.n();
    let g0 = c.gamma0();
    let mut v = -g0 * g0 * occ.iter().sum::<f64>();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let gg = c.gamma(i, j) * c.gamma(j, i);
                v += gg * (2.0 * occ[i] * occ[j] - 0.5 * (occ[i] + occ[j]));
            }
        }
    }
    v
}

pub fn gamma_dot0(pattern: &ExcitationPattern, c: &CouplingMatrices) -> Result<f64> {
    if pattern.n_sites() != c.n() {
        return Err(Error::invalid(format!(
            "pattern covers {} sites but couplings cover {}",
            pattern.n_sites(),
            c.n()
        )));
    }
    Ok(gamma_dot0_occupations(&pattern.occupations(), c))
}

fn check_count(what: &str, k: usize, n: usize) -> Result<()> {
    if k > n {
        return Err(Error::invalid(format!("{what} = {k} exceeds the {n} available sites")));
    }
    Ok(())
}

/// Mean initial slope over all `C(N, n_exc)` excitation patterns.
pub fn avg_gamma_dot0_partial(n_sites: usize, n_exc: usize, c: &CouplingMatrices) -> Result<f64> {
    check_count("n_exc", n_exc, n_sites)?;
    size_matches(n_sites, c)?;
    let g0 = c.gamma0();
    let (n, nde) = (n_sites as f64, (n_sites - n_exc) as f64);
    let mix = if n_sites < 2 { 0.0 } else { 1.0 - 3.0 * nde / n + 2.0 * nde * (nde - 1.0) / (n * (n - 1.0)) };
    Ok(-(n_exc as f64) * g0 * g0 + mix * c.gamma_pair_sum())
}

/// Mean initial slope over all hole patterns with `n_filled` emitters, each
/// fully inverted.
pub fn avg_gamma_dot0_holes(n_sites: usize, n_filled: usize, c: &CouplingMatrices) -> Result<f64> {
    check_count("n_filled", n_filled, n_sites)?;
    size_matches(n_sites, c)?;
    let g0 = c.gamma0();
    let (n, nh) = (n_sites as f64, (n_sites - n_filled) as f64);
    let mix = if n_sites < 2 { 0.0 } else { 1.0 - 2.0 * nh / n + nh * (nh - 1.0) / (n * (n - 1.0)) };
    Ok(-(n_filled as f64) * g0 * g0 + mix * c.gamma_pair_sum())
}

fn size_matches(n_sites: usize, c: &CouplingMatrices) -> Result<()> {
    if n_sites != c.n() {
        return Err(Error::invalid(format!("n_sites = {n_sites} but couplings cover {} sites", c.n())));
    }
    Ok(())
}

fn normalized_pair_sum(c: &CouplingMatrices) -> Result<f64> {
    if c.n() < 2 {
        return Err(Error::invalid("critical fractions need at least two emitters"));
    }
    Ok(c.gamma_pair_sum() / (c.gamma0() * c.gamma0()))
}

/// Excitation fraction above which the averaged initial slope is positive.
/// `+∞` when the emitters do not couple at all.
pub fn critical_excitation_fraction(c: &CouplingMatrices) -> Result<f64> {
    let s = normalized_pair_sum(c)?;
    let n = c.n() as f64;
    if s <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(0.5 + 0.5 / n + (n - 1.0) / (2.0 * s))
}

/// Filling fraction above which the averaged initial slope is positive.
pub fn critical_filling_fraction(c: &CouplingMatrices) -> Result<f64> {
    let s = normalized_pair_sum(c)?;
    let n = c.n() as f64;
    if s <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / n + (n - 1.0) / s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// max γ_tot / (N Γ₀)
    pub value: f64,
    pub time: f64,
    pub is_burst: bool,
}

/// Global maximum of γ_tot/N. A burst needs the maximum at t > 0 and strictly
/// above the t = 0 value.
pub fn detect_peak(series: &TimeSeries) -> Result<Peak> {
    detect_peak_with_margin(series, 0.0)
}

/// As [`detect_peak`], but for averaged series the peak must exceed the
/// initial value by `margin` combined standard errors.
pub fn detect_peak_with_margin(series: &TimeSeries, margin: f64) -> Result<Peak> {
    if series.is_empty() {
        return Err(Error::invalid("cannot locate a peak in an empty series"));
    }
    let mut best = 0;
    for (idx, &g) in series.gamma_tot.iter().enumerate() {
        if g > series.gamma_tot[best] {
            best = idx;
        }
    }
    let n = series.n_sites.max(1) as f64;
    let (g_peak, g_init) = (series.gamma_tot[best], series.gamma_tot[0]);
    let noise = match &series.gamma_tot_stderr {
        Some(se) if margin > 0.0 => margin * (se[best].powi(2) + se[0].powi(2)).sqrt(),
        _ => 0.0,
    };
    Ok(Peak {
        value: g_peak / n,
        time: series.t[best],
        is_burst: best > 0 && series.t[best] > 0.0 && g_peak - noise > g_init,
    })
}

/// Excitation left when γ_inst first falls below `threshold` after having
/// been at or above it, linearly interpolated between the straddling samples.
pub fn subradiant_population(series: &TimeSeries, threshold: f64) -> Result<f64> {
    let gi = &series.gamma_inst;
    let mut seen_above = false;
    for idx in 0..gi.len() {
        let g = gi[idx];
        if g.is_nan() {
            break;
        }
        if g >= threshold {
            seen_above = true;
            continue;
        }
        if seen_above && idx > 0 {
            let (g0, g1) = (gi[idx - 1], g);
            let w = (g0 - threshold) / (g0 - g1);
            return Ok(series.p_exc[idx - 1] + w * (series.p_exc[idx] - series.p_exc[idx - 1]));
        }
    }
    Err(Error::NotReached { t_max: series.t.last().copied().unwrap_or(0.0) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta: f64,
    pub prefactor: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
}

/// Least-squares fit of `peak = prefactor · N^beta` in log–log space.
pub fn fit_power_law(sizes: &[f64], peaks: &[f64]) -> Result<PowerLawFit> {
    if sizes.len() != peaks.len() {
        return Err(Error::invalid("sizes and peaks differ in length"));
    }
    if sizes.len() < 3 {
        return Err(Error::invalid("a power-law fit needs at least three points"));
    }
    if sizes.iter().chain(peaks).any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("power-law fit needs positive sizes and peaks"));
    }
    let x: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = peaks.iter().map(|v| v.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs at least two distinct sizes"));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let beta = sxy / sxx;
    let icpt = my - beta * mx;
    let ss: f64 = x.iter().zip(&y).map(|(a, b)| (b - icpt - beta * a).powi(2)).sum();
    Ok(PowerLawFit { beta, prefactor: icpt.exp(), residual: (ss / m).sqrt() })
}

/// Headline numbers of one emission curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurstReport {
    pub peak_value: f64,
    pub peak_time: f64,
    pub is_burst: bool,
    /// `None` when γ_inst never crosses the threshold within the run.
    pub p_sub: Option<f64>,
    pub gamma_dot0: f64,
}

pub const P_SUB_THRESHOLD: f64 = 0.1;

impl BurstReport {
    pub fn from_series(series: &TimeSeries, gamma_dot0: f64, margin: f64) -> Result<Self> {
        let peak = detect_peak_with_margin(series, margin)?;
        let p_sub = match subradiant_population(series, P_SUB_THRESHOLD) {
            Ok(v) => Some(v),
            Err(Error::NotReached { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { peak_value: peak.value, peak_time: peak.time, is_burst: peak.is_burst, p_sub, gamma_dot0 })
    }
}
