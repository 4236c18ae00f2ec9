//! Ensemble averaging and parameter sweeps driven by a [`RunConfig`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{InitialMode, MethodKind, RunConfig};
use crate::couplings::{coupling_matrices, CouplingMatrices};
use crate::cumulant::{self, init_state, Order, RhsSpec};
use crate::error::{Error, Result};
use crate::lattice::{self, ExcitationPattern, HolePattern, LatticeGeometry};
use crate::observables::{
    avg_gamma_dot0_holes, avg_gamma_dot0_partial, critical_excitation_fraction, critical_filling_fraction,
    fit_power_law, gamma_dot0_occupations, BurstReport, TimeSeries,
};
use crate::oracle::{lindblad_dense, mcwf_ensemble, OracleOptions};
use crate::output::{Provenance, SummaryRow};
use crate::rng::{derive_seed, stream, Purpose};

/// Noise margin (in standard errors) applied to burst detection on MCWF curves.
pub const MCWF_BURST_MARGIN: f64 = 2.0;

/// Analytic burst criteria, available without integrating.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriteriaValues {
    /// γ̇(0) of the fully inverted, ordered lattice.
    pub gamma_dot0_full: f64,
    /// γ̇(0) averaged over the configured initial-condition mode.
    pub gamma_dot0_mode: f64,
    /// Σ_{i≠j} Γᵢⱼ of the ordered lattice.
    pub gamma_pair_sum: f64,
    pub n_exc_crit: Option<f64>,
    pub eta_crit: Option<f64>,
}

pub fn criteria(config: &RunConfig) -> Result<CriteriaValues> {
    config.validate()?;
    let geom = lattice::build(config.geometry.kind, config.geometry.n, config.geometry.a)?;
    let c = coupling_matrices(&geom, config.dipole)?;
    criteria_from_couplings(config, &c)
}

fn criteria_from_couplings(config: &RunConfig, c: &CouplingMatrices) -> Result<CriteriaValues> {
    let n = c.n();
    let full = avg_gamma_dot0_partial(n, n, c)?;
    let mode = match config.initial.mode {
        InitialMode::Full => full,
        InitialMode::Partial => avg_gamma_dot0_partial(n, config.n_exc(), c)?,
        InitialMode::Filling => avg_gamma_dot0_holes(n, config.n_filled(), c)?,
    };
    let finite = |r: Result<f64>| r.ok().filter(|v| v.is_finite());
    Ok(CriteriaValues {
        gamma_dot0_full: full,
        gamma_dot0_mode: mode,
        gamma_pair_sum: c.gamma_pair_sum(),
        n_exc_crit: finite(critical_excitation_fraction(c)),
        eta_crit: finite(critical_filling_fraction(c)),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnsembleOptions {
    /// Abort on the first failing sample instead of running the rest.
    pub fail_fast: bool,
}

/// Everything fixed across the samples of one config.
struct Prepared<'a> {
    config: &'a RunConfig,
    geometry: LatticeGeometry,
    /// Couplings of the ordered lattice; reused when there is no disorder.
    couplings: Arc<CouplingMatrices>,
    grid: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(config: &'a RunConfig) -> Result<Self> {
        config.validate()?;
        let g = &config.geometry;
        let geometry = lattice::build(g.kind, g.n, g.a)?;
        let couplings = Arc::new(coupling_matrices(&geometry, config.dipole)?);
        if config.method.kind == MethodKind::Cumulant
            && config.method.order() == Order::Third
            && cumulant::order3_outside_validity(g.n, g.a)
        {
            log::warn!("order 3 is unreliable for N = {} at a = {}; prefer order 2 here", g.n, g.a);
        }
        if config.initial.mode == InitialMode::Filling && config.n_filled() == 0 {
            return Err(Error::invalid("filling fraction leaves no emitters on the lattice"));
        }
        let grid = config.integration.spec().grid()?;
        Ok(Self { config, geometry, couplings, grid })
    }

    /// Series, report and the lowest single-site population (cumulant runs only).
    fn sample(&self, index: usize) -> Result<(TimeSeries, BurstReport, Option<f64>)> {
        let cfg = self.config;
        let n = cfg.geometry.n;
        let idx = index as u64;
        let holes = match cfg.initial.mode {
            InitialMode::Filling => {
                lattice::sample_hole_pattern_with(n, cfg.n_filled(), &mut stream(cfg.seed, Purpose::Holes, idx))?
            }
            _ => HolePattern::none(n),
        };
        let pattern = match cfg.initial.mode {
            InitialMode::Full => ExcitationPattern::full(n),
            InitialMode::Partial => {
                lattice::sample_excitation_pattern_with(n, cfg.n_exc(), &mut stream(cfg.seed, Purpose::Excitation, idx))?
            }
            InitialMode::Filling => ExcitationPattern::new(n, holes.filled().to_vec())?,
        };
        let couplings = if cfg.disorder.sigma > 0.0 {
            let mut rng = stream(cfg.seed, Purpose::Disorder, idx);
            let moved = lattice::displace(&self.geometry, cfg.disorder.sigma, &mut rng)?;
            coupling_matrices(&moved.subset(holes.filled())?, cfg.dipole)?
        } else if holes.n_holes() > 0 {
            self.couplings.restrict(holes.filled())?
        } else {
            (*self.couplings).clone()
        };
        let occ: Vec<f64> = holes.filled().iter().map(|&i| if pattern.is_excited(i) { 1.0 } else { 0.0 }).collect();
        let gd0 = gamma_dot0_occupations(&occ, &couplings);

        let mut margin = 0.0;
        let mut min_pop = None;
        let mut series = match cfg.method.kind {
            MethodKind::Cumulant => {
                let state = init_state(&pattern, &holes, cfg.method.order())?;
                let spec = RhsSpec::new(cfg.method.order(), Arc::new(couplings));
                let run = cumulant::integrate(&state, &spec, &cfg.integration.spec())?;
                min_pop = Some(run.min_population);
                run.series
            }
            MethodKind::Mcwf | MethodKind::Lindblad => {
                let sub = ExcitationPattern::from_occupied(&occ);
                let tol = cfg.integration.spec().tol;
                if cfg.method.kind == MethodKind::Mcwf {
                    margin = MCWF_BURST_MARGIN;
                    let opts = OracleOptions { tol, ..OracleOptions::mcwf() };
                    let seed = derive_seed(cfg.seed, idx);
                    mcwf_ensemble(&sub, &couplings, &self.grid, cfg.method.n_traj(), seed, opts)?.series
                } else {
                    let opts = OracleOptions { tol, ..OracleOptions::lindblad() };
                    lindblad_dense(&sub, &couplings, &self.grid, opts)?.series
                }
            }
        };
        series.n_sites = n;
        let report = BurstReport::from_series(&series, gd0, margin)?;
        Ok((series, report, min_pop))
    }

    fn margin(&self) -> f64 {
        if self.config.method.kind == MethodKind::Mcwf {
            MCWF_BURST_MARGIN
        } else {
            0.0
        }
    }
}

const NEGATIVE_POPULATION_TOL: f64 = -1e-8;

fn warn_negative(min_pops: &[Option<f64>], total: usize) {
    let bad: Vec<f64> = min_pops.iter().flatten().copied().filter(|&p| p < NEGATIVE_POPULATION_TOL).collect();
    if let Some(worst) = bad.iter().copied().reduce(f64::min) {
        log::warn!(
            "{} of {total} samples developed negative cumulant populations (min {worst:.3e}); late-time values are unphysical",
            bad.len()
        );
    }
}

/// One realization: pattern, holes and disorder are drawn from streams keyed by
/// `(seed, sample_index)`.
pub fn run_single(config: &RunConfig, sample_index: usize) -> Result<(TimeSeries, BurstReport)> {
    let prep = Prepared::new(config)?;
    let (series, report, min_pop) =
        prep.sample(sample_index).map_err(|e| Error::Sample { index: sample_index, source: Box::new(e) })?;
    warn_negative(&[min_pop], 1);
    Ok((series, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleResult {
    pub config: RunConfig,
    pub n_samples: usize,
    /// Pointwise mean; standard errors of the mean when more than one sample
    /// (or the single sample's own, for trajectory runs).
    pub mean: TimeSeries,
    pub samples: Vec<BurstReport>,
    /// Report computed on `mean`, with γ̇(0) averaged over samples.
    pub aggregate: BurstReport,
    pub criteria: CriteriaValues,
    #[serde(skip)]
    pub provenance: Provenance,
}

impl EnsembleResult {
    pub fn order_label(&self) -> String {
        match self.config.method.kind {
            MethodKind::Cumulant => self.config.method.order().as_u8().to_string(),
            MethodKind::Mcwf => "mcwf".into(),
            MethodKind::Lindblad => "lindblad".into(),
        }
    }

    pub fn summary_row(&self, beta: Option<f64>) -> SummaryRow {
        let c = &self.config;
        SummaryRow {
            n: c.geometry.n,
            a: c.geometry.a,
            mode: c.initial.mode.as_str().into(),
            param: c.mode_param(),
            order: self.order_label(),
            peak_value: self.aggregate.peak_value,
            peak_time: self.aggregate.peak_time,
            is_burst: self.aggregate.is_burst,
            p_sub: self.aggregate.p_sub,
            gamma_dot0: self.aggregate.gamma_dot0,
            n_exc_crit: self.criteria.n_exc_crit,
            eta_crit: self.criteria.eta_crit,
            beta,
        }
    }
}

fn average(runs: &[(TimeSeries, BurstReport, Option<f64>)]) -> Result<TimeSeries> {
    let first = &runs[0].0;
    let len = first.len();
    if runs.iter().any(|(s, ..)| s.len() != len) {
        return Err(Error::invalid("sample series differ in length"));
    }
    if runs.len() == 1 {
        return Ok(first.clone());
    }
    let m = runs.len() as f64;
    let mut out = Vec::with_capacity(4);
    for col in [|s: &TimeSeries| &s.p_exc, |s: &TimeSeries| &s.gamma_tot] as [fn(&TimeSeries) -> &Vec<f64>; 2] {
        let mut mean = vec![0.0; len];
        for (s, ..) in runs {
            for (acc, v) in mean.iter_mut().zip(col(s)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let mut var = vec![0.0; len];
        for (s, ..) in runs {
            for ((acc, v), mu) in var.iter_mut().zip(col(s)).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let se = var.into_iter().map(|v| (v / (m - 1.0) / m).sqrt()).collect();
        out.push(mean);
        out.push(se);
    }
    let (gse, g, pse, p) = (out.pop().unwrap(), out.pop().unwrap(), out.pop().unwrap(), out.pop().unwrap());
    TimeSeries::new(first.n_sites, first.t.clone(), p, g)?.with_stderr(pse, gse)
}

/// Run every sample (in parallel) and reduce in index order, so the result
/// does not depend on scheduling or worker count.
pub fn run_ensemble(config: &RunConfig, opts: EnsembleOptions) -> Result<EnsembleResult> {
    let prep = Prepared::new(config)?;
    let n = config.n_samples();
    if n == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let annotate = |k: usize| move |e| Error::Sample { index: k, source: Box::new(e) };
    let runs: Vec<(TimeSeries, BurstReport, Option<f64>)> = if opts.fail_fast {
        (0..n).into_par_iter().map(|k| prep.sample(k).map_err(annotate(k))).collect::<Result<_>>()?
    } else {
        let all: Vec<Result<_>> = (0..n).into_par_iter().map(|k| prep.sample(k)).collect();
        let failed: Vec<usize> = all.iter().enumerate().filter(|(_, r)| r.is_err()).map(|(k, _)| k).collect();
        if !failed.is_empty() {
            let k = failed[0];
            let first = all.into_iter().nth(k).unwrap().unwrap_err();
            return Err(Error::PartialResult { total: n, failed, first: Box::new(annotate(k)(first)) });
        }
        all.into_iter().map(|r| r.unwrap()).collect()
    };
    warn_negative(&runs.iter().map(|r| r.2).collect::<Vec<_>>(), n);
    let mean = average(&runs)?;
    let gd0 = runs.iter().map(|(_, r, _)| r.gamma_dot0).sum::<f64>() / n as f64;
    let aggregate = BurstReport::from_series(&mean, gd0, prep.margin())?;
    let criteria = criteria_from_couplings(config, &prep.couplings)?;
    Ok(EnsembleResult {
        config: config.clone(),
        n_samples: n,
        mean,
        samples: runs.into_iter().map(|(_, r, _)| r).collect(),
        aggregate,
        criteria,
        provenance: Provenance::new(config, n),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum AxisName {
    N,
    A,
    NExc,
    Eta,
    Sigma,
    Order,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::N => "N",
            AxisName::A => "a",
            AxisName::NExc => "n_exc",
            AxisName::Eta => "eta",
            AxisName::Sigma => "sigma",
            AxisName::Order => "order",
        }
    }
}

impl FromStr for AxisName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "N" | "n" => AxisName::N,
            "a" => AxisName::A,
            "n_exc" => AxisName::NExc,
            "eta" => AxisName::Eta,
            "sigma" => AxisName::Sigma,
            "order" => AxisName::Order,
            _ => return Err(Error::invalid(format!("unknown sweep axis '{s}' (expected N, a, n_exc, eta, sigma, order)"))),
        })
    }
}

impl fmt::Display for AxisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepAxis {
    pub name: AxisName,
    pub values: Vec<f64>,
}

/// Parses `name=v1,v2,...` or `name=start:stop:step` (stop inclusive).
impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once('=').ok_or_else(|| Error::invalid(format!("axis '{s}' is not of the form name=values")))?;
        let name: AxisName = name.trim().parse()?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{t}' in axis {name}")));
        let values = if rest.contains(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::invalid(format!("range for axis {name} must be start:stop:step")));
            }
            let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || hi < lo {
                return Err(Error::invalid(format!("empty or invalid range for axis {name}")));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|k| lo + k as f64 * step).collect()
        } else {
            rest.split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        if values.is_empty() {
            return Err(Error::invalid(format!("axis {name} has no values")));
        }
        Ok(SweepAxis { name, values })
    }
}

fn as_count(name: AxisName, v: f64) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::invalid(format!("axis {name} needs non-negative integers, got {v}")));
    }
    Ok(v as usize)
}

/// Apply one grid coordinate to a copy of the base config.
pub fn apply_axis(config: &mut RunConfig, name: AxisName, v: f64) -> Result<()> {
    match name {
        AxisName::N => config.geometry.n = as_count(name, v)?,
        AxisName::A => config.geometry.a = v,
        AxisName::NExc => {
            config.initial.mode = InitialMode::Partial;
            config.initial.eta = None;
            config.initial.n_exc = Some(as_count(name, v)?);
        }
        AxisName::Eta => {
            config.initial.mode = InitialMode::Filling;
            config.initial.n_exc = None;
            config.initial.eta = Some(v);
        }
        AxisName::Sigma => config.disorder.sigma = v,
        AxisName::Order => {
            let k = as_count(name, v)?;
            let order = u8::try_from(k).ok().and_then(|k| Order::try_from(k).ok());
            config.method.order = Some(order.ok_or_else(|| Error::invalid(format!("cumulant order {k} is not supported (1–3)")))?);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub coords: Vec<f64>,
    pub result: EnsembleResult,
    /// Power-law exponent of peak vs N over the points sharing the other coordinates.
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.points.iter().map(|p| p.result.summary_row(p.beta)).collect()
    }
}

fn coords_label(axes: &[SweepAxis], coords: &[f64]) -> String {
    axes.iter().zip(coords).map(|(a, v)| format!("{}={v}", a.name)).collect::<Vec<_>>().join(",")
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn grid_points(axes: &[SweepAxis]) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for ax in axes {
        pts = pts.into_iter().flat_map(|p| ax.values.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
    }
    pts
}

pub fn run_sweep(config: &RunConfig, axes: &[SweepAxis], opts: EnsembleOptions) -> Result<SweepResult> {
    for (i, a) in axes.iter().enumerate() {
        if a.values.is_empty() {
            return Err(Error::invalid(format!("axis {} has no values", a.name)));
        }
        if axes[..i].iter().any(|b| b.name == a.name) {
            return Err(Error::invalid(format!("axis {} given twice", a.name)));
        }
    }
    let coords = grid_points(axes);
    let configs: Vec<RunConfig> = coords
        .iter()
        .map(|p| {
            let mut c = config.clone();
            for (ax, &v) in axes.iter().zip(p) {
                apply_axis(&mut c, ax.name, v)?;
            }
            Ok(c)
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| Error::invalid(format!("sweep grid: {e}")))?;
    let results: Vec<EnsembleResult> = configs
        .par_iter()
        .zip(&coords)
        .map(|(c, p)| {
            run_ensemble(c, opts).map_err(|e| Error::SweepPoint { coords: coords_label(axes, p), source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let mut beta = vec![None; coords.len()];
    if let Some(ni) = axes.iter().position(|a| a.name == AxisName::N) {
        for i in 0..coords.len() {
            if beta[i].is_some() {
                continue;
            }
            let group: Vec<usize> = (0..coords.len())
                .filter(|&j| coords[j].iter().enumerate().all(|(d, v)| d == ni || *v == coords[i][d]))
                .collect();
            let sizes: Vec<f64> = group.iter().map(|&j| coords[j][ni]).collect();
            let peaks: Vec<f64> = group.iter().map(|&j| results[j].aggregate.peak_value).collect();
            if let Ok(fit) = fit_power_law(&sizes, &peaks) {
                for &j in &group {
                    beta[j] = Some(fit.beta);
                }
            }
        }
    }
    let points = coords
        .into_iter()
        .zip(results)
        .zip(beta)
        .map(|((coords, result), beta)| SweepPoint { coords, result, beta })
        .collect();
    Ok(SweepResult { axes: axes.to_vec(), points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Dimension;

    fn quick(kind: Dimension, n: usize, a: f64) -> RunConfig {
        let mut c = RunConfig::minimal(kind, n, a);
        c.integration.t_max = 2.0;
        c.integration.sample_dt = 0.02;
        c
    }

    #[test]
    fn deterministic_config_ignores_sample_index() {
        let c = quick(Dimension::Chain, 6, 0.2);
        let (s0, r0) = run_single(&c, 0).unwrap();
        let (s1, r1) = run_single(&c, 17).unwrap();
        assert_eq!(s0, s1);
        assert_eq!(r0, r1);
    }

    #[test]
    fn partial_samples_differ() {
        let mut c = quick(Dimension::Square, 36, 0.1);
        c.initial.mode = InitialMode::Partial;
        c.initial.n_exc = Some(30);
        c.integration.t_max = 1.0;
        let (_, r0) = run_single(&c, 0).unwrap();
        let (_, r1) = run_single(&c, 1).unwrap();
        assert_ne!(r0.peak_value, r1.peak_value);
    }

    #[test]
    fn lindblad_capacity_is_reported_with_index() {
        let mut c = quick(Dimension::Chain, 10, 0.1);
        c.method.kind = MethodKind::Lindblad;
        c.method.order = None;
        match run_single(&c, 3) {
            Err(Error::Sample { index: 3, source }) => assert!(matches!(*source, Error::Capacity { .. })),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn single_sample_ensemble_equals_run() {
        let c = quick(Dimension::Chain, 5, 0.15);
        let e = run_ensemble(&c, EnsembleOptions::default()).unwrap();
        let (s, r) = run_single(&c, 0).unwrap();
        assert_eq!(e.n_samples, 1);
        assert_eq!(e.mean, s);
        assert_eq!(e.aggregate, r);
        assert!(e.mean.p_exc_stderr.is_none());
    }

    #[test]
    fn mean_is_pointwise_and_gamma_inst_is_ratio_of_means() {
        let mut c = quick(Dimension::Chain, 8, 0.2);
        c.initial.mode = InitialMode::Partial;
        c.initial.n_exc = Some(4);
        c.disorder.n_samples = Some(5);
        let e = run_ensemble(&c, EnsembleOptions::default()).unwrap();
        let runs: Vec<_> = (0..5).map(|k| run_single(&c, k).unwrap().0).collect();
        for t in 0..e.mean.len() {
            let p = runs.iter().map(|s| s.p_exc[t]).sum::<f64>() / 5.0;
            let g = runs.iter().map(|s| s.gamma_tot[t]).sum::<f64>() / 5.0;
            assert!((e.mean.p_exc[t] - p).abs() < 1e-15);
            assert!((e.mean.gamma_inst[t] - g / p).abs() < 1e-12);
        }
        assert_eq!(e.samples.len(), 5);
        assert!(e.mean.p_exc_stderr.as_ref().unwrap()[10] > 0.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut c = quick(Dimension::Square, 9, 0.3);
        c.disorder.sigma = 0.05;
        c.disorder.n_samples = Some(6);
        let run = |k| {
            rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap().install(|| {
                let e = run_ensemble(&c, EnsembleOptions::default()).unwrap();
                (e.mean, e.samples)
            })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn failures_list_indices() {
        let mut c = quick(Dimension::Chain, 4, 0.1);
        c.method.kind = MethodKind::Lindblad;
        c.method.order = None;
        c.geometry.n = 8;
        c.disorder.sigma = 0.01;
        c.disorder.n_samples = Some(3);
        match run_ensemble(&c, EnsembleOptions::default()) {
            Err(Error::PartialResult { total: 3, failed, .. }) => assert_eq!(failed, vec![0, 1, 2]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(run_ensemble(&c, EnsembleOptions { fail_fast: true }), Err(Error::Sample { .. })));
    }

    #[test]
    fn holes_are_removed_and_peak_uses_lattice_size() {
        let mut c = quick(Dimension::Chain, 10, 0.2);
        c.initial.mode = InitialMode::Filling;
        c.initial.eta = Some(0.5);
        let (s, _) = run_single(&c, 2).unwrap();
        assert_eq!(s.n_sites, 10);
        assert!((s.p_exc[0] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn axis_parsing() {
        let a: SweepAxis = "N=8,16,32".parse().unwrap();
        assert_eq!((a.name, a.values), (AxisName::N, vec![8.0, 16.0, 32.0]));
        let a: SweepAxis = "a=0.1:0.5:0.1".parse().unwrap();
        assert_eq!(a.values.len(), 5);
        assert!("x=1".parse::<SweepAxis>().is_err());
        assert!("a=1:0:1".parse::<SweepAxis>().is_err());
        assert_eq!(grid_points(&["N=1,2".parse().unwrap(), "a=3,4".parse().unwrap()]), vec![
            vec![1.0, 3.0],
            vec![1.0, 4.0],
            vec![2.0, 3.0],
            vec![2.0, 4.0]
        ]);
    }

    #[test]
    fn one_point_sweep_matches_ensemble() {
        let c = quick(Dimension::Chain, 6, 0.3);
        let axes: Vec<SweepAxis> = vec!["a=0.3".parse().unwrap()];
        let s = run_sweep(&c, &axes, EnsembleOptions::default()).unwrap();
        let e = run_ensemble(&c, EnsembleOptions::default()).unwrap();
        assert_eq!(s.points.len(), 1);
        assert_eq!(s.points[0].result.mean, e.mean);
        assert_eq!(s.summary_rows(), vec![e.summary_row(None)]);
    }

    #[test]
    fn sweep_fits_beta_per_group() {
        let mut c = quick(Dimension::Square, 4, 0.1);
        c.integration.t_max = 1.0;
        let axes: Vec<SweepAxis> = vec!["a=0.1,0.2".parse().unwrap(), "N=4,9,16".parse().unwrap()];
        let s = run_sweep(&c, &axes, EnsembleOptions::default()).unwrap();
        assert_eq!(s.points.len(), 6);
        let b: Vec<f64> = s.points.iter().map(|p| p.beta.unwrap()).collect();
        assert_eq!(b[0], b[2]);
        assert_ne!(b[0], b[3]);
        assert!(b[0] > b[3]);
    }

    #[test]
    fn criteria_without_integration() {
        let c = RunConfig::minimal(Dimension::Square, 36, 0.1);
        let v = criteria(&c).unwrap();
        let (ne, eta) = (v.n_exc_crit.unwrap(), v.eta_crit.unwrap());
        assert!((ne - (0.5 + eta / 2.0)).abs() < 1e-12);
        assert!((v.gamma_dot0_full - (-36.0 + v.gamma_pair_sum)).abs() < 1e-9);
    }
}
