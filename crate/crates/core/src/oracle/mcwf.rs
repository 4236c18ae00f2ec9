//! Quantum-trajectory unravelling in fixed-excitation sectors.
//!
//! An incoherent initial pattern is a single basis state, and every jump
//! removes exactly one excitation, so a trajectory only ever visits the
//! sectors `m = N_exc, N_exc − 1, …, 0`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::basis::{sector_index, Sector};
use super::jumps::{diagonalize_gamma, JumpOperatorSet};
use super::{check_grid, ExactSeries, OracleOptions};
use crate::couplings::CouplingMatrices;
use crate::error::{Error, Result};
use crate::lattice::ExcitationPattern;
use crate::observables::TimeSeries;
use crate::ode::{Dopri5, OdeSystem};
use crate::rng::{stream, Purpose};

/// Bisection stops once the jump time is bracketed this tightly.
const JUMP_TIME_RESOLUTION: f64 = 1e-8;
/// Trajectories per deterministic reduction block.
const BLOCK: usize = 64;

/// Everything a trajectory needs that does not depend on the random draws.
pub struct McwfSystem<'a> {
    couplings: &'a CouplingMatrices,
    jumps: JumpOperatorSet,
    index: Vec<u32>,
    sectors: Vec<Sector>,
    start: u32,
    opts: OracleOptions,
}

impl<'a> McwfSystem<'a> {
    pub fn new(pattern: &ExcitationPattern, couplings: &'a CouplingMatrices, opts: OracleOptions) -> Result<Self> {
        let n = couplings.n();
        if n > opts.cap {
            return Err(Error::Capacity { method: "mcwf", requested: n, cap: opts.cap });
        }
        if pattern.n_sites() != n {
            return Err(Error::invalid(format!("pattern covers {} sites, couplings {}", pattern.n_sites(), n)));
        }
        let jumps = diagonalize_gamma(couplings)?;
        let index = sector_index(n);
        let sectors = (0..=pattern.n_exc()).map(|m| Sector::new(couplings, m, &index)).collect();
        let start = pattern.excited().iter().fold(0u32, |acc, &i| acc | 1 << i);
        Ok(Self { couplings, jumps, index, sectors, start, opts })
    }

    fn n(&self) -> usize {
        self.couplings.n()
    }

    /// One trajectory sampled on `grid` (which must start at 0).
    pub fn trajectory(&self, grid: &[f64], rng: &mut ChaCha8Rng) -> Result<ExactSeries> {
        check_grid(grid)?;
        let n = self.n();
        let len = grid.len();
        let mut out = Recorder { p: vec![0.0; len], g: vec![0.0; len], pops: vec![vec![0.0; n]; len], next: 0 };
        let mut m = self.start.count_ones() as usize;
        let mut psi = vec![Complex64::new(0.0, 0.0); self.sectors[m].dim()];
        psi[self.index[self.start as usize] as usize] = Complex64::new(1.0, 0.0);
        let mut t = 0.0;
        let t_end = grid[len - 1];
        let mut scratch = Vec::new();

        while out.next < len {
            if m == 0 {
                // nothing left to emit; the remaining samples stay zero
                break;
            }
            let sector = &self.sectors[m];
            let threshold: f64 = rng.random();
            let mut flow = Flow { sector, a: vec![Complex64::new(0.0, 0.0); sector.dim()], b: vec![Complex64::new(0.0, 0.0); sector.dim()] };
            let y0 = to_real(&psi);
            let mut st = Dopri5::new(&mut flow, t, &y0, self.opts.tol);
            let mut buf = vec![0.0; y0.len()];
            let jumped = loop {
                st.step(&mut flow, t_end)?;
                if norm2(st.y()) > threshold {
                    out.emit_until(grid, st.t(), true, |tt, dst| {
                        if tt == st.t() {
                            dst.copy_from_slice(st.y());
                        } else {
                            st.dense(tt, dst);
                        }
                    }, &mut buf, self, m, &mut scratch);
                    if st.t() >= t_end {
                        break None;
                    }
                    continue;
                }
                // norm² is monotone between jumps: bisect for the crossing
                let (mut lo, mut hi) = (st.t_prev(), st.t());
                while hi - lo > JUMP_TIME_RESOLUTION {
                    let mid = 0.5 * (lo + hi);
                    st.dense(mid, &mut buf);
                    if norm2(&buf) > threshold {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let tj = 0.5 * (lo + hi);
                out.emit_until(grid, tj, false, |tt, dst| st.dense(tt, dst), &mut buf, self, m, &mut scratch);
                st.dense(tj, &mut buf);
                break Some((tj, from_real(&buf)));
            };
            match jumped {
                None => break,
                Some((tj, pre)) => {
                    psi = self.jump(m, &pre, rng)?;
                    m -= 1;
                    t = tj;
                }
            }
        }
        let series = TimeSeries::new(n, grid.to_vec(), out.p, out.g)?;
        Ok(ExactSeries { series, site_pop: out.pops, trace_error: None })
    }

    /// Apply a randomly chosen collective lowering operator and renormalize.
    fn jump(&self, m: usize, psi: &[Complex64], rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
        let lower = &self.sectors[m - 1];
        let from = &self.sectors[m];
        let apply = |k: usize| {
            let v = &self.jumps.modes[k];
            let mut phi = vec![Complex64::new(0.0, 0.0); lower.dim()];
            for (r, &mask) in from.masks.iter().enumerate() {
                let a = psi[r];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (i, &vi) in v.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        phi[self.index[(mask ^ 1 << i) as usize] as usize] += vi * a;
                    }
                }
            }
            phi
        };
        let weights: Vec<f64> = (0..self.n())
            .map(|k| {
                let lam = self.jumps.eigenrates[k];
                if lam == 0.0 {
                    0.0
                } else {
                    lam * apply(k).iter().map(|z| z.norm_sqr()).sum::<f64>()
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NumericalBlowup { t: f64::NAN });
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = weights.len() - 1;
        for (k, &w) in weights.iter().enumerate() {
            if u < w {
                chosen = k;
                break;
            }
            u -= w;
        }
        while weights[chosen] == 0.0 {
            chosen -= 1;
        }
        let mut phi = apply(chosen);
        let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut phi {
            *z /= norm;
        }
        Ok(phi)
    }
}

struct Recorder {
    p: Vec<f64>,
    g: Vec<f64>,
    pops: Vec<Vec<f64>>,
    next: usize,
}

impl Recorder {
    /// Record every grid time up to `t_stop` (inclusive if `inclusive`).
    #[allow(clippy::too_many_arguments)]
    fn emit_until<F: FnMut(f64, &mut [f64])>(
        &mut self,
        grid: &[f64],
        t_stop: f64,
        inclusive: bool,
        mut state_at: F,
        buf: &mut [f64],
        sys: &McwfSystem,
        m: usize,
        scratch: &mut Vec<Complex64>,
    ) {
        while self.next < grid.len() && (grid[self.next] < t_stop || (inclusive && grid[self.next] == t_stop)) {
            state_at(grid[self.next], buf);
            let psi = from_real(buf);
            let sector = &sys.sectors[m];
            let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            scratch.resize(psi.len(), Complex64::new(0.0, 0.0));
            sector.apply(&psi, scratch);
            let expect: Complex64 = psi.iter().zip(scratch.iter()).map(|(a, b)| a.conj() * b).sum();
            let k = self.next;
            self.p[k] = m as f64;
            self.g[k] = -2.0 * expect.im / n2;
            for (r, &mask) in sector.masks.iter().enumerate() {
                let w = psi[r].norm_sqr() / n2;
                for i in 0..sys.n() {
                    if mask >> i & 1 == 1 {
                        self.pops[k][i] += w;
                    }
                }
            }
            self.next += 1;
        }
    }
}

/// `dψ/dt = −i H_eff ψ` on interleaved real/imaginary parts.
struct Flow<'s> {
    sector: &'s Sector,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl OdeSystem for Flow<'_> {
    fn dim(&self) -> usize {
        2 * self.sector.dim()
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
        for (z, p) in self.a.iter_mut().zip(y.chunks_exact(2)) {
            *z = Complex64::new(p[0], p[1]);
        }
        self.sector.apply(&self.a, &mut self.b);
        for (d, h) in dy.chunks_exact_mut(2).zip(&self.b) {
            // −i·h
            d[0] = h.im;
            d[1] = -h.re;
        }
    }
}

fn to_real(psi: &[Complex64]) -> Vec<f64> {
    psi.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn from_real(y: &[f64]) -> Vec<Complex64> {
    y.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

fn norm2(y: &[f64]) -> f64 {
    y.iter().map(|x| x * x).sum()
}

/// Single trajectory driven by stream 0 of `seed`.
pub fn mcwf_trajectory(
    pattern: &ExcitationPattern,
    couplings: &CouplingMatrices,
    grid: &[f64],
    seed: u64,
    opts: OracleOptions,
) -> Result<ExactSeries> {
    let sys = McwfSystem::new(pattern, couplings, opts)?;
    sys.trajectory(grid, &mut stream(seed, Purpose::Trajectories, 0))
}

/// Mean over `n_traj` trajectories with standard errors of the mean.
/// Trajectory `k` always uses stream `k` of `seed`.
pub fn mcwf_ensemble(
    pattern: &ExcitationPattern,
    couplings: &CouplingMatrices,
    grid: &[f64],
    n_traj: usize,
    seed: u64,
    opts: OracleOptions,
) -> Result<ExactSeries> {
    if n_traj == 0 {
        return Err(Error::invalid("n_traj must be at least 1"));
    }
    check_grid(grid)?;
    let sys = McwfSystem::new(pattern, couplings, opts)?;
    let (len, n) = (grid.len(), couplings.n());
    let mut sp = vec![0.0; len];
    let mut sp2 = vec![0.0; len];
    let mut sg = vec![0.0; len];
    let mut sg2 = vec![0.0; len];
    let mut pops = vec![vec![0.0; n]; len];
    let ids: Vec<usize> = (0..n_traj).collect();
    for block in ids.chunks(BLOCK) {
        let runs: Vec<Result<ExactSeries>> = block
            .par_iter()
            .map(|&k| sys.trajectory(grid, &mut stream(seed, Purpose::Trajectories, k as u64)))
            .collect();
        for r in runs {
            let r = r?;
            for i in 0..len {
                let (p, g) = (r.series.p_exc[i], r.series.gamma_tot[i]);
                sp[i] += p;
                sp2[i] += p * p;
                sg[i] += g;
                sg2[i] += g * g;
                for (acc, v) in pops[i].iter_mut().zip(&r.site_pop[i]) {
                    *acc += v;
                }
            }
        }
    }
    let nt = n_traj as f64;
    let se = |s: f64, s2: f64| {
        if n_traj < 2 {
            0.0
        } else {
            let var = ((s2 - s * s / nt) / (nt - 1.0)).max(0.0);
            (var / nt).sqrt()
        }
    };
    let p_se: Vec<f64> = (0..len).map(|i| se(sp[i], sp2[i])).collect();
    let g_se: Vec<f64> = (0..len).map(|i| se(sg[i], sg2[i])).collect();
    let series = TimeSeries::new(n, grid.to_vec(), sp.iter().map(|v| v / nt).collect(), sg.iter().map(|v| v / nt).collect())?
        .with_stderr(p_se, g_se)?;
    for row in &mut pops {
        for v in row {
            *v /= nt;
        }
    }
    Ok(ExactSeries { series, site_pop: pops, trace_error: None })
}
