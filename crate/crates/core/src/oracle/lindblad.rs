//! Direct propagation of the full density matrix.
//!
//! `dρ/dt = −i(H_eff ρ − ρ H_eff†) + Σₐᵦ Γₐᵦ σᵦ⁻ ρ σₐ⁺`, built from the
//! coupling matrices directly (no Γ eigendecomposition).

use num_complex::Complex64;

use super::{check_grid, ExactSeries, OracleOptions};
use crate::couplings::CouplingMatrices;
use crate::error::{Error, Result};
use crate::lattice::ExcitationPattern;
use crate::observables::TimeSeries;
use crate::ode::{integrate_sampled, OdeSystem};

/// Single-site operators embedded on the full 2^N space as sparse maps
/// `|x⟩ → coeff |y⟩`.
fn lower(x: usize, i: usize) -> Option<usize> {
    (x >> i & 1 == 1).then(|| x & !(1 << i))
}

fn raise(x: usize, i: usize) -> Option<usize> {
    (x >> i & 1 == 0).then(|| x | 1 << i)
}

struct Liouvillian {
    n: usize,
    d: usize,
    gamma: Vec<f64>,
    /// rows of H_eff: (column, value)
    h_rows: Vec<Vec<(usize, Complex64)>>,
    rho: Vec<Complex64>,
    x: Vec<Complex64>,
}

impl Liouvillian {
    fn new(c: &CouplingMatrices) -> Self {
        let n = c.n();
        let d = 1usize << n;
        // H_eff = Σₐᵦ (Jₐᵦ − iΓₐᵦ/2) σₐ⁺σᵦ⁻, with the diagonal a = b giving −i/2 per excitation
        let mut dense = vec![Complex64::new(0.0, 0.0); d * d];
        for a in 0..n {
            for b in 0..n {
                let coeff = Complex64::new(c.j(a, b), -0.5 * c.gamma(a, b));
                for src in 0..d {
                    if let Some(y) = lower(src, b).and_then(|y| raise(y, a)) {
                        dense[y * d + src] += coeff;
                    }
                }
            }
        }
        let h_rows = (0..d)
            .map(|r| (0..d).filter(|&col| dense[r * d + col] != Complex64::new(0.0, 0.0)).map(|col| (col, dense[r * d + col])).collect())
            .collect();
        Self {
            n,
            d,
            gamma: c.gamma_matrix().to_vec(),
            h_rows,
            rho: vec![Complex64::new(0.0, 0.0); d * d],
            x: vec![Complex64::new(0.0, 0.0); d * d],
        }
    }
}

impl OdeSystem for Liouvillian {
    fn dim(&self) -> usize {
        2 * self.d * self.d
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let (n, d) = (self.n, self.d);
        for (z, p) in self.rho.iter_mut().zip(y.chunks_exact(2)) {
            *z = Complex64::new(p[0], p[1]);
        }
        // X = −i H_eff ρ
        for r in 0..d {
            let row = &self.h_rows[r];
            for col in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(k, h) in row {
                    acc += h * self.rho[k * d + col];
                }
                self.x[r * d + col] = Complex64::new(acc.im, -acc.re);
            }
        }
        for r in 0..d {
            for col in 0..d {
                let mut v = self.x[r * d + col] + self.x[col * d + r].conj();
                // ⟨r| σᵦ⁻ ρ σₐ⁺ |col⟩ = ρ[r + b][col + a]
                for b in 0..n {
                    let Some(rb) = raise(r, b) else { continue };
                    for a in 0..n {
                        let Some(ca) = raise(col, a) else { continue };
                        v += self.gamma[a * n + b] * self.rho[rb * d + ca];
                    }
                }
                let o = 2 * (r * d + col);
                dy[o] = v.re;
                dy[o + 1] = v.im;
            }
        }
    }
}

/// Exact observables of `ρ`: (trace, p_exc, γ_tot, site populations).
fn observe(rho: &[f64], c: &CouplingMatrices) -> (f64, f64, f64, Vec<f64>) {
    let n = c.n();
    let d = 1usize << n;
    let at = |r: usize, col: usize| Complex64::new(rho[2 * (r * d + col)], rho[2 * (r * d + col) + 1]);
    let mut trace = 0.0;
    let mut pops = vec![0.0; n];
    for x in 0..d {
        let w = at(x, x).re;
        trace += w;
        for (i, p) in pops.iter_mut().enumerate() {
            if x >> i & 1 == 1 {
                *p += w;
            }
        }
    }
    let p_exc = pops.iter().sum();
    // γ_tot = Σₐᵦ Γₐᵦ Tr(σₐ⁺σᵦ⁻ρ), Tr(σₐ⁺σᵦ⁻ρ) = Σ_y ⟨y − a + b| ρ |y⟩
    let mut g = Complex64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let gab = c.gamma(a, b);
            if gab == 0.0 {
                continue;
            }
            for y in 0..d {
                if let Some(z) = lower(y, a).and_then(|z| raise(z, b)) {
                    g += gab * at(z, y);
                }
            }
        }
    }
    (trace, p_exc, g.re, pops)
}

pub fn lindblad_dense(
    pattern: &ExcitationPattern,
    couplings: &CouplingMatrices,
    grid: &[f64],
    opts: OracleOptions,
) -> Result<ExactSeries> {
    let n = couplings.n();
    if n > opts.cap {
        return Err(Error::Capacity { method: "lindblad", requested: n, cap: opts.cap });
    }
    if pattern.n_sites() != n {
        return Err(Error::invalid(format!("pattern covers {} sites, couplings {}", pattern.n_sites(), n)));
    }
    check_grid(grid)?;
    let mut sys = Liouvillian::new(couplings);
    let d = sys.d;
    let start = pattern.excited().iter().fold(0usize, |acc, &i| acc | 1 << i);
    let mut y0 = vec![0.0; 2 * d * d];
    y0[2 * (start * d + start)] = 1.0;
    let len = grid.len();
    let (mut p, mut g, mut pops) = (vec![0.0; len], vec![0.0; len], vec![Vec::new(); len]);
    let mut trace_err = 0.0f64;
    integrate_sampled(&mut sys, &y0, grid, opts.tol, |k, _t, y| {
        let (tr, pe, ga, po) = observe(y, couplings);
        trace_err = trace_err.max((tr - 1.0).abs());
        p[k] = pe;
        g[k] = ga;
        pops[k] = po;
    })?;
    let series = TimeSeries::new(n, grid.to_vec(), p, g)?;
    Ok(ExactSeries { series, site_pop: pops, trace_error: Some(trace_err) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{coupling_matrices, DEFAULT_DIPOLE};
    use crate::lattice::build_chain;
    use crate::observables::gamma_dot0;

    #[test]
    fn single_emitter() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let r = lindblad_dense(&ExcitationPattern::full(1), &CouplingMatrices::dicke(1), &grid, OracleOptions::lindblad()).unwrap();
        for (t, p) in grid.iter().zip(&r.series.p_exc) {
            assert!((p - (-t).exp()).abs() < 1e-7);
        }
        assert!(r.trace_error.unwrap() < 1e-8);
    }

    #[test]
    fn initial_slope_matches_closed_form() {
        let c = coupling_matrices(&build_chain(6, 0.1).unwrap(), DEFAULT_DIPOLE).unwrap();
        let mut sys = Liouvillian::new(&c);
        let d = sys.d;
        let mut y0 = vec![0.0; 2 * d * d];
        y0[2 * (d * d - 1)] = 1.0;
        let mut dy = vec![0.0; y0.len()];
        sys.rhs(0.0, &y0, &mut dy);
        let mut ddy = vec![0.0; y0.len()];
        sys.rhs(0.0, &dy, &mut ddy);
        // γ_tot is linear in ρ, so dγ/dt = γ_tot(dρ/dt)
        let (tr, dp, g_dot, _) = observe(&dy, &c);
        assert!(tr.abs() < 1e-14);
        let (_, _, g0, _) = observe(&y0, &c);
        assert!((dp + g0).abs() < 1e-12);
        let exact = gamma_dot0(&ExcitationPattern::full(6), &c).unwrap();
        assert!((g_dot - exact).abs() < 1e-6 * exact.abs(), "{g_dot} vs {exact}");
        // and the second derivative of p_exc agrees
        let (_, ddp, _, _) = observe(&ddy, &c);
        assert!((-ddp - exact).abs() < 1e-6 * exact.abs());
    }

    #[test]
    fn dicke_symmetry() {
        let n = 4;
        let mut j = vec![0.3; n * n];
        for i in 0..n {
            j[i * n + i] = 0.0;
        }
        let c = CouplingMatrices::from_matrices(n, j, vec![1.0; n * n]).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let r = lindblad_dense(&ExcitationPattern::full(n), &c, &grid, OracleOptions::lindblad()).unwrap();
        for row in &r.site_pop {
            for v in row {
                assert!((v - row[0]).abs() < 1e-10);
                assert!((-1e-8..=1.0 + 1e-8).contains(v));
            }
        }
    }

    #[test]
    fn capacity() {
        let c = CouplingMatrices::dicke(8);
        assert!(matches!(
            lindblad_dense(&ExcitationPattern::full(8), &c, &[0.0, 1.0], OracleOptions::lindblad()),
            Err(Error::Capacity { .. })
        ));
    }
}
