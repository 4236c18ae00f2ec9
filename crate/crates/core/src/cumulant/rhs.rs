//! Closed equations of motion for the packed cumulant state.
//!
//! All sums over a spectator emitter `n` are evaluated once as dense matrix
//! products against `K = Γ/2 − iJ` (zero diagonal); the "n ∉ {i,j,k}"
//! restrictions are then restored by subtracting the few excluded terms.
//! With `C`, `M` stored as dense tables that vanish on coincident indices:
//!
//! - `A = K·C`, so `Σₙ Kₙᵢ cₙⱼ = Aᵢⱼ` and `Σₙ K*ⱼₙ cᵢₙ = conj(Aⱼᵢ)`;
//! - `D1ₐᵦ = Σₙ Kₐₙ mₐₙᵦ`, `Eₐᵦ = Σₙ Kₙᵦ mₐₙᵦ`;
//! - `Tᵢⱼₖ = Σₙ Kⱼₙ mᵢₙₖ` (the O(N⁴) term).

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::layout::{Layout, Order};
use super::state::CumulantState;
use crate::couplings::CouplingMatrices;
use crate::error::{Error, Result};
use crate::ode::OdeSystem;

const PAR_MIN_N: usize = 24;

/// Order of the closure plus the couplings it runs on.
#[derive(Clone, Debug)]
pub struct RhsSpec {
    pub order: Order,
    pub couplings: Arc<CouplingMatrices>,
}

impl RhsSpec {
    pub fn new(order: Order, couplings: Arc<CouplingMatrices>) -> Self {
        Self { order, couplings }
    }
}

/// Evaluate the time derivative of `state` once.
pub fn rhs(state: &CumulantState, spec: &RhsSpec) -> Result<CumulantState> {
    let mut sys = CumulantRhs::new(spec)?;
    sys.check(state)?;
    let mut dy = vec![0.0; state.data().len()];
    sys.eval(state.data(), &mut dy);
    CumulantState::from_data(state.layout().clone(), dy, state.time())
}

/// Reusable right-hand side with preallocated dense workspaces.
pub struct CumulantRhs {
    n: usize,
    order: Order,
    layout: Arc<Layout>,
    par: bool,
    gam: Vec<f64>,
    jm: Vec<f64>,
    kr: Vec<f64>,
    ki: Vec<f64>,
    s: Vec<f64>,
    cr: Vec<f64>,
    ci: Vec<f64>,
    p: Vec<f64>,
    ar: Vec<f64>,
    ai: Vec<f64>,
    q: Vec<f64>,
    mr: Vec<f64>,
    mi: Vec<f64>,
    d1r: Vec<f64>,
    d1i: Vec<f64>,
    er: Vec<f64>,
    ei: Vec<f64>,
    tr: Vec<f64>,
    ti: Vec<f64>,
}

impl CumulantRhs {
    pub fn new(spec: &RhsSpec) -> Result<Self> {
        let c = &spec.couplings;
        let n = c.n();
        let layout = Arc::new(Layout::new(n, spec.order));
        let gam = c.gamma_matrix().to_vec();
        let jm = c.j_matrix().to_vec();
        let mut kr: Vec<f64> = gam.iter().map(|g| 0.5 * g).collect();
        let mut ki: Vec<f64> = jm.iter().map(|j| -j).collect();
        for a in 0..n {
            kr[a * n + a] = 0.0;
            ki[a * n + a] = 0.0;
        }
        let n2 = if spec.order >= Order::Second { n * n } else { 0 };
        let n3 = if spec.order == Order::Third { n * n * n } else { 0 };
        let z = |len: usize| vec![0.0; len];
        Ok(Self {
            n,
            order: spec.order,
            layout,
            par: n >= PAR_MIN_N,
            gam,
            jm,
            kr,
            ki,
            s: z(n),
            cr: z(n2),
            ci: z(n2),
            p: z(n2),
            ar: z(n2),
            ai: z(n2),
            q: z(n3),
            mr: z(n3),
            mi: z(n3),
            d1r: z(n2),
            d1i: z(n2),
            er: z(n2),
            ei: z(n2),
            tr: z(n3),
            ti: z(n3),
        })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// Bytes held in coupling copies and scratch arrays.
    pub fn workspace_bytes(&self) -> usize {
        let arrays = [
            &self.gam, &self.jm, &self.kr, &self.ki, &self.s, &self.cr, &self.ci, &self.p, &self.ar, &self.ai, &self.q,
            &self.mr, &self.mi, &self.d1r, &self.d1i, &self.er, &self.ei, &self.tr, &self.ti,
        ];
        arrays.iter().map(|v| v.len()).sum::<usize>() * std::mem::size_of::<f64>()
    }

    pub fn check(&self, state: &CumulantState) -> Result<()> {
        if state.n() != self.n || state.order() != self.order {
            return Err(Error::invalid(format!(
                "state (N={}, order {}) does not match right-hand side (N={}, order {})",
                state.n(),
                state.order().as_u8(),
                self.n,
                self.order.as_u8()
            )));
        }
        Ok(())
    }

    pub fn eval(&mut self, y: &[f64], dy: &mut [f64]) {
        match self.order {
            Order::First => {
                for i in 0..self.n {
                    dy[i] = -y[i];
                }
            }
            Order::Second => {
                self.unpack2(y);
                self.compute_a();
                self.assemble2(dy);
            }
            Order::Third => {
                self.unpack2(y);
                self.unpack3(y);
                self.compute_a();
                self.compute3();
                self.assemble3(dy);
            }
        }
    }

    fn unpack2(&mut self, y: &[f64]) {
        let n = self.n;
        let l = &self.layout;
        self.s.copy_from_slice(&y[..n]);
        for i in 0..n {
            for j in i + 1..n {
                let o = l.coh(i, j);
                let (re, im) = (y[o], y[o + 1]);
                self.cr[i * n + j] = re;
                self.ci[i * n + j] = im;
                self.cr[j * n + i] = re;
                self.ci[j * n + i] = -im;
                let pv = y[l.pop2(i, j)];
                self.p[i * n + j] = pv;
                self.p[j * n + i] = pv;
            }
        }
    }

    fn unpack3(&mut self, y: &[f64]) {
        let n = self.n;
        let l = &self.layout;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let v = y[l.pop3(i, j, k)];
                    for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        self.q[(a * n + b) * n + c] = v;
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in j + 1..n {
                    if i == j || i == k {
                        continue;
                    }
                    let o = l.mixed3(i, j, k);
                    let (re, im) = (y[o], y[o + 1]);
                    self.mr[(i * n + j) * n + k] = re;
                    self.mi[(i * n + j) * n + k] = im;
                    self.mr[(i * n + k) * n + j] = re;
                    self.mi[(i * n + k) * n + j] = -im;
                }
            }
        }
    }

    /// `A = K·C`.
    fn compute_a(&mut self) {
        let n = self.n;
        let (kr, ki, cr, ci) = (&self.kr, &self.ki, &self.cr, &self.ci);
        let row = |i: usize, ar: &mut [f64], ai: &mut [f64]| {
            ar.fill(0.0);
            ai.fill(0.0);
            for m in 0..n {
                let (a, b) = (kr[i * n + m], ki[i * n + m]);
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                let (xr, xi) = (&cr[m * n..(m + 1) * n], &ci[m * n..(m + 1) * n]);
                for j in 0..n {
                    ar[j] += a * xr[j] - b * xi[j];
                    ai[j] += a * xi[j] + b * xr[j];
                }
            }
        };
        for_rows(self.par, &mut self.ar, &mut self.ai, n, row);
    }

    /// `D1`, `E` and `T` from the dense mixed table.
    fn compute3(&mut self) {
        let n = self.n;
        let (kr, ki, mr, mi) = (&self.kr, &self.ki, &self.mr, &self.mi);
        // D1[a][b] = Σₙ K[a][n]·M[a][n][b], E[a][b] = Σₙ K[n][b]·M[a][n][b]
        let d1_row = |a: usize, dr: &mut [f64], di: &mut [f64]| {
            dr.fill(0.0);
            di.fill(0.0);
            for m in 0..n {
                let (x, y) = (kr[a * n + m], ki[a * n + m]);
                let base = (a * n + m) * n;
                let (vr, vi) = (&mr[base..base + n], &mi[base..base + n]);
                for b in 0..n {
                    dr[b] += x * vr[b] - y * vi[b];
                    di[b] += x * vi[b] + y * vr[b];
                }
            }
        };
        for_rows(self.par, &mut self.d1r, &mut self.d1i, n, d1_row);
        let e_row = |a: usize, er: &mut [f64], ei: &mut [f64]| {
            er.fill(0.0);
            ei.fill(0.0);
            for m in 0..n {
                let (xr, xi) = (&kr[m * n..(m + 1) * n], &ki[m * n..(m + 1) * n]);
                let base = (a * n + m) * n;
                let (vr, vi) = (&mr[base..base + n], &mi[base..base + n]);
                for b in 0..n {
                    er[b] += xr[b] * vr[b] - xi[b] * vi[b];
                    ei[b] += xr[b] * vi[b] + xi[b] * vr[b];
                }
            }
        };
        for_rows(self.par, &mut self.er, &mut self.ei, n, e_row);
        // T[i] = K·M[i]
        let t_block = |i: usize, tr: &mut [f64], ti: &mut [f64]| {
            tr.fill(0.0);
            ti.fill(0.0);
            for j in 0..n {
                let (or, oi) = (&mut tr[j * n..(j + 1) * n], &mut ti[j * n..(j + 1) * n]);
                for m in 0..n {
                    let (x, y) = (kr[j * n + m], ki[j * n + m]);
                    if x == 0.0 && y == 0.0 {
                        continue;
                    }
                    let base = (i * n + m) * n;
                    let (vr, vi) = (&mr[base..base + n], &mi[base..base + n]);
                    for k in 0..n {
                        or[k] += x * vr[k] - y * vi[k];
                        oi[k] += x * vi[k] + y * vr[k];
                    }
                }
            }
        };
        for_rows(self.par, &mut self.tr, &mut self.ti, n * n, t_block);
    }

    #[inline]
    fn k(&self, a: usize, b: usize) -> Complex64 {
        let o = a * self.n + b;
        Complex64::new(self.kr[o], self.ki[o])
    }

    #[inline]
    fn c(&self, a: usize, b: usize) -> Complex64 {
        let o = a * self.n + b;
        Complex64::new(self.cr[o], self.ci[o])
    }

    #[inline]
    fn a(&self, a: usize, b: usize) -> Complex64 {
        let o = a * self.n + b;
        Complex64::new(self.ar[o], self.ai[o])
    }

    #[inline]
    fn m(&self, a: usize, b: usize, c: usize) -> Complex64 {
        let o = (a * self.n + b) * self.n + c;
        Complex64::new(self.mr[o], self.mi[o])
    }

    #[inline]
    fn d1(&self, a: usize, b: usize) -> Complex64 {
        let o = a * self.n + b;
        Complex64::new(self.d1r[o], self.d1i[o])
    }

    #[inline]
    fn e(&self, a: usize, b: usize) -> Complex64 {
        let o = a * self.n + b;
        Complex64::new(self.er[o], self.ei[o])
    }

    #[inline]
    fn t(&self, a: usize, b: usize, c: usize) -> Complex64 {
        let o = (a * self.n + b) * self.n + c;
        Complex64::new(self.tr[o], self.ti[o])
    }

    #[inline]
    fn pp(&self, a: usize, b: usize) -> f64 {
        self.p[a * self.n + b]
    }

    /// Coherent/dissipative source shared by both closures:
    /// `(Γᵢⱼ/2)(4pᵢⱼ − sᵢ − sⱼ) + iJᵢⱼ(sⱼ − sᵢ)`.
    #[inline]
    fn pair_source(&self, i: usize, j: usize) -> Complex64 {
        let n = self.n;
        let (si, sj) = (self.s[i], self.s[j]);
        Complex64::new(
            0.5 * self.gam[i * n + j] * (4.0 * self.pp(i, j) - si - sj),
            self.jm[i * n + j] * (sj - si),
        )
    }

    fn assemble_pop(&self, dy: &mut [f64]) {
        // Fᵢ = Σₙ Kₙᵢ cₙᵢ = Aᵢᵢ
        for (i, d) in dy[..self.n].iter_mut().enumerate() {
            *d = -self.s[i] - 2.0 * self.ar[i * self.n + i];
        }
    }

    fn assemble2(&self, dy: &mut [f64]) {
        let n = self.n;
        let l = &self.layout;
        self.assemble_pop(dy);
        for i in 0..n {
            for j in i + 1..n {
                let (si, sj) = (self.s[i], self.s[j]);
                let d = -self.c(i, j)
                    + self.pair_source(i, j)
                    + (2.0 * si - 1.0) * self.a(i, j)
                    + (2.0 * sj - 1.0) * self.a(j, i).conj();
                let o = l.coh(i, j);
                dy[o] = d.re;
                dy[o + 1] = d.im;

                let re_kc_ji = (self.k(j, i) * self.c(j, i)).re;
                let re_kc_ij = (self.k(i, j) * self.c(i, j)).re;
                let fi = self.ar[i * n + i];
                let fj = self.ar[j * n + j];
                dy[l.pop2(i, j)] = -2.0 * self.pp(i, j) - 2.0 * (sj * (fi - re_kc_ji) + si * (fj - re_kc_ij));
            }
        }
    }

    fn assemble3(&self, dy: &mut [f64]) {
        let n = self.n;
        let l = &self.layout;
        self.assemble_pop(dy);
        for i in 0..n {
            for j in i + 1..n {
                let d = -self.c(i, j) + self.pair_source(i, j) + 2.0 * self.d1(i, j) - self.a(i, j)
                    + 2.0 * self.d1(j, i).conj()
                    - self.a(j, i).conj();
                let o = l.coh(i, j);
                dy[o] = d.re;
                dy[o + 1] = d.im;
                dy[l.pop2(i, j)] = -2.0 * self.pp(i, j) - 2.0 * (self.e(j, i) + self.e(i, j)).re;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let q = self.q[(i * n + j) * n + k];
                    let lost = self.triple_loss(i, j, k) + self.triple_loss(j, i, k) + self.triple_loss(k, i, j);
                    dy[l.pop3(i, j, k)] = -3.0 * q - 2.0 * lost;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in j + 1..n {
                    if i == j || i == k {
                        continue;
                    }
                    let d = self.mixed_derivative(i, j, k);
                    let o = l.mixed3(i, j, k);
                    dy[o] = d.re;
                    dy[o + 1] = d.im;
                }
            }
        }
    }

    /// `Re Σ_{n∉{l,a,b}} Kₙₗ ⟨σₐᵉᵉσᵦᵉᵉσₙᵉᵍσₗᵍᵉ⟩` under the order-3 closure.
    fn triple_loss(&self, l: usize, a: usize, b: usize) -> f64 {
        let (sa, sb) = (self.s[a], self.s[b]);
        let f = self.a(l, l) - self.k(a, l) * self.c(a, l) - self.k(b, l) * self.c(b, l);
        let v = sa * (self.e(b, l) - self.k(a, l) * self.m(b, a, l))
            + sb * (self.e(a, l) - self.k(b, l) * self.m(a, b, l))
            + (self.pp(a, b) - 2.0 * sa * sb) * f;
        v.re
    }

    /// `d⟨σᵢᵉᵉσⱼᵉᵍσₖᵍᵉ⟩/dt`.
    fn mixed_derivative(&self, i: usize, j: usize, k: usize) -> Complex64 {
        let n = self.n;
        let (si, sj, sk) = (self.s[i], self.s[j], self.s[k]);
        let (pij, pik) = (self.pp(i, j), self.pp(i, k));
        let q = self.q[(i * n + j) * n + k];
        let (kij, kki) = (self.k(i, j), self.k(k, i));
        let cjk = self.c(j, k);
        let (cji, cik) = (self.c(j, i), self.c(i, k));

        let mut d = -2.0 * self.m(i, j, k) - kki * self.m(k, j, i) - kij.conj() * self.m(j, i, k)
            + Complex64::new(
                0.5 * self.gam[k * n + j] * (4.0 * q - pij - pik),
                self.jm[k * n + j] * (pik - pij),
            );
        let f = self.a(i, i) - self.k(j, i) * cji - kki * self.c(k, i);
        d -= cjk * (2.0 * f.re);
        d -= cji * (self.a(i, k) - kij * cjk);
        d -= cik * (self.a(i, j).conj() - cjk * kki.conj());
        d += 2.0 * si * (self.d1(j, k) - kij * self.m(j, i, k));
        d += (2.0 * sj - 1.0) * self.t(i, j, k);
        d += (2.0 * pij - 4.0 * si * sj) * (self.a(j, k) - kij * cik);
        d += 2.0 * si * (self.d1(k, j) - kki * self.m(k, i, j)).conj();
        d += (2.0 * sk - 1.0) * self.t(i, k, j).conj();
        d += (2.0 * pik - 4.0 * si * sk) * (self.a(k, j).conj() - cji * kki.conj());
        d
    }
}

impl OdeSystem for CumulantRhs {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.eval(y, dy);
    }
}

/// Fill two parallel row-major tables row by row.
fn for_rows<F>(par: bool, a: &mut [f64], b: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    if par {
        a.par_chunks_mut(width)
            .zip(b.par_chunks_mut(width))
            .enumerate()
            .for_each(|(i, (x, y))| f(i, x, y));
    } else {
        a.chunks_mut(width).zip(b.chunks_mut(width)).enumerate().for_each(|(i, (x, y))| f(i, x, y));
    }
}
