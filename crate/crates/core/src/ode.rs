//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! Step control follows the usual embedded-pair recipe: a step is accepted when
//! the RMS of `err_i / (atol + rtol·max(|y_i|, |y_new_i|))` is at most one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side of `dy/dt = f(t, y)` on a flat real vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-6, atol: 1e-9 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        if !(rtol > 0.0 && atol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        Ok(Self { rtol, atol })
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_REJECTS_NAN: usize = 40;

/// Stateful stepper. After each [`Dopri5::step`] the interval
/// `[t_prev, t]` can be interpolated with [`Dopri5::dense`].
pub struct Dopri5 {
    tol: Tolerances,
    t: f64,
    y: Vec<f64>,
    h: f64,
    h_max: f64,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    // dense-output coefficients of the last accepted step
    t_prev: f64,
    h_prev: f64,
    cont: [Vec<f64>; 5],
    fsal_valid: bool,
    n_eval: usize,
    n_accept: usize,
    n_reject: usize,
}

impl Dopri5 {
    pub fn new<S: OdeSystem + ?Sized>(sys: &mut S, t0: f64, y0: &[f64], tol: Tolerances) -> Self {
        let n = y0.len();
        assert_eq!(n, sys.dim(), "state length does not match system dimension");
        let zeros = || vec![0.0; n];
        let mut s = Self {
            tol,
            t: t0,
            y: y0.to_vec(),
            h: 0.0,
            h_max: f64::INFINITY,
            k: [zeros(), zeros(), zeros(), zeros(), zeros(), zeros(), zeros()],
            ytmp: zeros(),
            ynew: zeros(),
            t_prev: t0,
            h_prev: 0.0,
            cont: [zeros(), zeros(), zeros(), zeros(), zeros()],
            fsal_valid: false,
            n_eval: 0,
            n_accept: 0,
            n_reject: 0,
        };
        s.cont[0].copy_from_slice(y0);
        s.restart(sys, t0, None);
        s
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self.h = self.h.min(h_max);
        self
    }

    /// Reset at `(t, y)` (e.g. after a discontinuous jump); `y = None` keeps the current state.
    pub fn restart<S: OdeSystem + ?Sized>(&mut self, sys: &mut S, t: f64, y: Option<&[f64]>) {
        self.t = t;
        if let Some(y) = y {
            self.y.copy_from_slice(y);
        }
        self.t_prev = t;
        self.h_prev = 0.0;
        self.cont[0].copy_from_slice(&self.y);
        for c in self.cont.iter_mut().skip(1) {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        sys.rhs(self.t, &self.y, &mut self.k[0]);
        self.n_eval += 1;
        self.fsal_valid = true;
        self.h = self.initial_step(sys).min(self.h_max);
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    pub fn evaluations(&self) -> usize {
        self.n_eval
    }

    pub fn accepted_steps(&self) -> usize {
        self.n_accept
    }

    pub fn rejected_steps(&self) -> usize {
        self.n_reject
    }

    fn initial_step<S: OdeSystem + ?Sized>(&mut self, sys: &mut S) -> f64 {
        let n = self.y.len().max(1) as f64;
        let (mut d0, mut d1) = (0.0, 0.0);
        for (y, f) in self.y.iter().zip(&self.k[0]) {
            let sc = self.tol.atol + self.tol.rtol * y.abs();
            d0 += (y / sc).powi(2);
            d1 += (f / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for (tmp, (y, f)) in self.ytmp.iter_mut().zip(self.y.iter().zip(&self.k[0])) {
            *tmp = y + h0 * f;
        }
        sys.rhs(self.t + h0, &self.ytmp, &mut self.k[1]);
        self.n_eval += 1;
        let mut d2 = 0.0;
        for (y, (f1, f0)) in self.y.iter().zip(self.k[1].iter().zip(&self.k[0])) {
            let sc = self.tol.atol + self.tol.rtol * y.abs();
            d2 += ((f1 - f0) / sc).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    fn stage(ytmp: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
        for (idx, out) in ytmp.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (c, k) in terms {
                acc += c * k[idx];
            }
            *out = y[idx] + h * acc;
        }
    }

    /// Advance by one accepted step, not past `t_limit`.
    pub fn step<S: OdeSystem + ?Sized>(&mut self, sys: &mut S, t_limit: f64) -> Result<()> {
        let mut nan_rejects = 0;
        loop {
            let remaining = t_limit - self.t;
            if remaining <= 0.0 {
                return Ok(());
            }
            let mut h = self.h.min(remaining).min(self.h_max);
            // avoid leaving a sliver at the end of the interval
            if remaining - h < 1e-3 * h {
                h = remaining;
            }
            if h < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            if !self.fsal_valid {
                sys.rhs(self.t, &self.y, &mut self.k[0]);
                self.n_eval += 1;
                self.fsal_valid = true;
            }
            let t = self.t;
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            Self::stage(&mut self.ytmp, &self.y, h, &[(A21, k1)]);
            sys.rhs(t + C2 * h, &self.ytmp, k2);
            Self::stage(&mut self.ytmp, &self.y, h, &[(A31, k1), (A32, k2)]);
            sys.rhs(t + C3 * h, &self.ytmp, k3);
            Self::stage(&mut self.ytmp, &self.y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
            sys.rhs(t + C4 * h, &self.ytmp, k4);
            Self::stage(&mut self.ytmp, &self.y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
            sys.rhs(t + C5 * h, &self.ytmp, k5);
            Self::stage(
                &mut self.ytmp,
                &self.y,
                h,
                &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
            );
            sys.rhs(t + h, &self.ytmp, k6);
            Self::stage(
                &mut self.ynew,
                &self.y,
                h,
                &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)],
            );
            sys.rhs(t + h, &self.ynew, k7);
            self.n_eval += 6;

            let mut err = 0.0;
            for idx in 0..self.y.len() {
                let e = h
                    * (E1 * k1[idx] + E3 * k3[idx] + E4 * k4[idx] + E5 * k5[idx] + E6 * k6[idx] + E7 * k7[idx]);
                let sc = self.tol.atol + self.tol.rtol * self.y[idx].abs().max(self.ynew[idx].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / self.y.len().max(1) as f64).sqrt();

            if !err.is_finite() {
                nan_rejects += 1;
                self.n_reject += 1;
                if nan_rejects > MAX_REJECTS_NAN {
                    return Err(Error::NumericalBlowup { t: self.t });
                }
                self.h = h * FAC_MIN;
                continue;
            }

            if err <= 1.0 {
                // dense output coefficients
                for idx in 0..self.y.len() {
                    let y0 = self.y[idx];
                    let y1 = self.ynew[idx];
                    let ydiff = y1 - y0;
                    let bspl = h * k1[idx] - ydiff;
                    self.cont[0][idx] = y0;
                    self.cont[1][idx] = ydiff;
                    self.cont[2][idx] = bspl;
                    self.cont[3][idx] = ydiff - h * k7[idx] - bspl;
                    self.cont[4][idx] = h
                        * (D1 * k1[idx] + D3 * k3[idx] + D4 * k4[idx] + D5 * k5[idx] + D6 * k6[idx] + D7 * k7[idx]);
                }
                std::mem::swap(&mut self.y, &mut self.ynew);
                std::mem::swap(k1, k7);
                self.t_prev = t;
                self.h_prev = h;
                self.t = if h == remaining { t_limit } else { t + h };
                self.n_accept += 1;
                let fac = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
                self.h = (h * fac).min(self.h_max);
                if self.y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericalBlowup { t: self.t });
                }
                return Ok(());
            }
            self.n_reject += 1;
            let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            self.h = h * fac;
        }
    }

    /// Interpolate the last accepted step at `t ∈ [t_prev, t]`.
    pub fn dense(&self, t: f64, out: &mut [f64]) {
        if self.h_prev == 0.0 {
            out.copy_from_slice(&self.cont[0]);
            return;
        }
        let theta = (t - self.t_prev) / self.h_prev;
        let theta1 = 1.0 - theta;
        let [c0, c1, c2, c3, c4] = &self.cont;
        for idx in 0..out.len() {
            out[idx] = c0[idx] + theta * (c1[idx] + theta1 * (c2[idx] + theta * (c3[idx] + theta1 * c4[idx])));
        }
    }
}

/// Uniform sample grid `0, dt, 2dt, …` up to and including `t_max`.
pub fn sample_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_max > 0.0) || !(dt > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid("t_max and sample_dt must be positive"));
    }
    let n = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * dt).collect())
}

/// Integrate from `times[0]`, calling `on_sample(index, t, y)` at each grid time.
pub fn integrate_sampled<S, F>(sys: &mut S, y0: &[f64], times: &[f64], tol: Tolerances, mut on_sample: F) -> Result<Vec<f64>>
where
    S: OdeSystem + ?Sized,
    F: FnMut(usize, f64, &[f64]),
{
    if times.is_empty() {
        return Ok(y0.to_vec());
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sample times must be strictly increasing"));
    }
    on_sample(0, times[0], y0);
    let mut stepper = Dopri5::new(sys, times[0], y0, tol);
    let mut buf = vec![0.0; y0.len()];
    let mut next = 1;
    let t_end = *times.last().unwrap();
    while next < times.len() {
        stepper.step(sys, t_end)?;
        while next < times.len() && times[next] <= stepper.t() {
            if times[next] == stepper.t() {
                on_sample(next, times[next], stepper.y());
            } else {
                stepper.dense(times[next], &mut buf);
                on_sample(next, times[next], &buf);
            }
            next += 1;
        }
    }
    Ok(stepper.y().to_vec())
}
