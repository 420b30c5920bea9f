//! Dormand–Prince 5(4) with PI step-size control and the 4th-order continuous
//! extension for dense output (after Hairer, Nørsett & Wanner, `DOPRI5`).

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// First-order system `y' = f(t, y)` on a flat real vector.
pub trait OdeSystem<T> {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: T, y: &[T], dydt: &mut [T]);
}

/// Hooks called by the integrator.
pub trait Observer<T> {
    /// State at a requested sample time (interpolated).
    fn sample(&mut self, _t: T, _y: &[T]) {}

    /// After every accepted step, with the derivative at the new point.
    fn step(&mut self, _t: T, _y: &[T], _dydt: &[T]) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl<T> Observer<T> for () {}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances<T> {
    pub rtol: T,
    pub atol: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-8),
            atol: T::lit(1e-10),
        }
    }
}

impl<T: Real> Tolerances<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self { rtol, atol }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > T::zero() && self.atol > T::zero()) {
            return Err(Error::invalid("tolerances", "rtol and atol must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome<T> {
    pub t: T,
    /// `true` when the observer asked to stop before `t_end`.
    pub stopped: bool,
    pub stats: StepStats,
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

struct Coeffs<T> {
    c: [T; 4],
    a: [T; 20],
    e: [T; 6],
    d: [T; 6],
}

impl<T: Real> Coeffs<T> {
    fn new() -> Self {
        let l = T::lit;
        Self {
            c: [l(C2), l(C3), l(C4), l(C5)],
            a: [
                l(A21),
                l(A31), l(A32),
                l(A41), l(A42), l(A43),
                l(A51), l(A52), l(A53), l(A54),
                l(A61), l(A62), l(A63), l(A64), l(A65),
                l(A71), l(A73), l(A74), l(A75), l(A76),
            ],
            e: [l(E1), l(E3), l(E4), l(E5), l(E6), l(E7)],
            d: [l(D1), l(D3), l(D4), l(D5), l(D6), l(D7)],
        }
    }
}

/// Reusable integrator workspace.
pub struct Dopri5<T> {
    pub tolerances: Tolerances<T>,
    /// Upper bound on `|h|`; `None` means the full span.
    pub h_max: Option<T>,
    pub max_steps: usize,
    /// Step size carried between calls; reset with [`Dopri5::reset_step`].
    h: Option<T>,
    coeffs: Coeffs<T>,
    k: [Vec<T>; 7],
    y_stage: Vec<T>,
    y_new: Vec<T>,
    dense: [Vec<T>; 5],
    sample_buf: Vec<T>,
}

impl<T: Real> Dopri5<T> {
    pub fn new(tolerances: Tolerances<T>) -> Self {
        Self {
            tolerances,
            h_max: None,
            max_steps: 10_000_000,
            h: None,
            coeffs: Coeffs::new(),
            k: Default::default(),
            y_stage: Vec::new(),
            y_new: Vec::new(),
            dense: Default::default(),
            sample_buf: Vec::new(),
        }
    }

    pub fn reset_step(&mut self) {
        self.h = None;
    }

    fn ensure_dim(&mut self, n: usize) {
        for v in self.k.iter_mut().chain(self.dense.iter_mut()) {
            v.resize(n, T::zero());
        }
        self.y_stage.resize(n, T::zero());
        self.y_new.resize(n, T::zero());
        self.sample_buf.resize(n, T::zero());
    }

    fn error_norm(&self, y: &[T], y_new: &[T], err: &[T]) -> T {
        let n = y.len();
        if n == 0 {
            return T::zero();
        }
        let tol = &self.tolerances;
        let mut acc = T::zero();
        for i in 0..n {
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            let r = err[i] / sc;
            acc = acc + r * r;
        }
        (acc / T::from_usize_lossy(n)).sqrt()
    }

    /// Starting step from the derivative scales (Hairer's `hinit`).
    fn initial_step<S: OdeSystem<T>>(&mut self, sys: &mut S, t: T, y: &[T], span: T) -> T {
        let tol = self.tolerances;
        let n = y.len();
        let scale = |i: usize| tol.atol + tol.rtol * y[i].abs();
        let rms = |v: &dyn Fn(usize) -> T| {
            let s: T = (0..n).map(|i| v(i) * v(i)).sum();
            (s / T::from_usize_lossy(n.max(1))).sqrt()
        };
        let f0 = &self.k[0];
        let dnf = rms(&|i| f0[i] / scale(i));
        let dny = rms(&|i| y[i] / scale(i));
        let mut h = if dnf <= T::lit(1e-10) || dny <= T::lit(1e-10) {
            T::lit(1e-6)
        } else {
            T::lit(0.01) * dny / dnf
        };
        h = h.min(span);
        for i in 0..n {
            self.y_stage[i] = y[i] + h * self.k[0][i];
        }
        let (ys, k1) = (&self.y_stage, &mut self.k[1]);
        sys.rhs(t + h, ys, k1);
        let der2 = {
            let f0 = &self.k[0];
            let f1 = &self.k[1];
            rms(&|i| (f1[i] - f0[i]) / scale(i)) / h
        };
        let der12 = dnf.max(der2);
        let h1 = if der12 <= T::lit(1e-15) {
            (h * T::lit(1e-3)).max(T::lit(1e-6))
        } else {
            (T::lit(0.01) / der12).powf(T::lit(0.2))
        };
        (T::lit(100.0) * h).min(h1).min(span)
    }

    /// Advances `y` from `t0` to `t_end` (or until the observer breaks).
    ///
    /// `samples` must be sorted; those in `[t0, t_end]` are reported through
    /// [`Observer::sample`] using the continuous extension.
    pub fn integrate<S, O>(
        &mut self,
        sys: &mut S,
        t0: T,
        y: &mut [T],
        t_end: T,
        samples: &[T],
        observer: &mut O,
    ) -> Result<Outcome<T>>
    where
        S: OdeSystem<T>,
        O: Observer<T>,
    {
        let n = sys.dim();
        assert_eq!(y.len(), n, "state length does not match system dimension");
        self.tolerances.validate()?;
        self.ensure_dim(n);
        let mut stats = StepStats::default();
        let mut next_sample = samples.partition_point(|&s| s < t0);
        while next_sample < samples.len() && samples[next_sample] == t0 {
            observer.sample(t0, y);
            next_sample += 1;
        }
        let mut t = t0;
        if !(t_end > t0) {
            return Ok(Outcome { t, stopped: false, stats });
        }

        let span = t_end - t0;
        let h_max = self.h_max.unwrap_or(span).min(span);
        {
            let k0 = &mut self.k[0];
            sys.rhs(t, y, k0);
        }
        stats.rhs_evals += 1;
        let mut h = match self.h {
            Some(h) => h.min(h_max),
            None => {
                stats.rhs_evals += 1;
                self.initial_step(sys, t, y, h_max)
            }
        };

        let safe = T::lit(0.9);
        let fac_min = T::lit(0.2);
        let fac_max = T::lit(10.0);
        let beta = T::lit(0.04);
        let expo = T::lit(0.2) - beta * T::lit(0.75);
        let mut fac_old = T::lit(1e-4);
        let mut last_rejected = false;

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::TooManySteps {
                    t: t.to_f64_lossy(),
                    steps: self.max_steps,
                });
            }
            let remaining = t_end - t;
            let last = h >= remaining * (T::one() - T::lit(4.0) * T::EPS);
            if last {
                h = remaining;
            }
            if h <= T::lit(16.0) * T::EPS * t.abs().max(T::one()) {
                return Err(Error::StepSizeUnderflow {
                    t: t.to_f64_lossy(),
                    h: h.to_f64_lossy(),
                    max_abs_state: super::state::max_abs(y).to_f64_lossy(),
                });
            }

            self.stages(sys, t, y, h);
            stats.rhs_evals += 6;

            let cf = &self.coeffs;
            for i in 0..n {
                self.y_stage[i] = h
                    * (cf.e[0] * self.k[0][i]
                        + cf.e[1] * self.k[2][i]
                        + cf.e[2] * self.k[3][i]
                        + cf.e[3] * self.k[4][i]
                        + cf.e[4] * self.k[5][i]
                        + cf.e[5] * self.k[6][i]);
            }
            let err = self.error_norm(y, &self.y_new, &self.y_stage);

            if !err.is_finite() {
                stats.rejected += 1;
                h = h * fac_min;
                last_rejected = true;
                continue;
            }

            let fac11 = err.powf(expo);
            if err <= T::one() {
                let mut fac = fac11 / fac_old.powf(beta);
                fac = (T::one() / fac_max).max((T::one() / fac_min).min(fac / safe));
                let mut h_new = h / fac;
                fac_old = err.max(T::lit(1e-4));

                self.prepare_dense(y, h);
                let t_new = if last { t_end } else { t + h };
                while next_sample < samples.len() && samples[next_sample] <= t_new {
                    let ts = samples[next_sample];
                    self.interpolate(t, h, ts);
                    observer.sample(ts, &self.sample_buf);
                    next_sample += 1;
                }

                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                t = t_new;
                stats.accepted += 1;

                if !self.y_new.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite { t: t.to_f64_lossy() });
                }

                if last_rejected {
                    h_new = h_new.min(h);
                }
                last_rejected = false;
                h_new = h_new.min(h_max);
                self.h = Some(h_new);

                if observer.step(t, y, &self.k[0]).is_break() {
                    return Ok(Outcome { t, stopped: true, stats });
                }
                if last {
                    return Ok(Outcome { t, stopped: false, stats });
                }
                h = h_new;
            } else {
                stats.rejected += 1;
                h = h / (T::one() / fac_min).min(fac11 / safe);
                last_rejected = true;
            }
        }
    }

    fn stages<S: OdeSystem<T>>(&mut self, sys: &mut S, t: T, y: &[T], h: T) {
        let n = y.len();
        let a = &self.coeffs.a;
        let c = &self.coeffs.c;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let ys = &mut self.y_stage;

        for i in 0..n {
            ys[i] = y[i] + h * a[0] * k1[i];
        }
        sys.rhs(t + c[0] * h, ys, k2);
        for i in 0..n {
            ys[i] = y[i] + h * (a[1] * k1[i] + a[2] * k2[i]);
        }
        sys.rhs(t + c[1] * h, ys, k3);
        for i in 0..n {
            ys[i] = y[i] + h * (a[3] * k1[i] + a[4] * k2[i] + a[5] * k3[i]);
        }
        sys.rhs(t + c[2] * h, ys, k4);
        for i in 0..n {
            ys[i] = y[i] + h * (a[6] * k1[i] + a[7] * k2[i] + a[8] * k3[i] + a[9] * k4[i]);
        }
        sys.rhs(t + c[3] * h, ys, k5);
        for i in 0..n {
            ys[i] = y[i]
                + h * (a[10] * k1[i] + a[11] * k2[i] + a[12] * k3[i] + a[13] * k4[i] + a[14] * k5[i]);
        }
        sys.rhs(t + h, ys, k6);
        let y_new = &mut self.y_new;
        for i in 0..n {
            y_new[i] = y[i]
                + h * (a[15] * k1[i] + a[16] * k3[i] + a[17] * k4[i] + a[18] * k5[i] + a[19] * k6[i]);
        }
        sys.rhs(t + h, y_new, k7);
    }

    fn prepare_dense(&mut self, y: &[T], h: T) {
        let d = &self.coeffs.d;
        let k = &self.k;
        let [r1, r2, r3, r4, r5] = &mut self.dense;
        for i in 0..y.len() {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            r1[i] = y[i];
            r2[i] = ydiff;
            r3[i] = bspl;
            r4[i] = ydiff - h * k[6][i] - bspl;
            r5[i] = h
                * (d[0] * k[0][i] + d[1] * k[2][i] + d[2] * k[3][i] + d[3] * k[4][i] + d[4] * k[5][i]
                    + d[5] * k[6][i]);
        }
    }

    fn interpolate(&mut self, t_old: T, h: T, t: T) {
        let theta = (t - t_old) / h;
        let theta1 = T::one() - theta;
        let [r1, r2, r3, r4, r5] = &self.dense;
        for i in 0..self.sample_buf.len() {
            self.sample_buf[i] =
                r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }
}
