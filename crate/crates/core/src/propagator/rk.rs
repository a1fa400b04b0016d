//! Explicit Runge-Kutta steppers over [`OdeState`] buffers.

use super::{Flow, IntegrationStats, IntegratorConfig, IntegratorMode, OdeState};
use crate::{C64, Error, Result};

// Dormand-Prince 5(4) tableau.
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
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// y ← base + h Σ w_k k_k
fn combine(out: &mut [C64], base: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    out.copy_from_slice(base);
    for &(w, k) in terms {
        if w == 0.0 {
            continue;
        }
        let s = h * w;
        for (o, v) in out.iter_mut().zip(k) {
            *o += v * s;
        }
    }
}

pub(crate) struct Stepper<'a, F: Flow> {
    flow: &'a F,
    config: IntegratorConfig,
    t: f64,
    y: F::State,
    /// Proposed next step (adaptive mode).
    h: f64,
    /// Derivative at (t, y); valid when `fsal` is set.
    k1: F::State,
    fsal: bool,
    k: [F::State; 6],
    y_new: F::State,
    stats: IntegrationStats,
    facold: f64,
}

impl<'a, F: Flow> Stepper<'a, F> {
    pub(crate) fn new(flow: &'a F, y0: F::State, config: IntegratorConfig) -> Self {
        let k = std::array::from_fn(|_| y0.clone());
        Self {
            flow,
            config,
            t: 0.0,
            k1: y0.clone(),
            y_new: y0.clone(),
            y: y0,
            h: 0.0,
            fsal: false,
            k,
            stats: IntegrationStats::default(),
            facold: 1e-4,
        }
    }

    pub(crate) fn state(&self) -> &F::State {
        &self.y
    }

    pub(crate) fn stats(&self) -> IntegrationStats {
        self.stats
    }

    fn eval(&mut self, input: Input, slot: Slot) {
        let src = match input {
            Input::Y => &self.y,
            Input::YNew => &self.y_new,
        };
        match slot {
            Slot::K1 => self.flow.rhs(src, &mut self.k1),
            Slot::K(i) => self.flow.rhs(src, &mut self.k[i]),
        }
        self.stats.rhs_evaluations += 1;
    }

    fn budget(&self) -> Result<()> {
        let taken = self.stats.accepted_steps + self.stats.rejected_steps;
        if taken >= self.config.max_steps {
            return Err(Error::TooManySteps {
                max_steps: self.config.max_steps,
                time: self.t,
            });
        }
        Ok(())
    }

    pub(crate) fn advance_to(&mut self, target: f64) -> Result<()> {
        if target <= self.t {
            return Ok(());
        }
        match self.config.mode {
            IntegratorMode::FixedRk4 => self.advance_rk4(target),
            IntegratorMode::Adaptive => self.advance_adaptive(target),
        }
    }

    fn advance_rk4(&mut self, target: f64) -> Result<()> {
        let span = target - self.t;
        let n = ((span / self.config.step) - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let t0 = self.t;
        for i in 0..n {
            self.budget()?;
            self.rk4_step(h);
            self.t = if i + 1 == n { target } else { t0 + h * (i + 1) as f64 };
            self.stats.accepted_steps += 1;
        }
        Ok(())
    }

    fn rk4_step(&mut self, h: f64) {
        self.eval(Input::Y, Slot::K1);
        combine(self.y_new.data_mut(), self.y.data(), h, &[(0.5, self.k1.data())]);
        self.eval(Input::YNew, Slot::K(0));
        combine(self.y_new.data_mut(), self.y.data(), h, &[(0.5, self.k[0].data())]);
        self.eval(Input::YNew, Slot::K(1));
        combine(self.y_new.data_mut(), self.y.data(), h, &[(1.0, self.k[1].data())]);
        self.eval(Input::YNew, Slot::K(2));
        let w = 1.0 / 6.0;
        let (k1, k) = (&self.k1, &self.k);
        combine(
            self.y_new.data_mut(),
            self.y.data(),
            h,
            &[
                (w, k1.data()),
                (2.0 * w, k[0].data()),
                (2.0 * w, k[1].data()),
                (w, k[2].data()),
            ],
        );
        std::mem::swap(&mut self.y, &mut self.y_new);
        self.y.hermitize();
    }

    /// Scaled max-norm of the embedded error estimate.
    fn error_norm(&self, err: &[C64]) -> f64 {
        let (atol, rtol) = (self.config.abs_tol, self.config.rel_tol);
        self.y
            .data()
            .iter()
            .zip(self.y_new.data())
            .zip(err)
            .map(|((a, b), e)| e.norm() / (atol + rtol * a.norm().max(b.norm())))
            .fold(0.0, f64::max)
    }

    fn initial_step(&mut self) -> f64 {
        let (atol, rtol) = (self.config.abs_tol, self.config.rel_tol);
        let scale: Vec<f64> = self.y.data().iter().map(|v| atol + rtol * v.norm()).collect();
        let norm = |xs: &[C64]| {
            xs.iter()
                .zip(&scale)
                .map(|(x, s)| x.norm() / s)
                .fold(0.0, f64::max)
        };
        let d0 = norm(self.y.data());
        let d1 = norm(self.k1.data());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.config.max_step);
        // one explicit Euler probe for the second derivative
        combine(self.y_new.data_mut(), self.y.data(), h0, &[(1.0, self.k1.data())]);
        self.eval(Input::YNew, Slot::K(0));
        let diff: Vec<C64> = self.k[0]
            .data()
            .iter()
            .zip(self.k1.data())
            .map(|(a, b)| a - b)
            .collect();
        let d2 = norm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.config.max_step)
    }

    fn advance_adaptive(&mut self, target: f64) -> Result<()> {
        if !self.fsal {
            self.eval(Input::Y, Slot::K1);
            self.fsal = true;
        }
        if self.h == 0.0 {
            self.h = self.initial_step();
        }
        let mut err_buf = vec![C64::new(0.0, 0.0); self.y.data().len()];
        let mut rejected_last = false;
        while self.t < target {
            self.budget()?;
            let remaining = target - self.t;
            let mut h = self.h.min(self.config.max_step);
            let lands = h >= remaining * (1.0 - 1e-12);
            if lands {
                h = remaining;
            }
            let min_step = 1e-14 * self.t.abs().max(1.0);
            if h < min_step {
                return Err(Error::StepUnderflow { time: self.t, step: h });
            }
            self.dopri_stages(h);
            let (k1, k) = (&self.k1, &self.k);
            for (i, e) in err_buf.iter_mut().enumerate() {
                *e = (k1.data()[i] * E1
                    + k[1].data()[i] * E3
                    + k[2].data()[i] * E4
                    + k[3].data()[i] * E5
                    + k[4].data()[i] * E6
                    + k[5].data()[i] * E7)
                    * h;
            }
            let err = self.error_norm(&err_buf);
            let fac11 = err.powf(EXPO);
            if err <= 1.0 {
                // PI controller on accepted steps
                let fac = (fac11 / self.facold.powf(BETA) / self.config.safety)
                    .clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_next = h / fac;
                if rejected_last {
                    h_next = h_next.min(h);
                }
                self.facold = err.max(1e-4);
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.y.hermitize();
                // FSAL: stage 7 is f(y_new)
                std::mem::swap(&mut self.k1, &mut self.k[5]);
                self.t = if lands { target } else { self.t + h };
                self.stats.accepted_steps += 1;
                rejected_last = false;
                if !lands || h_next > self.h {
                    self.h = h_next;
                }
            } else {
                let fac = (fac11 / self.config.safety).min(1.0 / FAC_MIN);
                self.h = h / fac;
                self.stats.rejected_steps += 1;
                rejected_last = true;
            }
        }
        Ok(())
    }

    /// y_new ← y + h Σ w·k over `weights` (index 0 is k1, i > 0 is k[i − 1]),
    /// then evaluates the rhs there into k[slot].
    fn stage(&mut self, h: f64, weights: &[(usize, f64)], slot: usize) {
        let terms: Vec<(f64, &[C64])> = weights
            .iter()
            .map(|&(i, w)| (w, if i == 0 { self.k1.data() } else { self.k[i - 1].data() }))
            .collect();
        combine(self.y_new.data_mut(), self.y.data(), h, &terms);
        self.eval(Input::YNew, Slot::K(slot));
    }

    /// Fills k[0..6] with stages 2..7; y_new holds the fifth-order solution.
    fn dopri_stages(&mut self, h: f64) {
        self.stage(h, &[(0, A21)], 0);
        self.stage(h, &[(0, A31), (1, A32)], 1);
        self.stage(h, &[(0, A41), (1, A42), (2, A43)], 2);
        self.stage(h, &[(0, A51), (1, A52), (2, A53), (3, A54)], 3);
        self.stage(h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], 4);
        self.stage(h, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], 5);
    }
}

#[derive(Clone, Copy)]
enum Input {
    Y,
    YNew,
}

#[derive(Clone, Copy)]
enum Slot {
    K1,
    K(usize),
}
