use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus the embedded fourth-order weights
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 1_000_000 }
    }
}

/// Dormand-Prince 5(4) integrator holding its state between calls, so a
/// trajectory can be sampled at many output times without restarting.
pub struct Dopri<const N: usize, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    rhs: F,
    pub t: f64,
    pub y: [f64; N],
    h: f64,
    opts: OdeOptions,
    steps: usize,
}

impl<const N: usize, F> Dopri<N, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(rhs: F, t0: f64, y0: [f64; N], opts: OdeOptions) -> Self {
        Self { rhs, t: t0, y: y0, h: 0.0, opts, steps: 0 }
    }

    fn error_norm(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let scale = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = err[i] / scale;
            acc += r * r;
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step(&mut self, dir: f64, span: f64) -> f64 {
        let f0 = (self.rhs)(self.t, &self.y);
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let scale = self.opts.atol + self.opts.rtol * self.y[i].abs();
            d0 += (self.y[i] / scale).powi(2);
            d1 += (f0[i] / scale).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        dir * h.min(span)
    }

    /// Integrate up to `t_end` (forward or backward), landing on it exactly.
    pub fn advance_to(&mut self, t_end: f64) -> Result<[f64; N]> {
        let span = t_end - self.t;
        if span == 0.0 {
            return Ok(self.y);
        }
        let dir = span.signum();
        if self.h == 0.0 || self.h.signum() != dir {
            self.h = self.initial_step(dir, span.abs());
        }
        let mut k = [[0.0; N]; 7];
        while (t_end - self.t) * dir > 0.0 {
            let remaining = t_end - self.t;
            let last = self.h.abs() >= remaining.abs();
            let h = if last { remaining } else { self.h };
            if h.abs() < 1e-14 * (1.0 + self.t.abs()) && !last {
                return Err(Error::StiffnessFailure { t: self.t });
            }
            k[0] = (self.rhs)(self.t, &self.y);
            for s in 1..7 {
                let mut ys = self.y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += h * a * kj[i];
                        }
                    }
                }
                k[s] = (self.rhs)(self.t + C[s] * h, &ys);
            }
            let mut y_new = self.y;
            let mut err = [0.0; N];
            // fifth-order weights are the last row of A
            for (s, ks) in k.iter().enumerate().take(6) {
                let b = A[6][s];
                if b != 0.0 {
                    for i in 0..N {
                        y_new[i] += h * b * ks[i];
                    }
                }
            }
            for (s, ks) in k.iter().enumerate() {
                for i in 0..N {
                    err[i] += h * E[s] * ks[i];
                }
            }
            let en = self.error_norm(&self.y, &y_new, &err);
            if !en.is_finite() {
                self.h *= 0.1;
                self.steps += 1;
                if self.steps > self.opts.max_steps {
                    return Err(Error::StiffnessFailure { t: self.t });
                }
                continue;
            }
            let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            if en <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.y = y_new;
                if !last {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor.min(1.0);
            }
            self.steps += 1;
            if self.steps > self.opts.max_steps {
                return Err(Error::StiffnessFailure { t: self.t });
            }
        }
        Ok(self.y)
    }
}
