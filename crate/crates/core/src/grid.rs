use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform time grid `t_n = n * dt` for `n = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain(format!("grid step must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::domain("grid needs at least one step"));
        }
        Ok(Self { dt, n_steps })
    }

    /// Grid covering `[0, t_max]` with `floor(t_max / dt) + 1` points.
    pub fn with_horizon(dt: f64, t_max: f64) -> Result<Self> {
        if !(t_max.is_finite() && t_max >= dt) {
            return Err(Error::domain(format!(
                "horizon {t_max} must be at least one step {dt}"
            )));
        }
        // The relative slack keeps 1.2 / 0.01 from flooring to 119.
        let n_steps = (t_max / dt * (1.0 + 1e-12)).floor() as usize;
        Self::new(dt, n_steps)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.n_steps)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.t(n)).collect()
    }

    /// Same horizon with half the step.
    pub fn refined(&self) -> Self {
        Self {
            dt: self.dt / 2.0,
            n_steps: self.n_steps * 2,
        }
    }
}

/// Trapezoidal running integral of samples on a uniform grid; `out[0] = 0`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}
