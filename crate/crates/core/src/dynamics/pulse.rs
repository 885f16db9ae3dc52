use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PvbError, Result};

/// Scalar control signal `u(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlPulse {
    /// `A sin(2 pi t / T - pi) sin^2(pi t / 4T)` on `[0, 4T]`.
    Nir { amplitude: f64, period: f64 },
    /// `A sin(2 pi s / T) exp(-(s - 5T/4)^2 / 2 sigma^2)` with `s = t - delay >= 0`.
    Xuv {
        amplitude: f64,
        period: f64,
        sigma: f64,
        #[serde(default)]
        delay: f64,
    },
    /// `value` on `[start, end)`.
    Constant { value: f64, start: f64, end: f64 },
    /// Piecewise linear through `(times, values)`, zero outside.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl ControlPulse {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PvbError::InvalidInput(m.to_string()));
        match self {
            ControlPulse::Nir { amplitude, period } => {
                if !amplitude.is_finite() || !(*period > 0.0 && period.is_finite()) {
                    return bad("NIR pulse needs a finite amplitude and a positive period");
                }
            }
            ControlPulse::Xuv { amplitude, period, sigma, delay } => {
                if !amplitude.is_finite() || !delay.is_finite() || !(*period > 0.0) || !(*sigma > 0.0) {
                    return bad("XUV pulse needs finite amplitude and delay, positive period and width");
                }
            }
            ControlPulse::Constant { value, start, end } => {
                if !value.is_finite() || !start.is_finite() || !end.is_finite() || end < start {
                    return bad("constant pulse needs finite values and start <= end");
                }
            }
            ControlPulse::Table { times, values } => {
                if times.len() != values.len() || times.len() < 2 {
                    return bad("pulse table needs at least two (time, value) pairs");
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("pulse table times must be strictly increasing");
                }
                if times.iter().chain(values).any(|v| !v.is_finite()) {
                    return bad("pulse table has non-finite entries");
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            ControlPulse::Nir { amplitude, period } => {
                if !(0.0..=4.0 * period).contains(&t) {
                    return 0.0;
                }
                amplitude * (2.0 * PI * t / period - PI).sin() * (PI * t / (4.0 * period)).sin().powi(2)
            }
            ControlPulse::Xuv { amplitude, period, sigma, delay } => {
                let s = t - delay;
                if s < 0.0 {
                    return 0.0;
                }
                let c = s - 1.25 * period;
                amplitude * (2.0 * PI * s / period).sin() * (-c * c / (2.0 * sigma * sigma)).exp()
            }
            ControlPulse::Constant { value, start, end } => {
                if t >= *start && t < *end {
                    *value
                } else {
                    0.0
                }
            }
            ControlPulse::Table { times, values } => {
                let n = times.len();
                if t < times[0] || t > times[n - 1] {
                    return 0.0;
                }
                let i = times.partition_point(|&x| x <= t).clamp(1, n - 1);
                let (t0, t1) = (times[i - 1], times[i]);
                let (v0, v1) = (values[i - 1], values[i]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// `du/dt` where it exists; one-sided at kinks.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            ControlPulse::Nir { amplitude, period } => {
                if !(0.0..=4.0 * period).contains(&t) {
                    return 0.0;
                }
                let w = 2.0 * PI / period;
                let e = (PI * t / (4.0 * period)).sin().powi(2);
                let de = PI / (4.0 * period) * (PI * t / (2.0 * period)).sin();
                amplitude * (w * (w * t - PI).cos() * e + (w * t - PI).sin() * de)
            }
            ControlPulse::Xuv { amplitude, period, sigma, delay } => {
                let s = t - delay;
                if s < 0.0 {
                    return 0.0;
                }
                let w = 2.0 * PI / period;
                let c = s - 1.25 * period;
                let g = (-c * c / (2.0 * sigma * sigma)).exp();
                amplitude * g * (w * (w * s).cos() - (w * s).sin() * c / (sigma * sigma))
            }
            ControlPulse::Constant { .. } => 0.0,
            ControlPulse::Table { times, values } => {
                let n = times.len();
                if t < times[0] || t >= times[n - 1] {
                    return 0.0;
                }
                let i = times.partition_point(|&x| x <= t).clamp(1, n - 1);
                (values[i] - values[i - 1]) / (times[i] - times[i - 1])
            }
        }
    }

    /// Largest `|du/dt|` on `[t0, t1]`, sampled on a fine uniform grid.
    ///
    /// Tables are exact (largest slope of any segment overlapping the interval). Jumps of
    /// a constant pulse have no finite slope and are ignored.
    pub fn max_slope(&self, t0: f64, t1: f64) -> f64 {
        if let ControlPulse::Table { times, values } = self {
            return times
                .windows(2)
                .zip(values.windows(2))
                .filter(|(t, _)| t[1] >= t0 && t[0] <= t1)
                .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
                .fold(0.0, f64::max);
        }
        const SAMPLES: usize = 20_000;
        (0..=SAMPLES)
            .map(|i| self.derivative(t0 + (t1 - t0) * i as f64 / SAMPLES as f64).abs())
            .fold(0.0, f64::max)
    }
}
