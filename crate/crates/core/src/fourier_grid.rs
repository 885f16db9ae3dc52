//! Periodic Fourier grid, the sinc-type cardinal functions and spectral operators.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{c64, Mat};
use rustfft::{Fft, FftPlanner};

use crate::error::{PvbError, Result};
use crate::linalg::ZERO;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierGrid {
    length: f64,
    n: usize,
    x0: f64,
}

impl FourierGrid {
    pub fn new(length: f64, n: usize, x0: f64) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(PvbError::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if n < 2 || n % 2 != 0 {
            return Err(PvbError::InvalidGrid(format!("point count must be even and >= 2, got {n}")));
        }
        let dx = length / n as f64;
        if !(0.0..dx).contains(&x0) {
            return Err(PvbError::InvalidGrid(format!("offset {x0} outside [0, {dx})")));
        }
        Ok(Self { length, n, x0 })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight of one sample.
    pub fn weight(&self) -> f64 {
        self.dx()
    }

    pub fn n_max(&self) -> usize {
        self.n / 2
    }

    /// Largest representable wavenumber, `pi N / L`.
    pub fn bandwidth(&self) -> f64 {
        PI * self.n as f64 / self.length
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn sample_points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x0 + self.dx() * j as f64).collect()
    }

    /// Integer frequency indices `-n_max+1 ..= n_max` in ascending order.
    pub fn frequency_indices(&self) -> Vec<i64> {
        let nm = self.n_max() as i64;
        ((-nm + 1)..=nm).collect()
    }

    pub fn k_values(&self) -> Vec<f64> {
        self.frequency_indices().iter().map(|&n| n as f64 * self.dk()).collect()
    }

    /// Position of frequency index `n` in the `k_values` ordering.
    pub fn k_slot(&self, n: i64) -> usize {
        (n + self.n_max() as i64 - 1) as usize
    }

    /// Slot in `k_values` order for FFT output bin `b`.
    pub fn bin_to_slot(&self, b: usize) -> usize {
        let n = if b <= self.n_max() { b as i64 } else { b as i64 - self.n as i64 };
        self.k_slot(n)
    }

    /// Map a coordinate onto the symmetric window `[-L/2, L/2)`.
    pub fn physical(&self, x: f64) -> f64 {
        let l = self.length;
        x - l * (x / l + 0.5).floor()
    }

    /// Physical coordinates of the sample points.
    pub fn physical_points(&self) -> Vec<f64> {
        self.sample_points().into_iter().map(|x| self.physical(x)).collect()
    }

    /// Cardinal function attached to sample `m`.
    pub fn theta(&self, m: usize, x: f64) -> c64 {
        let xm = self.x0 + self.dx() * m as f64;
        let y = x - xm;
        let phase = c64::from_polar(1.0, PI * y / self.length);
        phase * dirichlet(self.n, 2.0 * PI * y / self.length)
    }

    /// Band-limited interpolation from sample values.
    pub fn interpolate(&self, samples: &[c64], x: f64) -> c64 {
        samples.iter().enumerate().map(|(m, &s)| s * self.theta(m, x)).sum()
    }
}

/// `sin(N a / 2) / (N sin(a / 2))`, with the analytic limit at `a = 2 pi m`.
pub fn dirichlet(n: usize, alpha: f64) -> f64 {
    let half = 0.5 * alpha;
    let s = half.sin();
    if s.abs() < 1e-12 {
        let m = (alpha / (2.0 * PI)).round() as i64;
        return if (m * (n as i64 - 1)).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    }
    (n as f64 * half).sin() / (n as f64 * s)
}

pub fn collocation_project<F: Fn(f64) -> c64>(f: F, grid: &FourierGrid) -> Vec<c64> {
    grid.sample_points().into_iter().map(f).collect()
}

/// Applies operators that are diagonal in `k` through FFTs.
#[derive(Clone)]
pub struct SpectralApplier {
    grid: FourierGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralApplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralApplier").field("grid", &self.grid).finish()
    }
}

impl SpectralApplier {
    pub fn new(grid: &FourierGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid: *grid,
            forward: planner.plan_fft_forward(grid.n_points()),
            inverse: planner.plan_fft_inverse(grid.n_points()),
        }
    }

    /// In-place `psi <- F^-1 diag(f) F psi` with `f` given in `k_values` order.
    pub fn apply(&self, symbol: &[f64], psi: &mut [c64]) {
        let n = self.grid.n_points();
        assert_eq!(symbol.len(), n);
        assert_eq!(psi.len(), n);
        self.forward.process(psi);
        let scale = 1.0 / n as f64;
        for (b, z) in psi.iter_mut().enumerate() {
            *z *= symbol[self.grid.bin_to_slot(b)] * scale;
        }
        self.inverse.process(psi);
    }
}

/// Dense matrix of a `k`-diagonal operator on the sample points.
pub fn spectral_matrix(grid: &FourierGrid, symbol: &[f64]) -> Mat<c64> {
    let n = grid.n_points();
    let ns = grid.frequency_indices();
    // depends only on j - l
    let row: Vec<c64> = (0..n)
        .map(|d| {
            let mut acc = ZERO;
            for (slot, &fi) in ns.iter().enumerate() {
                let ang = 2.0 * PI * (fi * d as i64) as f64 / n as f64;
                acc += c64::from_polar(symbol[slot], ang);
            }
            acc / n as f64
        })
        .collect();
    Mat::from_fn(n, n, |j, l| row[(j + n - l) % n])
}

/// `k^2 / (2 m)` sampled in `k_values` order.
pub fn kinetic_symbol(grid: &FourierGrid, mass: f64) -> Vec<f64> {
    grid.k_values().iter().map(|k| k * k / (2.0 * mass)).collect()
}
