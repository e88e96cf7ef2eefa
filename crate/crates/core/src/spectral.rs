//! FFT-backed differentiation and multipliers on a periodic grid.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers in FFT order.
    k: Vec<f64>,
}

impl Spectral {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("spectral grid needs a power of two N >= 2, got {n}"));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let dk = std::f64::consts::PI / half_width;
        let k = (0..n)
            .map(|j| if j < n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk })
            .collect();
        Ok(Spectral { n, fwd, inv, k })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform including the `1/N` normalisation.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }

    /// Applies the Fourier multiplier `m(k)` in place.
    pub fn apply(&self, buf: &mut [Complex64], m: impl Fn(f64) -> Complex64) {
        self.forward(buf);
        for (v, &k) in buf.iter_mut().zip(&self.k) {
            *v *= m(k);
        }
        self.inverse(buf);
    }

    pub fn derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut buf = u.to_vec();
        let nyq = self.n / 2;
        self.forward(&mut buf);
        for (j, v) in buf.iter_mut().enumerate() {
            *v *= if j == nyq { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, self.k[j]) };
        }
        self.inverse(&mut buf);
        buf
    }

    pub fn second_derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut buf = u.to_vec();
        self.apply(&mut buf, |k| Complex64::new(-k * k, 0.0));
        buf
    }
}
