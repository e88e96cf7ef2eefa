//! Strang split-step Fourier integrator for line models.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::field::{LineField, LineGrid};
use crate::functionals::inverse_power_cell_average;
use crate::model::{ModelSpec, ModelVariant};
use crate::spectral::Spectral;

pub struct SplitStep {
    pub grid: LineGrid,
    sp: Spectral,
    potential: Vec<f64>,
    nl: f64,
    max_potential: f64,
    // cache of exp(-i k² dt) for the last dt
    multiplier: Vec<Complex64>,
    multiplier_dt: f64,
}

impl SplitStep {
    pub fn new(grid: LineGrid, model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let potential = match model.variant {
            ModelVariant::Free => vec![0.0; grid.n],
            ModelVariant::InversePower { gamma, mu } => inverse_power_cell_average(&grid, gamma, mu),
            _ => return invalid(format!("split-step integrates free and inverse-power models, not {}", model.label())),
        };
        let sp = Spectral::new(grid.n, grid.half_width)?;
        let max_potential = potential.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(SplitStep {
            grid,
            sp,
            potential,
            nl: if model.nonlinearity_on { 1.0 } else { 0.0 },
            max_potential,
            multiplier: Vec::new(),
            multiplier_dt: f64::NAN,
        })
    }

    pub fn max_potential(&self) -> f64 {
        self.max_potential
    }

    pub fn nonlinearity(&self) -> f64 {
        self.nl
    }

    fn phase(&self, u: &mut [Complex64], tau: f64) {
        for (v, pot) in u.iter_mut().zip(&self.potential) {
            let a = v.norm_sqr();
            let theta = tau * (self.nl * a * a - pot);
            *v *= Complex64::from_polar(1.0, theta);
        }
    }

    /// One Strang step; `dt` may be negative.
    pub fn step(&mut self, u: &mut [Complex64], dt: f64) {
        if self.multiplier_dt != dt {
            self.multiplier = self.sp.wavenumbers().iter().map(|k| Complex64::from_polar(1.0, -k * k * dt)).collect();
            self.multiplier_dt = dt;
        }
        self.phase(u, dt / 2.0);
        self.sp.forward(u);
        for (v, m) in u.iter_mut().zip(&self.multiplier) {
            *v *= m;
        }
        self.sp.inverse(u);
        self.phase(u, dt / 2.0);
    }

    /// `‖∂u‖₂` via the spectral derivative.
    pub fn grad_norm(&self, u: &[Complex64]) -> f64 {
        let du = self.sp.derivative(u);
        (self.grid.h() * du.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// One split-step of length `dt > 0` for the free or inverse-power model.
pub fn step_splitstep(f: &LineField, dt: f64, model: &ModelSpec) -> Result<LineField> {
    if !(dt > 0.0) || !dt.is_finite() {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let mut s = SplitStep::new(f.grid, model)?;
    let mut u = f.values.clone();
    s.step(&mut u, dt);
    if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("split-step produced non-finite values".into()));
    }
    Ok(LineField { grid: f.grid, values: u })
}
