//! Time integration with adaptive steps and blow-up detection.

mod cayley;
mod splitstep;

pub use cayley::{assemble_hamiltonian, step_cn, Hamiltonian};
pub use splitstep::{step_splitstep, SplitStep};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{Field, LineField};
use crate::functionals::{energy, mass};
use crate::model::ModelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_max: f64,
    /// Largest accepted phase `dt·max(|u|⁴ + |V|)` per step.
    pub phase_tol: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Snapshot spacing in time; overrides the stride when set.
    #[serde(default)]
    pub snapshot_dt: Option<f64>,
    #[serde(default = "default_grad_factor")]
    pub grad_blowup_factor: f64,
    #[serde(default = "default_amp_cap")]
    pub amp_cap: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
}

fn default_stride() -> usize {
    100
}
fn default_grad_factor() -> f64 {
    10.0
}
fn default_amp_cap() -> f64 {
    1e6
}
fn default_dt_min() -> f64 {
    1e-12
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt_init: 1e-4,
            dt_max: 1e-3,
            phase_tol: 1e-3,
            t_end: 1.0,
            snapshot_stride: default_stride(),
            snapshot_dt: None,
            grad_blowup_factor: default_grad_factor(),
            amp_cap: default_amp_cap(),
            dt_min: default_dt_min(),
        }
    }
}

impl SolverConfig {
    /// Constant steps of size `dt` up to `t_end`.
    pub fn fixed(dt: f64, t_end: f64) -> Self {
        SolverConfig { dt_init: dt, dt_max: dt, phase_tol: f64::INFINITY, t_end, ..Default::default() }
    }

    pub fn with_snapshot_dt(mut self, dt: f64) -> Self {
        self.snapshot_dt = Some(dt);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && !v.is_nan();
        if !(pos(self.dt_min) && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max && self.dt_max.is_finite()) {
            return invalid("solver steps must satisfy 0 < dt_min <= dt_init <= dt_max < inf");
        }
        if !pos(self.phase_tol) {
            return invalid("phase_tol must be positive");
        }
        if !(pos(self.t_end) && self.t_end.is_finite()) {
            return invalid("t_end must be positive and finite");
        }
        if self.snapshot_stride < 1 {
            return invalid("snapshot_stride must be >= 1");
        }
        if let Some(s) = self.snapshot_dt {
            if !(pos(s) && s.is_finite()) {
                return invalid("snapshot_dt must be positive");
            }
        }
        if !(self.grad_blowup_factor > 1.0 && self.amp_cap > 1.0) {
            return invalid("blow-up factors must exceed 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowupDetected,
    Aborted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    GradientGrowth,
    AmplitudeCap,
    DtUnderflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupVerdict {
    pub status: RunStatus,
    pub t_detect: Option<f64>,
    pub trigger: Option<Trigger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl BlowupVerdict {
    fn completed() -> Self {
        BlowupVerdict { status: RunStatus::Completed, t_detect: None, trigger: None, diagnostic: None }
    }

    fn blowup(t: f64, trigger: Trigger) -> Self {
        BlowupVerdict { status: RunStatus::BlowupDetected, t_detect: Some(t), trigger: Some(trigger), diagnostic: None }
    }

    fn aborted(msg: String) -> Self {
        BlowupVerdict { status: RunStatus::Aborted, t_detect: None, trigger: None, diagnostic: Some(msg) }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub model: ModelSpec,
    pub config: SolverConfig,
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub mass_series: Vec<f64>,
    pub energy_series: Vec<f64>,
    pub grad_series: Vec<f64>,
    pub verdict: BlowupVerdict,
    pub steps: usize,
}

/// The integrator matching a model, acting on flat unknowns.
pub enum Stepper {
    Spectral(SplitStep),
    Form(Hamiltonian),
}

impl Stepper {
    pub fn new(u0: &Field, model: &ModelSpec) -> Result<Self> {
        if model.is_spectral() {
            match u0 {
                Field::Line(lf) => Ok(Stepper::Spectral(SplitStep::new(lf.grid, model)?)),
                Field::Graph(_) => Err(Error::ShapeMismatch(format!("{} model runs on a line grid", model.label()))),
            }
        } else {
            Ok(Stepper::Form(assemble_hamiltonian(&u0.grid(), model)?))
        }
    }

    pub fn to_unknowns(&self, f: &Field) -> Result<Vec<Complex64>> {
        match (self, f) {
            (Stepper::Spectral(s), Field::Line(lf)) if lf.grid == s.grid => Ok(lf.values.clone()),
            (Stepper::Spectral(_), _) => Err(Error::ShapeMismatch("field does not match the split-step grid".into())),
            (Stepper::Form(h), f) => h.to_unknowns(f),
        }
    }

    pub fn to_field(&self, u: &[Complex64]) -> Field {
        match self {
            Stepper::Spectral(s) => Field::Line(LineField { grid: s.grid, values: u.to_vec() }),
            Stepper::Form(h) => h.to_field(u),
        }
    }

    pub fn step(&mut self, u: &mut Vec<Complex64>, dt: f64) -> Result<()> {
        match self {
            Stepper::Spectral(s) => {
                s.step(u, dt);
                Ok(())
            }
            Stepper::Form(h) => h.step(u, dt),
        }
    }

    pub fn grad_norm(&self, u: &[Complex64]) -> f64 {
        match self {
            Stepper::Spectral(s) => s.grad_norm(u),
            Stepper::Form(h) => h.grad_norm(u),
        }
    }

    /// `max(|u|⁴ + |V|)`, the phase rate that limits the step.
    pub fn phase_rate(&self, u: &[Complex64]) -> f64 {
        let (nl, pot) = match self {
            Stepper::Spectral(s) => (s.nonlinearity(), s.max_potential()),
            Stepper::Form(h) => (if h.nonlinearity_on { 1.0 } else { 0.0 }, 0.0),
        };
        let amp4 = u.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max).powi(2);
        nl * amp4 + pot
    }
}

fn unclamped_dt(cfg: &SolverConfig, rate: f64) -> f64 {
    if rate > 0.0 {
        cfg.dt_max.min(cfg.phase_tol / rate)
    } else {
        cfg.dt_max
    }
}

struct Recorder<'a> {
    traj: Trajectory,
    model: &'a ModelSpec,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, f: Field, grad: f64) -> Result<()> {
        self.traj.mass_series.push(mass(&f));
        self.traj.energy_series.push(energy(&f, self.model)?);
        self.traj.grad_series.push(grad);
        self.traj.times.push(t);
        self.traj.snapshots.push(f);
        Ok(())
    }
}

/// Integrates `u0` under `model` until `t_end` or a blow-up trigger fires.
pub fn run(u0: &Field, model: &ModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut stepper = Stepper::new(u0, model)?;
    let mut u = stepper.to_unknowns(u0)?;
    let grad0 = stepper.grad_norm(&u);
    let mut rec = Recorder {
        traj: Trajectory {
            model: model.clone(),
            config: cfg.clone(),
            times: Vec::new(),
            snapshots: Vec::new(),
            mass_series: Vec::new(),
            energy_series: Vec::new(),
            grad_series: Vec::new(),
            verdict: BlowupVerdict::completed(),
            steps: 0,
        },
        model,
    };
    rec.push(0.0, stepper.to_field(&u), grad0)?;

    let mut t = 0.0;
    let mut steps = 0usize;
    let mut next_snap = 1usize;
    let mut recorded_last = true;
    let verdict = loop {
        if t >= cfg.t_end {
            break BlowupVerdict::completed();
        }
        let rate = stepper.phase_rate(&u);
        let mut dt = unclamped_dt(cfg, rate);
        if dt < cfg.dt_min {
            if !recorded_last {
                rec.push(t, stepper.to_field(&u), stepper.grad_norm(&u))?;
                recorded_last = true;
            }
            break BlowupVerdict::blowup(t, Trigger::DtUnderflow);
        }
        if steps == 0 {
            dt = dt.min(cfg.dt_init);
        }
        let target = match cfg.snapshot_dt {
            Some(sdt) => (next_snap as f64 * sdt).min(cfg.t_end),
            None => cfg.t_end,
        };
        let hits = t + dt >= target - 1e-9 * dt;
        if hits {
            dt = target - t;
        }
        if let Err(e) = stepper.step(&mut u, dt) {
            break BlowupVerdict::aborted(format!("step failed at t = {t}: {e}"));
        }
        steps += 1;
        t = if hits { target } else { t + dt };
        recorded_last = false;
        if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            break BlowupVerdict::aborted(format!("non-finite values at t = {t}"));
        }
        let amp = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let grad = stepper.grad_norm(&u);
        let trigger = if amp > cfg.amp_cap {
            Some(Trigger::AmplitudeCap)
        } else if grad > cfg.grad_blowup_factor * grad0 {
            Some(Trigger::GradientGrowth)
        } else {
            None
        };
        let snap_due = match cfg.snapshot_dt {
            Some(_) => hits,
            None => steps % cfg.snapshot_stride == 0,
        };
        if snap_due || trigger.is_some() || t >= cfg.t_end {
            rec.push(t, stepper.to_field(&u), grad)?;
            recorded_last = true;
            if cfg.snapshot_dt.is_some() && hits {
                next_snap += 1;
            }
        }
        if let Some(tr) = trigger {
            break BlowupVerdict::blowup(t, tr);
        }
    };
    if !recorded_last {
        rec.push(t, stepper.to_field(&u), stepper.grad_norm(&u))?;
    }
    let mut traj = rec.traj;
    traj.verdict = verdict;
    traj.steps = steps;
    Ok(traj)
}

/// Re-derives the blow-up verdict from the stored snapshots.
pub fn detect_blowup(traj: &Trajectory) -> Result<BlowupVerdict> {
    if traj.snapshots.is_empty() {
        return invalid("empty trajectory");
    }
    if traj.verdict.status == RunStatus::Aborted || traj.snapshots.iter().any(|f| !f.is_finite()) {
        let msg = traj.verdict.diagnostic.clone().unwrap_or_else(|| "non-finite snapshot".into());
        return Ok(BlowupVerdict::aborted(msg));
    }
    let cfg = &traj.config;
    let stepper = Stepper::new(&traj.snapshots[0], &traj.model)?;
    let grad0 = stepper.grad_norm(&stepper.to_unknowns(&traj.snapshots[0])?);
    let last = traj.snapshots.len() - 1;
    for (k, f) in traj.snapshots.iter().enumerate() {
        let u = stepper.to_unknowns(f)?;
        let t = traj.times[k];
        if f.max_abs() > cfg.amp_cap {
            return Ok(BlowupVerdict::blowup(t, Trigger::AmplitudeCap));
        }
        if stepper.grad_norm(&u) > cfg.grad_blowup_factor * grad0 {
            return Ok(BlowupVerdict::blowup(t, Trigger::GradientGrowth));
        }
        if k == last && t < cfg.t_end && unclamped_dt(cfg, stepper.phase_rate(&u)) < cfg.dt_min {
            return Ok(BlowupVerdict::blowup(t, Trigger::DtUnderflow));
        }
    }
    Ok(BlowupVerdict::completed())
}
