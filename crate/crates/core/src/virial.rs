//! Virial reports along trajectories, the radius selection rule and the
//! quadratic envelope of `I`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolve::Trajectory;
use crate::field::Field;
use crate::functionals::{energy_terms, mass, virial_i, virial_i_prime_model, virial_terms};
use crate::io::fmt_g17;
use crate::model::ModelSpec;
use crate::weight::WeightProfile;

/// `(3/8)^{1/4}`, the tail-mass threshold below which the localized virial
/// bound holds.
pub fn a0() -> f64 {
    0.375f64.sqrt().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirialReport {
    pub r: f64,
    pub times: Vec<f64>,
    pub i: Vec<f64>,
    pub iprime_formula: Vec<f64>,
    /// Centered first difference of `I`, to cross-check the `I'` formula.
    pub iprime_fd: Vec<f64>,
    pub isecond_fd: Vec<f64>,
    pub rhs_formula: Vec<f64>,
    pub residual: Vec<f64>,
    pub tail_mass: Vec<f64>,
    pub ineq_checked: Vec<bool>,
    /// True where the bound holds or was not checked.
    pub ineq_satisfied: Vec<bool>,
    /// `(rhs - 16E) - (rhs_free - 16E_free)`, the model's sign correction.
    pub correction: Vec<f64>,
    pub eta: f64,
    pub eta_tilde: f64,
    pub energy0: f64,
    pub mass0: f64,
    pub i0: f64,
    pub iprime0: f64,
    pub max_residual: f64,
    pub violations: usize,
    pub sign_violations: usize,
    pub envelope_root: Option<f64>,
}

const SIGN_SLACK: f64 = 1e-9;

/// Builds the virial report on the uniformly spaced snapshots of `traj`.
/// A trailing off-grid detection snapshot is ignored.
pub fn report(traj: &Trajectory, r: f64, model: &ModelSpec) -> Result<VirialReport> {
    if !(r > 0.0) || !r.is_finite() {
        return invalid(format!("R must be positive, got {r}"));
    }
    let mut n = traj.snapshots.len();
    if n < 3 {
        return invalid(format!("virial report needs at least 3 snapshots, got {n}"));
    }
    let times = &traj.times;
    let delta = times[1] - times[0];
    if n > 3 && ((times[n - 1] - times[n - 2]) - delta).abs() > 1e-9 {
        n -= 1;
    }
    for k in 1..n {
        if ((times[k] - times[k - 1]) - delta).abs() > 1e-9 {
            return invalid(format!("snapshot spacing is not uniform at t = {}", times[k]));
        }
    }
    let snaps = &traj.snapshots[..n];
    let u0 = &snaps[0];
    let e0 = energy_terms(u0, model)?.total();
    let m0 = mass(u0);
    let eta = WeightProfile::standard().eta(r, m0)?;
    let eta_tilde = -8.0 * e0 - eta;
    let i_all: Vec<f64> = snaps.iter().map(|f| virial_i(f, r)).collect::<Result<_>>()?;
    let i0 = i_all[0];
    let iprime0 = virial_i_prime_model(u0, r, model)?;

    let mut rep = VirialReport {
        r,
        times: Vec::new(),
        i: Vec::new(),
        iprime_formula: Vec::new(),
        iprime_fd: Vec::new(),
        isecond_fd: Vec::new(),
        rhs_formula: Vec::new(),
        residual: Vec::new(),
        tail_mass: Vec::new(),
        ineq_checked: Vec::new(),
        ineq_satisfied: Vec::new(),
        correction: Vec::new(),
        eta,
        eta_tilde,
        energy0: e0,
        mass0: m0,
        i0,
        iprime0,
        max_residual: 0.0,
        violations: 0,
        sign_violations: 0,
        envelope_root: if eta_tilde > 0.0 { envelope(i0, iprime0, eta_tilde).ok() } else { None },
    };
    let a = a0();
    for k in 1..n - 1 {
        let f = &snaps[k];
        let terms = virial_terms(f, r, model)?;
        let en = energy_terms(f, model)?;
        let rhs = terms.total();
        let i2 = (i_all[k + 1] - 2.0 * i_all[k] + i_all[k - 1]) / (delta * delta);
        let tail = f.tail_mass(r)?;
        let checked = tail <= a;
        let e = en.total();
        let holds = rhs <= 16.0 * e + 2.0 * eta + 1e-6 * (1.0 + e.abs());
        let corr = (rhs - 16.0 * e) - (terms.free_total() - 16.0 * en.free_total());
        rep.times.push(times[k]);
        rep.i.push(i_all[k]);
        rep.iprime_formula.push(virial_i_prime_model(f, r, model)?);
        rep.iprime_fd.push((i_all[k + 1] - i_all[k - 1]) / (2.0 * delta));
        rep.isecond_fd.push(i2);
        rep.rhs_formula.push(rhs);
        rep.residual.push((i2 - rhs).abs());
        rep.tail_mass.push(tail);
        rep.ineq_checked.push(checked);
        rep.ineq_satisfied.push(!checked || holds);
        rep.correction.push(corr);
        if checked && !holds {
            rep.violations += 1;
        }
        if corr > SIGN_SLACK {
            rep.sign_violations += 1;
        }
    }
    rep.max_residual = rep.residual.iter().cloned().fold(0.0, f64::max);
    Ok(rep)
}

impl VirialReport {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,I,Iprime_formula,Isecond_fd,rhs,residual,tail_mass,checked,satisfied")?;
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                fmt_g17(self.times[k]),
                fmt_g17(self.i[k]),
                fmt_g17(self.iprime_formula[k]),
                fmt_g17(self.isecond_fd[k]),
                fmt_g17(self.rhs_formula[k]),
                fmt_g17(self.residual[k]),
                fmt_g17(self.tail_mass[k]),
                self.ineq_checked[k],
                self.ineq_satisfied[k]
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusChoice {
    pub r: f64,
    pub eta: f64,
    pub eta_tilde: f64,
    /// `(1/R)(∫𝒳_R|u₀|²)^{1/2}(1 + (4/η̃)‖∂u₀‖²)^{1/2}`
    pub lhs: f64,
    /// `a₀/2`
    pub bound: f64,
    pub tail_mass: f64,
}

impl RadiusChoice {
    pub fn eta_tilde_positive(&self) -> bool {
        self.eta_tilde > 0.0
    }

    pub fn smallness_holds(&self) -> bool {
        self.lhs <= self.bound
    }
}

/// Both clauses of the radius condition at `R`, or `None` when `η̃ ≤ 0`.
pub fn radius_clauses(u0: &Field, model: &ModelSpec, r: f64) -> Result<RadiusChoice> {
    let terms = energy_terms(u0, model)?;
    let e = terms.total();
    let m = mass(u0);
    let grad2 = 2.0 * terms.kinetic;
    let eta = WeightProfile::standard().eta(r, m)?;
    let eta_tilde = -8.0 * e - eta;
    let lhs = if eta_tilde > 0.0 {
        virial_i(u0, r)?.sqrt() / r * (1.0 + 4.0 / eta_tilde * grad2).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(RadiusChoice { r, eta, eta_tilde, lhs, bound: a0() / 2.0, tail_mass: u0.tail_mass(r)? })
}

/// Smallest `R = 2^j` satisfying `η̃ > 0` and the smallness condition.
pub fn find_r(u0: &Field, model: &ModelSpec) -> Result<RadiusChoice> {
    let t = energy_terms(u0, model)?;
    let e = t.total();
    // roundoff floor: E[Q] = 0 samples to about -1e-15 on fine grids
    let floor = 1e-10 * (t.kinetic.abs() + t.potential.abs() + t.sextic.abs());
    if !(e < -floor) {
        return Err(Error::Hypothesis(format!("negative energy E[u0] < 0 is required, got E = {e}")));
    }
    for j in 0..=60 {
        let r = 2f64.powi(j);
        let c = radius_clauses(u0, model, r)?;
        if c.eta_tilde_positive() && c.smallness_holds() {
            if c.tail_mass > c.bound {
                return Err(Error::Hypothesis(format!("tail mass {} exceeds a0/2 at R = {r}", c.tail_mass)));
            }
            return Ok(c);
        }
    }
    Err(Error::NotFound("no admissible R within 60 doublings".into()))
}

/// Positive root of `I₀ + I₀'t - η̃t²`.
pub fn envelope(i0: f64, i0prime: f64, eta_tilde: f64) -> Result<f64> {
    if !(eta_tilde > 0.0) {
        return invalid(format!("envelope needs eta_tilde > 0, got {eta_tilde}"));
    }
    if !(i0 >= 0.0) {
        return invalid(format!("envelope needs I(0) >= 0, got {i0}"));
    }
    Ok((i0prime + (i0prime * i0prime + 4.0 * eta_tilde * i0).sqrt()) / (2.0 * eta_tilde))
}
