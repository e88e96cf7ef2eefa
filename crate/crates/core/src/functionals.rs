//! Mass, energies, vertex functionals and the localized virial quantities.
//!
//! Free and inverse-power models are evaluated spectrally on a [`LineField`].
//! Delta and graph models use the P1 form of [`crate::form`], so that every
//! functional is the one conserved (or differentiated exactly) by the
//! Cayley stepper.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{Field, GraphField, LineField, LineGrid};
use crate::form::{line_to_graph, FormOperator, VertexTerm};
use crate::model::{ModelSpec, ModelVariant, VertexCondition};
use crate::spectral::Spectral;
use crate::weight::{ScaledWeight, WeightProfile};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Cell averages `(γ/h)∫_cell |x|^{-μ} dx` of the inverse-power potential.
pub fn inverse_power_cell_average(grid: &LineGrid, gamma: f64, mu: f64) -> Vec<f64> {
    let h = grid.h();
    let anti = |x: f64| x.signum() * x.abs().powf(1.0 - mu) / (1.0 - mu);
    (0..grid.n)
        .map(|m| {
            let x = grid.x(m);
            gamma * (anti(x + h / 2.0) - anti(x - h / 2.0)) / h
        })
        .collect()
}

/// A field together with the discretisation its model prescribes.
pub(crate) enum Disc<'a> {
    Spectral { f: &'a LineField, sp: Spectral, potential: Option<(Vec<f64>, f64)> },
    Form { op: FormOperator, u: Vec<Complex64> },
}

impl<'a> Disc<'a> {
    pub(crate) fn new(f: &'a Field, model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        match (&model.variant, f) {
            (ModelVariant::Free, Field::Line(lf)) => {
                Ok(Disc::Spectral { f: lf, sp: Spectral::new(lf.grid.n, lf.grid.half_width)?, potential: None })
            }
            (ModelVariant::InversePower { gamma, mu }, Field::Line(lf)) => Ok(Disc::Spectral {
                f: lf,
                sp: Spectral::new(lf.grid.n, lf.grid.half_width)?,
                potential: Some((inverse_power_cell_average(&lf.grid, *gamma, *mu), *mu)),
            }),
            (ModelVariant::Delta { .. }, Field::Line(lf)) => {
                let g = line_to_graph(lf)?;
                Self::form(&g, model)
            }
            (ModelVariant::Graph { vertex }, Field::Graph(g)) => {
                if g.grid.shared_vertex != vertex.has_shared_vertex() {
                    return Err(Error::ShapeMismatch("graph field vertex layout does not match the vertex condition".into()));
                }
                Self::form(g, model)
            }
            _ => Err(Error::ShapeMismatch(format!("{} model does not act on this field", model.label()))),
        }
    }

    fn form(g: &GraphField, model: &ModelSpec) -> Result<Self> {
        let op = FormOperator::new(g.grid, VertexTerm::for_model(model)?)?;
        let u = op.layout.flatten(g)?;
        Ok(Disc::Form { op, u })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// `½‖∂u‖²`
    pub kinetic: f64,
    /// `½∫V|u|²` or `½P(u)`
    pub potential: f64,
    /// `(1/6)‖u‖₆⁶`, zero when the nonlinearity is off
    pub sextic: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential - self.sextic
    }

    pub fn free_total(&self) -> f64 {
        self.kinetic - self.sextic
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VirialTerms {
    /// `4∫w''|∂u|²`
    pub kinetic: f64,
    /// `(4/3)∫w''|u|⁶`
    pub sextic: f64,
    /// `-∫w''''|u|²`
    pub fourth: f64,
    /// potential or vertex contribution
    pub model_term: f64,
}

impl VirialTerms {
    pub fn total(&self) -> f64 {
        self.kinetic - self.sextic + self.fourth + self.model_term
    }

    pub fn free_total(&self) -> f64 {
        self.kinetic - self.sextic + self.fourth
    }
}

pub fn mass(f: &Field) -> f64 {
    f.lp_norm(2.0).expect("p = 2 is valid").powi(2)
}

pub fn energy(f: &Field, model: &ModelSpec) -> Result<f64> {
    Ok(energy_terms(f, model)?.total())
}

pub fn energy_terms(f: &Field, model: &ModelSpec) -> Result<EnergyTerms> {
    let nl = if model.nonlinearity_on { 1.0 } else { 0.0 };
    Ok(match Disc::new(f, model)? {
        Disc::Spectral { f, sp, potential } => {
            let h = f.grid.h();
            let du = sp.derivative(&f.values);
            let kinetic = 0.5 * h * du.iter().map(|v| v.norm_sqr()).sum::<f64>();
            let sextic = nl * h / 6.0 * f.values.iter().map(|v| v.norm_sqr().powi(3)).sum::<f64>();
            let potential = potential.map_or(0.0, |(vbar, _)| {
                0.5 * h * vbar.iter().zip(&f.values).map(|(v, u)| v * u.norm_sqr()).sum::<f64>()
            });
            EnergyTerms { kinetic, potential, sextic }
        }
        Disc::Form { op, u } => form_energy(&op, &u, nl),
    })
}

pub(crate) fn form_energy(op: &FormOperator, u: &[Complex64], nl: f64) -> EnergyTerms {
    let h = op.h();
    let kinetic = 0.5
        * op.layout.cells().iter().map(|c| (u[c.a] - c.b.map_or(ZERO, |b| u[b])).norm_sqr()).sum::<f64>()
        / h;
    let potential = 0.5 * op.vertex.value(&op.layout, u);
    let sextic = nl / 6.0 * u.iter().zip(&op.masses).map(|(v, m)| m * v.norm_sqr().powi(3)).sum::<f64>();
    EnergyTerms { kinetic, potential, sextic }
}

/// `P(f)`: zero for Kirchhoff, `γ|f₁(0)|²` for the Dirac delta and
/// `(1/γ)|Σ_j f_j(0)|²` for δ′.
pub fn p_functional(f: &GraphField, vc: &VertexCondition) -> Result<f64> {
    match vc {
        VertexCondition::Kirchhoff => Ok(0.0),
        VertexCondition::DiracDelta { gamma } => Ok(gamma * f.values[0][0].norm_sqr()),
        VertexCondition::DeltaPrime { gamma } => {
            if *gamma == 0.0 {
                return invalid("delta-prime coupling must be nonzero");
            }
            let s: Complex64 = f.values.iter().map(|e| e[0]).sum();
            Ok(s.norm_sqr() / gamma)
        }
        VertexCondition::General { .. } => invalid("the vertex functional is not defined for general vertex matrices"),
    }
}

fn weight(r: f64) -> Result<ScaledWeight<'static>> {
    WeightProfile::standard().scaled(r)
}

/// `∫ 𝒳_R |f|²`, edge-summed on graphs.
pub fn virial_i(f: &Field, r: f64) -> Result<f64> {
    let w = weight(r)?;
    Ok(match f {
        Field::Line(lf) => lf.integrate(|x, u| w.value(x) * u.norm_sqr()),
        Field::Graph(g) => g.integrate(|_, x, u| w.value(x) * u.norm_sqr()),
    })
}

/// `2 Im ∫ 𝒳_R' f̄ ∂f` with the field's own derivative.
pub fn virial_i_prime(f: &Field, r: f64) -> Result<f64> {
    let w = weight(r)?;
    let df = f.derivative()?;
    Ok(match (f, &df) {
        (Field::Line(lf), Field::Line(d)) => {
            let h = lf.grid.h();
            2.0 * h
                * lf.values.iter().zip(&d.values).enumerate().map(|(m, (u, du))| w.first(lf.grid.x(m)) * (u.conj() * du).im).sum::<f64>()
        }
        (Field::Graph(g), Field::Graph(d)) => {
            let gi = g.grid;
            2.0 * g
                .values
                .iter()
                .zip(&d.values)
                .map(|(e, de)| {
                    e.iter().zip(de).enumerate().map(|(k, (u, du))| gi.weight(k) * w.first(gi.x(k)) * (u.conj() * du).im).sum::<f64>()
                })
                .sum::<f64>()
        }
        _ => unreachable!("derivative preserves the field kind"),
    })
}

/// `I'` in the discretisation of `model`; for form models this is the exact
/// time derivative of the discrete `I` along the semi-discrete flow.
pub fn virial_i_prime_model(f: &Field, r: f64, model: &ModelSpec) -> Result<f64> {
    let w = weight(r)?;
    match Disc::new(f, model)? {
        Disc::Spectral { .. } => virial_i_prime(f, r),
        Disc::Form { op, u } => {
            let h = op.h();
            Ok(2.0
                * op.layout
                    .cells()
                    .iter()
                    .map(|c| {
                        let ub = c.b.map_or(ZERO, |b| u[b]);
                        (w.value(c.xb) - w.value(c.xa)) / h * (u[c.a].conj() * ub).im
                    })
                    .sum::<f64>())
        }
    }
}

pub fn virial_rhs(f: &Field, r: f64, model: &ModelSpec) -> Result<f64> {
    Ok(virial_terms(f, r, model)?.total())
}

pub fn virial_terms(f: &Field, r: f64, model: &ModelSpec) -> Result<VirialTerms> {
    let w = weight(r)?;
    let nl = if model.nonlinearity_on { 1.0 } else { 0.0 };
    Ok(match Disc::new(f, model)? {
        Disc::Spectral { f, sp, potential } => {
            let h = f.grid.h();
            let du = sp.derivative(&f.values);
            let d2u = sp.second_derivative(&f.values);
            let (mut kin, mut sex, mut fourth, mut pot) = (0.0, 0.0, 0.0, 0.0);
            for m in 0..f.grid.n {
                let x = f.grid.x(m);
                let w2 = w.second(x);
                let u = f.values[m];
                let d = du[m].norm_sqr();
                kin += w2 * d;
                sex += w2 * u.norm_sqr().powi(3);
                // -∫w''''|u|² = -∫w''(|u|²)''
                fourth -= w2 * (2.0 * (u.conj() * d2u[m]).re + 2.0 * d);
                if let Some((vbar, mu)) = &potential {
                    pot += 2.0 * mu * w.first_over_x(x) * vbar[m] * u.norm_sqr();
                }
            }
            VirialTerms { kinetic: 4.0 * h * kin, sextic: nl * 4.0 / 3.0 * h * sex, fourth: h * fourth, model_term: h * pot }
        }
        Disc::Form { op, u } => {
            let h = op.h();
            let (mut kin, mut fourth) = (0.0, 0.0);
            for c in op.layout.cells() {
                let ub = c.b.map_or(ZERO, |b| u[b]);
                let mid = 0.5 * (c.xa + c.xb);
                kin += w.second(mid) * (u[c.a] - ub).norm_sqr() / h;
                // -∫w''''|u|² = ∫w'''(|u|²)' since w'''(0) = 0
                fourth += w.third(mid) * (ub.norm_sqr() - u[c.a].norm_sqr());
            }
            let coords = op.layout.coords();
            let sex: f64 = u.iter().zip(&op.masses).zip(&coords).map(|((v, m), x)| m * w.second(*x) * v.norm_sqr().powi(3)).sum();
            let model_term = 2.0 * w.second(0.0) * op.vertex.value(&op.layout, &u);
            VirialTerms { kinetic: 4.0 * kin, sextic: nl * 4.0 / 3.0 * sex, fourth, model_term }
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    pub passed: bool,
    /// `max_m (-R𝒳'(x_m/R)V'(x_m) - 4V(x_m))`; the condition asks for `≤ 0`.
    pub worst_value: f64,
    pub worst_node: usize,
    pub worst_x: f64,
}

/// Checks `-R𝒳'(x/R)V'(x) - 4V(x) ≤ 0` at every node of `grid`.
pub fn check_potential_condition(grid: &LineGrid, v: &[f64], vp: &[f64], r: f64) -> Result<PotentialReport> {
    if v.len() != grid.n || vp.len() != grid.n {
        return Err(Error::ShapeMismatch(format!("potential tables have lengths {}, {} for {} nodes", v.len(), vp.len(), grid.n)));
    }
    let w = weight(r)?;
    let mut worst = (f64::NEG_INFINITY, 0);
    for m in 0..grid.n {
        let val = -w.first(grid.x(m)) * vp[m] - 4.0 * v[m];
        if val > worst.0 || val.is_nan() {
            worst = (val, m);
        }
    }
    Ok(PotentialReport { passed: worst.0 <= 0.0, worst_value: worst.0, worst_node: worst.1, worst_x: grid.x(worst.1) })
}

/// Both sides of `‖fg‖²_{L∞(|x|≥R)} ≤ ‖f‖_{L²(|x|≥R)}(2‖g²∂f‖_{L²(|x|≥R)} + ‖f∂(g²)‖_{L²(|x|≥R)})`.
pub fn ogawa_tsutsumi_bound(f: &LineField, g: &LineField, r: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return invalid(format!("R must be positive, got {r}"));
    }
    if f.grid != g.grid {
        return Err(Error::ShapeMismatch("f and g live on different grids".into()));
    }
    if g.values.iter().any(|v| v.im != 0.0) {
        return invalid("g must be real-valued");
    }
    let sp = Spectral::new(f.grid.n, f.grid.half_width)?;
    let df = sp.derivative(&f.values);
    let g2: Vec<Complex64> = g.values.iter().map(|v| Complex64::new(v.re * v.re, 0.0)).collect();
    let dg2 = sp.derivative(&g2);
    let tw = f.tail_weights(r);
    let norm = |it: &mut dyn Iterator<Item = f64>| -> f64 { it.zip(&tw).map(|(a, w)| w * a).sum::<f64>().sqrt() };
    let lhs = (0..f.grid.n)
        .filter(|&m| f.grid.x(m).abs() >= r)
        .map(|m| (f.values[m] * g.values[m].re).norm_sqr())
        .fold(0.0, f64::max);
    let nf = norm(&mut f.values.iter().map(|v| v.norm_sqr()));
    let a = norm(&mut df.iter().zip(&g2).map(|(d, q)| (d * q.re).norm_sqr()));
    let b = norm(&mut f.values.iter().zip(&dg2).map(|(v, d)| (v * d.re).norm_sqr()));
    Ok((lhs, nf * (2.0 * a + b)))
}
