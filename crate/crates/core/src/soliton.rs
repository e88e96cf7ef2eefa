//! The quintic soliton, scaled initial data and a ground-state solver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolve::{assemble_hamiltonian, Hamiltonian};
use crate::field::{Field, GraphField, GraphGrid, GridSpec, LineField, LineGrid};
use crate::functionals::{energy, inverse_power_cell_average, mass};
use crate::model::{ModelSpec, ModelVariant};
use crate::spectral::Spectral;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonSpec {
    pub omega: f64,
    pub lambda: f64,
}

impl SolitonSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return invalid(format!("omega must be positive, got {}", self.omega));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return invalid(format!("lambda must be positive, got {}", self.lambda));
        }
        Ok(())
    }
}

/// `Q_ω(x) = (3ω)^{1/4} sech^{1/2}(2√ω x)`, solving `Q'' - ωQ + Q⁵ = 0`.
pub fn exact_q(omega: f64, x: f64) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return invalid(format!("omega must be positive, got {omega}"));
    }
    let y = (2.0 * omega.sqrt() * x).abs();
    // sech^{1/2}(y) = (2e^{-y}/(1+e^{-2y}))^{1/2}, stable for large y
    let e = (-y).exp();
    Ok((3.0 * omega).powf(0.25) * (2.0 * e / (1.0 + e * e)).sqrt())
}

/// `λ Q_ω` sampled on a line grid.
pub fn scaled_data(lambda: f64, omega: f64, grid: &LineGrid) -> Result<LineField> {
    SolitonSpec { omega, lambda }.validate()?;
    LineField::sample_real(*grid, |x| lambda * exact_q(omega, x).expect("omega checked"))
}

/// `λ Q_ω` restricted to every edge of a star graph.
pub fn scaled_graph_data(lambda: f64, omega: f64, grid: &GraphGrid) -> Result<GraphField> {
    SolitonSpec { omega, lambda }.validate()?;
    GraphField::sample(*grid, |_, x| Complex64::new(lambda * exact_q(omega, x).expect("omega checked"), 0.0))
}

pub fn center_of_mass(f: &LineField) -> f64 {
    let m = f.integrate(|_, u| u.norm_sqr());
    if m == 0.0 {
        return 0.0;
    }
    f.integrate(|x, u| x * u.norm_sqr()) / m
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub field: Field,
    pub omega: f64,
    /// `‖(H + ω)φ - |φ|⁴φ‖₂ / ‖φ‖₂`
    pub residual: f64,
    pub iterations: usize,
    pub mass: f64,
    pub energy: f64,
    /// Measured `φ'(0+) - φ'(0-)` and `γφ(0)` for delta models.
    pub vertex_jump: Option<(f64, f64)>,
}

/// `A = H + ω` in one of the two discretisations.
enum ShiftedOp {
    Spectral { sp: Spectral, grid: LineGrid, potential: Vec<f64>, omega: f64 },
    Form { ham: Hamiltonian, omega: f64 },
}

impl ShiftedOp {
    fn new(model: &ModelSpec, omega: f64, grid: &GridSpec) -> Result<Self> {
        model.validate()?;
        match (&model.variant, grid) {
            (ModelVariant::Free, GridSpec::Line(g)) | (ModelVariant::InversePower { .. }, GridSpec::Line(g)) => {
                let potential = match model.variant {
                    ModelVariant::InversePower { gamma, mu } => inverse_power_cell_average(g, gamma, mu),
                    _ => vec![0.0; g.n],
                };
                Ok(ShiftedOp::Spectral { sp: Spectral::new(g.n, g.half_width)?, grid: *g, potential, omega })
            }
            (ModelVariant::Free, _) | (ModelVariant::InversePower { .. }, _) => {
                Err(Error::ShapeMismatch(format!("{} ground states live on a line grid", model.label())))
            }
            _ => Ok(ShiftedOp::Form { ham: assemble_hamiltonian(grid, model)?, omega }),
        }
    }

    fn initial_guess(&self) -> Vec<Complex64> {
        let amp = |omega: f64, x: f64| Complex64::new((3.0 * omega).powf(0.25) * (-omega * x * x).exp(), 0.0);
        match self {
            ShiftedOp::Spectral { grid, omega, .. } => grid.nodes().iter().map(|&x| amp(*omega, x)).collect(),
            ShiftedOp::Form { ham, omega } => ham.op.layout.coords().iter().map(|&x| amp(*omega, x)).collect(),
        }
    }

    /// Quadrature weights of the discrete inner product.
    fn weights(&self) -> Vec<f64> {
        match self {
            ShiftedOp::Spectral { grid, .. } => vec![grid.h(); grid.n],
            ShiftedOp::Form { ham, .. } => ham.op.masses.clone(),
        }
    }

    fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        match self {
            ShiftedOp::Spectral { sp, potential, omega, .. } => {
                let mut buf = u.to_vec();
                sp.apply(&mut buf, |k| Complex64::new(k * k, 0.0));
                buf.iter().zip(u).zip(potential).map(|((a, v), p)| a + (p + omega) * v).collect()
            }
            ShiftedOp::Form { ham, omega } => {
                let ku = ham.op.apply_k(u);
                ku.iter().zip(u).zip(&ham.op.masses).map(|((k, v), m)| k / m + omega * v).collect()
            }
        }
    }

    fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        match self {
            ShiftedOp::Spectral { sp, potential, omega, .. } => {
                let precond = |r: &[Complex64]| {
                    let mut z = r.to_vec();
                    sp.apply(&mut z, |k| Complex64::new(1.0 / (k * k + omega), 0.0));
                    z
                };
                if potential.iter().all(|p| *p == 0.0) {
                    return Ok(precond(b));
                }
                pcg(|x| self.apply(x), precond, b)
            }
            ShiftedOp::Form { ham, omega } => {
                let mb: Vec<Complex64> = b.iter().zip(&ham.op.masses).map(|(v, m)| v * m).collect();
                ham.op.solve_shifted(Complex64::new(*omega, 0.0), Complex64::new(1.0, 0.0), &mb)
            }
        }
    }

    fn to_field(&self, u: &[Complex64]) -> Field {
        match self {
            ShiftedOp::Spectral { grid, .. } => Field::Line(LineField { grid: *grid, values: u.to_vec() }),
            ShiftedOp::Form { ham, .. } => ham.to_field(u),
        }
    }
}

fn dot(w: &[f64], a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), m)| m * (x * y.conj()).re).sum()
}

/// Preconditioned conjugate gradients for a real symmetric positive operator.
fn pcg(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    precond: impl Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
) -> Result<Vec<Complex64>> {
    let ones = vec![1.0; b.len()];
    let bnorm = dot(&ones, b, b).sqrt();
    let mut x = precond(b);
    let ax = apply(&x);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&ones, &r, &z);
    for _ in 0..500 {
        if dot(&ones, &r, &r).sqrt() <= 1e-14 * bnorm.max(1e-300) {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = dot(&ones, &p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solve("shifted operator is not positive definite; increase omega".into()));
        }
        let alpha = rz / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r);
        let rz_new = dot(&ones, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    if dot(&ones, &r, &r).sqrt() <= 1e-10 * bnorm {
        Ok(x)
    } else {
        Err(Error::NoConvergence("conjugate gradients did not converge".into()))
    }
}

/// Petviashvili iteration `φ ← S^{5/4} A⁻¹(|φ|⁴φ)` with the stabilising
/// factor `S = ⟨Aφ, φ⟩ / ⟨|φ|⁴φ, φ⟩`; the fixed points solve
/// `(H + ω)φ = |φ|⁴φ`.
pub fn ground_state_flow(model: &ModelSpec, omega: f64, grid: &GridSpec, tol: f64) -> Result<GroundState> {
    ground_state_flow_with(model, omega, grid, tol, 3000)
}

pub fn ground_state_flow_with(model: &ModelSpec, omega: f64, grid: &GridSpec, tol: f64, max_iter: usize) -> Result<GroundState> {
    if !(omega > 0.0 && omega.is_finite()) {
        return invalid(format!("omega must be positive, got {omega}"));
    }
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    if !model.nonlinearity_on {
        return invalid("ground states need the nonlinearity");
    }
    if let ModelVariant::Graph { vertex } = &model.variant {
        if let crate::model::VertexCondition::General { .. } = vertex {
            return invalid("general vertex matrices have no form discretisation");
        }
    }
    let op = ShiftedOp::new(model, omega, grid)?;
    let w = op.weights();
    let mut phi = op.initial_guess();
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let nl: Vec<Complex64> = phi.iter().map(|v| v * v.norm_sqr().powi(2)).collect();
        let a_phi = op.apply(&phi);
        let norm = dot(&w, &phi, &phi).sqrt();
        let res: Vec<Complex64> = a_phi.iter().zip(&nl).map(|(a, b)| a - b).collect();
        residual = dot(&w, &res, &res).sqrt() / norm;
        if !residual.is_finite() || norm == 0.0 {
            break;
        }
        if residual < tol {
            return finish(&op, model, omega, phi, residual, it);
        }
        let s = dot(&w, &a_phi, &phi) / dot(&w, &nl, &phi);
        if !(s > 0.0) {
            return Err(Error::Solve(format!("H + omega is not positive on the iterate (omega = {omega}); increase omega")));
        }
        let next = op.solve(&nl)?;
        let f = s.powf(1.25);
        phi = next.iter().map(|v| v * f).collect();
    }
    Err(Error::NoConvergence(format!("ground state residual {residual:.3e} after {max_iter} iterations")))
}

/// One further iteration of the flow, used to confirm a fixed point.
pub fn flow_step(model: &ModelSpec, omega: f64, gs: &Field) -> Result<Field> {
    let op = ShiftedOp::new(model, omega, &gs.grid())?;
    let phi = match (&op, gs) {
        (ShiftedOp::Spectral { .. }, Field::Line(lf)) => lf.values.clone(),
        (ShiftedOp::Form { ham, .. }, f) => ham.to_unknowns(f)?,
        _ => return Err(Error::ShapeMismatch("profile does not match the model grid".into())),
    };
    let w = op.weights();
    let nl: Vec<Complex64> = phi.iter().map(|v| v * v.norm_sqr().powi(2)).collect();
    let s = dot(&w, &op.apply(&phi), &phi) / dot(&w, &nl, &phi);
    let next = op.solve(&nl)?;
    let f = s.powf(1.25);
    Ok(op.to_field(&next.iter().map(|v| v * f).collect::<Vec<_>>()))
}

fn finish(op: &ShiftedOp, model: &ModelSpec, omega: f64, phi: Vec<Complex64>, residual: f64, iterations: usize) -> Result<GroundState> {
    let field = op.to_field(&phi);
    let vertex_jump = match (&model.variant, &field) {
        (ModelVariant::Delta { gamma }, Field::Line(lf)) => {
            let c = lf.grid.n / 2;
            let h = lf.grid.h();
            let v = &lf.values;
            let jump = (v[c + 1].re + v[c - 1].re - 2.0 * v[c].re) / h;
            Some((jump, gamma * v[c].re))
        }
        _ => None,
    };
    Ok(GroundState {
        mass: mass(&field),
        energy: energy(&field, model)?,
        field,
        omega,
        residual,
        iterations,
        vertex_jump,
    })
}

/// `‖ |u| - |φ| ‖₂ / ‖φ‖₂` between two fields on one grid.
pub fn modulus_distance(u: &Field, phi: &Field) -> Result<f64> {
    let diff = match (u, phi) {
        (Field::Line(a), Field::Line(b)) if a.grid == b.grid => Field::Line(LineField {
            grid: a.grid,
            values: a.values.iter().zip(&b.values).map(|(x, y)| Complex64::new(x.norm() - y.norm(), 0.0)).collect(),
        }),
        (Field::Graph(a), Field::Graph(b)) if a.grid == b.grid => Field::Graph(GraphField {
            grid: a.grid,
            values: a
                .values
                .iter()
                .zip(&b.values)
                .map(|(e, f)| e.iter().zip(f).map(|(x, y)| Complex64::new(x.norm() - y.norm(), 0.0)).collect())
                .collect(),
        }),
        _ => return Err(Error::ShapeMismatch("fields live on different grids".into())),
    };
    Ok(diff.lp_norm(2.0)? / phi.lp_norm(2.0)?)
}
