//! Strang splitting around a Crank–Nicolson (Cayley) step for the delta and
//! graph models.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::field::{Field, GridSpec, LineGrid};
use crate::form::{delta_graph_grid, graph_to_line, line_to_graph, FormOperator, VertexTerm};
use crate::model::{ModelSpec, ModelVariant};

/// Assembled quadratic form plus what is needed to map fields in and out.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub op: FormOperator,
    /// The line grid for delta models, which are stored as line fields.
    pub line: Option<LineGrid>,
    pub nonlinearity_on: bool,
}

pub fn assemble_hamiltonian(grid: &GridSpec, model: &ModelSpec) -> Result<Hamiltonian> {
    model.validate()?;
    let vertex = VertexTerm::for_model(model)?;
    match (grid, &model.variant) {
        (GridSpec::Line(lg), ModelVariant::Delta { .. }) => Ok(Hamiltonian {
            op: FormOperator::new(delta_graph_grid(lg)?, vertex)?,
            line: Some(*lg),
            nonlinearity_on: model.nonlinearity_on,
        }),
        (GridSpec::Graph(gg), ModelVariant::Graph { vertex: vc }) => {
            vc.validate(gg.edges)?;
            if gg.shared_vertex != vc.has_shared_vertex() {
                return Err(Error::ShapeMismatch("graph vertex layout does not match the vertex condition".into()));
            }
            Ok(Hamiltonian { op: FormOperator::new(*gg, vertex)?, line: None, nonlinearity_on: model.nonlinearity_on })
        }
        _ => Err(Error::ShapeMismatch(format!("{} model cannot be assembled on this grid", model.label()))),
    }
}

impl Hamiltonian {
    pub fn to_unknowns(&self, f: &Field) -> Result<Vec<Complex64>> {
        match (f, self.line) {
            (Field::Line(lf), Some(lg)) if lf.grid == lg => self.op.layout.flatten(&line_to_graph(lf)?),
            (Field::Graph(g), None) => self.op.layout.flatten(g),
            _ => Err(Error::ShapeMismatch("field does not live on the assembled grid".into())),
        }
    }

    pub fn to_field(&self, u: &[Complex64]) -> Field {
        let g = self.op.layout.unflatten(u);
        match self.line {
            Some(lg) => Field::Line(graph_to_line(&g, lg)),
            None => Field::Graph(g),
        }
    }

    fn phase(&self, u: &mut [Complex64], tau: f64) {
        if !self.nonlinearity_on {
            return;
        }
        for v in u.iter_mut() {
            let a = v.norm_sqr();
            *v *= Complex64::from_polar(1.0, tau * a * a);
        }
    }

    /// Phase half-step, Cayley step, phase half-step; `dt` may be negative.
    pub fn step(&self, u: &mut Vec<Complex64>, dt: f64) -> Result<()> {
        self.phase(u, dt / 2.0);
        *u = self.op.cayley(u, dt)?;
        self.phase(u, dt / 2.0);
        Ok(())
    }

    /// Discrete `‖∂u‖₂`, the square root of the cell sum `Σ|Δu|²/h`.
    pub fn grad_norm(&self, u: &[Complex64]) -> f64 {
        let h = self.op.h();
        self.op
            .layout
            .cells()
            .iter()
            .map(|c| (u[c.a] - c.b.map_or(Complex64::new(0.0, 0.0), |b| u[b])).norm_sqr() / h)
            .sum::<f64>()
            .sqrt()
    }
}

pub fn step_cn(f: &Field, dt: f64, h: &Hamiltonian) -> Result<Field> {
    if !(dt > 0.0) || !dt.is_finite() {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let mut u = h.to_unknowns(f)?;
    h.step(&mut u, dt)?;
    Ok(h.to_field(&u))
}
