//! P1 finite elements with lumped mass on a star graph.
//!
//! The delta line is the two-edge star: edge 0 is `x ≥ 0`, edge 1 is
//! `x ≤ 0` read outward, the vertex is the node at `x = 0` and the periodic
//! end node `x = -L` is a Dirichlet node.
//!
//! Unknowns are flattened as: with a shared vertex, index 0 is the vertex
//! and node `k ≥ 1` of edge `j` sits at `1 + j(M-1) + k-1`; without one,
//! node `k` of edge `j` sits at `jM + k`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::field::{GraphField, GraphGrid, LineField, LineGrid};
use crate::model::{ModelSpec, ModelVariant, VertexCondition};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct FormLayout {
    pub grid: GraphGrid,
}

/// One P1 cell: node indices and endpoint coordinates. `b = None` is the
/// Dirichlet node at the far end of an edge.
#[derive(Clone, Copy, Debug)]
pub struct Cell {
    pub a: usize,
    pub b: Option<usize>,
    pub xa: f64,
    pub xb: f64,
}

impl FormLayout {
    pub fn new(grid: GraphGrid) -> Result<Self> {
        grid.validate()?;
        Ok(FormLayout { grid })
    }

    pub fn len(&self) -> usize {
        let g = &self.grid;
        if g.shared_vertex {
            1 + g.edges * (g.m - 1)
        } else {
            g.edges * g.m
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, j: usize, k: usize) -> usize {
        let g = &self.grid;
        if g.shared_vertex {
            if k == 0 {
                0
            } else {
                1 + j * (g.m - 1) + (k - 1)
            }
        } else {
            j * g.m + k
        }
    }

    /// Lumped masses, `h` per interior node and `h/2` per edge end at the vertex.
    pub fn masses(&self) -> Vec<f64> {
        let g = &self.grid;
        let h = g.h();
        let mut m = vec![h; self.len()];
        for j in 0..g.edges {
            m[self.index(j, 0)] = if g.shared_vertex { g.edges as f64 * h / 2.0 } else { h / 2.0 };
        }
        m
    }

    /// Coordinate along its edge of every unknown.
    pub fn coords(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut x = vec![0.0; self.len()];
        for j in 0..g.edges {
            for k in 0..g.m {
                x[self.index(j, k)] = g.x(k);
            }
        }
        x
    }

    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.edges * g.m);
        for j in 0..g.edges {
            for k in 0..g.m {
                let b = (k + 1 < g.m).then(|| self.index(j, k + 1));
                out.push(Cell { a: self.index(j, k), b, xa: g.x(k), xb: g.x(k + 1) });
            }
        }
        out
    }

    /// Indices of the vertex-end unknowns of each edge.
    pub fn vertex_indices(&self) -> Vec<usize> {
        (0..self.grid.edges).map(|j| self.index(j, 0)).collect()
    }

    pub fn flatten(&self, f: &GraphField) -> Result<Vec<Complex64>> {
        if f.grid != self.grid {
            return Err(Error::ShapeMismatch("field grid differs from the form layout".into()));
        }
        let mut u = vec![ZERO; self.len()];
        for (j, e) in f.values.iter().enumerate() {
            for (k, &v) in e.iter().enumerate() {
                u[self.index(j, k)] = v;
            }
        }
        Ok(u)
    }

    pub fn unflatten(&self, u: &[Complex64]) -> GraphField {
        let g = self.grid;
        let values = (0..g.edges).map(|j| (0..g.m).map(|k| u[self.index(j, k)]).collect()).collect();
        GraphField { grid: g, values }
    }
}

/// The two-edge star matching a non-staggered line grid.
pub fn delta_graph_grid(line: &LineGrid) -> Result<GraphGrid> {
    if line.stagger || line.n % 2 != 0 || line.n < 6 {
        return invalid("delta model needs an unstaggered line grid with an even node count >= 6");
    }
    GraphGrid::new(2, line.half_width, line.n / 2, true)
}

/// Folds a line field onto the two-edge star. The node at `x = -L` is dropped.
pub fn line_to_graph(f: &LineField) -> Result<GraphField> {
    let grid = delta_graph_grid(&f.grid)?;
    let c = f.grid.n / 2;
    let right = (0..grid.m).map(|k| f.values[c + k]).collect();
    let left = (0..grid.m).map(|k| f.values[c - k]).collect();
    Ok(GraphField { grid, values: vec![right, left] })
}

pub fn graph_to_line(g: &GraphField, line: LineGrid) -> LineField {
    let c = line.n / 2;
    let mut values = vec![ZERO; line.n];
    for k in 0..g.grid.m {
        values[c + k] = g.values[0][k];
        if k > 0 {
            values[c - k] = g.values[1][k];
        }
    }
    LineField { grid: line, values }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VertexTerm {
    None,
    /// `γ|u_v|²` on a shared vertex.
    Point(f64),
    /// `(1/γ)|Σ_j u_j(0)|²` on separate vertex ends.
    RankOne(f64),
}

impl VertexTerm {
    pub fn for_model(model: &ModelSpec) -> Result<Self> {
        match &model.variant {
            ModelVariant::Delta { gamma } => Ok(VertexTerm::Point(*gamma)),
            ModelVariant::Graph { vertex } => match vertex {
                VertexCondition::Kirchhoff => Ok(VertexTerm::None),
                VertexCondition::DiracDelta { gamma } => Ok(VertexTerm::Point(*gamma)),
                VertexCondition::DeltaPrime { gamma } => {
                    if *gamma == 0.0 {
                        invalid("delta-prime coupling must be nonzero")
                    } else {
                        Ok(VertexTerm::RankOne(1.0 / gamma))
                    }
                }
                VertexCondition::General { .. } => {
                    invalid("general vertex matrices are not supported by the form discretisation")
                }
            },
            _ => invalid(format!("{} model has no graph form", model.label())),
        }
    }

    /// The vertex functional `P` evaluated on flattened unknowns.
    pub fn value(&self, layout: &FormLayout, u: &[Complex64]) -> f64 {
        match *self {
            VertexTerm::None => 0.0,
            VertexTerm::Point(g) => g * u[0].norm_sqr(),
            VertexTerm::RankOne(c) => {
                let s: Complex64 = layout.vertex_indices().iter().map(|&i| u[i]).sum();
                c * s.norm_sqr()
            }
        }
    }
}

/// Stiffness `K` (quadratic form `∫|u'|² + P`) and lumped mass `M`.
#[derive(Clone, Debug)]
pub struct FormOperator {
    pub layout: FormLayout,
    pub vertex: VertexTerm,
    pub masses: Vec<f64>,
}

impl FormOperator {
    pub fn new(grid: GraphGrid, vertex: VertexTerm) -> Result<Self> {
        let layout = FormLayout::new(grid)?;
        match vertex {
            VertexTerm::Point(_) | VertexTerm::None if !grid.shared_vertex => {
                return invalid("continuity-type vertex conditions need a shared vertex");
            }
            VertexTerm::RankOne(_) if grid.shared_vertex => {
                return invalid("delta-prime condition needs independent vertex values");
            }
            _ => {}
        }
        let masses = layout.masses();
        Ok(FormOperator { layout, vertex, masses })
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.layout.grid.h()
    }

    pub fn apply_k(&self, u: &[Complex64]) -> Vec<Complex64> {
        let h = self.h();
        let mut out = vec![ZERO; u.len()];
        for c in self.layout.cells() {
            let ub = c.b.map_or(ZERO, |b| u[b]);
            let d = (u[c.a] - ub) / h;
            out[c.a] += d;
            if let Some(b) = c.b {
                out[b] -= d;
            }
        }
        match self.vertex {
            VertexTerm::None => {}
            VertexTerm::Point(g) => out[0] += g * u[0],
            VertexTerm::RankOne(c) => {
                let idx = self.layout.vertex_indices();
                let s: Complex64 = idx.iter().map(|&i| u[i]).sum();
                for i in idx {
                    out[i] += c * s;
                }
            }
        }
        out
    }

    /// `⟨Ku, u⟩ = Σ_cells |Δu|²/h + P(u)`.
    pub fn quadratic_form(&self, u: &[Complex64]) -> f64 {
        let h = self.h();
        let kin: f64 = self
            .layout
            .cells()
            .iter()
            .map(|c| (u[c.a] - c.b.map_or(ZERO, |b| u[b])).norm_sqr() / h)
            .sum();
        kin + self.vertex.value(&self.layout, u)
    }

    /// Solves `(αM + βK) x = b`.
    pub fn solve_shifted(&self, alpha: Complex64, beta: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.len() {
            return Err(Error::ShapeMismatch("right-hand side length".into()));
        }
        let g = self.layout.grid;
        let h = g.h();
        let off = -beta / h;
        let interior = alpha * h + beta * (2.0 / h);
        if g.shared_vertex {
            let n = g.m - 1;
            let diag = vec![interior; n];
            let mut x = vec![ZERO; self.len()];
            // chain solves for the data and for the coupling column
            let mut z_dot = ZERO;
            let mut y_dot = ZERO;
            let mut ys = Vec::with_capacity(g.edges);
            let mut e1 = vec![ZERO; n];
            e1[0] = off;
            let z = thomas(&diag, off, &e1)?;
            for j in 0..g.edges {
                let start = 1 + j * n;
                let y = thomas(&diag, off, &b[start..start + n])?;
                y_dot += off * y[0];
                z_dot += off * z[0];
                ys.push(y);
            }
            let mut d0 = alpha * self.masses[0] + beta * (g.edges as f64 / h);
            if let VertexTerm::Point(gamma) = self.vertex {
                d0 += beta * gamma;
            }
            let schur = d0 - z_dot;
            if schur.norm() == 0.0 || !schur.re.is_finite() {
                return Err(Error::Solve("singular vertex Schur complement".into()));
            }
            let x0 = (b[0] - y_dot) / schur;
            x[0] = x0;
            for (j, y) in ys.iter().enumerate() {
                let start = 1 + j * n;
                for k in 0..n {
                    x[start + k] = y[k] - z[k] * x0;
                }
            }
            Ok(x)
        } else {
            let n = g.m;
            let mut diag = vec![interior; n];
            diag[0] = alpha * (h / 2.0) + beta * (1.0 / h);
            let mut x = vec![ZERO; self.len()];
            let mut e0 = vec![ZERO; n];
            e0[0] = Complex64::new(1.0, 0.0);
            let w = thomas(&diag, off, &e0)?;
            for j in 0..g.edges {
                let y = thomas(&diag, off, &b[j * n..(j + 1) * n])?;
                x[j * n..(j + 1) * n].copy_from_slice(&y);
            }
            if let VertexTerm::RankOne(c) = self.vertex {
                // Sherman–Morrison for the rank-one vertex coupling βc e eᵀ
                let idx = self.layout.vertex_indices();
                let ety: Complex64 = idx.iter().map(|&i| x[i]).sum();
                let etw = w[0] * g.edges as f64;
                let denom = 1.0 + beta * c * etw;
                if denom.norm() == 0.0 {
                    return Err(Error::Solve("singular rank-one update".into()));
                }
                let factor = beta * c * ety / denom;
                for j in 0..g.edges {
                    for k in 0..n {
                        x[j * n + k] -= w[k] * factor;
                    }
                }
            }
            Ok(x)
        }
    }

    /// One Cayley step `(M + i dt/2 K) u⁺ = (M - i dt/2 K) u`.
    pub fn cayley(&self, u: &[Complex64], dt: f64) -> Result<Vec<Complex64>> {
        let half = Complex64::new(0.0, dt / 2.0);
        let ku = self.apply_k(u);
        let rhs: Vec<Complex64> = u.iter().zip(&ku).zip(&self.masses).map(|((v, k), m)| m * v - half * k).collect();
        self.solve_shifted(Complex64::new(1.0, 0.0), half, &rhs)
    }
}

/// Thomas algorithm for a symmetric tridiagonal system with constant off-diagonal.
fn thomas(diag: &[Complex64], off: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let mut c = vec![ZERO; n];
    let mut d = vec![ZERO; n];
    let mut denom = diag[0];
    for i in 0..n {
        if i > 0 {
            denom = diag[i] - off * c[i - 1];
        }
        if denom.norm() == 0.0 || !denom.re.is_finite() || !denom.im.is_finite() {
            return Err(Error::Solve(format!("zero pivot at row {i}")));
        }
        c[i] = off / denom;
        d[i] = if i == 0 { rhs[0] / denom } else { (rhs[i] - off * d[i - 1]) / denom };
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}
