//! Discrete complex fields on a periodic interval and on a star graph.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::fmt_g17;
use crate::spectral::Spectral;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform grid on `[-L, L)` with periodic wrap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub half_width: f64,
    pub n: usize,
    #[serde(default)]
    pub stagger: bool,
}

impl LineGrid {
    pub fn new(half_width: f64, n: usize, stagger: bool) -> Result<Self> {
        let g = LineGrid { half_width, n, stagger };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return invalid(format!("line half-width must be positive, got {}", self.half_width));
        }
        if self.n < 2 {
            return invalid(format!("line grid needs at least 2 nodes, got {}", self.n));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn x(&self, m: usize) -> f64 {
        let off = if self.stagger { 0.5 } else { 0.0 };
        -self.half_width + (m as f64 + off) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.x(m)).collect()
    }

    /// Index of the node at `x = 0`, if the grid has one.
    pub fn origin_index(&self) -> Option<usize> {
        (!self.stagger && self.n % 2 == 0).then_some(self.n / 2)
    }

    pub fn measure(&self) -> f64 {
        2.0 * self.half_width
    }

    /// Length of the part of node `m`'s cell lying in `|x| ≥ r`. Cells that
    /// cross `±L` are wrapped back into the domain.
    fn tail_weight(&self, m: usize, r: f64) -> f64 {
        let h = self.h();
        let (a, b) = (self.x(m) - h / 2.0, self.x(m) + h / 2.0);
        let l = self.half_width;
        let piece = |c: f64, d: f64| -> f64 {
            if r >= l {
                return 0.0;
            }
            (d.min(-r) - c).max(0.0) + (d - c.max(r)).max(0.0)
        };
        if a < -l {
            piece(a + 2.0 * l, l) + piece(-l, b)
        } else if b > l {
            piece(a, l) + piece(-l, b - 2.0 * l)
        } else {
            piece(a, b)
        }
    }
}

/// `J` half-lines of length `Ledge` glued at `x = 0`.
///
/// Each edge stores nodes `x_k = k h` for `k < M`; the far node `x_M = Ledge`
/// is a homogeneous Dirichlet node and is not stored. With `shared_vertex`
/// all edges carry the same value at `k = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphGrid {
    pub edges: usize,
    pub edge_length: f64,
    pub m: usize,
    #[serde(default = "default_true")]
    pub shared_vertex: bool,
}

fn default_true() -> bool {
    true
}

impl GraphGrid {
    pub fn new(edges: usize, edge_length: f64, m: usize, shared_vertex: bool) -> Result<Self> {
        let g = GraphGrid { edges, edge_length, m, shared_vertex };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges < 1 {
            return invalid("star graph needs at least one edge");
        }
        if !(self.edge_length > 0.0) || !self.edge_length.is_finite() {
            return invalid(format!("edge length must be positive, got {}", self.edge_length));
        }
        if self.m < 3 {
            return invalid(format!("graph grid needs at least 3 nodes per edge, got {}", self.m));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.edge_length / self.m as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        k as f64 * self.h()
    }

    pub fn measure(&self) -> f64 {
        self.edges as f64 * self.edge_length
    }

    /// Trapezoid weight of node `k` on one edge.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 {
            self.h() / 2.0
        } else {
            self.h()
        }
    }

    fn tail_weight(&self, k: usize, r: f64) -> f64 {
        let h = self.h();
        let (a, b) = if k == 0 { (0.0, h / 2.0) } else { (self.x(k) - h / 2.0, self.x(k) + h / 2.0) };
        (b - a.max(r)).max(0.0)
    }
}

/// Either kind of grid, as written in scenario files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GridSpec {
    Line(LineGrid),
    Graph(GraphGrid),
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GridSpec::Line(g) => g.validate(),
            GridSpec::Graph(g) => g.validate(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureKind {
    PeriodicRectangle,
    Trapezoid,
    EdgeSumTrapezoid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineField {
    pub grid: LineGrid,
    pub values: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphField {
    pub grid: GraphGrid,
    /// `values[j][k]` for edge `j`, node `k < M`.
    pub values: Vec<Vec<Complex64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Line(LineField),
    Graph(GraphField),
}

fn check_finite<'a>(vals: impl IntoIterator<Item = &'a Complex64>) -> Result<()> {
    if vals.into_iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("field contains non-finite values".into()))
    }
}

impl LineField {
    pub fn new(grid: LineGrid, values: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n {
            return Err(Error::ShapeMismatch(format!("{} values for {} nodes", values.len(), grid.n)));
        }
        check_finite(&values)?;
        Ok(LineField { grid, values })
    }

    pub fn zeros(grid: LineGrid) -> Self {
        LineField { grid, values: vec![ZERO; grid.n] }
    }

    pub fn sample(grid: LineGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        grid.validate()?;
        let values: Vec<Complex64> = (0..grid.n).map(|m| f(grid.x(m))).collect();
        check_finite(&values).map_err(|_| Error::NonFinite("sampled expression is not finite on the grid".into()))?;
        Ok(LineField { grid, values })
    }

    pub fn sample_real(grid: LineGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::sample(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn quadrature(&self) -> QuadratureKind {
        QuadratureKind::PeriodicRectangle
    }

    pub fn integrate(&self, f: impl Fn(f64, Complex64) -> f64) -> f64 {
        let h = self.grid.h();
        self.values.iter().enumerate().map(|(m, &u)| f(self.grid.x(m), u)).sum::<f64>() * h
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_check(p)?;
        if p.is_infinite() {
            return Ok(self.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        Ok(self.integrate(|_, u| u.norm().powf(p)).powf(1.0 / p))
    }

    pub fn derivative(&self) -> Result<LineField> {
        let sp = Spectral::new(self.grid.n, self.grid.half_width)?;
        Ok(LineField { grid: self.grid, values: sp.derivative(&self.values) })
    }

    /// `(Σ_m w_m(R) |u_m|²)^{1/2}` with `w_m(R)` the part of node `m`'s cell in `|x| ≥ R`.
    pub fn tail_mass(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return invalid(format!("tail radius must be >= 0, got {r}"));
        }
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(m, u)| self.grid.tail_weight(m, r) * u.norm_sqr())
            .sum();
        Ok(s.sqrt())
    }

    /// Per-node weights of the region `|x| ≥ R`.
    pub fn tail_weights(&self, r: f64) -> Vec<f64> {
        (0..self.grid.n).map(|m| self.grid.tail_weight(m, r)).collect()
    }

    pub fn scale(&self, c: Complex64) -> LineField {
        LineField { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "x,re,im")?;
        for (m, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{}", fmt_g17(self.grid.x(m)), fmt_g17(v.re), fmt_g17(v.im))?;
        }
        Ok(())
    }

    /// Reads a field written by [`LineField::write_csv`], inferring the grid.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let rows = read_rows(input, &["x", "re", "im"])?;
        if rows.len() < 2 {
            return Err(Error::Parse("line field CSV needs at least two rows".into()));
        }
        let n = rows.len();
        let h = rows[1][0] - rows[0][0];
        let half_width = h * n as f64 / 2.0;
        let stagger = ((rows[0][0] + half_width) / h - 0.5).abs() < 1e-6;
        let grid = LineGrid::new(half_width, n, stagger)?;
        for (m, r) in rows.iter().enumerate() {
            if (r[0] - grid.x(m)).abs() > 1e-9 * half_width {
                return Err(Error::Parse(format!("row {} is off the uniform grid", m + 2)));
            }
        }
        LineField::new(grid, rows.iter().map(|r| Complex64::new(r[1], r[2])).collect())
    }
}

impl GraphField {
    pub fn new(grid: GraphGrid, values: Vec<Vec<Complex64>>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.edges || values.iter().any(|e| e.len() != grid.m) {
            return Err(Error::ShapeMismatch(format!("graph values do not match {} edges x {} nodes", grid.edges, grid.m)));
        }
        check_finite(values.iter().flatten())?;
        if grid.shared_vertex && values.iter().any(|e| e[0] != values[0][0]) {
            return invalid("edges disagree at the shared vertex");
        }
        Ok(GraphField { grid, values })
    }

    pub fn zeros(grid: GraphGrid) -> Self {
        GraphField { grid, values: vec![vec![ZERO; grid.m]; grid.edges] }
    }

    /// Samples `f(edge, x)`. With a shared vertex every edge must agree at `x = 0`.
    pub fn sample(grid: GraphGrid, f: impl Fn(usize, f64) -> Complex64) -> Result<Self> {
        grid.validate()?;
        let values: Vec<Vec<Complex64>> =
            (0..grid.edges).map(|j| (0..grid.m).map(|k| f(j, grid.x(k))).collect()).collect();
        check_finite(values.iter().flatten())
            .map_err(|_| Error::NonFinite("sampled expression is not finite on the graph".into()))?;
        if grid.shared_vertex {
            let v0 = values[0][0];
            let scale = v0.norm().max(1.0);
            if values.iter().any(|e| (e[0] - v0).norm() > 1e-12 * scale) {
                return invalid("sampled edges disagree at the shared vertex");
            }
            let mut values = values;
            values.iter_mut().for_each(|e| e[0] = v0);
            return Ok(GraphField { grid, values });
        }
        Ok(GraphField { grid, values })
    }

    pub fn vertex_value(&self) -> Option<Complex64> {
        self.grid.shared_vertex.then(|| self.values[0][0])
    }

    pub fn quadrature(&self) -> QuadratureKind {
        if self.grid.edges == 1 {
            QuadratureKind::Trapezoid
        } else {
            QuadratureKind::EdgeSumTrapezoid
        }
    }

    pub fn integrate(&self, f: impl Fn(usize, f64, Complex64) -> f64) -> f64 {
        let g = &self.grid;
        self.values
            .iter()
            .enumerate()
            .map(|(j, e)| e.iter().enumerate().map(|(k, &u)| g.weight(k) * f(j, g.x(k), u)).sum::<f64>())
            .sum()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_check(p)?;
        if p.is_infinite() {
            return Ok(self.values.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max));
        }
        Ok(self.integrate(|_, _, u| u.norm().powf(p)).powf(1.0 / p))
    }

    /// Second-order finite differences; one-sided at the vertex, `u_M = 0` at the far end.
    pub fn derivative(&self) -> Result<GraphField> {
        self.grid.validate()?;
        let h = self.grid.h();
        let m = self.grid.m;
        let values = self
            .values
            .iter()
            .map(|e| {
                let at = |k: usize| if k < m { e[k] } else { ZERO };
                (0..m)
                    .map(|k| {
                        if k == 0 {
                            (-3.0 * e[0] + 4.0 * e[1] - e[2]) / (2.0 * h)
                        } else {
                            (at(k + 1) - e[k - 1]) / (2.0 * h)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(GraphField { grid: GraphGrid { shared_vertex: false, ..self.grid }, values })
    }

    pub fn tail_mass(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return invalid(format!("tail radius must be >= 0, got {r}"));
        }
        let g = &self.grid;
        let s: f64 = self
            .values
            .iter()
            .flat_map(|e| e.iter().enumerate())
            .map(|(k, u)| g.tail_weight(k, r) * u.norm_sqr())
            .sum();
        Ok(s.sqrt())
    }

    pub fn scale(&self, c: Complex64) -> GraphField {
        GraphField { grid: self.grid, values: self.values.iter().map(|e| e.iter().map(|v| v * c).collect()).collect() }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "edge,x,re,im")?;
        for (j, e) in self.values.iter().enumerate() {
            for (k, v) in e.iter().enumerate() {
                writeln!(out, "{},{},{},{}", j, fmt_g17(self.grid.x(k)), fmt_g17(v.re), fmt_g17(v.im))?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, shared_vertex: bool) -> Result<Self> {
        let rows = read_rows(input, &["edge", "x", "re", "im"])?;
        let edges = rows.iter().map(|r| r[0] as usize).max().map_or(0, |e| e + 1);
        if edges == 0 {
            return Err(Error::Parse("graph field CSV has no rows".into()));
        }
        let mut values = vec![Vec::new(); edges];
        let mut xs = Vec::new();
        for r in &rows {
            let j = r[0] as usize;
            if j == 0 {
                xs.push(r[1]);
            }
            values[j].push(Complex64::new(r[2], r[3]));
        }
        if xs.len() < 3 {
            return Err(Error::Parse("graph field CSV needs at least 3 nodes per edge".into()));
        }
        let m = xs.len();
        let h = xs[1] - xs[0];
        let grid = GraphGrid::new(edges, h * m as f64, m, shared_vertex)?;
        GraphField::new(grid, values)
    }
}

fn lp_check(p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return invalid(format!("L^p norm needs p >= 1, got {p}"));
    }
    Ok(())
}

fn read_rows<R: BufRead>(input: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))??;
    let cols: Vec<&str> = first.trim().split(',').collect();
    if cols != header {
        return Err(Error::Parse(format!("expected header {}, found {}", header.join(","), first.trim())));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.trim().split(',').map(str::parse::<f64>).collect();
        let row = row.map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!("line {}: expected {} columns", i + 2, header.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

impl Field {
    pub fn grid(&self) -> GridSpec {
        match self {
            Field::Line(f) => GridSpec::Line(f.grid),
            Field::Graph(f) => GridSpec::Graph(f.grid),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Field::Line(f) => f.values.iter().all(|v| v.re.is_finite() && v.im.is_finite()),
            Field::Graph(f) => f.values.iter().flatten().all(|v| v.re.is_finite() && v.im.is_finite()),
        }
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        match self {
            Field::Line(f) => f.lp_norm(p),
            Field::Graph(f) => f.lp_norm(p),
        }
    }

    pub fn derivative(&self) -> Result<Field> {
        Ok(match self {
            Field::Line(f) => Field::Line(f.derivative()?),
            Field::Graph(f) => Field::Graph(f.derivative()?),
        })
    }

    pub fn tail_mass(&self, r: f64) -> Result<f64> {
        match self {
            Field::Line(f) => f.tail_mass(r),
            Field::Graph(f) => f.tail_mass(r),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.lp_norm(f64::INFINITY).expect("p = inf is valid")
    }

    pub fn scale(&self, c: Complex64) -> Field {
        match self {
            Field::Line(f) => Field::Line(f.scale(c)),
            Field::Graph(f) => Field::Graph(f.scale(c)),
        }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        match self {
            Field::Line(f) => f.write_csv(out),
            Field::Graph(f) => f.write_csv(out),
        }
    }

    pub fn as_line(&self) -> Option<&LineField> {
        match self {
            Field::Line(f) => Some(f),
            Field::Graph(_) => None,
        }
    }

    pub fn as_graph(&self) -> Option<&GraphField> {
        match self {
            Field::Graph(f) => Some(f),
            Field::Line(_) => None,
        }
    }
}

impl From<LineField> for Field {
    fn from(f: LineField) -> Self {
        Field::Line(f)
    }
}

impl From<GraphField> for Field {
    fn from(f: GraphField) -> Self {
        Field::Graph(f)
    }
}
