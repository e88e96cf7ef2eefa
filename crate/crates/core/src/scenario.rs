//! Experiment description files: model, grid, initial data, solver and
//! analysis settings in one JSON document.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::evolve::SolverConfig;
use crate::field::{Field, GraphField, GridSpec, LineField};
use crate::functionals::energy_terms;
use crate::model::{ModelSpec, ModelVariant, VertexCondition};
use crate::soliton::{ground_state_flow, scaled_data, scaled_graph_data, SolitonSpec};
use crate::virial::{find_r, radius_clauses, RadiusChoice};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `λ·Q_ω`, restricted to each edge on graphs.
    ScaledSoliton { lambda: f64, omega: f64 },
    /// `a·exp(-x²/(2σ²))`.
    Gaussian { a: f64, sigma: f64 },
    /// Gaussian times the model's leading local profile at the origin, so
    /// the data already satisfies the vertex or singularity matching.
    MatchedGaussian { a: f64, sigma: f64 },
    /// Profile from the ground-state solver for the scenario's model.
    GroundState {
        omega: f64,
        #[serde(default = "default_gs_tol")]
        tol: f64,
    },
    /// Field CSV, relative paths resolved against the scenario file.
    File { path: PathBuf },
}

fn default_gs_tol() -> f64 {
    1e-10
}

/// Localisation radius: a fixed value or the smallest admissible ladder value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadiusSpec {
    Auto,
    Value(f64),
}

impl Serialize for RadiusSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RadiusSpec::Auto => s.serialize_str("auto"),
            RadiusSpec::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for RadiusSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(RadiusSpec::Value(v)),
            Raw::Str(s) if s == "auto" => Ok(RadiusSpec::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("R must be a number or \"auto\", got {s:?}"))),
        }
    }
}

impl std::str::FromStr for RadiusSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(RadiusSpec::Auto);
        }
        let v: f64 = s.parse().map_err(|_| Error::Parse(format!("R must be a number or \"auto\", got {s:?}")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("R must be positive, got {v}")));
        }
        Ok(RadiusSpec::Value(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    #[serde(default = "default_r")]
    pub r: RadiusSpec,
    /// Snapshot spacing for the virial report; copied into the solver.
    #[serde(default)]
    pub snapshot_dt: Option<f64>,
}

fn default_r() -> RadiusSpec {
    RadiusSpec::Auto
}

impl Default for Analysis {
    fn default() -> Self {
        Analysis { r: RadiusSpec::Auto, snapshot_dt: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    pub initial_data: InitialData,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: Analysis,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Structural checks that need no field evaluation.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return invalid(format!("scenario name {:?} must be a non-empty file name", self.name));
        }
        self.model.validate()?;
        self.grid.validate()?;
        self.solver.validate()?;
        match (&self.model.variant, &self.grid) {
            (ModelVariant::Free | ModelVariant::InversePower { .. }, GridSpec::Line(g)) => {
                if !g.n.is_power_of_two() {
                    return invalid(format!("spectral models need a power-of-two node count, got {}", g.n));
                }
            }
            (ModelVariant::Delta { .. }, GridSpec::Line(g)) => {
                if g.stagger || g.n % 2 != 0 {
                    return invalid("delta model needs an unstaggered line grid with a node at 0");
                }
            }
            (ModelVariant::Graph { vertex }, GridSpec::Graph(g)) => {
                vertex.validate(g.edges)?;
                if g.shared_vertex != vertex.has_shared_vertex() {
                    return invalid("graph shared_vertex flag does not match the vertex condition");
                }
            }
            (_, _) => return invalid(format!("{} model does not match the grid type", self.model.label())),
        }
        match &self.initial_data {
            InitialData::ScaledSoliton { lambda, omega } => SolitonSpec { omega: *omega, lambda: *lambda }.validate()?,
            InitialData::Gaussian { a, sigma } | InitialData::MatchedGaussian { a, sigma } => {
                if !(a.is_finite() && *sigma > 0.0 && sigma.is_finite()) {
                    return invalid("gaussian needs finite a and sigma > 0");
                }
            }
            InitialData::GroundState { omega, tol } => {
                if !(*omega > 0.0 && *tol > 0.0) {
                    return invalid("ground_state needs omega > 0 and tol > 0");
                }
            }
            InitialData::File { .. } => {}
        }
        if let RadiusSpec::Value(r) = self.analysis.r {
            if !(r > 0.0 && r.is_finite()) {
                return invalid(format!("analysis R must be positive, got {r}"));
            }
        }
        if let Some(d) = self.analysis.snapshot_dt {
            if !(d > 0.0 && d.is_finite()) {
                return invalid("analysis snapshot_dt must be positive");
            }
        }
        Ok(())
    }

    /// Solver settings with the analysis snapshot spacing applied.
    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = self.solver.clone();
        if let Some(d) = self.analysis.snapshot_dt {
            cfg.snapshot_dt = Some(d);
        }
        cfg
    }

    /// Samples the initial field; `base` resolves relative file paths.
    pub fn initial_field(&self, base: &Path) -> Result<Field> {
        let field = match (&self.initial_data, &self.grid) {
            (InitialData::ScaledSoliton { lambda, omega }, GridSpec::Line(g)) => Field::Line(scaled_data(*lambda, *omega, g)?),
            (InitialData::ScaledSoliton { lambda, omega }, GridSpec::Graph(g)) => {
                Field::Graph(scaled_graph_data(*lambda, *omega, g)?)
            }
            (InitialData::Gaussian { a, sigma }, grid) => {
                let f = |x: f64| Complex64::new(a * (-x * x / (2.0 * sigma * sigma)).exp(), 0.0);
                match grid {
                    GridSpec::Line(g) => Field::Line(LineField::sample(*g, f)?),
                    GridSpec::Graph(g) => Field::Graph(GraphField::sample(*g, |_, x| f(x))?),
                }
            }
            (InitialData::MatchedGaussian { a, sigma }, grid) => {
                let m = local_profile(&self.model, &self.grid)?;
                let f = |x: f64| Complex64::new(a * (-x * x / (2.0 * sigma * sigma)).exp() * m(x), 0.0);
                match grid {
                    GridSpec::Line(g) => Field::Line(LineField::sample(*g, f)?),
                    GridSpec::Graph(g) => Field::Graph(GraphField::sample(*g, |_, x| f(x))?),
                }
            }
            (InitialData::GroundState { omega, tol }, grid) => ground_state_flow(&self.model, *omega, grid, *tol)?.field,
            (InitialData::File { path }, grid) => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                let rd = BufReader::new(File::open(&p).map_err(|e| Error::NotFound(format!("{}: {e}", p.display())))?);
                let f = match grid {
                    GridSpec::Line(_) => Field::Line(LineField::read_csv(rd)?),
                    GridSpec::Graph(g) => Field::Graph(GraphField::read_csv(rd, g.shared_vertex)?),
                };
                if f.grid() != *grid {
                    return Err(Error::ShapeMismatch(format!("{} does not match the scenario grid", p.display())));
                }
                f
            }
        };
        Ok(field)
    }

    /// Resolves the analysis radius; `auto` needs negative energy.
    pub fn radius(&self, u0: &Field) -> Result<RadiusChoice> {
        match self.analysis.r {
            RadiusSpec::Auto => {
                let e = energy_terms(u0, &self.model)?.total();
                find_r(u0, &self.model).map_err(|err| match err {
                    Error::Hypothesis(m) => Error::Hypothesis(format!("R = \"auto\" needs E < 0 (E = {e}): {m}")),
                    other => other,
                })
            }
            RadiusSpec::Value(r) => radius_clauses(u0, &self.model, r),
        }
    }
}

/// Leading behaviour near the origin of solutions of `-u'' + Vu = 0`:
/// `exp(γ|x|/2)` for the delta, `1 + γ|x|^{2-μ}/((2-μ)(1-μ))` for the
/// inverse power, `exp(γx/J)` on each edge for the graph delta.
fn local_profile(model: &ModelSpec, grid: &GridSpec) -> Result<Box<dyn Fn(f64) -> f64>> {
    Ok(match (&model.variant, grid) {
        (ModelVariant::Free, _) | (ModelVariant::Graph { vertex: VertexCondition::Kirchhoff }, _) => Box::new(|_| 1.0),
        (ModelVariant::Delta { gamma }, _) => {
            let g = *gamma;
            Box::new(move |x: f64| (g * x.abs() / 2.0).exp())
        }
        (ModelVariant::InversePower { gamma, mu }, _) => {
            let c = gamma / ((2.0 - mu) * (1.0 - mu));
            let p = 2.0 - mu;
            Box::new(move |x: f64| 1.0 + c * x.abs().powf(p))
        }
        (ModelVariant::Graph { vertex: VertexCondition::DiracDelta { gamma } }, GridSpec::Graph(g)) => {
            let k = gamma / g.edges as f64;
            Box::new(move |x: f64| (k * x).exp())
        }
        _ => return invalid(format!("matched_gaussian is not defined for the {} model", model.label())),
    })
}
