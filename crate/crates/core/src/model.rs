//! Equation variants and star-graph vertex conditions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VertexCondition {
    Kirchhoff,
    DiracDelta { gamma: f64 },
    DeltaPrime { gamma: f64 },
    /// `A f(0) + B f'(0) = 0` with explicit `J x J` matrices.
    General { a: Vec<Vec<Complex64>>, b: Vec<Vec<Complex64>> },
}

impl VertexCondition {
    /// Boundary matrices `(A, B)` for `J` edges.
    pub fn matrices(&self, j: usize) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
        if j == 0 {
            return invalid("vertex condition needs J >= 1");
        }
        let one = Complex64::new(1.0, 0.0);
        let zero = DMatrix::<Complex64>::zeros(j, j);
        // rows 0..J-2 encode f_i - f_{i+1}
        let mut chain = zero.clone();
        for i in 0..j - 1 {
            chain[(i, i)] = one;
            chain[(i, i + 1)] = -one;
        }
        let mut sum_row = zero.clone();
        for c in 0..j {
            sum_row[(j - 1, c)] = one;
        }
        Ok(match self {
            VertexCondition::Kirchhoff => (chain, sum_row),
            VertexCondition::DiracDelta { gamma } => {
                let mut a = chain;
                a[(j - 1, 0)] = Complex64::new(-gamma, 0.0);
                (a, sum_row)
            }
            VertexCondition::DeltaPrime { gamma } => {
                let mut b = chain;
                b[(j - 1, 0)] = Complex64::new(-gamma, 0.0);
                (sum_row, b)
            }
            VertexCondition::General { a, b } => (to_matrix(a, j)?, to_matrix(b, j)?),
        })
    }

    /// Checks `rank(A, B) = J` and `AB*` self-adjoint to 1e-10.
    pub fn validate(&self, j: usize) -> Result<()> {
        match self {
            VertexCondition::DiracDelta { gamma } | VertexCondition::DeltaPrime { gamma } if !gamma.is_finite() => {
                return invalid(format!("vertex coupling must be finite, got {gamma}"));
            }
            VertexCondition::DeltaPrime { gamma } if *gamma == 0.0 => {
                return invalid("delta-prime coupling must be nonzero");
            }
            _ => {}
        }
        let (a, b) = self.matrices(j)?;
        let mut ab = DMatrix::<Complex64>::zeros(j, 2 * j);
        ab.view_mut((0, 0), (j, j)).copy_from(&a);
        ab.view_mut((0, j), (j, j)).copy_from(&b);
        let sv = ab.svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|s| **s > 1e-10 * smax.max(1.0)).count();
        if rank != j {
            return invalid(format!("(A, B) has rank {rank}, need {j}"));
        }
        let p = &a * b.adjoint();
        let skew = (&p - p.adjoint()).norm();
        if skew > 1e-10 * (1.0 + p.norm()) {
            return invalid(format!("A B* is not self-adjoint (defect {skew:.3e})"));
        }
        Ok(())
    }

    /// Whether the condition forces a single shared vertex value.
    pub fn has_shared_vertex(&self) -> bool {
        !matches!(self, VertexCondition::DeltaPrime { .. })
    }
}

fn to_matrix(rows: &[Vec<Complex64>], j: usize) -> Result<DMatrix<Complex64>> {
    if rows.len() != j || rows.iter().any(|r| r.len() != j) {
        return Err(Error::ShapeMismatch(format!("vertex matrix must be {j} x {j}")));
    }
    Ok(DMatrix::from_fn(j, j, |r, c| rows[r][c]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelVariant {
    Free,
    InversePower { gamma: f64, mu: f64 },
    Delta { gamma: f64 },
    Graph { vertex: VertexCondition },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub variant: ModelVariant,
    #[serde(default = "default_true")]
    pub nonlinearity_on: bool,
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    pub fn free() -> Self {
        ModelSpec { variant: ModelVariant::Free, nonlinearity_on: true }
    }

    pub fn inverse_power(gamma: f64, mu: f64) -> Self {
        ModelSpec { variant: ModelVariant::InversePower { gamma, mu }, nonlinearity_on: true }
    }

    pub fn delta(gamma: f64) -> Self {
        ModelSpec { variant: ModelVariant::Delta { gamma }, nonlinearity_on: true }
    }

    pub fn graph(vertex: VertexCondition) -> Self {
        ModelSpec { variant: ModelVariant::Graph { vertex }, nonlinearity_on: true }
    }

    pub fn linear(mut self) -> Self {
        self.nonlinearity_on = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.variant {
            ModelVariant::Free => Ok(()),
            ModelVariant::InversePower { gamma, mu } => {
                if !gamma.is_finite() {
                    return invalid("inverse-power coupling must be finite");
                }
                if !(*mu > 0.0 && *mu < 1.0) {
                    return invalid(format!("inverse-power exponent must lie in (0, 1), got {mu}"));
                }
                Ok(())
            }
            ModelVariant::Delta { gamma } => {
                if gamma.is_finite() {
                    Ok(())
                } else {
                    invalid("delta coupling must be finite")
                }
            }
            // J-dependent checks happen against the grid
            ModelVariant::Graph { vertex } => match vertex {
                VertexCondition::General { a, .. } => vertex.validate(a.len()),
                _ => vertex.validate(2),
            },
        }
    }

    /// True for models discretised by the spectral line scheme.
    pub fn is_spectral(&self) -> bool {
        matches!(self.variant, ModelVariant::Free | ModelVariant::InversePower { .. })
    }

    pub fn label(&self) -> &'static str {
        match self.variant {
            ModelVariant::Free => "free",
            ModelVariant::InversePower { .. } => "inverse_power",
            ModelVariant::Delta { .. } => "delta",
            ModelVariant::Graph { .. } => "graph",
        }
    }
}
