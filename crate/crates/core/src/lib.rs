//! Localized virial identities, weight certification and blow-up
//! experiments for the one-dimensional quintic NLS
//! `i u_t + u_xx - V u = -|u|⁴u` on the line and on star graphs.

pub mod cli;
pub mod error;
pub mod evolve;
pub mod field;
pub mod form;
pub mod functionals;
pub mod io;
pub mod model;
pub mod scenario;
pub mod soliton;
pub mod spectral;
pub mod virial;
pub mod weight;

pub use error::{Error, Result};
pub use field::{Field, GraphField, GraphGrid, GridSpec, LineField, LineGrid};
pub use model::{ModelSpec, ModelVariant, VertexCondition};
pub use scenario::{InitialData, RadiusSpec, Scenario};
