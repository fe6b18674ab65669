//! Perimeter-minimizing double bubbles on the real line with a symmetric,
//! strictly log-convex density.
//!
//! The pipeline: a [`DensityModel`] is parsed and validated, its asymptotic
//! slope `L` and doubling defect `M` are estimated ([`limits`]), the
//! equilibrium equations are solved ([`equilibrium`]), and [`bubbles`]
//! assembles the perimeter gap `μ = P₃ − P₂`, its large-volume limit, the
//! blowup time `V₀` and the tie function `λ`. [`oracle`] cross-checks the
//! double/triple dichotomy by brute force and [`phase`] produces sweeps.

pub mod bubbles;
pub mod density;
pub mod equilibrium;
pub mod error;
pub mod expr;
pub mod extended;
pub mod limits;
pub mod oracle;
pub mod phase;
pub mod quad;
pub mod roots;
pub mod settings;

pub use density::{Coordinate, DensityDefinition, DensityModel, ValidationReport};
pub use error::{Error, Result};
pub use extended::ExtendedReal;
pub use settings::Settings;
