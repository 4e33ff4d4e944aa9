//! Gradient-based shortest-path planning over NURBS paths.
//!
//! The planning loss is path length plus, for every obstacle the path
//! enters, the circumference of the obstacle's bounding sphere. Detouring
//! around an obstacle is always cheaper than crossing it, so minima of the
//! loss are collision-free shortest paths and no trade-off weight needs
//! tuning. A smooth upper bound of the collision term supplies gradients.
//!
//! Modules, bottom-up:
//! - [`geom`]: obstacles, signed distances, scenes.
//! - [`spline`]: anchored NURBS paths and sampling.
//! - [`autodiff`]: scalar reverse-mode gradients.
//! - [`cost`]: the planning loss, its smooth bound, and the CHOMP baseline.
//! - [`optimizer`]: direct path optimization and collision-only refinement.
//! - [`regressor`]: a highway network regressing paths, trained on the loss.
//! - [`oracle`]: brute-force optima, property verification, cost rasters.
//! - [`scenegen`], [`bench`], [`render`]: problem generators, the benchmark
//!   harness, and SVG output.

pub mod autodiff;
pub mod bench;
pub mod cost;
mod error;
pub mod geom;
pub mod optimizer;
pub mod oracle;
pub mod regressor;
pub mod render;
pub mod scenegen;
pub mod spline;

pub use cost::{ChompParams, CostBreakdown, CostParams};
pub use error::{Error, Result};
pub use geom::{Bounds, Obstacle, Scene};
pub use optimizer::{OptimizerConfig, PlanResult, Problem};
pub use spline::{SampleSet, SplinePath};
