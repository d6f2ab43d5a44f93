//! Two-level Moran selection process, its deterministic transport limit, and
//! its Fleming-Viot diffusion limit, with the numerical studies connecting
//! them.

pub mod cli;
pub mod fv;
pub mod harness;
pub mod limit;
pub mod measures;
pub mod moran;
pub mod quad;
pub mod seeds;
pub mod spec_lang;
pub mod testfn;

pub use measures::{
    discretized_beta, wasserstein1, AnyMeasure, AtomicMeasure, BetaSpec, GridDensity, GridMeasure,
    LimitMeasure, Measure, MeasureError, Mixture, MixtureComponent, PiecewiseCdf, QuadRule,
    TailDescriptor,
};
pub use testfn::TestFunction;
