//! Active source identification for steady advection-diffusion transport.
//!
//! The crate covers the full loop of model-based source seeking:
//!
//! - [`geometry`]: rectangular workspaces with rectangular obstacles,
//!   structured meshing, measurement-region indicators, and decomposition of
//!   a non-convex workspace into overlapping convex subdomains.
//! - [`flow`]: analytic and file-based velocity/diffusivity fields with a
//!   stabilizing diffusivity floor and Peclet-number utilities.
//! - [`fem`]: bilinear-quad Galerkin discretization of the transport
//!   operator, exact tower-source loads, and snapshot generation.
//! - [`rom`]: proper orthogonal decomposition of snapshot sets into a small
//!   basis, the reduced operator, and basis evaluation with derivatives.
//! - [`source`]: box ("tower") source parameterization and feasibility
//!   projection.
//! - [`si`]: adjoint-based source identification on the reduced model with
//!   analytic gradients, Hessian-vector products, scanning initialization,
//!   and a projected Newton-CG solver.
//! - [`planner`]: Fisher-information waypoint planning via a sequential
//!   semidefinite programming refinement of a sampled initializer.
//! - [`mission`]: the closed loop of measuring, identifying, and moving,
//!   plus mission configuration, reports, and error metrics.
//!
//! The `examples/` directory exercises each capability end to end; the thin
//! `asi` binary exposes the same pipelines as subcommands.

pub mod band;
pub mod error;
pub mod fem;
pub mod flow;
pub mod geometry;
pub mod mission;
pub mod planner;
pub mod quad;
pub mod rom;
pub mod si;
pub mod source;

pub use error::{Error, Result};
