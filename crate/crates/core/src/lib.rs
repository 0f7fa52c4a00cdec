//! Numerical laboratory for self-similar radial gas flows that focus at a
//! single space-time point while staying shock-free.
//!
//! The library reduces the radial compressible Euler equations to an
//! autonomous system in the similarity plane, classifies its critical
//! points, traces the heteroclinic trajectory that carries the flow
//! through collapse, reconstructs the physical fields (density, velocity,
//! sound speed, pressure), and probes whether an admissible shock could
//! branch off the smooth solution.
//!
//! Modules mirror the pipeline:
//!
//! * [`params`]: parameter validation, derived constants, admissible
//!   exponent thresholds.
//! * [`phaseplane`]: the reduced vector field, its critical points, and
//!   their node/saddle classification.
//! * [`integrator`]: trajectory tracing, barrier containment, global
//!   assembly, and recovery of the similarity coordinate.
//! * [`flowfield`]: physical-field evaluation, collapse profiles,
//!   conserved integrals.
//! * [`hugoniot`]: shock jump relations, the post-shock locus of the
//!   main trajectory, and the intersection verdict.

pub mod flowfield;
pub mod hugoniot;
pub mod integrator;
pub mod par;
pub mod params;
pub mod phaseplane;
