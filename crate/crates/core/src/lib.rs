//! Fixed equilibria of point vortices in a polynomial background flow.

pub mod configurations;
pub mod equilibria;
pub mod mpoly;
pub mod pipeline;
pub mod polytope;
pub mod solver;
pub mod vortex_system;
