//! Steady incremental viscosity splitting (SIVS) for the stationary
//! incompressible Navier-Stokes equations with grad-div stabilization.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: structured triangulations of the unit square with boundary tags.
//! - [`quadrature`]: symmetric and collapsed-product rules on triangles.
//! - [`fe`]: the P2/P1 Taylor-Hood space, form assembly and Dirichlet lifting.
//! - [`sparse`]: CSR algebra, direct factorizations, conjugate gradients and
//!   the matrix-free pressure Schur complement.
//! - [`solvers`]: SIVS, monolithic Picard and incremental Picard-Yosida drivers.
//! - [`diagnostics`]: error norms, rates, contraction monitors and centerlines.
//! - [`problems`]: the manufactured solution and lid-driven cavity set-ups.

pub mod diagnostics;
pub mod error;
pub mod fe;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};

/// Forces every factorization and solve onto the calling thread.
///
/// Repeated runs are then bitwise reproducible.
pub fn set_single_threaded(single: bool) {
    if single {
        faer::set_global_parallelism(faer::Par::Seq);
    } else {
        faer::set_global_parallelism(faer::Par::rayon(0));
    }
}
