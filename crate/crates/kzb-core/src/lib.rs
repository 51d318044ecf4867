//! Twisted elliptic dynamical r-matrices and KZB connections.
//!
//! The crate builds, for a simple Lie algebra (A-series) and a cyclic subgroup
//! of its center, the data attached to holomorphic bundles over an elliptic
//! curve with a fixed characteristic class:
//!
//! * [`elliptic`] — theta function, the Kronecker kernel `phi`, its twisted
//!   variants and residual evaluators for the Fay-type identities they satisfy;
//! * [`lie`] — root systems, diagram automorphisms, invariant subalgebras and
//!   exact lattice data;
//! * [`gs`] — the generalized sine (GS) basis obtained by Fourier transform
//!   along orbits of the diagram automorphism, with bracket tables, adjoint
//!   phases and the split Casimir;
//! * [`rmatrix`] — the classical dynamical elliptic r-matrix and its
//!   f-counterpart on tensor products of representations, plus residual
//!   evaluators for the r-matrix axioms and the dynamical Yang-Baxter
//!   equation;
//! * [`connection`] — the KZB connection operators, their curvature on the
//!   constrained subspace, and parallel transport in the ODE regime;
//! * [`checks`] — a catalog of named residual checks shared by the test suite
//!   and the command line driver.

pub mod checks;
pub mod connection;
pub mod elliptic;
pub mod gs;
pub mod lie;
pub mod linalg;
pub mod rmatrix;

pub use num_complex::Complex64;
