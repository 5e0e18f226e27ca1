//! Equivariant spectra and spectral invariants of S¹-invariant metrics on S²,
//! and reconstruction of the metric from those invariants.
//!
//! A metric is given in action-angle coordinates by v dx² + dθ²/v with
//! v = g̈ on (-1, 1). The crate computes the weight-m spectra of its Laplacian,
//! the semiclassical expansion of the equivariant spectral measure, the two
//! leading invariants, and recovers a single-well v (up to x ↦ -x) from them.

pub mod abel;
pub mod interp;
pub mod inverse;
pub mod invariants;
pub mod jet;
pub mod laplace;
pub mod measure;
pub mod profiles;
pub mod quad;
pub mod semiclassics;
pub mod symbolic;
pub mod tridiag;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
