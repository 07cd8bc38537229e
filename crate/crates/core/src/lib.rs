//! Geometric quantization of the symplectic torus `R^{2g}/Z^{2g}` at level `k`.
//!
//! Polarizations are parametrized by the closed Siegel disc. Interior points
//! carry theta-function bases, the boundary carries real polarizations with
//! distributional Bohr-Sommerfeld bases, and the Weil-Brezin transform moves
//! everything to `L²(R^g)` where the metaplectic representation acts.

pub mod bks;
pub mod boundary;
pub mod error;
pub mod exec;
pub mod heisenberg;
pub mod matrix;
pub mod metaplectic;
pub mod random;
pub mod siegel;
pub mod theta;
pub mod tropical;
pub mod weil_brezin;

pub use error::{Error, Result};
pub use exec::Exec;
pub use num_complex::Complex64;
