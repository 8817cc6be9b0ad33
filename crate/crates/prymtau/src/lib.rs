//! Numerical Prym and Bergman tau functions on spectral double covers of
//! hyperelliptic curves.
//!
//! A base curve `C: y^2 = P(x)` of genus `g >= 2` together with a quadratic
//! differential `q = f(x) (dx)^2 / y^2` with simple zeros determines a double
//! cover `w^2 = f(x)` of `C` on which `v = w dx / y` is an abelian
//! differential with `v^2 = q`. The crate builds the cover, a symplectic
//! homology basis adapted to the covering involution, period matrices of the
//! even and odd eigenspaces, Bergman-type kernels, and the two tau functions
//! attached to the eigenspace decomposition, and verifies the quantitative
//! identities these objects satisfy (variational formulas, homogeneity,
//! residue values, symplectic transformation laws, boundary degenerations).
//!
//! Everything numerical is generic over [`scalar::CScalar`], with a fast
//! `Complex64` backend and an arbitrary-precision backend backed by `rug`.

pub mod config;
pub mod error;
pub mod scalar;

pub mod cauchy;
pub mod contour;
pub mod fitting;
pub mod linalg;
pub mod poly;
pub mod quad;

pub mod intmat;

pub mod cover;
pub mod differentials;
pub mod homology;
pub mod periods;
pub mod abel;
pub mod theta;

pub use config::PrecisionConfig;
pub use error::{PrymError, Result};
