//! Numerical workbench for reduced free products of traced C*-algebras.
//!
//! The building blocks are finite-dimensional C*-algebras (direct sums of
//! matrix blocks) carrying faithful tracial states. From those this crate
//! constructs:
//!
//! - explicit GNS matrix representations obtained by orthogonalizing an
//!   algebra basis under the trace inner product ([`gns`]),
//! - word-indexed truncations of the free-product Hilbert space, with exact
//!   mixed moments and monotone lower bounds on operator norms of
//!   noncommutative *-polynomials ([`freeprod`]),
//! - reduced crossed products by finite cyclic groups ([`groups`]),
//! - random matrix models certifying that polynomial norms are matched
//!   within a tolerance, plus related spectral side-condition checkers
//!   ([`certify`]).
//!
//! All types are immutable after construction and all operations are pure;
//! anything randomized takes an explicit seed.

pub mod algebra;
pub mod certify;
pub mod freeprod;
pub mod gns;
pub mod groups;
pub mod sparse;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Dense complex matrix used for algebra blocks and GNS representations.
pub type CMatrix = nalgebra::DMatrix<C64>;

pub use nalgebra;

/// Crate version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Error type shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dimensions or block shapes of the inputs do not match.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// An input violates a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// The Gram matrix of the input family is numerically singular.
    #[error("gram matrix numerically singular (condition number {cond:.3e})")]
    SingularGram { cond: f64 },
    /// A requested construction would exceed the configured memory budget.
    #[error("memory budget exceeded: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, Error>;
