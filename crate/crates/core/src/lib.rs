//! Numerical laboratory for the Dirichlet Laplacian on near-ball domains.
//!
//! The crate discretizes implicitly defined domains of the plane and of space
//! on uniform grids, computes the lowest Dirichlet eigenvalues with a sparse
//! shift-invert block iteration, measures the Fraenkel asymmetry, and builds
//! the trial functions used to compare the spectrum of a domain with the
//! spectrum of the ball of the same volume.
//!
//! The modules mirror the pipeline:
//!
//! * [`geometry`]: implicit domains, parametric families, rasterization.
//! * [`ball_oracle`]: Bessel zeros and closed-form spectra of balls and rectangles.
//! * [`eigensolver`]: finite-difference operator, eigenpairs, Rayleigh quotients,
//!   Richardson extrapolation.
//! * [`asymmetry`]: symmetric-difference volumes and the Fraenkel asymmetry.
//! * [`surgery`]: shell scan, hat extension, radial cutoff and ratio competitors.
//! * [`harness`]: sweeps, power-law fits, inequality verification and reports.
//!
//! ```
//! use speclab::geometry::{rasterize, ConcentricBall};
//! use speclab::eigensolver::{assemble, lowest_eigenpairs};
//!
//! let disk = ConcentricBall::new(2, 0.0).unwrap().domain();
//! let raster = rasterize(&disk, 1.0 / 32.0).unwrap();
//! let spectrum = lowest_eigenpairs(&assemble(&raster), 1, 1e-10).unwrap();
//! assert!((spectrum.eigenvalues[0] - 18.1684).abs() < 0.2);
//! ```

pub mod asymmetry;
pub mod ball_oracle;
pub mod eigensolver;
mod error;
pub mod geometry;
pub mod harness;
mod quadrature;
pub mod surgery;

pub use error::{Error, Result};
