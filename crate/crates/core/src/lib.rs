//! Numerical toolkit for Ginzburg-Landau vortices of fractional degree `1/m`
//! coupled to free discontinuities.
//!
//! The order parameter `u` is only defined up to multiplication by an m-th root
//! of unity, so its natural target is the quotient `C / G_m`, which embeds
//! isometrically in a round cone of `R^3`. The crate is organised bottom-up:
//!
//! * [`quotient`]: algebra of `C / G_m`, windings and m-th root lifting.
//! * [`domain`]: convex domains, lattices and boundary data of degree `d`.
//! * [`limit`]: canonical harmonic maps, Neumann potentials, the renormalized
//!   energy, the core energy and the finite-dimensional limit problem.
//! * [`steiner`]: exact small-instance Steiner forests with the mod-m
//!   connectivity constraint, minimal connections and competitor fields.
//! * [`sim`]: lattice minimization of the sharp and diffuse functionals and
//!   structure diagnostics on the minimizers.
//!
//! Geometry and group algebra are generic over [`Real`]; the lattice solvers
//! run in `f64`. Aliases for the common `f64` instantiations live at the crate
//! root.

pub mod domain;
pub mod limit;
pub mod linalg;
pub mod optim;
pub mod quotient;
pub mod scalar;
pub mod sim;
pub mod steiner;

pub use num_complex::Complex;
pub use scalar::Real;

/// Complex number in double precision.
pub type C64 = Complex<f64>;
/// Group `G_m` and its projections in double precision.
pub type Modulus = quotient::ModulusParams<f64>;
/// Point of the cone `N` in double precision.
pub type Cone = quotient::ConePoint<f64>;
/// Planar point in double precision.
pub type Point = steiner::Point<f64>;
/// Steiner forest in double precision.
pub type Forest = steiner::SteinerForest<f64>;

