//! Affine solutions of the planar cold-plasma equations.
//!
//! Velocity and electric field linear in the spatial coordinate reduce the
//! plasma equations to a hierarchy of small ODE systems:
//!
//! * the full 9-component matrix system ([`model::PlasmaState9`]),
//! * the electrostatic diagonal system ([`model::ElectrostaticState4`]),
//! * the radially symmetric system with a magnetic component ([`model::RadialState5`]),
//! * the axisymmetric electrostatic oscillator ([`model::AxisymState2`]).
//!
//! On top of these the crate provides an adaptive RKF45 integrator with event
//! location ([`integrator`]), the first integral and period of the axisymmetric
//! oscillator ([`conserved`]), Floquet monodromy analysis of the variational
//! systems ([`floquet`], backed by the small dense eigen solver in [`eigen`]),
//! and finite-time blow-up experiments ([`blowup`]).

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod blowup;
pub mod conserved;
pub mod eigen;
pub mod floquet;
pub mod integrator;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod roots;

pub use integrator::{IntegratorConfig, OdeSystem, Trajectory};
pub use model::{AxisymState2, ElectrostaticState4, PlasmaState9, RadialState5};
