//! Shared numerical substrate: finite differences, Hermitian eigenproblems,
//! Loewner ordering, RK4 integration and sphere-constrained search.

pub mod fd;
pub mod hermitian;
pub mod ode;
pub mod sphere;

pub use fd::{
    differentiate_field, jacobian, scalar_gradient, scalar_hessian, second_partials, try_differentiate_field,
    try_jacobian, DifferentiationScheme, FallibleField, Region, StencilOrder, Unbounded,
};
pub use hermitian::{hermitian_eigen, psd_order, HermitianEigen, HermitianMatrix, PsdComparison, C64};
pub use ode::{integrate_ode, rk4_step, OdeState};
pub use sphere::{SphereOptimum, SphereSearch};
