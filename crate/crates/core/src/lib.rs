//! Nonholonomic exponential maps and Gauss metrics.
//!
//! The crate integrates kinetic nonholonomic trajectories, builds the
//! nonholonomic exponential map at a base point, tests the Gauss condition on
//! metrics over the fiber `D_q ≅ R^k`, and checks numerically that radial
//! nonholonomic trajectories are minimizing geodesics of suitable metrics on
//! the image of the exponential map.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases at the crate root fix `f64`.

pub mod domain;
pub mod dynamics;
pub mod error;
pub mod expmap;
pub mod fd;
pub mod geometry;
pub mod linalg;
pub mod ode;
pub mod riemannian;
pub mod scalar;
pub mod systems;
pub mod vector_metric;
pub mod verify;

pub use domain::DomainSpec;
pub use dynamics::{
    integrate_nh_geodesic, nh_acceleration, trajectory_diagnostics, IntegratorOptions,
    NonholonomicSystem, Trajectory, TrajectoryDiagnostics, VelocityPolicy,
};
pub use error::{GeomError, Result};
pub use expmap::{ExpMapPatch, InverseSolution, NewtonOptions, TangentChart};
pub use fd::{Fd, Stencil};
pub use geometry::{
    christoffel_at, complement_projector_at, distribution_basis, metric_at,
    nh_covariant_derivative, orthogonal_projector_at, ChartPoint, Christoffel, ConstraintField,
    MetricField, SignaturePolicy, TangentVector,
};
pub use riemannian::{
    curve_length, gauss_equivalence_check, gauss_lemma_residual, integrate_geodesic,
    line_geodesic_residual, minimize_length, riemannian_exp, riemannian_log,
    standard_radial_function, unit_grid, DiscreteCurve, EquivalenceOptions, EquivalenceReport,
    GeodesicOptions, MinimizeOptions, MinimizeResult, MinimizeStatus, Objective,
};
pub use scalar::Real;
pub use systems::SystemRegistryEntry;
pub use vector_metric::{
    check_gauss, gauss_metric_from_ambient, gauss_residual, pullback_metric, radial_distance,
    radial_gradient, GaussReport, GaussVerdict, GridSpec, MapFn, VectorMetric,
};

/// `f64` instantiations.
pub type ChartPoint64 = ChartPoint<f64>;
pub type MetricField64 = MetricField<f64>;
pub type ConstraintField64 = ConstraintField<f64>;
pub type System64 = NonholonomicSystem<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type ExpMapPatch64 = ExpMapPatch<f64>;
pub type VectorMetric64 = VectorMetric<f64>;
pub type DiscreteCurve64 = DiscreteCurve<f64>;
pub type Registry64 = SystemRegistryEntry<f64>;
