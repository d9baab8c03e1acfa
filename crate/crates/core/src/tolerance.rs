//! Shared numeric tolerances.

/// Absolute tolerance on the Euclidean norm of a [`SpherePoint`](crate::potential::SpherePoint).
pub const NORM_TOL: f64 = 1e-9;

/// Absolute tolerance on the coordinate sum of a [`SimplexPoint`](crate::potential::SimplexPoint).
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// Relative tolerance for `<projected_gradient(y), y> = 0`, scaled by the gradient norm.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Absolute tolerance on matrix symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// L1 distance within which a flow limit is matched to a clique characteristic vector.
pub const SNAP_TOL: f64 = 1e-3;

/// Projected-gradient norm at which the noiseless flow counts as converged.
pub const FLOW_GRAD_TOL: f64 = 1e-8;
