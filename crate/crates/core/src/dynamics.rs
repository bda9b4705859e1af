//! Kinetic nonholonomic dynamics: the Lagrange–d'Alembert vector field of
//! `(Q, g, D)`, its fixed-step integrator and trajectory diagnostics.

use nalgebra::DVector;

use crate::error::{GeomError, Result};
use crate::fd::Fd;
use crate::geometry::{
    christoffel_with_metric, orthogonal_projector_at, ChartPoint, ConstraintField, MetricField,
};
use crate::linalg::{self, coords_f64};
use crate::ode;
use crate::scalar::{lit, to_f64, Real};

/// A kinetic nonholonomic system `(Q, g, D)` on one chart.
#[derive(Debug, Clone)]
pub struct NonholonomicSystem<T: Real> {
    name: String,
    metric: MetricField<T>,
    constraints: ConstraintField<T>,
}

impl<T: Real> NonholonomicSystem<T> {
    pub fn new(
        name: impl Into<String>,
        metric: MetricField<T>,
        constraints: ConstraintField<T>,
    ) -> Result<Self> {
        if metric.dim() != constraints.dim() {
            return Err(GeomError::DimensionMismatch {
                what: "constraint field",
                expected: metric.dim(),
                got: constraints.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            metric,
            constraints,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn metric(&self) -> &MetricField<T> {
        &self.metric
    }

    pub fn constraints(&self) -> &ConstraintField<T> {
        &self.constraints
    }

    /// Chart dimension `n`.
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Rank `k` of the constraint distribution.
    pub fn rank(&self) -> usize {
        self.constraints.rank()
    }

    /// `‖v‖_{g(q)}`
    pub fn speed(&self, q: &DVector<T>, v: &DVector<T>) -> Result<T> {
        let s2 = self.metric.inner(q, v, v)?;
        Ok(s2.max(T::zero()).sqrt())
    }
}

/// Accelerations of the constrained geodesic equation
/// `∇^g_ċ ċ ∈ D^⊥, ċ ∈ D`:
///
/// `a = −Γ(v,v) + g⁻¹Aᵀλ`, `λ = (A g⁻¹ Aᵀ)⁻¹(A Γ(v,v) − (∂_v A) v)`.
///
/// The multiplier makes `d/dt [A(q) v] = 0`; the velocity is assumed to lie
/// in `D_q` already.
pub fn nh_acceleration<T: Real>(
    sys: &NonholonomicSystem<T>,
    q: &DVector<T>,
    v: &DVector<T>,
) -> Result<DVector<T>> {
    let g = sys.metric();
    let gm = g.at(q)?;
    let gam_vv = christoffel_with_metric(g, &gm, q, g.fd())?.contract(v, v);
    let a = sys.constraints().at(q)?;
    if a.nrows() == 0 {
        return Ok(-gam_vv);
    }
    let ginv_at = linalg::solve(&gm, &a.transpose(), "metric inversion", q)?;
    let da_v = sys.constraints().derivative_along(q, v, Fd::metric())?;
    let rhs = &a * &gam_vv - da_v * v;
    let lambda = linalg::solve_vec(
        &(&a * &ginv_at),
        &rhs,
        "constraint Gram matrix A g^-1 A^T",
        q,
    )?;
    Ok(ginv_at * lambda - gam_vv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum VelocityPolicy {
    /// Reject initial velocities with `‖A(q0)v0‖_∞` above the tolerance.
    Strict,
    /// Replace the initial velocity by `P(q0) v0`.
    Project,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions<T> {
    pub policy: VelocityPolicy,
    /// Admissibility tolerance on `‖A(q0)v0‖_∞`.
    pub admissible_tol: T,
    /// Re-project `v ↦ P(q)v` after every step. Off by default so that drift
    /// stays observable in the diagnostics.
    pub project_each_step: bool,
}

impl<T: Real> Default for IntegratorOptions<T> {
    fn default() -> Self {
        Self {
            policy: VelocityPolicy::Strict,
            admissible_tol: lit(1e-10),
            project_each_step: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T: Real> {
    pub t: T,
    pub q: DVector<T>,
    pub v: DVector<T>,
    /// `‖v‖_{g(q)}`
    pub speed: T,
    /// `‖A(q) v‖_∞`; zero for unconstrained geodesics.
    pub constraint_residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Diagnostics<T> {
    pub speed_drift: T,
    pub max_constraint_residual: T,
}

/// Time-stamped samples of a trajectory on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    samples: Vec<Sample<T>>,
    diagnostics: Diagnostics<T>,
}

impl<T: Real> Trajectory<T> {
    /// Builds a trajectory and its drift diagnostics from samples.
    pub fn from_samples(samples: Vec<Sample<T>>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| GeomError::InvalidArgument("empty trajectory".into()))?;
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(GeomError::InvalidArgument(
                "sample times must increase strictly".into(),
            ));
        }
        let dim = first.q.len();
        if samples.iter().any(|s| s.q.len() != dim || s.v.len() != dim) {
            return Err(GeomError::InvalidArgument(
                "inconsistent sample dimensions".into(),
            ));
        }
        let speed0 = first.speed;
        let diagnostics = Diagnostics {
            speed_drift: samples
                .iter()
                .fold(T::zero(), |m, s| m.max((s.speed - speed0).abs())),
            max_constraint_residual: samples
                .iter()
                .fold(T::zero(), |m, s| m.max(s.constraint_residual)),
        };
        Ok(Self {
            samples,
            diagnostics,
        })
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn diagnostics(&self) -> Diagnostics<T> {
        self.diagnostics
    }

    pub fn first(&self) -> &Sample<T> {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample<T> {
        self.samples.last().expect("trajectory is non-empty")
    }

    pub fn endpoint(&self) -> &DVector<T> {
        &self.last().q
    }

    pub fn duration(&self) -> T {
        self.last().t - self.first().t
    }

    /// Number of integration steps (samples minus one).
    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }
}

/// Checks `‖A(q)v‖_∞ ≤ tol`.
pub fn check_admissible<T: Real>(
    sys: &NonholonomicSystem<T>,
    q: &DVector<T>,
    v: &DVector<T>,
    tol: T,
) -> Result<()> {
    let residual = sys.constraints().residual(q, v)?;
    if residual > tol {
        return Err(GeomError::ConstraintViolation {
            residual: to_f64(residual),
            tol: to_f64(tol),
        });
    }
    Ok(())
}

/// Integrates the nonholonomic geodesic through `(q0, v0)` over `[0, duration]`
/// with classical RK4 on `steps` uniform steps.
pub fn integrate_nh_geodesic<T: Real>(
    sys: &NonholonomicSystem<T>,
    q0: &ChartPoint<T>,
    v0: &DVector<T>,
    duration: T,
    steps: usize,
    opts: &IntegratorOptions<T>,
) -> Result<Trajectory<T>> {
    if v0.len() != sys.dim() || q0.dim() != sys.dim() {
        return Err(GeomError::DimensionMismatch {
            what: "initial condition",
            expected: sys.dim(),
            got: v0.len().min(q0.dim()),
        });
    }
    if !v0.iter().all(|x| x.is_finite()) {
        return Err(GeomError::NonFinite {
            what: "initial velocity",
            at: coords_f64(q0.coords()),
        });
    }
    let q0 = q0.coords().clone();
    let v0 = match opts.policy {
        VelocityPolicy::Strict => {
            check_admissible(sys, &q0, v0, opts.admissible_tol)?;
            v0.clone()
        }
        VelocityPolicy::Project => {
            orthogonal_projector_at(sys.metric(), sys.constraints(), &q0)? * v0
        }
    };

    let mut samples = Vec::with_capacity(steps + 1);
    let project = opts.project_each_step;
    ode::integrate(
        |q, v| nh_acceleration(sys, q, v),
        |q, v| {
            if project {
                Ok(orthogonal_projector_at(sys.metric(), sys.constraints(), q)? * v)
            } else {
                Ok(v)
            }
        },
        q0,
        v0,
        duration,
        steps,
        |t, q, v| {
            samples.push(Sample {
                t,
                q: q.clone(),
                v: v.clone(),
                speed: sys.speed(q, v)?,
                constraint_residual: sys.constraints().residual(q, v)?,
            });
            Ok(())
        },
    )?;
    Trajectory::from_samples(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TrajectoryDiagnostics<T> {
    /// `max_t |‖v(t)‖_g − ‖v(0)‖_g|`
    pub speed_drift: T,
    /// `max_t ‖A(q(t)) v(t)‖_∞`
    pub max_constraint_residual: T,
    /// `max_t ‖c_{a v0}(t) − c_{v0}(a t)‖_∞`
    pub reparam_residual: T,
}

/// Recomputes drift diagnostics from the samples and checks homothetic
/// reparametrization: the trajectory with initial velocity `scale · v0` is
/// integrated over `[0, duration / scale]` with the same step count and
/// compared sample by sample with `traj`.
pub fn trajectory_diagnostics<T: Real>(
    traj: &Trajectory<T>,
    sys: &NonholonomicSystem<T>,
    scale: T,
) -> Result<TrajectoryDiagnostics<T>> {
    if scale <= T::zero() {
        return Err(GeomError::InvalidArgument(
            "reparametrization scale must be positive".into(),
        ));
    }
    let first = traj.first();
    let speed0 = sys.speed(&first.q, &first.v)?;
    let mut speed_drift = T::zero();
    let mut max_constraint_residual = T::zero();
    for s in traj.samples() {
        speed_drift = speed_drift.max((sys.speed(&s.q, &s.v)? - speed0).abs());
        max_constraint_residual =
            max_constraint_residual.max(sys.constraints().residual(&s.q, &s.v)?);
    }

    let opts = IntegratorOptions {
        policy: VelocityPolicy::Project,
        ..IntegratorOptions::default()
    };
    let scaled = integrate_nh_geodesic(
        sys,
        &ChartPoint::new(first.q.clone())?,
        &(&first.v * scale),
        traj.duration() / scale,
        traj.steps(),
        &opts,
    )?;
    let reparam_residual = scaled
        .samples()
        .iter()
        .zip(traj.samples())
        .fold(T::zero(), |m, (a, b)| {
            m.max(linalg::sup_norm(&(&a.q - &b.q)))
        });

    Ok(TrajectoryDiagnostics {
        speed_drift,
        max_constraint_residual,
        reparam_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn particle_accelerations_match_reduced_equations() {
        let sys = systems::particle_system::<f64>().system;
        let a = nh_acceleration(&sys, &v(&[0.0, 0.0, 0.0]), &v(&[1.0, 0.0, 0.0])).unwrap();
        assert!(a.amax() < 1e-15);
        let a = nh_acceleration(&sys, &v(&[0.0, 0.0, 0.0]), &v(&[1.0, 1.0, 0.0])).unwrap();
        assert!((a - v(&[0.0, 0.0, 1.0])).amax() < 1e-14);
        // Reduced ODE away from the origin: ẍ = −yẏẋ/(1+y²), ÿ = 0, z̈ = ẏẋ/(1+y²).
        let (y, xd, yd) = (0.7, 0.4, -1.3);
        let q = v(&[0.2, y, -0.5]);
        let vel = v(&[xd, yd, y * xd]);
        let a = nh_acceleration(&sys, &q, &vel).unwrap();
        let expected = v(&[-y * yd * xd / (1.0 + y * y), 0.0, yd * xd / (1.0 + y * y)]);
        assert!((a - expected).amax() < 1e-14);
    }

    #[test]
    fn zero_velocity_gives_zero_acceleration() {
        let sys = systems::disk_system::<f64>(1.0, 1.0).unwrap().system;
        let a = nh_acceleration(&sys, &v(&[0.1, 0.2, 0.3, 0.4]), &DVector::zeros(4)).unwrap();
        assert_eq!(a.amax(), 0.0);
    }

    #[test]
    fn strict_policy_rejects_inadmissible_velocity() {
        let sys = systems::particle_system::<f64>().system;
        let err = integrate_nh_geodesic(
            &sys,
            &ChartPoint::origin(3),
            &v(&[1.0, 0.0, 1.0]),
            1.0,
            10,
            &IntegratorOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, GeomError::ConstraintViolation { .. }));
    }

    #[test]
    fn project_policy_projects_initial_velocity() {
        let sys = systems::particle_system::<f64>().system;
        let opts = IntegratorOptions {
            policy: VelocityPolicy::Project,
            ..IntegratorOptions::default()
        };
        let traj = integrate_nh_geodesic(
            &sys,
            &ChartPoint::origin(3),
            &v(&[1.0, 0.0, 1.0]),
            1.0,
            10,
            &opts,
        )
        .unwrap();
        assert_eq!(traj.first().v, v(&[1.0, 0.0, 0.0]));
    }

    #[test]
    fn dimension_and_step_errors() {
        let sys = systems::particle_system::<f64>().system;
        let opts = IntegratorOptions::default();
        assert!(integrate_nh_geodesic(
            &sys,
            &ChartPoint::origin(3),
            &v(&[1.0, 0.0]),
            1.0,
            10,
            &opts
        )
        .is_err());
        assert!(integrate_nh_geodesic(
            &sys,
            &ChartPoint::origin(3),
            &v(&[1.0, 0.0, 0.0]),
            1.0,
            0,
            &opts
        )
        .is_err());
    }

    #[test]
    fn rest_stays_at_rest() {
        let sys = systems::particle_system::<f64>().system;
        let q0 = ChartPoint::from_slice(&[0.5, -0.2, 1.0]).unwrap();
        let traj = integrate_nh_geodesic(
            &sys,
            &q0,
            &DVector::zeros(3),
            1.0,
            50,
            &IntegratorOptions::default(),
        )
        .unwrap();
        assert!(traj.samples().iter().all(|s| &s.q == q0.coords()));
        let d = trajectory_diagnostics(&traj, &sys, 2.0).unwrap();
        assert_eq!(d.speed_drift, 0.0);
        assert_eq!(d.reparam_residual, 0.0);
    }

    #[test]
    fn blow_up_is_reported() {
        // ẍ = x² blows up in finite time from x = v = 1.
        let g = MetricField::<f64>::flat(1);
        let sys = NonholonomicSystem::new("blowup", g, ConstraintField::unconstrained(1)).unwrap();
        let r = ode::integrate(
            |q: &DVector<f64>, _: &DVector<f64>| Ok(q.map(|x| x * x * x * x)),
            |_, v| Ok(v),
            v(&[1.0]),
            v(&[1.0]),
            100.0,
            10,
            |_, _, _| Ok(()),
        );
        assert!(matches!(r, Err(GeomError::BlowUp { .. })));
        assert_eq!(sys.rank(), 1);
    }

    #[test]
    fn trajectory_requires_increasing_times() {
        let s = Sample {
            t: 0.0,
            q: v(&[0.0]),
            v: v(&[0.0]),
            speed: 0.0,
            constraint_residual: 0.0,
        };
        assert!(Trajectory::from_samples(vec![s.clone(), s]).is_err());
        assert!(Trajectory::<f64>::from_samples(vec![]).is_err());
    }
}
