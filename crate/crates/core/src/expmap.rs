//! The nonholonomic exponential map at a fixed base point, restricted to a
//! starshaped domain of `D_q ≅ R^k`.

use nalgebra::{DMatrix, DVector};

use crate::domain::DomainSpec;
use crate::dynamics::{
    integrate_nh_geodesic, IntegratorOptions, NonholonomicSystem, Trajectory, VelocityPolicy,
};
use crate::error::{GeomError, Result};
use crate::fd::{self, Fd};
use crate::geometry::{distribution_basis, ChartPoint};
use crate::linalg::{self, sup_norm};
use crate::scalar::{lit, to_f64, Real};

/// Linear coordinates `(w_1, …, w_k)` on `D_base` given by a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentChart<T: Real> {
    base: ChartPoint<T>,
    basis: DMatrix<T>,
    labels: Vec<String>,
}

impl<T: Real> TangentChart<T> {
    /// `basis` holds one column per direction; every column must be
    /// annihilated by `A(base)` to 1e-12 and the columns independent.
    pub fn new(
        sys: &NonholonomicSystem<T>,
        base: ChartPoint<T>,
        basis: DMatrix<T>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let k = sys.rank();
        if basis.shape() != (sys.dim(), k) {
            return Err(GeomError::DimensionMismatch {
                what: "tangent chart basis columns",
                expected: k,
                got: basis.ncols(),
            });
        }
        if labels.len() != k {
            return Err(GeomError::DimensionMismatch {
                what: "tangent chart labels",
                expected: k,
                got: labels.len(),
            });
        }
        let residual = (sys.constraints().at(base.coords())? * &basis).amax();
        if residual > lit(1e-12) {
            return Err(GeomError::ConstraintViolation {
                residual: to_f64(residual),
                tol: 1e-12,
            });
        }
        let sv = basis.clone().singular_values();
        let smax = sv.max();
        if sv.min() <= smax * lit(1e-10) {
            return Err(GeomError::InvalidArgument(
                "tangent chart basis is linearly dependent".into(),
            ));
        }
        Ok(Self {
            base,
            basis,
            labels,
        })
    }

    /// g-orthonormal chart derived from the constraint one-forms.
    pub fn from_distribution(sys: &NonholonomicSystem<T>, base: ChartPoint<T>) -> Result<Self> {
        let basis = distribution_basis(sys.metric(), sys.constraints(), base.coords())?;
        let labels = (1..=basis.ncols()).map(|i| format!("w{i}")).collect();
        Self::new(sys, base, basis, labels)
    }

    pub fn base(&self) -> &ChartPoint<T> {
        &self.base
    }

    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// The ambient velocity `Σ w_i b_i`.
    pub fn velocity(&self, w: &DVector<T>) -> DVector<T> {
        &self.basis * w
    }
}

/// `exp^nh_q` on a starshaped domain `U_0 ⊂ D_q`.
#[derive(Debug, Clone)]
pub struct ExpMapPatch<T: Real> {
    sys: NonholonomicSystem<T>,
    chart: TangentChart<T>,
    domain: DomainSpec<T>,
    steps: usize,
    opts: IntegratorOptions<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions<T> {
    pub max_iter: usize,
    /// Convergence threshold on the selected components, sup norm.
    pub tol: T,
    pub fd: Fd<T>,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: lit(1e-10),
            fd: Fd::jacobian(),
        }
    }
}

/// Result of [`ExpMapPatch::exp_nh_inverse`].
#[derive(Debug, Clone, PartialEq)]
pub struct InverseSolution<T: Real> {
    pub w: DVector<T>,
    /// `‖sel(exp(w)) − sel(target)‖_∞`
    pub selected_residual: T,
    /// `‖exp(w) − target‖_∞`; vanishes iff the target lies on the image.
    pub full_residual: T,
    pub iterations: usize,
}

impl<T: Real> ExpMapPatch<T> {
    pub const DEFAULT_STEPS: usize = 1000;

    pub fn new(
        sys: NonholonomicSystem<T>,
        chart: TangentChart<T>,
        domain: DomainSpec<T>,
    ) -> Result<Self> {
        domain.validate(chart.rank())?;
        Ok(Self {
            sys,
            chart,
            domain,
            steps: Self::DEFAULT_STEPS,
            opts: IntegratorOptions {
                // Chart velocities are admissible to rounding; the check in
                // TangentChart::new already enforced 1e-12 on the basis.
                policy: VelocityPolicy::Strict,
                admissible_tol: lit(1e-9),
                project_each_step: false,
            },
        })
    }

    /// RK4 steps used for every evaluation on `[0, 1]`.
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps.max(1);
        self
    }

    pub fn with_domain(mut self, domain: DomainSpec<T>) -> Result<Self> {
        domain.validate(self.chart.rank())?;
        self.domain = domain;
        Ok(self)
    }

    pub fn system(&self) -> &NonholonomicSystem<T> {
        &self.sys
    }

    pub fn chart(&self) -> &TangentChart<T> {
        &self.chart
    }

    pub fn domain(&self) -> &DomainSpec<T> {
        &self.domain
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn base(&self) -> &DVector<T> {
        self.chart.base().coords()
    }

    fn check_w(&self, w: &DVector<T>) -> Result<()> {
        if w.len() != self.chart.rank() {
            return Err(GeomError::DimensionMismatch {
                what: "fiber coordinates",
                expected: self.chart.rank(),
                got: w.len(),
            });
        }
        self.domain.require(w)
    }

    /// The defining trajectory `t ↦ c_w(t)` on `[0, duration]`.
    pub fn trajectory(&self, w: &DVector<T>, duration: T) -> Result<Trajectory<T>> {
        self.check_w(w)?;
        integrate_nh_geodesic(
            &self.sys,
            self.chart.base(),
            &self.chart.velocity(w),
            duration,
            self.steps,
            &self.opts,
        )
    }

    /// Endpoint and final velocity of `c_w` at `t = 1`.
    pub fn exp_nh_with_velocity(&self, w: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        self.check_w(w)?;
        if w.iter().all(|x| x.is_zero()) {
            return Ok((self.base().clone(), DVector::zeros(self.sys.dim())));
        }
        let traj = self.trajectory(w, T::one())?;
        let last = traj.last();
        Ok((last.q.clone(), last.v.clone()))
    }

    /// `exp^nh_q(w)`: the point `c_w(1)`. The zero vector maps to the base
    /// point exactly.
    pub fn exp_nh(&self, w: &DVector<T>) -> Result<ChartPoint<T>> {
        ChartPoint::new(self.exp_nh_with_velocity(w)?.0)
    }

    /// Central-difference Jacobian `n × k` of the exponential at `w`.
    pub fn exp_nh_jacobian(&self, w: &DVector<T>, fd: Fd<T>) -> Result<DMatrix<T>> {
        self.check_w(w)?;
        fd::jacobian(|y| Ok(self.exp_nh(y)?.into_coords()), w, fd)
    }

    /// `max_t ‖exp(t w) − c_w(t)‖_∞` over an ascending grid in `[0, 1]`;
    /// `c_w` is a single integration sampled at the grid times.
    pub fn rescaling_residual(&self, w: &DVector<T>, t_grid: &[T]) -> Result<T> {
        self.check_w(w)?;
        if t_grid.windows(2).any(|p| p[1] < p[0])
            || t_grid.iter().any(|&t| t < T::zero() || t > T::one())
        {
            return Err(GeomError::InvalidArgument(
                "time grid must be ascending within [0, 1]".into(),
            ));
        }
        let seg_opts = IntegratorOptions {
            policy: VelocityPolicy::Strict,
            admissible_tol: lit(1e-6),
            project_each_step: false,
        };
        let mut q = self.base().clone();
        let mut v = self.chart.velocity(w);
        let mut t_prev = T::zero();
        let mut worst = T::zero();
        for &t in t_grid {
            let dt = t - t_prev;
            if dt > T::zero() {
                let n = (to_f64(dt) * self.steps as f64).round().max(1.0) as usize;
                let seg =
                    integrate_nh_geodesic(&self.sys, &ChartPoint::new(q)?, &v, dt, n, &seg_opts)?;
                q = seg.last().q.clone();
                v = seg.last().v.clone();
                t_prev = t;
            }
            let scaled = self.exp_nh(&(w * t))?;
            worst = worst.max(sup_norm(&(scaled.coords() - &q)));
        }
        Ok(worst)
    }

    /// Solves `sel(exp(w)) = sel(target)` by damped Newton with a
    /// finite-difference sub-Jacobian. `select` picks `k` ambient coordinates
    /// that serve as coordinates on the image submanifold.
    pub fn exp_nh_inverse(
        &self,
        target: &ChartPoint<T>,
        select: &[usize],
        opts: &NewtonOptions<T>,
    ) -> Result<InverseSolution<T>> {
        let k = self.chart.rank();
        if select.len() != k || select.iter().any(|&i| i >= self.sys.dim()) {
            return Err(GeomError::InvalidArgument(format!(
                "selection {select:?} must name {k} distinct ambient coordinates"
            )));
        }
        let pick = |q: &DVector<T>| DVector::from_iterator(k, select.iter().map(|&i| q[i]));
        let goal = pick(target.coords());
        let residual =
            |w: &DVector<T>| -> Result<DVector<T>> { Ok(pick(self.exp_nh(w)?.coords()) - &goal) };

        // Start from the linearization exp(w) ≈ q + B w.
        let b_sel = DMatrix::from_fn(k, k, |i, j| self.chart.basis()[(select[i], j)]);
        let mut w = linalg::solve_vec(
            &b_sel,
            &(&goal - pick(self.base())),
            "selected chart basis",
            self.base(),
        )?;
        let shrink = lit::<T>(0.5);
        while !self.domain.contains(&w) {
            w *= shrink;
        }

        let mut r = residual(&w)?;
        let mut iterations = 0;
        while sup_norm(&r) >= opts.tol {
            if iterations == opts.max_iter {
                return Err(GeomError::NewtonFailed {
                    iterations,
                    residual: to_f64(sup_norm(&r)),
                });
            }
            iterations += 1;
            let jac = fd::jacobian(residual, &w, opts.fd)?;
            let dw = linalg::solve_vec(&jac, &(-&r), "selected sub-Jacobian", &w)?;
            let mut lambda = T::one();
            let mut accepted = None;
            for _ in 0..30 {
                let cand = &w + &dw * lambda;
                if self.domain.contains(&cand) {
                    let rc = residual(&cand)?;
                    if sup_norm(&rc) < sup_norm(&r) {
                        accepted = Some((cand, rc));
                        break;
                    }
                }
                lambda *= shrink;
            }
            match accepted {
                Some((wn, rn)) => {
                    w = wn;
                    r = rn;
                }
                None => {
                    return Err(GeomError::NewtonFailed {
                        iterations,
                        residual: to_f64(sup_norm(&r)),
                    })
                }
            }
        }
        let full_residual = sup_norm(&(self.exp_nh(&w)?.coords() - target.coords()));
        Ok(InverseSolution {
            selected_residual: sup_norm(&r),
            w,
            full_residual,
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn zero_maps_to_base_exactly() {
        let patch = systems::particle_system::<f64>().default_patch().unwrap();
        assert_eq!(
            patch.exp_nh(&v(&[0.0, 0.0])).unwrap().coords(),
            &v(&[0.0, 0.0, 0.0])
        );
        assert_eq!(
            patch
                .rescaling_residual(&v(&[0.0, 0.0]), &[0.0, 0.5, 1.0])
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn domain_violation() {
        let patch = systems::particle_system::<f64>().default_patch().unwrap();
        assert!(matches!(
            patch.exp_nh(&v(&[1.0, 1.0])),
            Err(GeomError::DomainViolation { .. })
        ));
        // Stencil of a Jacobian at the edge leaves the domain.
        assert!(patch
            .exp_nh_jacobian(&v(&[0.9999, 0.0]), Fd::jacobian())
            .is_err());
    }

    #[test]
    fn particle_jacobian_at_zero_and_at_u_axis() {
        let patch = systems::particle_system::<f64>().default_patch().unwrap();
        let j0 = patch
            .exp_nh_jacobian(&v(&[0.0, 0.0]), Fd::jacobian())
            .unwrap();
        assert!((j0 - patch.chart().basis()).amax() < 1e-6);
        // Derivative of the closed form at (1, 0): [[1, 0], [0, 1], [0, ½]].
        let patch = patch.with_domain(DomainSpec::ball(2.0)).unwrap();
        let j = patch
            .exp_nh_jacobian(&v(&[1.0, 0.0]), Fd::jacobian())
            .unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.5]);
        assert!((j - expected).amax() < 1e-6);
    }

    #[test]
    fn inverse_rejects_bad_selection() {
        let patch = systems::particle_system::<f64>().default_patch().unwrap();
        let target = ChartPoint::origin(3);
        assert!(patch
            .exp_nh_inverse(&target, &[0], &NewtonOptions::default())
            .is_err());
        assert!(patch
            .exp_nh_inverse(&target, &[0, 7], &NewtonOptions::default())
            .is_err());
        let sol = patch
            .exp_nh_inverse(&target, &[0, 1], &NewtonOptions::default())
            .unwrap();
        assert_eq!(sol.w, v(&[0.0, 0.0]));
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn chart_validation() {
        let entry = systems::particle_system::<f64>();
        let bad = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(TangentChart::new(
            &entry.system,
            ChartPoint::origin(3),
            bad,
            vec!["u".into(), "v".into()]
        )
        .is_err());
        let dep = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(TangentChart::new(
            &entry.system,
            ChartPoint::origin(3),
            dep,
            vec!["u".into(), "v".into()]
        )
        .is_err());
        let derived =
            TangentChart::from_distribution(&entry.system, ChartPoint::origin(3)).unwrap();
        assert_eq!(derived.basis(), entry.chart.basis());
    }
}
