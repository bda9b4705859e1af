//! Unconstrained Riemannian machinery on coordinate domains: geodesics, the
//! exponential map and its inverse, discrete curve length and its
//! minimization, and numerical checks of Gauss' lemma and of the
//! equivalences characterizing Gauss metrics.

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{Sample, Trajectory};
use crate::error::{GeomError, Result};
use crate::expmap::NewtonOptions;
use crate::fd::{self, Fd};
use crate::geometry::MetricField;
use crate::linalg::{self, sup_norm};
use crate::ode;
use crate::scalar::{lit, to_f64, Real};
use crate::vector_metric::{check_gauss, GaussReport, GaussVerdict, GridSpec, VectorMetric};

/// Settings for unit-time geodesic integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GeodesicOptions {
    /// RK4 steps on `[0, 1]`.
    pub steps: usize,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self { steps: 1000 }
    }
}

fn speed<T: Real>(metric: &MetricField<T>, q: &DVector<T>, v: &DVector<T>) -> Result<T> {
    Ok(metric.inner(q, v, v)?.max(T::zero()).sqrt())
}

/// Integrates `q̈^k = −Γ^k_{ij} q̇^i q̇^j` with classical RK4.
pub fn integrate_geodesic<T: Real>(
    metric: &MetricField<T>,
    q0: &DVector<T>,
    v0: &DVector<T>,
    duration: T,
    steps: usize,
) -> Result<Trajectory<T>> {
    let n = metric.dim();
    if q0.len() != n || v0.len() != n {
        return Err(GeomError::DimensionMismatch {
            what: "geodesic initial condition",
            expected: n,
            got: q0.len().min(v0.len()),
        });
    }
    let mut samples = Vec::with_capacity(steps + 1);
    ode::integrate(
        |q, v| Ok(-metric.christoffel(q)?.contract(v, v)),
        |_, v| Ok(v),
        q0.clone(),
        v0.clone(),
        duration,
        steps,
        |t, q, v| {
            samples.push(Sample {
                t,
                q: q.clone(),
                v: v.clone(),
                speed: speed(metric, q, v)?,
                constraint_residual: T::zero(),
            });
            Ok(())
        },
    )?;
    Trajectory::from_samples(samples)
}

/// Endpoint of the unit-time geodesic; `exp(base, 0) = base` exactly.
/// Only the endpoint is kept, so this is cheaper than [`integrate_geodesic`].
pub fn riemannian_exp<T: Real>(
    metric: &MetricField<T>,
    base: &DVector<T>,
    v: &DVector<T>,
    opts: &GeodesicOptions,
) -> Result<DVector<T>> {
    if base.len() != metric.dim() || v.len() != metric.dim() {
        return Err(GeomError::DimensionMismatch {
            what: "exponential argument",
            expected: metric.dim(),
            got: v.len().min(base.len()),
        });
    }
    if v.iter().all(|x| x.is_zero()) {
        return Ok(base.clone());
    }
    let mut end = base.clone();
    ode::integrate(
        |q, w| Ok(-metric.christoffel(q)?.contract(w, w)),
        |_, w| Ok(w),
        base.clone(),
        v.clone(),
        T::one(),
        opts.steps,
        |_, q, _| {
            end.clone_from(q);
            Ok(())
        },
    )?;
    Ok(end)
}

/// Inverse of the exponential at `base` by damped Newton (step halving)
/// with a finite-difference Jacobian; returns the initial velocity and the
/// number of iterations.
pub fn riemannian_log<T: Real>(
    metric: &MetricField<T>,
    base: &DVector<T>,
    p: &DVector<T>,
    opts: &GeodesicOptions,
    newton: &NewtonOptions<T>,
) -> Result<(DVector<T>, usize)> {
    let residual =
        |v: &DVector<T>| -> Result<DVector<T>> { Ok(riemannian_exp(metric, base, v, opts)? - p) };
    let mut v = p - base;
    let mut r = residual(&v)?;
    let mut iterations = 0;
    while sup_norm(&r) >= newton.tol {
        if iterations == newton.max_iter {
            return Err(GeomError::NewtonFailed {
                iterations,
                residual: to_f64(sup_norm(&r)),
            });
        }
        iterations += 1;
        let jac = fd::jacobian(residual, &v, newton.fd)?;
        let dv = linalg::solve_vec(&jac, &(-&r), "exponential Jacobian", &v)?;
        let mut lambda = T::one();
        let mut accepted = None;
        for _ in 0..30 {
            let cand = &v + &dv * lambda;
            if let Ok(rc) = residual(&cand) {
                if sup_norm(&rc) < sup_norm(&r) {
                    accepted = Some((cand, rc));
                    break;
                }
            }
            lambda *= lit(0.5);
        }
        let Some((vn, rn)) = accepted else {
            return Err(GeomError::NewtonFailed {
                iterations,
                residual: to_f64(sup_norm(&r)),
            });
        };
        v = vn;
        r = rn;
    }
    Ok((v, iterations))
}

/// `‖exp_base⁻¹(p)‖_{g(base)}`
pub fn standard_radial_function<T: Real>(
    metric: &MetricField<T>,
    base: &DVector<T>,
    p: &DVector<T>,
    opts: &GeodesicOptions,
    newton: &NewtonOptions<T>,
) -> Result<T> {
    if p == base {
        return Ok(T::zero());
    }
    let (v, _) = riemannian_log(metric, base, p, opts, newton)?;
    Ok(metric.inner(base, &v, &v)?.max(T::zero()).sqrt())
}

/// A polygonal curve with fixed endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve<T: Real> {
    nodes: Vec<DVector<T>>,
}

impl<T: Real> DiscreteCurve<T> {
    pub fn new(nodes: Vec<DVector<T>>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(GeomError::InvalidArgument(
                "a discrete curve needs at least two nodes".into(),
            ));
        }
        let dim = nodes[0].len();
        if nodes.iter().any(|n| n.len() != dim) {
            return Err(GeomError::InvalidArgument(
                "inconsistent node dimensions".into(),
            ));
        }
        if nodes.iter().any(|n| !n.iter().all(|x| x.is_finite())) {
            return Err(GeomError::InvalidArgument("non-finite node".into()));
        }
        Ok(Self { nodes })
    }

    /// `n` equally spaced nodes on the segment `a → b`.
    pub fn line(a: &DVector<T>, b: &DVector<T>, n: usize) -> Result<Self> {
        Self::perturbed_line(a, b, n, T::zero(), 1, &DVector::zeros(a.len()))
    }

    /// Segment `a → b` displaced by `amplitude · sin(mode π t) · dir`.
    pub fn perturbed_line(
        a: &DVector<T>,
        b: &DVector<T>,
        n: usize,
        amplitude: T,
        mode: usize,
        dir: &DVector<T>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(GeomError::InvalidArgument(
                "a discrete curve needs at least two nodes".into(),
            ));
        }
        let last = lit::<T>((n - 1) as f64);
        let m = lit::<T>(mode as f64);
        Self::new(
            (0..n)
                .map(|i| {
                    let t = lit::<T>(i as f64) / last;
                    a + (b - a) * t + dir * (amplitude * (m * T::pi() * t).sin())
                })
                .collect(),
        )
    }

    pub fn nodes(&self) -> &[DVector<T>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn start(&self) -> &DVector<T> {
        &self.nodes[0]
    }

    pub fn end(&self) -> &DVector<T> {
        self.nodes.last().expect("at least two nodes")
    }

    /// Largest Euclidean distance from a node to the segment `a → b`.
    pub fn distance_to_segment(&self, a: &DVector<T>, b: &DVector<T>) -> T {
        let d = b - a;
        let dd = d.norm_squared();
        self.nodes
            .iter()
            .map(|p| {
                let s = if dd.is_zero() {
                    T::zero()
                } else {
                    ((p - a).dot(&d) / dd).max(T::zero()).min(T::one())
                };
                (p - (a + &d * s)).norm()
            })
            .fold(T::zero(), |m, x| m.max(x))
    }
}

fn segment_sq<T: Real>(metric: &MetricField<T>, p: &DVector<T>, q: &DVector<T>) -> Result<T> {
    let mid = (p + q) * lit::<T>(0.5);
    let d = q - p;
    metric.inner(&mid, &d, &d)
}

/// Midpoint-rule length `Σ_i ‖Δ_i‖_{g(m_i)}`.
pub fn curve_length<T: Real>(metric: &MetricField<T>, curve: &DiscreteCurve<T>) -> Result<T> {
    curve.nodes.windows(2).try_fold(T::zero(), |acc, w| {
        Ok(acc + segment_sq(metric, &w[0], &w[1])?.max(T::zero()).sqrt())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Discrete length.
    Length,
    /// `(N − 1) Σ ‖Δ_i‖²`, which equals the squared length on
    /// uniform-speed curves and has no reparametrization null directions.
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions<T> {
    pub objective: Objective,
    pub max_iters: usize,
    /// Stop when the gradient sup norm falls below this value.
    pub grad_tol: T,
    pub fd: Fd<T>,
    /// L-BFGS history length.
    pub memory: usize,
    /// Redistribute nodes to uniform metric speed after convergence.
    pub renormalize: bool,
}

impl<T: Real> Default for MinimizeOptions<T> {
    fn default() -> Self {
        Self {
            objective: Objective::Length,
            max_iters: 5000,
            grad_tol: lit(1e-6),
            fd: Fd::central5(1e-4),
            memory: 10,
            renormalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizeStatus {
    Converged,
    MaxIterations,
    /// The line search found no decrease; the gradient is at noise level.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult<T: Real> {
    pub curve: DiscreteCurve<T>,
    pub status: MinimizeStatus,
    pub iterations: usize,
    pub initial_length: T,
    pub final_length: T,
    pub grad_norm: T,
    /// Length after each accepted iteration, starting with the initial curve.
    pub trace: Vec<T>,
}

struct Problem<'a, T: Real> {
    metric: &'a MetricField<T>,
    objective: Objective,
    fd: Fd<T>,
    nodes: Vec<DVector<T>>,
}

impl<T: Real> Problem<'_, T> {
    fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    fn interior(&self) -> usize {
        self.nodes.len() - 2
    }

    fn unpack(&self, x: &DVector<T>) -> Vec<DVector<T>> {
        let d = self.dim();
        let mut nodes = self.nodes.clone();
        for j in 0..self.interior() {
            nodes[j + 1] = x.rows(j * d, d).into_owned();
        }
        nodes
    }

    fn pack(&self, nodes: &[DVector<T>]) -> DVector<T> {
        let d = self.dim();
        let mut x = DVector::zeros(self.interior() * d);
        for j in 0..self.interior() {
            x.rows_mut(j * d, d).copy_from(&nodes[j + 1]);
        }
        x
    }

    fn segment(&self, p: &DVector<T>, q: &DVector<T>) -> Result<T> {
        let s = segment_sq(self.metric, p, q)?;
        Ok(match self.objective {
            Objective::Length => s.max(T::zero()).sqrt(),
            Objective::Energy => s * lit::<T>((self.nodes.len() - 1) as f64),
        })
    }

    fn value(&self, x: &DVector<T>) -> Result<T> {
        let nodes = self.unpack(x);
        nodes
            .windows(2)
            .try_fold(T::zero(), |acc, w| Ok(acc + self.segment(&w[0], &w[1])?))
    }

    /// Node `j` only enters segments `j − 1` and `j`, so each partial is a
    /// difference of two local terms.
    fn gradient(&self, x: &DVector<T>) -> Result<DVector<T>> {
        let nodes = self.unpack(x);
        let d = self.dim();
        let mut g = DVector::zeros(x.len());
        for j in 1..nodes.len() - 1 {
            for c in 0..d {
                let local = |s: T| -> Result<T> {
                    let mut p = nodes[j].clone();
                    p[c] += s;
                    Ok(self.segment(&nodes[j - 1], &p)? + self.segment(&p, &nodes[j + 1])?)
                };
                g[(j - 1) * d + c] = fd::derivative(local, self.fd)?;
            }
        }
        Ok(g)
    }
}

/// Redistributes nodes along the polygon to equal metric length.
fn renormalize<T: Real>(
    metric: &MetricField<T>,
    curve: &DiscreteCurve<T>,
) -> Result<DiscreteCurve<T>> {
    let nodes = curve.nodes();
    let mut cum = vec![T::zero()];
    for w in nodes.windows(2) {
        let s = segment_sq(metric, &w[0], &w[1])?.max(T::zero()).sqrt();
        cum.push(*cum.last().expect("non-empty") + s);
    }
    let total = *cum.last().expect("non-empty");
    if total.is_zero() {
        return Ok(curve.clone());
    }
    let n = nodes.len();
    let mut out = Vec::with_capacity(n);
    out.push(nodes[0].clone());
    let mut seg = 0;
    for i in 1..n - 1 {
        let target = total * lit::<T>(i as f64) / lit::<T>((n - 1) as f64);
        while seg + 1 < n - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let s = if span.is_zero() {
            T::zero()
        } else {
            (target - cum[seg]) / span
        };
        out.push(&nodes[seg] + (&nodes[seg + 1] - &nodes[seg]) * s);
    }
    out.push(nodes[n - 1].clone());
    DiscreteCurve::new(out)
}

/// L-BFGS descent with Armijo backtracking on the interior nodes of the
/// discrete length (or energy); endpoints stay fixed. The returned curve is
/// never longer than `init`.
pub fn minimize_length<T: Real>(
    metric: &MetricField<T>,
    init: &DiscreteCurve<T>,
    opts: &MinimizeOptions<T>,
) -> Result<MinimizeResult<T>> {
    let initial_length = curve_length(metric, init)?;
    let mut trace = vec![initial_length];
    if init.len() == 2 {
        return Ok(MinimizeResult {
            curve: init.clone(),
            status: MinimizeStatus::Converged,
            iterations: 0,
            initial_length,
            final_length: initial_length,
            grad_norm: T::zero(),
            trace,
        });
    }
    let prob = Problem {
        metric,
        objective: opts.objective,
        fd: opts.fd,
        nodes: init.nodes().to_vec(),
    };
    let mut x = prob.pack(init.nodes());
    let mut f = prob.value(&x)?;
    let mut g = prob.gradient(&x)?;
    let mut history: Vec<(DVector<T>, DVector<T>, T)> = Vec::new();
    let mut status = MinimizeStatus::MaxIterations;
    let mut iterations = 0;
    let c1 = lit::<T>(1e-4);

    while iterations < opts.max_iters {
        if g.amax() < opts.grad_tol {
            status = MinimizeStatus::Converged;
            break;
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = *rho * s.dot(&q);
            q -= y * a;
            alphas.push(a);
        }
        let gamma = match history.last() {
            Some((s, y, _)) => s.dot(y) / y.dot(y),
            None => lit::<T>(0.1) / g.amax().max(T::one()),
        };
        let mut dir = q * gamma;
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = *rho * y.dot(&dir);
            dir += s * (a - b);
        }
        dir = -dir;
        let mut slope = g.dot(&dir);
        if slope >= T::zero() {
            history.clear();
            dir = -&g * (lit::<T>(0.1) / g.amax().max(T::one()));
            slope = g.dot(&dir);
        }

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x + &dir * step;
            if let Ok(fc) = prob.value(&cand) {
                if fc <= f + c1 * step * slope && fc < f {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            step *= lit(0.5);
        }
        let Some((xn, fn_)) = accepted else {
            status = MinimizeStatus::Stalled;
            break;
        };
        let gn = prob.gradient(&xn)?;
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > T::default_epsilon() * s.norm() * y.norm() {
            history.push((s, y, T::one() / sy));
            if history.len() > opts.memory {
                history.remove(0);
            }
        }
        x = xn;
        f = fn_;
        g = gn;
        iterations += 1;
        trace.push(match opts.objective {
            Objective::Length => f,
            Objective::Energy => curve_length(metric, &DiscreteCurve::new(prob.unpack(&x))?)?,
        });
    }

    let mut curve = DiscreteCurve::new(prob.unpack(&x))?;
    let mut final_length = curve_length(metric, &curve)?;
    if opts.renormalize {
        let r = renormalize(metric, &curve)?;
        let lr = curve_length(metric, &r)?;
        if lr <= final_length {
            curve = r;
            final_length = lr;
        }
    }
    if final_length > initial_length {
        curve = init.clone();
        final_length = initial_length;
    }
    Ok(MinimizeResult {
        curve,
        status,
        iterations,
        initial_length,
        final_length,
        grad_norm: g.amax(),
        trace,
    })
}

/// `|g(exp v)(J v, J w) − g(base)(v, w)|` with `J` the finite-difference
/// Jacobian of the exponential at `v`.
pub fn gauss_lemma_residual<T: Real>(
    metric: &MetricField<T>,
    base: &DVector<T>,
    v: &DVector<T>,
    w: &DVector<T>,
    fd: Fd<T>,
    opts: &GeodesicOptions,
) -> Result<T> {
    let exp = |y: &DVector<T>| riemannian_exp(metric, base, y, opts);
    let jv: DVector<T> = fd::directional(exp, v, v, fd)?;
    let jw: DVector<T> = fd::directional(exp, v, w, fd)?;
    let p = exp(v)?;
    Ok((linalg::bilinear(&metric.eval_raw(&p)?, &jv, &jw)
        - linalg::bilinear(&metric.eval_raw(base)?, v, w))
    .abs())
}

/// `max_t ‖Γ(t w)(w, w)‖_∞`: the geodesic-equation residual of the line
/// `t ↦ t w`, whose acceleration vanishes.
pub fn line_geodesic_residual<T: Real>(
    metric: &MetricField<T>,
    w: &DVector<T>,
    t_grid: &[T],
) -> Result<T> {
    t_grid.iter().try_fold(T::zero(), |m, &t| {
        Ok(m.max(sup_norm(&metric.christoffel(&(w * t))?.contract(w, w))))
    })
}

/// Uniform grid of `n` points on `[0, 1]`.
pub fn unit_grid<T: Real>(n: usize) -> Vec<T> {
    let n = n.max(2);
    (0..n)
        .map(|i| lit::<T>(i as f64) / lit::<T>((n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceOptions<T> {
    pub grid: GridSpec<T>,
    /// Probe velocities: nonzero nodes of a `probe_points`-per-axis grid
    /// covering `probe_fraction` of the domain bound.
    pub probe_points: usize,
    pub probe_fraction: T,
    pub t_points: usize,
    pub line_tol: T,
    pub exp_tol: T,
    pub geodesic: GeodesicOptions,
}

impl<T: Real> Default for EquivalenceOptions<T> {
    fn default() -> Self {
        Self {
            grid: GridSpec::finite_difference(),
            probe_points: 5,
            probe_fraction: lit(0.8),
            t_points: 11,
            line_tol: lit(1e-6),
            exp_tol: lit(1e-6),
            geodesic: GeodesicOptions { steps: 20 },
        }
    }
}

/// Verdicts of the three equivalent characterizations of Gauss metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub metric: String,
    pub gauss: GaussReport,
    pub gauss_pass: bool,
    /// Largest line-geodesic residual over the probes.
    pub line_residual: f64,
    pub lines_pass: bool,
    /// Largest `‖exp(0, v) − v‖_∞` over the probes.
    pub exp_residual: f64,
    pub exp_pass: bool,
    pub agree: bool,
}

/// Probe velocities for [`gauss_equivalence_check`].
pub fn probe_velocities<T: Real>(
    g: &VectorMetric<T>,
    points: usize,
    fraction: T,
) -> Vec<DVector<T>> {
    let spec = GridSpec {
        points_per_axis: points,
        margin_fraction: T::one() - fraction,
        tol: T::one(),
    };
    spec.nodes(g.dim(), g.domain())
        .into_iter()
        .filter(|w| !w.iter().all(|x| x.is_zero()))
        .collect()
}

/// Runs the Gauss sweep, the lines-are-geodesics test and the
/// exponential-is-inclusion test on one metric.
pub fn gauss_equivalence_check<T: Real>(
    g: &VectorMetric<T>,
    opts: &EquivalenceOptions<T>,
) -> Result<EquivalenceReport> {
    let gauss = check_gauss(g, &opts.grid)?;
    let probes = probe_velocities(g, opts.probe_points, opts.probe_fraction);
    let t_grid = unit_grid::<T>(opts.t_points);
    let zero = DVector::zeros(g.dim());
    let mut line = T::zero();
    let mut exp = T::zero();
    for w in &probes {
        line = line.max(line_geodesic_residual(g.field(), w, &t_grid)?);
        let e = riemannian_exp(g.field(), &zero, w, &opts.geodesic)?;
        exp = exp.max(sup_norm(&(e - w)));
    }
    let gauss_pass = gauss.verdict == GaussVerdict::Pass;
    let lines_pass = line < opts.line_tol;
    let exp_pass = exp < opts.exp_tol;
    Ok(EquivalenceReport {
        metric: g.name().to_string(),
        gauss,
        gauss_pass,
        line_residual: to_f64(line),
        lines_pass,
        exp_residual: to_f64(exp),
        exp_pass,
        agree: gauss_pass == lines_pass && lines_pass == exp_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn flat_geodesics_are_lines() {
        let g = MetricField::<f64>::flat(2);
        let traj = integrate_geodesic(&g, &v(&[0.0, 0.0]), &v(&[1.0, 2.0]), 1.0, 100).unwrap();
        assert!((traj.endpoint() - v(&[1.0, 2.0])).amax() < 1e-14);
        let e = riemannian_exp(
            &g,
            &v(&[0.0, 0.0]),
            &v(&[1.0, 1.0]),
            &GeodesicOptions::default(),
        )
        .unwrap();
        assert!((e - v(&[1.0, 1.0])).amax() < 1e-14);
        let base = v(&[0.3, -0.1]);
        assert_eq!(
            riemannian_exp(&g, &base, &v(&[0.0, 0.0]), &GeodesicOptions::default()).unwrap(),
            base
        );
    }

    #[test]
    fn example53_lines_through_origin_are_geodesics() {
        let g = systems::example53_metric::<f64>();
        let traj =
            integrate_geodesic(g.field(), &v(&[0.0, 0.0]), &v(&[0.3, 0.4]), 1.0, 1000).unwrap();
        assert!((traj.endpoint() - v(&[0.3, 0.4])).amax() < 1e-10);
        assert!(traj.diagnostics().speed_drift < 1e-8);
        let r = line_geodesic_residual(g.field(), &v(&[0.3, 0.4]), &unit_grid(21)).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn conformal_speed_is_conserved() {
        let g = systems::conformal_metric::<f64>(0.3, -0.2);
        let traj = integrate_geodesic(&g, &v(&[0.1, 0.0]), &v(&[0.5, 0.7]), 1.0, 1000).unwrap();
        assert!(traj.diagnostics().speed_drift < 1e-8);
    }

    #[test]
    fn log_inverts_exp() {
        let g = systems::conformal_metric::<f64>(0.3, -0.2);
        let opts = GeodesicOptions { steps: 200 };
        let base = v(&[0.0, 0.0]);
        let target_v = v(&[0.25, -0.15]);
        let p = riemannian_exp(&g, &base, &target_v, &opts).unwrap();
        let (vl, _) = riemannian_log(&g, &base, &p, &opts, &NewtonOptions::default()).unwrap();
        assert!((vl - target_v).amax() < 1e-9);
        let flat = MetricField::<f64>::flat(2);
        let r = standard_radial_function(
            &flat,
            &base,
            &v(&[3.0, 4.0]),
            &opts,
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!((r - 5.0).abs() < 1e-9);
        assert_eq!(
            standard_radial_function(&flat, &base, &base, &opts, &NewtonOptions::default())
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn curve_length_quadrature() {
        let flat = MetricField::<f64>::flat(2);
        let line = DiscreteCurve::line(&v(&[0.0, 0.0]), &v(&[1.0, 1.0]), 7).unwrap();
        assert!((curve_length(&flat, &line).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let g = systems::example53_metric::<f64>();
        let radial = DiscreteCurve::line(&v(&[0.0, 0.0]), &v(&[0.6, 0.0]), 100).unwrap();
        assert!((curve_length(g.field(), &radial).unwrap() - 0.6).abs() < 1e-4);
        assert!(DiscreteCurve::<f64>::new(vec![v(&[0.0])]).is_err());
        assert!(DiscreteCurve::new(vec![v(&[0.0]), v(&[0.0, 1.0])]).is_err());
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let g = systems::conformal_metric::<f64>(0.3, -0.2);
        let len = |n| {
            let c = DiscreteCurve::perturbed_line(
                &v(&[0.0, 0.0]),
                &v(&[0.4, 0.3]),
                n,
                0.05,
                1,
                &v(&[-0.6, 0.8]),
            )
            .unwrap();
            curve_length(&g, &c).unwrap()
        };
        let (a, b, c) = (len(50), len(100), len(200));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn flat_minimization_recovers_line() {
        let flat = MetricField::<f64>::flat(2);
        let (a, b) = (v(&[0.0, 0.0]), v(&[1.0, 1.0]));
        let dir = v(&[-1.0, 1.0]) / 2f64.sqrt();
        let init = DiscreteCurve::perturbed_line(&a, &b, 21, 0.1, 1, &dir).unwrap();
        let res = minimize_length(&flat, &init, &MinimizeOptions::default()).unwrap();
        assert!(
            res.curve.distance_to_segment(&a, &b) < 1e-4,
            "{:?}",
            res.status
        );
        assert!(res.final_length <= res.initial_length + 1e-12);
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!((res.final_length - 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn energy_objective_recovers_line() {
        let flat = MetricField::<f64>::flat(2);
        let (a, b) = (v(&[0.0, 0.0]), v(&[1.0, 0.5]));
        let init = DiscreteCurve::perturbed_line(&a, &b, 11, 0.2, 2, &v(&[0.0, 1.0])).unwrap();
        let opts = MinimizeOptions {
            objective: Objective::Energy,
            ..MinimizeOptions::default()
        };
        let res = minimize_length(&flat, &init, &opts).unwrap();
        assert_eq!(res.status, MinimizeStatus::Converged);
        assert!(res.curve.distance_to_segment(&a, &b) < 1e-6);
    }

    #[test]
    fn gauss_lemma_on_flat_and_conformal() {
        let flat = MetricField::<f64>::flat(2);
        let opts = GeodesicOptions { steps: 100 };
        let r = gauss_lemma_residual(
            &flat,
            &v(&[0.0, 0.0]),
            &v(&[0.5, 0.2]),
            &v(&[0.0, 1.0]),
            Fd::jacobian(),
            &opts,
        )
        .unwrap();
        assert!(r < 1e-12);
        let g = systems::conformal_metric::<f64>(0.3, -0.2);
        let opts = GeodesicOptions { steps: 200 };
        for fd in [Fd::central5(1e-3), Fd::central5(2e-3)] {
            let r = gauss_lemma_residual(
                &g,
                &v(&[0.0, 0.0]),
                &v(&[0.2, 0.1]),
                &v(&[0.0, 1.0]),
                fd,
                &opts,
            )
            .unwrap();
            assert!(r < 1e-6, "{r}");
        }
    }

    #[test]
    fn equivalences_on_flat_and_non_gauss() {
        let flat = VectorMetric::<f64>::flat(2, crate::domain::DomainSpec::ball(1.0));
        let r = gauss_equivalence_check(&flat, &EquivalenceOptions::default()).unwrap();
        assert!(r.gauss_pass && r.lines_pass && r.exp_pass && r.agree);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let constant = VectorMetric::new(
            "constant",
            MetricField::constant(m),
            crate::domain::DomainSpec::ball(1.0),
        );
        assert!(
            gauss_equivalence_check(&constant, &EquivalenceOptions::default())
                .unwrap()
                .agree
        );
        let conf = VectorMetric::new(
            "conformal",
            systems::conformal_metric(0.3, -0.2),
            crate::domain::DomainSpec::ball(0.5),
        );
        let r = gauss_equivalence_check(&conf, &EquivalenceOptions::default()).unwrap();
        assert!(!r.gauss_pass && !r.lines_pass && !r.exp_pass && r.agree);
    }
}
