//! Metrics on `R^k` (the fiber `D_q`): the Gauss condition
//! `G(w)(w, z) = G(0)(w, z)`, radial distance and gradient, pullbacks, and
//! the construction of Gauss metrics from an arbitrary ambient metric by
//! pulling back through its own exponential map.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::DomainSpec;
use crate::error::{GeomError, Result};
use crate::fd::{self, Fd};
use crate::geometry::MetricField;
use crate::linalg::{self, coords_f64, symmetrize};
use crate::riemannian::{self, GeodesicOptions};
use crate::scalar::{lit, to_f64, Real};

/// A smooth map `R^k → R^n`.
pub type MapFn<T> = Arc<dyn Fn(&DVector<T>) -> Result<DVector<T>> + Send + Sync>;

/// Metric on a starshaped domain of `R^k`.
#[derive(Clone)]
pub struct VectorMetric<T: Real> {
    name: String,
    field: MetricField<T>,
    domain: DomainSpec<T>,
}

impl<T: Real> fmt::Debug for VectorMetric<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorMetric")
            .field("name", &self.name)
            .field("k", &self.field.dim())
            .field("domain", &self.domain)
            .finish()
    }
}

impl<T: Real> VectorMetric<T> {
    pub fn new(name: impl Into<String>, field: MetricField<T>, domain: DomainSpec<T>) -> Self {
        Self {
            name: name.into(),
            field,
            domain,
        }
    }

    pub fn flat(k: usize, domain: DomainSpec<T>) -> Self {
        Self::new("flat", MetricField::flat(k), domain)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn field(&self) -> &MetricField<T> {
        &self.field
    }

    pub fn domain(&self) -> &DomainSpec<T> {
        &self.domain
    }

    pub fn with_domain(mut self, domain: DomainSpec<T>) -> Self {
        self.domain = domain;
        self
    }

    /// Symmetric matrix `G(w)`; positive definiteness is not checked here.
    pub fn at(&self, w: &DVector<T>) -> Result<DMatrix<T>> {
        self.field.eval_raw(w)
    }

    /// `‖x‖_{G(0)}`
    pub fn origin_norm(&self, x: &DVector<T>) -> Result<T> {
        let g0 = self.at(&DVector::zeros(self.dim()))?;
        Ok(linalg::bilinear(&g0, x, x).max(T::zero()).sqrt())
    }
}

/// `G(w)(w, z) − G(0)(w, z)`
pub fn gauss_residual<T: Real>(g: &VectorMetric<T>, w: &DVector<T>, z: &DVector<T>) -> Result<T> {
    let gw = g.at(w)?;
    let g0 = g.at(&DVector::zeros(g.dim()))?;
    Ok(linalg::bilinear(&(gw - g0), w, z))
}

/// Uniform product grid for Gauss sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub points_per_axis: usize,
    /// The grid covers `[-(1-f)·b, (1-f)·b]^k`, `b` the domain bound.
    pub margin_fraction: T,
    pub tol: T,
}

impl<T: Real> GridSpec<T> {
    /// Tolerance for metrics given in closed form.
    pub fn analytic() -> Self {
        Self {
            points_per_axis: 21,
            margin_fraction: lit(0.05),
            tol: lit(1e-8),
        }
    }

    /// Tolerance for pullbacks through finite-difference Jacobians.
    pub fn finite_difference() -> Self {
        Self {
            tol: lit(1e-6),
            ..Self::analytic()
        }
    }

    pub fn with_points(mut self, points_per_axis: usize) -> Self {
        self.points_per_axis = points_per_axis;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    /// Grid nodes lying inside `domain`, in lexicographic order.
    pub fn nodes(&self, k: usize, domain: &DomainSpec<T>) -> Vec<DVector<T>> {
        let n = self.points_per_axis.max(2);
        let half = domain.bound() * (T::one() - self.margin_fraction);
        let axis: Vec<T> = (0..n)
            .map(|i| -half + (half + half) * lit::<T>(i as f64) / lit::<T>((n - 1) as f64))
            .collect();
        let total = n.pow(k as u32);
        (0..total)
            .map(|mut idx| {
                let mut w = DVector::zeros(k);
                for c in (0..k).rev() {
                    w[c] = axis[idx % n];
                    idx /= n;
                }
                w
            })
            .filter(|w| domain.contains(w))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GaussVerdict {
    Pass,
    Fail,
    NotRiemannianOnDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussReport {
    pub max_abs_residual: f64,
    pub argmax_w: Vec<f64>,
    /// Index of the canonical basis vector `z = e_i`.
    pub argmax_z: usize,
    pub nodes: usize,
    pub tol: f64,
    pub verdict: GaussVerdict,
    /// First grid node (in sweep order) where the metric is not positive definite.
    pub not_positive_definite_at: Option<Vec<f64>>,
}

/// Exhaustive sweep of `|G(w)(w, e_i) − G(0)(w, e_i)|` over grid nodes and
/// canonical directions, with a Cholesky positive-definiteness check at every
/// node. Nodes are evaluated in parallel; the reduction is in grid order.
pub fn check_gauss<T: Real>(g: &VectorMetric<T>, grid: &GridSpec<T>) -> Result<GaussReport> {
    let k = g.dim();
    let nodes = grid.nodes(k, g.domain());
    let g0 = g.at(&DVector::zeros(k))?;
    let per_node: Vec<Result<(DVector<T>, bool)>> = nodes
        .par_iter()
        .map(|w| {
            let gw = g.at(w)?;
            let pd = linalg::is_positive_definite(&gw);
            let row = (gw - &g0).transpose() * w;
            Ok((row, pd))
        })
        .collect();

    let mut report = GaussReport {
        max_abs_residual: 0.0,
        argmax_w: vec![0.0; k],
        argmax_z: 0,
        nodes: nodes.len(),
        tol: to_f64(grid.tol),
        verdict: GaussVerdict::Pass,
        not_positive_definite_at: None,
    };
    for (w, res) in nodes.iter().zip(per_node) {
        let (row, pd) = res?;
        if !pd && report.not_positive_definite_at.is_none() {
            report.not_positive_definite_at = Some(coords_f64(w));
        }
        for (i, r) in row.iter().enumerate() {
            let r = to_f64(r.abs());
            if r > report.max_abs_residual {
                report.max_abs_residual = r;
                report.argmax_w = coords_f64(w);
                report.argmax_z = i;
            }
        }
    }
    report.verdict = if report.not_positive_definite_at.is_some() {
        GaussVerdict::NotRiemannianOnDomain
    } else if report.max_abs_residual < report.tol {
        GaussVerdict::Pass
    } else {
        GaussVerdict::Fail
    };
    Ok(report)
}

/// Radial distance `r(v) = √(G(v)(v, v))`.
pub fn radial_distance<T: Real>(g: &VectorMetric<T>, v: &DVector<T>) -> Result<T> {
    let s = linalg::bilinear(&g.at(v)?, v, v);
    if s < T::zero() {
        return Err(GeomError::NegativeRadicand { value: to_f64(s) });
    }
    Ok(s.sqrt())
}

/// Gradient of the radial distance, `G(v)⁻¹ dr(v)`, with `dr` by finite
/// differences. For Gauss metrics this is `v / ‖v‖_{G(0)}`, of unit
/// `G(v)`-length.
pub fn radial_gradient<T: Real>(
    g: &VectorMetric<T>,
    v: &DVector<T>,
    fd: Fd<T>,
) -> Result<DVector<T>> {
    if v.iter().all(|x| x.is_zero()) {
        return Err(GeomError::InvalidArgument(
            "radial gradient undefined at the origin".into(),
        ));
    }
    let dr = fd::gradient(|y| radial_distance(g, y), v, fd)?;
    linalg::solve_vec(&g.at(v)?, &dr, "metric at radial gradient", v)
}

/// Integrates the radial gradient flow from `w0` for `duration` (classical
/// RK4, `steps` steps) and returns the largest geodesic-equation residual
/// `‖ẅ + Γ(ẇ, ẇ)‖_∞` along the samples, with `ẅ = D(grad r)·ẇ`.
pub fn gradient_flow_geodesic_residual<T: Real>(
    g: &VectorMetric<T>,
    w0: &DVector<T>,
    duration: T,
    steps: usize,
    fd: Fd<T>,
) -> Result<T> {
    let field = |w: &DVector<T>| radial_gradient(g, w, fd);
    let h = duration / lit::<T>(steps.max(1) as f64);
    let half = h * lit::<T>(0.5);
    let mut w = w0.clone();
    let mut worst = T::zero();
    for i in 0..=steps {
        let wd = field(&w)?;
        let wdd: DVector<T> = fd::directional(field, &w, &wd, fd)?;
        let gam = g.field().christoffel(&w)?.contract(&wd, &wd);
        worst = worst.max(linalg::sup_norm(&(wdd + gam)));
        if i == steps {
            break;
        }
        let k1 = wd;
        let k2 = field(&(&w + &k1 * half))?;
        let k3 = field(&(&w + &k2 * half))?;
        let k4 = field(&(&w + &k3 * h))?;
        w += (k1 + (k2 + k3) * lit::<T>(2.0) + k4) * (h / lit::<T>(6.0));
    }
    Ok(worst)
}

/// Pullback `G(w) = J_Φ(w)ᵀ h(Φ(w)) J_Φ(w)` with a finite-difference Jacobian.
///
/// `h` may be indefinite; the resulting field requires positive
/// definiteness only where Christoffel symbols or norms are taken.
pub fn pullback_metric<T: Real>(
    name: impl Into<String>,
    phi: MapFn<T>,
    h: MetricField<T>,
    k: usize,
    fd: Fd<T>,
    domain: DomainSpec<T>,
) -> VectorMetric<T> {
    let field = MetricField::try_new(k, move |w: &DVector<T>| {
        let jac = fd::jacobian(|y| phi(y), w, fd)?;
        let hq = h.at(&phi(w)?)?;
        Ok(symmetrize(&(jac.transpose() * hq * &jac)))
    })
    .with_fd(Fd::nested());
    VectorMetric::new(name, field, domain)
}

/// Gauss metric `(exp^Ḡ_0)^* Ḡ` built from an arbitrary metric `Ḡ` on `R^k`.
pub fn gauss_metric_from_ambient<T: Real>(
    ambient: &VectorMetric<T>,
    domain: DomainSpec<T>,
    opts: GeodesicOptions,
) -> VectorMetric<T> {
    let k = ambient.dim();
    let bar = ambient.field().clone();
    let exp_field = bar.clone();
    let phi: MapFn<T> = Arc::new(move |w: &DVector<T>| {
        riemannian::riemannian_exp(&exp_field, &DVector::zeros(k), w, &opts)
    });
    pullback_metric(
        format!("gauss-from-{}", ambient.name()),
        phi,
        bar,
        k,
        Fd::jacobian(),
        domain,
    )
}
