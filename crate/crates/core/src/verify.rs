//! End-to-end check that radial nonholonomic trajectories are minimizing
//! geodesics of a Gauss metric pushed forward to the image of the
//! exponential map.
//!
//! Stages:
//! - (a) exponential map: tangent map at 0, rescaling, closed-form agreement;
//! - (b) choice of the fiber metric `G_0`;
//! - (c) the three equivalent characterizations of Gauss metrics;
//! - (d) push-forward `g^nh_q` to induced coordinates and comparison of its
//!   Riemannian exponential with the nonholonomic one;
//! - (e) length minimization from perturbed curves.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expmap::{ExpMapPatch, NewtonOptions};
use crate::fd::Fd;
use crate::geometry::ChartPoint;
use crate::linalg::{coords_f64, sup_norm};
use crate::riemannian::{
    self, gauss_equivalence_check, minimize_length, probe_velocities, unit_grid, DiscreteCurve,
    EquivalenceOptions, EquivalenceReport, GeodesicOptions, MinimizeOptions, MinimizeStatus,
};
use crate::systems::{self, SystemRegistryEntry, CONFORMAL_AB};
use crate::vector_metric::{pullback_metric, GridSpec, MapFn, VectorMetric};

/// Fiber metric `G_0` used by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricChoice {
    /// The flat metric of the fiber chart.
    Flat,
    /// Gauss metric built from the conformal test metric through its own
    /// exponential map.
    Remark21,
    /// Pullback of the auxiliary metric `g^mod` (disk only).
    PullbackGmod,
    /// Pullback of the ambient kinetic metric; not a Gauss metric in general.
    PullbackAmbient,
}

impl FromStr for MetricChoice {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Self::Flat),
            "remark21" => Ok(Self::Remark21),
            "pullback-gmod" => Ok(Self::PullbackGmod),
            "pullback-ambient" => Ok(Self::PullbackAmbient),
            other => Err(GeomError::InvalidArgument(format!(
                "unknown metric choice `{other}` (expected flat, remark21, pullback-gmod or pullback-ambient)"
            ))),
        }
    }
}

impl fmt::Display for MetricChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Flat => "flat",
            Self::Remark21 => "remark21",
            Self::PullbackGmod => "pullback-gmod",
            Self::PullbackAmbient => "pullback-ambient",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub metric: MetricChoice,
    /// RK4 steps for the nonholonomic exponential.
    pub steps: usize,
    /// Fiber domain radius for `G_0`; `None` picks the metric's default.
    pub radius: Option<f64>,
    /// Points per axis of the Gauss sweep grid.
    pub grid: usize,
    /// Points per axis of the probe-velocity grid.
    pub probe_points: usize,
    /// Tolerance of stages (c) and (d).
    pub tol: f64,
    /// RK4 steps for Riemannian exponentials of `G_0` and `g^nh_q`.
    pub geodesic_steps: usize,
    pub minimize_nodes: usize,
    /// `(amplitude / ‖v‖, mode)` of the sinusoidal perturbations in stage (e).
    pub perturbations: Vec<(f64, usize)>,
    /// Number of endpoints used in stage (e).
    pub minimize_endpoints: usize,
    /// Tolerance of stage (e), relative to `‖v‖`.
    pub minimize_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            metric: MetricChoice::Flat,
            steps: 1000,
            radius: None,
            grid: 21,
            probe_points: 5,
            tol: 1e-6,
            geodesic_steps: 40,
            minimize_nodes: 21,
            perturbations: vec![(0.1, 1), (0.2, 2)],
            minimize_endpoints: 2,
            minimize_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub pass: bool,
    pub residuals: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl StageReport {
    fn new(stage: &str) -> Self {
        Self {
            stage: stage.to_string(),
            pass: true,
            residuals: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, value: f64, tol: f64) {
        self.residuals.insert(name.to_string(), value);
        if value.is_nan() || value >= tol {
            self.pass = false;
            self.notes
                .push(format!("{name} = {value:.3e} exceeds {tol:.1e}"));
        }
    }

    fn failed(stage: &str, err: &GeomError) -> Self {
        Self {
            stage: stage.to_string(),
            pass: false,
            residuals: BTreeMap::new(),
            notes: vec![format!("error: {err}")],
        }
    }
}

/// Comparison of `exp^{g^nh_q}` with `exp^nh_q` at one fiber velocity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InducedSample {
    pub w: Vec<f64>,
    pub nonholonomic: Vec<f64>,
    pub riemannian: Vec<f64>,
    pub residual: f64,
}

/// One length-minimization run of stage (e).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizationSample {
    pub endpoint: Vec<f64>,
    pub amplitude: f64,
    pub mode: usize,
    pub initial_length: f64,
    pub final_length: f64,
    /// `‖v‖_{G_0(0)}`
    pub radial_length: f64,
    pub distance_to_radial: f64,
    pub status: MinimizeStatus,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub curve: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub system: String,
    pub metric: MetricChoice,
    pub metric_radius: f64,
    pub stages: Vec<StageReport>,
    pub all_pass: bool,
    pub equivalence: Option<EquivalenceReport>,
    pub induced: Vec<InducedSample>,
    pub minimization: Vec<MinimizationSample>,
}

/// Builds the fiber metric for a system and metric choice.
pub fn fiber_metric(
    entry: &SystemRegistryEntry<f64>,
    choice: MetricChoice,
    radius: Option<f64>,
) -> Result<VectorMetric<f64>> {
    let k = entry.chart.rank();
    let metric = match choice {
        MetricChoice::Flat => VectorMetric::flat(k, entry.default_domain()),
        MetricChoice::Remark21 => {
            if k != 2 {
                return Err(GeomError::InvalidArgument(
                    "the conformal test metric lives on R^2".into(),
                ));
            }
            systems::remark21_conformal(
                CONFORMAL_AB.0,
                CONFORMAL_AB.1,
                0.3,
                systems::REMARK21_STEPS,
            )
        }
        MetricChoice::PullbackGmod => {
            let gmod = entry.gmod.clone().ok_or_else(|| {
                GeomError::InvalidArgument(format!("system `{}` has no g^mod metric", entry.id))
            })?;
            let phi = exp_map_fn(entry)?;
            let j = gmod.at(entry.base().coords())?[(3, 3)];
            let r = systems::gmod_pullback_radius(j);
            pullback_metric(
                format!("pullback-gmod:{}", entry.id),
                phi,
                gmod,
                k,
                Fd::jacobian(),
                crate::DomainSpec::ball(r),
            )
        }
        MetricChoice::PullbackAmbient => {
            let phi = exp_map_fn(entry)?;
            pullback_metric(
                format!("pullback-ambient:{}", entry.id),
                phi,
                entry.system.metric().clone(),
                k,
                Fd::jacobian(),
                entry.default_domain(),
            )
        }
    };
    Ok(match radius {
        Some(r) => metric.with_domain(crate::DomainSpec::ball(r)),
        None => metric,
    })
}

/// The exponential as a map `R^k → R^n`: the closed form when the registry
/// has one, otherwise the integrator.
fn exp_map_fn(entry: &SystemRegistryEntry<f64>) -> Result<MapFn<f64>> {
    if let Some(f) = &entry.exp_closed {
        return Ok(f.clone());
    }
    let patch = entry.default_patch()?.with_steps(200);
    Ok(Arc::new(move |w: &DVector<f64>| {
        Ok(patch.exp_nh(w)?.into_coords())
    }))
}

/// Inverse of the induced coordinates `w ↦ select(exp(w))`.
fn induced_inverse_fn(entry: &SystemRegistryEntry<f64>, patch: &ExpMapPatch<f64>) -> MapFn<f64> {
    if let Some(f) = &entry.induced_inverse {
        return f.clone();
    }
    let patch = patch.clone().with_steps(200);
    let select = entry.select.clone();
    Arc::new(move |x: &DVector<f64>| {
        let mut target = patch.base().clone();
        for (i, &s) in select.iter().enumerate() {
            target[s] = x[i];
        }
        let sol = patch.exp_nh_inverse(
            &ChartPoint::new(target)?,
            &select,
            &NewtonOptions::default(),
        )?;
        Ok(sol.w)
    })
}

fn select(q: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| q[i]))
}

fn stage_a(
    entry: &SystemRegistryEntry<f64>,
    patch: &ExpMapPatch<f64>,
    probes: &[DVector<f64>],
) -> Result<StageReport> {
    let mut rep = StageReport::new("a-exponential-map");
    let k = patch.chart().rank();
    let j0 = patch.exp_nh_jacobian(&DVector::zeros(k), Fd::jacobian())?;
    rep.check(
        "jacobian_at_zero_vs_inclusion",
        (j0 - patch.chart().basis()).amax(),
        1e-6,
    );
    let t_grid = unit_grid::<f64>(11);
    let mut rescaling: f64 = 0.0;
    let mut closed: f64 = 0.0;
    for w in probes {
        rescaling = rescaling.max(patch.rescaling_residual(w, &t_grid)?);
        if let Some(f) = &entry.exp_closed {
            closed = closed.max(sup_norm(&(patch.exp_nh(w)?.into_coords() - f(w)?)));
        }
    }
    rep.check("rescaling_residual", rescaling, 1e-8);
    if entry.exp_closed.is_some() {
        rep.check("closed_form_error", closed, 1e-7);
    }
    Ok(rep)
}

fn stage_d(
    entry: &SystemRegistryEntry<f64>,
    patch: &ExpMapPatch<f64>,
    g0: &VectorMetric<f64>,
    probes: &[DVector<f64>],
    cfg: &VerifyConfig,
) -> Result<(StageReport, Vec<InducedSample>)> {
    let mut rep = StageReport::new("d-induced-metric");
    let k = patch.chart().rank();
    let sel = &entry.select;
    let b_sel = DMatrix::from_fn(k, k, |i, j| patch.chart().basis()[(sel[i], j)]);
    let x0 = select(patch.base(), sel);
    // g^nh_q in induced coordinates: pull G_0 back through the inverse of
    // the induced coordinates.
    let inverse = induced_inverse_fn(entry, patch);
    let h = pullback_metric(
        "g-nh",
        inverse,
        g0.field().clone(),
        k,
        Fd::jacobian(),
        g0.domain().clone(),
    );
    let opts = GeodesicOptions {
        steps: cfg.geodesic_steps,
    };
    let mut samples = Vec::new();
    let mut worst: f64 = 0.0;
    for w in probes {
        let nh = select(&patch.exp_nh(w)?.into_coords(), sel);
        let xi = &b_sel * w;
        let rm = riemannian::riemannian_exp(h.field(), &x0, &xi, &opts)?;
        let residual = sup_norm(&(&rm - &nh));
        worst = worst.max(residual);
        samples.push(InducedSample {
            w: coords_f64(w),
            nonholonomic: coords_f64(&nh),
            riemannian: coords_f64(&rm),
            residual,
        });
    }
    rep.check("exp_g_nh_vs_exp_nh", worst, cfg.tol);
    rep.notes
        .push(format!("induced coordinates: ambient indices {sel:?}"));
    Ok((rep, samples))
}

fn perpendicular(v: &DVector<f64>) -> DVector<f64> {
    if v.len() == 2 {
        DVector::from_column_slice(&[-v[1], v[0]]) / v.norm()
    } else {
        let mut e = DVector::zeros(v.len());
        e[0] = 1.0;
        let p = &e - v * (v.dot(&e) / v.norm_squared());
        p.clone() / p.norm()
    }
}

fn stage_e(
    g0: &VectorMetric<f64>,
    cfg: &VerifyConfig,
) -> Result<(StageReport, Vec<MinimizationSample>)> {
    let mut rep = StageReport::new("e-length-minimization");
    let k = g0.dim();
    let bound = g0.domain().bound();
    let zero = DVector::zeros(k);
    // Endpoints on directions spread over the half circle, at 60% of the bound.
    let endpoints: Vec<DVector<f64>> = (0..cfg.minimize_endpoints.max(1))
        .map(|i| {
            let ang =
                std::f64::consts::PI * (0.15 + i as f64) / cfg.minimize_endpoints.max(1) as f64;
            let mut v = DVector::zeros(k);
            v[0] = 0.6 * bound * ang.cos();
            v[1 % k] += 0.6 * bound * ang.sin();
            v
        })
        .collect();
    let mut samples = Vec::new();
    let mut worst_dist: f64 = 0.0;
    let mut worst_len: f64 = 0.0;
    let mut increased = false;
    for v in &endpoints {
        let dir = perpendicular(v);
        let radial = g0.origin_norm(v)?;
        for &(amp, mode) in &cfg.perturbations {
            let init = DiscreteCurve::perturbed_line(
                &zero,
                v,
                cfg.minimize_nodes,
                amp * v.norm(),
                mode,
                &dir,
            )?;
            let res = minimize_length(g0.field(), &init, &MinimizeOptions::default())?;
            let dist = res.curve.distance_to_segment(&zero, v) / v.norm();
            let len_err = (res.final_length - radial).abs() / radial;
            worst_dist = worst_dist.max(dist);
            worst_len = worst_len.max(len_err);
            increased |= res.final_length > res.initial_length + 1e-12;
            samples.push(MinimizationSample {
                endpoint: coords_f64(v),
                amplitude: amp,
                mode,
                initial_length: res.initial_length,
                final_length: res.final_length,
                radial_length: radial,
                distance_to_radial: dist,
                status: res.status,
                iterations: res.iterations,
                trace: res.trace.clone(),
                curve: res.curve.nodes().iter().map(coords_f64).collect(),
            });
        }
    }
    rep.check("distance_to_radial_over_norm", worst_dist, cfg.minimize_tol);
    rep.check("length_vs_radial_relative", worst_len, cfg.minimize_tol);
    if increased {
        rep.pass = false;
        rep.notes.push("a minimization increased the length".into());
    }
    Ok((rep, samples))
}

/// Runs stages (a)–(e). Numerical errors inside a stage are reported as a
/// failure of that stage; later stages that depend on it are skipped.
pub fn verify_theorem(
    entry: &SystemRegistryEntry<f64>,
    cfg: &VerifyConfig,
) -> Result<VerifyReport> {
    if cfg.tol <= 0.0 || cfg.minimize_tol <= 0.0 {
        return Err(GeomError::InvalidArgument(
            "tolerances must be positive".into(),
        ));
    }
    if cfg.grid < 2 || cfg.probe_points < 2 || cfg.minimize_nodes < 2 {
        return Err(GeomError::InvalidArgument(
            "grid resolutions must be at least 2".into(),
        ));
    }
    if cfg.metric == MetricChoice::PullbackGmod && entry.gmod.is_none() {
        return Err(GeomError::InvalidArgument(format!(
            "system `{}` has no g^mod metric",
            entry.id
        )));
    }
    if cfg.metric == MetricChoice::Remark21 && entry.chart.rank() != 2 {
        return Err(GeomError::InvalidArgument(
            "the conformal test metric lives on R^2".into(),
        ));
    }

    let mut stages = Vec::new();
    let mut report = VerifyReport {
        system: entry.id.clone(),
        metric: cfg.metric,
        metric_radius: f64::NAN,
        stages: Vec::new(),
        all_pass: false,
        equivalence: None,
        induced: Vec::new(),
        minimization: Vec::new(),
    };

    // (b) first: its domain determines the probes of every other stage.
    let g0 = fiber_metric(entry, cfg.metric, cfg.radius);
    let patch_radius = match &g0 {
        Ok(g) => entry.default_radius.max(g.domain().bound() + 0.01),
        Err(_) => entry.default_radius,
    };
    let patch = entry.patch_with_radius(patch_radius)?.with_steps(cfg.steps);

    let probes_a = {
        let r = entry.default_radius.min(patch_radius) * 0.8;
        [0.1, 0.7, 1.9, 3.9]
            .iter()
            .map(|&a: &f64| DVector::from_column_slice(&[r * a.cos(), r * a.sin()]))
            .filter(|w| w.len() == entry.chart.rank())
            .collect::<Vec<_>>()
    };
    stages.push(
        stage_a(entry, &patch, &probes_a)
            .unwrap_or_else(|e| StageReport::failed("a-exponential-map", &e)),
    );

    let g0 = match g0 {
        Ok(g) => {
            let mut rep = StageReport::new("b-fiber-metric");
            rep.notes
                .push(format!("metric {} on {:?}", g.name(), g.domain()));
            report.metric_radius = g.domain().bound();
            match g.at(&DVector::zeros(g.dim())) {
                Ok(m) if crate::linalg::is_positive_definite(&m) => {}
                Ok(_) => {
                    rep.pass = false;
                    rep.notes.push("G_0(0) is not positive definite".into());
                }
                Err(e) => {
                    rep.pass = false;
                    rep.notes.push(format!("error: {e}"));
                }
            }
            stages.push(rep);
            g
        }
        Err(e) => {
            stages.push(StageReport::failed("b-fiber-metric", &e));
            for s in [
                "c-gauss-equivalences",
                "d-induced-metric",
                "e-length-minimization",
            ] {
                let mut r = StageReport::failed(s, &e);
                r.notes = vec!["skipped: no fiber metric".into()];
                stages.push(r);
            }
            report.stages = stages;
            return Ok(report);
        }
    };

    let eq_opts = EquivalenceOptions {
        grid: GridSpec::finite_difference()
            .with_points(cfg.grid)
            .with_tol(cfg.tol),
        probe_points: cfg.probe_points,
        line_tol: cfg.tol,
        exp_tol: cfg.tol,
        geodesic: GeodesicOptions {
            steps: cfg.geodesic_steps,
        },
        ..EquivalenceOptions::default()
    };
    match gauss_equivalence_check(&g0, &eq_opts) {
        Ok(r) => {
            let mut rep = StageReport::new("c-gauss-equivalences");
            rep.check("gauss_sweep_max", r.gauss.max_abs_residual, cfg.tol);
            rep.check("line_geodesic_residual", r.line_residual, cfg.tol);
            rep.check("exp_minus_inclusion", r.exp_residual, cfg.tol);
            if r.gauss.not_positive_definite_at.is_some() {
                rep.pass = false;
                rep.notes
                    .push("metric is not positive definite on the domain".into());
            }
            if !r.agree {
                rep.notes.push("the three verdicts disagree".into());
            }
            stages.push(rep);
            report.equivalence = Some(r);
        }
        Err(e) => stages.push(StageReport::failed("c-gauss-equivalences", &e)),
    }

    let probes = probe_velocities(&g0, cfg.probe_points, 0.8);
    match stage_d(entry, &patch, &g0, &probes, cfg) {
        Ok((rep, samples)) => {
            stages.push(rep);
            report.induced = samples;
        }
        Err(e) => stages.push(StageReport::failed("d-induced-metric", &e)),
    }

    match stage_e(&g0, cfg) {
        Ok((rep, samples)) => {
            stages.push(rep);
            report.minimization = samples;
        }
        Err(e) => stages.push(StageReport::failed("e-length-minimization", &e)),
    }

    report.all_pass = stages.iter().all(|s| s.pass);
    report.stages = stages;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_choice_round_trip() {
        for s in ["flat", "remark21", "pullback-gmod", "pullback-ambient"] {
            assert_eq!(s.parse::<MetricChoice>().unwrap().to_string(), s);
        }
        assert!("round".parse::<MetricChoice>().is_err());
    }

    #[test]
    fn gmod_requires_disk() {
        let cfg = VerifyConfig {
            metric: MetricChoice::PullbackGmod,
            ..VerifyConfig::default()
        };
        assert!(verify_theorem(&systems::particle_system(), &cfg).is_err());
    }

    #[test]
    fn perpendicular_is_unit_and_orthogonal() {
        let v = DVector::from_column_slice(&[0.3, 0.4]);
        let p = perpendicular(&v);
        assert!((p.norm() - 1.0).abs() < 1e-15 && p.dot(&v).abs() < 1e-15);
        let v = DVector::from_column_slice(&[0.3, 0.4, 0.1]);
        let p = perpendicular(&v);
        assert!((p.norm() - 1.0).abs() < 1e-15 && p.dot(&v).abs() < 1e-15);
    }
}
