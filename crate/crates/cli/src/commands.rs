//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use nhexp::riemannian::{minimize_length, DiscreteCurve, MinimizeOptions, Objective};
use nhexp::systems::{self, SystemRegistryEntry, DISCREPANCY_NOTES};
use nhexp::verify::{verify_theorem, MetricChoice, VerifyConfig};
use nhexp::{
    check_gauss, integrate_nh_geodesic, pullback_metric, unit_grid, ChartPoint, DomainSpec,
    ExpMapPatch, Fd, GeomError, GridSpec, IntegratorOptions, MetricField, TangentChart,
    VectorMetric,
};

use crate::config::{ConfigError, RunConfig};
use crate::output::{indexed, write_csv, write_json};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.0)
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::InvalidArgument(_) | GeomError::DimensionMismatch { .. } => {
                Self::Config(e.to_string())
            }
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Config(format!("i/o: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

fn vec_f64(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn entry(cfg: &RunConfig) -> CliResult<SystemRegistryEntry<f64>> {
    Ok(systems::system_by_id(
        &cfg.system,
        cfg.inertia_i,
        cfg.inertia_j,
    )?)
}

fn prepare_out(cfg: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.out)?;
    Ok(())
}

/// Summary printed on stdout after a successful run.
pub struct Outcome {
    pub summary: String,
}

pub fn simulate(cfg: &RunConfig) -> CliResult<Outcome> {
    let e = entry(cfg)?;
    let sys = &e.system;
    let (n, k) = (sys.dim(), sys.rank());
    let base = e.base().coords().clone();
    let q0 = match &cfg.q0 {
        Some(q) if q.len() == n => DVector::from_column_slice(q),
        Some(q) => {
            return config_err(format!(
                "q0 has {} entries, system `{}` needs {n}",
                q.len(),
                e.id
            ))
        }
        None => base.clone(),
    };
    let at_base = q0 == base;
    let (v0, fiber) = if cfg.v0.len() == k {
        let w = DVector::from_column_slice(&cfg.v0);
        let chart = if at_base {
            e.chart.clone()
        } else {
            TangentChart::from_distribution(sys, ChartPoint::new(q0.clone())?)?
        };
        (chart.velocity(&w), Some(w))
    } else if cfg.v0.len() == n {
        (DVector::from_column_slice(&cfg.v0), None)
    } else {
        return config_err(format!(
            "v0 has {} entries; system `{}` takes {k} fiber coordinates or {n} ambient components",
            cfg.v0.len(),
            e.id
        ));
    };
    let traj = integrate_nh_geodesic(
        sys,
        &ChartPoint::new(q0)?,
        &v0,
        cfg.duration,
        cfg.steps,
        &IntegratorOptions::default(),
    )?;

    prepare_out(cfg)?;
    let mut header = vec!["t".to_string()];
    header.extend(indexed("q", n));
    header.extend(indexed("v", n));
    header.extend(["speed".to_string(), "constraint_residual".to_string()]);
    let rows: Vec<Vec<f64>> = traj
        .samples()
        .iter()
        .map(|s| {
            let mut r = vec![s.t];
            r.extend(s.q.iter());
            r.extend(s.v.iter());
            r.extend([s.speed, s.constraint_residual]);
            r
        })
        .collect();
    write_csv(&cfg.out.join("trajectory.csv"), &header, &rows)?;

    let closed = match (&e.exp_closed, &fiber, at_base) {
        (Some(f), Some(w), true) => {
            let c = f(&(w * cfg.duration))?;
            let err = (traj.endpoint() - &c).amax();
            Some(json!({ "endpoint": vec_f64(&c), "max_abs_error": err }))
        }
        _ => None,
    };
    let diag = traj.diagnostics();
    write_json(
        &cfg.out.join("simulate.json"),
        &json!({
            "config": cfg,
            "system": e.id,
            "rows": rows.len(),
            "endpoint": vec_f64(traj.endpoint()),
            "diagnostics": diag,
            "closed_form": closed,
        }),
    )?;
    Ok(Outcome {
        summary: format!(
            "simulate: {} rows, endpoint {:?}",
            rows.len(),
            vec_f64(traj.endpoint())
        ),
    })
}

/// Uniform product grid over the box `Π [-e_i, e_i]`.
fn box_grid(extent: &[f64], n: usize) -> Vec<DVector<f64>> {
    let k = extent.len();
    let total = n.pow(k as u32);
    (0..total)
        .map(|mut idx| {
            let mut w = DVector::zeros(k);
            for axis in (0..k).rev() {
                let i = idx % n;
                idx /= n;
                w[axis] = extent[axis] * (-1.0 + 2.0 * i as f64 / (n - 1) as f64);
            }
            w
        })
        .collect()
}

fn patch_covering(
    e: &SystemRegistryEntry<f64>,
    reach: f64,
    steps: usize,
) -> CliResult<ExpMapPatch<f64>> {
    Ok(e.patch_with_radius(reach * (1.0 + 1e-9) + 1e-12)?
        .with_steps(steps))
}

pub fn expmap_grid(cfg: &RunConfig) -> CliResult<Outcome> {
    let e = entry(cfg)?;
    let (n, k) = (e.system.dim(), e.system.rank());
    let extent = match &cfg.extent {
        Some(x) if x.len() == k => x.clone(),
        Some(x) => {
            return config_err(format!(
                "extent has {} entries, the fiber has dimension {k}",
                x.len()
            ))
        }
        None => vec![cfg.radius.unwrap_or(e.default_radius); k],
    };
    let reach = extent.iter().map(|x| x * x).sum::<f64>().sqrt();
    let patch = patch_covering(&e, reach, cfg.steps)?;
    let grid = box_grid(&extent, cfg.grid);

    let mut header = indexed("w", k);
    header.extend(indexed("q", n));
    if e.exp_closed.is_some() {
        header.extend(indexed("closed", n));
        header.push("error".into());
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut max_err: f64 = 0.0;
    for w in &grid {
        let q = patch.exp_nh(w)?.into_coords();
        let mut row = vec_f64(w);
        row.extend(q.iter());
        if let Some(f) = &e.exp_closed {
            let c = f(w)?;
            let err = (&q - &c).amax();
            max_err = max_err.max(err);
            row.extend(c.iter());
            row.push(err);
        }
        rows.push(row);
    }

    // Error at half the step count, for the convergence order.
    let mut half = None;
    if let Some(f) = &e.exp_closed {
        let coarse = patch.clone().with_steps((cfg.steps / 2).max(1));
        let mut m: f64 = 0.0;
        for w in &grid {
            m = m.max((coarse.exp_nh(w)?.into_coords() - f(w)?).amax());
        }
        half = Some(m);
    }

    let jac = patch.exp_nh_jacobian(&DVector::zeros(k), Fd::jacobian())?;
    let jac_err = (jac - e.chart.basis()).amax();
    let t_grid = unit_grid::<f64>(11);
    let mut rescaling: f64 = 0.0;
    for ang in [0.1f64, 0.7, 1.9, 3.9] {
        let mut w = DVector::zeros(k);
        w[0] = 0.8 * extent[0] * ang.cos();
        w[1 % k] += 0.8 * extent[1 % k] * ang.sin();
        rescaling = rescaling.max(patch.rescaling_residual(&w, &t_grid)?);
    }

    prepare_out(cfg)?;
    write_csv(&cfg.out.join("expmap_grid.csv"), &header, &rows)?;
    write_json(
        &cfg.out.join("expmap_grid.json"),
        &json!({
            "config": cfg,
            "system": e.id,
            "points": rows.len(),
            "extent": extent,
            "max_error": e.exp_closed.as_ref().map(|_| max_err),
            "max_error_half_steps": half,
            "convergence_ratio": half.map(|h| h / max_err),
            "jacobian_at_zero_error": jac_err,
            "rescaling_residual": rescaling,
        }),
    )?;
    Ok(Outcome {
        summary: format!(
            "expmap-grid: {} points, max error {}, jacobian error {jac_err:.3e}, rescaling {rescaling:.3e}",
            rows.len(),
            e.exp_closed.as_ref().map_or("n/a".to_string(), |_| format!("{max_err:.3e}"))
        ),
    })
}

fn metric(cfg: &RunConfig, default: &str) -> CliResult<VectorMetric<f64>> {
    let id = cfg.metric.as_deref().unwrap_or(default);
    Ok(systems::metric_by_id(
        id,
        cfg.radius,
        cfg.inertia_i,
        cfg.inertia_j,
    )?)
}

fn gauss_grid(cfg: &RunConfig, g: &VectorMetric<f64>) -> GridSpec<f64> {
    let base = if g.field().has_analytic_partials() || g.name() == "flat" {
        GridSpec::analytic()
    } else {
        GridSpec::finite_difference()
    };
    let spec = base.with_points(cfg.grid);
    match cfg.tol {
        Some(t) => spec.with_tol(t),
        None => spec,
    }
}

pub fn gauss_check(cfg: &RunConfig) -> CliResult<Outcome> {
    let g = metric(cfg, "flat")?;
    let spec = gauss_grid(cfg, &g);
    let report = check_gauss(&g, &spec)?;
    prepare_out(cfg)?;
    write_json(
        &cfg.out.join("gauss.json"),
        &json!({
            "config": cfg,
            "metric": g.name(),
            "domain": format!("{:?}", g.domain()),
            "grid": {
                "points_per_axis": spec.points_per_axis,
                "margin_fraction": spec.margin_fraction,
                "nodes": report.nodes,
            },
            "tol": spec.tol,
            "max_residual": report.max_abs_residual,
            "argmax_w": report.argmax_w,
            "argmax_z": report.argmax_z,
            "verdict": report.verdict,
            "not_positive_definite_at": report.not_positive_definite_at,
        }),
    )?;
    Ok(Outcome {
        summary: format!(
            "gauss-check {}: {} (max residual {:.3e})",
            g.name(),
            serde_json::to_value(report.verdict)
                .unwrap_or(Value::Null)
                .as_str()
                .unwrap_or("?"),
            report.max_abs_residual
        ),
    })
}

/// Flat `G_0` pushed forward to the particle's induced coordinates `(x, y)`.
fn particle_induced_metric() -> VectorMetric<f64> {
    let e = systems::particle_system::<f64>();
    let inverse = e
        .induced_inverse
        .clone()
        .expect("particle has a closed-form inverse");
    pullback_metric(
        "induced:particle",
        inverse,
        MetricField::flat(2),
        2,
        Fd::jacobian(),
        DomainSpec::ball(3.0),
    )
}

#[derive(Serialize)]
struct PullbackSummary {
    points: usize,
    max_gauss_residual: Option<f64>,
    max_oracle_error: Option<f64>,
    max_identity_residual: Option<f64>,
    max_reference_delta: Option<f64>,
    spot_residual: Option<f64>,
}

pub fn pullback(cfg: &RunConfig) -> CliResult<Outcome> {
    let default = format!("pullback:{}", cfg.system);
    let id = cfg.metric.clone().unwrap_or(default);
    let components = |m: &nalgebra::DMatrix<f64>| [m[(0, 0)], m[(0, 1)], m[(1, 1)]];
    let mut header: Vec<String> = ["w_1", "w_2", "G_11", "G_12", "G_22"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    let mut summary = PullbackSummary {
        points: 0,
        max_gauss_residual: None,
        max_oracle_error: None,
        max_identity_residual: None,
        max_reference_delta: None,
        spot_residual: None,
    };
    let upd = |slot: &mut Option<f64>, x: f64| *slot = Some(slot.unwrap_or(0.0).max(x));

    if id == "induced:particle" {
        let g = particle_induced_metric();
        let extent = match &cfg.extent {
            Some(x) if x.len() == 2 => x.clone(),
            Some(_) => return config_err("extent needs two entries"),
            None => vec![1.0, 1.5],
        };
        header = [
            "x", "y", "E", "F", "G", "oracle_E", "oracle_F", "oracle_G", "error",
        ]
        .map(String::from)
        .to_vec();
        for p in box_grid(&extent, cfg.grid) {
            let m = components(&g.at(&p)?);
            let (oe, of, og) = systems::example52_metric_closed(p[0], p[1]);
            let err = (m[0] - oe)
                .abs()
                .max((m[1] - of).abs())
                .max((m[2] - og).abs());
            upd(&mut summary.max_oracle_error, err);
            rows.push(vec![p[0], p[1], m[0], m[1], m[2], oe, of, og, err]);
        }
    } else {
        let g = systems::metric_by_id(&id, cfg.radius, cfg.inertia_i, cfg.inertia_j)?;
        if !g.name().starts_with("pullback") {
            return config_err(format!("`{id}` is not a pullback metric"));
        }
        let gmod = g.name() == "pullback-gmod:disk";
        header.extend(["gauss_e1", "gauss_e2"].map(String::from));
        if gmod {
            header.extend(
                [
                    "oracle_11",
                    "oracle_12",
                    "oracle_22",
                    "oracle_error",
                    "identity_1",
                    "identity_2",
                    "reference_11",
                    "reference_12",
                    "reference_22",
                ]
                .map(String::from),
            );
        }
        let (i, j) = (cfg.inertia_i, cfg.inertia_j);
        let g0 = g.at(&DVector::zeros(2))?;
        for w in GridSpec::<f64>::analytic()
            .with_points(cfg.grid)
            .nodes(2, g.domain())
        {
            let gw = g.at(&w)?;
            let m = components(&gw);
            let gw_w = &gw * &w;
            let g0_w = &g0 * &w;
            let res = [gw_w[0] - g0_w[0], gw_w[1] - g0_w[1]];
            upd(
                &mut summary.max_gauss_residual,
                res[0].abs().max(res[1].abs()),
            );
            let mut row = vec![w[0], w[1], m[0], m[1], m[2], res[0], res[1]];
            if gmod {
                let (u, v) = (w[0], w[1]);
                let (ce, cf, cg) = systems::disk_gmod_pullback_closed(i, j, u, v);
                let err = (m[0] - ce)
                    .abs()
                    .max((m[1] - cf).abs())
                    .max((m[2] - cg).abs());
                let id1 = gw_w[0] - (i + 1.0) * u;
                let id2 = gw_w[1] - j * v;
                let (re, rf, rg) = systems::disk_gmod_pullback_reference(i, j, u, v);
                upd(&mut summary.max_oracle_error, err);
                upd(&mut summary.max_identity_residual, id1.abs().max(id2.abs()));
                upd(
                    &mut summary.max_reference_delta,
                    (re - ce).abs().max((rf - cf).abs()).max((rg - cg).abs()),
                );
                row.extend([ce, cf, cg, err, id1, id2, re, rf, rg]);
            }
            rows.push(row);
        }
        if g.name() == "pullback-ambient:particle" {
            let w = DVector::from_column_slice(&[1.0, 1.0]);
            summary.spot_residual = Some((&g.at(&w)? * &w)[0] - (&g0 * &w)[0]);
        }
    }
    summary.points = rows.len();

    prepare_out(cfg)?;
    write_csv(&cfg.out.join("pullback.csv"), &header, &rows)?;
    write_json(
        &cfg.out.join("pullback.json"),
        &json!({ "config": cfg, "metric": id, "summary": summary }),
    )?;
    Ok(Outcome {
        summary: format!("pullback {id}: {} points", rows.len()),
    })
}

pub fn verify(cfg: &RunConfig) -> CliResult<Outcome> {
    let e = entry(cfg)?;
    let choice: MetricChoice = cfg.metric.as_deref().unwrap_or("flat").parse()?;
    let vcfg = VerifyConfig {
        metric: choice,
        steps: cfg.steps,
        radius: cfg.radius,
        grid: cfg.grid,
        probe_points: cfg.probe_points,
        tol: cfg.tol.unwrap_or(1e-6),
        geodesic_steps: cfg.geodesic_steps,
        minimize_nodes: cfg.nodes,
        ..VerifyConfig::default()
    };
    let report = verify_theorem(&e, &vcfg)?;

    prepare_out(cfg)?;
    let k = e.system.rank();
    let mut header = indexed("w", k);
    header.extend(indexed("nonholonomic", k));
    header.extend(indexed("riemannian", k));
    header.push("residual".into());
    let rows: Vec<Vec<f64>> = report
        .induced
        .iter()
        .map(|s| {
            let mut r = s.w.clone();
            r.extend(&s.nonholonomic);
            r.extend(&s.riemannian);
            r.push(s.residual);
            r
        })
        .collect();
    write_csv(&cfg.out.join("verify_induced.csv"), &header, &rows)?;
    let trace: Vec<Vec<f64>> = report
        .minimization
        .iter()
        .enumerate()
        .flat_map(|(run, m)| {
            m.trace
                .iter()
                .enumerate()
                .map(move |(it, &l)| vec![run as f64, it as f64, l])
        })
        .collect();
    write_csv(
        &cfg.out.join("verify_minimization.csv"),
        &["run", "iteration", "length"].map(String::from),
        &trace,
    )?;
    write_json(
        &cfg.out.join("verify.json"),
        &json!({ "config": cfg, "verify": vcfg, "report": report }),
    )?;

    let lines: Vec<String> = report
        .stages
        .iter()
        .map(|s| format!("{} {}", if s.pass { "PASS" } else { "FAIL" }, s.stage))
        .collect();
    if report.all_pass {
        Ok(Outcome {
            summary: lines.join("\n"),
        })
    } else {
        let failed: Vec<&str> = report
            .stages
            .iter()
            .filter(|s| !s.pass)
            .map(|s| s.stage.as_str())
            .collect();
        Err(CliError::Numerical(format!(
            "{}\nfailed stages: {}",
            lines.join("\n"),
            failed.join(", ")
        )))
    }
}

fn perpendicular(v: &DVector<f64>) -> DVector<f64> {
    if v.len() == 2 {
        return DVector::from_column_slice(&[-v[1], v[0]]) / v.norm();
    }
    let mut e = DVector::zeros(v.len());
    let axis = v.iamin();
    e[axis] = 1.0;
    let p = &e - v * (v.dot(&e) / v.norm_squared());
    p.normalize()
}

pub fn minimize(cfg: &RunConfig) -> CliResult<Outcome> {
    let g = metric(cfg, "flat")?;
    let k = g.dim();
    let from = match &cfg.from {
        Some(a) if a.len() == k => DVector::from_column_slice(a),
        Some(_) => return config_err(format!("from needs {k} entries")),
        None => DVector::zeros(k),
    };
    if cfg.to.len() != k {
        return config_err(format!("to needs {k} entries"));
    }
    let to = DVector::from_column_slice(&cfg.to);
    let chord = &to - &from;
    if chord.norm() == 0.0 {
        return config_err("endpoints coincide");
    }
    let init = DiscreteCurve::perturbed_line(
        &from,
        &to,
        cfg.nodes,
        cfg.amplitude,
        cfg.mode,
        &perpendicular(&chord),
    )?;
    let init = if cfg.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let last = init.len() - 1;
        let nodes = init
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if i == 0 || i == last {
                    p.clone()
                } else {
                    p.map(|x| x + cfg.jitter * rng.random_range(-1.0..1.0))
                }
            })
            .collect();
        DiscreteCurve::new(nodes)?
    } else {
        init
    };
    let opts = MinimizeOptions {
        objective: if cfg.objective == "energy" {
            Objective::Energy
        } else {
            Objective::Length
        },
        max_iters: cfg.max_iters,
        grad_tol: cfg.tol.unwrap_or(1e-6),
        ..MinimizeOptions::default()
    };
    let res = minimize_length(g.field(), &init, &opts)?;

    prepare_out(cfg)?;
    let trace: Vec<Vec<f64>> = res
        .trace
        .iter()
        .enumerate()
        .map(|(i, &l)| vec![i as f64, l])
        .collect();
    write_csv(
        &cfg.out.join("minimize_trace.csv"),
        &["iteration", "length"].map(String::from),
        &trace,
    )?;
    let mut header = vec!["node".to_string()];
    header.extend(indexed("initial", k));
    header.extend(indexed("final", k));
    let rows: Vec<Vec<f64>> = init
        .nodes()
        .iter()
        .zip(res.curve.nodes())
        .enumerate()
        .map(|(i, (a, b))| {
            let mut r = vec![i as f64];
            r.extend(a.iter());
            r.extend(b.iter());
            r
        })
        .collect();
    write_csv(&cfg.out.join("minimize_curve.csv"), &header, &rows)?;

    let g_from = g.at(&from)?;
    let chord_norm = chord.dot(&(&g_from * &chord)).max(0.0).sqrt();
    let monotone = res.trace.windows(2).all(|p| p[1] <= p[0]);
    let distance = res.curve.distance_to_segment(&from, &to);
    write_json(
        &cfg.out.join("minimize.json"),
        &json!({
            "config": cfg,
            "metric": g.name(),
            "initial_length": res.initial_length,
            "final_length": res.final_length,
            "chord_norm_at_start": chord_norm,
            "distance_to_radial": distance,
            "status": res.status,
            "iterations": res.iterations,
            "grad_norm": res.grad_norm,
            "monotone": monotone,
        }),
    )?;
    Ok(Outcome {
        summary: format!(
            "minimize {}: length {:.10} -> {:.10} ({:?}, {} iterations), distance to segment {distance:.3e}",
            g.name(),
            res.initial_length,
            res.final_length,
            res.status,
            res.iterations
        ),
    })
}

const ARTIFACTS: [&str; 6] = [
    "simulate",
    "expmap_grid",
    "gauss",
    "pullback",
    "verify",
    "minimize",
];

fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{} is empty", path.display())))?
        .split(',')
        .map(String::from)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((header, rows))
}

type ColumnPair = (&'static str, &'static str);

/// Writes a two-column plot file from the first `(x, y)` column pair present
/// in the source table. Returns `None` if the table or all pairs are missing.
fn plot_file(
    out: &Path,
    name: &str,
    src: &str,
    pairs: &[ColumnPair],
) -> CliResult<Option<(usize, &'static str, &'static str)>> {
    let path = out.join(src);
    if !path.exists() {
        return Ok(None);
    }
    let (header, rows) = read_csv(&path)?;
    let col = |c: &str| header.iter().position(|h| h == c);
    let Some((x, y, ix, iy)) = pairs
        .iter()
        .find_map(|&(x, y)| Some((x, y, col(x)?, col(y)?)))
    else {
        return Ok(None);
    };
    let data: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[ix], r[iy]]).collect();
    write_csv(&out.join(name), &[x.to_string(), y.to_string()], &data)?;
    Ok(Some((data.len(), x, y)))
}

pub fn report(cfg: &RunConfig) -> CliResult<Outcome> {
    let out = &cfg.out;
    let mut artifacts = Map::new();
    for name in ARTIFACTS {
        let path = out.join(format!("{name}.json"));
        if path.exists() {
            let text = fs::read_to_string(&path)?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            artifacts.insert(name.to_string(), value);
        }
    }
    if artifacts.is_empty() {
        return config_err(format!("no run artifacts found in {}", out.display()));
    }

    let mut stages = Map::new();
    if let Some(Value::Array(list)) = artifacts
        .get("verify")
        .and_then(|v| v.pointer("/report/stages"))
    {
        for s in list {
            if let (Some(name), Some(pass)) = (s["stage"].as_str(), s["pass"].as_bool()) {
                stages.insert(
                    name.to_string(),
                    Value::from(if pass { "PASS" } else { "FAIL" }),
                );
            }
        }
    }

    let mut plots = Map::new();
    let specs: [(&str, &str, &[ColumnPair]); 7] = [
        ("plot_trajectory.csv", "trajectory.csv", &[("q_1", "q_2")]),
        ("plot_speed.csv", "trajectory.csv", &[("t", "speed")]),
        (
            "plot_expmap_error.csv",
            "expmap_grid.csv",
            &[("w_1", "error")],
        ),
        (
            "plot_length_trace.csv",
            "minimize_trace.csv",
            &[("iteration", "length")],
        ),
        (
            "plot_verify_residual.csv",
            "verify_induced.csv",
            &[("w_1", "residual")],
        ),
        (
            "plot_verify_length.csv",
            "verify_minimization.csv",
            &[("iteration", "length")],
        ),
        (
            "plot_pullback.csv",
            "pullback.csv",
            &[("w_1", "gauss_e1"), ("x", "error")],
        ),
    ];
    for (name, src, pairs) in specs {
        if let Some((rows, x, y)) = plot_file(out, name, src, pairs)? {
            plots.insert(
                name.to_string(),
                json!({ "source": src, "x": x, "y": y, "rows": rows }),
            );
        }
    }

    write_json(
        &out.join("report.json"),
        &json!({
            "config": cfg,
            "artifacts": artifacts,
            "stages": stages,
            "plots": plots,
            "discrepancy_notes": DISCREPANCY_NOTES,
        }),
    )?;
    Ok(Outcome {
        summary: format!(
            "report: {} artifacts, {} plot files",
            artifacts.len(),
            plots.len()
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_grid_is_lexicographic_and_spans_extent() {
        let g = box_grid(&[1.0, 2.0], 3);
        assert_eq!(g.len(), 9);
        assert_eq!(vec_f64(&g[0]), [-1.0, -2.0]);
        assert_eq!(vec_f64(&g[1]), [-1.0, 0.0]);
        assert_eq!(vec_f64(&g[8]), [1.0, 2.0]);
    }

    #[test]
    fn perpendicular_directions() {
        for v in [vec![1.0, 1.0], vec![0.2, -0.3, 0.9]] {
            let v = DVector::from_vec(v);
            let p = perpendicular(&v);
            assert!(p.dot(&v).abs() < 1e-15 && (p.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn geometric_errors_map_to_exit_codes() {
        assert_eq!(
            CliError::from(GeomError::InvalidArgument("x".into())).exit_code(),
            2
        );
        assert_eq!(CliError::from(GeomError::BlowUp { t: 0.5 }).exit_code(), 3);
        assert_eq!(
            CliError::from(GeomError::NotPositiveDefinite { at: vec![] }).exit_code(),
            3
        );
    }
}
