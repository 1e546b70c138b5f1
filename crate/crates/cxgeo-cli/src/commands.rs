//! Subcommand implementations and the report writer.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cxgeo::calg::{cx, expm, mat2_inner, Cx};
use cxgeo::cmetric::{grid_csv, ClosedSurface, gauss_bonnet};
use cxgeo::families::{
    cr_at_coarse_positions, cylinder_regular_b, landslide_family, sweep_monodromy, HoloFamily,
    ParamGrid, RegularPair,
};
use cxgeo::immersion::{
    codazzi_residual, develop, gauss_residual, monodromy, ImmersionData, ShapeField,
};
use cxgeo::spaceforms::{
    g_metric_coeff, pseudo_embed, sl2_pair_to_so4, so4_to_sl2_pair, veronese, x_exp,
    x_geodesic_ode, f_iso, Mobius, ProjP1, XPoint, XTangent,
};
use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{perturbed_metric, Config};

pub enum CliError {
    Schema(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn schema(m: impl Into<String>) -> CliError {
    CliError::Schema(m.into())
}

fn numeric(e: cxgeo::Error) -> CliError {
    CliError::Numeric(e.to_string())
}

#[derive(Serialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Gate {
    fn new(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    refine: u32,
    seed: u64,
    config: &'a Config,
    results: BTreeMap<String, Value>,
    gates: Vec<Gate>,
    pass: bool,
    artifacts: Vec<String>,
}

type CmdOutput = (BTreeMap<String, Value>, Vec<Gate>, Vec<String>);

pub struct Invocation<'a> {
    pub command: &'a str,
    pub config: Config,
    pub out_dir: &'a Path,
    pub refine: u32,
    pub seed: u64,
}

/// Dispatches a subcommand and writes `report.json`; returns the
/// overall pass/fail.
pub fn run(inv: &Invocation) -> Result<bool, CliError> {
    fs::create_dir_all(inv.out_dir)
        .map_err(|e| CliError::Numeric(format!("cannot create output dir: {e}")))?;
    let (results, gates, artifacts) = match inv.command {
        "check-gc" => cmd_check_gc(inv)?,
        "develop" => cmd_develop(inv)?,
        "monodromy" => cmd_monodromy(inv)?,
        "sweep" => cmd_sweep(inv)?,
        "gauss-bonnet" => cmd_gauss_bonnet(inv)?,
        "geodesic" => cmd_geodesic(inv)?,
        "models" => cmd_models(inv)?,
        other => return Err(schema(format!("unknown command '{other}'"))),
    };
    let pass = gates.iter().all(|g| g.pass);
    let report = Report {
        command: inv.command,
        refine: inv.refine,
        seed: inv.seed,
        config: &inv.config,
        results,
        gates,
        pass,
        artifacts,
    };
    let path = inv.out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Numeric(format!("report serialization: {e}")))?;
    fs::write(&path, text + "\n")
        .map_err(|e| CliError::Numeric(format!("cannot write report: {e}")))?;
    Ok(pass)
}

fn write_artifact(
    out_dir: &Path,
    name: &str,
    text: &str,
    artifacts: &mut Vec<String>,
) -> Result<(), CliError> {
    let path: PathBuf = out_dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Numeric(format!("cannot write {name}: {e}")))?;
    artifacts.push(name.into());
    Ok(())
}

fn ratios(levels: &[f64]) -> Vec<f64> {
    levels
        .windows(2)
        .map(|w| if w[1] != 0.0 { w[0] / w[1] } else { f64::INFINITY })
        .collect()
}

fn cmd_check_gc(inv: &Invocation) -> Result<CmdOutput, CliError> {
    let cfg = &inv.config;
    let g = cfg.metric().map_err(schema)?;
    let psi = cfg.shape().map_err(schema)?;
    let mut domain = cfg.chart().map_err(schema)?;
    let mut gauss_levels = Vec::new();
    let mut codazzi_levels = Vec::new();
    let mut artifacts = Vec::new();
    for level in 0..=inv.refine {
        let data =
            ImmersionData::new(domain.clone(), g.clone(), psi.clone()).map_err(numeric)?;
        let (gf, gmax) = gauss_residual(&data).map_err(numeric)?;
        let (cf, cmax) = codazzi_residual(&data).map_err(numeric)?;
        if level == 0 {
            let c1: Vec<Cx> = cf.iter().map(|v| v[0]).collect();
            let c2: Vec<Cx> = cf.iter().map(|v| v[1]).collect();
            let csv = grid_csv(
                &domain,
                &[("gauss", &gf), ("codazzi_1", &c1), ("codazzi_2", &c2)],
            )
            .map_err(numeric)?;
            write_artifact(inv.out_dir, "gc_residuals.csv", &csv, &mut artifacts)?;
        }
        gauss_levels.push(gmax);
        codazzi_levels.push(cmax);
        domain = domain.refined();
    }
    let mut results = BTreeMap::new();
    results.insert("gauss_max".into(), json!(gauss_levels));
    results.insert("codazzi_max".into(), json!(codazzi_levels));
    results.insert("gauss_ratios".into(), json!(ratios(&gauss_levels)));
    results.insert("codazzi_ratios".into(), json!(ratios(&codazzi_levels)));
    let gates = vec![
        Gate::new("gauss-residual", gauss_levels[0], cfg.tolerances.gc_gate),
        Gate::new("codazzi-residual", codazzi_levels[0], cfg.tolerances.gc_gate),
    ];
    Ok((results, gates, artifacts))
}

fn gc_gates(data: &ImmersionData, threshold: f64) -> Result<(Vec<Gate>, bool), CliError> {
    let (_, gmax) = gauss_residual(data).map_err(numeric)?;
    let (_, cmax) = codazzi_residual(data).map_err(numeric)?;
    let gates = vec![
        Gate::new("gauss-residual", gmax, threshold),
        Gate::new("codazzi-residual", cmax, threshold),
    ];
    let pass = gates.iter().all(|g| g.pass);
    Ok((gates, pass))
}

fn cmd_develop(inv: &Invocation) -> Result<CmdOutput, CliError> {
    let cfg = &inv.config;
    let g = cfg.metric().map_err(schema)?;
    let psi = cfg.shape().map_err(schema)?;
    let base = cfg.chart().map_err(schema)?;
    let data = ImmersionData::new(base.clone(), g.clone(), psi.clone()).map_err(numeric)?;
    let (mut gates, gc_pass) = gc_gates(&data, cfg.tolerances.gc_gate)?;
    let mut results = BTreeMap::new();
    let mut artifacts = Vec::new();
    if gc_pass {
        let mut domain = base;
        let mut pull_levels = Vec::new();
        for level in 0..=inv.refine {
            let data =
                ImmersionData::new(domain.clone(), g.clone(), psi.clone()).map_err(numeric)?;
            let dev = develop(
                &data,
                (domain.nx / 2, domain.ny / 2),
                None,
                f64::INFINITY,
            )
            .map_err(numeric)?;
            pull_levels.push(dev.pull_back_defect(&g));
            if level == 0 {
                let cols: Vec<Vec<Cx>> = (0..4)
                    .map(|k| dev.sigma.iter().map(|s| s[k]).collect())
                    .collect();
                let csv = grid_csv(
                    &domain,
                    &[
                        ("z1", &cols[0]),
                        ("z2", &cols[1]),
                        ("z3", &cols[2]),
                        ("z4", &cols[3]),
                    ],
                )
                .map_err(numeric)?;
                write_artifact(inv.out_dir, "sigma.csv", &csv, &mut artifacts)?;
                results.insert("quadric_defect".into(), json!(dev.quadric_defect()));
                results.insert("transport_defect".into(), json!(dev.transport_defect()));
            }
            domain = domain.refined();
        }
        results.insert("pull_back_defect".into(), json!(pull_levels));
        results.insert("pull_back_ratios".into(), json!(ratios(&pull_levels)));
        gates.push(Gate::new(
            "pull-back-isometry",
            pull_levels[0],
            cfg.tolerances.develop,
        ));
    }
    Ok((results, gates, artifacts))
}

fn cmd_monodromy(inv: &Invocation) -> Result<CmdOutput, CliError> {
    let cfg = &inv.config;
    let g = cfg.metric().map_err(schema)?;
    let psi = cfg.shape().map_err(schema)?;
    let domain = cfg.chart().map_err(schema)?;
    let data = ImmersionData::new(domain, g, psi).map_err(numeric)?;
    let (gates, gc_pass) = gc_gates(&data, cfg.tolerances.gc_gate)?;
    let mut results = BTreeMap::new();
    if gc_pass {
        let m = monodromy(&data, f64::INFINITY).map_err(numeric)?;
        results.insert("generator".into(), json!(m.generator));
        results.insert("trace".into(), json!([m.trace.re, m.trace.im]));
        results.insert("trace_abs".into(), json!(m.trace.norm()));
        let flat = |a: &Matrix2<Cx>| -> Vec<[f64; 2]> {
            a.iter().map(|z| [z.re, z.im]).collect()
        };
        results.insert("sl2_a".into(), json!(flat(&m.pair.0)));
        results.insert("sl2_b".into(), json!(flat(&m.pair.1)));
    }
    Ok((results, gates, Vec::new()))
}

fn cmd_sweep(inv: &Invocation) -> Result<CmdOutput, CliError> {
    let cfg = &inv.config;
    let h = cfg.metric().map_err(schema)?;
    let domain = cfg.chart().map_err(schema)?;
    let fam = cfg.family().map_err(schema)?;
    let b = match fam.b_cylinder {
        Some(c) => cylinder_regular_b(c).map_err(|e| schema(e.to_string()))?,
        None => ShapeField::scalar(cx(fam.b_scalar[0], fam.b_scalar[1])),
    };
    let pair = RegularPair::new(domain.clone(), h.clone(), b, 1e-8)
        .map_err(|e| schema(format!("family pair is not h-regular: {e}")))?;
    let center = cx(fam.center[0], fam.center[1]);
    let base_grid = ParamGrid::square(center, fam.radius, fam.samples).map_err(numeric)?;
    let family = if fam.anti_holomorphic == 0.0 {
        HoloFamily::landslide(&pair, base_grid.clone())
    } else {
        let (p, h, a) = (pair.clone(), h.clone(), fam.anti_holomorphic);
        HoloFamily::from_fn(
            "landslide-perturbed",
            base_grid.clone(),
            domain.clone(),
            Arc::new(move |l| {
                let d = landslide_family(&p, l)?;
                let g = perturbed_metric(&d.g, &h, a, l);
                ImmersionData::new(d.domain.clone(), g, d.psi.clone())
            }),
        )
    };
    let mut grid = base_grid;
    let mut cr_levels = Vec::new();
    let mut artifacts = Vec::new();
    let mut results = BTreeMap::new();
    let mut flagged_cells = 0usize;
    for level in 0..=inv.refine {
        let surface = sweep_monodromy(&family.with_grid(grid.clone()), cfg.tolerances.gc_gate)
            .map_err(numeric)?;
        // residuals at the base-grid positions, so refinement ratios
        // compare matching parameter points
        cr_levels.push(if level == 0 {
            surface.cr
        } else {
            cr_at_coarse_positions(&family.grid, &surface.grid, &surface.traces)
                .map_err(numeric)?
        });
        if level == 0 {
            write_artifact(inv.out_dir, "traces.csv", &surface.to_csv(), &mut artifacts)?;
            flagged_cells = surface.flagged.iter().filter(|f| **f).count();
            let c = surface.traces[surface.grid.idx(surface.grid.mx / 2, surface.grid.my / 2)];
            results.insert("center_trace".into(), json!([c.re, c.im]));
            results.insert("center_trace_abs".into(), json!(c.norm()));
        }
        grid = grid.refined();
    }
    results.insert("cr_residual".into(), json!(cr_levels));
    results.insert("cr_ratios".into(), json!(ratios(&cr_levels)));
    let gates = vec![Gate::new("sign-tracking", flagged_cells as f64, 0.5)];
    Ok((results, gates, artifacts))
}

fn cmd_gauss_bonnet(inv: &Invocation) -> Result<CmdOutput, CliError> {
    let cfg = &inv.config;
    let g = cfg.metric().map_err(schema)?;
    let chart = cfg.chart().map_err(schema)?;
    let surf = cfg
        .surface
        .as_ref()
        .ok_or_else(|| schema("missing [surface] section"))?;
    let surface = match surf.kind.as_str() {
        "torus" => ClosedSurface::Torus {
            lx: chart.x1 - chart.x0,
            ly: chart.y1 - chart.y0,
        },
        "sphere" => ClosedSurface::Sphere {
            cap_angle: surf.cap_angle,
        },
        other => return Err(schema(format!("unknown surface kind '{other}'"))),
    };
    let mut totals: Vec<[f64; 2]> = Vec::new();
    let mut defect = 0.0;
    let mut quant_dist = 0.0;
    let mut results = BTreeMap::new();
    let (mut nx, mut ny) = (chart.nx, chart.ny);
    for level in 0..=inv.refine {
        let report = gauss_bonnet(surface, &g, nx, ny).map_err(numeric)?;
        totals.push([report.total.re, report.total.im]);
        if level == 0 {
            let pi = std::f64::consts::PI;
            let k = (report.total.re / pi).round();
            quant_dist = (report.total - cx(pi * k, 0.0)).norm() / pi;
            defect = report.quantization_defect;
            results.insert("nearest_pi_multiple".into(), json!(k));
            results.insert("cap_windings".into(), json!(report.cap_windings));
            results.insert(
                "band_integral".into(),
                json!([report.band_integral.re, report.band_integral.im]),
            );
        }
        nx *= 2;
        ny *= 2;
    }
    results.insert("total".into(), json!(totals));
    let gates = vec![
        Gate::new("pi-quantization", quant_dist, cfg.tolerances.gauss_bonnet),
        Gate::new("winding-quantization", defect, 0.2),
    ];
    Ok((results, gates, Vec::new()))
}

fn rand_cx(rng: &mut ChaCha8Rng) -> Cx {
    cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random tangent vector at `p`, by projecting a random ambient vector.
fn rand_tangent(rng: &mut ChaCha8Rng, p: &XPoint) -> Result<XTangent, cxgeo::Error> {
    let n = p.dim();
    let w = DVector::from_fn(n + 1, |_, _| rand_cx(rng));
    let inner = cxgeo::spaceforms::dot(p.coords(), &w);
    let v = &w + p.coords() * inner;
    XTangent::new(p.clone(), v)
}

/// A near-isotropic tangent: combine two tangents into an isotropic
/// direction, then perturb at amplitude `eps`.
fn near_isotropic(rng: &mut ChaCha8Rng, p: &XPoint, eps: f64) -> Result<XTangent, cxgeo::Error> {
    let a = rand_tangent(rng, p)?;
    let b = rand_tangent(rng, p)?;
    let (qa, qb) = (a.speed_sq(), b.speed_sq());
    let qab = cxgeo::spaceforms::dot(a.vector(), b.vector());
    // <a + l b, a + l b> = 0
    let disc = (qab * qab - qa * qb).sqrt();
    let l = (-qab + disc) / qb;
    let v = a.vector() + b.vector() * l + b.vector() * cx(eps, 0.0);
    XTangent::new(p.clone(), v)
}

fn cmd_geodesic(inv: &Invocation) -> Result<CmdOutput, CliError> {
    let gcfg = inv.config.geodesic.clone().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(inv.seed);
    let mut max_dev: f64 = 0.0;
    let mut max_quadric: f64 = 0.0;
    for &n in &gcfg.dims {
        for sample in 0..gcfg.count {
            let e = XPoint::basepoint(n);
            let seed_v = DVector::from_fn(n + 1, |k, _| {
                if k < n {
                    rand_cx(&mut rng) * cx(0.5, 0.0)
                } else {
                    cx(0.0, 0.0)
                }
            });
            let p = x_exp(&XTangent::new(e, seed_v).map_err(numeric)?).map_err(numeric)?;
            let v = if sample % 5 == 0 {
                near_isotropic(&mut rng, &p, 1e-8).map_err(numeric)?
            } else {
                rand_tangent(&mut rng, &p).map_err(numeric)?
            };
            // keep speeds moderate so 1000 RK4 steps resolve the flow
            let norm = v.vector().norm();
            let v = XTangent::new(p.clone(), v.vector() / cx(norm.max(1.0), 0.0))
                .map_err(numeric)?;
            let t = rng.gen_range(0.0..gcfg.t_max);
            let closed = x_exp(&v.scaled(t)).map_err(numeric)?;
            let ode = x_geodesic_ode(&v, t, gcfg.steps).map_err(numeric)?;
            max_dev = max_dev.max((closed.coords() - ode.coords()).norm());
            max_quadric = max_quadric.max(ode.quadric_residual());
        }
    }
    let mut results = BTreeMap::new();
    results.insert("max_deviation".into(), json!(max_dev));
    results.insert("max_quadric_residual".into(), json!(max_quadric));
    results.insert("dims".into(), json!(gcfg.dims));
    results.insert("count".into(), json!(gcfg.count));
    let gates = vec![
        Gate::new("ode-oracle", max_dev, inv.config.tolerances.geodesic),
        Gate::new("quadric-residual", max_quadric, 1e-10),
    ];
    Ok((results, gates, Vec::new()))
}

fn rand_sl2(rng: &mut ChaCha8Rng) -> Matrix2<Cx> {
    let a = rand_cx(rng);
    let b = rand_cx(rng);
    let c = rand_cx(rng);
    let m = DMatrix::from_row_slice(2, 2, &[a, b, c, -a]);
    let e = expm(&m);
    Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)])
}

fn cmd_models(inv: &Invocation) -> Result<CmdOutput, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(inv.seed);
    let count = 100;
    let tol = inv.config.tolerances.models;

    // f_iso polarization
    let mut f_iso_defect: f64 = 0.0;
    for _ in 0..count {
        let v = nalgebra::Vector4::from_fn(|_, _| rand_cx(&mut rng));
        let w = nalgebra::Vector4::from_fn(|_, _| rand_cx(&mut rng));
        let lhs = mat2_inner(&f_iso(&v), &f_iso(&w));
        let rhs: Cx = v.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        f_iso_defect = f_iso_defect.max((lhs - rhs).norm());
    }

    // SL2 pair <-> SO4 roundtrip
    let mut pair_defect: f64 = 0.0;
    for _ in 0..count {
        let (a, b) = (rand_sl2(&mut rng), rand_sl2(&mut rng));
        let q = sl2_pair_to_so4(&a, &b).map_err(numeric)?;
        let (a2, b2) = so4_to_sl2_pair(&q).map_err(numeric)?;
        let direct = (a2 - a).norm() + (b2 - b).norm();
        let flipped = (a2 + a).norm() + (b2 + b).norm();
        pair_defect = pair_defect.max(direct.min(flipped));
    }

    // veronese image on the conic
    let mut conic_defect: f64 = 0.0;
    for _ in 0..count {
        let t = ProjP1::from_affine(rand_cx(&mut rng) * cx(2.0, 0.0));
        let v = veronese(&t);
        let q: Cx = v.rep().iter().map(|z| z * z).sum();
        conic_defect = conic_defect.max(q.norm());
    }

    // Moebius invariance of the geodesic-space metric coefficient
    let mut mobius_defect: f64 = 0.0;
    let mut done = 0;
    while done < count {
        let z1 = rand_cx(&mut rng) * cx(2.0, 0.0);
        let z2 = rand_cx(&mut rng) * cx(2.0, 0.0);
        let m = Matrix2::new(
            rand_cx(&mut rng),
            rand_cx(&mut rng),
            rand_cx(&mut rng),
            rand_cx(&mut rng),
        );
        if (z1 - z2).norm() < 0.1 || m.determinant().norm() < 0.1 {
            continue;
        }
        let mob = Mobius::new(m).map_err(numeric)?;
        let (Some(w1), Some(w2)) = (
            mob.apply_affine(z1).to_affine(),
            mob.apply_affine(z2).to_affine(),
        ) else {
            continue;
        };
        if (w1 - w2).norm() < 0.05 {
            continue;
        }
        let lhs = g_metric_coeff(w1, w2).map_err(numeric)?
            * mob.derivative(z1)
            * mob.derivative(z2);
        let rhs = g_metric_coeff(z1, z2).map_err(numeric)?;
        mobius_defect = mobius_defect.max((lhs - rhs).norm() / rhs.norm().max(1.0));
        done += 1;
    }

    // pseudo-Riemannian lifts land on the quadric
    let mut lift_defect: f64 = 0.0;
    for _ in 0..count {
        let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let h2 = pseudo_embed((2, 0), &[a, b, (1.0 + a * a + b * b).sqrt()])
            .map_err(numeric)?;
        lift_defect = lift_defect.max(h2.quadric_residual());
        let s2 = {
            let c = rng.gen_range(-1.0..1.0);
            let n = (a * a + b * b + c * c).sqrt().max(1e-3);
            pseudo_embed((0, 2), &[a / n, b / n, c / n]).map_err(numeric)?
        };
        lift_defect = lift_defect.max(s2.quadric_residual());
    }

    let mut results = BTreeMap::new();
    results.insert("f_iso_polarization".into(), json!(f_iso_defect));
    results.insert("sl2_so4_roundtrip".into(), json!(pair_defect));
    results.insert("veronese_conic".into(), json!(conic_defect));
    results.insert("mobius_invariance".into(), json!(mobius_defect));
    results.insert("pseudo_lift_quadric".into(), json!(lift_defect));
    let gates = vec![
        Gate::new("f-iso-polarization", f_iso_defect, 1e-12),
        Gate::new("sl2-so4-roundtrip", pair_defect, tol),
        Gate::new("veronese-conic", conic_defect, 1e-12),
        Gate::new("mobius-invariance", mobius_defect, tol),
        Gate::new("pseudo-lift-quadric", lift_defect, tol),
    ];
    Ok((results, gates, Vec::new()))
}
