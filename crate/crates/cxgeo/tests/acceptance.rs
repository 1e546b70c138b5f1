//! End-to-end acceptance battery. Each criterion prints one pass/fail
//! line; run with `--nocapture` to see them on success.

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use cxgeo::calg::{cx, expm, mat2_inner, mat2_norm_sq, sl2_cross, Cx, I, ONE, ZERO};
use cxgeo::cmetric::{
    curvature_at, gauss_bonnet, ChartDomain, ClosedSurface, MetricField,
};
use cxgeo::families::{
    cr_at_coarse_positions, cylinder_regular_b, landslide_family, landslide_metric,
    sweep_monodromy, HoloFamily, ParamGrid, RegularPair,
};
use cxgeo::immersion::{
    align, assemble_omega, classify_target, codazzi_residual, degenerate_points, develop,
    develop_codim0, endpoint_pullback, flatness_residual, gauss_residual, h3_to_g_metric,
    integrate_path, monodromy, ImmersionData, ShapeField, TargetClass, EDGE_SUBSTEPS, GC_GATE,
};
use cxgeo::spaceforms::{
    dot, f_iso, g_metric_coeff, orthogonality_defect4, pseudo_embed, retract_orthogonal4,
    sl2_pair_to_so4, so4_to_sl2_pair, veronese, x_exp, x_geodesic_ode, Mobius, ProjP1, XPoint,
    XTangent,
};
use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn criterion(name: &str, body: impl FnOnce() + UnwindSafe) {
    match catch_unwind(body) {
        Ok(()) => println!("{name}: pass"),
        Err(e) => {
            println!("{name}: fail");
            resume_unwind(e);
        }
    }
}

fn rand_cx(rng: &mut ChaCha8Rng) -> Cx {
    cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn rand_tangent(rng: &mut ChaCha8Rng, p: &XPoint) -> XTangent {
    let n = p.dim();
    let w = DVector::from_fn(n + 1, |_, _| rand_cx(rng));
    let inner = dot(p.coords(), &w);
    XTangent::new(p.clone(), &w + p.coords() * inner).unwrap()
}

/// Combine two tangents into an isotropic direction, then perturb.
fn near_isotropic(rng: &mut ChaCha8Rng, p: &XPoint, eps: f64) -> XTangent {
    let a = rand_tangent(rng, p);
    let b = rand_tangent(rng, p);
    let (qa, qb) = (a.speed_sq(), b.speed_sq());
    let qab = dot(a.vector(), b.vector());
    let disc = (qab * qab - qa * qb).sqrt();
    let l = (-qab + disc) / qb;
    let v = a.vector() + b.vector() * l + b.vector() * cx(eps, 0.0);
    XTangent::new(p.clone(), v).unwrap()
}

#[test]
fn acceptance_01_geodesic_oracle() {
    criterion("01 closed-form vs ODE geodesics", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut max_dev: f64 = 0.0;
        let mut max_quadric: f64 = 0.0;
        for n in [2usize, 3] {
            for sample in 0..50 {
                let e = XPoint::basepoint(n);
                let seed = DVector::from_fn(n + 1, |k, _| {
                    if k < n {
                        rand_cx(&mut rng) * cx(0.5, 0.0)
                    } else {
                        ZERO
                    }
                });
                let p = x_exp(&XTangent::new(e, seed).unwrap()).unwrap();
                let v = if sample % 5 == 0 {
                    near_isotropic(&mut rng, &p, 1e-8)
                } else {
                    rand_tangent(&mut rng, &p)
                };
                // moderate speeds so 1000 RK4 steps resolve the flow
                let norm = v.vector().norm().max(1.0);
                let v = XTangent::new(p.clone(), v.vector() / cx(norm, 0.0)).unwrap();
                let t = rng.gen_range(0.0..2.0);
                let closed = x_exp(&v.scaled(t)).unwrap();
                let ode = x_geodesic_ode(&v, t, 1000).unwrap();
                max_dev = max_dev.max((closed.coords() - ode.coords()).norm());
                max_quadric = max_quadric.max(ode.quadric_residual());
            }
        }
        assert!(max_dev <= 1e-8, "deviation {max_dev}");
        assert!(max_quadric <= 1e-10, "quadric {max_quadric}");
        let secs = start.elapsed().as_secs_f64();
        assert!(secs < 5.0, "runtime {secs}s");
    });
}

#[test]
fn acceptance_02_isotropic_exponential() {
    criterion("02 isotropic exponential is affine", || {
        let e = XPoint::basepoint(2);
        let v = DVector::from_vec(vec![ONE, I, ZERO]);
        for t in [1.0, 1.7, 0.3] {
            let tangent = XTangent::new(e.clone(), &v * cx(t, 0.0)).unwrap();
            assert!(tangent.speed_sq().norm() < 1e-15);
            let q = x_exp(&tangent).unwrap();
            let expected = e.coords() + &v * cx(t, 0.0);
            assert!((q.coords() - expected).norm() < 1e-14);
        }
    });
}

fn rand_sl2(rng: &mut ChaCha8Rng) -> Matrix2<Cx> {
    let (a, b, c) = (rand_cx(rng), rand_cx(rng), rand_cx(rng));
    let m = DMatrix::from_row_slice(2, 2, &[a, b, c, -a]);
    let e = expm(&m);
    Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)])
}

#[test]
fn acceptance_03_model_roundtrips() {
    criterion("03 model isomorphism roundtrips", || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v = nalgebra::Vector4::from_fn(|_, _| rand_cx(&mut rng));
            let w = nalgebra::Vector4::from_fn(|_, _| rand_cx(&mut rng));
            let lhs = mat2_inner(&f_iso(&v), &f_iso(&w));
            let rhs: Cx = v.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).norm() <= 1e-12, "polarization {}", (lhs - rhs).norm());
        }
        for _ in 0..100 {
            let (a, b) = (rand_sl2(&mut rng), rand_sl2(&mut rng));
            let q = sl2_pair_to_so4(&a, &b).unwrap();
            let (a2, b2) = so4_to_sl2_pair(&q).unwrap();
            let direct = (a2 - a).norm() + (b2 - b).norm();
            let flipped = (a2 + a).norm() + (b2 + b).norm();
            assert!(direct.min(flipped) <= 1e-10, "roundtrip {}", direct.min(flipped));
        }
        for _ in 0..100 {
            let t = ProjP1::from_affine(rand_cx(&mut rng) * cx(2.0, 0.0));
            let q: Cx = veronese(&t).rep().iter().map(|z| z * z).sum();
            assert!(q.norm() <= 1e-12, "conic {}", q.norm());
        }
        let mut done = 0;
        while done < 100 {
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
            let mob = Mobius::new(m).unwrap();
            let (Some(w1), Some(w2)) = (
                mob.apply_affine(z1).to_affine(),
                mob.apply_affine(z2).to_affine(),
            ) else {
                continue;
            };
            if (w1 - w2).norm() < 0.05 {
                continue;
            }
            let lhs = g_metric_coeff(w1, w2).unwrap() * mob.derivative(z1) * mob.derivative(z2);
            let rhs = g_metric_coeff(z1, z2).unwrap();
            let rel = (lhs - rhs).norm() / rhs.norm().max(1.0);
            assert!(rel <= 1e-10, "invariance {rel}");
            done += 1;
        }
        // pseudo-Riemannian lifts land on the quadric
        for _ in 0..100 {
            let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let h2 = pseudo_embed((2, 0), &[a, b, (1.0 + a * a + b * b).sqrt()]).unwrap();
            assert!(h2.quadric_residual() <= 1e-10);
        }
    });
}

#[test]
fn acceptance_04_cross_product_identity() {
    criterion("04 sl2 cross-product norm identity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let mk = |rng: &mut ChaCha8Rng| {
                let (a, b, c) = (rand_cx(rng), rand_cx(rng), rand_cx(rng));
                Matrix2::new(a, b, c, -a)
            };
            let v = mk(&mut rng);
            let w = mk(&mut rng);
            let bracket = sl2_cross(&v, &w).unwrap().map(|e| e * cx(0.0, 2.0));
            let lhs = mat2_norm_sq(&bracket);
            let vw = mat2_inner(&v, &w);
            let rhs = mat2_norm_sq(&v) * mat2_norm_sq(&w) * cx(-4.0, 0.0)
                + vw * vw * cx(4.0, 0.0);
            assert!((lhs - rhs).norm() <= 1e-12, "identity {}", (lhs - rhs).norm());
        }
    });
}

/// High-y hyperbolic patch: the curvature stencil error scales like
/// `h^2 / y^2`, so this chart reaches the 1e-6 regime at 64x64.
fn high_patch(n: usize) -> ChartDomain {
    ChartDomain::new((0.0, 0.25), (5.0, 5.25), n, n).unwrap()
}

#[test]
fn acceptance_05_curvature() {
    criterion("05 curvature values and stencil order", || {
        let g = MetricField::hyperbolic_plane();
        let d = high_patch(64);
        let (hx, hy) = (d.hx(), d.hy());
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for j in 0..d.ny {
            for i in 0..d.nx {
                let (x, y) = (d.xs(i), d.ys(j));
                e1 = e1.max((curvature_at(&g, x, y, hx, hy).unwrap() + ONE).norm());
                e2 = e2.max((curvature_at(&g, x, y, hx / 2.0, hy / 2.0).unwrap() + ONE).norm());
            }
        }
        assert!(e1 <= 1e-6, "hyperbolic curvature error {e1}");
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "stencil ratio {ratio}");

        let domain = ChartDomain::new((0.0, 0.2), (8.0, 8.2), 16, 16).unwrap();
        let pair = RegularPair::new(
            domain.clone(),
            MetricField::hyperbolic_plane(),
            ShapeField::scalar(ONE),
            1e-9,
        )
        .unwrap();
        for z in [cx(0.3, 0.2), cx(-0.5, 0.4)] {
            let gz = landslide_metric(&pair, z, 1);
            let defect = cxgeo::families::curvature_defect(&gz, &domain).unwrap();
            assert!(defect <= 1e-4, "landslide curvature defect {defect} at {z}");
        }
    });
}

#[test]
fn acceptance_06_gauss_codazzi_iff() {
    criterion("06 Gauss-Codazzi gates separate valid from invalid data", || {
        let pair = RegularPair::new(
            high_patch(32),
            MetricField::hyperbolic_plane(),
            ShapeField::scalar(ONE),
            1e-9,
        )
        .unwrap();
        for re in [-0.3, 0.0, 0.3] {
            for im in [-0.3, 0.0, 0.3] {
                let data = landslide_family(&pair, cx(re, im)).unwrap();
                let (_, gmax) = gauss_residual(&data).unwrap();
                let (_, cmax) = codazzi_residual(&data).unwrap();
                assert!(gmax <= GC_GATE, "gauss {gmax} at {re}+{im}i");
                assert!(cmax <= GC_GATE, "codazzi {cmax} at {re}+{im}i");
            }
        }

        // hyperbolic metric with psi = id violates the Gauss equation
        // by exactly one: K - det(psi) + 1 = -1 everywhere
        let bad = ImmersionData::new(
            high_patch(64),
            MetricField::hyperbolic_plane(),
            ShapeField::scalar(ONE),
        )
        .unwrap();
        let (_, gmax) = gauss_residual(&bad).unwrap();
        assert!((gmax - 1.0).abs() <= 1e-6, "gauss residual {gmax}");
        // its connection form is genuinely curved: the flatness residual
        // does not decrease under refinement
        let coarse = ImmersionData::new(
            high_patch(32),
            MetricField::hyperbolic_plane(),
            ShapeField::scalar(ONE),
        )
        .unwrap();
        let (_, m1) = flatness_residual(&assemble_omega(&coarse).unwrap());
        let fine = ImmersionData::new(
            high_patch(32).refined(),
            MetricField::hyperbolic_plane(),
            ShapeField::scalar(ONE),
        )
        .unwrap();
        let (_, m2) = flatness_residual(&assemble_omega(&fine).unwrap());
        assert!(m2 >= 0.5 * m1, "flatness residual dropped {m1} -> {m2}");
        assert!(m1 > 1e-3, "flatness residual unexpectedly small {m1}");
    });
}

#[test]
fn acceptance_07_development_isometry_uniqueness() {
    criterion("07 development isometry and uniqueness up to isometry", || {
        let g = MetricField::hyperbolic_plane();
        let base = high_patch(64);
        let data = ImmersionData::new(base.clone(), g.clone(), ShapeField::zero()).unwrap();
        let dev = develop(&data, (base.nx / 2, base.ny / 2), None, GC_GATE).unwrap();
        let e1 = dev.pull_back_defect(&g);
        assert!(e1 <= 1e-4, "pull-back defect {e1}");
        let fine = base.refined();
        let data_f = ImmersionData::new(fine.clone(), g.clone(), ShapeField::zero()).unwrap();
        let dev_f = develop(&data_f, (fine.nx / 2, fine.ny / 2), None, GC_GATE).unwrap();
        let e2 = dev_f.pull_back_defect(&g);
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "pull-back ratio {ratio}");

        // same data from another basepoint and rotated initial frame
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let raw = Matrix4::from_fn(|_, _| rand_cx(&mut rng) * cx(0.3, 0.0));
        let skew = (raw - raw.transpose()).map(|e| e * cx(0.5, 0.0));
        let q0 = retract_orthogonal4(&cxgeo::calg::expm4(&skew));
        let dev2 = develop(&data, (5, 7), Some(q0), GC_GATE).unwrap();
        let (phi, res) = align(&dev, &dev2).unwrap();
        assert!(res <= 1e-6, "alignment residual {res}");
        assert!(orthogonality_defect4(&phi) <= 1e-8);
    });
}

#[test]
fn acceptance_08_codim0_constant_normal() {
    criterion("08 curvature -1 data with zero shape keeps a constant normal", || {
        let d = high_patch(32);
        let cz = develop_codim0(
            &MetricField::hyperbolic_plane(),
            &d,
            (d.nx / 2, d.ny / 2),
            1e-5,
        )
        .unwrap();
        assert!(cz.normal_drift <= 1e-6, "normal drift {}", cz.normal_drift);
    });
}

#[test]
fn acceptance_09_monodromy_oracle() {
    criterion("09 cylinder monodromy trace and homomorphism property", || {
        for ell in [1.0, 1.5, 2.3] {
            let start = Instant::now();
            let d = ChartDomain::new((0.0, ell), (-0.2, 0.2), 256, 64)
                .unwrap()
                .with_periodic_x()
                .with_deck();
            let data = ImmersionData::new(
                d.clone(),
                MetricField::hyperbolic_cylinder(),
                ShapeField::zero(),
            )
            .unwrap();
            let m = monodromy(&data, f64::INFINITY).unwrap();
            let expected = 2.0 * (ell / 2.0).cosh();
            let err = (m.trace.norm() - expected).abs();
            assert!(err <= 1e-4, "trace error {err} at length {ell}");

            // the doubled deck path gives the squared monodromy
            let yc = d.ys(d.ny / 2);
            let path: Vec<(f64, f64)> = (0..=2 * d.nx)
                .map(|k| (ell * k as f64 / d.nx as f64, yc))
                .collect();
            let q2 = retract_orthogonal4(
                &integrate_path(&data.g, &data.psi, &path, &Matrix4::identity(), EDGE_SUBSTEPS)
                    .unwrap(),
            );
            let defect = (q2 - m.q * m.q).norm();
            assert!(defect <= 1e-6, "homomorphism defect {defect} at length {ell}");
            let secs = start.elapsed().as_secs_f64();
            assert!(secs < 30.0, "runtime {secs}s at length {ell}");
        }
    });
}

#[test]
fn acceptance_10_monodromy_holomorphy() {
    criterion("10 monodromy traces are holomorphic in the family parameter", || {
        let domain = ChartDomain::new((0.0, 1.5), (-0.2, 0.2), 32, 16)
            .unwrap()
            .with_periodic_x()
            .with_deck();
        let pair = RegularPair::new(
            domain,
            MetricField::hyperbolic_cylinder(),
            cylinder_regular_b(0.5).unwrap(),
            1e-10,
        )
        .unwrap();
        let grid = ParamGrid::square(ZERO, 0.2, 7).unwrap();
        let family = HoloFamily::landslide(&pair, grid);
        let s1 = sweep_monodromy(&family, 5e-3).unwrap();
        let s2 = sweep_monodromy(&family.with_grid(s1.grid.refined()), 5e-3).unwrap();
        let cr2 = cr_at_coarse_positions(&s1.grid, &s2.grid, &s2.traces).unwrap();
        let ratio = s1.cr / cr2;
        assert!(ratio >= 3.5, "cr refinement ratio {ratio}");

        // anti-holomorphic metric perturbation: residual plateaus
        let domain = ChartDomain::new((0.0, 2.3), (-0.2, 0.2), 32, 16)
            .unwrap()
            .with_periodic_x()
            .with_deck();
        let pair = RegularPair::new(
            domain.clone(),
            MetricField::hyperbolic_cylinder(),
            ShapeField::scalar(ONE),
            1e-9,
        )
        .unwrap();
        let grid = ParamGrid::square(ZERO, 0.2, 7).unwrap();
        let chart = domain.clone();
        let p = pair.clone();
        let perturbed = HoloFamily::from_fn(
            "landslide-antiholo",
            grid,
            chart,
            Arc::new(move |l| {
                let d = landslide_family(&p, l)?;
                let factor = cx(0.01, 0.0) * l.conj();
                let base = d.g.clone();
                let h = MetricField::hyperbolic_cylinder();
                let g = MetricField::from_fn(
                    "perturbed",
                    Arc::new(move |x, y| base.at(x, y) + h.at(x, y).map(|e| e * factor)),
                );
                ImmersionData::new(d.domain.clone(), g, d.psi.clone())
            }),
        );
        let a1 = sweep_monodromy(&perturbed, 0.05).unwrap();
        let a2 = sweep_monodromy(&perturbed.with_grid(a1.grid.refined()), 0.05).unwrap();
        let acr2 = cr_at_coarse_positions(&a1.grid, &a2.grid, &a2.traces).unwrap();
        assert!(a1.cr > 5e-3, "perturbed residual {} at base grid", a1.cr);
        assert!(acr2 > 5e-3, "perturbed residual {acr2} after refinement");
    });
}

#[test]
fn acceptance_11_gauss_bonnet() {
    criterion("11 Gauss-Bonnet totals and quantization", || {
        let pi = std::f64::consts::PI;
        let flat = gauss_bonnet(
            ClosedSurface::Torus { lx: 1.0, ly: 1.0 },
            &MetricField::flat_torus(),
            16,
            16,
        )
        .unwrap();
        assert!(flat.total.norm() <= 1e-8, "flat torus {}", flat.total);

        let sphere = MetricField::round_sphere(1.0);
        let round = gauss_bonnet(ClosedSurface::Sphere { cap_angle: 0.4 }, &sphere, 96, 48)
            .unwrap();
        assert!(
            (round.total - cx(4.0 * pi, 0.0)).norm() <= 0.04 * pi,
            "round sphere {}",
            round.total
        );

        let f: Arc<dyn Fn(f64, f64) -> Cx + Send + Sync> = Arc::new(|x, y| {
            (cx(0.2 * (2.0 * x).sin(), 0.0) + cx(0.0, 0.15) * cx((2.0 * y).cos(), 0.0)).exp()
        });
        let fx: Arc<dyn Fn(f64, f64) -> Cx + Send + Sync> = Arc::new(move |x, y| {
            let v = (cx(0.2 * (2.0 * x).sin(), 0.0) + cx(0.0, 0.15) * cx((2.0 * y).cos(), 0.0))
                .exp();
            v * cx(0.4 * (2.0 * x).cos(), 0.0)
        });
        let fy: Arc<dyn Fn(f64, f64) -> Cx + Send + Sync> = Arc::new(move |x, y| {
            let v = (cx(0.2 * (2.0 * x).sin(), 0.0) + cx(0.0, 0.15) * cx((2.0 * y).cos(), 0.0))
                .exp();
            v * cx(0.0, -0.3 * (2.0 * y).sin())
        });
        let perturbed = sphere.conformal("sphere-conformal", f, Some((fx, fy)));
        let r = gauss_bonnet(ClosedSurface::Sphere { cap_angle: 0.4 }, &perturbed, 128, 64)
            .unwrap();
        assert!(
            (r.total - cx(4.0 * pi, 0.0)).norm() <= 0.04 * pi,
            "conformal total {}",
            r.total
        );
        let q = r.total.re / pi;
        assert!(
            (q - q.round()).abs() <= 0.01 && r.total.im.abs() <= 0.01 * pi,
            "quantization {} (im {})",
            q,
            r.total.im
        );
    });
}

#[test]
fn acceptance_12_geodesic_space_pullback() {
    criterion("12 geodesic-space pull-back closed form vs endpoint maps", || {
        // curvature -0.84 metric with psi = 0.4 id satisfies the Gauss
        // equation: K = -1 + det(psi)
        let h = MetricField::hyperbolic_plane().scaled(cx(1.0 / 0.84, 0.0));
        let psi = ShapeField::scalar(cx(0.4, 0.0));
        let base = ChartDomain::new((0.0, 0.4), (1.0, 1.4), 16, 16).unwrap();

        let err_at = |d: &ChartDomain| -> Vec<f64> {
            let data = ImmersionData::new(d.clone(), h.clone(), psi.clone()).unwrap();
            let dev = develop(&data, (d.nx / 2, d.ny / 2), None, f64::INFINITY).unwrap();
            let pb = endpoint_pullback(&dev).unwrap();
            let per_orientation = |orient: i8| -> Vec<f64> {
                let cf = h3_to_g_metric(&h, &psi, orient);
                let mut out = vec![0.0; d.len()];
                for j in 1..d.ny - 1 {
                    for i in 1..d.nx - 1 {
                        let k = d.idx(i, j);
                        out[k] = (pb[k] - cf.at(d.xs(i), d.ys(j))).norm();
                    }
                }
                out
            };
            let plus = per_orientation(1);
            let minus = per_orientation(-1);
            let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
            if max(&plus) <= max(&minus) {
                plus
            } else {
                minus
            }
        };
        let coarse = err_at(&base);
        let fine_domain = base.refined();
        let fine = err_at(&fine_domain);
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for j in 1..base.ny - 1 {
            for i in 1..base.nx - 1 {
                e1 = e1.max(coarse[base.idx(i, j)]);
                e2 = e2.max(fine[fine_domain.idx(2 * i, 2 * j)]);
            }
        }
        assert!(e1 < 0.05, "closed-form mismatch {e1}");
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "pull-back ratio {ratio}");

        // sign-changing curvature: the closed form degenerates exactly
        // on the K = 0 locus
        let e2f: Arc<dyn Fn(f64, f64) -> Cx + Send + Sync> =
            Arc::new(|_, y: f64| cx((y * y * y / 3.0).exp(), 0.0));
        let h2 = MetricField::from_fn(
            "sign-changing",
            Arc::new(move |x, y| Matrix2::identity().map(|e: Cx| e * e2f(x, y))),
        );
        // K = -y exp(-y^3/3); pick det(psi) = K + 1 so Gauss holds
        let kf = |y: f64| -y * (-y * y * y / 3.0).exp();
        let psi2 = ShapeField::from_fn(Arc::new(move |_, y| {
            Matrix2::new(ONE, ZERO, ZERO, cx(kf(y) + 1.0, 0.0))
        }));
        let d = ChartDomain::new((0.0, 0.5), (-0.5, 0.5), 9, 9).unwrap();
        let g12 = h3_to_g_metric(&h2, &psi2, 1);
        let degen = degenerate_points(&g12, &d, 1e-6);
        assert_eq!(degen.len(), d.nx, "degenerate set size {}", degen.len());
        for (_, y) in &degen {
            assert!(y.abs() < 1e-12, "degenerate point off the K = 0 locus at y = {y}");
        }
    });
}

#[test]
fn acceptance_13_target_classification() {
    criterion("13 target space form classification", || {
        let d = ChartDomain::new((0.0, 0.5), (1.0, 1.5), 8, 8).unwrap();
        let rows: [(MetricField, Cx, TargetClass); 4] = [
            (MetricField::hyperbolic_plane(), cx(0.3, 0.0), TargetClass::H3),
            (MetricField::hyperbolic_plane(), cx(0.0, 0.3), TargetClass::AdS3),
            (MetricField::minkowski(), cx(0.0, 0.3), TargetClass::NegDS3),
            (MetricField::neg_euclidean(), cx(0.0, 0.3), TargetClass::NegS3),
        ];
        for (g, s, expected) in rows {
            let data = ImmersionData::new(d.clone(), g, ShapeField::scalar(s)).unwrap();
            let report = classify_target(&data, 1e-8).unwrap();
            assert_eq!(report.class, expected);
            assert!(!report.ambiguous);
        }
    });
}
