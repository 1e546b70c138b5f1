//! Complex metrics on discretized 2D charts.
//!
//! A [`MetricField`] is a symmetric 2x2 complex matrix field over a
//! [`ChartDomain`], with analytic first-derivative callbacks when the
//! catalog provides them (finite differences otherwise). On top of it:
//! orthonormal frames with branch continuity, the Levi-Civita connection
//! form, Gaussian curvature, the positivity classification by isotropic
//! slopes, bicomplex structures and area forms, and the Gauss-Bonnet
//! integral on the torus and the sphere.
//!
//! Sign conventions, fixed once here and used by every consumer:
//! frames and forms are written in the coordinate basis `(dx, dy)`;
//! the internal connection form `w` of an orthonormal frame `(X1, X2)`
//! is `w(Y) = g(grad_Y X1, X2)` and satisfies `dw = -K dA`; the exposed
//! [`ConnectionForm`] stores `theta^1_2 = -w`, so that
//! `d theta^1 = -theta^1_2 ^ theta^2`.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::calg::{cx, Cx, SqrtBranch, ONE, ZERO};
use crate::{Error, Result};

pub type V2 = Vector2<Cx>;
pub type EvalFn = Arc<dyn Fn(f64, f64) -> Matrix2<Cx> + Send + Sync>;

/// Minimum grid resolution per axis.
pub const MIN_RES: usize = 8;

/// A rectangular chart with grid resolution, periodicity flags, and an
/// optional deck transform `(x, y) -> (x + L, y)` for cylinder quotients.
#[derive(Debug, Clone)]
pub struct ChartDomain {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
    pub periodic_x: bool,
    pub periodic_y: bool,
    pub deck_period: Option<f64>,
}

impl ChartDomain {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if nx < MIN_RES || ny < MIN_RES {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {nx}x{ny} below the minimum {MIN_RES}"
            )));
        }
        if !(x.0 < x.1) || !(y.0 < y.1) {
            return Err(Error::InvalidArgument("empty chart rectangle".into()));
        }
        Ok(Self {
            x0: x.0,
            x1: x.1,
            y0: y.0,
            y1: y.1,
            nx,
            ny,
            periodic_x: false,
            periodic_y: false,
            deck_period: None,
        })
    }

    pub fn with_periodic_x(mut self) -> Self {
        self.periodic_x = true;
        self
    }

    pub fn with_periodic_y(mut self) -> Self {
        self.periodic_y = true;
        self
    }

    /// Marks the x-translation by the full x-extent as the deck generator.
    pub fn with_deck(mut self) -> Self {
        self.deck_period = Some(self.x1 - self.x0);
        self
    }

    /// Grid spacing in x. Periodic axes omit the duplicate endpoint.
    pub fn hx(&self) -> f64 {
        let span = self.x1 - self.x0;
        if self.periodic_x {
            span / self.nx as f64
        } else {
            span / (self.nx - 1) as f64
        }
    }

    pub fn hy(&self) -> f64 {
        let span = self.y1 - self.y0;
        if self.periodic_y {
            span / self.ny as f64
        } else {
            span / (self.ny - 1) as f64
        }
    }

    pub fn xs(&self, i: usize) -> f64 {
        self.x0 + self.hx() * i as f64
    }

    pub fn ys(&self, j: usize) -> f64 {
        self.y0 + self.hy() * j as f64
    }

    /// Row-major index (x fast).
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when a centered stencil of one grid step fits at `(i, j)`.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        let x_ok = self.periodic_x || (i > 0 && i + 1 < self.nx);
        let y_ok = self.periodic_y || (j > 0 && j + 1 < self.ny);
        x_ok && y_ok
    }

    /// Halves the grid spacing (for refinement studies).
    pub fn refined(&self) -> Self {
        let mut out = self.clone();
        out.nx = if self.periodic_x {
            2 * self.nx
        } else {
            2 * self.nx - 1
        };
        out.ny = if self.periodic_y {
            2 * self.ny
        } else {
            2 * self.ny - 1
        };
        out
    }
}

/// A symmetric 2x2 complex metric field `g(x, y)` in the coordinate
/// frame, with first-derivative access.
#[derive(Clone)]
pub struct MetricField {
    pub name: String,
    eval: EvalFn,
    dx: Option<EvalFn>,
    dy: Option<EvalFn>,
    fd_step: f64,
}

/// Default finite-difference step for fields without analytic derivatives.
pub const FD_STEP: f64 = 1e-5;

impl MetricField {
    pub fn from_fn(name: &str, eval: EvalFn) -> Self {
        Self {
            name: name.to_string(),
            eval,
            dx: None,
            dy: None,
            fd_step: FD_STEP,
        }
    }

    pub fn with_derivs(mut self, dx: EvalFn, dy: EvalFn) -> Self {
        self.dx = Some(dx);
        self.dy = Some(dy);
        self
    }

    pub fn at(&self, x: f64, y: f64) -> Matrix2<Cx> {
        (self.eval)(x, y)
    }

    /// First derivatives `(dg/dx, dg/dy)`: analytic callbacks when
    /// available, centered differences of step [`FD_STEP`] otherwise.
    pub fn deriv_at(&self, x: f64, y: f64) -> (Matrix2<Cx>, Matrix2<Cx>) {
        match (&self.dx, &self.dy) {
            (Some(dx), Some(dy)) => (dx(x, y), dy(x, y)),
            _ => {
                let h = self.fd_step;
                let half = cx(0.5 / h, 0.0);
                let gx = ((self.eval)(x + h, y) - (self.eval)(x - h, y)).map(|e| e * half);
                let gy = ((self.eval)(x, y + h) - (self.eval)(x, y - h)).map(|e| e * half);
                (gx, gy)
            }
        }
    }

    pub fn has_analytic_derivs(&self) -> bool {
        self.dx.is_some() && self.dy.is_some()
    }

    pub fn det_at(&self, x: f64, y: f64) -> Cx {
        self.at(x, y).determinant()
    }

    /// `|det g|` relative to the Frobenius scale, for degeneracy checks.
    pub fn nondegeneracy_at(&self, x: f64, y: f64) -> f64 {
        let g = self.at(x, y);
        let scale = (g.norm() * g.norm() / 2.0).max(f64::MIN_POSITIVE);
        g.determinant().norm() / scale
    }

    // Catalog constructors. Each provides analytic derivatives.

    pub fn euclidean() -> Self {
        Self::constant("euclidean", Matrix2::identity())
    }

    pub fn minkowski() -> Self {
        Self::constant("minkowski", Matrix2::new(ONE, ZERO, ZERO, -ONE))
    }

    pub fn neg_euclidean() -> Self {
        Self::constant("neg-euclidean", Matrix2::new(-ONE, ZERO, ZERO, -ONE))
    }

    /// Flat torus metric `dx^2 + dy^2` (periodicity lives in the chart).
    pub fn flat_torus() -> Self {
        Self::constant("flat-torus", Matrix2::identity())
    }

    fn constant(name: &str, m: Matrix2<Cx>) -> Self {
        let z = Matrix2::from_element(ZERO);
        Self::from_fn(name, Arc::new(move |_, _| m))
            .with_derivs(Arc::new(move |_, _| z), Arc::new(move |_, _| z))
    }

    /// Upper half-plane metric `(dx^2 + dy^2)/y^2`, curvature -1.
    pub fn hyperbolic_plane() -> Self {
        Self::from_fn(
            "hyperbolic-plane",
            Arc::new(|_, y| Matrix2::identity().map(|e: Cx| e / cx(y * y, 0.0))),
        )
        .with_derivs(
            Arc::new(|_, _| Matrix2::from_element(ZERO)),
            Arc::new(|_, y| Matrix2::identity().map(|e: Cx| e * cx(-2.0 / (y * y * y), 0.0))),
        )
    }

    /// Hyperbolic cylinder metric `cosh^2(y) dx^2 + dy^2`; the waist
    /// geodesic `y = 0` has length equal to the chart's x-extent.
    pub fn hyperbolic_cylinder() -> Self {
        Self::from_fn(
            "hyperbolic-cylinder",
            Arc::new(|_, y| {
                Matrix2::new(cx(y.cosh() * y.cosh(), 0.0), ZERO, ZERO, ONE)
            }),
        )
        .with_derivs(
            Arc::new(|_, _| Matrix2::from_element(ZERO)),
            Arc::new(|_, y| Matrix2::new(cx((2.0 * y).sinh(), 0.0), ZERO, ZERO, ZERO)),
        )
    }

    /// Round sphere of radius `r` in the chart `(x, y) = (phi, theta)`:
    /// `r^2 (sin^2(theta) dphi^2 + dtheta^2)`.
    pub fn round_sphere(r: f64) -> Self {
        let r2 = r * r;
        Self::from_fn(
            "round-sphere",
            Arc::new(move |_, y| {
                Matrix2::new(cx(r2 * y.sin() * y.sin(), 0.0), ZERO, ZERO, cx(r2, 0.0))
            }),
        )
        .with_derivs(
            Arc::new(|_, _| Matrix2::from_element(ZERO)),
            Arc::new(move |_, y| {
                Matrix2::new(cx(r2 * (2.0 * y).sin(), 0.0), ZERO, ZERO, ZERO)
            }),
        )
    }

    /// Constant complex rescaling `c * g`.
    pub fn scaled(&self, c: Cx) -> Self {
        let factor: Arc<dyn Fn(f64, f64) -> Cx + Send + Sync> = Arc::new(move |_, _| c);
        let dzero: Arc<dyn Fn(f64, f64) -> Cx + Send + Sync> = Arc::new(|_, _| ZERO);
        self.conformal(&format!("{}*scaled", self.name), factor, Some((dzero.clone(), dzero)))
    }

    /// Conformal multiple `f(x, y) * g` with an optional analytic
    /// gradient of the factor.
    pub fn conformal(
        &self,
        name: &str,
        f: Arc<dyn Fn(f64, f64) -> Cx + Send + Sync>,
        df: Option<(
            Arc<dyn Fn(f64, f64) -> Cx + Send + Sync>,
            Arc<dyn Fn(f64, f64) -> Cx + Send + Sync>,
        )>,
    ) -> Self {
        let base_eval = self.eval.clone();
        let f_eval = f.clone();
        let out = Self::from_fn(
            name,
            Arc::new(move |x, y| {
                let s = f_eval(x, y);
                base_eval(x, y).map(|e| e * s)
            }),
        );
        match (df, &self.dx, &self.dy) {
            (Some((fx, fy)), Some(gdx), Some(gdy)) => {
                let (ex, gx, fa, fb) = (self.eval.clone(), gdx.clone(), f.clone(), fx);
                let dx: EvalFn = Arc::new(move |x, y| {
                    let s = fa(x, y);
                    let sp = fb(x, y);
                    gx(x, y).map(|e| e * s) + ex(x, y).map(|e| e * sp)
                });
                let (ey, gy, fc, fd_) = (self.eval.clone(), gdy.clone(), f.clone(), fy);
                let dy: EvalFn = Arc::new(move |x, y| {
                    let s = fc(x, y);
                    let sp = fd_(x, y);
                    gy(x, y).map(|e| e * s) + ey(x, y).map(|e| e * sp)
                });
                out.with_derivs(dx, dy)
            }
            _ => out,
        }
    }

    /// Max deviation `|g(x0 + L, y) - g(x0, y)|` over y-samples, for
    /// deck-invariance checks on quotient charts.
    pub fn deck_defect(&self, domain: &ChartDomain) -> f64 {
        let Some(period) = domain.deck_period else {
            return 0.0;
        };
        let mut worst: f64 = 0.0;
        for j in 0..domain.ny {
            let y = domain.ys(j);
            let d = (self.at(domain.x0 + period, y) - self.at(domain.x0, y)).norm();
            worst = worst.max(d);
        }
        worst
    }
}

/// Tolerance below which an intermediate frame vector counts as isotropic.
const FRAME_ISOTROPY_TOL: f64 = 1e-12;

/// Pointwise frame data with enough derivative information to produce
/// the connection form without finite differences.
#[derive(Debug, Clone)]
pub struct FrameData {
    /// Frame vectors in the coordinate basis.
    pub x1: V2,
    pub x2: V2,
    /// The square-root normalizers actually used (branch references for
    /// continuation to neighboring points).
    pub n1: Cx,
    pub n2: Cx,
    /// Components `(w_x, w_y)` of the internal connection form
    /// `w(Y) = g(grad_Y X1, X2)` (satisfies `dw = -K dA`).
    pub omega: (Cx, Cx),
}

impl FrameData {
    /// `det [X1 | X2]`; its reciprocal is the coefficient of the frame
    /// area form `theta^1 ^ theta^2` on `dx ^ dy`.
    pub fn det(&self) -> Cx {
        self.x1[0] * self.x2[1] - self.x1[1] * self.x2[0]
    }

    /// Coefficient `a` of the frame area form: `dA = a dx ^ dy`.
    pub fn area_coeff(&self) -> Cx {
        ONE / self.det()
    }
}

/// Christoffel symbols as two matrices `Gam_a = [Gamma^c_{a b}]_{c,b}`,
/// so `(grad_a Z)^c = da Z^c + (Gam_a Z)^c`.
pub fn christoffels(g: &Matrix2<Cx>, gx: &Matrix2<Cx>, gy: &Matrix2<Cx>) -> Result<[Matrix2<Cx>; 2]> {
    let det = g.determinant();
    if det.norm() < 1e-14 * g.norm() * g.norm() {
        return Err(Error::Singular("metric degenerate in christoffels".into()));
    }
    let ginv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]).map(|e| e / det);
    let dg = [gx, gy];
    let half = cx(0.5, 0.0);
    let mut out = [Matrix2::from_element(ZERO); 2];
    for a in 0..2 {
        for c in 0..2 {
            for b in 0..2 {
                let mut s = ZERO;
                for d in 0..2 {
                    s += ginv[(c, d)] * (dg[a][(b, d)] + dg[b][(a, d)] - dg[d][(a, b)]) * half;
                }
                out[a][(c, b)] = s;
            }
        }
    }
    Ok(out)
}

/// Seed fields for the pointwise frame: two vectors and, when they vary
/// with position, their coordinate derivatives.
#[derive(Debug, Clone, Copy)]
pub struct FrameSeeds {
    pub s1: V2,
    pub s2: V2,
    /// `(d/dx, d/dy)` of each seed; zero for constant seeds.
    pub ds1: (V2, V2),
    pub ds2: (V2, V2),
}

impl FrameSeeds {
    pub fn coordinate() -> Self {
        Self::constant(V2::new(ONE, ZERO), V2::new(ZERO, ONE))
    }

    pub fn constant(s1: V2, s2: V2) -> Self {
        let z = V2::new(ZERO, ZERO);
        Self {
            s1,
            s2,
            ds1: (z, z),
            ds2: (z, z),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            s1: self.s2,
            s2: self.s1,
            ds1: self.ds2,
            ds2: self.ds1,
        }
    }
}

fn bilin(g: &Matrix2<Cx>, u: &V2, v: &V2) -> Cx {
    (u.transpose() * g * v)[(0, 0)]
}

/// Gram-Schmidt frame and its exact connection form at one point.
///
/// All derivatives are taken analytically from the metric's derivative
/// callbacks and the seed derivatives, so the only discretization error
/// downstream is the outer exterior derivative.
///
/// `refs` supplies branch references for the two normalizing square
/// roots (use the `n1`, `n2` of a neighboring point for continuity).
pub fn frame_at(
    g: &MetricField,
    x: f64,
    y: f64,
    seeds: &FrameSeeds,
    refs: Option<(Cx, Cx)>,
) -> Result<FrameData> {
    let gm = g.at(x, y);
    let (gx, gy) = g.deriv_at(x, y);
    let dg = [gx, gy];
    let gam = christoffels(&gm, &gx, &gy)?;
    let scale = gm.norm().max(f64::MIN_POSITIVE);

    let (b1, b2) = match refs {
        Some((r1, r2)) => (SqrtBranch::Near(r1), SqrtBranch::Near(r2)),
        None => (SqrtBranch::Principal, SqrtBranch::Principal),
    };

    let s1 = seeds.s1;
    let ds1 = [seeds.ds1.0, seeds.ds1.1];
    let s2 = seeds.s2;

    let u1 = bilin(&gm, &s1, &s1);
    if u1.norm() <= FRAME_ISOTROPY_TOL * scale * s1.norm_squared() {
        return Err(Error::FrameAt { x, y });
    }
    let n1 = b1.sqrt(u1);
    let x1 = s1.map(|e| e / n1);

    let mut dx1 = [V2::zeros(); 2];
    let mut du1 = [ZERO; 2];
    for a in 0..2 {
        du1[a] = bilin(&dg[a], &s1, &s1) + cx(2.0, 0.0) * bilin(&gm, &s1, &ds1[a]);
        let dn1 = du1[a] / (cx(2.0, 0.0) * n1);
        dx1[a] = ds1[a].map(|e| e / n1) - s1.map(|e| e * dn1 / (n1 * n1));
    }

    let c = bilin(&gm, &s2, &x1);
    let y2 = s2 - x1.map(|e| e * c);
    let u2 = bilin(&gm, &y2, &y2);
    if u2.norm() <= FRAME_ISOTROPY_TOL * scale * s2.norm_squared().max(1e-30) {
        return Err(Error::FrameAt { x, y });
    }
    let n2 = b2.sqrt(u2);
    let x2 = y2.map(|e| e / n2);

    // omega(Y) = g(grad_Y X1, X2) needs the derivative of X1 only
    let mut omega = [ZERO; 2];
    for a in 0..2 {
        let cov = dx1[a] + gam[a] * x1;
        omega[a] = bilin(&gm, &cov, &x2);
    }

    Ok(FrameData {
        x1,
        x2,
        n1,
        n2,
        omega: (omega[0], omega[1]),
    })
}

/// A branch-continuous orthonormal frame over the whole grid.
pub struct OrthoFrame {
    pub domain: ChartDomain,
    pub seeds: FrameSeeds,
    /// Per-point frame data, row-major (x fast).
    pub points: Vec<FrameData>,
}

/// Builds the grid frame, continuing the square-root branches row-major
/// from the lower-left corner so adjacent frames never flip sign.
pub fn frame_orthonormal(
    g: &MetricField,
    domain: &ChartDomain,
    seeds: &FrameSeeds,
) -> Result<OrthoFrame> {
    let mut points: Vec<FrameData> = Vec::with_capacity(domain.len());
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let refs = if i > 0 {
                let p = &points[domain.idx(i - 1, j)];
                Some((p.n1, p.n2))
            } else if j > 0 {
                let p = &points[domain.idx(0, j - 1)];
                Some((p.n1, p.n2))
            } else {
                None
            };
            points.push(frame_at(g, domain.xs(i), domain.ys(j), seeds, refs)?);
        }
    }
    Ok(OrthoFrame {
        domain: domain.clone(),
        seeds: *seeds,
        points,
    })
}

impl OrthoFrame {
    /// Max orthonormality defect `|T^t G T - I|` over the grid.
    pub fn orthonormality_defect(&self, g: &MetricField) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.domain.ny {
            for i in 0..self.domain.nx {
                let p = &self.points[self.domain.idx(i, j)];
                let gm = g.at(self.domain.xs(i), self.domain.ys(j));
                let t = Matrix2::from_columns(&[p.x1, p.x2]);
                let d = (t.transpose() * gm * t - Matrix2::identity()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Mismatch between the frame at `x0 + L` (branch-continued along
    /// the row) and the stored frame at `x0`.
    pub fn deck_defect(&self, g: &MetricField) -> Result<f64> {
        let Some(period) = self.domain.deck_period else {
            return Ok(0.0);
        };
        let mut worst: f64 = 0.0;
        for j in 0..self.domain.ny {
            let last = &self.points[self.domain.idx(self.domain.nx - 1, j)];
            let wrapped = frame_at(
                g,
                self.domain.x0 + period,
                self.domain.ys(j),
                &self.seeds,
                Some((last.n1, last.n2)),
            )?;
            let first = &self.points[self.domain.idx(0, j)];
            let d = (wrapped.x1 - first.x1).norm() + (wrapped.x2 - first.x2).norm();
            worst = worst.max(d);
        }
        Ok(worst)
    }
}

/// The Levi-Civita connection form `theta^1_2` of a frame, sampled on
/// the grid as components on `(dx, dy)`.
pub struct ConnectionForm {
    pub domain: ChartDomain,
    /// `(theta^1_2(d/dx), theta^1_2(d/dy))` per grid point.
    pub components: Vec<(Cx, Cx)>,
}

/// `theta^1_2 = -w` with `w` the internal form of [`frame_at`], so the
/// structure equation `d theta^1 = -theta^1_2 ^ theta^2` holds.
pub fn connection_form(frame: &OrthoFrame) -> ConnectionForm {
    let components = frame
        .points
        .iter()
        .map(|p| (-p.omega.0, -p.omega.1))
        .collect();
    ConnectionForm {
        domain: frame.domain.clone(),
        components,
    }
}

/// Gaussian curvature `K = -(dw)(X1, X2)` at a point, with the exterior
/// derivative taken by centered differences of the given steps on the
/// analytic connection form (branches continued from the center).
pub fn curvature_at_seeded(
    g: &MetricField,
    seeds: &FrameSeeds,
    x: f64,
    y: f64,
    hx: f64,
    hy: f64,
) -> Result<Cx> {
    let center = frame_at(g, x, y, seeds, None)?;
    let refs = Some((center.n1, center.n2));
    let wy_p = frame_at(g, x + hx, y, seeds, refs)?.omega.1;
    let wy_m = frame_at(g, x - hx, y, seeds, refs)?.omega.1;
    let wx_p = frame_at(g, x, y + hy, seeds, refs)?.omega.0;
    let wx_m = frame_at(g, x, y - hy, seeds, refs)?.omega.0;
    let curl = (wy_p - wy_m) / cx(2.0 * hx, 0.0) - (wx_p - wx_m) / cx(2.0 * hy, 0.0);
    Ok(-curl * center.det())
}

/// Curvature with the canonical coordinate-seeded frame.
pub fn curvature_at(g: &MetricField, x: f64, y: f64, hx: f64, hy: f64) -> Result<Cx> {
    curvature_at_seeded(g, &FrameSeeds::coordinate(), x, y, hx, hy)
}

/// Curvature at a grid point, stencil steps tied to the grid spacing.
/// Off-grid-interior points are rejected on non-periodic axes.
pub fn curvature_grid_point(g: &MetricField, domain: &ChartDomain, i: usize, j: usize) -> Result<Cx> {
    if !domain.is_interior(i, j) {
        return Err(Error::BoundaryStencil {
            x: domain.xs(i),
            y: domain.ys(j),
        });
    }
    curvature_at(g, domain.xs(i), domain.ys(j), domain.hx(), domain.hy())
}

/// Positivity classification of a complex metric at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Real positive-definite.
    Riemannian,
    /// Real negative-definite.
    NegativeDefinite,
    /// Real with real isotropic directions.
    RealIndefinite,
    /// Genuinely complex.
    Generic,
}

#[derive(Debug, Clone, Copy)]
pub struct Classification {
    /// True when the isotropic slopes lie on opposite sides of the real
    /// line (`Im(mu1) * Im(mu2) < 0`).
    pub positive: bool,
    pub kind: MetricKind,
    /// The two isotropic slopes: `g(dx + mu dy, dx + mu dy) = 0`.
    pub mu: (Cx, Cx),
}

const REALNESS_TOL: f64 = 1e-10;

/// Solves `g22 mu^2 + 2 g12 mu + g11 = 0` and classifies.
pub fn classify(g: &MetricField, x: f64, y: f64) -> Result<Classification> {
    let gm = g.at(x, y);
    let (e, f, h) = (gm[(0, 0)], gm[(0, 1)], gm[(1, 1)]);
    let scale = gm.norm().max(f64::MIN_POSITIVE);
    if h.norm() < 1e-12 * scale {
        return Err(Error::Singular(
            "isotropic dy direction: rotate the chart before classifying".into(),
        ));
    }
    let disc = f * f - e * h;
    if disc.norm() < 1e-12 * scale * scale {
        return Err(Error::Singular(
            "double isotropic direction (degenerate conformal class)".into(),
        ));
    }
    let root = disc.sqrt();
    let mu1 = (-f + root) / h;
    let mu2 = (-f - root) / h;
    let positive = mu1.im * mu2.im < 0.0;
    let is_real = gm.iter().map(|z| z.im.abs()).fold(0.0, f64::max) < REALNESS_TOL * scale;
    let kind = if is_real {
        let det = (e * h - f * f).re;
        if det > 0.0 && e.re > 0.0 {
            MetricKind::Riemannian
        } else if det > 0.0 {
            MetricKind::NegativeDefinite
        } else {
            MetricKind::RealIndefinite
        }
    } else {
        MetricKind::Generic
    };
    Ok(Classification {
        positive,
        kind,
        mu: (mu1, mu2),
    })
}

/// Bicomplex structure of a positive complex metric at a point, as a
/// coordinate-basis matrix with `J^2 = -I` and `g(J., J.) = g`.
///
/// Orientation `+1` picks the `J` whose `+i`-eigendirection is the
/// isotropic slope with negative imaginary part (the standard rotation
/// `[[0,-1],[1,0]]` for the Euclidean plane).
pub fn bicomplex(g: &MetricField, x: f64, y: f64, orientation: i8) -> Result<Matrix2<Cx>> {
    if orientation != 1 && orientation != -1 {
        return Err(Error::InvalidArgument("orientation must be +1 or -1".into()));
    }
    let class = classify(g, x, y)?;
    if !class.positive {
        return Err(Error::Classification(format!(
            "metric is not positive at ({x:.4}, {y:.4}): slopes {:?}",
            class.mu
        )));
    }
    let (m1, m2) = class.mu;
    // mu_a: +i eigendirection, mu_b: -i eigendirection
    let (mu_a, mu_b) = if (m1.im < 0.0) == (orientation == 1) {
        (m1, m2)
    } else {
        (m2, m1)
    };
    let i = cx(0.0, 1.0);
    let denom = mu_b - mu_a;
    Ok(Matrix2::new(
        i * (mu_a + mu_b) / denom,
        -cx(2.0, 0.0) * i / denom,
        cx(2.0, 0.0) * i * mu_a * mu_b / denom,
        -i * (mu_a + mu_b) / denom,
    ))
}

/// Coefficient `a` of the area form `dA = g(J., .) = a dx ^ dy`.
pub fn area_form_coeff(g: &MetricField, x: f64, y: f64, orientation: i8) -> Result<Cx> {
    let j = bicomplex(g, x, y, orientation)?;
    let gm = g.at(x, y);
    let je1 = j.column(0);
    Ok(je1[0] * gm[(0, 1)] + je1[1] * gm[(1, 1)])
}

/// Closed surfaces supported by [`gauss_bonnet`].
#[derive(Debug, Clone, Copy)]
pub enum ClosedSurface {
    /// Doubly periodic chart `[0, lx) x [0, ly)`, Euler characteristic 0.
    Torus { lx: f64, ly: f64 },
    /// Chart `(phi, theta) in [0, 2pi) x [cap, pi - cap]` plus two polar
    /// caps handled by boundary corrections, Euler characteristic 2.
    Sphere { cap_angle: f64 },
}

/// Gauss-Bonnet output with the pieces of the boundary-correction
/// computation exposed for diagnostics.
#[derive(Debug, Clone)]
pub struct GaussBonnetReport {
    /// The full integral `int_S K dA` (band + cap corrections).
    pub total: Cx,
    pub band_integral: Cx,
    /// Quantized frame-angle winding terms, one per cap (multiples of pi).
    pub cap_windings: Vec<f64>,
    /// Distance between each quadrature winding and its quantization.
    pub quantization_defect: f64,
}

/// Stereographic reference seeds for a polar cap of the `(phi, theta)`
/// chart; `north` selects the pole `theta = 0`.
///
/// The cap coordinate is `w = rho e^{i phi}` with `rho = tan(theta/2)`
/// at the north pole and `w = rho e^{-i phi}`, `rho = cot(theta/2)` at
/// the south pole. The seeds are the coordinate fields `(d/du, d/dv)`
/// of `w = u + iv`, smooth across the pole, written in the chart basis
/// by inverting the Jacobian of `(phi, theta) -> (u, v)`:
///   d/du = (-sin(phi)/rho) d/dphi + (cos(phi)/rho') d/dtheta
///   d/dv = sigma [ (cos(phi)/rho) d/dphi + (sin(phi)/rho') d/dtheta ]
/// with `rho' = d rho/d theta` and `sigma = +1` (north), `-1` (south).
fn cap_seeds(phi: f64, theta: f64, north: bool) -> FrameSeeds {
    let (rho, rho_d, eps, sigma) = if north {
        let half = theta / 2.0;
        (half.tan(), 0.5 / (half.cos() * half.cos()), 1.0, 1.0)
    } else {
        let half = theta / 2.0;
        (
            1.0 / half.tan(),
            -0.5 / (half.sin() * half.sin()),
            -1.0,
            -1.0,
        )
    };
    let (c, s) = (phi.cos(), phi.sin());
    let s1 = V2::new(cx(-s / rho, 0.0), cx(c / rho_d, 0.0));
    let s2 = V2::new(cx(sigma * c / rho, 0.0), cx(sigma * s / rho_d, 0.0));
    let ds1_dx = V2::new(cx(-c / rho, 0.0), cx(-s / rho_d, 0.0));
    let ds2_dx = V2::new(cx(-sigma * s / rho, 0.0), cx(sigma * c / rho_d, 0.0));
    // d rho/d theta = rho' and d rho'/d theta = eps * rho' * rho
    let rho_dd = eps * rho_d * rho;
    let ds1_dy = V2::new(
        cx(s * rho_d / (rho * rho), 0.0),
        cx(-c * rho_dd / (rho_d * rho_d), 0.0),
    );
    let ds2_dy = V2::new(
        cx(-sigma * c * rho_d / (rho * rho), 0.0),
        cx(-sigma * s * rho_dd / (rho_d * rho_d), 0.0),
    );
    FrameSeeds {
        s1,
        s2,
        ds1: (ds1_dx, ds1_dy),
        ds2: (ds2_dx, ds2_dy),
    }
}

/// Integrates `K dA` over a closed surface: plain periodic quadrature on
/// the torus; on the sphere, band quadrature plus per-cap boundary
/// corrections whose frame-angle windings are quantized to multiples of
/// `pi` (the proof-side mechanism that makes the result land in `pi Z`).
pub fn gauss_bonnet(
    surface: ClosedSurface,
    g: &MetricField,
    nx: usize,
    ny: usize,
) -> Result<GaussBonnetReport> {
    match surface {
        ClosedSurface::Torus { lx, ly } => gauss_bonnet_torus(g, lx, ly, nx, ny),
        ClosedSurface::Sphere { cap_angle } => gauss_bonnet_sphere(g, cap_angle, nx, ny),
    }
}

fn gauss_bonnet_torus(g: &MetricField, lx: f64, ly: f64, nx: usize, ny: usize) -> Result<GaussBonnetReport> {
    let domain = ChartDomain::new((0.0, lx), (0.0, ly), nx, ny)?
        .with_periodic_x()
        .with_periodic_y();
    let seeds = FrameSeeds::coordinate();
    let (hx, hy) = (domain.hx(), domain.hy());
    let mut total = ZERO;
    let mut refs: Option<(Cx, Cx)> = None;
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (domain.xs(i), domain.ys(j));
            let center = frame_at(g, x, y, &seeds, refs)?;
            refs = Some((center.n1, center.n2));
            let k = curvature_with_refs(g, &seeds, x, y, hx, hy, &center)?;
            // dA of the frame orientation: a = n1 n2 (branch-continued)
            let a = center.n1 * center.n2;
            total += k * a * cx(hx * hy, 0.0);
        }
        refs = {
            let p = &frame_at(g, domain.xs(0), domain.ys(j), &seeds, refs)?;
            Some((p.n1, p.n2))
        };
    }
    Ok(GaussBonnetReport {
        total,
        band_integral: total,
        cap_windings: vec![],
        quantization_defect: 0.0,
    })
}

/// Curvature reusing an already-computed center frame (for quadratures).
fn curvature_with_refs(
    g: &MetricField,
    seeds: &FrameSeeds,
    x: f64,
    y: f64,
    hx: f64,
    hy: f64,
    center: &FrameData,
) -> Result<Cx> {
    let refs = Some((center.n1, center.n2));
    let wy_p = frame_at(g, x + hx, y, seeds, refs)?.omega.1;
    let wy_m = frame_at(g, x - hx, y, seeds, refs)?.omega.1;
    let wx_p = frame_at(g, x, y + hy, seeds, refs)?.omega.0;
    let wx_m = frame_at(g, x, y - hy, seeds, refs)?.omega.0;
    let curl = (wy_p - wy_m) / cx(2.0 * hx, 0.0) - (wx_p - wx_m) / cx(2.0 * hy, 0.0);
    Ok(-curl * center.det())
}

fn gauss_bonnet_sphere(g: &MetricField, cap: f64, nx: usize, ny: usize) -> Result<GaussBonnetReport> {
    use std::f64::consts::PI;
    if !(cap > 0.0 && cap < PI / 2.0) {
        return Err(Error::InvalidArgument("cap angle must be in (0, pi/2)".into()));
    }
    let domain = ChartDomain::new((0.0, 2.0 * PI), (cap, PI - cap), nx, ny)?.with_periodic_x();
    let seeds = FrameSeeds::coordinate();
    let (hx, hy) = (domain.hx(), domain.hy());

    // band integral of K dA, trapezoid in y, periodic sum in x
    let mut band = ZERO;
    let mut row_refs: Option<(Cx, Cx)> = None;
    let mut edge_global: Vec<Vec<FrameData>> = vec![Vec::new(), Vec::new()];
    for j in 0..ny {
        let wy = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
        let y = domain.ys(j);
        let mut refs = row_refs;
        for i in 0..nx {
            let x = domain.xs(i);
            let center = frame_at(g, x, y, &seeds, refs)?;
            refs = Some((center.n1, center.n2));
            if i == 0 {
                row_refs = refs;
            }
            let k = curvature_with_refs(g, &seeds, x, y, hx, hy, &center)?;
            let a = center.n1 * center.n2;
            band += k * a * cx(hx * hy * wy, 0.0);
            if j == 0 {
                edge_global[0].push(center.clone());
            } else if j == ny - 1 {
                edge_global[1].push(center.clone());
            }
        }
    }

    // cap corrections: int_cap K dA = sign * oint omega_cap along the
    // shared circle (+x direction), with
    //   north (y = cap):      int_ncap = + oint omega_ncap
    //   south (y = pi - cap): int_scap = - oint omega_scap
    // and each oint omega_cap rewritten as oint omega_global - D with D
    // the quantized frame-angle winding.
    let mut total = band;
    let mut cap_windings = Vec::new();
    let mut quantization_defect: f64 = 0.0;
    for (edge_idx, north) in [(0usize, true), (1usize, false)] {
        let y = if north { cap } else { PI - cap };
        let globals = &edge_global[edge_idx];
        // branch-continued cap frame along the circle
        let mut cap_frames: Vec<FrameData> = Vec::with_capacity(nx);
        let mut refs: Option<(Cx, Cx)> = None;
        let mut swap = false;
        for i in 0..nx {
            let x = domain.xs(i);
            let mut sds = cap_seeds(x, y, north);
            if i == 0 {
                // orientation match against the global frame
                let trial = frame_at(g, x, y, &sds, None)?;
                let ratio = trial.det() / globals[0].det();
                if ratio.re < 0.0 {
                    swap = true;
                }
            }
            if swap {
                sds = sds.swapped();
            }
            let fd = frame_at(g, x, y, &sds, refs)?;
            refs = Some((fd.n1, fd.n2));
            cap_frames.push(fd);
        }
        // circle integrals in the +x direction (periodic quadrature)
        let mut oint_global = ZERO;
        let mut oint_cap = ZERO;
        for i in 0..nx {
            oint_global += globals[i].omega.0 * cx(hx, 0.0);
            oint_cap += cap_frames[i].omega.0 * cx(hx, 0.0);
        }
        // frame-angle winding of w = cos(alpha) + i sin(alpha), squared,
        // by continuous argument tracking
        let gm_at = |i: usize| g.at(domain.xs(i), y);
        let mut arg_sum = 0.0;
        let mut w_prev = {
            let gm = gm_at(0);
            let ca = bilin(&gm, &cap_frames[0].x1, &globals[0].x1);
            let sa = bilin(&gm, &cap_frames[0].x1, &globals[0].x2);
            let w = ca + cx(0.0, 1.0) * sa;
            w * w
        };
        let w_first = w_prev;
        for i in 1..=nx {
            let idx = i % nx;
            let w = if i == nx {
                w_first
            } else {
                let gm = gm_at(idx);
                let ca = bilin(&gm, &cap_frames[idx].x1, &globals[idx].x1);
                let sa = bilin(&gm, &cap_frames[idx].x1, &globals[idx].x2);
                let z = ca + cx(0.0, 1.0) * sa;
                z * z
            };
            if w.norm() < 1e-12 || w_prev.norm() < 1e-12 {
                return Err(Error::Resolution(
                    "frame angle vanished on a cap boundary: refine the grid".into(),
                ));
            }
            arg_sum += (w / w_prev).arg();
            w_prev = w;
        }
        let degree = (arg_sum / (2.0 * PI)).round();
        let winding = PI * degree; // quantized value of oint d(alpha)
        // quadrature value of the same quantity, for the defect report
        let d_quad = oint_global - oint_cap;
        let (d_quantized, defect) = if (d_quad - cx(winding, 0.0)).norm()
            <= (d_quad + cx(winding, 0.0)).norm()
        {
            (cx(winding, 0.0), (d_quad - cx(winding, 0.0)).norm())
        } else {
            (cx(-winding, 0.0), (d_quad + cx(winding, 0.0)).norm())
        };
        if defect > 0.2 {
            return Err(Error::Resolution(format!(
                "cap winding quantization defect {defect:.3}: refine the grid"
            )));
        }
        quantization_defect = quantization_defect.max(defect);
        cap_windings.push(d_quantized.re);
        let oint_cap_quantized = oint_global - d_quantized;
        if north {
            total += oint_cap_quantized;
        } else {
            total -= oint_cap_quantized;
        }
    }

    Ok(GaussBonnetReport {
        total,
        band_integral: band,
        cap_windings,
        quantization_defect,
    })
}

/// Serializes grid fields as CSV: `x,y,re_<name>,im_<name>,...`.
/// Floats are printed at 17 significant digits for determinism.
pub fn grid_csv(domain: &ChartDomain, fields: &[(&str, &[Cx])]) -> Result<String> {
    for (name, data) in fields {
        if data.len() != domain.len() {
            return Err(Error::Data(format!(
                "field '{name}' has {} samples, expected {}",
                data.len(),
                domain.len()
            )));
        }
    }
    let mut out = String::from("x,y");
    for (name, _) in fields {
        out.push_str(&format!(",re_{name},im_{name}"));
    }
    out.push('\n');
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            out.push_str(&format!("{:.16e},{:.16e}", domain.xs(i), domain.ys(j)));
            for (_, data) in fields {
                let z = data[domain.idx(i, j)];
                out.push_str(&format!(",{:.16e},{:.16e}", z.re, z.im));
            }
            out.push('\n');
        }
    }
    Ok(out)
}
