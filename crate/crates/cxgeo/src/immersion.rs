//! Extrinsic machinery for surfaces in the quadric space forms.
//!
//! From immersion data (a complex metric `g` and a `g`-self-adjoint
//! shape field `Psi`) this module computes Gauss and Codazzi residuals,
//! assembles the flat skew 4x4 connection form, integrates it along
//! paths and spanning trees to develop immersions `sigma = Phi e` into
//! `X_3`, extracts monodromy over cylinder quotients, aligns
//! developments (uniqueness up to a global isometry), reduces
//! curvature -1 metrics to totally geodesic developments into `X_2`
//! with their geodesic-endpoint pair, classifies the pseudo-Riemannian
//! target of real data, and pulls the geodesic-space metric back from
//! hyperbolic 3-space.

use std::sync::Arc;

use nalgebra::{DVector, Matrix2, Matrix4, Vector4};

use crate::calg::{cx, gram_schmidt, CBilinearForm, Cx, SqrtBranch, I, ONE, ZERO};
use crate::cmetric::{
    bicomplex, christoffels, classify, curvature_at, frame_at, ChartDomain, EvalFn, FrameSeeds,
    MetricField, MetricKind, V2,
};
use crate::spaceforms::{
    h3_ray_endpoint, orthogonality_defect4, retract_orthogonal4, so4_to_sl2_pair, H3Point,
    H3Tangent, Mobius, ProjP1,
};
use crate::{Error, Result};

/// Default gate on grid-max Gauss-Codazzi residuals before development.
pub const GC_GATE: f64 = 1e-4;

/// Relative tolerance for `g`-self-adjointness of a shape field.
pub const SELF_ADJOINT_TOL: f64 = 1e-9;

/// A shape-operator field `Psi(x, y)` in the coordinate frame, with
/// derivative access like [`MetricField`].
#[derive(Clone)]
pub struct ShapeField {
    eval: EvalFn,
    dx: Option<EvalFn>,
    dy: Option<EvalFn>,
    fd_step: f64,
}

impl ShapeField {
    pub fn from_fn(eval: EvalFn) -> Self {
        Self {
            eval,
            dx: None,
            dy: None,
            fd_step: 1e-5,
        }
    }

    pub fn with_derivs(mut self, dx: EvalFn, dy: EvalFn) -> Self {
        self.dx = Some(dx);
        self.dy = Some(dy);
        self
    }

    pub fn zero() -> Self {
        Self::constant(Matrix2::from_element(ZERO))
    }

    /// Constant multiple of the identity.
    pub fn scalar(c: Cx) -> Self {
        Self::constant(Matrix2::identity().map(|e: Cx| e * c))
    }

    pub fn constant(m: Matrix2<Cx>) -> Self {
        let z = Matrix2::from_element(ZERO);
        Self::from_fn(Arc::new(move |_, _| m))
            .with_derivs(Arc::new(move |_, _| z), Arc::new(move |_, _| z))
    }

    pub fn at(&self, x: f64, y: f64) -> Matrix2<Cx> {
        (self.eval)(x, y)
    }

    pub fn deriv_at(&self, x: f64, y: f64) -> (Matrix2<Cx>, Matrix2<Cx>) {
        match (&self.dx, &self.dy) {
            (Some(dx), Some(dy)) => (dx(x, y), dy(x, y)),
            _ => {
                let h = self.fd_step;
                let half = cx(0.5 / h, 0.0);
                let px = ((self.eval)(x + h, y) - (self.eval)(x - h, y)).map(|e| e * half);
                let py = ((self.eval)(x, y + h) - (self.eval)(x, y - h)).map(|e| e * half);
                (px, py)
            }
        }
    }

    /// This field times a constant, keeping analytic derivatives.
    pub fn scaled(&self, c: Cx) -> Self {
        let eval = self.eval.clone();
        let out = Self::from_fn(Arc::new(move |x, y| eval(x, y).map(|e| e * c)));
        match (&self.dx, &self.dy) {
            (Some(dx), Some(dy)) => {
                let (dx, dy) = (dx.clone(), dy.clone());
                out.with_derivs(
                    Arc::new(move |x, y| dx(x, y).map(|e| e * c)),
                    Arc::new(move |x, y| dy(x, y).map(|e| e * c)),
                )
            }
            _ => out,
        }
    }

    /// `|Psi^T G - G Psi|` relative to the field scales.
    pub fn self_adjoint_defect(&self, g: &MetricField, x: f64, y: f64) -> f64 {
        let gm = g.at(x, y);
        let p = self.at(x, y);
        let scale = (gm.norm() * p.norm()).max(1.0);
        (p.transpose() * gm - gm * p).norm() / scale
    }
}

/// A pair `(g, Psi)` over a chart: the data that determines an
/// equivariant immersion up to ambient isometry.
#[derive(Clone)]
pub struct ImmersionData {
    pub domain: ChartDomain,
    pub g: MetricField,
    pub psi: ShapeField,
}

impl ImmersionData {
    /// Validates self-adjointness on the grid and deck invariance of
    /// both fields when a deck transform is present.
    pub fn new(domain: ChartDomain, g: MetricField, psi: ShapeField) -> Result<Self> {
        let mut worst: f64 = 0.0;
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                worst = worst.max(psi.self_adjoint_defect(&g, domain.xs(i), domain.ys(j)));
            }
        }
        if worst > SELF_ADJOINT_TOL {
            return Err(Error::InvalidArgument(format!(
                "shape field is not g-self-adjoint (defect {worst:.3e})"
            )));
        }
        if let Some(period) = domain.deck_period {
            let gd = g.deck_defect(&domain);
            let mut pd: f64 = 0.0;
            for j in 0..domain.ny {
                let y = domain.ys(j);
                pd = pd.max((psi.at(domain.x0 + period, y) - psi.at(domain.x0, y)).norm());
            }
            if gd.max(pd) > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "immersion data is not deck-invariant (g {gd:.3e}, psi {pd:.3e})"
                )));
            }
        }
        Ok(Self { domain, g, psi })
    }
}

/// Codazzi residual `d^nabla Psi(X1, X2)` at one point, in orthonormal
/// frame components. Pointwise-exact up to the derivative callbacks.
pub fn codazzi_residual_at(g: &MetricField, psi: &ShapeField, x: f64, y: f64) -> Result<V2> {
    let gm = g.at(x, y);
    let (gx, gy) = g.deriv_at(x, y);
    let gam = christoffels(&gm, &gx, &gy)?;
    let pm = psi.at(x, y);
    let (px, py) = psi.deriv_at(x, y);
    // d^nabla Psi(dx, dy) = grad_x(Psi dy) - grad_y(Psi dx)
    let pe1: V2 = pm.column(0).into_owned();
    let pe2: V2 = pm.column(1).into_owned();
    let c: V2 =
        px.column(1).into_owned() + gam[0] * pe2 - py.column(0).into_owned() - gam[1] * pe1;
    let fr = frame_at(g, x, y, &FrameSeeds::coordinate(), None)?;
    let scaled = c.map(|e| e * fr.det());
    let comp = |v: &V2| (v.transpose() * gm * scaled)[(0, 0)];
    Ok(V2::new(comp(&fr.x1), comp(&fr.x2)))
}

/// Grid field of Codazzi residuals and its max norm.
pub fn codazzi_residual(data: &ImmersionData) -> Result<(Vec<V2>, f64)> {
    let d = &data.domain;
    let mut out = Vec::with_capacity(d.len());
    let mut max: f64 = 0.0;
    for j in 0..d.ny {
        for i in 0..d.nx {
            let v = codazzi_residual_at(&data.g, &data.psi, d.xs(i), d.ys(j))?;
            max = max.max(v.norm());
            out.push(v);
        }
    }
    Ok((out, max))
}

/// Gauss residual `K - det(Psi) + 1` at one point, stencil steps tied
/// to the grid spacing.
pub fn gauss_residual_at(g: &MetricField, psi: &ShapeField, x: f64, y: f64, hx: f64, hy: f64) -> Result<Cx> {
    let k = curvature_at(g, x, y, hx, hy)?;
    Ok(k - psi.at(x, y).determinant() + ONE)
}

/// Grid field of Gauss residuals and its max norm.
pub fn gauss_residual(data: &ImmersionData) -> Result<(Vec<Cx>, f64)> {
    let d = &data.domain;
    let (hx, hy) = (d.hx(), d.hy());
    let mut out = Vec::with_capacity(d.len());
    let mut max: f64 = 0.0;
    for j in 0..d.ny {
        for i in 0..d.nx {
            let r = gauss_residual_at(&data.g, &data.psi, d.xs(i), d.ys(j), hx, hy)?;
            max = max.max(r.norm());
            out.push(r);
        }
    }
    Ok((out, max))
}

/// Evaluates the skew 4x4 connection form at a point: the pair of
/// coefficient matrices on `(dx, dy)` and the square-root branch
/// references of the underlying frame (for continuation).
pub fn omega_at(
    g: &MetricField,
    psi: &ShapeField,
    x: f64,
    y: f64,
    refs: Option<(Cx, Cx)>,
) -> Result<(Matrix4<Cx>, Matrix4<Cx>, (Cx, Cx))> {
    let fr = frame_at(g, x, y, &FrameSeeds::coordinate(), refs)?;
    let t = Matrix2::from_columns(&[fr.x1, fr.x2]);
    let det = t.determinant();
    let tinv = Matrix2::new(t[(1, 1)], -t[(0, 1)], -t[(1, 0)], t[(0, 0)]).map(|e| e / det);
    let pm = psi.at(x, y);
    let psi_frame = tinv * pm; // rows: frame components of Psi applied to coordinate fields
    let w = [fr.omega.0, fr.omega.1];
    let mut out = [Matrix4::from_element(ZERO), Matrix4::from_element(ZERO)];
    for a in 0..2 {
        let theta1 = tinv[(0, a)];
        let theta2 = tinv[(1, a)];
        let psi1 = psi_frame[(0, a)];
        let psi2 = psi_frame[(1, a)];
        let m = &mut out[a];
        // Theta block: theta^1_2 = -w
        m[(0, 1)] = -w[a];
        m[(1, 0)] = w[a];
        // shape column and its skew mirror
        m[(0, 2)] = -psi1;
        m[(1, 2)] = -psi2;
        m[(2, 0)] = psi1;
        m[(2, 1)] = psi2;
        // coframe column scaled by i
        m[(0, 3)] = -I * theta1;
        m[(1, 3)] = -I * theta2;
        m[(3, 0)] = I * theta1;
        m[(3, 1)] = I * theta2;
    }
    Ok((out[0], out[1], (fr.n1, fr.n2)))
}

/// The connection form sampled over the whole grid with branch
/// continuity (row-major marching).
pub struct OmegaField {
    pub domain: ChartDomain,
    /// `(dx coefficient, dy coefficient)` per grid point.
    pub coeffs: Vec<(Matrix4<Cx>, Matrix4<Cx>)>,
}

pub fn assemble_omega(data: &ImmersionData) -> Result<OmegaField> {
    let d = &data.domain;
    let mut coeffs = Vec::with_capacity(d.len());
    let mut row_refs: Option<(Cx, Cx)> = None;
    for j in 0..d.ny {
        let mut refs = row_refs;
        for i in 0..d.nx {
            let (wx, wy, r) = omega_at(&data.g, &data.psi, d.xs(i), d.ys(j), refs)?;
            refs = Some(r);
            if i == 0 {
                row_refs = refs;
            }
            coeffs.push((wx, wy));
        }
    }
    Ok(OmegaField {
        domain: d.clone(),
        coeffs,
    })
}

/// Finite-difference flatness residual `d omega + omega ^ omega` per
/// interior grid point (zero on non-interior points), and its max norm.
///
/// Convention: `(omega ^ omega)(X, Y) = omega(X) omega(Y) - omega(Y) omega(X)`.
pub fn flatness_residual(omega: &OmegaField) -> (Vec<Matrix4<Cx>>, f64) {
    let d = &omega.domain;
    let (hx, hy) = (d.hx(), d.hy());
    let mut out = vec![Matrix4::from_element(ZERO); d.len()];
    let mut max: f64 = 0.0;
    for j in 0..d.ny {
        for i in 0..d.nx {
            if !d.is_interior(i, j) {
                continue;
            }
            let ip = if i + 1 == d.nx { 0 } else { i + 1 };
            let im = if i == 0 { d.nx - 1 } else { i - 1 };
            let jp = if j + 1 == d.ny { 0 } else { j + 1 };
            let jm = if j == 0 { d.ny - 1 } else { j - 1 };
            let (wx, wy) = omega.coeffs[d.idx(i, j)];
            let dy_of_wx =
                (omega.coeffs[d.idx(i, jp)].0 - omega.coeffs[d.idx(i, jm)].0).map(|e| e / cx(2.0 * hy, 0.0));
            let dx_of_wy =
                (omega.coeffs[d.idx(ip, j)].1 - omega.coeffs[d.idx(im, j)].1).map(|e| e / cx(2.0 * hx, 0.0));
            let res = dx_of_wy - dy_of_wx + wx * wy - wy * wx;
            max = max.max(res.norm());
            out[d.idx(i, j)] = res;
        }
    }
    (out, max)
}

/// RK4 integration of `Phi' = Phi omega(gamma')` along a polyline, with
/// an orthogonal retraction after each edge. Square-root branches are
/// continued along the path.
pub fn integrate_path(
    g: &MetricField,
    psi: &ShapeField,
    path: &[(f64, f64)],
    phi0: &Matrix4<Cx>,
    substeps_per_edge: usize,
) -> Result<Matrix4<Cx>> {
    if path.len() < 2 {
        return Err(Error::InvalidArgument("path needs at least two vertices".into()));
    }
    let mut phi = *phi0;
    let mut refs: Option<(Cx, Cx)> = None;
    for edge in path.windows(2) {
        let (from, to) = (edge[0], edge[1]);
        let (p, r) = integrate_edge(g, psi, from, to, &phi, refs, substeps_per_edge)?;
        phi = retract_orthogonal4(&p);
        refs = Some(r);
    }
    Ok(phi)
}

/// One straight edge of the development; returns the transported matrix
/// (not yet retracted) and the branch references at the far end.
fn integrate_edge(
    g: &MetricField,
    psi: &ShapeField,
    from: (f64, f64),
    to: (f64, f64),
    phi0: &Matrix4<Cx>,
    refs: Option<(Cx, Cx)>,
    substeps: usize,
) -> Result<(Matrix4<Cx>, (Cx, Cx))> {
    let n = substeps.max(1);
    let (vx, vy) = (to.0 - from.0, to.1 - from.1);
    let h = 1.0 / n as f64;
    let mut phi = *phi0;
    let mut refs = refs;
    // omega(gamma') at parameter t, continuing the branch references
    let amat = |t: f64, refs: &mut Option<(Cx, Cx)>| -> Result<Matrix4<Cx>> {
        let (x, y) = (from.0 + vx * t, from.1 + vy * t);
        let (wx, wy, r) = omega_at(g, psi, x, y, *refs)?;
        *refs = Some(r);
        Ok(wx.map(|e| e * cx(vx, 0.0)) + wy.map(|e| e * cx(vy, 0.0)))
    };
    let mut a0 = amat(0.0, &mut refs)?;
    for s in 0..n {
        let t = s as f64 * h;
        let a_mid = amat(t + h / 2.0, &mut refs)?;
        let a_end = amat(t + h, &mut refs)?;
        let k1 = phi * a0;
        let k2 = (phi + k1.map(|e| e * cx(h / 2.0, 0.0))) * a_mid;
        let k3 = (phi + k2.map(|e| e * cx(h / 2.0, 0.0))) * a_mid;
        let k4 = (phi + k3.map(|e| e * cx(h, 0.0))) * a_end;
        phi += (k1 + k2.map(|e| e * cx(2.0, 0.0)) + k3.map(|e| e * cx(2.0, 0.0)) + k4)
            .map(|e| e * cx(h / 6.0, 0.0));
        if !phi.iter().all(|e| e.re.is_finite() && e.im.is_finite()) {
            return Err(Error::Integration {
                position: t + h,
                message: "non-finite transport matrix".into(),
            });
        }
        a0 = a_end;
    }
    Ok((phi, refs.expect("refs set by evaluations")))
}

/// A developed immersion: the transport `Phi` and the immersion
/// `sigma = Phi e` over the grid, with `e = (0, 0, 0, i)`.
pub struct Development {
    pub domain: ChartDomain,
    pub basepoint: (usize, usize),
    pub phi: Vec<Matrix4<Cx>>,
    pub sigma: Vec<Vector4<Cx>>,
}

/// Substeps per grid edge in tree developments.
pub const EDGE_SUBSTEPS: usize = 8;

fn sigma_of(phi: &Matrix4<Cx>) -> Vector4<Cx> {
    phi.column(3).map(|e| e * I)
}

/// Develops the immersion over the grid along a spanning tree of grid
/// edges (basepoint column first, then rows), gated on the max
/// Gauss-Codazzi residuals.
pub fn develop(
    data: &ImmersionData,
    basepoint: (usize, usize),
    phi0: Option<Matrix4<Cx>>,
    gate: f64,
) -> Result<Development> {
    let (_, gmax) = gauss_residual(data)?;
    if gmax > gate {
        return Err(Error::Gate {
            name: "gauss-residual".into(),
            value: gmax,
            threshold: gate,
        });
    }
    let (_, cmax) = codazzi_residual(data)?;
    if cmax > gate {
        return Err(Error::Gate {
            name: "codazzi-residual".into(),
            value: cmax,
            threshold: gate,
        });
    }
    let d = &data.domain;
    let (i0, j0) = basepoint;
    if i0 >= d.nx || j0 >= d.ny {
        return Err(Error::InvalidArgument("basepoint outside the grid".into()));
    }
    let mut phi = vec![Matrix4::from_element(ZERO); d.len()];
    let mut refs: Vec<Option<(Cx, Cx)>> = vec![None; d.len()];
    phi[d.idx(i0, j0)] = phi0.unwrap_or_else(Matrix4::identity);
    // pin the branch at the basepoint
    let (_, _, r0) = omega_at(&data.g, &data.psi, d.xs(i0), d.ys(j0), None)?;
    refs[d.idx(i0, j0)] = Some(r0);

    let step = |from: (usize, usize), to: (usize, usize), phi: &mut Vec<Matrix4<Cx>>, refs: &mut Vec<Option<(Cx, Cx)>>| -> Result<()> {
        let (p, r) = integrate_edge(
            &data.g,
            &data.psi,
            (d.xs(from.0), d.ys(from.1)),
            (d.xs(to.0), d.ys(to.1)),
            &phi[d.idx(from.0, from.1)],
            refs[d.idx(from.0, from.1)],
            EDGE_SUBSTEPS,
        )?;
        phi[d.idx(to.0, to.1)] = retract_orthogonal4(&p);
        refs[d.idx(to.0, to.1)] = Some(r);
        Ok(())
    };

    // basepoint column
    for j in (j0 + 1)..d.ny {
        step((i0, j - 1), (i0, j), &mut phi, &mut refs)?;
    }
    for j in (0..j0).rev() {
        step((i0, j + 1), (i0, j), &mut phi, &mut refs)?;
    }
    // rows
    for j in 0..d.ny {
        for i in (i0 + 1)..d.nx {
            step((i - 1, j), (i, j), &mut phi, &mut refs)?;
        }
        for i in (0..i0).rev() {
            step((i + 1, j), (i, j), &mut phi, &mut refs)?;
        }
    }

    let sigma = phi.iter().map(sigma_of).collect();
    Ok(Development {
        domain: d.clone(),
        basepoint,
        phi,
        sigma,
    })
}

fn dot4(u: &Vector4<Cx>, v: &Vector4<Cx>) -> Cx {
    u.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

impl Development {
    /// Ambient unit normal `nu = Phi v3` at a grid point.
    pub fn normal(&self, i: usize, j: usize) -> Vector4<Cx> {
        self.phi[self.domain.idx(i, j)].column(2).into_owned()
    }

    /// Max orthogonality defect of the transports.
    pub fn transport_defect(&self) -> f64 {
        self.phi
            .iter()
            .map(orthogonality_defect4)
            .fold(0.0, f64::max)
    }

    /// Max quadric residual of `sigma` over the grid.
    pub fn quadric_defect(&self) -> f64 {
        self.sigma
            .iter()
            .map(|s| (dot4(s, s) + ONE).norm())
            .fold(0.0, f64::max)
    }

    /// Max relative error between the finite-difference pull-back of
    /// the ambient form along `sigma` and `g`, over interior points.
    pub fn pull_back_defect(&self, g: &MetricField) -> f64 {
        let d = &self.domain;
        let (hx, hy) = (d.hx(), d.hy());
        let mut worst: f64 = 0.0;
        for j in 1..d.ny - 1 {
            for i in 1..d.nx - 1 {
                let sx = (self.sigma[d.idx(i + 1, j)] - self.sigma[d.idx(i - 1, j)])
                    .map(|e| e / cx(2.0 * hx, 0.0));
                let sy = (self.sigma[d.idx(i, j + 1)] - self.sigma[d.idx(i, j - 1)])
                    .map(|e| e / cx(2.0 * hy, 0.0));
                let gm = g.at(d.xs(i), d.ys(j));
                let scale = gm.norm().max(1.0);
                let e = (dot4(&sx, &sx) - gm[(0, 0)]).norm()
                    + (dot4(&sx, &sy) - gm[(0, 1)]).norm()
                    + (dot4(&sy, &sy) - gm[(1, 1)]).norm();
                worst = worst.max(e / scale);
            }
        }
        worst
    }
}

/// Global ambient isometry aligning two developments of the same data:
/// `phi_align sigma_1 = sigma_2`. Returns the isometry and the max
/// alignment residual over the grid.
pub fn align(dev1: &Development, dev2: &Development) -> Result<(Matrix4<Cx>, f64)> {
    if dev1.domain.len() != dev2.domain.len() {
        return Err(Error::Alignment("developments on different grids".into()));
    }
    let d = &dev1.domain;
    // any common point determines the isometry; use the grid center
    let (ic, jc) = (d.nx / 2, d.ny / 2);
    let p1 = &dev1.phi[d.idx(ic, jc)];
    let p2 = &dev2.phi[d.idx(ic, jc)];
    let q = retract_orthogonal4(&(p2 * p1.transpose()));
    let mut worst: f64 = 0.0;
    for k in 0..d.len() {
        worst = worst.max((q * dev1.sigma[k] - dev2.sigma[k]).norm());
    }
    Ok((q, worst))
}

/// Monodromy of the deck generator of a cylinder quotient.
pub struct Monodromy {
    pub generator: String,
    pub q: Matrix4<Cx>,
    /// SL2 pair with the nonnegative-trace sign convention.
    pub pair: (Matrix2<Cx>, Matrix2<Cx>),
    pub trace: Cx,
}

/// Develops the deck path `x0 -> x0 + L` at fixed `y` (the middle grid
/// row) and reports `Q = Phi(delta x0) Phi(x0)^{-1}` with its SL2 pair.
pub fn monodromy(data: &ImmersionData, gate: f64) -> Result<Monodromy> {
    let d = &data.domain;
    let Some(period) = d.deck_period else {
        return Err(Error::InvalidArgument(
            "monodromy needs a chart with a deck transform".into(),
        ));
    };
    let (_, gmax) = gauss_residual(data)?;
    let (_, cmax) = codazzi_residual(data)?;
    if gmax.max(cmax) > gate {
        return Err(Error::Gate {
            name: "gauss-codazzi".into(),
            value: gmax.max(cmax),
            threshold: gate,
        });
    }
    let yc = d.ys(d.ny / 2);
    let path: Vec<(f64, f64)> = (0..=d.nx)
        .map(|k| (d.x0 + period * k as f64 / d.nx as f64, yc))
        .collect();
    let q = integrate_path(&data.g, &data.psi, &path, &Matrix4::identity(), EDGE_SUBSTEPS)?;
    let q = retract_orthogonal4(&q);
    let pair = so4_to_sl2_pair(&q)?;
    Ok(Monodromy {
        generator: "deck".into(),
        q,
        pair,
        trace: pair.0.trace(),
    })
}

/// Pseudo-Riemannian (or generic) target of immersion data with real
/// structure, per the real/imaginary pattern of `(g, Psi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetClass {
    /// Riemannian `g`, real `Psi`.
    H3,
    /// Riemannian `g`, imaginary `Psi`.
    AdS3,
    /// Signature (1,1) `g`, imaginary `Psi`.
    NegDS3,
    /// Negative-definite `g`, imaginary `Psi`.
    NegS3,
    /// Genuinely complex data.
    GenericX3,
}

#[derive(Debug, Clone)]
pub struct TargetReport {
    pub class: TargetClass,
    /// True when some realness measure fell in the ambiguous band
    /// `[tol, 10 tol)`; no silent choice is made in that case.
    pub ambiguous: bool,
    pub g_imag: f64,
    pub psi_imag: f64,
    pub psi_real: f64,
}

/// Classifies the target space form of the data by sampling the grid.
pub fn classify_target(data: &ImmersionData, tol: f64) -> Result<TargetReport> {
    let d = &data.domain;
    let mut g_imag: f64 = 0.0;
    let mut psi_imag: f64 = 0.0;
    let mut psi_real: f64 = 0.0;
    for j in 0..d.ny {
        for i in 0..d.nx {
            let (x, y) = (d.xs(i), d.ys(j));
            let gm = data.g.at(x, y);
            let gs = gm.norm().max(1e-30);
            g_imag = g_imag.max(gm.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / gs);
            let pm = data.psi.at(x, y);
            psi_imag = psi_imag.max(pm.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
            psi_real = psi_real.max(pm.iter().map(|z| z.re.abs()).fold(0.0, f64::max));
        }
    }
    let band = |m: f64| m >= tol && m < 10.0 * tol;
    let ambiguous = band(g_imag) || band(psi_imag) || band(psi_real);
    let g_real = g_imag < tol;
    // Psi ~ 0 counts as real
    let psi_is_real = psi_imag < tol;
    let psi_is_imag = psi_real < tol;
    let class = if !g_real || !(psi_is_real || psi_is_imag) {
        TargetClass::GenericX3
    } else if psi_is_real && !psi_is_imag {
        if sampled_kind(data)? == MetricKind::Riemannian {
            TargetClass::H3
        } else {
            TargetClass::GenericX3
        }
    } else {
        // imaginary (or zero) Psi
        match sampled_kind(data)? {
            MetricKind::Riemannian => {
                if psi_is_real {
                    TargetClass::H3
                } else {
                    TargetClass::AdS3
                }
            }
            MetricKind::RealIndefinite => TargetClass::NegDS3,
            MetricKind::NegativeDefinite => TargetClass::NegS3,
            MetricKind::Generic => TargetClass::GenericX3,
        }
    };
    Ok(TargetReport {
        class,
        ambiguous,
        g_imag,
        psi_imag,
        psi_real,
    })
}

fn sampled_kind(data: &ImmersionData) -> Result<MetricKind> {
    let d = &data.domain;
    classify(&data.g, d.xs(d.nx / 2), d.ys(d.ny / 2)).map(|c| c.kind)
}

/// The complex metric `g = h((id + i J psi) ., (id + i J psi) .)` pulled
/// back from a surface in hyperbolic 3-space with first fundamental
/// form `h` and shape operator `psi`. Degenerate exactly where the
/// curvature of `h` vanishes.
pub fn h3_to_g_metric(h: &MetricField, psi: &ShapeField, orientation: i8) -> MetricField {
    let hf = h.clone();
    let pf = psi.clone();
    MetricField::from_fn(
        "h3-to-g",
        Arc::new(move |x, y| {
            let hm = hf.at(x, y);
            let pm = pf.at(x, y);
            match bicomplex(&hf, x, y, orientation) {
                Ok(j) => {
                    let c = Matrix2::identity() + (j * pm).map(|e| e * I);
                    let g = c.transpose() * hm * c;
                    (g + g.transpose()).map(|e| e * cx(0.5, 0.0))
                }
                Err(_) => Matrix2::from_element(cx(f64::NAN, f64::NAN)),
            }
        }),
    )
}

/// Grid points where a metric is numerically degenerate.
pub fn degenerate_points(g: &MetricField, domain: &ChartDomain, tol: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let (x, y) = (domain.xs(i), domain.ys(j));
            if g.nondegeneracy_at(x, y) < tol {
                out.push((x, y));
            }
        }
    }
    out
}

/// A codimension-zero development: curvature -1 data with `Psi = 0`,
/// rotated so the constant normal is `(0, 0, 1, 0)` and the image lies
/// in the slice `{z3 = 0}`, identified with `X_2`, together with the
/// continuity-tracked geodesic-endpoint pair of each image point.
pub struct CodimZero {
    pub dev: Development,
    /// Max drift of the ambient normal across the grid.
    pub normal_drift: f64,
    /// Max `|z3|` after rotating the normal to the slice axis.
    pub slice_defect: f64,
    /// `X_2` coordinates `(z1, z2, z4)` per grid point.
    pub slice_points: Vec<[Cx; 3]>,
    /// Affine geodesic-endpoint pair per grid point.
    pub f_pair: Vec<(Cx, Cx)>,
}

/// Curvature gate, development with `Psi = 0`, slice rotation, and
/// endpoint-pair extraction.
pub fn develop_codim0(
    g: &MetricField,
    domain: &ChartDomain,
    basepoint: (usize, usize),
    curvature_gate: f64,
) -> Result<CodimZero> {
    // K = -1 gate
    let (hx, hy) = (domain.hx(), domain.hy());
    let mut kmax: f64 = 0.0;
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let k = curvature_at(g, domain.xs(i), domain.ys(j), hx, hy)?;
            kmax = kmax.max((k + ONE).norm());
        }
    }
    if kmax > curvature_gate {
        return Err(Error::Gate {
            name: "curvature-minus-one".into(),
            value: kmax,
            threshold: curvature_gate,
        });
    }
    let data = ImmersionData::new(domain.clone(), g.clone(), ShapeField::zero())?;
    let dev = develop(&data, basepoint, None, GC_GATE.max(10.0 * kmax))?;

    let nu0 = dev.normal(basepoint.0, basepoint.1);
    let mut normal_drift: f64 = 0.0;
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            normal_drift = normal_drift.max((dev.normal(i, j) - nu0).norm());
        }
    }

    // complex-orthogonal rotation sending nu0 to (0, 0, 1, 0)
    let form = CBilinearForm::identity(4);
    let seeds: Vec<DVector<Cx>> = vec![
        DVector::from_iterator(4, nu0.iter().cloned()),
        DVector::from_row_slice(&[ONE, ZERO, ZERO, ZERO]),
        DVector::from_row_slice(&[ZERO, ONE, ZERO, ZERO]),
        DVector::from_row_slice(&[ZERO, ZERO, ZERO, ONE]),
    ];
    let mut branch = SqrtBranch::Near(ONE);
    let basis = gram_schmidt(&form, &seeds, &mut branch, 1e-9)?;
    let mut s = Matrix4::<Cx>::zeros();
    for (col, vec) in [(2usize, &basis[0]), (0, &basis[1]), (1, &basis[2]), (3, &basis[3])] {
        for r in 0..4 {
            s[(r, col)] = vec[r];
        }
    }
    let rot = s.transpose();

    let mut slice_defect: f64 = 0.0;
    let mut slice_points = Vec::with_capacity(domain.len());
    for sig in &dev.sigma {
        let w = rot * sig;
        slice_defect = slice_defect.max(w[2].norm());
        slice_points.push([w[0], w[1], w[3]]);
    }

    let f_pair = endpoint_pairs(domain, &slice_points, basepoint)?;
    Ok(CodimZero {
        dev,
        normal_drift,
        slice_defect,
        slice_points,
        f_pair,
    })
}

/// Inverts the 2:1 covering of the geodesic space locally: the two
/// parameters `t` with `<veronese(t), w> = 0`, tracked continuously
/// from the basepoint outward (row-major with neighbor matching).
fn endpoint_pairs(
    domain: &ChartDomain,
    slice_points: &[[Cx; 3]],
    basepoint: (usize, usize),
) -> Result<Vec<(Cx, Cx)>> {
    let roots_of = |w: &[Cx; 3]| -> Result<(Cx, Cx)> {
        // (i w1 + w3) t^2 + 2 w2 t + (i w1 - w3) = 0
        let a = I * w[0] + w[2];
        let b = w[1];
        let c = I * w[0] - w[2];
        let scale = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if a.norm() < 1e-10 * scale {
            return Err(Error::Singular(
                "geodesic endpoint at infinity in this chart".into(),
            ));
        }
        let disc = (b * b - a * c).sqrt();
        Ok(((-b + disc) / a, (-b - disc) / a))
    };
    let d = domain;
    let mut out = vec![(ZERO, ZERO); d.len()];
    let mut seen = vec![false; d.len()];
    let order = tree_order(d, basepoint);
    for (idx, parent) in order {
        let mut pair = roots_of(&slice_points[idx])?;
        if let Some(p) = parent {
            debug_assert!(seen[p]);
            let reference = out[p];
            let direct = (pair.0 - reference.0).norm() + (pair.1 - reference.1).norm();
            let swapped = (pair.1 - reference.0).norm() + (pair.0 - reference.1).norm();
            if swapped < direct {
                pair = (pair.1, pair.0);
            }
        }
        out[idx] = pair;
        seen[idx] = true;
    }
    Ok(out)
}

/// Visit order of the development tree: basepoint column, then rows,
/// each entry with its parent index.
fn tree_order(d: &ChartDomain, basepoint: (usize, usize)) -> Vec<(usize, Option<usize>)> {
    let (i0, j0) = basepoint;
    let mut order = vec![(d.idx(i0, j0), None)];
    for j in (j0 + 1)..d.ny {
        order.push((d.idx(i0, j), Some(d.idx(i0, j - 1))));
    }
    for j in (0..j0).rev() {
        order.push((d.idx(i0, j), Some(d.idx(i0, j + 1))));
    }
    for j in 0..d.ny {
        for i in (i0 + 1)..d.nx {
            order.push((d.idx(i, j), Some(d.idx(i - 1, j))));
        }
        for i in (0..i0).rev() {
            order.push((d.idx(i, j), Some(d.idx(i + 1, j))));
        }
    }
    order
}

/// Real hyperboloid coordinates of a point of the real `H^3` slice of
/// `X_3` (first three coordinates real, last imaginary).
pub fn x3_real_point(z: &Vector4<Cx>) -> Result<Vector4<f64>> {
    let defect = z[0].im.abs().max(z[1].im.abs()).max(z[2].im.abs()).max(z[3].re.abs());
    if defect > 1e-6 {
        return Err(Error::Data(format!(
            "point is not on the real H^3 slice (defect {defect:.3e})"
        )));
    }
    let x = Vector4::new(z[0].re, z[1].re, z[2].re, z[3].im);
    if x[3] <= 0.0 {
        return Err(Error::Data("point on the lower hyperboloid sheet".into()));
    }
    Ok(x)
}

/// Hyperboloid to upper half-space, through the Poincare ball.
pub fn hyperboloid_to_half_space(x: &Vector4<f64>) -> H3Point {
    let b = [x[0] / (1.0 + x[3]), x[1] / (1.0 + x[3]), x[2] / (1.0 + x[3])];
    // inversion sending the ball to {third coordinate > 0}
    let shifted = [b[0], b[1], b[2] + 1.0];
    let n2 = shifted.iter().map(|t| t * t).sum::<f64>();
    let p = [
        2.0 * shifted[0] / n2,
        2.0 * shifted[1] / n2,
        2.0 * shifted[2] / n2 - 1.0,
    ];
    H3Point {
        z: cx(p[0], p[1]),
        t: p[2],
    }
}

/// Geodesic-endpoint maps `(f_plus, f_minus)` of a developed surface in
/// the real `H^3` slice: the boundary endpoints of the normal rays.
pub fn h3_endpoint_maps(dev: &Development) -> Result<Vec<(ProjP1, ProjP1)>> {
    let d = &dev.domain;
    let eps = 1e-6;
    let mut out = Vec::with_capacity(d.len());
    for j in 0..d.ny {
        for i in 0..d.nx {
            let x = x3_real_point(&dev.sigma[d.idx(i, j)])?;
            let nu_c = dev.normal(i, j);
            let defect = nu_c[0].im.abs().max(nu_c[1].im.abs()).max(nu_c[2].im.abs()).max(nu_c[3].re.abs());
            if defect > 1e-6 {
                return Err(Error::Data(format!(
                    "normal is not tangent to the real slice (defect {defect:.3e})"
                )));
            }
            let nu = Vector4::new(nu_c[0].re, nu_c[1].re, nu_c[2].re, nu_c[3].im);
            // push the normal into half-space coordinates by a finite step
            let p = hyperboloid_to_half_space(&x);
            let stepped = x + nu.map(|t| t * eps);
            // renormalize onto the hyperboloid
            let q = stepped[0] * stepped[0] + stepped[1] * stepped[1] + stepped[2] * stepped[2]
                - stepped[3] * stepped[3];
            let stepped = stepped.map(|t| t / (-q).sqrt());
            let p_eps = hyperboloid_to_half_space(&stepped);
            let vz = (p_eps.z - p.z) / cx(eps, 0.0);
            let vt = (p_eps.t - p.t) / eps;
            let norm = (vz.norm_sqr() + vt * vt).sqrt() / p.t;
            let v = H3Tangent {
                vz: vz / cx(norm, 0.0),
                vt: vt / norm,
            };
            let fp = h3_ray_endpoint(p, v, 1.0)?;
            let fm = h3_ray_endpoint(p, v, -1.0)?;
            out.push((fp, fm));
        }
    }
    Ok(out)
}

/// Finite-difference pull-back of the geodesic-space metric
/// `-4/(z1 - z2)^2 dz1 dz2` under the endpoint maps, per interior grid
/// point (zero off the interior).
pub fn endpoint_pullback(dev: &Development) -> Result<Vec<Matrix2<Cx>>> {
    let maps = h3_endpoint_maps(dev)?;
    let d = &dev.domain;
    let (hx, hy) = (d.hx(), d.hy());
    // the metric is Moebius-invariant; work in a chart whose point at
    // infinity stays clear of both endpoint fields
    let candidates = [
        cx(0.0, 2.0),
        cx(0.0, -2.0),
        cx(3.0, 0.0),
        cx(-3.0, 0.0),
        cx(2.0, 2.0),
        cx(-2.0, 2.0),
        cx(2.0, -2.0),
        cx(-2.0, -2.0),
    ];
    let mut best = candidates[0];
    let mut best_d = -1.0;
    for c in candidates {
        let pc = ProjP1::from_affine(c);
        let sep = maps
            .iter()
            .map(|(p, m)| p.chordal_dist(&pc).min(m.chordal_dist(&pc)))
            .fold(f64::INFINITY, f64::min);
        if sep > best_d {
            best_d = sep;
            best = c;
        }
    }
    if best_d < 1e-3 {
        return Err(Error::Resolution(
            "endpoint fields crowd every candidate chart point".into(),
        ));
    }
    let chart = Mobius::new(Matrix2::new(ZERO, ONE, ONE, -best))?;
    let affine: Vec<(Cx, Cx)> = maps
        .iter()
        .map(|(p, m)| {
            let (Some(a), Some(b)) = (chart.apply(p).to_affine(), chart.apply(m).to_affine())
            else {
                return Err(Error::Singular("endpoint at infinity in this chart".into()));
            };
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Matrix2::from_element(ZERO); d.len()];
    for j in 1..d.ny - 1 {
        for i in 1..d.nx - 1 {
            let (fp, fm) = affine[d.idx(i, j)];
            let dxp = (affine[d.idx(i + 1, j)].0 - affine[d.idx(i - 1, j)].0) / cx(2.0 * hx, 0.0);
            let dxm = (affine[d.idx(i + 1, j)].1 - affine[d.idx(i - 1, j)].1) / cx(2.0 * hx, 0.0);
            let dyp = (affine[d.idx(i, j + 1)].0 - affine[d.idx(i, j - 1)].0) / cx(2.0 * hy, 0.0);
            let dym = (affine[d.idx(i, j + 1)].1 - affine[d.idx(i, j - 1)].1) / cx(2.0 * hy, 0.0);
            let coeff = cx(-4.0, 0.0) / ((fp - fm) * (fp - fm));
            let g11 = coeff * dxp * dxm;
            let g12 = coeff * (dxp * dym + dyp * dxm) * cx(0.5, 0.0);
            let g22 = coeff * dyp * dym;
            out[d.idx(i, j)] = Matrix2::new(g11, g12, g12, g22);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calg::expm4;

    // Gauss residuals on these coarse grids carry O(h^2) stencil error
    const TEST_GATE: f64 = 5e-3;

    fn hyp_domain(n: usize) -> ChartDomain {
        ChartDomain::new((0.0, 0.5), (1.0, 1.5), n, n).unwrap()
    }

    fn hyp_data(n: usize, psi: ShapeField) -> ImmersionData {
        ImmersionData::new(hyp_domain(n), MetricField::hyperbolic_plane(), psi).unwrap()
    }

    #[test]
    fn codazzi_vanishes_for_constant_scalar_shape() {
        let data = hyp_data(12, ShapeField::scalar(cx(0.4, 0.1)));
        let (_, max) = codazzi_residual(&data).unwrap();
        assert!(max < 1e-10, "max {max}");
    }

    #[test]
    fn codazzi_detects_coordinate_dependent_shape() {
        // Psi = diag(x, 0) is self-adjoint for the conformal metric but
        // not Codazzi
        let psi = ShapeField::from_fn(Arc::new(|x, _| {
            Matrix2::new(cx(x, 0.0), ZERO, ZERO, ZERO)
        }));
        let data = hyp_data(12, psi);
        let (_, max) = codazzi_residual(&data).unwrap();
        assert!(max > 0.1, "max {max}");
    }

    #[test]
    fn gauss_residual_values() {
        let data = hyp_data(12, ShapeField::zero());
        let (_, max) = gauss_residual(&data).unwrap();
        assert!(max < 5e-3, "max {max}");
        // (hyperbolic, Psi = id): K - det Psi + 1 = -1
        let data = hyp_data(12, ShapeField::scalar(ONE));
        let (field, _) = gauss_residual(&data).unwrap();
        for r in &field {
            assert!((r + ONE).norm() < 5e-3, "residual {r}");
        }
    }

    #[test]
    fn omega_matches_hand_computation() {
        // hyperbolic plane, Psi = 0, frame (y dx, y dy):
        // theta^1_2 = -dx/y, theta^i columns = (dx/y, dy/y)
        let g = MetricField::hyperbolic_plane();
        let psi = ShapeField::zero();
        let (wx, wy, _) = omega_at(&g, &psi, 0.2, 2.0, None).unwrap();
        let y = 2.0;
        let mut ex = Matrix4::from_element(ZERO);
        ex[(0, 1)] = cx(-1.0 / y, 0.0);
        ex[(1, 0)] = cx(1.0 / y, 0.0);
        ex[(0, 3)] = -I / cx(y, 0.0);
        ex[(3, 0)] = I / cx(y, 0.0);
        assert!((wx - ex).norm() < 1e-12, "wx = {wx}");
        let mut ey = Matrix4::from_element(ZERO);
        ey[(1, 3)] = -I / cx(y, 0.0);
        ey[(3, 1)] = I / cx(y, 0.0);
        assert!((wy - ey).norm() < 1e-12, "wy = {wy}");
    }

    #[test]
    fn omega_is_skew() {
        let g = MetricField::hyperbolic_plane();
        let psi = ShapeField::scalar(cx(0.3, -0.2));
        let (wx, wy, _) = omega_at(&g, &psi, 0.1, 1.4, None).unwrap();
        assert!(crate::calg::skew_defect4(&wx) < 1e-13);
        assert!(crate::calg::skew_defect4(&wy) < 1e-13);
    }

    #[test]
    fn flatness_small_for_valid_data_and_large_for_invalid() {
        let data = hyp_data(16, ShapeField::zero());
        let omega = assemble_omega(&data).unwrap();
        let (_, small) = flatness_residual(&omega);
        let refined = ImmersionData::new(
            data.domain.refined(),
            data.g.clone(),
            data.psi.clone(),
        )
        .unwrap();
        let (_, smaller) = flatness_residual(&assemble_omega(&refined).unwrap());
        let ratio = small / smaller;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");

        let bad = hyp_data(16, ShapeField::scalar(ONE));
        let (_, large) = flatness_residual(&assemble_omega(&bad).unwrap());
        assert!(large > 0.5, "invalid data residual {large}");
        let bad_fine = ImmersionData::new(bad.domain.refined(), bad.g.clone(), bad.psi.clone()).unwrap();
        let (_, large2) = flatness_residual(&assemble_omega(&bad_fine).unwrap());
        assert!(large2 > 0.5, "refined invalid residual {large2}");
    }

    #[test]
    fn integrate_zero_omega_is_identity() {
        let g = MetricField::euclidean();
        let psi = ShapeField::zero();
        let start = Matrix4::identity();
        let out = integrate_path(&g, &psi, &[(0.0, 0.0), (1.0, 0.3)], &start, 32).unwrap();
        // flat plane has omega with only theta-columns; compare against
        // the constant-coefficient exponential
        let (wx, wy, _) = omega_at(&g, &psi, 0.0, 0.0, None).unwrap();
        let a = wx + wy.map(|e| e * cx(0.3, 0.0));
        let expected = expm4(&a);
        assert!((out - expected).norm() < 1e-7, "diff {}", (out - expected).norm());
    }

    #[test]
    fn path_independence_on_simply_connected_chart() {
        let data = hyp_data(8, ShapeField::zero());
        let a = integrate_path(
            &data.g,
            &data.psi,
            &[(0.0, 1.0), (0.5, 1.0), (0.5, 1.5)],
            &Matrix4::identity(),
            64,
        )
        .unwrap();
        let b = integrate_path(
            &data.g,
            &data.psi,
            &[(0.0, 1.0), (0.0, 1.5), (0.5, 1.5)],
            &Matrix4::identity(),
            64,
        )
        .unwrap();
        assert!((a - b).norm() < 1e-7, "diff {}", (a - b).norm());
    }

    #[test]
    fn develop_is_isometric_and_on_quadric() {
        let data = hyp_data(24, ShapeField::zero());
        let dev = develop(&data, (12, 12), None, TEST_GATE).unwrap();
        assert!(dev.quadric_defect() < 1e-9);
        assert!(dev.transport_defect() < 1e-9);
        let e = dev.pull_back_defect(&data.g);
        assert!(e < 3e-3, "pull-back error {e}");
    }

    #[test]
    fn develop_gate_rejects_invalid_data() {
        let data = hyp_data(12, ShapeField::scalar(ONE));
        assert!(matches!(
            develop(&data, (6, 6), None, TEST_GATE),
            Err(Error::Gate { .. })
        ));
    }

    #[test]
    fn align_recovers_global_isometry() {
        let data = hyp_data(12, ShapeField::zero());
        let dev1 = develop(&data, (6, 6), None, TEST_GATE).unwrap();
        // rotate the initial condition by a fixed complex-orthogonal
        let m = Matrix4::from_fn(|r, c| cx(0.1 * (r as f64 - c as f64), 0.03 * (r * c) as f64));
        let skew = (m - m.transpose()).map(|e| e * cx(0.5, 0.0));
        let q = expm4(&skew);
        let dev2 = develop(&data, (6, 6), Some(q), TEST_GATE).unwrap();
        let (phi, res) = align(&dev1, &dev2).unwrap();
        assert!((phi - q).norm() < 1e-7, "recovered {}", (phi - q).norm());
        assert!(res < 1e-7, "residual {res}");
    }

    #[test]
    fn align_from_different_basepoints() {
        let data = hyp_data(12, ShapeField::zero());
        let dev1 = develop(&data, (2, 3), None, TEST_GATE).unwrap();
        let dev2 = develop(&data, (9, 8), None, TEST_GATE).unwrap();
        let (phi, res) = align(&dev1, &dev2).unwrap();
        assert!(orthogonality_defect4(&phi) < 1e-8);
        assert!(res < 1e-6, "residual {res}");
    }

    #[test]
    fn distinct_shape_fields_do_not_align() {
        let d1 = hyp_data(12, ShapeField::zero());
        // valid curvature for psi = 0.3 id: K = -1 + 0.09
        let scale = 1.0 / (1.0 - 0.09);
        let g2 = MetricField::hyperbolic_plane().scaled(cx(scale, 0.0));
        let d2 = ImmersionData::new(hyp_domain(12), g2, ShapeField::scalar(cx(0.3, 0.0))).unwrap();
        let dev1 = develop(&d1, (6, 6), None, TEST_GATE).unwrap();
        let dev2 = develop(&d2, (6, 6), None, TEST_GATE).unwrap();
        let (_, res) = align(&dev1, &dev2).unwrap();
        assert!(res > 1e-2, "residual {res}");
    }

    #[test]
    fn monodromy_of_hyperbolic_cylinder() {
        let ell = 1.5;
        let domain = ChartDomain::new((0.0, ell), (-0.2, 0.2), 64, 32)
            .unwrap()
            .with_periodic_x()
            .with_deck();
        let data = ImmersionData::new(domain, MetricField::hyperbolic_cylinder(), ShapeField::zero())
            .unwrap();
        let m = monodromy(&data, 1e-3).unwrap();
        let expected = 2.0 * (ell / 2.0f64).cosh();
        assert!(
            (m.trace.norm() - expected).abs() < 1e-4,
            "trace {} expected {expected}",
            m.trace
        );
        // reconstruction contract of the SL2 pair
        let q2 = crate::spaceforms::sl2_pair_to_so4(&m.pair.0, &m.pair.1).unwrap();
        assert!((q2 - m.q).norm() < 1e-8);
    }

    #[test]
    fn classify_target_rows() {
        let h3 = hyp_data(8, ShapeField::scalar(cx(0.3, 0.0)));
        assert_eq!(classify_target(&h3, 1e-8).unwrap().class, TargetClass::H3);

        let ads = hyp_data(8, ShapeField::scalar(cx(0.0, 0.4)));
        assert_eq!(classify_target(&ads, 1e-8).unwrap().class, TargetClass::AdS3);

        let ds = ImmersionData::new(
            hyp_domain(8),
            MetricField::minkowski(),
            ShapeField::scalar(cx(0.0, 0.4)),
        )
        .unwrap();
        assert_eq!(classify_target(&ds, 1e-8).unwrap().class, TargetClass::NegDS3);

        let s3 = ImmersionData::new(
            hyp_domain(8),
            MetricField::neg_euclidean(),
            ShapeField::scalar(cx(0.0, 0.4)),
        )
        .unwrap();
        assert_eq!(classify_target(&s3, 1e-8).unwrap().class, TargetClass::NegS3);

        let generic = ImmersionData::new(
            hyp_domain(8),
            MetricField::hyperbolic_plane().scaled(cx(1.0, 0.3)),
            ShapeField::zero(),
        )
        .unwrap();
        assert_eq!(
            classify_target(&generic, 1e-8).unwrap().class,
            TargetClass::GenericX3
        );
    }

    #[test]
    fn h3_to_g_identity_for_totally_geodesic() {
        let h = MetricField::hyperbolic_plane();
        let g = h3_to_g_metric(&h, &ShapeField::zero(), 1);
        let a = g.at(0.2, 1.3);
        let b = h.at(0.2, 1.3);
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn h3_to_g_umbilic_determinant() {
        // equal shape eigenvalues lambda: det g = (1 - lambda^2)^2 h-det
        let h = MetricField::hyperbolic_plane();
        let lam = 0.4;
        let g = h3_to_g_metric(&h, &ShapeField::scalar(cx(lam, 0.0)), 1);
        let ratio = g.det_at(0.2, 1.3) / h.det_at(0.2, 1.3);
        let expected = cx((1.0 - lam * lam) * (1.0 - lam * lam), 0.0);
        assert!((ratio - expected).norm() < 1e-10, "ratio {ratio}");
    }

    #[test]
    fn develop_codim0_constant_normal_and_conjugate_pair() {
        let domain = ChartDomain::new((0.0, 0.4), (1.0, 1.4), 16, 16).unwrap();
        let g = MetricField::hyperbolic_plane();
        let out = develop_codim0(&g, &domain, (8, 8), TEST_GATE).unwrap();
        assert!(out.normal_drift < 1e-6, "drift {}", out.normal_drift);
        assert!(out.slice_defect < 1e-6, "slice {}", out.slice_defect);
        // real hyperbolic data: endpoints complex-conjugate up to a
        // Moebius map; fit it from three points and check globally
        let d = &out.dev.domain;
        let pick = [(2usize, 2usize), (8, 4), (13, 11)];
        let src: Vec<Cx> = pick.iter().map(|&(i, j)| out.f_pair[d.idx(i, j)].0.conj()).collect();
        let dst: Vec<Cx> = pick.iter().map(|&(i, j)| out.f_pair[d.idx(i, j)].1).collect();
        let m = crate::spaceforms::Mobius::from_three_points(
            [src[0], src[1], src[2]],
            [dst[0], dst[1], dst[2]],
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..d.ny {
            for i in 0..d.nx {
                let (f1, f2) = out.f_pair[d.idx(i, j)];
                let image = m.apply_affine(f1.conj());
                worst = worst.max(image.chordal_dist(&ProjP1::from_affine(f2)));
            }
        }
        assert!(worst < 1e-5, "conjugacy defect {worst}");
    }

    #[test]
    fn endpoint_maps_on_totally_geodesic_patch() {
        let domain = ChartDomain::new((0.0, 0.4), (1.0, 1.4), 12, 12).unwrap();
        let g = MetricField::hyperbolic_plane();
        let data = ImmersionData::new(domain.clone(), g.clone(), ShapeField::zero()).unwrap();
        let dev = develop(&data, (6, 6), None, TEST_GATE).unwrap();
        let pb = endpoint_pullback(&dev).unwrap();
        // closed form: psi = 0 gives the metric itself
        let mut worst: f64 = 0.0;
        for j in 1..domain.ny - 1 {
            for i in 1..domain.nx - 1 {
                let expected = g.at(domain.xs(i), domain.ys(j));
                let e = (pb[domain.idx(i, j)] - expected).norm() / expected.norm();
                worst = worst.max(e);
            }
        }
        assert!(worst < 5e-3, "pull-back defect {worst}");
    }
}
