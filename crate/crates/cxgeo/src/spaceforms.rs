//! Quadric model spaces `X_n = { z in C^{n+1} | z^T z = -1 }` and their
//! explicit low-dimensional models.
//!
//! Provides the closed-form exponential map and its ODE cross-check, the
//! `C^*` model of `X_1`, the geodesic-space model `G = CP^1 x CP^1 \ diag`
//! of `X_2` (Veronese embedding, 2:1 covering, metric coefficient), the
//! `SL(2,C)` model of `X_3` (the linear isometry `F`, the `SL2 x SL2`
//! action and its `SO(4,C)` matrix), pseudo-Riemannian sub-space-form
//! embeddings, and closed-form half-space geodesic endpoints in `H^3`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SVector, Vector4};

use crate::calg::{cx, Cx, I, ONE, ZERO};
use crate::{Error, Result};

pub const QUADRIC_TOL: f64 = 1e-9;
pub const TANGENT_TOL: f64 = 1e-9;
pub const ORTHO_TOL: f64 = 1e-8;
pub const PROJ_EQ_TOL: f64 = 1e-10;

/// Plain bilinear inner product `u^T v` (no conjugation).
pub fn dot(u: &DVector<Cx>, v: &DVector<Cx>) -> Cx {
    u.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

/// A point on the quadric `X_n`, stored in model coordinates in `C^{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct XPoint {
    z: DVector<Cx>,
}

impl XPoint {
    pub fn new(z: DVector<Cx>) -> Result<Self> {
        let res = (dot(&z, &z) + ONE).norm();
        if res > QUADRIC_TOL {
            return Err(Error::InvalidArgument(format!(
                "point violates the quadric constraint (residual {res:.3e})"
            )));
        }
        Ok(Self { z })
    }

    /// Base point `e = (0, ..., 0, i)` of `X_n`.
    pub fn basepoint(n: usize) -> Self {
        let mut z = DVector::from_element(n + 1, ZERO);
        z[n] = I;
        Self { z }
    }

    pub fn coords(&self) -> &DVector<Cx> {
        &self.z
    }

    /// Complex dimension `n` of the ambient quadric.
    pub fn dim(&self) -> usize {
        self.z.len() - 1
    }

    pub fn quadric_residual(&self) -> f64 {
        (dot(&self.z, &self.z) + ONE).norm()
    }
}

/// A tangent vector `v` at a point of `X_n` (`<p, v> = 0`).
#[derive(Debug, Clone)]
pub struct XTangent {
    base: XPoint,
    v: DVector<Cx>,
}

impl XTangent {
    pub fn new(base: XPoint, v: DVector<Cx>) -> Result<Self> {
        if v.len() != base.coords().len() {
            return Err(Error::Dimension {
                expected: base.coords().len(),
                got: v.len(),
            });
        }
        let defect = dot(base.coords(), &v).norm();
        if defect > TANGENT_TOL * v.norm().max(1.0) {
            return Err(Error::NotTangent { defect });
        }
        Ok(Self { base, v })
    }

    pub fn base(&self) -> &XPoint {
        &self.base
    }

    pub fn vector(&self) -> &DVector<Cx> {
        &self.v
    }

    /// Squared speed `<v, v>` (complex).
    pub fn speed_sq(&self) -> Cx {
        dot(&self.v, &self.v)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            base: self.base.clone(),
            v: self.v.map(|e| e * cx(t, 0.0)),
        }
    }
}

/// Entire functions `cosh(sqrt(w))` and `sinh(sqrt(w))/sqrt(w)`, stable
/// through `w = 0` (series there), independent of the root branch.
fn cosh_sinhc_of_sq(w: Cx) -> (Cx, Cx) {
    if w.norm() < 1e-12 {
        let c = ONE + w / cx(2.0, 0.0) + w * w / cx(24.0, 0.0);
        let s = ONE + w / cx(6.0, 0.0) + w * w / cx(120.0, 0.0);
        (c, s)
    } else {
        let r = w.sqrt();
        (r.cosh(), r.sinh() / r)
    }
}

/// Exponential map of `X_n`:
/// `exp_p(v) = cosh(sqrt(<v,v>)) p + sinh(sqrt(<v,v>))/sqrt(<v,v>) v`,
/// and `p + v` on isotropic directions. Branch independent.
pub fn x_exp(v: &XTangent) -> Result<XPoint> {
    let w = v.speed_sq();
    if w == ZERO {
        // exact isotropic branch
        return XPoint::new(v.base().coords() + v.vector());
    }
    let (c, s) = cosh_sinhc_of_sq(w);
    XPoint::new(v.base().coords().map(|e| e * c) + v.vector().map(|e| e * s))
}

/// RK4 integration of the geodesic equation
/// `gamma'' = <gamma', gamma'> gamma` from `(p, v)` to time `t`.
///
/// Independent route to [`x_exp`]; agrees with it to `O(steps^-4)`.
pub fn x_geodesic_ode(v: &XTangent, t: f64, steps: usize) -> Result<XPoint> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    let h = t / steps as f64;
    let mut pos = v.base().coords().clone();
    let mut vel = v.vector().clone();
    let accel = |p: &DVector<Cx>, q: &DVector<Cx>| -> DVector<Cx> {
        let s = dot(q, q);
        p.map(|e| e * s)
    };
    for _ in 0..steps {
        let k1p = vel.clone();
        let k1v = accel(&pos, &vel);
        let p2 = &pos + k1p.map(|e| e * cx(h / 2.0, 0.0));
        let v2 = &vel + k1v.map(|e| e * cx(h / 2.0, 0.0));
        let k2p = v2.clone();
        let k2v = accel(&p2, &v2);
        let p3 = &pos + k2p.map(|e| e * cx(h / 2.0, 0.0));
        let v3 = &vel + k2v.map(|e| e * cx(h / 2.0, 0.0));
        let k3p = v3.clone();
        let k3v = accel(&p3, &v3);
        let p4 = &pos + k3p.map(|e| e * cx(h, 0.0));
        let v4 = &vel + k3v.map(|e| e * cx(h, 0.0));
        let k4p = v4.clone();
        let k4v = accel(&p4, &v4);
        pos += (k1p + k2p.map(|e| e * cx(2.0, 0.0)) + k3p.map(|e| e * cx(2.0, 0.0)) + k4p)
            .map(|e| e * cx(h / 6.0, 0.0));
        vel += (k1v + k2v.map(|e| e * cx(2.0, 0.0)) + k3v.map(|e| e * cx(2.0, 0.0)) + k4v)
            .map(|e| e * cx(h / 6.0, 0.0));
    }
    XPoint::new(pos)
}

/// Geodesics of `(C^*, dz^2/z^2)`: `t -> mu1 exp(t mu2)`.
pub fn x1_geodesic(mu1: Cx, mu2: Cx, t: f64) -> Result<Cx> {
    if mu1 == ZERO {
        return Err(Error::InvalidArgument("mu1 must be nonzero".into()));
    }
    Ok(mu1 * (mu2 * cx(t, 0.0)).exp())
}

/// A complex-orthogonal matrix (`Q^T Q = I`), the isometry group element
/// of the ambient quadric model.
#[derive(Debug, Clone)]
pub struct ComplexOrthogonal {
    q: DMatrix<Cx>,
}

impl ComplexOrthogonal {
    pub fn new(q: DMatrix<Cx>) -> Result<Self> {
        let defect = orthogonality_defect(&q);
        if defect > ORTHO_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not complex-orthogonal (defect {defect:.3e})"
            )));
        }
        Ok(Self { q })
    }

    pub fn matrix(&self) -> &DMatrix<Cx> {
        &self.q
    }

    pub fn determinant(&self) -> Cx {
        self.q.clone().determinant()
    }
}

pub fn orthogonality_defect(q: &DMatrix<Cx>) -> f64 {
    (q.transpose() * q - DMatrix::<Cx>::identity(q.nrows(), q.ncols())).norm()
}

pub fn orthogonality_defect4(q: &Matrix4<Cx>) -> f64 {
    (q.transpose() * q - Matrix4::<Cx>::identity()).norm()
}

/// Two Newton steps of the retraction `Q <- Q (3I - Q^T Q) / 2` toward
/// the complex-orthogonal group.
pub fn retract_orthogonal4(q: &Matrix4<Cx>) -> Matrix4<Cx> {
    let mut out = *q;
    for _ in 0..2 {
        let corr = Matrix4::<Cx>::identity().map(|e| e * cx(3.0, 0.0)) - out.transpose() * out;
        out = (out * corr).map(|e| e * cx(0.5, 0.0));
    }
    out
}

/// The linear isometry `F: (C^4, <.,.>_0) -> (Mat(2,C), <.,.>_Mat2)`,
/// `F(z) = [[-z1 - i z4, -z2 - i z3], [-z2 + i z3, z1 - i z4]]`.
///
/// Restricts to an isometry `X_3 -> SL(2,C)`.
pub fn f_iso(z: &Vector4<Cx>) -> Matrix2<Cx> {
    Matrix2::new(
        -z[0] - I * z[3],
        -z[1] - I * z[2],
        -z[1] + I * z[2],
        z[0] - I * z[3],
    )
}

/// Inverse of [`f_iso`].
pub fn f_iso_inv(m: &Matrix2<Cx>) -> Vector4<Cx> {
    let half = cx(0.5, 0.0);
    Vector4::new(
        (m[(1, 1)] - m[(0, 0)]) * half,
        -(m[(0, 1)] + m[(1, 0)]) * half,
        (m[(1, 0)] - m[(0, 1)]) * half * (-I),
        (m[(0, 0)] + m[(1, 1)]) * half * I,
    )
}

fn sl2_inverse(a: &Matrix2<Cx>) -> Matrix2<Cx> {
    // adjugate; exact inverse when det = 1
    Matrix2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)])
}

pub fn sl2_det_check(a: &Matrix2<Cx>, tol: f64) -> Result<()> {
    let d = (a.determinant() - ONE).norm();
    if d > tol {
        return Err(Error::InvalidArgument(format!(
            "matrix is not in SL(2,C) (|det - 1| = {d:.3e})"
        )));
    }
    Ok(())
}

/// The `SO(4,C)` matrix of the isometry `M -> A M B^{-1}` of `SL(2,C)`,
/// conjugated to `C^4` through [`f_iso`].
pub fn sl2_pair_to_so4(a: &Matrix2<Cx>, b: &Matrix2<Cx>) -> Result<Matrix4<Cx>> {
    sl2_det_check(a, 1e-9)?;
    sl2_det_check(b, 1e-9)?;
    let b_inv = sl2_inverse(b);
    let mut q = Matrix4::<Cx>::zeros();
    for k in 0..4 {
        let mut e = Vector4::from_element(ZERO);
        e[k] = ONE;
        let img = f_iso_inv(&(a * f_iso(&e) * b_inv));
        q.set_column(k, &img);
    }
    Ok(q)
}

/// Decomposes `Q` in `SO(4,C)` as the action of a pair `(A, B)` in
/// `SL(2,C) x SL(2,C)` with `sl2_pair_to_so4(A, B) = Q`.
///
/// The pair is defined up to a simultaneous sign; the returned
/// representative has `Re tr(A) >= 0` (ties broken by `Im tr(A) >= 0`).
pub fn so4_to_sl2_pair(q: &Matrix4<Cx>) -> Result<(Matrix2<Cx>, Matrix2<Cx>)> {
    if orthogonality_defect4(q) > ORTHO_TOL {
        return Err(Error::Decomposition(
            "input is not complex-orthogonal".into(),
        ));
    }
    // matrix of M -> F(Q F^{-1}(M)) in the row-major basis of Mat(2,C);
    // if Q is in the image this equals the Kronecker product A (x) B^{-T}
    let mut t = Matrix4::<Cx>::zeros();
    for k in 0..4 {
        let m = Matrix2::new(
            if k == 0 { ONE } else { ZERO },
            if k == 1 { ONE } else { ZERO },
            if k == 2 { ONE } else { ZERO },
            if k == 3 { ONE } else { ZERO },
        );
        let img = f_iso(&(q * f_iso_inv(&m)));
        t[(0, k)] = img[(0, 0)];
        t[(1, k)] = img[(0, 1)];
        t[(2, k)] = img[(1, 0)];
        t[(3, k)] = img[(1, 1)];
    }
    let block = |bi: usize, bj: usize| -> Matrix2<Cx> {
        Matrix2::new(
            t[(2 * bi, 2 * bj)],
            t[(2 * bi, 2 * bj + 1)],
            t[(2 * bi + 1, 2 * bj)],
            t[(2 * bi + 1, 2 * bj + 1)],
        )
    };
    // pick the strongest block a_ij * B^{-T} to read off B^{-T}
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for i in 0..2 {
        for j in 0..2 {
            let n = block(i, j).norm();
            if n > best {
                best = n;
                bi = i;
                bj = j;
            }
        }
    }
    let pivot = block(bi, bj);
    let a_pivot_sq = pivot.determinant();
    if a_pivot_sq.norm() < 1e-20 {
        return Err(Error::Decomposition("pivot block is singular".into()));
    }
    let a_pivot = a_pivot_sq.sqrt();
    let x = pivot.map(|e| e / a_pivot); // candidate B^{-T}, up to sign with the pivot entry
    let x_norm_sq: f64 = x.iter().map(|e| e.norm_sqr()).sum();
    let mut a_raw = Matrix2::<Cx>::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let blk = block(i, j);
            let coeff: Cx = blk
                .iter()
                .zip(x.iter())
                .map(|(b_e, x_e)| b_e * x_e.conj())
                .sum::<Cx>()
                / cx(x_norm_sq, 0.0);
            a_raw[(i, j)] = coeff;
        }
    }
    // split the free scalar so that det A = det B = 1
    let det_a = a_raw.determinant();
    if det_a.norm() < 1e-20 {
        return Err(Error::Decomposition("recovered factor is singular".into()));
    }
    let lambda = det_a.sqrt();
    let a = a_raw.map(|e| e / lambda);
    let x_scaled = x.map(|e| e * lambda);
    if (x_scaled.determinant() - ONE).norm() > 1e-6 {
        return Err(Error::Decomposition(
            "matrix is not in the image of the SL2 x SL2 action".into(),
        ));
    }
    // B^{-T} -> B
    let b = sl2_inverse(&x_scaled.transpose());
    let (a, b) = fix_pair_sign(a, b);
    let check = sl2_pair_to_so4(&a, &b)?;
    let err = (check - q).norm();
    if err > 1e-8 * q.norm().max(1.0) {
        return Err(Error::Decomposition(format!(
            "reconstruction residual {err:.3e}"
        )));
    }
    Ok((a, b))
}

/// Applies the simultaneous-sign convention: `Re tr(A) >= 0`, ties broken
/// by `Im tr(A) >= 0`.
pub fn fix_pair_sign(a: Matrix2<Cx>, b: Matrix2<Cx>) -> (Matrix2<Cx>, Matrix2<Cx>) {
    let tr = a.trace();
    let flip = if tr.re < -1e-12 {
        true
    } else if tr.re.abs() <= 1e-12 {
        tr.im < 0.0
    } else {
        false
    };
    if flip {
        (-a, -b)
    } else {
        (a, b)
    }
}

/// A point of complex projective space `CP^{D-1}`, stored as a
/// homogeneous vector normalized so its max-modulus entry is 1.
#[derive(Debug, Clone, Copy)]
pub struct ProjPoint<const D: usize> {
    v: SVector<Cx, D>,
}

pub type ProjP1 = ProjPoint<2>;
pub type ProjP2 = ProjPoint<3>;

impl<const D: usize> ProjPoint<D> {
    pub fn new(v: SVector<Cx, D>) -> Result<Self> {
        let (k, max) = v
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.norm()))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if max == 0.0 {
            return Err(Error::InvalidArgument(
                "zero homogeneous vector".to_string(),
            ));
        }
        let pivot = v[k];
        Ok(Self {
            v: v.map(|e| e / pivot),
        })
    }

    pub fn rep(&self) -> &SVector<Cx, D> {
        &self.v
    }

    /// Chordal (Fubini-Study) distance between lines, in `[0, 1]`.
    pub fn chordal_dist(&self, other: &Self) -> f64 {
        let nu: f64 = self.v.iter().map(|e| e.norm_sqr()).sum();
        let nv: f64 = other.v.iter().map(|e| e.norm_sqr()).sum();
        let h: Cx = self
            .v
            .iter()
            .zip(other.v.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        (1.0 - h.norm_sqr() / (nu * nv)).max(0.0).sqrt()
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.chordal_dist(other) < PROJ_EQ_TOL
    }
}

impl ProjP1 {
    pub fn from_affine(z: Cx) -> Self {
        Self::new(SVector::from([z, ONE])).expect("affine lift is nonzero")
    }

    pub fn infinity() -> Self {
        Self::new(SVector::from([ONE, ZERO])).expect("nonzero")
    }

    /// Affine coordinate `t1/t2`, or `None` at infinity.
    pub fn to_affine(&self) -> Option<Cx> {
        if self.v[1].norm() < 1e-14 {
            None
        } else {
            Some(self.v[0] / self.v[1])
        }
    }
}

/// An ordered pair of distinct points of `CP^1`: a point of the geodesic
/// space `G = CP^1 x CP^1 \ diag`.
#[derive(Debug, Clone, Copy)]
pub struct GPoint {
    pub p: ProjP1,
    pub q: ProjP1,
}

impl GPoint {
    pub fn new(p: ProjP1, q: ProjP1) -> Result<Self> {
        if p.chordal_dist(&q) <= PROJ_EQ_TOL {
            return Err(Error::InvalidArgument(
                "the two endpoints must be distinct".into(),
            ));
        }
        Ok(Self { p, q })
    }
}

/// Adapted Veronese embedding `CP^1 -> Q subset CP^2`:
/// `(t1 : t2) -> (i(t1^2 + t2^2) : 2 t1 t2 : t1^2 - t2^2)`.
pub fn veronese(t: &ProjP1) -> ProjP2 {
    let (t1, t2) = (t.rep()[0], t.rep()[1]);
    ProjP2::new(SVector::from([
        I * (t1 * t1 + t2 * t2),
        cx(2.0, 0.0) * t1 * t2,
        t1 * t1 - t2 * t2,
    ]))
    .expect("veronese image of a projective point is nonzero")
}

fn cross3(u: &SVector<Cx, 3>, v: &SVector<Cx, 3>) -> SVector<Cx, 3> {
    SVector::from([
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ])
}

/// The 2-sheeted covering `u(p, q) = [v(p) x v(q)]` of the projective
/// quadric complement; the image never lies on the conic
/// `z1^2 + z2^2 + z3^2 = 0`.
pub fn g_cover(g: &GPoint) -> Result<ProjP2> {
    let vp = veronese(&g.p);
    let vq = veronese(&g.q);
    ProjP2::new(cross3(vp.rep(), vq.rep()))
}

/// Local coefficient of the `G` metric: `-4 / (z1 - z2)^2` on the
/// product affine chart.
pub fn g_metric_coeff(z1: Cx, z2: Cx) -> Result<Cx> {
    let d = z1 - z2;
    if d.norm() < 1e-14 {
        return Err(Error::Singular(
            "the G metric chart is singular on the diagonal".into(),
        ));
    }
    Ok(cx(-4.0, 0.0) / (d * d))
}

/// Isometric lift of the pseudo-Riemannian quadric `Q^{n-p,p}` into
/// `X_n`: the last `p + 1` real coordinates are multiplied by `i`.
pub fn pseudo_embed(signature: (usize, usize), x: &[f64]) -> Result<XPoint> {
    let (npos, p) = signature;
    let n = npos + p;
    if x.len() != n + 1 {
        return Err(Error::Dimension {
            expected: n + 1,
            got: x.len(),
        });
    }
    let mut constraint = 1.0;
    for (k, xi) in x.iter().enumerate() {
        if k < npos {
            constraint += xi * xi;
        } else {
            constraint -= xi * xi;
        }
    }
    if constraint.abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "point violates the Q^({npos},{p}) constraint (residual {constraint:.3e})"
        )));
    }
    let z = DVector::from_iterator(
        n + 1,
        x.iter()
            .enumerate()
            .map(|(k, xi)| if k < npos { cx(*xi, 0.0) } else { cx(0.0, *xi) }),
    );
    XPoint::new(z)
}

/// A point of the upper half-space model of `H^3`: boundary coordinate
/// `z` in `C` and height `t > 0`.
#[derive(Debug, Clone, Copy)]
pub struct H3Point {
    pub z: Cx,
    pub t: f64,
}

/// A tangent vector at an [`H3Point`], in the `(z, t)` splitting.
#[derive(Debug, Clone, Copy)]
pub struct H3Tangent {
    pub vz: Cx,
    pub vt: f64,
}

/// Endpoint on `partial H^3 = C cup {inf}` of the geodesic ray from `p`
/// in direction `sign * v`, by closed-form half-space geodesics.
pub fn h3_ray_endpoint(p: H3Point, v: H3Tangent, sign: f64) -> Result<ProjP1> {
    let norm = ((v.vz.norm_sqr() + v.vt * v.vt).sqrt()) / p.t;
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "direction is not unit for the hyperbolic metric (norm {norm:.6})"
        )));
    }
    let vz = v.vz * cx(sign, 0.0);
    let vt = v.vt * sign;
    if vz.norm() < 1e-13 * (vt.abs().max(1.0)) {
        // vertical geodesic
        return Ok(if vt > 0.0 {
            ProjP1::infinity()
        } else {
            ProjP1::from_affine(p.z)
        });
    }
    // semicircle orthogonal to the boundary plane
    let u = vz / cx(vz.norm(), 0.0);
    let xi = -p.t * vt / vz.norm(); // signed offset of p above the center
    let center = p.z - u * cx(xi, 0.0);
    let radius = (xi * xi + p.t * p.t).sqrt();
    Ok(ProjP1::from_affine(center + u * cx(radius, 0.0)))
}

/// A Moebius transformation of `CP^1`, stored as a 2x2 matrix acting
/// projectively.
#[derive(Debug, Clone, Copy)]
pub struct Mobius {
    pub m: Matrix2<Cx>,
}

impl Mobius {
    pub fn new(m: Matrix2<Cx>) -> Result<Self> {
        if m.determinant().norm() < 1e-14 {
            return Err(Error::InvalidArgument("singular Moebius matrix".into()));
        }
        Ok(Self { m })
    }

    pub fn apply(&self, p: &ProjP1) -> ProjP1 {
        let w = self.m * p.rep();
        ProjP1::new(w).expect("Moebius image of a projective point is nonzero")
    }

    pub fn apply_affine(&self, z: Cx) -> ProjP1 {
        self.apply(&ProjP1::from_affine(z))
    }

    /// Derivative at an affine point: `det(m) / (cz + d)^2`.
    pub fn derivative(&self, z: Cx) -> Cx {
        let denom = self.m[(1, 0)] * z + self.m[(1, 1)];
        self.m.determinant() / (denom * denom)
    }

    /// Least-squares-free exact fit through three point correspondences.
    pub fn from_three_points(src: [Cx; 3], dst: [Cx; 3]) -> Result<Self> {
        // classical cross-ratio construction: the map sending
        // (z1, z2, z3) -> (0, 1, inf), composed appropriately
        let to_std = |p: [Cx; 3]| -> Matrix2<Cx> {
            Matrix2::new(
                p[1] - p[2],
                -p[0] * (p[1] - p[2]),
                p[1] - p[0],
                -p[2] * (p[1] - p[0]),
            )
        };
        let a = to_std(src);
        let b = to_std(dst);
        let b_inv = Matrix2::new(b[(1, 1)], -b[(0, 1)], -b[(1, 0)], b[(0, 0)])
            .map(|e| e / b.determinant());
        Mobius::new(b_inv * a)
    }
}
