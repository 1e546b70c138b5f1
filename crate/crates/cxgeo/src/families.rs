//! Holomorphic families of immersion data.
//!
//! The landslide family `(cosh^2(z) h, -tanh(z) b)` built from a
//! hyperbolic metric `h` and an `h`-regular tensor `b`, parameter-grid
//! monodromy sweeps, and a finite-difference Cauchy-Riemann test that
//! monodromy traces depend holomorphically on the parameter.

use std::sync::Arc;

use nalgebra::Matrix2;

use crate::calg::{cx, Cx, I, ONE, ZERO};
use crate::cmetric::{bicomplex, curvature_at, ChartDomain, MetricField};
use crate::immersion::{codazzi_residual_at, monodromy, ImmersionData, ShapeField};
use crate::{Error, Result};

/// `|det b - 1|` tolerance of an `h`-regular tensor.
pub const DET_TOL: f64 = 1e-6;

/// Tolerance on `|cosh z|` below which the landslide family has a pole.
pub const POLE_TOL: f64 = 1e-6;

/// A hyperbolic metric `h` with an `h`-regular tensor `b`
/// (`h`-self-adjoint, Codazzi, unit determinant) on a chart.
#[derive(Clone)]
pub struct RegularPair {
    pub domain: ChartDomain,
    pub h: MetricField,
    pub b: ShapeField,
}

/// Grid-max residuals of the three `h`-regularity conditions.
#[derive(Debug, Clone, Copy)]
pub struct RegularReport {
    pub self_adjoint: f64,
    pub codazzi: f64,
    pub det: f64,
    /// Codazzi gate the report was judged against (grid-dependent).
    pub codazzi_tol: f64,
    pub pass: bool,
}

/// Residuals of `h`-self-adjointness, `d^nabla b = 0`, and `det b = 1`
/// over the grid. The Codazzi residual carries the `O(h^2)` error of
/// the derivative callbacks, so its gate is a parameter.
pub fn regular_check(
    domain: &ChartDomain,
    h: &MetricField,
    b: &ShapeField,
    codazzi_tol: f64,
) -> Result<RegularReport> {
    let mut sa: f64 = 0.0;
    let mut cod: f64 = 0.0;
    let mut det: f64 = 0.0;
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let (x, y) = (domain.xs(i), domain.ys(j));
            sa = sa.max(b.self_adjoint_defect(h, x, y));
            cod = cod.max(codazzi_residual_at(h, b, x, y)?.norm());
            det = det.max((b.at(x, y).determinant() - ONE).norm());
        }
    }
    Ok(RegularReport {
        self_adjoint: sa,
        codazzi: cod,
        det,
        codazzi_tol,
        pass: sa <= crate::immersion::SELF_ADJOINT_TOL && cod <= codazzi_tol && det <= DET_TOL,
    })
}

impl RegularPair {
    /// Validates `h`-regularity of `b` before accepting the pair.
    pub fn new(
        domain: ChartDomain,
        h: MetricField,
        b: ShapeField,
        codazzi_tol: f64,
    ) -> Result<Self> {
        let report = regular_check(&domain, &h, &b, codazzi_tol)?;
        if !report.pass {
            return Err(Error::InvalidArgument(format!(
                "tensor is not h-regular (self-adjoint {:.3e}, codazzi {:.3e}, det {:.3e})",
                report.self_adjoint, report.codazzi, report.det
            )));
        }
        Ok(Self { domain, h, b })
    }
}

/// The landslide family member at parameter `z`:
/// `(cosh^2(z) h, -tanh(z) b)`. Poles at `cosh(z) = 0`.
pub fn landslide_family(pair: &RegularPair, z: Cx) -> Result<ImmersionData> {
    let ch = z.cosh();
    if ch.norm() <= POLE_TOL {
        return Err(Error::Singular(format!(
            "landslide family has a pole at z = {z} (cosh z = 0)"
        )));
    }
    let g = pair.h.scaled(ch * ch);
    let psi = pair.b.scaled(-z.tanh());
    ImmersionData::new(pair.domain.clone(), g, psi)
}

/// The curvature -1 complex metric
/// `g_z = h((cos(z) id - sin(z) J b) ., (cos(z) id - sin(z) J b) .)`
/// with `J` the rotation of `h` for the given orientation. Points where
/// the metric evaluation fails are filled with NaN so downstream
/// degeneracy scans see them.
pub fn landslide_metric(pair: &RegularPair, z: Cx, orientation: i8) -> MetricField {
    let hf = pair.h.clone();
    let bf = pair.b.clone();
    let (c, s) = (z.cos(), z.sin());
    MetricField::from_fn(
        "landslide",
        Arc::new(move |x, y| {
            let hm = hf.at(x, y);
            let bm = bf.at(x, y);
            match bicomplex(&hf, x, y, orientation) {
                Ok(j) => {
                    let r = Matrix2::identity().map(|e: Cx| e * c) - (j * bm).map(|e| e * s);
                    let g = r.transpose() * hm * r;
                    (g + g.transpose()).map(|e| e * cx(0.5, 0.0))
                }
                Err(_) => Matrix2::from_element(cx(f64::NAN, f64::NAN)),
            }
        }),
    )
}

/// A non-scalar `h`-regular tensor on the hyperbolic cylinder
/// `cosh^2(y) dx^2 + dy^2`: the rotationally symmetric solution
/// `b = diag(beta, 1/beta)` of the Codazzi equation, with
/// `beta^2 = 1 - c sech^2(y)`. Requires `c < 1`; `c = 0` is the
/// identity.
pub fn cylinder_regular_b(c: f64) -> Result<ShapeField> {
    if c >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "cylinder tensor parameter must be below 1 (got {c})"
        )));
    }
    let beta = move |y: f64| (1.0 - c / (y.cosh() * y.cosh())).sqrt();
    let eval = move |_: f64, y: f64| {
        let b = beta(y);
        Matrix2::new(cx(b, 0.0), ZERO, ZERO, cx(1.0 / b, 0.0))
    };
    let zero = Matrix2::from_element(ZERO);
    let dy = move |_: f64, y: f64| {
        let b = beta(y);
        let sech2 = 1.0 / (y.cosh() * y.cosh());
        let bp = c * sech2 * y.tanh() / b;
        Matrix2::new(cx(bp, 0.0), ZERO, ZERO, cx(-bp / (b * b), 0.0))
    };
    Ok(ShapeField::from_fn(Arc::new(eval))
        .with_derivs(Arc::new(move |_, _| zero), Arc::new(dy)))
}

/// A uniform rectangle of complex parameters.
#[derive(Debug, Clone)]
pub struct ParamGrid {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub mx: usize,
    pub my: usize,
}

impl ParamGrid {
    pub fn new(re: (f64, f64), im: (f64, f64), mx: usize, my: usize) -> Result<Self> {
        if mx < 3 || my < 3 {
            return Err(Error::InvalidArgument(
                "parameter grid needs at least 3 samples per axis".into(),
            ));
        }
        if !(re.0 < re.1) || !(im.0 < im.1) {
            return Err(Error::InvalidArgument("empty parameter rectangle".into()));
        }
        Ok(Self { re, im, mx, my })
    }

    /// Square grid of odd side `m` centered at `center`.
    pub fn square(center: Cx, radius: f64, m: usize) -> Result<Self> {
        Self::new(
            (center.re - radius, center.re + radius),
            (center.im - radius, center.im + radius),
            m,
            m,
        )
    }

    pub fn spacing(&self) -> (f64, f64) {
        (
            (self.re.1 - self.re.0) / (self.mx - 1) as f64,
            (self.im.1 - self.im.0) / (self.my - 1) as f64,
        )
    }

    pub fn lambda(&self, i: usize, j: usize) -> Cx {
        let (hre, him) = self.spacing();
        cx(self.re.0 + hre * i as f64, self.im.0 + him * j as f64)
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.mx + i
    }

    pub fn len(&self) -> usize {
        self.mx * self.my
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Halves the parameter spacing.
    pub fn refined(&self) -> Self {
        let mut out = self.clone();
        out.mx = 2 * self.mx - 1;
        out.my = 2 * self.my - 1;
        out
    }
}

type FamilyFn = Arc<dyn Fn(Cx) -> Result<ImmersionData> + Send + Sync>;

/// A one-complex-parameter family of immersion data over a shared
/// chart.
#[derive(Clone)]
pub struct HoloFamily {
    pub name: String,
    pub grid: ParamGrid,
    pub chart: ChartDomain,
    eval: FamilyFn,
}

impl HoloFamily {
    pub fn from_fn(name: &str, grid: ParamGrid, chart: ChartDomain, eval: FamilyFn) -> Self {
        Self {
            name: name.into(),
            grid,
            chart,
            eval,
        }
    }

    /// The landslide family of a regular pair.
    pub fn landslide(pair: &RegularPair, grid: ParamGrid) -> Self {
        let pair = pair.clone();
        let chart = pair.domain.clone();
        Self::from_fn(
            "landslide",
            grid,
            chart,
            Arc::new(move |z| landslide_family(&pair, z)),
        )
    }

    pub fn data_at(&self, lambda: Cx) -> Result<ImmersionData> {
        (self.eval)(lambda)
    }

    /// The same family with a new parameter grid.
    pub fn with_grid(&self, grid: ParamGrid) -> Self {
        let mut out = self.clone();
        out.grid = grid;
        out
    }
}

/// Max over the interior parameter grid of the centered-difference
/// Wirtinger derivative `|(df/dRe + i df/dIm) / 2|`. `O(spacing^2)` for
/// holomorphic samples.
pub fn cr_residual(grid: &ParamGrid, values: &[Cx]) -> Result<f64> {
    let field = cr_residual_field(grid, values)?;
    Ok(field.into_iter().fold(0.0, f64::max))
}

/// Per-cell Cauchy-Riemann residuals (zero on the grid boundary), for
/// refinement comparisons over matching parameter positions.
pub fn cr_residual_field(grid: &ParamGrid, values: &[Cx]) -> Result<Vec<f64>> {
    if grid.mx < 5 || grid.my < 5 {
        return Err(Error::InvalidArgument(
            "Cauchy-Riemann test needs at least a 5x5 parameter grid".into(),
        ));
    }
    if values.len() != grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Data("non-finite sample in parameter sweep".into()));
    }
    let (hre, him) = grid.spacing();
    let mut field = vec![0.0; grid.len()];
    for j in 1..grid.my - 1 {
        for i in 1..grid.mx - 1 {
            let dre = (values[grid.idx(i + 1, j)] - values[grid.idx(i - 1, j)]) / cx(2.0 * hre, 0.0);
            let dim = (values[grid.idx(i, j + 1)] - values[grid.idx(i, j - 1)]) / cx(2.0 * him, 0.0);
            field[grid.idx(i, j)] = ((dre + I * dim) * cx(0.5, 0.0)).norm();
        }
    }
    Ok(field)
}

/// Max Cauchy-Riemann residual of `fine` restricted to the parameter
/// positions of `coarse` (which must be a refinement ancestor), so that
/// refinement ratios compare residuals at matching points.
pub fn cr_at_coarse_positions(coarse: &ParamGrid, fine: &ParamGrid, values: &[Cx]) -> Result<f64> {
    let step_x = (fine.mx - 1) / (coarse.mx - 1);
    let step_y = (fine.my - 1) / (coarse.my - 1);
    if step_x * (coarse.mx - 1) != fine.mx - 1 || step_y * (coarse.my - 1) != fine.my - 1 {
        return Err(Error::InvalidArgument(
            "grids are not nested refinements".into(),
        ));
    }
    let field = cr_residual_field(fine, values)?;
    let mut worst: f64 = 0.0;
    for j in 1..coarse.my - 1 {
        for i in 1..coarse.mx - 1 {
            worst = worst.max(field[fine.idx(i * step_x, j * step_y)]);
        }
    }
    Ok(worst)
}

/// Traces below this magnitude get flagged: the SL2 sign continuation
/// is unreliable near trace zero.
pub const SIGN_AMBIGUITY_TOL: f64 = 0.05;

/// Monodromy traces over a parameter grid, sign-continued from the
/// grid center outward.
pub struct TraceSurface {
    pub grid: ParamGrid,
    pub traces: Vec<Cx>,
    pub generator: String,
    pub family: String,
    /// Cells where the trace was too close to zero for reliable sign
    /// continuation.
    pub flagged: Vec<bool>,
    /// Cauchy-Riemann residual of the trace surface.
    pub cr: f64,
}

impl TraceSurface {
    /// CSV with columns `re_lambda, im_lambda, re_tr, im_tr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_lambda,im_lambda,re_tr,im_tr\n");
        for j in 0..self.grid.my {
            for i in 0..self.grid.mx {
                let l = self.grid.lambda(i, j);
                let t = self.traces[self.grid.idx(i, j)];
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    l.re, l.im, t.re, t.im
                ));
            }
        }
        out
    }
}

/// Visit order of the parameter grid from the center outward, each cell
/// with the neighbor one step closer to the center.
fn center_out_order(grid: &ParamGrid) -> Vec<(usize, usize, Option<usize>)> {
    let (ic, jc) = (grid.mx / 2, grid.my / 2);
    let mut cells: Vec<(usize, usize)> = (0..grid.my)
        .flat_map(|j| (0..grid.mx).map(move |i| (i, j)))
        .collect();
    cells.sort_by_key(|&(i, j)| i.abs_diff(ic) + j.abs_diff(jc));
    cells
        .into_iter()
        .map(|(i, j)| {
            let parent = if i != ic && i.abs_diff(ic) >= j.abs_diff(jc) {
                Some(grid.idx(if i < ic { i + 1 } else { i - 1 }, j))
            } else if j != jc {
                Some(grid.idx(i, if j < jc { j + 1 } else { j - 1 }))
            } else if i != ic {
                Some(grid.idx(if i < ic { i + 1 } else { i - 1 }, j))
            } else {
                None
            };
            (i, j, parent)
        })
        .collect()
}

/// Sweeps the deck-generator monodromy over the parameter grid and
/// attaches the Cauchy-Riemann residual of the trace surface.
pub fn sweep_monodromy(family: &HoloFamily, gate: f64) -> Result<TraceSurface> {
    let grid = &family.grid;
    let mut traces = vec![ZERO; grid.len()];
    let mut flagged = vec![false; grid.len()];
    for (i, j, parent) in center_out_order(grid) {
        let data = family.data_at(grid.lambda(i, j))?;
        let m = monodromy(&data, gate)?;
        let mut t = m.trace;
        if let Some(p) = parent {
            let reference = traces[p];
            if (-t - reference).norm() < (t - reference).norm() {
                t = -t;
            }
            if t.norm() < SIGN_AMBIGUITY_TOL {
                flagged[grid.idx(i, j)] = true;
            }
        }
        traces[grid.idx(i, j)] = t;
    }
    let cr = if grid.mx >= 5 && grid.my >= 5 {
        cr_residual(grid, &traces)?
    } else {
        f64::NAN
    };
    Ok(TraceSurface {
        grid: grid.clone(),
        traces,
        generator: "deck".into(),
        family: family.name.clone(),
        flagged,
        cr,
    })
}

/// Max `|K_g + 1|` of a metric over a chart grid (for the constant
/// curvature claim of the landslide metric).
pub fn curvature_defect(g: &MetricField, domain: &ChartDomain) -> Result<f64> {
    let (hx, hy) = (domain.hx(), domain.hy());
    let mut worst: f64 = 0.0;
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            // catalog metrics evaluate beyond the chart, so the
            // centered stencil is fine on the boundary too
            let k = curvature_at(g, domain.xs(i), domain.ys(j), hx, hy)?;
            worst = worst.max((k + ONE).norm());
        }
    }
    Ok(worst)
}
