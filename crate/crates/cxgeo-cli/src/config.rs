//! Experiment configuration: TOML in, fully-resolved echo back out in
//! the report. Complex scalars are `[re, im]` pairs.

use std::sync::Arc;

use cxgeo::calg::{cx, Cx};
use cxgeo::cmetric::{ChartDomain, MetricField};
use cxgeo::immersion::ShapeField;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub chart: Option<ChartCfg>,
    pub metric: Option<MetricCfg>,
    pub shape: Option<ShapeCfg>,
    pub family: Option<FamilyCfg>,
    pub surface: Option<SurfaceCfg>,
    pub geodesic: Option<GeodesicCfg>,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartCfg {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub periodic_x: bool,
    #[serde(default)]
    pub periodic_y: bool,
    /// Marks the x-translation by the chart width as a deck generator.
    #[serde(default)]
    pub deck: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricCfg {
    /// Catalog name: euclidean, minkowski, neg-euclidean, flat-torus,
    /// hyperbolic-plane, hyperbolic-cylinder, round-sphere.
    pub name: String,
    #[serde(default)]
    pub radius: Option<f64>,
    /// Optional constant complex factor applied to the catalog metric.
    #[serde(default)]
    pub scale: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeCfg {
    /// "zero" or "scalar" (constant multiple of the identity).
    pub kind: String,
    #[serde(default)]
    pub value: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyCfg {
    /// Only "landslide" is cataloged.
    pub name: String,
    /// Constant scalar b (must have unit determinant).
    #[serde(default = "one_pair")]
    pub b_scalar: [f64; 2],
    /// Parameter of the rotationally symmetric non-scalar tensor on the
    /// hyperbolic cylinder (overrides b_scalar; must be below 1).
    #[serde(default)]
    pub b_cylinder: Option<f64>,
    pub center: [f64; 2],
    pub radius: f64,
    pub samples: usize,
    /// Amplitude of an injected anti-holomorphic perturbation
    /// `g -> g + a conj(lambda) h` (0 disables it).
    #[serde(default)]
    pub anti_holomorphic: f64,
}

fn one_pair() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceCfg {
    /// "torus" or "sphere".
    pub kind: String,
    #[serde(default = "default_cap")]
    pub cap_angle: f64,
}

fn default_cap() -> f64 {
    0.3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeodesicCfg {
    /// Ambient space form dimensions to test.
    pub dims: Vec<usize>,
    pub count: usize,
    pub t_max: f64,
    pub steps: usize,
}

impl Default for GeodesicCfg {
    fn default() -> Self {
        Self {
            dims: vec![2, 3],
            count: 50,
            t_max: 2.0,
            steps: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Gauss-Codazzi gate for develop/monodromy/sweep.
    pub gc_gate: f64,
    /// Pull-back isometry gate for develop.
    pub develop: f64,
    /// Distance of the Gauss-Bonnet total from pi Z, relative to pi.
    pub gauss_bonnet: f64,
    /// Closed form vs ODE geodesic deviation.
    pub geodesic: f64,
    /// Model roundtrip batteries.
    pub models: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gc_gate: 1e-4,
            develop: 1e-3,
            gauss_bonnet: 0.05,
            geodesic: 1e-8,
            models: 1e-10,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn chart(&self) -> Result<ChartDomain, String> {
        let c = self
            .chart
            .as_ref()
            .ok_or("missing [chart] section".to_string())?;
        let mut d = ChartDomain::new((c.x[0], c.x[1]), (c.y[0], c.y[1]), c.nx, c.ny)
            .map_err(|e| format!("bad chart: {e}"))?;
        if c.periodic_x {
            d = d.with_periodic_x();
        }
        if c.periodic_y {
            d = d.with_periodic_y();
        }
        if c.deck {
            d = d.with_deck();
        }
        Ok(d)
    }

    pub fn metric(&self) -> Result<MetricField, String> {
        let m = self
            .metric
            .as_ref()
            .ok_or("missing [metric] section".to_string())?;
        let base = match m.name.as_str() {
            "euclidean" => MetricField::euclidean(),
            "minkowski" => MetricField::minkowski(),
            "neg-euclidean" => MetricField::neg_euclidean(),
            "flat-torus" => MetricField::flat_torus(),
            "hyperbolic-plane" => MetricField::hyperbolic_plane(),
            "hyperbolic-cylinder" => MetricField::hyperbolic_cylinder(),
            "round-sphere" => MetricField::round_sphere(m.radius.unwrap_or(1.0)),
            other => return Err(format!("unknown metric catalog name '{other}'")),
        };
        Ok(match m.scale {
            Some([re, im]) => base.scaled(cx(re, im)),
            None => base,
        })
    }

    pub fn shape(&self) -> Result<ShapeField, String> {
        let s = self
            .shape
            .as_ref()
            .ok_or("missing [shape] section".to_string())?;
        match s.kind.as_str() {
            "zero" => Ok(ShapeField::zero()),
            "scalar" => {
                let [re, im] = s
                    .value
                    .ok_or("shape kind 'scalar' needs a value".to_string())?;
                Ok(ShapeField::scalar(cx(re, im)))
            }
            other => Err(format!("unknown shape kind '{other}'")),
        }
    }

    pub fn family(&self) -> Result<&FamilyCfg, String> {
        let f = self
            .family
            .as_ref()
            .ok_or("missing [family] section".to_string())?;
        if f.name != "landslide" {
            return Err(format!("unknown family '{}'", f.name));
        }
        if f.samples < 3 || f.samples % 2 == 0 {
            return Err("family samples must be odd and at least 3".into());
        }
        Ok(f)
    }
}

/// Anti-holomorphic metric perturbation `g + a conj(lambda) h` used by
/// the sweep negative control.
pub fn perturbed_metric(g: &MetricField, h: &MetricField, a: f64, lambda: Cx) -> MetricField {
    let factor = cx(a, 0.0) * lambda.conj();
    let (ge, he) = (g.clone(), h.clone());
    MetricField::from_fn(
        "perturbed",
        Arc::new(move |x, y| ge.at(x, y) + he.at(x, y).map(|e| e * factor)),
    )
}
