//! JSON run configuration. See `docs/config.md` for the schema.

use std::path::Path;

use mpray::catalog;
use mpray::geometry::Metric;
use mpray::transform::TensorTriple;
use mpray::{Expr, MpSystem};
use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub integrate: IntegrateConfig,
    #[serde(default)]
    pub transform: TransformConfig,
    #[serde(default)]
    pub action: ActionConfig,
    #[serde(default)]
    pub santalo: SantaloConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_seed() -> u64 {
    42
}

/// A catalog name such as `"SYS-B(0.3)"` or an inline definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Catalog(String),
    Inline(InlineSystem),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    pub dim: usize,
    #[serde(default = "one")]
    pub radius: f64,
    pub metric: MetricSpec,
    #[serde(default)]
    pub alpha: Option<Vec<String>>,
    #[serde(default)]
    pub potential: Option<String>,
    #[serde(default = "half")]
    pub energy: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricSpec {
    Conformal(String),
    Full(Vec<Vec<String>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub t_max: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-12,
            t_max: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Boundary positions × directions of the fan used for ray checks.
    pub fan_positions: usize,
    pub fan_directions: usize,
    /// Spatial Gauss–Legendre radial × angular nodes and fiber nodes.
    pub radial: usize,
    pub angular: usize,
    pub fiber: usize,
    /// Fan used for the boundary side of Santaló's formula.
    pub santalo_positions: usize,
    pub santalo_directions: usize,
    /// Fan of reduced rays for the curvature functional.
    pub curvature_positions: usize,
    pub curvature_directions: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            fan_positions: 8,
            fan_directions: 8,
            radial: 32,
            angular: 64,
            fiber: 64,
            santalo_positions: 64,
            santalo_directions: 64,
            curvature_positions: 16,
            curvature_directions: 16,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrateConfig {
    /// Start point; defaults to `(−R, 0, …)`.
    pub x: Option<Vec<f64>>,
    /// Initial direction, scaled onto the energy shell; defaults to `e₁`.
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    /// Defaults to `[δ, 0, 0]`.
    pub triple: Option<TripleSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleSpec {
    pub h: Vec<Vec<String>>,
    pub beta: Vec<String>,
    pub v: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionConfig {
    /// Boundary angles; defaults to `count` equally spaced angles.
    pub angles: Option<Vec<f64>>,
    pub count: usize,
    pub min_separation: f64,
}

impl Default for ActionConfig {
    fn default() -> Self {
        ActionConfig {
            angles: None,
            count: 8,
            min_separation: 0.2,
        }
    }
}

impl ActionConfig {
    pub fn angles(&self) -> Vec<f64> {
        match &self.angles {
            Some(a) => a.clone(),
            None => (0..self.count)
                .map(|i| std::f64::consts::TAU * i as f64 / self.count as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SantaloIntegrand {
    /// `f ≡ 1`
    One,
    /// `f = 1 + x¹ + (v¹)²/P`
    Linear,
    /// `f = cos(x¹x²) + v¹v²/P + x²(v¹)/√P`
    Mixed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SantaloConfig {
    pub integrand: SantaloIntegrand,
}

impl Default for SantaloConfig {
    fn default() -> Self {
        SantaloConfig {
            integrand: SantaloIntegrand::One,
        }
    }
}

/// Sample counts for the verification suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub triples: usize,
    pub rays: usize,
    pub interior_points: usize,
    pub pairs: usize,
    pub perturbations: usize,
    pub gauge_angles: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            triples: 5,
            rays: 20,
            interior_points: 50,
            pairs: 10,
            perturbations: 2,
            gauge_angles: 5,
        }
    }
}

fn schema_error(pointer: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

/// Parse a configuration document, reporting schema violations with the
/// JSON pointer of the offending value.
pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer: String = e
            .path()
            .iter()
            .map(|seg| match seg {
                Segment::Seq { index } => format!("/{index}"),
                Segment::Map { key } | Segment::Enum { variant: key } => {
                    format!("/{}", key.replace('~', "~0").replace('/', "~1"))
                }
                Segment::Unknown => "/?".to_string(),
            })
            .collect();
        schema_error(&pointer, e.inner().to_string())
    })?;
    cfg.check()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    from_json(&text)
}

impl RunConfig {
    pub fn for_system(name: &str) -> RunConfig {
        from_json(&format!(
            "{{\"system\": {}}}",
            serde_json::to_string(name).unwrap()
        ))
        .expect("catalog config")
    }

    fn check(&self) -> Result<(), CliError> {
        for (name, tol) in [
            ("rtol", self.integrator.rtol),
            ("atol", self.integrator.atol),
        ] {
            if !(tol > 0.0 && tol <= 1e-2) {
                return Err(schema_error(
                    &format!("/integrator/{name}"),
                    format!("tolerance must lie in (0, 1e-2], got {tol}"),
                ));
            }
        }
        let g = &self.grids;
        for (name, count) in [
            ("fan_positions", g.fan_positions),
            ("fan_directions", g.fan_directions),
            ("santalo_positions", g.santalo_positions),
            ("santalo_directions", g.santalo_directions),
            ("curvature_positions", g.curvature_positions),
            ("curvature_directions", g.curvature_directions),
        ] {
            if count < 8 {
                return Err(schema_error(
                    &format!("/grids/{name}"),
                    format!("fan counts must be at least 8, got {count}"),
                ));
            }
        }
        for (name, count) in [
            ("radial", g.radial),
            ("angular", g.angular),
            ("fiber", g.fiber),
        ] {
            if count == 0 {
                return Err(schema_error(&format!("/grids/{name}"), "must be positive"));
            }
        }
        if self.action.angles.is_none() && self.action.count < 2 {
            return Err(schema_error(
                "/action/count",
                "need at least two boundary angles",
            ));
        }
        Ok(())
    }

    /// Build the system, reporting expression errors with their location.
    pub fn build_system(&self) -> Result<MpSystem, CliError> {
        match &self.system {
            SystemSpec::Catalog(name) => {
                catalog::by_name(name).map_err(|e| schema_error("/system", e.to_string()))
            }
            SystemSpec::Inline(s) => {
                let n = s.dim;
                let metric = match &s.metric {
                    MetricSpec::Conformal(src) => {
                        Metric::Conformal(expr(src, n, "/system/metric/conformal")?)
                    }
                    MetricSpec::Full(rows) => {
                        let mut out = Vec::new();
                        for (i, r) in rows.iter().enumerate() {
                            let mut row = Vec::new();
                            for (j, src) in r.iter().enumerate() {
                                row.push(expr(src, n, &format!("/system/metric/full/{i}/{j}"))?);
                            }
                            out.push(row);
                        }
                        Metric::full(out)
                            .map_err(|e| schema_error("/system/metric/full", e.to_string()))?
                    }
                };
                let alpha = match &s.alpha {
                    Some(a) => a
                        .iter()
                        .enumerate()
                        .map(|(i, src)| expr(src, n, &format!("/system/alpha/{i}")))
                        .collect::<Result<_, _>>()?,
                    None => vec![Expr::zero(); n],
                };
                let potential = match &s.potential {
                    Some(src) => expr(src, n, "/system/potential")?,
                    None => Expr::zero(),
                };
                Ok(MpSystem::new(
                    n, s.radius, metric, alpha, potential, s.energy,
                )?)
            }
        }
    }

    pub fn build_triple(&self, dim: usize) -> Result<TensorTriple, CliError> {
        let Some(t) = &self.transform.triple else {
            let mut z = TensorTriple::zero(dim);
            for (i, row) in z.h.iter_mut().enumerate() {
                row[i] = Expr::one();
            }
            return Ok(z);
        };
        let mut h = Vec::new();
        for (i, r) in t.h.iter().enumerate() {
            let mut row = Vec::new();
            for (j, src) in r.iter().enumerate() {
                row.push(expr(src, dim, &format!("/transform/triple/h/{i}/{j}"))?);
            }
            h.push(row);
        }
        let beta = t
            .beta
            .iter()
            .enumerate()
            .map(|(i, src)| expr(src, dim, &format!("/transform/triple/beta/{i}")))
            .collect::<Result<_, _>>()?;
        let v = expr(&t.v, dim, "/transform/triple/v")?;
        TensorTriple::new(h, beta, v).map_err(|e| schema_error("/transform/triple", e.to_string()))
    }
}

fn expr(src: &str, dim: usize, pointer: &str) -> Result<Expr, CliError> {
    mpray::fieldexpr::parse_with_dim(src, dim).map_err(|e| schema_error(pointer, e.to_string()))
}
