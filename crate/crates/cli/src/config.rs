//! Experiment configuration: one JSON document per run, schema-versioned
//! and hashed so every report names the exact inputs that produced it.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use corona_core::spaces::{self, SampledSpace};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub experiment: ExperimentKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(
    tag = "experiment",
    content = "params",
    rename_all = "kebab-case",
    deny_unknown_fields
)]
pub enum ExperimentKind {
    BuildSpace {
        space: SpaceSpec,
        #[serde(default)]
        quasi_geodesic_trials: Option<usize>,
    },
    ConeDistance {
        p: CompactSpec,
        x_points: usize,
        #[serde(default = "default_step")]
        x_step: f64,
        /// Probe vertex pairs `(p, x, p', x')`.
        probes: Vec<[usize; 4]>,
        #[serde(default)]
        lower_bound_radius: Option<f64>,
        #[serde(default)]
        refinement_levels: Option<usize>,
    },
    ClassifyFunction {
        space: SpaceSpec,
        function: FunctionSpec,
        scales: Vec<f64>,
        /// Optional asserted classification; run fails when it differs.
        #[serde(default)]
        expect: Option<String>,
    },
    SmoothVerify {
        points: usize,
        net_radius: f64,
        noise_scale: f64,
        scales: Vec<f64>,
    },
    CheckMap {
        space: SpaceSpec,
        map: MapSpec,
        #[serde(default)]
        max_a: Option<f64>,
    },
    Homotopy {
        matrix: Vec<Vec<f64>>,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default)]
        cone_check: Option<HomotopyConeSpec>,
    },
    EquivalenceRn {
        dim: usize,
        radius: f64,
        #[serde(default)]
        sphere_mesh: Option<f64>,
        #[serde(default)]
        grid_density: Option<usize>,
    },
    TensorCheck {
        circle_vertices: usize,
        x_points: usize,
        scales: Vec<f64>,
        #[serde(default = "default_products")]
        products_per_side: usize,
        #[serde(default)]
        psi_approx_n: Option<usize>,
    },
}

fn default_step() -> f64 {
    1.0
}
fn default_steps() -> usize {
    64
}
fn default_products() -> usize {
    3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    HalfLine {
        n_max: usize,
        #[serde(default = "default_step")]
        step: f64,
    },
    EuclideanGrid {
        dim: usize,
        max_radius: f64,
        density: usize,
    },
    RandomCloud {
        dim: usize,
        n_points: usize,
        max_radius: f64,
    },
}

impl SpaceSpec {
    pub fn build(&self, seed: u64) -> anyhow::Result<SampledSpace> {
        let space = match *self {
            SpaceSpec::HalfLine { n_max, step } => spaces::build_halfline(n_max, step)?,
            SpaceSpec::EuclideanGrid {
                dim,
                max_radius,
                density,
            } => spaces::build_euclidean_grid(dim, max_radius, density, seed)?,
            SpaceSpec::RandomCloud {
                dim,
                n_points,
                max_radius,
            } => spaces::build_random_cloud(dim, n_points, max_radius, seed)?,
        };
        Ok(space)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompactSpec {
    Point,
    Interval { mesh: f64 },
    Circle { mesh: f64 },
    Sphere2 { mesh: f64 },
}

impl CompactSpec {
    pub fn build(&self) -> anyhow::Result<corona_core::spaces::CompactGraph> {
        Ok(match *self {
            CompactSpec::Point => spaces::build_point(),
            CompactSpec::Interval { mesh } => spaces::build_interval(mesh)?,
            CompactSpec::Circle { mesh } => spaces::build_sphere_graph(2, mesh)?,
            CompactSpec::Sphere2 { mesh } => spaces::build_sphere_graph(3, mesh)?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant { re: f64, im: f64 },
    /// `|x| / (1 + |x|)`.
    NormRatio,
    /// `sqrt(|x|)`.
    SqrtNorm,
    /// `exp(i sqrt(s |x|))`, the winding discriminator.
    WoundSqrt { s: f64 },
    /// Deterministic unit signs per point id.
    HashSign { noise_seed: u64 },
    /// `sign * min(1, scale/|x|)`.
    DecayingNoise { noise_seed: u64, scale: f64 },
    /// `z / (1 + |z|)` on a plane sample (first two coordinates).
    DiskPullback,
}

impl FunctionSpec {
    pub fn build(&self, space: &SampledSpace) -> corona_core::functions::SampledFunction {
        use corona_core::functions::SampledFunction;
        use corona_core::spaces::MetricSpace;
        use num_complex::Complex64;
        match *self {
            FunctionSpec::Constant { re, im } => {
                SampledFunction::constant(space, Complex64::new(re, im))
            }
            FunctionSpec::NormRatio => SampledFunction::from_real_fn(space, |i| {
                let nm = space.norm(i);
                nm / (1.0 + nm)
            }),
            FunctionSpec::SqrtNorm => {
                SampledFunction::from_real_fn(space, |i| space.norm(i).sqrt())
            }
            FunctionSpec::WoundSqrt { s } => SampledFunction::from_fn(space, |i| {
                Complex64::from_polar(1.0, (s * space.norm(i)).sqrt())
            }),
            FunctionSpec::HashSign { noise_seed } => {
                SampledFunction::from_real_fn(space, |i| corona_core::mix::sign(noise_seed, i))
            }
            FunctionSpec::DecayingNoise { noise_seed, scale } => {
                corona_core::smoothing::decaying_sign_noise(space, noise_seed, scale)
            }
            FunctionSpec::DiskPullback => SampledFunction::from_fn(space, |i| {
                let c = space.coords(i);
                let z = Complex64::new(c[0], if c.len() > 1 { c[1] } else { 0.0 });
                z / (1.0 + z.norm())
            }),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    /// Every point to the base point.
    Constant,
    /// `x -> factor * x`, snapped into the sample.
    Dilate { factor: f64 },
    /// `x -> x + sqrt(|x|) * direction of x`, snapped.
    SqrtDrift,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopyConeSpec {
    pub interval_mesh: f64,
    pub grid_radius: f64,
    pub grid_density: usize,
    #[serde(default)]
    pub max_a: Option<f64>,
}

/// Parses and validates a config document.
pub fn load(path: &std::path::Path) -> Result<(ExperimentConfig, String)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).context("config is not valid JSON")?;
    let config: ExperimentConfig =
        serde_json::from_value(value.clone()).context("config does not match the schema")?;
    if config.schema_version != SCHEMA_VERSION {
        bail!(
            "config schema_version {} unsupported (expected {SCHEMA_VERSION})",
            config.schema_version
        );
    }
    Ok((config, canonical_hash(&value)))
}

/// Hash of the canonicalized document (sorted keys, compact encoding), so
/// semantically identical configs hash identically regardless of formatting.
pub fn canonical_hash(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("re-serialization");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
