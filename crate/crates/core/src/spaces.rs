//! Finite samples of pointed proper metric spaces and weighted-graph models
//! of compact path spaces.
//!
//! A [`SampledSpace`] is a finite point set with an exact distance oracle, a
//! base point, and a partition of the points into dyadic annuli
//! `{x : 2^k <= |x| < 2^(k+1)}` where `|x|` is the distance to the base
//! point. Properness of the modeled space is reflected by a guaranteed
//! per-annulus point density over the configured range of scales.
//!
//! A [`CompactGraph`] is a connected weighted graph whose shortest-path
//! metric approximates a compact path metric space (an interval, a circle, a
//! 2-sphere) within its mesh.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mix;

/// Dense-matrix cap for derived all-pair structures; above this size the
/// distance oracle stays closed-form / on-demand.
pub const DENSE_POINT_CAP: usize = 5_000;

/// Shared access to a finite metric sample.
///
/// `distance_row_into` exists so that graph-backed implementors (cones,
/// compact graphs) can serve a whole row from one shortest-path run instead
/// of one run per query.
pub trait MetricSpace: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Distance from the base point.
    fn norm(&self, i: usize) -> f64;
    fn distance(&self, i: usize, j: usize) -> f64;
    /// Fills `buf` with distances from `i` to every point.
    fn distance_row_into(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend((0..self.len()).map(|j| self.distance(i, j)));
    }
    /// Largest nearest-neighbor distance over the sample.
    fn sampling_mesh(&self) -> f64;
    /// Identity of the space; functions and maps carry it for consistency
    /// checks.
    fn fingerprint(&self) -> u64;
    /// Whether `distance(i, j)` is cheap for arbitrary pairs. Graph metrics
    /// that run a shortest-path sweep per source return false, and sweep
    /// utilities switch to row-oriented access.
    fn random_access_distance(&self) -> bool {
        true
    }

    /// Ids with norm strictly greater than `r`, ascending.
    fn ids_outside(&self, r: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.norm(i) > r).collect()
    }

    /// Dyadic annulus index of a norm: -1 for the core `|x| < 1`, otherwise
    /// `floor(log2 |x|)`.
    fn annulus_index(norm: f64) -> i32
    where
        Self: Sized,
    {
        annulus_index(norm)
    }
}

/// Dyadic annulus index: -1 for the core `|x| < 1`, else `floor(log2 |x|)`.
pub fn annulus_index(norm: f64) -> i32 {
    if norm < 1.0 {
        -1
    } else {
        norm.log2().floor() as i32
    }
}

/// Rule deciding which sample pairs count as adjacent (chain steps, cone
/// edges).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum NeighborRule {
    /// `d(x,x') <= radius`.
    WithinRadius { radius: f64 },
    /// `d(x,x') <= factor * max(1, min(|x|,|x'|))`; matches samples whose
    /// resolution scales with the annulus.
    WithinScaledRadius { factor: f64 },
}

impl NeighborRule {
    pub fn connects(&self, d: f64, norm_a: f64, norm_b: f64) -> bool {
        match *self {
            NeighborRule::WithinRadius { radius } => d <= radius,
            NeighborRule::WithinScaledRadius { factor } => {
                d <= factor * norm_a.min(norm_b).max(1.0)
            }
        }
    }
}

/// Construction parameters; serialized instead of distances so documents
/// stay small and loads rebuild bit-identical spaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceParams {
    HalfLine {
        n_max: usize,
        step: f64,
    },
    EuclideanGrid {
        dim: usize,
        max_radius: f64,
        density: usize,
        seed: u64,
    },
    RandomCloud {
        dim: usize,
        n_points: usize,
        max_radius: f64,
        seed: u64,
    },
    /// Explicit coordinates or an explicit matrix; not rebuildable from
    /// parameters alone.
    Custom,
}

enum DistanceBacking {
    /// Euclidean metric on stored coordinates.
    Euclidean,
    /// Explicit dense row-major matrix (custom spaces only).
    Matrix(Box<[f64]>),
}

/// Finite annulus-structured sample of a pointed proper metric space.
pub struct SampledSpace {
    params: SpaceParams,
    dim: usize,
    coords: Vec<f64>,
    n: usize,
    base: usize,
    norms: Vec<f64>,
    annuli: BTreeMap<i32, Vec<usize>>,
    backing: DistanceBacking,
    quasi_geodesic_c: f64,
    neighbor_rule: NeighborRule,
    mesh: f64,
    fingerprint: u64,
}

impl SampledSpace {
    /// Builds a space from explicit coordinates with the Euclidean metric.
    pub fn from_coords(
        params: SpaceParams,
        dim: usize,
        coords: Vec<f64>,
        base: usize,
        quasi_geodesic_c: f64,
        neighbor_rule: NeighborRule,
    ) -> Result<Self> {
        if dim == 0 || coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "coords length {} not a multiple of dim {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        if base >= n {
            return Err(Error::InvalidInput(format!("base point {base} >= {n}")));
        }
        let mut space = SampledSpace {
            params,
            dim,
            coords,
            n,
            base,
            norms: Vec::new(),
            annuli: BTreeMap::new(),
            backing: DistanceBacking::Euclidean,
            quasi_geodesic_c,
            neighbor_rule,
            mesh: 0.0,
            fingerprint: 0,
        };
        space.finish_build()?;
        Ok(space)
    }

    /// Builds a space from an explicit dense distance matrix. The matrix is
    /// validated for symmetry and zero diagonal; triangle-inequality
    /// validation is a separate diagnostic ([`validate_metric`]).
    pub fn from_matrix(matrix: Vec<f64>, base: usize) -> Result<Self> {
        let n = (matrix.len() as f64).sqrt().round() as usize;
        if n * n != matrix.len() || n == 0 {
            return Err(Error::InvalidInput("matrix is not square".into()));
        }
        if n > DENSE_POINT_CAP {
            return Err(Error::ResourceCap {
                what: "dense distance matrix".into(),
                required: n,
                cap: DENSE_POINT_CAP,
            });
        }
        for i in 0..n {
            if matrix[i * n + i] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if matrix[i * n + j] != matrix[j * n + i] {
                    return Err(Error::InvalidInput(format!("asymmetry at ({i},{j})")));
                }
            }
        }
        let mut space = SampledSpace {
            params: SpaceParams::Custom,
            dim: 0,
            coords: Vec::new(),
            n,
            base,
            norms: Vec::new(),
            annuli: BTreeMap::new(),
            backing: DistanceBacking::Matrix(matrix.into_boxed_slice()),
            quasi_geodesic_c: 1.0,
            neighbor_rule: NeighborRule::WithinRadius { radius: f64::MAX },
            mesh: 0.0,
            fingerprint: 0,
        };
        space.finish_build()?;
        Ok(space)
    }

    fn finish_build(&mut self) -> Result<()> {
        self.norms = (0..self.n).map(|i| self.distance(self.base, i)).collect();
        if self.norms[self.base] != 0.0 {
            return Err(Error::Construction("base point has nonzero norm".into()));
        }
        let mut annuli: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (i, &nm) in self.norms.iter().enumerate() {
            annuli.entry(annulus_index(nm)).or_default().push(i);
        }
        self.annuli = annuli;
        self.mesh = self.compute_mesh();
        self.fingerprint = self.compute_fingerprint();
        Ok(())
    }

    fn compute_mesh(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let mut nearest = f64::INFINITY;
            for j in 0..self.n {
                if j != i {
                    nearest = nearest.min(self.distance(i, j));
                }
            }
            worst = worst.max(nearest);
        }
        worst
    }

    fn compute_fingerprint(&self) -> u64 {
        let tag = serde_json::to_string(&self.params).unwrap_or_default();
        let mut words: Vec<u64> = tag.bytes().map(u64::from).collect();
        words.push(self.n as u64);
        words.push(self.base as u64);
        words.push(self.norms.iter().map(|x| x.to_bits()).fold(0, u64::wrapping_add));
        mix::mix(0x5350_4143, &words)
    }

    pub fn params(&self) -> &SpaceParams {
        &self.params
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn base_point(&self) -> usize {
        self.base
    }
    pub fn quasi_geodesic_c(&self) -> f64 {
        self.quasi_geodesic_c
    }
    pub fn neighbor_rule(&self) -> NeighborRule {
        self.neighbor_rule
    }
    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
    pub fn has_coords(&self) -> bool {
        self.dim > 0
    }
    pub fn annuli(&self) -> &BTreeMap<i32, Vec<usize>> {
        &self.annuli
    }
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    /// Nearest sample point to an arbitrary coordinate, with its distance.
    pub fn nearest_point(&self, target: &[f64]) -> (usize, f64) {
        assert!(self.has_coords(), "nearest_point needs coordinates");
        let mut best = (0usize, f64::INFINITY);
        for i in 0..self.n {
            let d = euclidean(self.coords(i), target);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Euclidean distance from a sample point to an arbitrary coordinate.
    pub fn distance_to_coord(&self, i: usize, target: &[f64]) -> f64 {
        euclidean(self.coords(i), target)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl MetricSpace for SampledSpace {
    fn len(&self) -> usize {
        self.n
    }
    fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }
    fn distance(&self, i: usize, j: usize) -> f64 {
        match &self.backing {
            DistanceBacking::Euclidean => {
                euclidean(self.coords(i), self.coords(j))
            }
            DistanceBacking::Matrix(m) => m[i * self.n + j],
        }
    }
    fn sampling_mesh(&self) -> f64 {
        self.mesh
    }
    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Distance from the base point; errors on an unknown id.
pub fn norm(space: &SampledSpace, x: usize) -> Result<f64> {
    if x >= space.len() {
        return Err(Error::InvalidInput(format!(
            "point id {x} out of range (n = {})",
            space.len()
        )));
    }
    Ok(space.norm(x))
}

/// The closed ball `{x : |x| <= R}` around the base point.
pub fn ball(space: &SampledSpace, r: f64) -> Vec<usize> {
    (0..space.len()).filter(|&i| space.norm(i) <= r).collect()
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

/// Points `0, step, 2*step, ..., n_max*step` with the absolute-difference
/// metric; base point 0. Models the natural numbers and the half-line.
pub fn build_halfline(n_max: usize, step: f64) -> Result<SampledSpace> {
    if n_max == 0 {
        return Err(Error::DegenerateSpace(
            "half-line needs n_max >= 1".into(),
        ));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let coords: Vec<f64> = (0..=n_max).map(|i| i as f64 * step).collect();
    SampledSpace::from_coords(
        SpaceParams::HalfLine { n_max, step },
        1,
        coords,
        0,
        1.0,
        NeighborRule::WithinRadius { radius: step * 1.5 },
    )
}

/// Deterministic quasi-uniform sample of the ball of radius `max_radius` in
/// dimension `dim`, with exactly `density` points in every dyadic annulus
/// `[2^k, 2^(k+1))` for `2^(k+1) <= max_radius`, plus the origin. Sampling
/// is stratified (equal-measure cells, one jittered point per cell) driven
/// by the splitmix64 mix of `(seed, annulus, cell)`.
pub fn build_euclidean_grid(
    dim: usize,
    max_radius: f64,
    density: usize,
    seed: u64,
) -> Result<SampledSpace> {
    if !(1..=4).contains(&dim) {
        return Err(Error::InvalidInput(format!("dim {dim} not in 1..=4")));
    }
    if density < dim + 1 {
        return Err(Error::InvalidInput(format!(
            "density {density} < dim + 1 = {}",
            dim + 1
        )));
    }
    if !(max_radius >= 2.0) {
        return Err(Error::InvalidInput(
            "max_radius must be at least 2".into(),
        ));
    }
    let k_max = (max_radius.log2().floor() as i32) - 1;
    let mut coords: Vec<f64> = vec![0.0; dim]; // origin, id 0
    for k in 0..=k_max {
        let inner = (2.0f64).powi(k);
        let pts = sample_annulus(dim, inner, density, seed, k as u64)?;
        coords.extend(pts);
    }
    let space = SampledSpace::from_coords(
        SpaceParams::EuclideanGrid {
            dim,
            max_radius,
            density,
            seed,
        },
        dim,
        coords,
        0,
        2.0,
        NeighborRule::WithinScaledRadius { factor: 1.6 },
    )?;
    // construction contract: configured annuli are nonempty
    for k in 0..=k_max {
        let cnt = space.annuli().get(&k).map_or(0, Vec::len);
        if cnt < density {
            return Err(Error::Construction(format!(
                "annulus {k} holds {cnt} < density {density} points"
            )));
        }
    }
    Ok(space)
}

/// `density` points in the annulus `[inner, 2*inner)`, stratified.
fn sample_annulus(dim: usize, inner: f64, density: usize, seed: u64, k: u64) -> Result<Vec<f64>> {
    let m = density;
    let mut out = Vec::with_capacity(m * dim);
    match dim {
        1 => {
            // two sides; alternate, stratify each side radially
            let per_side = m.div_ceil(2);
            for i in 0..m {
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                let slot = (i / 2) as f64;
                let u = mix::unit_f64(mix::mix(seed, &[k, i as u64, 11]));
                let r = inner * (1.0 + (slot + u) / per_side as f64);
                out.push(side * r);
            }
        }
        2 => {
            // rings x sectors; annulus aspect ratio ~ 2*pi*1.5 : 1
            let n_rad = ((m as f64 / 9.42).sqrt().round() as usize).max(1);
            let n_ang = m.div_ceil(n_rad);
            let offset = mix::unit_f64(mix::mix(seed, &[k, 101])) * std::f64::consts::TAU;
            let mut placed = 0;
            'outer: for ir in 0..n_rad {
                for ia in 0..n_ang {
                    if placed == m {
                        break 'outer;
                    }
                    let cell = (ir * n_ang + ia) as u64;
                    let ur = mix::unit_f64(mix::mix(seed, &[k, cell, 1]));
                    let ua = mix::unit_f64(mix::mix(seed, &[k, cell, 2]));
                    let r = inner * (1.0 + (ir as f64 + ur) / n_rad as f64);
                    let theta = offset
                        + std::f64::consts::TAU * (ia as f64 + ua) / n_ang as f64;
                    out.push(r * theta.cos());
                    out.push(r * theta.sin());
                    placed += 1;
                }
            }
        }
        3 | 4 => {
            // radial shells, low-discrepancy directions per shell
            let n_rad = ((m as f64 / 24.0).cbrt().round() as usize).max(1);
            let per_shell = m.div_ceil(n_rad);
            let mut placed = 0;
            'outer3: for ir in 0..n_rad {
                for ia in 0..per_shell {
                    if placed == m {
                        break 'outer3;
                    }
                    let cell = (ir * per_shell + ia) as u64;
                    let ur = mix::unit_f64(mix::mix(seed, &[k, cell, 1]));
                    // volume-uniform radius within the shell slab
                    let lo = 1.0 + ir as f64 / n_rad as f64;
                    let hi = 1.0 + (ir as f64 + 1.0) / n_rad as f64;
                    let u = lo.powi(dim as i32)
                        + ur * (hi.powi(dim as i32) - lo.powi(dim as i32));
                    let r = inner * u.powf(1.0 / dim as f64);
                    let dir = if dim == 3 {
                        fibonacci_direction(ia, per_shell, seed, k, ir as u64)
                    } else {
                        gaussian_direction(4, seed, &[k, cell])
                    };
                    for c in dir {
                        out.push(r * c);
                    }
                    placed += 1;
                }
            }
        }
        _ => unreachable!(),
    }
    if out.len() != m * dim {
        return Err(Error::Construction(format!(
            "annulus sampler produced {} coords, expected {}",
            out.len(),
            m * dim
        )));
    }
    Ok(out)
}

/// Fibonacci-lattice direction on S^2, rotated by a hashed per-shell phase.
fn fibonacci_direction(i: usize, n: usize, seed: u64, k: u64, shell: u64) -> Vec<f64> {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    let phase = mix::unit_f64(mix::mix(seed, &[k, shell, 77])) * std::f64::consts::TAU;
    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let theta = std::f64::consts::TAU * (i as f64 / golden) + phase;
    vec![rho * theta.cos(), rho * theta.sin(), z]
}

fn gaussian_direction(dim: usize, seed: u64, words: &[u64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(dim);
    let mut salt = 0u64;
    while v.len() < dim {
        let mut w: Vec<u64> = words.to_vec();
        w.push(salt);
        let (a, b) = mix::normal_pair(seed, &w);
        v.push(a);
        if v.len() < dim {
            v.push(b);
        }
        salt += 1;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.iter().map(|x| x / norm).collect()
}

/// Uniform random cloud in the ball of radius `max_radius`; the point of
/// smallest norm is relocated to the origin to serve as base point.
/// Intended for randomized oracle-equivalence sweeps.
pub fn build_random_cloud(
    dim: usize,
    n_points: usize,
    max_radius: f64,
    seed: u64,
) -> Result<SampledSpace> {
    if !(1..=4).contains(&dim) {
        return Err(Error::InvalidInput(format!("dim {dim} not in 1..=4")));
    }
    if n_points < 2 {
        return Err(Error::DegenerateSpace("need at least 2 points".into()));
    }
    let mut coords = vec![0.0; dim]; // base at origin
    for i in 1..n_points {
        let dir = gaussian_direction(dim, seed, &[i as u64, 5]);
        let u = mix::unit_f64(mix::mix(seed, &[i as u64, 6]));
        let r = max_radius * u.powf(1.0 / dim as f64);
        for d in dir.iter().take(dim) {
            coords.push(r * d);
        }
    }
    SampledSpace::from_coords(
        SpaceParams::RandomCloud {
            dim,
            n_points,
            max_radius,
            seed,
        },
        dim,
        coords,
        0,
        2.0,
        NeighborRule::WithinScaledRadius { factor: 2.0 },
    )
}

// ---------------------------------------------------------------------------
// Metric diagnostics
// ---------------------------------------------------------------------------

/// Outcome of exhaustive metric-axiom validation on the sample.
#[derive(Clone, Debug, Serialize)]
pub struct MetricValidation {
    pub symmetric: bool,
    pub zero_diagonal: bool,
    pub worst_triangle_defect: f64,
    pub triangle_witness: Option<(usize, usize, usize)>,
    pub pass: bool,
}

/// Checks symmetry and identity exactly and the triangle inequality within
/// `1e-9` on every sampled triple (all triples up to 300 points, a
/// deterministic subsample of anchor points above).
pub fn validate_metric(space: &impl MetricSpace) -> MetricValidation {
    let n = space.len();
    let mut symmetric = true;
    let mut zero_diagonal = true;
    for i in 0..n {
        if space.distance(i, i) != 0.0 {
            zero_diagonal = false;
        }
        for j in 0..i {
            if space.distance(i, j) != space.distance(j, i) {
                symmetric = false;
            }
        }
    }
    let anchors: Vec<usize> = if n <= 300 {
        (0..n).collect()
    } else {
        (0..300)
            .map(|t| (mix::mix(0x7472, &[t as u64]) % n as u64) as usize)
            .collect()
    };
    let mut worst = 0.0f64;
    let mut witness = None;
    for &k in &anchors {
        for i in 0..n {
            let dik = space.distance(i, k);
            for j in 0..i {
                let defect = space.distance(i, j) - dik - space.distance(k, j);
                if defect > worst {
                    worst = defect;
                    witness = Some((i, j, k));
                }
            }
        }
    }
    MetricValidation {
        symmetric,
        zero_diagonal,
        worst_triangle_defect: worst,
        triangle_witness: witness,
        pass: symmetric && zero_diagonal && worst <= 1e-9,
    }
}

/// Report of the two-sided chain inequality check.
#[derive(Clone, Debug, Serialize)]
pub struct QuasiGeodesicReport {
    pub c: f64,
    pub pairs_checked: usize,
    /// Worst excess of `d(f(a),f(b))` over `C|a-b| + C` (positive = violation).
    pub worst_upper_violation: f64,
    /// Worst shortfall of `d(f(a),f(b))` under `|a-b|/C - C`.
    pub worst_lower_violation: f64,
    pub witness: Option<(usize, usize)>,
    /// Pair with no connecting chain at scale `2C`, if any.
    pub disconnected: Option<(usize, usize)>,
    pub pass: bool,
}

/// Samples `trials` point pairs, builds for each a chain through the sample
/// (shortest path over neighbor-rule edges), parametrizes it by scaled
/// cumulative length, and reports the worst violation of
/// `(1/C)|a-b| - C <= d(f(a),f(b)) <= C|a-b| + C` over chain point pairs.
pub fn quasi_geodesic_check(
    space: &SampledSpace,
    c: f64,
    trials: usize,
) -> Result<QuasiGeodesicReport> {
    if c < 1.0 {
        return Err(Error::InvalidInput("quasi-geodesic constant C < 1".into()));
    }
    let n = space.len();
    if n < 2 {
        return Err(Error::DegenerateSpace("need two points".into()));
    }
    // chain-step graph from the space's neighbor rule
    let rule = space.neighbor_rule();
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..i {
            let d = space.distance(i, j);
            if rule.connects(d, space.norm(i), space.norm(j)) {
                adj[i].push((j as u32, d));
                adj[j].push((i as u32, d));
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let total = n * (n - 1) / 2;
    if total <= trials {
        for i in 0..n {
            for j in 0..i {
                pairs.push((j, i));
            }
        }
    } else {
        for t in 0..trials {
            let w = mix::mix(0x7147, &[t as u64]);
            let i = (w % n as u64) as usize;
            let j = (mix::splitmix64(w) % n as u64) as usize;
            if i != j {
                pairs.push((i.min(j), i.max(j)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
    }

    let mut worst_upper = 0.0f64;
    let mut worst_lower = 0.0f64;
    let mut witness = None;
    let mut buf_dist: Vec<f64> = Vec::new();
    let mut buf_prev: Vec<u32> = Vec::new();
    for &(a, b) in &pairs {
        let Some(chain) = shortest_chain(&adj, a, b, &mut buf_dist, &mut buf_prev) else {
            return Ok(QuasiGeodesicReport {
                c,
                pairs_checked: pairs.len(),
                worst_upper_violation: f64::INFINITY,
                worst_lower_violation: f64::INFINITY,
                witness: Some((a, b)),
                disconnected: Some((a, b)),
                pass: false,
            });
        };
        let d_ab = space.distance(a, b);
        if d_ab == 0.0 {
            continue;
        }
        // cumulative chain length, rescaled onto [0, d(a,b)]
        let mut params = Vec::with_capacity(chain.len());
        let mut acc = 0.0;
        params.push(0.0);
        for w in chain.windows(2) {
            acc += space.distance(w[0], w[1]);
            params.push(acc);
        }
        let scale = d_ab / acc.max(f64::MIN_POSITIVE);
        for p in &mut params {
            *p *= scale;
        }
        for i in 0..chain.len() {
            for j in 0..i {
                let gap = (params[i] - params[j]).abs();
                let d = space.distance(chain[i], chain[j]);
                let upper = d - (c * gap + c);
                let lower = (gap / c - c) - d;
                if upper > worst_upper {
                    worst_upper = upper;
                    witness = Some((a, b));
                }
                if lower > worst_lower {
                    worst_lower = lower;
                    witness = Some((a, b));
                }
            }
        }
    }
    let pass = worst_upper <= 1e-9 && worst_lower <= 1e-9;
    Ok(QuasiGeodesicReport {
        c,
        pairs_checked: pairs.len(),
        worst_upper_violation: worst_upper,
        worst_lower_violation: worst_lower,
        witness,
        disconnected: None,
        pass,
    })
}

/// Dijkstra with path recovery over a small adjacency list.
fn shortest_chain(
    adj: &[Vec<(u32, f64)>],
    from: usize,
    to: usize,
    dist: &mut Vec<f64>,
    prev: &mut Vec<u32>,
) -> Option<Vec<usize>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let n = adj.len();
    dist.clear();
    dist.resize(n, f64::INFINITY);
    prev.clear();
    prev.resize(n, u32::MAX);
    let mut heap: BinaryHeap<(Reverse<OrderedDist>, u32)> = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push((Reverse(OrderedDist(0.0)), from as u32));
    while let Some((Reverse(d), u)) = heap.pop() {
        let du = d.0;
        if du > dist[u as usize] {
            continue;
        }
        if u as usize == to {
            break;
        }
        for &(v, w) in &adj[u as usize] {
            let nd = du + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                prev[v as usize] = u;
                heap.push((Reverse(OrderedDist(nd)), v));
            }
        }
    }
    if dist[to].is_infinite() {
        return None;
    }
    let mut chain = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[cur] as usize;
        chain.push(cur);
    }
    chain.reverse();
    Some(chain)
}

/// Total order wrapper for nonnegative finite distances in heaps.
#[derive(PartialEq, PartialOrd)]
struct OrderedDist(f64);
impl Eq for OrderedDist {}
#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for OrderedDist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).expect("NaN distance")
    }
}

// ---------------------------------------------------------------------------
// Compact path-space graphs
// ---------------------------------------------------------------------------

/// Construction parameters of a [`CompactGraph`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphParams {
    Point,
    Interval { mesh: f64 },
    Circle { mesh: f64 },
    Sphere2 { mesh: f64 },
    Custom,
}

/// Finite weighted-graph model of a compact path metric space.
pub struct CompactGraph {
    params: GraphParams,
    n: usize,
    edges: Vec<(u32, u32, f64)>,
    adj_offsets: Vec<u32>,
    adj: Vec<(u32, f64)>,
    coords: Option<Vec<Vec<f64>>>,
    mesh: f64,
    rows: Vec<OnceLock<Box<[f64]>>>,
    diameter: OnceLock<f64>,
    fingerprint: u64,
}

impl CompactGraph {
    pub fn new(
        params: GraphParams,
        n: usize,
        edges: Vec<(u32, u32, f64)>,
        coords: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::DegenerateSpace("graph with no vertices".into()));
        }
        for &(a, b, w) in &edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::InvalidInput("edge endpoint out of range".into()));
            }
            if !(w > 0.0) && a != b {
                return Err(Error::InvalidInput("edge length must be positive".into()));
            }
        }
        let mut deg = vec![0u32; n];
        for &(a, b, _) in &edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        let mut adj_offsets = vec![0u32; n + 1];
        for i in 0..n {
            adj_offsets[i + 1] = adj_offsets[i] + deg[i];
        }
        let mut adj = vec![(0u32, 0.0f64); adj_offsets[n] as usize];
        let mut cursor = adj_offsets.clone();
        for &(a, b, w) in &edges {
            adj[cursor[a as usize] as usize] = (b, w);
            cursor[a as usize] += 1;
            adj[cursor[b as usize] as usize] = (a, w);
            cursor[b as usize] += 1;
        }
        let mesh = edges.iter().map(|e| e.2).fold(0.0, f64::max);
        let tag = serde_json::to_string(&params).unwrap_or_default();
        let mut words: Vec<u64> = tag.bytes().map(u64::from).collect();
        words.push(n as u64);
        words.push(edges.len() as u64);
        let fingerprint = mix::mix(0x4752_4150, &words);
        let graph = CompactGraph {
            params,
            n,
            edges,
            adj_offsets,
            adj,
            coords,
            mesh,
            rows: (0..n).map(|_| OnceLock::new()).collect(),
            diameter: OnceLock::new(),
            fingerprint,
        };
        // connectivity: one shortest-path sweep from vertex 0
        let row = graph.dijkstra_row(0);
        if let Some(unreached) = row.iter().position(|d| d.is_infinite()) {
            return Err(Error::Construction(format!(
                "graph disconnected: vertex {unreached} unreachable (mesh too coarse)"
            )));
        }
        Ok(graph)
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }
    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }
    pub fn coords(&self, i: usize) -> Option<&[f64]> {
        self.coords.as_ref().map(|c| c[i].as_slice())
    }

    fn dijkstra_row(&self, from: usize) -> Box<[f64]> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let mut dist = vec![f64::INFINITY; self.n].into_boxed_slice();
        let mut heap: BinaryHeap<(Reverse<OrderedDist>, u32)> = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push((Reverse(OrderedDist(0.0)), from as u32));
        while let Some((Reverse(d), u)) = heap.pop() {
            if d.0 > dist[u as usize] {
                continue;
            }
            let lo = self.adj_offsets[u as usize] as usize;
            let hi = self.adj_offsets[u as usize + 1] as usize;
            for &(v, w) in &self.adj[lo..hi] {
                let nd = d.0 + w;
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    heap.push((Reverse(OrderedDist(nd)), v));
                }
            }
        }
        dist
    }

    fn row(&self, from: usize) -> &[f64] {
        self.rows[from].get_or_init(|| self.dijkstra_row(from))
    }

    /// Max pairwise shortest-path distance; computed once on demand.
    pub fn diameter(&self) -> f64 {
        *self.diameter.get_or_init(|| {
            (0..self.n)
                .map(|i| {
                    self.dijkstra_row(i)
                        .iter()
                        .copied()
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        })
    }
}

impl MetricSpace for CompactGraph {
    fn len(&self) -> usize {
        self.n
    }
    fn norm(&self, i: usize) -> f64 {
        self.row(0)[i]
    }
    fn distance(&self, i: usize, j: usize) -> f64 {
        self.row(i)[j]
    }
    fn distance_row_into(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(self.row(i));
    }
    fn sampling_mesh(&self) -> f64 {
        self.mesh
    }
    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// One-vertex graph (degenerate compact factor).
pub fn build_point() -> CompactGraph {
    CompactGraph::new(GraphParams::Point, 1, Vec::new(), Some(vec![vec![0.0]]))
        .expect("point graph")
}

/// Graph model of `[0,1]`: `ceil(1/mesh) + 1` evenly spaced vertices.
pub fn build_interval(mesh: f64) -> Result<CompactGraph> {
    if !(mesh > 0.0 && mesh < 1.0) {
        return Err(Error::InvalidInput(
            "interval mesh must lie in (0, 1)".into(),
        ));
    }
    let segments = (1.0 / mesh).ceil() as usize;
    let n = segments + 1;
    let h = 1.0 / segments as f64;
    let edges = (0..segments)
        .map(|i| (i as u32, (i + 1) as u32, h))
        .collect();
    let coords = (0..n).map(|i| vec![i as f64 * h]).collect();
    CompactGraph::new(GraphParams::Interval { mesh }, n, edges, Some(coords))
}

/// Geodesic-graph model of the unit sphere `S^(dim-1)`:
/// - `dim == 2`: the circle, a ring of `ceil(2*pi/mesh)` vertices with exact
///   arc-length edges (path metric equals arc distance).
/// - `dim == 3`: a Fibonacci-lattice sample of `S^2` with an edge of exact
///   great-circle length between every vertex pair closer than `mesh`; the
///   dense neighborhood keeps path distortion small.
pub fn build_sphere_graph(dim: usize, mesh: f64) -> Result<CompactGraph> {
    match dim {
        2 => {
            let circumference = std::f64::consts::TAU;
            if !(mesh > 0.0 && mesh < std::f64::consts::PI) {
                return Err(Error::InvalidInput(
                    "circle mesh must lie in (0, pi)".into(),
                ));
            }
            let n = (circumference / mesh).ceil() as usize;
            let arc = circumference / n as f64;
            let edges = (0..n)
                .map(|i| (i as u32, ((i + 1) % n) as u32, arc))
                .collect();
            let coords = (0..n)
                .map(|i| {
                    let t = arc * i as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect();
            CompactGraph::new(GraphParams::Circle { mesh }, n, edges, Some(coords))
        }
        3 => {
            if !(mesh > 0.05 && mesh < std::f64::consts::PI) {
                return Err(Error::InvalidInput(
                    "sphere mesh must lie in (0.05, pi)".into(),
                ));
            }
            let n = ((95.0 / (mesh * mesh)).ceil() as usize).max(12);
            let coords: Vec<Vec<f64>> = (0..n)
                .map(|i| fibonacci_direction(i, n, 0, 0, 0))
                .collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..i {
                    let dot: f64 = coords[i]
                        .iter()
                        .zip(&coords[j])
                        .map(|(a, b)| a * b)
                        .sum();
                    let arc = dot.clamp(-1.0, 1.0).acos();
                    if arc <= mesh {
                        edges.push((j as u32, i as u32, arc));
                    }
                }
            }
            CompactGraph::new(GraphParams::Sphere2 { mesh }, n, edges, Some(coords))
        }
        _ => Err(Error::InvalidInput(format!(
            "sphere graph supports dim 2 and 3, got {dim}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

pub const SPACE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct SpaceDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub params: SpaceParams,
    pub base_point: usize,
    pub points: Vec<PointDocument>,
}

#[derive(Serialize, Deserialize)]
pub struct PointDocument {
    pub id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
    pub norm: f64,
}

impl SampledSpace {
    pub fn to_document(&self) -> SpaceDocument {
        SpaceDocument {
            schema_version: SPACE_SCHEMA_VERSION,
            params: self.params.clone(),
            base_point: self.base,
            points: (0..self.n)
                .map(|i| PointDocument {
                    id: i,
                    coords: if self.has_coords() {
                        Some(self.coords(i).to_vec())
                    } else {
                        None
                    },
                    norm: self.norms[i],
                })
                .collect(),
        }
    }

    /// Rebuilds the space from the document parameters (distances are always
    /// recomputed, never deserialized) and cross-checks the stored points.
    pub fn from_document(doc: &SpaceDocument) -> Result<SampledSpace> {
        if doc.schema_version != SPACE_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "schema version {} unsupported (expected {SPACE_SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        let space = match doc.params {
            SpaceParams::HalfLine { n_max, step } => build_halfline(n_max, step)?,
            SpaceParams::EuclideanGrid {
                dim,
                max_radius,
                density,
                seed,
            } => build_euclidean_grid(dim, max_radius, density, seed)?,
            SpaceParams::RandomCloud {
                dim,
                n_points,
                max_radius,
                seed,
            } => build_random_cloud(dim, n_points, max_radius, seed)?,
            SpaceParams::Custom => {
                let dim = doc
                    .points
                    .first()
                    .and_then(|p| p.coords.as_ref())
                    .map(Vec::len)
                    .ok_or_else(|| {
                        Error::Schema("custom document without coordinates".into())
                    })?;
                let mut coords = Vec::with_capacity(doc.points.len() * dim);
                for p in &doc.points {
                    let c = p.coords.as_ref().ok_or_else(|| {
                        Error::Schema(format!("point {} lacks coordinates", p.id))
                    })?;
                    coords.extend_from_slice(c);
                }
                SampledSpace::from_coords(
                    SpaceParams::Custom,
                    dim,
                    coords,
                    doc.base_point,
                    1.0,
                    NeighborRule::WithinScaledRadius { factor: 2.0 },
                )?
            }
        };
        if space.len() != doc.points.len() || space.base_point() != doc.base_point {
            return Err(Error::Schema("document does not match rebuilt space".into()));
        }
        for p in &doc.points {
            if (space.norm(p.id) - p.norm).abs() > 1e-9 {
                return Err(Error::Schema(format!(
                    "norm mismatch at point {}: {} vs {}",
                    p.id,
                    space.norm(p.id),
                    p.norm
                )));
            }
        }
        Ok(space)
    }
}
