//! The Euclidean cone of a compact path space and a sampled unbounded space,
//! realized as a weighted product graph.
//!
//! Vertices are pairs `(p, x)`. Two edge families generate all paths:
//!
//! - a P-move `(p,x) -> (p',x)` along a P-edge costs `max(1, |x|) * len`,
//! - an X-move `(p,x) -> (p,x')` between neighboring samples costs `d_X(x,x')`.
//!
//! A mixed move decomposes into the two families at no extra cost, so the
//! graph shortest-path metric upper-bounds the continuum cone metric and
//! converges under mesh refinement (finer graphs only add paths). The edge
//! weights are exactly the summands of the finite-sequence length formula,
//! which [`polyline_length`] evaluates for arbitrary vertex sequences.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spaces::{CompactGraph, MetricSpace, NeighborRule, SampledSpace};

/// Caps for product construction and the per-source row cache.
#[derive(Clone, Copy, Debug)]
pub struct ConeConfig {
    pub vertex_cap: usize,
    pub row_cache_cap: usize,
}

impl Default for ConeConfig {
    fn default() -> Self {
        ConeConfig {
            vertex_cap: 200_000,
            row_cache_cap: 4_096,
        }
    }
}

/// Product vertex set `P x X` with the cone edge-weight rule and per-source
/// cached shortest-path distances.
///
/// Vertex ids flatten the product as `x * n_p + p`.
pub struct ConeSpace {
    p: CompactGraph,
    x: SampledSpace,
    n_p: usize,
    n_x: usize,
    adj_offsets: Vec<u32>,
    adj: Vec<(u32, f64)>,
    norms: Vec<f64>,
    rows: Vec<OnceLock<Arc<[f64]>>>,
    cache_rows: bool,
    fingerprint: u64,
}

impl ConeSpace {
    pub fn p_space(&self) -> &CompactGraph {
        &self.p
    }
    pub fn x_space(&self) -> &SampledSpace {
        &self.x
    }
    pub fn n_p(&self) -> usize {
        self.n_p
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    /// Base vertex `(p_0, e)`.
    pub fn base_vertex(&self) -> usize {
        self.vertex(0, self.x.base_point())
    }
    #[inline]
    pub fn vertex(&self, p: usize, x: usize) -> usize {
        x * self.n_p + p
    }
    #[inline]
    pub fn p_of(&self, v: usize) -> usize {
        v % self.n_p
    }
    #[inline]
    pub fn x_of(&self, v: usize) -> usize {
        v / self.n_p
    }
    /// Norm of the X-component of a vertex.
    #[inline]
    pub fn x_norm(&self, v: usize) -> f64 {
        self.x.norm(self.x_of(v))
    }

    /// Discretization budget for inequality checks: one X-mesh plus one
    /// P-mesh scaled by the largest norm.
    pub fn default_tolerance(&self) -> f64 {
        self.x.sampling_mesh() + self.p.sampling_mesh() * self.x.max_norm().max(1.0)
    }

    fn dijkstra_row(&self, from: usize) -> Box<[f64]> {
        let n = self.adj_offsets.len() - 1;
        let mut dist = vec![f64::INFINITY; n].into_boxed_slice();
        let mut heap: BinaryHeap<(Reverse<HeapDist>, u32)> = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push((Reverse(HeapDist(0.0)), from as u32));
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
                    heap.push((Reverse(HeapDist(nd)), v));
                }
            }
        }
        dist
    }

    /// Row of distances from `from`; cached when the product is small enough.
    pub fn distance_row(&self, from: usize) -> Arc<[f64]> {
        if self.cache_rows {
            self.rows[from]
                .get_or_init(|| Arc::from(self.dijkstra_row(from)))
                .clone()
        } else {
            Arc::from(self.dijkstra_row(from))
        }
    }

    /// Point query with early termination once the target is settled.
    pub fn distance_pair(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return 0.0;
        }
        if self.cache_rows {
            if let Some(row) = self.rows[from].get() {
                return row[to];
            }
        }
        let n = self.adj_offsets.len() - 1;
        let mut dist = vec![f64::INFINITY; n];
        let mut heap: BinaryHeap<(Reverse<HeapDist>, u32)> = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push((Reverse(HeapDist(0.0)), from as u32));
        while let Some((Reverse(d), u)) = heap.pop() {
            if d.0 > dist[u as usize] {
                continue;
            }
            if u as usize == to {
                return d.0;
            }
            let lo = self.adj_offsets[u as usize] as usize;
            let hi = self.adj_offsets[u as usize + 1] as usize;
            for &(v, w) in &self.adj[lo..hi] {
                let nd = d.0 + w;
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    heap.push((Reverse(HeapDist(nd)), v));
                }
            }
        }
        f64::INFINITY
    }
}

#[derive(PartialEq, PartialOrd)]
struct HeapDist(f64);
impl Eq for HeapDist {}
#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for HeapDist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).expect("NaN distance")
    }
}

impl MetricSpace for ConeSpace {
    fn len(&self) -> usize {
        self.norms.len()
    }
    fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }
    fn distance(&self, i: usize, j: usize) -> f64 {
        if self.cache_rows {
            self.distance_row(i)[j]
        } else {
            self.distance_pair(i, j)
        }
    }
    fn distance_row_into(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(&self.distance_row(i));
    }
    fn sampling_mesh(&self) -> f64 {
        self.x.sampling_mesh().max(self.p.sampling_mesh())
    }
    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
    fn random_access_distance(&self) -> bool {
        self.cache_rows
    }
}

/// Builds the product graph with the two cone edge families. The base vertex
/// is `(vertex 0 of P, base point of X)`.
pub fn build_cone(p: CompactGraph, x: SampledSpace, rule: NeighborRule) -> Result<ConeSpace> {
    build_cone_with(p, x, rule, ConeConfig::default())
}

pub fn build_cone_with(
    p: CompactGraph,
    x: SampledSpace,
    rule: NeighborRule,
    config: ConeConfig,
) -> Result<ConeSpace> {
    let n_p = p.len();
    let n_x = x.len();
    let n = n_p
        .checked_mul(n_x)
        .ok_or_else(|| Error::ResourceCap {
            what: "cone vertex count".into(),
            required: usize::MAX,
            cap: config.vertex_cap,
        })?;
    if n > config.vertex_cap {
        return Err(Error::ResourceCap {
            what: "cone vertex count".into(),
            required: n,
            cap: config.vertex_cap,
        });
    }
    if x.base_point() >= n_x {
        return Err(Error::InvalidInput("X base point out of range".into()));
    }

    // X neighbor pairs under the sampling-scale rule
    let mut x_pairs: Vec<(u32, u32, f64)> = Vec::new();
    for i in 0..n_x {
        for j in 0..i {
            let d = x.distance(i, j);
            if d > 0.0 && rule.connects(d, x.norm(i), x.norm(j)) {
                x_pairs.push((j as u32, i as u32, d));
            }
        }
    }

    let vertex = |pp: usize, xx: usize| (xx * n_p + pp) as u32;
    let mut degree = vec![0u32; n];
    let bump = |a: u32, b: u32, deg: &mut Vec<u32>| {
        deg[a as usize] += 1;
        deg[b as usize] += 1;
    };
    for xi in 0..n_x {
        for &(a, b, _) in p.edges() {
            bump(vertex(a as usize, xi), vertex(b as usize, xi), &mut degree);
        }
    }
    for pi in 0..n_p {
        for &(a, b, _) in &x_pairs {
            bump(vertex(pi, a as usize), vertex(pi, b as usize), &mut degree);
        }
    }
    let mut adj_offsets = vec![0u32; n + 1];
    for i in 0..n {
        adj_offsets[i + 1] = adj_offsets[i] + degree[i];
    }
    let mut adj = vec![(0u32, 0.0f64); adj_offsets[n] as usize];
    let mut cursor: Vec<u32> = adj_offsets[..n].to_vec();
    let put = |a: u32, b: u32, w: f64, adj: &mut Vec<(u32, f64)>, cur: &mut Vec<u32>| {
        adj[cur[a as usize] as usize] = (b, w);
        cur[a as usize] += 1;
        adj[cur[b as usize] as usize] = (a, w);
        cur[b as usize] += 1;
    };
    // P-moves at fixed x: weight max(1, |x|) * edge length
    for xi in 0..n_x {
        let scale = x.norm(xi).max(1.0);
        for &(a, b, len) in p.edges() {
            put(
                vertex(a as usize, xi),
                vertex(b as usize, xi),
                scale * len,
                &mut adj,
                &mut cursor,
            );
        }
    }
    // X-moves at fixed p: weight d_X
    for pi in 0..n_p {
        for &(a, b, d) in &x_pairs {
            put(
                vertex(pi, a as usize),
                vertex(pi, b as usize),
                d,
                &mut adj,
                &mut cursor,
            );
        }
    }

    let fingerprint = crate::mix::mix(
        0x434f_4e45,
        &[p.fingerprint(), x.fingerprint(), n as u64],
    );
    let cache_rows = n <= config.row_cache_cap;
    let mut cone = ConeSpace {
        p,
        x,
        n_p,
        n_x,
        adj_offsets,
        adj,
        norms: Vec::new(),
        rows: (0..if cache_rows { n } else { 0 })
            .map(|_| OnceLock::new())
            .collect(),
        cache_rows,
        fingerprint,
    };
    let base = cone.vertex(0, cone.x.base_point());
    let base_row = cone.dijkstra_row(base);
    if let Some(unreached) = base_row.iter().position(|d| d.is_infinite()) {
        return Err(Error::Construction(format!(
            "cone disconnected: vertex {unreached} unreachable from the base \
             (X sample disconnected at its scale?)"
        )));
    }
    // base vertex must be id 0 for norm! re-index not needed: base = (0, base_x);
    // if base_x != 0 the base vertex id is nonzero, so store norms explicitly.
    cone.norms = base_row.into_vec();
    Ok(cone)
}

/// Finite-sequence length of a polyline of product vertices:
/// `sum_j d_X(x_j, x_{j+1}) + max(1, |x_j|, |x_{j+1}|) * d_P(p_j, p_{j+1})`.
/// Consecutive points need not be adjacent; distances are metric closed
/// forms (X) and graph shortest paths (P).
pub fn polyline_length(cone: &ConeSpace, points: &[(usize, usize)]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidInput("empty polyline".into()));
    }
    for &(p, x) in points {
        if p >= cone.n_p() || x >= cone.n_x() {
            return Err(Error::InvalidInput(format!(
                "polyline point ({p},{x}) out of range"
            )));
        }
    }
    let mut total = 0.0;
    for w in points.windows(2) {
        let (p0, x0) = w[0];
        let (p1, x1) = w[1];
        let nx0 = cone.x_space().norm(x0);
        let nx1 = cone.x_space().norm(x1);
        total += cone.x_space().distance(x0, x1)
            + nx0.max(nx1).max(1.0) * cone.p_space().distance(p0, p1);
    }
    Ok(total)
}

/// Shortest-path distance between product vertices `a = (p, x)`.
pub fn cone_distance(cone: &ConeSpace, a: (usize, usize), b: (usize, usize)) -> Result<f64> {
    if a.0 >= cone.n_p() || a.1 >= cone.n_x() || b.0 >= cone.n_p() || b.1 >= cone.n_x() {
        return Err(Error::InvalidInput("cone vertex out of range".into()));
    }
    let va = cone.vertex(a.0, a.1);
    let vb = cone.vertex(b.0, b.1);
    let d = cone.distance_pair(va, vb);
    if d.is_infinite() {
        return Err(Error::Connectivity { from: va, to: vb });
    }
    Ok(d)
}

/// Result of checking the product lower bound beyond radius `R`.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub radius: f64,
    pub tolerance: f64,
    pub pairs_checked: u64,
    /// Worst excess of `d_X + R * d_P` over `d_cone + tol` (positive = fail).
    pub weakened_worst_margin: f64,
    pub weakened_witness: Option<((usize, usize), (usize, usize))>,
    pub weakened_pass: bool,
    /// Worst excess of `d_X + |x| * d_P` over `d_cone` (recorded, not
    /// asserted; paths may dip below the norm of the first argument).
    pub literal_worst_margin: f64,
    pub literal_witness: Option<((usize, usize), (usize, usize))>,
}

/// Exhaustively checks, over vertex pairs whose X-norms both exceed `R`,
/// the weakened inequality `d_X(x,x') + R * d_P(p,p') <= d_cone + tol`, and
/// records (without asserting) the margin of the literal `|x|`-weighted
/// version.
pub fn verify_lower_bound(cone: &ConeSpace, r: f64, tolerance: f64) -> Result<LowerBoundReport> {
    if r >= cone.x_space().max_norm() {
        return Err(Error::EmptyScale {
            scale: r,
            needed: 2,
        });
    }
    let outside: Vec<usize> = cone.x_space().ids_outside(r);
    if outside.len() < 2 {
        return Err(Error::EmptyScale {
            scale: r,
            needed: 2,
        });
    }
    let n_p = cone.n_p();
    let mut pairs = 0u64;
    let mut weak_worst = f64::NEG_INFINITY;
    let mut weak_wit = None;
    let mut lit_worst = f64::NEG_INFINITY;
    let mut lit_wit = None;
    for (ai, &xa) in outside.iter().enumerate() {
        for pa in 0..n_p {
            let va = cone.vertex(pa, xa);
            let row = cone.distance_row(va);
            let norm_xa = cone.x_space().norm(xa);
            for &xb in &outside[ai..] {
                for pb in 0..n_p {
                    let vb = cone.vertex(pb, xb);
                    if vb <= va {
                        continue;
                    }
                    pairs += 1;
                    let d_cone = row[vb];
                    let d_x = cone.x_space().distance(xa, xb);
                    let d_p = cone.p_space().distance(pa, pb);
                    let weak = d_x + r * d_p - d_cone - tolerance;
                    if weak > weak_worst {
                        weak_worst = weak;
                        weak_wit = Some(((pa, xa), (pb, xb)));
                    }
                    // literal version, both orientations of |x|
                    let norm_xb = cone.x_space().norm(xb);
                    let lit = (d_x + norm_xa.max(norm_xb) * d_p) - d_cone;
                    if lit > lit_worst {
                        lit_worst = lit;
                        lit_wit = Some(((pa, xa), (pb, xb)));
                    }
                }
            }
        }
    }
    Ok(LowerBoundReport {
        radius: r,
        tolerance,
        pairs_checked: pairs,
        weakened_worst_margin: weak_worst,
        weakened_witness: weak_wit,
        weakened_pass: weak_worst <= 0.0,
        literal_worst_margin: lit_worst,
        literal_witness: lit_wit,
    })
}

// ---------------------------------------------------------------------------
// Refinement convergence
// ---------------------------------------------------------------------------

/// Nested compact-factor families (vertex sets double, coarse vertices map
/// to even fine vertices).
#[derive(Clone, Copy, Debug, Serialize)]
pub enum PFamily {
    Point,
    /// `[0,1]` with `segments0 * 2^level` segments.
    Interval { segments0: usize },
    /// Circle with `n0 * 2^level` vertices.
    Circle { n0: usize },
}

/// Nested unbounded-factor family: the half-line `[0, n_max0 * step0]` with
/// step `step0 / 2^level`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct XFamily {
    pub n_max0: usize,
    pub step0: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementLevel {
    pub level: usize,
    pub p_mesh: f64,
    pub x_mesh: f64,
    pub vertices: usize,
    pub probe_distances: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub levels: Vec<RefinementLevel>,
    /// `d_level - d_{level-1}` per probe per level transition.
    pub successive_diffs: Vec<Vec<f64>>,
    pub monotone_nonincreasing: bool,
    /// Relative change per probe at the final transition.
    pub final_rel_change: Vec<f64>,
    pub incomplete: bool,
}

fn build_p_family(p: PFamily, level: usize) -> Result<CompactGraph> {
    match p {
        PFamily::Point => Ok(crate::spaces::build_point()),
        PFamily::Interval { segments0 } => {
            let segs = segments0 << level;
            crate::spaces::build_interval(1.0 / segs as f64 + f64::EPSILON)
        }
        PFamily::Circle { n0 } => {
            let n = n0 << level;
            // mesh chosen so ceil(tau/mesh) == n exactly
            crate::spaces::build_sphere_graph(2, std::f64::consts::TAU / n as f64)
        }
    }
}

/// Recomputes a fixed probe set of cone distances at successively halved
/// meshes. Probes are given as coarse-level index pairs `((p, x), (p', x'))`
/// and mapped to `2^level` multiples at finer levels.
pub fn refinement_convergence(
    p: PFamily,
    x: XFamily,
    levels: usize,
    probes: &[((usize, usize), (usize, usize))],
    config: ConeConfig,
) -> Result<RefinementReport> {
    if levels < 2 {
        return Err(Error::InvalidInput("levels must be >= 2".into()));
    }
    let mut out_levels: Vec<RefinementLevel> = Vec::new();
    let mut incomplete = false;
    for level in 0..levels {
        let p_graph = build_p_family(p, level)?;
        let x_space =
            crate::spaces::build_halfline(x.n_max0 << level, x.step0 / (1 << level) as f64)?;
        let rule = x_space.neighbor_rule();
        let cone = match build_cone_with(p_graph, x_space, rule, config) {
            Ok(c) => c,
            Err(Error::ResourceCap { .. }) => {
                incomplete = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let scale = 1usize << level;
        let mut dists = Vec::with_capacity(probes.len());
        for &((pa, xa), (pb, xb)) in probes {
            let map_p = |idx: usize| match p {
                PFamily::Point => 0,
                _ => idx * scale,
            };
            let d = cone_distance(&cone, (map_p(pa), xa * scale), (map_p(pb), xb * scale))?;
            dists.push(d);
        }
        out_levels.push(RefinementLevel {
            level,
            p_mesh: out_level_mesh(&cone),
            x_mesh: cone.x_space().sampling_mesh(),
            vertices: cone.len(),
            probe_distances: dists,
        });
    }
    let mut diffs = Vec::new();
    let mut monotone = true;
    for w in out_levels.windows(2) {
        let d: Vec<f64> = w[1]
            .probe_distances
            .iter()
            .zip(&w[0].probe_distances)
            .map(|(fine, coarse)| fine - coarse)
            .collect();
        if d.iter().any(|&x| x > 1e-9) {
            monotone = false;
        }
        diffs.push(d);
    }
    let final_rel_change = match out_levels.len() {
        0 | 1 => Vec::new(),
        m => out_levels[m - 1]
            .probe_distances
            .iter()
            .zip(&out_levels[m - 2].probe_distances)
            .map(|(fine, coarse)| {
                if *coarse == 0.0 {
                    0.0
                } else {
                    (fine - coarse).abs() / coarse
                }
            })
            .collect(),
    };
    Ok(RefinementReport {
        levels: out_levels,
        successive_diffs: diffs,
        monotone_nonincreasing: monotone,
        final_rel_change,
        incomplete,
    })
}

fn out_level_mesh(cone: &ConeSpace) -> f64 {
    cone.p_space().sampling_mesh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{build_halfline, build_interval, build_point};

    fn halfline_cone(n: usize) -> ConeSpace {
        let x = build_halfline(n, 1.0).unwrap();
        let rule = x.neighbor_rule();
        build_cone(build_point(), x, rule).unwrap()
    }

    #[test]
    fn degenerate_p_reduces_to_x_metric() {
        let cone = halfline_cone(40);
        for i in 0..=40 {
            for j in 0..=40 {
                let d = cone_distance(&cone, (0, i), (0, j)).unwrap();
                assert_eq!(d, (i as f64 - j as f64).abs());
            }
        }
    }

    #[test]
    fn degenerate_x_reduces_to_p_metric() {
        // X = {e} only: a half-line with one step collapsed; use n_max = 1
        // with tiny step so both points sit in the core.
        let x = crate::spaces::SampledSpace::from_coords(
            crate::spaces::SpaceParams::Custom,
            1,
            vec![0.0],
            0,
            1.0,
            NeighborRule::WithinRadius { radius: 1.0 },
        )
        .unwrap();
        let p = build_interval(0.25).unwrap();
        let cone = build_cone(p, x, NeighborRule::WithinRadius { radius: 1.0 }).unwrap();
        // d_cone = max(1, 0) * d_P = d_P
        let d = cone_distance(&cone, (0, 0), (4, 0)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polyline_examples() {
        let x = build_halfline(20, 1.0).unwrap();
        let rule = x.neighbor_rule();
        let p = build_interval(0.5).unwrap();
        let cone = build_cone(p, x, rule).unwrap();
        // single point
        assert_eq!(polyline_length(&cone, &[(0, 5)]).unwrap(), 0.0);
        // P-move at fixed x with norm 10 and d_P = 0.5 costs 5.0
        let l = polyline_length(&cone, &[(0, 10), (1, 10)]).unwrap();
        assert!((l - 5.0).abs() < 1e-12);
        // X-move at fixed p from norm 3 to norm 7 costs 4
        let l = polyline_length(&cone, &[(0, 3), (0, 7)]).unwrap();
        assert!((l - 4.0).abs() < 1e-12);
        assert!(polyline_length(&cone, &[]).is_err());
    }

    #[test]
    fn polyline_dominates_distance() {
        let x = build_halfline(24, 1.0).unwrap();
        let rule = x.neighbor_rule();
        let p = build_interval(0.25).unwrap();
        let cone = build_cone(p, x, rule).unwrap();
        // any explicit polyline upper-bounds the shortest-path distance
        let poly = [(0, 20), (0, 10), (2, 10), (2, 18), (4, 18)];
        let len = polyline_length(&cone, &poly).unwrap();
        let d = cone_distance(&cone, poly[0], poly[4]).unwrap();
        assert!(d <= len + 1e-12);
        // subdividing a constant-level leg preserves the length exactly
        // (subdividing through lower norms can shorten the sum: the per-leg
        // max-norm weight drops, which is what dipping paths exploit)
        let coarse = [(0usize, 20usize), (4, 20)];
        let finer = [(0usize, 20usize), (2, 20), (4, 20)];
        let l0 = polyline_length(&cone, &coarse).unwrap();
        let l1 = polyline_length(&cone, &finer).unwrap();
        assert!((l0 - l1).abs() <= 1e-12);
    }

    #[test]
    fn cone_distance_dominates_x_distance() {
        let x = build_halfline(30, 1.0).unwrap();
        let rule = x.neighbor_rule();
        let p = build_interval(0.25).unwrap();
        let cone = build_cone(p, x, rule).unwrap();
        for v in 0..cone.len() {
            let row = cone.distance_row(v);
            for w in 0..cone.len() {
                let dx = cone
                    .x_space()
                    .distance(cone.x_of(v), cone.x_of(w));
                assert!(row[w] + 1e-12 >= dx, "d_cone >= d_X violated");
            }
        }
    }

    #[test]
    fn dip_through_base_beats_high_level_move() {
        // interval of length 3 modeled by 3 unit segments over [0,1] scaled:
        // use interval [0,1] with mesh 1/3 and beam x = 20; d_P(0,1) = 1,
        // but the relevant check is the dip structure with d_P = 3 emulated
        // by three cone P-edges; here we just confirm the graph picks a dip
        // when rotating is too expensive: cost across at level 20 is 20 * 1,
        // dip to level r costs 2(20 - r) + max(1, r) * 1.
        let x = build_halfline(20, 1.0).unwrap();
        let rule = x.neighbor_rule();
        let p = build_interval(0.5).unwrap(); // d_P(0, 2) = 1.0
        let cone = build_cone(p, x, rule).unwrap();
        let d = cone_distance(&cone, (0, 20), (2, 20)).unwrap();
        // brute-force over dip depths on the discrete graph
        let mut best = f64::INFINITY;
        for r in 0..=20u32 {
            let depth = 20.0 - r as f64;
            best = best.min(2.0 * depth + (r as f64).max(1.0) * 1.0);
        }
        assert!((d - best).abs() < 1e-9, "graph {d} vs brute force {best}");
    }

    #[test]
    fn norm_one_shell_clamps_weight() {
        let x = build_halfline(8, 1.0).unwrap();
        let rule = x.neighbor_rule();
        let p = build_interval(0.25).unwrap();
        let cone = build_cone(p, x, rule).unwrap();
        // at |x| = 1 a P-move weighs max(1,1) * d_P = d_P
        let d = cone_distance(&cone, (0, 1), (4, 1)).unwrap();
        assert!(d <= 1.0 + 1e-12);
        assert!(d >= 1.0 - cone.p_space().sampling_mesh() - 1e-12);
    }

    #[test]
    fn lower_bound_weakened_passes() {
        let x = build_halfline(32, 1.0).unwrap();
        let rule = x.neighbor_rule();
        let p = build_interval(0.25).unwrap();
        let cone = build_cone(p, x, rule).unwrap();
        let tol = cone.default_tolerance();
        let rep = verify_lower_bound(&cone, 4.0, tol).unwrap();
        assert!(rep.weakened_pass, "weakened bound failed: {rep:?}");
        assert!(rep.pairs_checked > 0);
    }

    #[test]
    fn lower_bound_empty_scale() {
        let x = build_halfline(8, 1.0).unwrap();
        let rule = x.neighbor_rule();
        let cone = build_cone(build_point(), x, rule).unwrap();
        assert!(matches!(
            verify_lower_bound(&cone, 8.0, 0.1),
            Err(Error::EmptyScale { .. })
        ));
    }

    #[test]
    fn resource_cap_reported() {
        let x = build_halfline(2000, 1.0).unwrap();
        let rule = x.neighbor_rule();
        let p = build_interval(0.005).unwrap();
        let result = build_cone_with(
            p,
            x,
            rule,
            ConeConfig {
                vertex_cap: 1000,
                row_cache_cap: 100,
            },
        );
        assert!(matches!(result.err(), Some(Error::ResourceCap { .. })));
    }

    #[test]
    fn refinement_degenerate_p_zero_diffs() {
        let rep = refinement_convergence(
            PFamily::Point,
            XFamily {
                n_max0: 16,
                step0: 1.0,
            },
            3,
            &[((0, 2), (0, 9))],
            ConeConfig::default(),
        )
        .unwrap();
        assert!(rep.monotone_nonincreasing);
        for diffs in &rep.successive_diffs {
            for d in diffs {
                assert!(d.abs() < 1e-9, "degenerate P must not change distances");
            }
        }
    }

    #[test]
    fn refinement_circle_cone_diffs_decrease() {
        // step 0.75 misses the clamp level 1, so finer meshes find better
        // dips and the probe distance strictly improves, less each level
        let rep = refinement_convergence(
            PFamily::Circle { n0: 8 },
            XFamily {
                n_max0: 26,
                step0: 0.75,
            },
            3,
            &[((0, 26), (4, 26))],
            ConeConfig::default(),
        )
        .unwrap();
        assert!(rep.monotone_nonincreasing);
        let d01 = -rep.successive_diffs[0][0];
        let d12 = -rep.successive_diffs[1][0];
        assert!(d01 > 1e-6, "no improvement at level 1: {rep:?}");
        assert!(d12 < d01, "differences must shrink: {d01} then {d12}");
    }

    #[test]
    fn refinement_monotone_on_interval_cone() {
        let rep = refinement_convergence(
            PFamily::Interval { segments0: 2 },
            XFamily {
                n_max0: 24,
                step0: 1.0,
            },
            3,
            &[((0, 20), (2, 20)), ((0, 8), (1, 16))],
            ConeConfig::default(),
        )
        .unwrap();
        assert!(rep.monotone_nonincreasing, "{rep:?}");
        for rc in &rep.final_rel_change {
            assert!(*rc < 0.05, "final level change {rc} >= 5%");
        }
    }
}
