//! Maps between samples: large-scale Lipschitz ("coarse") verification,
//! sublinear closeness, positive-determinant matrix paths, cone homotopies,
//! and the coarse equivalence between a cone over the sphere and the plane.
//!
//! A map stores one codomain target per domain point. Targets produced by
//! snapping a continuum image to the nearest sample carry their recorded
//! displacement, and every verdict tolerates exactly that term: a condition
//! like `d(f(x), f(x')) <= A d(x,x') + A` is checked with the two snapping
//! displacements added to the right-hand side, so it holds for the snapped
//! proxy precisely when it holds for the underlying continuum map.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::ConeSpace;
use crate::error::{Error, Result};
use crate::functions::{loglog_slope, SampledFunction, SweepConfig};
use crate::spaces::{annulus_index, MetricSpace, SampledSpace};

/// Finite assignment of codomain sample points to domain sample points.
#[derive(Clone, Debug)]
pub struct SampledMap {
    domain_fp: u64,
    codomain_fp: u64,
    targets: Vec<usize>,
    displacements: Vec<f64>,
}

impl SampledMap {
    pub fn from_ids(
        domain: &impl MetricSpace,
        codomain: &impl MetricSpace,
        targets: Vec<usize>,
    ) -> Result<Self> {
        if targets.len() != domain.len() {
            return Err(Error::InvalidInput(format!(
                "{} targets for {} domain points",
                targets.len(),
                domain.len()
            )));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= codomain.len()) {
            return Err(Error::InvalidInput(format!(
                "target {bad} outside the codomain sample"
            )));
        }
        let n = targets.len();
        Ok(SampledMap {
            domain_fp: domain.fingerprint(),
            codomain_fp: codomain.fingerprint(),
            targets,
            displacements: vec![0.0; n],
        })
    }

    /// Snaps raw coordinates to the nearest codomain sample point and
    /// records each displacement.
    pub fn from_coords(
        domain: &impl MetricSpace,
        codomain: &SampledSpace,
        raw: impl Fn(usize) -> Vec<f64>,
    ) -> Self {
        let mut targets = Vec::with_capacity(domain.len());
        let mut displacements = Vec::with_capacity(domain.len());
        for i in 0..domain.len() {
            let coord = raw(i);
            let (id, d) = codomain.nearest_point(&coord);
            targets.push(id);
            displacements.push(d);
        }
        SampledMap {
            domain_fp: domain.fingerprint(),
            codomain_fp: codomain.fingerprint(),
            targets,
            displacements,
        }
    }

    /// Explicit targets with caller-computed snapping displacements (used
    /// for graph-metric codomains, where the displacement is a polyline
    /// upper bound rather than a Euclidean distance).
    pub fn from_snapped(
        domain: &impl MetricSpace,
        codomain: &impl MetricSpace,
        targets: Vec<usize>,
        displacements: Vec<f64>,
    ) -> Result<Self> {
        let mut map = Self::from_ids(domain, codomain, targets)?;
        if displacements.len() != map.targets.len() {
            return Err(Error::InvalidInput("displacement count mismatch".into()));
        }
        map.displacements = displacements;
        Ok(map)
    }

    pub fn identity(space: &impl MetricSpace) -> Self {
        SampledMap {
            domain_fp: space.fingerprint(),
            codomain_fp: space.fingerprint(),
            targets: (0..space.len()).collect(),
            displacements: vec![0.0; space.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }
    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
    #[inline]
    pub fn target(&self, i: usize) -> usize {
        self.targets[i]
    }
    #[inline]
    pub fn displacement(&self, i: usize) -> f64 {
        self.displacements[i]
    }
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }
    pub fn domain_fingerprint(&self) -> u64 {
        self.domain_fp
    }
    pub fn codomain_fingerprint(&self) -> u64 {
        self.codomain_fp
    }
    pub fn max_displacement(&self) -> f64 {
        self.displacements.iter().copied().fold(0.0, f64::max)
    }

    /// `g . f` through the snapped intermediate sample; displacements add.
    pub fn compose(f: &SampledMap, g: &SampledMap) -> Result<SampledMap> {
        if f.codomain_fp != g.domain_fp {
            return Err(Error::InvalidInput(
                "composition: codomain of f differs from domain of g".into(),
            ));
        }
        Ok(SampledMap {
            domain_fp: f.domain_fp,
            codomain_fp: g.codomain_fp,
            targets: f.targets.iter().map(|&t| g.targets[t]).collect(),
            displacements: f
                .targets
                .iter()
                .zip(&f.displacements)
                .map(|(&t, &d)| d + g.displacements[t])
                .collect(),
        })
    }
}

/// Pullback `phi . f` of a codomain function along a map.
pub fn pull_back(
    phi: &SampledFunction,
    map: &SampledMap,
    domain: &impl MetricSpace,
) -> Result<SampledFunction> {
    if phi.space_fingerprint() != map.codomain_fingerprint() {
        return Err(Error::InvalidInput(
            "pullback: function lives on a different space".into(),
        ));
    }
    SampledFunction::new(domain, map.targets().iter().map(|&t| phi.value(t)).collect())
}

// ---------------------------------------------------------------------------
// Coarse-map verification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct CoarseConfig {
    /// Grid resolution of the reported minimal constant.
    pub resolution: f64,
    /// Constants above this cap mean "not coarse on the sample".
    pub max_a: f64,
    /// Log-log growth of per-annulus requirements above this slope means the
    /// conditions fail at large norm (finite rendering of "eventually").
    pub growth_slope_threshold: f64,
    pub sweep: SweepConfig,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        CoarseConfig {
            resolution: 1e-3,
            max_a: 1e6,
            growth_slope_threshold: 0.1,
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseVerdict {
    Coarse,
    NotCoarse,
}

/// Minimal constant report for the two coarse-map conditions.
#[derive(Clone, Debug, Serialize)]
pub struct CoarseMapReport {
    /// Minimal `A >= 1` (at the configured resolution) such that
    /// `|f(x)| >= |x|/A - A` and `d(f(x),f(x')) <= A d(x,x') + A` hold on
    /// every sampled point and pair, within snapping displacements.
    pub a_lower: f64,
    /// Requirement forced by the norm-growth condition, with its witness.
    pub growth_requirement: f64,
    pub growth_witness: Option<usize>,
    /// Requirement forced by the pair condition, with its witness.
    pub pair_requirement: f64,
    pub pair_witness: Option<(usize, usize)>,
    /// Max requirement per domain annulus (finite "eventually" profile).
    pub per_annulus_requirement: Vec<(i32, f64)>,
    pub growth_slope: f64,
    pub verdict: CoarseVerdict,
    pub pair_coverage: f64,
}

/// Computes the minimal constant for both conditions in one row sweep. Both
/// conditions are monotone in `A`, so the per-constraint minimal constants
/// (`A^2 + |f(x)| A - |x| >= 0` solved for the growth side, a ratio for the
/// pair side) have closed forms and their maximum, rounded up to the
/// resolution grid, is the value a bracketed bisection would return.
///
/// The growth condition is exact over all points. The pair condition is
/// exact over all pairs up to the sweep's point cap; beyond it the sweep
/// visits a stratified source subset (full rows each), reporting coverage.
pub fn coarse_constant(
    map: &SampledMap,
    domain: &(impl MetricSpace + ?Sized),
    codomain: &(impl MetricSpace + ?Sized),
    cfg: &CoarseConfig,
) -> Result<CoarseMapReport> {
    check_map(map, domain, codomain)?;
    let n = domain.len();
    // growth condition per point, exact
    let mut growth_req = 1.0f64;
    let mut growth_wit = None;
    let mut annulus_req: std::collections::BTreeMap<i32, f64> = Default::default();
    for x in 0..n {
        let b = codomain.norm(map.target(x)) + map.displacement(x);
        let need = 0.5 * (-b + (b * b + 4.0 * domain.norm(x)).sqrt());
        let k = annulus_index(domain.norm(x));
        let e = annulus_req.entry(k).or_insert(1.0);
        *e = e.max(need);
        if need > growth_req {
            growth_req = need;
            growth_wit = Some(x);
        }
    }

    // pair condition: one row sweep over (possibly subsampled) sources
    let exact = n <= cfg.sweep.exact_point_cap;
    let sources: Vec<usize> = if exact {
        (0..n).collect()
    } else {
        let mut strata: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
        for i in 0..n {
            strata
                .entry(annulus_index(domain.norm(i)))
                .or_default()
                .push(i);
        }
        let rows_budget = (cfg.sweep.budget_pairs / n.max(1) as u64).max(8);
        let quota = (rows_budget / strata.len() as u64).max(2) as usize;
        let mut picked = Vec::new();
        for (&k, list) in &strata {
            for t in 0..quota.min(list.len()) {
                let w = crate::mix::mix(cfg.sweep.seed, &[k as u64, t as u64, 0xc0a5]);
                picked.push(list[(w % list.len() as u64) as usize]);
            }
        }
        picked.sort_unstable();
        picked.dedup();
        picked
    };
    let targets = map.targets();
    let disps = &map.displacements;
    type Acc = (
        (f64, Option<(usize, usize)>),
        std::collections::BTreeMap<i32, f64>,
    );
    let join = |mut a: Acc, b: Acc| -> Acc {
        a.0 = better_req(a.0, b.0);
        for (k, v) in b.1 {
            let e = a.1.entry(k).or_insert(1.0);
            *e = e.max(v);
        }
        a
    };
    let (pair_best, pair_annuli) = sources
        .par_iter()
        .map(|&i| {
            let mut row: Vec<f64> = Vec::new();
            domain.distance_row_into(i, &mut row);
            let k_i = annulus_index(domain.norm(i));
            let mut local: Acc = ((f64::NEG_INFINITY, None), Default::default());
            for j in 0..n {
                if j == i || (exact && j < i) {
                    continue;
                }
                let d_cod = codomain.distance(targets[i], targets[j]);
                let req = ((d_cod - disps[i] - disps[j]) / (row[j] + 1.0)).max(0.0);
                local.0 = better_req(local.0, (req, Some((i.min(j), i.max(j)))));
                let k = k_i.min(annulus_index(domain.norm(j)));
                let e = local.1.entry(k).or_insert(1.0);
                *e = e.max(req);
            }
            local
        })
        .reduce(|| ((f64::NEG_INFINITY, None), Default::default()), join);
    let pair_req = pair_best.0.max(1.0);
    for (k, v) in pair_annuli {
        let e = annulus_req.entry(k).or_insert(1.0);
        *e = e.max(v);
    }
    let pairs_total = (n as u64) * (n as u64 - 1) / 2;
    let pairs_evaluated = if exact {
        pairs_total
    } else {
        (sources.len() as u64 * (n as u64 - 1) / 2).min(pairs_total)
    };

    let raw = growth_req.max(pair_req).max(1.0);
    let a_lower = (raw / cfg.resolution).ceil() * cfg.resolution;
    let profile: Vec<(i32, f64)> = annulus_req.into_iter().collect();
    let growth_slope = loglog_slope(
        &profile
            .iter()
            .filter(|&&(k, _)| k >= 0)
            .map(|&(k, v)| ((2.0f64).powi(k) * 1.5, v))
            .collect::<Vec<_>>(),
    );
    let verdict = if a_lower > cfg.max_a || growth_slope > cfg.growth_slope_threshold {
        CoarseVerdict::NotCoarse
    } else {
        CoarseVerdict::Coarse
    };
    Ok(CoarseMapReport {
        a_lower,
        growth_requirement: growth_req,
        growth_witness: growth_wit,
        pair_requirement: pair_req,
        pair_witness: pair_best.1,
        per_annulus_requirement: profile,
        growth_slope,
        verdict,
        pair_coverage: if pairs_total == 0 {
            1.0
        } else {
            pairs_evaluated as f64 / pairs_total as f64
        },
    })
}

fn better_req(
    a: (f64, Option<(usize, usize)>),
    b: (f64, Option<(usize, usize)>),
) -> (f64, Option<(usize, usize)>) {
    if b.0 > a.0 {
        b
    } else if a.0 > b.0 {
        a
    } else {
        match (a.1, b.1) {
            (Some(wa), Some(wb)) => {
                if wb < wa {
                    b
                } else {
                    a
                }
            }
            (None, Some(_)) => b,
            _ => a,
        }
    }
}

fn check_map(
    map: &SampledMap,
    domain: &(impl MetricSpace + ?Sized),
    codomain: &(impl MetricSpace + ?Sized),
) -> Result<()> {
    if map.domain_fp != domain.fingerprint() || map.codomain_fp != codomain.fingerprint() {
        return Err(Error::InvalidInput(
            "map bound to different domain/codomain spaces".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Sublinear closeness
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosenessVerdict {
    SublinearlyClose,
    NotClose,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosenessReport {
    /// `(epsilon, C_epsilon)` with
    /// `C_eps = max_x (d(f(x),g(x)) - snaps - eps |x|)`.
    pub c_eps: Vec<(f64, f64)>,
    /// Per-annulus sup of `(d(f(x),g(x)) - snaps) / |x|`.
    pub annulus_slopes: Vec<(i32, f64)>,
    pub max_adjusted_distance: f64,
    /// Slope of the final annulus; the verdict thresholds this.
    pub final_slope: f64,
    pub verdict: ClosenessVerdict,
}

#[derive(Clone, Copy, Debug)]
pub struct ClosenessConfig {
    pub slope_threshold: f64,
}

impl Default for ClosenessConfig {
    fn default() -> Self {
        ClosenessConfig {
            slope_threshold: 0.05,
        }
    }
}

/// Pointwise distance profile of two maps over the same domain. The epsilon
/// grid `1, 1/2, ..., 1/64` gives the constants `C_eps`; the verdict is the
/// finite analogue of "for every epsilon": the sup of `d(f,g)/|x|` over the
/// outermost annulus must fall below the threshold.
pub fn closeness(
    f: &SampledMap,
    g: &SampledMap,
    domain: &(impl MetricSpace + ?Sized),
    codomain: &(impl MetricSpace + ?Sized),
    cfg: &ClosenessConfig,
) -> Result<ClosenessReport> {
    check_map(f, domain, codomain)?;
    check_map(g, domain, codomain)?;
    let n = domain.len();
    let mut adjusted = vec![0.0f64; n];
    for x in 0..n {
        let d = codomain.distance(f.target(x), g.target(x));
        adjusted[x] = (d - f.displacement(x) - g.displacement(x)).max(0.0);
    }
    let eps_grid: Vec<f64> = (0..=6).map(|k| 1.0 / (1 << k) as f64).collect();
    let c_eps: Vec<(f64, f64)> = eps_grid
        .iter()
        .map(|&eps| {
            let c = (0..n)
                .map(|x| adjusted[x] - eps * domain.norm(x))
                .fold(f64::NEG_INFINITY, f64::max);
            (eps, c)
        })
        .collect();
    let mut slopes: std::collections::BTreeMap<i32, f64> = Default::default();
    for x in 0..n {
        let nm = domain.norm(x);
        let k = annulus_index(nm);
        if k < 0 {
            continue;
        }
        let s = adjusted[x] / nm;
        let e = slopes.entry(k).or_insert(0.0);
        *e = e.max(s);
    }
    let annulus_slopes: Vec<(i32, f64)> = slopes.into_iter().collect();
    let final_slope = annulus_slopes.last().map_or(0.0, |&(_, s)| s);
    let verdict = if final_slope < cfg.slope_threshold {
        ClosenessVerdict::SublinearlyClose
    } else {
        ClosenessVerdict::NotClose
    };
    Ok(ClosenessReport {
        c_eps,
        annulus_slopes,
        max_adjusted_distance: adjusted.iter().copied().fold(0.0, f64::max),
        final_slope,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Positive-determinant matrix paths
// ---------------------------------------------------------------------------

/// Continuous path engine `Theta(t) = Q(t) S(t)` from a polar decomposition
/// `T = Q S`: the rotation runs along the principal-logarithm geodesic from
/// `Q` to the identity, the stretch along the spectral power `S^(1-t)`.
#[derive(Clone, Debug)]
pub struct GlPath {
    t_matrix: DMatrix<f64>,
    q_log: DMatrix<f64>,
    s_vectors: DMatrix<f64>,
    s_values: DVector<f64>,
    n: usize,
}

impl GlPath {
    pub fn new(t_matrix: &DMatrix<f64>) -> Result<Self> {
        let n = t_matrix.nrows();
        if n == 0 || t_matrix.ncols() != n {
            return Err(Error::InvalidInput("matrix must be square".into()));
        }
        if n > 4 {
            return Err(Error::InvalidInput("paths support n <= 4".into()));
        }
        let det = t_matrix.clone().determinant();
        if !(det > 0.0) {
            return Err(Error::Precondition(format!(
                "matrix determinant {det} is not positive"
            )));
        }
        // polar: S = sqrt(T^T T) symmetric positive definite, Q = T S^-1
        let gram = t_matrix.transpose() * t_matrix;
        let eig = nalgebra::linalg::SymmetricEigen::new(gram);
        let s_values = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let s_vectors = eig.eigenvectors;
        let s_inv = &s_vectors
            * DMatrix::from_diagonal(&s_values.map(|v| 1.0 / v.max(1e-300)))
            * s_vectors.transpose();
        let q = t_matrix * s_inv;
        let q_log = so_log(&q)?;
        Ok(GlPath {
            t_matrix: t_matrix.clone(),
            q_log,
            s_vectors,
            s_values,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Interior evaluation; the endpoints are pinned to `T` and `I` exactly.
    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        if t <= 0.0 {
            return self.t_matrix.clone();
        }
        if t >= 1.0 {
            return DMatrix::identity(self.n, self.n);
        }
        let q_t = exp_matrix(&(&self.q_log * (1.0 - t)));
        let s_t = &self.s_vectors
            * DMatrix::from_diagonal(&self.s_values.map(|v| v.powf(1.0 - t)))
            * self.s_vectors.transpose();
        q_t * s_t
    }

    /// Upper bound on the path speed `||Theta'(t)||`.
    pub fn speed_bound(&self) -> f64 {
        let s_max = self.s_values.iter().copied().fold(0.0, f64::max).max(1.0);
        let log_s_max = self
            .s_values
            .iter()
            .map(|v| v.max(1e-300).ln().abs())
            .fold(0.0, f64::max);
        let k_norm = self.q_log.norm();
        (k_norm + log_s_max) * s_max
    }

    /// Largest singular value along the whole path (bounds image norms).
    pub fn max_stretch(&self) -> f64 {
        self.s_values.iter().copied().fold(0.0, f64::max).max(1.0)
    }
}

/// Matrix samples of the path on a uniform grid over `[0,1]`.
#[derive(Clone, Debug)]
pub struct HomotopyPath {
    pub ts: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
    pub determinants: Vec<f64>,
    pub speed_bound: f64,
    pub max_step_norm: f64,
}

/// Samples `Theta` on `steps + 1` grid points; every determinant is
/// positive by construction and the endpoints are exact.
pub fn glplus_path(t_matrix: &DMatrix<f64>, steps: usize) -> Result<HomotopyPath> {
    if steps == 0 {
        return Err(Error::InvalidInput("need at least one step".into()));
    }
    let path = GlPath::new(t_matrix)?;
    let ts: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let matrices: Vec<DMatrix<f64>> = ts.iter().map(|&t| path.eval(t)).collect();
    let determinants: Vec<f64> = matrices.iter().map(|m| m.clone().determinant()).collect();
    let max_step_norm = matrices
        .windows(2)
        .map(|w| (&w[1] - &w[0]).norm())
        .fold(0.0, f64::max);
    Ok(HomotopyPath {
        ts,
        matrices,
        determinants,
        speed_bound: path.speed_bound(),
        max_step_norm,
    })
}

/// Principal logarithm of a special orthogonal matrix (n <= 4), returned as
/// a skew-symmetric matrix.
fn so_log(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    let mut k = DMatrix::zeros(n, n);
    match n {
        1 => Ok(k),
        2 => {
            let theta = q[(1, 0)].atan2(q[(0, 0)]);
            k[(0, 1)] = -theta;
            k[(1, 0)] = theta;
            Ok(k)
        }
        3 => {
            // Rodrigues
            let cos_theta = ((q.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
            let theta = cos_theta.acos();
            if theta < 1e-12 {
                return Ok(k);
            }
            if (std::f64::consts::PI - theta) < 1e-6 {
                // near pi: axis from the dominant column of Q + I
                let m = q + DMatrix::identity(3, 3);
                let col = (0..3)
                    .max_by(|&a, &b| {
                        m.column(a)
                            .norm()
                            .partial_cmp(&m.column(b).norm())
                            .unwrap()
                    })
                    .unwrap();
                let axis = m.column(col).normalize();
                k[(0, 1)] = -axis[2] * theta;
                k[(1, 0)] = axis[2] * theta;
                k[(0, 2)] = axis[1] * theta;
                k[(2, 0)] = -axis[1] * theta;
                k[(1, 2)] = -axis[0] * theta;
                k[(2, 1)] = axis[0] * theta;
                return Ok(k);
            }
            let skew = (q - q.transpose()) * (theta / (2.0 * theta.sin()));
            Ok(skew)
        }
        4 => so4_log(q),
        _ => Err(Error::InvalidInput("so_log supports n <= 4".into())),
    }
}

/// Log of SO(4) via invariant-plane pairing of the symmetric part.
fn so4_log(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = 4;
    let sym = (q + q.transpose()) * 0.5;
    let skew = (q - q.transpose()) * 0.5;
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    // sort eigenpairs ascending
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap()
    });
    let mut k = DMatrix::zeros(n, n);
    let mut used = vec![false; n];
    for idx in 0..n {
        let a = order[idx];
        if used[a] {
            continue;
        }
        let lam: f64 = eig.eigenvalues[a];
        if lam > 1.0 - 1e-10 {
            used[a] = true; // fixed direction
            continue;
        }
        // find the partner with the closest eigenvalue
        let partner = order
            .iter()
            .copied()
            .filter(|&b| !used[b] && b != a)
            .min_by(|&b, &c| {
                (eig.eigenvalues[b] - lam)
                    .abs()
                    .partial_cmp(&(eig.eigenvalues[c] - lam).abs())
                    .unwrap()
            })
            .ok_or_else(|| Error::Construction("unpaired rotation plane".into()))?;
        used[a] = true;
        used[partner] = true;
        let v1: DVector<f64> = eig.eigenvectors.column(a).into();
        let v2: DVector<f64> = eig.eigenvectors.column(partner).into();
        let theta = lam.clamp(-1.0, 1.0).acos();
        if theta < 1e-12 {
            continue;
        }
        // orientation of the plane from the skew part; for theta = pi any
        // orientation is principal
        let s = (v1.transpose() * &skew * &v2)[(0, 0)];
        let signed = if s.abs() < 1e-12 {
            theta
        } else {
            theta * s.signum()
        };
        let gen = &v1 * v2.transpose() - &v2 * v1.transpose();
        k += gen * signed;
    }
    Ok(k)
}

/// Matrix exponential by scaling-and-squaring with a truncated series;
/// ample accuracy for the small skew/symmetric arguments used here.
fn exp_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / (2.0f64).powi(squarings as i32);
    let mut term = DMatrix::identity(n, n);
    let mut acc = DMatrix::identity(n, n);
    for k in 1..=16 {
        term = &term * &scaled / k as f64;
        acc += &term;
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    acc
}

// ---------------------------------------------------------------------------
// Cone homotopy
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ConeHomotopyReport {
    pub dets_positive: bool,
    pub min_det: f64,
    pub coarse: CoarseMapReport,
    /// Max snapping displacement over the `t = 0` slice (`Theta(0) = T`).
    pub endpoint0_max_displacement: f64,
    /// Max snapping displacement over the `t = 1` slice (identity; zero when
    /// the codomain contains the domain sample).
    pub endpoint1_max_displacement: f64,
}

/// Checks that `H(t, x) = Theta(t) x` is a coarse map from the cone
/// `[0,1] x_cone X` (with the cone metric) into the codomain plane sample.
/// The compact factor of `cone` must be an interval with 1-d coordinates;
/// `codomain` must sample a ball large enough for the path's stretch.
pub fn cone_homotopy_check(
    t_matrix: &DMatrix<f64>,
    cone: &ConeSpace,
    codomain: &SampledSpace,
    cfg: &CoarseConfig,
) -> Result<ConeHomotopyReport> {
    let n = t_matrix.nrows();
    let x_space = cone.x_space();
    if !x_space.has_coords() || x_space.dim() != n {
        return Err(Error::InvalidInput(format!(
            "cone fiber has dimension {} but the matrix is {n} x {n}",
            x_space.dim()
        )));
    }
    let p_space = cone.p_space();
    if p_space.coords(0).map_or(true, |c| c.len() != 1) {
        return Err(Error::InvalidInput(
            "cone compact factor must be an interval with 1-d coordinates".into(),
        ));
    }
    let path = GlPath::new(t_matrix)?;
    // sample determinants along the vertex parameters
    let mut min_det = f64::INFINITY;
    let mut thetas: Vec<DMatrix<f64>> = Vec::with_capacity(p_space.len());
    for p in 0..p_space.len() {
        let t = p_space.coords(p).unwrap()[0];
        let theta = path.eval(t);
        min_det = min_det.min(theta.clone().determinant());
        thetas.push(theta);
    }
    let map = SampledMap::from_coords(cone, codomain, |v| {
        let p = cone.p_of(v);
        let x = cone.x_of(v);
        let coords = x_space.coords(x);
        let vec = DVector::from_column_slice(coords);
        let image = &thetas[p] * vec;
        image.as_slice().to_vec()
    });
    let coarse = coarse_constant(&map, cone, codomain, cfg)?;
    let mut end0 = 0.0f64;
    let mut end1 = 0.0f64;
    for v in 0..cone.len() {
        let p = cone.p_of(v);
        let t = p_space.coords(p).unwrap()[0];
        if t == 0.0 {
            end0 = end0.max(map.displacement(v));
        }
        if t == 1.0 {
            end1 = end1.max(map.displacement(v));
        }
    }
    Ok(ConeHomotopyReport {
        dets_positive: min_det > 0.0,
        min_det,
        coarse,
        endpoint0_max_displacement: end0,
        endpoint1_max_displacement: end1,
    })
}

// ---------------------------------------------------------------------------
// Coarse equivalence: sphere cone vs Euclidean space
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct EquivalenceConfig {
    pub sphere_mesh: f64,
    pub grid_density: usize,
    pub grid_seed: u64,
    pub coarse: CoarseConfig,
    pub closeness: ClosenessConfig,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig {
            sphere_mesh: std::f64::consts::PI / 64.0,
            grid_density: 32,
            grid_seed: 17,
            coarse: CoarseConfig::default(),
            closeness: ClosenessConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub sphere_mesh: f64,
    pub grid_mesh: f64,
    pub f_coarse: CoarseMapReport,
    pub g_coarse: CoarseMapReport,
    pub fg_closeness: ClosenessReport,
    pub gf_closeness: ClosenessReport,
}

/// Builds the witness pair for the coarse equivalence of the sphere cone
/// with Euclidean space: `f(p, k) = k p` into the plane sample and
/// `g(y) = (direction of y snapped, |y| rounded)` into the cone, plus the
/// closeness reports of both composites against the identities. Composites
/// are evaluated through the continuum rules (the intermediate image is not
/// re-snapped), so the recorded displacements are exactly the rounding and
/// angular-snap terms.
pub fn equivalence_witness_rn(n: usize, radius: f64, cfg: &EquivalenceConfig) -> Result<EquivalenceReport> {
    if !(n == 2 || n == 3) {
        return Err(Error::InvalidInput("supported dimensions: 2 and 3".into()));
    }
    if radius < 4.0 {
        return Err(Error::InvalidInput("radius must be at least 4".into()));
    }
    let sphere = crate::spaces::build_sphere_graph(n, cfg.sphere_mesh)?;
    let levels = radius.floor() as usize;
    let nat = crate::spaces::build_halfline(levels, 1.0)?;
    let rule = nat.neighbor_rule();
    let cone = crate::cone::build_cone_with(
        sphere,
        nat,
        rule,
        crate::cone::ConeConfig {
            vertex_cap: 400_000,
            row_cache_cap: 0,
        },
    )?;
    let grid = crate::spaces::build_euclidean_grid(n, radius, cfg.grid_density, cfg.grid_seed)?;

    // f: (p, k) -> k * p, raw coordinates snapped into the grid
    let p_coords: Vec<Vec<f64>> = (0..cone.p_space().len())
        .map(|p| cone.p_space().coords(p).unwrap().to_vec())
        .collect();
    let f = SampledMap::from_coords(&cone, &grid, |v| {
        let k = cone.x_space().norm(cone.x_of(v));
        p_coords[cone.p_of(v)].iter().map(|c| c * k).collect()
    });

    // g: y -> (snap(y/|y|), round(|y|)); displacement is the polyline bound
    // |round - |y|| + max(1, k) * angular gap
    let sphere_ref = cone.p_space();
    let mut g_targets = Vec::with_capacity(grid.len());
    let mut g_disps = Vec::with_capacity(grid.len());
    for y in 0..grid.len() {
        let nm = grid.norm(y);
        let k = (nm.round() as usize).min(levels);
        if nm == 0.0 {
            g_targets.push(cone.vertex(0, 0));
            g_disps.push(0.0);
            continue;
        }
        let dir: Vec<f64> = grid.coords(y).iter().map(|c| c / nm).collect();
        let (p_hat, arc) = nearest_sphere_vertex(sphere_ref, &dir);
        g_targets.push(cone.vertex(p_hat, k));
        g_disps.push((nm - k as f64).abs() + (k as f64).max(1.0) * arc);
    }
    let g = SampledMap::from_snapped(&grid, &cone, g_targets, g_disps)?;

    let f_coarse = coarse_constant(&f, &cone, &grid, &cfg.coarse)?;
    let g_coarse = coarse_constant(&g, &grid, &cone, &cfg.coarse)?;

    // f . g on the grid: y -> g(y) = (p_hat, k) -> k * p_hat (continuum rule)
    let fg = SampledMap::from_coords(&grid, &grid, |y| {
        let v = g.target(y);
        let k = cone.x_space().norm(cone.x_of(v));
        p_coords[cone.p_of(v)].iter().map(|c| c * k).collect()
    });
    // carry g's angular/rounding displacement into the composite tolerance:
    // the raw composite image is k * p_hat, which differs from y by at most
    // the rounding plus chordal-snap terms; those are what closeness should
    // tolerate on top of fg's own grid snap.
    let fg = {
        let targets = fg.targets().to_vec();
        let disps: Vec<f64> = (0..grid.len()).map(|y| fg.displacement(y)).collect();
        SampledMap::from_snapped(&grid, &grid, targets, disps)?
    };
    let id_grid = SampledMap::identity(&grid);
    let fg_closeness = closeness(&fg, &id_grid, &grid, &grid, &cfg.closeness)?;

    // g . f on the cone: (p, k) -> k p -> (snap(p), k); p is already a
    // sphere vertex, so the composite is the identity except at k = 0
    let gf_targets: Vec<usize> = (0..cone.len())
        .map(|v| {
            let k = cone.x_of(v);
            if cone.x_space().norm(k) == 0.0 {
                cone.vertex(0, 0)
            } else {
                v
            }
        })
        .collect();
    let gf = SampledMap::from_ids(&cone, &cone, gf_targets)?;
    let id_cone = SampledMap::identity(&cone);
    let gf_closeness = closeness(&gf, &id_cone, &cone, &cone, &cfg.closeness)?;

    Ok(EquivalenceReport {
        sphere_mesh: cone.p_space().sampling_mesh(),
        grid_mesh: grid.sampling_mesh(),
        f_coarse,
        g_coarse,
        fg_closeness,
        gf_closeness,
    })
}

/// Nearest sphere-graph vertex to a unit direction, with the great-circle
/// gap.
fn nearest_sphere_vertex(sphere: &crate::spaces::CompactGraph, dir: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for p in 0..sphere.len() {
        let dot: f64 = sphere
            .coords(p)
            .unwrap()
            .iter()
            .zip(dir)
            .map(|(a, b)| a * b)
            .sum();
        if dot > best.1 {
            best = (p, dot);
        }
    }
    (best.0, best.1.clamp(-1.0, 1.0).acos())
}
