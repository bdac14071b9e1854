//! Sampled bounded complex functions and their scale analysis.
//!
//! The central quantity is the scale constant of a bounded function: the
//! exact supremum over point pairs outside the ball of radius `R` of
//! `R * |f(x) - f(x')| / d(x, x')`. A function with these constants bounded
//! over all scales oscillates sublinearly; one whose fixed-radius ball
//! diameters vanish at infinity oscillates classically. [`classify`] fits a
//! log-log slope through the measured constants and sorts a function into
//! one of the two regimes (or neither).
//!
//! Supremums are exact over all pairs up to [`SweepConfig::exact_point_cap`]
//! points; above that they switch to stratified pair subsampling (strata =
//! annulus pairs, samples from the fixed 64-bit mix) and report coverage.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::SampledMap;
use crate::mix;
use crate::spaces::{annulus_index, MetricSpace, SampledSpace};

/// Bounded complex-valued assignment on a space's sample points.
#[derive(Clone, Debug)]
pub struct SampledFunction {
    space_fp: u64,
    values: Vec<Complex64>,
    sup_norm: f64,
}

impl SampledFunction {
    pub fn new(space: &(impl MetricSpace + ?Sized), values: Vec<Complex64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a space of {} points",
                values.len(),
                space.len()
            )));
        }
        let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(SampledFunction {
            space_fp: space.fingerprint(),
            values,
            sup_norm,
        })
    }

    pub fn from_fn(
        space: &(impl MetricSpace + ?Sized),
        f: impl Fn(usize) -> Complex64,
    ) -> Self {
        let values: Vec<Complex64> = (0..space.len()).map(f).collect();
        let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        SampledFunction {
            space_fp: space.fingerprint(),
            values,
            sup_norm,
        }
    }

    pub fn from_real_fn(space: &(impl MetricSpace + ?Sized), f: impl Fn(usize) -> f64) -> Self {
        Self::from_fn(space, |i| Complex64::new(f(i), 0.0))
    }

    pub fn constant(space: &(impl MetricSpace + ?Sized), value: Complex64) -> Self {
        Self::from_fn(space, |_| value)
    }

    /// Internal constructor for values already bound to a known space.
    pub(crate) fn from_raw(space_fp: u64, values: Vec<Complex64>) -> Self {
        let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        SampledFunction {
            space_fp,
            values,
            sup_norm,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn space_fingerprint(&self) -> u64 {
        self.space_fp
    }
    #[inline]
    pub fn value(&self, i: usize) -> Complex64 {
        self.values[i]
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Exact sup distance `max_i |f(i) - g(i)|`.
    pub fn sup_distance(&self, other: &SampledFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &SampledFunction) -> SampledFunction {
        self.zip_with(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &SampledFunction) -> SampledFunction {
        self.zip_with(other, |a, b| a - b)
    }
    pub fn mul(&self, other: &SampledFunction) -> SampledFunction {
        self.zip_with(other, |a, b| a * b)
    }
    pub fn scale(&self, c: Complex64) -> SampledFunction {
        let values: Vec<Complex64> = self.values.iter().map(|v| v * c).collect();
        let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        SampledFunction {
            space_fp: self.space_fp,
            values,
            sup_norm,
        }
    }
    pub fn conj(&self) -> SampledFunction {
        let values: Vec<Complex64> = self.values.iter().map(|v| v.conj()).collect();
        SampledFunction {
            space_fp: self.space_fp,
            values,
            sup_norm: self.sup_norm,
        }
    }

    fn zip_with(
        &self,
        other: &SampledFunction,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> SampledFunction {
        assert_eq!(self.values.len(), other.values.len(), "length mismatch");
        let values: Vec<Complex64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        SampledFunction {
            space_fp: self.space_fp,
            values,
            sup_norm,
        }
    }
}

/// JSON document for a sampled function: values as `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
pub struct FunctionDocument {
    pub space_ref: u64,
    pub values: Vec<[f64; 2]>,
}

impl SampledFunction {
    pub fn to_document(&self) -> FunctionDocument {
        FunctionDocument {
            space_ref: self.space_fp,
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        }
    }
    pub fn from_document(space: &(impl MetricSpace + ?Sized), doc: &FunctionDocument) -> Result<Self> {
        if doc.space_ref != space.fingerprint() {
            return Err(Error::Schema(
                "function document refers to a different space".into(),
            ));
        }
        Self::new(
            space,
            doc.values
                .iter()
                .map(|&[re, im]| Complex64::new(re, im))
                .collect(),
        )
    }
}

// ---------------------------------------------------------------------------
// Pair sweeps
// ---------------------------------------------------------------------------

/// Exactness and subsampling policy for pair supremums.
#[derive(Clone, Copy, Debug)]
pub struct SweepConfig {
    /// Exact enumeration whenever the restricted point set is at most this
    /// large.
    pub exact_point_cap: usize,
    /// Pair budget for the stratified mode.
    pub budget_pairs: u64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            exact_point_cap: 5_000,
            budget_pairs: 2_000_000,
            seed: 0x53_57_45_45,
        }
    }
}

/// A measured scale constant with its attaining pair.
#[derive(Clone, Debug, Serialize)]
pub struct ScaleConstant {
    pub scale: f64,
    pub value: f64,
    /// Attaining pair, canonicalized `(i, j)` with `i < j`; ties broken by
    /// lexicographically smallest pair.
    pub witness: Option<(usize, usize)>,
    pub pairs_evaluated: u64,
    pub pairs_total: u64,
    /// `pairs_evaluated / pairs_total`; 1.0 in exact mode.
    pub coverage: f64,
}

/// Max-reduction over candidates that is associative and tie-stable: larger
/// value wins, equal values prefer the lexicographically smaller witness.
fn better(
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

/// Supremum of `ratio(i, j, d(i,j))` over unordered pairs of `ids`.
pub fn pair_sup(
    space: &(impl MetricSpace + ?Sized),
    ids: &[usize],
    cfg: &SweepConfig,
    ratio: impl Fn(usize, usize, f64) -> f64 + Sync,
) -> ScaleConstant {
    let m = ids.len();
    let total = (m as u64) * (m as u64 - 1) / 2;
    if m <= cfg.exact_point_cap {
        let (value, witness) = ids
            .par_iter()
            .enumerate()
            .map(|(a, &i)| {
                let mut row: Vec<f64> = Vec::new();
                space.distance_row_into(i, &mut row);
                let mut local = (f64::NEG_INFINITY, None);
                for &j in &ids[a + 1..] {
                    let r = ratio(i, j, row[j]);
                    let wit = Some((i.min(j), i.max(j)));
                    local = better(local, (r, wit));
                }
                local
            })
            .reduce(|| (f64::NEG_INFINITY, None), better);
        ScaleConstant {
            scale: f64::NAN,
            value: value.max(0.0),
            witness,
            pairs_evaluated: total,
            pairs_total: total,
            coverage: 1.0,
        }
    } else if space.random_access_distance() {
        // stratified pair draws: strata are annulus pairs
        let mut strata: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
        for &i in ids {
            strata.entry(annulus_index(space.norm(i))).or_default().push(i);
        }
        let keys: Vec<i32> = strata.keys().copied().collect();
        let mut stratum_pairs: Vec<(i32, i32)> = Vec::new();
        for (ai, &ka) in keys.iter().enumerate() {
            for &kb in &keys[ai..] {
                stratum_pairs.push((ka, kb));
            }
        }
        let quota = (cfg.budget_pairs / stratum_pairs.len() as u64).max(16);
        let (value, witness, evaluated) = stratum_pairs
            .par_iter()
            .map(|&(ka, kb)| {
                let list_a = &strata[&ka];
                let list_b = &strata[&kb];
                let stratum_total = if ka == kb {
                    (list_a.len() as u64) * (list_a.len() as u64 - 1) / 2
                } else {
                    (list_a.len() as u64) * (list_b.len() as u64)
                };
                let draws = quota.min(stratum_total);
                let mut local = (f64::NEG_INFINITY, None);
                let mut count = 0u64;
                for t in 0..draws {
                    let w = mix::mix(cfg.seed, &[ka as u64, kb as u64, t]);
                    let i = list_a[(w % list_a.len() as u64) as usize];
                    let j = list_b[(mix::splitmix64(w) % list_b.len() as u64) as usize];
                    if i == j {
                        continue;
                    }
                    let d = space.distance(i, j);
                    let r = ratio(i, j, d);
                    local = better(local, (r, Some((i.min(j), i.max(j)))));
                    count += 1;
                }
                (local.0, local.1, count)
            })
            .reduce(
                || (f64::NEG_INFINITY, None, 0),
                |a, b| {
                    let m = better((a.0, a.1), (b.0, b.1));
                    (m.0, m.1, a.2 + b.2)
                },
            );
        ScaleConstant {
            scale: f64::NAN,
            value: value.max(0.0),
            witness,
            pairs_evaluated: evaluated,
            pairs_total: total,
            coverage: if total == 0 {
                1.0
            } else {
                evaluated as f64 / total as f64
            },
        }
    } else {
        // row-oriented subsample for sweep-per-source metrics: stratified
        // source draws, each scanned against the whole restricted set
        let mut strata: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
        for &i in ids {
            strata.entry(annulus_index(space.norm(i))).or_default().push(i);
        }
        let keys: Vec<i32> = strata.keys().copied().collect();
        let rows_budget = (cfg.budget_pairs / m.max(1) as u64).max(8);
        let quota = (rows_budget / keys.len() as u64).max(2);
        let mut sources: Vec<usize> = Vec::new();
        for &k in &keys {
            let list = &strata[&k];
            let draws = (quota as usize).min(list.len());
            for t in 0..draws {
                let w = mix::mix(cfg.seed, &[k as u64, t as u64, 0x50_57]);
                sources.push(list[(w % list.len() as u64) as usize]);
            }
        }
        sources.sort_unstable();
        sources.dedup();
        let (value, witness) = sources
            .par_iter()
            .map(|&i| {
                let mut row: Vec<f64> = Vec::new();
                space.distance_row_into(i, &mut row);
                let mut local = (f64::NEG_INFINITY, None);
                for &j in ids {
                    if j == i {
                        continue;
                    }
                    let r = ratio(i, j, row[j]);
                    local = better(local, (r, Some((i.min(j), i.max(j)))));
                }
                local
            })
            .reduce(|| (f64::NEG_INFINITY, None), better);
        let evaluated = sources.len() as u64 * (m as u64 - 1);
        ScaleConstant {
            scale: f64::NAN,
            value: value.max(0.0),
            witness,
            pairs_evaluated: evaluated,
            pairs_total: total,
            coverage: if total == 0 {
                1.0
            } else {
                (evaluated as f64 / 2.0 / total as f64).min(1.0)
            },
        }
    }
}

fn require_outside(
    space: &(impl MetricSpace + ?Sized),
    r: f64,
    needed: usize,
) -> Result<Vec<usize>> {
    let outside = space.ids_outside(r);
    if outside.len() < needed {
        return Err(Error::EmptyScale {
            scale: r,
            needed,
        });
    }
    Ok(outside)
}

/// Exact (or stratified) supremum of `R |f(x) - f(x')| / d(x,x')` over
/// distinct pairs outside `B(R)`. Distinct points at distance zero with
/// different values yield an infinite constant with the offending witness.
pub fn sublinear_higson_constant(
    f: &SampledFunction,
    space: &(impl MetricSpace + ?Sized),
    r: f64,
) -> Result<ScaleConstant> {
    sublinear_higson_constant_with(f, space, r, &SweepConfig::default())
}

pub fn sublinear_higson_constant_with(
    f: &SampledFunction,
    space: &(impl MetricSpace + ?Sized),
    r: f64,
    cfg: &SweepConfig,
) -> Result<ScaleConstant> {
    check_binding(f, space)?;
    let outside = require_outside(space, r, 2)?;
    let values = f.values();
    let mut sc = pair_sup(space, &outside, cfg, move |i, j, d| {
        let delta = (values[i] - values[j]).norm();
        if d > 0.0 {
            r * delta / d
        } else if delta > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    });
    sc.scale = r;
    Ok(sc)
}

/// `B_{h_L}` membership proxy: supremum of `R |f(x)-f(x')| / (d(x,x') + 1)`
/// over pairs outside `B(R)`; tolerates jumps, so discontinuous functions
/// stay finite.
pub fn b_hl_constant_with(
    f: &SampledFunction,
    space: &(impl MetricSpace + ?Sized),
    r: f64,
    cfg: &SweepConfig,
) -> Result<ScaleConstant> {
    check_binding(f, space)?;
    let outside = require_outside(space, r, 2)?;
    let values = f.values();
    let mut sc = pair_sup(space, &outside, cfg, move |i, j, d| {
        r * (values[i] - values[j]).norm() / (d + 1.0)
    });
    sc.scale = r;
    Ok(sc)
}

/// Scale-free sample constant: supremum over all pairs of
/// `min(|x|, |x'|) * |f(x)-f(x')| / d(x,x')`. This is the finite analogue
/// of the uniform constant in the sublinear-oscillation condition (the
/// binding scale for a pair is the smaller of its two norms).
pub fn scale_free_constant(
    f: &SampledFunction,
    space: &(impl MetricSpace + ?Sized),
    cfg: &SweepConfig,
) -> Result<ScaleConstant> {
    check_binding(f, space)?;
    let ids: Vec<usize> = (0..space.len()).collect();
    if ids.len() < 2 {
        return Err(Error::EmptyScale {
            scale: 0.0,
            needed: 2,
        });
    }
    let values = f.values();
    let mut sc = pair_sup(space, &ids, cfg, move |i, j, d| {
        let delta = (values[i] - values[j]).norm();
        let scale = space.norm(i).min(space.norm(j));
        if d > 0.0 {
            scale * delta / d
        } else if delta > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    });
    sc.scale = 0.0;
    Ok(sc)
}

/// Exact supremum over `x` outside `B(R)` of `diam f(B(x, r))` on the
/// sample.
pub fn classical_higson_modulus(
    f: &SampledFunction,
    space: &(impl MetricSpace + ?Sized),
    r: f64,
    scale: f64,
) -> Result<ScaleConstant> {
    classical_higson_modulus_with(f, space, r, scale, &SweepConfig::default())
}

pub fn classical_higson_modulus_with(
    f: &SampledFunction,
    space: &(impl MetricSpace + ?Sized),
    r: f64,
    scale: f64,
    cfg: &SweepConfig,
) -> Result<ScaleConstant> {
    check_binding(f, space)?;
    if r < space.sampling_mesh() {
        return Err(Error::InvalidInput(format!(
            "ball radius {r} below the sampling mesh {}",
            space.sampling_mesh()
        )));
    }
    let mut outside = require_outside(space, scale, 1)?;
    // subsample centers beyond the exact cap, deterministically
    if outside.len() > cfg.exact_point_cap {
        let keep = cfg.exact_point_cap;
        let total = outside.len();
        let mut picked: Vec<usize> = (0..keep)
            .map(|t| outside[(mix::mix(cfg.seed, &[t as u64, 0xba11]) % total as u64) as usize])
            .collect();
        picked.sort_unstable();
        picked.dedup();
        outside = picked;
    }
    let values = f.values();
    let (value, witness, evaluated) = outside
        .par_iter()
        .map(|&x| {
            let mut row: Vec<f64> = Vec::new();
            space.distance_row_into(x, &mut row);
            let ball: Vec<usize> = (0..space.len()).filter(|&y| row[y] <= r).collect();
            let mut local = (f64::NEG_INFINITY, None);
            for (ai, &y1) in ball.iter().enumerate() {
                for &y2 in &ball[ai + 1..] {
                    let diam = (values[y1] - values[y2]).norm();
                    local = better(local, (diam, Some((y1.min(y2), y1.max(y2)))));
                }
            }
            (local.0, local.1, 1u64)
        })
        .reduce(
            || (f64::NEG_INFINITY, None, 0),
            |a, b| {
                let m = better((a.0, a.1), (b.0, b.1));
                (m.0, m.1, a.2 + b.2)
            },
        );
    Ok(ScaleConstant {
        scale,
        value: value.max(0.0),
        witness,
        pairs_evaluated: evaluated,
        pairs_total: space.ids_outside(scale).len() as u64,
        coverage: if space.ids_outside(scale).is_empty() {
            1.0
        } else {
            evaluated as f64 / space.ids_outside(scale).len() as f64
        },
    })
}

fn check_binding(f: &SampledFunction, space: &(impl MetricSpace + ?Sized)) -> Result<()> {
    if f.len() != space.len() {
        return Err(Error::InvalidInput(format!(
            "function on {} points, space has {}",
            f.len(),
            space.len()
        )));
    }
    if f.space_fingerprint() != space.fingerprint() {
        return Err(Error::InvalidInput(
            "function bound to a different space".into(),
        ));
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x` over positive finite points.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0 && y.is_finite())
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if data.len() < 2 {
        return 0.0;
    }
    let n = data.len() as f64;
    let sx: f64 = data.iter().map(|p| p.0).sum();
    let sy: f64 = data.iter().map(|p| p.1).sum();
    let sxx: f64 = data.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = data.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        0.0
    } else {
        (n * sxy - sx * sy) / denom
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HigsonClass {
    SublinearHigson,
    ClassicalHigsonOnly,
    Neither,
}

#[derive(Clone, Debug)]
pub struct ClassifyConfig {
    /// Fitted log-log slope at or below which constants count as bounded.
    pub slope_threshold: f64,
    /// Classical moduli must decay below this multiple of their initial
    /// value.
    pub classical_decay_factor: f64,
    /// Ball radius for the classical modulus; defaults to twice the mesh.
    pub classical_r: Option<f64>,
    pub sweep: SweepConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            slope_threshold: 0.1,
            classical_decay_factor: 0.1,
            classical_r: None,
            sweep: SweepConfig::default(),
        }
    }
}

/// Scale constants, classical moduli, fitted slope, and the classification.
#[derive(Clone, Debug, Serialize)]
pub struct HigsonReport {
    pub scales: Vec<f64>,
    pub constants: Vec<ScaleConstant>,
    pub classical: Vec<ScaleConstant>,
    pub slope: f64,
    pub classification: HigsonClass,
}

/// Computes `C(R)` per scale, fits the slope, and classifies: sublinear
/// when the fitted slope stays at or below the threshold with a finite
/// final constant; classical-only when the moduli decay by the configured
/// factor but the constants grow; neither otherwise.
///
/// Classical moduli only enter the verdict when the sublinear branch
/// fails, so on large samples they are computed lazily: a sublinear
/// classification on a space beyond the exact cap reports an empty
/// `classical` column.
pub fn classify(
    f: &SampledFunction,
    space: &(impl MetricSpace + ?Sized),
    scales: &[f64],
    cfg: &ClassifyConfig,
) -> Result<HigsonReport> {
    if scales.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 scales".into()));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted[sorted.len() - 1] / sorted[0] < 4.0 {
        return Err(Error::InvalidInput(
            "scales must span at least two dyadic octaves".into(),
        ));
    }
    let ball_r = cfg
        .classical_r
        .unwrap_or(2.0 * space.sampling_mesh().max(f64::MIN_POSITIVE));
    let mut constants = Vec::with_capacity(sorted.len());
    for &r in &sorted {
        constants.push(sublinear_higson_constant_with(f, space, r, &cfg.sweep)?);
    }
    let slope = loglog_slope(
        &sorted
            .iter()
            .zip(&constants)
            .map(|(&r, c)| (r, c.value))
            .collect::<Vec<_>>(),
    );
    let last_finite = constants.last().is_some_and(|c| c.value.is_finite());
    let last_zero = constants.last().is_some_and(|c| c.value == 0.0);
    let positives = constants
        .iter()
        .filter(|c| c.value > 0.0 && c.value.is_finite())
        .count();
    // A vanishing top-scale constant means all variation lives inside the
    // largest ball (compact support on the sample) and certifies
    // boundedness directly; otherwise the fitted growth rate decides, and
    // it needs at least two positive samples to be meaningful.
    let sublinear = last_finite
        && (last_zero || positives == 0 || (positives >= 2 && slope <= cfg.slope_threshold));
    let mut classical = Vec::new();
    if !sublinear || space.len() <= cfg.sweep.exact_point_cap {
        for &r in &sorted {
            classical.push(classical_higson_modulus_with(f, space, ball_r, r, &cfg.sweep)?);
        }
    }
    let classification = if sublinear {
        HigsonClass::SublinearHigson
    } else {
        let m_first = classical.first().map_or(0.0, |c| c.value);
        let m_last = classical.last().map_or(0.0, |c| c.value);
        if m_first > 0.0 && m_last < cfg.classical_decay_factor * m_first {
            HigsonClass::ClassicalHigsonOnly
        } else {
            HigsonClass::Neither
        }
    };
    Ok(HigsonReport {
        scales: sorted,
        constants,
        classical,
        slope,
        classification,
    })
}

// ---------------------------------------------------------------------------
// Witness families
// ---------------------------------------------------------------------------

/// Disjointly supported unit bumps anchored on a norm-doubling sequence.
#[derive(Clone, Debug)]
pub struct BumpFamily {
    pub anchors: Vec<usize>,
    pub functions: Vec<SampledFunction>,
}

/// Picks anchors greedily (the point of smallest norm at least 1, then
/// repeatedly the point of smallest norm strictly exceeding twice the
/// previous anchor's norm) and returns the truncated-cone bumps
/// `max(0, 1 - 4 d(x, x_n) / |x_n|)`, each with unit sup norm and support
/// inside `B(x_n, |x_n|/4)`.
pub fn bump_family(space: &SampledSpace, count: usize) -> Result<BumpFamily> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be positive".into()));
    }
    let mut anchors: Vec<usize> = Vec::with_capacity(count);
    // first anchor: norm at least 1; later anchors: norm strictly above
    // twice the previous one
    let mut admissible: Box<dyn Fn(f64) -> bool> = Box::new(|nm| nm >= 1.0);
    for _ in 0..count {
        let mut best: Option<usize> = None;
        for i in 0..space.len() {
            let nm = space.norm(i);
            if admissible(nm) {
                match best {
                    None => best = Some(i),
                    Some(b) => {
                        let bn = space.norm(b);
                        if nm < bn || (nm == bn && i < b) {
                            best = Some(i);
                        }
                    }
                }
            }
        }
        let Some(anchor) = best else {
            return Err(Error::Construction(format!(
                "only {} norm-doubling anchors available, {count} requested \
                 (not enough nonempty dyadic annuli)",
                anchors.len()
            )));
        };
        let threshold = 2.0 * space.norm(anchor);
        admissible = Box::new(move |nm| nm > threshold);
        anchors.push(anchor);
    }
    let functions = anchors
        .iter()
        .map(|&a| {
            let norm_a = space.norm(a);
            SampledFunction::from_real_fn(space, |i| {
                (1.0 - 4.0 * space.distance(i, a) / norm_a).max(0.0)
            })
        })
        .collect();
    Ok(BumpFamily { anchors, functions })
}

/// Selector-weighted sum `sum_n P(n) * bump_n`; for distinct selectors the
/// sup distance is exactly 1 (attained at the anchor of a differing index).
pub fn psi_p(selector: &[bool], family: &BumpFamily) -> Result<SampledFunction> {
    if selector.len() != family.functions.len() {
        return Err(Error::InvalidInput(format!(
            "selector length {} != family size {}",
            selector.len(),
            family.functions.len()
        )));
    }
    let n = family.functions.first().map_or(0, SampledFunction::len);
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for (on, f) in selector.iter().zip(&family.functions) {
        if *on {
            for (v, fv) in values.iter_mut().zip(f.values()) {
                *v += fv;
            }
        }
    }
    let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(SampledFunction {
        space_fp: family
            .functions
            .first()
            .map_or(0, SampledFunction::space_fingerprint),
        values,
        sup_norm,
    })
}

/// Extension of an assignment on the anchor sequence to the whole sample:
/// `psi~(x) = sum_n psi(x_n) * bump_n(x)`. Restricting back to the anchors
/// reproduces the assignment exactly (disjoint supports).
pub fn linfty_extension(
    family: &BumpFamily,
    anchor_values: &[Complex64],
) -> Result<SampledFunction> {
    if anchor_values.len() != family.functions.len() {
        return Err(Error::InvalidInput("anchor value count mismatch".into()));
    }
    let n = family.functions.first().map_or(0, SampledFunction::len);
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for (c, f) in anchor_values.iter().zip(&family.functions) {
        for (v, fv) in values.iter_mut().zip(f.values()) {
            *v += c * fv;
        }
    }
    let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(SampledFunction {
        space_fp: family
            .functions
            .first()
            .map_or(0, SampledFunction::space_fingerprint),
        values,
        sup_norm,
    })
}

// ---------------------------------------------------------------------------
// Separating witness for non-close maps
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SeparatingWitness {
    pub function: SampledFunction,
    /// Values at the image points `f(x_n)`; all 1 by construction.
    pub at_f: Vec<f64>,
    /// Values at `g(x_n)`; 0 when the separation hypothesis has margin.
    pub at_g: Vec<f64>,
    pub constants: Vec<ScaleConstant>,
}

/// Builds bumps of radius `c |x_n| / 4` centered at the image points
/// `f(x_n)` (combined by pointwise max) under the hypothesis
/// `d(f(x_n), g(x_n)) >= c |x_n|` along the sequence, and measures its
/// scale constants on the codomain sample.
pub fn separating_witness(
    f: &SampledMap,
    g: &SampledMap,
    domain: &SampledSpace,
    codomain: &SampledSpace,
    sequence: &[usize],
    c: f64,
    scales: &[f64],
) -> Result<SeparatingWitness> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput("separation constant must be positive".into()));
    }
    if sequence.is_empty() {
        return Err(Error::InvalidInput("empty sequence".into()));
    }
    for &x in sequence {
        if x >= domain.len() {
            return Err(Error::InvalidInput(format!("sequence id {x} out of range")));
        }
        let d = codomain.distance(f.target(x), g.target(x));
        if d < c * domain.norm(x) {
            return Err(Error::Precondition(format!(
                "d(f(x_n), g(x_n)) = {d} < c |x_n| = {} at x_n = {x}",
                c * domain.norm(x)
            )));
        }
    }
    let centers: Vec<(usize, f64)> = sequence
        .iter()
        .map(|&x| (f.target(x), c * domain.norm(x)))
        .collect();
    let witness = SampledFunction::from_real_fn(codomain, |y| {
        centers
            .iter()
            .map(|&(ctr, scale)| (1.0 - 4.0 * codomain.distance(y, ctr) / scale).max(0.0))
            .fold(0.0, f64::max)
    });
    let at_f: Vec<f64> = sequence
        .iter()
        .map(|&x| witness.value(f.target(x)).re)
        .collect();
    let at_g: Vec<f64> = sequence
        .iter()
        .map(|&x| witness.value(g.target(x)).re)
        .collect();
    let mut constants = Vec::new();
    for &r in scales {
        constants.push(sublinear_higson_constant(&witness, codomain, r)?);
    }
    Ok(SeparatingWitness {
        function: witness,
        at_f,
        at_g,
        constants,
    })
}

// ---------------------------------------------------------------------------
// Square-root growth discrimination
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub s: f64,
    pub t: f64,
    /// `(annulus index, sup of |sqrt(s|x|) - sqrt(t|x|)|)`.
    pub per_annulus: Vec<(i32, f64)>,
    pub bounded: bool,
    pub slope: f64,
}

/// Per-annulus supremum of `|sqrt(s |x|) - sqrt(t |x|)|`. Flagged bounded
/// when the final-annulus sup stays below `1.05 x` the first-annulus sup
/// (plus an absolute epsilon for the identically-zero case `s = t`).
pub fn sqrt_difference_growth(s: f64, t: f64, space: &SampledSpace) -> Result<GrowthReport> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::InvalidInput("s and t must be positive".into()));
    }
    let mut per_annulus: Vec<(i32, f64)> = Vec::new();
    for (&k, ids) in space.annuli() {
        if k < 0 {
            continue;
        }
        let sup = ids
            .iter()
            .map(|&i| {
                let nm = space.norm(i);
                ((s * nm).sqrt() - (t * nm).sqrt()).abs()
            })
            .fold(0.0, f64::max);
        per_annulus.push((k, sup));
    }
    if per_annulus.is_empty() {
        return Err(Error::EmptyScale {
            scale: 1.0,
            needed: 1,
        });
    }
    let first = per_annulus.first().unwrap().1;
    let last = per_annulus.last().unwrap().1;
    let bounded = last < 1.05 * first + 1e-12;
    let slope = loglog_slope(
        &per_annulus
            .iter()
            .map(|&(k, v)| ((2.0f64).powi(k) * 1.5, v))
            .collect::<Vec<_>>(),
    );
    Ok(GrowthReport {
        s,
        t,
        per_annulus,
        bounded,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::build_halfline;

    fn halfline(n: usize) -> SampledSpace {
        build_halfline(n, 1.0).unwrap()
    }

    #[test]
    fn constant_function_zero_everywhere() {
        let hl = halfline(64);
        let f = SampledFunction::constant(&hl, Complex64::new(0.7, -0.2));
        for r in [1.0, 4.0, 16.0] {
            let c = sublinear_higson_constant(&f, &hl, r).unwrap();
            assert_eq!(c.value, 0.0);
            let m = classical_higson_modulus(&f, &hl, 2.0, r).unwrap();
            assert_eq!(m.value, 0.0);
        }
    }

    #[test]
    fn oracle_agreement_on_small_halfline() {
        // brute-force oracle, written independently of pair_sup
        let hl = halfline(200);
        let f = SampledFunction::from_real_fn(&hl, |i| {
            let x = hl.norm(i);
            x / (1.0 + x)
        });
        let r = 8.0;
        let got = sublinear_higson_constant(&f, &hl, r).unwrap();
        let mut best = 0.0f64;
        let mut wit = None;
        for i in 0..hl.len() {
            for j in (i + 1)..hl.len() {
                if hl.norm(i) > r && hl.norm(j) > r {
                    let ratio = r * (f.value(i) - f.value(j)).norm() / hl.distance(i, j);
                    if ratio > best {
                        best = ratio;
                        wit = Some((i, j));
                    }
                }
            }
        }
        assert_eq!(got.value, best);
        assert_eq!(got.witness, wit);
    }

    #[test]
    fn sqrt_norm_constant_grows_like_sqrt_r() {
        let hl = halfline(4096);
        let f = SampledFunction::from_real_fn(&hl, |i| hl.norm(i).sqrt());
        let scales = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0];
        let pts: Vec<(f64, f64)> = scales
            .iter()
            .map(|&r| {
                (
                    r,
                    sublinear_higson_constant(&f, &hl, r).unwrap().value,
                )
            })
            .collect();
        let slope = loglog_slope(&pts);
        assert!(
            (slope - 0.5).abs() <= 0.1,
            "slope {slope} not within 0.5 +- 0.1"
        );
    }

    #[test]
    fn classical_modulus_sqrt_example() {
        let hl = halfline(300);
        let f = SampledFunction::from_real_fn(&hl, |i| hl.norm(i).sqrt());
        // the diameter of sqrt over B(x, 1) is sqrt(x+1) - sqrt(x-1), twice
        // the one-sided increment: ~0.0995 at x = 101, vanishing at infinity
        let m = classical_higson_modulus(&f, &hl, 1.0, 100.0).unwrap();
        let analytic = (102.0f64).sqrt() - (100.0f64).sqrt();
        assert!(m.value <= analytic + 1e-9, "modulus {}", m.value);
        assert!(m.value >= analytic - 1e-2);
    }

    #[test]
    fn identity_never_higson() {
        let hl = halfline(128);
        let f = SampledFunction::from_real_fn(&hl, |i| hl.norm(i));
        let m = classical_higson_modulus(&f, &hl, 1.0, 16.0).unwrap();
        assert!(m.value >= 1.0 - 1e-9);
    }

    #[test]
    fn classify_disk_pullback_sublinear() {
        let grid = crate::spaces::build_euclidean_grid(2, 128.0, 32, 11).unwrap();
        // z / (1 + |z|) as a complex value on the plane sample
        let f = SampledFunction::from_fn(&grid, |i| {
            let c = grid.coords(i);
            let z = Complex64::new(c[0], c[1]);
            z / (1.0 + z.norm())
        });
        let rep = classify(
            &f,
            &grid,
            &[4.0, 8.0, 16.0, 32.0, 64.0],
            &ClassifyConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.classification, HigsonClass::SublinearHigson, "{rep:?}");
    }

    #[test]
    fn classify_wound_sqrt_classical_only() {
        let hl = halfline(4096);
        let f = SampledFunction::from_fn(&hl, |i| {
            Complex64::from_polar(1.0, hl.norm(i).sqrt())
        });
        let rep = classify(
            &f,
            &hl,
            &[8.0, 32.0, 128.0, 512.0, 2048.0],
            &ClassifyConfig::default(),
        )
        .unwrap();
        assert_eq!(
            rep.classification,
            HigsonClass::ClassicalHigsonOnly,
            "slope {} classical {:?}",
            rep.slope,
            rep.classical.iter().map(|c| c.value).collect::<Vec<_>>()
        );
        assert!((rep.slope - 0.5).abs() <= 0.1);
    }

    #[test]
    fn classify_hash_noise_neither() {
        let hl = halfline(512);
        let f = SampledFunction::from_real_fn(&hl, |i| mix::sign(99, i));
        let rep = classify(
            &f,
            &hl,
            &[4.0, 8.0, 16.0, 32.0, 64.0],
            &ClassifyConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.classification, HigsonClass::Neither);
    }

    #[test]
    fn bump_family_properties() {
        let hl = halfline(1024);
        let fam = bump_family(&hl, 6).unwrap();
        assert_eq!(fam.anchors.len(), 6);
        for w in fam.anchors.windows(2) {
            assert!(hl.norm(w[1]) > 2.0 * hl.norm(w[0]));
        }
        for (f, &a) in fam.functions.iter().zip(&fam.anchors) {
            assert_eq!(f.value(a).re, 1.0);
            assert_eq!(f.sup_norm(), 1.0);
            // zero outside the quarter-norm ball
            for i in 0..hl.len() {
                if hl.distance(i, a) >= hl.norm(a) / 4.0 {
                    assert_eq!(f.value(i).re, 0.0);
                }
            }
        }
        // disjoint supports
        for i in 0..hl.len() {
            let live = fam
                .functions
                .iter()
                .filter(|f| f.value(i).norm() > 0.0)
                .count();
            assert!(live <= 1, "supports overlap at {i}");
        }
    }

    #[test]
    fn psi_p_distance_one() {
        let hl = halfline(1024);
        let fam = bump_family(&hl, 5).unwrap();
        let zero = psi_p(&[false; 5], &fam).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        let a = psi_p(&[true, false, true, false, true], &fam).unwrap();
        let b = psi_p(&[true, true, true, false, false], &fam).unwrap();
        assert_eq!(a.sup_distance(&b), 1.0);
        assert!(psi_p(&[true; 4], &fam).is_err());
    }

    #[test]
    fn linfty_extension_restricts_to_itself() {
        let hl = halfline(1024);
        let fam = bump_family(&hl, 5).unwrap();
        let vals: Vec<Complex64> = (0..5)
            .map(|i| Complex64::new(i as f64 * 0.3 - 0.5, 0.1 * i as f64))
            .collect();
        let ext = linfty_extension(&fam, &vals).unwrap();
        for (n, &a) in fam.anchors.iter().enumerate() {
            assert!((ext.value(a) - vals[n]).norm() < 1e-15);
        }
    }

    #[test]
    fn sqrt_growth_flags() {
        let hl = halfline(4096);
        let same = sqrt_difference_growth(1.0, 1.0, &hl).unwrap();
        assert!(same.bounded);
        let four = sqrt_difference_growth(1.0, 4.0, &hl).unwrap();
        assert!(!four.bounded);
        assert!((four.slope - 0.5).abs() <= 0.1, "slope {}", four.slope);
        let close = sqrt_difference_growth(1.0, 1.21, &hl).unwrap();
        assert!(!close.bounded);
        assert!((close.slope - 0.5).abs() <= 0.1, "slope {}", close.slope);
    }

    #[test]
    fn algebra_closure_at_fixed_scale() {
        let hl = halfline(256);
        let f = SampledFunction::from_real_fn(&hl, |i| hl.norm(i) / (1.0 + hl.norm(i)));
        let g = SampledFunction::from_fn(&hl, |i| {
            Complex64::from_polar(0.8, hl.norm(i) / (3.0 + hl.norm(i)))
        });
        let r = 8.0;
        let cf = sublinear_higson_constant(&f, &hl, r).unwrap().value;
        let cg = sublinear_higson_constant(&g, &hl, r).unwrap().value;
        let sum = sublinear_higson_constant(&f.add(&g), &hl, r).unwrap().value;
        let prod = sublinear_higson_constant(&f.mul(&g), &hl, r).unwrap().value;
        assert!(sum <= cf + cg + 1e-9);
        assert!(prod <= f.sup_norm() * cg + g.sup_norm() * cf + 1e-9);
    }
}
