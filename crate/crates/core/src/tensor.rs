//! Slice and product operators relating functions on a cone to families of
//! functions on its unbounded factor.
//!
//! `lambda` turns a function on `P x_cone X` into the family of its slices
//! `p -> phi(p, .)` and verifies the slice modulus against the function's
//! scale-free oscillation constant. `omega` multiplies a function on `P`
//! with one on `X` into a function on the cone and verifies its per-scale
//! constants against the product bound. On the finite span of such products
//! the two operators invert each other exactly, and `psi_approx` closes the
//! gap to general families through partitions of unity on `P`.

use num_complex::Complex64;
use serde::Serialize;

use crate::cone::ConeSpace;
use crate::error::{Error, Result};
use crate::functions::{
    pair_sup,
    scale_free_constant, sublinear_higson_constant_with, SampledFunction,
    SweepConfig,
};
use crate::smoothing::{greedy_net_cover, hat_partition};
use crate::spaces::{CompactGraph, MetricSpace};

/// A function into the slice algebra: one function on `X` per vertex of `P`,
/// with the measured sup-norm Lipschitz modulus over `P`.
#[derive(Clone, Debug)]
pub struct FunctionFamily {
    p_fp: u64,
    x_fp: u64,
    slices: Vec<SampledFunction>,
    modulus: f64,
    modulus_witness: Option<(usize, usize)>,
}

impl FunctionFamily {
    pub fn new(p: &CompactGraph, slices: Vec<SampledFunction>) -> Result<Self> {
        if slices.len() != p.len() {
            return Err(Error::InvalidInput(format!(
                "{} slices for {} compact-factor vertices",
                slices.len(),
                p.len()
            )));
        }
        let x_fp = slices
            .first()
            .map(SampledFunction::space_fingerprint)
            .unwrap_or(0);
        if slices.iter().any(|s| s.space_fingerprint() != x_fp) {
            return Err(Error::InvalidInput(
                "slices live on different fiber spaces".into(),
            ));
        }
        let mut modulus = 0.0f64;
        let mut witness = None;
        for i in 0..slices.len() {
            for j in 0..i {
                let d = p.distance(i, j);
                if d <= 0.0 {
                    continue;
                }
                let gap = slices[i].sup_distance(&slices[j]) / d;
                if gap > modulus {
                    modulus = gap;
                    witness = Some((j, i));
                }
            }
        }
        Ok(FunctionFamily {
            p_fp: p.fingerprint(),
            x_fp,
            slices,
            modulus,
            modulus_witness: witness,
        })
    }

    pub fn slices(&self) -> &[SampledFunction] {
        &self.slices
    }
    pub fn slice(&self, p: usize) -> &SampledFunction {
        &self.slices[p]
    }
    pub fn len(&self) -> usize {
        self.slices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
    /// Measured sup-norm Lipschitz constant over `P`.
    pub fn modulus(&self) -> f64 {
        self.modulus
    }
    pub fn modulus_witness(&self) -> Option<(usize, usize)> {
        self.modulus_witness
    }
    pub fn p_fingerprint(&self) -> u64 {
        self.p_fp
    }
    pub fn x_fingerprint(&self) -> u64 {
        self.x_fp
    }

    /// Max over `P` of the slice sup norms; equals the sup norm of the
    /// corresponding cone function (the slicing is a re-indexing).
    pub fn sup_norm(&self) -> f64 {
        self.slices.iter().map(SampledFunction::sup_norm).fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// lambda: slicing a cone function
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct LambdaReport {
    /// Scale-free oscillation constant of the cone function (the pair-level
    /// supremum of `min(|v|,|v'|) |dphi| / d`).
    pub c_hat: f64,
    /// Measured sup-norm Lipschitz modulus of the slices outside the unit
    /// shell of `X`.
    pub shell_modulus: f64,
    pub shell_witness: Option<(usize, usize)>,
    /// `shell_modulus <= c_hat + tolerance`.
    pub bound_ok: bool,
    pub tolerance: f64,
}

/// Slices a cone function into its family `p -> phi(p, .)`.
pub fn lambda(phi: &SampledFunction, cone: &ConeSpace) -> Result<FunctionFamily> {
    if phi.space_fingerprint() != cone.fingerprint() || phi.len() != cone.len() {
        return Err(Error::InvalidInput(
            "function does not live on this cone".into(),
        ));
    }
    let n_p = cone.n_p();
    let n_x = cone.n_x();
    let slices: Vec<SampledFunction> = (0..n_p)
        .map(|p| {
            SampledFunction::new(
                cone.x_space(),
                (0..n_x).map(|x| phi.value(cone.vertex(p, x))).collect(),
            )
        })
        .collect::<Result<_>>()?;
    FunctionFamily::new(cone.p_space(), slices)
}

/// Verifies the slice bound: outside the unit shell of the fiber, the
/// sup-norm gap of two slices is at most the scale-free constant times the
/// compact-factor distance. The shell is excluded because the P-move weight
/// clamps at 1 there.
pub fn lambda_report(
    phi: &SampledFunction,
    cone: &ConeSpace,
    cfg: &SweepConfig,
) -> Result<(FunctionFamily, LambdaReport)> {
    let family = lambda(phi, cone)?;
    let c_hat = scale_free_constant(phi, cone, cfg)?;
    let outside: Vec<usize> = (0..cone.n_x())
        .filter(|&x| cone.x_space().norm(x) > 1.0)
        .collect();
    let p = cone.p_space();
    let mut shell_modulus = 0.0f64;
    let mut witness = None;
    for i in 0..family.len() {
        for j in 0..i {
            let d = p.distance(i, j);
            if d <= 0.0 {
                continue;
            }
            let gap = outside
                .iter()
                .map(|&x| (family.slice(i).value(x) - family.slice(j).value(x)).norm())
                .fold(0.0, f64::max);
            let ratio = gap / d;
            if ratio > shell_modulus {
                shell_modulus = ratio;
                witness = Some((j, i));
            }
        }
    }
    let tolerance = 1e-9;
    let report = LambdaReport {
        c_hat: c_hat.value,
        shell_modulus,
        shell_witness: witness,
        bound_ok: shell_modulus <= c_hat.value + tolerance,
        tolerance,
    };
    Ok((family, report))
}

// ---------------------------------------------------------------------------
// omega: products into the cone
// ---------------------------------------------------------------------------

/// `(p, x) -> phi(p) psi(x)` as a function on the cone.
pub fn omega(
    phi_p: &SampledFunction,
    psi_x: &SampledFunction,
    cone: &ConeSpace,
) -> Result<SampledFunction> {
    if phi_p.space_fingerprint() != cone.p_space().fingerprint()
        || phi_p.len() != cone.n_p()
    {
        return Err(Error::InvalidInput(
            "first factor does not live on the compact factor".into(),
        ));
    }
    if psi_x.space_fingerprint() != cone.x_space().fingerprint()
        || psi_x.len() != cone.n_x()
    {
        return Err(Error::InvalidInput(
            "second factor does not live on the fiber".into(),
        ));
    }
    SampledFunction::new(
        cone,
        (0..cone.len())
            .map(|v| phi_p.value(cone.p_of(v)) * psi_x.value(cone.x_of(v)))
            .collect(),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct OmegaScaleRow {
    pub scale: f64,
    pub measured: f64,
    pub psi_constant: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OmegaReport {
    /// Measured Lipschitz constant of the compact-factor function.
    pub lip_phi: f64,
    pub rows: Vec<OmegaScaleRow>,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct OmegaConfig {
    pub tolerance: f64,
    pub sweep: SweepConfig,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        OmegaConfig {
            tolerance: 0.10,
            sweep: SweepConfig::default(),
        }
    }
}

/// Measures, per scale, the oscillation constant of the product against
/// `Lip(phi) ||psi|| + C_psi(R) ||phi||`.
///
/// The supremum ranges over vertex pairs whose *fiber* norms both exceed
/// `R` (the pair set of the product bound, which divides by the fiber
/// norm); restricting by cone norm instead would admit clamp-shell pairs
/// at fiber norm near 1 that the bound says nothing about.
pub fn omega_report(
    phi_p: &SampledFunction,
    psi_x: &SampledFunction,
    cone: &ConeSpace,
    scales: &[f64],
    cfg: &OmegaConfig,
) -> Result<(SampledFunction, OmegaReport)> {
    let product = omega(phi_p, psi_x, cone)?;
    let p = cone.p_space();
    let mut lip_phi = 0.0f64;
    for i in 0..p.len() {
        for j in 0..i {
            let d = p.distance(i, j);
            if d > 0.0 {
                lip_phi = lip_phi.max((phi_p.value(i) - phi_p.value(j)).norm() / d);
            }
        }
    }
    let mut rows = Vec::new();
    for &r in scales {
        let ids: Vec<usize> = (0..cone.len())
            .filter(|&v| cone.x_norm(v) > r)
            .collect();
        if ids.len() < 2 {
            return Err(Error::EmptyScale {
                scale: r,
                needed: 2,
            });
        }
        let values = product.values();
        let mut measured = pair_sup(cone, &ids, &cfg.sweep, |i, j, d| {
            let delta = (values[i] - values[j]).norm();
            if d > 0.0 {
                r * delta / d
            } else if delta > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        });
        measured.scale = r;
        let psi_c = sublinear_higson_constant_with(psi_x, cone.x_space(), r, &cfg.sweep)?;
        let bound = lip_phi * psi_x.sup_norm() + psi_c.value * phi_p.sup_norm();
        let allowance = bound * (1.0 + cfg.tolerance) + 1e-9;
        rows.push(OmegaScaleRow {
            scale: r,
            measured: measured.value,
            psi_constant: psi_c.value,
            bound,
            pass: measured.value <= allowance,
        });
    }
    let pass = !rows.is_empty() && rows.iter().all(|r| r.pass);
    Ok((product, OmegaReport { lip_phi, rows, pass }))
}

// ---------------------------------------------------------------------------
// Roundtrip on the product span
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct RoundtripReport {
    /// Max pointwise residual between the sliced product sum and the
    /// directly assembled family.
    pub residual: f64,
    pub terms: usize,
}

/// Applies `lambda . omega` to a finite sum of elementary products and
/// compares slice-by-slice with the directly assembled family
/// `p -> sum_i phi_i(p) psi_i`; the two agree pointwise (pure reindexing).
pub fn roundtrip(
    terms: &[(SampledFunction, SampledFunction)],
    cone: &ConeSpace,
) -> Result<RoundtripReport> {
    if terms.is_empty() {
        return Err(Error::InvalidInput("need at least one product term".into()));
    }
    let mut total: Option<SampledFunction> = None;
    for (phi_p, psi_x) in terms {
        let product = omega(phi_p, psi_x, cone)?;
        total = Some(match total {
            None => product,
            Some(acc) => acc.add(&product),
        });
    }
    let family = lambda(&total.unwrap(), cone)?;
    let mut residual = 0.0f64;
    for p in 0..cone.n_p() {
        for x in 0..cone.n_x() {
            let direct: Complex64 = terms
                .iter()
                .map(|(phi_p, psi_x)| phi_p.value(p) * psi_x.value(x))
                .sum();
            residual = residual.max((family.slice(p).value(x) - direct).norm());
        }
    }
    Ok(RoundtripReport {
        residual,
        terms: terms.len(),
    })
}

// ---------------------------------------------------------------------------
// Partition-of-unity approximation of general families
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct PsiApproxReport {
    pub n: usize,
    pub net_radius: f64,
    pub anchors: usize,
    /// `max_p || family(p) - approximation(p) ||_sup`.
    pub sup_error: f64,
    /// Lipschitz bound `modulus / n`.
    pub bound: f64,
    pub within_bound: bool,
}

/// Approximates a family by `p -> sum_i h_i(p) family(p_i)` where `h_i` is
/// a hat partition subordinate to a cover of `P` by balls of diameter below
/// `1/n`. Returns the approximant family and the exact sup error, which is
/// at most `modulus / n`.
pub fn psi_approx(
    family: &FunctionFamily,
    n: usize,
    p: &CompactGraph,
) -> Result<(FunctionFamily, PsiApproxReport)> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    if family.p_fingerprint() != p.fingerprint() {
        return Err(Error::InvalidInput(
            "family lives on a different compact factor".into(),
        ));
    }
    // members are 2r-balls of diameter <= 4r < 1/n
    let r = 0.2499 / n as f64;
    if p.len() > 1 && r < 2.0 * p.sampling_mesh() {
        return Err(Error::Construction(format!(
            "mesh 1/{n} unachievable: compact factor sampled at {}",
            p.sampling_mesh()
        )));
    }
    let cover = greedy_net_cover(p, r)?;
    let pou = hat_partition(&cover, p)?;
    let n_x = family.slices().first().map_or(0, SampledFunction::len);
    let mut approx_slices = Vec::with_capacity(p.len());
    for hats in &pou.per_point {
        let mut values = vec![Complex64::new(0.0, 0.0); n_x];
        for &(a, h) in hats {
            let anchor_slice = family.slice(cover.anchors[a as usize]);
            for (v, s) in values.iter_mut().zip(anchor_slice.values()) {
                *v += s * h;
            }
        }
        approx_slices.push(SampledFunction::from_raw(family.x_fingerprint(), values));
    }
    let approx = FunctionFamily {
        p_fp: family.p_fp,
        x_fp: family.x_fp,
        slices: approx_slices,
        modulus: 0.0,
        modulus_witness: None,
    };
    let sup_error = family
        .slices()
        .iter()
        .zip(approx.slices())
        .map(|(a, b)| a.sup_distance(b))
        .fold(0.0, f64::max);
    let bound = family.modulus() / n as f64;
    let report = PsiApproxReport {
        n,
        net_radius: r,
        anchors: cover.anchors.len(),
        sup_error,
        bound,
        within_bound: sup_error <= bound + 1e-12,
    };
    Ok((approx, report))
}
