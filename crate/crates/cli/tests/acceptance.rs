//! Acceptance suite: ten numbered checks, one pass/fail line each.
//!
//! Run with `cargo test -p corona-lab --test acceptance -- --nocapture`
//! to see every line; the single test fails if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use corona_core::cone::{
    build_cone, cone_distance, refinement_convergence, verify_lower_bound, ConeConfig, PFamily,
    XFamily,
};
use corona_core::functions::{
    bump_family, classify, psi_p, sqrt_difference_growth, sublinear_higson_constant,
    ClassifyConfig, HigsonClass, SampledFunction, SweepConfig,
};
use corona_core::maps::{
    cone_homotopy_check, equivalence_witness_rn, glplus_path, ClosenessVerdict, CoarseConfig,
    CoarseVerdict, EquivalenceConfig, GlPath,
};
use corona_core::smoothing::{
    decaying_sign_noise, greedy_net_cover, hat_partition, smooth, verify_appendix_bound,
    BoundConfig,
};
use corona_core::spaces::{
    build_euclidean_grid, build_halfline, build_interval, build_point, build_random_cloud,
    MetricSpace, SampledSpace,
};
use corona_core::tensor::{lambda_report, omega_report, psi_approx, roundtrip, FunctionFamily, OmegaConfig};

type CriterionResult = Result<String, String>;

fn run_criterion(
    n: usize,
    name: &str,
    budget_secs: Option<f64>,
    body: impl FnOnce() -> CriterionResult,
) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed().as_secs_f64();
    let (ok, detail) = match outcome {
        Ok(Ok(detail)) => {
            let within = budget_secs.map_or(true, |b| elapsed < b);
            if within {
                (true, detail)
            } else {
                (
                    false,
                    format!("{detail}; exceeded runtime budget {budget_secs:?} s"),
                )
            }
        }
        Ok(Err(reason)) => (false, reason),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    println!(
        "ACCEPTANCE {n:02} {name}: {} ({elapsed:.2} s) {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

#[test]
fn acceptance() {
    let results = [
        run_criterion(1, "oracle-equivalence", Some(10.0), criterion_1),
        run_criterion(2, "witness-family", Some(30.0), criterion_2),
        run_criterion(3, "appendix-bound", Some(60.0), criterion_3),
        run_criterion(4, "cone-metric", Some(120.0), criterion_4),
        run_criterion(5, "omega-lambda-bounds", None, criterion_5),
        run_criterion(6, "psi-approximation", None, criterion_6),
        run_criterion(7, "plane-equivalence", None, criterion_7),
        run_criterion(8, "growth-discrimination", None, criterion_8),
        run_criterion(9, "cone-homotopy", None, criterion_9),
        run_criterion(10, "determinism", None, criterion_10),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}

// ---------------------------------------------------------------------------
// 1. Oracle equivalence of the three scale constants on randomized spaces
// ---------------------------------------------------------------------------

/// Independent brute-force oracle: plain double loop in id order, strict
/// improvement keeps the lexicographically smallest witness.
fn oracle_pair_sup(
    space: &SampledSpace,
    r: f64,
    ratio: impl Fn(usize, usize, f64) -> f64,
) -> (f64, Option<(usize, usize)>) {
    let mut best = 0.0f64;
    let mut wit = None;
    for i in 0..space.len() {
        if space.norm(i) <= r {
            continue;
        }
        for j in (i + 1)..space.len() {
            if space.norm(j) <= r {
                continue;
            }
            let v = ratio(i, j, space.distance(i, j));
            if v > best || (v == best && wit.is_none()) {
                best = v;
                wit = Some((i, j));
            }
        }
    }
    (best, wit)
}

fn oracle_classical(
    space: &SampledSpace,
    f: &SampledFunction,
    ball_r: f64,
    scale: f64,
) -> (f64, Option<(usize, usize)>) {
    let mut best = 0.0f64;
    let mut wit = None;
    for x in 0..space.len() {
        if space.norm(x) <= scale {
            continue;
        }
        let ball: Vec<usize> = (0..space.len())
            .filter(|&y| space.distance(x, y) <= ball_r)
            .collect();
        for (ai, &y1) in ball.iter().enumerate() {
            for &y2 in &ball[ai + 1..] {
                let d = (f.value(y1) - f.value(y2)).norm();
                let w = (y1.min(y2), y1.max(y2));
                if d > best || (d == best && wit.is_some_and(|cur| w < cur)) {
                    best = d;
                    wit = Some(w);
                } else if d == best && wit.is_none() {
                    wit = Some(w);
                }
            }
        }
    }
    (best, wit)
}

fn criterion_1() -> CriterionResult {
    let mut spaces_checked = 0;
    for k in 0..20u64 {
        let dim = 1 + (k as usize % 3);
        let n = 60 + 22 * k as usize; // 60 .. 478
        let space = build_random_cloud(dim, n, 64.0, 1_000 + k)
            .map_err(|e| format!("space build: {e}"))?;
        let f = SampledFunction::from_fn(&space, |i| {
            let nm = space.norm(i);
            Complex64::new(
                nm / (1.0 + nm),
                0.4 * corona_core::mix::sign(k ^ 0xf00d, i),
            )
        });
        let max_norm = space.max_norm();
        for &r in &[max_norm / 8.0, max_norm / 3.0] {
            if space.ids_outside(r).len() < 2 {
                continue;
            }
            // sublinear constant
            let got = sublinear_higson_constant(&f, &space, r)
                .map_err(|e| format!("constant: {e}"))?;
            let (want, want_wit) = oracle_pair_sup(&space, r, |i, j, d| {
                let delta = (f.value(i) - f.value(j)).norm();
                if d > 0.0 {
                    r * delta / d
                } else if delta > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            });
            if got.value != want || got.witness != want_wit {
                return Err(format!(
                    "sublinear mismatch on space {k} at R={r}: {} vs {want}, {:?} vs {want_wit:?}",
                    got.value, got.witness
                ));
            }
            // jump-tolerant constant
            let got = corona_core::smoothing::b_hl_constant(&f, &space, r)
                .map_err(|e| format!("b_hl: {e}"))?;
            let (want, want_wit) =
                oracle_pair_sup(&space, r, |i, j, d| {
                    r * (f.value(i) - f.value(j)).norm() / (d + 1.0)
                });
            if got.value != want || got.witness != want_wit {
                return Err(format!(
                    "b_hl mismatch on space {k} at R={r}: {} vs {want}",
                    got.value
                ));
            }
            // classical modulus
            let ball_r = 2.0 * space.sampling_mesh();
            let got = corona_core::functions::classical_higson_modulus(&f, &space, ball_r, r)
                .map_err(|e| format!("classical: {e}"))?;
            let (want, want_wit) = oracle_classical(&space, &f, ball_r, r);
            if got.value != want || got.witness != want_wit {
                return Err(format!(
                    "classical mismatch on space {k} at R={r}: {} vs {want}, {:?} vs {want_wit:?}",
                    got.value, got.witness
                ));
            }
        }
        spaces_checked += 1;
    }
    if spaces_checked < 20 {
        return Err(format!("only {spaces_checked} spaces checked"));
    }
    Ok(format!(
        "3 constants match brute force exactly on {spaces_checked} random spaces"
    ))
}

// ---------------------------------------------------------------------------
// 2. Witness family on a 2^14-point half-line
// ---------------------------------------------------------------------------

fn criterion_2() -> CriterionResult {
    let hl = build_halfline(16_383, 1.0).map_err(|e| e.to_string())?; // 2^14 points
    assert_eq!(hl.len(), 16_384);
    let family = bump_family(&hl, 8).map_err(|e| e.to_string())?;
    let psis: Vec<SampledFunction> = (0..256u32)
        .map(|mask| {
            let selector: Vec<bool> = (0..8).map(|b| mask >> b & 1 == 1).collect();
            psi_p(&selector, &family)
        })
        .collect::<Result<_, _>>()
        .map_err(|e: corona_core::Error| e.to_string())?;

    // pairwise sup distance exactly 1
    let bad_pair = (0..psis.len())
        .into_par_iter()
        .find_map_any(|i| {
            for j in 0..i {
                if i == j {
                    continue;
                }
                if psis[i].sup_distance(&psis[j]) != 1.0 {
                    return Some((j, i));
                }
            }
            None
        });
    if let Some((i, j)) = bad_pair {
        return Err(format!("sup distance of psi_{i}, psi_{j} is not exactly 1"));
    }

    // every member classified sublinear (subsampled sweeps above the cap)
    let cfg = ClassifyConfig {
        sweep: SweepConfig {
            budget_pairs: 30_000,
            ..SweepConfig::default()
        },
        ..ClassifyConfig::default()
    };
    let scales = [4.0, 16.0, 64.0, 256.0, 1024.0];
    let misclassified = psis
        .par_iter()
        .enumerate()
        .find_map_any(|(i, psi)| {
            match classify(psi, &hl, &scales, &cfg) {
                Ok(rep) if rep.classification == HigsonClass::SublinearHigson => None,
                Ok(rep) => Some(format!(
                    "psi_{i} classified {:?} (slope {})",
                    rep.classification, rep.slope
                )),
                Err(e) => Some(format!("psi_{i}: {e}")),
            }
        });
    if let Some(msg) = misclassified {
        return Err(msg);
    }
    Ok("256 selector functions, pairwise sup distance exactly 1, all sublinear".into())
}

// ---------------------------------------------------------------------------
// 3. Smoothing bound on the half-line noise pipeline
// ---------------------------------------------------------------------------

fn criterion_3() -> CriterionResult {
    let hl = build_halfline(4_096, 1.0).map_err(|e| e.to_string())?;
    let base = SampledFunction::from_real_fn(&hl, |i| {
        let nm = hl.norm(i);
        nm / (1.0 + nm)
    });
    let f = base.add(&decaying_sign_noise(&hl, 42, 8.0));
    let cover = greedy_net_cover(&hl, 2.0).map_err(|e| e.to_string())?;
    let pou = hat_partition(&cover, &hl).map_err(|e| e.to_string())?;
    let g = smooth(&f, &pou, &cover, &hl).map_err(|e| e.to_string())?;
    let scales: Vec<f64> = (5..=11).map(|k| (2.0f64).powi(k)).collect(); // 32 .. 2048
    let rep = verify_appendix_bound(
        &f,
        &g,
        &hl,
        &cover,
        &pou,
        hl.quasi_geodesic_c(),
        &scales,
        &BoundConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    if rep.rows.is_empty() {
        return Err("no scales beyond twice the member diameter".into());
    }
    for row in &rep.rows {
        if !row.pass {
            return Err(format!(
                "C_g({}) = {} exceeds bound {} with 10% tolerance",
                row.scale, row.measured, row.bound
            ));
        }
    }
    if !rep.decay_ok {
        return Err(format!(
            "residual decay slope {} above -0.8",
            rep.residual_slope
        ));
    }
    Ok(format!(
        "bound {:.1} honored at {} scales; residual slope {:.2}",
        rep.bound,
        rep.rows.len(),
        rep.residual_slope
    ))
}

// ---------------------------------------------------------------------------
// 4. Cone metric: degenerate factor, refinement, lower bound, scale
// ---------------------------------------------------------------------------

fn criterion_4() -> CriterionResult {
    // (a) degenerate compact factor: cone distance equals the fiber metric
    // exactly on all pairs
    let x = build_halfline(2_000, 1.0).map_err(|e| e.to_string())?;
    let rule = x.neighbor_rule();
    let cone = build_cone(build_point(), x, rule).map_err(|e| e.to_string())?;
    for i in 0..cone.len() {
        let row = cone.distance_row(i);
        for j in 0..cone.len() {
            let want = (i as f64 - j as f64).abs();
            if row[j] != want {
                return Err(format!("degenerate cone: d({i},{j}) = {} != {want}", row[j]));
            }
        }
    }
    drop(cone);

    // (b) refinement over 3 levels: monotone downward, final change < 5%
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
    .map_err(|e| e.to_string())?;
    if !rep.monotone_nonincreasing {
        return Err("interval-cone refinement not monotone".into());
    }
    if rep.final_rel_change.iter().any(|&c| c >= 0.05) {
        return Err(format!(
            "final-level change {:?} reaches 5%",
            rep.final_rel_change
        ));
    }
    // the circle cone with a step that misses the clamp level: the optimal
    // dip sits between sample levels, so refinement genuinely improves
    let circle = refinement_convergence(
        PFamily::Circle { n0: 8 },
        XFamily {
            n_max0: 26,
            step0: 0.75,
        },
        3,
        &[((0, 26), (4, 26))],
        ConeConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    if !circle.monotone_nonincreasing {
        return Err("circle-cone refinement not monotone".into());
    }
    let d01 = -circle.successive_diffs[0][0];
    let d12 = -circle.successive_diffs[1][0];
    if !(d01 > 1e-6 && d12 >= 0.0 && d12 < d01) {
        return Err(format!(
            "circle-cone successive differences not decreasing: {d01} then {d12}"
        ));
    }

    // (c) weakened lower bound, exhaustive at one-mesh tolerance
    let x = build_halfline(32, 1.0).map_err(|e| e.to_string())?;
    let rule = x.neighbor_rule();
    let p = build_interval(0.25).map_err(|e| e.to_string())?;
    let cone = build_cone(p, x, rule).map_err(|e| e.to_string())?;
    let tol = cone.default_tolerance();
    let lb = verify_lower_bound(&cone, 4.0, tol).map_err(|e| e.to_string())?;
    if !lb.weakened_pass {
        return Err(format!(
            "weakened lower bound failed: margin {} at {:?}",
            lb.weakened_worst_margin, lb.weakened_witness
        ));
    }

    // (d) scale: ~1e5 product vertices build and probe
    let x = build_halfline(779, 1.0).map_err(|e| e.to_string())?;
    let rule = x.neighbor_rule();
    let p = corona_core::spaces::build_sphere_graph(2, std::f64::consts::PI / 64.0)
        .map_err(|e| e.to_string())?;
    let big = build_cone(p, x, rule).map_err(|e| e.to_string())?;
    if big.len() < 99_000 {
        return Err(format!("big cone has only {} vertices", big.len()));
    }
    for &(a, b) in &[(10usize, 500usize), (3, 770), (100, 101)] {
        let d = cone_distance(&big, (0, a), (0, b)).map_err(|e| e.to_string())?;
        let want = (a as f64 - b as f64).abs();
        if d != want {
            return Err(format!("big cone probe d = {d} != {want}"));
        }
    }
    Ok(format!(
        "exact fiber metric on 2001 vertices; refinement monotone, circle diffs \
         {d01:.3} then {d12:.3}; lower bound over {} pairs; {}-vertex build probed",
        lb.pairs_checked,
        big.len()
    ))
}

// ---------------------------------------------------------------------------
// 5. Product/slice operator bounds on the circle cone
// ---------------------------------------------------------------------------

fn criterion_5() -> CriterionResult {
    let x = build_halfline(63, 1.0).map_err(|e| e.to_string())?;
    let rule = x.neighbor_rule();
    let p = corona_core::spaces::build_sphere_graph(2, std::f64::consts::PI / 16.0)
        .map_err(|e| e.to_string())?;
    let cone = build_cone(p, x, rule).map_err(|e| e.to_string())?;
    let angle = |pi: usize| {
        let c = cone.p_space().coords(pi).unwrap();
        c[1].atan2(c[0])
    };
    let phis: Vec<SampledFunction> = (1..=5)
        .map(|k| {
            SampledFunction::from_real_fn(cone.p_space(), |pi| {
                0.5 * ((k as f64) * angle(pi)).sin() / k as f64
            })
        })
        .collect();
    let psis: Vec<SampledFunction> = vec![
        SampledFunction::from_real_fn(cone.x_space(), |i| {
            let nm = cone.x_space().norm(i);
            nm / (1.0 + nm)
        }),
        SampledFunction::from_real_fn(cone.x_space(), |i| {
            let nm = cone.x_space().norm(i);
            (nm / (1.0 + nm)).powi(2)
        }),
        SampledFunction::from_real_fn(cone.x_space(), |i| 1.0 / (1.0 + cone.x_space().norm(i))),
        SampledFunction::from_fn(cone.x_space(), |i| {
            let nm = cone.x_space().norm(i);
            Complex64::from_polar(0.8, nm / (1.0 + nm))
        }),
        SampledFunction::constant(cone.x_space(), Complex64::new(0.6, -0.2)),
    ];
    let scales = [2.0, 4.0, 8.0, 16.0, 32.0];
    let mut worst_ratio = 0.0f64;
    for (i, phi) in phis.iter().enumerate() {
        for (j, psi) in psis.iter().enumerate() {
            let (product, om) = omega_report(phi, psi, &cone, &scales, &OmegaConfig::default())
                .map_err(|e| e.to_string())?;
            for row in &om.rows {
                if !row.pass {
                    return Err(format!(
                        "omega bound fails for product ({i},{j}) at R={}: {} > {}",
                        row.scale, row.measured, row.bound
                    ));
                }
                if row.bound > 0.0 {
                    worst_ratio = worst_ratio.max(row.measured / row.bound);
                }
            }
            let (_, lam) = lambda_report(&product, &cone, &SweepConfig::default())
                .map_err(|e| e.to_string())?;
            if !lam.bound_ok {
                return Err(format!(
                    "lambda slice modulus {} exceeds scale-free constant {} for ({i},{j})",
                    lam.shell_modulus, lam.c_hat
                ));
            }
        }
    }
    // product-form roundtrip residual
    let terms: Vec<(SampledFunction, SampledFunction)> = phis
        .iter()
        .cloned()
        .zip(psis.iter().cloned())
        .collect();
    let rt = roundtrip(&terms, &cone).map_err(|e| e.to_string())?;
    if rt.residual > 1e-12 {
        return Err(format!("roundtrip residual {} > 1e-12", rt.residual));
    }
    Ok(format!(
        "25 products within the bound (worst ratio {worst_ratio:.3}); roundtrip residual {:.1e}",
        rt.residual
    ))
}

// ---------------------------------------------------------------------------
// 6. Partition-of-unity approximation over the interval
// ---------------------------------------------------------------------------

fn criterion_6() -> CriterionResult {
    let p = build_interval(1.0 / 512.0).map_err(|e| e.to_string())?;
    let x = build_halfline(16, 1.0).map_err(|e| e.to_string())?;
    let base = SampledFunction::from_real_fn(&x, |i| 1.0 / (1.0 + x.norm(i)));

    // linear family: error <= modulus / n exactly
    let linear: Vec<SampledFunction> = (0..p.len())
        .map(|pi| base.scale(Complex64::new(p.coords(pi).unwrap()[0], 0.0)))
        .collect();
    let linear_family = FunctionFamily::new(&p, linear).map_err(|e| e.to_string())?;
    for n in [2usize, 4, 8, 16] {
        let (_, rep) = psi_approx(&linear_family, n, &p).map_err(|e| e.to_string())?;
        if rep.sup_error > linear_family.modulus() / n as f64 {
            return Err(format!(
                "linear family at n={n}: error {} > modulus/n = {}",
                rep.sup_error,
                linear_family.modulus() / n as f64
            ));
        }
    }

    // smooth Lipschitz family: doubling n halves the error within 10%
    let smooth_slices: Vec<SampledFunction> = (0..p.len())
        .map(|pi| {
            let t = p.coords(pi).unwrap()[0];
            base.scale(Complex64::new((2.0 * t).sin(), 0.0))
        })
        .collect();
    let family = FunctionFamily::new(&p, smooth_slices).map_err(|e| e.to_string())?;
    let (_, r8) = psi_approx(&family, 8, &p).map_err(|e| e.to_string())?;
    let (_, r16) = psi_approx(&family, 16, &p).map_err(|e| e.to_string())?;
    let ratio = r16.sup_error / r8.sup_error;
    if (ratio - 0.5).abs() > 0.05 {
        return Err(format!("halving ratio {ratio} outside 0.5 +- 0.05 (10%)"));
    }
    Ok(format!(
        "linear error within modulus/n; halving ratio {ratio:.3}"
    ))
}

// ---------------------------------------------------------------------------
// 7. Coarse equivalence of the circle cone with the plane
// ---------------------------------------------------------------------------

fn criterion_7() -> CriterionResult {
    let cfg = EquivalenceConfig::default(); // mesh pi/64 <= 0.05, density 32
    if cfg.sphere_mesh > 0.05 {
        return Err(format!("sphere mesh {} above 0.05", cfg.sphere_mesh));
    }
    let rep = equivalence_witness_rn(2, 64.0, &cfg).map_err(|e| e.to_string())?;
    if rep.f_coarse.verdict != CoarseVerdict::Coarse || rep.f_coarse.a_lower > 3.0 {
        return Err(format!(
            "cone-to-plane map: A = {} ({:?})",
            rep.f_coarse.a_lower, rep.f_coarse.verdict
        ));
    }
    if rep.g_coarse.verdict != CoarseVerdict::Coarse || rep.g_coarse.a_lower > 3.0 {
        return Err(format!(
            "plane-to-cone map: A = {} ({:?})",
            rep.g_coarse.a_lower, rep.g_coarse.verdict
        ));
    }
    if rep.fg_closeness.verdict != ClosenessVerdict::SublinearlyClose {
        return Err(format!(
            "round trip on the plane not sublinearly close: final slope {}",
            rep.fg_closeness.final_slope
        ));
    }
    if rep.gf_closeness.verdict != ClosenessVerdict::SublinearlyClose {
        return Err(format!(
            "round trip on the cone not sublinearly close: final slope {}",
            rep.gf_closeness.final_slope
        ));
    }
    // bounded-distance content: beyond the angular-snap linear term the
    // plane round trip stays within 1 (the rounding step plus slack), and
    // the cone round trip moves points only at the base fiber, at most the
    // compact factor's diameter (pi)
    let eps = 1.0 / 32.0; // smallest grid epsilon above mesh/2
    let c_eps = rep
        .fg_closeness
        .c_eps
        .iter()
        .find(|&&(e, _)| e == eps)
        .map(|&(_, c)| c)
        .ok_or("missing epsilon entry")?;
    if c_eps > 1.0 + 0.1 {
        return Err(format!("plane round trip C_(1/32) = {c_eps} above 1 + meshes"));
    }
    if rep.gf_closeness.max_adjusted_distance > std::f64::consts::PI + 1e-9 {
        return Err(format!(
            "cone round trip moved a point by {}",
            rep.gf_closeness.max_adjusted_distance
        ));
    }
    Ok(format!(
        "A_f = {}, A_g = {}, both round trips sublinearly close (C_1/32 = {c_eps:.3})",
        rep.f_coarse.a_lower, rep.g_coarse.a_lower
    ))
}

// ---------------------------------------------------------------------------
// 8. Winding discrimination and square-root growth
// ---------------------------------------------------------------------------

fn criterion_8() -> CriterionResult {
    let hl = build_halfline(4_096, 1.0).map_err(|e| e.to_string())?;
    let wound = SampledFunction::from_fn(&hl, |i| {
        Complex64::from_polar(1.0, hl.norm(i).sqrt())
    });
    let rep = classify(
        &wound,
        &hl,
        &[8.0, 32.0, 128.0, 512.0, 2048.0],
        &ClassifyConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    if rep.classification != HigsonClass::ClassicalHigsonOnly {
        return Err(format!(
            "wound sqrt classified {:?} (slope {})",
            rep.classification, rep.slope
        ));
    }
    if (rep.slope - 0.5).abs() > 0.1 {
        return Err(format!("slope {} outside 0.5 +- 0.1", rep.slope));
    }
    for &(s, t, bounded) in &[(1.0, 1.0, true), (1.0, 4.0, false), (1.0, 1.21, false)] {
        let growth = sqrt_difference_growth(s, t, &hl).map_err(|e| e.to_string())?;
        if growth.bounded != bounded {
            return Err(format!(
                "sqrt growth ({s},{t}): bounded = {} expected {bounded}",
                growth.bounded
            ));
        }
        if !bounded && (growth.slope - 0.5).abs() > 0.1 {
            return Err(format!(
                "sqrt growth ({s},{t}): slope {} outside 0.5 +- 0.1",
                growth.slope
            ));
        }
    }
    Ok(format!(
        "wound sqrt is classical-only with slope {:.3}; growth flags match",
        rep.slope
    ))
}

// ---------------------------------------------------------------------------
// 9. Matrix paths and the cone homotopy check
// ---------------------------------------------------------------------------

fn criterion_9() -> CriterionResult {
    use nalgebra::DMatrix;
    let two_i = DMatrix::from_diagonal_element(2, 2, 2.0);
    let a = std::f64::consts::FRAC_PI_2;
    let rot = DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()]);
    let diag = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0 / 3.0]);

    let grid = build_euclidean_grid(2, 64.0, 32, 9).map_err(|e| e.to_string())?;
    let rule = grid.neighbor_rule();
    let interval = build_interval(0.25).map_err(|e| e.to_string())?;
    let cone = build_cone(interval, grid, rule).map_err(|e| e.to_string())?;

    let mut details = Vec::new();
    for (name, t) in [("2I", &two_i), ("rot(pi/2)", &rot), ("diag(3,1/3)", &diag)] {
        // 64 grid points => 63 steps; endpoints exact, det positive
        let path = glplus_path(t, 63).map_err(|e| e.to_string())?;
        if path.ts.len() != 64 {
            return Err(format!("{name}: expected 64 grid points"));
        }
        if path.determinants.iter().any(|&d| d <= 0.0) {
            return Err(format!("{name}: nonpositive determinant on the path"));
        }
        if (&path.matrices[0] - t).norm() != 0.0
            || (&path.matrices[63] - DMatrix::identity(2, 2)).norm() != 0.0
        {
            return Err(format!("{name}: endpoints not exact"));
        }
        // cone homotopy on the radius-64 density-32 plane sample
        let stretch = GlPath::new(t).map_err(|e| e.to_string())?.max_stretch();
        let codomain = build_euclidean_grid(2, (64.0 * stretch).max(64.0), 32, 9)
            .map_err(|e| e.to_string())?;
        let rep = cone_homotopy_check(t, &cone, &codomain, &CoarseConfig::default())
            .map_err(|e| e.to_string())?;
        if !rep.dets_positive {
            return Err(format!("{name}: determinant dipped to {}", rep.min_det));
        }
        if rep.coarse.verdict != CoarseVerdict::Coarse || rep.coarse.a_lower > 6.0 {
            return Err(format!(
                "{name}: cone homotopy A = {} ({:?})",
                rep.coarse.a_lower, rep.coarse.verdict
            ));
        }
        details.push(format!("{name}: A = {}", rep.coarse.a_lower));
    }
    Ok(details.join("; "))
}

// ---------------------------------------------------------------------------
// 10. Byte-identical reports from identical configs
// ---------------------------------------------------------------------------

fn criterion_10() -> CriterionResult {
    let bin = env!("CARGO_BIN_EXE_corona-lab");
    let dir = std::env::temp_dir().join(format!("corona-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;

    let configs = [
        (
            "smooth-verify",
            r#"{
  "schema_version": 1,
  "seed": 42,
  "experiment": "smooth-verify",
  "params": { "points": 1024, "net_radius": 2.0, "noise_scale": 8.0,
              "scales": [32.0, 64.0, 128.0, 256.0] }
}"#,
        ),
        (
            "classify-function",
            r#"{
  "schema_version": 1,
  "seed": 5,
  "experiment": "classify-function",
  "params": {
    "space": { "kind": "euclidean_grid", "dim": 2, "max_radius": 64.0, "density": 24 },
    "function": { "kind": "disk_pullback" },
    "scales": [4.0, 8.0, 16.0, 32.0]
  }
}"#,
        ),
    ];
    for (subcommand, config) in configs {
        let config_path = dir.join(format!("{subcommand}.json"));
        std::fs::write(&config_path, config).map_err(|e| e.to_string())?;
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.join(format!("{subcommand}-{run}"));
            let status = std::process::Command::new(bin)
                .args([
                    subcommand,
                    "--config",
                    config_path.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ])
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!(
                    "{subcommand} run {run} exited with {:?}: {}",
                    status.status.code(),
                    String::from_utf8_lossy(&status.stderr)
                ));
            }
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
                .map_err(|e| e.to_string())?
                .filter_map(|e| e.ok())
                .map(|e| {
                    let name = e.file_name().to_string_lossy().into_owned();
                    let bytes = std::fs::read(e.path()).unwrap_or_default();
                    (name, bytes)
                })
                .collect();
            files.sort();
            outputs.push(files);
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{subcommand}: two runs differ"));
        }
        if !outputs[0].iter().any(|(n, _)| n.ends_with(".csv")) {
            return Err(format!("{subcommand}: no CSV emitted"));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok("two experiment kinds, byte-identical CSV and JSON across reruns".into())
}
