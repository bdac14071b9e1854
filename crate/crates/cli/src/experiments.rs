//! One runner per subcommand; each returns a [`Report`] whose `pass` flag
//! drives the exit code.

use anyhow::{anyhow, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;

use corona_core::cone::{self, ConeConfig, PFamily, XFamily};
use corona_core::functions::{
    classify, ClassifyConfig, HigsonClass, SampledFunction, SweepConfig,
};
use corona_core::maps::{
    coarse_constant, cone_homotopy_check, equivalence_witness_rn, glplus_path,
    ClosenessVerdict, CoarseConfig, CoarseVerdict, EquivalenceConfig, SampledMap,
};
use corona_core::smoothing::{
    decaying_sign_noise, greedy_net_cover, hat_partition, smooth, verify_appendix_bound,
    BoundConfig,
};
use corona_core::spaces::{self, MetricSpace};
use corona_core::tensor::{lambda_report, omega_report, psi_approx, roundtrip, FunctionFamily, OmegaConfig};

use crate::config::{
    CompactSpec, ExperimentKind, FunctionSpec, HomotopyConeSpec, MapSpec, SpaceSpec,
};
use crate::output::{num, Report, Table};

pub fn run(kind: &ExperimentKind, seed: u64) -> Result<Report> {
    match kind {
        ExperimentKind::BuildSpace {
            space,
            quasi_geodesic_trials,
        } => build_space(space, seed, *quasi_geodesic_trials),
        ExperimentKind::ConeDistance {
            p,
            x_points,
            x_step,
            probes,
            lower_bound_radius,
            refinement_levels,
        } => cone_distance(p, *x_points, *x_step, probes, *lower_bound_radius, *refinement_levels),
        ExperimentKind::ClassifyFunction {
            space,
            function,
            scales,
            expect,
        } => classify_function(space, function, scales, expect.as_deref(), seed),
        ExperimentKind::SmoothVerify {
            points,
            net_radius,
            noise_scale,
            scales,
        } => smooth_verify(*points, *net_radius, *noise_scale, scales, seed),
        ExperimentKind::CheckMap { space, map, max_a } => check_map(space, map, *max_a, seed),
        ExperimentKind::Homotopy {
            matrix,
            steps,
            cone_check,
        } => homotopy(matrix, *steps, cone_check.as_ref(), seed),
        ExperimentKind::EquivalenceRn {
            dim,
            radius,
            sphere_mesh,
            grid_density,
        } => equivalence_rn(*dim, *radius, *sphere_mesh, *grid_density, seed),
        ExperimentKind::TensorCheck {
            circle_vertices,
            x_points,
            scales,
            products_per_side,
            psi_approx_n,
        } => tensor_check(
            *circle_vertices,
            *x_points,
            scales,
            *products_per_side,
            *psi_approx_n,
        ),
    }
}

fn build_space(
    spec: &SpaceSpec,
    seed: u64,
    quasi_geodesic_trials: Option<usize>,
) -> Result<Report> {
    let space = spec.build(seed)?;
    let validation = spaces::validate_metric(&space);
    let mut witnesses = Vec::new();
    if !validation.pass {
        witnesses.push(format!(
            "metric validation failed: triangle defect {} at {:?}",
            validation.worst_triangle_defect, validation.triangle_witness
        ));
    }
    let mut pass = validation.pass;
    let mut qg_summary = json!(null);
    if let Some(trials) = quasi_geodesic_trials {
        let qg = spaces::quasi_geodesic_check(&space, space.quasi_geodesic_c(), trials)?;
        if !qg.pass {
            witnesses.push(format!(
                "quasi-geodesic check failed at C = {}: witness {:?}",
                qg.c, qg.witness
            ));
        }
        pass &= qg.pass;
        qg_summary = serde_json::to_value(&qg)?;
    }
    let mut annuli = Table::new("annuli", &["annulus", "points"]);
    for (&k, ids) in space.annuli() {
        annuli.push(vec![k.to_string(), ids.len().to_string()]);
    }
    let doc = space.to_document();
    let mut points = Table::new("points", &["id", "norm", "coords"]);
    for p in &doc.points {
        points.push(vec![
            p.id.to_string(),
            num(p.norm),
            p.coords
                .as_ref()
                .map(|c| c.iter().map(|&v| num(v)).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
        ]);
    }
    Ok(Report {
        pass,
        summary: json!({
            "points": space.len(),
            "mesh": space.sampling_mesh(),
            "max_norm": space.max_norm(),
            "metric_validation": serde_json::to_value(&validation)?,
            "quasi_geodesic": qg_summary,
            "space_document": serde_json::to_value(&doc)?,
        }),
        tables: vec![annuli, points],
        witnesses,
    })
}

fn cone_distance(
    p_spec: &CompactSpec,
    x_points: usize,
    x_step: f64,
    probes: &[[usize; 4]],
    lower_bound_radius: Option<f64>,
    refinement_levels: Option<usize>,
) -> Result<Report> {
    let p = p_spec.build()?;
    let x = spaces::build_halfline(x_points, x_step)?;
    let rule = x.neighbor_rule();
    let cone = cone::build_cone(p, x, rule)?;
    let mut witnesses = Vec::new();
    let mut pass = true;

    let mut table = Table::new(
        "probes",
        &[
            "p_id", "x_id", "p2_id", "x2_id", "d_cone", "d_x", "lower_bound_r", "margin",
        ],
    );
    let r = lower_bound_radius.unwrap_or(0.0);
    for &[pa, xa, pb, xb] in probes {
        let d = cone::cone_distance(&cone, (pa, xa), (pb, xb))?;
        let d_x = cone.x_space().distance(xa, xb);
        let d_p = cone.p_space().distance(pa, pb);
        let margin = d - (d_x + r * d_p);
        table.push(vec![
            pa.to_string(),
            xa.to_string(),
            pb.to_string(),
            xb.to_string(),
            num(d),
            num(d_x),
            num(r),
            num(margin),
        ]);
    }

    let mut lower_summary = json!(null);
    if let Some(radius) = lower_bound_radius {
        let tol = cone.default_tolerance();
        let rep = cone::verify_lower_bound(&cone, radius, tol)?;
        if !rep.weakened_pass {
            witnesses.push(format!(
                "weakened lower bound failed: margin {} at {:?}",
                rep.weakened_worst_margin, rep.weakened_witness
            ));
        }
        pass &= rep.weakened_pass;
        lower_summary = serde_json::to_value(&rep)?;
    }

    let mut refinement_summary = json!(null);
    if let Some(levels) = refinement_levels {
        let family = match p_spec {
            CompactSpec::Point => PFamily::Point,
            CompactSpec::Interval { mesh } => PFamily::Interval {
                segments0: (1.0 / mesh).ceil() as usize,
            },
            CompactSpec::Circle { mesh } => PFamily::Circle {
                n0: (std::f64::consts::TAU / mesh).ceil() as usize,
            },
            CompactSpec::Sphere2 { .. } => {
                return Err(anyhow!("refinement family not defined for the 2-sphere"))
            }
        };
        let probe_pairs: Vec<((usize, usize), (usize, usize))> = probes
            .iter()
            .map(|&[pa, xa, pb, xb]| ((pa, xa), (pb, xb)))
            .collect();
        let rep = cone::refinement_convergence(
            family,
            XFamily {
                n_max0: x_points,
                step0: x_step,
            },
            levels,
            &probe_pairs,
            ConeConfig::default(),
        )?;
        if !rep.monotone_nonincreasing {
            witnesses.push("refinement not monotone nonincreasing".into());
        }
        pass &= rep.monotone_nonincreasing;
        refinement_summary = serde_json::to_value(&rep)?;
    }

    Ok(Report {
        pass,
        summary: json!({
            "vertices": cone.len(),
            "tolerance": cone.default_tolerance(),
            "lower_bound": lower_summary,
            "refinement": refinement_summary,
        }),
        tables: vec![table],
        witnesses,
    })
}

fn classify_function(
    space_spec: &SpaceSpec,
    function: &FunctionSpec,
    scales: &[f64],
    expect: Option<&str>,
    seed: u64,
) -> Result<Report> {
    let space = space_spec.build(seed)?;
    let f = function.build(&space);
    let report = classify(&f, &space, scales, &ClassifyConfig::default())?;
    let mut table = Table::new(
        "constants",
        &["R", "C", "witness_i", "witness_j", "classical_modulus", "coverage"],
    );
    for (i, c) in report.constants.iter().enumerate() {
        let (wi, wj) = c.witness.map_or((0, 0), |w| w);
        table.push(vec![
            num(c.scale),
            num(c.value),
            wi.to_string(),
            wj.to_string(),
            report
                .classical
                .get(i)
                .map(|m| num(m.value))
                .unwrap_or_default(),
            num(c.coverage),
        ]);
    }
    let label = match report.classification {
        HigsonClass::SublinearHigson => "sublinear_higson",
        HigsonClass::ClassicalHigsonOnly => "classical_higson_only",
        HigsonClass::Neither => "neither",
    };
    let mut witnesses = Vec::new();
    let pass = match expect {
        None => true,
        Some(e) => {
            let ok = e == label;
            if !ok {
                witnesses.push(format!("expected classification {e}, measured {label}"));
            }
            ok
        }
    };
    Ok(Report {
        pass,
        summary: json!({
            "classification": label,
            "slope": report.slope,
        }),
        tables: vec![table],
        witnesses,
    })
}

fn smooth_verify(
    points: usize,
    net_radius: f64,
    noise_scale: f64,
    scales: &[f64],
    seed: u64,
) -> Result<Report> {
    let hl = spaces::build_halfline(points, 1.0)?;
    let base = SampledFunction::from_real_fn(&hl, |i| {
        let nm = hl.norm(i);
        nm / (1.0 + nm)
    });
    let f = base.add(&decaying_sign_noise(&hl, seed, noise_scale));
    let cover = greedy_net_cover(&hl, net_radius)?;
    let pou = hat_partition(&cover, &hl)?;
    let g = smooth(&f, &pou, &cover, &hl)?;
    let rep = verify_appendix_bound(
        &f,
        &g,
        &hl,
        &cover,
        &pou,
        hl.quasi_geodesic_c(),
        scales,
        &BoundConfig::default(),
    )?;
    let mut table = Table::new("bound", &["R", "C_g", "bound", "margin", "pass"]);
    for row in &rep.rows {
        table.push(vec![
            num(row.scale),
            num(row.measured),
            num(row.bound),
            num(row.bound - row.measured),
            row.pass.to_string(),
        ]);
    }
    let mut residual = Table::new("residual", &["annulus", "sup"]);
    for &(k, v) in &rep.residual_sups {
        residual.push(vec![k.to_string(), num(v)]);
    }
    let mut witnesses = Vec::new();
    if !rep.pass {
        witnesses.push(format!(
            "appendix bound failed: decay slope {} (need <= -0.8), rows {:?}",
            rep.residual_slope,
            rep.rows.iter().map(|r| r.pass).collect::<Vec<_>>()
        ));
    }
    Ok(Report {
        pass: rep.pass,
        summary: json!({
            "c_f": rep.c_f,
            "degree_n": rep.degree_n,
            "diameter_d": rep.diameter_d,
            "lipschitz_d": rep.lipschitz_d,
            "bound": rep.bound,
            "residual_slope": rep.residual_slope,
            "skipped_scales": rep.skipped_scales,
        }),
        tables: vec![table, residual],
        witnesses,
    })
}

fn check_map(
    space_spec: &SpaceSpec,
    map_spec: &MapSpec,
    max_a: Option<f64>,
    seed: u64,
) -> Result<Report> {
    let space = space_spec.build(seed)?;
    let map = match *map_spec {
        MapSpec::Identity => SampledMap::identity(&space),
        MapSpec::Constant => {
            SampledMap::from_ids(&space, &space, vec![space.base_point(); space.len()])?
        }
        MapSpec::Dilate { factor } => SampledMap::from_coords(&space, &space, |i| {
            space.coords(i).iter().map(|c| c * factor).collect()
        }),
        MapSpec::SqrtDrift => SampledMap::from_coords(&space, &space, |i| {
            let nm = space.norm(i);
            let stretch = if nm > 0.0 { (nm + nm.sqrt()) / nm } else { 0.0 };
            space.coords(i).iter().map(|c| c * stretch).collect()
        }),
    };
    let rep = coarse_constant(&map, &space, &space, &CoarseConfig::default())?;
    let cap = max_a.unwrap_or(1e6);
    let coarse_ok = rep.verdict == CoarseVerdict::Coarse && rep.a_lower <= cap;
    let mut witnesses = Vec::new();
    if !coarse_ok {
        witnesses.push(format!(
            "not coarse: A_lower = {}, growth slope = {}, growth witness {:?}, pair witness {:?}",
            rep.a_lower, rep.growth_slope, rep.growth_witness, rep.pair_witness
        ));
    }
    let mut profile = Table::new("a_profile", &["annulus", "required_a"]);
    for &(k, v) in &rep.per_annulus_requirement {
        profile.push(vec![k.to_string(), num(v)]);
    }
    Ok(Report {
        pass: coarse_ok,
        summary: json!({
            "a_lower": rep.a_lower,
            "verdict": serde_json::to_value(rep.verdict)?,
            "growth_slope": rep.growth_slope,
            "pair_coverage": rep.pair_coverage,
        }),
        tables: vec![profile],
        witnesses,
    })
}

fn homotopy(
    matrix: &[Vec<f64>],
    steps: usize,
    cone_check: Option<&HomotopyConeSpec>,
    seed: u64,
) -> Result<Report> {
    let n = matrix.len();
    if matrix.iter().any(|row| row.len() != n) {
        return Err(anyhow!("matrix must be square"));
    }
    let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
    let t = DMatrix::from_row_slice(n, n, &flat);
    let path = glplus_path(&t, steps)?;
    let dets_positive = path.determinants.iter().all(|&d| d > 0.0);
    let endpoint0 = (&path.matrices[0] - &t).norm();
    let endpoint1 = (&path.matrices[steps] - DMatrix::identity(n, n)).norm();
    let mut witnesses = Vec::new();
    let mut pass = dets_positive && endpoint0 == 0.0 && endpoint1 == 0.0;
    if !pass {
        witnesses.push(format!(
            "path defect: min det {}, endpoint gaps {endpoint0}, {endpoint1}",
            path.determinants.iter().copied().fold(f64::INFINITY, f64::min)
        ));
    }
    let mut table = Table::new("path", &["t", "det", "step_norm"]);
    for (i, &tt) in path.ts.iter().enumerate() {
        let step_norm = if i == 0 {
            0.0
        } else {
            (&path.matrices[i] - &path.matrices[i - 1]).norm()
        };
        table.push(vec![num(tt), num(path.determinants[i]), num(step_norm)]);
    }
    let mut cone_summary = json!(null);
    if let Some(spec) = cone_check {
        let grid = spaces::build_euclidean_grid(n, spec.grid_radius, spec.grid_density, seed)?;
        let interval = spaces::build_interval(spec.interval_mesh)?;
        let rule = grid.neighbor_rule();
        let cone = cone::build_cone(interval, grid, rule)?;
        let gl = corona_core::maps::GlPath::new(&t)?;
        let codomain_radius = spec.grid_radius * gl.max_stretch();
        let codomain =
            spaces::build_euclidean_grid(n, codomain_radius.max(4.0), spec.grid_density, seed)?;
        let rep = cone_homotopy_check(&t, &cone, &codomain, &CoarseConfig::default())?;
        let finite = rep.coarse.verdict == CoarseVerdict::Coarse;
        let under_cap = spec.max_a.map_or(true, |cap| rep.coarse.a_lower <= cap);
        if !(rep.dets_positive && finite && under_cap) {
            witnesses.push(format!(
                "cone homotopy check failed: A_lower = {}, verdict {:?}",
                rep.coarse.a_lower, rep.coarse.verdict
            ));
        }
        pass &= rep.dets_positive && finite && under_cap;
        cone_summary = json!({
            "a_lower": rep.coarse.a_lower,
            "endpoint0_max_displacement": rep.endpoint0_max_displacement,
            "endpoint1_max_displacement": rep.endpoint1_max_displacement,
            "min_det": rep.min_det,
        });
    }
    Ok(Report {
        pass,
        summary: json!({
            "speed_bound": path.speed_bound,
            "max_step_norm": path.max_step_norm,
            "cone_check": cone_summary,
        }),
        tables: vec![table],
        witnesses,
    })
}

fn equivalence_rn(
    dim: usize,
    radius: f64,
    sphere_mesh: Option<f64>,
    grid_density: Option<usize>,
    seed: u64,
) -> Result<Report> {
    let mut cfg = EquivalenceConfig::default();
    if let Some(m) = sphere_mesh {
        cfg.sphere_mesh = m;
    }
    if let Some(d) = grid_density {
        cfg.grid_density = d;
    }
    cfg.grid_seed = seed;
    let rep = equivalence_witness_rn(dim, radius, &cfg)?;
    let both_coarse = rep.f_coarse.verdict == CoarseVerdict::Coarse
        && rep.g_coarse.verdict == CoarseVerdict::Coarse;
    let both_close = rep.fg_closeness.verdict == ClosenessVerdict::SublinearlyClose
        && rep.gf_closeness.verdict == ClosenessVerdict::SublinearlyClose;
    let pass = both_coarse && both_close;
    let mut witnesses = Vec::new();
    if !pass {
        witnesses.push(format!(
            "equivalence failed: A_f = {}, A_g = {}, fg {:?}, gf {:?}",
            rep.f_coarse.a_lower,
            rep.g_coarse.a_lower,
            rep.fg_closeness.verdict,
            rep.gf_closeness.verdict
        ));
    }
    let mut slopes = Table::new("composite_slopes", &["composite", "annulus", "slope"]);
    for &(k, s) in &rep.fg_closeness.annulus_slopes {
        slopes.push(vec!["fg".into(), k.to_string(), num(s)]);
    }
    for &(k, s) in &rep.gf_closeness.annulus_slopes {
        slopes.push(vec!["gf".into(), k.to_string(), num(s)]);
    }
    Ok(Report {
        pass,
        summary: json!({
            "a_f": rep.f_coarse.a_lower,
            "a_g": rep.g_coarse.a_lower,
            "sphere_mesh": rep.sphere_mesh,
            "grid_mesh": rep.grid_mesh,
            "fg_max_distance": rep.fg_closeness.max_adjusted_distance,
            "gf_max_distance": rep.gf_closeness.max_adjusted_distance,
        }),
        tables: vec![slopes],
        witnesses,
    })
}

fn tensor_check(
    circle_vertices: usize,
    x_points: usize,
    scales: &[f64],
    products_per_side: usize,
    psi_approx_n: Option<usize>,
) -> Result<Report> {
    let p = spaces::build_sphere_graph(2, std::f64::consts::TAU / circle_vertices as f64)?;
    let x = spaces::build_halfline(x_points, 1.0)?;
    let rule = x.neighbor_rule();
    let cone = cone::build_cone(p, x, rule)?;
    let p_ref = cone.p_space();
    let x_ref = cone.x_space();
    let phis: Vec<SampledFunction> = (0..products_per_side)
        .map(|k| {
            SampledFunction::from_real_fn(p_ref, |pi| {
                let c = p_ref.coords(pi).unwrap();
                ((k + 1) as f64 * c[0]).sin() * 0.5 + 0.5
            })
        })
        .collect();
    let psis: Vec<SampledFunction> = (0..products_per_side)
        .map(|k| {
            SampledFunction::from_real_fn(x_ref, |xi| {
                let nm = x_ref.norm(xi);
                (nm / (1.0 + nm)).powi(k as i32 + 1)
            })
        })
        .collect();
    let mut table = Table::new(
        "omega_bounds",
        &["phi", "psi", "R", "measured", "bound", "pass"],
    );
    let mut pass = true;
    let mut witnesses = Vec::new();
    for (i, phi) in phis.iter().enumerate() {
        for (j, psi) in psis.iter().enumerate() {
            let (product, rep) =
                omega_report(phi, psi, &cone, scales, &OmegaConfig::default())?;
            for row in &rep.rows {
                table.push(vec![
                    i.to_string(),
                    j.to_string(),
                    num(row.scale),
                    num(row.measured),
                    num(row.bound),
                    row.pass.to_string(),
                ]);
            }
            if !rep.pass {
                witnesses.push(format!("omega bound failed for product ({i},{j})"));
                pass = false;
            }
            let (_, lam) = lambda_report(&product, &cone, &SweepConfig::default())?;
            if !lam.bound_ok {
                witnesses.push(format!(
                    "lambda bound failed for product ({i},{j}): modulus {} > constant {}",
                    lam.shell_modulus, lam.c_hat
                ));
                pass = false;
            }
        }
    }
    let terms: Vec<(SampledFunction, SampledFunction)> = phis
        .iter()
        .cloned()
        .zip(psis.iter().cloned())
        .collect();
    let rt = roundtrip(&terms, &cone)?;
    if rt.residual > 1e-12 {
        witnesses.push(format!("roundtrip residual {}", rt.residual));
        pass = false;
    }
    let mut psi_summary = json!(null);
    if let Some(n) = psi_approx_n {
        let p_interval = spaces::build_interval(1.0 / (16.0 * n as f64))?;
        let base =
            SampledFunction::from_real_fn(x_ref, |i| 1.0 / (1.0 + x_ref.norm(i)));
        let slices: Vec<SampledFunction> = (0..p_interval.len())
            .map(|pi| {
                let t = p_interval.coords(pi).unwrap()[0];
                base.scale(Complex64::new(t, 0.0))
            })
            .collect();
        let family = FunctionFamily::new(&p_interval, slices)?;
        let (_, rep_n) = psi_approx(&family, n, &p_interval)?;
        let (_, rep_2n) = psi_approx(&family, 2 * n, &p_interval)?;
        let halving = rep_2n.sup_error / rep_n.sup_error.max(f64::MIN_POSITIVE);
        if !rep_n.within_bound || !rep_2n.within_bound {
            witnesses.push("psi approximation exceeded its Lipschitz bound".into());
            pass = false;
        }
        psi_summary = json!({
            "n": n,
            "error_n": rep_n.sup_error,
            "error_2n": rep_2n.sup_error,
            "halving_ratio": halving,
        });
    }
    Ok(Report {
        pass,
        summary: json!({
            "cone_vertices": cone.len(),
            "roundtrip_residual": rt.residual,
            "psi_approx": psi_summary,
        }),
        tables: vec![table],
        witnesses,
    })
}

