//! Full single-tuple pipeline: validation, catalogue, barriers, curve
//! assembly, field checks, shock locus, and a schema-versioned report.

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use ril_core::flowfield::{
    collapse_profile, conserved_integrals, verify_isentropy, CollapseProfile, FieldEvaluator,
    IntegralOptions, Integrals,
};
use ril_core::hugoniot::{hugoniot_locus, intersection_test, sigma_h, Verdict, GAP_TOL};
use ril_core::integrator::{
    approach_slope, assemble_gamma, barrier_check, stagnation_points, tail_exponents,
    BarrierReport, Gamma, Seed,
};
use ril_core::params::{is_relevant, lambda_thresholds, GasParams, ThresholdReport};
use ril_core::phaseplane::{
    classify, critical_points, triple_abscissas, CriticalPoint, PointLabel,
};

use crate::output::{self, log_grid, RunContext};
use crate::{ParamArgs, RunArgs};

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

pub const SCHEMA_VERSION: u32 = 1;

/// One verified property: what was measured, what it was held against,
/// and the tolerance that applied (null for structural yes/no checks).
#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    observed: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

impl Check {
    fn flag(name: &'static str, pass: bool) -> Check {
        Check { name, pass, observed: json!(pass), target: None, tolerance: None }
    }

    fn relative(name: &'static str, observed: f64, target: f64, tol: f64) -> Check {
        Check {
            name,
            pass: (observed - target).abs() <= tol * target.abs(),
            observed: json!(observed),
            target: Some(json!(target)),
            tolerance: Some(tol),
        }
    }

    fn below(name: &'static str, observed: f64, tol: f64) -> Check {
        Check {
            name,
            pass: observed <= tol,
            observed: json!(observed),
            target: Some(json!(0.0)),
            tolerance: Some(tol),
        }
    }
}

#[derive(Serialize)]
struct TrajectorySummary {
    branch: String,
    endpoints: [String; 2],
    samples: usize,
    x_first: f64,
    x_last: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossing_v: Option<f64>,
}

#[derive(Serialize)]
struct HugoniotSummary {
    endpoint_gap: f64,
    locus_slope: f64,
    mapped_slope: f64,
    verdict: Verdict,
}

#[derive(Serialize)]
struct Report {
    schema_version: u32,
    command: &'static str,
    /// Flag echo, present even when validation fails.
    raw_params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<GasParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thresholds: Option<ThresholdReport>,
    relevant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    stopped_after: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    critical_points: Vec<CriticalPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    barrier: Option<BarrierReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectories: Option<Vec<TrajectorySummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collapse: Option<CollapseProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    integrals: Option<Integrals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hugoniot: Option<HugoniotSummary>,
    checks: Vec<Check>,
    all_pass: bool,
}

impl Report {
    fn new(raw_params: Value) -> Report {
        Report {
            schema_version: SCHEMA_VERSION,
            command: "analyze",
            raw_params,
            params: None,
            thresholds: None,
            relevant: false,
            stopped_after: None,
            error: None,
            critical_points: Vec::new(),
            barrier: None,
            trajectories: None,
            collapse: None,
            integrals: None,
            hugoniot: None,
            checks: Vec::new(),
            all_pass: false,
        }
    }
}

fn summarize(gamma: &Gamma) -> Vec<TrajectorySummary> {
    gamma
        .segments()
        .iter()
        .map(|t| TrajectorySummary {
            branch: t.branch.name(),
            endpoints: [format!("{:?}", t.endpoints.0), format!("{:?}", t.endpoints.1)],
            samples: t.samples.len(),
            x_first: t.x_at(0),
            x_last: t.x_at(t.samples.len() - 1),
            crossing_v: t.crossing_v,
        })
        .collect()
}

fn x_strictly_monotone(gamma: &Gamma) -> bool {
    let mut prev = f64::NEG_INFINITY;
    for seg in gamma.segments() {
        let n = seg.samples.len();
        let idx: Box<dyn Iterator<Item = usize>> = if seg.branch.mirrored {
            Box::new((0..n).rev())
        } else {
            Box::new(0..n)
        };
        for i in idx {
            let x = seg.x_at(i);
            if x <= prev {
                return false;
            }
            prev = x;
        }
    }
    true
}

pub fn run(args: AnalyzeArgs) -> Result<u8> {
    let ctx = output::resolve(&args.run)?;
    let pa = &args.params;
    let raw = json!({
        "n": pa.n, "gamma": pa.gamma, "lambda": pa.lambda,
        "ell": pa.ell, "vertical": pa.vertical, "x9": pa.x9,
    });
    let mut report = Report::new(raw);

    let params = match GasParams::isentropic(pa.n, pa.gamma, pa.lambda) {
        Ok(p) => p,
        Err(e) => {
            report.error = Some(e.to_string());
            report.stopped_after = Some("validation");
            finish(&ctx, report)?;
            return Ok(2);
        }
    };
    report.params = Some(params);
    report.thresholds = Some(lambda_thresholds(pa.n, pa.gamma)?);
    report.relevant = is_relevant(pa.n, pa.gamma, pa.lambda)?;
    report.checks.push(Check::flag("relevant", report.relevant));
    if !report.relevant {
        report.stopped_after = Some("relevance");
        finish(&ctx, report)?;
        return Ok(2);
    }

    let barrier = barrier_check(&params)?;
    report
        .checks
        .push(Check::flag("barrier_trap", barrier.prop_a));
    report
        .checks
        .push(Check::flag("barrier_lower_membrane", barrier.prop_b));
    report
        .checks
        .push(Check::flag("barrier_upper_membrane", barrier.prop_c));

    let mut catalogue = Vec::new();
    for cp in critical_points(&params)? {
        catalogue.push(classify(&cp, &params).unwrap_or(cp));
    }
    report.critical_points = catalogue.clone();

    if !(barrier.prop_a && barrier.prop_b && barrier.prop_c) {
        report.barrier = Some(barrier);
        report.stopped_after = Some("barriers");
        report.all_pass = false;
        finish(&ctx, report)?;
        return Ok(2);
    }

    let gamma = assemble_gamma(&params, pa.seed(), pa.x9)?;
    report.barrier = Some(barrier.with_crossing(gamma.lower_sigma.crossing_v));
    report.trajectories = Some(summarize(&gamma));

    let t9 = triple_abscissas(&params);
    let crossing = gamma.lower_sigma.crossing_v.unwrap_or(f64::NAN);
    let inside = t9
        .v_plus
        .map(|vp| t9.v4 < crossing && crossing < vp)
        .unwrap_or(false);
    report.checks.push(Check {
        name: "interior_crossing",
        pass: inside,
        observed: json!(crossing),
        target: Some(json!([t9.v4, t9.v_plus])),
        tolerance: None,
    });

    let p9 = catalogue
        .iter()
        .find(|c| c.label == PointLabel::P9)
        .context("catalogue misses the lower sonic node")?;
    let l1 = p9.l1.context("capture point is not classified")?;
    let slope = approach_slope(&gamma.lower_sigma, p9.location);
    report
        .checks
        .push(Check::relative("capture_slope", slope, l1, 0.01 * ctx.tol_scale));

    let (tail_v, tail_c) = tail_exponents(&gamma.lower_sigma_prime, &params);
    report.checks.push(Check::relative(
        "tail_exponent_v",
        tail_v,
        -2.0 / params.lambda,
        0.05 * ctx.tol_scale,
    ));
    report.checks.push(Check::relative(
        "tail_exponent_c",
        tail_c,
        1.0 / params.lambda,
        0.05 * ctx.tol_scale,
    ));
    report
        .checks
        .push(Check::flag("x_strictly_monotone", x_strictly_monotone(&gamma)));

    let ev = FieldEvaluator::new(&gamma, &params)?;
    report.collapse = Some(collapse_profile(&gamma, &params)?);

    let rs = log_grid(1e-6, 1e3, 2500);
    let mut worst = 0f64;
    for t in [-2.0, -0.5, 0.5, 2.0] {
        worst = worst.max(verify_isentropy(&ev, t, &rs)?);
    }
    report
        .checks
        .push(Check::below("entropy_deviation", worst, 1e-7 * ctx.tol_scale));

    let loose =
        conserved_integrals(&ev, 1.0, 10.0, IntegralOptions { rel_tol: 1e-7, max_depth: 40 })?;
    let tight =
        conserved_integrals(&ev, 1.0, 10.0, IntegralOptions { rel_tol: 1e-9, max_depth: 48 })?;
    let finite = [tight.mass, tight.momentum_abs, tight.energy]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
    report.checks.push(Check::flag("integrals_finite", finite));
    let drift = [
        (loose.mass, tight.mass),
        (loose.momentum_abs, tight.momentum_abs),
        (loose.energy, tight.energy),
    ]
    .iter()
    .map(|(a, b)| ((a - b) / b).abs())
    .fold(0.0, f64::max);
    report
        .checks
        .push(Check::below("integral_self_convergence", drift, 1e-6 * ctx.tol_scale));
    report.integrals = Some(tight);

    let mut rho_min = f64::INFINITY;
    for t in [-1.0, 0.0, 1.0] {
        for &r in &log_grid(1e-6, 1e3, 200) {
            rho_min = rho_min.min(ev.state(t, r)?.rho);
        }
    }
    report.checks.push(Check {
        name: "no_vacuum",
        pass: rho_min > 0.0 && rho_min.is_finite(),
        observed: json!(rho_min),
        target: None,
        tolerance: None,
    });

    let stags = stagnation_points(&gamma);
    let stag_ok = match pa.seed() {
        Seed::Vertical => stags.is_empty(),
        Seed::Slope(_) => stags.len() == 1 && stags[0] * gamma.nu > 0.0,
    };
    report.checks.push(Check {
        name: "stagnation_structure",
        pass: stag_ok,
        observed: json!(stags),
        target: None,
        tolerance: None,
    });

    let locus = hugoniot_locus(&gamma.lower_sigma, &params)?;
    let endpoint_gap = locus.endpoint_gap(p9.location);
    report
        .checks
        .push(Check::below("locus_endpoint_gap", endpoint_gap, 1e-4 * ctx.tol_scale));
    let mapped = sigma_h(l1, &params)?;
    let locus_slope = locus.slope_at(p9.location, 1e-3, 1e-2);
    report.checks.push(Check::relative(
        "locus_entry_slope",
        locus_slope,
        mapped,
        0.02 * ctx.tol_scale,
    ));
    let verdict = intersection_test(&gamma, &locus, &params)?;
    let clear = matches!(verdict, Verdict::NoIntersection { min_gap } if min_gap > GAP_TOL);
    report.checks.push(Check::flag("no_intersection", clear));
    report.hugoniot = Some(HugoniotSummary {
        endpoint_gap,
        locus_slope,
        mapped_slope: mapped,
        verdict,
    });

    let mut gamma_csv = Vec::new();
    gamma.write_csv(&mut gamma_csv, 2000)?;
    output::write_file(&ctx.out_dir, "gamma.csv", &gamma_csv)?;
    let mut locus_csv = Vec::new();
    locus.write_csv(&mut locus_csv, 2000)?;
    output::write_file(&ctx.out_dir, "locus.csv", &locus_csv)?;

    report.all_pass = report.checks.iter().all(|c| c.pass);
    let code = if report.all_pass { 0 } else { 2 };
    finish(&ctx, report)?;
    Ok(code)
}

fn finish(ctx: &RunContext, mut report: Report) -> Result<()> {
    report.all_pass = !report.checks.is_empty() && report.checks.iter().all(|c| c.pass);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    let path = output::write_file(&ctx.out_dir, "report.json", text.as_bytes())?;
    println!("{}", json!({ "report": path, "all_pass": report.all_pass }));
    Ok(())
}
