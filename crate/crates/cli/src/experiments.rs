//! Dispatch from a validated config to the library, one result row per sweep point.
//!
//! Seeding: work shared by all rows (width profiles, duality contexts,
//! approximation radii per `c_star`) draws from `root.child(0)` and friends;
//! row `i` of a sweep draws from `root.child(1 + i)`.

use std::collections::BTreeMap;
use std::time::Instant;

use polywidth::bounds::constants::{c1, constant_chain, m_constant};
use polywidth::bounds::chi_square_facts;
use polywidth::bounds::lp_vr_upper;
use polywidth::bounds::{approximation_radii, approximation_radius, lower_bound_from_radii, volume_ratio, ApproximationRadius, VolumeBudget, CONFIDENCE};
use polywidth::duality::{
    duality_check, farthest_point, john_duality_check, k_star, ratio_from_parts, theorem4_certificate, CheckGrade,
    DualityContext,
};
use polywidth::estimators::{build_truncated, default_lipschitz_bound, lipschitz_polytope, monte_carlo_risk, projection_risk, uniform_grid, EstimationInstance};
use polywidth::search::SearchBudget;
use polywidth::widths::{width_profile, WidthMethod, WidthProfile, ORACLE_MAX_DIM};
use polywidth::{Body, BodySpec, SeedSpec};
use serde_json::{json, Map, Value};

use crate::config::{sweep, Experiment, ExperimentConfig, Params};
use crate::report::{finite_or_null, Provenance, Report, ResultRow, ValueKind};
use crate::CliError;

const DEFAULT_TRIALS: usize = 10_000;
const DEFAULT_FACT_SAMPLES: usize = 1_000_000;
const MC_CONFIDENCE: f64 = 0.95;

/// Runs the configured experiment and assembles its report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let body = cfg.body.as_ref().map(|b| b.build()).transpose()?;
    let root = SeedSpec::new(cfg.seed);
    let ctx = Ctx {
        params: &cfg.params,
        root,
        body: body.as_ref(),
    };
    let (results, summary) = match cfg.experiment {
        Experiment::Widths => widths(&ctx)?,
        Experiment::Estimate => estimate(&ctx)?,
        Experiment::Lowerbound => lowerbound(&ctx)?,
        Experiment::Duality => duality(&ctx)?,
        Experiment::Theorem4 => theorem4(&ctx)?,
        Experiment::Ratio => ratio(&ctx)?,
        Experiment::LipschitzDemo => lipschitz_demo(&ctx)?,
        Experiment::LpTightness => lp_tightness(&ctx)?,
        Experiment::Facts => facts(&ctx)?,
    };
    let mut config = cfg.echo.clone();
    if let (Some(b), Some(obj)) = (&body, config.as_object_mut()) {
        obj.insert("resolved_body".into(), serde_json::to_value(BodySpec::from_body(b)).unwrap_or(Value::Null));
        obj.insert("seed".into(), json!(cfg.seed));
    }
    Ok(Report {
        experiment: cfg.experiment.name().to_string(),
        config,
        results,
        summary,
        provenance: Provenance {
            tool: "polywidth",
            version: env!("CARGO_PKG_VERSION"),
            library_version: polywidth::VERSION,
            seed: cfg.seed,
            parallel: cfg!(feature = "parallel"),
            workers: polywidth::par::worker_count(),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

struct Ctx<'a> {
    params: &'a Params,
    root: SeedSpec,
    body: Option<&'a Body>,
}

type Outcome = (Vec<ResultRow>, Map<String, Value>);

impl Ctx<'_> {
    fn body(&self) -> &Body {
        self.body.expect("validated configs carry a body where one is needed")
    }

    fn row_seed(&self, i: usize) -> SeedSpec {
        self.root.child(1 + i as u64)
    }

    fn search(&self) -> SearchBudget {
        let d = SearchBudget::default();
        SearchBudget {
            restarts: self.params.usize_or("restarts", d.restarts),
            iterations: self.params.usize_or("iterations", d.iterations),
            oracle_candidates: self.params.usize_or("candidates", d.oracle_candidates),
            ..d
        }
    }

    fn volume(&self) -> VolumeBudget {
        let d = VolumeBudget::default();
        VolumeBudget {
            search: SearchBudget {
                restarts: self.params.usize_or("restarts", d.search.restarts),
                iterations: self.params.usize_or("iterations", d.search.iterations),
                ..d.search
            },
            search_samples: self.params.usize_or("search_samples", d.search_samples),
            samples: self.params.usize_or("samples", d.samples),
        }
    }

    fn method(&self, body: &Body) -> WidthMethod {
        self.params.method.unwrap_or_else(|| default_method(body))
    }
}

/// Spectral widths for ellipsoids and balls, the oracle up to `n = 4`, vertex search beyond.
pub fn default_method(body: &Body) -> WidthMethod {
    match body {
        Body::Ellipsoid(_) | Body::EuclideanBall { .. } => WidthMethod::EllipsoidSpectral,
        _ if body.dim() <= ORACLE_MAX_DIM => WidthMethod::GrassmannOracle,
        _ => WidthMethod::VertexSearch,
    }
}

fn range_list(from: usize, to: usize) -> Vec<f64> {
    (from..=to).map(|k| k as f64).collect()
}

fn profile_detail(profile: &WidthProfile) -> Value {
    Value::Array(
        profile
            .estimates
            .iter()
            .map(|e| json!({"k": e.k, "width": e.value, "exact": e.exact, "method": e.method.name()}))
            .collect(),
    )
}

fn is_monotone(profile: &WidthProfile) -> bool {
    profile.values().windows(2).all(|w| w[1] <= w[0])
}

fn polytope_rows(body: &Body) -> Result<usize, CliError> {
    match body {
        Body::PolytopeH(p) if p.p().is_infinite() => Ok(p.m()),
        _ => Err(CliError::Config(format!(
            "this experiment needs a polytope_h body with p = inf, got {}",
            body.kind()
        ))),
    }
}

fn grade_kind(grade: CheckGrade) -> &'static str {
    match grade {
        CheckGrade::Sharp => "sharp",
        CheckGrade::Confirmed => "confirmed",
        CheckGrade::Advisory => "advisory",
    }
}

fn widths(ctx: &Ctx) -> Result<Outcome, CliError> {
    let body = ctx.body();
    let method = ctx.method(body);
    let profile = width_profile(body, method, &ctx.search(), &ctx.root.child(0))?;
    let rows = profile
        .estimates
        .iter()
        .map(|e| {
            let mut row = ResultRow::new(BTreeMap::from([("k".to_string(), e.k as f64)]));
            row.number("width", e.value, ValueKind::width(e.exact))
                .value("method", e.method.name())
                .value("certificate_dim", e.certificate.dim());
            row
        })
        .collect();
    let mut summary = Map::new();
    summary.insert("method".into(), json!(method.name()));
    summary.insert("monotone".into(), json!(is_monotone(&profile)));
    summary.insert("exact".into(), json!(profile.estimates.iter().all(|e| e.exact)));
    Ok((rows, summary))
}

fn estimate(ctx: &Ctx) -> Result<Outcome, CliError> {
    let body = ctx.body();
    let method = ctx.method(body);
    let profile = width_profile(body, method, &ctx.search(), &ctx.root.child(0))?;
    let trials = ctx.params.usize_or("trials", DEFAULT_TRIALS);
    let combos = sweep(ctx.params, &[("sigma", vec![1.0])]);
    let mut rows = Vec::new();
    let mut consistent = true;
    for (i, combo) in combos.iter().enumerate() {
        let sigma = combo["sigma"];
        let est = build_truncated(sigma, &profile)?;
        let mut row = ResultRow::new(combo.clone());
        let kind = ValueKind::width(est.exact);
        row.value("k", est.k)
            .number("risk_bound", est.risk_bound, kind)
            .number("bias_sq", est.bias_sq, kind)
            .number("variance", est.variance, ValueKind::Exact);
        if let Ok(pr) = projection_risk(body, &est.range, sigma) {
            row.number("projection_risk", pr.total, ValueKind::Exact);
        }
        let truth = farthest_point(body, &est.range).ok();
        if let Some(x) = truth {
            let instance = EstimationInstance::new(body.clone(), sigma, Some(x))?;
            let mc = monte_carlo_risk(&est, &instance, trials, &ctx.row_seed(i))?;
            // At the worst-bias truth the risk equals the bound up to search error.
            let ok = mc.mean <= est.risk_bound + mc.half_width_95 + 1e-9 * est.risk_bound.max(1.0);
            consistent &= ok;
            row.number("mc_risk", mc.mean, ValueKind::MonteCarlo)
                .with_confidence("mc_risk", MC_CONFIDENCE)
                .number("mc_half_width", mc.half_width_95, ValueKind::MonteCarlo)
                .value("mc_trials", mc.trials)
                .value("mc_within_bound", ok);
        }
        rows.push(row);
    }
    let mut summary = Map::new();
    summary.insert("method".into(), json!(method.name()));
    summary.insert("mc_within_bound".into(), json!(consistent));
    summary.insert("profile".into(), profile_detail(&profile));
    Ok((rows, summary))
}

/// Approximation radii for one `c_star`, shared across `sigma` values.
fn radii_for(ctx: &Ctx, body: &Body, c: f64, ks: &[usize], slot: u64) -> Result<Vec<ApproximationRadius>, CliError> {
    Ok(approximation_radii(body, c, ks, &ctx.volume(), &ctx.root.child(0).child(slot))?)
}

fn radius_detail(radii: &[ApproximationRadius]) -> Value {
    serde_json::to_value(radii).unwrap_or(Value::Null)
}

fn lowerbound(ctx: &Ctx) -> Result<Outcome, CliError> {
    let body = ctx.body();
    let ks: Vec<usize> = match ctx.params.list("k") {
        Some(ks) => ks.iter().map(|&k| k as usize).collect(),
        None => (1..=body.dim()).collect(),
    };
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > body.dim()) {
        return Err(CliError::Config(format!("field `params.k`: {bad} is outside 1..={}", body.dim())));
    }
    let combos = sweep(ctx.params, &[("c_star", vec![0.2]), ("sigma", vec![1.0])]);
    let mut cache: Vec<(f64, Vec<ApproximationRadius>)> = Vec::new();
    let mut rows = Vec::new();
    for combo in &combos {
        let (c, sigma) = (combo["c_star"], combo["sigma"]);
        if !cache.iter().any(|(cc, _)| *cc == c) {
            let slot = cache.len() as u64;
            cache.push((c, radii_for(ctx, body, c, &ks, slot)?));
        }
        let radii = &cache.iter().find(|(cc, _)| *cc == c).expect("cached above").1;
        let cert = lower_bound_from_radii(radii, sigma, c)?;
        let mut row = ResultRow::new(combo.clone());
        row.number("lower_bound", cert.value, ValueKind::McLowerConfidence)
            .with_confidence("lower_bound", cert.confidence)
            .value("k_witness", cert.k_witness)
            .number("z_witness", cert.z_witness, ValueKind::McLowerConfidence)
            .with_confidence("z_witness", cert.confidence)
            .number("constant_c", cert.constant_c, ValueKind::Exact)
            .value("samples", cert.samples);
        row.detail = json!({"per_k": cert.per_k, "radii": radius_detail(radii)});
        rows.push(row);
    }
    Ok((rows, Map::new()))
}

fn duality(ctx: &Ctx) -> Result<Outcome, CliError> {
    let body = ctx.body();
    let n = body.dim();
    let method = ctx.method(body);
    let dctx = DualityContext::new(body, method, &ctx.search(), &ctx.root.child(0))?;
    let combos = sweep(ctx.params, &[("k", range_list(1, n)), ("epsilon", vec![0.25, 0.5, 0.75])]);
    let mut rows = Vec::new();
    let mut all_pass = true;
    for combo in &combos {
        let k = combo["k"] as usize;
        let r = duality_check(&dctx, k, combo["epsilon"], true)?;
        all_pass &= r.pass;
        let mut row = ResultRow::new(combo.clone());
        row.value("dual_index", r.dual_index)
            .number("primal_width", r.primal_width, ValueKind::width(r.primal_exact))
            .number("dual_width", r.dual_width, ValueKind::width(r.dual_exact))
            .number("lhs", r.lhs, ValueKind::Derived)
            .number("rhs", r.rhs, ValueKind::Exact)
            .number("margin", r.margin, ValueKind::Derived)
            .value("pass", r.pass)
            .value("grade", grade_kind(r.grade));
        if let Some(s) = &r.subset_report {
            row.value("subset_pass", s.all_points.pass && s.first_k.as_ref().is_none_or(|c| c.pass))
                .value("subset_used", s.used);
        }
        row.detail = serde_json::to_value(&r).unwrap_or(Value::Null);
        rows.push(row);
    }
    let john: Vec<Value> = (0..n)
        .map(|k| john_duality_check(&dctx, k).map(|r| serde_json::to_value(r).unwrap_or(Value::Null)))
        .collect::<Result<_, _>>()?;
    let mut summary = Map::new();
    summary.insert("method".into(), json!(method.name()));
    summary.insert("c1".into(), json!(c1()));
    summary.insert("all_pass".into(), json!(all_pass));
    summary.insert(
        "john_all_pass".into(),
        json!(john.iter().all(|j| j["pass"].as_bool() == Some(true))),
    );
    summary.insert("john".into(), Value::Array(john));
    summary.insert("primal_profile".into(), profile_detail(&dctx.primal));
    summary.insert("dual_profile".into(), profile_detail(&dctx.dual));
    Ok((rows, summary))
}

fn theorem4(ctx: &Ctx) -> Result<Outcome, CliError> {
    let body = ctx.body();
    polytope_rows(body)?;
    let combos = sweep(ctx.params, &[("c_star", vec![0.2]), ("k", range_list(1, body.dim()))]);
    let mut rows = Vec::new();
    let mut all_pass = true;
    for (i, combo) in combos.iter().enumerate() {
        let r = theorem4_certificate(
            body,
            combo["k"] as usize,
            combo["c_star"],
            &ctx.search(),
            &ctx.volume(),
            &ctx.row_seed(i),
        )?;
        all_pass &= r.pass;
        let mut row = ResultRow::new(combo.clone());
        row.number("z", r.z, ValueKind::McLowerConfidence)
            .with_confidence("z", r.z_confidence)
            .number("rhs", r.rhs, ValueKind::Derived)
            .number("rhs_search", r.rhs_search, ValueKind::Derived)
            .number("dual_width_search", r.dual_width_search, ValueKind::UpperBound)
            .value("m", r.m)
            .number("c2", r.c2, ValueKind::Exact)
            .value("pass", r.pass)
            .value("grade", grade_kind(r.grade));
        if let (Some(w), Some(rhs)) = (r.dual_width_oracle, r.rhs_oracle) {
            row.number("dual_width_oracle", w, ValueKind::Exact)
                .number("rhs_oracle", rhs, ValueKind::Derived);
        }
        rows.push(row);
    }
    let mut summary = Map::new();
    summary.insert("all_pass".into(), json!(all_pass));
    Ok((rows, summary))
}

fn ratio_rows(
    ctx: &Ctx,
    body: &Body,
    profile: &WidthProfile,
    combos: &[BTreeMap<String, f64>],
    slot_base: u64,
) -> Result<(Vec<ResultRow>, bool), CliError> {
    let m = polytope_rows(body)?;
    let ks: Vec<usize> = (1..=body.dim()).collect();
    let mut cache: Vec<(f64, Vec<ApproximationRadius>)> = Vec::new();
    let mut rows = Vec::new();
    let mut all_pass = true;
    for combo in combos {
        let (c, sigma) = (combo["c_star"], combo["sigma"]);
        if !cache.iter().any(|(cc, _)| *cc == c) {
            let slot = slot_base + cache.len() as u64;
            cache.push((c, radii_for(ctx, body, c, &ks, slot)?));
        }
        let radii = &cache.iter().find(|(cc, _)| *cc == c).expect("cached above").1;
        let r = ratio_from_parts(profile, radii, sigma, c, m)?;
        all_pass &= r.pass == Some(true) && r.lower_le_rt;
        let mut row = ResultRow::new(combo.clone());
        row.number("rt", r.rt, ValueKind::width(r.widths_exact))
            .value("k_rt", r.k_rt)
            .number("lower", r.lower, ValueKind::McLowerConfidence)
            .with_confidence("lower", CONFIDENCE)
            .value("k_lower", r.k_lower)
            .value("ratio", r.ratio.map_or(Value::Null, finite_or_null))
            .number("bound", r.bound, ValueKind::Exact)
            .number("m_constant", r.m_constant, ValueKind::Exact)
            .value("m", r.m)
            .value("k_star", r.k_star)
            .value("lower_le_rt", r.lower_le_rt)
            .value("indeterminate", r.ratio.is_none())
            .value("pass", r.pass);
        if r.ratio.is_some() {
            row.flags.insert("ratio".into(), ValueKind::Derived);
        }
        rows.push(row);
    }
    Ok((rows, all_pass))
}

fn ratio(ctx: &Ctx) -> Result<Outcome, CliError> {
    let body = ctx.body();
    let method = ctx.method(body);
    polytope_rows(body)?;
    let profile = width_profile(body, method, &ctx.search(), &ctx.root.child(0).child(u64::MAX))?;
    let combos = sweep(ctx.params, &[("c_star", vec![0.2]), ("sigma", vec![1.0])]);
    let (rows, all_pass) = ratio_rows(ctx, body, &profile, &combos, 0)?;
    let mut summary = Map::new();
    summary.insert("method".into(), json!(method.name()));
    summary.insert("all_pass".into(), json!(all_pass));
    summary.insert("profile".into(), profile_detail(&profile));
    Ok((rows, summary))
}

fn lipschitz_demo(ctx: &Ctx) -> Result<Outcome, CliError> {
    let ns = ctx.params.list("n").map_or_else(|| vec![16.0], <[f64]>::to_vec);
    let ls = ctx.params.list("L").map_or_else(|| vec![1.0], <[f64]>::to_vec);
    let mut rows = Vec::new();
    let mut all_pass = true;
    let mut profiles = Vec::new();
    for (bi, (n, l)) in ns.iter().flat_map(|n| ls.iter().map(move |l| (*n as usize, *l))).enumerate() {
        if n < 2 || n > polywidth::bodies::VERTEX_PARALLELOTOPE_GUARD {
            return Err(CliError::Config(format!(
                "field `params.n`: the Lipschitz demo needs 2 <= n <= {}, got {n}",
                polywidth::bodies::VERTEX_PARALLELOTOPE_GUARD
            )));
        }
        let t = uniform_grid(n);
        let bound = default_lipschitz_bound(&t, l);
        let body = Body::PolytopeH(lipschitz_polytope(&t, l, bound)?);
        let seed = ctx.root.child(bi as u64);
        let sub = Ctx {
            params: ctx.params,
            root: seed.clone(),
            body: Some(&body),
        };
        let profile = width_profile(&body, WidthMethod::VertexSearch, &sub.search(), &seed.child(0).child(u64::MAX))?;
        let mut combos = sweep(ctx.params, &[("c_star", vec![0.2]), ("sigma", vec![0.1])]);
        for c in &mut combos {
            c.insert("n".into(), n as f64);
            c.insert("L".into(), l);
        }
        let (mut r, pass) = ratio_rows(&sub, &body, &profile, &combos, 0)?;
        for row in &mut r {
            row.number("domain_bound", bound, ValueKind::Exact).value("domain_bound_default", true);
            let sigma = row.params["sigma"];
            row.value("k_star_profile", k_star(&profile, sigma));
        }
        all_pass &= pass;
        rows.extend(r);
        profiles.push(json!({"n": n, "L": l, "domain_bound": bound, "profile": profile_detail(&profile)}));
    }
    let mut summary = Map::new();
    summary.insert("all_pass".into(), json!(all_pass));
    summary.insert("m_constant".into(), json!(m_constant(0.2)));
    summary.insert("profiles".into(), Value::Array(profiles));
    Ok((rows, summary))
}

fn lp_tightness(ctx: &Ctx) -> Result<Outcome, CliError> {
    let n_default = ctx.params.list("n").map_or(4.0, |ns| ns[0]);
    let combos = sweep(
        ctx.params,
        &[
            ("n", vec![4.0]),
            ("p", vec![1.0, 1.5]),
            ("c_star", vec![0.2]),
            ("k", range_list(1, (n_default as usize).saturating_sub(1).max(1))),
        ],
    );
    let volume = ctx.volume();
    let mut rows = Vec::new();
    let (mut all_within, mut all_vr) = (true, true);
    for (i, combo) in combos.iter().enumerate() {
        let (n, p, c, k) = (combo["n"] as usize, combo["p"], combo["c_star"], combo["k"] as usize);
        if k == 0 || k > n {
            return Err(CliError::Config(format!("field `params.k`: {k} is outside 1..={n}")));
        }
        let body = Body::lp_ball(n, p, 1.0)?;
        let seed = ctx.row_seed(i);
        let z = approximation_radius(&body, c, k, &volume, &seed.child(0), &[])?;
        let reference = (k as f64).powf(0.5 - 1.0 / p) / c;
        let factor = z.z / reference;
        let within = (0.5..=2.0).contains(&factor);
        let vr = volume_ratio(&body, &z.witness, z.z, volume.samples, &seed.child(1))?;
        let upper = lp_vr_upper(k, p, z.z)?;
        let vr_ok = upper >= vr.lower_conf;
        all_within &= within;
        all_vr &= vr_ok;
        let mut row = ResultRow::new(combo.clone());
        row.number("z", z.z, ValueKind::McLowerConfidence)
            .with_confidence("z", z.confidence)
            .number("reference", reference, ValueKind::Exact)
            .number("z_over_reference", factor, ValueKind::Derived)
            .value("within_factor_2", within)
            .number("vr_measured", vr.point_estimate, ValueKind::MonteCarlo)
            .number("vr_lower", vr.lower_conf, ValueKind::McLowerConfidence)
            .with_confidence("vr_lower", CONFIDENCE)
            .number("vr_upper", upper, ValueKind::Exact)
            .value("vr_bound_holds", vr_ok);
        rows.push(row);
    }
    let mut summary = Map::new();
    summary.insert("all_within_factor_2".into(), json!(all_within));
    summary.insert("all_vr_bounds_hold".into(), json!(all_vr));
    Ok((rows, summary))
}

fn facts(ctx: &Ctx) -> Result<Outcome, CliError> {
    let samples = ctx.params.usize_or("samples", DEFAULT_FACT_SAMPLES);
    let combos = sweep(ctx.params, &[("c_star", vec![0.2]), ("k", range_list(1, 10))]);
    let mut rows = Vec::new();
    let mut all = true;
    for (i, combo) in combos.iter().enumerate() {
        let k = combo["k"] as usize;
        if k == 0 {
            return Err(CliError::Config("field `params.k`: must be at least 1".into()));
        }
        let f = chi_square_facts(k, combo["c_star"], samples, &ctx.row_seed(i))?;
        all &= f.part_a_holds && f.part_b_holds && f.part_b_above_tenth;
        let mut row = ResultRow::new(combo.clone());
        row.number("r", f.r, ValueKind::Exact)
            .number("mu1_mc", f.mu1_mc, ValueKind::MonteCarlo)
            .number("mu1_std_error", f.mu1_std_error, ValueKind::MonteCarlo)
            .number("mu1_exact", f.mu1_exact, ValueKind::Exact)
            .number("part_a_lower", f.part_a_lower, ValueKind::Exact)
            .number("part_b_lower", f.part_b_lower, ValueKind::Exact)
            .value("part_a_holds", f.part_a_holds)
            .value("part_b_holds", f.part_b_holds)
            .value("part_b_above_tenth", f.part_b_above_tenth)
            .value("samples", f.samples);
        rows.push(row);
    }
    let mut summary = Map::new();
    summary.insert("all_hold".into(), json!(all));
    summary.insert(
        "constants".into(),
        serde_json::to_value(constant_chain(0.2, 2.0)).unwrap_or(Value::Null),
    );
    Ok((rows, summary))
}
