//! Width duality between `X` and its polar `X°`, wide vector sets, and the
//! approximation-radius and optimality-ratio checks built on them.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bodies::Body;
use crate::bounds::constants::{c1, c2, m_constant, restricted_invertibility_c};
use crate::bounds::{approximation_radii, approximation_radius, lower_bound_from_radii, ApproximationRadius, VolumeBudget};
use crate::error::{Error, Result};
use crate::estimators::build_truncated;
use crate::numerics::{combinations, dist_to_span, orthonormalize, SeedSpec, Subspace};
use crate::par;
use crate::search::SearchBudget;
use crate::widths::{kolmogorov_width, width_profile, RadiusEvaluator, WidthMethod, WidthProfile, ORACLE_MAX_DIM};

/// Largest set handled by the exhaustive sign-orthant minimization.
pub const SUBSET_GUARD: usize = 12;
const EXCHANGE_PASS_CAP: usize = 50;
const WOLFE_TOL: f64 = 1e-12;

/// Vectors with a certified wideness.
#[derive(Debug, Clone, Serialize)]
pub struct WideSet {
    #[serde(skip)]
    pub vectors: Vec<DVector<f64>>,
    pub delta: f64,
    pub exchange_passes: usize,
}

/// `min_i dist(v_i, span(V \ {v_i}))`; a single vector gives its norm, an empty set 0.
pub fn delta_wideness(v: &[DVector<f64>]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0].norm(),
        _ => (0..v.len())
            .map(|i| distance_to_others(v, i))
            .fold(f64::INFINITY, f64::min),
    }
}

fn span_of(vectors: &[&DVector<f64>], n: usize) -> Subspace {
    if vectors.is_empty() {
        return Subspace::zero(n);
    }
    let m = DMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i]);
    orthonormalize(&m)
}

fn distance_to_others(v: &[DVector<f64>], i: usize) -> f64 {
    let n = v[i].len();
    let others: Vec<&DVector<f64>> = v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x).collect();
    dist_to_span(&v[i], &span_of(&others, n)).unwrap_or(0.0)
}

/// Finds the point of the body farthest from a subspace.
enum Farthest {
    Points(Vec<DVector<f64>>),
    /// `X = S^{1/2} B_2`, stored by the symmetric square root.
    Ellipsoidal(DMatrix<f64>),
}

impl Farthest {
    fn for_body(body: &Body) -> Result<Self> {
        match body {
            Body::Ellipsoid(e) => {
                let axes = e.axes();
                let d = DMatrix::from_diagonal(&DVector::from_row_slice(e.semi_axes()));
                Ok(Farthest::Ellipsoidal(axes * d * axes.transpose()))
            }
            Body::EuclideanBall { radius, n } => Ok(Farthest::Ellipsoidal(DMatrix::identity(*n, *n) * *radius)),
            _ => {
                let eval = RadiusEvaluator::for_body(body)?;
                let pts = eval.extreme_points().ok_or_else(|| {
                    Error::unsupported(format!("no extreme-point oracle for a {} body", body.kind()))
                })?;
                Ok(Farthest::Points(pts.row_iter().map(|r| r.transpose()).collect()))
            }
        }
    }

    fn farthest(&self, w: &Subspace) -> DVector<f64> {
        match self {
            Farthest::Points(pts) => {
                let mut best = 0;
                let mut best_d = -1.0;
                for (i, p) in pts.iter().enumerate() {
                    let d = (p - w.project(p)).norm_squared();
                    if d > best_d + 1e-15 {
                        best = i;
                        best_d = d;
                    }
                }
                pts[best].clone()
            }
            Farthest::Ellipsoidal(root) => {
                let q = DMatrix::identity(root.nrows(), root.nrows()) - w.projector();
                let svd = (q * root).svd(false, true);
                let vt = svd.v_t.expect("requested V^T");
                let top = (0..svd.singular_values.len())
                    .max_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
                    .unwrap_or(0);
                root * vt.row(top).transpose()
            }
        }
    }
}

/// A point of the body at maximal distance from `w`.
pub fn farthest_point(body: &Body, w: &Subspace) -> Result<DVector<f64>> {
    Error::check_dim(body.dim(), w.ambient_dim())?;
    Ok(Farthest::for_body(body)?.farthest(w))
}

/// `count` points of the body approximating the largest simplex with the origin:
/// greedy farthest-point construction followed by exchange passes until no
/// single replacement increases the distance of a point to the span of the rest.
pub fn max_volume_simplex(body: &Body, count: usize) -> Result<WideSet> {
    let n = body.dim();
    if count == 0 || count > n + 1 {
        return Err(Error::arg(format!("count must lie in 1..={}, got {count}", n + 1)));
    }
    let oracle = Farthest::for_body(body)?;
    let mut v: Vec<DVector<f64>> = Vec::with_capacity(count);
    for _ in 0..count {
        let refs: Vec<&DVector<f64>> = v.iter().collect();
        v.push(oracle.farthest(&span_of(&refs, n)));
    }
    let mut passes = 0;
    while passes < EXCHANGE_PASS_CAP {
        passes += 1;
        let mut changed = false;
        for i in 0..count {
            let others: Vec<&DVector<f64>> = v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x).collect();
            let w = span_of(&others, n);
            let cand = oracle.farthest(&w);
            let current = (&v[i] - w.project(&v[i])).norm();
            let proposed = (&cand - w.project(&cand)).norm();
            if proposed > current * (1.0 + 1e-12) + 1e-15 {
                v[i] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let delta = delta_wideness(&v);
    Ok(WideSet {
        vectors: v,
        delta,
        exchange_passes: passes,
    })
}

/// Minimum-norm point of `conv(points)` by Wolfe's algorithm.
pub fn min_norm_point(points: &[DVector<f64>]) -> DVector<f64> {
    let scale = points.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(1e-300);
    let start = (0..points.len())
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .expect("non-empty point set");
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();
    for _ in 0..(50 * points.len() + 50) {
        let (j, best) = (0..points.len())
            .map(|j| (j, x.dot(&points[j])))
            .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        if x.norm_squared() - best <= WOLFE_TOL * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        loop {
            let mu = affine_minimizer(points, &active);
            if mu.iter().all(|&m| m > WOLFE_TOL) {
                lambda = mu;
                break;
            }
            let mut theta: f64 = 1.0;
            for (l, m) in lambda.iter().zip(&mu) {
                if *m <= WOLFE_TOL && l - m > 0.0 {
                    theta = theta.min(l / (l - m));
                }
            }
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l += theta * (m - *l);
            }
            let keep: Vec<usize> = (0..active.len()).filter(|&i| lambda[i] > WOLFE_TOL).collect();
            if keep.is_empty() {
                break;
            }
            active = keep.iter().map(|&i| active[i]).collect();
            lambda = keep.iter().map(|&i| lambda[i]).collect();
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
        }
        x = active
            .iter()
            .zip(&lambda)
            .fold(DVector::zeros(x.len()), |acc, (&i, &l)| acc + &points[i] * l);
    }
    x
}

/// Weights `mu` (summing to 1) minimizing `|sum mu_i p_i|` over the affine hull.
fn affine_minimizer(points: &[DVector<f64>], active: &[usize]) -> Vec<f64> {
    let s = active.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    for a in 0..s {
        for b in 0..s {
            kkt[(a, b)] = points[active[a]].dot(&points[active[b]]);
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(s + 1);
    rhs[s] = 1.0;
    let sol = kkt
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .unwrap_or_else(|_| DVector::from_element(s + 1, 1.0 / s as f64));
    sol.iter().take(s).copied().collect()
}

/// `min { |sum_j a_j v_j| : |a|_1 = 1 }`, exact over the `2^{s-1}` sign orthants.
pub fn l1_to_l2_lower(v: &[DVector<f64>]) -> Result<f64> {
    let s = v.len();
    if s == 0 {
        return Err(Error::arg("need at least one vector"));
    }
    if s > SUBSET_GUARD {
        return Err(Error::Resource {
            guard: "subset_size",
            detail: format!("{s} vectors exceed the s <= {SUBSET_GUARD} guard"),
        });
    }
    let mut best = f64::INFINITY;
    for mask in 0..(1usize << (s - 1)) {
        let signed: Vec<DVector<f64>> = v
            .iter()
            .enumerate()
            .map(|(j, x)| if j > 0 && (mask >> (j - 1)) & 1 == 1 { -x } else { x.clone() })
            .collect();
        best = best.min(min_norm_point(&signed).norm());
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetCertificate {
    pub subset: Vec<usize>,
    pub set_size: usize,
    pub min_subset_size: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub achieved: f64,
    /// `c sqrt(eps / s) delta` with `c = (sqrt 2 - 1) / 2`.
    pub required: f64,
    pub pass: bool,
}

/// Best subset of size at least `ceil((1 - eps) s)` for the `l_1 -> l_2` lower constant.
///
/// Sizes are scanned from `s` downward; within a size subsets come in
/// lexicographic order and the first strict maximum wins.
pub fn restricted_subset_certificate(set: &WideSet, epsilon: f64) -> Result<SubsetCertificate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let s = set.vectors.len();
    if s == 0 {
        return Err(Error::arg("empty wide set"));
    }
    if s > SUBSET_GUARD {
        return Err(Error::Resource {
            guard: "subset_size",
            detail: format!("{s} vectors exceed the s <= {SUBSET_GUARD} guard"),
        });
    }
    let min_size = (((1.0 - epsilon) * s as f64) - 1e-12).ceil().max(1.0) as usize;
    let subsets: Vec<Vec<usize>> = (min_size..=s).rev().flat_map(|size| combinations(s, size)).collect();
    let values = par::map_slice(&subsets, |idx| {
        let vs: Vec<DVector<f64>> = idx.iter().map(|&i| set.vectors[i].clone()).collect();
        l1_to_l2_lower(&vs).unwrap_or(0.0)
    });
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let required = restricted_invertibility_c() * (epsilon / s as f64).sqrt() * set.delta;
    Ok(SubsetCertificate {
        subset: subsets[best].clone(),
        set_size: s,
        min_subset_size: min_size,
        epsilon,
        delta: set.delta,
        achieved: values[best],
        required,
        pass: values[best] >= required,
    })
}

/// How far a check can be trusted given the nature of its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckGrade {
    /// All inputs are exact (or reference-oracle) values.
    Sharp,
    /// Inputs are one-sided bounds pointing the safe way for the observed verdict.
    Confirmed,
    /// Inputs are one-sided bounds pointing the unsafe way; the verdict is indicative only.
    Advisory,
}

/// Width profiles of a body and of its polar, computed once.
pub struct DualityContext {
    pub body: Body,
    pub method: WidthMethod,
    pub primal: WidthProfile,
    pub dual: WidthProfile,
}

impl DualityContext {
    pub fn new(body: &Body, method: WidthMethod, budget: &SearchBudget, seed: &SeedSpec) -> Result<Self> {
        let polar = body.polar_dual()?;
        let primal = width_profile(body, method, budget, &seed.child(0))?;
        let dual = width_profile(&polar, method, budget, &seed.child(1))?;
        Ok(DualityContext {
            body: body.clone(),
            method,
            primal,
            dual,
        })
    }

    pub fn n(&self) -> usize {
        self.body.dim()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetReport {
    /// Points `1..k` of the simplex.
    pub first_k: Option<SubsetCertificate>,
    /// All `k + 1` points.
    pub all_points: SubsetCertificate,
    pub used: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub check: &'static str,
    pub n: usize,
    pub k: usize,
    pub epsilon: Option<f64>,
    pub dual_index: usize,
    pub primal_width: f64,
    pub dual_width: f64,
    pub primal_exact: bool,
    pub dual_exact: bool,
    pub method: WidthMethod,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub grade: CheckGrade,
    pub subset_report: Option<SubsetReport>,
}

fn product_report(
    ctx: &DualityContext,
    check: &'static str,
    k: usize,
    epsilon: Option<f64>,
    dual_index: usize,
    rhs: f64,
) -> DualityReport {
    let p = &ctx.primal.estimates[k];
    let d = &ctx.dual.estimates[dual_index];
    let lhs = p.value * d.value;
    let pass = lhs <= rhs;
    let exact = p.exact && d.exact;
    // Upper-bound widths overstate the product, so only a pass is conclusive.
    let grade = match (exact, pass) {
        (true, _) => CheckGrade::Sharp,
        (false, true) => CheckGrade::Confirmed,
        (false, false) => CheckGrade::Advisory,
    };
    DualityReport {
        check,
        n: ctx.n(),
        k,
        epsilon,
        dual_index,
        primal_width: p.value,
        dual_width: d.value,
        primal_exact: p.exact,
        dual_exact: d.exact,
        method: ctx.method,
        lhs,
        rhs,
        margin: rhs - lhs,
        pass,
        grade,
        subset_report: None,
    }
}

/// `d_k(X) d_j(X°) <= c_1 sqrt(k / eps)` with `j = n - ceil((1 - eps) k)`.
pub fn duality_check(ctx: &DualityContext, k: usize, epsilon: f64, with_subsets: bool) -> Result<DualityReport> {
    let n = ctx.n();
    if k > n {
        return Err(Error::arg(format!("k = {k} exceeds n = {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let drop = (((1.0 - epsilon) * k as f64) - 1e-12).ceil().max(0.0) as usize;
    let j = n - drop;
    let rhs = c1() * (k as f64 / epsilon).sqrt();
    let mut report = product_report(ctx, "width-duality", k, Some(epsilon), j, rhs);
    if with_subsets && k >= 1 && k + 1 <= SUBSET_GUARD {
        let simplex = max_volume_simplex(&ctx.body, (k + 1).min(n + 1))?;
        let all_points = restricted_subset_certificate(&simplex, epsilon)?;
        let first = WideSet {
            delta: delta_wideness(&simplex.vectors[..k]),
            vectors: simplex.vectors[..k].to_vec(),
            exchange_passes: simplex.exchange_passes,
        };
        let first_k = restricted_subset_certificate(&first, epsilon).ok();
        let used = match &first_k {
            Some(c) if c.pass => "first_k",
            _ => "all_points",
        };
        report.subset_report = Some(SubsetReport {
            first_k,
            all_points,
            used,
        });
    }
    Ok(report)
}

/// `d_k(X) d_{n-k-1}(X°) <= sqrt(n)` for `0 <= k < n`.
pub fn john_duality_check(ctx: &DualityContext, k: usize) -> Result<DualityReport> {
    let n = ctx.n();
    if k >= n {
        return Err(Error::arg(format!("k must be below n = {n}, got {k}")));
    }
    Ok(product_report(ctx, "john", k, None, n - k - 1, (n as f64).sqrt()))
}

fn polytope_rows(body: &Body) -> Result<usize> {
    match body {
        Body::PolytopeH(p) if p.p().is_infinite() => {
            if p.m() < 2 {
                return Err(Error::arg(format!("need m >= 2 constraint rows, got {}", p.m())));
            }
            Ok(p.m())
        }
        _ => Err(Error::unsupported(format!(
            "this check needs an H-polytope with p = inf, got {}",
            body.kind()
        ))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem4Report {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub c_star: f64,
    pub c2: f64,
    pub z: f64,
    pub z_confidence: f64,
    pub z_samples: usize,
    /// `d_{n-k}(X°)` from vertex search (an upper bound).
    pub dual_width_search: f64,
    /// `c_2 sqrt(k / ln m) / dual_width_search` (a lower bound on the true right side).
    pub rhs_search: f64,
    pub dual_width_oracle: Option<f64>,
    pub rhs_oracle: Option<f64>,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub grade: CheckGrade,
}

/// `z_{c,k}(X) >= c_2 sqrt(k / ln m) / d_{n-k}(X°)` for `X = {|Ax|_inf <= 1}`.
pub fn theorem4_certificate(
    body: &Body,
    k: usize,
    c_star: f64,
    search: &SearchBudget,
    volume: &VolumeBudget,
    seed: &SeedSpec,
) -> Result<Theorem4Report> {
    let m = polytope_rows(body)?;
    let n = body.dim();
    if k == 0 || k > n {
        return Err(Error::arg(format!("k must lie in 1..={n}, got {k}")));
    }
    if !(c_star > 0.0 && c_star <= 0.2) {
        return Err(Error::arg(format!("c_star must lie in (0, 0.2], got {c_star}")));
    }
    let polar = body.polar_dual()?;
    let idx = n - k;
    let heuristic = kolmogorov_width(&polar, idx, WidthMethod::VertexSearch, search, &seed.child(0))?;
    let oracle = if n <= ORACLE_MAX_DIM {
        Some(kolmogorov_width(&polar, idx, WidthMethod::GrassmannOracle, search, &seed.child(1))?)
    } else {
        None
    };
    let scale = c2(c_star) * (k as f64 / (m as f64).ln()).sqrt();
    let rhs_search = scale / heuristic.value;
    let rhs_oracle = oracle.as_ref().map(|o| scale / o.value);
    let mut warm = vec![heuristic.certificate.basis().clone()];
    if let Some(o) = &oracle {
        warm.push(o.certificate.basis().clone());
    }
    let z = approximation_radius(body, c_star, k, volume, &seed.child(2), &warm)?;
    let rhs = rhs_oracle.map_or(rhs_search, |r| r.max(rhs_search));
    let pass = z.z >= rhs;
    Ok(Theorem4Report {
        n,
        m,
        k,
        c_star,
        c2: c2(c_star),
        z: z.z,
        z_confidence: z.confidence,
        z_samples: z.samples,
        dual_width_search: heuristic.value,
        rhs_search,
        dual_width_oracle: oracle.as_ref().map(|o| o.value),
        rhs_oracle,
        rhs,
        margin: z.z - rhs,
        pass,
        grade: if oracle.is_some() {
            CheckGrade::Sharp
        } else {
            CheckGrade::Advisory
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub sigma: f64,
    pub c_star: f64,
    pub m: usize,
    /// `min_k d_k^2 + k sigma^2` from the width profile.
    pub rt: f64,
    pub k_rt: usize,
    pub lower: f64,
    pub k_lower: usize,
    pub ratio: Option<f64>,
    pub m_constant: f64,
    /// `M_{c*} ln m`.
    pub bound: f64,
    /// `min { k >= 1 : d_k^2 <= k sigma^2 }`.
    pub k_star: Option<usize>,
    pub lower_le_rt: bool,
    pub pass: Option<bool>,
    pub widths_exact: bool,
}

/// `k* = min { k >= 1 : d_k^2 <= k sigma^2 }`.
pub fn k_star(profile: &WidthProfile, sigma: f64) -> Option<usize> {
    profile
        .estimates
        .iter()
        .skip(1)
        .find(|e| e.value * e.value <= e.k as f64 * sigma * sigma)
        .map(|e| e.k)
}

/// Combines a width profile and approximation radii into the ratio `R_T / lower`.
pub fn ratio_from_parts(
    profile: &WidthProfile,
    radii: &[ApproximationRadius],
    sigma: f64,
    c_star: f64,
    m: usize,
) -> Result<RatioReport> {
    let est = build_truncated(sigma, profile)?;
    let cert = lower_bound_from_radii(radii, sigma, c_star)?;
    let m_c = m_constant(c_star);
    let bound = m_c * (m as f64).ln();
    let ratio = (cert.value > 0.0).then(|| est.risk_bound / cert.value);
    Ok(RatioReport {
        sigma,
        c_star,
        m,
        rt: est.risk_bound,
        k_rt: est.k,
        lower: cert.value,
        k_lower: cert.k_witness,
        ratio,
        m_constant: m_c,
        bound,
        k_star: k_star(profile, sigma),
        lower_le_rt: cert.value <= est.risk_bound,
        pass: ratio.map(|r| r <= bound),
        widths_exact: profile.estimates.iter().all(|e| e.exact),
    })
}

/// `R_T(X, sigma) / R_lower(X, sigma)` against `M_{c*} ln m`.
pub fn optimality_ratio(
    body: &Body,
    sigma: f64,
    c_star: f64,
    method: WidthMethod,
    search: &SearchBudget,
    volume: &VolumeBudget,
    seed: &SeedSpec,
) -> Result<RatioReport> {
    let m = polytope_rows(body)?;
    let profile = width_profile(body, method, search, &seed.child(0))?;
    let ks: Vec<usize> = (1..=body.dim()).collect();
    let radii = approximation_radii(body, c_star, &ks, volume, &seed.child(1))?;
    ratio_from_parts(&profile, &radii, sigma, c_star, m)
}
