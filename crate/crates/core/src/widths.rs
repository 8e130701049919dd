//! Kolmogorov widths `d_k(X) = min { rad(P_H X) : dim H = n - k }`.
//!
//! Ellipsoids and balls are solved by their spectra. Polytopes get certified
//! upper bounds from subspace search (any `H` witnesses `d_k <= rad(P_H X)`),
//! and for `n <= 4` a dense random sweep of the Grassmannian serves as a
//! reference oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bodies::{Body, VERTEX_PARALLELOTOPE_GUARD};
use crate::error::{Error, Result};
use crate::numerics::{binomial, combinations, SeedSpec, Subspace};
use crate::par;
use crate::search::{self, grassmann_minimize, qr_basis, SearchBudget};

/// Largest ambient dimension accepted by the Grassmann oracle.
pub const ORACLE_MAX_DIM: usize = 4;
/// Default number of random candidate subspaces drawn by the oracle.
pub const ORACLE_CANDIDATES: usize = 1_000_000;
const ORACLE_CHUNK: usize = 8192;
const ORACLE_KEEP: usize = 8;
const ORACLE_REFINE_ITERATIONS: usize = 1500;
const COORDINATE_GUARD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthMethod {
    EllipsoidSpectral,
    VertexSearch,
    CoordinateOnly,
    GrassmannOracle,
}

impl WidthMethod {
    pub fn name(self) -> &'static str {
        match self {
            WidthMethod::EllipsoidSpectral => "ellipsoid-spectral",
            WidthMethod::VertexSearch => "vertex-search",
            WidthMethod::CoordinateOnly => "coordinate-only",
            WidthMethod::GrassmannOracle => "grassmann-oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            WidthMethod::EllipsoidSpectral,
            WidthMethod::VertexSearch,
            WidthMethod::CoordinateOnly,
            WidthMethod::GrassmannOracle,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }

    /// Whether values from this method are treated as exact widths.
    pub fn is_exact(self) -> bool {
        matches!(self, WidthMethod::EllipsoidSpectral | WidthMethod::GrassmannOracle)
    }
}

/// One width value with the `(n - k)`-dimensional range that attains it.
#[derive(Debug, Clone)]
pub struct WidthEstimate {
    pub k: usize,
    pub value: f64,
    pub certificate: Subspace,
    pub exact: bool,
    pub method: WidthMethod,
}

/// `d_0 >= d_1 >= ... >= d_n = 0` with per-index certificates.
#[derive(Debug, Clone)]
pub struct WidthProfile {
    pub estimates: Vec<WidthEstimate>,
}

impl WidthProfile {
    pub fn values(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.value).collect()
    }

    pub fn get(&self, k: usize) -> Option<&WidthEstimate> {
        self.estimates.get(k)
    }

    pub fn dim(&self) -> usize {
        self.estimates.len().saturating_sub(1)
    }
}

/// Computes `rad(P_H X)` for a fixed body and varying `H`.
#[derive(Debug, Clone)]
pub enum RadiusEvaluator {
    /// Extreme points as rows (one representative per `+-` pair).
    Points(DMatrix<f64>),
    /// `X = G [-1, 1]^n` with generators as the columns of `G`.
    Parallelotope(DMatrix<f64>),
    /// `X = {x : x^T S^{-1} x <= 1}`, stored by `S`.
    Quadratic(DMatrix<f64>),
    Ball { radius: f64, n: usize },
}

impl RadiusEvaluator {
    pub fn for_body(body: &Body) -> Result<Self> {
        let eval = Self::build(body)?;
        if let RadiusEvaluator::Parallelotope(g) = &eval {
            if g.nrows() > VERTEX_PARALLELOTOPE_GUARD {
                return Err(Error::Resource {
                    guard: "parallelotope_dim",
                    detail: format!(
                        "radius of a parallelotope scans 2^(n-1) sign patterns; n = {} exceeds {VERTEX_PARALLELOTOPE_GUARD}",
                        g.nrows()
                    ),
                });
            }
        }
        Ok(eval)
    }

    fn build(body: &Body) -> Result<Self> {
        use crate::bodies::PolytopeH;
        match body {
            Body::PolytopeH(b) if b.p().is_infinite() && b.m() == b.n() => {
                let inv = b
                    .a()
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Solver("constraint matrix is singular".into()))?;
                Ok(RadiusEvaluator::Parallelotope(inv))
            }
            Body::PolytopeH(b) if b.p() == 2.0 => {
                let gram = b.a().tr_mul(b.a());
                let inv = gram
                    .try_inverse()
                    .ok_or_else(|| Error::Solver("singular Gram matrix".into()))?;
                Ok(RadiusEvaluator::Quadratic(inv))
            }
            Body::Box(b) => Ok(RadiusEvaluator::Parallelotope(DMatrix::from_diagonal(
                b.half_widths(),
            ))),
            Body::LpBall { p, radius, n } if p.is_infinite() => Ok(
                RadiusEvaluator::Parallelotope(DMatrix::identity(*n, *n) * *radius),
            ),
            Body::Ellipsoid(e) => Ok(RadiusEvaluator::Quadratic(e.inverse_shape())),
            Body::EuclideanBall { radius, n } => Ok(RadiusEvaluator::Ball {
                radius: *radius,
                n: *n,
            }),
            Body::PolytopeV(v) => Ok(RadiusEvaluator::Points(v.generators().clone())),
            Body::PolytopeH(PolytopeH { .. }) | Body::LpBall { .. } | Body::Segment { .. } => {
                Ok(RadiusEvaluator::Points(half_points(&body.vertex_matrix()?)))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RadiusEvaluator::Points(p) => p.ncols(),
            RadiusEvaluator::Parallelotope(g) => g.nrows(),
            RadiusEvaluator::Quadratic(s) => s.nrows(),
            RadiusEvaluator::Ball { n, .. } => *n,
        }
    }

    /// Whether the maximum is taken over an explicit finite point set.
    pub fn is_vertex_based(&self) -> bool {
        matches!(self, RadiusEvaluator::Points(_) | RadiusEvaluator::Parallelotope(_))
    }

    /// `rad(P_H X)` for `H = span(basis)`, `basis` orthonormal `n x d`.
    pub fn eval(&self, basis: &DMatrix<f64>) -> f64 {
        if basis.ncols() == 0 {
            return 0.0;
        }
        match self {
            RadiusEvaluator::Points(p) => {
                let proj = p * basis;
                proj.row_iter()
                    .map(|r| r.norm_squared())
                    .fold(0.0, f64::max)
                    .sqrt()
            }
            RadiusEvaluator::Parallelotope(g) => {
                let m = basis.tr_mul(g);
                parallelotope_radius(&m)
            }
            RadiusEvaluator::Quadratic(s) => {
                let c = basis.tr_mul(&(s * basis));
                lambda_max(&c).max(0.0).sqrt()
            }
            RadiusEvaluator::Ball { radius, .. } => *radius,
        }
    }

    /// Second-moment matrix of the extreme points (or its analogue), used for warm starts.
    pub fn second_moment(&self) -> DMatrix<f64> {
        match self {
            RadiusEvaluator::Points(p) => p.tr_mul(p),
            RadiusEvaluator::Parallelotope(g) => g * g.transpose(),
            RadiusEvaluator::Quadratic(s) => s.clone(),
            RadiusEvaluator::Ball { n, .. } => DMatrix::identity(*n, *n),
        }
    }

    /// One point per `+-` pair of extreme points, when the body has finitely many.
    pub fn extreme_points(&self) -> Option<DMatrix<f64>> {
        match self {
            RadiusEvaluator::Points(p) => Some(p.clone()),
            RadiusEvaluator::Parallelotope(g) => {
                let n = g.ncols();
                let rows = 1usize << (n - 1);
                let signs = DMatrix::from_fn(rows, n, |r, c| {
                    if c > 0 && (r >> (c - 1)) & 1 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                });
                Some(signs * g.transpose())
            }
            _ => None,
        }
    }
}

/// Keeps one representative of each `+-v` pair.
fn half_points(v: &DMatrix<f64>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..v.nrows())
        .filter(|&i| {
            let r = v.row(i);
            match r.iter().find(|x| x.abs() > 1e-12) {
                Some(&x) => x > 0.0,
                None => true,
            }
        })
        .collect();
    v.select_rows(keep.iter())
}

/// `max_{s in {+-1}^n} |M s|_2` by Gray-code enumeration.
fn parallelotope_radius(m: &DMatrix<f64>) -> f64 {
    let (d, n) = m.shape();
    let mut v: Vec<f64> = (0..d).map(|i| m.row(i).sum()).collect();
    let mut signs = vec![1.0f64; n];
    let mut best: f64 = v.iter().map(|x| x * x).sum();
    for step in 1usize..(1usize << (n - 1)) {
        let j = step.trailing_zeros() as usize + 1;
        let s = signs[j];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= 2.0 * s * m[(i, j)];
        }
        signs[j] = -s;
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        if norm2 > best {
            best = norm2;
        }
    }
    best.sqrt()
}

fn lambda_max(c: &DMatrix<f64>) -> f64 {
    match c.nrows() {
        0 => 0.0,
        1 => c[(0, 0)],
        2 => {
            let (a, b, d) = (c[(0, 0)], 0.5 * (c[(0, 1)] + c[(1, 0)]), c[(1, 1)]);
            0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt()
        }
        _ => SymmetricEigen::new(c.clone()).eigenvalues.max(),
    }
}

/// Eigenvectors of a symmetric matrix as columns, sorted by ascending eigenvalue.
pub(crate) fn ascending_eigenvectors(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = s.nrows();
    let eig = SymmetricEigen::new((s + s.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (order.iter().map(|&i| eig.eigenvalues[i]).collect(), vecs)
}

/// Warm starts for an `(n - k)`-dimensional range: the minor eigenspace of the
/// second moment, and for point sets a multiplicative-weights reweighting of it.
fn warm_starts(eval: &RadiusEvaluator, d: usize) -> Vec<DMatrix<f64>> {
    let n = eval.dim();
    let (_, vecs) = ascending_eigenvectors(&eval.second_moment());
    let mut starts = vec![vecs.columns(0, d).into_owned()];
    if let RadiusEvaluator::Points(p) = eval {
        let mut w = DVector::from_element(p.nrows(), 1.0);
        let mut basis = starts[0].clone();
        for _ in 0..12 {
            let res: Vec<f64> = (p * &basis).row_iter().map(|r| r.norm_squared()).collect();
            let top = res.iter().cloned().fold(0.0, f64::max);
            if top <= 0.0 {
                break;
            }
            for (wi, r) in w.iter_mut().zip(&res) {
                *wi *= (2.0 * r / top).exp();
            }
            let total = w.sum();
            w /= total;
            let weighted = DMatrix::from_fn(p.nrows(), n, |i, j| p[(i, j)] * w[i].sqrt());
            let (_, v) = ascending_eigenvectors(&weighted.tr_mul(&weighted));
            basis = v.columns(0, d).into_owned();
        }
        starts.push(basis);
    }
    starts
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k > n {
        return Err(Error::arg(format!("width index k = {k} exceeds dimension n = {n}")));
    }
    Ok(())
}

/// `d_k(X)` with a certificate range, by the requested method.
pub fn kolmogorov_width(
    body: &Body,
    k: usize,
    method: WidthMethod,
    budget: &SearchBudget,
    seed: &SeedSpec,
) -> Result<WidthEstimate> {
    let n = body.dim();
    check_k(n, k)?;
    if method == WidthMethod::EllipsoidSpectral {
        return spectral_width(body, k);
    }
    if method == WidthMethod::VertexSearch && !body.has_vertices() {
        return Err(Error::unsupported(format!(
            "vertex-search needs enumerable vertices; a {} body of dimension {n} has none",
            body.kind()
        )));
    }
    let eval = RadiusEvaluator::for_body(body)?;
    width_with_evaluator(&eval, k, method, budget, seed)
}

/// `d_k` of the body behind `eval` (any method except the spectral one).
pub fn width_with_evaluator(
    eval: &RadiusEvaluator,
    k: usize,
    method: WidthMethod,
    budget: &SearchBudget,
    seed: &SeedSpec,
) -> Result<WidthEstimate> {
    let n = eval.dim();
    check_k(n, k)?;
    let d = n - k;
    let (value, basis) = match method {
        WidthMethod::EllipsoidSpectral => {
            return Err(Error::unsupported(
                "ellipsoid-spectral runs on the body, not on an evaluator",
            ))
        }
        WidthMethod::VertexSearch => {
            if !eval.is_vertex_based() {
                return Err(Error::unsupported("vertex-search needs a vertex-based body"));
            }
            let warm = if d == 0 || d == n { vec![] } else { warm_starts(eval, d) };
            let out = grassmann_minimize(n, d, |b| eval.eval(b), budget, seed, &warm);
            (out.value, out.basis)
        }
        WidthMethod::CoordinateOnly => coordinate_width(eval, d)?,
        WidthMethod::GrassmannOracle => oracle_width(eval, d, budget, seed)?,
    };
    let certificate = Subspace::from_orthonormal(basis);
    Ok(WidthEstimate {
        k,
        value,
        certificate,
        exact: method.is_exact(),
        method,
    })
}

fn spectral_width(body: &Body, k: usize) -> Result<WidthEstimate> {
    let n = body.dim();
    let (value, certificate) = match body {
        Body::Ellipsoid(e) => {
            let value = e.semi_axes().get(k).copied().unwrap_or(0.0);
            let basis = e.axes().columns(k, n - k).into_owned();
            (value, Subspace::from_orthonormal(basis))
        }
        Body::EuclideanBall { radius, .. } => {
            let value = if k < n { *radius } else { 0.0 };
            let axes: Vec<usize> = (k..n).collect();
            (value, Subspace::coordinate(n, &axes))
        }
        _ => {
            return Err(Error::unsupported(format!(
                "ellipsoid-spectral needs an ellipsoid or ball, got {}",
                body.kind()
            )))
        }
    };
    Ok(WidthEstimate {
        k,
        value,
        certificate,
        exact: true,
        method: WidthMethod::EllipsoidSpectral,
    })
}

fn coordinate_width(eval: &RadiusEvaluator, d: usize) -> Result<(f64, DMatrix<f64>)> {
    let n = eval.dim();
    let count = binomial(n, d);
    if count > COORDINATE_GUARD {
        return Err(Error::Resource {
            guard: "coordinate_subsets",
            detail: format!("C({n},{d}) = {count:.3e} coordinate subspaces"),
        });
    }
    let subsets = combinations(n, d);
    let values = par::map_slice(&subsets, |axes| {
        eval.eval(Subspace::coordinate(n, axes).basis())
    });
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    Ok((values[best], Subspace::coordinate(n, &subsets[best]).basis().clone()))
}

/// Candidate subspace stored by the smaller of its basis and its complement's basis.
struct Candidate {
    value2: f64,
    vectors: Vec<[f64; ORACLE_MAX_DIM]>,
}

fn oracle_width(
    eval: &RadiusEvaluator,
    d: usize,
    budget: &SearchBudget,
    seed: &SeedSpec,
) -> Result<(f64, DMatrix<f64>)> {
    let n = eval.dim();
    if n > ORACLE_MAX_DIM {
        return Err(Error::unsupported(format!(
            "grassmann-oracle needs n <= {ORACLE_MAX_DIM}, got n = {n}"
        )));
    }
    if d == 0 {
        return Ok((0.0, DMatrix::zeros(n, 0)));
    }
    if d == n {
        let id = DMatrix::identity(n, n);
        return Ok((eval.eval(&id), id));
    }
    let use_complement = n - d < d;
    let e = if use_complement { n - d } else { d };
    let points = eval.extreme_points();
    let pts: Vec<[f64; ORACLE_MAX_DIM]> = points
        .as_ref()
        .map(|p| {
            let mut rows: Vec<[f64; ORACLE_MAX_DIM]> = p
                .row_iter()
                .map(|r| {
                    let mut a = [0.0; ORACLE_MAX_DIM];
                    a[..n].copy_from_slice(&r.iter().copied().collect::<Vec<_>>());
                    a
                })
                .collect();
            rows.sort_by(|x, y| norm2(y).total_cmp(&norm2(x)));
            rows
        })
        .unwrap_or_default();

    let value2_of = |vectors: &[[f64; ORACLE_MAX_DIM]], threshold: f64| -> f64 {
        match eval {
            RadiusEvaluator::Ball { radius, .. } => radius * radius,
            RadiusEvaluator::Quadratic(_) => {
                let basis = to_range_basis(vectors, n, use_complement);
                let r = eval.eval(&basis);
                r * r
            }
            _ => {
                let mut best: f64 = 0.0;
                for p in &pts {
                    let mut s = 0.0;
                    for v in vectors {
                        let dot: f64 = (0..n).map(|i| v[i] * p[i]).sum();
                        s += dot * dot;
                    }
                    let val = if use_complement { norm2(p) - s } else { s };
                    if val > best {
                        best = val;
                        if best > threshold {
                            return best;
                        }
                    }
                }
                best
            }
        }
    };

    let candidates = budget.oracle_candidates.max(1);
    let chunks = par::chunk_count(candidates, ORACLE_CHUNK);
    let per_chunk: Vec<Vec<Candidate>> = par::map_indexed(chunks, |c| {
        let mut rng = seed.child(c as u64).rng();
        let range = par::chunk_range(c, candidates, ORACLE_CHUNK);
        let mut top: Vec<Candidate> = Vec::with_capacity(ORACLE_KEEP + 1);
        for _ in range {
            let vectors = random_frame(&mut rng, n, e);
            let threshold = if top.len() == ORACLE_KEEP {
                top[ORACLE_KEEP - 1].value2
            } else {
                f64::INFINITY
            };
            let value2 = value2_of(&vectors, threshold);
            if value2 < threshold {
                let pos = top.partition_point(|t| t.value2 <= value2);
                top.insert(pos, Candidate { value2, vectors });
                top.truncate(ORACLE_KEEP);
            }
        }
        top
    });
    let mut pool: Vec<Candidate> = per_chunk.into_iter().flatten().collect();
    pool.sort_by(|a, b| a.value2.total_cmp(&b.value2));
    pool.truncate(ORACLE_KEEP);

    let mut starts: Vec<DMatrix<f64>> = pool
        .iter()
        .map(|c| to_range_basis(&c.vectors, n, use_complement))
        .collect();
    starts.extend(warm_starts(eval, d));
    let refine_budget = SearchBudget {
        iterations: ORACLE_REFINE_ITERATIONS.max(budget.iterations),
        ..*budget
    };
    let refine_seed = seed.child(u64::MAX);
    let refined = par::map_indexed(starts.len(), |i| {
        let mut rng = refine_seed.child(i as u64).rng();
        search::refine(starts[i].clone(), &|b: &DMatrix<f64>| eval.eval(b), &refine_budget, &mut rng)
    });
    let (value, basis, _) = refined
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("non-empty refinement pool");
    Ok((value, basis))
}

fn norm2(p: &[f64; ORACLE_MAX_DIM]) -> f64 {
    p.iter().map(|x| x * x).sum()
}

/// `e` orthonormal vectors in `R^n` by Gram-Schmidt on Gaussian draws.
fn random_frame<R: Rng + ?Sized>(rng: &mut R, n: usize, e: usize) -> Vec<[f64; ORACLE_MAX_DIM]> {
    let mut out: Vec<[f64; ORACLE_MAX_DIM]> = Vec::with_capacity(e);
    while out.len() < e {
        let mut v = [0.0; ORACLE_MAX_DIM];
        for x in v.iter_mut().take(n) {
            *x = rng.sample(StandardNormal);
        }
        for u in &out {
            let dot: f64 = (0..n).map(|i| u[i] * v[i]).sum();
            for i in 0..n {
                v[i] -= dot * u[i];
            }
        }
        let norm = norm2(&v).sqrt();
        if norm > 1e-8 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            out.push(v);
        }
    }
    out
}

fn to_range_basis(vectors: &[[f64; ORACLE_MAX_DIM]], n: usize, complement: bool) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i]);
    if complement {
        Subspace::from_orthonormal(m).complement().basis().clone()
    } else {
        m
    }
}

/// Widths for `k = 0..=n`, post-processed into a non-increasing chain.
///
/// When a search returns `d_k > d_{k-1}`, the `k - 1` certificate minus its
/// top principal direction replaces it; projecting onto a subspace of a range
/// can only shrink the radius, so the replacement is at most `d_{k-1}`.
pub fn width_profile(
    body: &Body,
    method: WidthMethod,
    budget: &SearchBudget,
    seed: &SeedSpec,
) -> Result<WidthProfile> {
    let n = body.dim();
    let ks: Vec<usize> = (0..=n).collect();
    if method == WidthMethod::EllipsoidSpectral {
        let estimates = ks.iter().map(|&k| spectral_width(body, k)).collect::<Result<_>>()?;
        return Ok(WidthProfile { estimates });
    }
    if method == WidthMethod::VertexSearch && !body.has_vertices() {
        return Err(Error::unsupported(format!(
            "vertex-search needs enumerable vertices; a {} body of dimension {n} has none",
            body.kind()
        )));
    }
    let eval = RadiusEvaluator::for_body(body)?;
    profile_with_evaluator(&eval, method, budget, seed)
}

/// Width profile of the body behind `eval`.
pub fn profile_with_evaluator(
    eval: &RadiusEvaluator,
    method: WidthMethod,
    budget: &SearchBudget,
    seed: &SeedSpec,
) -> Result<WidthProfile> {
    let n = eval.dim();
    let mut estimates = Vec::with_capacity(n + 1);
    for k in 0..=n {
        estimates.push(width_with_evaluator(eval, k, method, budget, &seed.child(k as u64))?);
    }
    enforce_monotone(eval, &mut estimates);
    Ok(WidthProfile { estimates })
}

fn enforce_monotone(eval: &RadiusEvaluator, estimates: &mut [WidthEstimate]) {
    let moment = eval.second_moment();
    for k in 1..estimates.len() {
        if estimates[k].value <= estimates[k - 1].value {
            continue;
        }
        let prev = estimates[k - 1].certificate.basis().clone();
        let projected = prev.tr_mul(&(&moment * &prev));
        let (_, vecs) = ascending_eigenvectors(&projected);
        let keep = prev.ncols() - 1;
        let basis = qr_basis(&(&prev * vecs.columns(0, keep)));
        let value = eval.eval(&basis).min(estimates[k - 1].value);
        estimates[k].value = value;
        estimates[k].certificate = Subspace::from_orthonormal(basis);
        estimates[k].exact = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{BoxBody, Ellipsoid, PolytopeH};
    use crate::numerics::gaussian_matrix;
    use approx::assert_relative_eq;

    fn small_budget() -> SearchBudget {
        SearchBudget {
            oracle_candidates: 50_000,
            ..SearchBudget::default()
        }
    }

    #[test]
    fn ellipsoid_spectral_profile() {
        let e = Body::Ellipsoid(Ellipsoid::from_semi_axes(&[5.0, 3.0, 1.0]).unwrap());
        let p = width_profile(&e, WidthMethod::EllipsoidSpectral, &small_budget(), &SeedSpec::new(0))
            .unwrap();
        assert_eq!(p.values(), vec![5.0, 3.0, 1.0, 0.0]);
        let cert = &p.estimates[1].certificate;
        assert_eq!(cert.dim(), 2);
        assert!(cert.project(&DVector::from_vec(vec![1.0, 0.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn ellipsoid_oracle_agrees() {
        let e = Body::Ellipsoid(Ellipsoid::from_semi_axes(&[5.0, 3.0, 1.0]).unwrap());
        let w = kolmogorov_width(&e, 1, WidthMethod::GrassmannOracle, &small_budget(), &SeedSpec::new(1))
            .unwrap();
        assert!((w.value - 3.0).abs() < 1e-3, "{}", w.value);
    }

    #[test]
    fn cross_polytope_d1() {
        let b1 = Body::lp_ball(2, 1.0, 1.0).unwrap();
        for method in [WidthMethod::VertexSearch, WidthMethod::GrassmannOracle] {
            let w = kolmogorov_width(&b1, 1, method, &small_budget(), &SeedSpec::new(2)).unwrap();
            assert!((w.value - 0.5f64.sqrt()).abs() < 1e-6, "{method:?} {}", w.value);
            let u = w.certificate.basis().column(0);
            assert!((u[0].abs() - u[1].abs()).abs() < 1e-4);
        }
    }

    #[test]
    fn full_index_is_zero() {
        let body = Body::cube(3);
        for method in [WidthMethod::VertexSearch, WidthMethod::CoordinateOnly, WidthMethod::GrassmannOracle] {
            let w = kolmogorov_width(&body, 3, method, &small_budget(), &SeedSpec::new(0)).unwrap();
            assert_eq!(w.value, 0.0);
            assert_eq!(w.certificate.dim(), 0);
        }
    }

    #[test]
    fn box_coordinate_profile() {
        let b = Body::Box(BoxBody::new(DVector::from_vec(vec![2.0, 1.0])).unwrap());
        let p = width_profile(&b, WidthMethod::CoordinateOnly, &small_budget(), &SeedSpec::new(0))
            .unwrap();
        assert_relative_eq!(p.estimates[0].value, 5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(p.estimates[1].value, 1.0, epsilon = 1e-12);
        assert_eq!(p.estimates[2].value, 0.0);
        let oracle = kolmogorov_width(&b, 1, WidthMethod::GrassmannOracle, &small_budget(), &SeedSpec::new(0))
            .unwrap();
        assert!(oracle.value <= 1.0 + 1e-9);
    }

    #[test]
    fn parallelotope_matches_points() {
        let mut rng = SeedSpec::new(4).rng();
        let a = gaussian_matrix(&mut rng, 5, 5);
        let body = Body::PolytopeH(PolytopeH::new(a, f64::INFINITY).unwrap());
        let fast = RadiusEvaluator::for_body(&body).unwrap();
        let slow = RadiusEvaluator::Points(body.vertex_matrix().unwrap());
        for d in 1..5 {
            let b = search::random_basis(&mut rng, 5, d);
            assert_relative_eq!(fast.eval(&b), slow.eval(&b), max_relative = 1e-12);
        }
    }

    #[test]
    fn method_guards() {
        let cube = Body::cube(5);
        assert!(matches!(
            kolmogorov_width(&cube, 1, WidthMethod::GrassmannOracle, &small_budget(), &SeedSpec::new(0)),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            kolmogorov_width(&cube, 1, WidthMethod::EllipsoidSpectral, &small_budget(), &SeedSpec::new(0)),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            kolmogorov_width(&cube, 6, WidthMethod::VertexSearch, &small_budget(), &SeedSpec::new(0)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn scale_equivariance() {
        let b = Body::Box(BoxBody::new(DVector::from_vec(vec![3.0, 1.0, 2.0])).unwrap());
        let e = Body::Ellipsoid(Ellipsoid::from_semi_axes(&[4.0, 2.0, 1.0]).unwrap());
        for c in [0.5, 3.0] {
            for k in 0..=3 {
                let w = kolmogorov_width(&b, k, WidthMethod::CoordinateOnly, &small_budget(), &SeedSpec::new(0)).unwrap();
                let ws = kolmogorov_width(&b.scaled(c).unwrap(), k, WidthMethod::CoordinateOnly, &small_budget(), &SeedSpec::new(0)).unwrap();
                assert!((ws.value - c * w.value).abs() < 1e-9);
                let w = spectral_width(&e, k).unwrap();
                let ws = spectral_width(&e.scaled(c).unwrap(), k).unwrap();
                assert!((ws.value - c * w.value).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn certificate_consistency() {
        let mut rng = SeedSpec::new(6).rng();
        let a = gaussian_matrix(&mut rng, 7, 4);
        let body = Body::PolytopeH(PolytopeH::new(a, f64::INFINITY).unwrap());
        let verts = body.vertex_matrix().unwrap();
        let p = width_profile(&body, WidthMethod::VertexSearch, &small_budget(), &SeedSpec::new(6))
            .unwrap();
        for est in &p.estimates {
            let b = est.certificate.basis();
            let direct = (&verts * b).row_iter().map(|r| r.norm()).fold(0.0, f64::max);
            assert!((direct - est.value).abs() <= 1e-7 * est.value.max(1e-300));
        }
        for w in p.values().windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
