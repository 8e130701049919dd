//! Volume ratios of central cuts, approximation radii and the minimax lower
//! bound `R(X, sigma) >= C c^2 max_k min(z_{c,k}^2, k sigma^2)`, together with
//! the Fano, box, `l_p` and Gaussian ingredients.
//!
//! Hit-or-miss estimates draw uniform points `u` of the unit `k`-ball and
//! evaluate the gauge `g(u)` of the cut `X ∩ H` at `B u`; the scaled point `r u`
//! lies in the cut iff `r g(u) <= 1`. For a fixed sample, the hit count is
//! therefore a step function of `r`, and the largest `r` whose one-sided Wilson
//! bound clears `c^k` is the reciprocal of an order statistic of the gauges.

pub mod constants;
mod facts;
mod fano;
mod lp;

pub use facts::{chi_square_facts, part_a_lower, part_b_lower, ChiSquareFacts};
pub use fano::{
    box_lower_bound, fano_bound, greedy_net, greedy_packing, min_pairwise_distance, probe_cloud,
    BoxBound, PointSet, PointSetKind,
};
pub use lp::{euclidean_ball_volume, lp_ball_volume, lp_volume_constant, lp_vr_upper};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bodies::{Body, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::numerics::{lp_norm, unit_ball_point, wilson_lower, SeedSpec, Subspace, Z_975};
use crate::par;
use crate::search::{grassmann_minimize, SearchBudget};
use crate::widths::ascending_eigenvectors;
use constants::C_LOWER;

const SAMPLE_CHUNK: usize = 4096;
/// One-sided confidence of every Wilson bound used here.
pub const CONFIDENCE: f64 = 0.975;

/// Effort for Monte Carlo volume work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeBudget {
    pub search: SearchBudget,
    /// Common samples shared by every candidate during subspace search.
    pub search_samples: usize,
    /// Fresh samples used to certify the winning subspace.
    pub samples: usize,
}

impl Default for VolumeBudget {
    fn default() -> Self {
        VolumeBudget {
            search: SearchBudget {
                restarts: 8,
                iterations: 120,
                ..SearchBudget::default()
            },
            search_samples: 4096,
            samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeRatioEstimate {
    pub r: f64,
    #[serde(skip)]
    pub subspace: Subspace,
    pub k: usize,
    pub hits: usize,
    pub samples: usize,
    /// `(hits / samples)^{1/k}`.
    pub point_estimate: f64,
    /// Wilson lower bound on the hit rate, raised to `1/k`.
    pub lower_conf: f64,
}

/// Gauge of the cut `X ∩ H` in the coordinates of `H`.
enum CutGauge<'a> {
    /// `|F u|_p`.
    Linear { f: DMatrix<f64>, p: f64 },
    /// `sqrt(u^T Q u)`.
    Quadratic(DMatrix<f64>),
    Scalar(f64),
    Generic { body: &'a Body, basis: DMatrix<f64> },
}

impl<'a> CutGauge<'a> {
    fn new(body: &'a Body, h: &Subspace) -> Result<Self> {
        let b = h.basis();
        Ok(match body {
            Body::Segment { .. } => {
                return Err(Error::unsupported(
                    "volume ratios need a full-dimensional body; a segment has none",
                ))
            }
            Body::PolytopeH(x) => CutGauge::Linear { f: x.a() * b, p: x.p() },
            Body::Box(x) => CutGauge::Linear {
                f: DMatrix::from_diagonal(&x.half_widths().map(|t| 1.0 / t)) * b,
                p: f64::INFINITY,
            },
            Body::LpBall { p, radius, .. } => CutGauge::Linear { f: b / *radius, p: *p },
            Body::EuclideanBall { radius, .. } => CutGauge::Scalar(1.0 / radius),
            Body::Ellipsoid(e) => CutGauge::Quadratic(b.tr_mul(&(e.shape() * b))),
            Body::PolytopeV(_) => CutGauge::Generic {
                body,
                basis: b.clone(),
            },
        })
    }

    /// Gauges of the columns of `u` (`k x N`).
    fn gauges(&self, u: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(match self {
            CutGauge::Linear { f, p } => {
                let fu = f * u;
                fu.column_iter()
                    .map(|c| lp_norm(c.as_slice(), *p))
                    .collect()
            }
            CutGauge::Quadratic(q) => {
                let qu = q * u;
                u.column_iter()
                    .zip(qu.column_iter())
                    .map(|(a, b)| a.dot(&b).max(0.0).sqrt())
                    .collect()
            }
            CutGauge::Scalar(s) => u.column_iter().map(|c| c.norm() * s).collect(),
            CutGauge::Generic { body, basis } => {
                let mut out = Vec::with_capacity(u.ncols());
                for c in u.column_iter() {
                    out.push(body.gauge(&(basis * c))?);
                }
                out
            }
        })
    }
}

/// `count` uniform points of the unit `k`-ball as columns, chunk `c` drawn from `seed.child(c)`.
pub fn unit_ball_samples(k: usize, count: usize, seed: &SeedSpec) -> DMatrix<f64> {
    let chunks = par::chunk_count(count, SAMPLE_CHUNK);
    let parts: Vec<Vec<f64>> = par::map_indexed(chunks, |c| {
        let mut rng = seed.child(c as u64).rng();
        let mut buf = Vec::with_capacity(SAMPLE_CHUNK * k);
        for _ in par::chunk_range(c, count, SAMPLE_CHUNK) {
            buf.extend_from_slice(unit_ball_point(&mut rng, k).as_slice());
        }
        buf
    });
    DMatrix::from_vec(k, count, parts.concat())
}

fn check_volume_args(body: &Body, h: &Subspace) -> Result<()> {
    Error::check_dim(body.dim(), h.ambient_dim())?;
    if h.dim() == 0 {
        return Err(Error::arg("the cut subspace must have dimension at least 1"));
    }
    if !body.is_full_dimensional() {
        return Err(Error::unsupported("volume ratios need a full-dimensional body"));
    }
    Ok(())
}

fn hits_at(gauges: &[f64], r: f64) -> usize {
    gauges.iter().filter(|&&g| r * g <= 1.0 + MEMBERSHIP_TOL).count()
}

/// `vr(X ∩ H, r)` by hit-or-miss sampling of `B^k(r)` inside `H`.
pub fn volume_ratio(body: &Body, h: &Subspace, r: f64, samples: usize, seed: &SeedSpec) -> Result<VolumeRatioEstimate> {
    check_volume_args(body, h)?;
    if !(r > 0.0) {
        return Err(Error::arg(format!("radius must be positive, got {r}")));
    }
    if samples == 0 {
        return Err(Error::arg("samples must be positive"));
    }
    let k = h.dim();
    let u = unit_ball_samples(k, samples, seed);
    let gauges = CutGauge::new(body, h)?.gauges(&u)?;
    Ok(ratio_from_hits(r, h.clone(), hits_at(&gauges, r), samples))
}

fn ratio_from_hits(r: f64, subspace: Subspace, hits: usize, samples: usize) -> VolumeRatioEstimate {
    let k = subspace.dim();
    let inv_k = 1.0 / k as f64;
    VolumeRatioEstimate {
        r,
        k,
        subspace,
        hits,
        samples,
        point_estimate: (hits as f64 / samples as f64).powf(inv_k),
        lower_conf: wilson_lower(hits, samples, Z_975).powf(inv_k),
    }
}

/// Principal `k`-dimensional cuts: directions along which the body is longest.
fn principal_cut(body: &Body, k: usize) -> Option<DMatrix<f64>> {
    let n = body.dim();
    let long_axes = |scales: &DVector<f64>| {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| scales[j].total_cmp(&scales[i]));
        order.truncate(k);
        order.sort_unstable();
        Subspace::coordinate(n, &order).basis().clone()
    };
    match body {
        Body::PolytopeH(x) => {
            let (_, vecs) = ascending_eigenvectors(&x.a().tr_mul(x.a()));
            Some(vecs.columns(0, k).into_owned())
        }
        Body::Ellipsoid(e) => Some(e.axes().columns(0, k).into_owned()),
        Body::Box(b) => Some(long_axes(b.half_widths())),
        Body::LpBall { .. } | Body::EuclideanBall { .. } => {
            Some(Subspace::coordinate(n, &(0..k).collect::<Vec<_>>()).basis().clone())
        }
        _ => None,
    }
}

/// `vr_k(X, r)`: the best cut found by search on common samples, re-estimated on fresh ones.
pub fn vr_k(body: &Body, k: usize, r: f64, budget: &VolumeBudget, seed: &SeedSpec) -> Result<VolumeRatioEstimate> {
    let n = body.dim();
    if k == 0 || k > n {
        return Err(Error::arg(format!("k must lie in 1..={n}, got {k}")));
    }
    let common = unit_ball_samples(k, budget.search_samples, &seed.child(0));
    let warm: Vec<DMatrix<f64>> = principal_cut(body, k).into_iter().collect();
    let objective = |b: &DMatrix<f64>| -> f64 {
        let h = Subspace::from_orthonormal(b.clone());
        match CutGauge::new(body, &h).and_then(|g| g.gauges(&common)) {
            Ok(g) => -(hits_at(&g, r) as f64),
            Err(_) => f64::INFINITY,
        }
    };
    check_volume_args(body, &Subspace::full(n))?;
    let out = grassmann_minimize(n, k, objective, &budget.search, &seed.child(1), &warm);
    volume_ratio(body, &Subspace::from_orthonormal(out.basis), r, budget.samples, &seed.child(2))
}

/// Certified approximation radius for one `k`.
#[derive(Debug, Clone, Serialize)]
pub struct ApproximationRadius {
    pub k: usize,
    pub c: f64,
    /// Largest `r` with Wilson-lower `vr(X ∩ H, r) >= c` on the certification sample.
    pub z: f64,
    /// The same quantity on the search sample.
    pub search_z: f64,
    #[serde(skip)]
    pub witness: Subspace,
    pub hits: usize,
    pub samples: usize,
    pub confidence: f64,
}

/// Smallest hit count whose Wilson lower bound reaches `target`, if any.
fn required_hits(samples: usize, target: f64) -> Option<usize> {
    if wilson_lower(samples, samples, Z_975) < target {
        return None;
    }
    let (mut lo, mut hi) = (0usize, samples);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if wilson_lower(mid, samples, Z_975) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo.max(1))
}

/// `1 / g_(h)`: the largest radius keeping at least `h` sample points inside the cut.
fn radius_from_gauges(mut gauges: Vec<f64>, h: Option<usize>) -> f64 {
    let Some(h) = h else { return 0.0 };
    let (_, g, _) = gauges.select_nth_unstable_by(h - 1, |a, b| a.total_cmp(b));
    if *g > 0.0 {
        1.0 / *g
    } else {
        f64::INFINITY
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::arg(format!("c must lie in (0, 1], got {c}")));
    }
    Ok(())
}

/// `z_{c,k}(X) = sup { r : vr_k(X, r) >= c }`, certified on a fresh sample.
///
/// `warm` cuts (`n x k` bases) are refined ahead of the random restarts.
pub fn approximation_radius(
    body: &Body,
    c: f64,
    k: usize,
    budget: &VolumeBudget,
    seed: &SeedSpec,
    warm: &[DMatrix<f64>],
) -> Result<ApproximationRadius> {
    check_c(c)?;
    let n = body.dim();
    if k == 0 || k > n {
        return Err(Error::arg(format!("k must lie in 1..={n}, got {k}")));
    }
    check_volume_args(body, &Subspace::full(n))?;
    let target = c.powi(k as i32);
    let search_h = required_hits(budget.search_samples, target);
    let common = unit_ball_samples(k, budget.search_samples, &seed.child(0));
    let objective = |b: &DMatrix<f64>| -> f64 {
        let h = Subspace::from_orthonormal(b.clone());
        match CutGauge::new(body, &h).and_then(|g| g.gauges(&common)) {
            Ok(g) => -radius_from_gauges(g, search_h),
            Err(_) => f64::INFINITY,
        }
    };
    let mut starts: Vec<DMatrix<f64>> = warm.to_vec();
    starts.extend(principal_cut(body, k));
    let out = grassmann_minimize(n, k, objective, &budget.search, &seed.child(1), &starts);
    let witness = Subspace::from_orthonormal(out.basis);
    let fresh = unit_ball_samples(k, budget.samples, &seed.child(2));
    let gauges = CutGauge::new(body, &witness)?.gauges(&fresh)?;
    let h = required_hits(budget.samples, target);
    let z = radius_from_gauges(gauges.clone(), h);
    Ok(ApproximationRadius {
        k,
        c,
        z,
        search_z: -out.value,
        hits: if z > 0.0 { hits_at(&gauges, z) } else { 0 },
        witness,
        samples: budget.samples,
        confidence: CONFIDENCE,
    })
}

/// Approximation radii for every `k` in `ks` (each with its own derived seed).
pub fn approximation_radii(
    body: &Body,
    c: f64,
    ks: &[usize],
    budget: &VolumeBudget,
    seed: &SeedSpec,
) -> Result<Vec<ApproximationRadius>> {
    ks.iter()
        .map(|&k| approximation_radius(body, c, k, budget, &seed.child(k as u64), &[]))
        .collect()
}

/// A certified lower bound on the minimax risk.
#[derive(Debug, Clone, Serialize)]
pub struct RiskCertificate {
    pub value: f64,
    pub sigma: f64,
    pub c_star: f64,
    pub k_witness: usize,
    pub z_witness: f64,
    #[serde(skip)]
    pub subspace_witness: Subspace,
    pub constant_c: f64,
    pub confidence: f64,
    pub samples: usize,
    /// `min(z_k^2, k sigma^2)` for each evaluated `k`.
    pub per_k: Vec<(usize, f64)>,
}

fn check_c_star(c_star: f64) -> Result<()> {
    if !(c_star > 0.0 && c_star <= 0.2) {
        return Err(Error::arg(format!("c_star must lie in (0, 0.2], got {c_star}")));
    }
    Ok(())
}

/// `C c^2 max_k min(z_k^2, k sigma^2)` from precomputed radii (ties to the smaller `k`).
pub fn lower_bound_from_radii(radii: &[ApproximationRadius], sigma: f64, c_star: f64) -> Result<RiskCertificate> {
    check_c_star(c_star)?;
    if !(sigma > 0.0) {
        return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
    }
    let first = radii.first().ok_or_else(|| Error::arg("no approximation radii supplied"))?;
    let per_k: Vec<(usize, f64)> = radii
        .iter()
        .map(|z| (z.k, (z.z * z.z).min(z.k as f64 * sigma * sigma)))
        .collect();
    let mut best = 0;
    for (i, (_, v)) in per_k.iter().enumerate() {
        if *v > per_k[best].1 {
            best = i;
        }
    }
    let w = &radii[best];
    Ok(RiskCertificate {
        value: C_LOWER * c_star * c_star * per_k[best].1,
        sigma,
        c_star,
        k_witness: w.k,
        z_witness: w.z,
        subspace_witness: w.witness.clone(),
        constant_c: C_LOWER,
        confidence: first.confidence,
        samples: first.samples,
        per_k,
    })
}

/// The minimax lower bound over `ks` (default `1..=n` when empty).
pub fn minimax_lower_bound(
    body: &Body,
    sigma: f64,
    c_star: f64,
    ks: &[usize],
    budget: &VolumeBudget,
    seed: &SeedSpec,
) -> Result<RiskCertificate> {
    check_c_star(c_star)?;
    let all: Vec<usize> = (1..=body.dim()).collect();
    let ks = if ks.is_empty() { &all[..] } else { ks };
    let radii = approximation_radii(body, c_star, ks, budget, seed)?;
    lower_bound_from_radii(&radii, sigma, c_star)
}
