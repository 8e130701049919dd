//! Truncated series estimators `M(y) = P y` for the model `y = x + w`,
//! `w ~ N(0, sigma^2 I)`, with exact worst-case risk and a Monte Carlo check.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bodies::{Body, PolytopeH};
use crate::error::{Error, Result};
use crate::numerics::{gaussian_vector, SeedSpec, Subspace, Z_975};
use crate::par;
use crate::widths::{RadiusEvaluator, WidthProfile};

/// Monte Carlo trials per reduction chunk.
pub const MC_CHUNK: usize = 1024;

/// The projection estimator with the smallest width-based risk bound.
#[derive(Debug, Clone)]
pub struct TruncatedEstimator {
    pub k: usize,
    /// Rank-`k` range of the projection.
    pub range: Subspace,
    pub bias_sq: f64,
    pub variance: f64,
    pub risk_bound: f64,
    /// Whether `bias_sq` comes from an exact width.
    pub exact: bool,
}

/// Known truth for simulation.
#[derive(Debug, Clone)]
pub struct EstimationInstance {
    pub body: Body,
    pub sigma: f64,
    pub truth: Option<DVector<f64>>,
}

impl EstimationInstance {
    pub fn new(body: Body, sigma: f64, truth: Option<DVector<f64>>) -> Result<Self> {
        check_sigma(sigma)?;
        if let Some(x) = &truth {
            if !body.membership(x)? {
                return Err(Error::arg("truth vector lies outside the body"));
            }
        }
        Ok(EstimationInstance { body, sigma, truth })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionRisk {
    pub worst_bias_sq: f64,
    pub variance: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloRisk {
    pub mean: f64,
    pub half_width_95: f64,
    pub trials: usize,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::arg(format!("sigma must be positive and finite, got {sigma}")));
    }
    Ok(())
}

/// Picks `k` minimizing `d_k^2 + k sigma^2` (ties to the smaller `k`).
pub fn build_truncated(sigma: f64, profile: &WidthProfile) -> Result<TruncatedEstimator> {
    check_sigma(sigma)?;
    let mut best: Option<(usize, f64)> = None;
    for est in &profile.estimates {
        let risk = est.value * est.value + est.k as f64 * sigma * sigma;
        if best.map_or(true, |(_, r)| risk < r) {
            best = Some((est.k, risk));
        }
    }
    let (k, _) = best.ok_or_else(|| Error::arg("empty width profile"))?;
    let est = &profile.estimates[k];
    let bias_sq = est.value * est.value;
    let variance = k as f64 * sigma * sigma;
    Ok(TruncatedEstimator {
        k,
        range: est.certificate.complement(),
        bias_sq,
        variance,
        risk_bound: bias_sq + variance,
        exact: est.exact,
    })
}

/// Orthogonal projection of `y` onto the estimator's range.
pub fn apply_estimator(est: &TruncatedEstimator, y: &DVector<f64>) -> Result<DVector<f64>> {
    Error::check_dim(est.range.ambient_dim(), y.len())?;
    Ok(est.range.project(y))
}

/// Exact worst-case risk `max_x |(I - P) x|^2 + k sigma^2` of projecting onto `range`.
pub fn projection_risk(body: &Body, range: &Subspace, sigma: f64) -> Result<ProjectionRisk> {
    check_sigma(sigma)?;
    Error::check_dim(body.dim(), range.ambient_dim())?;
    let eval = match body {
        Body::PolytopeH(_) | Body::LpBall { .. } if !body.has_vertices() => {
            return Err(Error::unsupported(format!(
                "exact worst-case bias needs enumerable vertices for this {} body; use monte_carlo_risk at a fixed truth",
                body.kind()
            )))
        }
        _ => RadiusEvaluator::for_body(body).map_err(|e| match e {
            Error::Unsupported(msg) => Error::unsupported(format!(
                "{msg}; use monte_carlo_risk at a fixed truth"
            )),
            other => other,
        })?,
    };
    let residual = range.complement();
    let bias = eval.eval(residual.basis());
    let worst_bias_sq = bias * bias;
    let variance = range.dim() as f64 * sigma * sigma;
    Ok(ProjectionRisk {
        worst_bias_sq,
        variance,
        total: worst_bias_sq + variance,
    })
}

/// Simulated `E |x - P(x + w)|^2` at the instance's truth.
///
/// Trials run in chunks of `MC_CHUNK`; chunk `c` draws from `seed.child(c)`
/// and chunk sums are added in chunk order.
pub fn monte_carlo_risk(
    est: &TruncatedEstimator,
    instance: &EstimationInstance,
    trials: usize,
    seed: &SeedSpec,
) -> Result<MonteCarloRisk> {
    let x = instance
        .truth
        .as_ref()
        .ok_or_else(|| Error::arg("monte_carlo_risk needs a truth vector"))?;
    if trials < 100 {
        return Err(Error::arg(format!("trials must be at least 100, got {trials}")));
    }
    Error::check_dim(est.range.ambient_dim(), x.len())?;
    let n = x.len();
    let sigma = instance.sigma;
    let chunks = par::chunk_count(trials, MC_CHUNK);
    let sums: Vec<(f64, f64)> = par::map_indexed(chunks, |c| {
        let mut rng = seed.child(c as u64).rng();
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in par::chunk_range(c, trials, MC_CHUNK) {
            let y = x + gaussian_vector(&mut rng, n) * sigma;
            let loss = (x - est.range.project(&y)).norm_squared();
            s += loss;
            s2 += loss * loss;
        }
        (s, s2)
    });
    let (s, s2) = sums
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let t = trials as f64;
    let mean = s / t;
    let var = ((s2 / t - mean * mean) * t / (t - 1.0)).max(0.0);
    Ok(MonteCarloRisk {
        mean,
        half_width_95: Z_975 * (var / t).sqrt(),
        trials,
    })
}

/// Default bound on `|x_1|` for the Lipschitz polytope: `10 L (t_n - t_1)`.
pub fn default_lipschitz_bound(t: &[f64], lipschitz: f64) -> f64 {
    10.0 * lipschitz * (t[t.len() - 1] - t[0])
}

/// `{x : |x_{i+1} - x_i| <= L (t_{i+1} - t_i), |x_1| <= bound}` as `|A x|_inf <= 1`.
pub fn lipschitz_polytope(t: &[f64], lipschitz: f64, bound: f64) -> Result<PolytopeH> {
    let n = t.len();
    if n < 2 {
        return Err(Error::arg("the Lipschitz grid needs at least two points"));
    }
    if !(lipschitz > 0.0) || !(bound > 0.0) {
        return Err(Error::arg("Lipschitz constant and bound must be positive"));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("grid t must be strictly increasing"));
    }
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        let scale = 1.0 / (lipschitz * (t[i + 1] - t[i]));
        a[(i, i)] = -scale;
        a[(i, i + 1)] = scale;
    }
    a[(n - 1, 0)] = 1.0 / bound;
    PolytopeH::new(a, f64::INFINITY)
}

/// `n` equispaced points on `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Minimax risk of a symmetric segment of half-length `rad`: `sigma^2 rad^2 / (sigma^2 + rad^2)`.
pub fn segment_minimax_risk(rad: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(rad > 0.0) {
        return Err(Error::arg(format!("segment radius must be positive, got {rad}")));
    }
    let (s2, r2) = (sigma * sigma, rad * rad);
    Ok(s2 * r2 / (s2 + r2))
}
