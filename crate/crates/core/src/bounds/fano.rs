use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use super::lp::euclidean_ball_volume;
use crate::bodies::Body;
use crate::error::{Error, Result};
use crate::numerics::SeedSpec;

/// Rejection-sampling attempts allowed per requested probe.
const REJECTION_FACTOR: usize = 2000;

/// `(delta/2)^2 (1 - (log2 |N| + eps^2/(2 sigma^2) + 1) / log2 |M|)`, clamped at 0.
pub fn fano_bound(net_size: u64, packing_size: u64, delta: f64, epsilon: f64, sigma: f64) -> Result<f64> {
    if packing_size < 2 {
        return Err(Error::arg(format!(
            "packing size must be at least 2 (log of {packing_size} vanishes)"
        )));
    }
    if net_size < 1 || !(sigma > 0.0) || delta < 0.0 || epsilon < 0.0 {
        return Err(Error::arg("fano_bound needs net_size >= 1, sigma > 0, delta, epsilon >= 0"));
    }
    let numer = (net_size as f64).log2() + epsilon * epsilon / (2.0 * sigma * sigma) + 1.0;
    let bracket = 1.0 - numer / (packing_size as f64).log2();
    Ok(0.25 * delta * delta * bracket.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSetKind {
    Net,
    Packing,
}

/// A net (every probe within `parameter`) or a packing (pairwise distances above `parameter`).
#[derive(Debug, Clone, Serialize)]
pub struct PointSet {
    pub kind: PointSetKind,
    pub parameter: f64,
    #[serde(skip)]
    pub points: Vec<DVector<f64>>,
    pub size: usize,
    pub probes: usize,
    /// Net: `(3 rad / eps)^n`. Packing: Monte Carlo `vol(X) / vol(B(delta))`.
    pub reference_bound: f64,
    pub within_bound: bool,
}

/// Uniform points of the body by rejection from its bounding box, with the acceptance rate.
pub fn probe_cloud(body: &Body, count: usize, seed: &SeedSpec) -> Result<(Vec<DVector<f64>>, f64)> {
    if !body.is_full_dimensional() {
        return Err(Error::unsupported("probe clouds need a full-dimensional body"));
    }
    let half = body.bounding_half_widths()?;
    let n = body.dim();
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let cap = count.saturating_mul(REJECTION_FACTOR).max(REJECTION_FACTOR);
    while out.len() < count {
        if attempts >= cap {
            return Err(Error::Resource {
                guard: "rejection_sampling",
                detail: format!("{attempts} box draws produced {} of {count} probes", out.len()),
            });
        }
        attempts += 1;
        let x = DVector::from_fn(n, |i, _| half[i] * rng.random_range(-1.0..=1.0));
        if body.membership(&x)? {
            out.push(x);
        }
    }
    Ok((out, count as f64 / attempts as f64))
}

/// Farthest-point greedy `eps`-net over a probe cloud of the body.
pub fn greedy_net(body: &Body, epsilon: f64, probe_count: usize, seed: &SeedSpec) -> Result<PointSet> {
    let rad = body.radius_upper_bound()?;
    if !(epsilon > 0.0) || epsilon > body.radius()? {
        return Err(Error::arg(format!("epsilon must lie in (0, rad(X)] = (0, {rad}], got {epsilon}")));
    }
    let (probes, _) = probe_cloud(body, probe_count, seed)?;
    let mut points: Vec<DVector<f64>> = Vec::new();
    let mut gap = vec![f64::INFINITY; probes.len()];
    let mut next = 0;
    loop {
        let p = probes[next].clone();
        for (g, q) in gap.iter_mut().zip(&probes) {
            *g = g.min((q - &p).norm());
        }
        points.push(p);
        let (idx, far) = gap
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        if far <= epsilon {
            break;
        }
        next = idx;
    }
    let bound = (3.0 * body.radius()? / epsilon).powi(body.dim() as i32);
    let size = points.len();
    Ok(PointSet {
        kind: PointSetKind::Net,
        parameter: epsilon,
        points,
        size,
        probes: probe_count,
        reference_bound: bound,
        within_bound: size as f64 <= bound,
    })
}

/// Maximal `delta`-packing (pairwise distance `> delta`) over a probe cloud.
pub fn greedy_packing(body: &Body, delta: f64, probe_count: usize, seed: &SeedSpec) -> Result<PointSet> {
    if !(delta > 0.0) {
        return Err(Error::arg(format!("delta must be positive, got {delta}")));
    }
    let (probes, acceptance) = probe_cloud(body, probe_count, seed)?;
    let mut points: Vec<DVector<f64>> = Vec::new();
    for p in probes {
        if points.iter().all(|q| (q - &p).norm() > delta) {
            points.push(p);
        }
    }
    let half = body.bounding_half_widths()?;
    let box_volume: f64 = half.iter().map(|h| 2.0 * h).product();
    let bound = acceptance * box_volume / euclidean_ball_volume(body.dim(), delta);
    let size = points.len();
    Ok(PointSet {
        kind: PointSetKind::Packing,
        parameter: delta,
        points,
        size,
        probes: probe_count,
        reference_bound: bound,
        within_bound: size as f64 >= bound,
    })
}

/// Smallest pairwise distance of a point set (`inf` for fewer than two points).
pub fn min_pairwise_distance(points: &[DVector<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.min((&points[i] - &points[j]).norm());
        }
    }
    best
}

/// Box bound `sum tau_i^2 sigma^2 / (tau_i^2 + sigma^2)` with the greedy group count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxBound {
    pub bound: f64,
    /// All groups, the last one possibly incomplete.
    pub groups: usize,
    /// Groups whose `sum min(tau^2, sigma^2)` reaches `sigma^2`.
    pub complete_groups: usize,
}

pub fn box_lower_bound(tau: &[f64], sigma: f64) -> Result<BoxBound> {
    if tau.is_empty() || tau.iter().any(|t| !(*t > 0.0)) || !(sigma > 0.0) {
        return Err(Error::arg("box bound needs non-empty positive tau and sigma > 0"));
    }
    let s2 = sigma * sigma;
    let bound = tau.iter().map(|t| t * t * s2 / (t * t + s2)).sum();
    let (mut complete, mut acc, mut open) = (0, 0.0, false);
    for t in tau {
        acc += (t * t).min(s2);
        open = true;
        if acc >= s2 {
            complete += 1;
            acc = 0.0;
            open = false;
        }
    }
    Ok(BoxBound {
        bound,
        groups: complete + usize::from(open),
        complete_groups: complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::BoxBody;
    use crate::estimators::segment_minimax_risk;
    use approx::assert_relative_eq;

    #[test]
    fn fano_examples() {
        assert_relative_eq!(fano_bound(1, 16, 1.0, 0.0, 1.0).unwrap(), 0.1875, epsilon = 1e-15);
        assert!(fano_bound(1, 1, 1.0, 0.0, 1.0).is_err());
        for (n, m) in [(1u64, 2u64), (4, 1000), (100, 3)] {
            assert!(fano_bound(n, m, 2.0, 0.5, 1.0).unwrap() <= 1.0);
        }
    }

    #[test]
    fn fano_reproduces_constant() {
        // eps = r, delta = c r / a, |N| = 3^k, |M| = ceil(a^k) with r^2 = k sigma^2.
        let a = super::super::constants::fano_argmax_numeric(2.0);
        let c = 0.2;
        for k in 1..=4u32 {
            let sigma = 1.0;
            let r = (k as f64).sqrt() * sigma;
            let m = a.powi(k as i32).ceil() as u64;
            let b = fano_bound(3u64.pow(k), m, c * r / a, r, sigma).unwrap();
            let derived = super::super::constants::fano_objective(a, 2.0) * c * c * r * r;
            assert!(b >= derived, "k={k}: {b} vs {derived}");
        }
    }

    #[test]
    fn fano_monotone() {
        let mut prev = -1.0;
        for m in [2u64, 4, 16, 256, 65536] {
            let v = fano_bound(2, m, 1.0, 0.1, 1.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for n in [1u64, 2, 4, 8] {
            let v = fano_bound(n, 1 << 20, 1.0, 0.1, 1.0).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn net_on_disc() {
        let ball = Body::ball(2, 1.0).unwrap();
        let net = greedy_net(&ball, 1.0, 20_000, &SeedSpec::new(1)).unwrap();
        assert!(net.size <= 9 && net.within_bound);
        assert!(greedy_net(&ball, 2.0, 100, &SeedSpec::new(1)).is_err());
        // Coverage on fresh probes.
        let (fresh, _) = probe_cloud(&ball, 5000, &SeedSpec::new(99)).unwrap();
        let missed = fresh
            .iter()
            .filter(|p| net.points.iter().all(|q| (*p - q).norm() > 1.0))
            .count();
        assert!((missed as f64) < 0.01 * 5000.0);
    }

    #[test]
    fn packing_examples() {
        let ball = Body::ball(2, 1.0).unwrap();
        assert_eq!(greedy_packing(&ball, 2.0, 2000, &SeedSpec::new(2)).unwrap().size, 1);
        let cube = Body::cube(2);
        let pk = greedy_packing(&cube, 0.5, 20_000, &SeedSpec::new(3)).unwrap();
        assert!(pk.size >= 5);
        assert!(min_pairwise_distance(&pk.points) > 0.5);
    }

    #[test]
    fn box_examples() {
        let sigma = 0.7;
        let b = box_lower_bound(&[sigma; 5], sigma).unwrap();
        assert_relative_eq!(b.bound, 5.0 * sigma * sigma / 2.0, max_relative = 1e-12);
        assert_eq!(b.groups, 5);
        let b = box_lower_bound(&[10.0, 0.1], 1.0).unwrap();
        assert_relative_eq!(b.bound, 100.0 / 101.0 + 0.01 / 1.01, max_relative = 1e-12);
        let b = box_lower_bound(&[0.4], 1.3).unwrap();
        assert_eq!(b.groups, 1);
        assert_relative_eq!(b.bound, segment_minimax_risk(0.4, 1.3).unwrap(), max_relative = 1e-12);
        let b = box_lower_bound(&[0.5, 0.5, 0.5, 0.5, 0.5], 1.0).unwrap();
        assert_eq!((b.complete_groups, b.groups), (1, 2));
    }

    #[test]
    fn probe_cloud_stays_inside() {
        let body = Body::Box(BoxBody::new(DVector::from_vec(vec![1.0, 3.0])).unwrap());
        let (probes, acc) = probe_cloud(&body, 500, &SeedSpec::new(5)).unwrap();
        assert_eq!(acc, 1.0);
        assert!(probes.iter().all(|p| body.membership(p).unwrap()));
    }
}
