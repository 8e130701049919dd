use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::lp::euclidean_ball_volume;
use crate::error::{Error, Result};
use crate::numerics::{gaussian_vector, SeedSpec};
use crate::par;

const FACT_CHUNK: usize = 8192;

/// Gaussian mass of the ball of radius `r = sqrt(2k ln(1/(2c)))` and its two lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareFacts {
    pub k: usize,
    pub c_star: f64,
    pub r: f64,
    pub samples: usize,
    pub mu1_mc: f64,
    pub mu1_std_error: f64,
    /// `P(chi^2_k <= r^2)` from the chi-square distribution function.
    pub mu1_exact: f64,
    /// `(2 pi)^{-k/2} e^{-r^2/2} vol(B_2^k(r))`.
    pub part_a_lower: f64,
    /// `1 - 2c sqrt(2e ln(1/(2c)))`.
    pub part_b_lower: f64,
    pub part_a_holds: bool,
    pub part_b_holds: bool,
    pub part_b_above_tenth: bool,
}

pub fn part_b_lower(c_star: f64) -> f64 {
    let l = (1.0 / (2.0 * c_star)).ln();
    1.0 - 2.0 * c_star * (2.0 * std::f64::consts::E * l).sqrt()
}

pub fn part_a_lower(k: usize, r: f64) -> f64 {
    let kf = k as f64;
    (2.0 * std::f64::consts::PI).powf(-0.5 * kf) * (-0.5 * r * r).exp() * euclidean_ball_volume(k, r)
}

/// Monte Carlo estimate of `mu_1 = P(|g| <= r)` for `g ~ N(0, I_k)` with both lower bounds.
///
/// A part holds when `mu1_mc >= bound - 3 standard errors`.
pub fn chi_square_facts(k: usize, c_star: f64, samples: usize, seed: &SeedSpec) -> Result<ChiSquareFacts> {
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if !(c_star > 0.0 && c_star <= 0.2) {
        return Err(Error::arg(format!("c_star must lie in (0, 0.2], got {c_star}")));
    }
    if samples == 0 {
        return Err(Error::arg("samples must be positive"));
    }
    let r = (2.0 * k as f64 * (1.0 / (2.0 * c_star)).ln()).sqrt();
    let r2 = r * r;
    let chunks = par::chunk_count(samples, FACT_CHUNK);
    let hits: usize = par::map_indexed(chunks, |c| {
        let mut rng = seed.child(c as u64).rng();
        par::chunk_range(c, samples, FACT_CHUNK)
            .filter(|_| gaussian_vector(&mut rng, k).norm_squared() <= r2)
            .count()
    })
    .into_iter()
    .sum();
    let n = samples as f64;
    let mu1_mc = hits as f64 / n;
    let se = (mu1_mc * (1.0 - mu1_mc) / n).sqrt();
    let mu1_exact = ChiSquared::new(k as f64)
        .map_err(|e| Error::arg(e.to_string()))?
        .cdf(r2);
    let a = part_a_lower(k, r);
    let b = part_b_lower(c_star);
    Ok(ChiSquareFacts {
        k,
        c_star,
        r,
        samples,
        mu1_mc,
        mu1_std_error: se,
        mu1_exact,
        part_a_lower: a,
        part_b_lower: b,
        part_a_holds: mu1_mc >= a - 3.0 * se,
        part_b_holds: mu1_mc >= b - 3.0 * se,
        part_b_above_tenth: b >= 0.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let f = chi_square_facts(1, 0.2, 200_000, &SeedSpec::new(1)).unwrap();
        assert!((f.r - (2.0 * 2.5f64.ln()).sqrt()).abs() < 1e-12);
        assert!((f.r - 1.353_73).abs() < 1e-5);
        assert!((f.part_b_lower - 0.107_231).abs() < 1e-6);
        assert!((f.mu1_mc - f.mu1_exact).abs() < 4.0 * f.mu1_std_error);
        assert!((f.mu1_exact - 0.824).abs() < 0.001);
        assert!(f.part_a_holds && f.part_b_holds && f.part_b_above_tenth);
    }

    #[test]
    fn part_a_below_exact_mass() {
        // Oracle: the chi-square CDF dominates the analytic lower bound.
        for k in 1..=10 {
            let r = (2.0 * k as f64 * 2.5f64.ln()).sqrt();
            let exact = ChiSquared::new(k as f64).unwrap().cdf(r * r);
            assert!(part_a_lower(k, r) <= exact);
        }
    }

    #[test]
    fn part_b_decreases_toward_boundary() {
        let grid: Vec<f64> = (1..=20).map(|i| 0.01 * i as f64).collect();
        for w in grid.windows(2) {
            assert!(part_b_lower(w[1]) < part_b_lower(w[0]));
        }
        assert!(part_b_lower(0.2) >= 0.1 && part_b_lower(0.2) - 0.1 < 0.01);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(chi_square_facts(1, 0.3, 10, &SeedSpec::new(0)).is_err());
        assert!(chi_square_facts(0, 0.1, 10, &SeedSpec::new(0)).is_err());
    }
}
