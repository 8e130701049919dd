use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `vol(B_p^k) = 2^k Gamma(1 + 1/p)^k / Gamma(k/p + 1)`, via log-Gamma.
pub fn lp_ball_volume(k: usize, p: f64) -> Result<f64> {
    if k == 0 || !(p >= 1.0) {
        return Err(Error::arg(format!("need k >= 1 and p >= 1, got k={k}, p={p}")));
    }
    let kf = k as f64;
    if p.is_infinite() {
        return Ok(2f64.powi(k as i32));
    }
    Ok((kf * 2f64.ln() + kf * ln_gamma(1.0 + 1.0 / p) - ln_gamma(kf / p + 1.0)).exp())
}

/// `vol(B_2^k(r))`.
pub fn euclidean_ball_volume(k: usize, r: f64) -> f64 {
    let kf = k as f64;
    (0.5 * kf * std::f64::consts::PI.ln() + kf * r.ln() - ln_gamma(0.5 * kf + 1.0)).exp()
}

/// Upper bound `(vol B_p^k / vol B_2^k)^{1/k} / r` on the volume ratio of any
/// `k`-dimensional central cut of `B_p^n` at radius `r`, for `p` in `[1, 2]`.
pub fn lp_vr_upper(k: usize, p: f64, r: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::arg(format!("lp_vr_upper needs p in [1, 2], got {p}")));
    }
    if !(r > 0.0) {
        return Err(Error::arg(format!("radius must be positive, got {r}")));
    }
    let ratio = lp_ball_volume(k, p)? / lp_ball_volume(k, 2.0)?;
    Ok(ratio.powf(1.0 / k as f64) / r)
}

/// `C_p = k^{1/p} vol(B_p^k)^{1/k}` at the given `k`.
pub fn lp_volume_constant(k: usize, p: f64) -> Result<f64> {
    let kf = k as f64;
    Ok(kf.powf(1.0 / p) * lp_ball_volume(k, p)?.powf(1.0 / kf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn volume_examples() {
        assert_relative_eq!(lp_ball_volume(2, 2.0).unwrap(), std::f64::consts::PI, max_relative = 1e-12);
        assert_relative_eq!(lp_ball_volume(2, 1.0).unwrap(), 2.0, max_relative = 1e-12);
        for p in [1.0, 1.5, 3.0, 7.0] {
            assert_relative_eq!(lp_ball_volume(1, p).unwrap(), 2.0, max_relative = 1e-12);
        }
        assert_relative_eq!(lp_ball_volume(3, 2.0).unwrap(), 4.0 / 3.0 * std::f64::consts::PI, max_relative = 1e-12);
        assert_relative_eq!(lp_ball_volume(3, 1.0).unwrap(), 8.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(euclidean_ball_volume(2, 2.0), 4.0 * std::f64::consts::PI, max_relative = 1e-12);
    }

    #[test]
    fn vr_upper_examples() {
        for k in 1..6 {
            assert_relative_eq!(lp_vr_upper(k, 2.0, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        }
        assert_relative_eq!(
            lp_vr_upper(2, 1.0, 1.0).unwrap(),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
        assert!(lp_vr_upper(3, 1.5, 2.0).unwrap() < lp_vr_upper(3, 1.5, 1.0).unwrap());
        assert!(lp_vr_upper(2, 2.5, 1.0).is_err());
        let c1 = lp_volume_constant(2, 1.0).unwrap();
        let c2 = lp_volume_constant(2, 2.0).unwrap();
        assert_relative_eq!(c1 / c2 * 2f64.powf(0.5 - 1.0), lp_vr_upper(2, 1.0, 1.0).unwrap(), max_relative = 1e-12);
    }
}
