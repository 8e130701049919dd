//! The constant chain of the minimax lower bound and the optimality ratio.
//!
//! The Fano step yields `R >= C c^2 r^2` with
//! `C = max_a (1/4) a^{-2} (1 - (log 3 + 3/2) / log a)`, logarithms in base 2.

use serde::Serialize;

/// Lower-bound constant used in every certificate (rounded down from the derived maximum).
pub const C_LOWER: f64 = 2.46e-4;
/// Reference value of `M_{0.2}`.
pub const M_REFERENCE: f64 = 2.0e8;

/// `c_1 = 2 / (sqrt 2 - 1)`.
pub fn c1() -> f64 {
    2.0 / (std::f64::consts::SQRT_2 - 1.0)
}

/// `c_2(c) = 0.4 sqrt(ln(1 / (2c)))` for `c < 1/2`.
pub fn c2(c_star: f64) -> f64 {
    0.4 * (1.0 / (2.0 * c_star)).ln().sqrt()
}

/// `c = (sqrt 2 - 1) / 2` in the restricted-invertibility estimate.
pub fn restricted_invertibility_c() -> f64 {
    (std::f64::consts::SQRT_2 - 1.0) / 2.0
}

/// `M_c = 12 / (C c^2) max(c_1^2 / c_2^2, 1)`.
pub fn m_constant(c_star: f64) -> f64 {
    let ratio = (c1() * c1()) / (c2(c_star) * c2(c_star));
    12.0 / (C_LOWER * c_star * c_star) * ratio.max(1.0)
}

/// `K = log_b 3 + 3/2`, the per-dimension numerator of the Fano ratio.
fn fano_numerator(base: f64) -> f64 {
    3f64.ln() / base.ln() + 1.5
}

/// `(1/4) a^{-2} (1 - K / log_b a)`.
pub fn fano_objective(a: f64, base: f64) -> f64 {
    0.25 / (a * a) * (1.0 - fano_numerator(base) / (a.ln() / base.ln()))
}

/// Stationary point of `fano_objective` in closed form: with `L = log_b a`,
/// `2 L^2 - 2 K L - K / ln b = 0`.
pub fn fano_argmax_closed_form(base: f64) -> f64 {
    let k = fano_numerator(base);
    let l = (2.0 * k + (4.0 * k * k + 8.0 * k / base.ln()).sqrt()) / 4.0;
    base.powf(l)
}

/// Numerical maximizer by golden-section search on `ln a`.
pub fn fano_argmax_numeric(base: f64) -> f64 {
    let k = fano_numerator(base);
    // The objective is positive only for log_b a > K.
    let mut lo = k * base.ln() + 1e-9;
    let mut hi = lo + 20.0;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |t: f64| fano_objective(t.exp(), base);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantChain {
    pub log_base: f64,
    pub a_numeric: f64,
    pub a_closed_form: f64,
    pub c_derived: f64,
    pub c_used: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_star: f64,
    pub m_c_star: f64,
    pub m_reference: f64,
}

/// Re-derives `a`, `C`, `c_1`, `c_2(c_star)` and `M_{c_star}`.
pub fn constant_chain(c_star: f64, log_base: f64) -> ConstantChain {
    let a_numeric = fano_argmax_numeric(log_base);
    ConstantChain {
        log_base,
        a_numeric,
        a_closed_form: fano_argmax_closed_form(log_base),
        c_derived: fano_objective(a_numeric, log_base),
        c_used: C_LOWER,
        c1: c1(),
        c2: c2(c_star),
        c_star,
        m_c_star: m_constant(c_star),
        m_reference: M_REFERENCE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_two_reproduces_published_constants() {
        let ch = constant_chain(0.2, 2.0);
        assert!(((ch.a_numeric - ch.a_closed_form) / ch.a_closed_form).abs() < 1e-6);
        assert!((ch.a_numeric - 12.89).abs() < 0.005, "{}", ch.a_numeric);
        assert!((ch.c_derived - 2.46e-4).abs() < 0.005e-4, "{}", ch.c_derived);
        assert!(ch.c_derived >= C_LOWER);
    }

    #[test]
    fn closed_form_is_a_maximum() {
        for base in [2.0, std::f64::consts::E, 10.0] {
            let a = fano_argmax_closed_form(base);
            let f = fano_objective(a, base);
            for da in [-1e-3, 1e-3] {
                assert!(fano_objective(a * (1.0 + da), base) < f);
            }
        }
    }

    #[test]
    fn named_constants() {
        assert!((c1() - 4.828_427_124_746_19).abs() < 1e-12);
        assert!((c2(0.2) - 0.4 * 2.5f64.ln().sqrt()).abs() < 1e-15);
        assert!((c2(0.2) - 0.382_892).abs() < 1e-6);
        assert!(m_constant(0.2) < M_REFERENCE);
        assert!((restricted_invertibility_c() - 0.207_106_781).abs() < 1e-9);
    }
}
