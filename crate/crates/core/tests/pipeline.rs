use nalgebra::{DMatrix, DVector, SymmetricEigen};
use polywidth::duality::{
    delta_wideness, duality_check, john_duality_check, max_volume_simplex, CheckGrade, DualityContext,
};
use polywidth::estimators::{build_truncated, monte_carlo_risk, projection_risk, EstimationInstance};
use polywidth::search::SearchBudget;
use polywidth::widths::{width_profile, RadiusEvaluator, WidthMethod};
use polywidth::{Body, Ellipsoid, PolytopeH, SeedSpec, Subspace};
use proptest::prelude::*;

fn light() -> SearchBudget {
    SearchBudget::default().with_restarts(8).with_iterations(80)
}

fn spd(entries: &[f64], n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_iterator(n, n, entries.iter().copied());
    &g * g.transpose() + DMatrix::identity(n, n) * 0.05
}

#[test]
fn same_seed_same_profile() {
    let body = Body::PolytopeH(PolytopeH::random(5, 9, &SeedSpec::new(3)).unwrap());
    let run = |s| {
        let p = width_profile(&body, WidthMethod::VertexSearch, &light(), &SeedSpec::new(s)).unwrap();
        (p.values(), p.estimates.iter().map(|e| e.certificate.basis().clone()).collect::<Vec<_>>())
    };
    assert_eq!(run(11), run(11));
}

#[test]
fn profile_certificates_reproduce_values() {
    let body = Body::PolytopeH(PolytopeH::random(4, 7, &SeedSpec::new(8)).unwrap());
    let eval = RadiusEvaluator::for_body(&body).unwrap();
    let profile = width_profile(&body, WidthMethod::VertexSearch, &light(), &SeedSpec::new(1)).unwrap();
    let v = profile.values();
    assert_eq!(v.len(), 5);
    assert!(v[4].abs() < 1e-12);
    for e in &profile.estimates {
        assert_eq!(e.certificate.dim(), 4 - e.k);
        let direct = eval.eval(e.certificate.basis());
        assert!((direct - e.value).abs() <= 1e-9 * (1.0 + e.value), "k={} {direct} vs {}", e.k, e.value);
    }
    // d_0 is the circumradius, attained by the identity range.
    let r0 = body.vertices().unwrap().iter().map(|x| x.norm()).fold(0.0, f64::max);
    assert!((v[0] - r0).abs() < 1e-9);
}

#[test]
fn estimator_risk_identity_against_simulation() {
    let body = Body::Ellipsoid(Ellipsoid::from_semi_axes(&[3.0, 1.5, 0.6, 0.2, 0.05]).unwrap());
    let sigma = 0.5;
    let profile = width_profile(&body, WidthMethod::EllipsoidSpectral, &light(), &SeedSpec::new(0)).unwrap();
    let est = build_truncated(sigma, &profile).unwrap();
    // d_k^2 + k sigma^2 over k = 0..5 with d = (3, 1.5, .6, .2, .05, 0): minimum at k = 3.
    assert_eq!(est.k, 3);
    let risk = projection_risk(&body, &est.range, sigma).unwrap();
    assert!((risk.worst_bias_sq - 0.04).abs() < 1e-12);
    assert!((risk.total - (0.04 + 3.0 * 0.25)).abs() < 1e-12);
    assert!((risk.total - est.risk_bound).abs() < 1e-12);

    // At a fixed truth the expected loss is |(I - P) x|^2 + k sigma^2.
    let x = DVector::from_vec(vec![1.0, -0.5, 0.3, 0.1, 0.0]);
    let inst = EstimationInstance::new(body, sigma, Some(x.clone())).unwrap();
    let mc = monte_carlo_risk(&est, &inst, 40_000, &SeedSpec::new(2)).unwrap();
    let expected = (&x - est.range.project(&x)).norm_squared() + 3.0 * sigma * sigma;
    assert!((mc.mean - expected).abs() <= 4.0 * mc.half_width_95 / 1.96, "{} vs {expected}", mc.mean);
    assert!(mc.mean <= risk.total + mc.half_width_95);
}

#[test]
fn ellipsoid_duality_is_sharp() {
    let body = Body::Ellipsoid(Ellipsoid::from_semi_axes(&[4.0, 2.0, 1.0, 0.5, 0.25, 0.125]).unwrap());
    let ctx = DualityContext::new(&body, WidthMethod::EllipsoidSpectral, &light(), &SeedSpec::new(0)).unwrap();
    for k in 1..=6 {
        for eps in [0.25, 0.5, 0.75] {
            let r = duality_check(&ctx, k, eps, false).unwrap();
            assert!(r.pass, "k={k} eps={eps}: {} > {}", r.lhs, r.rhs);
            assert_eq!(r.grade, CheckGrade::Sharp);
        }
    }
    for k in 0..6 {
        let r = john_duality_check(&ctx, k).unwrap();
        // For an ellipsoid d_k d_{n-k-1}(X polar) = a_{k+1} / a_{k+1} = 1.
        assert!((r.lhs - 1.0).abs() < 1e-9, "k={k}: {}", r.lhs);
        assert!(r.pass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_widths_match_eigenvalues(entries in prop::collection::vec(-2.0..2.0f64, 16)) {
        // The shape matrix is the quadratic form, so semi-axes are eigenvalues^(-1/2).
        let s = spd(&entries, 4);
        let body = Body::Ellipsoid(Ellipsoid::new(s.clone()).unwrap());
        let profile = width_profile(&body, WidthMethod::EllipsoidSpectral, &light(), &SeedSpec::new(0)).unwrap();
        let mut axes: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().map(|l| l.powf(-0.5)).collect();
        axes.sort_by(|a, b| b.total_cmp(a));
        axes.push(0.0);
        let eval = RadiusEvaluator::for_body(&body).unwrap();
        for (k, e) in profile.estimates.iter().enumerate() {
            prop_assert!((e.value - axes[k]).abs() <= 1e-8 * axes[0]);
            prop_assert!((eval.eval(e.certificate.basis()) - e.value).abs() <= 1e-8 * axes[0]);
        }
    }

    #[test]
    fn search_profiles_are_monotone_and_scale(seed in 0u64..1000, c in 0.1..10.0f64) {
        let body = Body::PolytopeH(PolytopeH::random(3, 5, &SeedSpec::new(seed)).unwrap());
        let search = SearchBudget::default().with_restarts(4).with_iterations(40);
        let p = width_profile(&body, WidthMethod::VertexSearch, &search, &SeedSpec::new(seed)).unwrap();
        let v = p.values();
        for w in v.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        // Scaling the body scales rad(P_H X) for every H; the certificates of
        // the original body witness the same bound for the scaled one.
        let scaled = RadiusEvaluator::for_body(&body.scaled(c).unwrap()).unwrap();
        for e in &p.estimates {
            let r = scaled.eval(e.certificate.basis());
            prop_assert!((r - c * e.value).abs() <= 1e-9 * c * (1.0 + e.value));
        }
    }

    #[test]
    fn wideness_scales_and_ignores_rotation(
        entries in prop::collection::vec(-2.0..2.0f64, 9),
        rot in prop::collection::vec(-1.0..1.0f64, 9),
        c in 0.1..10.0f64,
    ) {
        let v: Vec<DVector<f64>> = entries.chunks(3).map(|r| DVector::from_row_slice(r)).collect();
        let d = delta_wideness(&v);
        let scaled: Vec<_> = v.iter().map(|x| x * c).collect();
        prop_assert!((delta_wideness(&scaled) - c * d).abs() <= 1e-9 * c * (1.0 + d));
        let q = Subspace::from_orthonormal(
            nalgebra::QR::new(DMatrix::from_row_slice(3, 3, &rot) + DMatrix::identity(3, 3) * 3.0).q(),
        );
        let rotated: Vec<_> = v.iter().map(|x| q.basis() * x).collect();
        prop_assert!((delta_wideness(&rotated) - d).abs() <= 1e-9 * (1.0 + d));
        // Every vector is at least delta away from the span of the rest, so
        // no vector is shorter than delta.
        for x in &v {
            prop_assert!(x.norm() + 1e-12 >= d);
        }
    }

    #[test]
    fn simplex_wideness_scales_with_body(semi in prop::collection::vec(0.2..3.0f64, 3), c in 0.2..5.0f64) {
        let body = Body::Ellipsoid(Ellipsoid::from_semi_axes(&semi).unwrap());
        let a = max_volume_simplex(&body, 3).unwrap();
        let b = max_volume_simplex(&body.scaled(c).unwrap(), 3).unwrap();
        prop_assert!((b.delta - c * a.delta).abs() <= 1e-6 * c * (1.0 + a.delta));
        let mut sorted = semi.clone();
        sorted.sort_by(|x, y| x.total_cmp(y));
        // Any three points of an ellipsoid are at most the largest semi-axis wide.
        prop_assert!(a.delta <= sorted[2] + 1e-9);
    }
}
