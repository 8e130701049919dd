use nalgebra::{DMatrix, DVector};

use super::{Body, PolytopeH};
use crate::error::{Error, Result};
use crate::numerics::{binomial, combinations, numerical_rank};
use crate::par;

/// Largest dimension for general H-polytope vertex enumeration.
pub const VERTEX_DIM_GUARD: usize = 12;
/// Largest dimension for sign-vector enumeration of parallelotopes and cubes.
pub const VERTEX_PARALLELOTOPE_GUARD: usize = 20;
/// Cap on `C(m, n) * 2^n` linear solves in the general enumerator.
const SOLVE_BUDGET: f64 = 2.0e7;
/// Vertices closer than this are merged.
pub(crate) const DEDUP_TOL: f64 = 1e-8;
const FEASIBILITY_TOL: f64 = 1e-9;

pub(crate) fn polytope_h_enumerable(b: &PolytopeH) -> bool {
    let (m, n) = (b.m(), b.n());
    if m == n {
        return n <= VERTEX_PARALLELOTOPE_GUARD;
    }
    n <= VERTEX_DIM_GUARD && binomial(m, n) * 2f64.powi(n as i32) <= SOLVE_BUDGET
}

pub(crate) fn vertex_matrix(body: &Body) -> Result<DMatrix<f64>> {
    match body {
        Body::PolytopeH(b) if b.p().is_infinite() => polytope_h_vertices(b),
        Body::PolytopeH(b) if b.p() == 1.0 && b.m() == b.n() => {
            // {|Ax|_1 <= 1} = A^{-1} B_1^n: vertices are +- columns of A^{-1}.
            let inv = b
                .a()
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Solver("constraint matrix is singular".into()))?;
            Ok(signed_rows(&inv.transpose()))
        }
        Body::PolytopeH(b) => Err(Error::unsupported(format!(
            "vertex enumeration for an H-polytope with p = {} and {} rows",
            b.p(),
            b.m()
        ))),
        // Every vertex of conv{+-g_i} is some +-g_i; interior generators are kept.
        Body::PolytopeV(b) => Ok(signed_rows(b.generators())),
        Body::Segment { endpoint } => Ok(signed_rows(&DMatrix::from_row_slice(
            1,
            endpoint.len(),
            endpoint.as_slice(),
        ))),
        Body::Box(b) => sign_corners(b.half_widths()),
        Body::LpBall { p, radius, n } if *p == 1.0 => {
            Ok(signed_rows(&(DMatrix::identity(*n, *n) * *radius)))
        }
        Body::LpBall { p, radius, n } if p.is_infinite() => {
            sign_corners(&DVector::from_element(*n, *radius))
        }
        _ => Err(Error::unsupported(format!(
            "a {} body has infinitely many extreme points",
            body.kind()
        ))),
    }
}

fn signed_rows(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = rows.shape();
    DMatrix::from_fn(2 * m, n, |r, c| {
        if r < m {
            rows[(r, c)]
        } else {
            -rows[(r - m, c)]
        }
    })
}

fn sign_corners(half_widths: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = half_widths.len();
    guard_parallelotope(n)?;
    Ok(DMatrix::from_fn(1 << n, n, |r, c| {
        if (r >> c) & 1 == 0 {
            half_widths[c]
        } else {
            -half_widths[c]
        }
    }))
}

fn guard_parallelotope(n: usize) -> Result<()> {
    if n > VERTEX_PARALLELOTOPE_GUARD {
        return Err(Error::Resource {
            guard: "vertex_enumeration_dim",
            detail: format!("2^{n} sign vectors exceed the n <= {VERTEX_PARALLELOTOPE_GUARD} guard"),
        });
    }
    Ok(())
}

fn polytope_h_vertices(b: &PolytopeH) -> Result<DMatrix<f64>> {
    let (m, n) = (b.m(), b.n());
    let a = b.a();
    if m == n {
        // Parallelotope: A invertible, vertices A^{-1} s for every sign vector s.
        guard_parallelotope(n)?;
        let inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Solver("constraint matrix is singular".into()))?;
        let signs = sign_corners(&DVector::from_element(n, 1.0))?;
        return Ok(signs * inv.transpose());
    }
    if n > VERTEX_DIM_GUARD {
        return Err(Error::Resource {
            guard: "vertex_enumeration_dim",
            detail: format!("n = {n} exceeds the n <= {VERTEX_DIM_GUARD} guard"),
        });
    }
    let solves = binomial(m, n) * 2f64.powi(n as i32);
    if solves > SOLVE_BUDGET {
        return Err(Error::Resource {
            guard: "vertex_enumeration_count",
            detail: format!("C({m},{n}) * 2^{n} = {solves:.3e} linear solves exceeds {SOLVE_BUDGET:e}"),
        });
    }
    let subsets = combinations(m, n);
    let per_subset: Vec<Vec<DVector<f64>>> = par::map_slice(&subsets, |rows| {
        let sub = a.select_rows(rows.iter());
        if numerical_rank(&sub) < n {
            return Vec::new();
        }
        let lu = sub.lu();
        let mut found = Vec::new();
        // Fix the sign of the first row; the opposite sign yields the negated vertex.
        for mask in 0..(1usize << (n - 1)) {
            let s = DVector::from_fn(n, |i, _| {
                if i > 0 && (mask >> (i - 1)) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            });
            let Some(x) = lu.solve(&s) else { continue };
            if (a * &x).amax() <= 1.0 + FEASIBILITY_TOL {
                found.push(-&x);
                found.push(x);
            }
        }
        found
    });
    let merged = dedup(per_subset.into_iter().flatten().collect());
    let mut out = DMatrix::zeros(merged.len(), n);
    for (i, v) in merged.iter().enumerate() {
        out.set_row(i, &v.transpose());
    }
    Ok(out)
}

/// Merges points within `DEDUP_TOL` of each other (sweep over the first coordinate).
pub(crate) fn dedup(mut pts: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    pts.sort_by(|x, y| x[0].total_cmp(&y[0]));
    let mut keep: Vec<DVector<f64>> = Vec::with_capacity(pts.len());
    let mut window_start = 0;
    for p in pts {
        while window_start < keep.len() && p[0] - keep[window_start][0] > DEDUP_TOL {
            window_start += 1;
        }
        if !keep[window_start..].iter().any(|q| (q - &p).norm() < DEDUP_TOL) {
            keep.push(p);
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_matrix, SeedSpec};

    fn verts(a: DMatrix<f64>) -> DMatrix<f64> {
        Body::PolytopeH(PolytopeH::new(a, f64::INFINITY).unwrap())
            .vertex_matrix()
            .unwrap()
    }

    #[test]
    fn square_and_cube() {
        let v2 = verts(DMatrix::identity(2, 2));
        assert_eq!(v2.nrows(), 4);
        assert!(v2.iter().all(|x| (x.abs() - 1.0).abs() < 1e-15));
        assert_eq!(verts(DMatrix::identity(3, 3)).nrows(), 8);
    }

    #[test]
    fn redundant_rows_do_not_duplicate() {
        // Cube with the two facets listed twice and a redundant diagonal row.
        let a = DMatrix::from_row_slice(
            5,
            2,
            &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, -0.0, 1.0, 0.25, 0.25],
        );
        assert_eq!(verts(a).nrows(), 4);
    }

    #[test]
    fn cross_polytope_vertices() {
        let body = Body::PolytopeH(PolytopeH::cross_polytope(3));
        let v = body.vertex_matrix().unwrap();
        assert_eq!(v.nrows(), 6);
        for r in v.row_iter() {
            assert!((r.amax() - 1.0).abs() < 1e-12);
            assert!((r.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_guard() {
        let mut rng = SeedSpec::new(1).rng();
        let a = gaussian_matrix(&mut rng, 14, 13);
        let body = Body::PolytopeH(PolytopeH::new(a, f64::INFINITY).unwrap());
        assert!(matches!(
            body.vertex_matrix(),
            Err(Error::Resource { guard: "vertex_enumeration_dim", .. })
        ));
    }

    #[test]
    fn random_polytope_vertex_properties() {
        let mut rng = SeedSpec::new(3).rng();
        let a = gaussian_matrix(&mut rng, 7, 3);
        let v = verts(a.clone());
        assert!(v.nrows() >= 8);
        for r in v.row_iter() {
            let ax = &a * r.transpose();
            assert!(ax.amax() <= 1.0 + 1e-8);
            let active = ax.iter().filter(|y| (y.abs() - 1.0).abs() < 1e-8).count();
            assert!(active >= 3);
        }
        for i in 0..v.nrows() {
            for j in (i + 1)..v.nrows() {
                assert!((v.row(i) - v.row(j)).norm() >= 1e-8);
            }
        }
    }

    #[test]
    fn lp_one_square_matrix() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]));
        let body = Body::PolytopeH(PolytopeH::new(a, 1.0).unwrap());
        let v = body.vertex_matrix().unwrap();
        assert_eq!(v.nrows(), 4);
        assert!((body.radius().unwrap() - 2.0).abs() < 1e-12);
    }
}
