//! Centrally symmetric convex bodies: H-polytopes `{x : |Ax|_p <= 1}`, their
//! vertex-generated duals, ellipsoids, boxes, `l_p` balls and segments.
//!
//! Every body exposes a gauge (Minkowski functional); membership is
//! `gauge(x) <= 1` up to the boundary tolerance of its family.

mod format;
mod vertices;

pub use format::BodySpec;
pub use vertices::{VERTEX_DIM_GUARD, VERTEX_PARALLELOTOPE_GUARD};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numerics::{gaussian_matrix, lp_norm, numerical_rank, SeedSpec, Subspace};

/// Boundary slack for closed-form membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-12;
/// Boundary slack for LP-based membership (solver tolerance dominates).
pub const LP_MEMBERSHIP_TOL: f64 = 1e-9;

/// `{x in R^n : |A x|_p <= 1}` with `A` of full column rank.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeH {
    a: DMatrix<f64>,
    p: f64,
}

impl PolytopeH {
    pub fn new(a: DMatrix<f64>, p: f64) -> Result<Self> {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Err(Error::arg(format!("constraint matrix must be non-empty, got {m}x{n}")));
        }
        if !(p >= 1.0) {
            return Err(Error::arg(format!("norm index must be in [1, inf], got {p}")));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("constraint matrix has non-finite entries"));
        }
        let rank = numerical_rank(&a);
        if rank < n {
            return Err(Error::Unbounded { rank, dim: n });
        }
        Ok(PolytopeH { a, p })
    }

    /// `{x : |x_i| <= 1}`, i.e. `A = I`, `p = inf`.
    pub fn cube(n: usize) -> Self {
        PolytopeH {
            a: DMatrix::identity(n, n),
            p: f64::INFINITY,
        }
    }

    /// The cross-polytope `B_1^n` as `2^{n-1}` facet rows (one per sign pattern up to `+-`).
    pub fn cross_polytope(n: usize) -> Self {
        let rows = 1usize << (n - 1);
        let a = DMatrix::from_fn(rows, n, |r, c| {
            if c == 0 || (r >> (c - 1)) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        PolytopeH {
            a,
            p: f64::INFINITY,
        }
    }

    /// `{ |Ax|_inf <= 1 }` with i.i.d. standard normal `A` (`m x n`, `m >= n`) drawn from `seed`.
    pub fn random(n: usize, m: usize, seed: &SeedSpec) -> Result<Self> {
        if n == 0 || m < n {
            return Err(Error::arg(format!("random polytope needs 1 <= n <= m, got n={n}, m={m}")));
        }
        let a = gaussian_matrix(&mut seed.rng(), m, n);
        PolytopeH::new(a, f64::INFINITY)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Number of rows of `A` (each row encodes the two hyperplanes `a_i x = +-1`).
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn gauge(&self, x: &DVector<f64>) -> f64 {
        let ax = &self.a * x;
        lp_norm(ax.as_slice(), self.p)
    }
}

/// Symmetric convex hull `conv{+-g_i}` of the rows of a generator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeV {
    generators: DMatrix<f64>,
}

impl PolytopeV {
    /// Generators are the rows of `generators`; they must span the space.
    pub fn new(generators: DMatrix<f64>) -> Result<Self> {
        let (m, n) = generators.shape();
        if m == 0 || n == 0 {
            return Err(Error::arg(format!("generator matrix must be non-empty, got {m}x{n}")));
        }
        let rank = numerical_rank(&generators);
        if rank < n {
            return Err(Error::arg(format!(
                "generators span a {rank}-dimensional subspace of R^{n}; body has empty interior"
            )));
        }
        Ok(PolytopeV { generators })
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn n(&self) -> usize {
        self.generators.ncols()
    }

    /// `max_i |<g_i, u>|`.
    pub fn support(&self, u: &DVector<f64>) -> f64 {
        (&self.generators * u).amax()
    }

    /// Gauge by linear programming: `min sum |l_i|` subject to `sum l_i g_i = x`.
    pub fn gauge(&self, x: &DVector<f64>) -> Result<f64> {
        if x.norm() == 0.0 {
            return Ok(0.0);
        }
        let (m, n) = self.generators.shape();
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let plus: Vec<_> = (0..m).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
        let minus: Vec<_> = (0..m).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
        for j in 0..n {
            let mut terms = Vec::with_capacity(2 * m);
            for i in 0..m {
                let g = self.generators[(i, j)];
                if g != 0.0 {
                    terms.push((plus[i], g));
                    terms.push((minus[i], -g));
                }
            }
            lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, x[j]);
        }
        match lp.solve() {
            Ok(outcome) => match outcome.solution() {
                Some(sol) => Ok(sol.objective()),
                None => Err(Error::Solver("interrupted before a solution".into())),
            },
            Err(microlp::Error::Infeasible) => Ok(f64::INFINITY),
            Err(e) => Err(Error::Solver(e.to_string())),
        }
    }
}

/// `{x : x^T M x <= 1}` with `M` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    shape: DMatrix<f64>,
    semi_axes: Vec<f64>,
    axes: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(shape: DMatrix<f64>) -> Result<Self> {
        let n = shape.nrows();
        if n == 0 || shape.ncols() != n {
            return Err(Error::arg(format!(
                "ellipsoid shape must be square and non-empty, got {}x{}",
                shape.nrows(),
                shape.ncols()
            )));
        }
        let asym = (&shape - shape.transpose()).amax();
        if asym > 1e-9 * shape.amax().max(1.0) {
            return Err(Error::arg(format!("ellipsoid shape is not symmetric (defect {asym:e})")));
        }
        let sym = (&shape + shape.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::arg("ellipsoid shape is not positive definite"));
        }
        // Ascending eigenvalue = descending semi-axis.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let semi_axes = order.iter().map(|&i| eig.eigenvalues[i].powf(-0.5)).collect();
        let mut axes = DMatrix::zeros(n, n);
        for (col, &i) in order.iter().enumerate() {
            axes.set_column(col, &eig.eigenvectors.column(i));
        }
        Ok(Ellipsoid {
            shape: sym,
            semi_axes,
            axes,
        })
    }

    /// Axis-aligned ellipsoid with the given semi-axis lengths.
    pub fn from_semi_axes(semi_axes: &[f64]) -> Result<Self> {
        if semi_axes.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::arg("semi-axes must be positive"));
        }
        let shape = DMatrix::from_diagonal(&DVector::from_iterator(
            semi_axes.len(),
            semi_axes.iter().map(|l| 1.0 / (l * l)),
        ));
        Ellipsoid::new(shape)
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// Semi-axis lengths, largest first.
    pub fn semi_axes(&self) -> &[f64] {
        &self.semi_axes
    }

    /// Unit axis directions as columns, matching `semi_axes` order.
    pub fn axes(&self) -> &DMatrix<f64> {
        &self.axes
    }

    pub fn n(&self) -> usize {
        self.shape.nrows()
    }

    /// `M^{-1} = sum_i lambda_i^2 q_i q_i^T`.
    pub fn inverse_shape(&self) -> DMatrix<f64> {
        let sq = DVector::from_iterator(self.n(), self.semi_axes.iter().map(|l| l * l));
        &self.axes * DMatrix::from_diagonal(&sq) * self.axes.transpose()
    }

    pub fn gauge(&self, x: &DVector<f64>) -> f64 {
        (x.dot(&(&self.shape * x))).max(0.0).sqrt()
    }
}

/// `prod_i [-tau_i, tau_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBody {
    half_widths: DVector<f64>,
}

impl BoxBody {
    pub fn new(half_widths: DVector<f64>) -> Result<Self> {
        if half_widths.is_empty() || half_widths.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::arg("box half-widths must be positive and finite"));
        }
        Ok(BoxBody { half_widths })
    }

    pub fn half_widths(&self) -> &DVector<f64> {
        &self.half_widths
    }

    pub fn gauge(&self, x: &DVector<f64>) -> f64 {
        x.iter()
            .zip(self.half_widths.iter())
            .fold(0.0, |acc: f64, (v, t)| acc.max(v.abs() / t))
    }
}

/// Tagged union of the supported symmetric convex bodies.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    PolytopeH(PolytopeH),
    PolytopeV(PolytopeV),
    Ellipsoid(Ellipsoid),
    Box(BoxBody),
    LpBall { p: f64, radius: f64, n: usize },
    EuclideanBall { radius: f64, n: usize },
    /// `{t e : |t| <= 1}`, the only variant without interior.
    Segment { endpoint: DVector<f64> },
}

impl Body {
    pub fn lp_ball(n: usize, p: f64, radius: f64) -> Result<Body> {
        if n == 0 || !(p >= 1.0) || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::arg(format!(
                "l_p ball needs n >= 1, p >= 1, radius > 0 (got n={n}, p={p}, radius={radius})"
            )));
        }
        Ok(Body::LpBall { p, radius, n })
    }

    pub fn ball(n: usize, radius: f64) -> Result<Body> {
        if n == 0 || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::arg(format!(
                "ball needs n >= 1 and radius > 0 (got n={n}, radius={radius})"
            )));
        }
        Ok(Body::EuclideanBall { radius, n })
    }

    pub fn segment(endpoint: DVector<f64>) -> Result<Body> {
        if endpoint.is_empty() || !(endpoint.norm() > 0.0 && endpoint.norm().is_finite()) {
            return Err(Error::arg("segment endpoint must be a non-zero finite vector"));
        }
        Ok(Body::Segment { endpoint })
    }

    pub fn cube(n: usize) -> Body {
        Body::PolytopeH(PolytopeH::cube(n))
    }

    pub fn dim(&self) -> usize {
        match self {
            Body::PolytopeH(b) => b.n(),
            Body::PolytopeV(b) => b.n(),
            Body::Ellipsoid(b) => b.n(),
            Body::Box(b) => b.half_widths.len(),
            Body::LpBall { n, .. } | Body::EuclideanBall { n, .. } => *n,
            Body::Segment { endpoint } => endpoint.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Body::PolytopeH(_) => "polytope_h",
            Body::PolytopeV(_) => "polytope_v",
            Body::Ellipsoid(_) => "ellipsoid",
            Body::Box(_) => "box",
            Body::LpBall { .. } => "lp_ball",
            Body::EuclideanBall { .. } => "ball",
            Body::Segment { .. } => "segment",
        }
    }

    pub fn is_full_dimensional(&self) -> bool {
        !matches!(self, Body::Segment { .. }) || self.dim() == 1
    }

    /// Minkowski functional; `inf` for points outside the body's linear hull.
    pub fn gauge(&self, x: &DVector<f64>) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(match self {
            Body::PolytopeH(b) => b.gauge(x),
            Body::PolytopeV(b) => return b.gauge(x),
            Body::Ellipsoid(b) => b.gauge(x),
            Body::Box(b) => b.gauge(x),
            Body::LpBall { p, radius, .. } => lp_norm(x.as_slice(), *p) / radius,
            Body::EuclideanBall { radius, .. } => x.norm() / radius,
            Body::Segment { endpoint } => {
                let e2 = endpoint.norm_squared();
                let t = x.dot(endpoint) / e2;
                let resid = (x - endpoint * t).norm();
                if resid <= MEMBERSHIP_TOL * (1.0 + x.norm()) {
                    t.abs()
                } else {
                    f64::INFINITY
                }
            }
        })
    }

    /// `x in body`, with boundary slack `1e-12` (closed forms) or `1e-9` (LP).
    pub fn membership(&self, x: &DVector<f64>) -> Result<bool> {
        let tol = match self {
            Body::PolytopeV(_) => LP_MEMBERSHIP_TOL,
            _ => MEMBERSHIP_TOL,
        };
        Ok(self.gauge(x)? <= 1.0 + tol)
    }

    /// Support function `h(u) = max_{x in body} <x, u>`.
    pub fn support(&self, u: &DVector<f64>) -> Result<f64> {
        Error::check_dim(self.dim(), u.len())?;
        Ok(match self {
            Body::PolytopeH(b) => return polytope_h_support(b, u),
            Body::PolytopeV(b) => b.support(u),
            Body::Ellipsoid(b) => u.dot(&(b.inverse_shape() * u)).max(0.0).sqrt(),
            Body::Box(b) => u.iter().zip(b.half_widths.iter()).map(|(x, t)| x.abs() * t).sum(),
            Body::LpBall { p, radius, .. } => radius * lp_norm(u.as_slice(), conjugate_index(*p)),
            Body::EuclideanBall { radius, .. } => radius * u.norm(),
            Body::Segment { endpoint } => endpoint.dot(u).abs(),
        })
    }

    /// Per-axis extents `h(e_i)`: the body lies in `prod [-h_i, h_i]`.
    pub fn bounding_half_widths(&self) -> Result<DVector<f64>> {
        let n = self.dim();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            out[i] = self.support(&e)?;
        }
        Ok(out)
    }

    /// `rad(X) = max_{x in X} |x|_2`.
    pub fn radius(&self) -> Result<f64> {
        match self {
            Body::Box(b) => Ok(b.half_widths.norm()),
            Body::Ellipsoid(b) => Ok(b.semi_axes[0]),
            Body::EuclideanBall { radius, .. } => Ok(*radius),
            Body::LpBall { p, radius, n } => {
                // Axis point (rad r) against diagonal point (rad r n^{1/2-1/p}).
                let diag = (*n as f64).powf(0.5 - 1.0 / p);
                Ok(radius * diag.max(1.0))
            }
            Body::Segment { endpoint } => Ok(endpoint.norm()),
            Body::PolytopeV(b) => Ok(b
                .generators
                .row_iter()
                .map(|r| r.norm())
                .fold(0.0, f64::max)),
            Body::PolytopeH(b) if b.p == 2.0 => {
                Ok(1.0 / b.a.singular_values().min())
            }
            Body::PolytopeH(_) => {
                let v = self.vertex_matrix()?;
                Ok(v.row_iter().map(|r| r.norm()).fold(0.0, f64::max))
            }
        }
    }

    /// An upper bound on the radius that never needs vertex enumeration.
    pub fn radius_upper_bound(&self) -> Result<f64> {
        match self {
            Body::PolytopeH(b) => match self.radius() {
                Ok(r) => Ok(r),
                Err(Error::Resource { .. }) | Err(Error::Unsupported(_)) => {
                    // |Ax|_2 <= m^{1/2 - 1/p}... bounded by sqrt(m) |Ax|_p for every p >= 1.
                    let smin = b.a.singular_values().min();
                    Ok((b.m() as f64).sqrt() / smin)
                }
                Err(e) => Err(e),
            },
            _ => self.radius(),
        }
    }

    /// `c * body` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Body> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::arg(format!("scale must be positive, got {c}")));
        }
        Ok(match self {
            Body::PolytopeH(b) => Body::PolytopeH(PolytopeH {
                a: &b.a / c,
                p: b.p,
            }),
            Body::PolytopeV(b) => Body::PolytopeV(PolytopeV {
                generators: &b.generators * c,
            }),
            Body::Ellipsoid(b) => Body::Ellipsoid(Ellipsoid {
                shape: &b.shape / (c * c),
                semi_axes: b.semi_axes.iter().map(|l| l * c).collect(),
                axes: b.axes.clone(),
            }),
            Body::Box(b) => Body::Box(BoxBody {
                half_widths: &b.half_widths * c,
            }),
            Body::LpBall { p, radius, n } => Body::LpBall {
                p: *p,
                radius: radius * c,
                n: *n,
            },
            Body::EuclideanBall { radius, n } => Body::EuclideanBall {
                radius: radius * c,
                n: *n,
            },
            Body::Segment { endpoint } => Body::Segment {
                endpoint: endpoint * c,
            },
        })
    }

    /// Polar dual `X° = {y : <x, y> <= 1 for all x in X}`.
    ///
    /// `{|Ax|_inf <= 1}` maps to the symmetric hull of the rows of `A`; the
    /// smooth families map analytically.
    pub fn polar_dual(&self) -> Result<Body> {
        match self {
            Body::PolytopeH(b) if b.p.is_infinite() => Ok(Body::PolytopeV(PolytopeV {
                generators: b.a.clone(),
            })),
            Body::PolytopeH(b) => Err(Error::unsupported(format!(
                "polar dual of an H-polytope with p = {} (only p = inf has a V-representation)",
                b.p
            ))),
            Body::PolytopeV(b) => Ok(Body::PolytopeH(PolytopeH {
                a: b.generators.clone(),
                p: f64::INFINITY,
            })),
            Body::Box(b) => Ok(Body::PolytopeV(PolytopeV {
                generators: DMatrix::from_diagonal(&b.half_widths.map(|t| 1.0 / t)),
            })),
            Body::EuclideanBall { radius, n } => Body::ball(*n, 1.0 / radius),
            Body::LpBall { p, radius, n } => Body::lp_ball(*n, conjugate_index(*p), 1.0 / radius),
            Body::Ellipsoid(b) => Ok(Body::Ellipsoid(Ellipsoid::new(b.inverse_shape())?)),
            Body::Segment { .. } => Err(Error::unsupported(
                "the polar of a segment is an unbounded slab",
            )),
        }
    }

    /// `P_H(X°)` expressed in the coordinates of `h`'s basis.
    pub fn project_dual(&self, h: &Subspace) -> Result<Body> {
        Error::check_dim(self.dim(), h.ambient_dim())?;
        if h.dim() == 0 {
            return Err(Error::arg("cannot project onto the zero subspace"));
        }
        let b = h.basis();
        match self {
            Body::PolytopeH(p) if p.p.is_infinite() => {
                Ok(Body::PolytopeV(PolytopeV::new(&p.a * b)?))
            }
            Body::Box(x) => {
                let scaled = DMatrix::from_diagonal(&x.half_widths.map(|t| 1.0 / t));
                Ok(Body::PolytopeV(PolytopeV::new(scaled * b)?))
            }
            Body::LpBall { p, radius, .. } if p.is_infinite() => {
                Ok(Body::PolytopeV(PolytopeV::new(b / *radius)?))
            }
            Body::EuclideanBall { radius, .. } => Body::ball(h.dim(), 1.0 / radius),
            Body::Ellipsoid(e) => {
                // X° = M^{1/2} B_2; its image under B^T is {z : z^T (B^T M B)^{-1} z <= 1}.
                let inner = b.tr_mul(&(&e.shape * b));
                let inv = inner
                    .try_inverse()
                    .ok_or_else(|| Error::Solver("projected ellipsoid is singular".into()))?;
                Ok(Body::Ellipsoid(Ellipsoid::new((&inv + inv.transpose()) * 0.5)?))
            }
            _ => Err(Error::unsupported(format!(
                "projected dual of a {} body",
                self.kind()
            ))),
        }
    }

    /// All vertices (both signs) for bodies whose extreme points are finite and known.
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>> {
        let v = self.vertex_matrix()?;
        Ok(v.row_iter().map(|r| r.transpose()).collect())
    }

    /// Vertices as the rows of a matrix.
    pub fn vertex_matrix(&self) -> Result<DMatrix<f64>> {
        vertices::vertex_matrix(self)
    }

    /// Whether `vertex_matrix` can succeed without enumeration blow-up.
    pub fn has_vertices(&self) -> bool {
        match self {
            Body::PolytopeH(b) => {
                (b.p.is_infinite() && vertices::polytope_h_enumerable(b))
                    || (b.p == 1.0 && b.m() == b.n())
            }
            Body::PolytopeV(_) | Body::Segment { .. } => true,
            Body::Box(b) => b.half_widths.len() <= VERTEX_PARALLELOTOPE_GUARD,
            Body::LpBall { p, n, .. } => *p == 1.0 || (p.is_infinite() && *n <= VERTEX_PARALLELOTOPE_GUARD),
            Body::Ellipsoid(_) | Body::EuclideanBall { .. } => false,
        }
    }

    pub fn to_spec(&self) -> BodySpec {
        BodySpec::from_body(self)
    }
}

/// Hoelder conjugate `q` with `1/p + 1/q = 1`.
pub fn conjugate_index(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn polytope_h_support(b: &PolytopeH, u: &DVector<f64>) -> Result<f64> {
    if b.p.is_infinite() {
        // max <u, x> s.t. -1 <= a_i x <= 1.
        let (m, n) = b.a.shape();
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let xs: Vec<_> = (0..n)
            .map(|j| lp.add_var(u[j], (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        for i in 0..m {
            let terms: Vec<_> = (0..n)
                .filter(|&j| b.a[(i, j)] != 0.0)
                .map(|j| (xs[j], b.a[(i, j)]))
                .collect();
            lp.add_constraint(terms.as_slice(), ComparisonOp::Le, 1.0);
            lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, -1.0);
        }
        let outcome = lp.solve().map_err(|e| Error::Solver(e.to_string()))?;
        outcome
            .solution()
            .map(|s| s.objective())
            .ok_or_else(|| Error::Solver("interrupted before a solution".into()))
    } else if b.p == 2.0 {
        // X = {x : x^T A^T A x <= 1}, support sqrt(u^T (A^T A)^{-1} u).
        let gram = b.a.tr_mul(&b.a);
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Solver("singular Gram matrix".into()))?;
        Ok(u.dot(&(inv * u)).max(0.0).sqrt())
    } else {
        let v = vertices::vertex_matrix(&Body::PolytopeH(b.clone()))?;
        Ok((v * u).max())
    }
}
