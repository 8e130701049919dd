//! Linear-algebra and sampling substrate: orthonormal subspaces, distances
//! to spans, and seeded samplers with counter-based stream derivation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for every rank decision.
pub const RANK_TOL: f64 = 1e-9;

/// Two-sided 95% normal quantile (one-sided 97.5%).
pub const Z_975: f64 = 1.959_963_984_540_054;

/// A `k`-dimensional linear subspace of `R^n`, stored as an `n x k` matrix
/// with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a basis that is already orthonormal. Checked in debug builds.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        debug_assert!(orthonormality_defect(&basis) < 1e-8);
        Subspace { basis }
    }

    /// The zero subspace of `R^n`.
    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    /// All of `R^n`, with the standard basis.
    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            basis: DMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Span of the standard basis vectors with the given indices.
    pub fn coordinate(ambient_dim: usize, axes: &[usize]) -> Self {
        let mut basis = DMatrix::zeros(ambient_dim, axes.len());
        for (col, &axis) in axes.iter().enumerate() {
            basis[(axis, col)] = 1.0;
        }
        Subspace { basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Coordinates of the projection of `v` in this subspace's basis (`B^T v`).
    pub fn coords(&self, v: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(v)
    }

    /// Maps subspace coordinates back to ambient space (`B c`).
    pub fn embed(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.basis * c
    }

    /// Orthogonal projection `P_W v` in ambient coordinates.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.embed(&self.coords(v))
    }

    /// The projector matrix `B B^T`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Orthogonal complement, of dimension `n - k`.
    pub fn complement(&self) -> Subspace {
        let n = self.ambient_dim();
        if self.dim() == 0 {
            return Subspace::full(n);
        }
        if self.dim() == n {
            return Subspace::zero(n);
        }
        let residual = DMatrix::identity(n, n) - self.projector();
        let mut comp = orthonormalize(&residual);
        // Rounding can leave a spurious direction when the residual is nearly rank deficient.
        if comp.dim() > n - self.dim() {
            comp.basis = comp.basis.columns(0, n - self.dim()).into_owned();
        }
        comp
    }

    /// Largest residual when projecting each basis vector of `other` onto `self`.
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        let proj = self.projector() * other.basis();
        (other.basis() - proj).norm()
    }
}

/// Frobenius norm of `B^T B - I`.
pub fn orthonormality_defect(basis: &DMatrix<f64>) -> f64 {
    let k = basis.ncols();
    (basis.tr_mul(basis) - DMatrix::<f64>::identity(k, k)).norm()
}

/// Orthonormal basis for the column span of `vectors` (n x j).
///
/// Columns whose singular value falls below `RANK_TOL` times the largest are
/// dropped, so the result has the numerical rank of the input.
pub fn orthonormalize(vectors: &DMatrix<f64>) -> Subspace {
    let n = vectors.nrows();
    if vectors.ncols() == 0 || vectors.norm() == 0.0 {
        return Subspace::zero(n);
    }
    let svd = vectors.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_TOL * smax)
        .collect();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        basis.set_column(col, &u.column(i));
    }
    Subspace { basis }
}

/// Numerical rank under the crate-wide relative tolerance.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// Euclidean distance from `v` to the span of `w`.
pub fn dist_to_span(v: &DVector<f64>, w: &Subspace) -> Result<f64> {
    Error::check_dim(w.ambient_dim(), v.len())?;
    let c = w.coords(v);
    let resid_sq = (v.norm_squared() - c.norm_squared()).max(0.0);
    // Cancellation in the squared form loses digits when v nearly lies in the span.
    if resid_sq < 1e-8 * v.norm_squared() {
        Ok((v - w.embed(&c)).norm())
    } else {
        Ok(resid_sq.sqrt())
    }
}

/// Identifies an independent random stream: a root seed plus a path of
/// child indices. Streams are derived by hashing, never by advancing a
/// shared generator, so results do not depend on evaluation order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream_path: Vec<u64>,
}

impl SeedSpec {
    pub fn new(root_seed: u64) -> Self {
        SeedSpec {
            root_seed,
            stream_path: Vec::new(),
        }
    }

    /// The stream one level below this one.
    pub fn child(&self, index: u64) -> SeedSpec {
        let mut stream_path = self.stream_path.clone();
        stream_path.push(index);
        SeedSpec {
            root_seed: self.root_seed,
            stream_path,
        }
    }

    /// 256-bit key derived from the root and path.
    pub fn key(&self) -> [u8; 32] {
        let mut h = splitmix64(self.root_seed ^ 0x5851_f42d_4c95_7f2d);
        for (depth, &p) in self.stream_path.iter().enumerate() {
            h = splitmix64(h ^ splitmix64(p.wrapping_add((depth as u64 + 1) << 56)));
        }
        let mut key = [0u8; 32];
        let mut state = h;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        key
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Uniform point of the unit ball in `R^k`: normalized Gaussian direction,
/// radius `U^{1/k}`.
pub fn unit_ball_point<R: Rng + ?Sized>(rng: &mut R, k: usize) -> DVector<f64> {
    loop {
        let g = gaussian_vector(rng, k);
        let norm = g.norm();
        if norm > 0.0 {
            let u: f64 = rng.random();
            return g * (u.powf(1.0 / k as f64) / norm);
        }
    }
}

/// Uniform sample from the radius-`r` ball inside `span(sub)`, in ambient
/// coordinates.
pub fn sample_ball(sub: &Subspace, r: f64, seed: &SeedSpec) -> Result<DVector<f64>> {
    if !(r > 0.0) {
        return Err(Error::arg(format!("ball radius must be positive, got {r}")));
    }
    if sub.dim() == 0 {
        return Err(Error::arg("cannot sample a ball in the zero subspace"));
    }
    let mut rng = seed.rng();
    Ok(sub.embed(&(unit_ball_point(&mut rng, sub.dim()) * r)))
}

/// `dim` i.i.d. centered normal coordinates with standard deviation `sigma`.
pub fn sample_gaussian(dim: usize, sigma: f64, seed: &SeedSpec) -> Result<DVector<f64>> {
    if dim == 0 {
        return Err(Error::arg("gaussian dimension must be positive"));
    }
    if !(sigma > 0.0) {
        return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
    }
    let mut rng = seed.rng();
    Ok(gaussian_vector(&mut rng, dim) * sigma)
}

/// One-sided Wilson score lower bound on a binomial proportion.
pub fn wilson_lower(hits: usize, trials: usize, z: f64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - spread) / (1.0 + z2 / n)).clamp(0.0, 1.0)
}

/// One-sided Wilson score upper bound on a binomial proportion.
pub fn wilson_upper(hits: usize, trials: usize, z: f64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre + spread) / (1.0 + z2 / n)).clamp(0.0, 1.0)
}

/// `p`-norm of a slice; `p = inf` gives the max-abs norm.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cols(v: &[&[f64]]) -> DMatrix<f64> {
        let n = v[0].len();
        DMatrix::from_fn(n, v.len(), |i, j| v[j][i])
    }

    #[test]
    fn orthonormalize_identity() {
        let s = orthonormalize(&cols(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(s.dim(), 2);
        assert!(orthonormality_defect(s.basis()) < 1e-12);
        assert!(Subspace::full(2).containment_residual(&s) < 1e-12);
        assert!(s.containment_residual(&Subspace::full(2)) < 1e-12);
    }

    #[test]
    fn orthonormalize_collinear() {
        let s = orthonormalize(&cols(&[&[1.0, 0.0], &[2.0, 0.0]]));
        assert_eq!(s.dim(), 1);
        assert_relative_eq!(s.basis()[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert!(s.basis()[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_plane_residual_by_least_squares() {
        let input = cols(&[&[1.0, 1.0, 0.0], &[1.0, -1.0, 0.0], &[2.0, 0.0, 0.0]]);
        let s = orthonormalize(&input);
        assert_eq!(s.dim(), 2);
        let ez = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert!(s.project(&ez).norm() < 1e-12);
        // Independent route: least-squares fit of each input column by the basis.
        for j in 0..3 {
            let col = input.column(j).into_owned();
            let coef = s
                .basis()
                .clone()
                .svd(true, true)
                .solve(&col, 1e-12)
                .unwrap();
            assert!((s.basis() * coef - col).norm() < 1e-10);
        }
    }

    #[test]
    fn rank_zero_input() {
        assert_eq!(orthonormalize(&DMatrix::zeros(3, 2)).dim(), 0);
        assert_eq!(orthonormalize(&DMatrix::zeros(3, 0)).dim(), 0);
    }

    #[test]
    fn dist_to_span_examples() {
        let w = Subspace::coordinate(3, &[0, 1]);
        let v = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert_relative_eq!(dist_to_span(&v, &w).unwrap(), 1.0);
        let w1 = Subspace::coordinate(3, &[0]);
        let v = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert_relative_eq!(dist_to_span(&v, &w1).unwrap(), 1.0);
        let diag = orthonormalize(&cols(&[&[1.0, 1.0]]));
        let v = DVector::from_vec(vec![3.0, 4.0]);
        assert_relative_eq!(
            dist_to_span(&v, &diag).unwrap(),
            1.0 / 2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dist_to_span_dimension_mismatch() {
        let w = Subspace::full(2);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            dist_to_span(&v, &w),
            Err(Error::Dimension { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn complement_dimensions() {
        let mut rng = SeedSpec::new(3).rng();
        let s = orthonormalize(&gaussian_matrix(&mut rng, 5, 2));
        let c = s.complement();
        assert_eq!(c.dim(), 3);
        assert!(s.basis().tr_mul(c.basis()).norm() < 1e-10);
    }

    #[test]
    fn ball_mean_norm() {
        let sub = Subspace::full(2);
        let root = SeedSpec::new(7);
        let mut rng = root.rng();
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| unit_ball_point(&mut rng, sub.dim()).norm())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.01, "mean norm {mean}");
    }

    #[test]
    fn ball_one_dimensional_range() {
        let sub = Subspace::coordinate(3, &[1]);
        for i in 0..200 {
            let x = sample_ball(&sub, 2.0, &SeedSpec::new(1).child(i)).unwrap();
            assert!(x[1].abs() <= 2.0 && x[0] == 0.0 && x[2] == 0.0);
        }
    }

    #[test]
    fn samplers_are_deterministic() {
        let seed = SeedSpec::new(42).child(3).child(1);
        let sub = Subspace::full(4);
        assert_eq!(
            sample_ball(&sub, 1.5, &seed).unwrap(),
            sample_ball(&sub, 1.5, &seed).unwrap()
        );
        assert_eq!(
            sample_gaussian(5, 2.0, &seed).unwrap(),
            sample_gaussian(5, 2.0, &seed).unwrap()
        );
        assert_ne!(
            sample_gaussian(5, 2.0, &seed).unwrap(),
            sample_gaussian(5, 2.0, &seed.child(0)).unwrap()
        );
    }

    #[test]
    fn sample_ball_rejects_bad_radius() {
        assert!(sample_ball(&Subspace::full(2), 0.0, &SeedSpec::new(0)).is_err());
    }

    #[test]
    fn gaussian_variance() {
        for (sigma, tol) in [(1.0, 0.02), (2.0, 0.08)] {
            let root = SeedSpec::new(11);
            let draws: Vec<f64> = (0..100_000u64)
                .map(|i| sample_gaussian(1, sigma, &root.child(i)).unwrap()[0])
                .collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64;
            assert!((var - sigma * sigma).abs() < tol, "sigma {sigma}: var {var}");
        }
    }

    #[test]
    fn sibling_streams_independent() {
        // 2x2 contingency table of (u < 1/2) for paired draws of two sibling streams.
        let a = SeedSpec::new(99).child(0);
        let b = SeedSpec::new(99).child(1);
        let (mut ra, mut rb) = (a.rng(), b.rng());
        let mut table = [[0f64; 2]; 2];
        let n = 100_000;
        for _ in 0..n {
            let x: f64 = ra.random();
            let y: f64 = rb.random();
            table[(x < 0.5) as usize][(y < 0.5) as usize] += 1.0;
        }
        let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
        let colsum = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
        let mut chi2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let e = rows[i] * colsum[j] / n as f64;
                chi2 += (table[i][j] - e).powi(2) / e;
            }
        }
        // chi-square(1) critical value at the 1e-3 level.
        assert!(chi2 < 10.828, "chi2 {chi2}");
    }

    #[test]
    fn wilson_bounds_bracket_rate() {
        let lo = wilson_lower(300, 1000, Z_975);
        let hi = wilson_upper(300, 1000, Z_975);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(wilson_lower(1000, 1000, Z_975) < 1.0);
        assert!(wilson_lower(0, 1000, Z_975) < 1e-15);
    }

    #[test]
    fn combinations_enumerate() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(binomial(16, 8), 12870.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn pythagoras(seed in any::<u64>(), n in 1usize..7, k in 0usize..7) {
                let k = k.min(n);
                let mut rng = SeedSpec::new(seed).rng();
                let w = orthonormalize(&gaussian_matrix(&mut rng, n, k));
                let v = gaussian_vector(&mut rng, n);
                let d = dist_to_span(&v, &w).unwrap();
                let p = w.project(&v).norm();
                prop_assert!((d * d + p * p - v.norm_squared()).abs() <= 1e-8 * v.norm_squared().max(1e-300));
            }

            #[test]
            fn reorthonormalize_keeps_span(seed in any::<u64>(), n in 1usize..7, k in 0usize..7) {
                let k = k.min(n);
                let mut rng = SeedSpec::new(seed).rng();
                let w = orthonormalize(&gaussian_matrix(&mut rng, n, k));
                let w2 = orthonormalize(w.basis());
                prop_assert_eq!(w.dim(), w2.dim());
                prop_assert!(w.containment_residual(&w2) < 1e-9);
                prop_assert!(w2.containment_residual(&w) < 1e-9);
            }

            #[test]
            fn ball_samples_in_span_and_radius(seed in any::<u64>(), n in 1usize..6, k in 1usize..6, r in 0.1f64..5.0) {
                let k = k.min(n);
                let mut rng = SeedSpec::new(seed).rng();
                let w = orthonormalize(&gaussian_matrix(&mut rng, n, k));
                let x = sample_ball(&w, r, &SeedSpec::new(seed).child(1)).unwrap();
                prop_assert!(x.norm() <= r * (1.0 + 1e-12));
                prop_assert!(dist_to_span(&x, &w).unwrap() < 1e-9);
            }
        }
    }
}
