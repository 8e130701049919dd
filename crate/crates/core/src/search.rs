//! Multi-restart local search over the Grassmannian of `d`-dimensional
//! subspaces of `R^n`.
//!
//! A subspace is carried as an `n x d` orthonormal basis. Each step moves
//! the basis along a random tangent direction (`G - B B^T G`), re-orthonormalizes
//! with a thin QR, and keeps the move only if the objective strictly drops.
//! The step shrinks by `decay` on a rejected move and grows by `1 / decay`
//! (capped at the initial step) on an accepted one.
//!
//! Restarts are independent: restart `i` draws from `seed.child(i)`, and the
//! winner is the argmin of `(value, restart index)`, so the outcome does not
//! depend on how restarts are scheduled across threads.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numerics::{gaussian_matrix, SeedSpec};
use crate::par;

/// Search effort knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub initial_step: f64,
    pub decay: f64,
    /// Random candidates for the dense Grassmann oracle.
    pub oracle_candidates: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            restarts: 32,
            iterations: 200,
            initial_step: 0.5,
            decay: 0.7,
            oracle_candidates: 1_000_000,
        }
    }
}

impl SearchBudget {
    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }
}

/// Best subspace found and its objective value.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub value: f64,
    pub basis: DMatrix<f64>,
    /// Index of the winning start (warm starts come first).
    pub start: usize,
    pub evaluations: usize,
}

/// Thin-QR orthonormalization of a full-column-rank `n x d` matrix.
pub fn qr_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    m.clone().qr().q()
}

/// A uniformly random `d`-dimensional subspace of `R^n` (Haar measure).
pub fn random_basis<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> DMatrix<f64> {
    qr_basis(&gaussian_matrix(rng, n, d))
}

/// Minimizes `f` over `d`-dimensional subspaces of `R^n`.
///
/// `warm` bases are refined as additional starts ahead of `budget.restarts`
/// random ones. For `d = 0` or `d = n` the Grassmannian is a point and `f`
/// is evaluated once.
pub fn grassmann_minimize<F>(
    n: usize,
    d: usize,
    f: F,
    budget: &SearchBudget,
    seed: &SeedSpec,
    warm: &[DMatrix<f64>],
) -> SearchOutcome
where
    F: Fn(&DMatrix<f64>) -> f64 + Sync,
{
    if d == 0 || d == n {
        let basis = if d == 0 {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::identity(n, n)
        };
        return SearchOutcome {
            value: f(&basis),
            basis,
            start: 0,
            evaluations: 1,
        };
    }
    let starts = warm.len() + budget.restarts.max(usize::from(warm.is_empty()));
    let outcomes = par::map_indexed(starts, |i| {
        let stream = seed.child(i as u64);
        let mut rng = stream.rng();
        let start = match warm.get(i) {
            Some(w) => qr_basis(w),
            None => random_basis(&mut rng, n, d),
        };
        refine(start, &f, budget, &mut rng)
    });
    let mut best: Option<SearchOutcome> = None;
    let mut evaluations = 0;
    for (i, (value, basis, evals)) in outcomes.into_iter().enumerate() {
        evaluations += evals;
        if best.as_ref().map_or(true, |b| value < b.value) {
            best = Some(SearchOutcome {
                value,
                basis,
                start: i,
                evaluations: 0,
            });
        }
    }
    let mut best = best.expect("at least one start");
    best.evaluations = evaluations;
    best
}

/// Accept-on-decrease refinement from a given orthonormal basis.
pub fn refine<F, R>(
    start: DMatrix<f64>,
    f: &F,
    budget: &SearchBudget,
    rng: &mut R,
) -> (f64, DMatrix<f64>, usize)
where
    F: Fn(&DMatrix<f64>) -> f64,
    R: rand::Rng + ?Sized,
{
    let (n, d) = start.shape();
    let mut basis = start;
    let mut value = f(&basis);
    let mut evals = 1;
    let mut step = budget.initial_step;
    let min_step = budget.initial_step * 1e-9;
    for _ in 0..budget.iterations {
        let g = gaussian_matrix(rng, n, d);
        let tangent = &g - &basis * basis.tr_mul(&g);
        let candidate = qr_basis(&(&basis + tangent * step));
        let v = f(&candidate);
        evals += 1;
        if v < value {
            value = v;
            basis = candidate;
            step = (step / budget.decay).min(budget.initial_step);
        } else {
            step = (step * budget.decay).max(min_step);
        }
    }
    (value, basis, evals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::orthonormality_defect;

    #[test]
    fn finds_minor_eigenspace() {
        // Minimize trace(B^T S B): optimum is the span of the two smallest eigenvectors.
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 3.0, 1.0, 0.5]));
        let f = |b: &DMatrix<f64>| (b.transpose() * &s * b).trace();
        let out = grassmann_minimize(4, 2, f, &SearchBudget::default(), &SeedSpec::new(1), &[]);
        assert!((out.value - 1.5).abs() < 1e-6, "{}", out.value);
        assert!(orthonormality_defect(&out.basis) < 1e-9);
    }

    #[test]
    fn deterministic_argmin() {
        let s = DMatrix::from_fn(3, 3, |i, j| if i == j { (i + 1) as f64 } else { 0.1 });
        let f = |b: &DMatrix<f64>| (b.transpose() * &s * b).trace();
        let a = grassmann_minimize(3, 1, f, &SearchBudget::default(), &SeedSpec::new(9), &[]);
        let b = grassmann_minimize(3, 1, f, &SearchBudget::default(), &SeedSpec::new(9), &[]);
        assert_eq!(a.value, b.value);
        assert_eq!(a.basis, b.basis);
        assert_eq!(a.start, b.start);
    }

    #[test]
    fn degenerate_dimensions() {
        let f = |b: &DMatrix<f64>| b.ncols() as f64;
        let out = grassmann_minimize(3, 0, f, &SearchBudget::default(), &SeedSpec::new(0), &[]);
        assert_eq!(out.value, 0.0);
        let out = grassmann_minimize(3, 3, f, &SearchBudget::default(), &SeedSpec::new(0), &[]);
        assert_eq!(out.value, 3.0);
    }

    #[test]
    fn warm_start_is_kept_when_optimal() {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
        let f = |b: &DMatrix<f64>| (b.transpose() * &s * b)[(0, 0)];
        let warm = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let budget = SearchBudget::default().with_restarts(0);
        let out = grassmann_minimize(2, 1, f, &budget, &SeedSpec::new(0), &[warm]);
        assert_eq!(out.start, 0);
        assert!((out.value - 1.0).abs() < 1e-12);
    }
}
