//! Equation solvers: linear systems in fixed-point form, min/max Bellman
//! systems, exact rational elimination and Poisson truncation for
//! uniformization.
//!
//! Every iterative system has the form `x = A·x + b` with a substochastic
//! `A`. Checkers assemble such systems over the states whose value is not
//! already settled by graph precomputation.

mod exact;
mod fox_glynn;
mod linear;
mod minmax;

use thiserror::Error;

pub use exact::{solve_linear_exact, to_rational_system};
pub use fox_glynn::{fox_glynn, FoxGlynn, MAX_LAMBDA};
pub use linear::solve_linear;
pub use minmax::{solve_minmax, solve_minmax_exact};

use crate::model::SparseMatrix;
use crate::scalar::{Rational, Scalar};

/// Components smaller than this are compared absolutely under the relative
/// criterion.
pub const RELATIVE_FLOOR: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearMethod {
    Jacobi,
    GaussSeidel,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinMaxMethod {
    ValueIteration,
    PolicyIteration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    Absolute,
    Relative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// `true` if `candidate` is strictly better than `incumbent`.
    pub fn improves<T: PartialOrd>(self, candidate: &T, incumbent: &T) -> bool {
        match self {
            Direction::Minimize => candidate < incumbent,
            Direction::Maximize => candidate > incumbent,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Direction::Minimize => Direction::Maximize,
            Direction::Maximize => Direction::Minimize,
        }
    }
}

/// Method selection and convergence settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverEnvironment {
    pub linear_method: LinearMethod,
    pub minmax_method: MinMaxMethod,
    pub precision: f64,
    pub criterion: Criterion,
    pub max_iterations: u64,
}

impl Default for SolverEnvironment {
    fn default() -> Self {
        SolverEnvironment {
            linear_method: LinearMethod::GaussSeidel,
            minmax_method: MinMaxMethod::ValueIteration,
            precision: 1e-6,
            criterion: Criterion::Relative,
            max_iterations: 1_000_000,
        }
    }
}

impl SolverEnvironment {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.precision > 0.0 && self.precision.is_finite()) {
            return Err(SolverError::InvalidEnvironment(format!(
                "precision must be positive, got {}",
                self.precision
            )));
        }
        if self.max_iterations < 1 {
            return Err(SolverError::InvalidEnvironment(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Whether two successive iterates are close enough to stop.
    pub fn converged(&self, old: &[f64], new: &[f64]) -> bool {
        old.iter().zip(new).all(|(&o, &n)| {
            let diff = (n - o).abs();
            match self.criterion {
                Criterion::Absolute => diff <= self.precision,
                Criterion::Relative if n.abs() < RELATIVE_FLOOR => diff <= self.precision,
                Criterion::Relative => diff <= self.precision * n.abs(),
            }
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no convergence after {iterations} iterations")]
    NotConverged {
        iterations: u64,
        best: Vec<f64>,
    },
    #[error("diagonal entry of row {0} is at least one")]
    DiagonalOne(usize),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Poisson rate {0} exceeds the supported maximum")]
    LambdaTooLarge(f64),
    #[error("invalid Poisson parameters: {0}")]
    InvalidPoisson(String),
    #[error("invalid solver settings: {0}")]
    InvalidEnvironment(String),
}

/// `x = A·x + b` with square `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem<T> {
    pub matrix: SparseMatrix<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> LinearSystem<T> {
    pub fn new(matrix: SparseMatrix<T>, b: Vec<T>) -> Result<Self, SolverError> {
        if matrix.rows() != matrix.cols() || b.len() != matrix.rows() {
            return Err(SolverError::DimensionMismatch(format!(
                "{}x{} matrix with {} right-hand sides",
                matrix.rows(),
                matrix.cols(),
                b.len()
            )));
        }
        Ok(LinearSystem { matrix, b })
    }

    pub fn size(&self) -> usize {
        self.b.len()
    }
}

/// `x_s = opt_{c in choices(s)} (b_c + A_c·x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BellmanSystem<T> {
    pub matrix: SparseMatrix<T>,
    pub choice_offsets: Vec<usize>,
    pub b: Vec<T>,
    pub direction: Direction,
}

impl<T: Scalar> BellmanSystem<T> {
    pub fn new(
        matrix: SparseMatrix<T>,
        choice_offsets: Vec<usize>,
        b: Vec<T>,
        direction: Direction,
    ) -> Result<Self, SolverError> {
        let states = choice_offsets.len().saturating_sub(1);
        let ok = !choice_offsets.is_empty()
            && choice_offsets[0] == 0
            && *choice_offsets.last().unwrap() == matrix.rows()
            && choice_offsets.windows(2).all(|w| w[0] < w[1])
            && matrix.cols() == states
            && b.len() == matrix.rows();
        if !ok {
            return Err(SolverError::DimensionMismatch(format!(
                "{}x{} matrix, {} offsets, {} right-hand sides",
                matrix.rows(),
                matrix.cols(),
                choice_offsets.len(),
                b.len()
            )));
        }
        Ok(BellmanSystem {
            matrix,
            choice_offsets,
            b,
            direction,
        })
    }

    pub fn states(&self) -> usize {
        self.choice_offsets.len() - 1
    }

    /// `b_c + A_c·x`.
    pub fn choice_value(&self, choice: usize, x: &[T]) -> T {
        self.b[choice].clone() + self.matrix.row_dot(choice, x)
    }

    /// Best choice of each state under `x`, lowest index on ties.
    pub fn greedy_scheduler(&self, x: &[T]) -> Vec<usize> {
        (0..self.states())
            .map(|s| {
                let range = self.choice_offsets[s]..self.choice_offsets[s + 1];
                let mut best = range.start;
                let mut best_value = self.choice_value(best, x);
                for c in range.skip(1) {
                    let v = self.choice_value(c, x);
                    if self.direction.improves(&v, &best_value) {
                        best = c;
                        best_value = v;
                    }
                }
                best - self.choice_offsets[s]
            })
            .collect()
    }

    /// The linear system induced by fixing one choice (local index) per state.
    pub fn induced(&self, scheduler: &[usize]) -> LinearSystem<T> {
        let rows = scheduler
            .iter()
            .enumerate()
            .map(|(s, &local)| {
                let c = self.choice_offsets[s] + local;
                self.matrix.row(c).map(|(col, v)| (col, v.clone())).collect()
            })
            .collect();
        let matrix = SparseMatrix::from_rows(rows, self.states()).expect("rows from valid matrix");
        let b = scheduler
            .iter()
            .enumerate()
            .map(|(s, &local)| self.b[self.choice_offsets[s] + local].clone())
            .collect();
        LinearSystem { matrix, b }
    }
}

/// Result of a solver call.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome<T> {
    pub x: Vec<T>,
    pub iterations: u64,
    pub converged: bool,
    /// Local choice index per state, Bellman systems only.
    pub scheduler: Option<Vec<usize>>,
}

/// `y = A·x`.
pub fn matvec<T: Scalar>(matrix: &SparseMatrix<T>, x: &[T]) -> Result<Vec<T>, SolverError> {
    if x.len() != matrix.cols() {
        return Err(SolverError::DimensionMismatch(format!(
            "{} columns, vector of length {}",
            matrix.cols(),
            x.len()
        )));
    }
    Ok(matrix.multiply(x))
}

/// `y_s = opt_{c in choices(s)} (A·x)_c`.
pub fn matvec_reduce<T: Scalar>(
    matrix: &SparseMatrix<T>,
    choice_offsets: &[usize],
    x: &[T],
    direction: Direction,
) -> Result<Vec<T>, SolverError> {
    if choice_offsets.last() != Some(&matrix.rows()) {
        return Err(SolverError::DimensionMismatch(
            "choice offsets do not cover the matrix".into(),
        ));
    }
    let products = matvec(matrix, x)?;
    Ok(reduce(&products, choice_offsets, direction))
}

pub(crate) fn reduce<T: Scalar>(per_choice: &[T], choice_offsets: &[usize], direction: Direction) -> Vec<T> {
    choice_offsets
        .windows(2)
        .map(|w| {
            let mut best = per_choice[w[0]].clone();
            for v in &per_choice[w[0] + 1..w[1]] {
                if direction.improves(v, &best) {
                    best = v.clone();
                }
            }
            best
        })
        .collect()
}

/// Solves a linear system in the scalar domain of its entries.
///
/// Floats use the iterative method selected in `env` (or exact elimination
/// after lossless conversion); rationals always use exact elimination.
pub trait Solve: Scalar {
    fn solve_linear_system(
        sys: &LinearSystem<Self>,
        env: &SolverEnvironment,
    ) -> Result<SolveOutcome<Self>, SolverError>;

    fn solve_bellman_system(
        sys: &BellmanSystem<Self>,
        env: &SolverEnvironment,
    ) -> Result<SolveOutcome<Self>, SolverError>;
}

impl Solve for f64 {
    fn solve_linear_system(
        sys: &LinearSystem<f64>,
        env: &SolverEnvironment,
    ) -> Result<SolveOutcome<f64>, SolverError> {
        solve_linear(sys, env)
    }

    fn solve_bellman_system(
        sys: &BellmanSystem<f64>,
        env: &SolverEnvironment,
    ) -> Result<SolveOutcome<f64>, SolverError> {
        solve_minmax(sys, env)
    }
}

impl Solve for Rational {
    fn solve_linear_system(
        sys: &LinearSystem<Rational>,
        _env: &SolverEnvironment,
    ) -> Result<SolveOutcome<Rational>, SolverError> {
        Ok(SolveOutcome {
            x: solve_linear_exact(sys)?,
            iterations: 1,
            converged: true,
            scheduler: None,
        })
    }

    fn solve_bellman_system(
        sys: &BellmanSystem<Rational>,
        env: &SolverEnvironment,
    ) -> Result<SolveOutcome<Rational>, SolverError> {
        solve_minmax_exact(sys, env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_sparse;

    #[test]
    fn matvec_zero_and_permutation() {
        let zero = SparseMatrix::<f64>::zero(3, 3);
        assert_eq!(matvec(&zero, &[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        let perm = build_sparse(vec![(0, 2, 1.0), (1, 0, 1.0), (2, 1, 1.0)], 3, 3).unwrap();
        assert_eq!(matvec(&perm, &[1.0, 2.0, 3.0]).unwrap(), vec![3.0, 1.0, 2.0]);
        assert!(matches!(
            matvec(&perm, &[1.0]),
            Err(SolverError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn matvec_matches_dense_left_to_right() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut dense = vec![vec![0.0; 10]; 10];
        let mut triples = Vec::new();
        for (r, row) in dense.iter_mut().enumerate() {
            for (c, slot) in row.iter_mut().enumerate() {
                if rng.gen_bool(0.4) {
                    let v: f64 = rng.gen_range(0.01..1.0);
                    *slot = v;
                    triples.push((r, c, v));
                }
            }
        }
        let m = build_sparse(triples, 10, 10).unwrap();
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = matvec(&m, &x).unwrap();
        for r in 0..10 {
            let mut acc = 0.0;
            for c in 0..10 {
                if dense[r][c] != 0.0 {
                    acc += dense[r][c] * x[c];
                }
            }
            assert_eq!(y[r], acc);
        }
    }

    #[test]
    fn matvec_reduce_takes_optimum() {
        let m = build_sparse(vec![(0, 0, 0.3), (1, 0, 0.8), (2, 0, 1.0)], 3, 1).unwrap();
        let offsets = [0, 2, 3];
        assert_eq!(
            matvec_reduce(&m, &offsets, &[1.0], Direction::Maximize).unwrap(),
            vec![0.8, 1.0]
        );
        assert_eq!(
            matvec_reduce(&m, &offsets, &[1.0], Direction::Minimize).unwrap(),
            vec![0.3, 1.0]
        );
    }

    #[test]
    fn environment_validation() {
        let mut env = SolverEnvironment::default();
        assert!(env.validate().is_ok());
        env.precision = 0.0;
        assert!(env.validate().is_err());
        env.precision = 1e-6;
        env.max_iterations = 0;
        assert!(env.validate().is_err());
    }

    #[test]
    fn relative_criterion_near_zero_is_absolute() {
        let env = SolverEnvironment::default();
        assert!(env.converged(&[0.0], &[1e-31]));
        assert!(!env.converged(&[1.0], &[1.1]));
        assert!(env.converged(&[1.0], &[1.0 + 1e-7]));
    }
}
