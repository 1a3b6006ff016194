use super::exact::{solve_linear_exact, to_rational_system};
use super::{LinearMethod, LinearSystem, SolveOutcome, SolverEnvironment, SolverError};
use crate::scalar::rational_to_f64;

/// Iteratively solves `x = A·x + b`, starting from `x = b`.
///
/// Both methods divide out the diagonal,
/// `x_i = (b_i + sum_{j != i} a_ij x_j) / (1 - a_ii)`. Jacobi computes all
/// components from the previous iterate; Gauss-Seidel updates in ascending
/// index order in place. Both stop once two successive iterates satisfy
/// `env.criterion` at `env.precision`.
///
/// The spectral radius of `A` must be below one; this is not checked.
pub fn solve_linear(
    sys: &LinearSystem<f64>,
    env: &SolverEnvironment,
) -> Result<SolveOutcome<f64>, SolverError> {
    env.validate()?;
    match env.linear_method {
        LinearMethod::Jacobi => jacobi(sys, env),
        LinearMethod::GaussSeidel => gauss_seidel(sys, env),
        LinearMethod::Exact => {
            let x = solve_linear_exact(&to_rational_system(sys)?)?;
            Ok(SolveOutcome {
                x: x.iter().map(rational_to_f64).collect(),
                iterations: 1,
                converged: true,
                scheduler: None,
            })
        }
    }
}

fn diagonal(sys: &LinearSystem<f64>) -> Result<Vec<f64>, SolverError> {
    let d: Vec<f64> = (0..sys.size())
        .map(|i| sys.matrix.get(i, i).copied().unwrap_or(0.0))
        .collect();
    match d.iter().position(|&v| v >= 1.0) {
        Some(i) => Err(SolverError::DiagonalOne(i)),
        None => Ok(d),
    }
}

fn jacobi(sys: &LinearSystem<f64>, env: &SolverEnvironment) -> Result<SolveOutcome<f64>, SolverError> {
    let diagonal = diagonal(sys)?;
    let mut x = sys.b.clone();
    for iteration in 1..=env.max_iterations {
        // Off-diagonal product, then divide out the diagonal.
        let mut next = sys.matrix.multiply(&x);
        for i in 0..next.len() {
            next[i] = (next[i] - diagonal[i] * x[i] + sys.b[i]) / (1.0 - diagonal[i]);
        }
        let done = env.converged(&x, &next);
        x = next;
        if done {
            return Ok(SolveOutcome {
                x,
                iterations: iteration,
                converged: true,
                scheduler: None,
            });
        }
    }
    Err(SolverError::NotConverged {
        iterations: env.max_iterations,
        best: x,
    })
}

fn gauss_seidel(
    sys: &LinearSystem<f64>,
    env: &SolverEnvironment,
) -> Result<SolveOutcome<f64>, SolverError> {
    let n = sys.size();
    let diagonal = diagonal(sys)?;
    let mut x = sys.b.clone();
    let mut previous = x.clone();
    for iteration in 1..=env.max_iterations {
        previous.copy_from_slice(&x);
        for i in 0..n {
            let mut acc = sys.b[i];
            for (j, a) in sys.matrix.row(i) {
                if j != i {
                    acc += a * x[j];
                }
            }
            x[i] = acc / (1.0 - diagonal[i]);
        }
        if env.converged(&previous, &x) {
            return Ok(SolveOutcome {
                x,
                iterations: iteration,
                converged: true,
                scheduler: None,
            });
        }
    }
    Err(SolverError::NotConverged {
        iterations: env.max_iterations,
        best: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_sparse, SparseMatrix};
    use crate::solvers::Criterion;

    fn env(method: LinearMethod) -> SolverEnvironment {
        SolverEnvironment {
            linear_method: method,
            ..SolverEnvironment::default()
        }
    }

    #[test]
    fn zero_matrix_returns_b_in_one_iteration() {
        let sys = LinearSystem::new(SparseMatrix::zero(3, 3), vec![0.1, 0.2, 0.3]).unwrap();
        for method in [LinearMethod::Jacobi, LinearMethod::GaussSeidel] {
            let out = solve_linear(&sys, &env(method)).unwrap();
            assert_eq!(out.x, vec![0.1, 0.2, 0.3]);
            assert_eq!(out.iterations, 1);
        }
    }

    #[test]
    fn geometric_series() {
        let sys = LinearSystem::new(build_sparse(vec![(0, 0, 0.5)], 1, 1).unwrap(), vec![0.5]).unwrap();
        // Dividing out the diagonal makes a lone self-loop exact.
        for method in [LinearMethod::Jacobi, LinearMethod::GaussSeidel] {
            assert_eq!(solve_linear(&sys, &env(method)).unwrap().x[0], 1.0);
        }
        let e = solve_linear(&sys, &env(LinearMethod::Exact)).unwrap();
        assert_eq!(e.x[0], 1.0);
    }

    #[test]
    fn diagonal_one_is_rejected() {
        let sys = LinearSystem::new(build_sparse(vec![(0, 0, 1.0)], 1, 1).unwrap(), vec![0.0]).unwrap();
        assert_eq!(
            solve_linear(&sys, &env(LinearMethod::GaussSeidel)),
            Err(SolverError::DiagonalOne(0))
        );
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let sys = LinearSystem::new(build_sparse(vec![(0, 1, 0.99), (1, 0, 0.99)], 2, 2).unwrap(), vec![0.01, 0.0]).unwrap();
        let mut e = env(LinearMethod::Jacobi);
        e.max_iterations = 3;
        e.criterion = Criterion::Absolute;
        match solve_linear(&sys, &e) {
            Err(SolverError::NotConverged { iterations, best }) => {
                assert_eq!(iterations, 3);
                assert!(best[0] > 0.01 && best[0] < 1.0);
            }
            other => panic!("unexpected {:?}", other),
        }
    }
}
