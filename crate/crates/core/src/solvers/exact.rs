use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use super::{LinearSystem, SolverError};
use crate::model::SparseMatrix;
use crate::scalar::Rational;

/// Converts a floating-point system into rationals without rounding.
pub fn to_rational_system(sys: &LinearSystem<f64>) -> Result<LinearSystem<Rational>, SolverError> {
    let convert = |v: f64| {
        Rational::from_float(v)
            .ok_or_else(|| SolverError::DimensionMismatch(format!("non-finite value {}", v)))
    };
    let mut rows = vec![Vec::new(); sys.size()];
    for (r, c, v) in sys.matrix.triples() {
        rows[r].push((c, convert(*v)?));
    }
    let matrix = SparseMatrix::from_rows(rows, sys.matrix.cols())
        .map_err(|e| SolverError::DimensionMismatch(e.to_string()))?;
    let b = sys.b.iter().map(|&v| convert(v)).collect::<Result<_, _>>()?;
    LinearSystem::new(matrix, b)
}

/// Solves `(I - A)·x = b` exactly by sparse Gaussian elimination.
///
/// The pivot of each column is the candidate row of largest magnitude
/// (partial pivoting); ties go to the lowest row index.
pub fn solve_linear_exact(sys: &LinearSystem<Rational>) -> Result<Vec<Rational>, SolverError> {
    let n = sys.size();
    if sys.matrix.rows() != n || sys.matrix.cols() != n {
        return Err(SolverError::DimensionMismatch(format!(
            "{}x{} matrix with {} right-hand sides",
            sys.matrix.rows(),
            sys.matrix.cols(),
            n
        )));
    }

    // rows[i]: sparse row of (I - A), rhs[i]: b_i
    let mut rows: Vec<BTreeMap<usize, Rational>> = vec![BTreeMap::new(); n];
    for (r, c, v) in sys.matrix.triples() {
        rows[r].insert(c, -v.clone());
    }
    for (i, row) in rows.iter_mut().enumerate() {
        let entry = row.entry(i).or_insert_with(Rational::zero);
        *entry += Rational::one();
        if entry.is_zero() {
            row.remove(&i);
        }
    }
    let mut rhs = sys.b.clone();

    // column -> rows with a nonzero entry in that column
    let mut column_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for &c in row.keys() {
            column_rows[c].insert(i);
        }
    }

    let mut pivoted = vec![false; n];
    let mut pivot_of_column = vec![usize::MAX; n];
    for col in 0..n {
        let pivot = column_rows[col]
            .iter()
            .copied()
            .filter(|&r| !pivoted[r])
            .fold(None::<(usize, Rational)>, |best, r| {
                let magnitude = rows[r][&col].abs();
                match best {
                    Some((_, ref m)) if *m >= magnitude => best,
                    _ => Some((r, magnitude)),
                }
            })
            .map(|(r, _)| r)
            .ok_or(SolverError::SingularMatrix)?;
        pivoted[pivot] = true;
        pivot_of_column[col] = pivot;

        let pivot_row: Vec<(usize, Rational)> =
            rows[pivot].iter().map(|(&c, v)| (c, v.clone())).collect();
        let pivot_value = rows[pivot][&col].clone();
        let pivot_rhs = rhs[pivot].clone();
        let targets: Vec<usize> = column_rows[col]
            .iter()
            .copied()
            .filter(|&r| !pivoted[r])
            .collect();
        for r in targets {
            let factor = rows[r][&col].clone() / &pivot_value;
            for (c, v) in &pivot_row {
                let updated = rows[r].get(c).cloned().unwrap_or_else(Rational::zero) - &factor * v;
                if updated.is_zero() {
                    rows[r].remove(c);
                    column_rows[*c].remove(&r);
                } else {
                    rows[r].insert(*c, updated);
                    column_rows[*c].insert(r);
                }
            }
            rhs[r] = rhs[r].clone() - &factor * &pivot_rhs;
        }
    }

    // Pivot rows form an upper-triangular system in column order.
    let mut x = vec![Rational::zero(); n];
    for col in (0..n).rev() {
        let p = pivot_of_column[col];
        let mut acc = rhs[p].clone();
        for (&c, v) in rows[p].range(col + 1..) {
            acc -= v * &x[c];
        }
        x[col] = acc / &rows[p][&col];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_sparse;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn zero_matrix_is_identity_solve() {
        let sys = LinearSystem::new(SparseMatrix::zero(2, 2), vec![q(1, 3), q(2, 7)]).unwrap();
        assert_eq!(solve_linear_exact(&sys).unwrap(), vec![q(1, 3), q(2, 7)]);
    }

    #[test]
    fn one_by_one_closed_form() {
        let m = build_sparse(vec![(0, 0, q(1, 2))], 1, 1).unwrap();
        let sys = LinearSystem::new(m, vec![q(1, 2)]).unwrap();
        assert_eq!(solve_linear_exact(&sys).unwrap(), vec![q(1, 1)]);
    }

    #[test]
    fn singular_system() {
        let m = build_sparse(vec![(0, 1, q(1, 1)), (1, 0, q(1, 1))], 2, 2).unwrap();
        let sys = LinearSystem::new(m, vec![q(0, 1), q(0, 1)]).unwrap();
        assert_eq!(solve_linear_exact(&sys), Err(SolverError::SingularMatrix));
    }

    #[test]
    fn needs_pivoting() {
        // (I - A) = [[0, -1], [-1/2, 1]]: first column pivot must come from row 1.
        let m = build_sparse(vec![(0, 0, q(1, 1)), (0, 1, q(1, 1)), (1, 0, q(1, 2))], 2, 2).unwrap();
        let sys = LinearSystem::new(m, vec![q(-1, 1), q(1, 1)]).unwrap();
        let x = solve_linear_exact(&sys).unwrap();
        // -x1 = -1 -> x1 = 1; -x0/2 + x1 = 1 -> x0 = 0
        assert_eq!(x, vec![q(0, 1), q(1, 1)]);
    }
}
