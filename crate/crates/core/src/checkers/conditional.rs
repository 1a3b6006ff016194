//! Conditional probabilities `P(φ | ψ)` on DTMCs for until formulas.
//!
//! The numerator `P(φ ∧ ψ)` is a reachability probability in the product of
//! the chain with a monitor that remembers which of the two formulas is
//! already satisfied. Once either formula is violated the product moves to a
//! sink; once both hold it moves to a goal. Each original state therefore
//! contributes at most three monitor states, plus the shared goal and sink.

use super::discrete::check_until;
use super::{CheckError, Quantity};
use crate::model::{Model, ModelKind, SparseMatrix};
use crate::solvers::{Solve, SolverEnvironment};
use crate::BitSet;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pending,
    Holds,
    Fails,
}

fn advance(status: Status, state: usize, (left, right): (&BitSet, &BitSet)) -> Status {
    match status {
        Status::Pending if right.contains(state) => Status::Holds,
        Status::Pending if !left.contains(state) => Status::Fails,
        other => other,
    }
}

const GOAL: usize = 0;
const SINK: usize = 1;

/// Monitor position of a product state.
#[derive(Clone, Copy)]
enum Monitor {
    Goal,
    Sink,
    /// Index into `[Pending/Pending, Holds/Pending, Pending/Holds]`.
    Track(usize),
}

fn monitor(objective: Status, condition: Status) -> Monitor {
    match (objective, condition) {
        (Status::Fails, _) | (_, Status::Fails) => Monitor::Sink,
        (Status::Holds, Status::Holds) => Monitor::Goal,
        (Status::Pending, Status::Pending) => Monitor::Track(0),
        (Status::Holds, Status::Pending) => Monitor::Track(1),
        (Status::Pending, Status::Holds) => Monitor::Track(2),
    }
}

fn statuses(track: usize) -> (Status, Status) {
    match track {
        0 => (Status::Pending, Status::Pending),
        1 => (Status::Holds, Status::Pending),
        _ => (Status::Pending, Status::Holds),
    }
}

/// The product chain and, per original state, the product state it starts
/// in.
pub struct ConditionalProduct<T> {
    pub model: Model<T>,
    pub start: Vec<usize>,
    pub goal: usize,
}

/// Builds the product of `model` with the monitor for
/// `objective = (left, right)` and `condition = (left, right)`.
pub fn build_product<T: Solve>(
    model: &Model<T>,
    objective: (&BitSet, &BitSet),
    condition: (&BitSet, &BitSet),
) -> Result<ConditionalProduct<T>, CheckError> {
    let n = model.state_count();
    let mut index = vec![usize::MAX; 3 * n];
    let mut queue: Vec<(usize, usize)> = Vec::new();
    let mut next_id = 2;
    let mut locate = |s: usize, m: Monitor, queue: &mut Vec<(usize, usize)>| match m {
        Monitor::Goal => GOAL,
        Monitor::Sink => SINK,
        Monitor::Track(k) => {
            let slot = 3 * s + k;
            if index[slot] == usize::MAX {
                index[slot] = next_id;
                next_id += 1;
                queue.push((s, k));
            }
            index[slot]
        }
    };
    let start: Vec<usize> = (0..n)
        .map(|s| {
            let m = monitor(
                advance(Status::Pending, s, objective),
                advance(Status::Pending, s, condition),
            );
            locate(s, m, &mut queue)
        })
        .collect();

    let mut rows: Vec<Vec<(usize, T)>> = vec![vec![(GOAL, T::one())], vec![(SINK, T::one())]];
    let mut head = 0;
    while head < queue.len() {
        let (s, k) = queue[head];
        head += 1;
        let (obj, cond) = statuses(k);
        let mut row = Vec::new();
        for (t, p) in model.matrix().row(s) {
            let m = monitor(advance(obj, t, objective), advance(cond, t, condition));
            row.push((locate(t, m, &mut queue), p.clone()));
        }
        rows.push(row);
    }
    let size = rows.len();
    let matrix = SparseMatrix::from_rows(rows, size)?;
    let product = Model::new(ModelKind::Dtmc, matrix, None, None)?;
    Ok(ConditionalProduct {
        model: product,
        start,
        goal: GOAL,
    })
}

/// Result of a conditional query.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditional<T> {
    /// `Undefined` where the condition has probability zero.
    pub values: Vec<Quantity<T>>,
    /// States where the condition has probability zero.
    pub condition_zero: Vec<usize>,
    pub iterations: u64,
}

/// `P(objective | condition)` per state, where both are until formulas
/// given as `(left, right)` pairs.
pub fn check_conditional<T: Solve>(
    model: &Model<T>,
    objective: (&BitSet, &BitSet),
    condition: (&BitSet, &BitSet),
    env: &SolverEnvironment,
) -> Result<Conditional<T>, CheckError> {
    if model.kind() != ModelKind::Dtmc {
        return Err(CheckError::UnsupportedCombination(
            "conditional probabilities are supported on DTMCs only".into(),
        ));
    }
    let product = build_product(model, objective, condition)?;
    let n_product = product.model.state_count();
    let mut all = BitSet::with_capacity(n_product);
    all.insert_range(..);
    let goal = crate::bitset_from(n_product, [product.goal]);
    let numerator = check_until(&product.model, &all, &goal, env)?;
    let denominator = check_until(model, condition.0, condition.1, env)?;
    let mut condition_zero = Vec::new();
    let values = product
        .start
        .iter()
        .zip(&denominator.values)
        .enumerate()
        .map(|(s, (&p, den))| {
            if den.is_zero() {
                condition_zero.push(s);
                Quantity::Undefined
            } else {
                // Both sides are approximated independently, so a float
                // numerator can exceed the denominator by the tolerance.
                let num = &numerator.values[p];
                let num = if num > den { den } else { num };
                Quantity::Finite(num.clone() / den.clone())
            }
        })
        .collect();
    Ok(Conditional {
        values,
        condition_zero,
        iterations: numerator.iterations + denominator.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitset_from;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn three_branches() {
        // 0 -> 1 {a, b}, 2 {b}, 3 {} with 1/3 each; all absorbing.
        let t = q(1, 3);
        let triples = vec![
            (0, 1, t.clone()),
            (0, 2, t.clone()),
            (0, 3, t),
            (1, 1, q(1, 1)),
            (2, 2, q(1, 1)),
            (3, 3, q(1, 1)),
        ];
        let m = Model::new(ModelKind::Dtmc, SparseMatrix::from_triples(triples, 4, 4).unwrap(), None, None).unwrap();
        let all = bitset_from(4, 0..4);
        let a = bitset_from(4, [1]);
        let b = bitset_from(4, [1, 2]);
        let out = check_conditional(&m, (&all, &a), (&all, &b), &SolverEnvironment::default()).unwrap();
        assert_eq!(out.values[0], Quantity::Finite(q(1, 2)));
        assert_eq!(out.values[1], Quantity::Finite(q(1, 1)));
        assert_eq!(out.values[2], Quantity::Finite(q(0, 1)));
        assert_eq!(out.values[3], Quantity::Undefined);
        assert_eq!(out.condition_zero, vec![3]);
        let product = build_product(&m, (&all, &a), (&all, &b)).unwrap();
        assert!(product.model.state_count() <= 4 * 4);
    }
}
