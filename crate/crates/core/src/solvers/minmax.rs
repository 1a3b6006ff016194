use super::{
    reduce, BellmanSystem, MinMaxMethod, Solve, SolveOutcome, SolverEnvironment,
    SolverError,
};
use crate::scalar::{Rational, Scalar};

/// Solves a Bellman system over floats with the method selected in `env`.
///
/// The system must be preprocessed so that its optimum is the least fixed
/// point above zero. Value iteration starts at `x = 0` and stops on the
/// convergence criterion, which can stop short of the true optimum on slowly
/// converging systems. Policy iteration alternates linear solves (with
/// `env.linear_method`) and greedy improvement until the scheduler is stable.
pub fn solve_minmax(
    sys: &BellmanSystem<f64>,
    env: &SolverEnvironment,
) -> Result<SolveOutcome<f64>, SolverError> {
    env.validate()?;
    match env.minmax_method {
        MinMaxMethod::ValueIteration => value_iteration(sys, env),
        MinMaxMethod::PolicyIteration => policy_iteration(sys, env, Some(env.precision)),
    }
}

/// Policy iteration with exact rational linear solves.
pub fn solve_minmax_exact(
    sys: &BellmanSystem<Rational>,
    env: &SolverEnvironment,
) -> Result<SolveOutcome<Rational>, SolverError> {
    env.validate()?;
    policy_iteration(sys, env, None)
}

fn value_iteration(
    sys: &BellmanSystem<f64>,
    env: &SolverEnvironment,
) -> Result<SolveOutcome<f64>, SolverError> {
    let mut x = vec![0.0; sys.states()];
    for iteration in 1..=env.max_iterations {
        let mut per_choice = sys.matrix.multiply(&x);
        for (v, b) in per_choice.iter_mut().zip(&sys.b) {
            *v += b;
        }
        let next = reduce(&per_choice, &sys.choice_offsets, sys.direction);
        if cfg!(debug_assertions) && iteration % 1000 == 0 {
            debug_assert!(
                x.iter().zip(&next).all(|(o, n)| *n >= *o - 1e-12),
                "value iteration lost monotonicity"
            );
        }
        let done = env.converged(&x, &next);
        x = next;
        if done {
            let scheduler = sys.greedy_scheduler(&x);
            return Ok(SolveOutcome {
                x,
                iterations: iteration,
                converged: true,
                scheduler: Some(scheduler),
            });
        }
    }
    Err(SolverError::NotConverged {
        iterations: env.max_iterations,
        best: x,
    })
}

/// `tolerance`: relative margin a choice must win by to replace the current
/// one (floats); `None` demands strict exact improvement.
fn policy_iteration<T: Solve>(
    sys: &BellmanSystem<T>,
    env: &SolverEnvironment,
    tolerance: Option<f64>,
) -> Result<SolveOutcome<T>, SolverError> {
    let mut scheduler = proper_initial_scheduler(sys);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let induced = sys.induced(&scheduler);
        let x = T::solve_linear_system(&induced, env)?.x;
        let mut changed = false;
        for s in 0..sys.states() {
            let base = sys.choice_offsets[s];
            let mut best_value = sys.choice_value(base + scheduler[s], &x);
            let incumbent = best_value.clone();
            for c in base..sys.choice_offsets[s + 1] {
                let v = sys.choice_value(c, &x);
                let wins = sys.direction.improves(&v, &best_value)
                    && match tolerance {
                        None => true,
                        Some(tol) => {
                            let margin = tol * incumbent.to_f64().abs().max(1.0);
                            (v.to_f64() - incumbent.to_f64()).abs() > margin
                        }
                    };
                if wins {
                    best_value = v;
                    scheduler[s] = c - base;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(SolveOutcome {
                x,
                iterations,
                converged: true,
                scheduler: Some(scheduler),
            });
        }
        if iterations >= env.max_iterations {
            return Err(SolverError::NotConverged {
                iterations,
                best: x.iter().map(Scalar::to_f64).collect(),
            });
        }
    }
}

/// Lowest-index scheduler, repaired so that from every state the chosen
/// choices leave the system with positive probability. Linear systems
/// induced by such a scheduler are nonsingular.
fn proper_initial_scheduler<T: Scalar>(sys: &BellmanSystem<T>) -> Vec<usize> {
    let n = sys.states();
    let leaks: Vec<bool> = sys
        .matrix
        .row_sums()
        .iter()
        .map(|sum| {
            if T::EXACT {
                *sum < T::one()
            } else {
                sum.to_f64() < 1.0 - 1e-12
            }
        })
        .collect();
    let mut scheduler = vec![0usize; n];
    let mut good: Vec<bool> = (0..n).map(|s| leaks[sys.choice_offsets[s]]).collect();
    let reaches_good = |c: usize, good: &[bool]| leaks[c] || sys.matrix.row(c).any(|(t, _)| good[t]);
    loop {
        let mut changed = false;
        for s in 0..n {
            if good[s] {
                continue;
            }
            let base = sys.choice_offsets[s];
            if reaches_good(base + scheduler[s], &good) {
                good[s] = true;
                changed = true;
            } else if let Some(c) = (base..sys.choice_offsets[s + 1]).find(|&c| reaches_good(c, &good)) {
                scheduler[s] = c - base;
                good[s] = true;
                changed = true;
            }
        }
        if !changed {
            return scheduler;
        }
    }
}
