//! Step-based operators and unbounded reachability on the (embedded) jump
//! chain: next, bounded until, until, reachability and cumulative rewards.

use super::ec::collapse_zero_reward_ecs;
use super::{method_name, CheckError, Quantity, Solved};
use crate::model::{prob0, prob01_max, prob01_min, prob1};
use crate::model::{Model, RewardModel, SparseMatrix};
use crate::scalar::Scalar;
use crate::solvers::{matvec, reduce, BellmanSystem, Direction, LinearSystem, Solve, SolverEnvironment};
use crate::BitSet;

fn indicator<T: Scalar>(set: &BitSet, n: usize) -> Vec<T> {
    (0..n).map(|s| if set.contains(s) { T::one() } else { T::zero() }).collect()
}

fn full(n: usize) -> BitSet {
    let mut set = BitSet::with_capacity(n);
    set.insert_range(..);
    set
}

/// `A·x` per choice, reduced to one value per state when `direction` is
/// given.
fn step<T: Scalar>(model: &Model<T>, x: &[T], direction: Option<Direction>) -> Vec<T> {
    let per_choice = matvec(model.matrix(), x).expect("vector sized to the model");
    match direction {
        Some(d) => reduce(&per_choice, model.choice_offsets(), d),
        None if model.kind().is_nondeterministic() => {
            reduce(&per_choice, model.choice_offsets(), Direction::Maximize)
        }
        None => per_choice,
    }
}

/// Probability of moving into `target` in one step.
///
/// CTMCs use their embedded chain. `direction` is needed on MDPs.
pub fn check_next<T: Scalar>(model: &Model<T>, target: &BitSet, direction: Option<Direction>) -> Vec<T> {
    let x = indicator(target, model.state_count());
    step(model, &x, direction)
}

/// Probability of `left U<=k right`: reaching `right` within `k` steps
/// through `left` states.
pub fn check_bounded_until<T: Scalar>(
    model: &Model<T>,
    left: &BitSet,
    right: &BitSet,
    k: u64,
    direction: Option<Direction>,
) -> Vec<T> {
    let n = model.state_count();
    let mut x: Vec<T> = indicator(right, n);
    let mut maybe = left.clone();
    maybe.difference_with(right);
    if maybe.count_ones(..) == 0 {
        return x;
    }
    for _ in 0..k {
        let next = step(model, &x, direction);
        for s in maybe.ones() {
            x[s] = next[s].clone();
        }
    }
    x
}

/// Rows of the maybe states, reindexed, with transitions into settled
/// states folded into the constant term.
pub(crate) struct Restricted<T> {
    pub matrix: SparseMatrix<T>,
    pub offsets: Vec<usize>,
    pub b: Vec<T>,
    /// Original index of each restricted state.
    pub states: Vec<usize>,
    /// Original local choice index of each restricted row.
    pub local_choice: Vec<usize>,
    /// Rows with a transition out of the maybe states.
    pub leaks: Vec<bool>,
}

impl<T> Restricted<T> {
    fn original_choices(&self, local: &[usize]) -> Vec<Option<usize>> {
        local
            .iter()
            .enumerate()
            .map(|(i, &l)| Some(self.local_choice[self.offsets[i] + l]))
            .collect()
    }
}

/// `fixed[j]` is the settled value of state `j` outside `maybe`; `extra`
/// adds a per-choice constant; `allow` filters choices.
fn restrict<T: Scalar>(
    model: &Model<T>,
    maybe: &BitSet,
    fixed: &[T],
    extra: Option<&[T]>,
    allow: impl Fn(usize) -> bool,
) -> Restricted<T> {
    let mut index = vec![usize::MAX; model.state_count()];
    let states: Vec<usize> = maybe.ones().collect();
    for (i, &s) in states.iter().enumerate() {
        index[s] = i;
    }
    let mut rows = Vec::new();
    let mut offsets = vec![0];
    let mut b = Vec::new();
    let mut local_choice = Vec::new();
    let mut leaks = Vec::new();
    for &s in &states {
        let base = model.choice_offsets()[s];
        for c in model.choices(s) {
            if !allow(c) {
                continue;
            }
            let mut row = Vec::new();
            let mut leak = false;
            let mut constant = extra.map_or_else(T::zero, |e| e[c].clone());
            for (t, v) in model.matrix().row(c) {
                if index[t] != usize::MAX {
                    row.push((index[t], v.clone()));
                } else {
                    leak = true;
                    if !fixed[t].is_zero() {
                        constant = constant + v.clone() * fixed[t].clone();
                    }
                }
            }
            rows.push(row);
            b.push(constant);
            local_choice.push(c - base);
            leaks.push(leak);
        }
        offsets.push(rows.len());
    }
    let matrix = SparseMatrix::from_rows(rows, states.len()).expect("indices within range");
    Restricted {
        matrix,
        offsets,
        b,
        states,
        local_choice,
        leaks,
    }
}

/// Solves a restricted system. The scheduler holds, per restricted state, a
/// local index into its restricted rows.
fn solve_restricted<T: Solve>(
    r: &Restricted<T>,
    direction: Option<Direction>,
    env: &SolverEnvironment,
) -> Result<(Vec<T>, u64, Option<Vec<usize>>), CheckError> {
    if r.states.is_empty() {
        return Ok((Vec::new(), 0, None));
    }
    match direction {
        None => {
            let sys = LinearSystem::new(r.matrix.clone(), r.b.clone())?;
            let out = T::solve_linear_system(&sys, env)?;
            Ok((out.x, out.iterations, None))
        }
        Some(d) => {
            let sys = BellmanSystem::new(r.matrix.clone(), r.offsets.clone(), r.b.clone(), d)?;
            let out = T::solve_bellman_system(&sys, env)?;
            Ok((out.x, out.iterations, out.scheduler))
        }
    }
}

fn method<T: Solve>(env: &SolverEnvironment, direction: Option<Direction>, solved: bool) -> String {
    if solved {
        method_name::<T>(env, direction.is_some()).to_string()
    } else {
        "graph".to_string()
    }
}

/// Probability of `left U right` on a DTMC, or on the embedded chain of a
/// CTMC.
///
/// States with probability 0 or 1 are found by graph search; the rest solve
/// `x = A·x + b` where `b` is the one-step mass into probability-1 states.
pub fn check_until<T: Solve>(
    model: &Model<T>,
    left: &BitSet,
    right: &BitSet,
    env: &SolverEnvironment,
) -> Result<Solved<T>, CheckError> {
    if model.kind().is_nondeterministic() {
        return Err(CheckError::UnsupportedCombination(
            "MDPs need a min/max direction".into(),
        ));
    }
    let n = model.state_count();
    let p0 = prob0(model, left, right);
    let p1 = prob1(model, left, right, &p0);
    let mut maybe = full(n);
    maybe.difference_with(&p0);
    maybe.difference_with(&p1);
    let mut values = indicator(&p1, n);
    let r = restrict(model, &maybe, &values, None, |_| true);
    let states = r.states.clone();
    let (x, iterations, _) = solve_restricted(&r, None, env)?;
    for (&s, v) in states.iter().zip(x) {
        values[s] = v;
    }
    debug_assert_probabilities(&values);
    Ok(Solved {
        values,
        iterations,
        method: method::<T>(env, None, !states.is_empty()),
        scheduler: None,
    })
}

/// Unbounded until on a CTMC: the embedded chain decides it.
pub fn check_until_ctmc_unbounded<T: Solve>(
    model: &Model<T>,
    left: &BitSet,
    right: &BitSet,
    env: &SolverEnvironment,
) -> Result<Solved<T>, CheckError> {
    check_until(model, left, right, env)
}

/// Minimal or maximal probability of `left U right` on an MDP, with an
/// optimal memoryless scheduler.
///
/// The scheduler lists a local choice for every state whose value needed a
/// numerical solve; states settled by graph search have `None`.
pub fn check_until_mdp<T: Solve>(
    model: &Model<T>,
    left: &BitSet,
    right: &BitSet,
    direction: Direction,
    env: &SolverEnvironment,
) -> Result<Solved<T>, CheckError> {
    let n = model.state_count();
    let (p0, p1) = match direction {
        Direction::Maximize => prob01_max(model, left, right),
        Direction::Minimize => prob01_min(model, left, right),
    };
    let mut maybe = full(n);
    maybe.difference_with(&p0);
    maybe.difference_with(&p1);
    let mut values = indicator(&p1, n);
    let r = restrict(model, &maybe, &values, None, |_| true);
    let states = r.states.clone();
    let (x, iterations, sched) = solve_restricted(&r, Some(direction), env)?;
    for (&s, v) in states.iter().zip(x) {
        values[s] = v;
    }
    debug_assert_probabilities(&values);
    let scheduler = scatter(n, &states, sched.map(|l| r.original_choices(&l)));
    Ok(Solved {
        values,
        iterations,
        method: method::<T>(env, Some(direction), !states.is_empty()),
        scheduler,
    })
}

fn scatter(n: usize, states: &[usize], sched: Option<Vec<Option<usize>>>) -> Option<Vec<Option<usize>>> {
    let mut out = vec![None; n];
    for (&s, c) in states.iter().zip(sched?) {
        out[s] = c;
    }
    Some(out)
}

fn debug_assert_probabilities<T: Scalar>(values: &[T]) {
    debug_assert!(
        values.iter().all(|v| {
            let f = v.to_f64();
            (-1e-12..=1.0 + 1e-12).contains(&f)
        }),
        "probability outside [0, 1]"
    );
}

/// Reward collected per choice. On CTMCs state rewards are rates, so the
/// expected reward of a visit is the rate divided by the exit rate.
pub(crate) fn choice_rewards<T: Scalar>(model: &Model<T>, reward: &RewardModel<T>, per_visit: bool) -> Vec<T> {
    match (per_visit, model.exit_rates(), reward.state_rewards()) {
        (true, Some(rates), Some(state)) => {
            let scaled: Vec<T> = state
                .iter()
                .zip(rates)
                .map(|(r, e)| r.clone() / e.clone())
                .collect();
            let m = RewardModel::new(reward.name(), Some(scaled), reward.action_rewards().map(<[T]>::to_vec))
                .expect("scaling keeps rewards nonnegative");
            m.choice_rewards(model.choice_offsets())
        }
        _ => reward.choice_rewards(model.choice_offsets()),
    }
}

/// Expected reward accumulated until reaching `target` on a DTMC (or the
/// embedded chain of a CTMC). States that miss `target` with positive
/// probability get `Infinite`.
pub fn check_reach_reward<T: Solve>(
    model: &Model<T>,
    reward: &RewardModel<T>,
    target: &BitSet,
    env: &SolverEnvironment,
) -> Result<Solved<Quantity<T>>, CheckError> {
    if model.kind().is_nondeterministic() {
        return Err(CheckError::UnsupportedCombination(
            "MDPs need a min/max direction".into(),
        ));
    }
    let n = model.state_count();
    let all = full(n);
    let p0 = prob0(model, &all, target);
    let finite = prob1(model, &all, target, &p0);
    let mut maybe = finite.clone();
    maybe.difference_with(target);
    let rewards = choice_rewards(model, reward, true);
    let zeros = vec![T::zero(); n];
    let r = restrict(model, &maybe, &zeros, Some(&rewards), |_| true);
    let states = r.states.clone();
    let (x, iterations, _) = solve_restricted(&r, None, env)?;
    let values = assemble_rewards(n, &finite, &states, x);
    Ok(Solved {
        values,
        iterations,
        method: method::<T>(env, None, !states.is_empty()),
        scheduler: None,
    })
}

fn assemble_rewards<T: Scalar>(n: usize, finite: &BitSet, states: &[usize], x: Vec<T>) -> Vec<Quantity<T>> {
    let mut values: Vec<Quantity<T>> = (0..n)
        .map(|s| {
            if finite.contains(s) {
                Quantity::Finite(T::zero())
            } else {
                Quantity::Infinite
            }
        })
        .collect();
    for (&s, v) in states.iter().zip(x) {
        values[s] = Quantity::Finite(v);
    }
    values
}

/// Minimal or maximal expected reward until reaching `target` on an MDP.
///
/// Maximizing, a state is infinite unless every scheduler reaches `target`
/// almost surely; minimizing, unless some scheduler does. Zero-reward end
/// components are collapsed before a minimizing solve so that the least
/// fixed point is the true minimum.
pub fn check_reach_reward_mdp<T: Solve>(
    model: &Model<T>,
    reward: &RewardModel<T>,
    target: &BitSet,
    direction: Direction,
    env: &SolverEnvironment,
) -> Result<Solved<Quantity<T>>, CheckError> {
    let n = model.state_count();
    let all = full(n);
    let finite = match direction {
        Direction::Maximize => prob01_min(model, &all, target).1,
        Direction::Minimize => prob01_max(model, &all, target).1,
    };
    let mut maybe = finite.clone();
    maybe.difference_with(target);
    let rewards = choice_rewards(model, reward, true);
    let zeros = vec![T::zero(); n];
    // Choices that may leave the finite region are never optimal for a
    // minimizer and never available to a maximizer's finite states.
    let stays = |c: usize| model.matrix().row(c).all(|(t, _)| finite.contains(t));
    let r = restrict(model, &maybe, &zeros, Some(&rewards), stays);
    let states = r.states.clone();
    let (x, iterations, sched) = match direction {
        Direction::Maximize => {
            let (x, iterations, sched) = solve_restricted(&r, Some(direction), env)?;
            (x, iterations, sched.map(|l| r.original_choices(&l)))
        }
        Direction::Minimize => {
            let collapsed = collapse_zero_reward_ecs(r);
            let (y, iterations, sched) = solve_restricted(&collapsed.system, Some(direction), env)?;
            let x = collapsed.members.iter().map(|&q| y[q].clone()).collect();
            let sched = sched.map(|s| collapsed.expand_scheduler(&s));
            (x, iterations, sched)
        }
    };
    let values = assemble_rewards(n, &finite, &states, x);
    let scheduler = scatter(n, &states, sched);
    Ok(Solved {
        values,
        iterations,
        method: method::<T>(env, Some(direction), !states.is_empty()),
        scheduler,
    })
}

/// Expected reward collected in the first `k` steps: `x ← r + A·x` from
/// `x = 0`, reduced per state on MDPs.
pub fn check_cumulative_reward<T: Scalar>(
    model: &Model<T>,
    reward: &RewardModel<T>,
    k: u64,
    direction: Option<Direction>,
) -> Result<Vec<T>, CheckError> {
    if model.kind().is_continuous() {
        return Err(CheckError::ContinuousTimeUnsupported(
            "cumulative rewards on CTMCs".into(),
        ));
    }
    let rewards = choice_rewards(model, reward, false);
    let mut x = vec![T::zero(); model.state_count()];
    for _ in 0..k {
        let mut per_choice = matvec(model.matrix(), &x).expect("vector sized to the model");
        for (v, r) in per_choice.iter_mut().zip(&rewards) {
            *v = v.clone() + r.clone();
        }
        x = match direction {
            Some(d) => reduce(&per_choice, model.choice_offsets(), d),
            None => per_choice,
        };
    }
    Ok(x)
}
