//! Model checking: turns resolved properties into graph precomputation and
//! solver calls for each model type.
//!
//! ```
//! use stormlet::checkers::{check_property, Quantity};
//! use stormlet::model::{Model, ModelKind, SparseMatrix};
//! use stormlet::property::parse_property;
//! use stormlet::solvers::SolverEnvironment;
//!
//! // 0 loops with probability 1/2 and moves to the goal 1 otherwise.
//! let m = SparseMatrix::from_triples(vec![(0, 0, 0.5), (0, 1, 0.5), (1, 1, 1.0)], 2, 2).unwrap();
//! let mut model = Model::new(ModelKind::Dtmc, m, None, None).unwrap();
//! model.add_label("goal", stormlet::bitset_from(2, [1])).unwrap();
//!
//! let p = parse_property(r#"P=? [ F "goal" ]"#).unwrap();
//! let result = check_property(&model, None, &p, &SolverEnvironment::default()).unwrap();
//! assert_eq!(result.values[0], Quantity::Finite(1.0));
//! ```

mod conditional;
mod ctmc;
mod discrete;
mod ec;

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use conditional::{build_product, check_conditional, Conditional, ConditionalProduct};
pub use ctmc::{check_timebounded_until_ctmc, UNIFORMIZATION_FACTOR};
pub use discrete::{
    check_bounded_until, check_cumulative_reward, check_next, check_reach_reward, check_reach_reward_mdp,
    check_until, check_until_ctmc_unbounded, check_until_mdp,
};

use crate::model::{Model, ModelError};
use crate::prism::StateMap;
use crate::property::{
    resolve_atoms, Bound, Optimum, Property, PropertyError, RelOp, Resolved, ResolvedPath, ResolvedProb,
    ResolvedReward, ResolvedState, ResolvedTarget, StepBound,
};
use crate::scalar::Scalar;
use crate::solvers::{Direction, LinearMethod, MinMaxMethod, Solve, SolverEnvironment, SolverError};
use crate::BitSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("unsupported: {0}")]
    UnsupportedCombination(String),
    #[error("{}", missing_reward(.0))]
    MissingRewardModel(Option<String>),
    #[error("not supported on continuous-time models: {0}")]
    ContinuousTimeUnsupported(String),
    #[error("invalid bound: {0}")]
    InvalidBound(String),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn missing_reward(name: &Option<String>) -> String {
    match name {
        Some(n) => format!("no reward structure named \"{}\"", n),
        None => "no reward structure given and the model does not have exactly one".into(),
    }
}

/// A per-state result value.
#[derive(Clone, Debug, PartialEq)]
pub enum Quantity<T> {
    Finite(T),
    /// Expected reward of a state that misses the target with positive
    /// probability.
    Infinite,
    /// Conditional probability under a condition of probability zero.
    Undefined,
}

impl<T: Scalar> Quantity<T> {
    pub fn to_f64(&self) -> f64 {
        match self {
            Quantity::Finite(v) => v.to_f64(),
            Quantity::Infinite => f64::INFINITY,
            Quantity::Undefined => f64::NAN,
        }
    }

    pub fn finite(&self) -> Option<&T> {
        match self {
            Quantity::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Compares against a threshold. Infinity exceeds every threshold;
    /// undefined values satisfy no comparison.
    pub fn satisfies(&self, op: RelOp, threshold: &T) -> bool {
        match self {
            Quantity::Finite(v) => op.holds(v, threshold),
            Quantity::Infinite => matches!(op, RelOp::Gt | RelOp::Ge),
            Quantity::Undefined => false,
        }
    }
}

impl<T: Scalar> fmt::Display for Quantity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Finite(v) => f.write_str(&v.to_short()),
            Quantity::Infinite => f.write_str("inf"),
            Quantity::Undefined => f.write_str("NaN"),
        }
    }
}

/// Values and solver statistics of one operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Solved<V> {
    pub values: Vec<V>,
    pub iterations: u64,
    pub method: String,
    /// Local choice per state on MDPs; `None` where graph search settled the
    /// value.
    pub scheduler: Option<Vec<Option<usize>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metadata {
    /// Solver iterations summed over all operators.
    pub iterations: u64,
    pub method: String,
    /// Optimal choices of the outermost operator on MDPs.
    pub scheduler: Option<Vec<Option<usize>>>,
    /// States where a conditional probability is undefined.
    pub condition_zero: Vec<usize>,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult<T> {
    pub values: Vec<Quantity<T>>,
    /// For properties with a bound: whether each state satisfies it.
    pub truth: Option<Vec<bool>>,
    pub metadata: Metadata,
}

pub(crate) fn method_name<T: Scalar>(env: &SolverEnvironment, bellman: bool) -> &'static str {
    match (T::EXACT, bellman) {
        (true, false) => "exact",
        (true, true) => "policy-iteration/exact",
        (false, true) => match env.minmax_method {
            MinMaxMethod::ValueIteration => "value-iteration",
            MinMaxMethod::PolicyIteration => "policy-iteration",
        },
        (false, false) => match env.linear_method {
            LinearMethod::Jacobi => "jacobi",
            LinearMethod::GaussSeidel => "gauss-seidel",
            LinearMethod::Exact => "exact",
        },
    }
}

fn direction(optimum: Option<Optimum>) -> Option<Direction> {
    optimum.map(|o| match o {
        Optimum::Min => Direction::Minimize,
        Optimum::Max => Direction::Maximize,
    })
}

fn finite<T>(values: Vec<T>) -> Vec<Quantity<T>> {
    values.into_iter().map(Quantity::Finite).collect()
}

/// Operator values together with what the outermost call reports.
struct Numeric<T> {
    values: Vec<Quantity<T>>,
    scheduler: Option<Vec<Option<usize>>>,
    condition_zero: Vec<usize>,
}

impl<T> Numeric<T> {
    fn plain(values: Vec<Quantity<T>>) -> Self {
        Numeric {
            values,
            scheduler: None,
            condition_zero: Vec::new(),
        }
    }
}

struct Checker<'a, T> {
    model: &'a Model<T>,
    env: &'a SolverEnvironment,
    iterations: u64,
    method: Option<String>,
}

impl<T: Solve> Checker<'_, T> {
    fn record<V>(&mut self, solved: Solved<V>) -> (Vec<V>, Option<Vec<Option<usize>>>) {
        self.iterations += solved.iterations;
        if solved.method != "graph" || self.method.is_none() {
            self.method = Some(solved.method);
        }
        (solved.values, solved.scheduler)
    }

    fn note(&mut self, method: &str) {
        if self.method.is_none() {
            self.method = Some(method.to_string());
        }
    }

    fn all(&self) -> BitSet {
        let mut set = BitSet::with_capacity(self.model.state_count());
        set.insert_range(..);
        set
    }

    fn state(&mut self, f: &ResolvedState) -> Result<BitSet, CheckError> {
        Ok(match f {
            ResolvedState::Set(set) => set.clone(),
            ResolvedState::Not(inner) => {
                let mut set = self.state(inner)?;
                set.toggle_range(..);
                set
            }
            ResolvedState::And(l, r) => {
                let mut set = self.state(l)?;
                set.intersect_with(&self.state(r)?);
                set
            }
            ResolvedState::Or(l, r) => {
                let mut set = self.state(l)?;
                set.union_with(&self.state(r)?);
                set
            }
            ResolvedState::Prob(p) => {
                let values = self.prob(p, false)?.values;
                self.satisfying(&p.bound, &values)?
            }
            ResolvedState::Reward(r) => {
                let values = self.reward(r)?.values;
                self.satisfying(&r.bound, &values)?
            }
        })
    }

    fn satisfying(&self, bound: &Bound, values: &[Quantity<T>]) -> Result<BitSet, CheckError> {
        match truth_values(bound, values)? {
            Some(truth) => Ok(crate::bitset_from(
                values.len(),
                truth.iter().enumerate().filter(|(_, &t)| t).map(|(s, _)| s),
            )),
            None => Err(CheckError::UnsupportedCombination(
                "nested operators need a comparison bound".into(),
            )),
        }
    }

    fn until(
        &mut self,
        left: &BitSet,
        right: &BitSet,
        bound: &Option<StepBound>,
        dir: Option<Direction>,
    ) -> Result<(Vec<T>, Option<Vec<Option<usize>>>), CheckError> {
        let model = self.model;
        match bound {
            None => match dir {
                Some(d) if model.kind().is_nondeterministic() => {
                    Ok(self.record(check_until_mdp(model, left, right, d, self.env)?))
                }
                _ => Ok(self.record(check_until(model, left, right, self.env)?)),
            },
            Some(b) if model.kind().is_continuous() => {
                let t: f64 = b
                    .0
                    .parse()
                    .map_err(|_| CheckError::InvalidBound(format!("time bound {}", b.0)))?;
                let values = check_timebounded_until_ctmc(model, left, right, t, self.env)?;
                self.note("uniformization");
                let values = values
                    .into_iter()
                    .map(|v| T::from_f64(v).ok_or_else(|| CheckError::InvalidBound(format!("value {}", v))))
                    .collect::<Result<_, _>>()?;
                Ok((values, None))
            }
            Some(b) => {
                let k = step_count(b)?;
                self.note("bounded-iteration");
                Ok((check_bounded_until(model, left, right, k, dir), None))
            }
        }
    }

    fn path_sets(&mut self, path: &ResolvedPath) -> Result<(BitSet, BitSet), CheckError> {
        match path {
            ResolvedPath::Until { left, right, bound: None } => Ok((self.state(left)?, self.state(right)?)),
            _ => Err(CheckError::UnsupportedCombination(
                "conditional probabilities need unbounded until or eventually formulas".into(),
            )),
        }
    }

    fn prob(&mut self, p: &ResolvedProb, outermost: bool) -> Result<Numeric<T>, CheckError> {
        let dir = direction(p.optimum);
        if let Some(condition) = &p.condition {
            if !outermost {
                return Err(CheckError::UnsupportedCombination(
                    "conditional probabilities inside other operators".into(),
                ));
            }
            let objective = self.path_sets(&p.path)?;
            let condition = self.path_sets(condition)?;
            let out = check_conditional(
                self.model,
                (&objective.0, &objective.1),
                (&condition.0, &condition.1),
                self.env,
            )?;
            self.iterations += out.iterations;
            self.note(method_name::<T>(self.env, false));
            return Ok(Numeric {
                values: out.values,
                scheduler: None,
                condition_zero: out.condition_zero,
            });
        }
        let (values, scheduler) = match &p.path {
            ResolvedPath::Next(s) => {
                let target = self.state(s)?;
                self.note("matvec");
                (check_next(self.model, &target, dir), None)
            }
            ResolvedPath::Until { left, right, bound } => {
                let (l, r) = (self.state(left)?, self.state(right)?);
                self.until(&l, &r, bound, dir)?
            }
            ResolvedPath::Globally { inner, bound } => {
                // G φ = 1 - P(true U ¬φ), with the optimum flipped.
                let mut bad = self.state(inner)?;
                bad.toggle_range(..);
                let all = self.all();
                let (x, scheduler) = self.until(&all, &bad, bound, dir.map(Direction::flip))?;
                (x.into_iter().map(|v| T::one() - v).collect(), scheduler)
            }
        };
        Ok(Numeric {
            values: finite(values),
            scheduler,
            condition_zero: Vec::new(),
        })
    }

    fn reward(&mut self, r: &ResolvedReward) -> Result<Numeric<T>, CheckError> {
        let model = self.model;
        let structure = model
            .select_reward_model(r.reward_name.as_deref())
            .ok_or_else(|| CheckError::MissingRewardModel(r.reward_name.clone()))?;
        let dir = direction(r.optimum);
        match &r.target {
            ResolvedTarget::Reach(s) => {
                let target = self.state(s)?;
                let solved = match dir {
                    Some(d) if model.kind().is_nondeterministic() => {
                        check_reach_reward_mdp(model, structure, &target, d, self.env)?
                    }
                    _ => check_reach_reward(model, structure, &target, self.env)?,
                };
                let (values, scheduler) = self.record(solved);
                Ok(Numeric {
                    values,
                    scheduler,
                    condition_zero: Vec::new(),
                })
            }
            ResolvedTarget::Cumulative(b) => {
                if model.kind().is_continuous() {
                    return Err(CheckError::ContinuousTimeUnsupported(
                        "cumulative rewards (C<=t) on CTMCs".into(),
                    ));
                }
                let k = step_count(b)?;
                self.note("bounded-iteration");
                Ok(Numeric::plain(finite(check_cumulative_reward(model, structure, k, dir)?)))
            }
        }
    }
}

fn step_count(b: &StepBound) -> Result<u64, CheckError> {
    b.steps().ok_or_else(|| {
        CheckError::UnsupportedCombination(format!(
            "bound {} on a discrete-time model must be an integer step count",
            b.0
        ))
    })
}

/// Per-state truth of a bound, or `None` for `=?`.
pub fn truth_values<T: Scalar>(bound: &Bound, values: &[Quantity<T>]) -> Result<Option<Vec<bool>>, CheckError> {
    match bound {
        Bound::Query => Ok(None),
        Bound::Compare(op, text) => {
            let threshold =
                T::parse_literal(text).ok_or_else(|| CheckError::InvalidBound(format!("threshold {}", text)))?;
            Ok(Some(values.iter().map(|v| v.satisfies(*op, &threshold)).collect()))
        }
    }
}

/// Checks a resolved property on every state of `model`.
pub fn check<T: Solve>(
    model: &Model<T>,
    property: &Resolved,
    env: &SolverEnvironment,
) -> Result<CheckResult<T>, CheckError> {
    env.validate()?;
    let start = Instant::now();
    let mut checker = Checker {
        model,
        env,
        iterations: 0,
        method: None,
    };
    let numeric = match property {
        Resolved::Prob(p) => checker.prob(p, true)?,
        Resolved::Reward(r) => checker.reward(r)?,
    };
    let truth = truth_values(property.bound(), &numeric.values)?;
    Ok(CheckResult {
        values: numeric.values,
        truth,
        metadata: Metadata {
            iterations: checker.iterations,
            method: checker.method.unwrap_or_else(|| "graph".into()),
            scheduler: numeric.scheduler,
            condition_zero: numeric.condition_zero,
            elapsed: start.elapsed(),
        },
    })
}

/// Resolves `property` against `model` (and `states` for variable
/// predicates) and checks it.
pub fn check_property<T: Solve>(
    model: &Model<T>,
    states: Option<&StateMap<T>>,
    property: &Property,
    env: &SolverEnvironment,
) -> Result<CheckResult<T>, CheckError> {
    let resolved = resolve_atoms(property, model, states)?;
    check(model, &resolved, env)
}
