use super::*;
use crate::model::Model;
use crate::prism::StateMap;
use crate::scalar::Scalar;
use crate::BitSet;

/// State formula with atoms replaced by state sets. Boolean combinations
/// without nested operators are folded into a single set.
#[derive(Clone, Debug, PartialEq)]
pub enum ResolvedState {
    Set(BitSet),
    Not(Box<ResolvedState>),
    And(Box<ResolvedState>, Box<ResolvedState>),
    Or(Box<ResolvedState>, Box<ResolvedState>),
    Prob(Box<ResolvedProb>),
    Reward(Box<ResolvedReward>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResolvedPath {
    Next(ResolvedState),
    Until {
        left: ResolvedState,
        right: ResolvedState,
        bound: Option<StepBound>,
    },
    Globally {
        inner: ResolvedState,
        bound: Option<StepBound>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedProb {
    pub optimum: Option<Optimum>,
    pub bound: Bound,
    pub path: ResolvedPath,
    pub condition: Option<ResolvedPath>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResolvedTarget {
    Reach(ResolvedState),
    Cumulative(StepBound),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedReward {
    pub reward_name: Option<String>,
    pub optimum: Option<Optimum>,
    pub bound: Bound,
    pub target: ResolvedTarget,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Resolved {
    Prob(ResolvedProb),
    Reward(ResolvedReward),
}

impl Resolved {
    pub fn bound(&self) -> &Bound {
        match self {
            Resolved::Prob(p) => &p.bound,
            Resolved::Reward(r) => &r.bound,
        }
    }
}

struct Resolver<'a, T> {
    model: &'a Model<T>,
    states: Option<&'a StateMap<T>>,
}

impl<T: Scalar> Resolver<'_, T> {
    fn full(&self) -> BitSet {
        let mut set = BitSet::with_capacity(self.model.state_count());
        set.insert_range(..);
        set
    }

    fn optimum(&self, optimum: Option<Optimum>) -> Result<Option<Optimum>, PropertyError> {
        match (self.model.kind().is_nondeterministic(), optimum) {
            (true, None) => Err(PropertyError::OptimumMissingForMdp),
            (false, Some(_)) => Err(PropertyError::OptimumGivenForDeterministic),
            _ => Ok(optimum),
        }
    }

    fn state(&self, f: &StateFormula) -> Result<ResolvedState, PropertyError> {
        Ok(match f {
            StateFormula::True => ResolvedState::Set(self.full()),
            StateFormula::False => ResolvedState::Set(BitSet::with_capacity(self.model.state_count())),
            StateFormula::Label(name) => match self.model.labeling().get(name) {
                Some(set) => ResolvedState::Set(set.clone()),
                None => return Err(PropertyError::UnknownLabel(name.clone())),
            },
            StateFormula::Predicate(expr) => match self.states {
                Some(map) => ResolvedState::Set(map.evaluate(expr).map_err(PropertyError::Predicate)?),
                None => return Err(PropertyError::PredicateWithoutStateMap),
            },
            StateFormula::Not(inner) => match self.state(inner)? {
                ResolvedState::Set(mut set) => {
                    set.toggle_range(..);
                    ResolvedState::Set(set)
                }
                other => ResolvedState::Not(Box::new(other)),
            },
            StateFormula::And(l, r) => match (self.state(l)?, self.state(r)?) {
                (ResolvedState::Set(mut a), ResolvedState::Set(b)) => {
                    a.intersect_with(&b);
                    ResolvedState::Set(a)
                }
                (a, b) => ResolvedState::And(Box::new(a), Box::new(b)),
            },
            StateFormula::Or(l, r) => match (self.state(l)?, self.state(r)?) {
                (ResolvedState::Set(mut a), ResolvedState::Set(b)) => {
                    a.union_with(&b);
                    ResolvedState::Set(a)
                }
                (a, b) => ResolvedState::Or(Box::new(a), Box::new(b)),
            },
            StateFormula::Prob(p) => ResolvedState::Prob(Box::new(self.prob(p)?)),
            StateFormula::Reward(r) => ResolvedState::Reward(Box::new(self.reward(r)?)),
        })
    }

    fn path(&self, p: &PathFormula) -> Result<ResolvedPath, PropertyError> {
        Ok(match p {
            PathFormula::Next(s) => ResolvedPath::Next(self.state(s)?),
            PathFormula::Until { left, right, bound } => ResolvedPath::Until {
                left: self.state(left)?,
                right: self.state(right)?,
                bound: bound.clone(),
            },
            PathFormula::Globally { inner, bound } => ResolvedPath::Globally {
                inner: self.state(inner)?,
                bound: bound.clone(),
            },
        })
    }

    fn prob(&self, p: &ProbOperator) -> Result<ResolvedProb, PropertyError> {
        Ok(ResolvedProb {
            optimum: self.optimum(p.optimum)?,
            bound: p.bound.clone(),
            path: self.path(&p.path)?,
            condition: p.condition.as_ref().map(|c| self.path(c)).transpose()?,
        })
    }

    fn reward(&self, r: &RewardOperator) -> Result<ResolvedReward, PropertyError> {
        Ok(ResolvedReward {
            reward_name: r.reward_name.clone(),
            optimum: self.optimum(r.optimum)?,
            bound: r.bound.clone(),
            target: match &r.target {
                RewardTarget::Reach(s) => ResolvedTarget::Reach(self.state(s)?),
                RewardTarget::Cumulative(b) => ResolvedTarget::Cumulative(b.clone()),
            },
        })
    }
}

/// Replaces labels and variable predicates by the state sets they denote and
/// checks that min/max annotations fit the model type.
pub fn resolve_atoms<T: Scalar>(
    property: &Property,
    model: &Model<T>,
    states: Option<&StateMap<T>>,
) -> Result<Resolved, PropertyError> {
    let r = Resolver { model, states };
    Ok(match property {
        Property::Prob(p) => Resolved::Prob(r.prob(p)?),
        Property::Reward(w) => Resolved::Reward(r.reward(w)?),
    })
}
