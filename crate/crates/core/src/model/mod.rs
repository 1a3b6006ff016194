//! In-memory sparse models: DTMCs, CTMCs and MDPs.

mod graph;
mod sparse;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use graph::{prob0, prob01_max, prob01_min, prob1};
pub use sparse::{build_sparse, IndexMap, SparseMatrix};

use crate::scalar::Scalar;
use crate::BitSet;

/// Row sums of floating-point DTMCs and MDPs must be this close to one.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unsupported model type: {0}")]
    Unsupported(String),
    #[error("entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("non-finite value at ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },
    #[error("negative value at ({row}, {col})")]
    NegativeValue { row: usize, col: usize },
    #[error("row {row} sums to {sum}, expected 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("transition matrix is {rows}x{cols}, expected square over states")]
    NotSquare { rows: usize, cols: usize },
    #[error("invalid choice offsets: {0}")]
    BadChoiceOffsets(String),
    #[error("invalid exit rates: {0}")]
    BadExitRates(String),
    #[error("label `{label}` has {actual} bits, model has {expected} states")]
    LabelSize {
        label: String,
        expected: usize,
        actual: usize,
    },
    #[error("reward model `{name}` has a negative reward at index {index}")]
    NegativeReward { name: String, index: usize },
    #[error("reward model `{name}`: {detail}")]
    RewardSize { name: String, detail: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimeDomain {
    Discrete,
    Continuous,
}

/// The supported model types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Dtmc,
    Ctmc,
    Mdp,
}

impl ModelKind {
    pub fn is_nondeterministic(self) -> bool {
        self == ModelKind::Mdp
    }

    pub fn is_continuous(self) -> bool {
        self == ModelKind::Ctmc
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ModelKind::Dtmc => "dtmc",
            ModelKind::Ctmc => "ctmc",
            ModelKind::Mdp => "mdp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Maps a (time domain, nondeterminism) pair to a model kind.
///
/// Continuous-time nondeterministic models (Markov automata) are rejected.
pub fn classify(time: TimeDomain, nondeterministic: bool) -> Result<ModelKind, ModelError> {
    match (time, nondeterministic) {
        (TimeDomain::Discrete, false) => Ok(ModelKind::Dtmc),
        (TimeDomain::Discrete, true) => Ok(ModelKind::Mdp),
        (TimeDomain::Continuous, false) => Ok(ModelKind::Ctmc),
        (TimeDomain::Continuous, true) => {
            Err(ModelError::Unsupported("Markov automaton".to_string()))
        }
    }
}

/// Named sets of states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateLabeling {
    states: usize,
    labels: BTreeMap<String, BitSet>,
}

impl StateLabeling {
    pub fn new(states: usize) -> Self {
        StateLabeling {
            states,
            labels: BTreeMap::new(),
        }
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    /// Adds or replaces a label.
    pub fn insert(&mut self, name: impl Into<String>, states: BitSet) -> Result<(), ModelError> {
        let name = name.into();
        if states.len() != self.states {
            return Err(ModelError::LabelSize {
                label: name,
                expected: self.states,
                actual: states.len(),
            });
        }
        self.labels.insert(name, states);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&BitSet> {
        self.labels.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.labels.contains_key(name)
    }

    /// Labels in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &BitSet)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Names of the labels holding in `state`, in name order.
    pub fn labels_of(&self, state: usize) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .filter(move |(_, bits)| bits.contains(state))
            .map(|(k, _)| k.as_str())
    }
}

/// State and action rewards attached to a model.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardModel<T> {
    name: String,
    state_rewards: Option<Vec<T>>,
    action_rewards: Option<Vec<T>>,
}

impl<T: Scalar> RewardModel<T> {
    /// Fails if any reward is negative.
    pub fn new(
        name: impl Into<String>,
        state_rewards: Option<Vec<T>>,
        action_rewards: Option<Vec<T>>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        for vector in state_rewards.iter().chain(action_rewards.iter()) {
            if let Some(index) = vector.iter().position(|r| *r < T::zero()) {
                return Err(ModelError::NegativeReward { name, index });
            }
        }
        Ok(RewardModel {
            name,
            state_rewards,
            action_rewards,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_rewards(&self) -> Option<&[T]> {
        self.state_rewards.as_deref()
    }

    pub fn action_rewards(&self) -> Option<&[T]> {
        self.action_rewards.as_deref()
    }

    /// Combined per-choice reward: state reward of the owning state plus the
    /// action reward of the choice.
    pub fn choice_rewards(&self, choice_offsets: &[usize]) -> Vec<T> {
        let choices = *choice_offsets.last().unwrap_or(&0);
        let mut total = vec![T::zero(); choices];
        if let Some(state) = &self.state_rewards {
            for (s, window) in choice_offsets.windows(2).enumerate() {
                for slot in &mut total[window[0]..window[1]] {
                    *slot = slot.clone() + state[s].clone();
                }
            }
        }
        if let Some(action) = &self.action_rewards {
            for (slot, r) in total.iter_mut().zip(action) {
                *slot = slot.clone() + r.clone();
            }
        }
        total
    }
}

/// A DTMC, CTMC or MDP in sparse form.
///
/// Rows of `matrix` are choices; `choice_offsets[s]..choice_offsets[s + 1]`
/// are the rows of state `s`. For DTMCs and CTMCs each state owns exactly one
/// row. CTMCs store the embedded jump chain plus a positive exit rate per
/// state. The `init` label always mirrors the initial states.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    kind: ModelKind,
    matrix: SparseMatrix<T>,
    choice_offsets: Vec<usize>,
    labeling: StateLabeling,
    rewards: BTreeMap<String, RewardModel<T>>,
    initial_states: BitSet,
    exit_rates: Option<Vec<T>>,
}

impl<T: Scalar> Model<T> {
    /// Builds and validates a model. State 0 is the initial state until
    /// [`Model::set_initial_states`] says otherwise.
    ///
    /// `choice_offsets` is required for MDPs and must be `None` otherwise;
    /// `exit_rates` is required for CTMCs and must be `None` otherwise.
    pub fn new(
        kind: ModelKind,
        matrix: SparseMatrix<T>,
        choice_offsets: Option<Vec<usize>>,
        exit_rates: Option<Vec<T>>,
    ) -> Result<Self, ModelError> {
        let choice_offsets = match (kind, choice_offsets) {
            (ModelKind::Mdp, Some(offsets)) => offsets,
            (ModelKind::Mdp, None) => {
                return Err(ModelError::BadChoiceOffsets("MDP requires choice offsets".into()))
            }
            (_, Some(_)) => {
                return Err(ModelError::BadChoiceOffsets(
                    "only MDPs have choice offsets".into(),
                ))
            }
            (_, None) => (0..=matrix.rows()).collect(),
        };
        validate_offsets(&choice_offsets, matrix.rows())?;
        let states = choice_offsets.len() - 1;
        if matrix.cols() != states {
            return Err(ModelError::NotSquare {
                rows: states,
                cols: matrix.cols(),
            });
        }
        for (row, sum) in matrix.row_sums().into_iter().enumerate() {
            let ok = if T::EXACT {
                sum.is_one()
            } else {
                sum.within(&T::one(), STOCHASTIC_TOLERANCE)
            };
            if !ok {
                return Err(ModelError::NonStochasticRow {
                    row,
                    sum: sum.to_f64(),
                });
            }
        }
        match (kind, &exit_rates) {
            (ModelKind::Ctmc, Some(rates)) => {
                if rates.len() != states {
                    return Err(ModelError::BadExitRates(format!(
                        "{} rates for {} states",
                        rates.len(),
                        states
                    )));
                }
                if let Some(s) = rates.iter().position(|r| *r <= T::zero()) {
                    return Err(ModelError::BadExitRates(format!(
                        "state {} has non-positive exit rate",
                        s
                    )));
                }
            }
            (ModelKind::Ctmc, None) => {
                return Err(ModelError::BadExitRates("CTMC requires exit rates".into()))
            }
            (_, Some(_)) => {
                return Err(ModelError::BadExitRates("only CTMCs have exit rates".into()))
            }
            (_, None) => {}
        }
        let mut initial_states = BitSet::with_capacity(states);
        if states > 0 {
            initial_states.insert(0);
        }
        let mut labeling = StateLabeling::new(states);
        labeling.insert("init", initial_states.clone())?;
        Ok(Model {
            kind,
            matrix,
            choice_offsets,
            labeling,
            rewards: BTreeMap::new(),
            initial_states,
            exit_rates,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    pub fn choice_offsets(&self) -> &[usize] {
        &self.choice_offsets
    }

    pub fn state_count(&self) -> usize {
        self.choice_offsets.len() - 1
    }

    pub fn choice_count(&self) -> usize {
        self.matrix.rows()
    }

    /// Matrix rows belonging to `state`.
    pub fn choices(&self, state: usize) -> std::ops::Range<usize> {
        self.choice_offsets[state]..self.choice_offsets[state + 1]
    }

    pub fn labeling(&self) -> &StateLabeling {
        &self.labeling
    }

    pub fn initial_states(&self) -> &BitSet {
        &self.initial_states
    }

    pub fn exit_rates(&self) -> Option<&[T]> {
        self.exit_rates.as_deref()
    }

    pub fn reward_models(&self) -> impl Iterator<Item = &RewardModel<T>> {
        self.rewards.values()
    }

    pub fn reward_model(&self, name: &str) -> Option<&RewardModel<T>> {
        self.rewards.get(name)
    }

    /// The reward model addressed by an optional name: the named one, or the
    /// only one if the model has exactly one.
    pub fn select_reward_model(&self, name: Option<&str>) -> Option<&RewardModel<T>> {
        match name {
            Some(n) => self.rewards.get(n),
            None if self.rewards.len() == 1 => self.rewards.values().next(),
            None => None,
        }
    }

    pub fn set_initial_states(&mut self, states: BitSet) -> Result<(), ModelError> {
        self.labeling.insert("init", states.clone())?;
        self.initial_states = states;
        Ok(())
    }

    /// Adds or replaces a label. Setting `init` also sets the initial states.
    pub fn add_label(&mut self, name: &str, states: BitSet) -> Result<(), ModelError> {
        if name == "init" {
            return self.set_initial_states(states);
        }
        self.labeling.insert(name, states)
    }

    pub fn add_reward_model(&mut self, reward: RewardModel<T>) -> Result<(), ModelError> {
        let check = |len: usize, expected: usize, what: &str| {
            if len == expected {
                Ok(())
            } else {
                Err(ModelError::RewardSize {
                    name: reward.name.clone(),
                    detail: format!("{} {} rewards, expected {}", len, what, expected),
                })
            }
        };
        if let Some(r) = &reward.state_rewards {
            check(r.len(), self.state_count(), "state")?;
        }
        if let Some(r) = &reward.action_rewards {
            check(r.len(), self.choice_count(), "action")?;
        }
        self.rewards.insert(reward.name.clone(), reward);
        Ok(())
    }

    /// Converts every number into another scalar domain.
    pub fn convert<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Model<U> {
        let conv = |v: &Vec<T>| v.iter().map(&f).collect::<Vec<U>>();
        Model {
            kind: self.kind,
            matrix: self.matrix.map_values(&f),
            choice_offsets: self.choice_offsets.clone(),
            labeling: self.labeling.clone(),
            rewards: self
                .rewards
                .iter()
                .map(|(k, r)| {
                    (
                        k.clone(),
                        RewardModel {
                            name: r.name.clone(),
                            state_rewards: r.state_rewards.as_ref().map(conv),
                            action_rewards: r.action_rewards.as_ref().map(conv),
                        },
                    )
                })
                .collect(),
            initial_states: self.initial_states.clone(),
            exit_rates: self.exit_rates.as_ref().map(conv),
        }
    }
}

fn validate_offsets(offsets: &[usize], rows: usize) -> Result<(), ModelError> {
    if offsets.first() != Some(&0) || offsets.last() != Some(&rows) {
        return Err(ModelError::BadChoiceOffsets(format!(
            "offsets must run from 0 to {}",
            rows
        )));
    }
    if let Some(pos) = offsets.windows(2).position(|w| w[0] >= w[1]) {
        return Err(ModelError::BadChoiceOffsets(format!(
            "state {} has no choices",
            pos
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitset_from;

    #[test]
    fn classification_table() {
        assert_eq!(classify(TimeDomain::Discrete, false), Ok(ModelKind::Dtmc));
        assert_eq!(classify(TimeDomain::Discrete, true), Ok(ModelKind::Mdp));
        assert_eq!(classify(TimeDomain::Continuous, false), Ok(ModelKind::Ctmc));
        assert!(matches!(
            classify(TimeDomain::Continuous, true),
            Err(ModelError::Unsupported(_))
        ));
    }

    #[test]
    fn dtmc_rows_must_be_stochastic() {
        let m = build_sparse(vec![(0, 0, 0.5), (1, 1, 1.0)], 2, 2).unwrap();
        assert!(matches!(
            Model::new(ModelKind::Dtmc, m, None, None),
            Err(ModelError::NonStochasticRow { row: 0, .. })
        ));
        let m = build_sparse(vec![(0, 0, 0.5), (0, 1, 0.5 + 1e-12), (1, 1, 1.0)], 2, 2).unwrap();
        assert!(Model::new(ModelKind::Dtmc, m, None, None).is_ok());
    }

    #[test]
    fn mdp_needs_a_choice_per_state() {
        let m = build_sparse(vec![(0, 0, 1.0), (1, 1, 1.0)], 2, 2).unwrap();
        let err = Model::new(ModelKind::Mdp, m, Some(vec![0, 2, 2]), None).unwrap_err();
        assert!(matches!(err, ModelError::BadChoiceOffsets(_)));
    }

    #[test]
    fn ctmc_exit_rates_are_positive() {
        let m = build_sparse(vec![(0, 0, 1.0)], 1, 1).unwrap();
        assert!(Model::new(ModelKind::Ctmc, m.clone(), None, Some(vec![0.0])).is_err());
        assert!(Model::new(ModelKind::Ctmc, m.clone(), None, None).is_err());
        assert!(Model::new(ModelKind::Ctmc, m, None, Some(vec![1.0])).is_ok());
    }

    #[test]
    fn init_label_tracks_initial_states() {
        let m = build_sparse(vec![(0, 1, 1.0), (1, 1, 1.0)], 2, 2).unwrap();
        let mut model = Model::new(ModelKind::Dtmc, m, None, None).unwrap();
        assert_eq!(model.labeling().get("init"), Some(&bitset_from(2, [0])));
        model.add_label("init", bitset_from(2, [1])).unwrap();
        assert_eq!(model.initial_states(), &bitset_from(2, [1]));
        assert!(model.add_label("bad", bitset_from(3, [1])).is_err());
    }

    #[test]
    fn rewards_are_validated() {
        assert!(matches!(
            RewardModel::new("r", Some(vec![1.0, -1.0]), None),
            Err(ModelError::NegativeReward { index: 1, .. })
        ));
        let m = build_sparse(vec![(0, 0, 1.0), (1, 0, 1.0)], 2, 1).unwrap();
        let mut model = Model::new(ModelKind::Mdp, m, Some(vec![0, 2]), None).unwrap();
        let r = RewardModel::new("r", Some(vec![1.0]), Some(vec![0.0, 2.0])).unwrap();
        model.add_reward_model(r).unwrap();
        let r = model.reward_model("r").unwrap();
        assert_eq!(r.choice_rewards(model.choice_offsets()), vec![1.0, 3.0]);
        let bad = RewardModel::new("b", Some(vec![1.0, 1.0]), None).unwrap();
        assert!(model.add_reward_model(bad).is_err());
    }
}
