//! Frontend for a subset of the PRISM modelling language.
//!
//! Supported: `dtmc`, `ctmc` and `mdp` programs with typed constants,
//! formulas, labels, modules over bounded integer and boolean variables,
//! action synchronization between modules, and reward blocks. Not
//! supported: global variables, `init ... endinit`, system composition,
//! module renaming, unbounded integers, clocks.
//!
//! ```
//! use std::collections::BTreeMap;
//! use stormlet::prism::{build_model, ExploreOptions};
//!
//! let src = "dtmc
//!     module coin
//!         x : [0..1] init 0;
//!         [] x=0 -> 0.5 : (x'=1) + 0.5 : true;
//!         [] x=1 -> true;
//!     endmodule
//!     label \"heads\" = x=1;";
//! let (model, states) = build_model::<f64>(src, &BTreeMap::new(), &ExploreOptions::default()).unwrap();
//! assert_eq!(model.state_count(), 2);
//! assert!(model.labeling().get("heads").unwrap().contains(1));
//! assert_eq!(states.describe(1), "(x=1)");
//! ```

pub mod ast;
pub mod check;
pub mod explore;
pub mod lexer;
pub mod parser;

use std::collections::BTreeMap;

use thiserror::Error;

pub use check::{typecheck, Scope, Type, TypedExpr, TypedProgram, Value};
pub use explore::{
    build_label_bitsets, build_reward_models, explore, ExploreOptions, Explored, StateMap,
};
pub use lexer::{tokenize, Span, Tok, Token};
pub use parser::{parse_expression, parse_program};

use crate::model::{Model, ModelError};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrismError {
    #[error("{span}: unexpected character `{ch}`")]
    UnknownCharacter { span: Span, ch: char },
    #[error("{span}: expected {expected}, found {found}")]
    Syntax {
        span: Span,
        expected: String,
        found: String,
    },
    #[error("constant `{name}` has no value; bind it with --constants")]
    UndefinedConstant { name: String },
    #[error("{span}: unknown identifier `{name}`")]
    UnknownIdentifier { span: Span, name: String },
    #[error("{span}: type mismatch: {message}")]
    TypeMismatch { span: Span, message: String },
    #[error("definition of `{name}` depends on itself")]
    CyclicFormula { name: String },
    #[error("{span}: `{name}` is already defined")]
    DuplicateName { span: Span, name: String },
    #[error("constant binding `{name}`: {message}")]
    InvalidBinding { name: String, message: String },
    #[error("{span}: {message}")]
    InvalidDeclaration { span: Span, message: String },
    #[error("{span}: division by zero")]
    DivisionByZero { span: Span },
    #[error("{span}: integer overflow")]
    Overflow { span: Span },
    #[error("{span}: {message}")]
    InvalidOperation { span: Span, message: String },
    #[error("deadlock in state {state}; use --fix-deadlocks to add self-loops")]
    DeadlockState { state: String },
    #[error("{span}: in state {state}, `{variable}` would become {value}, outside its range")]
    OutOfBoundsAssignment {
        span: Span,
        state: String,
        variable: String,
        value: i64,
    },
    #[error("{span}: in state {state}, update probabilities sum to {sum}")]
    NonNormalizedDistribution { span: Span, state: String, sum: f64 },
    #[error("{span}: negative update weight in state {state}")]
    NegativeWeight { span: Span, state: String },
    #[error("more than {limit} reachable states")]
    StateLimitExceeded { limit: usize },
    #[error("{span}: reward structure `{block}` is negative in state {state}")]
    NegativeReward {
        block: String,
        state: String,
        span: Span,
    },
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
}

impl PrismError {
    /// Whether the error concerns the built model rather than the source text.
    pub fn is_semantic(&self) -> bool {
        matches!(
            self,
            PrismError::DeadlockState { .. }
                | PrismError::OutOfBoundsAssignment { .. }
                | PrismError::NonNormalizedDistribution { .. }
                | PrismError::NegativeWeight { .. }
                | PrismError::StateLimitExceeded { .. }
                | PrismError::NegativeReward { .. }
                | PrismError::DivisionByZero { .. }
                | PrismError::Overflow { .. }
                | PrismError::InvalidOperation { .. }
                | PrismError::Model(_)
        )
    }
}

/// Parses, checks and explores a program, returning the model with all
/// labels and reward structures attached.
pub fn build_model<T: Scalar>(
    source: &str,
    constants: &BTreeMap<String, String>,
    options: &ExploreOptions,
) -> Result<(Model<T>, StateMap<T>), PrismError> {
    let program = parse_program(source)?;
    let typed = typecheck::<T>(&program, constants)?;
    let explored = explore(&typed, options)?;
    let labeling = build_label_bitsets(&typed, &explored)?;
    let rewards = build_reward_models(&typed, &explored)?;
    let Explored { mut model, states, .. } = explored;
    for (name, bits) in labeling.iter() {
        if name != "init" {
            model.add_label(name, bits.clone())?;
        }
    }
    for r in rewards {
        model.add_reward_model(r)?;
    }
    Ok((model, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::scalar::Rational;
    use crate::BitSet;

    const DIE: &str = include_str!("../../tests/models/die.pm");

    fn no_constants() -> BTreeMap<String, String> {
        BTreeMap::new()
    }

    fn build<T: Scalar>(src: &str) -> Result<(Model<T>, StateMap<T>), PrismError> {
        build_model(src, &no_constants(), &ExploreOptions::default())
    }

    #[test]
    fn die_has_seven_commands() {
        let p = parse_program(DIE).unwrap();
        assert_eq!(p.modules.len(), 1);
        assert_eq!(p.modules[0].commands.len(), 7);
    }

    /// Successor distribution of the die, written out independently of the
    /// explorer: the coin-flip tree over (s, d).
    fn die_successors(s: i64, d: i64) -> Vec<((i64, i64), f64)> {
        match s {
            0 => vec![((1, d), 0.5), ((2, d), 0.5)],
            1 => vec![((3, d), 0.5), ((4, d), 0.5)],
            2 => vec![((5, d), 0.5), ((6, d), 0.5)],
            3 => vec![((1, d), 0.5), ((7, 1), 0.5)],
            4 => vec![((7, 2), 0.5), ((7, 3), 0.5)],
            5 => vec![((7, 4), 0.5), ((7, 5), 0.5)],
            6 => vec![((2, d), 0.5), ((7, 6), 0.5)],
            _ => vec![((7, d), 1.0)],
        }
    }

    #[test]
    fn die_matches_enumeration() {
        let (model, states) = build::<f64>(DIE).unwrap();
        // Reachable set by search over the whole variable domain.
        let mut reachable = vec![(0i64, 0i64)];
        let mut i = 0;
        while i < reachable.len() {
            let (s, d) = reachable[i];
            for (next, _) in die_successors(s, d) {
                if !reachable.contains(&next) {
                    reachable.push(next);
                }
            }
            i += 1;
        }
        assert_eq!(reachable.len(), 13);
        assert_eq!(model.state_count(), 13);
        assert_eq!(model.matrix().nnz(), 20);
        for &(s, d) in &reachable {
            let idx = states.index_of(&[s, d]).unwrap();
            let row: Vec<(usize, f64)> = model.matrix().row(idx).map(|(c, v)| (c, *v)).collect();
            let mut expected: Vec<(usize, f64)> = die_successors(s, d)
                .into_iter()
                .map(|((s2, d2), p)| (states.index_of(&[s2, d2]).unwrap(), p))
                .collect();
            expected.sort_by_key(|e| e.0);
            assert_eq!(row, expected, "state ({}, {})", s, d);
        }
        let six = model.labeling().get("six").unwrap();
        assert_eq!(six.count_ones(..), 1);
        assert_eq!(states.valuation(six.ones().next().unwrap()), &[7, 6]);
    }

    #[test]
    fn die_flip_rewards() {
        let (model, _) = build::<Rational>(DIE).unwrap();
        let r = model.reward_model("coin_flips").unwrap();
        assert!(r.state_rewards().is_none());
        let a = r.action_rewards().unwrap();
        let ones = a.iter().filter(|x| **x == Rational::from_integer(1.into())).count();
        assert_eq!(ones, 7);
        assert_eq!(a.iter().filter(|x| x.numer() == &0.into()).count(), 6);
    }

    #[test]
    fn deadlock_fix_adds_self_loop() {
        let src = "dtmc module m x:[0..1] init 0; [] x=0 -> (x'=1); endmodule label \"done\" = x=1;";
        assert!(matches!(build::<f64>(src), Err(PrismError::DeadlockState { .. })));
        let options = ExploreOptions {
            fix_deadlocks: true,
            ..ExploreOptions::default()
        };
        let (model, _) = build_model::<f64>(src, &no_constants(), &options).unwrap();
        assert_eq!(model.state_count(), 2);
        assert_eq!(model.matrix().get(1, 1), Some(&1.0));
        assert_eq!(model.labeling().get("deadlock").unwrap().ones().collect::<Vec<_>>(), vec![1]);
        assert_eq!(model.labeling().get("done").unwrap().ones().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn only_builtin_labels_without_declarations() {
        let (model, _) = build::<f64>("dtmc module m x:[0..0]; [] true -> true; endmodule").unwrap();
        let names: Vec<&str> = model.labeling().iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["deadlock", "init"]);
    }

    #[test]
    fn synchronized_branches_multiply() {
        let src = "mdp
            module a x:[0..2] init 0;
                [go] x=0 -> 0.25 : (x'=1) + 0.75 : (x'=2);
                [] x>0 -> true;
            endmodule
            module b y:[0..2] init 0;
                [go] y=0 -> 0.5 : (y'=1) + 0.5 : (y'=2);
                [] y>0 -> true;
            endmodule";
        let (model, states) = build::<Rational>(src).unwrap();
        // Initial state: only the synchronized command is enabled.
        assert_eq!(model.choices(0).len(), 1);
        let row: Vec<(Vec<i64>, String)> = model
            .matrix()
            .row(0)
            .map(|(c, v)| (states.valuation(c).to_vec(), v.to_string()))
            .collect();
        let mut expected = vec![
            (vec![1, 1], "1/8".to_string()),
            (vec![1, 2], "1/8".to_string()),
            (vec![2, 1], "3/8".to_string()),
            (vec![2, 2], "3/8".to_string()),
        ];
        let mut row = row;
        row.sort();
        expected.sort();
        assert_eq!(row, expected);
        // Afterwards each module idles on its own: two interleaved choices.
        let s = states.index_of(&[1, 1]).unwrap();
        assert_eq!(model.choices(s).len(), 2);
    }

    #[test]
    fn sync_needs_every_participant() {
        let src = "mdp
            module a x:[0..1]; [go] x=0 -> (x'=1); [] true -> true; endmodule
            module b y:[0..1]; [go] y=1 -> (y'=0); endmodule";
        let (model, _) = build::<f64>(src).unwrap();
        assert_eq!(model.state_count(), 1);
        assert_eq!(model.choices(0).len(), 1);
    }

    #[test]
    fn dtmc_averages_enabled_commands() {
        let src = "dtmc module m x:[0..2];
            [] x=0 -> (x'=1);
            [] x=0 -> 0.5 : (x'=2) + 0.5 : true;
            [] x>0 -> true;
            endmodule";
        let (model, states) = build::<Rational>(src).unwrap();
        let p = |v: i64| model.matrix().get(0, states.index_of(&[v]).unwrap()).unwrap().to_string();
        assert_eq!(p(1), "1/2");
        assert_eq!(p(2), "1/4");
        assert_eq!(p(0), "1/4");
    }

    #[test]
    fn ctmc_rates_add_up() {
        let src = "ctmc module m x:[0..1];
            [] x=0 -> 2 : (x'=1);
            [] x=0 -> 3 : (x'=1);
            [] x=1 -> 1 : true;
            endmodule
            rewards \"r\" [] x=0 : 10; endrewards";
        let (model, _) = build::<Rational>(src).unwrap();
        assert_eq!(model.kind(), ModelKind::Ctmc);
        assert_eq!(model.exit_rates().unwrap()[0].to_string(), "5");
        assert_eq!(model.matrix().get(0, 1).unwrap().to_string(), "1");
        let r = model.reward_model("r").unwrap().action_rewards().unwrap();
        assert_eq!(r[0].to_string(), "10");
    }

    #[test]
    fn overlapping_state_rewards_add() {
        let src = "dtmc module m x:[0..1]; [] true -> 0.5 : (x'=0) + 0.5 : (x'=1); endmodule
            rewards \"r\" x>=0 : 1; x=1 : 2; endrewards
            rewards \"all\" true : 1; endrewards
            rewards \"none\" endrewards";
        let (model, states) = build::<f64>(src).unwrap();
        let one = states.index_of(&[1]).unwrap();
        assert_eq!(model.reward_model("r").unwrap().state_rewards().unwrap()[one], 3.0);
        assert_eq!(model.reward_model("all").unwrap().state_rewards().unwrap(), &[1.0, 1.0]);
        assert_eq!(model.reward_model("none").unwrap().state_rewards().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn exploration_errors() {
        let bounds = "dtmc module m x:[0..1]; [] true -> (x'=x+1); endmodule";
        assert!(matches!(build::<f64>(bounds), Err(PrismError::OutOfBoundsAssignment { value: 2, .. })));
        let weights = "dtmc module m x:[0..1]; [] true -> 0.5 : (x'=1) + 0.4 : (x'=0); endmodule";
        assert!(matches!(build::<f64>(weights), Err(PrismError::NonNormalizedDistribution { .. })));
        let limit = ExploreOptions {
            max_states: 3,
            ..ExploreOptions::default()
        };
        let counter = "dtmc module m x:[0..9]; [] x<9 -> (x'=x+1); [] x=9 -> true; endmodule";
        assert_eq!(
            build_model::<f64>(counter, &no_constants(), &limit),
            Err(PrismError::StateLimitExceeded { limit: 3 })
        );
        let reward = "dtmc module m x:[0..0]; [] true -> true; endmodule rewards \"r\" true : -1; endrewards";
        assert!(matches!(build::<f64>(reward), Err(PrismError::NegativeReward { .. })));
    }

    #[test]
    fn near_normalized_weights_are_renormalized_exactly() {
        let src = "dtmc module m x:[0..1]; [] true -> 0.33333333333333 : (x'=1) + 0.66666666666666 : (x'=0); endmodule";
        let (model, _) = build::<Rational>(src).unwrap();
        let sum = model.matrix().row_sums()[0].clone();
        assert_eq!(sum, Rational::from_integer(1.into()));
    }

    #[test]
    fn exploration_is_deterministic() {
        let a = build::<f64>(DIE).unwrap();
        let b = build::<f64>(DIE).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predicates_over_states() {
        let (_, states) = build::<f64>(DIE).unwrap();
        let bits: BitSet = states.evaluate(&parse_expression("s=7 & d>3").unwrap()).unwrap();
        assert_eq!(bits.count_ones(..), 3);
    }

    #[test]
    fn constants_from_bindings() {
        let src = "dtmc const int N; const double p;
            module m x:[0..N]; [] x<N -> p : (x'=x+1) + 1-p : true; [] x=N -> true; endmodule";
        let c: BTreeMap<String, String> =
            [("N".to_string(), "4".to_string()), ("p".to_string(), "0.25".to_string())].into();
        let (model, _) = build_model::<f64>(src, &c, &ExploreOptions::default()).unwrap();
        assert_eq!(model.state_count(), 5);
        assert_eq!(model.matrix().get(0, 1), Some(&0.25));
    }
}
