//! Properties: PCTL and CSL probability operators, reward operators and
//! conditional probabilities.
//!
//! ```text
//! prop   := probop | rewop
//! probop := ("P" | "Pmin" | "Pmax") (relop num | "=?") "[" path ["||" path] "]"
//! rewop  := ("R" | "Rmin" | "Rmax") ["{" STRING "}"] (relop num | "=?")
//!           "[" ("F" state | "C" "<=" num) "]"
//! path   := state "U" ["<=" num] state | "X" state
//!         | "F" ["<=" num] state | "G" ["<=" num] state
//! state  := "\"label\"" | "(" expr ")" | "true" | "false" | "!" state
//!         | state "&" state | state "|" state | probop | rewop
//! ```
//!
//! A bound `<=k` counts steps on discrete-time models and must then be an
//! integer literal; on CTMCs it is a time bound.
//!
//! ```
//! use stormlet::property::parse_property;
//!
//! let p = parse_property(r#"Pmax=? [ "a" U<=5 "b" ]"#).unwrap();
//! assert_eq!(p.to_string(), r#"Pmax=? [ "a" U<=5 "b" ]"#);
//! ```

mod parse;
mod resolve;

use std::fmt;

use thiserror::Error;

pub use parse::{parse_properties, parse_property};
pub use resolve::{resolve_atoms, Resolved, ResolvedPath, ResolvedProb, ResolvedReward, ResolvedState, ResolvedTarget};

use crate::prism::ast::Expr;
use crate::prism::{PrismError, Span};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropertyError {
    #[error("{span}: expected {expected}, found {found}")]
    Syntax {
        span: Span,
        expected: String,
        found: String,
    },
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("state predicates need a model built from a PRISM program")]
    PredicateWithoutStateMap,
    #[error("nondeterministic model: use Pmin/Pmax or Rmin/Rmax")]
    OptimumMissingForMdp,
    #[error("min/max given for a deterministic model; use P or R")]
    OptimumGivenForDeterministic,
    #[error("in predicate: {0}")]
    Predicate(PrismError),
}

impl From<PrismError> for PropertyError {
    fn from(e: PrismError) -> Self {
        match e {
            PrismError::Syntax { span, expected, found } => PropertyError::Syntax { span, expected, found },
            PrismError::UnknownCharacter { span, ch } => PropertyError::Syntax {
                span,
                expected: "a property".into(),
                found: format!("`{}`", ch),
            },
            other => PropertyError::Predicate(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
        }
    }

    pub fn holds<X: PartialOrd>(self, value: &X, threshold: &X) -> bool {
        match self {
            RelOp::Lt => value < threshold,
            RelOp::Le => value <= threshold,
            RelOp::Gt => value > threshold,
            RelOp::Ge => value >= threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Optimum {
    Min,
    Max,
}

/// `=?` or a comparison against a threshold literal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Bound {
    Query,
    /// The threshold is kept as written so it can be read exactly.
    Compare(RelOp, String),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Query => f.write_str("=?"),
            Bound::Compare(op, t) => write!(f, "{}{}", op.symbol(), t),
        }
    }
}

/// Literal of a `<=` bound on a path or cumulative reward.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StepBound(pub String);

impl StepBound {
    /// The bound as a step count, if it is an integer literal.
    pub fn steps(&self) -> Option<u64> {
        self.0.parse().ok()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateFormula {
    True,
    False,
    Label(String),
    Predicate(Expr),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
    Prob(Box<ProbOperator>),
    Reward(Box<RewardOperator>),
}

/// `F φ` is stored as `true U φ`.
#[derive(Clone, Debug, PartialEq)]
pub enum PathFormula {
    Next(StateFormula),
    Until {
        left: StateFormula,
        right: StateFormula,
        bound: Option<StepBound>,
    },
    Globally {
        inner: StateFormula,
        bound: Option<StepBound>,
    },
}

impl PathFormula {
    pub fn eventually(target: StateFormula, bound: Option<StepBound>) -> Self {
        PathFormula::Until {
            left: StateFormula::True,
            right: target,
            bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbOperator {
    pub optimum: Option<Optimum>,
    pub bound: Bound,
    pub path: PathFormula,
    /// Condition of `P [ path || condition ]`.
    pub condition: Option<PathFormula>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RewardTarget {
    Reach(StateFormula),
    Cumulative(StepBound),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardOperator {
    pub reward_name: Option<String>,
    pub optimum: Option<Optimum>,
    pub bound: Bound,
    pub target: RewardTarget,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Property {
    Prob(ProbOperator),
    Reward(RewardOperator),
}

impl Property {
    pub fn bound(&self) -> &Bound {
        match self {
            Property::Prob(p) => &p.bound,
            Property::Reward(r) => &r.bound,
        }
    }

    /// Structural equality ignoring source positions of predicates.
    pub fn same_shape(&self, other: &Property) -> bool {
        match (self, other) {
            (Property::Prob(a), Property::Prob(b)) => prob_shape(a, b),
            (Property::Reward(a), Property::Reward(b)) => reward_shape(a, b),
            _ => false,
        }
    }
}

fn prob_shape(a: &ProbOperator, b: &ProbOperator) -> bool {
    a.optimum == b.optimum
        && a.bound == b.bound
        && path_shape(&a.path, &b.path)
        && match (&a.condition, &b.condition) {
            (None, None) => true,
            (Some(x), Some(y)) => path_shape(x, y),
            _ => false,
        }
}

fn reward_shape(a: &RewardOperator, b: &RewardOperator) -> bool {
    a.reward_name == b.reward_name
        && a.optimum == b.optimum
        && a.bound == b.bound
        && match (&a.target, &b.target) {
            (RewardTarget::Reach(x), RewardTarget::Reach(y)) => state_shape(x, y),
            (RewardTarget::Cumulative(x), RewardTarget::Cumulative(y)) => x == y,
            _ => false,
        }
}

fn path_shape(a: &PathFormula, b: &PathFormula) -> bool {
    match (a, b) {
        (PathFormula::Next(x), PathFormula::Next(y)) => state_shape(x, y),
        (
            PathFormula::Until { left: l1, right: r1, bound: b1 },
            PathFormula::Until { left: l2, right: r2, bound: b2 },
        ) => b1 == b2 && state_shape(l1, l2) && state_shape(r1, r2),
        (
            PathFormula::Globally { inner: i1, bound: b1 },
            PathFormula::Globally { inner: i2, bound: b2 },
        ) => b1 == b2 && state_shape(i1, i2),
        _ => false,
    }
}

fn state_shape(a: &StateFormula, b: &StateFormula) -> bool {
    use StateFormula::*;
    match (a, b) {
        (True, True) | (False, False) => true,
        (Label(x), Label(y)) => x == y,
        (Predicate(x), Predicate(y)) => x.same_shape(y),
        (Not(x), Not(y)) => state_shape(x, y),
        (And(x1, x2), And(y1, y2)) | (Or(x1, x2), Or(y1, y2)) => state_shape(x1, y1) && state_shape(x2, y2),
        (Prob(x), Prob(y)) => prob_shape(x, y),
        (Reward(x), Reward(y)) => reward_shape(x, y),
        _ => false,
    }
}

fn optimum_suffix(o: Option<Optimum>) -> &'static str {
    match o {
        None => "",
        Some(Optimum::Min) => "min",
        Some(Optimum::Max) => "max",
    }
}

impl StateFormula {
    fn precedence(&self) -> u8 {
        match self {
            StateFormula::Or(..) => 1,
            StateFormula::And(..) => 2,
            StateFormula::Not(_) => 3,
            _ => 4,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let parens = self.precedence() < min;
        if parens {
            f.write_str("(")?;
        }
        match self {
            StateFormula::True => f.write_str("true")?,
            StateFormula::False => f.write_str("false")?,
            StateFormula::Label(name) => write!(f, "\"{}\"", name)?,
            StateFormula::Predicate(e) => write!(f, "({})", e)?,
            StateFormula::Not(inner) => {
                f.write_str("!")?;
                inner.fmt_at(f, 3)?;
            }
            StateFormula::And(l, r) => {
                l.fmt_at(f, 2)?;
                f.write_str(" & ")?;
                r.fmt_at(f, 3)?;
            }
            StateFormula::Or(l, r) => {
                l.fmt_at(f, 1)?;
                f.write_str(" | ")?;
                r.fmt_at(f, 2)?;
            }
            StateFormula::Prob(p) => write!(f, "{}", p)?,
            StateFormula::Reward(r) => write!(f, "{}", r)?,
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

fn fmt_bound(f: &mut fmt::Formatter<'_>, bound: &Option<StepBound>) -> fmt::Result {
    match bound {
        Some(b) => write!(f, "<={}", b.0),
        None => Ok(()),
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Operands of temporal operators are printed as atoms so that
        // `!a U b` keeps its grouping.
        match self {
            PathFormula::Next(s) => {
                f.write_str("X ")?;
                s.fmt_at(f, 3)
            }
            PathFormula::Until { left: StateFormula::True, right, bound } => {
                f.write_str("F")?;
                fmt_bound(f, bound)?;
                f.write_str(" ")?;
                right.fmt_at(f, 3)
            }
            PathFormula::Until { left, right, bound } => {
                left.fmt_at(f, 3)?;
                f.write_str(" U")?;
                fmt_bound(f, bound)?;
                f.write_str(" ")?;
                right.fmt_at(f, 3)
            }
            PathFormula::Globally { inner, bound } => {
                f.write_str("G")?;
                fmt_bound(f, bound)?;
                f.write_str(" ")?;
                inner.fmt_at(f, 3)
            }
        }
    }
}

impl fmt::Display for ProbOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}{} [ {}", optimum_suffix(self.optimum), self.bound, self.path)?;
        if let Some(c) = &self.condition {
            write!(f, " || {}", c)?;
        }
        f.write_str(" ]")
    }
}

impl fmt::Display for RewardOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", optimum_suffix(self.optimum))?;
        if let Some(name) = &self.reward_name {
            write!(f, "{{\"{}\"}}", name)?;
        }
        write!(f, "{} [ ", self.bound)?;
        match &self.target {
            RewardTarget::Reach(s) => {
                f.write_str("F ")?;
                s.fmt_at(f, 3)?;
            }
            RewardTarget::Cumulative(b) => write!(f, "C<={}", b.0)?,
        }
        f.write_str(" ]")
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Prob(p) => write!(f, "{}", p),
            Property::Reward(r) => write!(f, "{}", r),
        }
    }
}
