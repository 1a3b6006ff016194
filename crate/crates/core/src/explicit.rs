//! Reader and writer for the explicit transition format.
//!
//! A model is a bundle of plain-text files:
//!
//! ```text
//! model.tra    dtmc|ctmc|mdp header, then `src dst value` (dtmc, ctmc)
//!              or `src choice dst probability` (mdp)
//! model.lab    #DECLARATION / names / #END, then `state name [name ...]`
//! name.srew    `state reward`
//! name.trew    `state choice reward` (mdp) or `state reward`
//! ```
//!
//! States are 0-based, contiguous and ascending. `#` starts a comment
//! anywhere except inside the label declaration block. Probabilities within
//! 1e-6 of a distribution are renormalized; CTMC rates are split into
//! embedded probabilities and exit rates.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Model, ModelError, ModelKind, RewardModel, SparseMatrix, StateLabeling};
use crate::scalar::Scalar;
use crate::BitSet;

/// Row sums further than this from one are rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// Float row sums this close to one are taken as exact.
const ROUNDING_NOISE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplicitError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: state {state} has outgoing probability {sum}")]
    NonStochasticRow { line: usize, state: usize, sum: f64 },
    #[error("line {line}: state {state} has no transitions")]
    GapInStateIndices { line: usize, state: usize },
    #[error("line {line}: label `{label}` was not declared")]
    UndeclaredLabel { line: usize, label: String },
    #[error("line {line}: state {state} out of range")]
    StateOutOfRange { line: usize, state: usize },
    #[error("line {line}: missing #DECLARATION ... #END block")]
    MissingDeclarationBlock { line: usize },
    #[error("line {line}: negative reward")]
    NegativeReward { line: usize },
    #[error("line {line}: state {state} assigned twice")]
    DuplicateAssignment { line: usize, state: usize },
    #[error("line {line}: state {state} has no choice {choice}")]
    ChoiceOutOfRange {
        line: usize,
        state: usize,
        choice: usize,
    },
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
}

impl ExplicitError {
    /// 1-based line of the diagnostic, if it refers to one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ExplicitError::Syntax { line, .. }
            | ExplicitError::NonStochasticRow { line, .. }
            | ExplicitError::GapInStateIndices { line, .. }
            | ExplicitError::UndeclaredLabel { line, .. }
            | ExplicitError::StateOutOfRange { line, .. }
            | ExplicitError::MissingDeclarationBlock { line }
            | ExplicitError::NegativeReward { line }
            | ExplicitError::DuplicateAssignment { line, .. }
            | ExplicitError::ChoiceOutOfRange { line, .. } => Some(*line),
            ExplicitError::Model(_) => None,
        }
    }
}

/// Texts of one explicit model.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExplicitBundle {
    pub transitions: String,
    pub labels: String,
    pub rewards: Vec<RewardTexts>,
}

/// State and action reward files of one reward model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardTexts {
    pub name: String,
    pub state_rewards: Option<String>,
    pub action_rewards: Option<String>,
}

/// Structure read from a transitions file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedTransitions<T> {
    pub kind: ModelKind,
    pub matrix: SparseMatrix<T>,
    pub choice_offsets: Vec<usize>,
    pub exit_rates: Option<Vec<T>>,
    /// Non-fatal diagnostics, e.g. coalesced duplicate transitions.
    pub warnings: Vec<String>,
}

impl<T: Scalar> ParsedTransitions<T> {
    pub fn state_count(&self) -> usize {
        self.choice_offsets.len() - 1
    }

    pub fn into_model(self) -> Result<Model<T>, ModelError> {
        let offsets = (self.kind == ModelKind::Mdp).then_some(self.choice_offsets);
        Model::new(self.kind, self.matrix, offsets, self.exit_rates)
    }
}

/// Non-comment, non-blank lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_index(token: &str, line: usize, what: &str) -> Result<usize, ExplicitError> {
    token.parse().map_err(|_| ExplicitError::Syntax {
        line,
        message: format!("expected {} index, found `{}`", what, token),
    })
}

fn parse_value<T: Scalar>(token: &str, line: usize) -> Result<T, ExplicitError> {
    T::parse_literal(token).ok_or_else(|| ExplicitError::Syntax {
        line,
        message: format!("expected a number, found `{}`", token),
    })
}

struct Row<T> {
    state: usize,
    line: usize,
    entries: Vec<(usize, T)>,
}

/// Parses a transitions file.
pub fn parse_transitions<T: Scalar>(text: &str) -> Result<ParsedTransitions<T>, ExplicitError> {
    let mut lines = content_lines(text);
    let (header_line, header) = lines.next().ok_or(ExplicitError::Syntax {
        line: 1,
        message: "missing model type header".into(),
    })?;
    let kind = match header {
        "dtmc" => ModelKind::Dtmc,
        "ctmc" => ModelKind::Ctmc,
        "mdp" => ModelKind::Mdp,
        other => {
            return Err(ExplicitError::Syntax {
                line: header_line,
                message: format!("expected `dtmc`, `ctmc` or `mdp`, found `{}`", other),
            })
        }
    };
    let arity = if kind == ModelKind::Mdp { 4 } else { 3 };

    // Choice rows in file order, with their owning state.
    let mut rows: Vec<Row<T>> = Vec::new();
    let mut max_state = None::<usize>;
    let mut last_line = header_line;
    // (state, choice) of the row being filled
    let mut current: Option<(usize, usize)> = None;
    for (line, content) in lines {
        last_line = line;
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != arity {
            return Err(ExplicitError::Syntax {
                line,
                message: format!("expected {} fields, found {}", arity, tokens.len()),
            });
        }
        let src = parse_index(tokens[0], line, "state")?;
        let (choice, dst) = if arity == 4 {
            (parse_index(tokens[1], line, "choice")?, parse_index(tokens[2], line, "state")?)
        } else {
            (0, parse_index(tokens[1], line, "state")?)
        };
        let value: T = parse_value(tokens[arity - 1], line)?;
        if value < T::zero() {
            return Err(ExplicitError::Syntax {
                line,
                message: "negative transition value".into(),
            });
        }
        max_state = Some(max_state.map_or(src.max(dst), |m: usize| m.max(src).max(dst)));

        let new_row = match current {
            None => {
                if src != 0 {
                    return Err(ExplicitError::GapInStateIndices { line, state: 0 });
                }
                if choice != 0 {
                    return Err(choice_order(line, src, choice));
                }
                true
            }
            Some((p, c)) if src == p => {
                if choice == c {
                    false
                } else if choice == c + 1 {
                    true
                } else {
                    return Err(choice_order(line, src, choice));
                }
            }
            Some((p, _)) if src == p + 1 => {
                if choice != 0 {
                    return Err(choice_order(line, src, choice));
                }
                true
            }
            Some((p, _)) if src < p => {
                return Err(ExplicitError::Syntax {
                    line,
                    message: format!("state {} listed after state {}", src, p),
                })
            }
            Some((p, _)) => return Err(ExplicitError::GapInStateIndices { line, state: p + 1 }),
        };
        current = Some((src, choice));
        if new_row {
            rows.push(Row {
                state: src,
                line,
                entries: Vec::new(),
            });
        }
        rows.last_mut().expect("row pushed").entries.push((dst, value));
    }

    let states = max_state.map_or(0, |m| m + 1);
    let listed = rows.last().map_or(0, |r| r.state + 1);
    if listed < states {
        return Err(ExplicitError::GapInStateIndices {
            line: last_line,
            state: listed,
        });
    }

    let mut warnings = Vec::new();
    let mut choice_offsets = vec![0];
    let mut matrix_rows = Vec::with_capacity(rows.len());
    let mut exit_rates = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        if i > 0 && choice_offsets.len() == row.state {
            choice_offsets.push(i);
        }
        let distinct: BTreeSet<usize> = row.entries.iter().map(|(d, _)| *d).collect();
        if distinct.len() < row.entries.len() {
            warnings.push(format!(
                "line {}: duplicate transitions of state {} summed",
                row.line, row.state
            ));
        }
        let coalesced = SparseMatrix::from_rows(vec![row.entries], states)?;
        let entries: Vec<(usize, T)> = coalesced.row(0).map(|(c, v)| (c, v.clone())).collect();
        let sum = entries.iter().fold(T::zero(), |acc, (_, v)| acc + v.clone());
        if kind == ModelKind::Ctmc {
            if sum.is_zero() {
                return Err(ExplicitError::GapInStateIndices {
                    line: row.line,
                    state: row.state,
                });
            }
            let absorbing = entries.iter().all(|(c, _)| *c == row.state);
            exit_rates.push(if absorbing { T::one() } else { sum.clone() });
        } else if !sum.within(&T::one(), RENORMALIZE_TOLERANCE) {
            return Err(ExplicitError::NonStochasticRow {
                line: row.line,
                state: row.state,
                sum: sum.to_f64(),
            });
        }
        // Rows that sum to one up to float rounding are kept verbatim so
        // that writing and reading a float model is lossless.
        let verbatim = if T::EXACT { sum.is_one() } else { sum.within(&T::one(), ROUNDING_NOISE) };
        if verbatim {
            matrix_rows.push(entries);
        } else {
            matrix_rows.push(entries.into_iter().map(|(c, v)| (c, v / sum.clone())).collect());
        }
    }
    choice_offsets.push(matrix_rows.len());
    if states == 0 {
        choice_offsets = vec![0];
    }
    let matrix = SparseMatrix::from_rows(matrix_rows, states)?;
    Ok(ParsedTransitions {
        kind,
        matrix,
        choice_offsets,
        exit_rates: (kind == ModelKind::Ctmc).then_some(exit_rates),
        warnings,
    })
}

fn choice_order(line: usize, state: usize, choice: usize) -> ExplicitError {
    ExplicitError::Syntax {
        line,
        message: format!(
            "choice {} of state {} out of order; choices must be contiguous from 0",
            choice, state
        ),
    }
}

/// Parses a labels file for a model with `states` states.
pub fn parse_labels(text: &str, states: usize) -> Result<StateLabeling, ExplicitError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut declared: Vec<String> = Vec::new();
    let mut in_block = false;
    let mut closed = false;
    let mut first_line = 1;
    for (line, content) in lines.by_ref() {
        first_line = line;
        if !in_block {
            if content.is_empty() {
                continue;
            }
            if content == "#DECLARATION" {
                in_block = true;
                continue;
            }
            return Err(ExplicitError::MissingDeclarationBlock { line });
        }
        if content == "#END" {
            closed = true;
            break;
        }
        for name in content.split_whitespace() {
            if declared.iter().any(|d| d == name) {
                return Err(ExplicitError::Syntax {
                    line,
                    message: format!("label `{}` declared twice", name),
                });
            }
            declared.push(name.to_string());
        }
    }
    if !closed {
        return Err(ExplicitError::MissingDeclarationBlock { line: first_line });
    }

    let mut bits: Vec<BitSet> = declared.iter().map(|_| BitSet::with_capacity(states)).collect();
    for (line, content) in lines {
        let content = content.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let state = parse_index(tokens.next().expect("non-empty line"), line, "state")?;
        if state >= states {
            return Err(ExplicitError::StateOutOfRange { line, state });
        }
        for name in tokens {
            let idx = declared
                .iter()
                .position(|d| d == name)
                .ok_or_else(|| ExplicitError::UndeclaredLabel {
                    line,
                    label: name.to_string(),
                })?;
            bits[idx].insert(state);
        }
    }
    let mut labeling = StateLabeling::new(states);
    for (name, set) in declared.into_iter().zip(bits) {
        labeling.insert(name, set)?;
    }
    Ok(labeling)
}

/// Parses a state reward file; unlisted states get reward zero.
pub fn parse_state_rewards<T: Scalar>(text: &str, states: usize) -> Result<Vec<T>, ExplicitError> {
    let mut rewards = vec![T::zero(); states];
    let mut seen = vec![false; states];
    for (line, content) in content_lines(text) {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(ExplicitError::Syntax {
                line,
                message: format!("expected `state reward`, found {} fields", tokens.len()),
            });
        }
        let state = parse_index(tokens[0], line, "state")?;
        if state >= states {
            return Err(ExplicitError::StateOutOfRange { line, state });
        }
        let value: T = parse_value(tokens[1], line)?;
        if value < T::zero() {
            return Err(ExplicitError::NegativeReward { line });
        }
        if std::mem::replace(&mut seen[state], true) {
            return Err(ExplicitError::DuplicateAssignment { line, state });
        }
        rewards[state] = value;
    }
    Ok(rewards)
}

/// Parses an action reward file against the choice structure
/// `choice_offsets` (one entry per state plus the end).
pub fn parse_action_rewards<T: Scalar>(
    text: &str,
    kind: ModelKind,
    choice_offsets: &[usize],
) -> Result<Vec<T>, ExplicitError> {
    let states = choice_offsets.len() - 1;
    let choices = choice_offsets[states];
    let mut rewards = vec![T::zero(); choices];
    let mut seen = vec![false; choices];
    let arity = if kind == ModelKind::Mdp { 3 } else { 2 };
    for (line, content) in content_lines(text) {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != arity {
            return Err(ExplicitError::Syntax {
                line,
                message: format!("expected {} fields, found {}", arity, tokens.len()),
            });
        }
        let state = parse_index(tokens[0], line, "state")?;
        if state >= states {
            return Err(ExplicitError::StateOutOfRange { line, state });
        }
        let choice = if arity == 3 { parse_index(tokens[1], line, "choice")? } else { 0 };
        let row = choice_offsets[state] + choice;
        if row >= choice_offsets[state + 1] {
            return Err(ExplicitError::ChoiceOutOfRange { line, state, choice });
        }
        let value: T = parse_value(tokens[arity - 1], line)?;
        if value < T::zero() {
            return Err(ExplicitError::NegativeReward { line });
        }
        if std::mem::replace(&mut seen[row], true) {
            return Err(ExplicitError::DuplicateAssignment { line, state });
        }
        rewards[row] = value;
    }
    Ok(rewards)
}

/// Builds a model from a bundle.
pub fn read_model<T: Scalar>(bundle: &ExplicitBundle) -> Result<Model<T>, ExplicitError> {
    let parsed = parse_transitions::<T>(&bundle.transitions)?;
    let kind = parsed.kind;
    let offsets = parsed.choice_offsets.clone();
    let states = parsed.state_count();
    let mut model = parsed.into_model()?;
    let labeling = parse_labels(&bundle.labels, states)?;
    for (name, bits) in labeling.iter() {
        model.add_label(name, bits.clone())?;
    }
    for reward in &bundle.rewards {
        let state = reward
            .state_rewards
            .as_deref()
            .map(|t| parse_state_rewards::<T>(t, states))
            .transpose()?;
        let action = reward
            .action_rewards
            .as_deref()
            .map(|t| parse_action_rewards::<T>(t, kind, &offsets))
            .transpose()?;
        model.add_reward_model(RewardModel::new(reward.name.clone(), state, action)?)?;
    }
    Ok(model)
}

/// Writes a model in canonical form: states, choices and columns ascending,
/// floats in shortest round-trip notation, rationals as `num/den`.
pub fn write_model<T: Scalar>(model: &Model<T>) -> ExplicitBundle {
    let mut tra = String::new();
    tra.push_str(model.kind().keyword());
    tra.push('\n');
    for s in 0..model.state_count() {
        for (local, c) in model.choices(s).enumerate() {
            for (dst, p) in model.matrix().row(c) {
                let value = match model.exit_rates() {
                    Some(rates) => p.clone() * rates[s].clone(),
                    None => p.clone(),
                };
                if model.kind() == ModelKind::Mdp {
                    let _ = writeln!(tra, "{} {} {} {}", s, local, dst, value.to_canonical());
                } else {
                    let _ = writeln!(tra, "{} {} {}", s, dst, value.to_canonical());
                }
            }
        }
    }

    let labeling = model.labeling();
    let mut lab = String::from("#DECLARATION\n");
    lab.push_str(&labeling.iter().map(|(n, _)| n).collect::<Vec<_>>().join(" "));
    lab.push_str("\n#END\n");
    for s in 0..model.state_count() {
        let names: Vec<&str> = labeling.labels_of(s).collect();
        if !names.is_empty() {
            let _ = writeln!(lab, "{} {}", s, names.join(" "));
        }
    }

    let rewards = model
        .reward_models()
        .map(|r| RewardTexts {
            name: r.name().to_string(),
            state_rewards: r.state_rewards().map(|v| {
                let mut out = String::new();
                for (s, value) in v.iter().enumerate().filter(|(_, x)| !x.is_zero()) {
                    let _ = writeln!(out, "{} {}", s, value.to_canonical());
                }
                out
            }),
            action_rewards: r.action_rewards().map(|v| {
                let mut out = String::new();
                for s in 0..model.state_count() {
                    for (local, c) in model.choices(s).enumerate() {
                        if v[c].is_zero() {
                            continue;
                        }
                        if model.kind() == ModelKind::Mdp {
                            let _ = writeln!(out, "{} {} {}", s, local, v[c].to_canonical());
                        } else {
                            let _ = writeln!(out, "{} {}", s, v[c].to_canonical());
                        }
                    }
                }
                out
            }),
        })
        .collect();

    ExplicitBundle {
        transitions: tra,
        labels: lab,
        rewards,
    }
}
