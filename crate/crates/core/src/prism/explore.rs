//! Explicit state-space construction.

use std::collections::HashMap;

use super::ast::Expr;
use super::check::{Scope, TypedCommand, TypedProgram, TypedRewardItem, Value};
use super::lexer::Span;
use super::PrismError;
use crate::model::{Model, ModelKind, RewardModel, SparseMatrix, StateLabeling};
use crate::scalar::Scalar;
use crate::BitSet;

/// Update weights of DTMC and MDP commands must sum to one within this.
pub const WEIGHT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    /// Give states without enabled commands a probability-1 self-loop
    /// instead of failing.
    pub fix_deadlocks: bool,
    pub max_states: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            fix_deadlocks: false,
            max_states: 10_000_000,
        }
    }
}

/// Bijection between state indices and variable valuations.
#[derive(Clone, Debug, PartialEq)]
pub struct StateMap<T> {
    scope: Scope<T>,
    valuations: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

impl<T: Scalar> StateMap<T> {
    pub fn len(&self) -> usize {
        self.valuations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valuations.is_empty()
    }

    pub fn scope(&self) -> &Scope<T> {
        &self.scope
    }

    /// Variable values of a state, in declaration order; booleans as 0/1.
    pub fn valuation(&self, state: usize) -> &[i64] {
        &self.valuations[state]
    }

    pub fn index_of(&self, valuation: &[i64]) -> Option<usize> {
        self.index.get(valuation).copied()
    }

    pub fn describe(&self, state: usize) -> String {
        self.scope.describe(&self.valuations[state])
    }

    /// States satisfying a boolean expression over the program's names.
    pub fn evaluate(&self, predicate: &Expr) -> Result<BitSet, PrismError> {
        let typed = self.scope.check(predicate)?;
        if typed.ty() != super::check::Type::Bool {
            return Err(PrismError::TypeMismatch {
                span: predicate.span,
                message: format!("predicate must be bool, found {}", typed.ty()),
            });
        }
        let mut bits = BitSet::with_capacity(self.len());
        for (s, v) in self.valuations.iter().enumerate() {
            if typed.eval_bool(v)? {
                bits.insert(s);
            }
        }
        Ok(bits)
    }
}

/// Command that contributed to a choice row, with its share of the row.
#[derive(Clone, Debug, PartialEq)]
struct RowCommand<T> {
    action: Option<usize>,
    share: T,
}

/// Result of exploration, before labels and rewards are attached.
#[derive(Clone, Debug, PartialEq)]
pub struct Explored<T> {
    pub model: Model<T>,
    pub states: StateMap<T>,
    /// States that received a self-loop because nothing was enabled.
    pub deadlocks: BitSet,
    actions: Vec<String>,
    row_commands: Vec<Vec<RowCommand<T>>>,
}

enum Slot {
    Single(usize, usize),
    Sync(usize),
}

/// A (possibly synchronized) command instantiated in one state.
struct Combined<T> {
    action: Option<usize>,
    branches: Vec<(T, Vec<(usize, i64)>)>,
}

struct Explorer<'a, T> {
    program: &'a TypedProgram<T>,
    options: &'a ExploreOptions,
    actions: Vec<String>,
    /// Modules mentioning each action, ascending.
    participants: Vec<Vec<usize>>,
    slots: Vec<Slot>,
    valuations: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

impl<'a, T: Scalar> Explorer<'a, T> {
    fn new(program: &'a TypedProgram<T>, options: &'a ExploreOptions) -> Self {
        let mut actions: Vec<String> = Vec::new();
        let mut participants: Vec<Vec<usize>> = Vec::new();
        let mut slots = Vec::new();
        for (m, module) in program.modules.iter().enumerate() {
            for (c, command) in module.commands.iter().enumerate() {
                match &command.action {
                    None => slots.push(Slot::Single(m, c)),
                    Some(name) => match actions.iter().position(|a| a == name) {
                        Some(a) => {
                            if participants[a].last() != Some(&m) {
                                participants[a].push(m);
                            }
                        }
                        None => {
                            slots.push(Slot::Sync(actions.len()));
                            actions.push(name.clone());
                            participants.push(vec![m]);
                        }
                    },
                }
            }
        }
        Explorer {
            program,
            options,
            actions,
            participants,
            slots,
            valuations: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn describe(&self, state: &[i64]) -> String {
        self.program.scope.describe(state)
    }

    fn intern(&mut self, valuation: Vec<i64>) -> Result<usize, PrismError> {
        if let Some(&i) = self.index.get(&valuation) {
            return Ok(i);
        }
        if self.valuations.len() >= self.options.max_states {
            return Err(PrismError::StateLimitExceeded {
                limit: self.options.max_states,
            });
        }
        let i = self.valuations.len();
        self.index.insert(valuation.clone(), i);
        self.valuations.push(valuation);
        Ok(i)
    }

    /// Weighted branches of one command, with assignments evaluated.
    fn branches(
        &self,
        command: &TypedCommand<T>,
        state: &[i64],
    ) -> Result<Vec<(T, Vec<(usize, i64)>)>, PrismError> {
        let mut weights = Vec::with_capacity(command.updates.len());
        for u in &command.updates {
            let w = u.weight.eval(state)?.as_real();
            if w < T::zero() {
                return Err(PrismError::NegativeWeight {
                    span: u.span,
                    state: self.describe(state),
                });
            }
            weights.push(w);
        }
        if self.program.model_type != ModelKind::Ctmc {
            let sum = weights.iter().fold(T::zero(), |acc, w| acc + w.clone());
            if !sum.within(&T::one(), WEIGHT_TOLERANCE) {
                return Err(PrismError::NonNormalizedDistribution {
                    span: command.span,
                    state: self.describe(state),
                    sum: sum.to_f64(),
                });
            }
            if sum != T::one() {
                for w in &mut weights {
                    *w = w.clone() / sum.clone();
                }
            }
        }
        let mut out = Vec::new();
        for (u, w) in command.updates.iter().zip(weights) {
            if w.is_zero() {
                continue;
            }
            let mut assignments = Vec::with_capacity(u.assignments.len());
            for (slot, expr) in &u.assignments {
                let value = match expr.eval(state)? {
                    Value::Bool(b) => i64::from(b),
                    Value::Int(i) => i,
                    Value::Real(_) => unreachable!("type checker rejects real assignments"),
                };
                let var = &self.program.scope.variables()[*slot];
                if value < var.low || value > var.high {
                    return Err(PrismError::OutOfBoundsAssignment {
                        span: expr.span(),
                        state: self.describe(state),
                        variable: var.name.clone(),
                        value,
                    });
                }
                assignments.push((*slot, value));
            }
            out.push((w, assignments));
        }
        Ok(out)
    }

    fn enabled(&self, state: &[i64]) -> Result<Vec<Combined<T>>, PrismError> {
        let mut out = Vec::new();
        for slot in &self.slots {
            match *slot {
                Slot::Single(m, c) => {
                    let command = &self.program.modules[m].commands[c];
                    if command.guard.eval_bool(state)? {
                        out.push(Combined {
                            action: None,
                            branches: self.branches(command, state)?,
                        });
                    }
                }
                Slot::Sync(a) => {
                    // Enabled commands per participating module.
                    let mut per_module = Vec::new();
                    for &m in &self.participants[a] {
                        let mut enabled = Vec::new();
                        for command in &self.program.modules[m].commands {
                            if command.action.as_deref() == Some(self.actions[a].as_str())
                                && command.guard.eval_bool(state)?
                            {
                                enabled.push(self.branches(command, state)?);
                            }
                        }
                        if enabled.is_empty() {
                            per_module.clear();
                            break;
                        }
                        per_module.push(enabled);
                    }
                    if per_module.is_empty() {
                        continue;
                    }
                    // Cartesian product over modules, first module varying slowest.
                    let mut combos: Vec<Vec<(T, Vec<(usize, i64)>)>> = vec![vec![(T::one(), Vec::new())]];
                    for enabled in &per_module {
                        let mut next = Vec::with_capacity(combos.len() * enabled.len());
                        for partial in &combos {
                            for branches in enabled {
                                let mut merged = Vec::with_capacity(partial.len() * branches.len());
                                for (w1, a1) in partial {
                                    for (w2, a2) in branches {
                                        let mut assign = a1.clone();
                                        assign.extend(a2.iter().copied());
                                        merged.push((w1.clone() * w2.clone(), assign));
                                    }
                                }
                                next.push(merged);
                            }
                        }
                        combos = next;
                    }
                    out.extend(combos.into_iter().map(|branches| Combined {
                        action: Some(a),
                        branches,
                    }));
                }
            }
        }
        Ok(out)
    }

    fn run(mut self) -> Result<Explored<T>, PrismError> {
        let kind = self.program.model_type;
        self.intern(self.program.initial_state.clone())?;
        let mut rows: Vec<Vec<(usize, T)>> = Vec::new();
        let mut row_commands = Vec::new();
        let mut offsets = vec![0];
        let mut exit_rates = Vec::new();
        let mut deadlocks = Vec::new();
        let mut s = 0;
        while s < self.valuations.len() {
            let state = self.valuations[s].clone();
            let mut combined = self.enabled(&state)?;
            combined.retain(|c| !c.branches.is_empty());
            if combined.is_empty() {
                if !self.options.fix_deadlocks {
                    return Err(PrismError::DeadlockState {
                        state: self.describe(&state),
                    });
                }
                deadlocks.push(s);
                rows.push(vec![(s, T::one())]);
                row_commands.push(Vec::new());
                exit_rates.push(T::one());
                s += 1;
                offsets.push(rows.len());
                continue;
            }
            let mut targets = Vec::with_capacity(combined.len());
            for c in &combined {
                let mut t = Vec::with_capacity(c.branches.len());
                for (w, assignments) in &c.branches {
                    let mut next = state.clone();
                    for &(slot, value) in assignments {
                        next[slot] = value;
                    }
                    t.push((self.intern(next)?, w.clone()));
                }
                targets.push(t);
            }
            match kind {
                ModelKind::Mdp => {
                    for (c, t) in combined.iter().zip(targets) {
                        rows.push(t);
                        row_commands.push(vec![RowCommand {
                            action: c.action,
                            share: T::one(),
                        }]);
                    }
                }
                ModelKind::Dtmc => {
                    let count = T::from_i64(combined.len() as i64);
                    let share = T::one() / count.clone();
                    rows.push(
                        targets
                            .into_iter()
                            .flatten()
                            .map(|(t, w)| (t, w / count.clone()))
                            .collect(),
                    );
                    row_commands.push(
                        combined
                            .iter()
                            .map(|c| RowCommand {
                                action: c.action,
                                share: share.clone(),
                            })
                            .collect(),
                    );
                }
                ModelKind::Ctmc => {
                    let command_rates: Vec<T> = targets
                        .iter()
                        .map(|t| t.iter().fold(T::zero(), |acc, (_, w)| acc + w.clone()))
                        .collect();
                    let total = command_rates.iter().fold(T::zero(), |acc, r| acc + r.clone());
                    rows.push(
                        targets
                            .into_iter()
                            .flatten()
                            .map(|(t, w)| (t, w / total.clone()))
                            .collect(),
                    );
                    row_commands.push(
                        combined
                            .iter()
                            .zip(command_rates)
                            .map(|(c, r)| RowCommand {
                                action: c.action,
                                share: r / total.clone(),
                            })
                            .collect(),
                    );
                    exit_rates.push(total);
                }
            }
            offsets.push(rows.len());
            s += 1;
        }

        let n = self.valuations.len();
        let matrix = SparseMatrix::from_rows(rows, n)?;
        let model = Model::new(
            kind,
            matrix,
            (kind == ModelKind::Mdp).then_some(offsets),
            (kind == ModelKind::Ctmc).then_some(exit_rates),
        )?;
        Ok(Explored {
            model,
            states: StateMap {
                scope: self.program.scope.clone(),
                valuations: self.valuations,
                index: self.index,
            },
            deadlocks: crate::bitset_from(n, deadlocks),
            actions: self.actions,
            row_commands,
        })
    }
}

/// Breadth-first exploration from the initial valuation. States are numbered
/// in discovery order and choices follow the order of commands in the source,
/// a synchronized action taking the position of its first command.
///
/// DTMC states choose uniformly among their enabled commands; CTMC rates of
/// enabled commands add up; every enabled command of an MDP is a choice.
pub fn explore<T: Scalar>(
    program: &TypedProgram<T>,
    options: &ExploreOptions,
) -> Result<Explored<T>, PrismError> {
    Explorer::new(program, options).run()
}

/// Evaluates the declared labels plus the built-ins `init` and `deadlock`.
pub fn build_label_bitsets<T: Scalar>(
    program: &TypedProgram<T>,
    explored: &Explored<T>,
) -> Result<StateLabeling, PrismError> {
    let n = explored.states.len();
    let mut labeling = StateLabeling::new(n);
    labeling.insert("init", explored.model.initial_states().clone())?;
    labeling.insert("deadlock", explored.deadlocks.clone())?;
    for (name, expr) in &program.labels {
        let mut bits = BitSet::with_capacity(n);
        for s in 0..n {
            if expr.eval_bool(explored.states.valuation(s))? {
                bits.insert(s);
            }
        }
        labeling.insert(name.clone(), bits)?;
    }
    Ok(labeling)
}

/// Evaluates every reward block. State items add up per state; action items
/// add up per choice, weighted by each command's share of the choice (its
/// probability of being picked in a DTMC, its share of the exit rate in a
/// CTMC).
pub fn build_reward_models<T: Scalar>(
    program: &TypedProgram<T>,
    explored: &Explored<T>,
) -> Result<Vec<RewardModel<T>>, PrismError> {
    let offsets = explored.model.choice_offsets();
    let n = explored.states.len();
    let mut out = Vec::new();
    for block in &program.rewards {
        let negative = |state: usize, span: Span| PrismError::NegativeReward {
            block: block.name.clone(),
            state: explored.states.describe(state),
            span,
        };
        let has_state = block.items.iter().any(|i| matches!(i, TypedRewardItem::State { .. }));
        let has_action = block.items.iter().any(|i| matches!(i, TypedRewardItem::Action { .. }));

        let state_rewards = if has_state || !has_action {
            let mut r = vec![T::zero(); n];
            for (s, slot) in r.iter_mut().enumerate() {
                let v = explored.states.valuation(s);
                for item in &block.items {
                    if let TypedRewardItem::State { guard, value } = item {
                        if guard.eval_bool(v)? {
                            let x = value.eval(v)?.as_real();
                            if x < T::zero() {
                                return Err(negative(s, value.span()));
                            }
                            *slot = slot.clone() + x;
                        }
                    }
                }
            }
            Some(r)
        } else {
            None
        };

        let action_rewards = if has_action {
            let mut r = vec![T::zero(); explored.row_commands.len()];
            for s in 0..n {
                let v = explored.states.valuation(s);
                for row in offsets[s]..offsets[s + 1] {
                    for rc in &explored.row_commands[row] {
                        let name = rc.action.map(|a| explored.actions[a].as_str());
                        for item in &block.items {
                            let TypedRewardItem::Action { action, guard, value } = item else {
                                continue;
                            };
                            if action.as_deref() != name || !guard.eval_bool(v)? {
                                continue;
                            }
                            let x = value.eval(v)?.as_real();
                            if x < T::zero() {
                                return Err(negative(s, value.span()));
                            }
                            r[row] = r[row].clone() + rc.share.clone() * x;
                        }
                    }
                }
            }
            Some(r)
        } else {
            None
        };
        out.push(RewardModel::new(block.name.clone(), state_rewards, action_rewards)?);
    }
    Ok(out)
}
