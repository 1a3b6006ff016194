//! Qualitative precomputation: the states where an until formula holds with
//! probability exactly 0 or exactly 1, found by graph search alone.

use std::collections::VecDeque;

use super::Model;
use crate::scalar::Scalar;
use crate::BitSet;

/// Choice-level backward adjacency of a model.
struct Backward {
    /// `pred_choices[s]`: matrix rows with an edge into `s`.
    pred_choices: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

impl Backward {
    fn new<T: Scalar>(model: &Model<T>) -> Self {
        let n = model.state_count();
        let mut owner = vec![0; model.choice_count()];
        let mut pred_choices = vec![Vec::new(); n];
        for s in 0..n {
            for c in model.choices(s) {
                owner[c] = s;
                for (t, _) in model.matrix().row(c) {
                    pred_choices[t].push(c);
                }
            }
        }
        Backward {
            pred_choices,
            owner,
        }
    }
}

/// States that can reach `target` through `safe` states along some path.
fn exists_reach(back: &Backward, safe: &BitSet, target: &BitSet) -> BitSet {
    let mut reached = target.clone();
    let mut queue: VecDeque<usize> = target.ones().collect();
    while let Some(t) = queue.pop_front() {
        for &c in &back.pred_choices[t] {
            let s = back.owner[c];
            if !reached.contains(s) && safe.contains(s) {
                reached.insert(s);
                queue.push_back(s);
            }
        }
    }
    reached
}

/// States with probability 0 of satisfying `safe U target`.
pub fn prob0<T: Scalar>(model: &Model<T>, safe: &BitSet, target: &BitSet) -> BitSet {
    let back = Backward::new(model);
    let mut result = exists_reach(&back, safe, target);
    result.toggle_range(..);
    result
}

/// States with probability 1 of satisfying `safe U target`, given the
/// matching [`prob0`] result `p0`.
///
/// A state misses probability 1 exactly when it can reach a probability-0
/// state through `safe \ target` states.
pub fn prob1<T: Scalar>(model: &Model<T>, safe: &BitSet, target: &BitSet, p0: &BitSet) -> BitSet {
    let back = Backward::new(model);
    let mut through = safe.clone();
    through.difference_with(target);
    let mut result = exists_reach(&back, &through, p0);
    result.toggle_range(..);
    result
}

/// `(prob0A, prob1E)` for maximal probabilities: states where every
/// scheduler yields probability 0, and states where some scheduler yields 1.
pub fn prob01_max<T: Scalar>(model: &Model<T>, safe: &BitSet, target: &BitSet) -> (BitSet, BitSet) {
    let back = Backward::new(model);
    let mut prob0a = exists_reach(&back, safe, target);
    prob0a.toggle_range(..);

    // Greatest fixed point: shrink `current` to the states that can reach
    // the target using only choices that never leave `current`.
    let n = model.state_count();
    let mut current = BitSet::with_capacity(n);
    current.insert_range(..);
    loop {
        let mut next = target.clone();
        let mut queue: VecDeque<usize> = target.ones().collect();
        while let Some(t) = queue.pop_front() {
            for &c in &back.pred_choices[t] {
                let s = back.owner[c];
                if next.contains(s) || !safe.contains(s) || !current.contains(s) {
                    continue;
                }
                if model.matrix().row(c).all(|(succ, _)| current.contains(succ)) {
                    next.insert(s);
                    queue.push_back(s);
                }
            }
        }
        if next == current {
            return (prob0a, current);
        }
        current = next;
    }
}

/// `(prob0E, prob1A)` for minimal probabilities: states where some
/// scheduler yields probability 0, and states where every scheduler yields 1.
pub fn prob01_min<T: Scalar>(model: &Model<T>, safe: &BitSet, target: &BitSet) -> (BitSet, BitSet) {
    let back = Backward::new(model);
    let n = model.state_count();

    // States forced towards the target: every choice has a successor that
    // is already forced.
    let mut forced = target.clone();
    let mut hit = vec![false; model.choice_count()];
    let mut hit_count = vec![0usize; n];
    let mut queue: VecDeque<usize> = target.ones().collect();
    while let Some(t) = queue.pop_front() {
        for &c in &back.pred_choices[t] {
            if hit[c] {
                continue;
            }
            hit[c] = true;
            let s = back.owner[c];
            hit_count[s] += 1;
            if hit_count[s] == model.choices(s).len() && !forced.contains(s) && safe.contains(s) {
                forced.insert(s);
                queue.push_back(s);
            }
        }
    }
    let mut prob0e = forced;
    prob0e.toggle_range(..);

    let mut through = safe.clone();
    through.difference_with(target);
    let mut prob1a = exists_reach(&back, &through, &prob0e);
    prob1a.toggle_range(..);
    (prob0e, prob1a)
}
