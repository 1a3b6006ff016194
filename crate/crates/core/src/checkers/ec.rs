//! Collapsing zero-reward end components before a minimizing reward solve.
//!
//! Inside such a component a scheduler can idle forever for free, which
//! makes zero a fixed point of the Bellman operator even though idling never
//! reaches the target. Merging each component into one state whose choices
//! are the component's exits removes these spurious fixed points.

use super::discrete::Restricted;
use crate::model::SparseMatrix;
use crate::scalar::Scalar;

pub(crate) struct Collapsed<T> {
    pub system: Restricted<T>,
    /// Collapsed state of each original restricted state.
    pub members: Vec<usize>,
    /// Original restricted state owning each collapsed row.
    owner: Vec<usize>,
}

impl<T> Collapsed<T> {
    /// Maps an optimal choice per collapsed state (as a local index into
    /// the collapsed rows) back to original local choices. Members of a
    /// component that do not own the exit choice get `None`.
    pub fn expand_scheduler(&self, local: &[usize]) -> Vec<Option<usize>> {
        let mut out = vec![None; self.members.len()];
        for (q, &l) in local.iter().enumerate() {
            let row = self.system.offsets[q] + l;
            out[self.owner[row]] = Some(self.system.local_choice[row]);
        }
        out
    }
}

/// Strongly connected components; returns a component id per node.
fn scc(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    // First pass: finishing order by iterative DFS.
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some((v, i)) = stack.last_mut() {
            if let Some(&w) = adj[*v].get(*i) {
                *i += 1;
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(*v);
                stack.pop();
            }
        }
    }
    let mut rev = vec![Vec::new(); n];
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            rev[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = next;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &w in &rev[v] {
                if comp[w] == usize::MAX {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}

pub(crate) fn collapse_zero_reward_ecs<T: Scalar>(r: Restricted<T>) -> Collapsed<T> {
    let n = r.states.len();
    let rows = r.b.len();
    let mut owner = vec![0; rows];
    for s in 0..n {
        for c in r.offsets[s]..r.offsets[s + 1] {
            owner[c] = s;
        }
    }
    let mut allowed: Vec<bool> = (0..rows).map(|c| !r.leaks[c] && r.b[c].is_zero()).collect();

    // Shrink to the maximal end components of the zero-reward choices.
    let comp = loop {
        let mut adj = vec![Vec::new(); n];
        for c in (0..rows).filter(|&c| allowed[c]) {
            adj[owner[c]].extend(r.matrix.row(c).map(|(t, _)| t));
        }
        let comp = scc(&adj);
        let mut changed = false;
        for c in 0..rows {
            if !allowed[c] {
                continue;
            }
            let home = comp[owner[c]];
            if r.matrix.row(c).any(|(t, _)| comp[t] != home) {
                allowed[c] = false;
                changed = true;
            }
        }
        if !changed {
            break comp;
        }
    };

    let in_ec: Vec<bool> = (0..n)
        .map(|s| (r.offsets[s]..r.offsets[s + 1]).any(|c| allowed[c]))
        .collect();
    if !in_ec.iter().any(|&e| e) {
        return Collapsed {
            members: (0..n).collect(),
            owner,
            system: r,
        };
    }

    // Number the collapsed states in order of their smallest member.
    let mut class_of_comp = vec![usize::MAX; n];
    let mut members = vec![0; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        let id = if in_ec[s] {
            if class_of_comp[comp[s]] == usize::MAX {
                class_of_comp[comp[s]] = classes.len();
                classes.push(Vec::new());
            }
            class_of_comp[comp[s]]
        } else {
            classes.push(Vec::new());
            classes.len() - 1
        };
        classes[id].push(s);
        members[s] = id;
    }

    let mut new_rows = Vec::new();
    let mut offsets = vec![0];
    let mut b = Vec::new();
    let mut local_choice = Vec::new();
    let mut leaks = Vec::new();
    let mut new_owner = Vec::new();
    for class in &classes {
        for &s in class {
            for c in r.offsets[s]..r.offsets[s + 1] {
                if allowed[c] {
                    continue;
                }
                new_rows.push(r.matrix.row(c).map(|(t, v)| (members[t], v.clone())).collect());
                b.push(r.b[c].clone());
                local_choice.push(r.local_choice[c]);
                leaks.push(r.leaks[c]);
                new_owner.push(s);
            }
        }
        offsets.push(new_rows.len());
    }
    let matrix = SparseMatrix::from_rows(new_rows, classes.len()).expect("indices within range");
    Collapsed {
        system: Restricted {
            matrix,
            offsets,
            b,
            states: classes.iter().map(|c| r.states[c[0]]).collect(),
            local_choice,
            leaks,
        },
        members,
        owner: new_owner,
    }
}
