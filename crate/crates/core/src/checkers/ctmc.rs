//! Time-bounded until on CTMCs by uniformization.

use super::CheckError;
use crate::model::prob0;
use crate::model::Model;
use crate::scalar::Scalar;
use crate::solvers::{fox_glynn, SolverEnvironment};
use crate::BitSet;

/// Uniformization rate as a multiple of the largest exit rate.
pub const UNIFORMIZATION_FACTOR: f64 = 1.02;

/// Probability of `left U<=t right` on a CTMC.
///
/// `right` states are made absorbing with value 1 and states that cannot
/// reach them through `left` get 0. The remaining states are uniformized
/// with rate `q = 1.02 · max exit rate`, and the result is the Poisson
/// mixture `Σ_k w_k · P(reach right within k jumps)` over the Fox–Glynn
/// window for `q·t` at accuracy `env.precision`.
///
/// Floating point only: transient probabilities are irrational in general.
pub fn check_timebounded_until_ctmc<T: Scalar>(
    model: &Model<T>,
    left: &BitSet,
    right: &BitSet,
    t: f64,
    env: &SolverEnvironment,
) -> Result<Vec<f64>, CheckError> {
    let rates = model.exit_rates().ok_or_else(|| {
        CheckError::UnsupportedCombination("time bounds need a continuous-time model".into())
    })?;
    if T::EXACT {
        return Err(CheckError::UnsupportedCombination(
            "time-bounded until on a CTMC has no exact mode".into(),
        ));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CheckError::InvalidBound(format!("time bound {}", t)));
    }
    let n = model.state_count();
    let mut values: Vec<f64> = (0..n).map(|s| if right.contains(s) { 1.0 } else { 0.0 }).collect();
    let mut maybe = left.clone();
    maybe.difference_with(right);
    maybe.difference_with(&prob0(model, left, right));
    let states: Vec<usize> = maybe.ones().collect();
    if states.is_empty() || t == 0.0 {
        return Ok(values);
    }

    let q = UNIFORMIZATION_FACTOR * states.iter().map(|&s| rates[s].to_f64()).fold(0.0, f64::max);
    let mut index = vec![usize::MAX; n];
    for (i, &s) in states.iter().enumerate() {
        index[s] = i;
    }
    // Uniformized rows over the maybe states plus one-step mass into `right`.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(states.len());
    let mut b = vec![0.0; states.len()];
    for (i, &s) in states.iter().enumerate() {
        let scale = rates[s].to_f64() / q;
        let mut row = vec![(i, 1.0 - scale)];
        for (j, p) in model.matrix().row(s) {
            let p = p.to_f64() * scale;
            if right.contains(j) {
                b[i] += p;
            } else if index[j] != usize::MAX {
                if j == s {
                    row[0].1 += p;
                } else {
                    row.push((index[j], p));
                }
            }
        }
        rows.push(row);
    }

    let fg = fox_glynn(q * t, env.precision)?;
    let mut y = vec![0.0; states.len()];
    let mut acc = vec![0.0; states.len()];
    for k in 0..=fg.right {
        if k >= fg.left {
            let w = fg.weights[k - fg.left];
            for (a, v) in acc.iter_mut().zip(&y) {
                *a += w * v;
            }
        }
        let next: Vec<f64> = rows
            .iter()
            .zip(&b)
            .map(|(row, bi)| row.iter().fold(*bi, |sum, &(j, p)| sum + p * y[j]))
            .collect();
        y = next;
    }
    for (i, &s) in states.iter().enumerate() {
        values[s] = acc[i] / fg.total_weight;
    }
    Ok(values)
}
