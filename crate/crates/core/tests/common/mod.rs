//! Random model generators and brute-force oracles shared by the
//! integration tests. Nothing here calls into the library's solvers.

#![allow(dead_code)]

use std::path::PathBuf;

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stormlet::model::{Model, ModelKind, RewardModel, SparseMatrix};
use stormlet::scalar::Rational;
use stormlet::{bitset_from, BitSet};

pub type Rows = Vec<Vec<(usize, Rational)>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/models")
}

/// A distribution over `n` states with 1 to 3 successors and small integer
/// weights.
pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, Rational)> {
    let k = rng.gen_range(1..=3.min(n));
    let mut targets: Vec<usize> = Vec::new();
    while targets.len() < k {
        let t = rng.gen_range(0..n);
        if !targets.contains(&t) {
            targets.push(t);
        }
    }
    targets.sort_unstable();
    let weights: Vec<i64> = targets.iter().map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    targets.into_iter().zip(weights).map(|(t, w)| (t, q(w, total))).collect()
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<usize> {
    (0..n).filter(|_| rng.gen_bool(p)).collect()
}

/// Random DTMC with labels `a` and `b` and a state reward `r`.
pub fn random_dtmc(rng: &mut ChaCha8Rng, n: usize) -> Model<Rational> {
    let rows: Rows = (0..n).map(|_| random_distribution(rng, n)).collect();
    let mut m = Model::new(ModelKind::Dtmc, SparseMatrix::from_rows(rows, n).unwrap(), None, None).unwrap();
    decorate(rng, &mut m, n);
    m
}

/// Random MDP with 1 to `max_choices` choices per state.
pub fn random_mdp(rng: &mut ChaCha8Rng, n: usize, max_choices: usize) -> Model<Rational> {
    let mut rows = Rows::new();
    let mut offsets = vec![0];
    for _ in 0..n {
        for _ in 0..rng.gen_range(1..=max_choices) {
            rows.push(random_distribution(rng, n));
        }
        offsets.push(rows.len());
    }
    let choices = rows.len();
    let mut m = Model::new(
        ModelKind::Mdp,
        SparseMatrix::from_rows(rows, n).unwrap(),
        Some(offsets),
        None,
    )
    .unwrap();
    decorate(rng, &mut m, n);
    let action: Vec<Rational> = (0..choices).map(|_| q(rng.gen_range(0..=2), 1)).collect();
    m.add_reward_model(RewardModel::new("act", None, Some(action)).unwrap()).unwrap();
    m
}

fn decorate(rng: &mut ChaCha8Rng, m: &mut Model<Rational>, n: usize) {
    m.add_label("a", bitset_from(n, random_subset(rng, n, 0.3))).unwrap();
    m.add_label("b", bitset_from(n, random_subset(rng, n, 0.5))).unwrap();
    let rewards: Vec<Rational> = (0..n).map(|_| q(rng.gen_range(0..=3), 1)).collect();
    m.add_reward_model(RewardModel::new("r", Some(rewards), None).unwrap()).unwrap();
}

pub fn to_float(m: &Model<Rational>) -> Model<f64> {
    m.convert(stormlet::scalar::rational_to_f64)
}

pub fn rows_of(m: &Model<Rational>) -> Rows {
    (0..m.matrix().rows())
        .map(|c| m.matrix().row(c).map(|(t, v)| (t, v.clone())).collect())
        .collect()
}

pub fn members(set: &BitSet, n: usize) -> Vec<bool> {
    (0..n).map(|s| set.contains(s)).collect()
}

/// Solves `(I - A)·x = b` by Gauss-Jordan elimination with rational
/// arithmetic. Panics on a singular system.
pub fn gauss(a: &[Vec<Rational>], b: &[Rational]) -> Vec<Rational> {
    let n = b.len();
    let mut m: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let mut row: Vec<Rational> = (0..n)
                .map(|j| {
                    let id = if i == j { Rational::one() } else { Rational::zero() };
                    id - a[i][j].clone()
                })
                .collect();
            row.push(b[i].clone());
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero()).expect("singular system");
        m.swap(col, pivot);
        let p = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = v.clone() / p.clone();
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..=n {
                    let d = f.clone() * m[col][c].clone();
                    m[r][c] = m[r][c].clone() - d;
                }
            }
        }
    }
    m.into_iter().map(|row| row[n].clone()).collect()
}

/// States that can reach `target` through `safe` states, by backward search.
pub fn can_reach(rows: &Rows, safe: &[bool], target: &[bool]) -> Vec<bool> {
    let n = rows.len();
    let mut reach = target.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !reach[s] && safe[s] && rows[s].iter().any(|(t, p)| reach[*t] && !p.is_zero()) {
                reach[s] = true;
                changed = true;
            }
        }
        if !changed {
            return reach;
        }
    }
}

/// Exact probability of `safe U target` on a chain given by one row per
/// state.
pub fn until_prob(rows: &Rows, safe: &[bool], target: &[bool]) -> Vec<Rational> {
    let n = rows.len();
    let reach = can_reach(rows, safe, target);
    let unknown: Vec<usize> = (0..n).filter(|&s| reach[s] && !target[s]).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        index[s] = i;
    }
    let mut a = vec![vec![Rational::zero(); unknown.len()]; unknown.len()];
    let mut b = vec![Rational::zero(); unknown.len()];
    for (i, &s) in unknown.iter().enumerate() {
        for (t, p) in &rows[s] {
            if target[*t] {
                b[i] = b[i].clone() + p.clone();
            } else if index[*t] != usize::MAX {
                a[i][index[*t]] = a[i][index[*t]].clone() + p.clone();
            }
        }
    }
    let x = gauss(&a, &b);
    (0..n)
        .map(|s| {
            if target[s] {
                Rational::one()
            } else if index[s] != usize::MAX {
                x[index[s]].clone()
            } else {
                Rational::zero()
            }
        })
        .collect()
}

/// Exact expected reward until `target`; `None` where `target` is missed
/// with positive probability.
pub fn reach_reward(rows: &Rows, reward: &[Rational], target: &[bool]) -> Vec<Option<Rational>> {
    let n = rows.len();
    let all = vec![true; n];
    let p = until_prob(rows, &all, target);
    let unknown: Vec<usize> = (0..n).filter(|&s| !target[s] && p[s].is_one()).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        index[s] = i;
    }
    let mut a = vec![vec![Rational::zero(); unknown.len()]; unknown.len()];
    let b: Vec<Rational> = unknown.iter().map(|&s| reward[s].clone()).collect();
    for (i, &s) in unknown.iter().enumerate() {
        for (t, pr) in &rows[s] {
            if !target[*t] {
                a[i][index[*t]] = a[i][index[*t]].clone() + pr.clone();
            }
        }
    }
    let x = gauss(&a, &b);
    (0..n)
        .map(|s| {
            if target[s] {
                Some(Rational::zero())
            } else if index[s] != usize::MAX {
                Some(x[index[s]].clone())
            } else {
                None
            }
        })
        .collect()
}

/// Every memoryless deterministic scheduler, as a local choice per state.
pub fn schedulers(offsets: &[usize]) -> Vec<Vec<usize>> {
    let counts: Vec<usize> = offsets.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = vec![Vec::new()];
    for &c in &counts {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..c).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

/// Rows and per-state rewards of the chain induced by a scheduler.
pub fn induced(m: &Model<Rational>, sched: &[usize], reward: &str) -> (Rows, Vec<Rational>) {
    let offsets = m.choice_offsets();
    let all = rows_of(m);
    let rm = m.reward_model(reward).unwrap();
    let per_choice = rm.choice_rewards(offsets);
    let rows = sched.iter().enumerate().map(|(s, &l)| all[offsets[s] + l].clone()).collect();
    let rewards = sched.iter().enumerate().map(|(s, &l)| per_choice[offsets[s] + l].clone()).collect();
    (rows, rewards)
}

/// Extreme values over all memoryless deterministic schedulers.
pub struct Extremes {
    pub pmin: Vec<Rational>,
    pub pmax: Vec<Rational>,
    /// `None` stands for infinity.
    pub rmin: Vec<Option<Rational>>,
    pub rmax: Vec<Option<Rational>>,
}

pub fn enumerate_extremes(m: &Model<Rational>, target: &[bool], reward: &str) -> Extremes {
    let n = m.state_count();
    let all = vec![true; n];
    let mut ex = Extremes {
        pmin: vec![Rational::one(); n],
        pmax: vec![Rational::zero(); n],
        rmin: vec![None; n],
        rmax: vec![Some(Rational::zero()); n],
    };
    for sched in schedulers(m.choice_offsets()) {
        let (rows, rewards) = induced(m, &sched, reward);
        let p = until_prob(&rows, &all, target);
        let r = reach_reward(&rows, &rewards, target);
        for s in 0..n {
            if p[s] < ex.pmin[s] {
                ex.pmin[s] = p[s].clone();
            }
            if p[s] > ex.pmax[s] {
                ex.pmax[s] = p[s].clone();
            }
            ex.rmin[s] = match (&ex.rmin[s], &r[s]) {
                (Some(a), Some(b)) => Some(a.clone().min(b.clone())),
                (None, b) => b.clone(),
                (a, None) => a.clone(),
            };
            ex.rmax[s] = match (&ex.rmax[s], &r[s]) {
                (Some(a), Some(b)) => Some(a.clone().max(b.clone())),
                _ => None,
            };
        }
    }
    ex
}

/// Probability of `safe U<=k target` by summing over all paths of length
/// at most `k`.
pub fn bounded_until_paths(rows: &[Vec<(usize, f64)>], safe: &[bool], target: &[bool], s: usize, k: usize) -> f64 {
    if target[s] {
        return 1.0;
    }
    if k == 0 || !safe[s] {
        return 0.0;
    }
    rows[s]
        .iter()
        .map(|&(t, p)| p * bounded_until_paths(rows, safe, target, t, k - 1))
        .sum()
}

/// Expected reward over the first `k` steps by summing over all paths.
pub fn cumulative_paths(rows: &[Vec<(usize, f64)>], reward: &[f64], s: usize, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    reward[s]
        + rows[s]
            .iter()
            .map(|&(t, p)| p * cumulative_paths(rows, reward, t, k - 1))
            .sum::<f64>()
}

pub fn float_rows(m: &Model<Rational>) -> Vec<Vec<(usize, f64)>> {
    rows_of(m)
        .into_iter()
        .map(|row| row.into_iter().map(|(t, p)| (t, stormlet::scalar::rational_to_f64(&p))).collect())
        .collect()
}

/// `ln(k!)` by direct summation.
fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Poisson pmf evaluated in the log domain.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    (k as f64 * lambda.ln() - lambda - ln_factorial(k)).exp()
}

/// Poisson mass outside `[left, right]`, summed term by term.
pub fn poisson_tail_mass(lambda: f64, left: u64, right: u64) -> f64 {
    let below: f64 = (0..left).map(|k| poisson_pmf(lambda, k)).sum();
    let mut above = 0.0;
    let mut k = right + 1;
    loop {
        let p = poisson_pmf(lambda, k);
        above += p;
        if (k as f64) > lambda && p < 1e-30 {
            break;
        }
        k += 1;
    }
    below + above
}
