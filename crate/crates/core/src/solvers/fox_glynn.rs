//! Truncated Poisson weights for uniformization.
//!
//! Two steps: a finder picks the window `[left, right]` so that the Poisson
//! mass outside it is at most `epsilon`, and a weighter fills in weights
//! proportional to the pmf by the ratio recurrences
//! `w(k+1) = w(k)·λ/(k+1)` and `w(k-1) = w(k)·k/λ`, starting from the mode.
//!
//! Tail mass is bounded by a geometric series: past the mode the pmf ratio
//! is at most `λ/(k+2)` to the right and `(k-1)/λ` to the left. The weights
//! are unnormalized, so the partial window sum stands in for the total mass;
//! it can only underestimate it, which keeps the bound conservative.

use super::SolverError;

/// Largest Poisson rate accepted.
pub const MAX_LAMBDA: f64 = 1e9;

/// Below this rate the pmf is accumulated directly from `k = 0`.
const DIRECT_LAMBDA: f64 = 25.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FoxGlynn {
    pub left: usize,
    pub right: usize,
    /// `weights[i]` belongs to `k = left + i`.
    pub weights: Vec<f64>,
    pub total_weight: f64,
}

impl FoxGlynn {
    /// Normalized weight of `k`, zero outside the window.
    pub fn probability(&self, k: usize) -> f64 {
        if k < self.left || k > self.right {
            0.0
        } else {
            self.weights[k - self.left] / self.total_weight
        }
    }
}

/// Poisson truncation window and weights for rate `lambda`.
pub fn fox_glynn(lambda: f64, epsilon: f64) -> Result<FoxGlynn, SolverError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SolverError::InvalidPoisson(format!("rate {} must be positive", lambda)));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SolverError::InvalidPoisson(format!(
            "accuracy {} must lie in (0, 1)",
            epsilon
        )));
    }
    if lambda > MAX_LAMBDA {
        return Err(SolverError::LambdaTooLarge(lambda));
    }
    if lambda < DIRECT_LAMBDA {
        Ok(direct(lambda, epsilon))
    } else {
        Ok(from_mode(lambda, epsilon))
    }
}

/// Bound on the mass strictly right of `k`, given `w(k+1)` and `k >= λ - 1`.
fn right_tail(next_weight: f64, k: usize, lambda: f64) -> f64 {
    next_weight / (1.0 - lambda / (k as f64 + 2.0))
}

/// Bound on the mass strictly left of `k`, given `w(k-1)` and `k <= λ`.
fn left_tail(prev_weight: f64, k: usize, lambda: f64) -> f64 {
    prev_weight / (1.0 - (k as f64 - 1.0) / lambda)
}

fn direct(lambda: f64, epsilon: f64) -> FoxGlynn {
    let mode = lambda.floor() as usize;
    let mut weights = vec![(-lambda).exp()];
    let mut k = 0;
    loop {
        let next = weights[k] * lambda / (k as f64 + 1.0);
        if k >= mode && right_tail(next, k, lambda) <= epsilon {
            break;
        }
        weights.push(next);
        k += 1;
    }
    let total_weight = sum_ascending(&weights);
    FoxGlynn {
        left: 0,
        right: k,
        weights,
        total_weight,
    }
}

fn from_mode(lambda: f64, epsilon: f64) -> FoxGlynn {
    let mode = lambda.floor() as usize;
    let half = epsilon / 2.0;

    let mut right_weights = vec![1.0];
    let mut mass = 1.0;
    let mut right = mode;
    loop {
        let next = right_weights[right - mode] * lambda / (right as f64 + 1.0);
        if right_tail(next, right, lambda) <= half * mass {
            break;
        }
        right_weights.push(next);
        mass += next;
        right += 1;
    }

    let mut left_weights = Vec::new();
    let mut current = 1.0;
    let mut left = mode;
    while left > 0 {
        let prev = current * left as f64 / lambda;
        if left_tail(prev, left, lambda) <= half * mass {
            break;
        }
        left_weights.push(prev);
        mass += prev;
        current = prev;
        left -= 1;
    }

    left_weights.reverse();
    let mut weights = left_weights;
    weights.extend(right_weights);
    let total_weight = sum_ascending(&weights);
    FoxGlynn {
        left,
        right,
        weights,
        total_weight,
    }
}

/// Sums a unimodal sequence from both ends towards the peak, adding small
/// terms first.
fn sum_ascending(weights: &[f64]) -> f64 {
    let mut lo = 0;
    let mut hi = weights.len() - 1;
    let mut total = 0.0;
    while lo < hi {
        if weights[lo] <= weights[hi] {
            total += weights[lo];
            lo += 1;
        } else {
            total += weights[hi];
            hi -= 1;
        }
    }
    total + weights[lo]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rate_zero_weight() {
        let fg = fox_glynn(1.0, 1e-6).unwrap();
        assert_eq!(fg.left, 0);
        assert!((fg.probability(0) - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn normalized_sum_bounds() {
        for &(lambda, eps) in &[(0.5, 1e-3), (3.0, 1e-8), (40.0, 1e-6), (1234.5, 1e-10)] {
            let fg = fox_glynn(lambda, eps).unwrap();
            let sum: f64 = (fg.left..=fg.right).map(|k| fg.probability(k)).sum();
            assert!(sum >= 1.0 - eps && sum <= 1.0 + 1e-12, "lambda {}", lambda);
        }
    }

    #[test]
    fn window_for_rate_100() {
        let fg = fox_glynn(100.0, 1e-10).unwrap();
        assert!(fg.left > 0);
        assert!(fg.right < 400);
        assert!(fg.left <= 100 && 100 <= fg.right);
    }

    #[test]
    fn unimodal_with_mode_at_floor_or_ceil() {
        for &lambda in &[0.7, 5.0, 25.0, 99.5, 1000.0] {
            let fg = fox_glynn(lambda, 1e-10).unwrap();
            let peak = (0..fg.weights.len())
                .max_by(|&a, &b| fg.weights[a].partial_cmp(&fg.weights[b]).unwrap())
                .unwrap()
                + fg.left;
            assert!(peak == lambda.floor() as usize || peak == lambda.ceil() as usize);
            let w = &fg.weights;
            let p = peak - fg.left;
            assert!(w[..=p].windows(2).all(|x| x[0] <= x[1]));
            assert!(w[p..].windows(2).all(|x| x[0] >= x[1]));
        }
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(fox_glynn(0.0, 1e-6), Err(SolverError::InvalidPoisson(_))));
        assert!(matches!(fox_glynn(1.0, 0.0), Err(SolverError::InvalidPoisson(_))));
        assert!(matches!(fox_glynn(2e9, 1e-6), Err(SolverError::LambdaTooLarge(_))));
    }
}
