//! Closed-form convergence trajectories and bounds for the band Q-values.
//!
//! The expected Q-value after k slots is the mean reward scaled by a
//! binomial mixture over how many of those slots actually updated the
//! band. Bracketing the per-slot update probability (exploration-only
//! below, exploitation-always above) gives computable lower and upper
//! bounds that both converge to the mean reward.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::policy::q_update;

/// Parameters of a convergence experiment.
#[derive(Debug, Clone)]
pub struct ConvergenceSpec {
    /// Constant step size.
    pub alpha: f64,
    pub epsilon: f64,
    /// Bands sensed per slot.
    pub l: usize,
    pub n_bands: usize,
    /// Per-band reward magnitude; the realized reward is `mu[b]` with
    /// probability `gate_prob` and zero otherwise.
    pub mu: Vec<f64>,
    pub horizon: usize,
    /// Bernoulli reward gate (the idle probability of the band).
    pub gate_prob: f64,
}

impl ConvergenceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha", "must be in (0,1]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon", "must be in [0,1]"));
        }
        if self.l == 0 || self.l > self.n_bands {
            return Err(Error::invalid("l", "must be in 1..=n_bands"));
        }
        if self.mu.len() != self.n_bands {
            return Err(Error::invalid("mu", "length must equal n_bands"));
        }
        if !(0.0..=1.0).contains(&self.gate_prob) {
            return Err(Error::invalid("gate_prob", "must be in [0,1]"));
        }
        Ok(())
    }

    /// Mean reward per update for a band.
    pub fn mean_reward(&self, band: usize) -> f64 {
        self.mu[band] * self.gate_prob
    }
}

/// Binomial probability mass, computed in log space for stability.
pub fn binomial_pmf(t: u64, k: u64, p: f64) -> f64 {
    debug_assert!(t <= k, "t must not exceed k");
    if p <= 0.0 {
        return if t == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if t == k { 1.0 } else { 0.0 };
    }
    let (tf, kf) = (t as f64, k as f64);
    let ln_pmf = ln_gamma(kf + 1.0) - ln_gamma(tf + 1.0) - ln_gamma(kf - tf + 1.0)
        + tf * p.ln()
        + (kf - tf) * (1.0 - p).ln();
    ln_pmf.exp()
}

/// Per-slot update probabilities bracketing a band's sensing rate:
/// exploration-only below, exploitation-certain above.
pub fn band_bound_rates(epsilon: f64, l: usize, n_bands: usize) -> (f64, f64) {
    let ratio = l as f64 / n_bands as f64;
    (epsilon * ratio, 1.0 - epsilon * (1.0 - ratio))
}

/// The analogous rates for a single (SU, band) pair, where exploration
/// spreads over bands and SU groupings.
pub fn su_bound_rates(epsilon: f64, l: usize, n_bands: usize) -> (f64, f64) {
    let ratio = l as f64 / (n_bands * n_bands) as f64;
    (epsilon * ratio, 1.0 - epsilon * (1.0 - ratio))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

/// The binomial mixture factor `sum_T pmf(T; k, p) (1 - (1-alpha)^T)`.
///
/// Equal to `1 - (1 - p alpha)^k` in closed form; the explicit mixture is
/// kept as the primary route and the closed form serves as a test oracle.
pub fn mixture_factor(k: u64, p: f64, alpha: f64) -> f64 {
    let mut acc = 0.0;
    for t in 0..=k {
        let w = binomial_pmf(t, k, p);
        if w > 0.0 {
            acc += w * (1.0 - (1.0 - alpha).powi(t as i32));
        }
    }
    acc
}

/// Per-band expected-Q bound after k slots.
pub fn expected_q_bound(spec: &ConvergenceSpec, k: u64, side: BoundSide) -> Vec<f64> {
    let (lo, hi) = band_bound_rates(spec.epsilon, spec.l, spec.n_bands);
    let p = match side {
        BoundSide::Lower => lo,
        BoundSide::Upper => hi,
    };
    let factor = mixture_factor(k, p, spec.alpha);
    (0..spec.n_bands)
        .map(|b| spec.mean_reward(b) * factor)
        .collect()
}

/// Monte Carlo mean of the band Q-value trajectories under epsilon-greedy
/// selection with Bernoulli-gated rewards.
///
/// Returns `mean[band][k]` for k = 0..=horizon, averaged over `runs`
/// independent replications seeded from `base_seed`.
pub fn simulate_expected_q(spec: &ConvergenceSpec, runs: usize, base_seed: u64) -> Vec<Vec<f64>> {
    let n_b = spec.n_bands;
    let horizon = spec.horizon;
    let acc = (0..runs)
        .into_par_iter()
        .fold(
            || vec![vec![0.0f64; horizon + 1]; n_b],
            |mut acc, run| {
                let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(run as u64));
                let mut q = vec![0.0f64; n_b];
                for k in 1..=horizon {
                    let band = if rng.random::<f64>() < spec.epsilon {
                        rng.random_range(0..n_b)
                    } else {
                        argmax_random_ties(&q, &mut rng)
                    };
                    let reward = if rng.random::<f64>() < spec.gate_prob {
                        spec.mu[band]
                    } else {
                        0.0
                    };
                    q[band] = q_update(q[band], reward, spec.alpha);
                    for b in 0..n_b {
                        acc[b][k] += q[b];
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![vec![0.0f64; horizon + 1]; n_b],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(&b) {
                    for (va, vb) in ra.iter_mut().zip(rb) {
                        *va += vb;
                    }
                }
                a
            },
        );
    acc.into_iter()
        .map(|row| row.into_iter().map(|v| v / runs as f64).collect())
        .collect()
}

fn argmax_random_ties(values: &[f64], rng: &mut impl Rng) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_ties = values.iter().filter(|&&v| v == best).count();
    let mut pick = rng.random_range(0..n_ties);
    for (i, &v) in values.iter().enumerate() {
        if v == best {
            if pick == 0 {
                return i;
            }
            pick -= 1;
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig_spec() -> ConvergenceSpec {
        ConvergenceSpec {
            alpha: 0.1,
            epsilon: 0.1,
            l: 1,
            n_bands: 5,
            mu: vec![1.0, 1.0, 1.0, 1.0, 10.0],
            horizon: 600,
            gate_prob: 0.5,
        }
    }

    #[test]
    fn binomial_pmf_edges() {
        assert_eq!(binomial_pmf(0, 50, 0.0), 1.0);
        assert_eq!(binomial_pmf(10, 50, 0.0), 0.0);
        assert_eq!(binomial_pmf(50, 50, 1.0), 1.0);
        let total: f64 = (0..=100).map(|t| binomial_pmf(t, 100, 0.3)).sum();
        assert!((total - 1.0).abs() < 1e-10, "normalization {total}");
    }

    #[test]
    fn bound_rate_examples() {
        let (lo, hi) = band_bound_rates(0.1, 1, 10);
        assert!((lo - 0.01).abs() < 1e-15);
        assert!((hi - 0.91).abs() < 1e-15);
        let (lo, hi) = su_bound_rates(0.1, 1, 10);
        assert!((lo - 0.001).abs() < 1e-15);
        assert!((hi - 0.901).abs() < 1e-15);
        assert_eq!(su_bound_rates(0.0, 1, 10), (0.0, 1.0));
        assert_eq!(su_bound_rates(0.3, 1, 1), (0.3, 1.0));
    }

    #[test]
    fn mixture_factor_matches_closed_form() {
        // E[(1-a)^T] for T ~ Bin(k, p) is (1 - p a)^k.
        for &(k, p, a) in &[(100u64, 0.02, 0.1), (500, 0.91, 0.1), (50, 0.5, 0.33)] {
            let explicit = mixture_factor(k, p, a);
            let closed = 1.0 - (1.0 - p * a).powi(k as i32);
            assert!(
                (explicit - closed).abs() < 1e-8,
                "k={k} p={p}: {explicit} vs {closed}"
            );
        }
    }

    #[test]
    fn bounds_start_at_zero_and_converge_to_mean_reward() {
        let spec = fig_spec();
        for side in [BoundSide::Lower, BoundSide::Upper] {
            let at0 = expected_q_bound(&spec, 0, side);
            assert!(at0.iter().all(|&v| v == 0.0));
            let late = expected_q_bound(&spec, 300_000, side);
            for (b, v) in late.iter().enumerate() {
                let target = spec.mean_reward(b);
                assert!(
                    (v - target).abs() / target < 0.01,
                    "band {b}: {v} vs {target}"
                );
            }
        }
    }

    #[test]
    fn bounds_monotone_in_k() {
        let spec = fig_spec();
        for side in [BoundSide::Lower, BoundSide::Upper] {
            let mut prev = -1.0;
            for k in [0u64, 10, 50, 100, 400, 1000, 4000] {
                let v = expected_q_bound(&spec, k, side)[4];
                assert!(
                    v >= prev - 1e-9,
                    "bound must grow with k: {side:?} k={k}: {v} < {prev}"
                );
                prev = v;
            }
        }
    }

    #[test]
    fn equal_means_give_indistinguishable_trajectories() {
        let spec = ConvergenceSpec {
            mu: vec![2.0; 5],
            horizon: 300,
            ..fig_spec()
        };
        let runs = 800;
        let traj = simulate_expected_q(&spec, runs, 99);
        let k = spec.horizon;
        // Values live in [0, 2]; the mean's standard error is well under
        // 2/sqrt(runs). Allow 3 of those.
        let tol = 3.0 * 2.0 / (runs as f64).sqrt();
        for b in 1..5 {
            assert!(
                (traj[b][k] - traj[0][k]).abs() < tol,
                "bands {} vs 0: {} vs {}",
                b,
                traj[b][k],
                traj[0][k]
            );
        }
    }

    #[test]
    fn trajectories_lie_within_bounds() {
        let spec = fig_spec();
        let runs = 600;
        let traj = simulate_expected_q(&spec, runs, 7);
        for &k in &[25u64, 100, 300, 600] {
            let lower = expected_q_bound(&spec, k, BoundSide::Lower);
            let upper = expected_q_bound(&spec, k, BoundSide::Upper);
            for b in 0..spec.n_bands {
                let m = traj[b][k as usize];
                let slack = 3.0 * spec.mu[b] / (runs as f64).sqrt();
                assert!(
                    m >= lower[b] - slack && m <= upper[b] + slack,
                    "band {b} at k={k}: {m} not in [{}, {}]",
                    lower[b],
                    upper[b]
                );
            }
        }
    }
}
