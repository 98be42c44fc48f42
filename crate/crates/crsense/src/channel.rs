//! Primary-user channel model.
//!
//! Each subband carries a two-state Markov (Gilbert-Elliot) occupancy
//! process, a mean throughput, and a per-SU mean SNR drawn once from a
//! log-normal shadowing model. Fast fading is block Rayleigh: a fresh
//! unit-mean exponential power gain per sensing slot.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Two-state Markov occupancy chain. State 0 is idle, state 1 is occupied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GilbertElliot {
    /// Probability of staying idle given idle.
    pub p00: f64,
    /// Probability of staying occupied given occupied.
    pub p11: f64,
    /// Current state, 0 or 1.
    pub state: u8,
}

impl GilbertElliot {
    pub fn new(p00: f64, p11: f64, state: u8) -> Result<Self> {
        if !(0.0..=1.0).contains(&p00) || !p00.is_finite() {
            return Err(Error::invalid("p00", format!("{p00} not a probability")));
        }
        if !(0.0..=1.0).contains(&p11) || !p11.is_finite() {
            return Err(Error::invalid("p11", format!("{p11} not a probability")));
        }
        if state > 1 {
            return Err(Error::invalid("state", format!("{state} not binary")));
        }
        Ok(Self { p00, p11, state })
    }

    /// Sample the next state from the transition row of the current state
    /// and advance the chain. Returns the new state.
    pub fn step(&mut self, rng: &mut impl Rng) -> u8 {
        let u: f64 = rng.random();
        let stay = if self.state == 0 { self.p00 } else { self.p11 };
        if u >= stay {
            self.state ^= 1;
        }
        self.state
    }

    pub fn occupied(&self) -> bool {
        self.state == 1
    }
}

/// Stationary probability of the idle state for a two-state chain.
///
/// Solves the balance equations; errors when both self-transition
/// probabilities are 1 (every distribution is stationary then).
pub fn stationary_idle_prob(p00: f64, p11: f64) -> Result<f64> {
    let leave = (1.0 - p00) + (1.0 - p11);
    if leave <= 0.0 {
        return Err(Error::DegenerateChain);
    }
    Ok((1.0 - p11) / leave)
}

/// One primary subband: occupancy chain, mean throughput, and the mean SNR
/// of the primary signal seen by each SU (fixed per link by the shadowing
/// draw at scenario initialization).
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandProfile {
    pub chain: GilbertElliot,
    /// Mean throughput units per slot when the band is idle and accessed.
    pub mean_throughput: f64,
    /// Shadowing standard deviation used for the link draws, in dB.
    pub shadow_std_db: f64,
    /// Per-SU mean SNR in dB, length `n_sus`.
    pub mean_snr_db: Vec<f64>,
}

impl SubbandProfile {
    pub fn new(
        chain: GilbertElliot,
        mean_throughput: f64,
        shadow_std_db: f64,
        mean_snr_db: Vec<f64>,
    ) -> Result<Self> {
        if !(mean_throughput >= 0.0) {
            return Err(Error::invalid(
                "mean_throughput",
                format!("{mean_throughput} must be >= 0"),
            ));
        }
        if mean_snr_db.is_empty() {
            return Err(Error::invalid("mean_snr_db", "empty per-SU SNR vector"));
        }
        Ok(Self {
            chain,
            mean_throughput,
            shadow_std_db,
            mean_snr_db,
        })
    }
}

/// Ground-truth scenario state: all subband profiles plus the slot counter
/// and the schedule of slots at which statistics are permuted.
#[derive(Debug, Clone)]
pub struct ScenarioState {
    pub profiles: Vec<SubbandProfile>,
    pub slot_index: u64,
    pub permutation_schedule: Vec<u64>,
}

impl ScenarioState {
    pub fn new(profiles: Vec<SubbandProfile>, permutation_schedule: Vec<u64>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::invalid("profiles", "need at least one subband"));
        }
        let n = profiles[0].mean_snr_db.len();
        if profiles.iter().any(|p| p.mean_snr_db.len() != n) {
            return Err(Error::invalid("profiles", "inconsistent SNR vector lengths"));
        }
        Ok(Self {
            profiles,
            slot_index: 0,
            permutation_schedule,
        })
    }

    pub fn n_bands(&self) -> usize {
        self.profiles.len()
    }
}

/// Instantaneous linear SNR for one sensing slot: mean SNR (dB) times a
/// unit-mean exponential fading gain. With fading disabled the gain is 1.
///
/// A mean SNR of negative infinity is the no-signal convention and maps
/// to 0.
pub fn instant_snr(mean_snr_db: f64, fading: bool, rng: &mut impl Rng) -> f64 {
    let mean_linear = 10f64.powf(mean_snr_db / 10.0);
    if fading {
        let g: f64 = Exp1.sample(rng);
        mean_linear * g
    } else {
        mean_linear
    }
}

/// Instantaneous throughput on an idle, accessed band: the mean scaled by
/// a unit-mean exponential draw, or exactly the mean in deterministic mode.
pub fn instant_throughput(mean_throughput: f64, deterministic: bool, rng: &mut impl Rng) -> f64 {
    if deterministic {
        mean_throughput
    } else {
        let v: f64 = Exp1.sample(rng);
        mean_throughput * v
    }
}

/// Apply one uniformly random permutation to the subband profiles.
///
/// Occupancy parameters, mean throughput, per-SU SNR maps and the current
/// chain states all move together, so the multiset of subband parameter
/// tuples is preserved.
pub fn permute_statistics(state: &mut ScenarioState, rng: &mut impl Rng) {
    let n = state.profiles.len();
    // Fisher-Yates on the profile vector itself.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        state.profiles.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn absorbing_states_never_leave() {
        let mut r = rng(1);
        let mut idle = GilbertElliot::new(1.0, 0.5, 0).unwrap();
        let mut busy = GilbertElliot::new(0.5, 1.0, 1).unwrap();
        for _ in 0..1000 {
            assert_eq!(idle.step(&mut r), 0);
            assert_eq!(busy.step(&mut r), 1);
        }
    }

    #[test]
    fn symmetric_chain_long_run_idle_fraction() {
        let mut r = rng(2);
        let mut chain = GilbertElliot::new(0.9, 0.9, 0).unwrap();
        let steps = 1_000_000usize;
        let mut idle = 0usize;
        for _ in 0..steps {
            if chain.step(&mut r) == 0 {
                idle += 1;
            }
        }
        let frac = idle as f64 / steps as f64;
        assert!(
            (frac - 0.5).abs() < 0.01,
            "long-run idle fraction {frac} should be 0.5 +/- 0.01"
        );
    }

    #[test]
    fn stationary_idle_prob_cases() {
        assert!((stationary_idle_prob(0.9, 0.9).unwrap() - 0.5).abs() < 1e-15);
        // Solve the balance equations by hand: pi0 = (1-p11)/((1-p00)+(1-p11)).
        assert!((stationary_idle_prob(0.5, 0.9).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!((stationary_idle_prob(1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            stationary_idle_prob(1.0, 1.0),
            Err(Error::DegenerateChain)
        ));
    }

    #[test]
    fn stationary_prob_matches_empirical_frequency() {
        // Asymmetric chain, checked against the long-run frequency within
        // three standard errors of a (conservative) iid binomial model.
        let (p00, p11) = (0.5, 0.9);
        let target = stationary_idle_prob(p00, p11).unwrap();
        let mut r = rng(3);
        let mut chain = GilbertElliot::new(p00, p11, 0).unwrap();
        let steps = 1_000_000usize;
        let mut idle = 0usize;
        for _ in 0..steps {
            if chain.step(&mut r) == 0 {
                idle += 1;
            }
        }
        let frac = idle as f64 / steps as f64;
        // Markov dependence inflates the variance; use a generous factor.
        let se = (target * (1.0 - target) / steps as f64).sqrt() * 10.0;
        assert!(
            (frac - target).abs() < 3.0 * se,
            "empirical {frac} vs stationary {target}"
        );
    }

    #[test]
    fn snr_deterministic_and_sentinel() {
        let mut r = rng(4);
        let snr = instant_snr(3.0, false, &mut r);
        assert!((snr - 10f64.powf(0.3)).abs() < 1e-12);
        assert_eq!(instant_snr(f64::NEG_INFINITY, false, &mut r), 0.0);
        assert_eq!(instant_snr(f64::NEG_INFINITY, true, &mut r), 0.0);
    }

    #[test]
    fn snr_fading_unit_mean() {
        let mut r = rng(5);
        let n = 1_000_000usize;
        let mean: f64 = (0..n).map(|_| instant_snr(0.0, true, &mut r)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "fading mean {mean}");
    }

    #[test]
    fn throughput_modes() {
        let mut r = rng(6);
        assert_eq!(instant_throughput(10.0, true, &mut r), 10.0);
        assert_eq!(instant_throughput(0.0, false, &mut r), 0.0);
        let n = 100_000usize;
        let mean: f64 = (0..n)
            .map(|_| instant_throughput(10.0, false, &mut r))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 10.0).abs() < 0.2, "stochastic mean {mean}");
    }

    fn demo_state(n_bands: usize) -> ScenarioState {
        let profiles = (0..n_bands)
            .map(|b| {
                SubbandProfile::new(
                    GilbertElliot::new(0.1 * b as f64, 0.9, 0).unwrap(),
                    b as f64,
                    9.0,
                    vec![b as f64, -(b as f64)],
                )
                .unwrap()
            })
            .collect();
        ScenarioState::new(profiles, vec![]).unwrap()
    }

    #[test]
    fn permutation_preserves_multiset() {
        let mut state = demo_state(5);
        let before: Vec<_> = state.profiles.clone();
        let mut r = rng(7);
        permute_statistics(&mut state, &mut r);
        assert_eq!(state.profiles.len(), before.len());
        for p in &before {
            assert!(
                state.profiles.iter().any(|q| q == p),
                "profile lost by permutation"
            );
        }
    }

    #[test]
    fn two_band_swap_exchanges_profiles() {
        // With two bands the only non-identity permutation is the swap;
        // scan seeds until one produces it and verify field by field.
        let mut swapped = false;
        for seed in 0..32 {
            let mut state = demo_state(2);
            let before = state.profiles.clone();
            let mut r = rng(seed);
            permute_statistics(&mut state, &mut r);
            if state.profiles[0] != before[0] {
                assert_eq!(state.profiles[0], before[1]);
                assert_eq!(state.profiles[1], before[0]);
                swapped = true;
                break;
            }
        }
        assert!(swapped, "no seed produced the swap");
    }

    #[test]
    fn fixed_seed_reproduces_trace() {
        let run = |seed: u64| -> Vec<u8> {
            let mut r = rng(seed);
            let mut chain = GilbertElliot::new(0.9, 0.8, 0).unwrap();
            (0..1000).map(|_| chain.step(&mut r)).collect()
        };
        assert_eq!(run(42), run(42));
    }
}
