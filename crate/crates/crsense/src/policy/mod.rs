//! The two-stage epsilon-greedy sensing policy.
//!
//! Stage one tracks a Q-value per subband (throughput estimate) and, in
//! exploitation, senses the L highest-valued bands. Stage two tracks a
//! Q-value per (SU, band) pair (detection-performance estimate) and uses
//! those as detection probabilities when solving the sensing assignment
//! problem. Exploration follows orthogonal frequency-hopping codes at a
//! fixed diversity order.

pub mod baselines;
pub mod hopping;

pub use hopping::HoppingCodebook;

use rand::Rng;

use crate::assignment::{self, SapInstance};
use crate::error::{Error, Result};

/// Q-value state tracked by the fusion center.
#[derive(Debug, Clone)]
pub struct QTables {
    /// Per-band throughput estimates, Q(b).
    pub band_q: Vec<f64>,
    /// Per-(SU, band) detection estimates, Q(s, b), each in [0, 1].
    pub su_q: Vec<Vec<f64>>,
    /// Number of updates applied to each band value.
    pub band_updates: Vec<u64>,
    /// Number of updates applied to each SU value.
    pub su_updates: Vec<Vec<u64>>,
}

impl QTables {
    pub fn new(n_sus: usize, n_bands: usize, su_q_init: f64) -> Self {
        Self {
            band_q: vec![0.0; n_bands],
            su_q: vec![vec![su_q_init; n_bands]; n_sus],
            band_updates: vec![0; n_bands],
            su_updates: vec![vec![0; n_bands]; n_sus],
        }
    }
}

/// Policy parameters.
#[derive(Debug, Clone, Copy)]
pub struct PolicyConfig {
    pub epsilon: f64,
    /// Step size for band Q-values.
    pub alpha1: f64,
    /// Step size for SU Q-values.
    pub alpha2: f64,
    /// Bands sensed per exploitation slot (L).
    pub num_bands_sought: usize,
    /// Exploration diversity order (D).
    pub diversity: usize,
    pub su_q_init: f64,
}

impl PolicyConfig {
    pub fn validate(&self, n_sus: usize, n_bands: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon", "must be in [0,1]"));
        }
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::invalid(name, "must be in (0,1]"));
            }
        }
        if self.num_bands_sought == 0 || self.num_bands_sought > n_bands {
            return Err(Error::invalid("l", "must be in 1..=n_bands"));
        }
        if self.diversity == 0 || self.diversity > n_sus {
            return Err(Error::invalid("d", "must be in 1..=n_sus"));
        }
        if !(0.0..=1.0).contains(&self.su_q_init) {
            return Err(Error::invalid("su_q_init", "must be in [0,1]"));
        }
        Ok(())
    }
}

/// Exponentially weighted value update, `q + alpha (r - q)`.
pub fn q_update(q: f64, r: f64, alpha: f64) -> f64 {
    q + alpha * (r - q)
}

/// Stage-one reward: the obtained throughput when the band was accessed
/// and actually free, zero otherwise (occupied, collision, or declared
/// busy by the fusion center).
pub fn band_reward(accessed: bool, band_free: bool, throughput: f64) -> f64 {
    if accessed && band_free {
        throughput
    } else {
        0.0
    }
}

/// Stage-two reward: the local decision when the fusion center declared
/// the band occupied; otherwise the current value so the update is a
/// no-op.
pub fn su_reward(local_decision: bool, fc_decision: bool, current_q: f64) -> f64 {
    if fc_decision {
        if local_decision {
            1.0
        } else {
            0.0
        }
    } else {
        current_q
    }
}

/// Indices of the `l` largest Q-values, ties broken uniformly at random.
/// Returned sorted ascending.
pub fn select_bands_exploit(band_q: &[f64], l: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..band_q.len()).collect();
    // Shuffle first so the stable sort randomizes equal values uniformly.
    for i in (1..idx.len()).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx.sort_by(|&a, &b| band_q[b].total_cmp(&band_q[a]));
    idx.truncate(l.min(band_q.len()));
    idx.sort_unstable();
    idx
}

/// Fixed point of the SU Q-value recursion under the OR rule: the
/// probability the SU reports occupied given the fusion center does.
pub fn su_q_limit(p1: f64, p0: f64, pd_s: f64, pf_s: f64, pd_fc: f64, pf_fc: f64) -> f64 {
    let denom = p1 * pd_fc + p0 * pf_fc;
    debug_assert!(denom > 0.0, "fusion center must fire with positive probability");
    (p1 * pd_s + p0 * pf_s) / denom
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Exploration,
    Exploitation,
}

/// Who senses what this slot.
#[derive(Debug, Clone)]
pub struct SensingDirective {
    /// Bands to be sensed, ascending.
    pub bands: Vec<usize>,
    /// Full n_sus x n_bands assignment slice; true where SU s senses band b.
    pub assignment: Vec<Vec<bool>>,
    pub phase: Phase,
}

impl SensingDirective {
    pub fn sus_for_band(&self, band: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&s| self.assignment[s][band])
            .collect()
    }

    pub fn sensor_count(&self) -> usize {
        self.assignment
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .sum()
    }
}

/// Which SAP solver exploitation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    BranchBound,
    IterativeHungarian,
}

/// Inputs stage two needs to build and solve the assignment problem.
#[derive(Debug, Clone)]
pub struct ExploitParams {
    pub weights: Vec<f64>,
    pub capacities: Vec<usize>,
    /// Per-band miss targets over the full band set.
    pub miss_targets: Vec<f64>,
    pub safety_margin: f64,
    pub solver: SolverKind,
}

/// Mutable policy state carried across slots.
#[derive(Debug, Clone)]
pub struct PolicyState {
    pub q: QTables,
    pub codebook: HoppingCodebook,
    /// Number of exploration slots taken so far; drives the hopping code
    /// column and the group rotation.
    pub explore_step: u64,
}

impl PolicyState {
    pub fn new(q: QTables, codebook: HoppingCodebook) -> Self {
        Self {
            q,
            codebook,
            explore_step: 0,
        }
    }
}

/// One policy decision: exploration with probability epsilon (the next
/// hopping-code column), otherwise exploitation (top-L bands by Q-value,
/// sensing assignment from the SAP solver with the SU Q-values as
/// detection estimates; on an infeasible SAP all SUs are spread over the
/// chosen bands at maximal diversity).
pub fn step_policy(
    state: &mut PolicyState,
    cfg: &PolicyConfig,
    exploit: &ExploitParams,
    rng: &mut impl Rng,
) -> SensingDirective {
    let n_sus = state.q.su_q.len();
    let n_bands = state.q.band_q.len();
    let explore = if cfg.epsilon >= 1.0 {
        true
    } else {
        rng.random::<f64>() < cfg.epsilon
    };

    if explore {
        let period = state.codebook.period() as u64;
        let i = (state.explore_step % period) as usize;
        let p = (state.explore_step / period) as usize;
        state.explore_step += 1;
        let mut assignment = vec![vec![false; n_bands]; n_sus];
        let mut bands = Vec::with_capacity(state.codebook.n_groups());
        for (q_idx, group) in state.codebook.groups(p).iter().enumerate() {
            let band = state.codebook.sequence_band(q_idx, i);
            bands.push(band);
            for &s in group {
                assignment[s][band] = true;
            }
        }
        bands.sort_unstable();
        return SensingDirective {
            bands,
            assignment,
            phase: Phase::Exploration,
        };
    }

    let bands = select_bands_exploit(&state.q.band_q, cfg.num_bands_sought, rng);
    let pd_hat: Vec<Vec<f64>> = (0..n_sus)
        .map(|s| bands.iter().map(|&b| state.q.su_q[s][b]).collect())
        .collect();
    let targets: Vec<f64> = bands.iter().map(|&b| exploit.miss_targets[b]).collect();
    let mut assignment = vec![vec![false; n_bands]; n_sus];
    let inst = SapInstance::new(
        exploit.weights.clone(),
        pd_hat,
        targets,
        exploit.capacities.clone(),
        exploit.safety_margin,
    )
    .expect("exploit parameters validated at config load");
    let solved = match exploit.solver {
        SolverKind::BranchBound => assignment::solve_bb(&inst),
        SolverKind::IterativeHungarian => assignment::solve_iterative_hungarian(&inst),
    };
    match solved {
        Ok(x) => {
            for (j, &band) in bands.iter().enumerate() {
                for s in 0..n_sus {
                    if x.get(s, j) {
                        assignment[s][band] = true;
                    }
                }
            }
        }
        Err(_) => {
            // Infeasible with the current estimates: protect the primary
            // by spreading every SU over the chosen bands.
            for s in 0..n_sus {
                assignment[s][bands[s % bands.len()]] = true;
            }
        }
    }
    SensingDirective {
        bands,
        assignment,
        phase: Phase::Exploitation,
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
    fn q_update_cases() {
        assert!((q_update(0.0, 1.0, 0.1) - 0.1).abs() < 1e-15);
        assert_eq!(q_update(0.37, 0.37, 0.5), 0.37);
        // Constant reward from zero start follows the closed form.
        let (mu, alpha, k) = (7.5, 0.05, 200);
        let mut q = 0.0;
        for _ in 0..k {
            q = q_update(q, mu, alpha);
        }
        let closed = mu * (1.0 - (1.0f64 - alpha).powi(k));
        assert!((q - closed).abs() < 1e-12, "{q} vs {closed}");
    }

    #[test]
    fn band_reward_cases() {
        assert_eq!(band_reward(true, true, 7.3), 7.3);
        assert_eq!(band_reward(true, false, 7.3), 0.0);
        assert_eq!(band_reward(false, true, 7.3), 0.0);
    }

    #[test]
    fn su_reward_cases() {
        let q = 0.5;
        assert!((q_update(q, su_reward(true, true, q), 0.1) - 0.55).abs() < 1e-15);
        assert!((q_update(q, su_reward(false, true, q), 0.1) - 0.45).abs() < 1e-15);
        // Fusion center declared idle: exact no-op.
        let q = 0.7;
        let updated = q_update(q, su_reward(true, false, q), 0.1);
        assert_eq!(updated.to_bits(), q.to_bits());
    }

    #[test]
    fn select_bands_basic() {
        let mut r = rng(1);
        assert_eq!(select_bands_exploit(&[1.0, 5.0, 3.0], 1, &mut r), vec![1]);
        assert_eq!(
            select_bands_exploit(&[1.0, 5.0, 3.0], 3, &mut r),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn select_bands_uniform_tie_break() {
        let mut r = rng(2);
        let q = vec![2.0; 4];
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_bands_exploit(&q, 1, &mut r)[0]] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for c in counts {
            let frac = c as f64 / n as f64;
            assert!(
                (frac - 0.25).abs() < 3.0 * sigma + 0.01,
                "tie frequency {frac}"
            );
        }
    }

    #[test]
    fn select_bands_shift_invariant() {
        let q = vec![0.3, 1.7, 0.3, 2.2, 1.7];
        let a = select_bands_exploit(&q, 3, &mut rng(3));
        let shifted: Vec<f64> = q.iter().map(|x| x + 123.456).collect();
        let b = select_bands_exploit(&shifted, 3, &mut rng(3));
        assert_eq!(a, b);
    }

    #[test]
    fn su_q_limit_cases() {
        let v = su_q_limit(1.0, 0.0, 0.9, 0.005, 0.99, 0.01);
        assert!((v - 0.9090909090909091).abs() < 1e-12);
        assert_eq!(su_q_limit(0.5, 0.5, 0.8, 0.01, 0.8, 0.01), 1.0);
    }

    fn demo_setup(epsilon: f64) -> (PolicyState, PolicyConfig, ExploitParams) {
        let n_sus = 6;
        let n_bands = 10;
        let cfg = PolicyConfig {
            epsilon,
            alpha1: 0.01,
            alpha2: 0.1,
            num_bands_sought: 3,
            diversity: 2,
            su_q_init: 0.5,
        };
        let q = QTables::new(n_sus, n_bands, cfg.su_q_init);
        let cb = HoppingCodebook::with_default_shifts(n_bands, n_sus, cfg.diversity).unwrap();
        let exploit = ExploitParams {
            weights: vec![1.0; n_sus],
            capacities: vec![1; n_sus],
            miss_targets: vec![0.1; n_bands],
            safety_margin: 1.0,
            solver: SolverKind::BranchBound,
        };
        (PolicyState::new(q, cb), cfg, exploit)
    }

    #[test]
    fn exploration_only_covers_bands_evenly() {
        let (mut state, cfg, exploit) = demo_setup(1.0);
        let mut r = rng(4);
        let mut per_band = vec![0usize; 10];
        for _ in 0..10 {
            let d = step_policy(&mut state, &cfg, &exploit, &mut r);
            assert_eq!(d.phase, Phase::Exploration);
            assert_eq!(d.bands.len(), 3);
            for &b in &d.bands {
                per_band[b] += 1;
                assert_eq!(d.sus_for_band(b).len(), 2, "diversity order");
            }
        }
        // One full code period: every band sensed exactly n_groups times.
        assert!(per_band.iter().all(|&c| c == 3), "{per_band:?}");
    }

    #[test]
    fn greedy_selects_top_band() {
        let (mut state, cfg, exploit) = demo_setup(0.0);
        state.q.band_q[9] = 10.0;
        // Make the SAP trivially feasible so exploitation stays clean.
        for s in 0..6 {
            for b in 0..10 {
                state.q.su_q[s][b] = 0.95;
            }
        }
        let cfg = PolicyConfig {
            num_bands_sought: 1,
            ..cfg
        };
        let mut r = rng(5);
        let d = step_policy(&mut state, &cfg, &exploit, &mut r);
        assert_eq!(d.phase, Phase::Exploitation);
        assert_eq!(d.bands, vec![9]);
        assert_eq!(d.sensor_count(), 1);
    }

    #[test]
    fn exploration_frequency_matches_epsilon() {
        let (mut state, cfg, exploit) = demo_setup(0.1);
        // Feasible SAP keeps exploitation cheap for this loop.
        for s in 0..6 {
            for b in 0..10 {
                state.q.su_q[s][b] = 0.95;
            }
        }
        let mut r = rng(6);
        let n = 100_000;
        let mut explored = 0usize;
        for _ in 0..n {
            if step_policy(&mut state, &cfg, &exploit, &mut r).phase == Phase::Exploration {
                explored += 1;
            }
        }
        let frac = explored as f64 / n as f64;
        assert!((frac - 0.1).abs() < 0.005, "exploration frequency {frac}");
    }

    #[test]
    fn infeasible_sap_falls_back_to_full_spread() {
        let (mut state, cfg, exploit) = demo_setup(0.0);
        // su_q at the 0.5 prior: no assignment under capacity 1 can reach
        // a 0.1 target, so the SAP is infeasible.
        let mut r = rng(7);
        let d = step_policy(&mut state, &cfg, &exploit, &mut r);
        assert_eq!(d.phase, Phase::Exploitation);
        assert_eq!(d.sensor_count(), 6, "all SUs spread over chosen bands");
        for &b in &d.bands {
            assert_eq!(d.sus_for_band(b).len(), 2);
        }
    }

    #[test]
    fn exploitation_respects_capacities() {
        let (mut state, cfg, exploit) = demo_setup(0.0);
        for s in 0..6 {
            for b in 0..10 {
                state.q.su_q[s][b] = 0.99;
            }
        }
        let mut r = rng(8);
        for _ in 0..50 {
            let d = step_policy(&mut state, &cfg, &exploit, &mut r);
            for s in 0..6 {
                let load = (0..10).filter(|&b| d.assignment[s][b]).count();
                assert!(load <= exploit.capacities[s]);
            }
            for &b in &d.bands {
                assert!(!d.sus_for_band(b).is_empty());
            }
        }
    }
}
