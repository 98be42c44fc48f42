//! Stage-one band-selection experiments with abstracted detection.
//!
//! The fusion-center outcome for a sensed band is drawn directly from
//! fixed miss/false-alarm probabilities instead of simulating sensors, so
//! different selection policies can be compared in lockstep on identical
//! ground truth, throughput and fusion-noise streams.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{stationary_idle_prob, GilbertElliot};
use crate::config::{PolicyKind, ScenarioConfig};
use crate::error::Result;
use crate::policy::baselines::{genie_select, BeliefState, Ducb};
use crate::policy::q_update;

use super::metrics::{self, MetricsSeries};
use super::{draw_permutation_schedule, ExperimentResult, RunSummary};

/// One policy's mutable state in the bandit engine.
enum PolicyBox {
    /// Epsilon-greedy over band Q-values; exploration picks a uniformly
    /// random band set.
    Proposed { band_q: Vec<f64>, epsilon: f64 },
    Ducb(Ducb),
    Myopic(BeliefState),
    Genie,
}

impl PolicyBox {
    fn new(kind: PolicyKind, cfg: &ScenarioConfig, world: &World) -> Result<Self> {
        Ok(match kind {
            PolicyKind::Proposed => PolicyBox::Proposed {
                band_q: vec![0.0; cfg.n_bands],
                epsilon: cfg.epsilon,
            },
            PolicyKind::FixedHopping => PolicyBox::Proposed {
                band_q: vec![0.0; cfg.n_bands],
                epsilon: 1.0,
            },
            PolicyKind::Ducb => PolicyBox::Ducb(Ducb::new(cfg.n_bands, cfg.ducb_gamma, cfg.ducb_xi)?),
            PolicyKind::Myopic => {
                let omega: Vec<f64> = (0..cfg.n_bands)
                    .map(|b| stationary_idle_prob(world.p00[b], world.p11[b]).unwrap_or(0.5))
                    .collect();
                PolicyBox::Myopic(BeliefState::new(omega))
            }
            PolicyKind::Genie => PolicyBox::Genie,
        })
    }

    fn select(&mut self, world: &World, l: usize, rng: &mut impl Rng) -> Vec<usize> {
        match self {
            PolicyBox::Proposed { band_q, epsilon } => {
                if rng.random::<f64>() < *epsilon {
                    random_band_subset(band_q.len(), l, rng)
                } else {
                    crate::policy::select_bands_exploit(band_q, l, rng)
                }
            }
            PolicyBox::Ducb(d) => vec![d.select(rng)],
            PolicyBox::Myopic(belief) => {
                belief.predict(&world.p00, &world.p11);
                belief.select(&world.mu, l)
            }
            PolicyBox::Genie => {
                let idle: Vec<bool> = world.occupied.iter().map(|&o| !o).collect();
                genie_select(&idle, &world.throughput, l)
            }
        }
    }

    fn update(&mut self, band: usize, reward: f64, declared_idle: bool, alpha1: f64) {
        match self {
            PolicyBox::Proposed { band_q, .. } => {
                band_q[band] = q_update(band_q[band], reward, alpha1);
            }
            PolicyBox::Ducb(d) => d.update(band, reward),
            PolicyBox::Myopic(belief) => belief.observe(band, declared_idle),
            PolicyBox::Genie => {}
        }
    }
}

fn random_band_subset(n_bands: usize, l: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n_bands).collect();
    for i in (1..idx.len()).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx.truncate(l);
    idx.sort_unstable();
    idx
}

/// Shared per-run world: channel parameters (permuted in place), current
/// occupancy, throughput values, and fusion-noise draws for the slot.
struct World {
    p00: Vec<f64>,
    p11: Vec<f64>,
    mu: Vec<f64>,
    chains: Vec<GilbertElliot>,
    occupied: Vec<bool>,
    throughput: Vec<f64>,
    fc_noise: Vec<f64>,
}

impl World {
    fn new(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<Self> {
        let mut chains = Vec::with_capacity(cfg.n_bands);
        for b in 0..cfg.n_bands {
            let idle = stationary_idle_prob(cfg.p00[b], cfg.p11[b]).unwrap_or(1.0);
            let state = if rng.random::<f64>() < idle { 0 } else { 1 };
            chains.push(GilbertElliot::new(cfg.p00[b], cfg.p11[b], state)?);
        }
        Ok(Self {
            p00: cfg.p00.clone(),
            p11: cfg.p11.clone(),
            mu: cfg.mu.clone(),
            chains,
            occupied: vec![false; cfg.n_bands],
            throughput: vec![0.0; cfg.n_bands],
            fc_noise: vec![0.0; cfg.n_bands],
        })
    }

    fn permute(&mut self, rng: &mut impl Rng) {
        let n = self.chains.len();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            self.p00.swap(i, j);
            self.p11.swap(i, j);
            self.mu.swap(i, j);
            self.chains.swap(i, j);
        }
    }

    /// Advance one slot; all draws are policy-independent.
    fn step(&mut self, cfg: &ScenarioConfig, rng: &mut impl Rng) {
        for (b, chain) in self.chains.iter_mut().enumerate() {
            self.occupied[b] = chain.step(rng) == 1;
        }
        for b in 0..self.mu.len() {
            self.throughput[b] = crate::channel::instant_throughput(
                self.mu[b],
                cfg.deterministic_throughput,
                rng,
            );
        }
        for u in self.fc_noise.iter_mut() {
            *u = rng.random();
        }
    }

    /// Fusion-center outcome for a sensed band under the abstract model.
    fn declared_occupied(&self, band: usize, cfg: &ScenarioConfig) -> bool {
        if self.occupied[band] {
            // Missed with probability p_miss.
            self.fc_noise[band] >= cfg.abstract_p_miss
        } else {
            self.fc_noise[band] < cfg.abstract_p_fa
        }
    }
}

/// Result of a lockstep comparison of several selection policies.
#[derive(Debug, Clone)]
pub struct BanditComparison {
    pub policies: Vec<PolicyKind>,
    pub slots: Vec<u64>,
    /// Mean instantaneous reward per policy at each sample slot.
    pub mean_slot_reward: Vec<Vec<f64>>,
    /// Mean cumulative reward per policy at each sample slot.
    pub mean_cum_reward: Vec<Vec<f64>>,
    /// Mean total reward per policy over the horizon.
    pub totals: Vec<f64>,
    /// Mean total reward of the genie reference.
    pub genie_total: f64,
}

/// Run all listed policies in lockstep on identical world streams.
pub fn run_bandit_comparison(
    cfg: &ScenarioConfig,
    policies: &[PolicyKind],
) -> Result<BanditComparison> {
    cfg.validate()?;
    let horizon = cfg.horizon as usize;
    let n_pol = policies.len();
    let schedule = {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
        draw_permutation_schedule(cfg.nonstat_permutations, cfg.horizon, &mut rng)
    };

    let acc = (0..cfg.runs)
        .into_par_iter()
        .map(|run| -> Result<(Vec<Vec<f64>>, f64)> {
            let run_seed = cfg.seed.wrapping_add(run as u64);
            let mut world_rng = ChaCha8Rng::seed_from_u64(run_seed);
            let mut world = World::new(cfg, &mut world_rng)?;
            let mut boxes: Vec<PolicyBox> = policies
                .iter()
                .map(|&k| PolicyBox::new(k, cfg, &world))
                .collect::<Result<_>>()?;
            let mut pol_rngs: Vec<ChaCha8Rng> = (0..n_pol)
                .map(|i| {
                    ChaCha8Rng::seed_from_u64(
                        run_seed ^ (0xA5A5_0000_0000_0000 + (i as u64) * 0x1234_5678),
                    )
                })
                .collect();
            let mut rewards = vec![vec![0.0f64; horizon]; n_pol];
            let mut genie_total = 0.0;
            for slot in 1..=cfg.horizon {
                if schedule.contains(&slot) {
                    world.permute(&mut world_rng);
                }
                world.step(cfg, &mut world_rng);
                for (p, policy) in boxes.iter_mut().enumerate() {
                    let bands = policy.select(&world, cfg.l, &mut pol_rngs[p]);
                    let mut slot_reward = 0.0;
                    for &b in &bands {
                        let declared_occ = world.declared_occupied(b, cfg);
                        let reward = if !declared_occ && !world.occupied[b] {
                            world.throughput[b]
                        } else {
                            0.0
                        };
                        slot_reward += reward;
                        policy.update(b, reward, !declared_occ, cfg.alpha1);
                    }
                    rewards[p][slot as usize - 1] = slot_reward;
                }
                let idle: Vec<bool> = world.occupied.iter().map(|&o| !o).collect();
                genie_total += genie_select(&idle, &world.throughput, cfg.l)
                    .iter()
                    .map(|&b| world.throughput[b])
                    .sum::<f64>();
            }
            Ok((rewards, genie_total))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sum_rewards = vec![vec![0.0f64; horizon]; n_pol];
    let mut genie_total = 0.0;
    for (rewards, genie) in &acc {
        for (dst, src) in sum_rewards.iter_mut().zip(rewards) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        genie_total += genie;
    }
    let runs = cfg.runs as f64;
    let slots = metrics::log_spaced_slots(cfg.horizon, cfg.sample_points);
    let mut mean_slot_reward = vec![Vec::with_capacity(slots.len()); n_pol];
    let mut mean_cum_reward = vec![Vec::with_capacity(slots.len()); n_pol];
    let mut totals = vec![0.0; n_pol];
    for (p, series) in sum_rewards.iter().enumerate() {
        let mut cum = 0.0;
        let mut next = 0;
        for (i, &r) in series.iter().enumerate() {
            cum += r / runs;
            if next < slots.len() && slots[next] == (i + 1) as u64 {
                mean_slot_reward[p].push(r / runs);
                mean_cum_reward[p].push(cum);
                next += 1;
            }
        }
        totals[p] = cum;
    }
    Ok(BanditComparison {
        policies: policies.to_vec(),
        slots,
        mean_slot_reward,
        mean_cum_reward,
        totals,
        genie_total: genie_total / runs,
    })
}

/// Single-policy abstract-detection experiment shaped like the full one,
/// so `run` and `sweep` work uniformly across detection modes.
pub fn run_abstract_experiment(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sample_slots = metrics::log_spaced_slots(cfg.horizon, cfg.sample_points);
    let per_run: Vec<(MetricsSeries, RunSummary)> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| -> Result<(MetricsSeries, RunSummary)> {
            let run_seed = cfg.seed.wrapping_add(run as u64);
            let mut world_rng = ChaCha8Rng::seed_from_u64(run_seed);
            let mut world = World::new(cfg, &mut world_rng)?;
            let schedule = {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
                draw_permutation_schedule(cfg.nonstat_permutations, cfg.horizon, &mut rng)
            };
            let mut policy = PolicyBox::new(cfg.policy, cfg, &world)?;
            let mut pol_rng = ChaCha8Rng::seed_from_u64(run_seed ^ 0xA5A5_0000_0000_0000);

            let mut series = MetricsSeries {
                slots: sample_slots.clone(),
                ..Default::default()
            };
            let (mut cum_su, mut cum_genie) = (0.0, 0.0);
            let (mut occupied_sensed, mut misses, mut sensors) = (0u64, 0u64, 0u64);
            let mut next = 0usize;
            for slot in 1..=cfg.horizon {
                if schedule.contains(&slot) {
                    world.permute(&mut world_rng);
                }
                world.step(cfg, &mut world_rng);
                let bands = policy.select(&world, cfg.l, &mut pol_rng);
                sensors += bands.len() as u64;
                for &b in &bands {
                    let declared_occ = world.declared_occupied(b, cfg);
                    let reward = if !declared_occ && !world.occupied[b] {
                        world.throughput[b]
                    } else {
                        0.0
                    };
                    if world.occupied[b] {
                        occupied_sensed += 1;
                        if !declared_occ {
                            misses += 1;
                        }
                    }
                    cum_su += reward;
                    policy.update(b, reward, !declared_occ, cfg.alpha1);
                }
                let idle: Vec<bool> = world.occupied.iter().map(|&o| !o).collect();
                cum_genie += genie_select(&idle, &world.throughput, cfg.l)
                    .iter()
                    .map(|&b| world.throughput[b])
                    .sum::<f64>();
                if next < sample_slots.len() && sample_slots[next] == slot {
                    series.cum_su_throughput.push(cum_su);
                    series.cum_genie_throughput.push(cum_genie);
                    series
                        .relative_throughput
                        .push(metrics::relative_throughput(cum_su, cum_genie));
                    series
                        .miss_rate
                        .push(metrics::cumulative_miss_rate(misses, occupied_sensed));
                    series
                        .sensing_ratio
                        .push(metrics::sensing_ratio(sensors, slot, cfg.d, cfg.l));
                    next += 1;
                }
            }
            let summary = RunSummary {
                seed: run_seed,
                final_relative_throughput: *series.relative_throughput.last().unwrap(),
                final_miss_rate: *series.miss_rate.last().unwrap(),
                final_sensing_ratio: *series.sensing_ratio.last().unwrap(),
                total_su_throughput: cum_su,
                total_genie_throughput: cum_genie,
            };
            Ok((series, summary))
        })
        .collect::<Result<_>>()?;

    let all_series: Vec<MetricsSeries> = per_run.iter().map(|(s, _)| s.clone()).collect();
    Ok(ExperimentResult {
        series: metrics::average_series(&all_series),
        per_run: per_run.into_iter().map(|(_, r)| r).collect(),
        solver_time: None,
        exploit_instances: 0,
    })
}

/// The Markov scenario used by the non-stationary comparisons.
pub fn markov_scenario() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.n_bands = 5;
    cfg.l = 1;
    cfg.mu = vec![11.0, 21.0, 31.0, 41.0, 51.0];
    cfg.p00 = vec![0.5, 0.9, 0.6, 0.8, 0.8];
    cfg.p11 = vec![0.9, 0.31, 0.7, 0.9, 0.3];
    cfg.detection = crate::config::DetectionMode::Abstract;
    cfg.abstract_p_miss = 0.1;
    cfg.abstract_p_fa = 0.01;
    // Constant-step tracking suits the permuting statistics.
    cfg.alpha1 = 0.1;
    cfg.epsilon = 0.1;
    cfg.nonstat_permutations = 4;
    cfg.k_s = vec![1; cfg.n_sus];
    cfg.weights = vec![1.0; cfg.n_sus];
    cfg.p_miss_target = vec![0.1; 5];
    cfg
}

/// The Bernoulli scenario: idle probabilities realized as a degenerate
/// two-state chain with `p00 = p0` and `p11 = 1 - p0`.
pub fn bernoulli_scenario() -> ScenarioConfig {
    let mut cfg = markov_scenario();
    let p0 = [0.87, 0.17, 0.43, 0.33, 0.78];
    cfg.p00 = p0.to_vec();
    cfg.p11 = p0.iter().map(|&p| 1.0 - p).collect();
    cfg
}
