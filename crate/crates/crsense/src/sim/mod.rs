//! The slot-loop engine tying channel, detection, assignment and policy
//! together, plus multi-run experiment orchestration.
//!
//! Each run owns its scenario realization and random stream; runs execute
//! in parallel and the aggregator averages their metric series pointwise.

pub mod calib;
pub mod metrics;
pub mod nonstat;

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::assignment::{self, SapInstance};
use crate::channel::{
    instant_snr, instant_throughput, permute_statistics, stationary_idle_prob, GilbertElliot,
    ScenarioState, SubbandProfile,
};
use crate::config::{DetectionMode, PolicyKind, ScenarioConfig};
use crate::detection::{fuse_or, local_pfa_for_global, EnergyDetector};
use crate::error::{Error, Result};
use crate::policy::baselines::genie_select;
use crate::policy::{
    band_reward, q_update, step_policy, su_reward, ExploitParams, HoppingCodebook, Phase,
    PolicyConfig, PolicyState, QTables, SensingDirective, SolverKind,
};
use metrics::MetricsSeries;

/// Everything that happened in one slot.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub directive: SensingDirective,
    /// Ground truth occupancy per band after the chains advanced.
    pub true_occupied: Vec<bool>,
    /// Local decisions as (su, band, occupied-decision) triples.
    pub local_decisions: Vec<(usize, usize, bool)>,
    /// Fusion-center decision per band; None when the band was not sensed.
    pub fc_occupied: Vec<Option<bool>>,
    /// Bands granted access (sensed and declared idle).
    pub accessed: Vec<bool>,
    /// Stage-one reward collected per band.
    pub rewards: Vec<f64>,
    /// Collision flags: accessed while actually occupied.
    pub collisions: Vec<bool>,
    pub sensor_count: usize,
    /// Ideal-policy reward on the same ground truth.
    pub genie_reward: f64,
}

impl SlotOutcome {
    pub fn su_reward_total(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Per-run simulation state for the full detection chain.
pub struct Engine {
    cfg: ScenarioConfig,
    pub state: ScenarioState,
    pub policy: PolicyState,
    pcfg: PolicyConfig,
    exploit: ExploitParams,
    /// Calibrated detectors indexed by (sensors on the band) - 1.
    detectors: Vec<EnergyDetector>,
    rng: ChaCha8Rng,
    /// Wall time spent in each configured solver on identical instances.
    pub solver_time: Vec<Duration>,
    pub exploit_instances: u64,
}

impl Engine {
    /// Materialize one run: draw link shadowing, initial chain states and
    /// the permutation schedule, and calibrate the detector bank.
    pub fn new(cfg: &ScenarioConfig, run_seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
        let shadow = Normal::new(0.0, cfg.shadow_std_db.max(0.0))
            .map_err(|e| Error::invalid("shadow_std_db", e.to_string()))?;

        let mut profiles = Vec::with_capacity(cfg.n_bands);
        for band in 0..cfg.n_bands {
            let idle = stationary_idle_prob(cfg.p00[band], cfg.p11[band]).unwrap_or(1.0);
            let state = if rng.random::<f64>() < idle { 0 } else { 1 };
            let chain = GilbertElliot::new(cfg.p00[band], cfg.p11[band], state)?;
            let mean_snr_db: Vec<f64> = (0..cfg.n_sus)
                .map(|_| cfg.mean_snr_db + shadow.sample(&mut rng))
                .collect();
            profiles.push(SubbandProfile::new(
                chain,
                cfg.mu[band],
                cfg.shadow_std_db,
                mean_snr_db,
            )?);
        }

        // Permutation instants come from the experiment seed so every run
        // sees drops at the same slots.
        let mut schedule_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
        let permutation_schedule =
            draw_permutation_schedule(cfg.nonstat_permutations, cfg.horizon, &mut schedule_rng);
        let state = ScenarioState::new(profiles, permutation_schedule)?;

        let detectors: Vec<EnergyDetector> = (1..=cfg.n_sus)
            .map(|d| {
                let pfa = local_pfa_for_global(cfg.p_f_fc, d)?;
                EnergyDetector::for_pfa(pfa, cfg.num_samples)
            })
            .collect::<Result<_>>()?;

        let pcfg = PolicyConfig {
            epsilon: if cfg.policy == PolicyKind::FixedHopping {
                1.0
            } else {
                cfg.epsilon
            },
            alpha1: cfg.alpha1,
            alpha2: cfg.alpha2,
            num_bands_sought: cfg.l,
            diversity: cfg.d,
            su_q_init: cfg.su_q_init,
        };
        pcfg.validate(cfg.n_sus, cfg.n_bands)?;
        let codebook = HoppingCodebook::with_default_shifts(cfg.n_bands, cfg.n_sus, cfg.d)?;
        let policy = PolicyState::new(QTables::new(cfg.n_sus, cfg.n_bands, cfg.su_q_init), codebook);
        let exploit = ExploitParams {
            weights: cfg.weights.clone(),
            capacities: cfg.k_s.clone(),
            miss_targets: cfg.p_miss_target.clone(),
            safety_margin: cfg.safety_margin,
            solver: cfg.solvers[0],
        };

        Ok(Self {
            cfg: cfg.clone(),
            state,
            policy,
            pcfg,
            exploit,
            detectors,
            rng,
            solver_time: vec![Duration::ZERO; cfg.solvers.len()],
            exploit_instances: 0,
        })
    }

    /// Advance the world one slot: channel step, policy directive, local
    /// sensing, OR fusion, access grants, rewards, Q updates, and the
    /// genie reference on the same ground truth.
    pub fn run_slot(&mut self) -> SlotOutcome {
        let n_b = self.cfg.n_bands;
        let slot = self.state.slot_index + 1;

        if self.state.permutation_schedule.contains(&slot) {
            permute_statistics(&mut self.state, &mut self.rng);
        }
        let mut occupied = vec![false; n_b];
        for (b, o) in occupied.iter_mut().enumerate() {
            *o = self.state.profiles[b].chain.step(&mut self.rng) == 1;
        }
        let throughput: Vec<f64> = (0..n_b)
            .map(|b| {
                instant_throughput(
                    self.state.profiles[b].mean_throughput,
                    self.cfg.deterministic_throughput,
                    &mut self.rng,
                )
            })
            .collect();

        let directive = step_policy(&mut self.policy, &self.pcfg, &self.exploit, &mut self.rng);
        if directive.phase == Phase::Exploitation && self.cfg.solvers.len() > 1 {
            self.time_solvers(&directive);
        }

        // Local sensing and per-band fusion; thresholds track the number
        // of SUs actually assigned to the band this slot.
        let mut local_decisions = Vec::new();
        let mut fc_occupied: Vec<Option<bool>> = vec![None; n_b];
        for &band in &directive.bands {
            let sus = directive.sus_for_band(band);
            debug_assert!(!sus.is_empty());
            let det = self.detectors[sus.len() - 1];
            let mut decisions = Vec::with_capacity(sus.len());
            for &su in &sus {
                let snr = instant_snr(
                    self.state.profiles[band].mean_snr_db[su],
                    self.cfg.fading,
                    &mut self.rng,
                );
                let d = det.sense(occupied[band], snr, &mut self.rng);
                decisions.push(d);
                local_decisions.push((su, band, d));
            }
            fc_occupied[band] = Some(fuse_or(&decisions).expect("non-empty sensing set"));
        }

        // Access, rewards, and both Q-table updates.
        let mut accessed = vec![false; n_b];
        let mut rewards = vec![0.0; n_b];
        let mut collisions = vec![false; n_b];
        for &band in &directive.bands {
            let declared_occupied = fc_occupied[band].unwrap();
            accessed[band] = !declared_occupied;
            let reward = band_reward(accessed[band], !occupied[band], throughput[band]);
            rewards[band] = reward;
            collisions[band] = accessed[band] && occupied[band];
            let q = &mut self.policy.q;
            q.band_q[band] = q_update(q.band_q[band], reward, self.pcfg.alpha1);
            q.band_updates[band] += 1;
        }
        for &(su, band, decision) in &local_decisions {
            let declared_occupied = fc_occupied[band].unwrap();
            if declared_occupied {
                let q = &mut self.policy.q;
                let r = su_reward(decision, true, q.su_q[su][band]);
                q.su_q[su][band] = q_update(q.su_q[su][band], r, self.pcfg.alpha2);
                q.su_updates[su][band] += 1;
            }
            // Fusion center declared idle: the value is left untouched.
        }

        let idle: Vec<bool> = occupied.iter().map(|&o| !o).collect();
        let genie_reward: f64 = genie_select(&idle, &throughput, self.cfg.l)
            .iter()
            .map(|&b| throughput[b])
            .sum();

        self.state.slot_index = slot;
        SlotOutcome {
            sensor_count: directive.sensor_count(),
            directive,
            true_occupied: occupied,
            local_decisions,
            fc_occupied,
            accessed,
            rewards,
            collisions,
            genie_reward,
        }
    }

    /// Re-solve the instance the policy just faced with every configured
    /// solver, charging wall time per solver. Results are discarded; only
    /// the primary solver's assignment (already inside the directive)
    /// drives the simulation.
    fn time_solvers(&mut self, directive: &SensingDirective) {
        let inst = build_sap_instance(&self.policy.q, &directive.bands, &self.exploit);
        self.exploit_instances += 1;
        for (i, solver) in self.cfg.solvers.iter().enumerate() {
            let start = Instant::now();
            let _ = match solver {
                SolverKind::BranchBound => assignment::solve_bb(&inst).is_ok(),
                SolverKind::IterativeHungarian => {
                    assignment::solve_iterative_hungarian(&inst).is_ok()
                }
            };
            self.solver_time[i] += start.elapsed();
        }
    }
}

/// The SAP instance stage two would build for the given bands.
pub fn build_sap_instance(
    q: &QTables,
    bands: &[usize],
    exploit: &ExploitParams,
) -> SapInstance {
    let n_sus = q.su_q.len();
    let pd_hat: Vec<Vec<f64>> = (0..n_sus)
        .map(|s| bands.iter().map(|&b| q.su_q[s][b]).collect())
        .collect();
    let targets: Vec<f64> = bands.iter().map(|&b| exploit.miss_targets[b]).collect();
    SapInstance::new(
        exploit.weights.clone(),
        pd_hat,
        targets,
        exploit.capacities.clone(),
        exploit.safety_margin,
    )
    .expect("validated at config load")
}

fn draw_permutation_schedule(count: usize, horizon: u64, rng: &mut impl Rng) -> Vec<u64> {
    let mut slots = std::collections::BTreeSet::new();
    // Keep permutations off the very first slots so every policy has a
    // history to disrupt.
    let lo = (horizon / 20).max(2);
    while slots.len() < count.min(horizon.saturating_sub(lo) as usize) {
        slots.insert(rng.random_range(lo..=horizon));
    }
    slots.into_iter().collect()
}

/// Summary of one finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub seed: u64,
    pub final_relative_throughput: f64,
    pub final_miss_rate: Option<f64>,
    pub final_sensing_ratio: f64,
    pub total_su_throughput: f64,
    pub total_genie_throughput: f64,
}

/// A finished multi-run experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub series: MetricsSeries,
    pub per_run: Vec<RunSummary>,
    /// Total wall time per configured solver over identical instances,
    /// present when more than one solver was configured.
    pub solver_time: Option<Vec<(SolverKind, Duration)>>,
    pub exploit_instances: u64,
}

/// Execute one run and sample its metric series.
pub fn run_single(cfg: &ScenarioConfig, run_seed: u64) -> Result<(MetricsSeries, RunSummary, Vec<Duration>, u64)> {
    let mut engine = Engine::new(cfg, run_seed)?;
    let sample_slots = metrics::log_spaced_slots(cfg.horizon, cfg.sample_points);
    let mut series = MetricsSeries {
        slots: sample_slots.clone(),
        ..Default::default()
    };
    let windowed = cfg.miss_window > 0;
    let mut window: std::collections::VecDeque<(u64, u64)> = Default::default();

    let mut cum_su = 0.0;
    let mut cum_genie = 0.0;
    let mut occupied_sensed = 0u64;
    let mut misses = 0u64;
    let mut sensors = 0u64;
    let mut next_sample = 0usize;

    for slot in 1..=cfg.horizon {
        let out = engine.run_slot();
        cum_su += out.su_reward_total();
        cum_genie += out.genie_reward;
        sensors += out.sensor_count as u64;
        let mut slot_occ = 0u64;
        let mut slot_miss = 0u64;
        for &band in &out.directive.bands {
            if out.true_occupied[band] {
                slot_occ += 1;
                if out.accessed[band] {
                    slot_miss += 1;
                }
            }
        }
        occupied_sensed += slot_occ;
        misses += slot_miss;
        if windowed {
            window.push_back((slot_occ, slot_miss));
            if window.len() as u64 > cfg.miss_window {
                window.pop_front();
            }
        }

        if next_sample < sample_slots.len() && sample_slots[next_sample] == slot {
            series.cum_su_throughput.push(cum_su);
            series.cum_genie_throughput.push(cum_genie);
            series
                .relative_throughput
                .push(metrics::relative_throughput(cum_su, cum_genie));
            series
                .miss_rate
                .push(metrics::cumulative_miss_rate(misses, occupied_sensed));
            if windowed {
                let (o, m) = window
                    .iter()
                    .fold((0u64, 0u64), |acc, &(o, m)| (acc.0 + o, acc.1 + m));
                series
                    .miss_rate_windowed
                    .push(metrics::cumulative_miss_rate(m, o));
            }
            series
                .sensing_ratio
                .push(metrics::sensing_ratio(sensors, slot, cfg.d, cfg.l));
            next_sample += 1;
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
    Ok((series, summary, engine.solver_time, engine.exploit_instances))
}

/// Execute `runs` independent runs (seeds `seed + run_index`) in parallel
/// and average the metric series pointwise.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.detection == DetectionMode::Abstract {
        return nonstat::run_abstract_experiment(cfg);
    }
    let results: Vec<_> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| run_single(cfg, cfg.seed.wrapping_add(r as u64)))
        .collect::<Result<_>>()?;

    let all_series: Vec<MetricsSeries> = results.iter().map(|(s, ..)| s.clone()).collect();
    let per_run: Vec<RunSummary> = results.iter().map(|(_, r, ..)| r.clone()).collect();
    let mut solver_time = vec![Duration::ZERO; cfg.solvers.len()];
    let mut exploit_instances = 0u64;
    for (_, _, times, n) in &results {
        for (acc, t) in solver_time.iter_mut().zip(times) {
            *acc += *t;
        }
        exploit_instances += n;
    }
    Ok(ExperimentResult {
        series: metrics::average_series(&all_series),
        per_run,
        solver_time: if cfg.solvers.len() > 1 {
            Some(cfg.solvers.iter().copied().zip(solver_time).collect())
        } else {
            None
        },
        exploit_instances,
    })
}
