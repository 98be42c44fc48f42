//! SU Q-value calibration experiment.
//!
//! A set of SUs with spread mean SNRs collaboratively senses one band in
//! rotating pairs (OR fusion, diversity D). After enough sensing
//! instances the per-SU Q-values settle near the analytic fixed point
//! (p1 pd_s + p0 pf_s) / (p1 pd_fc + p0 pf_fc), where the fusion-center
//! quantities average over the SU's rotation partners.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::detection::{
    fuse_or, local_pfa_for_global, mean_detection_probability, EnergyDetector,
};
use crate::error::{Error, Result};
use crate::policy::{q_update, su_q_limit, su_reward};

#[derive(Debug, Clone)]
pub struct CalibConfig {
    /// Mean SNR per SU, dB.
    pub mean_snr_db: Vec<f64>,
    /// Probability the band is occupied each instance.
    pub p1: f64,
    pub num_samples: usize,
    pub global_pfa: f64,
    /// Sensing diversity (SUs per instance).
    pub d: usize,
    pub alpha2: f64,
    pub su_q_init: f64,
    /// Sensing instances per run.
    pub instances: u64,
    pub runs: usize,
    pub seed: u64,
    /// Block Rayleigh fading on (true for the reference experiment).
    pub fading: bool,
    /// Monte Carlo draws for the analytic mean detection probability.
    pub gain_draws: usize,
}

impl Default for CalibConfig {
    fn default() -> Self {
        Self {
            mean_snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0],
            p1: 0.5,
            num_samples: 50,
            global_pfa: 0.01,
            d: 2,
            alpha2: 0.1,
            su_q_init: 0.5,
            instances: 10_000,
            runs: 100,
            seed: 7,
            fading: true,
            gain_draws: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibResult {
    /// Mean converged Q-value per SU over the runs.
    pub mean_su_q: Vec<f64>,
    /// Analytic fixed point per SU.
    pub limit: Vec<f64>,
    /// Analytic mean detection probability per SU (the Pd curve).
    pub mean_pd: Vec<f64>,
    pub mean_abs_gap: f64,
}

pub fn run_su_q_calibration(cfg: &CalibConfig) -> Result<CalibResult> {
    let n = cfg.mean_snr_db.len();
    if cfg.d < 1 || cfg.d > n {
        return Err(Error::invalid("d", "must be in 1..=n_sus"));
    }
    let local_pfa = local_pfa_for_global(cfg.global_pfa, cfg.d)?;
    let det = EnergyDetector::for_pfa(local_pfa, cfg.num_samples)?;
    let snr_lin: Vec<f64> = cfg
        .mean_snr_db
        .iter()
        .map(|db| 10f64.powf(db / 10.0))
        .collect();

    // Analytic side: per-SU mean detection probability under fading, then
    // the fixed point with partner-averaged fusion quantities.
    let mut pd_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5050_5050);
    let mean_pd: Vec<f64> = snr_lin
        .iter()
        .map(|&s| {
            if cfg.fading {
                mean_detection_probability(s, cfg.num_samples, det.threshold, cfg.gain_draws, &mut pd_rng)
            } else {
                crate::detection::detection_probability(s, cfg.num_samples, det.threshold)
            }
        })
        .collect();
    let pf_fc = 1.0 - (1.0 - local_pfa).powi(cfg.d as i32);
    let pairs = all_pairs(n);
    let limit: Vec<f64> = (0..n)
        .map(|s| {
            let partners: Vec<usize> = pairs
                .iter()
                .filter(|p| p.contains(&s))
                .map(|p| if p[0] == s { p[1] } else { p[0] })
                .collect();
            let pd_fc = partners
                .iter()
                .map(|&p| 1.0 - (1.0 - mean_pd[s]) * (1.0 - mean_pd[p]))
                .sum::<f64>()
                / partners.len() as f64;
            su_q_limit(cfg.p1, 1.0 - cfg.p1, mean_pd[s], local_pfa, pd_fc, pf_fc)
        })
        .collect();

    // Simulation side.
    let sum_q = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(run as u64 + 1));
            let mut su_q = vec![cfg.su_q_init; n];
            for k in 0..cfg.instances {
                let pair = &pairs[(k as usize) % pairs.len()];
                let occupied = rng.random::<f64>() < cfg.p1;
                let decisions: Vec<bool> = pair
                    .iter()
                    .map(|&s| {
                        let gain: f64 = if cfg.fading { Exp1.sample(&mut rng) } else { 1.0 };
                        det.sense(occupied, snr_lin[s] * gain, &mut rng)
                    })
                    .collect();
                let fc = fuse_or(&decisions).expect("pair is non-empty");
                if fc {
                    for (&s, &d) in pair.iter().zip(&decisions) {
                        let r = su_reward(d, true, su_q[s]);
                        su_q[s] = q_update(su_q[s], r, cfg.alpha2);
                    }
                }
            }
            su_q
        })
        .reduce(
            || vec![0.0; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    let mean_su_q: Vec<f64> = sum_q.into_iter().map(|q| q / cfg.runs as f64).collect();
    let mean_abs_gap = mean_su_q
        .iter()
        .zip(&limit)
        .map(|(q, l)| (q - l).abs())
        .sum::<f64>()
        / n as f64;
    Ok(CalibResult {
        mean_su_q,
        limit,
        mean_pd,
        mean_abs_gap,
    })
}

fn all_pairs(n: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            out.push([a, b]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_are_probabilities_and_ordered_with_snr() {
        let cfg = CalibConfig {
            runs: 1,
            instances: 10,
            gain_draws: 20_000,
            ..Default::default()
        };
        let res = run_su_q_calibration(&cfg).unwrap();
        assert!(res.limit.iter().all(|&l| (0.0..=1.2).contains(&l)));
        // Higher mean SNR cannot lower the fixed point.
        for w in res.mean_pd.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "mean Pd must grow with SNR");
        }
    }

    #[test]
    fn no_fading_high_snr_converges_near_one() {
        // A strong unfaded link detects essentially always, and with a
        // strong partner the fusion center agrees, so the Q-value and the
        // fixed point both approach 1.
        let cfg = CalibConfig {
            mean_snr_db: vec![10.0, 10.0],
            fading: false,
            runs: 8,
            instances: 3000,
            gain_draws: 1000,
            ..Default::default()
        };
        let res = run_su_q_calibration(&cfg).unwrap();
        for (q, l) in res.mean_su_q.iter().zip(&res.limit) {
            assert!(*l > 0.95, "limit {l}");
            assert!((q - l).abs() < 0.05, "q {q} vs limit {l}");
        }
    }
}
