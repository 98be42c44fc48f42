//! Neyman-Pearson energy detection and hard-decision OR fusion.
//!
//! The local test statistic is the energy of `num_samples` real Gaussian
//! samples with unit noise variance, so the null distribution is central
//! chi-square with `num_samples` degrees of freedom and the occupied-band
//! distribution is noncentral chi-square with noncentrality
//! `num_samples * snr`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};

/// Fusion rule at the fusion center. Only the OR rule is supported: a band
/// is declared idle only when every sensing SU reports it idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionRule {
    Or,
}

/// Fusion configuration: rule, the global false-alarm budget at the fusion
/// center, and the exploration-phase diversity order.
#[derive(Debug, Clone, Copy)]
pub struct FusionConfig {
    pub rule: FusionRule,
    pub global_pfa: f64,
    pub diversity: usize,
}

impl FusionConfig {
    pub fn new(global_pfa: f64, diversity: usize) -> Result<Self> {
        if !(global_pfa > 0.0 && global_pfa < 1.0) {
            return Err(Error::invalid(
                "global_pfa",
                format!("{global_pfa} must be in (0,1)"),
            ));
        }
        if diversity < 1 {
            return Err(Error::invalid("diversity", "must be >= 1"));
        }
        Ok(Self {
            rule: FusionRule::Or,
            global_pfa,
            diversity,
        })
    }
}

/// Local false-alarm rate such that the OR of `d` independent equal-rate
/// detectors false-alarms at exactly `global_pfa`.
pub fn local_pfa_for_global(global_pfa: f64, d: usize) -> Result<f64> {
    if !(global_pfa > 0.0 && global_pfa < 1.0) {
        return Err(Error::invalid(
            "global_pfa",
            format!("{global_pfa} must be in (0,1)"),
        ));
    }
    if d < 1 {
        return Err(Error::invalid("d", "must be >= 1"));
    }
    Ok(1.0 - (1.0 - global_pfa).powf(1.0 / d as f64))
}

/// Energy threshold hitting a target false-alarm rate: the (1 - pfa)
/// quantile of the central chi-square null with `num_samples` degrees of
/// freedom.
pub fn threshold_for_pfa(pfa: f64, num_samples: usize) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::invalid("pfa", format!("{pfa} must be in (0,1)")));
    }
    if num_samples < 1 {
        return Err(Error::invalid("num_samples", "must be >= 1"));
    }
    let chi = ChiSquared::new(num_samples as f64)
        .map_err(|e| Error::invalid("num_samples", e.to_string()))?;
    let t = chi.inverse_cdf(1.0 - pfa);
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::ThresholdSolver { pfa, num_samples });
    }
    Ok(t)
}

/// Calibrated energy detector for one local sensing decision.
#[derive(Debug, Clone, Copy)]
pub struct EnergyDetector {
    pub num_samples: usize,
    /// Noise power, normalized to 1 throughout.
    pub noise_power: f64,
    pub threshold: f64,
}

impl EnergyDetector {
    /// Calibrate a detector for the target local false-alarm rate.
    pub fn for_pfa(pfa: f64, num_samples: usize) -> Result<Self> {
        Ok(Self {
            num_samples,
            noise_power: 1.0,
            threshold: threshold_for_pfa(pfa, num_samples)?,
        })
    }

    /// Draw the energy statistic for one sensing slot and threshold it.
    ///
    /// Samples are unit-variance Gaussian noise, plus a per-sample signal
    /// amplitude of sqrt(snr) when the band is occupied. Returns true for
    /// a local "occupied" decision.
    pub fn sense(&self, band_occupied: bool, snr: f64, rng: &mut impl Rng) -> bool {
        let amp = if band_occupied { snr.max(0.0).sqrt() } else { 0.0 };
        let mut energy = 0.0;
        for _ in 0..self.num_samples {
            let n: f64 = StandardNormal.sample(rng);
            let x = n + amp;
            energy += x * x;
        }
        energy > self.threshold
    }
}

/// P(T > threshold | occupied) for the noncentral chi-square energy
/// statistic with `num_samples` degrees of freedom and noncentrality
/// `num_samples * snr`.
pub fn detection_probability(snr: f64, num_samples: usize, threshold: f64) -> f64 {
    let k = num_samples as f64;
    let lambda = k * snr.max(0.0);
    noncentral_chi2_sf(threshold, k, lambda)
}

/// Mean detection probability under block Rayleigh fading: the expectation
/// of `detection_probability` over a unit-mean exponential power gain,
/// evaluated by Monte Carlo with `gain_draws` samples.
pub fn mean_detection_probability(
    mean_snr_linear: f64,
    num_samples: usize,
    threshold: f64,
    gain_draws: usize,
    rng: &mut impl Rng,
) -> f64 {
    let mut acc = 0.0;
    for _ in 0..gain_draws {
        let g: f64 = rand_distr::Exp1.sample(rng);
        acc += detection_probability(mean_snr_linear * g, num_samples, threshold);
    }
    acc / gain_draws as f64
}

/// Survival function of the noncentral chi-square distribution.
///
/// Evaluated as a Poisson mixture of central chi-square CDFs, expanded
/// outward from the dominant Poisson term; falls back to the Gaussian
/// approximation for very large noncentrality where the mixture would
/// need tens of thousands of terms.
fn noncentral_chi2_sf(x: f64, k: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if lambda <= 0.0 {
        return 1.0 - gamma_lr(k / 2.0, x / 2.0);
    }
    if !lambda.is_finite() {
        return 1.0;
    }
    if lambda > 2.0e4 {
        let mean = k + lambda;
        let var = 2.0 * (k + 2.0 * lambda);
        let z = (x - mean) / var.sqrt();
        return 0.5 * erfc_scalar(z / std::f64::consts::SQRT_2);
    }

    let half = lambda / 2.0;
    let j0 = half.floor() as i64;
    let ln_w0 = -half + j0 as f64 * half.ln() - statrs::function::gamma::ln_gamma(j0 as f64 + 1.0);

    let mut cdf = 0.0;
    // Upward from the mode.
    let mut ln_w = ln_w0;
    let mut j = j0;
    loop {
        let w = ln_w.exp();
        if w < 1e-18 && j > j0 {
            break;
        }
        cdf += w * gamma_lr(k / 2.0 + j as f64, x / 2.0);
        j += 1;
        ln_w += half.ln() - (j as f64).ln();
        if j - j0 > 200_000 {
            break;
        }
    }
    // Downward from just below the mode.
    let mut ln_w = ln_w0;
    let mut j = j0;
    while j > 0 {
        ln_w += (j as f64).ln() - half.ln();
        j -= 1;
        let w = ln_w.exp();
        if w < 1e-18 {
            break;
        }
        cdf += w * gamma_lr(k / 2.0 + j as f64, x / 2.0);
    }
    (1.0 - cdf).clamp(0.0, 1.0)
}

/// Complementary error function via the Abramowitz-Stegun 7.1.26 rational
/// approximation (|error| < 1.5e-7, ample for the large-lambda tail).
fn erfc_scalar(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_scalar(-x);
    }
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    poly * (-x * x).exp()
}

/// OR-rule fusion of local binary decisions: occupied iff any local
/// decision says occupied.
pub fn fuse_or(decisions: &[bool]) -> Result<bool> {
    if decisions.is_empty() {
        return Err(Error::BandNotSensed);
    }
    Ok(decisions.iter().any(|&d| d))
}

/// Fused miss-detection probability of an OR-rule assignment:
/// the product of (1 - pd_s) over the assigned SUs.
pub fn fused_miss_prob(pd: &[f64], x: &[bool]) -> f64 {
    debug_assert_eq!(pd.len(), x.len());
    pd.iter()
        .zip(x)
        .filter(|&(_, &on)| on)
        .map(|(&p, _)| 1.0 - p)
        .product()
}
