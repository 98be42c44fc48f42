//! Baseline band-selection policies: discounted UCB, a belief-based
//! myopic policy with known chain parameters, and the genie used as the
//! ideal-throughput reference.

use rand::Rng;

use crate::error::{Error, Result};

/// Discounted UCB over bands: discounted empirical mean plus an
/// exploration bonus that widens for rarely-played bands.
#[derive(Debug, Clone)]
pub struct Ducb {
    gamma: f64,
    xi: f64,
    disc_count: Vec<f64>,
    disc_reward: Vec<f64>,
    /// Reward scale for the confidence radius: the largest reward seen.
    max_reward: f64,
}

impl Ducb {
    pub fn new(n_bands: usize, gamma: f64, xi: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid("gamma", format!("{gamma} must be in (0,1)")));
        }
        if !(xi > 0.0) {
            return Err(Error::invalid("xi", "must be positive"));
        }
        Ok(Self {
            gamma,
            xi,
            disc_count: vec![0.0; n_bands],
            disc_reward: vec![0.0; n_bands],
            max_reward: 0.0,
        })
    }

    /// Pick the band with the highest discounted upper confidence bound;
    /// unplayed bands first, ties broken uniformly at random.
    pub fn select(&self, rng: &mut impl Rng) -> usize {
        const UNSEEN: f64 = 1e-9;
        let unvisited: Vec<usize> = (0..self.disc_count.len())
            .filter(|&b| self.disc_count[b] < UNSEEN)
            .collect();
        if !unvisited.is_empty() {
            return unvisited[rng.random_range(0..unvisited.len())];
        }
        let n_gamma: f64 = self.disc_count.iter().sum();
        let log_n = n_gamma.ln().max(0.0);
        let scores: Vec<f64> = (0..self.disc_count.len())
            .map(|b| {
                let mean = self.disc_reward[b] / self.disc_count[b];
                let radius = 2.0 * self.max_reward * (self.xi * log_n / self.disc_count[b]).sqrt();
                mean + radius
            })
            .collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..scores.len()).filter(|&b| scores[b] == best).collect();
        ties[rng.random_range(0..ties.len())]
    }

    /// Record the reward for the played band, discounting all history.
    pub fn update(&mut self, band: usize, reward: f64) {
        for b in 0..self.disc_count.len() {
            self.disc_count[b] *= self.gamma;
            self.disc_reward[b] *= self.gamma;
        }
        self.disc_count[band] += 1.0;
        self.disc_reward[band] += reward;
        if reward > self.max_reward {
            self.max_reward = reward;
        }
    }
}

/// Per-band idle beliefs for the parameter-informed myopic baseline.
#[derive(Debug, Clone)]
pub struct BeliefState {
    pub omega: Vec<f64>,
}

impl BeliefState {
    pub fn new(initial: Vec<f64>) -> Self {
        Self { omega: initial }
    }

    /// One-step belief propagation through the known chain parameters:
    /// the probability a band is idle next slot.
    pub fn predict(&mut self, p00: &[f64], p11: &[f64]) {
        for (b, w) in self.omega.iter_mut().enumerate() {
            *w = *w * p00[b] + (1.0 - *w) * (1.0 - p11[b]);
        }
    }

    /// Reset a sensed band's belief to the fusion-center outcome.
    pub fn observe(&mut self, band: usize, declared_idle: bool) {
        self.omega[band] = if declared_idle { 1.0 } else { 0.0 };
    }

    /// Top-l bands by expected immediate throughput, belief times mean.
    pub fn select(&self, mean_throughput: &[f64], l: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.omega.len()).collect();
        idx.sort_by(|&a, &b| {
            (self.omega[b] * mean_throughput[b]).total_cmp(&(self.omega[a] * mean_throughput[a]))
        });
        idx.truncate(l.min(self.omega.len()));
        idx.sort_unstable();
        idx
    }
}

/// Oracle selection: the `l` idle bands with highest instantaneous
/// throughput (fewer when fewer are idle).
pub fn genie_select(idle: &[bool], throughput: &[f64], l: usize) -> Vec<usize> {
    let mut bands: Vec<usize> = (0..idle.len()).filter(|&b| idle[b]).collect();
    bands.sort_by(|&a, &b| throughput[b].total_cmp(&throughput[a]).then(a.cmp(&b)));
    bands.truncate(l);
    bands
}
