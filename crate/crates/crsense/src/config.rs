//! Scenario configuration: flat `key = value` records.
//!
//! Lines hold one `key = value` pair each; `#` starts a comment. Array
//! keys (per-SU or per-band) accept either a comma-separated list of the
//! right length or a single scalar that broadcasts. Defaults reproduce
//! the stationary reference scenario: 6 SUs, 10 subbands with symmetric
//! 0.9/0.9 chains, three bands at tenfold throughput, 50-sample energy
//! detection at a 0.01 fusion false-alarm rate, D=2 exploration and L=3
//! exploitation with 0.1 miss targets.

use std::path::Path;

use crate::error::{Error, Result};
use crate::policy::SolverKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Proposed,
    FixedHopping,
    Ducb,
    Myopic,
    Genie,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Proposed => "proposed",
            PolicyKind::FixedHopping => "fixed_hopping",
            PolicyKind::Ducb => "ducb",
            PolicyKind::Myopic => "myopic",
            PolicyKind::Genie => "genie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    /// Full energy-detection chain with calibrated thresholds.
    Energy,
    /// Fixed fusion-level miss/false-alarm probabilities, no sensor model.
    Abstract,
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n_sus: usize,
    pub n_bands: usize,
    /// Bands sensed per exploitation slot.
    pub l: usize,
    /// Exploration diversity order.
    pub d: usize,
    pub epsilon: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Per-SU simultaneous sensing capacity.
    pub k_s: Vec<usize>,
    /// Per-band miss-detection targets.
    pub p_miss_target: Vec<f64>,
    /// Fusion-center false-alarm budget.
    pub p_f_fc: f64,
    /// Energy-detector sample count.
    pub num_samples: usize,
    pub horizon: u64,
    pub runs: usize,
    pub seed: u64,
    /// SAP solvers; the first drives the policy, any further ones are
    /// timed on the same instances for comparison.
    pub solvers: Vec<SolverKind>,
    pub policy: PolicyKind,
    pub p00: Vec<f64>,
    pub p11: Vec<f64>,
    /// Per-band mean throughput.
    pub mu: Vec<f64>,
    /// Network-mean SNR (dB) around which link shadowing is drawn.
    pub mean_snr_db: f64,
    pub shadow_std_db: f64,
    /// Number of statistics permutations over the horizon (0 = stationary).
    pub nonstat_permutations: usize,
    pub weights: Vec<f64>,
    pub safety_margin: f64,
    pub ducb_gamma: f64,
    pub ducb_xi: f64,
    /// Throughput per idle access: exactly mu (true) or mu-mean
    /// exponential (false).
    pub deterministic_throughput: bool,
    /// Block Rayleigh fast fading on sensing links; off forces unit gain.
    pub fading: bool,
    pub detection: DetectionMode,
    pub abstract_p_miss: f64,
    pub abstract_p_fa: f64,
    pub su_q_init: f64,
    /// Number of log-spaced slots recorded in metric series.
    pub sample_points: usize,
    /// Sliding window (slots) for the windowed miss-rate curve; 0 = off.
    pub miss_window: u64,
    /// Bernoulli reward gate for the convergence-bounds experiment.
    pub bernoulli_gate: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let n_sus = 6;
        let n_bands = 10;
        let mut mu = vec![1.0; n_bands];
        for m in mu.iter_mut().take(3) {
            *m = 10.0;
        }
        Self {
            n_sus,
            n_bands,
            l: 3,
            d: 2,
            epsilon: 0.1,
            alpha1: 0.01,
            alpha2: 0.1,
            k_s: vec![1; n_sus],
            p_miss_target: vec![0.1; n_bands],
            p_f_fc: 0.01,
            num_samples: 50,
            horizon: 10_000,
            runs: 100,
            seed: 1,
            solvers: vec![SolverKind::BranchBound],
            policy: PolicyKind::Proposed,
            p00: vec![0.9; n_bands],
            p11: vec![0.9; n_bands],
            mu,
            mean_snr_db: 10.0,
            shadow_std_db: 9.0,
            nonstat_permutations: 0,
            weights: vec![1.0; n_sus],
            safety_margin: 1.0,
            ducb_gamma: 0.99,
            ducb_xi: 0.6,
            deterministic_throughput: true,
            fading: true,
            detection: DetectionMode::Energy,
            abstract_p_miss: 0.1,
            abstract_p_fa: 0.01,
            su_q_init: 0.5,
            sample_points: 200,
            miss_window: 0,
            bernoulli_gate: 0.5,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "n_s",
    "n_b",
    "l",
    "d",
    "epsilon",
    "alpha1",
    "alpha2",
    "k_s",
    "p_miss_target",
    "p_f_fc",
    "num_samples",
    "horizon",
    "runs",
    "seed",
    "solver",
    "policy",
    "p00",
    "p11",
    "mu",
    "mean_snr_db",
    "shadow_std_db",
    "nonstat_permutations",
    "weights",
    "safety_margin",
    "ducb_gamma",
    "ducb_xi",
    "deterministic_throughput",
    "fading",
    "detection",
    "abstract_p_miss",
    "abstract_p_fa",
    "su_q_init",
    "sample_points",
    "miss_window",
    "bernoulli_gate",
];

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Parse a config document on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), "expected `key = value`")
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::config(
                    &key,
                    format!("unknown key (line {})", lineno + 1),
                ));
            }
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(Error::config(
                    &key,
                    format!("duplicate key (line {})", lineno + 1),
                ));
            }
            pairs.push((key, value.trim().to_string()));
        }

        let mut cfg = ScenarioConfig::default();
        // Sizes first so later vector keys broadcast to the right length.
        let mut sizes_changed = false;
        for (key, value) in &pairs {
            match key.as_str() {
                "n_s" => {
                    cfg.n_sus = parse_num(key, value)?;
                    sizes_changed = true;
                }
                "n_b" => {
                    cfg.n_bands = parse_num(key, value)?;
                    sizes_changed = true;
                }
                _ => {}
            }
        }
        if sizes_changed {
            // Re-derive neutral per-size defaults; the tenfold-throughput
            // pattern only applies to the out-of-the-box shape.
            cfg.k_s = vec![1; cfg.n_sus];
            cfg.weights = vec![1.0; cfg.n_sus];
            cfg.p_miss_target = vec![0.1; cfg.n_bands];
            cfg.p00 = vec![0.9; cfg.n_bands];
            cfg.p11 = vec![0.9; cfg.n_bands];
            cfg.mu = vec![1.0; cfg.n_bands];
            cfg.l = cfg.l.min(cfg.n_bands);
            cfg.d = cfg.d.min(cfg.n_sus);
        }
        for (key, value) in &pairs {
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one key; used by the parser and by sweep overrides.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_s" => self.n_sus = parse_num(key, value)?,
            "n_b" => self.n_bands = parse_num(key, value)?,
            "l" => self.l = parse_num(key, value)?,
            "d" => self.d = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_f64(key, value)?,
            "alpha1" => self.alpha1 = parse_f64(key, value)?,
            "alpha2" => self.alpha2 = parse_f64(key, value)?,
            "k_s" => self.k_s = parse_usize_list(key, value, self.n_sus)?,
            "p_miss_target" => self.p_miss_target = parse_list(key, value, self.n_bands)?,
            "p_f_fc" => self.p_f_fc = parse_f64(key, value)?,
            "num_samples" => self.num_samples = parse_num(key, value)?,
            "horizon" => self.horizon = parse_num(key, value)?,
            "runs" => self.runs = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "solver" => {
                let mut solvers = Vec::new();
                for part in value.split(',') {
                    solvers.push(match part.trim() {
                        "bb" => SolverKind::BranchBound,
                        "ih" => SolverKind::IterativeHungarian,
                        other => {
                            return Err(Error::config(
                                key,
                                format!("unknown solver `{other}` (expected bb or ih)"),
                            ))
                        }
                    });
                }
                self.solvers = solvers;
            }
            "policy" => {
                self.policy = match value {
                    "proposed" => PolicyKind::Proposed,
                    "fixed_hopping" => PolicyKind::FixedHopping,
                    "ducb" => PolicyKind::Ducb,
                    "myopic" => PolicyKind::Myopic,
                    "genie" => PolicyKind::Genie,
                    other => {
                        return Err(Error::config(key, format!("unknown policy `{other}`")))
                    }
                }
            }
            "p00" => self.p00 = parse_list(key, value, self.n_bands)?,
            "p11" => self.p11 = parse_list(key, value, self.n_bands)?,
            "mu" => self.mu = parse_list(key, value, self.n_bands)?,
            "mean_snr_db" => self.mean_snr_db = parse_f64(key, value)?,
            "shadow_std_db" => self.shadow_std_db = parse_f64(key, value)?,
            "nonstat_permutations" => self.nonstat_permutations = parse_num(key, value)?,
            "weights" => self.weights = parse_list(key, value, self.n_sus)?,
            "safety_margin" => self.safety_margin = parse_f64(key, value)?,
            "ducb_gamma" => self.ducb_gamma = parse_f64(key, value)?,
            "ducb_xi" => self.ducb_xi = parse_f64(key, value)?,
            "deterministic_throughput" => {
                self.deterministic_throughput = parse_bool(key, value)?
            }
            "fading" => self.fading = parse_bool(key, value)?,
            "detection" => {
                self.detection = match value {
                    "energy" => DetectionMode::Energy,
                    "abstract" => DetectionMode::Abstract,
                    other => {
                        return Err(Error::config(key, format!("unknown detection `{other}`")))
                    }
                }
            }
            "abstract_p_miss" => self.abstract_p_miss = parse_f64(key, value)?,
            "abstract_p_fa" => self.abstract_p_fa = parse_f64(key, value)?,
            "su_q_init" => self.su_q_init = parse_f64(key, value)?,
            "sample_points" => self.sample_points = parse_num(key, value)?,
            "miss_window" => self.miss_window = parse_num(key, value)?,
            "bernoulli_gate" => self.bernoulli_gate = parse_f64(key, value)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, reason: String| Err(Error::config(key, reason));
        if self.n_sus == 0 {
            return err("n_s", "must be >= 1".into());
        }
        if self.n_bands == 0 {
            return err("n_b", "must be >= 1".into());
        }
        if self.l == 0 || self.l > self.n_bands {
            return err("l", format!("must be in 1..={}", self.n_bands));
        }
        if self.d == 0 || self.d > self.n_sus {
            return err("d", format!("must be in 1..={}", self.n_sus));
        }
        if self.n_sus / self.d > self.n_bands {
            return err("d", "more hopping groups than bands".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return err("epsilon", "must be in [0,1]".into());
        }
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a > 0.0 && a <= 1.0) {
                return err(name, "must be in (0,1]".into());
            }
        }
        if self.k_s.len() != self.n_sus || self.k_s.iter().any(|&k| k == 0) {
            return err("k_s", "one positive capacity per SU".into());
        }
        if self.p_miss_target.len() != self.n_bands
            || self.p_miss_target.iter().any(|&t| !(t > 0.0 && t <= 1.0))
        {
            return err("p_miss_target", "one probability in (0,1] per band".into());
        }
        if !(self.p_f_fc > 0.0 && self.p_f_fc < 1.0) {
            return err("p_f_fc", "must be in (0,1)".into());
        }
        if self.num_samples == 0 {
            return err("num_samples", "must be >= 1".into());
        }
        if self.horizon == 0 {
            return err("horizon", "must be >= 1".into());
        }
        if self.runs == 0 {
            return err("runs", "must be >= 1".into());
        }
        if self.solvers.is_empty() {
            return err("solver", "need at least one solver".into());
        }
        for (name, v) in [("p00", &self.p00), ("p11", &self.p11)] {
            if v.len() != self.n_bands || v.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return err(name, "one probability per band".into());
            }
        }
        if self.mu.len() != self.n_bands || self.mu.iter().any(|&m| !(m >= 0.0)) {
            return err("mu", "one non-negative mean per band".into());
        }
        if self.weights.len() != self.n_sus || self.weights.iter().any(|&w| !(w > 0.0)) {
            return err("weights", "one positive weight per SU".into());
        }
        if !(self.safety_margin > 0.0 && self.safety_margin <= 1.0) {
            return err("safety_margin", "must be in (0,1]".into());
        }
        if !(self.ducb_gamma > 0.0 && self.ducb_gamma < 1.0) {
            return err("ducb_gamma", "must be in (0,1)".into());
        }
        if !(self.ducb_xi > 0.0) {
            return err("ducb_xi", "must be positive".into());
        }
        if self.policy == PolicyKind::Ducb && self.l != 1 {
            return err("policy", "ducb selects a single band; set l = 1".into());
        }
        if matches!(
            self.policy,
            PolicyKind::Ducb | PolicyKind::Myopic | PolicyKind::Genie
        ) && self.detection != DetectionMode::Abstract
        {
            return err(
                "policy",
                format!(
                    "{} is a band-selection baseline; set detection = abstract",
                    self.policy.name()
                ),
            );
        }
        for (name, p) in [
            ("abstract_p_miss", self.abstract_p_miss),
            ("abstract_p_fa", self.abstract_p_fa),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return err(name, "must be in (0,1)".into());
            }
        }
        if !(0.0..=1.0).contains(&self.su_q_init) {
            return err("su_q_init", "must be in [0,1]".into());
        }
        if self.sample_points < 2 {
            return err("sample_points", "must be >= 2".into());
        }
        if !(0.0..=1.0).contains(&self.bernoulli_gate) {
            return err("bernoulli_gate", "must be in [0,1]".into());
        }
        Ok(())
    }

    /// The effective configuration in the same `key = value` format, all
    /// keys present, suitable for `config.echo` and diffing.
    pub fn echo(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let solvers = self
            .solvers
            .iter()
            .map(|s| match s {
                SolverKind::BranchBound => "bb",
                SolverKind::IterativeHungarian => "ih",
            })
            .collect::<Vec<_>>()
            .join(",");
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("n_s", self.n_sus.to_string());
        push("n_b", self.n_bands.to_string());
        push("l", self.l.to_string());
        push("d", self.d.to_string());
        push("epsilon", self.epsilon.to_string());
        push("alpha1", self.alpha1.to_string());
        push("alpha2", self.alpha2.to_string());
        push(
            "k_s",
            self.k_s
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        push("p_miss_target", list(&self.p_miss_target));
        push("p_f_fc", self.p_f_fc.to_string());
        push("num_samples", self.num_samples.to_string());
        push("horizon", self.horizon.to_string());
        push("runs", self.runs.to_string());
        push("seed", self.seed.to_string());
        push("solver", solvers);
        push("policy", self.policy.name().to_string());
        push("p00", list(&self.p00));
        push("p11", list(&self.p11));
        push("mu", list(&self.mu));
        push("mean_snr_db", self.mean_snr_db.to_string());
        push("shadow_std_db", self.shadow_std_db.to_string());
        push(
            "nonstat_permutations",
            self.nonstat_permutations.to_string(),
        );
        push("weights", list(&self.weights));
        push("safety_margin", self.safety_margin.to_string());
        push("ducb_gamma", self.ducb_gamma.to_string());
        push("ducb_xi", self.ducb_xi.to_string());
        push(
            "deterministic_throughput",
            self.deterministic_throughput.to_string(),
        );
        push("fading", self.fading.to_string());
        push(
            "detection",
            match self.detection {
                DetectionMode::Energy => "energy".to_string(),
                DetectionMode::Abstract => "abstract".to_string(),
            },
        );
        push("abstract_p_miss", self.abstract_p_miss.to_string());
        push("abstract_p_fa", self.abstract_p_fa.to_string());
        push("su_q_init", self.su_q_init.to_string());
        push("sample_points", self.sample_points.to_string());
        push("miss_window", self.miss_window.to_string());
        push("bernoulli_gate", self.bernoulli_gate.to_string());
        out
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|e| Error::config(key, e.to_string()))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::config(key, format!("not a boolean: `{other}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(key, e.to_string()))
}

/// Comma list of length `n`, or a scalar broadcast to `n`.
fn parse_list(key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(',').map(|p| p.trim()).collect();
    let vals: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| Error::config(key, e.to_string()))
        })
        .collect::<Result<_>>()?;
    if vals.len() == 1 {
        Ok(vec![vals[0]; n])
    } else if vals.len() == n {
        Ok(vals)
    } else {
        Err(Error::config(
            key,
            format!("expected 1 or {n} values, got {}", vals.len()),
        ))
    }
}

fn parse_usize_list(key: &str, value: &str, n: usize) -> Result<Vec<usize>> {
    parse_list(key, value, n)?
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && v >= 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::config(key, format!("not a non-negative integer: {v}")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_scenario() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_sus, 6);
        assert_eq!(cfg.n_bands, 10);
        assert_eq!(cfg.l, 3);
        assert_eq!(cfg.d, 2);
        assert_eq!(cfg.mu[..3], [10.0, 10.0, 10.0]);
        assert_eq!(cfg.mu[3..], [1.0; 7]);
        assert_eq!(cfg.alpha1, 0.01);
        assert_eq!(cfg.alpha2, 0.1);
        assert_eq!(cfg.num_samples, 50);
        assert_eq!(cfg.p_f_fc, 0.01);
    }

    #[test]
    fn parse_overrides_and_broadcast() {
        let cfg = ScenarioConfig::parse(
            "n_b = 5\nl = 1\nmu = 11,21,31,41,51\np00 = 0.5,0.9,0.6,0.8,0.8\np11 = 0.9,0.31,0.7,0.9,0.3\nepsilon = 0.2\nk_s = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.n_bands, 5);
        assert_eq!(cfg.mu, vec![11.0, 21.0, 31.0, 41.0, 51.0]);
        assert_eq!(cfg.k_s, vec![2; 6]);
        assert_eq!(cfg.p_miss_target, vec![0.1; 5]);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = ScenarioConfig::parse("# header\n\nepsilon = 0.3 # inline\n").unwrap();
        assert_eq!(cfg.epsilon, 0.3);
    }

    #[test]
    fn unknown_key_rejected_with_name() {
        let err = ScenarioConfig::parse("bogus = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn duplicate_key_rejected() {
        assert!(ScenarioConfig::parse("epsilon = 0.1\nepsilon = 0.2\n").is_err());
    }

    #[test]
    fn wrong_length_list_is_a_field_error() {
        let err = ScenarioConfig::parse("mu = 1,2,3\n").unwrap_err();
        assert!(err.to_string().contains("mu"), "{err}");
    }

    #[test]
    fn out_of_range_values_rejected() {
        assert!(ScenarioConfig::parse("epsilon = 1.5\n").is_err());
        assert!(ScenarioConfig::parse("alpha1 = 0\n").is_err());
        assert!(ScenarioConfig::parse("p_f_fc = 1\n").is_err());
        assert!(ScenarioConfig::parse("policy = ducb\n").is_err()); // needs l = 1
        assert!(ScenarioConfig::parse("policy = ducb\nl = 1\n").is_err()); // needs abstract
        assert!(
            ScenarioConfig::parse("policy = ducb\nl = 1\ndetection = abstract\n").is_ok()
        );
    }

    #[test]
    fn solver_list() {
        let cfg = ScenarioConfig::parse("solver = bb,ih\n").unwrap();
        assert_eq!(
            cfg.solvers,
            vec![SolverKind::BranchBound, SolverKind::IterativeHungarian]
        );
        assert!(ScenarioConfig::parse("solver = simplex\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ScenarioConfig::parse("epsilon = 0.3\nn_b = 5\nmu = 1,2,3,4,5\n").unwrap();
        let echoed = cfg.echo();
        let back = ScenarioConfig::parse(&echoed).unwrap();
        assert_eq!(back.epsilon, cfg.epsilon);
        assert_eq!(back.mu, cfg.mu);
        assert_eq!(back.n_bands, cfg.n_bands);
        assert_eq!(back.echo(), echoed);
    }
}
