//! Pseudorandom frequency-hopping codes for the exploration phase.
//!
//! Sequences are cyclic shifts of the full band sequence,
//! `S_q(i) = (i + shift_q) mod n_bands`, so distinct shifts make the
//! sequences orthogonal: at every index the groups sense distinct bands.
//! SU group memberships rotate each code period so that over time every
//! D-subset of SUs co-senses every subband.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HoppingCodebook {
    n_bands: usize,
    n_sus: usize,
    diversity: usize,
    shifts: Vec<usize>,
    /// Group memberships per period: `schedule[p][q]` is the SU set driven
    /// by sequence `q` during period `p` (mod schedule length).
    schedule: Vec<Vec<Vec<usize>>>,
}

impl HoppingCodebook {
    pub fn new(n_bands: usize, n_sus: usize, diversity: usize, shifts: &[usize]) -> Result<Self> {
        if n_bands == 0 {
            return Err(Error::invalid("n_bands", "must be >= 1"));
        }
        if diversity == 0 || diversity > n_sus {
            return Err(Error::invalid("diversity", "must be in 1..=n_sus"));
        }
        let n_groups = n_sus / diversity;
        if n_groups == 0 {
            return Err(Error::invalid("n_sus", "fewer SUs than one group"));
        }
        if shifts.len() != n_groups {
            return Err(Error::invalid(
                "shifts",
                format!("need {} shifts, got {}", n_groups, shifts.len()),
            ));
        }
        let mut seen = vec![false; n_bands];
        for &s in shifts {
            let r = s % n_bands;
            if seen[r] {
                return Err(Error::invalid("shifts", "duplicate shift mod n_bands"));
            }
            seen[r] = true;
        }
        let schedule = build_rotation_schedule(n_sus, diversity, n_groups);
        Ok(Self {
            n_bands,
            n_sus,
            diversity,
            shifts: shifts.to_vec(),
            schedule,
        })
    }

    /// Default shifts 0..n_groups.
    pub fn with_default_shifts(n_bands: usize, n_sus: usize, diversity: usize) -> Result<Self> {
        let n_groups = if diversity == 0 { 0 } else { n_sus / diversity };
        if n_groups > n_bands {
            return Err(Error::invalid(
                "diversity",
                "more hopping sequences than bands",
            ));
        }
        let shifts: Vec<usize> = (0..n_groups).collect();
        Self::new(n_bands, n_sus, diversity, &shifts)
    }

    pub fn n_groups(&self) -> usize {
        self.shifts.len()
    }

    /// Length of one code period in sensing slots.
    pub fn period(&self) -> usize {
        self.n_bands
    }

    /// Number of periods before group memberships repeat.
    pub fn rotation_len(&self) -> usize {
        self.schedule.len()
    }

    pub fn diversity(&self) -> usize {
        self.diversity
    }

    pub fn n_sus(&self) -> usize {
        self.n_sus
    }

    /// Band pointed to by sequence `q` at in-period index `i`.
    pub fn sequence_band(&self, q: usize, i: usize) -> usize {
        (i + self.shifts[q]) % self.n_bands
    }

    /// Group memberships active during the given period.
    pub fn groups(&self, period_index: usize) -> &[Vec<usize>] {
        &self.schedule[period_index % self.schedule.len()]
    }
}

/// Deterministic rotation schedule covering every `d`-subset of SUs.
///
/// Each period seeds with the lexicographically first still-unused combo,
/// then fills the remaining group slots with disjoint combos (unused ones
/// preferred, then any, then a plain partition of untouched SUs), so the
/// schedule terminates once every combo has appeared.
fn build_rotation_schedule(n_sus: usize, d: usize, n_groups: usize) -> Vec<Vec<Vec<usize>>> {
    let combos = combinations(n_sus, d);
    let mut used = vec![false; combos.len()];
    let mut schedule = Vec::new();

    while used.iter().any(|&u| !u) {
        let mut groups: Vec<Vec<usize>> = Vec::with_capacity(n_groups);
        let mut taken = vec![false; n_sus];
        let disjoint = |combo: &[usize], taken: &[bool]| combo.iter().all(|&s| !taken[s]);

        // Seed with the first unused combo.
        let seed = used.iter().position(|&u| !u).unwrap();
        for &s in &combos[seed] {
            taken[s] = true;
        }
        used[seed] = true;
        groups.push(combos[seed].clone());

        while groups.len() < n_groups {
            // Prefer an unused disjoint combo, then any disjoint combo.
            let pick = combos
                .iter()
                .enumerate()
                .position(|(i, c)| !used[i] && disjoint(c, &taken))
                .or_else(|| combos.iter().position(|c| disjoint(c, &taken)));
            match pick {
                Some(i) => {
                    for &s in &combos[i] {
                        taken[s] = true;
                    }
                    used[i] = true;
                    groups.push(combos[i].clone());
                }
                None => {
                    // Partition whatever SUs remain untouched.
                    let free: Vec<usize> =
                        (0..n_sus).filter(|&s| !taken[s]).take(d).collect();
                    debug_assert_eq!(free.len(), d);
                    for &s in &free {
                        taken[s] = true;
                    }
                    groups.push(free);
                }
            }
        }
        schedule.push(groups);
    }
    schedule
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_shift_is_plain_cycle() {
        let cb = HoppingCodebook::new(3, 2, 2, &[0]).unwrap();
        let seq: Vec<usize> = (0..3).map(|i| cb.sequence_band(0, i)).collect();
        assert_eq!(seq, vec![0, 1, 2]);
    }

    #[test]
    fn orthogonal_sequences_four_sus_three_bands() {
        // Two groups of two SUs over three bands; at every index the two
        // groups sense different bands.
        let cb = HoppingCodebook::new(3, 4, 2, &[0, 1]).unwrap();
        assert_eq!(cb.n_groups(), 2);
        for i in 0..3 {
            assert_ne!(cb.sequence_band(0, i), cb.sequence_band(1, i));
        }
        // Each sequence visits every band exactly once per period.
        for q in 0..2 {
            let mut seen = [false; 3];
            for i in 0..3 {
                seen[cb.sequence_band(q, i)] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn rejects_duplicate_shifts() {
        assert!(HoppingCodebook::new(3, 4, 2, &[1, 4]).is_err()); // 4 mod 3 == 1
        assert!(HoppingCodebook::new(3, 4, 2, &[0, 1]).is_ok());
    }

    #[test]
    fn rotation_covers_every_pair_of_four() {
        let cb = HoppingCodebook::new(3, 4, 2, &[0, 1]).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in 0..cb.rotation_len() {
            for g in cb.groups(p) {
                let mut key = g.clone();
                key.sort_unstable();
                seen.insert(key);
            }
        }
        assert_eq!(seen.len(), 6, "all C(4,2) pairs must appear");
        // Within one rotation every group senses every band (full
        // sequences), so every pair senses band 0 within
        // rotation_len periods, well inside the C(4,2) * rotation budget.
        assert!(cb.rotation_len() <= 6);
    }

    #[test]
    fn rotation_covers_every_pair_of_six() {
        let cb = HoppingCodebook::with_default_shifts(10, 6, 2).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in 0..cb.rotation_len() {
            let groups = cb.groups(p);
            assert_eq!(groups.len(), 3);
            // Groups within a period are disjoint.
            let mut all: Vec<usize> = groups.iter().flatten().copied().collect();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), 6);
            for g in groups {
                let mut key = g.clone();
                key.sort_unstable();
                seen.insert(key);
            }
        }
        assert_eq!(seen.len(), 15, "all C(6,2) pairs must appear");
    }

    #[test]
    fn leftover_sus_idle_when_diversity_does_not_divide() {
        let cb = HoppingCodebook::with_default_shifts(5, 5, 2).unwrap();
        assert_eq!(cb.n_groups(), 2);
        for p in 0..cb.rotation_len() {
            let active: usize = cb.groups(p).iter().map(|g| g.len()).sum();
            assert_eq!(active, 4, "one SU idles each period");
        }
    }
}
