//! Minimum-cost bipartite assignment (Hungarian method).
//!
//! O(n^2 m) shortest-augmenting-path formulation with dual potentials.
//! Rows are assigned injectively to columns; when there are more rows than
//! columns the problem is transposed internally and the surplus rows stay
//! unassigned.

/// Solve the min-cost assignment for a dense cost matrix.
///
/// Returns, per row, the column it is assigned to (`None` only possible
/// when rows exceed columns). All costs must be finite.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    debug_assert!(cost.iter().all(|row| row.len() == m), "irregular matrix");
    debug_assert!(
        cost.iter().flatten().all(|c| c.is_finite()),
        "non-finite cost"
    );
    if m == 0 {
        return vec![None; n];
    }

    if n > m {
        // Transpose, solve, invert the resulting column -> row map.
        let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        let col_to_row = hungarian(&t);
        let mut out = vec![None; n];
        for (j, row) in col_to_row.iter().enumerate() {
            if let Some(i) = row {
                out[*i] = Some(j);
            }
        }
        return out;
    }

    // 1-based arrays with column 0 as the sentinel of the augmenting path.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut matched_row = vec![0usize; m + 1]; // row matched to each column
    let mut way = vec![0usize; m + 1];
    let mut min_slack = vec![inf; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        min_slack.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut out = vec![None; n];
    for j in 1..=m {
        if matched_row[j] != 0 {
            out[matched_row[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Total cost of an assignment produced by [`hungarian`].
pub fn assignment_cost(cost: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| cost[i][j]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive minimum over all injective row->column maps.
    fn brute_force_cost(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        let m = cost[0].len();
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.len() {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost[row][j], best);
                    used[j] = false;
                }
            }
        }
        assert!(n <= m);
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; m], 0.0, &mut best);
        best
    }

    #[test]
    fn diagonal_wins_on_identity_favoring_matrix() {
        let cost = vec![
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        let a = hungarian(&cost);
        assert_eq!(a, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(assignment_cost(&cost, &a), 0.0);
    }

    #[test]
    fn two_by_two_cross_assignment() {
        // Both permutations: 1+4=5 versus 2+2=4; the cross wins.
        let cost = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let a = hungarian(&cost);
        assert_eq!(a, vec![Some(1), Some(0)]);
        assert_eq!(assignment_cost(&cost, &a), 4.0);
    }

    #[test]
    fn row_constant_shift_keeps_assignment() {
        let cost = vec![
            vec![3.0, 7.0, 2.0],
            vec![4.0, 1.0, 8.0],
            vec![6.0, 5.0, 9.0],
        ];
        let base = hungarian(&cost);
        let mut shifted = cost.clone();
        for c in shifted[1].iter_mut() {
            *c += 11.5;
        }
        let after = hungarian(&shifted);
        assert_eq!(base, after);
        let d = assignment_cost(&shifted, &after) - assignment_cost(&cost, &base);
        assert!((d - 11.5).abs() < 1e-9);
    }

    #[test]
    fn matches_permutation_brute_force_up_to_six() {
        // Deterministic pseudo-random costs, square sizes 1..=6.
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 10.0 - 5.0
        };
        for n in 1..=6usize {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> =
                    (0..n).map(|_| (0..n).map(|_| next()).collect()).collect();
                let a = hungarian(&cost);
                assert!(a.iter().all(|j| j.is_some()));
                let got = assignment_cost(&cost, &a);
                let want = brute_force_cost(&cost);
                assert!(
                    (got - want).abs() < 1e-9,
                    "n={n}: hungarian {got} vs brute force {want}"
                );
            }
        }
    }

    #[test]
    fn rectangular_wide_uses_cheapest_columns() {
        let cost = vec![vec![5.0, 1.0, 3.0, 0.5]];
        assert_eq!(hungarian(&cost), vec![Some(3)]);
    }

    #[test]
    fn rectangular_tall_leaves_worst_row_unassigned() {
        // Three rows, two columns: exactly one row stays unassigned.
        let cost = vec![vec![1.0, 10.0], vec![2.0, 1.0], vec![50.0, 60.0]];
        let a = hungarian(&cost);
        let assigned: Vec<_> = a.iter().flatten().collect();
        assert_eq!(assigned.len(), 2);
        assert_eq!(a[2], None, "expensive row should lose out");
        assert_eq!(a[0], Some(0));
        assert_eq!(a[1], Some(1));
    }
}
