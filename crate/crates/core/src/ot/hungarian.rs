//! Minimum-cost perfect matching on a square cost matrix via the O(n³)
//! potentials method. One of the two exact solvers backing the transport
//! oracle; the transportation simplex cross-checks it.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Returns `(assignment, total)` where `assignment[row] = col` minimizes the
/// summed cost.
pub fn solve(cost: &Matrix) -> Result<(Vec<usize>, f64)> {
    let n = cost.rows();
    if n == 0 || cost.cols() != n {
        return Err(Error::DimMismatch(format!(
            "assignment needs a non-empty square matrix, got {}x{}",
            cost.rows(),
            cost.cols()
        )));
    }

    // 1-indexed potentials with column 0 as scratch, the classical layout.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // row currently matched to column j
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path.
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost.get(i, assignment[i])).sum();
    Ok((assignment, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    /// Exhaustive minimum over all permutations; the independent oracle.
    pub(crate) fn brute_force(cost: &Matrix) -> f64 {
        fn rec(cost: &Matrix, row: usize, taken: &mut [bool], acc: f64, best: &mut f64) {
            if row == cost.rows() {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            for j in 0..cost.cols() {
                if !taken[j] {
                    taken[j] = true;
                    rec(cost, row + 1, taken, acc + cost.get(row, j), best);
                    taken[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.cols()], 0.0, &mut best);
        best
    }

    #[test]
    fn known_three_by_three() {
        let cost = m(&[
            vec![8.0, 5.0, 9.0],
            vec![4.0, 2.0, 4.0],
            vec![7.0, 3.0, 8.0],
        ]);
        let (_, total) = solve(&cost).unwrap();
        assert_eq!(total, 15.0); // 8 + 4 + 3
    }

    #[test]
    fn identity_optimal_on_zero_diagonal() {
        let cost = m(&[vec![0.0, 5.0], vec![5.0, 0.0]]);
        let (assign, total) = solve(&cost).unwrap();
        assert_eq!(assign, vec![0, 1]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(1..=6usize);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect())
                .collect();
            let cost = m(&rows);
            let (_, total) = solve(&cost).unwrap();
            let best = brute_force(&cost);
            assert!(
                (total - best).abs() < 1e-9,
                "solver {total} vs brute force {best}"
            );
        }
    }

    #[test]
    fn rejects_rectangular() {
        let cost = m(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert!(solve(&cost).is_err());
    }
}
