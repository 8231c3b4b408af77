//! Minimal-cost assignment for eigenvalue multiset comparison.
//!
//! Comparing two eigenvalue lists is an assignment problem: pair each value of
//! one list with a distinct value of the other so the total pairing cost is
//! minimal, then look at the worst matched pair. The solver below is the
//! standard O(n³) shortest-augmenting-path method with dual potentials,
//! working directly on f64 costs (the lists here never exceed a dozen
//! entries, but exactness of the optimum matters down to round-off scale).

use ndarray::Array2;

use super::C64;
use crate::error::{Error, Result};

const UNMATCHED: usize = usize::MAX;

/// Minimal-total-cost perfect assignment on a square cost matrix.
/// Returns the row-to-column map and the total cost.
pub fn min_cost_assignment(cost: &Array2<f64>) -> Result<(Vec<usize>, f64)> {
    let (n, m) = cost.dim();
    if n != m || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "assignment needs a nonempty square cost matrix, got {n}x{m}"
        )));
    }
    if cost.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }

    let mut u = vec![0.0_f64; n]; // row potentials
    let mut v = vec![0.0_f64; n + 1]; // column potentials, last is the virtual column
    let mut matched_row = vec![UNMATCHED; n + 1]; // column -> row
    let mut way = vec![0_usize; n + 1];

    for row in 0..n {
        matched_row[n] = row;
        let mut j0 = n;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j_next = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let slack = cost[(i0, j)] - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j_next = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j_next;
            if matched_row[j0] == UNMATCHED {
                break;
            }
        }
        // Augment along the recorded alternating path.
        while j0 != n {
            let j_prev = way[j0];
            matched_row[j0] = matched_row[j_prev];
            j0 = j_prev;
        }
    }

    let mut row_to_col = vec![UNMATCHED; n];
    let mut total = 0.0;
    for col in 0..n {
        let row = matched_row[col];
        row_to_col[row] = col;
        total += cost[(row, col)];
    }
    Ok((row_to_col, total))
}

/// Worst matched distance between two complex multisets under the
/// minimal-total-cost assignment. This is the "assignment error" used to
/// decide whether two eigenvalue lists agree.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "multisets of sizes {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let cost = Array2::from_shape_fn((n, n), |(i, j)| (a[i] - b[j]).norm());
    let (row_to_col, _) = min_cost_assignment(&cost)?;
    Ok(row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .fold(0.0, f64::max))
}
