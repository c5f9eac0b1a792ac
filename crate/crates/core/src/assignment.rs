//! Minimum-cost perfect assignment on a square cost matrix.

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Optimal assignment: row `i` is matched to column `perm[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    pub perm: Vec<usize>,
    pub cost: T,
}

/// Shortest augmenting path with dual potentials (Hungarian method),
/// `O(n^3)`.
pub fn solve_assignment<T: Scalar>(cost: &Matrix<T>) -> Result<Assignment<T>> {
    let n = cost.rows();
    if n == 0 || !cost.is_square() {
        return Err(invalid("assignment needs a non-empty square cost matrix"));
    }
    if !cost.all_finite() {
        return Err(invalid("assignment costs must be finite"));
    }
    // 1-based arrays: row 0 / column 0 are the virtual source
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![T::infinity(); n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = T::infinity();
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] = u[col_owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[col_owner[j] - 1] = j - 1;
    }
    let total = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .sum();
    Ok(Assignment { perm, cost: total })
}
