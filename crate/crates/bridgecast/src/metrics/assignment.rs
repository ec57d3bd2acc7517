//! Exact minimum-cost perfect matching on square cost matrices via the
//! shortest-augmenting-path method with dual potentials (the dense
//! Jonker-Volgenant / Hungarian scheme), O(n^3).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Solves the linear assignment problem for a square `[n x n]` cost
/// matrix. Returns the column assigned to each row and the total cost.
pub fn solve_lap(cost: &Tensor) -> Result<(Vec<usize>, f64)> {
    let (n, m) = cost.dims2()?;
    if n != m {
        return Err(Error::ShapeMismatch {
            op: "assignment",
            lhs: vec![n, m],
            rhs: vec![n, n],
        });
    }
    if n == 0 {
        return Err(Error::contract("assignment needs at least one row"));
    }
    if !cost.all_finite() {
        return Err(Error::contract("assignment cost matrix has non-finite entries"));
    }
    let c = cost.data();

    // 1-based arrays; p[j] is the row matched to column j (0 = free).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let row = &c[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path back to the start.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost.at2(i, assign[i])).sum();
    Ok((assign, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute_force(cost: &Tensor) -> f64 {
        let (n, _) = cost.dims2().unwrap();
        let mut cols: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut cols, 0, &mut |perm| {
            let total: f64 = (0..n).map(|i| cost.at2(i, perm[i])).sum();
            if total < best {
                best = total;
            }
        });
        best
    }

    fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    #[test]
    fn identity_matrix_prefers_the_diagonal_zeros() {
        // Cost 1 - I: optimum picks the off-diagonal zeros... inverted:
        // diag(0) with 1 elsewhere gives total 0 on the diagonal.
        let n = 4;
        let mut c = Tensor::filled(&[n, n], 1.0);
        for i in 0..n {
            *c.at2_mut(i, i) = 0.0;
        }
        let (assign, total) = solve_lap(&c).unwrap();
        assert_eq!(assign, vec![0, 1, 2, 3]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = crate::rng::stream_rng(40, 0);
        for n in 2..=7 {
            for _ in 0..30 {
                let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let c = Tensor::from_vec(&[n, n], data).unwrap();
                let (assign, total) = solve_lap(&c).unwrap();
                // Assignment is a permutation.
                let mut seen = vec![false; n];
                for &j in &assign {
                    assert!(!seen[j]);
                    seen[j] = true;
                }
                let best = brute_force(&c);
                assert!(
                    (total - best).abs() < 1e-9,
                    "n={n}: solver {total} vs brute force {best}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_lap(&Tensor::zeros(&[2, 3])).is_err());
        let mut c = Tensor::zeros(&[2, 2]);
        *c.at2_mut(0, 0) = f64::NAN;
        assert!(solve_lap(&c).is_err());
    }
}
