//! Exact Wasserstein distance between equal-size point sets, via
//! minimum-cost perfect assignment.

use serde::Serialize;

use crate::distance::{l2, squared_l2};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const MAX_TRANSPORT_POINTS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportResult {
    pub cost: f64,
    pub p: u32,
    /// `assignment[i]` is the target row matched to source row `i`.
    pub assignment: Vec<usize>,
}

/// Minimum-cost assignment on an `n x n` row-major cost matrix
/// (Hungarian method with row/column potentials, O(n^3)).
///
/// Returns `assignment[row] = col`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    // 1-based internally; column 0 is the virtual start.
    let mut u = vec![0f64; n + 1];
    let mut v = vec![0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
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

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    assignment
}

fn ground_cost(a: &[f32], b: &[f32], p: u32) -> f64 {
    match p {
        1 => l2(a, b),
        _ => squared_l2(a, b),
    }
}

/// `(mean_i C[i, sigma(i)])^(1/p)` for a given assignment.
pub fn assignment_cost(
    source: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
    assignment: &[usize],
    p: u32,
) -> f64 {
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| ground_cost(source.row(i), target.row(j), p))
        .sum();
    let mean = total / assignment.len() as f64;
    match p {
        1 => mean,
        _ => mean.sqrt(),
    }
}

/// W_p between the uniform empirical measures on two equal-size sets.
pub fn exact_wasserstein(
    source: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
    p: u32,
) -> Result<TransportResult> {
    if p != 1 && p != 2 {
        return Err(Error::Config(format!("p must be 1 or 2, got {p}")));
    }
    if source.dim() != target.dim() {
        return Err(Error::Dim {
            expected: source.dim(),
            found: target.dim(),
        });
    }
    if source.count() != target.count() {
        return Err(Error::InvalidInput(format!(
            "unequal point counts {} and {}: only equal-size sets are supported",
            source.count(),
            target.count()
        )));
    }
    let n = source.count();
    if n == 0 {
        return Err(Error::EmptySet("source"));
    }
    if n > MAX_TRANSPORT_POINTS {
        return Err(Error::Config(format!(
            "{n} points exceeds the exact-transport limit of {MAX_TRANSPORT_POINTS}"
        )));
    }
    let mut cost = Vec::with_capacity(n * n);
    for a in source.rows() {
        for b in target.rows() {
            cost.push(ground_cost(a, b, p));
        }
    }
    let assignment = hungarian(&cost, n);
    Ok(TransportResult {
        cost: assignment_cost(source, target, &assignment, p),
        p,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[f32]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    fn random_matrix(n: usize, d: usize, rng: &mut ChaCha8Rng) -> EmbeddingMatrix {
        let data = (0..n * d).map(|_| rng.random_range(-2.0f32..2.0)).collect();
        EmbeddingMatrix::new(n, d, data).unwrap()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn identity_has_zero_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_matrix(6, 3, &mut rng);
        for p in [1, 2] {
            let r = exact_wasserstein(&a, &a, p).unwrap();
            assert_eq!(r.cost, 0.0);
            assert_eq!(r.assignment, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn one_dimensional_shift() {
        let a = matrix(&[&[0.0], &[1.0]]);
        let b = matrix(&[&[1.0], &[2.0]]);
        let r = exact_wasserstein(&a, &b, 1).unwrap();
        assert_eq!(r.cost, 1.0);
    }

    #[test]
    fn hungarian_textbook_matrix() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = hungarian(&cost, 3);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn matches_factorial_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let a = random_matrix(n, 2, &mut rng);
            let b = random_matrix(n, 2, &mut rng);
            for p in [1, 2] {
                let r = exact_wasserstein(&a, &b, p).unwrap();
                let best = permutations(n)
                    .iter()
                    .map(|perm| assignment_cost(&a, &b, perm, p))
                    .fold(f64::INFINITY, f64::min);
                assert!((r.cost - best).abs() <= 1e-12 * best.max(1.0));
                let mut seen = r.assignment.clone();
                seen.sort_unstable();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn errors() {
        let a = matrix(&[&[0.0], &[1.0]]);
        let b = matrix(&[&[1.0]]);
        assert!(exact_wasserstein(&a, &b, 1).is_err());
        assert!(exact_wasserstein(&a, &a, 3).is_err());
        let big = EmbeddingMatrix::new(257, 1, vec![0.0; 257]).unwrap();
        assert!(matches!(exact_wasserstein(&big, &big, 1), Err(Error::Config(_))));
    }
}
