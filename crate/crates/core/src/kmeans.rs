//! Lloyd's k-means with k-means++ seeding, used per PQ subspace.

use rand::Rng;

use crate::distance::squared_l2;
use crate::error::{Error, Result};

/// Relative slack allowed on the objective between iterations. Centroids are
/// stored as f32, so the f64 mean is rounded before the next assignment.
const OBJECTIVE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    /// `k x dim` row-major.
    pub centroids: Vec<f32>,
    /// Total within-cluster squared error after each assignment step.
    pub objectives: Vec<f64>,
    pub assignments: Vec<u32>,
}

/// Cluster `points` (`n x dim`, row-major) into `k` groups.
///
/// Runs at most `iters` assignment/update rounds and stops early once an
/// assignment step changes nothing. Empty clusters are moved onto the point
/// farthest from its current centroid, lowest row index on ties.
pub fn kmeans<R: Rng>(
    points: &[f32],
    dim: usize,
    k: usize,
    iters: usize,
    rng: &mut R,
) -> Result<KMeansOutcome> {
    let n = points.len() / dim;
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "codebook size {k} must be in 1..={n} (number of training vectors)"
        )));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut centroids = kmeans_plus_plus(points, dim, k, rng);
    let mut assignments = vec![u32::MAX; n];
    let mut objectives: Vec<f64> = Vec::with_capacity(iters);

    for iter in 0..iters {
        let mut changed = false;
        let mut objective = 0f64;
        for (i, a) in assignments.iter_mut().enumerate() {
            let (best, d) = nearest(row(i), &centroids, dim);
            if *a != best as u32 {
                *a = best as u32;
                changed = true;
            }
            objective += d;
        }
        if let Some(&prev) = objectives.last() {
            if objective > prev + OBJECTIVE_SLACK * prev.max(1.0) {
                return Err(Error::Invariant(format!(
                    "k-means objective increased from {prev} to {objective} at iteration {iter}"
                )));
            }
        }
        objectives.push(objective);
        if iter > 0 && !changed {
            break;
        }

        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            let c = a as usize;
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += v as f64;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = counts[c] as f64;
                for (dst, &s) in centroids[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(&sums[c * dim..(c + 1) * dim])
                {
                    *dst = (s / inv) as f32;
                }
            }
        }

        // Distances to the updated centroids drive the reseed choice.
        let mut taken = vec![false; n];
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let mut far = None;
            let mut far_d = -1f64;
            for i in 0..n {
                if taken[i] {
                    continue;
                }
                let a = assignments[i] as usize;
                let d = squared_l2(row(i), &centroids[a * dim..(a + 1) * dim]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
            if let Some(i) = far {
                taken[i] = true;
                centroids[c * dim..(c + 1) * dim].copy_from_slice(row(i));
            }
        }
    }

    Ok(KMeansOutcome {
        centroids,
        objectives,
        assignments,
    })
}

fn kmeans_plus_plus<R: Rng>(points: &[f32], dim: usize, k: usize, rng: &mut R) -> Vec<f32> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);

    let first = rng.random_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| squared_l2(row(i), row(first))).collect();

    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            let mut last_positive = 0;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                last_positive = i;
                acc += d;
                if acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or(last_positive)
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            let nd = squared_l2(row(i), &c);
            if nd < *d {
                *d = nd;
            }
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

/// Index of the nearest centroid (lowest index on ties) and its squared distance.
#[inline]
pub(crate) fn nearest(v: &[f32], centroids: &[f32], dim: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_l2(v, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn objective(points: &[f32], centroids: &[f32]) -> f64 {
        points
            .iter()
            .map(|&p| {
                centroids
                    .iter()
                    .map(|&c| (p as f64 - c as f64).powi(2))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    #[test]
    fn two_cluster_line_reaches_enumerated_optimum() {
        let pts = [0.0f32, 1.0, 10.0, 11.0];
        // Oracle: every split of a sorted 1-D set into two contiguous groups.
        let mut best = f64::INFINITY;
        for cut in 1..pts.len() {
            let (l, r) = pts.split_at(cut);
            let ml = l.iter().map(|&v| v as f64).sum::<f64>() / l.len() as f64;
            let mr = r.iter().map(|&v| v as f64).sum::<f64>() / r.len() as f64;
            let sse: f64 = l.iter().map(|&v| (v as f64 - ml).powi(2)).sum::<f64>()
                + r.iter().map(|&v| (v as f64 - mr).powi(2)).sum::<f64>();
            best = best.min(sse);
        }
        assert_eq!(best, 1.0);

        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = kmeans(&pts, 1, 2, 25, &mut rng).unwrap();
            let mut c = out.centroids.clone();
            c.sort_by(f32::total_cmp);
            assert_eq!(c, vec![0.5, 10.5], "seed {seed}");
            assert_eq!(objective(&pts, &out.centroids), best);
        }
    }

    #[test]
    fn k_equals_n_recovers_points() {
        let pts = [3.0f32, -1.0, 7.5, 2.0, 0.25];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = kmeans(&pts, 1, 5, 10, &mut rng).unwrap();
        let mut c = out.centroids.clone();
        c.sort_by(f32::total_cmp);
        let mut p = pts.to_vec();
        p.sort_by(f32::total_cmp);
        assert_eq!(c, p);
        assert_eq!(*out.objectives.last().unwrap(), 0.0);
    }

    #[test]
    fn identical_points_single_centroid() {
        let pts = [2.0f32, 4.0, 2.0, 4.0, 2.0, 4.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = kmeans(&pts, 2, 1, 5, &mut rng).unwrap();
        assert_eq!(out.centroids, vec![2.0, 4.0]);
    }

    #[test]
    fn duplicates_with_more_clusters_than_distinct_values() {
        // Three distinct values, five clusters: empty-cluster repair must not panic
        // and every centroid stays finite.
        let pts = [1.0f32, 1.0, 1.0, 5.0, 5.0, 9.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = kmeans(&pts, 1, 5, 10, &mut rng).unwrap();
        assert!(out.centroids.iter().all(|c| c.is_finite()));
        assert_eq!(*out.objectives.last().unwrap(), 0.0);
    }

    #[test]
    fn objective_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<f32> = (0..600).map(|_| rng.random::<f32>() * 10.0).collect();
        let out = kmeans(&pts, 3, 12, 30, &mut rng).unwrap();
        for w in out.objectives.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "{w:?}");
        }
    }

    #[test]
    fn rejects_k_larger_than_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            kmeans(&[1.0, 2.0], 1, 3, 5, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let (c, d) = nearest(&[5.0], &[0.0, 10.0, 5.0, 5.0], 1);
        assert_eq!((c, d), (2, 0.0));
        let (c, _) = nearest(&[5.0], &[0.0, 10.0], 1);
        assert_eq!(c, 0);
    }
}
