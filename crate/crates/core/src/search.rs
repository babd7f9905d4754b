//! Top-k matching of generated points against the training set.
//!
//! `exact_topk` is a full scan and serves as the reference; `adc_topk`
//! estimates distances from PQ codes through a per-query lookup table.
//! Both report non-squared Euclidean distances, sorted ascending with ties
//! broken by ascending training index.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::squared_l2;
use crate::embedding::{validate_pair, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::numfmt::sig9;
use crate::pq::{Codebook, PqCodes};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub train_index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub neighbors: Vec<Neighbor>,
}

impl MatchResult {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.neighbors.iter().map(|n| n.train_index)
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.neighbors.iter().map(|n| n.distance)
    }
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Keep the `k` smallest `(squared distance, index)` pairs, sorted, and
/// convert to Euclidean distances.
fn select_topk(mut scored: Vec<(f64, usize)>, k: usize) -> MatchResult {
    let k = k.min(scored.len());
    if k == 0 {
        return MatchResult::default();
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_distance_then_index);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_distance_then_index);
    MatchResult {
        neighbors: scored
            .into_iter()
            .map(|(d2, i)| Neighbor {
                train_index: i,
                distance: d2.sqrt(),
            })
            .collect(),
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    Ok(())
}

pub fn exact_topk(training: &EmbeddingMatrix, query: &[f32], k: usize) -> Result<MatchResult> {
    check_k(k)?;
    if query.len() != training.dim() {
        return Err(Error::Dim {
            expected: training.dim(),
            found: query.len(),
        });
    }
    let scored = training
        .rows()
        .enumerate()
        .map(|(i, row)| (squared_l2(row, query), i))
        .collect();
    Ok(select_topk(scored, k))
}

/// Squared distances from each query subvector to every centroid,
/// `num_subspaces x codebook_size`.
#[derive(Debug, Clone)]
pub struct AdcTable {
    codebook_size: usize,
    table: Vec<f32>,
}

impl AdcTable {
    pub fn new(codebook: &Codebook, query: &[f32]) -> Result<Self> {
        if query.len() != codebook.dim() {
            return Err(Error::Dim {
                expected: codebook.dim(),
                found: query.len(),
            });
        }
        let sd = codebook.subspace_dim();
        let ks = codebook.codebook_size();
        let mut table = Vec::with_capacity(codebook.num_subspaces() * ks);
        for s in 0..codebook.num_subspaces() {
            let sub = &query[s * sd..(s + 1) * sd];
            for centroid in codebook.subspace(s).chunks_exact(sd) {
                table.push(squared_l2(sub, centroid) as f32);
            }
        }
        Ok(Self {
            codebook_size: ks,
            table,
        })
    }

    pub fn entry(&self, subspace: usize, code: usize) -> f32 {
        self.table[subspace * self.codebook_size + code]
    }

    /// Estimated squared distance for one code row.
    #[inline]
    pub fn estimate(&self, codes: &[u16]) -> f64 {
        codes
            .iter()
            .enumerate()
            .map(|(s, &c)| self.table[s * self.codebook_size + c as usize] as f64)
            .sum()
    }
}

pub fn adc_topk(
    codebook: &Codebook,
    codes: &PqCodes,
    query: &[f32],
    k: usize,
) -> Result<MatchResult> {
    check_k(k)?;
    if codes.num_subspaces() != codebook.num_subspaces() {
        return Err(Error::Dim {
            expected: codebook.num_subspaces(),
            found: codes.num_subspaces(),
        });
    }
    let lut = AdcTable::new(codebook, query)?;
    let scored = (0..codes.count())
        .map(|i| (lut.estimate(codes.row(i)), i))
        .collect();
    Ok(select_topk(scored, k))
}

/// How the training side is represented during matching.
#[derive(Debug, Clone, Copy)]
pub enum TrainingRepr<'a> {
    Exact(&'a EmbeddingMatrix),
    Pq {
        codebook: &'a Codebook,
        codes: &'a PqCodes,
    },
}

impl TrainingRepr<'_> {
    pub fn count(&self) -> usize {
        match self {
            TrainingRepr::Exact(m) => m.count(),
            TrainingRepr::Pq { codes, .. } => codes.count(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainingRepr::Exact(m) => m.dim(),
            TrainingRepr::Pq { codebook, .. } => codebook.dim(),
        }
    }

    pub fn topk(&self, query: &[f32], k: usize) -> Result<MatchResult> {
        match self {
            TrainingRepr::Exact(m) => exact_topk(m, query, k),
            TrainingRepr::Pq { codebook, codes } => adc_topk(codebook, codes, query, k),
        }
    }
}

/// The paired distance and index tables, `m x k` each, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchTables {
    m: usize,
    k: usize,
    distances: Vec<f64>,
    indices: Vec<usize>,
}

impl MatchTables {
    pub fn new(m: usize, k: usize, distances: Vec<f64>, indices: Vec<usize>) -> Result<Self> {
        if distances.len() != m * k || indices.len() != m * k {
            return Err(Error::InvalidInput(format!(
                "match tables must hold {m} x {k} entries"
            )));
        }
        Ok(Self {
            m,
            k,
            distances,
            indices,
        })
    }

    pub fn from_results(rows: Vec<MatchResult>) -> Result<Self> {
        let m = rows.len();
        let k = rows.first().map_or(0, |r| r.len());
        let mut distances = Vec::with_capacity(m * k);
        let mut indices = Vec::with_capacity(m * k);
        for (j, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidInput(format!(
                    "row {j} has {} matches, expected {k}",
                    row.len()
                )));
            }
            for n in row.neighbors {
                distances.push(n.distance);
                indices.push(n.train_index);
            }
        }
        Self::new(m, k, distances, indices)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn row_distances(&self, j: usize) -> &[f64] {
        &self.distances[j * self.k..(j + 1) * self.k]
    }

    pub fn row_indices(&self, j: usize) -> &[usize] {
        &self.indices[j * self.k..(j + 1) * self.k]
    }

    pub fn row(&self, j: usize) -> MatchResult {
        MatchResult {
            neighbors: self
                .row_indices(j)
                .iter()
                .zip(self.row_distances(j))
                .map(|(&train_index, &distance)| Neighbor {
                    train_index,
                    distance,
                })
                .collect(),
        }
    }

    /// Replace every distance by its nine-significant-digit printed value.
    pub fn rounded_to_print_precision(&self) -> Self {
        Self {
            distances: self
                .distances
                .iter()
                .map(|&d| crate::numfmt::round_sig9(d))
                .collect(),
            ..self.clone()
        }
    }

    /// One JSON object per generated point.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for j in 0..self.m {
            let _ = write!(out, "{{\"gen_index\":{j},\"matches\":[");
            for (t, (&i, &d)) in self
                .row_indices(j)
                .iter()
                .zip(self.row_distances(j))
                .enumerate()
            {
                if t > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{{\"train_index\":{i},\"distance\":{}}}", sig9(d));
            }
            out.push_str("]}\n");
        }
        out
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Line {
            gen_index: usize,
            matches: Vec<Neighbor>,
        }

        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            if parsed.gen_index != rows.len() {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!(
                        "gen_index {} out of sequence, expected {}",
                        parsed.gen_index,
                        rows.len()
                    ),
                });
            }
            if let Some(n) = parsed
                .matches
                .iter()
                .find(|n| !n.distance.is_finite() || n.distance < 0.0)
            {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("invalid distance {}", n.distance),
                });
            }
            rows.push(MatchResult {
                neighbors: parsed.matches,
            });
        }
        Self::from_results(rows)
    }
}

/// Match every generated point against the training set. Rows are computed
/// independently (in parallel on the current rayon pool) and stored in
/// generated-index order.
pub fn batch_match(
    training: TrainingRepr<'_>,
    generated: &EmbeddingMatrix,
    k: usize,
) -> Result<MatchTables> {
    check_k(k)?;
    if let TrainingRepr::Exact(t) = training {
        validate_pair(t, generated)?;
    } else {
        if training.dim() != generated.dim() {
            return Err(Error::PairDims {
                training: training.dim(),
                generated: generated.dim(),
            });
        }
        if training.count() == 0 {
            return Err(Error::EmptySet("training"));
        }
        if generated.is_empty() {
            return Err(Error::EmptySet("generated"));
        }
    }
    let rows: Vec<MatchResult> = generated
        .as_slice()
        .par_chunks(generated.dim())
        .map(|q| training.topk(q, k))
        .collect::<Result<_>>()?;
    MatchTables::from_results(rows)
}

/// Mean over rows of the fraction of exact indices recovered.
pub fn recall_at_k(approx: &MatchTables, exact: &MatchTables) -> Result<f64> {
    if approx.m() != exact.m() || approx.k() != exact.k() {
        return Err(Error::InvalidInput(format!(
            "table shapes differ: {}x{} vs {}x{}",
            approx.m(),
            approx.k(),
            exact.m(),
            exact.k()
        )));
    }
    if approx.m() == 0 || approx.k() == 0 {
        return Err(Error::InvalidInput("recall of empty tables".into()));
    }
    let k = approx.k();
    let total: f64 = (0..approx.m())
        .map(|j| {
            let truth = exact.row_indices(j);
            let hits = approx
                .row_indices(j)
                .iter()
                .filter(|i| truth.contains(i))
                .count();
            hits as f64 / k as f64
        })
        .sum();
    Ok(total / approx.m() as f64)
}

/// Recall of the first `k` columns of each table.
pub fn recall_at(approx: &MatchTables, exact: &MatchTables, k: usize) -> Result<f64> {
    recall_at_k(&approx.truncated(k)?, &exact.truncated(k)?)
}

impl MatchTables {
    /// Keep only the first `k` matches of every row.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k > self.k {
            return Err(Error::InvalidInput(format!(
                "cannot take {k} columns from tables with k={}",
                self.k
            )));
        }
        let mut distances = Vec::with_capacity(self.m * k);
        let mut indices = Vec::with_capacity(self.m * k);
        for j in 0..self.m {
            distances.extend_from_slice(&self.row_distances(j)[..k]);
            indices.extend_from_slice(&self.row_indices(j)[..k]);
        }
        Self::new(self.m, k, distances, indices)
    }
}
