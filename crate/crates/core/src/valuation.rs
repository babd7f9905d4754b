//! Turning match tables into per-training-point values.
//!
//! Each generated point hands out one unit of credit across its top-k
//! training matches with a softmax over negative distances, and a training
//! point's value is the sum of the credit it receives from every generated
//! point. Points that never appear in a match row get exactly zero.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::sig9;
use crate::search::MatchTables;

pub const DEFAULT_TEMPERATURE: f64 = 1.0;

fn check_temperature(temperature: f64) -> Result<()> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    Ok(())
}

/// `exp(-t * d_i) / sum_j exp(-t * d_j)`, evaluated after subtracting the
/// smallest distance so the largest weight is exactly 1.
pub fn discount_scores(distances: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    if distances.is_empty() {
        return Err(Error::InvalidInput("no distances to score".into()));
    }
    if let Some(d) = distances.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(Error::InvalidInput(format!(
            "distances must be finite and non-negative, got {d}"
        )));
    }
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = distances
        .iter()
        .map(|&d| (-temperature * (d - min)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub gen_index: usize,
    /// `(train_index, score)` in the row's ascending-distance order.
    pub entries: Vec<(usize, f64)>,
}

impl ScoreRow {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValuationResult {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub temperature: f64,
    pub values: Vec<f64>,
    /// Training indices by descending value, ascending index on ties.
    pub ranking: Vec<usize>,
}

impl ValuationResult {
    pub fn sum_values(&self) -> f64 {
        self.values.iter().sum()
    }

    /// 1-based rank of every training index.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.n];
        for (pos, &i) in self.ranking.iter().enumerate() {
            ranks[i] = pos + 1;
        }
        ranks
    }

    /// `train_index,value,rank` with a header row, rows in index order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("train_index,value,rank\n");
        for (i, (v, r)) in self.values.iter().zip(self.ranks()).enumerate() {
            let _ = writeln!(out, "{i},{},{r}", sig9(*v));
        }
        out
    }

    pub fn summary(&self, top: usize) -> ValueSummary {
        ValueSummary {
            n: self.n,
            m: self.m,
            k: self.k,
            temperature: self.temperature,
            sum_values: self.sum_values(),
            top_indices: self.ranking.iter().take(top).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSummary {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub temperature: f64,
    pub sum_values: f64,
    pub top_indices: Vec<usize>,
}

fn ranking_of(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Sum each training point's scores over all generated rows.
///
/// Rows are scored in parallel, then folded into 64-bit sums in ascending
/// generated index, so the result does not depend on the worker count.
pub fn aggregate_values(tables: &MatchTables, n: usize, temperature: f64) -> Result<ValuationResult> {
    check_temperature(temperature)?;
    if let Some((pos, &i)) = tables.indices().iter().enumerate().find(|(_, &i)| i >= n) {
        return Err(Error::Corruption(format!(
            "match row {} references training index {i}, but n = {n}",
            pos / tables.k().max(1)
        )));
    }
    let scored: Vec<Vec<f64>> = (0..tables.m())
        .into_par_iter()
        .map(|j| discount_scores(tables.row_distances(j), temperature))
        .collect::<Result<_>>()?;

    let mut values = vec![0f64; n];
    for (j, scores) in scored.iter().enumerate() {
        for (&i, &s) in tables.row_indices(j).iter().zip(scores) {
            values[i] += s;
        }
    }
    let ranking = ranking_of(&values);
    Ok(ValuationResult {
        n,
        m: tables.m(),
        k: tables.k(),
        temperature,
        values,
        ranking,
    })
}

/// `(train_index, value)` by descending value, optionally truncated.
pub fn rank_training_points(result: &ValuationResult, top: Option<usize>) -> Vec<(usize, f64)> {
    let ranking = if result.ranking.len() == result.values.len() {
        result.ranking.clone()
    } else {
        ranking_of(&result.values)
    };
    ranking
        .into_iter()
        .take(top.unwrap_or(usize::MAX))
        .map(|i| (i, result.values[i]))
        .collect()
}

/// Per-match scores for one generated point.
pub fn top_contributors(tables: &MatchTables, gen_index: usize, temperature: f64) -> Result<ScoreRow> {
    if gen_index >= tables.m() {
        return Err(Error::InvalidInput(format!(
            "gen_index {gen_index} out of range for {} generated points",
            tables.m()
        )));
    }
    let scores = discount_scores(tables.row_distances(gen_index), temperature)?;
    Ok(ScoreRow {
        gen_index,
        entries: tables
            .row_indices(gen_index)
            .iter()
            .copied()
            .zip(scores)
            .collect(),
    })
}

/// Parse a `train_index,value[,rank]` CSV (header optional) into values
/// indexed by training index.
pub fn parse_value_csv(text: &str) -> Result<Vec<f64>> {
    let mut values: Vec<Option<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line.starts_with("train_index")) {
            continue;
        }
        let mut fields = line.split(',');
        let bad = |reason: String| Error::Parse {
            line: line_no,
            reason,
        };
        let idx: usize = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| bad("expected integer train_index".into()))?;
        let value: f64 = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| bad("expected numeric value".into()))?;
        if !value.is_finite() {
            return Err(bad(format!("non-finite value {value}")));
        }
        if idx >= values.len() {
            values.resize(idx + 1, None);
        }
        if values[idx].replace(value).is_some() {
            return Err(bad(format!("train_index {idx} repeated")));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| Error::InvalidInput(format!("train_index {i} missing from values")))
        })
        .collect()
}

pub fn load_value_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_value_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tables(rows: &[(&[f64], &[usize])]) -> MatchTables {
        let k = rows[0].0.len();
        let d = rows.iter().flat_map(|r| r.0.iter().copied()).collect();
        let i = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
        MatchTables::new(rows.len(), k, d, i).unwrap()
    }

    // High-precision reference values, computed to 40 digits:
    //   1 / (1 + e^-1) = 0.7310585786300048792...
    //   1 / (1 + e^-5) = 0.9933071490757151444...
    const SIGMOID_1: f64 = 0.731_058_578_630_004_9;
    const SIGMOID_5: f64 = 0.993_307_149_075_715;

    #[test]
    fn singleton_is_one() {
        assert_eq!(discount_scores(&[3.7], 1.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn equal_distances_split_evenly() {
        for c in [0.0, 1.0, 123.4] {
            let s = discount_scores(&[c, c, c], 1.0).unwrap();
            for v in s {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn one_two_against_oracle() {
        let s = discount_scores(&[1.0, 2.0], 1.0).unwrap();
        assert!((s[0] - SIGMOID_1).abs() < 1e-6);
        assert!((s[1] - (1.0 - SIGMOID_1)).abs() < 1e-6);
        assert!((s[0] - 0.731059).abs() < 1e-6);
        assert!((s[1] - 0.268941).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(discount_scores(&[], 1.0).is_err());
        assert!(discount_scores(&[-0.1], 1.0).is_err());
        assert!(discount_scores(&[f64::NAN], 1.0).is_err());
        assert!(discount_scores(&[1.0], 0.0).is_err());
    }

    #[test]
    fn huge_distances_do_not_underflow_to_nan() {
        let s = discount_scores(&[1e6, 1e6 + 1.0], 1.0).unwrap();
        assert!((s[0] - SIGMOID_1).abs() < 1e-9);
    }

    #[test]
    fn hand_instance_n4_m2() {
        let t = tables(&[(&[1.0, 2.0], &[0, 1]), (&[1.0, 1.0], &[2, 3])]);
        let v = aggregate_values(&t, 4, 1.0).unwrap();
        let expect = [0.731059, 0.268941, 0.5, 0.5];
        for (a, b) in v.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((v.sum_values() - 2.0).abs() < 1e-12);
        assert_eq!(v.ranking, vec![0, 2, 3, 1]);
    }

    #[test]
    fn single_row_values_equal_softmax() {
        let t = tables(&[(&[0.5, 1.0, 4.0], &[2, 0, 1])]);
        let v = aggregate_values(&t, 3, 1.0).unwrap();
        let s = discount_scores(&[0.5, 1.0, 4.0], 1.0).unwrap();
        assert_eq!(v.values, vec![s[1], s[2], s[0]]);
        assert!((v.sum_values() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unmatched_point_has_exact_zero() {
        let t = tables(&[(&[1.0], &[0]), (&[2.0], &[2])]);
        let v = aggregate_values(&t, 4, 1.0).unwrap();
        assert_eq!(v.values[1], 0.0);
        assert_eq!(v.values[3], 0.0);
    }

    #[test]
    fn index_out_of_range_is_corruption() {
        let t = tables(&[(&[1.0], &[5])]);
        assert!(matches!(aggregate_values(&t, 3, 1.0), Err(Error::Corruption(_))));
    }

    #[test]
    fn ranking_ties_by_index() {
        let r = ValuationResult {
            n: 3,
            m: 1,
            k: 1,
            temperature: 1.0,
            values: vec![0.2, 0.9, 0.2],
            ranking: ranking_of(&[0.2, 0.9, 0.2]),
        };
        assert_eq!(rank_training_points(&r, None), vec![(1, 0.9), (0, 0.2), (2, 0.2)]);
        assert_eq!(rank_training_points(&r, Some(1)), vec![(1, 0.9)]);
        assert_eq!(ranking_of(&[0.5; 4]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn contributors_row() {
        let t = tables(&[(&[0.0, 5.0], &[3, 1]), (&[2.0, 2.0], &[0, 2])]);
        let row = top_contributors(&t, 0, 1.0).unwrap();
        assert_eq!(row.entries[0].0, 3);
        assert!((row.entries[0].1 - SIGMOID_5).abs() < 1e-6);
        assert!((row.entries[1].1 - 0.006693).abs() < 1e-6);
        assert!((row.total() - 1.0).abs() < 1e-9);
        assert!(top_contributors(&t, 2, 1.0).is_err());

        let single = tables(&[(&[4.2], &[0])]);
        assert_eq!(top_contributors(&single, 0, 1.0).unwrap().entries, vec![(0, 1.0)]);
    }

    #[test]
    fn csv_roundtrip() {
        let t = tables(&[(&[1.0, 2.0], &[0, 1]), (&[1.0, 1.0], &[2, 3])]);
        let v = aggregate_values(&t, 5, 1.0).unwrap();
        let csv = v.to_csv();
        assert!(csv.starts_with("train_index,value,rank\n0,0.731058579,1\n"));
        assert!(csv.ends_with("4,0,5\n"));
        let back = parse_value_csv(&csv).unwrap();
        assert_eq!(back.len(), 5);
        assert_eq!(back[2], 0.5);
        assert!(parse_value_csv("0,1\n0,2\n").is_err());
        assert!(parse_value_csv("1,1\n").is_err());
    }

    #[test]
    fn summary_json_fields() {
        let t = tables(&[(&[1.0, 2.0], &[0, 1])]);
        let v = aggregate_values(&t, 3, 1.0).unwrap();
        let json = serde_json::to_value(v.summary(2)).unwrap();
        assert_eq!(json["n"], 3);
        assert_eq!(json["m"], 1);
        assert_eq!(json["k"], 2);
        assert_eq!(json["top_indices"], serde_json::json!([0, 1]));
    }

    fn distances() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..50.0, 1..12)
    }

    proptest! {
        #[test]
        fn rows_normalize(d in distances(), t in 0.01f64..10.0) {
            let s = discount_scores(&d, t).unwrap();
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(s.iter().all(|&v| v > 0.0 && v <= 1.0));
        }

        #[test]
        fn shift_invariance(d in distances(), c in -10.0f64..100.0) {
            let min = d.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assume!(min + c >= 0.0);
            let shifted: Vec<f64> = d.iter().map(|v| v + c).collect();
            let a = discount_scores(&d, 1.0).unwrap();
            let b = discount_scores(&shifted, 1.0).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn rank_consistency(mut d in distances()) {
            d.sort_by(f64::total_cmp);
            let s = discount_scores(&d, 1.0).unwrap();
            for i in 0..d.len() {
                for j in 0..d.len() {
                    // Gaps below f64 resolution of exp() cannot be told apart.
                    if d[j] - d[i] > 1e-9 {
                        prop_assert!(s[i] > s[j]);
                    }
                    prop_assert_eq!(d[i] <= d[j], s[i] >= s[j]);
                    if d[i] == d[j] {
                        prop_assert!((s[i] - s[j]).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn temperature_sharpens_top_score(d in distances(), t in 0.05f64..3.0, bump in 0.05f64..3.0) {
            let min = d.iter().copied().fold(f64::INFINITY, f64::min);
            let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(max - min > 1e-3);
            let lo = discount_scores(&d, t).unwrap();
            let hi = discount_scores(&d, t + bump).unwrap();
            let top = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
            // Saturated rows are already one-hot in f64.
            prop_assume!(top(&lo) < 1.0 - 1e-12);
            prop_assert!(top(&hi) > top(&lo));
        }
    }
}
