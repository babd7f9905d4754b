//! Synthetic experiments standing in for a trained generative model.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(spec.seed)` and split by stream number:
//!
//! | stream | use                              |
//! |--------|----------------------------------|
//! | 0      | mixture component means          |
//! | 1      | `X_v1` draws                     |
//! | 2      | `X_v2` draws                     |
//! | 3      | simulated generator              |
//!
//! `sample_mixture` takes the stream explicitly so callers can draw further
//! independent samples.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{save_embeddings, EmbeddingMatrix, Format};
use crate::error::{Error, Result};

pub const MEANS_STREAM: u64 = 0;
pub const V1_STREAM: u64 = 1;
pub const V2_STREAM: u64 = 2;
pub const GENERATOR_STREAM: u64 = 3;

const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dim: usize,
    pub n_per_split: usize,
    pub mixture_components: usize,
    pub component_spread: f64,
    pub noise_sigma: f64,
    pub m_generated: usize,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            n_per_split: 500,
            mixture_components: 4,
            component_spread: 8.0,
            noise_sigma: 0.3,
            m_generated: 500,
            seed: 42,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("n_per_split", self.n_per_split),
            ("mixture_components", self.mixture_components),
            ("m_generated", self.m_generated),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.component_spread.is_finite() && self.component_spread > 0.0) {
            return Err(Error::Config(format!(
                "component_spread must be positive, got {}",
                self.component_spread
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Component means on a sphere of radius `component_spread`, redrawn until
/// every pair is at least `component_spread` apart. If that keeps failing
/// (e.g. three components in one dimension) the means fall back to evenly
/// spaced points on the first axis.
pub fn component_means(spec: &ExperimentSpec) -> Vec<Vec<f64>> {
    let mut rng = rng_for(spec.seed, MEANS_STREAM);
    let spread = spec.component_spread;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(spec.mixture_components);
    'outer: for _ in 0..spec.mixture_components {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let dir: Vec<f64> = (0..spec.dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let cand: Vec<f64> = dir.iter().map(|v| v / norm * spread).collect();
            let far_enough = means.iter().all(|m| {
                m.iter()
                    .zip(&cand)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    >= spread
            });
            if far_enough {
                means.push(cand);
                continue 'outer;
            }
        }
        return (0..spec.mixture_components)
            .map(|c| {
                let mut m = vec![0.0; spec.dim];
                m[0] = c as f64 * spread;
                m
            })
            .collect();
    }
    means
}

/// Draw `count` points from the isotropic unit-variance Gaussian mixture,
/// components chosen uniformly.
pub fn sample_mixture(spec: &ExperimentSpec, count: usize, stream: u64) -> Result<EmbeddingMatrix> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    let means = component_means(spec);
    let mut rng = rng_for(spec.seed, stream);
    let mut data = Vec::with_capacity(count * spec.dim);
    for _ in 0..count {
        let mean = &means[rng.random_range(0..means.len())];
        for &mu in mean {
            let z: f64 = rng.sample(StandardNormal);
            data.push((mu + z) as f32);
        }
    }
    EmbeddingMatrix::new(count, spec.dim, data)
}

/// A memorizing generator: resample training rows with replacement and add
/// Gaussian noise of scale `noise_sigma`.
pub fn simulate_generated(
    training_subset: &EmbeddingMatrix,
    spec: &ExperimentSpec,
) -> Result<EmbeddingMatrix> {
    spec.validate()?;
    if training_subset.is_empty() {
        return Err(Error::EmptySet("training"));
    }
    let mut rng = rng_for(spec.seed, GENERATOR_STREAM);
    let dim = training_subset.dim();
    let mut data = Vec::with_capacity(spec.m_generated * dim);
    for _ in 0..spec.m_generated {
        let src = training_subset.row(rng.random_range(0..training_subset.count()));
        if spec.noise_sigma == 0.0 {
            data.extend_from_slice(src);
        } else {
            for &x in src {
                let z: f64 = rng.sample(StandardNormal);
                data.push((x as f64 + spec.noise_sigma * z) as f32);
            }
        }
    }
    EmbeddingMatrix::new(spec.m_generated, dim, data)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub indices: Vec<usize>,
}

/// Named groups of training indices, compared pairwise by `compare`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub groups: Vec<Group>,
}

impl Partition {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: Partition = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })?;
        if p.groups.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "partition must have exactly two groups, found {}",
                p.groups.len()
            )));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFiles {
    pub x_v1: String,
    pub x_v2: String,
    pub generated: String,
    /// `X_v1` stacked above `X_v2`; rows `0..n` are v1.
    pub training: String,
    pub partition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub spec: ExperimentSpec,
    pub files: ExperimentFiles,
}

impl ExperimentManifest {
    pub fn path_of(&self, dir: &Path, file: &str) -> PathBuf {
        dir.join(file)
    }
}

pub const MANIFEST_FILE: &str = "experiment.json";

/// Write the two-split experiment: `X_v1`, `X_v2`, the generated set drawn
/// from `X_v1` only, their concatenation, the partition, and a manifest.
pub fn make_ra2_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentManifest> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let v1 = sample_mixture(spec, spec.n_per_split, V1_STREAM)?;
    let v2 = sample_mixture(spec, spec.n_per_split, V2_STREAM)?;
    let generated = simulate_generated(&v1, spec)?;
    let training = v1.concat(&v2)?;

    let files = ExperimentFiles {
        x_v1: "x_v1.embx".into(),
        x_v2: "x_v2.embx".into(),
        generated: "generated.embx".into(),
        training: "training.embx".into(),
        partition: "partition.json".into(),
    };
    save_embeddings(&v1, out_dir.join(&files.x_v1), Format::Binary)?;
    save_embeddings(&v2, out_dir.join(&files.x_v2), Format::Binary)?;
    save_embeddings(&generated, out_dir.join(&files.generated), Format::Binary)?;
    save_embeddings(&training, out_dir.join(&files.training), Format::Binary)?;

    let n = spec.n_per_split;
    let partition = Partition {
        groups: vec![
            Group {
                name: "v1".into(),
                indices: (0..n).collect(),
            },
            Group {
                name: "v2".into(),
                indices: (n..2 * n).collect(),
            },
        ],
    };
    write_json(&out_dir.join(&files.partition), &partition)?;

    let manifest = ExperimentManifest { spec: *spec, files };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::load_embeddings;
    use crate::search::{batch_match, TrainingRepr};

    fn small() -> ExperimentSpec {
        ExperimentSpec {
            dim: 8,
            n_per_split: 40,
            m_generated: 30,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn single_draw_is_finite() {
        let x = sample_mixture(&small(), 1, 1).unwrap();
        assert_eq!((x.count(), x.dim()), (1, 8));
        assert!(x.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn deterministic() {
        let a = sample_mixture(&small(), 50, 1).unwrap();
        let b = sample_mixture(&small(), 50, 1).unwrap();
        assert_eq!(a.to_embx_bytes(), b.to_embx_bytes());
        let c = sample_mixture(&small(), 50, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn means_respect_spread() {
        for (dim, comps) in [(64, 4), (2, 6), (1, 2), (1, 5)] {
            let spec = ExperimentSpec {
                dim,
                mixture_components: comps,
                ..ExperimentSpec::default()
            };
            let means = component_means(&spec);
            assert_eq!(means.len(), comps);
            for i in 0..comps {
                for j in 0..i {
                    let d: f64 = means[i]
                        .iter()
                        .zip(&means[j])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    assert!(d >= spec.component_spread - 1e-9, "dim {dim}: {d}");
                }
            }
        }
    }

    #[test]
    fn sample_mean_converges() {
        let spec = ExperimentSpec {
            dim: 4,
            mixture_components: 1,
            ..ExperimentSpec::default()
        };
        let x = sample_mixture(&spec, 10_000, 1).unwrap();
        let mean = &component_means(&spec)[0];
        let bound = 5.0 / (10_000f64).sqrt();
        for c in 0..4 {
            let m = x.rows().map(|r| r[c] as f64).sum::<f64>() / 10_000.0;
            assert!((m - mean[c]).abs() < bound, "coord {c}: {m} vs {}", mean[c]);
        }
    }

    #[test]
    fn zero_noise_copies_rows() {
        let spec = ExperimentSpec {
            noise_sigma: 0.0,
            ..small()
        };
        let train = sample_mixture(&spec, spec.n_per_split, V1_STREAM).unwrap();
        let gen = simulate_generated(&train, &spec).unwrap();
        for g in gen.rows() {
            assert!(train.rows().any(|t| t == g));
        }
        let tables = batch_match(TrainingRepr::Exact(&train), &gen, 1).unwrap();
        assert!(tables.distances().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn zero_generated_rejected() {
        let spec = ExperimentSpec {
            m_generated: 0,
            ..small()
        };
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
        let train = sample_mixture(&small(), 3, 1).unwrap();
        assert!(simulate_generated(&train, &spec).is_err());
    }

    #[test]
    fn experiment_files_roundtrip_and_reproduce() {
        let spec = small();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let man = make_ra2_experiment(&spec, d1.path()).unwrap();
        make_ra2_experiment(&spec, d2.path()).unwrap();

        let v1 = load_embeddings(d1.path().join(&man.files.x_v1), Format::Binary).unwrap();
        let v2 = load_embeddings(d1.path().join(&man.files.x_v2), Format::Binary).unwrap();
        let gen = load_embeddings(d1.path().join(&man.files.generated), Format::Binary).unwrap();
        let train = load_embeddings(d1.path().join(&man.files.training), Format::Binary).unwrap();
        assert_eq!(v1.count(), 40);
        assert_eq!(v2.count(), 40);
        assert_eq!(gen.count(), 30);
        assert_eq!(train.count(), 80);
        assert!(v1.rows().all(|a| v2.rows().all(|b| a != b)));

        for name in [
            "x_v1.embx",
            "x_v2.embx",
            "generated.embx",
            "training.embx",
            "partition.json",
            MANIFEST_FILE,
        ] {
            assert_eq!(
                fs::read(d1.path().join(name)).unwrap(),
                fs::read(d2.path().join(name)).unwrap(),
                "{name}"
            );
        }
        let p = Partition::load(d1.path().join("partition.json")).unwrap();
        assert_eq!(p.groups[1].indices[0], 40);
    }
}
