//! Product quantization: per-subspace codebooks, encoding, and the `GMVI`
//! index file.
//!
//! Each of the `M` subspaces is trained independently with its own
//! ChaCha8 stream (`seed_from_u64(seed)`, stream = subspace index), so
//! training the subspaces in parallel never changes the output.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::squared_l2;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, nearest};

pub const GMVI_MAGIC: [u8; 4] = *b"GMVI";
pub const GMVI_VERSION: u32 = 1;
pub const GMVI_HEADER_LEN: usize = 28;
pub const MAX_CODEBOOK_SIZE: usize = 65536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PqConfig {
    pub num_subspaces: usize,
    pub codebook_size: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for PqConfig {
    fn default() -> Self {
        Self {
            num_subspaces: 8,
            codebook_size: 256,
            kmeans_iters: 25,
            seed: 0,
        }
    }
}

impl PqConfig {
    pub fn validate(&self, dim: usize, count: usize) -> Result<()> {
        if self.num_subspaces == 0 {
            return Err(Error::Config("num_subspaces must be positive".into()));
        }
        if !dim.is_multiple_of(self.num_subspaces) {
            return Err(Error::Config(format!(
                "dim {dim} is not divisible by num_subspaces {}",
                self.num_subspaces
            )));
        }
        if self.codebook_size == 0 || self.codebook_size > MAX_CODEBOOK_SIZE {
            return Err(Error::Config(format!(
                "codebook_size {} outside 1..={MAX_CODEBOOK_SIZE}",
                self.codebook_size
            )));
        }
        if self.codebook_size > count {
            return Err(Error::Config(format!(
                "codebook_size {} exceeds the {count} training vectors",
                self.codebook_size
            )));
        }
        if self.kmeans_iters == 0 {
            return Err(Error::Config("kmeans_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Trained centroids, laid out `[subspace][centroid][coordinate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    num_subspaces: usize,
    subspace_dim: usize,
    codebook_size: usize,
    centroids: Vec<f32>,
}

impl Codebook {
    pub fn new(
        num_subspaces: usize,
        subspace_dim: usize,
        codebook_size: usize,
        centroids: Vec<f32>,
    ) -> Result<Self> {
        if num_subspaces == 0 || subspace_dim == 0 {
            return Err(Error::InvalidInput(
                "codebook needs at least one subspace of positive width".into(),
            ));
        }
        if codebook_size == 0 || codebook_size > MAX_CODEBOOK_SIZE {
            return Err(Error::InvalidInput(format!(
                "codebook size {codebook_size} outside 1..={MAX_CODEBOOK_SIZE}"
            )));
        }
        if centroids.len() != num_subspaces * codebook_size * subspace_dim {
            return Err(Error::InvalidInput(format!(
                "centroid table has {} values, expected {}",
                centroids.len(),
                num_subspaces * codebook_size * subspace_dim
            )));
        }
        if centroids.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite centroid coordinate".into()));
        }
        Ok(Self {
            num_subspaces,
            subspace_dim,
            codebook_size,
            centroids,
        })
    }

    pub fn num_subspaces(&self) -> usize {
        self.num_subspaces
    }

    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn dim(&self) -> usize {
        self.num_subspaces * self.subspace_dim
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    /// All centroids of one subspace, `codebook_size x subspace_dim`.
    pub fn subspace(&self, s: usize) -> &[f32] {
        let len = self.codebook_size * self.subspace_dim;
        &self.centroids[s * len..(s + 1) * len]
    }

    #[inline]
    pub fn centroid(&self, s: usize, c: usize) -> &[f32] {
        let start = (s * self.codebook_size + c) * self.subspace_dim;
        &self.centroids[start..start + self.subspace_dim]
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::Dim {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }
}

/// One code per (vector, subspace), row-major `count x num_subspaces`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PqCodes {
    count: usize,
    num_subspaces: usize,
    codes: Vec<u16>,
}

impl PqCodes {
    pub fn new(count: usize, num_subspaces: usize, codes: Vec<u16>) -> Result<Self> {
        if codes.len() != count * num_subspaces {
            return Err(Error::InvalidInput(format!(
                "{} codes for {count} vectors x {num_subspaces} subspaces",
                codes.len()
            )));
        }
        Ok(Self {
            count,
            num_subspaces,
            codes,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn num_subspaces(&self) -> usize {
        self.num_subspaces
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.codes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u16] {
        &self.codes[i * self.num_subspaces..(i + 1) * self.num_subspaces]
    }

    /// Every code must address an existing centroid of `codebook`.
    pub fn check_against(&self, codebook: &Codebook) -> Result<()> {
        if self.num_subspaces != codebook.num_subspaces() {
            return Err(Error::Corruption(format!(
                "codes have {} subspaces, codebook has {}",
                self.num_subspaces,
                codebook.num_subspaces()
            )));
        }
        if let Some(pos) = self
            .codes
            .iter()
            .position(|&c| c as usize >= codebook.codebook_size())
        {
            return Err(Error::Corruption(format!(
                "code {} at vector {}, subspace {} exceeds codebook size {}",
                self.codes[pos],
                pos / self.num_subspaces,
                pos % self.num_subspaces,
                codebook.codebook_size()
            )));
        }
        Ok(())
    }
}

/// Per-subspace k-means objective after each assignment step.
#[derive(Debug, Clone, Default)]
pub struct TrainingTrace {
    pub objectives: Vec<Vec<f64>>,
}

pub fn train_codebooks(data: &EmbeddingMatrix, cfg: &PqConfig) -> Result<Codebook> {
    train_codebooks_traced(data, cfg).map(|(cb, _)| cb)
}

pub fn train_codebooks_traced(
    data: &EmbeddingMatrix,
    cfg: &PqConfig,
) -> Result<(Codebook, TrainingTrace)> {
    cfg.validate(data.dim(), data.count())?;
    let m = cfg.num_subspaces;
    let sub_dim = data.dim() / m;

    let per_subspace: Vec<Result<(Vec<f32>, Vec<f64>)>> = (0..m)
        .into_par_iter()
        .map(|s| {
            let mut points = Vec::with_capacity(data.count() * sub_dim);
            for row in data.rows() {
                points.extend_from_slice(&row[s * sub_dim..(s + 1) * sub_dim]);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s as u64);
            let out = kmeans(&points, sub_dim, cfg.codebook_size, cfg.kmeans_iters, &mut rng)?;
            Ok((out.centroids, out.objectives))
        })
        .collect();

    let mut centroids = Vec::with_capacity(m * cfg.codebook_size * sub_dim);
    let mut trace = TrainingTrace::default();
    for r in per_subspace {
        let (c, obj) = r?;
        centroids.extend_from_slice(&c);
        trace.objectives.push(obj);
    }
    Ok((
        Codebook::new(m, sub_dim, cfg.codebook_size, centroids)?,
        trace,
    ))
}

pub fn encode_vector(v: &[f32], codebook: &Codebook, out: &mut [u16]) {
    let sd = codebook.subspace_dim();
    for (s, code) in out.iter_mut().enumerate() {
        let (c, _) = nearest(&v[s * sd..(s + 1) * sd], codebook.subspace(s), sd);
        *code = c as u16;
    }
}

pub fn encode(data: &EmbeddingMatrix, codebook: &Codebook) -> Result<PqCodes> {
    codebook.check_dim(data.dim())?;
    let m = codebook.num_subspaces();
    let mut codes = vec![0u16; data.count() * m];
    codes
        .par_chunks_mut(m)
        .zip(data.as_slice().par_chunks(data.dim()))
        .for_each(|(out, v)| encode_vector(v, codebook, out));
    PqCodes::new(data.count(), m, codes)
}

pub fn decode(codes: &PqCodes, codebook: &Codebook) -> Result<EmbeddingMatrix> {
    codes.check_against(codebook)?;
    let mut data = Vec::with_capacity(codes.count() * codebook.dim());
    for i in 0..codes.count() {
        for (s, &c) in codes.row(i).iter().enumerate() {
            data.extend_from_slice(codebook.centroid(s, c as usize));
        }
    }
    EmbeddingMatrix::new(codes.count(), codebook.dim(), data)
}

/// Mean squared reconstruction error over all vectors.
pub fn quantization_error(data: &EmbeddingMatrix, codebook: &Codebook) -> Result<f64> {
    codebook.check_dim(data.dim())?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let sd = codebook.subspace_dim();
    let total: f64 = data
        .rows()
        .map(|v| {
            (0..codebook.num_subspaces())
                .map(|s| {
                    let sub = &v[s * sd..(s + 1) * sd];
                    nearest(sub, codebook.subspace(s), sd).1
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / data.count() as f64)
}

/// Reconstruction error of already-encoded data.
pub fn reconstruction_error(
    data: &EmbeddingMatrix,
    codes: &PqCodes,
    codebook: &Codebook,
) -> Result<f64> {
    let recon = decode(codes, codebook)?;
    if recon.count() != data.count() || recon.dim() != data.dim() {
        return Err(Error::Dim {
            expected: data.count(),
            found: recon.count(),
        });
    }
    if data.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = data
        .rows()
        .zip(recon.rows())
        .map(|(a, b)| squared_l2(a, b))
        .sum();
    Ok(total / data.count() as f64)
}

/// A trained codebook together with the codes of the indexed vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PqIndex {
    pub codebook: Codebook,
    pub codes: PqCodes,
}

impl PqIndex {
    pub fn build(data: &EmbeddingMatrix, cfg: &PqConfig) -> Result<Self> {
        let codebook = train_codebooks(data, cfg)?;
        let codes = encode(data, &codebook)?;
        Ok(Self { codebook, codes })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cb = &self.codebook;
        let wide = cb.codebook_size() > 256;
        let mut out = Vec::with_capacity(
            GMVI_HEADER_LEN
                + cb.centroids().len() * 4
                + self.codes.as_slice().len() * if wide { 2 } else { 1 },
        );
        out.extend_from_slice(&GMVI_MAGIC);
        out.extend_from_slice(&GMVI_VERSION.to_le_bytes());
        out.extend_from_slice(&(cb.num_subspaces() as u32).to_le_bytes());
        out.extend_from_slice(&(cb.subspace_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(cb.codebook_size() as u32).to_le_bytes());
        out.extend_from_slice(&(self.codes.count() as u64).to_le_bytes());
        for v in cb.centroids() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &c in self.codes.as_slice() {
            if wide {
                out.extend_from_slice(&c.to_le_bytes());
            } else {
                out.push(c as u8);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if let Some(pos) = bytes
            .iter()
            .zip(GMVI_MAGIC.iter())
            .position(|(a, b)| a != b)
        {
            return Err(Error::Format {
                offset: pos as u64,
                reason: "bad magic, expected \"GMVI\"".into(),
            });
        }
        if bytes.len() < GMVI_HEADER_LEN {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                reason: format!("header truncated: {} of {GMVI_HEADER_LEN} bytes", bytes.len()),
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        if u32_at(4) != GMVI_VERSION as usize {
            return Err(Error::Format {
                offset: 4,
                reason: format!("unsupported version {}", u32_at(4)),
            });
        }
        let m = u32_at(8);
        if m == 0 {
            return Err(Error::Format {
                offset: 8,
                reason: "zero subspaces".into(),
            });
        }
        let sd = u32_at(12);
        if sd == 0 {
            return Err(Error::Format {
                offset: 12,
                reason: "zero subspace dim".into(),
            });
        }
        let ks = u32_at(16);
        if ks == 0 || ks > MAX_CODEBOOK_SIZE {
            return Err(Error::Format {
                offset: 16,
                reason: format!("codebook size {ks} outside 1..={MAX_CODEBOOK_SIZE}"),
            });
        }
        let count = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let code_width: u64 = if ks > 256 { 2 } else { 1 };
        let n_centroid_vals = (m as u64) * (ks as u64) * (sd as u64);
        let expected = (|| {
            let table = n_centroid_vals.checked_mul(4)?;
            let codes = count.checked_mul(m as u64)?.checked_mul(code_width)?;
            table.checked_add(codes)
        })()
        .ok_or_else(|| Error::Format {
            offset: 20,
            reason: "declared sizes overflow".into(),
        })?;
        let payload = (bytes.len() - GMVI_HEADER_LEN) as u64;
        if payload < expected {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                reason: format!("payload truncated: expected {expected} bytes, found {payload}"),
            });
        }
        if payload > expected {
            return Err(Error::Format {
                offset: GMVI_HEADER_LEN as u64 + expected,
                reason: format!("{} trailing bytes after payload", payload - expected),
            });
        }
        let table_end = GMVI_HEADER_LEN + n_centroid_vals as usize * 4;
        let centroids: Vec<f32> = bytes[GMVI_HEADER_LEN..table_end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let codes: Vec<u16> = if code_width == 2 {
            bytes[table_end..]
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect()
        } else {
            bytes[table_end..].iter().map(|&b| b as u16).collect()
        };
        let codebook = Codebook::new(m, sd, ks, centroids)
            .map_err(|e| Error::Corruption(format!("centroid table: {e}")))?;
        let codes = PqCodes::new(count as usize, m, codes)?;
        codes.check_against(&codebook)?;
        Ok(Self { codebook, codes })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(count: usize, dim: usize, data: &[f32]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(count, dim, data.to_vec()).unwrap()
    }

    fn random_matrix(count: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..count * dim).map(|_| rng.random_range(-5.0f32..5.0)).collect();
        EmbeddingMatrix::new(count, dim, data).unwrap()
    }

    fn cfg(m: usize, ks: usize) -> PqConfig {
        PqConfig {
            num_subspaces: m,
            codebook_size: ks,
            kmeans_iters: 25,
            seed: 5,
        }
    }

    #[test]
    fn one_dimensional_two_centroids() {
        let data = matrix(4, 1, &[0.0, 1.0, 10.0, 11.0]);
        let cb = train_codebooks(&data, &cfg(1, 2)).unwrap();
        let mut c = cb.centroids().to_vec();
        c.sort_by(f32::total_cmp);
        assert_eq!(c, vec![0.5, 10.5]);
        assert_eq!(quantization_error(&data, &cb).unwrap(), 0.25);
    }

    #[test]
    fn quantization_error_hand_value() {
        let data = matrix(4, 1, &[0.0, 1.0, 10.0, 11.0]);
        let cb = Codebook::new(1, 1, 2, vec![0.5, 10.5]).unwrap();
        // (0.25 + 0.25 + 0.25 + 0.25) / 4
        assert_eq!(quantization_error(&data, &cb).unwrap(), 0.25);
        let permuted = matrix(4, 1, &[11.0, 0.0, 10.0, 1.0]);
        assert_eq!(quantization_error(&permuted, &cb).unwrap(), 0.25);
    }

    #[test]
    fn ks_equals_count_is_lossless() {
        let data = random_matrix(12, 4, 1);
        let cb = train_codebooks(&data, &cfg(2, 12)).unwrap();
        assert_eq!(quantization_error(&data, &cb).unwrap(), 0.0);
        let codes = encode(&data, &cb).unwrap();
        assert_eq!(decode(&codes, &cb).unwrap(), data);
    }

    #[test]
    fn identical_points_single_centroid() {
        let data = matrix(3, 2, &[1.5, -2.0, 1.5, -2.0, 1.5, -2.0]);
        let cb = train_codebooks(&data, &cfg(1, 1)).unwrap();
        assert_eq!(cb.centroids(), &[1.5, -2.0]);
    }

    #[test]
    fn config_errors() {
        let data = random_matrix(10, 6, 2);
        assert!(matches!(
            train_codebooks(&data, &cfg(4, 2)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            train_codebooks(&data, &cfg(2, 11)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            train_codebooks(&data, &cfg(2, 0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn encode_exact_centroid_hit() {
        let cb = Codebook::new(2, 1, 5, vec![0.0, 2.0, 4.0, 7.0, 6.0, 0.0, 1.0, 2.0, 3.0, 4.0])
            .unwrap();
        let x = matrix(1, 2, &[7.0, 0.0]);
        assert_eq!(encode(&x, &cb).unwrap().row(0), &[3, 0]);
    }

    #[test]
    fn equidistant_between_one_and_four_picks_one() {
        let cb = Codebook::new(1, 1, 5, vec![-10.0, 1.0, 50.0, 60.0, 3.0]).unwrap();
        let x = matrix(1, 1, &[2.0]);
        assert_eq!(encode(&x, &cb).unwrap().row(0), &[1]);
    }

    #[test]
    fn decode_all_zero_codes() {
        let cb = Codebook::new(2, 2, 2, vec![1.0, 2.0, 9.0, 9.0, 3.0, 4.0, 8.0, 8.0]).unwrap();
        let codes = PqCodes::new(3, 2, vec![0; 6]).unwrap();
        let d = decode(&codes, &cb).unwrap();
        for row in d.rows() {
            assert_eq!(row, &[1.0, 2.0, 3.0, 4.0]);
        }
    }

    #[test]
    fn decode_rejects_out_of_range_code() {
        let cb = Codebook::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        let codes = PqCodes::new(1, 1, vec![2]).unwrap();
        assert!(matches!(decode(&codes, &cb), Err(Error::Corruption(_))));
    }

    #[test]
    fn encode_dimension_mismatch() {
        let cb = Codebook::new(2, 2, 1, vec![0.0; 4]).unwrap();
        assert!(matches!(
            encode(&random_matrix(2, 3, 0), &cb),
            Err(Error::Dim { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let data = random_matrix(300, 8, 3);
        let a = train_codebooks(&data, &cfg(4, 16)).unwrap();
        let b = train_codebooks(&data, &cfg(4, 16)).unwrap();
        let bits = |cb: &Codebook| cb.centroids().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));

        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| train_codebooks(&data, &cfg(4, 16)).unwrap());
        assert_eq!(bits(&a), bits(&c));
    }

    #[test]
    fn objectives_are_monotone_per_subspace() {
        let data = random_matrix(500, 8, 4);
        let (_, trace) = train_codebooks_traced(&data, &cfg(2, 32)).unwrap();
        assert_eq!(trace.objectives.len(), 2);
        for obj in &trace.objectives {
            for w in obj.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-6), "{w:?}");
            }
        }
    }

    #[test]
    fn gmvi_roundtrip_narrow_and_wide() {
        let data = random_matrix(300, 4, 6);
        let idx = PqIndex::build(&data, &cfg(2, 8)).unwrap();
        let bytes = idx.to_bytes();
        assert_eq!(&bytes[..4], b"GMVI");
        assert_eq!(bytes.len(), 28 + 2 * 8 * 2 * 4 + 300 * 2);
        assert_eq!(PqIndex::from_bytes(&bytes).unwrap(), idx);

        let cb = Codebook::new(1, 1, 300, (0..300).map(|i| i as f32).collect()).unwrap();
        let codes = PqCodes::new(3, 1, vec![0, 257, 299]).unwrap();
        let wide = PqIndex {
            codebook: cb,
            codes,
        };
        let bytes = wide.to_bytes();
        assert_eq!(bytes.len(), 28 + 300 * 4 + 3 * 2);
        assert_eq!(PqIndex::from_bytes(&bytes).unwrap(), wide);
    }

    #[test]
    fn gmvi_rejects_bad_input() {
        let data = random_matrix(20, 2, 7);
        let bytes = PqIndex::build(&data, &cfg(1, 4)).unwrap().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            PqIndex::from_bytes(&bad),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            PqIndex::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format { .. })
        ));
        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() = 200;
        assert!(matches!(PqIndex::from_bytes(&bad), Err(Error::Corruption(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn encode_decode_is_idempotent(seed in any::<u64>(), ks in 1usize..16) {
            let data = random_matrix(40, 6, seed);
            let cb = train_codebooks(&data, &PqConfig { num_subspaces: 3, codebook_size: ks, kmeans_iters: 5, seed }).unwrap();
            let codes = encode(&data, &cb).unwrap();
            let again = encode(&decode(&codes, &cb).unwrap(), &cb).unwrap();
            prop_assert_eq!(again, codes);
        }

        #[test]
        fn zero_error_iff_representable(seed in any::<u64>()) {
            let data = random_matrix(10, 2, seed);
            let cb = train_codebooks(&data, &PqConfig { num_subspaces: 1, codebook_size: 10, kmeans_iters: 5, seed }).unwrap();
            prop_assert_eq!(quantization_error(&data, &cb).unwrap(), 0.0);
            let cb_small = train_codebooks(&data, &PqConfig { num_subspaces: 1, codebook_size: 3, kmeans_iters: 5, seed }).unwrap();
            prop_assert!(quantization_error(&data, &cb_small).unwrap() > 0.0);
        }
    }
}
