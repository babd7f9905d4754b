//! The `genval` command-line interface.
//!
//! Every flag can also be set from a flat JSON config file (`--config`)
//! whose keys are the long flag names, e.g. `{"k": 10, "num-subspaces": 8}`.
//! Command-line flags override config values.
//!
//! Exit codes: 0 on success, 2 for usage/config/data errors, 3 when an
//! internal invariant is violated. Data goes to stdout, diagnostics to stderr.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::embedding::{load_embeddings_with, validate_pair, EmbeddingMatrix, Format};
use crate::error::{Error, Result};
use crate::numfmt::sig9;
use crate::pq::{quantization_error, PqConfig, PqIndex};
use crate::search::{batch_match, recall_at, recall_at_k, MatchTables, TrainingRepr};
use crate::stats::{group_summary, welch_t_test, Alternative};
use crate::synth::{make_ra2_experiment, ExperimentSpec, Partition};
use crate::transport::exact_wasserstein;
use crate::valuation::{aggregate_values, load_value_csv, DEFAULT_TEMPERATURE};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_ALPHA: f64 = 0.01;

const CONFIG_KEYS: &[&str] = &[
    "threads",
    "k",
    "temperature",
    "mode",
    "seed",
    "alpha",
    "num-subspaces",
    "codebook-size",
    "kmeans-iters",
    "training",
    "generated",
    "index",
    "output",
    "matches",
    "inline",
    "summary",
    "n",
    "format",
    "header",
    "out-dir",
    "dim",
    "n-per-split",
    "mixture-components",
    "component-spread",
    "noise-sigma",
    "m-generated",
    "values",
    "values-a",
    "values-b",
    "partition",
    "approx",
    "exact",
    "ks",
    "source",
    "target",
    "p",
];

#[derive(Debug, Parser)]
#[command(name = "genval", version, about = "Training-free data valuation for generative models")]
pub struct Cli {
    /// JSON file of default flag values (keys are long flag names).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for matching and valuation (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic two-split experiment (X_v1, X_v2, generated set).
    Synth(SynthArgs),
    /// Train PQ codebooks on the training set and write a GMVI index.
    BuildIndex(BuildIndexArgs),
    /// Top-k match every generated point; emits JSON lines.
    Match(MatchArgs),
    /// Compute per-training-point values as `train_index,value,rank` CSV.
    Value(ValueArgs),
    /// One-sided Welch t-test that group a is valued higher than group b.
    Compare(CompareArgs),
    /// Recall of PQ matching against exact matching.
    EvalRecall(EvalRecallArgs),
    /// Exact Wasserstein distance between two equal-size embedding sets.
    Wasserstein(WassersteinArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Pq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Binary,
    Csv,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Embedding file format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Skip the first line of CSV inputs.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_per_split: Option<usize>,
    #[arg(long)]
    mixture_components: Option<usize>,
    #[arg(long)]
    component_spread: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    m_generated: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PqArgs {
    #[arg(long)]
    num_subspaces: Option<usize>,
    #[arg(long)]
    codebook_size: Option<usize>,
    #[arg(long)]
    kmeans_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BuildIndexArgs {
    #[arg(long)]
    training: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    pq: PqArgs,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug, Args)]
struct MatchSource {
    #[arg(long)]
    training: Option<PathBuf>,
    #[arg(long)]
    generated: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// GMVI index, required in pq mode.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(short, long)]
    k: Option<usize>,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug, Args)]
struct MatchArgs {
    #[command(flatten)]
    source: MatchSource,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValueArgs {
    /// Match tables as JSON lines (`-` for stdin).
    #[arg(long)]
    matches: Option<PathBuf>,
    /// Run matching in-process instead of reading `--matches`.
    #[arg(long)]
    inline: bool,
    /// Training-set size when it cannot be read from `--training`.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write a JSON summary here.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    source: MatchSource,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    values_a: Option<PathBuf>,
    #[arg(long)]
    values_b: Option<PathBuf>,
    /// A single value file split into two groups by `--partition`.
    #[arg(long)]
    values: Option<PathBuf>,
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvalRecallArgs {
    /// Approximate match tables (JSON lines).
    #[arg(long)]
    approx: Option<PathBuf>,
    /// Exact match tables (JSON lines).
    #[arg(long)]
    exact: Option<PathBuf>,
    /// Comma-separated cut-offs.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    training: Option<PathBuf>,
    #[arg(long)]
    generated: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug, Args)]
struct WassersteinArgs {
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    p: Option<u32>,
    #[command(flatten)]
    input: InputArgs,
}

/// Flag values layered over config-file values.
struct Settings {
    config: Map<String, Value>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self { config: Map::new() });
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: format!("config: {e}"),
        })?;
        let Value::Object(config) = value else {
            return Err(Error::Config("config file must hold a JSON object".into()));
        };
        if let Some(key) = config.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        Ok(Self { config })
    }

    fn opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.config.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Error::Config(format!("config key '{key}': {e}"))),
        }
    }

    fn or<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn require<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.opt(flag, key)?
            .ok_or_else(|| Error::Config(format!("--{key} is required")))
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.opt::<bool>(None, key)?.unwrap_or(false))
    }

    fn load_matrix(&self, path: &Path, input: &InputArgs) -> Result<EmbeddingMatrix> {
        let format = match self.opt(input.format, "format")? {
            Some(FormatArg::Binary) => Format::Binary,
            Some(FormatArg::Csv) => Format::Csv,
            None => Format::from_path(path),
        };
        let header = self.flag(input.header, "header")?;
        load_embeddings_with(path, format, header)
    }

    fn pq_config(&self, args: &PqArgs) -> Result<PqConfig> {
        let d = PqConfig::default();
        Ok(PqConfig {
            num_subspaces: self.or(args.num_subspaces, "num-subspaces", d.num_subspaces)?,
            codebook_size: self.or(args.codebook_size, "codebook-size", d.codebook_size)?,
            kmeans_iters: self.or(args.kmeans_iters, "kmeans-iters", d.kmeans_iters)?,
            seed: self.or(args.seed, "seed", d.seed)?,
        })
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    let threads = settings.or(cli.threads, "threads", 0usize)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(&settings, a),
        Command::BuildIndex(a) => cmd_build_index(&settings, a),
        Command::Match(a) => cmd_match(&settings, a),
        Command::Value(a) => cmd_value(&settings, a),
        Command::Compare(a) => cmd_compare(&settings, a),
        Command::EvalRecall(a) => cmd_eval_recall(&settings, a),
        Command::Wasserstein(a) => cmd_wasserstein(&settings, a),
    })
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => fs::write(p, text).map_err(|e| Error::io(p, e)),
        _ => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn cmd_synth(s: &Settings, a: &SynthArgs) -> Result<()> {
    let d = ExperimentSpec::default();
    let spec = ExperimentSpec {
        dim: s.or(a.dim, "dim", d.dim)?,
        n_per_split: s.or(a.n_per_split, "n-per-split", d.n_per_split)?,
        mixture_components: s.or(a.mixture_components, "mixture-components", d.mixture_components)?,
        component_spread: s.or(a.component_spread, "component-spread", d.component_spread)?,
        noise_sigma: s.or(a.noise_sigma, "noise-sigma", d.noise_sigma)?,
        m_generated: s.or(a.m_generated, "m-generated", d.m_generated)?,
        seed: s.or(a.seed, "seed", d.seed)?,
    };
    let out_dir: PathBuf = s.require(a.out_dir.clone(), "out-dir")?;
    let manifest = make_ra2_experiment(&spec, &out_dir)?;
    let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
    text.push('\n');
    write_output(None, &text)
}

fn cmd_build_index(s: &Settings, a: &BuildIndexArgs) -> Result<()> {
    let cfg = s.pq_config(&a.pq)?;
    let training_path: PathBuf = s.require(a.training.clone(), "training")?;
    let output: PathBuf = s.require(a.output.clone(), "output")?;
    let training = s.load_matrix(&training_path, &a.input)?;
    let index = PqIndex::build(&training, &cfg)?;
    index.save(&output)?;
    let err = quantization_error(&training, &index.codebook)?;
    write_output(None, &format!("quantization_error={}\n", sig9(err)))
}

fn load_index(s: &Settings, path: Option<PathBuf>) -> Result<PqIndex> {
    let path: PathBuf = s
        .opt(path, "index")?
        .ok_or_else(|| Error::Config("pq mode requires --index".into()))?;
    PqIndex::load(path)
}

/// Build match tables from embeddings, exactly or through the PQ index.
fn compute_tables(s: &Settings, src: &MatchSource) -> Result<(MatchTables, usize)> {
    let mode = s.or(src.mode, "mode", Mode::Exact)?;
    let k = s.or(src.k, "k", DEFAULT_K)?;
    let generated_path: PathBuf = s.require(src.generated.clone(), "generated")?;
    let generated = s.load_matrix(&generated_path, &src.input)?;
    match mode {
        Mode::Exact => {
            let training_path: PathBuf = s.require(src.training.clone(), "training")?;
            let training = s.load_matrix(&training_path, &src.input)?;
            validate_pair(&training, &generated)?;
            let tables = batch_match(TrainingRepr::Exact(&training), &generated, k)?;
            Ok((tables, training.count()))
        }
        Mode::Pq => {
            let index = load_index(s, src.index.clone())?;
            let tables = batch_match(
                TrainingRepr::Pq {
                    codebook: &index.codebook,
                    codes: &index.codes,
                },
                &generated,
                k,
            )?;
            Ok((tables, index.codes.count()))
        }
    }
}

fn cmd_match(s: &Settings, a: &MatchArgs) -> Result<()> {
    let (tables, _) = compute_tables(s, &a.source)?;
    let output: Option<PathBuf> = s.opt(a.output.clone(), "output")?;
    write_output(output.as_deref(), &tables.to_jsonl())
}

fn read_tables(path: &Path) -> Result<MatchTables> {
    if path == Path::new("-") {
        MatchTables::from_jsonl(io::stdin().lock())
    } else {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        MatchTables::from_jsonl(BufReader::new(f))
    }
}

fn training_count(s: &Settings, a: &ValueArgs) -> Result<usize> {
    if let Some(n) = s.opt(a.n, "n")? {
        return Ok(n);
    }
    if let Some(path) = s.opt(a.source.training.clone(), "training")? {
        return Ok(s.load_matrix(&path, &a.source.input)?.count());
    }
    if let Some(path) = s.opt(a.source.index.clone(), "index")? {
        return Ok(PqIndex::load(path)?.codes.count());
    }
    Err(Error::Config(
        "training-set size unknown: pass --n, --training or --index".into(),
    ))
}

fn cmd_value(s: &Settings, a: &ValueArgs) -> Result<()> {
    let temperature = s.or(a.temperature, "temperature", DEFAULT_TEMPERATURE)?;
    let inline = s.flag(a.inline, "inline")?;
    let (tables, n) = if inline {
        let (tables, n) = compute_tables(s, &a.source)?;
        // Same precision the JSON-lines route sees, so both agree bytewise.
        (tables.rounded_to_print_precision(), n)
    } else {
        let path: PathBuf = s
            .opt(a.matches.clone(), "matches")?
            .ok_or_else(|| Error::Config("pass --matches FILE or --inline".into()))?;
        let tables = read_tables(&path)?;
        (tables, training_count(s, a)?)
    };
    let result = aggregate_values(&tables, n, temperature)?;

    let m = result.m as f64;
    if (result.sum_values() - m).abs() > 1e-6 * m.max(1.0) {
        return Err(Error::Invariant(format!(
            "values sum to {} for {} generated points",
            result.sum_values(),
            result.m
        )));
    }

    if let Some(path) = s.opt(a.summary.clone(), "summary")? {
        let mut text = serde_json::to_string_pretty(&result.summary(10)).expect("serializable");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    let output: Option<PathBuf> = s.opt(a.output.clone(), "output")?;
    write_output(output.as_deref(), &result.to_csv())
}

fn cmd_compare(s: &Settings, a: &CompareArgs) -> Result<()> {
    let alpha = s.or(a.alpha, "alpha", DEFAULT_ALPHA)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let values_a: Option<PathBuf> = s.opt(a.values_a.clone(), "values-a")?;
    let values_b: Option<PathBuf> = s.opt(a.values_b.clone(), "values-b")?;
    let single: Option<PathBuf> = s.opt(a.values.clone(), "values")?;
    let partition: Option<PathBuf> = s.opt(a.partition.clone(), "partition")?;

    let (names, group_a, group_b) = match (values_a, values_b, single, partition) {
        (Some(pa), Some(pb), None, None) => (
            ("a".to_string(), "b".to_string()),
            load_value_csv(pa)?,
            load_value_csv(pb)?,
        ),
        (None, None, Some(pv), Some(pp)) => {
            let values = load_value_csv(pv)?;
            let part = Partition::load(pp)?;
            let pick = |idx: &[usize]| -> Result<Vec<f64>> {
                idx.iter()
                    .map(|&i| {
                        values.get(i).copied().ok_or_else(|| {
                            Error::InvalidInput(format!(
                                "partition index {i} not in value file ({} rows)",
                                values.len()
                            ))
                        })
                    })
                    .collect()
            };
            let [ga, gb] = [&part.groups[0], &part.groups[1]];
            (
                (ga.name.clone(), gb.name.clone()),
                pick(&ga.indices)?,
                pick(&gb.indices)?,
            )
        }
        _ => {
            return Err(Error::Config(
                "pass either --values-a and --values-b, or --values and --partition".into(),
            ))
        }
    };

    let result = welch_t_test(&group_a, &group_b, Alternative::Greater)?;
    let reject = result.rejects_at(alpha);
    let verdict = if reject {
        format!("REJECT H0 at alpha={alpha}")
    } else {
        "FAIL TO REJECT".to_string()
    };

    let text = if a.json {
        let report = serde_json::json!({
            "group_a": { "name": names.0, "summary": group_summary(&group_a)? },
            "group_b": { "name": names.1, "summary": group_summary(&group_b)? },
            "test": result,
            "alpha": alpha,
            "reject_h0": reject,
            "verdict": verdict,
        });
        let mut t = serde_json::to_string_pretty(&report).expect("serializable");
        t.push('\n');
        t
    } else {
        format!(
            "group\tn\tmean\tvariance\n\
             {}\t{}\t{}\t{}\n\
             {}\t{}\t{}\t{}\n\
             H1: mean({}) > mean({})\n\
             t_statistic={}\n\
             degrees_of_freedom={}\n\
             p_value={}\n\
             alpha={alpha}\n\
             {verdict}\n",
            names.0,
            result.n_a,
            sig9(result.mean_a),
            sig9(result.var_a),
            names.1,
            result.n_b,
            sig9(result.mean_b),
            sig9(result.var_b),
            names.0,
            names.1,
            sig9(result.t_statistic),
            sig9(result.degrees_of_freedom),
            sig9(result.p_one_sided),
        )
    };
    write_output(None, &text)
}

fn cmd_eval_recall(s: &Settings, a: &EvalRecallArgs) -> Result<()> {
    let ks: Vec<usize> = s.or(a.ks.clone(), "ks", vec![1, DEFAULT_K])?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("--ks must list positive cut-offs".into()));
    }
    let approx_path: Option<PathBuf> = s.opt(a.approx.clone(), "approx")?;
    let exact_path: Option<PathBuf> = s.opt(a.exact.clone(), "exact")?;

    let (approx, exact) = match (approx_path, exact_path) {
        (Some(pa), Some(pe)) => {
            let approx = read_tables(&pa)?;
            let exact = read_tables(&pe)?;
            // Shape check up front so a mismatch is reported as such.
            recall_at_k(&approx, &exact)?;
            (approx, exact)
        }
        (None, None) => {
            let training_path: PathBuf = s.require(a.training.clone(), "training")?;
            let generated_path: PathBuf = s.require(a.generated.clone(), "generated")?;
            let training = s.load_matrix(&training_path, &a.input)?;
            let generated = s.load_matrix(&generated_path, &a.input)?;
            let index = load_index(s, a.index.clone())?;
            if index.codes.count() != training.count() {
                return Err(Error::InvalidInput(format!(
                    "index holds {} vectors, training set has {}",
                    index.codes.count(),
                    training.count()
                )));
            }
            let k = *ks.iter().max().expect("non-empty");
            let exact = batch_match(TrainingRepr::Exact(&training), &generated, k)?;
            let approx = batch_match(
                TrainingRepr::Pq {
                    codebook: &index.codebook,
                    codes: &index.codes,
                },
                &generated,
                k,
            )?;
            (approx, exact)
        }
        _ => {
            return Err(Error::Config(
                "pass both --approx and --exact, or neither".into(),
            ))
        }
    };

    let mut text = String::new();
    for &k in &ks {
        if k > exact.k() {
            return Err(Error::InvalidInput(format!(
                "cut-off {k} exceeds table width {}",
                exact.k()
            )));
        }
        let r = recall_at(&approx, &exact, k)?;
        text.push_str(&format!("recall@{k}={}\n", sig9(r)));
    }
    write_output(None, &text)
}

fn cmd_wasserstein(s: &Settings, a: &WassersteinArgs) -> Result<()> {
    let p = s.or(a.p, "p", 1u32)?;
    let source_path: PathBuf = s.require(a.source.clone(), "source")?;
    let target_path: PathBuf = s.require(a.target.clone(), "target")?;
    let source = s.load_matrix(&source_path, &a.input)?;
    let target = s.load_matrix(&target_path, &a.input)?;
    let r = exact_wasserstein(&source, &target, p)?;
    let assignment: Vec<String> = r.assignment.iter().map(|j| j.to_string()).collect();
    write_output(
        None,
        &format!(
            "n={}\np={}\ncost={}\nassignment={}\n",
            source.count(),
            r.p,
            sig9(r.cost),
            assignment.join(",")
        ),
    )
}
