//! Command-line front end: vocab, cooc, train, build, eval, adapt,
//! neighbors, synth and replay.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cooc::{from_stream, CoocTable};
use crate::corpus::{build_vocabulary, subsample, tokenize, SubsampleConfig, TokenStream, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{evaluate, report, threshold_subsets, Benchmark, EvalResult};
use crate::expsg::{expsg, prexpsg, rexpsg};
use crate::local::{adapt, compare_neighbors, retrieve, DocumentCollection, Feature, GateConfig, Granularity};
use crate::manifest::RunManifest;
use crate::matrix::ExplicitMatrix;
use crate::neighbors::{neighbors, Representation};
use crate::pmi::{pmi, ppmi, sppmi};
use crate::sgns::{context_path, train_with_stats, DenseEmbeddings, TrainConfig};
use crate::synthetic::{topic_corpus, TopicCorpusConfig};

pub const DATA_DIR_VAR: &str = "EXPSG_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "expsg", version, about = "Skip-Gram based explicit word representations")]
pub struct Cli {
    /// 1 trains deterministically; more enables lock-free parallel training.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count words and write the filtered vocabulary.
    Vocab(VocabArgs),
    /// Count window co-occurrences.
    Cooc(CoocArgs),
    /// Train Skip-Gram with negative sampling.
    Train(TrainArgs),
    /// Build an explicit representation.
    Build(BuildArgs),
    /// Spearman evaluation on word-association benchmarks.
    Eval(EvalArgs),
    /// Adapt an explicit representation to a query's top documents.
    Adapt(AdaptArgs),
    /// Nearest neighbors by cosine similarity.
    Neighbors(NeighborsArgs),
    /// Write a synthetic multi-topic corpus.
    Synth(SynthArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VocabArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub min_count: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CoocArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub subsample: f64,
    /// Keep every token.
    #[arg(long)]
    pub no_subsample: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Existing vocabulary; built from the corpus with --min-count when absent.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub min_count: u64,
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub negative: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub subsample: f64,
    #[arg(long)]
    pub no_subsample: bool,
    #[arg(long, default_value_t = 0.75)]
    pub cds: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builder {
    Pmi,
    Ppmi,
    Sppmi,
    Expsg,
    Rexpsg,
    Prexpsg,
}

impl Builder {
    fn needs_embeddings(self) -> bool {
        matches!(self, Builder::Expsg | Builder::Rexpsg | Builder::Prexpsg)
    }

    fn name(self) -> &'static str {
        match self {
            Builder::Pmi => "pmi",
            Builder::Ppmi => "ppmi",
            Builder::Sppmi => "sppmi",
            Builder::Expsg => "expsg",
            Builder::Rexpsg => "rexpsg",
            Builder::Prexpsg => "prexpsg",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BuildArgs {
    #[arg(long, value_enum)]
    pub builder: Builder,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Co-occurrence table (pmi, ppmi, sppmi).
    #[arg(long)]
    pub cooc: Option<PathBuf>,
    /// Word vectors with a `.ctx` companion (expsg, rexpsg, prexpsg).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Shift for sppmi.
    #[arg(long, default_value_t = 10)]
    pub k: u32,
    #[arg(long, default_value_t = 0.75)]
    pub cds: f64,
    /// Unsmoothed context distribution (PMI family only).
    #[arg(long)]
    pub no_cds: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Explicit matrix or embedding file; repeatable.
    #[arg(long = "rep", required = true)]
    pub reps: Vec<PathBuf>,
    /// Benchmark TSV; repeatable.
    #[arg(long = "benchmark", required = true)]
    pub benchmarks: Vec<PathBuf>,
    /// Score scale as `lo,hi`.
    #[arg(long, value_parser = parse_scale)]
    pub scale: Option<(f64, f64)>,
    /// Comma-separated human-score thresholds.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    #[arg(long)]
    pub tsv: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextUnit {
    Window,
    Paragraph,
    Document,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AdaptArgs {
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Explicit representation to adapt; defaults to prexpsg.tsv.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// One document per line, optionally `docid<TAB>text`.
    #[arg(long)]
    pub collection: Option<PathBuf>,
    #[arg(long)]
    pub query: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 1500.0)]
    pub mu: f64,
    #[arg(long, default_value = "f1", value_parser = parse_feature)]
    #[serde(with = "feature_str")]
    pub feature: Feature,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, value_enum, default_value_t = ContextUnit::Window)]
    pub context: ContextUnit,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// Print the top-n neighbors of each query term before and after.
    #[arg(long, default_value_t = 10)]
    pub compare: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NeighborsArgs {
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub rep: PathBuf,
    #[arg(long = "word", required = true)]
    pub words: Vec<String>,
    #[arg(short, long, default_value_t = 10)]
    pub n: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    pub topics: usize,
    #[arg(long, default_value_t = 10)]
    pub words_per_topic: usize,
    #[arg(long, default_value_t = 50_000)]
    pub tokens: usize,
    #[arg(long, default_value_t = 100)]
    pub doc_len: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 2)]
    pub max_step: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

mod feature_str {
    use super::Feature;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &Feature, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Feature, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn parse_feature(s: &str) -> std::result::Result<Feature, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scale(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    if lo >= hi {
        return Err("lo must be below hi".into());
    }
    Ok((lo, hi))
}

/// Fill an omitted path from the data directory.
fn resolve(path: &mut Option<PathBuf>, flag: &str, default_name: &str) -> Result<PathBuf> {
    if path.is_none() {
        let dir = std::env::var_os(DATA_DIR_VAR).ok_or_else(|| {
            Error::InvalidParam(format!("missing --{flag} (or set {DATA_DIR_VAR})"))
        })?;
        *path = Some(Path::new(&dir).join(default_name));
    }
    Ok(path.clone().expect("just filled"))
}

fn require_file(path: &Path, flag: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("--{flag}: {} does not exist", path.display())))
    }
}

fn write_manifest<T: Serialize>(
    subcommand: &str,
    argv: &[String],
    params: &T,
    threads: usize,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    output: &Path,
) -> Result<()> {
    let mut m = RunManifest::new(subcommand, argv.to_vec()).with_params(params);
    m.threads = threads;
    m.seed = seed;
    m.inputs = inputs;
    m.outputs = vec![output.to_path_buf()];
    if output.extension().is_some_and(|e| e == "txt") && context_path(output).exists() {
        m.outputs.push(context_path(output));
    }
    m.save(&RunManifest::path_for(output))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Entry point shared by the binary and tests. `argv` includes the program name.
pub fn run<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                print!("{e}");
                return Ok(());
            }
            _ => return Err(Error::InvalidParam(first_line(&e.to_string()))),
        },
    };
    let typed: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    dispatch(cli.command, cli.threads, &typed)
}

fn first_line(s: &str) -> String {
    s.lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
        .trim_start_matches("error: ")
        .to_string()
}

fn dispatch(cmd: Command, threads: usize, argv: &[String]) -> Result<()> {
    if threads < 1 {
        return Err(Error::InvalidParam("--threads must be >= 1".into()));
    }
    match cmd {
        Command::Vocab(a) => cmd_vocab(a, threads, argv),
        Command::Cooc(a) => cmd_cooc(a, threads, argv),
        Command::Train(a) => cmd_train(a, threads, argv),
        Command::Build(a) => cmd_build(a, threads, argv),
        Command::Eval(a) => cmd_eval(a, threads, argv),
        Command::Adapt(a) => cmd_adapt(a, threads, argv),
        Command::Neighbors(a) => cmd_neighbors(a),
        Command::Synth(a) => cmd_synth(a, threads, argv),
        Command::Replay(a) => cmd_replay(&a.manifest),
    }
}

fn cmd_replay(path: &Path) -> Result<()> {
    let m = RunManifest::load(path)?;
    let bad = |e: serde_json::Error| Error::format("manifest", e.line(), e.to_string());
    let cmd = match m.subcommand.as_str() {
        "vocab" => Command::Vocab(serde_json::from_value(m.params.clone()).map_err(bad)?),
        "cooc" => Command::Cooc(serde_json::from_value(m.params.clone()).map_err(bad)?),
        "train" => Command::Train(serde_json::from_value(m.params.clone()).map_err(bad)?),
        "build" => Command::Build(serde_json::from_value(m.params.clone()).map_err(bad)?),
        "eval" => Command::Eval(serde_json::from_value(m.params.clone()).map_err(bad)?),
        "adapt" => Command::Adapt(serde_json::from_value(m.params.clone()).map_err(bad)?),
        "synth" => Command::Synth(serde_json::from_value(m.params.clone()).map_err(bad)?),
        other => {
            return Err(Error::InvalidParam(format!("manifest subcommand `{other}` cannot be replayed")))
        }
    };
    dispatch(cmd, m.threads, &m.args)
}

fn cmd_vocab(mut a: VocabArgs, threads: usize, argv: &[String]) -> Result<()> {
    let corpus = resolve(&mut a.corpus, "corpus", "corpus.txt")?;
    let out = resolve(&mut a.out, "out", "vocab.tsv")?;
    require_file(&corpus, "corpus")?;
    let vocab = build_vocabulary(&corpus, a.min_count)?;
    vocab.save(&out)?;
    eprintln!("vocab: {} words, {} tokens", vocab.len(), vocab.total_tokens());
    write_manifest("vocab", argv, &a, threads, None, vec![corpus], &out)
}

fn load_stream(corpus: &Path, vocab: &Vocabulary, subsample_t: Option<f64>, seed: u64) -> Result<TokenStream> {
    let stream = TokenStream::from_path(corpus, vocab)?;
    Ok(match subsample_t {
        Some(t) => subsample(&stream, vocab, &SubsampleConfig::new(t, seed)?),
        None => stream,
    })
}

fn cmd_cooc(mut a: CoocArgs, threads: usize, argv: &[String]) -> Result<()> {
    let corpus = resolve(&mut a.corpus, "corpus", "corpus.txt")?;
    let vocab_path = resolve(&mut a.vocab, "vocab", "vocab.tsv")?;
    let out = resolve(&mut a.out, "out", "cooc.tsv")?;
    require_file(&corpus, "corpus")?;
    require_file(&vocab_path, "vocab")?;
    if a.window < 1 {
        return Err(Error::InvalidParam("--window must be >= 1".into()));
    }
    let vocab = Vocabulary::load(&vocab_path)?;
    let t = (!a.no_subsample).then_some(a.subsample);
    let stream = load_stream(&corpus, &vocab, t, a.seed)?;
    let table = from_stream(&stream, a.window, vocab.len())?;
    table.save(&out)?;
    eprintln!("cooc: {} pairs, {} distinct", table.total(), table.nnz());
    write_manifest("cooc", argv, &a, threads, Some(a.seed), vec![corpus, vocab_path], &out)
}

fn cmd_train(mut a: TrainArgs, threads: usize, argv: &[String]) -> Result<()> {
    let corpus = resolve(&mut a.corpus, "corpus", "corpus.txt")?;
    let out = resolve(&mut a.out, "out", "embeddings.txt")?;
    require_file(&corpus, "corpus")?;
    if a.vocab.is_none() && std::env::var_os(DATA_DIR_VAR).is_some() {
        let p = resolve(&mut a.vocab, "vocab", "vocab.tsv")?;
        if !p.is_file() {
            a.vocab = None;
        }
    }
    let mut inputs = vec![corpus.clone()];
    let vocab = match &a.vocab {
        Some(p) => {
            require_file(p, "vocab")?;
            inputs.push(p.clone());
            Vocabulary::load(p)?
        }
        None => build_vocabulary(&corpus, a.min_count)?,
    };
    let cfg = TrainConfig {
        dim: a.dim,
        negative: a.negative,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        window: a.window,
        subsample: (!a.no_subsample).then_some(a.subsample),
        cds_alpha: a.cds,
        seed: a.seed,
        threads,
    };
    cfg.validate()?;
    let stream = TokenStream::from_path(&corpus, &vocab)?;
    let (emb, stats) = train_with_stats(&stream, &vocab, &cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    emb.save(&out)?;
    let first = stats.loss_curve.iter().find(|x| x.is_finite());
    let last = stats.loss_curve.iter().rev().find(|x| x.is_finite());
    if let (Some(f), Some(l)) = (first, last) {
        eprintln!("train: {} updates, loss {f:.4} -> {l:.4}", stats.updates);
    }
    write_manifest("train", argv, &a, threads, Some(a.seed), inputs, &out)
}

fn cmd_build(mut a: BuildArgs, threads: usize, argv: &[String]) -> Result<()> {
    let vocab_path = resolve(&mut a.vocab, "vocab", "vocab.tsv")?;
    require_file(&vocab_path, "vocab")?;
    let vocab = Vocabulary::load(&vocab_path)?;
    let name = a.builder.name();
    let out = resolve(&mut a.out, "out", &format!("{name}.tsv"))?;
    let mut inputs = vec![vocab_path];
    let m = if a.builder.needs_embeddings() {
        if a.no_cds {
            return Err(Error::InvalidParam(format!("conflicting flags: --no-cds with --builder {name}")));
        }
        let emb_path = resolve(&mut a.embeddings, "embeddings", "embeddings.txt")?;
        require_file(&emb_path, "embeddings")?;
        let ctx = context_path(&emb_path);
        if !ctx.is_file() {
            return Err(Error::InvalidParam(format!(
                "conflicting flags: --builder {name} needs context vectors but {} does not exist",
                ctx.display()
            )));
        }
        let emb = DenseEmbeddings::load(&emb_path)?;
        emb.check_vocab(&vocab)?;
        inputs.push(emb_path);
        inputs.push(ctx);
        match a.builder {
            Builder::Expsg => expsg(&emb)?,
            Builder::Rexpsg => rexpsg(&emb, &vocab, a.cds)?,
            _ => prexpsg(&emb, &vocab, a.cds)?,
        }
    } else {
        let cooc_path = resolve(&mut a.cooc, "cooc", "cooc.tsv")?;
        require_file(&cooc_path, "cooc")?;
        let table = CoocTable::load(&cooc_path, vocab.len())?;
        inputs.push(cooc_path);
        let alpha = (!a.no_cds).then_some(a.cds);
        match a.builder {
            Builder::Pmi => pmi(&table, alpha)?,
            Builder::Ppmi => ppmi(&table, alpha)?,
            _ => sppmi(&table, a.k, alpha)?,
        }
    };
    m.save(&out)?;
    eprintln!(
        "build: {name}, {} nonzero cells, sparsity {:.1}%",
        m.nnz(),
        100.0 * m.sparsity().fraction_zero
    );
    write_manifest("build", argv, &a, threads, None, inputs, &out)
}

enum LoadedRep {
    Explicit(ExplicitMatrix),
    Dense(DenseEmbeddings),
}

impl LoadedRep {
    fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = String::new();
        BufReader::new(f)
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        if first.starts_with("#explicit") {
            Ok(LoadedRep::Explicit(ExplicitMatrix::load(path)?))
        } else {
            Ok(LoadedRep::Dense(DenseEmbeddings::load(path)?))
        }
    }

    fn as_rep(&self) -> &dyn Representation {
        match self {
            LoadedRep::Explicit(m) => m,
            LoadedRep::Dense(e) => e,
        }
    }

    fn tag(&self) -> String {
        match self {
            LoadedRep::Explicit(m) => m.builder().to_string(),
            LoadedRep::Dense(_) => "sg".to_string(),
        }
    }

    fn check(&self, vocab: &Vocabulary) -> Result<()> {
        match self {
            LoadedRep::Explicit(m) if m.dim() != vocab.len() => Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, vocabulary {} words",
                m.dim(),
                vocab.len()
            ))),
            LoadedRep::Explicit(_) => Ok(()),
            LoadedRep::Dense(e) => e.check_vocab(vocab),
        }
    }
}

fn cmd_eval(mut a: EvalArgs, threads: usize, argv: &[String]) -> Result<()> {
    let vocab_path = resolve(&mut a.vocab, "vocab", "vocab.tsv")?;
    require_file(&vocab_path, "vocab")?;
    let vocab = Vocabulary::load(&vocab_path)?;
    let benches = a
        .benchmarks
        .iter()
        .map(|p| Benchmark::load(p, a.scale))
        .collect::<Result<Vec<_>>>()?;
    let mut results: Vec<EvalResult> = Vec::new();
    let mut sparsities = Vec::new();
    let mut subsets = String::new();
    let mut seen: Vec<String> = Vec::new();
    for path in &a.reps {
        let rep = LoadedRep::load(path)?;
        rep.check(&vocab)?;
        let mut tag = rep.tag();
        if seen.contains(&tag) {
            tag = format!("{tag}:{}", path.file_stem().unwrap_or_default().to_string_lossy());
        }
        seen.push(tag.clone());
        if let LoadedRep::Explicit(m) = &rep {
            sparsities.push((tag.clone(), m.sparsity().fraction_zero));
        }
        for b in &benches {
            let r = evaluate(rep.as_rep(), &vocab, b, &tag)?;
            if r.n_dropped > 0 {
                eprintln!("eval: {tag} on {}: {} of {} pairs out of vocabulary", b.name, r.n_dropped, b.len());
            }
            results.push(r);
            if !a.thresholds.is_empty() {
                for s in threshold_subsets(rep.as_rep(), &vocab, b, &a.thresholds) {
                    let rho = s.rho.map_or("-".to_string(), |r| format!("{r:.6}"));
                    let p = s.p_value.map_or("-".to_string(), |p| format!("{p:.6}"));
                    subsets.push_str(&format!("{tag}\t{}\t{}\t{}\t{rho}\t{p}\n", b.name, s.threshold, s.n));
                }
            }
        }
    }
    let rep = report(&results, &sparsities);
    let mut text = if a.tsv { rep.to_tsv() } else { rep.to_text() };
    if !subsets.is_empty() {
        text.push_str("\nmethod\tbenchmark\tthreshold\tn\trho\tp_value\n");
        text.push_str(&subsets);
    }
    match &a.out {
        Some(out) => {
            let out = out.clone();
            let mut w = create(&out)?;
            w.write_all(text.as_bytes()).map_err(|e| Error::io(&out, e))?;
            finish(w, &out)?;
            let mut inputs = vec![vocab_path];
            inputs.extend(a.reps.iter().cloned());
            inputs.extend(a.benchmarks.iter().cloned());
            write_manifest("eval", argv, &a, threads, None, inputs, &out)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_adapt(mut a: AdaptArgs, threads: usize, argv: &[String]) -> Result<()> {
    let vocab_path = resolve(&mut a.vocab, "vocab", "vocab.tsv")?;
    let matrix_path = resolve(&mut a.matrix, "matrix", "prexpsg.tsv")?;
    let coll_path = resolve(&mut a.collection, "collection", "collection.txt")?;
    let out = resolve(&mut a.out, "out", &format!("adapted-{}.tsv", a.feature))?;
    for (p, flag) in [(&vocab_path, "vocab"), (&matrix_path, "matrix"), (&coll_path, "collection")] {
        require_file(p, flag)?;
    }
    let vocab = Vocabulary::load(&vocab_path)?;
    let rep = ExplicitMatrix::load(&matrix_path)?;
    let granularity = match a.context {
        ContextUnit::Window => Granularity::Window(a.window),
        ContextUnit::Paragraph => Granularity::Paragraph,
        ContextUnit::Document => Granularity::Document,
    };
    let coll = DocumentCollection::load(&coll_path, &vocab, granularity)?;
    let terms: Vec<String> = tokenize(&a.query).filter(|t| vocab.id(t).is_some()).collect();
    let query: Vec<u32> = terms.iter().filter_map(|t| vocab.id(t)).collect();
    if query.is_empty() {
        return Err(Error::Retrieval(format!("no query term of `{}` is in the vocabulary", a.query)));
    }
    let ctx = retrieve(&query, &coll, a.k, a.mu)?;
    let gate = GateConfig {
        a: a.a,
        b: a.b,
        feature: a.feature,
    };
    let adapted = adapt(&rep, &ctx, &gate)?;
    adapted.matrix.save(&out)?;
    let docs: Vec<&str> = ctx.top_docs().iter().map(|&(d, _)| coll.doc_id(d)).collect();
    eprintln!("adapt: top documents {}", docs.join(","));
    if adapted.zero_mass_cells > 0 {
        eprintln!("adapt: {} cells had zero global mass (feature set to 0)", adapted.zero_mass_cells);
    }
    if a.compare > 0 {
        let refs: Vec<&str> = terms.iter().map(String::as_str).collect();
        for c in compare_neighbors(&rep, &adapted.matrix, &vocab, &refs, a.compare)? {
            let fmt = |l: &[(u32, f64)]| l.iter().map(|(u, _)| vocab.word(*u)).collect::<Vec<_>>().join(" ");
            println!("{}\tglobal\t{}", c.term, fmt(&c.global));
            println!("{}\tadapted\t{}", c.term, fmt(&c.adapted));
            println!(
                "{}\toverlap {}/{}\tmean displacement {:.2}",
                c.term,
                c.overlap,
                c.global.len(),
                c.mean_displacement
            );
        }
    }
    write_manifest("adapt", argv, &a, threads, None, vec![vocab_path, matrix_path, coll_path], &out)
}

fn cmd_neighbors(mut a: NeighborsArgs) -> Result<()> {
    let vocab_path = resolve(&mut a.vocab, "vocab", "vocab.tsv")?;
    require_file(&vocab_path, "vocab")?;
    let vocab = Vocabulary::load(&vocab_path)?;
    let rep = LoadedRep::load(&a.rep)?;
    rep.check(&vocab)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for w in &a.words {
        let word = w.to_lowercase();
        for (u, s) in neighbors(rep.as_rep(), &vocab, &word, a.n)? {
            writeln!(out, "{word}\t{u}\t{s:.6}")?;
        }
    }
    Ok(())
}

fn cmd_synth(mut a: SynthArgs, threads: usize, argv: &[String]) -> Result<()> {
    let out = resolve(&mut a.out, "out", "corpus.txt")?;
    let cfg = TopicCorpusConfig {
        topics: a.topics,
        words_per_topic: a.words_per_topic,
        tokens: a.tokens,
        doc_len: a.doc_len,
        noise: a.noise,
        max_step: a.max_step,
        seed: a.seed,
    };
    let docs = topic_corpus(&cfg)?;
    let mut w = create(&out)?;
    for d in &docs {
        writeln!(w, "{d}").map_err(|e| Error::io(&out, e))?;
    }
    finish(w, &out)?;
    write_manifest("synth", argv, &a, threads, Some(a.seed), vec![], &out)
}
