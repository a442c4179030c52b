//! `stegopivot` command-line tool.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on usage errors.
//! Set `STEGOPIVOT_LOG` (e.g. `info`, `debug`) for diagnostics on stderr.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use stegopivot::bins::{self, BinAssignment, Scheme};
use stegopivot::codec::{
    bits_to_bytes, bytes_to_bits, embed_batch, extract_batch, BatchConfig, Embedder, Framing,
    Manifest, StegoParams,
};
use stegopivot::lm::{RemoteProvider, DEFAULT_ORDER, DEFAULT_SMOOTHING};
use stegopivot::metrics::{evaluate, report_tsv};
use stegopivot::{
    BpeModel, GenerationContext, Lexicon, NgramModel, Provider, SecretKey, SynonymDb,
};

const DEFAULT_MERGES: usize = 8000;
const DEFAULT_COMMON: usize = 64;
const DEFAULT_MAX_TOKENS: usize = 128;

#[derive(Parser)]
#[command(
    name = "stegopivot",
    version,
    about = "Hide bits in generated text with semantic-aware bins coding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a BPE model on a corpus (one text per line).
    BpeTrain(BpeTrainArgs),
    /// Build a key-dependent bins file for a tokenizer.
    BinsBuild(BinsBuildArgs),
    /// Generate stego text, one per cover line, carrying the payload file.
    Embed(EmbedArgs),
    /// Recover the payload from stego text.
    Extract(ExtractArgs),
    /// Score stego text against its covers (BPW, BLEU, perplexity).
    Eval(EvalArgs),
    /// Handshake with a bridge and fetch one distribution.
    BridgeCheck(BridgeCheckArgs),
}

#[derive(Args)]
struct BpeTrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MERGES)]
    merges: usize,
    /// One token per distinct word instead of subwords.
    #[arg(long)]
    word_level: bool,
}

#[derive(Args)]
struct BinsBuildArgs {
    #[arg(long)]
    bpe: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Passphrase; its UTF-8 bytes are the key.
    #[arg(long)]
    key: String,
    /// Bits per carrying token.
    #[arg(long, visible_alias = "l")]
    bits: u32,
    #[arg(long, default_value_t = Scheme::SaBins)]
    scheme: Scheme,
    /// Token frequencies come from this corpus (sabins, bins-common).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Synonym sets (sabins).
    #[arg(long)]
    synsets: Option<PathBuf>,
    /// Number of most frequent tokens that carry no bits (bins-common).
    #[arg(long, default_value_t = DEFAULT_COMMON)]
    common: usize,
}

#[derive(Args)]
struct CodecFlags {
    #[arg(long)]
    bpe: PathBuf,
    #[arg(long)]
    bins: PathBuf,
    /// Embed at every s-th token.
    #[arg(long, visible_alias = "s")]
    step: usize,
    /// Bits per carrying token; defaults to the bins file.
    #[arg(long, visible_alias = "l")]
    bits: Option<u32>,
    #[arg(long, default_value_t = Framing::Header32)]
    framing: Framing,
    /// Optional passphrase, checked against the bins file fingerprint.
    #[arg(long)]
    key: Option<String>,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    codec: CodecFlags,
    /// Cover texts, one per line.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Payload file (raw bytes). An empty file gives plain generation.
    #[arg(long)]
    payload: PathBuf,
    #[arg(long)]
    provider: ProviderSpec,
    /// Corpus whose words generation may use; defaults to the n-gram corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_TOKENS)]
    max_tokens: usize,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    codec: CodecFlags,
    /// Stego texts, one per line. `<in>.manifest` is used when present.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Payload length in bits for single-line raw-framed input.
    #[arg(long)]
    declared_bits: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    bpe: PathBuf,
    /// Cover texts, one per line.
    #[arg(long)]
    cover: PathBuf,
    /// Stego texts, one per line. Embedded bits come from `<in>.manifest`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    provider: ProviderSpec,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BridgeCheckArgs {
    #[arg(long)]
    provider: ProviderSpec,
    /// Tokenizer whose vocabulary the bridge must serve.
    #[arg(long)]
    bpe: Option<PathBuf>,
}

#[derive(Clone, Debug)]
enum ProviderSpec {
    Ngram(PathBuf),
    Remote(String),
}

impl FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("ngram", path)) if !path.is_empty() => Ok(Self::Ngram(PathBuf::from(path))),
            Some(("remote", addr)) if !addr.is_empty() => Ok(Self::Remote(addr.to_owned())),
            _ => Err(format!(
                "expected ngram:<corpus path> or remote:<host:port>, got {s:?}"
            )),
        }
    }
}

/// Bad invocation detected after argument parsing; exits with 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn require_file<'a>(path: &'a Path, flag: &str) -> Result<&'a Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(usage(format!(
            "--{flag}: {} is not a readable file",
            path.display()
        )))
    }
}

fn read_lines(path: &Path, flag: &str) -> Result<Vec<String>> {
    let text = fs::read_to_string(require_file(path, flag)?)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn load_bpe(path: &Path) -> Result<BpeModel> {
    BpeModel::load(require_file(path, "bpe")?)
        .with_context(|| format!("loading BPE model {}", path.display()))
}

fn load_bins(path: &Path, tokenizer: &BpeModel, key: Option<&str>) -> Result<BinAssignment> {
    let f = BinAssignment::load(require_file(path, "bins")?)
        .with_context(|| format!("loading bins {}", path.display()))?;
    f.check_vocab(tokenizer)?;
    if let Some(key) = key {
        let fingerprint = SecretKey::from_passphrase(key).fingerprint();
        if fingerprint != f.key_fingerprint() {
            bail!("--key does not match the key the bins file was built with");
        }
    }
    info!(
        "bins: scheme {} l={} key {}",
        f.scheme(),
        f.bits(),
        f.key_fingerprint()
    );
    Ok(f)
}

fn open_provider(spec: &ProviderSpec, tokenizer: &BpeModel) -> Result<Box<dyn Provider>> {
    match spec {
        ProviderSpec::Ngram(path) => {
            let corpus = read_lines(path, "provider")?;
            info!(
                "training order-{DEFAULT_ORDER} n-gram model on {} lines",
                corpus.len()
            );
            Ok(Box::new(NgramModel::train_text(
                tokenizer,
                &corpus,
                DEFAULT_ORDER,
                DEFAULT_SMOOTHING,
            )?))
        }
        ProviderSpec::Remote(addr) => {
            let client = RemoteProvider::connect(addr)?;
            client.verify_vocab(&tokenizer.vocab_hash())?;
            Ok(Box::new(client))
        }
    }
}

fn stego_params(flags: &CodecFlags, f: &BinAssignment, max_tokens: usize) -> Result<StegoParams> {
    let bits = flags.bits.unwrap_or(f.bits());
    if bits != f.bits() {
        return Err(usage(format!(
            "--bits {bits} but the bins file carries {} bits per token",
            f.bits()
        )));
    }
    StegoParams::new(flags.step, bits, flags.framing, max_tokens).map_err(|e| usage(e.to_string()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

fn bpe_train(args: BpeTrainArgs) -> Result<()> {
    let corpus = read_lines(&args.corpus, "corpus")?;
    let model = if args.word_level {
        BpeModel::train_word_level(&corpus)?
    } else {
        BpeModel::train(&corpus, args.merges)?
    };
    if !args.word_level && model.merges().len() < args.merges {
        info!(
            "corpus supports only {} of {} merges",
            model.merges().len(),
            args.merges
        );
    }
    model.save(&args.out)?;
    info!(
        "wrote {} tokens to {}",
        model.vocab_size(),
        args.out.display()
    );
    Ok(())
}

fn bins_build(args: BinsBuildArgs) -> Result<()> {
    let tokenizer = load_bpe(&args.bpe)?;
    let key = SecretKey::from_passphrase(&args.key);
    let freqs = || -> Result<_> {
        let path = args
            .corpus
            .as_deref()
            .ok_or_else(|| usage(format!("--scheme {} needs --corpus", args.scheme)))?;
        Ok(tokenizer.count_frequencies(&read_lines(path, "corpus")?))
    };
    let f = match args.scheme {
        Scheme::SaBins => {
            let path = args
                .synsets
                .as_deref()
                .ok_or_else(|| usage("--scheme sabins needs --synsets"))?;
            let syndb = SynonymDb::load(require_file(path, "synsets")?)?;
            bins::build_sabins(&tokenizer, &freqs()?, &syndb, args.bits, &key)?
        }
        Scheme::Bins => bins::build_bins_random(&tokenizer, args.bits, &key)?,
        Scheme::BinsCommon => {
            bins::build_bins_common(&tokenizer, &freqs()?, args.bits, &key, args.common)?
        }
    };
    f.save(&args.out)?;
    info!(
        "wrote {} bins ({}) keyed {} to {}",
        f.bin_count(),
        f.scheme(),
        key.fingerprint(),
        args.out.display()
    );
    Ok(())
}

fn embed(args: EmbedArgs) -> Result<()> {
    let tokenizer = load_bpe(&args.codec.bpe)?;
    let f = load_bins(&args.codec.bins, &tokenizer, args.codec.key.as_deref())?;
    let params = stego_params(&args.codec, &f, args.max_tokens)?;
    let covers = read_lines(&args.input, "in")?;
    let payload = fs::read(require_file(&args.payload, "payload")?)?;

    let lexicon_corpus = match (&args.corpus, &args.provider) {
        (Some(path), _) | (None, ProviderSpec::Ngram(path)) => Some(read_lines(path, "corpus")?),
        (None, ProviderSpec::Remote(_)) => None,
    };
    let lexicon = match &lexicon_corpus {
        Some(corpus) => Lexicon::from_corpus(&tokenizer, corpus),
        None => Lexicon::from_vocab(&tokenizer),
    };
    let mut provider = open_provider(&args.provider, &tokenizer)?;

    let embedder = Embedder::new(&tokenizer, &f, &lexicon);
    let bits = bytes_to_bits(&payload);
    let out = embed_batch(
        &embedder,
        &covers,
        &bits,
        &BatchConfig { params },
        provider.as_mut(),
    )?;
    write_file(&args.out, out.stego_lines().as_bytes())?;
    write_file(&manifest_path(&args.out), out.manifest.to_text().as_bytes())?;
    info!(
        "embedded {} payload bits in {} texts",
        bits.len(),
        covers.len()
    );
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let tokenizer = load_bpe(&args.codec.bpe)?;
    let f = load_bins(&args.codec.bins, &tokenizer, args.codec.key.as_deref())?;
    let params = stego_params(&args.codec, &f, usize::MAX)?;
    let lines = read_lines(&args.input, "in")?;

    let manifest_file = manifest_path(&args.input);
    let counts: Option<Vec<usize>> = if manifest_file.is_file() {
        let manifest = Manifest::from_text(&fs::read_to_string(&manifest_file)?)
            .map_err(|e| anyhow::anyhow!("{}: {e}", manifest_file.display()))?;
        Some(manifest.entries.iter().map(|e| e.payload_bits).collect())
    } else if let Some(n) = args.declared_bits {
        if lines.len() != 1 {
            return Err(usage(
                "--declared-bits needs single-line input; use the manifest for batches",
            ));
        }
        Some(vec![n])
    } else {
        None
    };

    let bits = extract_batch(&lines, &params, &f, &tokenizer, counts.as_deref())?;
    write_file(&args.out, &bits_to_bytes(&bits))?;
    info!("recovered {} bits", bits.len());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let tokenizer = load_bpe(&args.bpe)?;
    let covers = read_lines(&args.cover, "cover")?;
    let stego = read_lines(&args.input, "in")?;
    if covers.len() != stego.len() {
        return Err(usage(format!(
            "{} cover lines but {} stego lines",
            covers.len(),
            stego.len()
        )));
    }
    let manifest_file = manifest_path(&args.input);
    let embedded: Vec<usize> = if manifest_file.is_file() {
        let manifest = Manifest::from_text(&fs::read_to_string(&manifest_file)?)
            .map_err(|e| anyhow::anyhow!("{}: {e}", manifest_file.display()))?;
        manifest.entries.iter().map(|e| e.embedded_bits).collect()
    } else {
        vec![0; stego.len()]
    };
    if embedded.len() != stego.len() {
        bail!(
            "manifest has {} rows for {} stego lines",
            embedded.len(),
            stego.len()
        );
    }

    let mut provider = open_provider(&args.provider, &tokenizer)?;
    let rows = covers
        .iter()
        .zip(&stego)
        .zip(&embedded)
        .map(|((c, s), &bits)| evaluate(c, s, bits, &tokenizer, provider.as_mut()))
        .collect::<Result<Vec<_>, _>>()?;
    let report = report_tsv(&rows);
    match &args.out {
        Some(path) => write_file(path, report.as_bytes()),
        None => Ok(std::io::stdout().write_all(report.as_bytes())?),
    }
}

fn bridge_check(args: BridgeCheckArgs) -> Result<()> {
    let ProviderSpec::Remote(addr) = &args.provider else {
        return Err(usage("bridge-check needs --provider remote:<host:port>"));
    };
    let mut client = RemoteProvider::connect(addr)?;
    if let Some(path) = &args.bpe {
        client.verify_vocab(&load_bpe(path)?.vocab_hash())?;
    }
    let dist = client.next_distribution(&GenerationContext::new("bridge check", &[]))?;
    println!("vocab_size\t{}", client.vocab_size());
    println!("vocab_hash\t{}", client.vocab_hash());
    println!("first_distribution_entries\t{}", dist.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BpeTrain(args) => bpe_train(args),
        Command::BinsBuild(args) => bins_build(args),
        Command::Embed(args) => embed(args),
        Command::Extract(args) => extract(args),
        Command::Eval(args) => eval(args),
        Command::BridgeCheck(args) => bridge_check(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STEGOPIVOT_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
