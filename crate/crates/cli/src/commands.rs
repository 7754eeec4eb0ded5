use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Parser;
use serde::Serialize;

use lexzipf::analytic::{self, analytic_blocks, length_classes};
use lexzipf::corpus::{self, compare_model_to_corpus, CompareConfig, Ingested, TokenizationConfig};
use lexzipf::estimator::{
    self, blocks_from_length_counts, fit_exponent_blocks, fit_exponent_mle, fit_exponent_ols, rank_frequency,
    BlockWindow, FitResult, HeadReport, MleUpper,
};
use lexzipf::generator::{
    generate_filtered_tokens_with, run_symbol_stream, spell_letters, GenerationConfig, Speller, TypeId,
};
use lexzipf::io::{self as formats, TokenReader, TokenWriter, TOKEN_MAGIC};
use lexzipf::{ModelParams, Provenance, RankFrequencyTable, SurvivalProfile};

use crate::args::*;
use crate::manifest::{self, FileDigest, RunManifest, MANIFEST_FILE};

/// A failed command and its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: e.into(),
    }
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_DATA,
        error: e.into(),
    }
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INTERNAL,
        error: e.into(),
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Files written by one command, plus what it read.
struct Run {
    dir: PathBuf,
    outputs: Vec<String>,
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
}

impl Run {
    fn new(out: &OutArgs) -> Outcome<Self> {
        fs::create_dir_all(&out.out)
            .with_context(|| format!("creating {}", out.out.display()))
            .map_err(data)?;
        Ok(Self {
            dir: out.out.clone(),
            outputs: Vec::new(),
            inputs: Vec::new(),
            seed: None,
        })
    }

    fn create(&mut self, name: &str) -> Outcome<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(data)?;
        self.outputs.push(name.to_string());
        Ok(BufWriter::with_capacity(1 << 16, file))
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Outcome {
        let mut w = self.create(name)?;
        w.write_all(bytes).and_then(|_| w.flush()).map_err(data)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Outcome {
        let text = formats::to_json_line(value).map_err(internal)?;
        self.write(name, text.as_bytes())
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    fn finish(mut self, subcommand: &str, args: &[String]) -> Outcome {
        self.outputs.sort();
        let digest = |dir: &Path, name: &str| -> Outcome<FileDigest> {
            let path = dir.join(name);
            Ok(FileDigest {
                path: name.to_string(),
                sha256: manifest::sha256_file(&path)
                    .with_context(|| format!("hashing {}", path.display()))
                    .map_err(data)?,
            })
        };
        let outputs = self
            .outputs
            .iter()
            .map(|n| digest(&self.dir, n))
            .collect::<Outcome<Vec<_>>>()?;
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: manifest::sha256_file(p)
                        .with_context(|| format!("hashing {}", p.display()))
                        .map_err(data)?,
                })
            })
            .collect::<Outcome<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            args: manifest::strip_out(args),
            seed: self.seed,
            inputs,
            outputs,
        };
        let text = formats::to_json_line(&manifest).map_err(internal)?;
        fs::write(self.dir.join(MANIFEST_FILE), text).map_err(data)
    }
}

fn model(args: &ModelArgs) -> Outcome<(ModelParams, SurvivalProfile)> {
    let params = ModelParams::new(args.m, args.q).map_err(usage)?;
    let profile = SurvivalProfile::new(args.profile.clone(), args.k_min, args.k_max).map_err(usage)?;
    Ok((params, profile))
}

/// Runs a parsed command line. `args` are the raw arguments after the
/// subcommand name, recorded in the manifest.
pub fn run(cli: Cli, args: &[String]) -> Outcome {
    let name = cli.command.name();
    match cli.command {
        Command::Theory(a) => theory(a, name, args),
        Command::Generate(a) => generate(a, name, args),
        Command::Fit(a) => fit(a, name, args),
        Command::Corpus(a) => corpus_cmd(a, name, args),
        Command::Compare(a) => compare(a, name, args),
        Command::Rerun(a) => rerun(a),
    }
}

const EXPONENT_NOTE: &str = "theoretical_exponent is (1/g)(1 - ln(1-q)/ln m); the corners of the analytic \
                             staircase fall on slope block_slope_exponent = 1 - ln(1-q)/(g ln m), and the two \
                             agree only at g = 1";

#[derive(Serialize)]
struct TheoryReport {
    m: u32,
    q: f64,
    profile: String,
    k_min: u32,
    k_max: u32,
    compatibility: bool,
    growth_rate: Option<f64>,
    theoretical_exponent: Option<f64>,
    block_slope_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent_note: Option<&'static str>,
    normalization: f64,
    truncated_tail_mass: f64,
    excluded_mass: f64,
    total_types: String,
    blocks: usize,
    first_block_width: Option<String>,
    head_10: HeadReport,
    head_20: HeadReport,
    block_fit: Option<FitResult>,
}

fn theory(a: TheoryArgs, name: &str, args: &[String]) -> Outcome {
    let (params, profile) = model(&a.model)?;
    let mut run = Run::new(&a.out)?;
    let blocks = analytic_blocks(&params, &profile).map_err(data)?;
    let mut csv = Vec::new();
    formats::write_blocks_csv(&blocks, &mut csv).map_err(internal)?;
    run.write("blocks.csv", &csv)?;
    if let Some(cap) = a.expand {
        let table = blocks.expand_prefix(cap).map_err(data)?;
        let mut csv = Vec::new();
        formats::write_rank_csv(&table, &mut csv).map_err(internal)?;
        run.write("table.csv", &csv)?;
    }
    let growth = profile.growth_rate();
    let theoretical = growth.map(|g| analytic::theoretical_exponent(&params, g));
    let slope = growth.map(|g| analytic::block_slope_exponent(&params, g));
    let differs = matches!((theoretical, slope), (Some(t), Some(s)) if (t - s).abs() > 1e-12);
    let head = |n| HeadReport {
        top_n: n,
        mass: blocks.head_mass(n),
    };
    let report = TheoryReport {
        m: params.m(),
        q: params.q(),
        profile: profile.to_string(),
        k_min: profile.k_min(),
        k_max: profile.k_max(),
        compatibility: profile.is_compatibility(),
        growth_rate: growth,
        theoretical_exponent: theoretical,
        block_slope_exponent: slope,
        exponent_note: differs.then_some(EXPONENT_NOTE),
        normalization: blocks.normalization,
        truncated_tail_mass: blocks.truncated_tail_mass,
        excluded_mass: blocks.excluded_mass,
        total_types: blocks.total_types().to_string(),
        blocks: blocks.blocks.len(),
        first_block_width: blocks.blocks.first().map(|b| b.width.to_string()),
        head_10: head(10),
        head_20: head(20),
        block_fit: fit_exponent_blocks(&blocks, BlockWindow::default()).ok(),
    };
    run.json("theory.json", &report)?;
    print_json(&report)?;
    run.finish(name, args)
}

fn print_json<T: Serialize>(value: &T) -> Outcome {
    let text = formats::to_json_line(value).map_err(internal)?;
    print!("{text}");
    Ok(())
}

enum TokenSink {
    Text(BufWriter<File>, Speller),
    Compact(TokenWriter<BufWriter<File>>),
}

#[derive(Serialize)]
struct RawStreamReport<'a> {
    #[serde(flatten)]
    report: &'a lexzipf::generator::StreamReport,
    expected_words: f64,
}

fn generate(a: GenerateArgs, name: &str, args: &[String]) -> Outcome {
    let (params, profile) = model(&a.model)?;
    let mut run = Run::new(&a.out)?;
    run.seed = Some(a.seed);

    if let Some(n) = a.symbols {
        if a.format == TokenFormat::Compact {
            return Err(usage(anyhow!("the compact format holds filtered tokens; use --tokens")));
        }
        let config = GenerationConfig::symbols(params.clone(), n, a.seed);
        let mut out = run.create("tokens.txt")?;
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut io_err = None;
        let report = run_symbol_stream(&config, |w| {
            let s = spell_letters(w);
            if io_err.is_none() {
                if let Err(e) = writeln!(out, "{s}") {
                    io_err = Some(e);
                }
            }
            *counts.entry(s).or_insert(0) += 1;
        })
        .map_err(data)?;
        if let Some(e) = io_err {
            return Err(data(e));
        }
        out.flush().map_err(data)?;
        let raw = RawStreamReport {
            report: &report,
            expected_words: analytic::expected_word_count(n, &params),
        };
        run.json("report.json", &raw)?;
        if report.words > 0 {
            let table = rank_frequency(&counts, report.words, Provenance::Simulated).map_err(data)?;
            write_table(&mut run, &table)?;
        }
        print_json(&raw)?;
        return run.finish(name, args);
    }

    let n = a.tokens.expect("clap requires --tokens or --symbols");
    let mut config = GenerationConfig::tokens(params.clone(), profile.clone(), n, a.seed).with_mode(a.mode);
    if let Some(c) = a.chunk_tokens {
        config = config.with_chunks(c);
    }
    let mut sink = match a.format {
        TokenFormat::Text => TokenSink::Text(run.create("tokens.txt")?, Speller::new(&params, a.seed)),
        TokenFormat::Compact => {
            let w = run.create("tokens.bin")?;
            TokenSink::Compact(TokenWriter::new(w, params.m()).map_err(data)?)
        }
    };
    let mut counts: HashMap<TypeId, u64> = HashMap::new();
    let mut failure: Option<anyhow::Error> = None;
    let report = generate_filtered_tokens_with(&config, |t| {
        if failure.is_none() {
            let r = match &mut sink {
                TokenSink::Text(w, speller) => speller
                    .spell(t)
                    .map_err(anyhow::Error::from)
                    .and_then(|s| writeln!(w, "{s}").map_err(Into::into)),
                TokenSink::Compact(w) => w.write(t).map_err(Into::into),
            };
            failure = r.err();
        }
        *counts.entry(t.clone()).or_insert(0) += 1;
    })
    .map_err(data)?;
    if let Some(e) = failure {
        return Err(data(e));
    }
    match sink {
        TokenSink::Text(mut w, _) => w.flush().map_err(data)?,
        TokenSink::Compact(w) => {
            w.finish().map_err(data)?;
        }
    }
    run.json("report.json", &report)?;
    let table = rank_frequency(&counts, report.tokens_emitted, Provenance::Simulated).map_err(data)?;
    write_table(&mut run, &table)?;
    let classes = length_classes(&profile, &params).map_err(data)?;
    let blocks =
        blocks_from_length_counts(&classes, &report.length_histogram.counts, Provenance::Simulated).map_err(data)?;
    let mut csv = Vec::new();
    formats::write_blocks_csv(&blocks, &mut csv).map_err(internal)?;
    run.write("blocks.csv", &csv)?;
    print_json(&report)?;
    run.finish(name, args)
}

fn write_table(run: &mut Run, table: &RankFrequencyTable) -> Outcome {
    let mut w = run.create("table.csv")?;
    formats::write_rank_csv(table, &mut w).map_err(data)?;
    w.flush().map_err(data)
}

enum FitInput {
    Table(RankFrequencyTable),
    Blocks(lexzipf::BlockTable),
}

fn read_fit_input(path: &Path) -> Outcome<FitInput> {
    let open = || {
        File::open(path)
            .with_context(|| format!("opening {}", path.display()))
            .map_err(data)
    };
    let mut head = Vec::new();
    open()?.take(64).read_to_end(&mut head).map_err(data)?;
    let first_line = head.split(|&b| b == b'\n').next().unwrap_or(&[]);
    let ctx = |e: formats::FormatError| data(anyhow::Error::from(e).context(format!("reading {}", path.display())));
    if head.starts_with(&TOKEN_MAGIC) {
        let reader = TokenReader::new(BufReader::new(open()?)).map_err(ctx)?;
        let mut counts: HashMap<TypeId, u64> = HashMap::new();
        let mut total = 0;
        for t in reader {
            *counts.entry(t.map_err(ctx)?).or_insert(0) += 1;
            total += 1;
        }
        if total == 0 {
            return Err(data(anyhow!("{} holds no tokens", path.display())));
        }
        return Ok(FitInput::Table(
            rank_frequency(&counts, total, Provenance::Simulated).map_err(data)?,
        ));
    }
    if first_line == formats::RANK_HEADER.join(",").as_bytes() {
        return Ok(FitInput::Table(formats::read_rank_csv(open()?).map_err(ctx)?));
    }
    if first_line == formats::BLOCK_HEADER.join(",").as_bytes() {
        return Ok(FitInput::Blocks(formats::read_blocks_csv(open()?).map_err(ctx)?));
    }
    // Newline-delimited token spellings.
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0;
    for line in BufReader::new(open()?).lines() {
        let line = line
            .with_context(|| format!("reading {}", path.display()))
            .map_err(data)?;
        if !line.is_empty() {
            *counts.entry(line).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(data(anyhow!("{} holds no tokens", path.display())));
    }
    Ok(FitInput::Table(
        rank_frequency(&counts, total, Provenance::Empirical).map_err(data)?,
    ))
}

fn mle_upper(arg: UpperArg) -> MleUpper {
    match arg {
        UpperArg::TableEnd => MleUpper::TableEnd,
        UpperArg::Unbounded => MleUpper::Unbounded,
    }
}

fn default_r_max(table: &RankFrequencyTable, window: &WindowArgs) -> u64 {
    window.r_max.unwrap_or_else(|| {
        if table.counts().is_some() {
            table.last_rank_with_count(window.min_tail_count)
        } else {
            table.len() as u64
        }
    })
}

fn fit(a: FitArgs, name: &str, args: &[String]) -> Outcome {
    let mut run = Run::new(&a.out)?;
    run.input(&a.input);
    let input = read_fit_input(&a.input)?;
    let w = &a.window;
    let result = match (input, a.method) {
        (FitInput::Blocks(blocks), FitMethodArg::Blocks) => {
            let window = BlockWindow {
                r_min: w.r_min as f64,
                r_max: w.r_max.map_or(f64::INFINITY, |r| r as f64),
                min_tokens: w.min_tail_count,
                ..BlockWindow::default()
            };
            fit_exponent_blocks(&blocks, window).map_err(data)?
        }
        (FitInput::Blocks(_), _) => return Err(usage(anyhow!("a block table supports only --method blocks"))),
        (FitInput::Table(_), FitMethodArg::Blocks) => {
            return Err(usage(anyhow!("--method blocks needs a block CSV as input")))
        }
        (FitInput::Table(t), FitMethodArg::Ols) => {
            fit_exponent_ols(&t, w.r_min, Some(default_r_max(&t, w))).map_err(data)?
        }
        (FitInput::Table(t), FitMethodArg::Mle) => {
            fit_exponent_mle(&t, w.r_min, mle_upper(w.mle_upper)).map_err(data)?
        }
    };
    run.json("fit.json", &result)?;
    print_json(&result)?;
    run.finish(name, args)
}

fn tokenization(a: &TokenArgs) -> TokenizationConfig {
    TokenizationConfig {
        lowercase: !a.keep_case,
        strip_punctuation: !a.keep_punctuation,
        token_pattern: a.pattern,
        min_token_length: a.min_token_length,
    }
}

fn ingest(paths: &[PathBuf], tokens: &TokenArgs) -> Outcome<Ingested> {
    corpus::ingest_files(paths, &tokenization(tokens)).map_err(|e| match e {
        corpus::CorpusError::InvalidConfig => usage(e),
        _ => data(e),
    })
}

#[derive(Serialize)]
struct CorpusReport {
    files: usize,
    tokens: u64,
    types: usize,
    bytes: u64,
    replacements: u64,
    mean_token_length: Option<f64>,
    calibrated_q: Option<f64>,
    tokenization: TokenizationConfig,
    head: Vec<HeadReport>,
}

fn corpus_cmd(a: CorpusArgs, name: &str, args: &[String]) -> Outcome {
    let mut run = Run::new(&a.out)?;
    for p in &a.paths {
        run.input(p);
    }
    let got = ingest(&a.paths, &a.tokens)?;
    let table = got.table().map_err(data)?;
    write_table(&mut run, &table)?;
    let head = a
        .top
        .iter()
        .map(|&n| estimator::head_mass(&table, n.clamp(1, table.len() as u64)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data)?;
    let report = CorpusReport {
        files: a.paths.len(),
        tokens: got.total,
        types: got.distinct(),
        bytes: got.bytes,
        replacements: got.replacements,
        mean_token_length: got.mean_token_length(),
        calibrated_q: got.calibrated_blank(),
        tokenization: tokenization(&a.tokens),
        head,
    };
    run.json("head.json", &report)?;
    print_json(&report)?;
    run.finish(name, args)
}

fn compare(a: CompareArgs, name: &str, args: &[String]) -> Outcome {
    let mut run = Run::new(&a.out)?;
    let mut model_args = a.model.clone();
    let table = if let Some(path) = &a.table {
        run.input(path);
        match read_fit_input(path)? {
            FitInput::Table(t) => t,
            FitInput::Blocks(_) => return Err(usage(anyhow!("--table needs a rank CSV; pass blocks with --blocks"))),
        }
    } else {
        for p in &a.corpus {
            run.input(p);
        }
        let got = ingest(&a.corpus, &a.tokens)?;
        if a.calibrate_q {
            model_args.q = got.calibrated_blank().expect("non-empty corpus");
        }
        got.table().map_err(data)?
    };
    let blocks = match &a.blocks {
        Some(path) => {
            run.input(path);
            match read_fit_input(path)? {
                FitInput::Blocks(b) => Some(b),
                FitInput::Table(_) => return Err(usage(anyhow!("--blocks needs a block CSV"))),
            }
        }
        None => None,
    };
    let (params, profile) = model(&model_args)?;
    let config = CompareConfig {
        r_min: a.window.r_min,
        r_max: a.window.r_max,
        min_tail_count: a.window.min_tail_count,
        bins_per_decade: a.bins_per_decade,
        mle_upper: mle_upper(a.window.mle_upper),
    };
    let report = compare_model_to_corpus(&table, blocks.as_ref(), &params, &profile, &config).map_err(data)?;
    run.json("compare.json", &report)?;
    let mut csv = Vec::new();
    formats::write_curves_csv(
        &[("empirical", &report.empirical.binned), ("model", &report.model.binned)],
        &mut csv,
    )
    .map_err(internal)?;
    run.write("overlay.csv", &csv)?;
    print_json(&serde_json::json!({
        "gap_method": report.gap_method,
        "exponent_gap": report.exponent_gap,
        "combined_stderr": report.combined_stderr,
        "theoretical_exponent": report.theoretical_exponent,
        "block_slope_exponent": report.block_slope_exponent,
    }))?;
    run.finish(name, args)
}

#[derive(Serialize)]
struct RerunReport {
    subcommand: String,
    out: String,
    identical: bool,
    mismatched: Vec<String>,
}

fn rerun(a: RerunArgs) -> Outcome {
    let text = fs::read_to_string(&a.manifest)
        .with_context(|| format!("reading {}", a.manifest.display()))
        .map_err(data)?;
    let old: RunManifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", a.manifest.display()))
        .map_err(data)?;
    if old.subcommand == "rerun" {
        return Err(usage(anyhow!("a rerun manifest cannot be rerun")));
    }
    for input in &old.inputs {
        let now = manifest::sha256_file(Path::new(&input.path))
            .with_context(|| format!("hashing input {}", input.path))
            .map_err(data)?;
        if now != input.sha256 {
            return Err(data(anyhow!("input {} changed since the recorded run", input.path)));
        }
    }
    let out = a.out.out.display().to_string();
    let mut argv = vec!["lexzipf".to_string(), old.subcommand.clone()];
    argv.extend(old.args.iter().cloned());
    argv.push("--out".into());
    argv.push(out.clone());
    let cli = Cli::try_parse_from(&argv).map_err(|e| usage(anyhow!("manifest arguments no longer parse: {e}")))?;
    run(cli, &argv[2..])?;

    let fresh_text = fs::read_to_string(a.out.out.join(MANIFEST_FILE)).map_err(data)?;
    let fresh: RunManifest = serde_json::from_str(&fresh_text).map_err(internal)?;
    let mut mismatched: Vec<String> = Vec::new();
    for (o, n) in old.outputs.iter().zip(&fresh.outputs) {
        if o != n {
            mismatched.push(o.path.clone());
        }
    }
    if old.outputs.len() != fresh.outputs.len() {
        mismatched.push("<output list>".into());
    }
    if fresh_text != text {
        mismatched.push(MANIFEST_FILE.into());
    }
    let report = RerunReport {
        subcommand: old.subcommand,
        out,
        identical: mismatched.is_empty(),
        mismatched,
    };
    print_json(&report)?;
    if report.identical {
        Ok(())
    } else {
        Err(internal(anyhow!(
            "rerun outputs differ: {}",
            report.mismatched.join(", ")
        )))
    }
}
