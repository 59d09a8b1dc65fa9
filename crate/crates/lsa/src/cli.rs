//! The `lsa` command line.
//!
//! Every command except `report` writes its artifacts and one
//! `manifest.json` into the `--out` directory. Exit codes: 0 success,
//! 1 runtime failure, 2 bad configuration or usage, 3 missing input.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lsa_core::corpus::{AspectVocabulary, RawReview};
use lsa_core::evaluation::{
    compute_metrics, evaluate, predict_all, run_experiment, split_indices, sweep, BiasBaseline, Corpus,
    MetricsReport, SweepParam,
};
use lsa_core::graph::{AspectGraph, EntityIndex};
use lsa_core::model::{LsaModel, Variant};
use lsa_core::synth::generate;
use lsa_core::training::{interactions, train, EpochRecord, TrainData};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RunConfig};
use crate::exec::RayonExecutor;
use crate::io::{self, IoError, ParsedReviews};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::plot::line_chart_svg;
use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING: i32 = 3;

pub const METRICS_FILE: &str = "metrics.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";

/// Long flags handled by the parser; any other `--key value` pair is a
/// configuration override.
const KNOWN_FLAGS: [&str; 11] = [
    "config",
    "seed",
    "out",
    "input",
    "variant",
    "param",
    "values",
    "dump-sequences",
    "compare",
    "help",
    "version",
];

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn failure(message: impl std::fmt::Display) -> Self {
        Self::new(EXIT_FAILURE, message.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Missing(_) => EXIT_MISSING,
            _ => EXIT_CONFIG,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = if e.is_missing() { EXIT_MISSING } else { EXIT_FAILURE };
        CliError::new(code, e.to_string())
    }
}

impl From<lsa_core::Error> for CliError {
    fn from(e: lsa_core::Error) -> Self {
        let code = match e {
            lsa_core::Error::InvalidConfig(_) | lsa_core::Error::UnknownVariant(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "lsa",
    version,
    about = "Aspect-based rating prediction with long- and short-term interests",
    after_help = "Any configuration key can be overridden with `--key value`, e.g. `--learning_rate 0.003` or `--synth.n_users 50`."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the split, initialisation, shuffling and the generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory for artifacts and the manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract aspect–opinion mentions and the aspect vocabulary.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Review file (JSON lines).
        #[arg(long)]
        input: PathBuf,
    },
    /// Build the user–item–aspect graph from all reviews.
    BuildGraph {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate a synthetic drift corpus.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Split, train one variant and save the best checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "full")]
        variant: String,
        /// Also write the interest sequences as JSON.
        #[arg(long)]
        dump_sequences: bool,
    },
    /// Score the held-out reviews of a training run.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Directory of a `train` run.
        #[arg(long)]
        input: PathBuf,
    },
    /// Train and evaluate ablation variants (all of them without `--variant`).
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        variant: Option<String>,
    },
    /// One model per value of K or N.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Summarise one run, or compare two.
    Report {
        run: PathBuf,
        /// A second run to compare against the first.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
}

/// Parses `args` (program name excluded), runs the command and returns the
/// exit code. Human output goes to `out`, diagnostics to `err`.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(args, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(args: &[String], out: &mut dyn Write) -> CliResult<()> {
    let (flags, overrides) = split_overrides(args)?;
    let cli = match Cli::try_parse_from(std::iter::once("lsa".to_string()).chain(flags)) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return Ok(());
            }
            return Err(CliError::new(EXIT_CONFIG, e.to_string().trim_end().to_string()));
        }
    };
    let started = Instant::now();
    match cli.command {
        Command::Report { run, compare } => {
            if !overrides.is_empty() {
                return Err(CliError::new(EXIT_CONFIG, "report takes no configuration overrides"));
            }
            cmd_report(&run, compare.as_deref(), out)
        }
        Command::Evaluate { common, input } => {
            if !overrides.is_empty() || common.config.is_some() || common.seed.is_some() {
                return Err(CliError::new(
                    EXIT_CONFIG,
                    "evaluate takes its configuration from the training run; drop --config, --seed and overrides",
                ));
            }
            let mut ctx = RunContext::new("evaluate", args, &common.out, RunConfig::default())?;
            cmd_evaluate(&mut ctx, &input, out)?;
            ctx.finish(started, out)
        }
        cmd => {
            let (name, common) = match &cmd {
                Command::Extract { common, .. } => ("extract", common),
                Command::BuildGraph { common, .. } => ("build-graph", common),
                Command::Synth { common } => ("synth", common),
                Command::Train { common, .. } => ("train", common),
                Command::Ablate { common, .. } => ("ablate", common),
                Command::Sweep { common, .. } => ("sweep", common),
                Command::Evaluate { .. } | Command::Report { .. } => unreachable!(),
            };
            let mut overrides = overrides;
            if let Some(seed) = common.seed {
                overrides.push(("seed".into(), seed.to_string()));
            }
            let config = RunConfig::load(common.config.as_deref(), &overrides)?;
            let mut ctx = RunContext::new(name, args, &common.out, config)?;
            if let Some(path) = &common.config {
                ctx.manifest.add_input(path)?;
            }
            match cmd {
                Command::Extract { input, .. } => cmd_extract(&mut ctx, &input, out)?,
                Command::BuildGraph { input, .. } => cmd_build_graph(&mut ctx, &input, out)?,
                Command::Synth { .. } => cmd_synth(&mut ctx, out)?,
                Command::Train {
                    input,
                    variant,
                    dump_sequences,
                    ..
                } => cmd_train(&mut ctx, &input, &variant, dump_sequences, out)?,
                Command::Ablate { input, variant, .. } => cmd_ablate(&mut ctx, &input, variant.as_deref(), out)?,
                Command::Sweep { input, param, values, .. } => cmd_sweep(&mut ctx, &input, &param, &values, out)?,
                Command::Evaluate { .. } | Command::Report { .. } => unreachable!(),
            }
            ctx.finish(started, out)
        }
    }
}

/// Separates configuration overrides (`--key value` or `--key=value` with an
/// unknown flag name) from the arguments clap understands.
fn split_overrides(args: &[String]) -> CliResult<(Vec<String>, Vec<(String, String)>)> {
    let mut flags = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--").filter(|b| !b.is_empty()) else {
            flags.push(arg.clone());
            continue;
        };
        let (name, inline) = match body.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (body, None),
        };
        if KNOWN_FLAGS.contains(&name) {
            flags.push(arg.clone());
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .cloned()
                .ok_or_else(|| CliError::new(EXIT_CONFIG, format!("configuration key `{name}` needs a value")))?,
        };
        overrides.push((name.to_string(), value));
    }
    Ok((flags, overrides))
}

struct RunContext {
    dir: PathBuf,
    config: RunConfig,
    manifest: RunManifest,
    exec: RayonExecutor,
}

impl RunContext {
    fn new(command: &str, args: &[String], dir: &Path, config: RunConfig) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::failure(format!("{}: {e}", dir.display())))?;
        let exec = RayonExecutor::from_env();
        let mut manifest = RunManifest::new(command, args, &config);
        manifest.threads = exec.threads();
        Ok(RunContext {
            dir: dir.to_path_buf(),
            config,
            manifest,
            exec,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn artifact(&mut self, name: &str) -> CliResult<()> {
        Ok(self.manifest.add_artifact(&self.dir, name)?)
    }

    fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        io::write_json(&self.path(name), value)?;
        self.artifact(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| IoError::file(&p, e))?;
        self.artifact(name)
    }

    /// Reads a review file, records it as an input and reports rejections.
    fn reviews(&mut self, input: &Path, out: &mut dyn Write) -> CliResult<Vec<RawReview>> {
        let ParsedReviews { reviews, rejected } = io::read_reviews(input, self.config.corpus.format)?;
        self.manifest.reviews = Some(self.manifest.add_input(input)?);
        if !rejected.is_empty() {
            let _ = writeln!(
                out,
                "rejected {} record(s); first at line {}: {}",
                rejected.len(),
                rejected[0].line,
                rejected[0].reason
            );
            io::write_jsonl(&self.path("rejected.jsonl"), &rejected)?;
            self.artifact("rejected.jsonl")?;
        }
        if reviews.is_empty() {
            return Err(CliError::failure(format!("{}: no valid reviews", input.display())));
        }
        Ok(reviews)
    }

    fn finish(mut self, started: Instant, out: &mut dyn Write) -> CliResult<()> {
        self.manifest.wall_time_seconds = started.elapsed().as_secs_f64();
        let path = self.manifest.write(&self.dir)?;
        let _ = writeln!(out, "wrote {}", path.display());
        Ok(())
    }
}

/// What `evaluate` needs to rebuild a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub variant: String,
    pub n_users: usize,
    pub n_items: usize,
    pub n_aspects: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

#[derive(Serialize)]
struct LogLine<'a> {
    #[serde(flatten)]
    record: &'a EpochRecord,
    wall_time: f64,
}

#[derive(Serialize)]
struct SequenceDump<'a> {
    long_term: &'a lsa_core::model::LongTermSequences,
    /// Short-term sequences of the validation examples.
    short_term: Vec<(&'a lsa_core::selection::InterestSequence, &'a lsa_core::selection::InterestSequence)>,
}

fn cmd_extract(ctx: &mut RunContext, input: &Path, out: &mut dyn Write) -> CliResult<()> {
    let reviews = ctx.reviews(input, out)?;
    let mentions = io::extract_all(&reviews);
    let vocab = AspectVocabulary::build(&mentions, ctx.config.corpus.min_freq);
    io::write_jsonl(&ctx.path("mentions.jsonl"), &mentions)?;
    ctx.artifact("mentions.jsonl")?;
    ctx.write_json("vocabulary.json", &vocab)?;
    let _ = writeln!(
        out,
        "{} reviews, {} mentions, {} aspects with frequency >= {}",
        reviews.len(),
        mentions.len(),
        vocab.len(),
        ctx.config.corpus.min_freq
    );
    Ok(())
}

fn cmd_build_graph(ctx: &mut RunContext, input: &Path, out: &mut dyn Write) -> CliResult<()> {
    let reviews = ctx.reviews(input, out)?;
    let mentions = io::extract_all(&reviews);
    let vocab = AspectVocabulary::build(&mentions, ctx.config.corpus.min_freq);
    let entities = EntityIndex::from_reviews(&reviews);
    let graph = AspectGraph::build(&reviews, &mentions, &vocab, &entities);
    let snapshot = graph.to_snapshot();
    ctx.write_json("graph.json", &snapshot)?;
    ctx.write_json("vocabulary.json", &vocab)?;
    ctx.write_json("entities.json", &entities)?;
    let _ = writeln!(
        out,
        "graph: {} users, {} items, {} aspects, {} aspect edges, {} rated pairs",
        snapshot.n_users,
        snapshot.n_items,
        snapshot.n_aspects,
        snapshot.edges.len(),
        snapshot.ratings.len()
    );
    Ok(())
}

fn cmd_synth(ctx: &mut RunContext, out: &mut dyn Write) -> CliResult<()> {
    let corpus = generate(&ctx.config.synth)?;
    io::write_jsonl(&ctx.path("reviews.jsonl"), &corpus.reviews)?;
    ctx.artifact("reviews.jsonl")?;
    ctx.write_json("truth.json", &corpus.truth)?;
    let _ = writeln!(
        out,
        "generated {} reviews into {}",
        corpus.reviews.len(),
        ctx.path("reviews.jsonl").display()
    );
    Ok(())
}

struct Prepared {
    reviews: Vec<RawReview>,
    mentions: Vec<lsa_core::corpus::AspectMention>,
}

impl Prepared {
    fn corpus(&self) -> Corpus<'_> {
        Corpus {
            reviews: &self.reviews,
            mentions: &self.mentions,
        }
    }
}

fn load_corpus(ctx: &mut RunContext, input: &Path, out: &mut dyn Write) -> CliResult<Prepared> {
    let reviews = ctx.reviews(input, out)?;
    let mentions = io::extract_all(&reviews);
    Ok(Prepared { reviews, mentions })
}

/// Observer that appends one log line per epoch.
fn epoch_logger<'a>(log: &'a mut Vec<String>, started: Instant, out: &'a mut dyn Write) -> impl FnMut(&EpochRecord) + 'a {
    move |r: &EpochRecord| {
        let line = LogLine {
            record: r,
            wall_time: started.elapsed().as_secs_f64(),
        };
        log.push(serde_json::to_string(&line).expect("log line serializes"));
        let _ = writeln!(out, "epoch {:>3}  train_mse {:.4}  val_mse {:.4}", r.epoch, r.train_mse, r.val_mse);
    }
}

fn write_log(ctx: &mut RunContext, name: &str, lines: &[String]) -> CliResult<()> {
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    ctx.write_text(name, &text)
}

fn cmd_train(ctx: &mut RunContext, input: &Path, variant: &str, dump: bool, out: &mut dyn Write) -> CliResult<()> {
    let variant: Variant = variant.parse()?;
    let prepared = load_corpus(ctx, input, out)?;
    let config = ctx.config.train_config();
    let (train_idx, test_idx) = split_indices(prepared.reviews.len(), ctx.config.evaluation.test_ratio, config.seed)?;
    let data = TrainData::from_reviews(&prepared.reviews, &prepared.mentions, &train_idx, config.min_freq);
    let started = Instant::now();
    let mut log = Vec::new();
    let outcome = {
        let mut observer = epoch_logger(&mut log, started, out);
        train(&data, &config, variant, &ctx.exec, &mut observer)?
    };
    write_log(ctx, TRAIN_LOG_FILE, &log)?;
    let bytes = outcome.model.params.to_checkpoint_bytes();
    let p = ctx.path(CHECKPOINT_FILE);
    fs::write(&p, bytes).map_err(|e| IoError::file(&p, e))?;
    ctx.artifact(CHECKPOINT_FILE)?;
    let info = ModelInfo {
        variant: variant.name().to_string(),
        n_users: data.entities.n_users(),
        n_items: data.entities.n_items(),
        n_aspects: data.vocab.len(),
        n_train: data.train.len(),
        n_test: test_idx.len(),
        best_epoch: outcome.best_epoch,
        best_val_mse: outcome.best_val_mse,
    };
    ctx.write_json(MODEL_FILE, &info)?;
    if dump {
        let long = outcome.model.long_term_sequences(&data.context)?;
        let dump = SequenceDump {
            long_term: &long,
            short_term: outcome.validation.iter().map(|e| (&e.user_short, &e.item_short)).collect(),
        };
        ctx.write_json("sequences.json", &dump)?;
    }
    let _ = writeln!(
        out,
        "best epoch {} with validation MSE {:.4}; checkpoint {}",
        outcome.best_epoch,
        outcome.best_val_mse,
        ctx.path(CHECKPOINT_FILE).display()
    );
    Ok(())
}

fn cmd_evaluate(ctx: &mut RunContext, run_dir: &Path, out: &mut dyn Write) -> CliResult<()> {
    let train_manifest = read_manifest(run_dir)?;
    if train_manifest.command != "train" {
        return Err(CliError::new(
            EXIT_CONFIG,
            format!("{} is a `{}` run, not a `train` run", run_dir.display(), train_manifest.command),
        ));
    }
    let info: ModelInfo = io::read_json(&run_dir.join(MODEL_FILE))?;
    let ckpt_path = run_dir.join(CHECKPOINT_FILE);
    let bytes = fs::read(&ckpt_path).map_err(|e| IoError::file(&ckpt_path, e))?;
    let reviews_path = train_manifest
        .reviews
        .clone()
        .ok_or_else(|| CliError::new(EXIT_MISSING, format!("{}: manifest names no review file", run_dir.display())))?;
    let reviews_path = PathBuf::from(reviews_path);
    let expected = train_manifest.inputs.get(&reviews_path.display().to_string()).cloned();
    ctx.config = train_manifest.config.clone();
    ctx.manifest.config = ctx.config.clone();
    ctx.manifest.seed = ctx.config.training.seed;
    ctx.manifest.add_input(&run_dir.join(MANIFEST_FILE))?;
    ctx.manifest.add_input(&ckpt_path)?;
    let prepared = load_corpus(ctx, &reviews_path, out)?;
    if expected.is_some() && ctx.manifest.inputs.get(&reviews_path.display().to_string()) != expected.as_ref() {
        return Err(CliError::failure(format!("{} changed since training", reviews_path.display())));
    }

    let config = ctx.config.train_config();
    let variant: Variant = info.variant.parse()?;
    let (train_idx, test_idx) = split_indices(prepared.reviews.len(), ctx.config.evaluation.test_ratio, config.seed)?;
    let data = TrainData::from_reviews(&prepared.reviews, &prepared.mentions, &train_idx, config.min_freq);
    if (data.entities.n_users(), data.entities.n_items(), data.vocab.len()) != (info.n_users, info.n_items, info.n_aspects) {
        return Err(CliError::failure("corpus no longer matches the trained model"));
    }
    let model = LsaModel::from_checkpoint(config.model.clone(), variant, info.n_users, info.n_items, info.n_aspects, &bytes)?;
    let test = interactions(&prepared.reviews, &test_idx, &data.entities);
    let report = evaluate(&model, &data.context, &test, &config, &ctx.exec)?;
    let (preds, _) = predict_all(&model, &data.context, &test, &ctx.exec)?;
    write_predictions(ctx, &data.entities, &test, &preds)?;
    write_metrics(ctx, &report)?;
    let _ = write!(out, "{}", report::metrics_table(&report));
    Ok(())
}

fn write_metrics(ctx: &mut RunContext, report: &MetricsReport) -> CliResult<()> {
    ctx.write_json(METRICS_FILE, report)?;
    ctx.write_text("metrics.txt", &report::metrics_table(report))
}

fn write_predictions(
    ctx: &mut RunContext,
    entities: &EntityIndex,
    test: &[lsa_core::model::Interaction],
    preds: &[f64],
) -> CliResult<()> {
    let p = ctx.path("predictions.csv");
    let csv_err = |e: csv::Error| CliError::failure(format!("{}: {e}", p.display()));
    let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
    w.write_record(["user", "item", "true_rating", "predicted_rating", "timestamp"])
        .map_err(csv_err)?;
    for (x, &y) in test.iter().zip(preds) {
        w.write_record([
            entities.user_name(x.user).to_string(),
            entities.item_name(x.item).to_string(),
            x.rating.to_string(),
            lsa_core::evaluation::clamp_rating(y).to_string(),
            x.timestamp.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| IoError::file(&p, e))?;
    ctx.artifact("predictions.csv")
}

fn cmd_ablate(ctx: &mut RunContext, input: &Path, variant: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let variants: Vec<Variant> = match variant {
        Some(v) => vec![v.parse()?],
        None => Variant::ALL.to_vec(),
    };
    let prepared = load_corpus(ctx, input, out)?;
    let config = ctx.config.train_config();
    let ratio = ctx.config.evaluation.test_ratio;
    let mut reports = Vec::new();
    let mut baseline = None;
    for v in &variants {
        let _ = writeln!(out, "variant {v}");
        let started = Instant::now();
        let mut log = Vec::new();
        let exp = {
            let mut observer = epoch_logger(&mut log, started, out);
            run_experiment(prepared.corpus(), &config, *v, ratio, &ctx.exec, &mut observer)?
        };
        write_log(ctx, &format!("train_log_{}.jsonl", v.name()), &log)?;
        if baseline.is_none() {
            let b = BiasBaseline::fit(
                &exp.data.train,
                exp.data.entities.n_users(),
                exp.data.entities.n_items(),
                BiasBaseline::DEFAULT_REGULARIZATION,
            )?;
            let preds: Vec<f64> = exp.test.iter().map(|x| b.predict(x)).collect();
            baseline = Some(compute_metrics(&exp.test, &preds)?);
        }
        reports.push(exp.report);
    }
    let baseline = baseline.expect("at least one variant ran");
    ctx.write_json("baseline.json", &baseline)?;
    if let [single] = reports.as_slice() {
        write_metrics(ctx, single)?;
    } else {
        ctx.write_json("ablation.json", &reports)?;
    }
    let table = report::ablation_table(&reports, Some((baseline.mse, baseline.mae, baseline.ndcg_at_10)));
    ctx.write_text("ablation.txt", &table)?;
    let _ = write!(out, "{table}");
    Ok(())
}

fn cmd_sweep(ctx: &mut RunContext, input: &Path, param: &str, values: &str, out: &mut dyn Write) -> CliResult<()> {
    let param: SweepParam = param.parse()?;
    let values: Vec<usize> = values
        .split(',')
        .map(|v| v.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::new(EXIT_CONFIG, format!("--values expects comma-separated integers, got `{values}`")))?;
    if values.is_empty() || values.contains(&0) {
        return Err(CliError::new(EXIT_CONFIG, "--values must be positive integers"));
    }
    let unique: BTreeSet<usize> = values.iter().copied().collect();
    if unique.len() != values.len() {
        return Err(CliError::new(EXIT_CONFIG, "--values contains duplicates"));
    }
    let prepared = load_corpus(ctx, input, out)?;
    let config = ctx.config.train_config();
    let rows = sweep(param, &values, prepared.corpus(), &config, ctx.config.evaluation.test_ratio, &ctx.exec)?;

    let p = ctx.path("sweep.csv");
    let csv_err = |e: csv::Error| CliError::failure(format!("{}: {e}", p.display()));
    let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
    w.write_record(["param", "value", "mse", "mae", "ndcg_at_10"]).map_err(csv_err)?;
    for r in &rows {
        w.write_record([param.to_string(), r.value.to_string(), r.mse.to_string(), r.mae.to_string(), r.ndcg_at_10.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| IoError::file(&p, e))?;
    ctx.artifact("sweep.csv")?;

    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.value as f64, r.mse)).collect();
    let svg = line_chart_svg(&format!("{param} sweep"), &param.to_string(), "test MSE", &points);
    ctx.write_text("sweep.svg", &svg)?;

    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.value.to_string(), report::fmt_metric(r.mse), report::fmt_metric(r.mae), report::fmt_metric(r.ndcg_at_10)])
        .collect();
    let table = report::aligned_table(&[&param.to_string(), "MSE", "MAE", "NDCG@10"], &table_rows);
    let _ = write!(out, "{table}");
    Ok(())
}

fn read_manifest(dir: &Path) -> CliResult<RunManifest> {
    RunManifest::read(dir).map_err(|e| CliError::new(EXIT_MISSING, format!("cannot read manifest: {e}")))
}

fn read_metrics(dir: &Path) -> CliResult<Option<MetricsReport>> {
    let p = dir.join(METRICS_FILE);
    if !p.exists() {
        return Ok(None);
    }
    io::read_json(&p).map(Some).map_err(|e| CliError::new(EXIT_MISSING, e.to_string()))
}

fn cmd_report(run: &Path, compare: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let manifest = read_manifest(run)?;
    let metrics = read_metrics(run)?;
    let _ = writeln!(
        out,
        "run {}  command `{}`  seed {}  wall time {:.1}s",
        run.display(),
        manifest.command,
        manifest.seed,
        manifest.wall_time_seconds
    );
    match compare {
        None => {
            if let Some(m) = &metrics {
                let _ = write!(out, "\n{}", report::metrics_table(m));
            }
            let ablation = run.join("ablation.txt");
            if let Ok(text) = fs::read_to_string(&ablation) {
                if metrics.is_none() {
                    let _ = write!(out, "\n{text}");
                }
            }
            if let Ok(text) = fs::read_to_string(run.join("sweep.csv")) {
                let _ = write!(out, "\n{text}");
            }
            let _ = write!(out, "\n{}", report::config_diff(&manifest.config, &RunConfig::default(), "default"));
        }
        Some(other) => {
            let other_manifest = read_manifest(other)?;
            let other_metrics = read_metrics(other)?;
            let (Some(a), Some(b)) = (metrics, other_metrics) else {
                return Err(CliError::new(EXIT_MISSING, "both runs need a metrics.json to compare"));
            };
            let _ = writeln!(out, "against {}  command `{}`", other.display(), other_manifest.command);
            let _ = write!(out, "\n{}", report::comparison_table("run", &a, "other", &b));
            let _ = write!(out, "\n{}", report::config_diff(&other_manifest.config, &manifest.config, "run"));
        }
    }
    Ok(())
}
