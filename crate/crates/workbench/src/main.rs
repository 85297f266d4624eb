use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rrn_core::datagen::countries::{synthetic_grid_world, CountriesConfig, CountriesVersion};
use rrn_core::datagen::family::FamilyGenConfig;
use rrn_core::datagen::stream_rng;
use rrn_core::dsl::parse_literal;
use rrn_core::harness::{export_embeddings, fit, scored_loss, CorruptionMode, Monitor, TrainConfig, TrainState};
use rrn_core::kb::{Group, Literal, Origin, SampleKb};
use rrn_core::metrics::MetricsReport;
use rrn_core::reasoner::{entails, materialize, Semantics};
use rrn_core::rrn::{Hyperparams, Rrn};
use rrn_workbench::checkpoint;
use rrn_workbench::dataset::{
    generate_countries_dataset, generate_family_dataset, CountriesDatasetConfig, Dataset, FamilyDatasetConfig, Split,
    SplitSizes,
};
use rrn_workbench::io::{facts_to_text, load_facts, load_program, load_world, read_text, write_text};
use rrn_workbench::parallel::{corruption_experiment, evaluate, score_split};
use serde::{Deserialize, Serialize};

// Stream used for parameter initialization; sample streams use small indices.
const INIT_STREAM: u64 = 3 << 62;

#[derive(Debug, Parser, Serialize, Deserialize)]
#[command(name = "rrn", version, about = "Ontology reasoning with recursive reasoning networks")]
struct Cli {
    /// Output directory.
    #[arg(long, short, global = true, env = "RRN_OUT_DIR", default_value = "rrn-out")]
    out: PathBuf,
    /// Samples processed concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// More log output (repeatable).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Generate a benchmark dataset.
    #[command(subcommand)]
    Generate(Generate),
    /// Decide a single query against an ontology and a database.
    Reason(ReasonArgs),
    /// Write the least model of an ontology and a database.
    Materialize(MaterializeArgs),
    /// Train a model on a dataset; the output directory holds the checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Run the missing-fact or conflicting-fact experiment.
    Corrupt(CorruptArgs),
    /// Write the final embeddings of one sample as TSV.
    ExportEmbeddings(ExportArgs),
    /// Re-run the command recorded in a run.json file.
    Replay { config: PathBuf },
}

#[derive(Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Generate {
    Family(FamilyArgs),
    Countries(CountriesArgs),
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct FamilyArgs {
    /// Training samples.
    #[arg(long)]
    samples: usize,
    /// Eval samples [default: samples / 10, at least 1].
    #[arg(long)]
    eval_samples: Option<usize>,
    /// Test samples [default: samples / 10, at least 1].
    #[arg(long)]
    test_samples: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 26)]
    max_people: usize,
    #[arg(long, default_value_t = 5)]
    max_depth: usize,
    #[arg(long, default_value_t = 5)]
    max_branching: usize,
    #[arg(long, default_value_t = 0.02)]
    stop_probability: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
enum Version {
    S1,
    S2,
    S3,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct CountriesArgs {
    #[arg(long = "task", value_enum, ignore_case = true, default_value = "s1")]
    task: Version,
    /// Training samples.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    /// World table (`country region subregion` and `neighbor a b` rows);
    /// without it a synthetic grid world is used.
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long, default_value_t = 10, conflicts_with = "world")]
    grid_cols: usize,
    #[arg(long, default_value_t = 6, conflicts_with = "world")]
    grid_rows: usize,
    /// Countries in each held-out set.
    #[arg(long, default_value_t = 20)]
    test_size: usize,
    /// Countries dropped per training sample.
    #[arg(long, default_value_t = 20)]
    train_drop: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SemanticsArg {
    Plain,
    Cwa,
    Lcwa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MonitorArg {
    /// Mean eval loss.
    Loss,
    /// Micro F1 of inferable relation queries; eval loss while it is zero.
    F1,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct ReasonArgs {
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    facts: PathBuf,
    /// A ground literal such as `isAt(apple,kitchen)` or `-human(apple)`.
    #[arg(long, allow_hyphen_values = true)]
    query: String,
    #[arg(long, value_enum, default_value = "cwa")]
    semantics: SemanticsArg,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct MaterializeArgs {
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    facts: PathBuf,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct HyperArgs {
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Passes over the facts.
    #[arg(long, default_value_t = 8)]
    passes: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    negative_ratio: usize,
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
    #[arg(long, default_value_t = 1_000_000)]
    capacity: usize,
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
}

impl HyperArgs {
    fn resolve(&self) -> Hyperparams {
        Hyperparams {
            dim: self.dim,
            hidden: self.hidden,
            passes: self.passes,
            learning_rate: self.learning_rate,
            negative_ratio: self.negative_ratio,
            init_scale: self.init_scale,
            capacity: self.capacity,
            clip_norm: self.clip_norm,
        }
    }
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train on every labeled query instead of sampled negatives.
    #[arg(long)]
    full_universe: bool,
    /// Eval quantity for early stopping and best-model selection.
    #[arg(long, value_enum, default_value_t = MonitorArg::Loss)]
    monitor: MonitorArg,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Seed for initial embeddings [default: the training seed].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Missing,
    Conflict,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct CorruptArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Seed for corruptions and initial embeddings [default: the training seed].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Sample id [default: the first sample of the split].
    #[arg(long)]
    sample: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunFile {
    version: String,
    run: Cli,
}

/// Raised for invalid option combinations detected after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(mut cli: Cli) -> Result<()> {
    if let Command::Replay { config } = &cli.command {
        let text = read_text(config)?;
        let file: RunFile = serde_json::from_str(&text).with_context(|| format!("{}", config.display()))?;
        if matches!(file.run.command, Command::Replay { .. }) {
            bail!("{}: a replay cannot record another replay", config.display());
        }
        info!("replaying {}", config.display());
        cli = file.run;
    }
    if cli.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    resolve(&mut cli)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let record = RunFile { version: env!("CARGO_PKG_VERSION").to_string(), run: cli };
    let json = serde_json::to_string_pretty(&record)?;
    write_text(&record.run.out.join("run.json"), &(json + "\n"))?;
    let cli = &record.run;
    match &cli.command {
        Command::Generate(Generate::Family(a)) => generate_family(cli, a),
        Command::Generate(Generate::Countries(a)) => generate_countries(cli, a),
        Command::Reason(a) => reason(a),
        Command::Materialize(a) => materialize_cmd(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Corrupt(a) => corrupt(cli, a),
        Command::ExportEmbeddings(a) => export(cli, a),
        Command::Replay { .. } => unreachable!("replaced above"),
    }
}

/// Fills in defaults that depend on other options so run.json is complete.
fn resolve(cli: &mut Cli) -> Result<()> {
    match &mut cli.command {
        Command::Generate(Generate::Family(a)) => {
            let held = (a.samples / 10).max(1);
            a.eval_samples.get_or_insert(held);
            a.test_samples.get_or_insert(held);
        }
        Command::Train(a) => {
            a.hyper.resolve().validate().map_err(|e| usage(e.to_string()))?;
        }
        Command::Eval(EvalArgs { checkpoint, seed, .. })
        | Command::Corrupt(CorruptArgs { checkpoint, seed, .. })
        | Command::ExportEmbeddings(ExportArgs { checkpoint, seed, .. }) => {
            if seed.is_none() {
                *seed = Some(checkpoint::read_manifest(checkpoint)?.train.seed);
            }
        }
        _ => {}
    }
    Ok(())
}

fn generate_family(cli: &Cli, a: &FamilyArgs) -> Result<()> {
    let cfg = FamilyDatasetConfig {
        sizes: SplitSizes {
            train: a.samples,
            eval: a.eval_samples.expect("resolved"),
            test: a.test_samples.expect("resolved"),
        },
        generator: FamilyGenConfig {
            max_people: a.max_people,
            max_depth: a.max_depth,
            max_branching: a.max_branching,
            stop_probability: a.stop_probability,
        },
    };
    cfg.generator.validate().map_err(|e| usage(e.to_string()))?;
    let m = generate_family_dataset(&cli.out, &cfg, a.seed, cli.jobs)?;
    info!(
        "wrote family dataset to {} ({} train, {} eval, {} test samples)",
        cli.out.display(),
        m.splits.train.len(),
        m.splits.eval.len(),
        m.splits.test.len()
    );
    Ok(())
}

fn generate_countries(cli: &Cli, a: &CountriesArgs) -> Result<()> {
    let world = match &a.world {
        Some(p) => load_world(p)?,
        None => synthetic_grid_world(a.grid_cols, a.grid_rows),
    };
    let version = match a.task {
        Version::S1 => CountriesVersion::S1,
        Version::S2 => CountriesVersion::S2,
        Version::S3 => CountriesVersion::S3,
    };
    let cfg = CountriesDatasetConfig {
        train_samples: a.samples,
        generator: CountriesConfig { version, test_size: a.test_size, train_drop: a.train_drop },
    };
    let m = generate_countries_dataset(&cli.out, &world, &cfg, a.seed, cli.jobs)?;
    info!(
        "wrote countries {} dataset to {} ({} countries, {} train samples)",
        version.name(),
        cli.out.display(),
        world.countries.len(),
        m.splits.train.len()
    );
    Ok(())
}

fn reason(a: &ReasonArgs) -> Result<()> {
    let program = load_program(&a.ontology)?;
    let mut db = load_facts(&a.facts, &program.vocabulary)?;
    let lit: Literal = parse_literal(&a.query, &program.vocabulary, &mut db.roster)
        .map_err(|e| usage(format!("query `{}`: {e}", a.query)))?;
    let semantics = match a.semantics {
        SemanticsArg::Plain => Semantics::Plain,
        SemanticsArg::Cwa => Semantics::Cwa,
        SemanticsArg::Lcwa => Semantics::Lcwa,
    };
    let verdict = entails(&program, &db, &lit, semantics).map_err(|e| usage(format!("query `{}`: {e}", a.query)))?;
    let name = serde_json::to_value(a.semantics)?;
    println!(
        "{}\tsemantics={}",
        if verdict.entailed { "entailed" } else { "not entailed" },
        name.as_str().unwrap_or_default()
    );
    Ok(())
}

fn materialize_cmd(cli: &Cli, a: &MaterializeArgs) -> Result<()> {
    let program = load_program(&a.ontology)?;
    let db = load_facts(&a.facts, &program.vocabulary)?;
    let model = materialize(&program, &db);
    if model.inconsistent {
        warn!("database is inconsistent with the ontology ({} violations)", model.violations.len());
    }
    let mut out = SampleKb::new(model.roster.clone());
    for f in &model.derived {
        out.insert_literal(&Literal::positive(*f))?;
    }
    let path = cli.out.join("model.tsv");
    write_text(&path, &facts_to_text(&out, &program.vocabulary))?;
    info!("wrote {} facts to {}", out.num_facts(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct EpochRecord {
    epoch: u64,
    train_loss: f64,
    eval_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eval_f1: Option<f64>,
    improved: bool,
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let ds = Dataset::open(&a.data)?;
    let vocab = &ds.program.vocabulary;
    let train = ds.load_split_par(Split::Train, cli.jobs)?;
    let eval = ds.load_split_par(Split::Eval, cli.jobs)?;
    if train.is_empty() {
        bail!("{}: training split is empty", a.data.display());
    }
    let hp = a.hyper.resolve();
    let monitor = match a.monitor {
        MonitorArg::Loss => Monitor::Loss,
        MonitorArg::F1 => Monitor::F1,
    };
    let cfg = TrainConfig { epochs: a.epochs, patience: a.patience, seed: a.seed, full_universe: a.full_universe, monitor };
    let log_path = cli.out.join("train_log.jsonl");
    let mut state = if a.resume && checkpoint::exists(&cli.out) {
        let (m, state) = checkpoint::load(&cli.out, vocab)?;
        if m.hyperparams != hp || m.train.seed != cfg.seed || m.train.full_universe != cfg.full_universe || m.train.monitor != monitor {
            return Err(usage("--resume needs the hyperparameters, seed and monitor of the saved checkpoint"));
        }
        info!("resuming after epoch {}", state.epoch);
        state
    } else {
        if log_path.exists() {
            fs::remove_file(&log_path).with_context(|| format!("removing {}", log_path.display()))?;
        }
        let model = Rrn::new(vocab, hp, &mut stream_rng(a.seed, INIT_STREAM))?;
        info!("model has {} parameters", model.params.len());
        TrainState::new(model)
    };
    let jobs = cli.jobs;
    while (state.epoch as usize) < cfg.epochs && state.epochs_since_best < cfg.patience.max(1) {
        let one = TrainConfig { epochs: state.epoch as usize + 1, ..cfg };
        let (mut last, mut eval_loss, mut eval_f1) = (None, None, None);
        fit(
            &mut state,
            &train,
            &one,
            |m| {
                if eval.is_empty() {
                    return Ok(None);
                }
                let scored = score_split(m, &eval, cfg.seed, jobs)?;
                let loss = scored.iter().map(scored_loss).sum::<f64>() / scored.len().max(1) as f64;
                eval_loss = Some(loss);
                if monitor == Monitor::F1 {
                    let report = MetricsReport::from_scored(&scored, vocab);
                    eval_f1 = report.block(Origin::Inferable, Group::Relation).micro.f1;
                }
                Ok(Some(monitor.score(loss, eval_f1)))
            },
            |log, _| last = Some(*log),
        )?;
        let Some(log) = last else { break };
        info!(
            "epoch {} train loss {:.5} eval loss {}{}{}",
            log.epoch,
            log.train_loss,
            eval_loss.map_or("-".into(), |l| format!("{l:.5}")),
            eval_f1.map_or(String::new(), |f| format!(" eval F1 {f:.4}")),
            if log.improved { " *" } else { "" }
        );
        checkpoint::save(&cli.out, vocab, &state, &cfg)?;
        let rec = EpochRecord { epoch: log.epoch, train_loss: log.train_loss, eval_loss, eval_f1, improved: log.improved };
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .with_context(|| format!("opening {}", log_path.display()))?;
        writeln!(f, "{}", serde_json::to_string(&rec)?)?;
    }
    if !checkpoint::exists(&cli.out) {
        checkpoint::save(&cli.out, vocab, &state, &cfg)?;
    }
    info!("training stopped after {} epochs; checkpoint in {}", state.epoch, cli.out.display());
    Ok(())
}

fn open_model(checkpoint_dir: &Path, data: &Path) -> Result<(Dataset, Rrn<f32>)> {
    let ds = Dataset::open(data)?;
    let model = checkpoint::load_best(checkpoint_dir, &ds.program.vocabulary)?;
    Ok((ds, model))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))?;
    Ok(())
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let (ds, model) = open_model(&a.checkpoint, &a.data)?;
    let samples = ds.load_split_par(a.split, cli.jobs)?;
    let report = evaluate(&model, &samples, &ds.program.vocabulary, a.seed.expect("resolved"), cli.jobs)?;
    write_json(&cli.out.join("metrics.json"), &report)?;
    write_text(&cli.out.join("metrics.md"), &report.to_markdown())?;
    let fmt = |x: Option<f64>| x.map_or("-".into(), |v| format!("{v:.4}"));
    info!(
        "{} split: {} queries, accuracy {}, F1 {}",
        a.split,
        report.queries,
        fmt(report.total.accuracy),
        fmt(report.total.f1)
    );
    Ok(())
}

fn corrupt(cli: &Cli, a: &CorruptArgs) -> Result<()> {
    let (ds, model) = open_model(&a.checkpoint, &a.data)?;
    let samples = ds.load_split_par(a.split, cli.jobs)?;
    let mode = match a.mode {
        ModeArg::Missing => CorruptionMode::Missing,
        ModeArg::Conflict => CorruptionMode::Conflict,
    };
    let report = corruption_experiment(&model, &ds.program, &samples, mode, a.seed.expect("resolved"), cli.jobs)?;
    let name = serde_json::to_value(a.mode)?;
    let name = name.as_str().unwrap_or("corruption");
    write_json(&cli.out.join(format!("{name}.json")), &report)?;
    let mut md = format!(
        "# {name}\n\nrate: {} ({} of {})\n\n## baseline\n\n",
        report.rate.map_or("-".into(), |r| format!("{r:.4}")),
        report.hits,
        report.support
    );
    md.push_str(&report.baseline.to_markdown());
    md.push_str("\n## corrupted\n\n");
    md.push_str(&report.corrupted.to_markdown());
    write_text(&cli.out.join(format!("{name}.md")), &md)?;
    info!(
        "{name}: rate {} over {} samples, accuracy delta {}",
        report.rate.map_or("-".into(), |r| format!("{r:.4}")),
        report.support,
        report.accuracy_delta.map_or("-".into(), |d| format!("{d:+.4}"))
    );
    Ok(())
}

fn export(cli: &Cli, a: &ExportArgs) -> Result<()> {
    let (ds, model) = open_model(&a.checkpoint, &a.data)?;
    let entries = ds.entries(a.split);
    let index = match a.sample {
        Some(id) => entries
            .iter()
            .position(|e| e.id == id)
            .with_context(|| format!("no sample {id} in the {} split", a.split))?,
        None if entries.is_empty() => bail!("the {} split is empty", a.split),
        None => 0,
    };
    let sample = ds.load_sample(&entries[index])?;
    let rows = export_embeddings(&model, &sample, &ds.program.vocabulary, a.seed.expect("resolved"), index)?;
    let mut out = String::from("individual\tclasses");
    for k in 0..model.hp.dim {
        out.push_str(&format!("\te{k}"));
    }
    out.push('\n');
    for r in &rows {
        out.push_str(&r.individual);
        out.push('\t');
        out.push_str(if r.classes.is_empty() { "-" } else { "" });
        out.push_str(&r.classes.join(","));
        for v in &r.values {
            out.push_str(&format!("\t{v}"));
        }
        out.push('\n');
    }
    let path = cli.out.join("embeddings.tsv");
    write_text(&path, &out)?;
    info!("wrote {} embeddings to {}", rows.len(), path.display());
    Ok(())
}
