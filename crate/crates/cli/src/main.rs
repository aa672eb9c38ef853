//! `catmine` — command-line pipeline for mining interesting categorical
//! attributes from table corpora.
//!
//! Stages (each re-runnable from its on-disk artifacts):
//! ingest → samples → split → train → predict / evaluate / stats.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 convergence error.
//! Failures print a one-line JSON record on stderr.

use catmine_core::error::ErrorClass;
use catmine_core::ingest::{CorpusFormat, UnitsDictionary};
use catmine_core::measures::MeasureId;
use catmine_core::model::{FeatureMask, FEATURE_COUNT};
use catmine_core::svm::{GridSpec, SelectionRule, SolverOptions};
use catmine_core::{pipeline, sampler};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "catmine", version, about = "Mine interesting categorical attributes from table corpora")]
struct Cli {
    /// key = value config file; explicit flags win over config values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw inputs into the canonical corpus JSON
    Ingest(IngestArgs),
    /// Label every categorical attribute of a corpus (distant supervision)
    Samples(SamplesArgs),
    /// Desk calculator: the seven measures of one value distribution
    Features(FeaturesArgs),
    /// Stratified hold-out split plus balanced sub-training files
    Split(SplitArgs),
    /// Grid-searched training over feature combinations, final model selection
    Train(TrainArgs),
    /// Rank the categorical columns of a table by the trained model
    Predict(PredictArgs),
    /// Score a model against multi-evaluator assessments
    Evaluate(EvaluateArgs),
    /// Corpus statistics: categorical attributes per table
    Stats(StatsArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input files (canonical JSON or wiki markup)
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_parser = parse_format, default_value = "json")]
    format: CorpusFormat,
    /// Output corpus file
    #[arg(short, long)]
    output: PathBuf,
    /// Write warnings (line-delimited JSON) here instead of stderr
    #[arg(long)]
    warnings: Option<PathBuf>,
}

#[derive(Args)]
struct SamplesArgs {
    corpus: PathBuf,
    /// Output sample file (line-delimited JSON)
    #[arg(short, long)]
    output: PathBuf,
    /// Units dictionary (defaults to the built-in token set)
    #[arg(long)]
    units: Option<PathBuf>,
    /// Keep only the first occurrence of each (subject, attribute) pair
    #[arg(long)]
    dedup: bool,
    /// Also export the conventional sparse text format here
    #[arg(long)]
    sparse_out: Option<PathBuf>,
    #[arg(long)]
    warnings: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Value distribution, e.g. "USA:12,Spain:8,Germany:2"
    #[arg(long)]
    values: String,
    /// Emit a JSON object instead of the vector line
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SplitArgs {
    samples: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Held-out fraction per class
    #[arg(long)]
    test: Option<f64>,
    /// Number of balanced sub-training files
    #[arg(long)]
    subfiles: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also export sparse text files
    #[arg(long)]
    sparse: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of sub-training .jsonl files
    #[arg(long)]
    subfiles: PathBuf,
    #[arg(long)]
    testpos: PathBuf,
    #[arg(long)]
    testneg: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Grid preset: "default" (with refinement) or "coarse"
    #[arg(long, default_value = "default")]
    grid: String,
    /// Override the ν grid, comma-separated
    #[arg(long)]
    nu: Option<String>,
    /// Override the γ grid, comma-separated
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// "all" or a comma list of masks ("mCov+mIg", "118", ...)
    #[arg(long, default_value = "all")]
    combos: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for grid cells and combos
    #[arg(long)]
    jobs: Option<usize>,
    /// Model selection rule: "max-sum" (minimax, then sum) or "sum"
    #[arg(long)]
    selection: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Canonical corpus JSON (array or single table object)
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    units: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Assessment CSV: header row, then id,vote,vote,... with votes I/N/U
    #[arg(long)]
    assessments: PathBuf,
    /// Sample file providing features for the assessed ids
    #[arg(long)]
    samples: PathBuf,
    /// Agreement levels: "auto" (every strict majority up to y/y), a range
    /// like "5..9", or a comma list
    #[arg(long, default_value = "auto")]
    levels: String,
    /// Also write the machine-readable report here
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    corpus: PathBuf,
    #[arg(long)]
    units: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    match s {
        "json" => Ok(CorpusFormat::Json),
        "wikitext" => Ok(CorpusFormat::Wikitext),
        other => Err(format!("unknown format {other:?} (expected json or wikitext)")),
    }
}

// ---------------------------------------------------------------------------
// error plumbing

enum CliError {
    Core(catmine_core::Error),
    Usage(String),
}

impl From<catmine_core::Error> for CliError {
    fn from(e: catmine_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Convergence => 3,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => "usage",
                ErrorClass::Data => "data",
                ErrorClass::Convergence => "convergence",
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

fn main() {
    // die quietly when a downstream pager closes the pipe
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            emit_error("usage", &e.render().to_string().replace('\n', " "));
            std::process::exit(1);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            emit_error(e.kind(), &e.message());
            std::process::exit(e.exit_code());
        }
    }
}

fn emit_error(kind: &str, message: &str) {
    let record = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{record}");
}

// ---------------------------------------------------------------------------
// config file

#[derive(Default)]
struct Config(BTreeMap<String, String>);

impl Config {
    fn load(path: Option<&PathBuf>) -> Result<Config, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "config {}:{}: expected key = value",
                    path.display(),
                    line_no + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key {key}: bad value {raw:?}"))),
        }
    }
}

/// flag value wins, then config key, then the default
fn effective<T: std::str::FromStr>(
    flag: Option<T>,
    config: &Config,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    Ok(flag.or(config.get(key)?).unwrap_or(default))
}

// ---------------------------------------------------------------------------
// shared helpers

fn load_units(flag: Option<&PathBuf>, config: &Config) -> Result<UnitsDictionary, CliError> {
    let path = match flag {
        Some(p) => Some(p.clone()),
        None => config.get::<PathBuf>("units")?,
    };
    match path {
        Some(p) => Ok(UnitsDictionary::load(&p)?),
        None => Ok(UnitsDictionary::default_units()),
    }
}

fn emit_warnings(
    warnings: &[catmine_core::ingest::Warning],
    sink: Option<&PathBuf>,
) -> Result<(), CliError> {
    if warnings.is_empty() {
        return Ok(());
    }
    let mut buf = Vec::new();
    pipeline::write_warnings(&mut buf, warnings)
        .map_err(|e| CliError::usage(format!("warnings: {e}")))?;
    match sink {
        Some(path) => std::fs::write(path, buf)
            .map_err(|e| CliError::Core(catmine_core::Error::Io { path: path.clone(), source: e }))?,
        None => std::io::stderr()
            .write_all(&buf)
            .map_err(|e| CliError::usage(format!("stderr: {e}")))?,
    }
    Ok(())
}

fn parse_mask(spec: &str) -> Result<FeatureMask, CliError> {
    let spec = spec.trim();
    if let Ok(bits) = spec.parse::<u8>() {
        return FeatureMask::new(bits).map_err(CliError::from);
    }
    let mut bits = 0u8;
    for part in spec.split('+') {
        let part = part.trim();
        let slot = MeasureId::ALL
            .iter()
            .position(|m| {
                m.short_name().eq_ignore_ascii_case(part)
                    || m.long_name().eq_ignore_ascii_case(part)
            })
            .ok_or_else(|| CliError::usage(format!("unknown measure {part:?} in mask {spec:?}")))?;
        bits |= 1 << slot;
    }
    FeatureMask::new(bits).map_err(CliError::from)
}

fn parse_combos(spec: &str) -> Result<Vec<FeatureMask>, CliError> {
    if spec.trim() == "all" {
        return Ok(FeatureMask::all_combinations().collect());
    }
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_mask)
        .collect()
}

fn parse_f64_list(spec: &str, what: &str) -> Result<Vec<f64>, CliError> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad {what} value {s:?}")))
        })
        .collect()
}

fn parse_levels(spec: &str, evaluators: usize) -> Result<Vec<usize>, CliError> {
    let spec = spec.trim();
    if spec == "auto" {
        // every strict-majority level, mirroring the report's row structure
        return Ok((evaluators / 2 + 1..=evaluators).collect());
    }
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| CliError::usage("bad level range"))?;
        let hi: usize = hi.trim().parse().map_err(|_| CliError::usage("bad level range"))?;
        if lo > hi {
            return Err(CliError::usage("level range is empty"));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("bad level {s:?}")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// dispatch

fn run(cli: Cli) -> Result<(), CliError> {
    let config = Config::load(cli.config.as_ref())?;
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Samples(args) => cmd_samples(args, &config),
        Command::Features(args) => cmd_features(args),
        Command::Split(args) => cmd_split(args, &config),
        Command::Train(args) => cmd_train(args, &config),
        Command::Predict(args) => cmd_predict(args, &config),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Stats(args) => cmd_stats(args, &config),
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<(), CliError> {
    let (entries, warnings) = pipeline::ingest_files(&args.inputs, args.format)?;
    pipeline::write_corpus_json(&args.output, &entries)?;
    emit_warnings(&warnings, args.warnings.as_ref())?;
    println!(
        "{} tables -> {} ({} warnings)",
        entries.len(),
        args.output.display(),
        warnings.len()
    );
    Ok(())
}

fn cmd_samples(args: SamplesArgs, config: &Config) -> Result<(), CliError> {
    let units = load_units(args.units.as_ref(), config)?;
    let (samples, skipped, warnings) =
        pipeline::samples_from_corpus(&args.corpus, &units, args.dedup)?;
    sampler::save_samples_jsonl(&args.output, &samples)?;
    if let Some(sparse) = &args.sparse_out {
        let mut buf = Vec::new();
        sampler::write_samples_sparse(&mut buf, &samples)
            .map_err(|e| CliError::Core(catmine_core::Error::Io { path: sparse.clone(), source: e }))?;
        std::fs::write(sparse, buf)
            .map_err(|e| CliError::Core(catmine_core::Error::Io { path: sparse.clone(), source: e }))?;
    }
    let mut all_warnings = warnings;
    all_warnings.extend(skipped.into_iter().map(|s| catmine_core::ingest::Warning {
        table_id: s.table_id,
        reason: s.reason,
    }));
    emit_warnings(&all_warnings, args.warnings.as_ref())?;
    println!(
        "{} interesting + {} non-interesting -> {}",
        samples.interesting.len(),
        samples.non_interesting.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_features(args: FeaturesArgs) -> Result<(), CliError> {
    let value_set = pipeline::parse_value_spec(&args.values)?;
    let fv = catmine_core::measures::feature_vector_full(&value_set);
    if args.json {
        let named: BTreeMap<&str, f64> = MeasureId::ALL
            .iter()
            .map(|m| (m.long_name(), fv.values[m.slot()]))
            .collect();
        let record = serde_json::json!({
            "table_size": value_set.table_size(),
            "distinct": value_set.distinct(),
            "features": named,
            "vector": fv.values,
            "degenerate_slots": (0..FEATURE_COUNT)
                .filter(|s| fv.degenerate & (1 << s) != 0)
                .map(|s| MeasureId::ALL[s].long_name())
                .collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&record).unwrap());
    } else {
        let vector = fv
            .values
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join(", ");
        println!("[{vector}]");
        for m in MeasureId::ALL {
            let flag = if fv.degenerate & (1 << m.slot()) != 0 {
                "  (degenerate)"
            } else {
                ""
            };
            println!("{:>16}  {:.6}{}", m.long_name(), fv.values[m.slot()], flag);
        }
    }
    Ok(())
}

fn cmd_split(args: SplitArgs, config: &Config) -> Result<(), CliError> {
    let test = effective(args.test, config, "test_fraction", 0.25)?;
    let subfiles = effective(args.subfiles, config, "subfiles", 10)?;
    let seed = effective(args.seed, config, "seed", 42)?;
    let artifacts =
        pipeline::split_to_files(&args.samples, &args.out_dir, test, subfiles, seed, args.sparse)?;
    println!("train:    {}", artifacts.train.display());
    println!("test_pos: {}", artifacts.test_pos.display());
    println!("test_neg: {}", artifacts.test_neg.display());
    println!("subfiles: {} files", artifacts.subfiles.len());
    Ok(())
}

fn cmd_train(args: TrainArgs, config: &Config) -> Result<(), CliError> {
    let folds = effective(args.folds, config, "folds", 5)?;
    let seed = effective(args.seed, config, "seed", 42)?;
    let jobs = effective(args.jobs, config, "jobs", 0)?;
    let selection = match args
        .selection
        .or(config.get::<String>("selection")?)
        .unwrap_or_else(|| "max-sum".into())
        .as_str()
    {
        "max-sum" => SelectionRule::MaxThenSum,
        "sum" => SelectionRule::Sum,
        other => return Err(CliError::usage(format!("unknown selection rule {other:?}"))),
    };

    let nu_override = match args.nu.or(config.get::<String>("nu")?) {
        Some(s) => Some(parse_f64_list(&s, "nu")?),
        None => None,
    };
    let gamma_override = match args.gamma.or(config.get::<String>("gamma")?) {
        Some(s) => Some(parse_f64_list(&s, "gamma")?),
        None => None,
    };
    let mut grid = match args.grid.as_str() {
        "default" => GridSpec::default_grid(),
        "coarse" => GridSpec::coarse_grid(),
        other => return Err(CliError::usage(format!("unknown grid preset {other:?}"))),
    };
    if let Some(nu) = nu_override {
        grid = GridSpec::new(nu, grid.gamma_values.clone(), grid.folds)?;
    }
    if let Some(gamma) = gamma_override {
        grid = GridSpec::new(grid.nu_values.clone(), gamma, grid.folds)?;
    }
    grid.folds = folds;

    let masks = parse_combos(&args.combos)?;
    let options = SolverOptions::default();

    let work = || {
        pipeline::train_to_files(
            &args.subfiles,
            &args.testpos,
            &args.testneg,
            &masks,
            &grid,
            seed,
            &options,
            selection,
            &args.out_dir,
        )
    };
    let (artifacts, search) = if jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
        pool.install(work)?
    } else {
        work()?
    };

    let final_outcome = search.final_outcome();
    println!(
        "final model: mask {} (bits {}), subfile {}, nu {}, gamma {}",
        final_outcome.mask,
        final_outcome.mask.bits(),
        final_outcome.subfile,
        final_outcome.nu,
        final_outcome.gamma
    );
    println!(
        "held-out error: interesting {:.4}, non-interesting {:.4}",
        final_outcome.err_pos, final_outcome.err_neg
    );
    println!("model:     {}", artifacts.final_model.display());
    println!("cv report: {}", artifacts.cv_report.display());
    println!("selection: {}", artifacts.selection.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs, config: &Config) -> Result<(), CliError> {
    let units = load_units(args.units.as_ref(), config)?;
    let predictions = pipeline::predict_tables(&args.model, &args.table, &units)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&predictions).unwrap());
        return Ok(());
    }
    for table in &predictions {
        println!("{} ({})", table.table_id, table.subject);
        for (rank, column) in table.columns.iter().enumerate() {
            println!(
                "  {:>2}. {:<24} {:+.6}  {}",
                rank + 1,
                column.header,
                column.decision_value,
                match column.label {
                    catmine_core::model::Label::Interesting => "interesting",
                    catmine_core::model::Label::NonInteresting => "non-interesting",
                }
            );
        }
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let model = catmine_core::svm::load_model(&args.model)?;
    let samples = sampler::load_samples_jsonl(&args.samples)?;
    let matrix = catmine_core::eval::AssessmentMatrix::load_csv(&args.assessments)?;
    let levels = parse_levels(&args.levels, matrix.evaluators())?;
    let report = pipeline::evaluate_assessments(&model, &samples, &matrix, &levels)?;
    print!("{}", pipeline::render_evaluation_text(&report));
    if let Some(path) = &args.json {
        let mut buf = serde_json::to_vec_pretty(&report)
            .map_err(|e| CliError::usage(format!("report: {e}")))?;
        buf.push(b'\n');
        std::fs::write(path, buf)
            .map_err(|e| CliError::Core(catmine_core::Error::Io { path: path.clone(), source: e }))?;
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs, config: &Config) -> Result<(), CliError> {
    let units = load_units(args.units.as_ref(), config)?;
    let stats = pipeline::corpus_stats(&args.corpus, &units)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stats).unwrap());
        return Ok(());
    }
    println!("tables: {}", stats.tables);
    println!("categorical attributes per table:");
    for (count, tables) in &stats.histogram {
        println!("  {count}: {tables}");
    }
    println!(
        "tables with >= 1 categorical attribute: {:.1}%",
        stats.with_categorical_fraction * 100.0
    );
    println!("poisson fit: lambda = {:.3}, relative sse = {:.6}", stats.lambda, stats.relative_sse);
    Ok(())
}
