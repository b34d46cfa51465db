//! `specificity`: ingestion, feature extraction, cross-validation, training,
//! scoring and reporting for turn-level specificity experiments.

mod config;

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use specificity::corpus::synthetic::{synthetic_book, synthetic_lexicons, TRANSCRIPT_IDS};
use specificity::corpus::{generate_synthetic_corpus, load_book, load_transcripts, write_transcripts, CorpusError, SpecificityLabel, Turn};
use specificity::eval::{
    cross_validate, interrater_agreement, quadratic_weighted_kappa, render_coefficients, render_confusion,
    render_results_table, search_thresholds, ConfusionMatrix, CvReport, Metadata, DEFAULT_STEP,
};
use specificity::features::{parse_feature_sets, FeatureError, FeatureSchema, FeatureSet, Resources};
use specificity::lexicons::{LexiconBundle, MissingPolicy};
use specificity::ml::{rank_by_information_gain, RANKED_SETS};
use specificity::pipeline::{PipelineError, TrainedPipeline};
use specificity::textproc::Gazetteer;

use config::{ExperimentConfig, Overrides};

/// Printed by `--version`; the number is the pipeline/report format version.
const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (model and report format 1)");

#[derive(Parser)]
#[command(name = "specificity", version = VERSION, about = "Turn-level specificity prediction for discussion transcripts")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Folds evaluated in parallel; results are identical for any value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Use empty tables for missing lexicon files instead of failing.
    #[arg(long, global = true)]
    allow_missing_lexicons: bool,
    /// Keep each transcript inside one fold.
    #[arg(long, global = true)]
    group_by_transcript: bool,
    /// Fit n-gram vocabularies on the training split or the whole corpus.
    #[arg(long, global = true, value_parser = ["train", "corpus"])]
    fit_vocab: Option<String>,
    /// Drop word boundaries in the character model input.
    #[arg(long, global = true)]
    strict_charset: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate transcripts and write them in canonical form.
    Ingest {
        #[arg(long)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a feature matrix (dense CSV plus a sparse sidecar).
    Extract {
        /// Feature sets; defaults to the first experiment's.
        #[arg(long)]
        sets: Option<String>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        sparse_output: Option<PathBuf>,
    },
    /// Cross-validate every configured experiment.
    Cv {
        /// JSON report destination.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit one experiment on all labeled turns and save the pipeline.
    Train {
        /// Experiment name; defaults to the first.
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Label turns with a saved pipeline.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Grid-search two thresholds mapping external scores to labels.
    Thresholds {
        #[arg(long)]
        input: Vec<PathBuf>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Rank pronoun, named-entity and book features by information gain.
    IgReport {
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Agreement between the gold and second annotations.
    Kappa {
        #[arg(long)]
        input: Vec<PathBuf>,
    },
    /// Write a synthetic corpus, lexicons, book and config to a directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        n: usize,
    },
    /// Render a saved cross-validation report as tables.
    Report {
        input: PathBuf,
        #[arg(long, default_value_t = 12)]
        top: usize,
    },
}

/// Failure classes with their exit codes.
#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => Failure::Config(e.to_string()),
            PipelineError::Unlabeled(_) | PipelineError::Corpus(_) | PipelineError::Json(_) | PipelineError::Version { .. } => {
                Failure::Data(e.to_string())
            }
            PipelineError::Feature(FeatureError::EmptyConfig | FeatureError::UnknownSet(_) | FeatureError::EmbeddingsNeedJointModel) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(Failure::Config)?,
        None => ExperimentConfig::default(),
    };
    config.apply(&Overrides {
        seed: cli.seed,
        folds: cli.folds,
        jobs: cli.jobs,
        allow_missing_lexicons: cli.allow_missing_lexicons,
        group_by_transcript: cli.group_by_transcript,
        fit_vocab: cli.fit_vocab.clone(),
        strict_charset: cli.strict_charset,
    });
    config.validate().map_err(Failure::Config)?;
    Ok(config)
}

fn load_resources(config: &ExperimentConfig) -> Result<Resources, Failure> {
    let bundle = match &config.lexicon_dir {
        Some(dir) => {
            let policy = if config.allow_missing_lexicons {
                MissingPolicy::Warn
            } else {
                MissingPolicy::Error
            };
            LexiconBundle::load(dir, policy).map_err(|e| Failure::Data(e.to_string()))?
        }
        None => LexiconBundle::packaged(),
    };
    let mut resources = Resources::new(bundle);
    if let Some(path) = &config.gazetteer {
        let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let gazetteer = Gazetteer::from_tsv(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        resources = resources.with_gazetteer(gazetteer);
    }
    for (transcript, path) in &config.books {
        resources.add_book(transcript, load_book(path)?);
    }
    Ok(resources)
}

/// Turns from `inputs`, or from the configured corpus when none are given.
fn load_turns(inputs: &[PathBuf], config: &ExperimentConfig) -> Result<Vec<Turn>, Failure> {
    let paths = if inputs.is_empty() { &config.corpus[..] } else { inputs };
    if paths.is_empty() {
        return Err(Failure::Config("no transcript files given (use --input or `corpus` in the config)".into()));
    }
    let mut turns = Vec::new();
    let mut seen = BTreeSet::new();
    for path in paths {
        for t in load_transcripts(path)? {
            if !seen.insert(t.key()) {
                return Err(Failure::Data(format!("{}: duplicate turn {}", path.display(), t.key())));
            }
            turns.push(t);
        }
    }
    Ok(turns)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(io_failure(p))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_failure(dir))?;
    }
    fs::write(path, text).map_err(io_failure(path))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Ingest { input, output } => ingest(&config, input, output.as_deref()),
        Command::Extract {
            sets,
            output,
            sparse_output,
        } => extract(&config, sets.as_deref(), output, sparse_output.as_deref()),
        Command::Cv { output } => cv(&config, output.as_deref()),
        Command::Train { experiment, output } => train(&config, experiment.as_deref(), output),
        Command::Score { model, input, output } => score(&config, model, input, output.as_deref()),
        Command::Thresholds { input, step } => thresholds(&config, input, *step),
        Command::IgReport { top } => ig_report(&config, *top),
        Command::Kappa { input } => kappa(&config, input),
        Command::Synth { out, n } => synth(out, *n, cli.seed.unwrap_or(config.seed)),
        Command::Report { input, top } => report(input, *top),
    }
}

fn ingest(config: &ExperimentConfig, input: &[PathBuf], output: Option<&Path>) -> Result<(), Failure> {
    let turns = load_turns(input, config)?;
    let labeled = turns.iter().filter(|t| t.gold_label.is_some()).count();
    let transcripts: BTreeSet<&str> = turns.iter().map(|t| t.transcript_id.as_str()).collect();
    let mut out = open_output(output)?;
    write_transcripts(&turns, &mut out).map_err(|e| Failure::Runtime(e.to_string()))?;
    out.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    eprintln!("{} turns ({labeled} labeled) in {} transcripts", turns.len(), transcripts.len());
    Ok(())
}

fn extract(config: &ExperimentConfig, sets: Option<&str>, output: &Path, sparse: Option<&Path>) -> Result<(), Failure> {
    let sets = match sets {
        Some(s) => parse_feature_sets(s).map_err(|e| Failure::Config(e.to_string()))?,
        None => config
            .specs()
            .map_err(Failure::Config)?
            .first()
            .map(|s| s.handcrafted_sets())
            .ok_or_else(|| Failure::Config("no --sets given and no experiment configured".into()))?,
    };
    let turns = load_turns(&[], config)?;
    let resources = load_resources(config)?;
    let annotated = resources.annotate_all(&turns);
    let schema = FeatureSchema::fit(&sets, &annotated, resources.bundle.embeddings.dim(), "corpus")
        .map_err(|e| Failure::from(PipelineError::from(e)))?;
    let csv_out = fs::File::create(output).map_err(io_failure(output))?;
    let sparse_out: Box<dyn Write> = match sparse {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(io_failure(p))?)),
        None => Box::new(io::sink()),
    };
    schema
        .write_csv(&annotated, &resources.bundle, BufWriter::new(csv_out), sparse_out)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    eprintln!("{} turns x {} features", turns.len(), schema.n_features());
    Ok(())
}

fn cv(config: &ExperimentConfig, output: Option<&Path>) -> Result<(), Failure> {
    let started = Instant::now();
    let specs = config.specs().map_err(Failure::Config)?;
    if specs.is_empty() {
        return Err(Failure::Config("no [[experiment]] entries configured".into()));
    }
    let turns = load_turns(&[], config)?;
    let resources = load_resources(config)?;
    let options = config.cv_options();
    let mut reports = Vec::new();
    for spec in &specs {
        info!("cross-validating {}", spec.name);
        reports.push(cross_validate(&turns, &resources, spec, &options)?);
    }
    let report = CvReport::new(reports, Metadata::now(started));
    if let Some(path) = output {
        write_file(path, &(report.to_json() + "\n"))?;
    }
    print!("{}", render_results_table(&report.experiments));
    Ok(())
}

fn train(config: &ExperimentConfig, experiment: Option<&str>, output: &Path) -> Result<(), Failure> {
    let specs = config.specs().map_err(Failure::Config)?;
    let spec = match experiment {
        Some(name) => specs.iter().find(|s| s.name == name),
        None => specs.first(),
    }
    .ok_or_else(|| Failure::Config(format!("experiment {:?} not configured", experiment.unwrap_or("<first>"))))?;
    let turns: Vec<Turn> = load_turns(&[], config)?
        .into_iter()
        .filter(|t| t.gold_label.is_some())
        .collect();
    let resources = load_resources(config)?;
    let annotated = resources.annotate_all(&turns);
    let pipeline = TrainedPipeline::fit(spec, &annotated, &annotated, &resources.bundle, "all")?;
    write_file(output, &pipeline.to_json())?;
    eprintln!("trained {} on {} turns", spec.name, turns.len());
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    transcript_id: &'a str,
    turn_id: &'a str,
    label: SpecificityLabel,
    probabilities: [f64; 3],
}

#[derive(Serialize)]
struct Evaluation {
    qwk: Option<f64>,
    confusion: ConfusionMatrix,
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    predictions: Vec<Prediction<'a>>,
    /// Present only when every turn has a gold label.
    #[serde(skip_serializing_if = "Option::is_none")]
    evaluation: Option<Evaluation>,
}

fn score(config: &ExperimentConfig, model: &Path, input: &[PathBuf], output: Option<&Path>) -> Result<(), Failure> {
    let text = fs::read_to_string(model).map_err(|e| Failure::Data(format!("{}: {e}", model.display())))?;
    let pipeline = TrainedPipeline::from_json(&text)?;
    let turns = load_turns(input, config)?;
    let resources = load_resources(config)?;
    let annotated = resources.annotate_all(&turns);
    let mut predictions = Vec::with_capacity(turns.len());
    for at in &annotated {
        let p = pipeline.predict_proba(at, &resources.bundle)?;
        let best = (0..3).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        predictions.push(Prediction {
            transcript_id: &at.turn.transcript_id,
            turn_id: &at.turn.turn_id,
            label: SpecificityLabel::from_ordinal(best).expect("three labels"),
            probabilities: p,
        });
    }
    let gold: Option<Vec<SpecificityLabel>> = turns.iter().map(|t| t.gold_label).collect();
    let evaluation = match gold {
        Some(gold) if !gold.is_empty() => {
            let predicted: Vec<SpecificityLabel> = predictions.iter().map(|p| p.label).collect();
            let confusion = ConfusionMatrix::from_labels(&gold, &predicted).map_err(|e| Failure::Runtime(e.to_string()))?;
            Some(Evaluation {
                qwk: quadratic_weighted_kappa(&confusion).ok(),
                confusion,
            })
        }
        _ => None,
    };
    let out = ScoreOutput { predictions, evaluation };
    let mut w = open_output(output)?;
    serde_json::to_writer_pretty(&mut w, &out).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(())
}

fn thresholds(config: &ExperimentConfig, input: &[PathBuf], step: Option<f64>) -> Result<(), Failure> {
    let step = step.or(config.threshold_step).unwrap_or(DEFAULT_STEP);
    if !(step > 0.0 && step <= 1.0) {
        return Err(Failure::Config(format!("step must be in (0, 1], got {step}")));
    }
    let turns = load_turns(input, config)?;
    let (scores, labels): (Vec<f64>, Vec<SpecificityLabel>) = turns
        .iter()
        .filter_map(|t| Some((t.external_score?, t.gold_label?)))
        .unzip();
    if scores.len() < turns.len() {
        warn!("{} turns lack a score or gold label and are skipped", turns.len() - scores.len());
    }
    let (pair, kappa) = search_thresholds(&scores, &labels, step).map_err(|e| Failure::Data(e.to_string()))?;
    let predicted: Vec<SpecificityLabel> = scores
        .iter()
        .map(|&s| specificity::eval::apply_thresholds(s, pair).expect("validated scores"))
        .collect();
    let m = ConfusionMatrix::from_labels(&labels, &predicted).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("t1 = {:.4}\nt2 = {:.4}\nqwk = {kappa:.4}\n", pair.t1, pair.t2);
    print!("{}", render_confusion(&m));
    Ok(())
}

fn ig_report(config: &ExperimentConfig, top: usize) -> Result<(), Failure> {
    let turns: Vec<Turn> = load_turns(&[], config)?
        .into_iter()
        .filter(|t| t.gold_label.is_some())
        .collect();
    if turns.is_empty() {
        return Err(Failure::Data("no labeled turns".into()));
    }
    let resources = load_resources(config)?;
    let annotated = resources.annotate_all(&turns);
    let sets: BTreeSet<FeatureSet> = RANKED_SETS.into_iter().collect();
    let schema = FeatureSchema::fit(&sets, &annotated, resources.bundle.embeddings.dim(), "corpus")
        .map_err(|e| Failure::from(PipelineError::from(e)))?;
    let rows = schema
        .matrix(&annotated, &resources.bundle)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let labels: Vec<SpecificityLabel> = turns.iter().filter_map(|t| t.gold_label).collect();
    println!("{:<14}  {:<28}  {:>10}", "Set", "Feature", "IG (bits)");
    for set in RANKED_SETS {
        let ranked = rank_by_information_gain(&schema.names(), &rows, &labels, set)
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        for (name, ig) in ranked.into_iter().take(top) {
            println!("{:<14}  {:<28}  {:>10.4}", set.as_str(), name, ig);
        }
    }
    Ok(())
}

fn kappa(config: &ExperimentConfig, input: &[PathBuf]) -> Result<(), Failure> {
    let turns = load_turns(input, config)?;
    let (a, b): (Vec<SpecificityLabel>, Vec<SpecificityLabel>) = turns
        .iter()
        .filter_map(|t| Some((t.gold_label?, t.second_label?)))
        .unzip();
    if a.is_empty() {
        return Err(Failure::Data("no turns carry both a gold and a second label".into()));
    }
    let k = interrater_agreement(&a, &b).map_err(|e| Failure::Data(e.to_string()))?;
    let m = ConfusionMatrix::from_labels(&a, &b).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("n = {}\nqwk = {k:.4}\n", a.len());
    print!("{}", render_confusion(&m));
    Ok(())
}

fn synth(out: &Path, n: usize, seed: u64) -> Result<(), Failure> {
    let turns = generate_synthetic_corpus(seed, n).map_err(|e| Failure::Config(e.to_string()))?;
    fs::create_dir_all(out.join("books")).map_err(io_failure(out))?;
    let mut corpus = Vec::new();
    write_transcripts(&turns, &mut corpus).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_file(&out.join("turns.jsonl"), &String::from_utf8(corpus).expect("utf-8 records"))?;
    synthetic_lexicons(seed)
        .write_dir(&out.join("lexicons"))
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    write_file(&out.join("books/book.json"), &synthetic_book().to_json())?;
    let mut toml = format!(
        "seed = {seed}\nfolds = 10\ncorpus = [\"turns.jsonl\"]\nlexicon_dir = \"lexicons\"\n\n[books]\n"
    );
    for id in TRANSCRIPT_IDS {
        toml.push_str(&format!("{id} = \"books/book.json\"\n"));
    }
    toml.push_str(
        "\n[[experiment]]\nsets = \"speciteller\"\nmodel = \"linear\"\n\
         \n[[experiment]]\nsets = \"speciteller+semantic+embeddings\"\nmodel = \"joint\"\nneural = { hidden = 50 }\n",
    );
    write_file(&out.join("experiment.toml"), &toml)?;
    eprintln!("wrote {} turns to {}", turns.len(), out.display());
    Ok(())
}

fn report(input: &Path, top: usize) -> Result<(), Failure> {
    let text = fs::read_to_string(input).map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
    let report = CvReport::from_json(&text)?;
    print!("{}", render_results_table(&report.experiments));
    for r in &report.experiments {
        println!("\n{} pooled confusion matrix", r.name);
        print!("{}", render_confusion(&r.pooled_confusion));
        if let Some(table) = render_coefficients(r, top) {
            println!();
            print!("{table}");
        }
    }
    Ok(())
}
