//! Command-line front end: generate corpora, resolve them in batch or
//! incrementally against persisted state, and score the results.
//!
//! Every command prints a one-line JSON summary to stdout. Failures print a
//! one-line JSON error to stderr and exit nonzero.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use erld::corpus::{parse_corpus, read_entity_records, write_corpus, write_entities};
use erld::datagen::{generate, residents_rules, residents_schema, GeneratorConfig};
use erld::eval::{
    all_pairs_baseline, entity_labels, pairwise_metrics, read_labels_tsv, traversal_benefit,
    write_labels_tsv, PairMetrics,
};
use erld::matching::RuleSet;
use erld::pipeline::RunStats;
use erld::traversal::TraversalConfig;
use erld::{
    resolve_batch, resolve_incremental, Document, DocumentId, ResolutionState, ResolveConfig,
    SchemaConfig,
};

#[derive(Parser)]
#[command(name = "erld", version, about = "Entity resolution over linked document collections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic resident-document corpus with gold labels.
    Generate(GenerateArgs),
    /// Resolve a corpus from scratch and persist the resolution state.
    Resolve(ResolveArgs),
    /// Resolve new documents against an existing state directory.
    ResolveInc(ResolveIncArgs),
    /// Score predicted entities against gold labels, pair by pair.
    Evaluate(EvaluateArgs),
    /// Resolve one corpus under two rule sets and compare the metrics.
    Benefit(BenefitArgs),
    /// Resolve by evaluating every document pair: the quadratic reference.
    BaselineAllpairs(BaselineArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator settings as JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus output, one document per line.
    #[arg(long)]
    out: PathBuf,
    /// Gold labels output, one `document<TAB>entity` line per document.
    #[arg(long)]
    gold: PathBuf,
    /// Also write the generator's schema here.
    #[arg(long)]
    schema_out: Option<PathBuf>,
    /// Also write the generator's rule set here (traversal rules included).
    #[arg(long)]
    rules_out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    entities: Option<usize>,
}

#[derive(Args)]
struct ResolveArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    /// Corpus to resolve, one JSON document per line.
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory the resolution state is persisted into.
    #[arg(long)]
    state: PathBuf,
    /// Resolved entities output, one JSON entity per line.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    lsh_m: usize,
    #[arg(long, default_value_t = 6)]
    lsh_n: usize,
    #[arg(long, default_value_t = 7)]
    lsh_seed: u64,
    #[arg(long, default_value_t = 4)]
    max_steps: usize,
    #[arg(long, default_value_t = 10)]
    ust_threshold: usize,
}

#[derive(Args)]
struct ResolveIncArgs {
    /// State directory written by a previous resolve run.
    #[arg(long)]
    state: PathBuf,
    /// New documents, one JSON document per line.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted entities, as written by resolve.
    #[arg(long)]
    pred: PathBuf,
    /// Gold labels TSV.
    #[arg(long)]
    gold: PathBuf,
    /// Also write the metrics JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenefitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Rule set whose effect is being measured.
    #[arg(long)]
    rules_a: PathBuf,
    /// Rule set compared against.
    #[arg(long)]
    rules_b: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Score the baseline against these gold labels too.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    max_steps: usize,
    #[arg(long, default_value_t = 10)]
    ust_threshold: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Resolve(args) => run_resolve(args),
        Command::ResolveInc(args) => run_resolve_inc(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Benefit(args) => run_benefit(args),
        Command::BaselineAllpairs(args) => run_baseline(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", json!({ "error": err.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn read_docs(path: &Path, schema: &SchemaConfig) -> erld::Result<Vec<Document>> {
    parse_corpus(BufReader::new(File::open(path)?), schema)
}

fn write_entities_file(path: &Path, entities: &[erld::Entity]) -> erld::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_entities(&mut out, entities)?;
    out.flush()?;
    Ok(())
}

fn stats_json(stats: &RunStats) -> serde_json::Value {
    json!({
        "documents": stats.documents,
        "buckets": stats.buckets,
        "entities": stats.entities,
        "merges": stats.merges,
        "fresh_evaluations": stats.fresh_evaluations,
        "fresh_document_pairs": stats.fresh_document_pairs,
        "cache_hits": stats.cache_hits,
        "co_bucketed_document_pairs": stats.co_bucketed_document_pairs,
        "bucket_pair_budget": stats.bucket_pair_budget,
        "entities_read": stats.entities_read.len(),
        "wall_ms": stats.wall.as_millis() as u64,
    })
}

fn metrics_json(metrics: &PairMetrics) -> serde_json::Value {
    serde_json::to_value(metrics).expect("metrics serialize")
}

fn run_generate(args: GenerateArgs) -> erld::Result<()> {
    let mut config: GeneratorConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(entities) = args.entities {
        config.entities = entities;
    }

    let corpus = generate(&config);
    let mut out = BufWriter::new(File::create(&args.out)?);
    write_corpus(&mut out, &corpus.documents)?;
    out.flush()?;
    let mut gold = BufWriter::new(File::create(&args.gold)?);
    write_labels_tsv(&mut gold, &corpus.gold)?;
    gold.flush()?;
    if let Some(path) = &args.schema_out {
        std::fs::write(path, serde_json::to_string_pretty(&residents_schema())?)?;
    }
    if let Some(path) = &args.rules_out {
        std::fs::write(path, serde_json::to_string_pretty(&residents_rules(true))?)?;
    }

    println!(
        "{}",
        json!({
            "documents": corpus.documents.len(),
            "entities": corpus.entity_count,
            "link_only_entities": corpus.link_only.len(),
            "corpus": args.out,
            "gold": args.gold,
        })
    );
    Ok(())
}

fn run_resolve(args: ResolveArgs) -> erld::Result<()> {
    let schema = SchemaConfig::load(&args.schema)?;
    let rules = RuleSet::load(&args.rules, &schema)?;
    let docs = read_docs(&args.input, &schema)?;
    let config = ResolveConfig {
        traversal: TraversalConfig {
            max_steps: args.max_steps,
            ust_fanout_threshold: args.ust_threshold,
        },
        lsh_m: args.lsh_m,
        lsh_n: args.lsh_n,
        lsh_seed: args.lsh_seed,
        ..ResolveConfig::default()
    };
    let (state, stats) = resolve_batch(docs, &schema, &rules, &config)?;
    state.save(&args.state)?;
    write_entities_file(&args.out, &state.entities)?;
    println!("{}", stats_json(&stats));
    Ok(())
}

fn run_resolve_inc(args: ResolveIncArgs) -> erld::Result<()> {
    let mut state = ResolutionState::load(&args.state)?;
    let docs = read_docs(&args.input, &state.schema.clone())?;
    let stats = resolve_incremental(&mut state, docs)?;
    state.save(&args.state)?;
    write_entities_file(&args.out, &state.entities)?;
    println!("{}", stats_json(&stats));
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> erld::Result<()> {
    let records = read_entity_records(BufReader::new(File::open(&args.pred)?))?;
    let mut predicted: BTreeMap<DocumentId, String> = BTreeMap::new();
    for record in &records {
        for member in &record.members {
            predicted.insert(DocumentId::from(member.as_str()), record.entity_id.clone());
        }
    }
    let gold = read_labels_tsv(BufReader::new(File::open(&args.gold)?))?;
    let metrics = pairwise_metrics(&predicted, &gold)?;
    let report = metrics_json(&metrics);
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    println!("{report}");
    Ok(())
}

fn run_benefit(args: BenefitArgs) -> erld::Result<()> {
    let schema = SchemaConfig::load(&args.schema)?;
    let rules_a = RuleSet::load(&args.rules_a, &schema)?;
    let rules_b = RuleSet::load(&args.rules_b, &schema)?;
    let docs = read_docs(&args.corpus, &schema)?;
    let gold = read_labels_tsv(BufReader::new(File::open(&args.gold)?))?;
    let report = traversal_benefit(
        &docs,
        &schema,
        &rules_a,
        &rules_b,
        &ResolveConfig::default(),
        &gold,
    )?;
    println!(
        "{}",
        json!({
            "rules_a": metrics_json(&report.with_traversal),
            "rules_b": metrics_json(&report.without_traversal),
            "recall_gain": report.recall_gain,
            "precision_drop": report.precision_drop,
            "recall_strictly_higher": report.recall_strictly_higher,
            "rules_a_wall_ms": report.with_stats.wall.as_millis() as u64,
            "rules_b_wall_ms": report.without_stats.wall.as_millis() as u64,
        })
    );
    Ok(())
}

fn run_baseline(args: BaselineArgs) -> erld::Result<()> {
    let schema = SchemaConfig::load(&args.schema)?;
    let rules = RuleSet::load(&args.rules, &schema)?;
    let docs = read_docs(&args.input, &schema)?;
    let traversal = TraversalConfig {
        max_steps: args.max_steps,
        ust_fanout_threshold: args.ust_threshold,
    };
    let outcome = all_pairs_baseline(docs, &schema, &rules, &traversal)?;
    write_entities_file(&args.out, &outcome.entities)?;
    let metrics = match &args.gold {
        Some(path) => {
            let gold = read_labels_tsv(BufReader::new(File::open(path)?))?;
            Some(metrics_json(&pairwise_metrics(
                &entity_labels(&outcome.entities),
                &gold,
            )?))
        }
        None => None,
    };
    println!(
        "{}",
        json!({
            "entities": outcome.entities.len(),
            "evaluations": outcome.evaluations,
            "wall_ms": outcome.wall.as_millis() as u64,
            "metrics": metrics,
        })
    );
    Ok(())
}
