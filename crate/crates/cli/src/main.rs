use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use deid_core::config::{load_config, parse_strategy, split_command, PipelineConfig};
use deid_core::corpus::{load_annotations, load_corpus, read_annotations, write_corpus, write_iob2, Annotation, Tag, TaggedToken};
use deid_core::dataset_builder::{dataset_stats, expand_job_titles, label_texts, load_title_file};
use deid_core::deidentify::{deidentify_corpus, format_report, load_report};
use deid_core::eval::{corpus_kappa, evaluate_corpus, EvalMode, OverlapRule};
use deid_core::ner_adapter::{BackendKind, LabelMap};
use deid_core::tokenizer::{tokenize, TokenizerConfig};
use deid_core::Error;

/// De-identify free text and score de-identification output.
#[derive(Parser, Debug)]
#[command(name = "deid", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tokenize a corpus and write it as IOB2 with every tag `O`.
    Tokenize {
        /// Input corpus (`id<TAB>text` per line).
        #[arg(long = "in", value_name = "CORPUS")]
        input: PathBuf,
        /// Output IOB2 file.
        #[arg(long, value_name = "IOB2")]
        out: PathBuf,
        /// Split e-mail addresses at punctuation like ordinary text.
        #[arg(long)]
        no_email_aware: bool,
        /// Split URLs at punctuation like ordinary text.
        #[arg(long)]
        no_url_aware: bool,
    },
    /// Replace personal identifiers in a corpus and write a span report.
    Deidentify {
        /// Pipeline configuration (INI). Built-in defaults when omitted.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Input corpus.
        #[arg(long = "in", value_name = "CORPUS")]
        input: PathBuf,
        /// Redacted corpus.
        #[arg(long, value_name = "CORPUS")]
        out: PathBuf,
        /// Report TSV: doc_id, start, end, label, source, replacement.
        #[arg(long, value_name = "TSV")]
        report: PathBuf,
        /// Number of worker threads; output does not depend on it.
        #[arg(long, value_name = "N")]
        workers: Option<usize>,
        /// External NER command speaking the token/tag line protocol.
        #[arg(long, value_name = "COMMAND LINE")]
        ner_cmd: Option<String>,
        /// Backend label map (TSV: backend_label, LABEL or DROP).
        #[arg(long, value_name = "PATH")]
        label_map: Option<PathBuf>,
        /// Replacement style.
        #[arg(long, value_enum)]
        strategy: Option<Strategy>,
    },
    /// Score a de-identification report against gold annotations.
    Evaluate {
        /// Gold annotations TSV.
        #[arg(long, value_name = "TSV")]
        gold: PathBuf,
        /// Report TSV written by `deidentify`.
        #[arg(long, value_name = "TSV")]
        pred: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Strict)]
        mode: Mode,
        /// Fraction of a gold span a prediction must cover; 0 means any
        /// overlap, 1 means exact boundaries.
        #[arg(long, value_name = "F")]
        overlap_fraction: Option<f64>,
        /// Corpus the gold annotations refer to; enables offset and surface
        /// checks and fixes the set of evaluated documents.
        #[arg(long, value_name = "CORPUS")]
        corpus: Option<PathBuf>,
        /// Write the per-label scores as TSV.
        #[arg(long, value_name = "TSV")]
        out: Option<PathBuf>,
        /// Take the overlap fraction from this config's [evaluation] section.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
    },
    /// Token-level Cohen's kappa between two annotators.
    Kappa {
        /// Annotations of the first annotator.
        #[arg(long, value_name = "TSV")]
        a: PathBuf,
        /// Annotations of the second annotator.
        #[arg(long, value_name = "TSV")]
        b: PathBuf,
        /// Corpus both annotation files refer to.
        #[arg(long, value_name = "CORPUS")]
        corpus: PathBuf,
    },
    /// Weakly label job titles in raw texts to build an IOB2 training set.
    BuildDataset {
        /// Job titles, one per line.
        #[arg(long, value_name = "TXT")]
        titles: PathBuf,
        /// Input corpus.
        #[arg(long = "in", value_name = "CORPUS")]
        input: PathBuf,
        /// Output IOB2 file.
        #[arg(long, value_name = "IOB2")]
        out: PathBuf,
        /// Generic titles to leave untagged, one per line.
        #[arg(long, value_name = "TXT")]
        stoplist: Option<PathBuf>,
        /// Seniority prefix used to expand the title list.
        #[arg(long, default_value = "senior")]
        prefix: String,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Strict,
    Loose,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Strategy {
    Placeholder,
    Numbered,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_backend() { 2 } else { 1 };
        let mut message = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            let text = s.to_string();
            if !message.contains(&text) {
                message.push_str(": ");
                message.push_str(&text);
            }
            source = s.source();
        }
        Failure { code, message }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tokenize {
            input,
            out,
            no_email_aware,
            no_url_aware,
        } => run_tokenize(&input, &out, no_email_aware, no_url_aware),
        Command::Deidentify {
            config,
            input,
            out,
            report,
            workers,
            ner_cmd,
            label_map,
            strategy,
        } => run_deidentify(DeidArgs {
            config,
            input,
            out,
            report,
            workers,
            ner_cmd,
            label_map,
            strategy,
        }),
        Command::Evaluate {
            gold,
            pred,
            mode,
            overlap_fraction,
            corpus,
            out,
            config,
        } => run_evaluate(&gold, &pred, mode, overlap_fraction, corpus.as_deref(), out.as_deref(), config.as_deref()),
        Command::Kappa { a, b, corpus } => run_kappa(&a, &b, &corpus),
        Command::BuildDataset {
            titles,
            input,
            out,
            stoplist,
            prefix,
        } => run_build_dataset(&titles, &input, &out, stoplist.as_deref(), &prefix),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })
}

fn run_tokenize(input: &Path, out: &Path, no_email_aware: bool, no_url_aware: bool) -> CliResult {
    let config = TokenizerConfig {
        email_aware: !no_email_aware,
        url_aware: !no_url_aware,
    };
    let docs = load_corpus(input)?;
    let tagged: Vec<Vec<TaggedToken>> = docs
        .iter()
        .map(|d| {
            tokenize(&d.text, &config)
                .into_iter()
                .map(|token| TaggedToken { token, tag: Tag::O })
                .collect()
        })
        .collect();
    write_iob2(out, &tagged)?;
    Ok(())
}

struct DeidArgs {
    config: Option<PathBuf>,
    input: PathBuf,
    out: PathBuf,
    report: PathBuf,
    workers: Option<usize>,
    ner_cmd: Option<String>,
    label_map: Option<PathBuf>,
    strategy: Option<Strategy>,
}

fn run_deidentify(args: DeidArgs) -> CliResult {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    let pipeline = &mut config.pipeline;
    if let Some(line) = &args.ner_cmd {
        let argv = split_command(line).ok_or_else(|| Failure {
            code: 1,
            message: format!("--ner-cmd: cannot split command line {line:?}"),
        })?;
        if let BackendKind::Builtin { gazetteers } = &mut pipeline.backend.kind {
            pipeline.recognizers.lists.append(gazetteers);
        }
        pipeline.backend.kind = BackendKind::External { command: argv };
    }
    if let Some(path) = &args.label_map {
        pipeline.backend.label_map = LabelMap::load(path)?;
    }
    if let Some(s) = args.strategy {
        let name = match s {
            Strategy::Placeholder => "placeholder",
            Strategy::Numbered => "numbered",
        };
        pipeline.strategy = parse_strategy(name).expect("both strategy names are known");
    }
    let workers = args.workers.unwrap_or(config.workers);
    if workers == 0 {
        return Err(Failure {
            code: 1,
            message: "--workers must be at least 1".into(),
        });
    }

    let docs = load_corpus(&args.input)?;
    let outcomes = deidentify_corpus(&docs, &config.pipeline, workers)?;
    let mut redacted = Vec::with_capacity(docs.len());
    let mut reports = Vec::with_capacity(docs.len());
    let mut worst = 0u8;
    for (doc, outcome) in docs.iter().zip(outcomes) {
        match outcome {
            Ok((d, r)) => {
                redacted.push(d);
                reports.push(r);
            }
            Err(e) => {
                let f = Failure::from(e);
                eprintln!("error: document {:?}: {}", doc.id, f.message);
                worst = worst.max(f.code);
            }
        }
    }
    write_corpus(&args.out, &redacted)?;
    write_text(&args.report, &format_report(&reports))?;
    if worst == 0 {
        return Ok(());
    }
    Err(Failure {
        code: worst,
        message: format!(
            "{} of {} document(s) could not be de-identified",
            docs.len() - redacted.len(),
            docs.len()
        ),
    })
}

fn run_evaluate(
    gold_path: &Path,
    pred_path: &Path,
    mode: Mode,
    overlap_fraction: Option<f64>,
    corpus: Option<&Path>,
    out: Option<&Path>,
    config: Option<&Path>,
) -> CliResult {
    let rule = match (overlap_fraction, config) {
        (Some(f), _) => OverlapRule::from_fraction(f)?,
        (None, Some(path)) => load_config(path)?.overlap,
        (None, None) => OverlapRule::Any,
    };
    let predicted = load_report(pred_path)?;
    let mut gold: BTreeMap<String, Vec<Annotation>> = BTreeMap::new();
    let anns = match corpus {
        Some(path) => {
            let docs = load_corpus(path)?;
            for d in &docs {
                gold.insert(d.id.clone(), Vec::new());
            }
            load_annotations(gold_path, &docs)?
        }
        None => {
            for id in predicted.keys() {
                gold.insert(id.clone(), Vec::new());
            }
            read_annotations(gold_path)?
        }
    };
    for a in anns {
        gold.entry(a.doc_id.clone()).or_default().push(a);
    }
    let mode = match mode {
        Mode::Strict => EvalMode::Strict,
        Mode::Loose => EvalMode::Loose,
    };
    let table = evaluate_corpus(&gold, &predicted, mode, rule)?;
    if let Some(path) = out {
        write_text(path, &table.to_tsv())?;
    }
    print!("{}", table.render());
    Ok(())
}

fn run_kappa(a: &Path, b: &Path, corpus: &Path) -> CliResult {
    let docs = load_corpus(corpus)?;
    let ann_a = load_annotations(a, &docs)?;
    let ann_b = load_annotations(b, &docs)?;
    let k = corpus_kappa(&docs, &ann_a, &ann_b, &TokenizerConfig::default())?;
    println!("observed agreement\t{:.4}", k.pr_a);
    println!("chance agreement\t{:.4}", k.pr_e);
    println!("kappa\t{:.4}", k.kappa);
    Ok(())
}

fn run_build_dataset(titles: &Path, input: &Path, out: &Path, stoplist: Option<&Path>, prefix: &str) -> CliResult {
    let raw = load_title_file(titles)?;
    let mut list = expand_job_titles(&raw, prefix);
    if let Some(path) = stoplist {
        list = list.without(load_title_file(path)?);
    }
    let docs = load_corpus(input)?;
    let labeled: Vec<Vec<TaggedToken>> = label_texts(&docs, &list).into_iter().map(|(_, t)| t).collect();
    write_iob2(out, &labeled)?;
    let stats = dataset_stats(&labeled, 10);
    println!("titles\t{}", list.len());
    println!("documents\t{}", stats.documents);
    println!("tokens\t{}", stats.tokens);
    println!("entities\t{}", stats.entities);
    println!("distinct titles\t{}", stats.distinct_titles);
    for (title, n) in &stats.top {
        println!("  {n}\t{title}");
    }
    Ok(())
}
