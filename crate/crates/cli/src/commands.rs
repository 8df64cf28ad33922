use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use urbanvqa_core::cot::{run_cot, HttpChatClient, HttpConfig, MockVerbalizer, TextGenerator};
use urbanvqa_core::dataset::{
    assign_images, jsonl_lines, plan_review_sample, read_corpus, read_jsonl, stats, write_review_csv, Deduper,
    ManifestBuilder, Ratios, ReviewRow, Split,
};
use urbanvqa_core::metrics::{deltas_table, JoinSummary};
use urbanvqa_core::qa::generate::{prepare_records, write_corpus};
use urbanvqa_core::{
    compare_runs, evaluate, join_predictions, synth, validate_metadata, CompositeCatalog, GenerationConfig,
    MetricReport, ParseConfig, Prediction, QAPair,
};

use crate::io::{create, ensure_distinct, open, read_metadata, sibling};
use crate::{ClientKind, Command, CotArgs, GenerateArgs};

/// Lines of a QA corpus held in memory at once by streaming commands.
const CHUNK: usize = 4096;

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { metadata } => validate(&metadata),
        Command::Generate(args) => generate(args),
        Command::Cot(args) => cot(args),
        Command::Split {
            corpus,
            ratios,
            seed,
            out_dir,
        } => split(&corpus, ratios, seed, &out_dir),
        Command::Stats { corpus, json } => {
            let stats = stats(open(&corpus)?).with_context(|| format!("reading {}", corpus.display()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                print!("{}", stats.to_table());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SampleReview {
            corpus,
            n,
            seed,
            cot,
            output,
        } => sample_review(&corpus, n, seed, cot.as_deref(), &output),
        Command::ParseEval {
            predictions,
            gold,
            output,
            csv,
            parse_config,
        } => parse_eval(&predictions, &gold, &output, csv.as_deref(), parse_config.as_deref()),
        Command::Compare { before, after, output } => compare(&before, &after, output.as_deref()),
        Command::Dedup { corpus, output } => dedup(&corpus, &output),
        Command::Synth { n, seed, output } => {
            let mut out = create(&output)?;
            for i in 0..n {
                writeln!(out, "{}", synth::scene(seed, i).to_json())?;
            }
            out.flush()?;
            log::info!("wrote {n} records to {}", output.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn validate(path: &Path) -> Result<ExitCode> {
    let mut seen = BTreeSet::new();
    let (mut valid, mut invalid) = (0usize, 0usize);
    for item in jsonl_lines(open(path)?) {
        let (line, text) = item?;
        let meta = match serde_json::from_str::<urbanvqa_core::SceneMetadata>(&text) {
            Ok(meta) => meta,
            Err(e) => {
                println!("line {line}: {e}");
                invalid += 1;
                continue;
            }
        };
        let report = validate_metadata(&meta);
        let repeated = !seen.insert(meta.image_id.clone());
        if report.is_valid() && !repeated {
            valid += 1;
            continue;
        }
        invalid += 1;
        for v in &report.violations {
            println!("line {line} ({}): {v}", meta.image_id);
        }
        if repeated {
            println!("line {line} ({}): repeated image_id", meta.image_id);
        }
    }
    println!("{valid} valid, {invalid} invalid");
    Ok(if invalid == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let manifest_path = args.manifest.clone().unwrap_or_else(|| sibling(&args.output, ".manifest.json"));
    ensure_distinct(&[&args.metadata, &args.output, &manifest_path])?;
    let mut config = match &args.config {
        Some(path) => GenerationConfig::load(path)?,
        None => GenerationConfig::default(),
    };
    if !args.subtypes.is_empty() {
        config.enabled = args.subtypes.iter().copied().collect();
    }
    config.max_per_record.extend(args.caps.iter().copied());
    let catalog = match &args.catalog {
        Some(path) => CompositeCatalog::load(path)?,
        None => CompositeCatalog::default(),
    };

    let (records, rejected) = read_metadata(&args.metadata)?;
    let (records, skipped) = prepare_records(records);
    if records.is_empty() {
        bail!("no usable metadata records in {}", args.metadata.display());
    }
    let mut manifest = ManifestBuilder::new();
    let written = write_corpus(&records, &config, &catalog, args.seed, create(&args.output)?, |qa, line| {
        manifest.observe(qa, line)
    })
    .with_context(|| format!("writing {}", args.output.display()))?;
    let corpus_name = args.output.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let manifest = manifest.finish(vec![corpus_name], Some(args.seed));
    let mut out = create(&manifest_path)?;
    serde_json::to_writer_pretty(&mut out, &manifest)?;
    writeln!(out)?;
    out.flush()?;
    log::info!(
        "{written} QA pairs from {} records ({} skipped) -> {}",
        records.len(),
        rejected + skipped,
        args.output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cot(args: CotArgs) -> Result<ExitCode> {
    let quarantine_path = args
        .quarantine
        .clone()
        .unwrap_or_else(|| sibling(&args.output, ".quarantine.jsonl"));
    ensure_distinct(&[&args.corpus, &args.metadata, &args.output, &quarantine_path])?;
    let parse_config = load_parse_config(args.parse_config.as_deref())?;
    let client: Box<dyn TextGenerator> = match args.client {
        ClientKind::Mock => Box::new(MockVerbalizer),
        ClientKind::Http => {
            let mut config = HttpConfig::from_env()?;
            config.timeout = Duration::from_secs(args.timeout);
            config.retries = args.retries;
            config.temperature = args.temperature;
            Box::new(HttpChatClient::new(config))
        }
    };
    let (records, _) = read_metadata(&args.metadata)?;
    let metadata: HashMap<String, _> = records.into_iter().map(|m| (m.image_id.clone(), m)).collect();

    let mut out = create(&args.output)?;
    let mut quarantine = create(&quarantine_path)?;
    let (mut valid, mut invalid, mut orphans) = (0usize, 0usize, 0usize);
    let mut chunk: Vec<QAPair> = Vec::with_capacity(CHUNK);
    let mut flush = |chunk: &mut Vec<QAPair>| -> Result<()> {
        let stats = run_cot(chunk, &metadata, client.as_ref(), &parse_config, args.in_flight, |record| {
            if record.valid {
                writeln!(out, "{}", record.to_json())
            } else {
                log::warn!("{}: invalid rationale ({:?})", record.qa_id, record.issue);
                writeln!(quarantine, "{}", record.to_json())
            }
        })?;
        valid += stats.valid;
        invalid += stats.invalid;
        chunk.clear();
        Ok(())
    };
    for qa in read_jsonl::<QAPair, _>(open(&args.corpus)?) {
        let qa = qa.with_context(|| format!("reading {}", args.corpus.display()))?;
        if !metadata.contains_key(&qa.image_id) {
            log::warn!("{}: no metadata for image {}", qa.qa_id, qa.image_id);
            orphans += 1;
            continue;
        }
        chunk.push(qa);
        if chunk.len() == CHUNK {
            flush(&mut chunk)?;
        }
    }
    flush(&mut chunk)?;
    out.flush()?;
    quarantine.flush()?;
    println!("{valid} valid, {invalid} quarantined, {orphans} without metadata");
    Ok(ExitCode::SUCCESS)
}

fn split(corpus: &Path, ratios: Ratios, seed: u64, out_dir: &Path) -> Result<ExitCode> {
    let mut images = BTreeSet::new();
    for qa in read_jsonl::<QAPair, _>(open(corpus)?) {
        images.insert(qa.with_context(|| format!("reading {}", corpus.display()))?.image_id);
    }
    let assignment = assign_images(images, ratios, seed)?;
    let mut outputs = BTreeMap::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        let path = out_dir.join(format!("{split}.jsonl"));
        ensure_distinct(&[corpus, &path])?;
        outputs.insert(split, (create(&path)?, 0usize));
    }
    for item in jsonl_lines(open(corpus)?) {
        let (line, text) = item?;
        let qa: QAPair = serde_json::from_str(&text).with_context(|| format!("{}:{line}", corpus.display()))?;
        let bucket = assignment.bucket(&qa.image_id).expect("every image was assigned");
        let (out, n) = outputs.get_mut(&bucket).unwrap();
        writeln!(out, "{text}")?;
        *n += 1;
    }
    let images = assignment.image_counts();
    for (split, (mut out, n)) in outputs {
        out.flush()?;
        println!("{split}: {} images, {n} QA pairs", images[&split]);
    }
    Ok(ExitCode::SUCCESS)
}

fn sample_review(corpus: &Path, n: usize, seed: u64, cot: Option<&Path>, output: &Path) -> Result<ExitCode> {
    let counts = stats(open(corpus)?)?;
    let plan = plan_review_sample(&counts.categories, n, seed)?;
    let mut ordinals: BTreeMap<_, usize> = BTreeMap::new();
    let mut picked = Vec::with_capacity(n);
    for qa in read_jsonl::<QAPair, _>(open(corpus)?) {
        let qa = qa?;
        let ordinal = ordinals.entry(qa.category).or_default();
        if plan.get(&qa.category).is_some_and(|s| s.contains(ordinal)) {
            picked.push(qa);
        }
        *ordinal += 1;
    }
    let mut rationales: HashMap<String, String> = HashMap::new();
    if let Some(path) = cot {
        let wanted: BTreeSet<&str> = picked.iter().map(|qa| qa.qa_id.as_str()).collect();
        for record in read_jsonl::<urbanvqa_core::cot::CoTRecord, _>(open(path)?) {
            let record = record.with_context(|| format!("reading {}", path.display()))?;
            if wanted.contains(record.qa_id.as_str()) {
                rationales.entry(record.qa_id).or_insert(record.rationale);
            }
        }
    }
    let rows: Vec<ReviewRow> = picked
        .iter()
        .map(|qa| ReviewRow::new(qa, rationales.get(&qa.qa_id).map(String::as_str)))
        .collect();
    write_review_csv(create(output)?, &rows)?;
    log::info!("{} rows -> {}", rows.len(), output.display());
    Ok(ExitCode::SUCCESS)
}

fn load_parse_config(path: Option<&Path>) -> Result<ParseConfig> {
    Ok(match path {
        Some(p) => ParseConfig::load(p)?,
        None => ParseConfig::default(),
    })
}

fn parse_eval(
    predictions: &Path,
    gold: &Path,
    output: &Path,
    csv: Option<&Path>,
    parse_config: Option<&Path>,
) -> Result<ExitCode> {
    ensure_distinct(&[predictions, gold, output])?;
    let config = load_parse_config(parse_config)?;
    let gold = read_corpus(open(gold)?).with_context(|| format!("reading {}", gold.display()))?;
    let mut preds = Vec::new();
    for item in jsonl_lines(open(predictions)?) {
        let (line, text) = item?;
        match serde_json::from_str::<Prediction>(&text) {
            Ok(p) => preds.push(p),
            Err(e) => log::warn!("{}:{line}: {e}", predictions.display()),
        }
    }
    let (records, JoinSummary { missing, unmatched }) = join_predictions(&gold, &preds, &config);
    if missing > 0 {
        log::warn!("{missing} gold pairs have no prediction; scored as empty output");
    }
    if unmatched > 0 {
        log::warn!("{unmatched} predictions match no gold pair");
    }
    let report = evaluate(&records)?;
    let mut out = create(output)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    if let Some(path) = csv {
        let mut out = create(path)?;
        out.write_all(report.to_csv().as_bytes())?;
        out.flush()?;
    }
    print!("{}", report.to_table());
    Ok(ExitCode::SUCCESS)
}

fn compare(before: &Path, after: &Path, output: Option<&Path>) -> Result<ExitCode> {
    let load = |path: &Path| -> Result<MetricReport> {
        serde_json::from_reader(open(path)?).with_context(|| format!("reading {}", path.display()))
    };
    let deltas = compare_runs(&load(before)?, &load(after)?)?;
    print!("{}", deltas_table(&deltas));
    if let Some(path) = output {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &deltas)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn dedup(corpus: &Path, output: &Path) -> Result<ExitCode> {
    ensure_distinct(&[corpus, output])?;
    let mut filter = Deduper::default();
    let mut out = create(output)?;
    let mut kept = 0usize;
    for item in jsonl_lines(open(corpus)?) {
        let (line, text) = item?;
        let qa: QAPair = serde_json::from_str(&text).with_context(|| format!("{}:{line}", corpus.display()))?;
        if filter.admit(&qa.qa_id) {
            writeln!(out, "{text}")?;
            kept += 1;
        }
    }
    out.flush()?;
    println!("{kept} kept, {} duplicates dropped", filter.dropped);
    Ok(ExitCode::SUCCESS)
}
