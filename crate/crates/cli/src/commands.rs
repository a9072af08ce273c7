//! Subcommand bodies. Each returns the process exit code or an error that
//! `main` maps to one.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bubble_audit::annotation::{
    kappa_between, BelowThreshold, KappaLevel, LabelLookup, LabelRecord, LabelStore, ResolutionPolicy, ResolvedLabels,
};
use bubble_audit::classifier::{cross_validate, train, ClassSetup, ClassifierModel, Featurizer, TrainConfig};
use bubble_audit::domain::{RunRecord, VideoRecord};
use bubble_audit::platform::read_catalog_videos;
use bubble_audit::record::read_records_dir;
use bubble_audit::report::{compare_table, write_report};
use bubble_audit::stats::{
    compare_studies, evaluate_hypotheses, ComparisonConfig, EvaluationConfig, Modality, ScoringConfig, StartAnchor,
    Verdict,
};
use bubble_audit::workflow::{execute_study, StudyConfig, CATALOG_FILE, RUNS_DIR, TRUTH_LABELS_FILE};
use num_rational::Ratio;

use crate::{
    config_error, BelowThresholdArg, ClassifyArgs, Cli, Command, CompareArgs, EvaluateArgs, KappaArgs, LabelPolicyArgs,
    LevelArg, SetupArg, TrainArgs,
};

pub fn dispatch(cli: Cli) -> Result<ExitCode> {
    let only = |flag: &str, set: bool, allowed: &str| {
        if set {
            Err(config_error(format!("--{flag} applies to `{allowed}` only")))
        } else {
            Ok(())
        }
    };
    if !matches!(cli.command, Command::Run) {
        only("config", cli.config.is_some(), "run")?;
        only("workers", cli.workers.is_some(), "run")?;
    }
    if !matches!(cli.command, Command::Run | Command::Train(_)) {
        only("seed", cli.seed.is_some(), "run` and `train")?;
    }
    match &cli.command {
        Command::Run => run(&cli),
        Command::Evaluate(a) => evaluate(a, cli.output.as_deref()),
        Command::Classify(a) => classify(a, cli.output.as_deref()),
        Command::Train(a) => train_model(a, cli.seed.unwrap_or(0), cli.output.as_deref()),
        Command::Kappa(a) => {
            only("output", cli.output.is_some(), "run`, `evaluate`, `classify`, `train` and `compare")?;
            kappa(a)
        }
        Command::Compare(a) => compare(a, cli.output.as_deref()),
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => StudyConfig::load(path).map_err(|e| config_error(e.to_string()))?,
        None => StudyConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    let out = cli.output.clone().unwrap_or_else(|| PathBuf::from("study"));
    let (_, manifest) = execute_study(&config, &out).map_err(|e| {
        if e.is_config() {
            config_error(e.to_string())
        } else {
            anyhow::Error::new(e)
        }
    })?;
    let failed = manifest.failed();
    println!("{}: {} runs, {} failed, written to {}", manifest.study_id, manifest.runs.len(), failed, out.display());
    for r in manifest.runs.iter().filter(|r| r.reason.is_some()) {
        eprintln!("run {} failed: {}", r.run_id, r.reason.as_deref().unwrap_or_default());
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// Parses `a/b`, an integer, or a decimal fraction exactly.
pub fn parse_ratio(s: &str) -> Result<Ratio<u64>> {
    let bad = || config_error(format!("`{s}` is not a fraction in (0, 1)"));
    let r = if let Some((n, d)) = s.split_once('/') {
        let (n, d): (u64, u64) = (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?);
        if d == 0 {
            return Err(bad());
        }
        Ratio::new(n, d)
    } else if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let num = int.checked_mul(den).and_then(|v| v.checked_add(frac.parse::<u64>().ok()?)).ok_or_else(bad)?;
        Ratio::new(num, den)
    } else {
        Ratio::from_integer(s.parse().map_err(|_| bad())?)
    };
    if r == Ratio::from_integer(0) || r >= Ratio::from_integer(1) {
        return Err(bad());
    }
    Ok(r)
}

fn policy(args: &LabelPolicyArgs) -> Result<ResolutionPolicy> {
    if !(0.0..=1.0).contains(&args.threshold) {
        bail!(config_error(format!("--threshold {} is outside [0, 1]", args.threshold)));
    }
    let below_threshold = match args.below_threshold {
        BelowThresholdArg::Neutral => BelowThreshold::Neutral,
        BelowThresholdArg::Discard => BelowThreshold::Discard,
    };
    Ok(ResolutionPolicy { promoting_threshold: args.threshold, below_threshold })
}

fn load_labels(path: &Path, policy: &ResolutionPolicy) -> Result<ResolvedLabels> {
    let store = LabelStore::load(path).with_context(|| format!("reading labels {}", path.display()))?;
    Ok(store.resolve_all(policy))
}

/// Run records of a study directory, or of a bare records directory.
fn load_records(study: &Path) -> Result<Vec<RunRecord>> {
    let dir = if study.join(RUNS_DIR).is_dir() { study.join(RUNS_DIR) } else { study.to_path_buf() };
    let records = read_records_dir(&dir).with_context(|| format!("reading run records in {}", dir.display()))?;
    if records.is_empty() {
        bail!("no run records in {}", dir.display());
    }
    Ok(records)
}

fn default_labels(study: &Path, given: &Option<PathBuf>) -> PathBuf {
    given.clone().unwrap_or_else(|| study.join(TRUTH_LABELS_FILE))
}

fn evaluate(args: &EvaluateArgs, output: Option<&Path>) -> Result<ExitCode> {
    if !(0.0..=1.0).contains(&args.max_missing) {
        bail!(config_error(format!("--max-missing {} is outside [0, 1]", args.max_missing)));
    }
    let start = if args.baseline_start { StartAnchor::Baseline } else { StartAnchor::FirstWatches };
    let config = EvaluationConfig {
        alpha: parse_ratio(&args.alpha)?,
        scoring: ScoringConfig { top_n: args.top_n, search_start: start, home_start: start, ..Default::default() },
        ..Default::default()
    };
    let records = load_records(&args.study)?;
    let labels = load_labels(&default_labels(&args.study, &args.labels), &policy(&args.policy)?)?;
    let ev = evaluate_hypotheses(&records, &labels, &config)?;

    let cov = &ev.coverage;
    if cov.missing_fraction() > args.max_missing {
        let worst: Vec<String> = cov.worst_missing(10).iter().map(|(v, n)| format!("{v} ({n} times)")).collect();
        bail!(
            "{} of {} scored items ({:.1}%) have no label, above --max-missing {}; most frequent: {}",
            cov.missing,
            cov.items,
            100.0 * cov.missing_fraction(),
            args.max_missing,
            worst.join(", ")
        );
    }
    if cov.missing > 0 {
        log::warn!("{} of {} scored items have no label and were skipped", cov.missing, cov.items);
    }
    for run in &ev.skipped_runs {
        log::warn!("run {run} did not complete and was left out");
    }

    let dir = output.map(Path::to_path_buf).unwrap_or_else(|| args.study.join("report"));
    let written = write_report(&ev, &dir, args.plots).with_context(|| format!("writing report to {}", dir.display()))?;
    let count = |v: Verdict| ev.verdicts.iter().filter(|x| x.verdict == v).count();
    println!(
        "{} verdicts: {} supported, {} refuted, {} n.s.d.; {} files in {}",
        ev.verdicts.len(),
        count(Verdict::Supported),
        count(Verdict::Refuted),
        count(Verdict::NoSignificantDifference),
        written.len(),
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn catalog_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(CATALOG_FILE)
    } else {
        path.to_path_buf()
    }
}

fn load_catalog(path: &Path) -> Result<Vec<VideoRecord>> {
    let path = catalog_path(path);
    let file = File::open(&path).with_context(|| format!("opening catalog {}", path.display()))?;
    read_catalog_videos(BufReader::new(file)).with_context(|| format!("reading catalog {}", path.display()))
}

fn classify(args: &ClassifyArgs, output: Option<&Path>) -> Result<ExitCode> {
    let Some(out) = output else {
        bail!(config_error("classify needs --output, the label table to append predictions to"));
    };
    let model = ClassifierModel::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let model_id = args.model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    let videos = load_catalog(&args.catalog)?;
    let mut store = if out.exists() {
        LabelStore::load(out).with_context(|| format!("reading labels {}", out.display()))?
    } else {
        LabelStore::new(Vec::new())?
    };

    let timestamp = store.next_timestamp();
    let (mut predicted, mut skipped) = (0, Vec::new());
    for video in &videos {
        let features = match model.featurizer.featurize(video, &[]) {
            Ok(f) => f,
            Err(e) => {
                skipped.push(e.to_string());
                continue;
            }
        };
        let p = model.predict(&features)?;
        store.push(LabelRecord::predicted(video.video_id.clone(), p.stance, p.confidence, &model_id).with_timestamp(timestamp))?;
        predicted += 1;
    }
    store.save(out).with_context(|| format!("writing labels {}", out.display()))?;
    for s in &skipped {
        eprintln!("skipped: {s}");
    }
    println!("{predicted} labels predicted, {} videos skipped, written to {}", skipped.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn train_model(args: &TrainArgs, seed: u64, output: Option<&Path>) -> Result<ExitCode> {
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("model.json"));
    let setup = match args.setup {
        SetupArg::BinaryNoNeutral => ClassSetup::BinaryNoNeutral,
        SetupArg::BinaryWithNeutral => ClassSetup::BinaryWithNeutral,
        SetupArg::ThreeClass => ClassSetup::ThreeClass,
    };
    let mut config = TrainConfig::default();
    if let Some(epochs) = args.epochs {
        if epochs == 0 {
            bail!(config_error("--epochs must be at least 1"));
        }
        config.epochs = epochs;
    }
    let base = match args.catalog.parent() {
        Some(parent) if !args.catalog.is_dir() => parent.to_path_buf(),
        _ => args.catalog.clone(),
    };
    let labels = load_labels(&default_labels(&base, &args.labels), &policy(&args.policy)?)?;
    let featurizer = Featurizer::default();

    let mut corpus = Vec::new();
    let mut unlabeled = 0;
    for video in load_catalog(&args.catalog)? {
        let LabelLookup::Stance(stance) = labels.lookup(&video.video_id) else {
            unlabeled += 1;
            continue;
        };
        match featurizer.featurize(&video, &[]) {
            Ok(v) => corpus.push((v, stance)),
            Err(e) => log::warn!("{e}"),
        }
    }
    if unlabeled > 0 {
        log::info!("{unlabeled} videos without a usable label left out");
    }
    if let Some(k) = args.folds {
        let report = cross_validate(&corpus, setup, featurizer, k, seed, &config)?;
        print!("{}\n{}", report.metrics_table(), report.confusion_table());
    }
    let model = train(&corpus, setup, featurizer, seed, &config)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    model.save(&out).with_context(|| format!("writing model {}", out.display()))?;
    println!("trained on {} videos, model written to {}", corpus.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn kappa(args: &KappaArgs) -> Result<ExitCode> {
    let store = LabelStore::load(&args.labels).with_context(|| format!("reading labels {}", args.labels.display()))?;
    let level = match args.level {
        LevelArg::Code => KappaLevel::Code,
        LevelArg::Stance => KappaLevel::Stance,
    };
    let r = kappa_between(&store, &args.annotator_a, &args.annotator_b, level)?;
    println!("annotators\t{}\t{}", r.annotator_a, r.annotator_b);
    println!("items\t{}", r.items);
    println!("observed_agreement\t{:.4}", r.observed_agreement);
    println!("kappa\t{:.4}", r.kappa);
    Ok(ExitCode::SUCCESS)
}

fn compare(args: &CompareArgs, output: Option<&Path>) -> Result<ExitCode> {
    let modality = Modality::parse(&args.modality)
        .ok_or_else(|| config_error(format!("unknown modality `{}` (search, recommendations, home)", args.modality)))?;
    let config = ComparisonConfig {
        modality,
        alpha: parse_ratio(&args.alpha)?,
        scoring: ScoringConfig { top_n: args.top_n, ..Default::default() },
        ..Default::default()
    };
    let policy = policy(&args.policy)?;
    let (ra, rb) = (load_records(&args.study_a)?, load_records(&args.study_b)?);
    let la = load_labels(&default_labels(&args.study_a, &args.labels_a), &policy)?;
    let lb = load_labels(&default_labels(&args.study_b, &args.labels_b), &policy)?;
    let report = compare_studies((&ra, &la), (&rb, &lb), &config)?;
    let table = compare_table(&report);
    match output {
        Some(path) => fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{table}"),
    }
    Ok(ExitCode::SUCCESS)
}
