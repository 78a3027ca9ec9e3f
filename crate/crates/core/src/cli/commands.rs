use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use super::config::{BackendKind, FileConfig};
use super::llm::parse_response_file;
use super::{
    CombineArgs, ConfigError, EvaluateArgs, ParseLlmArgs, PredictArgs, ProjectArgs, RunInfo, SplitArgs, SwitchArgs,
    SynthArgs, TrainArgs,
};
use crate::augment::{build_dataset, switch_corpus, CombinationSpec};
use crate::corpus::{
    load_corpus, provenance_path, save_corpus, split_train_validation, Corpus, CorpusFormat, DatasetTag, Language,
};
use crate::metrics::{evaluate as score_predictions, read_predictions, write_predictions, ConfusionMatrix, Prediction};
use crate::model::{
    self, load_checkpoint, save_checkpoint, FeatureConfig, LoraConfig, Task, TrainConfig, MAX_ADAPTER_EPOCHS,
    MAX_EPOCHS,
};
use crate::projection::{
    mark_sentence, project_labels, read_alignments, write_jsonl_records, AlignmentRecord, DiscardRecord, MarkerScheme,
    ProjectionOutcome,
};
use crate::synthetic::{generate_corpus, mock_dictionary};
use crate::translate::{
    translate_batch, DictionaryBackend, IdentityBackend, RemoteBackend, TranslationBackend, TranslationCache,
};
use crate::Error;

pub(super) struct Context {
    pub format: Option<CorpusFormat>,
    pub seed: u64,
    pub file: FileConfig,
}

impl Context {
    fn format_for(&self, path: &Path) -> CorpusFormat {
        self.format.unwrap_or_else(|| CorpusFormat::from_path(path))
    }

    fn load(&self, path: &Path) -> Result<Corpus, Error> {
        Ok(load_corpus(path, self.format_for(path))?)
    }

    fn save(&self, corpus: &mut Corpus, run: &RunInfo, path: &Path) -> Result<(), Error> {
        corpus.provenance.extend(run.provenance());
        Ok(save_corpus(corpus, path, self.format_for(path))?)
    }
}

/// `<path><suffix>`, e.g. `out.jsonl.discards.jsonl`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name: OsString = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub(super) fn split(ctx: &Context, args: SplitArgs) -> Result<(), Error> {
    let fraction = args.fraction.or(ctx.file.split.fraction).unwrap_or(0.1);
    let mut run = RunInfo::new("split", ctx.seed).settings(json!({ "fraction": fraction }));
    run.input("corpus", &args.input)?;
    let corpus = ctx.load(&args.input)?;
    let (mut train, mut validation) = split_train_validation(&corpus, fraction, ctx.seed)?;
    ctx.save(&mut train, &run, &args.output)?;
    ctx.save(&mut validation, &run, &args.validation_output)?;
    eprintln!(
        "split: {} training, {} validation sentences",
        train.len(),
        validation.len()
    );
    Ok(())
}

fn build_backend(
    kind: BackendKind,
    args: &ProjectArgs,
    file: &FileConfig,
    scheme: &MarkerScheme,
) -> Result<Box<dyn TranslationBackend>, Error> {
    if args.drop_markers && kind != BackendKind::Mock {
        return Err(ConfigError::Invalid("--drop-markers requires the mock backend".into()).into());
    }
    Ok(match kind {
        BackendKind::Identity => Box::new(IdentityBackend::new()),
        BackendKind::Mock => {
            let backend = match args.dictionary.as_ref().or(file.mt.dictionary.as_ref()) {
                Some(path) => DictionaryBackend::from_tsv(path)?,
                None => DictionaryBackend::from_entries(
                    mock_dictionary(&[args.tgt])
                        .into_iter()
                        .map(|(lang, src, tgt)| (Some(lang), src, tgt)),
                ),
            };
            if args.drop_markers {
                Box::new(backend.dropping_markers(scheme.clone()))
            } else {
                Box::new(backend)
            }
        }
        BackendKind::Remote => {
            let endpoint = args
                .endpoint
                .clone()
                .or_else(|| file.mt.endpoint.clone())
                .ok_or_else(|| ConfigError::Missing("the remote backend needs --endpoint or mt.endpoint".into()))?;
            Box::new(RemoteBackend::from_env(endpoint))
        }
    })
}

pub(super) fn project(ctx: &Context, args: ProjectArgs) -> Result<(), Error> {
    if args.src != Language::En {
        return Err(ConfigError::Invalid(format!("projection starts from English data, not {}", args.src)).into());
    }
    let scheme_text = args
        .scheme
        .clone()
        .or_else(|| ctx.file.mt.scheme.clone())
        .unwrap_or_else(|| "default".into());
    let scheme = MarkerScheme::parse(&scheme_text)?;
    let kind = args.backend.or(ctx.file.mt.backend).unwrap_or(BackendKind::Identity);
    let backend = build_backend(kind, &args, &ctx.file, &scheme)?;
    let parallelism = args.parallelism.or(ctx.file.mt.parallelism).unwrap_or(4);
    let cache_dir = args
        .cache_dir
        .clone()
        .or_else(|| ctx.file.mt.cache_dir.clone())
        .unwrap_or_else(|| PathBuf::from(".xlproject-cache"));
    let cache = TranslationCache::open(cache_dir)?;

    let mut run = RunInfo::new("project", ctx.seed).settings(json!({
        "src": args.src.code(),
        "tgt": args.tgt.code(),
        "backend": backend.id(),
        "scheme": scheme.to_string(),
    }));
    run.input("corpus", &args.input)?;
    let corpus = ctx.load(&args.input)?;

    // sentences that cannot be marked are discarded before translation
    let mut texts = Vec::new();
    let mut early: BTreeMap<usize, DiscardRecord> = BTreeMap::new();
    for (i, sentence) in corpus.iter().enumerate() {
        match mark_sentence(sentence, &scheme) {
            Ok(marked) => texts.push(marked.text),
            Err(reason) => {
                early.insert(
                    i,
                    DiscardRecord {
                        id: sentence.id.clone(),
                        reason,
                        translated_text: String::new(),
                    },
                );
            }
        }
    }
    let translations = if texts.is_empty() {
        Vec::new()
    } else {
        translate_batch(&texts, args.src, args.tgt, backend.as_ref(), &cache, parallelism)?
    };

    let mut translations = translations.into_iter();
    let mut projected = Vec::new();
    let mut alignments = Vec::new();
    let mut discards = Vec::new();
    for (i, sentence) in corpus.iter().enumerate() {
        if let Some(record) = early.remove(&i) {
            discards.push(record);
            continue;
        }
        let translated = translations.next().expect("one translation per marked sentence");
        match project_labels(sentence, &translated, &scheme, args.tgt)? {
            ProjectionOutcome::Projected(p) => {
                alignments.push(AlignmentRecord {
                    id: p.sentence.id.clone(),
                    source_id: sentence.id.clone(),
                    source_spans: p.source_spans,
                    target_spans: p.target_spans,
                });
                projected.push(p.sentence);
            }
            ProjectionOutcome::Discarded(reason) => discards.push(DiscardRecord {
                id: sentence.id.clone(),
                reason,
                translated_text: translated,
            }),
        }
    }

    let mut out = Corpus::from_sentences(projected)?;
    out.provenance
        .insert("project.discarded".into(), discards.len().to_string());
    ctx.save(&mut out, &run, &args.output)?;
    write_jsonl_records(&sidecar(&args.output, ".alignments.jsonl"), &alignments)?;
    write_jsonl_records(&sidecar(&args.output, ".discards.jsonl"), &discards)?;

    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &discards {
        *reasons.entry(d.reason.as_str()).or_default() += 1;
    }
    eprintln!(
        "project: {} projected, {} discarded {:?}",
        out.len(),
        discards.len(),
        reasons
    );
    Ok(())
}

pub(super) fn switch(ctx: &Context, args: SwitchArgs) -> Result<(), Error> {
    let alignment_path = args.alignments.clone().or_else(|| {
        let default = sidecar(&args.translated, ".alignments.jsonl");
        default.exists().then_some(default)
    });
    let mut run = RunInfo::new("switch", ctx.seed).settings(json!({ "alignments": alignment_path.is_some() }));
    run.input("source", &args.source)?;
    run.input("translated", &args.translated)?;
    let alignments = match &alignment_path {
        Some(path) => {
            run.input("alignments", path)?;
            Some(read_alignments(path)?)
        }
        None => None,
    };
    let source = ctx.load(&args.source)?;
    let translated = ctx.load(&args.translated)?;
    let (mut st, mut ts, stats) = switch_corpus(&source, &translated, alignments.as_deref());
    for corpus in [&mut st, &mut ts] {
        corpus.provenance.insert("switch.pairs".into(), stats.pairs.to_string());
        corpus
            .provenance
            .insert("switch.skipped".into(), stats.skipped.to_string());
        corpus
            .provenance
            .insert("switch.without_triggers".into(), stats.without_triggers.to_string());
    }
    ctx.save(&mut st, &run, &args.output_st)?;
    ctx.save(&mut ts, &run, &args.output_ts)?;
    eprintln!(
        "switch: {} pairs, {} switched, {} without triggers, {} skipped",
        stats.pairs,
        st.len(),
        stats.without_triggers,
        stats.skipped
    );
    Ok(())
}

pub(super) fn combine(ctx: &Context, args: CombineArgs) -> Result<(), Error> {
    let spec_text = args
        .combine
        .clone()
        .or_else(|| ctx.file.combine.spec.clone())
        .unwrap_or_else(|| "D_S".into());
    let spec = CombinationSpec::from_str(&spec_text)?;
    let mut run = RunInfo::new("combine", ctx.seed).settings(json!({ "spec": spec.to_string() }));
    let mut corpora = BTreeMap::new();
    for (tag, path) in &args.inputs {
        let tag = DatasetTag::from_str(tag).map_err(ConfigError::Invalid)?;
        if corpora.contains_key(&tag) {
            return Err(ConfigError::Invalid(format!("{tag} given more than once")).into());
        }
        if !spec.includes(tag) {
            eprintln!("combine: ignoring {tag}, which is not part of {spec}");
            continue;
        }
        run.input(tag.as_str(), path)?;
        corpora.insert(tag, ctx.load(path)?);
    }
    let mut dataset = build_dataset(&spec, &corpora)?;
    ctx.save(&mut dataset, &run, &args.output)?;
    eprintln!("combine: {} sentences from {spec}", dataset.len());
    Ok(())
}

fn train_config(ctx: &Context, args: &TrainArgs) -> TrainConfig {
    let t = &ctx.file.train;
    let lora_r = args.lora_r.or(t.lora_r);
    let lora_alpha = args.lora_alpha.or(t.lora_alpha);
    let lora = (lora_r.is_some() || lora_alpha.is_some()).then(|| {
        let d = LoraConfig::default();
        LoraConfig {
            rank: lora_r.unwrap_or(d.rank),
            alpha: lora_alpha.unwrap_or(d.alpha),
        }
    });
    let default_epochs = if lora.is_some() { MAX_ADAPTER_EPOCHS } else { MAX_EPOCHS };
    let defaults = TrainConfig::default();
    TrainConfig {
        lr: args.lr.or(t.lr).unwrap_or(defaults.lr),
        batch_size: args.batch_size.or(t.batch_size).unwrap_or(defaults.batch_size),
        epochs: args.epochs.or(t.epochs).unwrap_or(default_epochs),
        lora,
        seed: ctx.seed,
        schedule: args.schedule.or(t.schedule).unwrap_or(defaults.schedule),
        weight_decay: args.weight_decay.or(t.weight_decay).unwrap_or(defaults.weight_decay),
        features: FeatureConfig {
            bits: args.feature_bits.or(t.feature_bits).unwrap_or(defaults.features.bits),
            ..defaults.features
        },
    }
}

pub(super) fn train(ctx: &Context, args: TrainArgs) -> Result<(), Error> {
    let config = train_config(ctx, &args);
    config.validate()?;
    let mut run = RunInfo::new("train", ctx.seed).settings(json!({
        "task": args.task,
        "config": serde_json::to_value(&config).expect("config serializes"),
    }));
    run.input("train", &args.input)?;
    let corpus = ctx.load(&args.input)?;
    let validation = match &args.validation {
        Some(path) => {
            run.input("validation", path)?;
            Some(ctx.load(path)?)
        }
        None => None,
    };
    let base = match &args.base {
        Some(path) => {
            run.input("base", path)?;
            Some(load_checkpoint(path)?)
        }
        None => None,
    };
    let trained = model::train(&corpus, validation.as_ref(), args.task, &config, base.as_ref())?;
    save_checkpoint(&trained.classifier, &args.output)?;

    let mut report = serde_json::to_value(&trained.report).expect("report serializes");
    report["provenance"] = serde_json::to_value(run.provenance()).expect("provenance serializes");
    write_json(&sidecar(&args.output, ".report.json"), &report)?;
    for e in &trained.report.epochs {
        match e.validation {
            Some(v) => eprintln!("epoch {:>2}: loss {:.4}, validation {:.4}", e.epoch, e.train_loss, v),
            None => eprintln!("epoch {:>2}: loss {:.4}", e.epoch, e.train_loss),
        }
    }
    eprintln!("train: kept epoch {}", trained.report.best_epoch);
    Ok(())
}

fn write_provenance_sidecar(path: &Path, run: &RunInfo) -> Result<(), Error> {
    write_json(&provenance_path(path), &run.provenance())
}

pub(super) fn predict(ctx: &Context, args: PredictArgs) -> Result<(), Error> {
    let mut run = RunInfo::new("predict", ctx.seed).settings(json!({ "models": args.models.len() }));
    let mut models = Vec::new();
    for (i, path) in args.models.iter().enumerate() {
        run.input(&format!("model{i}"), path)?;
        models.push(load_checkpoint(path)?);
    }
    for task in [Task::Emotion, Task::Trigger] {
        if models.iter().filter(|m| m.task == task).count() > 1 {
            return Err(ConfigError::Invalid(format!("more than one {task} model given")).into());
        }
    }
    run.input("corpus", &args.input)?;
    let corpus = ctx.load(&args.input)?;
    let mut predictions = Vec::with_capacity(corpus.len());
    for sentence in &corpus {
        let mut merged = Prediction {
            id: sentence.id.clone(),
            emotion: None,
            mask: None,
            scores: None,
        };
        for m in &models {
            let p = m.predict(sentence)?;
            merged.emotion = merged.emotion.or(p.emotion);
            merged.mask = merged.mask.or(p.mask);
            merged.scores = merged.scores.or(p.scores);
        }
        predictions.push(merged);
    }
    write_predictions(&args.output, &predictions)?;
    write_provenance_sidecar(&args.output, &run)?;
    eprintln!("predict: {} sentences", predictions.len());
    Ok(())
}

pub(super) fn evaluate(ctx: &Context, args: EvaluateArgs) -> Result<(), Error> {
    let mut run = RunInfo::new("evaluate", ctx.seed).settings(json!({}));
    run.input("gold", &args.input)?;
    run.input("predictions", &args.predictions)?;
    let gold = ctx.load(&args.input)?;
    let predictions = read_predictions(&args.predictions)?;
    let mut report = score_predictions(&gold, &predictions)?;
    report.provenance = run.provenance();
    write_json(&args.output, &report)?;
    if let Some(path) = &args.confusion_csv {
        let counts = report
            .confusion
            .ok_or_else(|| Error::Data("no emotion predictions to build a confusion matrix from".into()))?;
        write_text(path, &ConfusionMatrix::from_counts(counts).to_csv(args.normalize))?;
    }
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "evaluate: macro F1 {}, token F1 {}, accumulated importance {}",
        show(report.macro_f1),
        show(report.token_f1),
        show(report.accumulated_importance)
    );
    Ok(())
}

pub(super) fn parse_llm(ctx: &Context, args: ParseLlmArgs) -> Result<(), Error> {
    let mut run = RunInfo::new("parse-llm", ctx.seed).settings(json!({ "fallback_neutral": args.fallback_neutral }));
    run.input("responses", &args.input)?;
    let (labels, failures) = parse_response_file(&args.input, args.fallback_neutral).map_err(Error::Data)?;
    let predictions: Vec<Prediction> = labels
        .into_iter()
        .map(|l| Prediction {
            id: l.id,
            emotion: Some(l.emotion),
            mask: None,
            scores: None,
        })
        .collect();
    write_predictions(&args.output, &predictions)?;
    write_provenance_sidecar(&args.output, &run)?;
    let errors: String = failures
        .iter()
        .map(|f| format!("{}\t{}\n", f.id, f.error.to_string().replace(['\t', '\n'], " ")))
        .collect();
    write_text(&sidecar(&args.output, ".errors.tsv"), &errors)?;
    eprintln!(
        "parse-llm: {} labels, {} unparseable",
        predictions.len(),
        failures.len()
    );
    Ok(())
}

pub(super) fn synth(ctx: &Context, args: SynthArgs) -> Result<(), Error> {
    let run = RunInfo::new("synth", ctx.seed).settings(json!({ "count": args.count, "prefix": args.prefix }));
    let mut corpus = generate_corpus(args.count, ctx.seed, &args.prefix);
    ctx.save(&mut corpus, &run, &args.output)?;
    if let Some(path) = &args.dictionary_output {
        let lines: String = mock_dictionary(&args.langs)
            .into_iter()
            .map(|(lang, src, tgt)| format!("{lang}\t{src}\t{tgt}\n"))
            .collect();
        write_text(path, &lines)?;
    }
    eprintln!("synth: {} sentences", corpus.len());
    Ok(())
}
