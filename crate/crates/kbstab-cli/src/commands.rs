//! Subcommand implementations. Each reads its inputs through the core
//! loaders, computes through the library, and writes a report atomically
//! plus a run manifest.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use kbstab_core::change_analysis::{analyze_snapshots, evaluate_criteria, Criterion, DiffConfig};
use kbstab_core::feature_extraction::{
    fit_structured_vocabulary, knn_change_fraction, structured_bow, text_delta, tokenize,
    vectorize_tfidf_tokens, BowMode, FeatureKind, FeatureMatrix, Vocabulary,
};
use kbstab_core::ingest::{
    load_articles, load_edit_log, load_embeddings, load_labels, load_snapshot, wikidata,
    write_articles, write_labels, write_snapshot,
};
use kbstab_core::kb_model::{EntityId, KbTimestamp, PropertyId, StabilityMode};
use kbstab_core::metrics::Metrics;
use kbstab_core::predictor;
use kbstab_core::stability_filters::{
    entity_is_stable, property_changed_fraction, ChangeCountMeasure,
};
use kbstab_core::synth;
use kbstab_core::temporal_density;
use kbstab_core::{Error, Result};

use crate::util::{atomic_write, fmt_num, AppConfig, Manifest};
use crate::{
    AnalyzeArgs, ConvertWikidataArgs, EvalArgs, EvalCriteriaArgs, ExtractFeaturesArgs,
    FilterEntitiesArgs, FilterPropertiesArgs, GenArgs, InspectModelArgs, KdeArgs, PredictArgs,
    TrainArgs,
};

const DEFAULT_TERMINATING: &str = "P570,P576,P582,P2669";

fn parse_property_list(text: &str) -> Result<Vec<PropertyId>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PropertyId::new)
        .collect()
}

fn load_entity_list(path: &Path) -> Result<Vec<EntityId>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(EntityId::new)
        .collect()
}

fn diff_config(args: &AnalyzeArgs) -> DiffConfig {
    DiffConfig {
        timestamp_added_only: args.timestamp_added_only,
        stability_mode: if args.strict_identity {
            StabilityMode::Strict
        } else {
            StabilityMode::IgnoreTransactionTime
        },
        ..DiffConfig::default()
    }
}

fn metrics_csv_row(label: &str, m: &Metrics) -> String {
    format!(
        "{label},{},{},{},{},{},{},{},{}\n",
        fmt_num(m.precision),
        fmt_num(m.recall),
        fmt_num(m.f1),
        fmt_num(m.accuracy),
        m.true_positives,
        m.false_positives,
        m.true_negatives,
        m.false_negatives
    )
}

const METRICS_CSV_HEADER: &str = "name,precision,recall,f1,accuracy,tp,fp,tn,fn\n";

pub fn analyze(args: &AnalyzeArgs, _config: &AppConfig, config_path: Option<&Path>) -> Result<()> {
    let criterion = Criterion::parse(&args.criterion)
        .ok_or_else(|| Error::Validation(format!("unknown criterion {:?}", args.criterion)))?;
    let snap1 = load_snapshot(&args.t1)?;
    let snap2 = load_snapshot(&args.t2)?;
    let records = analyze_snapshots(&snap1, &snap2, criterion, &diff_config(args))?;

    let mut report = String::from(
        "#kbstab-changes\tsubject\tproperty\ttau1\ttau2\tlabel\tadded\tremoved\tmodified\tsig_timestamp\tsig_pca\tsig_bulk\tsig_correction\n",
    );
    let mut distribution: std::collections::BTreeMap<&str, usize> = Default::default();
    for r in &records {
        *distribution.entry(r.assigned_label.as_str()).or_default() += 1;
        report.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.subject,
            r.property,
            r.interval.tau1(),
            r.interval.tau2(),
            r.assigned_label.as_str(),
            r.added.len(),
            r.removed.len(),
            r.modified.len(),
            r.signals.timestamp,
            r.signals.pca,
            r.signals.bulk,
            r.signals.correction,
        ));
    }
    atomic_write(&args.out, report.as_bytes())?;

    let mut summary = String::from("label,count\n");
    for (label, count) in &distribution {
        summary.push_str(&format!("{label},{count}\n"));
    }
    let summary_path = args
        .summary
        .clone()
        .unwrap_or_else(|| args.out.with_file_name(format!(
            "{}.summary.csv",
            args.out.file_name().unwrap_or_default().to_string_lossy()
        )));
    atomic_write(&summary_path, summary.as_bytes())?;

    let mut manifest = Manifest::new("analyze");
    manifest.input(&args.t1)?;
    manifest.input(&args.t2)?;
    manifest.config(config_path)?;
    manifest.note("criterion", criterion.as_str());
    manifest.note("changes", records.len());
    manifest.write_for(&args.out)
}

pub fn eval_criteria(
    args: &EvalCriteriaArgs,
    _config: &AppConfig,
    config_path: Option<&Path>,
) -> Result<()> {
    let snap1 = load_snapshot(&args.t1)?;
    let snap2 = load_snapshot(&args.t2)?;
    let gold = load_labels(&args.gold)?;
    let records = analyze_snapshots(&snap1, &snap2, Criterion::Timestamp, &DiffConfig::default())?;
    let evaluation = evaluate_criteria(&records, &gold)?;

    let mut csv = String::from(METRICS_CSV_HEADER);
    for (criterion, metrics) in &evaluation.per_criterion {
        csv.push_str(&metrics_csv_row(criterion.as_str(), metrics));
    }
    atomic_write(&args.out, csv.as_bytes())?;

    let mut manifest = Manifest::new("eval-criteria");
    manifest.input(&args.t1)?;
    manifest.input(&args.t2)?;
    manifest.input(&args.gold)?;
    manifest.config(config_path)?;
    for (label, count) in &evaluation.gold_distribution {
        manifest.note(&format!("gold_{label}"), count);
    }
    manifest.write_for(&args.out)
}

pub fn filter_entities(
    args: &FilterEntitiesArgs,
    config: &AppConfig,
    config_path: Option<&Path>,
) -> Result<()> {
    let listed = args
        .terminating
        .as_deref()
        .or_else(|| config.get("terminating_properties"))
        .unwrap_or(DEFAULT_TERMINATING);
    let terminating: HashSet<PropertyId> = parse_property_list(listed)?.into_iter().collect();
    let snapshot = load_snapshot(&args.snapshot)?;

    let mut csv = String::from("entity,stable\n");
    let mut stable_count = 0usize;
    for subject in snapshot.subjects() {
        let stable = entity_is_stable(&snapshot, &subject, &terminating)?;
        stable_count += stable as usize;
        csv.push_str(&format!("{subject},{stable}\n"));
    }
    atomic_write(&args.out, csv.as_bytes())?;

    let mut manifest = Manifest::new("filter-entities");
    manifest.input(&args.snapshot)?;
    manifest.config(config_path)?;
    manifest.note("terminating", listed);
    manifest.note("stable", stable_count);
    manifest.write_for(&args.out)
}

pub fn filter_properties(
    args: &FilterPropertiesArgs,
    _config: &AppConfig,
    config_path: Option<&Path>,
) -> Result<()> {
    let measure = ChangeCountMeasure::parse(&args.measure)
        .ok_or_else(|| Error::Validation(format!("unknown measure {:?}", args.measure)))?;
    let snapshot = load_snapshot(&args.snapshot)?;
    let class = load_entity_list(&args.class)?;
    let edit_log = args.edit_log.as_deref().map(load_edit_log).transpose()?;

    let properties: Vec<PropertyId> = match &args.properties {
        Some(listed) => parse_property_list(listed)?,
        None => {
            let mut all: Vec<PropertyId> =
                snapshot.facts().iter().map(|f| f.property.clone()).collect();
            all.sort();
            all.dedup();
            all
        }
    };

    let mut csv = String::from("property,fraction,unstable\n");
    for property in &properties {
        let fraction =
            property_changed_fraction(&class, property, measure, &snapshot, edit_log.as_deref())?;
        csv.push_str(&format!(
            "{property},{},{}\n",
            fmt_num(fraction),
            fraction >= args.threshold
        ));
    }
    atomic_write(&args.out, csv.as_bytes())?;

    let mut manifest = Manifest::new("filter-properties");
    manifest.input(&args.snapshot)?;
    manifest.input(&args.class)?;
    if let Some(log) = &args.edit_log {
        manifest.input(log)?;
    }
    manifest.config(config_path)?;
    manifest.note("measure", measure.as_str());
    manifest.note("threshold", args.threshold);
    manifest.write_for(&args.out)
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, kind: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("--{flag} is required for kind {kind}")))
}

pub fn extract_features(
    args: &ExtractFeaturesArgs,
    config: &AppConfig,
    config_path: Option<&Path>,
) -> Result<()> {
    let min_df = match args.min_df {
        Some(v) => v,
        None => config.get_usize("min_df")?.unwrap_or(5),
    };
    let mut manifest = Manifest::new("extract-features");
    manifest.note("kind", &args.kind);

    let (matrix, vocab): (FeatureMatrix, Option<Vocabulary>) = match args.kind.as_str() {
        "structured" => {
            let snapshot_path = require(&args.snapshot, "snapshot", "structured")?;
            let target = PropertyId::new(require(&args.target, "target", "structured")?.clone())?;
            let snapshot = load_snapshot(snapshot_path)?;
            manifest.input(snapshot_path)?;
            let entities = match &args.entities {
                Some(path) => {
                    manifest.input(path)?;
                    load_entity_list(path)?
                }
                None => snapshot.subjects(),
            };
            let vocab = fit_structured_vocabulary(&snapshot, &entities, &target, min_df)?;
            let rows = entities
                .iter()
                .map(|e| {
                    let v = structured_bow(&snapshot, e, &target, BowMode::Count, &vocab);
                    (e.clone(), v.components)
                })
                .collect();
            (
                FeatureMatrix {
                    kind: FeatureKind::StructuredBow,
                    names: vocab.terms().to_vec(),
                    rows,
                },
                Some(vocab),
            )
        }
        "text-delta" => {
            let old_path = require(&args.articles_old, "articles-old", "text-delta")?;
            let new_path = require(&args.articles_new, "articles-new", "text-delta")?;
            manifest.input(old_path)?;
            manifest.input(new_path)?;
            let old = load_articles(old_path)?;
            let new = load_articles(new_path)?;
            let old_by_entity: std::collections::BTreeMap<_, _> =
                old.iter().map(|a| (a.entity.clone(), a)).collect();
            let mut deltas = Vec::new();
            for article in &new {
                let Some(before) = old_by_entity.get(&article.entity) else {
                    continue;
                };
                deltas.push((article.entity.clone(), text_delta(before, article)?));
            }
            let ngram_range = (1, args.ngram_max);
            let token_docs: Vec<Vec<String>> = deltas
                .iter()
                .map(|(_, text)| tokenize(text, ngram_range))
                .collect();
            let vocab = Vocabulary::fit_tokens(&token_docs, ngram_range, min_df)?;
            let rows = deltas
                .iter()
                .zip(&token_docs)
                .map(|((entity, _), tokens)| {
                    let v = vectorize_tfidf_tokens(tokens, &vocab, FeatureKind::TextTfidf);
                    (entity.clone(), v.components)
                })
                .collect();
            (
                FeatureMatrix {
                    kind: FeatureKind::TextTfidf,
                    names: vocab.terms().to_vec(),
                    rows,
                },
                Some(vocab),
            )
        }
        "age" => {
            let snapshot_path = require(&args.snapshot, "snapshot", "age")?;
            let birth =
                PropertyId::new(require(&args.birth_property, "birth-property", "age")?.clone())?;
            let as_of = KbTimestamp::parse(require(&args.as_of, "as-of", "age")?)?;
            let snapshot = load_snapshot(snapshot_path)?;
            manifest.input(snapshot_path)?;
            let entities = match &args.entities {
                Some(path) => {
                    manifest.input(path)?;
                    load_entity_list(path)?
                }
                None => snapshot.subjects(),
            };
            let rows = entities
                .iter()
                .filter_map(|e| {
                    kbstab_core::feature_extraction::age_feature(&snapshot, e, &birth, as_of)
                        .map(|age| (e.clone(), vec![(0, age)]))
                })
                .collect();
            (
                FeatureMatrix {
                    kind: FeatureKind::Scalar,
                    names: vec!["age".into()],
                    rows,
                },
                None,
            )
        }
        "embedding" => {
            let path = require(&args.embeddings, "embeddings", "embedding")?;
            manifest.input(path)?;
            let table = load_embeddings(path)?;
            let names = (0..table.dimension()).map(|i| format!("e{i}")).collect();
            let mut rows = std::collections::BTreeMap::new();
            let mut entities: Vec<EntityId> = table.entities().cloned().collect();
            entities.sort();
            for entity in entities {
                let vector = table.get(&entity).unwrap();
                rows.insert(
                    entity,
                    vector.iter().copied().enumerate().collect::<Vec<_>>(),
                );
            }
            (
                FeatureMatrix {
                    kind: FeatureKind::Embedding,
                    names,
                    rows,
                },
                None,
            )
        }
        "knn" => {
            let embeddings_path = require(&args.embeddings, "embeddings", "knn")?;
            let reference_path = require(&args.reference, "reference", "knn")?;
            manifest.input(embeddings_path)?;
            manifest.input(reference_path)?;
            let table = load_embeddings(embeddings_path)?;
            let reference = load_reference(reference_path)?;
            let k = match args.k {
                Some(v) => v,
                None => config.get_usize("knn_k")?.unwrap_or(10),
            };
            let entities = match &args.entities {
                Some(path) => {
                    manifest.input(path)?;
                    load_entity_list(path)?
                }
                None => reference.iter().map(|(e, _)| e.clone()).collect(),
            };
            let mut rows = std::collections::BTreeMap::new();
            for entity in &entities {
                let fraction = knn_change_fraction(entity, &table, &reference, k)?;
                rows.insert(entity.clone(), vec![(0, fraction)]);
            }
            manifest.note("k", k);
            (
                FeatureMatrix {
                    kind: FeatureKind::KnnFraction,
                    names: vec!["knn_changed_fraction".into()],
                    rows,
                },
                None,
            )
        }
        other => {
            return Err(Error::Validation(format!("unknown feature kind {other:?}")));
        }
    };

    let mut bytes = Vec::new();
    matrix
        .write(&mut bytes)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    atomic_write(&args.out, &bytes)?;

    if let Some(vocab_path) = &args.vocab_out {
        let vocab = vocab.ok_or_else(|| {
            Error::Validation(format!("kind {:?} fits no vocabulary", args.kind))
        })?;
        let mut vocab_bytes = Vec::new();
        vocab
            .write(&mut vocab_bytes)
            .map_err(|e| Error::io(vocab_path.display().to_string(), e))?;
        atomic_write(vocab_path, &vocab_bytes)?;
    }

    manifest.config(config_path)?;
    manifest.note("min_df", min_df);
    manifest.note("rows", matrix.rows.len());
    manifest.write_for(&args.out)
}

/// TSV of entity id and changed flag (0/1 or false/true), used as the kNN
/// reference set.
fn load_reference(path: &Path) -> Result<Vec<(EntityId, bool)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (entity, flag) = line.split_once('\t').ok_or_else(|| {
            Error::parse(path.display().to_string(), i + 1, "expected <entity>\\t<0|1>")
        })?;
        let changed = match flag.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::parse(
                    path.display().to_string(),
                    i + 1,
                    format!("bad changed flag {other:?}"),
                ))
            }
        };
        out.push((EntityId::new(entity.trim())?, changed));
    }
    Ok(out)
}

fn load_feature_blocks(paths: &[std::path::PathBuf]) -> Result<(FeatureMatrix, Vec<usize>)> {
    let mut blocks = Vec::new();
    for path in paths {
        let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut reader = std::io::BufReader::new(file);
        blocks.push(FeatureMatrix::read(&mut reader)?);
    }
    FeatureMatrix::concat(&blocks)
}

fn targets_for_property(
    gold_path: &Path,
    property: &PropertyId,
) -> Result<Vec<(EntityId, bool)>> {
    let gold = load_labels(gold_path)?;
    let targets: Vec<(EntityId, bool)> = gold
        .iter()
        .filter(|g| g.property == *property)
        .map(|g| {
            (
                g.subject.clone(),
                g.label != kbstab_core::change_analysis::CauseLabel::None,
            )
        })
        .collect();
    if targets.is_empty() {
        return Err(Error::Validation(format!(
            "gold file carries no labels for property {property}"
        )));
    }
    Ok(targets)
}

fn hyperparams(args_l2: Option<f64>, config: &AppConfig, seed: u64) -> Result<predictor::Hyperparams> {
    let l2 = match args_l2 {
        Some(v) => v,
        None => config.get_f64("l2")?.unwrap_or(1.0),
    };
    Ok(predictor::Hyperparams {
        l2_strength: l2,
        seed,
        ..Default::default()
    })
}

fn test_fraction(flag: Option<f64>, config: &AppConfig) -> Result<f64> {
    Ok(match flag {
        Some(v) => v,
        None => config.get_f64("test_fraction")?.unwrap_or(0.4),
    })
}

pub fn train(args: &TrainArgs, config: &AppConfig, config_path: Option<&Path>) -> Result<()> {
    let property = PropertyId::new(args.property.clone())?;
    let (matrix, standardized) = load_feature_blocks(&args.features)?;
    let targets = targets_for_property(&args.gold, &property)?;
    let (dataset, stats) = predictor::build_dataset_from_targets(
        &property,
        &targets,
        &matrix,
        &standardized,
        args.seed,
    )?;
    let fraction = test_fraction(args.test_frac, config)?;
    let (train_split, test_split) = predictor::split(&dataset, fraction, args.seed)?;
    let hp = hyperparams(args.l2, config, args.seed)?;
    let model = predictor::train(&train_split, &hp)?;

    let mut model_bytes = Vec::new();
    predictor::write_model(&model, &mut model_bytes)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    atomic_write(&args.out, &model_bytes)?;

    let metrics = predictor::evaluate(&model, &test_split)?;
    let mut csv = String::from(METRICS_CSV_HEADER);
    csv.push_str(&metrics_csv_row(property.as_str(), &metrics));
    let metrics_path = args
        .metrics
        .clone()
        .unwrap_or_else(|| args.out.with_file_name(format!(
            "{}.metrics.csv",
            args.out.file_name().unwrap_or_default().to_string_lossy()
        )));
    atomic_write(&metrics_path, csv.as_bytes())?;

    let mut manifest = Manifest::new("train");
    for path in &args.features {
        manifest.input(path)?;
    }
    manifest.input(&args.gold)?;
    manifest.config(config_path)?;
    manifest.seed(args.seed);
    manifest.note("property", &property);
    manifest.note("l2", hp.l2_strength);
    manifest.note("test_fraction", fraction);
    manifest.note("train_rows", train_split.rows.len());
    manifest.note("test_rows", test_split.rows.len());
    manifest.note("dropped_missing_features", stats.dropped_missing_features);
    manifest.note("discarded_by_balancing", stats.discarded_by_balancing);
    manifest.note("converged", model.converged);
    manifest.write_for(&args.out)
}

fn read_model(path: &Path) -> Result<predictor::LogRegModel> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    predictor::read_model(&mut std::io::BufReader::new(file))
}

pub fn predict(args: &PredictArgs, _config: &AppConfig, config_path: Option<&Path>) -> Result<()> {
    let model = read_model(&args.model)?;
    let (matrix, _) = load_feature_blocks(&args.features)?;
    let mut csv = String::from("entity,probability,label\n");
    for (entity, features) in &matrix.rows {
        let (probability, label) = predictor::predict(&model, features)?;
        csv.push_str(&format!("{entity},{},{label}\n", fmt_num(probability)));
    }
    atomic_write(&args.out, csv.as_bytes())?;

    let mut manifest = Manifest::new("predict");
    manifest.input(&args.model)?;
    for path in &args.features {
        manifest.input(path)?;
    }
    manifest.config(config_path)?;
    manifest.note("rows", matrix.rows.len());
    manifest.write_for(&args.out)
}

pub fn eval(args: &EvalArgs, config: &AppConfig, config_path: Option<&Path>) -> Result<()> {
    let property = PropertyId::new(args.property.clone())?;
    let model = read_model(&args.model)?;
    let (matrix, standardized) = load_feature_blocks(&args.features)?;
    let targets = targets_for_property(&args.gold, &property)?;
    let (dataset, _) = predictor::build_dataset_from_targets(
        &property,
        &targets,
        &matrix,
        &standardized,
        args.seed,
    )?;
    let fraction = test_fraction(args.test_frac, config)?;
    let (_, test_split) = predictor::split(&dataset, fraction, args.seed)?;
    let metrics = predictor::evaluate(&model, &test_split)?;

    let mut csv = String::from(METRICS_CSV_HEADER);
    csv.push_str(&metrics_csv_row(property.as_str(), &metrics));
    atomic_write(&args.out, csv.as_bytes())?;

    let mut manifest = Manifest::new("eval");
    manifest.input(&args.model)?;
    for path in &args.features {
        manifest.input(path)?;
    }
    manifest.input(&args.gold)?;
    manifest.config(config_path)?;
    manifest.seed(args.seed);
    manifest.note("property", &property);
    manifest.note("test_rows", test_split.rows.len());
    manifest.write_for(&args.out)
}

pub fn inspect_model(
    args: &InspectModelArgs,
    _config: &AppConfig,
    config_path: Option<&Path>,
) -> Result<()> {
    let model = read_model(&args.model)?;
    let (positive, negative) = predictor::inspect(&model, args.top);
    let mut csv = String::from("direction,rank,feature,weight\n");
    for (rank, (feature, weight)) in positive.iter().enumerate() {
        csv.push_str(&format!("positive,{},{feature},{}\n", rank + 1, fmt_num(*weight)));
    }
    for (rank, (feature, weight)) in negative.iter().enumerate() {
        csv.push_str(&format!("negative,{},{feature},{}\n", rank + 1, fmt_num(*weight)));
    }
    atomic_write(&args.out, csv.as_bytes())?;

    let mut manifest = Manifest::new("inspect-model");
    manifest.input(&args.model)?;
    manifest.config(config_path)?;
    manifest.note("top", args.top);
    manifest.write_for(&args.out)
}

pub fn kde(args: &KdeArgs, _config: &AppConfig, config_path: Option<&Path>) -> Result<()> {
    let property = PropertyId::new(args.property.clone())?;
    let snapshot = load_snapshot(&args.snapshot)?;
    let samples = match &args.entities {
        Some(path) => {
            let mut pooled = Vec::new();
            for entity in load_entity_list(path)? {
                pooled.extend(temporal_density::inter_change_times(
                    &snapshot, &entity, &property,
                ));
            }
            pooled.sort_by(f64::total_cmp);
            pooled
        }
        None => temporal_density::pool_inter_change_times(&snapshot, &property),
    };
    if samples.is_empty() {
        return Err(Error::Validation(format!(
            "no inter-change times for property {property}"
        )));
    }

    let histogram = temporal_density::histogram(&samples, args.bins)?;
    let estimate = match args.bandwidth {
        Some(h) => temporal_density::kde_with_bandwidth(&samples, h)?,
        None => temporal_density::kde(&samples)?,
    };

    let mut csv = String::from("section,x,value\n");
    for (i, count) in histogram.counts.iter().enumerate() {
        let edge = histogram.lo + histogram.bin_width * i as f64;
        csv.push_str(&format!("histogram,{},{count}\n", fmt_num(edge)));
    }
    for (x, f) in estimate.grid.iter().zip(&estimate.density) {
        csv.push_str(&format!("density,{},{}\n", fmt_num(*x), fmt_num(*f)));
    }
    atomic_write(&args.out, csv.as_bytes())?;

    let mut manifest = Manifest::new("kde");
    manifest.input(&args.snapshot)?;
    if let Some(path) = &args.entities {
        manifest.input(path)?;
    }
    manifest.config(config_path)?;
    manifest.note("property", &property);
    manifest.note("samples", samples.len());
    manifest.note("bandwidth", estimate.bandwidth);
    manifest.write_for(&args.out)
}

pub fn gen(args: &GenArgs, config: &AppConfig, config_path: Option<&Path>) -> Result<()> {
    let rates: Vec<f64> = args
        .rates
        .split(',')
        .map(|r| {
            r.trim()
                .parse()
                .map_err(|_| Error::Validation(format!("bad rate {r:?}")))
        })
        .collect::<Result<_>>()?;
    if rates.len() != 4 {
        return Err(Error::Validation(
            "rates must list real_world,completion,correction,none".into(),
        ));
    }
    let gen_config =
        synth::GenConfig::with_rates(rates[0], rates[1], rates[2], rates[3], args.entities)?;
    let (snap1, snap2, gold) = synth::generate(&gen_config, args.seed)?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::io(args.out_dir.display().to_string(), e))?;
    let path = |name: &str| args.out_dir.join(name);

    let mut bytes = Vec::new();
    write_snapshot(&snap1, &mut bytes).map_err(|e| Error::io("snapshot_t1.tsv", e))?;
    atomic_write(&path("snapshot_t1.tsv"), &bytes)?;
    bytes.clear();
    write_snapshot(&snap2, &mut bytes).map_err(|e| Error::io("snapshot_t2.tsv", e))?;
    atomic_write(&path("snapshot_t2.tsv"), &bytes)?;
    bytes.clear();
    write_labels(&gold, &mut bytes).map_err(|e| Error::io("labels.tsv", e))?;
    atomic_write(&path("labels.tsv"), &bytes)?;

    let mut manifest = Manifest::new("gen");
    manifest.config(config_path)?;
    manifest.seed(args.seed);
    manifest.note("entities", args.entities);
    manifest.note("rates", &args.rates);

    if !args.no_articles {
        let signal_rate = match args.signal_rate {
            Some(v) => v,
            None => config.get_f64("signal_rate")?.unwrap_or(0.9),
        };
        let text_config = synth::TextConfig {
            signal_rate,
            ..Default::default()
        };
        let articles = synth::generate_text(&gold, &text_config, args.seed)?;
        let old: Vec<_> = articles.iter().map(|(a, _)| a.clone()).collect();
        let new: Vec<_> = articles.iter().map(|(_, b)| b.clone()).collect();
        bytes.clear();
        write_articles(&old, &mut bytes).map_err(|e| Error::io("articles_t1.tsv", e))?;
        atomic_write(&path("articles_t1.tsv"), &bytes)?;
        bytes.clear();
        write_articles(&new, &mut bytes).map_err(|e| Error::io("articles_t2.tsv", e))?;
        atomic_write(&path("articles_t2.tsv"), &bytes)?;
        manifest.note("signal_rate", signal_rate);
        manifest.note("signal_token", &text_config.signal_token);
    }

    manifest.write_for(&path("labels.tsv"))
}

pub fn convert_wikidata(
    args: &ConvertWikidataArgs,
    _config: &AppConfig,
    config_path: Option<&Path>,
) -> Result<()> {
    let allowlist: HashSet<PropertyId> =
        parse_property_list(&args.properties)?.into_iter().collect();
    if allowlist.is_empty() {
        return Err(Error::Validation("property allowlist must be non-empty".into()));
    }
    let sampled_at = KbTimestamp::parse(&args.sampled_at)?;
    let (snapshot, stats) = wikidata::convert_wikidata(&args.input, &allowlist, sampled_at)?;

    let mut bytes = Vec::new();
    write_snapshot(&snapshot, &mut bytes)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    atomic_write(&args.out, &bytes)?;

    let mut manifest = Manifest::new("convert-wikidata");
    manifest.input(&args.input)?;
    manifest.config(config_path)?;
    manifest.note("entities_read", stats.entities_read);
    manifest.note("facts_emitted", stats.facts_emitted);
    manifest.note("skipped_lines", stats.skipped_lines);
    manifest.note("malformed_qualifiers", stats.malformed_qualifiers);
    manifest.note("skipped_statements", stats.skipped_statements);
    manifest.write_for(&args.out)
}
