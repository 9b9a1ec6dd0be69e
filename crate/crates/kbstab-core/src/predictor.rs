//! Balanced labeled datasets and per-property logistic-regression change
//! classifiers.
//!
//! Targets come from the timestamp criterion over the sampling interval.
//! Datasets are balanced by down-sampling the majority class, split with a
//! stratified draw reserving at least 40% for the test set, and trained by
//! minimizing the L2-regularized logistic loss with backtracking gradient
//! descent. Everything is deterministic under the provided seed.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::change_analysis::timestamp_criterion;
use crate::error::{Error, Result};
use crate::feature_extraction::{FeatureMatrix, SparseVec};
use crate::kb_model::{EntityId, Interval, PropertyId, Snapshot};
use crate::metrics::Metrics;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub l2_strength: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            l2_strength: 1.0,
            tolerance: 1e-6,
            max_iterations: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub entity: EntityId,
    pub features: SparseVec,
    pub target: bool,
}

/// Balanced labeled dataset for one property.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub property: PropertyId,
    pub feature_names: Vec<String>,
    /// Columns to z-score with training statistics (dense numeric blocks).
    pub standardized_columns: Vec<usize>,
    pub rows: Vec<DatasetRow>,
}

impl LabeledDataset {
    pub fn positives(&self) -> usize {
        self.rows.iter().filter(|r| r.target).count()
    }

    pub fn negatives(&self) -> usize {
        self.rows.len() - self.positives()
    }
}

/// Counts reported by dataset construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub dropped_missing_features: usize,
    pub discarded_by_balancing: usize,
}

/// Build a balanced dataset from explicit (entity, changed) targets and a
/// feature matrix. Entities without a feature row are dropped and counted;
/// the majority class is down-sampled uniformly under the seed.
pub fn build_dataset_from_targets(
    property: &PropertyId,
    targets: &[(EntityId, bool)],
    features: &FeatureMatrix,
    standardized_columns: &[usize],
    seed: u64,
) -> Result<(LabeledDataset, BuildStats)> {
    let mut stats = BuildStats::default();
    let mut positives: Vec<DatasetRow> = Vec::new();
    let mut negatives: Vec<DatasetRow> = Vec::new();
    let mut sorted: Vec<&(EntityId, bool)> = targets.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for (entity, target) in sorted {
        match features.rows.get(entity) {
            Some(row) => {
                let row = DatasetRow {
                    entity: entity.clone(),
                    features: row.clone(),
                    target: *target,
                };
                if *target {
                    positives.push(row);
                } else {
                    negatives.push(row);
                }
            }
            None => stats.dropped_missing_features += 1,
        }
    }
    let n = positives.len().min(negatives.len());
    if n == 0 {
        return Err(Error::Validation(format!(
            "cannot balance dataset: {} positives, {} negatives",
            positives.len(),
            negatives.len()
        )));
    }
    stats.discarded_by_balancing = positives.len() + negatives.len() - 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in [&mut positives, &mut negatives] {
        if class.len() > n {
            class.shuffle(&mut rng);
            class.truncate(n);
            class.sort_by(|a, b| a.entity.cmp(&b.entity));
        }
    }
    let mut rows = positives;
    rows.append(&mut negatives);
    rows.sort_by(|a, b| a.entity.cmp(&b.entity));
    Ok((
        LabeledDataset {
            property: property.clone(),
            feature_names: features.names.clone(),
            standardized_columns: standardized_columns.to_vec(),
            rows,
        },
        stats,
    ))
}

/// Build a dataset with targets derived from the timestamp criterion: an
/// entity is positive iff its pair state at tau2 carries a valid time inside
/// the interval.
pub fn build_dataset(
    entities: &[EntityId],
    property: &PropertyId,
    snap1: &Snapshot,
    snap2: &Snapshot,
    features: &FeatureMatrix,
    standardized_columns: &[usize],
    seed: u64,
) -> Result<(LabeledDataset, BuildStats)> {
    let interval = Interval::new(snap1.sampled_at(), snap2.sampled_at())?;
    let targets: Vec<(EntityId, bool)> = entities
        .iter()
        .map(|e| {
            let state2 = snap2.project(e, property);
            (e.clone(), timestamp_criterion(&state2, interval))
        })
        .collect();
    build_dataset_from_targets(property, &targets, features, standardized_columns, seed)
}

/// Stratified train/test split preserving class balance in both partitions.
/// At least 40% of the rows must be held out for testing.
pub fn split(
    dataset: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(0.4..=0.9).contains(&test_fraction) {
        return Err(Error::Validation(format!(
            "test fraction must be in [0.4, 0.9], got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for target in [true, false] {
        let mut class: Vec<&DatasetRow> = dataset.rows.iter().filter(|r| r.target == target).collect();
        class.shuffle(&mut rng);
        let n_test = (test_fraction * class.len() as f64).round() as usize;
        for (i, row) in class.into_iter().enumerate() {
            if i < n_test {
                test_rows.push(row.clone());
            } else {
                train_rows.push(row.clone());
            }
        }
    }
    train_rows.sort_by(|a, b| a.entity.cmp(&b.entity));
    test_rows.sort_by(|a, b| a.entity.cmp(&b.entity));
    let make = |rows| LabeledDataset {
        property: dataset.property.clone(),
        feature_names: dataset.feature_names.clone(),
        standardized_columns: dataset.standardized_columns.clone(),
        rows,
    };
    Ok((make(train_rows), make(test_rows)))
}

/// Trained logistic-regression model.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyperparams: Hyperparams,
    pub converged: bool,
    /// Per-column (mean, std) for standardized columns, from training data.
    pub scaler: BTreeMap<usize, (f64, f64)>,
}

/// `ln(1 + exp(x))` without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Regularized logistic loss and its gradient at (weights, bias):
/// mean over rows of `ln(1 + exp(-y' (w.x + b)))` with y' in {-1, +1},
/// plus `(l2/2) ||w||^2` (bias unregularized).
pub fn loss_and_grad(
    rows: &[DatasetRow],
    weights: &[f64],
    bias: f64,
    l2_strength: f64,
) -> (f64, Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for row in rows {
        let z: f64 = bias
            + row
                .features
                .iter()
                .map(|&(idx, v)| weights[idx] * v)
                .sum::<f64>();
        let y = if row.target { 1.0 } else { -1.0 };
        loss += log1p_exp(-y * z);
        let coeff = -y * sigmoid(-y * z);
        for &(idx, v) in &row.features {
            grad_w[idx] += coeff * v;
        }
        grad_b += coeff;
    }
    loss /= n;
    grad_b /= n;
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2_strength * w;
    }
    loss += 0.5 * l2_strength * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad_w, grad_b)
}

/// Apply z-scoring to a row's standardized columns, materializing implicit
/// zeros so centered values survive.
fn scale_row(features: &SparseVec, scaler: &BTreeMap<usize, (f64, f64)>) -> SparseVec {
    if scaler.is_empty() {
        return features.clone();
    }
    let mut out: BTreeMap<usize, f64> = features.iter().copied().collect();
    for (&col, &(mean, std)) in scaler {
        let raw = out.get(&col).copied().unwrap_or(0.0);
        out.insert(col, (raw - mean) / std);
    }
    out.into_iter().collect()
}

fn fit_scaler(dataset: &LabeledDataset) -> BTreeMap<usize, (f64, f64)> {
    let n = dataset.rows.len() as f64;
    let mut scaler = BTreeMap::new();
    for &col in &dataset.standardized_columns {
        let values: Vec<f64> = dataset
            .rows
            .iter()
            .map(|r| {
                r.features
                    .iter()
                    .find(|(idx, _)| *idx == col)
                    .map(|(_, v)| *v)
                    .unwrap_or(0.0)
            })
            .collect();
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        scaler.insert(col, (mean, std));
    }
    scaler
}

/// Train by backtracking gradient descent until the gradient norm drops
/// below tolerance or the iteration cap is hit (the model is then returned
/// with `converged: false`). Deterministic under the seed.
pub fn train(dataset: &LabeledDataset, hyperparams: &Hyperparams) -> Result<LogRegModel> {
    if dataset.rows.is_empty() {
        return Err(Error::Validation("cannot train on an empty dataset".into()));
    }
    let dim = dataset.feature_names.len();
    for row in &dataset.rows {
        if let Some(&(idx, v)) = row.features.iter().find(|(idx, v)| *idx >= dim || !v.is_finite()) {
            return Err(Error::Validation(format!(
                "bad feature component ({idx}, {v}) for entity {}",
                row.entity
            )));
        }
    }
    let scaler = fit_scaler(dataset);
    let rows: Vec<DatasetRow> = dataset
        .rows
        .iter()
        .map(|r| DatasetRow {
            entity: r.entity.clone(),
            features: scale_row(&r.features, &scaler),
            target: r.target,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    let mut weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.01..0.01)).collect();
    let mut bias = 0.0;

    let (mut loss, mut grad_w, mut grad_b) =
        loss_and_grad(&rows, &weights, bias, hyperparams.l2_strength);
    let mut converged = false;
    for _ in 0..hyperparams.max_iterations {
        let grad_norm = (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
        if grad_norm < hyperparams.tolerance {
            converged = true;
            break;
        }
        // backtracking line search with Armijo condition
        let mut step = 1.0;
        loop {
            let cand_w: Vec<f64> = weights.iter().zip(&grad_w).map(|(w, g)| w - step * g).collect();
            let cand_b = bias - step * grad_b;
            let (cand_loss, cand_gw, cand_gb) =
                loss_and_grad(&rows, &cand_w, cand_b, hyperparams.l2_strength);
            if cand_loss <= loss - 1e-4 * step * grad_norm * grad_norm || step < 1e-12 {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                grad_w = cand_gw;
                grad_b = cand_gb;
                break;
            }
            step *= 0.5;
        }
    }

    Ok(LogRegModel {
        feature_names: dataset.feature_names.clone(),
        weights,
        bias,
        hyperparams: hyperparams.clone(),
        converged,
        scaler,
    })
}

/// Loss after each accepted descent step, for monotonicity checks.
pub fn training_loss_trace(dataset: &LabeledDataset, hyperparams: &Hyperparams) -> Result<Vec<f64>> {
    let scaler = fit_scaler(dataset);
    let rows: Vec<DatasetRow> = dataset
        .rows
        .iter()
        .map(|r| DatasetRow {
            entity: r.entity.clone(),
            features: scale_row(&r.features, &scaler),
            target: r.target,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    let dim = dataset.feature_names.len();
    let mut weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.01..0.01)).collect();
    let mut bias = 0.0;
    let (mut loss, mut grad_w, mut grad_b) =
        loss_and_grad(&rows, &weights, bias, hyperparams.l2_strength);
    let mut trace = vec![loss];
    for _ in 0..hyperparams.max_iterations {
        let grad_norm = (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
        if grad_norm < hyperparams.tolerance {
            break;
        }
        let mut step = 1.0;
        loop {
            let cand_w: Vec<f64> = weights.iter().zip(&grad_w).map(|(w, g)| w - step * g).collect();
            let cand_b = bias - step * grad_b;
            let (cand_loss, cand_gw, cand_gb) =
                loss_and_grad(&rows, &cand_w, cand_b, hyperparams.l2_strength);
            if cand_loss <= loss - 1e-4 * step * grad_norm * grad_norm || step < 1e-12 {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                grad_w = cand_gw;
                grad_b = cand_gb;
                break;
            }
            step *= 0.5;
        }
        trace.push(loss);
    }
    Ok(trace)
}

/// Change probability and thresholded label for one feature row.
pub fn predict(model: &LogRegModel, features: &SparseVec) -> Result<(f64, bool)> {
    if let Some(&(idx, _)) = features.iter().find(|(idx, _)| *idx >= model.weights.len()) {
        return Err(Error::Validation(format!(
            "feature index {idx} out of range for model dimension {}",
            model.weights.len()
        )));
    }
    let scaled = scale_row(features, &model.scaler);
    let z: f64 = model.bias
        + scaled
            .iter()
            .map(|&(idx, v)| model.weights[idx] * v)
            .sum::<f64>();
    let p = sigmoid(z);
    Ok((p, p >= 0.5))
}

/// Test metrics with change as the positive class. On balanced test sets the
/// random baseline is 50%.
pub fn evaluate(model: &LogRegModel, test: &LabeledDataset) -> Result<Metrics> {
    let mut pairs = Vec::with_capacity(test.rows.len());
    for row in &test.rows {
        let (_, label) = predict(model, &row.features)?;
        pairs.push((row.target, label));
    }
    Ok(Metrics::from_binary(&pairs))
}

/// Top-k features by weight, most positive and most negative.
pub fn inspect(model: &LogRegModel, top_k: usize) -> (Vec<(String, f64)>, Vec<(String, f64)>) {
    let mut ranked: Vec<(String, f64)> = model
        .feature_names
        .iter()
        .cloned()
        .zip(model.weights.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let k = top_k.min(ranked.len());
    let positive = ranked[..k].to_vec();
    let mut negative: Vec<(String, f64)> = ranked.iter().rev().take(k).cloned().collect();
    negative.sort_by(|a, b| a.1.total_cmp(&b.1));
    (positive, negative)
}

/// Persist a model as a text listing: hyperparameters, scaler entries, then
/// feature-name/weight rows.
pub fn write_model(model: &LogRegModel, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "#kbstab-model\tbias={}\tl2={}\ttol={}\tmax_iter={}\tseed={}\tconverged={}",
        model.bias,
        model.hyperparams.l2_strength,
        model.hyperparams.tolerance,
        model.hyperparams.max_iterations,
        model.hyperparams.seed,
        model.converged
    )?;
    for (col, (mean, std)) in &model.scaler {
        writeln!(out, "#scale\t{col}\t{mean}\t{std}")?;
    }
    for (name, weight) in model.feature_names.iter().zip(&model.weights) {
        writeln!(out, "{name}\t{weight}")?;
    }
    Ok(())
}

pub fn read_model(reader: &mut dyn BufRead) -> Result<LogRegModel> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Validation("empty model file".into()))?
        .map_err(|e| Error::io("<model>", e))?;
    if !header.starts_with("#kbstab-model") {
        return Err(Error::Validation("not a model file".into()));
    }
    let mut model = LogRegModel {
        feature_names: Vec::new(),
        weights: Vec::new(),
        bias: 0.0,
        hyperparams: Hyperparams::default(),
        converged: false,
        scaler: BTreeMap::new(),
    };
    for field in header.split('\t').skip(1) {
        let Some((key, value)) = field.split_once('=') else { continue };
        match key {
            "bias" => model.bias = value.parse().map_err(|_| Error::Validation("bad bias".into()))?,
            "l2" => model.hyperparams.l2_strength = value.parse().unwrap_or(1.0),
            "tol" => model.hyperparams.tolerance = value.parse().unwrap_or(1e-6),
            "max_iter" => model.hyperparams.max_iterations = value.parse().unwrap_or(1000),
            "seed" => model.hyperparams.seed = value.parse().unwrap_or(0),
            "converged" => model.converged = value == "true",
            _ => {}
        }
    }
    for line in lines {
        let line = line.map_err(|e| Error::io("<model>", e))?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#scale\t") {
            let parts: Vec<&str> = rest.split('\t').collect();
            if parts.len() != 3 {
                return Err(Error::Validation("malformed scaler row".into()));
            }
            model.scaler.insert(
                parts[0].parse().map_err(|_| Error::Validation("bad scaler column".into()))?,
                (
                    parts[1].parse().map_err(|_| Error::Validation("bad scaler mean".into()))?,
                    parts[2].parse().map_err(|_| Error::Validation("bad scaler std".into()))?,
                ),
            );
            continue;
        }
        let (name, weight) = line
            .split_once('\t')
            .ok_or_else(|| Error::Validation("malformed weight row".into()))?;
        model.feature_names.push(name.to_string());
        model
            .weights
            .push(weight.parse().map_err(|_| Error::Validation("bad weight".into()))?);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_extraction::FeatureKind;

    fn eid(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn pid(s: &str) -> PropertyId {
        PropertyId::new(s).unwrap()
    }

    fn dataset(rows: Vec<(&str, SparseVec, bool)>, names: Vec<&str>) -> LabeledDataset {
        LabeledDataset {
            property: pid("P54"),
            feature_names: names.into_iter().map(String::from).collect(),
            standardized_columns: vec![],
            rows: rows
                .into_iter()
                .map(|(e, features, target)| DatasetRow {
                    entity: eid(e),
                    features,
                    target,
                })
                .collect(),
        }
    }

    fn separable_1d(n: usize) -> LabeledDataset {
        let rows = (0..n)
            .map(|i| {
                let positive = i % 2 == 0;
                let x = if positive { 1.0 } else { -1.0 };
                (format!("Q{i}"), vec![(0usize, x)], positive)
            })
            .collect::<Vec<_>>();
        LabeledDataset {
            property: pid("P54"),
            feature_names: vec!["x".into()],
            standardized_columns: vec![],
            rows: rows
                .into_iter()
                .map(|(e, features, target)| DatasetRow {
                    entity: EntityId::new(e).unwrap(),
                    features,
                    target,
                })
                .collect(),
        }
    }

    #[test]
    fn balancing_downsamples_majority_deterministically() {
        let mut rows = BTreeMap::new();
        let mut targets = Vec::new();
        for i in 0..100 {
            let e = eid(&format!("Q{i:03}"));
            rows.insert(e.clone(), vec![(0, i as f64)]);
            targets.push((e, i < 60)); // 60 positive, 40 negative
        }
        let features = FeatureMatrix {
            kind: FeatureKind::Scalar,
            names: vec!["x".into()],
            rows,
        };
        let (ds, stats) = build_dataset_from_targets(&pid("P54"), &targets, &features, &[0], 7).unwrap();
        assert_eq!(ds.positives(), 40);
        assert_eq!(ds.negatives(), 40);
        assert_eq!(stats.discarded_by_balancing, 20);
        let (ds2, _) = build_dataset_from_targets(&pid("P54"), &targets, &features, &[0], 7).unwrap();
        assert_eq!(ds, ds2);
        let (ds3, _) = build_dataset_from_targets(&pid("P54"), &targets, &features, &[0], 8).unwrap();
        assert_ne!(ds, ds3);
    }

    #[test]
    fn zero_positives_is_an_error() {
        let mut rows = BTreeMap::new();
        rows.insert(eid("Q1"), vec![(0, 1.0)]);
        rows.insert(eid("Q2"), vec![(0, 2.0)]);
        let features = FeatureMatrix {
            kind: FeatureKind::Scalar,
            names: vec!["x".into()],
            rows,
        };
        let targets = vec![(eid("Q1"), false), (eid("Q2"), false)];
        assert!(build_dataset_from_targets(&pid("P54"), &targets, &features, &[], 0).is_err());
    }

    #[test]
    fn missing_features_are_dropped_and_counted() {
        let mut rows = BTreeMap::new();
        rows.insert(eid("Q1"), vec![(0, 1.0)]);
        rows.insert(eid("Q2"), vec![(0, 2.0)]);
        let features = FeatureMatrix {
            kind: FeatureKind::Scalar,
            names: vec!["x".into()],
            rows,
        };
        let targets = vec![(eid("Q1"), true), (eid("Q2"), false), (eid("Q3"), true)];
        let (ds, stats) = build_dataset_from_targets(&pid("P54"), &targets, &features, &[], 0).unwrap();
        assert_eq!(stats.dropped_missing_features, 1);
        assert_eq!(ds.rows.len(), 2);
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let ds = separable_1d(100);
        let (train, test) = split(&ds, 0.4, 3).unwrap();
        assert_eq!(train.rows.len(), 60);
        assert_eq!(test.rows.len(), 40);
        assert_eq!(train.positives(), 30);
        assert_eq!(test.positives(), 20);
        let (train2, test2) = split(&ds, 0.4, 3).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        assert!(split(&ds, 0.3, 3).is_err());
        assert!(split(&ds, 0.95, 3).is_err());
    }

    #[test]
    fn split_small_set_sizes() {
        let ds = separable_1d(10);
        let (train, test) = split(&ds, 0.4, 0).unwrap();
        // 5 per class, 2 test per class
        assert_eq!(test.rows.len(), 4);
        assert_eq!(train.rows.len(), 6);
        assert_eq!(test.positives(), 2);
    }

    #[test]
    fn separable_data_trains_to_perfect_f1() {
        let ds = dataset(
            vec![("Q1", vec![(0, -1.0)], false), ("Q2", vec![(0, 1.0)], true)],
            vec!["x"],
        );
        let hp = Hyperparams {
            l2_strength: 0.1,
            ..Default::default()
        };
        let model = train(&ds, &hp).unwrap();
        assert!(model.weights[0] > 0.0);
        let m = evaluate(&model, &ds).unwrap();
        assert_eq!(m.f1, 1.0);
    }

    #[test]
    fn uninformative_feature_gives_near_half_probability() {
        let ds = dataset(
            vec![
                ("Q1", vec![(0, 1.0)], true),
                ("Q2", vec![(0, 1.0)], false),
                ("Q3", vec![(0, 1.0)], true),
                ("Q4", vec![(0, 1.0)], false),
            ],
            vec!["x"],
        );
        let model = train(&ds, &Hyperparams::default()).unwrap();
        assert!(model.weights[0].abs() < 1e-3);
        let (p, _) = predict(&model, &vec![(0, 1.0)]).unwrap();
        assert!((p - 0.5).abs() < 1e-3);
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let ds = dataset(
            vec![
                ("Q1", vec![(0, 0.3), (1, -1.2)], true),
                ("Q2", vec![(0, -0.7)], false),
                ("Q3", vec![(1, 2.0)], true),
                ("Q4", vec![(0, 0.1), (1, 0.4)], false),
            ],
            vec!["a", "b"],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let l2 = 0.5;
        let eps = 1e-6;
        for _ in 0..20 {
            let w: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: f64 = rng.gen_range(-2.0..2.0);
            let (_, grad_w, grad_b) = loss_and_grad(&ds.rows, &w, b, l2);
            for j in 0..2 {
                let mut wp = w.clone();
                wp[j] += eps;
                let mut wm = w.clone();
                wm[j] -= eps;
                let fd = (loss_and_grad(&ds.rows, &wp, b, l2).0 - loss_and_grad(&ds.rows, &wm, b, l2).0) / (2.0 * eps);
                let scale = grad_w[j].abs().max(1.0);
                assert!((grad_w[j] - fd).abs() / scale < 1e-5, "weight grad mismatch");
            }
            let fd_b = (loss_and_grad(&ds.rows, &w, b + eps, l2).0 - loss_and_grad(&ds.rows, &w, b - eps, l2).0) / (2.0 * eps);
            assert!((grad_b - fd_b).abs() / grad_b.abs().max(1.0) < 1e-5);
        }
    }

    #[test]
    fn loss_trace_is_monotone_nonincreasing() {
        let ds = separable_1d(40);
        let trace = training_loss_trace(&ds, &Hyperparams::default()).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn convex_objective_makes_seed_irrelevant_at_convergence() {
        let ds = separable_1d(40);
        let hp = |seed| Hyperparams {
            l2_strength: 1.0,
            seed,
            ..Default::default()
        };
        let m1 = train(&ds, &hp(1)).unwrap();
        let m2 = train(&ds, &hp(999)).unwrap();
        for (a, b) in m1.weights.iter().zip(&m2.weights) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((m1.bias - m2.bias).abs() < 1e-4);
    }

    #[test]
    fn predict_matches_hand_computed_sigmoid() {
        let model = LogRegModel {
            feature_names: vec!["x".into()],
            weights: vec![1.0],
            bias: 0.0,
            hyperparams: Hyperparams::default(),
            converged: true,
            scaler: BTreeMap::new(),
        };
        let (p, label) = predict(&model, &vec![(0, 2.0)]).unwrap();
        assert!((p - 0.8808).abs() < 1e-4);
        assert!(label);
        // zero weights, zero bias -> 0.5, label true at the >= threshold
        let zero = LogRegModel {
            weights: vec![0.0],
            ..model.clone()
        };
        let (p, label) = predict(&zero, &vec![(0, 5.0)]).unwrap();
        assert_eq!(p, 0.5);
        assert!(label);
        // decision threshold equals sign of the linear score
        let (p_neg, label_neg) = predict(&model, &vec![(0, -0.1)]).unwrap();
        assert!(p_neg < 0.5 && !label_neg);
        assert!(predict(&model, &vec![(3, 1.0)]).is_err());
    }

    #[test]
    fn constant_positive_model_metrics_on_balanced_data() {
        let ds = separable_1d(20);
        let model = LogRegModel {
            feature_names: vec!["x".into()],
            weights: vec![0.0],
            bias: 10.0,
            hyperparams: Hyperparams::default(),
            converged: true,
            scaler: BTreeMap::new(),
        };
        let m = evaluate(&model, &ds).unwrap();
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn inspect_ranks_dominant_weight_first() {
        let model = LogRegModel {
            feature_names: vec!["a".into(), "signed".into(), "c".into()],
            weights: vec![0.1, 3.0, -2.0],
            bias: 0.0,
            hyperparams: Hyperparams::default(),
            converged: true,
            scaler: BTreeMap::new(),
        };
        let (pos, neg) = inspect(&model, 2);
        assert_eq!(pos[0].0, "signed");
        assert_eq!(neg[0].0, "c");
        // top_k beyond dimension clamps to the full ranking
        let (pos_all, _) = inspect(&model, 10);
        assert_eq!(pos_all.len(), 3);
    }

    #[test]
    fn model_roundtrip() {
        let ds = separable_1d(10);
        let mut ds = ds;
        ds.standardized_columns = vec![0];
        let model = train(&ds, &Hyperparams::default()).unwrap();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let read = read_model(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(read.feature_names, model.feature_names);
        assert_eq!(read.weights, model.weights);
        assert_eq!(read.bias, model.bias);
        assert_eq!(read.scaler, model.scaler);
    }
}
