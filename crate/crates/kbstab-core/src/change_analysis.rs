//! Observable change detection between two snapshots and classification of
//! each change's cause.
//!
//! Any difference in a pair's object-timestamps set is an *observable*
//! change. Observable changes subsume three causes: real-world evolution,
//! delayed completion, and correction. Corrections (edits, replacements,
//! removals of existing values) are recognized structurally; the remaining
//! additions are split into real-world vs completion by one of three
//! heuristic criteria: an explicit valid time inside the interval
//! (timestamp), a new object added to an already non-empty list (partial
//! completeness), or additions not all recorded on the same calendar day
//! (bulk).

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::ingest::GoldLabel;
use crate::kb_model::{Interval, PairRecord, PairState, Snapshot, StabilityMode};
use crate::metrics::Metrics;

/// Cause assigned to an observed change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum CauseLabel {
    /// No observable change.
    #[default]
    None,
    Correction,
    Completion,
    RealWorld,
}

impl CauseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CauseLabel::None => "none",
            CauseLabel::Correction => "correction",
            CauseLabel::Completion => "completion",
            CauseLabel::RealWorld => "real_world",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(CauseLabel::None),
            "correction" => Some(CauseLabel::Correction),
            "completion" => Some(CauseLabel::Completion),
            "real_world" => Some(CauseLabel::RealWorld),
            _ => None,
        }
    }
}

impl fmt::Display for CauseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which heuristic decides real-world vs completion for additions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Criterion {
    Timestamp,
    Pca,
    Bulk,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Timestamp, Criterion::Pca, Criterion::Bulk];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Timestamp => "timestamp",
            Criterion::Pca => "pca",
            Criterion::Bulk => "bulk",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "timestamp" => Some(Criterion::Timestamp),
            "pca" => Some(Criterion::Pca),
            "bulk" => Some(Criterion::Bulk),
            _ => None,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdicts of all criteria on one change, recorded regardless of which
/// criterion was chosen, plus a flag for correction evidence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Signals {
    pub timestamp: bool,
    pub pca: bool,
    pub bulk: bool,
    pub correction: bool,
}

impl Signals {
    pub fn get(&self, criterion: Criterion) -> bool {
        match criterion {
            Criterion::Timestamp => self.timestamp,
            Criterion::Pca => self.pca,
            Criterion::Bulk => self.bulk,
        }
    }
}

/// Diff of one (subject, property) pair between two snapshots, with the
/// assigned cause.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeRecord {
    pub subject: crate::kb_model::EntityId,
    pub property: crate::kb_model::PropertyId,
    pub interval: Interval,
    pub added: Vec<PairRecord>,
    pub removed: Vec<PairRecord>,
    pub modified: Vec<(PairRecord, PairRecord)>,
    pub assigned_label: CauseLabel,
    pub signals: Signals,
}

impl ChangeRecord {
    pub fn is_change(&self) -> bool {
        !(self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty())
    }

    /// Cause this record would get under another criterion, derived from the
    /// recorded signals and diff structure.
    pub fn label_under(&self, criterion: Criterion) -> CauseLabel {
        if !self.is_change() {
            CauseLabel::None
        } else if self.added.is_empty() {
            CauseLabel::Correction
        } else if self.signals.get(criterion) {
            CauseLabel::RealWorld
        } else {
            CauseLabel::Completion
        }
    }
}

/// Knobs of the diff/classification engine.
#[derive(Debug, Clone)]
pub struct DiffConfig {
    /// Normalized edit similarity at or above which two literal texts with
    /// the same valid time count as one modified value.
    pub similarity_threshold: f64,
    /// Restrict the timestamp criterion to records added in the interval
    /// instead of all of state2.
    pub timestamp_added_only: bool,
    /// Whether record identity includes transaction times.
    pub stability_mode: StabilityMode,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            similarity_threshold: 0.8,
            timestamp_added_only: false,
            stability_mode: StabilityMode::IgnoreTransactionTime,
        }
    }
}

/// True iff the pair's object-timestamps sets differ between the snapshots.
pub fn observable_change(state1: &PairState, state2: &PairState) -> Result<bool> {
    Ok(!state1.is_stable(state2)?)
}

/// Set-difference diff on (object, valid_time) identities, then pairing of
/// removed/added records that represent one edited value: same object with a
/// different valid time, or same valid time with edit-similar object text.
pub fn diff(
    state1: &PairState,
    state2: &PairState,
    interval: Interval,
    config: &DiffConfig,
) -> Result<ChangeRecord> {
    state1.check_same_pair(state2)?;
    let identity = |r: &PairRecord| match config.stability_mode {
        StabilityMode::IgnoreTransactionTime => {
            (r.object.clone(), r.valid_time, None)
        }
        StabilityMode::Strict => (r.object.clone(), r.valid_time, Some(r.transaction_time)),
    };
    let ids1: HashSet<_> = state1.records().iter().map(identity).collect();
    let ids2: HashSet<_> = state2.records().iter().map(identity).collect();
    let mut removed: Vec<PairRecord> = state1
        .records()
        .iter()
        .filter(|r| !ids2.contains(&identity(r)))
        .cloned()
        .collect();
    let mut added: Vec<PairRecord> = state2
        .records()
        .iter()
        .filter(|r| !ids1.contains(&identity(r)))
        .cloned()
        .collect();

    let mut modified = Vec::new();
    // pass 1: same object, different valid time
    pair_off(&mut removed, &mut added, &mut modified, |r, a| r.object == a.object);
    // pass 2: same valid time with a replaced value. Entity references pair
    // unconditionally (a reference swap is an ontology refinement, UK ->
    // Britain); literals must be edit-similar so unrelated values stay apart.
    pair_off(&mut removed, &mut added, &mut modified, |r, a| {
        r.valid_time == a.valid_time
            && (both_entities(r, a)
                || normalized_similarity(r.object.canonical_text(), a.object.canonical_text())
                    >= config.similarity_threshold)
    });

    Ok(ChangeRecord {
        subject: state1.subject().clone(),
        property: state1.property().clone(),
        interval,
        added,
        removed,
        modified,
        assigned_label: CauseLabel::None,
        signals: Signals::default(),
    })
}

fn both_entities(a: &PairRecord, b: &PairRecord) -> bool {
    matches!(
        (&a.object, &b.object),
        (
            crate::kb_model::ObjectValue::Entity(_),
            crate::kb_model::ObjectValue::Entity(_)
        )
    )
}

fn pair_off(
    removed: &mut Vec<PairRecord>,
    added: &mut Vec<PairRecord>,
    modified: &mut Vec<(PairRecord, PairRecord)>,
    matches: impl Fn(&PairRecord, &PairRecord) -> bool,
) {
    let mut r_idx = 0;
    while r_idx < removed.len() {
        match added.iter().position(|a| matches(&removed[r_idx], a)) {
            Some(a_idx) => {
                let before = removed.remove(r_idx);
                let after = added.remove(a_idx);
                modified.push((before, after));
            }
            None => r_idx += 1,
        }
    }
}

/// Normalized indel similarity: `2 * LCS(a, b) / (|a| + |b|)`, i.e. one
/// minus the insertion-deletion edit distance over the total length. 1.0 for
/// two empty strings. Small numeric refinements like `185cm` vs `185.4cm`
/// score 0.83; unrelated names like `UK` vs `Britain` score 0.
pub fn normalized_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.len() + b.len() == 0 {
        return 1.0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for ca in &a {
        for (j, cb) in b.iter().enumerate() {
            curr[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    2.0 * prev[b.len()] as f64 / (a.len() + b.len()) as f64
}

/// Timestamp criterion: some record of state2 carries a valid time inside
/// `(tau1, tau2]` (strict lower bound).
pub fn timestamp_criterion(state2: &PairState, interval: Interval) -> bool {
    timestamp_over(state2.records(), interval)
}

fn timestamp_over(records: &[PairRecord], interval: Interval) -> bool {
    records
        .iter()
        .any(|r| r.valid_time.is_some_and(|tv| interval.contains(tv)))
}

///// Partial-completeness criterion: a new object was added to an already
/// non-empty object list.
pub fn pca_criterion(state1: &PairState, state2: &PairState) -> bool {
    if state1.is_empty() {
        return false;
    }
    let objects1: HashSet<_> = state1.records().iter().map(|r| &r.object).collect();
    state2.records().iter().any(|r| !objects1.contains(&r.object))
}

/// Bulk criterion, returned as a real-world verdict: a single new object, or
/// two distinct new objects recorded on different calendar days. All new
/// objects landing on one day is the bulk-completion signature.
pub fn bulk_criterion(state1: &PairState, state2: &PairState) -> bool {
    let objects1: HashSet<_> = state1.records().iter().map(|r| &r.object).collect();
    let mut days_by_object: BTreeMap<&crate::kb_model::ObjectValue, Vec<chrono::NaiveDate>> =
        BTreeMap::new();
    for r in state2.records() {
        if !objects1.contains(&r.object) {
            days_by_object
                .entry(&r.object)
                .or_default()
                .push(r.transaction_time.earliest_day());
        }
    }
    if days_by_object.len() <= 1 {
        return true;
    }
    let objects: Vec<_> = days_by_object.values().collect();
    for i in 0..objects.len() {
        for j in i + 1..objects.len() {
            for d1 in objects[i] {
                if objects[j].iter().any(|d2| d1 != d2) {
                    return true;
                }
            }
        }
    }
    false
}

/// Diff the pair and assign a cause. Pure removals/modifications are always
/// corrections; otherwise the chosen criterion splits additions into
/// real-world vs completion. Mixed records take the criterion's verdict with
/// the correction flag set in the signals.
pub fn classify(
    state1: &PairState,
    state2: &PairState,
    interval: Interval,
    criterion: Criterion,
    config: &DiffConfig,
) -> Result<ChangeRecord> {
    let mut record = diff(state1, state2, interval, config)?;
    record.signals = Signals {
        timestamp: if config.timestamp_added_only {
            timestamp_over(&record.added, interval)
        } else {
            timestamp_criterion(state2, interval)
        },
        pca: pca_criterion(state1, state2),
        bulk: bulk_criterion(state1, state2),
        correction: !record.removed.is_empty() || !record.modified.is_empty(),
    };
    record.assigned_label = record.label_under(criterion);
    Ok(record)
}

/// Diff every (subject, property) pair present in either snapshot and
/// classify the ones that changed. Output is sorted by (subject, property).
pub fn analyze_snapshots(
    snap1: &Snapshot,
    snap2: &Snapshot,
    criterion: Criterion,
    config: &DiffConfig,
) -> Result<Vec<ChangeRecord>> {
    let interval = Interval::new(snap1.sampled_at(), snap2.sampled_at())?;
    let mut records = Vec::new();
    let mut iter1 = snap1.pairs().peekable();
    let mut iter2 = snap2.pairs().peekable();

    loop {
        enum Side {
            Left,
            Right,
            Both,
        }
        let side = match (iter1.peek(), iter2.peek()) {
            (None, None) => break,
            (Some(_), None) => Side::Left,
            (None, Some(_)) => Side::Right,
            (Some((s1, p1, _)), Some((s2, p2, _))) => match (s1, p1).cmp(&(s2, p2)) {
                std::cmp::Ordering::Less => Side::Left,
                std::cmp::Ordering::Greater => Side::Right,
                std::cmp::Ordering::Equal => Side::Both,
            },
        };
        let (state1, state2) = match side {
            Side::Left => {
                let (s, p, _) = iter1.peek().unwrap();
                let (s, p) = ((*s).clone(), (*p).clone());
                let st1 = snap1.project(&s, &p);
                let st2 = PairState::empty(s, p);
                iter1.next();
                (st1, st2)
            }
            Side::Right => {
                let (s, p, _) = iter2.peek().unwrap();
                let (s, p) = ((*s).clone(), (*p).clone());
                let st2 = snap2.project(&s, &p);
                let st1 = PairState::empty(s, p);
                iter2.next();
                (st1, st2)
            }
            Side::Both => {
                let (s, p, _) = iter1.peek().unwrap();
                let (s, p) = ((*s).clone(), (*p).clone());
                let st1 = snap1.project(&s, &p);
                let st2 = snap2.project(&s, &p);
                iter1.next();
                iter2.next();
                (st1, st2)
            }
        };
        let record = classify(&state1, &state2, interval, criterion, config)?;
        if record.is_change() {
            records.push(record);
        }
    }
    Ok(records)
}

/// Per-criterion evaluation against gold cause labels, treating real_world
/// as the positive class, plus the gold cause distribution.
#[derive(Debug, Clone)]
pub struct CriteriaEvaluation {
    pub per_criterion: Vec<(Criterion, Metrics)>,
    pub gold_distribution: BTreeMap<String, usize>,
}

pub fn evaluate_criteria(records: &[ChangeRecord], gold: &[GoldLabel]) -> Result<CriteriaEvaluation> {
    let gold_map: BTreeMap<_, CauseLabel> = gold
        .iter()
        .map(|g| ((g.subject.clone(), g.property.clone(), g.interval.tau1(), g.interval.tau2()), g.label))
        .collect();

    let mut missing = Vec::new();
    let mut matched: Vec<(&ChangeRecord, CauseLabel)> = Vec::new();
    for r in records {
        let key = (r.subject.clone(), r.property.clone(), r.interval.tau1(), r.interval.tau2());
        match gold_map.get(&key) {
            Some(&label) => matched.push((r, label)),
            None => missing.push(format!("({}, {}, {})", r.subject, r.property, r.interval)),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "no gold label for changes: {}",
            missing.join(", ")
        )));
    }

    let mut gold_distribution = BTreeMap::new();
    for (_, label) in &matched {
        *gold_distribution.entry(label.to_string()).or_insert(0) += 1;
    }

    let per_criterion = Criterion::ALL
        .iter()
        .map(|&c| {
            let pairs: Vec<(String, String)> = matched
                .iter()
                .map(|(r, gold)| (gold.to_string(), r.label_under(c).to_string()))
                .collect();
            (c, Metrics::from_labels(&pairs, CauseLabel::RealWorld.as_str()))
        })
        .collect();

    Ok(CriteriaEvaluation {
        per_criterion,
        gold_distribution,
    })
}
