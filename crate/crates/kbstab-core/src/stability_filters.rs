//! Filters that rule out inherently stable entities and properties before
//! prediction.
//!
//! Entities with a terminating property (death date, dissolution date, ...)
//! are stable; so are entities with low encyclopedia edit activity, though
//! that heuristic has little relation to real-world stability and ships
//! disabled by default. Properties are filtered with the 5% heuristic: a
//! property is unstable for a class when at least 5% of the class's entities
//! have changed it at least once, under one of three change-count measures.

use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::ingest::EditLogEntry;
use crate::kb_model::{EntityId, Interval, KbTimestamp, PropertyId, Snapshot};
use crate::metrics::Metrics;

/// How the number of past changes of a (subject, property) pair is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeCountMeasure {
    /// Entries in the KB edit log for the pair.
    KbEdits,
    /// Number of objects minus one: a pair holding a single value since
    /// creation has changed zero times.
    ObjectMultiplicity,
    /// Number of timestamped records minus one.
    TimestampMultiplicity,
}

impl ChangeCountMeasure {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeCountMeasure::KbEdits => "kb_edits",
            ChangeCountMeasure::ObjectMultiplicity => "objects",
            ChangeCountMeasure::TimestampMultiplicity => "timestamps",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "kb_edits" => Some(ChangeCountMeasure::KbEdits),
            "objects" => Some(ChangeCountMeasure::ObjectMultiplicity),
            "timestamps" => Some(ChangeCountMeasure::TimestampMultiplicity),
            _ => None,
        }
    }
}

/// Thresholds of the encyclopedia-activity heuristic.
#[derive(Debug, Clone)]
pub struct ActivityThresholds {
    pub max_edits: usize,
    pub max_relative_growth: f64,
}

impl Default for ActivityThresholds {
    fn default() -> Self {
        ActivityThresholds {
            max_edits: 10,
            max_relative_growth: 0.05,
        }
    }
}

/// True iff the subject carries at least one terminating-property fact
/// (e.g. a death date), marking it inherently stable.
pub fn entity_is_stable(
    snapshot: &Snapshot,
    subject: &EntityId,
    terminating_properties: &HashSet<PropertyId>,
) -> Result<bool> {
    if terminating_properties.is_empty() {
        return Err(Error::Validation(
            "terminating property set must be non-empty".into(),
        ));
    }
    Ok(snapshot
        .subject_facts(subject)
        .iter()
        .any(|f| terminating_properties.contains(&f.property)))
}

/// Activity-based entity stability: few in-window edits AND little relative
/// page growth. Both conditions must hold.
pub fn entity_activity_stable(
    edit_log: &[EditLogEntry],
    article_sizes: &[(KbTimestamp, u64)],
    window: Interval,
    thresholds: &ActivityThresholds,
) -> bool {
    let edits = edit_log
        .iter()
        .filter(|e| window.contains(e.transaction_time))
        .count();
    if edits >= thresholds.max_edits {
        return false;
    }
    let size_at = |t: KbTimestamp| {
        article_sizes
            .iter()
            .filter(|(at, _)| *at <= t)
            .max_by_key(|(at, _)| *at)
            .map(|(_, size)| *size)
    };
    let growth = match (size_at(window.tau1()), size_at(window.tau2())) {
        (Some(before), Some(after)) if before > 0 => {
            (after as f64 - before as f64) / before as f64
        }
        (Some(0), Some(after)) if after > 0 => f64::INFINITY,
        _ => 0.0,
    };
    growth < thresholds.max_relative_growth
}

/// Number of past changes of (subject, property) under the given measure.
pub fn property_change_count(
    subject: &EntityId,
    property: &PropertyId,
    measure: ChangeCountMeasure,
    snapshot: &Snapshot,
    edit_log: Option<&[EditLogEntry]>,
) -> Result<usize> {
    match measure {
        ChangeCountMeasure::KbEdits => {
            let log = edit_log.ok_or_else(|| {
                Error::MissingInput("kb_edits measure requires an edit log".into())
            })?;
            Ok(log
                .iter()
                .filter(|e| e.subject == *subject && e.property == *property)
                .count())
        }
        ChangeCountMeasure::ObjectMultiplicity => {
            let state = snapshot.project(subject, property);
            let objects: HashSet<_> = state.records().iter().map(|r| &r.object).collect();
            Ok(objects.len().saturating_sub(1))
        }
        ChangeCountMeasure::TimestampMultiplicity => {
            let state = snapshot.project(subject, property);
            let timestamped = state
                .records()
                .iter()
                .filter(|r| r.valid_time.is_some())
                .count();
            Ok(timestamped.saturating_sub(1))
        }
    }
}

/// The 5% filtering heuristic: a property is unstable for a class iff the
/// fraction of entities that have changed it at least once reaches the
/// threshold.
pub fn property_is_unstable(
    class_entities: &[EntityId],
    property: &PropertyId,
    measure: ChangeCountMeasure,
    threshold: f64,
    snapshot: &Snapshot,
    edit_log: Option<&[EditLogEntry]>,
) -> Result<bool> {
    Ok(property_changed_fraction(class_entities, property, measure, snapshot, edit_log)? >= threshold)
}

/// Fraction of class entities whose change count for the property is >= 1.
pub fn property_changed_fraction(
    class_entities: &[EntityId],
    property: &PropertyId,
    measure: ChangeCountMeasure,
    snapshot: &Snapshot,
    edit_log: Option<&[EditLogEntry]>,
) -> Result<f64> {
    if class_entities.is_empty() {
        return Err(Error::Validation("entity class must be non-empty".into()));
    }
    let mut changed = 0usize;
    for entity in class_entities {
        if property_change_count(entity, property, measure, snapshot, edit_log)? >= 1 {
            changed += 1;
        }
    }
    Ok(changed as f64 / class_entities.len() as f64)
}

/// Evaluate predicted property-instability flags against gold flags,
/// treating unstable as the positive class.
pub fn evaluate_filter(
    predicted: &BTreeMap<PropertyId, bool>,
    gold: &BTreeMap<PropertyId, bool>,
) -> Result<Metrics> {
    let missing: Vec<String> = gold
        .keys()
        .filter(|k| !predicted.contains_key(*k))
        .chain(predicted.keys().filter(|k| !gold.contains_key(*k)))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "predicted/gold key sets differ on: {}",
            missing.join(", ")
        )));
    }
    let pairs: Vec<(bool, bool)> = gold
        .iter()
        .map(|(k, &g)| (g, predicted[k]))
        .collect();
    Ok(Metrics::from_binary(&pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::EditKind;
    use crate::kb_model::{Fact, ObjectValue};

    fn eid(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn pid(s: &str) -> PropertyId {
        PropertyId::new(s).unwrap()
    }

    fn day(y: i32, m: u32, d: u32) -> KbTimestamp {
        KbTimestamp::from_ymd(y, m, d).unwrap()
    }

    fn fact(s: &str, p: &str, o: &str, tv: Option<KbTimestamp>) -> Fact {
        Fact {
            subject: eid(s),
            property: pid(p),
            object: ObjectValue::literal(o),
            valid_time: tv,
            transaction_time: day(2015, 1, 1),
        }
    }

    #[test]
    fn death_and_dissolution_mark_entities_stable() {
        let snap = Snapshot::new(
            day(2020, 1, 1),
            vec![
                fact("Einstein", "death_date", "1955", None),
                fact("Einstein", "field", "physics", None),
                fact("Ronaldo", "team", "Juventus", None),
                fact("Kodak", "dissolution_date", "2012", None),
            ],
        )
        .unwrap();
        let terminating: HashSet<PropertyId> =
            [pid("death_date"), pid("dissolution_date")].into_iter().collect();
        assert!(entity_is_stable(&snap, &eid("Einstein"), &terminating).unwrap());
        assert!(entity_is_stable(&snap, &eid("Kodak"), &terminating).unwrap());
        assert!(!entity_is_stable(&snap, &eid("Ronaldo"), &terminating).unwrap());
        assert!(entity_is_stable(&snap, &eid("Ronaldo"), &HashSet::new()).is_err());
    }

    #[test]
    fn activity_heuristic_is_a_conjunction() {
        let window = Interval::new(day(2019, 1, 1), day(2020, 1, 1)).unwrap();
        let thresholds = ActivityThresholds {
            max_edits: 10,
            max_relative_growth: 0.05,
        };
        let edit = |d: u32| EditLogEntry {
            subject: eid("Q1"),
            property: pid("P1"),
            transaction_time: day(2019, 6, d.min(28)),
            kind: EditKind::Modify,
        };
        // zero edits, zero growth
        assert!(entity_activity_stable(&[], &[], window, &thresholds));
        // 40 edits and 30% growth
        let busy: Vec<_> = (0..40).map(|i| edit(i % 28 + 1)).collect();
        let sizes = vec![(day(2019, 1, 1), 1000u64), (day(2019, 12, 1), 1300u64)];
        assert!(!entity_activity_stable(&busy, &sizes, window, &thresholds));
        // edits below threshold but growth above: still unstable
        let quiet: Vec<_> = (0..3).map(|i| edit(i + 1)).collect();
        assert!(!entity_activity_stable(&quiet, &sizes, window, &thresholds));
    }

    #[test]
    fn change_count_measures() {
        // Ronaldo team with 4 timestamped objects -> 3 changes
        let snap = Snapshot::new(
            day(2020, 1, 1),
            vec![
                fact("Ronaldo", "team", "Sporting", Some(KbTimestamp::from_year(2002))),
                fact("Ronaldo", "team", "ManU", Some(KbTimestamp::from_year(2003))),
                fact("Ronaldo", "team", "RealMadrid", Some(KbTimestamp::from_year(2009))),
                fact("Ronaldo", "team", "Juventus", Some(KbTimestamp::from_year(2018))),
                fact("Ronaldo", "citizenship", "Portugal", None),
            ],
        )
        .unwrap();
        let count = |p: &str, m| property_change_count(&eid("Ronaldo"), &pid(p), m, &snap, None).unwrap();
        assert_eq!(count("team", ChangeCountMeasure::TimestampMultiplicity), 3);
        assert_eq!(count("team", ChangeCountMeasure::ObjectMultiplicity), 3);
        assert_eq!(count("citizenship", ChangeCountMeasure::ObjectMultiplicity), 0);
        assert_eq!(count("citizenship", ChangeCountMeasure::TimestampMultiplicity), 0);

        let log = vec![
            EditLogEntry { subject: eid("Ronaldo"), property: pid("team"), transaction_time: day(2019, 1, 1), kind: EditKind::Add };
            5
        ];
        assert_eq!(
            property_change_count(&eid("Ronaldo"), &pid("team"), ChangeCountMeasure::KbEdits, &snap, Some(&log)).unwrap(),
            5
        );
        assert!(matches!(
            property_change_count(&eid("Ronaldo"), &pid("team"), ChangeCountMeasure::KbEdits, &snap, None),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn timestamp_multiplicity_never_exceeds_object_multiplicity() {
        let snap = Snapshot::new(
            day(2020, 1, 1),
            vec![
                fact("Q1", "P1", "a", Some(KbTimestamp::from_year(2001))),
                fact("Q1", "P1", "b", None),
                fact("Q1", "P1", "c", Some(KbTimestamp::from_year(2003))),
            ],
        )
        .unwrap();
        let om = property_change_count(&eid("Q1"), &pid("P1"), ChangeCountMeasure::ObjectMultiplicity, &snap, None).unwrap();
        let tm = property_change_count(&eid("Q1"), &pid("P1"), ChangeCountMeasure::TimestampMultiplicity, &snap, None).unwrap();
        assert!(tm <= om);
    }

    #[test]
    fn five_percent_filter() {
        // 100 entities, 6 with two objects for P1
        let mut facts = Vec::new();
        for i in 0..100 {
            let s = format!("Q{i}");
            facts.push(fact(&s, "P1", "a", None));
            if i < 6 {
                facts.push(fact(&s, "P1", "b", None));
            }
        }
        let snap = Snapshot::new(day(2020, 1, 1), facts).unwrap();
        let entities: Vec<EntityId> = (0..100).map(|i| eid(&format!("Q{i}"))).collect();
        let unstable = |threshold| {
            property_is_unstable(&entities, &pid("P1"), ChangeCountMeasure::ObjectMultiplicity, threshold, &snap, None).unwrap()
        };
        assert!(unstable(0.05)); // 0.06 >= 0.05
        assert!(!unstable(0.07));
        assert!(unstable(0.0));
        // all-zero counts stay stable at any positive threshold
        assert!(!property_is_unstable(&entities, &pid("P2"), ChangeCountMeasure::ObjectMultiplicity, 0.05, &snap, None).unwrap());
        assert!(property_is_unstable(&[], &pid("P1"), ChangeCountMeasure::ObjectMultiplicity, 0.05, &snap, None).is_err());
    }

    #[test]
    fn filter_evaluation() {
        let flags = |pairs: &[(&str, bool)]| -> BTreeMap<PropertyId, bool> {
            pairs.iter().map(|(p, b)| (pid(p), *b)).collect()
        };
        let gold = flags(&[("P1", true), ("P2", false), ("P3", true)]);
        let m = evaluate_filter(&gold.clone(), &gold).unwrap();
        assert_eq!(m.f1, 1.0);

        let all_stable = flags(&[("P1", false), ("P2", false), ("P3", false)]);
        let m = evaluate_filter(&all_stable, &gold).unwrap();
        assert_eq!(m.recall, 0.0);

        let short = flags(&[("P1", true)]);
        assert!(evaluate_filter(&short, &gold).is_err());
    }
}
