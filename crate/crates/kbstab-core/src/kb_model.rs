//! Core temporal-KB data model.
//!
//! A KB is a set of quintuple facts `(subject, property, object, valid_time,
//! transaction_time)`. **Valid time** is when the fact held in the world,
//! **transaction time** is when it was recorded in the KB. Valid time may be
//! absent; transaction time never is. A [`Snapshot`] is the set of facts
//! visible at one sampling timepoint, and a [`PairState`] is the projection
//! of a snapshot onto one (subject, property) pair.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

/// Opaque entity identifier, e.g. `Q11571`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Validation("entity id must be non-empty".into()));
        }
        Ok(EntityId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque property identifier, e.g. `P54`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropertyId(String);

impl PropertyId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Validation("property id must be non-empty".into()));
        }
        Ok(PropertyId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Fact object: either another entity or a literal in canonical text form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectValue {
    Entity(EntityId),
    Literal(String),
}

impl ObjectValue {
    pub fn entity(id: impl Into<String>) -> Result<Self> {
        Ok(ObjectValue::Entity(EntityId::new(id)?))
    }

    pub fn literal(text: impl Into<String>) -> Self {
        ObjectValue::Literal(text.into())
    }

    /// Canonical text form, used for equality-free contexts like feature
    /// tokens and report output.
    pub fn canonical_text(&self) -> &str {
        match self {
            ObjectValue::Entity(e) => e.as_str(),
            ObjectValue::Literal(s) => s,
        }
    }

    pub fn kind_tag(&self) -> &'static str {
        match self {
            ObjectValue::Entity(_) => "entity",
            ObjectValue::Literal(_) => "literal",
        }
    }
}

/// Calendar precision of a KB timestamp. Finer precision sorts first among
/// timestamps coercing to the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Year,
    Month,
    Day,
}

impl Precision {
    pub fn tag(self) -> char {
        match self {
            Precision::Year => 'y',
            Precision::Month => 'm',
            Precision::Day => 'd',
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "y" => Some(Precision::Year),
            "m" => Some(Precision::Month),
            "d" => Some(Precision::Day),
            _ => None,
        }
    }

    fn fineness(self) -> u8 {
        match self {
            Precision::Day => 0,
            Precision::Month => 1,
            Precision::Year => 2,
        }
    }
}

/// Calendar timestamp with precision. Stored canonically: year precision
/// forces month=1, day=1; month precision forces day=1. Ordered by the
/// earliest instant the timestamp covers, ties broken by finer precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KbTimestamp {
    date: NaiveDate,
    precision: Precision,
}

impl KbTimestamp {
    pub fn new(date: NaiveDate, precision: Precision) -> Self {
        let date = match precision {
            Precision::Year => NaiveDate::from_ymd_opt(date.year(), 1, 1).unwrap(),
            Precision::Month => NaiveDate::from_ymd_opt(date.year(), date.month(), 1).unwrap(),
            Precision::Day => date,
        };
        KbTimestamp { date, precision }
    }

    pub fn from_year(year: i32) -> Self {
        KbTimestamp::new(NaiveDate::from_ymd_opt(year, 1, 1).unwrap(), Precision::Year)
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self> {
        let date = NaiveDate::from_ymd_opt(year, month, day)
            .ok_or_else(|| Error::Validation(format!("invalid date {year}-{month}-{day}")))?;
        Ok(KbTimestamp::new(date, Precision::Day))
    }

    /// Earliest calendar day covered by this timestamp.
    pub fn earliest_day(&self) -> NaiveDate {
        self.date
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn year(&self) -> i32 {
        self.date.year()
    }

    /// Fractional year of the earliest covered instant. Year-precision dates
    /// land exactly on the integer year, so gaps between them subtract as
    /// whole years.
    pub fn year_fraction(&self) -> f64 {
        let year_start = NaiveDate::from_ymd_opt(self.date.year(), 1, 1).unwrap();
        let days_in_year = if self.date.leap_year() { 366.0 } else { 365.0 };
        let elapsed = (self.date - year_start).num_days() as f64;
        self.date.year() as f64 + elapsed / days_in_year
    }

    /// Parse `YYYY-MM-DD|p` where `p` is one of `y`, `m`, `d`.
    pub fn parse(text: &str) -> Result<Self> {
        let (date_part, tag) = text
            .split_once('|')
            .ok_or_else(|| Error::Validation(format!("timestamp `{text}` missing precision tag")))?;
        let precision = Precision::from_tag(tag)
            .ok_or_else(|| Error::Validation(format!("unknown precision tag `{tag}`")))?;
        let date = NaiveDate::parse_from_str(date_part, "%Y-%m-%d")
            .map_err(|e| Error::Validation(format!("bad date `{date_part}`: {e}")))?;
        Ok(KbTimestamp::new(date, precision))
    }
}

impl fmt::Display for KbTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.date.format("%Y-%m-%d"), self.precision.tag())
    }
}

impl Ord for KbTimestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.date
            .cmp(&other.date)
            .then(self.precision.fineness().cmp(&other.precision.fineness()))
    }
}

impl PartialOrd for KbTimestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One quintuple fact. Valid time is optional; transaction time is not.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fact {
    pub subject: EntityId,
    pub property: PropertyId,
    pub object: ObjectValue,
    pub valid_time: Option<KbTimestamp>,
    pub transaction_time: KbTimestamp,
}

impl Fact {
    /// Canonical ordering key: (subject, property, object, valid_time).
    fn sort_key(&self) -> (&EntityId, &PropertyId, &ObjectValue, &Option<KbTimestamp>) {
        (&self.subject, &self.property, &self.object, &self.valid_time)
    }
}

/// Half-open sampling interval `(tau1, tau2]` between two snapshot timepoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    tau1: KbTimestamp,
    tau2: KbTimestamp,
}

impl Interval {
    pub fn new(tau1: KbTimestamp, tau2: KbTimestamp) -> Result<Self> {
        if tau2 <= tau1 {
            return Err(Error::Validation(format!(
                "interval requires tau2 > tau1, got ({tau1}, {tau2}]"
            )));
        }
        Ok(Interval { tau1, tau2 })
    }

    pub fn tau1(&self) -> KbTimestamp {
        self.tau1
    }

    pub fn tau2(&self) -> KbTimestamp {
        self.tau2
    }

    /// True iff `t` lies in `(tau1, tau2]` - strict lower bound.
    pub fn contains(&self, t: KbTimestamp) -> bool {
        self.tau1 < t && t <= self.tau2
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{}]", self.tau1, self.tau2)
    }
}

/// KB snapshot at a sampling timepoint. Facts are held in canonical sorted
/// order and validated on construction: unique on (subject, property,
/// object, valid_time), every transaction time <= `sampled_at`.
#[derive(Debug, Clone)]
pub struct Snapshot {
    sampled_at: KbTimestamp,
    facts: Vec<Fact>,
}

impl Snapshot {
    pub fn new(sampled_at: KbTimestamp, mut facts: Vec<Fact>) -> Result<Self> {
        facts.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        for w in facts.windows(2) {
            if w[0].sort_key() == w[1].sort_key() {
                return Err(Error::Validation(format!(
                    "duplicate fact for ({}, {}, {:?})",
                    w[0].subject, w[0].property, w[0].object
                )));
            }
        }
        for f in &facts {
            if f.transaction_time > sampled_at {
                return Err(Error::Validation(format!(
                    "fact ({}, {}) recorded at {} after snapshot time {}",
                    f.subject, f.property, f.transaction_time, sampled_at
                )));
            }
        }
        Ok(Snapshot { sampled_at, facts })
    }

    pub fn sampled_at(&self) -> KbTimestamp {
        self.sampled_at
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// All facts of one subject, as a contiguous slice of the sorted store.
    pub fn subject_facts(&self, subject: &EntityId) -> &[Fact] {
        let lo = self.facts.partition_point(|f| f.subject < *subject);
        let hi = self.facts.partition_point(|f| f.subject <= *subject);
        &self.facts[lo..hi]
    }

    /// Projection onto one (subject, property) pair: the object-timestamps
    /// set O_{K,tau} for that pair. Empty when the pair is absent.
    pub fn project(&self, subject: &EntityId, property: &PropertyId) -> PairState {
        let key = (subject, property);
        let lo = self
            .facts
            .partition_point(|f| (&f.subject, &f.property) < key);
        let hi = self
            .facts
            .partition_point(|f| (&f.subject, &f.property) <= key);
        let records = self.facts[lo..hi]
            .iter()
            .map(|f| PairRecord {
                object: f.object.clone(),
                valid_time: f.valid_time,
                transaction_time: f.transaction_time,
            })
            .collect();
        PairState {
            subject: subject.clone(),
            property: property.clone(),
            records,
        }
    }

    /// Iterate over (subject, property) groups in sorted order.
    pub fn pairs(&self) -> PairIter<'_> {
        PairIter {
            facts: &self.facts,
            pos: 0,
        }
    }

    /// Distinct subjects, in sorted order.
    pub fn subjects(&self) -> Vec<EntityId> {
        let mut out: Vec<EntityId> = Vec::new();
        for f in &self.facts {
            if out.last() != Some(&f.subject) {
                out.push(f.subject.clone());
            }
        }
        out
    }
}

/// Iterator over per-(subject, property) fact groups of a snapshot.
pub struct PairIter<'a> {
    facts: &'a [Fact],
    pos: usize,
}

impl<'a> Iterator for PairIter<'a> {
    type Item = (&'a EntityId, &'a PropertyId, &'a [Fact]);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.facts.len() {
            return None;
        }
        let start = self.pos;
        let head = &self.facts[start];
        let mut end = start + 1;
        while end < self.facts.len()
            && self.facts[end].subject == head.subject
            && self.facts[end].property == head.property
        {
            end += 1;
        }
        self.pos = end;
        Some((&head.subject, &head.property, &self.facts[start..end]))
    }
}

/// One (object, valid_time, transaction_time) record of a pair state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairRecord {
    pub object: ObjectValue,
    pub valid_time: Option<KbTimestamp>,
    pub transaction_time: KbTimestamp,
}

impl PairRecord {
    /// Identity used for stability comparison: transaction time excluded.
    pub fn identity(&self) -> (&ObjectValue, &Option<KbTimestamp>) {
        (&self.object, &self.valid_time)
    }
}

/// Whether stability comparison includes transaction times.
///
/// Transaction time is provenance fixed at insertion; comparing it would
/// mark re-imports as changes, so the default excludes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityMode {
    #[default]
    IgnoreTransactionTime,
    /// Include transaction times in record identity.
    Strict,
}

/// The object-timestamps set O_{K,tau} of one (subject, property) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairState {
    subject: EntityId,
    property: PropertyId,
    records: Vec<PairRecord>,
}

impl PairState {
    /// Build a pair state; records are sorted and must be unique on
    /// (object, valid_time).
    pub fn new(subject: EntityId, property: PropertyId, mut records: Vec<PairRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.identity().cmp(&b.identity()).then(a.transaction_time.cmp(&b.transaction_time)));
        for w in records.windows(2) {
            if w[0].identity() == w[1].identity() {
                return Err(Error::Validation(format!(
                    "duplicate (object, valid_time) record for ({subject}, {property})",
                )));
            }
        }
        Ok(PairState {
            subject,
            property,
            records,
        })
    }

    pub fn empty(subject: EntityId, property: PropertyId) -> Self {
        PairState {
            subject,
            property,
            records: Vec::new(),
        }
    }

    pub fn subject(&self) -> &EntityId {
        &self.subject
    }

    pub fn property(&self) -> &PropertyId {
        &self.property
    }

    pub fn records(&self) -> &[PairRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub(crate) fn check_same_pair(&self, other: &PairState) -> Result<()> {
        if self.subject != other.subject || self.property != other.property {
            return Err(Error::PairMismatch(
                self.subject.to_string(),
                self.property.to_string(),
                other.subject.to_string(),
                other.property.to_string(),
            ));
        }
        Ok(())
    }

    /// A pair is stable over an interval iff its object-timestamps sets at
    /// the two endpoints are equal.
    pub fn is_stable(&self, other: &PairState) -> Result<bool> {
        self.is_stable_with(other, StabilityMode::default())
    }

    pub fn is_stable_with(&self, other: &PairState, mode: StabilityMode) -> Result<bool> {
        self.check_same_pair(other)?;
        if self.records.len() != other.records.len() {
            return Ok(false);
        }
        match mode {
            StabilityMode::IgnoreTransactionTime => {
                let a: HashSet<_> = self.records.iter().map(|r| r.identity()).collect();
                Ok(other.records.iter().all(|r| a.contains(&r.identity())))
            }
            StabilityMode::Strict => {
                let a: HashSet<_> = self.records.iter().collect();
                Ok(other.records.iter().all(|r| a.contains(r)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ts(y: i32, m: u32, d: u32) -> KbTimestamp {
        KbTimestamp::from_ymd(y, m, d).unwrap()
    }

    fn rec(object: &str, tv: Option<KbTimestamp>, ta: KbTimestamp) -> PairRecord {
        PairRecord {
            object: ObjectValue::entity(object).unwrap(),
            valid_time: tv,
            transaction_time: ta,
        }
    }

    fn pair(s: &str, p: &str, records: Vec<PairRecord>) -> PairState {
        PairState::new(EntityId::new(s).unwrap(), PropertyId::new(p).unwrap(), records).unwrap()
    }

    #[test]
    fn empty_ids_rejected() {
        assert!(EntityId::new("").is_err());
        assert!(PropertyId::new("").is_err());
    }

    #[test]
    fn timestamp_canonicalizes_to_period_start() {
        let t = KbTimestamp::new(NaiveDate::from_ymd_opt(2018, 7, 10).unwrap(), Precision::Year);
        assert_eq!(t.earliest_day(), NaiveDate::from_ymd_opt(2018, 1, 1).unwrap());
        assert_eq!(t.to_string(), "2018-01-01|y");
    }

    #[test]
    fn timestamp_order_breaks_ties_by_finer_precision() {
        let year = KbTimestamp::from_year(2018);
        let day = ts(2018, 1, 1);
        assert!(day < year);
        assert!(ts(2017, 12, 31) < day);
    }

    #[test]
    fn timestamp_roundtrip() {
        for s in ["2018-07-10|d", "2018-07-01|m", "2018-01-01|y"] {
            assert_eq!(KbTimestamp::parse(s).unwrap().to_string(), s);
        }
        assert!(KbTimestamp::parse("2018-07-10").is_err());
        assert!(KbTimestamp::parse("2018-07-10|x").is_err());
    }

    #[test]
    fn interval_requires_order() {
        assert!(Interval::new(KbTimestamp::from_year(2020), KbTimestamp::from_year(2017)).is_err());
        assert!(Interval::new(KbTimestamp::from_year(2017), KbTimestamp::from_year(2017)).is_err());
        let i = Interval::new(KbTimestamp::from_year(2017), KbTimestamp::from_year(2020)).unwrap();
        // strict lower bound, inclusive upper
        assert!(!i.contains(KbTimestamp::from_year(2017)));
        assert!(i.contains(KbTimestamp::from_year(2018)));
        assert!(i.contains(KbTimestamp::from_year(2020)));
    }

    // The Ronaldo residence example: O_{K_2017} = {(Madrid, 2010, 2012)}.
    #[test]
    fn project_ronaldo_residence() {
        let ronaldo = EntityId::new("Ronaldo").unwrap();
        let residence = PropertyId::new("residence").unwrap();
        let snap = Snapshot::new(
            ts(2017, 1, 1),
            vec![Fact {
                subject: ronaldo.clone(),
                property: residence.clone(),
                object: ObjectValue::entity("Madrid").unwrap(),
                valid_time: Some(KbTimestamp::from_year(2010)),
                transaction_time: KbTimestamp::from_year(2012),
            }],
        )
        .unwrap();
        let state = snap.project(&ronaldo, &residence);
        assert_eq!(state.records().len(), 1);
        assert_eq!(state.records()[0].object.canonical_text(), "Madrid");
        assert_eq!(state.records()[0].valid_time, Some(KbTimestamp::from_year(2010)));
        assert_eq!(state.records()[0].transaction_time, KbTimestamp::from_year(2012));
    }

    #[test]
    fn project_empty_snapshot() {
        let snap = Snapshot::new(ts(2020, 1, 1), vec![]).unwrap();
        let state = snap.project(
            &EntityId::new("Q1").unwrap(),
            &PropertyId::new("P1").unwrap(),
        );
        assert!(state.is_empty());
    }

    #[test]
    fn project_matches_linear_scan() {
        let q1 = EntityId::new("Q1").unwrap();
        let q2 = EntityId::new("Q2").unwrap();
        let p1 = PropertyId::new("P1").unwrap();
        let p2 = PropertyId::new("P2").unwrap();
        let mk = |s: &EntityId, p: &PropertyId, o: &str| Fact {
            subject: s.clone(),
            property: p.clone(),
            object: ObjectValue::literal(o),
            valid_time: None,
            transaction_time: ts(2019, 1, 1),
        };
        let facts = vec![
            mk(&q1, &p1, "a"),
            mk(&q1, &p1, "b"),
            mk(&q1, &p2, "c"),
            mk(&q2, &p1, "d"),
            mk(&q2, &p2, "e"),
        ];
        let snap = Snapshot::new(ts(2020, 1, 1), facts.clone()).unwrap();
        let state = snap.project(&q1, &p1);
        let expected = facts
            .iter()
            .filter(|f| f.subject == q1 && f.property == p1)
            .count();
        assert_eq!(state.records().len(), expected);
        assert_eq!(expected, 2);
    }

    #[test]
    fn snapshot_rejects_future_transaction_time() {
        let fact = Fact {
            subject: EntityId::new("Q1").unwrap(),
            property: PropertyId::new("P1").unwrap(),
            object: ObjectValue::literal("x"),
            valid_time: None,
            transaction_time: ts(2021, 6, 1),
        };
        assert!(Snapshot::new(ts(2020, 1, 1), vec![fact]).is_err());
    }

    #[test]
    fn snapshot_rejects_duplicate_record() {
        let mk = |ta: KbTimestamp| Fact {
            subject: EntityId::new("Q1").unwrap(),
            property: PropertyId::new("P1").unwrap(),
            object: ObjectValue::literal("x"),
            valid_time: None,
            transaction_time: ta,
        };
        // duplicate (s, p, o, t_v) with differing t_a is still forbidden
        assert!(Snapshot::new(ts(2020, 1, 1), vec![mk(ts(2019, 1, 1)), mk(ts(2018, 1, 1))]).is_err());
    }

    #[test]
    fn stability_on_madrid_turin_example() {
        let ta = ts(2012, 1, 1);
        let s1 = pair("Ronaldo", "residence", vec![rec("Madrid", Some(KbTimestamp::from_year(2010)), ta)]);
        let s2 = pair(
            "Ronaldo",
            "residence",
            vec![
                rec("Madrid", Some(KbTimestamp::from_year(2010)), ta),
                rec("Turin", Some(KbTimestamp::from_year(2018)), ts(2018, 7, 10)),
            ],
        );
        assert!(!s1.is_stable(&s2).unwrap());
        assert!(s1.is_stable(&s1).unwrap());
        let e1 = PairState::empty(EntityId::new("Ronaldo").unwrap(), PropertyId::new("residence").unwrap());
        assert!(e1.is_stable(&e1.clone()).unwrap());
    }

    #[test]
    fn stability_ignores_transaction_time_by_default() {
        let a = pair("Q1", "P1", vec![rec("x", None, ts(2010, 1, 1))]);
        let b = pair("Q1", "P1", vec![rec("x", None, ts(2015, 1, 1))]);
        assert!(a.is_stable(&b).unwrap());
        assert!(!a.is_stable_with(&b, StabilityMode::Strict).unwrap());
    }

    #[test]
    fn stability_rejects_mismatched_pairs() {
        let a = pair("Q1", "P1", vec![]);
        let b = pair("Q2", "P1", vec![]);
        assert!(matches!(a.is_stable(&b), Err(Error::PairMismatch(..))));
    }

    #[test]
    fn pairs_iterator_groups_sorted_facts() {
        let mk = |s: &str, p: &str, o: &str| Fact {
            subject: EntityId::new(s).unwrap(),
            property: PropertyId::new(p).unwrap(),
            object: ObjectValue::literal(o),
            valid_time: None,
            transaction_time: ts(2019, 1, 1),
        };
        let snap = Snapshot::new(
            ts(2020, 1, 1),
            vec![mk("Q2", "P1", "d"), mk("Q1", "P1", "a"), mk("Q1", "P1", "b"), mk("Q1", "P2", "c")],
        )
        .unwrap();
        let groups: Vec<_> = snap
            .pairs()
            .map(|(s, p, fs)| (s.to_string(), p.to_string(), fs.len()))
            .collect();
        assert_eq!(
            groups,
            vec![
                ("Q1".into(), "P1".into(), 2),
                ("Q1".into(), "P2".into(), 1),
                ("Q2".into(), "P1".into(), 1),
            ]
        );
        assert_eq!(snap.subjects().len(), 2);
    }
}
