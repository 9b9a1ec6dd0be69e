//! Adapter from Wikidata-style entity dumps to the snapshot model.
//!
//! Input is one entity document per line (the layout of `latest-all.json`
//! after stripping the enclosing array). Only truthy statements of
//! allow-listed properties are read: preferred-rank statements when any
//! exist for a property, otherwise normal-rank ones; deprecated statements
//! are ignored. Valid time comes from a start-time (P580) qualifier first,
//! then point-in-time (P585); transaction time from an optional per-statement
//! `first_seen` date, falling back to the snapshot's sampling time.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::kb_model::{
    EntityId, Fact, KbTimestamp, ObjectValue, Precision, PropertyId, Snapshot,
};

const START_TIME: &str = "P580";
const POINT_IN_TIME: &str = "P585";

/// Counters for input irregularities skipped during conversion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConvertStats {
    pub entities_read: usize,
    pub facts_emitted: usize,
    pub skipped_lines: usize,
    pub malformed_qualifiers: usize,
    pub skipped_statements: usize,
}

pub fn convert_wikidata(
    path: &Path,
    property_allowlist: &HashSet<PropertyId>,
    sampled_at: KbTimestamp,
) -> Result<(Snapshot, ConvertStats)> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&path_str, e))?;
    let mut stats = ConvertStats::default();
    let mut facts = Vec::new();

    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        let trimmed = line.trim().trim_end_matches(',');
        if trimmed.is_empty() || trimmed == "[" || trimmed == "]" {
            continue;
        }
        let doc: Value = match serde_json::from_str(trimmed) {
            Ok(v) => v,
            Err(_) => {
                stats.skipped_lines += 1;
                continue;
            }
        };
        match convert_entity(&doc, property_allowlist, sampled_at, &mut stats) {
            Some(entity_facts) => {
                stats.entities_read += 1;
                stats.facts_emitted += entity_facts.len();
                facts.extend(entity_facts);
            }
            None => stats.skipped_lines += 1,
        }
    }

    // Re-imported duplicates collapse like in load_snapshot.
    facts.sort_by(|a, b| {
        (&a.subject, &a.property, &a.object, &a.valid_time, &a.transaction_time)
            .cmp(&(&b.subject, &b.property, &b.object, &b.valid_time, &b.transaction_time))
    });
    facts.dedup_by(|later, earlier| {
        later.subject == earlier.subject
            && later.property == earlier.property
            && later.object == earlier.object
            && later.valid_time == earlier.valid_time
    });

    let snapshot = Snapshot::new(sampled_at, facts)?;
    Ok((snapshot, stats))
}

fn convert_entity(
    doc: &Value,
    allowlist: &HashSet<PropertyId>,
    sampled_at: KbTimestamp,
    stats: &mut ConvertStats,
) -> Option<Vec<Fact>> {
    let subject = EntityId::new(doc.get("id")?.as_str()?).ok()?;
    let claims = doc.get("claims")?.as_object()?;
    let mut facts = Vec::new();

    for (prop, statements) in claims {
        let property = match PropertyId::new(prop.as_str()) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if !allowlist.contains(&property) {
            continue;
        }
        let statements = match statements.as_array() {
            Some(a) => a,
            None => continue,
        };
        let has_preferred = statements
            .iter()
            .any(|s| s.get("rank").and_then(Value::as_str) == Some("preferred"));
        for statement in statements {
            let rank = statement.get("rank").and_then(Value::as_str).unwrap_or("normal");
            let truthy = if has_preferred {
                rank == "preferred"
            } else {
                rank == "normal"
            };
            if !truthy {
                stats.skipped_statements += 1;
                continue;
            }
            match statement_fact(statement, &subject, &property, sampled_at, stats) {
                Some(fact) => facts.push(fact),
                None => stats.skipped_statements += 1,
            }
        }
    }
    Some(facts)
}

fn statement_fact(
    statement: &Value,
    subject: &EntityId,
    property: &PropertyId,
    sampled_at: KbTimestamp,
    stats: &mut ConvertStats,
) -> Option<Fact> {
    let mainsnak = statement.get("mainsnak")?;
    if mainsnak.get("snaktype").and_then(Value::as_str) != Some("value") {
        return None;
    }
    let object = snak_object(mainsnak.get("datavalue")?)?;

    let valid_time = statement
        .get("qualifiers")
        .and_then(|q| qualifier_time(q, stats));

    let transaction_time = match statement.get("first_seen").and_then(Value::as_str) {
        Some(date) => match chrono::NaiveDate::parse_from_str(date, "%Y-%m-%d") {
            Ok(d) => KbTimestamp::new(d, Precision::Day),
            Err(_) => sampled_at,
        },
        None => sampled_at,
    };

    Some(Fact {
        subject: subject.clone(),
        property: property.clone(),
        object,
        valid_time,
        transaction_time,
    })
}

fn snak_object(datavalue: &Value) -> Option<ObjectValue> {
    let value = datavalue.get("value")?;
    match datavalue.get("type").and_then(Value::as_str)? {
        "wikibase-entityid" => {
            let id = value.get("id").and_then(Value::as_str)?;
            ObjectValue::entity(id).ok()
        }
        "string" => Some(ObjectValue::literal(value.as_str()?)),
        "monolingualtext" => Some(ObjectValue::literal(value.get("text")?.as_str()?)),
        "quantity" => {
            // canonical text form: the signed amount, leading '+' stripped
            let amount = value.get("amount").and_then(Value::as_str)?;
            Some(ObjectValue::literal(amount.trim_start_matches('+')))
        }
        "time" => {
            let (ts, _) = parse_wikidata_time(value)?;
            Some(ObjectValue::literal(ts.to_string()))
        }
        _ => None,
    }
}

fn qualifier_time(qualifiers: &Value, stats: &mut ConvertStats) -> Option<KbTimestamp> {
    // start-time first, then point-in-time; end times are never a valid time
    for prop in [START_TIME, POINT_IN_TIME] {
        if let Some(snaks) = qualifiers.get(prop).and_then(Value::as_array) {
            for snak in snaks {
                let Some(datavalue) = snak.get("datavalue") else { continue };
                if datavalue.get("type").and_then(Value::as_str) != Some("time") {
                    stats.malformed_qualifiers += 1;
                    continue;
                }
                match datavalue.get("value").and_then(|v| parse_wikidata_time(v)) {
                    Some((ts, _)) => return Some(ts),
                    None => {
                        stats.malformed_qualifiers += 1;
                    }
                }
            }
        }
    }
    None
}

/// Parse a Wikidata time value like `{"time": "+2018-07-10T00:00:00Z",
/// "precision": 11}`. Precision 9 is year, 10 month, 11 day; coarser
/// precisions collapse to year. Zero month/day components (used at coarse
/// precision) are canonicalized to 1.
fn parse_wikidata_time(value: &Value) -> Option<(KbTimestamp, i64)> {
    let time = value.get("time")?.as_str()?;
    let precision_code = value.get("precision").and_then(Value::as_i64).unwrap_or(11);
    let time = time.strip_prefix('+').unwrap_or(time);
    if time.starts_with('-') {
        return None; // BCE dates are out of range for the calendar model
    }
    let date_part = time.split('T').next()?;
    let mut parts = date_part.splitn(3, '-');
    let year: i32 = parts.next()?.parse().ok()?;
    let month: u32 = parts.next()?.parse().ok()?;
    let day: u32 = parts.next()?.parse().ok()?;
    let precision = match precision_code {
        p if p <= 9 => Precision::Year,
        10 => Precision::Month,
        _ => Precision::Day,
    };
    let date = chrono::NaiveDate::from_ymd_opt(year, month.max(1), day.max(1))?;
    Some((KbTimestamp::new(date, precision), precision_code))
}
