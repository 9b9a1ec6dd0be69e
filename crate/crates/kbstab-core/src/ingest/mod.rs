//! Parsing and validation of all external inputs.
//!
//! Every format is UTF-8, line-delimited and tab-separated, one record per
//! line. Free-text fields (literal objects, article text) are escaped with
//! `\t`, `\n`, `\r`, `\\`. Timestamps are `YYYY-MM-DD|p` with precision tag
//! `y`, `m` or `d`; an empty valid-time field means null.
//!
//! - snapshot: header `#kbstab-snapshot<TAB>sampled_at=<ts>`, then
//!   `subject  property  object_kind  object_value  valid_time  transaction_time`
//! - edit log: `subject  property  transaction_time  kind`
//! - articles: `entity  as_of  text`
//! - embeddings: `entity  v1  v2 ...` (dimension fixed by the first row)
//! - labels: `subject  property  tau1  tau2  label`

pub mod wikidata;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::change_analysis::CauseLabel;
use crate::error::{Error, Result};
use crate::kb_model::{
    EntityId, Fact, Interval, KbTimestamp, ObjectValue, PropertyId, Snapshot,
};

pub use wikidata::{convert_wikidata, ConvertStats};

/// One entry of a KB edit log, the raw material for the historic-edits
/// change-count measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditLogEntry {
    pub subject: EntityId,
    pub property: PropertyId,
    pub transaction_time: KbTimestamp,
    pub kind: EditKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditKind {
    Add,
    Remove,
    Modify,
}

impl EditKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EditKind::Add => "add",
            EditKind::Remove => "remove",
            EditKind::Modify => "modify",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "add" => Some(EditKind::Add),
            "remove" => Some(EditKind::Remove),
            "modify" => Some(EditKind::Modify),
            _ => None,
        }
    }
}

/// Plain text of one entity's encyclopedia article at a point in time.
/// Empty text means the article was absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleVersion {
    pub entity: EntityId,
    pub as_of: KbTimestamp,
    pub text: String,
}

/// Entity-to-vector table of externally trained KB embeddings.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    rows: HashMap<EntityId, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            rows: HashMap::new(),
        }
    }

    pub fn insert(&mut self, entity: EntityId, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::Validation(format!(
                "embedding for {} has dimension {}, expected {}",
                entity,
                vector.len(),
                self.dimension
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "embedding for {entity} contains a non-finite component"
            )));
        }
        self.rows.insert(entity, vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, entity: &EntityId) -> Option<&[f64]> {
        self.rows.get(entity).map(|v| v.as_slice())
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityId> {
        self.rows.keys()
    }

    /// Scale every vector by a positive constant (used by invariance tests).
    pub fn scaled(&self, factor: f64) -> EmbeddingTable {
        let rows = self
            .rows
            .iter()
            .map(|(e, v)| (e.clone(), v.iter().map(|x| x * factor).collect()))
            .collect();
        EmbeddingTable {
            dimension: self.dimension,
            rows,
        }
    }
}

/// Manually annotated cause of one observed change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldLabel {
    pub subject: EntityId,
    pub property: PropertyId,
    pub interval: Interval,
    pub label: CauseLabel,
}

pub fn escape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_object(kind: &str, value: &str, path: &str, line_no: usize) -> Result<ObjectValue> {
    match kind {
        "entity" => ObjectValue::entity(unescape_field(value))
            .map_err(|e| Error::parse(path, line_no, e.to_string())),
        "literal" => Ok(ObjectValue::literal(unescape_field(value))),
        other => Err(Error::parse(path, line_no, format!("unknown object kind `{other}`"))),
    }
}

/// Load a snapshot file. Duplicate (subject, property, object, valid_time)
/// lines collapse to one record keeping the earliest transaction time.
pub fn load_snapshot(path: &Path) -> Result<Snapshot> {
    let path_str = path.display().to_string();
    let reader = open(path)?;
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::parse(&path_str, 1, "empty file, expected snapshot header"))?
        .map_err(|e| Error::io(&path_str, e))?;
    let sampled_at = parse_snapshot_header(&header)
        .ok_or_else(|| Error::parse(&path_str, 1, "malformed snapshot header"))?;
    let sampled_at = KbTimestamp::parse(&sampled_at)
        .map_err(|e| Error::parse(&path_str, 1, e.to_string()))?;

    let mut seen: HashMap<(EntityId, PropertyId, ObjectValue, Option<KbTimestamp>), usize> =
        HashMap::new();
    let mut facts: Vec<Fact> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::parse(
                &path_str,
                line_no,
                format!("expected 6 tab-separated fields, got {}", fields.len()),
            ));
        }
        let subject = EntityId::new(fields[0]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
        let property = PropertyId::new(fields[1]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
        let object = parse_object(fields[2], fields[3], &path_str, line_no)?;
        let valid_time = if fields[4].is_empty() {
            None
        } else {
            Some(KbTimestamp::parse(fields[4]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?)
        };
        if fields[5].is_empty() {
            return Err(Error::parse(&path_str, line_no, "missing transaction time"));
        }
        let transaction_time =
            KbTimestamp::parse(fields[5]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;

        let key = (subject.clone(), property.clone(), object.clone(), valid_time);
        match seen.get(&key) {
            Some(&i) => {
                // earliest assertion is the provenance event
                if transaction_time < facts[i].transaction_time {
                    facts[i].transaction_time = transaction_time;
                }
            }
            None => {
                seen.insert(key, facts.len());
                facts.push(Fact {
                    subject,
                    property,
                    object,
                    valid_time,
                    transaction_time,
                });
            }
        }
    }
    Snapshot::new(sampled_at, facts)
}

fn parse_snapshot_header(line: &str) -> Option<String> {
    let rest = line.strip_prefix("#kbstab-snapshot\t")?;
    let value = rest.strip_prefix("sampled_at=")?;
    Some(value.to_string())
}

/// Write a snapshot in canonical form: header, then facts sorted by
/// (subject, property, object, valid_time).
pub fn write_snapshot(snapshot: &Snapshot, out: &mut dyn Write) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "#kbstab-snapshot\tsampled_at={}", snapshot.sampled_at())?;
    for f in snapshot.facts() {
        let tv = f.valid_time.map(|t| t.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            f.subject,
            f.property,
            f.object.kind_tag(),
            escape_field(f.object.canonical_text()),
            tv,
            f.transaction_time
        )?;
    }
    w.flush()
}

pub fn write_snapshot_file(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    write_snapshot(snapshot, &mut file).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_edit_log(path: &Path) -> Result<Vec<EditLogEntry>> {
    let path_str = path.display().to_string();
    let mut entries = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(&path_str, line_no, "expected 4 fields"));
        }
        let kind = EditKind::parse(fields[3])
            .ok_or_else(|| Error::Validation(format!("unknown edit kind `{}` at line {line_no}", fields[3])))?;
        entries.push(EditLogEntry {
            subject: EntityId::new(fields[0]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?,
            property: PropertyId::new(fields[1]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?,
            transaction_time: KbTimestamp::parse(fields[2])
                .map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?,
            kind,
        });
    }
    Ok(entries)
}

pub fn load_articles(path: &Path) -> Result<Vec<ArticleVersion>> {
    let path_str = path.display().to_string();
    let mut articles = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.splitn(3, '\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(&path_str, line_no, "expected 3 fields"));
        }
        articles.push(ArticleVersion {
            entity: EntityId::new(fields[0]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?,
            as_of: KbTimestamp::parse(fields[1])
                .map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?,
            text: unescape_field(fields[2]),
        });
    }
    Ok(articles)
}

pub fn write_articles(articles: &[ArticleVersion], out: &mut dyn Write) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    for a in articles {
        writeln!(w, "{}\t{}\t{}", a.entity, a.as_of, escape_field(&a.text))?;
    }
    w.flush()
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let path_str = path.display().to_string();
    let mut table: Option<EmbeddingTable> = None;
    for (idx, line) in open(path)?.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let entity = fields
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::parse(&path_str, line_no, "missing entity id"))?;
        let entity = EntityId::new(entity).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
        let vector: Vec<f64> = fields
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(&path_str, line_no, format!("bad component `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if vector.is_empty() {
            return Err(Error::parse(&path_str, line_no, "embedding row has no components"));
        }
        let table = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
        table.insert(entity, vector)?;
    }
    table.ok_or_else(|| Error::Validation(format!("embedding file {path_str} is empty")))
}

pub fn load_labels(path: &Path) -> Result<Vec<GoldLabel>> {
    let path_str = path.display().to_string();
    let mut labels = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::parse(&path_str, line_no, "expected 5 fields"));
        }
        let tau1 = KbTimestamp::parse(fields[2]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
        let tau2 = KbTimestamp::parse(fields[3]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?;
        let label = CauseLabel::parse(fields[4])
            .ok_or_else(|| Error::Validation(format!("unknown label `{}` at line {line_no}", fields[4])))?;
        labels.push(GoldLabel {
            subject: EntityId::new(fields[0]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?,
            property: PropertyId::new(fields[1]).map_err(|e| Error::parse(&path_str, line_no, e.to_string()))?,
            interval: Interval::new(tau1, tau2)?,
            label,
        });
    }
    Ok(labels)
}

pub fn write_labels(labels: &[GoldLabel], out: &mut dyn Write) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    for l in labels {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            l.subject,
            l.property,
            l.interval.tau1(),
            l.interval.tau2(),
            l.label
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::NamedTempFile;

    fn tmp(content: &str) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const SNAP: &str = "#kbstab-snapshot\tsampled_at=2020-01-01|d\n\
        Q1\tP54\tentity\tQ100\t2018-01-01|y\t2018-07-10|d\n\
        Q1\tP19\tliteral\tLisbon\t\t2012-03-01|d\n\
        Q2\tP54\tentity\tQ101\t\t2015-01-01|d\n";

    #[test]
    fn load_well_formed_snapshot() {
        let f = tmp(SNAP);
        let snap = load_snapshot(f.path()).unwrap();
        assert_eq!(snap.len(), 3);
        // null valid time parsed as absent
        let p19 = snap.project(&EntityId::new("Q1").unwrap(), &PropertyId::new("P19").unwrap());
        assert_eq!(p19.records()[0].valid_time, None);
    }

    #[test]
    fn missing_transaction_time_is_parse_error_with_line() {
        let f = tmp("#kbstab-snapshot\tsampled_at=2020-01-01|d\nQ1\tP54\tentity\tQ100\t\t\n");
        match load_snapshot(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_lines_collapse_to_earliest_transaction_time() {
        let f = tmp(
            "#kbstab-snapshot\tsampled_at=2020-01-01|d\n\
             Q1\tP54\tentity\tQ100\t\t2019-01-01|d\n\
             Q1\tP54\tentity\tQ100\t\t2016-05-05|d\n",
        );
        let snap = load_snapshot(f.path()).unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(
            snap.facts()[0].transaction_time,
            KbTimestamp::parse("2016-05-05|d").unwrap()
        );
    }

    #[test]
    fn transaction_after_sampled_at_is_validation_error() {
        let f = tmp("#kbstab-snapshot\tsampled_at=2020-01-01|d\nQ1\tP54\tentity\tQ100\t\t2021-01-01|d\n");
        assert!(matches!(load_snapshot(f.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn snapshot_roundtrip_is_canonical() {
        let f = tmp(SNAP);
        let snap = load_snapshot(f.path()).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&snap, &mut buf).unwrap();
        let f2 = tmp(std::str::from_utf8(&buf).unwrap());
        let snap2 = load_snapshot(f2.path()).unwrap();
        let mut buf2 = Vec::new();
        write_snapshot(&snap2, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn literal_escaping_roundtrip() {
        let weird = "tab\there\nnewline\\slash";
        assert_eq!(unescape_field(&escape_field(weird)), weird);
    }

    #[test]
    fn edit_log_and_labels_load() {
        let f = tmp("Q1\tP54\t2019-05-01|d\tadd\nQ1\tP54\t2019-06-01|d\tmodify\n");
        let log = load_edit_log(f.path()).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log[1].kind, EditKind::Modify);

        let f = tmp("Q1\tP54\t2017-01-01|y\t2020-01-01|y\treal_world\n");
        let labels = load_labels(f.path()).unwrap();
        assert_eq!(labels[0].label, CauseLabel::RealWorld);

        let f = tmp("Q1\tP54\t2017-01-01|y\t2020-01-01|y\tbogus\n");
        assert!(matches!(load_labels(f.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn empty_articles_file_is_empty_collection() {
        let f = tmp("");
        assert!(load_articles(f.path()).unwrap().is_empty());
    }

    #[test]
    fn embedding_dimension_mismatch_names_entity() {
        let f = tmp("Q1\t0.1\t0.2\t0.3\nQ2\t0.4\t0.5\n");
        match load_embeddings(f.path()) {
            Err(Error::Validation(msg)) => assert!(msg.contains("Q2"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
