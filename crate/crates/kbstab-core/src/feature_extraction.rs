//! Feature families for the change predictor: article-text tf-idf n-grams,
//! structured bag-of-words over the entity's other properties, the scalar
//! age feature, raw KB embeddings, and the embedding-kNN changed-neighbor
//! fraction.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::ingest::{ArticleVersion, EmbeddingTable};
use crate::kb_model::{EntityId, KbTimestamp, ObjectValue, PropertyId, Snapshot};

/// Which family a feature vector belongs to. Dense numeric kinds are
/// z-scored inside the trainer; sparse tf-idf kinds are left as-is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    StructuredBow,
    TextTfidf,
    Scalar,
    Embedding,
    KnnFraction,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::StructuredBow => "structured_bow",
            FeatureKind::TextTfidf => "text_tfidf",
            FeatureKind::Scalar => "scalar",
            FeatureKind::Embedding => "embedding",
            FeatureKind::KnnFraction => "knn_fraction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "structured_bow" => Some(FeatureKind::StructuredBow),
            "text_tfidf" => Some(FeatureKind::TextTfidf),
            "scalar" => Some(FeatureKind::Scalar),
            "embedding" => Some(FeatureKind::Embedding),
            "knn_fraction" => Some(FeatureKind::KnnFraction),
            _ => None,
        }
    }

    /// Dense numeric kinds get standardized with training statistics.
    pub fn standardized(self) -> bool {
        matches!(
            self,
            FeatureKind::Scalar | FeatureKind::Embedding | FeatureKind::KnnFraction
        )
    }
}

/// Sparse feature components, sorted by index.
pub type SparseVec = Vec<(usize, f64)>;

/// One feature vector of a single kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub dimension: usize,
    pub components: SparseVec,
}

impl FeatureVector {
    pub fn l2_norm(&self) -> f64 {
        self.components.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }
}

/// Lowercase, split on non-alphanumeric runs (numeric tokens kept), then
/// emit all n-grams in the range joined by single spaces.
pub fn tokenize(text: &str, ngram_range: (usize, usize)) -> Vec<String> {
    let (low, high) = ngram_range;
    assert!(low >= 1 && low <= high, "invalid ngram range");
    let lower = text.to_lowercase();
    let unigrams: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect();
    let mut out = Vec::new();
    for n in low..=high {
        if unigrams.len() < n {
            continue;
        }
        for window in unigrams.windows(n) {
            out.push(window.join(" "));
        }
    }
    out
}

/// Fitted n-gram vocabulary with document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    ngram_range: (usize, usize),
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&i| self.doc_freq[i])
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        self.ngram_range
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Fit from pre-tokenized documents: terms appearing in at least
    /// `min_df` documents, in deterministic sorted order.
    pub fn fit_tokens(token_docs: &[Vec<String>], ngram_range: (usize, usize), min_df: usize) -> Result<Self> {
        if token_docs.is_empty() {
            return Err(Error::Validation("cannot fit vocabulary on empty corpus".into()));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in token_docs {
            let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
            for term in unique {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let mut terms = Vec::new();
        let mut doc_freq = Vec::new();
        for (term, count) in df {
            if count >= min_df {
                terms.push(term.to_string());
                doc_freq.push(count);
            }
        }
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary {
            terms,
            doc_freq,
            n_docs: token_docs.len(),
            ngram_range,
            index,
        })
    }

    /// Persist as a text listing: header, then `term<TAB>df` rows.
    pub fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(
            out,
            "#kbstab-vocabulary\tn_docs={}\tngram={}..{}",
            self.n_docs, self.ngram_range.0, self.ngram_range.1
        )?;
        for (term, df) in self.terms.iter().zip(&self.doc_freq) {
            writeln!(out, "{term}\t{df}")?;
        }
        Ok(())
    }

    pub fn read(reader: &mut dyn BufRead) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Validation("empty vocabulary file".into()))?
            .map_err(|e| Error::io("<vocabulary>", e))?;
        let mut n_docs = None;
        let mut ngram = (1usize, 1usize);
        for field in header.split('\t').skip(1) {
            if let Some(v) = field.strip_prefix("n_docs=") {
                n_docs = v.parse().ok();
            } else if let Some(v) = field.strip_prefix("ngram=") {
                if let Some((a, b)) = v.split_once("..") {
                    ngram = (
                        a.parse().map_err(|_| Error::Validation("bad ngram range".into()))?,
                        b.parse().map_err(|_| Error::Validation("bad ngram range".into()))?,
                    );
                }
            }
        }
        let n_docs = n_docs.ok_or_else(|| Error::Validation("vocabulary header missing n_docs".into()))?;
        let mut terms = Vec::new();
        let mut doc_freq = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::io("<vocabulary>", e))?;
            if line.is_empty() {
                continue;
            }
            let (term, df) = line
                .split_once('\t')
                .ok_or_else(|| Error::Validation("malformed vocabulary row".into()))?;
            terms.push(term.to_string());
            doc_freq.push(df.parse().map_err(|_| Error::Validation("bad df".into()))?);
        }
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary {
            terms,
            doc_freq,
            n_docs,
            ngram_range: ngram,
            index,
        })
    }
}

/// Fit a vocabulary over an article corpus.
pub fn fit_vocabulary(
    corpus: &[ArticleVersion],
    ngram_range: (usize, usize),
    min_df: usize,
) -> Result<Vocabulary> {
    let token_docs: Vec<Vec<String>> = corpus
        .iter()
        .map(|a| tokenize(&a.text, ngram_range))
        .collect();
    Vocabulary::fit_tokens(&token_docs, ngram_range, min_df)
}

fn term_counts(tokens: &[String], vocab: &Vocabulary) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for token in tokens {
        if let Some(&idx) = vocab.index.get(token.as_str()) {
            *counts.entry(idx).or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// tf-idf vector with smooth idf `ln((1+n)/(1+df)) + 1`, L2-normalized.
/// Out-of-vocabulary tokens are ignored; a document with no vocabulary
/// tokens maps to the zero vector.
pub fn vectorize_tfidf(doc: &str, vocab: &Vocabulary) -> FeatureVector {
    let tokens = tokenize(doc, vocab.ngram_range);
    vectorize_tfidf_tokens(&tokens, vocab, FeatureKind::TextTfidf)
}

pub fn vectorize_tfidf_tokens(tokens: &[String], vocab: &Vocabulary, kind: FeatureKind) -> FeatureVector {
    let n = vocab.n_docs as f64;
    let mut components: SparseVec = term_counts(tokens, vocab)
        .into_iter()
        .map(|(idx, tf)| {
            let df = vocab.doc_freq[idx] as f64;
            (idx, tf * (((1.0 + n) / (1.0 + df)).ln() + 1.0))
        })
        .collect();
    let norm = components.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in &mut components {
            *v /= norm;
        }
    }
    FeatureVector {
        kind,
        dimension: vocab.len(),
        components,
    }
}

/// Raw term-count vector over the vocabulary.
pub fn vectorize_count_tokens(tokens: &[String], vocab: &Vocabulary, kind: FeatureKind) -> FeatureVector {
    FeatureVector {
        kind,
        dimension: vocab.len(),
        components: term_counts(tokens, vocab).into_iter().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BowMode {
    Count,
    Tfidf,
}

/// Tokens describing an entity's facts other than the target property:
/// `prop:<id>` plus `propval:<id>=<object text, lowercased>`. Excluding the
/// target property keeps its own values out of the features.
pub fn structured_tokens(snapshot: &Snapshot, subject: &EntityId, exclude: &PropertyId) -> Vec<String> {
    let mut tokens = Vec::new();
    for fact in snapshot.subject_facts(subject) {
        if fact.property == *exclude {
            continue;
        }
        tokens.push(format!("prop:{}", fact.property));
        tokens.push(format!(
            "propval:{}={}",
            fact.property,
            fact.object.canonical_text().to_lowercase()
        ));
    }
    tokens
}

/// Fit a vocabulary over the structured tokens of a class of entities.
pub fn fit_structured_vocabulary(
    snapshot: &Snapshot,
    entities: &[EntityId],
    exclude: &PropertyId,
    min_df: usize,
) -> Result<Vocabulary> {
    let token_docs: Vec<Vec<String>> = entities
        .iter()
        .map(|e| structured_tokens(snapshot, e, exclude))
        .collect();
    Vocabulary::fit_tokens(&token_docs, (1, 1), min_df)
}

/// Structured bag-of-words feature for one entity.
pub fn structured_bow(
    snapshot: &Snapshot,
    subject: &EntityId,
    exclude: &PropertyId,
    mode: BowMode,
    vocab: &Vocabulary,
) -> FeatureVector {
    let tokens = structured_tokens(snapshot, subject, exclude);
    match mode {
        BowMode::Count => vectorize_count_tokens(&tokens, vocab, FeatureKind::StructuredBow),
        BowMode::Tfidf => vectorize_tfidf_tokens(&tokens, vocab, FeatureKind::StructuredBow),
    }
}

/// Text added between two versions of the same entity's article: lines of
/// `new` left unmatched by a longest-common-subsequence line diff.
pub fn text_delta(old: &ArticleVersion, new: &ArticleVersion) -> Result<String> {
    if old.entity != new.entity {
        return Err(Error::Validation(format!(
            "text_delta called on different entities: {} vs {}",
            old.entity, new.entity
        )));
    }
    let old_lines: Vec<&str> = old.text.lines().collect();
    let new_lines: Vec<&str> = new.text.lines().collect();
    let matched = lcs_matched_new_lines(&old_lines, &new_lines);
    let added: Vec<&str> = new_lines
        .iter()
        .enumerate()
        .filter(|(i, _)| !matched[*i])
        .map(|(_, l)| *l)
        .collect();
    Ok(added.join("\n"))
}

/// Flags over `new` marking lines covered by an LCS alignment with `old`.
fn lcs_matched_new_lines(old: &[&str], new: &[&str]) -> Vec<bool> {
    let n = old.len();
    let m = new.len();
    let mut table = vec![0u32; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[at(i, j)] = if old[i] == new[j] {
                table[at(i + 1, j + 1)] + 1
            } else {
                table[at(i + 1, j)].max(table[at(i, j + 1)])
            };
        }
    }
    let mut matched = vec![false; m];
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if old[i] == new[j] {
            matched[j] = true;
            i += 1;
            j += 1;
        } else if table[at(i + 1, j)] >= table[at(i, j + 1)] {
            i += 1;
        } else {
            j += 1;
        }
    }
    matched
}

/// Whole years between the subject's birth date and `as_of`; `None` when the
/// subject has no birth fact or its date cannot be read.
pub fn age_feature(
    snapshot: &Snapshot,
    subject: &EntityId,
    birth_property: &PropertyId,
    as_of: KbTimestamp,
) -> Option<f64> {
    let fact = snapshot
        .subject_facts(subject)
        .iter()
        .find(|f| f.property == *birth_property)?;
    let birth = fact.valid_time.or_else(|| parse_literal_date(&fact.object))?;
    let birth_day = birth.earliest_day();
    let ref_day = as_of.earliest_day();
    if ref_day < birth_day {
        return None;
    }
    let mut years = ref_day.years_since(birth_day)?;
    // years_since is already whole years; guard anyway
    if years > 10_000 {
        years = 10_000;
    }
    Some(years as f64)
}

fn parse_literal_date(object: &ObjectValue) -> Option<KbTimestamp> {
    let text = object.canonical_text();
    if let Ok(ts) = KbTimestamp::parse(text) {
        return Some(ts);
    }
    if let Ok(date) = chrono::NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Some(KbTimestamp::new(date, crate::kb_model::Precision::Day));
    }
    text.parse::<i32>().ok().map(KbTimestamp::from_year)
}

/// Fraction of the k nearest reference entities (Euclidean distance over
/// embeddings, subject excluded, ties broken by entity id) whose changed
/// flag is set.
pub fn knn_change_fraction(
    subject: &EntityId,
    embeddings: &EmbeddingTable,
    reference: &[(EntityId, bool)],
    k: usize,
) -> Result<f64> {
    let subject_vec = embeddings
        .get(subject)
        .ok_or_else(|| Error::Validation(format!("no embedding for entity {subject}")))?;
    let mut neighbors: Vec<(f64, &EntityId, bool)> = Vec::with_capacity(reference.len());
    for (entity, changed) in reference {
        if entity == subject {
            continue;
        }
        let vec = embeddings
            .get(entity)
            .ok_or_else(|| Error::Validation(format!("no embedding for entity {entity}")))?;
        let dist_sq: f64 = subject_vec
            .iter()
            .zip(vec)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        neighbors.push((dist_sq, entity, *changed));
    }
    if k == 0 || k > neighbors.len() {
        return Err(Error::Validation(format!(
            "k={k} out of range for {} reference entities",
            neighbors.len()
        )));
    }
    neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let changed = neighbors[..k].iter().filter(|(_, _, c)| *c).count();
    Ok(changed as f64 / k as f64)
}

/// Entity-keyed feature matrix of one kind, the unit the predictor consumes
/// and the CLI persists.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub names: Vec<String>,
    pub rows: BTreeMap<EntityId, SparseVec>,
}

impl FeatureMatrix {
    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    /// Concatenate feature blocks; entities missing from any block are
    /// dropped. The combined matrix standardizes per original block kind,
    /// tracked through `standardized_columns`.
    pub fn concat(blocks: &[FeatureMatrix]) -> Result<(FeatureMatrix, Vec<usize>)> {
        if blocks.is_empty() {
            return Err(Error::Validation("no feature blocks to combine".into()));
        }
        let mut names = Vec::new();
        let mut standardized_columns = Vec::new();
        let mut offsets = Vec::new();
        for block in blocks {
            offsets.push(names.len());
            if block.kind.standardized() {
                standardized_columns.extend(names.len()..names.len() + block.names.len());
            }
            names.extend(block.names.iter().cloned());
        }
        let mut common: Vec<EntityId> = blocks[0].rows.keys().cloned().collect();
        for block in &blocks[1..] {
            common.retain(|e| block.rows.contains_key(e));
        }
        let mut rows = BTreeMap::new();
        for entity in common {
            let mut row: SparseVec = Vec::new();
            for (block, offset) in blocks.iter().zip(&offsets) {
                for &(idx, value) in &block.rows[&entity] {
                    row.push((idx + offset, value));
                }
            }
            rows.insert(entity, row);
        }
        Ok((
            FeatureMatrix {
                kind: blocks[0].kind,
                names,
                rows,
            },
            standardized_columns,
        ))
    }

    /// Text persistence: header with kind, a names line, then one row per
    /// entity. Sparse kinds use `index:value` pairs, dense kinds plain values.
    pub fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let sparse = !self.kind.standardized();
        writeln!(out, "#kbstab-features\tkind={}\tsparse={}", self.kind.as_str(), sparse)?;
        writeln!(out, "#names\t{}", self.names.join("\t"))?;
        for (entity, row) in &self.rows {
            write!(out, "{entity}")?;
            if sparse {
                for (idx, value) in row {
                    write!(out, "\t{idx}:{value}")?;
                }
            } else {
                let mut dense = vec![0.0; self.names.len()];
                for &(idx, value) in row {
                    dense[idx] = value;
                }
                for value in dense {
                    write!(out, "\t{value}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read(reader: &mut dyn BufRead) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Validation("empty feature file".into()))?
            .map_err(|e| Error::io("<features>", e))?;
        let mut kind = None;
        let mut sparse = true;
        for field in header.split('\t').skip(1) {
            if let Some(v) = field.strip_prefix("kind=") {
                kind = FeatureKind::parse(v);
            } else if let Some(v) = field.strip_prefix("sparse=") {
                sparse = v == "true";
            }
        }
        let kind = kind.ok_or_else(|| Error::Validation("feature header missing kind".into()))?;
        let names_line = lines
            .next()
            .ok_or_else(|| Error::Validation("feature file missing names line".into()))?
            .map_err(|e| Error::io("<features>", e))?;
        let names: Vec<String> = names_line
            .strip_prefix("#names")
            .ok_or_else(|| Error::Validation("feature file missing names line".into()))?
            .split('\t')
            .skip(1)
            .map(str::to_string)
            .collect();
        let mut rows = BTreeMap::new();
        for line in lines {
            let line = line.map_err(|e| Error::io("<features>", e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let entity = EntityId::new(fields.next().unwrap_or_default())?;
            let mut row: SparseVec = Vec::new();
            if sparse {
                for field in fields {
                    let (idx, value) = field
                        .split_once(':')
                        .ok_or_else(|| Error::Validation(format!("bad sparse component `{field}`")))?;
                    row.push((
                        idx.parse().map_err(|_| Error::Validation("bad index".into()))?,
                        value.parse().map_err(|_| Error::Validation("bad value".into()))?,
                    ));
                }
            } else {
                for (idx, field) in fields.enumerate() {
                    let value: f64 = field
                        .parse()
                        .map_err(|_| Error::Validation(format!("bad value `{field}`")))?;
                    if value != 0.0 {
                        row.push((idx, value));
                    }
                }
            }
            rows.insert(entity, row);
        }
        Ok(FeatureMatrix { kind, names, rows })
    }
}
