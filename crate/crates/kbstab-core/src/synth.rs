//! Synthetic evolving-KB generator with ground-truth change causes.
//!
//! Every (entity, property) pair is assigned a cause drawn from the
//! configured rates, and the two snapshots are constructed so that the cause
//! is recoverable: real-world changes add a record whose valid time falls
//! inside the sampling interval, completions add same-day bulk groups with
//! old or missing valid times, corrections remove or perturb an existing
//! record, and "none" pairs stay identical. Generation is deterministic
//! under the seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::change_analysis::CauseLabel;
use crate::error::{Error, Result};
use crate::ingest::{ArticleVersion, GoldLabel};
use crate::kb_model::{
    EntityId, Fact, Interval, KbTimestamp, ObjectValue, PropertyId, Snapshot,
};

/// Cause mix and shape of the generated KB.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub real_world_rate: f64,
    pub completion_rate: f64,
    pub correction_rate: f64,
    pub none_rate: f64,
    pub entity_count: usize,
    pub properties: Vec<PropertyId>,
    pub tau1: KbTimestamp,
    pub tau2: KbTimestamp,
}

impl GenConfig {
    pub fn with_rates(
        real_world: f64,
        completion: f64,
        correction: f64,
        none: f64,
        entity_count: usize,
    ) -> Result<Self> {
        let config = GenConfig {
            real_world_rate: real_world,
            completion_rate: completion,
            correction_rate: correction,
            none_rate: none,
            entity_count,
            properties: vec![PropertyId::new("P54")?],
            tau1: KbTimestamp::from_ymd(2017, 1, 1)?,
            tau2: KbTimestamp::from_ymd(2019, 1, 1)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.real_world_rate,
            self.completion_rate,
            self.correction_rate,
            self.none_rate,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Validation("rates must lie in [0, 1]".into()));
        }
        let total: f64 = rates.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("rates must sum to 1, got {total}")));
        }
        if self.entity_count == 0 {
            return Err(Error::Validation("entity count must be at least 1".into()));
        }
        if self.properties.is_empty() {
            return Err(Error::Validation("property schema must be non-empty".into()));
        }
        if self.tau2 <= self.tau1 {
            return Err(Error::Validation("tau2 must come after tau1".into()));
        }
        Ok(())
    }
}

fn draw_cause(rng: &mut ChaCha8Rng, config: &GenConfig) -> CauseLabel {
    let x: f64 = rng.gen();
    if x < config.real_world_rate {
        CauseLabel::RealWorld
    } else if x < config.real_world_rate + config.completion_rate {
        CauseLabel::Completion
    } else if x < config.real_world_rate + config.completion_rate + config.correction_rate {
        CauseLabel::Correction
    } else {
        CauseLabel::None
    }
}

/// A day strictly inside (tau1, tau2], used for real-world valid times and
/// all fresh transaction times.
fn in_interval_day(rng: &mut ChaCha8Rng, interval: Interval) -> KbTimestamp {
    let lo = interval.tau1().earliest_day();
    let hi = interval.tau2().earliest_day();
    let span = (hi - lo).num_days();
    let offset = rng.gen_range(1..=span);
    KbTimestamp::new(lo + chrono::Duration::days(offset), crate::kb_model::Precision::Day)
}

/// A day at least a year before tau1, safe against the timestamp criterion.
fn old_day(rng: &mut ChaCha8Rng, interval: Interval) -> KbTimestamp {
    let lo = interval.tau1().earliest_day();
    let offset = rng.gen_range(366..=3650);
    KbTimestamp::new(lo - chrono::Duration::days(offset), crate::kb_model::Precision::Day)
}

/// Generate a snapshot pair plus per-pair gold cause labels.
pub fn generate(config: &GenConfig, seed: u64) -> Result<(Snapshot, Snapshot, Vec<GoldLabel>)> {
    config.validate()?;
    let interval = Interval::new(config.tau1, config.tau2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut facts1: Vec<Fact> = Vec::new();
    let mut facts2: Vec<Fact> = Vec::new();
    let mut gold: Vec<GoldLabel> = Vec::new();
    let mut object_counter: u64 = 0;

    for i in 0..config.entity_count {
        let subject = EntityId::new(format!("Q{:07}", i + 1))?;
        for property in &config.properties {
            let cause = draw_cause(&mut rng, config);
            let mut fresh_object = |rng: &mut ChaCha8Rng| -> ObjectValue {
                object_counter += 1;
                if rng.gen_bool(0.7) {
                    ObjectValue::Entity(EntityId::new(format!("V{object_counter:08}")).unwrap())
                } else {
                    ObjectValue::Literal(format!("value {object_counter}"))
                }
            };

            // base records present in both snapshots: old valid times (some
            // missing), transaction times at or before tau1
            let base_count = match cause {
                // corrections need something to remove or perturb; the
                // completion bulk signature needs a non-empty prior list too
                CauseLabel::Correction | CauseLabel::Completion => rng.gen_range(1..=3),
                _ => rng.gen_range(0..=3),
            };
            let mut base: Vec<Fact> = Vec::new();
            for _ in 0..base_count {
                let valid_time = if rng.gen_bool(0.8) {
                    Some(old_day(&mut rng, interval))
                } else {
                    None
                };
                base.push(Fact {
                    subject: subject.clone(),
                    property: property.clone(),
                    object: fresh_object(&mut rng),
                    valid_time,
                    transaction_time: old_day(&mut rng, interval),
                });
            }
            facts1.extend(base.iter().cloned());

            match cause {
                CauseLabel::None => {
                    facts2.extend(base);
                }
                CauseLabel::RealWorld => {
                    facts2.extend(base);
                    facts2.push(Fact {
                        subject: subject.clone(),
                        property: property.clone(),
                        object: fresh_object(&mut rng),
                        valid_time: Some(in_interval_day(&mut rng, interval)),
                        transaction_time: in_interval_day(&mut rng, interval),
                    });
                }
                CauseLabel::Completion => {
                    facts2.extend(base);
                    // bulk group: >= 2 additions recorded on one day, valid
                    // times old or absent
                    let group = rng.gen_range(2..=4);
                    let recorded = in_interval_day(&mut rng, interval);
                    for _ in 0..group {
                        let valid_time = if rng.gen_bool(0.5) {
                            Some(old_day(&mut rng, interval))
                        } else {
                            None
                        };
                        facts2.push(Fact {
                            subject: subject.clone(),
                            property: property.clone(),
                            object: fresh_object(&mut rng),
                            valid_time,
                            transaction_time: recorded,
                        });
                    }
                }
                CauseLabel::Correction => {
                    // either drop one record or perturb one literal/entity
                    let victim = rng.gen_range(0..base.len());
                    if rng.gen_bool(0.5) {
                        base.remove(victim);
                    } else {
                        let fact = &mut base[victim];
                        // a one-character tweak keeps literals above the
                        // modified-pair similarity threshold; entity victims
                        // swap to another entity reference
                        object_counter += 1;
                        fact.object = match &fact.object {
                            ObjectValue::Literal(s) => ObjectValue::Literal(format!("{s}0")),
                            ObjectValue::Entity(_) => {
                                ObjectValue::Entity(EntityId::new(format!("V{object_counter:08}"))?)
                            }
                        };
                        fact.transaction_time = in_interval_day(&mut rng, interval);
                    }
                    facts2.extend(base);
                }
            }

            gold.push(GoldLabel {
                subject: subject.clone(),
                property: property.clone(),
                interval,
                label: cause,
            });
        }
    }

    let snap1 = Snapshot::new(config.tau1, facts1)?;
    let snap2 = Snapshot::new(config.tau2, facts2)?;
    Ok((snap1, snap2, gold))
}

/// Shape of the synthetic article corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TextConfig {
    /// Probability that a changed entity's later article carries the signal.
    pub signal_rate: f64,
    pub signal_token: String,
    pub distractor_token: String,
    /// Lines appended to the later article version.
    pub added_lines: usize,
    pub words_per_line: usize,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            signal_rate: 0.9,
            signal_token: "transferred".into(),
            distractor_token: "renovated".into(),
            added_lines: 4,
            words_per_line: 6,
        }
    }
}

const FILLER_WORDS: &[&str] = &[
    "the", "season", "career", "player", "team", "match", "league", "history",
    "during", "record", "coach", "stadium", "award", "against", "debut",
    "ground", "summer", "winter", "annual", "report", "local", "result",
    "final", "first", "second", "former", "early", "later", "period", "style",
    "public", "press", "media", "event", "return", "start", "home", "crowd",
    "score", "title", "youth", "senior", "squad", "board", "group", "round",
    "cup", "win", "draw", "loss",
];

fn filler_line(rng: &mut ChaCha8Rng, words: usize) -> Vec<String> {
    (0..words)
        .map(|_| FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())].to_string())
        .collect()
}

/// Generate article version pairs for the labeled entities. Entities whose
/// gold label is real_world count as positive; their later articles contain
/// the planted signal token at the configured rate, while negatives receive
/// the distractor token instead. Both classes share the same filler
/// vocabulary so nothing but the planted tokens separates them.
pub fn generate_text(
    gold: &[GoldLabel],
    config: &TextConfig,
    seed: u64,
) -> Result<Vec<(ArticleVersion, ArticleVersion)>> {
    if !(0.0..=1.0).contains(&config.signal_rate) {
        return Err(Error::Validation(format!(
            "signal rate must lie in [0, 1], got {}",
            config.signal_rate
        )));
    }
    if config.added_lines == 0 || config.words_per_line == 0 {
        return Err(Error::Validation("article shape must be non-degenerate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(gold.len());
    for label in gold {
        let positive = label.label == CauseLabel::RealWorld;
        let base_lines: Vec<String> = (0..8)
            .map(|_| filler_line(&mut rng, config.words_per_line).join(" "))
            .collect();
        let mut new_lines = base_lines.clone();
        for _ in 0..config.added_lines {
            let mut words = filler_line(&mut rng, config.words_per_line);
            let plant = rng.gen_bool(config.signal_rate);
            if plant {
                let token = if positive {
                    &config.signal_token
                } else {
                    &config.distractor_token
                };
                let pos = rng.gen_range(0..=words.len() - 1);
                words[pos] = token.clone();
            }
            new_lines.push(words.join(" "));
        }
        new_lines.shuffle(&mut rng);
        out.push((
            ArticleVersion {
                entity: label.subject.clone(),
                as_of: label.interval.tau1(),
                text: base_lines.join("\n"),
            },
            ArticleVersion {
                entity: label.subject.clone(),
                as_of: label.interval.tau2(),
                text: new_lines.join("\n"),
            },
        ));
    }
    Ok(out)
}
