//! Distant-supervision labeling and data preparation.
//!
//! Labeling runs in two passes over the corpus. The first pass builds
//! `cons_map`, an index from each constraint string to the subjects seen
//! under it. The second pass walks every categorical column: the column is
//! labeled interesting iff one of its values is a constraint under which a
//! *different* table lists the same (stem-matched) subject — i.e. someone
//! found the attribute worth creating a constrained child table for. The
//! matched value is recorded as the witness.
//!
//! Data preparation mirrors the evaluation setup: a stratified held-out
//! split per class, then the remaining negatives divided into k near-equal
//! chunks, each merged with all positives into one balanced sub-training
//! file.

use crate::error::{Error, Result};
use crate::measures::feature_vector_full;
use crate::model::{value_set_from_column, Label, Sample, TableRecord};
use crate::text::{head_noun, stem, subject_stem};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

/// Index from normalized constraint string to the subjects observed under
/// it, with the contributing table ids per subject. Contributors make the
/// "a table is never its own child" rule checkable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConsMap {
    entries: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
}

impl ConsMap {
    /// Normalized subjects recorded under a constraint.
    pub fn subjects_for(&self, constraint: &str) -> Option<Vec<&str>> {
        self.entries
            .get(constraint)
            .map(|m| m.keys().map(|s| s.as_str()).collect())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Does some table other than `excluded_id` list a stem-matching subject
    /// under this constraint?
    fn has_witness(&self, constraint: &str, subject_stem_key: &str, excluded_id: &str) -> bool {
        let Some(subjects) = self.entries.get(constraint) else {
            return false;
        };
        subjects.iter().any(|(subject, contributors)| {
            stem(subject) == subject_stem_key
                && contributors.iter().any(|id| id != excluded_id)
        })
    }

    fn insert(&mut self, constraint: String, subject: String, table_id: String) {
        self.entries
            .entry(constraint)
            .or_default()
            .entry(subject)
            .or_default()
            .insert(table_id);
    }
}

/// First pass: scan table metadata and index constraint -> subjects.
/// Subjects are stored as the normalized head noun of the table subject, so
/// "List of Tallest Buildings in the United States" files "buildings" under
/// "united states".
pub fn build_cons_map(corpus: &[TableRecord]) -> ConsMap {
    let mut map = ConsMap::default();
    for record in corpus {
        let subject = head_noun(&record.subject);
        if subject.is_empty() {
            continue;
        }
        for constraint in &record.metadata.constraints {
            if constraint.is_empty() {
                continue;
            }
            map.insert(constraint.clone(), subject.clone(), record.id.clone());
        }
    }
    map
}

/// Run metadata carried alongside a sample set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus_sha256: Option<String>,
    pub seed: Option<u64>,
}

/// Labeled samples, split by class.
///
/// The same (subject, attribute) pair can occur more than once when it
/// appears in several tables; by default all occurrences are kept (labeling
/// is per table), so a pair may even appear once per list. Deduplication
/// (keep-first) is available via [`SampleSet::dedup_keep_first`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub interesting: Vec<Sample>,
    pub non_interesting: Vec<Sample>,
    pub provenance: Provenance,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.interesting.len() + self.non_interesting.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All samples, interesting first.
    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.interesting.iter().chain(self.non_interesting.iter())
    }

    /// Keeps only the first occurrence of every (subject, attribute) pair,
    /// in generation order across both lists.
    pub fn dedup_keep_first(&mut self) {
        let mut seen = BTreeSet::new();
        let mut interesting = Vec::new();
        let mut non_interesting = Vec::new();
        for sample in self.interesting.drain(..).chain(self.non_interesting.drain(..)) {
            if seen.insert(sample.pair_key()) {
                match sample.label {
                    Label::Interesting => interesting.push(sample),
                    Label::NonInteresting => non_interesting.push(sample),
                }
            }
        }
        self.interesting = interesting;
        self.non_interesting = non_interesting;
    }
}

/// A table skipped during sample generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub table_id: String,
    pub reason: String,
}

/// Second pass of the labeling algorithm: walk every categorical attribute,
/// compute its feature vector, and label it by cons_map lookup. Value scan
/// stops at the first witness. Output order follows the corpus order, so a
/// sorted corpus gives a deterministic sample file.
pub fn generate_samples(corpus: &[TableRecord]) -> (SampleSet, Vec<SkipRecord>) {
    let cons_map = build_cons_map(corpus);
    generate_samples_with(corpus, &cons_map)
}

/// Same as [`generate_samples`] but against a prebuilt index.
pub fn generate_samples_with(
    corpus: &[TableRecord],
    cons_map: &ConsMap,
) -> (SampleSet, Vec<SkipRecord>) {
    use rayon::prelude::*;

    let per_table: Vec<(Vec<Sample>, Vec<SkipRecord>)> = corpus
        .par_iter()
        .map(|record| label_table(record, cons_map))
        .collect();

    let mut set = SampleSet::default();
    let mut skipped = Vec::new();
    for (samples, skips) in per_table {
        for sample in samples {
            match sample.label {
                Label::Interesting => set.interesting.push(sample),
                Label::NonInteresting => set.non_interesting.push(sample),
            }
        }
        skipped.extend(skips);
    }
    (set, skipped)
}

fn label_table(record: &TableRecord, cons_map: &ConsMap) -> (Vec<Sample>, Vec<SkipRecord>) {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();

    let subject_key = subject_stem(&record.subject);
    if subject_key.is_empty() {
        skipped.push(SkipRecord {
            table_id: record.id.clone(),
            reason: "no identifiable subject".to_string(),
        });
        return (samples, skipped);
    }

    for column in record.categorical_columns() {
        let value_set = match value_set_from_column(&column.cells) {
            Ok(vs) => vs,
            Err(_) => {
                skipped.push(SkipRecord {
                    table_id: record.id.clone(),
                    reason: format!("empty column {:?}", column.header),
                });
                continue;
            }
        };
        let features = feature_vector_full(&value_set);

        // scan values until the first witness; entry order is canonical
        let mut witness = None;
        for (value, _) in value_set.entries() {
            if cons_map.has_witness(value, &subject_key, &record.id) {
                witness = Some(value.clone());
                break;
            }
        }

        let label = if witness.is_some() {
            Label::Interesting
        } else {
            Label::NonInteresting
        };
        samples.push(Sample {
            subject: record.subject.clone(),
            attribute: column.header.clone(),
            label,
            features,
            witness,
        });
    }
    (samples, skipped)
}

/// Stratified held-out split: `test_fraction` of each class is set aside,
/// deterministically under `seed`. The per-class test count is rounded to
/// the nearest integer and clamped so both sides stay non-empty.
pub fn holdout_split(
    samples: &SampleSet,
    test_fraction: f64,
    seed: u64,
) -> Result<(SampleSet, Vec<Sample>, Vec<Sample>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if samples.interesting.len() < 2 {
        return Err(Error::ClassTooSmall {
            class: "interesting",
            count: samples.interesting.len(),
        });
    }
    if samples.non_interesting.len() < 2 {
        return Err(Error::ClassTooSmall {
            class: "non_interesting",
            count: samples.non_interesting.len(),
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let split_class = |class: &[Sample], rng: &mut ChaCha12Rng| -> (Vec<Sample>, Vec<Sample>) {
        let mut shuffled: Vec<Sample> = class.to_vec();
        shuffled.shuffle(rng);
        let n = shuffled.len();
        let test_n = ((n as f64 * test_fraction + 0.5).floor() as usize).clamp(1, n - 1);
        let train = shuffled.split_off(test_n);
        (train, shuffled)
    };

    // positives first, then negatives, off one seeded stream
    let (train_pos, test_pos) = split_class(&samples.interesting, &mut rng);
    let (train_neg, test_neg) = split_class(&samples.non_interesting, &mut rng);

    let train = SampleSet {
        interesting: train_pos,
        non_interesting: train_neg,
        provenance: Provenance {
            corpus_sha256: samples.provenance.corpus_sha256.clone(),
            seed: Some(seed),
        },
    };
    Ok((train, test_pos, test_neg))
}

/// Partitions the training negatives into k near-equal chunks (sizes differ
/// by at most one) and merges each with all positives.
pub fn make_balanced_subfiles(train: &SampleSet, k: usize) -> Result<Vec<SampleSet>> {
    let negatives = train.non_interesting.len();
    if k == 0 {
        return Err(Error::InvalidInput("subfile count must be >= 1".into()));
    }
    if k > negatives {
        return Err(Error::TooManySubfiles { k, negatives });
    }

    let base = negatives / k;
    let extra = negatives % k;
    let mut subfiles = Vec::with_capacity(k);
    let mut offset = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let chunk = train.non_interesting[offset..offset + size].to_vec();
        offset += size;
        subfiles.push(SampleSet {
            interesting: train.interesting.clone(),
            non_interesting: chunk,
            provenance: train.provenance.clone(),
        });
    }
    Ok(subfiles)
}

// ---------------------------------------------------------------------------
// Sample file formats

/// JSONL record: one sample per line.
#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    subject: String,
    attribute: String,
    label: Label,
    features: [f64; crate::model::FEATURE_COUNT],
    witness: Option<String>,
}

/// Writes line-delimited JSON, interesting samples first.
pub fn write_samples_jsonl<W: Write>(out: &mut W, samples: &SampleSet) -> std::io::Result<()> {
    for sample in samples.iter() {
        let record = SampleRecord {
            subject: sample.subject.clone(),
            attribute: sample.attribute.clone(),
            label: sample.label,
            features: sample.features.values,
            witness: sample.witness.clone(),
        };
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_samples_jsonl(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut buf = Vec::new();
    write_samples_jsonl(&mut buf, samples).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a JSONL sample file back into a SampleSet (order preserved within
/// each class).
pub fn load_samples_jsonl(path: &Path) -> Result<SampleSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut set = SampleSet::default();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(&line).map_err(|e| Error::Schema {
            location: format!("{}:{}", path.display(), line_no + 1),
            message: e.to_string(),
        })?;
        let sample = Sample {
            subject: record.subject,
            attribute: record.attribute,
            label: record.label,
            features: crate::model::FeatureVector::new(
                record.features,
                crate::model::FeatureMask::ALL,
                0,
            ),
            witness: record.witness,
        };
        match sample.label {
            Label::Interesting => set.interesting.push(sample),
            Label::NonInteresting => set.non_interesting.push(sample),
        }
    }
    Ok(set)
}

/// Conventional sparse text export: `<label> 1:<v> 2:<v> ... 7:<v>`.
pub fn write_samples_sparse<W: Write>(out: &mut W, samples: &SampleSet) -> std::io::Result<()> {
    for sample in samples.iter() {
        let label = if sample.label == Label::Interesting {
            "+1"
        } else {
            "-1"
        };
        write!(out, "{label}")?;
        for (i, v) in sample.features.values.iter().enumerate() {
            write!(out, " {}:{}", i + 1, v)?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}
