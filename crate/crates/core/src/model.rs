//! Shared domain types: value multisets, parsed tables, samples, and the
//! seven-slot feature vector.
//!
//! Everything here is immutable after construction and safe to share across
//! worker threads.

use crate::error::{Error, Result};
use crate::text::normalize;
use serde::{Deserialize, Serialize};

/// Frequency multiset over a column's normalized values.
///
/// Entries are kept in canonical order — count descending, then value
/// ascending — so that equal multisets compare equal structurally and every
/// scan over the entries is deterministic regardless of input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueSet {
    entries: Vec<(String, u64)>,
    table_size: u64,
}

impl ValueSet {
    /// Build from explicit (value, count) pairs. Values are normalized and
    /// merged; counts must be positive.
    pub fn from_counts<I, S>(counts: I) -> Result<ValueSet>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut merged: std::collections::BTreeMap<String, u64> = std::collections::BTreeMap::new();
        for (value, count) in counts {
            if count == 0 {
                return Err(Error::InvalidInput("value count must be positive".into()));
            }
            let key = normalize(value.as_ref());
            if key.is_empty() {
                continue;
            }
            *merged.entry(key).or_insert(0) += count;
        }
        if merged.is_empty() {
            return Err(Error::EmptyColumn);
        }
        let mut entries: Vec<(String, u64)> = merged.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let table_size = entries.iter().map(|(_, c)| c).sum();
        Ok(ValueSet {
            entries,
            table_size,
        })
    }

    /// Entries in canonical order (count desc, value asc).
    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    /// Total number of counted cells (the table size |T|).
    pub fn table_size(&self) -> u64 {
        self.table_size
    }

    /// Number of distinct values n, 1 <= n <= |T|.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    /// Empirical probabilities P(x) = count(x) / |T| in entry order.
    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        let t = self.table_size as f64;
        self.entries.iter().map(move |(_, c)| *c as f64 / t)
    }

    /// Largest count.
    pub fn max_count(&self) -> u64 {
        // canonical order puts the largest count first
        self.entries[0].1
    }
}

/// Frequency multiset of a raw column: cells are normalized, empty cells are
/// dropped (missing data, not a category), and the remainder counted.
pub fn value_set_from_column<S: AsRef<str>>(column_cells: &[S]) -> Result<ValueSet> {
    if column_cells.is_empty() {
        return Err(Error::EmptyColumn);
    }
    ValueSet::from_counts(
        column_cells
            .iter()
            .map(|cell| (cell.as_ref(), 1u64))
            .filter(|(cell, _)| !normalize(cell).is_empty()),
    )
}

/// What role a table column plays. Exactly one column is the subject; the
/// rest are numeric or categorical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Subject,
    Numeric,
    Categorical,
}

/// One typed table column with its raw cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub header: String,
    pub kind: ColumnKind,
    pub cells: Vec<String>,
}

/// Table metadata mined from the page title: constraints and the ranking
/// criterion, all in normalized form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMeta {
    pub constraints: Vec<String>,
    pub ranking_criterion: Option<String>,
    pub page_title: String,
}

/// A fully parsed table: subject, typed columns, metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRecord {
    pub id: String,
    /// The entity class this table lists, as displayed ("Buildings").
    pub subject: String,
    pub subject_col: usize,
    pub columns: Vec<Column>,
    pub metadata: TableMeta,
}

impl TableRecord {
    pub fn categorical_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Categorical)
    }
}

/// Classification label for a (subject, attribute) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Interesting,
    NonInteresting,
}

impl Label {
    /// The ±1 encoding used by the classifier (+1 = interesting).
    pub fn sign(self) -> f64 {
        match self {
            Label::Interesting => 1.0,
            Label::NonInteresting => -1.0,
        }
    }

    pub fn from_sign(v: f64) -> Label {
        if v >= 0.0 {
            Label::Interesting
        } else {
            Label::NonInteresting
        }
    }
}

/// Number of measure slots in a feature vector.
pub const FEATURE_COUNT: usize = 7;

/// 7-bit feature-selection mask over the canonical measure slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureMask(u8);

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask(0b111_1111);

    /// Build from raw bits; rejects 0 and anything above 7 bits.
    pub fn new(bits: u8) -> Result<FeatureMask> {
        if bits == 0 || bits > 0b111_1111 {
            return Err(Error::InvalidInput(format!(
                "feature mask must use bits 1..=127, got {bits}"
            )));
        }
        Ok(FeatureMask(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, slot: usize) -> bool {
        slot < FEATURE_COUNT && self.0 & (1 << slot) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Masked slot indices in ascending order.
    pub fn slots(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..FEATURE_COUNT).filter(move |s| bits & (1 << s) != 0)
    }

    /// All 2^7 - 1 non-empty masks, ascending.
    pub fn all_combinations() -> impl Iterator<Item = FeatureMask> {
        (1u8..=0b111_1111).map(FeatureMask)
    }
}

impl std::fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names = crate::measures::MeasureId::ALL;
        let mut first = true;
        for slot in self.slots() {
            if !first {
                write!(f, "+")?;
            }
            write!(f, "{}", names[slot].short_name())?;
            first = false;
        }
        Ok(())
    }
}

/// Fixed-order vector of the seven measures, plus the selection mask and
/// per-slot degeneracy flags (tiny-table fallbacks, never failures).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub mask: FeatureMask,
    /// Bit i set when slot i was produced by a degenerate-input rule.
    pub degenerate: u8,
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_COUNT], mask: FeatureMask, degenerate: u8) -> FeatureVector {
        FeatureVector {
            values,
            mask,
            degenerate,
        }
    }

    /// The values selected by `mask`, in ascending slot order.
    pub fn project(&self, mask: FeatureMask) -> Result<Vec<f64>> {
        if mask.bits() & !self.mask.bits() != 0 {
            return Err(Error::MissingMaskedSlot {
                mask: mask.to_string(),
            });
        }
        Ok(mask.slots().map(|s| self.values[s]).collect())
    }
}

/// One labeled training/test sample: a (subject, attribute) pair with its
/// feature vector and, when interesting, the constraint value that witnessed
/// the child table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub subject: String,
    pub attribute: String,
    pub label: Label,
    pub features: FeatureVector,
    pub witness: Option<String>,
}

impl Sample {
    /// Normalized "subject:attribute" key identifying the pair.
    pub fn pair_key(&self) -> String {
        format!("{}:{}", normalize(&self.subject), normalize(&self.attribute))
    }
}
