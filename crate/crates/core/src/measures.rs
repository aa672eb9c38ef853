//! The seven statistical interestingness measures over a value multiset.
//!
//! All measures are normalized to `[0, 1]` and take the empirical
//! distribution P(x) = count(x)/|T| of a [`ValueSet`] with table size |T| and
//! n distinct values. Degenerate inputs (|T| = 1, n = 1, n = |T|) get fixed
//! values and a degeneracy flag instead of NaN, so the labeling pass never
//! crashes on tiny tables.
//!
//! Normalizers:
//! - entropy is divided by log2 |T| (uniform over rows);
//! - P-Diversity by (0.5·|T| − 1)/√|T|, the value attained when every row
//!   holds a distinct value;
//! - P-Peculiarity by (n−1)·|1/|T| − 1/n| + |(|T|−n+1)/|T| − 1/n|, attained
//!   when all values but one occur exactly once.

use crate::model::{FeatureMask, FeatureVector, ValueSet, FEATURE_COUNT};

/// Identifies one measure and its fixed slot in the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasureId {
    Entropy,
    MaxCoverage,
    MaxInfoGap,
    Unalikeability,
    Peculiarity,
    PPeculiarity,
    PDiversity,
}

impl MeasureId {
    /// Slot order of the feature vector.
    pub const ALL: [MeasureId; FEATURE_COUNT] = [
        MeasureId::Entropy,
        MeasureId::MaxCoverage,
        MeasureId::MaxInfoGap,
        MeasureId::Unalikeability,
        MeasureId::Peculiarity,
        MeasureId::PPeculiarity,
        MeasureId::PDiversity,
    ];

    pub fn slot(self) -> usize {
        Self::ALL.iter().position(|m| *m == self).unwrap()
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MeasureId::Entropy => "H",
            MeasureId::MaxCoverage => "mCov",
            MeasureId::MaxInfoGap => "mIg",
            MeasureId::Unalikeability => "U",
            MeasureId::Peculiarity => "D",
            MeasureId::PPeculiarity => "pPec",
            MeasureId::PDiversity => "pVar",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            MeasureId::Entropy => "entropy",
            MeasureId::MaxCoverage => "max_coverage",
            MeasureId::MaxInfoGap => "max_info_gap",
            MeasureId::Unalikeability => "unalikeability",
            MeasureId::Peculiarity => "peculiarity",
            MeasureId::PPeculiarity => "p_peculiarity",
            MeasureId::PDiversity => "p_diversity",
        }
    }

    pub fn from_slot(slot: usize) -> Option<MeasureId> {
        Self::ALL.get(slot).copied()
    }
}

fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Normalized Shannon entropy: (−Σ P(x) log2 P(x)) / log2 |T|.
/// 0 when |T| = 1 or n = 1.
pub fn entropy_norm(vs: &ValueSet) -> f64 {
    let t = vs.table_size();
    if t <= 1 || vs.distinct() == 1 {
        return 0.0;
    }
    let h: f64 = vs.probabilities().map(|p| -p * p.log2()).sum();
    clamp_unit(h / (t as f64).log2())
}

/// Maximum coverage: max_x P(x).
pub fn max_coverage(vs: &ValueSet) -> f64 {
    vs.max_count() as f64 / vs.table_size() as f64
}

/// Max-Info-Gap at an explicit coverage and table size, per the definition
/// 1 − log2(mCov) / log2(1/|T|). Exposed separately so the size-sensitivity
/// of the measure can be charted without materializing a value set.
pub fn max_info_gap_for(mcov: f64, table_size: u64) -> f64 {
    if table_size <= 1 {
        return 1.0;
    }
    clamp_unit(1.0 - mcov.log2() / (1.0 / table_size as f64).log2())
}

/// Max-Info-Gap of a value set; 1 for single-row tables (degenerate).
pub fn max_info_gap(vs: &ValueSet) -> f64 {
    max_info_gap_for(max_coverage(vs), vs.table_size())
}

/// Unalikeability: 1 − Σ P(x)^2, how often two observations differ.
pub fn unalikeability(vs: &ValueSet) -> f64 {
    clamp_unit(1.0 - vs.probabilities().map(|p| p * p).sum::<f64>())
}

/// Simpson peculiarity: 1 − Σ count(x)(count(x)−1) / (|T|(|T|−1)),
/// the probability that a random pair of rows shows different values.
/// 0 for single-row tables (no pair exists; degenerate).
pub fn simpson_peculiarity(vs: &ValueSet) -> f64 {
    let t = vs.table_size();
    if t <= 1 {
        return 0.0;
    }
    let t = t as f64;
    let same: f64 = vs
        .entries()
        .iter()
        .map(|(_, c)| {
            let c = *c as f64;
            c * (c - 1.0)
        })
        .sum();
    clamp_unit(1.0 - same / (t * (t - 1.0)))
}

/// Normalized P-Diversity: sqrt(Σ (P(x) − 0.5)^2) divided by the maximum
/// (0.5·|T| − 1)/√|T|, attained when all |T| values are distinct.
/// 0 for |T| <= 2 (the normalizer is not positive; degenerate).
pub fn p_diversity_norm(vs: &ValueSet) -> f64 {
    let t = vs.table_size() as f64;
    if vs.table_size() <= 2 {
        return 0.0;
    }
    let raw: f64 = vs
        .probabilities()
        .map(|p| (p - 0.5) * (p - 0.5))
        .sum::<f64>()
        .sqrt();
    let max = (0.5 * t - 1.0) / t.sqrt();
    clamp_unit(raw / max)
}

/// Normalized P-Peculiarity: Σ |P(x) − 1/n| divided by the maximum
/// (n−1)·|1/|T| − 1/n| + |(|T|−n+1)/|T| − 1/n|.
/// 1 when n = 1 (one value has full coverage); 0 when n = |T| (uniform
/// all-distinct, where both the raw sum and the normalizer vanish). Both
/// degenerate.
pub fn p_peculiarity_norm(vs: &ValueSet) -> f64 {
    let n = vs.distinct() as f64;
    let t = vs.table_size() as f64;
    if vs.distinct() == 1 {
        return 1.0;
    }
    if vs.distinct() as u64 == vs.table_size() {
        return 0.0;
    }
    let uniform = 1.0 / n;
    let raw: f64 = vs.probabilities().map(|p| (p - uniform).abs()).sum();
    let max = (n - 1.0) * (1.0 / t - uniform).abs() + ((t - n + 1.0) / t - uniform).abs();
    clamp_unit(raw / max)
}

/// Bit flags marking which slots came from a degenerate-input rule.
fn degenerate_flags(vs: &ValueSet) -> u8 {
    let mut flags = 0u8;
    if vs.table_size() <= 1 {
        flags |= 1 << MeasureId::MaxInfoGap.slot();
        flags |= 1 << MeasureId::Peculiarity.slot();
    }
    if vs.table_size() <= 2 {
        flags |= 1 << MeasureId::PDiversity.slot();
    }
    if vs.distinct() == 1 || vs.distinct() as u64 == vs.table_size() {
        flags |= 1 << MeasureId::PPeculiarity.slot();
    }
    flags
}

/// All seven measures in canonical slot order. The mask records which slots
/// participate in kernel distance; degenerate slots are flagged, never
/// errors.
pub fn feature_vector(vs: &ValueSet, mask: FeatureMask) -> FeatureVector {
    let values = [
        entropy_norm(vs),
        max_coverage(vs),
        max_info_gap(vs),
        unalikeability(vs),
        simpson_peculiarity(vs),
        p_peculiarity_norm(vs),
        p_diversity_norm(vs),
    ];
    FeatureVector::new(values, mask, degenerate_flags(vs))
}

/// Convenience for the common full-mask case.
pub fn feature_vector_full(vs: &ValueSet) -> FeatureVector {
    feature_vector(vs, FeatureMask::ALL)
}
