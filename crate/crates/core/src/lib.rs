//! Mining interesting categorical attributes from table corpora.
//!
//! The pipeline, end to end:
//!
//! 1. [`ingest`] parses a corpus of tables (canonical JSON or minimal
//!    wiki-table markup), extracts page-title metadata, finds the subject
//!    column, and filters numeric attributes.
//! 2. [`sampler`] labels every (subject, categorical attribute) pair as
//!    interesting / non-interesting by distant supervision: an attribute is
//!    interesting iff some other table in the corpus was created by
//!    constraining it. It also produces the train/test splits and balanced
//!    sub-training files.
//! 3. [`measures`] maps a column's value distribution to seven statistical
//!    interestingness measures, all normalized to `[0, 1]`.
//! 4. [`svm`] trains a soft-margin ν-SVM with an RBF kernel over those
//!    measures, with grid-searched parameters and feature-combination search.
//! 5. [`eval`] scores predictions against held-out data or multi-evaluator
//!    assessments (class metrics, majority ground truth, Fleiss' kappa).
//!
//! Shared domain types live in [`model`] and are re-exported at the crate
//! root. [`pipeline`] holds the file-level orchestration used by the CLI.

pub mod error;
pub mod eval;
pub mod ingest;
pub mod measures;
pub mod model;
pub mod pipeline;
pub mod sampler;
pub mod svm;
pub mod text;
pub mod wikitext;

#[cfg(feature = "testkit")]
pub mod testkit;

pub use error::{Error, Result};
pub use model::{
    Column, ColumnKind, FeatureMask, FeatureVector, Label, Sample, TableMeta, TableRecord,
    ValueSet,
};
