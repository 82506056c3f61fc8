//! Estimation pipeline for auditing gendered citation imbalance in
//! bibliographic corpora.
//!
//! The crate is organised around the stages of the audit:
//!
//! * [`corpus`] — record model, ingestion, DOI normalisation, reference
//!   linking, and median splits.
//! * [`authors`] — name parsing, initials resolution, variant merging, and
//!   probabilistic gender assignment.
//! * [`expectation`] — penalized multinomial spline model producing
//!   per-paper gender-category probabilities conditional on paper
//!   characteristics, plus the unconditional random-draws baseline.
//! * [`imbalance`] — observed/expected citation tallies, over- and
//!   undercitation measures, bootstrap confidence intervals, and
//!   graph-preserving null-model p-values.
//! * [`network`] — temporal co-authorship snapshots and neighborhood
//!   overrepresentation measures.
//! * [`inference`] — weighted quantile (median) and least-squares
//!   regression of per-paper overcitation on network composition.
//! * [`synth`] — synthetic corpora with known ground truth for
//!   calibration and recovery studies.
//! * [`report`] — CSV/JSON output schemas shared by the command-line
//!   front end.
//!
//! Resampling loops are data-parallel when the `parallel` feature
//! (default) is enabled and sequential otherwise; results are identical
//! either way because every replicate draws from its own seeded stream.

pub mod authors;
pub mod corpus;
pub mod expectation;
pub mod imbalance;
pub mod inference;
pub mod network;
pub mod par;
pub mod report;
pub mod stats;
pub mod synth;

pub use authors::{GenderCategory, GenderLabel};
