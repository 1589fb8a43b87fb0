//! Fuzzy text search for noisy OCR corpora.
//!
//! Words are encoded as PHOC bit vectors, queries and OCR candidates are
//! projected into a common subspace learned with regularized CCA, and
//! candidates are ranked by cosine or CSLS score, with exhaustive
//! Levenshtein ranking as the accuracy/speed baseline. The `corpus` module
//! ingests token and alignment TSV files and persists the searchable
//! `.nlx` index; `noise` generates calibrated synthetic corpora; `eval`
//! reproduces the folded retrieval protocol with paired t-tests.

pub mod corpus;
pub mod editdist;
pub mod eval;
pub mod lexicon;
pub mod noise;
pub mod phoc;
pub mod ranking;
pub mod subspace;

pub use corpus::{AlignmentRecord, Candidate, IndexFile, Occurrence};
pub use eval::{EvalReport, FoldPlan, Method, ProtocolConfig};
pub use phoc::{PhocConfig, PhocVector};
pub use ranking::{Metric, SearchHit, SearchIndex};
pub use subspace::{CcaFit, CcaModel, TrainingPairSet};
