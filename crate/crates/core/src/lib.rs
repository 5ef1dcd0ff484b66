//! Peptide-centric protein inference.
//!
//! Reference proteins are grouped into clusters and digested in silico into
//! a peptide dictionary. A sample's peptides are scanned against that
//! dictionary with one of three engines (classic Aho-Corasick, a software
//! model of bit-split tiles, or a class-tolerant scanner), and each cluster
//! is scored by the fraction of its reference peptides that were seen.

pub mod ac;
pub mod alphabet;
pub mod bench;
pub mod bitsplit;
pub mod corpus;
pub mod digest;
pub mod engine;
pub mod infer;
pub mod tiler;
pub mod tolerance;

pub use ac::{AcAutomaton, MatchEvent, PatternSet};
pub use corpus::{Cluster, ClusterSet, ProteinRecord};
pub use digest::{digest, CleavageRuleSet, Peptide};
pub use engine::{Engine, EngineKind, EngineOptions};
pub use infer::{infer_sample, InferenceOutcome, PeptideProteinMap, Theta};
