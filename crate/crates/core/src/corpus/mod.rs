//! Cluster-annotated protein records.
//!
//! Proteins arrive as FASTA with the cluster carried in the header as a
//! `cluster=<id>` token:
//!
//! ```text
//! >P0A1 cluster=UR50_COX1 cytochrome c oxidase subunit 1
//! MKWLYSTNHKDIGTLYFIFGIWAGMVGTSLSLLIRAELGHPGALIGDDQIYNVIVTAHAF
//! ```
//!
//! A [`ClusterSet`] groups records under their clusters, each with a single
//! reference protein and the identity threshold of the cluster. Cluster
//! metadata comes from a tab-delimited table (`cluster_id TAB identity TAB
//! reference_protein_id`).

mod fasta;
mod sample;
pub mod synth;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fasta::{parse_fasta, render_fasta};
pub use sample::{make_sample, SampleSpec};

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: &'static str },
    #[error("line {line}: invalid residue {character:?} (column {column})")]
    InvalidResidue {
        line: usize,
        column: usize,
        character: char,
    },
    #[error("record {protein_id:?} has an empty sequence")]
    EmptySequence { protein_id: String },
    #[error("line {line}: sequence data before the first header")]
    OrphanSequence { line: usize },
    #[error("duplicate protein id {0:?}")]
    DuplicateProtein(String),
    #[error("line {line}: expected {expected} tab-separated fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid identity {value:?}; expected a fraction in (0, 1]")]
    InvalidIdentity { line: usize, value: String },
    #[error("duplicate cluster id {0:?}")]
    DuplicateCluster(String),
    #[error("cluster {cluster_id:?} names unknown reference protein {protein_id:?}")]
    MissingReference {
        cluster_id: String,
        protein_id: String,
    },
    #[error("protein {protein_id:?} belongs to unknown cluster {cluster_id:?}")]
    UnknownCluster {
        protein_id: String,
        cluster_id: String,
    },
    #[error("identity {0} is not among the configured identities")]
    UnexpectedIdentity(f64),
    #[error("requested {requested} clusters but only {available} are available")]
    TooManyClusters { requested: usize, available: usize },
}

/// A protein sequence with its cluster annotation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProteinRecord {
    pub protein_id: String,
    pub cluster_id: String,
    pub description: String,
    pub sequence: String,
}

impl ProteinRecord {
    pub fn new(
        protein_id: impl Into<String>,
        cluster_id: impl Into<String>,
        sequence: impl Into<String>,
    ) -> Self {
        ProteinRecord {
            protein_id: protein_id.into(),
            cluster_id: cluster_id.into(),
            description: String::new(),
            sequence: sequence.into(),
        }
    }
}

/// One cluster: its reference protein, the other members and the identity
/// threshold the cluster was built at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: String,
    pub identity: f64,
    pub reference: ProteinRecord,
    pub members: Vec<ProteinRecord>,
}

/// Row of the cluster table.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTableEntry {
    pub cluster_id: String,
    pub identity: f64,
    pub reference_protein_id: String,
}

/// Identities accepted when no explicit list is configured.
pub const DEFAULT_IDENTITIES: [f64; 2] = [0.5, 0.9];

/// Clusters keyed (and iterated) by cluster id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    clusters: BTreeMap<String, Cluster>,
}

impl ClusterSet {
    /// Groups `records` into clusters described by `table`.
    ///
    /// The table's cluster id overrides whatever the reference protein's
    /// header said. Every other record must carry the id of a tabled cluster.
    /// Identities must be drawn from `allowed_identities`.
    pub fn assemble(
        records: Vec<ProteinRecord>,
        table: &[ClusterTableEntry],
        allowed_identities: &[f64],
    ) -> Result<ClusterSet, CorpusError> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.protein_id.as_str()) {
                return Err(CorpusError::DuplicateProtein(r.protein_id.clone()));
            }
        }

        let mut by_id: BTreeMap<String, ProteinRecord> = records
            .into_iter()
            .map(|r| (r.protein_id.clone(), r))
            .collect();

        let mut clusters = BTreeMap::new();
        for entry in table {
            if !allowed_identities
                .iter()
                .any(|&a| (a - entry.identity).abs() < 1e-12)
            {
                return Err(CorpusError::UnexpectedIdentity(entry.identity));
            }
            let mut reference = by_id.remove(&entry.reference_protein_id).ok_or_else(|| {
                CorpusError::MissingReference {
                    cluster_id: entry.cluster_id.clone(),
                    protein_id: entry.reference_protein_id.clone(),
                }
            })?;
            reference.cluster_id = entry.cluster_id.clone();
            let cluster = Cluster {
                cluster_id: entry.cluster_id.clone(),
                identity: entry.identity,
                reference,
                members: Vec::new(),
            };
            if clusters.insert(entry.cluster_id.clone(), cluster).is_some() {
                return Err(CorpusError::DuplicateCluster(entry.cluster_id.clone()));
            }
        }

        for (_, record) in by_id {
            match clusters.get_mut(&record.cluster_id) {
                Some(c) => c.members.push(record),
                None => {
                    return Err(CorpusError::UnknownCluster {
                        protein_id: record.protein_id,
                        cluster_id: record.cluster_id,
                    })
                }
            }
        }
        Ok(ClusterSet { clusters })
    }

    /// Builds a set directly from already-formed clusters.
    pub fn from_clusters(clusters: impl IntoIterator<Item = Cluster>) -> ClusterSet {
        ClusterSet {
            clusters: clusters
                .into_iter()
                .map(|c| (c.cluster_id.clone(), c))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn get(&self, cluster_id: &str) -> Option<&Cluster> {
        self.clusters.get(cluster_id)
    }

    /// Clusters in cluster-id order.
    pub fn iter(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.values()
    }

    /// Every record (references first within each cluster).
    pub fn records(&self) -> impl Iterator<Item = &ProteinRecord> {
        self.clusters
            .values()
            .flat_map(|c| std::iter::once(&c.reference).chain(c.members.iter()))
    }

    pub fn table(&self) -> Vec<ClusterTableEntry> {
        self.iter()
            .map(|c| ClusterTableEntry {
                cluster_id: c.cluster_id.clone(),
                identity: c.identity,
                reference_protein_id: c.reference.protein_id.clone(),
            })
            .collect()
    }
}

/// Renders records as `protein_id TAB cluster_id TAB sequence` lines.
pub fn export_tab_delimited(records: &[ProteinRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.protein_id);
        out.push('\t');
        out.push_str(&r.cluster_id);
        out.push('\t');
        out.push_str(&r.sequence);
        out.push('\n');
    }
    out
}

fn split_fields(line: &str, lineno: usize, expected: usize) -> Result<Vec<&str>, CorpusError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != expected {
        return Err(CorpusError::FieldCount {
            line: lineno,
            expected,
            found: fields.len(),
        });
    }
    Ok(fields)
}

fn check_sequence(seq: &str, lineno: usize, column_offset: usize) -> Result<(), CorpusError> {
    if let Some((i, c)) = seq
        .char_indices()
        .find(|&(_, c)| !c.is_ascii() || !crate::alphabet::is_residue(c as u8))
    {
        return Err(CorpusError::InvalidResidue {
            line: lineno,
            column: column_offset + i + 1,
            character: c,
        });
    }
    Ok(())
}

/// Parses the tab-delimited protein table written by [`export_tab_delimited`].
pub fn parse_tab_delimited(text: &str) -> Result<Vec<ProteinRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f = split_fields(line, lineno, 3)?;
        if f[0].is_empty() {
            return Err(CorpusError::MalformedHeader {
                line: lineno,
                reason: "empty protein id",
            });
        }
        if f[2].is_empty() {
            return Err(CorpusError::EmptySequence {
                protein_id: f[0].to_string(),
            });
        }
        let offset = f[0].len() + f[1].len() + 2;
        check_sequence(f[2], lineno, offset)?;
        out.push(ProteinRecord::new(f[0], f[1], f[2]));
    }
    Ok(out)
}

/// Parses the cluster table (`cluster_id TAB identity TAB reference_protein_id`).
pub fn parse_cluster_table(text: &str) -> Result<Vec<ClusterTableEntry>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f = split_fields(line, lineno, 3)?;
        let identity: f64 = f[1]
            .parse()
            .ok()
            .filter(|v: &f64| *v > 0.0 && *v <= 1.0)
            .ok_or_else(|| CorpusError::InvalidIdentity {
                line: lineno,
                value: f[1].to_string(),
            })?;
        out.push(ClusterTableEntry {
            cluster_id: f[0].to_string(),
            identity,
            reference_protein_id: f[2].to_string(),
        });
    }
    Ok(out)
}

pub fn render_cluster_table(entries: &[ClusterTableEntry]) -> String {
    entries
        .iter()
        .map(|e| {
            format!(
                "{}\t{}\t{}\n",
                e.cluster_id, e.identity, e.reference_protein_id
            )
        })
        .collect()
}
