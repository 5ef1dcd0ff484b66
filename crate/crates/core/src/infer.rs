//! Peptide-to-cluster mapping, absolute-probability scoring and FDR validation.
//!
//! Each engine pattern is a peptide of some cluster's reference protein. A
//! cluster's score is `pi = alpha / beta`, where `beta` is the number of
//! reference peptides mapped to the cluster and `alpha` the number of those
//! (distinct) peptides seen in the sample. Clusters with `pi >= theta` are
//! inferred. Against a known truth set, `sigma` counts inferred clusters that
//! are not in the truth, `phi` counts all inferred clusters and the false
//! discovery rate is `lambda = sigma / phi` (zero when nothing is inferred).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ac::MatchEvent;
use crate::alphabet::{encode_into, UnknownResidue};
use crate::corpus::{ClusterSet, ClusterTableEntry};
use crate::digest::{digest_record, select_significant, CleavageRuleSet, DigestError, Peptide};
use crate::engine::Engine;
use crate::tolerance::{derive_segments, ToleranceError};

#[derive(Debug, Error, PartialEq)]
pub enum InferError {
    #[error("match references unknown pattern id {0}")]
    UnknownPattern(u32),
    #[error("cluster {0:?} has no usable reference peptides")]
    EmptyCluster(String),
    #[error("engine has {engine} patterns but the map has {map}")]
    EngineMismatch { engine: usize, map: usize },
    #[error("peptide {peptide:?} names protein {protein_id:?}, which is not a cluster reference")]
    UnknownReference { peptide: String, protein_id: String },
    #[error("threshold {0} is outside (0, 1]")]
    Threshold(f64),
    #[error("sample peptide {index}: {source}")]
    SampleResidue {
        index: usize,
        #[source]
        source: UnknownResidue,
    },
    #[error(transparent)]
    Digest(#[from] DigestError),
    #[error("cluster {cluster_id:?}: {source}")]
    Alignment {
        cluster_id: String,
        #[source]
        source: ToleranceError,
    },
}

/// One engine pattern and where it came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntry {
    pub peptide: String,
    pub cluster_id: String,
    pub reference_protein_id: String,
}

/// Pattern id to cluster mapping; ids are positions in `entries`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeptideProteinMap {
    entries: Vec<MapEntry>,
    clusters: Vec<String>,
    /// Index into `clusters` for every entry.
    cluster_of: Vec<u32>,
    beta: Vec<u32>,
}

impl PeptideProteinMap {
    /// Builds the map from reference-peptide candidates.
    ///
    /// Candidates are deduplicated within a cluster; a peptide text that
    /// occurs in more than one cluster is degenerate and dropped from all of
    /// them. Every cluster in `cluster_ids` must keep at least one peptide.
    pub fn from_candidates(
        cluster_ids: impl IntoIterator<Item = String>,
        candidates: Vec<MapEntry>,
    ) -> Result<PeptideProteinMap, InferError> {
        let clusters: Vec<String> = cluster_ids
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut owners: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for c in &candidates {
            owners.entry(&c.peptide).or_default().insert(&c.cluster_id);
        }

        let index: HashMap<&str, u32> = clusters
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i as u32))
            .collect();
        let mut grouped: Vec<Vec<MapEntry>> = vec![Vec::new(); clusters.len()];
        let mut seen = BTreeSet::new();
        for c in &candidates {
            if owners[c.peptide.as_str()].len() > 1 {
                continue;
            }
            let Some(&ci) = index.get(c.cluster_id.as_str()) else {
                continue;
            };
            if seen.insert((ci, c.peptide.clone())) {
                grouped[ci as usize].push(c.clone());
            }
        }

        let mut entries = Vec::new();
        let mut cluster_of = Vec::new();
        let mut beta = Vec::new();
        for (ci, group) in grouped.into_iter().enumerate() {
            if group.is_empty() {
                return Err(InferError::EmptyCluster(clusters[ci].clone()));
            }
            beta.push(group.len() as u32);
            cluster_of.extend(std::iter::repeat_n(ci as u32, group.len()));
            entries.extend(group);
        }
        Ok(PeptideProteinMap {
            entries,
            clusters,
            cluster_of,
            beta,
        })
    }

    /// Digests every reference protein and keeps its significant peptides.
    pub fn from_clusters(
        clusters: &ClusterSet,
        rules: &CleavageRuleSet,
    ) -> Result<PeptideProteinMap, InferError> {
        let mut candidates = Vec::new();
        for c in clusters.iter() {
            for p in select_significant(digest_record(&c.reference, rules)?)? {
                candidates.push(MapEntry {
                    peptide: p.sequence,
                    cluster_id: c.cluster_id.clone(),
                    reference_protein_id: c.reference.protein_id.clone(),
                });
            }
        }
        Self::from_candidates(clusters.iter().map(|c| c.cluster_id.clone()), candidates)
    }

    /// Builds the map from a peptide list whose parent ids are reference
    /// proteins of `clusters`.
    pub fn from_peptide_list(
        clusters: &ClusterSet,
        peptides: Vec<Peptide>,
    ) -> Result<PeptideProteinMap, InferError> {
        Self::from_reference_table(&clusters.table(), peptides)
    }

    /// As [`from_peptide_list`](Self::from_peptide_list), with clusters
    /// known only through the cluster table.
    pub fn from_reference_table(
        table: &[ClusterTableEntry],
        peptides: Vec<Peptide>,
    ) -> Result<PeptideProteinMap, InferError> {
        let by_reference: HashMap<&str, &str> = table
            .iter()
            .map(|e| (e.reference_protein_id.as_str(), e.cluster_id.as_str()))
            .collect();
        let mut candidates = Vec::new();
        for p in select_significant(peptides)? {
            let cluster_id = by_reference
                .get(p.parent_protein_id.as_str())
                .ok_or_else(|| InferError::UnknownReference {
                    peptide: p.sequence.clone(),
                    protein_id: p.parent_protein_id.clone(),
                })?;
            candidates.push(MapEntry {
                peptide: p.sequence,
                cluster_id: cluster_id.to_string(),
                reference_protein_id: p.parent_protein_id,
            });
        }
        Self::from_candidates(table.iter().map(|e| e.cluster_id.clone()), candidates)
    }

    /// Like [`from_clusters`](Self::from_clusters), but each reference peptide
    /// becomes a degenerate pattern derived from the cluster alignment.
    ///
    /// `alignments[cluster_id]` holds gapped, equal-length rows with the
    /// reference protein in row 0.
    pub fn from_alignments(
        clusters: &ClusterSet,
        alignments: &BTreeMap<String, Vec<String>>,
        rules: &CleavageRuleSet,
    ) -> Result<PeptideProteinMap, InferError> {
        let mut candidates = Vec::new();
        for c in clusters.iter() {
            let peptides = select_significant(digest_record(&c.reference, rules)?)?;
            let Some(rows) = alignments.get(&c.cluster_id) else {
                candidates.extend(peptides.into_iter().map(|p| MapEntry {
                    peptide: p.sequence,
                    cluster_id: c.cluster_id.clone(),
                    reference_protein_id: c.reference.protein_id.clone(),
                }));
                continue;
            };
            let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
            let spans: Vec<(usize, usize)> = peptides
                .iter()
                .map(|p| (p.start, p.start + p.sequence.len()))
                .collect();
            let patterns = derive_segments(&rows, 0, &spans, &c.cluster_id).map_err(|source| {
                InferError::Alignment {
                    cluster_id: c.cluster_id.clone(),
                    source,
                }
            })?;
            candidates.extend(patterns.into_iter().map(|p| MapEntry {
                peptide: p.to_string(),
                cluster_id: c.cluster_id.clone(),
                reference_protein_id: c.reference.protein_id.clone(),
            }));
        }
        Self::from_candidates(clusters.iter().map(|c| c.cluster_id.clone()), candidates)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MapEntry] {
        &self.entries
    }

    /// Pattern texts in id order, ready for [`Engine::build`].
    pub fn patterns(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.peptide.clone()).collect()
    }

    pub fn cluster_ids(&self) -> &[String] {
        &self.clusters
    }

    pub fn beta(&self, cluster_id: &str) -> Option<u32> {
        let i = self
            .clusters
            .binary_search_by(|c| c.as_str().cmp(cluster_id))
            .ok()?;
        Some(self.beta[i])
    }

    pub fn cluster_of(&self, pattern_id: u32) -> Option<&str> {
        self.cluster_of
            .get(pattern_id as usize)
            .map(|&ci| self.clusters[ci as usize].as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    pub cluster_id: String,
    pub alpha: u32,
    pub beta: u32,
    pub pi: f64,
    /// Total match events, counting repeats of the same peptide.
    pub occurrences: u64,
}

/// Per-cluster match tallies before scoring.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchTally {
    alpha: Vec<u32>,
    occurrences: Vec<u64>,
}

/// Maps events to clusters, counting distinct patterns and raw occurrences.
pub fn tally(events: &[MatchEvent], map: &PeptideProteinMap) -> Result<MatchTally, InferError> {
    let mut hit = vec![false; map.len()];
    let mut t = MatchTally {
        alpha: vec![0; map.clusters.len()],
        occurrences: vec![0; map.clusters.len()],
    };
    for e in events {
        let ci = *map
            .cluster_of
            .get(e.pattern_id as usize)
            .ok_or(InferError::UnknownPattern(e.pattern_id))? as usize;
        t.occurrences[ci] += 1;
        if !std::mem::replace(&mut hit[e.pattern_id as usize], true) {
            t.alpha[ci] += 1;
        }
    }
    Ok(t)
}

/// Turns tallies into scores, in cluster-id order.
pub fn score(tally: &MatchTally, map: &PeptideProteinMap) -> Vec<ClusterScore> {
    map.clusters
        .iter()
        .enumerate()
        .map(|(ci, id)| {
            let alpha = tally.alpha.get(ci).copied().unwrap_or(0);
            let beta = map.beta[ci];
            ClusterScore {
                cluster_id: id.clone(),
                alpha,
                beta,
                pi: f64::from(alpha) / f64::from(beta),
                occurrences: tally.occurrences.get(ci).copied().unwrap_or(0),
            }
        })
        .collect()
}

/// Scores every cluster of the map from a flat list of match events.
pub fn aggregate(
    events: &[MatchEvent],
    map: &PeptideProteinMap,
) -> Result<Vec<ClusterScore>, InferError> {
    Ok(score(&tally(events, map)?, map))
}

/// Inclusion threshold on `pi`, in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Theta(f64);

impl Theta {
    pub fn new(value: f64) -> Result<Theta, InferError> {
        if value > 0.0 && value <= 1.0 {
            Ok(Theta(value))
        } else {
            Err(InferError::Threshold(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Theta {
    fn default() -> Self {
        Theta(0.5)
    }
}

impl TryFrom<f64> for Theta {
    type Error = InferError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Theta::new(v)
    }
}

impl From<Theta> for f64 {
    fn from(t: Theta) -> f64 {
        t.0
    }
}

/// Clusters whose `pi` reaches the threshold (inclusive).
pub fn decide(scores: &[ClusterScore], theta: Theta) -> BTreeSet<String> {
    scores
        .iter()
        .filter(|s| s.pi >= theta.0)
        .map(|s| s.cluster_id.clone())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdrReport {
    pub sigma: usize,
    pub phi: usize,
    pub lambda: f64,
    pub true_discoveries: usize,
}

pub fn validate(inferred: &BTreeSet<String>, truth: &BTreeSet<String>) -> FdrReport {
    let sigma = inferred.difference(truth).count();
    let phi = inferred.len();
    FdrReport {
        sigma,
        phi,
        lambda: if phi == 0 {
            0.0
        } else {
            sigma as f64 / phi as f64
        },
        true_discoveries: inferred.intersection(truth).count(),
    }
}

/// Wall time spent in each online stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub input_setting: Duration,
    pub search_and_mapping: Duration,
    pub probability: Duration,
}

impl TimingBreakdown {
    pub fn total(&self) -> Duration {
        self.input_setting + self.search_and_mapping + self.probability
    }
}

impl std::ops::AddAssign for TimingBreakdown {
    fn add_assign(&mut self, o: Self) {
        self.input_setting += o.input_setting;
        self.search_and_mapping += o.search_and_mapping;
        self.probability += o.probability;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferenceOutcome {
    pub scores: Vec<ClusterScore>,
    pub inferred: BTreeSet<String>,
    pub validation: Option<FdrReport>,
    pub cycles: u64,
    pub timing: TimingBreakdown,
}

/// The online path: encode the sample, search and map, score and decide.
///
/// Each sample peptide is scanned as its own text, so no match spans two
/// peptides.
pub fn infer_sample(
    sample: &[Peptide],
    engine: &Engine,
    map: &PeptideProteinMap,
    theta: Theta,
    truth: Option<&BTreeSet<String>>,
) -> Result<InferenceOutcome, InferError> {
    if engine.pattern_count() != map.len() {
        return Err(InferError::EngineMismatch {
            engine: engine.pattern_count(),
            map: map.len(),
        });
    }
    let t0 = Instant::now();
    // One flat buffer; `bounds[i]` ends peptide i.
    let mut codes = Vec::with_capacity(sample.iter().map(|p| p.sequence.len()).sum());
    let mut bounds = Vec::with_capacity(sample.len());
    for (index, p) in sample.iter().enumerate() {
        encode_into(&p.sequence, &mut codes)
            .map_err(|source| InferError::SampleResidue { index, source })?;
        bounds.push(codes.len());
    }

    let t1 = Instant::now();
    let mut events = Vec::new();
    let mut cycles = 0;
    let mut start = 0;
    for &end in &bounds {
        cycles += engine.scan_codes_into(&codes[start..end], &mut events);
        start = end;
    }
    let tallied = tally(&events, map)?;

    let t2 = Instant::now();
    let scores = score(&tallied, map);
    let inferred = decide(&scores, theta);
    let t3 = Instant::now();

    let validation = truth.map(|t| validate(&inferred, t));
    Ok(InferenceOutcome {
        scores,
        inferred,
        validation,
        cycles,
        timing: TimingBreakdown {
            input_setting: t1 - t0,
            search_and_mapping: t2 - t1,
            probability: t3 - t2,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(p: &str, c: &str) -> MapEntry {
        MapEntry {
            peptide: p.into(),
            cluster_id: c.into(),
            reference_protein_id: format!("R{c}"),
        }
    }

    fn ids(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn twelve_of_one() -> PeptideProteinMap {
        let peps: Vec<MapEntry> = (0..12).map(|i| entry(&"W".repeat(i + 1), "C1")).collect();
        PeptideProteinMap::from_candidates(["C1".to_string()], peps).unwrap()
    }

    #[test]
    fn pi_arithmetic() {
        let map = twelve_of_one();
        assert_eq!(map.beta("C1"), Some(12));
        let all: Vec<_> = (0..12).map(|i| MatchEvent::new(i, 0)).collect();
        assert_eq!(aggregate(&all, &map).unwrap()[0].pi, 1.0);
        let half: Vec<_> = (0..6).map(|i| MatchEvent::new(i, 0)).collect();
        let s = aggregate(&half, &map).unwrap();
        assert_eq!((s[0].alpha, s[0].beta, s[0].pi), (6, 12, 0.5));
    }

    #[test]
    fn repeats_count_once() {
        let map = twelve_of_one();
        let five: Vec<_> = (0..5).map(|i| MatchEvent::new(3, i)).collect();
        let s = aggregate(&five, &map).unwrap();
        assert_eq!(s[0].alpha, 1);
        assert_eq!(s[0].occurrences, 5);
    }

    #[test]
    fn unknown_pattern() {
        let map = twelve_of_one();
        assert_eq!(
            aggregate(&[MatchEvent::new(12, 0)], &map),
            Err(InferError::UnknownPattern(12))
        );
    }

    #[test]
    fn zero_alpha_clusters_reported_in_order() {
        let map = PeptideProteinMap::from_candidates(
            ["C2".to_string(), "C1".to_string()],
            vec![entry("AK", "C2"), entry("WK", "C1")],
        )
        .unwrap();
        let s = aggregate(&[], &map).unwrap();
        assert_eq!(
            s.iter().map(|s| s.cluster_id.as_str()).collect::<Vec<_>>(),
            ["C1", "C2"]
        );
        assert!(s.iter().all(|s| s.pi == 0.0));
    }

    #[test]
    fn degenerate_peptides_are_dropped() {
        let map = PeptideProteinMap::from_candidates(
            ["C1".to_string(), "C2".to_string()],
            vec![
                entry("AK", "C1"),
                entry("SHARED", "C1"),
                entry("SHARED", "C2"),
                entry("WK", "C2"),
                entry("AK", "C1"),
            ],
        )
        .unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.beta("C1"), Some(1));
        assert_eq!(map.cluster_of(1), Some("C2"));
        assert!(matches!(
            PeptideProteinMap::from_candidates(["C1".to_string(), "C2".to_string()], vec![entry("AK", "C1")]),
            Err(InferError::EmptyCluster(c)) if c == "C2"
        ));
    }

    #[test]
    fn decide_boundaries() {
        let mk = |id: &str, alpha, beta| ClusterScore {
            cluster_id: id.into(),
            alpha,
            beta,
            pi: f64::from(alpha) / f64::from(beta),
            occurrences: 0,
        };
        let scores = vec![mk("A", 4, 4), mk("B", 0, 4), mk("C", 2, 4), mk("D", 1, 4)];
        let theta = Theta::new(0.5).unwrap();
        assert_eq!(decide(&scores, theta), ids(&["A", "C"]));
        assert_eq!(decide(&scores, Theta::new(1.0).unwrap()), ids(&["A"]));
        assert!(Theta::new(0.0).is_err());
        assert!(Theta::new(1.01).is_err());
        assert_eq!(Theta::default().get(), 0.5);
    }

    #[test]
    fn fdr_set_arithmetic() {
        let r = validate(&ids(&["C1", "C3"]), &ids(&["C1", "C2"]));
        assert_eq!(
            (r.sigma, r.phi, r.lambda, r.true_discoveries),
            (1, 2, 0.5, 1)
        );
        let r = validate(&ids(&["C1"]), &ids(&["C1", "C2"]));
        assert_eq!(r.lambda, 0.0);
        let r = validate(&ids(&[]), &ids(&["C1"]));
        assert_eq!((r.sigma, r.phi, r.lambda), (0, 0, 0.0));
    }

    #[test]
    fn monotone_in_events() {
        let map = twelve_of_one();
        let mut events = vec![];
        let mut last = 0.0;
        for i in [3, 1, 3, 7, 0, 11, 11] {
            events.push(MatchEvent::new(i, 0));
            let pi = aggregate(&events, &map).unwrap()[0].pi;
            assert!(pi >= last);
            last = pi;
        }
    }
}
