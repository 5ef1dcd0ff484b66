//! Seeded synthetic cluster corpora.
//!
//! Reference proteins are built from random tryptic peptides so that every
//! reference peptide is specific to its cluster: no reference peptide occurs
//! inside another cluster's reference protein. Members are substitution-only
//! variants of their reference, which keeps each cluster trivially aligned.
//!
//! Mutation draws are coupled across rates: each member position consumes the
//! same random numbers regardless of the rate, and a position is substituted
//! when its uniform draw falls below the rate. Raising the rate therefore only
//! adds substitutions on top of the ones made at a lower rate.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cluster, ClusterSet, ProteinRecord, DEFAULT_IDENTITIES};
use crate::alphabet::RESIDUES;
use crate::digest::{digest, CleavageRuleSet};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub clusters: usize,
    pub members_per_cluster: usize,
    /// Tryptic peptides per reference protein.
    pub peptides_per_protein: std::ops::RangeInclusive<usize>,
    /// Residues before the terminal K/R of each generated peptide.
    pub peptide_body: std::ops::RangeInclusive<usize>,
    /// Per-residue substitution probability for members.
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            clusters: 12,
            members_per_cluster: 4,
            peptides_per_protein: 8..=16,
            peptide_body: 5..=14,
            mutation_rate: 0.0,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub clusters: ClusterSet,
    /// Per cluster: reference first, then members; all the same length.
    pub alignments: BTreeMap<String, Vec<String>>,
}

const BODY: &[u8] = b"ACDEFGHILMNPQSTVWY";

fn random_reference(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(cfg.peptides_per_protein.clone());
    let mut s = String::from("M");
    for i in 0..n {
        let len = rng.random_range(cfg.peptide_body.clone());
        for j in 0..len {
            let mut r = BODY[rng.random_range(0..BODY.len())];
            // Keep the preceding K/R cleavable.
            while j == 0 && i > 0 && r == b'P' {
                r = BODY[rng.random_range(0..BODY.len())];
            }
            s.push(r as char);
        }
        s.push(if rng.random_bool(0.5) { 'K' } else { 'R' });
    }
    s
}

/// Substitutes each residue with probability `rate`, using two draws per
/// position whatever the rate.
pub fn mutate_coupled(sequence: &str, rate: f64, rng: &mut impl Rng) -> String {
    sequence
        .bytes()
        .map(|r| {
            let u: f64 = rng.random();
            let pick = rng.random_range(0..RESIDUES.len() - 1);
            if u < rate {
                let others: Vec<u8> = RESIDUES.iter().copied().filter(|&x| x != r).collect();
                others[pick] as char
            } else {
                r as char
            }
        })
        .collect()
}

fn specific_to_cluster(candidate: &str, others: &[String], rules: &CleavageRuleSet) -> bool {
    let own = digest(candidate, rules).expect("generated sequence is valid");
    let own_ok = own
        .iter()
        .all(|p| others.iter().all(|o| !o.contains(&p.sequence)));
    own_ok
        && others.iter().all(|o| {
            digest(o, rules)
                .expect("generated sequence is valid")
                .iter()
                .all(|p| !candidate.contains(&p.sequence))
        })
}

/// Generates a corpus. Identities alternate between 0.9 and 0.5 across
/// clusters; they are labels only, member divergence is `mutation_rate`.
pub fn synthesize(cfg: &SynthConfig) -> SyntheticCorpus {
    let rules = CleavageRuleSet::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut references: Vec<String> = Vec::with_capacity(cfg.clusters);
    while references.len() < cfg.clusters {
        let candidate = random_reference(cfg, &mut rng);
        if specific_to_cluster(&candidate, &references, &rules) {
            references.push(candidate);
        }
    }

    let mut clusters = Vec::new();
    let mut alignments = BTreeMap::new();
    for (c, reference) in references.into_iter().enumerate() {
        let cluster_id = format!("CL{:02}", c + 1);
        let identity = DEFAULT_IDENTITIES[(c + 1) % 2];
        let members: Vec<ProteinRecord> = (0..cfg.members_per_cluster)
            .map(|m| {
                let mut member_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                member_rng.set_stream(1 + (c as u64) * 4096 + m as u64);
                ProteinRecord {
                    protein_id: format!("{cluster_id}_M{}", m + 1),
                    cluster_id: cluster_id.clone(),
                    description: format!("synthetic member {}", m + 1),
                    sequence: mutate_coupled(&reference, cfg.mutation_rate, &mut member_rng),
                }
            })
            .collect();
        let mut rows = vec![reference.clone()];
        rows.extend(members.iter().map(|m| m.sequence.clone()));
        alignments.insert(cluster_id.clone(), rows);
        clusters.push(Cluster {
            cluster_id: cluster_id.clone(),
            identity,
            reference: ProteinRecord {
                protein_id: format!("{cluster_id}_REF"),
                cluster_id: cluster_id.clone(),
                description: "synthetic reference".into(),
                sequence: reference,
            },
            members,
        });
    }
    SyntheticCorpus {
        clusters: ClusterSet::from_clusters(clusters),
        alignments,
    }
}
