//! In-silico trypsin digestion.
//!
//! Trypsin cuts on the carboxyl side of K and R unless the next residue is P.
//! The high-specificity variant also leaves eleven `P2 P1 P1'` contexts
//! uncut: K in CKY, DKD, CKH, CKD, KKR and R in RRH, RRR, CRK, DRD, RRF, KRR.
//! An exception needs a real P2 residue, so a K or R in the first position is
//! only subject to the proline rule.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::is_residue;
use crate::corpus::ProteinRecord;

#[derive(Debug, Error, PartialEq)]
pub enum DigestError {
    #[error("cannot digest an empty sequence")]
    EmptySequence,
    #[error("invalid residue {character:?} at position {position}")]
    InvalidResidue { position: usize, character: char },
    #[error("likelihood {0} is outside [0, 1]")]
    LikelihoodOutOfRange(f64),
    #[error("exception triplet {0:?} must be three residues with a cleavable middle residue")]
    BadTriplet(String),
    #[error("line {line}: {reason}")]
    PeptideFile { line: usize, reason: String },
}

/// Significance cutoff on the probability of incorrect identification.
pub const SIGNIFICANCE_THRESHOLD: f64 = 0.1;

/// Trypsin cleavage rules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleavageRuleSet {
    cleave_after: Vec<u8>,
    refuse_if_next: Vec<u8>,
    exception_triplets: Vec<[u8; 3]>,
    pub missed_cleavages: usize,
}

pub const TRYPSIN_EXCEPTIONS: [&str; 11] = [
    "CKY", "DKD", "CKH", "CKD", "KKR", "RRH", "RRR", "CRK", "DRD", "RRF", "KRR",
];

impl Default for CleavageRuleSet {
    fn default() -> Self {
        CleavageRuleSet::new(b"KR", b"P", &TRYPSIN_EXCEPTIONS, 0)
            .expect("built-in trypsin rules are valid")
    }
}

impl CleavageRuleSet {
    pub fn new(
        cleave_after: &[u8],
        refuse_if_next: &[u8],
        exception_triplets: &[&str],
        missed_cleavages: usize,
    ) -> Result<Self, DigestError> {
        let mut triplets = Vec::with_capacity(exception_triplets.len());
        for t in exception_triplets {
            let b = t.as_bytes();
            if b.len() != 3 || !b.iter().all(|&r| is_residue(r)) || !cleave_after.contains(&b[1]) {
                return Err(DigestError::BadTriplet(t.to_string()));
            }
            triplets.push([b[0], b[1], b[2]]);
        }
        Ok(CleavageRuleSet {
            cleave_after: cleave_after.to_vec(),
            refuse_if_next: refuse_if_next.to_vec(),
            exception_triplets: triplets,
            missed_cleavages,
        })
    }

    pub fn with_missed_cleavages(mut self, missed: usize) -> Self {
        self.missed_cleavages = missed;
        self
    }

    /// Whether the bond after `cur` is cut, given its neighbours.
    pub fn is_cleavage_site(&self, prev: Option<u8>, cur: u8, next: Option<u8>) -> bool {
        let Some(next) = next else { return false };
        if !self.cleave_after.contains(&cur) || self.refuse_if_next.contains(&next) {
            return false;
        }
        match prev {
            Some(prev) => !self.exception_triplets.contains(&[prev, cur, next]),
            None => true,
        }
    }
}

/// A digestion product, tied to where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peptide {
    pub sequence: String,
    pub parent_protein_id: String,
    pub start: usize,
    /// Probability that the identification is wrong; `None` for in-silico
    /// products.
    pub likelihood: Option<f64>,
}

/// Free function form of [`CleavageRuleSet::is_cleavage_site`].
pub fn is_cleavage_site(
    rules: &CleavageRuleSet,
    prev: Option<u8>,
    cur: u8,
    next: Option<u8>,
) -> bool {
    rules.is_cleavage_site(prev, cur, next)
}

/// Digests a bare sequence; peptides carry an empty parent id.
pub fn digest(sequence: &str, rules: &CleavageRuleSet) -> Result<Vec<Peptide>, DigestError> {
    digest_with_parent(sequence, "", rules)
}

pub fn digest_record(
    record: &ProteinRecord,
    rules: &CleavageRuleSet,
) -> Result<Vec<Peptide>, DigestError> {
    digest_with_parent(&record.sequence, &record.protein_id, rules)
}

/// Peptides in order of start position; with missed cleavages, runs sharing a
/// start are ordered shortest first.
pub fn digest_with_parent(
    sequence: &str,
    parent: &str,
    rules: &CleavageRuleSet,
) -> Result<Vec<Peptide>, DigestError> {
    let s = sequence.as_bytes();
    if s.is_empty() {
        return Err(DigestError::EmptySequence);
    }
    if let Some(position) = s.iter().position(|&b| !is_residue(b)) {
        return Err(DigestError::InvalidResidue {
            position,
            character: s[position] as char,
        });
    }

    // Fragment boundaries: 0, every cut position (index after the cut), len.
    let mut bounds = vec![0];
    for i in 0..s.len() {
        let prev = i.checked_sub(1).map(|p| s[p]);
        if rules.is_cleavage_site(prev, s[i], s.get(i + 1).copied()) {
            bounds.push(i + 1);
        }
    }
    bounds.push(s.len());

    let fragments = bounds.len() - 1;
    let mut out = Vec::new();
    for first in 0..fragments {
        let last_max = (first + rules.missed_cleavages).min(fragments - 1);
        for last in first..=last_max {
            let (a, b) = (bounds[first], bounds[last + 1]);
            out.push(Peptide {
                sequence: sequence[a..b].to_string(),
                parent_protein_id: parent.to_string(),
                start: a,
                likelihood: None,
            });
        }
    }
    Ok(out)
}

/// Keeps peptides whose likelihood is at most 0.1, plus those without one.
pub fn select_significant(peptides: Vec<Peptide>) -> Result<Vec<Peptide>, DigestError> {
    for p in &peptides {
        if let Some(l) = p.likelihood {
            if !(0.0..=1.0).contains(&l) {
                return Err(DigestError::LikelihoodOutOfRange(l));
            }
        }
    }
    Ok(peptides
        .into_iter()
        .filter(|p| p.likelihood.is_none_or(|l| l <= SIGNIFICANCE_THRESHOLD))
        .collect())
}

/// Writes the peptide list format: `sequence TAB parent TAB start [TAB likelihood]`.
pub fn write_peptide_list(peptides: &[Peptide]) -> String {
    let mut out = String::new();
    for p in peptides {
        let _ = write!(out, "{}\t{}\t{}", p.sequence, p.parent_protein_id, p.start);
        if let Some(l) = p.likelihood {
            let _ = write!(out, "\t{l}");
        }
        out.push('\n');
    }
    out
}

/// Parses the peptide list format. Sequences are taken verbatim, so callers
/// that expect plain residues must validate them.
pub fn parse_peptide_list(text: &str) -> Result<Vec<Peptide>, DigestError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| DigestError::PeptideFile {
            line: line_no,
            reason,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&f.len()) {
            return Err(err(format!("expected 3 or 4 fields, found {}", f.len())));
        }
        if f[0].is_empty() {
            return Err(err("empty peptide sequence".into()));
        }
        let start = f[2]
            .parse()
            .map_err(|_| err(format!("invalid start {:?}", f[2])))?;
        let likelihood = match f.get(3) {
            Some(v) => {
                let l: f64 = v
                    .parse()
                    .map_err(|_| err(format!("invalid likelihood {v:?}")))?;
                if !(0.0..=1.0).contains(&l) {
                    return Err(DigestError::LikelihoodOutOfRange(l));
                }
                Some(l)
            }
            None => None,
        };
        out.push(Peptide {
            sequence: f[0].to_string(),
            parent_protein_id: f[1].to_string(),
            start,
            likelihood,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seqs(p: &[Peptide]) -> Vec<&str> {
        p.iter().map(|p| p.sequence.as_str()).collect()
    }

    /// Literal per-position oracle: walk the sequence, close a fragment
    /// whenever the rule table says the bond is cut.
    fn oracle(s: &str) -> Vec<String> {
        let b = s.as_bytes();
        let mut out = vec![];
        let mut cur = String::new();
        for i in 0..b.len() {
            cur.push(b[i] as char);
            let p1 = b[i];
            let p1p = b.get(i + 1).copied();
            let p2 = if i > 0 { Some(b[i - 1]) } else { None };
            let mut cut = (p1 == b'K' || p1 == b'R') && p1p.is_some() && p1p != Some(b'P');
            if cut {
                if let Some(p2) = p2 {
                    let tri = [p2, p1, p1p.unwrap()];
                    if TRYPSIN_EXCEPTIONS.iter().any(|t| t.as_bytes() == tri) {
                        cut = false;
                    }
                }
            }
            if cut {
                out.push(std::mem::take(&mut cur));
            }
        }
        out.push(cur);
        out
    }

    #[test]
    fn site_examples() {
        let r = CleavageRuleSet::default();
        assert!(r.is_cleavage_site(Some(b'A'), b'K', Some(b'A')));
        assert!(!r.is_cleavage_site(Some(b'A'), b'K', Some(b'P')));
        assert!(!r.is_cleavage_site(Some(b'C'), b'K', Some(b'Y')));
        assert!(!r.is_cleavage_site(Some(b'A'), b'K', None));
        assert!(!r.is_cleavage_site(None, b'A', Some(b'K')));
        // No P2: exception cannot fire.
        assert!(r.is_cleavage_site(None, b'K', Some(b'Y')));
    }

    #[test]
    fn digest_examples() {
        let r = CleavageRuleSet::default();
        assert_eq!(seqs(&digest("MAR", &r).unwrap()), ["MAR"]);
        assert_eq!(seqs(&digest("AAKAAR", &r).unwrap()), ["AAK", "AAR"]);
        assert_eq!(seqs(&digest("AAKPAA", &r).unwrap()), ["AAKPAA"]);
        assert_eq!(digest("", &r), Err(DigestError::EmptySequence));
        assert!(matches!(
            digest("AXK", &r),
            Err(DigestError::InvalidResidue { position: 1, .. })
        ));
        for s in ["MAR", "AAKAAR", "AAKPAA"] {
            let want = oracle(s);
            assert_eq!(seqs(&digest(s, &r).unwrap()), want);
        }
    }

    #[test]
    fn every_exception_triplet_suppresses() {
        let r = CleavageRuleSet::default();
        for t in TRYPSIN_EXCEPTIONS {
            let s = format!("GG{t}GG");
            let got = digest(&s, &r).unwrap();
            // The middle residue of the triplet (index 3) is not cut; other
            // K/R in the triplet may still be cut by their own context.
            assert!(got.iter().all(|p| p.start + p.sequence.len() != 4), "{t}");
            assert_eq!(seqs(&got), oracle(&s), "{t}");
        }
    }

    #[test]
    fn missed_cleavages_emit_runs() {
        let r = CleavageRuleSet::default().with_missed_cleavages(1);
        let got = digest("AAKGGRCC", &r).unwrap();
        assert_eq!(seqs(&got), ["AAK", "AAKGGR", "GGR", "GGRCC", "CC"]);
        let starts: Vec<_> = got.iter().map(|p| p.start).collect();
        assert_eq!(starts, [0, 0, 3, 3, 6]);
    }

    #[test]
    fn significance_filter() {
        let mk = |l| Peptide {
            sequence: "AK".into(),
            parent_protein_id: "P".into(),
            start: 0,
            likelihood: l,
        };
        let kept = select_significant(vec![mk(Some(0.05)), mk(Some(0.2)), mk(None), mk(Some(0.1))])
            .unwrap();
        assert_eq!(
            kept.iter().map(|p| p.likelihood).collect::<Vec<_>>(),
            vec![Some(0.05), None, Some(0.1)]
        );
        assert_eq!(
            select_significant(vec![mk(Some(1.5))]),
            Err(DigestError::LikelihoodOutOfRange(1.5))
        );
    }

    #[test]
    fn peptide_list_round_trip() {
        let r = CleavageRuleSet::default();
        let mut peps = digest_with_parent("AAKAAR", "P9", &r).unwrap();
        peps[1].likelihood = Some(0.25);
        let text = write_peptide_list(&peps);
        assert_eq!(text, "AAK\tP9\t0\nAAR\tP9\t3\t0.25\n");
        assert_eq!(parse_peptide_list(&text).unwrap(), peps);
        assert!(parse_peptide_list("AAK\tP9\n").is_err());
        assert!(parse_peptide_list("AAK\tP9\tx\n").is_err());
    }

    #[test]
    fn bad_triplet_rejected() {
        assert!(CleavageRuleSet::new(b"KR", b"P", &["CAY"], 0).is_err());
        assert!(CleavageRuleSet::new(b"KR", b"P", &["CK"], 0).is_err());
    }

    proptest! {
        #[test]
        fn conservation_and_no_internal_sites(s in "[ACDEFGHIKLMNPQRSTVWY]{1,400}") {
            let r = CleavageRuleSet::default();
            let peps = digest(&s, &r).unwrap();
            let joined: String = peps.iter().map(|p| p.sequence.as_str()).collect();
            prop_assert_eq!(&joined, &s);
            for p in &peps {
                prop_assert_eq!(&s[p.start..p.start + p.sequence.len()], p.sequence.as_str());
                let b = s.as_bytes();
                for i in p.start..p.start + p.sequence.len() - 1 {
                    let prev = i.checked_sub(1).map(|j| b[j]);
                    prop_assert!(!r.is_cleavage_site(prev, b[i], Some(b[i + 1])));
                }
            }
        }

        #[test]
        fn missed_cleavage_output_is_superset(s in "[AKRPCDY]{1,120}") {
            let base = digest(&s, &CleavageRuleSet::default()).unwrap();
            let more = digest(&s, &CleavageRuleSet::default().with_missed_cleavages(2)).unwrap();
            for p in &base {
                prop_assert!(more.contains(p));
            }
        }
    }
}
