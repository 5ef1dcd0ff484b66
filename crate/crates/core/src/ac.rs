//! Classic Aho-Corasick automaton over the residue alphabet.
//!
//! The automaton is stored as a dense DFA: every state has a transition for
//! each of the 20 residue codes, with failure links already folded into the
//! table. Output sets are failure-closed and kept sorted by pattern id, so a
//! scan yields events ordered by end position and then pattern id without a
//! separate sort.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{encode, UnknownResidue, ALPHABET_SIZE};

#[derive(Debug, Error, PartialEq)]
pub enum PatternError {
    #[error("pattern set is empty")]
    EmptySet,
    #[error("pattern {0} is empty")]
    EmptyPattern(u32),
    #[error("pattern {id}: {source}")]
    InvalidResidue {
        id: u32,
        #[source]
        source: UnknownResidue,
    },
}

/// Patterns with dense ids `0..n`; the id is the position in the list.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSet {
    patterns: Vec<String>,
}

impl PatternSet {
    pub fn new<I, S>(patterns: I) -> Result<PatternSet, PatternError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let patterns: Vec<String> = patterns.into_iter().map(Into::into).collect();
        if patterns.is_empty() {
            return Err(PatternError::EmptySet);
        }
        for (id, p) in patterns.iter().enumerate() {
            let id = id as u32;
            if p.is_empty() {
                return Err(PatternError::EmptyPattern(id));
            }
            encode(p).map_err(|source| PatternError::InvalidResidue { id, source })?;
        }
        Ok(PatternSet { patterns })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&str> {
        self.patterns.get(id as usize).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.patterns
            .iter()
            .enumerate()
            .map(|(i, p)| (i as u32, p.as_str()))
    }

    pub fn total_length(&self) -> usize {
        self.patterns.iter().map(String::len).sum()
    }
}

/// One occurrence of a pattern; `end_pos` is the index of its last residue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatchEvent {
    pub end_pos: usize,
    pub pattern_id: u32,
}

impl MatchEvent {
    pub fn new(pattern_id: u32, end_pos: usize) -> Self {
        MatchEvent {
            end_pos,
            pattern_id,
        }
    }
}

pub type StateId = u32;
const ROOT: StateId = 0;
const NONE: StateId = StateId::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcAutomaton {
    /// Row-major `[state][code]` next-state table.
    delta: Vec<StateId>,
    fail: Vec<StateId>,
    /// Failure-closed output sets, ascending.
    outputs: Vec<Vec<u32>>,
    depth: Vec<u32>,
}

impl AcAutomaton {
    pub fn build(patterns: &PatternSet) -> Result<AcAutomaton, PatternError> {
        if patterns.is_empty() {
            return Err(PatternError::EmptySet);
        }
        let mut goto: Vec<[StateId; ALPHABET_SIZE]> = vec![[NONE; ALPHABET_SIZE]];
        let mut outputs: Vec<Vec<u32>> = vec![vec![]];
        let mut depth = vec![0u32];

        for (id, p) in patterns.iter() {
            let codes = encode(p).map_err(|source| PatternError::InvalidResidue { id, source })?;
            let mut s = ROOT;
            for c in codes {
                let next = goto[s as usize][c as usize];
                s = if next == NONE {
                    let new = goto.len() as StateId;
                    goto.push([NONE; ALPHABET_SIZE]);
                    outputs.push(vec![]);
                    depth.push(depth[s as usize] + 1);
                    goto[s as usize][c as usize] = new;
                    new
                } else {
                    next
                };
            }
            outputs[s as usize].push(id);
        }

        // BFS fills failure links and completes the transition table.
        let n = goto.len();
        let mut fail = vec![ROOT; n];
        let mut queue = VecDeque::new();
        for next in goto[0].iter_mut() {
            match *next {
                NONE => *next = ROOT,
                s => queue.push_back(s),
            }
        }
        while let Some(s) = queue.pop_front() {
            let f = fail[s as usize];
            let inherited = outputs[f as usize].clone();
            if !inherited.is_empty() {
                let out = &mut outputs[s as usize];
                out.extend(inherited);
                out.sort_unstable();
                out.dedup();
            }
            let fallback = goto[f as usize];
            for (next, via_fail) in goto[s as usize].iter_mut().zip(fallback) {
                if *next == NONE {
                    *next = via_fail;
                } else {
                    fail[*next as usize] = via_fail;
                    queue.push_back(*next);
                }
            }
        }

        let delta = goto.into_iter().flatten().collect();
        Ok(AcAutomaton {
            delta,
            fail,
            outputs,
            depth,
        })
    }

    pub fn state_count(&self) -> usize {
        self.fail.len()
    }

    #[inline]
    pub fn next_state(&self, state: StateId, code: u8) -> StateId {
        self.delta[state as usize * ALPHABET_SIZE + code as usize]
    }

    pub fn failure(&self, state: StateId) -> StateId {
        self.fail[state as usize]
    }

    pub fn outputs(&self, state: StateId) -> &[u32] {
        &self.outputs[state as usize]
    }

    pub fn depth(&self, state: StateId) -> u32 {
        self.depth[state as usize]
    }

    pub fn root(&self) -> StateId {
        ROOT
    }

    /// Scans residue text.
    pub fn scan(&self, text: &str) -> Result<Vec<MatchEvent>, UnknownResidue> {
        Ok(self.scan_codes(&encode(text)?))
    }

    /// Scans pre-encoded text in a single left-to-right pass.
    pub fn scan_codes(&self, codes: &[u8]) -> Vec<MatchEvent> {
        let mut events = Vec::new();
        self.scan_codes_into(codes, &mut events);
        events
    }

    pub fn scan_codes_into(&self, codes: &[u8], events: &mut Vec<MatchEvent>) {
        let mut s = ROOT;
        for (pos, &c) in codes.iter().enumerate() {
            s = self.next_state(s, c);
            for &id in self.outputs(s) {
                events.push(MatchEvent::new(id, pos));
            }
        }
    }
}

/// Convenience for [`AcAutomaton::build`].
pub fn build_ac(patterns: &PatternSet) -> Result<AcAutomaton, PatternError> {
    AcAutomaton::build(patterns)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Compare every pattern against every window of the text.
    pub(crate) fn brute_force(patterns: &[&str], text: &str) -> Vec<MatchEvent> {
        let t = text.as_bytes();
        let mut out = vec![];
        for end in 0..t.len() {
            for (id, p) in patterns.iter().enumerate() {
                let p = p.as_bytes();
                if p.len() <= end + 1 && &t[end + 1 - p.len()..=end] == p {
                    out.push(MatchEvent::new(id as u32, end));
                }
            }
        }
        out
    }

    #[test]
    fn single_unit_pattern() {
        let ac = build_ac(&PatternSet::new(["A"]).unwrap()).unwrap();
        assert_eq!(ac.state_count(), 2);
        assert_eq!(ac.outputs(1), &[0]);
        assert_eq!(ac.outputs(0), &[] as &[u32]);
    }

    #[test]
    fn two_pattern_trie_failure_links() {
        let ac = build_ac(&PatternSet::new(["AK", "KR"]).unwrap()).unwrap();
        // root, A, AK, K, KR
        assert_eq!(ac.state_count(), 5);
        let a = ac.next_state(0, 0);
        let ak = ac.next_state(a, 8);
        let k = ac.next_state(0, 8);
        assert_eq!(ac.depth(ak), 2);
        assert_eq!(ac.failure(ak), k);
        assert_eq!(ac.failure(a), 0);
        assert_eq!(ac.failure(0), 0);
        // From AK, reading R follows the failure link into KR.
        let kr = ac.next_state(ak, 14);
        assert_eq!(ac.outputs(kr), &[1]);
        assert_eq!(
            ac.scan("AKR").unwrap(),
            vec![MatchEvent::new(0, 1), MatchEvent::new(1, 2)]
        );
        assert_eq!(ac.scan("AKR").unwrap(), brute_force(&["AK", "KR"], "AKR"));
    }

    #[test]
    fn duplicates_share_output() {
        let ac = build_ac(&PatternSet::new(["WK", "WK"]).unwrap()).unwrap();
        assert_eq!(ac.state_count(), 3);
        assert_eq!(ac.outputs(2), &[0, 1]);
    }

    #[test]
    fn trivial_scans() {
        let ac = build_ac(&PatternSet::new(["GGK", "AA"]).unwrap()).unwrap();
        assert!(ac.scan("").unwrap().is_empty());
        assert_eq!(ac.scan("GGK").unwrap(), vec![MatchEvent::new(0, 2)]);
        assert_eq!(
            ac.scan("AAA").unwrap(),
            vec![MatchEvent::new(1, 1), MatchEvent::new(1, 2)]
        );
        assert!(ac.scan("AAB").is_err());
    }

    #[test]
    fn build_errors() {
        assert_eq!(
            PatternSet::new(Vec::<String>::new()),
            Err(PatternError::EmptySet)
        );
        assert_eq!(
            PatternSet::new(["A", ""]),
            Err(PatternError::EmptyPattern(1))
        );
        assert!(matches!(
            PatternSet::new(["AZ"]),
            Err(PatternError::InvalidResidue { id: 0, .. })
        ));
        assert_eq!(
            build_ac(&PatternSet::default()),
            Err(PatternError::EmptySet)
        );
    }

    #[test]
    fn output_is_failure_closed() {
        let ps = PatternSet::new(["ACDK", "CDK", "DK", "K"]).unwrap();
        let ac = build_ac(&ps).unwrap();
        for s in 0..ac.state_count() as u32 {
            let f = ac.failure(s);
            for id in ac.outputs(f) {
                assert!(ac.outputs(s).contains(id));
            }
        }
        assert!(ac.state_count() <= 1 + ps.total_length());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn matches_brute_force(
            pats in prop::collection::vec("[ACDK]{1,5}", 1..8),
            text in "[ACDK]{0,60}",
        ) {
            let ps = PatternSet::new(pats.clone()).unwrap();
            let ac = build_ac(&ps).unwrap();
            let refs: Vec<&str> = pats.iter().map(String::as_str).collect();
            prop_assert_eq!(ac.scan(&text).unwrap(), brute_force(&refs, &text));
            prop_assert!(ac.state_count() <= 1 + ps.total_length());
        }
    }
}
