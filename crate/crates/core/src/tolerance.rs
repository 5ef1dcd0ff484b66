//! Limited-tolerance matching with degenerate residue-class patterns.
//!
//! A degenerate pattern is a sequence of residue classes such as
//! `(A|M)(A|R|D)CRDD(A|D)?`. Each class admits a set of residues; a class
//! marked `?` may also be absent. Patterns are derived column by column from
//! aligned cluster members and are matched by a class-transition automaton,
//! so the number of concrete peptides a pattern stands for never shows up in
//! the automaton size.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ac::MatchEvent;
use crate::alphabet::{encode, ResidueCode, UnknownResidue, ALPHABET_SIZE, RESIDUES};

pub const GAP: u8 = b'-';

#[derive(Debug, Error, PartialEq)]
pub enum ToleranceError {
    #[error("need at least two aligned sequences, got {0}")]
    TooFewSequences(usize),
    #[error("aligned sequence {index} has length {found}, expected {expected}")]
    UnequalLengths {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("aligned sequence {index}: invalid symbol {symbol:?} at column {column}")]
    InvalidSymbol {
        index: usize,
        column: usize,
        symbol: char,
    },
    #[error("pattern has no classes")]
    EmptyPattern,
    #[error("a residue class must allow at least one residue")]
    EmptyClass,
    #[error("expansion count overflows 64 bits")]
    ExpansionOverflow,
    #[error("pattern expands to {count} peptides, above the limit of {limit}")]
    ExpansionLimit { count: u64, limit: u64 },
    #[error("cannot parse degenerate pattern at offset {offset}: {reason}")]
    Syntax { offset: usize, reason: &'static str },
    #[error("segment {start}..{end} is outside the reference of length {len}")]
    SegmentOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
}

/// A set of admissible residues at one position, as a 20-bit mask over codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidueClass {
    allowed: u32,
    pub optional: bool,
}

impl ResidueClass {
    pub fn new(residues: &[u8], optional: bool) -> Result<ResidueClass, ToleranceError> {
        let mut allowed = 0u32;
        for (i, &r) in residues.iter().enumerate() {
            let code = ResidueCode::from_residue(r).ok_or(ToleranceError::Syntax {
                offset: i,
                reason: "not a residue",
            })?;
            allowed |= 1 << code.raw();
        }
        if allowed == 0 {
            return Err(ToleranceError::EmptyClass);
        }
        Ok(ResidueClass { allowed, optional })
    }

    pub fn singleton(residue: u8) -> Result<ResidueClass, ToleranceError> {
        ResidueClass::new(&[residue], false)
    }

    #[inline]
    pub fn admits_code(&self, code: u8) -> bool {
        self.allowed >> code & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.allowed.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.allowed == 0
    }

    /// Allowed residues in alphabet order.
    pub fn residues(&self) -> impl Iterator<Item = u8> + '_ {
        (0..ALPHABET_SIZE)
            .filter(|&c| self.admits_code(c as u8))
            .map(|c| RESIDUES[c])
    }

    /// Number of choices at this position, counting absence for optional classes.
    pub fn choices(&self) -> u64 {
        self.len() as u64 + u64::from(self.optional)
    }
}

impl fmt::Display for ResidueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let residues: Vec<char> = self.residues().map(char::from).collect();
        if residues.len() == 1 {
            write!(f, "{}", residues[0])?;
        } else {
            f.write_str("(")?;
            for (i, r) in residues.iter().enumerate() {
                if i > 0 {
                    f.write_str("|")?;
                }
                write!(f, "{r}")?;
            }
            f.write_str(")")?;
        }
        if self.optional {
            f.write_str("?")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegeneratePattern {
    classes: Vec<ResidueClass>,
    pub source_cluster_id: String,
}

impl DegeneratePattern {
    pub fn new(
        classes: Vec<ResidueClass>,
        source_cluster_id: impl Into<String>,
    ) -> Result<DegeneratePattern, ToleranceError> {
        if classes.is_empty() {
            return Err(ToleranceError::EmptyPattern);
        }
        let p = DegeneratePattern {
            classes,
            source_cluster_id: source_cluster_id.into(),
        };
        p.expansion_count()?;
        Ok(p)
    }

    /// A pattern of singleton classes, i.e. an exact peptide.
    pub fn literal(
        peptide: &str,
        source_cluster_id: impl Into<String>,
    ) -> Result<Self, ToleranceError> {
        let classes = peptide
            .bytes()
            .map(ResidueClass::singleton)
            .collect::<Result<Vec<_>, _>>()?;
        DegeneratePattern::new(classes, source_cluster_id)
    }

    pub fn classes(&self) -> &[ResidueClass] {
        &self.classes
    }

    /// Product of per-class choices (duplicates from optional classes are
    /// counted separately).
    pub fn expansion_count(&self) -> Result<u64, ToleranceError> {
        self.classes.iter().try_fold(1u64, |acc, c| {
            acc.checked_mul(c.choices())
                .ok_or(ToleranceError::ExpansionOverflow)
        })
    }

    pub fn has_polymorphism(&self) -> bool {
        self.classes.iter().any(|c| c.len() >= 2 || c.optional)
    }
}

impl fmt::Display for DegeneratePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.classes {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for DegeneratePattern {
    type Err = ToleranceError;

    /// Parses single residues, parenthesised alternations `(A|M)` and
    /// parenthesised literal runs `(MD)`, each optionally followed by `?`.
    /// `$` marks an alignment boundary and is skipped. Whitespace is ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        let mut classes = Vec::new();
        let mut i = 0;
        let syntax = |offset, reason| ToleranceError::Syntax { offset, reason };
        while i < b.len() {
            let start = i;
            let c = b[i];
            let mut group: Vec<ResidueClass> = match c {
                _ if c.is_ascii_whitespace() || c == b'$' => {
                    i += 1;
                    continue;
                }
                b'(' => {
                    let close = b[i..]
                        .iter()
                        .position(|&x| x == b')')
                        .ok_or(syntax(i, "unclosed group"))?
                        + i;
                    let body: Vec<u8> = b[i + 1..close]
                        .iter()
                        .copied()
                        .filter(|x| !x.is_ascii_whitespace())
                        .collect();
                    i = close + 1;
                    if body == b"$" {
                        if b.get(i) == Some(&b'?') {
                            i += 1;
                        }
                        continue;
                    }
                    if body.is_empty() {
                        return Err(syntax(start, "empty group"));
                    }
                    if body.contains(&b'|') {
                        let mut alts = Vec::new();
                        for alt in body.split(|&x| x == b'|') {
                            match alt {
                                [r] => alts.push(*r),
                                _ => {
                                    return Err(syntax(
                                        start,
                                        "alternatives must be single residues",
                                    ))
                                }
                            }
                        }
                        vec![ResidueClass::new(&alts, false)
                            .map_err(|_| syntax(start, "not a residue"))?]
                    } else {
                        body.iter()
                            .map(|&r| ResidueClass::singleton(r))
                            .collect::<Result<_, _>>()
                            .map_err(|_| syntax(start, "not a residue"))?
                    }
                }
                _ => {
                    i += 1;
                    vec![ResidueClass::singleton(c).map_err(|_| syntax(start, "not a residue"))?]
                }
            };
            if b.get(i) == Some(&b'?') {
                if group.len() != 1 {
                    return Err(syntax(i, "'?' must follow a single class"));
                }
                group[0].optional = true;
                i += 1;
            }
            classes.extend(group);
        }
        DegeneratePattern::new(classes, "")
    }
}

/// Derives one class per alignment column from equal-length gapped strings.
///
/// A column's class holds the distinct residues in it; a column containing a
/// gap becomes optional, and all-gap columns are dropped.
pub fn derive_pattern(aligned: &[&str]) -> Result<DegeneratePattern, ToleranceError> {
    derive_columns(aligned, 0..aligned.first().map_or(0, |s| s.len()))
}

fn validate_alignment(aligned: &[&str]) -> Result<usize, ToleranceError> {
    if aligned.len() < 2 {
        return Err(ToleranceError::TooFewSequences(aligned.len()));
    }
    let width = aligned[0].len();
    for (index, s) in aligned.iter().enumerate() {
        if s.len() != width {
            return Err(ToleranceError::UnequalLengths {
                index,
                expected: width,
                found: s.len(),
            });
        }
        if let Some(column) = s
            .bytes()
            .position(|x| x != GAP && ResidueCode::from_residue(x).is_none())
        {
            return Err(ToleranceError::InvalidSymbol {
                index,
                column,
                symbol: s.as_bytes()[column] as char,
            });
        }
    }
    Ok(width)
}

fn derive_columns(
    aligned: &[&str],
    columns: std::ops::Range<usize>,
) -> Result<DegeneratePattern, ToleranceError> {
    validate_alignment(aligned)?;
    let mut classes = Vec::new();
    for col in columns {
        let mut allowed = 0u32;
        let mut gap = false;
        for s in aligned {
            match s.as_bytes()[col] {
                GAP => gap = true,
                r => allowed |= 1 << ResidueCode::from_residue(r).expect("validated").raw(),
            }
        }
        if allowed != 0 {
            classes.push(ResidueClass {
                allowed,
                optional: gap,
            });
        }
    }
    DegeneratePattern::new(classes, "")
}

/// Derives degenerate patterns for segments of the sequence at
/// `reference_index`, given as `[start, end)` offsets into its ungapped form.
/// Alignment columns inserted inside a segment are included as optional
/// classes.
pub fn derive_segments(
    aligned: &[&str],
    reference_index: usize,
    segments: &[(usize, usize)],
    source_cluster_id: &str,
) -> Result<Vec<DegeneratePattern>, ToleranceError> {
    validate_alignment(aligned)?;
    let reference = aligned
        .get(reference_index)
        .ok_or(ToleranceError::TooFewSequences(aligned.len()))?
        .as_bytes();
    let residue_columns: Vec<usize> = reference
        .iter()
        .enumerate()
        .filter(|(_, &r)| r != GAP)
        .map(|(i, _)| i)
        .collect();
    segments
        .iter()
        .map(|&(start, end)| {
            if start >= end || end > residue_columns.len() {
                return Err(ToleranceError::SegmentOutOfRange {
                    start,
                    end,
                    len: residue_columns.len(),
                });
            }
            let mut p = derive_columns(
                aligned,
                residue_columns[start]..residue_columns[end - 1] + 1,
            )?;
            p.source_cluster_id = source_cluster_id.to_string();
            Ok(p)
        })
        .collect()
}

/// Every concrete peptide the pattern stands for, sorted and deduplicated.
/// The empty string is never produced.
pub fn expand(pattern: &DegeneratePattern, limit: u64) -> Result<Vec<String>, ToleranceError> {
    let count = pattern.expansion_count()?;
    if count > limit {
        return Err(ToleranceError::ExpansionLimit { count, limit });
    }
    let mut partial: Vec<Vec<u8>> = vec![Vec::new()];
    for class in pattern.classes() {
        let mut next = Vec::with_capacity(partial.len() * class.choices() as usize);
        for prefix in &partial {
            if class.optional {
                next.push(prefix.clone());
            }
            for r in class.residues() {
                let mut p = prefix.clone();
                p.push(r);
                next.push(p);
            }
        }
        partial = next;
    }
    let set: BTreeSet<String> = partial
        .into_iter()
        .filter(|p| !p.is_empty())
        .map(|p| String::from_utf8(p).expect("ascii residues"))
        .collect();
    Ok(set.into_iter().collect())
}

/// Deterministic automaton over residue classes, built by subset construction
/// on the class-position NFA of all patterns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassScanner {
    /// Row-major `[state][code]`.
    delta: Vec<u32>,
    /// Pattern ids completed on entering each state, ascending.
    outputs: Vec<Vec<u32>>,
    pattern_count: usize,
}

struct Nfa<'a> {
    patterns: &'a [DegeneratePattern],
    /// Global index of position 0 of each pattern.
    offsets: Vec<u32>,
    owner: Vec<(u32, u32)>,
}

impl<'a> Nfa<'a> {
    fn new(patterns: &'a [DegeneratePattern]) -> Self {
        let mut offsets = Vec::with_capacity(patterns.len());
        let mut owner = Vec::new();
        for (p, pat) in patterns.iter().enumerate() {
            offsets.push(owner.len() as u32);
            for k in 0..=pat.classes().len() {
                owner.push((p as u32, k as u32));
            }
        }
        Nfa {
            patterns,
            offsets,
            owner,
        }
    }

    fn closure(&self, seeds: impl IntoIterator<Item = u32>) -> Vec<u32> {
        let mut set = BTreeSet::new();
        let mut stack: Vec<u32> = seeds.into_iter().collect();
        while let Some(s) = stack.pop() {
            if !set.insert(s) {
                continue;
            }
            let (p, k) = self.owner[s as usize];
            let classes = self.patterns[p as usize].classes();
            if let Some(c) = classes.get(k as usize) {
                if c.optional {
                    stack.push(s + 1);
                }
            }
        }
        set.into_iter().collect()
    }

    fn is_final(&self, s: u32) -> Option<u32> {
        let (p, k) = self.owner[s as usize];
        (k as usize == self.patterns[p as usize].classes().len()).then_some(p)
    }
}

impl ClassScanner {
    pub fn build(patterns: &[DegeneratePattern]) -> ClassScanner {
        let nfa = Nfa::new(patterns);
        let start = nfa.closure(nfa.offsets.iter().copied());

        let mut ids: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut sets: Vec<Vec<u32>> = Vec::new();
        let mut queue = VecDeque::new();
        ids.insert(Vec::new(), 0);
        sets.push(Vec::new());
        queue.push_back(0u32);
        let mut delta: Vec<u32> = Vec::new();

        while let Some(id) = queue.pop_front() {
            let current = sets[id as usize].clone();
            let mut row = [0u32; ALPHABET_SIZE];
            for (code, slot) in row.iter_mut().enumerate() {
                let mut seeds = Vec::new();
                for &s in current.iter().chain(start.iter()) {
                    let (p, k) = nfa.owner[s as usize];
                    if let Some(c) = patterns[p as usize].classes().get(k as usize) {
                        if c.admits_code(code as u8) {
                            seeds.push(s + 1);
                        }
                    }
                }
                let next = nfa.closure(seeds);
                *slot = match ids.get(&next) {
                    Some(&t) => t,
                    None => {
                        let t = sets.len() as u32;
                        ids.insert(next.clone(), t);
                        sets.push(next);
                        queue.push_back(t);
                        t
                    }
                };
            }
            let at = id as usize * ALPHABET_SIZE;
            if delta.len() < at + ALPHABET_SIZE {
                delta.resize(at + ALPHABET_SIZE, 0);
            }
            delta[at..at + ALPHABET_SIZE].copy_from_slice(&row);
        }
        delta.resize(sets.len() * ALPHABET_SIZE, 0);

        let outputs = sets
            .iter()
            .map(|set| {
                let mut out: Vec<u32> = set.iter().filter_map(|&s| nfa.is_final(s)).collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();

        ClassScanner {
            delta,
            outputs,
            pattern_count: patterns.len(),
        }
    }

    pub fn state_count(&self) -> usize {
        self.outputs.len()
    }

    pub fn pattern_count(&self) -> usize {
        self.pattern_count
    }

    pub fn scan(&self, text: &str) -> Result<Vec<MatchEvent>, UnknownResidue> {
        Ok(self.scan_codes(&encode(text)?))
    }

    pub fn scan_codes(&self, codes: &[u8]) -> Vec<MatchEvent> {
        let mut events = Vec::new();
        self.scan_codes_into(codes, &mut events);
        events
    }

    pub fn scan_codes_into(&self, codes: &[u8], events: &mut Vec<MatchEvent>) {
        let mut s = 0u32;
        for (pos, &c) in codes.iter().enumerate() {
            s = self.delta[s as usize * ALPHABET_SIZE + c as usize];
            for &p in &self.outputs[s as usize] {
                events.push(MatchEvent::new(p, pos));
            }
        }
    }
}

pub fn build_class_scanner(patterns: &[DegeneratePattern]) -> ClassScanner {
    ClassScanner::build(patterns)
}
