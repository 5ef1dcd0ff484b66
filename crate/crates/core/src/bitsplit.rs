//! Bit-split Aho-Corasick tiles.
//!
//! A tile holds up to 32 patterns. Each residue is a 5-bit code; the tile
//! splits the code into bit groups (one bit per machine by default) and builds
//! one small Aho-Corasick DFA per group over the projected pattern strings.
//! Every machine state carries a 32-bit partial-match vector (PMV): bit `j`
//! is set when the projection of the pattern in slot `j` is a suffix of the
//! projected input read so far. All machines advance in lockstep on each
//! residue and pattern `j` matches exactly when bit `j` survives the AND of
//! all the machines' PMVs.
//!
//! Scanning is modelled as one residue per cycle per tile, with all tiles
//! running in parallel.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ac::{MatchEvent, PatternSet};
use crate::alphabet::{encode, UnknownResidue, CODE_BITS};
use crate::tiler::TilePlan;

/// Patterns per tile, bounded by the PMV width.
pub const TILE_CAPACITY: usize = 32;

/// Version written at the head of [`Tile::dump_image`].
pub const TILE_IMAGE_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum TileError {
    #[error("a tile needs at least one pattern")]
    NoPatterns,
    #[error("{0} patterns exceed the tile capacity of 32")]
    OverCapacity(usize),
    #[error("pattern {0} is empty")]
    EmptyPattern(u32),
    #[error("pattern {id}: {source}")]
    InvalidResidue {
        id: u32,
        #[source]
        source: UnknownResidue,
    },
    #[error("bits per machine must be 1 or 2, got {0}")]
    BitsPerMachine(u8),
    #[error("tile plan does not match the pattern set ({plan} vs {patterns} patterns)")]
    PlanMismatch { plan: usize, patterns: usize },
}

/// One binary (or 2-bit) Aho-Corasick DFA over a bit group of the residue code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMachine {
    bit_lo: u8,
    bit_width: u8,
    /// Row-major `[state][symbol]`, `1 << bit_width` symbols per state.
    delta: Vec<u32>,
    pmv: Vec<u32>,
}

impl BitMachine {
    fn build(bit_lo: u8, bit_width: u8, patterns: &[Vec<u8>]) -> BitMachine {
        let radix = 1usize << bit_width;
        let mask = (radix - 1) as u8;
        const NONE: u32 = u32::MAX;

        let mut delta: Vec<u32> = vec![NONE; radix];
        let mut pmv = vec![0u32];
        for (slot, codes) in patterns.iter().enumerate() {
            let mut s = 0usize;
            for &c in codes {
                let sym = ((c >> bit_lo) & mask) as usize;
                let next = delta[s * radix + sym];
                s = if next == NONE {
                    let new = pmv.len();
                    delta.extend(std::iter::repeat_n(NONE, radix));
                    pmv.push(0);
                    delta[s * radix + sym] = new as u32;
                    new
                } else {
                    next as usize
                };
            }
            pmv[s] |= 1 << slot;
        }

        let mut fail = vec![0u32; pmv.len()];
        let mut queue = VecDeque::new();
        for next in &mut delta[..radix] {
            match *next {
                NONE => *next = 0,
                s => queue.push_back(s),
            }
        }
        while let Some(s) = queue.pop_front() {
            let s = s as usize;
            let f = fail[s] as usize;
            pmv[s] |= pmv[f];
            for sym in 0..radix {
                let t = delta[s * radix + sym];
                let via_fail = delta[f * radix + sym];
                if t == NONE {
                    delta[s * radix + sym] = via_fail;
                } else {
                    fail[t as usize] = via_fail;
                    queue.push_back(t);
                }
            }
        }

        BitMachine {
            bit_lo,
            bit_width,
            delta,
            pmv,
        }
    }

    pub fn state_count(&self) -> usize {
        self.pmv.len()
    }

    pub fn radix(&self) -> usize {
        1 << self.bit_width
    }

    pub fn bit_lo(&self) -> u8 {
        self.bit_lo
    }

    pub fn bit_width(&self) -> u8 {
        self.bit_width
    }

    #[inline]
    pub fn symbol(&self, code: u8) -> usize {
        ((code >> self.bit_lo) & ((1u8 << self.bit_width) - 1)) as usize
    }

    #[inline]
    pub fn next_state(&self, state: u32, code: u8) -> u32 {
        self.delta[state as usize * self.radix() + self.symbol(code)]
    }

    #[inline]
    pub fn pmv(&self, state: u32) -> u32 {
        self.pmv[state as usize]
    }
}

/// Storage accounting for one tile.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub states_per_machine: Vec<usize>,
    /// PMV storage: every state holds a full 32-bit vector.
    pub total_pmv_bits: usize,
    /// PMV bits that are actually set.
    pub occupied_pmv_bits: usize,
    pub total_transition_entries: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    tile_id: u32,
    /// Global pattern id for each local slot.
    pattern_ids: Vec<u32>,
    pattern_lengths: Vec<usize>,
    bits_per_machine: u8,
    machines: Vec<BitMachine>,
}

/// Result of scanning one text with one tile.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TileScan {
    pub events: Vec<MatchEvent>,
    pub cycles: u64,
}

impl Tile {
    /// Builds a tile from `(global id, pattern)` pairs; slot `j` is the
    /// `j`-th pair.
    pub fn build<'a, I>(tile_id: u32, patterns: I, bits_per_machine: u8) -> Result<Tile, TileError>
    where
        I: IntoIterator<Item = (u32, &'a str)>,
    {
        if !(1..=2).contains(&bits_per_machine) {
            return Err(TileError::BitsPerMachine(bits_per_machine));
        }
        let mut pattern_ids = Vec::new();
        let mut encoded = Vec::new();
        for (id, p) in patterns {
            if p.is_empty() {
                return Err(TileError::EmptyPattern(id));
            }
            encoded.push(encode(p).map_err(|source| TileError::InvalidResidue { id, source })?);
            pattern_ids.push(id);
        }
        match encoded.len() {
            0 => return Err(TileError::NoPatterns),
            n if n > TILE_CAPACITY => return Err(TileError::OverCapacity(n)),
            _ => {}
        }

        let mut machines = Vec::new();
        let mut lo = 0u8;
        while (lo as usize) < CODE_BITS {
            let width = bits_per_machine.min(CODE_BITS as u8 - lo);
            machines.push(BitMachine::build(lo, width, &encoded));
            lo += width;
        }

        Ok(Tile {
            tile_id,
            pattern_lengths: encoded.iter().map(Vec::len).collect(),
            pattern_ids,
            bits_per_machine,
            machines,
        })
    }

    pub fn tile_id(&self) -> u32 {
        self.tile_id
    }

    pub fn pattern_ids(&self) -> &[u32] {
        &self.pattern_ids
    }

    pub fn machines(&self) -> &[BitMachine] {
        &self.machines
    }

    pub fn bits_per_machine(&self) -> u8 {
        self.bits_per_machine
    }

    pub fn max_pattern_len(&self) -> usize {
        self.pattern_lengths.iter().copied().max().unwrap_or(0)
    }

    /// Runs the lockstep machines over `codes`, one residue per cycle.
    pub fn scan(&self, codes: &[u8]) -> TileScan {
        let mut events = Vec::new();
        self.scan_into(codes, &mut events);
        TileScan {
            events,
            cycles: codes.len() as u64,
        }
    }

    /// Appends this tile's events to `events` in (end_pos, pattern_id) order.
    pub fn scan_into(&self, codes: &[u8], events: &mut Vec<MatchEvent>) {
        let mut states = vec![0u32; self.machines.len()];
        for (pos, &c) in codes.iter().enumerate() {
            let mut hits = u32::MAX;
            for (m, s) in self.machines.iter().zip(states.iter_mut()) {
                *s = m.next_state(*s, c);
                hits &= m.pmv(*s);
            }
            if hits == 0 {
                continue;
            }
            let first = events.len();
            while hits != 0 {
                let slot = hits.trailing_zeros();
                hits &= hits - 1;
                events.push(MatchEvent::new(self.pattern_ids[slot as usize], pos));
            }
            events[first..].sort_unstable();
        }
    }

    pub fn footprint(&self) -> Footprint {
        let states_per_machine: Vec<usize> =
            self.machines.iter().map(BitMachine::state_count).collect();
        let total_states: usize = states_per_machine.iter().sum();
        Footprint {
            total_pmv_bits: total_states * TILE_CAPACITY,
            occupied_pmv_bits: self
                .machines
                .iter()
                .flat_map(|m| m.pmv.iter())
                .map(|v| v.count_ones() as usize)
                .sum(),
            total_transition_entries: self
                .machines
                .iter()
                .map(|m| m.state_count() * m.radix())
                .sum(),
            states_per_machine,
        }
    }

    /// Text image of the tile tables.
    ///
    /// ```text
    /// bitsplit-tile-image v1
    /// tile <id> bits_per_machine <k> machines <m> patterns <n>
    /// slots <global id of slot 0> <slot 1> ...
    /// machine <i> bit_lo <b> width <w> states <s>
    /// <state> <next for symbol 0> ... <next for symbol 2^w-1> <pmv as 8 hex digits>
    /// ...
    /// end
    /// ```
    pub fn dump_image(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "bitsplit-tile-image v{TILE_IMAGE_VERSION}");
        let _ = writeln!(
            out,
            "tile {} bits_per_machine {} machines {} patterns {}",
            self.tile_id,
            self.bits_per_machine,
            self.machines.len(),
            self.pattern_ids.len()
        );
        out.push_str("slots");
        for id in &self.pattern_ids {
            let _ = write!(out, " {id}");
        }
        out.push('\n');
        for (i, m) in self.machines.iter().enumerate() {
            let _ = writeln!(
                out,
                "machine {i} bit_lo {} width {} states {}",
                m.bit_lo,
                m.bit_width,
                m.state_count()
            );
            for s in 0..m.state_count() {
                let _ = write!(out, "{s}");
                for next in &m.delta[s * m.radix()..(s + 1) * m.radix()] {
                    let _ = write!(out, " {next}");
                }
                let _ = writeln!(out, " {:08x}", m.pmv[s]);
            }
        }
        out.push_str("end\n");
        out
    }
}

/// Convenience for building a standalone tile from plain patterns; slot `j`
/// gets global id `j`.
pub fn build_tile(patterns: &[&str]) -> Result<Tile, TileError> {
    Tile::build(
        0,
        patterns.iter().enumerate().map(|(i, p)| (i as u32, *p)),
        1,
    )
}

/// Scans encoded text with one tile.
pub fn tile_scan(tile: &Tile, codes: &[u8]) -> TileScan {
    tile.scan(codes)
}

/// All tiles for a pattern set, laid out by a [`TilePlan`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitSplitEngine {
    tiles: Vec<Tile>,
}

impl BitSplitEngine {
    pub fn build(
        patterns: &PatternSet,
        plan: &TilePlan,
        bits_per_machine: u8,
    ) -> Result<BitSplitEngine, TileError> {
        if plan.pattern_count() != patterns.len() {
            return Err(TileError::PlanMismatch {
                plan: plan.pattern_count(),
                patterns: patterns.len(),
            });
        }
        let tiles = plan
            .tiles()
            .into_iter()
            .enumerate()
            .map(|(tile_id, ids)| {
                Tile::build(
                    tile_id as u32,
                    ids.into_iter()
                        .map(|id| (id, patterns.get(id).expect("plan ids are in range"))),
                    bits_per_machine,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BitSplitEngine { tiles })
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    /// Scans with every tile. Tiles run in parallel, so the simulated cycle
    /// count is the text length, not the sum over tiles.
    pub fn scan_codes(&self, codes: &[u8]) -> TileScan {
        let mut events = Vec::new();
        for t in &self.tiles {
            t.scan_into(codes, &mut events);
        }
        events.sort_unstable();
        TileScan {
            events,
            cycles: codes.len() as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ac::{build_ac, tests::brute_force};
    use proptest::prelude::*;

    /// Hand trace for the single pattern "K" (code 8 = 0b01000): every
    /// one-bit machine is the two-state DFA for the one-symbol string equal
    /// to that bit.
    #[test]
    fn single_k_pattern_trace() {
        let t = build_tile(&["K"]).unwrap();
        assert_eq!(t.machines().len(), 5);
        for (b, m) in t.machines().iter().enumerate() {
            assert_eq!(m.state_count(), 2);
            let bit = ((8u8 >> b) & 1) as usize;
            assert_eq!(m.delta[bit], 1);
            assert_eq!(m.delta[1 - bit], 0);
            assert_eq!(m.delta[2 + bit], 1);
            assert_eq!(m.delta[2 + 1 - bit], 0);
            assert_eq!(m.pmv, vec![0, 1]);
        }
        for code in 0..20u8 {
            let got = t.scan(&[code]);
            assert_eq!(!got.events.is_empty(), code == 8);
        }
    }

    #[test]
    fn capacity_and_errors() {
        let p33: Vec<&str> = vec!["AK"; 33];
        assert_eq!(build_tile(&p33), Err(TileError::OverCapacity(33)));
        assert!(build_tile(&vec!["AK"; 32]).is_ok());
        assert_eq!(build_tile(&[]), Err(TileError::NoPatterns));
        assert_eq!(build_tile(&["A", ""]), Err(TileError::EmptyPattern(1)));
        assert!(matches!(
            build_tile(&["AB"]),
            Err(TileError::InvalidResidue { id: 0, .. })
        ));
        assert_eq!(
            Tile::build(0, [(0, "A")], 3),
            Err(TileError::BitsPerMachine(3))
        );
    }

    #[test]
    fn cycle_model() {
        let t = build_tile(&["GG"]).unwrap();
        assert_eq!(t.scan(&[]), TileScan::default());
        let text = vec![5u8; 100];
        let r = t.scan(&text);
        assert_eq!(r.cycles, 100);
        assert_eq!(r.events.len(), 99);
    }

    #[test]
    fn identical_patterns_share_states() {
        let one = build_tile(&["MKWVTF"]).unwrap().footprint();
        let two = build_tile(&["MKWVTF", "MKWVTF"]).unwrap().footprint();
        assert_eq!(one.states_per_machine, two.states_per_machine);
        assert_eq!(one.total_transition_entries, two.total_transition_entries);
        assert_eq!(two.occupied_pmv_bits, 2 * one.occupied_pmv_bits);
    }

    #[test]
    fn footprint_counts() {
        let f = build_tile(&["K"]).unwrap().footprint();
        assert_eq!(f.states_per_machine, vec![2; 5]);
        assert_eq!(f.total_pmv_bits, 10 * 32);
        assert_eq!(f.total_transition_entries, 20);
        assert_eq!(f.occupied_pmv_bits, 5);
    }

    #[test]
    fn two_bit_machines_group_bits() {
        let t = Tile::build(0, [(0, "K"), (1, "WY")], 2).unwrap();
        let widths: Vec<_> = t
            .machines()
            .iter()
            .map(|m| (m.bit_lo(), m.bit_width()))
            .collect();
        assert_eq!(widths, vec![(0, 2), (2, 2), (4, 1)]);
        let codes = encode("KWYK").unwrap();
        assert_eq!(
            t.scan(&codes).events,
            vec![
                MatchEvent::new(0, 0),
                MatchEvent::new(1, 2),
                MatchEvent::new(0, 3)
            ]
        );
    }

    fn residue_string(max: usize) -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop::sample::select(crate::alphabet::RESIDUES.to_vec()),
            1..=max,
        )
        .prop_map(|v| String::from_utf8(v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn tile_equals_classic(
            pats in prop::collection::vec(residue_string(6), 1..=32),
            text in prop::collection::vec(0u8..20, 0..500),
            bits in 1u8..=2,
        ) {
            let refs: Vec<&str> = pats.iter().map(String::as_str).collect();
            let tile = Tile::build(0, refs.iter().enumerate().map(|(i, p)| (i as u32, *p)), bits).unwrap();
            let ac = build_ac(&PatternSet::new(refs.clone()).unwrap()).unwrap();
            let got = tile.scan(&text);
            prop_assert_eq!(&got.events, &ac.scan_codes(&text));
            prop_assert_eq!(got.cycles, text.len() as u64);
            let decoded = crate::alphabet::decode(&text);
            prop_assert_eq!(&got.events, &brute_force(&refs, &decoded));
            for m in tile.machines() {
                prop_assert!(m.state_count() <= ac.state_count());
            }
        }

        #[test]
        fn low_entropy_texts(
            pats in prop::collection::vec("[ACDK]{1,8}", 1..=32),
            text in "[ACDK]{0,400}",
        ) {
            let refs: Vec<&str> = pats.iter().map(String::as_str).collect();
            let tile = build_tile(&refs).unwrap();
            let ac = build_ac(&PatternSet::new(refs.clone()).unwrap()).unwrap();
            let codes = encode(&text).unwrap();
            prop_assert_eq!(tile.scan(&codes).events, ac.scan_codes(&codes));
        }
    }
}
