//! Partitioning of a pattern set into tiles of bounded size.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ac::PatternSet;
use crate::alphabet::CODE_BITS;

#[derive(Debug, Error, PartialEq)]
pub enum TilerError {
    #[error("cannot tile an empty pattern set")]
    EmptySet,
    #[error("tile capacity must be between 1 and 32, got {0}")]
    Capacity(usize),
}

/// Where each pattern lives: `assignments[pattern_id] = (tile_id, slot)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    assignments: Vec<(u32, u32)>,
    tile_count: usize,
}

impl TilePlan {
    pub fn tile_count(&self) -> usize {
        self.tile_count
    }

    pub fn pattern_count(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignment(&self, pattern_id: u32) -> Option<(u32, u32)> {
        self.assignments.get(pattern_id as usize).copied()
    }

    /// Pattern ids per tile, in slot order.
    pub fn tiles(&self) -> Vec<Vec<u32>> {
        let mut tiles: Vec<Vec<(u32, u32)>> = vec![Vec::new(); self.tile_count];
        for (id, &(tile, slot)) in self.assignments.iter().enumerate() {
            tiles[tile as usize].push((slot, id as u32));
        }
        tiles
            .into_iter()
            .map(|mut t| {
                t.sort_unstable();
                t.into_iter().map(|(_, id)| id).collect()
            })
            .collect()
    }

    /// `pattern_id TAB tile_id TAB slot`, one line per pattern in id order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, (tile, slot)) in self.assignments.iter().enumerate() {
            let _ = writeln!(out, "{id}\t{tile}\t{slot}");
        }
        out
    }

    /// Sum over tiles of the longest pattern length times the machine count.
    pub fn cost(&self, patterns: &PatternSet) -> usize {
        self.tiles()
            .iter()
            .map(|ids| {
                ids.iter()
                    .map(|&id| patterns.get(id).map_or(0, str::len))
                    .max()
                    .unwrap_or(0)
                    * CODE_BITS
            })
            .sum()
    }
}

/// A strategy for grouping patterns into tiles.
pub trait TilePacker {
    fn partition(&self, patterns: &PatternSet, capacity: usize) -> Result<TilePlan, TilerError>;
}

/// Sorts patterns by length (longest first, ties by id) and fills tiles in
/// that order. Grouping similar lengths keeps the per-tile maximum length, and
/// with it the machine depth, low.
#[derive(Clone, Copy, Debug, Default)]
pub struct LengthSortedFirstFit;

impl TilePacker for LengthSortedFirstFit {
    fn partition(&self, patterns: &PatternSet, capacity: usize) -> Result<TilePlan, TilerError> {
        if patterns.is_empty() {
            return Err(TilerError::EmptySet);
        }
        if !(1..=crate::bitsplit::TILE_CAPACITY).contains(&capacity) {
            return Err(TilerError::Capacity(capacity));
        }
        let mut order: Vec<(usize, u32)> = patterns.iter().map(|(id, p)| (p.len(), id)).collect();
        order.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut assignments = vec![(0, 0); patterns.len()];
        for (rank, &(_, id)) in order.iter().enumerate() {
            assignments[id as usize] = ((rank / capacity) as u32, (rank % capacity) as u32);
        }
        Ok(TilePlan {
            assignments,
            tile_count: patterns.len().div_ceil(capacity),
        })
    }
}

/// Partitions with the default packer.
pub fn partition(patterns: &PatternSet, capacity: usize) -> Result<TilePlan, TilerError> {
    LengthSortedFirstFit.partition(patterns, capacity)
}
