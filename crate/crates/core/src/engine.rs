//! Matching engines behind one interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ac::{AcAutomaton, MatchEvent, PatternError, PatternSet};
use crate::bitsplit::{BitSplitEngine, TileError};
use crate::tiler::{partition, TilePlan, TilerError};
use crate::tolerance::{ClassScanner, DegeneratePattern, ToleranceError};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Tile(#[from] TileError),
    #[error(transparent)]
    Tiler(#[from] TilerError),
    #[error("pattern {id}: {source}")]
    Degenerate {
        id: u32,
        #[source]
        source: ToleranceError,
    },
    #[error("unknown engine {0:?}; expected classic, bitsplit or tolerance")]
    UnknownKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Classic,
    BitSplit,
    Tolerance,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Classic => "classic",
            EngineKind::BitSplit => "bitsplit",
            EngineKind::Tolerance => "tolerance",
        })
    }
}

impl FromStr for EngineKind {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(EngineKind::Classic),
            "bitsplit" => Ok(EngineKind::BitSplit),
            "tolerance" => Ok(EngineKind::Tolerance),
            other => Err(EngineError::UnknownKind(other.to_string())),
        }
    }
}

/// Build options shared by all engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineOptions {
    pub capacity: usize,
    pub bits_per_machine: u8,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            capacity: crate::bitsplit::TILE_CAPACITY,
            bits_per_machine: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Engine {
    Classic {
        automaton: AcAutomaton,
        pattern_count: usize,
    },
    #[serde(rename = "bitsplit")]
    BitSplit {
        tiles: BitSplitEngine,
        plan: TilePlan,
        pattern_count: usize,
    },
    Tolerance {
        scanner: ClassScanner,
    },
}

impl Engine {
    /// Builds an engine over pattern texts (plain peptides, or degenerate
    /// syntax for the tolerance engine). Pattern ids are list positions.
    pub fn build(
        kind: EngineKind,
        patterns: &[String],
        options: EngineOptions,
    ) -> Result<Engine, EngineError> {
        match kind {
            EngineKind::Classic => {
                let set = PatternSet::new(patterns.iter().cloned())?;
                Ok(Engine::Classic {
                    automaton: AcAutomaton::build(&set)?,
                    pattern_count: set.len(),
                })
            }
            EngineKind::BitSplit => {
                let set = PatternSet::new(patterns.iter().cloned())?;
                let plan = partition(&set, options.capacity)?;
                Ok(Engine::BitSplit {
                    tiles: BitSplitEngine::build(&set, &plan, options.bits_per_machine)?,
                    plan,
                    pattern_count: set.len(),
                })
            }
            EngineKind::Tolerance => {
                if patterns.is_empty() {
                    return Err(PatternError::EmptySet.into());
                }
                let parsed = patterns
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        p.parse::<DegeneratePattern>()
                            .map_err(|source| EngineError::Degenerate {
                                id: i as u32,
                                source,
                            })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Engine::Tolerance {
                    scanner: ClassScanner::build(&parsed),
                })
            }
        }
    }

    pub fn kind(&self) -> EngineKind {
        match self {
            Engine::Classic { .. } => EngineKind::Classic,
            Engine::BitSplit { .. } => EngineKind::BitSplit,
            Engine::Tolerance { .. } => EngineKind::Tolerance,
        }
    }

    pub fn pattern_count(&self) -> usize {
        match self {
            Engine::Classic { pattern_count, .. } | Engine::BitSplit { pattern_count, .. } => {
                *pattern_count
            }
            Engine::Tolerance { scanner } => scanner.pattern_count(),
        }
    }

    pub fn tile_plan(&self) -> Option<&TilePlan> {
        match self {
            Engine::BitSplit { plan, .. } => Some(plan),
            _ => None,
        }
    }

    /// Appends events for one text and returns the simulated cycles spent.
    /// Only the bit-split engine models cycles; the others report zero.
    pub fn scan_codes_into(&self, codes: &[u8], events: &mut Vec<MatchEvent>) -> u64 {
        match self {
            Engine::Classic { automaton, .. } => {
                automaton.scan_codes_into(codes, events);
                0
            }
            Engine::BitSplit { tiles, .. } => {
                let first = events.len();
                for t in tiles.tiles() {
                    t.scan_into(codes, events);
                }
                events[first..].sort_unstable();
                codes.len() as u64
            }
            Engine::Tolerance { scanner } => {
                scanner.scan_codes_into(codes, events);
                0
            }
        }
    }

    pub fn scan_codes(&self, codes: &[u8]) -> Vec<MatchEvent> {
        let mut events = Vec::new();
        self.scan_codes_into(codes, &mut events);
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::encode;

    fn pats(p: &[&str]) -> Vec<String> {
        p.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn engines_agree_on_literals() {
        let p = pats(&["AK", "KR", "GGWK", "K"]);
        let text = encode("GGWKRAKK").unwrap();
        let c = Engine::build(EngineKind::Classic, &p, EngineOptions::default()).unwrap();
        let b = Engine::build(
            EngineKind::BitSplit,
            &p,
            EngineOptions {
                capacity: 2,
                bits_per_machine: 1,
            },
        )
        .unwrap();
        let t = Engine::build(EngineKind::Tolerance, &p, EngineOptions::default()).unwrap();
        assert_eq!(b.tile_plan().unwrap().tile_count(), 2);
        let want = c.scan_codes(&text);
        assert_eq!(b.scan_codes(&text), want);
        assert_eq!(t.scan_codes(&text), want);
        assert_eq!(c.pattern_count(), 4);
        assert_eq!(t.pattern_count(), 4);
    }

    #[test]
    fn kinds_round_trip() {
        for k in [
            EngineKind::Classic,
            EngineKind::BitSplit,
            EngineKind::Tolerance,
        ] {
            assert_eq!(k.to_string().parse::<EngineKind>().unwrap(), k);
        }
        assert!("fpga".parse::<EngineKind>().is_err());
    }

    #[test]
    fn build_errors() {
        assert!(Engine::build(EngineKind::Classic, &[], EngineOptions::default()).is_err());
        assert!(Engine::build(EngineKind::Tolerance, &[], EngineOptions::default()).is_err());
        assert!(Engine::build(
            EngineKind::BitSplit,
            &pats(&["(A|M)K"]),
            EngineOptions::default()
        )
        .is_err());
        assert!(matches!(
            Engine::build(
                EngineKind::BitSplit,
                &pats(&["AK"]),
                EngineOptions {
                    capacity: 40,
                    bits_per_machine: 1
                }
            ),
            Err(EngineError::Tiler(TilerError::Capacity(40)))
        ));
    }
}
