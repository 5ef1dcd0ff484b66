//! The 20-letter amino-acid alphabet and its 5-bit residue code.
//!
//! Codes are assigned alphabetically (`A = 0`, `C = 1`, ..., `Y = 19`), so
//! every residue fits in five bits and codes `20..32` are never produced.

use std::fmt;

/// Residues in code order.
pub const RESIDUES: [u8; 20] = *b"ACDEFGHIKLMNPQRSTVWY";

/// Number of residues in the alphabet.
pub const ALPHABET_SIZE: usize = RESIDUES.len();

/// Bits needed to hold a residue code.
pub const CODE_BITS: usize = 5;

const INVALID: u8 = 0xFF;

const CODE_TABLE: [u8; 256] = {
    let mut table = [INVALID; 256];
    let mut i = 0;
    while i < RESIDUES.len() {
        table[RESIDUES[i] as usize] = i as u8;
        i += 1;
    }
    table
};

/// A 5-bit residue code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResidueCode(u8);

impl ResidueCode {
    /// Looks up the code for an uppercase residue letter.
    #[inline]
    pub fn from_residue(residue: u8) -> Option<ResidueCode> {
        match CODE_TABLE[residue as usize] {
            INVALID => None,
            code => Some(ResidueCode(code)),
        }
    }

    /// Builds a code from its raw value, if it names a residue.
    pub fn from_raw(raw: u8) -> Option<ResidueCode> {
        ((raw as usize) < ALPHABET_SIZE).then_some(ResidueCode(raw))
    }

    #[inline]
    pub fn raw(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn residue(self) -> u8 {
        RESIDUES[self.index()]
    }
}

impl fmt::Display for ResidueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.residue() as char)
    }
}

/// Returns true if `residue` is one of the 20 standard amino acids (uppercase).
#[inline]
pub fn is_residue(residue: u8) -> bool {
    CODE_TABLE[residue as usize] != INVALID
}

/// A residue outside the alphabet, with its byte offset in the input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnknownResidue {
    pub position: usize,
    pub byte: u8,
}

impl fmt::Display for UnknownResidue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown residue {:?} at position {}",
            self.byte as char, self.position
        )
    }
}

impl std::error::Error for UnknownResidue {}

/// Encodes a residue string into raw 5-bit codes.
pub fn encode(sequence: &str) -> Result<Vec<u8>, UnknownResidue> {
    let mut out = Vec::with_capacity(sequence.len());
    encode_into(sequence, &mut out)?;
    Ok(out)
}

/// Appends the codes of `sequence` to `out`. On error `out` may hold a
/// partial prefix.
pub fn encode_into(sequence: &str, out: &mut Vec<u8>) -> Result<(), UnknownResidue> {
    for (position, byte) in sequence.bytes().enumerate() {
        let code = ResidueCode::from_residue(byte).ok_or(UnknownResidue { position, byte })?;
        out.push(code.raw());
    }
    Ok(())
}

/// Inverse of [`encode`]. Panics on codes outside the alphabet.
pub fn decode(codes: &[u8]) -> String {
    codes
        .iter()
        .map(|&c| RESIDUES[c as usize] as char)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_head_and_tail() {
        assert_eq!(encode("A").unwrap(), vec![0]);
        assert_eq!(encode("AC").unwrap(), vec![0, 1]);
        assert_eq!(encode("").unwrap(), Vec::<u8>::new());
        assert_eq!(encode("Y").unwrap(), vec![19]);
        assert_eq!(encode("K").unwrap(), vec![8]);
    }

    #[test]
    fn codes_are_injective_and_fit_five_bits() {
        let mut seen = [false; 32];
        for &r in &RESIDUES {
            let c = ResidueCode::from_residue(r).unwrap().raw();
            assert!(c < 32);
            assert!(!seen[c as usize]);
            seen[c as usize] = true;
        }
    }

    #[test]
    fn rejects_non_standard() {
        for b in b"BJOUXZa*-" {
            assert!(!is_residue(*b));
        }
        let err = encode("MAB").unwrap_err();
        assert_eq!(
            err,
            UnknownResidue {
                position: 2,
                byte: b'B'
            }
        );
    }

    #[test]
    fn decode_inverts_encode() {
        let s = "ACDEFGHIKLMNPQRSTVWY";
        assert_eq!(decode(&encode(s).unwrap()), s);
    }
}
