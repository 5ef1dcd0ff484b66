use super::{CorpusError, ProteinRecord};
use crate::alphabet::is_residue;

const CLUSTER_KEY: &str = "cluster=";
const LINE_WIDTH: usize = 60;

fn parse_header(line: &str, lineno: usize) -> Result<ProteinRecord, CorpusError> {
    let mut tokens = line[1..].split_whitespace();
    let protein_id = tokens.next().ok_or(CorpusError::MalformedHeader {
        line: lineno,
        reason: "empty id",
    })?;
    let mut cluster_id = String::new();
    let mut description = Vec::new();
    for tok in tokens {
        match tok.strip_prefix(CLUSTER_KEY) {
            Some(id) if cluster_id.is_empty() => {
                if id.is_empty() {
                    return Err(CorpusError::MalformedHeader {
                        line: lineno,
                        reason: "empty cluster id",
                    });
                }
                cluster_id = id.to_string();
            }
            _ => description.push(tok),
        }
    }
    Ok(ProteinRecord {
        protein_id: protein_id.to_string(),
        cluster_id,
        description: description.join(" "),
        sequence: String::new(),
    })
}

fn finish(pending: Option<ProteinRecord>, out: &mut Vec<ProteinRecord>) -> Result<(), CorpusError> {
    if let Some(record) = pending {
        if record.sequence.is_empty() {
            return Err(CorpusError::EmptySequence {
                protein_id: record.protein_id,
            });
        }
        out.push(record);
    }
    Ok(())
}

/// Parses FASTA text into protein records.
///
/// Sequence lines are joined with whitespace removed and letters uppercased.
/// Anything outside the 20 standard residues is an error naming the line and
/// column of the offending character.
pub fn parse_fasta(text: &str) -> Result<Vec<ProteinRecord>, CorpusError> {
    let mut out = Vec::new();
    let mut pending: Option<ProteinRecord> = None;

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.starts_with('>') {
            finish(pending.take(), &mut out)?;
            pending = Some(parse_header(line, lineno)?);
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(p) = pending.as_mut() else {
            return Err(CorpusError::OrphanSequence { line: lineno });
        };
        for (col, c) in line.char_indices() {
            if c.is_whitespace() {
                continue;
            }
            let up = c.to_ascii_uppercase();
            if !up.is_ascii() || !is_residue(up as u8) {
                return Err(CorpusError::InvalidResidue {
                    line: lineno,
                    column: col + 1,
                    character: c,
                });
            }
            p.sequence.push(up);
        }
    }
    finish(pending, &mut out)?;

    let mut ids = std::collections::HashSet::new();
    for r in &out {
        if !ids.insert(r.protein_id.as_str()) {
            return Err(CorpusError::DuplicateProtein(r.protein_id.clone()));
        }
    }
    Ok(out)
}

/// Renders records as FASTA, wrapping sequences at 60 columns.
pub fn render_fasta(records: &[ProteinRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push('>');
        out.push_str(&r.protein_id);
        if !r.cluster_id.is_empty() {
            out.push(' ');
            out.push_str(CLUSTER_KEY);
            out.push_str(&r.cluster_id);
        }
        if !r.description.is_empty() {
            out.push(' ');
            out.push_str(&r.description);
        }
        out.push('\n');
        for chunk in r.sequence.as_bytes().chunks(LINE_WIDTH) {
            out.push_str(std::str::from_utf8(chunk).expect("ascii sequence"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_record() {
        let r = parse_fasta(">P1 cluster=C1\nMAR\n").unwrap();
        assert_eq!(r, vec![ProteinRecord::new("P1", "C1", "MAR")]);
    }

    #[test]
    fn joins_lines_and_uppercases() {
        let r = parse_fasta(">P1 cluster=C1\nMA\nRK\n").unwrap();
        assert_eq!(r[0].sequence, "MARK");
        let r = parse_fasta(">P1\n ma r\nk\n").unwrap();
        assert_eq!(r[0].sequence, "MARK");
        assert_eq!(r[0].cluster_id, "");
    }

    #[test]
    fn description_and_cluster_token_anywhere() {
        let r = parse_fasta(">P7 heavy chain cluster=UR90_9 frag\nW\n").unwrap();
        assert_eq!(r[0].cluster_id, "UR90_9");
        assert_eq!(r[0].description, "heavy chain frag");
    }

    #[test]
    fn alphabet_violation_reports_position() {
        let err = parse_fasta(">P1\nMAB\n").unwrap_err();
        assert_eq!(
            err,
            CorpusError::InvalidResidue {
                line: 2,
                column: 3,
                character: 'B'
            }
        );
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            parse_fasta(">\nMA\n"),
            Err(CorpusError::MalformedHeader { line: 1, .. })
        ));
        assert!(matches!(
            parse_fasta(">P1\n>P2\nMA\n"),
            Err(CorpusError::EmptySequence { .. })
        ));
        assert!(matches!(
            parse_fasta(">P1\n"),
            Err(CorpusError::EmptySequence { .. })
        ));
        assert!(matches!(
            parse_fasta("MA\n>P1\nK\n"),
            Err(CorpusError::OrphanSequence { line: 1 })
        ));
        assert!(matches!(
            parse_fasta(">P1\nM\n>P1\nK\n"),
            Err(CorpusError::DuplicateProtein(_))
        ));
        assert_eq!(parse_fasta("").unwrap(), vec![]);
    }

    fn arb_record() -> impl Strategy<Value = ProteinRecord> {
        (
            "[A-Za-z0-9_|.]{1,12}",
            prop::option::of("[A-Z0-9_]{1,8}"),
            prop::collection::vec("[a-z0-9]{1,6}", 0..4),
            "[ACDEFGHIKLMNPQRSTVWY]{1,200}",
        )
            .prop_map(|(id, cluster, words, seq)| ProteinRecord {
                protein_id: id,
                cluster_id: cluster.unwrap_or_default(),
                description: words.join(" "),
                sequence: seq,
            })
    }

    proptest! {
        #[test]
        fn render_then_parse_round_trips(records in prop::collection::vec(arb_record(), 0..6)) {
            let mut seen = std::collections::HashSet::new();
            let records: Vec<_> = records
                .into_iter()
                .filter(|r| seen.insert(r.protein_id.clone()))
                .collect();
            let text = render_fasta(&records);
            prop_assert_eq!(parse_fasta(&text).unwrap(), records);
        }
    }
}
