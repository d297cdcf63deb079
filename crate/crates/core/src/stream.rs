//! Text formats: update streams, priority overrides and set-cover instances.
//!
//! Update stream, one record per line:
//!
//! ```text
//! # comment
//! + <edge_id> <v1> ... <vk>     insert
//! - <edge_id>                   delete
//! ;                             end of batch
//! ```
//!
//! A batch holds only inserts or only deletes. A trailing batch without `;`
//! is accepted. Priority files hold `<edge_id> <priority>` lines.

use std::fmt::Write as _;

use thiserror::Error;

use crate::parprims::PriorityAssignment;
use crate::types::{EdgeId, Hyperedge, UpdateBatch, VertexId};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

fn number(tok: &str, line: usize, what: &str) -> Result<u64, ParseError> {
    tok.parse()
        .or_else(|_| err(line, format!("{what} {tok:?} is not an unsigned 64-bit integer")))
}

/// Splits a text into `(line number, tokens)` records and batch ends
/// (`None`), skipping blanks and comments.
fn records(text: &str) -> impl Iterator<Item = (usize, Option<Vec<&str>>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        match body {
            "" => None,
            ";" => Some((i + 1, None)),
            _ => Some((i + 1, Some(body.split_whitespace().collect()))),
        }
    })
}

pub fn parse_stream(text: &str) -> Result<Vec<UpdateBatch>, ParseError> {
    let mut out = Vec::new();
    let mut current: Option<UpdateBatch> = None;
    for (line, rec) in records(text) {
        let Some(toks) = rec else {
            out.extend(current.take());
            continue;
        };
        match toks[0] {
            "+" => {
                if toks.len() < 3 {
                    return err(line, "insert needs an edge id and at least one vertex");
                }
                let id = EdgeId(number(toks[1], line, "edge id")?);
                let vs = toks[2..]
                    .iter()
                    .map(|t| number(t, line, "vertex").map(VertexId))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut distinct = vs.clone();
                distinct.sort_unstable();
                distinct.dedup();
                if distinct.len() != vs.len() {
                    return err(line, format!("edge {id} lists a vertex twice"));
                }
                let edge = Hyperedge::new(id, vs).expect("at least one vertex");
                match current.get_or_insert_with(|| UpdateBatch::Insert(Vec::new())) {
                    UpdateBatch::Insert(es) => es.push(edge),
                    UpdateBatch::Delete(_) => return err(line, "insert inside a delete batch"),
                }
            }
            "-" => {
                if toks.len() != 2 {
                    return err(line, "delete takes exactly one edge id");
                }
                let id = EdgeId(number(toks[1], line, "edge id")?);
                match current.get_or_insert_with(|| UpdateBatch::Delete(Vec::new())) {
                    UpdateBatch::Delete(ids) => ids.push(id),
                    UpdateBatch::Insert(_) => return err(line, "delete inside an insert batch"),
                }
            }
            other => return err(line, format!("unknown record {other:?}")),
        }
    }
    out.extend(current);
    Ok(out)
}

pub fn serialize_stream(batches: &[UpdateBatch]) -> String {
    let mut s = String::new();
    for b in batches {
        match b {
            UpdateBatch::Insert(es) => {
                for e in es {
                    write!(s, "+ {}", e.id().0).unwrap();
                    for v in e.vertices() {
                        write!(s, " {}", v.0).unwrap();
                    }
                    s.push('\n');
                }
            }
            UpdateBatch::Delete(ids) => {
                for id in ids {
                    writeln!(s, "- {}", id.0).unwrap();
                }
            }
        }
        s.push_str(";\n");
    }
    s
}

pub fn parse_priorities(text: &str) -> Result<PriorityAssignment, ParseError> {
    let mut pairs = Vec::new();
    let mut seen = rustc_hash::FxHashSet::default();
    for (line, rec) in records(text) {
        let Some(toks) = rec else {
            return err(line, "unexpected ';' in a priority file");
        };
        if toks.len() != 2 {
            return err(line, "expected `<edge_id> <priority>`");
        }
        let e = EdgeId(number(toks[0], line, "edge id")?);
        if !seen.insert(e) {
            return err(line, format!("priority for {e} given twice"));
        }
        pairs.push((e, number(toks[1], line, "priority")?));
    }
    Ok(PriorityAssignment::from_pairs(pairs))
}

/// One set-cover record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ElementOp {
    Insert { element: u64, sets: Vec<String> },
    Delete { element: u64 },
}

/// Set-cover stream: `e <elem_id> <set_id> ...` adds an element, `- <elem_id>`
/// removes one, `;` ends a batch. Set ids are free-form tokens.
pub fn parse_set_cover(text: &str) -> Result<Vec<Vec<ElementOp>>, ParseError> {
    let mut out = Vec::new();
    let mut current: Vec<ElementOp> = Vec::new();
    let mut kind: Option<bool> = None;
    for (line, rec) in records(text) {
        let Some(toks) = rec else {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            kind = None;
            continue;
        };
        let (op, is_insert) = match toks[0] {
            "e" => {
                if toks.len() < 3 {
                    return err(line, "element needs an id and at least one set");
                }
                let element = number(toks[1], line, "element id")?;
                let mut sets: Vec<String> = toks[2..].iter().map(|s| s.to_string()).collect();
                sets.sort();
                sets.dedup();
                (ElementOp::Insert { element, sets }, true)
            }
            "-" => {
                if toks.len() != 2 {
                    return err(line, "delete takes exactly one element id");
                }
                (
                    ElementOp::Delete {
                        element: number(toks[1], line, "element id")?,
                    },
                    false,
                )
            }
            other => return err(line, format!("unknown record {other:?}")),
        };
        if *kind.get_or_insert(is_insert) != is_insert {
            return err(line, "a batch mixes element inserts and deletes");
        }
        current.push(op);
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{generate, Pattern, WorkloadParams};

    #[test]
    fn parses_a_small_stream() {
        let text = "# two batches\n+ 1 3 2\n+ 2 4\n;\n- 1\n";
        let b = parse_stream(text).unwrap();
        assert_eq!(
            b,
            vec![
                UpdateBatch::Insert(vec![Hyperedge::from_raw(1, &[2, 3]), Hyperedge::from_raw(2, &[4])]),
                UpdateBatch::Delete(vec![EdgeId(1)]),
            ]
        );
    }

    #[test]
    fn empty_and_comment_only() {
        assert!(parse_stream("").unwrap().is_empty());
        assert!(parse_stream("# nothing\n;\n;\n").unwrap().is_empty());
    }

    #[test]
    fn reports_line_numbers() {
        let e = parse_stream("+ 1 2 3\n- 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(parse_stream("+ 1\n").unwrap_err().line, 1);
        assert_eq!(parse_stream("\n\n+ x 1\n").unwrap_err().line, 3);
        assert_eq!(parse_stream("* 1 2\n").unwrap_err().line, 1);
        assert_eq!(parse_stream("+ 1 2 2\n").unwrap_err().line, 1);
        assert_eq!(parse_stream("- 1 2\n").unwrap_err().line, 1);
    }

    #[test]
    fn generated_streams_round_trip() {
        for p in [Pattern::InsertAllDeleteAll, Pattern::Interleaved, Pattern::Churn] {
            let s = generate(&WorkloadParams::new(40, 120, 3, 9, p, 4)).unwrap();
            let text = serialize_stream(&s);
            let back = parse_stream(&text).unwrap();
            assert_eq!(back, s);
            assert_eq!(serialize_stream(&back), text);
        }
    }

    #[test]
    fn priorities() {
        let p = parse_priorities("# e p\n1 30\n2 10\n").unwrap();
        assert_eq!(p.get(EdgeId(2)), Some(10));
        assert!(parse_priorities("1 2\n1 3\n").is_err());
        assert!(parse_priorities("1\n").is_err());
    }

    #[test]
    fn set_cover_records() {
        let b = parse_set_cover("e 1 A B\ne 2 B\n;\n- 1\n").unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(
            b[0][0],
            ElementOp::Insert {
                element: 1,
                sets: vec!["A".into(), "B".into()]
            }
        );
        assert_eq!(b[1][0], ElementOp::Delete { element: 1 });
        assert!(parse_set_cover("e 1 A\n- 2\n").is_err());
        assert!(parse_set_cover("e 1\n").is_err());
    }
}
