//! Plain adjacency text format.
//!
//! ```text
//! # comment
//! algorithm winograd e=1 r=1     (optional: generic | direct reuse=P/Q | winograd e=E r=R)
//! vertices 3
//! 0 input 0
//! 1 internal 1
//! 2 output 2            (or "2..3" for a value passed through to step 3)
//! edges
//! 0 1
//! 1 2
//! ```

use std::fmt::Write;

use crate::dag::{Dag, Op, Origin, VertexInfo, VertexKind};
use crate::error::{Error, Result};
use crate::surd::Q;

fn parse_err(line: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        line,
        detail: detail.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(line, format!("bad {what} '{s}'")))
}

fn parse_origin(line: usize, words: &[&str]) -> Result<Origin> {
    let field = |key: &str| -> Result<&str> {
        words
            .iter()
            .find_map(|w| w.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| parse_err(line, format!("missing {key}=")))
    };
    match words.first().copied() {
        Some("generic") => Ok(Origin::Generic),
        Some("direct") => {
            let raw = field("reuse")?;
            let reuse = match raw.split_once('/') {
                Some((n, d)) => {
                    let d: i128 = parse_num(line, d, "reuse denominator")?;
                    if d == 0 {
                        return Err(parse_err(line, "zero reuse denominator"));
                    }
                    Q::new(parse_num(line, n, "reuse numerator")?, d)
                }
                None => Q::from_integer(parse_num(line, raw, "reuse")?),
            };
            Ok(Origin::Direct { reuse })
        }
        Some("winograd") => Ok(Origin::Winograd {
            e: parse_num(line, field("e")?, "e")?,
            r: parse_num(line, field("r")?, "r")?,
        }),
        other => Err(parse_err(line, format!("unknown algorithm {other:?}"))),
    }
}

/// Parse the adjacency text format.
pub fn parse_dag(text: &str) -> Result<Dag> {
    let mut origin = Origin::Generic;
    let mut declared: Option<usize> = None;
    let mut info: Vec<Option<VertexInfo>> = Vec::new();
    let mut edges = Vec::new();
    let mut in_edges = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let words: Vec<&str> = body.split_whitespace().collect();
        match words[0] {
            "algorithm" => origin = parse_origin(line, &words[1..])?,
            "vertices" => {
                let n: usize =
                    parse_num(line, words.get(1).copied().unwrap_or(""), "vertex count")?;
                declared = Some(n);
                info = vec![None; n];
            }
            "edges" => in_edges = true,
            _ if in_edges => {
                if words.len() != 2 {
                    return Err(parse_err(line, "edge lines are 'src dst'"));
                }
                let u: u32 = parse_num(line, words[0], "edge source")?;
                let v: u32 = parse_num(line, words[1], "edge target")?;
                edges.push((u, v));
            }
            _ => {
                let n =
                    declared.ok_or_else(|| parse_err(line, "vertex line before 'vertices N'"))?;
                if words.len() != 3 {
                    return Err(parse_err(line, "vertex lines are 'id kind step[..last]'"));
                }
                let id: usize = parse_num(line, words[0], "vertex id")?;
                if id >= n {
                    return Err(parse_err(line, format!("vertex id {id} out of range")));
                }
                let kind = match words[1] {
                    "input" => VertexKind::Input,
                    "internal" => VertexKind::Internal,
                    "output" => VertexKind::Output,
                    k => return Err(parse_err(line, format!("unknown kind '{k}'"))),
                };
                let (step, last_step) = match words[2].split_once("..") {
                    Some((a, b)) => (
                        parse_num(line, a, "step")?,
                        parse_num(line, b, "last step")?,
                    ),
                    None => {
                        let s: u8 = parse_num(line, words[2], "step")?;
                        (s, s)
                    }
                };
                if info[id].is_some() {
                    return Err(parse_err(line, format!("vertex {id} declared twice")));
                }
                let op = if kind == VertexKind::Input {
                    Op::Input
                } else {
                    Op::Opaque
                };
                info[id] = Some(VertexInfo {
                    kind,
                    op,
                    step,
                    last_step,
                });
            }
        }
    }
    let declared = declared.ok_or_else(|| parse_err(0, "missing 'vertices N' header"))?;
    let info = info
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| parse_err(0, format!("vertex {i} of {declared} not declared")))
        })
        .collect::<Result<Vec<_>>>()?;
    Dag::from_edges(info, &edges, origin)
}

/// Render a DAG in the adjacency text format.
pub fn write_dag(dag: &Dag) -> String {
    let mut out = String::new();
    match dag.origin() {
        Origin::Generic => {}
        Origin::Direct { reuse } => {
            let _ = writeln!(
                out,
                "algorithm direct reuse={}/{}",
                reuse.numer(),
                reuse.denom()
            );
        }
        Origin::Winograd { e, r } => {
            let _ = writeln!(out, "algorithm winograd e={e} r={r}");
        }
    }
    let _ = writeln!(out, "vertices {}", dag.len());
    for v in 0..dag.len() as u32 {
        let i = dag.info(v);
        if i.last_step == i.step {
            let _ = writeln!(out, "{v} {} {}", i.kind.name(), i.step);
        } else {
            let _ = writeln!(out, "{v} {} {}..{}", i.kind.name(), i.step, i.last_step);
        }
    }
    out.push_str("edges\n");
    for (u, v) in dag.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{build_direct_conv_dag, BuildOptions};
    use crate::model::ConvShape;

    #[test]
    fn round_trip_preserves_structure() {
        let s = ConvShape::from_output(2, 1, 1, 2, 2, 1, 1).unwrap();
        let dag = build_direct_conv_dag(&s, &BuildOptions::default()).unwrap();
        let text = write_dag(&dag);
        let back = parse_dag(&text).unwrap();
        assert_eq!(write_dag(&back), text);
        assert_eq!(back.origin(), dag.origin());
        assert_eq!(
            back.edges().collect::<Vec<_>>(),
            dag.edges().collect::<Vec<_>>()
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_dag("vertices 2\n0 input 0\n1 blob 1\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 3,
                detail: "unknown kind 'blob'".into()
            }
        );
        assert!(parse_dag("vertices 2\n0 input 0\n").is_err());
    }

    #[test]
    fn passthrough_range_parses() {
        let dag = parse_dag("vertices 2\n0 input 0\n1 output 1..2\nedges\n0 1\n").unwrap();
        assert_eq!(dag.info(1).last_step, 2);
        assert_eq!(dag.n_steps(), 2);
    }
}
