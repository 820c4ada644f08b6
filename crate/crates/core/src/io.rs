//! Text formats for point clouds, images, block streams, diagrams and
//! metrics.

use std::fmt::Write as _;

use thiserror::Error;

use crate::generators::{GeneratorError, PointCloud, ScalarImage};
use crate::pipeline::{Metrics, PersistenceDiagram};
use crate::stream::{BlockOp, CellSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("file is empty")]
    EmptyFile,
    #[error("line {line}: expected {expected} coordinates, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("line {line}: cannot parse {token:?}")]
    BadNumber { line: usize, token: String },
    #[error("expected a header line \"dims nx ny nz\"")]
    BadHeader,
    #[error("image header promises {expected} values, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    BadStream { line: usize, message: String },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
}

fn number<T: std::str::FromStr>(line: usize, token: &str) -> Result<T, IoError> {
    token.parse().map_err(|_| IoError::BadNumber { line, token: token.to_string() })
}

/// Whitespace-separated rows, one point per line. Blank lines are skipped.
pub fn parse_points(text: &str) -> Result<PointCloud, IoError> {
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (i, row) in text.lines().enumerate() {
        let line = i + 1;
        if row.trim().is_empty() {
            continue;
        }
        let p = row.split_whitespace().map(|t| number(line, t)).collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = points.first() {
            if first.len() != p.len() {
                return Err(IoError::RaggedRow { line, expected: first.len(), found: p.len() });
            }
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(IoError::EmptyFile);
    }
    Ok(PointCloud::new(points)?)
}

/// Header `dims nx ny nz`, then `nx·ny·nz` values with x fastest.
pub fn parse_image(text: &str) -> Result<ScalarImage, IoError> {
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some("dims") {
        return Err(IoError::BadHeader);
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = tokens.next().and_then(|t| t.parse().ok()).filter(|&v| v > 0).ok_or(IoError::BadHeader)?;
    }
    let header_len = text.lines().next().map(|l| l.split_whitespace().count()).unwrap_or(0);
    if header_len != 4 {
        return Err(IoError::BadHeader);
    }
    let values = tokens.map(|t| number(2, t)).collect::<Result<Vec<f64>, _>>()?;
    let expected = dims[0] * dims[1] * dims[2];
    if values.len() != expected {
        return Err(IoError::CountMismatch { expected, found: values.len() });
    }
    Ok(ScalarImage::new((dims[0], dims[1], dims[2]), values)?)
}

/// One block per line: `F` followed by records `id dim k f_1 c_1 … f_k c_k`,
/// or `B` followed by ids. Block scales are not part of the format.
pub fn emit_stream(blocks: &[BlockOp]) -> String {
    let mut out = String::new();
    for b in blocks {
        match b {
            BlockOp::Forward { cells, .. } => {
                out.push('F');
                for c in cells {
                    write!(out, " {} {} {}", c.key, c.dim, c.facets.len()).unwrap();
                    for (f, a) in &c.facets {
                        write!(out, " {f} {a}").unwrap();
                    }
                }
            }
            BlockOp::Backward { keys, .. } => {
                out.push('B');
                for k in keys {
                    write!(out, " {k}").unwrap();
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_stream(text: &str) -> Result<Vec<BlockOp>, IoError> {
    let mut blocks = Vec::new();
    for (i, row) in text.lines().enumerate() {
        let line = i + 1;
        let mut tokens = row.split_whitespace();
        let Some(kind) = tokens.next() else {
            continue;
        };
        let nums = tokens.map(|t| number::<i64>(line, t)).collect::<Result<Vec<i64>, _>>()?;
        let id = |v: i64| {
            u64::try_from(v).map_err(|_| IoError::BadStream { line, message: format!("negative id {v}") })
        };
        match kind {
            "F" => {
                let mut cells = Vec::new();
                let mut pos = 0;
                while pos < nums.len() {
                    if pos + 3 > nums.len() {
                        return Err(IoError::BadStream { line, message: "truncated cell record".into() });
                    }
                    let key = id(nums[pos])?;
                    let dim = usize::try_from(nums[pos + 1])
                        .map_err(|_| IoError::BadStream { line, message: "negative dimension".into() })?;
                    let k = usize::try_from(nums[pos + 2])
                        .map_err(|_| IoError::BadStream { line, message: "negative facet count".into() })?;
                    pos += 3;
                    if pos + 2 * k > nums.len() {
                        return Err(IoError::BadStream { line, message: "truncated facet list".into() });
                    }
                    let facets = (0..k)
                        .map(|j| Ok((id(nums[pos + 2 * j])?, nums[pos + 2 * j + 1])))
                        .collect::<Result<Vec<_>, IoError>>()?;
                    pos += 2 * k;
                    cells.push(CellSpec { key, dim, facets });
                }
                blocks.push(BlockOp::Forward { cells, scale: None });
            }
            "B" => {
                let keys = nums.into_iter().map(id).collect::<Result<Vec<_>, _>>()?;
                blocks.push(BlockOp::Backward { keys, scale: None });
            }
            other => {
                return Err(IoError::BadStream { line, message: format!("unknown block kind {other:?}") });
            }
        }
    }
    Ok(blocks)
}

fn scale_text(s: Option<f64>) -> String {
    s.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// One interval per line, `dim b d`, followed by the two endpoint scales
/// when the stream carries any (`-` marks a block without one).
pub fn format_diagram(d: &PersistenceDiagram) -> String {
    let mut out = String::new();
    for iv in &d.intervals {
        write!(out, "{} {} {}", iv.dim, iv.birth, iv.death).unwrap();
        if iv.scale_birth.is_some() || iv.scale_death.is_some() {
            write!(out, " {} {}", scale_text(iv.scale_birth), scale_text(iv.scale_death)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn format_metrics(m: &Metrics) -> String {
    format!("{m}\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Interval;

    #[test]
    fn points() {
        let pc = parse_points("0 0\n1 0\n").unwrap();
        assert_eq!((pc.len(), pc.dim()), (2, 2));
        assert_eq!(parse_points(""), Err(IoError::EmptyFile));
        assert!(matches!(parse_points("0 0\n1\n"), Err(IoError::RaggedRow { line: 2, .. })));
        assert!(matches!(parse_points("0 x\n"), Err(IoError::BadNumber { .. })));
    }

    #[test]
    fn images() {
        let img = parse_image("dims 2 1 1\n0.0 1.0\n").unwrap();
        assert_eq!(img.values, vec![0.0, 1.0]);
        assert_eq!(parse_image("dims 2 2 1\n0 0 0\n"), Err(IoError::CountMismatch { expected: 4, found: 3 }));
        assert_eq!(parse_image("0 1 2\n"), Err(IoError::BadHeader));
        assert_eq!(parse_image("dims 2 1\n0 1\n"), Err(IoError::BadHeader));
    }

    #[test]
    fn stream_round_trip() {
        let blocks = vec![
            BlockOp::Forward {
                cells: vec![
                    CellSpec { key: 1, dim: 0, facets: vec![] },
                    CellSpec { key: 2, dim: 0, facets: vec![] },
                    CellSpec { key: 3, dim: 1, facets: vec![(1, -1), (2, 1)] },
                ],
                scale: None,
            },
            BlockOp::Forward { cells: vec![], scale: None },
            BlockOp::Backward { keys: vec![3, 1, 2], scale: None },
        ];
        let text = emit_stream(&blocks);
        assert_eq!(text, "F 1 0 0 2 0 0 3 1 2 1 -1 2 1\nF\nB 3 1 2\n");
        assert_eq!(parse_stream(&text).unwrap(), blocks);
        assert!(parse_stream("F 1 0\n").is_err());
        assert!(parse_stream("F 1 1 2 0 1\n").is_err());
        assert!(parse_stream("X 1\n").is_err());
    }

    #[test]
    fn diagram_lines() {
        let d = PersistenceDiagram::from_intervals(vec![
            Interval { dim: 1, birth: 2, death: 3, scale_birth: Some(0.5), scale_death: None },
            Interval { dim: 0, birth: 1, death: 1, scale_birth: None, scale_death: None },
        ]);
        assert_eq!(format_diagram(&d), "0 1 1\n1 2 3 0.5 -\n");
        let m = Metrics { total_ops: 4, critical_ops: 2, x_max: 3, a_max: 1 };
        assert_eq!(format_metrics(&m), "N=4, n=2, Xmax=3, Amax=1\n");
    }
}
