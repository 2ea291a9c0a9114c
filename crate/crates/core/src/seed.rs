//! Seed files: TOML with `mu`, a row-major `matrix` and a `points` array of
//! `{ reality, inertia, value_sign }` records in ascending value order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{PointAttr, Reality, Sign, StateError, VirtualMorsification};

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("matrix row {row} has {got} entries, expected {expected}")]
    RowLength { row: usize, got: usize, expected: usize },
    #[error("matrix has {rows} rows but mu = {mu}")]
    RowCount { rows: usize, mu: usize },
    #[error(transparent)]
    Invalid(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedPoint {
    pub reality: Reality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<u8>,
    pub value_sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedFile {
    pub mu: usize,
    pub matrix: Vec<Vec<i32>>,
    pub points: Vec<SeedPoint>,
}

impl SeedFile {
    pub fn from_state(state: &VirtualMorsification) -> Self {
        SeedFile {
            mu: state.mu(),
            matrix: state.rows(),
            points: state
                .points()
                .iter()
                .map(|p| SeedPoint {
                    reality: p.reality,
                    inertia: p.inertia,
                    value_sign: p.sign,
                })
                .collect(),
        }
    }

    pub fn to_state(&self) -> Result<VirtualMorsification, SeedError> {
        if self.matrix.len() != self.mu {
            return Err(SeedError::RowCount {
                rows: self.matrix.len(),
                mu: self.mu,
            });
        }
        for (row, r) in self.matrix.iter().enumerate() {
            if r.len() != self.mu {
                return Err(SeedError::RowLength {
                    row: row + 1,
                    got: r.len(),
                    expected: self.mu,
                });
            }
        }
        let points = self
            .points
            .iter()
            .map(|p| PointAttr {
                reality: p.reality,
                inertia: p.inertia,
                sign: p.value_sign,
            })
            .collect();
        Ok(VirtualMorsification::from_rows(&self.matrix, points)?)
    }

    pub fn to_toml(&self) -> String {
        let mut out = format!("mu = {}\nmatrix = [\n", self.mu);
        for row in &self.matrix {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>2}")).collect();
            out.push_str(&format!("  [{}],\n", cells.join(", ")));
        }
        out.push_str("]\npoints = [\n");
        for p in &self.points {
            let sign = match p.value_sign {
                Sign::Negative => "negative",
                Sign::Positive => "positive",
            };
            match p.inertia {
                Some(q) => out.push_str(&format!(
                    "  {{ reality = \"real\", inertia = {q}, value_sign = \"{sign}\" }},\n"
                )),
                None => out.push_str(&format!("  {{ reality = \"complex\", value_sign = \"{sign}\" }},\n")),
            }
        }
        out.push_str("]\n");
        out
    }
}

pub fn parse_seed(text: &str) -> Result<VirtualMorsification, SeedError> {
    let file: SeedFile = toml::from_str(text).map_err(|e| SeedError::Parse(e.to_string()))?;
    file.to_state()
}

pub fn ingest_seed(path: &Path) -> Result<VirtualMorsification, SeedError> {
    let text = fs::read_to_string(path).map_err(|source| SeedError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_seed(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
mu = 2
matrix = [[-2, 1], [1, -2]]
points = [
  { reality = "real", inertia = 2, value_sign = "negative" },
  { reality = "real", inertia = 1, value_sign = "positive" },
]
"#;

    #[test]
    fn parses_and_round_trips() {
        let s = parse_seed(SMALL).unwrap();
        assert_eq!(s.negative_count(), 1);
        let text = SeedFile::from_state(&s).to_toml();
        assert_eq!(parse_seed(&text).unwrap(), s);
    }

    #[test]
    fn short_row_is_named() {
        let bad = SMALL.replace("[1, -2]", "[1]");
        match parse_seed(&bad) {
            Err(SeedError::RowLength {
                row: 2,
                got: 1,
                expected: 2,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_seed("mu = 2\nmatrix = [[-2, 1]\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }
}
