//! Expected values for golden runs, loaded from fixture files.
//!
//! One entry per line, fields separated by `|`:
//!
//! ```text
//! name | hard|soft | expected | source [| note]
//! ```
//!
//! `expected` is one of: an integer with optional alternatives
//! (`169363 or 169362`), `true`/`false`, `>= N`, a comma-separated list of
//! integers or of `card:ind` pairs (each card may carry alternatives), or a
//! sum identity `a + b + c = d`. Blank lines and lines starting with `#`
//! are ignored. See `docs/formats.md`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strength {
    Hard,
    Soft,
}

/// An integer with the alternatives a known misprint allows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alts(pub Vec<i64>);

impl Alts {
    pub fn primary(&self) -> i64 {
        self.0[0]
    }

    pub fn matches(&self, v: i64) -> bool {
        self.0.contains(&v)
    }
}

impl fmt::Display for Alts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(i64::to_string).collect();
        f.write_str(&parts.join(" or "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    Int(Alts),
    Bool(bool),
    AtLeast(i64),
    Ints(Vec<Alts>),
    Pairs(Vec<(Alts, i32)>),
    Sum { terms: Vec<i64>, total: i64 },
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Int(a) => write!(f, "{a}"),
            Expected::Bool(b) => write!(f, "{b}"),
            Expected::AtLeast(n) => write!(f, ">= {n}"),
            Expected::Ints(v) => {
                let parts: Vec<String> = v.iter().map(Alts::to_string).collect();
                f.write_str(&parts.join(", "))
            }
            Expected::Pairs(v) => {
                let parts: Vec<String> = v.iter().map(|(a, i)| format!("{a}:{i}")).collect();
                f.write_str(&parts.join(", "))
            }
            Expected::Sum { terms, total } => {
                let parts: Vec<String> = terms.iter().map(i64::to_string).collect();
                write!(f, "{} = {total}", parts.join(" + "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub name: String,
    pub strength: Strength,
    pub expected: Expected,
    pub source: String,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct FixtureSet {
    pub fixtures: Vec<Fixture>,
}

fn parse_int(s: &str, line: usize) -> Result<i64, FixtureError> {
    s.trim().parse().map_err(|_| FixtureError::Malformed {
        line,
        reason: format!("not an integer: `{}`", s.trim()),
    })
}

fn parse_alts(s: &str, line: usize) -> Result<Alts, FixtureError> {
    s.split(" or ")
        .map(|p| parse_int(p, line))
        .collect::<Result<_, _>>()
        .map(Alts)
}

fn parse_expected(s: &str, line: usize) -> Result<Expected, FixtureError> {
    let s = s.trim();
    match s {
        "true" => return Ok(Expected::Bool(true)),
        "false" => return Ok(Expected::Bool(false)),
        _ => {}
    }
    if let Some(rest) = s.strip_prefix(">=") {
        return Ok(Expected::AtLeast(parse_int(rest, line)?));
    }
    if let Some((lhs, rhs)) = s.split_once('=') {
        let terms = lhs.split('+').map(|t| parse_int(t, line)).collect::<Result<_, _>>()?;
        return Ok(Expected::Sum {
            terms,
            total: parse_int(rhs, line)?,
        });
    }
    if s.contains(':') {
        let pairs = s
            .split(',')
            .map(|item| {
                let (card, ind) = item.rsplit_once(':').ok_or_else(|| FixtureError::Malformed {
                    line,
                    reason: format!("expected card:ind, got `{}`", item.trim()),
                })?;
                Ok((parse_alts(card, line)?, parse_int(ind, line)? as i32))
            })
            .collect::<Result<_, FixtureError>>()?;
        return Ok(Expected::Pairs(pairs));
    }
    if s.contains(',') {
        let items = s.split(',').map(|i| parse_alts(i, line)).collect::<Result<_, _>>()?;
        return Ok(Expected::Ints(items));
    }
    Ok(Expected::Int(parse_alts(s, line)?))
}

impl FixtureSet {
    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        let mut fixtures = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('|').map(str::trim).collect();
            if fields.len() < 4 || fields.len() > 5 {
                return Err(FixtureError::Malformed {
                    line,
                    reason: format!("expected 4 or 5 fields, got {}", fields.len()),
                });
            }
            let strength = match fields[1] {
                "hard" => Strength::Hard,
                "soft" => Strength::Soft,
                other => {
                    return Err(FixtureError::Malformed {
                        line,
                        reason: format!("strength must be hard or soft, got `{other}`"),
                    })
                }
            };
            if fixtures.iter().any(|f: &Fixture| f.name == fields[0]) {
                return Err(FixtureError::Malformed {
                    line,
                    reason: format!("duplicate fixture `{}`", fields[0]),
                });
            }
            fixtures.push(Fixture {
                name: fields[0].to_string(),
                strength,
                expected: parse_expected(fields[2], line)?,
                source: fields[3].to_string(),
                note: fields.get(4).map(|s| s.to_string()),
            });
        }
        Ok(FixtureSet { fixtures })
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        FixtureSet::parse(&text)
    }

    pub fn get(&self, name: &str) -> Option<&Fixture> {
        self.fixtures.iter().find(|f| f.name == name)
    }

    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Fixture> + 'a {
        self.fixtures.iter().filter(move |f| f.name.starts_with(prefix))
    }

    /// Primary value of an integer fixture.
    pub fn int(&self, name: &str) -> Option<i64> {
        match &self.get(name)?.expected {
            Expected::Int(a) => Some(a.primary()),
            _ => None,
        }
    }

    /// `ind -> count` from the `<prefix>.ind.<i>` fixtures.
    pub fn histogram(&self, prefix: &str) -> BTreeMap<i32, Alts> {
        let head = format!("{prefix}.ind.");
        self.with_prefix(&head)
            .filter_map(|f| {
                let ind = f.name[head.len()..].parse().ok()?;
                match &f.expected {
                    Expected::Int(a) => Some((ind, a.clone())),
                    _ => None,
                }
            })
            .collect()
    }

    /// Sum identities that fail within the data itself.
    pub fn broken_identities(&self) -> Vec<&Fixture> {
        self.fixtures
            .iter()
            .filter(|f| matches!(&f.expected, Expected::Sum { terms, total } if terms.iter().sum::<i64>() != *total))
            .collect()
    }
}

/// A computed value to be compared with a fixture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Computed {
    Int(i64),
    Bool(bool),
    Ints(Vec<i64>),
    Pairs(Vec<(i64, i32)>),
}

impl fmt::Display for Computed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Computed::Int(v) => write!(f, "{v}"),
            Computed::Bool(b) => write!(f, "{b}"),
            Computed::Ints(v) => {
                let parts: Vec<String> = v.iter().map(i64::to_string).collect();
                f.write_str(&parts.join(", "))
            }
            Computed::Pairs(v) => {
                let parts: Vec<String> = v.iter().map(|(c, i)| format!("{c}:{i}")).collect();
                f.write_str(&parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// Matches an alternative other than the primary value.
    PassAlternative,
    Fail,
}

fn multiset_match<T, F>(expected: &[T], computed: &[(i64, i32)], fits: F) -> Option<bool>
where
    F: Fn(&T, &(i64, i32)) -> Option<bool>,
{
    if expected.len() != computed.len() {
        return None;
    }
    let mut used = vec![false; computed.len()];
    let mut alternative = false;
    for e in expected {
        let mut hit = None;
        for (j, c) in computed.iter().enumerate() {
            if used[j] {
                continue;
            }
            match fits(e, c) {
                Some(true) => {
                    hit = Some((j, false));
                    break;
                }
                Some(false) if hit.is_none() => hit = Some((j, true)),
                _ => {}
            }
        }
        let (j, alt) = hit?;
        used[j] = true;
        alternative |= alt;
    }
    Some(alternative)
}

/// Compares a computed value with a fixture's expectation.
pub fn judge(expected: &Expected, computed: &Computed) -> Outcome {
    let alt = |a: &Alts, v: i64| {
        if a.primary() == v {
            Some(true)
        } else if a.matches(v) {
            Some(false)
        } else {
            None
        }
    };
    let found = match (expected, computed) {
        (Expected::Int(a), Computed::Int(v)) => alt(a, *v).map(|p| !p),
        (Expected::Bool(b), Computed::Bool(v)) => (b == v).then_some(false),
        (Expected::AtLeast(n), Computed::Int(v)) => (v >= n).then_some(false),
        (Expected::Ints(items), Computed::Ints(vs)) => {
            let as_pairs: Vec<(i64, i32)> = vs.iter().map(|&v| (v, 0)).collect();
            multiset_match(items, &as_pairs, |a, c| alt(a, c.0))
        }
        (Expected::Pairs(items), Computed::Pairs(vs)) => {
            multiset_match(items, vs, |(a, ind), c| if *ind == c.1 { alt(a, c.0) } else { None })
        }
        _ => None,
    };
    match found {
        Some(false) => Outcome::Pass,
        Some(true) => Outcome::PassAlternative,
        None => Outcome::Fail,
    }
}

/// Whether every expected integer occurs among the computed ones.
pub fn includes(expected: &Expected, computed: &[i64]) -> bool {
    match expected {
        Expected::Ints(items) => items.iter().all(|a| computed.iter().any(|&v| a.matches(v))),
        Expected::Int(a) => computed.iter().any(|&v| a.matches(v)),
        _ => false,
    }
}
