//! Tables, fixture verification and run diffs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::components::{query_component, summarize, Partition, Predicate};
use crate::engine::{ind_of_key, RunResult};
use crate::fixtures::{judge, Computed, Expected, FixtureSet, Outcome, Strength};
use crate::graded::GradedGraph;
use crate::rules::Mode;
use crate::store::StateStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Csv,
    Text,
}

impl Format {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "markdown" | "md" => Some(Format::Markdown),
            "csv" => Some(Format::Csv),
            "text" | "txt" => Some(Format::Text),
            _ => None,
        }
    }
}

/// A small table rendered in any of the report formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Markdown => {
                let _ = writeln!(out, "| {} |", self.header.join(" | "));
                let _ = writeln!(out, "|{}", "---|".repeat(self.header.len()));
                for r in &self.rows {
                    let _ = writeln!(out, "| {} |", r.join(" | "));
                }
            }
            Format::Csv => {
                let _ = writeln!(out, "{}", self.header.join(","));
                for r in &self.rows {
                    let _ = writeln!(out, "{}", r.join(","));
                }
            }
            Format::Text => {
                let widths: Vec<usize> = (0..self.header.len())
                    .map(|c| {
                        self.rows
                            .iter()
                            .map(|r| r[c].len())
                            .chain([self.header[c].len()])
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let line = |cells: &[String]| {
                    cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:>w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                };
                let _ = writeln!(out, "{}", line(&self.header));
                for r in &self.rows {
                    let _ = writeln!(out, "{}", line(r));
                }
            }
        }
        out
    }
}

/// Rows `Ind -> count` in increasing Ind, then `Total`.
pub fn ind_histogram_table(histogram: &BTreeMap<i32, u64>) -> Table {
    let mut rows: Vec<Vec<String>> = histogram
        .iter()
        .map(|(ind, n)| vec![ind.to_string(), n.to_string()])
        .collect();
    rows.push(vec!["Total".into(), histogram.values().sum::<u64>().to_string()]);
    Table {
        header: vec!["Ind".into(), "count".into()],
        rows,
    }
}

pub fn component_table(partition: &Partition) -> Table {
    let rows = partition
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            vec![
                i.to_string(),
                c.card.to_string(),
                c.ind.to_string(),
                c.flags.all_real.to_string(),
                c.flags.has_nonreal.to_string(),
                c.flags.lowest_is_saddle.to_string(),
                c.flags.min_real_points.to_string(),
                c.representative.to_string(),
            ]
        })
        .collect();
    Table {
        header: [
            "id",
            "card",
            "ind",
            "all_real",
            "has_nonreal",
            "lowest_is_saddle",
            "min_real_points",
            "representative",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    }
}

/// `(card, ind)` of every component.
pub fn card_pairs(partition: &Partition) -> Vec<(i64, i32)> {
    partition.components.iter().map(|c| (c.card as i64, c.ind)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckLine {
    pub name: String,
    pub strength: Strength,
    pub outcome: Outcome,
    pub expected: String,
    pub computed: String,
    pub source: String,
}

impl CheckLine {
    pub fn failed_hard(&self) -> bool {
        self.outcome == Outcome::Fail && self.strength == Strength::Hard
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub lines: Vec<CheckLine>,
}

impl VerifyReport {
    pub fn hard_failures(&self) -> usize {
        self.lines.iter().filter(|l| l.failed_hard()).count()
    }

    pub fn passed(&self) -> bool {
        self.hard_failures() == 0
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let status = match (l.outcome, l.strength) {
                (Outcome::Pass, _) => "PASS",
                (Outcome::PassAlternative, _) => "PASS(alt)",
                (Outcome::Fail, Strength::Hard) => "FAIL",
                (Outcome::Fail, Strength::Soft) => "FAIL(soft)",
            };
            let _ = writeln!(
                out,
                "{status:<10} {}: expected {}, computed {} [{}]",
                l.name, l.expected, l.computed, l.source
            );
        }
        let _ = writeln!(
            out,
            "{} checks, {} hard failures",
            self.lines.len(),
            self.hard_failures()
        );
        out
    }

    pub fn check(&mut self, fixtures: &FixtureSet, name: &str, computed: Computed) {
        if let Some(f) = fixtures.get(name) {
            self.lines.push(CheckLine {
                name: name.to_string(),
                strength: f.strength,
                outcome: judge(&f.expected, &computed),
                expected: f.expected.to_string(),
                computed: computed.to_string(),
                source: f.source.clone(),
            });
        }
    }
}

/// Fixture-name prefix for a run's domain: `domain` or `domain.m<m>`.
pub fn domain_prefix(run: &RunResult) -> String {
    match run.config.m_bound {
        None => "domain".to_string(),
        Some(m) => format!("domain.m{m}"),
    }
}

/// Checks a closed run (and optionally its partition) against the fixtures
/// that apply to it. A restricted run is one component, checked against
/// `component.<label>`; a main-mode run is checked against the domain and
/// query fixtures.
pub fn verify_against_fixtures(
    run: &RunResult,
    partition: Option<&Partition>,
    fixtures: &FixtureSet,
    label: Option<&str>,
) -> VerifyReport {
    if run.config.mode == Mode::Restricted {
        let mut report = VerifyReport::default();
        if let (Some(label), Some(c)) = (label, summarize(run)) {
            report.check(
                fixtures,
                &format!("component.{label}"),
                Computed::Pairs(vec![(c.card as i64, c.ind)]),
            );
        }
        return report;
    }
    let prefix = domain_prefix(run);
    let mut report = VerifyReport::default();
    report.check(fixtures, &format!("{prefix}.total"), Computed::Int(run.total() as i64));
    for ind in fixtures.histogram(&prefix).keys() {
        let n = run.ind_histogram.get(ind).copied().unwrap_or(0);
        report.check(fixtures, &format!("{prefix}.ind.{ind}"), Computed::Int(n as i64));
    }
    let extra: Vec<i32> = run
        .ind_histogram
        .keys()
        .filter(|i| !fixtures.histogram(&prefix).contains_key(i))
        .copied()
        .collect();
    if !extra.is_empty() && fixtures.get(&format!("{prefix}.total")).is_some() {
        report.lines.push(CheckLine {
            name: format!("{prefix}.ind"),
            strength: Strength::Hard,
            outcome: Outcome::Fail,
            expected: "no other Ind values".into(),
            computed: format!("{extra:?}"),
            source: "histogram fixtures".into(),
        });
    }
    if let Some(p) = partition {
        report.check(
            fixtures,
            &format!("{prefix}.components"),
            Computed::Int(p.components.len() as i64),
        );
        report.check(fixtures, &format!("{prefix}.cards"), Computed::Pairs(card_pairs(p)));
        let name = format!("{prefix}.cards-include");
        if let Some(f) = fixtures.get(&name) {
            let cards: Vec<i64> = p.components.iter().map(|c| c.card as i64).collect();
            let ok = crate::fixtures::includes(&f.expected, &cards);
            report.lines.push(CheckLine {
                name,
                strength: f.strength,
                outcome: if ok { Outcome::Pass } else { Outcome::Fail },
                expected: f.expected.to_string(),
                computed: format!("{} components", cards.len()),
                source: f.source.clone(),
            });
        }
        if run.config.m_bound.is_none() {
            check_queries(&mut report, p, fixtures);
        }
    }
    report
}

/// `query.<card>.<predicate>` fixtures, for components identified by card.
fn check_queries(report: &mut VerifyReport, partition: &Partition, fixtures: &FixtureSet) {
    for f in fixtures.with_prefix("query.") {
        let Some((card, predicate)) = f.name["query.".len()..].split_once('.') else {
            continue;
        };
        let (Ok(card), Some(predicate)) = (card.parse::<u64>(), Predicate::from_name(predicate)) else {
            continue;
        };
        let hits: Vec<_> = partition.components.iter().filter(|c| c.card == card).collect();
        match hits.as_slice() {
            [c] => report.check(fixtures, &f.name, Computed::Bool(query_component(c, predicate))),
            _ => report.lines.push(CheckLine {
                name: f.name.clone(),
                strength: f.strength,
                outcome: Outcome::Fail,
                expected: f.expected.to_string(),
                computed: format!("{} components of card {card}", hits.len()),
                source: f.source.clone(),
            }),
        }
    }
}

/// Checks `graded.m<m>.*` fixtures: `children.<card>` and
/// `children-include.<card>` on the level-`m + 1` component of that card, and
/// `single-child-others`, which holds when every other component of level
/// `m + 1` contains exactly one component of level `m`.
pub fn verify_graded(graph: &GradedGraph, fixtures: &FixtureSet) -> VerifyReport {
    let mut report = VerifyReport::default();
    for level in &graph.levels {
        let Some(child_level) = graph.level(level.m.wrapping_sub(1)) else {
            continue;
        };
        let prefix = format!("graded.m{}.", child_level.m);
        let mut named = Vec::new();
        for f in fixtures.with_prefix(&prefix) {
            let rest = &f.name[prefix.len()..];
            let (what, card) = match rest.rsplit_once('.') {
                Some((what, card)) => (what, card.parse::<u64>().ok()),
                None => (rest, None),
            };
            let Some(card) = card else { continue };
            let parents: Vec<usize> = (0..level.components.len())
                .filter(|&i| level.components[i].card == card)
                .collect();
            let [parent] = parents[..] else {
                report.lines.push(CheckLine {
                    name: f.name.clone(),
                    strength: f.strength,
                    outcome: Outcome::Fail,
                    expected: f.expected.to_string(),
                    computed: format!("{} components of card {card} at m = {}", parents.len(), level.m),
                    source: f.source.clone(),
                });
                continue;
            };
            named.push(parent);
            let children: Vec<i64> = graph
                .children(level.m, parent)
                .iter()
                .map(|&c| child_level.components[c].card as i64)
                .collect();
            match what {
                "children" => report.check(fixtures, &f.name, Computed::Int(children.len() as i64)),
                "children-include" => report.lines.push(CheckLine {
                    name: f.name.clone(),
                    strength: f.strength,
                    outcome: if crate::fixtures::includes(&f.expected, &children) {
                        Outcome::Pass
                    } else {
                        Outcome::Fail
                    },
                    expected: f.expected.to_string(),
                    computed: format!("{children:?}"),
                    source: f.source.clone(),
                }),
                _ => {}
            }
        }
        let name = format!("{prefix}single-child-others");
        if fixtures.get(&name).is_some() {
            let ok = (0..level.components.len())
                .filter(|i| !named.contains(i))
                .all(|i| graph.children(level.m, i).len() == 1);
            report.check(fixtures, &name, Computed::Bool(ok));
        }
    }
    report
}

/// Identity fixtures that do not add up.
pub fn self_check(fixtures: &FixtureSet) -> VerifyReport {
    let mut report = VerifyReport::default();
    for f in &fixtures.fixtures {
        if let Expected::Sum { terms, total } = &f.expected {
            let sum: i64 = terms.iter().sum();
            report.lines.push(CheckLine {
                name: f.name.clone(),
                strength: f.strength,
                outcome: if sum == *total { Outcome::Pass } else { Outcome::Fail },
                expected: total.to_string(),
                computed: sum.to_string(),
                source: f.source.clone(),
            });
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDiff {
    pub only_a: u64,
    pub only_b: u64,
    pub common: u64,
    /// Per Ind: (only in a, only in b).
    pub by_ind: BTreeMap<i32, (u64, u64)>,
    /// Up to a few keys unique to each side, hex-encoded.
    pub examples_a: Vec<String>,
    pub examples_b: Vec<String>,
}

impl RunDiff {
    pub fn is_empty(&self) -> bool {
        self.only_a == 0 && self.only_b == 0
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "common {}, only in a {}, only in b {}\n",
            self.common, self.only_a, self.only_b
        );
        for (ind, (a, b)) in &self.by_ind {
            let _ = writeln!(out, "  Ind {ind}: -{a} +{b}");
        }
        for k in &self.examples_a {
            let _ = writeln!(out, "  a: {k}");
        }
        for k in &self.examples_b {
            let _ = writeln!(out, "  b: {k}");
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DiffError {
    #[error("runs use different key layouts")]
    Layout,
    #[error("runs use different gauges ({0} vs {1})")]
    Gauge(&'static str, &'static str),
}

const EXAMPLES: usize = 5;

/// Set difference of two stores by canonical key.
pub fn diff_stores(a: &StateStore, b: &StateStore) -> Result<RunDiff, DiffError> {
    if a.layout() != b.layout() {
        return Err(DiffError::Layout);
    }
    let layout = a.layout();
    let mut diff = RunDiff {
        only_a: 0,
        only_b: 0,
        common: 0,
        by_ind: BTreeMap::new(),
        examples_a: Vec::new(),
        examples_b: Vec::new(),
    };
    for key in a.iter() {
        if b.find(key).is_some() {
            diff.common += 1;
        } else {
            diff.only_a += 1;
            diff.by_ind.entry(ind_of_key(key, layout)).or_default().0 += 1;
            if diff.examples_a.len() < EXAMPLES {
                diff.examples_a.push(hex::encode(key));
            }
        }
    }
    for key in b.iter() {
        if a.find(key).is_none() {
            diff.only_b += 1;
            diff.by_ind.entry(ind_of_key(key, layout)).or_default().1 += 1;
            if diff.examples_b.len() < EXAMPLES {
                diff.examples_b.push(hex::encode(key));
            }
        }
    }
    Ok(diff)
}

pub fn diff_runs(a: &RunResult, b: &RunResult) -> Result<RunDiff, DiffError> {
    if a.config.gauge != b.config.gauge {
        return Err(DiffError::Gauge(a.config.gauge.name(), b.config.gauge.name()));
    }
    diff_stores(&a.store, &b.store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{enumerate, EnumerateOptions};
    use crate::rules::RuleConfig;
    use crate::state::{PointAttr, Sign, VirtualMorsification};

    fn run(m: u32) -> RunResult {
        let rows = vec![vec![-2, 1, 0], vec![1, -2, 1], vec![0, 1, -2]];
        let points = vec![
            PointAttr::real(1, Sign::Negative),
            PointAttr::real(2, Sign::Positive),
            PointAttr::real(1, Sign::Positive),
        ];
        let seed = VirtualMorsification::from_rows(&rows, points).unwrap();
        enumerate(
            &seed,
            &RuleConfig::main().with_m_bound(Some(m)),
            &EnumerateOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn histogram_table_ends_with_total() {
        let h = BTreeMap::from([(-1, 3u64), (2, 4)]);
        let t = ind_histogram_table(&h);
        assert_eq!(t.render(Format::Csv), "Ind,count\n-1,3\n2,4\nTotal,7\n");
        assert!(t.render(Format::Markdown).starts_with("| Ind | count |\n|---|---|\n"));
        assert_eq!(t.render(Format::Text).lines().nth(3), Some("Total      7"));
    }

    #[test]
    fn diff_counts_one_sided_keys() {
        let (a, b) = (run(1), run(2));
        assert!(diff_runs(&a, &a).unwrap().is_empty());
        let d = diff_runs(&a, &b).unwrap();
        assert_eq!(d.common + d.only_a, a.total());
        assert_eq!(d.common + d.only_b, b.total());
        let by_ind: u64 = d.by_ind.values().map(|(x, y)| x + y).sum();
        assert_eq!(by_ind, d.only_a + d.only_b);
    }

    #[test]
    fn verify_reports_hard_and_soft_failures() {
        let r = run(2);
        let total = r.total();
        let fixtures = FixtureSet::parse(&format!(
            "domain.m2.total | hard | {total} | t\ndomain.m2.ind.5 | soft | 1 | t\nsum.a | hard | 1 + 1 = 3 | t\n"
        ))
        .unwrap();
        let report = verify_against_fixtures(&r, None, &fixtures, None);
        let names: Vec<_> = report.lines.iter().map(|l| (l.name.as_str(), l.outcome)).collect();
        assert_eq!(names[0], ("domain.m2.total", Outcome::Pass));
        assert!(names.contains(&("domain.m2.ind.5", Outcome::Fail)));
        // Ind values outside the fixtures are a hard failure
        assert!(!report.passed());
        assert_eq!(self_check(&fixtures).hard_failures(), 1);
    }
}
