//! Acceptance run: one line per criterion, then the checks behind it.
//!
//! Invariants (P1-P6) must hold. A golden criterion (G1-G7) passes, or it
//! fails with exactly the pinned deviations in `KNOWN_DEVIATIONS`; anything
//! else makes the run fail.

mod common;

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use morsify_core::engine::CheckpointPolicy;
use morsify_core::fixtures::{Computed, Expected, Outcome, Strength};
use morsify_core::graded::link_levels;
use morsify_core::reports::{self_check, verify_against_fixtures, verify_graded, CheckLine, VerifyReport};
use morsify_core::{
    component_of, components, enumerate, resume, standard_scale, BirthRule, Budget, EnumerateOptions, FixtureSet,
    RealSwapRule, RuleConfig,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const RANDOM_STATES: usize = 10_000;
const ORBIT_STATES: usize = 100;
const ORBIT_SIZE: usize = 1 << 10;
const TRUNCATED: u64 = 10_000;
const RNG_SEED: u64 = 0x5eed_0001;

/// Failing checks (name, computed value) that a golden criterion is known
/// to show; see the calibration report in the README.
const KNOWN_DEVIATIONS: &[(&str, &[(&str, &str)])] = &[
    (
        "G5",
        &[
            ("domain.m2.components", "14"),
            ("domain.m2.cards-include", "14 components"),
            ("domain.m3.total", "1529297"),
        ],
    ),
    (
        "G6",
        &[
            ("graded.m2.children.26688", "3"),
            ("graded.m2.children-include.26688", "[480, 1968, 23400]"),
        ],
    ),
];

struct Criterion {
    id: &'static str,
    title: &'static str,
    report: VerifyReport,
    note: String,
}

impl Criterion {
    fn new(id: &'static str, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            report: VerifyReport::default(),
            note: String::new(),
        }
    }

    fn line(&mut self, name: impl Into<String>, ok: bool, expected: impl ToString, computed: impl ToString) {
        self.report.lines.push(CheckLine {
            name: name.into(),
            strength: Strength::Hard,
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
            expected: expected.to_string(),
            computed: computed.to_string(),
            source: "invariant".into(),
        });
    }

    fn absorb(&mut self, report: VerifyReport, keep: impl Fn(&str) -> bool) {
        self.report
            .lines
            .extend(report.lines.into_iter().filter(|l| keep(&l.name)));
    }

    fn failures(&self) -> Vec<(String, String)> {
        self.report
            .lines
            .iter()
            .filter(|l| l.failed_hard())
            .map(|l| (l.name.clone(), l.computed.clone()))
            .collect()
    }

    fn known(&self) -> bool {
        let Some((_, pinned)) = KNOWN_DEVIATIONS.iter().find(|(id, _)| *id == self.id) else {
            return false;
        };
        let mut pinned: Vec<(String, String)> = pinned.iter().map(|(n, c)| (n.to_string(), c.to_string())).collect();
        let mut got = self.failures();
        pinned.sort();
        got.sort();
        pinned == got
    }

    /// Prints the verdict and the checks; returns whether it is acceptable.
    fn print(&self) -> bool {
        let failures = self.failures();
        let (verdict, ok) = match (failures.is_empty(), self.id.starts_with('P')) {
            (true, _) => ("PASS", true),
            (false, true) => ("FAIL", false),
            (false, false) if self.known() => ("FAIL (known deviation)", true),
            (false, false) => ("FAIL", false),
        };
        let mut out = format!("{} {verdict}: {}", self.id, self.title);
        if !self.note.is_empty() {
            let _ = write!(out, " ({})", self.note);
        }
        println!("{out}");
        for l in self.report.render().lines() {
            println!("    {l}");
        }
        ok
    }
}

fn fixtures(name: &str) -> FixtureSet {
    FixtureSet::load(&workspace().join("fixtures").join(format!("{name}.fixtures"))).unwrap()
}

fn rule_configs() -> [RuleConfig; 3] {
    [
        RuleConfig::main(),
        RuleConfig {
            real_swap_rule: RealSwapRule::Reflection,
            birth_rule: BirthRule::Any,
            ..RuleConfig::main()
        },
        RuleConfig::main().with_m_bound(Some(2)),
    ]
}

/// Runs `check` on `RANDOM_STATES` random states per rule configuration.
fn random_sweep<F>(c: &mut Criterion, configs: &[RuleConfig], salt: u64, check: F)
where
    F: Fn(&morsify_core::VirtualMorsification, &RuleConfig) -> Result<(), String>,
{
    for (i, config) in configs.iter().enumerate() {
        let mut rng = StdRng::seed_from_u64(RNG_SEED ^ salt ^ i as u64);
        let mut first = None;
        for _ in 0..RANDOM_STATES {
            let state = random_state(&mut rng, config);
            if let Err(e) = check(&state, config) {
                first.get_or_insert(e);
            }
        }
        c.line(
            format!("{} states, {}", RANDOM_STATES, config.describe()),
            first.is_none(),
            "no violation",
            first.unwrap_or_else(|| "no violation".into()),
        );
    }
}

fn p1() -> Criterion {
    let mut c = Criterion::new("P1", "every flip has an inverse restoring the state");
    random_sweep(&mut c, &rule_configs(), 1, |s, cfg| {
        check_invertible(s, cfg).map(|_| ())
    });
    c
}

fn p2() -> Criterion {
    let mut c = Criterion::new("P2", "flips are congruences: symmetric, diagonal -2, same determinant");
    random_sweep(&mut c, &rule_configs(), 2, check_congruence);
    c
}

fn p3() -> Criterion {
    let mut c = Criterion::new("P3", "restricted flips keep Ind; a real zero crossing moves one value");
    random_sweep(&mut c, &rule_configs()[..2], 3, check_ind);
    c
}

fn truncated(threads: usize) -> EnumerateOptions {
    EnumerateOptions {
        budget: Budget::states(TRUNCATED),
        threads,
        ..EnumerateOptions::default()
    }
}

fn p4() -> Criterion {
    let mut c = Criterion::new("P4", "truncated runs agree across thread counts and checkpoint-resume");
    let s = seed("x10_3");
    let config = RuleConfig::main();
    let one = enumerate(&s, &config, &truncated(1)).unwrap();
    c.line("truncated run size", one.total() == TRUNCATED, TRUNCATED, one.total());
    for threads in [4, 8] {
        let other = enumerate(&s, &config, &truncated(threads)).unwrap();
        c.line(
            format!("{threads} threads vs 1"),
            other.store.arena() == one.store.arena(),
            "identical keys",
            if other.store.arena() == one.store.arena() {
                "identical keys"
            } else {
                "different keys"
            },
        );
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.bin");
    let mut options = truncated(4);
    options.interrupt_at = Some(TRUNCATED / 3);
    options.checkpoint = Some(CheckpointPolicy {
        path: path.clone(),
        every: 1_000,
    });
    let part = enumerate(&s, &config, &options).unwrap();
    let resumed = resume(&path, &config, &truncated(4)).unwrap();
    let same = !part.closed() && resumed.store.arena() == one.store.arena() && resumed.cursor == one.cursor;
    c.line(
        "interrupted, resumed vs fresh",
        same,
        "identical keys",
        if same { "identical keys" } else { "different keys" },
    );
    c
}

fn p5() -> Criterion {
    let mut c = Criterion::new("P5", "greedy-sign key is constant on sign orbits");
    let mut rng = StdRng::seed_from_u64(RNG_SEED ^ 5);
    let mut bad = None;
    for _ in 0..ORBIT_STATES {
        let state = random_real_state(&mut rng, 10);
        match check_gauge_orbit(&state) {
            Ok(ORBIT_SIZE) => {}
            Ok(n) => bad = bad.or(Some(format!("orbit of size {n}"))),
            Err(e) => bad = bad.or(Some(e)),
        }
    }
    c.line(
        format!("{ORBIT_STATES} random states, {ORBIT_SIZE} sign patterns each"),
        bad.is_none(),
        "constant key",
        bad.unwrap_or_else(|| "constant key".into()),
    );
    let mut walks = None;
    for _ in 0..ORBIT_STATES {
        let steps = rng.gen_range(0..40);
        let state = random_walk_state(&mut rng, &RuleConfig::main(), steps);
        if let Err(e) = check_gauge_orbit(&state) {
            walks.get_or_insert(e);
        }
    }
    c.line(
        format!("{ORBIT_STATES} states with pairs, pair members negated together"),
        walks.is_none(),
        "constant key",
        walks.unwrap_or_else(|| "constant key".into()),
    );
    c
}

fn p6(sets: &[&FixtureSet]) -> Criterion {
    let mut c = Criterion::new("P6", "sum identities inside the fixture files");
    for set in sets {
        c.absorb(self_check(set), |_| true);
    }
    c
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn ordered(expected: &Expected, got: &[(u64, i32)]) -> bool {
    let Expected::Pairs(items) = expected else {
        return false;
    };
    items.len() == got.len()
        && items
            .iter()
            .zip(got)
            .all(|((a, ind), (card, i))| a.matches(*card as i64) && ind == i)
}

fn g3(x10_3: &FixtureSet) -> Criterion {
    let mut c = Criterion::new("G3", "standard scales reproduce the printed sequences");
    let config = RuleConfig::restricted();
    for name in ["x10_3_m4800", "x10_3_4320"] {
        let scale = standard_scale(&seed(name), &config, &EnumerateOptions::default()).unwrap();
        let seq = scale.sequence();
        let fixture = x10_3.get(&format!("scale.{name}")).unwrap();
        let text: Vec<String> = seq.iter().map(|(card, ind)| format!("{card}:{ind}")).collect();
        c.line(
            format!("scale.{name}"),
            ordered(&fixture.expected, &seq),
            &fixture.expected,
            text.join(", "),
        );
    }
    c
}

/// Seed, fixture, number of negative values, m-bound, fixture file.
type Spot<'a> = (&'a str, &'a str, Option<usize>, Option<u32>, &'a FixtureSet);

fn g4(x10_3: &FixtureSet, x10_1: &FixtureSet) -> Criterion {
    let mut c = Criterion::new("G4", "single components from the seeds");
    let runs: [Spot; 4] = [
        ("x10_3", "component.x10_3", None, None, x10_3),
        ("x10_3_m4800", "component.x10_3_m4800.k5", Some(5), None, x10_3),
        ("x10_3_8496", "component.x10_3_8496", Some(6), None, x10_3),
        ("x10_3_4320", "component.x10_3_4320", None, None, x10_3),
    ];
    let extra: [Spot; 2] = [
        ("x10_1_fake", "component.x10_1_fake.m2.k3", Some(3), Some(2), x10_1),
        ("x10_1_fake", "component.x10_1_fake.m2.k5", Some(5), Some(2), x10_1),
    ];
    for (name, fixture, k, m, set) in runs.into_iter().chain(extra) {
        let mut state = seed(name);
        if let Some(k) = k {
            state = state.with_negative_count(k).unwrap();
        }
        let config = RuleConfig::restricted().with_m_bound(m);
        let comp = component_of(&state, &config, &EnumerateOptions::default()).unwrap();
        let mut report = VerifyReport::default();
        report.check(set, fixture, Computed::Pairs(vec![(comp.card as i64, comp.ind)]));
        c.absorb(report, |_| true);
    }
    c
}

fn main() -> ExitCode {
    let x10_3 = fixtures("x10_3");
    let x10_1 = fixtures("x10_1");
    let mut all = vec![p1(), p2(), p3(), p4(), p5(), p6(&[&x10_3, &x10_1])];

    let mut g1 = Criterion::new("G1", "X10^3 domain total and Ind histogram");
    let mut g2 = Criterion::new("G2", "X10^3 restricted components");
    let mut g7 = Criterion::new("G7", "component predicate queries");
    {
        let config = RuleConfig::main();
        let (run, secs) = timed(|| enumerate(&seed("x10_3"), &config, &EnumerateOptions::default()).unwrap());
        g1.note = format!("{secs:.0} s");
        let (partition, secs) = timed(|| components(&run, &config).unwrap());
        g2.note = format!("{secs:.0} s");
        let report = verify_against_fixtures(&run, Some(&partition), &x10_3, None);
        let is_g2 = |n: &str| n == "domain.components" || n == "domain.cards";
        g1.absorb(report.clone(), |n| n.starts_with("domain.") && !is_g2(n));
        g2.absorb(report.clone(), is_g2);
        g7.absorb(report, |n| n.starts_with("query."));
    }
    let g3 = g3(&x10_3);
    let g4 = g4(&x10_3, &x10_1);

    let mut g5 = Criterion::new("G5", "X10^1 bounded domains, m = 2 and m = 3");
    let mut g6 = Criterion::new("G6", "graded graph from m = 2 to m = 3");
    {
        let s = seed("x10_1");
        let mut levels = Vec::new();
        let mut notes = Vec::new();
        for m in [2, 3] {
            let config = RuleConfig::main().with_m_bound(Some(m));
            let ((run, partition), secs) = timed(|| {
                let run = enumerate(&s, &config, &EnumerateOptions::default()).unwrap();
                let partition = components(&run, &config).unwrap();
                (run, partition)
            });
            notes.push(format!("m = {m}: {secs:.0} s"));
            g5.absorb(verify_against_fixtures(&run, Some(&partition), &x10_1, None), |_| true);
            levels.push((run, partition));
        }
        g5.note = notes.join(", ");
        let refs: Vec<_> = levels.iter().map(|(r, p)| (r, p)).collect();
        let graph = link_levels(&refs).unwrap();
        g6.absorb(verify_graded(&graph, &x10_1), |_| true);
    }

    all.extend([g1, g2, g3, g4, g5, g6, g7]);
    all.sort_by_key(|c| (c.id.starts_with('G'), c.id));
    let mut ok = true;
    for c in &all {
        ok &= c.print();
    }
    if ok {
        println!("acceptance: ok");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
