//! `morsify`: enumerate, classify and verify virtual morsifications.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use morsify_core::components::{components, query_component, Partition, Predicate};
use morsify_core::engine::{self, Budget, CheckpointPolicy, EnumerateOptions, RunResult};
use morsify_core::fixtures::FixtureSet;
use morsify_core::graded::graded_graph;
use morsify_core::reports::{self, component_table, ind_histogram_table, Format, Table};
use morsify_core::rules::{BirthRule, ComplexSwapRule, Mode, PairPlacement, RealSwapRule, RuleConfig};
use morsify_core::rundir::{self, BudgetRecord, RunDir, RunManifest};
use morsify_core::scale::standard_scale;
use morsify_core::{ingest_seed, Gauge, Width};

/// Exit codes.
mod exit {
    pub const OK: u8 = 0;
    /// A hard fixture failed.
    pub const VERIFY: u8 = 1;
    /// Bad arguments, seed or fixture file.
    pub const INPUT: u8 = 2;
    /// The budget stopped the run before closure.
    pub const BUDGET: u8 = 3;
    /// Run directory missing, locked, not closed, or inconsistent.
    pub const RUN_DIR: u8 = 4;
    /// I/O or internal failure.
    pub const INTERNAL: u8 = 5;
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Coded<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Coded<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn fail<T>(code: u8, error: anyhow::Error) -> Result<T, Failure> {
    Err(Failure { code, error })
}

#[derive(Parser)]
#[command(name = "morsify", version, about = "Enumerate and classify virtual morsifications")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closure of a seed under the flips; writes a run directory.
    Enumerate(EnumerateArgs),
    /// Continues a run directory from its checkpoint.
    Resume(ResumeArgs),
    /// Splits a closed run into restricted components.
    Components(RunArgs),
    /// Components of every member of the standard scale of a seed.
    Scale(ScaleArgs),
    /// m-domains for a range of bounds and their containment graph.
    Graded(GradedArgs),
    /// Checks a closed run against a fixture file.
    Verify(VerifyArgs),
    /// Evaluates a predicate on one component of a closed run.
    Query(QueryArgs),
    /// Set difference of two closed runs.
    Diff(DiffArgs),
}

#[derive(Args, Clone)]
struct RuleArgs {
    /// restricted | main
    #[arg(long, env = "MORSIFY_MODE", default_value = "main")]
    mode: String,
    /// Cancel flips creating entries outside [-N, N].
    #[arg(long, env = "MORSIFY_M_BOUND")]
    m_bound: Option<u32>,
    /// none | greedy
    #[arg(long, env = "MORSIFY_GAUGE", default_value = "greedy")]
    gauge: String,
    /// oriented | fold | any
    #[arg(long, env = "MORSIFY_BIRTH_RULE", default_value = "oriented")]
    birth_rule: String,
    /// braid | orthogonal
    #[arg(long, env = "MORSIFY_COMPLEX_SWAP_RULE", default_value = "braid")]
    complex_swap_rule: String,
    /// orthogonal | reflection
    #[arg(long, env = "MORSIFY_REAL_SWAP_RULE", default_value = "orthogonal")]
    real_swap_rule: String,
    /// floating | pinned
    #[arg(long, env = "MORSIFY_PAIR_PLACEMENT", default_value = "floating")]
    pair_placement: String,
}

fn named<T>(what: &str, value: &str, parse: fn(&str) -> Option<T>) -> Result<T, Failure> {
    parse(value).ok_or_else(|| Failure {
        code: exit::INPUT,
        error: anyhow!("unknown {what} `{value}`"),
    })
}

impl RuleArgs {
    fn config(&self) -> Result<RuleConfig, Failure> {
        let config = RuleConfig {
            mode: named("mode", &self.mode, Mode::from_name)?,
            m_bound: self.m_bound,
            gauge: named("gauge", &self.gauge, Gauge::from_name)?,
            birth_rule: named("birth rule", &self.birth_rule, BirthRule::from_name)?,
            complex_swap_rule: named("complex swap rule", &self.complex_swap_rule, ComplexSwapRule::from_name)?,
            real_swap_rule: named("real swap rule", &self.real_swap_rule, RealSwapRule::from_name)?,
            pair_placement: named("pair placement", &self.pair_placement, PairPlacement::from_name)?,
        };
        config.validate().code(exit::INPUT)?;
        Ok(config)
    }
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Worker threads (0: one per core).
    #[arg(long, env = "MORSIFY_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long, env = "MORSIFY_MAX_STATES", default_value_t = engine::DEFAULT_MAX_STATES)]
    max_states: u64,
    /// Stop when the store exceeds this many bytes.
    #[arg(long, env = "MORSIFY_MEM_BUDGET")]
    mem_budget: Option<u64>,
    /// Stop after this many seconds.
    #[arg(long, env = "MORSIFY_MAX_SECONDS")]
    max_seconds: Option<u64>,
    /// narrow (8-bit entries) | wide (16-bit)
    #[arg(long, env = "MORSIFY_WIDTH", default_value = "narrow")]
    width: String,
}

impl EngineArgs {
    fn options(&self) -> Result<EnumerateOptions, Failure> {
        let width = match self.width.as_str() {
            "narrow" => Width::Narrow,
            "wide" => Width::Wide,
            other => return fail(exit::INPUT, anyhow!("unknown width `{other}`")),
        };
        Ok(EnumerateOptions {
            budget: Budget {
                max_states: self.max_states,
                max_bytes: self.mem_budget,
                max_time: self.max_seconds.map(Duration::from_secs),
            },
            threads: self.threads,
            width,
            checkpoint: None,
            interrupt_at: None,
        })
    }

    fn record(&self) -> BudgetRecord {
        BudgetRecord {
            max_states: self.max_states,
            max_bytes: self.mem_budget,
            max_seconds: self.max_seconds,
        }
    }
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long, env = "MORSIFY_SEED")]
    seed: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    rules: RuleArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Checkpoint after this many new states.
    #[arg(long, env = "MORSIFY_CHECKPOINT_EVERY", default_value_t = 1_000_000)]
    checkpoint_every: u64,
}

#[derive(Args)]
struct ResumeArgs {
    #[arg(long)]
    run: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, env = "MORSIFY_CHECKPOINT_EVERY", default_value_t = 1_000_000)]
    checkpoint_every: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    run: PathBuf,
    /// markdown | csv | text
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args)]
struct ScaleArgs {
    #[arg(long, env = "MORSIFY_SEED")]
    seed: PathBuf,
    #[command(flatten)]
    rules: RuleArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args)]
struct GradedArgs {
    #[arg(long, env = "MORSIFY_SEED")]
    seed: PathBuf,
    #[arg(long)]
    m_from: u32,
    #[arg(long)]
    m_to: u32,
    /// Check the `graded.*` fixtures of this file.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[command(flatten)]
    rules: RuleArgs,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Closed run to check; without it only the fixture identities are checked.
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long)]
    fixtures: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    component_card: u64,
    /// Needed when several components share the card.
    #[arg(long, allow_hyphen_values = true)]
    component_ind: Option<i32>,
    /// has-nonreal | all-real | lowest-is-saddle
    #[arg(long)]
    predicate: String,
}

#[derive(Args)]
struct DiffArgs {
    a: PathBuf,
    b: PathBuf,
}

fn format_of(name: &str) -> Result<Format, Failure> {
    named("format", name, Format::from_name)
}

fn write_checkpoint(dir: &Path, run: &RunResult) -> Result<(), Failure> {
    engine::Checkpoint::write(&dir.join(rundir::CHECKPOINT), &run.store, run.cursor, &run.config).code(exit::INTERNAL)
}

/// Writes the outputs of a finished or stopped run; returns the exit code.
fn finish_run(dir: &RunDir, mut manifest: RunManifest, run: &RunResult) -> Result<u8, Failure> {
    manifest.stop = run.stop.name().to_string();
    manifest.completed = run.closed();
    manifest.total = run.total();
    manifest.elapsed_seconds += run.elapsed.as_secs_f64();
    manifest.histogram = rundir::histogram_strings(&run.ind_histogram);
    if run.closed() {
        manifest.finished_unix = Some(rundir::now_unix());
        rundir::write_states(dir.root(), &run.store).code(exit::INTERNAL)?;
        let table = ind_histogram_table(&run.ind_histogram);
        dir.write_text("histogram.md", &table.render(Format::Markdown))
            .code(exit::INTERNAL)?;
        dir.write_text("histogram.csv", &table.render(Format::Csv))
            .code(exit::INTERNAL)?;
        let _ = std::fs::remove_file(dir.path(rundir::CHECKPOINT));
        print!("{}", table.render(Format::Text));
    } else {
        write_checkpoint(dir.root(), run)?;
    }
    dir.write_manifest(&manifest).code(exit::INTERNAL)?;
    println!(
        "{} states, {} ({:.1} s) -> {}",
        run.total(),
        run.stop.name(),
        run.elapsed.as_secs_f64(),
        dir.root().display()
    );
    Ok(if run.closed() { exit::OK } else { exit::BUDGET })
}

fn cmd_enumerate(args: &EnumerateArgs) -> Result<u8, Failure> {
    let config = args.rules.config()?;
    let mut options = args.engine.options()?;
    let seed = ingest_seed(&args.seed).code(exit::INPUT)?;
    let digest = rundir::sha256_file(&args.seed).code(exit::INPUT)?;
    let dir = RunDir::open(&args.out).code(exit::RUN_DIR)?;
    options.checkpoint = Some(CheckpointPolicy {
        path: dir.path(rundir::CHECKPOINT),
        every: args.checkpoint_every,
    });
    let manifest = RunManifest {
        format_version: rundir::FORMAT_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed_path: args.seed.display().to_string(),
        seed_sha256: digest,
        config,
        config_line: config.describe(),
        width: options.width,
        mu: seed.mu(),
        budget: args.engine.record(),
        threads: options.threads,
        started_unix: rundir::now_unix(),
        finished_unix: None,
        stop: "running".into(),
        completed: false,
        total: 0,
        elapsed_seconds: 0.0,
        histogram: Default::default(),
    };
    dir.write_manifest(&manifest).code(exit::INTERNAL)?;
    let run = engine::enumerate(&seed, &config, &options).code(exit::INTERNAL)?;
    finish_run(&dir, manifest, &run)
}

fn cmd_resume(args: &ResumeArgs) -> Result<u8, Failure> {
    let manifest = rundir::read_manifest(&args.run).code(exit::RUN_DIR)?;
    if manifest.completed {
        println!("run in {} is already closed", args.run.display());
        return Ok(exit::OK);
    }
    let seed_path = PathBuf::from(&manifest.seed_path);
    let found = rundir::sha256_file(&seed_path).code(exit::RUN_DIR)?;
    if found != manifest.seed_sha256 {
        return fail(
            exit::RUN_DIR,
            rundir::RunDirError::SeedChanged {
                path: seed_path,
                expected: manifest.seed_sha256.clone(),
                found,
            }
            .into(),
        );
    }
    if manifest.config.describe() != manifest.config_line {
        return fail(
            exit::RUN_DIR,
            anyhow!("manifest configuration line does not match its fields"),
        );
    }
    let dir = RunDir::open(&args.run).code(exit::RUN_DIR)?;
    let mut options = args.engine.options()?;
    options.width = manifest.width;
    let checkpoint = dir.path(rundir::CHECKPOINT);
    options.checkpoint = Some(CheckpointPolicy {
        path: checkpoint.clone(),
        every: args.checkpoint_every,
    });
    let run = engine::resume(&checkpoint, &manifest.config, &options).code(exit::RUN_DIR)?;
    let mut manifest = manifest;
    manifest.budget = args.engine.record();
    finish_run(&dir, manifest, &run)
}

/// The partition of a closed run, computed and stored on first use.
fn partition_of(dir: &Path, run: &RunResult) -> Result<Partition, Failure> {
    if dir.join(rundir::COMPONENTS).exists() {
        let p = rundir::read_components(dir).code(exit::RUN_DIR)?;
        if p.labels.len() == run.store.len() {
            return Ok(p);
        }
    }
    let p = components(run, &run.config).code(exit::INTERNAL)?;
    let _lock = RunDir::open(dir).code(exit::RUN_DIR)?;
    rundir::write_components(dir, run.store.layout(), &p).code(exit::INTERNAL)?;
    Ok(p)
}

fn load(dir: &Path) -> Result<RunResult, Failure> {
    rundir::load_run(dir).map(|(_, r)| r).code(exit::RUN_DIR)
}

fn cmd_components(args: &RunArgs) -> Result<u8, Failure> {
    let format = format_of(&args.format)?;
    let run = load(&args.run)?;
    let p = partition_of(&args.run, &run)?;
    let table = component_table(&p);
    std::fs::write(args.run.join("components.md"), table.render(Format::Markdown)).code(exit::INTERNAL)?;
    print!("{}", table.render(format));
    println!("{} components, {} states", p.components.len(), p.total());
    Ok(exit::OK)
}

fn cmd_scale(args: &ScaleArgs) -> Result<u8, Failure> {
    let format = format_of(&args.format)?;
    let config = args.rules.config()?;
    let options = args.engine.options()?;
    let seed = ingest_seed(&args.seed).code(exit::INPUT)?;
    let scale = match standard_scale(&seed, &config, &options) {
        Ok(s) => s,
        Err(e @ morsify_core::scale::ScaleError::Component { .. }) => return fail(exit::BUDGET, e.into()),
        Err(e) => return fail(exit::INPUT, e.into()),
    };
    let table = Table {
        header: vec!["k".into(), "card".into(), "ind".into()],
        rows: scale
            .members
            .iter()
            .map(|m| {
                vec![
                    m.k.to_string(),
                    m.component.card.to_string(),
                    m.component.ind.to_string(),
                ]
            })
            .collect(),
    };
    print!("{}", table.render(format));
    Ok(exit::OK)
}

fn cmd_graded(args: &GradedArgs) -> Result<u8, Failure> {
    let config = args.rules.config()?;
    let options = args.engine.options()?;
    let seed = ingest_seed(&args.seed).code(exit::INPUT)?;
    let fixtures = match &args.fixtures {
        Some(path) => Some(FixtureSet::load(path).code(exit::INPUT)?),
        None => None,
    };
    let graph = graded_graph(&seed, args.m_from, args.m_to, &config, &options).code(exit::BUDGET)?;
    let mut out = String::new();
    for level in &graph.levels {
        let _ = writeln!(
            out,
            "level m={}: {} states, {} components",
            level.m,
            level.total,
            level.components.len()
        );
        for (i, c) in level.components.iter().enumerate() {
            let _ = write!(out, "  [{i}] card {} ind {}", c.card, c.ind);
            if level.m > args.m_from {
                let children: Vec<String> = graph
                    .children(level.m, i)
                    .iter()
                    .map(|&ch| {
                        let prev = graph.level(level.m - 1).expect("previous level");
                        format!("{}", prev.components[ch].card)
                    })
                    .collect();
                let _ = write!(out, " <- {{{}}}", children.join(", "));
            }
            out.push('\n');
        }
    }
    print!("{out}");
    if let Some(fixtures) = fixtures {
        let report = reports::verify_graded(&graph, &fixtures);
        print!("{}", report.render());
        if !report.passed() {
            return Ok(exit::VERIFY);
        }
    }
    Ok(exit::OK)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let fixtures = FixtureSet::load(&args.fixtures).code(exit::INPUT)?;
    let mut report = reports::self_check(&fixtures);
    if let Some(dir) = &args.run {
        let (manifest, run) = rundir::load_run(dir).code(exit::RUN_DIR)?;
        let p = partition_of(dir, &run)?;
        let label = Path::new(&manifest.seed_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned());
        report
            .lines
            .extend(reports::verify_against_fixtures(&run, Some(&p), &fixtures, label.as_deref()).lines);
        std::fs::write(dir.join("verify.txt"), report.render()).code(exit::INTERNAL)?;
    }
    print!("{}", report.render());
    Ok(if report.passed() { exit::OK } else { exit::VERIFY })
}

fn cmd_query(args: &QueryArgs) -> Result<u8, Failure> {
    let predicate = named("predicate", &args.predicate, Predicate::from_name)?;
    let run = load(&args.run)?;
    let p = partition_of(&args.run, &run)?;
    let hits: Vec<_> = p
        .components
        .iter()
        .filter(|c| c.card == args.component_card && args.component_ind.is_none_or(|i| i == c.ind))
        .collect();
    match hits.as_slice() {
        [c] => {
            println!("{}", query_component(c, predicate));
            Ok(exit::OK)
        }
        [] => fail(exit::INPUT, anyhow!("no component with card {}", args.component_card)),
        _ => fail(
            exit::INPUT,
            anyhow!(
                "{} components have card {}; pass --component-ind",
                hits.len(),
                args.component_card
            ),
        ),
    }
}

fn cmd_diff(args: &DiffArgs) -> Result<u8, Failure> {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let diff = reports::diff_runs(&a, &b).code(exit::INPUT)?;
    print!("{}", diff.render());
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Resume(a) => cmd_resume(a),
        Command::Components(a) => cmd_components(a),
        Command::Scale(a) => cmd_scale(a),
        Command::Graded(a) => cmd_graded(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Query(a) => cmd_query(a),
        Command::Diff(a) => cmd_diff(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error.context(format!("exit code {}", f.code)));
            ExitCode::from(f.code)
        }
    }
}
