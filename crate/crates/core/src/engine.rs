//! Deduplicated breadth-first closure of a seed under the flip generators.
//!
//! The store arena doubles as the queue. States are expanded in batches whose
//! images are computed in parallel and inserted sequentially in parent order,
//! so the arena order equals that of a sequential FIFO search for any thread
//! count or batch size. Checkpoints record the arena and the queue cursor;
//! resuming continues the same sequence.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::key::{encode_into, KeyError, KeyLayout, Width};
use crate::rules::{expand, prepare, RuleConfig, RuleError};
use crate::state::VirtualMorsification;
use crate::store::StateStore;

/// Hard cap on states per run unless configured otherwise.
pub const DEFAULT_MAX_STATES: u64 = 100_000_000;

const BATCH: usize = 2048;
const CHECKPOINT_MAGIC: &[u8; 8] = b"VMCKPT01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_states: u64,
    pub max_bytes: Option<u64>,
    pub max_time: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_states: DEFAULT_MAX_STATES,
            max_bytes: None,
            max_time: None,
        }
    }
}

impl Budget {
    pub fn states(max_states: u64) -> Self {
        Budget {
            max_states,
            ..Budget::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckpointPolicy {
    pub path: PathBuf,
    /// Write a checkpoint after at least this many new insertions.
    pub every: u64,
}

#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    pub budget: Budget,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
    pub width: Width,
    pub checkpoint: Option<CheckpointPolicy>,
    /// Stop (as if interrupted) once the store reaches this size; used to
    /// exercise resumption.
    pub interrupt_at: Option<u64>,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            budget: Budget::default(),
            threads: 0,
            width: Width::Narrow,
            checkpoint: None,
            interrupt_at: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Closed,
    MaxStates,
    Memory,
    WallClock,
    Interrupted,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Closed => "closed",
            StopReason::MaxStates => "max-states",
            StopReason::Memory => "memory",
            StopReason::WallClock => "wall-clock",
            StopReason::Interrupted => "interrupted",
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

pub struct RunResult {
    pub store: StateStore,
    pub config: RuleConfig,
    pub stop: StopReason,
    /// Index of the next state to expand; equals the store size when closed.
    pub cursor: u64,
    pub ind_histogram: BTreeMap<i32, u64>,
    pub elapsed: Duration,
}

impl RunResult {
    pub fn closed(&self) -> bool {
        self.stop == StopReason::Closed
    }

    pub fn total(&self) -> u64 {
        self.store.len() as u64
    }
}

/// Ind of an encoded state, read from its attribute nibbles.
pub fn ind_of_key(key: &[u8], layout: KeyLayout) -> i32 {
    let attrs = &key[layout.len() - layout.mu.div_ceil(2)..];
    let mut ind = 0;
    for slot in 0..layout.mu {
        let byte = attrs[slot / 2];
        let code = if slot % 2 == 0 { byte & 0xf } else { byte >> 4 };
        let negative = code & 4 != 0;
        let kind = code & 3;
        if negative && kind != 3 {
            ind += if kind % 2 == 0 { 1 } else { -1 };
        }
    }
    ind
}

pub fn ind_histogram(store: &StateStore) -> BTreeMap<i32, u64> {
    let layout = store.layout();
    let mut hist = BTreeMap::new();
    for key in store.iter() {
        *hist.entry(ind_of_key(key, layout)).or_insert(0) += 1;
    }
    hist
}

pub fn encode(state: &VirtualMorsification, config: &RuleConfig, width: Width) -> Result<Vec<u8>, KeyError> {
    let mut out = Vec::with_capacity(KeyLayout::new(state.mu(), width).len());
    encode_into(state, config.gauge, width, &mut out)?;
    Ok(out)
}

/// Canonical keys of all images of `state`, concatenated.
pub fn image_keys(state: &VirtualMorsification, config: &RuleConfig, width: Width) -> Result<Vec<u8>, KeyError> {
    let images = expand(state, config);
    let mut out = Vec::with_capacity(images.len() * KeyLayout::new(state.mu(), width).len());
    for (_, img) in images {
        encode_into(&img, config.gauge, width, &mut out)?;
    }
    Ok(out)
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, EngineError> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Closure of `seed` under the flips of `config`.
pub fn enumerate(
    seed: &VirtualMorsification,
    config: &RuleConfig,
    options: &EnumerateOptions,
) -> Result<RunResult, EngineError> {
    config.validate()?;
    let layout = KeyLayout::new(seed.mu(), options.width);
    let mut store = StateStore::new(layout);
    store.insert(&encode(&prepare(seed, config), config, options.width)?);
    run(store, 0, config, options)
}

/// Continues an interrupted run from a checkpoint file.
pub fn resume(path: &Path, config: &RuleConfig, options: &EnumerateOptions) -> Result<RunResult, EngineError> {
    let ck = Checkpoint::read(path)?;
    if ck.config_line != config.describe() {
        return Err(EngineError::Checkpoint {
            path: path.to_path_buf(),
            reason: format!("configuration differs: checkpoint has `{}`", ck.config_line),
        });
    }
    if ck.layout.width != options.width {
        return Err(EngineError::Checkpoint {
            path: path.to_path_buf(),
            reason: "key width differs".into(),
        });
    }
    let store = StateStore::from_arena(ck.layout, ck.arena);
    run(store, ck.cursor, config, options)
}

fn run(
    mut store: StateStore,
    mut cursor: u64,
    config: &RuleConfig,
    options: &EnumerateOptions,
) -> Result<RunResult, EngineError> {
    let start = Instant::now();
    let layout = store.layout();
    let key_len = layout.len();
    let budget = options.budget;
    let mut since_checkpoint = 0u64;
    let mut stop = StopReason::Closed;

    with_pool(options.threads, || -> Result<(), EngineError> {
        'outer: while (cursor as usize) < store.len() {
            if let Some(limit) = options.interrupt_at {
                if store.len() as u64 >= limit {
                    stop = StopReason::Interrupted;
                    break;
                }
            }
            if budget.max_time.is_some_and(|t| start.elapsed() > t) {
                stop = StopReason::WallClock;
                break;
            }
            if budget.max_bytes.is_some_and(|b| store.memory_bytes() as u64 > b) {
                stop = StopReason::Memory;
                break;
            }
            let end = (cursor as usize + BATCH).min(store.len());
            let batch: Vec<Result<Vec<u8>, KeyError>> = (cursor as usize..end)
                .into_par_iter()
                .map(|i| image_keys(&store.state(i as u32), config, layout.width))
                .collect();
            for (offset, images) in batch.into_iter().enumerate() {
                let images = images?;
                for key in images.chunks_exact(key_len) {
                    if store.find(key).is_some() {
                        continue;
                    }
                    if store.len() as u64 >= budget.max_states {
                        // the parent at `cursor + offset` is only partly expanded
                        cursor += offset as u64;
                        stop = StopReason::MaxStates;
                        break 'outer;
                    }
                    store.insert(key);
                    since_checkpoint += 1;
                }
            }
            cursor = end as u64;
            if let Some(policy) = &options.checkpoint {
                if since_checkpoint >= policy.every {
                    Checkpoint::write(&policy.path, &store, cursor, config)?;
                    since_checkpoint = 0;
                }
            }
        }
        Ok(())
    })??;

    if stop == StopReason::Interrupted {
        if let Some(policy) = &options.checkpoint {
            Checkpoint::write(&policy.path, &store, cursor, config)?;
        }
    }
    let ind_histogram = ind_histogram(&store);
    Ok(RunResult {
        store,
        config: *config,
        stop,
        cursor,
        ind_histogram,
        elapsed: start.elapsed(),
    })
}

/// On-disk checkpoint: magic, then little-endian `u32` mu, `u8` width
/// (0 narrow, 1 wide), `u64` cursor, `u64` state count, `u32` length and
/// UTF-8 bytes of the configuration line, then the arena.
pub struct Checkpoint {
    pub layout: KeyLayout,
    pub cursor: u64,
    pub config_line: String,
    pub arena: Vec<u8>,
}

impl Checkpoint {
    pub fn write(path: &Path, store: &StateStore, cursor: u64, config: &RuleConfig) -> Result<(), EngineError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = io::BufWriter::new(fs::File::create(&tmp)?);
            let layout = store.layout();
            f.write_all(CHECKPOINT_MAGIC)?;
            f.write_all(&(layout.mu as u32).to_le_bytes())?;
            f.write_all(&[u8::from(layout.width == Width::Wide)])?;
            f.write_all(&cursor.to_le_bytes())?;
            f.write_all(&(store.len() as u64).to_le_bytes())?;
            let line = config.describe();
            f.write_all(&(line.len() as u32).to_le_bytes())?;
            f.write_all(line.as_bytes())?;
            f.write_all(store.arena())?;
            f.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Checkpoint, EngineError> {
        let bad = |reason: &str| EngineError::Checkpoint {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut f = io::BufReader::new(fs::File::open(path)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        let mut b1 = [0u8; 1];
        f.read_exact(&mut b4)?;
        let mu = u32::from_le_bytes(b4) as usize;
        f.read_exact(&mut b1)?;
        let width = match b1[0] {
            0 => Width::Narrow,
            1 => Width::Wide,
            _ => return Err(bad("bad width byte")),
        };
        f.read_exact(&mut b8)?;
        let cursor = u64::from_le_bytes(b8);
        f.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        f.read_exact(&mut b4)?;
        let mut line = vec![0u8; u32::from_le_bytes(b4) as usize];
        f.read_exact(&mut line)?;
        let config_line = String::from_utf8(line).map_err(|_| bad("configuration is not UTF-8"))?;
        let layout = KeyLayout::new(mu, width);
        let mut arena = Vec::with_capacity(count * layout.len());
        f.read_to_end(&mut arena)?;
        if arena.len() != count * layout.len() {
            return Err(bad("truncated arena"));
        }
        if cursor as usize > count {
            return Err(bad("cursor beyond state count"));
        }
        Ok(Checkpoint {
            layout,
            cursor,
            config_line,
            arena,
        })
    }
}
