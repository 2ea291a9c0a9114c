//! Run directories: manifest, sorted state file, component file,
//! checkpoint and lock. Byte layouts are in `docs/formats.md`.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::components::{ComponentFlags, ComponentSummary, Partition};
use crate::engine::{ind_histogram, RunResult, StopReason};
use crate::key::{CanonicalKey, KeyLayout, Width};
use crate::rules::RuleConfig;
use crate::store::StateStore;

pub const MANIFEST: &str = "manifest.toml";
pub const STATES: &str = "states.bin";
pub const COMPONENTS: &str = "components.bin";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const LOCK: &str = "lock";

const STATES_MAGIC: &[u8; 8] = b"VMSTATE1";
const COMPONENTS_MAGIC: &[u8; 8] = b"VMCOMP01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunDirError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("run directory {0} is locked by another process")]
    Locked(PathBuf),
    #[error("run directory {0} has no manifest")]
    Missing(PathBuf),
    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("run in {0} is not closed")]
    NotClosed(PathBuf),
    #[error("seed {path} changed since the run started (digest {found}, manifest {expected})")]
    SeedChanged {
        path: PathBuf,
        expected: String,
        found: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunDirError + '_ {
    move |source| RunDirError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRecord {
    pub max_states: u64,
    pub max_bytes: Option<u64>,
    pub max_seconds: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub code_version: String,
    pub seed_path: String,
    pub seed_sha256: String,
    pub config: RuleConfig,
    pub config_line: String,
    pub width: Width,
    pub mu: usize,
    pub budget: BudgetRecord,
    pub threads: usize,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub stop: String,
    pub completed: bool,
    pub total: u64,
    pub elapsed_seconds: f64,
    /// Ind (as a string key) -> count.
    pub histogram: BTreeMap<String, u64>,
}

impl RunManifest {
    pub fn stop_reason(&self) -> Option<StopReason> {
        [
            StopReason::Closed,
            StopReason::MaxStates,
            StopReason::Memory,
            StopReason::WallClock,
            StopReason::Interrupted,
        ]
        .into_iter()
        .find(|s| s.name() == self.stop)
    }
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> Result<String, RunDirError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn histogram_strings(h: &BTreeMap<i32, u64>) -> BTreeMap<String, u64> {
    h.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Exclusive ownership of a run directory for the life of the value.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    lock: PathBuf,
}

impl RunDir {
    /// Creates the directory if needed and takes its lock.
    pub fn open(root: &Path) -> Result<Self, RunDirError> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        let lock = root.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => return Err(RunDirError::Locked(root.to_path_buf())),
            Err(e) => return Err(io_err(&lock)(e)),
        }
        Ok(RunDir {
            root: root.to_path_buf(),
            lock,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), RunDirError> {
        write_manifest(&self.root, manifest)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), RunDirError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(io_err(&path))
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

pub fn write_manifest(root: &Path, manifest: &RunManifest) -> Result<(), RunDirError> {
    let path = root.join(MANIFEST);
    let text = toml::to_string(manifest).map_err(|e| RunDirError::Manifest {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    atomic_write(&path, text.as_bytes())
}

pub fn read_manifest(root: &Path) -> Result<RunManifest, RunDirError> {
    let path = root.join(MANIFEST);
    if !path.exists() {
        return Err(RunDirError::Missing(root.to_path_buf()));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    toml::from_str(&text).map_err(|e| RunDirError::Manifest {
        path,
        reason: e.to_string(),
    })
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), RunDirError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_header(w: &mut impl Write, magic: &[u8; 8], layout: KeyLayout, count: u64) -> io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&(layout.mu as u32).to_le_bytes())?;
    w.write_all(&[u8::from(layout.width == Width::Wide)])?;
    w.write_all(&count.to_le_bytes())
}

fn read_header(r: &mut impl Read, magic: &[u8; 8], path: &Path) -> Result<(KeyLayout, u64), RunDirError> {
    let bad = |reason: &str| RunDirError::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut m = [0u8; 8];
    r.read_exact(&mut m).map_err(io_err(path))?;
    if &m != magic {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    let mut b1 = [0u8; 1];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io_err(path))?;
    r.read_exact(&mut b1).map_err(io_err(path))?;
    r.read_exact(&mut b8).map_err(io_err(path))?;
    let width = match b1[0] {
        0 => Width::Narrow,
        1 => Width::Wide,
        _ => return Err(bad("bad width byte")),
    };
    Ok((
        KeyLayout::new(u32::from_le_bytes(b4) as usize, width),
        u64::from_le_bytes(b8),
    ))
}

/// Writes the keys of `store` in lexicographic order.
pub fn write_states(root: &Path, store: &StateStore) -> Result<(), RunDirError> {
    let path = root.join(STATES);
    let tmp = path.with_extension("tmp");
    {
        let f = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(f);
        write_header(&mut w, STATES_MAGIC, store.layout(), store.len() as u64).map_err(io_err(&tmp))?;
        w.write_all(&store.sorted_arena()).map_err(io_err(&tmp))?;
        w.flush().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

/// Reads `states.bin` into a store whose index order is the sorted order.
pub fn read_states(root: &Path) -> Result<StateStore, RunDirError> {
    let path = root.join(STATES);
    let f = File::open(&path).map_err(io_err(&path))?;
    let mut r = BufReader::new(f);
    let (layout, count) = read_header(&mut r, STATES_MAGIC, &path)?;
    let mut arena = Vec::with_capacity(count as usize * layout.len());
    r.read_to_end(&mut arena).map_err(io_err(&path))?;
    if arena.len() != count as usize * layout.len() {
        return Err(RunDirError::Format {
            path,
            reason: "state count does not match file length".into(),
        });
    }
    Ok(StateStore::from_arena(layout, arena))
}

/// Loads a closed run from its directory.
pub fn load_run(root: &Path) -> Result<(RunManifest, RunResult), RunDirError> {
    let manifest = read_manifest(root)?;
    if !manifest.completed {
        return Err(RunDirError::NotClosed(root.to_path_buf()));
    }
    let store = read_states(root)?;
    let total = store.len() as u64;
    let run = RunResult {
        ind_histogram: ind_histogram(&store),
        store,
        config: manifest.config,
        stop: StopReason::Closed,
        cursor: total,
        elapsed: std::time::Duration::from_secs_f64(manifest.elapsed_seconds),
    };
    Ok((manifest, run))
}

fn flags_byte(f: &ComponentFlags) -> u8 {
    u8::from(f.all_real) | u8::from(f.has_nonreal) << 1 | u8::from(f.lowest_is_saddle) << 2
}

/// Writes a partition of a store read back from `states.bin` (labels in
/// sorted-key order).
pub fn write_components(root: &Path, layout: KeyLayout, partition: &Partition) -> Result<(), RunDirError> {
    let path = root.join(COMPONENTS);
    let tmp = path.with_extension("tmp");
    {
        let f = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(f);
        let e = io_err(&tmp);
        let mut body = || -> io::Result<()> {
            write_header(&mut w, COMPONENTS_MAGIC, layout, partition.labels.len() as u64)?;
            w.write_all(&(partition.components.len() as u32).to_le_bytes())?;
            for c in &partition.components {
                w.write_all(&c.card.to_le_bytes())?;
                w.write_all(&c.ind.to_le_bytes())?;
                w.write_all(&[flags_byte(&c.flags), c.flags.min_real_points as u8])?;
                w.write_all(c.representative.as_bytes())?;
            }
            for l in &partition.labels {
                w.write_all(&l.to_le_bytes())?;
            }
            w.flush()
        };
        body().map_err(e)?;
    }
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

pub fn read_components(root: &Path) -> Result<Partition, RunDirError> {
    let path = root.join(COMPONENTS);
    let f = File::open(&path).map_err(io_err(&path))?;
    let mut r = BufReader::new(f);
    let (layout, count) = read_header(&mut r, COMPONENTS_MAGIC, &path)?;
    let e = |source| RunDirError::Io {
        path: path.clone(),
        source,
    };
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b4).map_err(e)?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut components = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8).map_err(e)?;
        let card = u64::from_le_bytes(b8);
        r.read_exact(&mut b4).map_err(e)?;
        let ind = i32::from_le_bytes(b4);
        r.read_exact(&mut b2).map_err(e)?;
        let mut key = vec![0u8; layout.len()];
        r.read_exact(&mut key).map_err(e)?;
        components.push(ComponentSummary {
            card,
            ind,
            representative: CanonicalKey(key),
            flags: ComponentFlags {
                all_real: b2[0] & 1 != 0,
                has_nonreal: b2[0] & 2 != 0,
                lowest_is_saddle: b2[0] & 4 != 0,
                min_real_points: b2[1] as usize,
            },
        });
    }
    let mut labels = Vec::with_capacity(count as usize);
    for _ in 0..count {
        r.read_exact(&mut b4).map_err(e)?;
        let l = u32::from_le_bytes(b4);
        if l as usize >= n {
            return Err(RunDirError::Format {
                path,
                reason: format!("label {l} out of range"),
            });
        }
        labels.push(l);
    }
    Ok(Partition { labels, components })
}
