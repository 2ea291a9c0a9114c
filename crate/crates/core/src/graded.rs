//! The graded graph of m-virtual components: level `m` holds the
//! components of the m-domain, and every component points to the
//! component of level `m + 1` containing it.

use crate::components::{components, ComponentSummary, Partition};
use crate::engine::{enumerate, EngineError, EnumerateOptions, RunResult};
use crate::rules::{Mode, RuleConfig};
use crate::state::VirtualMorsification;

#[derive(Debug, Clone)]
pub struct Level {
    pub m: u32,
    pub total: u64,
    pub components: Vec<ComponentSummary>,
}

/// Containment of component `child` of level `m` in component `parent` of
/// level `m + 1` (indices into the level component lists).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub m: u32,
    pub child: usize,
    pub parent: usize,
}

#[derive(Debug, Clone)]
pub struct GradedGraph {
    pub levels: Vec<Level>,
    pub edges: Vec<Edge>,
}

impl GradedGraph {
    pub fn level(&self, m: u32) -> Option<&Level> {
        self.levels.iter().find(|l| l.m == m)
    }

    /// Children of component `parent` of level `m`, from level `m - 1`.
    pub fn children(&self, m: u32, parent: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.m + 1 == m && e.parent == parent)
            .map(|e| e.child)
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GradedError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("m-domain for m = {m} stopped ({stop}) after {reached} states")]
    Budget { m: u32, reached: u64, stop: &'static str },
    #[error("levels must be bounded runs with consecutive m, starting at m >= 1")]
    Range,
    #[error("component {child} of level {m} is not contained in level {}", m + 1)]
    Orphan { m: u32, child: usize },
}

/// Enumerates the m-domains of `seed` for `m_from..=m_to` (main mode) and
/// links each component to the component of the next level containing it.
pub fn graded_graph(
    seed: &VirtualMorsification,
    m_from: u32,
    m_to: u32,
    config: &RuleConfig,
    options: &EnumerateOptions,
) -> Result<GradedGraph, GradedError> {
    if m_from == 0 || m_from > m_to {
        return Err(GradedError::Range);
    }
    let mut runs = Vec::new();
    for m in m_from..=m_to {
        let cfg = config.with_mode(Mode::Main).with_m_bound(Some(m));
        let run = enumerate(seed, &cfg, options)?;
        if !run.closed() {
            return Err(GradedError::Budget {
                m,
                reached: run.total(),
                stop: run.stop.name(),
            });
        }
        let partition = components(&run, &cfg)?;
        runs.push((run, partition));
    }
    let refs: Vec<(&RunResult, &Partition)> = runs.iter().map(|(r, p)| (r, p)).collect();
    link_levels(&refs)
}

/// Builds the graph from closed m-domain runs of consecutive bounds, in
/// increasing order, with their partitions.
pub fn link_levels(runs: &[(&RunResult, &Partition)]) -> Result<GradedGraph, GradedError> {
    let mut levels = Vec::with_capacity(runs.len());
    let mut edges = Vec::new();
    for (i, &(run, partition)) in runs.iter().enumerate() {
        let m = run.config.m_bound.ok_or(GradedError::Range)?;
        if i > 0 {
            let (prev_run, prev) = runs[i - 1];
            if prev_run.config.m_bound != Some(m - 1) || prev_run.store.layout() != run.store.layout() {
                return Err(GradedError::Range);
            }
            for (child, c) in prev.components.iter().enumerate() {
                let parent = run
                    .store
                    .find(c.representative.as_bytes())
                    .map(|i| partition.labels[i as usize] as usize)
                    .ok_or(GradedError::Orphan { m: m - 1, child })?;
                edges.push(Edge {
                    m: m - 1,
                    child,
                    parent,
                });
            }
        }
        levels.push(Level {
            m,
            total: run.total(),
            components: partition.components.clone(),
        });
    }
    Ok(GradedGraph { levels, edges })
}
