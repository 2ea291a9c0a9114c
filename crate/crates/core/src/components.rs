//! Restricted-reachability classes ("virtual components") of a closed run.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{enumerate, image_keys, EngineError, EnumerateOptions, RunResult};
use crate::key::CanonicalKey;
use crate::rules::{Mode, RuleConfig};
use crate::state::VirtualMorsification;
use crate::store::StateStore;

const BATCH: usize = 1 << 14;

/// Predicates evaluated over all members of a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentFlags {
    /// Every member has only real critical points.
    pub all_real: bool,
    /// Some member has a conjugate pair.
    pub has_nonreal: bool,
    /// Some member has its lowest real critical value at a saddle.
    pub lowest_is_saddle: bool,
    pub min_real_points: usize,
}

impl ComponentFlags {
    fn of(state: &VirtualMorsification) -> Self {
        ComponentFlags {
            all_real: state.all_real(),
            has_nonreal: !state.all_real(),
            lowest_is_saddle: state.lowest_is_saddle(),
            min_real_points: state.real_count(),
        }
    }

    fn merge(&mut self, other: &ComponentFlags) {
        self.all_real &= other.all_real;
        self.has_nonreal |= other.has_nonreal;
        self.lowest_is_saddle |= other.lowest_is_saddle;
        self.min_real_points = self.min_real_points.min(other.min_real_points);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSummary {
    pub card: u64,
    pub ind: i32,
    /// Smallest canonical key among the members.
    pub representative: CanonicalKey,
    pub flags: ComponentFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predicate {
    HasNonreal,
    AllReal,
    LowestIsSaddle,
}

impl Predicate {
    pub fn name(self) -> &'static str {
        match self {
            Predicate::HasNonreal => "has-nonreal",
            Predicate::AllReal => "all-real",
            Predicate::LowestIsSaddle => "lowest-is-saddle",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "has-nonreal" => Some(Predicate::HasNonreal),
            "all-real" => Some(Predicate::AllReal),
            "lowest-is-saddle" => Some(Predicate::LowestIsSaddle),
            _ => None,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn query_component(component: &ComponentSummary, predicate: Predicate) -> bool {
    match predicate {
        Predicate::HasNonreal => component.flags.has_nonreal,
        Predicate::AllReal => component.flags.all_real,
        Predicate::LowestIsSaddle => component.flags.lowest_is_saddle,
    }
}

/// Partition of a store into components.
#[derive(Debug, Clone)]
pub struct Partition {
    /// Component index of every stored state, by store index.
    pub labels: Vec<u32>,
    /// Sorted by `(ind, card, representative)`.
    pub components: Vec<ComponentSummary>,
}

impl Partition {
    pub fn component_of_key(&self, store: &StateStore, key: &[u8]) -> Option<&ComponentSummary> {
        store
            .find(key)
            .map(|i| &self.components[self.labels[i as usize] as usize])
    }

    pub fn total(&self) -> u64 {
        self.components.iter().map(|c| c.card).sum()
    }
}

struct UnionFind(Vec<u32>);

impl UnionFind {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let up = self.0[self.0[x as usize] as usize];
            self.0[x as usize] = up;
            x = up;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = (a.min(b), a.max(b));
            self.0[hi as usize] = lo;
        }
    }
}

/// Splits the states of a closed run into classes of mutual reachability by
/// the restricted flips of `config` (its mode is ignored).
pub fn components(run: &RunResult, config: &RuleConfig) -> Result<Partition, EngineError> {
    let restricted = config.with_mode(Mode::Restricted);
    let store = &run.store;
    let layout = store.layout();
    let key_len = layout.len();
    let n = store.len();
    let mut uf = UnionFind((0..n as u32).collect());

    for start in (0..n).step_by(BATCH) {
        let end = (start + BATCH).min(n);
        let edges: Vec<Result<Vec<u32>, EngineError>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let keys = image_keys(&store.state(i as u32), &restricted, layout.width)?;
                Ok(keys.chunks_exact(key_len).filter_map(|k| store.find(k)).collect())
            })
            .collect();
        for (offset, targets) in edges.into_iter().enumerate() {
            for j in targets? {
                uf.union((start + offset) as u32, j);
            }
        }
    }

    let mut root_label = vec![u32::MAX; n];
    let mut labels = vec![0u32; n];
    let mut acc: Vec<(u64, i32, u32, ComponentFlags)> = Vec::new();
    for i in 0..n as u32 {
        let r = uf.find(i);
        let state = store.state(i);
        let flags = ComponentFlags::of(&state);
        if root_label[r as usize] == u32::MAX {
            root_label[r as usize] = acc.len() as u32;
            acc.push((0, state.ind(), i, flags));
        }
        let label = root_label[r as usize];
        labels[i as usize] = label;
        let entry = &mut acc[label as usize];
        entry.0 += 1;
        entry.3.merge(&flags);
        if store.key(i) < store.key(entry.2) {
            entry.2 = i;
        }
    }

    let mut order: Vec<usize> = (0..acc.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&acc[a], &acc[b]);
        (x.1, x.0, store.key(x.2)).cmp(&(y.1, y.0, store.key(y.2)))
    });
    let mut renumber = vec![0u32; acc.len()];
    for (new, &old) in order.iter().enumerate() {
        renumber[old] = new as u32;
    }
    for l in &mut labels {
        *l = renumber[*l as usize];
    }
    let components = order
        .iter()
        .map(|&a| {
            let (card, ind, rep, flags) = acc[a];
            ComponentSummary {
                card,
                ind,
                representative: CanonicalKey(store.key(rep).to_vec()),
                flags,
            }
        })
        .collect();
    Ok(Partition { labels, components })
}

/// Summarizes all states of a run as one component.
pub fn summarize(run: &RunResult) -> Option<ComponentSummary> {
    let store = &run.store;
    let mut best: Option<(u32, ComponentFlags)> = None;
    for i in 0..store.len() as u32 {
        let flags = ComponentFlags::of(&store.state(i));
        best = Some(match best {
            None => (i, flags),
            Some((rep, mut acc)) => {
                acc.merge(&flags);
                (if store.key(i) < store.key(rep) { i } else { rep }, acc)
            }
        });
    }
    best.map(|(rep, flags)| ComponentSummary {
        card: run.total(),
        ind: store.state(0).ind(),
        representative: CanonicalKey(store.key(rep).to_vec()),
        flags,
    })
}

/// The component of `seed`, enumerated under the restricted flips of
/// `config`. Fails with a partial run if the budget stops it.
pub fn component_of(
    seed: &VirtualMorsification,
    config: &RuleConfig,
    options: &EnumerateOptions,
) -> Result<ComponentSummary, ComponentError> {
    let run = enumerate(seed, &config.with_mode(Mode::Restricted), options)?;
    if !run.closed() {
        return Err(ComponentError::Budget {
            reached: run.total(),
            stop: run.stop.name(),
        });
    }
    Ok(summarize(&run).expect("a run holds at least its seed"))
}

#[derive(Debug, thiserror::Error)]
pub enum ComponentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("component enumeration stopped ({stop}) after {reached} states")]
    Budget { reached: u64, stop: &'static str },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{PointAttr, Sign};

    fn seed() -> VirtualMorsification {
        let rows = vec![vec![-2, 1, 0], vec![1, -2, 1], vec![0, 1, -2]];
        let points = vec![
            PointAttr::real(1, Sign::Negative),
            PointAttr::real(2, Sign::Positive),
            PointAttr::real(1, Sign::Positive),
        ];
        VirtualMorsification::from_rows(&rows, points).unwrap()
    }

    #[test]
    fn partition_covers_the_run_and_fixes_ind() {
        let config = RuleConfig::main().with_m_bound(Some(2));
        let run = enumerate(&seed(), &config, &EnumerateOptions::default()).unwrap();
        let p = components(&run, &config).unwrap();
        assert_eq!(p.total(), run.total());
        assert!(p.components.len() > 1);
        for i in 0..run.store.len() as u32 {
            assert_eq!(
                run.store.state(i).ind(),
                p.components[p.labels[i as usize] as usize].ind
            );
        }
        let keys: Vec<_> = p
            .components
            .iter()
            .map(|c| (c.ind, c.card, c.representative.clone()))
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn component_of_matches_its_class() {
        let config = RuleConfig::main().with_m_bound(Some(2));
        let run = enumerate(&seed(), &config, &EnumerateOptions::default()).unwrap();
        let p = components(&run, &config).unwrap();
        let one = component_of(&seed(), &config, &EnumerateOptions::default()).unwrap();
        assert_eq!(p.components[p.labels[0] as usize], one);
        assert_eq!(query_component(&one, Predicate::AllReal), one.flags.all_real);
        assert_eq!(
            Predicate::from_name(Predicate::LowestIsSaddle.name()),
            Some(Predicate::LowestIsSaddle)
        );
    }

    #[test]
    fn tight_budget_is_an_error() {
        let options = EnumerateOptions {
            budget: crate::engine::Budget::states(1),
            ..EnumerateOptions::default()
        };
        let config = RuleConfig::main().with_m_bound(Some(2));
        assert!(matches!(
            component_of(&seed(), &config, &options),
            Err(ComponentError::Budget { .. })
        ));
    }
}
