//! Enumeration and classification of virtual morsifications of real
//! function singularities.

pub mod components;
pub mod engine;
pub mod fixtures;
pub mod graded;
pub mod key;
pub mod reports;
pub mod rules;
pub mod rundir;
pub mod scale;
pub mod seed;
pub mod state;
pub mod store;

pub use components::{component_of, components, query_component, ComponentSummary, Partition, Predicate};
pub use engine::{enumerate, resume, Budget, EnumerateOptions, RunResult, StopReason};
pub use fixtures::FixtureSet;
pub use graded::{graded_graph, GradedGraph};
pub use key::{canonical_key, CanonicalKey, Gauge, KeyLayout, Width};
pub use reports::{diff_runs, ind_histogram_table, verify_against_fixtures};
pub use rules::{
    applicable_flips, apply, inverse_of, BirthRule, ComplexSwapRule, Flip, FlipKind, Mode, PairPlacement, RealSwapRule,
    RuleConfig,
};
pub use scale::{standard_scale, ScaleResult};
pub use seed::{ingest_seed, parse_seed, SeedFile};
pub use state::{PointAttr, Reality, Sign, VirtualMorsification};
pub use store::StateStore;
