//! Standard scales: one base state with the zero level in every gap.

use crate::components::{component_of, ComponentError, ComponentSummary};
use crate::engine::EnumerateOptions;
use crate::rules::RuleConfig;
use crate::state::{StateError, VirtualMorsification};

#[derive(Debug, Clone)]
pub struct ScaleMember {
    /// Number of negative values.
    pub k: usize,
    pub state: VirtualMorsification,
    pub component: ComponentSummary,
}

#[derive(Debug, Clone)]
pub struct ScaleResult {
    pub members: Vec<ScaleMember>,
}

impl ScaleResult {
    /// `(card, ind)` for `k = 0..=mu`.
    pub fn sequence(&self) -> Vec<(u64, i32)> {
        self.members
            .iter()
            .map(|m| (m.component.card, m.component.ind))
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScaleError {
    #[error("scale member k = {k}: {source}")]
    Member {
        k: usize,
        #[source]
        source: StateError,
    },
    #[error("scale member k = {k}: {source}")]
    Component {
        k: usize,
        #[source]
        source: ComponentError,
    },
}

/// The states of the standard scale of `base` that do not split a pair.
pub fn scale_states(base: &VirtualMorsification) -> Vec<(usize, Result<VirtualMorsification, StateError>)> {
    (0..=base.mu()).map(|k| (k, base.with_negative_count(k))).collect()
}

/// Annotates every member of the standard scale of `base` with its
/// restricted component.
pub fn standard_scale(
    base: &VirtualMorsification,
    config: &RuleConfig,
    options: &EnumerateOptions,
) -> Result<ScaleResult, ScaleError> {
    let mut members = Vec::with_capacity(base.mu() + 1);
    for (k, state) in scale_states(base) {
        let state = state.map_err(|source| ScaleError::Member { k, source })?;
        let component = component_of(&state, config, options).map_err(|source| ScaleError::Component { k, source })?;
        members.push(ScaleMember { k, state, component });
    }
    Ok(ScaleResult { members })
}
