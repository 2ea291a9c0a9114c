//! Canonical byte encoding of states.
//!
//! Layout for a state with `mu` points (see `docs/formats.md`):
//!
//! * `mu*(mu-1)/2` upper-triangular off-diagonal entries in row-major order,
//!   each a two's-complement `i8` (narrow) or little-endian `i16` (wide);
//! * `ceil(mu/2)` attribute bytes, two 4-bit codes per byte, the even slot in
//!   the low nibble. Code bits 0-1: inertia 0..=2, or 3 for a complex member;
//!   bit 2: set when the value is negative; bit 3: zero.
//!
//! The diagonal is implicit (always -2) and so is `mu`, which is fixed per
//! store.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{PointAttr, Sign, StateError, VirtualMorsification, SELF_INTERSECTION};

/// Treatment of the sign ambiguity of vanishing cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    /// Matrices are compared literally.
    None,
    /// Matrices are compared up to `Δ_i ↦ -Δ_i`, the two cycles of a
    /// conjugate pair changing sign together.
    GreedySign,
}

impl Gauge {
    pub fn name(self) -> &'static str {
        match self {
            Gauge::None => "none",
            Gauge::GreedySign => "greedy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "none" => Some(Gauge::None),
            "greedy" | "greedy-sign" => Some(Gauge::GreedySign),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Width {
    Narrow,
    Wide,
}

impl Width {
    pub fn bytes(self) -> usize {
        match self {
            Width::Narrow => 1,
            Width::Wide => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyLayout {
    pub mu: usize,
    pub width: Width,
}

impl KeyLayout {
    pub fn new(mu: usize, width: Width) -> Self {
        KeyLayout { mu, width }
    }

    pub fn triangle(&self) -> usize {
        self.mu * (self.mu - 1) / 2
    }

    pub fn len(&self) -> usize {
        self.triangle() * self.width.bytes() + self.mu.div_ceil(2)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("entry {value} at ({row}, {col}) does not fit the {width:?} encoding")]
    Overflow {
        row: usize,
        col: usize,
        value: i32,
        width: Width,
    },
    #[error("key has {got} bytes, layout expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("invalid attribute code {code:#x} at slot {slot}")]
    Attribute { slot: usize, code: u8 },
    #[error("decoded state is invalid: {0}")]
    State(#[from] StateError),
}

/// Packed, gauge-normalized state.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(pub Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalKey({})", hex::encode(&self.0))
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(&self.0))
    }
}

fn attr_code(p: &PointAttr) -> u8 {
    let kind = if p.is_complex() { 3 } else { p.inertia.unwrap() };
    let neg = if p.sign == Sign::Negative { 4 } else { 0 };
    kind | neg
}

fn attr_from_code(slot: usize, code: u8) -> Result<PointAttr, KeyError> {
    if code & 0x8 != 0 {
        return Err(KeyError::Attribute { slot, code });
    }
    let sign = if code & 4 != 0 { Sign::Negative } else { Sign::Positive };
    Ok(match code & 3 {
        3 => PointAttr::complex(sign),
        q => PointAttr::real(q, sign),
    })
}

/// Per-cycle signs that bring `state` to its gauge representative.
///
/// Cycles are visited breadth-first over the graph of nonzero off-diagonal
/// entries, starting from the lowest unvisited slot and scanning neighbours
/// in slot order; each newly reached cycle is oriented so that its entry with
/// the cycle it was reached from is positive, and the partner of a pair
/// member takes the same sign and joins the queue. The spanning forest depends
/// only on the zero pattern, which the gauge group preserves, so the
/// representative is unique on every orbit.
pub fn gauge_signs(state: &VirtualMorsification) -> Vec<i32> {
    let mu = state.mu();
    let mut signs = vec![0i32; mu];
    let mut queue = Vec::with_capacity(mu);
    for root in 0..mu {
        if signs[root] != 0 {
            continue;
        }
        signs[root] = 1;
        queue.clear();
        queue.push(root);
        if let Some(w) = partner(state, root) {
            signs[w] = 1;
            queue.push(w);
        }
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for v in 0..mu {
                let e = state.entry(u, v);
                if v != u && e != 0 && signs[v] == 0 {
                    signs[v] = signs[u] * e.signum();
                    queue.push(v);
                    if let Some(w) = partner(state, v) {
                        if signs[w] == 0 {
                            signs[w] = signs[v];
                            queue.push(w);
                        }
                    }
                }
            }
        }
    }
    signs
}

fn partner(state: &VirtualMorsification, v: usize) -> Option<usize> {
    let pts = state.points();
    if !pts[v].is_complex() {
        return None;
    }
    let mut slot = 0;
    while slot < v {
        slot += if pts[slot].is_complex() { 2 } else { 1 };
    }
    Some(if slot == v { v + 1 } else { v - 1 })
}

/// Gram matrix (row-major) of the gauge representative.
pub fn normalized_gram(state: &VirtualMorsification, gauge: Gauge) -> Vec<i32> {
    match gauge {
        Gauge::None => state.gram().to_vec(),
        Gauge::GreedySign => {
            let mu = state.mu();
            let signs = gauge_signs(state);
            let mut g = state.gram().to_vec();
            for i in 0..mu {
                for j in 0..mu {
                    g[i * mu + j] *= signs[i] * signs[j];
                }
            }
            g
        }
    }
}

pub fn canonicalize(state: &VirtualMorsification, gauge: Gauge) -> VirtualMorsification {
    match gauge {
        Gauge::None => state.clone(),
        Gauge::GreedySign => VirtualMorsification::from_parts_unchecked(
            state.mu(),
            normalized_gram(state, gauge),
            state.points().to_vec(),
        ),
    }
}

/// Encodes the gauge representative of `state`.
pub fn canonical_key(state: &VirtualMorsification, gauge: Gauge, width: Width) -> Result<CanonicalKey, KeyError> {
    let mut out = Vec::with_capacity(KeyLayout::new(state.mu(), width).len());
    encode_into(state, gauge, width, &mut out)?;
    Ok(CanonicalKey(out))
}

/// Appends the encoding of `state` to `out`; on error `out` may hold a
/// partial key.
pub fn encode_into(
    state: &VirtualMorsification,
    gauge: Gauge,
    width: Width,
    out: &mut Vec<u8>,
) -> Result<(), KeyError> {
    let mu = state.mu();
    let g = normalized_gram(state, gauge);
    for i in 0..mu {
        for j in (i + 1)..mu {
            let v = g[i * mu + j];
            match width {
                Width::Narrow => {
                    let b = i8::try_from(v).map_err(|_| KeyError::Overflow {
                        row: i,
                        col: j,
                        value: v,
                        width,
                    })?;
                    out.push(b as u8);
                }
                Width::Wide => {
                    let w = i16::try_from(v).map_err(|_| KeyError::Overflow {
                        row: i,
                        col: j,
                        value: v,
                        width,
                    })?;
                    out.extend_from_slice(&w.to_le_bytes());
                }
            }
        }
    }
    for chunk in state.points().chunks(2) {
        let lo = attr_code(&chunk[0]);
        let hi = chunk.get(1).map_or(0, attr_code);
        out.push(lo | (hi << 4));
    }
    Ok(())
}

/// Decodes a key; validates the result.
pub fn decode(bytes: &[u8], layout: KeyLayout) -> Result<VirtualMorsification, KeyError> {
    if bytes.len() != layout.len() {
        return Err(KeyError::Length {
            expected: layout.len(),
            got: bytes.len(),
        });
    }
    let mu = layout.mu;
    let mut gram = vec![0i32; mu * mu];
    let mut pos = 0;
    for i in 0..mu {
        gram[i * mu + i] = SELF_INTERSECTION;
        for j in (i + 1)..mu {
            let v = match layout.width {
                Width::Narrow => {
                    let v = bytes[pos] as i8 as i32;
                    pos += 1;
                    v
                }
                Width::Wide => {
                    let v = i16::from_le_bytes([bytes[pos], bytes[pos + 1]]) as i32;
                    pos += 2;
                    v
                }
            };
            gram[i * mu + j] = v;
            gram[j * mu + i] = v;
        }
    }
    let mut points = Vec::with_capacity(mu);
    for slot in 0..mu {
        let byte = bytes[pos + slot / 2];
        let code = if slot % 2 == 0 { byte & 0xf } else { byte >> 4 };
        points.push(attr_from_code(slot, code)?);
    }
    Ok(VirtualMorsification::new(mu, gram, points)?)
}

/// Decodes a key produced by this module without re-validating it.
pub(crate) fn decode_trusted(bytes: &[u8], layout: KeyLayout) -> VirtualMorsification {
    let mu = layout.mu;
    let mut gram = vec![0i32; mu * mu];
    let mut pos = 0;
    for i in 0..mu {
        gram[i * mu + i] = SELF_INTERSECTION;
        for j in (i + 1)..mu {
            let v = match layout.width {
                Width::Narrow => {
                    let v = bytes[pos] as i8 as i32;
                    pos += 1;
                    v
                }
                Width::Wide => {
                    let v = i16::from_le_bytes([bytes[pos], bytes[pos + 1]]) as i32;
                    pos += 2;
                    v
                }
            };
            gram[i * mu + j] = v;
            gram[j * mu + i] = v;
        }
    }
    let points = (0..mu)
        .map(|slot| {
            let byte = bytes[pos + slot / 2];
            let code = if slot % 2 == 0 { byte & 0xf } else { byte >> 4 };
            let sign = if code & 4 != 0 { Sign::Negative } else { Sign::Positive };
            match code & 3 {
                3 => PointAttr::complex(sign),
                q => PointAttr::real(q, sign),
            }
        })
        .collect();
    VirtualMorsification::from_parts_unchecked(mu, gram, points)
}
