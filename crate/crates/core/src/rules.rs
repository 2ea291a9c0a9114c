//! Flip generators between virtual morsifications.
//!
//! Vanishing cycles are taken along paths from the zero level: a real value
//! is reached along the real axis, bypassing the intermediate real values
//! from above, and a complex value along the same route followed by a
//! vertical segment. A conjugate pair occupies two adjacent slots, the cycle
//! of the value in the upper half-plane first; both members carry one sign
//! (pair members are only ever negated together, so `<z, z̄>` is an
//! invariant of the pair).
//!
//! Under [`PairPlacement::Floating`] the position of a pair among the real
//! values, and its side of the zero level, are not part of the state: moving
//! a pair past real values only changes the basis, and states are kept in
//! the normal form where every pair sits just above the zero level, in the
//! order of the real parts of their values. Flips that need a pair elsewhere
//! move it there, act, and renormalize. [`PairPlacement::Pinned`] keeps the
//! positions and offers the pair moves as flips.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::{normalized_gram, Gauge};
use crate::state::{PointAttr, Sign, VirtualMorsification};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Surgeries that do not cross the discriminant.
    Restricted,
    /// Adds transversal crossings of the zero level by real critical values.
    Main,
}

/// Which inertia indices a birth may assign to the two new real points, and
/// symmetrically which real pairs may die.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BirthRule {
    /// Fold normal form, `(lower, upper) ∈ {(2, 1), (1, 0)}`, with the type
    /// fixed by the pair: `<z, z̄> = +1` gives a minimum and a saddle,
    /// `-1` a saddle and a maximum.
    Oriented,
    /// Fold normal form; either type from any pair with `<z, z̄> = ±1`.
    Fold,
    /// Any two inertia indices differing by one, in either order.
    Any,
}

/// How conjugate pairs exchange positions with neighbouring blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplexSwapRule {
    /// Monodromy of the motion; two variants when two pairs pass each other
    /// (which one passes in front).
    Braid,
    /// Pairs move only past blocks orthogonal to them.
    Orthogonal,
}

/// How two adjacent real values exchange positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealSwapRule {
    /// Only orthogonal cycles; real values with nonzero intersection index
    /// cannot meet.
    Orthogonal,
    /// Adds both reflections for non-orthogonal neighbours.
    Reflection,
}

/// Whether the positions of conjugate pairs among the real values are part
/// of the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairPlacement {
    Floating,
    Pinned,
}

macro_rules! named_enum {
    ($ty:ty { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $(<$ty>::$variant => $name),* }
            }

            pub fn from_name(name: &str) -> Option<Self> {
                match name { $($name => Some(<$ty>::$variant),)* _ => None }
            }
        }
    };
}

named_enum!(Mode { Restricted => "restricted", Main => "main" });
named_enum!(BirthRule { Oriented => "oriented", Fold => "fold", Any => "any" });
named_enum!(ComplexSwapRule { Braid => "braid", Orthogonal => "orthogonal" });
named_enum!(RealSwapRule { Orthogonal => "orthogonal", Reflection => "reflection" });
named_enum!(PairPlacement { Floating => "floating", Pinned => "pinned" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleConfig {
    pub mode: Mode,
    pub m_bound: Option<u32>,
    pub gauge: Gauge,
    pub birth_rule: BirthRule,
    pub complex_swap_rule: ComplexSwapRule,
    pub real_swap_rule: RealSwapRule,
    pub pair_placement: PairPlacement,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            mode: Mode::Main,
            m_bound: None,
            gauge: Gauge::GreedySign,
            birth_rule: BirthRule::Oriented,
            complex_swap_rule: ComplexSwapRule::Braid,
            real_swap_rule: RealSwapRule::Orthogonal,
            pair_placement: PairPlacement::Floating,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("m-bound must be at least 1")]
    ZeroBound,
    #[error("flip {0} is not applicable to this state")]
    NotApplicable(Flip),
}

impl RuleConfig {
    pub fn main() -> Self {
        RuleConfig::default()
    }

    pub fn restricted() -> Self {
        RuleConfig {
            mode: Mode::Restricted,
            ..RuleConfig::default()
        }
    }

    pub fn with_mode(self, mode: Mode) -> Self {
        RuleConfig { mode, ..self }
    }

    pub fn with_m_bound(self, m_bound: Option<u32>) -> Self {
        RuleConfig { m_bound, ..self }
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        match self.m_bound {
            Some(0) => Err(RuleError::ZeroBound),
            _ => Ok(()),
        }
    }

    /// Stable one-line description recorded in manifests.
    pub fn describe(&self) -> String {
        format!(
            "mode={} m-bound={} gauge={} birth-rule={} complex-swap-rule={} real-swap-rule={} pair-placement={}",
            self.mode.name(),
            self.m_bound.map_or("none".to_string(), |m| m.to_string()),
            self.gauge.name(),
            self.birth_rule.name(),
            self.complex_swap_rule.name(),
            self.real_swap_rule.name(),
            self.pair_placement.name(),
        )
    }

    fn inertia_pairs(&self) -> &'static [(u8, u8)] {
        match self.birth_rule {
            BirthRule::Oriented | BirthRule::Fold => &[(2, 1), (1, 0)],
            BirthRule::Any => &[(2, 1), (1, 0), (1, 2), (0, 1)],
        }
    }

    /// Pair orientations a death may leave: the reversed one only when
    /// births ignore orientation.
    fn death_orientations(&self) -> &'static [bool] {
        match self.birth_rule {
            BirthRule::Oriented => &[false],
            BirthRule::Fold | BirthRule::Any => &[false, true],
        }
    }

    fn birth_allowed(&self, pair_entry: i32, inertia: (u8, u8)) -> bool {
        match self.birth_rule {
            BirthRule::Oriented => pair_entry == pair_orientation(inertia),
            BirthRule::Fold | BirthRule::Any => pair_entry.abs() == 1,
        }
    }
}

/// `<z, z̄>` of the pair left by the death of real points of the given
/// inertia indices: `+1` when a minimum is involved, `-1` otherwise.
pub fn pair_orientation((lower, upper): (u8, u8)) -> i32 {
    if lower.max(upper) == 2 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlipKind {
    /// The block at `slot` and the next block exchange; for two pairs the
    /// left one passes in front.
    ReorderLeft,
    /// As `ReorderLeft` with the right block in front.
    ReorderRight,
    Death,
    Birth,
    CrossZeroReal,
    CrossZeroComplex,
}

impl FlipKind {
    pub fn name(self) -> &'static str {
        match self {
            FlipKind::ReorderLeft => "reorder-left",
            FlipKind::ReorderRight => "reorder-right",
            FlipKind::Death => "death",
            FlipKind::Birth => "birth",
            FlipKind::CrossZeroReal => "cross-zero-real",
            FlipKind::CrossZeroComplex => "cross-zero-complex",
        }
    }
}

/// One surgery instance.
///
/// `slot` is the first slot of the moving block, except for births, where
/// it is the slot of the lower new real point in the image and `pair` is
/// the index (in slot order) of the pair that is born from. Under floating
/// pair placement `pair` of a death is the place of the new pair among the
/// pairs of the image. For deaths and births `inertia` holds the (lower,
/// upper) inertia indices of the real points involved. A `reversed` death
/// leaves the pair with `<z, z̄>` opposite to [`pair_orientation`]; a birth
/// `below` the zero level gives two negative critical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Flip {
    pub kind: FlipKind,
    pub slot: usize,
    pub inertia: Option<(u8, u8)>,
    pub pair: Option<u8>,
    pub reversed: bool,
    pub below: bool,
}

impl Flip {
    pub fn new(kind: FlipKind, slot: usize) -> Self {
        Flip {
            kind,
            slot,
            inertia: None,
            pair: None,
            reversed: false,
            below: false,
        }
    }

    pub fn death(slot: usize, inertia: (u8, u8)) -> Self {
        Flip {
            inertia: Some(inertia),
            ..Flip::new(FlipKind::Death, slot)
        }
    }

    pub fn birth(slot: usize, inertia: (u8, u8), pair: usize) -> Self {
        Flip {
            inertia: Some(inertia),
            pair: Some(pair as u8),
            ..Flip::new(FlipKind::Birth, slot)
        }
    }
}

impl fmt::Display for Flip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind.name(), self.slot)?;
        if let Some((lo, hi)) = self.inertia {
            write!(f, "({lo},{hi})")?;
        }
        if let Some(p) = self.pair {
            write!(f, "/p{p}")?;
        }
        if self.reversed {
            write!(f, "~")?;
        }
        if self.below {
            write!(f, "-")?;
        }
        Ok(())
    }
}

/// Mutable scratch copy of a state.
#[derive(Clone)]
struct Work {
    mu: usize,
    g: Vec<i32>,
    pts: Vec<PointAttr>,
    /// Set when an entry left the `i32` range; the image is discarded.
    overflow: bool,
}

impl Work {
    fn from(state: &VirtualMorsification) -> Self {
        let (mu, g, pts) = state.clone().into_parts();
        Work {
            mu,
            g,
            pts,
            overflow: false,
        }
    }

    fn finish(self) -> VirtualMorsification {
        VirtualMorsification::from_parts_unchecked(self.mu, self.g, self.pts)
    }

    fn at(&self, i: usize, j: usize) -> i32 {
        self.g[i * self.mu + j]
    }

    fn set(&mut self, i: usize, j: usize, v: i32) {
        self.g[i * self.mu + j] = v;
        self.g[j * self.mu + i] = v;
    }

    fn negate(&mut self, i: usize) {
        for k in 0..self.mu {
            if k != i {
                let v = -self.at(i, k);
                self.set(i, k, v);
            }
        }
    }

    /// Replaces cycle `i` by its reflection in cycle `j`.
    fn reflect(&mut self, i: usize, j: usize) {
        let c = self.at(i, j);
        if c == 0 {
            return;
        }
        for k in 0..self.mu {
            if k == i {
                continue;
            }
            match c.checked_mul(self.at(j, k)).and_then(|d| d.checked_add(self.at(i, k))) {
                Some(v) => self.set(i, k, v),
                None => self.overflow = true,
            }
        }
        self.set(i, j, -c);
    }

    /// Moves the block `[a, a + la)` behind the block of length `lb` after it.
    fn swap_blocks(&mut self, a: usize, la: usize, lb: usize) {
        let mu = self.mu;
        let mut order: Vec<usize> = (0..mu).collect();
        order[a..a + la + lb].rotate_left(la);
        let g = &self.g;
        self.g = (0..mu * mu).map(|x| g[order[x / mu] * mu + order[x % mu]]).collect();
        self.pts = order.iter().map(|&o| self.pts[o]).collect();
    }

    /// Exchanges the block of length `la` at `a` with the block of length
    /// `lb` after it. For two real values `front` reflects the left cycle in
    /// the right one, otherwise the right in the left (orthogonal values
    /// just swap). For two pairs `front` puts the left pair in front.
    fn exchange(&mut self, a: usize, la: usize, lb: usize, front: bool) {
        let b = a + la;
        match (la, lb) {
            (1, 1) => {
                if front {
                    self.reflect(a, b);
                } else {
                    self.reflect(b, a);
                }
            }
            (2, 1) => self.reflect(a + 1, b),
            (1, 2) => self.reflect(b + 1, a),
            (2, 2) => {
                if front {
                    self.reflect(a, b);
                    self.reflect(a + 1, b + 1);
                } else {
                    self.reflect(b, a);
                    self.reflect(b + 1, a + 1);
                }
            }
            _ => unreachable!("blocks have length 1 or 2"),
        }
        self.swap_blocks(a, la, lb);
    }

    fn set_sign(&mut self, start: usize, len: usize, sign: Sign) {
        for p in &mut self.pts[start..start + len] {
            *p = p.with_sign(sign);
        }
    }

    /// Merges the adjacent real points at `slot`, `slot + 1` into a pair.
    fn death(&mut self, slot: usize, reversed: bool) {
        let sign = self.pts[slot].sign;
        let inertia = (self.pts[slot].inertia.unwrap(), self.pts[slot + 1].inertia.unwrap());
        let c = self.at(slot, slot + 1);
        if sign == Sign::Positive {
            self.reflect(slot, slot + 1);
        } else {
            self.reflect(slot + 1, slot);
            self.swap_blocks(slot, 1, 1);
        }
        if (c == pair_orientation(inertia)) != reversed {
            self.negate(slot + 1);
        }
        let farther = if sign == Sign::Positive {
            slot + 2..self.mu
        } else {
            0..slot
        };
        for x in farther {
            self.reflect(x, slot);
        }
        self.pts[slot] = PointAttr::complex(sign);
        self.pts[slot + 1] = PointAttr::complex(sign);
    }

    /// Splits the pair at `slot` into two real points; inverts `death` up to
    /// the sign of the cycles.
    fn birth(&mut self, slot: usize, (lower, upper): (u8, u8)) {
        let sign = self.pts[slot].sign;
        let farther = if sign == Sign::Positive {
            slot + 2..self.mu
        } else {
            0..slot
        };
        for x in farther {
            self.reflect(x, slot);
        }
        if sign == Sign::Positive {
            self.reflect(slot, slot + 1);
        } else {
            self.swap_blocks(slot, 1, 1);
            self.reflect(slot + 1, slot);
        }
        self.pts[slot] = PointAttr::real(lower, sign);
        self.pts[slot + 1] = PointAttr::real(upper, sign);
    }

    /// Moves every pair to the zero level, keeping the order of pairs.
    fn normalize(&mut self) {
        loop {
            let bl = blocks(&self.pts);
            let mut moved = false;
            for (i, &(start, len)) in bl.iter().enumerate() {
                if len != 2 {
                    continue;
                }
                match self.pts[start].sign {
                    Sign::Negative => match bl.get(i + 1) {
                        Some(&(next, 1)) if self.pts[next].sign == Sign::Negative => {
                            self.exchange(start, 2, 1, true);
                        }
                        Some(&(next, _)) if self.pts[next].sign == Sign::Negative => continue,
                        _ => self.set_sign(start, 2, Sign::Positive),
                    },
                    Sign::Positive => match i.checked_sub(1).map(|p| bl[p]) {
                        Some((prev, 1)) if self.pts[prev].sign == Sign::Positive => {
                            self.exchange(prev, 1, 2, true);
                        }
                        _ => continue,
                    },
                }
                moved = true;
                break;
            }
            if !moved {
                return;
            }
        }
    }
}

/// Partition of the slots into real singletons and conjugate pairs, as
/// `(start, len)` in slot order.
pub fn blocks(points: &[PointAttr]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(points.len());
    let mut slot = 0;
    while slot < points.len() {
        let len = if points[slot].is_complex() { 2 } else { 1 };
        out.push((slot, len));
        slot += len;
    }
    out
}

fn blocks_orthogonal(state: &VirtualMorsification, a: (usize, usize), b: (usize, usize)) -> bool {
    (a.0..a.0 + a.1).all(|i| (b.0..b.0 + b.1).all(|j| state.entry(i, j) == 0))
}

/// The representative of `state` with every pair just above the zero level.
pub fn normalize_pairs(state: &VirtualMorsification) -> VirtualMorsification {
    let mut w = Work::from(state);
    w.normalize();
    w.finish()
}

/// Whether `state` is its own pair normal form.
pub fn is_pair_normal(state: &VirtualMorsification) -> bool {
    let k = state.negative_count();
    let pairs = state.mu() - state.real_count();
    let pts = state.points();
    (0..state.mu()).all(|s| pts[s].is_complex() == (s >= k && s < k + pairs))
        && pts[k..k + pairs].iter().all(|p| p.sign == Sign::Positive)
}

/// Brings a seed into the form expected under `config`.
pub fn prepare(state: &VirtualMorsification, config: &RuleConfig) -> VirtualMorsification {
    match config.pair_placement {
        PairPlacement::Floating => normalize_pairs(state),
        PairPlacement::Pinned => state.clone(),
    }
}

fn within_bound(state: &VirtualMorsification, config: &RuleConfig) -> bool {
    config.m_bound.is_none_or(|m| state.entry_bound() <= m)
}

struct Sink<'a> {
    config: &'a RuleConfig,
    out: Vec<(Flip, VirtualMorsification)>,
}

impl Sink<'_> {
    fn push(&mut self, flip: Flip, mut w: Work) {
        if self.config.pair_placement == PairPlacement::Floating {
            w.normalize();
        }
        if w.overflow {
            return;
        }
        let image = w.finish();
        if within_bound(&image, self.config) {
            self.out.push((flip, image));
        }
    }
}

/// All flips applicable to `state` under `config`, paired with their images.
/// Flips whose image violates the m-bound are omitted. Under floating pair
/// placement `state` must be in pair normal form (see [`prepare`]).
pub fn expand(state: &VirtualMorsification, config: &RuleConfig) -> Vec<(Flip, VirtualMorsification)> {
    let mut sink = Sink {
        config,
        out: Vec::new(),
    };
    let pts = state.points();
    let bl = blocks(pts);
    let base = Work::from(state);

    for w in bl.windows(2) {
        let (l, r) = (w[0], w[1]);
        if pts[l.0].sign != pts[r.0].sign {
            continue;
        }
        let orthogonal = blocks_orthogonal(state, l, r);
        let variants: &[bool] = match (l.1, r.1) {
            (1, 1) if orthogonal => &[true],
            (1, 1) => match config.real_swap_rule {
                RealSwapRule::Orthogonal => &[],
                RealSwapRule::Reflection => &[true, false],
            },
            _ if config.pair_placement == PairPlacement::Floating && l.1 + r.1 == 3 => &[],
            _ if !orthogonal && config.complex_swap_rule == ComplexSwapRule::Orthogonal => &[],
            (2, 2) if !orthogonal => &[true, false],
            _ => &[true],
        };
        for &front in variants {
            let kind = if front {
                FlipKind::ReorderLeft
            } else {
                FlipKind::ReorderRight
            };
            let mut img = base.clone();
            img.exchange(l.0, l.1, r.1, front);
            sink.push(Flip::new(kind, l.0), img);
        }
    }

    match config.pair_placement {
        PairPlacement::Pinned => {
            for (slot, inertia) in deaths(state, &bl, config) {
                for &reversed in config.death_orientations() {
                    let mut img = base.clone();
                    img.death(slot, reversed);
                    sink.push(
                        Flip {
                            reversed,
                            ..Flip::death(slot, inertia)
                        },
                        img,
                    );
                }
            }
            pinned_moves(state, &base, &bl, &mut sink);
        }
        PairPlacement::Floating => {
            floating_deaths(state, &base, &bl, &mut sink);
            floating_moves(state, &base, &mut sink);
        }
    }
    sink.out
}

/// Adjacent real points that may die, as (lower slot, inertia).
fn deaths(state: &VirtualMorsification, bl: &[(usize, usize)], config: &RuleConfig) -> Vec<(usize, (u8, u8))> {
    let pts = state.points();
    bl.windows(2)
        .filter(|w| w[0].1 == 1 && w[1].1 == 1 && pts[w[0].0].sign == pts[w[1].0].sign)
        .filter(|w| state.entry(w[0].0, w[1].0).abs() == 1)
        .map(|w| (w[0].0, (pts[w[0].0].inertia.unwrap(), pts[w[1].0].inertia.unwrap())))
        .filter(|(_, inertia)| config.inertia_pairs().contains(inertia))
        .collect()
}

/// Deaths in pair normal form. The new pair may take any place `i` among
/// the existing pairs: the pairs after it (above the zero level) or before
/// it (below) are first moved past the dying points.
fn floating_deaths(state: &VirtualMorsification, base: &Work, bl: &[(usize, usize)], sink: &mut Sink<'_>) {
    let mu = state.mu();
    let k = state.negative_count();
    let p = (mu - state.real_count()) / 2;
    let cluster = |i: usize| k + 2 * i;
    for (slot, inertia) in deaths(state, bl, sink.config) {
        for (i, &reversed) in (0..=p).flat_map(|i| sink.config.death_orientations().iter().map(move |r| (i, r))) {
            let mut w = base.clone();
            let at = if slot >= k {
                // `g` positive real values under the dying points
                let g = slot - k - 2 * p;
                for j in (i..p).rev() {
                    for at in cluster(j)..cluster(j) + g + 2 {
                        w.exchange(at, 2, 1, true);
                    }
                }
                k + 2 * i + g
            } else {
                for j in 0..i {
                    w.set_sign(cluster(j), 2, Sign::Negative);
                }
                for j in 0..i {
                    let mut at = cluster(j);
                    while at > slot + 2 * j {
                        w.exchange(at - 1, 1, 2, true);
                        at -= 1;
                    }
                }
                slot + 2 * i
            };
            w.death(at, reversed);
            let flip = Flip {
                pair: Some(i as u8),
                reversed,
                ..Flip::death(slot, inertia)
            };
            sink.push(flip, w);
        }
    }
}

fn push_births(work: &Work, slot: usize, image_slot: usize, pair: usize, sink: &mut Sink<'_>) {
    let entry = work.at(slot, slot + 1);
    for &inertia in sink.config.inertia_pairs() {
        if sink.config.birth_allowed(entry, inertia) {
            let mut img = work.clone();
            img.birth(slot, inertia);
            let below = work.pts[slot].sign == Sign::Negative;
            sink.push(
                Flip {
                    below,
                    ..Flip::birth(image_slot, inertia, pair)
                },
                img,
            );
        }
    }
}

fn pinned_moves(state: &VirtualMorsification, base: &Work, bl: &[(usize, usize)], sink: &mut Sink<'_>) {
    let pairs: Vec<usize> = bl.iter().filter(|b| b.1 == 2).map(|b| b.0).collect();
    for (i, &start) in pairs.iter().enumerate() {
        push_births(base, start, start, i, sink);
    }
    let k = state.negative_count();
    for &(start, len) in bl {
        if start + len != k && start != k {
            continue;
        }
        let kind = if len == 2 {
            FlipKind::CrossZeroComplex
        } else if sink.config.mode == Mode::Main {
            FlipKind::CrossZeroReal
        } else {
            continue;
        };
        let mut img = base.clone();
        let sign = state.points()[start].sign.flipped();
        img.set_sign(start, len, sign);
        sink.push(Flip::new(kind, start), img);
    }
}

fn floating_moves(state: &VirtualMorsification, base: &Work, sink: &mut Sink<'_>) {
    debug_assert!(is_pair_normal(state), "state is not in pair normal form");
    let mu = state.mu();
    let k = state.negative_count();
    let p = (mu - state.real_count()) / 2;
    let positives = mu - k - 2 * p;
    let cluster = |i: usize| k + 2 * i;

    for i in 0..p {
        // below the zero level, `g` negative real values under the pair
        for g in 0..=k {
            let mut w = base.clone();
            for j in 0..=i {
                w.set_sign(cluster(j), 2, Sign::Negative);
            }
            for j in 0..=i {
                let mut at = cluster(j);
                while at > g + 2 * j {
                    w.exchange(at - 1, 1, 2, true);
                    at -= 1;
                }
            }
            push_births(&w, g + 2 * i, g, i, sink);
        }
        // above the zero level, `g` positive real values under the pair
        for g in 0..=positives {
            let mut w = base.clone();
            for j in (i..p).rev() {
                for at in cluster(j)..cluster(j) + g {
                    w.exchange(at, 2, 1, true);
                }
            }
            push_births(&w, cluster(i) + g, k + 2 * (p - 1) + g, i, sink);
        }
    }

    if sink.config.mode == Mode::Main {
        if k > 0 {
            let mut w = base.clone();
            w.set_sign(k - 1, 1, Sign::Positive);
            sink.push(Flip::new(FlipKind::CrossZeroReal, k - 1), w);
        }
        if positives > 0 {
            let mut w = base.clone();
            w.set_sign(k, 2 * p + 1, Sign::Negative);
            sink.push(Flip::new(FlipKind::CrossZeroReal, k + 2 * p), w);
        }
    }
}

/// Flips applicable to `state` under `config`.
pub fn applicable_flips(state: &VirtualMorsification, config: &RuleConfig) -> Vec<Flip> {
    expand(state, config).into_iter().map(|(f, _)| f).collect()
}

/// Applies `flip`, which must be applicable under `config`.
pub fn apply(
    state: &VirtualMorsification,
    flip: &Flip,
    config: &RuleConfig,
) -> Result<VirtualMorsification, RuleError> {
    expand(state, config)
        .into_iter()
        .find(|(f, _)| f == flip)
        .map(|(_, s)| s)
        .ok_or(RuleError::NotApplicable(*flip))
}

/// Whether two states are equal up to the sign gauge.
pub fn same_state(a: &VirtualMorsification, b: &VirtualMorsification) -> bool {
    a.mu() == b.mu()
        && a.points() == b.points()
        && normalized_gram(a, Gauge::GreedySign) == normalized_gram(b, Gauge::GreedySign)
}

/// The flip leading from the image of `flip` back to `pre_state`, up to the
/// sign gauge; `None` if there is none (the m-bound can forbid the return).
pub fn inverse_of(flip: &Flip, pre_state: &VirtualMorsification, config: &RuleConfig) -> Option<Flip> {
    let image = apply(pre_state, flip, config).ok()?;
    expand(&image, config)
        .into_iter()
        .find(|(_, back)| same_state(back, pre_state))
        .map(|(f, _)| f)
}

/// Sign of the point that a cross-zero flip moves, after the flip.
pub fn crossing_direction(flip: &Flip, pre_state: &VirtualMorsification) -> Option<Sign> {
    match flip.kind {
        FlipKind::CrossZeroReal | FlipKind::CrossZeroComplex => Some(pre_state.points()[flip.slot].sign.flipped()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::parse_seed;
    use crate::state::Sign::{Negative, Positive};

    fn x10_3() -> VirtualMorsification {
        parse_seed(include_str!("../../../seeds/x10_3.seed")).unwrap()
    }

    fn two(c: i32, pts: [PointAttr; 2]) -> VirtualMorsification {
        VirtualMorsification::from_rows(&[vec![-2, c], vec![c, -2]], pts.to_vec()).unwrap()
    }

    #[test]
    fn reflection_reorder_changes_sign_of_entry() {
        let s = two(1, [PointAttr::real(1, Negative), PointAttr::real(1, Negative)]);
        let config = RuleConfig {
            real_swap_rule: RealSwapRule::Reflection,
            ..RuleConfig::restricted()
        };
        let img = apply(&s, &Flip::new(FlipKind::ReorderLeft, 0), &config).unwrap();
        assert_eq!(img.rows(), vec![vec![-2, -1], vec![-1, -2]]);
        let orth = applicable_flips(&s, &RuleConfig::restricted());
        assert!(orth
            .iter()
            .all(|f| f.kind != FlipKind::ReorderLeft && f.kind != FlipKind::ReorderRight));
    }

    #[test]
    fn orthogonal_values_transpose() {
        let s = two(0, [PointAttr::real(2, Negative), PointAttr::real(1, Negative)]);
        let img = apply(&s, &Flip::new(FlipKind::ReorderLeft, 0), &RuleConfig::restricted()).unwrap();
        assert_eq!(img.rows(), s.rows());
        assert_eq!(img.points()[0].inertia, Some(1));
        assert_eq!(img.points()[1].inertia, Some(2));
    }

    #[test]
    fn death_needs_unit_entry() {
        let pts = [PointAttr::real(2, Negative), PointAttr::real(1, Negative)];
        let config = RuleConfig::restricted();
        assert!(applicable_flips(&two(1, pts), &config).contains(&Flip {
            pair: Some(0),
            ..Flip::death(0, (2, 1))
        }));
        assert!(applicable_flips(&two(-1, pts), &config).contains(&Flip {
            pair: Some(0),
            ..Flip::death(0, (2, 1))
        }));
        assert!(!applicable_flips(&two(2, pts), &config)
            .iter()
            .any(|f| f.kind == FlipKind::Death));
        assert!(!applicable_flips(&two(0, pts), &config)
            .iter()
            .any(|f| f.kind == FlipKind::Death));
    }

    #[test]
    fn death_keeps_ind_and_leaves_oriented_pair() {
        for (inertia, sign) in [
            ((2, 1), Negative),
            ((1, 0), Negative),
            ((2, 1), Positive),
            ((1, 0), Positive),
        ] {
            for c in [1, -1] {
                let s = two(c, [PointAttr::real(inertia.0, sign), PointAttr::real(inertia.1, sign)]);
                let flip = Flip {
                    pair: Some(0),
                    ..Flip::death(0, inertia)
                };
                let img = apply(&s, &flip, &RuleConfig::restricted()).unwrap();
                assert_eq!(img.ind(), s.ind());
                assert!(img.points().iter().all(|p| p.is_complex()));
                assert_eq!(img.entry(0, 1), pair_orientation(inertia), "{inertia:?} c={c}");
            }
        }
    }

    #[test]
    fn oriented_birth_fixes_the_type() {
        let s = two(1, [PointAttr::complex(Positive), PointAttr::complex(Positive)]);
        let births: Vec<Flip> = applicable_flips(&s, &RuleConfig::restricted())
            .into_iter()
            .filter(|f| f.kind == FlipKind::Birth)
            .collect();
        assert!(!births.is_empty());
        assert!(births.iter().all(|f| f.inertia == Some((2, 1))));
        let fold = RuleConfig {
            birth_rule: BirthRule::Fold,
            ..RuleConfig::restricted()
        };
        assert!(applicable_flips(&s, &fold).contains(&Flip::birth(0, (1, 0), 0)));
    }

    #[test]
    fn main_mode_offers_one_crossing_per_side() {
        let s = x10_3();
        let count = |c: &RuleConfig| {
            applicable_flips(&s, c)
                .iter()
                .filter(|f| f.kind == FlipKind::CrossZeroReal)
                .count()
        };
        assert_eq!(count(&RuleConfig::main()), 2);
        assert_eq!(count(&RuleConfig::restricted()), 0);
        let crossings: Vec<Flip> = applicable_flips(&s, &RuleConfig::main())
            .into_iter()
            .filter(|f| f.kind == FlipKind::CrossZeroReal)
            .collect();
        let k = s.negative_count();
        for f in crossings {
            let img = apply(&s, &f, &RuleConfig::main()).unwrap();
            let expected = if crossing_direction(&f, &s) == Some(Positive) {
                k - 1
            } else {
                k + 1
            };
            assert_eq!(img.negative_count(), expected);
        }
    }

    #[test]
    fn every_flip_has_an_inverse() {
        let s = x10_3();
        let config = RuleConfig::main();
        let mut state = s.clone();
        for step in 0..40 {
            let flips = applicable_flips(&state, &config);
            for f in &flips {
                assert!(
                    inverse_of(f, &state, &config).is_some(),
                    "no inverse of {f} at step {step}"
                );
            }
            let f = flips[(step * 7 + 3) % flips.len()];
            state = apply(&state, &f, &config).unwrap();
        }
    }

    #[test]
    fn normal_form_is_idempotent() {
        let mut state = x10_3();
        let config = RuleConfig::main();
        for step in 0..60 {
            assert!(is_pair_normal(&state));
            assert_eq!(normalize_pairs(&state), state);
            let flips = applicable_flips(&state, &config);
            let f = flips[(step * 5 + 1) % flips.len()];
            state = apply(&state, &f, &config).unwrap();
        }
    }

    #[test]
    fn bound_filters_images() {
        let s = x10_3();
        let config = RuleConfig::main().with_m_bound(Some(1));
        assert!(expand(&s, &config).iter().all(|(_, img)| img.entry_bound() <= 1));
        assert_eq!(
            RuleConfig::main().with_m_bound(Some(0)).validate(),
            Err(RuleError::ZeroBound)
        );
    }

    #[test]
    fn names_round_trip() {
        for m in [Mode::Restricted, Mode::Main] {
            assert_eq!(Mode::from_name(m.name()), Some(m));
        }
        for b in [BirthRule::Oriented, BirthRule::Fold, BirthRule::Any] {
            assert_eq!(BirthRule::from_name(b.name()), Some(b));
        }
        assert_eq!(Flip::birth(3, (2, 1), 0).to_string(), "birth@3(2,1)/p0");
    }
}
