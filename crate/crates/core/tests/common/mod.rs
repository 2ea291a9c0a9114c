#![allow(dead_code)]

use std::path::PathBuf;

use morsify_core::key::canonical_key;
use morsify_core::rules::{apply, expand, inverse_of, prepare, same_state};
use morsify_core::{ingest_seed, FlipKind, Gauge, Mode, PointAttr, RuleConfig, Sign, VirtualMorsification, Width};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn seed(name: &str) -> VirtualMorsification {
    ingest_seed(&workspace().join("seeds").join(format!("{name}.seed"))).unwrap()
}

pub const SEEDS: [&str; 6] = [
    "x10_1",
    "x10_1_fake",
    "x10_3",
    "x10_3_4320",
    "x10_3_8496",
    "x10_3_m4800",
];

fn entry(rng: &mut StdRng) -> i32 {
    match rng.gen_range(0..20) {
        0..=9 => 0,
        10..=13 => 1,
        14..=17 => -1,
        18 => 2,
        _ => -2,
    }
}

/// A state with random matrix, pairs, inertia and zero level.
pub fn random_matrix_state(rng: &mut StdRng, mu: usize) -> VirtualMorsification {
    let mut blocks = Vec::new();
    let mut left = mu;
    while left > 0 {
        let pair = left >= 2 && rng.gen_bool(0.3);
        blocks.push(pair);
        left -= if pair { 2 } else { 1 };
    }
    let negative = rng.gen_range(0..=blocks.len());
    let mut points = Vec::with_capacity(mu);
    for (b, &pair) in blocks.iter().enumerate() {
        let sign = if b < negative { Sign::Negative } else { Sign::Positive };
        if pair {
            points.extend([PointAttr::complex(sign); 2]);
        } else {
            points.push(PointAttr::real(rng.gen_range(0..=2), sign));
        }
    }
    let mut gram = vec![-2; mu * mu];
    for i in 0..mu {
        for j in i + 1..mu {
            let v = entry(rng);
            gram[i * mu + j] = v;
            gram[j * mu + i] = v;
        }
    }
    VirtualMorsification::new(mu, gram, points).unwrap()
}

/// A state of `mu` real points with random matrix, inertia and zero level.
pub fn random_real_state(rng: &mut StdRng, mu: usize) -> VirtualMorsification {
    let negative = rng.gen_range(0..=mu);
    let points = (0..mu)
        .map(|i| {
            PointAttr::real(
                rng.gen_range(0..=2),
                if i < negative { Sign::Negative } else { Sign::Positive },
            )
        })
        .collect();
    let mut gram = vec![-2; mu * mu];
    for i in 0..mu {
        for j in i + 1..mu {
            let v = entry(rng);
            gram[i * mu + j] = v;
            gram[j * mu + i] = v;
        }
    }
    VirtualMorsification::new(mu, gram, points).unwrap()
}

/// A state reached from a packaged seed by a random walk of flips.
pub fn random_walk_state(rng: &mut StdRng, config: &RuleConfig, steps: usize) -> VirtualMorsification {
    let name = SEEDS.choose(rng).unwrap();
    let mut state = prepare(&seed(name), config);
    for _ in 0..steps {
        let images = expand(&state, config);
        if images.is_empty() {
            break;
        }
        state = images[rng.gen_range(0..images.len())].1.clone();
    }
    state
}

/// Half random matrices of size 2..=10, half random walks from the seeds;
/// brought into the form `config` expects. States outside the m-bound of
/// `config` are drawn again.
pub fn random_state(rng: &mut StdRng, config: &RuleConfig) -> VirtualMorsification {
    if rng.gen_bool(0.5) {
        loop {
            let mu = rng.gen_range(2..=10);
            let state = prepare(&random_matrix_state(rng, mu), config);
            if config.m_bound.is_none_or(|m| state.entry_bound() <= m) {
                return state;
            }
        }
    } else {
        let steps = rng.gen_range(0..40);
        random_walk_state(rng, config, steps)
    }
}

/// Every applicable flip has an inverse leading back to `state`.
pub fn check_invertible(state: &VirtualMorsification, config: &RuleConfig) -> Result<usize, String> {
    let images = expand(state, config);
    let mut flips: Vec<_> = images.iter().map(|(f, _)| *f).collect();
    flips.sort();
    if let Some(w) = flips.windows(2).find(|w| w[0] == w[1]) {
        return Err(format!("{} offered twice", w[0]));
    }
    for (flip, image) in &images {
        let inv = inverse_of(flip, state, config).ok_or_else(|| format!("no inverse of {flip}"))?;
        let back = apply(image, &inv, config).map_err(|e| e.to_string())?;
        if !same_state(&back, state) {
            return Err(format!("{inv} does not undo {flip}"));
        }
    }
    Ok(images.len())
}

/// Every image is a valid state congruent to `state`.
pub fn check_congruence(state: &VirtualMorsification, config: &RuleConfig) -> Result<(), String> {
    let det = state.gram_determinant();
    for (flip, image) in expand(state, config) {
        VirtualMorsification::new(image.mu(), image.gram().to_vec(), image.points().to_vec())
            .map_err(|e| format!("{flip}: {e}"))?;
        if image.gram_determinant() != det {
            return Err(format!("{flip}: determinant {} -> {}", det, image.gram_determinant()));
        }
    }
    Ok(())
}

/// Restricted flips keep Ind; a zero crossing moves one point across.
pub fn check_ind(state: &VirtualMorsification, config: &RuleConfig) -> Result<(), String> {
    let restricted = config.with_mode(Mode::Restricted);
    for (flip, image) in expand(state, &restricted) {
        if image.ind() != state.ind() {
            return Err(format!("{flip}: Ind {} -> {}", state.ind(), image.ind()));
        }
    }
    for (flip, image) in expand(state, &config.with_mode(Mode::Main)) {
        if flip.kind == FlipKind::CrossZeroReal && image.negative_count().abs_diff(state.negative_count()) != 1 {
            return Err(format!(
                "{flip}: negative count {} -> {}",
                state.negative_count(),
                image.negative_count()
            ));
        }
    }
    Ok(())
}

/// The greedy-sign key is constant on the sign orbit of `state`; pair
/// members are negated together. Returns the orbit size.
pub fn check_gauge_orbit(state: &VirtualMorsification) -> Result<usize, String> {
    let key = |s: &VirtualMorsification| canonical_key(s, Gauge::GreedySign, Width::Wide).unwrap();
    let expected = key(state);
    let mut blocks = Vec::new();
    let mut slot = 0;
    while slot < state.mu() {
        let len = if state.points()[slot].is_complex() { 2 } else { 1 };
        blocks.push((slot, len));
        slot += len;
    }
    let orbit = 1usize << blocks.len();
    for mask in 0..orbit {
        let mut s = state.clone();
        for (b, &(start, len)) in blocks.iter().enumerate() {
            if mask >> b & 1 == 1 {
                for i in start..start + len {
                    s = s.negate_cycle(i);
                }
            }
        }
        if key(&s) != expected {
            return Err(format!("sign pattern {mask:#b} changes the key"));
        }
    }
    Ok(orbit)
}
