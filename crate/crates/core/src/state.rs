//! Virtual morsification states: the Gram matrix of a distinguished basis of
//! vanishing cycles together with per-point attributes, ordered by (the real
//! part of) the critical value.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Self-intersection of every vanishing cycle.
pub const SELF_INTERSECTION: i32 = -2;

/// Largest Milnor number supported by the packed encodings.
pub const MAX_MU: usize = 32;

/// Sign of a critical value (of its real part for complex points).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Positive => Sign::Negative,
        }
    }
}

/// Reality marker of a critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reality {
    Real,
    Complex,
}

/// Attributes of one slot of the value order.
///
/// `inertia` is the positive inertia index of the Hessian: 2 for a minimum,
/// 1 for a saddle, 0 for a maximum. Complex members carry no inertia; their
/// partner is the adjacent complex slot (complex slots pair up left to right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointAttr {
    pub reality: Reality,
    pub inertia: Option<u8>,
    pub sign: Sign,
}

impl PointAttr {
    pub fn real(inertia: u8, sign: Sign) -> Self {
        PointAttr {
            reality: Reality::Real,
            inertia: Some(inertia),
            sign,
        }
    }

    pub fn complex(sign: Sign) -> Self {
        PointAttr {
            reality: Reality::Complex,
            inertia: None,
            sign,
        }
    }

    pub fn is_real(&self) -> bool {
        self.reality == Reality::Real
    }

    pub fn is_complex(&self) -> bool {
        self.reality == Reality::Complex
    }

    pub(crate) fn with_sign(self, sign: Sign) -> Self {
        PointAttr { sign, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("empty state: mu must be positive")]
    Empty,
    #[error("mu = {0} exceeds the supported maximum {MAX_MU}")]
    TooLarge(usize),
    #[error("matrix has {got} entries, expected {expected} for mu = {mu}")]
    Shape { mu: usize, expected: usize, got: usize },
    #[error("attribute list has {got} points, expected {mu}")]
    PointCount { mu: usize, got: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },
    #[error("diagonal entry {row} is {value}, expected -2")]
    Diagonal { row: usize, value: i32 },
    #[error("complex point at slot {0} has no adjacent conjugate partner")]
    UnpairedComplex(usize),
    #[error("conjugate pair at slots {0} and {1} has differing value signs")]
    PairSignMismatch(usize, usize),
    #[error("negative value at slot {0} follows a positive value")]
    SignOrder(usize),
    #[error("inertia index {value} at slot {slot} is outside 0..=2")]
    InertiaRange { slot: usize, value: u8 },
    #[error("slot {0}: inertia must be present exactly for real points")]
    InertiaPresence(usize),
}

/// One virtual morsification. Values are immutable once validated; all
/// transformations produce new states.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VirtualMorsification {
    mu: usize,
    gram: Vec<i32>,
    points: Vec<PointAttr>,
}

impl VirtualMorsification {
    /// Validates a raw row-major matrix and attribute list.
    pub fn new(mu: usize, gram: Vec<i32>, points: Vec<PointAttr>) -> Result<Self, StateError> {
        if mu == 0 {
            return Err(StateError::Empty);
        }
        if mu > MAX_MU {
            return Err(StateError::TooLarge(mu));
        }
        if gram.len() != mu * mu {
            return Err(StateError::Shape {
                mu,
                expected: mu * mu,
                got: gram.len(),
            });
        }
        if points.len() != mu {
            return Err(StateError::PointCount { mu, got: points.len() });
        }
        for i in 0..mu {
            let d = gram[i * mu + i];
            if d != SELF_INTERSECTION {
                return Err(StateError::Diagonal { row: i, value: d });
            }
            for j in (i + 1)..mu {
                if gram[i * mu + j] != gram[j * mu + i] {
                    return Err(StateError::Asymmetric { row: i, col: j });
                }
            }
        }
        for (slot, p) in points.iter().enumerate() {
            match (p.reality, p.inertia) {
                (Reality::Real, Some(v)) if v > 2 => return Err(StateError::InertiaRange { slot, value: v }),
                (Reality::Real, Some(_)) | (Reality::Complex, None) => {}
                _ => return Err(StateError::InertiaPresence(slot)),
            }
        }
        let mut slot = 0;
        while slot < mu {
            if points[slot].is_complex() {
                if slot + 1 >= mu || !points[slot + 1].is_complex() {
                    return Err(StateError::UnpairedComplex(slot));
                }
                if points[slot].sign != points[slot + 1].sign {
                    return Err(StateError::PairSignMismatch(slot, slot + 1));
                }
                slot += 2;
            } else {
                slot += 1;
            }
        }
        for slot in 1..mu {
            if points[slot].sign == Sign::Negative && points[slot - 1].sign == Sign::Positive {
                return Err(StateError::SignOrder(slot));
            }
        }
        Ok(VirtualMorsification { mu, gram, points })
    }

    /// Builds a state from rows, e.g. as transcribed from a printed matrix.
    pub fn from_rows(rows: &[Vec<i32>], points: Vec<PointAttr>) -> Result<Self, StateError> {
        let mu = rows.len();
        let mut gram = Vec::with_capacity(mu * mu);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != mu {
                return Err(StateError::Shape {
                    mu,
                    expected: mu * mu,
                    got: rows.iter().take(r).map(Vec::len).sum::<usize>() + row.len(),
                });
            }
            gram.extend_from_slice(row);
        }
        Self::new(mu, gram, points)
    }

    /// Skips validation; callers guarantee the invariants (surgeries do).
    pub(crate) fn from_parts_unchecked(mu: usize, gram: Vec<i32>, points: Vec<PointAttr>) -> Self {
        debug_assert!(Self::new(mu, gram.clone(), points.clone()).is_ok());
        VirtualMorsification { mu, gram, points }
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn entry(&self, i: usize, j: usize) -> i32 {
        self.gram[i * self.mu + j]
    }

    pub fn gram(&self) -> &[i32] {
        &self.gram
    }

    pub fn rows(&self) -> Vec<Vec<i32>> {
        self.gram.chunks(self.mu).map(<[i32]>::to_vec).collect()
    }

    pub fn points(&self) -> &[PointAttr] {
        &self.points
    }

    pub(crate) fn into_parts(self) -> (usize, Vec<i32>, Vec<PointAttr>) {
        (self.mu, self.gram, self.points)
    }

    /// Number of slots with negative (real part of the) critical value.
    pub fn negative_count(&self) -> usize {
        self.points.iter().filter(|p| p.sign == Sign::Negative).count()
    }

    /// Real points with a negative value and even inertia, minus those with
    /// a negative value and odd inertia.
    pub fn ind(&self) -> i32 {
        self.points
            .iter()
            .filter(|p| p.sign == Sign::Negative)
            .filter_map(|p| p.inertia)
            .map(|q| if q % 2 == 0 { 1 } else { -1 })
            .sum()
    }

    /// Largest absolute off-diagonal entry.
    pub fn entry_bound(&self) -> u32 {
        let mu = self.mu;
        let mut best = 0;
        for i in 0..mu {
            for j in (i + 1)..mu {
                best = best.max(self.gram[i * mu + j].unsigned_abs());
            }
        }
        best
    }

    pub fn real_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_real()).count()
    }

    pub fn all_real(&self) -> bool {
        self.real_count() == self.mu
    }

    /// Whether the lowest real critical value belongs to a saddle.
    pub fn lowest_is_saddle(&self) -> bool {
        self.points.iter().find_map(|p| p.inertia) == Some(1)
    }

    /// The same point data with the zero level moved so that exactly `k`
    /// slots are negative. Fails if the cut would split a conjugate pair.
    pub fn with_negative_count(&self, k: usize) -> Result<Self, StateError> {
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(slot, p)| p.with_sign(if slot < k { Sign::Negative } else { Sign::Positive }))
            .collect();
        Self::new(self.mu, self.gram.clone(), points)
    }

    /// Negates basis vector `i` (row and column `i`).
    pub fn negate_cycle(&self, i: usize) -> Self {
        let mut gram = self.gram.clone();
        let mu = self.mu;
        for j in 0..mu {
            if j != i {
                gram[i * mu + j] = -gram[i * mu + j];
                gram[j * mu + i] = -gram[j * mu + i];
            }
        }
        VirtualMorsification {
            mu,
            gram,
            points: self.points.clone(),
        }
    }

    /// Determinant of the Gram matrix by fraction-free elimination.
    pub fn gram_determinant(&self) -> i128 {
        determinant(self.mu, &self.gram)
    }
}

/// Bareiss determinant over i128.
pub fn determinant(n: usize, entries: &[i32]) -> i128 {
    let mut a: Vec<i128> = entries.iter().map(|&x| x as i128).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k * n + k] == 0 {
            let Some(swap) = (k + 1..n).find(|&r| a[r * n + k] != 0) else {
                return 0;
            };
            for c in 0..n {
                a.swap(k * n + c, swap * n + c);
            }
            sign = -sign;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
            }
        }
        prev = a[k * n + k];
    }
    sign * a[(n - 1) * n + (n - 1)]
}

impl fmt::Debug for VirtualMorsification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for VirtualMorsification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.gram.chunks(self.mu) {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{v:>2}")?;
            }
            f.write_str("\n")?;
        }
        for (slot, p) in self.points.iter().enumerate() {
            if slot > 0 {
                f.write_str(" ")?;
            }
            let s = match p.sign {
                Sign::Negative => '-',
                Sign::Positive => '+',
            };
            match p.inertia {
                Some(q) => write!(f, "{q}{s}")?,
                None => write!(f, "c{s}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(off: i32) -> Vec<i32> {
        vec![-2, off, off, -2]
    }

    #[test]
    fn rejects_bad_diagonal() {
        let pts = vec![PointAttr::real(1, Sign::Negative); 2];
        let err = VirtualMorsification::new(2, vec![-1, 0, 0, -2], pts).unwrap_err();
        assert_eq!(err, StateError::Diagonal { row: 0, value: -1 });
    }

    #[test]
    fn rejects_asymmetry() {
        let pts = vec![PointAttr::real(1, Sign::Negative); 2];
        let err = VirtualMorsification::new(2, vec![-2, 1, 0, -2], pts).unwrap_err();
        assert_eq!(err, StateError::Asymmetric { row: 0, col: 1 });
    }

    #[test]
    fn rejects_unpaired_complex() {
        let pts = vec![PointAttr::complex(Sign::Negative), PointAttr::real(2, Sign::Negative)];
        let err = VirtualMorsification::new(2, two_point(1), pts).unwrap_err();
        assert_eq!(err, StateError::UnpairedComplex(0));
    }

    #[test]
    fn rejects_sign_order_and_inertia() {
        let pts = vec![PointAttr::real(1, Sign::Positive), PointAttr::real(1, Sign::Negative)];
        assert_eq!(
            VirtualMorsification::new(2, two_point(0), pts).unwrap_err(),
            StateError::SignOrder(1)
        );
        let pts = vec![PointAttr::real(3, Sign::Negative), PointAttr::real(1, Sign::Negative)];
        assert!(matches!(
            VirtualMorsification::new(2, two_point(0), pts).unwrap_err(),
            StateError::InertiaRange { slot: 0, value: 3 }
        ));
    }

    #[test]
    fn pair_signs_must_agree() {
        let pts = vec![PointAttr::complex(Sign::Negative), PointAttr::complex(Sign::Positive)];
        assert_eq!(
            VirtualMorsification::new(2, two_point(1), pts).unwrap_err(),
            StateError::PairSignMismatch(0, 1)
        );
    }

    #[test]
    fn ind_and_counts() {
        let pts = vec![
            PointAttr::real(1, Sign::Negative),
            PointAttr::real(2, Sign::Negative),
            PointAttr::real(0, Sign::Positive),
        ];
        let gram = vec![-2, 1, 0, 1, -2, 2, 0, 2, -2];
        let s = VirtualMorsification::new(3, gram, pts).unwrap();
        assert_eq!(s.ind(), 0);
        assert_eq!(s.negative_count(), 2);
        assert_eq!(s.entry_bound(), 2);
        assert_eq!(s.with_negative_count(0).unwrap().ind(), 0);
        assert_eq!(s.with_negative_count(3).unwrap().ind(), 1);
    }

    #[test]
    fn determinant_small() {
        assert_eq!(determinant(2, &[-2, 1, 1, -2]), 3);
        assert_eq!(determinant(3, &[-2, 1, 0, 1, -2, 1, 0, 1, -2]), -4);
        assert_eq!(determinant(2, &[-2, -2, -2, -2]), 0);
        assert_eq!(determinant(3, &[0, 1, 0, 1, 0, 0, 0, 0, 1]), -1);
    }
}
