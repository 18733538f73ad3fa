//! k-cut alternating partitions and the preference predicates built on them.

use serde::{Deserialize, Serialize};

use crate::error::{CakeError, Result};
use crate::valuations::{value_of, Density, Piece};

/// Two piece values closer than this are a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Slack allowed when checking that a piece is worth at least one half.
pub const ENVY_TOLERANCE: f64 = 1e-12;

/// Sorted cut points `0 ≤ a₁ ≤ … ≤ a_k ≤ 1`; duplicates allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CutVector {
    cuts: Vec<f64>,
}

impl CutVector {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(CakeError::Contract("a cut vector needs at least one cut".into()));
        }
        if let Some(c) = cuts.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(CakeError::Contract(format!("cut {c} lies outside [0, 1]")));
        }
        if cuts.windows(2).any(|w| w[0] > w[1]) {
            return Err(CakeError::Contract(format!("cuts {cuts:?} are not sorted")));
        }
        Ok(CutVector { cuts })
    }

    /// Sorts and clamps before validating.
    pub fn from_unsorted(mut cuts: Vec<f64>) -> Result<Self> {
        for c in &mut cuts {
            if c.is_nan() {
                return Err(CakeError::Contract("cut is NaN".into()));
            }
            *c = c.clamp(0.0, 1.0);
        }
        cuts.sort_by(f64::total_cmp);
        CutVector::new(cuts)
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn k(&self) -> usize {
        self.cuts.len()
    }

    /// Boundaries `x₀ = 0, a₁, …, a_k, x_{k+1} = 1`.
    pub fn boundaries(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(0.0)
            .chain(self.cuts.iter().copied())
            .chain(std::iter::once(1.0))
    }
}

impl TryFrom<Vec<f64>> for CutVector {
    type Error = CakeError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        CutVector::new(v)
    }
}

impl From<CutVector> for Vec<f64> {
    fn from(c: CutVector) -> Self {
        c.cuts
    }
}

/// Which of the two alternating pieces: `One` holds `[x_i, x_{i+1})` for even `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum PieceIndex {
    One,
    Two,
}

impl PieceIndex {
    pub fn other(self) -> Self {
        match self {
            PieceIndex::One => PieceIndex::Two,
            PieceIndex::Two => PieceIndex::One,
        }
    }

    /// The piece owning interval `[x_i, x_{i+1})`.
    pub fn of_interval(i: usize) -> Self {
        if i.is_multiple_of(2) {
            PieceIndex::One
        } else {
            PieceIndex::Two
        }
    }

    pub fn number(self) -> u8 {
        match self {
            PieceIndex::One => 1,
            PieceIndex::Two => 2,
        }
    }

    /// Selects this piece's entry from a pair.
    pub fn pick<T: Copy>(self, pair: (T, T)) -> T {
        match self {
            PieceIndex::One => pair.0,
            PieceIndex::Two => pair.1,
        }
    }
}

impl TryFrom<u8> for PieceIndex {
    type Error = String;
    fn try_from(n: u8) -> std::result::Result<Self, String> {
        match n {
            1 => Ok(PieceIndex::One),
            2 => Ok(PieceIndex::Two),
            _ => Err(format!("piece index {n} is not 1 or 2")),
        }
    }
}

impl From<PieceIndex> for u8 {
    fn from(p: PieceIndex) -> u8 {
        p.number()
    }
}

impl std::fmt::Display for PieceIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

pub fn alternating_partition(c: &CutVector) -> (Piece, Piece) {
    let mut one = Vec::new();
    let mut two = Vec::new();
    let bounds: Vec<f64> = c.boundaries().collect();
    for (i, w) in bounds.windows(2).enumerate() {
        match PieceIndex::of_interval(i) {
            PieceIndex::One => one.push((w[0], w[1])),
            PieceIndex::Two => two.push((w[0], w[1])),
        }
    }
    (Piece::from_sorted(one), Piece::from_sorted(two))
}

/// Values of both alternating pieces without materializing them.
pub fn piece_values(d: &Density, c: &CutVector) -> (f64, f64) {
    let mut one = 0.0;
    let mut prev_cdf = 0.0;
    for (i, x) in c.cuts.iter().enumerate() {
        let cdf = d.cdf(*x);
        if i % 2 == 0 {
            one += cdf - prev_cdf;
        }
        prev_cdf = cdf;
    }
    if c.cuts.len().is_multiple_of(2) {
        one += 1.0 - prev_cdf;
    }
    (one, 1.0 - one)
}

/// The piece a chooser with these values takes; `tie_favors` wins ties.
pub fn prefer(values: (f64, f64), tie_favors: PieceIndex) -> PieceIndex {
    let diff = values.0 - values.1;
    if diff.abs() <= TIE_TOLERANCE {
        tie_favors
    } else if diff > 0.0 {
        PieceIndex::One
    } else {
        PieceIndex::Two
    }
}

/// The piece Bob takes at indifference when ties go Alice's way: the one
/// Alice values less. A double tie goes to piece one.
pub fn alice_favoring_tie(alice_values: (f64, f64)) -> PieceIndex {
    if alice_values.0 > alice_values.1 {
        PieceIndex::Two
    } else {
        PieceIndex::One
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    pub piece_one: Piece,
    pub piece_two: Piece,
    pub chosen_by_bob: Option<PieceIndex>,
}

impl Allocation {
    pub fn from_cuts(c: &CutVector) -> Self {
        let (piece_one, piece_two) = alternating_partition(c);
        Allocation {
            piece_one,
            piece_two,
            chosen_by_bob: None,
        }
    }

    pub fn piece(&self, i: PieceIndex) -> &Piece {
        match i {
            PieceIndex::One => &self.piece_one,
            PieceIndex::Two => &self.piece_two,
        }
    }

    pub fn values(&self, d: &Density) -> (f64, f64) {
        (value_of(d, &self.piece_one), value_of(d, &self.piece_two))
    }

    pub fn with_choice(mut self, i: PieceIndex) -> Self {
        self.chosen_by_bob = Some(i);
        self
    }
}

pub fn bob_preferred(vb: &Density, alloc: &Allocation, tie_favors: PieceIndex) -> PieceIndex {
    prefer(alloc.values(vb), tie_favors)
}

/// Each player values their own piece at ≥ 1/2 up to [`ENVY_TOLERANCE`];
/// Alice holds the piece Bob did not choose.
pub fn is_envy_free(alloc: &Allocation, va: &Density, vb: &Density) -> Result<bool> {
    let bob = alloc
        .chosen_by_bob
        .ok_or_else(|| CakeError::Contract("allocation has no recorded Bob choice".into()))?;
    let bob_value = value_of(vb, alloc.piece(bob));
    let alice_value = value_of(va, alloc.piece(bob.other()));
    Ok(bob_value >= 0.5 - ENVY_TOLERANCE && alice_value >= 0.5 - ENVY_TOLERANCE)
}
