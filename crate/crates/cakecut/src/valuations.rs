//! Piecewise-constant value densities on the cake `[0, 1]` and the pieces
//! they are integrated over.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CakeError, Result};

/// Allowed deviation of a density's total mass from 1.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A step density: `values[i]` holds on `[breakpoints[i], breakpoints[i + 1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct Density {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    lower: f64,
    upper: f64,
    // cumulative[i] = mass of [0, breakpoints[i])
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    lower_bound: f64,
    upper_bound: f64,
}

impl TryFrom<DensityRepr> for Density {
    type Error = CakeError;
    fn try_from(r: DensityRepr) -> Result<Self> {
        Density::new(r.breakpoints, r.values)?.with_bounds(r.lower_bound, r.upper_bound)
    }
}

impl From<Density> for DensityRepr {
    fn from(d: Density) -> Self {
        DensityRepr {
            breakpoints: d.breakpoints,
            values: d.values,
            lower_bound: d.lower,
            upper_bound: d.upper,
        }
    }
}

impl Density {
    /// Builds a density and checks every invariant. The bounds default to the
    /// smallest and largest segment value.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let bad = |msg: String| Err(CakeError::InvalidDensity(msg));
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return bad(format!(
                "{} breakpoints cannot bound {} segments",
                breakpoints.len(),
                values.len()
            ));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return bad("breakpoints must start at 0 and end at 1".into());
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[0] < w[1])) {
            return bad(format!("breakpoints not strictly increasing at {}", w[1]));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return bad(format!("segment value {v} is not a positive finite number"));
        }
        let mut cumulative = Vec::with_capacity(breakpoints.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for (i, v) in values.iter().enumerate() {
            acc += v * (breakpoints[i + 1] - breakpoints[i]);
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > MASS_TOLERANCE {
            return bad(format!("total mass {acc} differs from 1"));
        }
        // the residual rounding is assigned to the last segment
        *cumulative.last_mut().unwrap() = 1.0;
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(0.0, f64::max);
        Ok(Density {
            breakpoints,
            values,
            lower,
            upper,
            cumulative,
        })
    }

    /// Rescales `values` to total mass 1 before validating.
    pub fn normalized(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mass: f64 = values
            .iter()
            .zip(breakpoints.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(CakeError::InvalidDensity(format!("mass {mass} cannot be normalized")));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Density::new(breakpoints, values)
    }

    /// Builds from `(right_endpoint, value)` pairs, the on-disk layout.
    pub fn from_segments(segments: &[(f64, f64)]) -> Result<Self> {
        let mut breakpoints = vec![0.0];
        breakpoints.extend(segments.iter().map(|s| s.0));
        Density::new(breakpoints, segments.iter().map(|s| s.1).collect())
    }

    pub fn uniform() -> Self {
        Density::new(vec![0.0, 1.0], vec![1.0]).expect("uniform density is valid")
    }

    /// A random density with `segments` pieces whose values lie in `[lo, hi]`
    /// before normalization.
    pub fn random<R: Rng>(rng: &mut R, segments: usize, lo: f64, hi: f64) -> Self {
        let segments = segments.max(1);
        let mut cuts: Vec<f64> = (1..segments).map(|_| rng.gen_range(0.02..0.98)).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let mut breakpoints = vec![0.0];
        breakpoints.extend(cuts);
        breakpoints.push(1.0);
        let values = (1..breakpoints.len()).map(|_| rng.gen_range(lo..=hi)).collect();
        Density::normalized(breakpoints, values).expect("random density is valid")
    }

    /// Widens the advertised bounds; they must still enclose every value.
    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= self.lower && upper >= self.upper) {
            return Err(CakeError::InvalidDensity(format!(
                "bounds [{lower}, {upper}] do not enclose values in [{}, {}]",
                self.lower, self.upper
            )));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn segment_count(&self) -> usize {
        self.values.len()
    }

    /// δ: lower bound on the density.
    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    /// Δ: upper bound on the density.
    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    fn segment_of(&self, x: f64) -> usize {
        let i = self.breakpoints.partition_point(|b| *b <= x);
        i.saturating_sub(1).min(self.values.len() - 1)
    }

    /// Density value at `x`, right-continuous.
    pub fn value_at(&self, x: f64) -> f64 {
        self.values[self.segment_of(x)]
    }

    /// Mass of `[0, x)`; exact at breakpoints.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = self.segment_of(x);
        if x == self.breakpoints[i] {
            return self.cumulative[i];
        }
        self.cumulative[i] + self.values[i] * (x - self.breakpoints[i])
    }

    /// Mass of `[a, b)`.
    pub fn value_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            0.0
        } else {
            self.cdf(b) - self.cdf(a)
        }
    }

    /// Midpoint `m` with `cdf(m) = 1/2`.
    pub fn midpoint(&self) -> f64 {
        cut_point(self, 0.5)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CakeError::io(path, e))?;
        Density::parse(&text, &path.display().to_string())
    }

    /// Parses the text format: one `right_endpoint value` pair per line;
    /// blank lines and `#` comments are ignored.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| CakeError::Parse {
                path: origin.to_string(),
                line: n + 1,
                msg: msg.to_string(),
            };
            let mut fields = line.split_whitespace();
            let (Some(b), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected `breakpoint value`"));
            };
            let b: f64 = b.parse().map_err(|_| err("breakpoint is not a number"))?;
            let v: f64 = v.parse().map_err(|_| err("value is not a number"))?;
            segments.push((b, v));
        }
        Density::from_segments(&segments).map_err(|e| CakeError::Parse {
            path: origin.to_string(),
            line: 0,
            msg: e.to_string(),
        })
    }

    /// Text form accepted by [`Density::parse`]; round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (b, v) in self.breakpoints[1..].iter().zip(&self.values) {
            writeln!(out, "{b} {v}").unwrap();
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| CakeError::io(path, e))
    }
}

/// A finite union of disjoint half-open intervals `[a, b)` inside `[0, 1]`,
/// kept sorted with touching intervals merged and empty ones dropped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    intervals: Vec<(f64, f64)>,
}

impl Piece {
    /// Rejects endpoints outside `[0, 1]`, reversed intervals, and overlaps.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
                return Err(CakeError::Domain(format!("interval [{a}, {b}) is not inside [0, 1]")));
            }
        }
        intervals.retain(|(a, b)| b > a);
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        if let Some(w) = intervals.windows(2).find(|w| w[1].0 < w[0].1) {
            return Err(CakeError::Domain(format!(
                "intervals [{}, {}) and [{}, {}) overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
        Ok(Piece::from_sorted(intervals))
    }

    /// Merges touching neighbours of an already sorted, disjoint list.
    pub(crate) fn from_sorted(intervals: Vec<(f64, f64)>) -> Self {
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            if b <= a {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.1 >= a => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Piece { intervals: merged }
    }

    pub fn empty() -> Self {
        Piece::default()
    }

    pub fn full() -> Self {
        Piece {
            intervals: vec![(0.0, 1.0)],
        }
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Piece::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Union with a piece; errors if the two overlap.
    pub fn union(&self, other: &Piece) -> Result<Piece> {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Piece::new(all)
    }

    pub fn complement(&self) -> Piece {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut start = 0.0;
        for &(a, b) in &self.intervals {
            out.push((start, a));
            start = b;
        }
        out.push((start, 1.0));
        Piece::from_sorted(out)
    }

    /// True if `[a, b)` lies inside one interval of the piece.
    pub fn contains_interval(&self, a: f64, b: f64) -> bool {
        b <= a || self.intervals.iter().any(|&(x, y)| x <= a && b <= y)
    }
}

/// Exact integral of `d` over `p`.
pub fn value_of(d: &Density, p: &Piece) -> f64 {
    p.intervals.iter().map(|&(a, b)| d.value_between(a, b)).sum()
}

/// Leftmost `y` with `∫_0^y d = target`. Targets outside `[0, 1]` clamp.
pub fn cut_point(d: &Density, target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    if target >= 1.0 {
        return 1.0;
    }
    let n = d.values.len();
    // first segment whose right-end mass reaches the target
    let i = (d.cumulative.partition_point(|c| *c < target) - 1).min(n - 1);
    if d.cumulative[i + 1] == target {
        return d.breakpoints[i + 1];
    }
    let y = d.breakpoints[i] + (target - d.cumulative[i]) / d.values[i];
    y.clamp(d.breakpoints[i], d.breakpoints[i + 1])
}

/// The monotone reparameterization `f = V₂⁻¹ ∘ V₁`, piecewise linear between
/// knots where either CDF changes slope.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpMap {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

pub fn warp_map(source: &Density, target: &Density) -> WarpMap {
    let mut knots: Vec<(f64, f64)> = source
        .breakpoints
        .iter()
        .map(|&x| (x, cut_point(target, source.cdf(x))))
        .chain(
            target
                .breakpoints
                .iter()
                .map(|&y| (cut_point(source, target.cdf(y)), y)),
        )
        .collect();
    knots[..].sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let mut xs: Vec<f64> = Vec::with_capacity(knots.len());
    let mut ys: Vec<f64> = Vec::with_capacity(knots.len());
    for (x, y) in knots {
        if let (Some(&px), Some(&py)) = (xs.last(), ys.last()) {
            if x <= px || y <= py {
                continue;
            }
        }
        xs.push(x);
        ys.push(y);
    }
    // endpoints are pinned exactly
    *xs.last_mut().unwrap() = 1.0;
    *ys.last_mut().unwrap() = 1.0;
    WarpMap { xs, ys }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let j = xs.partition_point(|k| *k <= x).clamp(1, xs.len() - 1);
    let (x0, x1, y0, y1) = (xs[j - 1], xs[j], ys[j - 1], ys[j]);
    if x == x0 {
        return y0;
    }
    (y0 + (y1 - y0) * (x - x0) / (x1 - x0)).clamp(y0, y1)
}

impl WarpMap {
    pub fn apply(&self, x: f64) -> f64 {
        interpolate(&self.xs, &self.ys, x)
    }

    pub fn invert(&self, y: f64) -> f64 {
        interpolate(&self.ys, &self.xs, y)
    }

    pub fn apply_piece(&self, p: &Piece) -> Piece {
        Piece::from_sorted(
            p.intervals
                .iter()
                .map(|&(a, b)| (self.apply(a), self.apply(b)))
                .collect(),
        )
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }
}

/// Bob's density in the warped instance:
/// `v_B²(y) = v_B¹(f⁻¹ y) / v_A¹(f⁻¹ y) · v_A²(y)` with `f = warp_map(alice_from, alice_to)`.
pub fn warp_bob_density(bob: &Density, alice_from: &Density, alice_to: &Density) -> Density {
    let f = warp_map(alice_from, alice_to);
    let mut ys: Vec<f64> = bob
        .breakpoints
        .iter()
        .chain(&alice_from.breakpoints)
        .map(|&x| f.apply(x))
        .chain(alice_to.breakpoints.iter().copied())
        .collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup_by(|a, b| *a - *b <= 1e-15);
    *ys.last_mut().unwrap() = 1.0;
    let values: Vec<f64> = ys
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let x = f.invert(mid);
            bob.value_at(x) / alice_from.value_at(x) * alice_to.value_at(mid)
        })
        .collect();
    let warped = Density::normalized(ys, values).expect("warped density is a valid step density");
    let lower = bob.lower * alice_to.lower / alice_from.upper;
    let upper = bob.upper * alice_to.upper / alice_from.lower;
    let (lo, hi) = (lower.min(warped.lower), upper.max(warped.upper));
    warped.with_bounds(lo, hi).expect("bounds enclose values")
}
