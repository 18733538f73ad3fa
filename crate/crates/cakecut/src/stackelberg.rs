//! Alice's Stackelberg value `u_A*(k)`: an exact solver for step densities, a
//! grid brute-force oracle, grid-restricted optimization, and cut selection
//! from intervals of known Bob value.

use serde::{Deserialize, Serialize};

use crate::error::{CakeError, Result};
use crate::partitions::{alice_favoring_tie, piece_values, prefer, CutVector, PieceIndex, TIE_TOLERANCE};
use crate::valuations::{Density, Piece};

/// Default cap on candidate evaluations for every enumerating solver.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackelbergSolution {
    /// Alice's value of the piece Bob leaves her.
    pub value: f64,
    pub cuts: CutVector,
    pub bob_piece: PieceIndex,
    /// Bob's value of his own piece.
    pub bob_value: f64,
}

impl StackelbergSolution {
    fn from_cuts(va: &Density, vb: &Density, cuts: CutVector, bob_piece: PieceIndex) -> Self {
        let alice = piece_values(va, &cuts);
        let bob = piece_values(vb, &cuts);
        StackelbergSolution {
            value: bob_piece.other().pick(alice),
            bob_value: bob_piece.pick(bob),
            cuts,
            bob_piece,
        }
    }

    /// Everything to Bob; the sentinel for infeasible grids.
    fn all_to_bob(k: usize) -> Self {
        StackelbergSolution {
            value: 0.0,
            cuts: CutVector::new(vec![1.0; k]).expect("valid cuts"),
            bob_piece: PieceIndex::One,
            bob_value: 1.0,
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(CakeError::Contract("k must be at least 1".into()));
    }
    Ok(())
}

fn binomial(n: u64, r: u64) -> f64 {
    let r = r.min(n.saturating_sub(r));
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cut vector whose alternating pieces follow `labels` over consecutive
/// regions split at `bounds` (interior boundaries only); `true` marks Bob.
fn cuts_from_labels(bounds: &[f64], labels: &[bool], k: usize) -> (CutVector, PieceIndex) {
    let mut cuts: Vec<f64> = labels
        .windows(2)
        .zip(bounds)
        .filter(|(w, _)| w[0] != w[1])
        .map(|(_, b)| *b)
        .collect();
    debug_assert!(cuts.len() <= k);
    cuts.resize(k, 1.0);
    let bob = if labels[0] {
        PieceIndex::One
    } else {
        PieceIndex::Two
    };
    (CutVector::new(cuts).expect("label boundaries are sorted"), bob)
}

/// Exhaustive search over all k-cuts with cut points on
/// `{0, h, 2h, …, 1} ∪ breakpoints`, Bob choosing with ties in Alice's favor.
pub fn stackelberg_bruteforce(va: &Density, vb: &Density, k: usize, h: f64) -> Result<StackelbergSolution> {
    stackelberg_bruteforce_with_budget(va, vb, k, h, DEFAULT_BUDGET)
}

pub fn stackelberg_bruteforce_with_budget(
    va: &Density,
    vb: &Density,
    k: usize,
    h: f64,
    budget: u64,
) -> Result<StackelbergSolution> {
    check_k(k)?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(CakeError::Contract(format!("grid step {h} must lie in (0, 1]")));
    }
    let steps = (1.0 / h).ceil();
    if steps > budget as f64 {
        return Err(CakeError::Resource(format!("grid with step {h} exceeds budget {budget}")));
    }
    let mut grid: Vec<f64> = (0..=steps as u64).map(|i| (i as f64 * h).min(1.0)).collect();
    grid.extend_from_slice(va.breakpoints());
    grid.extend_from_slice(vb.breakpoints());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let n = grid.len();
    let tuples = binomial((n + k - 1) as u64, k as u64);
    if tuples > budget as f64 {
        return Err(CakeError::Resource(format!(
            "{tuples:.3e} cut vectors on a {n}-point grid exceed budget {budget}"
        )));
    }
    let cdf_a: Vec<f64> = grid.iter().map(|&x| va.cdf(x)).collect();
    let cdf_b: Vec<f64> = grid.iter().map(|&x| vb.cdf(x)).collect();
    let piece_one = |idx: &[usize], cdf: &[f64]| {
        let mut one = 0.0;
        let mut prev = 0.0;
        for (i, &g) in idx.iter().enumerate() {
            if i % 2 == 0 {
                one += cdf[g] - prev;
            }
            prev = cdf[g];
        }
        if idx.len().is_multiple_of(2) {
            one += 1.0 - prev;
        }
        one
    };

    let mut idx = vec![0usize; k];
    let mut best: Option<(f64, Vec<usize>, PieceIndex)> = None;
    loop {
        let a1 = piece_one(&idx, &cdf_a);
        let b1 = piece_one(&idx, &cdf_b);
        let alice = (a1, 1.0 - a1);
        let bob = prefer((b1, 1.0 - b1), alice_favoring_tie(alice));
        let value = bob.other().pick(alice);
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, idx.clone(), bob));
        }
        // next non-decreasing index tuple
        let Some(pos) = (0..k).rev().find(|&i| idx[i] < n - 1) else {
            break;
        };
        let next = idx[pos] + 1;
        for slot in &mut idx[pos..] {
            *slot = next;
        }
    }
    let (_, idx, bob) = best.expect("at least one cut vector");
    let cuts = CutVector::new(idx.iter().map(|&i| grid[i]).collect())?;
    Ok(StackelbergSolution::from_cuts(va, vb, cuts, bob))
}

struct Atom {
    left: f64,
    right: f64,
    alice_mass: f64,
    bob_mass: f64,
    alice_density: f64,
    bob_density: f64,
}

struct ExactSearch<'a> {
    atoms: &'a [Atom],
    k: usize,
    budget: u64,
    evaluated: u64,
    labels: Vec<bool>,
    best_value: f64,
    best: Option<(Vec<bool>, Option<(usize, bool, f64)>)>,
}

impl ExactSearch<'_> {
    /// Labels atoms left to right; `true` marks Bob. A split atom gives Bob a
    /// prefix (or suffix) sized so that his total is exactly one half.
    fn visit(
        &mut self,
        i: usize,
        changes: usize,
        split: Option<(usize, bool)>,
        bob_alice_mass: f64,
        bob_mass: f64,
    ) -> Result<()> {
        if i == self.atoms.len() {
            return self.evaluate(split, bob_alice_mass, bob_mass);
        }
        let atom = &self.atoms[i];
        let prev = if i == 0 { None } else { Some(self.labels[i - 1]) };
        let cost = |label: bool| usize::from(prev.is_some_and(|p| p != label));
        for label in [true, false] {
            let c = changes + cost(label);
            if c > self.k {
                continue;
            }
            self.labels[i] = label;
            let (a, b) = if label {
                (atom.alice_mass, atom.bob_mass)
            } else {
                (0.0, 0.0)
            };
            self.visit(i + 1, c, split, bob_alice_mass + a, bob_mass + b)?;
        }
        if split.is_none() {
            for bob_left in [true, false] {
                // the atom's left label, then one change inside it
                let c = changes + cost(bob_left) + 1;
                if c > self.k {
                    continue;
                }
                // the right label governs the boundary with the next atom
                self.labels[i] = !bob_left;
                self.visit(i + 1, c, Some((i, bob_left)), bob_alice_mass, bob_mass)?;
            }
        }
        Ok(())
    }

    fn evaluate(&mut self, split: Option<(usize, bool)>, bob_alice_mass: f64, bob_mass: f64) -> Result<()> {
        self.evaluated += 1;
        if self.evaluated > self.budget {
            return Err(CakeError::Resource(format!(
                "exact solver exceeded {} candidate evaluations",
                self.budget
            )));
        }
        match split {
            None => {
                let value = 1.0 - bob_alice_mass;
                if bob_mass >= 0.5 - TIE_TOLERANCE && value > self.best_value {
                    self.best_value = value;
                    self.best = Some((self.labels.clone(), None));
                }
            }
            Some((s, bob_left)) => {
                let atom = &self.atoms[s];
                let t = (0.5 - bob_mass) / atom.bob_density;
                if !(t > 0.0 && t < atom.right - atom.left) {
                    return Ok(());
                }
                let value = 1.0 - (bob_alice_mass + atom.alice_density * t);
                if value > self.best_value {
                    let at = if bob_left {
                        atom.left + t
                    } else {
                        atom.right - t
                    };
                    self.best_value = value;
                    self.best = Some((self.labels.clone(), Some((s, bob_left, at))));
                }
            }
        }
        Ok(())
    }
}

/// Exact `u_A*(k)` for step densities.
///
/// Some optimum places every cut but one on the merged breakpoints; the
/// remaining cut makes Bob's piece worth exactly one half. Candidates are
/// enumerated as Bob/Alice labelings of the merged segments with at most
/// `k` label changes, optionally splitting one segment.
pub fn stackelberg_exact(va: &Density, vb: &Density, k: usize) -> Result<StackelbergSolution> {
    stackelberg_exact_with_budget(va, vb, k, DEFAULT_BUDGET)
}

pub fn stackelberg_exact_with_budget(
    va: &Density,
    vb: &Density,
    k: usize,
    budget: u64,
) -> Result<StackelbergSolution> {
    check_k(k)?;
    let mut bounds: Vec<f64> = va.breakpoints().iter().chain(vb.breakpoints()).copied().collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    let atoms: Vec<Atom> = bounds
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            Atom {
                left: w[0],
                right: w[1],
                alice_mass: va.value_between(w[0], w[1]),
                bob_mass: vb.value_between(w[0], w[1]),
                alice_density: va.value_at(mid),
                bob_density: vb.value_at(mid),
            }
        })
        .collect();
    let m = atoms.len() as u64;
    let labelings: f64 = (0..=k.min(atoms.len() - 1) as u64).map(|j| binomial(m - 1, j)).sum();
    let estimate = 2.0 * labelings * (m + 1) as f64;
    if estimate > budget as f64 {
        return Err(CakeError::Resource(format!(
            "about {estimate:.3e} candidates for k = {k} over {m} segments exceed budget {budget}"
        )));
    }
    let mut search = ExactSearch {
        atoms: &atoms,
        k,
        budget,
        evaluated: 0,
        labels: vec![false; atoms.len()],
        best_value: f64::NEG_INFINITY,
        best: None,
    };
    search.visit(0, 0, None, 0.0, 0.0)?;
    let (labels, split) = search.best.expect("cutting at Alice's own midpoint is always feasible");

    // expand a split atom into two labeled regions
    let mut region_bounds = Vec::with_capacity(atoms.len() + 1);
    let mut region_labels = Vec::with_capacity(atoms.len() + 1);
    for (i, atom) in atoms.iter().enumerate() {
        if i > 0 {
            region_bounds.push(atom.left);
        }
        match split {
            Some((s, bob_left, at)) if s == i => {
                region_labels.push(bob_left);
                region_bounds.push(at);
                region_labels.push(!bob_left);
            }
            _ => region_labels.push(labels[i]),
        }
    }
    let (cuts, bob) = cuts_from_labels(&region_bounds, &region_labels, k);
    Ok(StackelbergSolution::from_cuts(va, vb, cuts, bob))
}

/// Best k-cut with every cut point on `grid`, subject to Bob's piece being
/// worth at least one half to him.
pub fn discretized_stackelberg(va: &Density, vb: &Density, k: usize, grid: &[f64]) -> Result<StackelbergSolution> {
    check_grid(grid)?;
    let alice: Vec<f64> = grid.iter().map(|&x| va.cdf(x)).collect();
    let bob: Vec<f64> = grid.iter().map(|&x| vb.cdf(x)).collect();
    discretized_from_cumulative(grid, &alice, &bob, k, DEFAULT_BUDGET)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
        return Err(CakeError::Contract("grid must start at 0 and end at 1".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(CakeError::Contract("grid must be sorted".into()));
    }
    Ok(())
}

/// Grid optimization from cumulative values only: `alice[i]` and `bob[i]`
/// are each player's value of `[0, grid[i])`. The returned value is Alice's
/// value under `alice`; infeasible grids give the all-to-Bob sentinel.
pub fn discretized_from_cumulative(
    grid: &[f64],
    alice: &[f64],
    bob: &[f64],
    k: usize,
    budget: u64,
) -> Result<StackelbergSolution> {
    check_k(k)?;
    check_grid(grid)?;
    let n = grid.len();
    let interior = n as u64 - 2;
    let subsets: f64 = (0..=k as u64).map(|j| binomial(interior, j)).sum();
    if subsets > budget as f64 {
        return Err(CakeError::Resource(format!(
            "{subsets:.3e} grid cut sets exceed budget {budget}"
        )));
    }
    let alice_total = alice[n - 1];
    let bob_total = bob[n - 1];
    let mut best = (f64::NEG_INFINITY, Vec::new(), PieceIndex::One);
    let mut chosen = Vec::with_capacity(k);
    // each visited node is one set of distinct interior cuts
    fn visit(
        start: usize,
        n: usize,
        k: usize,
        chosen: &mut Vec<usize>,
        sums: (f64, f64, f64, f64),
        cum: (&[f64], &[f64]),
        totals: (f64, f64),
        best: &mut (f64, Vec<usize>, PieceIndex),
    ) {
        // sums = (alice piece-one, bob piece-one, last alice cdf, last bob cdf)
        let (mut a1, mut b1, last_a, last_b) = sums;
        if chosen.len().is_multiple_of(2) {
            a1 += totals.0 - last_a;
            b1 += totals.1 - last_b;
        }
        for bob_piece in [PieceIndex::One, PieceIndex::Two] {
            let bob_value = bob_piece.pick((b1, totals.1 - b1));
            let alice_value = bob_piece.other().pick((a1, totals.0 - a1));
            if bob_value >= 0.5 - TIE_TOLERANCE && alice_value > best.0 {
                *best = (alice_value, chosen.clone(), bob_piece);
            }
        }
        if chosen.len() == k {
            return;
        }
        for j in start..n - 1 {
            let (mut a1, mut b1) = (sums.0, sums.1);
            if chosen.len().is_multiple_of(2) {
                a1 += cum.0[j] - sums.2;
                b1 += cum.1[j] - sums.3;
            }
            chosen.push(j);
            visit(j + 1, n, k, chosen, (a1, b1, cum.0[j], cum.1[j]), cum, totals, best);
            chosen.pop();
        }
    }
    visit(
        1,
        n,
        k,
        &mut chosen,
        (0.0, 0.0, 0.0, 0.0),
        (alice, bob),
        (alice_total, bob_total),
        &mut best,
    );
    if best.0 == f64::NEG_INFINITY {
        return Ok(StackelbergSolution::all_to_bob(k));
    }
    let (value, idx, bob_piece) = best;
    let mut cuts: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
    // cuts at 1 only add empty intervals
    cuts.resize(k, 1.0);
    let cuts = CutVector::new(cuts)?;
    let bob_one = {
        let mut one = 0.0;
        let mut prev = 0.0;
        for (i, &j) in idx.iter().enumerate() {
            if i % 2 == 0 {
                one += bob[j] - prev;
            }
            prev = bob[j];
        }
        if idx.len() % 2 == 0 {
            one += bob_total - prev;
        }
        one
    };
    Ok(StackelbergSolution {
        value,
        cuts,
        bob_piece,
        bob_value: bob_piece.pick((bob_one, bob_total - bob_one)),
    })
}

/// Result of choosing cuts around intervals of (nearly) equal Bob value.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalCut {
    pub cuts: CutVector,
    /// The piece holding more intervals, which Bob is expected to take.
    pub bob_piece: PieceIndex,
    pub alice_value: f64,
    pub bob_interval_count: usize,
    pub alice_interval_count: usize,
}

/// Alice's best k-cut that never cuts inside an interval and leaves Bob the
/// piece containing strictly more intervals.
///
/// Rounding a Stackelberg cut outward and handing over `r` further intervals
/// is one such cut, so the optimum here is at least as good; `eta`, `eps` and
/// `r` are checked against the hypothesis that guarantee needs.
pub fn cuts_from_intervals(
    va: &Density,
    intervals: &[Piece],
    eta: f64,
    eps: f64,
    r: usize,
    k: usize,
) -> Result<IntervalCut> {
    check_k(k)?;
    if !(eta > 0.0 && eta < 1.0 && eps > 0.0 && eps < eta * eta / 2.0) {
        return Err(CakeError::Contract(format!(
            "need 0 < eps < eta^2/2 with eta in (0, 1); got eta = {eta}, eps = {eps}"
        )));
    }
    if r == 0 {
        return Err(CakeError::Contract("r must be at least 1".into()));
    }
    let mut spans = Vec::with_capacity(intervals.len());
    for p in intervals {
        match p.intervals() {
            [single] => spans.push(*single),
            _ => return Err(CakeError::Contract("each entry must be a single nonempty interval".into())),
        }
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    if spans.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(CakeError::Contract("intervals overlap".into()));
    }
    if spans.is_empty() {
        return Err(CakeError::Contract("no intervals given".into()));
    }
    interval_cut_dp(va, &spans, k)
}

/// Exact selection by dynamic programming over (segment, label, cuts used,
/// Alice's interval count).
pub(crate) fn interval_cut_dp(va: &Density, spans: &[(f64, f64)], k: usize) -> Result<IntervalCut> {
    // segments: uncovered gaps (count 0) interleaved with intervals (count 1)
    let mut segs: Vec<(f64, f64, usize)> = Vec::with_capacity(2 * spans.len() + 1);
    let mut at = 0.0;
    for &(a, b) in spans {
        if a > at {
            segs.push((at, a, 0));
        }
        segs.push((a, b, 1));
        at = b;
    }
    if at < 1.0 {
        segs.push((at, 1.0, 0));
    }
    let n = spans.len();
    let cap = n.div_ceil(2) - 1; // Alice holds at most this many intervals
    let width = cap + 1;
    let states = 2 * (k + 1) * width;
    let idx = |label: usize, c: usize, q: usize| (label * (k + 1) + c) * width + q;
    let total_bits = segs.len() as u64 * states as u64;
    if total_bits > 8 * DEFAULT_BUDGET {
        return Err(CakeError::Resource(format!("interval selection needs {total_bits} states")));
    }
    // bit set when the best path into a state switched label at this segment
    let mut switched = vec![0u64; (total_bits as usize).div_ceil(64)];
    const NONE: f64 = f64::NEG_INFINITY;
    const ALICE: usize = 0;
    const BOB: usize = 1;
    let mut cur = vec![NONE; states];
    let value = |s: &(f64, f64, usize)| va.value_between(s.0, s.1);
    let first = &segs[0];
    if first.2 <= cap {
        cur[idx(ALICE, 0, first.2)] = value(first);
    }
    cur[idx(BOB, 0, 0)] = 0.0;
    for (si, seg) in segs.iter().enumerate().skip(1) {
        let mut next = vec![NONE; states];
        let gain = value(seg);
        for label in [ALICE, BOB] {
            for c in 0..=k {
                for q in 0..width {
                    let (nq, add) = if label == ALICE {
                        (q + seg.2, gain)
                    } else {
                        (q, 0.0)
                    };
                    if nq > cap {
                        continue;
                    }
                    let stay = cur[idx(label, c, q)];
                    let switch = if c > 0 {
                        cur[idx(1 - label, c - 1, q)]
                    } else {
                        NONE
                    };
                    let target = idx(label, c, nq);
                    if stay == NONE && switch == NONE {
                        continue;
                    }
                    // among predecessors reaching the same state keep the
                    // larger, preferring no switch on equal value
                    let (cand, sw) = if switch > stay { (switch + add, true) } else { (stay + add, false) };
                    if cand > next[target] {
                        next[target] = cand;
                        if sw {
                            let bit = si * states + target;
                            switched[bit / 64] |= 1 << (bit % 64);
                        }
                    }
                }
            }
        }
        cur = next;
    }
    let mut end: Option<(f64, usize, usize, usize)> = None;
    for label in [ALICE, BOB] {
        for c in 0..=k {
            for q in 0..width {
                let v = cur[idx(label, c, q)];
                if v > NONE && end.is_none_or(|(bv, ..)| v > bv) {
                    end = Some((v, label, c, q));
                }
            }
        }
    }
    let Some((alice_value, mut label, mut c, mut q)) = end else {
        return Err(CakeError::Contract("no cut gives Bob more intervals".into()));
    };
    let mut labels = vec![false; segs.len()];
    for si in (0..segs.len()).rev() {
        labels[si] = label == BOB;
        if si == 0 {
            break;
        }
        let bit = si * states + idx(label, c, q);
        if label == ALICE {
            q -= segs[si].2;
        }
        if switched[bit / 64] >> (bit % 64) & 1 == 1 {
            label = 1 - label;
            c -= 1;
        }
    }
    let bounds: Vec<f64> = segs.iter().skip(1).map(|s| s.0).collect();
    let (cuts, bob_piece) = cuts_from_labels(&bounds, &labels, k);
    let alice_count: usize = segs.iter().zip(&labels).filter(|(_, b)| !**b).map(|(s, _)| s.2).sum();
    Ok(IntervalCut {
        cuts,
        bob_piece,
        alice_value,
        bob_interval_count: n - alice_count,
        alice_interval_count: alice_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_halves() {
        let u = Density::uniform();
        let s = stackelberg_exact(&u, &u, 1).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12);
        let b = stackelberg_bruteforce(&u, &u, 1, 0.01).unwrap();
        assert!((b.value - 0.5).abs() < 1e-12);
        let d = discretized_stackelberg(&u, &u, 1, &[0.0, 0.5, 1.0]).unwrap();
        assert!((d.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn budgets_are_enforced() {
        let u = Density::uniform();
        let err = stackelberg_bruteforce_with_budget(&u, &u, 3, 1e-3, 1_000_000).unwrap_err();
        assert!(matches!(err, CakeError::Resource(_)));
        let d = Density::from_segments(&(1..=30).map(|i| (i as f64 / 30.0, 1.0)).collect::<Vec<_>>()).unwrap();
        let err = stackelberg_exact_with_budget(&u, &d, 12, 1000).unwrap_err();
        assert!(matches!(err, CakeError::Resource(_)));
    }

    #[test]
    fn infeasible_grid_gives_sentinel() {
        // only cut at 0 or 1: Bob always gets everything or nothing, so the
        // sole feasible choice is Bob taking the whole cake
        let u = Density::uniform();
        let s = discretized_stackelberg(&u, &u, 1, &[0.0, 1.0]).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn interval_dp_single_interval() {
        let u = Density::uniform();
        let s = cuts_from_intervals(&u, &[Piece::interval(0.3, 0.6).unwrap()], 0.3, 0.01, 1, 2).unwrap();
        assert_eq!(s.cuts.cuts(), &[0.3, 0.6]);
        assert_eq!(s.bob_interval_count, 1);
        assert!((s.alice_value - 0.7).abs() < 1e-12);
    }
}
