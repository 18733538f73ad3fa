//! Alice's learners: indifference searches (plain and majority-vote) and the
//! four commit-then-exploit strategies built on them.

use serde::{Deserialize, Serialize};

use crate::engine::{AliceStrategy, RoundSource};
use crate::error::{CakeError, Result};
use crate::partitions::{CutVector, PieceIndex};
use crate::stackelberg::interval_cut_dp;
use crate::valuations::Density;

/// Growth rates `f(T)` and `g(T)` appearing in the robust parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum RateFunction {
    /// `T^α`.
    Power(f64),
    /// `T / ln^p T`.
    PolyOverPolylog(f64),
    /// `ln T`.
    Log,
}

impl RateFunction {
    pub fn evaluate(&self, t: f64) -> f64 {
        match *self {
            RateFunction::Power(a) => t.powf(a),
            RateFunction::PolyOverPolylog(p) => t / t.ln().powf(p),
            RateFunction::Log => t.ln(),
        }
    }
}

/// The density class `[δ, Δ]` Alice is promised both players lie in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ClassBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= 1.0 && upper >= 1.0 && upper.is_finite()) {
            return Err(CakeError::Domain(format!(
                "class bounds need 0 < δ ≤ 1 ≤ Δ < ∞, got [{lower}, {upper}]"
            )));
        }
        Ok(ClassBounds { lower, upper })
    }

    /// The tightest class holding every given density.
    pub fn covering(densities: &[&Density]) -> Self {
        let lower = densities.iter().map(|d| d.lower_bound()).fold(1.0, f64::min);
        let upper = densities.iter().map(|d| d.upper_bound()).fold(1.0, f64::max);
        ClassBounds { lower, upper }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub found: bool,
    pub x_tilde: f64,
    pub rounds_used: u64,
    /// Majority votes decided by fewer than `2·f(T)` ballots.
    pub narrow_votes: u64,
}

/// One cut sweeping `[lo, hi]` between fixed neighbours; the rest of the
/// vector is zero padding in front.
#[derive(Clone, Debug)]
pub struct SearchLine {
    pub prefix: Vec<f64>,
    pub suffix: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl SearchLine {
    /// The last cut sweeps `[x_{k−1}, 1]` after `fixed`.
    pub fn last_cut(fixed: &[f64]) -> Self {
        SearchLine {
            prefix: fixed.to_vec(),
            suffix: Vec::new(),
            lo: fixed.last().copied().unwrap_or(0.0),
            hi: 1.0,
        }
    }

    fn padding(&self, k: usize) -> Result<usize> {
        let used = self.prefix.len() + self.suffix.len() + 1;
        k.checked_sub(used)
            .ok_or_else(|| CakeError::Contract(format!("search needs {used} cuts, the game allows {k}")))
    }

    fn cuts(&self, k: usize, z: f64) -> Result<CutVector> {
        let mut c = vec![0.0; self.padding(k)?];
        c.extend_from_slice(&self.prefix);
        c.push(z);
        c.extend_from_slice(&self.suffix);
        CutVector::new(c)
    }

    /// The piece that gains as the moving cut advances.
    fn grower(&self, k: usize) -> Result<PieceIndex> {
        Ok(PieceIndex::of_interval(self.padding(k)? + self.prefix.len()))
    }
}

/// Rounds the plain search may use on a unit-length line.
pub fn plain_search_cap(eps: f64) -> u64 {
    2 + (1.0 / eps).log2().ceil().max(0.0) as u64
}

/// Rounds the robust search may use on a unit-length line.
pub fn robust_search_cap(eps: f64, reps: u64) -> u64 {
    reps * (2.0 / eps).log2().ceil().max(0.0) as u64
}

/// Repetitions per robust probe: `⌈4·f(T)·g(T)/(δ·ε)⌉`.
pub fn robust_repetitions(horizon: u64, eps: f64, f: RateFunction, g: RateFunction, delta: f64) -> u64 {
    let t = horizon as f64;
    (4.0 * f.evaluate(t) * g.evaluate(t) / (delta * eps)).ceil().max(1.0) as u64
}

/// Locates the cut where a myopic Bob switches pieces, to within `eps`:
/// two edge probes, then bisection down to width `2·eps`.
pub fn search_line(rounds: &mut dyn RoundSource, line: &SearchLine, eps: f64) -> Result<SearchOutcome> {
    check_eps(eps)?;
    let k = rounds.k();
    let grower = line.grower(k)?;
    let start = rounds.played();
    let used = |r: &dyn RoundSource| r.played() - start;
    let not_found = |r: &dyn RoundSource| SearchOutcome {
        found: false,
        x_tilde: f64::NAN,
        rounds_used: used(r),
        narrow_votes: 0,
    };
    if rounds.play(&line.cuts(k, line.hi)?)? != grower {
        return Ok(not_found(rounds));
    }
    if rounds.play(&line.cuts(k, line.lo)?)? == grower {
        return Ok(not_found(rounds));
    }
    let (mut lo, mut hi) = (line.lo, line.hi);
    while hi - lo > 2.0 * eps {
        let mid = 0.5 * (lo + hi);
        if rounds.play(&line.cuts(k, mid)?)? == grower {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SearchOutcome {
        found: true,
        x_tilde: 0.5 * (lo + hi),
        rounds_used: used(rounds),
        narrow_votes: 0,
    })
}

/// [`search_line`] for the last cut after `fixed_cuts`.
pub fn binary_search_indifference(
    rounds: &mut dyn RoundSource,
    fixed_cuts: &[f64],
    eps: f64,
) -> Result<SearchOutcome> {
    search_line(rounds, &SearchLine::last_cut(fixed_cuts), eps)
}

/// Majority-vote bisection down to width `eps/2`, each probe repeated
/// `reps` times. A vote tie counts as preferring the grown piece. Reports
/// no crossover when either end of the line was never moved.
pub fn robust_search_line(
    rounds: &mut dyn RoundSource,
    line: &SearchLine,
    eps: f64,
    reps: u64,
    narrow_margin: f64,
) -> Result<SearchOutcome> {
    check_eps(eps)?;
    let k = rounds.k();
    let grower = line.grower(k)?;
    let start = rounds.played();
    let (mut lo, mut hi) = (line.lo, line.hi);
    let mut narrow_votes = 0;
    while hi - lo > 0.5 * eps {
        let mid = 0.5 * (lo + hi);
        let runs = rounds.play_repeated(&line.cuts(k, mid)?, reps)?;
        let for_grower: u64 = runs.iter().filter(|(p, _)| *p == grower).map(|(_, n)| n).sum();
        let margin = (2 * for_grower).abs_diff(reps);
        if (margin as f64) < narrow_margin {
            narrow_votes += 1;
        }
        if 2 * for_grower >= reps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SearchOutcome {
        found: lo != line.lo && hi != line.hi,
        x_tilde: 0.5 * (lo + hi),
        rounds_used: rounds.played() - start,
        narrow_votes,
    })
}

/// [`robust_search_line`] for the last cut after `fixed_cuts`, with the
/// repetition count derived from `f`, `g` and the class lower bound.
pub fn robust_binary_search(
    rounds: &mut dyn RoundSource,
    fixed_cuts: &[f64],
    eps: f64,
    f: RateFunction,
    g: RateFunction,
    delta: f64,
) -> Result<SearchOutcome> {
    let reps = robust_repetitions(rounds.horizon(), eps, f, g, delta);
    let margin = 2.0 * f.evaluate(rounds.horizon() as f64);
    robust_search_line(rounds, &SearchLine::last_cut(fixed_cuts), eps, reps, margin)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(CakeError::Domain(format!("search precision {eps} must lie in (0, 1)")))
    }
}

/// Moves `cuts` so that every piece other than `bob_piece` shrinks, by
/// `shift` in total, split across Alice's runs in proportion to their
/// length. A run between two cuts gives up length at both ends.
pub fn grow_piece(cuts: &[f64], bob_piece: PieceIndex, shift: f64) -> Vec<f64> {
    let k = cuts.len();
    let mut bounds = Vec::with_capacity(k + 2);
    bounds.push(0.0);
    bounds.extend_from_slice(cuts);
    bounds.push(1.0);
    let alice_runs: Vec<usize> = (0..=k).filter(|&i| PieceIndex::of_interval(i) != bob_piece).collect();
    let total: f64 = alice_runs.iter().map(|&i| bounds[i + 1] - bounds[i]).sum();
    if total <= 0.0 || shift <= 0.0 {
        return cuts.to_vec();
    }
    let shift = shift.min(total);
    let mut moved = bounds.clone();
    for i in alice_runs {
        let d = shift * (bounds[i + 1] - bounds[i]) / total;
        let (left_cut, right_cut) = (i > 0, i < k);
        match (left_cut, right_cut) {
            (true, true) => {
                moved[i] += 0.5 * d;
                moved[i + 1] -= 0.5 * d;
            }
            (false, true) => moved[i + 1] -= d,
            (true, false) => moved[i] += d,
            (false, false) => {}
        }
    }
    let mut out: Vec<f64> = moved[1..=k].iter().map(|c| c.clamp(0.0, 1.0)).collect();
    // rounding may leave neighbours a hair out of order
    for i in 1..out.len() {
        if out[i] < out[i - 1] {
            out[i] = out[i - 1];
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "search", rename_all = "snake_case")]
pub enum SearchKind {
    Plain,
    /// Majority votes sized for a Bob whose regret grows like `f(T)`.
    Robust { f: RateFunction },
}

/// Tuning shared by all four strategies, fixed at the start of play.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub eps: f64,
    pub eta: f64,
    pub shift: f64,
    /// Rounds per probe; 1 for plain searches.
    pub reps: u64,
}

/// What a learner did, for diagnostics and tests.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnerReport {
    pub params: Option<LearnerParams>,
    /// Learned cut points in increasing order: `(x_i, y_i)` pairs for the
    /// two-cut strategies, the interval grid for the k-cut ones.
    pub learned: Vec<(f64, f64)>,
    pub grid: Vec<f64>,
    pub committed: Option<CutVector>,
    pub learning_rounds: u64,
    pub searches: u64,
    pub narrow_votes: u64,
    /// Learning stopped because the next search might not fit in the horizon.
    pub overran: bool,
    /// Nothing usable was learned; Alice committed to her own midpoint.
    pub fell_back: bool,
}

/// Alice's midpoint cut padded with cuts at 1; worth 1/2 to her whichever
/// piece Bob takes.
fn midpoint_cuts(va: &Density, k: usize) -> Result<CutVector> {
    let mut c = vec![va.midpoint()];
    c.resize(k, 1.0);
    CutVector::new(c)
}

struct Searcher {
    kind: SearchKind,
    eps: f64,
    reps: u64,
    narrow_margin: f64,
}

impl Searcher {
    fn new(kind: SearchKind, horizon: u64, eps: f64, delta: f64) -> Self {
        match kind {
            SearchKind::Plain => Searcher {
                kind,
                eps,
                reps: 1,
                narrow_margin: 0.0,
            },
            SearchKind::Robust { f } => Searcher {
                kind,
                eps,
                reps: robust_repetitions(horizon, eps, f, RateFunction::Log, delta),
                narrow_margin: 2.0 * f.evaluate(horizon as f64),
            },
        }
    }

    fn cap(&self) -> u64 {
        match self.kind {
            SearchKind::Plain => plain_search_cap(self.eps),
            SearchKind::Robust { .. } => robust_search_cap(self.eps, self.reps),
        }
    }

    /// Runs a search if it surely fits before the horizon, leaving one round
    /// to commit.
    fn run(
        &self,
        rounds: &mut dyn RoundSource,
        line: &SearchLine,
        report: &mut LearnerReport,
    ) -> Result<Option<SearchOutcome>> {
        if rounds.remaining() <= self.cap() {
            report.overran = true;
            return Ok(None);
        }
        let out = match self.kind {
            SearchKind::Plain => search_line(rounds, line, self.eps)?,
            SearchKind::Robust { .. } => robust_search_line(rounds, line, self.eps, self.reps, self.narrow_margin)?,
        };
        report.searches += 1;
        report.narrow_votes += out.narrow_votes;
        report.learning_rounds += out.rounds_used;
        Ok(Some(out))
    }
}

fn commit(rounds: &mut dyn RoundSource, cuts: CutVector, report: &mut LearnerReport) -> Result<()> {
    let n = rounds.remaining();
    report.committed = Some(cuts.clone());
    if n > 0 {
        rounds.play_repeated(&cuts, n)?;
    }
    Ok(())
}

/// Two-cut moving-knife learner: sweeps `x_i = η·i`, finds Bob's matching
/// `y_i`, keeps the pair best for Alice and leans it toward Bob.
#[derive(Clone, Debug)]
pub struct TwoCutLearner {
    name: &'static str,
    va: Density,
    bounds: ClassBounds,
    kind: SearchKind,
    eps_override: Option<f64>,
    pub report: LearnerReport,
}

/// Largest precision any strategy uses; small horizons otherwise ask for
/// searches coarser than the cake.
pub const MAX_EPS: f64 = 0.25;

impl TwoCutLearner {
    fn params(&self, horizon: u64) -> LearnerParams {
        let t = horizon.max(3) as f64;
        let (delta, upper) = (self.bounds.lower, self.bounds.upper);
        match self.kind {
            SearchKind::Plain => {
                let eps = self.eps_override.unwrap_or_else(|| (t.ln() / t).sqrt()).min(MAX_EPS);
                LearnerParams {
                    eps,
                    eta: upper * eps,
                    shift: eps * upper / delta,
                    reps: 1,
                }
            }
            SearchKind::Robust { f } => {
                let eps = self
                    .eps_override
                    .unwrap_or_else(|| f.evaluate(t).cbrt() * t.powf(-1.0 / 3.0) * t.ln().powf(2.0 / 3.0))
                    .min(MAX_EPS);
                let eta = eps * upper / delta;
                LearnerParams {
                    eps,
                    eta,
                    shift: 2.0 * eta,
                    reps: robust_repetitions(horizon, eps, f, RateFunction::Log, delta),
                }
            }
        }
    }
}

pub fn alice_2cut_myopic(va: Density, bounds: ClassBounds, eps_override: Option<f64>) -> TwoCutLearner {
    TwoCutLearner {
        name: "2cut-myopic",
        va,
        bounds,
        kind: SearchKind::Plain,
        eps_override,
        report: LearnerReport::default(),
    }
}

pub fn alice_2cut_robust(va: Density, bounds: ClassBounds, f: RateFunction) -> TwoCutLearner {
    TwoCutLearner {
        name: "2cut-robust",
        va,
        bounds,
        kind: SearchKind::Robust { f },
        eps_override: None,
        report: LearnerReport::default(),
    }
}

impl AliceStrategy for TwoCutLearner {
    fn name(&self) -> &str {
        self.name
    }

    fn play(&mut self, rounds: &mut dyn RoundSource) -> Result<()> {
        let k = rounds.k();
        if k < 2 {
            return Err(CakeError::Contract(format!("{} needs at least 2 cuts, got {k}", self.name)));
        }
        let p = self.params(rounds.horizon());
        let mut report = LearnerReport {
            params: Some(p),
            ..LearnerReport::default()
        };
        let searcher = Searcher::new(self.kind, rounds.horizon(), p.eps, self.bounds.lower);
        for i in 0.. {
            let x = p.eta * i as f64;
            if x >= 1.0 {
                break;
            }
            match searcher.run(rounds, &SearchLine::last_cut(&[x]), &mut report)? {
                Some(out) if out.found => report.learned.push((x, out.x_tilde)),
                _ => break,
            }
        }
        let pad = vec![0.0; k - 2];
        let best = report
            .learned
            .iter()
            .map(|&(x, y)| {
                let middle = self.va.value_between(x, y);
                (x, y, middle)
            })
            .fold(None, |acc: Option<(f64, f64, f64)>, c| match acc {
                Some(a) if a.2.max(1.0 - a.2) >= c.2.max(1.0 - c.2) => Some(a),
                _ => Some(c),
            });
        let cuts = match best {
            None => {
                report.fell_back = true;
                midpoint_cuts(&self.va, k)?
            }
            Some((x, y, middle)) => {
                // Bob's piece is the one Alice likes less
                let bob_piece = if middle >= 1.0 - middle {
                    PieceIndex::One
                } else {
                    PieceIndex::Two
                };
                let mut c = pad;
                c.extend(grow_piece(&[x, y.max(x)], bob_piece, p.shift));
                CutVector::new(c)?
            }
        };
        let result = commit(rounds, cuts, &mut report);
        self.report = report;
        result
    }
}

/// k-cut learner: maps Bob's value into intervals of equal worth around his
/// midpoint, then picks cuts along interval edges.
#[derive(Clone, Debug)]
pub struct KCutLearner {
    name: &'static str,
    va: Density,
    bounds: ClassBounds,
    kind: SearchKind,
    pub report: LearnerReport,
}

pub fn alice_kcut_myopic(va: Density, bounds: ClassBounds) -> KCutLearner {
    KCutLearner {
        name: "kcut-myopic",
        va,
        bounds,
        kind: SearchKind::Plain,
        report: LearnerReport::default(),
    }
}

pub fn alice_kcut_robust(va: Density, bounds: ClassBounds, f: RateFunction) -> KCutLearner {
    KCutLearner {
        name: "kcut-robust",
        va,
        bounds,
        kind: SearchKind::Robust { f },
        report: LearnerReport::default(),
    }
}

impl KCutLearner {
    fn params(&self, horizon: u64, k: usize) -> LearnerParams {
        let t = horizon.max(3) as f64;
        let kf = k as f64;
        let (delta, upper) = (self.bounds.lower, self.bounds.upper);
        let (eta, reps_f, extra) = match self.kind {
            SearchKind::Plain => ((t * kf).powf(-0.5), None, 1.0),
            SearchKind::Robust { f } => (
                (f.evaluate(t) / (t * kf)).powf(0.25) * t.ln().sqrt(),
                Some(f),
                2.0,
            ),
        };
        let eta = eta.min(MAX_EPS);
        let eps = delta * delta * eta * eta / 2.0;
        LearnerParams {
            eps,
            eta,
            shift: 3.0 * upper * eps / (delta * delta * eta) + extra * upper * eta / delta,
            reps: reps_f.map_or(1, |f| robust_repetitions(horizon, eps, f, RateFunction::Log, delta)),
        }
    }

    /// Everything before the commit; returns the learned grid (possibly
    /// partial) or `None` when not even Bob's midpoint was found.
    fn learn(
        &self,
        rounds: &mut dyn RoundSource,
        p: &LearnerParams,
        report: &mut LearnerReport,
    ) -> Result<Option<Vec<f64>>> {
        let searcher = Searcher::new(self.kind, rounds.horizon(), p.eps, self.bounds.lower);
        let mid = match searcher.run(rounds, &SearchLine::last_cut(&[]), report)? {
            Some(out) if out.found => out.x_tilde,
            _ => return Ok(None),
        };
        let x0 = mid - p.eta;
        if x0 <= 0.0 {
            return Ok(None);
        }
        let mut right = vec![x0, mid];
        // [0, x0) ∪ [x_i, z) worth 1/2 makes [x_i, z) worth as much as [x0, x1)
        loop {
            let xi = *right.last().unwrap();
            let line = SearchLine {
                prefix: vec![x0, xi],
                suffix: Vec::new(),
                lo: xi,
                hi: 1.0,
            };
            match searcher.run(rounds, &line, report)? {
                Some(out) if out.found && out.x_tilde > xi => right.push(out.x_tilde),
                _ => break,
            }
        }
        let anchor = right.get(2).copied().unwrap_or(1.0);
        let mut left = vec![x0];
        // [z, x_j) ∪ [x2, 1) worth 1/2 makes [z, x_j) worth as much as [x1, x2)
        while !report.overran {
            let xj = *left.last().unwrap();
            let line = SearchLine {
                prefix: Vec::new(),
                suffix: vec![xj, anchor],
                lo: 0.0,
                hi: xj,
            };
            match searcher.run(rounds, &line, report)? {
                Some(out) if out.found && out.x_tilde < xj => left.push(out.x_tilde),
                _ => break,
            }
        }
        left.reverse();
        left.pop();
        left.extend(right);
        Ok(Some(left))
    }
}

impl AliceStrategy for KCutLearner {
    fn name(&self) -> &str {
        self.name
    }

    fn play(&mut self, rounds: &mut dyn RoundSource) -> Result<()> {
        let k = rounds.k();
        if k < 3 {
            return Err(CakeError::Contract(format!("{} needs at least 3 cuts, got {k}", self.name)));
        }
        let p = self.params(rounds.horizon(), k);
        let mut report = LearnerReport {
            params: Some(p),
            ..LearnerReport::default()
        };
        let grid = self.learn(rounds, &p, &mut report)?;
        let cuts = match grid {
            Some(grid) => {
                let spans: Vec<(f64, f64)> = grid.windows(2).map(|w| (w[0], w[1])).collect();
                report.learned = spans.clone();
                report.grid = grid;
                let pick = interval_cut_dp(&self.va, &spans, k)?;
                CutVector::new(grow_piece(pick.cuts.cuts(), pick.bob_piece, p.shift))?
            }
            None => {
                report.fell_back = true;
                midpoint_cuts(&self.va, k)?
            }
        };
        let result = commit(rounds, cuts, &mut report);
        self.report = report;
        result
    }
}
