//! The repeated game: a round-budget session that strategies draw rounds
//! from, run-length compressed histories, and both players' regrets.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bob::{choice_loss, BobState};
use crate::error::{CakeError, Result};
use crate::partitions::{alice_favoring_tie, piece_values, prefer, CutVector, PieceIndex};
use crate::stackelberg::stackelberg_exact;
use crate::valuations::{Density, WarpMap};

/// A source of game rounds shared by a strategy and all its subroutines.
pub trait RoundSource {
    fn horizon(&self) -> u64;
    fn played(&self) -> u64;
    /// Number of cuts every round must use.
    fn k(&self) -> usize;

    fn remaining(&self) -> u64 {
        self.horizon() - self.played()
    }

    /// Plays `count` identical rounds and returns Bob's choices as
    /// `(piece, rounds)` runs. When fewer rounds remain, plays those and
    /// fails with [`CakeError::Exhausted`].
    fn play_repeated(&mut self, cuts: &CutVector, count: u64) -> Result<Vec<(PieceIndex, u64)>>;

    fn play(&mut self, cuts: &CutVector) -> Result<PieceIndex> {
        Ok(self.play_repeated(cuts, 1)?[0].0)
    }
}

/// A deterministic cutter driving a whole game.
pub trait AliceStrategy {
    fn name(&self) -> &str;
    /// Plays until the horizon is used up; may stop early only by
    /// propagating [`CakeError::Exhausted`].
    fn play(&mut self, rounds: &mut dyn RoundSource) -> Result<()>;
}

/// Identical consecutive rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub cuts: CutVector,
    pub bob_choice: PieceIndex,
    pub count: u64,
    /// Alice's value of the piece Bob left her, per round.
    pub alice_utility: f64,
    /// Bob's true value of his piece, per round.
    pub bob_utility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub horizon: u64,
    pub k: usize,
    pub u_star_alice: f64,
    pub runs: Vec<Run>,
}

/// Compensated summation; long games add 10¹² small terms.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    carry: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl History {
    pub fn len(&self) -> u64 {
        self.runs.iter().map(|r| r.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn alice_total(&self) -> f64 {
        let mut s = NeumaierSum::default();
        for r in &self.runs {
            s.add(r.count as f64 * r.alice_utility);
        }
        s.value()
    }

    /// Every round in order, numbered from 1.
    pub fn rounds(&self) -> impl Iterator<Item = (u64, &Run)> + '_ {
        self.runs
            .iter()
            .flat_map(|r| std::iter::repeat_n(r, r.count as usize))
            .zip(1u64..)
            .map(|(r, t)| (t, r))
    }

    /// Per-round CSV: `round,cut1..cutk,choice,uA,uB`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["round".to_string()];
        header.extend((1..=self.k).map(|i| format!("cut{i}")));
        header.extend(["choice", "uA", "uB"].map(String::from));
        w.write_record(&header)?;
        for (t, r) in self.rounds() {
            let mut row = vec![t.to_string()];
            row.extend(r.cuts.cuts().iter().map(|c| c.to_string()));
            row.push(r.bob_choice.to_string());
            row.push(r.alice_utility.to_string());
            row.push(r.bob_utility.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| CakeError::io(std::path::Path::new("<csv>"), e))?;
        Ok(())
    }

    /// Reads the per-round CSV back; the benchmark is not part of the
    /// format and must be supplied.
    pub fn read_csv<R: Read>(input: R, u_star_alice: f64) -> Result<History> {
        let mut rd = csv::Reader::from_reader(input);
        let k = rd.headers()?.len().checked_sub(4).filter(|k| *k > 0).ok_or_else(|| {
            CakeError::Contract("history CSV needs round, cut, choice, uA and uB columns".into())
        })?;
        let mut runs: Vec<Run> = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let field = |j: usize| -> Result<f64> {
                rec[j].parse::<f64>().map_err(|e| CakeError::Parse {
                    path: "<csv>".into(),
                    line: i + 2,
                    msg: format!("column {}: {e}", j + 1),
                })
            };
            let cuts = CutVector::new((1..=k).map(field).collect::<Result<_>>()?)?;
            let choice = PieceIndex::try_from(field(k + 1)? as u8).map_err(|msg| CakeError::Parse {
                path: "<csv>".into(),
                line: i + 2,
                msg,
            })?;
            let run = Run {
                cuts,
                bob_choice: choice,
                count: 1,
                alice_utility: field(k + 2)?,
                bob_utility: field(k + 3)?,
            };
            push_run(&mut runs, run);
        }
        let horizon = runs.iter().map(|r| r.count).sum();
        Ok(History {
            horizon,
            k,
            u_star_alice,
            runs,
        })
    }
}

fn push_run(runs: &mut Vec<Run>, run: Run) {
    if let Some(last) = runs.last_mut() {
        if last.cuts == run.cuts
            && last.bob_choice == run.bob_choice
            && last.alice_utility == run.alice_utility
            && last.bob_utility == run.bob_utility
        {
            last.count += run.count;
            return;
        }
    }
    runs.push(run);
}

/// The engine's round source: validates cuts, asks Bob, records the run.
pub struct Session<'a> {
    alice: &'a Density,
    bob: &'a mut BobState,
    k: usize,
    horizon: u64,
    played: u64,
    runs: Vec<Run>,
}

impl<'a> Session<'a> {
    pub fn new(alice: &'a Density, bob: &'a mut BobState, horizon: u64, k: usize) -> Result<Self> {
        if horizon == 0 || k == 0 {
            return Err(CakeError::Domain(format!("need T ≥ 1 and k ≥ 1, got T={horizon}, k={k}")));
        }
        Ok(Session {
            alice,
            bob,
            k,
            horizon,
            played: 0,
            runs: Vec::new(),
        })
    }

    pub fn into_runs(self) -> Vec<Run> {
        self.runs
    }
}

impl RoundSource for Session<'_> {
    fn horizon(&self) -> u64 {
        self.horizon
    }

    fn played(&self) -> u64 {
        self.played
    }

    fn k(&self) -> usize {
        self.k
    }

    fn play_repeated(&mut self, cuts: &CutVector, count: u64) -> Result<Vec<(PieceIndex, u64)>> {
        if cuts.k() != self.k {
            return Err(CakeError::Contract(format!(
                "round {}: strategy made {} cuts, the game uses {}",
                self.played + 1,
                cuts.k(),
                self.k
            )));
        }
        let granted = count.min(self.remaining());
        if granted == 0 {
            return Err(CakeError::Exhausted(self.played));
        }
        let alice_values = piece_values(self.alice, cuts);
        let bob_values = piece_values(self.bob.density(), cuts);
        let choices = self.bob.respond(cuts, alice_values, granted);
        for &(choice, n) in &choices {
            push_run(
                &mut self.runs,
                Run {
                    cuts: cuts.clone(),
                    bob_choice: choice,
                    count: n,
                    alice_utility: choice.other().pick(alice_values),
                    bob_utility: choice.pick(bob_values),
                },
            );
        }
        self.played += granted;
        if granted < count {
            return Err(CakeError::Exhausted(self.played));
        }
        Ok(choices)
    }
}

/// Forwards rounds to `inner` with every cut pushed through `map`.
pub struct WarpedSource<'a> {
    inner: &'a mut dyn RoundSource,
    map: &'a WarpMap,
}

impl<'a> WarpedSource<'a> {
    pub fn new(inner: &'a mut dyn RoundSource, map: &'a WarpMap) -> Self {
        WarpedSource { inner, map }
    }
}

impl RoundSource for WarpedSource<'_> {
    fn horizon(&self) -> u64 {
        self.inner.horizon()
    }

    fn played(&self) -> u64 {
        self.inner.played()
    }

    fn k(&self) -> usize {
        self.inner.k()
    }

    fn play_repeated(&mut self, cuts: &CutVector, count: u64) -> Result<Vec<(PieceIndex, u64)>> {
        let warped = CutVector::from_unsorted(cuts.cuts().iter().map(|&c| self.map.apply(c)).collect())?;
        self.inner.play_repeated(&warped, count)
    }
}

/// Plays a full game; the benchmark `u_A*(k)` comes from the exact solver.
pub fn run_game(
    alice: &mut dyn AliceStrategy,
    bob: &mut BobState,
    va: &Density,
    horizon: u64,
    k: usize,
) -> Result<History> {
    let u_star = stackelberg_exact(va, bob.density(), k)?.value;
    run_game_with_benchmark(alice, bob, va, horizon, k, u_star)
}

/// [`run_game`] with a precomputed benchmark.
pub fn run_game_with_benchmark(
    alice: &mut dyn AliceStrategy,
    bob: &mut BobState,
    va: &Density,
    horizon: u64,
    k: usize,
    u_star_alice: f64,
) -> Result<History> {
    let mut session = Session::new(va, bob, horizon, k)?;
    match alice.play(&mut session) {
        Ok(()) | Err(CakeError::Exhausted(_)) => {}
        Err(e) => return Err(e),
    }
    if session.remaining() > 0 {
        return Err(CakeError::Contract(format!(
            "strategy {} stopped after {} of {} rounds",
            alice.name(),
            session.played(),
            horizon
        )));
    }
    Ok(History {
        horizon,
        k,
        u_star_alice,
        runs: session.into_runs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRegret {
    pub first_round: u64,
    pub count: u64,
    /// Per-round increments; the run contributes `count` times each.
    pub alice_increment: f64,
    pub bob_increment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub alice_stackelberg_regret: f64,
    pub bob_choice_regret: f64,
    pub per_run: Vec<RunRegret>,
}

/// Alice: `T·u_A*(k) − Σ u_A^t`. Bob: `Σ max piece value − u_B^t`, where
/// an exact tie costs nothing.
pub fn regret_report(h: &History, vb: &Density) -> RegretReport {
    let mut alice = NeumaierSum::default();
    let mut bob = NeumaierSum::default();
    let mut per_run = Vec::with_capacity(h.runs.len());
    let mut first_round = 1;
    for r in &h.runs {
        let alice_increment = h.u_star_alice - r.alice_utility;
        let bob_increment = choice_loss(piece_values(vb, &r.cuts), r.bob_choice);
        alice.add(r.count as f64 * alice_increment);
        bob.add(r.count as f64 * bob_increment);
        per_run.push(RunRegret {
            first_round,
            count: r.count,
            alice_increment,
            bob_increment,
        });
        first_round += r.count;
    }
    RegretReport {
        alice_stackelberg_regret: alice.value(),
        bob_choice_regret: bob.value(),
        per_run,
    }
}

/// Bob's myopic choice against `cuts` with ties to Alice.
pub fn myopic_choice(va: &Density, vb: &Density, cuts: &CutVector) -> PieceIndex {
    prefer(piece_values(vb, cuts), alice_favoring_tie(piece_values(va, cuts)))
}

/// Least-squares slope of `ln y` on `ln x`; needs at least three points,
/// all positive.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(CakeError::Contract(format!(
            "an exponent fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(CakeError::Domain(format!("cannot fit a log-log slope through {p:?}")));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(CakeError::Domain("all x values coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Commits to fixed cuts for the whole game.
#[derive(Clone, Debug)]
pub struct FixedCuts {
    pub cuts: CutVector,
}

impl AliceStrategy for FixedCuts {
    fn name(&self) -> &str {
        "fixed"
    }

    fn play(&mut self, rounds: &mut dyn RoundSource) -> Result<()> {
        let n = rounds.remaining();
        rounds.play_repeated(&self.cuts, n)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{figure_one_bob, unspiked_density};

    #[test]
    fn uniform_half_cut_game() {
        let u = Density::uniform();
        let mut bob = BobState::myopic(u.clone());
        let mut alice = FixedCuts {
            cuts: CutVector::new(vec![0.5]).unwrap(),
        };
        let h = run_game(&mut alice, &mut bob, &u, 10, 1).unwrap();
        assert_eq!(h.len(), 10);
        assert_eq!(h.runs.len(), 1);
        for (_, r) in h.rounds() {
            assert_eq!((r.alice_utility, r.bob_utility), (0.5, 0.5));
        }
        let rep = regret_report(&h, &u);
        assert_eq!(rep.bob_choice_regret, 0.0);
        assert!(rep.alice_stackelberg_regret.abs() < 1e-9);
    }

    #[test]
    fn committed_stackelberg_cuts_have_no_regret() {
        let u = Density::uniform();
        for (vb, value) in [(figure_one_bob(), 0.625), (unspiked_density(2).unwrap(), 2.0 / 3.0)] {
            let sol = stackelberg_exact(&u, &vb, 2).unwrap();
            let mut bob = BobState::myopic(vb.clone());
            let mut alice = FixedCuts { cuts: sol.cuts.clone() };
            let h = run_game(&mut alice, &mut bob, &u, 1000, 2).unwrap();
            for r in &h.runs {
                assert!((r.alice_utility - value).abs() < 1e-9);
            }
            let rep = regret_report(&h, &vb);
            assert!(rep.alice_stackelberg_regret.abs() < 1e-9);
            assert_eq!(rep.bob_choice_regret, 0.0);
        }
    }

    #[test]
    fn wrong_cut_count_names_the_round() {
        let u = Density::uniform();
        let mut bob = BobState::myopic(u.clone());
        let mut alice = FixedCuts {
            cuts: CutVector::new(vec![0.5]).unwrap(),
        };
        let err = run_game(&mut alice, &mut bob, &u, 5, 2).unwrap_err();
        assert!(err.to_string().contains("round 1"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let u = Density::uniform();
        let vb = figure_one_bob();
        let mut bob = BobState::myopic(vb);
        let mut session = Session::new(&u, &mut bob, 6, 2).unwrap();
        for c in [[0.2, 0.6], [0.2, 0.6], [0.1, 0.3]] {
            session.play(&CutVector::new(c.to_vec()).unwrap()).unwrap();
        }
        session.play_repeated(&CutVector::new(vec![0.25, 0.625]).unwrap(), 3).unwrap();
        assert!(matches!(
            session.play(&CutVector::new(vec![0.5, 0.5]).unwrap()),
            Err(CakeError::Exhausted(6))
        ));
        let h = History {
            horizon: 6,
            k: 2,
            u_star_alice: 0.625,
            runs: session.into_runs(),
        };
        assert_eq!(h.runs.len(), 3);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("round,cut1,cut2,choice,uA,uB\n"));
        assert_eq!(History::read_csv(&buf[..], 0.625).unwrap(), h);
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(serde_json::from_str::<History>(&json).unwrap(), h);
    }

    #[test]
    fn exponent_fit() {
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5].iter().map(|t: &f64| (*t, 3.0 * t.powf(0.5))).collect();
        assert!((fit_exponent(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert!(fit_exponent(&pts[..2]).is_err());
    }
}
