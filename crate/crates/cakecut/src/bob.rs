//! Bob automata: the myopic chooser, the two lower-bound deceivers, and a
//! maximal liar used to stress the robust searches.
//!
//! Every automaton answers runs of identical rounds in bulk so that long
//! commit phases cost O(1) instead of O(rounds).

use crate::adversary::{spiked_density, unspiked_density, SpikeParams};
use crate::error::{CakeError, Result};
use crate::partitions::{alice_favoring_tie, piece_values, prefer, CutVector, PieceIndex, TIE_TOLERANCE};
use crate::valuations::Density;

/// Default multiplier on `c·T^β` for the budget-switching Bob.
pub const DEFAULT_BUDGET_MULTIPLIER: f64 = 6.0;

#[derive(Clone, Debug, PartialEq)]
pub enum BobMode {
    Myopic,
    /// Plays as a myopic σ₀ᵏ Bob on the first `threshold` distinguishing
    /// partitions, then myopically under the true spiked density.
    PretendSigma0 {
        params: SpikeParams,
        unspiked: Density,
        threshold: u64,
        distinguishing_count: u64,
    },
    /// Plays myopically under `pretend` while that keeps the ledger within
    /// `threshold`.
    BudgetSwitch { pretend: Density, threshold: f64 },
    /// Takes the worse piece whenever the lie still fits in `budget`.
    Liar { budget: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BobState {
    density: Density,
    mode: BobMode,
    ledger: f64,
    max_deviation_loss: f64,
}

/// Bob's loss for taking `choice` given his true piece values; exact ties
/// cost nothing.
pub fn choice_loss(values: (f64, f64), choice: PieceIndex) -> f64 {
    let gap = values.0 - values.1;
    if gap.abs() <= TIE_TOLERANCE {
        return 0.0;
    }
    (values.0.max(values.1) - choice.pick(values)).max(0.0)
}

impl BobState {
    pub fn myopic(density: Density) -> Self {
        Self::with_mode(density, BobMode::Myopic)
    }

    /// A spiked Bob that impersonates σ₀ᵏ on `threshold` distinguishing
    /// partitions; `threshold = 0` is plain myopic play.
    pub fn pretend_sigma0(params: SpikeParams, threshold: u64) -> Result<Self> {
        let density = spiked_density(&params)?;
        let unspiked = unspiked_density(params.k)?;
        Ok(Self::with_mode(
            density,
            BobMode::PretendSigma0 {
                params,
                unspiked,
                threshold,
                distinguishing_count: 0,
            },
        ))
    }

    pub fn budget_switch(truth: Density, pretend: Density, threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0) {
            return Err(CakeError::Domain(format!("budget threshold {threshold} must be ≥ 0")));
        }
        Ok(Self::with_mode(truth, BobMode::BudgetSwitch { pretend, threshold }))
    }

    pub fn liar(density: Density, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) {
            return Err(CakeError::Domain(format!("lying budget {budget} must be ≥ 0")));
        }
        Ok(Self::with_mode(density, BobMode::Liar { budget }))
    }

    fn with_mode(density: Density, mode: BobMode) -> Self {
        BobState {
            density,
            mode,
            ledger: 0.0,
            max_deviation_loss: 0.0,
        }
    }

    /// Bob's true density.
    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn mode(&self) -> &BobMode {
        &self.mode
    }

    /// Running sum of `u_B*(t) − u_B^t`.
    pub fn regret_ledger(&self) -> f64 {
        self.ledger
    }

    /// Largest single-round loss taken by a non-myopic choice so far.
    pub fn max_deviation_loss(&self) -> f64 {
        self.max_deviation_loss
    }

    pub fn distinguishing_count(&self) -> u64 {
        match &self.mode {
            BobMode::PretendSigma0 {
                distinguishing_count, ..
            } => *distinguishing_count,
            _ => 0,
        }
    }

    /// One round's choice. `alice_values` fixes the tie-breaking side.
    pub fn choose(&mut self, cuts: &CutVector, alice_values: (f64, f64)) -> PieceIndex {
        self.respond(cuts, alice_values, 1)[0].0
    }

    /// Choices for `count` identical rounds as `(piece, rounds)` runs in
    /// play order; run counts sum to `count`.
    pub fn respond(&mut self, cuts: &CutVector, alice_values: (f64, f64), count: u64) -> Vec<(PieceIndex, u64)> {
        if count == 0 {
            return Vec::new();
        }
        let tie = alice_favoring_tie(alice_values);
        let values = piece_values(&self.density, cuts);
        let best = prefer(values, tie);
        let ledger = self.ledger;
        let (deviant, deviant_rounds) = match &mut self.mode {
            BobMode::Myopic => (best, 0),
            BobMode::PretendSigma0 {
                unspiked,
                threshold,
                distinguishing_count,
                ..
            } => {
                let pretend = prefer(piece_values(unspiked, cuts), tie);
                if pretend == best {
                    (best, 0)
                } else {
                    let early = threshold.saturating_sub(*distinguishing_count);
                    *distinguishing_count += count;
                    (pretend, early.min(count))
                }
            }
            BobMode::BudgetSwitch { pretend, threshold } => {
                let choice = prefer(piece_values(pretend, cuts), tie);
                let loss = choice_loss(values, choice);
                (choice, rounds_within(ledger, loss, *threshold, count))
            }
            BobMode::Liar { budget } => {
                let lie = best.other();
                let loss = choice_loss(values, lie);
                (lie, rounds_within(ledger, loss, *budget, count))
            }
        };
        let mut runs = Vec::with_capacity(2);
        if deviant_rounds > 0 {
            let loss = choice_loss(values, deviant);
            self.ledger += deviant_rounds as f64 * loss;
            if loss > 0.0 {
                self.max_deviation_loss = self.max_deviation_loss.max(loss);
            }
            runs.push((deviant, deviant_rounds));
        }
        if deviant_rounds < count {
            runs.push((best, count - deviant_rounds));
        }
        if runs.len() == 2 && runs[0].0 == runs[1].0 {
            runs[0].1 += runs.pop().unwrap().1;
        }
        runs
    }
}

/// How many of `count` rounds a deviation costing `loss` each can be played
/// before the ledger would pass `limit`.
fn rounds_within(ledger: f64, loss: f64, limit: f64, count: u64) -> u64 {
    if loss == 0.0 {
        return if ledger <= limit { count } else { 0 };
    }
    let fits = |j: u64| ledger + j as f64 * loss <= limit;
    let guess = ((limit - ledger) / loss).floor();
    if !(guess >= 0.0) {
        return 0;
    }
    let mut j = (guess.min(count as f64) as u64).min(count);
    while j > 0 && !fits(j) {
        j -= 1;
    }
    while j < count && fits(j + 1) {
        j += 1;
    }
    j
}
