//! Robertson-Webb queries with exact accounting, and the grid protocol that
//! finds an ε-Stackelberg allocation with `2⌈k/ε⌉` queries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{spiked_density, SpikeParams, SPIKE_W_MAX, SPIKE_Z_RANGE};
use crate::error::{CakeError, Result};
use crate::partitions::{CutVector, PieceIndex};
use crate::stackelberg::{discretized_from_cumulative, DEFAULT_BUDGET};
use crate::valuations::{cut_point, Density};

/// A player answering Cut and Eval queries about a private density.
#[derive(Clone, Debug)]
pub struct QueryOracle {
    density: Density,
    cut_count: u64,
    eval_count: u64,
    known: Vec<f64>,
}

impl QueryOracle {
    pub fn new(density: Density) -> Self {
        QueryOracle {
            density,
            cut_count: 0,
            eval_count: 0,
            known: vec![0.0, 1.0],
        }
    }

    /// The point `y` with `V([0, y]) = alpha`; `y` becomes a known cut point.
    pub fn cut(&mut self, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CakeError::Domain(format!("cut query value {alpha} outside [0, 1]")));
        }
        self.cut_count += 1;
        let y = cut_point(&self.density, alpha);
        if let Err(at) = self.known.binary_search_by(|p| p.total_cmp(&y)) {
            self.known.insert(at, y);
        }
        Ok(y)
    }

    /// `V([0, y])` for a previously established cut point `y`.
    pub fn eval(&mut self, y: f64) -> Result<f64> {
        if self.known.binary_search_by(|p| p.total_cmp(&y)).is_err() {
            return Err(CakeError::Contract(format!("eval at {y}, which is not an established cut point")));
        }
        self.eval_count += 1;
        Ok(self.density.cdf(y))
    }

    /// Makes points cut by another player available to Eval.
    pub fn learn_points(&mut self, points: &[f64]) {
        self.known.extend_from_slice(points);
        self.known.sort_by(f64::total_cmp);
        self.known.dedup();
    }

    pub fn cut_count(&self) -> u64 {
        self.cut_count
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count
    }

    pub fn density(&self) -> &Density {
        &self.density
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwOutcome {
    pub cuts: CutVector,
    pub bob_piece: PieceIndex,
    /// Alice's value of her piece, from query answers alone.
    pub alice_value: f64,
    pub grid_size: usize,
    pub cut_queries: u64,
    pub eval_queries: u64,
    pub query_total: u64,
    /// No grid cut gave Bob half the cake; the whole cake went to Bob.
    pub infeasible: bool,
}

/// Alice cuts the cake into `n = ⌈k/ε⌉` pieces of value `1/n`; Bob evaluates
/// every grid point; the best grid k-cut leaving Bob half is returned.
pub fn rw_eps_stackelberg(alice: &mut QueryOracle, bob: &mut QueryOracle, k: usize, eps: f64) -> Result<RwOutcome> {
    if k == 0 {
        return Err(CakeError::Domain("k must be at least 1".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(CakeError::Domain(format!("precision {eps} must lie in (0, 1]")));
    }
    let n = (k as f64 / eps).ceil() as usize;
    let (cuts_before, evals_before) = (
        alice.cut_count + bob.cut_count,
        alice.eval_count + bob.eval_count,
    );
    let mut grid = Vec::with_capacity(n + 1);
    let mut alice_cum = Vec::with_capacity(n + 1);
    grid.push(0.0);
    alice_cum.push(0.0);
    for j in 1..=n {
        grid.push(alice.cut(j as f64 / n as f64)?);
        alice_cum.push(j as f64 / n as f64);
    }
    // Alice's last cut lands on 1 exactly, so the grid closes
    if *grid.last().unwrap() != 1.0 {
        return Err(CakeError::Contract("Alice's full-value cut did not reach 1".into()));
    }
    bob.learn_points(&grid[1..]);
    let mut bob_cum = Vec::with_capacity(n + 1);
    bob_cum.push(0.0);
    for &y in &grid[1..] {
        bob_cum.push(bob.eval(y)?);
    }
    let sol = discretized_from_cumulative(&grid, &alice_cum, &bob_cum, k, DEFAULT_BUDGET)?;
    let cut_queries = alice.cut_count + bob.cut_count - cuts_before;
    let eval_queries = alice.eval_count + bob.eval_count - evals_before;
    let infeasible = sol.value == 0.0 && sol.cuts.cuts().iter().all(|&c| c == 1.0);
    Ok(RwOutcome {
        cuts: sol.cuts,
        bob_piece: sol.bob_piece,
        alice_value: sol.value,
        grid_size: n,
        cut_queries,
        eval_queries,
        query_total: cut_queries + eval_queries,
        infeasible,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RwFixture {
    pub alice: Density,
    pub bob: Density,
    pub hidden_z: f64,
    pub w: f64,
}

/// Uniform Alice against σ_{w;z}² with `w = 14ε` and `z` uniform on the
/// spike range.
pub fn rw_lower_bound_fixture(eps: f64, seed: u64) -> Result<RwFixture> {
    rw_spiked_fixture(14.0 * eps, seed)
}

/// The same family with the spike half-width given directly.
pub fn rw_spiked_fixture(w: f64, seed: u64) -> Result<RwFixture> {
    if !(w > 0.0 && w <= SPIKE_W_MAX) {
        return Err(CakeError::Contract(format!("spike half-width {w} outside (0, 1/48]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = rng.gen_range(SPIKE_Z_RANGE.0..=SPIKE_Z_RANGE.1);
    let bob = spiked_density(&SpikeParams::new(2, w, z)?)?;
    Ok(RwFixture {
        alice: Density::uniform(),
        bob,
        hidden_z: z,
        w,
    })
}
