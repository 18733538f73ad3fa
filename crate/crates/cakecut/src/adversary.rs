//! Hard instance families: the alternating high/low densities σ₀ᵏ and their
//! spiked variants σ_{w;z}ᵏ, the bit-vector densities v_B^s, the pair of
//! Bob densities behind the unknown-rate lower bound, and a worked
//! two-cut example.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bob::BobState;
use crate::engine::{run_game_with_benchmark, AliceStrategy};
use crate::error::{CakeError, Result};
use crate::partitions::{alice_favoring_tie, piece_values, prefer, CutVector, PieceIndex};
use crate::valuations::Density;

/// Two-cut example with uniform Alice: the middle segment is worth 1/2 to Bob
/// at length 3/8, so `u_A*(2) = 5/8`, attained by cuts `(1/4, 5/8)`.
pub fn figure_one_bob() -> Density {
    Density::from_segments(&[(0.25, 0.625), (0.5, 1.5), (0.75, 1.0), (1.0, 0.875)])
        .expect("valid density")
}

pub const HIGH_DENSITY: f64 = 1.5;
pub const SPIKE_Z_RANGE: (f64, f64) = (5.0 / 6.0, 11.0 / 12.0);
pub const SPIKE_W_MAX: f64 = 1.0 / 48.0;

/// Layout of σ₀ᵏ: `k + 1` intervals alternating high, low, high, …
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeGeometry {
    pub k: usize,
    /// Length ℓ of each high interval.
    pub high_length: f64,
    pub high_count: usize,
    pub low_count: usize,
    pub low_length: f64,
    pub low_density: f64,
}

impl SpikeGeometry {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(CakeError::Contract(format!("spike family needs k >= 2, got {k}")));
        }
        let high_count = k / 2 + 1;
        let low_count = k.div_ceil(2);
        let high_length = 1.0 / (3.0 * ((k / 2) as f64 + 0.5));
        let high_measure = high_count as f64 * high_length;
        let low_measure = 1.0 - high_measure;
        Ok(SpikeGeometry {
            k,
            high_length,
            high_count,
            low_count,
            low_length: low_measure / low_count as f64,
            low_density: (1.0 - HIGH_DENSITY * high_measure) / low_measure,
        })
    }

    /// Total σ₀ᵏ value of the high intervals.
    pub fn high_value(&self) -> f64 {
        HIGH_DENSITY * self.high_length * self.high_count as f64
    }

    /// The `k` interval boundaries of σ₀ᵏ.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.k);
        let mut x = 0.0;
        for i in 0..self.k {
            x += if i % 2 == 0 { self.high_length } else { self.low_length };
            out.push(x);
        }
        out
    }
}

/// σ₀ᵏ.
pub fn unspiked_density(k: usize) -> Result<Density> {
    let g = SpikeGeometry::new(k)?;
    let mut breakpoints = vec![0.0];
    breakpoints.extend(g.boundaries());
    breakpoints.push(1.0);
    let values = (0..=k)
        .map(|i| if i % 2 == 0 { HIGH_DENSITY } else { g.low_density })
        .collect();
    Density::new(breakpoints, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeParams {
    pub k: usize,
    pub w: f64,
    pub z: f64,
}

impl SpikeParams {
    pub fn new(k: usize, w: f64, z: f64) -> Result<Self> {
        if k < 2 {
            return Err(CakeError::Contract(format!("spike family needs k >= 2, got {k}")));
        }
        if !(w > 0.0 && w <= SPIKE_W_MAX) {
            return Err(CakeError::Contract(format!("spike half-width {w} outside (0, 1/48]")));
        }
        if !(SPIKE_Z_RANGE.0..=SPIKE_Z_RANGE.1).contains(&z) {
            return Err(CakeError::Contract(format!("spike position {z} outside [5/6, 11/12]")));
        }
        Ok(SpikeParams { k, w, z })
    }

    /// Spike support `((z − w)ℓ, (z + w)ℓ)` and its centre `zℓ`.
    pub fn spike(&self) -> (f64, f64, f64) {
        let l = SpikeGeometry::new(self.k).expect("validated").high_length;
        ((self.z - self.w) * l, self.z * l, (self.z + self.w) * l)
    }
}

/// σ_{w;z}ᵏ: σ₀ᵏ with density 2 on the left half of the spike and 1 on the
/// right half.
pub fn spiked_density(p: &SpikeParams) -> Result<Density> {
    let p = SpikeParams::new(p.k, p.w, p.z)?;
    let g = SpikeGeometry::new(p.k)?;
    let (a, c, b) = p.spike();
    let mut breakpoints = vec![0.0, a, c, b];
    let mut values = vec![HIGH_DENSITY, 2.0, 1.0, HIGH_DENSITY];
    let bounds = g.boundaries();
    for (i, &x) in bounds.iter().enumerate() {
        breakpoints.push(x);
        if i > 0 {
            values.push(if i % 2 == 0 { HIGH_DENSITY } else { g.low_density });
        }
    }
    breakpoints.push(1.0);
    values.push(if p.k % 2 == 0 { HIGH_DENSITY } else { g.low_density });
    Density::new(breakpoints, values)
}

/// Whether myopic σ₀ᵏ and σ_{w;z}ᵏ choosers take different pieces when both
/// break ties toward `tie_favors`.
pub fn distinguishes(cuts: &CutVector, p: &SpikeParams, tie_favors: PieceIndex) -> Result<bool> {
    let flat = unspiked_density(p.k)?;
    let spiked = spiked_density(p)?;
    Ok(prefer(piece_values(&flat, cuts), tie_favors) != prefer(piece_values(&spiked, cuts), tie_favors))
}

/// Value of piece one under `d` as the last cut sweeps `[lo, hi]`, solved for
/// `target` by bisection (the map is monotone).
fn solve_last_cut(d: &Density, prefix: &[f64], lo: f64, hi: f64, target: f64) -> Option<f64> {
    let eval = |x: f64| {
        let mut c = prefix.to_vec();
        c.push(x);
        piece_values(d, &CutVector::new(c).expect("sorted")).0
    };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (eval(a) - target, eval(b) - target);
    if fa * fb > 0.0 {
        return None;
    }
    let rising = fb > fa;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (eval(m) - target > 0.0) == rising {
            b = m;
        } else {
            a = m;
        }
    }
    Some(0.5 * (a + b))
}

/// A distinguishing k-cut with the first cut at `first` inside the spike and
/// the others on the last `k − 1` boundaries of σ₀ᵏ, the final one nudged so
/// that piece one (holding 0) is worth `1/2 − slack` under σ₀ᵏ.
pub fn distinguishing_cut(p: &SpikeParams, first: f64, slack: f64) -> Result<CutVector> {
    let g = SpikeGeometry::new(p.k)?;
    let flat = unspiked_density(p.k)?;
    let bounds = g.boundaries();
    let mut prefix = vec![first];
    prefix.extend_from_slice(&bounds[1..p.k - 1]);
    let lo = *prefix.last().unwrap();
    let last = solve_last_cut(&flat, &prefix, lo, 1.0, 0.5 - slack)
        .ok_or_else(|| CakeError::Contract("no last cut reaches the target value".into()))?;
    prefix.push(last);
    CutVector::new(prefix)
}

/// The canonical distinguishing cut: first cut at the spike centre, slack a
/// quarter of the spike's value gain.
pub fn canonical_distinguishing_cut(p: &SpikeParams) -> Result<CutVector> {
    let (_, centre, _) = p.spike();
    let l = SpikeGeometry::new(p.k)?.high_length;
    distinguishing_cut(p, centre, 0.25 * p.w * l)
}

/// Samples a distinguishing k-cut: first cut uniform in the spike, slack
/// uniform below the value piece one gains from the spike.
pub fn sample_distinguishing_cut<R: Rng>(p: &SpikeParams, rng: &mut R) -> Result<CutVector> {
    let (a, c, b) = p.spike();
    loop {
        let first = rng.gen_range(a..b);
        // spiked minus flat value of [0, first)
        let gain = if first <= c {
            0.5 * (first - a)
        } else {
            0.5 * (b - first)
        };
        if gain < 1e-9 {
            continue;
        }
        let slack = rng.gen_range(0.05 * gain..0.95 * gain);
        return distinguishing_cut(p, first, slack);
    }
}

/// Truncated bit-vector density: `g(n) = 1/(2 + ln n)` splits `(0, 1/2)`
/// into blocks `[g(i+1), g(i))` with halves `L_i`, `R_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitVectorAdversary {
    pub bits: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BitVectorDensity {
    pub density: Density,
    /// Factor every raw value was multiplied by to restore unit mass.
    pub renormalization: f64,
}

pub fn block_edge(n: usize) -> f64 {
    1.0 / (2.0 + (n as f64).ln())
}

impl BitVectorAdversary {
    pub fn block_count(&self) -> usize {
        self.bits.len()
    }
}

pub fn bitvector_density(adv: &BitVectorAdversary) -> Result<BitVectorDensity> {
    let n = adv.block_count();
    if n == 0 {
        return Err(CakeError::Contract("bit-vector density needs at least one block".into()));
    }
    const LOW: f64 = 2.0 / 3.0;
    let mut breakpoints = vec![0.0];
    let mut values = vec![LOW];
    for i in (1..=n).rev() {
        let (lo, hi) = (block_edge(i + 1), block_edge(i));
        let s = if adv.bits[i - 1] { 1.0 } else { 0.0 };
        breakpoints.push(lo);
        values.push(2.0 - 4.0 / 3.0 * s);
        breakpoints.push(0.5 * (lo + hi));
        values.push(LOW + 4.0 / 3.0 * s);
    }
    breakpoints.push(0.5);
    values.push(LOW);
    breakpoints.push(1.0);
    let raw_mass: f64 = values
        .iter()
        .zip(breakpoints.windows(2))
        .map(|(v, w)| v * (w[1] - w[0]))
        .sum();
    let density = Density::normalized(breakpoints, values)?;
    Ok(BitVectorDensity {
        density,
        renormalization: 1.0 / raw_mass,
    })
}

/// `(v_B¹, v_B²)`: Bob's pretended and true densities for the unknown-rate
/// lower bound.
pub fn unknown_alpha_pair() -> (Density, Density) {
    let pretend = Density::from_segments(&[(0.5, 0.5), (1.0, 1.5)]).expect("valid density");
    let truth = Density::from_segments(&[(0.5, 0.25), (1.0, 1.75)]).expect("valid density");
    (pretend, truth)
}

/// Which whole regions each piece of an alternating partition contains when
/// `[0, 1]` is split at `region_bounds` into regions coloured red, blue, red, …
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionOutcome {
    /// `[piece][colour]` counts of whole regions; colour 0 is red.
    pub whole: [[usize; 2]; 2],
}

impl RegionOutcome {
    /// One piece holds a whole red and a whole blue region.
    pub fn mixed_piece(&self) -> bool {
        self.whole.iter().any(|p| p[0] > 0 && p[1] > 0)
    }

    /// Both pieces hold a whole region of one common colour.
    pub fn shared_colour(&self) -> bool {
        (0..2).any(|c| self.whole[0][c] > 0 && self.whole[1][c] > 0)
    }

    pub fn lemma_holds(&self) -> bool {
        self.mixed_piece() || self.shared_colour()
    }
}

pub fn alternating_region_outcome(region_bounds: &[f64], cuts: &CutVector) -> RegionOutcome {
    let (one, two) = crate::partitions::alternating_partition(cuts);
    let mut whole = [[0; 2]; 2];
    for (r, w) in region_bounds.windows(2).enumerate() {
        for (p, piece) in [&one, &two].into_iter().enumerate() {
            if piece.contains_interval(w[0], w[1]) {
                whole[p][r % 2] += 1;
            }
        }
    }
    RegionOutcome { whole }
}

/// Uniform-Alice Stackelberg value of a bit-vector density when Alice has
/// enough cuts to isolate every high half: Bob takes all the high mass and
/// tops up from the background.
pub fn bitvector_alice_value(adv: &BitVectorAdversary) -> Result<f64> {
    let d = bitvector_density(adv)?;
    let high = d.density.upper_bound();
    let low = d.density.lower_bound();
    let high_length = 0.5 * (0.5 - block_edge(adv.block_count() + 1));
    let extra = (0.5 - high * high_length) / low;
    Ok(1.0 - high_length - extra.max(0.0))
}

/// Centres of the candidate spikes: `⌊1/(2w)⌋` equal cells of
/// `[5/6, 11/12]`, one centre per cell midpoint.
pub fn spike_centres(w: f64) -> Result<Vec<f64>> {
    if !(w > 0.0 && w <= SPIKE_W_MAX) {
        return Err(CakeError::Contract(format!("spike half-width {w} outside (0, 1/48]")));
    }
    let count = (0.5 / w).floor() as usize;
    let (lo, hi) = SPIKE_Z_RANGE;
    let cell = (hi - lo) / count as f64;
    Ok((0..count).map(|j| lo + (j as f64 + 0.5) * cell).collect())
}

/// Distinguishing partitions a pretending Bob absorbs when Alice's
/// guarantee is against regret `T^α`: `⌊k·T^{(2α+1)/3}⌋`.
pub fn known_alpha_threshold(k: usize, horizon: u64, alpha: f64) -> u64 {
    (k as f64 * (horizon as f64).powf((2.0 * alpha + 1.0) / 3.0)).floor() as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeTranscript {
    pub centres: Vec<f64>,
    /// Distinguishing rounds seen per centre.
    pub counts: Vec<u64>,
    /// Round on which each centre's count reached the threshold.
    pub reached_at: Vec<Option<u64>>,
    pub threshold: u64,
    /// Rounds that distinguished at least one centre.
    pub distinguishing_rounds: u64,
}

/// Replays `alice` against a myopic σ₀ᵏ Bob and picks the spike she learns
/// about last: a centre never distinguished `threshold` times if there is
/// one (the lowest), else the one reaching `threshold` latest.
pub fn spike_adversary_search(
    alice: &mut dyn AliceStrategy,
    va: &Density,
    horizon: u64,
    k: usize,
    w: f64,
    threshold: u64,
) -> Result<(f64, SpikeTranscript)> {
    let centres = spike_centres(w)?;
    let flat = unspiked_density(k)?;
    let l = SpikeGeometry::new(k)?.high_length;
    let mut bob = BobState::myopic(flat.clone());
    let history = run_game_with_benchmark(alice, &mut bob, va, horizon, k, f64::NAN)?;

    let threshold = threshold.max(1);
    let (lo, hi) = SPIKE_Z_RANGE;
    let cell = (hi - lo) / centres.len() as f64;
    let mut spiked: Vec<Option<Density>> = vec![None; centres.len()];
    let mut counts = vec![0u64; centres.len()];
    let mut reached_at = vec![None; centres.len()];
    let mut distinguishing_rounds = 0;
    let mut start = 1u64;
    let mut hits = Vec::new();
    for run in &history.runs {
        let tie = alice_favoring_tie(piece_values(va, &run.cuts));
        let flat_choice = prefer(piece_values(&flat, &run.cuts), tie);
        // a spike holding no cut sits inside one piece and, being mass-neutral, changes nothing
        hits.clear();
        for &c in run.cuts.cuts() {
            let at = c / l;
            let first = ((at - w - lo) / cell - 0.5).floor().max(0.0) as usize;
            let last = (((at + w - lo) / cell - 0.5).ceil().max(0.0) as usize).min(centres.len() - 1);
            hits.extend((first..=last).filter(|&j| (centres[j] - at).abs() < w));
        }
        hits.sort_unstable();
        hits.dedup();
        let mut any = false;
        for &j in &hits {
            let d = match &spiked[j] {
                Some(d) => d,
                None => spiked[j].insert(spiked_density(&SpikeParams::new(k, w, centres[j])?)?),
            };
            if prefer(piece_values(d, &run.cuts), tie) == flat_choice {
                continue;
            }
            any = true;
            let before = counts[j];
            counts[j] += run.count;
            if before < threshold && counts[j] >= threshold {
                reached_at[j] = Some(start + (threshold - before) - 1);
            }
        }
        if any {
            distinguishing_rounds += run.count;
        }
        start += run.count;
    }
    let pick = match reached_at.iter().position(Option::is_none) {
        Some(j) => j,
        None => (0..centres.len())
            .max_by_key(|&j| (reached_at[j], std::cmp::Reverse(j)))
            .expect("at least one centre"),
    };
    Ok((
        centres[pick],
        SpikeTranscript {
            centres,
            counts,
            reached_at,
            threshold,
            distinguishing_rounds,
        },
    ))
}
