use cakecut::adversary::*;
use cakecut::bob::BobState;
use cakecut::engine::{regret_report, run_game_with_benchmark, FixedCuts};
use cakecut::partitions::{alice_favoring_tie, piece_values, prefer, CutVector, PieceIndex};
use cakecut::stackelberg::{stackelberg_bruteforce, stackelberg_exact};
use cakecut::valuations::{value_of, Density, Piece};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-12;

#[test]
fn two_cut_unspiked_segments() {
    let d = unspiked_density(2).unwrap();
    let bp = d.breakpoints();
    assert!((bp[1] - 2.0 / 9.0).abs() < EPS && (bp[2] - 7.0 / 9.0).abs() < EPS);
    let v = d.values();
    assert!((v[0] - 1.5).abs() < EPS && (v[1] - 0.6).abs() < EPS && (v[2] - 1.5).abs() < EPS);
}

#[test]
fn structural_bounds_hold_for_many_k() {
    for k in 2..=64 {
        let g = SpikeGeometry::new(k).unwrap();
        let kf = k as f64;
        assert!(g.high_value() > 0.5 && g.high_value() <= 2.0 / 3.0 + EPS, "k={k}");
        assert!(g.low_density > 0.5 && g.low_density < 0.75, "k={k}");
        assert!(g.low_length >= 5.0 / (6.0 * kf) - EPS, "k={k}");
        assert!(g.high_length >= 4.0 / (9.0 * kf) - EPS && g.high_length <= 2.0 / (3.0 * kf) + EPS);
        let d = unspiked_density(k).unwrap();
        assert!((d.cdf(1.0) - 1.0).abs() < EPS);
    }
}

#[test]
fn extreme_spike_parameters_are_valid() {
    let p = SpikeParams::new(2, SPIKE_W_MAX, 5.0 / 6.0).unwrap();
    let d = spiked_density(&p).unwrap();
    assert!(d.lower_bound() > 0.5 && d.upper_bound() <= 2.0);
    let (a, _, b) = p.spike();
    let flat = unspiked_density(2).unwrap();
    assert!((d.value_between(a, b) - flat.value_between(a, b)).abs() < EPS);
}

#[test]
fn spiked_value_gap_respects_similarity_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let k = rng.gen_range(2..=6);
        let p = SpikeParams::new(k, rng.gen_range(1e-3..=SPIKE_W_MAX), rng.gen_range(5.0 / 6.0..=11.0 / 12.0)).unwrap();
        let mut pts: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
        pts.sort_by(f64::total_cmp);
        let s = Piece::new(pts.chunks(2).map(|c| (c[0], c[1])).collect()).unwrap();
        let gap = (value_of(&unspiked_density(k).unwrap(), &s) - value_of(&spiked_density(&p).unwrap(), &s)).abs();
        assert!(gap <= 2.0 * p.w / (3.0 * k as f64) + EPS);
    }
}

#[test]
fn distinguishing_examples() {
    let p = SpikeParams::new(2, 0.01, 0.87).unwrap();
    let (a, _, b) = p.spike();
    // neither cut touches the spike
    let outside = CutVector::new(vec![a * 0.5, 0.6]).unwrap();
    for tie in [PieceIndex::One, PieceIndex::Two] {
        assert!(!distinguishes(&outside, &p, tie).unwrap());
        assert!(!distinguishes(&CutVector::new(vec![0.5, 0.5]).unwrap(), &p, tie).unwrap());
    }
    let canonical = canonical_distinguishing_cut(&p).unwrap();
    assert!(canonical.cuts()[0] > a && canonical.cuts()[0] < b);
    assert!(distinguishes(&canonical, &p, PieceIndex::One).unwrap());
    // direct integration agrees with the helper
    let flat = piece_values(&unspiked_density(2).unwrap(), &canonical);
    let spiked = piece_values(&spiked_density(&p).unwrap(), &canonical);
    assert!((flat.0 < flat.1) != (spiked.0 < spiked.1));
}

#[test]
fn distinguishing_partitions_cap_alice() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let uniform = Density::uniform();
    for i in 0..200 {
        let k = 2 + i % 5;
        let p = SpikeParams::new(k, rng.gen_range(1e-3..=SPIKE_W_MAX), rng.gen_range(5.0 / 6.0..=11.0 / 12.0)).unwrap();
        let cuts = sample_distinguishing_cut(&p, &mut rng).unwrap();
        let tie = alice_favoring_tie(piece_values(&uniform, &cuts));
        assert!(distinguishes(&cuts, &p, tie).unwrap());
        let flat_choice = prefer(piece_values(&unspiked_density(k).unwrap(), &cuts), tie);
        // Bob takes the σ₀-preferred piece; Alice keeps the other one
        let alice = flat_choice.other().pick(piece_values(&uniform, &cuts));
        assert!(alice <= 2.0 / 3.0 - 1.0 / (6.0 * k as f64) + 1e-9, "k={k} alice={alice}");
    }
}

#[test]
fn unknown_rate_pair_values() {
    let (pretend, truth) = unknown_alpha_pair();
    let uniform = Density::uniform();
    for k in 2..=4 {
        assert!((stackelberg_exact(&uniform, &pretend, k).unwrap().value - 2.0 / 3.0).abs() < 1e-9);
        assert!((stackelberg_exact(&uniform, &truth, k).unwrap().value - 5.0 / 7.0).abs() < 1e-9);
    }
}

#[test]
fn unknown_rate_pair_distinguishing_partitions() {
    let (pretend, truth) = unknown_alpha_pair();
    let uniform = Density::uniform();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut seen = 0;
    for _ in 0..20_000 {
        let cuts = CutVector::from_unsorted(vec![rng.gen(), rng.gen()]).unwrap();
        let tie = alice_favoring_tie(piece_values(&uniform, &cuts));
        let first = prefer(piece_values(&pretend, &cuts), tie);
        if first == prefer(piece_values(&truth, &cuts), tie) {
            continue;
        }
        seen += 1;
        // Alice keeps the piece the pretender leaves
        let left = first.other().pick(piece_values(&uniform, &cuts));
        assert!(left <= 0.5 + EPS, "cuts {:?} leave Alice {left}", cuts.cuts());
    }
    assert!(seen > 100);
}

#[test]
fn bitvector_single_block() {
    let d = bitvector_density(&BitVectorAdversary { bits: vec![false] }).unwrap();
    let (lo, hi) = (block_edge(2), block_edge(1));
    let mid = 0.5 * (lo + hi);
    let r = d.renormalization;
    assert!((d.density.value_at(0.5 * (lo + mid)) - 2.0 * r).abs() < EPS);
    assert!((d.density.value_at(0.5 * (mid + hi)) - 2.0 / 3.0 * r).abs() < EPS);
    assert!((d.density.value_at(0.75) - 2.0 / 3.0 * r).abs() < EPS);
    assert!((d.density.value_at(0.5 * lo) - 2.0 / 3.0 * r).abs() < EPS);
}

#[test]
fn bitvector_renormalization_is_small_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 1..=8 {
        let bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let d = bitvector_density(&BitVectorAdversary { bits }).unwrap();
        assert!((d.density.cdf(1.0) - 1.0).abs() < EPS);
        // the truncated tail [0, g(N+1)) is the only mass left out of the
        // block layout
        let perturbation = (1.0 / d.renormalization - 1.0).abs();
        assert!(perturbation <= block_edge(n + 1) * 4.0 / 3.0);
        assert!(d.density.lower_bound() >= 2.0 / 3.0 * d.renormalization - EPS);
        assert!(d.density.upper_bound() <= 2.0 * d.renormalization + EPS);
    }
}

#[test]
fn bitvector_value_matches_its_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let uniform = Density::uniform();
    for n in [2usize, 4, 8] {
        let adv = BitVectorAdversary {
            bits: (0..n).map(|_| rng.gen()).collect(),
        };
        let d = bitvector_density(&adv).unwrap();
        // enough cuts to isolate every high half
        let k = 2 * n + 2;
        let exact = stackelberg_exact(&uniform, &d.density, k).unwrap().value;
        let closed = bitvector_alice_value(&adv).unwrap();
        assert!((exact - closed).abs() < 1e-9, "n={n}: exact {exact}, closed form {closed}");
    }
    let adv = BitVectorAdversary { bits: vec![true; 8] };
    let d = bitvector_density(&adv).unwrap();
    let brute = stackelberg_bruteforce(&uniform, &d.density, 2, 1e-2).unwrap().value;
    assert!(brute <= stackelberg_exact(&uniform, &d.density, 2).unwrap().value + 1e-12);
}

#[test]
fn bit_flip_changes_only_its_block() {
    let a = BitVectorAdversary {
        bits: vec![false, true, false, true],
    };
    let mut b = a.clone();
    b.bits[2] = true;
    let da = bitvector_density(&a).unwrap().density;
    let db = bitvector_density(&b).unwrap().density;
    let (lo, hi) = (block_edge(4), block_edge(3));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let x: f64 = rng.gen();
        if x > lo && x < hi {
            continue;
        }
        assert!((da.value_at(x) - db.value_at(x)).abs() < EPS);
    }
    let mid = 0.5 * (lo + hi);
    assert!((da.value_at(0.5 * (lo + mid)) - db.value_at(0.5 * (mid + hi))).abs() < EPS);
}

#[test]
fn region_outcomes() {
    let bounds = [0.0, 0.25, 0.5, 0.75, 1.0];
    // one cut on the middle boundary: piece one holds red and blue
    let o = alternating_region_outcome(&bounds, &CutVector::new(vec![0.5]).unwrap());
    assert_eq!(o.whole, [[1, 1], [1, 1]]);
    assert!(o.mixed_piece() && o.shared_colour());
    // two cuts on the region boundaries split the colours perfectly, which
    // needs n - 1 = 3 cuts, so the lemma does not apply
    let o = alternating_region_outcome(&bounds, &CutVector::new(vec![0.25, 0.5, 0.75]).unwrap());
    assert!(!o.lemma_holds());
}

#[test]
fn spike_search_without_cuts_in_range() {
    let mut alice = FixedCuts {
        cuts: CutVector::new(vec![0.1, 0.6]).unwrap(),
    };
    let w = 0.01;
    let (z, transcript) = spike_adversary_search(&mut alice, &Density::uniform(), 500, 2, w, 3).unwrap();
    assert_eq!(z, spike_centres(w).unwrap()[0]);
    assert_eq!(transcript.distinguishing_rounds, 0);
    assert!(transcript.counts.iter().all(|&c| c == 0));
}

#[test]
fn spike_search_is_deterministic() {
    use cakecut::alice::{alice_2cut_myopic, ClassBounds};
    let uniform = Density::uniform();
    let k = 2usize;
    let t = 10_000u64;
    let w = 1.0 / (4.0 * ((t * k as u64) as f64).sqrt());
    let probe = spiked_density(&SpikeParams::new(k, w, 0.85).unwrap()).unwrap();
    let bounds = ClassBounds::covering(&[&uniform, &unspiked_density(k).unwrap(), &probe]);
    let run = || {
        let mut a = alice_2cut_myopic(uniform.clone(), bounds, None);
        spike_adversary_search(&mut a, &uniform, t, k, w, 1).unwrap()
    };
    let (z1, t1) = run();
    let (z2, t2) = run();
    assert_eq!(z1, z2);
    assert_eq!(t1, t2);
    assert!(spike_centres(w).unwrap().contains(&z1));
}

#[test]
fn pretend_bob_regret_is_bounded_by_distinguishing_rounds() {
    let k = 2;
    let p = SpikeParams::new(k, 0.015, 0.88).unwrap();
    let uniform = Density::uniform();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for threshold in [1u64, 3, 10] {
        let mut bob = BobState::pretend_sigma0(p, threshold).unwrap();
        let truth = bob.density().clone();
        let mut lost = 0.0;
        for _ in 0..40 {
            let cuts = if rng.gen_bool(0.5) {
                sample_distinguishing_cut(&p, &mut rng).unwrap()
            } else {
                CutVector::from_unsorted(vec![rng.gen(), rng.gen()]).unwrap()
            };
            let mut fixed = FixedCuts { cuts };
            let h = run_game_with_benchmark(&mut fixed, &mut bob, &uniform, 1, k, 0.0).unwrap();
            lost += regret_report(&h, &truth).bob_choice_regret;
        }
        // the counter keeps running past the threshold; only the early ones
        // were pretended
        assert!(bob.distinguishing_count() > 0);
        assert!(bob.max_deviation_loss() <= 4.0 * p.w / (3.0 * k as f64) + EPS);
        assert!(lost <= threshold as f64 * 4.0 * p.w / (3.0 * k as f64) + EPS);
    }
}
