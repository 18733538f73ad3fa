use cakecut::adversary::{figure_one_bob, unknown_alpha_pair, unspiked_density, SpikeGeometry};
use cakecut::partitions::piece_values;
use cakecut::stackelberg::{
    cuts_from_intervals, discretized_stackelberg, stackelberg_bruteforce, stackelberg_exact,
};
use cakecut::valuations::{Density, Piece};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn figure_one_value() {
    let (va, vb) = (Density::uniform(), figure_one_bob());
    let exact = stackelberg_exact(&va, &vb, 2).unwrap();
    assert!((exact.value - 0.625).abs() < 1e-12);
    assert!((exact.bob_value - 0.5).abs() < 1e-9);
    let brute = stackelberg_bruteforce(&va, &vb, 2, 1e-3).unwrap();
    assert!((brute.value - 0.625).abs() <= 2e-3);
}

#[test]
fn symmetric_and_spike_family_values() {
    let uniform = Density::uniform();
    assert!((stackelberg_bruteforce(&uniform, &uniform, 1, 1e-3).unwrap().value - 0.5).abs() < 1e-9);
    let flat = unspiked_density(2).unwrap();
    assert!((stackelberg_bruteforce(&uniform, &flat, 2, 1e-3).unwrap().value - 2.0 / 3.0).abs() <= 2e-3);
    let (pretend, truth) = unknown_alpha_pair();
    assert!((stackelberg_exact(&uniform, &pretend, 2).unwrap().value - 2.0 / 3.0).abs() < 1e-9);
    assert!((stackelberg_exact(&uniform, &truth, 2).unwrap().value - 5.0 / 7.0).abs() < 1e-9);
}

#[test]
fn exact_dominates_and_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..30 {
        let va = Density::random(&mut rng, 4, 0.5, 2.0);
        let vb = Density::random(&mut rng, 4, 0.5, 2.0);
        for k in 1..=3 {
            let exact = stackelberg_exact(&va, &vb, k).unwrap();
            let h = if k == 3 { 2e-2 } else { 5e-3 };
            let brute = stackelberg_bruteforce(&va, &vb, k, h).unwrap();
            assert!(brute.value <= exact.value + 1e-9);
            // a grid step of h costs Alice at most about k·h·Δ
            assert!(exact.value - brute.value <= 2.0 * k as f64 * h * va.upper_bound() * vb.upper_bound() / vb.lower_bound());
            let (a, b) = piece_values(&va, &exact.cuts);
            assert!((exact.value + exact.bob_piece.pick((a, b)) - 1.0).abs() < 1e-12);
            assert!(exact.bob_value >= 0.5 - 1e-9);
        }
    }
}

#[test]
fn discretized_examples() {
    let (va, vb) = (Density::uniform(), figure_one_bob());
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    let sol = discretized_stackelberg(&va, &vb, 2, &grid).unwrap();
    let slack = 2.0 / 200.0 * vb.upper_bound() / vb.lower_bound();
    assert!(sol.value >= 0.625 - slack);
    assert!(sol.value <= 0.625 + 1e-12);

    let exact = stackelberg_exact(&va, &vb, 2).unwrap();
    let mut rich: Vec<f64> = vb.breakpoints().to_vec();
    rich.extend_from_slice(exact.cuts.cuts());
    rich.sort_by(f64::total_cmp);
    rich.dedup();
    assert!((discretized_stackelberg(&va, &vb, 2, &rich).unwrap().value - exact.value).abs() < 1e-12);

    let uniform = Density::uniform();
    assert!((discretized_stackelberg(&uniform, &uniform, 1, &[0.0, 0.5, 1.0]).unwrap().value - 0.5).abs() < 1e-15);
}

#[test]
fn interval_cuts_examples() {
    let uniform = Density::uniform();
    let single = cuts_from_intervals(&uniform, &[Piece::interval(0.3, 0.6).unwrap()], 0.3, 0.01, 1, 2).unwrap();
    assert_eq!(single.cuts.cuts(), &[0.3, 0.6]);

    let halves = [Piece::interval(0.1, 0.3).unwrap(), Piece::interval(0.6, 0.8).unwrap()];
    let out = cuts_from_intervals(&uniform, &halves, 0.3, 0.01, 1, 2).unwrap();
    for c in out.cuts.cuts() {
        assert!([0.0, 0.1, 0.3, 0.6, 0.8, 1.0].iter().any(|b| (b - c).abs() < 1e-15), "cut {c} inside an interval");
    }
    assert!(out.bob_interval_count > out.alice_interval_count);
}

#[test]
fn interval_cuts_on_the_four_cut_family() {
    let uniform = Density::uniform();
    let k = 4;
    let g = SpikeGeometry::new(k).unwrap();
    let b = g.boundaries();
    let highs = [
        Piece::interval(0.0, b[0]).unwrap(),
        Piece::interval(b[1], b[2]).unwrap(),
        Piece::interval(b[3], 1.0).unwrap(),
    ];
    let (eta, eps, r) = (0.2, 0.01, 1);
    let out = cuts_from_intervals(&uniform, &highs, eta, eps, r, k).unwrap();
    let flat = unspiked_density(k).unwrap();
    let exact = stackelberg_exact(&uniform, &flat, k).unwrap().value;
    let slack = (k + 2 * r) as f64 * (eta + eps) * flat.upper_bound() / flat.lower_bound();
    assert!(out.alice_value >= exact - slack);
    assert!(cuts_from_intervals(&uniform, &highs, 0.1, 0.01, r, k).is_err());
}
