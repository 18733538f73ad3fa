use cakecut::adversary::{unknown_alpha_pair, unspiked_density};
use cakecut::alice::{alice_2cut_myopic, alice_kcut_myopic, ClassBounds};
use cakecut::bob::BobState;
use cakecut::engine::{regret_report, run_game, FixedCuts, History, RegretReport};
use cakecut::stackelberg::stackelberg_exact;
use cakecut::valuations::Density;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_game(seed: u64, horizon: u64) -> (History, Density) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let va = Density::random(&mut rng, 5, 0.5, 2.0);
    let vb = Density::random(&mut rng, 5, 0.5, 2.0);
    let bounds = ClassBounds::covering(&[&va, &vb]);
    let mut alice = alice_2cut_myopic(va.clone(), bounds, None);
    let h = run_game(&mut alice, &mut BobState::myopic(vb.clone()), &va, horizon, 2).unwrap();
    (h, vb)
}

#[test]
fn committed_flat_family_cuts_pay_two_thirds() {
    let uniform = Density::uniform();
    let flat = unspiked_density(2).unwrap();
    let sol = stackelberg_exact(&uniform, &flat, 2).unwrap();
    let mut alice = FixedCuts { cuts: sol.cuts.clone() };
    let h = run_game(&mut alice, &mut BobState::myopic(flat.clone()), &uniform, 1000, 2).unwrap();
    assert!(h.rounds().all(|(_, r)| (r.alice_utility - 2.0 / 3.0).abs() < 1e-12));
    let report = regret_report(&h, &flat);
    assert!(report.alice_stackelberg_regret.abs() < 1e-9);
    assert_eq!(report.bob_choice_regret, 0.0);
}

#[test]
fn regret_matches_its_definition() {
    for seed in 0..10 {
        let (h, vb) = random_game(seed, 5_000);
        assert_eq!(h.len(), 5_000);
        let report = regret_report(&h, &vb);
        let realized: f64 = h.rounds().map(|(_, r)| r.alice_utility).sum();
        let expected = h.horizon as f64 * h.u_star_alice - realized;
        assert!((report.alice_stackelberg_regret - expected).abs() < 1e-9);
        // a myopic Bob never regrets a choice
        assert_eq!(report.bob_choice_regret, 0.0);
        assert!(report.per_run.iter().all(|r| r.bob_increment >= 0.0));
        let covered: u64 = report.per_run.iter().map(|r| r.count).sum();
        assert_eq!(covered, h.horizon);
    }
}

#[test]
fn replays_are_identical() {
    let (a, _) = random_game(42, 20_000);
    let (b, _) = random_game(42, 20_000);
    assert_eq!(a, b);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.write_csv(&mut x).unwrap();
    b.write_csv(&mut y).unwrap();
    assert_eq!(x, y);
}

#[test]
fn history_and_report_round_trip() {
    let (h, vb) = random_game(3, 2_000);
    let mut csv = Vec::new();
    h.write_csv(&mut csv).unwrap();
    let back = History::read_csv(csv.as_slice(), h.u_star_alice).unwrap();
    assert_eq!(back, h);
    let report = regret_report(&h, &vb);
    let json = serde_json::to_string(&report).unwrap();
    let parsed: RegretReport = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed, report);
    let json = serde_json::to_string(&h).unwrap();
    assert_eq!(serde_json::from_str::<History>(&json).unwrap(), h);
}

#[test]
fn budget_bob_keeps_within_threshold() {
    let (pretend, truth) = unknown_alpha_pair();
    let uniform = Density::uniform();
    let bounds = ClassBounds::covering(&[&uniform, &pretend, &truth]);
    for threshold in [0.0, 1.0, 25.0, 400.0] {
        for k in [2, 3] {
            let mut bob = BobState::budget_switch(truth.clone(), pretend.clone(), threshold).unwrap();
            let h = if k == 2 {
                run_game(&mut alice_2cut_myopic(uniform.clone(), bounds, None), &mut bob, &uniform, 20_000, k)
            } else {
                run_game(&mut alice_kcut_myopic(uniform.clone(), bounds), &mut bob, &uniform, 20_000, k)
            }
            .unwrap();
            let report = regret_report(&h, &truth);
            assert!(report.bob_choice_regret <= threshold + 1e-9, "k={k}");
            assert!((report.bob_choice_regret - bob.regret_ledger()).abs() < 1e-9);
        }
    }
}
