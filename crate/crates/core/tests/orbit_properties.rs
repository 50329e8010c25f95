mod common;

use common::{bump, bumpy_system, free_system, surface};
use maglab::dynamics::MagneticSystem;
use maglab::fields::OneFormField;
use maglab::geometry::{Complex, Word};
use maglab::orbit::{
    canonical_classes, discrete_action, initial_loop, marked_spectrum, minimize_action, shoot_refine, solve_class,
    ClosedOrbit, SolverOptions,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts() -> SolverOptions {
    SolverOptions {
        m: 256,
        ..SolverOptions::default()
    }
}

fn w(s: &str) -> Word {
    s.parse().unwrap()
}

fn solve(sys: &MagneticSystem, word: &str) -> ClosedOrbit {
    let o = solve_class(sys, &w(word), &opts()).unwrap();
    assert!(o.refined, "{word} not refined: {:.3e}", o.shooting_residual);
    o
}

#[test]
fn jittered_seeds_reach_the_same_orbit() {
    let s = surface();
    let sys = bumpy_system(&s);
    let reference = solve(&sys, "ab");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let mut seed = initial_loop(&s, &w("ab"), opts().m).unwrap();
        for z in &mut seed.points {
            *z += Complex::new(rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3));
        }
        let (lp, _) = minimize_action(&sys, &seed, &opts()).unwrap();
        let o = shoot_refine(&sys, &lp, &opts()).unwrap();
        assert!((o.action - reference.action).abs() < 1e-8);
        assert!((o.period - reference.period).abs() < 1e-8);
    }
}

#[test]
fn smooth_perturbations_do_not_lower_the_discrete_minimum() {
    let s = surface();
    let sys = bumpy_system(&s);
    let seed = initial_loop(&s, &w("aB"), opts().m).unwrap();
    let (lp, _) = minimize_action(&sys, &seed, &opts()).unwrap();
    let a0 = discrete_action(&sys, &lp).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = lp.m() as f64;
    for _ in 0..10 {
        let k = rng.random_range(1..6) as f64;
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let dir = Complex::from_polar(1e-3, rng.random_range(0.0..std::f64::consts::TAU));
        let mut p = lp.clone();
        for (i, z) in p.points.iter_mut().enumerate() {
            // vanishes at z₀ so the closing point moves consistently
            let s = (std::f64::consts::PI * k * i as f64 / m + phase).sin() * (std::f64::consts::PI * i as f64 / m).sin();
            *z += dir * s;
        }
        let a1 = discrete_action(&sys, &p).unwrap();
        assert!(a1 > a0 - 1e-8, "perturbation lowered the action by {:.3e}", a0 - a1);
    }
}

#[test]
fn iterated_classes_cost_at_most_twice() {
    let s = surface();
    let free = free_system(&s);
    let (one, two) = (solve(&free, "a"), solve(&free, "aa"));
    assert!((two.action - 2.0 * one.action).abs() < 1e-8);
    let sys = bumpy_system(&s);
    let (one, two) = (solve(&sys, "a"), solve(&sys, "aa"));
    assert!(two.action <= 2.0 * one.action + 1e-8);
}

#[test]
fn action_is_length_minus_flux() {
    let s = surface();
    let sys = bumpy_system(&s);
    for word in ["a", "bC", "abAB"] {
        let o = solve(&sys, word);
        assert!((o.action - (o.length - o.alpha_integral)).abs() < 1e-8, "{word}");
    }
}

#[test]
fn reversing_the_form_reverses_the_class() {
    let s = surface();
    let sys = bumpy_system(&s);
    let flipped = sys.with_alpha(sys.alpha().unwrap().scaled(-1.0));
    for word in ["ab", "aC"] {
        let fwd = solve(&sys, word);
        let back = solve(&flipped, &w(word).inverse().to_string());
        assert!((fwd.action - back.action).abs() < 1e-8, "{word}: {} vs {}", fwd.action, back.action);
    }
}

#[test]
fn conjugate_representatives_agree() {
    let s = surface();
    let sys = bumpy_system(&s);
    let base = solve(&sys, "abD");
    for rep in ["bDa", "Dab"] {
        let o = solve(&sys, rep);
        assert!((o.action - base.action).abs() < 1e-9, "{rep}");
        assert!((o.length - base.length).abs() < 1e-9, "{rep}");
    }
}

#[test]
fn gauge_change_leaves_the_spectrum_alone() {
    let s = surface();
    let sys = bumpy_system(&s);
    let gauged = sys.with_alpha(sys.alpha().unwrap().sum(&OneFormField::exact(bump(&s, -0.1, 0.3, 0.9, 0.4))));
    let words: Vec<Word> = ["a", "ab", "cD"].iter().map(|x| w(x)).collect();
    let (s0, s1) = (marked_spectrum(&sys, &words, &opts()).unwrap(), marked_spectrum(&gauged, &words, &opts()).unwrap());
    for (e0, e1) in s0.entries.iter().zip(&s1.entries) {
        assert!((e0.action - e1.action).abs() < 1e-8, "{}", e0.word);
    }
}

#[test]
fn spectra_are_deterministic() {
    let s = surface();
    let sys = bumpy_system(&s);
    let words: Vec<Word> = ["a", "Bc", "abAB"].iter().map(|x| w(x)).collect();
    let a = marked_spectrum(&sys, &words, &opts()).unwrap();
    let b = marked_spectrum(&sys, &words, &opts()).unwrap();
    let bits = |sp: &maglab::orbit::Spectrum| sp.entries.iter().map(|e| e.action.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn inverse_words_are_separate_classes() {
    let classes = canonical_classes(&[w("ab"), w("BA"), w("aBAb")]).unwrap();
    assert_eq!(classes.len(), 3);
    let deduped = canonical_classes(&[w("ab"), w("cabC")]).unwrap();
    assert_eq!(deduped.len(), 1);
}

#[test]
fn trivial_words_are_rejected() {
    assert!(canonical_classes(&[w("aA")]).is_err());
    assert!(initial_loop(&surface(), &w("bB"), 64).is_err());
}
