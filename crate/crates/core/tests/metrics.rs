//! Distance computations and map choice checked against full enumeration.

mod common;

use acf_pnc::metrics::{cluster_min_distance, decision_metric, effective_min_distance, Quantizer};
use acf_pnc::{DecisionMethod, FadeState, MapLibrary, MapMethod, SignalSet, SingularFadeSet, Symbol};
use common::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn qpsk() -> SignalSet {
    SignalSet::new(2).unwrap()
}

fn random_fades(n: usize, seed: u64) -> Vec<FadeState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| FadeState::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn reduced_min_distance_matches_exhaustive_scan() {
    let set = qpsk();
    let mut zs = SingularFadeSet::enumerate(&set).states().to_vec();
    zs.extend(random_fades(20, 7));
    for z in zs {
        let (fast, slow) = (effective_min_distance(&set, z), exhaustive_dmin(&set, z));
        assert!(close(fast, slow), "{z}: {fast} vs {slow}");
    }
}

#[test]
fn cluster_distance_matches_exhaustive_scan() {
    let set = qpsk();
    let lib = MapLibrary::build(&set, MapMethod::Direct).unwrap();
    let zs = random_fades(4, 11);
    for e in lib.entries().iter().step_by(3) {
        for &z in zs.iter().chain(std::iter::once(&e.fade)) {
            let fast = cluster_min_distance(&e.square, &set, z);
            let slow = exhaustive_cluster_distance(&e.square, &set, z);
            assert!(close(fast, slow), "{} at {z}: {fast} vs {slow}", e.fade);
        }
    }
}

#[test]
fn decision_metric_is_single_use_distance() {
    let set = qpsk();
    let z = FadeState::new(0.3, -1.1);
    let p = points(&set);
    let v = decision_metric(&set, z, Symbol(0), Symbol(1), Symbol(3), Symbol(2)).unwrap();
    let expect = ((p[0] - p[3]) + z.as_complex() * (p[1] - p[2])).norm();
    assert!(close(v, expect));
    assert!(decision_metric(&set, z, Symbol(1), Symbol(2), Symbol(1), Symbol(2)).is_err());
}

/// Fade whose defining differences come closest to vanishing at `z`.
fn simple_oracle(set: &SignalSet, fades: &SingularFadeSet, z: FadeState) -> Vec<usize> {
    let p = points(set);
    let zc = z.as_complex();
    let mut score = vec![f64::INFINITY; fades.len()];
    for &a in &p {
        for &a2 in &p {
            for &b in &p {
                for &b2 in &p {
                    let (da, db) = (a - a2, b - b2);
                    if da.norm() < 1e-12 || db.norm() < 1e-12 {
                        continue;
                    }
                    let h = FadeState::from_complex(-da / db);
                    let i = fades.index_of(h).unwrap();
                    score[i] = score[i].min((da + zc * db).norm());
                }
            }
        }
    }
    let best = score.iter().copied().fold(f64::INFINITY, f64::min);
    (0..score.len()).filter(|&i| score[i] <= best + 1e-9).collect()
}

#[test]
fn simple_choice_matches_oracle() {
    let set = qpsk();
    let lib = MapLibrary::build(&set, MapMethod::Cartesian).unwrap();
    let q = Quantizer::simple_only(&lib);
    for z in random_fades(50, 3) {
        let (out, optimal) = q.decide(z, DecisionMethod::Simple);
        assert_eq!(optimal, simple_oracle(&set, lib.fades(), z), "{z}");
        assert_eq!(out.index, optimal[0]);
    }
}

#[test]
fn full_choice_matches_oracle() {
    let set = qpsk();
    let lib = MapLibrary::build(&set, MapMethod::Direct).unwrap();
    let q = Quantizer::new(&lib);
    for z in random_fades(3, 5) {
        let scores: Vec<f64> =
            lib.entries().iter().map(|e| exhaustive_cluster_distance(&e.square, &set, z)).collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let expect: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= top - 1e-9).collect();
        let (out, optimal) = q.decide(z, DecisionMethod::Full);
        assert_eq!(optimal, expect, "{z}");
        assert_eq!(out.index, expect[0]);
    }
}

#[test]
fn each_map_is_optimal_at_its_own_fade() {
    let set = qpsk();
    let lib = MapLibrary::build(&set, MapMethod::Cartesian).unwrap();
    let q = Quantizer::new(&lib);
    for (i, e) in lib.entries().iter().enumerate() {
        let (_, optimal) = q.decide(e.fade, DecisionMethod::Full);
        assert!(optimal.contains(&i), "{}", e.fade);
        let near = FadeState::from_complex(e.fade.as_complex() + Complex64::new(1e-3, 5e-4));
        assert_eq!(q.choose(near, DecisionMethod::Simple).index, i, "{}", e.fade);
    }
}
