//! Brute-force reference computations shared by the integration tests.
//!
//! Everything here works straight from the constellation points and full
//! enumeration of quadruple pairs, independent of the library's reductions.

#![allow(dead_code)]

use acf_pnc::latin::{LatinSquare, Quadruple};
use acf_pnc::{FadeState, SignalSet, Symbol};
use num_complex::Complex64;

pub fn points(set: &SignalSet) -> Vec<Complex64> {
    (0..set.size()).map(|k| set.point(Symbol(k)).unwrap()).collect()
}

fn quad_value(p: &[Complex64], z: Complex64, q: Quadruple) -> (Complex64, Complex64) {
    (p[q.a1] + z * p[q.b1], p[q.a2] + z * p[q.b2])
}

fn all_quads(m: usize) -> Vec<Quadruple> {
    let mut v = Vec::with_capacity(m * m * m * m);
    for r in 0..m * m {
        for c in 0..m * m {
            v.push(Quadruple::from_cell(r, c, m));
        }
    }
    v
}

/// Two-use squared minimum distance over every pair of distinct quadruples.
pub fn exhaustive_dmin(set: &SignalSet, z: FadeState) -> f64 {
    let p = points(set);
    let z = z.as_complex();
    let qs = all_quads(set.size());
    let vals: Vec<_> = qs.iter().map(|&q| quad_value(&p, z, q)).collect();
    let mut best = f64::INFINITY;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            let d = (vals[i].0 - vals[j].0).norm_sqr() + (vals[i].1 - vals[j].1).norm_sqr();
            best = best.min(d);
        }
    }
    best
}

/// Minimum squared distance between quadruples labelled differently by
/// `map`, scanning every cell pair.
pub fn exhaustive_cluster_distance(map: &LatinSquare, set: &SignalSet, z: FadeState) -> f64 {
    let m = set.size();
    let n = map.order();
    let p = points(set);
    let z = z.as_complex();
    let cells: Vec<(u32, (Complex64, Complex64))> = (0..n * n)
        .map(|i| (map.get(i / n, i % n), quad_value(&p, z, Quadruple::from_cell(i / n, i % n, m))))
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            if cells[i].0 == cells[j].0 {
                continue;
            }
            let (a, b) = (cells[i].1, cells[j].1);
            best = best.min((a.0 - b.0).norm_sqr() + (a.1 - b.1).norm_sqr());
        }
    }
    best
}

/// Pairs of distinct quadruples whose two-use values coincide at `z`.
pub fn colliding_pairs(set: &SignalSet, z: FadeState) -> Vec<(Quadruple, Quadruple)> {
    let p = points(set);
    let zc = z.as_complex();
    let qs = all_quads(set.size());
    let vals: Vec<_> = qs.iter().map(|&q| quad_value(&p, zc, q)).collect();
    let mut out = Vec::new();
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            if (vals[i].0 - vals[j].0).norm() < 1e-9 && (vals[i].1 - vals[j].1).norm() < 1e-9 {
                out.push((qs[i], qs[j]));
            }
        }
    }
    out
}

/// Distinct ratios `(x'_A - x_A) / (x_B - x'_B)` over all point pairs with
/// `x_B != x'_B` and `x_A != x'_A`.
pub fn brute_singular_fades(set: &SignalSet) -> Vec<Complex64> {
    let p = points(set);
    let mut out: Vec<Complex64> = Vec::new();
    for &xa in &p {
        for &xa2 in &p {
            for &xb in &p {
                for &xb2 in &p {
                    let den = xb - xb2;
                    let num = xa2 - xa;
                    if den.norm() < 1e-12 || num.norm() < 1e-12 {
                        continue;
                    }
                    let h = num / den;
                    if !out.iter().any(|o| (o - h).norm() < 1e-9) {
                        out.push(h);
                    }
                }
            }
        }
    }
    out
}

/// Partition of `S²` cells `(x_A, x_B)` given as cluster lists.
pub fn square_from_clusters(m: usize, clusters: &[&[(usize, usize)]]) -> LatinSquare {
    let mut cells = vec![u32::MAX; m * m];
    for (l, c) in clusters.iter().enumerate() {
        for &(a, b) in c.iter() {
            cells[a * m + b] = l as u32;
        }
    }
    LatinSquare::from_flat(m, cells).unwrap()
}

/// Reads a fixture map file from `tests/fixtures`.
pub fn fixture(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

/// Reference clustering removing `j`.
pub const REFERENCE_J: [&[(usize, usize)]; 4] = [
    &[(0, 0), (1, 2), (2, 1), (3, 3)],
    &[(0, 3), (1, 1), (2, 2), (3, 0)],
    &[(0, 1), (1, 3), (2, 0), (3, 2)],
    &[(0, 2), (1, 0), (2, 3), (3, 1)],
];

/// Reference clustering removing `0.5 + 0.5j`.
pub const REFERENCE_HALF: [&[(usize, usize)]; 5] = [
    &[(0, 1), (1, 2), (2, 3)],
    &[(0, 2), (1, 3), (3, 0)],
    &[(0, 3), (2, 0), (3, 1)],
    &[(1, 0), (2, 1), (3, 2)],
    &[(0, 0), (1, 1), (2, 2), (3, 3)],
];

/// Reference clustering removing `1 + j`.
pub const REFERENCE_ONE_PLUS_J: [&[(usize, usize)]; 5] = [
    &[(0, 1), (2, 3), (3, 0)],
    &[(0, 3), (1, 0), (3, 2)],
    &[(1, 2), (2, 0), (3, 1)],
    &[(0, 2), (1, 3), (2, 1)],
    &[(0, 0), (1, 1), (2, 2), (3, 3)],
];
