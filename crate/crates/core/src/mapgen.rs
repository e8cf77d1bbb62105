//! Relay map synthesis: two-stage base clusterings, Cartesian lifting to the
//! ACF map, and the rotate/transpose derivations used to fill a library.
//!
//! A base clustering for fade `h` is an order-`M` Latin square (row `x_A`,
//! column `x_B`) in which every collision class of `x_A + h·x_B` shares one
//! label. Its Cartesian product with itself labels quadruple
//! `((a1,b1),(a2,b2))` with the pair `(base[a1][b1], base[a2][b2])`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::{approx_eq, SignalSet, TOLERANCE};
use crate::direct;
use crate::fadestates::{FadeState, SingularFadeSet};
use crate::latin::LatinSquare;
use crate::{Error, Result};

/// How a map was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapMethod {
    Cartesian,
    Direct,
    Rotate,
    Transpose,
}

impl MapMethod {
    pub fn name(self) -> &'static str {
        match self {
            MapMethod::Cartesian => "cartesian",
            MapMethod::Direct => "direct",
            MapMethod::Rotate => "rotate",
            MapMethod::Transpose => "transpose",
        }
    }
}

impl std::str::FromStr for MapMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(MapMethod::Cartesian),
            "direct" => Ok(MapMethod::Direct),
            "rotate" => Ok(MapMethod::Rotate),
            "transpose" => Ok(MapMethod::Transpose),
            other => Err(Error::InvalidConfig(format!("unknown map method {other:?}"))),
        }
    }
}

/// Groups `S²` by the value of `x_A + h·x_B`. Classes are listed by their
/// smallest member; members are `(x_A, x_B)` in ascending order.
pub fn collision_classes(set: &SignalSet, h: FadeState) -> Vec<Vec<(usize, usize)>> {
    let m = set.size();
    let z = h.as_complex();
    let pts = set.points();
    let mut classes: Vec<(num_complex::Complex64, Vec<(usize, usize)>)> = Vec::new();
    for a in 0..m {
        for b in 0..m {
            let v = pts[a] + z * pts[b];
            match classes.iter_mut().find(|(w, _)| approx_eq(*w, v)) {
                Some((_, members)) => members.push((a, b)),
                None => classes.push((v, vec![(a, b)])),
            }
        }
    }
    classes.into_iter().map(|(_, c)| c).collect()
}

/// A two-stage clustering removing one singular fade state.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseClustering {
    pub fade: FadeState,
    /// Order-`M` square, rows `x_A`, columns `x_B`.
    pub square: LatinSquare,
}

impl BaseClustering {
    /// Clusters as lists of `(x_A, x_B)`, indexed by label.
    pub fn clusters(&self) -> Vec<Vec<(usize, usize)>> {
        let n = self.square.order();
        let mut out = vec![Vec::new(); self.square.label_count()];
        for a in 0..n {
            for b in 0..n {
                out[self.square.get(a, b) as usize].push((a, b));
            }
        }
        out
    }
}

const BASE_NODE_CAP: u64 = 1_000_000;

/// Computes a minimal base clustering at a singular fade `h`.
///
/// Collision classes are placed as indivisible units and the remaining cells
/// are filled so that the label count is as small as possible. For `M = 4`
/// every minimal completion is enumerated and the one whose clusters agree
/// most often with the XOR pattern `x_A ^ x_B` is kept (first found on ties).
/// Larger sets stop at the first completion found within a node budget,
/// trying each unit's XOR label first.
pub fn base_clustering(set: &SignalSet, h: FadeState) -> Result<BaseClustering> {
    let classes = collision_classes(set, h);
    if classes.iter().all(|c| c.len() == 1) {
        return Err(Error::NonSingularFade { re: h.re, im: h.im });
    }
    let m = set.size();
    let mut units: Vec<Vec<(usize, usize)>> = classes;
    // Large classes first; stable sort keeps discovery order among equals.
    units.sort_by_key(|u| std::cmp::Reverse(u.len()));

    let exhaustive = m <= 4;
    for k in m..=m * m {
        let mut search = BaseSearch::new(m, &units, k, exhaustive);
        search.run();
        if let Some(best) = search.best {
            let square = LatinSquare::from_flat(m, best)?;
            return Ok(BaseClustering { fade: h, square });
        }
    }
    unreachable!("m² labels always suffice")
}

struct BaseSearch<'a> {
    m: usize,
    units: &'a [Vec<(usize, usize)>],
    k: u32,
    exhaustive: bool,
    row_mask: Vec<u64>,
    col_mask: Vec<u64>,
    label_of: Vec<Option<u32>>,
    used: u32,
    nodes: u64,
    best: Option<Vec<u32>>,
    best_score: i64,
    done: bool,
}

impl<'a> BaseSearch<'a> {
    fn new(m: usize, units: &'a [Vec<(usize, usize)>], k: usize, exhaustive: bool) -> Self {
        BaseSearch {
            m,
            units,
            k: k as u32,
            exhaustive,
            row_mask: vec![0; m],
            col_mask: vec![0; m],
            label_of: vec![None; units.len()],
            used: 0,
            nodes: 0,
            best: None,
            best_score: i64::MIN,
            done: false,
        }
    }

    fn fits(&self, unit: usize, label: u32) -> bool {
        let bit = 1u64 << label;
        self.units[unit]
            .iter()
            .all(|&(a, b)| self.row_mask[a] & bit == 0 && self.col_mask[b] & bit == 0)
    }

    fn toggle(&mut self, unit: usize, label: u32) {
        let bit = 1u64 << label;
        for &(a, b) in &self.units[unit] {
            self.row_mask[a] ^= bit;
            self.col_mask[b] ^= bit;
        }
    }

    fn candidates(&self, unit: usize) -> Vec<u32> {
        if self.exhaustive {
            // New labels only in order, so each partition is visited once.
            let limit = (self.used + 1).min(self.k);
            return (0..limit).filter(|&l| self.fits(unit, l)).collect();
        }
        // Try the XOR label of the unit's first cell before the others.
        let (a, b) = self.units[unit][0];
        let preferred = ((a ^ b) as u32) % self.k;
        std::iter::once(preferred)
            .chain((0..self.k).filter(|&l| l != preferred))
            .filter(|&l| self.fits(unit, l))
            .collect()
    }

    fn run(&mut self) {
        self.dfs();
    }

    fn dfs(&mut self) {
        if self.done {
            return;
        }
        self.nodes += 1;
        if self.nodes > BASE_NODE_CAP {
            self.done = true;
            return;
        }
        // Most constrained open unit next.
        let mut pick: Option<(usize, Vec<u32>)> = None;
        for u in 0..self.units.len() {
            if self.label_of[u].is_some() {
                continue;
            }
            let c = self.candidates(u);
            if pick.as_ref().is_none_or(|(_, best)| c.len() < best.len()) {
                let empty = c.is_empty();
                pick = Some((u, c));
                if empty {
                    break;
                }
            }
        }
        let Some((unit, cands)) = pick else {
            self.record();
            return;
        };
        for label in cands {
            let fresh = self.exhaustive && label == self.used;
            self.label_of[unit] = Some(label);
            self.toggle(unit, label);
            if fresh {
                self.used += 1;
            }
            self.dfs();
            if fresh {
                self.used -= 1;
            }
            self.toggle(unit, label);
            self.label_of[unit] = None;
            if self.done {
                return;
            }
        }
    }

    fn record(&mut self) {
        let m = self.m;
        let mut cells = vec![0u32; m * m];
        for (u, members) in self.units.iter().enumerate() {
            let l = self.label_of[u].expect("complete assignment");
            for &(a, b) in members {
                cells[a * m + b] = l;
            }
        }
        if !self.exhaustive {
            self.best = Some(cells);
            self.done = true;
            return;
        }
        let score = xor_agreement(&cells, m);
        if score > self.best_score {
            self.best_score = score;
            self.best = Some(cells);
        }
    }
}

/// Number of co-clustered cell pairs whose `x_A ^ x_B` values coincide.
fn xor_agreement(cells: &[u32], m: usize) -> i64 {
    let mut score = 0;
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            if cells[i] == cells[j] && ((i / m) ^ (i % m)) == ((j / m) ^ (j % m)) {
                score += 1;
            }
        }
    }
    score
}

/// Lifts a base clustering with `t` labels to the order-`M²` ACF map with
/// `t²` labels.
pub fn cartesian_product(base: &BaseClustering) -> LatinSquare {
    let sq = &base.square;
    let m = sq.order();
    let t = sq.label_count() as u32;
    let n = m * m;
    let mut cells = vec![0u32; n * n];
    for a1 in 0..m {
        for a2 in 0..m {
            for b1 in 0..m {
                for b2 in 0..m {
                    cells[(m * a1 + a2) * n + m * b1 + b2] = sq.get(a1, b1) * t + sq.get(a2, b2);
                }
            }
        }
    }
    LatinSquare::from_flat(n, cells).expect("product of a valid base covers all labels")
}

/// Derives the map for `h·e^{jk2π/M}` from a map removing `h`.
///
/// Column `x_B` is replaced by the symbol whose point is `x_B` rotated by `k`
/// steps of the PSK grid. For an order-`M²` map this is done in two passes:
/// columns within every sub-square `L_{i,j}` are shifted first, then whole
/// block columns. An order-`M` base square takes the single pass.
pub fn rotate_map(sq: &LatinSquare, k: i64, set: &SignalSet) -> Result<LatinSquare> {
    let m = set.size();
    let n = sq.order();
    let rho = |b: usize| set.rotate_symbol(b, k);
    if n == m {
        let perm: Vec<usize> = (0..m).map(rho).collect();
        return Ok(sq.permute_columns(&perm));
    }
    if n != m * m {
        return Err(Error::OrderNotDivisible { order: n, block: m });
    }
    let within: Vec<usize> = (0..n).map(|c| (c / m) * m + rho(c % m)).collect();
    let across: Vec<usize> = (0..n).map(|c| rho(c / m) * m + c % m).collect();
    Ok(sq.permute_columns(&within).permute_columns(&across))
}

/// Transposed map; it removes `1/h` when the input removes `h`.
pub fn transpose_map(sq: &LatinSquare) -> LatinSquare {
    sq.transpose()
}

/// Orbit decomposition of a fade under rotation by `2π/M`: returns the seed
/// (phase in `(0, 2π/M]`) and the number of steps from the seed to `h`.
pub fn rotation_seed(h: FadeState, m: usize) -> (FadeState, i64) {
    let step = 2.0 * std::f64::consts::PI / m as f64;
    let theta = h.im.atan2(h.re);
    // Smallest k with theta - k*step <= step (with slack for rounding).
    let k = ((theta - TOLERANCE) / step).ceil() as i64 - 1;
    let seed = h.as_complex() * num_complex::Complex64::from_polar(1.0, -(k as f64) * step);
    (FadeState::from_complex(seed), k)
}

/// One map of a library.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub fade: FadeState,
    pub square: LatinSquare,
    pub method: MapMethod,
}

/// One map per singular fade state, indexed like the fade set.
#[derive(Debug, Clone, PartialEq)]
pub struct MapLibrary {
    set: SignalSet,
    fades: SingularFadeSet,
    entries: Vec<LibraryEntry>,
}

impl MapLibrary {
    /// Builds the ACF library. `Cartesian` lifts base clusterings of the seed
    /// fades and rotates them around each orbit; `Direct` (4-PSK only) runs
    /// direct clustering on every fade off the unit circle.
    pub fn build(set: &SignalSet, method: MapMethod) -> Result<Self> {
        let fades = SingularFadeSet::enumerate(set);
        let entries = match method {
            MapMethod::Cartesian => cartesian_entries(set, &fades)?,
            MapMethod::Direct => {
                if set.lambda() != 2 {
                    return Err(Error::DirectUnsupported(set.lambda()));
                }
                let cart = cartesian_entries(set, &fades)?;
                let direct: Vec<Result<LibraryEntry>> = fades
                    .states()
                    .par_iter()
                    .zip(cart.into_par_iter())
                    .map(|(&h, fallback)| {
                        if (h.gamma() - 1.0).abs() <= TOLERANCE {
                            return Ok(fallback);
                        }
                        let out = direct::direct_map(set, h)?;
                        if out.within_budget {
                            Ok(LibraryEntry { fade: h, square: out.square, method: MapMethod::Direct })
                        } else {
                            Ok(fallback)
                        }
                    })
                    .collect();
                direct.into_iter().collect::<Result<Vec<_>>>()?
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "libraries are built with cartesian or direct, not {}",
                    other.name()
                )))
            }
        };
        Ok(MapLibrary { set: set.clone(), fades, entries })
    }

    /// The order-`M` base clusterings of every singular fade, used by the
    /// two-stage baseline.
    pub fn base(set: &SignalSet) -> Result<Self> {
        let fades = SingularFadeSet::enumerate(set);
        let entries = orbit_entries(set, &fades, |h| Ok(base_clustering(set, h)?.square))?;
        Ok(MapLibrary { set: set.clone(), fades, entries })
    }

    pub fn signal_set(&self) -> &SignalSet {
        &self.set
    }

    pub fn fades(&self) -> &SingularFadeSet {
        &self.fades
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, h: FadeState) -> Option<&LibraryEntry> {
        self.fades.index_of(h).map(|i| &self.entries[i])
    }
}

fn cartesian_entries(set: &SignalSet, fades: &SingularFadeSet) -> Result<Vec<LibraryEntry>> {
    orbit_entries(set, fades, |h| Ok(cartesian_product(&base_clustering(set, h)?)))
}

/// Builds the seed map of every rotation orbit with `make`, then rotates it
/// onto the remaining members.
fn orbit_entries<F>(set: &SignalSet, fades: &SingularFadeSet, make: F) -> Result<Vec<LibraryEntry>>
where
    F: Fn(FadeState) -> Result<LatinSquare> + Sync,
{
    let m = set.size();
    let plan: Vec<(usize, i64)> = fades
        .states()
        .iter()
        .map(|&h| {
            let (seed, k) = rotation_seed(h, m);
            let idx = fades.index_of(seed).expect("fade set is closed under rotation");
            (idx, k)
        })
        .collect();
    let mut seeds: Vec<usize> = plan.iter().filter(|(_, k)| *k == 0).map(|(i, _)| *i).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let seed_maps: Vec<Result<(usize, LatinSquare)>> = seeds
        .par_iter()
        .map(|&i| make(fades.states()[i]).map(|sq| (i, sq)))
        .collect();
    let seed_maps: Vec<(usize, LatinSquare)> = seed_maps.into_iter().collect::<Result<_>>()?;
    let lookup = |i: usize| &seed_maps.iter().find(|(j, _)| *j == i).expect("seed built").1;
    plan.iter()
        .zip(fades.states())
        .map(|(&(seed, k), &h)| {
            if k == 0 {
                Ok(LibraryEntry { fade: h, square: lookup(seed).clone(), method: MapMethod::Cartesian })
            } else {
                Ok(LibraryEntry { fade: h, square: rotate_map(lookup(seed), k, set)?, method: MapMethod::Rotate })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qpsk() -> SignalSet {
        SignalSet::new(2).unwrap()
    }

    #[test]
    fn collision_classes_at_half() {
        let cls = collision_classes(&qpsk(), FadeState::new(0.5, 0.5));
        let multi: Vec<_> = cls.into_iter().filter(|c| c.len() > 1).collect();
        assert_eq!(
            multi,
            vec![vec![(0, 1), (1, 2)], vec![(0, 3), (2, 0)], vec![(1, 3), (3, 0)], vec![(2, 1), (3, 2)]]
        );
    }

    #[test]
    fn base_label_counts_are_minimal() {
        let set = qpsk();
        for h in SingularFadeSet::enumerate(&set).states() {
            let b = base_clustering(&set, *h).unwrap();
            assert!(b.square.is_latin());
            let expect = if (h.gamma() - 1.0).abs() < 1e-9 { 4 } else { 5 };
            assert_eq!(b.square.label_count(), expect, "fade {h}");
        }
    }

    #[test]
    fn base_keeps_collision_classes_together() {
        let set = qpsk();
        for h in SingularFadeSet::enumerate(&set).states() {
            let b = base_clustering(&set, *h).unwrap();
            for class in collision_classes(&set, *h) {
                let l = b.square.get(class[0].0, class[0].1);
                assert!(class.iter().all(|&(a, x)| b.square.get(a, x) == l));
            }
        }
    }

    #[test]
    fn non_singular_fade_rejected() {
        assert!(matches!(
            base_clustering(&qpsk(), FadeState::new(0.3, 0.1)),
            Err(Error::NonSingularFade { .. })
        ));
    }

    #[test]
    fn cartesian_label_count_squares() {
        let set = qpsk();
        let b = base_clustering(&set, FadeState::new(0.0, 1.0)).unwrap();
        let sq = cartesian_product(&b);
        assert_eq!(sq.order(), 16);
        assert_eq!(sq.label_count(), 16);
        assert!(sq.is_latin());
    }

    #[test]
    fn rotation_by_full_cycle_is_identity() {
        let set = qpsk();
        let sq = cartesian_product(&base_clustering(&set, FadeState::new(1.0, 1.0)).unwrap());
        assert_eq!(rotate_map(&sq, 0, &set).unwrap(), sq);
        assert_eq!(rotate_map(&sq, 4, &set).unwrap(), sq);
        assert!(rotate_map(&sq, 1, &set).unwrap().is_latin());
        let bad = LatinSquare::from_rows(&[vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]]).unwrap();
        assert!(rotate_map(&bad, 1, &set).is_err());
    }

    #[test]
    fn rotation_seed_phases() {
        let (s, k) = rotation_seed(FadeState::new(-1.0, 0.0), 4);
        assert!(s.approx_eq(FadeState::new(0.0, 1.0)));
        assert_eq!(k, 1);
        let (s, k) = rotation_seed(FadeState::new(0.0, 1.0), 4);
        assert!(s.approx_eq(FadeState::new(0.0, 1.0)));
        assert_eq!(k, 0);
        let (s, k) = rotation_seed(FadeState::new(1.0, 0.0), 4);
        assert!(s.approx_eq(FadeState::new(0.0, 1.0)));
        assert_eq!(k, -1);
        let (_, k) = rotation_seed(FadeState::new(0.5, -0.5), 4);
        assert_eq!(k, -1);
    }

    #[test]
    fn library_has_one_entry_per_fade() {
        let set = qpsk();
        let lib = MapLibrary::build(&set, MapMethod::Cartesian).unwrap();
        assert_eq!(lib.len(), 12);
        let mut counts: Vec<usize> = lib.entries().iter().map(|e| e.square.label_count()).collect();
        counts.sort();
        assert_eq!(counts, [vec![16; 4], vec![25; 8]].concat());
        assert!(lib.get(FadeState::new(0.0, 1.0)).is_some());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [MapMethod::Cartesian, MapMethod::Direct, MapMethod::Rotate, MapMethod::Transpose] {
            assert_eq!(m.name().parse::<MapMethod>().unwrap(), m);
        }
        assert!("bogus".parse::<MapMethod>().is_err());
    }
}
