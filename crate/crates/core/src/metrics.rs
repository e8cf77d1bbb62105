//! Distances in the relay's effective constellation and the fade-plane
//! quantizer.
//!
//! All distances are squared. A pair of quadruples contributes
//! `|Δ_A1 + z·Δ_B1|² + |Δ_A2 + z·Δ_B2|²`, so it depends only on the two
//! single-use difference pairs `δ = (Δ_A, Δ_B)`. Each map is therefore
//! summarised by the set of `(δ1, δ2)` combinations that occur between
//! quadruples of *different* clusters; the cluster distance at any `z` is a
//! minimum over that small set.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::{approx_eq, SignalSet, Symbol, TOLERANCE};
use crate::fadestates::FadeState;
use crate::latin::{LatinSquare, Quadruple};
use crate::mapgen::MapLibrary;
use crate::{Error, Result};

/// Index of the distinct point differences `x - x'`, zero included at 0.
#[derive(Debug, Clone)]
struct Differences {
    values: Vec<Complex64>,
    /// `table[i * m + j]` is the index of `x_i - x_j`.
    table: Vec<usize>,
    m: usize,
}

impl Differences {
    fn new(set: &SignalSet) -> Self {
        let pts = set.points();
        let m = pts.len();
        let mut values = vec![Complex64::new(0.0, 0.0)];
        let mut table = vec![0; m * m];
        for i in 0..m {
            for j in 0..m {
                let d = pts[i] - pts[j];
                let idx = match values.iter().position(|&v| approx_eq(v, d)) {
                    Some(k) => k,
                    None => {
                        values.push(d);
                        values.len() - 1
                    }
                };
                table[i * m + j] = idx;
            }
        }
        Differences { values, table, m }
    }

    fn diff(&self, i: usize, j: usize) -> usize {
        self.table[i * self.m + j]
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn negate(&self, k: usize) -> usize {
        let v = -self.values[k];
        self.values.iter().position(|&w| approx_eq(w, v)).expect("closed under negation")
    }
}

/// Squared single-use distance `|Δ_A + zΔ_B|²`.
fn single_use(da: Complex64, db: Complex64, z: Complex64) -> f64 {
    (da + z * db).norm_sqr()
}

/// Minimum squared distance of the relay's two-use effective constellation at
/// `z`, over all pairs of distinct quadruples. Because one channel use may
/// carry identical symbols, this equals the smallest single-use distance
/// over difference pairs `(Δ_A, Δ_B) ≠ (0, 0)`.
pub fn effective_min_distance(set: &SignalSet, z: FadeState) -> f64 {
    let d = Differences::new(set);
    let z = z.as_complex();
    let mut best = f64::INFINITY;
    for (i, &da) in d.values.iter().enumerate() {
        for (j, &db) in d.values.iter().enumerate() {
            if i == 0 && j == 0 {
                continue;
            }
            best = best.min(single_use(da, db, z));
        }
    }
    best
}

/// `|(x_A - x'_A) + z(x_B - x'_B)|` for two distinct transmit pairs.
pub fn decision_metric(
    set: &SignalSet,
    z: FadeState,
    xa: Symbol,
    xb: Symbol,
    xa2: Symbol,
    xb2: Symbol,
) -> Result<f64> {
    if xa == xa2 && xb == xb2 {
        return Err(Error::IdenticalPairs);
    }
    let da = set.point(xa)? - set.point(xa2)?;
    let db = set.point(xb)? - set.point(xb2)?;
    Ok((da + z.as_complex() * db).norm())
}

/// The `(δ1, δ2)` combinations that separate different clusters of a map.
#[derive(Debug, Clone)]
pub struct ClusterDistance {
    /// Representative `(Δ_A, Δ_B)` of every sign-reduced difference class.
    reps: Vec<(Complex64, Complex64)>,
    /// Non-dominated split combinations, each sorted `(c1 <= c2)`.
    split: Vec<(usize, usize)>,
}

impl ClusterDistance {
    pub fn new(map: &LatinSquare, set: &SignalSet) -> Self {
        let diffs = Differences::new(set);
        let m = set.size();
        let nd = diffs.len();
        // (δ) and (-δ) give the same distance at every z.
        let mut class_of = vec![usize::MAX; nd * nd];
        let mut reps = Vec::new();
        for da in 0..nd {
            for db in 0..nd {
                if class_of[da * nd + db] != usize::MAX {
                    continue;
                }
                let c = reps.len();
                reps.push((diffs.values[da], diffs.values[db]));
                class_of[da * nd + db] = c;
                class_of[diffs.negate(da) * nd + diffs.negate(db)] = c;
            }
        }
        let zero = class_of[0];
        let nc = reps.len();
        let mut seen = vec![false; nc * nc];
        let n = map.order();
        for i in 0..n * n {
            let (r, c) = (i / n, i % n);
            let qi = Quadruple::from_cell(r, c, m);
            let li = map.get(r, c);
            for j in i + 1..n * n {
                let (r2, c2) = (j / n, j % n);
                if map.get(r2, c2) == li {
                    continue;
                }
                let qj = Quadruple::from_cell(r2, c2, m);
                let d1 = class_of[diffs.diff(qi.a1, qj.a1) * nd + diffs.diff(qi.b1, qj.b1)];
                let d2 = class_of[diffs.diff(qi.a2, qj.a2) * nd + diffs.diff(qi.b2, qj.b2)];
                let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
                seen[lo * nc + hi] = true;
            }
        }
        let alone = |c: usize| {
            let (lo, hi) = if c <= zero { (c, zero) } else { (zero, c) };
            seen[lo * nc + hi]
        };
        let mut split = Vec::new();
        for lo in 0..nc {
            for hi in lo..nc {
                if !seen[lo * nc + hi] {
                    continue;
                }
                let is_single = lo == zero || hi == zero;
                if !is_single && (alone(lo) || alone(hi)) {
                    continue;
                }
                split.push((lo, hi));
            }
        }
        ClusterDistance { reps, split }
    }

    /// Minimum squared distance between quadruples in different clusters.
    pub fn at(&self, z: FadeState) -> f64 {
        let z = z.as_complex();
        let e: Vec<f64> = self.reps.iter().map(|&(da, db)| single_use(da, db, z)).collect();
        self.split
            .iter()
            .map(|&(a, b)| e[a] + e[b])
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of retained split combinations.
    pub fn len(&self) -> usize {
        self.split.len()
    }

    pub fn is_empty(&self) -> bool {
        self.split.is_empty()
    }

    /// Number of sign-reduced single-use difference classes.
    pub fn class_count(&self) -> usize {
        self.reps.len()
    }
}

/// Minimum cluster distance of `map` at `z`.
pub fn cluster_min_distance(map: &LatinSquare, set: &SignalSet, z: FadeState) -> f64 {
    ClusterDistance::new(map, set).at(z)
}

/// How the quantizer ranks maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionMethod {
    /// Largest minimum cluster distance.
    Full,
    /// Fade `-Δ_A/Δ_B` of the pair with the smallest decision metric.
    Simple,
}

impl DecisionMethod {
    pub fn name(self) -> &'static str {
        match self {
            DecisionMethod::Full => "full",
            DecisionMethod::Simple => "simple",
        }
    }
}

impl std::str::FromStr for DecisionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(DecisionMethod::Full),
            "simple" => Ok(DecisionMethod::Simple),
            other => Err(Error::InvalidConfig(format!("unknown decision method {other:?}"))),
        }
    }
}

/// The map picked for one fade value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    /// Index into the library (and its fade set).
    pub index: usize,
    pub fade: FadeState,
    pub metric_value: f64,
    pub method: DecisionMethod,
    /// Another fade scored within the tolerance of the winner.
    pub tie: bool,
}

/// Precomputed state for repeated map decisions against one library.
pub struct Quantizer<'a> {
    library: &'a MapLibrary,
    full: Option<Vec<ClusterDistance>>,
    /// `(Δ_A, Δ_B, fade index)` for every pair with both differences nonzero.
    simple: Vec<(Complex64, Complex64, usize)>,
}

impl<'a> Quantizer<'a> {
    /// Prepares both methods.
    pub fn new(library: &'a MapLibrary) -> Self {
        let mut q = Self::simple_only(library);
        let set = library.signal_set();
        q.full = Some(
            library
                .entries()
                .par_iter()
                .map(|e| ClusterDistance::new(&e.square, set))
                .collect(),
        );
        q
    }

    /// Prepares only the simple metric, which is cheap for any set size.
    pub fn simple_only(library: &'a MapLibrary) -> Self {
        let set = library.signal_set();
        let diffs = set.difference_set();
        let fades = library.fades();
        let mut simple = Vec::with_capacity(diffs.len() * diffs.len());
        for &da in &diffs {
            for &db in &diffs {
                let h = FadeState::from_complex(-da / db);
                let idx = fades.index_of(h).expect("ratio of differences is singular");
                simple.push((da, db, idx));
            }
        }
        Quantizer { library, full: None, simple }
    }

    pub fn library(&self) -> &MapLibrary {
        self.library
    }

    /// Picks a map for `z`. Ties go to the lowest index, i.e. the
    /// lexicographically smallest fade.
    pub fn choose(&self, z: FadeState, method: DecisionMethod) -> DecisionOutcome {
        self.decide(z, method).0
    }

    /// Like [`Quantizer::choose`], also returning every index whose score is
    /// within the tolerance of the best one.
    pub fn decide(&self, z: FadeState, method: DecisionMethod) -> (DecisionOutcome, Vec<usize>) {
        // Scores are oriented so that larger is better.
        let scores: Vec<f64> = match method {
            DecisionMethod::Full => {
                let tables = self.full.as_ref().expect("quantizer built without full tables");
                tables.iter().map(|t| t.at(z)).collect()
            }
            DecisionMethod::Simple => {
                let zc = z.as_complex();
                let mut per_fade = vec![f64::INFINITY; self.library.len()];
                for &(da, db, idx) in &self.simple {
                    let v = (da + zc * db).norm();
                    if v < per_fade[idx] {
                        per_fade[idx] = v;
                    }
                }
                per_fade.into_iter().map(|v| -v).collect()
            }
        };
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let optimal: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= top - TOLERANCE).collect();
        let best = optimal[0];
        let outcome = DecisionOutcome {
            index: best,
            fade: self.library.fades().states()[best],
            metric_value: scores[best].abs(),
            method,
            tie: optimal.len() > 1,
        };
        (outcome, optimal)
    }

    /// Evaluates every grid point in parallel; output order is row-major
    /// with the imaginary part outermost.
    pub fn quantize(&self, grid: &GridSpec, method: DecisionMethod) -> RegionMap {
        let points = grid.points();
        let outcomes: Vec<(DecisionOutcome, Vec<usize>)> =
            points.par_iter().map(|&z| self.decide(z, method)).collect();
        RegionMap {
            grid: *grid,
            method,
            chosen: outcomes.iter().map(|o| o.0.index).collect(),
            ties: outcomes.iter().map(|o| o.0.tie).collect(),
            optimal: outcomes.into_iter().map(|o| o.1).collect(),
        }
    }
}

/// One-shot map choice.
pub fn choose_map(library: &MapLibrary, z: FadeState, method: DecisionMethod) -> DecisionOutcome {
    let q = match method {
        DecisionMethod::Full => Quantizer::new(library),
        DecisionMethod::Simple => Quantizer::simple_only(library),
    };
    q.choose(z, method)
}

/// A rectangular grid over the fade plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { re0: -2.0, re1: 2.0, im0: -2.0, im1: 2.0, step: 0.02 }
    }
}

impl GridSpec {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64, step: f64) -> Result<Self> {
        let all = [re0, re1, im0, im1, step];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("grid bounds must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::InvalidConfig("grid step must be positive".into()));
        }
        if re1 < re0 || im1 < im0 {
            return Err(Error::InvalidConfig("grid upper bounds must not be below lower bounds".into()));
        }
        Ok(GridSpec { re0, re1, im0, im1, step })
    }

    fn count(lo: f64, hi: f64, step: f64) -> usize {
        ((hi - lo) / step + 1e-9).floor() as usize + 1
    }

    pub fn re_count(&self) -> usize {
        Self::count(self.re0, self.re1, self.step)
    }

    pub fn im_count(&self) -> usize {
        Self::count(self.im0, self.im1, self.step)
    }

    /// Grid points, imaginary part outermost. Coordinates are computed as
    /// `lo + i·step` to avoid accumulated rounding.
    pub fn points(&self) -> Vec<FadeState> {
        let mut out = Vec::with_capacity(self.re_count() * self.im_count());
        for j in 0..self.im_count() {
            let im = self.im0 + j as f64 * self.step;
            for i in 0..self.re_count() {
                out.push(FadeState::new(self.re0 + i as f64 * self.step, im));
            }
        }
        out
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    /// Parses `re0,re1,im0,im1,step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidConfig(format!("cannot parse grid {s:?}")))?;
        match parts.as_slice() {
            &[re0, re1, im0, im1, step] => GridSpec::new(re0, re1, im0, im1, step),
            _ => Err(Error::InvalidConfig(format!("grid needs five values, got {s:?}"))),
        }
    }
}

/// Per-cell map choices over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub grid: GridSpec,
    pub method: DecisionMethod,
    pub chosen: Vec<usize>,
    pub ties: Vec<bool>,
    /// Every index scoring within the tolerance of the best, per cell.
    pub optimal: Vec<Vec<usize>>,
}

impl RegionMap {
    /// Fraction of cells, tied in neither map, where both choose the same
    /// fade; also returns the number of such cells.
    pub fn agreement(&self, other: &RegionMap) -> (f64, usize) {
        let mut same = 0usize;
        let mut total = 0usize;
        for i in 0..self.chosen.len() {
            if self.ties[i] || other.ties[i] {
                continue;
            }
            total += 1;
            if self.chosen[i] == other.chosen[i] {
                same += 1;
            }
        }
        let frac = if total == 0 { 1.0 } else { same as f64 / total as f64 };
        (frac, total)
    }

    /// Fraction of cells, decided uniquely by at least one of the two maps,
    /// where the two sets of optimal fades overlap; also returns that cell
    /// count. This is the comparison to use when one metric has structural
    /// ties.
    pub fn set_agreement(&self, other: &RegionMap) -> (f64, usize) {
        let mut same = 0usize;
        let mut total = 0usize;
        for i in 0..self.chosen.len() {
            if self.ties[i] && other.ties[i] {
                continue;
            }
            total += 1;
            if self.optimal[i].iter().any(|k| other.optimal[i].contains(k)) {
                same += 1;
            }
        }
        let frac = if total == 0 { 1.0 } else { same as f64 / total as f64 };
        (frac, total)
    }

    /// CSV with columns `re,im,chosen_index,tie_flag`, in grid order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,chosen_index,tie_flag\n");
        for ((z, &idx), &tie) in self.grid.points().iter().zip(&self.chosen).zip(&self.ties) {
            out.push_str(&format!("{},{},{},{}\n", z.re, z.im, idx, u8::from(tie)));
        }
        out
    }
}
