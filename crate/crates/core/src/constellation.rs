//! PSK signal sets used by the two end nodes.
//!
//! A [`SignalSet`] is a `2^lambda`-PSK constellation with a fixed
//! symbol-to-point labeling: the symbol at angular position `p` (the point
//! `(1 + i) * exp(i * 2π * p / M)`) is `gray(p)`, so neighbouring points
//! differ in one bit. For 4-PSK this is
//! exactly `{±1 ± i}` with symbol 0 at `1 + i`, 1 at `-1 + i`, 2 at `1 - i` and
//! 3 at `-1 - i`. Coordinates are left unnormalized (energy 2); the simulator
//! rescales to unit energy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance applied to the real and imaginary parts when comparing
/// complex values.
pub const TOLERANCE: f64 = 1e-9;

/// Returns true when `a` and `b` agree within [`TOLERANCE`] on both parts.
pub fn approx_eq(a: Complex64, b: Complex64) -> bool {
    (a.re - b.re).abs() <= TOLERANCE && (a.im - b.im).abs() <= TOLERANCE
}

/// A PSK symbol index in `[0, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol(pub usize);

impl Symbol {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The two symbols one user sends over the two channel uses of the MA phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SymbolPair {
    pub first: Symbol,
    pub second: Symbol,
}

impl SymbolPair {
    pub fn new(first: usize, second: usize) -> Self {
        SymbolPair {
            first: Symbol(first),
            second: Symbol(second),
        }
    }

    /// Row/column index of the pair in an order-`M²` map: `M * first + second`.
    pub fn index(self, m: usize) -> usize {
        m * self.first.0 + self.second.0
    }

    pub fn from_index(index: usize, m: usize) -> Self {
        SymbolPair::new(index / m, index % m)
    }
}

/// Symbol-to-point rule of a signal set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Labeling {
    /// Reflected-Gray order around the circle.
    Gray,
}

impl Labeling {
    pub fn name(self) -> &'static str {
        match self {
            Labeling::Gray => "gray",
        }
    }
}

impl std::str::FromStr for Labeling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gray" => Ok(Labeling::Gray),
            other => Err(Error::UnknownLabeling(other.to_string())),
        }
    }
}

/// Reflected binary Gray code of `k`.
pub fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

/// A `2^lambda`-PSK constellation with a fixed labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    lambda: u32,
    labeling: Labeling,
    points: Vec<Complex64>,
    /// `positions[k]` is the angular slot of symbol `k` (multiples of 2π/M).
    positions: Vec<usize>,
    /// Inverse of `positions`.
    at_position: Vec<usize>,
}

impl SignalSet {
    /// Builds the canonical Gray-labeled `2^lambda`-PSK set.
    pub fn new(lambda: u32) -> Result<Self> {
        if !(2..=8).contains(&lambda) {
            return Err(Error::InvalidLambda(lambda));
        }
        let m = 1usize << lambda;
        let scale = Complex64::new(1.0, 1.0);
        let at_position: Vec<usize> = (0..m).map(gray).collect();
        let mut positions = vec![0; m];
        for (p, &k) in at_position.iter().enumerate() {
            positions[k] = p;
        }
        let points = positions
            .iter()
            .map(|&p| scale * unit_root(p, m))
            .collect();
        Ok(SignalSet {
            lambda,
            labeling: Labeling::Gray,
            points,
            positions,
            at_position,
        })
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn labeling(&self) -> Labeling {
        self.labeling
    }

    /// Number of points, `M = 2^lambda`.
    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Average symbol energy of the unnormalized set.
    pub fn energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.size() as f64
    }

    /// Labeled constellation point of `s`.
    pub fn point(&self, s: Symbol) -> Result<Complex64> {
        self.points
            .get(s.0)
            .copied()
            .ok_or(Error::SymbolOutOfRange {
                symbol: s.0,
                size: self.size(),
            })
    }

    /// Angular slot of symbol index `k`.
    pub fn position(&self, k: usize) -> usize {
        self.positions[k]
    }

    /// Symbol whose point equals the point of `k` rotated by `steps * 2π/M`.
    pub fn rotate_symbol(&self, k: usize, steps: i64) -> usize {
        let m = self.size() as i64;
        let p = (self.positions[k] as i64 + steps).rem_euclid(m);
        self.at_position[p as usize]
    }

    /// All distinct nonzero differences `x - x'` between points of the set.
    pub fn difference_set(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::new();
        for &x in &self.points {
            for &y in &self.points {
                let d = x - y;
                if approx_eq(d, Complex64::new(0.0, 0.0)) {
                    continue;
                }
                if !out.iter().any(|&e| approx_eq(e, d)) {
                    out.push(d);
                }
            }
        }
        out
    }
}

fn unit_root(position: usize, m: usize) -> Complex64 {
    // Exact values on the axes keep 4-PSK coordinates integral.
    match (4 * position) % (4 * m) {
        0 => Complex64::new(1.0, 0.0),
        q if q == m => Complex64::new(0.0, 1.0),
        q if q == 2 * m => Complex64::new(-1.0, 0.0),
        q if q == 3 * m => Complex64::new(0.0, -1.0),
        _ => Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * position as f64 / m as f64),
    }
}
