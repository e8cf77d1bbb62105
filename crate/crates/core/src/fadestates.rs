//! Singular fade states of the MA phase.
//!
//! A fade state `z = H_B / H_A` is singular when two distinct transmit pairs
//! land on the same point of the relay's effective constellation, i.e.
//! `x_A + z x_B = x'_A + z x'_B`. Because the two MA channel uses share the
//! same `z`, the singular states of the two-use ACF protocol coincide with the
//! single-use ones, so they are the ratios `d_A / d_B` of nonzero
//! constellation differences.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::{approx_eq, SignalSet, TOLERANCE};

/// A channel fade ratio `H_B / H_A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadeState {
    pub re: f64,
    pub im: f64,
}

impl FadeState {
    pub fn new(re: f64, im: f64) -> Self {
        FadeState { re, im }
    }

    pub fn from_complex(z: Complex64) -> Self {
        FadeState { re: z.re, im: z.im }
    }

    pub fn from_polar(gamma: f64, theta: f64) -> Self {
        Self::from_complex(Complex64::from_polar(gamma, theta))
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn gamma(self) -> f64 {
        self.as_complex().norm()
    }

    /// Phase in `(-π, π]`.
    pub fn theta(self) -> f64 {
        let t = self.im.atan2(self.re);
        if t <= -std::f64::consts::PI {
            t + 2.0 * std::f64::consts::PI
        } else {
            t
        }
    }

    pub fn approx_eq(self, other: FadeState) -> bool {
        approx_eq(self.as_complex(), other.as_complex())
    }

    /// Lexicographic `(re, im)` order with tolerance; the tie rule used by the
    /// quantizer.
    pub fn lex_cmp(self, other: FadeState) -> Ordering {
        if (self.re - other.re).abs() > TOLERANCE {
            self.re.total_cmp(&other.re)
        } else if (self.im - other.im).abs() > TOLERANCE {
            self.im.total_cmp(&other.im)
        } else {
            Ordering::Equal
        }
    }
}

impl std::fmt::Display for FadeState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{:+}j", self.re, self.im)
    }
}

/// One circle of singular fade states.
#[derive(Debug, Clone, PartialEq)]
pub struct Circle {
    pub radius: f64,
    /// Indices into [`SingularFadeSet::states`].
    pub members: Vec<usize>,
}

/// Result of [`SingularFadeSet::classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadeClass {
    Singular { index: usize, circle: usize, radius: f64 },
    NonSingular,
}

/// The finite set of singular fade states of a signal set.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularFadeSet {
    states: Vec<FadeState>,
    circles: Vec<Circle>,
}

impl SingularFadeSet {
    /// Enumerates all distinct finite nonzero ratios `d_A / d_B` with `d_A`,
    /// `d_B` taken from the difference set. States are ordered
    /// lexicographically by `(re, im)`; circles by ascending radius.
    pub fn enumerate(set: &SignalSet) -> Self {
        let diffs = set.difference_set();
        let mut states: Vec<FadeState> = Vec::new();
        for &da in &diffs {
            for &db in &diffs {
                let h = FadeState::from_complex(da / db);
                if !states.iter().any(|s| s.approx_eq(h)) {
                    states.push(h);
                }
            }
        }
        states.sort_by(|a, b| a.lex_cmp(*b));

        let mut circles: Vec<Circle> = Vec::new();
        for (i, s) in states.iter().enumerate() {
            let r = s.gamma();
            match circles.iter_mut().find(|c| (c.radius - r).abs() <= TOLERANCE) {
                Some(c) => c.members.push(i),
                None => circles.push(Circle {
                    radius: r,
                    members: vec![i],
                }),
            }
        }
        circles.sort_by(|a, b| a.radius.total_cmp(&b.radius));
        SingularFadeSet { states, circles }
    }

    pub fn states(&self) -> &[FadeState] {
        &self.states
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Index of the state equal to `h`, if any.
    pub fn index_of(&self, h: FadeState) -> Option<usize> {
        self.states.iter().position(|s| s.approx_eq(h))
    }

    /// Index of the circle containing state `index`.
    pub fn circle_of(&self, index: usize) -> usize {
        self.circles
            .iter()
            .position(|c| c.members.contains(&index))
            .expect("every state lies on a circle")
    }

    pub fn classify(&self, h: FadeState) -> FadeClass {
        match self.index_of(h) {
            Some(index) => {
                let circle = self.circle_of(index);
                FadeClass::Singular {
                    index,
                    circle,
                    radius: self.circles[circle].radius,
                }
            }
            None => FadeClass::NonSingular,
        }
    }

    /// JSON rows `{re, im, gamma, theta, circle}` for the `fades` command.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                serde_json::json!({
                    "re": s.re,
                    "im": s.im,
                    "gamma": s.gamma(),
                    "theta": s.theta(),
                    "circle": self.circle_of(i),
                })
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}
