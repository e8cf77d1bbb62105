//! Monte-Carlo simulation of the two-way relay link.
//!
//! Every frame draws one block-Rayleigh channel realisation: MA gains
//! `H_A, H_B` (shared by both MA uses) and BC gains `H'_A, H'_B`, all
//! `CN(0, 1)`. User symbols are unit-energy PSK; the relay detects each MA use
//! by joint ML, picks a map from the quantizer at `z = H_B / H_A`, and
//! broadcasts the cluster label as a point of a unit-energy `t`-PSK where `t`
//! is the map's label count. Each user ML-detects the label and inverts the
//! map using its own symbols. The map index is genie-aided side information.
//!
//! Each user sends `frame_length` bits per frame. A direction (A→B or B→A)
//! delivers its bits only if every symbol of the frame is recovered; failed
//! directions deliver nothing but still consume the channel uses. Random
//! streams are keyed by `(SNR index, frame index)`, and all tallies are
//! integers, so results do not depend on the thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::{SignalSet, SymbolPair};
use crate::fadestates::FadeState;
use crate::latin::{LatinSquare, Quadruple};
use crate::mapgen::{MapLibrary, MapMethod};
use crate::metrics::{DecisionMethod, Quantizer};
use crate::{Error, Result};

/// Transmission scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// ACF with the Cartesian-product library.
    AcfCp,
    /// ACF with the direct-clustering library (4-PSK only).
    AcfDc,
    /// One MA use and one BC use per exchange with the base library.
    TwoStage,
    /// ACF with the bitwise-XOR map at every fade.
    FixedXor,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::AcfCp => "acf-cp",
            Scheme::AcfDc => "acf-dc",
            Scheme::TwoStage => "two-stage",
            Scheme::FixedXor => "fixed-xor",
        }
    }

    fn is_acf(self) -> bool {
        !matches!(self, Scheme::TwoStage)
    }

    /// Bits each user sends per exchange.
    pub fn bits_per_exchange(self, lambda: u32) -> usize {
        if self.is_acf() {
            2 * lambda as usize
        } else {
            lambda as usize
        }
    }

    /// Channel uses per exchange.
    pub fn uses_per_exchange(self) -> usize {
        if self.is_acf() {
            3
        } else {
            2
        }
    }

    /// The map library the scheme draws from.
    pub fn library(self, set: &SignalSet) -> Result<MapLibrary> {
        match self {
            Scheme::AcfCp | Scheme::FixedXor => MapLibrary::build(set, MapMethod::Cartesian),
            Scheme::AcfDc => MapLibrary::build(set, MapMethod::Direct),
            Scheme::TwoStage => MapLibrary::base(set),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acf-cp" => Ok(Scheme::AcfCp),
            "acf-dc" => Ok(Scheme::AcfDc),
            "two-stage" => Ok(Scheme::TwoStage),
            "fixed-xor" => Ok(Scheme::FixedXor),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Default per-user frame length in bits.
pub const DEFAULT_FRAME_BITS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub lambda: u32,
    /// SNR points in dB; `f64::INFINITY` means noiseless.
    pub snr_db: Vec<f64>,
    pub frames: usize,
    /// Bits per user per frame; a multiple of the scheme's bits per exchange.
    pub frame_length: usize,
    pub seed: u64,
}

impl SimConfig {
    /// A configuration with the default frame length: the largest multiple of
    /// the bits per exchange not above 256.
    pub fn new(scheme: Scheme, lambda: u32, snr_db: Vec<f64>, frames: usize, seed: u64) -> Self {
        let unit = scheme.bits_per_exchange(lambda);
        SimConfig {
            scheme,
            lambda,
            snr_db,
            frames,
            frame_length: (DEFAULT_FRAME_BITS / unit.max(1)) * unit,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("the SNR list is empty".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::InvalidConfig("SNR values must be numbers or +inf".into()));
        }
        if self.frames == 0 {
            return Err(Error::InvalidConfig("at least one frame is required".into()));
        }
        let unit = self.scheme.bits_per_exchange(self.lambda);
        if self.frame_length == 0 || self.frame_length % unit != 0 {
            return Err(Error::InvalidConfig(format!(
                "frame length {} is not a positive multiple of {unit} bits",
                self.frame_length
            )));
        }
        if self.scheme == Scheme::AcfDc && self.lambda != 2 {
            return Err(Error::DirectUnsupported(self.lambda));
        }
        Ok(())
    }

    /// Throughput with every frame delivered, in bits per channel use.
    pub fn ceiling(&self) -> f64 {
        2.0 * self.scheme.bits_per_exchange(self.lambda) as f64 / self.scheme.uses_per_exchange() as f64
    }
}

/// Statistics at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub snr_db: f64,
    /// Sum throughput in bits per channel use.
    pub throughput: f64,
    /// Fraction of direction-frames with at least one wrong symbol.
    pub fer: f64,
    /// Fraction of MA uses where the relay's `(x_A, x_B)` estimate is wrong.
    pub relay_ser: f64,
    /// 95% confidence half-width of the throughput.
    pub ci_halfwidth: f64,
    pub frames: usize,
    pub delivered_bits: u64,
    pub channel_uses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    /// Description of the BC signal set.
    pub bc_signal_set: String,
    pub points: Vec<SimPoint>,
}

impl SimResult {
    /// CSV with columns `snr_db,throughput,fer,relay_ser,ci_halfwidth`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,throughput,fer,relay_ser,ci_halfwidth\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.snr_db, p.throughput, p.fer, p.relay_ser, p.ci_halfwidth
            ));
        }
        out
    }
}

/// One block of channel gains and the noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub h_a: Complex64,
    pub h_b: Complex64,
    pub h_a_bc: Complex64,
    pub h_b_bc: Complex64,
    pub sigma2: f64,
}

/// Circularly-symmetric complex Gaussian with `E|Z|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Noise variance for an SNR in dB with unit symbol energy.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

impl ChannelSample {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> Self {
        ChannelSample {
            h_a: complex_gaussian(rng, 1.0),
            h_b: complex_gaussian(rng, 1.0),
            h_a_bc: complex_gaussian(rng, 1.0),
            h_b_bc: complex_gaussian(rng, 1.0),
            sigma2,
        }
    }

    pub fn fade(&self) -> FadeState {
        FadeState::from_complex(self.h_b / self.h_a)
    }
}

/// Unit-energy copy of the signal set's points.
pub fn unit_points(set: &SignalSet) -> Vec<Complex64> {
    let s = set.energy().sqrt();
    set.points().iter().map(|p| p / s).collect()
}

/// The two relay observations for one MA phase.
pub fn ma_phase<R: Rng + ?Sized>(
    points: &[Complex64],
    ch: &ChannelSample,
    a: SymbolPair,
    b: SymbolPair,
    rng: &mut R,
) -> [Complex64; 2] {
    let y1 = ch.h_a * points[a.first.0] + ch.h_b * points[b.first.0] + complex_gaussian(rng, ch.sigma2);
    let y2 = ch.h_a * points[a.second.0] + ch.h_b * points[b.second.0] + complex_gaussian(rng, ch.sigma2);
    [y1, y2]
}

/// Joint ML detection of one MA use: the `(x_A, x_B)` minimising
/// `|y - H_A x_A - H_B x_B|²`, first in index order on ties.
pub fn detect_use(points: &[Complex64], ch: &ChannelSample, y: Complex64) -> (usize, usize) {
    let m = points.len();
    let mut best = (0, 0);
    let mut best_d = f64::INFINITY;
    for a in 0..m {
        for b in 0..m {
            let d = (y - ch.h_a * points[a] - ch.h_b * points[b]).norm_sqr();
            if d < best_d {
                best_d = d;
                best = (a, b);
            }
        }
    }
    best
}

/// Joint ML estimate of the quadruple over both MA uses. The metric is a sum
/// of one term per use, so each use is detected separately.
pub fn relay_ml_estimate(points: &[Complex64], ch: &ChannelSample, y: [Complex64; 2]) -> Quadruple {
    Quadruple::from_uses(detect_use(points, ch, y[0]), detect_use(points, ch, y[1]))
}

/// The bitwise-XOR map of order `M²`: label `(a1^b1)·M + (a2^b2)`.
pub fn xor_map(m: usize) -> LatinSquare {
    let n = m * m;
    let mut cells = vec![0u32; n * n];
    for r in 0..n {
        for c in 0..n {
            let q = Quadruple::from_cell(r, c, m);
            cells[r * n + c] = ((q.a1 ^ q.b1) * m + (q.a2 ^ q.b2)) as u32;
        }
    }
    LatinSquare::from_flat(n, cells).expect("xor table uses every label")
}

/// Unit-energy `t`-PSK used in the BC phase.
fn bc_points(t: usize) -> Vec<Complex64> {
    (0..t)
        .map(|l| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * l as f64 / t as f64))
        .collect()
}

fn detect_label(points: &[Complex64], gain: Complex64, y: Complex64) -> u32 {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (l, p) in points.iter().enumerate() {
        let d = (y - gain * p).norm_sqr();
        if d < best_d {
            best_d = d;
            best = l;
        }
    }
    best as u32
}

/// Outcome at both users of one BC use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BcOutcome {
    /// B's row (pair) as recovered by A, if the label was in A's row.
    pub at_a: Option<usize>,
    /// A's row as recovered by B.
    pub at_b: Option<usize>,
}

/// Broadcast of `label`; A and B each detect it and invert the map with
/// their own row/column index.
pub fn bc_phase<R: Rng + ?Sized>(
    map: &LatinSquare,
    label: u32,
    own_row: usize,
    own_col: usize,
    ch: &ChannelSample,
    rng: &mut R,
) -> BcOutcome {
    let pts = bc_points(map.label_count());
    let x = pts[label as usize];
    let y_a = ch.h_a_bc * x + complex_gaussian(rng, ch.sigma2);
    let y_b = ch.h_b_bc * x + complex_gaussian(rng, ch.sigma2);
    let la = detect_label(&pts, ch.h_a_bc, y_a);
    let lb = detect_label(&pts, ch.h_b_bc, y_b);
    BcOutcome {
        at_a: map.decode_row(own_row, la),
        at_b: map.decode_col(own_col, lb),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    delivered: u64,
    delivered_sq: u128,
    direction_errors: u64,
    relay_errors: u64,
    relay_uses: u64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            delivered: self.delivered + o.delivered,
            delivered_sq: self.delivered_sq + o.delivered_sq,
            direction_errors: self.direction_errors + o.direction_errors,
            relay_errors: self.relay_errors + o.relay_errors,
            relay_uses: self.relay_uses + o.relay_uses,
        }
    }
}

/// Runs the configured scheme against `library` (ignored by fixed-XOR
/// except for its signal set).
pub fn run_simulation(config: &SimConfig, library: &MapLibrary) -> Result<SimResult> {
    config.validate()?;
    let set = library.signal_set();
    if set.lambda() != config.lambda {
        return Err(Error::InvalidConfig(format!(
            "library is for lambda {}, config asks for {}",
            set.lambda(),
            config.lambda
        )));
    }
    let m = set.size();
    let want_order = if config.scheme.is_acf() { m * m } else { m };
    if config.scheme != Scheme::FixedXor && library.entries().iter().any(|e| e.square.order() != want_order) {
        return Err(Error::InvalidConfig(format!(
            "scheme {} needs maps of order {want_order}",
            config.scheme.name()
        )));
    }
    let quantizer = Quantizer::simple_only(library);
    let xor = xor_map(m);
    let points = unit_points(set);
    let exchanges = config.frame_length / config.scheme.bits_per_exchange(config.lambda);
    let uses_per_frame = (exchanges * config.scheme.uses_per_exchange()) as u64;

    let mut out = Vec::with_capacity(config.snr_db.len());
    for (si, &snr) in config.snr_db.iter().enumerate() {
        let sigma2 = noise_variance(snr);
        let tally = (0..config.frames)
            .into_par_iter()
            .map(|f| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(((si as u64) << 40) | f as u64);
                let ch = ChannelSample::draw(&mut rng, sigma2);
                let map = match config.scheme {
                    Scheme::FixedXor => &xor,
                    _ => &library.entries()[quantizer.choose(ch.fade(), DecisionMethod::Simple).index].square,
                };
                simulate_frame(config.scheme, &points, map, &ch, exchanges, config.frame_length as u64, &mut rng)
            })
            .reduce(Tally::default, Tally::merge);
        let n = config.frames as f64;
        let uses = uses_per_frame as f64;
        let mean = tally.delivered as f64 / (n * uses);
        let second = tally.delivered_sq as f64 / (n * uses * uses);
        let var = if config.frames > 1 {
            ((second - mean * mean) * n / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        out.push(SimPoint {
            snr_db: snr,
            throughput: mean,
            fer: tally.direction_errors as f64 / (2.0 * n),
            relay_ser: tally.relay_errors as f64 / tally.relay_uses.max(1) as f64,
            ci_halfwidth: 1.96 * var.sqrt() / n.sqrt(),
            frames: config.frames,
            delivered_bits: tally.delivered,
            channel_uses: uses_per_frame * config.frames as u64,
        });
    }
    Ok(SimResult {
        config: config.clone(),
        bc_signal_set: "t-psk unit energy".into(),
        points: out,
    })
}

fn simulate_frame(
    scheme: Scheme,
    points: &[Complex64],
    map: &LatinSquare,
    ch: &ChannelSample,
    exchanges: usize,
    frame_bits: u64,
    rng: &mut ChaCha8Rng,
) -> Tally {
    let m = points.len();
    let mut a_ok = true;
    let mut b_ok = true;
    let mut relay_errors = 0u64;
    let mut relay_uses = 0u64;
    for _ in 0..exchanges {
        if scheme.is_acf() {
            let a = SymbolPair::new(rng.random_range(0..m), rng.random_range(0..m));
            let b = SymbolPair::new(rng.random_range(0..m), rng.random_range(0..m));
            let y = ma_phase(points, ch, a, b, rng);
            let est = relay_ml_estimate(points, ch, y);
            relay_uses += 2;
            relay_errors += u64::from((est.a1, est.b1) != (a.first.0, b.first.0));
            relay_errors += u64::from((est.a2, est.b2) != (a.second.0, b.second.0));
            let label = map.get(est.row(m), est.col(m));
            let bc = bc_phase(map, label, a.index(m), b.index(m), ch, rng);
            a_ok &= bc.at_a == Some(b.index(m));
            b_ok &= bc.at_b == Some(a.index(m));
        } else {
            let a = rng.random_range(0..m);
            let b = rng.random_range(0..m);
            let y = ch.h_a * points[a] + ch.h_b * points[b] + complex_gaussian(rng, ch.sigma2);
            let (ea, eb) = detect_use(points, ch, y);
            relay_uses += 1;
            relay_errors += u64::from((ea, eb) != (a, b));
            let bc = bc_phase(map, map.get(ea, eb), a, b, ch, rng);
            a_ok &= bc.at_a == Some(b);
            b_ok &= bc.at_b == Some(a);
        }
    }
    let delivered = frame_bits * (u64::from(a_ok) + u64::from(b_ok));
    Tally {
        delivered,
        delivered_sq: (delivered as u128) * (delivered as u128),
        direction_errors: u64::from(!a_ok) + u64::from(!b_ok),
        relay_errors,
        relay_uses,
    }
}
