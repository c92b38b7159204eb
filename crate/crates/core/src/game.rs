//! Games, memory-one strategies and payoff pairs.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::distr::{Distribution, Open01};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint-action states from the focal player's perspective, in the order
/// used everywhere in this crate: CC, CD, DC, DD.
pub const STATE_NAMES: [&str; 4] = ["CC", "CD", "DC", "DD"];

/// Payoffs (R, S, T, P) of a symmetric 2x2 game, as seen by the focal
/// player in the joint states CC, CD, DC, DD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub p: f64,
}

/// Where S + T sits relative to 2P and 2R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// 2P < S + T < 2R
    Middle,
    /// S + T > 2R: alternation beats mutual cooperation.
    HighAlternation,
    /// S + T < 2P: alternation is worse than mutual defection.
    LowAlternation,
    /// S + T equals 2R or 2P exactly.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameClass {
    pub is_ipd: bool,
    pub regime: Regime,
}

impl GameParams {
    pub fn new(r: f64, s: f64, t: f64, p: f64) -> Result<Self> {
        let g = GameParams { r, s, t, p };
        for (name, v) in [("R", r), ("S", s), ("T", t), ("P", p)] {
            if !v.is_finite() {
                return Err(Error::validation(name, format!("payoff must be finite, got {v}")));
            }
        }
        Ok(g)
    }

    /// Builds a game from a `[R, S, T, P]` array.
    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.r, self.s, self.t, self.p]
    }

    /// Focal player X's payoff in states (CC, CD, DC, DD).
    pub fn x_payoffs(&self) -> [f64; 4] {
        [self.r, self.s, self.t, self.p]
    }

    /// Co-player Y's payoff in X-perspective states (CC, CD, DC, DD).
    pub fn y_payoffs(&self) -> [f64; 4] {
        [self.r, self.t, self.s, self.p]
    }

    pub fn is_ipd(&self) -> bool {
        self.t > self.r && self.r > self.p && self.p > self.s
    }

    pub fn regime(&self) -> Regime {
        // Compare differences so that shifting all payoffs by a constant
        // never changes the answer.
        let hi = (self.s - self.r) + (self.t - self.r);
        let lo = (self.s - self.p) + (self.t - self.p);
        if hi == 0.0 || lo == 0.0 {
            Regime::Boundary
        } else if hi > 0.0 {
            Regime::HighAlternation
        } else if lo < 0.0 {
            Regime::LowAlternation
        } else {
            Regime::Middle
        }
    }

    pub fn min_payoff(&self) -> f64 {
        self.as_array().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_payoff(&self) -> f64 {
        self.as_array().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Corners of the full payoff region in (π_Y, π_X) coordinates.
    pub fn payoff_corners(&self) -> [PayoffPair; 4] {
        [
            PayoffPair::new(self.r, self.r),
            PayoffPair::new(self.t, self.s),
            PayoffPair::new(self.s, self.t),
            PayoffPair::new(self.p, self.p),
        ]
    }
}

impl fmt::Display for GameParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.r, self.s, self.t, self.p)
    }
}

pub fn classify_game(g: &GameParams) -> Result<GameClass> {
    let g = GameParams::new(g.r, g.s, g.t, g.p)?;
    Ok(GameClass {
        is_ipd: g.is_ipd(),
        regime: g.regime(),
    })
}

/// A memory-one strategy: cooperation probabilities after CC, CD, DC, DD
/// (own action first), and an optional first-round cooperation probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryOneStrategy {
    probs: [f64; 4],
    p0: Option<f64>,
}

/// First-round cooperation probability used when none is given.
pub const DEFAULT_P0: f64 = 0.5;

const COMPONENT_NAMES: [&str; 4] = ["p_cc", "p_cd", "p_dc", "p_dd"];

impl MemoryOneStrategy {
    pub fn new(probs: [f64; 4]) -> Result<Self> {
        validate_strategy(probs, None)
    }

    pub fn with_p0(probs: [f64; 4], p0: f64) -> Result<Self> {
        validate_strategy(probs, Some(p0))
    }

    /// Skips validation. Callers must guarantee every entry lies in [0, 1].
    pub(crate) fn from_unchecked(probs: [f64; 4]) -> Self {
        debug_assert!(probs.iter().all(|v| (0.0..=1.0).contains(v)), "{probs:?}");
        MemoryOneStrategy { probs, p0: None }
    }

    pub fn probs(&self) -> [f64; 4] {
        self.probs
    }

    pub fn p_cc(&self) -> f64 {
        self.probs[0]
    }
    pub fn p_cd(&self) -> f64 {
        self.probs[1]
    }
    pub fn p_dc(&self) -> f64 {
        self.probs[2]
    }
    pub fn p_dd(&self) -> f64 {
        self.probs[3]
    }

    pub fn p0(&self) -> Option<f64> {
        self.p0
    }

    pub fn initial_cooperation(&self) -> f64 {
        self.p0.unwrap_or(DEFAULT_P0)
    }

    /// (1, 1, 0, 0): repeat your own previous move.
    pub fn is_repeat(&self) -> bool {
        self.probs == [1.0, 1.0, 0.0, 0.0]
    }

    pub fn is_deterministic_component(&self, i: usize) -> bool {
        let v = self.probs[i];
        v == 0.0 || v == 1.0
    }
}

impl fmt::Display for MemoryOneStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.probs;
        write!(f, "({a}, {b}, {c}, {d})")
    }
}

pub fn validate_strategy(v: [f64; 4], p0: Option<f64>) -> Result<MemoryOneStrategy> {
    for (name, x) in COMPONENT_NAMES.iter().zip(v) {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::validation(*name, format!("{x} is outside [0, 1]")));
        }
    }
    if let Some(x) = p0 {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::validation("p0", format!("{x} is outside [0, 1]")));
        }
    }
    Ok(MemoryOneStrategy { probs: v, p0 })
}

/// Long-run payoffs, co-player Y first: (π_Y, π_X).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffPair {
    pub pi_y: f64,
    pub pi_x: f64,
}

impl PayoffPair {
    pub fn new(pi_y: f64, pi_x: f64) -> Self {
        PayoffPair { pi_y, pi_x }
    }

    /// Both payoffs rounded to two decimals, as integer hundredths.
    pub fn key_2dp(&self) -> (i64, i64) {
        (round_2dp_key(self.pi_y), round_2dp_key(self.pi_x))
    }

    pub fn rounded_2dp(&self) -> PayoffPair {
        let (y, x) = self.key_2dp();
        PayoffPair::new(y as f64 / 100.0, x as f64 / 100.0)
    }
}

pub(crate) fn round_2dp_key(v: f64) -> i64 {
    (v * 100.0).round() as i64
}

/// Each component i.i.d. Beta(1/2, 1/2) on (0, 1), via sin²(πu/2).
pub fn sample_arcsine_strategy<R: Rng + ?Sized>(rng: &mut R) -> MemoryOneStrategy {
    let mut probs = [0.0; 4];
    for v in probs.iter_mut() {
        *v = sample_arcsine(rng);
    }
    MemoryOneStrategy::from_unchecked(probs)
}

pub fn sample_arcsine<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    let s = (FRAC_PI_2 * u).sin();
    // u within ~1e-8 of 1 rounds to exactly 1.0; keep the open interval
    (s * s).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}
