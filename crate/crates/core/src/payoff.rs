//! Closed-form undiscounted payoffs from the ratio of two 4×4 determinants,
//! the multilinear coefficients behind them, and exact payoff gradients.
//!
//! The determinant rows are indexed by the co-player's view of the previous
//! round, which in the focal player's order reads CC, DC, CD, DD. Row `k`
//! depends on the co-player's component `k` only, and affinely, so every
//! cofactor is multilinear in q and partial derivatives are obtained by
//! swapping a row for its q-coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameParams, MemoryOneStrategy, PayoffPair};
use crate::linalg::{det3, sum4};
use crate::markov::{discounted_distribution, payoffs_from_distribution, InitialDistribution};

/// |denominator| below this means the stationary distribution is not unique.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;
/// Central-difference step and discount used when the closed form is 0/0.
pub const FALLBACK_STEP: f64 = 1e-6;
pub const FALLBACK_LAMBDA: f64 = 1.0 - 1e-6;

/// Coefficients of R, S, T, P in the numerator of π_Y. Named by the focal
/// player's joint state: `f_dc` multiplies S because Y earns S when X
/// defects and Y cooperates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultilinearComponents {
    pub f_cc: f64,
    pub f_dc: f64,
    pub f_cd: f64,
    pub f_dd: f64,
    pub f_sigma: f64,
}

impl MultilinearComponents {
    /// f/f_Σ in the focal player's state order (CC, CD, DC, DD).
    pub fn distribution(&self) -> [f64; 4] {
        [self.f_cc, self.f_cd, self.f_dc, self.f_dd].map(|v| v / self.f_sigma)
    }

    /// Coefficients ordered to pair with (R, S, T, P).
    pub fn as_rstp(&self) -> [f64; 4] {
        [self.f_cc, self.f_dc, self.f_cd, self.f_dd]
    }
}

/// ∂π_Y/∂q for q = (q_CC, q_CD, q_DC, q_DD).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffGradient(pub [f64; 4]);

impl PayoffGradient {
    pub fn max_norm(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cofactors along the payoff column and their derivatives in q.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cofactors {
    /// Row order (CC, DC, CD, DD) from X's side, i.e. pairs with (R, S, T, P).
    pub f: [f64; 4],
    /// `df[k][i]` = ∂f_i/∂q_k.
    pub df: [[f64; 4]; 4],
}

#[inline]
fn cofactor(rows: &[[f64; 3]; 4], i: usize) -> f64 {
    match i {
        0 => -det3(rows[1], rows[2], rows[3]),
        1 => det3(rows[0], rows[2], rows[3]),
        2 => -det3(rows[0], rows[1], rows[3]),
        _ => det3(rows[0], rows[1], rows[2]),
    }
}

impl Cofactors {
    #[inline]
    pub fn new(p: &[f64; 4], q: &[f64; 4]) -> Self {
        let [p_cc, p_cd, p_dc, p_dd] = *p;
        let [q_cc, q_cd, q_dc, q_dd] = *q;
        let rows = [
            [p_cc * q_cc - 1.0, p_cc - 1.0, q_cc - 1.0],
            [p_dc * q_cd, p_dc, q_cd - 1.0],
            [p_cd * q_dc, p_cd - 1.0, q_dc],
            [p_dd * q_dd, p_dd, q_dd],
        ];
        // row k is affine in q_k with this slope
        let slopes = [[p_cc, 0.0, 1.0], [p_dc, 0.0, 1.0], [p_cd, 0.0, 1.0], [p_dd, 0.0, 1.0]];

        let mut f = [0.0; 4];
        for (i, v) in f.iter_mut().enumerate() {
            *v = cofactor(&rows, i);
        }
        let mut df = [[0.0; 4]; 4];
        for k in 0..4 {
            let mut swapped = rows;
            swapped[k] = slopes[k];
            for i in 0..4 {
                if i != k {
                    df[k][i] = cofactor(&swapped, i);
                }
            }
        }
        Cofactors { f, df }
    }

    #[inline]
    pub fn denominator(&self) -> f64 {
        sum4(self.f)
    }

    #[inline]
    pub fn numerator(&self, w: &[f64; 4]) -> f64 {
        sum4([self.f[0] * w[0], self.f[1] * w[1], self.f[2] * w[2], self.f[3] * w[3]])
    }

    /// Gradient of Σ f_i w_i / Σ f_i in q, via the quotient rule.
    #[inline]
    pub fn ratio_gradient(&self, w: &[f64; 4]) -> [f64; 4] {
        let d = self.denominator();
        let n = self.numerator(w);
        let mut g = [0.0; 4];
        for (k, gk) in g.iter_mut().enumerate() {
            let df = &self.df[k];
            let dn = sum4([df[0] * w[0], df[1] * w[1], df[2] * w[2], df[3] * w[3]]);
            let dd = sum4(*df);
            *gk = (dn * d - n * dd) / (d * d);
        }
        g
    }
}

/// Y's payoff weights in determinant row order.
#[inline]
pub(crate) fn y_weights(g: &GameParams) -> [f64; 4] {
    [g.r, g.s, g.t, g.p]
}

/// X's payoff weights in determinant row order.
#[inline]
pub(crate) fn x_weights(g: &GameParams) -> [f64; 4] {
    [g.r, g.t, g.s, g.p]
}

pub fn multilinear_components(p: &MemoryOneStrategy, q: &MemoryOneStrategy) -> MultilinearComponents {
    let c = Cofactors::new(&p.probs(), &q.probs());
    MultilinearComponents {
        f_cc: c.f[0],
        f_dc: c.f[1],
        f_cd: c.f[2],
        f_dd: c.f[3],
        f_sigma: c.denominator(),
    }
}

pub(crate) fn press_dyson_from_probs(p: &[f64; 4], q: &[f64; 4], g: &GameParams) -> Result<PayoffPair> {
    let c = Cofactors::new(p, q);
    let d = c.denominator();
    if d.abs() < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateChain { denominator: d });
    }
    Ok(PayoffPair::new(c.numerator(&y_weights(g)) / d, c.numerator(&x_weights(g)) / d))
}

/// Undiscounted payoffs from the determinant formula.
pub fn press_dyson_payoff(p: &MemoryOneStrategy, q: &MemoryOneStrategy, g: &GameParams) -> Result<PayoffPair> {
    press_dyson_from_probs(&p.probs(), &q.probs(), g)
}

/// Exact ∂π_Y/∂q.
pub fn payoff_gradient(p: &MemoryOneStrategy, q: &MemoryOneStrategy, g: &GameParams) -> Result<PayoffGradient> {
    gradient_from_probs(&p.probs(), &q.probs(), &y_weights(g))
}

/// Exact ∂π_X/∂q.
pub fn payoff_gradient_x(p: &MemoryOneStrategy, q: &MemoryOneStrategy, g: &GameParams) -> Result<PayoffGradient> {
    gradient_from_probs(&p.probs(), &q.probs(), &x_weights(g))
}

fn gradient_from_probs(p: &[f64; 4], q: &[f64; 4], w: &[f64; 4]) -> Result<PayoffGradient> {
    let c = Cofactors::new(p, q);
    let d = c.denominator();
    if d.abs() < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateChain { denominator: d });
    }
    Ok(PayoffGradient(c.ratio_gradient(w)))
}

/// Discounted payoffs used wherever the closed form is undefined.
pub(crate) fn discounted_from_probs(p: &[f64; 4], q: &[f64; 4], g: &GameParams, lambda: f64) -> PayoffPair {
    let nu0 = InitialDistribution::default();
    let nu = discounted_distribution(p, q, &nu0.0, lambda).expect("I − λM is invertible for λ < 1");
    payoffs_from_distribution(&nu, g)
}

/// Central differences of the nearly undiscounted payoff. Only meant for
/// points where [`payoff_gradient`] reports a degenerate chain.
pub fn fallback_gradient(p: &MemoryOneStrategy, q: &MemoryOneStrategy, g: &GameParams) -> PayoffGradient {
    PayoffGradient(fallback_gradient_from_probs(&p.probs(), &q.probs(), g))
}

pub(crate) fn fallback_gradient_from_probs(p: &[f64; 4], q: &[f64; 4], g: &GameParams) -> [f64; 4] {
    let mut grad = [0.0; 4];
    for k in 0..4 {
        let mut hi = *q;
        let mut lo = *q;
        hi[k] += FALLBACK_STEP;
        lo[k] -= FALLBACK_STEP;
        let up = discounted_from_probs(p, &hi, g, FALLBACK_LAMBDA).pi_y;
        let down = discounted_from_probs(p, &lo, g, FALLBACK_LAMBDA).pi_y;
        grad[k] = (up - down) / (2.0 * FALLBACK_STEP);
    }
    grad
}

/// Payoff and gradient in one pass, falling back to discounted evaluation
/// when the chain is degenerate. Returns `(payoffs, ∂π_Y/∂q, degenerate)`.
pub(crate) fn payoff_and_gradient(p: &[f64; 4], q: &[f64; 4], g: &GameParams) -> (PayoffPair, [f64; 4], bool) {
    let c = Cofactors::new(p, q);
    let d = c.denominator();
    if d.abs() < DEGENERACY_THRESHOLD {
        let pp = discounted_from_probs(p, q, g, FALLBACK_LAMBDA);
        return (pp, fallback_gradient_from_probs(p, q, g), true);
    }
    let wy = y_weights(g);
    let pp = PayoffPair::new(c.numerator(&wy) / d, c.numerator(&x_weights(g)) / d);
    (pp, c.ratio_gradient(&wy), false)
}
