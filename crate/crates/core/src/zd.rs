//! Payoff-control strategies: zero-determinant (ZD) strategies enforcing
//! π_X − κ = χ(π_Y − κ), equalizers fixing π_Y, the linear-algebra
//! machinery that characterises when Y's gradient can vanish, and the
//! sufficient conditions under which every ascent path of Y is known to
//! reach the global optimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameParams, MemoryOneStrategy};
use crate::linalg::{kernel_basis, kernel_dimension};
use crate::markov::{average_payoffs, long_run_distribution, InitialDistribution};
use crate::payoff::{press_dyson_payoff, Cofactors, DEGENERACY_THRESHOLD};

/// Components closer than this to 0 or 1 are snapped onto the bound.
pub const CLAMP_TOL: f64 = 1e-12;
/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZDParams {
    pub kappa: f64,
    pub chi: f64,
    pub phi: f64,
}

/// Each ZD component is `base + φ·slope`; `base` is 1 for p_CC, p_CD and 0
/// for p_DC, p_DD.
fn zd_lines(g: &GameParams, kappa: f64, chi: f64) -> [(f64, f64); 4] {
    let GameParams { r, s, t, p } = *g;
    [
        (1.0, -(chi - 1.0) * (r - kappa)),
        (1.0, -(kappa - s + chi * (t - kappa))),
        (0.0, t - kappa + chi * (kappa - s)),
        (0.0, (chi - 1.0) * (kappa - p)),
    ]
}

/// Raw ZD components, without any feasibility check.
pub fn zd_components(g: &GameParams, zp: &ZDParams) -> [f64; 4] {
    zd_lines(g, zp.kappa, zp.chi).map(|(base, slope)| base + zp.phi * slope)
}

const NAMES: [&str; 4] = ["p_cc", "p_cd", "p_dc", "p_dd"];

pub fn zd_strategy(g: &GameParams, zp: &ZDParams) -> Result<MemoryOneStrategy> {
    if ![zp.kappa, zp.chi, zp.phi].iter().all(|v| v.is_finite()) {
        return Err(Error::validation("zd params", format!("{zp:?} must be finite")));
    }
    let mut v = zd_components(g, zp);
    let mut bad = Vec::new();
    for (i, x) in v.iter_mut().enumerate() {
        if *x < 0.0 && *x > -CLAMP_TOL {
            *x = 0.0;
        } else if *x > 1.0 && *x < 1.0 + CLAMP_TOL {
            *x = 1.0;
        } else if !(0.0..=1.0).contains(x) {
            bad.push(format!("{} = {}", NAMES[i], x));
        }
    }
    if !bad.is_empty() {
        return Err(Error::Infeasible(format!(
            "kappa={}, chi={}, phi={} gives {}",
            zp.kappa,
            zp.chi,
            zp.phi,
            bad.join(", ")
        )));
    }
    MemoryOneStrategy::new(v)
}

/// Largest φ > 0 keeping every ZD component in [0, 1]. Returns infinity
/// when no component constrains φ.
pub fn phi_max(g: &GameParams, kappa: f64, chi: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for (i, (base, slope)) in zd_lines(g, kappa, chi).into_iter().enumerate() {
        // base 1 must not increase, base 0 must not decrease
        let wrong_way = if base == 1.0 { slope > 0.0 } else { slope < 0.0 };
        if wrong_way {
            return Err(Error::Infeasible(format!(
                "no phi > 0 keeps {} in [0, 1] for kappa={kappa}, chi={chi}",
                NAMES[i]
            )));
        }
        if slope != 0.0 {
            best = best.min(1.0 / slope.abs());
        }
    }
    Ok(best)
}

/// |π_X − κ − χ(π_Y − κ)| for the pair (p, q).
pub fn zd_relation_residual(
    p: &MemoryOneStrategy,
    zp: &ZDParams,
    q: &MemoryOneStrategy,
    g: &GameParams,
) -> Result<f64> {
    let pp = press_dyson_payoff(p, q, g)?;
    Ok((pp.pi_x - zp.kappa - zp.chi * (pp.pi_y - zp.kappa)).abs())
}

/// Equalizer with the given p_CC and p_DD; returns the strategy and the
/// value it pins π_Y to.
pub fn equalizer_strategy(g: &GameParams, p_cc: f64, p_dd: f64) -> Result<(MemoryOneStrategy, f64)> {
    for (name, v) in [("p_cc", p_cc), ("p_dd", p_dd)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::validation(name, format!("{v} is outside [0, 1]")));
        }
    }
    let GameParams { r, s, t, p } = *g;
    if r == p {
        return Err(Error::DivisionByZero("equalizer needs R != P".into()));
    }
    let weight = 1.0 - p_cc + p_dd;
    if weight == 0.0 {
        return Err(Error::DivisionByZero("1 - p_cc + p_dd = 0".into()));
    }
    let p_cd = (p_cc * (t - p) - (1.0 + p_dd) * (t - r)) / (r - p);
    let p_dc = ((1.0 - p_cc) * (p - s) + p_dd * (r - s)) / (r - p);

    let mut v = [p_cc, p_cd, p_dc, p_dd];
    let mut bad = Vec::new();
    for i in [1, 2] {
        if v[i] < 0.0 && v[i] > -CLAMP_TOL {
            v[i] = 0.0;
        } else if v[i] > 1.0 && v[i] < 1.0 + CLAMP_TOL {
            v[i] = 1.0;
        } else if !(0.0..=1.0).contains(&v[i]) {
            bad.push(format!("{} = {}", NAMES[i], v[i]));
        }
    }
    if !bad.is_empty() {
        return Err(Error::Infeasible(format!(
            "equalizer with p_cc={p_cc}, p_dd={p_dd} gives {}",
            bad.join(", ")
        )));
    }
    let value = ((1.0 - p_cc) * p + p_dd * r) / weight;
    Ok((MemoryOneStrategy::new(v)?, value))
}

fn payoff_y_or_long_run(p: &MemoryOneStrategy, q: &MemoryOneStrategy, g: &GameParams) -> f64 {
    match press_dyson_payoff(p, q, g) {
        Ok(pp) => pp.pi_y,
        Err(_) => average_payoffs(p, q, g, None).pi_y,
    }
}

/// Corners of the shrunken cube {ε, 1−ε}⁴, in binary order with CC as the
/// most significant bit. Index 0 is (ε, ε, ε, ε).
pub fn eps_vertices(eps: f64) -> [MemoryOneStrategy; 16] {
    std::array::from_fn(|mask| {
        let v = std::array::from_fn(|k| if mask & (8 >> k) != 0 { 1.0 - eps } else { eps });
        MemoryOneStrategy::from_unchecked(v)
    })
}

/// True when π_Y(p, ·) varies by less than `tol` over {ε, 1−ε}⁴.
pub fn is_equalizer(p: &MemoryOneStrategy, g: &GameParams, eps: f64, tol: f64) -> bool {
    let values: Vec<f64> = eps_vertices(eps).iter().map(|q| payoff_y_or_long_run(p, q, g)).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo < tol
}

/// Finds (β, γ) with p = (1+βR+γ, 1+βT+γ, βS+γ, βP+γ) and β ≠ 0, if any.
pub fn equalizer_e0_solve(p: &MemoryOneStrategy, g: &GameParams) -> Option<(f64, f64)> {
    let a = [g.r, g.t, g.s, g.p];
    let [pcc, pcd, pdc, pdd] = p.probs();
    let b = [pcc - 1.0, pcd - 1.0, pdc, pdd];
    // normal equations for the 4×2 least-squares problem
    let (mut saa, mut sa, mut sab, mut sb) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..4 {
        saa += a[i] * a[i];
        sa += a[i];
        sab += a[i] * b[i];
        sb += b[i];
    }
    let det = saa * 4.0 - sa * sa;
    if det.abs() < 1e-14 {
        return None;
    }
    let beta = (sab * 4.0 - sa * sb) / det;
    let gamma = (saa * sb - sa * sab) / det;
    let residual = (0..4).map(|i| (beta * a[i] + gamma - b[i]).abs()).fold(0.0, f64::max);
    (residual < 1e-9 && beta.abs() > 1e-12).then_some((beta, gamma))
}

/// A coefficient matrix whose right null space is a set of games, with
/// that null space's dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub rows: Vec<[f64; 4]>,
    pub kernel_dim: usize,
}

impl KernelMatrix {
    fn from_rows(rows: Vec<[f64; 4]>) -> Self {
        let kernel_dim = kernel_dimension(&rows, RANK_TOL);
        KernelMatrix { rows, kernel_dim }
    }

    /// Orthonormal basis of the null space, columns ordered (R, S, T, P).
    pub fn kernel_basis(&self) -> Vec<[f64; 4]> {
        kernel_basis(&self.rows, RANK_TOL)
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().flatten().all(|v| *v == 0.0)
    }
}

/// Row k holds the coefficients of (R, S, T, P) in ∂π_Y/∂q_k. Games in the
/// kernel are exactly those for which Y's gradient vanishes at q.
pub fn gradient_coeff_matrix(p: &MemoryOneStrategy, q: &MemoryOneStrategy) -> Result<KernelMatrix> {
    let c = Cofactors::new(&p.probs(), &q.probs());
    let d = c.denominator();
    // numerator of the quotient rule, i.e. the gradient scaled by D²
    let mut rows = vec![[0.0; 4]; 4];
    for (k, row) in rows.iter_mut().enumerate() {
        let dd: f64 = c.df[k].iter().sum();
        for j in 0..4 {
            row[j] = c.df[k][j] * d - c.f[j] * dd;
        }
    }
    if d.abs() < DEGENERACY_THRESHOLD {
        let largest = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if largest < DEGENERACY_THRESHOLD {
            return Ok(KernelMatrix::from_rows(vec![[0.0; 4]; 4]));
        }
        return Err(Error::DegenerateChain { denominator: d });
    }
    let scale = 1.0 / (d * d);
    for row in rows.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(KernelMatrix::from_rows(rows))
}

/// Coefficients of (R, S, T, P) in π_Y(p, q), i.e. the long-run
/// distribution reordered to pair with Y's payoffs.
fn payoff_coefficients(p: &MemoryOneStrategy, q: &MemoryOneStrategy) -> [f64; 4] {
    let c = Cofactors::new(&p.probs(), &q.probs());
    let d = c.denominator();
    if d.abs() >= DEGENERACY_THRESHOLD {
        return c.f.map(|v| v / d);
    }
    let nu = long_run_distribution(p, q, &InitialDistribution::default());
    [nu[0], nu[2], nu[1], nu[3]]
}

/// Rows are π_Y(p, q) − π_Y(p, (ε,ε,ε,ε)) as linear forms in (R, S, T, P)
/// for the 15 other corners q of {ε, 1−ε}⁴; the kernel is the set of games
/// for which p is an equalizer on those corners.
pub fn boundary_payoff_matrix(p: &MemoryOneStrategy, eps: f64) -> KernelMatrix {
    let corners = eps_vertices(eps);
    let base = payoff_coefficients(p, &corners[0]);
    let rows = corners[1..]
        .iter()
        .map(|q| {
            let v = payoff_coefficients(p, q);
            std::array::from_fn(|j| v[j] - base[j])
        })
        .collect();
    KernelMatrix::from_rows(rows)
}

/// Sufficient conditions for every ascent path of Y to end at the global
/// optimum against a positively correlated ZD strategy, checked on payoffs
/// rescaled so that R = 1 and P = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// (R', S', T', P') after Z → (Z − P)/(R − P).
    pub rescaled: [f64; 4],
    pub p_cc_ge_p_cd: Option<bool>,
    pub p_dc_ge_p_dd: Option<bool>,
    /// 0 ≤ S' + T' ≤ 2
    pub alternation_in_range: bool,
    /// 1 − p_CD − (1 − p_CC)S' + p_DD(1 − S'), when p is known.
    pub prefactor: Option<f64>,
    pub prefactor_nonneg: Option<bool>,
    /// χ(T' − 1) + (1 − S') ≥ 0, the ZD form of p_CC ≥ p_CD.
    pub pczd_a: Option<bool>,
    /// T' − χS' ≥ 0, the ZD form of p_DC ≥ p_DD.
    pub pczd_b: Option<bool>,
    /// All evaluated condition groups hold.
    pub robustness_covered: bool,
}

pub fn chen_zinger_conditions(
    g: &GameParams,
    p: Option<&MemoryOneStrategy>,
    chi: Option<f64>,
) -> Result<ConditionReport> {
    if g.r == g.p {
        return Err(Error::DivisionByZero("rescaling requires R != P".into()));
    }
    let scale = |z: f64| (z - g.p) / (g.r - g.p);
    let (s1, t1) = (scale(g.s), scale(g.t));
    let rescaled = [scale(g.r), s1, t1, scale(g.p)];
    let alt = s1 + t1;
    let alternation_in_range = (0.0..=2.0).contains(&alt);

    let p_cc_ge_p_cd = p.map(|p| p.p_cc() >= p.p_cd());
    let p_dc_ge_p_dd = p.map(|p| p.p_dc() >= p.p_dd());
    let prefactor = p.map(|p| 1.0 - p.p_cd() - (1.0 - p.p_cc()) * s1 + p.p_dd() * (1.0 - s1));
    let prefactor_nonneg = prefactor.map(|v| v >= 0.0);
    let pczd_a = chi.map(|chi| chi * (t1 - 1.0) + (1.0 - s1) >= 0.0);
    let pczd_b = chi.map(|chi| t1 - chi * s1 >= 0.0);

    let a = p_cc_ge_p_cd.or(pczd_a);
    let b = p_dc_ge_p_dd.or(pczd_b);
    let robustness_covered =
        alternation_in_range && [a, b, prefactor_nonneg].iter().all(|c| c.unwrap_or(true));

    Ok(ConditionReport {
        rescaled,
        p_cc_ge_p_cd,
        p_dc_ge_p_dd,
        alternation_in_range,
        prefactor,
        prefactor_nonneg,
        pczd_a,
        pczd_b,
        robustness_covered,
    })
}
