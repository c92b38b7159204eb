//! Selfish learners for the co-player Y: projected gradient ascent and
//! local random search, both optionally played through a trembling hand,
//! plus the classification of where they stop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameParams, MemoryOneStrategy, PayoffPair};
use crate::markov::{average_payoffs, discounted_distribution, payoffs_from_distribution, InitialDistribution};
use crate::payoff::{payoff_and_gradient, press_dyson_from_probs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    pub payoff_tolerance: f64,
    pub max_iterations: u64,
    pub error_rate: f64,
    pub lrs_radius: f64,
    pub lrs_patience: u64,
    pub discount: f64,
    /// Distribution over (CC, CD, DC, DD) that discounted LRS payoffs start
    /// from.
    pub lrs_start: [f64; 4],
    /// Keep every k-th trajectory record; the last one is always kept.
    pub thinning: u64,
    /// Steps without a new best payoff before PGA is declared stuck.
    pub stall_window: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            learning_rate: 1e-2,
            payoff_tolerance: 1e-15,
            max_iterations: 2_000_000,
            error_rate: 0.0,
            lrs_radius: 0.1,
            lrs_patience: 10_000,
            discount: 0.9999,
            lrs_start: InitialDistribution::default().0,
            thinning: 1,
            stall_window: 10,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, v: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(field, format!("{v} is out of range")))
            }
        };
        check(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate", self.learning_rate)?;
        check(self.payoff_tolerance > 0.0, "payoff_tolerance", self.payoff_tolerance)?;
        check((0.0..0.5).contains(&self.error_rate), "error_rate", self.error_rate)?;
        check(self.lrs_radius >= 0.0 && self.lrs_radius.is_finite(), "lrs_radius", self.lrs_radius)?;
        check(self.discount > 0.0 && self.discount < 1.0, "discount", self.discount)?;
        InitialDistribution::new(self.lrs_start)?;
        check(self.thinning >= 1, "thinning", self.thinning as f64)?;
        check(self.stall_window >= 1, "stall_window", self.stall_window as f64)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Converged,
    MaxIterations,
    Stalled,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::Converged => "converged",
            TerminationReason::MaxIterations => "max_iterations",
            TerminationReason::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub iteration: u64,
    pub q: [f64; 4],
    pub pi_y: f64,
    pub pi_x: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Y's intended strategy at the end.
    pub endpoint: MemoryOneStrategy,
    /// Long-run payoffs of the strategy Y actually plays at the end.
    pub endpoint_payoff: PayoffPair,
    pub termination: TerminationReason,
    pub iterations: u64,
    /// Steps whose gradient came from the discounted fallback.
    pub degenerate_steps: u64,
}

pub fn project_to_hypercube(x: [f64; 4]) -> [f64; 4] {
    x.map(|v| v.clamp(0.0, 1.0))
}

pub fn effective_strategy(q: &MemoryOneStrategy, error_rate: f64) -> MemoryOneStrategy {
    MemoryOneStrategy::from_unchecked(effective(&q.probs(), error_rate))
}

#[inline]
fn effective(q: &[f64; 4], eps: f64) -> [f64; 4] {
    if eps == 0.0 {
        return *q;
    }
    q.map(|v| (1.0 - eps) * v + eps * (1.0 - v))
}

/// Undiscounted payoffs with the ν₀-dependent long-run average where the
/// closed form is undefined.
pub fn long_run_payoff(p: &MemoryOneStrategy, q: &MemoryOneStrategy, g: &GameParams) -> PayoffPair {
    press_dyson_from_probs(&p.probs(), &q.probs(), g).unwrap_or_else(|_| average_payoffs(p, q, g, None))
}

fn max_norm(v: &[f64; 4]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Projected gradient ascent on π_Y(p, ·).
pub fn pga_run(
    p: &MemoryOneStrategy,
    q0: &MemoryOneStrategy,
    g: &GameParams,
    cfg: &LearnerConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let pv = p.probs();
    let eps = cfg.error_rate;
    let chain = 1.0 - 2.0 * eps;
    let mut q = project_to_hypercube(q0.probs());
    let (mut pp, mut grad, deg) = payoff_and_gradient(&pv, &effective(&q, eps), g);
    let mut degenerate_steps = deg as u64;
    let mut records = vec![TrajectoryRecord {
        iteration: 0,
        q,
        pi_y: pp.pi_y,
        pi_x: pp.pi_x,
        grad_norm: chain * max_norm(&grad),
    }];

    let mut best = pp.pi_y;
    let mut since_best = 0u64;
    let mut termination = TerminationReason::MaxIterations;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let step = cfg.learning_rate * chain;
        let next = project_to_hypercube(std::array::from_fn(|k| q[k] + step * grad[k]));
        let (next_pp, next_grad, deg) = payoff_and_gradient(&pv, &effective(&next, eps), g);
        degenerate_steps += deg as u64;
        let delta = next_pp.pi_y - pp.pi_y;
        q = next;
        pp = next_pp;
        grad = next_grad;

        let converged = delta.abs() < cfg.payoff_tolerance;
        if pp.pi_y > best + cfg.payoff_tolerance {
            best = pp.pi_y;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let done = converged || since_best >= cfg.stall_window;
        if done || iterations % cfg.thinning == 0 {
            records.push(TrajectoryRecord {
                iteration: iterations,
                q,
                pi_y: pp.pi_y,
                pi_x: pp.pi_x,
                grad_norm: chain * max_norm(&grad),
            });
        }
        if done {
            termination = TerminationReason::Converged;
            break;
        }
    }
    if termination == TerminationReason::MaxIterations && records.last().map(|r| r.iteration) != Some(iterations) {
        records.push(TrajectoryRecord { iteration: iterations, q, pi_y: pp.pi_y, pi_x: pp.pi_x, grad_norm: chain * max_norm(&grad) });
    }
    let endpoint = MemoryOneStrategy::from_unchecked(q);
    let endpoint_payoff = long_run_payoff(p, &effective_strategy(&endpoint, eps), g);
    Ok(Trajectory { records, endpoint, endpoint_payoff, termination, iterations, degenerate_steps })
}

/// Local random search: propose a uniform perturbation of radius
/// `lrs_radius` in each coordinate and keep it only if Y's discounted
/// payoff strictly improves.
pub fn lrs_run<R: Rng + ?Sized>(
    p: &MemoryOneStrategy,
    q0: &MemoryOneStrategy,
    g: &GameParams,
    cfg: &LearnerConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    cfg.validate()?;
    let pv = p.probs();
    let eps = cfg.error_rate;
    let nu0 = cfg.lrs_start;
    let eval = |q: &[f64; 4]| -> PayoffPair {
        let nu = discounted_distribution(&pv, &effective(q, eps), &nu0, cfg.discount)
            .expect("I − λM is invertible for λ < 1");
        payoffs_from_distribution(&nu, g)
    };
    let r = cfg.lrs_radius;
    let mut q = project_to_hypercube(q0.probs());
    let mut pp = eval(&q);
    let mut records = vec![TrajectoryRecord { iteration: 0, q, pi_y: pp.pi_y, pi_x: pp.pi_x, grad_norm: 0.0 }];
    let mut accepted = 0u64;
    let mut rejections = 0u64;
    let mut iterations = 0u64;
    let mut termination = TerminationReason::MaxIterations;
    while iterations < cfg.max_iterations {
        if rejections >= cfg.lrs_patience {
            termination = TerminationReason::Stalled;
            break;
        }
        iterations += 1;
        let cand = project_to_hypercube(std::array::from_fn(|k| {
            if r > 0.0 {
                rng.random_range(q[k] - r..q[k] + r)
            } else {
                q[k]
            }
        }));
        let cand_pp = eval(&cand);
        if cand_pp.pi_y - pp.pi_y > 1e-15 {
            q = cand;
            pp = cand_pp;
            rejections = 0;
            accepted += 1;
            if accepted % cfg.thinning == 0 {
                records.push(TrajectoryRecord { iteration: iterations, q, pi_y: pp.pi_y, pi_x: pp.pi_x, grad_norm: 0.0 });
            }
        } else {
            rejections += 1;
        }
    }
    if records.last().map(|r| r.q) != Some(q) {
        records.push(TrajectoryRecord { iteration: iterations, q, pi_y: pp.pi_y, pi_x: pp.pi_x, grad_norm: 0.0 });
    }
    let endpoint = MemoryOneStrategy::from_unchecked(q);
    let endpoint_payoff = long_run_payoff(p, &effective_strategy(&endpoint, eps), g);
    Ok(Trajectory { records, endpoint, endpoint_payoff, termination, iterations, degenerate_steps: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointClass {
    FullyDeterministic,
    TopFace,
    BottomFace,
    OtherBoundary,
    Interior,
}

impl EndpointClass {
    pub const ALL: [EndpointClass; 5] = [
        EndpointClass::FullyDeterministic,
        EndpointClass::TopFace,
        EndpointClass::BottomFace,
        EndpointClass::OtherBoundary,
        EndpointClass::Interior,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EndpointClass::FullyDeterministic => "fully_deterministic",
            EndpointClass::TopFace => "top_face",
            EndpointClass::BottomFace => "bottom_face",
            EndpointClass::OtherBoundary => "other_boundary",
            EndpointClass::Interior => "interior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EndpointForm {
    pub class: EndpointClass,
    /// Bit k set when component k (CC, CD, DC, DD) is within tolerance of
    /// 0 or 1.
    pub deterministic_mask: u8,
}

pub const ENDPOINT_TOL: f64 = 1e-9;

pub fn classify_endpoint(q: &[f64; 4], tol: f64) -> EndpointForm {
    let near = |v: f64, t: f64| (v - t).abs() <= tol;
    let mut mask = 0u8;
    for (k, &v) in q.iter().enumerate() {
        if near(v, 0.0) || near(v, 1.0) {
            mask |= 1 << k;
        }
    }
    let class = if mask == 0b1111 {
        EndpointClass::FullyDeterministic
    } else if near(q[0], 1.0) && near(q[1], 1.0) {
        EndpointClass::TopFace
    } else if near(q[2], 0.0) && near(q[3], 0.0) {
        EndpointClass::BottomFace
    } else if mask != 0 {
        EndpointClass::OtherBoundary
    } else {
        EndpointClass::Interior
    };
    EndpointForm { class, deterministic_mask: mask }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::sample_arcsine_strategy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(v: [f64; 4]) -> MemoryOneStrategy {
        MemoryOneStrategy::new(v).unwrap()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_hypercube([0.5; 4]), [0.5; 4]);
        assert_eq!(project_to_hypercube([1.3, -0.2, 0.7, 1.0]), [1.0, 0.0, 0.7, 1.0]);
        assert_eq!(project_to_hypercube([2.0; 4]), [1.0; 4]);
    }

    #[test]
    fn effective_strategy_examples() {
        let q = s([0.3, 0.6, 0.0, 1.0]);
        assert_eq!(effective_strategy(&q, 0.0).probs(), q.probs());
        let e = effective_strategy(&s([1.0, 0.0, 1.0, 0.0]), 1e-3).probs();
        for (a, b) in e.iter().zip([0.999, 0.001, 0.999, 0.001]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(effective_strategy(&q, 0.01).probs().iter().all(|&v| v >= 0.01 && v <= 0.99));
    }

    #[test]
    fn endpoint_classes() {
        assert_eq!(classify_endpoint(&[1.0, 1.0, 0.3, 0.7], 1e-9).class, EndpointClass::TopFace);
        assert_eq!(classify_endpoint(&[0.2, 0.9, 0.0, 0.0], 1e-9).class, EndpointClass::BottomFace);
        let f = classify_endpoint(&[0.0, 0.0, 1.0, 1.0], 1e-9);
        assert_eq!(f.class, EndpointClass::FullyDeterministic);
        assert_eq!(f.deterministic_mask, 0b1111);
        assert_eq!(classify_endpoint(&[1.0, 0.5, 0.0, 0.5], 1e-9).class, EndpointClass::OtherBoundary);
        assert_eq!(classify_endpoint(&[0.5; 4], 1e-9).class, EndpointClass::Interior);
        assert_eq!(classify_endpoint(&[1.0, 1.0, 0.0, 0.0], 1e-9).class, EndpointClass::FullyDeterministic);
    }

    #[test]
    fn config_validation() {
        assert!(LearnerConfig::default().validate().is_ok());
        let bad = LearnerConfig { error_rate: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = LearnerConfig { learning_rate: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pga_is_monotone_and_stays_in_cube() {
        let g = GameParams::new(3.0, 0.0, 5.0, 1.0).unwrap();
        let cfg = LearnerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let p = sample_arcsine_strategy(&mut rng);
            let q0 = sample_arcsine_strategy(&mut rng);
            let t = pga_run(&p, &q0, &g, &cfg).unwrap();
            for w in t.records.windows(2) {
                assert!(w[1].pi_y >= w[0].pi_y - 10.0 * cfg.payoff_tolerance, "{p} {q0}");
            }
            for r in &t.records {
                assert!(r.q.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn pga_reaches_a_vertex_against_fair_zd() {
        let g = GameParams::new(2.0, -1.0, 7.0, 0.0).unwrap();
        let p = s([1.0, 0.12, 0.88, 0.0]);
        let t = pga_run(&p, &s([0.1, 0.1, 0.9, 0.9]), &g, &LearnerConfig::default()).unwrap();
        assert_eq!(t.termination, TerminationReason::Converged);
        assert_eq!(t.endpoint.probs(), [0.0, 0.0, 1.0, 1.0]);
        assert_eq!(t.endpoint_payoff.key_2dp(), (279, 279));
    }

    #[test]
    fn lrs_with_zero_radius_stalls_at_start() {
        let g = GameParams::new(3.0, 0.0, 5.0, 1.0).unwrap();
        let cfg = LearnerConfig { lrs_radius: 1e-12, lrs_patience: 500, ..Default::default() };
        let q0 = s([0.3, 0.4, 0.5, 0.6]);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        // an equalizer: only discounting tilts the landscape
        let p = s([0.7, 0.35, 0.225, 0.05]);
        let t = lrs_run(&p, &q0, &g, &cfg, &mut rng).unwrap();
        assert_eq!(t.termination, TerminationReason::Stalled);
        for (a, b) in t.endpoint.probs().iter().zip(q0.probs()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lrs_accepts_only_improvements() {
        let g = GameParams::new(3.0, 0.0, 5.0, 1.0).unwrap();
        let cfg = LearnerConfig { lrs_radius: 0.2, lrs_patience: 2000, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let p = s([0.9, 0.1, 0.6, 0.2]);
        let t = lrs_run(&p, &s([0.5; 4]), &g, &cfg, &mut rng).unwrap();
        assert_eq!(t.termination, TerminationReason::Stalled);
        for w in t.records.windows(2) {
            assert!(w[1].pi_y > w[0].pi_y);
        }
    }

    #[test]
    fn trembling_run_never_hits_degenerate_chains() {
        let g = GameParams::new(2.0, -1.0, 7.0, 0.0).unwrap();
        let p = s([1.0, 0.12, 0.88, 0.0]);
        let cfg = LearnerConfig { error_rate: 1e-3, ..Default::default() };
        let t = pga_run(&p, &s([0.9, 0.9, 0.1, 0.1]), &g, &cfg).unwrap();
        assert_eq!(t.degenerate_steps, 0);
    }
}
