//! The joint-action Markov chain of two memory-one players and its long-run
//! behaviour: closed classes, stationary distributions, Cesàro limits and
//! (un)discounted payoffs.
//!
//! States are ordered CC, CD, DC, DD from the focal player X's side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameParams, MemoryOneStrategy, PayoffPair};
use crate::linalg::{self, Mat4};

/// Entries above this count as edges of the support graph.
pub const SUPPORT_THRESHOLD: f64 = 1e-14;
pub const CESARO_TOL: f64 = 1e-12;
pub const CESARO_MAX_ITER: usize = 1_000_000;

/// A 4×4 row-stochastic matrix over (CC, CD, DC, DD).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix(pub Mat4);

impl TransitionMatrix {
    pub fn rows(&self) -> &Mat4 {
        &self.0
    }

    pub fn power(&self, k: u32) -> Mat4 {
        let mut acc = linalg::IDENTITY;
        for _ in 0..k {
            acc = linalg::mat_mul(&acc, &self.0);
        }
        acc
    }
}

/// Distribution over the first joint action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution(pub [f64; 4]);

impl InitialDistribution {
    pub fn new(v: [f64; 4]) -> Result<Self> {
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::validation("nu0", format!("entries must be non-negative: {v:?}")));
        }
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation("nu0", format!("entries sum to {total}, not 1")));
        }
        Ok(InitialDistribution(v))
    }

    /// Product distribution of independent first moves.
    pub fn from_first_moves(p0: f64, q0: f64) -> Self {
        InitialDistribution([p0 * q0, p0 * (1.0 - q0), (1.0 - p0) * q0, (1.0 - p0) * (1.0 - q0)])
    }

    /// Uses each strategy's own p0, falling back to 1/2.
    pub fn for_pair(p: &MemoryOneStrategy, q: &MemoryOneStrategy) -> Self {
        Self::from_first_moves(p.initial_cooperation(), q.initial_cooperation())
    }
}

impl Default for InitialDistribution {
    fn default() -> Self {
        Self::from_first_moves(0.5, 0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedClass {
    /// State indices (0 = CC … 3 = DD), ascending.
    pub states: Vec<usize>,
    /// Stationary distribution supported on `states`.
    pub distribution: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarySet {
    pub classes: Vec<ClosedClass>,
    pub unique: bool,
}

impl StationarySet {
    /// The stationary distribution when it is unique.
    pub fn unique_distribution(&self) -> Option<[f64; 4]> {
        self.unique.then(|| self.classes[0].distribution)
    }
}

/// Builds the transition matrix. Y sees the chain with roles swapped, so
/// row CD reads Y's entry for DC and vice versa.
pub fn transition_matrix(p: &MemoryOneStrategy, q: &MemoryOneStrategy) -> TransitionMatrix {
    transition_from_probs(&p.probs(), &q.probs())
}

pub(crate) fn transition_from_probs(p: &[f64; 4], q: &[f64; 4]) -> TransitionMatrix {
    // Y's cooperation probability for each X-perspective state
    let qy = [q[0], q[2], q[1], q[3]];
    let mut m = [[0.0; 4]; 4];
    for s in 0..4 {
        let (x, y) = (p[s], qy[s]);
        m[s] = [x * y, x * (1.0 - y), (1.0 - x) * y, (1.0 - x) * (1.0 - y)];
    }
    TransitionMatrix(m)
}

fn reachability(m: &Mat4) -> [[bool; 4]; 4] {
    let mut reach = [[false; 4]; 4];
    for i in 0..4 {
        reach[i][i] = true;
        for j in 0..4 {
            if m[i][j] > SUPPORT_THRESHOLD {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach
}

/// Closed communicating classes of the support graph, as ascending state lists.
pub fn closed_classes(m: &TransitionMatrix) -> Vec<Vec<usize>> {
    let reach = reachability(&m.0);
    let mut seen = [false; 4];
    let mut classes = Vec::new();
    for i in 0..4 {
        if seen[i] {
            continue;
        }
        let class: Vec<usize> = (0..4).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            seen[j] = true;
        }
        let closed = (0..4).all(|j| !reach[i][j] || class.contains(&j));
        if closed {
            classes.push(class);
        }
    }
    classes
}

pub fn stationary_set(m: &TransitionMatrix) -> StationarySet {
    let classes: Vec<ClosedClass> = closed_classes(m)
        .into_iter()
        .map(|states| {
            let distribution = class_distribution(&m.0, &states);
            ClosedClass { states, distribution }
        })
        .collect();
    let unique = classes.len() == 1;
    StationarySet { classes, unique }
}

/// Solves ν(M − I) = 0, Σν = 1 restricted to one closed class.
fn class_distribution(m: &Mat4, states: &[usize]) -> [f64; 4] {
    let k = states.len();
    let mut a = [[0.0; 4]; 4];
    let mut b = [0.0; 4];
    // row r of the system is the balance equation for states[r]
    for (r, &j) in states.iter().enumerate() {
        for (c, &i) in states.iter().enumerate() {
            a[r][c] = m[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[k - 1] = [0.0; 4];
    for c in 0..k {
        a[k - 1][c] = 1.0;
    }
    b[k - 1] = 1.0;
    let x = linalg::solve(k, a, b).expect("closed class system is non-singular");
    let mut nu = [0.0; 4];
    for (c, &i) in states.iter().enumerate() {
        nu[i] = x[c];
    }
    nu
}

/// Time-average limit of the powers of `m`.
pub fn cesaro_limit(m: &TransitionMatrix, tol: f64) -> Result<Mat4> {
    cesaro_limit_capped(m, tol, CESARO_MAX_ITER)
}

/// Every period of a chain on four states divides 12, so the average of
/// M, …, M¹² absorbs the periodic part and M¹²ⁿ converges. The limit is
/// (lim M¹²ⁿ)·B, with the power limit reached by repeated squaring.
pub fn cesaro_limit_capped(m: &TransitionMatrix, tol: f64, max_iter: usize) -> Result<Mat4> {
    let mut power = m.0;
    let mut block = m.0;
    for _ in 1..12 {
        power = linalg::mat_mul(&power, &m.0);
        for i in 0..4 {
            for j in 0..4 {
                block[i][j] += power[i][j];
            }
        }
    }
    for row in block.iter_mut() {
        for v in row.iter_mut() {
            *v /= 12.0;
        }
    }

    let mut avg = linalg::mat_mul(&power, &block);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        power = linalg::mat_mul(&power, &power);
        let next = linalg::mat_mul(&power, &block);
        residual = linalg::max_abs_diff(&next, &avg);
        avg = next;
        if residual < tol {
            return Ok(avg);
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
    })
}

pub fn payoffs_from_distribution(nu: &[f64; 4], g: &GameParams) -> PayoffPair {
    PayoffPair::new(linalg::dot(nu, &g.y_payoffs()), linalg::dot(nu, &g.x_payoffs()))
}

/// Undiscounted long-run payoffs. When the chain has several closed
/// classes the answer depends on where play starts: `nu0` if given, else
/// the product of the strategies' first moves.
pub fn average_payoffs(
    p: &MemoryOneStrategy,
    q: &MemoryOneStrategy,
    g: &GameParams,
    nu0: Option<&InitialDistribution>,
) -> PayoffPair {
    let m = transition_matrix(p, q);
    let set = stationary_set(&m);
    if let Some(nu) = set.unique_distribution() {
        return payoffs_from_distribution(&nu, g);
    }
    let start = nu0.copied().unwrap_or_else(|| InitialDistribution::for_pair(p, q));
    let nu = limit_distribution(&m, &set, &start);
    payoffs_from_distribution(&nu, g)
}

/// Long-run state occupation ν₀·M*, which reduces to the stationary
/// distribution when it is unique.
pub fn long_run_distribution(p: &MemoryOneStrategy, q: &MemoryOneStrategy, nu0: &InitialDistribution) -> [f64; 4] {
    let m = transition_matrix(p, q);
    let set = stationary_set(&m);
    match set.unique_distribution() {
        Some(nu) => nu,
        None => limit_distribution(&m, &set, nu0),
    }
}

fn limit_distribution(m: &TransitionMatrix, set: &StationarySet, start: &InitialDistribution) -> [f64; 4] {
    match cesaro_limit(m, CESARO_TOL) {
        Ok(limit) => linalg::vec_mat(&start.0, &limit),
        // The squaring iteration only stalls for pathological inputs; the
        // class decomposition is an exact alternative.
        Err(_) => absorption_mixture(m, set, start),
    }
}

/// ν₀·M* assembled from absorption probabilities into each closed class.
fn absorption_mixture(m: &TransitionMatrix, set: &StationarySet, start: &InitialDistribution) -> [f64; 4] {
    let mut nu = [0.0; 4];
    let mut dist = start.0;
    // drive transient mass into the closed classes
    for _ in 0..10_000 {
        dist = linalg::vec_mat(&dist, &m.0);
    }
    for class in &set.classes {
        let mass: f64 = class.states.iter().map(|&s| dist[s]).sum();
        for i in 0..4 {
            nu[i] += mass * class.distribution[i];
        }
    }
    nu
}

/// Discounted payoffs (1−λ)·ν₀·(I − λM)⁻¹ against each player's payoffs.
pub fn discounted_payoffs(
    p: &MemoryOneStrategy,
    q: &MemoryOneStrategy,
    g: &GameParams,
    nu0: &InitialDistribution,
    lambda: f64,
) -> Result<PayoffPair> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::validation("lambda", format!("{lambda} is outside (0, 1)")));
    }
    let nu = discounted_distribution(&p.probs(), &q.probs(), &nu0.0, lambda)?;
    Ok(payoffs_from_distribution(&nu, g))
}

/// Normalised discounted occupation measure (1−λ)·ν₀·(I − λM)⁻¹.
pub(crate) fn discounted_distribution(p: &[f64; 4], q: &[f64; 4], nu0: &[f64; 4], lambda: f64) -> Result<[f64; 4]> {
    let m = transition_from_probs(p, q).0;
    // (I − λM)ᵀ xᵀ = (1−λ)ν₀ᵀ
    let mut a = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            a[j][i] = if i == j { 1.0 } else { 0.0 } - lambda * m[i][j];
        }
    }
    let b = nu0.map(|v| (1.0 - lambda) * v);
    linalg::solve(4, a, b).map_err(|_| Error::Singular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::sample_arcsine_strategy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(v: [f64; 4]) -> MemoryOneStrategy {
        MemoryOneStrategy::new(v).unwrap()
    }

    fn g(v: [f64; 4]) -> GameParams {
        GameParams::from_array(v).unwrap()
    }

    fn interior<R: Rng>(rng: &mut R) -> MemoryOneStrategy {
        s([0.0; 4].map(|_: f64| rng.random_range(0.01..0.99)))
    }

    #[test]
    fn deterministic_pairs() {
        let m = transition_matrix(&s([1.0; 4]), &s([1.0; 4]));
        for row in m.rows() {
            assert_eq!(*row, [1.0, 0.0, 0.0, 0.0]);
        }
        let m = transition_matrix(&s([0.0; 4]), &s([0.0; 4]));
        for row in m.rows() {
            assert_eq!(*row, [0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn row_cd_uses_co_player_dc_entry() {
        // X: p_CD = 0; Y seen from its side is in DC, q_DC = 1
        let m = transition_matrix(&s([1.0, 0.0, 1.0, 0.0]), &s([1.0, 0.0, 1.0, 0.0]));
        let row_cd = m.rows()[1];
        assert_eq!(row_cd[3], 0.0); // (1 − p_CD)(1 − q_DC)
        assert_eq!(row_cd[2], 1.0); // (1 − p_CD)·q_DC
        assert_eq!(row_cd, [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn stationary_all_cooperate() {
        let set = stationary_set(&transition_matrix(&s([1.0; 4]), &s([1.0; 4])));
        assert!(set.unique);
        assert_eq!(set.classes[0].distribution, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn repeat_versus_repeat_freezes_every_state() {
        let rep = s([1.0, 1.0, 0.0, 0.0]);
        let set = stationary_set(&transition_matrix(&rep, &rep));
        assert!(!set.unique);
        let mut found: Vec<Vec<usize>> = set.classes.iter().map(|c| c.states.clone()).collect();
        found.sort();
        assert_eq!(found, vec![vec![0], vec![1], vec![2], vec![3]]);
        // the oracle: brute-force reachability by repeated boolean products
        let m = transition_matrix(&rep, &rep).0;
        let mut reach = [[false; 4]; 4];
        for i in 0..4 {
            let mut frontier = vec![i];
            while let Some(u) = frontier.pop() {
                for v in 0..4 {
                    if m[u][v] > 0.0 && !reach[i][v] {
                        reach[i][v] = true;
                        frontier.push(v);
                    }
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(reach[i][j], i == j);
            }
        }
    }

    #[test]
    fn random_interior_pairs_have_positive_unique_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = transition_matrix(&interior(&mut rng), &interior(&mut rng));
            let set = stationary_set(&m);
            assert!(set.unique);
            let nu = set.classes[0].distribution;
            assert!(nu.iter().all(|&v| v > 0.0));
            let nm = linalg::vec_mat(&nu, &m.0);
            for i in 0..4 {
                assert!((nm[i] - nu[i]).abs() < 1e-10);
            }
            assert!((nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cesaro_of_alternators() {
        let alt = s([0.0, 0.0, 1.0, 1.0]);
        let m = transition_matrix(&alt, &alt);
        let limit = cesaro_limit(&m, CESARO_TOL).unwrap();
        for row in [1, 2] {
            for (j, want) in [0.0, 0.5, 0.5, 0.0].into_iter().enumerate() {
                assert!((limit[row][j] - want).abs() < 1e-12, "{limit:?}");
            }
        }
        let all_c = transition_matrix(&s([1.0; 4]), &s([1.0; 4]));
        let limit = cesaro_limit(&all_c, CESARO_TOL).unwrap();
        for row in limit {
            assert_eq!(row, [1.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn cesaro_of_three_cycle() {
        // deterministic 3-cycle CC → CD → DC → CC with DD feeding in
        let m = TransitionMatrix([
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ]);
        let limit = cesaro_limit(&m, CESARO_TOL).unwrap();
        for row in limit {
            for (j, want) in [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0].into_iter().enumerate() {
                assert!((row[j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cesaro_cap_reports_residual() {
        let m = transition_matrix(&s([0.3, 0.6, 0.2, 0.9]), &s([0.5, 0.1, 0.7, 0.4]));
        match cesaro_limit_capped(&m, 0.0, 3) {
            Err(Error::Convergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual.is_finite());
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn cesaro_matches_stationary_for_interior_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let m = transition_matrix(&interior(&mut rng), &interior(&mut rng));
            let nu = stationary_set(&m).unique_distribution().unwrap();
            let limit = cesaro_limit(&m, CESARO_TOL).unwrap();
            for row in limit {
                for j in 0..4 {
                    assert!((row[j] - nu[j]).abs() < 1e-8);
                }
            }
            let again = linalg::mat_mul(&limit, &m.0);
            assert!(linalg::max_abs_diff(&again, &limit) < 1e-8);
        }
    }

    #[test]
    fn powers_stay_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let m = transition_matrix(&sample_arcsine_strategy(&mut rng), &sample_arcsine_strategy(&mut rng));
            for k in 1..=64 {
                for row in m.power(k) {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn average_payoff_examples() {
        let all_c = s([1.0; 4]);
        let pp = average_payoffs(&all_c, &all_c, &g([3.0, 0.0, 5.0, 1.0]), None);
        assert_eq!((pp.pi_y, pp.pi_x), (3.0, 3.0));

        let game = g([4.0, 0.0, 5.0, 3.0]);
        let p = s([1.0, 0.85, 0.15, 0.0]);
        let vs_defect = average_payoffs(&p, &s([0.0; 4]), &game, None);
        assert!((vs_defect.pi_y - 3.0).abs() < 1e-12 && (vs_defect.pi_x - 3.0).abs() < 1e-12);
        let vs_coop = average_payoffs(&p, &all_c, &game, None);
        assert!((vs_coop.pi_y - 4.0).abs() < 1e-12 && (vs_coop.pi_x - 4.0).abs() < 1e-12);

        let alt = s([0.0, 0.0, 1.0, 1.0]);
        let start = InitialDistribution::new([0.0, 1.0, 0.0, 0.0]).unwrap();
        let pp = average_payoffs(&alt, &alt, &g([2.0, -1.0, 7.0, 0.0]), Some(&start));
        assert!((pp.pi_y - 3.0).abs() < 1e-12 && (pp.pi_x - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_unique_payoffs_follow_initial_distribution() {
        let rep = s([1.0, 1.0, 0.0, 0.0]);
        let game = g([3.0, 0.0, 5.0, 1.0]);
        let start_cc = InitialDistribution::new([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(average_payoffs(&rep, &rep, &game, Some(&start_cc)).pi_y, 3.0);
        // default start: a quarter of the mass in each state
        let pp = average_payoffs(&rep, &rep, &game, None);
        let want_y = 0.25 * 3.0 + 0.25 * 1.0 + 0.5 * 2.5;
        assert!((pp.pi_y - want_y).abs() < 1e-12);
    }

    #[test]
    fn discounted_examples() {
        let all_c = s([1.0; 4]);
        let game = g([3.0, 0.0, 5.0, 1.0]);
        for lambda in [0.1, 0.5, 0.99] {
            let pp = discounted_payoffs(&all_c, &all_c, &game, &InitialDistribution::default(), lambda).unwrap();
            // starting outside CC costs (1−λ) of the first round only
            assert!(pp.pi_y <= 3.0 + 1e-12);
        }
        let start = InitialDistribution::new([1.0, 0.0, 0.0, 0.0]).unwrap();
        let pp = discounted_payoffs(&all_c, &all_c, &game, &start, 0.3).unwrap();
        assert!((pp.pi_y - 3.0).abs() < 1e-14 && (pp.pi_x - 3.0).abs() < 1e-14);

        let alt = s([0.0, 0.0, 1.0, 1.0]);
        let start = InitialDistribution::new([0.0, 1.0, 0.0, 0.0]).unwrap();
        let pp = discounted_payoffs(&alt, &alt, &g([4.0, 0.0, 5.0, 3.0]), &start, 0.9999).unwrap();
        assert!((pp.pi_y - 2.5).abs() < 1e-3 && (pp.pi_x - 2.5).abs() < 1e-3);

        assert!(discounted_payoffs(&alt, &alt, &game, &start, 1.0).is_err());
    }

    #[test]
    fn discounted_approaches_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let game = g([2.0, -1.0, 7.0, 0.0]);
        for _ in 0..100 {
            let (p, q) = (interior(&mut rng), interior(&mut rng));
            let avg = average_payoffs(&p, &q, &game, None);
            let nu0 = InitialDistribution::default();
            let d1 = discounted_payoffs(&p, &q, &game, &nu0, 0.9999).unwrap();
            assert!((d1.pi_y - avg.pi_y).abs() < 1e-3);
            // error shrinks like (1−λ)
            let d2 = discounted_payoffs(&p, &q, &game, &nu0, 0.999999).unwrap();
            let e1 = (d1.pi_y - avg.pi_y).abs();
            let e2 = (d2.pi_y - avg.pi_y).abs();
            assert!(e1 < 200.0 * 1e-4 && e2 < 200.0 * 1e-6, "{e1} {e2}");
        }
    }

    #[test]
    fn initial_distribution_validation() {
        assert!(InitialDistribution::new([0.5, 0.5, 0.0, 0.0]).is_ok());
        assert!(InitialDistribution::new([0.5, 0.6, 0.0, 0.0]).is_err());
        assert!(InitialDistribution::new([1.5, -0.5, 0.0, 0.0]).is_err());
        let nu = InitialDistribution::from_first_moves(0.2, 0.7).0;
        assert!((nu.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((nu[1] - 0.2 * 0.3).abs() < 1e-15);
    }
}
