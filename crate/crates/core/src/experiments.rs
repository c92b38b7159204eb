//! Batch studies over many learner runs: endpoint censuses, the sweep over
//! positively correlated ZD strategies, the LRS noise sweep and the
//! trembling-hand study, with CSV and JSON writers for their results.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{round_2dp_key, sample_arcsine_strategy, GameParams, MemoryOneStrategy, PayoffPair};
use crate::learn::{
    classify_endpoint, long_run_payoff, lrs_run, pga_run, EndpointClass, LearnerConfig, TerminationReason,
    Trajectory, ENDPOINT_TOL,
};
use crate::parallel::{map_with, task_rng, Execution};
use crate::region::feasible_region;
use crate::zd::{phi_max, zd_strategy, ZDParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    Pga,
    Lrs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub q0: [f64; 4],
    pub q_final: [f64; 4],
    pub payoff: PayoffPair,
    pub n_steps: u64,
    pub termination: TerminationReason,
    pub endpoint_form: EndpointClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointCluster {
    pub pi_y_2dp: f64,
    pub pi_x_2dp: f64,
    pub count: u64,
    pub frequency: f64,
    /// Endpoints of the first few runs in the cluster, by run id.
    pub representatives: Vec<[f64; 4]>,
    pub forms: BTreeMap<EndpointClass, u64>,
}

impl EndpointCluster {
    pub fn key(&self) -> (i64, i64) {
        (round_2dp_key(self.pi_y_2dp), round_2dp_key(self.pi_x_2dp))
    }
}

pub const MAX_REPRESENTATIVES: usize = 5;

/// Groups runs by their 2-d.p. payoff pair, highest π_Y first (ties by π_X).
pub fn cluster_runs(runs: &[RunRecord]) -> Vec<EndpointCluster> {
    let mut map: BTreeMap<(i64, i64), EndpointCluster> = BTreeMap::new();
    for r in runs {
        let key = r.payoff.key_2dp();
        let c = map.entry(key).or_insert_with(|| EndpointCluster {
            pi_y_2dp: key.0 as f64 / 100.0,
            pi_x_2dp: key.1 as f64 / 100.0,
            count: 0,
            frequency: 0.0,
            representatives: Vec::new(),
            forms: BTreeMap::new(),
        });
        c.count += 1;
        if c.representatives.len() < MAX_REPRESENTATIVES {
            c.representatives.push(r.q_final);
        }
        *c.forms.entry(r.endpoint_form).or_default() += 1;
    }
    let n = runs.len() as f64;
    let mut out: Vec<EndpointCluster> = map.into_values().rev().collect();
    for c in &mut out {
        c.frequency = c.count as f64 / n;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub runs: Vec<RunRecord>,
    pub clusters: Vec<EndpointCluster>,
}

impl Census {
    /// The cluster with the largest π_Y.
    pub fn best(&self) -> &EndpointCluster {
        &self.clusters[0]
    }

    pub fn suboptimal_frequency(&self) -> f64 {
        1.0 - self.best().frequency
    }

    pub fn max_iteration_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.termination == TerminationReason::MaxIterations).count()
    }

    pub fn cluster(&self, pi_y: f64, pi_x: f64) -> Option<&EndpointCluster> {
        let key = (round_2dp_key(pi_y), round_2dp_key(pi_x));
        self.clusters.iter().find(|c| c.key() == key)
    }
}

fn record(run_id: u64, q0: &MemoryOneStrategy, t: &Trajectory) -> RunRecord {
    RunRecord {
        run_id,
        q0: q0.probs(),
        q_final: t.endpoint.probs(),
        payoff: t.endpoint_payoff,
        n_steps: t.iterations,
        termination: t.termination,
        endpoint_form: classify_endpoint(&t.endpoint.probs(), ENDPOINT_TOL).class,
    }
}

/// One learner run from an arcsine-sampled start, reproducible from
/// `(seed, cell, run)` alone.
pub fn single_run(
    p: &MemoryOneStrategy,
    g: &GameParams,
    learner: Learner,
    cfg: &LearnerConfig,
    seed: u64,
    cell: u64,
    run: u64,
) -> Result<(MemoryOneStrategy, Trajectory)> {
    let mut rng = task_rng(seed, cell, run);
    let q0 = sample_arcsine_strategy(&mut rng);
    let t = match learner {
        Learner::Pga => pga_run(p, &q0, g, cfg)?,
        Learner::Lrs => lrs_run(p, &q0, g, cfg, &mut rng)?,
    };
    Ok((q0, t))
}

#[allow(clippy::too_many_arguments)]
pub fn census_cell(
    p: &MemoryOneStrategy,
    g: &GameParams,
    n_samples: usize,
    learner: Learner,
    cfg: &LearnerConfig,
    seed: u64,
    cell: u64,
    exec: Execution,
) -> Result<Census> {
    if n_samples == 0 {
        return Err(Error::validation("n_samples", "must be at least 1"));
    }
    cfg.validate()?;
    // only the endpoint is kept, so record as little of the path as possible
    let cfg = LearnerConfig { thinning: cfg.thinning.max(100), ..*cfg };
    let runs = map_with(exec, n_samples, |i| {
        let (q0, t) = single_run(p, g, learner, &cfg, seed, cell, i as u64).expect("config validated");
        record(i as u64, &q0, &t)
    });
    let clusters = cluster_runs(&runs);
    Ok(Census { runs, clusters })
}

/// Endpoint census of `n_samples` learner runs from arcsine-sampled starts.
pub fn endpoint_distribution(
    p: &MemoryOneStrategy,
    g: &GameParams,
    n_samples: usize,
    learner: Learner,
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<Census> {
    census_cell(p, g, n_samples, learner, cfg, seed, 0, Execution::Parallel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub chi: f64,
    pub phi: f64,
    pub p: Option<[f64; 4]>,
    /// Why the cell could not be run, if it was not.
    pub infeasible: Option<String>,
    pub n_clusters: usize,
    pub suboptimal_frequency: f64,
    pub global_optimum: Option<PayoffPair>,
    /// Rightmost point of the feasible region.
    pub region_optimum: Option<PayoffPair>,
    pub clusters: Vec<EndpointCluster>,
    pub max_iteration_runs: usize,
}

impl SweepCell {
    pub fn has_cluster(&self, pi_y: f64, pi_x: f64) -> bool {
        let key = (round_2dp_key(pi_y), round_2dp_key(pi_x));
        self.clusters.iter().any(|c| c.key() == key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub game: GameParams,
    pub kappa: f64,
    pub n_q0: usize,
    pub seed: u64,
    pub cells: Vec<SweepCell>,
    pub multi_endpoint_cells: usize,
    pub mean_suboptimal_frequency: f64,
    pub infeasible_cells: usize,
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

pub const PHI_FLOOR: f64 = 1e-4;
pub const PHI_CEILING_FRACTION: f64 = 0.99;

/// PGA censuses over positively correlated ZD strategies with κ = P, on a
/// grid of χ values and φ evenly spaced up to just below φ_max.
pub fn pczd_sweep(
    g: &GameParams,
    chi_values: &[f64],
    phi_count: usize,
    n_q0: usize,
    seed: u64,
    cfg: &LearnerConfig,
) -> Result<SweepReport> {
    let kappa = g.p;
    let mut cells = Vec::new();
    for &chi in chi_values {
        let phis = match phi_max(g, kappa, chi) {
            Ok(m) => Ok(linspace(PHI_FLOOR, PHI_CEILING_FRACTION * m.min(1.0 / PHI_CEILING_FRACTION), phi_count)),
            Err(e) => Err(e.to_string()),
        };
        for j in 0..phi_count {
            let cell_index = cells.len() as u64;
            let phi = phis.as_ref().map(|v| v[j]).unwrap_or(f64::NAN);
            let strategy = phis
                .clone()
                .and_then(|_| zd_strategy(g, &ZDParams { kappa, chi, phi }).map_err(|e| e.to_string()));
            let cell = match strategy {
                Err(reason) => SweepCell {
                    chi,
                    phi,
                    p: None,
                    infeasible: Some(reason),
                    n_clusters: 0,
                    suboptimal_frequency: 0.0,
                    global_optimum: None,
                    region_optimum: None,
                    clusters: vec![],
                    max_iteration_runs: 0,
                },
                Ok(p) => {
                    let census = census_cell(&p, g, n_q0, Learner::Pga, cfg, seed, cell_index, Execution::Parallel)?;
                    let best = census.best();
                    SweepCell {
                        chi,
                        phi,
                        p: Some(p.probs()),
                        infeasible: None,
                        n_clusters: census.clusters.len(),
                        suboptimal_frequency: census.suboptimal_frequency(),
                        global_optimum: Some(PayoffPair::new(best.pi_y_2dp, best.pi_x_2dp)),
                        region_optimum: Some(feasible_region(&p, g).rightmost),
                        max_iteration_runs: census.max_iteration_runs(),
                        clusters: census.clusters,
                    }
                }
            };
            cells.push(cell);
        }
    }
    let multi: Vec<&SweepCell> = cells.iter().filter(|c| c.n_clusters > 1).collect();
    let mean_suboptimal_frequency = if multi.is_empty() {
        0.0
    } else {
        multi.iter().map(|c| c.suboptimal_frequency).sum::<f64>() / multi.len() as f64
    };
    Ok(SweepReport {
        game: *g,
        kappa,
        n_q0,
        seed,
        multi_endpoint_cells: multi.len(),
        mean_suboptimal_frequency,
        infeasible_cells: cells.iter().filter(|c| c.infeasible.is_some()).count(),
        cells,
    })
}

/// Strategies from a sweep whose PGA census found more than one endpoint.
pub fn multi_endpoint_strategies(report: &SweepReport) -> Vec<MemoryOneStrategy> {
    report
        .cells
        .iter()
        .filter(|c| c.n_clusters > 1)
        .filter_map(|c| c.p.map(MemoryOneStrategy::from_unchecked))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub p: [f64; 4],
    /// ⟨π_Y⟩ over the starting strategies, one entry per ε.
    pub mean_payoffs: Vec<f64>,
    /// Sign of each change in ⟨π_Y⟩ between consecutive ε: −1, 0 or 1.
    pub increments: Vec<i8>,
    pub decreasing_increments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub game: GameParams,
    pub eps_values: Vec<f64>,
    pub n_q0: usize,
    pub seed: u64,
    pub rows: Vec<NoiseRow>,
    pub positive_fraction: f64,
    pub negative_fraction: f64,
    pub zero_fraction: f64,
    /// Fraction of strategies with one or two decreasing increments.
    pub one_or_two_decreases_fraction: f64,
    /// Fraction of strategies with three or more decreasing increments.
    pub three_plus_decreases_fraction: f64,
}

/// Changes in ⟨π_Y⟩ smaller than this count as no change.
pub const INCREMENT_TOL: f64 = 1e-9;

pub const NOISE_EPS_MIN: f64 = 1e-2;
pub const NOISE_EPS_MAX: f64 = 0.5;

pub fn default_noise_eps() -> Vec<f64> {
    linspace(NOISE_EPS_MIN, NOISE_EPS_MAX, 10)
}

/// LRS from the same starting strategies at each noise level, per p.
pub fn lrs_noise_sweep(
    p_set: &[MemoryOneStrategy],
    g: &GameParams,
    eps_values: &[f64],
    n_q0: usize,
    seed: u64,
    cfg: &LearnerConfig,
) -> Result<NoiseReport> {
    if n_q0 == 0 {
        return Err(Error::validation("n_q0", "must be at least 1"));
    }
    for &eps in eps_values {
        LearnerConfig { lrs_radius: eps, ..*cfg }.validate()?;
    }
    let n_eps = eps_values.len();
    // one flat task list so the pool stays busy across strategies
    let payoffs = map_with(Execution::Parallel, p_set.len() * n_eps * n_q0, |task| {
        let (pi, rest) = (task / (n_eps * n_q0), task % (n_eps * n_q0));
        let (ei, run) = (rest / n_q0, rest % n_q0);
        let cfg = LearnerConfig { lrs_radius: eps_values[ei], thinning: u64::MAX, ..*cfg };
        let (_, t) = single_run(&p_set[pi], g, Learner::Lrs, &cfg, seed, pi as u64, run as u64)
            .expect("config validated");
        t.endpoint_payoff.pi_y
    });
    let mut rows = Vec::new();
    let (mut pos, mut neg, mut zero) = (0usize, 0usize, 0usize);
    for (pi, p) in p_set.iter().enumerate() {
        let mean_payoffs: Vec<f64> = (0..n_eps)
            .map(|ei| {
                let start = (pi * n_eps + ei) * n_q0;
                payoffs[start..start + n_q0].iter().sum::<f64>() / n_q0 as f64
            })
            .collect();
        let increments: Vec<i8> = mean_payoffs
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                if d > INCREMENT_TOL {
                    1
                } else if d < -INCREMENT_TOL {
                    -1
                } else {
                    0
                }
            })
            .collect();
        pos += increments.iter().filter(|&&v| v > 0).count();
        neg += increments.iter().filter(|&&v| v < 0).count();
        zero += increments.iter().filter(|&&v| v == 0).count();
        let decreasing_increments = increments.iter().filter(|&&v| v < 0).count();
        rows.push(NoiseRow { p: p.probs(), mean_payoffs, increments, decreasing_increments });
    }
    let total = (pos + neg + zero).max(1) as f64;
    let n_p = rows.len().max(1) as f64;
    Ok(NoiseReport {
        game: *g,
        eps_values: eps_values.to_vec(),
        n_q0,
        seed,
        positive_fraction: pos as f64 / total,
        negative_fraction: neg as f64 / total,
        zero_fraction: zero as f64 / total,
        one_or_two_decreases_fraction: rows.iter().filter(|r| (1..=2).contains(&r.decreasing_increments)).count() as f64
            / n_p,
        three_plus_decreases_fraction: rows.iter().filter(|r| r.decreasing_increments >= 3).count() as f64 / n_p,
        rows,
    })
}

/// Runs within this distance of the global optimum's π_Y count as reaching it.
pub const GLOBAL_MATCH_TOL: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrembleStrategyRow {
    pub p: [f64; 4],
    pub global_optimum: PayoffPair,
    pub untrembled_clusters: usize,
    pub converged: usize,
    pub matched: usize,
    pub max_iteration_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrembleGameReport {
    pub game: GameParams,
    pub rows: Vec<TrembleStrategyRow>,
    pub runs: usize,
    pub converged: usize,
    pub matched: usize,
    pub max_iteration_runs: usize,
    /// matched / converged
    pub global_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrembleReport {
    pub error_rate: f64,
    pub n_p: usize,
    pub n_q0: usize,
    pub seed: u64,
    pub games: Vec<TrembleGameReport>,
}

/// PGA through a trembling hand against arcsine-sampled p. A run reaches
/// the global optimum when Y's intended endpoint, played without errors,
/// earns the largest π_Y available against p.
pub fn trembling_sweep(
    games: &[GameParams],
    n_p: usize,
    n_q0: usize,
    error_rate: f64,
    seed: u64,
    cfg: &LearnerConfig,
) -> Result<TrembleReport> {
    if !(error_rate > 0.0 && error_rate < 0.5) {
        return Err(Error::validation("error_rate", format!("{error_rate} is outside (0, 0.5)")));
    }
    let tremble = LearnerConfig { error_rate, thinning: u64::MAX, ..*cfg };
    let plain = LearnerConfig { error_rate: 0.0, ..tremble };
    tremble.validate()?;
    let mut out = Vec::new();
    for (gi, g) in games.iter().enumerate() {
        // strategies come from their own stream so n_q0 does not change them
        let mut p_rng = task_rng(seed, u64::MAX - gi as u64, 0);
        let ps: Vec<MemoryOneStrategy> = (0..n_p).map(|_| sample_arcsine_strategy(&mut p_rng)).collect();
        let mut rows = Vec::new();
        for (pi, p) in ps.iter().enumerate() {
            let cell = (gi * n_p + pi) as u64;
            let census = census_cell(p, g, n_q0, Learner::Pga, &plain, seed, cell, Execution::Parallel)?;
            let global_optimum = feasible_region(p, g).rightmost;
            let runs = map_with(Execution::Parallel, n_q0, |run| {
                let (_, t) = single_run(p, g, Learner::Pga, &tremble, seed, cell, run as u64).expect("validated");
                let intended = long_run_payoff(p, &t.endpoint, g);
                (t.termination, (intended.pi_y - global_optimum.pi_y).abs() < GLOBAL_MATCH_TOL)
            });
            let converged = runs.iter().filter(|r| r.0 == TerminationReason::Converged).count();
            rows.push(TrembleStrategyRow {
                p: p.probs(),
                global_optimum,
                untrembled_clusters: census.clusters.len(),
                converged,
                matched: runs.iter().filter(|r| r.0 == TerminationReason::Converged && r.1).count(),
                max_iteration_runs: runs.iter().filter(|r| r.0 == TerminationReason::MaxIterations).count(),
            });
        }
        let converged: usize = rows.iter().map(|r| r.converged).sum();
        let matched: usize = rows.iter().map(|r| r.matched).sum();
        out.push(TrembleGameReport {
            game: *g,
            runs: n_p * n_q0,
            converged,
            matched,
            max_iteration_runs: rows.iter().map(|r| r.max_iteration_runs).sum(),
            global_fraction: if converged == 0 { 0.0 } else { matched as f64 / converged as f64 },
            rows,
        });
    }
    Ok(TrembleReport { error_rate, n_p, n_q0, seed, games: out })
}

/// Number of recorded iterations whose payoff pair lies within `radius`
/// (max-norm) of `target`. Assumes an unthinned trajectory.
pub fn dwell_iterations(t: &Trajectory, target: &PayoffPair, radius: f64) -> usize {
    t.records
        .iter()
        .filter(|r| (r.pi_y - target.pi_y).abs() <= radius && (r.pi_x - target.pi_x).abs() <= radius)
        .count()
}

/// Radius, in payoff units, of the neighbourhood used to measure dwell time.
pub const DWELL_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrembleControl {
    pub run: u64,
    pub q0: [f64; 4],
    pub plain_endpoint: [f64; 4],
    pub plain_payoff: PayoffPair,
    pub plain_termination: TerminationReason,
    pub trembling_endpoint: [f64; 4],
    /// Payoff of the trembling run's intended endpoint played without errors.
    pub trembling_payoff: PayoffPair,
    pub trembling_termination: TerminationReason,
    pub trembling_iterations: u64,
    /// Iterations the trembling run spent near the suboptimal endpoint.
    pub dwell_iterations: usize,
}

/// Searches arcsine starts drawn from `seed` for one whose error-free run
/// ends at `suboptimal` while the trembling run from the same start ends
/// at `optimal`. Both targets are compared at 2 d.p.
#[allow(clippy::too_many_arguments)]
pub fn find_tremble_control(
    p: &MemoryOneStrategy,
    g: &GameParams,
    suboptimal: PayoffPair,
    optimal: PayoffPair,
    error_rate: f64,
    seed: u64,
    max_tries: u64,
    cfg: &LearnerConfig,
) -> Result<Option<TrembleControl>> {
    let plain = LearnerConfig { error_rate: 0.0, thinning: u64::MAX, ..*cfg };
    let tremble = LearnerConfig { error_rate, thinning: 1, ..*cfg };
    tremble.validate()?;
    for run in 0..max_tries {
        let (q0, t) = single_run(p, g, Learner::Pga, &plain, seed, 0, run)?;
        if t.endpoint_payoff.key_2dp() != suboptimal.key_2dp() {
            continue;
        }
        let tt = pga_run(p, &q0, g, &tremble)?;
        let intended = long_run_payoff(p, &tt.endpoint, g);
        if intended.key_2dp() != optimal.key_2dp() {
            continue;
        }
        return Ok(Some(TrembleControl {
            run,
            q0: q0.probs(),
            plain_endpoint: t.endpoint.probs(),
            plain_payoff: t.endpoint_payoff,
            plain_termination: t.termination,
            trembling_endpoint: tt.endpoint.probs(),
            trembling_payoff: intended,
            trembling_termination: tt.termination,
            trembling_iterations: tt.iterations,
            dwell_iterations: dwell_iterations(&tt, &suboptimal, DWELL_RADIUS),
        }));
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub bins: usize,
    /// Bounds of the π_Y axis (columns).
    pub y_range: (f64, f64),
    /// Bounds of the π_X axis (rows).
    pub x_range: (f64, f64),
    /// `counts[row][col]`, row indexing π_X and col indexing π_Y.
    pub counts: Vec<Vec<u64>>,
}

impl HeatmapGrid {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn nonzero_bins(&self) -> usize {
        self.counts.iter().flatten().filter(|&&c| c > 0).count()
    }
}

fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let i = ((v - lo) / (hi - lo) * bins as f64).floor();
    (i.max(0.0) as usize).min(bins - 1)
}

/// Counts of endpoint payoffs on a `bins`×`bins` grid over the game's
/// payoff box.
pub fn heatmap_grid(points: &[PayoffPair], g: &GameParams, bins: usize) -> Result<HeatmapGrid> {
    if bins < 1 {
        return Err(Error::validation("bins", "must be at least 1"));
    }
    let (lo, hi) = (g.min_payoff(), g.max_payoff());
    let mut counts = vec![vec![0u64; bins]; bins];
    for pt in points {
        counts[bin_index(pt.pi_x, lo, hi, bins)][bin_index(pt.pi_y, lo, hi, bins)] += 1;
    }
    Ok(HeatmapGrid { bins, y_range: (lo, hi), x_range: (lo, hi), counts })
}

/// Cluster centres weighted by their counts, for gridding a census.
pub fn cluster_points(clusters: &[EndpointCluster]) -> Vec<PayoffPair> {
    clusters
        .iter()
        .flat_map(|c| std::iter::repeat_n(PayoffPair::new(c.pi_y_2dp, c.pi_x_2dp), c.count as usize))
        .collect()
}

#[derive(Serialize)]
struct RunRow {
    run_id: u64,
    q0_cc: f64,
    q0_cd: f64,
    q0_dc: f64,
    q0_dd: f64,
    qf_cc: f64,
    qf_cd: f64,
    qf_dc: f64,
    qf_dd: f64,
    pi_y: f64,
    pi_x: f64,
    pi_y_2dp: f64,
    pi_x_2dp: f64,
    n_steps: u64,
    termination: &'static str,
    endpoint_form: &'static str,
}

#[derive(Serialize)]
struct ClusterRow {
    pi_y_2dp: f64,
    pi_x_2dp: f64,
    count: u64,
    frequency: f64,
}

fn comment_line<W: Write>(w: &mut W, comment: &str) -> Result<()> {
    for line in comment.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Runs table, preceded by `#`-prefixed lines holding `comment`.
pub fn write_runs_csv<W: Write>(mut w: W, comment: &str, runs: &[RunRecord]) -> Result<()> {
    comment_line(&mut w, comment)?;
    let mut csv = csv::Writer::from_writer(w);
    for r in runs {
        let rounded = r.payoff.rounded_2dp();
        csv.serialize(RunRow {
            run_id: r.run_id,
            q0_cc: r.q0[0],
            q0_cd: r.q0[1],
            q0_dc: r.q0[2],
            q0_dd: r.q0[3],
            qf_cc: r.q_final[0],
            qf_cd: r.q_final[1],
            qf_dc: r.q_final[2],
            qf_dd: r.q_final[3],
            pi_y: r.payoff.pi_y,
            pi_x: r.payoff.pi_x,
            pi_y_2dp: rounded.pi_y,
            pi_x_2dp: rounded.pi_x,
            n_steps: r.n_steps,
            termination: r.termination.as_str(),
            endpoint_form: r.endpoint_form.as_str(),
        })?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_clusters_csv<W: Write>(mut w: W, comment: &str, clusters: &[EndpointCluster]) -> Result<()> {
    comment_line(&mut w, comment)?;
    let mut csv = csv::Writer::from_writer(w);
    for c in clusters {
        csv.serialize(ClusterRow { pi_y_2dp: c.pi_y_2dp, pi_x_2dp: c.pi_x_2dp, count: c.count, frequency: c.frequency })?;
    }
    csv.flush()?;
    Ok(())
}

/// Trajectory table with columns iter, q_cc, q_cd, q_dc, q_dd, pi_y, pi_x,
/// grad_norm.
pub fn write_trajectory_csv<W: Write>(mut w: W, comment: &str, t: &Trajectory) -> Result<()> {
    comment_line(&mut w, comment)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["iter", "q_cc", "q_cd", "q_dc", "q_dd", "pi_y", "pi_x", "grad_norm"])?;
    for r in &t.records {
        csv.write_record(
            std::iter::once(r.iteration.to_string())
                .chain(r.q.iter().map(|v| v.to_string()))
                .chain([r.pi_y, r.pi_x, r.grad_norm].iter().map(|v| v.to_string())),
        )?;
    }
    csv.flush()?;
    Ok(())
}

/// JSON view of a census: the runs and clusters tables plus whatever
/// configuration the caller wants echoed.
#[derive(Debug, Clone, Serialize)]
pub struct CensusReport<'a, C: Serialize> {
    pub config: &'a C,
    pub seed: u64,
    pub runs: &'a [RunRecord],
    pub clusters: &'a [EndpointCluster],
}
