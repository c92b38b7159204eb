//! The set of payoff pairs Y can reach against a fixed p, as the convex
//! hull of the payoffs of deterministic co-player strategies.

use serde::{Deserialize, Serialize};

use crate::game::{GameParams, MemoryOneStrategy, PayoffPair};
use crate::markov::{payoffs_from_distribution, stationary_set, transition_matrix};

/// Payoff of one closed class of the chain for one deterministic q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub q: [f64; 4],
    pub class_states: Vec<usize>,
    pub payoff: PayoffPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionShape {
    Polygon,
    Segment,
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub candidates: Vec<Candidate>,
    /// Counterclockwise, in (π_Y, π_X) coordinates.
    pub hull: Vec<PayoffPair>,
    pub rightmost: PayoffPair,
    pub shape: RegionShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedStrategyClass {
    Exploitable,
    Exploiting,
    Fair,
}

impl FixedStrategyClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            FixedStrategyClass::Exploitable => "exploitable",
            FixedStrategyClass::Exploiting => "exploiting",
            FixedStrategyClass::Fair => "fair",
        }
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; collinear points within `tol` are dropped.
pub fn convex_hull(points: &[(f64, f64)], tol: f64) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &pt in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], pt) <= tol {
            lower.pop();
        }
        lower.push(pt);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &pt in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], pt) <= tol {
            upper.pop();
        }
        upper.push(pt);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn feasible_region(p: &MemoryOneStrategy, g: &GameParams) -> FeasibleRegion {
    let mut candidates = Vec::new();
    for mask in 0..16usize {
        let q = std::array::from_fn(|k| if mask & (8 >> k) != 0 { 1.0 } else { 0.0 });
        let m = transition_matrix(p, &MemoryOneStrategy::from_unchecked(q));
        for class in stationary_set(&m).classes {
            candidates.push(Candidate {
                q,
                class_states: class.states,
                payoff: payoffs_from_distribution(&class.distribution, g),
            });
        }
    }

    let scale = (g.max_payoff() - g.min_payoff()).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale * scale;
    let pts: Vec<(f64, f64)> = candidates.iter().map(|c| (c.payoff.pi_y, c.payoff.pi_x)).collect();
    let mut hull = convex_hull(&pts, tol);

    // A long thin hull is a segment smeared by rounding.
    let shape = match hull.len() {
        0 | 1 => RegionShape::Point,
        2 => RegionShape::Segment,
        _ => {
            let (a, b) = farthest_pair(&hull);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            let width = hull.iter().map(|&c| cross(a, b, c).abs() / len).fold(0.0, f64::max);
            if width < 1e-9 * scale {
                hull = vec![a, b];
                hull.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
                RegionShape::Segment
            } else {
                RegionShape::Polygon
            }
        }
    };

    let mut rightmost = candidates[0].payoff;
    for c in &candidates[1..] {
        let dy = c.payoff.pi_y - rightmost.pi_y;
        if dy > 1e-12 || (dy.abs() <= 1e-12 && c.payoff.pi_x > rightmost.pi_x) {
            rightmost = c.payoff;
        }
    }
    FeasibleRegion {
        candidates,
        hull: hull.into_iter().map(|(y, x)| PayoffPair::new(y, x)).collect(),
        rightmost,
        shape,
    }
}

fn farthest_pair(pts: &[(f64, f64)]) -> ((f64, f64), (f64, f64)) {
    let mut best = (pts[0], pts[0], -1.0);
    for (i, &a) in pts.iter().enumerate() {
        for &b in &pts[i + 1..] {
            let d = (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
            if d > best.2 {
                best = (a, b, d);
            }
        }
    }
    (best.0, best.1)
}

impl FeasibleRegion {
    /// Distance-tolerant membership test in (π_Y, π_X) coordinates.
    pub fn contains(&self, pt: &PayoffPair, tol: f64) -> bool {
        let x = (pt.pi_y, pt.pi_x);
        let h: Vec<(f64, f64)> = self.hull.iter().map(|v| (v.pi_y, v.pi_x)).collect();
        match h.len() {
            0 => false,
            1 => dist(x, h[0]) <= tol,
            2 => segment_distance(x, h[0], h[1]) <= tol,
            n => {
                let inside = (0..n).all(|i| cross(h[i], h[(i + 1) % n], x) >= 0.0);
                inside || (0..n).any(|i| segment_distance(x, h[i], h[(i + 1) % n]) <= tol)
            }
        }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn segment_distance(x: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(x, a);
    }
    let t = (((x.0 - a.0) * dx + (x.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    dist(x, (a.0 + t * dx, a.1 + t * dy))
}

pub fn classify_fixed_strategy(p: &MemoryOneStrategy, g: &GameParams) -> FixedStrategyClass {
    let r = feasible_region(p, g).rightmost;
    let d = r.pi_x - r.pi_y;
    if d.abs() < 1e-9 {
        FixedStrategyClass::Fair
    } else if d > 0.0 {
        FixedStrategyClass::Exploiting
    } else {
        FixedStrategyClass::Exploitable
    }
}
