//! Weighted K-means placement of UAVs and the user-to-UAV connection matrix.
//!
//! Users are processed in a canonical order (sorted by position, then weight)
//! so that the result depends on where users are rather than on how they are
//! numbered. Outputs are mapped back to the caller's indices.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linkmodel::gu_uav_distance;
use crate::scenario::{Scenario, TaskSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkdConfig {
    /// Weight of the data size term.
    pub data_weight: f64,
    /// Weight of the cycles-per-bit term.
    pub cycles_weight: f64,
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid shift, meters.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub normalize_weights: bool,
}

impl Default for WkdConfig {
    fn default() -> Self {
        Self {
            data_weight: 0.4,
            cycles_weight: 0.2,
            max_iters: 100,
            tol: 1e-3,
            restarts: 4,
            seed: 0,
            normalize_weights: true,
        }
    }
}

impl WkdConfig {
    fn check(&self) -> Result<()> {
        let (a, b) = (self.data_weight, self.cycles_weight);
        if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0) {
            return Err(Error::Config(format!(
                "task weights must be non-negative with sum <= 1, got {a} and {b}"
            )));
        }
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::Config("max_iters and restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    /// Horizontal UAV positions, meters.
    pub positions: Vec<[f64; 2]>,
    /// `connection[m][n]` is true iff user `m` is served by UAV `n`.
    pub connection: Vec<Vec<bool>>,
    pub clusters: Vec<Vec<usize>>,
    /// Importance weight of each user's task.
    pub weights: Vec<f64>,
    /// `sum_m w_m * d_{m,n(m)}^2` at the final positions.
    pub weighted_cost: f64,
    pub iterations: usize,
    /// Weighted cost after every centroid update.
    pub cost_trace: Vec<f64>,
}

impl Deployment {
    /// Builds a deployment from explicit positions and a user-to-UAV map.
    pub fn from_assignment(positions: Vec<[f64; 2]>, assignment: &[usize], num_uavs: usize) -> Self {
        let mut connection = vec![vec![false; num_uavs]; assignment.len()];
        let mut clusters = vec![Vec::new(); num_uavs];
        for (m, &n) in assignment.iter().enumerate() {
            connection[m][n] = true;
            clusters[n].push(m);
        }
        Self {
            positions,
            connection,
            clusters,
            weights: vec![1.0; assignment.len()],
            weighted_cost: 0.0,
            iterations: 0,
            cost_trace: Vec::new(),
        }
    }

    pub fn num_uavs(&self) -> usize {
        self.positions.len()
    }

    /// The UAV serving user `m`, if the row has exactly one connection.
    pub fn serving_uav(&self, m: usize) -> Option<usize> {
        let row = self.connection.get(m)?;
        let mut hits = row.iter().enumerate().filter(|(_, &c)| c).map(|(n, _)| n);
        match (hits.next(), hits.next()) {
            (Some(n), None) => Some(n),
            _ => None,
        }
    }

    /// Every row has exactly one connection.
    pub fn is_valid(&self) -> bool {
        (0..self.connection.len()).all(|m| self.serving_uav(m).is_some())
    }
}

/// Per-scenario extremes used to scale each weight term onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationStats {
    pub data_bits: (f64, f64),
    pub cycles_per_bit: (f64, f64),
    pub inv_deadline: (f64, f64),
}

impl NormalizationStats {
    pub fn from_tasks(tasks: &[TaskSpec]) -> Self {
        let span = |f: &dyn Fn(&TaskSpec) -> f64| {
            tasks.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
        };
        Self {
            data_bits: span(&|t| t.data_bits),
            cycles_per_bit: span(&|t| t.cycles_per_bit),
            inv_deadline: span(&|t| 1.0 / t.deadline),
        }
    }
}

fn min_max(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        1.0
    }
}

/// Task importance `s1 * L + s2 * c + (1 - s1 - s2) / T` on min-max scaled terms.
/// A term that is constant over the population scales to 1.
pub fn task_weight(task: &TaskSpec, norm: &NormalizationStats, data_weight: f64, cycles_weight: f64) -> f64 {
    let rest = 1.0 - data_weight - cycles_weight;
    data_weight * min_max(task.data_bits, norm.data_bits)
        + cycles_weight * min_max(task.cycles_per_bit, norm.cycles_per_bit)
        + rest * min_max(1.0 / task.deadline, norm.inv_deadline)
}

/// Weight with raw (unscaled) units, as the formula is literally written.
pub fn raw_task_weight(task: &TaskSpec, data_weight: f64, cycles_weight: f64) -> f64 {
    data_weight * task.data_bits
        + cycles_weight * task.cycles_per_bit
        + (1.0 - data_weight - cycles_weight) / task.deadline
}

pub fn task_weights(scenario: &Scenario, config: &WkdConfig) -> Vec<f64> {
    if config.normalize_weights {
        let norm = NormalizationStats::from_tasks(&scenario.tasks);
        scenario
            .tasks
            .iter()
            .map(|t| task_weight(t, &norm, config.data_weight, config.cycles_weight))
            .collect()
    } else {
        scenario
            .tasks
            .iter()
            .map(|t| raw_task_weight(t, config.data_weight, config.cycles_weight))
            .collect()
    }
}

/// Indices that sort users by (x, y, weight).
pub fn canonical_order(points: &[[f64; 2]], weights: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
            .then(weights[a].total_cmp(&weights[b]))
    });
    idx
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn pick_weighted(rng: &mut ChaCha8Rng, mass: &[f64]) -> usize {
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return rng.random_range(0..mass.len());
    }
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in mass.iter().enumerate() {
        if w > 0.0 {
            if target < w {
                return i;
            }
            target -= w;
        }
    }
    mass.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// k-means++ style seeding: the first center is drawn proportionally to the
/// weights, each further one proportionally to weight times squared distance
/// to the nearest chosen center.
pub fn seed_centers(points: &[[f64; 2]], weights: &[f64], count: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centers = Vec::with_capacity(count);
    if points.is_empty() {
        return centers;
    }
    centers.push(points[pick_weighted(rng, weights)]);
    let mut nearest: Vec<f64> = points.iter().map(|&p| sq_dist(p, centers[0])).collect();
    while centers.len() < count {
        let mass: Vec<f64> = nearest.iter().zip(weights).map(|(d, w)| d * w).collect();
        let c = points[pick_weighted(rng, &mass)];
        for (d, &p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
        centers.push(c);
    }
    centers
}

struct Run {
    centers: Vec<[f64; 2]>,
    assignment: Vec<usize>,
    cost: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn nearest_center(p: [f64; 2], centers: &[[f64; 2]], altitudes: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (n, (&c, &z)) in centers.iter().zip(altitudes).enumerate() {
        let d = gu_uav_distance(p, c, z);
        if d < best_d {
            best_d = d;
            best = n;
        }
    }
    best
}

fn weighted_cost(points: &[[f64; 2]], weights: &[f64], centers: &[[f64; 2]], altitudes: &[f64], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(weights)
        .zip(assignment)
        .map(|((&p, &w), &n)| {
            let d = gu_uav_distance(p, centers[n], altitudes[n]);
            w * d * d
        })
        .sum()
}

fn lloyd(
    points: &[[f64; 2]],
    weights: &[f64],
    altitudes: &[f64],
    scenario: &Scenario,
    config: &WkdConfig,
    rng: &mut ChaCha8Rng,
) -> Run {
    let n = altitudes.len();
    let mut centers = seed_centers(points, weights, n, rng);
    let mut assignment: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        let mut next: Vec<usize> = points.iter().map(|&p| nearest_center(p, &centers, altitudes)).collect();
        repair_empty(points, weights, &centers, &mut next, n);
        if next == assignment {
            break;
        }
        assignment = next;

        let mut shift: f64 = 0.0;
        for (k, center) in centers.iter_mut().enumerate() {
            let Some(c) = weighted_centroid(points, weights, &assignment, k) else {
                continue;
            };
            let c = scenario.bounds.clamp(c);
            shift = shift.max(sq_dist(c, *center).sqrt());
            *center = c;
        }
        trace.push(weighted_cost(points, weights, &centers, altitudes, &assignment));
        if shift < config.tol {
            break;
        }
    }
    let cost = weighted_cost(points, weights, &centers, altitudes, &assignment);
    Run {
        centers,
        assignment,
        cost,
        iterations,
        trace,
    }
}

fn weighted_centroid(points: &[[f64; 2]], weights: &[f64], assignment: &[usize], k: usize) -> Option<[f64; 2]> {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    let (mut ux, mut uy, mut count) = (0.0, 0.0, 0usize);
    for ((p, &w), &a) in points.iter().zip(weights).zip(assignment) {
        if a == k {
            sx += w * p[0];
            sy += w * p[1];
            sw += w;
            ux += p[0];
            uy += p[1];
            count += 1;
        }
    }
    if count == 0 {
        None
    } else if sw > 0.0 {
        Some([sx / sw, sy / sw])
    } else {
        // all members carry zero weight
        Some([ux / count as f64, uy / count as f64])
    }
}

/// Gives each empty cluster the user with the largest weighted distance to its
/// current center, taken from a cluster that can spare one.
fn repair_empty(points: &[[f64; 2]], weights: &[f64], centers: &[[f64; 2]], assignment: &mut [usize], n: usize) {
    let mut sizes = vec![0usize; n];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    let mut moved = vec![false; points.len()];
    for k in 0..n {
        if sizes[k] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&m| !moved[m] && sizes[assignment[m]] > 1)
            .map(|m| (m, weights[m] * sq_dist(points[m], centers[assignment[m]]).sqrt()))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((m, _)) = donor {
            sizes[assignment[m]] -= 1;
            assignment[m] = k;
            sizes[k] += 1;
            moved[m] = true;
        }
    }
}

/// Places the scenario's UAVs at weighted cluster centers and connects every
/// user to its nearest UAV. The best of `config.restarts` seeded runs wins.
pub fn wkd_deploy(scenario: &Scenario, config: &WkdConfig) -> Result<Deployment> {
    config.check()?;
    let weights = task_weights(scenario, config);
    deploy_with_weights(scenario, &weights, config)
}

/// Same as [`wkd_deploy`] with caller-supplied user weights.
pub fn deploy_with_weights(scenario: &Scenario, weights: &[f64], config: &WkdConfig) -> Result<Deployment> {
    config.check()?;
    let m = scenario.num_users();
    let n = scenario.num_uavs();
    if n == 0 {
        return Err(Error::Config("no UAVs to deploy".into()));
    }
    if m == 0 {
        return Err(Error::Config("no users to serve".into()));
    }
    if weights.len() != m {
        return Err(Error::Contract("one weight per user required".into()));
    }
    if n > m {
        log::warn!("deploying {n} UAVs for only {m} users; some clusters will stay empty");
    }
    let raw: Vec<[f64; 2]> = scenario.users.iter().map(|u| u.position).collect();
    let order = canonical_order(&raw, weights);
    let points: Vec<[f64; 2]> = order.iter().map(|&i| raw[i]).collect();
    let w: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    let altitudes: Vec<f64> = scenario.uavs.iter().map(|u| u.altitude).collect();

    let mut best: Option<Run> = None;
    for r in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(r as u64);
        let run = lloyd(&points, &w, &altitudes, scenario, config, &mut rng);
        let better = match &best {
            None => true,
            Some(b) => run.cost.partial_cmp(&b.cost) == Some(Ordering::Less),
        };
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");

    let mut assignment = vec![0usize; m];
    for (k, &orig) in order.iter().enumerate() {
        assignment[orig] = run.assignment[k];
    }
    let mut dep = Deployment::from_assignment(run.centers, &assignment, n);
    dep.weights = weights.to_vec();
    dep.weighted_cost = run.cost;
    dep.iterations = run.iterations;
    dep.cost_trace = run.trace;
    Ok(dep)
}
