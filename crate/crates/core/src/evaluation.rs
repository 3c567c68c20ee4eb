//! Monte Carlo certification of solved plans, parameter sweeps and method
//! comparisons, with CSV emission.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::linkmodel::{cost_ledger, task_channel};
use crate::orchestrator::{solve, Method, SolveParams, SolveReport};
use crate::scenario::{generate_scenario, GenConfig, Scenario};
use crate::{Error, Result};

const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    Gaussian,
    Uniform,
    TwoPoint,
}

impl FromStr for DistKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(DistKind::Gaussian),
            "uniform" => Ok(DistKind::Uniform),
            "two-point" => Ok(DistKind::TwoPoint),
            _ => Err(Error::Config(format!("unknown distribution '{s}'"))),
        }
    }
}

/// A channel-error law matched to each task's mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub kind: DistKind,
    /// Probability of the lower atom of the two-point law.
    pub low_prob: f64,
}

impl ErrorDistribution {
    pub fn new(kind: DistKind) -> Self {
        Self { kind, low_prob: 0.5 }
    }

    pub fn with_low_prob(kind: DistKind, low_prob: f64) -> Result<Self> {
        if !(low_prob > 0.0 && low_prob < 1.0) {
            return Err(Error::Config(format!("low_prob must lie in (0, 1), got {low_prob}")));
        }
        Ok(Self { kind, low_prob })
    }

    /// One unclamped draw with mean `mu` and deviation `sigma`.
    pub fn sample<R: Rng>(&self, mu: f64, sigma: f64, rng: &mut R) -> f64 {
        match self.kind {
            DistKind::Gaussian => mu + sigma * rng.sample::<f64, _>(StandardNormal),
            DistKind::Uniform => mu + sigma * 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            DistKind::TwoPoint => {
                let p = self.low_prob;
                if rng.random::<f64>() < p {
                    mu - sigma * ((1.0 - p) / p).sqrt()
                } else {
                    mu + sigma * (p / (1.0 - p)).sqrt()
                }
            }
        }
    }

    /// A draw of `mean_gain + error` that is strictly positive. Non-positive
    /// gains are redrawn; the second value counts the redraws.
    pub fn sample_gain<R: Rng>(&self, mean_gain: f64, mu: f64, sigma: f64, rng: &mut R) -> (f64, usize) {
        for tries in 0..MAX_RESAMPLES {
            let g = mean_gain + self.sample(mu, sigma, rng);
            if g > 0.0 {
                return (g, tries);
            }
        }
        (f64::MIN_POSITIVE, MAX_RESAMPLES)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRobustness {
    pub task: usize,
    pub served: bool,
    pub alpha: f64,
    pub successes: usize,
    pub success_rate: f64,
    /// `alpha - 3 * sqrt(alpha * (1 - alpha) / S)`.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub distribution: ErrorDistribution,
    pub samples: usize,
    pub seed: u64,
    pub clamp_rate: f64,
    pub tasks: Vec<TaskRobustness>,
    /// Every served task passes.
    pub all_pass: bool,
}

/// Samples channel realizations and counts how often each task's exact
/// end-to-end delay meets its deadline under the report's plan.
pub fn monte_carlo_robustness(
    report: &SolveReport,
    scenario: &Scenario,
    dist: &ErrorDistribution,
    samples: usize,
    seed: u64,
) -> Result<RobustnessReport> {
    if samples == 0 {
        return Err(Error::Config("at least one sample is required".into()));
    }
    if !report.feasible {
        log::warn!("certifying an infeasible plan; only served tasks are judged");
    }
    let m = scenario.num_users();
    let per_task = (0..m)
        .into_par_iter()
        .map(|i| {
            let channel = task_channel(i, &report.deployment, scenario)?;
            let moments = &scenario.uncertainty[i];
            let mu = moments.mean;
            let sigma = moments.resolve_stdev(channel.mean_gain);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let deadline = scenario.tasks[i].deadline;
            let mut ok = 0;
            let mut redraws = 0;
            for _ in 0..samples {
                let (g, r) = dist.sample_gain(channel.mean_gain, mu, sigma, &mut rng);
                redraws += r;
                let l = cost_ledger(i, &report.deployment, &report.lambda[i], report.frequencies[i], scenario, Some(g))?;
                if l.t_total <= deadline {
                    ok += 1;
                }
            }
            Ok((ok, redraws))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut redraws = 0;
    let tasks: Vec<TaskRobustness> = per_task
        .iter()
        .enumerate()
        .map(|(i, &(ok, r))| {
            redraws += r;
            let alpha = scenario.tasks[i].confidence;
            let rate = ok as f64 / samples as f64;
            let threshold = alpha - 3.0 * (alpha * (1.0 - alpha) / samples as f64).sqrt();
            TaskRobustness {
                task: i,
                served: report.served[i],
                alpha,
                successes: ok,
                success_rate: rate,
                threshold,
                pass: rate >= threshold,
            }
        })
        .collect();
    Ok(RobustnessReport {
        distribution: *dist,
        samples,
        seed,
        clamp_rate: redraws as f64 / (redraws + samples * m) as f64,
        all_pass: tasks.iter().filter(|t| t.served).all(|t| t.pass),
        tasks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Tmax,
    Pu,
    Ph,
    M,
    N,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Tmax => "tmax",
            SweepParam::Pu => "p_u",
            SweepParam::Ph => "p_h",
            SweepParam::M => "M",
            SweepParam::N => "N",
        }
    }

    /// File stem of the plot-data table for this sweep.
    pub fn figure_name(self) -> &'static str {
        match self {
            SweepParam::Tmax => "fig7_tmax_sweep",
            SweepParam::Pu => "fig8_pu_sweep",
            SweepParam::Ph => "fig9_ph_sweep",
            SweepParam::M => "fig5_m_sweep",
            SweepParam::N => "fig5_n_sweep",
        }
    }

    fn is_count(self) -> bool {
        matches!(self, SweepParam::M | SweepParam::N)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tmax" => Ok(SweepParam::Tmax),
            "p_u" | "pu" => Ok(SweepParam::Pu),
            "p_h" | "ph" => Ok(SweepParam::Ph),
            "M" | "m" => Ok(SweepParam::M),
            "N" | "n" => Ok(SweepParam::N),
            _ => Err(Error::Config(format!("unknown sweep parameter '{s}'"))),
        }
    }
}

/// Where sweep and comparison instances come from.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    /// A fresh instance per seed.
    Generated { users: usize, uavs: usize, config: GenConfig },
    /// One instance for every seed; only the solver seed varies.
    Fixed(Scenario),
}

impl InstanceSource {
    pub fn instance(&self, seed: u64) -> Result<Scenario> {
        match self {
            InstanceSource::Generated { users, uavs, config } => generate_scenario(*users, *uavs, seed, config),
            InstanceSource::Fixed(s) => Ok(s.clone()),
        }
    }

    fn instance_at(&self, param: SweepParam, value: f64, seed: u64) -> Result<Scenario> {
        let mut s = match (self, param) {
            (InstanceSource::Generated { uavs, config, .. }, SweepParam::M) => {
                generate_scenario(value as usize, *uavs, seed, config)?
            }
            (InstanceSource::Generated { users, config, .. }, SweepParam::N) => {
                generate_scenario(*users, value as usize, seed, config)?
            }
            (InstanceSource::Fixed(_), SweepParam::M | SweepParam::N) => {
                return Err(Error::Config(format!("sweeping {param} needs generated instances")));
            }
            _ => self.instance(seed)?,
        };
        match param {
            SweepParam::Tmax => s.tasks.iter_mut().for_each(|t| t.deadline = value),
            SweepParam::Pu => s.radio.gu_tx_power = value,
            SweepParam::Ph => s.uavs.iter_mut().for_each(|u| u.tx_power_to_hap = value),
            SweepParam::M | SweepParam::N => {}
        }
        Ok(s)
    }
}

/// Inclusive arithmetic grid `from, from + step, ...` up to `to`.
pub fn linear_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(to >= from) || !from.is_finite() || !to.is_finite() {
        return Err(Error::Config(format!("bad grid {from}..{to} step {step}")));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| from + k as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// Linear-interpolation quantiles of a non-empty sample.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Self {
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub value: f64,
    pub seed: u64,
    pub objective: f64,
    pub feasible: bool,
    pub served_count: usize,
    pub mean_frequency: f64,
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub runs: usize,
    pub feasible_rate: f64,
    pub objective_q1: f64,
    pub objective_median: f64,
    pub objective_q3: f64,
    pub served_q1: f64,
    pub served_median: f64,
    pub served_q3: f64,
    pub frequency_q1: f64,
    pub frequency_median: f64,
    pub frequency_q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: SweepParam,
    pub grid: Vec<f64>,
    pub repeats: usize,
    pub method: Method,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<SweepRun>,
}

/// Solves every (grid point, seed) pair independently. Seeds are
/// `base_seed, base_seed + 1, ...`; the same seed draws the same instance at
/// every grid point.
pub fn sweep(
    source: &InstanceSource,
    param: SweepParam,
    grid: &[f64],
    repeats: usize,
    params: &SolveParams,
) -> Result<SweepResult> {
    if repeats == 0 {
        return Err(Error::Config("at least one repeat is required".into()));
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("sweep grid must be non-empty and strictly increasing".into()));
    }
    if param.is_count() && grid.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
        return Err(Error::Config(format!("{param} grid must hold positive integers")));
    }
    let jobs: Vec<(f64, u64)> = grid
        .iter()
        .flat_map(|&v| (0..repeats as u64).map(move |r| (v, params.seed + r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(value, seed)| {
            let s = source.instance_at(param, value, seed)?;
            let report = solve(&s, &SolveParams { seed, ..params.clone() })?;
            Ok(SweepRun {
                value,
                seed,
                objective: report.objective,
                feasible: report.feasible,
                served_count: report.served_count,
                mean_frequency: report.frequencies.iter().sum::<f64>() / report.frequencies.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = runs
        .chunks(repeats)
        .map(|chunk| {
            let obj = Quartiles::of(&chunk.iter().map(|r| r.objective).collect::<Vec<_>>());
            let served = Quartiles::of(&chunk.iter().map(|r| r.served_count as f64).collect::<Vec<_>>());
            let freq = Quartiles::of(&chunk.iter().map(|r| r.mean_frequency).collect::<Vec<_>>());
            SweepRow {
                param: param.name().to_string(),
                value: chunk[0].value,
                runs: chunk.len(),
                feasible_rate: chunk.iter().filter(|r| r.feasible).count() as f64 / chunk.len() as f64,
                objective_q1: obj.q1,
                objective_median: obj.median,
                objective_q3: obj.q3,
                served_q1: served.q1,
                served_median: served.median,
                served_q3: served.q3,
                frequency_q1: freq.q1,
                frequency_median: freq.median,
                frequency_q3: freq.q3,
            }
        })
        .collect();
    Ok(SweepResult {
        param,
        grid: grid.to_vec(),
        repeats,
        method: params.method,
        rows,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub seed: u64,
    pub method: Method,
    pub users: usize,
    pub uavs: usize,
    pub objective: f64,
    pub fitness: f64,
    pub feasible: bool,
    pub served_count: usize,
    pub evaluations: usize,
    pub wall_time_s: f64,
}

/// Solves the same instances with several methods. Exhaustive search is
/// skipped on instances with more than 20 users.
pub fn compare_methods(
    source: &InstanceSource,
    methods: &[Method],
    seeds: &[u64],
    params: &SolveParams,
) -> Result<Vec<CompareRow>> {
    let jobs: Vec<(u64, Method)> = seeds
        .iter()
        .flat_map(|&s| methods.iter().map(move |&m| (s, m)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(seed, method)| {
            let s = source.instance(seed)?;
            if method == Method::Exhaustive && s.num_users() > crate::offload_search::EXHAUSTIVE_MAX_DIMS {
                log::warn!("skipping exhaustive search on {} users", s.num_users());
                return Ok(None);
            }
            let start = Instant::now();
            let r = solve(&s, &SolveParams { method, seed, ..params.clone() })?;
            Ok(Some(CompareRow {
                seed,
                method,
                users: s.num_users(),
                uavs: s.num_uavs(),
                objective: r.objective,
                fitness: r.fitness,
                feasible: r.feasible,
                served_count: r.served_count,
                evaluations: r.evaluations,
                wall_time_s: start.elapsed().as_secs_f64(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Median objective of `method` over the rows.
pub fn median_objective(rows: &[CompareRow], method: Method) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter(|r| r.method == method).map(|r| r.objective).collect();
    (!v.is_empty()).then(|| Quartiles::of(&v).median)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealGapRow {
    pub seed: u64,
    pub robust_objective: f64,
    pub ideal_objective: f64,
    pub robust_feasible: bool,
    pub ideal_feasible: bool,
}

/// Objective with estimation errors against the same instance with a
/// perfectly known channel.
pub fn robust_vs_ideal(source: &InstanceSource, seeds: &[u64], params: &SolveParams) -> Result<Vec<IdealGapRow>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let s = source.instance(seed)?;
            let p = SolveParams { seed, ..params.clone() };
            let robust = solve(&s, &p)?;
            let ideal = solve(&s.with_ideal_csi(), &p)?;
            Ok(IdealGapRow {
                seed,
                robust_objective: robust.objective,
                ideal_objective: ideal.objective,
                robust_feasible: robust.feasible,
                ideal_feasible: ideal.feasible,
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
