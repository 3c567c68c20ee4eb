//! End-to-end planning: deploy UAVs once, then alternate frequency allocation
//! and offloading search until the best fitness stops improving.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::allocation::{expand_plan, AllocationModel, ConstraintViolation, Slacks};
use crate::deployment::{wkd_deploy, Deployment, WkdConfig};
use crate::linkmodel::CostLedger;
use crate::offload_search::{
    bwoa_solve, exhaustive_solve, greedy_solve, sa_solve, BwoaParams, Encoding, OffloadProblem, SaSchedule, SearchOutcome,
    DEFAULT_PENALTY,
};
use crate::scenario::{ensure_valid, Scenario};
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bwoa,
    Greedy,
    Sa,
    Exhaustive,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bwoa, Method::Greedy, Method::Sa, Method::Exhaustive];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bwoa => "bwoa",
            Method::Greedy => "greedy",
            Method::Sa => "sa",
            Method::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub method: Method,
    pub seed: u64,
    pub agents: usize,
    pub iters: usize,
    pub penalty: f64,
    pub encoding: Encoding,
    /// Annealing steps; `None` matches the whale optimizer's evaluation budget.
    pub sa_iters: Option<usize>,
    pub sa_cooling: f64,
    pub outer_max: usize,
    pub outer_tol: f64,
    pub wkd: WkdConfig,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            method: Method::Bwoa,
            seed: 0,
            agents: 30,
            iters: 200,
            penalty: DEFAULT_PENALTY,
            encoding: Encoding::Reduced,
            sa_iters: None,
            sa_cooling: 0.95,
            outer_max: 5,
            outer_tol: 1e-6,
            wkd: WkdConfig::default(),
        }
    }
}

impl SolveParams {
    pub fn with_method(method: Method, seed: u64) -> Self {
        Self {
            method,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub outer_iter: usize,
    pub best_fitness: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub deployment: u64,
    pub rounds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub scenario_digest: String,
    pub method: Method,
    pub params: SolveParams,
    pub deployment: Deployment,
    /// Per-task forwarding decision.
    pub plan: Vec<bool>,
    /// Forwarding matrix, `lambda[m][n]`.
    pub lambda: Vec<Vec<bool>>,
    pub frequencies: Vec<f64>,
    pub objective: f64,
    pub fitness: f64,
    pub feasible: bool,
    pub served: Vec<bool>,
    pub served_count: usize,
    pub slacks: Slacks,
    pub violations: Vec<ConstraintViolation>,
    pub uav_energy: Vec<f64>,
    pub hap_energy: f64,
    pub ledgers: Vec<CostLedger>,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
    pub seeds: Seeds,
    pub wall_time_s: f64,
}

/// Seed for outer round `round`, derived from the master seed.
pub fn round_seed(master: u64, round: usize) -> u64 {
    master ^ (round as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn run_method(problem: &OffloadProblem, params: &SolveParams, seed: u64, warm: Option<&[bool]>) -> Result<SearchOutcome> {
    match params.method {
        Method::Bwoa => bwoa_solve(
            problem,
            &BwoaParams {
                agents: params.agents,
                iters: params.iters,
                penalty: params.penalty,
                seed,
                encoding: params.encoding,
            },
            warm,
        ),
        Method::Greedy => Ok(greedy_solve(problem)),
        Method::Exhaustive => exhaustive_solve(problem),
        Method::Sa => Ok(sa_solve(
            problem,
            &SaSchedule {
                iters: params.sa_iters.unwrap_or(params.agents * params.iters),
                cooling: params.sa_cooling,
                initial_temperature: None,
                seed,
            },
            warm,
        )),
    }
}

/// Tasks that remain served after shedding. A task whose latency constraint
/// cannot hold is unserved. Then, per UAV, the task with the largest
/// frequency is dropped while that UAV's CPU or energy budget is exceeded,
/// and finally forwarded tasks are dropped the same way while any HAP limit
/// is exceeded.
pub fn shed_tasks(model: &AllocationModel, plan: &[bool]) -> Vec<bool> {
    let mut active: Vec<bool> = model.tasks.iter().zip(plan).map(|(t, &f)| t.route(f).deadline_met).collect();
    let freq = |m: usize| model.tasks[m].route(plan[m]).frequency;
    let largest = |active: &[bool], pick: &dyn Fn(usize) -> bool| -> Option<usize> {
        (0..active.len())
            .filter(|&m| active[m] && pick(m))
            .max_by(|&a, &b| freq(a).total_cmp(&freq(b)).then(a.cmp(&b)))
    };
    for n in 0..model.num_uavs() {
        loop {
            let loads = model.loads(plan, Some(&active));
            let on_uav = |m: usize| model.tasks[m].channel.uav == n;
            let victim = if loads.uav_cpu[n] > model.uav_cpu_cap(n) {
                largest(&active, &|m| on_uav(m) && !plan[m])
            } else if loads.uav_energy[n] > model.uav_energy_cap(n) {
                largest(&active, &on_uav)
            } else {
                None
            };
            match victim {
                Some(m) => active[m] = false,
                None => break,
            }
        }
    }
    loop {
        let loads = model.loads(plan, Some(&active));
        let over = loads.hap_tasks > model.hap_slots()
            || loads.hap_cpu > model.hap_cpu_cap()
            || loads.hap_energy > model.hap_energy_cap();
        if !over {
            break;
        }
        match largest(&active, &|m| plan[m]) {
            Some(m) => active[m] = false,
            None => break,
        }
    }
    active
}

/// Number of tasks served by the report's plan on `scenario`.
pub fn served_count(report: &SolveReport, scenario: &Scenario) -> Result<usize> {
    let model = AllocationModel::new(&report.deployment, scenario)?;
    Ok(shed_tasks(&model, &report.plan).iter().filter(|&&s| s).count())
}

/// Plans deployment, offloading and frequencies for a valid scenario.
pub fn solve(scenario: &Scenario, params: &SolveParams) -> Result<SolveReport> {
    ensure_valid(scenario)?;
    let start = Instant::now();
    let wkd = WkdConfig {
        seed: params.seed,
        ..params.wkd
    };
    let deployment = wkd_deploy(scenario, &wkd)?;
    solve_with_deployment(scenario, deployment, params, start)
}

/// Runs the alternation on an existing deployment.
pub fn solve_with_deployment(
    scenario: &Scenario,
    deployment: Deployment,
    params: &SolveParams,
    start: Instant,
) -> Result<SolveReport> {
    if params.outer_max == 0 {
        return Err(Error::Config("outer_max must be at least 1".into()));
    }
    let model = AllocationModel::new(&deployment, scenario)?;
    let problem = OffloadProblem::new(&model, params.encoding, params.penalty);

    let mut incumbent: Option<(Vec<bool>, f64)> = None;
    let mut trace = Vec::new();
    let mut rounds = Vec::new();
    let mut evaluations = 0;
    for r in 0..params.outer_max {
        let seed = round_seed(params.seed, r);
        rounds.push(seed);
        let warm = incumbent.as_ref().map(|(p, _)| p.as_slice());
        let out = run_method(&problem, params, seed, warm)?;
        evaluations += out.evaluations;
        let previous = incumbent.as_ref().map_or(f64::INFINITY, |(_, f)| *f);
        if out.fitness < previous {
            incumbent = Some((out.plan, out.fitness));
        }
        let (plan, best) = incumbent.as_ref().expect("first round sets the incumbent");
        trace.push(TraceEntry {
            outer_iter: r + 1,
            best_fitness: *best,
            objective: model.solve(plan).objective,
        });
        if previous - best < params.outer_tol {
            break;
        }
    }
    let (plan, fitness) = incumbent.expect("at least one round");
    let alloc = model.solve(&plan);
    let served = shed_tasks(&model, &plan);
    Ok(SolveReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario_digest: scenario.digest(),
        method: params.method,
        params: params.clone(),
        lambda: expand_plan(&deployment, &plan),
        served_count: served.iter().filter(|&&s| s).count(),
        served,
        deployment,
        plan,
        frequencies: alloc.frequencies,
        objective: alloc.objective,
        fitness,
        feasible: alloc.feasible,
        slacks: alloc.slacks,
        violations: alloc.violations,
        uav_energy: alloc.uav_energy,
        hap_energy: alloc.hap_energy,
        ledgers: alloc.ledgers,
        trace,
        evaluations,
        seeds: Seeds {
            master: params.seed,
            deployment: params.seed,
            rounds,
        },
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn report_to_string(report: &SolveReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn parse_report(text: &str) -> Result<SolveReport> {
    let report: SolveReport = serde_json::from_str(text)?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported report schema version {}",
            report.schema_version
        )));
    }
    Ok(report)
}
