//! Binary offloading decisions: penalty fitness, the binary whale optimizer
//! and the exhaustive, greedy and annealing baselines.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::AllocationModel;
use crate::deployment::Deployment;
use crate::linkmodel::total_energy;
use crate::scenario::Scenario;
use crate::{Error, Result};

pub const DEFAULT_PENALTY: f64 = 1e5;
pub const EXHAUSTIVE_MAX_DIMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// One bit per task, applied to the task's own UAV.
    #[default]
    Reduced,
    /// One bit per (task, UAV) pair; bits off the connection matrix are penalized.
    FullMatrix,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PenaltyTerm {
    /// Raw constraint values; positive means violated.
    pub values: Vec<f64>,
    pub contribution: f64,
}

impl PenaltyTerm {
    fn from_values(values: Vec<f64>, penalty: f64) -> Self {
        let contribution = values.iter().filter(|&&h| h > 0.0).map(|h| penalty * h * h).sum();
        Self { values, contribution }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PenaltyBreakdown {
    /// Forwarding through an unconnected UAV, per (task, UAV).
    pub h1: PenaltyTerm,
    /// UAV energy, per UAV (J).
    pub h2: PenaltyTerm,
    /// HAP energy (J).
    pub h3: PenaltyTerm,
    /// UAV CPU, per UAV (Hz).
    pub h4: PenaltyTerm,
    /// HAP CPU (Hz).
    pub h5: PenaltyTerm,
    /// HAP task slots.
    pub h6: PenaltyTerm,
    /// Worst-case latency loss per task (cycles).
    pub h7: PenaltyTerm,
}

impl PenaltyBreakdown {
    pub fn total(&self) -> f64 {
        [&self.h1, &self.h2, &self.h3, &self.h4, &self.h5, &self.h6, &self.h7]
            .iter()
            .map(|t| t.contribution)
            .sum()
    }

    pub fn is_clean(&self) -> bool {
        self.total() == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub objective: f64,
    pub penalties: PenaltyBreakdown,
}

/// The fitness landscape for a fixed deployment.
#[derive(Debug, Clone)]
pub struct OffloadProblem<'a> {
    model: &'a AllocationModel,
    encoding: Encoding,
    penalty: f64,
    serving: Vec<usize>,
}

impl<'a> OffloadProblem<'a> {
    pub fn new(model: &'a AllocationModel, encoding: Encoding, penalty: f64) -> Self {
        let serving = model.tasks.iter().map(|t| t.channel.uav).collect();
        Self {
            model,
            encoding,
            penalty,
            serving,
        }
    }

    pub fn model(&self) -> &AllocationModel {
        self.model
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn num_tasks(&self) -> usize {
        self.serving.len()
    }

    pub fn dims(&self) -> usize {
        match self.encoding {
            Encoding::Reduced => self.num_tasks(),
            Encoding::FullMatrix => self.num_tasks() * self.model.num_uavs(),
        }
    }

    /// The effective per-task plan: a task is forwarded iff its own UAV's bit is set.
    pub fn project(&self, bits: &[bool]) -> Vec<bool> {
        match self.encoding {
            Encoding::Reduced => bits.to_vec(),
            Encoding::FullMatrix => {
                let n = self.model.num_uavs();
                self.serving.iter().enumerate().map(|(m, &u)| bits[m * n + u]).collect()
            }
        }
    }

    pub fn encode(&self, plan: &[bool]) -> Vec<bool> {
        match self.encoding {
            Encoding::Reduced => plan.to_vec(),
            Encoding::FullMatrix => {
                let n = self.model.num_uavs();
                let mut bits = vec![false; self.num_tasks() * n];
                for (m, (&u, &f)) in self.serving.iter().zip(plan).enumerate() {
                    bits[m * n + u] = f;
                }
                bits
            }
        }
    }

    pub fn evaluate(&self, bits: &[bool]) -> Evaluation {
        assert_eq!(bits.len(), self.dims(), "agent length");
        let plan = self.project(bits);
        let n = self.model.num_uavs();
        let h1 = match self.encoding {
            Encoding::Reduced => self
                .serving
                .iter()
                .zip(&plan)
                .flat_map(|(&u, &f)| (0..n).map(move |k| if k == u { f as u8 as f64 - 1.0 } else { 0.0 }))
                .collect(),
            Encoding::FullMatrix => bits
                .iter()
                .enumerate()
                .map(|(i, &b)| b as u8 as f64 - (self.serving[i / n] == i % n) as u8 as f64)
                .collect(),
        };
        let loads = self.model.loads(&plan, None);
        let h2 = (0..n).map(|k| loads.uav_energy[k] - self.model.uav_energy_cap(k)).collect();
        let h4 = (0..n).map(|k| loads.uav_cpu[k] - self.model.uav_cpu_cap(k)).collect();
        let h7 = self
            .model
            .tasks
            .iter()
            .zip(&plan)
            .map(|(t, &f)| t.route(f).residual)
            .collect();
        let p = self.penalty;
        let penalties = PenaltyBreakdown {
            h1: PenaltyTerm::from_values(h1, p),
            h2: PenaltyTerm::from_values(h2, p),
            h3: PenaltyTerm::from_values(vec![loads.hap_energy - self.model.hap_energy_cap()], p),
            h4: PenaltyTerm::from_values(h4, p),
            h5: PenaltyTerm::from_values(vec![loads.hap_cpu - self.model.hap_cpu_cap()], p),
            h6: PenaltyTerm::from_values(vec![loads.hap_tasks as f64 - self.model.hap_slots() as f64], p),
            h7: PenaltyTerm::from_values(h7, p),
        };
        let objective = total_energy(&loads.uav_energy, loads.hap_energy);
        Evaluation {
            value: objective + penalties.total(),
            objective,
            penalties,
        }
    }

    pub fn fitness(&self, bits: &[bool]) -> f64 {
        self.evaluate(bits).value
    }
}

/// Fitness of a forwarding matrix on a fresh allocation model.
pub fn fitness(
    lambda: &[Vec<bool>],
    deployment: &Deployment,
    scenario: &Scenario,
    penalty: f64,
) -> Result<(f64, PenaltyBreakdown)> {
    let model = AllocationModel::new(deployment, scenario)?;
    let problem = OffloadProblem::new(&model, Encoding::FullMatrix, penalty);
    if lambda.len() != problem.num_tasks() || lambda.iter().any(|r| r.len() != model.num_uavs()) {
        return Err(Error::Contract("forwarding matrix has the wrong shape".into()));
    }
    let bits: Vec<bool> = lambda.iter().flatten().copied().collect();
    let e = problem.evaluate(&bits);
    Ok((e.value, e.penalties))
}

pub fn transfer_probability(x: f64) -> f64 {
    1.0 / (1.0 + (-10.0 * (x - 0.5)).exp())
}

/// Result of any offloading solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Best agent in the solver's encoding.
    pub bits: Vec<bool>,
    /// Per-task forwarding plan.
    pub plan: Vec<bool>,
    pub fitness: f64,
    /// Best fitness after initialization and after every iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BwoaParams {
    pub agents: usize,
    pub iters: usize,
    pub penalty: f64,
    pub seed: u64,
    pub encoding: Encoding,
}

impl Default for BwoaParams {
    fn default() -> Self {
        Self {
            agents: 30,
            iters: 200,
            penalty: DEFAULT_PENALTY,
            seed: 0,
            encoding: Encoding::Reduced,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub position: Vec<bool>,
    pub fitness: f64,
    pub a: f64,
    pub coef_a: Vec<f64>,
    pub coef_c: Vec<f64>,
    pub distance: Vec<f64>,
}

impl AgentState {
    pub fn new(position: Vec<bool>, fitness: f64) -> Self {
        let d = position.len();
        Self {
            position,
            fitness,
            a: 2.0,
            coef_a: vec![0.0; d],
            coef_c: vec![0.0; d],
            distance: vec![0.0; d],
        }
    }
}

fn agent_rngs(seed: u64, k: usize) -> Vec<ChaCha8Rng> {
    (0..k)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            r
        })
        .collect()
}

/// One position update of every agent at iteration `iter` of `max_iters`.
/// `rngs` holds one stream per agent. Fitness values are not refreshed.
pub fn bwoa_step(agents: &mut [AgentState], best: &[bool], iter: usize, max_iters: usize, rngs: &mut [ChaCha8Rng]) {
    bwoa_step_with(agents, best, iter, max_iters, rngs, transfer_probability);
}

pub fn bwoa_step_with<T: Fn(f64) -> f64>(
    agents: &mut [AgentState],
    best: &[bool],
    iter: usize,
    max_iters: usize,
    rngs: &mut [ChaCha8Rng],
    transfer: T,
) {
    assert_eq!(agents.len(), rngs.len(), "one RNG stream per agent");
    let a = if max_iters == 0 {
        0.0
    } else {
        (2.0 - iter as f64 * 2.0 / max_iters as f64).clamp(0.0, 2.0)
    };
    let snapshot: Vec<Vec<bool>> = agents.iter().map(|s| s.position.clone()).collect();
    let k = agents.len();
    for (agent, rng) in agents.iter_mut().zip(rngs.iter_mut()) {
        let d = agent.position.len();
        agent.a = a;
        for j in 0..d {
            agent.coef_a[j] = 2.0 * a * rng.random::<f64>() - a;
            agent.coef_c[j] = 2.0 * rng.random::<f64>();
        }
        let spiral = rng.random::<f64>() >= 0.5;
        let partner = rng.random_range(0..k);
        for j in 0..d {
            let x = agent.position[j] as u8 as f64;
            let dist = if spiral {
                (best[j] as u8 as f64 - x).abs()
            } else if agent.coef_a[j].abs() >= 1.0 {
                (agent.coef_c[j] * snapshot[partner][j] as u8 as f64 - x).abs()
            } else {
                (agent.coef_c[j] * best[j] as u8 as f64 - x).abs()
            };
            agent.distance[j] = dist;
            let tau = transfer(agent.coef_a[j] * dist);
            if rng.random::<f64>() < tau {
                agent.position[j] = !agent.position[j];
            }
        }
    }
}

fn random_bits(rng: &mut ChaCha8Rng, d: usize) -> Vec<bool> {
    (0..d).map(|_| rng.random::<bool>()).collect()
}

fn lexicographic(a: &[bool], b: &[bool]) -> Ordering {
    a.cmp(b)
}

/// Binary whale optimization with best-ever elitism.
pub fn bwoa_solve(problem: &OffloadProblem, params: &BwoaParams, warm_start: Option<&[bool]>) -> Result<SearchOutcome> {
    if params.agents < 2 {
        return Err(Error::Config("BWOA needs at least two agents".into()));
    }
    if params.penalty <= 0.0 {
        return Err(Error::Config("penalty factor must be positive".into()));
    }
    let d = problem.dims();
    let mut init_rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut population = vec![vec![false; d]];
    if let Some(w) = warm_start {
        population.push(problem.encode(w));
    }
    let greedy = greedy_solve(problem);
    population.push(greedy.bits);
    while population.len() < params.agents {
        population.push(random_bits(&mut init_rng, d));
    }
    population.truncate(params.agents);
    bwoa_from_population(problem, params, population, greedy.evaluations)
}

/// Runs the optimizer from an explicit initial population.
pub fn bwoa_from_population(
    problem: &OffloadProblem,
    params: &BwoaParams,
    population: Vec<Vec<bool>>,
    prior_evaluations: usize,
) -> Result<SearchOutcome> {
    if population.is_empty() {
        return Err(Error::Config("empty population".into()));
    }
    let mut evaluations = prior_evaluations;
    let mut agents: Vec<AgentState> = population
        .into_iter()
        .map(|p| {
            let f = problem.fitness(&p);
            AgentState::new(p, f)
        })
        .collect();
    evaluations += agents.len();
    let mut best = agents[0].position.clone();
    let mut best_fit = agents[0].fitness;
    let update_best = |agents: &[AgentState], best: &mut Vec<bool>, best_fit: &mut f64| {
        for s in agents {
            if s.fitness < *best_fit || (s.fitness == *best_fit && lexicographic(&s.position, best) == Ordering::Less) {
                *best_fit = s.fitness;
                best.clone_from(&s.position);
            }
        }
    };
    update_best(&agents, &mut best, &mut best_fit);
    let mut history = vec![best_fit];
    let mut rngs = agent_rngs(params.seed, agents.len());
    for i in 1..=params.iters {
        bwoa_step(&mut agents, &best, i, params.iters, &mut rngs);
        for s in agents.iter_mut() {
            s.fitness = problem.fitness(&s.position);
        }
        evaluations += agents.len();
        update_best(&agents, &mut best, &mut best_fit);
        history.push(best_fit);
    }
    Ok(SearchOutcome {
        plan: problem.project(&best),
        bits: best,
        fitness: best_fit,
        history,
        evaluations,
    })
}

/// Enumerates every per-task plan; ties keep the lexicographically smallest.
pub fn exhaustive_solve(problem: &OffloadProblem) -> Result<SearchOutcome> {
    let m = problem.num_tasks();
    if m > EXHAUSTIVE_MAX_DIMS {
        return Err(Error::SizeGuard(format!(
            "exhaustive search supports at most {EXHAUSTIVE_MAX_DIMS} tasks, got {m}"
        )));
    }
    let mut best_plan = vec![false; m];
    let mut best_fit = f64::INFINITY;
    let mut plan = vec![false; m];
    let total = 1u64 << m;
    for c in 0..total {
        for (i, b) in plan.iter_mut().enumerate() {
            *b = (c >> (m - 1 - i)) & 1 == 1;
        }
        let f = problem.fitness(&problem.encode(&plan));
        if f < best_fit {
            best_fit = f;
            best_plan.clone_from(&plan);
        }
    }
    Ok(SearchOutcome {
        bits: problem.encode(&best_plan),
        plan: best_plan,
        fitness: best_fit,
        history: vec![best_fit],
        evaluations: total as usize,
    })
}

/// Visits tasks by decreasing UAV-side minimum frequency and forwards a task
/// only when that strictly lowers the fitness of the decisions so far.
pub fn greedy_solve(problem: &OffloadProblem) -> SearchOutcome {
    let m = problem.num_tasks();
    let key = |i: usize| {
        let r = &problem.model().tasks[i].local;
        if r.deadline_met {
            r.frequency
        } else {
            f64::INFINITY
        }
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    let mut plan = vec![false; m];
    let mut current = problem.fitness(&problem.encode(&plan));
    let mut evaluations = 1;
    for i in order {
        plan[i] = true;
        let f = problem.fitness(&problem.encode(&plan));
        evaluations += 1;
        if f < current {
            current = f;
        } else {
            plan[i] = false;
        }
    }
    SearchOutcome {
        bits: problem.encode(&plan),
        plan,
        fitness: current,
        history: vec![current],
        evaluations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaSchedule {
    pub iters: usize,
    pub cooling: f64,
    /// Starting temperature; `None` uses the spread of single-flip neighbor fitness.
    pub initial_temperature: Option<f64>,
    pub seed: u64,
}

impl Default for SaSchedule {
    fn default() -> Self {
        Self {
            iters: 6000,
            cooling: 0.95,
            initial_temperature: None,
            seed: 0,
        }
    }
}

fn neighbor_spread(problem: &OffloadProblem, start: &[bool]) -> (f64, usize) {
    let mut x = start.to_vec();
    let vals: Vec<f64> = (0..x.len())
        .map(|j| {
            x[j] = !x[j];
            let f = problem.fitness(&x);
            x[j] = !x[j];
            f
        })
        .collect();
    if vals.len() < 2 {
        return (0.0, vals.len());
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
    (var.sqrt(), vals.len())
}

/// Simulated annealing over single-bit flips with geometric cooling and
/// Metropolis acceptance. Returns the best plan visited.
pub fn sa_solve(problem: &OffloadProblem, schedule: &SaSchedule, start: Option<&[bool]>) -> SearchOutcome {
    let d = problem.dims();
    let mut x = match start {
        Some(p) => problem.encode(p),
        None => vec![false; d],
    };
    let mut fx = problem.fitness(&x);
    let mut evaluations = 1;
    let mut temp = match schedule.initial_temperature {
        Some(t) => t,
        None if schedule.iters > 0 => {
            let (s, n) = neighbor_spread(problem, &x);
            evaluations += n;
            s
        }
        None => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut best = x.clone();
    let mut best_fit = fx;
    let mut history = vec![best_fit];
    if d > 0 {
        for _ in 0..schedule.iters {
            let j = rng.random_range(0..d);
            x[j] = !x[j];
            let fy = problem.fitness(&x);
            evaluations += 1;
            let delta = fy - fx;
            let u = rng.random::<f64>();
            let accept = delta <= 0.0 || (temp > 0.0 && u < (-delta / temp).exp());
            if accept {
                fx = fy;
                if fx < best_fit {
                    best_fit = fx;
                    best.clone_from(&x);
                }
            } else {
                x[j] = !x[j];
            }
            temp *= schedule.cooling;
            history.push(best_fit);
        }
    }
    SearchOutcome {
        plan: problem.project(&best),
        bits: best,
        fitness: best_fit,
        history,
        evaluations,
    }
}
