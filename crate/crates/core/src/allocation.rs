//! CPU frequency allocation for a fixed deployment and offloading plan.
//!
//! Every energy term grows with a task's frequency and every capacity
//! constraint is relaxed by lowering it, so the optimum runs each task at the
//! smallest frequency that satisfies its worst-case latency constraint. The
//! remaining work is bookkeeping: loads, slacks and which constraints break.

use serde::{Deserialize, Serialize};

use crate::deployment::Deployment;
use crate::drcc::{coeffs_cvar, coeffs_for_channel, frequency_bound, nominal_delays, risk_for_task, FrequencyBound, RiskConfig};
use crate::linkmodel::{aggregate_energies, ledger_for_channel, platform_energies, task_channels, total_energy, CostLedger, TaskChannel};
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Cost of running one task on one route (UAV or HAP).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteCost {
    /// Robust minimum frequency, or `c*L/T` when no finite frequency is robust.
    pub frequency: f64,
    pub deadline_met: bool,
    /// Worst-case CVaR loss (cycles) at `frequency`; zero when the deadline is met.
    pub residual: f64,
    pub ledger: CostLedger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRoutes {
    pub channel: TaskChannel,
    pub risk: RiskConfig,
    pub local: RouteCost,
    pub forward: RouteCost,
}

impl TaskRoutes {
    pub fn route(&self, forwarded: bool) -> &RouteCost {
        if forwarded {
            &self.forward
        } else {
            &self.local
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    Deadline { task: usize },
    UavCpu { uav: usize },
    HapCpu,
    UavEnergy { uav: usize },
    HapEnergy,
    HapSlots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub constraint: Constraint,
    /// How far the load exceeds the capacity, in the constraint's own unit.
    pub excess: f64,
}

/// Capacity minus load for every resource constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slacks {
    pub uav_cpu: Vec<f64>,
    pub hap_cpu: f64,
    pub uav_energy: Vec<f64>,
    pub hap_energy: f64,
    pub hap_slots: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub forwarded: Vec<bool>,
    pub frequencies: Vec<f64>,
    pub deadline_met: Vec<bool>,
    pub feasible: bool,
    pub slacks: Slacks,
    pub violations: Vec<ConstraintViolation>,
    pub uav_energy: Vec<f64>,
    pub hap_energy: f64,
    pub objective: f64,
    pub ledgers: Vec<CostLedger>,
}

/// Raw resource usage of a plan, accumulated in task order.
#[derive(Debug, Clone, PartialEq)]
pub struct Loads {
    pub uav_cpu: Vec<f64>,
    pub uav_energy: Vec<f64>,
    pub hap_cpu: f64,
    pub hap_energy: f64,
    pub hap_tasks: usize,
}

/// Per-task route costs for a fixed deployment.
#[derive(Debug, Clone)]
pub struct AllocationModel {
    pub tasks: Vec<TaskRoutes>,
    uav_cpu_cap: Vec<f64>,
    uav_energy_cap: Vec<f64>,
    hap_cpu_cap: f64,
    hap_energy_cap: f64,
    hap_slots: usize,
}

fn route_cost(m: usize, scenario: &Scenario, channel: &TaskChannel, risk: &RiskConfig, forwarded: bool) -> Result<RouteCost> {
    let task = &scenario.tasks[m];
    let delays = nominal_delays(task, channel, forwarded, &scenario.radio)?;
    let (frequency, deadline_met) = match frequency_bound(task, &delays, risk) {
        FrequencyBound::Feasible(f) => (f, true),
        FrequencyBound::Infeasible { .. } => (task.cycles() / task.deadline, false),
    };
    let residual = if deadline_met {
        0.0
    } else {
        let c = coeffs_for_channel(task, channel, forwarded, frequency, &scenario.radio)?;
        coeffs_cvar(&c, risk).max(0.0)
    };
    Ok(RouteCost {
        frequency,
        deadline_met,
        residual,
        ledger: ledger_for_channel(m, channel, forwarded, frequency, scenario, None)?,
    })
}

impl AllocationModel {
    pub fn new(deployment: &Deployment, scenario: &Scenario) -> Result<Self> {
        if deployment.connection.len() != scenario.num_users() {
            return Err(Error::Contract("deployment does not cover every user".into()));
        }
        let channels = task_channels(deployment, scenario)?;
        let tasks = channels
            .into_iter()
            .enumerate()
            .map(|(m, channel)| {
                let risk = risk_for_task(scenario, m, channel.mean_gain);
                Ok(TaskRoutes {
                    local: route_cost(m, scenario, &channel, &risk, false)?,
                    forward: route_cost(m, scenario, &channel, &risk, true)?,
                    channel,
                    risk,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tasks,
            uav_cpu_cap: scenario.uavs.iter().map(|u| u.cpu_cap).collect(),
            uav_energy_cap: scenario.uavs.iter().map(|u| u.energy_cap).collect(),
            hap_cpu_cap: scenario.hap.cpu_cap,
            hap_energy_cap: scenario.hap.energy_cap,
            hap_slots: scenario.hap.task_slots,
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.uav_cpu_cap.len()
    }

    pub fn uav_cpu_cap(&self, n: usize) -> f64 {
        self.uav_cpu_cap[n]
    }

    pub fn uav_energy_cap(&self, n: usize) -> f64 {
        self.uav_energy_cap[n]
    }

    pub fn hap_cpu_cap(&self) -> f64 {
        self.hap_cpu_cap
    }

    pub fn hap_energy_cap(&self) -> f64 {
        self.hap_energy_cap
    }

    pub fn hap_slots(&self) -> usize {
        self.hap_slots
    }

    /// Resource usage of the subset `active` of tasks (all tasks when `None`).
    pub fn loads(&self, forwarded: &[bool], active: Option<&[bool]>) -> Loads {
        let n = self.num_uavs();
        let mut uav_cpu = vec![0.0; n];
        let mut fwd_energy = vec![0.0; n];
        let mut cu_energy = vec![0.0; n];
        let mut hap_cpu = 0.0;
        let mut hap_energy = 0.0;
        let mut hap_tasks = 0;
        for (m, t) in self.tasks.iter().enumerate() {
            if active.is_some_and(|a| !a[m]) {
                continue;
            }
            let r = t.route(forwarded[m]);
            let uav = t.channel.uav;
            fwd_energy[uav] += r.ledger.e_forward;
            cu_energy[uav] += r.ledger.e_uav_compute;
            hap_energy += r.ledger.e_hap_compute;
            if forwarded[m] {
                hap_cpu += r.frequency;
                hap_tasks += 1;
            } else {
                uav_cpu[uav] += r.frequency;
            }
        }
        let uav_energy = fwd_energy.iter().zip(&cu_energy).map(|(a, b)| a + b).collect();
        Loads {
            uav_cpu,
            uav_energy,
            hap_cpu,
            hap_energy,
            hap_tasks,
        }
    }

    pub fn slacks(&self, loads: &Loads) -> Slacks {
        Slacks {
            uav_cpu: self.uav_cpu_cap.iter().zip(&loads.uav_cpu).map(|(c, l)| c - l).collect(),
            hap_cpu: self.hap_cpu_cap - loads.hap_cpu,
            uav_energy: self
                .uav_energy_cap
                .iter()
                .zip(&loads.uav_energy)
                .map(|(c, l)| c - l)
                .collect(),
            hap_energy: self.hap_energy_cap - loads.hap_energy,
            hap_slots: self.hap_slots as i64 - loads.hap_tasks as i64,
        }
    }

    /// Evaluates the minimal-frequency allocation of a reduced plan
    /// (`forwarded[m]` applies to the UAV serving `m`).
    pub fn solve(&self, forwarded: &[bool]) -> Allocation {
        assert_eq!(forwarded.len(), self.num_tasks(), "plan length");
        let routes: Vec<&RouteCost> = self.tasks.iter().zip(forwarded).map(|(t, &f)| t.route(f)).collect();
        let ledgers: Vec<CostLedger> = routes.iter().map(|r| r.ledger).collect();
        let (uav_energy, hap_energy) = aggregate_energies(&ledgers, self.num_uavs());
        let loads = self.loads(forwarded, None);
        let slacks = self.slacks(&loads);

        let mut violations = Vec::new();
        for (m, r) in routes.iter().enumerate() {
            if !r.deadline_met {
                violations.push(ConstraintViolation {
                    constraint: Constraint::Deadline { task: m },
                    excess: r.residual,
                });
            }
        }
        for (n, &s) in slacks.uav_cpu.iter().enumerate() {
            if s < 0.0 {
                violations.push(ConstraintViolation {
                    constraint: Constraint::UavCpu { uav: n },
                    excess: -s,
                });
            }
        }
        if slacks.hap_cpu < 0.0 {
            violations.push(ConstraintViolation {
                constraint: Constraint::HapCpu,
                excess: -slacks.hap_cpu,
            });
        }
        for (n, &s) in slacks.uav_energy.iter().enumerate() {
            if s < 0.0 {
                violations.push(ConstraintViolation {
                    constraint: Constraint::UavEnergy { uav: n },
                    excess: -s,
                });
            }
        }
        if slacks.hap_energy < 0.0 {
            violations.push(ConstraintViolation {
                constraint: Constraint::HapEnergy,
                excess: -slacks.hap_energy,
            });
        }
        if slacks.hap_slots < 0 {
            violations.push(ConstraintViolation {
                constraint: Constraint::HapSlots,
                excess: -slacks.hap_slots as f64,
            });
        }
        Allocation {
            forwarded: forwarded.to_vec(),
            frequencies: routes.iter().map(|r| r.frequency).collect(),
            deadline_met: routes.iter().map(|r| r.deadline_met).collect(),
            feasible: violations.is_empty(),
            slacks,
            violations,
            objective: total_energy(&uav_energy, hap_energy),
            uav_energy,
            hap_energy,
            ledgers,
        }
    }
}

/// Reduces an `M x N` forwarding matrix to one bit per task, checking that
/// tasks are only forwarded through their own UAV.
pub fn reduce_plan(deployment: &Deployment, lambda: &[Vec<bool>]) -> Result<Vec<bool>> {
    if lambda.len() != deployment.connection.len() {
        return Err(Error::Contract("forwarding matrix has wrong number of rows".into()));
    }
    lambda
        .iter()
        .zip(&deployment.connection)
        .enumerate()
        .map(|(m, (l, d))| {
            if l.len() != d.len() {
                return Err(Error::Contract(format!("forwarding row {m} has wrong length")));
            }
            if l.iter().zip(d).any(|(&l, &d)| l && !d) {
                return Err(Error::Contract(format!("task {m} forwarded through an unconnected UAV")));
            }
            Ok(l.iter().any(|&b| b))
        })
        .collect()
}

/// Expands one bit per task into the `M x N` forwarding matrix.
pub fn expand_plan(deployment: &Deployment, forwarded: &[bool]) -> Vec<Vec<bool>> {
    deployment
        .connection
        .iter()
        .zip(forwarded)
        .map(|(row, &f)| row.iter().map(|&c| c && f).collect())
        .collect()
}

/// Minimal-frequency allocation for the forwarding matrix `lambda`.
pub fn solve_allocation(deployment: &Deployment, lambda: &[Vec<bool>], scenario: &Scenario) -> Result<Allocation> {
    if !deployment.is_valid() {
        return Err(Error::Contract("every user must connect to exactly one UAV".into()));
    }
    let reduced = reduce_plan(deployment, lambda)?;
    Ok(AllocationModel::new(deployment, scenario)?.solve(&reduced))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub analytic_objective: f64,
    pub analytic_feasible: bool,
    /// Best objective among feasible grid points, if any.
    pub grid_objective: Option<f64>,
    pub grid_points: usize,
    /// Largest objective change attributable to the boundary search tolerance.
    pub resolution: f64,
    /// Feasibility verdicts agree and no grid point beats the analytic value.
    pub consistent: bool,
}

/// Brute-force check of the allocation on a small instance: locate each
/// task's robust frequency boundary by bisection on the worst-case CVaR, then
/// scan a grid above it and evaluate every combination with the platform
/// energy formulas.
pub fn verify_allocation_optimality(
    deployment: &Deployment,
    forwarded: &[bool],
    scenario: &Scenario,
    grid: usize,
) -> Result<OptimalityReport> {
    let m = scenario.num_users();
    if m > 4 {
        return Err(Error::SizeGuard(format!("grid verification supports at most 4 tasks, got {m}")));
    }
    let analytic = AllocationModel::new(deployment, scenario)?.solve(forwarded);
    let channels = task_channels(deployment, scenario)?;
    let lambda = expand_plan(deployment, forwarded);

    let cvar_at = |i: usize, f: f64| -> Result<f64> {
        let risk = risk_for_task(scenario, i, channels[i].mean_gain);
        let c = coeffs_for_channel(&scenario.tasks[i], &channels[i], forwarded[i], f, &scenario.radio)?;
        Ok(coeffs_cvar(&c, &risk))
    };

    // Boundary per task: the worst-case loss decreases in f whenever it can reach zero.
    let mut boundaries = Vec::with_capacity(m);
    for i in 0..m {
        let ceiling = 1e18;
        if cvar_at(i, ceiling)? > 0.0 {
            boundaries.push(None);
            continue;
        }
        let (mut lo, mut hi) = (0.0, ceiling);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if cvar_at(i, mid)? <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        boundaries.push(Some(hi));
    }

    let steps = grid.max(1);
    let mut best: Option<f64> = None;
    let mut points = 0;
    if boundaries.iter().all(Option::is_some) {
        let bounds: Vec<f64> = boundaries.iter().map(|b| b.unwrap()).collect();
        let per_task: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&b| {
                let mut g: Vec<f64> = (0..=steps).map(|j| b * (1.0 + 0.5 * j as f64 / steps as f64)).collect();
                g.push(b * 0.999);
                g
            })
            .collect();
        let mut idx = vec![0usize; m];
        loop {
            points += 1;
            let f: Vec<f64> = (0..m).map(|i| per_task[i][idx[i]]).collect();
            let robust = (0..m)
                .map(|i| cvar_at(i, f[i]).map(|v| v <= 1e-9 * scenario.tasks[i].cycles()))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .all(|ok| ok);
            if robust && capacities_hold(deployment, &lambda, &f, scenario)? {
                let (uav, hap) = platform_energies(deployment, &lambda, &f, scenario)?;
                let obj = total_energy(&uav, hap);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
            let mut k = 0;
            while k < m {
                idx[k] += 1;
                if idx[k] < per_task[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == m {
                break;
            }
        }
    }

    let resolution = 1e-9 * analytic.objective.abs().max(1e-12);
    let consistent = match best {
        Some(b) => analytic.feasible && analytic.objective <= b + resolution,
        None => !analytic.feasible,
    };
    Ok(OptimalityReport {
        analytic_objective: analytic.objective,
        analytic_feasible: analytic.feasible,
        grid_objective: best,
        grid_points: points,
        resolution,
        consistent,
    })
}

fn capacities_hold(deployment: &Deployment, lambda: &[Vec<bool>], f: &[f64], scenario: &Scenario) -> Result<bool> {
    let (uav_e, hap_e) = platform_energies(deployment, lambda, f, scenario)?;
    let n = scenario.num_uavs();
    let mut uav_cpu = vec![0.0; n];
    let mut hap_cpu = 0.0;
    let mut slots = 0;
    for (i, row) in lambda.iter().enumerate() {
        let uav = deployment.serving_uav(i).expect("valid deployment");
        if row.iter().any(|&b| b) {
            hap_cpu += f[i];
            slots += 1;
        } else {
            uav_cpu[uav] += f[i];
        }
    }
    let ok = (0..n).all(|k| uav_cpu[k] <= scenario.uavs[k].cpu_cap && uav_e[k] <= scenario.uavs[k].energy_cap)
        && hap_cpu <= scenario.hap.cpu_cap
        && hap_e <= scenario.hap.energy_cap
        && slots <= scenario.hap.task_slots;
    Ok(ok)
}
