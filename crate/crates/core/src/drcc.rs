//! Latency chance constraint under a mean/variance ambiguity set.
//!
//! The uplink delay is linearized around the mean gain, which turns the
//! latency condition of task `m` (scaled by its frequency `f`) into an affine
//! loss `theta * delta + theta0 <= 0` in the gain error `delta`, measured in
//! CPU cycles. The worst-case CVaR of an affine loss over all laws with mean
//! `mu` and deviation `sigma` is
//!
//! ```text
//! theta0 + theta * mu + sqrt(alpha / (1 - alpha)) * |theta| * sigma
//! ```
//!
//! and the constraint holds in the worst case iff that value is `<= 0`. Since
//! every term is linear in `f`, the smallest admissible frequency has a closed
//! form ([`min_feasible_frequency`]).
//!
//! [`oracle`] minimizes the conic program numerically and serves as the
//! independent check of the closed form.

use serde::{Deserialize, Serialize};

use crate::deployment::Deployment;
use crate::linkmodel::{task_channel, TaskChannel};
use crate::scenario::{RadioParams, Scenario, TaskSpec};
use crate::{Error, Result};

/// Affine loss of one task at a given frequency. The cycle terms add up to
/// `theta0`; `theta = -f * slope_per_hz` is never positive for `f >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineLossCoeffs {
    pub frequency: f64,
    /// Magnitude of the uplink delay sensitivity to the gain error, s per gain unit.
    pub slope_per_hz: f64,
    pub tx_cycles: f64,
    pub compute_cycles: f64,
    pub forward_cycles: f64,
    pub deadline_cycles: f64,
}

impl AffineLossCoeffs {
    pub fn theta(&self) -> f64 {
        -self.frequency * self.slope_per_hz
    }

    pub fn theta0(&self) -> f64 {
        self.tx_cycles + self.compute_cycles + self.forward_cycles + self.deadline_cycles
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub alpha: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// `sqrt(alpha / (1 - alpha))`.
pub fn risk_multiplier(alpha: f64) -> f64 {
    (alpha / (1.0 - alpha)).sqrt()
}

/// First-order sensitivity magnitude `|d t_tx / d g|` at the mean gain.
pub fn taylor_slope(mean_gain: f64, data_bits: f64, radio: &RadioParams) -> Result<f64> {
    if !(mean_gain > 0.0) {
        return Err(Error::Modeling(format!(
            "uplink delay cannot be linearized at mean gain {mean_gain}"
        )));
    }
    let nb = radio.noise_psd * radio.uplink_bandwidth;
    let p = radio.gu_tx_power;
    let ln = (p * mean_gain / nb).ln_1p();
    Ok((data_bits * std::f64::consts::LN_2 / radio.uplink_bandwidth) * p / ((nb + p * mean_gain) * ln * ln))
}

/// Nominal delays of a task that do not depend on its frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalDelays {
    pub tx: f64,
    pub forward: f64,
    pub slope: f64,
}

pub fn nominal_delays(task: &TaskSpec, channel: &TaskChannel, forwarded: bool, radio: &RadioParams) -> Result<NominalDelays> {
    Ok(NominalDelays {
        tx: task.data_bits / channel.uplink_rate,
        forward: if forwarded {
            task.data_bits / channel.u2h_rate
        } else {
            0.0
        },
        slope: taylor_slope(channel.mean_gain, task.data_bits, radio)?,
    })
}

pub fn coeffs_for_channel(
    task: &TaskSpec,
    channel: &TaskChannel,
    forwarded: bool,
    frequency: f64,
    radio: &RadioParams,
) -> Result<AffineLossCoeffs> {
    let d = nominal_delays(task, channel, forwarded, radio)?;
    Ok(AffineLossCoeffs {
        frequency,
        slope_per_hz: d.slope,
        tx_cycles: frequency * d.tx,
        compute_cycles: task.cycles(),
        forward_cycles: frequency * d.forward,
        deadline_cycles: -task.deadline * frequency,
    })
}

pub fn taylor_loss_coeffs(
    m: usize,
    forwarded: bool,
    frequency: f64,
    deployment: &Deployment,
    scenario: &Scenario,
) -> Result<AffineLossCoeffs> {
    let channel = task_channel(m, deployment, scenario)?;
    coeffs_for_channel(&scenario.tasks[m], &channel, forwarded, frequency, &scenario.radio)
}

/// Closed-form worst-case CVaR of `theta * xi + theta0` over laws of `xi`
/// with mean `mu` and standard deviation `sigma`.
pub fn worst_case_cvar(theta: f64, theta0: f64, mu: f64, sigma: f64, alpha: f64) -> f64 {
    theta0 + theta * mu + risk_multiplier(alpha) * theta.abs() * sigma
}

pub fn coeffs_cvar(c: &AffineLossCoeffs, risk: &RiskConfig) -> f64 {
    worst_case_cvar(c.theta(), c.theta0(), risk.mu, risk.sigma, risk.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrequencyBound {
    /// Smallest frequency meeting the worst-case constraint, Hz.
    Feasible(f64),
    /// No finite frequency works; `margin` is the non-positive time budget
    /// left for computing, seconds.
    Infeasible { margin: f64 },
}

impl FrequencyBound {
    pub fn frequency(&self) -> Option<f64> {
        match *self {
            FrequencyBound::Feasible(f) => Some(f),
            FrequencyBound::Infeasible { .. } => None,
        }
    }
}

/// Robust time budget left for computing:
/// `T + kappa*mu - t_tx - t_fwd - sqrt(a/(1-a)) * kappa * sigma`.
pub fn compute_budget(task: &TaskSpec, delays: &NominalDelays, risk: &RiskConfig) -> f64 {
    task.deadline + delays.slope * risk.mu
        - delays.tx
        - delays.forward
        - risk_multiplier(risk.alpha) * delays.slope * risk.sigma
}

pub fn frequency_bound(task: &TaskSpec, delays: &NominalDelays, risk: &RiskConfig) -> FrequencyBound {
    let budget = compute_budget(task, delays, risk);
    if budget > 0.0 {
        FrequencyBound::Feasible(task.cycles() / budget)
    } else {
        FrequencyBound::Infeasible { margin: budget }
    }
}

/// Smallest CPU frequency for task `m` that keeps its worst-case CVaR latency
/// loss non-positive.
pub fn min_feasible_frequency(
    m: usize,
    forwarded: bool,
    deployment: &Deployment,
    scenario: &Scenario,
    risk: &RiskConfig,
) -> Result<FrequencyBound> {
    let channel = task_channel(m, deployment, scenario)?;
    let task = &scenario.tasks[m];
    let delays = nominal_delays(task, &channel, forwarded, &scenario.radio)?;
    Ok(frequency_bound(task, &delays, risk))
}

/// Per-task moments with the deviation resolved against the mean gain.
pub fn risk_for_task(scenario: &Scenario, m: usize, mean_gain: f64) -> RiskConfig {
    let u = &scenario.uncertainty[m];
    RiskConfig {
        alpha: scenario.tasks[m].confidence,
        mu: u.mean,
        sigma: u.resolve_stdev(mean_gain),
    }
}

pub mod oracle {
    //! Numerical reference values for the worst-case CVaR.
    //!
    //! [`cvar_socp_oracle`] minimizes
    //! `beta + (e + s) / (1 - alpha)` subject to
    //! `e - theta0 + beta + q - theta*mu - z >= 0`, `e >= 0`, `z > 0` and
    //! `||(q, theta*sigma, z - s)|| <= z + s`, with nested golden-section
    //! searches over `log z`, `q` and `beta`. For fixed `(beta, q, z)` the
    //! smallest feasible `e` and `s` are read off their constraints (the cone
    //! boundary is located by bisection).

    use crate::{Error, Result};

    const GOLDEN: f64 = 0.618_033_988_749_894_8;

    fn bracket(f: &mut dyn FnMut(f64) -> f64, x0: f64, step: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let mut a = x0.clamp(lo, hi);
        let mut b = (a + step).clamp(lo, hi);
        let (mut fa, mut fb) = (f(a), f(b));
        if fb > fa {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        let mut width = b - a;
        for _ in 0..400 {
            width *= 2.0;
            let c = (b + width).clamp(lo, hi);
            let fc = f(c);
            if fc >= fb || c == b {
                return Ok(if a < c { (a, c) } else { (c, a) });
            }
            a = b;
            b = c;
            fb = fc;
        }
        Err(Error::Modeling("oracle failed to bracket a minimum".into()))
    }

    fn golden(f: &mut dyn FnMut(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
        let mut x1 = b - GOLDEN * (b - a);
        let mut x2 = a + GOLDEN * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..300 {
            if (b - a).abs() <= rel_tol * (1.0 + x1.abs().max(x2.abs())) {
                break;
            }
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLDEN * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLDEN * (b - a);
                f2 = f(x2);
            }
        }
        if f1 <= f2 {
            (x1, f1)
        } else {
            (x2, f2)
        }
    }

    fn minimize(f: &mut dyn FnMut(f64) -> f64, x0: f64, step: f64, lo: f64, hi: f64, rel_tol: f64) -> Result<(f64, f64)> {
        let (a, b) = bracket(f, x0, step, lo, hi)?;
        Ok(golden(f, a, b, rel_tol))
    }

    fn cone_holds(q: f64, r: f64, z: f64, s: f64) -> bool {
        let d = z - s;
        (q * q + r * r + d * d).sqrt() <= z + s
    }

    /// Smallest `s` with `||(q, r, z - s)|| <= z + s`.
    fn smallest_cone_s(q: f64, r: f64, z: f64) -> f64 {
        let mut hi = 1.0f64.max(z);
        while !cone_holds(q, r, z, hi) {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        if cone_holds(q, r, z, lo) {
            return lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if cone_holds(q, r, z, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Numerical infimum of the worst-case CVaR conic program.
    pub fn cvar_socp_oracle(theta: f64, theta0: f64, mu: f64, sigma: f64, alpha: f64, tol: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) || sigma < 0.0 {
            return Err(Error::Config("oracle needs 0 < alpha < 1 and sigma >= 0".into()));
        }
        let r = theta * sigma;
        let inv = 1.0 / (1.0 - alpha);
        let shift = theta0 + theta * mu;
        let scale = 1.0 + shift.abs() + r.abs();

        let mut err = None;
        let mut over_z = |log_z: f64| -> f64 {
            let z = log_z.exp();
            let mut over_q = |q: f64| -> f64 {
                let s = smallest_cone_s(q, r, z);
                let mut over_beta = |beta: f64| -> f64 {
                    let e = (shift - beta - q + z).max(0.0);
                    beta + inv * (e + s)
                };
                match minimize(&mut over_beta, shift, scale, f64::NEG_INFINITY, f64::INFINITY, tol * 1e-3) {
                    Ok((_, v)) => v,
                    Err(_) => f64::INFINITY,
                }
            };
            match minimize(&mut over_q, 0.0, scale, f64::NEG_INFINITY, f64::INFINITY, tol * 1e-2) {
                Ok((_, v)) => v,
                Err(e) => {
                    err = Some(e);
                    f64::INFINITY
                }
            }
        };
        let (_, value) = minimize(&mut over_z, scale.ln(), 1.0, -60.0, 60.0, tol * 1e-1)?;
        if let Some(e) = err {
            return Err(e);
        }
        if !value.is_finite() {
            return Err(Error::Modeling("oracle did not converge".into()));
        }
        Ok(value)
    }

    /// Two-atom law with mean `mu`, deviation `sigma` and mass `p_high` on
    /// the upper atom. Returns `[(value, probability); 2]`, lower atom first.
    pub fn two_point_law(mu: f64, sigma: f64, p_high: f64) -> [(f64, f64); 2] {
        let hi = mu + sigma * ((1.0 - p_high) / p_high).sqrt();
        let lo = mu - sigma * (p_high / (1.0 - p_high)).sqrt();
        [(lo, 1.0 - p_high), (hi, p_high)]
    }

    /// Exact CVaR of a finitely supported loss via
    /// `min_beta beta + E[(L - beta)^+] / (1 - alpha)`; the minimum sits on an atom.
    pub fn discrete_cvar(atoms: &[(f64, f64)], alpha: f64) -> f64 {
        atoms
            .iter()
            .map(|&(beta, _)| {
                let tail: f64 = atoms.iter().map(|&(v, p)| p * (v - beta).max(0.0)).sum();
                beta + tail / (1.0 - alpha)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// CVaR of `theta * xi + theta0` under a two-point law of `xi`.
    pub fn two_point_cvar(theta: f64, theta0: f64, mu: f64, sigma: f64, alpha: f64, p_high: f64) -> f64 {
        let law = two_point_law(mu, sigma, p_high);
        let loss: Vec<(f64, f64)> = law.iter().map(|&(x, p)| (theta * x + theta0, p)).collect();
        discrete_cvar(&loss, alpha)
    }
}
