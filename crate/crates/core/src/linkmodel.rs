//! Geometry, channel rates, delays and energies.
//!
//! Everything here is a pure function of its arguments. The connection matrix
//! `delta` and forwarding matrix `lambda` are `M x N` boolean rows; a task is
//! computed on its UAV when `delta - lambda = 1` and on the HAP when
//! `lambda = 1`.

use serde::{Deserialize, Serialize};

use crate::deployment::Deployment;
use crate::scenario::{RadioParams, Scenario};
use crate::{Error, Result};

/// 3-D distance from a ground user to a UAV hovering at `altitude`.
pub fn gu_uav_distance(gu: [f64; 2], uav: [f64; 2], altitude: f64) -> f64 {
    let dx = gu[0] - uav[0];
    let dy = gu[1] - uav[1];
    (dx * dx + dy * dy + altitude * altitude).sqrt()
}

pub fn uav_hap_distance(uav: [f64; 2], altitude: f64, hap: [f64; 3]) -> f64 {
    let dx = uav[0] - hap[0];
    let dy = uav[1] - hap[1];
    let dz = altitude - hap[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Large-scale uplink gain `g0 / d^2` through the single connected UAV.
pub fn mean_uplink_gain(connection: &[bool], distances: &[f64], ref_gain: f64) -> Result<f64> {
    let n = single_connection(connection)?;
    let d = distances
        .get(n)
        .ok_or_else(|| Error::Contract("distance vector shorter than connection row".into()))?;
    Ok(ref_gain / (d * d))
}

fn single_connection(row: &[bool]) -> Result<usize> {
    let mut hits = row.iter().enumerate().filter(|(_, &c)| c).map(|(n, _)| n);
    match (hits.next(), hits.next()) {
        (Some(n), None) => Ok(n),
        (None, _) => Err(Error::Contract("user is connected to no UAV".into())),
        (Some(_), Some(_)) => Err(Error::Contract("user is connected to more than one UAV".into())),
    }
}

/// Shannon rate of the ground-to-UAV link.
pub fn uplink_rate(gain: f64, radio: &RadioParams) -> f64 {
    let b = radio.uplink_bandwidth;
    b * (1.0 + radio.gu_tx_power * gain / (radio.noise_psd * b)).log2()
}

/// Free-space path loss `(c / (4 pi d f_c))^2`, linear.
pub fn free_space_loss(d_nh: f64, radio: &RadioParams) -> f64 {
    let x = radio.light_speed / (4.0 * std::f64::consts::PI * d_nh * radio.carrier);
    x * x
}

/// Achievable UAV-to-HAP rate for transmit power `p_h`.
pub fn u2h_rate(d_nh: f64, radio: &RadioParams, p_h: f64) -> f64 {
    let b = radio.u2h_bandwidth;
    let signal = p_h * radio.u2h_antenna_gain * free_space_loss(d_nh, radio) * radio.line_loss;
    let noise = radio.boltzmann * radio.noise_temp * b;
    b * (1.0 + signal / noise).log2()
}

pub fn compute_delay(cycles: f64, frequency: f64) -> f64 {
    cycles / frequency
}

/// Dynamic CPU energy `eps * c * L * f^2`.
pub fn compute_energy(switch_cap: f64, cycles: f64, frequency: f64) -> f64 {
    switch_cap * cycles * frequency * frequency
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub d_mn: f64,
    pub d_nh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub mean_gain: f64,
    pub sampled_gain: f64,
    pub error: f64,
    pub uplink_rate: f64,
    pub u2h_rate: f64,
    pub free_space_loss: f64,
}

/// Channel facts for one task under a fixed deployment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskChannel {
    pub uav: usize,
    pub geometry: Geometry,
    pub mean_gain: f64,
    pub uplink_rate: f64,
    pub u2h_rate: f64,
}

pub fn task_channel(m: usize, deployment: &Deployment, scenario: &Scenario) -> Result<TaskChannel> {
    let row = deployment
        .connection
        .get(m)
        .ok_or_else(|| Error::Contract(format!("no connection row for user {m}")))?;
    let n = single_connection(row)?;
    let uav = scenario
        .uavs
        .get(n)
        .ok_or_else(|| Error::Contract(format!("connection to unknown UAV {n}")))?;
    let pos = deployment.positions[n];
    let d_mn = gu_uav_distance(scenario.users[m].position, pos, uav.altitude);
    let d_nh = uav_hap_distance(pos, uav.altitude, scenario.hap.position);
    let mean_gain = scenario.radio.ref_gain / (d_mn * d_mn);
    Ok(TaskChannel {
        uav: n,
        geometry: Geometry { d_mn, d_nh },
        mean_gain,
        uplink_rate: uplink_rate(mean_gain, &scenario.radio),
        u2h_rate: u2h_rate(d_nh, &scenario.radio, uav.tx_power_to_hap),
    })
}

pub fn task_channels(deployment: &Deployment, scenario: &Scenario) -> Result<Vec<TaskChannel>> {
    (0..scenario.num_users())
        .map(|m| task_channel(m, deployment, scenario))
        .collect()
}

pub fn link_budget(channel: &TaskChannel, scenario: &Scenario, error: f64) -> LinkBudget {
    let sampled_gain = channel.mean_gain + error;
    LinkBudget {
        mean_gain: channel.mean_gain,
        sampled_gain,
        error,
        uplink_rate: uplink_rate(sampled_gain, &scenario.radio),
        u2h_rate: channel.u2h_rate,
        free_space_loss: free_space_loss(channel.geometry.d_nh, &scenario.radio),
    }
}

/// Per-task delay and energy breakdown. Compute terms carry the routing
/// indicator, so exactly one of the UAV or HAP compute fields is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub uav: usize,
    pub forwarded: bool,
    pub frequency: f64,
    pub t_uplink: f64,
    pub t_forward: f64,
    pub t_uav_compute: f64,
    pub t_hap_compute: f64,
    pub t_total: f64,
    pub e_forward: f64,
    pub e_uav_compute: f64,
    pub e_hap_compute: f64,
}

/// Builds the ledger of task `m` at frequency `f_m`. `gain_override`
/// replaces the mean uplink gain (used for sampled channel realizations).
pub fn cost_ledger(
    m: usize,
    deployment: &Deployment,
    lambda_row: &[bool],
    f_m: f64,
    scenario: &Scenario,
    gain_override: Option<f64>,
) -> Result<CostLedger> {
    if !(f_m > 0.0) {
        return Err(Error::Contract(format!("frequency of task {m} must be positive, got {f_m}")));
    }
    let channel = task_channel(m, deployment, scenario)?;
    let delta_row = &deployment.connection[m];
    if lambda_row.len() != delta_row.len() {
        return Err(Error::Contract("forwarding row has wrong length".into()));
    }
    if lambda_row.iter().zip(delta_row).any(|(&l, &d)| l && !d) {
        return Err(Error::Contract(format!(
            "task {m} is forwarded through a UAV it is not connected to"
        )));
    }
    ledger_for_channel(m, &channel, lambda_row[channel.uav], f_m, scenario, gain_override)
}

pub(crate) fn ledger_for_channel(
    m: usize,
    channel: &TaskChannel,
    forwarded: bool,
    f_m: f64,
    scenario: &Scenario,
    gain_override: Option<f64>,
) -> Result<CostLedger> {
    let task = &scenario.tasks[m];
    let uav = &scenario.uavs[channel.uav];
    let rate = match gain_override {
        Some(g) => uplink_rate(g, &scenario.radio),
        None => channel.uplink_rate,
    };
    let t_uplink = task.data_bits / rate;
    let cycles = task.cycles();
    let compute = compute_delay(cycles, f_m);
    let (t_forward, t_uav_compute, t_hap_compute, e_uav_compute, e_hap_compute);
    if forwarded {
        t_forward = task.data_bits / channel.u2h_rate;
        t_uav_compute = 0.0;
        t_hap_compute = compute;
        e_uav_compute = 0.0;
        e_hap_compute = compute_energy(scenario.hap.switch_cap, cycles, f_m);
    } else {
        t_forward = 0.0;
        t_uav_compute = compute;
        t_hap_compute = 0.0;
        e_uav_compute = compute_energy(uav.switch_cap, cycles, f_m);
        e_hap_compute = 0.0;
    }
    Ok(CostLedger {
        uav: channel.uav,
        forwarded,
        frequency: f_m,
        t_uplink,
        t_forward,
        t_uav_compute,
        t_hap_compute,
        t_total: t_uplink + t_uav_compute + t_forward + t_hap_compute,
        e_forward: uav.tx_power_to_hap * t_forward,
        e_uav_compute,
        e_hap_compute,
    })
}

/// Sums ledgers into per-UAV totals (forwarding energy plus UAV compute
/// energy of its own users) and the HAP total.
pub fn aggregate_energies(ledgers: &[CostLedger], num_uavs: usize) -> (Vec<f64>, f64) {
    let mut fwd = vec![0.0; num_uavs];
    let mut cu = vec![0.0; num_uavs];
    let mut hap = 0.0;
    for l in ledgers {
        fwd[l.uav] += l.e_forward;
        cu[l.uav] += l.e_uav_compute;
        hap += l.e_hap_compute;
    }
    let uav = fwd.iter().zip(&cu).map(|(a, b)| a + b).collect();
    (uav, hap)
}

/// Platform energy totals for a complete plan.
pub fn platform_energies(
    deployment: &Deployment,
    lambda: &[Vec<bool>],
    frequencies: &[f64],
    scenario: &Scenario,
) -> Result<(Vec<f64>, f64)> {
    let m = scenario.num_users();
    if lambda.len() != m || frequencies.len() != m {
        return Err(Error::Contract("plan size does not match the number of users".into()));
    }
    let ledgers = (0..m)
        .map(|i| cost_ledger(i, deployment, &lambda[i], frequencies[i], scenario, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_energies(&ledgers, scenario.num_uavs()))
}

/// `sum_n E_n + E_h`, summed in UAV order.
pub fn total_energy(uav: &[f64], hap: f64) -> f64 {
    uav.iter().sum::<f64>() + hap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deployment::Deployment;
    use crate::scenario::{generate_scenario, GenConfig};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn distances() {
        assert_eq!(gu_uav_distance([0.0, 0.0], [0.0, 0.0], 100.0), 100.0);
        assert_eq!(gu_uav_distance([300.0, 400.0], [0.0, 0.0], 0.0), 500.0);
        assert!(close(gu_uav_distance([300.0, 400.0], [0.0, 0.0], 100.0), 260000f64.sqrt(), 1e-15));
        assert!(close(gu_uav_distance([300.0, 400.0], [0.0, 0.0], 100.0), 509.901_951_359, 1e-11));
        let hap = [500.0, 500.0, 20000.0];
        assert_eq!(uav_hap_distance([500.0, 500.0], 100.0, hap), 19900.0);
        assert_eq!(uav_hap_distance([500.0, 500.0], 20000.0, hap), 0.0);
        assert!(close(uav_hap_distance([0.0, 0.0], 100.0, hap), 19912.558, 1e-7));
    }

    #[test]
    fn uplink_gain() {
        assert_eq!(mean_uplink_gain(&[true], &[1.0], 1e-5).unwrap(), 1e-5);
        assert!(close(mean_uplink_gain(&[false, true], &[3.0, 100.0], 1e-5).unwrap(), 1e-9, 1e-15));
        assert!(mean_uplink_gain(&[true, true], &[1.0, 1.0], 1e-5).is_err());
        assert!(mean_uplink_gain(&[false, false], &[1.0, 1.0], 1e-5).is_err());
    }

    #[test]
    fn uplink_rate_values() {
        let r = RadioParams::default();
        assert_eq!(uplink_rate(0.0, &r), 0.0);
        let snr = r.gu_tx_power * 1e-9 / (r.noise_psd * r.uplink_bandwidth);
        assert!(close(snr, 2.512e4, 1e-3));
        assert!(close(uplink_rate(1e-9, &r), 7.31e7, 2e-3));
        let mut wide = r;
        wide.uplink_bandwidth *= 2.0;
        assert!(uplink_rate(1e-9, &wide) < 2.0 * uplink_rate(1e-9, &r));
    }

    #[test]
    fn u2h_rate_values() {
        let r = RadioParams::default();
        let rate = u2h_rate(19900.0, &r, 2.0);
        assert!(close(rate, 4.58e7, 2e-3), "{rate}");
        assert!(u2h_rate(1e12, &r, 2.0) < 1e-3);
        assert!(u2h_rate(1e12, &r, 2.0) > 0.0);
        assert!(u2h_rate(19900.0, &r, 4.0) > rate);
        let ls = free_space_loss(19900.0, &r);
        assert!(ls > 0.0 && ls <= 1.0);
    }

    fn single(scenario: &Scenario) -> Deployment {
        let m = scenario.num_users();
        Deployment::from_assignment(vec![[500.0, 500.0]], &vec![0; m], 1)
    }

    #[test]
    fn local_compute_ledger() {
        let mut s = generate_scenario(1, 1, 0, &GenConfig::default()).unwrap();
        s.tasks[0].data_bits = 6e7;
        s.tasks[0].cycles_per_bit = 300.0;
        let dep = single(&s);
        let l = cost_ledger(0, &dep, &[false], 1e9, &s, None).unwrap();
        assert!(close(l.t_uav_compute, 18.0, 1e-12));
        assert!(close(l.e_uav_compute, 18.0, 1e-12));
        assert_eq!(l.t_hap_compute, 0.0);
        assert_eq!(l.e_hap_compute, 0.0);
        assert_eq!(l.t_forward, 0.0);
        let (uav, hap) = platform_energies(&dep, &[vec![false]], &[1e9], &s).unwrap();
        assert_eq!(hap, 0.0);
        assert_eq!(uav[0], l.e_uav_compute);
    }

    #[test]
    fn forwarded_ledger() {
        let s = generate_scenario(1, 1, 0, &GenConfig::default()).unwrap();
        let dep = single(&s);
        let f = 1.2e9;
        let l = cost_ledger(0, &dep, &[true], f, &s, None).unwrap();
        let t = &s.tasks[0];
        let t_h = t.data_bits / u2h_rate(19900.0, &s.radio, 2.0);
        assert!(close(l.t_forward, t_h, 1e-12));
        let (uav, hap) = platform_energies(&dep, &[vec![true]], &[f], &s).unwrap();
        assert!(close(uav[0], 2.0 * t_h, 1e-12));
        assert!(close(hap, 1e-28 * f * f * t.cycles_per_bit * t.data_bits, 1e-12));
        assert_eq!(l.e_uav_compute, 0.0);
    }

    #[test]
    fn forwarding_without_connection_is_rejected() {
        let s = generate_scenario(1, 2, 0, &GenConfig::default()).unwrap();
        let dep = Deployment::from_assignment(vec![[0.0, 0.0], [900.0, 900.0]], &[0], 2);
        assert!(cost_ledger(0, &dep, &[false, true], 1e9, &s, None).is_err());
        assert!(cost_ledger(0, &dep, &[false, false], 0.0, &s, None).is_err());
    }

    #[test]
    fn empty_plan() {
        let s = generate_scenario(1, 2, 0, &GenConfig::default()).unwrap();
        let mut empty = s.clone();
        empty.users.clear();
        empty.tasks.clear();
        empty.uncertainty.clear();
        let dep = Deployment::from_assignment(vec![[0.0, 0.0], [1.0, 1.0]], &[], 2);
        let (uav, hap) = platform_energies(&dep, &[], &[], &empty).unwrap();
        assert_eq!(uav, vec![0.0, 0.0]);
        assert_eq!(hap, 0.0);
    }

    #[test]
    fn frequency_limits() {
        let s = generate_scenario(1, 1, 3, &GenConfig::default()).unwrap();
        let dep = single(&s);
        let l = cost_ledger(0, &dep, &[false], f64::INFINITY, &s, None).unwrap();
        assert_eq!(l.t_uav_compute, 0.0);
        assert!(l.e_uav_compute.is_infinite());
    }

    #[test]
    fn override_with_mean_matches_default() {
        let s = generate_scenario(5, 2, 3, &GenConfig::default()).unwrap();
        let dep = Deployment::from_assignment(vec![[200.0, 200.0], [800.0, 800.0]], &[0, 1, 0, 1, 1], 2);
        for m in 0..5 {
            let ch = task_channel(m, &dep, &s).unwrap();
            let mut row = vec![false; 2];
            row[ch.uav] = m % 2 == 0;
            let a = cost_ledger(m, &dep, &row, 1.1e9, &s, None).unwrap();
            let b = cost_ledger(m, &dep, &row, 1.1e9, &s, Some(ch.mean_gain)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gain_scales_inverse_square() {
        for k in [0.5, 2.0, 3.0, 10.0] {
            let g = mean_uplink_gain(&[true], &[120.0], 1e-5).unwrap();
            let gk = mean_uplink_gain(&[true], &[120.0 * k], 1e-5).unwrap();
            assert!(close(gk, g / (k * k), 1e-14));
        }
    }
}
