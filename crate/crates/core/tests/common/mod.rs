//! Shared reference implementations for the integration tests.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aeromec::deployment::{canonical_order, seed_centers, WkdConfig};
use aeromec::scenario::Scenario;

fn dist3(p: [f64; 2], c: [f64; 2], h: f64) -> f64 {
    ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + h * h).sqrt()
}

/// Plain (unweighted) Lloyd iterations with the same seeding, restarts,
/// tie-breaking and empty-cluster rule as the deployment module.
/// Returns UAV positions and the connection matrix.
pub fn kmeans(s: &Scenario, cfg: &WkdConfig) -> (Vec<[f64; 2]>, Vec<Vec<bool>>) {
    let m = s.num_users();
    let n = s.num_uavs();
    let raw: Vec<[f64; 2]> = s.users.iter().map(|u| u.position).collect();
    let ones = vec![1.0; m];
    let order = canonical_order(&raw, &ones);
    let pts: Vec<[f64; 2]> = order.iter().map(|&i| raw[i]).collect();
    let h: Vec<f64> = s.uavs.iter().map(|u| u.altitude).collect();

    let mut best: Option<(f64, Vec<[f64; 2]>, Vec<usize>)> = None;
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        let mut centers = seed_centers(&pts, &ones, n, &mut rng);
        let mut assign: Vec<usize> = Vec::new();
        for _ in 0..cfg.max_iters {
            let mut next: Vec<usize> = pts
                .iter()
                .map(|&p| {
                    let mut b = 0;
                    for k in 1..n {
                        if dist3(p, centers[k], h[k]) < dist3(p, centers[b], h[b]) {
                            b = k;
                        }
                    }
                    b
                })
                .collect();
            let mut sizes = vec![0; n];
            next.iter().for_each(|&a| sizes[a] += 1);
            let mut moved = vec![false; m];
            for k in 0..n {
                if sizes[k] > 0 {
                    continue;
                }
                let mut donor: Option<(usize, f64)> = None;
                for i in 0..m {
                    if moved[i] || sizes[next[i]] < 2 {
                        continue;
                    }
                    let c = centers[next[i]];
                    let d = ((pts[i][0] - c[0]).powi(2) + (pts[i][1] - c[1]).powi(2)).sqrt();
                    if donor.map_or(true, |(_, bd)| d > bd) {
                        donor = Some((i, d));
                    }
                }
                if let Some((i, _)) = donor {
                    sizes[next[i]] -= 1;
                    next[i] = k;
                    sizes[k] += 1;
                    moved[i] = true;
                }
            }
            if next == assign {
                break;
            }
            assign = next;
            let mut shift: f64 = 0.0;
            for k in 0..n {
                let members: Vec<[f64; 2]> = (0..m).filter(|&i| assign[i] == k).map(|i| pts[i]).collect();
                if members.is_empty() {
                    continue;
                }
                let mut c = [0.0, 0.0];
                for p in &members {
                    c[0] += p[0];
                    c[1] += p[1];
                }
                let c = [c[0] / members.len() as f64, c[1] / members.len() as f64];
                let c = s.bounds.clamp(c);
                shift = shift.max(((c[0] - centers[k][0]).powi(2) + (c[1] - centers[k][1]).powi(2)).sqrt());
                centers[k] = c;
            }
            if shift < cfg.tol {
                break;
            }
        }
        let cost: f64 = (0..m).map(|i| dist3(pts[i], centers[assign[i]], h[assign[i]]).powi(2)).sum();
        if best.as_ref().map_or(true, |b| cost < b.0) {
            best = Some((cost, centers, assign));
        }
    }
    let (_, centers, assign) = best.unwrap();
    let mut conn = vec![vec![false; n]; m];
    for (k, &orig) in order.iter().enumerate() {
        conn[orig][assign[k]] = true;
    }
    (centers, conn)
}

/// Drops every line mentioning the wall-clock field.
pub fn strip_wall_time(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("wall_time_s"))
        .map(|l| format!("{l}\n"))
        .collect()
}
