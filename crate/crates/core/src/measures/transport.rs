//! Exact discrete optimal transport on `D x T` by successive shortest paths.

use crate::error::{Error, Result};
use crate::torus::torus_dist;

use super::WeightedAtomMeasure;

/// Largest combined support accepted by [`wasserstein1_joint`].
pub const JOINT_ATOM_BUDGET: usize = 4000;

const EPS: f64 = 1e-15;

/// Minimum-cost transport of `supply` onto `demand` with dense cost matrix
/// `cost[i * demand.len() + j]`.
///
/// Runs successive shortest augmenting paths with Dijkstra on reduced costs.
/// Both sides are expected to carry (numerically) equal mass; transport stops
/// when either side is exhausted.
pub fn min_cost_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let n = supply.len();
    let m = demand.len();
    assert_eq!(cost.len(), n * m);
    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    let mut flow = vec![0.0; n * m];
    let mut pot = vec![0.0; n + m];
    let mut dist = vec![f64::INFINITY; n + m];
    let mut parent = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];
    let mut total = 0.0;

    loop {
        let remaining: f64 = sup.iter().sum();
        if remaining <= EPS || dem.iter().all(|&d| d <= EPS) {
            break;
        }
        dist.fill(f64::INFINITY);
        parent.fill(usize::MAX);
        done.fill(false);
        for i in 0..n {
            if sup[i] > EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = None;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (v, (&d, &f)) in dist.iter().zip(&done).enumerate() {
                if !f && d < best {
                    best = d;
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n {
                let j = u - n;
                if dem[j] > EPS {
                    target = Some(u);
                    break;
                }
                // Backward edges j -> i carry existing flow.
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= EPS {
                        continue;
                    }
                    let nd = best - cost[i * m + j] + pot[u] - pot[i];
                    if nd < dist[i] {
                        dist[i] = nd;
                        parent[i] = u;
                    }
                }
            } else {
                let row = &cost[u * m..(u + 1) * m];
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let nd = best + row[j] + pot[u] - pot[v];
                    if nd < dist[v] {
                        dist[v] = nd;
                        parent[v] = u;
                    }
                }
            }
        }
        let Some(t) = target else { break };
        let dt = dist[t];
        for v in 0..n + m {
            if done[v] {
                pot[v] += dist[v].min(dt);
            } else {
                pot[v] += dt;
            }
        }
        // Bottleneck along the path.
        let mut amount = dem[t - n];
        let mut v = t;
        while parent[v] != usize::MAX {
            let p = parent[v];
            if v < n {
                amount = amount.min(flow[v * m + (p - n)]);
            }
            v = p;
        }
        amount = amount.min(sup[v]);
        let source = v;
        let mut v = t;
        while parent[v] != usize::MAX {
            let p = parent[v];
            if v >= n {
                flow[p * m + (v - n)] += amount;
                total += amount * cost[p * m + (v - n)];
            } else {
                flow[v * m + (p - n)] -= amount;
                total -= amount * cost[v * m + (p - n)];
            }
            v = p;
        }
        sup[source] -= amount;
        dem[t - n] -= amount;
    }
    total.max(0.0)
}

/// Exact `W_1` on `D x T` under the ground metric `|x - x'|_1 + d_T(v, v')`.
pub fn wasserstein1_joint(mu: &WeightedAtomMeasure, nu: &WeightedAtomMeasure) -> Result<f64> {
    let atoms = mu.len() + nu.len();
    if atoms > JOINT_ATOM_BUDGET {
        return Err(Error::Budget { atoms, budget: JOINT_ATOM_BUDGET });
    }
    let cost: Vec<f64> = mu
        .atoms()
        .iter()
        .flat_map(|(x, v)| nu.atoms().iter().map(move |(y, w)| x.dist_l1(y) + torus_dist(*v, *w)))
        .collect();
    Ok(min_cost_transport(mu.weights(), nu.weights(), &cost))
}
