//! Martingale part of the empirical dynamics tested against `phi`.

use crate::error::{Error, Result};
use crate::fokker_planck::TestFunction;
use crate::model::MeanFieldCoefficients;
use crate::particle::Trajectory;
use crate::torus::TorusPoint;

/// `M_t = int_0^t (1/N) sum_i sigma_2(V_i) d_v phi(X_i, V_i) dB_i` at every step.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingalePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub sup_abs: f64,
}

/// Ito sums over the recorded Brownian increments of `trajectory`.
pub fn martingale_functional<C: MeanFieldCoefficients + ?Sized>(
    trajectory: &Trajectory,
    phi: &TestFunction,
    coeffs: &C,
) -> Result<MartingalePath> {
    let steps = trajectory
        .steps
        .as_ref()
        .ok_or_else(|| Error::Config("trajectory was recorded without Brownian increments".into()))?;
    let n = trajectory.positions.len() as f64;
    let mut times = Vec::with_capacity(steps.len() + 1);
    let mut values = Vec::with_capacity(steps.len() + 1);
    times.push(trajectory.snapshots.first().map_or(0.0, |s| s.time));
    values.push(0.0);
    let mut m = 0.0;
    let mut sup_abs: f64 = 0.0;
    for rec in steps {
        let incr: f64 = trajectory
            .positions
            .iter()
            .zip(rec.start.iter().zip(&rec.dw))
            .map(|(x, (&v, &dw))| {
                let v = TorusPoint::wrap(v);
                coeffs.diffusion(v) * phi.dv(x, v) * dw
            })
            .sum();
        m += incr / n;
        sup_abs = sup_abs.max(m.abs());
        times.push(rec.time + trajectory.dt);
        values.push(m);
    }
    Ok(MartingalePath { times, values, sup_abs })
}
