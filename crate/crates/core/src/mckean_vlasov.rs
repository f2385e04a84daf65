//! Decoupled single-neuron SDE driven by a precomputed PDE solution.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fokker_planck::{FluxScheme, FpOperator, FpSolution};
use crate::model::{categorical, MeanFieldCoefficients, Position};
use crate::particle::steps_for;
use crate::rng::{stream, Purpose};
use crate::torus::{TorusPoint, PERIOD};

/// Largest allowed ratio between snapshot spacing and the Euler step.
pub const MAX_SNAPSHOT_STRIDE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MkvSample {
    pub sample: usize,
    pub x: Position,
    pub v_canonical: f64,
    pub t: f64,
}

/// Interaction field of every atom, frozen on each snapshot interval.
struct DrivingField {
    times: Vec<f64>,
    /// `fields[j][m]`
    fields: Vec<Vec<f64>>,
}

impl DrivingField {
    fn new<C: MeanFieldCoefficients + ?Sized>(path: &FpSolution, coeffs: &C) -> Self {
        let first = &path.snapshots[0];
        let op = FpOperator::new(first, coeffs, FluxScheme::default());
        DrivingField {
            times: path.times(),
            fields: path.snapshots.iter().map(|s| op.fields(&s.firing_masses(coeffs))).collect(),
        }
    }

    /// Field at atom `m` on the snapshot interval containing `t`.
    fn at(&self, m: usize, t: f64) -> f64 {
        let j = self.times.partition_point(|&s| s <= t + 1e-12).saturating_sub(1);
        self.fields[j][m]
    }
}

/// Draws from a piecewise-constant density on uniform cells.
fn sample_cells<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> f64 {
    let h = PERIOD / row.len() as f64;
    let masses: Vec<f64> = row.iter().map(|r| r * h).collect();
    let total: f64 = masses.iter().sum();
    let k = categorical(&masses, rng.random::<f64>() * total);
    TorusPoint::wrap((k as f64 + rng.random::<f64>()) * h).value()
}

/// Euler paths of `dV = b(mu_t)(X, V) dt + sigma_2(V) dB` with `X` drawn from
/// the atoms of `path` and `V_0` from the matching initial row.
///
/// The drift uses the snapshot at or before the current step start. Every
/// sample time must be a multiple of `dt` within the path horizon.
pub fn mkv_simulate<C: MeanFieldCoefficients + ?Sized>(
    path: &FpSolution,
    coeffs: &C,
    n_samples: usize,
    seed: u64,
    dt: f64,
    sample_times: &[f64],
) -> Result<Vec<MkvSample>> {
    let first = path.snapshots.first().ok_or_else(|| Error::Config("empty driving path".into()))?;
    if n_samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {dt}")));
    }
    let horizon = path.snapshots.last().unwrap().time;
    let times = path.times();
    if let Some(gap) = times.windows(2).map(|w| w[1] - w[0]).reduce(f64::max) {
        if gap > MAX_SNAPSHOT_STRIDE * dt * (1.0 + 1e-9) {
            return Err(Error::Config(format!("snapshot spacing {gap} exceeds {MAX_SNAPSHOT_STRIDE} steps of {dt}")));
        }
    }
    let mut targets = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        if t > horizon * (1.0 + 1e-12) + 1e-12 || t < first.time {
            return Err(Error::Range { requested: t, horizon });
        }
        targets.push(steps_for(t - first.time, dt, "sample time")?);
    }
    let n_steps = targets.iter().copied().max().unwrap_or(0);
    let field = DrivingField::new(path, coeffs);
    let t0 = first.time;
    let sq = dt.sqrt();

    let per_sample: Vec<Vec<MkvSample>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(Purpose::McKeanVlasov, seed, 0, i as u64);
            let m = categorical(&first.weights, rng.random::<f64>());
            let x = first.positions[m];
            let mut v = sample_cells(&first.rho[m], &mut rng);
            let mut out = Vec::with_capacity(targets.len());
            let emit = |step: usize, v: f64, out: &mut Vec<MkvSample>| {
                for (&target, &t) in targets.iter().zip(sample_times) {
                    if target == step {
                        out.push(MkvSample { sample: i, x, v_canonical: TorusPoint::wrap(v).value(), t });
                    }
                }
            };
            emit(0, v, &mut out);
            for step in 0..n_steps {
                let t = t0 + step as f64 * dt;
                let c = TorusPoint::wrap(v);
                let r = coeffs.receiving(c);
                let b = coeffs.self_drift(c) + if r == 0.0 { 0.0 } else { r * field.at(m, t) };
                let z: f64 = rng.sample(StandardNormal);
                v = v + b * dt + coeffs.diffusion(c) * sq * z;
                emit(step + 1, v, &mut out);
            }
            out
        })
        .collect();
    Ok(per_sample.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fokker_planck::{discretize_initial, fp_solve, uniform_times, FpOptions};
    use crate::measures::{wasserstein1_v, CircleMeasure};
    use crate::model::{Domain, InitialLaws, LambdaMode, ModelCoefficients, PositionLaw, ThetaKernel, VoltageDensity};

    fn path(coeffs: &ModelCoefficients, rho0: VoltageDensity, t_end: f64) -> FpSolution {
        let laws = InitialLaws { domain: Domain::default(), nu: PositionLaw::default(), rho0 };
        let init = discretize_initial(&laws, 20, 200, 1).unwrap();
        fp_solve(&init, t_end, coeffs, &uniform_times(t_end, (t_end / 0.01).round() as usize), FpOptions::default())
            .unwrap()
    }

    #[test]
    fn small_noise_without_drift_stays_near_start() {
        let c = ModelCoefficients {
            epsilon: 1e-4,
            lambda_mode: LambdaMode::Zero,
            theta: ThetaKernel::Constant { theta0: 0.0 },
            ..ModelCoefficients::default()
        };
        let p = path(&c, VoltageDensity::Uniform, 1.0);
        let s = mkv_simulate(&p, &c, 200, 3, 0.005, &[0.0, 1.0]).unwrap();
        let bound = 5.0 * (2.0 * 1e-4 * 1.0f64).sqrt();
        for pair in s.chunks(2) {
            let moved =
                crate::torus::torus_dist(TorusPoint::wrap(pair[0].v_canonical), TorusPoint::wrap(pair[1].v_canonical));
            assert!(moved <= bound, "moved {moved}");
            assert_eq!(pair[0].x, pair[1].x);
        }
    }

    #[test]
    fn positions_come_from_the_atom_list() {
        let c = ModelCoefficients::default().with_horizon(0.2);
        let p = path(&c, VoltageDensity::Uniform, 0.2);
        let s = mkv_simulate(&p, &c, 100, 9, 0.002, &[0.2]).unwrap();
        assert!(s.iter().all(|x| p.snapshots[0].positions.contains(&x.x)));
    }

    #[test]
    fn times_beyond_the_path_are_range_errors() {
        let c = ModelCoefficients::default().with_horizon(0.2);
        let p = path(&c, VoltageDensity::Uniform, 0.2);
        assert!(matches!(mkv_simulate(&p, &c, 10, 1, 0.002, &[0.3]), Err(Error::Range { .. })));
        assert!(matches!(mkv_simulate(&p, &c, 10, 1, 1e-4, &[0.1]), Err(Error::Config(_))));
    }

    #[test]
    fn samples_are_deterministic() {
        let c = ModelCoefficients::default().with_horizon(0.2);
        let p = path(&c, VoltageDensity::Uniform, 0.2);
        let a = mkv_simulate(&p, &c, 50, 4, 0.002, &[0.1, 0.2]).unwrap();
        let b = mkv_simulate(&p, &c, 50, 4, 0.002, &[0.1, 0.2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn law_tracks_the_pde_without_interaction() {
        let c = ModelCoefficients {
            theta: ThetaKernel::Constant { theta0: 0.0 },
            sigma_bump: 0.5,
            ..ModelCoefficients::default()
        };
        let p = path(&c, VoltageDensity::GaussianBump { center: 0.8, width: 0.1 }, 0.5);
        let s = mkv_simulate(&p, &c, 4000, 2, 0.001, &[0.5]).unwrap();
        let emp = CircleMeasure::atoms(s.iter().map(|x| (x.v_canonical, 1.0 / 4000.0)).collect());
        let w = wasserstein1_v(&emp, &CircleMeasure::Cells(p.snapshots.last().unwrap().v_density())).unwrap();
        assert!(w < 0.03, "W1 {w}");
    }
}
