//! Finite-volume solver for the nonlinear Fokker-Planck equation on `D x T`.
//!
//! Positions never move, so the measure is stored as `M` weighted position
//! atoms, each carrying a conditional voltage density on `K` uniform cells.
//! The rows evolve as one-dimensional advection-diffusion equations coupled
//! only through the firing masses `F_m`.

mod residual;
mod semigroup;
mod test_function;

pub use residual::{mild_residual, weak_residual_phi};
pub use semigroup::{semigroup_apply, semigroup_path, DiffusionSemigroup, SemigroupGrid};
pub use test_function::{SpatialFactor, TestFunction, VoltageFactor};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{CircleMeasure, PhaseMeasure, WeakTerms};
use crate::model::{InitialLaws, MeanFieldCoefficients, Position, PositionLaw, VoltageDensity};
use crate::rng::{stream, Purpose};
use crate::torus::{TorusPoint, PERIOD};

/// Safety factor of the explicit step-size bound.
pub const CFL_SAFETY: f64 = 0.4;

/// Face flux discretization of the advective part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxScheme {
    /// Exponentially fitted (Scharfetter-Gummel) flux of `b rho - (D rho)'`.
    #[default]
    ExponentialFit,
    /// First-order upwind advection plus central diffusion.
    Upwind,
}

/// Conditional voltage densities on `M` position atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalGridDensity {
    pub positions: Vec<Position>,
    pub weights: Vec<f64>,
    /// `rho[m][k]`: density of `v` given `x_m` on cell `k`.
    pub rho: Vec<Vec<f64>>,
    pub time: f64,
}

impl ConditionalGridDensity {
    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn n_cells(&self) -> usize {
        self.rho.first().map_or(0, Vec::len)
    }

    pub fn cell_width(&self) -> f64 {
        PERIOD / self.n_cells() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let h = self.cell_width();
        (0..self.n_cells()).map(|k| (k as f64 + 0.5) * h).collect()
    }

    /// `h sum_k rho[m][k]` for every row.
    pub fn row_masses(&self) -> Vec<f64> {
        let h = self.cell_width();
        self.rho.iter().map(|r| r.iter().sum::<f64>() * h).collect()
    }

    /// Largest deviation of a row mass from one.
    pub fn max_mass_error(&self) -> f64 {
        self.row_masses().iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Voltage marginal `sum_m p_m rho[m]`.
    pub fn v_density(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cells()];
        for (row, &p) in self.rho.iter().zip(&self.weights) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += p * r;
            }
        }
        out
    }

    /// Firing masses `F_m`.
    pub fn firing_masses<C: MeanFieldCoefficients + ?Sized>(&self, coeffs: &C) -> Vec<f64> {
        self.rho.par_iter().map(|r| coeffs.emitting_mass(r)).collect()
    }

    /// Population firing mass `sum_m p_m F_m`.
    pub fn total_firing_mass<C: MeanFieldCoefficients + ?Sized>(&self, coeffs: &C) -> f64 {
        self.firing_masses(coeffs).iter().zip(&self.weights).map(|(f, p)| f * p).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_atoms();
        if m == 0 || self.weights.len() != m || self.rho.len() != m {
            return Err(Error::Contract("grid density needs matching nonempty atom, weight and row lists".into()));
        }
        let k = self.n_cells();
        if k < 2 || self.rho.iter().any(|r| r.len() != k) {
            return Err(Error::Contract("all rows need the same number (>= 2) of cells".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("atom weights must be a probability vector, sum {total}")));
        }
        if self.rho.iter().flatten().any(|&r| !(r >= 0.0)) {
            return Err(Error::Contract("densities must be nonnegative".into()));
        }
        let err = self.max_mass_error();
        if err > 1e-10 {
            return Err(Error::Contract(format!("row mass deviates from 1 by {err}")));
        }
        Ok(())
    }

    /// The atom list as a position law, for particles sharing this discretization.
    pub fn position_law(&self) -> PositionLaw {
        PositionLaw::Atoms { points: self.positions.clone(), weights: Some(self.weights.clone()), sequential: false }
    }
}

/// Atoms and initial rows of the product initial law `nu x rho0`.
///
/// An explicit atom list for `nu` is copied with its weights and `m` is
/// ignored; otherwise `m` atoms are drawn independently with weight `1/m`.
pub fn discretize_initial(laws: &InitialLaws, m: usize, k: usize, seed: u64) -> Result<ConditionalGridDensity> {
    laws.validate()?;
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 voltage cells, got {k}")));
    }
    let (positions, weights) = match &laws.nu {
        PositionLaw::Atoms { points, weights, .. } => {
            let pos: Vec<Position> = points.clone();
            let w = match weights {
                Some(w) => {
                    let s: f64 = w.iter().sum();
                    w.iter().map(|x| x / s).collect()
                }
                None => vec![1.0 / pos.len() as f64; pos.len()],
            };
            (pos, w)
        }
        law => {
            if m < 2 {
                return Err(Error::Config(format!("need at least 2 position atoms, got {m}")));
            }
            let pos = (0..m)
                .map(|i| {
                    let mut rng = stream(Purpose::PdeAtoms, seed, 0, i as u64);
                    law.sample(i, &laws.domain, &mut rng)
                })
                .collect();
            (pos, vec![1.0 / m as f64; m])
        }
    };
    let h = PERIOD / k as f64;
    let edges: Vec<f64> = (0..=k).map(|i| i as f64 * h).collect();
    let row: Vec<f64> = if laws.rho0 == VoltageDensity::Uniform {
        vec![1.0 / PERIOD; k]
    } else {
        let masses = laws.rho0.interval_masses(&edges);
        let total: f64 = masses.iter().sum();
        masses.iter().map(|x| x / (total * h)).collect()
    };
    Ok(ConditionalGridDensity { rho: vec![row; positions.len()], positions, weights, time: 0.0 })
}

/// Largest stable explicit step on cells of width `h`.
pub fn cfl_bound<C: MeanFieldCoefficients + ?Sized>(h: f64, coeffs: &C) -> f64 {
    let s2 = coeffs.diffusion_bound().powi(2);
    let b = coeffs.drift_bound();
    let diff = if s2 > 0.0 { h * h / s2 } else { f64::INFINITY };
    let adv = if b > 0.0 { h / b } else { f64::INFINITY };
    CFL_SAFETY * diff.min(adv)
}

/// Bernoulli function `z / (e^z - 1)`.
#[inline]
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Precomputed per-grid data for repeated steps of one discretization.
#[derive(Clone, Debug)]
pub struct FpOperator {
    k: usize,
    h: f64,
    scheme: FluxScheme,
    /// `lambda_2` at cell centers.
    lambda: Vec<f64>,
    /// Receiving gate at cell centers.
    gate: Vec<f64>,
    /// `sigma^2 / 2` at cell centers.
    diff: Vec<f64>,
    /// `theta(x_m, x_m') p_m'`, row-major.
    coupling: Vec<f64>,
    m: usize,
    dt_max: f64,
}

impl FpOperator {
    pub fn new<C: MeanFieldCoefficients + ?Sized>(
        state: &ConditionalGridDensity,
        coeffs: &C,
        scheme: FluxScheme,
    ) -> Self {
        let k = state.n_cells();
        let h = PERIOD / k as f64;
        let centers = state.centers();
        let tp = |v: f64| TorusPoint::wrap(v);
        let kernel = coeffs.kernel();
        let m = state.n_atoms();
        let coupling = if kernel.is_zero() {
            Vec::new()
        } else {
            state
                .positions
                .par_iter()
                .flat_map_iter(|x| state.positions.iter().zip(&state.weights).map(move |(y, p)| kernel.eval(x, y) * p))
                .collect()
        };
        FpOperator {
            k,
            h,
            scheme,
            lambda: centers.iter().map(|&v| coeffs.self_drift(tp(v))).collect(),
            gate: centers.iter().map(|&v| coeffs.receiving(tp(v))).collect(),
            diff: centers.iter().map(|&v| 0.5 * coeffs.diffusion(tp(v)).powi(2)).collect(),
            coupling,
            m,
            dt_max: cfl_bound(h, coeffs),
        }
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max
    }

    pub fn scheme(&self) -> FluxScheme {
        self.scheme
    }

    /// Interaction fields `I_m = sum_m' theta(x_m, x_m') p_m' F_m'`, summed in
    /// index order.
    pub fn fields(&self, firing: &[f64]) -> Vec<f64> {
        if self.coupling.is_empty() {
            return vec![0.0; self.m];
        }
        self.coupling.par_chunks(self.m).map(|row| row.iter().zip(firing).map(|(c, f)| c * f).sum()).collect()
    }

    /// Drift at cell centers of a row with interaction field `field`.
    #[inline]
    pub fn drift(&self, k: usize, field: f64) -> f64 {
        let g = self.gate[k];
        self.lambda[k] + if g == 0.0 { 0.0 } else { g * field }
    }

    /// Advances one row by `dt` with a frozen interaction field.
    pub fn step_row(&self, row: &mut [f64], field: f64, dt: f64, flux: &mut Vec<f64>) {
        let k = self.k;
        let h = self.h;
        flux.clear();
        flux.extend((0..k).map(|i| {
            let j = if i + 1 == k { 0 } else { i + 1 };
            let b = 0.5 * (self.drift(i, field) + self.drift(j, field));
            let (di, dj) = (self.diff[i], self.diff[j]);
            let (ui, uj) = (di * row[i], dj * row[j]);
            match self.scheme {
                FluxScheme::ExponentialFit => {
                    let d = 0.5 * (di + dj);
                    if d > 0.0 {
                        let z = b * h / d;
                        (bernoulli(-z) * ui - bernoulli(z) * uj) / h
                    } else {
                        b.max(0.0) * row[i] + b.min(0.0) * row[j]
                    }
                }
                FluxScheme::Upwind => b.max(0.0) * row[i] + b.min(0.0) * row[j] - (uj - ui) / h,
            }
        }));
        let r = dt / h;
        let last = flux[k - 1];
        for i in 0..k {
            let left = if i == 0 { last } else { flux[i - 1] };
            row[i] -= r * (flux[i] - left);
        }
    }

    /// One explicit step of the full nonlinear system.
    pub fn step<C: MeanFieldCoefficients + ?Sized>(
        &self,
        state: &mut ConditionalGridDensity,
        dt: f64,
        coeffs: &C,
    ) -> Result<()> {
        if !(dt > 0.0) || dt > self.dt_max * (1.0 + 1e-12) {
            return Err(Error::StepSize { dt, bound: self.dt_max });
        }
        let firing = if self.coupling.is_empty() { Vec::new() } else { state.firing_masses(coeffs) };
        let fields = self.fields(&firing);
        state
            .rho
            .par_iter_mut()
            .zip(fields.par_iter())
            .for_each_init(|| Vec::with_capacity(self.k), |buf, (row, &f)| self.step_row(row, f, dt, buf));
        state.time += dt;
        Ok(())
    }
}

/// One explicit conservative step; fails if `dt` exceeds the stability bound.
pub fn fp_step<C: MeanFieldCoefficients + ?Sized>(
    state: &ConditionalGridDensity,
    dt: f64,
    coeffs: &C,
) -> Result<ConditionalGridDensity> {
    let mut next = state.clone();
    FpOperator::new(state, coeffs, FluxScheme::default()).step(&mut next, dt, coeffs)?;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpOptions {
    pub scheme: FluxScheme,
    /// Requested step; defaults to the stability bound. Steps are shortened to
    /// land exactly on output times.
    pub dt: Option<f64>,
}

impl Default for FpOptions {
    fn default() -> Self {
        FpOptions { scheme: FluxScheme::default(), dt: None }
    }
}

/// Snapshots of a solve together with the population firing mass per step.
#[derive(Clone, Debug)]
pub struct FpSolution {
    pub snapshots: Vec<ConditionalGridDensity>,
    /// `(t, sum_m p_m F_m(t))` at every step, starting at the initial time.
    pub firing_rate: Vec<(f64, f64)>,
}

impl FpSolution {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    /// Snapshot at time `t` (up to rounding).
    pub fn at(&self, t: f64) -> Option<&ConditionalGridDensity> {
        self.snapshots.iter().find(|s| (s.time - t).abs() <= 1e-9 * (1.0 + t))
    }
}

/// Uniform output grid `0, dt, ..., t_end`.
pub fn uniform_times(t_end: f64, n_intervals: usize) -> Vec<f64> {
    (0..=n_intervals).map(|i| t_end * i as f64 / n_intervals as f64).collect()
}

/// Integrates from `initial` to `t_end`, emitting snapshots at `output_times`.
pub fn fp_solve<C: MeanFieldCoefficients + ?Sized>(
    initial: &ConditionalGridDensity,
    t_end: f64,
    coeffs: &C,
    output_times: &[f64],
    options: FpOptions,
) -> Result<FpSolution> {
    initial.validate()?;
    if !(t_end >= initial.time) {
        return Err(Error::Config(format!("end time {t_end} precedes the initial time {}", initial.time)));
    }
    let t0 = initial.time;
    let mut targets: Vec<f64> =
        output_times.iter().copied().filter(|&t| t >= t0 && t <= t_end * (1.0 + 1e-12)).collect();
    if targets.len() != output_times.len() {
        return Err(Error::Range { requested: output_times.iter().copied().fold(f64::NAN, f64::max), horizon: t_end });
    }
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let op = FpOperator::new(initial, coeffs, options.scheme);
    let dt_target = match options.dt {
        Some(dt) if !(dt > 0.0) || dt > op.dt_max() * (1.0 + 1e-12) => {
            return Err(Error::StepSize { dt, bound: op.dt_max() })
        }
        Some(dt) => dt,
        None => op.dt_max(),
    };

    let mut state = initial.clone();
    let mut snapshots = Vec::with_capacity(targets.len());
    let mut firing_rate = vec![(t0, state.total_firing_mass(coeffs))];
    let mut t_prev = t0;
    for &target in &targets {
        let gap = target - t_prev;
        if gap > 0.0 {
            let n = (gap / dt_target * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let dt = gap / n as f64;
            for i in 1..=n {
                op.step(&mut state, dt, coeffs)?;
                state.time = t_prev + gap * i as f64 / n as f64;
                firing_rate.push((state.time, state.total_firing_mass(coeffs)));
            }
        }
        state.time = target;
        t_prev = target;
        snapshots.push(state.clone());
    }
    Ok(FpSolution { snapshots, firing_rate })
}

impl PhaseMeasure for ConditionalGridDensity {
    fn total_mass(&self) -> f64 {
        self.row_masses().iter().zip(&self.weights).map(|(m, p)| m * p).sum()
    }

    fn interaction_at<C: MeanFieldCoefficients + ?Sized>(&self, x: &Position, coeffs: &C) -> f64 {
        let kernel = coeffs.kernel();
        self.positions
            .iter()
            .zip(&self.weights)
            .zip(&self.rho)
            .map(|((y, p), row)| p * kernel.eval(x, y) * coeffs.emitting_mass(row))
            .sum()
    }

    /// Midpoint pairings, with the interaction field of every row.
    fn weak_terms<C: MeanFieldCoefficients + ?Sized>(&self, phi: &TestFunction, coeffs: &C) -> WeakTerms {
        let op = FpOperator::new(self, coeffs, FluxScheme::default());
        let fields = op.fields(&self.firing_masses(coeffs));
        let h = self.cell_width();
        let jets: Vec<(f64, f64, f64)> = self.centers().iter().map(|&v| phi.voltage.jet(TorusPoint::wrap(v))).collect();
        let mut out = WeakTerms::default();
        for (((x, p), row), &field) in self.positions.iter().zip(&self.weights).zip(&self.rho).zip(&fields) {
            let a = phi.spatial.eval(x);
            let (mut val, mut tr, mut di) = (0.0, 0.0, 0.0);
            for (k, (&r, &(e, de, dde))) in row.iter().zip(&jets).enumerate() {
                val += r * e;
                tr += r * op.drift(k, field) * de;
                di += r * op.diff[k] * dde;
            }
            let w = p * a * h;
            out.value += w * val;
            out.transport += w * tr;
            out.diffusion += w * di;
        }
        out
    }

    fn v_marginal(&self) -> CircleMeasure {
        CircleMeasure::Cells(self.v_density())
    }
}
