//! Euler-Maruyama simulation of the N-neuron system.
//!
//! Positions are frozen at their initial draw. Each step freezes all
//! coefficients at the canonical voltages from the start of the step, builds
//! the set of emitting neurons once, and then updates every particle
//! independently from its own random stream.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InitialLaws, MeanFieldCoefficients, ModelCoefficients, Position, ThetaKernel};
use crate::rng::{stream, Purpose, StreamRng};
use crate::torus::{TorusPoint, PERIOD};

/// How the mean-field sum is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionMode {
    /// Direct sum over the emitting set for every receiver.
    #[default]
    Exact,
    /// Factorized sums: one pass for constant and block kernels, atom
    /// aggregation or cell lists for the Gaussian kernel.
    Binned,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub seed: u64,
    pub n_replicas: usize,
    pub interaction: InteractionMode,
    /// Snapshot spacing; `None` stores only the initial and final states.
    pub output_interval: Option<f64>,
    /// Keep the start-of-step voltages and Brownian increments of every step.
    pub record_steps: bool,
    pub coeffs: ModelCoefficients,
    pub laws: InitialLaws,
}

impl SimConfig {
    pub fn new(n_particles: usize, dt: f64, seed: u64, coeffs: ModelCoefficients, laws: InitialLaws) -> Self {
        SimConfig {
            n_particles,
            dt,
            seed,
            n_replicas: 1,
            interaction: InteractionMode::Exact,
            output_interval: None,
            record_steps: false,
            coeffs,
            laws,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate()?;
        self.laws.validate()?;
        if self.n_particles == 0 || self.n_replicas == 0 {
            return Err(Error::Config("particle and replica counts must be positive".into()));
        }
        if !(self.dt > 0.0) || self.dt > self.coeffs.horizon {
            return Err(Error::Config(format!("dt must lie in (0, horizon], got {}", self.dt)));
        }
        if self.dt * self.coeffs.drift_bound() >= 1.0 {
            return Err(Error::Config(format!(
                "dt * drift bound = {} must stay below 1 for spike detection",
                self.dt * self.coeffs.drift_bound()
            )));
        }
        if let Some(dout) = self.output_interval {
            steps_for(dout, self.dt, "output interval")?;
        }
        Ok(())
    }
}

/// Number of `dt` steps in `span`, rejecting spans that are not multiples.
pub(crate) fn steps_for(span: f64, dt: f64, what: &str) -> Result<usize> {
    let n = (span / dt).round();
    if !(span >= 0.0) || (n * dt - span).abs() > 1e-9 * span.max(dt) {
        return Err(Error::Config(format!("{what} {span} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub particle: usize,
    pub time: f64,
}

/// Per-step record kept for stochastic-integral diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    /// Canonical voltages at the start of the step.
    pub start: Vec<f64>,
    /// Brownian increments used for the step.
    pub dw: Vec<f64>,
}

/// State of the N-particle system.
#[derive(Clone, Debug)]
pub struct ParticleSystemState {
    pub positions: Vec<Position>,
    /// Real-valued voltages; the canonical voltage is their reduction mod 2.
    pub voltages: Vec<f64>,
    pub time: f64,
    pub steps: u64,
    pub spike_log: Vec<Spike>,
    kernel_labels: Option<Vec<usize>>,
    atom_labels: Option<(Vec<usize>, Vec<Position>)>,
    streams: Vec<StreamRng>,
}

impl ParticleSystemState {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn canonical(&self) -> Vec<TorusPoint> {
        self.voltages.iter().map(|&v| TorusPoint::wrap(v)).collect()
    }
}

/// Draws the initial state of one replica.
pub fn init_system(cfg: &SimConfig, replica: u64) -> Result<ParticleSystemState> {
    let ids: Vec<u64> = (0..cfg.n_particles as u64).collect();
    init_with_streams(cfg, replica, &ids)
}

/// Like [`init_system`] with explicit stream ids; particle `i` draws from
/// stream `ids[i]`.
pub fn init_with_streams(cfg: &SimConfig, replica: u64, ids: &[u64]) -> Result<ParticleSystemState> {
    cfg.validate()?;
    let laws = &cfg.laws;
    let draws: Vec<(Position, Option<usize>, f64, StreamRng)> = ids
        .par_iter()
        .map(|&id| {
            let mut rng = stream(Purpose::Particles, cfg.seed, replica, id);
            let (x, label) = laws.nu.sample_labeled(id as usize, &laws.domain, &mut rng);
            let v = laws.rho0.sample(&mut rng);
            (x, label, v, rng)
        })
        .collect();
    let mut positions = Vec::with_capacity(ids.len());
    let mut voltages = Vec::with_capacity(ids.len());
    let mut streams = Vec::with_capacity(ids.len());
    let mut labels = Vec::with_capacity(ids.len());
    for (x, label, v, rng) in draws {
        positions.push(x);
        voltages.push(v);
        streams.push(rng);
        labels.push(label);
    }
    let atom_labels = match &laws.nu {
        crate::model::PositionLaw::Atoms { points, .. } => {
            Some((labels.iter().map(|l| l.expect("atom law yields labels")).collect(), points.clone()))
        }
        _ => None,
    };
    let kernel_labels = kernel_labels(&cfg.coeffs.theta, &positions)?;
    Ok(ParticleSystemState {
        positions,
        voltages,
        time: 0.0,
        steps: 0,
        spike_log: Vec::new(),
        kernel_labels,
        atom_labels,
        streams,
    })
}

pub(crate) fn kernel_labels(theta: &ThetaKernel, positions: &[Position]) -> Result<Option<Vec<usize>>> {
    if !matches!(theta, ThetaKernel::Block { .. }) {
        return Ok(None);
    }
    positions
        .iter()
        .map(|x| {
            theta
                .label_of(x)
                .ok_or_else(|| Error::Config(format!("position {:?} is not an atom of the block kernel", x.0)))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Mean-field field `I_i = (1/N) sum_j theta(x_i, x_j) emitting(v_j)` at each
/// particle, using canonical voltages.
pub fn interaction_field<C: MeanFieldCoefficients + ?Sized>(
    state: &ParticleSystemState,
    canon: &[TorusPoint],
    coeffs: &C,
    mode: InteractionMode,
) -> Vec<f64> {
    let n = state.len();
    let kernel = coeffs.kernel();
    if kernel.is_zero() {
        return vec![0.0; n];
    }
    let emitters: Vec<(usize, f64)> = canon
        .iter()
        .enumerate()
        .filter_map(|(j, &w)| {
            let e = coeffs.emitting(w);
            (e != 0.0).then_some((j, e))
        })
        .collect();
    if emitters.is_empty() {
        return vec![0.0; n];
    }
    let inv_n = 1.0 / n as f64;
    let label = |i: usize| state.kernel_labels.as_ref().map_or(0, |l| l[i]);

    match (mode, kernel) {
        (InteractionMode::Binned, ThetaKernel::Constant { theta0 }) => {
            let s: f64 = emitters.iter().fold(0.0, |acc, &(_, e)| acc + theta0 * e);
            vec![s * inv_n; n]
        }
        (InteractionMode::Binned, ThetaKernel::Block { matrix, .. }) => {
            let sums: Vec<f64> =
                matrix.iter().map(|row| emitters.iter().fold(0.0, |acc, &(j, e)| acc + row[label(j)] * e)).collect();
            (0..n).map(|i| sums[label(i)] * inv_n).collect()
        }
        (InteractionMode::Binned, ThetaKernel::Gaussian { .. }) => {
            if let Some((labels, points)) = &state.atom_labels {
                let mut mass = vec![0.0; points.len()];
                for &(j, e) in &emitters {
                    mass[labels[j]] += e;
                }
                let active: Vec<usize> = (0..points.len()).filter(|&a| mass[a] != 0.0).collect();
                let field: Vec<f64> = points
                    .par_iter()
                    .map(|x| active.iter().fold(0.0, |acc, &a| acc + kernel.eval(x, &points[a]) * mass[a]))
                    .collect();
                labels.iter().map(|&a| field[a] * inv_n).collect()
            } else {
                CellList::build(kernel, &state.positions, &emitters).map_or_else(
                    || direct_field(state, &emitters, kernel, inv_n, &label),
                    |cells| (0..n).into_par_iter().map(|i| cells.sum_at(&state.positions[i]) * inv_n).collect(),
                )
            }
        }
        _ => direct_field(state, &emitters, kernel, inv_n, &label),
    }
}

fn direct_field(
    state: &ParticleSystemState,
    emitters: &[(usize, f64)],
    kernel: &ThetaKernel,
    inv_n: f64,
    label: &(impl Fn(usize) -> usize + Sync),
) -> Vec<f64> {
    let x = &state.positions;
    (0..state.len())
        .into_par_iter()
        .map(|i| {
            let li = label(i);
            let acc =
                emitters.iter().fold(0.0, |acc, &(j, e)| acc + kernel.eval_labeled(&x[i], li, &x[j], label(j)) * e);
            acc * inv_n
        })
        .collect()
}

/// Uniform cell grid over the emitters for the Gaussian kernel, truncated
/// where the kernel falls below `1e-16` of its peak.
struct CellList<'a> {
    kernel: &'a ThetaKernel,
    lo: [f64; 3],
    size: f64,
    dims: [usize; 3],
    cells: Vec<Vec<(Position, f64)>>,
}

impl<'a> CellList<'a> {
    fn build(kernel: &'a ThetaKernel, positions: &[Position], emitters: &[(usize, f64)]) -> Option<Self> {
        let ThetaKernel::Gaussian { length, .. } = kernel else { return None };
        let cutoff = length * (2.0 * 1e16f64.ln()).sqrt();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in positions {
            for d in 0..3 {
                lo[d] = lo[d].min(p.0[d]);
                hi[d] = hi[d].max(p.0[d]);
            }
        }
        let dims: [usize; 3] = std::array::from_fn(|d| (((hi[d] - lo[d]) / cutoff).floor() as usize + 1).max(1));
        // Not worth it unless some neighbourhoods are skipped.
        if dims.iter().all(|&k| k < 4) {
            return None;
        }
        let mut cells = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let list = CellList { kernel, lo, size: cutoff, dims, cells: Vec::new() };
        for &(j, e) in emitters {
            let c = list.cell_of(&positions[j]);
            cells[list.flat(c)].push((positions[j], e));
        }
        Some(CellList { cells, ..list })
    }

    fn cell_of(&self, p: &Position) -> [usize; 3] {
        std::array::from_fn(|d| (((p.0[d] - self.lo[d]) / self.size).floor().max(0.0) as usize).min(self.dims[d] - 1))
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    fn sum_at(&self, x: &Position) -> f64 {
        let c = self.cell_of(x);
        let range = |d: usize| c[d].saturating_sub(1)..=(c[d] + 1).min(self.dims[d] - 1);
        let mut acc = 0.0;
        for a in range(0) {
            for b in range(1) {
                for z in range(2) {
                    for (y, e) in &self.cells[self.flat([a, b, z])] {
                        acc += self.kernel.eval(x, y) * e;
                    }
                }
            }
        }
        acc
    }
}

/// Drift `b_i = lambda_2(v_i) + receiving(v_i) * I_i` for every particle.
pub fn particle_drifts<C: MeanFieldCoefficients + ?Sized>(
    state: &ParticleSystemState,
    canon: &[TorusPoint],
    coeffs: &C,
    mode: InteractionMode,
) -> Vec<f64> {
    let field = interaction_field(state, canon, coeffs, mode);
    canon
        .iter()
        .zip(&field)
        .map(|(&v, &f)| {
            let r = coeffs.receiving(v);
            let b = coeffs.self_drift(v) + if r == 0.0 { 0.0 } else { r * f };
            debug_assert!(b.abs() <= coeffs.drift_bound() + 1e-12, "drift {b} exceeds bound");
            b
        })
        .collect()
}

/// Advances every particle by `dt` with the given Brownian increments.
/// Returns the start-of-step canonical voltages.
pub fn advance<C: MeanFieldCoefficients + ?Sized>(
    state: &mut ParticleSystemState,
    coeffs: &C,
    dt: f64,
    mode: InteractionMode,
    dw: &[f64],
) -> Vec<TorusPoint> {
    assert_eq!(dw.len(), state.len());
    let canon = state.canonical();
    let drifts = particle_drifts(state, &canon, coeffs, mode);
    let t0 = state.time;
    let crossings: Vec<Option<f64>> = state
        .voltages
        .par_iter_mut()
        .zip(canon.par_iter().zip(drifts.par_iter().zip(dw.par_iter())))
        .map(|(v, (&c0, (&b, &w)))| {
            let old = *v;
            let new = old + b * dt + coeffs.diffusion(c0) * w;
            *v = new;
            spike_time(old, c0.value(), new).map(|frac| t0 + frac * dt)
        })
        .collect();
    for (i, t) in crossings.into_iter().enumerate() {
        if let Some(time) = t {
            state.spike_log.push(Spike { particle: i, time });
        }
    }
    state.steps += 1;
    state.time = state.steps as f64 * dt;
    canon
}

/// Fraction of the step at which the canonical voltage crosses 1 from below,
/// if it does so within one charging cycle.
#[inline]
fn spike_time(old: f64, c0: f64, new: f64) -> Option<f64> {
    let c1 = TorusPoint::wrap(new).value();
    let same_cycle = (old / PERIOD).floor() == (new / PERIOD).floor();
    (same_cycle && c0 < 1.0 && c1 >= 1.0 && new - old < 1.0).then(|| (1.0 - c0) / (c1 - c0))
}

/// Draws one standard normal per particle from the particle streams and
/// scales it to a Brownian increment over `dt`.
fn draw_increments(state: &mut ParticleSystemState, dt: f64) -> Vec<f64> {
    let sq = dt.sqrt();
    state.streams.par_iter_mut().map(|r| sq * r.sample::<f64, _>(StandardNormal)).collect()
}

/// One Euler-Maruyama step of the system described by `cfg`.
pub fn euler_step(state: &mut ParticleSystemState, cfg: &SimConfig) -> Option<StepRecord> {
    let dw = draw_increments(state, cfg.dt);
    let t = state.time;
    let start = advance(state, &cfg.coeffs, cfg.dt, cfg.interaction, &dw);
    cfg.record_steps.then(|| StepRecord { time: t, start: start.into_iter().map(f64::from).collect(), dw })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub voltages: Vec<f64>,
}

impl Snapshot {
    pub fn canonical(&self) -> Vec<f64> {
        self.voltages.iter().map(|&v| TorusPoint::wrap(v).value()).collect()
    }
}

/// Output of [`simulate`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub replica: u64,
    pub dt: f64,
    pub positions: Vec<Position>,
    pub snapshots: Vec<Snapshot>,
    pub spikes: Vec<Spike>,
    pub steps: Option<Vec<StepRecord>>,
    pub final_state: Snapshot,
}

/// Simulates one replica up to the model horizon.
pub fn simulate(cfg: &SimConfig, replica: u64) -> Result<Trajectory> {
    simulate_until(cfg, replica, cfg.coeffs.horizon)
}

/// Simulates one replica up to `t_end` (which may be zero).
pub fn simulate_until(cfg: &SimConfig, replica: u64, t_end: f64) -> Result<Trajectory> {
    let mut state = init_system(cfg, replica)?;
    run_state(&mut state, cfg, replica, t_end)
}

pub(crate) fn run_state(
    state: &mut ParticleSystemState,
    cfg: &SimConfig,
    replica: u64,
    t_end: f64,
) -> Result<Trajectory> {
    if t_end > cfg.coeffs.horizon * (1.0 + 1e-12) {
        return Err(Error::Range { requested: t_end, horizon: cfg.coeffs.horizon });
    }
    let n_steps = steps_for(t_end, cfg.dt, "horizon")?;
    let stride = match cfg.output_interval {
        Some(d) => steps_for(d, cfg.dt, "output interval")?.max(1),
        None => n_steps.max(1),
    };
    let snap = |s: &ParticleSystemState| Snapshot { time: s.time, voltages: s.voltages.clone() };
    let mut snapshots = vec![snap(state)];
    let mut records = cfg.record_steps.then(|| Vec::with_capacity(n_steps));
    for k in 1..=n_steps {
        let rec = euler_step(state, cfg);
        if let (Some(list), Some(r)) = (records.as_mut(), rec) {
            list.push(r);
        }
        if k % stride == 0 || k == n_steps {
            snapshots.push(snap(state));
        }
    }
    Ok(Trajectory {
        replica,
        dt: cfg.dt,
        positions: state.positions.clone(),
        final_state: snap(state),
        snapshots,
        spikes: state.spike_log.clone(),
        steps: records,
    })
}

/// Simulates all configured replicas.
pub fn simulate_replicas(cfg: &SimConfig) -> Result<Vec<Trajectory>> {
    (0..cfg.n_replicas as u64).into_par_iter().map(|r| simulate(cfg, r)).collect()
}

/// Sup-norm differences between Euler paths at successive step sizes driven
/// by one Brownian path.
///
/// `dt_levels` must be non-increasing with power-of-two ratios; coarse
/// increments are sums of the finest ones. Differences are measured at the
/// time grid of the coarsest level; the sup-norm difference of each particle
/// path is averaged over particles.
pub fn euler_refinement_error(cfg: &SimConfig, dt_levels: &[f64], replica: u64) -> Result<Vec<f64>> {
    if dt_levels.len() < 2 {
        return Err(Error::Config("need at least two step-size levels".into()));
    }
    let finest = *dt_levels.last().unwrap();
    let mut factors = Vec::with_capacity(dt_levels.len());
    for w in dt_levels.windows(2) {
        let ratio = w[0] / w[1];
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > 1e-9 || (r as u64).count_ones() != 1 {
            return Err(Error::Config(format!("step sizes {} and {} are not dyadic", w[0], w[1])));
        }
    }
    for &dt in dt_levels {
        factors.push(steps_for(dt, finest, "step size")?);
    }
    let horizon = cfg.coeffs.horizon;
    let n_fine = steps_for(horizon, finest, "horizon")?;
    let coarse_stride = factors[0];
    let mut base = init_system(&SimConfig { dt: dt_levels[0], ..cfg.clone() }, replica)?;
    let sq = finest.sqrt();
    let normals: Vec<Vec<f64>> = base
        .streams
        .par_iter_mut()
        .map(|r| (0..n_fine).map(|_| r.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    base.spike_log.clear();

    let paths: Vec<Vec<Vec<f64>>> = factors
        .iter()
        .zip(dt_levels)
        .map(|(&m, &dt)| {
            let mut s = base.clone();
            let mut path = vec![s.voltages.clone()];
            let n_steps = n_fine / m;
            for k in 0..n_steps {
                let dw: Vec<f64> = normals.iter().map(|z| sq * z[k * m..(k + 1) * m].iter().sum::<f64>()).collect();
                advance(&mut s, &cfg.coeffs, dt, cfg.interaction, &dw);
                if ((k + 1) * m) % coarse_stride == 0 {
                    path.push(s.voltages.clone());
                }
            }
            path
        })
        .collect();

    let n = base.len();
    Ok(paths
        .windows(2)
        .map(|p| {
            let mut sup = vec![0.0f64; n];
            for (a, b) in p[0].iter().zip(&p[1]) {
                for (s, (x, y)) in sup.iter_mut().zip(a.iter().zip(b)) {
                    *s = s.max((x - y).abs());
                }
            }
            sup.iter().sum::<f64>() / n as f64
        })
        .collect())
}
