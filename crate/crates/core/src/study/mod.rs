//! Experiment orchestration: runs one configured study and writes its CSV
//! tables (and SVG figures when plotting is on) to the output directory.
//!
//! Replicas run in parallel; every reduction over replicas is a sequential sum
//! in replica order, so the written bytes do not depend on the thread count.

pub mod svg;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use svg::{emit_svg, Axes, Figure, Series};

use crate::config::{ExperimentConfig, StudyKind};
use crate::error::{Error, Result};
use crate::fokker_planck::{
    discretize_initial, fp_solve, mild_residual, uniform_times, weak_residual_phi, ConditionalGridDensity, FpOptions,
    FpSolution, TestFunction,
};
use crate::mckean_vlasov::{mkv_simulate, MkvSample};
use crate::measures::{
    l2_energy, mollified_density, resolving_grid, time_regularity_h_minus2, wasserstein1_joint, wasserstein1_v,
    CircleMeasure, EmpiricalDensity, WeightedAtomMeasure, JOINT_ATOM_BUDGET,
};
use crate::model::{InitialLaws, Position};
use crate::particle::{
    euler_refinement_error, euler_step, init_system, simulate_replicas, steps_for, SimConfig, Spike,
};
use crate::torus::{mollifier_scale_for, TorusPoint, PERIOD};

/// First line of every CSV file.
pub const SCHEMA_COMMENT: &str = concat!("# spikefield ", env!("CARGO_PKG_VERSION"), " schema 1");

/// Full-precision (17 significant digits) CSV number.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Time label used in file names, e.g. `0.25`.
pub fn time_tag(t: f64) -> String {
    format!("{}", (t * 1e9).round() / 1e9)
}

struct Writer {
    dir: PathBuf,
    plot: bool,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.output_dir)?;
        Ok(Writer { dir: cfg.output_dir.clone(), plot: cfg.plot, files: Vec::new() })
    }

    fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut text = String::with_capacity(64 * (rows.len() + 2));
        text.push_str(SCHEMA_COMMENT);
        text.push('\n');
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        self.write(name, &text)
    }

    fn figure(&mut self, name: &str, fig: &Figure) -> Result<()> {
        if !self.plot {
            return Ok(());
        }
        let doc = emit_svg(fig)?;
        self.write(name, &doc)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }
}

/// Files written by [`run`] and a few human-readable summary lines.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Runs the study selected in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let mut w = Writer::new(cfg)?;
    let mut summary = Vec::new();
    match cfg.study {
        StudyKind::Trajectories => {
            let n = trajectories(cfg, &mut w)?;
            summary.push(format!("{n} spikes logged"));
        }
        StudyKind::Pde => {
            let sol = pde(cfg, &mut w)?;
            let last = sol.snapshots.last().expect("nonempty solution");
            summary.push(format!("t = {}: max row-mass error {:.2e}", last.time, last.max_mass_error()));
        }
        StudyKind::Spikes => {
            for r in spikes(cfg, &mut w)? {
                summary.push(format!(
                    "replica {}: first spike {}, cascade fraction {:.2}, propagation delay {}",
                    r.replica,
                    opt(r.first_spike),
                    r.cascade_fraction,
                    opt(r.propagation_delay)
                ));
            }
        }
        StudyKind::Convergence => {
            for r in convergence(cfg, &mut w)?.rows {
                summary.push(format!("N = {}, t = {}: W1 {:.4e} +- {:.1e}", r.n, r.t, r.w1_mean, r.w1_stderr));
            }
        }
        StudyKind::Energy => {
            for r in energy(cfg, &mut w)? {
                summary.push(format!("N = {}: sup_t int u^2 = {:.4} +- {:.1e}", r.n, r.sup_l2_mean, r.sup_l2_stderr));
            }
        }
        StudyKind::MildCheck => {
            let r = mild_check(cfg, &mut w)?;
            summary.push(format!("max mild residual {:.3e}", r.mild.iter().map(|m| m.2).fold(0.0, f64::max)));
            summary.push(format!("max weak residual {:.3e}", r.weak_pde.iter().map(|m| m.1).fold(0.0, f64::max)));
            for (n, mean, _) in &r.weak_particles {
                summary.push(format!("N = {n}: mean weak residual {mean:.3e}"));
            }
        }
        StudyKind::MkvCheck => {
            for (t, d) in mkv_check(cfg, &mut w)?.w1 {
                summary.push(format!("t = {t}: W1 {d:.4e}"));
            }
        }
        StudyKind::EulerOrder => {
            let r = euler_order(cfg, &mut w)?;
            summary.push(format!("fitted strong order {:.3}", r.order));
        }
    }
    Ok(Report { files: w.files, summary })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| format!("{v:.4}"))
}

/// `(mean, standard error)` with a sequential sum.
fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn pde_initial(cfg: &ExperimentConfig) -> Result<ConditionalGridDensity> {
    discretize_initial(&cfg.laws, cfg.pde.atoms, cfg.pde.cells, cfg.seed)
}

/// Position law of the particle side; shares the PDE atoms when requested.
fn particle_laws(cfg: &ExperimentConfig, init: Option<&ConditionalGridDensity>) -> Result<InitialLaws> {
    if !cfg.sim.share_pde_atoms {
        return Ok(cfg.laws.clone());
    }
    let owned;
    let init = match init {
        Some(i) => i,
        None => {
            owned = pde_initial(cfg)?;
            &owned
        }
    };
    Ok(InitialLaws { nu: init.position_law(), ..cfg.laws.clone() })
}

/// PDE output grid with spacing `pde.output_interval` over the horizon.
fn pde_grid(cfg: &ExperimentConfig, spacing: f64) -> Result<Vec<f64>> {
    let h = cfg.model.horizon;
    let n = (h / spacing).round().max(1.0);
    if ((n * spacing) - h).abs() > 1e-9 * h {
        return Err(Error::Config(format!("output interval {spacing} does not divide the horizon {h}")));
    }
    Ok(uniform_times(h, n as usize))
}

/// Solves the PDE on the uniform output grid.
pub fn solve_pde(cfg: &ExperimentConfig) -> Result<FpSolution> {
    let init = pde_initial(cfg)?;
    solve_from(cfg, &init, cfg.pde.output_interval)
}

fn solve_from(cfg: &ExperimentConfig, init: &ConditionalGridDensity, spacing: f64) -> Result<FpSolution> {
    let times = pde_grid(cfg, spacing)?;
    fp_solve(init, cfg.model.horizon, &cfg.model, &times, FpOptions { scheme: cfg.pde.scheme, dt: cfg.pde.dt })
}

fn snapshot_at<'a>(sol: &'a FpSolution, t: f64) -> Result<&'a ConditionalGridDensity> {
    sol.at(t).ok_or_else(|| Error::Config(format!("time {t} is not on the PDE output grid")))
}

/// Voltages of one replica at each of the increasing `times`.
fn particle_path(sim: &SimConfig, replica: u64, times: &[f64]) -> Result<(Vec<Position>, Vec<Vec<f64>>)> {
    let mut state = init_system(sim, replica)?;
    let mut out = Vec::with_capacity(times.len());
    let mut done = 0;
    for &t in times {
        let target = steps_for(t, sim.dt, "evaluation time")?;
        if target < done {
            return Err(Error::Config("evaluation times must be increasing".into()));
        }
        while done < target {
            euler_step(&mut state, sim);
            done += 1;
        }
        out.push(state.voltages.clone());
    }
    Ok((state.positions, out))
}

fn spike_rows(replica: u64, spikes: &[Spike], rows: &mut Vec<String>) {
    for s in spikes {
        rows.push(format!("{replica},{},{}", s.particle, num(s.time)));
    }
}

fn raster_rows(n: usize, spikes: &[Spike]) -> Vec<Vec<f64>> {
    let mut rows = vec![Vec::new(); n];
    for s in spikes {
        rows[s.particle].push(s.time);
    }
    rows
}

// ---------------------------------------------------------------- trajectories

fn trajectories(cfg: &ExperimentConfig, w: &mut Writer) -> Result<usize> {
    let sim = cfg.sim_config(cfg.sim.n_particles, particle_laws(cfg, None)?);
    let trajs = simulate_replicas(&sim)?;
    let mut rows = Vec::new();
    for t in &trajs {
        spike_rows(t.replica, &t.spikes, &mut rows);
    }
    w.csv("spikes.csv", "replica,particle,time", &rows)?;
    let first = &trajs[0];
    for snap in &first.snapshots {
        let rows: Vec<String> = first
            .positions
            .iter()
            .zip(snap.canonical())
            .enumerate()
            .map(|(i, (x, v))| format!("{i},{},{},{},{}", num(x.0[0]), num(x.0[1]), num(x.0[2]), num(v)))
            .collect();
        w.csv(&format!("snapshot_t{}.csv", time_tag(snap.time)), "particle,x1,x2,x3,v_canonical", &rows)?;
    }
    w.figure(
        "raster.svg",
        &Figure::Raster {
            title: "spike raster, replica 0".into(),
            t_end: cfg.model.horizon,
            rows: raster_rows(sim.n_particles, &first.spikes),
        },
    )?;
    Ok(rows.len())
}

// ------------------------------------------------------------------------- pde

fn pde(cfg: &ExperimentConfig, w: &mut Writer) -> Result<FpSolution> {
    let sol = solve_pde(cfg)?;
    for t in cfg.eval_times() {
        let s = snapshot_at(&sol, t)?;
        let centers = s.centers();
        let mut rows = Vec::with_capacity(s.n_atoms() * s.n_cells());
        for (m, (x, p)) in s.positions.iter().zip(&s.weights).enumerate() {
            for (k, (&c, &r)) in centers.iter().zip(&s.rho[m]).enumerate() {
                rows.push(format!(
                    "{m},{},{},{},{},{k},{},{}",
                    num(x.0[0]),
                    num(x.0[1]),
                    num(x.0[2]),
                    num(*p),
                    num(c),
                    num(r)
                ));
            }
        }
        w.csv(&format!("fp_t{}.csv", time_tag(t)), "m,x1,x2,x3,weight,k,v_center,rho", &rows)?;
    }
    let rows: Vec<String> = sol.firing_rate.iter().map(|(t, f)| format!("{},{}", num(*t), num(*f))).collect();
    w.csv("firing_rate.csv", "t,total_firing_mass", &rows)?;
    w.figure(
        "firing_rate.svg",
        &Figure::Lines {
            title: "population firing mass".into(),
            x_label: "t".into(),
            y_label: "firing mass".into(),
            axes: Axes::Linear,
            series: vec![Series { label: "PDE".into(), points: sol.firing_rate.clone() }],
        },
    )?;
    Ok(sol)
}

// ---------------------------------------------------------------------- spikes

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeRow {
    pub replica: u64,
    pub first_spike: Option<f64>,
    /// Largest fraction of neurons spiking within one window opened at a spike.
    pub cascade_fraction: f64,
    /// Delay between the first spikes of the two populations.
    pub propagation_delay: Option<f64>,
}

/// Cascade statistics of one spike log.
pub fn cascade(replica: u64, spikes: &[Spike], n: usize, window: f64, split: Option<usize>) -> CascadeRow {
    let first_of = |keep: &dyn Fn(&Spike) -> bool| {
        spikes
            .iter()
            .filter(|s| keep(s))
            .map(|s| s.time)
            .fold(None, |a: Option<f64>, t| Some(a.map_or(t, |a| a.min(t))))
    };
    let first = first_of(&|_| true);
    // Largest share of distinct neurons firing in a window that opens at some spike.
    let cascade_fraction = spikes
        .iter()
        .map(|a| {
            let hit: BTreeSet<usize> =
                spikes.iter().filter(|s| s.time >= a.time && s.time <= a.time + window).map(|s| s.particle).collect();
            hit.len()
        })
        .max()
        .unwrap_or(0) as f64
        / n as f64;
    let propagation_delay = split.and_then(|k| {
        let a = first_of(&|s| s.particle < k)?;
        let b = first_of(&|s| s.particle >= k && s.time >= a)?;
        Some(b - a)
    });
    CascadeRow { replica, first_spike: first, cascade_fraction, propagation_delay }
}

fn spikes(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Vec<CascadeRow>> {
    let sim = cfg.sim_config(cfg.sim.n_particles, particle_laws(cfg, None)?);
    let trajs = simulate_replicas(&sim)?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for t in &trajs {
        spike_rows(t.replica, &t.spikes, &mut rows);
        table.push(cascade(
            t.replica,
            &t.spikes,
            sim.n_particles,
            cfg.params.cascade_window,
            cfg.params.population_split,
        ));
    }
    w.csv("spikes.csv", "replica,particle,time", &rows)?;
    let nan = |x: Option<f64>| num(x.unwrap_or(f64::NAN));
    let crow: Vec<String> = table
        .iter()
        .map(|c| {
            format!("{},{},{},{}", c.replica, nan(c.first_spike), num(c.cascade_fraction), nan(c.propagation_delay))
        })
        .collect();
    w.csv("cascade.csv", "replica,first_spike,cascade_fraction,propagation_delay", &crow)?;
    w.figure(
        "raster.svg",
        &Figure::Raster {
            title: "spike raster, replica 0".into(),
            t_end: cfg.model.horizon,
            rows: raster_rows(sim.n_particles, &trajs[0].spikes),
        },
    )?;
    Ok(table)
}

// ----------------------------------------------------------------- convergence

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    pub w1_mean: f64,
    pub w1_stderr: f64,
    /// Mean joint distance to the coarsened PDE state, NaN when disabled or
    /// over the atom budget.
    pub joint_mean: f64,
    /// Per-replica `W1` of the voltage marginals.
    pub w1: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn row(&self, n: usize, t: f64) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.n == n && (r.t - t).abs() <= 1e-9)
    }
}

/// The PDE state lumped onto `cells` voltage cells per atom, as atoms at the
/// coarse cell midpoints.
pub fn coarsen(state: &ConditionalGridDensity, cells: usize) -> Result<WeightedAtomMeasure> {
    let k = state.n_cells();
    if cells == 0 || k % cells != 0 {
        return Err(Error::Config(format!("{cells} coarse cells do not divide the {k} grid cells")));
    }
    let ratio = k / cells;
    let h = state.cell_width();
    let hc = PERIOD / cells as f64;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (m, (x, p)) in state.positions.iter().zip(&state.weights).enumerate() {
        for c in 0..cells {
            let mass: f64 = state.rho[m][c * ratio..(c + 1) * ratio].iter().sum::<f64>() * h * p;
            if mass > 0.0 {
                atoms.push((*x, TorusPoint::wrap((c as f64 + 0.5) * hc)));
                weights.push(mass);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let tail: f64 = weights[..weights.len() - 1].iter().sum();
    *weights.last_mut().expect("positive mass") = 1.0 - tail;
    WeightedAtomMeasure::new(atoms, weights)
}

fn convergence(cfg: &ExperimentConfig, w: &mut Writer) -> Result<ConvergenceTable> {
    let init = pde_initial(cfg)?;
    let sol = solve_from(cfg, &init, cfg.pde.output_interval)?;
    let laws = particle_laws(cfg, Some(&init))?;
    let times = cfg.eval_times();
    let targets: Vec<&ConditionalGridDensity> = times.iter().map(|&t| snapshot_at(&sol, t)).collect::<Result<_>>()?;
    let limits: Vec<CircleMeasure> = targets.iter().map(|s| CircleMeasure::Cells(s.v_density())).collect();
    let jc = cfg.params.joint_cells;
    let coarse: Option<Vec<WeightedAtomMeasure>> =
        if jc > 0 { Some(targets.iter().map(|s| coarsen(s, jc)).collect::<Result<_>>()?) } else { None };

    let mut rows = Vec::new();
    for &n in &cfg.params.n_list {
        let sim = cfg.sim_config(n, laws.clone());
        let joint_on = coarse.as_ref().filter(|c| c.iter().all(|m| n + m.len() <= JOINT_ATOM_BUDGET));
        let per_replica: Vec<(Vec<f64>, Vec<f64>, Option<EmpiricalDensity>)> = (0..cfg.params.replicas as u64)
            .into_par_iter()
            .map(|r| -> Result<_> {
                let (pos, path) = particle_path(&sim, r, &times)?;
                let mut w1 = Vec::with_capacity(times.len());
                let mut joint = Vec::with_capacity(times.len());
                for (j, v) in path.iter().enumerate() {
                    let emp = CircleMeasure::atoms(
                        v.iter().map(|&x| (TorusPoint::wrap(x).value(), 1.0 / n as f64)).collect(),
                    );
                    w1.push(wasserstein1_v(&emp, &limits[j])?);
                    if let Some(c) = joint_on {
                        joint.push(wasserstein1_joint(&WeightedAtomMeasure::empirical(&pos, v), &c[j])?);
                    }
                }
                let density = if r == 0 {
                    let alpha = mollifier_scale_for(n);
                    let k = cfg.params.energy_cells.max(resolving_grid(alpha));
                    let last = path.last().expect("at least one time");
                    Some(mollified_density(&WeightedAtomMeasure::empirical(&pos, last), k, alpha)?)
                } else {
                    None
                };
                Ok((w1, joint, density))
            })
            .collect::<Result<_>>()?;
        for (j, &t) in times.iter().enumerate() {
            let w1: Vec<f64> = per_replica.iter().map(|p| p.0[j]).collect();
            let (w1_mean, w1_stderr) = mean_stderr(&w1);
            let joint_mean = if joint_on.is_some() {
                mean_stderr(&per_replica.iter().map(|p| p.1[j]).collect::<Vec<_>>()).0
            } else {
                f64::NAN
            };
            rows.push(ConvergenceRow { n, t, w1_mean, w1_stderr, joint_mean, w1 });
        }
        if let Some(d) = &per_replica[0].2 {
            let t = *times.last().expect("at least one time");
            let dr: Vec<String> = d.centers().zip(&d.values).map(|(v, u)| format!("{},{}", num(v), num(*u))).collect();
            w.csv(&format!("density_t{}_N{n}.csv", time_tag(t)), "v,u", &dr)?;
        }
    }
    let main: Vec<String> =
        rows.iter().map(|r| format!("{},{},{},{}", r.n, num(r.t), num(r.w1_mean), num(r.joint_mean))).collect();
    w.csv("w1_convergence.csv", "N,t,w1_v,w1_joint_or_nan", &main)?;
    let err: Vec<String> =
        rows.iter().map(|r| format!("{},{},{},{}", r.n, num(r.t), cfg.params.replicas, num(r.w1_stderr))).collect();
    w.csv("w1_convergence_stderr.csv", "N,t,replicas,w1_v_stderr", &err)?;
    let series: Vec<Series> = times
        .iter()
        .map(|&t| Series {
            label: format!("t = {}", time_tag(t)),
            points: rows.iter().filter(|r| r.t == t).map(|r| (r.n as f64, r.w1_mean)).collect(),
        })
        .collect();
    w.figure(
        "w1_convergence.svg",
        &Figure::Lines {
            title: "W1 of voltage marginals".into(),
            x_label: "N".into(),
            y_label: "mean W1".into(),
            axes: Axes::LogLog,
            series,
        },
    )?;
    Ok(ConvergenceTable { rows })
}

// ---------------------------------------------------------------------- energy

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyRow {
    pub n: usize,
    pub alpha: f64,
    pub cells: usize,
    pub sup_l2_mean: f64,
    pub sup_l2_stderr: f64,
    pub initial_l2_mean: f64,
    /// `int_0^T int |u'|^2` by the trapezoid rule over snapshots.
    pub h1_integral_mean: f64,
    pub time_regularity_mean: f64,
}

fn energy(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Vec<EnergyRow>> {
    let spacing =
        cfg.sim.output_interval.ok_or_else(|| Error::Config("the energy study needs sim.output_interval".into()))?;
    let times = pde_grid(cfg, spacing)?;
    let laws = particle_laws(cfg, None)?;
    let mut rows = Vec::new();
    for &n in &cfg.params.n_list {
        let alpha = mollifier_scale_for(n);
        let k = cfg.params.energy_cells.max(resolving_grid(alpha));
        let sim = cfg.sim_config(n, laws.clone());
        let per: Vec<[f64; 4]> = (0..cfg.params.replicas as u64)
            .into_par_iter()
            .map(|r| -> Result<[f64; 4]> {
                let (pos, path) = particle_path(&sim, r, &times)?;
                let dens: Vec<EmpiricalDensity> = path
                    .iter()
                    .map(|v| mollified_density(&WeightedAtomMeasure::empirical(&pos, v), k, alpha))
                    .collect::<Result<_>>()?;
                let en: Vec<(f64, f64)> = dens.iter().map(l2_energy).collect();
                let sup = en.iter().map(|e| e.0).fold(0.0, f64::max);
                let h1 = en.windows(2).map(|p| 0.5 * (p[0].1 + p[1].1) * spacing).sum::<f64>();
                let reg = time_regularity_h_minus2(&dens, spacing, cfg.params.holder_alpha)?;
                Ok([sup, en[0].0, h1, reg])
            })
            .collect::<Result<_>>()?;
        let col = |i: usize| per.iter().map(|p| p[i]).collect::<Vec<f64>>();
        let (sup_l2_mean, sup_l2_stderr) = mean_stderr(&col(0));
        rows.push(EnergyRow {
            n,
            alpha,
            cells: k,
            sup_l2_mean,
            sup_l2_stderr,
            initial_l2_mean: mean_stderr(&col(1)).0,
            h1_integral_mean: mean_stderr(&col(2)).0,
            time_regularity_mean: mean_stderr(&col(3)).0,
        });
    }
    let text: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                r.n,
                num(r.alpha),
                r.cells,
                num(r.sup_l2_mean),
                num(r.sup_l2_stderr),
                num(r.initial_l2_mean),
                num(r.h1_integral_mean),
                num(r.time_regularity_mean)
            )
        })
        .collect();
    w.csv(
        "energy.csv",
        "N,alpha,cells,sup_l2_mean,sup_l2_stderr,initial_l2_mean,h1_time_integral_mean,time_regularity_mean",
        &text,
    )?;
    w.figure(
        "energy.svg",
        &Figure::Lines {
            title: "sup_t int u^2 against N".into(),
            x_label: "N".into(),
            y_label: "sup_t int u^2".into(),
            axes: Axes::LogLog,
            series: vec![Series {
                label: "mean over replicas".into(),
                points: rows.iter().map(|r| (r.n as f64, r.sup_l2_mean)).collect(),
            }],
        },
    )?;
    Ok(rows)
}

// ------------------------------------------------------------------ mild check

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// `(mode label, t, mild residual)`
    pub mild: Vec<(String, f64, f64)>,
    /// `(mode label, weak residual of the PDE path)`
    pub weak_pde: Vec<(String, f64)>,
    /// `(N, mean over replicas of the largest weak residual over modes, stderr)`
    pub weak_particles: Vec<(usize, f64, f64)>,
}

fn mild_check(cfg: &ExperimentConfig, w: &mut Writer) -> Result<ResidualReport> {
    let init = pde_initial(cfg)?;
    let sol = solve_from(cfg, &init, cfg.pde.output_interval)?;
    let modes = TestFunction::fourier_modes(cfg.params.k_modes);
    let mut mild = Vec::new();
    for phi in &modes {
        for t in cfg.eval_times() {
            mild.push((phi.label(), t, mild_residual(&sol, phi, t, &cfg.model)?));
        }
    }
    let times = sol.times();
    let weak_pde: Vec<(String, f64)> = modes
        .iter()
        .map(|phi| (phi.label(), weak_residual_phi(&sol.snapshots, &times, &sol.snapshots[0], phi, &cfg.model)))
        .collect();

    let laws = particle_laws(cfg, Some(&init))?;
    let mut weak_particles = Vec::new();
    let mut per_mode_rows = Vec::new();
    for &n in &cfg.params.n_list {
        let sim = cfg.sim_config(n, laws.clone());
        let per: Vec<Vec<f64>> = (0..cfg.params.replicas as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<f64>> {
                let (pos, path) = particle_path(&sim, r, &times)?;
                let meas: Vec<WeightedAtomMeasure> =
                    path.iter().map(|v| WeightedAtomMeasure::empirical(&pos, v)).collect();
                Ok(modes.iter().map(|phi| weak_residual_phi(&meas, &times, &meas[0], phi, &cfg.model)).collect())
            })
            .collect::<Result<_>>()?;
        let worst: Vec<f64> = per.iter().map(|v| v.iter().copied().fold(0.0, f64::max)).collect();
        let (mean, se) = mean_stderr(&worst);
        weak_particles.push((n, mean, se));
        for (i, phi) in modes.iter().enumerate() {
            let (m, s) = mean_stderr(&per.iter().map(|v| v[i]).collect::<Vec<_>>());
            per_mode_rows.push(format!("{n},{},{},{}", phi.label(), num(m), num(s)));
        }
    }

    let rows: Vec<String> = mild.iter().map(|(l, t, r)| format!("{l},{},{}", num(*t), num(*r))).collect();
    w.csv("mild_residual.csv", "mode,t,residual", &rows)?;
    let rows: Vec<String> = weak_pde.iter().map(|(l, r)| format!("{l},{}", num(*r))).collect();
    w.csv("weak_residual.csv", "mode,residual", &rows)?;
    w.csv("weak_residual_particles.csv", "N,mode,residual_mean,residual_stderr", &per_mode_rows)?;
    let mut series: Vec<Series> = Vec::new();
    for phi in &modes {
        let label = phi.label();
        series.push(Series {
            label: label.clone(),
            points: mild.iter().filter(|m| m.0 == label).map(|m| (m.1, m.2)).collect(),
        });
    }
    w.figure(
        "mild_residual.svg",
        &Figure::Lines {
            title: "mild residual".into(),
            x_label: "t".into(),
            y_label: "residual".into(),
            axes: Axes::Linear,
            series,
        },
    )?;
    Ok(ResidualReport { mild, weak_pde, weak_particles })
}

// ------------------------------------------------------------------- mkv check

#[derive(Clone, Debug, PartialEq)]
pub struct MkvReport {
    pub samples: Vec<MkvSample>,
    /// `(t, W1 between the sample law and the PDE voltage marginal)`
    pub w1: Vec<(f64, f64)>,
}

fn mkv_check(cfg: &ExperimentConfig, w: &mut Writer) -> Result<MkvReport> {
    let sol = solve_pde(cfg)?;
    let times = cfg.eval_times();
    let p = &cfg.params;
    let samples = mkv_simulate(&sol, &cfg.model, p.mkv_samples, cfg.seed, p.mkv_dt, &times)?;
    let mut w1 = Vec::new();
    let mut series = Vec::new();
    for &t in &times {
        let at: Vec<(f64, f64)> =
            samples.iter().filter(|s| s.t == t).map(|s| (s.v_canonical, 1.0 / p.mkv_samples as f64)).collect();
        let target = snapshot_at(&sol, t)?.v_density();
        w1.push((t, wasserstein1_v(&CircleMeasure::atoms(at.clone()), &CircleMeasure::Cells(target.clone()))?));
        if t == *times.last().expect("nonempty") {
            let h = PERIOD / target.len() as f64;
            series.push(Series {
                label: "PDE".into(),
                points: target.iter().enumerate().map(|(k, &r)| ((k as f64 + 0.5) * h, r)).collect(),
            });
            let bins = 50;
            let mut hist = vec![0.0; bins];
            for (v, m) in &at {
                hist[((v / PERIOD * bins as f64) as usize).min(bins - 1)] += m * bins as f64 / PERIOD;
            }
            series.push(Series {
                label: "samples".into(),
                points: hist.iter().enumerate().map(|(k, &r)| ((k as f64 + 0.5) * PERIOD / bins as f64, r)).collect(),
            });
        }
    }
    let rows: Vec<String> = samples
        .iter()
        .map(|s| {
            format!(
                "{},{},{},{},{},{}",
                s.sample,
                num(s.x.0[0]),
                num(s.x.0[1]),
                num(s.x.0[2]),
                num(s.v_canonical),
                num(s.t)
            )
        })
        .collect();
    w.csv("mkv_samples.csv", "sample,x1,x2,x3,v_canonical,t", &rows)?;
    let rows: Vec<String> = w1.iter().map(|(t, d)| format!("{},{}", num(*t), num(*d))).collect();
    w.csv("mkv_w1.csv", "t,w1_v", &rows)?;
    w.figure(
        "mkv_density.svg",
        &Figure::Lines {
            title: "voltage law at the last time".into(),
            x_label: "v".into(),
            y_label: "density".into(),
            axes: Axes::Linear,
            series,
        },
    )?;
    Ok(MkvReport { samples, w1 })
}

// ----------------------------------------------------------------- euler order

#[derive(Clone, Debug, PartialEq)]
pub struct EulerLevel {
    pub dt_coarse: f64,
    pub dt_fine: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Geometric mean over replicas.
    pub geomean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EulerOrderReport {
    pub levels: Vec<EulerLevel>,
    /// Least-squares slope of the per-replica `log difference` against
    /// `log dt_fine`, pooled over replicas. Rare paths that leave the
    /// repelling threshold on opposite sides at two step sizes dominate the
    /// arithmetic mean but not this fit.
    pub order: f64,
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn euler_order(cfg: &ExperimentConfig, w: &mut Writer) -> Result<EulerOrderReport> {
    let levels = &cfg.params.dt_levels;
    let sim = SimConfig {
        dt: levels[0],
        output_interval: None,
        ..cfg.sim_config(cfg.sim.n_particles, particle_laws(cfg, None)?)
    };
    let per: Vec<Vec<f64>> = (0..cfg.params.replicas as u64)
        .into_par_iter()
        .map(|r| euler_refinement_error(&sim, levels, r))
        .collect::<Result<_>>()?;
    let rows: Vec<EulerLevel> = levels
        .windows(2)
        .enumerate()
        .map(|(i, l)| {
            let col: Vec<f64> = per.iter().map(|p| p[i]).collect();
            let (mean, stderr) = mean_stderr(&col);
            let geomean = (col.iter().map(|v| v.ln()).sum::<f64>() / col.len() as f64).exp();
            EulerLevel { dt_coarse: l[0], dt_fine: l[1], mean, stderr, geomean }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        per.iter().flat_map(|p| rows.iter().zip(p).map(|(r, &e)| (r.dt_fine, e))).unzip();
    let order = if rows.len() >= 2 { loglog_slope(&xs, &ys) } else { f64::NAN };
    let text: Vec<String> = rows
        .iter()
        .map(|r| {
            format!("{},{},{},{},{}", num(r.dt_coarse), num(r.dt_fine), num(r.mean), num(r.stderr), num(r.geomean))
        })
        .collect();
    w.csv("euler_order.csv", "dt_coarse,dt_fine,mean_sup_diff,stderr,geomean_sup_diff", &text)?;
    w.csv("euler_order_fit.csv", "fitted_order,replicas", &[format!("{},{}", num(order), cfg.params.replicas)])?;
    let curve = |f: fn(&EulerLevel) -> f64| rows.iter().map(|r| (r.dt_fine, f(r))).collect::<Vec<_>>();
    w.figure(
        "euler_order.svg",
        &Figure::Lines {
            title: format!("Euler refinement differences, fitted order {order:.2}"),
            x_label: "dt".into(),
            y_label: "sup difference".into(),
            axes: Axes::LogLog,
            series: vec![
                Series { label: "mean".into(), points: curve(|r| r.mean) },
                Series { label: "geometric mean".into(), points: curve(|r| r.geomean) },
            ],
        },
    )?;
    Ok(EulerOrderReport { levels: rows, order })
}

// ------------------------------------------------------------ typed entry points

macro_rules! entry {
    ($(#[$doc:meta])* $name:ident, $inner:ident, $out:ty) => {
        $(#[$doc])*
        pub fn $name(cfg: &ExperimentConfig) -> Result<$out> {
            cfg.validate()?;
            let mut w = Writer::new(cfg)?;
            $inner(cfg, &mut w)
        }
    };
}

entry!(
    /// Mean and standard error of `W1(pi_v S^N_t, pi_v mu_t)` per `(N, t)`.
    run_convergence_study, convergence, ConvergenceTable
);
entry!(
    /// Energy, dissipation and time-regularity estimates per `N`.
    run_energy_study, energy, Vec<EnergyRow>
);
entry!(
    /// Spike raster and cascade statistics per replica.
    run_spike_study, spikes, Vec<CascadeRow>
);
entry!(run_mild_check, mild_check, ResidualReport);
entry!(run_mkv_check, mkv_check, MkvReport);
entry!(run_euler_order, euler_order, EulerOrderReport);
entry!(run_pde, pde, FpSolution);
entry!(
    /// Returns the number of logged spikes.
    run_trajectories, trajectories, usize
);

/// Every file in `dir` with its contents, sorted by name.
pub fn read_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            out.push((entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path())?));
        }
    }
    out.sort();
    Ok(out)
}
