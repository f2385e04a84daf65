//! Acceptance suite: one test per criterion, each printing a verdict line.
//!
//! Run with `cargo test -p spikefield --test acceptance -- --nocapture` to
//! see the verdicts.

mod common;

use std::time::Instant;

use std::path::Path;

use common::{lp_transport, report, wrapped_heat_kernel};
use rand::Rng;
use spikefield::config::{PdeSection, SimSection, StudyParams};
use spikefield::fokker_planck::{
    discretize_initial, fp_solve, mild_residual, uniform_times, weak_residual_phi, FpOptions,
};
use spikefield::measures::{
    martingale_functional, wasserstein1_joint, wasserstein1_v, CircleMeasure, WeightedAtomMeasure,
};
use spikefield::model::{Domain, InitialLaws, LambdaMode, ModelCoefficients, PositionLaw, ThetaKernel, VoltageDensity};
use spikefield::particle::{simulate, InteractionMode, SimConfig};
use spikefield::rng::{stream, Purpose};
use spikefield::study::{self, read_outputs};
use spikefield::{
    preset, torus_dist, ExperimentConfig, MollifierFamily, Position, StudyKind, TestFunction, TorusPoint,
};

fn full_model() -> ModelCoefficients {
    ModelCoefficients {
        lambda_hat: 1.0,
        epsilon: 0.02,
        delta: 0.3,
        theta: ThetaKernel::Gaussian { theta0: 2.0, length: 0.5 },
        ..ModelCoefficients::default()
    }
}

fn laws(rho0: VoltageDensity) -> InitialLaws {
    InitialLaws { domain: Domain::default(), nu: PositionLaw::default(), rho0 }
}

#[test]
fn criterion_01_mass_conservation() {
    let started = Instant::now();
    let coeffs = full_model().with_horizon(2.0);
    let init = discretize_initial(&laws(VoltageDensity::Uniform), 100, 200, 11).unwrap();
    let sol = fp_solve(&init, 2.0, &coeffs, &uniform_times(2.0, 40), FpOptions::default()).unwrap();
    let worst = sol.snapshots.iter().map(|s| s.max_mass_error()).fold(0.0, f64::max);
    let positive = sol.snapshots.iter().all(|s| s.rho.iter().flatten().all(|&r| r >= 0.0));
    let secs = started.elapsed().as_secs_f64();
    report(
        1,
        "mass conservation",
        worst <= 1e-10 && positive && secs <= 30.0,
        &format!("max row-mass error {worst:.2e} over {} snapshots", sol.snapshots.len()),
        started,
    );
}

#[test]
fn criterion_02_heat_kernel_oracle() {
    let started = Instant::now();
    let eps = 0.05;
    let coeffs = ModelCoefficients {
        epsilon: eps,
        lambda_mode: LambdaMode::Zero,
        theta: ThetaKernel::Constant { theta0: 0.0 },
        ..ModelCoefficients::default()
    };
    let (center, alpha, t) = (0.7, 0.2, 0.5);
    let init = discretize_initial(&laws(VoltageDensity::MollifiedPoint { center, alpha }), 2, 400, 1).unwrap();
    let sol = fp_solve(&init, t, &coeffs, &[t], FpOptions::default()).unwrap();
    let rho = &sol.snapshots[0].rho[0];

    // Oracle: mollified point mass convolved with the wrapped Gaussian kernel,
    // by composite Simpson over the mollifier support.
    let fam = MollifierFamily::new(alpha).unwrap();
    let n_quad = 4000;
    let oracle = |v: f64| {
        let a = center - 0.5 * alpha;
        let w = alpha / n_quad as f64;
        (0..=n_quad)
            .map(|i| {
                let y = a + i as f64 * w;
                let c = if i == 0 || i == n_quad {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * fam.eval(TorusPoint::wrap(y - center)) * wrapped_heat_kernel(v - y, eps, t)
            })
            .sum::<f64>()
            * w
            / 3.0
    };
    let h = 2.0 / rho.len() as f64;
    let err = rho.iter().enumerate().map(|(k, r)| (r - oracle((k as f64 + 0.5) * h)).abs()).fold(0.0, f64::max);
    report(2, "heat-kernel oracle", err <= 1e-3, &format!("sup error {err:.2e} at K=400, t={t}"), started);
}

fn interacting_solution(k: usize, t_end: f64, n_out: usize) -> (ModelCoefficients, spikefield::FpSolution) {
    let coeffs = full_model().with_horizon(t_end);
    let init = discretize_initial(&laws(VoltageDensity::Uniform), 60, k, 3).unwrap();
    let sol = fp_solve(&init, t_end, &coeffs, &uniform_times(t_end, n_out), FpOptions::default()).unwrap();
    (coeffs, sol)
}

#[test]
fn criterion_06_mild_residual() {
    let started = Instant::now();
    let (coeffs, sol) = interacting_solution(400, 1.0, 200);
    let mut worst: f64 = 0.0;
    for phi in TestFunction::fourier_modes(4) {
        for &t in &[0.25, 0.5, 1.0] {
            let r = mild_residual(&sol, &phi, t, &coeffs).unwrap();
            println!("  mild residual {} t={t}: {r:.3e}", phi.label());
            worst = worst.max(r);
        }
    }
    report(6, "mild-solution residual", worst <= 5e-3, &format!("max residual {worst:.2e} over modes k<=4"), started);
}

#[test]
fn criterion_07_weak_residual() {
    let started = Instant::now();
    let (coeffs, sol) = interacting_solution(400, 1.0, 200);
    let times = sol.times();
    let mut worst: f64 = 0.0;
    for phi in TestFunction::fourier_modes(4) {
        let r = weak_residual_phi(&sol.snapshots, &times, &sol.snapshots[0], &phi, &coeffs);
        println!("  weak residual {}: {r:.3e}", phi.label());
        worst = worst.max(r);
    }
    report(7, "weak-residual functional", worst <= 1e-2, &format!("PDE max {worst:.2e}"), started);
}

#[test]
fn criterion_10_ot_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = stream(Purpose::Particles, 2024, 0, 0);
    let mut joint_err: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let mut side = |k: usize| {
            let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
            let s: f64 = w.iter().sum();
            let atoms: Vec<(Position, TorusPoint)> = (0..k)
                .map(|_| {
                    (Position([rng.random(), rng.random(), rng.random()]), TorusPoint::wrap(2.0 * rng.random::<f64>()))
                })
                .collect();
            let mut w: Vec<f64> = w.iter().map(|x| x / s).collect();
            let tail: f64 = w[..k - 1].iter().sum();
            w[k - 1] = 1.0 - tail;
            WeightedAtomMeasure::new(atoms, w).unwrap()
        };
        let (mu, nu) = (side(n), side(m));
        let cost: Vec<f64> = mu
            .atoms()
            .iter()
            .flat_map(|(x, v)| nu.atoms().iter().map(move |(y, w)| x.dist_l1(y) + torus_dist(*v, *w)))
            .collect();
        let lp = lp_transport(mu.weights(), nu.weights(), &cost);
        joint_err = joint_err.max((wasserstein1_joint(&mu, &nu).unwrap() - lp).abs());
    }
    let mut circle_err: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=5);
        let mut side = |k: usize| {
            let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
            let s: f64 = w.iter().sum();
            let v: Vec<f64> = (0..k).map(|_| 2.0 * rng.random::<f64>()).collect();
            (v, w.iter().map(|x| x / s).collect::<Vec<f64>>())
        };
        let (va, wa) = side(n);
        let (vb, wb) = side(m);
        let cost: Vec<f64> = va
            .iter()
            .flat_map(|&a| vb.iter().map(move |&b| torus_dist(TorusPoint::wrap(a), TorusPoint::wrap(b))))
            .collect();
        let lp = lp_transport(&wa, &wb, &cost);
        let mu = CircleMeasure::atoms(va.into_iter().zip(wa).collect());
        let nu = CircleMeasure::atoms(vb.into_iter().zip(wb).collect());
        circle_err = circle_err.max((wasserstein1_v(&mu, &nu).unwrap() - lp).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    report(
        10,
        "OT oracle equivalence",
        joint_err <= 1e-9 && circle_err <= 1e-12 && secs <= 30.0,
        &format!("joint max diff {joint_err:.1e}, circle max diff {circle_err:.1e}"),
        started,
    );
}

/// Study configuration on the full model with particles on the PDE atoms.
fn study_config(study: StudyKind, dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        study,
        seed: 17,
        output_dir: dir.to_path_buf(),
        plot: false,
        model: full_model(),
        laws: laws(VoltageDensity::Uniform),
        sim: SimSection { interaction: InteractionMode::Binned, share_pde_atoms: true, ..SimSection::default() },
        pde: PdeSection { atoms: 60, cells: 400, ..PdeSection::default() },
        params: StudyParams::default(),
    }
}

#[test]
fn criterion_03_particle_to_pde_convergence() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let n_list = vec![100, 1000, 10000];
    let params = StudyParams { n_list: n_list.clone(), times: vec![1.0], replicas: 20, ..StudyParams::default() };

    let mut free = study_config(StudyKind::Convergence, dir.path());
    free.model.theta = ThetaKernel::Constant { theta0: 0.0 };
    free.pde = PdeSection { atoms: 2, cells: 800, output_interval: 0.05, ..PdeSection::default() };
    free.params = params.clone();
    let free_table = study::run_convergence_study(&free).unwrap();
    let free_w: Vec<f64> = n_list.iter().map(|&n| free_table.row(n, 1.0).unwrap().w1_mean).collect();

    let mut coupled = study_config(StudyKind::Convergence, dir.path());
    coupled.pde.output_interval = 0.05;
    coupled.params = params;
    let coupled_table = study::run_convergence_study(&coupled).unwrap();
    let coupled_w: Vec<f64> = n_list.iter().map(|&n| coupled_table.row(n, 1.0).unwrap().w1_mean).collect();

    let decreasing = |w: &[f64]| w.windows(2).all(|p| p[1] < p[0]);
    let ratio = free_w[0] / free_w[2];
    let secs = started.elapsed().as_secs_f64();
    report(
        3,
        "particle to PDE convergence",
        decreasing(&free_w) && ratio >= 5.0 && decreasing(&coupled_w) && secs <= 300.0,
        &format!(
            "theta=0 W1 {:.2e}/{:.2e}/{:.2e} (ratio {ratio:.1}); theta0=2 W1 {:.2e}/{:.2e}/{:.2e}",
            free_w[0], free_w[1], free_w[2], coupled_w[0], coupled_w[1], coupled_w[2]
        ),
        started,
    );
}

#[test]
fn criterion_04_martingale_decay() {
    let started = Instant::now();
    let coeffs = full_model().with_horizon(1.0);
    let phi = TestFunction::cos(1);
    let replicas = 50;
    let mean_sup_sq = |n: usize| {
        let mut cfg = SimConfig::new(n, 1e-3, 23, coeffs.clone(), laws(VoltageDensity::Uniform));
        cfg.record_steps = true;
        let total: f64 = (0..replicas)
            .map(|r| {
                let traj = simulate(&cfg, r).unwrap();
                martingale_functional(&traj, &phi, &coeffs).unwrap().sup_abs.powi(2)
            })
            .sum();
        total / replicas as f64
    };
    let (small, large) = (mean_sup_sq(100), mean_sup_sq(400));
    let ratio = small / large;
    let secs = started.elapsed().as_secs_f64();
    report(
        4,
        "martingale decay",
        (2.5..=6.0).contains(&ratio) && secs <= 120.0,
        &format!("E sup M^2: N=100 {small:.3e}, N=400 {large:.3e}, ratio {ratio:.2}"),
        started,
    );
}

#[test]
fn criterion_05_energy_uniformity() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = study_config(StudyKind::Energy, dir.path());
    cfg.sim.output_interval = Some(0.05);
    cfg.params = StudyParams { n_list: vec![100, 1000, 10000], replicas: 10, ..StudyParams::default() };
    let rows = study::run_energy_study(&cfg).unwrap();
    let sup: Vec<f64> = rows.iter().map(|r| r.sup_l2_mean).collect();
    let spread = sup.iter().copied().fold(0.0, f64::max) / sup.iter().copied().fold(f64::INFINITY, f64::min);
    let secs = started.elapsed().as_secs_f64();
    report(
        5,
        "energy uniformity",
        spread <= 2.0 && secs <= 180.0,
        &format!("sup_t int u^2 = {:.3}/{:.3}/{:.3}, max/min {spread:.2}", sup[0], sup[1], sup[2]),
        started,
    );
}

#[test]
fn criterion_07_weak_residual_particles() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = study_config(StudyKind::MildCheck, dir.path());
    cfg.params = StudyParams { n_list: vec![100, 400], replicas: 10, times: vec![1.0], ..StudyParams::default() };
    let r = study::run_mild_check(&cfg).unwrap();
    let pde = r.weak_pde.iter().map(|m| m.1).fold(0.0, f64::max);
    let (small, large) = (r.weak_particles[0].1, r.weak_particles[1].1);
    let secs = started.elapsed().as_secs_f64();
    report(
        7,
        "weak-residual functional on empirical paths",
        pde <= 1e-2 && large < small && secs <= 120.0,
        &format!("PDE max {pde:.2e}; particles N=100 {small:.3e}, N=400 {large:.3e}"),
        started,
    );
}

#[test]
fn criterion_08_mckean_vlasov_fixed_point() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = study_config(StudyKind::MkvCheck, dir.path());
    cfg.params = StudyParams { mkv_samples: 10_000, mkv_dt: 1e-3, times: vec![1.0], ..StudyParams::default() };
    let r = study::run_mkv_check(&cfg).unwrap();
    let w1 = r.w1[0].1;
    let secs = started.elapsed().as_secs_f64();
    report(8, "McKean-Vlasov fixed point", w1 <= 0.05 && secs <= 60.0, &format!("W1 at t=1: {w1:.3e}"), started);
}

#[test]
fn criterion_09_euler_refinement() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = study_config(StudyKind::EulerOrder, dir.path());
    cfg.model.sigma_bump = 0.0;
    cfg.model.smoothing = Some(0.05);
    cfg.sim = SimSection { n_particles: 50, ..SimSection::default() };
    cfg.params = StudyParams { dt_levels: vec![8e-3, 4e-3, 2e-3, 1e-3], replicas: 20, ..StudyParams::default() };
    let r = study::run_euler_order(&cfg).unwrap();
    let diffs: Vec<String> = r.levels.iter().map(|l| format!("{:.2e}/{:.2e}", l.mean, l.geomean)).collect();
    let secs = started.elapsed().as_secs_f64();
    report(
        9,
        "Euler refinement order",
        r.order >= 0.4 && secs <= 60.0,
        &format!("fitted order {:.2}; mean/geometric-mean sup differences {}", r.order, diffs.join(", ")),
        started,
    );
}

#[test]
fn criterion_11_spike_cascade() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let mut cfg = preset(name).unwrap();
        cfg.output_dir = dir.path().join(name);
        cfg.plot = false;
        study::run_spike_study(&cfg).unwrap()
    };
    let strong = run("fig2");
    let hits = strong.iter().filter(|r| r.cascade_fraction >= 0.8).count();
    let quiet = run("zero-coupling");
    let quiet_mean = quiet.iter().map(|r| r.cascade_fraction).sum::<f64>() / quiet.len() as f64;
    let secs = started.elapsed().as_secs_f64();
    report(
        11,
        "spike cascade",
        strong.len() == 10 && hits >= 8 && quiet_mean < 0.3 && secs <= 60.0,
        &format!("{hits}/10 strong-coupling replicas cascade; zero-coupling mean fraction {quiet_mean:.2}"),
        started,
    );
}

/// Small configuration of every study.
fn determinism_configs(root: &Path) -> Vec<ExperimentConfig> {
    StudyKind::ALL
        .iter()
        .map(|&kind| {
            let mut cfg = study_config(kind, &root.join(kind.name()));
            cfg.model.horizon = 0.2;
            cfg.plot = true;
            cfg.sim = SimSection { n_particles: 30, n_replicas: 2, output_interval: Some(0.05), ..cfg.sim };
            cfg.pde = PdeSection { atoms: 5, cells: 80, output_interval: 0.01, ..cfg.pde };
            cfg.params = StudyParams {
                n_list: vec![20, 40],
                times: vec![0.1, 0.2],
                replicas: 3,
                k_modes: 2,
                joint_cells: 8,
                mkv_samples: 200,
                mkv_dt: 2e-3,
                dt_levels: vec![4e-3, 2e-3, 1e-3],
                energy_cells: 64,
                ..StudyParams::default()
            };
            cfg
        })
        .collect()
}

#[test]
fn criterion_12_determinism() {
    let started = Instant::now();
    let root = tempfile::tempdir().unwrap();
    let run_all = |threads: usize, tag: &str| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            determinism_configs(&root.path().join(tag))
                .iter()
                .map(|cfg| {
                    study::run(cfg).unwrap_or_else(|e| panic!("{} study failed: {e}", cfg.study.name()));
                    read_outputs(&cfg.output_dir).unwrap()
                })
                .collect::<Vec<_>>()
        })
    };
    let one = run_all(1, "a");
    let again = run_all(1, "b");
    let four = run_all(4, "c");
    let files: usize = one.iter().map(|o| o.len()).sum();
    let same = one == again && one == four;
    let csvs_ok = one.iter().flatten().filter(|(n, _)| n.ends_with(".csv")).all(|(_, b)| !b.contains(&b'\r'));
    report(
        12,
        "determinism",
        same && csvs_ok && one.iter().all(|o| !o.is_empty()),
        &format!("{files} files from {} studies identical at 1 and 4 threads", one.len()),
        started,
    );
}
