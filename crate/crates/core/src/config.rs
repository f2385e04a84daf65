//! Experiment configuration files (TOML) and the named scenario presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fokker_planck::FluxScheme;
use crate::model::{Domain, InitialLaws, ModelCoefficients, Position, PositionLaw, ThetaKernel, VoltageDensity};
use crate::particle::{InteractionMode, SimConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Trajectories,
    Pde,
    Spikes,
    Convergence,
    Energy,
    MildCheck,
    MkvCheck,
    EulerOrder,
}

impl StudyKind {
    pub const ALL: [StudyKind; 8] = [
        StudyKind::Trajectories,
        StudyKind::Pde,
        StudyKind::Spikes,
        StudyKind::Convergence,
        StudyKind::Energy,
        StudyKind::MildCheck,
        StudyKind::MkvCheck,
        StudyKind::EulerOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Trajectories => "trajectories",
            StudyKind::Pde => "pde",
            StudyKind::Spikes => "spikes",
            StudyKind::Convergence => "convergence",
            StudyKind::Energy => "energy",
            StudyKind::MildCheck => "mild_check",
            StudyKind::MkvCheck => "mkv_check",
            StudyKind::EulerOrder => "euler_order",
        }
    }
}

/// Particle-system settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub n_replicas: usize,
    #[serde(default)]
    pub interaction: InteractionMode,
    /// Snapshot spacing; defaults to the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_interval: Option<f64>,
    /// Draw particle positions from the atoms of the discretized PDE so
    /// that both sides share one position law.
    #[serde(default)]
    pub share_pde_atoms: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            n_particles: default_particles(),
            dt: default_dt(),
            n_replicas: 1,
            interaction: InteractionMode::Exact,
            output_interval: None,
            share_pde_atoms: false,
        }
    }
}

/// Fokker-Planck discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    #[serde(default = "default_atoms")]
    pub atoms: usize,
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Fixed time step; defaults to the CFL bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_pde_output")]
    pub output_interval: f64,
    #[serde(default)]
    pub scheme: FluxScheme,
}

impl Default for PdeSection {
    fn default() -> Self {
        PdeSection {
            atoms: default_atoms(),
            cells: default_cells(),
            dt: None,
            output_interval: default_pde_output(),
            scheme: FluxScheme::default(),
        }
    }
}

/// Study-specific parameters. Each study reads the fields it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyParams {
    /// Population sizes for the convergence, energy and weak-residual scans.
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    /// Evaluation times; empty means the horizon only.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Replicas per population size.
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Highest Fourier mode of the test functions.
    #[serde(default = "default_modes")]
    pub k_modes: u32,
    /// Coarse voltage cells per atom for the joint distance; 0 disables it.
    #[serde(default)]
    pub joint_cells: usize,
    #[serde(default = "default_mkv_samples")]
    pub mkv_samples: usize,
    #[serde(default = "default_dt")]
    pub mkv_dt: f64,
    #[serde(default = "default_levels")]
    pub dt_levels: Vec<f64>,
    #[serde(default = "default_window")]
    pub cascade_window: f64,
    /// Particles with index below the split form the first population of
    /// the propagation-delay measurement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_split: Option<usize>,
    #[serde(default = "default_holder_alpha")]
    pub holder_alpha: f64,
    /// Minimum grid for the mollified densities; raised to the resolving
    /// grid of each mollifier scale.
    #[serde(default = "default_energy_cells")]
    pub energy_cells: usize,
}

impl Default for StudyParams {
    fn default() -> Self {
        StudyParams {
            n_list: default_n_list(),
            times: Vec::new(),
            replicas: default_replicas(),
            k_modes: default_modes(),
            joint_cells: 0,
            mkv_samples: default_mkv_samples(),
            mkv_dt: default_dt(),
            dt_levels: default_levels(),
            cascade_window: default_window(),
            population_split: None,
            holder_alpha: default_holder_alpha(),
            energy_cells: default_energy_cells(),
        }
    }
}

fn default_particles() -> usize {
    100
}
fn default_dt() -> f64 {
    1e-3
}
fn one() -> usize {
    1
}
fn default_atoms() -> usize {
    50
}
fn default_cells() -> usize {
    200
}
fn default_pde_output() -> f64 {
    0.01
}
fn default_n_list() -> Vec<usize> {
    vec![100, 1000, 10000]
}
fn default_replicas() -> usize {
    20
}
fn default_modes() -> u32 {
    4
}
fn default_mkv_samples() -> usize {
    10_000
}
fn default_levels() -> Vec<f64> {
    vec![8e-3, 4e-3, 2e-3, 1e-3]
}
fn default_window() -> f64 {
    0.3
}
fn default_holder_alpha() -> f64 {
    0.25
}
fn default_energy_cells() -> usize {
    256
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: StudyKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub plot: bool,
    pub model: ModelCoefficients,
    #[serde(default)]
    pub laws: InitialLaws,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub pde: PdeSection,
    #[serde(default)]
    pub params: StudyParams,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Evaluation times, defaulting to the horizon.
    pub fn eval_times(&self) -> Vec<f64> {
        if self.params.times.is_empty() {
            vec![self.model.horizon]
        } else {
            self.params.times.clone()
        }
    }

    /// Particle settings with `n` particles and the given position law.
    pub fn sim_config(&self, n: usize, laws: InitialLaws) -> SimConfig {
        SimConfig {
            n_particles: n,
            dt: self.sim.dt,
            seed: self.seed,
            n_replicas: self.sim.n_replicas,
            interaction: self.sim.interaction,
            output_interval: self.sim.output_interval,
            record_steps: false,
            coeffs: self.model.clone(),
            laws,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.laws.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.sim.n_particles == 0 || self.sim.n_replicas == 0 {
            return bad("sim.n_particles and sim.n_replicas must be positive");
        }
        if !(self.sim.dt > 0.0) {
            return bad("sim.dt must be positive");
        }
        if self.pde.atoms == 0 || self.pde.cells < 8 {
            return bad("pde.atoms must be positive and pde.cells at least 8");
        }
        if !(self.pde.output_interval > 0.0) {
            return bad("pde.output_interval must be positive");
        }
        let p = &self.params;
        if p.replicas == 0 {
            return bad("params.replicas must be positive");
        }
        if let Some(t) = p.times.iter().find(|&&t| !(0.0..=self.model.horizon * (1.0 + 1e-12)).contains(&t)) {
            return Err(Error::Config(format!("evaluation time {t} lies outside [0, horizon]")));
        }
        match self.study {
            StudyKind::Convergence | StudyKind::Energy if p.n_list.is_empty() || p.n_list.contains(&0) => {
                bad("params.n_list must list positive population sizes")
            }
            StudyKind::MkvCheck if p.mkv_samples == 0 || !(p.mkv_dt > 0.0) => {
                bad("params.mkv_samples and params.mkv_dt must be positive")
            }
            StudyKind::EulerOrder if p.dt_levels.len() < 2 => bad("params.dt_levels needs at least two step sizes"),
            StudyKind::Spikes if !(p.cascade_window > 0.0) => bad("params.cascade_window must be positive"),
            StudyKind::Energy if !(p.holder_alpha > 0.0 && p.holder_alpha < 0.5) => {
                bad("params.holder_alpha must lie in (0, 1/2)")
            }
            _ => Ok(()),
        }
    }
}

pub const PRESETS: [&str; 4] = ["fig1", "fig2", "fig3", "zero-coupling"];

/// Spiking scenario presets. The parameter values are choices of this crate
/// picked to make the qualitative behaviour visible at small `N`.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let spiking = ModelCoefficients {
        lambda_hat: 1.0,
        epsilon: 0.02,
        delta: 0.3,
        sigma_bump: 1.2,
        theta: ThetaKernel::Constant { theta0: 60.0 },
        horizon: 3.0,
        ..ModelCoefficients::default()
    };
    let charging = InitialLaws {
        domain: Domain::default(),
        nu: PositionLaw::default(),
        rho0: VoltageDensity::PiecewiseConstant { values: vec![1.0, 0.0] },
    };
    let base = ExperimentConfig {
        study: StudyKind::Spikes,
        seed: 1,
        output_dir: PathBuf::from(format!("out/{name}")),
        plot: true,
        model: spiking,
        laws: charging,
        sim: SimSection { n_particles: 10, n_replicas: 10, output_interval: Some(0.1), ..SimSection::default() },
        pde: PdeSection::default(),
        params: StudyParams::default(),
    };
    let cfg = match name {
        // Spatially decaying coupling in the unit cube.
        "fig1" => ExperimentConfig {
            model: ModelCoefficients {
                theta: ThetaKernel::Gaussian { theta0: 60.0, length: 0.3 },
                ..base.model.clone()
            },
            sim: SimSection { n_particles: 100, n_replicas: 1, ..base.sim.clone() },
            ..base
        },
        // Strong uniform coupling.
        "fig2" => base,
        // Two populations of 20 joined by a single bridge neuron (particle 0).
        "fig3" => {
            let n = 40;
            let atoms: Vec<Position> = (0..n)
                .map(|i| {
                    let (cx, j) = if i < n / 2 { (0.25, i) } else { (0.75, i - n / 2) };
                    Position([cx, 0.1 + 0.04 * j as f64, 0.5])
                })
                .collect();
            let coupling = 60.0;
            let matrix: Vec<Vec<f64>> = (0..n)
                .map(|r| {
                    (0..n)
                        .map(|e| {
                            let same = (r < n / 2) == (e < n / 2);
                            let bridge = e == 0 && r >= n / 2;
                            if same || bridge {
                                coupling
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            let placed = PositionLaw::Atoms { points: atoms.clone(), weights: None, sequential: true };
            ExperimentConfig {
                model: ModelCoefficients { theta: ThetaKernel::Block { atoms, matrix }, ..base.model.clone() },
                laws: InitialLaws { nu: placed, ..base.laws.clone() },
                sim: SimSection { n_particles: n, interaction: InteractionMode::Binned, ..base.sim.clone() },
                params: StudyParams { population_split: Some(n / 2), ..base.params.clone() },
                ..base
            }
        }
        "zero-coupling" => ExperimentConfig {
            model: ModelCoefficients { theta: ThetaKernel::Constant { theta0: 0.0 }, ..base.model.clone() },
            ..base
        },
        other => return Err(Error::Config(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            let text = cfg.to_toml().unwrap();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(back, cfg, "{name}");
            assert_eq!(back.to_toml().unwrap(), text);
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let text = r#"
study = "convergence"
[model]
lambda_hat = 1.0
epsilon = 0.02
delta = 0.3
horizon = 1.0
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.params.n_list, vec![100, 1000, 10000]);
        assert_eq!(cfg.sim.dt, 1e-3);
        assert_eq!(cfg.eval_times(), vec![1.0]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let base = "study = \"pde\"\n[model]\nlambda_hat = 1.0\nepsilon = 0.02\ndelta = 0.3\nhorizon = 1.0\n";
        assert!(matches!(ExperimentConfig::from_toml(&format!("{base}colour = 3\n")), Err(Error::Parse(_))));
        let neg = base.replace("epsilon = 0.02", "epsilon = -1.0");
        assert!(matches!(ExperimentConfig::from_toml(&neg), Err(Error::Config(_))));
        let late = format!("{base}[params]\ntimes = [2.0]\n");
        assert!(matches!(ExperimentConfig::from_toml(&late), Err(Error::Config(_))));
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn shipped_example_parses() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
        let cfg = ExperimentConfig::load(&path).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
