//! Model coefficients: discharge drift, noise profile, spatial coupling
//! kernel and the initial laws of positions and voltages.
//!
//! The simulator and solver only see coefficients through
//! [`MeanFieldCoefficients`]: a bounded self-drift whose discontinuities sit
//! on a null set, a C^1 diffusion bounded away from zero, and an interaction
//! that factorizes as `theta(x, y) * emitting(w) * receiving(v)`.
//! [`ModelCoefficients`] is the concrete integrate-and-fire instance.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::torus::{MollifierFamily, TorusPoint, PERIOD};

/// Fixed neuron location in `D`, a subset of `R^3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Position(pub [f64; 3]);

impl Position {
    pub fn dist2(&self, other: &Position) -> f64 {
        let d0 = self.0[0] - other.0[0];
        let d1 = self.0[1] - other.0[1];
        let d2 = self.0[2] - other.0[2];
        d0 * d0 + d1 * d1 + d2 * d2
    }

    pub fn dist_l1(&self, other: &Position) -> f64 {
        (self.0[0] - other.0[0]).abs() + (self.0[1] - other.0[1]).abs() + (self.0[2] - other.0[2]).abs()
    }
}

/// Axis-aligned box standing in for the neuron domain `D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Default for Domain {
    fn default() -> Self {
        Domain { lo: [0.0; 3], hi: [1.0; 3] }
    }
}

impl Domain {
    pub fn contains(&self, p: &Position) -> bool {
        (0..3).all(|d| p.0[d] >= self.lo[d] && p.0[d] <= self.hi[d])
    }

    pub fn clamp(&self, mut p: Position) -> Position {
        for d in 0..3 {
            p.0[d] = p.0[d].clamp(self.lo[d], self.hi[d]);
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if (0..3).any(|d| !(self.lo[d] < self.hi[d]) || !self.lo[d].is_finite() || !self.hi[d].is_finite()) {
            return Err(Error::Config(format!("degenerate domain box {:?}..{:?}", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// Spatial coupling `theta(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThetaKernel {
    Constant {
        theta0: f64,
    },
    /// `theta0 * exp(-|x - y|^2 / (2 length^2))`.
    Gaussian {
        theta0: f64,
        length: f64,
    },
    /// Coupling defined on a fixed atom set: `matrix[i][j]` couples receiver
    /// atom `i` to emitter atom `j`.
    Block {
        atoms: Vec<Position>,
        matrix: Vec<Vec<f64>>,
    },
}

impl Default for ThetaKernel {
    fn default() -> Self {
        ThetaKernel::Gaussian { theta0: 2.0, length: 0.5 }
    }
}

impl ThetaKernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ThetaKernel::Constant { theta0 } => check_nonneg("theta0", *theta0),
            ThetaKernel::Gaussian { theta0, length } => {
                check_nonneg("theta0", *theta0)?;
                if !(*length > 0.0) {
                    return Err(Error::Config(format!("gaussian kernel length must be positive, got {length}")));
                }
                Ok(())
            }
            ThetaKernel::Block { atoms, matrix } => {
                if atoms.is_empty() || matrix.len() != atoms.len() || matrix.iter().any(|r| r.len() != atoms.len()) {
                    return Err(Error::Config("block kernel matrix must be square with one row per atom".into()));
                }
                for r in matrix {
                    for &x in r {
                        check_nonneg("block kernel entry", x)?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Evaluates `theta(x, y)`. Block kernels resolve positions by atom lookup;
    /// use [`ThetaKernel::eval_labeled`] in hot loops.
    pub fn eval(&self, x: &Position, y: &Position) -> f64 {
        match self {
            ThetaKernel::Constant { theta0 } => *theta0,
            ThetaKernel::Gaussian { theta0, length } => theta0 * (-x.dist2(y) / (2.0 * length * length)).exp(),
            ThetaKernel::Block { matrix, .. } => match (self.label_of(x), self.label_of(y)) {
                (Some(i), Some(j)) => matrix[i][j],
                _ => 0.0,
            },
        }
    }

    /// Like [`ThetaKernel::eval`], with precomputed block labels.
    #[inline]
    pub fn eval_labeled(&self, x: &Position, lx: usize, y: &Position, ly: usize) -> f64 {
        match self {
            ThetaKernel::Block { matrix, .. } => matrix[lx][ly],
            _ => self.eval(x, y),
        }
    }

    /// Index of the block atom at `x` (exact match up to 1e-9).
    pub fn label_of(&self, x: &Position) -> Option<usize> {
        match self {
            ThetaKernel::Block { atoms, .. } => atoms.iter().position(|a| a.dist2(x) <= 1e-18),
            _ => None,
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            ThetaKernel::Constant { theta0 } | ThetaKernel::Gaussian { theta0, .. } => *theta0,
            ThetaKernel::Block { matrix, .. } => matrix.iter().flatten().fold(0.0, |a: f64, &b| a.max(b)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup() == 0.0
    }
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Config(format!("{name} must be a finite nonnegative number, got {x}")));
    }
    Ok(())
}

/// `sigma(v) = sqrt(2 eps) + a * s(v)` with the C^1 bump
/// `s(v) = 16 v^2 (1 - v)^2` on `[0, 1]` and zero on `[1, 2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaProfile {
    pub epsilon: f64,
    pub bump_amplitude: f64,
}

impl SigmaProfile {
    pub fn floor(&self) -> f64 {
        (2.0 * self.epsilon).sqrt()
    }

    #[inline]
    pub fn eval(&self, v: TorusPoint) -> f64 {
        let v = v.value();
        let bump = if v <= 1.0 {
            let s = v * (1.0 - v);
            16.0 * s * s
        } else {
            0.0
        };
        self.floor() + self.bump_amplitude * bump
    }

    pub fn max(&self) -> f64 {
        self.floor() + self.bump_amplitude
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    /// `-lambda_hat * v` on `[0, 1]`, `1` on `(1, 2)`.
    #[default]
    Standard,
    /// Self-drift switched off (pure interaction/diffusion variants).
    Zero,
}

/// Every scalar of the neuron model plus the spatial kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCoefficients {
    pub lambda_hat: f64,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default)]
    pub sigma_bump: f64,
    #[serde(default)]
    pub theta: ThetaKernel,
    pub horizon: f64,
    #[serde(default)]
    pub lambda_mode: LambdaMode,
    /// Width of a C^1 smoothing applied to the drift jump and both indicator
    /// functions. `None` keeps the discontinuous coefficients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
}

impl Default for ModelCoefficients {
    fn default() -> Self {
        ModelCoefficients {
            lambda_hat: 1.0,
            epsilon: 0.02,
            delta: 0.3,
            sigma_bump: 0.0,
            theta: ThetaKernel::default(),
            horizon: 1.0,
            lambda_mode: LambdaMode::Standard,
            smoothing: None,
        }
    }
}

impl ModelCoefficients {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lambda_hat > 0.0) {
            return bad(format!("lambda_hat must be positive, got {}", self.lambda_hat));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        check_nonneg("sigma_bump", self.sigma_bump)?;
        if let Some(w) = self.smoothing {
            if !(w > 0.0 && w < self.delta.min(1.0 - self.delta)) {
                return bad(format!("smoothing width must lie in (0, min(delta, 1 - delta)), got {w}"));
            }
        }
        self.theta.validate()
    }

    pub fn sigma_profile(&self) -> SigmaProfile {
        SigmaProfile { epsilon: self.epsilon, bump_amplitude: self.sigma_bump }
    }

    /// Copy with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Self {
        ModelCoefficients { horizon, ..self.clone() }
    }
}

/// Cubic smoothstep, C^1.
#[inline]
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * (3.0 - 2.0 * t)
    }
}

#[inline]
fn smooth_window(r: f64, a: f64, b: f64, w: f64) -> f64 {
    smoothstep((r - a) / w + 0.5) * smoothstep((b - r) / w + 0.5)
}

/// Representative in `[-1/2, 3/2)` so that both drift jumps are interior.
#[inline]
fn charging_coordinate(v: TorusPoint) -> f64 {
    let v = v.value();
    if v >= 1.5 {
        v - PERIOD
    } else {
        v
    }
}

/// Coefficient interface shared by the particle simulator, the PDE solver and
/// the diagnostics.
pub trait MeanFieldCoefficients: Sync {
    /// Self-drift `lambda_2(v)`.
    fn self_drift(&self, v: TorusPoint) -> f64;
    /// Diffusion coefficient `sigma_2(v)`.
    fn diffusion(&self, v: TorusPoint) -> f64;
    /// Gate on the receiving neuron (`1_[0,1](v)`).
    fn receiving(&self, v: TorusPoint) -> f64;
    /// Gate on the emitting neuron (`1_[1,1+delta](w)`).
    fn emitting(&self, w: TorusPoint) -> f64;
    fn kernel(&self) -> &ThetaKernel;
    /// Upper bound on `|b(zeta)(x, v)|` over all probability measures.
    fn drift_bound(&self) -> f64;
    fn diffusion_bound(&self) -> f64;
    fn horizon(&self) -> f64;

    /// Emitting mass `int emitting(w) rho(w) dw` of a cell density on a
    /// uniform grid over the torus.
    fn emitting_mass(&self, density: &[f64]) -> f64 {
        let h = PERIOD / density.len() as f64;
        density.iter().enumerate().map(|(k, &r)| r * self.emitting(TorusPoint::wrap((k as f64 + 0.5) * h))).sum::<f64>()
            * h
    }

    fn g2(&self, x: &Position, v: TorusPoint, y: &Position, w: TorusPoint) -> f64 {
        let gate = self.receiving(v) * self.emitting(w);
        if gate == 0.0 {
            0.0
        } else {
            self.kernel().eval(x, y) * gate
        }
    }
}

impl MeanFieldCoefficients for ModelCoefficients {
    #[inline]
    fn self_drift(&self, v: TorusPoint) -> f64 {
        match (self.lambda_mode, self.smoothing) {
            (LambdaMode::Zero, _) => 0.0,
            (LambdaMode::Standard, None) => {
                let v = v.value();
                if v <= 1.0 {
                    -self.lambda_hat * v
                } else {
                    1.0
                }
            }
            (LambdaMode::Standard, Some(w)) => {
                let r = charging_coordinate(v);
                let gate = smooth_window(r, 0.0, 1.0, w);
                gate * (-self.lambda_hat * r) + (1.0 - gate)
            }
        }
    }

    #[inline]
    fn diffusion(&self, v: TorusPoint) -> f64 {
        self.sigma_profile().eval(v)
    }

    #[inline]
    fn receiving(&self, v: TorusPoint) -> f64 {
        match self.smoothing {
            None => {
                if v.value() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Some(w) => smooth_window(charging_coordinate(v), 0.0, 1.0, w),
        }
    }

    #[inline]
    fn emitting(&self, w: TorusPoint) -> f64 {
        let x = w.value();
        match self.smoothing {
            None => {
                if (1.0..=1.0 + self.delta).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Some(s) => smooth_window(x, 1.0, 1.0 + self.delta, s),
        }
    }

    fn kernel(&self) -> &ThetaKernel {
        &self.theta
    }

    fn drift_bound(&self) -> f64 {
        let own = match (self.lambda_mode, self.smoothing) {
            (LambdaMode::Zero, _) => 0.0,
            (LambdaMode::Standard, None) => self.lambda_hat.max(1.0),
            (LambdaMode::Standard, Some(w)) => (self.lambda_hat * (1.0 + 0.5 * w)).max(1.0),
        };
        own + self.theta.sup()
    }

    fn diffusion_bound(&self) -> f64 {
        self.sigma_profile().max()
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Exact integral of the sharp window over piecewise-constant cells.
    fn emitting_mass(&self, density: &[f64]) -> f64 {
        if self.smoothing.is_some() {
            let h = PERIOD / density.len() as f64;
            return density
                .iter()
                .enumerate()
                .map(|(k, &r)| r * self.emitting(TorusPoint::wrap((k as f64 + 0.5) * h)))
                .sum::<f64>()
                * h;
        }
        window_mass(density, 1.0, 1.0 + self.delta)
    }
}

/// `int_a^b rho` for a piecewise-constant density on a uniform grid over
/// `[0, 2)`, with `0 <= a <= b <= 2`.
pub fn window_mass(density: &[f64], a: f64, b: f64) -> f64 {
    let k = density.len();
    let h = PERIOD / k as f64;
    let first = ((a / h).floor() as usize).min(k - 1);
    let last = (((b / h).ceil() as usize).max(first + 1)).min(k);
    let mut acc = 0.0;
    for (c, &r) in density.iter().enumerate().take(last).skip(first) {
        let lo = (c as f64 * h).max(a);
        let hi = ((c + 1) as f64 * h).min(b);
        if hi > lo {
            acc += r * (hi - lo);
        }
    }
    acc
}

/// `lambda_2(v)`.
pub fn lambda2<C: MeanFieldCoefficients + ?Sized>(v: TorusPoint, coeffs: &C) -> f64 {
    coeffs.self_drift(v)
}

/// `sigma_2(v)`.
pub fn sigma2<C: MeanFieldCoefficients + ?Sized>(v: TorusPoint, coeffs: &C) -> f64 {
    coeffs.diffusion(v)
}

/// `g_2(x, v, y, w) = theta(x, y) 1_[1,1+delta](w) 1_[0,1](v)`.
pub fn g2<C: MeanFieldCoefficients + ?Sized>(
    x: &Position,
    v: TorusPoint,
    y: &Position,
    w: TorusPoint,
    coeffs: &C,
) -> f64 {
    coeffs.g2(x, v, y, w)
}

/// Law `nu` of the neuron positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PositionLaw {
    UniformBox {
        lo: [f64; 3],
        hi: [f64; 3],
    },
    /// Independent normal coordinates clamped to the domain.
    ClippedGaussian {
        mean: [f64; 3],
        std: f64,
    },
    TwoCluster {
        centers: [[f64; 3]; 2],
        std: f64,
        first_weight: f64,
    },
    /// Finite atom list. With `sequential`, particle `i` sits on atom `i mod len`.
    Atoms {
        points: Vec<Position>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        sequential: bool,
    },
}

impl Default for PositionLaw {
    fn default() -> Self {
        PositionLaw::UniformBox { lo: [0.0; 3], hi: [1.0; 3] }
    }
}

impl PositionLaw {
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        match self {
            PositionLaw::UniformBox { lo, hi } => {
                let ok = (0..3).all(|d| lo[d] < hi[d] && lo[d] >= domain.lo[d] && hi[d] <= domain.hi[d]);
                if !ok {
                    return Err(Error::Config(format!("uniform box {lo:?}..{hi:?} is not inside the domain")));
                }
            }
            PositionLaw::ClippedGaussian { mean, std } => {
                if !domain.contains(&Position(*mean)) || !(*std > 0.0) {
                    return Err(Error::Config(
                        "clipped gaussian needs a mean inside the domain and positive std".into(),
                    ));
                }
            }
            PositionLaw::TwoCluster { centers, std, first_weight } => {
                if centers.iter().any(|c| !domain.contains(&Position(*c)))
                    || !(*std > 0.0)
                    || !(0.0..=1.0).contains(first_weight)
                {
                    return Err(Error::Config(
                        "two-cluster law needs centers inside the domain, positive std and a weight in [0, 1]".into(),
                    ));
                }
            }
            PositionLaw::Atoms { points, weights, .. } => {
                if points.is_empty() {
                    return Err(Error::Config("atom list is empty".into()));
                }
                if let Some(p) = points.iter().find(|p| !domain.contains(p)) {
                    return Err(Error::Config(format!("atom {:?} lies outside the domain", p.0)));
                }
                if let Some(w) = weights {
                    let total: f64 = w.iter().sum();
                    if w.len() != points.len() || w.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > 1e-10 {
                        return Err(Error::Config(
                            "atom weights must be nonnegative, one per atom, summing to 1".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, index: usize, domain: &Domain, rng: &mut R) -> Position {
        self.sample_labeled(index, domain, rng).0
    }

    /// Draws a position; for atom lists also returns the atom index.
    pub fn sample_labeled<R: Rng + ?Sized>(
        &self,
        index: usize,
        domain: &Domain,
        rng: &mut R,
    ) -> (Position, Option<usize>) {
        let p = match self {
            PositionLaw::UniformBox { lo, hi } => {
                Position(std::array::from_fn(|d| lo[d] + (hi[d] - lo[d]) * rng.random::<f64>()))
            }
            PositionLaw::ClippedGaussian { mean, std } => clipped_normal(mean, *std, domain, rng),
            PositionLaw::TwoCluster { centers, std, first_weight } => {
                let c = if rng.random::<f64>() < *first_weight { &centers[0] } else { &centers[1] };
                clipped_normal(c, *std, domain, rng)
            }
            PositionLaw::Atoms { points, weights, sequential } => {
                let i = if *sequential {
                    index % points.len()
                } else {
                    match weights {
                        None => rng.random_range(0..points.len()),
                        Some(w) => categorical(w, rng.random::<f64>()),
                    }
                };
                return (points[i], Some(i));
            }
        };
        (p, None)
    }
}

fn clipped_normal<R: Rng + ?Sized>(mean: &[f64; 3], std: f64, domain: &Domain, rng: &mut R) -> Position {
    let p = Position(std::array::from_fn(|d| mean[d] + std * rng.sample::<f64, _>(StandardNormal)));
    domain.clamp(p)
}

/// Index `i` with cumulative weight first exceeding `u`.
pub(crate) fn categorical(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Initial voltage density `rho_0` on `[0, 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VoltageDensity {
    Uniform,
    /// Gaussian profile truncated to `[0, 2)` and renormalized.
    GaussianBump {
        center: f64,
        width: f64,
    },
    /// Equal-width bins over `[0, 2)`; values are densities.
    PiecewiseConstant {
        values: Vec<f64>,
    },
    /// Point mass at `center` smoothed by the mollifier of scale `alpha`.
    MollifiedPoint {
        center: f64,
        alpha: f64,
    },
}

impl Default for VoltageDensity {
    fn default() -> Self {
        VoltageDensity::Uniform
    }
}

impl VoltageDensity {
    pub fn validate(&self) -> Result<()> {
        match self {
            VoltageDensity::Uniform => Ok(()),
            VoltageDensity::GaussianBump { center, width } => {
                if !(0.0..PERIOD).contains(center) || !(*width > 0.0) {
                    return Err(Error::Config("gaussian bump needs center in [0, 2) and positive width".into()));
                }
                Ok(())
            }
            VoltageDensity::PiecewiseConstant { values } => {
                let h = PERIOD / values.len() as f64;
                let mass: f64 = values.iter().sum::<f64>() * h;
                if values.is_empty() || values.iter().any(|&v| !(v >= 0.0)) || (mass - 1.0).abs() > 1e-10 {
                    return Err(Error::Config(format!(
                        "piecewise-constant density must be nonnegative with unit mass, got mass {mass}"
                    )));
                }
                Ok(())
            }
            VoltageDensity::MollifiedPoint { center, alpha } => {
                MollifierFamily::new(*alpha)?;
                if !center.is_finite() {
                    return Err(Error::Config("mollified point needs a finite center".into()));
                }
                Ok(())
            }
        }
    }

    fn gaussian_normalizer(center: f64, width: f64) -> f64 {
        let f = |v: f64| (-(v - center).powi(2) / (2.0 * width * width)).exp();
        quad::composite_adaptive(&f, 0.0, PERIOD, 64, 1e-15)
    }

    /// Probability of the interval `[a, b]` with `0 <= a <= b <= 2`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.interval_masses(&[a, b])[0]
    }

    /// Masses of consecutive intervals between sorted `edges` in `[0, 2]`.
    pub fn interval_masses(&self, edges: &[f64]) -> Vec<f64> {
        let pairs = edges.windows(2);
        match self {
            VoltageDensity::Uniform => pairs.map(|w| (w[1] - w[0]) / PERIOD).collect(),
            VoltageDensity::PiecewiseConstant { values } => pairs.map(|w| window_mass(values, w[0], w[1])).collect(),
            VoltageDensity::GaussianBump { center, width } => {
                let z = Self::gaussian_normalizer(*center, *width);
                let f = |v: f64| (-(v - center).powi(2) / (2.0 * width * width)).exp() / z;
                pairs.map(|w| quad::adaptive_simpson(&f, w[0], w[1], 1e-15)).collect()
            }
            VoltageDensity::MollifiedPoint { center, alpha } => {
                let fam = MollifierFamily::new(*alpha).expect("validated scale");
                let f = |v: f64| fam.eval(TorusPoint::wrap(v - center));
                pairs.map(|w| quad::adaptive_simpson(&f, w[0], w[1], 1e-15)).collect()
            }
        }
    }

    pub fn pdf(&self, v: TorusPoint) -> f64 {
        let x = v.value();
        match self {
            VoltageDensity::Uniform => 1.0 / PERIOD,
            VoltageDensity::PiecewiseConstant { values } => {
                let k = ((x / PERIOD * values.len() as f64) as usize).min(values.len() - 1);
                values[k]
            }
            VoltageDensity::GaussianBump { center, width } => {
                (-(x - center).powi(2) / (2.0 * width * width)).exp() / Self::gaussian_normalizer(*center, *width)
            }
            VoltageDensity::MollifiedPoint { center, alpha } => {
                MollifierFamily::new(*alpha).expect("validated scale").eval(TorusPoint::wrap(x - center))
            }
        }
    }

    /// Draws a voltage in `[0, 2)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            VoltageDensity::Uniform => PERIOD * rng.random::<f64>(),
            VoltageDensity::PiecewiseConstant { values } => {
                let h = PERIOD / values.len() as f64;
                let w: Vec<f64> = values.iter().map(|v| v * h).collect();
                let k = categorical(&w, rng.random::<f64>());
                TorusPoint::wrap((k as f64 + rng.random::<f64>()) * h).value()
            }
            VoltageDensity::GaussianBump { center, width } => loop {
                let u = PERIOD * rng.random::<f64>();
                let accept = (-(u - center).powi(2) / (2.0 * width * width)).exp();
                if rng.random::<f64>() < accept {
                    break u;
                }
            },
            VoltageDensity::MollifiedPoint { center, alpha } => {
                let fam = MollifierFamily::new(*alpha).expect("validated scale");
                let peak = fam.eval_offset(0.0);
                loop {
                    let r = alpha * (rng.random::<f64>() - 0.5);
                    if rng.random::<f64>() * peak < fam.eval_offset(r) {
                        break TorusPoint::wrap(center + r).value();
                    }
                }
            }
        }
    }
}

/// Initial laws: positions `nu` on the domain and voltages `rho_0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialLaws {
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub nu: PositionLaw,
    #[serde(default)]
    pub rho0: VoltageDensity,
}

impl InitialLaws {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.nu.validate(&self.domain)?;
        self.rho0.validate()
    }
}
