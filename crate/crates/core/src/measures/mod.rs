//! Measures on `D x T` and the diagnostics comparing them.

mod circle;
mod density;
mod holder;
mod martingale;
mod transport;

pub use circle::{wasserstein1_v, CircleMeasure};
pub use density::{
    fourier_coefficients, h_minus2_distance_sq, h_minus2_norm, h_minus2_norm_sq, l2_energy, mollified_density,
    resolving_grid, EmpiricalDensity, MIN_POINTS_PER_SUPPORT,
};
pub use holder::{time_regularity_h_minus2, w1_holder_modulus};
pub use martingale::{martingale_functional, MartingalePath};
pub use transport::{min_cost_transport, wasserstein1_joint, JOINT_ATOM_BUDGET};

use crate::error::{Error, Result};
use crate::fokker_planck::TestFunction;
use crate::model::{MeanFieldCoefficients, Position};
use crate::particle::ParticleSystemState;
use crate::torus::TorusPoint;

/// Tolerance on total mass before a measure is rejected as unnormalized.
pub const MASS_TOLERANCE: f64 = 1e-8;

/// The three pairings entering the weak form of the Fokker-Planck equation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeakTerms {
    /// `<mu, phi>`
    pub value: f64,
    /// `<mu, b(mu) d_v phi>`
    pub transport: f64,
    /// `<mu, (sigma^2 / 2) d_vv phi>`
    pub diffusion: f64,
}

/// Probability measures on `D x T` that the diagnostics can integrate against.
pub trait PhaseMeasure {
    fn total_mass(&self) -> f64;

    /// `int theta(x, y) emitting(w) zeta(dy, dw)`.
    fn interaction_at<C: MeanFieldCoefficients + ?Sized>(&self, x: &Position, coeffs: &C) -> f64;

    fn weak_terms<C: MeanFieldCoefficients + ?Sized>(&self, phi: &TestFunction, coeffs: &C) -> WeakTerms;

    /// Projection onto the voltage torus.
    fn v_marginal(&self) -> CircleMeasure;

    fn check_normalized(&self) -> Result<()> {
        let m = self.total_mass();
        if (m - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Contract(format!("measure has total mass {m}, expected 1")));
        }
        Ok(())
    }
}

/// Mean-field drift `b(zeta)(x, v) = lambda_2(v) + int g_2(x, v, y, w) zeta(dy, dw)`.
pub fn drift_b<M: PhaseMeasure + ?Sized, C: MeanFieldCoefficients + ?Sized>(
    measure: &M,
    x: &Position,
    v: TorusPoint,
    coeffs: &C,
) -> Result<f64> {
    measure.check_normalized()?;
    let r = coeffs.receiving(v);
    let inner = if r == 0.0 { 0.0 } else { r * measure.interaction_at(x, coeffs) };
    Ok(coeffs.self_drift(v) + inner)
}

/// Finitely supported probability measure on `D x T`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedAtomMeasure {
    atoms: Vec<(Position, TorusPoint)>,
    weights: Vec<f64>,
}

impl WeightedAtomMeasure {
    pub fn new(atoms: Vec<(Position, TorusPoint)>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() || atoms.is_empty() {
            return Err(Error::Contract("atom and weight lists must be nonempty and of equal length".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("weights must be nonnegative and sum to 1, got {total}")));
        }
        Ok(WeightedAtomMeasure { atoms, weights })
    }

    /// Uniform weights `1/N` on `(x_i, v_i mod 2)`.
    pub fn empirical(positions: &[Position], voltages: &[f64]) -> Self {
        assert_eq!(positions.len(), voltages.len());
        assert!(!positions.is_empty(), "empirical measure of zero particles");
        let w = 1.0 / positions.len() as f64;
        WeightedAtomMeasure {
            atoms: positions.iter().zip(voltages).map(|(&x, &v)| (x, TorusPoint::wrap(v))).collect(),
            weights: vec![w; positions.len()],
        }
    }

    pub fn atoms(&self) -> &[(Position, TorusPoint)] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `int f d mu`.
    pub fn integrate(&self, f: impl Fn(&Position, TorusPoint) -> f64) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|((x, v), w)| w * f(x, *v)).sum()
    }

    /// Position marginal as (position, weight) pairs.
    pub fn x_marginal(&self) -> Vec<(Position, f64)> {
        self.atoms.iter().zip(&self.weights).map(|((x, _), &w)| (*x, w)).collect()
    }
}

/// Empirical measure `S^N = (1/N) sum_i delta_(x_i, v_i mod 2)`.
pub fn empirical_measure(state: &ParticleSystemState) -> WeightedAtomMeasure {
    WeightedAtomMeasure::empirical(&state.positions, &state.voltages)
}

impl PhaseMeasure for WeightedAtomMeasure {
    fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn interaction_at<C: MeanFieldCoefficients + ?Sized>(&self, x: &Position, coeffs: &C) -> f64 {
        let kernel = coeffs.kernel();
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|((y, w), &p)| {
                let e = coeffs.emitting(*w);
                if e == 0.0 {
                    0.0
                } else {
                    p * kernel.eval(x, y) * e
                }
            })
            .sum()
    }

    fn weak_terms<C: MeanFieldCoefficients + ?Sized>(&self, phi: &TestFunction, coeffs: &C) -> WeakTerms {
        let kernel = coeffs.kernel();
        let emitters: Vec<(&Position, f64)> = self
            .atoms
            .iter()
            .zip(&self.weights)
            .filter_map(|((y, w), &p)| {
                let e = coeffs.emitting(*w);
                (e != 0.0).then_some((y, p * e))
            })
            .collect();
        let mut terms = WeakTerms::default();
        for ((x, v), &p) in self.atoms.iter().zip(&self.weights) {
            let r = coeffs.receiving(*v);
            let field = if r == 0.0 || emitters.is_empty() {
                0.0
            } else {
                emitters.iter().map(|(y, pe)| kernel.eval(x, y) * pe).sum::<f64>()
            };
            let b = coeffs.self_drift(*v) + if r == 0.0 { 0.0 } else { r * field };
            let s = coeffs.diffusion(*v);
            terms.value += p * phi.value(x, *v);
            terms.transport += p * b * phi.dv(x, *v);
            terms.diffusion += p * 0.5 * s * s * phi.dvv(x, *v);
        }
        terms
    }

    fn v_marginal(&self) -> CircleMeasure {
        CircleMeasure::atoms(self.atoms.iter().zip(&self.weights).map(|((_, v), &w)| (v.value(), w)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitialLaws, ModelCoefficients, ThetaKernel};
    use crate::particle::{init_system, SimConfig};

    #[test]
    fn empirical_measure_has_uniform_weights() {
        let cfg = SimConfig::new(4, 1e-3, 1, ModelCoefficients::default(), InitialLaws::default());
        let s = init_system(&cfg, 0).unwrap();
        let m = empirical_measure(&s);
        assert_eq!(m.weights(), &[0.25; 4]);
        assert_eq!(m.total_mass(), 1.0);
        assert_eq!(m.integrate(|_, _| 1.0), 1.0);
        let xs: Vec<Position> = m.x_marginal().into_iter().map(|(x, _)| x).collect();
        assert_eq!(xs, s.positions);
    }

    #[test]
    fn unnormalized_weights_are_rejected() {
        let a = vec![(Position([0.0; 3]), TorusPoint::wrap(0.1)); 2];
        assert!(WeightedAtomMeasure::new(a.clone(), vec![0.5, 0.6]).is_err());
        assert!(WeightedAtomMeasure::new(a, vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn drift_on_atoms_is_lambda_plus_firing_average() {
        let c = ModelCoefficients { theta: ThetaKernel::Constant { theta0: 2.0 }, ..ModelCoefficients::default() };
        let x = Position([0.5; 3]);
        let m = WeightedAtomMeasure::empirical(&[x; 4], &[0.2, 1.1, 1.25, 1.8]);
        let b = drift_b(&m, &x, TorusPoint::wrap(0.5), &c).unwrap();
        assert!((b - (-0.5 + 2.0 * 0.5)).abs() < 1e-15);
        assert_eq!(drift_b(&m, &x, TorusPoint::wrap(1.5), &c).unwrap(), 1.0);
    }

    #[test]
    fn drift_is_affine_in_the_measure() {
        let c = ModelCoefficients {
            theta: ThetaKernel::Gaussian { theta0: 3.0, length: 0.4 },
            ..ModelCoefficients::default()
        };
        let xs: Vec<Position> = (0..6).map(|i| Position([i as f64 / 6.0, 0.2, 0.9])).collect();
        let v1 = [0.1, 1.05, 1.2, 0.4, 1.29, 1.7];
        let v2 = [1.1, 1.15, 0.3, 1.0, 1.3, 0.0];
        let m1 = WeightedAtomMeasure::empirical(&xs, &v1);
        let m2 = WeightedAtomMeasure::empirical(&xs, &v2);
        let p = 0.3;
        let mut atoms = m1.atoms().to_vec();
        atoms.extend_from_slice(m2.atoms());
        let mut weights: Vec<f64> = m1.weights().iter().map(|w| p * w).collect();
        weights.extend(m2.weights().iter().map(|w| (1.0 - p) * w));
        let mix = WeightedAtomMeasure::new(atoms, weights).unwrap();
        let x = Position([0.4, 0.4, 0.4]);
        let v = TorusPoint::wrap(0.6);
        let lam = c.self_drift(v);
        let lhs = drift_b(&mix, &x, v, &c).unwrap() - lam;
        let rhs = p * (drift_b(&m1, &x, v, &c).unwrap() - lam) + (1.0 - p) * (drift_b(&m2, &x, v, &c).unwrap() - lam);
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
