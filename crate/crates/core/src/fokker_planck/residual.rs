//! Residuals of the mild and weak formulations along a computed path.

use crate::error::{Error, Result};
use crate::measures::PhaseMeasure;
use crate::model::MeanFieldCoefficients;

use super::{semigroup_path, ConditionalGridDensity, FluxScheme, FpOperator, FpSolution, TestFunction};

/// `sum_m p_m a(x_m) h sum_k rho[m][k] g_k` and the drift pairing
/// `sum_m p_m a(x_m) h sum_k rho[m][k] b_mk dg_k`.
fn pairings<C: MeanFieldCoefficients + ?Sized>(
    state: &ConditionalGridDensity,
    phi: &TestFunction,
    op: &FpOperator,
    coeffs: &C,
    g: &[f64],
    dg: &[f64],
) -> (f64, f64) {
    let fields = op.fields(&state.firing_masses(coeffs));
    let h = state.cell_width();
    let mut value = 0.0;
    let mut transport = 0.0;
    for (((x, p), row), &field) in state.positions.iter().zip(&state.weights).zip(&state.rho).zip(&fields) {
        let w = p * phi.spatial.eval(x) * h;
        let mut v = 0.0;
        let mut t = 0.0;
        for (k, &r) in row.iter().enumerate() {
            v += r * g[k];
            t += r * op.drift(k, field) * dg[k];
        }
        value += w * v;
        transport += w * t;
    }
    (value, transport)
}

/// `|<mu_t, phi> - <mu_0, T_t phi> - int_0^t <mu_s, b(mu_s) d_v T_(t-s) phi> ds|`
/// with the trapezoid rule over the snapshots up to `t`, which must be
/// uniformly spaced from the initial time.
pub fn mild_residual<C: MeanFieldCoefficients + ?Sized>(
    solution: &FpSolution,
    phi: &TestFunction,
    t: f64,
    coeffs: &C,
) -> Result<f64> {
    let snaps = &solution.snapshots;
    let first = snaps.first().ok_or_else(|| Error::Config("empty solution path".into()))?;
    let t0 = first.time;
    let n = snaps
        .iter()
        .position(|s| (s.time - t).abs() <= 1e-9 * (1.0 + t.abs()))
        .ok_or(Error::Range { requested: t, horizon: snaps.last().unwrap().time })?;
    if n == 0 {
        return Ok(0.0);
    }
    let spacing = (t - t0) / n as f64;
    if snaps[..=n].iter().enumerate().any(|(i, s)| (s.time - (t0 + i as f64 * spacing)).abs() > 1e-9 * (1.0 + t)) {
        return Err(Error::Config("mild residual needs uniformly spaced snapshots".into()));
    }
    let k = first.n_cells();
    let psi = semigroup_path(phi, spacing, n, coeffs, k);
    let op = FpOperator::new(first, coeffs, FluxScheme::default());
    let ones = vec![0.0; k];
    let grid = phi.voltage_grid(k);
    let (now, _) = pairings(&snaps[n], phi, &op, coeffs, &grid, &ones);
    let (start, _) = pairings(first, phi, &op, coeffs, &psi[n].values, &ones);
    let mut integral = 0.0;
    for (i, s) in snaps[..=n].iter().enumerate() {
        let lag = &psi[n - i];
        let (_, tr) = pairings(s, phi, &op, coeffs, &lag.values, &lag.dv);
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        integral += w * tr;
    }
    integral *= spacing;
    Ok((now - start - integral).abs())
}

/// `sup_t |<mu_t, phi> - <mu_0, phi> - int_0^t <mu_s, b d_v phi + (sigma^2/2) d_vv phi> ds| ^ 1`
/// over the sampled times, trapezoid rule in time.
pub fn weak_residual_phi<M: PhaseMeasure, C: MeanFieldCoefficients + ?Sized>(
    path: &[M],
    times: &[f64],
    mu0: &M,
    phi: &TestFunction,
    coeffs: &C,
) -> f64 {
    assert_eq!(path.len(), times.len(), "one time per path sample");
    let base = mu0.weak_terms(phi, coeffs).value;
    let terms: Vec<_> = path.iter().map(|m| m.weak_terms(phi, coeffs)).collect();
    let mut integral = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..terms.len() {
        if i > 0 {
            let a = terms[i - 1].transport + terms[i - 1].diffusion;
            let b = terms[i].transport + terms[i].diffusion;
            integral += 0.5 * (times[i] - times[i - 1]) * (a + b);
        }
        sup = sup.max((terms[i].value - base - integral).abs());
    }
    sup.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fokker_planck::{discretize_initial, fp_solve, uniform_times, FpOptions};
    use crate::model::{Domain, InitialLaws, LambdaMode, ModelCoefficients, PositionLaw, ThetaKernel, VoltageDensity};

    fn laws() -> InitialLaws {
        InitialLaws {
            domain: Domain::default(),
            nu: PositionLaw::default(),
            rho0: VoltageDensity::GaussianBump { center: 0.5, width: 0.15 },
        }
    }

    #[test]
    fn mild_residual_vanishes_at_time_zero() {
        let c = ModelCoefficients::default();
        let s = discretize_initial(&laws(), 4, 100, 1).unwrap();
        let sol = fp_solve(&s, 0.1, &c, &uniform_times(0.1, 10), FpOptions::default()).unwrap();
        assert_eq!(mild_residual(&sol, &TestFunction::cos(1), 0.0, &c).unwrap(), 0.0);
    }

    #[test]
    fn pure_diffusion_mild_residual_is_small() {
        let c = ModelCoefficients {
            lambda_mode: LambdaMode::Zero,
            theta: ThetaKernel::Constant { theta0: 0.0 },
            epsilon: 0.05,
            ..ModelCoefficients::default()
        };
        let s = discretize_initial(&laws(), 2, 200, 1).unwrap();
        let sol = fp_solve(&s, 0.5, &c, &uniform_times(0.5, 50), FpOptions::default()).unwrap();
        for phi in TestFunction::fourier_modes(3) {
            let r = mild_residual(&sol, &phi, 0.5, &c).unwrap();
            assert!(r < 1e-4, "{} {r}", phi.label());
        }
    }

    #[test]
    fn weak_residual_of_solution_is_small_and_capped() {
        let c = ModelCoefficients {
            theta: ThetaKernel::Gaussian { theta0: 2.0, length: 0.5 },
            ..ModelCoefficients::default()
        };
        let s = discretize_initial(&laws(), 6, 200, 1).unwrap();
        let sol = fp_solve(&s, 0.5, &c, &uniform_times(0.5, 50), FpOptions::default()).unwrap();
        let times = sol.times();
        for phi in TestFunction::fourier_modes(2) {
            let r = weak_residual_phi(&sol.snapshots, &times, &sol.snapshots[0], &phi, &c);
            assert!(r < 1e-2, "{} {r}", phi.label());
        }
        let big = TestFunction {
            spatial: crate::fokker_planck::SpatialFactor::Constant { value: 1e6 },
            ..TestFunction::cos(1)
        };
        let mut bad = sol.snapshots.clone();
        bad.reverse();
        assert_eq!(weak_residual_phi(&bad, &times, &sol.snapshots[0], &big, &c), 1.0);
    }
}
