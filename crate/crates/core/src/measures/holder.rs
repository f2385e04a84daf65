//! Kolmogorov-type time-regularity functionals of measure paths.
//!
//! Both functionals are double sums over a uniform time grid that skip the
//! diagonal `i = j`, the band where `|t - s|` is below one grid step.

use crate::error::{Error, Result};

use super::{h_minus2_distance_sq, wasserstein1_v, CircleMeasure, EmpiricalDensity};

fn double_sum(n: usize, dt: f64, exponent: f64, mut term: impl FnMut(usize, usize) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (j - i) as f64 * dt;
            total += 2.0 * term(i, j)? / gap.powf(exponent);
        }
    }
    Ok(total * dt * dt)
}

/// `sum_{i != j} W_1(mu_i, mu_j)^p / |t_i - t_j|^(1 + alpha p) dt^2` over the
/// voltage marginals of a path sampled with spacing `dt`.
pub fn w1_holder_modulus(path: &[CircleMeasure], dt: f64, alpha: f64, p: f64) -> Result<f64> {
    if !(p > 2.0) || !(alpha >= 0.0) || !(alpha * p < 0.5 * p - 1.0) {
        return Err(Error::Config(format!(
            "exponents need p > 2 and 0 <= alpha p < p/2 - 1, got alpha {alpha}, p {p}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Config("time spacing must be positive".into()));
    }
    double_sum(path.len(), dt, 1.0 + alpha * p, |i, j| Ok(wasserstein1_v(&path[i], &path[j])?.powf(p)))
}

/// `sum_{i != j} ||u_i - u_j||^2_{H^-2} / |t_i - t_j|^(1 + 2 alpha) dt^2`.
pub fn time_regularity_h_minus2(path: &[EmpiricalDensity], dt: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) || !(dt > 0.0) {
        return Err(Error::Config(format!("need 0 < alpha < 1/2 and dt > 0, got alpha {alpha}, dt {dt}")));
    }
    double_sum(path.len(), dt, 1.0 + 2.0 * alpha, |i, j| Ok(h_minus2_distance_sq(&path[i].values, &path[j].values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusPoint;

    #[test]
    fn constant_path_has_zero_modulus() {
        let path = vec![CircleMeasure::atoms(vec![(0.4, 1.0)]); 20];
        assert_eq!(w1_holder_modulus(&path, 0.05, 0.1, 3.0).unwrap(), 0.0);
        let d = EmpiricalDensity { values: vec![0.5; 16], alpha: 1.0 };
        assert_eq!(time_regularity_h_minus2(&vec![d; 10], 0.1, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn exponent_constraints() {
        let path = vec![CircleMeasure::atoms(vec![(0.4, 1.0)]); 3];
        assert!(w1_holder_modulus(&path, 0.1, 0.1, 2.0).is_err());
        assert!(w1_holder_modulus(&path, 0.1, 0.3, 4.0).is_err());
        assert!(w1_holder_modulus(&path, 0.1, 0.1, 4.0).is_ok());
    }

    #[test]
    fn drifting_atom_matches_closed_form() {
        // W_1(delta_t, delta_s) = |t - s| on [0, 1], so the functional is
        // 2 int_dt^T (T - u) u^q du with q = p - 1 - alpha p.
        let (t_end, n) = (1.0, 2001);
        let dt = t_end / (n - 1) as f64;
        let (alpha, p) = (0.1, 4.0);
        let path: Vec<CircleMeasure> =
            (0..n).map(|i| CircleMeasure::atoms(vec![(TorusPoint::wrap(i as f64 * dt).value(), 1.0)])).collect();
        let got = w1_holder_modulus(&path, dt, alpha, p).unwrap();
        let q: f64 = p - 1.0 - alpha * p;
        let prim = |u: f64| t_end * u.powf(q + 1.0) / (q + 1.0) - u.powf(q + 2.0) / (q + 2.0);
        let exact = 2.0 * (prim(t_end) - prim(dt));
        assert!((got - exact).abs() / exact < 5e-3, "{got} vs {exact}");
    }
}
