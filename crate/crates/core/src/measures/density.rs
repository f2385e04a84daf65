//! Mollified empirical densities and Sobolev-type norms on the voltage torus.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::torus::{MollifierFamily, TorusPoint, PERIOD};

use super::{CircleMeasure, WeightedAtomMeasure};

/// Minimum number of grid cells per mollifier support width `alpha`.
///
/// Midpoint sums of `gamma_alpha` reproduce its unit mass to 1e-9 from about
/// this many cells per support on; at 24 the error is already 1e-8.
pub const MIN_POINTS_PER_SUPPORT: f64 = 32.0;

/// Smoothed voltage density on the midpoints of a uniform grid over the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDensity {
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl EmpiricalDensity {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_width(&self) -> f64 {
        PERIOD / self.values.len() as f64
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.cell_width();
        (0..self.values.len()).map(move |k| (k as f64 + 0.5) * h)
    }

    /// Midpoint mass.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_width()
    }

    /// The grid function as a cell measure.
    pub fn to_circle(&self) -> CircleMeasure {
        CircleMeasure::Cells(self.values.clone())
    }
}

/// Smallest grid size resolving a mollifier of scale `alpha`.
pub fn resolving_grid(alpha: f64) -> usize {
    (MIN_POINTS_PER_SUPPORT * PERIOD / alpha).ceil() as usize
}

/// `u(v_k) = sum_i w_i gamma_alpha(v_k - v_i)` on `K` cell midpoints.
pub fn mollified_density(meas: &WeightedAtomMeasure, grid_k: usize, alpha: f64) -> Result<EmpiricalDensity> {
    let family = MollifierFamily::new(alpha)?;
    if grid_k < resolving_grid(alpha) {
        return Err(Error::Config(format!(
            "grid of {grid_k} cells does not resolve a mollifier of scale {alpha}; need at least {}",
            resolving_grid(alpha)
        )));
    }
    let h = PERIOD / grid_k as f64;
    let reach = (family.radius() / h).ceil() as isize + 1;
    let mut values = vec![0.0; grid_k];
    for ((_, v), &w) in meas.atoms().iter().zip(meas.weights()) {
        let v = v.value();
        // Cell whose midpoint is nearest to v.
        let k0 = (v / h - 0.5).round() as isize;
        for j in (k0 - reach)..=(k0 + reach) {
            let center = (j as f64 + 0.5) * h;
            let g = family.eval(TorusPoint::wrap(center - v));
            if g != 0.0 {
                values[j.rem_euclid(grid_k as isize) as usize] += w * g;
            }
        }
    }
    Ok(EmpiricalDensity { values, alpha })
}

/// Midpoint `int u^2` and `int |u'|^2` with periodic central differences.
pub fn l2_energy(dens: &EmpiricalDensity) -> (f64, f64) {
    let u = &dens.values;
    let k = u.len();
    assert!(k >= 8, "energy needs at least 8 cells");
    let h = dens.cell_width();
    let l2 = u.iter().map(|x| x * x).sum::<f64>() * h;
    let h1 = (0..k)
        .map(|i| {
            let d = (u[(i + 1) % k] - u[(i + k - 1) % k]) / (2.0 * h);
            d * d
        })
        .sum::<f64>()
        * h;
    (l2, h1)
}

/// Normalized discrete Fourier coefficients `f_k = (1/K) sum_j f_j e^(-2 pi i jk/K)`,
/// so that `h sum_j |f_j|^2 = 2 sum_k |f_k|^2`.
pub fn fourier_coefficients(values: &[f64]) -> Vec<Complex<f64>> {
    let k = values.len();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(k).process(&mut buf);
    let scale = 1.0 / k as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// `||f||^2_{H^-2} = 2 sum_k |f_k|^2 / (1 + (pi k)^2)^2`, wavenumbers folded
/// to `|k| <= K/2`.
pub fn h_minus2_norm_sq(values: &[f64]) -> f64 {
    let n = values.len();
    assert!(n >= 8, "H^-2 norm needs at least 8 cells");
    let coeffs = fourier_coefficients(values);
    2.0 * coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let freq = k.min(n - k) as f64;
            let w = 1.0 + (std::f64::consts::PI * freq).powi(2);
            c.norm_sqr() / (w * w)
        })
        .sum::<f64>()
}

pub fn h_minus2_norm(values: &[f64]) -> f64 {
    h_minus2_norm_sq(values).sqrt()
}

/// `||f - g||^2_{H^-2}` for two grid functions of equal length.
pub fn h_minus2_distance_sq(f: &[f64], g: &[f64]) -> f64 {
    assert_eq!(f.len(), g.len());
    let d: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    h_minus2_norm_sq(&d)
}
