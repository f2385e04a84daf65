//! The pure-diffusion semigroup `T_t` generated by `(sigma^2 / 2) d_vv`.

use crate::model::MeanFieldCoefficients;
use crate::torus::{TorusPoint, PERIOD};

use super::TestFunction;

/// Largest time step used internally by [`semigroup_apply`].
const MAX_SUBSTEP: f64 = 1e-3;

/// Voltage factor of `T_t phi` on cell midpoints with its central difference.
#[derive(Clone, Debug, PartialEq)]
pub struct SemigroupGrid {
    pub t: f64,
    pub values: Vec<f64>,
    pub dv: Vec<f64>,
}

/// Solves `a_i x_(i-1) + b_i x_i + c_i x_(i+1) = r_i` with periodic wrap.
pub(crate) fn solve_cyclic(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert!(n >= 3);
    // Sherman-Morrison on the corner entries a_0 and c_(n-1).
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= c[n - 1] * a[0] / gamma;
    let x = solve_tridiagonal(a, &bb, c, r);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c[n - 1];
    let z = solve_tridiagonal(a, &bb, c, &u);
    let fact = (x[0] + a[0] * x[n - 1] / gamma) / (1.0 + z[0] + a[0] * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut beta = b[0];
    x[0] = r[0] / beta;
    for i in 1..n {
        cp[i] = c[i - 1] / beta;
        beta = b[i] - a[i] * cp[i];
        x[i] = (r[i] - a[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i + 1] * x[i + 1];
    }
    x
}

/// Crank-Nicolson discretization of `u_t = D(v) u_vv` on a periodic grid.
#[derive(Clone, Debug)]
pub struct DiffusionSemigroup {
    h: f64,
    /// `D_i / h^2`.
    rate: Vec<f64>,
}

impl DiffusionSemigroup {
    pub fn new<C: MeanFieldCoefficients + ?Sized>(k: usize, coeffs: &C) -> Self {
        assert!(k >= 3, "semigroup grid needs at least 3 cells");
        let h = PERIOD / k as f64;
        let rate =
            (0..k).map(|i| 0.5 * coeffs.diffusion(TorusPoint::wrap((i as f64 + 0.5) * h)).powi(2) / (h * h)).collect();
        DiffusionSemigroup { h, rate }
    }

    pub fn len(&self) -> usize {
        self.rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate.is_empty()
    }

    fn apply_l(&self, u: &[f64], i: usize) -> f64 {
        let n = u.len();
        let l = u[(i + n - 1) % n];
        let r = u[(i + 1) % n];
        self.rate[i] * (l - 2.0 * u[i] + r)
    }

    /// `(I - w tau L) u' = (I + (1 - w) tau L) u` for implicitness `w`.
    fn theta_step(&self, u: &[f64], tau: f64, w: f64) -> Vec<f64> {
        let n = u.len();
        let rhs: Vec<f64> =
            if w < 1.0 { (0..n).map(|i| u[i] + (1.0 - w) * tau * self.apply_l(u, i)).collect() } else { u.to_vec() };
        let off: Vec<f64> = self.rate.iter().map(|&r| -w * tau * r).collect();
        let diag: Vec<f64> = self.rate.iter().map(|&r| 1.0 + 2.0 * w * tau * r).collect();
        solve_cyclic(&off, &diag, &off, &rhs)
    }

    /// `n` steps of size `tau` starting from `u`; the first step is replaced
    /// by two backward-Euler half steps. Returns all `n + 1` iterates.
    pub fn march(&self, u: &[f64], tau: f64, n: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(u.to_vec());
        for i in 0..n {
            let prev = out.last().unwrap();
            let next = if i == 0 {
                let half = self.theta_step(prev, 0.5 * tau, 1.0);
                self.theta_step(&half, 0.5 * tau, 1.0)
            } else {
                self.theta_step(prev, tau, 0.5)
            };
            out.push(next);
        }
        out
    }

    /// Periodic central difference.
    pub fn derivative(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n).map(|i| (u[(i + 1) % n] - u[(i + n - 1) % n]) / (2.0 * self.h)).collect()
    }
}

/// `T_t` applied to the voltage factor of `phi` on `k` cell midpoints.
pub fn semigroup_apply<C: MeanFieldCoefficients + ?Sized>(
    phi: &TestFunction,
    t: f64,
    coeffs: &C,
    k: usize,
) -> SemigroupGrid {
    assert!(t >= 0.0, "semigroup time must be nonnegative");
    let sg = DiffusionSemigroup::new(k, coeffs);
    let u0 = phi.voltage_grid(k);
    if t == 0.0 {
        let dv = sg.derivative(&u0);
        return SemigroupGrid { t, values: u0, dv };
    }
    let n = (t / MAX_SUBSTEP).ceil().max(2.0) as usize;
    let values = sg.march(&u0, t / n as f64, n).pop().unwrap();
    let dv = sg.derivative(&values);
    SemigroupGrid { t, values, dv }
}

/// `T_(j spacing) phi` for `j = 0..=n`.
pub fn semigroup_path<C: MeanFieldCoefficients + ?Sized>(
    phi: &TestFunction,
    spacing: f64,
    n: usize,
    coeffs: &C,
    k: usize,
) -> Vec<SemigroupGrid> {
    let sg = DiffusionSemigroup::new(k, coeffs);
    let sub = (spacing / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let fine = sg.march(&phi.voltage_grid(k), spacing / sub as f64, n * sub);
    fine.into_iter()
        .step_by(sub)
        .enumerate()
        .map(|(j, values)| {
            let dv = sg.derivative(&values);
            SemigroupGrid { t: j as f64 * spacing, values, dv }
        })
        .collect()
}
