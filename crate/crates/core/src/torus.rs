//! Arithmetic on the torus `T = R / 2Z` and the compactly supported
//! mollifiers used to smooth empirical voltage distributions.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Length of the voltage torus.
pub const PERIOD: f64 = 2.0;

/// A voltage on the torus, stored as its canonical representative in `[0, 2)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint(f64);

impl TorusPoint {
    /// Canonicalizes a finite real.
    pub fn new(x: f64) -> Result<Self> {
        mod2(x)
    }

    /// Canonicalizes without the finiteness check. NaN propagates.
    #[inline]
    pub fn wrap(x: f64) -> Self {
        let mut r = x.rem_euclid(PERIOD);
        // rem_euclid can round up to exactly the period for tiny negatives.
        if r >= PERIOD {
            r = 0.0;
        }
        TorusPoint(r)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Representative in `(-1, 1]`.
    #[inline]
    pub fn centered(self) -> f64 {
        if self.0 > 1.0 {
            self.0 - PERIOD
        } else {
            self.0
        }
    }
}

impl From<TorusPoint> for f64 {
    fn from(p: TorusPoint) -> f64 {
        p.0
    }
}

/// Reduces `x` modulo 2 into `[0, 2)`.
pub fn mod2(x: f64) -> Result<TorusPoint> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("cannot reduce non-finite value {x} modulo 2")));
    }
    Ok(TorusPoint::wrap(x))
}

/// Geodesic distance on the torus; always in `[0, 1]`.
#[inline]
pub fn torus_dist(a: TorusPoint, b: TorusPoint) -> f64 {
    let d = (a.0 - b.0).abs();
    d.min(PERIOD - d)
}

/// Unnormalized base bump on `(-1/2, 1/2)`.
fn bump_unnormalized(w: f64) -> f64 {
    let q = 0.25 - w * w;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp() * q * q
    }
}

fn bump_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let mass = quad::composite_adaptive(&bump_unnormalized, -0.5, 0.5, 64, 1e-16);
        1.0 / mass
    })
}

/// Base mollifier `gamma(w)` with unit mass, supported on `|w| < 1/2`.
pub fn base_mollifier(w: f64) -> f64 {
    bump_constant() * bump_unnormalized(w)
}

/// Derivative of [`base_mollifier`].
pub fn base_mollifier_derivative(w: f64) -> f64 {
    let q = 0.25 - w * w;
    if q <= 0.0 {
        0.0
    } else {
        bump_constant() * (-1.0 / q).exp() * (-2.0 * w) * (1.0 + 2.0 * q)
    }
}

/// Scaled mollifier family `gamma_alpha(v) = gamma(v / alpha) / alpha` on the torus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierFamily {
    c: f64,
    alpha: f64,
}

impl MollifierFamily {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("mollifier scale must lie in (0, 1], got {alpha}")));
        }
        Ok(MollifierFamily { c: bump_constant(), alpha })
    }

    /// Family with `alpha = N^(-1/3)`.
    pub fn for_particles(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("particle count must be positive".into()));
        }
        Self::new(mollifier_scale_for(n))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Normalization constant of the unscaled bump.
    pub fn normalization(&self) -> f64 {
        self.c
    }

    /// Support radius in torus distance.
    pub fn radius(&self) -> f64 {
        0.5 * self.alpha
    }

    #[inline]
    pub fn eval(&self, v: TorusPoint) -> f64 {
        self.eval_offset(v.centered())
    }

    /// Evaluates at a signed offset already reduced to `(-1, 1]`.
    #[inline]
    pub fn eval_offset(&self, r: f64) -> f64 {
        let w = r / self.alpha;
        let q = 0.25 - w * w;
        if q <= 0.0 {
            0.0
        } else {
            self.c * (-1.0 / q).exp() * q * q / self.alpha
        }
    }
}

/// Returns `alpha_N = N^(-1/3)`, shrunk by ulps until `alpha^-3 <= N` holds in
/// floating point.
pub fn mollifier_scale_for(n: usize) -> f64 {
    assert!(n >= 1, "particle count must be positive");
    let nf = n as f64;
    let mut alpha = nf.cbrt().recip();
    while (1.0 / alpha).powi(3) > nf {
        alpha = f64::from_bits(alpha.to_bits() + 1);
    }
    alpha
}
