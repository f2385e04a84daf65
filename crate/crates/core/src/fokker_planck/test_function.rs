use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::Position;
use crate::torus::TorusPoint;

/// Spatial factor `a(x)` of a product test function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpatialFactor {
    Constant {
        value: f64,
    },
    /// `cos(pi w . x)`.
    Cosine {
        wave: [f64; 3],
    },
}

impl SpatialFactor {
    #[inline]
    pub fn eval(&self, x: &Position) -> f64 {
        match self {
            SpatialFactor::Constant { value } => *value,
            SpatialFactor::Cosine { wave } => {
                let s: f64 = wave.iter().zip(&x.0).map(|(w, c)| w * c).sum();
                (PI * s).cos()
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            SpatialFactor::Constant { value } => value.abs(),
            SpatialFactor::Cosine { .. } => 1.0,
        }
    }
}

/// Voltage factor with analytic first and second derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VoltageFactor {
    Constant,
    Cos {
        k: u32,
    },
    Sin {
        k: u32,
    },
    /// `(1 - r^2)^3` with `r = d / width`, `d` the signed torus offset from
    /// `center`; twice continuously differentiable.
    Bump {
        center: f64,
        width: f64,
    },
}

impl VoltageFactor {
    /// Value, first and second derivative at `v`.
    #[inline]
    pub fn jet(&self, v: TorusPoint) -> (f64, f64, f64) {
        let v = v.value();
        match *self {
            VoltageFactor::Constant => (1.0, 0.0, 0.0),
            VoltageFactor::Cos { k } => {
                let w = PI * k as f64;
                let (s, c) = (w * v).sin_cos();
                (c, -w * s, -w * w * c)
            }
            VoltageFactor::Sin { k } => {
                let w = PI * k as f64;
                let (s, c) = (w * v).sin_cos();
                (s, w * c, -w * w * s)
            }
            VoltageFactor::Bump { center, width } => {
                let d = TorusPoint::wrap(v - center).centered();
                let r = d / width;
                if r.abs() >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let q = 1.0 - r * r;
                let d1 = -6.0 * r * q * q / width;
                let d2 = (-6.0 * q * q + 24.0 * r * r * q) / (width * width);
                (q * q * q, d1, d2)
            }
        }
    }
}

/// Product test function `phi(x, v) = a(x) e(v)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub spatial: SpatialFactor,
    pub voltage: VoltageFactor,
}

impl TestFunction {
    pub fn constant(value: f64) -> Self {
        TestFunction { spatial: SpatialFactor::Constant { value }, voltage: VoltageFactor::Constant }
    }

    /// `cos(pi k v)`.
    pub fn cos(k: u32) -> Self {
        TestFunction { spatial: SpatialFactor::Constant { value: 1.0 }, voltage: VoltageFactor::Cos { k } }
    }

    /// `sin(pi k v)`.
    pub fn sin(k: u32) -> Self {
        TestFunction { spatial: SpatialFactor::Constant { value: 1.0 }, voltage: VoltageFactor::Sin { k } }
    }

    /// All Fourier modes `cos(pi k v)`, `sin(pi k v)` with `1 <= k <= k_max`.
    pub fn fourier_modes(k_max: u32) -> Vec<Self> {
        (1..=k_max).flat_map(|k| [Self::cos(k), Self::sin(k)]).collect()
    }

    pub fn with_spatial(mut self, spatial: SpatialFactor) -> Self {
        self.spatial = spatial;
        self
    }

    pub fn label(&self) -> String {
        match self.voltage {
            VoltageFactor::Constant => "const".into(),
            VoltageFactor::Cos { k } => format!("cos{k}"),
            VoltageFactor::Sin { k } => format!("sin{k}"),
            VoltageFactor::Bump { center, width } => format!("bump({center},{width})"),
        }
    }

    #[inline]
    pub fn value(&self, x: &Position, v: TorusPoint) -> f64 {
        self.spatial.eval(x) * self.voltage.jet(v).0
    }

    #[inline]
    pub fn dv(&self, x: &Position, v: TorusPoint) -> f64 {
        self.spatial.eval(x) * self.voltage.jet(v).1
    }

    #[inline]
    pub fn dvv(&self, x: &Position, v: TorusPoint) -> f64 {
        self.spatial.eval(x) * self.voltage.jet(v).2
    }

    /// Voltage factor sampled on `K` cell midpoints.
    pub fn voltage_grid(&self, k: usize) -> Vec<f64> {
        let h = crate::torus::PERIOD / k as f64;
        (0..k).map(|i| self.voltage.jet(TorusPoint::wrap((i as f64 + 0.5) * h)).0).collect()
    }
}
