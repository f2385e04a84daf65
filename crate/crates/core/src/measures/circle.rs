//! Exact Wasserstein-1 distance on the circle of length 2.
//!
//! With `F` and `G` the cumulative distribution functions of the two
//! measures unrolled on `[0, 2)`, the distance is `min_s int |F - G - s|`,
//! attained at a median of `F - G` under Lebesgue measure. Between
//! breakpoints (atoms and cell edges) `F - G` is linear, so both the median
//! and the integral are computed in closed form.

use crate::error::{Error, Result};
use crate::torus::PERIOD;

use super::MASS_TOLERANCE;

/// Probability measure on the voltage torus.
#[derive(Clone, Debug, PartialEq)]
pub enum CircleMeasure {
    /// `(v, weight)` pairs with `v` in `[0, 2)`, sorted by `v`.
    Atoms(Vec<(f64, f64)>),
    /// Piecewise-constant density on a uniform grid of `[0, 2)`.
    Cells(Vec<f64>),
}

impl CircleMeasure {
    pub fn atoms(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        CircleMeasure::Atoms(points)
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            CircleMeasure::Atoms(p) => p.iter().map(|a| a.1).sum(),
            CircleMeasure::Cells(d) => d.iter().sum::<f64>() * PERIOD / d.len() as f64,
        }
    }

    fn check(&self) -> Result<()> {
        let m = self.total_mass();
        let bad_support = match self {
            CircleMeasure::Atoms(p) => p.iter().any(|&(v, w)| !(0.0..PERIOD).contains(&v) || w < 0.0),
            CircleMeasure::Cells(d) => d.is_empty() || d.iter().any(|&x| !(x >= 0.0)),
        };
        if bad_support || (m - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Contract(format!("circle measure is not a probability measure (mass {m})")));
        }
        Ok(())
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            CircleMeasure::Atoms(p) => out.extend(p.iter().map(|a| a.0)),
            CircleMeasure::Cells(d) => {
                let h = PERIOD / d.len() as f64;
                out.extend((0..d.len()).map(|k| k as f64 * h));
            }
        }
    }
}

/// Cumulative distribution evaluated at increasing query points.
struct CdfCursor<'a> {
    measure: &'a CircleMeasure,
    idx: usize,
    acc: f64,
    prefix: Vec<f64>,
}

impl<'a> CdfCursor<'a> {
    fn new(measure: &'a CircleMeasure) -> Self {
        let prefix = match measure {
            CircleMeasure::Cells(d) => {
                let h = PERIOD / d.len() as f64;
                let mut p = Vec::with_capacity(d.len() + 1);
                let mut s = 0.0;
                p.push(0.0);
                for &x in d {
                    s += x * h;
                    p.push(s);
                }
                p
            }
            CircleMeasure::Atoms(_) => Vec::new(),
        };
        CdfCursor { measure, idx: 0, acc: 0.0, prefix }
    }

    /// Right-continuous CDF at `v` and density on the segment starting at `v`.
    /// Queries must be non-decreasing.
    fn at(&mut self, v: f64) -> (f64, f64) {
        match self.measure {
            CircleMeasure::Atoms(p) => {
                while self.idx < p.len() && p[self.idx].0 <= v {
                    self.acc += p[self.idx].1;
                    self.idx += 1;
                }
                (self.acc, 0.0)
            }
            CircleMeasure::Cells(d) => {
                let h = PERIOD / d.len() as f64;
                let k = ((v / h).floor() as usize).min(d.len() - 1);
                (self.prefix[k] + d[k] * (v - k as f64 * h), d[k])
            }
        }
    }
}

/// A piece of `F - G`: linear from `start` with slope `slope` over `len`.
#[derive(Clone, Copy, Debug)]
struct Segment {
    len: f64,
    start: f64,
    end: f64,
}

fn segments(mu: &CircleMeasure, nu: &CircleMeasure) -> Vec<Segment> {
    let mut cuts = vec![0.0, PERIOD];
    mu.breakpoints(&mut cuts);
    nu.breakpoints(&mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut f = CdfCursor::new(mu);
    let mut g = CdfCursor::new(nu);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (fa, df) = f.at(w[0]);
            let (ga, dg) = g.at(w[0]);
            let len = w[1] - w[0];
            let start = fa - ga;
            Segment { len, start, end: start + (df - dg) * len }
        })
        .collect()
}

/// Lebesgue measure of `{H < s}` (strict) or `{H <= s}` over the segments.
fn level_measure(segs: &[Segment], s: f64, strict: bool) -> f64 {
    segs.iter()
        .map(|g| {
            let (lo, hi) = if g.start <= g.end { (g.start, g.end) } else { (g.end, g.start) };
            if lo == hi {
                let below = if strict { lo < s } else { lo <= s };
                if below {
                    g.len
                } else {
                    0.0
                }
            } else {
                g.len * ((s - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        })
        .sum()
}

/// A median of `H` under Lebesgue measure on `[0, 2)`.
fn median(segs: &[Segment]) -> f64 {
    let half = 0.5 * PERIOD;
    let mut knots: Vec<f64> = segs.iter().flat_map(|g| [g.start, g.end]).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    // First knot where the closed sublevel set reaches half the mass.
    let (mut lo, mut hi) = (0usize, knots.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if level_measure(segs, knots[mid], false) >= half {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let c = knots[lo];
    let below = level_measure(segs, c, true);
    if below <= half || lo == 0 {
        return c;
    }
    // The crossing lies strictly between the previous knot and c, where the
    // sublevel measure is linear.
    let prev = knots[lo - 1];
    let m_prev = level_measure(segs, prev, false);
    prev + (half - m_prev) * (c - prev) / (below - m_prev)
}

fn abs_integral(g: &Segment, s: f64) -> f64 {
    let a = g.start - s;
    let b = g.end - s;
    if a * b >= 0.0 {
        0.5 * g.len * (a.abs() + b.abs())
    } else {
        0.5 * g.len * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// Exact `W_1` between two probability measures on the torus.
pub fn wasserstein1_v(mu: &CircleMeasure, nu: &CircleMeasure) -> Result<f64> {
    mu.check()?;
    nu.check()?;
    let segs = segments(mu, nu);
    let s = median(&segs);
    Ok(segs.iter().map(|g| abs_integral(g, s)).sum())
}
