#![allow(dead_code)]

use std::time::Instant;

/// Prints one verdict line and fails the test if the criterion does not hold.
pub fn report(id: u32, name: &str, pass: bool, detail: &str, started: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{verdict}] {name}: {detail} ({:.1} s)", started.elapsed().as_secs_f64());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

/// Optimal value of the transportation LP
/// `min sum c_ij f_ij` s.t. row sums `a`, column sums `b`, `f >= 0`,
/// solved by a dense two-phase tableau simplex with Bland's rule.
pub fn lp_transport(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let nv = n * m;
    // Rows: n supply equations and m - 1 demand equations (the last one is
    // implied by equal totals). One artificial per row.
    let rows = n + m - 1;
    let cols = nv + rows + 1;
    let mut t = vec![vec![0.0; cols]; rows];
    for i in 0..n {
        for j in 0..m {
            t[i][i * m + j] = 1.0;
        }
        t[i][cols - 1] = a[i];
    }
    for j in 0..m - 1 {
        for i in 0..n {
            t[n + j][i * m + j] = 1.0;
        }
        t[n + j][cols - 1] = b[j];
    }
    for r in 0..rows {
        t[r][nv + r] = 1.0;
    }
    let mut basis: Vec<usize> = (0..rows).map(|r| nv + r).collect();

    // Phase 1: minimize the sum of artificials.
    let mut obj1 = vec![0.0; cols];
    for r in 0..rows {
        obj1[nv + r] = 1.0;
    }
    simplex(&mut t, &mut basis, &obj1, nv + rows);
    // Drive remaining (zero-level) artificials out of the basis.
    for r in 0..rows {
        if basis[r] >= nv {
            if let Some(c) = (0..nv).find(|&c| t[r][c].abs() > 1e-12) {
                pivot(&mut t, r, c);
                basis[r] = c;
            }
        }
    }
    // Phase 2 over the original variables only.
    let mut obj2 = vec![0.0; cols];
    obj2[..nv].copy_from_slice(cost);
    simplex(&mut t, &mut basis, &obj2, nv);
    basis.iter().enumerate().filter(|(_, &c)| c < nv).map(|(r, &c)| cost[c] * t[r][cols - 1]).sum()
}

fn pivot(t: &mut [Vec<f64>], r: usize, c: usize) {
    let p = t[r][c];
    t[r].iter_mut().for_each(|x| *x /= p);
    let row = t[r].clone();
    for (i, other) in t.iter_mut().enumerate() {
        if i != r && other[c] != 0.0 {
            let f = other[c];
            other.iter_mut().zip(&row).for_each(|(x, y)| *x -= f * y);
        }
    }
}

/// Minimizes `obj . x` with entering columns restricted to `0..allowed`.
fn simplex(t: &mut [Vec<f64>], basis: &mut [usize], obj: &[f64], allowed: usize) {
    let cols = t[0].len();
    loop {
        // Reduced costs c_j - c_B B^-1 A_j.
        let entering = (0..allowed).find(|&c| {
            if basis.contains(&c) {
                return false;
            }
            let z: f64 = basis.iter().enumerate().map(|(r, &b)| obj[b] * t[r][c]).sum();
            obj[c] - z < -1e-12
        });
        let Some(c) = entering else { return };
        let mut best: Option<(usize, f64)> = None;
        for r in 0..t.len() {
            if t[r][c] > 1e-12 {
                let ratio = t[r][cols - 1] / t[r][c];
                let better = match best {
                    None => true,
                    Some((br, bv)) => ratio < bv - 1e-14 || (ratio <= bv + 1e-14 && basis[r] < basis[br]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
        }
        let Some((r, _)) = best else { panic!("unbounded transport LP") };
        pivot(t, r, c);
        basis[r] = c;
    }
}

/// Wrapped Gaussian heat kernel of `u_t = d u_vv` on the circle of length 2.
pub fn wrapped_heat_kernel(x: f64, d: f64, t: f64) -> f64 {
    let s = 4.0 * d * t;
    (-10..=10)
        .map(|j| {
            let y = x + 2.0 * j as f64;
            (-y * y / s).exp()
        })
        .sum::<f64>()
        / (std::f64::consts::PI * s).sqrt()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
