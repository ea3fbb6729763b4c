//! Periodic-strip structured grid and discrete differential operators.
//!
//! The domain is a truncated strip: x1 bounded (extrapolation ghosts at the
//! two ends), x2 periodic with configurable circumference. Fields are
//! cell-centered, stored row-major with x2 fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RswError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_period: f64,
}

impl GridSpec {
    pub fn new(n1: usize, n2: usize, x1_min: f64, x1_max: f64, x2_period: f64) -> Self {
        assert!(n1 >= 8 && n2 >= 4, "grid must be at least 8x4");
        assert!(x1_max > x1_min && x2_period > 0.0);
        Self { n1, n2, x1_min, x1_max, x2_period }
    }

    pub fn dx1(&self) -> f64 {
        (self.x1_max - self.x1_min) / self.n1 as f64
    }

    pub fn dx2(&self) -> f64 {
        self.x2_period / self.n2 as f64
    }

    /// Cell-center coordinate of column i.
    pub fn x1(&self, i: usize) -> f64 {
        self.x1_min + (i as f64 + 0.5) * self.dx1()
    }

    /// Cell-center coordinate of row j.
    pub fn x2(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx2()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }
}

/// One f64 per cell, row-major with x2 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n1 {
            let x1 = grid.x1(i);
            for j in 0..grid.n2 {
                values.push(f(x1, grid.x2(j)));
            }
        }
        Self { grid: grid.clone(), values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n2 + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.values[i * self.grid.n2 + j]
    }

    pub fn map2(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ddx1(&self) -> ScalarField {
        ddx1(self)
    }

    pub fn ddx2(&self) -> ScalarField {
        ddx2(self)
    }

    /// Max-abs restricted to x1 in [lo, hi].
    pub fn max_abs_in_x1(&self, lo: f64, hi: f64) -> f64 {
        let g = &self.grid;
        let mut m = 0.0f64;
        for i in 0..g.n1 {
            let x1 = g.x1(i);
            if x1 < lo || x1 > hi {
                continue;
            }
            for j in 0..g.n2 {
                m = m.max(self.at(i, j).abs());
            }
        }
        m
    }

    /// Bilinear interpolation of cell-centered values.
    ///
    /// x2 is wrapped periodically; x1 must lie inside the domain bounds.
    /// Within half a cell of the x1 ends the interpolant continues constant
    /// in x1 (consistent with the extrapolation ghost policy).
    pub fn interp_bilinear(&self, x1: f64, x2: f64) -> Result<f64> {
        let g = &self.grid;
        if !(x1 >= g.x1_min && x1 <= g.x1_max) {
            return Err(RswError::OutOfDomain(x1, x2));
        }
        let dx1 = g.dx1();
        let dx2 = g.dx2();
        // fractional cell-center index
        let fi = (x1 - g.x1_min) / dx1 - 0.5;
        let fi = fi.clamp(0.0, (g.n1 - 1) as f64);
        let i0 = (fi.floor() as usize).min(g.n1 - 2);
        let a = (fi - i0 as f64).clamp(0.0, 1.0);

        let fj = (x2 / dx2 - 0.5).rem_euclid(g.n2 as f64);
        let j0 = (fj.floor() as usize).min(g.n2 - 1);
        let b = fj - j0 as f64;
        let j1 = (j0 + 1) % g.n2;

        let f00 = self.at(i0, j0);
        let f01 = self.at(i0, j1);
        let f10 = self.at(i0 + 1, j0);
        let f11 = self.at(i0 + 1, j1);
        Ok((1.0 - a) * ((1.0 - b) * f00 + b * f01) + a * ((1.0 - b) * f10 + b * f11))
    }
}

// 4th-order one-sided first-derivative stencils (times 12*dx).
const ONESIDED0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const ONESIDED1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

/// 4th-order d/dx1: centered in the interior, one-sided at the two boundary
/// bands. Exact for polynomials of degree <= 4.
pub fn ddx1(f: &ScalarField) -> ScalarField {
    let g = &f.grid;
    let n1 = g.n1;
    let n2 = g.n2;
    let inv12dx = 1.0 / (12.0 * g.dx1());
    let mut out = ScalarField::zeros(g);
    for j in 0..n2 {
        let get = |i: usize| f.at(i, j);
        *out.at_mut(0, j) = (0..5).map(|k| ONESIDED0[k] * get(k)).sum::<f64>() * inv12dx;
        *out.at_mut(1, j) = (0..5).map(|k| ONESIDED1[k] * get(k)).sum::<f64>() * inv12dx;
        for i in 2..n1 - 2 {
            *out.at_mut(i, j) =
                (get(i - 2) - 8.0 * get(i - 1) + 8.0 * get(i + 1) - get(i + 2)) * inv12dx;
        }
        *out.at_mut(n1 - 2, j) =
            -(0..5).map(|k| ONESIDED1[k] * get(n1 - 1 - k)).sum::<f64>() * inv12dx;
        *out.at_mut(n1 - 1, j) =
            -(0..5).map(|k| ONESIDED0[k] * get(n1 - 1 - k)).sum::<f64>() * inv12dx;
    }
    out
}

/// 4th-order d/dx2 with periodic wrap.
pub fn ddx2(f: &ScalarField) -> ScalarField {
    let g = &f.grid;
    let n1 = g.n1;
    let n2 = g.n2;
    let inv12dx = 1.0 / (12.0 * g.dx2());
    let mut out = ScalarField::zeros(g);
    for i in 0..n1 {
        for j in 0..n2 {
            let jm2 = f.at(i, (j + n2 - 2) % n2);
            let jm1 = f.at(i, (j + n2 - 1) % n2);
            let jp1 = f.at(i, (j + 1) % n2);
            let jp2 = f.at(i, (j + 2) % n2);
            *out.at_mut(i, j) = (jm2 - 8.0 * jm1 + 8.0 * jp1 - jp2) * inv12dx;
        }
    }
    out
}

/// Undivided fourth difference in x1 (copy ghosts at the ends), divided by dx1^4.
pub fn d4x1(f: &ScalarField) -> ScalarField {
    let g = &f.grid;
    let n1 = g.n1 as isize;
    let inv = 1.0 / g.dx1().powi(4);
    let mut out = ScalarField::zeros(g);
    for j in 0..g.n2 {
        let get = |i: isize| f.at(i.clamp(0, n1 - 1) as usize, j);
        for i in 0..n1 {
            *out.at_mut(i as usize, j) =
                (get(i - 2) - 4.0 * get(i - 1) + 6.0 * get(i) - 4.0 * get(i + 1) + get(i + 2))
                    * inv;
        }
    }
    out
}

/// Undivided fourth difference in x2 (periodic), divided by dx2^4.
pub fn d4x2(f: &ScalarField) -> ScalarField {
    let g = &f.grid;
    let n2 = g.n2;
    let inv = 1.0 / g.dx2().powi(4);
    let mut out = ScalarField::zeros(g);
    for i in 0..g.n1 {
        for j in 0..n2 {
            let v = f.at(i, (j + n2 - 2) % n2) - 4.0 * f.at(i, (j + n2 - 1) % n2)
                + 6.0 * f.at(i, j)
                - 4.0 * f.at(i, (j + 1) % n2)
                + f.at(i, (j + 2) % n2);
            *out.at_mut(i, j) = v * inv;
        }
    }
    out
}

/// Compensated (Kahan) sum in fixed index order, so reductions are
/// deterministic and accurate enough for the mass-drift monitor.
pub fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n1: usize, n2: usize) -> GridSpec {
        GridSpec::new(n1, n2, 0.0, 1.0, 1.0)
    }

    #[test]
    fn ddx_of_constant_is_zero() {
        let g = grid(32, 16);
        let f = ScalarField::constant(&g, 3.25);
        assert_eq!(ddx1(&f).max_abs(), 0.0);
        assert_eq!(ddx2(&f).max_abs(), 0.0);
    }

    #[test]
    fn ddx1_exact_on_linears() {
        let g = grid(32, 8);
        let f = ScalarField::from_fn(&g, |x1, _| x1);
        let d = ddx1(&f);
        for v in &d.values {
            assert!((v - 1.0).abs() < 1e-12, "got {v}");
        }
    }

    #[test]
    fn ddx1_exact_on_quartics() {
        let g = grid(32, 4);
        let f = ScalarField::from_fn(&g, |x1, _| x1.powi(4) - 2.0 * x1.powi(3) + 0.5 * x1);
        let d = ddx1(&f);
        let exact = ScalarField::from_fn(&g, |x1, _| 4.0 * x1.powi(3) - 6.0 * x1.powi(2) + 0.5);
        for (a, b) in d.values.iter().zip(&exact.values) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn ddx2_convergence_fourth_order() {
        // Halving dx2 should cut the max error by >= 15.5x.
        let err = |n2: usize| {
            let g = grid(8, n2);
            let f = ScalarField::from_fn(&g, |_, x2| (2.0 * std::f64::consts::PI * x2).sin());
            let d = ddx2(&f);
            let exact = ScalarField::from_fn(&g, |_, x2| {
                2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x2).cos()
            });
            d.map2(&exact, |a, b| a - b).max_abs()
        };
        let e1 = err(32);
        let e2 = err(64);
        assert!(e1 / e2 >= 15.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn interp_constant_and_nodal() {
        let g = grid(16, 8);
        let c = ScalarField::constant(&g, 3.5);
        assert_eq!(c.interp_bilinear(0.37, 0.91).unwrap(), 3.5);
        let f = ScalarField::from_fn(&g, |x1, x2| x1 + 2.0 * x2);
        let x1 = g.x1(5);
        let x2 = g.x2(3);
        assert!((f.interp_bilinear(x1, x2).unwrap() - (x1 + 2.0 * x2)).abs() < 1e-14);
    }

    #[test]
    fn interp_out_of_domain_errors() {
        let g = grid(16, 8);
        let f = ScalarField::zeros(&g);
        assert!(matches!(f.interp_bilinear(-0.1, 0.0), Err(RswError::OutOfDomain(..))));
        assert!(matches!(f.interp_bilinear(1.1, 0.0), Err(RswError::OutOfDomain(..))));
    }

    #[test]
    fn interp_second_order_under_refinement() {
        let f_exact = |x1: f64, x2: f64| (3.0 * x1).sin() * (2.0 * std::f64::consts::PI * x2).cos();
        let err = |n: usize| {
            let g = grid(n, n);
            let f = ScalarField::from_fn(&g, f_exact);
            let mut m = 0.0f64;
            // sample off-center points away from the x1 edges
            for k in 0..200 {
                let x1 = 0.1 + 0.8 * (k as f64 * 0.618_033_988_75).fract();
                let x2 = (k as f64 * 0.414_213_562_37).fract();
                m = m.max((f.interp_bilinear(x1, x2).unwrap() - f_exact(x1, x2)).abs());
            }
            m
        };
        let e1 = err(64);
        let e2 = err(128);
        assert!(e1 / e2 > 3.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn ddx_linearity() {
        let g = grid(24, 12);
        let f = ScalarField::from_fn(&g, |x1, x2| (x1 * 5.0).sin() * (x2 * 7.0).cos());
        let h = ScalarField::from_fn(&g, |x1, x2| x1 * x1 + x2);
        let (a, b) = (2.5, -1.25);
        let combo = f.map2(&h, |u, v| a * u + b * v);
        let lhs = ddx1(&combo);
        let rhs = ddx1(&f).map2(&ddx1(&h), |u, v| a * u + b * v);
        assert!(lhs.map2(&rhs, |u, v| u - v).max_abs() < 1e-10);
    }

    #[test]
    fn periodic_shift_invariance() {
        let g = grid(16, 32);
        let f = ScalarField::from_fn(&g, |x1, x2| {
            (2.0 * std::f64::consts::PI * x2).sin() + x1
        });
        // shift by one full period = identity on samples
        let shifted = ScalarField::from_fn(&g, |x1, x2| {
            (2.0 * std::f64::consts::PI * (x2 + 1.0)).sin() + x1
        });
        let d1 = ddx2(&f);
        let d2 = ddx2(&shifted);
        assert!(d1.map2(&d2, |u, v| u - v).max_abs() < 1e-12);
    }

    #[test]
    fn discrete_curl_of_gradient_vanishes_at_fourth_order() {
        let err = |n: usize| {
            let g = grid(n, n);
            let f = ScalarField::from_fn(&g, |x1, x2| {
                (4.0 * x1).sin() * (2.0 * std::f64::consts::PI * x2).sin()
            });
            let curl = ddx1(&ddx2(&f)).map2(&ddx2(&ddx1(&f)), |a, b| a - b);
            curl.max_abs()
        };
        // the two difference operators act on independent indices, so they
        // commute exactly; only roundoff remains
        assert!(err(32) < 1e-9, "err {}", err(32));
        assert!(err(64) < 1e-9, "err {}", err(64));
    }

    #[test]
    fn kahan_sum_accuracy() {
        let n = 100_000u64;
        let v: Vec<f64> = (0..n).map(|i| 1e-3 + 1e-18 * i as f64).collect();
        let exact = 1e-3 * n as f64 + 1e-18 * (n * (n - 1) / 2) as f64;
        let s = kahan_sum(&v);
        assert!((s - exact).abs() < 1e-12, "s = {s}, exact = {exact}");
    }
}
