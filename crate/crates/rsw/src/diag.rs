//! Run diagnostics: conserved-quantity monitors, Lagrangian particle
//! tracking of the materially conserved ratio (omega + 1)/h, the
//! simple-wave defect along the transversal direction, Hoelder quotients,
//! and blow-up rate fits.

use serde::{Deserialize, Serialize};

use crate::acoustic::RayBundle;
use crate::error::Result;
use crate::grid::ScalarField;
use crate::state::{FluidState, SampledFields};

/// One row of the time-series output; column order is fixed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub dt: f64,
    pub mu_min: f64,
    pub max_grad_v1: f64,
    pub max_grad_h: f64,
    pub max_grad_zeta: f64,
    pub xi_drift: f64,
    pub riemann_diff: f64,
    pub mass: f64,
    pub sup_lf_rho: f64,
}

impl SeriesRow {
    pub const COLUMNS: [&'static str; 10] = [
        "t",
        "dt",
        "mu_min",
        "max_grad_v1",
        "max_grad_h",
        "max_grad_zeta",
        "xi_drift",
        "riemann_diff",
        "mass",
        "sup_Lf_rho",
    ];
}

/// Fluid particles advected with v, each carrying its initial value of
/// (omega + 1)/h; the drift of that value along trajectories monitors the
/// material conservation law.
pub struct ParticleSet {
    pub x: Vec<[f64; 2]>,
    pub xi0: Vec<f64>,
    pub alive: Vec<bool>,
}

impl ParticleSet {
    /// Lattice of n1 x n2 particles over [x1_lo, x1_hi] x [0, period).
    pub fn seed(
        state: &FluidState,
        n1: usize,
        n2: usize,
        x1_lo: f64,
        x1_hi: f64,
    ) -> Result<Self> {
        let period = state.grid().x2_period;
        let xi = state.xi();
        let mut x = Vec::with_capacity(n1 * n2);
        let mut xi0 = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            let x1 = x1_lo + (i as f64 + 0.5) / n1 as f64 * (x1_hi - x1_lo);
            for j in 0..n2 {
                let x2 = (j as f64 + 0.5) / n2 as f64 * period;
                xi0.push(xi.interp_bilinear(x1, x2)?);
                x.push([x1, x2]);
            }
        }
        let alive = vec![true; x.len()];
        Ok(Self { x, xi0, alive })
    }

    /// RK2 midpoint advection with dx/dt = v, fields linearly interpolated
    /// in time. Particles leaving the domain are dropped from the drift.
    pub fn advance(&mut self, prev: &SampledFields, next: &SampledFields, dt: f64) {
        for (p, alive) in self.x.iter_mut().zip(&mut self.alive) {
            if !*alive {
                continue;
            }
            let s0 = match prev.sample(p[0], p[1]) {
                Ok(s) => s,
                Err(_) => {
                    *alive = false;
                    continue;
                }
            };
            let xm = [p[0] + 0.5 * dt * s0.v1, p[1] + 0.5 * dt * s0.v2];
            let sm = match (prev.sample(xm[0], xm[1]), next.sample(xm[0], xm[1])) {
                (Ok(a), Ok(b)) => crate::state::PointSample::lerp(&a, &b, 0.5),
                _ => {
                    *alive = false;
                    continue;
                }
            };
            p[0] += dt * sm.v1;
            p[1] += dt * sm.v2;
        }
    }

    /// Max over surviving particles of |xi(t, x_p) - xi_p(0)|.
    pub fn drift(&self, state: &FluidState) -> f64 {
        let xi = state.xi();
        let mut worst = 0.0f64;
        for ((p, &x0), alive) in self.x.iter().zip(&self.xi0).zip(&self.alive) {
            if !*alive {
                continue;
            }
            if let Ok(v) = xi.interp_bilinear(p[0], p[1]) {
                worst = worst.max((v - x0).abs());
            }
        }
        worst
    }
}

/// Sup over grid points in x1 in [lo, hi] of |mu That.grad(rho - v1)|,
/// with (That, mu) taken from the nearest live ray within 2 dx1 and
/// defaulting to ((-1, 0), 1) elsewhere. Measures how far the flow is from
/// an exact simple wave in the transversal direction.
pub fn riemann_difference(state: &FluidState, bundle: Option<&RayBundle>, lo: f64, hi: f64) -> f64 {
    let g = state.grid().clone();
    let rho = state.rho();
    let diff1 = {
        let mut f = rho.ddx1();
        let dv1 = state.v1.ddx1();
        for (a, b) in f.values.iter_mut().zip(&dv1.values) {
            *a -= b;
        }
        f
    };
    let diff2 = {
        let mut f = rho.ddx2();
        let dv2 = state.v1.ddx2();
        for (a, b) in f.values.iter_mut().zip(&dv2.values) {
            *a -= b;
        }
        f
    };
    let near = 2.0 * g.dx1();
    // bucket live rays by x1 column so each grid point scans only nearby rays
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); g.n1];
    if let Some(b) = bundle {
        for (idx, ray) in b.rays.iter().enumerate() {
            if !ray.alive {
                continue;
            }
            let col = ((ray.x[0] - g.x1_min) / g.dx1() - 0.5).round();
            if col >= 0.0 && col < g.n1 as f64 {
                buckets[col as usize].push(idx);
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 0..g.n1 {
        let x1 = g.x1(i);
        if x1 < lo || x1 > hi {
            continue;
        }
        for j in 0..g.n2 {
            let x2 = g.x2(j);
            let mut best: Option<(usize, f64)> = None;
            if let Some(b) = bundle {
                for col in i.saturating_sub(3)..(i + 4).min(g.n1) {
                    for &idx in &buckets[col] {
                        let ray = &b.rays[idx];
                        let d1 = ray.x[0] - x1;
                        let mut d2 = (ray.x[1] - x2).rem_euclid(g.x2_period);
                        if d2 > 0.5 * g.x2_period {
                            d2 -= g.x2_period;
                        }
                        let d = (d1 * d1 + d2 * d2).sqrt();
                        if best.map_or(true, |(_, bd)| d < bd) {
                            best = Some((idx, d));
                        }
                    }
                }
            }
            let (that, mu) = match (bundle, best) {
                (Some(b), Some((idx, d))) if d <= near => {
                    (b.rays[idx].that, b.rays[idx].mu)
                }
                _ => ([-1.0, 0.0], 1.0),
            };
            let v = mu
                * (that[0] * diff1.values[g.idx(i, j)] + that[1] * diff2.values[g.idx(i, j)]);
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Max directional Hoelder-1/3 quotient |f(x) - f(y)| / |x1 - y1|^(1/3)
/// over pairs along the x1 axis, separations from one cell up to max_sep.
/// Deterministic row/pair striding keeps the count at or below a million.
pub fn holder_quotient(f: &ScalarField, exponent: f64, max_sep: f64) -> f64 {
    let g = f.grid.clone();
    let dx = g.dx1();
    let k_max = ((max_sep / dx) as usize).clamp(1, g.n1 - 1);
    // geometric ladder of separations
    let mut seps = Vec::new();
    let mut k = 1usize;
    while k <= k_max {
        seps.push(k);
        k = (k * 5 / 4).max(k + 1);
    }
    let budget = 1_000_000usize;
    let per_sep = budget / seps.len().max(1);
    let row_stride = (g.n1 * g.n2 / per_sep.max(1)).max(1);
    let mut worst = 0.0f64;
    for &k in &seps {
        let h = (k as f64 * dx).powf(exponent);
        let mut counter = 0usize;
        for i in 0..g.n1 - k {
            for j in 0..g.n2 {
                counter += 1;
                if counter % row_stride != 0 {
                    continue;
                }
                let d = (f.values[g.idx(i + k, j)] - f.values[g.idx(i, j)]).abs();
                worst = worst.max(d / h);
            }
        }
    }
    worst
}

/// Slope of log(grad) against log(tstar - t) over the steepening window
/// grad in [g_max/10, g_max/2]; for a 1/(tstar - t) blow-up this is -1.
pub fn rate_fit(t: &[f64], grad: &[f64], tstar: f64) -> Option<(f64, f64)> {
    let g_max = grad.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&ti, &gi) in t.iter().zip(grad) {
        if gi >= g_max / 10.0 && gi <= g_max / 2.0 && tstar > ti {
            xs.push((tstar - ti).ln());
            ys.push(gi.ln());
        }
    }
    if xs.len() < 5 {
        return None;
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let rms = {
        let b = (sy - slope * sx) / n;
        (xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = y - (slope * x + b);
                r * r
            })
            .sum::<f64>()
            / n)
            .sqrt()
    };
    Some((slope, rms))
}

/// Sup norms of the good-direction derivatives L_f rho = -div v + eta d1 rho
/// and L_f v1 = v2 - eta^2 d1 rho + eta d1 v1; both stay O(1) while plain
/// gradients blow up.
pub fn good_direction_sups(state: &FluidState) -> (f64, f64) {
    let g = state.grid();
    let rho = state.rho();
    let d1rho = rho.ddx1();
    let d1v1 = state.v1.ddx1();
    let d2v2 = state.v2.ddx2();
    let mut sup_rho = 0.0f64;
    let mut sup_v1 = 0.0f64;
    for i in 0..g.n1 {
        for j in 0..g.n2 {
            let id = g.idx(i, j);
            let eta = state.h.values[id].sqrt();
            let div = d1v1.values[id] + d2v2.values[id];
            let lf_rho = -div + eta * d1rho.values[id];
            let lf_v1 = state.v2.values[id] - eta * eta * d1rho.values[id]
                + eta * d1v1.values[id];
            sup_rho = sup_rho.max(lf_rho.abs());
            sup_v1 = sup_v1.max(lf_v1.abs());
        }
    }
    (sup_rho, sup_v1)
}
