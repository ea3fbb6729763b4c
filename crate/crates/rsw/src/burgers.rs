//! Self-similar Burgers profile family and a 1D characteristic-method oracle.
//!
//! The family index n >= 1 selects the profile implicitly defined by
//! y = -U - U^(2n+1); n = 1 is the generic stable profile with the cubic
//! relation. The 2D lift is W(x1, x2) = <x2> U(<x2>^3 x1) with
//! <x2> = (1 + x2^2)^(1/2).

use crate::error::{Result, RswError};
use crate::grid::{GridSpec, ScalarField};
use crate::pulse::mollifier_bump;
use crate::state::FluidState;

/// Evaluator for the implicit profile U(y) of family index n.
#[derive(Debug, Clone, Copy)]
pub struct BurgersProfile {
    pub n: u32,
}

impl BurgersProfile {
    pub fn new(n: u32) -> Self {
        assert!(n >= 1);
        Self { n }
    }

    /// Root of U + U^(2n+1) + y = 0. The map U -> U + U^(2n+1) is strictly
    /// increasing, so the root is unique; bisection on [-(1+|y|), 1+|y|]
    /// followed by Newton polish.
    pub fn eval(&self, y: f64) -> f64 {
        solve_profile(y, self.n)
    }

    /// dU/dy by implicit differentiation of y = -U - U^(2n+1).
    pub fn deriv(&self, y: f64) -> f64 {
        let u = self.eval(y);
        let p = 2 * self.n;
        -1.0 / (1.0 + (p + 1) as f64 * u.powi(p as i32))
    }

    /// Residual of the self-similar ODE
    /// -(1/2n) U + ((2n+1)/(2n) y + U) U' = 0 at y.
    pub fn ode_residual(&self, y: f64) -> f64 {
        let nn = self.n as f64;
        let u = self.eval(y);
        let du = self.deriv(y);
        -u / (2.0 * nn) + ((2.0 * nn + 1.0) / (2.0 * nn) * y + u) * du
    }

    /// 2D lift W(x1, x2) = <x2> U(x1 / <x2>^3), equivalently the root of
    /// x1 = -W (1 + x2^2) - W^3 for n = 1; this is the profile solving
    /// -(1/2) W + ((3/2) x1 + W) d1 W + (1/2) x2 d2 W = 0.
    pub fn eval_2d(&self, x1: f64, x2: f64) -> f64 {
        let b = (1.0 + x2 * x2).sqrt();
        b * self.eval(x1 / b.powi(3))
    }
}

pub fn solve_profile(y: f64, n: u32) -> f64 {
    let p = (2 * n + 1) as i32;
    let res = |u: f64| u + u.powi(p) + y;
    let mut lo = -(1.0 + y.abs());
    let mut hi = 1.0 + y.abs();
    debug_assert!(res(lo) <= 0.0 && res(hi) >= 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if res(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..4 {
        let r = res(u);
        let dr = 1.0 + p as f64 * u.powi(p - 1);
        u -= r / dr;
    }
    u
}

pub fn eval_2d_profile(x1: f64, x2: f64, n: u32) -> f64 {
    BurgersProfile::new(n).eval_2d(x1, x2)
}

/// Initial state built from the cut-off self-similar profile:
/// rho(0, x) = -delta * gamma(x1) * W((1 - delta/2 - x1)/delta, x2c) with
/// gamma supported in [1 - delta, 1] and gamma(1 - delta/2) = 1.
///
/// The velocity is the simple-wave-consistent choice v1 = rho, v2 = 0.
/// x2 enters through a centered periodic coordinate so the profile is
/// symmetric about the middle of the strip.
pub fn emit_selfsimilar_state(delta: f64, n: u32, grid: &GridSpec) -> Result<(FluidState, f64)> {
    let cells = (delta / grid.dx1()).floor() as usize;
    if cells < 64 {
        return Err(RswError::GridTooCoarse { cells, required: 64 });
    }
    let profile = BurgersProfile::new(n);
    let p = grid.x2_period;
    let rho = ScalarField::from_fn(grid, |x1, x2| {
        // gamma: unit-peak mollifier bump on (1-delta, 1)
        let z = (x1 - (1.0 - delta)) / delta;
        let gamma = mollifier_bump(z);
        if gamma == 0.0 {
            return 0.0;
        }
        let x2c = (x2 / p - 0.5) * p; // centered periodic coordinate
        let w0 = profile.eval_2d((1.0 - 0.5 * delta - x1) / delta, x2c);
        -delta * gamma * w0
    });
    let h = ScalarField { grid: grid.clone(), values: rho.values.iter().map(|r| r.exp()).collect() };
    let v1 = rho.clone();
    let v2 = ScalarField::zeros(grid);
    let state = FluidState { t: 0.0, h, v1, v2 };
    let min_d1rho = crate::grid::ddx1(&rho)
        .values
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    Ok((state, min_d1rho))
}

/// 1D Burgers reference solution by characteristics.
///
/// Evaluates u(x, t) pre-shock by inverting x = x0 + t u0(x0) with bisection
/// on a monotone window; the exact blow-up time is -1/min u0'.
pub struct Burgers1dOracle<F, G> {
    pub u0: F,
    pub du0: G,
    pub x_lo: f64,
    pub x_hi: f64,
    pub tstar: f64,
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> Burgers1dOracle<F, G> {
    pub fn new(u0: F, du0: G, x_lo: f64, x_hi: f64) -> Self {
        let mut min_slope = f64::INFINITY;
        let samples = 4096;
        for k in 0..=samples {
            let x = x_lo + (x_hi - x_lo) * k as f64 / samples as f64;
            min_slope = min_slope.min(du0(x));
        }
        let tstar = if min_slope < 0.0 { -1.0 / min_slope } else { f64::INFINITY };
        Self { u0, du0, x_lo, x_hi, tstar }
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        if t >= self.tstar {
            return Err(RswError::PastBlowup { t, tstar: self.tstar });
        }
        // x0 -> x0 + t u0(x0) is strictly increasing for t < tstar
        let map = |x0: f64| x0 + t * (self.u0)(x0);
        let mut lo = self.x_lo;
        let mut hi = self.x_hi;
        // widen until the target is bracketed (characteristics may originate
        // outside the sampled window)
        let mut guard = 0;
        while x < map(lo) && guard < 200 {
            lo -= (hi - lo).max(1.0);
            guard += 1;
        }
        while x > map(hi) && guard < 200 {
            hi += (hi - lo).max(1.0);
            guard += 1;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if map(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok((self.u0)(0.5 * (lo + hi)))
    }

    /// Max |du/dx| at time t, from the characteristic stretching formula
    /// u'(x) = u0'(x0) / (1 + t u0'(x0)).
    pub fn max_slope(&self, t: f64) -> Result<f64> {
        if t >= self.tstar {
            return Err(RswError::PastBlowup { t, tstar: self.tstar });
        }
        let samples = 4096;
        let mut m = 0.0f64;
        for k in 0..=samples {
            let x0 = self.x_lo + (self.x_hi - self.x_lo) * k as f64 / samples as f64;
            let g = (self.du0)(x0);
            m = m.max((g / (1.0 + t * g)).abs());
        }
        Ok(m)
    }
}
