//! Time integration of the rotating shallow water system
//!
//!   dh/dt + d1(h v1) + d2(h v2) = 0,
//!   B v1 = v2 - d1 h,   B v2 = -v1 - d2 h,   B = dt + v.grad,
//!
//! with SSP-RK3 and two spatial schemes: low-dissipation 4th-order central
//! differences with fourth-difference hyperviscosity for the smooth
//! steepening phase, and a first-order Rusanov finite-volume scheme on the
//! conservative variables as the robustness fallback near blow-up.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RswError};
use crate::grid::{d4x1, d4x2, ddx1, ddx2};
use crate::state::FluidState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Central4,
    RusanovFv,
    /// Central4 until max |d1 v1| exceeds the switch threshold, then Rusanov.
    Hybrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub cfl: f64,
    /// Hyperviscosity scale: nu4 = hyper_c * dx^3 per direction. Kept small:
    /// large values damp the steepening features themselves and bias the
    /// extrapolated blow-up time late; grid-scale noise growth is handled by
    /// the hybrid switch instead.
    pub hyper_c: f64,
    pub t_end: f64,
    /// Terminate with BlowupDetected when max |d1 v1| exceeds this.
    pub stop_gradient: f64,
    /// Gradient threshold for the hybrid central4 -> rusanov switch.
    pub hybrid_switch: f64,
    /// Fixed dt override (otherwise CFL-controlled).
    pub dt_fixed: Option<f64>,
    /// Rotation (Coriolis) toggle; exists only for 1D validation runs.
    pub rotation: bool,
    pub snapshot_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Hybrid,
            cfl: 0.4,
            hyper_c: 0.001,
            t_end: 1.0,
            stop_gradient: 0.0, // resolved against delta by the run setup
            hybrid_switch: 10.0,
            dt_fixed: None,
            rotation: true,
            snapshot_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(RswError::Schema(format!("cfl must be in (0,1), got {}", self.cfl)));
        }
        Ok(())
    }
}

/// Max signal speed over cells: max(|v1| + eta, |v2| + eta).
pub fn max_signal_speed(state: &FluidState) -> f64 {
    let mut m = 0.0f64;
    for k in 0..state.h.values.len() {
        let eta = state.h.values[k].sqrt();
        m = m.max(state.v1.values[k].abs() + eta);
        m = m.max(state.v2.values[k].abs() + eta);
    }
    m
}

pub fn cfl_dt(state: &FluidState, config: &SolverConfig) -> f64 {
    if let Some(dt) = config.dt_fixed {
        return dt;
    }
    let g = state.grid();
    config.cfl * g.dx1().min(g.dx2()) / max_signal_speed(state).max(1e-12)
}

struct Rhs {
    h: Vec<f64>,
    v1: Vec<f64>,
    v2: Vec<f64>,
}

fn rhs_central4(state: &FluidState, config: &SolverConfig) -> Rhs {
    let g = state.grid();
    let n = g.len();
    let fh1 = state.h.map2(&state.v1, |h, v| h * v);
    let fh2 = state.h.map2(&state.v2, |h, v| h * v);
    let dfh1 = ddx1(&fh1);
    let dfh2 = ddx2(&fh2);
    let dh1 = ddx1(&state.h);
    let dh2 = ddx2(&state.h);
    let dv1_1 = ddx1(&state.v1);
    let dv1_2 = ddx2(&state.v1);
    let dv2_1 = ddx1(&state.v2);
    let dv2_2 = ddx2(&state.v2);
    let rot = if config.rotation { 1.0 } else { 0.0 };

    let mut out = Rhs { h: vec![0.0; n], v1: vec![0.0; n], v2: vec![0.0; n] };
    for k in 0..n {
        let u = state.v1.values[k];
        let w = state.v2.values[k];
        out.h[k] = -dfh1.values[k] - dfh2.values[k];
        out.v1[k] = -u * dv1_1.values[k] - w * dv1_2.values[k] + rot * w - dh1.values[k];
        out.v2[k] = -u * dv2_1.values[k] - w * dv2_2.values[k] - rot * u - dh2.values[k];
    }
    if config.hyper_c > 0.0 {
        let nu1 = config.hyper_c * g.dx1().powi(3);
        let nu2 = config.hyper_c * g.dx2().powi(3);
        for (dst, f) in [
            (&mut out.h, &state.h),
            (&mut out.v1, &state.v1),
            (&mut out.v2, &state.v2),
        ] {
            let q1 = d4x1(f);
            let q2 = d4x2(f);
            for k in 0..n {
                dst[k] -= nu1 * q1.values[k] + nu2 * q2.values[k];
            }
        }
    }
    out
}

#[inline]
fn swe_flux_x(h: f64, v1: f64, v2: f64) -> [f64; 3] {
    [h * v1, h * v1 * v1 + 0.5 * h * h, h * v1 * v2]
}

#[inline]
fn swe_flux_y(h: f64, v1: f64, v2: f64) -> [f64; 3] {
    [h * v2, h * v1 * v2, h * v2 * v2 + 0.5 * h * h]
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Rusanov flux through one face from reconstructed conservative states.
#[inline]
fn rusanov_face(
    ql: [f64; 3],
    qr: [f64; 3],
    flux: impl Fn(f64, f64, f64) -> [f64; 3],
    normal_vel: impl Fn(f64, f64) -> f64,
) -> [f64; 3] {
    let (hl, hr) = (ql[0], qr[0]);
    let (ul, wl) = (ql[1] / hl, ql[2] / hl);
    let (ur, wr) = (qr[1] / hr, qr[2] / hr);
    let a = (normal_vel(ul, wl).abs() + hl.sqrt()).max(normal_vel(ur, wr).abs() + hr.sqrt());
    let fl = flux(hl, ul, wl);
    let fr = flux(hr, ur, wr);
    [
        0.5 * (fl[0] + fr[0]) - 0.5 * a * (qr[0] - ql[0]),
        0.5 * (fl[1] + fr[1]) - 0.5 * a * (qr[1] - ql[1]),
        0.5 * (fl[2] + fr[2]) - 0.5 * a * (qr[2] - ql[2]),
    ]
}

/// Finite-volume RHS on conservative variables (h, h v1, h v2):
/// minmod-limited linear reconstruction with a Rusanov (local
/// Lax-Friedrichs) flux, Coriolis as an unsplit source. The first-order
/// scheme smears a weak shock over ~a dx / jump, far too wide to track a
/// small-amplitude front; the limited reconstruction holds it in a few
/// cells while staying non-oscillatory.
fn rhs_rusanov(state: &FluidState, config: &SolverConfig) -> Rhs {
    let g = state.grid();
    let n1 = g.n1 as isize;
    let n2 = g.n2;
    let inv_dx1 = 1.0 / g.dx1();
    let inv_dx2 = 1.0 / g.dx2();
    let rot = if config.rotation { 1.0 } else { 0.0 };
    let n = g.len();
    let mut out = Rhs { h: vec![0.0; n], v1: vec![0.0; n], v2: vec![0.0; n] };

    let cons = |i: isize, j: isize| -> [f64; 3] {
        let ic = i.clamp(0, n1 - 1) as usize; // copy ghosts in x1
        let jc = (j.rem_euclid(n2 as isize)) as usize; // periodic in x2
        let k = ic * n2 + jc;
        let h = state.h.values[k];
        [h, h * state.v1.values[k], h * state.v2.values[k]]
    };
    // cell value plus limited half-slope toward the +dir face (sign = +1)
    // or the -dir face (sign = -1); falls back to the cell value if the
    // reconstructed depth loses positivity.
    let recon = |c: [f64; 3], m: [f64; 3], p: [f64; 3], sign: f64| -> [f64; 3] {
        let mut q = [0.0; 3];
        for v in 0..3 {
            q[v] = c[v] + 0.5 * sign * minmod(c[v] - m[v], p[v] - c[v]);
        }
        if q[0] <= 0.0 {
            c
        } else {
            q
        }
    };

    // x1 faces
    for j in 0..n2 {
        let mut flux_left = [0.0; 3];
        for i in 0..=n1 {
            let ql = recon(cons(i - 1, j as isize), cons(i - 2, j as isize), cons(i, j as isize), 1.0);
            let qr = recon(cons(i, j as isize), cons(i - 1, j as isize), cons(i + 1, j as isize), -1.0);
            let face = rusanov_face(ql, qr, swe_flux_x, |u, _| u);
            if i > 0 {
                let k = (i - 1) as usize * n2 + j;
                out.h[k] -= (face[0] - flux_left[0]) * inv_dx1;
                out.v1[k] -= (face[1] - flux_left[1]) * inv_dx1;
                out.v2[k] -= (face[2] - flux_left[2]) * inv_dx1;
            }
            flux_left = face;
        }
    }
    // x2 faces (periodic)
    for i in 0..g.n1 as isize {
        let mut flux_lo = [0.0; 3];
        for j in 0..=n2 as isize {
            let ql = recon(cons(i, j - 1), cons(i, j - 2), cons(i, j), 1.0);
            let qr = recon(cons(i, j), cons(i, j - 1), cons(i, j + 1), -1.0);
            let face = rusanov_face(ql, qr, swe_flux_y, |_, w| w);
            if j > 0 {
                let k = i as usize * n2 + (j - 1) as usize;
                out.h[k] -= (face[0] - flux_lo[0]) * inv_dx2;
                out.v1[k] -= (face[1] - flux_lo[1]) * inv_dx2;
                out.v2[k] -= (face[2] - flux_lo[2]) * inv_dx2;
            }
            flux_lo = face;
        }
    }
    // Coriolis source on momentum
    for k in 0..n {
        let h = state.h.values[k];
        out.v1[k] += rot * h * state.v2.values[k];
        out.v2[k] -= rot * h * state.v1.values[k];
    }
    out
}

/// Width (in cells) of the x1 edge strips where the grid-scale filter acts.
const EDGE_FILTER_WIDTH: usize = 8;

/// Damp grid-scale content in narrow strips at the x1 ends.
///
/// The one-sided closures of the fourth-order stencil admit a slowly
/// growing sawtooth mode at the wall; a (1,-4,6,-4,1)/16 filter with a
/// strength ramp removes it each step while leaving smooth fields
/// unchanged to O(dx^4). Identity on x1-constant states.
fn edge_filter_x1(f: &mut crate::grid::ScalarField) {
    let (n1, n2) = (f.grid.n1, f.grid.n2);
    let w = EDGE_FILTER_WIDTH.min(n1 / 4);
    if w == 0 {
        return;
    }
    for j in 0..n2 {
        let get = |i: isize| {
            let i = i.clamp(0, n1 as isize - 1) as usize;
            f.at(i, j)
        };
        let mut corr = vec![0.0f64; 2 * w];
        for (slot, &i) in (0..w).chain(n1 - w..n1).collect::<Vec<_>>().iter().enumerate() {
            let edge_dist = i.min(n1 - 1 - i) as f64;
            let theta = (1.0 - edge_dist / w as f64).powi(2);
            let ii = i as isize;
            let d4 = get(ii - 2) - 4.0 * get(ii - 1) + 6.0 * get(ii) - 4.0 * get(ii + 1)
                + get(ii + 2);
            corr[slot] = theta * d4 / 16.0;
        }
        for (slot, i) in (0..w).chain(n1 - w..n1).enumerate() {
            *f.at_mut(i, j) -= corr[slot];
        }
    }
}

/// One SSP-RK3 step with the given (already resolved) scheme and dt.
pub fn step(state: &FluidState, config: &SolverConfig, scheme: Scheme, dt: f64) -> Result<FluidState> {
    match scheme {
        Scheme::Central4 => step_primitive(state, config, dt),
        Scheme::RusanovFv => step_conservative(state, config, dt),
        Scheme::Hybrid => unreachable!("hybrid must be resolved by the caller"),
    }
}

// Classical RK4. The smooth phase tracks wave steepening, where the
// feature wavenumber grows with the gradient: third-order time stepping
// damps those modes like (k c dt)^4 / dt and visibly caps the growth at
// this resolution, while RK4's (k c dt)^6 / dt is negligible until the
// feature is near the grid scale (by then the hybrid switch has fired).
fn step_primitive(state: &FluidState, config: &SolverConfig, dt: f64) -> Result<FluidState> {
    let n = state.h.values.len();
    let at_stage = |r: &Rhs, c: f64| -> FluidState {
        let mut out = state.clone();
        for k in 0..n {
            out.h.values[k] += c * dt * r.h[k];
            out.v1.values[k] += c * dt * r.v1[k];
            out.v2.values[k] += c * dt * r.v2[k];
        }
        out
    };
    let k1 = rhs_central4(state, config);
    let k2 = rhs_central4(&at_stage(&k1, 0.5), config);
    let k3 = rhs_central4(&at_stage(&k2, 0.5), config);
    let k4 = rhs_central4(&at_stage(&k3, 1.0), config);
    let mut out = state.clone();
    let w = dt / 6.0;
    for k in 0..n {
        out.h.values[k] += w * (k1.h[k] + 2.0 * (k2.h[k] + k3.h[k]) + k4.h[k]);
        out.v1.values[k] += w * (k1.v1[k] + 2.0 * (k2.v1[k] + k3.v1[k]) + k4.v1[k]);
        out.v2.values[k] += w * (k1.v2[k] + 2.0 * (k2.v2[k] + k3.v2[k]) + k4.v2[k]);
    }
    edge_filter_x1(&mut out.h);
    edge_filter_x1(&mut out.v1);
    edge_filter_x1(&mut out.v2);
    out.t = state.t + dt;
    finalize(out)
}

fn step_conservative(state: &FluidState, config: &SolverConfig, dt: f64) -> Result<FluidState> {
    // work in (h, q1, q2)
    let n = state.h.values.len();
    let to_cons = |s: &FluidState| {
        let mut q = vec![0.0f64; 3 * n];
        for k in 0..n {
            q[k] = s.h.values[k];
            q[n + k] = s.h.values[k] * s.v1.values[k];
            q[2 * n + k] = s.h.values[k] * s.v2.values[k];
        }
        q
    };
    let from_cons = |q: &[f64], t: f64| -> Result<FluidState> {
        let mut out = state.clone();
        for k in 0..n {
            let h = q[k];
            if h <= 0.0 {
                return Err(RswError::PositivityLoss(h));
            }
            out.h.values[k] = h;
            out.v1.values[k] = q[n + k] / h;
            out.v2.values[k] = q[2 * n + k] / h;
        }
        out.t = t;
        Ok(out)
    };
    let euler = |q: &[f64], t: f64, dt: f64| -> Result<Vec<f64>> {
        let s = from_cons(q, t)?;
        let r = rhs_rusanov(&s, config);
        let mut out = q.to_vec();
        for k in 0..n {
            out[k] += dt * r.h[k];
            out[n + k] += dt * r.v1[k];
            out[2 * n + k] += dt * r.v2[k];
        }
        Ok(out)
    };
    let q0 = to_cons(state);
    let q1 = euler(&q0, state.t, dt)?;
    let q2e = euler(&q1, state.t + dt, dt)?;
    let q2: Vec<f64> = q0.iter().zip(&q2e).map(|(&a, &b)| 0.75 * a + 0.25 * b).collect();
    let q3e = euler(&q2, state.t + 0.5 * dt, dt)?;
    let qf: Vec<f64> = q0
        .iter()
        .zip(&q3e)
        .map(|(&a, &b)| (a + 2.0 * b) / 3.0)
        .collect();
    finalize(from_cons(&qf, state.t + dt)?)
}

fn finalize(state: FluidState) -> Result<FluidState> {
    if !state.all_finite() {
        return Err(RswError::NonFinite("state"));
    }
    let min_h = state.min_h();
    if min_h <= 0.0 {
        return Err(RswError::PositivityLoss(min_h));
    }
    Ok(state)
}
