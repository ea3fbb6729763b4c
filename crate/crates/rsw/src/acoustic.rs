//! Acoustic characteristics: integral curves of L = B - eta*That, with the
//! inward unit normal That and the inverse foliation density mu evolved
//! along them.
//!
//! Along a ray:
//!   dx/dt   = v - eta That,
//!   dThat/dt = (-That^j Xhat(v^j) + Xhat(eta)) Xhat,   Xhat = (-That^2, That^1),
//!   dmu/dt  = m + mu e,  m = -(3/2) (mu/eta) That.grad(h),
//!   e = (1/2) eta^-1 That^i L(v^i) + (1/2) eta^-2 L(h) - eps_ij eta^-1 That^i v^j,
//! with L f = B f - eta That.grad(f) and B f taken from the PDE right-hand
//! sides, so no time differencing is needed. The alternative closure
//! m_alt = (3/2) mu That^i That^j d_j v^i is evaluated alongside and the
//! discrepancy reported.
//!
//! On the initial slice mu = eta and That = (-1, 0).

use serde::{Deserialize, Serialize};

use crate::error::{Result, RswError};
use crate::state::{PointSample, SampledFields};

#[derive(Debug, Clone)]
pub struct Ray {
    pub u_label: f64,
    pub theta_label: f64,
    pub x: [f64; 2],
    pub that: [f64; 2],
    pub mu: f64,
    pub alive: bool,
    pub collapsed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RayConfig {
    pub n_u: usize,
    pub n_theta: usize,
    pub mu_stop: f64,
    pub rotation: bool,
}

impl Default for RayConfig {
    fn default() -> Self {
        Self { n_u: 64, n_theta: 16, mu_stop: 0.05, rotation: true }
    }
}

pub struct RayBundle {
    pub rays: Vec<Ray>,
    pub config: RayConfig,
    /// Running max of |m - m_alt| / max(|m|, 0.1) over rays with |m| >= 0.1.
    pub m_discrepancy_max: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RayDeriv {
    pub dx: [f64; 2],
    pub dthat: [f64; 2],
    pub dmu: f64,
    pub m: f64,
    pub m_alt: f64,
}

/// Ray equations from one interpolated field sample.
pub fn ray_rhs(that: [f64; 2], mu: f64, s: &PointSample, rotation: bool) -> RayDeriv {
    let eta = s.h.sqrt();
    let xhat = [-that[1], that[0]];
    let dir = |d: [f64; 2], e: [f64; 2]| d[0] * e[0] + d[1] * e[1];
    let deta = [s.dh[0] / (2.0 * eta), s.dh[1] / (2.0 * eta)];

    let dx = [s.v1 - eta * that[0], s.v2 - eta * that[1]];
    let a = -(that[0] * dir(s.dv1, xhat) + that[1] * dir(s.dv2, xhat)) + dir(deta, xhat);
    let dthat = [a * xhat[0], a * xhat[1]];

    let that_dh = that[0] * s.dh[0] + that[1] * s.dh[1];
    let m = -1.5 * (mu / eta) * that_dh;
    let m_alt = 1.5 * mu * (that[0] * dir(s.dv1, that) + that[1] * dir(s.dv2, that));

    let div_v = s.dv1[0] + s.dv2[1];
    let rot = if rotation { 1.0 } else { 0.0 };
    let bv1 = rot * s.v2 - s.dh[0];
    let bv2 = -rot * s.v1 - s.dh[1];
    let lv1 = bv1 - eta * dir(s.dv1, that);
    let lv2 = bv2 - eta * dir(s.dv2, that);
    let lh = -s.h * div_v - eta * that_dh;
    let e = 0.5 / eta * (that[0] * lv1 + that[1] * lv2) + 0.5 / (eta * eta) * lh
        - rot * (that[0] * s.v2 - that[1] * s.v1) / eta;
    let dmu = m + mu * e;
    RayDeriv { dx, dthat, dmu, m, m_alt }
}

impl RayBundle {
    /// Seed rays on a (u, theta) lattice over [0, delta] x [0, period):
    /// x = (1 - u, theta), That = (-1, 0), mu = eta(0, x).
    pub fn seed(config: &RayConfig, delta: f64, period: f64, fields: &SampledFields) -> Result<Self> {
        let mut rays = Vec::with_capacity(config.n_u * config.n_theta);
        for k in 0..config.n_u {
            let u = (k as f64 + 0.5) / config.n_u as f64 * delta;
            for l in 0..config.n_theta {
                let theta = (l as f64 + 0.5) / config.n_theta as f64 * period;
                let x = [1.0 - u, theta];
                let eta0 = fields.h.interp_bilinear(x[0], x[1])?.sqrt();
                rays.push(Ray {
                    u_label: u,
                    theta_label: theta,
                    x,
                    that: [-1.0, 0.0],
                    mu: eta0,
                    alive: true,
                    collapsed: false,
                });
            }
        }
        Ok(Self { rays, config: config.clone(), m_discrepancy_max: 0.0 })
    }

    /// RK2 (midpoint) advance over [t, t+dt] with linear time interpolation
    /// between the two sampled field sets. Rays leaving the domain die;
    /// rays whose mu falls below mu_stop freeze as collapsed.
    pub fn advance(&mut self, prev: &SampledFields, next: &SampledFields, dt: f64) {
        let rotation = self.config.rotation;
        let mu_stop = self.config.mu_stop;
        let mut disc = self.m_discrepancy_max;
        for ray in &mut self.rays {
            if !ray.alive || ray.collapsed {
                continue;
            }
            let s0 = match prev.sample(ray.x[0], ray.x[1]) {
                Ok(s) => s,
                Err(_) => {
                    ray.alive = false;
                    continue;
                }
            };
            let k1 = ray_rhs(ray.that, ray.mu, &s0, rotation);
            if k1.m.abs() >= 0.1 {
                disc = disc.max((k1.m - k1.m_alt).abs() / k1.m.abs());
            }
            let xm = [ray.x[0] + 0.5 * dt * k1.dx[0], ray.x[1] + 0.5 * dt * k1.dx[1]];
            let tm = [
                ray.that[0] + 0.5 * dt * k1.dthat[0],
                ray.that[1] + 0.5 * dt * k1.dthat[1],
            ];
            let mm = ray.mu + 0.5 * dt * k1.dmu;
            let sm = match (prev.sample(xm[0], xm[1]), next.sample(xm[0], xm[1])) {
                (Ok(a), Ok(b)) => PointSample::lerp(&a, &b, 0.5),
                _ => {
                    ray.alive = false;
                    continue;
                }
            };
            let k2 = ray_rhs(tm, mm, &sm, rotation);
            ray.x[0] += dt * k2.dx[0];
            ray.x[1] += dt * k2.dx[1];
            ray.that[0] += dt * k2.dthat[0];
            ray.that[1] += dt * k2.dthat[1];
            let norm = (ray.that[0] * ray.that[0] + ray.that[1] * ray.that[1]).sqrt();
            ray.that[0] /= norm;
            ray.that[1] /= norm;
            ray.mu += dt * k2.dmu;
            if ray.mu <= mu_stop {
                ray.mu = ray.mu.max(0.0);
                ray.collapsed = true;
            }
        }
        self.m_discrepancy_max = disc;
    }

    /// Minimum of mu over in-domain rays, in fixed ray order.
    pub fn mu_min(&self) -> f64 {
        let mut m = f64::INFINITY;
        for ray in &self.rays {
            if ray.alive || ray.collapsed {
                m = m.min(ray.mu);
            }
        }
        if m.is_finite() {
            m
        } else {
            1.0
        }
    }

    /// Nearest live ray to (x1, x2) with x2 wrapped on the given period.
    pub fn nearest_live(&self, x1: f64, x2: f64, period: f64) -> Option<(&Ray, f64)> {
        let mut best: Option<(&Ray, f64)> = None;
        for ray in &self.rays {
            if !ray.alive {
                continue;
            }
            let d1 = ray.x[0] - x1;
            let mut d2 = (ray.x[1] - x2).rem_euclid(period);
            if d2 > 0.5 * period {
                d2 -= period;
            }
            let d = (d1 * d1 + d2 * d2).sqrt();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((ray, d));
            }
        }
        best
    }
}

/// Least-squares line y = a t + b; returns (a, b, rms residual).
fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let st: f64 = t.iter().sum();
    let sy: f64 = y.iter().sum();
    let stt: f64 = t.iter().map(|v| v * v).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * stt - st * st;
    let a = (n * sty - st * sy) / denom;
    let b = (sy - a * st) / n;
    let rms = (t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let r = yi - (a * ti + b);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (a, b, rms)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub tstar_grad: f64,
    pub grad_fit_residual: f64,
    pub tstar_mu: Option<f64>,
    pub mu_fit_residual: Option<f64>,
}

/// Extrapolated blow-up times: the zero crossing of a linear fit of
/// 1/max|d1 v1| against t over the clean steepening window, and the zero
/// crossing of mu_min against t over mu_min in [0.1, 0.5].
///
/// For exact simple-wave steepening 1/max|d1 v1| is linear in t, so any
/// clean window extrapolates to the blow-up time; numerical dissipation and
/// the captured-shock phase both corrupt the tail. `t_cut` (typically the
/// hybrid-scheme switch time) discards everything at or after it, trailing
/// gradient decline is dropped, and the fit uses the last factor-3 of clean
/// growth.
pub fn estimate_blowup_time(
    t: &[f64],
    max_grad: &[f64],
    mu_min: Option<&[f64]>,
    t_cut: Option<f64>,
) -> Result<BlowupEstimate> {
    assert_eq!(t.len(), max_grad.len());
    let cut = t_cut.unwrap_or(f64::INFINITY);
    let kept: Vec<(f64, f64)> = t
        .iter()
        .zip(max_grad)
        .filter(|(&ti, _)| ti < cut)
        .map(|(&ti, &gi)| (ti, gi))
        .collect();
    // keep only up to the clean-phase peak
    let imax = kept
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let kept = &kept[..=imax.min(kept.len().saturating_sub(1))];
    let g_max = kept.iter().fold(0.0f64, |m, &(_, g)| m.max(g));
    let select = |floor: f64| -> (Vec<f64>, Vec<f64>) {
        let mut ts = Vec::new();
        let mut ys = Vec::new();
        for &(ti, gi) in kept {
            if gi >= floor {
                ts.push(ti);
                ys.push(1.0 / gi);
            }
        }
        (ts, ys)
    };
    let (mut ts, mut ys) = select(g_max / 3.0);
    if ts.len() < 10 {
        (ts, ys) = select(g_max / 5.0);
    }
    if ts.len() < 10 {
        return Err(RswError::InsufficientSteepening);
    }
    let (a, b, rms) = linear_fit(&ts, &ys);
    if a >= 0.0 {
        return Err(RswError::InsufficientSteepening);
    }
    let tstar_grad = -b / a;

    let (tstar_mu, mu_fit_residual) = match mu_min {
        Some(mu) => {
            let mut ts = Vec::new();
            let mut ys = Vec::new();
            for (&ti, &mi) in t.iter().zip(mu) {
                if ti < cut && (0.1..=0.5).contains(&mi) {
                    ts.push(ti);
                    ys.push(mi);
                }
            }
            if ts.len() >= 5 {
                let (a, b, rms) = linear_fit(&ts, &ys);
                if a < 0.0 {
                    (Some(-b / a), Some(rms))
                } else {
                    (None, None)
                }
            } else {
                (None, None)
            }
        }
        None => (None, None),
    };
    Ok(BlowupEstimate { tstar_grad, grad_fit_residual: rms, tstar_mu, mu_fit_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, ScalarField};
    use crate::state::FluidState;

    fn trivial_fields(g: &GridSpec) -> SampledFields {
        SampledFields::compute(&FluidState::rest(g))
    }

    #[test]
    fn trivial_state_ray_derivatives() {
        let g = GridSpec::new(64, 8, 0.0, 2.0, 1.0);
        let f = trivial_fields(&g);
        let s = f.sample(1.0, 0.5).unwrap();
        let d = ray_rhs([-1.0, 0.0], 1.0, &s, true);
        assert!((d.dx[0] - 1.0).abs() < 1e-14 && d.dx[1].abs() < 1e-14);
        assert!(d.dthat[0].abs() < 1e-14 && d.dthat[1].abs() < 1e-14);
        assert!(d.dmu.abs() < 1e-14);
    }

    #[test]
    fn trivial_state_rays_translate() {
        let g = GridSpec::new(128, 8, 0.0, 2.0, 1.0);
        let f = trivial_fields(&g);
        let config = RayConfig { n_u: 4, n_theta: 4, ..Default::default() };
        let mut bundle = RayBundle::seed(&config, 0.05, 1.0, &f).unwrap();
        let x0: Vec<[f64; 2]> = bundle.rays.iter().map(|r| r.x).collect();
        let dt = 0.01;
        for _ in 0..10 {
            bundle.advance(&f, &f, dt);
        }
        for (ray, x0) in bundle.rays.iter().zip(&x0) {
            assert!((ray.x[0] - (x0[0] + 0.1)).abs() < 1e-12);
            assert!((ray.x[1] - x0[1]).abs() < 1e-12);
            assert!((ray.mu - 1.0).abs() < 1e-12);
            assert!((ray.that[0] + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rays_die_out_of_domain() {
        let g = GridSpec::new(32, 8, 0.9, 1.1, 1.0);
        let f = trivial_fields(&g);
        let config = RayConfig { n_u: 2, n_theta: 2, ..Default::default() };
        let mut bundle = RayBundle::seed(&config, 0.05, 1.0, &f).unwrap();
        for _ in 0..100 {
            bundle.advance(&f, &f, 0.01);
        }
        assert!(bundle.rays.iter().all(|r| !r.alive));
    }

    #[test]
    fn pulse_initial_mu_rate_matches_ds_phi1() {
        // at t = 0, dmu/dt = -(3/2) ds phi1(u/delta, theta) + O(delta)
        use crate::pulse::{self, BumpTerm, Profile, PulseSpec, ThetaMod};
        let delta = 0.05;
        let spec = PulseSpec {
            delta,
            iota: 0.0,
            f1: Profile::Zero,
            f2: Profile::Terms {
                terms: vec![
                    BumpTerm { amp: 1.0, s_lo: 0.2, s_hi: 0.8, flat: 0.0, theta: ThetaMod::Uniform },
                    BumpTerm { amp: 0.3, s_lo: 0.2, s_hi: 0.8, flat: 0.0, theta: ThetaMod::Cos { k: 1, phase: 0.0 } },
                ],
            },
            phi2: Profile::Zero,
            normalize_target: Some(1.0),
        };
        let data = pulse::resolve_pulse(&spec, 257, 64).unwrap();
        let g = GridSpec::new(1024, 64, 0.7, 1.3, 1.0);
        let state = pulse::emit_initial_state(&data, &g).unwrap();
        let fields = SampledFields::compute(&state);
        let config = RayConfig { n_u: 32, n_theta: 8, ..Default::default() };
        let bundle = RayBundle::seed(&config, delta, 1.0, &fields).unwrap();
        let mut worst = 0.0f64;
        for ray in &bundle.rays {
            let s = ray.u_label / delta;
            // lattice lookup of ds_phi1 at (s, theta)
            let i = ((s * (data.n_s - 1) as f64).round() as usize).min(data.n_s - 1);
            let j = ((ray.theta_label * data.n_theta as f64).round() as usize) % data.n_theta;
            let ds_phi1 = data.ds_phi1[i * data.n_theta + j];
            let samp = fields.sample(ray.x[0], ray.x[1]).unwrap();
            let d = ray_rhs(ray.that, ray.mu, &samp, true);
            worst = worst.max((d.dmu + 1.5 * ds_phi1).abs());
        }
        assert!(worst <= 10.0 * delta, "worst |dmu/dt + 1.5 ds_phi1| = {worst}");
    }

    #[test]
    fn synthetic_series_fit_is_exact() {
        let t0 = 0.7;
        let ts: Vec<f64> = (0..50).map(|k| 0.2 + 0.008 * k as f64).collect();
        let grads: Vec<f64> = ts.iter().map(|&t| 3.0 / (t0 - t)).collect();
        let mus: Vec<f64> = ts.iter().map(|&t| 1.0 - t / t0).collect();
        let est = estimate_blowup_time(&ts, &grads, Some(&mus), None).unwrap();
        assert!((est.tstar_grad - t0).abs() < 1e-9, "tstar_grad {}", est.tstar_grad);
        assert!((est.tstar_mu.unwrap() - t0).abs() < 1e-9);
    }

    #[test]
    fn oracle_series_fit_within_one_percent() {
        let prof = crate::burgers::BurgersProfile::new(1);
        let oracle = crate::burgers::Burgers1dOracle::new(
            move |x| prof.eval(x),
            move |x| prof.deriv(x),
            -6.0,
            6.0,
        );
        let ts: Vec<f64> = (0..60).map(|k| 0.3 + 0.01 * k as f64).collect();
        let grads: Vec<f64> = ts.iter().map(|&t| oracle.max_slope(t).unwrap()).collect();
        let est = estimate_blowup_time(&ts, &grads, None, None).unwrap();
        assert!(
            (est.tstar_grad - oracle.tstar).abs() / oracle.tstar < 0.01,
            "tstar {} vs {}",
            est.tstar_grad,
            oracle.tstar
        );
    }

    #[test]
    fn insufficient_steepening_detected() {
        let ts: Vec<f64> = (0..20).map(|k| k as f64 * 0.01).collect();
        let grads = vec![1.0; 20];
        assert!(matches!(
            estimate_blowup_time(&ts, &grads, None, None),
            Err(RswError::InsufficientSteepening)
        ));
    }
}
