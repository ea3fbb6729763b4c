//! Short-pulse initial data on the strip.
//!
//! Given smooth compactly supported profile inputs (f1, f2, phi2) and a pulse
//! width delta, the generator resolves
//!
//!   ds Phi + dss phi2 = delta f2,  Phi(0, .) = 0,
//!   dtheta phi1 + phi1 = Phi      (unique periodic solution in theta),
//!   ds phi0 - ds phi1 = delta f1, phi0(0, .) = 0,
//!
//! tabulates the profiles, reports the smallness sup-norms of the
//! good-direction derivatives, and predicts the characteristic-collapse time
//! 2 / (3 delta^iota max ds phi1).

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RswError};
use crate::grid::{GridSpec, ScalarField};
use crate::state::FluidState;

/// Unit mollifier bump: exp(4 - 1/(z(1-z))) on (0,1), zero outside, peak 1
/// at z = 1/2. C-infinity with exact compact support.
pub fn mollifier_bump(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        (4.0 - 1.0 / (z * (1.0 - z))).exp()
    }
}

/// First derivative of the unit bump.
pub fn mollifier_bump_d1(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        // q = 1/(z(1-z)), b' = -q' b with q' = -1/z^2 + 1/(1-z)^2
        let q1 = -1.0 / (z * z) + 1.0 / ((1.0 - z) * (1.0 - z));
        -q1 * mollifier_bump(z)
    }
}

/// Second derivative of the unit bump.
pub fn mollifier_bump_d2(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        let q1 = -1.0 / (z * z) + 1.0 / ((1.0 - z) * (1.0 - z));
        let q2 = 2.0 / (z * z * z) + 2.0 / ((1.0 - z) * (1.0 - z) * (1.0 - z));
        (q1 * q1 - q2) * mollifier_bump(z)
    }
}

/// Composite-Simpson integral of z * bump(z) from 0 to z.
fn mollifier_bump_moment(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    if z == 0.0 {
        return 0.0;
    }
    let n = 200; // even
    let h = z / n as f64;
    let f = |u: f64| u * mollifier_bump(u);
    let mut s = f(0.0) + f(z);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(k as f64 * h);
    }
    s * h / 3.0
}

/// Composite-Simpson integral of the unit bump from 0 to z.
fn mollifier_bump_integral(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    if z == 0.0 {
        return 0.0;
    }
    let n = 200; // even
    let h = z / n as f64;
    let mut s = mollifier_bump(0.0) + mollifier_bump(z);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * mollifier_bump(k as f64 * h);
    }
    s * h / 3.0
}

/// Angular modulation of a separable profile term, as a function of
/// theta in [0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaMod {
    Uniform,
    Cos { k: u32, #[serde(default)] phase: f64 },
    Bump { center: f64, width: f64 },
}

impl ThetaMod {
    fn eval(&self, theta: f64) -> f64 {
        match *self {
            ThetaMod::Uniform => 1.0,
            ThetaMod::Cos { k, phase } => {
                (2.0 * std::f64::consts::PI * k as f64 * theta + phase).cos()
            }
            ThetaMod::Bump { center, width } => {
                let d = (theta - center).rem_euclid(1.0);
                let d = if d > 0.5 { d - 1.0 } else { d };
                mollifier_bump(d / width + 0.5)
            }
        }
    }
}

/// One separable term: amp * bump((s - s_lo)/(s_hi - s_lo)) * theta_mod(theta).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpTerm {
    pub amp: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    /// Fraction of the interval occupied by a flat top (0 = classic
    /// mollifier bump). With flat > 0 the shape rises through a smooth
    /// step, holds the peak value 1, and falls symmetrically; still C-inf
    /// with exact interior support. A flat top keeps the induced velocity
    /// ramp resolved much longer once it starts to compress.
    #[serde(default)]
    pub flat: f64,
    #[serde(default = "theta_uniform")]
    pub theta: ThetaMod,
}

fn theta_uniform() -> ThetaMod {
    ThetaMod::Uniform
}

impl BumpTerm {
    fn z(&self, s: f64) -> f64 {
        (s - self.s_lo) / (self.s_hi - self.s_lo)
    }

    fn width(&self) -> f64 {
        self.s_hi - self.s_lo
    }

    /// Ramp fraction on each side of the flat top.
    fn ramp(&self) -> f64 {
        (1.0 - self.flat).clamp(1e-6, 1.0) / 2.0
    }

    /// Shape in the unit variable z (peak value 1 when flat > 0).
    fn shape(&self, z: f64) -> f64 {
        if self.flat <= 0.0 {
            return mollifier_bump(z);
        }
        if z <= 0.0 || z >= 1.0 {
            return 0.0;
        }
        let r = self.ramp();
        let b1 = mollifier_bump_integral(1.0);
        if z < r {
            mollifier_bump_integral(z / r) / b1
        } else if z > 1.0 - r {
            mollifier_bump_integral((1.0 - z) / r) / b1
        } else {
            1.0
        }
    }

    fn shape_d1(&self, z: f64) -> f64 {
        if self.flat <= 0.0 {
            return mollifier_bump_d1(z);
        }
        if z <= 0.0 || z >= 1.0 {
            return 0.0;
        }
        let r = self.ramp();
        let b1 = mollifier_bump_integral(1.0);
        if z < r {
            mollifier_bump(z / r) / (b1 * r)
        } else if z > 1.0 - r {
            -mollifier_bump((1.0 - z) / r) / (b1 * r)
        } else {
            0.0
        }
    }

    fn shape_d2(&self, z: f64) -> f64 {
        if self.flat <= 0.0 {
            return mollifier_bump_d2(z);
        }
        if z <= 0.0 || z >= 1.0 {
            return 0.0;
        }
        let r = self.ramp();
        let b1 = mollifier_bump_integral(1.0);
        if z < r {
            mollifier_bump_d1(z / r) / (b1 * r * r)
        } else if z > 1.0 - r {
            mollifier_bump_d1((1.0 - z) / r) / (b1 * r * r)
        } else {
            0.0
        }
    }

    /// Integral of the shape from 0 to z.
    fn shape_integral(&self, z: f64) -> f64 {
        if self.flat <= 0.0 {
            return mollifier_bump_integral(z);
        }
        if z <= 0.0 {
            return 0.0;
        }
        let r = self.ramp();
        let b1 = mollifier_bump_integral(1.0);
        // int_0^y S(u) du for the rising smooth step S = B(.)/B(1),
        // by parts: (y B(y) - int u b(u)) / B(1); full ramp gives 1/2.
        let ramp_int = |y: f64| -> f64 {
            let y = y.clamp(0.0, 1.0);
            (y * mollifier_bump_integral(y) - mollifier_bump_moment(y)) / b1
        };
        if z < r {
            r * ramp_int(z / r)
        } else if z <= 1.0 - r {
            0.5 * r + (z - r)
        } else {
            0.5 * r + (1.0 - 2.0 * r) + r * (0.5 - ramp_int((1.0 - z.min(1.0)) / r))
        }
    }
}

/// Smooth profile on (s, theta) in [0,1] x [0,1): either a sum of separable
/// bump terms (exact interior support, analytic s-derivatives) or a
/// tabulated lattice (bilinear, finite-difference derivatives).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    Terms { terms: Vec<BumpTerm> },
    Tabulated { n_s: usize, n_theta: usize, values: Vec<f64> },
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Zero
    }
}

impl Profile {
    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Zero)
    }

    pub fn scaled(&self, lambda: f64) -> Profile {
        match self {
            Profile::Zero => Profile::Zero,
            Profile::Terms { terms } => Profile::Terms {
                terms: terms
                    .iter()
                    .map(|t| BumpTerm { amp: lambda * t.amp, ..t.clone() })
                    .collect(),
            },
            Profile::Tabulated { n_s, n_theta, values } => Profile::Tabulated {
                n_s: *n_s,
                n_theta: *n_theta,
                values: values.iter().map(|v| lambda * v).collect(),
            },
        }
    }

    pub fn eval(&self, s: f64, theta: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Terms { terms } => terms
                .iter()
                .map(|t| t.amp * t.shape(t.z(s)) * t.theta.eval(theta))
                .sum(),
            Profile::Tabulated { .. } => self.tab_eval(s, theta),
        }
    }

    pub fn ds(&self, s: f64, theta: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Terms { terms } => terms
                .iter()
                .map(|t| t.amp / t.width() * t.shape_d1(t.z(s)) * t.theta.eval(theta))
                .sum(),
            Profile::Tabulated { .. } => {
                let h = 1e-4;
                (self.tab_eval(s + h, theta) - self.tab_eval(s - h, theta)) / (2.0 * h)
            }
        }
    }

    pub fn dss(&self, s: f64, theta: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Terms { terms } => terms
                .iter()
                .map(|t| {
                    let w = t.width();
                    t.amp / (w * w) * t.shape_d2(t.z(s)) * t.theta.eval(theta)
                })
                .sum(),
            Profile::Tabulated { .. } => {
                let h = 1e-3;
                (self.tab_eval(s + h, theta) - 2.0 * self.tab_eval(s, theta)
                    + self.tab_eval(s - h, theta))
                    / (h * h)
            }
        }
    }

    /// Cumulative integral from 0 to s at fixed theta.
    pub fn cum_s(&self, s: f64, theta: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Terms { terms } => terms
                .iter()
                .map(|t| {
                    let w = t.width();
                    t.amp * w * t.shape_integral(t.z(s)) * t.theta.eval(theta)
                })
                .sum(),
            Profile::Tabulated { .. } => {
                // trapezoid on a fixed fine grid
                let n = 512;
                let h = s / n as f64;
                let mut acc = 0.5 * (self.tab_eval(0.0, theta) + self.tab_eval(s, theta));
                for k in 1..n {
                    acc += self.tab_eval(k as f64 * h, theta);
                }
                acc * h
            }
        }
    }

    fn tab_eval(&self, s: f64, theta: f64) -> f64 {
        let Profile::Tabulated { n_s, n_theta, values } = self else {
            unreachable!()
        };
        let s = s.clamp(0.0, 1.0);
        let fi = s * (*n_s as f64 - 1.0);
        let i0 = (fi.floor() as usize).min(n_s - 2);
        let a = fi - i0 as f64;
        let ft = theta.rem_euclid(1.0) * *n_theta as f64;
        let j0 = (ft.floor() as usize).min(n_theta - 1);
        let b = ft - j0 as f64;
        let j1 = (j0 + 1) % n_theta;
        let at = |i: usize, j: usize| values[i * n_theta + j];
        (1.0 - a) * ((1.0 - b) * at(i0, j0) + b * at(i0, j1))
            + a * ((1.0 - b) * at(i0 + 1, j0) + b * at(i0 + 1, j1))
    }

    /// (s_lo, s_hi) hull of the support, for the interior-support check.
    fn support(&self) -> Option<(f64, f64)> {
        match self {
            Profile::Zero => None,
            Profile::Terms { terms } => {
                if terms.is_empty() {
                    None
                } else {
                    let lo = terms.iter().map(|t| t.s_lo).fold(f64::INFINITY, f64::min);
                    let hi = terms.iter().map(|t| t.s_hi).fold(f64::NEG_INFINITY, f64::max);
                    Some((lo, hi))
                }
            }
            Profile::Tabulated { .. } => Some((0.0, 1.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub delta: f64,
    #[serde(default)]
    pub iota: f64,
    #[serde(default)]
    pub f1: Profile,
    #[serde(default)]
    pub f2: Profile,
    #[serde(default)]
    pub phi2: Profile,
    #[serde(default)]
    pub normalize_target: Option<f64>,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 0.2) {
            return Err(RswError::Schema(format!(
                "pulse delta must be in (0, 0.2], got {}",
                self.delta
            )));
        }
        if !(self.iota > -1.0 && self.iota < 1.0) {
            return Err(RswError::Schema(format!(
                "pulse iota must be in (-1, 1), got {}",
                self.iota
            )));
        }
        for (name, p) in [("f1", &self.f1), ("f2", &self.f2), ("phi2", &self.phi2)] {
            if let Some((lo, hi)) = p.support() {
                if matches!(p, Profile::Terms { .. }) && !(lo > 0.0 && hi < 1.0) {
                    return Err(RswError::Schema(format!(
                        "{name} support [{lo}, {hi}] must lie strictly inside (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub sup_lf_rho: f64,
    pub sup_lf_v1: f64,
    pub sup_lf_xi: f64,
    /// Measured constant: (sup|Lf rho| + sup|Lf v1| + sup|Lf xi|) / delta.
    pub constant: f64,
}

/// Resolved pulse profiles tabulated on an (s, theta) lattice with
/// s_i = i/(n_s - 1), theta_j = j/n_theta.
#[derive(Debug, Clone)]
pub struct PulseData {
    pub spec: PulseSpec, // post-normalization
    pub n_s: usize,
    pub n_theta: usize,
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub big_phi: Vec<f64>,
    pub ds_phi1: Vec<f64>,
    pub ds_phi1_max: f64,
    pub smallness: SmallnessReport,
}

/// Periodic solve of (dtheta + 1) phi = rhs on a uniform theta grid
/// (period 1). The operator is translation invariant, so the solve is a
/// modewise division regardless of any uniform grid offset.
pub fn solve_periodic_theta_ode(rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = rhs.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let ks = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let mult = Complex::new(1.0, 2.0 * std::f64::consts::PI * ks);
        *c /= mult;
    }
    ifft.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Spectral d/dtheta of one periodic row (period 1).
pub fn spectral_dtheta(row: &[f64]) -> Vec<f64> {
    let n = row.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let ks = if k < n / 2 {
            k as f64
        } else if k == n / 2 {
            0.0 // drop the Nyquist mode of the derivative
        } else {
            k as f64 - n as f64
        };
        *c *= Complex::new(0.0, 2.0 * std::f64::consts::PI * ks);
    }
    ifft.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

struct Tables {
    n_s: usize,
    n_theta: usize,
    phi0: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
    big_phi: Vec<f64>,
    ds_phi1: Vec<f64>,
    ds_phi0: Vec<f64>,
    ds_phi2: Vec<f64>,
    dss_phi2: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

fn build_tables(spec: &PulseSpec, n_s: usize, n_theta: usize) -> Tables {
    let delta = spec.delta;
    let mut t = Tables {
        n_s,
        n_theta,
        phi0: vec![0.0; n_s * n_theta],
        phi1: vec![0.0; n_s * n_theta],
        phi2: vec![0.0; n_s * n_theta],
        big_phi: vec![0.0; n_s * n_theta],
        ds_phi1: vec![0.0; n_s * n_theta],
        ds_phi0: vec![0.0; n_s * n_theta],
        ds_phi2: vec![0.0; n_s * n_theta],
        dss_phi2: vec![0.0; n_s * n_theta],
        f1: vec![0.0; n_s * n_theta],
        f2: vec![0.0; n_s * n_theta],
    };
    let thetas: Vec<f64> = (0..n_theta).map(|j| j as f64 / n_theta as f64).collect();
    for i in 0..n_s {
        let s = i as f64 / (n_s - 1) as f64;
        let row = i * n_theta;
        let mut phi_row = vec![0.0; n_theta];
        let mut dsphi_row = vec![0.0; n_theta];
        for (j, &th) in thetas.iter().enumerate() {
            let f1 = spec.f1.eval(s, th);
            let f2 = spec.f2.eval(s, th);
            let dsphi2 = spec.phi2.ds(s, th);
            let dssphi2 = spec.phi2.dss(s, th);
            t.f1[row + j] = f1;
            t.f2[row + j] = f2;
            t.phi2[row + j] = spec.phi2.eval(s, th);
            t.ds_phi2[row + j] = dsphi2;
            t.dss_phi2[row + j] = dssphi2;
            // ds Phi = delta f2 - dss phi2 integrates to
            // Phi = delta int f2 - ds phi2 (ds phi2(0,.) = 0 by support)
            phi_row[j] = delta * spec.f2.cum_s(s, th) - dsphi2;
            dsphi_row[j] = delta * f2 - dssphi2;
        }
        t.big_phi[row..row + n_theta].copy_from_slice(&phi_row);
        let phi1_row = solve_periodic_theta_ode(&phi_row);
        let ds_phi1_row = solve_periodic_theta_ode(&dsphi_row);
        for j in 0..n_theta {
            t.phi1[row + j] = phi1_row[j];
            t.ds_phi1[row + j] = ds_phi1_row[j];
            t.phi0[row + j] = phi1_row[j] + delta * spec.f1.cum_s(s, thetas[j]);
            t.ds_phi0[row + j] = ds_phi1_row[j] + delta * t.f1[row + j];
        }
    }
    t
}

fn smallness_from_tables(spec: &PulseSpec, t: &Tables, period: f64) -> SmallnessReport {
    let delta = spec.delta;
    let a = delta.powf(1.0 + spec.iota);
    let n_theta = t.n_theta;
    let inv_p = 1.0 / period;
    let mut sup_rho = 0.0f64;
    let mut sup_v1 = 0.0f64;
    let mut sup_xi = 0.0f64;
    for i in 0..t.n_s {
        let row = i * n_theta;
        let phi0_row = &t.phi0[row..row + n_theta];
        let phi1_row = &t.phi1[row..row + n_theta];
        let phi2_row = &t.phi2[row..row + n_theta];
        let dth_phi0 = spectral_dtheta(phi0_row);
        let dth_phi1 = spectral_dtheta(phi1_row);
        let dth_phi2 = spectral_dtheta(phi2_row);
        let dth_dsphi1 = spectral_dtheta(&t.ds_phi1[row..row + n_theta]);
        for j in 0..n_theta {
            let rho = a * phi0_row[j];
            let h = rho.exp();
            let eta = (0.5 * rho).exp();
            let v2 = a * delta * phi2_row[j];
            let d1rho = -(a / delta) * t.ds_phi0[row + j];
            let d1v1 = -(a / delta) * t.ds_phi1[row + j];
            let d2v2 = a * delta * inv_p * dth_phi2[j];
            let d1v2 = -a * t.ds_phi2[row + j];
            let d2v1 = a * inv_p * dth_phi1[j];
            let div_v = d1v1 + d2v2;
            let lf_rho = -div_v + eta * d1rho;
            let lf_v1 = v2 - eta * eta * d1rho + eta * d1v1;
            // Lf xi = eta d1 xi with xi = (omega + 1)/h
            let omega = d1v2 - d2v1;
            let xi = (omega + 1.0) / h;
            let d1omega = (a / delta) * (t.dss_phi2[row + j] + inv_p * dth_dsphi1[j]);
            let d1xi = d1omega / h - xi * d1rho;
            let lf_xi = eta * d1xi;
            sup_rho = sup_rho.max(lf_rho.abs());
            sup_v1 = sup_v1.max(lf_v1.abs());
            sup_xi = sup_xi.max(lf_xi.abs());
            let _ = dth_phi0; // theta-derivative of phi0 appears only through d2 terms above
        }
    }
    SmallnessReport {
        sup_lf_rho: sup_rho,
        sup_lf_v1: sup_v1,
        sup_lf_xi: sup_xi,
        constant: (sup_rho + sup_v1 + sup_xi) / a,
    }
}

pub fn resolve_pulse(spec: &PulseSpec, n_s: usize, n_theta: usize) -> Result<PulseData> {
    resolve_pulse_on(spec, n_s, n_theta, 1.0)
}

/// As `resolve_pulse` but with the physical x2 period (only the smallness
/// report depends on it).
pub fn resolve_pulse_on(
    spec: &PulseSpec,
    n_s: usize,
    n_theta: usize,
    period: f64,
) -> Result<PulseData> {
    spec.validate()?;
    assert!(n_s >= 64 && n_theta >= 64, "lattice must be at least 64x64");
    let mut spec = spec.clone();
    if let Some(target) = spec.normalize_target {
        // phi1 depends linearly on (f2, phi2) and not on f1, so a joint
        // rescale of (f2, phi2) rescales ds phi1 exactly.
        let raw = build_tables(&spec, n_s, n_theta);
        let raw_max = raw.ds_phi1.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        if raw_max == 0.0 {
            return Err(RswError::DegenerateSpec);
        }
        let lambda = target / raw_max;
        spec.f2 = spec.f2.scaled(lambda);
        spec.phi2 = spec.phi2.scaled(lambda);
        spec.normalize_target = None;
    }
    let t = build_tables(&spec, n_s, n_theta);
    let ds_phi1_max = t.ds_phi1.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let smallness = smallness_from_tables(&spec, &t, period);
    Ok(PulseData {
        spec,
        n_s,
        n_theta,
        phi0: t.phi0,
        phi1: t.phi1,
        phi2: t.phi2,
        big_phi: t.big_phi,
        ds_phi1: t.ds_phi1,
        ds_phi1_max,
        smallness,
    })
}

impl PulseData {
    /// Max over the lattice of |dtheta phi1 + phi1 - Phi| (spectral dtheta).
    pub fn periodic_residual(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n_s {
            let row = i * self.n_theta;
            let phi1_row = &self.phi1[row..row + self.n_theta];
            let d = spectral_dtheta(phi1_row);
            for j in 0..self.n_theta {
                m = m.max((d[j] + phi1_row[j] - self.big_phi[row + j]).abs());
            }
        }
        m
    }

    /// Theorem precondition: delta^iota * max ds phi1 >= 1.
    pub fn shock_expected(&self) -> bool {
        // small slack: normalization can land a few ulps below 1
        self.spec.delta.powf(self.spec.iota) * self.ds_phi1_max >= 1.0 - 1e-9
    }
}

/// Evaluate the resolved data on a grid:
/// rho = delta^(1+iota) phi0((1-x1)/delta, x2), same for v1, and
/// v2 = delta^(2+iota) phi2, with trivial state for x1 >= 1 and constant
/// continuation for x1 < 1 - delta. h = e^rho.
pub fn emit_initial_state(data: &PulseData, grid: &GridSpec) -> Result<FluidState> {
    let spec = &data.spec;
    let delta = spec.delta;
    let cells = (delta / grid.dx1()).floor() as usize;
    if cells < 32 {
        return Err(RswError::GridTooCoarse { cells, required: 32 });
    }
    let a = delta.powf(1.0 + spec.iota);
    let n1 = grid.n1;
    let n2 = grid.n2;
    let thetas: Vec<f64> = (0..n2).map(|j| grid.x2(j) / grid.x2_period).collect();

    let mut rho = ScalarField::zeros(grid);
    let mut v1 = ScalarField::zeros(grid);
    let mut v2 = ScalarField::zeros(grid);
    for i in 0..n1 {
        let x1 = grid.x1(i);
        if x1 >= 1.0 {
            continue; // trivial state
        }
        let s = ((1.0 - x1) / delta).min(1.0); // constant continuation past s=1
        // Phi row on the physical theta samples, then the periodic solve
        let mut phi_row = vec![0.0; n2];
        for (j, &th) in thetas.iter().enumerate() {
            phi_row[j] = delta * spec.f2.cum_s(s, th) - spec.phi2.ds(s, th);
        }
        let phi1_row = solve_periodic_theta_ode(&phi_row);
        for (j, &th) in thetas.iter().enumerate() {
            let phi0 = phi1_row[j] + delta * spec.f1.cum_s(s, th);
            *rho.at_mut(i, j) = a * phi0;
            *v1.at_mut(i, j) = a * phi1_row[j];
            *v2.at_mut(i, j) = a * delta * spec.phi2.eval(s, th);
        }
    }
    let h = ScalarField { grid: grid.clone(), values: rho.values.iter().map(|r| r.exp()).collect() };
    Ok(FluidState { t: 0.0, h, v1, v2 })
}

/// Predicted collapse time 2 / (3 delta^iota max ds phi1); +infinity when no
/// steepening is predicted.
pub fn predict_blowup(data: &PulseData) -> f64 {
    let k = data.spec.delta.powf(data.spec.iota) * data.ds_phi1_max;
    if k <= 0.0 {
        f64::INFINITY
    } else {
        2.0 / (3.0 * k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(amp: f64, lo: f64, hi: f64) -> Profile {
        Profile::Terms { terms: vec![BumpTerm { amp, s_lo: lo, s_hi: hi, flat: 0.0, theta: ThetaMod::Uniform }] }
    }

    fn spec_zero() -> PulseSpec {
        PulseSpec {
            delta: 0.05,
            iota: 0.0,
            f1: Profile::Zero,
            f2: Profile::Zero,
            phi2: Profile::Zero,
            normalize_target: None,
        }
    }

    #[test]
    fn zero_inputs_give_zero_profiles() {
        let data = resolve_pulse(&spec_zero(), 64, 64).unwrap();
        assert!(data.phi0.iter().all(|&v| v == 0.0));
        assert!(data.phi1.iter().all(|&v| v == 0.0));
        assert!(data.big_phi.iter().all(|&v| v == 0.0));
        assert_eq!(data.ds_phi1_max, 0.0);
        assert!(!data.shock_expected());
        assert_eq!(predict_blowup(&data), f64::INFINITY);
    }

    #[test]
    fn theta_independent_seed_closed_form() {
        // phi2 = a(s) bump, f2 = 0: Phi = -a'(s), phi1 = Phi (theta-uniform),
        // ds phi1 = -a''(s). Oracle = analytic bump derivatives.
        let (lo, hi, amp) = (0.25, 0.75, 0.8);
        let mut spec = spec_zero();
        spec.phi2 = bump(amp, lo, hi);
        let n_s = 257;
        let data = resolve_pulse(&spec, n_s, 64).unwrap();
        let w = hi - lo;
        for i in 0..n_s {
            let s = i as f64 / (n_s - 1) as f64;
            let z = (s - lo) / w;
            let a1 = amp / w * mollifier_bump_d1(z);
            let a2 = amp / (w * w) * mollifier_bump_d2(z);
            for j in 0..64 {
                let k = i * 64 + j;
                assert!((data.big_phi[k] + a1).abs() < 1e-10, "Phi at s={s}");
                assert!((data.phi1[k] + a1).abs() < 1e-9, "phi1 at s={s}");
                assert!((data.ds_phi1[k] + a2).abs() < 1e-8, "ds phi1 at s={s}");
            }
        }
    }

    #[test]
    fn resolve_is_linear_in_f2_phi2() {
        let mut spec = spec_zero();
        spec.f2 = Profile::Terms {
            terms: vec![BumpTerm { amp: 1.0, s_lo: 0.2, s_hi: 0.8, flat: 0.0, theta: ThetaMod::Cos { k: 1, phase: 0.3 } }],
        };
        spec.phi2 = bump(0.5, 0.3, 0.7);
        spec.f1 = bump(0.7, 0.2, 0.6);
        let base = resolve_pulse(&spec, 65, 64).unwrap();
        let lambda = 2.5;
        let mut scaled = spec.clone();
        scaled.f2 = spec.f2.scaled(lambda);
        scaled.phi2 = spec.phi2.scaled(lambda);
        let out = resolve_pulse(&scaled, 65, 64).unwrap();
        for (a, b) in out.phi1.iter().zip(&base.phi1) {
            assert!((a - lambda * b).abs() < 1e-10);
        }
        // phi0 = lambda*phi1_base + delta * int f1
        for k in 0..out.phi0.len() {
            let int_f1 = base.phi0[k] - base.phi1[k]; // = delta int f1
            assert!((out.phi0[k] - (lambda * base.phi1[k] + int_f1)).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_ode_residual_small() {
        let mut spec = spec_zero();
        spec.f2 = Profile::Terms {
            terms: vec![
                BumpTerm { amp: 1.0, s_lo: 0.2, s_hi: 0.8, flat: 0.0, theta: ThetaMod::Uniform },
                BumpTerm { amp: 0.4, s_lo: 0.25, s_hi: 0.75, flat: 0.0, theta: ThetaMod::Cos { k: 2, phase: 0.0 } },
            ],
        };
        spec.phi2 = Profile::Terms {
            terms: vec![BumpTerm { amp: 0.5, s_lo: 0.3, s_hi: 0.7, flat: 0.0, theta: ThetaMod::Bump { center: 0.5, width: 0.5 } }],
        };
        let data = resolve_pulse(&spec, 129, 256).unwrap();
        assert!(data.periodic_residual() <= 1e-8, "residual {}", data.periodic_residual());
    }

    #[test]
    fn normalization_hits_target_and_zero_is_degenerate() {
        let mut spec = spec_zero();
        spec.f2 = bump(1.0, 0.2, 0.8);
        spec.normalize_target = Some(1.0);
        let data = resolve_pulse(&spec, 129, 64).unwrap();
        assert!((data.ds_phi1_max - 1.0).abs() < 1e-9, "max {}", data.ds_phi1_max);
        assert!(data.shock_expected());
        assert!((predict_blowup(&data) - 2.0 / 3.0).abs() < 1e-9);

        let mut degenerate = spec_zero();
        degenerate.normalize_target = Some(1.0);
        assert!(matches!(resolve_pulse(&degenerate, 64, 64), Err(RswError::DegenerateSpec)));
    }

    #[test]
    fn predict_blowup_formula() {
        let mut spec = spec_zero();
        spec.f2 = bump(1.0, 0.2, 0.8);
        spec.normalize_target = Some(2.0);
        let data = resolve_pulse(&spec, 129, 64).unwrap();
        assert!((predict_blowup(&data) - 1.0 / 3.0).abs() < 1e-8);

        let mut spec = spec_zero();
        spec.delta = 0.04;
        spec.iota = 0.5;
        spec.f2 = bump(1.0, 0.2, 0.8);
        spec.normalize_target = Some(1.0);
        let data = resolve_pulse(&spec, 129, 64).unwrap();
        let expect = 2.0 / (3.0 * 0.04f64.powf(0.5));
        assert!((predict_blowup(&data) - expect).abs() < 1e-8);
    }

    #[test]
    fn smallness_is_order_delta() {
        let mut spec = spec_zero();
        spec.f1 = bump(1.0, 0.2, 0.8);
        spec.f2 = Profile::Terms {
            terms: vec![
                BumpTerm { amp: 1.0, s_lo: 0.2, s_hi: 0.8, flat: 0.0, theta: ThetaMod::Uniform },
                BumpTerm { amp: 0.3, s_lo: 0.2, s_hi: 0.8, flat: 0.0, theta: ThetaMod::Cos { k: 1, phase: 0.0 } },
            ],
        };
        spec.phi2 = Profile::Terms {
            terms: vec![BumpTerm { amp: 0.5, s_lo: 0.3, s_hi: 0.7, flat: 0.0, theta: ThetaMod::Cos { k: 1, phase: 0.5 } }],
        };
        spec.normalize_target = Some(1.0);
        let data = resolve_pulse(&spec, 129, 128).unwrap();
        // with normalized O(1) profiles the good-direction sup-norms stay
        // bounded by a moderate multiple of delta
        assert!(data.smallness.constant.is_finite());
        assert!(
            data.smallness.sup_lf_rho + data.smallness.sup_lf_v1 <= 20.0 * spec.delta,
            "report {:?}",
            data.smallness
        );
    }

    #[test]
    fn emit_trivial_and_matching_at_front() {
        let data = resolve_pulse(&spec_zero(), 64, 64).unwrap();
        let grid = GridSpec::new(320, 8, 0.8, 1.2, 1.0);
        let state = emit_initial_state(&data, &grid).unwrap();
        assert!(state.h.values.iter().all(|&h| h == 1.0));
        assert!(state.v1.values.iter().all(|&v| v == 0.0));
        assert!(state.v2.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn emit_grid_too_coarse() {
        let data = resolve_pulse(&spec_zero(), 64, 64).unwrap();
        let grid = GridSpec::new(16, 8, 0.0, 2.0, 1.0);
        assert!(matches!(
            emit_initial_state(&data, &grid),
            Err(RswError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn emitted_potential_vorticity_near_one() {
        let mut spec = spec_zero();
        spec.f1 = bump(0.5, 0.2, 0.8);
        spec.f2 = Profile::Terms {
            terms: vec![
                BumpTerm { amp: 1.0, s_lo: 0.2, s_hi: 0.8, flat: 0.0, theta: ThetaMod::Uniform },
                BumpTerm { amp: 0.3, s_lo: 0.2, s_hi: 0.8, flat: 0.0, theta: ThetaMod::Cos { k: 1, phase: 0.0 } },
            ],
        };
        spec.normalize_target = Some(1.0);
        let data = resolve_pulse(&spec, 129, 64).unwrap();
        let grid = GridSpec::new(1024, 64, 0.7, 1.3, 1.0);
        let state = emit_initial_state(&data, &grid).unwrap();
        let xi = state.xi();
        let max_dev = xi.values.iter().fold(0.0f64, |m, &v| m.max((v - 1.0).abs()));
        assert!(max_dev <= 8.0 * spec.delta, "max |xi - 1| = {max_dev}");
        // boundary matching at x1 = 1: trivial just right of the front
        let i_right = (0..grid.n1).find(|&i| grid.x1(i) > 1.0).unwrap();
        for j in 0..grid.n2 {
            assert_eq!(state.h.at(i_right, j), 1.0);
        }
    }

    #[test]
    fn flat_top_shape_derivatives_and_integral() {
        let term = BumpTerm {
            amp: 1.0,
            s_lo: 0.0,
            s_hi: 1.0,
            flat: 0.6,
            theta: ThetaMod::Uniform,
        };
        let eps = 1e-5;
        let n = 1000;
        let mut cum = 0.0;
        let mut z_prev = 0.0;
        for k in 0..=n {
            let z = k as f64 / n as f64;
            // derivatives against central differences of the shape itself
            if z > 2.0 * eps && z < 1.0 - 2.0 * eps {
                let a1 = term.shape_d1(z);
                let d1 = (term.shape(z + eps) - term.shape(z - eps)) / (2.0 * eps);
                assert!((a1 - d1).abs() < 1e-4 * (1.0 + a1.abs()), "d1 mismatch at z = {z}");
                let a2 = term.shape_d2(z);
                let d2 = (term.shape_d1(z + eps) - term.shape_d1(z - eps)) / (2.0 * eps);
                assert!((a2 - d2).abs() < 1e-3 * (1.0 + a2.abs()), "d2 mismatch at z = {z}");
            }
            // cumulative trapezoid against the closed-form integral
            if k > 0 {
                cum += 0.5 * (term.shape(z_prev) + term.shape(z)) * (1.0 / n as f64);
                assert!((term.shape_integral(z) - cum).abs() < 1e-5, "integral mismatch at z = {z}");
            }
            z_prev = z;
        }
        // plateau value and exact support
        assert_eq!(term.shape(0.5), 1.0);
        assert_eq!(term.shape(0.0), 0.0);
        assert_eq!(term.shape(1.0), 0.0);
        // flat = 0 falls back to the classic mollifier bump
        let plain = BumpTerm { flat: 0.0, ..term.clone() };
        assert_eq!(plain.shape(0.3), mollifier_bump(0.3));
        assert_eq!(plain.shape_d1(0.3), mollifier_bump_d1(0.3));
    }
}
