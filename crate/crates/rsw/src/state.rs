//! Fluid state (h, v1, v2) at a time instant and the derived quantities
//! rho = ln h, eta = sqrt(h), omega = d1 v2 - d2 v1, zeta = omega e^(-rho),
//! xi = zeta + e^(-rho). Derived fields are computed on demand.

use crate::grid::{ddx1, ddx2, GridSpec, ScalarField};

#[derive(Debug, Clone)]
pub struct FluidState {
    pub t: f64,
    pub h: ScalarField,
    pub v1: ScalarField,
    pub v2: ScalarField,
}

impl FluidState {
    pub fn rest(grid: &GridSpec) -> Self {
        Self {
            t: 0.0,
            h: ScalarField::constant(grid, 1.0),
            v1: ScalarField::zeros(grid),
            v2: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.h.grid
    }

    pub fn rho(&self) -> ScalarField {
        ScalarField {
            grid: self.h.grid.clone(),
            values: self.h.values.iter().map(|h| h.ln()).collect(),
        }
    }

    pub fn eta(&self) -> ScalarField {
        ScalarField {
            grid: self.h.grid.clone(),
            values: self.h.values.iter().map(|h| h.sqrt()).collect(),
        }
    }

    /// Fluid vorticity omega = d1 v2 - d2 v1.
    pub fn omega(&self) -> ScalarField {
        ddx1(&self.v2).map2(&ddx2(&self.v1), |a, b| a - b)
    }

    /// Specific vorticity zeta = omega e^(-rho) = omega / h.
    pub fn zeta(&self) -> ScalarField {
        self.omega().map2(&self.h, |w, h| w / h)
    }

    /// Potential vorticity xi = zeta + e^(-rho) = (omega + 1) / h.
    pub fn xi(&self) -> ScalarField {
        self.omega().map2(&self.h, |w, h| (w + 1.0) / h)
    }

    pub fn min_h(&self) -> f64 {
        self.h.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn all_finite(&self) -> bool {
        self.h.all_finite() && self.v1.all_finite() && self.v2.all_finite()
    }

    /// Total mass integral, compensated summation in fixed order.
    pub fn mass(&self) -> f64 {
        let g = self.grid();
        crate::grid::kahan_sum(&self.h.values) * g.dx1() * g.dx2()
    }
}

/// Grid fields and their first derivatives, precomputed once per solver step
/// for ray tracing and diagnostics sampling.
pub struct SampledFields {
    pub h: ScalarField,
    pub v1: ScalarField,
    pub v2: ScalarField,
    pub dh1: ScalarField,
    pub dh2: ScalarField,
    pub dv1_1: ScalarField,
    pub dv1_2: ScalarField,
    pub dv2_1: ScalarField,
    pub dv2_2: ScalarField,
}

impl SampledFields {
    pub fn compute(state: &FluidState) -> Self {
        Self {
            h: state.h.clone(),
            v1: state.v1.clone(),
            v2: state.v2.clone(),
            dh1: ddx1(&state.h),
            dh2: ddx2(&state.h),
            dv1_1: ddx1(&state.v1),
            dv1_2: ddx2(&state.v1),
            dv2_1: ddx1(&state.v2),
            dv2_2: ddx2(&state.v2),
        }
    }
}

/// Point sample of the fields and gradients needed by the ray equations.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointSample {
    pub h: f64,
    pub v1: f64,
    pub v2: f64,
    pub dh: [f64; 2],
    pub dv1: [f64; 2],
    pub dv2: [f64; 2],
}

impl SampledFields {
    pub fn sample(&self, x1: f64, x2: f64) -> crate::error::Result<PointSample> {
        Ok(PointSample {
            h: self.h.interp_bilinear(x1, x2)?,
            v1: self.v1.interp_bilinear(x1, x2)?,
            v2: self.v2.interp_bilinear(x1, x2)?,
            dh: [self.dh1.interp_bilinear(x1, x2)?, self.dh2.interp_bilinear(x1, x2)?],
            dv1: [self.dv1_1.interp_bilinear(x1, x2)?, self.dv1_2.interp_bilinear(x1, x2)?],
            dv2: [self.dv2_1.interp_bilinear(x1, x2)?, self.dv2_2.interp_bilinear(x1, x2)?],
        })
    }
}

impl PointSample {
    pub fn lerp(a: &PointSample, b: &PointSample, alpha: f64) -> PointSample {
        let l = |x: f64, y: f64| (1.0 - alpha) * x + alpha * y;
        PointSample {
            h: l(a.h, b.h),
            v1: l(a.v1, b.v1),
            v2: l(a.v2, b.v2),
            dh: [l(a.dh[0], b.dh[0]), l(a.dh[1], b.dh[1])],
            dv1: [l(a.dv1[0], b.dv1[0]), l(a.dv1[1], b.dv1[1])],
            dv2: [l(a.dv2[0], b.dv2[0]), l(a.dv2[1], b.dv2[1])],
        }
    }
}
