//! Run loop: builds the initial state from a configuration, evolves it with
//! the hybrid scheme, carries the acoustic ray bundle and particle set along,
//! and records the diagnostic time series.

use serde::{Deserialize, Serialize};

use crate::acoustic::RayBundle;
use crate::diag::{self, ParticleSet, SeriesRow};
use crate::error::{Result, RswError};
use crate::io::RunConfig;
use crate::pulse::{self, PulseData};
use crate::solver::{self, Scheme, SolverConfig};
use crate::state::{FluidState, SampledFields};

const DT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    BlowupDetected,
    PositivityLoss,
}

pub struct RunOutcome {
    pub status: RunStatus,
    pub state: FluidState,
    pub series: Vec<SeriesRow>,
    pub steps: usize,
    /// Time of the central -> shock-capturing switch, if it happened.
    pub switched_at: Option<f64>,
    pub bundle: Option<RayBundle>,
    pub m_discrepancy_max: f64,
    /// Linear-theory blow-up prediction from the initial data, if available.
    pub tstar_predicted: Option<f64>,
}

pub struct Prepared {
    pub state: FluidState,
    pub solver: SolverConfig,
    pub pulse_data: Option<PulseData>,
    pub delta: f64,
    pub tstar_predicted: Option<f64>,
}

/// Build the initial state and resolve defaults that depend on the data
/// (an unset gradient stop threshold becomes 200 / delta).
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let mut solver_cfg = config.solver.clone();
    let (state, pulse_data, delta, tstar) = if let Some(spec) = &config.pulse {
        let data = pulse::resolve_pulse(spec, 257, 256)?;
        let state = pulse::emit_initial_state(&data, &config.grid)?;
        let tstar = data.shock_expected().then(|| pulse::predict_blowup(&data));
        let delta = data.spec.delta;
        (state, Some(data), delta, tstar)
    } else {
        let spec = config.selfsimilar.as_ref().unwrap();
        let (state, min_d1rho) =
            crate::burgers::emit_selfsimilar_state(spec.delta, spec.n, &config.grid)?;
        // linearized simple-wave prediction: 1 / |min d1 v1| scaled by 3/2
        let tstar = (min_d1rho < 0.0).then(|| 2.0 / (3.0 * min_d1rho.abs()));
        (state, None, spec.delta, tstar)
    };
    if solver_cfg.stop_gradient <= 0.0 {
        solver_cfg.stop_gradient = 200.0 / delta;
    }
    Ok(Prepared { state, solver: solver_cfg, pulse_data, delta, tstar_predicted: tstar })
}

/// Evolve a prepared run to completion. The hook sees every recorded series
/// row together with the current state (before any non-recorded steps in
/// between).
pub fn run_with_hook(
    config: &RunConfig,
    prepared: Prepared,
    mut hook: impl FnMut(&FluidState, &SeriesRow),
) -> Result<RunOutcome> {
    let Prepared { mut state, solver: solver_cfg, delta, tstar_predicted, .. } = prepared;
    let grid = state.grid().clone();
    let mut fields = SampledFields::compute(&state);

    let mut bundle = match &config.rays {
        Some(ray_cfg) => Some(RayBundle::seed(ray_cfg, delta, grid.x2_period, &fields)?),
        None => None,
    };
    let mut particles = if config.diagnostics.particles_n1 > 0 {
        // seed across the pulse support, clear of the domain edges
        let lo = (1.0 - delta - 0.05).max(grid.x1_min + 2.0 * grid.dx1());
        let hi = (1.0f64 + 0.05).min(grid.x1_max - 2.0 * grid.dx1());
        Some(ParticleSet::seed(
            &state,
            config.diagnostics.particles_n1,
            config.diagnostics.particles_n2,
            lo,
            hi,
        )?)
    } else {
        None
    };

    let mass0 = state.mass();
    let mut series = Vec::new();
    let mut steps = 0usize;
    let mut switched_at: Option<f64> = None;
    let status;
    let series_every = config.diagnostics.series_every.max(1);

    let record = |state: &FluidState,
                  fields: &SampledFields,
                  dt: f64,
                  bundle: &Option<RayBundle>,
                  particles: &Option<ParticleSet>|
     -> SeriesRow {
        let zeta = state.zeta();
        let mu_min = bundle.as_ref().map_or(1.0, |b| b.mu_min());
        let riemann_diff = if config.diagnostics.riemann {
            let lo = 1.0 - delta - 0.1;
            let hi = 1.0 + state.t + 0.1;
            diag::riemann_difference(state, bundle.as_ref(), lo, hi)
        } else {
            0.0
        };
        let (sup_lf_rho, _) = diag::good_direction_sups(state);
        SeriesRow {
            t: state.t,
            dt,
            mu_min,
            max_grad_v1: fields.dv1_1.max_abs(),
            max_grad_h: fields.dh1.max_abs(),
            max_grad_zeta: zeta.ddx1().max_abs().max(zeta.ddx2().max_abs()),
            xi_drift: particles.as_ref().map_or(0.0, |p| p.drift(state)),
            riemann_diff,
            mass: state.mass() - mass0,
            sup_lf_rho,
        }
    };

    let row = record(&state, &fields, 0.0, &bundle, &particles);
    hook(&state, &row);
    series.push(row);

    loop {
        let max_grad = fields.dv1_1.max_abs();
        if max_grad >= solver_cfg.stop_gradient {
            status = RunStatus::BlowupDetected;
            break;
        }
        if state.t >= solver_cfg.t_end - 1e-14 {
            status = RunStatus::Completed;
            break;
        }
        let scheme = match solver_cfg.scheme {
            Scheme::Hybrid => {
                if switched_at.is_none() && max_grad > solver_cfg.hybrid_switch {
                    switched_at = Some(state.t);
                }
                if switched_at.is_some() {
                    Scheme::RusanovFv
                } else {
                    Scheme::Central4
                }
            }
            s => s,
        };
        let mut dt = match solver_cfg.dt_fixed {
            Some(d) => d,
            None => solver::cfl_dt(&state, &solver_cfg),
        };
        dt = dt.min(solver_cfg.t_end - state.t);
        if dt < DT_FLOOR {
            status = RunStatus::BlowupDetected;
            break;
        }
        match solver::step(&state, &solver_cfg, scheme, dt) {
            Ok(next) => state = next,
            Err(RswError::PositivityLoss(_)) | Err(RswError::NonFinite(_)) => {
                status = RunStatus::PositivityLoss;
                break;
            }
            Err(e) => return Err(e),
        }
        steps += 1;
        let next_fields = SampledFields::compute(&state);
        if let Some(b) = bundle.as_mut() {
            b.advance(&fields, &next_fields, dt);
        }
        if let Some(p) = particles.as_mut() {
            p.advance(&fields, &next_fields, dt);
        }
        fields = next_fields;
        if steps % series_every == 0 {
            let row = record(&state, &fields, dt, &bundle, &particles);
            hook(&state, &row);
            series.push(row);
        }
    }

    // always record the final state
    if series.last().map_or(true, |r| r.t < state.t - 1e-15) {
        let row = record(&state, &fields, 0.0, &bundle, &particles);
        hook(&state, &row);
        series.push(row);
    }

    let m_disc = bundle.as_ref().map_or(0.0, |b| b.m_discrepancy_max);
    Ok(RunOutcome {
        status,
        state,
        series,
        steps,
        switched_at,
        bundle,
        m_discrepancy_max: m_disc,
        tstar_predicted,
    })
}

pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let prepared = prepare(config)?;
    run_with_hook(config, prepared, |_, _| {})
}
