//! Fast Ornstein-Uhlenbeck driving regime and the asymptotic-preserving
//! splitting schemes.
//!
//! For epsilon > 0 the white noise is replaced by OU processes
//! `d xi_k = -xi_k / eps^2 dt + dW_k / eps`, turning the SDE into a random
//! ODE. The AP step discretises the OU components with a linear implicit
//! rule and feeds `sigma_k h xi_k / eps` as the stochastic flow-times of
//! the splitting step; for fixed h the scheme converges to the plain
//! splitting integrator as eps -> 0, and eps = 0 dispatches to it exactly.

use crate::error::{Error, Result};
use crate::integrators::{step_splitting, SchemeId, Trajectory};
use crate::models::{FlowPartId, Model};
use crate::noise::BrownianPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuVariant {
    /// xi' = (xi + dW/eps) / (1 + h/eps^2)
    ImplicitEuler,
    /// xi' = ((1 - h/(2 eps^2)) xi + dW/eps) / (1 + h/(2 eps^2))
    Midpoint,
}

#[derive(Debug, Clone, Copy)]
pub struct ApConfig {
    pub epsilon: f64,
    pub ou_variant: OuVariant,
}

impl ApConfig {
    pub fn implicit_euler(epsilon: f64) -> Self {
        ApConfig {
            epsilon,
            ou_variant: OuVariant::ImplicitEuler,
        }
    }

    pub fn midpoint(epsilon: f64) -> Self {
        ApConfig {
            epsilon,
            ou_variant: OuVariant::Midpoint,
        }
    }
}

/// State of the multiscale system: the slow variable together with the m
/// auxiliary OU variables (initially zero).
#[derive(Debug, Clone)]
pub struct MultiscaleState {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
}

impl MultiscaleState {
    pub fn new(y0: &[f64], m: usize) -> Self {
        MultiscaleState {
            y: y0.to_vec(),
            xi: vec![0.0; m],
        }
    }
}

/// One update of an OU component.
pub fn ou_update(xi_prev: f64, h: f64, epsilon: f64, dw: f64, variant: OuVariant) -> f64 {
    debug_assert!(h > 0.0 && epsilon > 0.0);
    match variant {
        OuVariant::ImplicitEuler => (xi_prev + dw / epsilon) / (1.0 + h / (epsilon * epsilon)),
        OuVariant::Midpoint => {
            let r = h / (2.0 * epsilon * epsilon);
            ((1.0 - r) * xi_prev + dw / epsilon) / (1.0 + r)
        }
    }
}

/// One asymptotic-preserving step: update every OU component, run the
/// stochastic flows with flow-times `sigma_k h xi_k / eps` (the midpoint
/// variant averages old and new xi), then the deterministic flows.
/// epsilon = 0 dispatches to the plain splitting step, bit for bit.
pub fn step_ap(
    model: &dyn Model,
    h: f64,
    cfg: &ApConfig,
    state: &mut MultiscaleState,
    dw: &[f64],
) -> Result<()> {
    if cfg.epsilon < 0.0 {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    if dw.len() != model.num_noises() || state.xi.len() != model.num_noises() {
        return Err(Error::Dimension {
            expected: model.num_noises(),
            got: dw.len().min(state.xi.len()),
        });
    }
    if cfg.epsilon == 0.0 {
        return step_splitting(model, h, dw, &mut state.y);
    }
    let eps = cfg.epsilon;
    let mut flow_times = vec![0.0; dw.len()];
    for (k, w) in dw.iter().enumerate() {
        let xi_new = ou_update(state.xi[k], h, eps, *w, cfg.ou_variant);
        flow_times[k] = match cfg.ou_variant {
            OuVariant::ImplicitEuler => h * xi_new / eps,
            OuVariant::Midpoint => h * (state.xi[k] + xi_new) / (2.0 * eps),
        };
        state.xi[k] = xi_new;
    }
    for (k, t) in flow_times.iter().enumerate() {
        let sigma = model.stoch_parts()[k].sigma;
        model.exact_flow(FlowPartId::stochastic(k), sigma * t, &mut state.y)?;
    }
    for k in 0..model.det_parts().len() {
        model.exact_flow(FlowPartId::deterministic(k), h, &mut state.y)?;
    }
    Ok(())
}

/// Drives the AP step over `n_steps` steps of size `t_end / n_steps`,
/// recording like [`crate::integrators::integrate`].
pub fn integrate_ap(
    model: &dyn Model,
    cfg: &ApConfig,
    y0: &[f64],
    t_end: f64,
    n_steps: usize,
    path: &BrownianPath,
    record_stride: usize,
) -> Result<Trajectory> {
    if cfg.epsilon == 0.0 {
        return crate::integrators::integrate(
            SchemeId::Splitting,
            model,
            y0,
            t_end,
            n_steps,
            path,
            record_stride,
        );
    }
    if n_steps == 0 || record_stride == 0 || !n_steps.is_multiple_of(record_stride) {
        return Err(Error::domain(format!(
            "record stride {record_stride} must divide the step count {n_steps}"
        )));
    }
    if path.n_fine < n_steps || path.m != model.num_noises() {
        return Err(Error::domain("path does not match the requested run"));
    }
    let h = t_end / n_steps as f64;
    if (path.h_fine - h).abs() > 1e-12 * h.max(1.0) {
        return Err(Error::domain(format!(
            "path step {} does not match T/N = {h}",
            path.h_fine
        )));
    }
    let mut state = MultiscaleState::new(y0, model.num_noises());
    let mut traj = Trajectory {
        times: vec![],
        states: vec![],
        invariant_names: model.invariants(y0).into_iter().map(|(n, _)| n).collect(),
        invariants: vec![vec![]; model.casimirs().len() + 1],
    };
    let record = |t: f64, y: &[f64], traj: &mut Trajectory| {
        traj.times.push(t);
        traj.states.push(y.to_vec());
        for (j, (_, v)) in model.invariants(y).into_iter().enumerate() {
            traj.invariants[j].push(v);
        }
    };
    record(0.0, &state.y, &mut traj);
    let mut dw = vec![0.0; model.num_noises()];
    for n in 0..n_steps {
        for (k, w) in dw.iter_mut().enumerate() {
            *w = path.increment(k, n);
        }
        step_ap(model, h, cfg, &mut state, &dw).map_err(|e| e.at_step(n))?;
        if (n + 1) % record_stride == 0 {
            record((n + 1) as f64 * h, &state.y, &mut traj);
        }
    }
    Ok(traj)
}

/// Self-consistent reference for the multiscale system at fixed epsilon:
/// the AP step applied at a fine step resolving the OU time scale.
/// Refuses to run unless `h_fine <= eps^2 / 10`.
pub fn integrate_multiscale_reference(
    model: &dyn Model,
    cfg: &ApConfig,
    y0: &[f64],
    t_end: f64,
    n_fine: usize,
    path: &BrownianPath,
    record_stride: usize,
) -> Result<Trajectory> {
    if n_fine == 0 {
        return Err(Error::domain("n_fine must be positive"));
    }
    let h_fine = t_end / n_fine as f64;
    let bound = cfg.epsilon * cfg.epsilon / 10.0;
    if cfg.epsilon > 0.0 && h_fine > bound {
        return Err(Error::domain(format!(
            "reference step {h_fine} does not resolve the OU scale (need <= {bound})"
        )));
    }
    integrate_ap(model, cfg, y0, t_end, n_fine, path, record_stride)
}
