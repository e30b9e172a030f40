//! One-step maps for the five schemes and the trajectory driver.
//!
//! Composition formulas read right-to-left, so the rightmost factor is
//! applied first: the plain splitting step runs the stochastic flows in
//! index order followed by the deterministic flows in index order.

use crate::error::{Error, Result};
use crate::models::{FlowPartId, Model};
use crate::noise::{truncate_increment, BrownianPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeId {
    /// Lie-Trotter splitting: stochastic flows first, then deterministic.
    Splitting,
    /// Deterministic flows first, then stochastic.
    SplittingReversed,
    /// Strang deterministic halves around a gamma-ordered stochastic
    /// sweep; weak order 2.
    Weak2,
    /// Euler-Maruyama on the Ito formulation (baseline, not a Poisson
    /// integrator).
    EulerMaruyama,
    /// Implicit midpoint with truncated noise (baseline; preserves
    /// quadratic invariants up to the solver tolerance).
    Midpoint,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::Splitting,
        SchemeId::SplittingReversed,
        SchemeId::Weak2,
        SchemeId::EulerMaruyama,
        SchemeId::Midpoint,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SchemeId::Splitting => "splitting",
            SchemeId::SplittingReversed => "splitting-reversed",
            SchemeId::Weak2 => "weak2",
            SchemeId::EulerMaruyama => "em",
            SchemeId::Midpoint => "midpoint",
        }
    }

    pub fn parse(name: &str) -> Result<SchemeId> {
        match name {
            "splitting" => Ok(SchemeId::Splitting),
            "splitting-reversed" | "reversed" => Ok(SchemeId::SplittingReversed),
            "weak2" => Ok(SchemeId::Weak2),
            "em" | "euler-maruyama" => Ok(SchemeId::EulerMaruyama),
            "midpoint" => Ok(SchemeId::Midpoint),
            other => Err(Error::domain(format!("unknown scheme '{other}'"))),
        }
    }

    /// Preserves Casimirs and the Poisson-map property exactly.
    pub fn is_poisson_integrator(&self) -> bool {
        matches!(
            self,
            SchemeId::Splitting | SchemeId::SplittingReversed | SchemeId::Weak2
        )
    }
}

/// Fixed-point solver settings for the implicit midpoint baseline.
#[derive(Debug, Clone, Copy)]
pub struct MidpointConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MidpointConfig {
    fn default() -> Self {
        MidpointConfig {
            tol: 1e-12,
            max_iter: 100,
        }
    }
}

fn check_noise_count(model: &dyn Model, dw: &[f64]) -> Result<()> {
    if dw.len() != model.num_noises() {
        return Err(Error::Dimension {
            expected: model.num_noises(),
            got: dw.len(),
        });
    }
    Ok(())
}

fn stochastic_sweep(model: &dyn Model, dw: &[f64], y: &mut [f64], ascending: bool) -> Result<()> {
    let m = model.num_noises();
    let order: Box<dyn Iterator<Item = usize>> = if ascending {
        Box::new(0..m)
    } else {
        Box::new((0..m).rev())
    };
    for k in order {
        let sigma = model.stoch_parts()[k].sigma;
        model.exact_flow(FlowPartId::stochastic(k), sigma * dw[k], y)?;
    }
    Ok(())
}

fn deterministic_sweep(model: &dyn Model, h: f64, y: &mut [f64]) -> Result<()> {
    for k in 0..model.det_parts().len() {
        model.exact_flow(FlowPartId::deterministic(k), h, y)?;
    }
    Ok(())
}

/// Lie-Trotter stochastic Poisson integrator: stochastic flows
/// `Hhat_1..Hhat_m` with flow-times `sigma_k dW_k`, then deterministic
/// flows `H_1..H_p` with flow-time `h`.
pub fn step_splitting(model: &dyn Model, h: f64, dw: &[f64], y: &mut [f64]) -> Result<()> {
    check_noise_count(model, dw)?;
    stochastic_sweep(model, dw, y, true)?;
    deterministic_sweep(model, h, y)
}

/// As [`step_splitting`] with the deterministic sweep applied first.
pub fn step_splitting_reversed(
    model: &dyn Model,
    h: f64,
    dw: &[f64],
    y: &mut [f64],
) -> Result<()> {
    check_noise_count(model, dw)?;
    deterministic_sweep(model, h, y)?;
    stochastic_sweep(model, dw, y, true)
}

/// Palindromic Strang sweep over the deterministic split with total time
/// h/2: quarter steps up to part p, a half step of part p, quarter steps
/// back down.
fn strang_half(model: &dyn Model, h: f64, y: &mut [f64]) -> Result<()> {
    let p = model.det_parts().len();
    if p == 1 {
        return model.exact_flow(FlowPartId::deterministic(0), 0.5 * h, y);
    }
    for k in 0..p - 1 {
        model.exact_flow(FlowPartId::deterministic(k), 0.25 * h, y)?;
    }
    model.exact_flow(FlowPartId::deterministic(p - 1), 0.5 * h, y)?;
    for k in (0..p - 1).rev() {
        model.exact_flow(FlowPartId::deterministic(k), 0.25 * h, y)?;
    }
    Ok(())
}

/// Weak order-2 scheme: Strang deterministic half, stochastic sweep in
/// ascending order for gamma = +1 and descending for gamma = -1, Strang
/// deterministic half.
pub fn step_weak2(
    model: &dyn Model,
    h: f64,
    dw: &[f64],
    gamma: f64,
    y: &mut [f64],
) -> Result<()> {
    if gamma != 1.0 && gamma != -1.0 {
        return Err(Error::domain(format!("gamma must be +1 or -1, got {gamma}")));
    }
    check_noise_count(model, dw)?;
    strang_half(model, h, y)?;
    stochastic_sweep(model, dw, y, gamma > 0.0)?;
    strang_half(model, h, y)
}

/// Euler-Maruyama on the Ito formulation:
/// `y + h drift_ito(y) + sum_k g_k(y) dW_k`.
pub fn step_euler_maruyama(model: &dyn Model, h: f64, dw: &[f64], y: &mut [f64]) -> Result<()> {
    check_noise_count(model, dw)?;
    let drift = model.drift_ito(y)?;
    let mut next = y.to_vec();
    for (n, d) in next.iter_mut().zip(&drift) {
        *n += h * d;
    }
    for (k, w) in dw.iter().enumerate() {
        let g = model.diffusion(k, y)?;
        for (n, gi) in next.iter_mut().zip(&g) {
            *n += gi * w;
        }
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("Euler-Maruyama step output"));
    }
    y.copy_from_slice(&next);
    Ok(())
}

/// Implicit midpoint on the Stratonovich formulation with pre-truncated
/// increments, solved by fixed-point iteration from `y' = y`. Failure to
/// converge within `cfg.max_iter` is an error, not a warning.
pub fn step_midpoint(
    model: &dyn Model,
    h: f64,
    dw_truncated: &[f64],
    cfg: &MidpointConfig,
    y: &mut [f64],
) -> Result<()> {
    check_noise_count(model, dw_truncated)?;
    let d = y.len();
    let mut next = y.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let mid: Vec<f64> = (0..d).map(|i| 0.5 * (y[i] + next[i])).collect();
        let mut rhs = y.to_vec();
        for (r, f) in rhs.iter_mut().zip(model.drift_stratonovich(&mid)) {
            *r += h * f;
        }
        for (k, w) in dw_truncated.iter().enumerate() {
            let sigma = model.stoch_parts()[k].sigma;
            let g = model.structure().eval(&mid).matvec(&model.stoch_parts()[k].part.gradient(&mid));
            for (r, gi) in rhs.iter_mut().zip(&g) {
                *r += sigma * gi * w;
            }
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("midpoint iterate"));
        }
        residual = rhs
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        next = rhs;
        if residual <= cfg.tol {
            y.copy_from_slice(&next);
            return Ok(());
        }
    }
    Err(Error::SolverFailure {
        iterations: cfg.max_iter,
        residual,
    })
}

/// Recorded states and invariant values of one trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub invariant_names: Vec<String>,
    /// invariants[j] = values of invariant j at the recorded times.
    pub invariants: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory records y0")
    }

    /// max_n |I(y^[n]) - I(y^[0])| for recorded invariant `j`.
    pub fn max_invariant_drift(&self, j: usize) -> f64 {
        let series = &self.invariants[j];
        series.iter().map(|v| (v - series[0]).abs()).fold(0.0, f64::max)
    }
}

/// Iterates the one-step map for `scheme` over `n_steps` steps of size
/// `t_end / n_steps`, consuming one path increment per noise per step
/// (plus the Rademacher stream for the weak order-2 scheme). Records
/// every `record_stride` steps, including the initial state.
/// Deterministic given `(path.seed, scheme, model, n_steps)`.
pub fn integrate(
    scheme: SchemeId,
    model: &dyn Model,
    y0: &[f64],
    t_end: f64,
    n_steps: usize,
    path: &BrownianPath,
    record_stride: usize,
) -> Result<Trajectory> {
    if n_steps == 0 || record_stride == 0 || !n_steps.is_multiple_of(record_stride) {
        return Err(Error::domain(format!(
            "record stride {record_stride} must divide the step count {n_steps}"
        )));
    }
    if path.n_fine < n_steps {
        return Err(Error::domain(format!(
            "path provides {} increments, need {n_steps}",
            path.n_fine
        )));
    }
    if path.m != model.num_noises() {
        return Err(Error::Dimension {
            expected: model.num_noises(),
            got: path.m,
        });
    }
    let h = t_end / n_steps as f64;
    if (path.h_fine - h).abs() > 1e-12 * h.max(1.0) {
        return Err(Error::domain(format!(
            "path step {} does not match T/N = {h}",
            path.h_fine
        )));
    }
    let midpoint_cfg = MidpointConfig::default();
    let m = model.num_noises();
    let mut y = y0.to_vec();
    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps / record_stride + 1),
        states: Vec::with_capacity(n_steps / record_stride + 1),
        invariant_names: model.invariants(y0).into_iter().map(|(n, _)| n).collect(),
        invariants: vec![Vec::with_capacity(n_steps / record_stride + 1); model.casimirs().len() + 1],
    };
    let record = |t: f64, y: &[f64], traj: &mut Trajectory| {
        traj.times.push(t);
        traj.states.push(y.to_vec());
        for (j, (_, v)) in model.invariants(y).into_iter().enumerate() {
            traj.invariants[j].push(v);
        }
    };
    record(0.0, &y, &mut traj);
    let mut dw = vec![0.0; m];
    for n in 0..n_steps {
        for (k, w) in dw.iter_mut().enumerate() {
            *w = path.increment(k, n);
        }
        let stepped = match scheme {
            SchemeId::Splitting => step_splitting(model, h, &dw, &mut y),
            SchemeId::SplittingReversed => step_splitting_reversed(model, h, &dw, &mut y),
            SchemeId::Weak2 => step_weak2(model, h, &dw, path.gamma(n), &mut y),
            SchemeId::EulerMaruyama => step_euler_maruyama(model, h, &dw, &mut y),
            SchemeId::Midpoint => (|| {
                let sqrt_h = h.sqrt();
                let mut trunc = vec![0.0; m];
                for (tk, w) in trunc.iter_mut().zip(&dw) {
                    *tk = truncate_increment(w / sqrt_h, h)?;
                }
                step_midpoint(model, h, &trunc, &midpoint_cfg, &mut y)
            })(),
        };
        stepped.map_err(|e| e.at_step(n))?;
        if (n + 1) % record_stride == 0 {
            record((n + 1) as f64 * h, &y, &mut traj);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, sub};
    use crate::models::{MaxwellBloch, RigidBody, SineEuler};
    use crate::noise::sample_path;

    fn rb() -> RigidBody {
        RigidBody::new([2.0, 1.0, 2.0 / 3.0], [1.0, 2.0, 3.0], [1.0; 3]).unwrap()
    }

    #[test]
    fn zero_noise_reduces_to_deterministic_composition() {
        let model = rb();
        let y0 = model.default_initial();
        let dw = [0.0; 3];
        let mut a = y0.clone();
        step_splitting(&model, 0.1, &dw, &mut a).unwrap();
        let mut b = y0.clone();
        deterministic_sweep(&model, 0.1, &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = y0.clone();
        step_splitting_reversed(&model, 0.1, &dw, &mut c).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn splitting_step_preserves_casimir() {
        let model = rb();
        let mut y = model.default_initial();
        let c0 = model.casimirs()[0].value(&y);
        step_splitting(&model, 0.3, &[0.4, -0.9, 0.2], &mut y).unwrap();
        assert!((model.casimirs()[0].value(&y) - c0).abs() <= 1e-14);
        step_splitting_reversed(&model, 0.3, &[0.1, 0.5, -0.7], &mut y).unwrap();
        assert!((model.casimirs()[0].value(&y) - c0).abs() <= 1e-14);
        step_weak2(&model, 0.3, &[0.4, -0.9, 0.2], -1.0, &mut y).unwrap();
        assert!((model.casimirs()[0].value(&y) - c0).abs() <= 1e-14);
    }

    #[test]
    fn mb_splitting_step_respects_growth_bound() {
        // sigma3 = 0: ||out|| <= (1+h) ||in||.
        let model = MaxwellBloch::new(1.0, 0.0);
        let h = 0.1;
        for s in 0..50 {
            let mut y = model.random_state(s);
            let n0 = norm2(&y);
            step_splitting(&model, h, &[0.8 - 0.03 * s as f64, 0.0], &mut y).unwrap();
            assert!(norm2(&y) <= (1.0 + h) * n0 * (1.0 + 1e-15));
        }
    }

    #[test]
    fn reversed_differs_from_plain_with_noise() {
        let model = rb();
        let y0 = model.default_initial();
        let dw = [0.3, -0.2, 0.5];
        let h = 0.1;
        let mut a = y0.clone();
        step_splitting(&model, h, &dw, &mut a).unwrap();
        let mut b = y0.clone();
        step_splitting_reversed(&model, h, &dw, &mut b).unwrap();
        let gap = norm2(&sub(&a, &b));
        // Non-commuting flows differ at O(h |dW|), and not by more.
        assert!(gap > 1e-4, "gap {gap}");
        assert!(gap < 0.5, "gap {gap}");
    }

    #[test]
    fn weak2_with_zero_noise_is_double_strang_independent_of_gamma() {
        let model = rb();
        let y0 = model.default_initial();
        let dw = [0.0; 3];
        let mut a = y0.clone();
        step_weak2(&model, 0.2, &dw, 1.0, &mut a).unwrap();
        let mut b = y0.clone();
        step_weak2(&model, 0.2, &dw, -1.0, &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = y0.clone();
        strang_half(&model, 0.2, &mut c).unwrap();
        strang_half(&model, 0.2, &mut c).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn weak2_gamma_is_irrelevant_for_single_noise() {
        let model = MaxwellBloch::new(1.0, 0.0);
        // sigma3 = 0 freezes the second stochastic flow, so m = 1 effectively.
        let y0 = model.default_initial();
        let dw = [0.7, 0.0];
        let mut a = y0.clone();
        step_weak2(&model, 0.05, &dw, 1.0, &mut a).unwrap();
        let mut b = y0;
        step_weak2(&model, 0.05, &dw, -1.0, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weak2_is_stochastic_sweep_between_strang_halves() {
        let model = MaxwellBloch::new(1.0, 0.0);
        let y0 = model.default_initial();
        let dw = [0.4, 0.0];
        let h = 0.1;
        let mut a = y0.clone();
        step_weak2(&model, h, &dw, 1.0, &mut a).unwrap();
        let mut b = y0;
        strang_half(&model, h, &mut b).unwrap();
        stochastic_sweep(&model, &dw, &mut b, true).unwrap();
        strang_half(&model, h, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weak2_rejects_bad_gamma() {
        let model = rb();
        let mut y = model.default_initial();
        assert!(step_weak2(&model, 0.1, &[0.0; 3], 0.5, &mut y).is_err());
    }

    #[test]
    fn euler_maruyama_identity_and_frozen_value() {
        let model = MaxwellBloch::new(1.0, 0.0);
        let mut y = vec![1.0, 2.0, 3.0];
        step_euler_maruyama(&model, 0.0, &[0.0, 0.0], &mut y).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
        // h = 0.1, dW = 0: y + 0.1 * ((2,3,-2) + (0,-1,-1.5)).
        step_euler_maruyama(&model, 0.1, &[0.0, 0.0], &mut y).unwrap();
        assert!((y[0] - 1.2).abs() < 1e-14);
        assert!((y[1] - 2.2).abs() < 1e-14);
        assert!((y[2] - 2.65).abs() < 1e-14);
    }

    #[test]
    fn euler_maruyama_does_not_preserve_casimir() {
        let model = rb();
        let mut y = model.default_initial();
        let c0 = model.casimirs()[0].value(&y);
        step_euler_maruyama(&model, 0.2, &[0.3, -0.4, 0.25], &mut y).unwrap();
        assert!((model.casimirs()[0].value(&y) - c0).abs() > 1e-4);
    }

    #[test]
    fn midpoint_with_zero_noise_and_step_fixes_the_state() {
        let model = rb();
        let mut y = model.default_initial();
        let y0 = y.clone();
        step_midpoint(&model, 0.0, &[0.0; 3], &MidpointConfig::default(), &mut y).unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn midpoint_preserves_quadratic_casimir_to_solver_tolerance() {
        let model = rb();
        let cfg = MidpointConfig::default();
        let mut y = model.default_initial();
        for k in 0..20 {
            let dw = [
                0.05 * (k as f64).sin(),
                -0.04 * (k as f64 * 1.7).cos(),
                0.03,
            ];
            let before = model.casimirs()[0].value(&y);
            step_midpoint(&model, 0.05, &dw, &cfg, &mut y).unwrap();
            let after = model.casimirs()[0].value(&y);
            assert!((after - before).abs() <= 10.0 * cfg.tol);
        }
    }

    #[test]
    fn trajectories_stay_inside_the_casimir_level_set() {
        // rb: |y|^2 <= C(y0); se: sum |w_k|^2 <= C1(w0), up to 1e-12.
        let model = rb();
        let y0 = model.default_initial();
        let c0 = model.casimirs()[0].value(&y0);
        let n = 200;
        let path = sample_path(15, 3, n, 20.0 / n as f64).unwrap();
        let traj = integrate(SchemeId::Splitting, &model, &y0, 20.0, n, &path, 1).unwrap();
        for state in &traj.states {
            let r2: f64 = state.iter().map(|v| v * v).sum();
            assert!(r2 <= c0 + 1e-12);
        }
        let se = SineEuler::new([1.0; 4]);
        let w0 = se.default_initial();
        let c1 = se.casimirs()[0].value(&w0);
        let n = 50;
        let path = sample_path(16, 4, n, 1.0 / n as f64).unwrap();
        let traj = integrate(SchemeId::SplittingReversed, &se, &w0, 1.0, n, &path, 1).unwrap();
        for state in &traj.states {
            let r2: f64 = state.iter().map(|v| v * v).sum();
            assert!(r2 <= c1 + 1e-12);
        }
    }

    #[test]
    fn one_step_maps_are_poisson_maps() {
        // Finite-difference residual D B(y) D^T - B(map(y)) for all three
        // structure-preserving schemes.
        use crate::geometry::check_poisson_map;
        let model = rb();
        let y0 = model.default_initial();
        let dw = [0.05, 0.06, 0.07];
        type StepMap = Box<dyn Fn(&[f64]) -> Vec<f64>>;
        let steps: [(&str, StepMap); 3] = [
            ("splitting", {
                let m = rb();
                Box::new(move |y: &[f64]| {
                    let mut out = y.to_vec();
                    step_splitting(&m, 0.1, &dw, &mut out).unwrap();
                    out
                })
            }),
            ("reversed", {
                let m = rb();
                Box::new(move |y: &[f64]| {
                    let mut out = y.to_vec();
                    step_splitting_reversed(&m, 0.1, &dw, &mut out).unwrap();
                    out
                })
            }),
            ("weak2", {
                let m = rb();
                Box::new(move |y: &[f64]| {
                    let mut out = y.to_vec();
                    step_weak2(&m, 0.1, &dw, -1.0, &mut out).unwrap();
                    out
                })
            }),
        ];
        for (label, map) in &steps {
            let res = check_poisson_map(map, model.structure(), &y0, 1e-5);
            assert!(res <= 1e-6, "{label}: residual {res:.3e}");
        }
    }

    #[test]
    fn midpoint_reports_solver_failure() {
        // Huge step size: the fixed-point map is not a contraction.
        let model = rb();
        let mut y = model.default_initial();
        let err = step_midpoint(&model, 50.0, &[3.0, -3.0, 3.0], &MidpointConfig::default(), &mut y);
        match err {
            Err(e) => assert!(matches!(
                e.root(),
                Error::SolverFailure { .. } | Error::NonFinite { .. }
            )),
            Ok(_) => panic!("expected solver failure"),
        }
    }

    #[test]
    fn integrate_records_and_conserves() {
        let model = rb();
        let n = 100;
        let path = sample_path(42, 3, n, 20.0 / n as f64).unwrap();
        let traj = integrate(
            SchemeId::Splitting,
            &model,
            &model.default_initial(),
            20.0,
            n,
            &path,
            10,
        )
        .unwrap();
        assert_eq!(traj.times.len(), 11);
        assert_eq!(traj.states.len(), 11);
        // Casimir is invariant index 1 (after H).
        assert!(traj.max_invariant_drift(1) <= 1e-12);
    }

    #[test]
    fn integrate_is_reproducible() {
        let model = SineEuler::new([1.0; 4]);
        let n = 50;
        let path = sample_path(7, 4, n, 1.0 / n as f64).unwrap();
        let a = integrate(SchemeId::Weak2, &model, &model.default_initial(), 1.0, n, &path, 1)
            .unwrap();
        let b = integrate(SchemeId::Weak2, &model, &model.default_initial(), 1.0, n, &path, 1)
            .unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn integrate_validates_inputs() {
        let model = rb();
        let path = sample_path(1, 3, 10, 0.1).unwrap();
        let y0 = model.default_initial();
        assert!(integrate(SchemeId::Splitting, &model, &y0, 1.0, 10, &path, 3).is_err());
        assert!(integrate(SchemeId::Splitting, &model, &y0, 1.0, 20, &path, 1).is_err());
        // Mismatched step size.
        assert!(integrate(SchemeId::Splitting, &model, &y0, 2.0, 10, &path, 1).is_err());
    }

    #[test]
    fn integrate_attaches_step_index_to_failures() {
        let model = rb();
        let n = 4;
        let path = sample_path(3, 3, n, 2.0).unwrap();
        // h = 2 > 1 makes the midpoint truncation threshold undefined.
        let err = integrate(
            SchemeId::Midpoint,
            &model,
            &model.default_initial(),
            8.0,
            n,
            &path,
            1,
        );
        match err {
            Err(Error::Step { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected step error, got {other:?}"),
        }
    }
}
