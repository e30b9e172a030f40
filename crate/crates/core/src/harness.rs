//! Experiment drivers: strong/weak convergence studies, invariant-drift
//! runs, asymptotic-preserving sweeps and log-log rate fitting.
//!
//! Every sample draws its randomness from a seed derived from
//! `(master seed, sample index)`, and results are aggregated in sample
//! order, so reports are bit-identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{integrate, SchemeId, Trajectory};
use crate::linalg::norm2;
use crate::models::Model;
use crate::multiscale::{integrate_ap, ApConfig};
use crate::noise::{coarsen, derive_sample_seed, sample_path};

/// Test functions for weak-error studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiId {
    /// sum_i sin(2 pi y_i)
    SumSines,
    /// Constant 1 (weak error identically zero; sanity control).
    Constant,
}

impl PhiId {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            PhiId::SumSines => y.iter().map(|v| (std::f64::consts::TAU * v).sin()).sum(),
            PhiId::Constant => 1.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PhiId::SumSines => "sum-sines",
            PhiId::Constant => "constant",
        }
    }

    pub fn parse(name: &str) -> Result<PhiId> {
        match name {
            "sum-sines" => Ok(PhiId::SumSines),
            "constant" => Ok(PhiId::Constant),
            other => Err(Error::domain(format!("unknown test function '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    Strong,
    Weak,
}

impl ErrorMode {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorMode::Strong => "strong",
            ErrorMode::Weak => "weak",
        }
    }
}

/// Whether weak errors couple the coarse runs to the reference through a
/// shared path (variance reduction) or use independent samples per level
/// (the plain definition of weak error; the default).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakCoupling {
    Independent,
    Coupled,
}

pub struct ConvergenceConfig<'a> {
    pub model: &'a dyn Model,
    pub scheme: SchemeId,
    pub y0: Vec<f64>,
    pub t_end: f64,
    /// Step sizes to measure, each an integer multiple of `h_ref` on a
    /// dyadic grid.
    pub h_list: Vec<f64>,
    pub h_ref: f64,
    pub samples: usize,
    pub seed: u64,
    pub mode: ErrorMode,
    pub phi: PhiId,
    pub coupling: WeakCoupling,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ErrorPoint {
    pub h: f64,
    pub error: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Per-step-size errors with Monte Carlo standard errors and the fitted
/// log-log rate over the points clearing the noise floor.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub model: String,
    pub scheme: String,
    pub mode: String,
    pub samples: usize,
    pub failed_samples: usize,
    pub entries: Vec<ErrorPoint>,
    /// Least-squares fit on points with error > 3 x std_error; `None`
    /// when fewer than two points clear the floor.
    pub fit: Option<RateFit>,
}

/// Ordinary least squares on (ln h, ln error).
pub fn fit_rate(h_list: &[f64], errors: &[f64]) -> Result<RateFit> {
    if h_list.len() != errors.len() {
        return Err(Error::Dimension {
            expected: h_list.len(),
            got: errors.len(),
        });
    }
    if h_list.len() < 2 {
        return Err(Error::domain("rate fit needs at least two points"));
    }
    if h_list.iter().chain(errors).any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::domain("rate fit needs positive step sizes and errors"));
    }
    let xs: Vec<f64> = h_list.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("rate fit needs distinct step sizes"));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fit over the entries clearing the noise floor (error > 3 x std_error).
pub fn fit_above_noise_floor(entries: &[ErrorPoint]) -> Option<RateFit> {
    let kept: Vec<&ErrorPoint> = entries
        .iter()
        .filter(|e| e.error > 3.0 * e.std_error && e.error > 0.0)
        .collect();
    if kept.len() < 2 {
        return None;
    }
    let hs: Vec<f64> = kept.iter().map(|e| e.h).collect();
    let es: Vec<f64> = kept.iter().map(|e| e.error).collect();
    fit_rate(&hs, &es).ok()
}

/// Expands `2^-a .. 2^-b` (inclusive, descending step sizes).
pub fn dyadic_range(a: u32, b: u32) -> Vec<f64> {
    let (lo, hi) = (a.min(b), a.max(b));
    (lo..=hi).map(|k| 2f64.powi(-(k as i32))).collect()
}

fn integer_ratio(big: f64, small: f64) -> Result<usize> {
    let ratio = big / small;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * rounded {
        return Err(Error::domain(format!(
            "{small} does not divide {big} evenly"
        )));
    }
    Ok(rounded as usize)
}

// workers = 0 lets rayon size the pool from the machine; results do not
// depend on the choice.
fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool")
        .install(f)
}

fn validate(cfg: &ConvergenceConfig) -> Result<(usize, Vec<usize>)> {
    if cfg.samples < 2 {
        return Err(Error::domain("need at least two Monte Carlo samples"));
    }
    if cfg.t_end.is_nan() || cfg.t_end <= 0.0 || cfg.h_ref.is_nan() || cfg.h_ref <= 0.0 {
        return Err(Error::domain("T and h_ref must be positive"));
    }
    if cfg.h_list.is_empty() {
        return Err(Error::domain("empty step-size list"));
    }
    let n_ref = integer_ratio(cfg.t_end, cfg.h_ref)?;
    let mut factors = Vec::with_capacity(cfg.h_list.len());
    for &h in &cfg.h_list {
        if h < cfg.h_ref {
            return Err(Error::domain(format!("h = {h} is finer than h_ref")));
        }
        let factor = integer_ratio(h, cfg.h_ref)?;
        if n_ref % factor != 0 {
            return Err(Error::domain(format!(
                "h = {h} does not land on the reference grid ({factor} does not divide {n_ref})"
            )));
        }
        factors.push(factor);
    }
    Ok((n_ref, factors))
}

/// Tallies per-sample outcomes, enforcing the <= 1% failure budget.
fn collect_samples<T>(
    results: Vec<std::result::Result<T, Error>>,
    samples: usize,
) -> Result<(Vec<T>, usize)> {
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = 0usize;
    let mut last: Option<Error> = None;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed += 1;
                last = Some(e);
            }
        }
    }
    if failed * 100 > samples {
        let detail = last.map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::domain(format!(
            "{failed}/{samples} samples failed (> 1%): {detail}"
        )));
    }
    Ok((ok, failed))
}

/// Strong error: each sample couples the scheme at every h in `h_list`
/// to the same scheme at `h_ref` through one shared fine path;
/// `error(h) = sqrt(mean_s sup_n |y_ref(n h) - y_h^[n]|^2)` with the sup
/// over the coarse grid.
pub fn strong_error_experiment(cfg: &ConvergenceConfig) -> Result<ErrorReport> {
    let (n_ref, factors) = validate(cfg)?;
    let min_factor = *factors.iter().min().expect("nonempty");
    // Record the reference on the densest coarse grid; every other coarse
    // grid must be a dyadic sub-grid of it.
    for f in &factors {
        if !f.is_multiple_of(min_factor) {
            return Err(Error::domain("step-size list is not nested (dyadic grid expected)"));
        }
    }
    let m = cfg.model.num_noises();
    let per_sample = |s: usize| -> Result<Vec<f64>> {
        let seed = derive_sample_seed(cfg.seed, s as u64);
        let path = sample_path(seed, m, n_ref, cfg.t_end / n_ref as f64)?;
        let reference = integrate(
            cfg.scheme,
            cfg.model,
            &cfg.y0,
            cfg.t_end,
            n_ref,
            &path,
            min_factor,
        )?;
        let mut sups = Vec::with_capacity(factors.len());
        for &factor in &factors {
            let coarse_path = coarsen(&path, factor)?;
            let n_h = n_ref / factor;
            let run = integrate(cfg.scheme, cfg.model, &cfg.y0, cfg.t_end, n_h, &coarse_path, 1)?;
            let stride = factor / min_factor;
            let mut sup = 0.0f64;
            for (n, state) in run.states.iter().enumerate() {
                let ref_state = &reference.states[n * stride];
                let d2: f64 = state
                    .iter()
                    .zip(ref_state)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                sup = sup.max(d2);
            }
            sups.push(sup);
        }
        Ok(sups)
    };
    let results: Vec<Result<Vec<f64>>> =
        with_pool(cfg.workers, || (0..cfg.samples).into_par_iter().map(per_sample).collect());
    let (ok, failed) = collect_samples(results, cfg.samples)?;
    let kept = ok.len().max(1) as f64;
    let entries = factors
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let mean = ok.iter().map(|s| s[i]).sum::<f64>() / kept;
            let var = ok.iter().map(|s| (s[i] - mean) * (s[i] - mean)).sum::<f64>()
                / (kept - 1.0).max(1.0);
            let error = mean.sqrt();
            let se_mean = (var / kept).sqrt();
            let std_error = if error > 0.0 { se_mean / (2.0 * error) } else { 0.0 };
            ErrorPoint {
                h: cfg.h_list[i],
                error,
                std_error,
            }
        })
        .collect::<Vec<_>>();
    let fit = fit_above_noise_floor(&entries);
    Ok(ErrorReport {
        model: cfg.model.name().to_string(),
        scheme: cfg.scheme.label().to_string(),
        mode: ErrorMode::Strong.label().to_string(),
        samples: cfg.samples,
        failed_samples: failed,
        entries,
        fit,
    })
}

/// Weak error at final time: `|E phi(y_h) - E phi(y_ref)|` with the
/// reference computed by the same scheme at `h_ref`. Independent samples
/// per level by default; the coupled variant shares paths between each
/// level and the reference, which shrinks the Monte Carlo noise floor.
pub fn weak_error_experiment(cfg: &ConvergenceConfig) -> Result<ErrorReport> {
    let (n_ref, factors) = validate(cfg)?;
    let m = cfg.model.num_noises();
    let entries = match cfg.coupling {
        WeakCoupling::Coupled => {
            let per_sample = |s: usize| -> Result<Vec<f64>> {
                let seed = derive_sample_seed(cfg.seed, s as u64);
                let path = sample_path(seed, m, n_ref, cfg.t_end / n_ref as f64)?;
                let reference =
                    integrate(cfg.scheme, cfg.model, &cfg.y0, cfg.t_end, n_ref, &path, n_ref)?;
                let phi_ref = cfg.phi.eval(reference.last_state());
                factors
                    .iter()
                    .map(|&factor| {
                        let coarse = coarsen(&path, factor)?;
                        let n_h = n_ref / factor;
                        let run = integrate(
                            cfg.scheme, cfg.model, &cfg.y0, cfg.t_end, n_h, &coarse, n_h,
                        )?;
                        Ok(cfg.phi.eval(run.last_state()) - phi_ref)
                    })
                    .collect()
            };
            let results: Vec<Result<Vec<f64>>> = with_pool(cfg.workers, || {
                (0..cfg.samples).into_par_iter().map(per_sample).collect()
            });
            let (ok, failed) = collect_samples(results, cfg.samples)?;
            let kept = ok.len().max(1) as f64;
            let entries = factors
                .iter()
                .enumerate()
                .map(|(i, _)| {
                    let mean = ok.iter().map(|d| d[i]).sum::<f64>() / kept;
                    let var = ok.iter().map(|d| (d[i] - mean) * (d[i] - mean)).sum::<f64>()
                        / (kept - 1.0).max(1.0);
                    ErrorPoint {
                        h: cfg.h_list[i],
                        error: mean.abs(),
                        std_error: (var / kept).sqrt(),
                    }
                })
                .collect::<Vec<_>>();
            return finish_weak(cfg, entries, failed);
        }
        WeakCoupling::Independent => {
            // One extra level for the reference, each with fresh samples.
            let level_mean = |level: usize, n_steps: usize, h: f64| -> Result<(f64, f64)> {
                let level_seed = derive_sample_seed(cfg.seed ^ WEAK_LEVEL_TAG, level as u64);
                let per_sample = |s: usize| -> Result<f64> {
                    let seed = derive_sample_seed(level_seed, s as u64);
                    let path = sample_path(seed, m, n_steps, h)?;
                    let run =
                        integrate(cfg.scheme, cfg.model, &cfg.y0, cfg.t_end, n_steps, &path, n_steps)?;
                    Ok(cfg.phi.eval(run.last_state()))
                };
                let results: Vec<Result<f64>> = with_pool(cfg.workers, || {
                    (0..cfg.samples).into_par_iter().map(per_sample).collect()
                });
                let (ok, _failed) = collect_samples(results, cfg.samples)?;
                let kept = ok.len().max(1) as f64;
                let mean = ok.iter().sum::<f64>() / kept;
                let var =
                    ok.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (kept - 1.0).max(1.0);
                Ok((mean, var / kept))
            };
            let (ref_mean, ref_var) =
                level_mean(factors.len(), n_ref, cfg.t_end / n_ref as f64)?;
            let mut entries = Vec::with_capacity(factors.len());
            for (i, &factor) in factors.iter().enumerate() {
                let n_h = n_ref / factor;
                let (mean, var) = level_mean(i, n_h, cfg.t_end / n_h as f64)?;
                entries.push(ErrorPoint {
                    h: cfg.h_list[i],
                    error: (mean - ref_mean).abs(),
                    std_error: (var + ref_var).sqrt(),
                });
            }
            entries
        }
    };
    finish_weak(cfg, entries, 0)
}

// Mixed into the master seed so independent weak levels never reuse the
// coupled-experiment streams.
const WEAK_LEVEL_TAG: u64 = 0x57ea_4c0d_e500_0001;

fn finish_weak(
    cfg: &ConvergenceConfig,
    entries: Vec<ErrorPoint>,
    failed: usize,
) -> Result<ErrorReport> {
    let fit = fit_above_noise_floor(&entries);
    Ok(ErrorReport {
        model: cfg.model.name().to_string(),
        scheme: cfg.scheme.label().to_string(),
        mode: ErrorMode::Weak.label().to_string(),
        samples: cfg.samples,
        failed_samples: failed,
        entries,
        fit,
    })
}

/// Dispatches on `cfg.mode`.
pub fn convergence_experiment(cfg: &ConvergenceConfig) -> Result<ErrorReport> {
    match cfg.mode {
        ErrorMode::Strong => strong_error_experiment(cfg),
        ErrorMode::Weak => weak_error_experiment(cfg),
    }
}

/// One trajectory with its recorded invariant series and max drifts.
pub struct InvariantRun {
    pub trajectory: Trajectory,
    /// (name, max_n |I(y^[n]) - I(y^[0])|), Hamiltonian first.
    pub max_drifts: Vec<(String, f64)>,
}

pub fn invariant_drift_experiment(
    model: &dyn Model,
    scheme: SchemeId,
    y0: &[f64],
    t_end: f64,
    h: f64,
    seed: u64,
) -> Result<InvariantRun> {
    let n = integer_ratio(t_end, h)?;
    let path = sample_path(seed, model.num_noises(), n, t_end / n as f64)?;
    let trajectory = integrate(scheme, model, y0, t_end, n, &path, 1)?;
    let max_drifts = trajectory
        .invariant_names
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), trajectory.max_invariant_drift(j)))
        .collect();
    Ok(InvariantRun {
        trajectory,
        max_drifts,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ApPoint {
    pub epsilon: f64,
    pub h: f64,
    pub error: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone)]
pub struct ApReport {
    pub entries: Vec<ApPoint>,
}

/// Path-wise asymptotic-preserving limit test: with the same increments
/// and fixed h, reports `|y^{eps,[N]} - y^{[N]}|` per epsilon, averaged
/// over samples. An epsilon of zero dispatches to the splitting scheme
/// and yields exactly zero.
#[allow(clippy::too_many_arguments)]
pub fn ap_sweep(
    model: &dyn Model,
    y0: &[f64],
    h: f64,
    t_end: f64,
    eps_list: &[f64],
    seed: u64,
    samples: usize,
    variant: ApConfig,
    workers: usize,
) -> Result<ApReport> {
    let n = integer_ratio(t_end, h)?;
    let m = model.num_noises();
    let per_sample = |s: usize| -> Result<Vec<f64>> {
        let path = sample_path(derive_sample_seed(seed, s as u64), m, n, t_end / n as f64)?;
        let base = integrate(SchemeId::Splitting, model, y0, t_end, n, &path, n)?;
        let base_end = base.last_state();
        eps_list
            .iter()
            .map(|&eps| {
                let cfg = ApConfig {
                    epsilon: eps,
                    ou_variant: variant.ou_variant,
                };
                let run = integrate_ap(model, &cfg, y0, t_end, n, &path, n)?;
                Ok(norm2(&crate::linalg::sub(run.last_state(), base_end)))
            })
            .collect()
    };
    let results: Vec<Result<Vec<f64>>> =
        with_pool(workers, || (0..samples).into_par_iter().map(per_sample).collect());
    let (ok, _failed) = collect_samples(results, samples)?;
    let kept = ok.len().max(1) as f64;
    let entries = eps_list
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let mean = ok.iter().map(|d| d[i]).sum::<f64>() / kept;
            let var = ok.iter().map(|d| (d[i] - mean) * (d[i] - mean)).sum::<f64>()
                / (kept - 1.0).max(1.0);
            ApPoint {
                epsilon: eps,
                h,
                error: mean,
                std_error: (var / kept).sqrt(),
            }
        })
        .collect();
    Ok(ApReport { entries })
}

/// Weak-error-vs-h curves of the AP scheme at fixed epsilon (reference:
/// the AP scheme itself at h_ref, coupled through shared paths).
#[allow(clippy::too_many_arguments)]
pub fn ap_weak_experiment(
    model: &dyn Model,
    y0: &[f64],
    t_end: f64,
    epsilon: f64,
    h_list: &[f64],
    h_ref: f64,
    samples: usize,
    seed: u64,
    phi: PhiId,
    variant: ApConfig,
    workers: usize,
) -> Result<ApReport> {
    let n_ref = integer_ratio(t_end, h_ref)?;
    let factors: Vec<usize> = h_list
        .iter()
        .map(|&h| integer_ratio(h, h_ref))
        .collect::<Result<_>>()?;
    let m = model.num_noises();
    let cfg = ApConfig {
        epsilon,
        ou_variant: variant.ou_variant,
    };
    let per_sample = |s: usize| -> Result<Vec<f64>> {
        let path = sample_path(
            derive_sample_seed(seed, s as u64),
            m,
            n_ref,
            t_end / n_ref as f64,
        )?;
        let reference = integrate_ap(model, &cfg, y0, t_end, n_ref, &path, n_ref)?;
        let phi_ref = phi.eval(reference.last_state());
        factors
            .iter()
            .map(|&factor| {
                let coarse = coarsen(&path, factor)?;
                let run = integrate_ap(model, &cfg, y0, t_end, n_ref / factor, &coarse, n_ref / factor)?;
                Ok(phi.eval(run.last_state()) - phi_ref)
            })
            .collect()
    };
    let results: Vec<Result<Vec<f64>>> =
        with_pool(workers, || (0..samples).into_par_iter().map(per_sample).collect());
    let (ok, _failed) = collect_samples(results, samples)?;
    let kept = ok.len().max(1) as f64;
    let entries = factors
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let mean = ok.iter().map(|d| d[i]).sum::<f64>() / kept;
            let var = ok.iter().map(|d| (d[i] - mean) * (d[i] - mean)).sum::<f64>()
                / (kept - 1.0).max(1.0);
            ApPoint {
                epsilon,
                h: h_list[i],
                error: mean.abs(),
                std_error: (var / kept).sqrt(),
            }
        })
        .collect();
    Ok(ApReport { entries })
}

// CSV emission. Floats use the shortest representation that round-trips
// to the same double.

pub fn convergence_csv(report: &ErrorReport) -> String {
    let mut out = String::from("model,scheme,mode,h,samples,error,std_error\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            report.model, report.scheme, report.mode, e.h, report.samples, e.error, e.std_error
        ));
    }
    out
}

pub fn invariants_csv(run: &InvariantRun) -> String {
    let mut out = String::from("t");
    for name in &run.trajectory.invariant_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, t) in run.trajectory.times.iter().enumerate() {
        out.push_str(&format!("{t}"));
        for series in &run.trajectory.invariants {
            out.push_str(&format!(",{}", series[i]));
        }
        out.push('\n');
    }
    out
}

pub fn ap_csv(report: &ApReport) -> String {
    let mut out = String::from("epsilon,h,error,std_error\n");
    for e in &report.entries {
        out.push_str(&format!("{},{},{},{}\n", e.epsilon, e.h, e.error, e.std_error));
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.states.first().map(|s| s.len()).unwrap_or(0);
    let mut out = String::from("t");
    for i in 0..dim {
        out.push_str(&format!(",y{}", i + 1));
    }
    out.push('\n');
    for (t, state) in traj.times.iter().zip(&traj.states) {
        out.push_str(&format!("{t}"));
        for v in state {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
