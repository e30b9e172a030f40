//! `slp`: command-line front end binding model presets and JSON configs
//! to the simulation and experiment drivers, emitting CSV plus a short
//! textual summary.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad flags, bad
//! config, divisibility violations), 2 on numeric or solver failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

use slp_core::error::Error as CoreError;
use slp_core::geometry::{check_casimir, check_jacobi, check_poisson_map, check_skew};
use slp_core::harness::{
    ap_csv, ap_sweep, ap_weak_experiment, convergence_csv, convergence_experiment, dyadic_range,
    invariant_drift_experiment, invariants_csv, trajectory_csv, ConvergenceConfig, ErrorMode,
    PhiId, WeakCoupling,
};
use slp_core::integrators::{integrate, step_splitting, SchemeId};
use slp_core::models::{from_json, ModelSetup};
use slp_core::multiscale::{ApConfig, OuVariant};
use slp_core::noise::sample_path;

const EXIT_OK: i32 = 0;
const EXIT_VALIDATION: i32 = 1;
const EXIT_NUMERIC: i32 = 2;

#[derive(Parser)]
#[command(
    name = "slp",
    version,
    about = "Splitting integrators for stochastic Lie-Poisson systems",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as CSV
    Simulate(SimulateArgs),
    /// Strong or weak convergence study with a fitted log-log rate
    Convergence(ConvergenceArgs),
    /// Record Hamiltonian and Casimir values along one trajectory
    Invariants(InvariantsArgs),
    /// Asymptotic-preserving sweep over epsilon
    Ap(ApArgs),
    /// Run the geometric predicate suite and print a PASS/FAIL table
    Checks(ChecksArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model preset: mb, rb or se
    #[arg(long, conflicts_with = "config")]
    model: Option<String>,
    /// JSON model configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override noise amplitudes (comma-separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sigma: Option<Vec<f64>>,
    /// Override principal moments of inertia (rb only)
    #[arg(long = "inertia", value_delimiter = ',')]
    inertia: Option<Vec<f64>>,
    /// Override noise moments of inertia (rb only)
    #[arg(long = "noise-inertia", value_delimiter = ',')]
    noise_inertia: Option<Vec<f64>>,
    /// Override the initial value (flat comma-separated reals; complex
    /// components interleave re,im)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y0: Option<Vec<f64>>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "splitting")]
    scheme: String,
    #[arg(long)]
    h: f64,
    #[arg(long = "T", alias = "t", default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV
    #[arg(long, action = ArgAction::SetTrue)]
    gnuplot: bool,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// strong or weak
    #[arg(long)]
    mode: String,
    #[arg(long, default_value = "splitting")]
    scheme: String,
    /// Step sizes: dyadic range 2^-a..2^-b, or comma-separated values
    #[arg(long = "h-list")]
    h_list: String,
    /// Reference step size (e.g. 2^-14)
    #[arg(long = "h-ref")]
    h_ref: String,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "T", alias = "t", default_value_t = 1.0)]
    t: f64,
    /// Weak-error test function: sum-sines or constant
    #[arg(long, default_value = "sum-sines")]
    phi: String,
    /// Couple each level to the reference through shared paths
    #[arg(long, action = ArgAction::SetTrue)]
    coupled: bool,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, action = ArgAction::SetTrue)]
    gnuplot: bool,
}

#[derive(Args)]
struct InvariantsArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// splitting, reversed, weak2, em or midpoint
    #[arg(long, default_value = "splitting")]
    scheme: String,
    #[arg(long)]
    h: f64,
    #[arg(long = "T", alias = "t", default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, action = ArgAction::SetTrue)]
    gnuplot: bool,
}

#[derive(Args)]
struct ApArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Step size for the path-wise sweep (not used with --h-list)
    #[arg(long)]
    h: Option<f64>,
    #[arg(long = "T", alias = "t", default_value_t = 1.0)]
    t: f64,
    /// Comma-separated epsilon values (0 dispatches to plain splitting)
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// OU discretisation: implicit or midpoint
    #[arg(long, default_value = "implicit")]
    ou: String,
    /// Optional weak-error curves: step sizes per epsilon
    #[arg(long = "h-list")]
    h_list: Option<String>,
    #[arg(long = "h-ref")]
    h_ref: Option<String>,
    /// Weak-error test function (with --h-list)
    #[arg(long, default_value = "sum-sines")]
    phi: String,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, action = ArgAction::SetTrue)]
    gnuplot: bool,
}

#[derive(Args)]
struct ChecksArgs {
    /// mb, rb, se or all
    #[arg(long, default_value = "all")]
    model: String,
    /// Seeded random states per predicate
    #[arg(long, default_value_t = 100)]
    states: usize,
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Convergence(args) => cmd_convergence(args),
        Command::Invariants(args) => cmd_invariants(args),
        Command::Ap(args) => cmd_ap(args),
        Command::Checks(args) => cmd_checks(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &CoreError) -> i32 {
    match e.root() {
        CoreError::NonFinite { .. } | CoreError::SolverFailure { .. } => EXIT_NUMERIC,
        _ => EXIT_VALIDATION,
    }
}

fn build_model(args: &ModelArgs) -> Result<ModelSetup, CoreError> {
    let mut value: serde_json::Value = match (&args.model, &args.config) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CoreError::Config(format!("--config {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CoreError::Config(e.to_string()))?
        }
        (Some(name), None) => serde_json::json!({ "model": name }),
        (None, None) => {
            return Err(CoreError::Config(
                "--model or --config is required".to_string(),
            ))
        }
    };
    let kind = value
        .get("model")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CoreError::Config("configuration must be a JSON object".to_string()))?;
    if let Some(sigma) = &args.sigma {
        obj.insert("sigma".into(), serde_json::json!(sigma));
    }
    if let Some(inertia) = &args.inertia {
        obj.insert("I".into(), serde_json::json!(inertia));
    }
    if let Some(noise_inertia) = &args.noise_inertia {
        obj.insert("Ihat".into(), serde_json::json!(noise_inertia));
    }
    if let Some(y0) = &args.y0 {
        if kind == "se" {
            if y0.len() != 8 {
                return Err(CoreError::Config(
                    "--y0 for se needs 8 reals (re,im per mode)".to_string(),
                ));
            }
            let pairs: Vec<[f64; 2]> = y0.chunks(2).map(|c| [c[0], c[1]]).collect();
            obj.insert("y0".into(), serde_json::json!(pairs));
        } else {
            obj.insert("y0".into(), serde_json::json!(y0));
        }
    }
    from_json(&value.to_string())
}

/// Accepts `2^-a..2^-b`, a single `2^-a`, or comma-separated floats.
fn parse_h_list(text: &str) -> Result<Vec<f64>, CoreError> {
    if let Some((lo, hi)) = text.split_once("..") {
        let a = parse_dyadic_exponent(lo)?;
        let b = parse_dyadic_exponent(hi)?;
        return Ok(dyadic_range(a, b));
    }
    text.split(',')
        .map(|part| parse_step(part.trim()))
        .collect()
}

fn parse_dyadic_exponent(text: &str) -> Result<u32, CoreError> {
    let rest = text
        .trim()
        .strip_prefix("2^-")
        .ok_or_else(|| CoreError::Config(format!("expected 2^-k syntax, got '{text}'")))?;
    rest.parse::<u32>()
        .map_err(|e| CoreError::Config(format!("bad exponent in '{text}': {e}")))
}

fn parse_step(text: &str) -> Result<f64, CoreError> {
    if let Ok(k) = parse_dyadic_exponent(text) {
        return Ok(2f64.powi(-(k as i32)));
    }
    text.parse::<f64>()
        .map_err(|e| CoreError::Config(format!("bad step size '{text}': {e}")))
}

fn parse_ou(text: &str) -> Result<OuVariant, CoreError> {
    match text {
        "implicit" | "implicit-euler" => Ok(OuVariant::ImplicitEuler),
        "midpoint" => Ok(OuVariant::Midpoint),
        other => Err(CoreError::Config(format!("unknown OU variant '{other}'"))),
    }
}

fn write_output(out: &Option<PathBuf>, contents: &str) -> Result<(), CoreError> {
    match out {
        Some(path) => std::fs::write(path, contents)
            .map_err(|e| CoreError::Config(format!("--out {}: {e}", path.display()))),
        None => {
            print!("{contents}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn write_gnuplot(
    enabled: bool,
    out: &Option<PathBuf>,
    script: impl FnOnce(&str) -> String,
) -> Result<(), CoreError> {
    if !enabled {
        return Ok(());
    }
    let csv = out
        .as_ref()
        .ok_or_else(|| CoreError::Config("--gnuplot needs --out".to_string()))?;
    let gp = csv.with_extension("gp");
    let csv_name = csv.to_string_lossy().to_string();
    std::fs::write(&gp, script(&csv_name))
        .map_err(|e| CoreError::Config(format!("{}: {e}", gp.display())))?;
    eprintln!("wrote {}", gp.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, CoreError> {
    let setup = build_model(&args.model)?;
    let scheme = SchemeId::parse(&args.scheme)?;
    if args.h.is_nan() || args.h <= 0.0 || args.t.is_nan() || args.t <= 0.0 {
        return Err(CoreError::Config("--h and --T must be positive".into()));
    }
    let n = (args.t / args.h).round() as usize;
    if n == 0 || (args.t / args.h - n as f64).abs() > 1e-9 * n as f64 {
        return Err(CoreError::Config("--h must divide --T".into()));
    }
    let path = sample_path(args.seed, setup.model.num_noises(), n, args.t / n as f64)?;
    let traj = integrate(scheme, setup.model.as_ref(), &setup.y0, args.t, n, &path, 1)?;
    write_output(&args.out, &trajectory_csv(&traj))?;
    write_gnuplot(args.gnuplot, &args.out, |csv| {
        format!(
            "set datafile separator ','\nset key autotitle columnhead\nplot for [i=2:*] '{csv}' using 1:i with lines\npause -1\n"
        )
    })?;
    Ok(EXIT_OK)
}

fn cmd_convergence(args: ConvergenceArgs) -> Result<i32, CoreError> {
    let setup = build_model(&args.model)?;
    let mode = match args.mode.as_str() {
        "strong" => ErrorMode::Strong,
        "weak" => ErrorMode::Weak,
        other => {
            return Err(CoreError::Config(format!(
                "--mode must be strong or weak, got '{other}'"
            )))
        }
    };
    let cfg = ConvergenceConfig {
        model: setup.model.as_ref(),
        scheme: SchemeId::parse(&args.scheme)?,
        y0: setup.y0.clone(),
        t_end: args.t,
        h_list: parse_h_list(&args.h_list)
            .map_err(|e| CoreError::Config(format!("--h-list: {e}")))?,
        h_ref: parse_step(&args.h_ref)
            .map_err(|e| CoreError::Config(format!("--h-ref: {e}")))?,
        samples: args.samples,
        seed: args.seed,
        mode,
        phi: PhiId::parse(&args.phi)?,
        coupling: if args.coupled {
            WeakCoupling::Coupled
        } else {
            WeakCoupling::Independent
        },
        workers: args.workers,
    };
    let report = convergence_experiment(&cfg)?;
    write_output(&args.out, &convergence_csv(&report))?;
    match &report.fit {
        Some(fit) => eprintln!(
            "{} {} error: fitted slope {:.4} (intercept {:.4}, R^2 {:.4}) on points above the noise floor",
            report.scheme, report.mode, fit.slope, fit.intercept, fit.r_squared
        ),
        None => eprintln!(
            "{} {} error: fewer than two points above the noise floor; no rate fitted",
            report.scheme, report.mode
        ),
    }
    if report.failed_samples > 0 {
        eprintln!("note: {} of {} samples failed", report.failed_samples, report.samples);
    }
    write_gnuplot(args.gnuplot, &args.out, |csv| {
        format!(
            "set datafile separator ','\nset logscale xy\nset xlabel 'h'\nset ylabel 'error'\nplot '{csv}' every ::1 using 4:6 with linespoints title 'error'\npause -1\n"
        )
    })?;
    Ok(EXIT_OK)
}

fn cmd_invariants(args: InvariantsArgs) -> Result<i32, CoreError> {
    let setup = build_model(&args.model)?;
    let scheme = SchemeId::parse(&args.scheme)?;
    let run = invariant_drift_experiment(
        setup.model.as_ref(),
        scheme,
        &setup.y0,
        args.t,
        args.h,
        args.seed,
    )?;
    write_output(&args.out, &invariants_csv(&run))?;
    for (name, drift) in &run.max_drifts {
        eprintln!("max |{name}(y_n) - {name}(y_0)| = {drift:.3e}");
    }
    write_gnuplot(args.gnuplot, &args.out, |csv| {
        format!(
            "set datafile separator ','\nset key autotitle columnhead\nplot for [i=2:*] '{csv}' using 1:i with lines\npause -1\n"
        )
    })?;
    Ok(EXIT_OK)
}

fn cmd_ap(args: ApArgs) -> Result<i32, CoreError> {
    let setup = build_model(&args.model)?;
    if args.eps.is_empty() {
        return Err(CoreError::Config("--eps needs at least one value".into()));
    }
    let variant = ApConfig {
        epsilon: 1.0,
        ou_variant: parse_ou(&args.ou)?,
    };
    let report = match &args.h_list {
        None => {
            let h = args
                .h
                .ok_or_else(|| CoreError::Config("--h is required (or pass --h-list)".into()))?;
            ap_sweep(
                setup.model.as_ref(),
                &setup.y0,
                h,
                args.t,
                &args.eps,
                args.seed,
                args.samples,
                variant,
                args.workers,
            )?
        }
        Some(h_list_text) => {
            let h_list = parse_h_list(h_list_text)
                .map_err(|e| CoreError::Config(format!("--h-list: {e}")))?;
            let h_ref = parse_step(
                args.h_ref
                    .as_deref()
                    .ok_or_else(|| CoreError::Config("--h-list needs --h-ref".into()))?,
            )
            .map_err(|e| CoreError::Config(format!("--h-ref: {e}")))?;
            let phi = PhiId::parse(&args.phi)?;
            let mut entries = Vec::new();
            for &eps in &args.eps {
                let r = ap_weak_experiment(
                    setup.model.as_ref(),
                    &setup.y0,
                    args.t,
                    eps,
                    &h_list,
                    h_ref,
                    args.samples,
                    args.seed,
                    phi,
                    variant,
                    args.workers,
                )?;
                entries.extend(r.entries);
            }
            slp_core::harness::ApReport { entries }
        }
    };
    write_output(&args.out, &ap_csv(&report))?;
    write_gnuplot(args.gnuplot, &args.out, |csv| {
        format!(
            "set datafile separator ','\nset logscale xy\nset xlabel 'epsilon'\nset ylabel 'error'\nplot '{csv}' every ::1 using 1:3 with linespoints title 'discrepancy'\npause -1\n"
        )
    })?;
    Ok(EXIT_OK)
}

struct CheckRow {
    model: &'static str,
    check: String,
    residual: f64,
    threshold: f64,
}

impl CheckRow {
    fn pass(&self) -> bool {
        self.residual <= self.threshold
    }
}

fn model_checks(setup: &ModelSetup, states: usize) -> Result<Vec<CheckRow>, CoreError> {
    let model = setup.model.as_ref();
    let name = match model.name() {
        "mb" => "mb",
        "rb" => "rb",
        _ => "se",
    };
    let b = model.structure();
    let mut skew: f64 = 0.0;
    let mut jacobi: f64 = 0.0;
    let mut casimir: f64 = 0.0;
    for s in 0..states {
        let y = model.random_state(s as u64 + 1);
        skew = skew.max(check_skew(b, &y));
        jacobi = jacobi.max(check_jacobi(b, &y, 1e-5));
        for c in model.casimirs() {
            casimir = casimir.max(check_casimir(c, b, &y));
        }
    }
    let splitting_step = |y: &[f64]| {
        let mut out = y.to_vec();
        let dw: Vec<f64> = (0..model.num_noises())
            .map(|k| 0.05 + 0.01 * k as f64)
            .collect();
        step_splitting(model, 0.1, &dw, &mut out).expect("splitting step");
        out
    };
    let pmap = check_poisson_map(&splitting_step, b, &setup.y0, 1e-5);
    Ok(vec![
        CheckRow {
            model: name,
            check: "skew-symmetry".into(),
            residual: skew,
            threshold: 1e-14,
        },
        CheckRow {
            model: name,
            check: "jacobi (tensor)".into(),
            residual: jacobi,
            threshold: 1e-12,
        },
        CheckRow {
            model: name,
            check: "casimir residual".into(),
            residual: casimir,
            threshold: 1e-12,
        },
        CheckRow {
            model: name,
            check: "poisson-map residual".into(),
            residual: pmap,
            threshold: 1e-6,
        },
    ])
}

fn cmd_checks(args: ChecksArgs) -> Result<i32, CoreError> {
    let names: Vec<&str> = match args.model.as_str() {
        "all" => vec!["mb", "rb", "se"],
        other => vec![other],
    };
    let mut rows = Vec::new();
    for name in names {
        let setup = slp_core::models::preset(name)?;
        rows.extend(model_checks(&setup, args.states)?);
    }
    println!("{:<6} {:<22} {:>12} {:>10}  result", "model", "check", "residual", "limit");
    let mut all_pass = true;
    for row in &rows {
        let ok = row.pass();
        all_pass &= ok;
        println!(
            "{:<6} {:<22} {:>12.3e} {:>10.0e}  {}",
            row.model,
            row.check,
            row.residual,
            row.threshold,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_NUMERIC })
}
