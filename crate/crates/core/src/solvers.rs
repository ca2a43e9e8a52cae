//! Half-quadratic-splitting plug-and-play solvers.
//!
//! [`pg_dpir`] alternates a heteroscedastic data step with a denoising step
//! along a log-spaced strength schedule ending at `σ₀`. During the first part
//! of the schedule the data step is the closed-form fixed-variance prox;
//! afterwards a few gradient steps on the exact likelihood refine it.
//! [`dpir_baseline`] and [`pgd_baseline`] are the comparison methods.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::fidelity::{
    likelihood_at, operator_norm_sq, prox_cold, prox_fixed_variance, prox_pg, InnerDescent,
    ProxProblem, StepRule,
};
use crate::forward::{variance_map, DegradationOp, NoiseParams, PreparedOp};
use crate::grid::ImageGrid;
use crate::interp::{bicubic_upsample, nearest_upsample};
use crate::metrics::psnr;
use crate::schedule::{make_schedule, Schedule};

/// Schedule endpoint used when `σ₀ = 0`.
pub const SIGMA_FLOOR: f64 = 1e-4;
pub const DEFAULT_SIGMA1: f64 = 20.0 / 255.0;
/// Starting strength of the original white-Gaussian DPIR.
pub const CLASSIC_DPIR_SIGMA1: f64 = 50.0 / 255.0;
pub const IR_ITERATIONS: usize = 8;
pub const SISR_ITERATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// The measurement itself (pixel-replicated when decimated).
    Measurement,
    BicubicUpsample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(alias = "pg-dpir")]
    PgDpir,
    Dpir,
    Pgd,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::PgDpir => "pg-dpir",
            Method::Dpir => "dpir",
            Method::Pgd => "pgd",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "pg-dpir" => Ok(Method::PgDpir),
            "dpir" => Ok(Method::Dpir),
            "pgd" => Ok(Method::Pgd),
            other => Err(Error::param(format!("unknown method `{other}`"))),
        }
    }
}

/// Settings of the proximal-gradient baseline. Neither value is prescribed
/// anywhere; both are reported in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgdConfig {
    pub iterations: usize,
    /// Fixed denoiser strength; defaults to `σ₀·√λ`.
    pub sigma: Option<f64>,
    /// Step size; defaults to `0.9 / L`.
    pub eta: Option<f64>,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self { iterations: 100, sigma: None, eta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: f64,
    pub n_iters: usize,
    pub sigma1: f64,
    /// Inner step size; `None` selects it from a Lipschitz estimate.
    pub eta: Option<f64>,
    pub inner_steps: usize,
    /// Fraction of iterations that use the closed-form prox only.
    pub phase_split: f64,
    pub init_mode: InitMode,
    pub backtracking: bool,
    /// Start the inner descent from the fixed-variance prox (`true`) or
    /// from the anchor `u` (`false`).
    pub prox_init: bool,
    /// When set, inner descent runs until `‖∇‖₂` reaches it instead of a
    /// fixed `inner_steps` count.
    pub inner_tolerance: Option<f64>,
    pub max_inner_steps: usize,
    pub pgd: PgdConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.23,
            n_iters: IR_ITERATIONS,
            sigma1: DEFAULT_SIGMA1,
            eta: None,
            inner_steps: 5,
            phase_split: 0.5,
            init_mode: InitMode::BicubicUpsample,
            backtracking: true,
            prox_init: true,
            inner_tolerance: None,
            max_inner_steps: 100_000,
            pgd: PgdConfig::default(),
        }
    }
}

impl SolverConfig {
    /// Defaults for deblurring (`s = 1`, 8 iterations).
    pub fn ir() -> Self {
        Self::default()
    }

    /// Defaults for 2x super-resolution (20 iterations).
    pub fn sisr() -> Self {
        Self { n_iters: SISR_ITERATIONS, ..Self::default() }
    }

    pub fn for_decimation(s: usize) -> Self {
        if s > 1 {
            Self::sisr()
        } else {
            Self::ir()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(Error::param("n_iters must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.phase_split) {
            return Err(Error::param("phase_split must lie in [0, 1]"));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::param("lambda must be positive"));
        }
        if !(self.sigma1 > 0.0) {
            return Err(Error::param("sigma1 must be positive"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(Error::param("eta must be positive"));
            }
        }
        if self.inner_tolerance.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::param("inner_tolerance must be positive"));
        }
        Ok(())
    }

    /// First iteration (1-based) that runs gradient descent.
    pub fn first_descent_iteration(&self) -> usize {
        (self.phase_split * self.n_iters as f64).ceil() as usize + 1
    }

    fn inner_descent(&self) -> InnerDescent {
        InnerDescent {
            step: self.eta.map_or(StepRule::Auto, StepRule::Fixed),
            max_steps: if self.inner_tolerance.is_some() { self.max_inner_steps } else { self.inner_steps },
            tolerance: self.inner_tolerance,
            backtracking: self.backtracking,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sigma_d: f64,
    /// HQS coupling weight; absent for the gradient baseline.
    pub mu: Option<f64>,
    /// `‖∇‖₂` of the data-step objective at the returned point.
    pub prox_grad_norm: f64,
    pub inner_steps: usize,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: Method,
    pub records: Vec<IterationRecord>,
    /// Fixed denoiser strength (gradient baseline only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
}

impl RunTrace {
    fn new(method: Method) -> Self {
        Self { method, records: Vec::new(), fixed_sigma: None, step_size: None }
    }

    pub fn total_inner_steps(&self) -> usize {
        self.records.iter().map(|r| r.inner_steps).sum()
    }

    pub fn wall_time(&self) -> f64 {
        self.records.iter().map(|r| r.wall_time).sum()
    }
}

/// Starting estimate on the target grid.
pub fn init_estimate(y: &ImageGrid, op: &DegradationOp, mode: InitMode) -> ImageGrid {
    let s = op.decimation;
    if s == 1 {
        return y.clone();
    }
    match mode {
        InitMode::Measurement => nearest_upsample(y, s),
        InitMode::BicubicUpsample => bicubic_upsample(y, s, op.phase),
    }
}

fn schedule_for(cfg: &SolverConfig, end: f64) -> Result<Schedule> {
    if cfg.n_iters == 1 {
        return Ok(Schedule::single(end));
    }
    make_schedule(cfg.sigma1, end, cfg.n_iters)
}

fn with_iteration<T>(iteration: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::AtIteration { iteration, source: Box::new(e) })
}

fn psnr_against(x: &ImageGrid, reference: Option<&ImageGrid>) -> Option<f64> {
    reference
        .filter(|r| r.dims() == x.dims())
        .and_then(|r| psnr(x, r, 1.0).ok())
}

/// PG-DPIR. Returns the last denoised iterate `u_n` and the per-iteration trace.
pub fn pg_dpir(
    y: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
    denoiser: &mut dyn Denoiser,
    cfg: &SolverConfig,
) -> Result<(ImageGrid, RunTrace)> {
    pg_dpir_with_reference(y, op, noise, denoiser, cfg, None)
}

pub fn pg_dpir_with_reference(
    y: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
    denoiser: &mut dyn Denoiser,
    cfg: &SolverConfig,
    reference: Option<&ImageGrid>,
) -> Result<(ImageGrid, RunTrace)> {
    cfg.validate()?;
    let prepared = op.prepare_for_measurement(y)?;
    let schedule = schedule_for(cfg, noise.sigma0.max(SIGMA_FLOOR))?;
    let descent = cfg.inner_descent();
    let switch = cfg.first_descent_iteration();
    let needs_norm = cfg.eta.is_none() && (!cfg.prox_init || switch <= cfg.n_iters);
    let norm_sq = if needs_norm { Some(operator_norm_sq(&prepared)?) } else { None };

    let mut u = init_estimate(y, op, cfg.init_mode);
    let mut trace = RunTrace::new(Method::PgDpir);
    for (idx, &sigma_d) in schedule.sigmas().iter().enumerate() {
        let iteration = idx + 1;
        let start = Instant::now();
        let mu = cfg.lambda / (sigma_d * sigma_d);
        let problem = ProxProblem::with_prepared(y.clone(), u, mu, prepared.clone(), *noise)?;
        if let Some(n) = norm_sq {
            problem.set_operator_norm_sq(n);
        }
        let report = if cfg.prox_init {
            prox_pg(&problem, &descent, iteration >= switch)
        } else {
            prox_cold(&problem, &descent)
        };
        let report = with_iteration(iteration, report)?;
        u = with_iteration(iteration, denoiser.denoise(&report.solution, sigma_d))?;
        trace.records.push(IterationRecord {
            iteration,
            sigma_d,
            mu: Some(mu),
            prox_grad_norm: report.grad_norm_final,
            inner_steps: report.inner_steps_used,
            wall_time: start.elapsed().as_secs_f64(),
            psnr: psnr_against(&u, reference),
        });
    }
    Ok((u, trace))
}

/// White-Gaussian DPIR with the variance frozen at the mean luminance of `y`.
pub fn dpir_baseline(
    y: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
    denoiser: &mut dyn Denoiser,
    cfg: &SolverConfig,
) -> Result<(ImageGrid, RunTrace)> {
    dpir_baseline_with_reference(y, op, noise, denoiser, cfg, None)
}

/// Effective white-noise variance `σ₀² + K·mean(y)`.
pub fn effective_variance(y: &ImageGrid, noise: &NoiseParams) -> Result<f64> {
    Ok(noise.variance_at(y.mean()?))
}

pub fn dpir_baseline_with_reference(
    y: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
    denoiser: &mut dyn Denoiser,
    cfg: &SolverConfig,
    reference: Option<&ImageGrid>,
) -> Result<(ImageGrid, RunTrace)> {
    cfg.validate()?;
    let prepared = op.prepare_for_measurement(y)?;
    let var_eff = effective_variance(y, noise)?;
    let schedule = schedule_for(cfg, var_eff.sqrt().max(SIGMA_FLOOR))?;

    let mut u = init_estimate(y, op, cfg.init_mode);
    let mut trace = RunTrace::new(Method::Dpir);
    for (idx, &sigma_d) in schedule.sigmas().iter().enumerate() {
        let iteration = idx + 1;
        let start = Instant::now();
        let mu = cfg.lambda / (sigma_d * sigma_d);
        let problem = ProxProblem::with_prepared(y.clone(), u, mu, prepared.clone(), *noise)?;
        let x = with_iteration(iteration, prox_fixed_variance(&problem, var_eff))?;
        let (_, grad) = problem.fixed_variance_evaluate(&x, var_eff)?;
        u = with_iteration(iteration, denoiser.denoise(&x, sigma_d))?;
        trace.records.push(IterationRecord {
            iteration,
            sigma_d,
            mu: Some(mu),
            prox_grad_norm: grad.norm(),
            inner_steps: 0,
            wall_time: start.elapsed().as_secs_f64(),
            psnr: psnr_against(&u, reference),
        });
    }
    Ok((u, trace))
}

fn lipschitz(prepared: &PreparedOp, noise: &NoiseParams, at: &ImageGrid) -> Result<f64> {
    let v = prepared.apply(at)?;
    let min_var = variance_map(&v, noise).min();
    Ok(operator_norm_sq(prepared)? / min_var)
}

/// Plug-and-play proximal gradient descent:
/// `x ← D(x − η∇F(x), σ_pgd)` for a fixed number of iterations.
pub fn pgd_baseline(
    y: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
    denoiser: &mut dyn Denoiser,
    cfg: &SolverConfig,
) -> Result<(ImageGrid, RunTrace)> {
    pgd_baseline_with_reference(y, op, noise, denoiser, cfg, None)
}

pub fn pgd_baseline_with_reference(
    y: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
    denoiser: &mut dyn Denoiser,
    cfg: &SolverConfig,
    reference: Option<&ImageGrid>,
) -> Result<(ImageGrid, RunTrace)> {
    cfg.validate()?;
    let prepared = op.prepare_for_measurement(y)?;
    let mut x = init_estimate(y, op, cfg.init_mode);
    let lip = lipschitz(&prepared, noise, &x)?;
    let eta = match cfg.pgd.eta {
        Some(eta) if !(eta >= 0.0) || eta * lip > 1.0 + 1e-9 => {
            return Err(Error::param(format!(
                "pgd step {eta} exceeds 1/L = {} or is negative",
                1.0 / lip
            )))
        }
        Some(eta) => eta,
        None => 0.9 / lip,
    };
    let sigma = cfg
        .pgd
        .sigma
        .unwrap_or(noise.sigma0.max(SIGMA_FLOOR) * cfg.lambda.sqrt());
    if !(sigma > 0.0) {
        return Err(Error::param("pgd denoiser strength must be positive"));
    }

    let mut trace = RunTrace::new(Method::Pgd);
    trace.fixed_sigma = Some(sigma);
    trace.step_size = Some(eta);
    let mut initial: Option<f64> = None;
    for iteration in 1..=cfg.pgd.iterations {
        let start = Instant::now();
        let v = prepared.apply(&x)?;
        let (f, gm) = likelihood_at(&v, y, noise);
        let f0 = *initial.get_or_insert(f);
        if !f.is_finite() || f - f0 > 10.0 * f0.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::StepSize(format!(
                "pgd diverged at iteration {iteration}: objective {f:e} from {f0:e}"
            )));
        }
        let grad = prepared.adjoint(&gm)?;
        let mut step = x;
        step.axpy(-eta, &grad);
        x = with_iteration(iteration, denoiser.denoise(&step, sigma))?;
        trace.records.push(IterationRecord {
            iteration,
            sigma_d: sigma,
            mu: None,
            prox_grad_norm: grad.norm(),
            inner_steps: 1,
            wall_time: start.elapsed().as_secs_f64(),
            psnr: psnr_against(&x, reference),
        });
    }
    Ok((x, trace))
}

/// Runs the method selected by `method`.
pub fn run_method(
    method: Method,
    y: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
    denoiser: &mut dyn Denoiser,
    cfg: &SolverConfig,
    reference: Option<&ImageGrid>,
) -> Result<(ImageGrid, RunTrace)> {
    match method {
        Method::PgDpir => pg_dpir_with_reference(y, op, noise, denoiser, cfg, reference),
        Method::Dpir => dpir_baseline_with_reference(y, op, noise, denoiser, cfg, reference),
        Method::Pgd => pgd_baseline_with_reference(y, op, noise, denoiser, cfg, reference),
    }
}
