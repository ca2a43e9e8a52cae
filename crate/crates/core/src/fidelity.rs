//! Heteroscedastic Gaussian data term and its proximal solvers.
//!
//! The data term is the negative log-likelihood of `y ~ N(Ax, diag σ²(Ax))`
//! with `σ²(v) = σ₀² + K·max(v, 0)`. The HQS data step minimizes it plus
//! `(μ/2)‖x − u‖²`. Its fixed-variance surrogate has a closed form in the
//! Fourier domain, which serves as the warm start for a short gradient descent
//! on the exact objective.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2, ifft2};
use crate::forward::{DegradationOp, NoiseParams, PreparedOp};
use crate::grid::ImageGrid;

const POWER_ITERATIONS: usize = 20;
const MAX_HALVINGS: usize = 10;
const ROUNDING_SLACK: f64 = 1e-12;
const CG_TOLERANCE: f64 = 1e-10;
const CG_MAX_ITERS: usize = 500;

/// Data-term value and its gradient with respect to `v`, given `v = Ax`.
pub fn likelihood_at(v: &ImageGrid, y: &ImageGrid, noise: &NoiseParams) -> (f64, ImageGrid) {
    let k = noise.gain_k;
    let mut value = 0.0;
    let grad = v.zip_map(y, |vi, yi| {
        let (var, active) = noise.pixel_variance(vi);
        let r = yi - vi;
        value += r * r / (2.0 * var) + 0.5 * var.ln();
        let mut g = -r / var;
        if active {
            g += -k * r * r / (2.0 * var * var) + k / (2.0 * var);
        }
        g
    });
    (value, grad)
}

fn check_pair(x: &ImageGrid, y: &ImageGrid, op: &DegradationOp) -> Result<PreparedOp> {
    let prepared = op.prepare(x.height(), x.width())?;
    if prepared.measurement_dims() != y.dims() {
        return Err(Error::shape(format!(
            "measurement is {}x{}, operator produces {:?}",
            y.height(),
            y.width(),
            prepared.measurement_dims()
        )));
    }
    Ok(prepared)
}

/// Exact heteroscedastic negative log-likelihood
/// `Σᵢ (yᵢ − vᵢ)²/(2σᵢ²) + ½ log σᵢ²` with `v = Ax`.
pub fn neg_log_likelihood(
    x: &ImageGrid,
    y: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
) -> Result<f64> {
    let prepared = check_pair(x, y, op)?;
    let v = prepared.apply(x)?;
    Ok(likelihood_at(&v, y, noise).0)
}

/// Gradient of [`neg_log_likelihood`] with respect to `x`.
///
/// Where the variance clamp or floor is active the variance does not depend on
/// `x`, so the `K` terms vanish there.
pub fn grad_f(
    x: &ImageGrid,
    y: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
) -> Result<ImageGrid> {
    let prepared = check_pair(x, y, op)?;
    let v = prepared.apply(x)?;
    prepared.adjoint(&likelihood_at(&v, y, noise).1)
}

/// Squared spectral norm `‖A‖²` estimated by power iteration on `AᵀA`.
pub fn operator_norm_sq(op: &PreparedOp) -> Result<f64> {
    let (h, w) = op.target_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = ImageGrid::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0));
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let n = x.norm();
        if n == 0.0 {
            return Ok(0.0);
        }
        x = x.scale(1.0 / n);
        let next = op.adjoint(&op.apply(&x)?)?;
        estimate = x.dot(&next);
        x = next;
    }
    Ok(estimate)
}

/// Algorithm used for the fixed-variance proximal step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FixedVarianceSolver {
    /// Frequency-domain closed form (any decimation factor).
    #[default]
    ClosedForm,
    /// Conjugate gradient on the normal equations.
    ConjugateGradient,
}

/// One HQS data step: minimize `F(x, y) + (μ/2)‖x − u‖²`.
#[derive(Debug, Clone)]
pub struct ProxProblem {
    pub y: ImageGrid,
    pub u: ImageGrid,
    pub mu: f64,
    pub noise: NoiseParams,
    op: PreparedOp,
    norm_sq: OnceLock<f64>,
}

impl ProxProblem {
    pub fn new(
        y: ImageGrid,
        u: ImageGrid,
        mu: f64,
        op: &DegradationOp,
        noise: NoiseParams,
    ) -> Result<Self> {
        let prepared = op.prepare(u.height(), u.width())?;
        Self::with_prepared(y, u, mu, prepared, noise)
    }

    /// Reuses an operator already bound to the target size.
    pub fn with_prepared(
        y: ImageGrid,
        u: ImageGrid,
        mu: f64,
        op: PreparedOp,
        noise: NoiseParams,
    ) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::param(format!("mu must be positive and finite, got {mu}")));
        }
        if op.target_dims() != u.dims() || op.measurement_dims() != y.dims() {
            return Err(Error::shape(format!(
                "anchor {}x{} and measurement {}x{} inconsistent with decimation {}",
                u.height(),
                u.width(),
                y.height(),
                y.width(),
                op.decimation()
            )));
        }
        Ok(Self { y, u, mu, noise, op, norm_sq: OnceLock::new() })
    }

    /// Same problem with `μ = λ / σ_d²`.
    pub fn from_strength(
        y: ImageGrid,
        u: ImageGrid,
        lambda: f64,
        sigma_d: f64,
        op: &DegradationOp,
        noise: NoiseParams,
    ) -> Result<Self> {
        if !(sigma_d > 0.0) {
            return Err(Error::param("denoiser strength must be positive"));
        }
        Self::new(y, u, lambda / (sigma_d * sigma_d), op, noise)
    }

    pub fn operator(&self) -> &PreparedOp {
        &self.op
    }

    /// Shares a precomputed `‖A‖²` (it only depends on the operator).
    pub fn set_operator_norm_sq(&self, value: f64) {
        let _ = self.norm_sq.set(value);
    }

    pub fn operator_norm_sq(&self) -> Result<f64> {
        if let Some(v) = self.norm_sq.get() {
            return Ok(*v);
        }
        let v = operator_norm_sq(&self.op)?;
        Ok(*self.norm_sq.get_or_init(|| v))
    }

    /// Objective `F(x, y) + (μ/2)‖x − u‖²`.
    pub fn objective(&self, x: &ImageGrid) -> Result<f64> {
        Ok(self.evaluate(x)?.0)
    }

    pub fn gradient(&self, x: &ImageGrid) -> Result<ImageGrid> {
        Ok(self.evaluate(x)?.1)
    }

    /// Objective and gradient in one pass.
    pub fn evaluate(&self, x: &ImageGrid) -> Result<(f64, ImageGrid)> {
        let v = self.op.apply(x)?;
        self.evaluate_with(x, &v)
    }

    fn evaluate_with(&self, x: &ImageGrid, v: &ImageGrid) -> Result<(f64, ImageGrid)> {
        let (f, gm) = likelihood_at(v, &self.y, &self.noise);
        let diff = x.sub(&self.u);
        let mut grad = self.op.adjoint(&gm)?;
        grad.axpy(self.mu, &diff);
        Ok((f + 0.5 * self.mu * diff.norm_sq(), grad))
    }

    /// `σ̄² = σ₀² + K·(h * ū)` where `ū` is the mean of the anchor.
    /// For a constant image the blur scales by the kernel sum.
    pub fn mean_variance(&self) -> Result<f64> {
        let mean = self.u.mean()?;
        Ok(self.noise.variance_at(mean * self.op.op().kernel.sum()))
    }

    /// Fixed-variance objective `(1/2σ̄²)‖y − Ax‖² + (μ/2)‖x − u‖²` and gradient.
    pub fn fixed_variance_evaluate(&self, x: &ImageGrid, sigma_bar_sq: f64) -> Result<(f64, ImageGrid)> {
        let r = self.op.apply(x)?.sub(&self.y);
        let diff = x.sub(&self.u);
        let mut grad = self.op.adjoint(&r)?.scale(1.0 / sigma_bar_sq);
        grad.axpy(self.mu, &diff);
        Ok((r.norm_sq() / (2.0 * sigma_bar_sq) + 0.5 * self.mu * diff.norm_sq(), grad))
    }
}

/// Exact minimizer of `(1/2σ̄²)‖y − Ax‖² + (μ/2)‖x − u‖²`.
pub fn prox_fixed_variance(p: &ProxProblem, sigma_bar_sq: f64) -> Result<ImageGrid> {
    prox_fixed_variance_with(p, sigma_bar_sq, FixedVarianceSolver::ClosedForm)
}

pub fn prox_fixed_variance_with(
    p: &ProxProblem,
    sigma_bar_sq: f64,
    solver: FixedVarianceSolver,
) -> Result<ImageGrid> {
    if !(sigma_bar_sq > 0.0) || !sigma_bar_sq.is_finite() {
        return Err(Error::param(format!("fixed variance must be positive, got {sigma_bar_sq}")));
    }
    match solver {
        FixedVarianceSolver::ClosedForm => closed_form(p, sigma_bar_sq),
        FixedVarianceSolver::ConjugateGradient => conjugate_gradient(p, sigma_bar_sq),
    }
}

// Normal equations scaled by σ̄²: (AᵀA + αI) x = Aᵀy + αu, α = σ̄²μ.
fn closed_form(p: &ProxProblem, sigma_bar_sq: f64) -> Result<ImageGrid> {
    let alpha = sigma_bar_sq * p.mu;
    let op = &p.op;
    let transfer = op.conv().transfer();
    let s = op.decimation();

    if s == 1 {
        let y_hat = fft2(&p.y);
        let mut x_hat = fft2(&p.u);
        for ((xv, yv), h) in x_hat.data.iter_mut().zip(&y_hat.data).zip(&transfer.data) {
            *xv = (h.conj() * yv + alpha * *xv) / (h.norm_sqr() + alpha);
        }
        return Ok(ifft2(&x_hat));
    }

    // Woodbury: x = (b − Aᵀ (αI + AAᵀ)⁻¹ A b) / α. AAᵀ is circulant on the
    // low-resolution grid with symbol equal to the alias-averaged |Ĥ|².
    let mut b = op.adjoint(&p.y)?;
    b.axpy(alpha, &p.u);
    let mut w_hat = fft2(&op.apply(&b)?);
    let (lh, lw) = op.measurement_dims();
    let (_, hw) = op.target_dims();
    let inv_s2 = 1.0 / (s * s) as f64;
    for kr in 0..lh {
        for kc in 0..lw {
            let mut power = 0.0;
            for pr in 0..s {
                for pc in 0..s {
                    let idx = (kr + pr * lh) * hw + kc + pc * lw;
                    power += transfer.data[idx].norm_sqr();
                }
            }
            w_hat.data[kr * lw + kc] /= Complex64::new(alpha + power * inv_s2, 0.0);
        }
    }
    let z = ifft2(&w_hat);
    let mut x = b;
    x.axpy(-1.0, &op.adjoint(&z)?);
    Ok(x.scale(1.0 / alpha))
}

fn conjugate_gradient(p: &ProxProblem, sigma_bar_sq: f64) -> Result<ImageGrid> {
    let alpha = sigma_bar_sq * p.mu;
    let op = &p.op;
    let apply_normal = |x: &ImageGrid| -> Result<ImageGrid> {
        let mut out = op.adjoint(&op.apply(x)?)?;
        out.axpy(alpha, x);
        Ok(out)
    };
    let mut b = op.adjoint(&p.y)?;
    b.axpy(alpha, &p.u);

    let mut x = p.u.clone();
    let mut r = b.sub(&apply_normal(&x)?);
    let mut d = r.clone();
    let mut rr = r.norm_sq();
    // Residual of the scaled system is σ̄² times the prox-objective gradient.
    let tol = CG_TOLERANCE * sigma_bar_sq;
    for _ in 0..CG_MAX_ITERS {
        if rr.sqrt() <= tol {
            break;
        }
        let ad = apply_normal(&d)?;
        let step = rr / d.dot(&ad);
        x.axpy(step, &d);
        r.axpy(-step, &ad);
        let rr_next = r.norm_sq();
        d = r.add(&d.scale(rr_next / rr));
        rr = rr_next;
    }
    Ok(x)
}

/// Step size policy of the inner gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `0.9 / (μ + ‖A‖² / min σ²)`, with `‖A‖²` from power iteration and the
    /// variance minimum taken over the starting point.
    Auto,
    Fixed(f64),
}

/// Inner gradient-descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerDescent {
    pub step: StepRule,
    pub max_steps: usize,
    /// Stop early once `‖∇‖₂` drops to this value.
    pub tolerance: Option<f64>,
    /// Halve the step on objective increase (at most 10 times per step).
    pub backtracking: bool,
}

impl Default for InnerDescent {
    fn default() -> Self {
        Self { step: StepRule::Auto, max_steps: 5, tolerance: None, backtracking: true }
    }
}

impl InnerDescent {
    pub fn fixed_steps(steps: usize) -> Self {
        Self { max_steps: steps, ..Self::default() }
    }

    pub fn to_tolerance(tolerance: f64, max_steps: usize) -> Self {
        Self { max_steps, tolerance: Some(tolerance), ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ProxReport {
    pub solution: ImageGrid,
    /// Objective at the start point followed by one entry per accepted step.
    pub objective_trace: Vec<f64>,
    pub grad_norm_final: f64,
    pub inner_steps_used: usize,
    pub step_size: f64,
}

/// Gradient descent on the exact prox objective from `start`.
pub fn descend(p: &ProxProblem, start: ImageGrid, cfg: &InnerDescent) -> Result<ProxReport> {
    let mut x = start;
    let mut v = p.op.apply(&x)?;
    let (mut phi, mut grad) = p.evaluate_with(&x, &v)?;
    let phi0 = phi;
    let mut trace = vec![phi];
    let mut steps = 0;

    let mut eta = match cfg.step {
        StepRule::Fixed(eta) => eta,
        StepRule::Auto if cfg.max_steps == 0 => 0.0,
        StepRule::Auto => {
            let min_var = v
                .as_slice()
                .iter()
                .map(|&vi| p.noise.variance_at(vi))
                .fold(f64::INFINITY, f64::min);
            0.9 / (p.mu + p.operator_norm_sq()? / min_var)
        }
    };
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::param(format!("inner step size must be finite and >= 0, got {eta}")));
    }

    'outer: while steps < cfg.max_steps {
        if cfg.tolerance.is_some_and(|tol| grad.norm() <= tol) {
            break;
        }
        let mut halvings = 0;
        loop {
            let mut trial = x.clone();
            trial.axpy(-eta, &grad);
            let trial_v = p.op.apply(&trial)?;
            let (trial_phi, trial_grad) = p.evaluate_with(&trial, &trial_v)?;
            // Differences below the summation rounding of `phi` are noise.
            let slack = ROUNDING_SLACK * (1.0 + phi.abs());
            let worse = !trial_phi.is_finite() || trial_phi > phi + slack;
            if cfg.backtracking && worse {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    // No decrease available at this resolution.
                    break 'outer;
                }
                eta *= 0.5;
                continue;
            }
            if !trial_phi.is_finite() || trial_phi - phi0 > 10.0 * phi0.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::StepSize(format!(
                    "inner descent diverged at step {}: objective {trial_phi:e} from {phi0:e} (eta {eta:e})",
                    steps + 1
                )));
            }
            x = trial;
            v = trial_v;
            phi = trial_phi;
            grad = trial_grad;
            break;
        }
        steps += 1;
        trace.push(phi);
    }
    let _ = v;
    Ok(ProxReport {
        solution: x,
        objective_trace: trace,
        grad_norm_final: grad.norm(),
        inner_steps_used: steps,
        step_size: eta,
    })
}

/// Warm-started data step: closed-form fixed-variance prox at `σ̄²`, then
/// (when `use_gd`) gradient descent on the exact objective.
pub fn prox_pg(p: &ProxProblem, descent: &InnerDescent, use_gd: bool) -> Result<ProxReport> {
    let x0 = prox_fixed_variance(p, p.mean_variance()?)?;
    let cfg = if use_gd { *descent } else { InnerDescent { max_steps: 0, ..*descent } };
    descend(p, x0, &cfg)
}

/// Cold-started data step: gradient descent from the anchor `u`.
pub fn prox_cold(p: &ProxProblem, descent: &InnerDescent) -> Result<ProxReport> {
    descend(p, p.u.clone(), descent)
}
