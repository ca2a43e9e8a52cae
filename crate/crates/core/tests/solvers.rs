mod common;

use common::*;
use pgdpir::denoise::{Denoiser, DenoiserSpec};
use pgdpir::fidelity::grad_f;
use pgdpir::forward::{apply_a, sample_exact_pg};
use pgdpir::metrics::psnr;
use pgdpir::solvers::{
    dpir_baseline, effective_variance, init_estimate, pg_dpir, pgd_baseline, InitMode, PgdConfig,
    SolverConfig,
};
use pgdpir::synth::{generate, TargetKind};
use pgdpir::{make_schedule, BlurKernel, DegradationOp, Error, ImageGrid, NoiseParams, Result};

fn identity() -> Box<dyn Denoiser> {
    DenoiserSpec::Identity.build().unwrap()
}

fn tv() -> Box<dyn Denoiser> {
    DenoiserSpec::tv().build().unwrap()
}

#[test]
fn matches_hand_rolled_loop_for_gaussian_identity_case() {
    let mut r = rng(1);
    let y = grid(&mut r, 12, 10, 0.0, 1.0);
    let sigma0 = 0.02;
    let noise = NoiseParams::gaussian(sigma0).unwrap();
    let cfg = SolverConfig::ir();
    let (out, trace) = pg_dpir(&y, &DegradationOp::identity(), &noise, identity().as_mut(), &cfg).unwrap();

    let sched = make_schedule(cfg.sigma1, sigma0, cfg.n_iters).unwrap();
    let a = 1.0 / (sigma0 * sigma0);
    let mut u = y.clone();
    for &sd in sched.sigmas() {
        let mu = cfg.lambda / (sd * sd);
        u = y.zip_map(&u, |yi, ui| (a * yi + mu * ui) / (a + mu));
    }
    assert!(out.sub(&u).max_abs() < 1e-10);
    assert_eq!(trace.records.len(), 8);
}

fn hetero_ir(seed: u64, size: usize) -> (ImageGrid, ImageGrid, DegradationOp, NoiseParams) {
    let x = generate(TargetKind::Urban, size, size, seed).unwrap();
    let op = DegradationOp::new(BlurKernel::gaussian(1.2, 5).unwrap(), 1).unwrap();
    let noise = NoiseParams::new(0.005, 0.001).unwrap();
    let y = sample_exact_pg(&x, &op, &noise, seed + 1).unwrap();
    (x, y, op, noise)
}

#[test]
fn phase_boundary_and_schedule_shape() {
    let (_, y, op, noise) = hetero_ir(2, 32);
    let (_, trace) = pg_dpir(&y, &op, &noise, tv().as_mut(), &SolverConfig::ir()).unwrap();
    let steps: Vec<usize> = trace.records.iter().map(|r| r.inner_steps).collect();
    assert_eq!(steps, [0, 0, 0, 0, 5, 5, 5, 5]);
    let mus: Vec<f64> = trace.records.iter().map(|r| r.mu.unwrap()).collect();
    assert!(mus.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(trace.records.last().unwrap().sigma_d, noise.sigma0);

    let (_, sisr) = {
        let op2 = DegradationOp::new(BlurKernel::gaussian(1.0, 5).unwrap(), 2).unwrap();
        let x = generate(TargetKind::Urban, 32, 32, 3).unwrap();
        let y2 = sample_exact_pg(&x, &op2, &noise, 4).unwrap();
        pg_dpir(&y2, &op2, &noise, tv().as_mut(), &SolverConfig::sisr()).unwrap()
    };
    let first_gd = sisr.records.iter().position(|r| r.inner_steps > 0).unwrap() + 1;
    assert_eq!(sisr.records.len(), 20);
    assert_eq!(first_gd, 11);
}

#[test]
fn runs_are_bit_identical() {
    let (_, y, op, noise) = hetero_ir(5, 24);
    let cfg = SolverConfig::ir();
    let (a, _) = pg_dpir(&y, &op, &noise, tv().as_mut(), &cfg).unwrap();
    let (b, _) = pg_dpir(&y, &op, &noise, tv().as_mut(), &cfg).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
}

#[test]
fn dpir_coincides_with_pg_dpir_without_descent_when_homoscedastic() {
    let mut r = rng(6);
    let x = grid(&mut r, 16, 16, 0.1, 0.9);
    let op = DegradationOp::new(kernel3(&mut r), 1).unwrap();
    let noise = NoiseParams::gaussian(0.01).unwrap();
    let y = apply_a(&x, &op).unwrap();
    let no_gd = SolverConfig { phase_split: 1.0, ..SolverConfig::ir() };
    let (a, _) = pg_dpir(&y, &op, &noise, tv().as_mut(), &no_gd).unwrap();
    let (b, trace) = dpir_baseline(&y, &op, &noise, tv().as_mut(), &no_gd).unwrap();
    assert!(a.sub(&b).max_abs() < 1e-8);
    assert_eq!(trace.records.last().unwrap().sigma_d, 0.01);
}

#[test]
fn dpir_uses_mean_luminance_variance() {
    let y = ImageGrid::filled(4, 4, 0.5);
    let v = effective_variance(&y, &NoiseParams::new(0.01, 0.001).unwrap()).unwrap();
    assert!((v.sqrt() - 6e-4f64.sqrt()).abs() < 1e-15);
    let (_, y, op, noise) = hetero_ir(7, 16);
    let (_, trace) = dpir_baseline(&y, &op, &noise, tv().as_mut(), &SolverConfig::ir()).unwrap();
    let last = trace.records.last().unwrap();
    assert_eq!(last.sigma_d, effective_variance(&y, &noise).unwrap().sqrt());
    assert!(trace.records.iter().all(|r| r.inner_steps == 0));
}

#[test]
fn pgd_reaches_least_squares_with_identity_prior() {
    let mut taps = vec![0.05; 9];
    taps[4] = 0.6;
    let op = DegradationOp::new(BlurKernel::new(3, 3, taps, true).unwrap(), 1).unwrap();
    let mut r = rng(8);
    let y = grid(&mut r, 8, 8, 0.0, 1.0);
    let noise = NoiseParams::gaussian(0.1).unwrap();
    let cfg = SolverConfig { pgd: PgdConfig { iterations: 500, ..PgdConfig::default() }, ..SolverConfig::ir() };
    let (x, trace) = pgd_baseline(&y, &op, &noise, identity().as_mut(), &cfg).unwrap();
    assert!(grad_f(&x, &y, &op, &noise).unwrap().norm() < 1e-6);
    assert_eq!(trace.records.len(), 500);
    assert!(trace.fixed_sigma.is_some() && trace.step_size.is_some());
}

#[test]
fn pgd_with_zero_step_keeps_initialization() {
    let (_, y, op, noise) = hetero_ir(9, 16);
    let cfg = SolverConfig { pgd: PgdConfig { eta: Some(0.0), iterations: 7, ..PgdConfig::default() }, ..SolverConfig::ir() };
    let (x, _) = pgd_baseline(&y, &op, &noise, identity().as_mut(), &cfg).unwrap();
    assert_eq!(x, init_estimate(&y, &op, InitMode::BicubicUpsample));
}

#[test]
fn pgd_rejects_step_above_inverse_lipschitz() {
    let (_, y, op, noise) = hetero_ir(10, 16);
    let cfg = SolverConfig { pgd: PgdConfig { eta: Some(1.0), ..PgdConfig::default() }, ..SolverConfig::ir() };
    let err = pgd_baseline(&y, &op, &noise, identity().as_mut(), &cfg).unwrap_err();
    assert!(matches!(err, Error::Parameter(_)), "{err}");
}

#[test]
fn pg_dpir_is_faster_than_pgd_at_default_budgets() {
    let cfg = SolverConfig { pgd: PgdConfig { iterations: 200, ..PgdConfig::default() }, ..SolverConfig::ir() };
    for seed in 0..10 {
        let (_, y, op, noise) = hetero_ir(20 + seed, 32);
        let (_, fast) = pg_dpir(&y, &op, &noise, tv().as_mut(), &cfg).unwrap();
        let (_, slow) = pgd_baseline(&y, &op, &noise, tv().as_mut(), &cfg).unwrap();
        assert!(fast.wall_time() < slow.wall_time(), "seed {seed}: {} vs {}", fast.wall_time(), slow.wall_time());
    }
}

#[test]
fn tv_restoration_beats_measurement_on_nearly_clean_data() {
    for seed in 0..10 {
        let x = generate(TargetKind::Urban, 32, 32, 40 + seed).unwrap();
        let op = DegradationOp::new(BlurKernel::gaussian(1.0, 5).unwrap(), 1).unwrap();
        let noise = NoiseParams::new(1e-3, 1e-5).unwrap();
        let y = sample_exact_pg(&x, &op, &noise, seed).unwrap();
        let (out, _) = pg_dpir(&y, &op, &noise, tv().as_mut(), &SolverConfig::ir()).unwrap();
        let (p_out, p_in) = (psnr(&out, &x, 1.0).unwrap(), psnr(&y, &x, 1.0).unwrap());
        assert!(p_out > p_in, "seed {seed}: {p_out} <= {p_in}");
    }
}

#[test]
fn records_psnr_against_reference() {
    let (x, y, op, noise) = hetero_ir(11, 16);
    let (_, trace) =
        pgdpir::solvers::pg_dpir_with_reference(&y, &op, &noise, tv().as_mut(), &SolverConfig::ir(), Some(&x)).unwrap();
    assert!(trace.records.iter().all(|r| r.psnr.is_some_and(f64::is_finite)));
}

struct Failing;

impl Denoiser for Failing {
    fn denoise(&mut self, _: &ImageGrid, _: f64) -> Result<ImageGrid> {
        Err(Error::Denoiser { message: "boom".into(), stderr: String::new() })
    }

    fn name(&self) -> String {
        "failing".into()
    }
}

#[test]
fn denoiser_failure_carries_iteration() {
    let (_, y, op, noise) = hetero_ir(12, 16);
    let err = pg_dpir(&y, &op, &noise, &mut Failing, &SolverConfig::ir()).unwrap_err();
    assert!(matches!(err, Error::AtIteration { iteration: 1, .. }));
    assert!(matches!(err.root(), Error::Denoiser { .. }));
}

#[test]
fn initial_estimate_for_super_resolution() {
    let op = DegradationOp::new(BlurKernel::delta(), 2).unwrap();
    let c = init_estimate(&ImageGrid::filled(5, 4, 0.37), &op, InitMode::BicubicUpsample);
    assert_eq!(c.dims(), (10, 8));
    assert!(c.as_slice().iter().all(|v| (v - 0.37).abs() < 1e-12));
    let ramp = ImageGrid::from_fn(6, 6, |r, k| 0.1 + 0.05 * r as f64 + 0.02 * k as f64 + 0.003 * (r * k) as f64);
    let up = init_estimate(&ramp, &op, InitMode::BicubicUpsample);
    let truth = ImageGrid::from_fn(12, 12, |r, k| {
        let (a, b) = (r as f64 / 2.0, k as f64 / 2.0);
        0.1 + 0.05 * a + 0.02 * b + 0.003 * a * b
    });
    assert!(up.sub(&truth).max_abs() < 1e-3);
    let y = ImageGrid::filled(3, 3, 0.2);
    assert_eq!(init_estimate(&y, &DegradationOp::identity(), InitMode::BicubicUpsample), y);
}

#[test]
fn config_json_is_strict() {
    let cfg: SolverConfig = serde_json::from_str(r#"{"lambda": 0.3, "n_iters": 4}"#).unwrap();
    assert_eq!((cfg.lambda, cfg.n_iters, cfg.inner_steps), (0.3, 4, 5));
    assert!(serde_json::from_str::<SolverConfig>(r#"{"lamda": 0.3}"#).is_err());
    assert!(SolverConfig { phase_split: 1.5, ..SolverConfig::ir() }.validate().is_err());
}
