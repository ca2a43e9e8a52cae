//! Shared fixtures for the criterion benches.

use pgdpir::forward::sample_exact_pg;
use pgdpir::solvers::{init_estimate, SolverConfig};
use pgdpir::synth::{generate, TargetKind};
use pgdpir::{BlurKernel, DegradationOp, NoiseParams, ProxProblem};

/// A data step on an urban target, with the anchor at the initial estimate and
/// a mid-schedule denoiser strength.
pub fn prox_fixture(size: usize, decimation: usize, seed: u64) -> ProxProblem {
    let target = generate(TargetKind::Urban, size, size, seed).unwrap();
    let op = DegradationOp::new(BlurKernel::gaussian(1.0, 7).unwrap(), decimation).unwrap();
    let noise = NoiseParams::new(0.002, 0.0003).unwrap();
    let y = sample_exact_pg(&target, &op, &noise, seed).unwrap();
    let cfg = SolverConfig::for_decimation(decimation);
    let u = init_estimate(&y, &op, cfg.init_mode);
    ProxProblem::from_strength(y, u, cfg.lambda, 0.02, &op, noise).unwrap()
}
