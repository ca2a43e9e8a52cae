//! Warm-start ablation: PG-DPIR with the inner descent started from the
//! fixed-variance prox versus started from the anchor, both run to the same
//! gradient-norm tolerance.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::denoise::DenoiserSpec;
use crate::error::{Error, Result};
use crate::forward::{sample_exact_pg, DegradationOp, NoiseParams};
use crate::grid::ImageGrid;
use crate::kernel::BlurKernel;
use crate::metrics::psnr;
use crate::solvers::{init_estimate, pg_dpir, SolverConfig};
use crate::synth::{generate, TargetKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSettings {
    pub instances: usize,
    /// Side of the square target image.
    pub size: usize,
    pub decimation: usize,
    pub blur_std: f64,
    pub kernel_size: usize,
    pub sigma0: f64,
    pub gain_k: f64,
    pub tolerance: f64,
    pub max_inner_steps: usize,
    pub targets: Vec<TargetKind>,
    pub denoiser: DenoiserSpec,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            instances: 20,
            size: 64,
            decimation: 2,
            blur_std: 1.0,
            kernel_size: 7,
            sigma0: 0.002,
            gain_k: 0.0003,
            tolerance: 1e-6,
            max_inner_steps: 100_000,
            targets: vec![TargetKind::Urban, TargetKind::FilteredNoise],
            denoiser: DenoiserSpec::tv(),
            solver: SolverConfig::sisr(),
            seed: 2024,
        }
    }
}

impl AblationSettings {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::param("instances must be >= 1"));
        }
        if self.targets.is_empty() {
            return Err(Error::param("targets must not be empty"));
        }
        if self.decimation == 0 || self.size % self.decimation != 0 {
            return Err(Error::param("size must be a positive multiple of decimation"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        self.denoiser.validate()?;
        self.solver.validate()
    }

    fn instance_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(index as u64)
    }

    fn variant(&self, prox_init: bool) -> SolverConfig {
        SolverConfig {
            prox_init,
            inner_tolerance: Some(self.tolerance),
            max_inner_steps: self.max_inner_steps,
            ..self.solver.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub instance: usize,
    pub seed: u64,
    pub target: TargetKind,
    pub psnr_input: f64,
    pub psnr_warm: f64,
    pub psnr_cold: f64,
    pub steps_warm: usize,
    pub steps_cold: usize,
    pub time_warm: f64,
    pub time_cold: f64,
    /// `steps_cold / steps_warm`, with the denominator clamped to 1.
    pub ratio: f64,
    /// Set when the warm variant took no inner steps at all.
    pub capped: bool,
}

impl AblationRow {
    pub fn psnr_gap(&self) -> f64 {
        (self.psnr_warm - self.psnr_cold).abs()
    }
}

pub struct Instance {
    pub target: ImageGrid,
    pub measurement: ImageGrid,
    pub op: DegradationOp,
    pub noise: NoiseParams,
    pub kind: TargetKind,
    pub seed: u64,
}

pub fn make_instance(settings: &AblationSettings, index: usize) -> Result<Instance> {
    let seed = settings.instance_seed(index);
    let kind = settings.targets[index % settings.targets.len()];
    let target = generate(kind, settings.size, settings.size, seed)?;
    let kernel = BlurKernel::gaussian(settings.blur_std, settings.kernel_size)?;
    let op = DegradationOp::new(kernel, settings.decimation)?;
    let noise = NoiseParams::new(settings.sigma0, settings.gain_k)?;
    let measurement = sample_exact_pg(&target, &op, &noise, seed ^ 0x5a5a)?;
    Ok(Instance { target, measurement, op, noise, kind, seed })
}

pub fn run_instance(settings: &AblationSettings, index: usize) -> Result<AblationRow> {
    let inst = make_instance(settings, index)?;
    let run = |prox_init: bool| -> Result<(ImageGrid, usize, f64)> {
        let mut den = settings.denoiser.build()?;
        let cfg = settings.variant(prox_init);
        let (x, trace) = pg_dpir(&inst.measurement, &inst.op, &inst.noise, den.as_mut(), &cfg)?;
        Ok((x, trace.total_inner_steps(), trace.wall_time()))
    };
    let (warm, steps_warm, time_warm) = run(true)?;
    let (cold, steps_cold, time_cold) = run(false)?;
    let start = init_estimate(&inst.measurement, &inst.op, settings.solver.init_mode);
    Ok(AblationRow {
        instance: index,
        seed: inst.seed,
        target: inst.kind,
        psnr_input: psnr(&start, &inst.target, 1.0)?,
        psnr_warm: psnr(&warm, &inst.target, 1.0)?,
        psnr_cold: psnr(&cold, &inst.target, 1.0)?,
        steps_warm,
        steps_cold,
        time_warm,
        time_cold,
        ratio: steps_cold as f64 / steps_warm.max(1) as f64,
        capped: steps_warm == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub rows: Vec<AblationRow>,
    pub median_ratio: f64,
    pub max_psnr_gap: f64,
}

pub fn run_ablation(settings: &AblationSettings) -> Result<AblationSummary> {
    settings.validate()?;
    let rows = (0..settings.instances)
        .map(|i| run_instance(settings, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationSummary::from_rows(rows))
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl AblationSummary {
    pub fn from_rows(rows: Vec<AblationRow>) -> Self {
        let median_ratio = median(rows.iter().map(|r| r.ratio).collect());
        let max_psnr_gap = rows.iter().map(AblationRow::psnr_gap).fold(0.0, f64::max);
        Self { rows, median_ratio, max_psnr_gap }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "instance,seed,target,psnr_input,psnr_warm,psnr_cold,steps_warm,steps_cold,time_warm,time_cold,ratio,capped\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{:.4},{:.4},{},{},{:.4},{:.4},{:.3},{}",
                r.instance,
                r.seed,
                r.target,
                r.psnr_input,
                r.psnr_warm,
                r.psnr_cold,
                r.steps_warm,
                r.steps_cold,
                r.time_warm,
                r.time_cold,
                r.ratio,
                r.capped
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>4} {:>15} {:>8} {:>8} {:>8} {:>8} {:>9} {:>8} {:>8} {:>8}\n",
            "#", "target", "psnr_in", "warm", "cold", "gap", "it_warm", "it_cold", "t_warm", "ratio"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>4} {:>15} {:>8.2} {:>8.2} {:>8.2} {:>8.3} {:>9} {:>8} {:>8.2} {:>7.1}{}",
                r.instance,
                r.target.to_string(),
                r.psnr_input,
                r.psnr_warm,
                r.psnr_cold,
                r.psnr_gap(),
                r.steps_warm,
                r.steps_cold,
                r.time_warm,
                r.ratio,
                if r.capped { "+" } else { "x" }
            );
        }
        let _ = writeln!(
            out,
            "median ratio {:.2}x, max PSNR gap {:.4} dB over {} instances",
            self.median_ratio,
            self.max_psnr_gap,
            self.rows.len()
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let row = AblationRow {
            instance: 0,
            seed: 1,
            target: TargetKind::Ramp,
            psnr_input: 20.0,
            psnr_warm: 30.0,
            psnr_cold: 30.01,
            steps_warm: 0,
            steps_cold: 12,
            time_warm: 0.1,
            time_cold: 0.5,
            ratio: 12.0,
            capped: true,
        };
        let s = AblationSummary::from_rows(vec![row.clone(), row]);
        assert_eq!(s.to_csv().lines().count(), 3);
        assert!((s.max_psnr_gap - 0.01).abs() < 1e-9);
        assert!(s.to_table().contains("median ratio 12.00x"));
    }

    #[test]
    fn rejects_bad_settings() {
        let s = AblationSettings { size: 63, ..AblationSettings::default() };
        assert!(s.validate().is_err());
    }
}
