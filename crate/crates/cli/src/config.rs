use std::fs;
use std::path::{Path, PathBuf};

use pgdpir::ablation::AblationSettings;
use pgdpir::io::load_image;
use pgdpir::solvers::{Method, SolverConfig};
use pgdpir::synth::TargetKind;
use pgdpir::{BlurKernel, DegradationOp, DenoiserSpec, NoiseParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Deblurring, no decimation.
    Ir,
    /// Deblurring plus 2x decimation.
    Sisr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Delta,
    Box { size: usize },
    Gaussian { std: f64, size: usize },
    /// Any image file readable by the library; taps are normalized to unit sum.
    File { path: PathBuf },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Gaussian { std: 1.0, size: 7 }
    }
}

impl KernelSpec {
    pub fn build(&self, base: &Path) -> Result<BlurKernel, CliError> {
        let k = match self {
            KernelSpec::Delta => BlurKernel::delta(),
            KernelSpec::Box { size } => BlurKernel::box_blur(*size)?,
            KernelSpec::Gaussian { std, size } => BlurKernel::gaussian(*std, *size)?,
            KernelSpec::File { path } => {
                let path = base.join(path);
                let img = load_image(&path).map_err(|e| CliError::at(&path, e))?;
                BlurKernel::normalized(img.height(), img.width(), img.into_vec())?
            }
        };
        Ok(k)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSpec {
    pub kernel: KernelSpec,
    /// Defaults to 1 for `ir` and 2 for `sisr`.
    pub decimation: Option<usize>,
    pub phase: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma0: f64,
    pub gain_k: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { sigma0: 0.002, gain_k: 0.0003 }
    }
}

impl NoiseSpec {
    pub fn params(&self) -> Result<NoiseParams, CliError> {
        NoiseParams::new(self.sigma0, self.gain_k).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    pub operator: OperatorSpec,
    pub noise: NoiseSpec,
    /// Defaults depend on `problem`.
    pub solver: Option<SolverConfig>,
    pub denoiser: DenoiserSpec,
    pub method: Method,
    pub seed: u64,
    /// Image path, or `synth:<kind>` for a generated target.
    pub target: Option<String>,
    /// Side length of generated targets.
    pub size: usize,
    pub ablation: AblationSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Ir,
            operator: OperatorSpec::default(),
            noise: NoiseSpec::default(),
            solver: None,
            denoiser: DenoiserSpec::tv(),
            method: Method::PgDpir,
            seed: 0,
            target: None,
            size: 128,
            ablation: AblationSettings::default(),
        }
    }
}

pub enum TargetSource {
    File(PathBuf),
    Synthetic(TargetKind),
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<(Self, PathBuf), CliError> {
        let Some(path) = path else {
            return Ok((Self::default(), PathBuf::from(".")));
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        cfg.validate()?;
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = self.decimation();
        match (self.problem, s) {
            (Problem::Ir, 1) | (Problem::Sisr, 2..) => {}
            (p, s) => {
                return Err(CliError::Config(format!("decimation {s} does not fit problem {p:?}")));
            }
        }
        self.noise.params()?;
        self.solver().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.denoiser.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn decimation(&self) -> usize {
        self.operator.decimation.unwrap_or(match self.problem {
            Problem::Ir => 1,
            Problem::Sisr => 2,
        })
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_else(|| SolverConfig::for_decimation(self.decimation()))
    }

    pub fn operator(&self, base: &Path) -> Result<DegradationOp, CliError> {
        let kernel = self.operator.kernel.build(base)?;
        let (r, c) = self.operator.phase;
        Ok(DegradationOp::new(kernel, self.decimation())?.with_phase(r, c)?)
    }

    pub fn target_source(&self, base: &Path) -> Result<TargetSource, CliError> {
        let Some(t) = &self.target else {
            return Err(CliError::Config("no target: pass --target or set \"target\" in the config".into()));
        };
        match t.strip_prefix("synth:") {
            Some(kind) => kind
                .parse()
                .map(TargetSource::Synthetic)
                .map_err(|e: pgdpir::Error| CliError::Config(e.to_string())),
            None => Ok(TargetSource::File(base.join(t))),
        }
    }
}
