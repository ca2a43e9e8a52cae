use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pgdpir::{BlurKernel, DegradationOp};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::NoiseSpec;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fields `restore` cannot run without.
pub const REQUIRED: [&str; 6] = [
    "noise.sigma0",
    "noise.gain_k",
    "operator.kernel",
    "operator.decimation",
    "operator.phase",
    "files.degraded",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelRecord {
    pub height: usize,
    pub width: usize,
    pub anchor: (usize, usize),
    pub taps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorRecord {
    pub kernel: KernelRecord,
    pub decimation: usize,
    pub phase: (usize, usize),
}

impl OperatorRecord {
    pub fn from_op(op: &DegradationOp) -> Self {
        let k = &op.kernel;
        Self {
            kernel: KernelRecord { height: k.height(), width: k.width(), anchor: k.anchor(), taps: k.taps().to_vec() },
            decimation: op.decimation,
            phase: op.phase,
        }
    }

    pub fn to_op(&self) -> Result<DegradationOp, CliError> {
        let k = &self.kernel;
        let kernel = BlurKernel::with_anchor(k.height, k.width, k.taps.clone(), k.anchor, false)?;
        Ok(DegradationOp::new(kernel, self.decimation)?.with_phase(self.phase.0, self.phase.1)?)
    }
}

/// Sidecar written next to every simulated measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub noise: NoiseSpec,
    pub operator: OperatorRecord,
    pub kernel_sha256: String,
    pub config_sha256: String,
    /// Role (`target`, `degraded`) to file name, relative to the manifest.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| CliError::at(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!(
                "cannot read manifest {}: {e}; restore needs a manifest with {}",
                path.display(),
                REQUIRED.join(", ")
            ))
        })?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("manifest {}: {e}", path.display())))?;
        let missing: Vec<&str> = REQUIRED.iter().copied().filter(|f| lookup(&value, f).is_none()).collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!(
                "manifest {} is missing required fields: {}",
                path.display(),
                missing.join(", ")
            )));
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("manifest {}: {e}", path.display())))
    }
}

fn lookup<'a>(v: &'a Value, dotted: &str) -> Option<&'a Value> {
    dotted.split('.').try_fold(v, |acc, key| acc.get(key)).filter(|v| !v.is_null())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn kernel_hash(k: &BlurKernel) -> String {
    let mut bytes = Vec::with_capacity(16 + 8 * k.taps().len());
    bytes.extend_from_slice(&(k.height() as u64).to_le_bytes());
    bytes.extend_from_slice(&(k.width() as u64).to_le_bytes());
    for t in k.taps() {
        bytes.extend_from_slice(&t.to_le_bytes());
    }
    sha256_hex(&bytes)
}

pub fn json_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(serde_json::to_string(value).expect("config serializes").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_record_round_trips_exactly() {
        let op = DegradationOp::new(BlurKernel::gaussian(1.3, 5).unwrap(), 2).unwrap().with_phase(1, 0).unwrap();
        let rec = OperatorRecord::from_op(&op);
        let json = serde_json::to_string(&rec).unwrap();
        let back: OperatorRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_op().unwrap(), op);
    }

    #[test]
    fn missing_fields_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"noise": {"sigma0": 0.01}}"#).unwrap();
        let msg = Manifest::read(&path).unwrap_err().to_string();
        for f in ["noise.gain_k", "operator.kernel", "files.degraded"] {
            assert!(msg.contains(f), "{msg}");
        }
        assert!(!msg.contains("noise.sigma0"));
    }

    #[test]
    fn hash_is_stable_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
