//! Material and parameter files.

use std::path::Path;

use flakelayer::multiscatter::{load_weights, mlp_infer, ThreeLobeParams};
use flakelayer::{parse_material, serialize_material, LayerStack};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
}

pub fn load_material(path: &Path) -> CliResult<LayerStack<f64>> {
    let text = read_text(path)?;
    parse_material(&text).map_err(|e| CliError::from_core(path.display().to_string(), e))
}

/// Three-lobe parameters on disk, as JSON. The modified layers are stored as
/// material text so they go through the same parser as any material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub w1: f64,
    pub w2: f64,
    #[serde(default)]
    pub lambert_transmission: bool,
    pub modified_material: String,
}

impl ParamsFile {
    pub fn from_params(p: &ThreeLobeParams<f64>) -> Self {
        Self {
            w1: p.w1,
            w2: p.w2,
            lambert_transmission: p.lambert_transmission,
            modified_material: serialize_material(p.modified()),
        }
    }

    pub fn into_params(self, source: &LayerStack<f64>) -> CliResult<ThreeLobeParams<f64>> {
        let modified = parse_material(&self.modified_material)
            .map_err(|e| CliError::from_core("params modified_material", e))?;
        ThreeLobeParams::new(source, modified.specs(), self.w1, self.w2)
            .map(|p| p.with_lambert_transmission(self.lambert_transmission))
            .map_err(|e| CliError::from_core("params", e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: bad params file: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("params serialize");
        write_text(path, &(text + "\n"))
    }
}

/// Parameters for the added lobes: an explicit params file wins over the
/// network, and with neither the added lobes are zero.
pub fn resolve_params(
    stack: &LayerStack<f64>,
    params: Option<&Path>,
    weights: Option<&Path>,
) -> CliResult<ThreeLobeParams<f64>> {
    if let Some(p) = params {
        return ParamsFile::load(p)?.into_params(stack);
    }
    if let Some(w) = weights {
        let net = load_weights(w).map_err(|e| CliError::from_core(w.display().to_string(), e))?;
        return mlp_infer(&net, stack).map_err(|e| CliError::from_core("network inference", e));
    }
    Ok(ThreeLobeParams::zero(stack))
}
