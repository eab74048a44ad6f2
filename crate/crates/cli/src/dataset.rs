//! Random stack configurations and their multiple-scattering tables.
//!
//! Configuration `i` draws its parameters from `task_rng(seed, i)` and its
//! table walks from seed `stream_seed(seed, TABLE_STREAM + i)`, so any entry
//! can be regenerated on its own.

use std::path::{Path, PathBuf};

use flakelayer::oracle::{stream_seed, tabulate, task_rng, DirectionGrid, TabulateConfig, WalkMode};
use flakelayer::{serialize_material, LayerSpec, LayerStack, PhaseKind, Spectrum, SubstrateSpec, Vec3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::params::{read_text, write_text};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
const TABLE_STREAM: u64 = 1_000_000;

/// Sampling ranges. Albedo and f0 are per channel.
pub const ROUGHNESS_RANGE: (f64, f64) = (0.05, 1.0);
pub const THICKNESS_RANGE: (f64, f64) = (0.1, 8.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetConfig {
    pub count: usize,
    pub layers: usize,
    pub res: usize,
    pub spp: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub layers: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub samples_per_wi: u64,
    /// Always "multiple-only": walks with two or more scattering events.
    pub mode: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    /// Table file name relative to the manifest.
    pub table: String,
    /// Material text; parses back to exactly `layers`.
    pub material: String,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub kind: String,
    pub albedo: [f64; 3],
    pub roughness: f64,
    pub f0: [f64; 3],
    pub thickness: f64,
    pub orientation: [f64; 3],
}

impl From<&LayerSpec<f64>> for LayerRecord {
    fn from(l: &LayerSpec<f64>) -> Self {
        Self {
            kind: l.kind.as_str().to_string(),
            albedo: l.albedo.to_array(),
            roughness: l.roughness,
            f0: l.f0.to_array(),
            thickness: l.thickness,
            orientation: l.orientation.to_array(),
        }
    }
}

impl Manifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_NAME);
        serde_json::from_str(&read_text(&path)?)
            .map_err(|e| CliError::Usage(format!("{}: bad manifest: {e}", path.display())))
    }
}

/// Draws one stack configuration.
pub fn sample_stack_config(seed: u64, index: u64, layers: usize) -> LayerStack<f64> {
    let mut rng = task_rng(seed, index).0;
    let specs = (0..layers)
        .map(|_| {
            let kind = if rng.random::<bool>() { PhaseKind::Fiber } else { PhaseKind::Surface };
            let mut unit = || rng.random::<f64>();
            let roughness = ROUGHNESS_RANGE.0 + (ROUGHNESS_RANGE.1 - ROUGHNESS_RANGE.0) * unit();
            let albedo = Spectrum::new(unit(), unit(), unit());
            let f0 = Spectrum::new(unit(), unit(), unit());
            let thickness = THICKNESS_RANGE.0 + (THICKNESS_RANGE.1 - THICKNESS_RANGE.0) * unit();
            // uniform on the upper hemisphere: cos uniform in [0, 1]
            let orientation = Vec3::from_spherical(unit(), std::f64::consts::TAU * unit());
            LayerSpec::new(kind, albedo, roughness, f0, thickness, orientation)
        })
        .collect();
    LayerStack::new(specs, false, SubstrateSpec::None).expect("sampled parameters are in range")
}

/// Writes `count` tables and the manifest into `dir`.
pub fn generate(cfg: &DatasetConfig, dir: &Path) -> CliResult<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    let grid = DirectionGrid::square(cfg.res);
    let entries = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let stack = sample_stack_config(cfg.seed, i as u64, cfg.layers);
            let material = serialize_material(&stack);
            let tcfg = TabulateConfig::new(
                grid,
                cfg.spp,
                WalkMode::MultipleOnly,
                stream_seed(cfg.seed, TABLE_STREAM + i as u64),
            );
            let table = tabulate(&stack, material.clone(), &tcfg);
            let name = format!("{i:05}.sptb");
            let path: PathBuf = dir.join(&name);
            let f = std::fs::File::create(&path).map_err(|e| CliError::io(path.display().to_string(), e))?;
            table
                .write_to(std::io::BufWriter::new(f))
                .map_err(|e| CliError::from_core(path.display().to_string(), e))?;
            Ok(ManifestEntry {
                index: i,
                table: name,
                material,
                layers: stack.specs().iter().map(LayerRecord::from).collect(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: cfg.seed,
        layers: cfg.layers,
        n_theta: cfg.res,
        n_phi: cfg.res,
        samples_per_wi: cfg.spp,
        mode: "multiple-only".into(),
        entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialize");
    write_text(&dir.join(MANIFEST_NAME), &(text + "\n"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_stay_in_range_and_repeat() {
        for i in 0..200 {
            let s = sample_stack_config(5, i, 2);
            assert_eq!(s, sample_stack_config(5, i, 2));
            for l in s.specs() {
                assert!((0.05..=1.0).contains(&l.roughness));
                assert!((0.1..=8.0).contains(&l.thickness));
                assert!(l.albedo.in_unit_range() && l.f0.in_unit_range());
                assert!(l.orientation.z >= 0.0);
            }
        }
        assert_ne!(sample_stack_config(5, 0, 1), sample_stack_config(6, 0, 1));
    }
}
