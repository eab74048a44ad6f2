//! Directional albedo against incidence angle.

use flakelayer::multiscatter::{eval_full, ThreeLobeParams};
use flakelayer::oracle::{furnace_albedo, WalkMode};
use flakelayer::quadrature::{integrate_sphere_rgb, single_scatter_albedo};
use flakelayer::single::delta_transmittance;
use flakelayer::{LayerStack, Spectrum, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FurnaceMode {
    /// Quadrature of the single-scattering lobe plus unscattered light.
    SingleDelta,
    /// Quadrature of the three-lobe model plus unscattered light.
    Full,
    /// Random walks, every exiting path counted.
    McFull,
    /// Random walks, single-bounce paths only.
    McSingle,
}

pub const MAX_ANGLE_DEG: f64 = 75.0;
const QUAD: (usize, usize) = (1024, 512);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FurnaceRow {
    pub theta_deg: f64,
    pub albedo: Spectrum<f64>,
}

/// Evaluates `steps` incidence angles evenly spaced over `[0, 75]` degrees.
pub fn sweep(
    stack: &LayerStack<f64>,
    params: &ThreeLobeParams<f64>,
    mode: FurnaceMode,
    steps: usize,
    walks: u64,
    seed: u64,
) -> Vec<FurnaceRow> {
    // unscattered light is part of the energy balance for transmissive stacks
    let lit = if stack.is_transmissive() {
        stack.clone().with_delta(true).expect("transmissive stacks accept delta")
    } else {
        stack.clone()
    };
    (0..steps)
        .map(|k| {
            let theta_deg = if steps > 1 {
                MAX_ANGLE_DEG * k as f64 / (steps - 1) as f64
            } else {
                0.0
            };
            let wi = Vec3::from_spherical(theta_deg.to_radians().cos(), 0.0);
            let albedo = match mode {
                FurnaceMode::SingleDelta => single_scatter_albedo(&lit, wi, QUAD.0, QUAD.1),
                FurnaceMode::Full => {
                    let scattered = integrate_sphere_rgb(
                        |wo| eval_full(&lit, params, wi, wo) * wo.z.abs(),
                        QUAD.0,
                        QUAD.1,
                    );
                    if lit.delta_enabled() {
                        scattered + delta_transmittance(&lit, wi)
                    } else {
                        scattered
                    }
                }
                FurnaceMode::McFull => furnace_albedo(&lit, wi, walks, WalkMode::FullDelta, seed).albedo,
                FurnaceMode::McSingle => furnace_albedo(&lit, wi, walks, WalkMode::SingleOnly, seed).albedo,
            };
            FurnaceRow { theta_deg, albedo }
        })
        .collect()
}
