//! Deterministic spherical quadrature.
//!
//! Midpoint rule on a grid that is uniform in `(cos theta, phi)`, so every
//! cell has the same solid angle `4 pi / (n_cos n_phi)`.

use rayon::prelude::*;

use crate::layer::LayerStack;
use crate::single::{delta_transmittance, eval_stack_single};
use crate::spectrum::Spectrum;
use crate::vec3::Vec3;

/// `\int_{S^2} f(w) dw`.
pub fn integrate_sphere<F>(f: F, n_cos: usize, n_phi: usize) -> f64
where
    F: Fn(Vec3<f64>) -> f64 + Sync,
{
    integrate_band(f, -1.0, 1.0, n_cos, n_phi)
}

/// Integral over the band `cos theta in [lo, hi]`.
pub fn integrate_band<F>(f: F, lo: f64, hi: f64, n_cos: usize, n_phi: usize) -> f64
where
    F: Fn(Vec3<f64>) -> f64 + Sync,
{
    let dc = (hi - lo) / n_cos as f64;
    let dp = 2.0 * std::f64::consts::PI / n_phi as f64;
    let sum: f64 = (0..n_cos)
        .into_par_iter()
        .map(|i| {
            let c = lo + (i as f64 + 0.5) * dc;
            (0..n_phi)
                .map(|j| f(Vec3::from_spherical(c, (j as f64 + 0.5) * dp)))
                .sum::<f64>()
        })
        .sum();
    sum * dc * dp
}

/// Channel-wise `\int_{S^2} f(w) dw`.
pub fn integrate_sphere_rgb<F>(f: F, n_cos: usize, n_phi: usize) -> Spectrum<f64>
where
    F: Fn(Vec3<f64>) -> Spectrum<f64> + Sync,
{
    let dc = 2.0 / n_cos as f64;
    let dp = 2.0 * std::f64::consts::PI / n_phi as f64;
    let sum = (0..n_cos)
        .into_par_iter()
        .map(|i| {
            let c = -1.0 + (i as f64 + 0.5) * dc;
            (0..n_phi).fold(Spectrum::zero(), |acc, j| {
                acc + f(Vec3::from_spherical(c, (j as f64 + 0.5) * dp))
            })
        })
        .reduce(Spectrum::zero, |a, b| a + b);
    sum * (dc * dp)
}

/// Directional albedo of the analytic single-scattering BSDF under unit
/// incident irradiance, both hemispheres, plus the delta component when the
/// stack enables it.
pub fn single_scatter_albedo(
    stack: &LayerStack<f64>,
    wi: Vec3<f64>,
    n_cos: usize,
    n_phi: usize,
) -> Spectrum<f64> {
    let scattered = integrate_sphere_rgb(
        |wo| eval_stack_single(stack, wi, wo) * wo.z.abs(),
        n_cos,
        n_phi,
    );
    if stack.delta_enabled() {
        scattered + delta_transmittance(stack, wi)
    } else {
        scattered
    }
}
