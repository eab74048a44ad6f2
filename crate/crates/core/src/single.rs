//! Exact analytic single scattering through a stack of layers.
//!
//! For one layer of optical depth `T` the single-scattering BSDF is the depth
//! integral of the reduced phase function attenuated along both legs:
//!
//! ```text
//! reflect:  f = fp^(wi,wo) / (|ci| |co|) * (1 - exp(-T s)) / s
//! transmit: f = fp^(wi,wo) / (|ci| |co|) * (1 - exp(-T s)) / s * exp(T Lo)
//! ```
//!
//! with `L(w) = sigma(w) / cos(w)` (negative below the horizon) and
//! `s = Li + Lo`. Multiple layers add one such lobe per layer, each attenuated
//! by the layers the two legs cross on their way in and out.

use crate::error::{Error, Result};
use crate::layer::{Layer, LayerSpec, LayerStack, SubstrateSpec};
use crate::microflake::clamp_cos;
use crate::real::{lit, Real};
use crate::spectrum::Spectrum;
use crate::vec3::Vec3;

/// Below this `|s|` the ratio `(1 - e^{-Ts}) / s` switches to its series.
pub const SERIES_THRESHOLD: f64 = 1e-6;

/// `(1 - e^{-T s}) / s`, the depth integral of `e^{-t s}` over `[0, T]`.
/// Infinite `T` with `s > 0` gives `1 / s`.
pub fn depth_integral<R: Real>(t: R, s: R) -> R {
    if t.is_infinite() {
        return if s > R::zero() { R::one() / s } else { R::infinity() };
    }
    if s.abs() < lit(SERIES_THRESHOLD) {
        return depth_integral_series(t, s);
    }
    -(-t * s).exp_m1() / s
}

/// Second-order series of the depth integral around `s = 0`:
/// `T (1 - Ts/2 + (Ts)^2/6)`.
pub fn depth_integral_series<R: Real>(t: R, s: R) -> R {
    let x = t * s;
    t * (R::one() - x / lit(2.0) + x * x / lit(6.0))
}

/// Reflection shadowing term `G` for optical depth `t`.
pub fn shadowing_reflect<R: Real>(t: R, lambda_i: R, lambda_o: R) -> R {
    depth_integral(t, lambda_i + lambda_o)
}

/// Transmission shadowing term `e^{t lambda_o} (1 - e^{-t s}) / s` with
/// `s = lambda_i + lambda_o`; `lambda_o` is negative. Zero for a
/// semi-infinite layer.
///
/// Evaluated as `e^{-t min(lambda_i, -lambda_o)} (1 - e^{-t |s|}) / |s|`,
/// which is the same quantity without overflow at grazing angles.
pub fn shadowing_transmit<R: Real>(t: R, lambda_i: R, lambda_o: R) -> R {
    if t.is_infinite() {
        return R::zero();
    }
    let s = lambda_i + lambda_o;
    (-t * lambda_i.min(-lambda_o)).exp() * depth_integral(t, s.abs())
}

pub(crate) fn layer_reflect<R: Real>(layer: &Layer<R>, wi: Vec3<R>, wo: Vec3<R>) -> Spectrum<R> {
    let ci = clamp_cos(wi.z).abs();
    let co = clamp_cos(wo.z).abs();
    let g = shadowing_reflect(layer.thickness(), layer.sigma(wi) / ci, layer.sigma(wo) / co);
    layer.reduced_phase(wi, wo) * (g / (ci * co))
}

pub(crate) fn layer_transmit<R: Real>(layer: &Layer<R>, wi: Vec3<R>, wo: Vec3<R>) -> Spectrum<R> {
    let ci = clamp_cos(wi.z).abs();
    let co = clamp_cos(wo.z).abs();
    let g = shadowing_transmit(layer.thickness(), layer.sigma(wi) / ci, -layer.sigma(wo) / co);
    layer.reduced_phase(wi, wo) * (g / (ci * co))
}

/// Single-scattering BRDF of one layer, `wi` and `wo` on the same side.
/// A pair below the horizon is evaluated in the mirrored frame.
pub fn eval_layer_reflect<R: Real>(
    layer: &LayerSpec<R>,
    wi: Vec3<R>,
    wo: Vec3<R>,
) -> Result<Spectrum<R>> {
    if (wi.z < R::zero()) != (wo.z < R::zero()) {
        return Err(Error::domain("wo", "reflection needs both directions on one side"));
    }
    let stack = LayerStack::single(*layer)?;
    if wi.z < R::zero() {
        let m = stack.mirrored();
        return Ok(layer_reflect(&m.layers()[0], wi.flip_z(), wo.flip_z()));
    }
    Ok(layer_reflect(&stack.layers()[0], wi, wo))
}

/// Single-scattering BTDF of one layer, `wi` above and `wo` below.
pub fn eval_layer_transmit<R: Real>(
    layer: &LayerSpec<R>,
    wi: Vec3<R>,
    wo: Vec3<R>,
) -> Result<Spectrum<R>> {
    if !(wi.z > R::zero() && wo.z < R::zero()) {
        return Err(Error::domain("wo", "transmission needs wi above and wo below"));
    }
    let l = Layer::new(*layer)?;
    Ok(layer_transmit(&l, wi, wo))
}

/// Optical depth `T sigma(w) / |cos w|` of a single layer along `w`.
#[inline]
pub(crate) fn layer_optical_depth<R: Real>(layer: &Layer<R>, w: Vec3<R>) -> R {
    let c = clamp_cos(w.z).abs();
    layer.thickness() * layer.sigma(w) / c
}

/// Transmittance from layer `k` to the outside along `w`: through the layers
/// above `k` when `w` points up, below `k` when it points down.
pub fn attenuation<R: Real>(stack: &LayerStack<R>, k: usize, w: Vec3<R>) -> R {
    let layers = stack.layers();
    let crossed = if w.z >= R::zero() {
        &layers[..k.min(layers.len())]
    } else {
        &layers[(k + 1).min(layers.len())..]
    };
    let od: R = crossed.iter().map(|l| layer_optical_depth(l, w)).sum();
    (-od).exp()
}

/// Optical depth of the whole stack along `w`.
pub(crate) fn total_optical_depth<R: Real>(stack: &LayerStack<R>, w: Vec3<R>) -> R {
    stack.layers().iter().map(|l| layer_optical_depth(l, w)).sum()
}

/// Unscattered straight-through transmittance along `-wi`. Zero when light
/// cannot leave through the bottom (semi-infinite slab or opaque substrate).
pub fn delta_transmittance<R: Real>(stack: &LayerStack<R>, wi: Vec3<R>) -> Spectrum<R> {
    if !stack.is_transmissive() {
        return Spectrum::zero();
    }
    Spectrum::splat((-total_optical_depth(stack, wi)).exp())
}

/// Single-scattering BSDF of the stack, delta component excluded.
///
/// `wi` below the horizon is handled by mirroring the stack. Stacks on an
/// opaque substrate only respond to pairs in the upper hemisphere.
pub fn eval_stack_single<R: Real>(stack: &LayerStack<R>, wi: Vec3<R>, wo: Vec3<R>) -> Spectrum<R> {
    if wi.z < R::zero() {
        if !stack.substrate().is_none() {
            return Spectrum::zero();
        }
        return eval_upper(&stack.mirrored(), wi.flip_z(), wo.flip_z());
    }
    eval_upper(stack, wi, wo)
}

fn eval_upper<R: Real>(stack: &LayerStack<R>, wi: Vec3<R>, wo: Vec3<R>) -> Spectrum<R> {
    let mut sum = Spectrum::zero();
    if wo.z >= R::zero() {
        // optical depth accumulated above the current layer, both legs
        let mut od = R::zero();
        for layer in stack.layers() {
            let tau = (-od).exp();
            if tau > R::zero() {
                sum += layer_reflect(layer, wi, wo) * tau;
            }
            od += layer_optical_depth(layer, wi) + layer_optical_depth(layer, wo);
        }
        if let SubstrateSpec::Lambertian { albedo } = stack.substrate() {
            sum += *albedo * ((-od).exp() / R::PI());
        }
    } else if stack.is_transmissive() {
        let depth_o: Vec<R> = stack
            .layers()
            .iter()
            .map(|l| layer_optical_depth(l, wo))
            .collect();
        let mut above_i = R::zero();
        let mut below_o: R = depth_o.iter().copied().sum();
        for (layer, d_o) in stack.layers().iter().zip(depth_o) {
            below_o -= d_o;
            let tau = (-(above_i + below_o.max(R::zero()))).exp();
            if tau > R::zero() {
                sum += layer_transmit(layer, wi, wo) * tau;
            }
            above_i += layer_optical_depth(layer, wi);
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::PhaseKind;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn iso(albedo: f64, t: f64) -> LayerSpec<f64> {
        LayerSpec::isotropic(albedo, t)
    }

    #[test]
    fn chandrasekhar_example() {
        let wi = Vec3::from_spherical(0.5, 0.0);
        let wo = Vec3::unit_z();
        let v = eval_layer_reflect(&iso(0.8, f64::INFINITY), wi, wo).unwrap();
        assert!(rel(v.r, 0.8 / (4.0 * PI * 1.5)) < 1e-12);
        assert!((v.r - 0.042441).abs() < 5e-7);
    }

    #[test]
    fn finite_reflection_example() {
        let z = Vec3::unit_z();
        let v = eval_layer_reflect(&iso(1.0, 1.0), z, z).unwrap();
        let g = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!(rel(g, 0.432332) < 1e-6);
        assert!(rel(v.g, g / (4.0 * PI)) < 1e-12);
        assert!((v.g - 0.034404).abs() < 5e-7);
    }

    #[test]
    fn grazing_transmission_stays_finite() {
        let wi = Vec3::from_spherical(0.95, 0.3);
        let wo = Vec3::from_spherical(-1.25e-3, 0.0);
        let v = eval_layer_transmit(&iso(1.0, 1.0), wi, wo).unwrap();
        assert!(v.is_finite() && v.r > 0.0, "{v:?}");
        // direct form where it does not overflow
        let (li, lo): (f64, f64) = (1.0 / 0.95, -1.0 / 0.5);
        let direct = depth_integral(1.0, li + lo) * lo.exp();
        assert!(rel(shadowing_transmit(1.0, li, lo), direct) < 1e-13);
    }

    #[test]
    fn thin_layer_is_linear_in_thickness() {
        let wi = Vec3::from_spherical(0.6, 0.0);
        let wo = Vec3::from_spherical(0.8, 2.0);
        let a = eval_layer_reflect(&iso(1.0, 1e-6), wi, wo).unwrap().r;
        let b = eval_layer_reflect(&iso(1.0, 2e-6), wi, wo).unwrap().r;
        assert!(rel(b, 2.0 * a) < 1e-5);
        assert!(a < 1e-6);
    }

    #[test]
    fn transmission_singular_limit() {
        let z = Vec3::unit_z();
        let v = eval_layer_transmit(&iso(1.0, 1.0), z, -z).unwrap();
        let expected = (-1.0f64).exp() / (4.0 * PI);
        assert!(rel(v.b, expected) < 1e-12);
        assert!((v.b - 0.029275).abs() < 5e-7);
        let thin = eval_layer_transmit(&iso(1.0, 1e-9), z, -z).unwrap();
        assert!(thin.r < 1e-9);
        let up = eval_layer_reflect(&iso(1.0, 1.0), z, -z);
        assert!(up.is_err());
    }

    #[test]
    fn depth_integral_branches_agree() {
        for t in [0.1f64, 1.0, 5.0] {
            for s in [1e-7, -1e-7, 2e-6, -2e-6] {
                let exact = -(-t * s).exp_m1() / s;
                let v = depth_integral(t, s);
                assert!(rel(v, exact) < 1e-12, "t={t} s={s}");
            }
        }
        assert_eq!(depth_integral(f64::INFINITY, 0.5), 2.0);
    }

    #[test]
    fn attenuation_examples() {
        let stack =
            LayerStack::new(vec![iso(1.0, 1.0), iso(1.0, 1.0)], false, SubstrateSpec::None)
                .unwrap();
        let z = Vec3::unit_z();
        assert_eq!(attenuation(&stack, 0, z), 1.0);
        assert!(rel(attenuation(&stack, 1, z), (-1.0f64).exp()) < 1e-12);
        let w = Vec3::from_spherical(0.5, 0.3);
        assert!(rel(attenuation(&stack, 1, w), (-2.0f64).exp()) < 1e-12);
        // downward legs cross the layers below
        assert!(rel(attenuation(&stack, 0, -z), (-1.0f64).exp()) < 1e-12);
        assert_eq!(attenuation(&stack, 1, -z), 1.0);
    }

    #[test]
    fn delta_examples() {
        let z = Vec3::unit_z();
        let one = LayerStack::single(iso(1.0, 1.0)).unwrap();
        assert!(rel(delta_transmittance(&one, z).r, (-1.0f64).exp()) < 1e-12);
        let thin = LayerStack::single(iso(1.0, 1e-12)).unwrap();
        assert!((delta_transmittance(&thin, z).r - 1.0).abs() < 1e-11);
        let fiber = LayerSpec::new(
            PhaseKind::Fiber,
            Spectrum::one(),
            0.5,
            Spectrum::one(),
            2.0,
            Vec3::unit_z(),
        );
        let f = LayerStack::single(fiber).unwrap();
        assert!(rel(delta_transmittance(&f, z).g, (-1.0f64).exp()) < 1e-12);
        let semi = LayerStack::single(iso(1.0, f64::INFINITY)).unwrap();
        assert_eq!(delta_transmittance(&semi, z).r, 0.0);
    }

    #[test]
    fn single_layer_stack_matches_layer() {
        let spec = LayerSpec::new(
            PhaseKind::Fiber,
            Spectrum::new(0.9, 0.5, 0.3),
            0.3,
            Spectrum::splat(0.2),
            1.7,
            Vec3::new(0.3, 0.2, 0.9),
        );
        let stack = LayerStack::single(spec).unwrap();
        let wi = Vec3::from_spherical(0.4, 0.2);
        let wo = Vec3::from_spherical(0.7, 2.8);
        assert_eq!(
            eval_stack_single(&stack, wi, wo),
            eval_layer_reflect(&spec, wi, wo).unwrap()
        );
        let wt = Vec3::from_spherical(-0.7, 2.8);
        assert_eq!(
            eval_stack_single(&stack, wi, wt),
            eval_layer_transmit(&spec, wi, wt).unwrap()
        );
    }

    #[test]
    fn split_layers_match_whole() {
        let whole = LayerStack::single(iso(1.0, 1.0)).unwrap();
        let split =
            LayerStack::new(vec![iso(1.0, 0.5), iso(1.0, 0.5)], false, SubstrateSpec::None)
                .unwrap();
        for (ci, co) in [(0.3, 0.9), (0.8, 0.2), (0.5, -0.4), (0.9, -0.95)] {
            let wi = Vec3::from_spherical(ci, 0.4);
            let wo = Vec3::from_spherical(co, 2.0);
            let a = eval_stack_single(&whole, wi, wo).r;
            let b = eval_stack_single(&split, wi, wo).r;
            assert!(rel(a, b) < 1e-9, "{ci} {co}: {a} vs {b}");
        }
    }

    #[test]
    fn substrate_is_attenuated_both_ways() {
        let sub = SubstrateSpec::Lambertian {
            albedo: Spectrum::splat(0.5),
        };
        let stack = LayerStack::new(vec![iso(0.0, 1.0)], false, sub).unwrap();
        let wi = Vec3::from_spherical(0.5, 0.0);
        let wo = Vec3::unit_z();
        let v = eval_stack_single(&stack, wi, wo).r;
        assert!(rel(v, 0.5 / PI * (-2.0f64).exp() * (-1.0f64).exp()) < 1e-12);
        // opaque: nothing below the horizon
        assert_eq!(eval_stack_single(&stack, wi, -wo).r, 0.0);
        assert_eq!(eval_stack_single(&stack, -wi, wo).r, 0.0);
    }
}
