//! Three-lobe approximation of multiple scattering.
//!
//! The full BSDF is the exact single-scattering lobe, plus a second
//! single-scattering lobe of the same stack layout with modified parameters
//! (weight `w1`), plus a Lambertian lobe (weight `w2`). Parameters come from
//! an MLP ([`mlp`]) or a per-material direct fit ([`fit`]).

pub mod fit;
pub mod mlp;

pub use fit::{fit_direct, FitOptions, FitResult};
pub use mlp::{load_weights, mlp_infer, save_weights, Activation, Dense, MlpWeights, RangeMap};

use crate::error::{Error, Result};
use crate::layer::{LayerSpec, LayerStack, SubstrateSpec};
use crate::real::Real;
use crate::single::eval_stack_single;
use crate::spectrum::Spectrum;
use crate::vec3::Vec3;

/// Modified layer parameters plus the two lobe weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLobeParams<R> {
    modified: LayerStack<R>,
    pub w1: R,
    pub w2: R,
    /// Lambertian lobe also covers the transmission hemisphere.
    pub lambert_transmission: bool,
}

impl<R: Real> ThreeLobeParams<R> {
    /// Validates that `modified` keeps the kinds and orientations of
    /// `source` and that both weights are non-negative.
    pub fn new(source: &LayerStack<R>, modified: Vec<LayerSpec<R>>, w1: R, w2: R) -> Result<Self> {
        if modified.len() != source.len() {
            return Err(Error::invalid(
                "modified",
                format!("expected {} layers, got {}", source.len(), modified.len()),
            ));
        }
        for (i, (m, s)) in modified.iter().zip(source.specs()).enumerate() {
            if m.kind != s.kind {
                return Err(Error::invalid(format!("modified[{i}].kind"), "must match the source"));
            }
            if m.orientation != s.orientation {
                return Err(Error::invalid(
                    format!("modified[{i}].orientation"),
                    "must match the source",
                ));
            }
        }
        if !(w1 >= R::zero() && w2 >= R::zero() && w1.is_finite() && w2.is_finite()) {
            return Err(Error::domain("weights", "w1 and w2 must be finite and non-negative"));
        }
        let modified = LayerStack::new(modified, false, SubstrateSpec::None)?;
        Ok(Self {
            modified,
            w1,
            w2,
            lambert_transmission: false,
        })
    }

    /// No added lobes: `eval_full` reduces to single scattering.
    pub fn zero(source: &LayerStack<R>) -> Self {
        let specs = source.specs().into_iter().map(finite_copy).collect();
        Self::new(source, specs, R::zero(), R::zero()).expect("source layers are valid")
    }

    pub fn modified(&self) -> &LayerStack<R> {
        &self.modified
    }

    pub fn modified_layers(&self) -> Vec<LayerSpec<R>> {
        self.modified.specs()
    }

    pub fn with_lambert_transmission(mut self, on: bool) -> Self {
        self.lambert_transmission = on;
        self
    }
}

/// Semi-infinite layers are outside the modified lobe's domain; keep them
/// deep but finite.
fn finite_copy<R: Real>(mut s: LayerSpec<R>) -> LayerSpec<R> {
    if s.thickness.is_infinite() {
        s.thickness = R::from(1e3).unwrap();
    }
    s
}

/// The added lobes only: `w1 f_modified + w2 / pi`.
pub fn eval_added<R: Real>(
    stack: &LayerStack<R>,
    params: &ThreeLobeParams<R>,
    wi: Vec3<R>,
    wo: Vec3<R>,
) -> Spectrum<R> {
    let same_side = (wi.z >= R::zero()) == (wo.z >= R::zero());
    if !stack.is_transmissive() && !(same_side && wi.z >= R::zero()) {
        return Spectrum::zero();
    }
    let mut v = Spectrum::zero();
    if params.w1 > R::zero() {
        v += eval_stack_single(&params.modified, wi, wo) * params.w1;
    }
    if params.w2 > R::zero() && (same_side || params.lambert_transmission) {
        v += Spectrum::splat(params.w2 / R::PI());
    }
    v
}

/// Full BSDF: exact single scattering plus the two added lobes. The delta
/// component is excluded, as in [`eval_stack_single`].
pub fn eval_full<R: Real>(
    stack: &LayerStack<R>,
    params: &ThreeLobeParams<R>,
    wi: Vec3<R>,
    wo: Vec3<R>,
) -> Spectrum<R> {
    eval_stack_single(stack, wi, wo) + eval_added(stack, params, wi, wo)
}
