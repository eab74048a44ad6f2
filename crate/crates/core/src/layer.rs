//! Material description: volumetric layers, the optional substrate and the
//! stack that orders them.

use crate::error::{Error, Result};
use crate::microflake::{
    check_hg, flake_phase, forward_ndf, half_vector, hg_phase, projected_area, schlick, sggx_matrix, sggx_ndf,
    FlakeKind, SggxMatrix,
};
use crate::real::{lit, Real};
use crate::spectrum::Spectrum;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseKind {
    Fiber,
    Surface,
    /// Henyey-Greenstein; `roughness` holds the mean cosine `g`.
    Hg,
}

impl PhaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseKind::Fiber => "fiber",
            PhaseKind::Surface => "surface",
            PhaseKind::Hg => "hg",
        }
    }

    pub fn flake(self) -> Option<FlakeKind> {
        match self {
            PhaseKind::Fiber => Some(FlakeKind::Fiber),
            PhaseKind::Surface => Some(FlakeKind::Surface),
            PhaseKind::Hg => None,
        }
    }
}

/// Parameters of one homogeneous layer. Density is folded into `thickness`,
/// which is the optical depth; `f64::INFINITY` marks a semi-infinite slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec<R> {
    pub kind: PhaseKind,
    pub albedo: Spectrum<R>,
    pub roughness: R,
    pub f0: Spectrum<R>,
    pub thickness: R,
    pub orientation: Vec3<R>,
}

impl<R: Real> LayerSpec<R> {
    pub fn new(
        kind: PhaseKind,
        albedo: Spectrum<R>,
        roughness: R,
        f0: Spectrum<R>,
        thickness: R,
        orientation: Vec3<R>,
    ) -> Self {
        Self {
            kind,
            albedo,
            roughness,
            f0,
            thickness,
            orientation,
        }
    }

    /// Isotropic flake layer (`alpha = 1`) without Fresnel.
    pub fn isotropic(albedo: R, thickness: R) -> Self {
        Self::new(
            PhaseKind::Surface,
            Spectrum::splat(albedo),
            R::one(),
            Spectrum::one(),
            thickness,
            Vec3::unit_z(),
        )
    }

    pub fn is_semi_infinite(&self) -> bool {
        self.thickness.is_infinite()
    }

    pub fn cast<S: Real>(&self) -> LayerSpec<S> {
        LayerSpec {
            kind: self.kind,
            albedo: self.albedo.cast(),
            roughness: S::from(self.roughness).unwrap_or_else(S::nan),
            f0: self.f0.cast(),
            thickness: S::from(self.thickness).unwrap_or_else(S::nan),
            orientation: self.orientation.cast(),
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let at = |f: &str| format!("{path}.{f}");
        if !self.albedo.in_unit_range() {
            return Err(Error::invalid(at("albedo"), "channels must lie in [0, 1]"));
        }
        if !self.f0.in_unit_range() {
            return Err(Error::invalid(at("f0"), "channels must lie in [0, 1]"));
        }
        if !(self.thickness > R::zero()) || self.thickness.is_nan() {
            return Err(Error::invalid(
                at("thickness"),
                "must be positive (finite or inf)",
            ));
        }
        match self.kind {
            PhaseKind::Hg => check_hg(self.roughness).map_err(|e| Error::invalid(at("roughness"), e.to_string()))?,
            _ => {
                if !(self.roughness > R::zero() && self.roughness <= R::one()) {
                    return Err(Error::invalid(
                        at("roughness"),
                        "flake roughness must lie in (0, 1]",
                    ));
                }
                if !self.orientation.is_finite() || self.orientation.try_normalize().is_none() {
                    return Err(Error::invalid(at("orientation"), "zero-length or non-finite"));
                }
            }
        }
        Ok(())
    }
}

/// Angular part of a layer's scattering, resolved once at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase<R> {
    Flake(SggxMatrix<R>),
    Hg(R),
}

/// A validated layer with its phase function precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer<R> {
    spec: LayerSpec<R>,
    phase: Phase<R>,
}

impl<R: Real> Layer<R> {
    pub fn new(spec: LayerSpec<R>) -> Result<Self> {
        spec.validate("layer")?;
        Self::build(spec)
    }

    fn build(mut spec: LayerSpec<R>) -> Result<Self> {
        let phase = match spec.kind.flake() {
            Some(kind) => {
                // already-unit vectors are kept bit-exact so text round trips
                if !spec.orientation.is_unit(R::epsilon() * lit(4.0)) {
                    spec.orientation = spec.orientation.normalize();
                }
                Phase::Flake(sggx_matrix(kind, spec.roughness, spec.orientation)?)
            }
            None => Phase::Hg(spec.roughness),
        };
        Ok(Self { spec, phase })
    }

    pub fn spec(&self) -> &LayerSpec<R> {
        &self.spec
    }

    pub fn phase(&self) -> &Phase<R> {
        &self.phase
    }

    pub fn thickness(&self) -> R {
        self.spec.thickness
    }

    /// Projected area; 1 for Henyey-Greenstein media.
    #[inline]
    pub fn sigma(&self, w: Vec3<R>) -> R {
        match &self.phase {
            Phase::Flake(s) => projected_area(s, w),
            Phase::Hg(_) => R::one(),
        }
    }

    /// Phase function value.
    #[inline]
    pub fn phase_value(&self, wi: Vec3<R>, wo: Vec3<R>) -> R {
        match &self.phase {
            Phase::Flake(s) => flake_phase(s, wi, wo),
            Phase::Hg(g) => hg_phase(*g, -wi.dot(wo)),
        }
    }

    /// Per-interaction reflectance `F`: albedo times Schlick at `|wi.h|` for
    /// flakes, albedo alone for Henyey-Greenstein.
    #[inline]
    pub fn reflectance(&self, wi: Vec3<R>, wo: Vec3<R>) -> Spectrum<R> {
        match &self.phase {
            Phase::Flake(_) => {
                let cos = half_vector(wi, wo).map_or(R::zero(), |h| wi.dot(h).abs());
                self.spec.albedo * schlick(self.spec.f0, cos)
            }
            Phase::Hg(_) => self.spec.albedo,
        }
    }

    /// Reduced phase function `sigma_t(wi) F fp(wi -> wo)` with unit density.
    pub fn reduced_phase(&self, wi: Vec3<R>, wo: Vec3<R>) -> Spectrum<R> {
        match &self.phase {
            Phase::Flake(s) => match half_vector(wi, wo) {
                // sigma(wi) cancels, leaving the symmetric form F D(h) / 4
                Some(h) => {
                    let f = self.spec.albedo * schlick(self.spec.f0, wi.dot(h).abs());
                    f * (sggx_ndf(s, h) / lit::<R>(4.0))
                }
                // exactly forward: h is perpendicular to wi, Schlick at 0
                None => {
                    let f = self.spec.albedo * schlick(self.spec.f0, R::zero());
                    f * (forward_ndf(s, wi) / lit::<R>(4.0))
                }
            },
            Phase::Hg(g) => self.spec.albedo * hg_phase(*g, -wi.dot(wo)),
        }
    }

    fn mirrored(&self) -> Self {
        let mut spec = self.spec;
        spec.orientation = spec.orientation.flip_z();
        let phase = match self.phase {
            Phase::Flake(s) => Phase::Flake(s.flip_z()),
            p => p,
        };
        Self { spec, phase }
    }
}

/// Standalone form of [`Layer::reduced_phase`] for a raw spec.
pub fn reduced_phase_eval<R: Real>(
    layer: &LayerSpec<R>,
    wi: Vec3<R>,
    wo: Vec3<R>,
) -> Result<Spectrum<R>> {
    Ok(Layer::new(*layer)?.reduced_phase(wi, wo))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SubstrateSpec<R> {
    #[default]
    None,
    Lambertian {
        albedo: Spectrum<R>,
    },
}

impl<R: Real> SubstrateSpec<R> {
    pub fn is_none(&self) -> bool {
        matches!(self, SubstrateSpec::None)
    }

    pub fn cast<S: Real>(&self) -> SubstrateSpec<S> {
        match self {
            SubstrateSpec::None => SubstrateSpec::None,
            SubstrateSpec::Lambertian { albedo } => SubstrateSpec::Lambertian {
                albedo: albedo.cast(),
            },
        }
    }
}

/// Layers ordered top to bottom, plus the delta-transmission flag and an
/// optional opaque substrate under the last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack<R> {
    layers: Vec<Layer<R>>,
    include_delta: bool,
    substrate: SubstrateSpec<R>,
}

impl<R: Real> LayerStack<R> {
    pub fn new(
        specs: Vec<LayerSpec<R>>,
        include_delta: bool,
        substrate: SubstrateSpec<R>,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::invalid("layers", "at least one layer is required"));
        }
        for (i, s) in specs.iter().enumerate() {
            s.validate(&format!("layer[{i}]"))?;
            if s.is_semi_infinite() {
                if i + 1 != specs.len() {
                    return Err(Error::invalid(
                        format!("layer[{i}].thickness"),
                        "only the bottom layer may be semi-infinite",
                    ));
                }
                if !substrate.is_none() {
                    return Err(Error::invalid(
                        "substrate",
                        "a semi-infinite bottom layer cannot sit on a substrate",
                    ));
                }
                if include_delta {
                    return Err(Error::invalid(
                        "delta_transmission",
                        "a semi-infinite stack has no delta transmission",
                    ));
                }
            }
        }
        if let SubstrateSpec::Lambertian { albedo } = &substrate {
            if !albedo.in_unit_range() {
                return Err(Error::invalid(
                    "substrate.albedo",
                    "channels must lie in [0, 1]",
                ));
            }
        }
        let layers = specs
            .into_iter()
            .map(Layer::build)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            include_delta,
            substrate,
        })
    }

    /// Single layer, no delta, no substrate.
    pub fn single(spec: LayerSpec<R>) -> Result<Self> {
        Self::new(vec![spec], false, SubstrateSpec::None)
    }

    pub fn layers(&self) -> &[Layer<R>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn specs(&self) -> Vec<LayerSpec<R>> {
        self.layers.iter().map(|l| *l.spec()).collect()
    }

    pub fn include_delta(&self) -> bool {
        self.include_delta
    }

    pub fn substrate(&self) -> &SubstrateSpec<R> {
        &self.substrate
    }

    pub fn is_semi_infinite(&self) -> bool {
        self.layers.last().is_some_and(|l| l.spec.is_semi_infinite())
    }

    /// True when light can leave through the bottom.
    pub fn is_transmissive(&self) -> bool {
        self.substrate.is_none() && !self.is_semi_infinite()
    }

    /// Delta transmission is only physical when light can pass straight through.
    pub fn delta_enabled(&self) -> bool {
        self.include_delta && self.is_transmissive()
    }

    pub fn with_delta(mut self, include_delta: bool) -> Result<Self> {
        if include_delta && self.is_semi_infinite() {
            return Err(Error::invalid(
                "delta_transmission",
                "a semi-infinite stack has no delta transmission",
            ));
        }
        self.include_delta = include_delta;
        Ok(self)
    }

    /// The same medium seen from below: layers reversed and mirrored through
    /// z = 0. The substrate is dropped.
    pub fn mirrored(&self) -> Self {
        Self {
            layers: self.layers.iter().rev().map(Layer::mirrored).collect(),
            include_delta: self.include_delta,
            substrate: SubstrateSpec::None,
        }
    }

    pub fn cast<S: Real>(&self) -> Result<LayerStack<S>> {
        LayerStack::new(
            self.layers.iter().map(|l| l.spec.cast()).collect(),
            self.include_delta,
            self.substrate.cast(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs()
    }

    #[test]
    fn reduced_phase_isotropic() {
        let l = LayerSpec::isotropic(1.0, 1.0);
        let wi = Vec3::from_spherical(0.4, 0.2);
        let wo = Vec3::from_spherical(0.8, 1.9);
        let v = reduced_phase_eval(&l, wi, wo).unwrap();
        assert!(close(v.r, 0.079_577_471_545_947_67, 1e-12));
        let half = reduced_phase_eval(&LayerSpec::isotropic(0.5, 1.0), wi, wo).unwrap();
        assert!(close(half.g, 0.5 * v.g, 1e-14));
    }

    #[test]
    fn reduced_phase_is_reciprocal() {
        let l = LayerSpec::new(
            PhaseKind::Fiber,
            Spectrum::new(0.9, 0.5, 0.2),
            0.35,
            Spectrum::new(0.04, 0.5, 0.9),
            1.5,
            Vec3::new(0.4, -0.3, 0.6),
        );
        let wi = Vec3::from_spherical(0.7, 0.3);
        let wo = Vec3::from_spherical(-0.2, 4.0);
        let a = reduced_phase_eval(&l, wi, wo).unwrap();
        let b = reduced_phase_eval(&l, wo, wi).unwrap();
        for (x, y) in a.to_array().into_iter().zip(b.to_array()) {
            assert!(close(x, y, 1e-12), "{x} vs {y}");
        }
    }

    #[test]
    fn hg_ignores_fresnel_and_orientation() {
        let l = LayerSpec::new(
            PhaseKind::Hg,
            Spectrum::new(0.7, 0.1, 0.1),
            0.7,
            Spectrum::splat(0.04),
            1.0,
            Vec3::zero(),
        );
        let layer = Layer::new(l).unwrap();
        let wi = Vec3::unit_z();
        let v = layer.reduced_phase(wi, -wi);
        assert!(close(v.r, 0.7 * 0.51 / (4.0 * std::f64::consts::PI * 0.027), 1e-9));
    }

    #[test]
    fn stack_invariants() {
        let iso = LayerSpec::isotropic(0.5, 1.0);
        let inf = LayerSpec::isotropic(0.5, f64::INFINITY);
        assert!(LayerStack::<f64>::new(vec![], false, SubstrateSpec::None).is_err());
        assert!(LayerStack::new(vec![inf, iso], false, SubstrateSpec::None).is_err());
        assert!(LayerStack::new(vec![iso, inf], true, SubstrateSpec::None).is_err());
        let sub = SubstrateSpec::Lambertian {
            albedo: Spectrum::splat(0.5),
        };
        assert!(LayerStack::new(vec![iso, inf], false, sub).is_err());
        assert!(LayerStack::new(vec![iso, inf], false, SubstrateSpec::None).is_ok());
        let mut bad = iso;
        bad.albedo = Spectrum::new(1.2, 0.0, 0.0);
        let err = LayerStack::new(vec![iso, bad], false, SubstrateSpec::None).unwrap_err();
        assert!(err.to_string().contains("layer[1].albedo"), "{err}");
        let mut bad = iso;
        bad.thickness = 0.0;
        assert!(LayerStack::single(bad).is_err());
    }

    #[test]
    fn mirrored_flips_orientation() {
        let top = LayerSpec::new(
            PhaseKind::Surface,
            Spectrum::one(),
            0.3,
            Spectrum::one(),
            1.0,
            Vec3::new(0.6, 0.0, 0.8),
        );
        let bottom = LayerSpec::isotropic(0.5, 2.0);
        let stack = LayerStack::new(vec![top, bottom], false, SubstrateSpec::None).unwrap();
        let m = stack.mirrored();
        assert_eq!(m.layers()[0].thickness(), 2.0);
        let o = m.layers()[1].spec().orientation;
        assert!(close(o.z, -0.8, 1e-12));
        let w = Vec3::from_spherical(0.3, 0.9);
        assert!(close(
            m.layers()[1].sigma(w.flip_z()),
            stack.layers()[0].sigma(w),
            1e-12
        ));
    }
}
