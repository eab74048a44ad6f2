//! Layered volumetric microflake BSDF.
//!
//! A material is a stack of plane-parallel homogeneous layers with no
//! interfaces between them. Each layer holds either SGGX microflakes (fiber-
//! or surface-like) or a Henyey-Greenstein medium. The crate provides:
//!
//! - exact analytic single scattering for any stack ([`single`]),
//! - importance sampling with an exact pdf ([`sampler`]),
//! - a three-lobe approximation of multiple scattering whose parameters come
//!   from a small MLP or a per-material direct fit ([`multiscatter`]),
//! - a Monte Carlo random-walk reference and BSDF tabulation ([`oracle`]).
//!
//! All math is generic over [`Real`]; `f64` aliases are provided for the
//! common case.

// `!(x > 0)` is used on purpose to reject NaN along with the range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod layer;
pub mod material;
pub mod microflake;
pub mod multiscatter;
pub mod oracle;
pub mod quadrature;
pub mod real;
pub mod sampler;
pub mod single;
pub mod spectrum;
pub mod stats;
pub mod vec3;

pub use error::{Error, Result};
pub use layer::{Layer, LayerSpec, LayerStack, PhaseKind, SubstrateSpec};
pub use material::{parse_material, serialize_material};
pub use microflake::{FlakeKind, SggxMatrix};
pub use real::Real;
pub use spectrum::Spectrum;
pub use vec3::Vec3;

pub type Vec3d = Vec3<f64>;
pub type Vec3f = Vec3<f32>;
pub type Spectrumd = Spectrum<f64>;
pub type Spectrumf = Spectrum<f32>;
pub type SggxMatrixd = SggxMatrix<f64>;
pub type SggxMatrixf = SggxMatrix<f32>;
pub type LayerSpecd = LayerSpec<f64>;
pub type LayerSpecf = LayerSpec<f32>;
pub type LayerStackd = LayerStack<f64>;
pub type LayerStackf = LayerStack<f32>;
pub type ThreeLobeParamsd = multiscatter::ThreeLobeParams<f64>;
pub type ThreeLobeParamsf = multiscatter::ThreeLobeParams<f32>;
