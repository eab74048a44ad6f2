//! Text format for layer stacks.
//!
//! Materials are TOML documents:
//!
//! ```toml
//! delta_transmission = false        # optional, default false
//!
//! [substrate]                       # optional
//! kind = "lambertian"               # "lambertian" | "none"
//! albedo = [0.5, 0.5, 0.5]
//!
//! [[layer]]                         # one table per layer, top first
//! kind = "surface"                  # "fiber" | "surface" | "hg"
//! albedo = [0.7, 0.1, 0.1]
//! roughness = 0.8                   # alpha, or g for hg
//! f0 = [1.0, 1.0, 1.0]
//! thickness = 5.0                   # optical depth; inf or "inf" for semi-infinite
//! orientation = [0.0, 0.0, 1.0]     # required for flakes, ignored for hg
//! ```
//!
//! Unknown keys are rejected. Syntax and schema errors carry the line and
//! column; invariant violations carry the field path (`layer[1].roughness`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::{LayerSpec, LayerStack, PhaseKind, SubstrateSpec};
use crate::spectrum::Spectrum;
use crate::vec3::Vec3;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialDoc {
    #[serde(default)]
    delta_transmission: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    substrate: Option<SubstrateDoc>,
    layer: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubstrateDoc {
    kind: SubstrateKindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    albedo: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SubstrateKindDoc {
    Lambertian,
    None,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    kind: KindDoc,
    albedo: [f64; 3],
    roughness: f64,
    f0: [f64; 3],
    thickness: ThicknessDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    orientation: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindDoc {
    Fiber,
    Surface,
    Hg,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ThicknessDoc {
    Value(f64),
    Text(String),
}

/// Parses and validates a material document.
pub fn parse_material(text: &str) -> Result<LayerStack<f64>> {
    let doc: MaterialDoc = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .unwrap_or((0, 0));
        Error::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;

    let substrate = match doc.substrate {
        None
        | Some(SubstrateDoc {
            kind: SubstrateKindDoc::None,
            ..
        }) => SubstrateSpec::None,
        Some(SubstrateDoc {
            kind: SubstrateKindDoc::Lambertian,
            albedo,
        }) => SubstrateSpec::Lambertian {
            albedo: albedo
                .ok_or_else(|| Error::invalid("substrate.albedo", "required for lambertian"))?
                .into(),
        },
    };

    let mut specs = Vec::with_capacity(doc.layer.len());
    for (i, l) in doc.layer.into_iter().enumerate() {
        let kind = match l.kind {
            KindDoc::Fiber => PhaseKind::Fiber,
            KindDoc::Surface => PhaseKind::Surface,
            KindDoc::Hg => PhaseKind::Hg,
        };
        let thickness = match l.thickness {
            ThicknessDoc::Value(v) => v,
            ThicknessDoc::Text(s) if s.trim().eq_ignore_ascii_case("inf") => f64::INFINITY,
            ThicknessDoc::Text(s) => {
                return Err(Error::invalid(
                    format!("layer[{i}].thickness"),
                    format!("expected a number or \"inf\", got {s:?}"),
                ))
            }
        };
        let orientation = match (l.orientation, kind) {
            (Some(o), _) => Vec3::from(o),
            (None, PhaseKind::Hg) => Vec3::unit_z(),
            (None, _) => {
                return Err(Error::invalid(
                    format!("layer[{i}].orientation"),
                    "required for flake layers",
                ))
            }
        };
        specs.push(LayerSpec::new(
            kind,
            Spectrum::from(l.albedo),
            l.roughness,
            Spectrum::from(l.f0),
            thickness,
            orientation,
        ));
    }
    LayerStack::new(specs, doc.delta_transmission, substrate)
}

/// Canonical text form; `parse_material(&serialize_material(s))` rebuilds `s`.
pub fn serialize_material(stack: &LayerStack<f64>) -> String {
    let substrate = match stack.substrate() {
        SubstrateSpec::None => None,
        SubstrateSpec::Lambertian { albedo } => Some(SubstrateDoc {
            kind: SubstrateKindDoc::Lambertian,
            albedo: Some(albedo.to_array()),
        }),
    };
    let layer = stack
        .specs()
        .into_iter()
        .map(|s| LayerDoc {
            kind: match s.kind {
                PhaseKind::Fiber => KindDoc::Fiber,
                PhaseKind::Surface => KindDoc::Surface,
                PhaseKind::Hg => KindDoc::Hg,
            },
            albedo: s.albedo.to_array(),
            roughness: s.roughness,
            f0: s.f0.to_array(),
            thickness: if s.thickness.is_infinite() {
                ThicknessDoc::Text("inf".into())
            } else {
                ThicknessDoc::Value(s.thickness)
            },
            orientation: Some(s.orientation.to_array()),
        })
        .collect();
    let doc = MaterialDoc {
        delta_transmission: stack.include_delta(),
        substrate,
        layer,
    };
    toml::to_string(&doc).expect("material document serializes")
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |p| offset - p - 1) + 1;
    (line, column)
}
