//! Feed-forward network mapping stack parameters to [`ThreeLobeParams`],
//! and its little-endian weight file.
//!
//! File layout (all integers and floats little-endian):
//!
//! ```text
//! magic       4 bytes  "SPCK"
//! version     u32      1
//! layers      u32      L
//! L times:
//!   rows      u32      output width of the dense layer
//!   cols      u32      input width of the dense layer
//!   weights   f32[rows * cols], row-major
//!   biases    f32[rows]
//! activation  u8       hidden activation tag
//! ranges      u8[rows of the last layer], one range map per output slot
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::ThreeLobeParams;
use crate::error::{Error, Result};
use crate::layer::{LayerSpec, LayerStack, PhaseKind};
use crate::oracle::ByteCursor;
use crate::real::{lit, to_f64, Real};
use crate::spectrum::Spectrum;

pub const WEIGHTS_MAGIC: [u8; 4] = *b"SPCK";
pub const WEIGHTS_VERSION: u32 = 1;

/// Network inputs per stack layer: alpha, albedo (3), thickness, f0 (3),
/// kind, orientation (3).
pub const INPUTS_PER_LAYER: usize = 12;
/// Network outputs per modified layer: alpha, albedo (3), thickness, f0 (3).
pub const OUTPUTS_PER_LAYER: usize = 8;

const MIN_ALPHA: f64 = 1e-3;
const MIN_THICKNESS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Tanh,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
            Activation::Tanh => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Relu,
            1 => Activation::Identity,
            2 => Activation::Tanh,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }
}

/// Maps a raw network output into a parameter domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeMap {
    Identity,
    Sigmoid,
    Softplus,
}

impl RangeMap {
    pub fn tag(self) -> u8 {
        match self {
            RangeMap::Identity => 0,
            RangeMap::Sigmoid => 1,
            RangeMap::Softplus => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => RangeMap::Identity,
            1 => RangeMap::Sigmoid,
            2 => RangeMap::Softplus,
            _ => return None,
        })
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            RangeMap::Identity => x,
            RangeMap::Sigmoid => sigmoid(x),
            RangeMap::Softplus => softplus(x),
        }
    }

    /// Preimage of `y`, clamped into the open range.
    pub fn inverse(self, y: f64) -> f64 {
        match self {
            RangeMap::Identity => y,
            RangeMap::Sigmoid => {
                let y = y.clamp(1e-6, 1.0 - 1e-6);
                (y / (1.0 - y)).ln()
            }
            RangeMap::Softplus => {
                let y = y.max(1e-9);
                if y > 30.0 {
                    y
                } else {
                    y.exp_m1().ln()
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Range maps of the output slots for `layers` modified layers.
pub fn default_range_maps(layers: usize) -> Vec<RangeMap> {
    use RangeMap::*;
    let per = [Sigmoid, Sigmoid, Sigmoid, Sigmoid, Softplus, Sigmoid, Sigmoid, Sigmoid];
    let mut v: Vec<RangeMap> = (0..layers).flat_map(|_| per).collect();
    v.extend([Softplus, Softplus]);
    v
}

/// Fully connected layer, `y = W x + b` with `W` stored row-major
/// (`rows` outputs by `cols` inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f32>,
    pub biases: Vec<f32>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            biases: vec![0.0; rows],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = &self.weights[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(x).map(|(w, v)| *w as f64 * v).sum::<f64>() + self.biases[r] as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    pub range_maps: Vec<RangeMap>,
}

impl MlpWeights {
    /// Zero-initialized network of the standard shape for `stack_layers`
    /// layers; `bottom_only` selects the reduced output.
    pub fn zeros(stack_layers: usize, hidden: &[usize], bottom_only: bool) -> Self {
        let out_layers = if bottom_only { 1 } else { stack_layers };
        let mut widths = vec![INPUTS_PER_LAYER * stack_layers];
        widths.extend_from_slice(hidden);
        widths.push(OUTPUTS_PER_LAYER * out_layers + 2);
        let layers = widths.windows(2).map(|w| Dense::zeros(w[1], w[0])).collect();
        Self {
            layers,
            activation: Activation::Relu,
            range_maps: default_range_maps(out_layers),
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.cols)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.rows)
    }

    /// Stack layer count the network was built for.
    pub fn stack_layers(&self) -> usize {
        self.input_width() / INPUTS_PER_LAYER
    }

    /// Only the bottom layer receives modified parameters.
    pub fn is_bottom_only(&self) -> bool {
        self.stack_layers() > 1 && self.output_width() == OUTPUTS_PER_LAYER + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::ShapeMismatch("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.rows * l.cols || l.biases.len() != l.rows {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: {}x{} with {} weights and {} biases",
                    l.rows,
                    l.cols,
                    l.weights.len(),
                    l.biases.len()
                )));
            }
            if i > 0 && self.layers[i - 1].rows != l.cols {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} expects {} inputs, previous layer yields {}",
                    l.cols,
                    self.layers[i - 1].rows
                )));
            }
            if !l.weights.iter().chain(&l.biases).all(|v| v.is_finite()) {
                return Err(Error::Malformed {
                    what: "weight file",
                    message: format!("layer {i} holds a non-finite value"),
                });
            }
        }
        let n_in = self.input_width();
        if n_in == 0 || !n_in.is_multiple_of(INPUTS_PER_LAYER) {
            return Err(Error::ShapeMismatch(format!(
                "input width {n_in} is not a multiple of {INPUTS_PER_LAYER}"
            )));
        }
        let n = self.stack_layers();
        let out = self.output_width();
        if out != OUTPUTS_PER_LAYER * n + 2 && out != OUTPUTS_PER_LAYER + 2 {
            return Err(Error::ShapeMismatch(format!(
                "output width {out} fits neither {n} modified layers nor the bottom-only form"
            )));
        }
        if self.range_maps.len() != out {
            return Err(Error::ShapeMismatch(format!(
                "{} range maps for {out} outputs",
                self.range_maps.len()
            )));
        }
        Ok(())
    }

    /// Raw forward pass followed by the output range maps.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut x = input.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            x = l.forward(&x);
            if i < last {
                x.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
        }
        x.iter()
            .zip(&self.range_maps)
            .map(|(v, m)| m.apply(*v))
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&WEIGHTS_MAGIC);
        b.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        b.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            b.extend_from_slice(&(l.rows as u32).to_le_bytes());
            b.extend_from_slice(&(l.cols as u32).to_le_bytes());
            for v in l.weights.iter().chain(&l.biases) {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        b.push(self.activation.tag());
        b.extend(self.range_maps.iter().map(|m| m.tag()));
        b
    }

    pub fn read_from<Rd: Read>(mut r: Rd) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = ByteCursor::new(bytes, "weight file");
        let magic: [u8; 4] = c.array()?;
        if magic != WEIGHTS_MAGIC {
            return Err(Error::BadMagic {
                expected: WEIGHTS_MAGIC,
                found: magic,
            });
        }
        let version = c.u32()?;
        if version != WEIGHTS_VERSION {
            return Err(Error::BadVersion {
                expected: WEIGHTS_VERSION,
                found: version,
            });
        }
        let count = c.u32()? as usize;
        let mut layers = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let rows = c.u32()? as usize;
            let cols = c.u32()? as usize;
            let n = rows.checked_mul(cols).ok_or_else(|| {
                Error::ShapeMismatch(format!("{rows}x{cols} overflows"))
            })?;
            let weights = c.f32_vec(n)?;
            let biases = c.f32_vec(rows)?;
            layers.push(Dense {
                rows,
                cols,
                weights,
                biases,
            });
        }
        let tag = c.u8()?;
        let activation = Activation::from_tag(tag).ok_or_else(|| Error::Malformed {
            what: "weight file",
            message: format!("unknown activation tag {tag}"),
        })?;
        let out = layers.last().map_or(0, |l| l.rows);
        let range_maps = c
            .take(out)?
            .iter()
            .map(|&t| {
                RangeMap::from_tag(t).ok_or_else(|| Error::Malformed {
                    what: "weight file",
                    message: format!("unknown range tag {t}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !c.is_empty() {
            return Err(Error::Malformed {
                what: "weight file",
                message: format!("{} trailing bytes", c.remaining()),
            });
        }
        let w = Self {
            layers,
            activation,
            range_maps,
        };
        w.validate()?;
        Ok(w)
    }
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<MlpWeights> {
    MlpWeights::from_bytes(&std::fs::read(path)?)
}

pub fn save_weights(weights: &MlpWeights, path: impl AsRef<Path>) -> Result<()> {
    weights.validate()?;
    std::fs::write(path, weights.to_bytes())?;
    Ok(())
}

/// Network input vector for a stack, top layer first.
pub fn encode_stack<R: Real>(stack: &LayerStack<R>) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(INPUTS_PER_LAYER * stack.len());
    for (i, s) in stack.specs().iter().enumerate() {
        let k = match s.kind {
            PhaseKind::Fiber => 0.0,
            PhaseKind::Surface => 1.0,
            PhaseKind::Hg => {
                return Err(Error::domain(
                    format!("layer[{i}].kind"),
                    "hg layers are outside the network's domain",
                ))
            }
        };
        if s.is_semi_infinite() {
            return Err(Error::domain(
                format!("layer[{i}].thickness"),
                "semi-infinite layers are outside the network's domain",
            ));
        }
        let o = s.orientation.normalize();
        x.push(to_f64(s.roughness));
        x.extend(s.albedo.to_array().map(to_f64));
        x.push(to_f64(s.thickness));
        x.extend(s.f0.to_array().map(to_f64));
        x.push(k);
        x.extend(o.to_array().map(to_f64));
    }
    Ok(x)
}

/// Builds a modified layer from 8 range-mapped outputs, keeping kind and
/// orientation of `src`.
pub(crate) fn decode_layer<R: Real>(src: &LayerSpec<R>, o: &[f64]) -> LayerSpec<R> {
    let unit = |v: f64| lit::<R>(v.clamp(0.0, 1.0));
    LayerSpec {
        kind: src.kind,
        albedo: Spectrum::new(unit(o[1]), unit(o[2]), unit(o[3])),
        roughness: lit(o[0].clamp(MIN_ALPHA, 1.0)),
        f0: Spectrum::new(unit(o[5]), unit(o[6]), unit(o[7])),
        thickness: lit(o[4].max(MIN_THICKNESS)),
        orientation: src.orientation,
    }
}

/// Forward pass of `weights` on `stack`.
pub fn mlp_infer<R: Real>(weights: &MlpWeights, stack: &LayerStack<R>) -> Result<ThreeLobeParams<R>> {
    weights.validate()?;
    if weights.stack_layers() != stack.len() {
        return Err(Error::ShapeMismatch(format!(
            "network built for {} layers, stack has {}",
            weights.stack_layers(),
            stack.len()
        )));
    }
    let out = weights.forward(&encode_stack(stack)?);
    let src = stack.specs();
    let mut modified = src.clone();
    let n_mod = (out.len() - 2) / OUTPUTS_PER_LAYER;
    let first = src.len() - n_mod;
    for j in 0..n_mod {
        let o = &out[j * OUTPUTS_PER_LAYER..(j + 1) * OUTPUTS_PER_LAYER];
        modified[first + j] = decode_layer(&src[first + j], o);
    }
    let w1 = out[out.len() - 2].max(0.0);
    let w2 = out[out.len() - 1].max(0.0);
    ThreeLobeParams::new(stack, modified, lit(w1), lit(w2))
}
