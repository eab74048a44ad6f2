use std::io::{Read, Write};

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layer::LayerStack;
use crate::real::{to_f64, Real};
use crate::sampler::RngSource;
use crate::vec3::Vec3;

use super::walk::{random_walk, WalkMode};
use super::stream_seed;

pub const TABLE_MAGIC: [u8; 4] = *b"SPTB";
pub const TABLE_VERSION: u32 = 1;

/// Parameterization tag: cells uniform in `(cos theta, phi)` per hemisphere.
pub const PARAM_UNIFORM_COS_PHI: u8 = 0;

/// Outgoing cells with `|cos|` at the center below this are high variance.
pub const GRAZING_COS: f64 = 0.02;

/// Stratified direction grid, uniform in `(cos theta, phi)`.
///
/// Incident directions use the upper hemisphere: `n_theta x n_phi` cells,
/// index `t * n_phi + p`, center `cos = 1 - (t + 0.5) / n_theta`,
/// `phi = (p + 0.5) 2 pi / n_phi`. Outgoing directions cover the sphere with
/// `2 n_theta` rows continuing the same spacing into the lower hemisphere, so
/// the first `n_theta x n_phi` outgoing cells coincide with the incident
/// cells. Every cell subtends `2 pi / (n_theta n_phi)` sr.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl DirectionGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        Self { n_theta, n_phi }
    }

    pub fn square(res: usize) -> Self {
        Self::new(res, res)
    }

    pub fn incident_count(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn outgoing_count(&self) -> usize {
        2 * self.n_theta * self.n_phi
    }

    pub fn cell_solid_angle(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n_theta * self.n_phi) as f64
    }

    pub fn row_cos(&self, row: usize) -> f64 {
        1.0 - (row as f64 + 0.5) / self.n_theta as f64
    }

    pub fn cell_center(&self, index: usize) -> Vec3<f64> {
        let (row, col) = (index / self.n_phi, index % self.n_phi);
        let phi = (col as f64 + 0.5) * 2.0 * std::f64::consts::PI / self.n_phi as f64;
        Vec3::from_spherical(self.row_cos(row), phi)
    }

    /// Point inside a cell from local coordinates in `[0, 1)^2`.
    pub fn cell_point(&self, index: usize, a: f64, b: f64) -> Vec3<f64> {
        let (row, col) = (index / self.n_phi, index % self.n_phi);
        let c = 1.0 - (row as f64 + a) / self.n_theta as f64;
        let phi = (col as f64 + b) * 2.0 * std::f64::consts::PI / self.n_phi as f64;
        Vec3::from_spherical(c, phi)
    }

    /// Outgoing cell containing `w`.
    pub fn outgoing_cell(&self, w: Vec3<f64>) -> usize {
        let rows = 2 * self.n_theta;
        let row = (((1.0 - w.z) * self.n_theta as f64) as usize).min(rows - 1);
        let mut phi = w.y.atan2(w.x);
        if phi < 0.0 {
            phi += 2.0 * std::f64::consts::PI;
        }
        let col = ((phi / (2.0 * std::f64::consts::PI) * self.n_phi as f64) as usize)
            .min(self.n_phi - 1);
        row * self.n_phi + col
    }

    pub fn is_grazing(&self, outgoing: usize) -> bool {
        self.row_cos(outgoing / self.n_phi).abs() < GRAZING_COS
    }
}

/// Tabulated BSDF: `values[((i * n_out) + o) * 3 + c]` for incident cell `i`,
/// outgoing cell `o`, channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsdfTable {
    pub grid: DirectionGrid,
    pub mode: WalkMode,
    pub samples_per_wi: u64,
    /// Material text of the tabulated stack.
    pub material: String,
    pub values: Vec<f32>,
}

impl BsdfTable {
    pub fn zeros(grid: DirectionGrid, mode: WalkMode, samples_per_wi: u64, material: String) -> Self {
        let len = grid.incident_count() * grid.outgoing_count() * 3;
        Self {
            grid,
            mode,
            samples_per_wi,
            material,
            values: vec![0.0; len],
        }
    }

    pub fn index(&self, wi: usize, wo: usize) -> usize {
        (wi * self.grid.outgoing_count() + wo) * 3
    }

    pub fn get(&self, wi: usize, wo: usize) -> [f32; 3] {
        let i = self.index(wi, wo);
        [self.values[i], self.values[i + 1], self.values[i + 2]]
    }

    /// Row of RGB triples for one incident cell.
    pub fn incident_row(&self, wi: usize) -> &[f32] {
        let n = self.grid.outgoing_count() * 3;
        &self.values[wi * n..(wi + 1) * n]
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&TABLE_MAGIC)?;
        w.write_all(&TABLE_VERSION.to_le_bytes())?;
        w.write_all(&[self.mode.tag()])?;
        w.write_all(&(self.grid.n_theta as u32).to_le_bytes())?;
        w.write_all(&(self.grid.n_phi as u32).to_le_bytes())?;
        w.write_all(&[PARAM_UNIFORM_COS_PHI])?;
        w.write_all(&self.samples_per_wi.to_le_bytes())?;
        let text = self.material.as_bytes();
        w.write_all(&(text.len() as u32).to_le_bytes())?;
        w.write_all(text)?;
        let mut payload = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn read_from<Rd: Read>(mut r: Rd) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = ByteCursor::new(bytes, "table");
        let magic = cur.array::<4>()?;
        if magic != TABLE_MAGIC {
            return Err(Error::BadMagic {
                expected: TABLE_MAGIC,
                found: magic,
            });
        }
        let version = cur.u32()?;
        if version != TABLE_VERSION {
            return Err(Error::BadVersion {
                expected: TABLE_VERSION,
                found: version,
            });
        }
        let mode_tag = cur.u8()?;
        let mode = WalkMode::from_tag(mode_tag).ok_or_else(|| Error::Malformed {
            what: "table",
            message: format!("unknown mode tag {mode_tag}"),
        })?;
        let n_theta = cur.u32()? as usize;
        let n_phi = cur.u32()? as usize;
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::Malformed {
                what: "table",
                message: "zero resolution".into(),
            });
        }
        let param = cur.u8()?;
        if param != PARAM_UNIFORM_COS_PHI {
            return Err(Error::Malformed {
                what: "table",
                message: format!("unknown parameterization tag {param}"),
            });
        }
        let samples_per_wi = cur.u64()?;
        let text_len = cur.u32()? as usize;
        let material = String::from_utf8(cur.take(text_len)?.to_vec()).map_err(|e| {
            Error::Malformed {
                what: "table",
                message: format!("material text is not UTF-8: {e}"),
            }
        })?;
        let grid = DirectionGrid::new(n_theta, n_phi);
        let count = grid.incident_count() * grid.outgoing_count() * 3;
        let values = cur.f32_vec(count)?;
        if !cur.is_empty() {
            return Err(Error::Malformed {
                what: "table",
                message: format!("{} trailing bytes", cur.remaining()),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Malformed {
                what: "table",
                message: format!("value {v} is not finite and non-negative"),
            });
        }
        Ok(Self {
            grid,
            mode,
            samples_per_wi,
            material,
            values,
        })
    }
}

/// Little-endian reader over a byte slice with truncation errors.
pub(crate) struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                what: self.what,
                needed: self.pos.saturating_add(n) - self.bytes.len(),
            }),
        }
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or(Error::Truncated {
            what: self.what,
            needed: usize::MAX,
        })?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.remaining() == 0
    }
}

/// Settings for [`tabulate`].
#[derive(Debug, Clone, Copy)]
pub struct TabulateConfig {
    pub grid: DirectionGrid,
    pub samples_per_wi: u64,
    pub mode: WalkMode,
    pub max_depth: u32,
    pub seed: u64,
}

impl TabulateConfig {
    pub fn new(grid: DirectionGrid, samples_per_wi: u64, mode: WalkMode, seed: u64) -> Self {
        Self {
            grid,
            samples_per_wi,
            mode,
            max_depth: 20,
            seed,
        }
    }
}

/// Tabulates the stack's BSDF by random walks.
///
/// For every incident cell, `samples_per_wi` walks start at the cell center;
/// walks accepted by the mode are binned by exit direction and divided by the
/// cell solid angle and the `|cos|` of the cell center, turning exit energy
/// density into BSDF values. Each incident cell uses its own seed-derived
/// stream, so the result is independent of thread count.
pub fn tabulate<R: Real>(stack: &LayerStack<R>, material: String, cfg: &TabulateConfig) -> BsdfTable {
    let grid = cfg.grid;
    let n_out = grid.outgoing_count();
    let mut table = BsdfTable::zeros(grid, cfg.mode, cfg.samples_per_wi, material);
    let omega = grid.cell_solid_angle();
    let norm: Vec<f64> = (0..n_out)
        .map(|o| 1.0 / (cfg.samples_per_wi as f64 * omega * grid.row_cos(o / grid.n_phi).abs()))
        .collect();
    let walk_mode = if cfg.mode == WalkMode::SingleOnly {
        WalkMode::SingleOnly
    } else {
        WalkMode::FullDelta
    };

    table
        .values
        .par_chunks_mut(n_out * 3)
        .enumerate()
        .for_each(|(i, row)| {
            let wi: Vec3<R> = grid.cell_center(i).cast();
            let mut rng = RngSource(Pcg64Mcg::seed_from_u64(stream_seed(cfg.seed, i as u64)));
            let mut acc = vec![0.0f64; n_out * 3];
            for _ in 0..cfg.samples_per_wi {
                let out = random_walk(stack, wi, &mut rng, cfg.max_depth, walk_mode);
                if out.side == super::walk::ExitSide::Absorbed || !cfg.mode.accepts(out.bounces) {
                    continue;
                }
                let o = grid.outgoing_cell(out.exit_direction.cast());
                let t = out.throughput;
                acc[o * 3] += to_f64(t.r);
                acc[o * 3 + 1] += to_f64(t.g);
                acc[o * 3 + 2] += to_f64(t.b);
            }
            for (o, n) in norm.iter().enumerate() {
                for c in 0..3 {
                    row[o * 3 + c] = (acc[o * 3 + c] * n) as f32;
                }
            }
        });
    table
}

/// Accumulates a table of analytic values averaged over each outgoing cell
/// with a `sub x sub` midpoint rule, using the same normalization as
/// [`tabulate`] (`\int_cell f |cos| dw / (omega |cos_center|)`), evaluated at
/// incident cell centers.
pub fn tabulate_analytic<F>(grid: DirectionGrid, mode: WalkMode, sub: usize, f: F) -> BsdfTable
where
    F: Fn(Vec3<f64>, Vec3<f64>) -> [f64; 3] + Sync,
{
    let mut table = BsdfTable::zeros(grid, mode, 0, String::new());
    let n_out = grid.outgoing_count();
    table
        .values
        .par_chunks_mut(n_out * 3)
        .enumerate()
        .for_each(|(i, row)| {
            let wi = grid.cell_center(i);
            for o in 0..n_out {
                let cc = grid.row_cos(o / grid.n_phi).abs();
                let mut acc = [0.0f64; 3];
                for a in 0..sub {
                    for b in 0..sub {
                        let wo = grid.cell_point(
                            o,
                            (a as f64 + 0.5) / sub as f64,
                            (b as f64 + 0.5) / sub as f64,
                        );
                        let v = f(wi, wo);
                        for c in 0..3 {
                            acc[c] += v[c] * wo.z.abs();
                        }
                    }
                }
                for c in 0..3 {
                    row[o * 3 + c] = (acc[c] / ((sub * sub) as f64 * cc)) as f32;
                }
            }
        });
    table
}

/// Mean absolute difference between two tables of the same shape.
pub fn table_mae(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .sum::<f64>()
        / a.len().max(1) as f64
}
