//! Lobe images.
//!
//! Two layouts:
//!
//! * matrix: one image row per incident elevation (`n_theta` rows, cell
//!   centers `cos = 1 - (t + 0.5) / n_theta`, azimuth 0); columns are the
//!   outgoing cells of [`DirectionGrid`], column `o = r * n_phi + p` for
//!   outgoing row `r` in `0..2 n_theta` (uniform in cos over `[-1, 1]`) and
//!   azimuth cell `p`.
//! * incidence: one incident direction at polar angle `theta`, azimuth 0;
//!   pixel `(x, y)` covers polar angles `[y, y + 1] pi / rows` and azimuths
//!   `[x, x + 1] 2 pi / cols`.
//!
//! A pixel holds the BSDF averaged over its cell with `|cos|` weight,
//! `\int f |cos| dw / \int |cos| dw`, which is also what a random walk
//! tally divided by the exact cell integral of `|cos|` estimates.

use std::f64::consts::{PI, TAU};

use flakelayer::multiscatter::{eval_full, ThreeLobeParams};
use flakelayer::oracle::{random_walk, task_rng, ExitSide, WalkMode};
use flakelayer::single::eval_stack_single;
use flakelayer::{LayerStack, Vec3};
use rayon::prelude::*;

use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LobeMode {
    Single,
    Full,
    McSingle,
    McMultiple,
    McFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Layout {
    Matrix,
    Incidence,
}

/// Outgoing cells shared by every incident direction of one image.
#[derive(Debug, Clone, Copy)]
struct Cells {
    rows: usize,
    cols: usize,
    /// Rows uniform in cos over [-1, 1] (matrix) or in theta over [0, pi].
    uniform_cos: bool,
}

impl Cells {
    /// Cos range of row `r`, from the upper end down.
    fn cos_range(&self, r: usize) -> (f64, f64) {
        let f = |k: usize| {
            let t = k as f64 / self.rows as f64;
            if self.uniform_cos {
                1.0 - 2.0 * t
            } else {
                (t * PI).cos()
            }
        };
        (f(r), f(r + 1))
    }

    fn locate(&self, w: Vec3<f64>) -> usize {
        let z = w.z.clamp(-1.0, 1.0);
        let t = if self.uniform_cos { (1.0 - z) / 2.0 } else { z.acos() / PI };
        let r = ((t * self.rows as f64) as usize).min(self.rows - 1);
        let mut phi = w.y.atan2(w.x);
        if phi < 0.0 {
            phi += TAU;
        }
        let c = ((phi / TAU * self.cols as f64) as usize).min(self.cols - 1);
        r * self.cols + c
    }

    /// Exact `\int |cos| dw` over row `r` of one azimuth cell.
    fn abs_cos_measure(&self, r: usize) -> f64 {
        let (hi, lo) = self.cos_range(r);
        let g = |c: f64| 0.5 * c * c.abs();
        (g(hi) - g(lo)) * TAU / self.cols as f64
    }
}

pub struct LobeRequest<'a> {
    pub stack: &'a LayerStack<f64>,
    pub params: &'a ThreeLobeParams<f64>,
    pub mode: LobeMode,
    pub layout: Layout,
    /// Incident polar angle (radians), incidence layout only.
    pub theta: f64,
    pub rows: usize,
    pub cols: usize,
    /// Walks per incident direction for the Monte Carlo modes.
    pub spp: u64,
    /// Midpoint subdivisions per pixel side for the analytic modes.
    pub sub: usize,
    pub seed: u64,
}

pub fn render_lobe(req: &LobeRequest) -> Image {
    let (incident, cells) = match req.layout {
        Layout::Matrix => {
            let n = req.rows;
            let wi = (0..n)
                .map(|t| Vec3::from_spherical(1.0 - (t as f64 + 0.5) / n as f64, 0.0))
                .collect::<Vec<_>>();
            (wi, Cells { rows: 2 * n, cols: req.cols, uniform_cos: true })
        }
        Layout::Incidence => (
            vec![Vec3::from_spherical(req.theta.cos(), 0.0)],
            Cells { rows: req.rows, cols: req.cols, uniform_cos: false },
        ),
    };
    let blocks: Vec<Vec<[f64; 3]>> = incident
        .par_iter()
        .enumerate()
        .map(|(i, &wi)| match req.mode {
            LobeMode::Single | LobeMode::Full => analytic_block(req, &cells, wi),
            _ => walk_block(req, &cells, wi, i as u64),
        })
        .collect();
    let (w, h) = match req.layout {
        Layout::Matrix => (cells.rows * cells.cols, incident.len()),
        Layout::Incidence => (cells.cols, cells.rows),
    };
    let mut img = Image::new(w, h);
    for (i, block) in blocks.iter().enumerate() {
        for (k, v) in block.iter().enumerate() {
            let (x, y) = match req.layout {
                Layout::Matrix => (k, i),
                Layout::Incidence => (k % cells.cols, k / cells.cols),
            };
            img.set(x, y, v.map(|c| c as f32));
        }
    }
    img
}

fn analytic_block(req: &LobeRequest, cells: &Cells, wi: Vec3<f64>) -> Vec<[f64; 3]> {
    let n = req.sub.max(1);
    let mut out = vec![[0.0; 3]; cells.rows * cells.cols];
    for r in 0..cells.rows {
        let (hi, lo) = cells.cos_range(r);
        for c in 0..cells.cols {
            let (mut acc, mut weight) = ([0.0; 3], 0.0);
            for a in 0..n {
                let z = hi + (lo - hi) * (a as f64 + 0.5) / n as f64;
                for b in 0..n {
                    let phi = (c as f64 + (b as f64 + 0.5) / n as f64) * TAU / cells.cols as f64;
                    let wo = Vec3::from_spherical(z, phi);
                    let v = match req.mode {
                        LobeMode::Full => eval_full(req.stack, req.params, wi, wo),
                        _ => eval_stack_single(req.stack, wi, wo),
                    };
                    for (k, x) in v.to_array().into_iter().enumerate() {
                        acc[k] += x * z.abs();
                    }
                    weight += z.abs();
                }
            }
            if weight > 0.0 {
                out[r * cells.cols + c] = acc.map(|x| x / weight);
            }
        }
    }
    out
}

fn walk_block(req: &LobeRequest, cells: &Cells, wi: Vec3<f64>, index: u64) -> Vec<[f64; 3]> {
    let (walk_mode, accept) = match req.mode {
        LobeMode::McSingle => (WalkMode::SingleOnly, WalkMode::SingleOnly),
        LobeMode::McMultiple => (WalkMode::FullDelta, WalkMode::MultipleOnly),
        _ => (WalkMode::FullDelta, WalkMode::Full),
    };
    let mut rng = task_rng(req.seed, index);
    let mut acc = vec![[0.0; 3]; cells.rows * cells.cols];
    for _ in 0..req.spp {
        let out = random_walk(req.stack, wi, &mut rng, 20, walk_mode);
        if out.side == ExitSide::Absorbed || !accept.accepts(out.bounces) {
            continue;
        }
        let cell = &mut acc[cells.locate(out.exit_direction)];
        for (k, x) in out.throughput.to_array().into_iter().enumerate() {
            cell[k] += x;
        }
    }
    for (k, v) in acc.iter_mut().enumerate() {
        let m = cells.abs_cos_measure(k / cells.cols) * req.spp as f64;
        *v = if m > 0.0 { v.map(|x| x / m) } else { [0.0; 3] };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_cos_measure_covers_the_sphere() {
        for cells in [
            Cells { rows: 6, cols: 4, uniform_cos: true },
            Cells { rows: 7, cols: 3, uniform_cos: false },
        ] {
            let total: f64 = (0..cells.rows).map(|r| cells.abs_cos_measure(r)).sum::<f64>() * cells.cols as f64;
            assert!((total - TAU).abs() < 1e-12, "{total}");
        }
    }

    #[test]
    fn locate_matches_ranges() {
        let cells = Cells { rows: 5, cols: 8, uniform_cos: false };
        for r in 0..5 {
            let (hi, lo) = cells.cos_range(r);
            let w = Vec3::from_spherical(0.5 * (hi + lo), 0.1);
            assert_eq!(cells.locate(w), r * 8);
        }
    }
}
