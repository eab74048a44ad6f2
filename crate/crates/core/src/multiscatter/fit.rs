//! Per-material fit of the added lobes against a tabulated
//! multiple-scattering target, by Nelder-Mead in an unconstrained space.

use rayon::prelude::*;

use super::mlp::{decode_layer, RangeMap, OUTPUTS_PER_LAYER};
use super::{eval_added, ThreeLobeParams};
use crate::error::Result;
use crate::layer::{LayerSpec, LayerStack};
use crate::oracle::BsdfTable;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Loss evaluations per start.
    pub max_evals: usize,
    /// Restarts from the best point after the first run.
    pub restarts: usize,
    /// Stop once the simplex's loss spread falls below this.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            restarts: 2,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ThreeLobeParams<f64>,
    /// Table MAE of the fitted lobes against the target.
    pub mae: f64,
    /// Table MAE with no added lobes, `mean |target|`.
    pub baseline_mae: f64,
    pub evaluations: usize,
    /// False when the budget ran out before the simplex collapsed.
    pub converged: bool,
}

impl FitResult {
    /// Fraction of the baseline error removed by the fit.
    pub fn improvement(&self) -> f64 {
        if self.baseline_mae > 0.0 {
            1.0 - self.mae / self.baseline_mae
        } else {
            0.0
        }
    }
}

const LAYER_MAPS: [RangeMap; OUTPUTS_PER_LAYER] = [
    RangeMap::Sigmoid,
    RangeMap::Sigmoid,
    RangeMap::Sigmoid,
    RangeMap::Sigmoid,
    RangeMap::Softplus,
    RangeMap::Sigmoid,
    RangeMap::Sigmoid,
    RangeMap::Sigmoid,
];

fn to_raw(s: &LayerSpec<f64>) -> [f64; OUTPUTS_PER_LAYER] {
    let t = if s.thickness.is_finite() { s.thickness } else { 1e3 };
    let v = [
        s.roughness,
        s.albedo.r,
        s.albedo.g,
        s.albedo.b,
        t,
        s.f0.r,
        s.f0.g,
        s.f0.b,
    ];
    std::array::from_fn(|i| LAYER_MAPS[i].inverse(v[i]))
}

/// Parameters from an unconstrained point: range maps per layer, then the
/// two weights clamped at zero so the zero-lobe optimum is reachable.
fn decode(stack: &LayerStack<f64>, x: &[f64]) -> Result<ThreeLobeParams<f64>> {
    let src = stack.specs();
    let modified = src
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let raw = &x[k * OUTPUTS_PER_LAYER..(k + 1) * OUTPUTS_PER_LAYER];
            let mapped: Vec<f64> = raw.iter().zip(LAYER_MAPS).map(|(v, m)| m.apply(*v)).collect();
            decode_layer(s, &mapped)
        })
        .collect();
    let n = x.len();
    ThreeLobeParams::new(stack, modified, x[n - 2].max(0.0), x[n - 1].max(0.0))
}

struct Objective<'a> {
    stack: &'a LayerStack<f64>,
    target: &'a BsdfTable,
    wi: Vec<Vec3<f64>>,
    wo: Vec<Vec3<f64>>,
}

impl Objective<'_> {
    fn mae(&self, params: &ThreeLobeParams<f64>) -> f64 {
        let n_out = self.wo.len();
        let total: f64 = self
            .wi
            .par_iter()
            .enumerate()
            .map(|(i, &wi)| {
                let row = self.target.incident_row(i);
                let mut acc = 0.0;
                for (o, &wo) in self.wo.iter().enumerate() {
                    let v = eval_added(self.stack, params, wi, wo).to_array();
                    for c in 0..3 {
                        acc += (v[c] - row[o * 3 + c] as f64).abs();
                    }
                }
                acc
            })
            .sum();
        total / (self.wi.len() * n_out * 3) as f64
    }

    fn loss(&self, x: &[f64]) -> f64 {
        match decode(self.stack, x) {
            Ok(p) => self.mae(&p),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Fits modified layer parameters and lobe weights so that
/// `w1 f_modified + w2 / pi`, evaluated at cell centers, matches `target`
/// in mean absolute error. The search starts from the stack's own
/// parameters with small weights.
pub fn fit_direct(stack: &LayerStack<f64>, target: &BsdfTable, opts: &FitOptions) -> Result<FitResult> {
    let grid = target.grid;
    let obj = Objective {
        stack,
        target,
        wi: (0..grid.incident_count()).map(|i| grid.cell_center(i)).collect(),
        wo: (0..grid.outgoing_count()).map(|o| grid.cell_center(o)).collect(),
    };
    let baseline_mae =
        target.values.iter().map(|v| v.abs() as f64).sum::<f64>() / target.values.len().max(1) as f64;

    let mut x0: Vec<f64> = stack.specs().iter().flat_map(to_raw).collect();
    x0.extend([0.05, 0.05]);

    let mut evaluations = 0;
    let mut best = nelder_mead(|x| obj.loss(x), &x0, 0.5, opts.max_evals, opts.tolerance);
    evaluations += best.evals;
    for _ in 0..opts.restarts {
        let r = nelder_mead(|x| obj.loss(x), &best.x, 0.25, opts.max_evals, opts.tolerance);
        evaluations += r.evals;
        if r.f <= best.f {
            best = r;
        }
    }
    let params = decode(stack, &best.x)?;
    Ok(FitResult {
        mae: obj.mae(&params),
        params,
        baseline_mae,
        evaluations,
        converged: best.converged,
    })
}

struct NmResult {
    x: Vec<f64>,
    f: f64,
    evals: usize,
    converged: bool,
}

/// Standard Nelder-Mead with reflection 1, expansion 2, contraction 1/2 and
/// shrink 1/2, from an axis-aligned simplex of edge `step`.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_evals: usize, tol: f64) -> NmResult {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        if (vals[n] - vals[0]).abs() <= tol * (1.0 + vals[0].abs()) {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let xc = if fr < vals[n] { along(0.5) } else { along(-0.5) };
        let fc = f(&xc);
        evals += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, q)| b + 0.5 * (q - b)).collect();
            vals[i] = f(&p);
            pts[i] = p;
        }
        evals += n;
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    NmResult {
        x: pts[best].clone(),
        f: vals[best],
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{DirectionGrid, WalkMode};

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let r = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            0.5,
            2000,
            1e-14,
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] + 2.0).abs() < 1e-4);
    }

    fn stack() -> LayerStack<f64> {
        LayerStack::single(LayerSpec::isotropic(0.9, 2.0)).unwrap()
    }

    #[test]
    fn zero_target_fits_zero_weights() {
        let t = BsdfTable::zeros(DirectionGrid::square(4), WalkMode::MultipleOnly, 0, String::new());
        let r = fit_direct(&stack(), &t, &FitOptions::default()).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.params.w1, 0.0);
        assert_eq!(r.params.w2, 0.0);
    }

    #[test]
    fn lambert_target_recovers_w2() {
        let grid = DirectionGrid::square(6);
        let mut t = BsdfTable::zeros(grid, WalkMode::MultipleOnly, 0, String::new());
        let half = grid.incident_count();
        for i in 0..grid.incident_count() {
            for o in 0..half {
                let k = t.index(i, o);
                t.values[k..k + 3].fill((0.2 / std::f64::consts::PI) as f32);
            }
        }
        let r = fit_direct(&stack(), &t, &FitOptions::default()).unwrap();
        assert!(r.mae < 1e-3, "{}", r.mae);
        assert!((r.params.w2 - 0.2).abs() < 0.01, "{}", r.params.w2);
        assert!(r.params.w1 < 0.02, "{}", r.params.w1);
    }
}
