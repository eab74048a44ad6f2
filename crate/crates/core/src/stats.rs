//! Pearson chi-square goodness-of-fit testing of direction samplers.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::layer::LayerStack;
use crate::oracle::task_rng;
use crate::quadrature::single_scatter_albedo;
use crate::sampler::{layer_probabilities, pdf_stack, sample_stack, Event};
use crate::spectrum::Spectrum;
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of low-expectation cells merged into one.
    pub pooled_cells: usize,
}

impl ChiSquareOutcome {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// Per-test significance keeping the family-wise rate at `alpha` over
/// `tests` independent tests (Sidak correction).
pub fn sidak(alpha: f64, tests: usize) -> f64 {
    1.0 - (1.0 - alpha).powf(1.0 / tests as f64)
}

/// Chi-square test of observed against expected counts. Cells with an
/// expectation below `min_expected` are pooled into a single cell. A cell
/// with zero expectation but observed samples fails outright.
pub fn chi_square(observed: &[f64], expected: &[f64], min_expected: f64) -> ChiSquareOutcome {
    assert_eq!(observed.len(), expected.len());
    let mut order: Vec<usize> = (0..expected.len()).collect();
    order.sort_by(|&a, &b| expected[a].total_cmp(&expected[b]));

    let mut statistic = 0.0;
    let mut cells = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    let mut pooled_cells = 0usize;
    for &i in &order {
        let (o, e) = (observed[i], expected[i]);
        if e <= 0.0 {
            if o > 0.0 {
                return ChiSquareOutcome {
                    statistic: f64::INFINITY,
                    dof: 0,
                    p_value: 0.0,
                    pooled_cells,
                };
            }
            continue;
        }
        if e < min_expected {
            pooled_obs += o;
            pooled_exp += e;
            pooled_cells += 1;
        } else {
            statistic += (o - e) * (o - e) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1);
    let p_value = ChiSquared::new(dof as f64)
        .map(|d| d.sf(statistic))
        .unwrap_or(0.0);
    ChiSquareOutcome {
        statistic,
        dof,
        p_value,
        pooled_cells,
    }
}

/// Histogram over the sphere, uniform in `theta` and `phi`.
#[derive(Debug, Clone)]
pub struct SphereHistogram {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl SphereHistogram {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        Self { n_theta, n_phi }
    }

    pub fn cells(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn cell_of(&self, w: Vec3<f64>) -> usize {
        let theta = w.z.clamp(-1.0, 1.0).acos();
        let mut phi = w.y.atan2(w.x);
        if phi < 0.0 {
            phi += 2.0 * std::f64::consts::PI;
        }
        let t = ((theta / std::f64::consts::PI) * self.n_theta as f64) as usize;
        let p = ((phi / (2.0 * std::f64::consts::PI)) * self.n_phi as f64) as usize;
        t.min(self.n_theta - 1) * self.n_phi + p.min(self.n_phi - 1)
    }

    /// Expected counts for `samples` draws from `pdf`, integrating each cell
    /// with a `sub x sub` midpoint rule in `(theta, phi)`.
    pub fn expected<F>(&self, pdf: F, samples: f64, sub: usize) -> Vec<f64>
    where
        F: Fn(Vec3<f64>) -> f64 + Sync,
    {
        let dt = std::f64::consts::PI / self.n_theta as f64;
        let dp = 2.0 * std::f64::consts::PI / self.n_phi as f64;
        (0..self.cells())
            .into_par_iter()
            .map(|c| {
                let (ti, pi) = (c / self.n_phi, c % self.n_phi);
                let mut acc = 0.0;
                for a in 0..sub {
                    let theta = (ti as f64 + (a as f64 + 0.5) / sub as f64) * dt;
                    let (st, ct) = theta.sin_cos();
                    for b in 0..sub {
                        let phi = (pi as f64 + (b as f64 + 0.5) / sub as f64) * dp;
                        let (sp, cp) = phi.sin_cos();
                        acc += pdf(Vec3::new(st * cp, st * sp, ct)) * st;
                    }
                }
                acc * dt * dp / (sub * sub) as f64 * samples
            })
            .collect()
    }
}

/// Result of checking [`sample_stack`] against [`pdf_stack`] for one
/// incident direction.
#[derive(Debug, Clone)]
pub struct SamplerCheck {
    pub chi_square: ChiSquareOutcome,
    /// Mean of `weight |cos wo|` over the samples (delta events included).
    pub estimated_albedo: Spectrum<f64>,
    /// Quadrature of `f |cos wo|` plus delta transmittance.
    pub quadrature_albedo: Spectrum<f64>,
    pub samples: u64,
}

impl SamplerCheck {
    pub fn albedo_relative_error(&self) -> f64 {
        let q = self.quadrature_albedo.mean();
        (self.estimated_albedo.mean() - q).abs() / q.max(1e-12)
    }
}

/// Draws `samples` directions from the stack sampler and compares their
/// histogram with the expected counts from the pdf; delta events form one
/// extra cell with expectation `p_delta N`.
pub fn check_sampler(
    stack: &LayerStack<f64>,
    wi: Vec3<f64>,
    samples: u64,
    hist: &SphereHistogram,
    seed: u64,
) -> SamplerCheck {
    const CHUNK: u64 = 1 << 15;
    let cells = hist.cells();
    let chunks = samples.div_ceil(CHUNK);
    let (mut observed, albedo_sum) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = task_rng(seed, c);
            let mut counts = vec![0.0; cells + 1];
            let mut sum = Spectrum::<f64>::zero();
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                let rec = sample_stack(stack, wi, &mut rng).expect("rng never runs dry");
                if rec.event == Event::Delta {
                    counts[cells] += 1.0;
                    sum += rec.weight;
                } else if rec.pdf > 0.0 {
                    counts[hist.cell_of(rec.wo)] += 1.0;
                    sum += rec.weight * rec.wo.z.abs();
                }
            }
            (counts, sum)
        })
        .reduce(
            || (vec![0.0; cells + 1], Spectrum::zero()),
            |mut a, b| {
                a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
                (a.0, a.1 + b.1)
            },
        );
    let n = samples as f64;
    let mut expected = hist.expected(|wo| pdf_stack(stack, wi, wo), n, 16);
    expected.push(layer_probabilities(stack, wi).delta * n);
    observed.truncate(cells + 1);
    SamplerCheck {
        chi_square: chi_square(&observed, &expected, 5.0),
        estimated_albedo: albedo_sum / n,
        quadrature_albedo: single_scatter_albedo(stack, wi, 1024, 512),
        samples,
    }
}
