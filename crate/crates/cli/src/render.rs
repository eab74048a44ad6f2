//! Direct lighting of a sphere over a plane by one quad light.
//!
//! The sphere (radius 1, centred at (0, 0, 1)) wears the material, the
//! plane z = 0 is Lambertian with albedo 0.5, and a horizontal quad light
//! faces down from above. Camera rays go through pixel centres, so every
//! pixel estimates one lighting integral and the three strategies converge
//! to the same image. Directions below a sphere point's tangent plane are
//! blocked by the sphere itself; unscattered (delta) light never reaches
//! the light. The light is not visible to camera rays.

use flakelayer::oracle::task_rng;
use flakelayer::sampler::{pdf_stack, sample_cosine_hemisphere, sample_stack, Event};
use flakelayer::single::eval_stack_single;
use flakelayer::vec3::Frame;
use flakelayer::{LayerStack, Spectrum, Vec3};
use rand::Rng;
use rayon::prelude::*;

use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Strategy {
    Bsdf,
    Light,
    Mis,
}

pub const PLANE_ALBEDO: f64 = 0.5;
pub const LIGHT_CENTER: [f64; 3] = [1.0, -1.0, 4.0];
pub const LIGHT_HALF_SIZE: f64 = 1.5;
pub const LIGHT_RADIANCE: f64 = 5.0;
const EYE: [f64; 3] = [0.0, -5.0, 2.5];
const TARGET: [f64; 3] = [0.0, 0.0, 0.9];
const FOV_Y_DEG: f64 = 45.0;

type V = Vec3<f64>;

fn v(a: [f64; 3]) -> V {
    Vec3::new(a[0], a[1], a[2])
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: Image,
    /// Per-pixel variance of a single sample, averaged over channels.
    pub variance: Vec<f64>,
}

impl RenderOutput {
    pub fn mean_variance(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.variance.len().max(1) as f64
    }
}

enum Hit {
    Sphere(V),
    Plane(V),
}

fn sphere_t(o: V, d: V) -> Option<f64> {
    let oc = o - Vec3::new(0.0, 0.0, 1.0);
    let b = oc.dot(d);
    let c = oc.dot(oc) - 1.0;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    [-b - s, -b + s].into_iter().find(|&t| t > 1e-9)
}

fn trace_camera(o: V, d: V) -> Option<Hit> {
    let ts = sphere_t(o, d);
    let tp = (d.z < 0.0).then(|| -o.z / d.z).filter(|&t| t > 0.0);
    match (ts, tp) {
        (Some(s), Some(p)) if p < s => Some(Hit::Plane(o + d * p)),
        (Some(s), _) => Some(Hit::Sphere(o + d * s)),
        (None, Some(p)) => Some(Hit::Plane(o + d * p)),
        (None, None) => None,
    }
}

/// Distance and cosine at the light if the ray from `p` along `d` reaches it.
fn hit_light(p: V, d: V) -> Option<(f64, f64)> {
    if d.z <= 0.0 {
        return None;
    }
    let c = v(LIGHT_CENTER);
    let t = (c.z - p.z) / d.z;
    let q = p + d * t;
    ((q.x - c.x).abs() <= LIGHT_HALF_SIZE && (q.y - c.y).abs() <= LIGHT_HALF_SIZE).then_some((t, d.z))
}

fn light_pdf(dist: f64, cos_l: f64) -> f64 {
    let area = 4.0 * LIGHT_HALF_SIZE * LIGHT_HALF_SIZE;
    dist * dist / (area * cos_l)
}

/// Whether the sphere blocks the segment from a plane point toward the light.
fn plane_shadowed(p: V, d: V, dist: f64) -> bool {
    sphere_t(p, d).is_some_and(|t| t < dist)
}

struct Shading<'a> {
    stack: &'a LayerStack<f64>,
    strategy: Strategy,
}

impl Shading<'_> {
    fn sample<G: Rng>(&self, hit: &Hit, view: V, rng: &mut flakelayer::sampler::RngSource<G>) -> Spectrum<f64> {
        let mut total = Spectrum::zero();
        let (use_light, use_bsdf) = match self.strategy {
            Strategy::Bsdf => (false, true),
            Strategy::Light => (true, false),
            Strategy::Mis => (true, true),
        };
        let mis = self.strategy == Strategy::Mis;
        if use_light {
            let c = v(LIGHT_CENTER);
            let (a, b): (f64, f64) = (rng.0.random(), rng.0.random());
            let q = Vec3::new(
                c.x + (2.0 * a - 1.0) * LIGHT_HALF_SIZE,
                c.y + (2.0 * b - 1.0) * LIGHT_HALF_SIZE,
                c.z,
            );
            let p = self.point(hit);
            let to = q - p;
            let dist = to.length();
            let d = to / dist;
            let pl = light_pdf(dist, d.z);
            if let Some((f, pb)) = self.eval(hit, view, d, dist) {
                let w = if mis { pl / (pl + pb) } else { 1.0 };
                total += f * (LIGHT_RADIANCE * w / pl);
            }
        }
        if use_bsdf {
            if let Some((weight, d, pb)) = self.sample_dir(hit, view, rng) {
                let p = self.point(hit);
                if let Some((dist, cos_l)) = hit_light(p, d) {
                    let blocked = matches!(hit, Hit::Plane(_)) && plane_shadowed(p, d, dist);
                    if !blocked {
                        let w = if mis {
                            let pl = light_pdf(dist, cos_l);
                            pb / (pb + pl)
                        } else {
                            1.0
                        };
                        total += weight * (LIGHT_RADIANCE * w);
                    }
                }
            }
        }
        total
    }

    fn point(&self, hit: &Hit) -> V {
        match *hit {
            Hit::Sphere(p) | Hit::Plane(p) => p,
        }
    }

    /// `f |cos|` toward `d` and the BSDF sampling density, if `d` is unblocked.
    fn eval(&self, hit: &Hit, view: V, d: V, dist: f64) -> Option<(Spectrum<f64>, f64)> {
        match *hit {
            Hit::Plane(p) => {
                if d.z <= 0.0 || plane_shadowed(p, d, dist) {
                    return None;
                }
                let f = Spectrum::splat(PLANE_ALBEDO / std::f64::consts::PI * d.z);
                Some((f, d.z / std::f64::consts::PI))
            }
            Hit::Sphere(p) => {
                let frame = Frame::from_normal((p - Vec3::new(0.0, 0.0, 1.0)).normalize());
                let (wi, wo) = (frame.to_local(view), frame.to_local(d));
                if wo.z <= 0.0 || wi.z <= 0.0 {
                    return None;
                }
                let f = eval_stack_single(self.stack, wi, wo) * wo.z;
                Some((f, pdf_stack(self.stack, wi, wo)))
            }
        }
    }

    /// Sampled direction with weight `f |cos| / pdf` and its density.
    fn sample_dir<G: Rng>(
        &self,
        hit: &Hit,
        view: V,
        rng: &mut flakelayer::sampler::RngSource<G>,
    ) -> Option<(Spectrum<f64>, V, f64)> {
        match *hit {
            Hit::Plane(_) => {
                let (a, b): (f64, f64) = (rng.0.random(), rng.0.random());
                let d = sample_cosine_hemisphere(a, b);
                Some((Spectrum::splat(PLANE_ALBEDO), d, d.z / std::f64::consts::PI))
            }
            Hit::Sphere(p) => {
                let frame = Frame::from_normal((p - Vec3::new(0.0, 0.0, 1.0)).normalize());
                let wi = frame.to_local(view);
                if wi.z <= 0.0 {
                    return None;
                }
                let rec = sample_stack(self.stack, wi, rng).ok()?;
                if rec.event == Event::Delta || rec.pdf <= 0.0 || rec.wo.z <= 0.0 {
                    return None;
                }
                Some((rec.weight * rec.wo.z, frame.to_world(rec.wo), rec.pdf))
            }
        }
    }
}

pub fn render(
    stack: &LayerStack<f64>,
    strategy: Strategy,
    width: usize,
    height: usize,
    spp: u64,
    seed: u64,
) -> RenderOutput {
    let eye = v(EYE);
    let forward = (v(TARGET) - eye).normalize();
    let right = forward.cross(Vec3::new(0.0, 0.0, 1.0)).normalize();
    let up = right.cross(forward);
    let half_h = (FOV_Y_DEG.to_radians() / 2.0).tan();
    let half_w = half_h * width as f64 / height as f64;
    let shading = Shading { stack, strategy };

    let pixels: Vec<([f64; 3], f64)> = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % width, i / width);
            let sx = (2.0 * (x as f64 + 0.5) / width as f64 - 1.0) * half_w;
            let sy = (1.0 - 2.0 * (y as f64 + 0.5) / height as f64) * half_h;
            let d = (forward + right * sx + up * sy).normalize();
            let Some(hit) = trace_camera(eye, d) else {
                return ([0.0; 3], 0.0);
            };
            let mut rng = task_rng(seed, i as u64);
            let (mut sum, mut sum_sq) = ([0.0f64; 3], 0.0f64);
            for _ in 0..spp {
                let s = shading.sample(&hit, -d, &mut rng).to_array();
                for c in 0..3 {
                    sum[c] += s[c];
                }
                sum_sq += s.iter().map(|x| x * x).sum::<f64>() / 3.0;
            }
            let n = spp as f64;
            let mean = sum.map(|s| s / n);
            let m2 = mean.iter().map(|m| m * m).sum::<f64>() / 3.0;
            let var = if spp > 1 { ((sum_sq / n - m2) * n / (n - 1.0)).max(0.0) } else { 0.0 };
            (mean, var)
        })
        .collect();

    let mut image = Image::new(width, height);
    for (i, (m, _)) in pixels.iter().enumerate() {
        image.set(i % width, i / width, m.map(|c| c as f32));
    }
    RenderOutput {
        image,
        variance: pixels.into_iter().map(|(_, v)| v).collect(),
    }
}
