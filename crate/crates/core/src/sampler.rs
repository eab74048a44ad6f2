//! Importance sampling of the single-scattering stack BSDF.
//!
//! A sample first picks an event (a layer, the delta transmission or the
//! substrate) with the probability that a ray along `-wi` first interacts
//! there, then draws `wo` from that layer's phase function. The pdf of `wo`
//! is the mixture of all layer phase functions under the same event
//! probabilities, so the weight `f / pdf` stays bounded.
//!
//! Uniform consumption is fixed: one variate for the event, then one pair
//! for the direction, always three per sample.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layer::{Layer, LayerStack, Phase, SubstrateSpec};
use crate::microflake::SggxMatrix;
use crate::real::{lit, Real};
use crate::single::{delta_transmittance, eval_stack_single, layer_optical_depth};
use crate::spectrum::Spectrum;
use crate::vec3::{Frame, Vec3};

/// Stream of uniform variates in `[0, 1)`.
pub trait UniformSource<R> {
    /// Next variate, `None` once the stream is exhausted.
    fn next_uniform(&mut self) -> Option<R>;
}

/// Adapts any `rand` generator.
#[derive(Debug, Clone)]
pub struct RngSource<G>(pub G);

impl<R: Real, G: Rng> UniformSource<R> for RngSource<G> {
    fn next_uniform(&mut self) -> Option<R> {
        let u: R = lit(self.0.random::<f64>());
        // rounding to f32 may land on 1.0
        Some(u.min(R::one() - R::epsilon()))
    }
}

/// Replays a fixed list of variates.
#[derive(Debug, Clone)]
pub struct SliceSource<'a, R> {
    values: &'a [R],
    pos: usize,
}

impl<'a, R> SliceSource<'a, R> {
    pub fn new(values: &'a [R]) -> Self {
        Self { values, pos: 0 }
    }
}

impl<R: Copy> UniformSource<R> for SliceSource<'_, R> {
    fn next_uniform(&mut self) -> Option<R> {
        let v = self.values.get(self.pos).copied();
        self.pos += 1;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Scatter(usize),
    Delta,
    Substrate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord<R> {
    pub wo: Vec3<R>,
    /// BSDF over pdf, cosine excluded. For delta events the weight is the
    /// transmitted throughput divided by the event probability.
    pub weight: Spectrum<R>,
    /// Solid-angle density, or the discrete probability for delta events.
    pub pdf: R,
    pub event: Event,
}

/// Event probabilities for one incident direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerProbabilities<R> {
    pub scatter: Vec<R>,
    pub delta: R,
    pub substrate: R,
}

impl<R: Real> LayerProbabilities<R> {
    pub fn total(&self) -> R {
        self.scatter.iter().copied().sum::<R>() + self.delta + self.substrate
    }

    /// Inverts the discrete CDF.
    pub fn select(&self, u: R) -> Event {
        let mut acc = R::zero();
        let mut last = None;
        for (k, &p) in self.scatter.iter().enumerate() {
            if p > R::zero() {
                acc += p;
                last = Some(Event::Scatter(k));
                if u < acc {
                    return Event::Scatter(k);
                }
            }
        }
        if self.delta > R::zero() {
            acc += self.delta;
            last = Some(Event::Delta);
            if u < acc {
                return Event::Delta;
            }
        }
        if self.substrate > R::zero() {
            return Event::Substrate;
        }
        last.unwrap_or(Event::Scatter(0))
    }
}

/// Probability that a ray along `-wi` first interacts with each layer; the
/// non-interacting remainder goes to the delta event or the substrate, or is
/// renormalized away when neither exists.
pub fn layer_probabilities<R: Real>(stack: &LayerStack<R>, wi: Vec3<R>) -> LayerProbabilities<R> {
    let mut od = R::zero();
    let mut scatter = Vec::with_capacity(stack.len());
    for layer in stack.layers() {
        let d = layer_optical_depth(layer, wi);
        // e^{-od} (1 - e^{-d})
        scatter.push((-od).exp() * -(-d).exp_m1());
        od += d;
    }
    let residual = (-od).exp();
    let mut probs = LayerProbabilities {
        scatter,
        delta: R::zero(),
        substrate: R::zero(),
    };
    if stack.delta_enabled() {
        probs.delta = residual;
    } else if !stack.substrate().is_none() {
        probs.substrate = residual;
    } else {
        let sum: R = probs.scatter.iter().copied().sum();
        if sum > R::zero() {
            probs.scatter.iter_mut().for_each(|p| *p /= sum);
        } else {
            let n = lit::<R>(probs.scatter.len() as f64);
            probs.scatter.iter_mut().for_each(|p| *p = R::one() / n);
        }
    }
    probs
}

/// Draws `wo` with density equal to the microflake phase function: sample a
/// visible normal from `D(m) <wi, m> / sigma(wi)`, then reflect `wi` about it.
pub fn sample_flake_phase<R: Real>(s: &SggxMatrix<R>, wi: Vec3<R>, u1: R, u2: R) -> Vec3<R> {
    let m = sample_visible_normal(s, wi, u1, u2);
    wi.reflect(m).normalize()
}

/// Visible-normal sampling by projecting the SGGX ellipsoid into a frame
/// around `wi` and mapping a uniform disk sample through the triangular
/// factor of the projected quadratic form.
pub fn sample_visible_normal<R: Real>(s: &SggxMatrix<R>, wi: Vec3<R>, u1: R, u2: R) -> Vec3<R> {
    let r = u1.sqrt();
    let phi = lit::<R>(2.0) * R::PI() * u2;
    let (sp, cp) = phi.sin_cos();
    let u = r * cp;
    let v = r * sp;
    let w = (R::one() - u * u - v * v).max(R::zero()).sqrt();

    let base = Frame::from_normal(wi);
    let mut frames = [
        (base.s, base.t),
        // rotated by 45 degrees about wi
        (
            (base.s + base.t).normalize(),
            (base.t - base.s).normalize(),
        ),
    ]
    .into_iter();
    loop {
        let (wk, wj) = frames.next().expect("at least one frame");
        let s_kk = s.bilinear(wk, wk);
        let s_jj = s.bilinear(wj, wj);
        let s_ii = s.bilinear(wi, wi);
        let s_kj = s.bilinear(wk, wj);
        let s_ki = s.bilinear(wk, wi);
        let s_ji = s.bilinear(wj, wi);
        let minor = s_jj * s_ii - s_ji * s_ji;
        if minor < lit(1e-12) && frames.len() > 0 {
            continue;
        }
        let det = (s_kk * s_jj * s_ii - s_kj * s_kj * s_ii - s_ki * s_ki * s_jj
            - s_ji * s_ji * s_kk
            + lit::<R>(2.0) * s_kj * s_ki * s_ji)
            .abs();
        let sqrt_det = det.sqrt();
        let inv_sqrt_s_ii = R::one() / s_ii.sqrt();
        let tmp = minor.max(R::min_positive_value()).sqrt();
        let mk = Vec3::new(sqrt_det / tmp, R::zero(), R::zero());
        let mj = Vec3::new(
            -inv_sqrt_s_ii * (s_ki * s_ji - s_kj * s_ii) / tmp,
            inv_sqrt_s_ii * tmp,
            R::zero(),
        );
        let mi = Vec3::new(inv_sqrt_s_ii * s_ki, inv_sqrt_s_ii * s_ji, inv_sqrt_s_ii * s_ii);
        let m = (mk * u + mj * v + mi * w).normalize();
        return wk * m.x + wj * m.y + wi * m.z;
    }
}

/// Henyey-Greenstein sampling by inverting the CDF of the scattering cosine
/// around the propagation direction `-wi`.
pub fn sample_hg<R: Real>(g: R, wi: Vec3<R>, u1: R, u2: R) -> Vec3<R> {
    let one = R::one();
    let two = lit::<R>(2.0);
    let cos = if g.abs() < lit(1e-3) {
        one - two * u1
    } else {
        let sq = (one - g * g) / (one - g + two * g * u1);
        (one + g * g - sq * sq) / (two * g)
    }
    .max(-one)
    .min(one);
    let sin = (one - cos * cos).max(R::zero()).sqrt();
    let (sp, cp) = (two * R::PI() * u2).sin_cos();
    Frame::from_normal(-wi).to_world(Vec3::new(sin * cp, sin * sp, cos))
}

/// Cosine-weighted direction in the upper hemisphere.
pub fn sample_cosine_hemisphere<R: Real>(u1: R, u2: R) -> Vec3<R> {
    let r = u1.sqrt();
    let (sp, cp) = (lit::<R>(2.0) * R::PI() * u2).sin_cos();
    Vec3::new(r * cp, r * sp, (R::one() - u1).max(R::zero()).sqrt())
}

/// Draws from a layer's phase function.
pub fn sample_phase<R: Real>(layer: &Layer<R>, wi: Vec3<R>, u1: R, u2: R) -> Vec3<R> {
    match layer.phase() {
        Phase::Flake(s) => sample_flake_phase(s, wi, u1, u2),
        Phase::Hg(g) => sample_hg(*g, wi, u1, u2),
    }
}

/// Density of `wo` under [`sample_stack`], excluding the delta event.
pub fn pdf_stack<R: Real>(stack: &LayerStack<R>, wi: Vec3<R>, wo: Vec3<R>) -> R {
    if wi.z < R::zero() {
        if !stack.substrate().is_none() {
            return R::zero();
        }
        return pdf_upper(&stack.mirrored(), wi.flip_z(), wo.flip_z());
    }
    pdf_upper(stack, wi, wo)
}

fn pdf_upper<R: Real>(stack: &LayerStack<R>, wi: Vec3<R>, wo: Vec3<R>) -> R {
    let probs = layer_probabilities(stack, wi);
    pdf_with(stack, &probs, wi, wo)
}

fn pdf_with<R: Real>(
    stack: &LayerStack<R>,
    probs: &LayerProbabilities<R>,
    wi: Vec3<R>,
    wo: Vec3<R>,
) -> R {
    let mut pdf: R = stack
        .layers()
        .iter()
        .zip(&probs.scatter)
        .filter(|(_, &p)| p > R::zero())
        .map(|(l, &p)| p * l.phase_value(wi, wo))
        .sum();
    if probs.substrate > R::zero() && wo.z > R::zero() {
        pdf += probs.substrate * wo.z / R::PI();
    }
    pdf
}

fn next<R, U: UniformSource<R> + ?Sized>(u: &mut U) -> Result<R> {
    u.next_uniform().ok_or(Error::UniformExhausted)
}

/// Samples an outgoing direction for the single-scattering stack BSDF.
pub fn sample_stack<R: Real, U: UniformSource<R> + ?Sized>(
    stack: &LayerStack<R>,
    wi: Vec3<R>,
    u: &mut U,
) -> Result<SampleRecord<R>> {
    let u0 = next(u)?;
    let u1 = next(u)?;
    let u2 = next(u)?;
    if wi.z < R::zero() {
        if !stack.substrate().is_none() {
            return Err(Error::domain("wi", "opaque stacks are lit from above only"));
        }
        let mut rec = sample_upper(&stack.mirrored(), wi.flip_z(), u0, u1, u2);
        rec.wo = rec.wo.flip_z();
        return Ok(rec);
    }
    Ok(sample_upper(stack, wi, u0, u1, u2))
}

fn sample_upper<R: Real>(stack: &LayerStack<R>, wi: Vec3<R>, u0: R, u1: R, u2: R) -> SampleRecord<R> {
    let probs = layer_probabilities(stack, wi);
    let event = probs.select(u0);
    let wo = match event {
        Event::Delta => {
            let pdf = probs.delta;
            return SampleRecord {
                wo: -wi,
                weight: delta_transmittance(stack, wi) / pdf,
                pdf,
                event,
            };
        }
        Event::Scatter(k) => sample_phase(&stack.layers()[k], wi, u1, u2),
        Event::Substrate => sample_cosine_hemisphere(u1, u2),
    };
    let pdf = pdf_with(stack, &probs, wi, wo);
    let weight = if pdf > R::zero() {
        eval_stack_single(stack, wi, wo) / pdf
    } else {
        Spectrum::zero()
    };
    SampleRecord {
        wo,
        weight,
        pdf,
        event,
    }
}

/// Probability of the substrate event, exposed for tests and diagnostics.
pub fn substrate_probability<R: Real>(stack: &LayerStack<R>, wi: Vec3<R>) -> R {
    match stack.substrate() {
        SubstrateSpec::None => R::zero(),
        SubstrateSpec::Lambertian { .. } => layer_probabilities(stack, wi).substrate,
    }
}
