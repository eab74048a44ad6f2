use crate::layer::{Layer, LayerStack, SubstrateSpec};
use crate::real::Real;
use crate::sampler::{sample_cosine_hemisphere, sample_phase, UniformSource};
use crate::spectrum::Spectrum;
use crate::vec3::Vec3;

/// Which scattering orders a walk or table records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WalkMode {
    /// Exactly one scattering event.
    SingleOnly,
    /// Two or more scattering events.
    MultipleOnly,
    /// One or more scattering events.
    Full,
    /// Everything that leaves the stack, unscattered light included.
    FullDelta,
}

impl WalkMode {
    pub fn tag(self) -> u8 {
        match self {
            WalkMode::SingleOnly => 0,
            WalkMode::MultipleOnly => 1,
            WalkMode::Full => 2,
            WalkMode::FullDelta => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => WalkMode::SingleOnly,
            1 => WalkMode::MultipleOnly,
            2 => WalkMode::Full,
            3 => WalkMode::FullDelta,
            _ => return None,
        })
    }

    /// Whether a walk that left the stack after `bounces` events counts.
    pub fn accepts(self, bounces: u32) -> bool {
        match self {
            WalkMode::SingleOnly => bounces == 1,
            WalkMode::MultipleOnly => bounces >= 2,
            WalkMode::Full => bounces >= 1,
            WalkMode::FullDelta => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitSide {
    Top,
    Bottom,
    /// Terminated inside the medium: depth cap reached, or a second event
    /// in single-only mode.
    Absorbed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkOutcome<R> {
    pub exit_direction: Vec3<R>,
    pub throughput: Spectrum<R>,
    pub bounces: u32,
    pub side: ExitSide,
}

/// Geometry of the stack along the depth axis: layer `k` spans
/// `[bounds[k], bounds[k + 1]]`, depth growing downwards, unit density.
pub(crate) struct Slabs<'a, R> {
    layers: &'a [Layer<R>],
    bounds: Vec<R>,
}

impl<'a, R: Real> Slabs<'a, R> {
    pub(crate) fn new(stack: &'a LayerStack<R>) -> Self {
        let mut bounds = Vec::with_capacity(stack.len() + 1);
        let mut z = R::zero();
        bounds.push(z);
        for l in stack.layers() {
            z += l.thickness();
            bounds.push(z);
        }
        Self {
            layers: stack.layers(),
            bounds,
        }
    }

    /// Extinction of layer `k` along `d` and the path length to the layer
    /// boundary `d` is heading for.
    fn segment(&self, k: usize, depth: R, d: Vec3<R>) -> (R, R) {
        let sigma = self.layers[k].sigma(d);
        let rate = -d.z;
        let dist = if rate > R::zero() {
            (self.bounds[k + 1] - depth) / rate
        } else if rate < R::zero() {
            (depth - self.bounds[k]) / -rate
        } else {
            R::infinity()
        };
        (sigma, dist)
    }

    /// Transports along `d` from `(k, depth)` until the exponential budget
    /// `tau` runs out (interaction) or the stack is left.
    fn fly(&self, mut k: usize, mut depth: R, d: Vec3<R>, mut tau: R) -> Flight<R> {
        loop {
            let (sigma, dist) = self.segment(k, depth, d);
            let opt = sigma * dist;
            if tau < opt {
                let t = tau / sigma;
                return Flight::Interact(k, depth - d.z * t);
            }
            tau -= opt;
            if d.z > R::zero() {
                if k == 0 {
                    return Flight::ExitTop;
                }
                depth = self.bounds[k];
                k -= 1;
            } else {
                if k + 1 == self.layers.len() {
                    return Flight::ExitBottom;
                }
                k += 1;
                depth = self.bounds[k];
            }
        }
    }

    /// Optical depth from `(k, depth)` to the outside along `d`.
    fn escape_depth(&self, k: usize, depth: R, d: Vec3<R>) -> R {
        if d.z == R::zero() {
            return R::infinity();
        }
        let mut od = R::zero();
        let mut k = k;
        let mut depth = depth;
        loop {
            let (sigma, dist) = self.segment(k, depth, d);
            od += sigma * dist;
            if !od.is_finite() {
                return od;
            }
            if d.z > R::zero() {
                if k == 0 {
                    return od;
                }
                depth = self.bounds[k];
                k -= 1;
            } else {
                if k + 1 == self.layers.len() {
                    return od;
                }
                k += 1;
                depth = self.bounds[k];
            }
        }
    }
}

enum Flight<R> {
    Interact(usize, R),
    ExitTop,
    ExitBottom,
}

fn exp_sample<R: Real, U: UniformSource<R> + ?Sized>(u: &mut U) -> R {
    let x = u.next_uniform().unwrap_or(R::zero());
    -(R::one() - x).ln()
}

fn uniform<R: Real, U: UniformSource<R> + ?Sized>(u: &mut U) -> R {
    u.next_uniform().unwrap_or(R::zero())
}

/// Analog random walk of light entering the stack from direction `wi`.
///
/// Free flights are sampled against the direction-dependent extinction of
/// whichever layer the path is in; boundaries between layers do not deflect
/// the path. At each event the throughput is multiplied by the layer's
/// reflectance `F` and a new direction is drawn from the phase function. The
/// Lambertian substrate scatters with its albedo and counts as an event.
pub fn random_walk<R: Real, U: UniformSource<R> + ?Sized>(
    stack: &LayerStack<R>,
    wi: Vec3<R>,
    u: &mut U,
    max_depth: u32,
    mode: WalkMode,
) -> WalkOutcome<R> {
    let slabs = Slabs::new(stack);
    let n = stack.len();
    let mut d = -wi;
    let mut k = 0usize;
    let mut depth = R::zero();
    let mut throughput = Spectrum::one();
    let mut bounces = 0u32;
    let absorbed = |d, throughput, bounces| WalkOutcome {
        exit_direction: d,
        throughput,
        bounces,
        side: ExitSide::Absorbed,
    };

    loop {
        let tau = exp_sample(u);
        match slabs.fly(k, depth, d, tau) {
            Flight::ExitTop => {
                return WalkOutcome {
                    exit_direction: d,
                    throughput,
                    bounces,
                    side: ExitSide::Top,
                }
            }
            Flight::ExitBottom => match stack.substrate() {
                SubstrateSpec::None => {
                    return WalkOutcome {
                        exit_direction: d,
                        throughput,
                        bounces,
                        side: ExitSide::Bottom,
                    }
                }
                SubstrateSpec::Lambertian { albedo } => {
                    if bounces >= max_depth || (mode == WalkMode::SingleOnly && bounces >= 1) {
                        return absorbed(d, throughput, bounces);
                    }
                    let u1 = uniform(u);
                    let u2 = uniform(u);
                    d = sample_cosine_hemisphere(u1, u2);
                    throughput = throughput * *albedo;
                    bounces += 1;
                    k = n - 1;
                    depth = slabs.bounds[n];
                }
            },
            Flight::Interact(layer, at) => {
                if bounces >= max_depth || (mode == WalkMode::SingleOnly && bounces >= 1) {
                    return absorbed(d, throughput, bounces);
                }
                let l = &stack.layers()[layer];
                let w_in = -d;
                let u1 = uniform(u);
                let u2 = uniform(u);
                let w_out = sample_phase(l, w_in, u1, u2);
                throughput = throughput * l.reflectance(w_in, w_out);
                d = w_out;
                bounces += 1;
                k = layer;
                depth = at;
                if throughput.is_black() {
                    return absorbed(d, throughput, bounces);
                }
            }
        }
    }
}

/// Point estimate of the single-scattering BSDF `f(wi, wo)` from `walks`
/// free flights along `-wi`.
///
/// Each flight is sampled to its first event by the same tracking as
/// [`random_walk`]; the event is then connected to `wo` with the layer's
/// reflectance and phase function and the optical depth the outgoing leg
/// crosses. Flights reaching a substrate connect through its Lambertian
/// lobe. The estimator is unbiased for the depth integral the analytic model
/// evaluates in closed form.
pub fn single_scatter_estimate<R: Real, U: UniformSource<R> + ?Sized>(
    stack: &LayerStack<R>,
    wi: Vec3<R>,
    wo: Vec3<R>,
    u: &mut U,
    walks: u64,
) -> Spectrum<f64> {
    let slabs = Slabs::new(stack);
    let n = stack.len();
    let co = wo.z.abs();
    let mut sum = Spectrum::<f64>::zero();
    for _ in 0..walks {
        let tau = exp_sample(u);
        match slabs.fly(0, R::zero(), -wi, tau) {
            Flight::Interact(k, at) => {
                let l = &stack.layers()[k];
                let escape = slabs.escape_depth(k, at, wo);
                let c = l.reflectance(wi, wo) * (l.phase_value(wi, wo) * (-escape).exp() / co);
                sum += c.cast();
            }
            Flight::ExitBottom => {
                if let SubstrateSpec::Lambertian { albedo } = stack.substrate() {
                    if wo.z > R::zero() {
                        let escape = slabs.escape_depth(n - 1, slabs.bounds[n], wo);
                        sum += (*albedo * ((-escape).exp() / R::PI())).cast();
                    }
                }
            }
            Flight::ExitTop => {}
        }
    }
    sum / walks as f64
}

/// Hit rate diagnostics used by tests: fraction of flights along `-wi` that
/// interact before leaving.
pub fn interaction_fraction<R: Real, U: UniformSource<R> + ?Sized>(
    stack: &LayerStack<R>,
    wi: Vec3<R>,
    u: &mut U,
    walks: u64,
) -> f64 {
    let slabs = Slabs::new(stack);
    let mut hits = 0u64;
    for _ in 0..walks {
        let tau = exp_sample(u);
        if let Flight::Interact(..) = slabs.fly(0, R::zero(), -wi, tau) {
            hits += 1;
        }
    }
    hits as f64 / walks as f64
}

/// Depth cap used by the furnace and the tests when energy must not leak.
pub const DEEP_WALK: u32 = 100_000;
