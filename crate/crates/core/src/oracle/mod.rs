//! Monte Carlo reference for the layered medium: random walks, a
//! single-scattering point estimator, BSDF tabulation and furnace tallies.

mod table;
mod walk;

pub use table::{
    table_mae, tabulate, tabulate_analytic, BsdfTable, DirectionGrid, TabulateConfig,
    GRAZING_COS, PARAM_UNIFORM_COS_PHI, TABLE_MAGIC, TABLE_VERSION,
};
pub(crate) use table::ByteCursor;
pub use walk::{
    interaction_fraction, random_walk, single_scatter_estimate, ExitSide, WalkMode, WalkOutcome,
    DEEP_WALK,
};

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use crate::layer::LayerStack;
use crate::real::{to_f64, Real};
use crate::sampler::RngSource;
use crate::spectrum::Spectrum;
use crate::vec3::Vec3;

/// Independent stream seed for task `index` of a run seeded with `seed`
/// (SplitMix64 finalizer).
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded generator for task `index`.
pub fn task_rng(seed: u64, index: u64) -> RngSource<Pcg64Mcg> {
    RngSource(Pcg64Mcg::seed_from_u64(stream_seed(seed, index)))
}

/// Monte Carlo energy tally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FurnaceEstimate {
    pub albedo: Spectrum<f64>,
    /// Standard error of the channel mean.
    pub std_error: f64,
    pub walks: u64,
}

const FURNACE_CHUNK: u64 = 1 << 14;

/// Total energy leaving the stack (both hemispheres, plus unscattered light
/// for [`WalkMode::FullDelta`]) under unit incident irradiance from `wi`.
///
/// Walks are split into fixed chunks with their own streams; the result does
/// not depend on the thread count.
pub fn furnace_albedo<R: Real>(
    stack: &LayerStack<R>,
    wi: Vec3<R>,
    walks: u64,
    mode: WalkMode,
    seed: u64,
) -> FurnaceEstimate {
    let chunks = walks.div_ceil(FURNACE_CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = FURNACE_CHUNK.min(walks - c * FURNACE_CHUNK);
            let mut rng = task_rng(seed, c);
            let mut sum = Spectrum::<f64>::zero();
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let out = random_walk(stack, wi, &mut rng, DEEP_WALK, mode);
                if out.side == ExitSide::Absorbed || !mode.accepts(out.bounces) {
                    continue;
                }
                let t = Spectrum::new(
                    to_f64(out.throughput.r),
                    to_f64(out.throughput.g),
                    to_f64(out.throughput.b),
                );
                sum += t;
                sum_sq += t.mean() * t.mean();
            }
            (sum, sum_sq)
        })
        .reduce(
            || (Spectrum::zero(), 0.0),
            |a, b| (a.0 + b.0, a.1 + b.1),
        );
    let n = walks as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean.mean() * mean.mean()).max(0.0);
    FurnaceEstimate {
        albedo: mean,
        std_error: (var / n).sqrt(),
        walks,
    }
}
