//! Synthetic process labels derived from ground-truth features.

use super::{derive_seed, GroundTruth};
use crate::geom::{segment_distance, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Noise stream for [`label_time`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeNoise {
    Seeded(u64),
    None,
}

const NOISE_STREAM: u64 = 0x7157;

/// Bending time in seconds: handling base plus per-bend setup, length,
/// corner and short-flange terms, a size term and unit Gaussian noise,
/// clamped at 3 s.
pub fn label_time(truth: &GroundTruth, noise: TimeNoise) -> f64 {
    let t = truth.thickness;
    let mut time = 3.0;
    for b in &truth.bends {
        let short = b.flange_a.min.min(b.flange_b.min) < 3.0 * t;
        time += 4.0
            + 2.0 * b.length / 1000.0
            + if b.corner_partners.is_empty() { 0.0 } else { 3.0 }
            + if short { 1.5 } else { 0.0 };
    }
    time += 0.002 * truth.total_area.sqrt();
    if let TimeNoise::Seeded(seed) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, NOISE_STREAM));
        let z: f64 = StandardNormal.sample(&mut rng);
        time += z;
    }
    time.max(3.0)
}

/// 1 when a flange is too short for the tooling at a bend (under four times
/// the outer radius), or when two opposite folds have axes closer than six
/// thicknesses.
pub fn label_collision(truth: &GroundTruth) -> u8 {
    let t = truth.thickness;
    for b in &truth.bends {
        if b.flange_a.min.min(b.flange_b.min) < 4.0 * (b.inner_radius + t) {
            return 1;
        }
    }
    for (i, a) in truth.bends.iter().enumerate() {
        for b in &truth.bends[i + 1..] {
            if a.direction == b.direction {
                continue;
            }
            let p: Vec<Vec3> = a.axis.iter().chain(&b.axis).map(|x| Vec3::from(*x)).collect();
            if segment_distance(&p[0], &p[1], &p[2], &p[3]) < 6.0 * t {
                return 1;
            }
        }
    }
    0
}
