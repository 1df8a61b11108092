//! Random part specifications.

use super::swept::{chain, min_clearance};
use super::{derive_seed, BendSpec, DatagenError, FlangeDepth, HoleSpec, Layout, PartSpec, Profile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_ATTEMPTS: usize = 1000;
/// Minimum mid-surface distance between profile elements three or more apart, in thicknesses.
pub const CLEARANCE: f64 = 1.5;

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn flat(rng: &mut ChaCha8Rng, t: f64) -> f64 {
    round1(rng.gen_range(2.5 * t..=100.0)).max(round1(2.5 * t + 0.05))
}

fn bend(rng: &mut ChaCha8Rng, t: f64, max_deg: u32, direction: i8) -> BendSpec {
    let r = round1(rng.gen_range(0.5 * t..=3.0 * t)).max(0.1);
    let deg = rng.gen_range(30..=max_deg);
    BendSpec { direction, inner_radius: r, angle: (deg as f64).to_radians() }
}

/// Draws a realizable spec for `profile`, deterministically from `seed`.
pub fn sample_spec(seed: u64, profile: Profile) -> Result<PartSpec, DatagenError> {
    for attempt in 0..MAX_ATTEMPTS as u64 {
        let s = derive_seed(seed, attempt);
        if let Some(spec) = draw(s, profile) {
            return Ok(spec);
        }
    }
    Err(DatagenError::Exhausted(MAX_ATTEMPTS))
}

fn draw(seed: u64, profile: Profile) -> Option<PartSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = (rng.gen_range(10..=50) as f64) / 10.0;
    if profile == Profile::Corners {
        let base_x = rng.gen_range(20..=150) as f64;
        let base_y = rng.gen_range(20..=150) as f64;
        let bends = vec![bend(&mut rng, t, 90, 1), bend(&mut rng, t, 90, 1)];
        let flanges = vec![FlangeDepth::Constant { depth: flat(&mut rng, t) }, FlangeDepth::Constant { depth: flat(&mut rng, t) }];
        return Some(PartSpec {
            seed,
            profile,
            thickness: t,
            layout: Layout::Corner { base_x, base_y },
            flanges,
            bends,
            holes: Vec::new(),
        });
    }

    let width = rng.gen_range(20..=200) as f64;
    let n = rng.gen_range(1..=8usize);
    let bends: Vec<BendSpec> =
        (0..n).map(|_| {
            let dir = if rng.gen_bool(0.5) { 1 } else { -1 };
            bend(&mut rng, t, 135, dir)
        }).collect();
    let mut flanges: Vec<FlangeDepth> = (0..=n).map(|_| FlangeDepth::Constant { depth: flat(&mut rng, t) }).collect();
    if profile == Profile::Tapered {
        let (a, b) = (flat(&mut rng, t), flat(&mut rng, t));
        if (a - b).abs() < 1.0 {
            return None;
        }
        flanges[n] = FlangeDepth::Linear { start: a, end: b };
    }
    let mut holes = Vec::new();
    if profile == Profile::Holes {
        let margin = (2.0 * t).max(2.0);
        let count = rng.gen_range(1..=2);
        // Holes stay off the last flange so the end cap is always a plain quad.
        for _ in 0..count {
            let k = rng.gen_range(0..n);
            let depth = flanges[k].min();
            let d_max = depth.min(width) - 2.0 * margin;
            let d_min = t.max(1.0);
            if d_max < d_min {
                return None;
            }
            let d = round1(rng.gen_range(d_min..=d_max)).clamp(d_min, d_max);
            let rho = 0.5 * d;
            let along = rng.gen_range(margin + rho..=depth - margin - rho);
            let across = rng.gen_range(margin + rho..=width - margin - rho);
            let h = HoleSpec { flange: k, along, across, diameter: d, side: false };
            let clash = holes.iter().any(|o: &HoleSpec| {
                o.flange == k && ((o.along - along).hypot(o.across - across) < 0.5 * o.diameter + rho + margin)
            });
            if clash {
                return None;
            }
            holes.push(h);
        }
        if rng.gen_bool(0.5) {
            let k = rng.gen_range(0..n);
            let depth = flanges[k].min();
            let d = t * rng.gen_range(0.3..=0.6);
            let rho = 0.5 * d;
            if depth - 2.0 * (margin + rho) <= 0.0 {
                return None;
            }
            let along = rng.gen_range(margin + rho..=depth - margin - rho);
            let clash = holes.iter().any(|o| o.flange == k && (o.along - along).abs() < 0.5 * o.diameter + rho + margin);
            if clash {
                return None;
            }
            holes.push(HoleSpec { flange: k, along, across: 0.0, diameter: d, side: true });
        }
    }
    let spec = PartSpec { seed, profile, thickness: t, layout: Layout::Swept { width }, flanges, bends, holes };
    (min_clearance(&chain(&spec)) >= CLEARANCE * t).then_some(spec)
}
