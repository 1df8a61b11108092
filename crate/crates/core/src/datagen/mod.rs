//! Synthetic sheet-metal parts with exact ground truth.
//!
//! Parts are built constructively: a side profile of straight flanges joined
//! by tangent arcs is swept along the width, or two bends are folded up from
//! adjacent edges of a base plate (corner template). Face ids follow the
//! construction order documented on [`realize`], which is what lets the
//! ground truth name faces exactly.

mod corner;
mod dataset;
mod fixtures;
mod labels;
mod sample;
mod swept;
mod validate;

pub use dataset::{
    build_dataset, read_manifest, sample_part, split_counts, write_manifest, DatasetOptions, ManifestRecord, Split,
    MANIFEST_NAME,
};
pub use fixtures::{
    bspline_cylinder_patch, cube, l_bracket, l_bracket_bspline, plate, plate_with_hole, plate_with_side_hole, u_channel,
};
pub use labels::{label_collision, label_time, TimeNoise};
pub use sample::{sample_spec, MAX_ATTEMPTS};
pub use validate::{compare, validate_files, validate_manifest, PartOutcome, ValidationReport, PROPERTY_TOL};

use crate::brep::{BrepError, BrepSolid};
pub use crate::featrec::HoleHost;
use crate::featrec::{sample_fractions, FlangeStats, Role};
use crate::step::{write_step, StepError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("spec is not realizable: {0}")]
    Unrealizable(String),
    #[error("no realizable spec after {0} attempts")]
    Exhausted(usize),
    #[error(transparent)]
    Brep(#[from] BrepError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("manifest error: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Plain,
    Holes,
    Corners,
    Tapered,
}

impl Profile {
    pub const ALL: [Profile; 4] = [Profile::Plain, Profile::Holes, Profile::Corners, Profile::Tapered];

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Plain => "plain",
            Profile::Holes => "holes",
            Profile::Corners => "corners",
            Profile::Tapered => "tapered",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(Profile::Plain),
            "holes" => Ok(Profile::Holes),
            "corners" => Ok(Profile::Corners),
            "tapered" => Ok(Profile::Tapered),
            other => Err(format!("unknown profile {other:?} (plain|holes|corners|tapered)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendSpec {
    /// +1 folds toward the upper side of the profile, −1 toward the lower.
    pub direction: i8,
    pub inner_radius: f64,
    /// Arc angle of the bend, rad.
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlangeDepth {
    Constant { depth: f64 },
    /// Depth `start` at y = 0 varying linearly to `end` at y = width.
    Linear { start: f64, end: f64 },
}

impl FlangeDepth {
    pub fn at(&self, frac: f64) -> f64 {
        match *self {
            FlangeDepth::Constant { depth } => depth,
            FlangeDepth::Linear { start, end } => start + (end - start) * frac,
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            FlangeDepth::Constant { depth } => depth,
            FlangeDepth::Linear { start, end } => start.min(end),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    /// Flange index along the profile.
    pub flange: usize,
    /// Distance of the centre from the flange's start tangency line, mm.
    pub along: f64,
    /// Position across the width (shell holes only), mm.
    pub across: f64,
    pub diameter: f64,
    /// Side holes run along the width through the flange at mid-thickness.
    pub side: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    /// Profile in the x–z plane swept along y ∈ [0, width].
    Swept { width: f64 },
    /// Base plate [0, base_x] × [0, base_y]; bend 0 on the edge x = base_x,
    /// bend 1 on the edge y = base_y, both folding up.
    Corner { base_x: f64, base_y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub seed: u64,
    pub profile: Profile,
    pub thickness: f64,
    pub layout: Layout,
    /// Swept: n + 1 flanges for n bends. Corner: one flange per bend.
    pub flanges: Vec<FlangeDepth>,
    pub bends: Vec<BendSpec>,
    pub holes: Vec<HoleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBend {
    pub inner_face: usize,
    pub outer_face: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub length: f64,
    pub angle: f64,
    pub orientation: i8,
    pub direction: i8,
    pub side_a_face: usize,
    pub side_b_face: usize,
    pub flange_a: FlangeStats,
    pub flange_b: FlangeStats,
    pub corner_partners: Vec<usize>,
    /// Axis segment endpoints over the bend length.
    pub axis: [[f64; 3]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtHole {
    pub wall_faces: Vec<usize>,
    pub host: HoleHost,
    pub diameter: Option<f64>,
    pub is_side_hole: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub time_s: f64,
    pub collision: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema_version: u32,
    pub spec: PartSpec,
    pub thickness: f64,
    pub face_count: usize,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub through_holes: usize,
    pub roles: Vec<Role>,
    /// Closed-form area of every face, mm².
    pub face_areas: Vec<f64>,
    pub total_area: f64,
    pub bends: Vec<GtBend>,
    pub holes: Vec<GtHole>,
    pub contour_faces: Vec<usize>,
    pub labels: Labels,
}

/// A realized part.
#[derive(Debug, Clone)]
pub struct Part {
    pub solid: BrepSolid,
    pub truth: GroundTruth,
    pub step: Vec<u8>,
}

/// Geometry-level truth produced by the layout builders; labels are filled in by [`realize`].
pub(crate) struct Built {
    pub solid: BrepSolid,
    /// Face ids of the upper and lower shell pieces.
    pub upper: Vec<usize>,
    pub lower: Vec<usize>,
    pub face_areas: Vec<f64>,
    pub bends: Vec<BuiltBend>,
    pub holes: Vec<GtHole>,
    pub vertex_count: usize,
    pub edge_count: usize,
}

pub(crate) struct BuiltBend {
    pub upper_face: usize,
    pub lower_face: usize,
    pub direction: i8,
    pub inner_radius: f64,
    pub angle: f64,
    pub length: f64,
    /// Inner-side planar faces before and after the bend, with their flange length samples.
    pub before: (usize, Vec<f64>),
    pub after: (usize, Vec<f64>),
    pub axis: [crate::geom::Vec3; 2],
    pub shares_vertex_with: Vec<usize>,
}

/// Builds the solid, its ground truth and its STEP encoding.
///
/// Swept face order: upper pieces (flange 0, bend 1, flange 1, …), lower
/// pieces in the same order, start cap, end cap, profile face y = 0, profile
/// face y = width, shell-hole walls, side-hole walls.
///
/// Corner face order: upper pieces (base, bend 0, flange 0, bend 1, flange
/// 1), lower pieces likewise, flange 0 end cap, flange 1 end cap, profile
/// faces y = 0, x = 0, y = base_y, x = base_x.
pub fn realize(spec: &PartSpec) -> Result<Part, DatagenError> {
    let built = match spec.layout {
        Layout::Swept { width } => swept::build(spec, width)?,
        Layout::Corner { base_x, base_y } => corner::build(spec, base_x, base_y)?,
    };
    let truth = truth_from(spec, built.solid.faces.len(), &built);
    let step = write_step(&built.solid)?;
    Ok(Part { solid: built.solid, truth, step })
}

fn truth_from(spec: &PartSpec, face_count: usize, b: &Built) -> GroundTruth {
    let t = spec.thickness;
    // Top shell: the side holding the largest shell face, ties to the smallest id.
    let mut best: Option<(f64, usize)> = None;
    for &f in b.upper.iter().chain(&b.lower) {
        let a = b.face_areas[f];
        best = match best {
            None => Some((a, f)),
            Some((ba, bf)) => {
                if a > ba * (1.0 + 1e-9) || (a >= ba * (1.0 - 1e-9) && f < bf) {
                    Some((a, f))
                } else {
                    Some((ba, bf))
                }
            }
        };
    }
    let top_is_upper = best.map_or(true, |(_, f)| b.upper.contains(&f));
    let mut roles = vec![Role::Side; face_count];
    for &f in &b.upper {
        roles[f] = if top_is_upper { Role::Top } else { Role::Bottom };
    }
    for &f in &b.lower {
        roles[f] = if top_is_upper { Role::Bottom } else { Role::Top };
    }

    // Bends are listed by inner face id, as the recognizer reports them.
    let inner_of = |bb: &BuiltBend| if bb.direction > 0 { bb.upper_face } else { bb.lower_face };
    let mut order: Vec<usize> = (0..b.bends.len()).collect();
    order.sort_by_key(|&i| inner_of(&b.bends[i]));
    let mut bends: Vec<GtBend> = order
        .iter()
        .map(|&i| {
            let bb = &b.bends[i];
            let (inner, outer) =
                if bb.direction > 0 { (bb.upper_face, bb.lower_face) } else { (bb.lower_face, bb.upper_face) };
            let (a, bside) = if bb.before.0 < bb.after.0 { (&bb.before, &bb.after) } else { (&bb.after, &bb.before) };
            GtBend {
                inner_face: inner,
                outer_face: outer,
                inner_radius: bb.inner_radius,
                outer_radius: bb.inner_radius + t,
                length: bb.length,
                angle: bb.angle,
                orientation: if roles[inner] == Role::Top { 1 } else { -1 },
                direction: bb.direction,
                side_a_face: a.0,
                side_b_face: bside.0,
                flange_a: FlangeStats::from_samples(&a.1).expect("16 samples"),
                flange_b: FlangeStats::from_samples(&bside.1).expect("16 samples"),
                corner_partners: Vec::new(),
                axis: [bb.axis[0].into(), bb.axis[1].into()],
            }
        })
        .collect();
    for (i, &oi) in order.iter().enumerate() {
        for (j, &oj) in order.iter().enumerate() {
            if i == j {
                continue;
            }
            let (p, q) = (&b.bends[oi].axis, &b.bends[oj].axis);
            let close = crate::geom::segment_distance(&p[0], &p[1], &q[0], &q[1]) < 2.0 * t;
            if close || b.bends[oi].shares_vertex_with.contains(&oj) {
                bends[i].corner_partners.push(j);
            }
        }
    }

    let hole_walls: Vec<usize> = b.holes.iter().flat_map(|h| h.wall_faces.iter().copied()).collect();
    let contour_faces: Vec<usize> =
        (0..face_count).filter(|f| roles[*f] == Role::Side && !hole_walls.contains(f)).collect();
    let total_area = b.face_areas.iter().sum();
    let mut truth = GroundTruth {
        schema_version: GT_SCHEMA_VERSION,
        spec: spec.clone(),
        thickness: t,
        face_count,
        vertex_count: b.vertex_count,
        edge_count: b.edge_count,
        through_holes: b.holes.len(),
        roles,
        face_areas: b.face_areas.clone(),
        total_area,
        bends,
        holes: b.holes.clone(),
        contour_faces,
        labels: Labels { time_s: 0.0, collision: 0 },
    };
    truth.labels = Labels {
        time_s: label_time(&truth, TimeNoise::Seeded(spec.seed)),
        collision: label_collision(&truth),
    };
    truth
}

/// Mixes a base seed with a stream index (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
