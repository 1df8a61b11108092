//! Recognizer output compared against generator ground truth.

use super::{read_manifest, DatagenError, GroundTruth};
use crate::brep::{euler_counts, resolve_solid, BrepSolid};
use crate::featrec::{recognize, FeatureReport, FlangeStats};
use crate::step::parse_step;
use serde::Serialize;
use std::path::Path;

/// Relative tolerance on recognized continuous properties.
pub const PROPERTY_TOL: f64 = 1e-6;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PROPERTY_TOL * a.abs().max(b.abs()).max(1.0)
}

fn stats_close(a: &FlangeStats, b: &FlangeStats) -> bool {
    a.to_array().iter().zip(b.to_array()).all(|(x, y)| close(*x, y))
}

/// Mismatches between a report and the ground truth; empty when they agree.
pub fn compare(truth: &GroundTruth, solid: &BrepSolid, report: &FeatureReport) -> Vec<String> {
    let mut bad = Vec::new();
    let c = euler_counts(solid);
    if (c.vertices, c.edges, c.faces) != (truth.vertex_count, truth.edge_count, truth.face_count) {
        bad.push(format!(
            "counts V/E/F {}/{}/{} != {}/{}/{}",
            c.vertices, c.edges, c.faces, truth.vertex_count, truth.edge_count, truth.face_count
        ));
    }
    if c.genus() != Some(truth.through_holes as i64) {
        bad.push(format!(
            "euler characteristic {} with {} inner loops, expected genus {}",
            c.chi(),
            c.inner_loops,
            truth.through_holes
        ));
    }
    if !close(report.thickness, truth.thickness) {
        bad.push(format!("thickness {} != {}", report.thickness, truth.thickness));
    }
    if report.roles != truth.roles {
        bad.push("face roles differ".into());
    }
    if report.bends.len() != truth.bends.len() {
        bad.push(format!("{} bends recognized, {} expected", report.bends.len(), truth.bends.len()));
    } else {
        for (k, (r, g)) in report.bends.iter().zip(&truth.bends).enumerate() {
            if (r.inner_face, r.outer_face) != (g.inner_face, g.outer_face) {
                bad.push(format!("bend {k}: faces ({}, {}) != ({}, {})", r.inner_face, r.outer_face, g.inner_face, g.outer_face));
                continue;
            }
            let props = [
                ("inner radius", r.inner_radius, g.inner_radius),
                ("outer radius", r.outer_radius, g.outer_radius),
                ("length", r.length, g.length),
                ("angle", r.bend_angle, g.angle),
            ];
            for (name, x, y) in props {
                if !close(x, y) {
                    bad.push(format!("bend {k}: {name} {x} != {y}"));
                }
            }
            if r.orientation != g.orientation {
                bad.push(format!("bend {k}: orientation {} != {}", r.orientation, g.orientation));
            }
            if (r.side_a_face, r.side_b_face) != (g.side_a_face, g.side_b_face) {
                bad.push(format!("bend {k}: flange faces differ"));
            }
            if !stats_close(&r.flange_a, &g.flange_a) || !stats_close(&r.flange_b, &g.flange_b) {
                bad.push(format!("bend {k}: flange stats {:?}/{:?} != {:?}/{:?}", r.flange_a, r.flange_b, g.flange_a, g.flange_b));
            }
            if r.corner_partners != g.corner_partners {
                bad.push(format!("bend {k}: corner partners {:?} != {:?}", r.corner_partners, g.corner_partners));
            }
        }
    }
    let mut holes: Vec<_> = truth.holes.iter().map(|h| (h.wall_faces.clone(), h.host, h.is_side_hole, h.diameter)).collect();
    holes.sort_by(|a, b| a.0.cmp(&b.0));
    let found: Vec<_> = report.holes.iter().map(|h| (h.wall_faces.clone(), h.host, h.is_side_hole, h.diameter)).collect();
    let same_holes = holes.len() == found.len()
        && holes.iter().zip(&found).all(|(g, r)| {
            g.0 == r.0
                && g.1 == r.1
                && g.2 == r.2
                && match (g.3, r.3) {
                    (Some(x), Some(y)) => close(x, y),
                    (None, None) => true,
                    _ => false,
                }
        });
    if !same_holes {
        bad.push(format!("holes {found:?} != {holes:?}"));
    }
    if report.outer_contour_face_ids != truth.contour_faces {
        bad.push(format!("contour {:?} != {:?}", report.outer_contour_face_ids, truth.contour_faces));
    }
    bad
}

#[derive(Debug, Clone, Serialize)]
pub struct PartOutcome {
    pub id: usize,
    pub passed: bool,
    pub bends_expected: usize,
    pub bends_matched: usize,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub parts: usize,
    pub passed: usize,
    pub bends_expected: usize,
    pub bends_matched: usize,
    /// Fraction of parts with full agreement.
    pub accuracy: f64,
    pub failures: Vec<PartOutcome>,
}

/// Parses, resolves and recognizes one STEP file and compares it with its ground truth.
pub fn validate_files(id: usize, step: &Path, gt: &Path) -> PartOutcome {
    let fail = |msg: String| PartOutcome { id, passed: false, bends_expected: 0, bends_matched: 0, problems: vec![msg] };
    let truth: GroundTruth = match std::fs::read(gt).map_err(|e| e.to_string()).and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string())) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", gt.display())),
    };
    let bytes = match std::fs::read(step) {
        Ok(b) => b,
        Err(e) => return fail(format!("{}: {e}", step.display())),
    };
    let solid = match parse_step(&bytes).map_err(|e| e.to_string()).and_then(|m| resolve_solid(&m).map_err(|e| e.to_string())) {
        Ok(s) => s,
        Err(e) => return PartOutcome { bends_expected: truth.bends.len(), ..fail(e) },
    };
    let report = match recognize(&solid) {
        Ok(r) => r,
        Err(e) => return PartOutcome { bends_expected: truth.bends.len(), ..fail(e.to_string()) },
    };
    let problems = compare(&truth, &solid, &report);
    let matched = truth
        .bends
        .iter()
        .filter(|g| {
            report.bends.iter().any(|r| {
                r.inner_face == g.inner_face
                    && r.outer_face == g.outer_face
                    && close(r.bend_angle, g.angle)
                    && close(r.inner_radius, g.inner_radius)
                    && close(r.length, g.length)
            })
        })
        .count();
    PartOutcome { id, passed: problems.is_empty(), bends_expected: truth.bends.len(), bends_matched: matched, problems }
}

/// Validates every part listed in a manifest.
pub fn validate_manifest(manifest: &Path) -> Result<ValidationReport, DatagenError> {
    let records = read_manifest(manifest)?;
    if records.is_empty() {
        return Err(DatagenError::Manifest(format!("{} lists no parts", manifest.display())));
    }
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut rep = ValidationReport { parts: records.len(), passed: 0, bends_expected: 0, bends_matched: 0, accuracy: 0.0, failures: Vec::new() };
    for r in &records {
        let o = validate_files(r.id, &dir.join(&r.step_path), &dir.join(r.gt_path()));
        rep.bends_expected += o.bends_expected;
        rep.bends_matched += o.bends_matched;
        if o.passed {
            rep.passed += 1;
        } else {
            rep.failures.push(o);
        }
    }
    rep.accuracy = rep.passed as f64 / rep.parts as f64;
    Ok(rep)
}
