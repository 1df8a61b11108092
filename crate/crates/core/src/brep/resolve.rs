use super::domain::loop_points;
use super::{BrepError, BrepSolid, Coedge, Edge, Face, Loop};
use crate::geom::{expand_knots, BSplineCurve, BSplineSurface, CurveGeom, Frame, SurfaceGeom, Vec3};
use crate::step::{Parameter, StepInstance, StepModel};
use std::collections::BTreeMap;

struct Ctx<'a> {
    model: &'a StepModel,
}

fn malformed(id: u64, message: impl Into<String>) -> BrepError {
    BrepError::Malformed { id, message: message.into() }
}

impl<'a> Ctx<'a> {
    fn inst(&self, id: u64) -> Result<&'a StepInstance, BrepError> {
        self.model.get(id).ok_or_else(|| malformed(id, "missing instance"))
    }

    fn typed(&self, id: u64, accepted: &[&str]) -> Result<&'a StepInstance, BrepError> {
        let inst = self.inst(id)?;
        if accepted.contains(&inst.entity_type.as_str()) {
            Ok(inst)
        } else {
            Err(BrepError::Unsupported { id, entity_type: inst.entity_type.clone() })
        }
    }

    fn arg<'b>(&self, inst: &'b StepInstance, i: usize) -> Result<&'b Parameter, BrepError> {
        inst.args.get(i).ok_or_else(|| malformed(inst.id, format!("missing argument {i}")))
    }

    fn ref_arg(&self, inst: &StepInstance, i: usize) -> Result<u64, BrepError> {
        self.arg(inst, i)?
            .as_ref_id()
            .ok_or_else(|| malformed(inst.id, format!("argument {i} is not a reference")))
    }

    fn f64_arg(&self, inst: &StepInstance, i: usize) -> Result<f64, BrepError> {
        self.arg(inst, i)?
            .as_f64()
            .ok_or_else(|| malformed(inst.id, format!("argument {i} is not a number")))
    }

    fn bool_arg(&self, inst: &StepInstance, i: usize) -> Result<bool, BrepError> {
        self.arg(inst, i)?
            .as_bool()
            .ok_or_else(|| malformed(inst.id, format!("argument {i} is not .T. or .F.")))
    }

    fn list_arg<'b>(&self, inst: &'b StepInstance, i: usize) -> Result<&'b [Parameter], BrepError> {
        self.arg(inst, i)?
            .as_list()
            .ok_or_else(|| malformed(inst.id, format!("argument {i} is not a list")))
    }

    fn refs(&self, inst: &StepInstance, i: usize) -> Result<Vec<u64>, BrepError> {
        self.list_arg(inst, i)?
            .iter()
            .map(|p| p.as_ref_id().ok_or_else(|| malformed(inst.id, format!("argument {i} holds a non-reference"))))
            .collect()
    }

    fn ints(&self, inst: &StepInstance, i: usize) -> Result<Vec<usize>, BrepError> {
        self.list_arg(inst, i)?
            .iter()
            .map(|p| {
                p.as_int()
                    .filter(|&v| v >= 0)
                    .map(|v| v as usize)
                    .ok_or_else(|| malformed(inst.id, format!("argument {i} holds a non-integer")))
            })
            .collect()
    }

    fn reals(&self, inst: &StepInstance, i: usize) -> Result<Vec<f64>, BrepError> {
        self.list_arg(inst, i)?
            .iter()
            .map(|p| p.as_f64().ok_or_else(|| malformed(inst.id, format!("argument {i} holds a non-number"))))
            .collect()
    }

    fn triple(&self, inst: &StepInstance) -> Result<Vec3, BrepError> {
        let c = self.reals(inst, 1)?;
        if c.len() != 3 {
            return Err(malformed(inst.id, format!("expected 3 coordinates, found {}", c.len())));
        }
        Ok(Vec3::new(c[0], c[1], c[2]))
    }

    fn point(&self, id: u64) -> Result<Vec3, BrepError> {
        let inst = self.typed(id, &["CARTESIAN_POINT"])?;
        self.triple(inst)
    }

    fn direction(&self, id: u64) -> Result<Vec3, BrepError> {
        let inst = self.typed(id, &["DIRECTION"])?;
        self.triple(inst)?
            .try_normalize(1e-300)
            .ok_or_else(|| malformed(id, "zero direction"))
    }

    fn placement(&self, id: u64) -> Result<Frame, BrepError> {
        let inst = self.typed(id, &["AXIS2_PLACEMENT_3D"])?;
        let origin = self.point(self.ref_arg(inst, 1)?)?;
        let axis = match self.arg(inst, 2)? {
            Parameter::Ref(r) => self.direction(*r)?,
            _ => Vec3::z(),
        };
        let ref_dir = match inst.args.get(3) {
            Some(Parameter::Ref(r)) => Some(self.direction(*r)?),
            _ => None,
        };
        let frame = match ref_dir {
            Some(x) => Frame::new(origin, axis, x).or_else(|_| Frame::from_axis(origin, axis)),
            None => Frame::new(origin, axis, Vec3::x()).or_else(|_| Frame::from_axis(origin, axis)),
        };
        frame.map_err(BrepError::from)
    }

    fn curve(&self, id: u64) -> Result<CurveGeom, BrepError> {
        let inst = self.inst(id)?;
        match inst.entity_type.as_str() {
            "LINE" => {
                let origin = self.point(self.ref_arg(inst, 1)?)?;
                let vec = self.typed(self.ref_arg(inst, 2)?, &["VECTOR"])?;
                let dir = self.direction(self.ref_arg(vec, 1)?)?;
                Ok(CurveGeom::Line { origin, dir })
            }
            "CIRCLE" => {
                let frame = self.placement(self.ref_arg(inst, 1)?)?;
                let radius = self.f64_arg(inst, 2)?;
                if radius <= 0.0 {
                    return Err(malformed(id, "non-positive radius"));
                }
                Ok(CurveGeom::Circle { frame, radius })
            }
            "B_SPLINE_CURVE_WITH_KNOTS" => {
                let degree = self.arg(inst, 1)?.as_int().ok_or_else(|| malformed(id, "degree"))? as usize;
                let control = self.refs(inst, 2)?.into_iter().map(|r| self.point(r)).collect::<Result<Vec<_>, _>>()?;
                let mults = self.ints(inst, 6)?;
                let values = self.reals(inst, 7)?;
                let c = BSplineCurve { degree, control, knots: expand_knots(&mults, &values) };
                c.validate()?;
                Ok(CurveGeom::BSpline(c))
            }
            "SURFACE_CURVE" | "SEAM_CURVE" => self.curve(self.ref_arg(inst, 1)?),
            other => Err(BrepError::Unsupported { id, entity_type: other.to_string() }),
        }
    }

    fn surface(&self, id: u64) -> Result<SurfaceGeom, BrepError> {
        let inst = self.inst(id)?;
        let positive = |x: f64| if x > 0.0 { Ok(x) } else { Err(malformed(id, "non-positive radius")) };
        match inst.entity_type.as_str() {
            "PLANE" => Ok(SurfaceGeom::Plane { frame: self.placement(self.ref_arg(inst, 1)?)? }),
            "CYLINDRICAL_SURFACE" => Ok(SurfaceGeom::Cylinder {
                frame: self.placement(self.ref_arg(inst, 1)?)?,
                radius: positive(self.f64_arg(inst, 2)?)?,
            }),
            "SPHERICAL_SURFACE" => Ok(SurfaceGeom::Sphere {
                frame: self.placement(self.ref_arg(inst, 1)?)?,
                radius: positive(self.f64_arg(inst, 2)?)?,
            }),
            "TOROIDAL_SURFACE" => Ok(SurfaceGeom::Torus {
                frame: self.placement(self.ref_arg(inst, 1)?)?,
                major_radius: positive(self.f64_arg(inst, 2)?)?,
                minor_radius: positive(self.f64_arg(inst, 3)?)?,
            }),
            "B_SPLINE_SURFACE_WITH_KNOTS" => {
                let u_degree = self.arg(inst, 1)?.as_int().ok_or_else(|| malformed(id, "u degree"))? as usize;
                let v_degree = self.arg(inst, 2)?.as_int().ok_or_else(|| malformed(id, "v degree"))? as usize;
                let rows = self.list_arg(inst, 3)?;
                let mut control = Vec::with_capacity(rows.len());
                for row in rows {
                    let row = row.as_list().ok_or_else(|| malformed(id, "control net row"))?;
                    let pts = row
                        .iter()
                        .map(|p| p.as_ref_id().ok_or_else(|| malformed(id, "control point")).and_then(|r| self.point(r)))
                        .collect::<Result<Vec<_>, _>>()?;
                    control.push(pts);
                }
                let s = BSplineSurface {
                    u_degree,
                    v_degree,
                    control,
                    u_knots: expand_knots(&self.ints(inst, 8)?, &self.reals(inst, 10)?),
                    v_knots: expand_knots(&self.ints(inst, 9)?, &self.reals(inst, 11)?),
                };
                s.validate()?;
                Ok(SurfaceGeom::BSpline(s))
            }
            other => Err(BrepError::Unsupported { id, entity_type: other.to_string() }),
        }
    }
}

struct RawBound {
    lp: Loop,
    outer_flag: bool,
}

/// Resolves the single manifold solid of a model into an evaluable B-rep.
pub fn resolve_solid(model: &StepModel) -> Result<BrepSolid, BrepError> {
    let cx = Ctx { model };
    let solids: Vec<&StepInstance> = model.of_type("MANIFOLD_SOLID_BREP").collect();
    if solids.len() != 1 {
        return Err(BrepError::SolidCount(solids.len()));
    }
    let shell = cx.typed(cx.ref_arg(solids[0], 1)?, &["CLOSED_SHELL"])?;
    let face_ids = cx.refs(shell, 1)?;

    let mut vertex_index: BTreeMap<u64, usize> = BTreeMap::new();
    let mut edge_index: BTreeMap<u64, usize> = BTreeMap::new();
    // First pass: collect edge and vertex ids so indices follow instance order.
    let mut face_insts = Vec::with_capacity(face_ids.len());
    for &fid in &face_ids {
        let face = cx.typed(fid, &["ADVANCED_FACE", "FACE_SURFACE"])?;
        for b in cx.refs(face, 1)? {
            let bound = cx.typed(b, &["FACE_OUTER_BOUND", "FACE_BOUND"])?;
            let lp = cx.typed(cx.ref_arg(bound, 1)?, &["EDGE_LOOP"])?;
            for oe in cx.refs(lp, 1)? {
                let oe = cx.typed(oe, &["ORIENTED_EDGE"])?;
                let ec_id = cx.ref_arg(oe, 3)?;
                let ec = cx.typed(ec_id, &["EDGE_CURVE"])?;
                edge_index.insert(ec_id, 0);
                for k in [1, 2] {
                    let v = cx.ref_arg(ec, k)?;
                    cx.typed(v, &["VERTEX_POINT"])?;
                    vertex_index.insert(v, 0);
                }
            }
        }
        face_insts.push(face);
    }
    for (i, v) in vertex_index.values_mut().enumerate() {
        *v = i;
    }
    for (i, v) in edge_index.values_mut().enumerate() {
        *v = i;
    }

    let mut vertices = Vec::with_capacity(vertex_index.len());
    for &vid in vertex_index.keys() {
        let v = cx.inst(vid)?;
        vertices.push(cx.point(cx.ref_arg(v, 1)?)?);
    }
    let mut edges = Vec::with_capacity(edge_index.len());
    for &eid in edge_index.keys() {
        let e = cx.inst(eid)?;
        edges.push(Edge {
            start: vertex_index[&cx.ref_arg(e, 1)?],
            end: vertex_index[&cx.ref_arg(e, 2)?],
            curve: cx.curve(cx.ref_arg(e, 3)?)?,
            same_sense: cx.bool_arg(e, 4)?,
            uses: Vec::new(),
        });
    }

    let mut faces = Vec::with_capacity(face_insts.len());
    for face in face_insts {
        let surface = cx.surface(cx.ref_arg(face, 2)?)?;
        let sense = cx.bool_arg(face, 3)?;
        let mut bounds = Vec::new();
        for b in cx.refs(face, 1)? {
            let bound = cx.inst(b)?;
            let lp_inst = cx.inst(cx.ref_arg(bound, 1)?)?;
            let mut coedges = Vec::new();
            for oe in cx.refs(lp_inst, 1)? {
                let oe = cx.inst(oe)?;
                coedges.push(Coedge { edge: edge_index[&cx.ref_arg(oe, 3)?], forward: cx.bool_arg(oe, 4)? });
            }
            let mut lp = Loop { coedges };
            if !cx.bool_arg(bound, 2)? {
                lp = lp.reversed();
            }
            bounds.push(RawBound { lp, outer_flag: bound.entity_type == "FACE_OUTER_BOUND" });
        }
        if bounds.is_empty() {
            return Err(malformed(face.id, "face without bounds"));
        }
        let outer_at = bounds.iter().position(|b| b.outer_flag).unwrap_or_else(|| largest_loop(&vertices, &edges, &bounds));
        let outer = bounds.remove(outer_at).lp;
        faces.push(Face { surface, sense, outer, inners: bounds.into_iter().map(|b| b.lp).collect() });
    }

    let mut solid = BrepSolid { vertices, edges, faces };
    solid.rebuild_uses();
    if let Err(BrepError::NonManifoldEdge { edge, uses }) = solid.check_manifold() {
        let step_id = edge_index.iter().find(|(_, &i)| i as u64 == edge).map(|(&k, _)| k).unwrap_or(edge);
        return Err(BrepError::NonManifoldEdge { edge: step_id, uses });
    }
    Ok(solid)
}

fn largest_loop(vertices: &[Vec3], edges: &[Edge], bounds: &[RawBound]) -> usize {
    let diag = |b: &RawBound| {
        let pts = loop_points(vertices, edges, &b.lp);
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    };
    (0..bounds.len())
        .max_by(|&a, &b| diag(&bounds[a]).total_cmp(&diag(&bounds[b])))
        .unwrap_or(0)
}
