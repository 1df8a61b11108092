use super::StepError;
use crate::brep::{BrepSolid, Loop};
use crate::geom::{compress_knots, CurveGeom, Frame, SurfaceGeom, Vec3};
use std::fmt::Write as _;

/// Shortest round-trip decimal with the explicit point Part 21 requires
/// (`0.`, `2.5`, `1.E-07` style).
pub fn format_real(x: f64) -> String {
    let s = format!("{x:?}");
    let (mant, exp) = match s.split_once('e') {
        Some((m, e)) => (m.to_string(), Some(e.to_string())),
        None => (s, None),
    };
    let mant = if let Some(stripped) = mant.strip_suffix(".0") {
        format!("{stripped}.")
    } else if mant.contains('.') || mant.contains("inf") || mant.contains("NaN") {
        mant
    } else {
        format!("{mant}.")
    };
    match exp {
        Some(e) => format!("{mant}E{e}"),
        None => mant,
    }
}

/// Encodes a string literal, escaping quotes, backslashes and non-ASCII text.
pub(crate) fn encode_string(s: &str) -> String {
    let mut out = String::from("'");
    let mut wide = String::new();
    let flush = |wide: &mut String, out: &mut String| {
        if !wide.is_empty() {
            out.push_str("\\X2\\");
            out.push_str(wide);
            out.push_str("\\X0\\");
            wide.clear();
        }
    };
    for c in s.chars() {
        if c.is_ascii() && !c.is_ascii_control() {
            flush(&mut wide, &mut out);
            match c {
                '\'' => out.push_str("''"),
                '\\' => out.push_str("\\\\"),
                _ => out.push(c),
            }
        } else {
            let mut buf = [0u16; 2];
            for unit in c.encode_utf16(&mut buf) {
                let _ = write!(wide, "{unit:04X}");
            }
        }
    }
    flush(&mut wide, &mut out);
    out.push('\'');
    out
}

struct Writer {
    body: String,
    next: u64,
}

impl Writer {
    fn emit(&mut self, entity: &str, args: &str) -> u64 {
        let id = self.next;
        self.next += 1;
        let _ = writeln!(self.body, "#{id}={entity}({args});");
        id
    }

    fn point(&mut self, p: &Vec3) -> u64 {
        let args = format!("'',({},{},{})", format_real(p.x), format_real(p.y), format_real(p.z));
        self.emit("CARTESIAN_POINT", &args)
    }

    fn direction(&mut self, d: &Vec3) -> u64 {
        let args = format!("'',({},{},{})", format_real(d.x), format_real(d.y), format_real(d.z));
        self.emit("DIRECTION", &args)
    }

    fn placement(&mut self, f: &Frame) -> u64 {
        let o = self.point(&f.origin);
        let z = self.direction(&f.z);
        let x = self.direction(&f.x);
        self.emit("AXIS2_PLACEMENT_3D", &format!("'',#{o},#{z},#{x}"))
    }

    fn curve(&mut self, c: &CurveGeom) -> u64 {
        match c {
            CurveGeom::Line { origin, dir } => {
                let p = self.point(origin);
                let d = self.direction(dir);
                let v = self.emit("VECTOR", &format!("'',#{d},1."));
                self.emit("LINE", &format!("'',#{p},#{v}"))
            }
            CurveGeom::Circle { frame, radius } => {
                let a = self.placement(frame);
                self.emit("CIRCLE", &format!("'',#{a},{}", format_real(*radius)))
            }
            CurveGeom::BSpline(b) => {
                let pts: Vec<String> = b.control.iter().map(|p| format!("#{}", self.point(p))).collect();
                let (mults, knots) = compress_knots(&b.knots);
                let args = format!(
                    "'',{},({}),.UNSPECIFIED.,.F.,.F.,({}),({}),.UNSPECIFIED.",
                    b.degree,
                    pts.join(","),
                    join_ints(&mults),
                    join_reals(&knots)
                );
                self.emit("B_SPLINE_CURVE_WITH_KNOTS", &args)
            }
        }
    }

    fn surface(&mut self, s: &SurfaceGeom) -> Result<u64, StepError> {
        Ok(match s {
            SurfaceGeom::Plane { frame } => {
                let a = self.placement(frame);
                self.emit("PLANE", &format!("'',#{a}"))
            }
            SurfaceGeom::Cylinder { frame, radius } => {
                let a = self.placement(frame);
                self.emit("CYLINDRICAL_SURFACE", &format!("'',#{a},{}", format_real(*radius)))
            }
            SurfaceGeom::BSpline(b) => {
                let rows: Vec<String> = b
                    .control
                    .iter()
                    .map(|row| {
                        let ids: Vec<String> = row.iter().map(|p| format!("#{}", self.point(p))).collect();
                        format!("({})", ids.join(","))
                    })
                    .collect();
                let (um, uk) = compress_knots(&b.u_knots);
                let (vm, vk) = compress_knots(&b.v_knots);
                let args = format!(
                    "'',{},{},({}),.UNSPECIFIED.,.F.,.F.,.F.,({}),({}),({}),({}),.UNSPECIFIED.",
                    b.u_degree,
                    b.v_degree,
                    rows.join(","),
                    join_ints(&um),
                    join_ints(&vm),
                    join_reals(&uk),
                    join_reals(&vk)
                );
                self.emit("B_SPLINE_SURFACE_WITH_KNOTS", &args)
            }
            other => return Err(StepError::Unsupported(format!("{} surface", other.kind().as_str()))),
        })
    }

    fn edge_loop(&mut self, lp: &Loop, edge_ids: &[u64]) -> u64 {
        let oes: Vec<String> = lp
            .coedges
            .iter()
            .map(|c| {
                let id = self.emit(
                    "ORIENTED_EDGE",
                    &format!("'',*,*,#{},{}", edge_ids[c.edge], if c.forward { ".T." } else { ".F." }),
                );
                format!("#{id}")
            })
            .collect();
        self.emit("EDGE_LOOP", &format!("'',({})", oes.join(",")))
    }
}

fn join_ints(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_reals(v: &[f64]) -> String {
    v.iter().map(|&x| format_real(x)).collect::<Vec<_>>().join(",")
}

fn bool_token(b: bool) -> &'static str {
    if b {
        ".T."
    } else {
        ".F."
    }
}

/// Serializes a solid as an AP203 Part 21 file. Plane, cylinder and
/// b-spline surfaces are supported; spheres and tori are rejected.
pub fn write_step(solid: &BrepSolid) -> Result<Vec<u8>, StepError> {
    let mut w = Writer { body: String::new(), next: 1 };
    let vertex_ids: Vec<u64> = solid
        .vertices
        .iter()
        .map(|v| {
            let p = w.point(v);
            w.emit("VERTEX_POINT", &format!("'',#{p}"))
        })
        .collect();
    let edge_ids: Vec<u64> = solid
        .edges
        .iter()
        .map(|e| {
            let c = w.curve(&e.curve);
            w.emit(
                "EDGE_CURVE",
                &format!("'',#{},#{},#{c},{}", vertex_ids[e.start], vertex_ids[e.end], bool_token(e.same_sense)),
            )
        })
        .collect();
    let mut face_ids = Vec::with_capacity(solid.faces.len());
    for f in &solid.faces {
        let s = w.surface(&f.surface)?;
        let mut bounds = Vec::new();
        let l = w.edge_loop(&f.outer, &edge_ids);
        bounds.push(format!("#{}", w.emit("FACE_OUTER_BOUND", &format!("'',#{l},.T."))));
        for inner in &f.inners {
            let l = w.edge_loop(inner, &edge_ids);
            bounds.push(format!("#{}", w.emit("FACE_BOUND", &format!("'',#{l},.T."))));
        }
        let id = w.emit("ADVANCED_FACE", &format!("'',({}),#{s},{}", bounds.join(","), bool_token(f.sense)));
        face_ids.push(format!("#{id}"));
    }
    let shell = w.emit("CLOSED_SHELL", &format!("'',({})", face_ids.join(",")));
    let brep = w.emit("MANIFOLD_SOLID_BREP", &format!("'',#{shell}"));
    let ctx = w.emit("GEOMETRIC_REPRESENTATION_CONTEXT", "'','',3");
    w.emit("ADVANCED_BREP_SHAPE_REPRESENTATION", &format!("'',(#{brep}),#{ctx}"));

    let mut out = String::new();
    out.push_str("ISO-10303-21;\nHEADER;\n");
    let _ = writeln!(out, "FILE_DESCRIPTION(({}),'2;1');", encode_string("bendgraph sheet-metal part"));
    let _ = writeln!(
        out,
        "FILE_NAME({},'2000-01-01T00:00:00',(''),(''),'bendgraph','bendgraph','');",
        encode_string("part.stp")
    );
    out.push_str("FILE_SCHEMA(('CONFIG_CONTROL_DESIGN'));\nENDSEC;\nDATA;\n");
    out.push_str(&w.body);
    out.push_str("ENDSEC;\nEND-ISO-10303-21;\n");
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::step::parse_step;

    #[test]
    fn reals_round_trip_with_point() {
        for x in [0.0, -0.0, 1.0, 2.5, 1e-7, -3.25e21, 0.1 + 0.2, 123456789.125] {
            let s = format_real(x);
            assert!(s.contains('.'), "{s}");
            let src = format!(
                "ISO-10303-21;HEADER;ENDSEC;DATA;#1=CARTESIAN_POINT('',({s},0.,0.));ENDSEC;END-ISO-10303-21;"
            );
            let m = parse_step(src.as_bytes()).unwrap();
            let back = m.get(1).unwrap().args[1].as_list().unwrap()[0].as_f64().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_real(0.0), "0.");
        assert_eq!(format_real(1e-7), "1.E-7");
    }

    #[test]
    fn strings_round_trip() {
        let s = "it's a\\b été αβ";
        let src = format!(
            "ISO-10303-21;HEADER;ENDSEC;DATA;#1=FOO({});ENDSEC;END-ISO-10303-21;",
            encode_string(s)
        );
        let m = parse_step(src.as_bytes()).unwrap();
        assert_eq!(m.get(1).unwrap().args[0].as_str(), Some(s));
    }
}
