use bendgraph::brep::{face_domain, global_attributes};
use bendgraph::datagen::{l_bracket, plate, plate_with_hole, sample_part, Profile};
use bendgraph::enrich::{
    assemble_graph, mf_vector, read_bgr1, sample_uv_grid, write_bgr1, DEFAULT_GRID, GRID_CHANNELS, MF_WIDTH,
};
use bendgraph::featrec::{recognize, Role};
use bendgraph::geom::SurfaceGeom;
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

#[test]
fn plate_graph_shape() {
    let p = plate().unwrap();
    let r = recognize(&p.solid).unwrap();
    let g = assemble_graph(&p.solid, &r, DEFAULT_GRID, true).unwrap();
    assert_eq!(g.nodes.len(), 6);
    assert_eq!(g.edges.len(), 12);
    for n in &g.nodes {
        assert_eq!(n.uv_grid.data.len(), GRID_CHANNELS * 100);
        assert_eq!(n.mf.len(), MF_WIDTH);
        assert_eq!(n.uv_grid.mask_fraction(), 1.0, "face {}", n.face_id);
    }
    let top = r.roles.iter().position(|&x| x == Role::Top).unwrap();
    let mut want = [0.0; MF_WIDTH];
    want[0] = 1.0;
    assert_eq!(mf_vector(top, &r), want);
}

#[test]
fn l_bracket_graph_and_bend_mf() {
    let p = l_bracket().unwrap();
    let r = recognize(&p.solid).unwrap();
    let g = assemble_graph(&p.solid, &r, DEFAULT_GRID, true).unwrap();
    assert_eq!((g.nodes.len(), g.edges.len()), (10, 24));
    let attrs = global_attributes(&p.solid).unwrap();
    assert_eq!(g.globals, [2.0, attrs.total_area, attrs.bbox_volume]);
    for (i, n) in g.nodes.iter().enumerate() {
        assert_eq!(n.face_id, i);
    }

    let b = &r.bends[0];
    let mf = mf_vector(b.inner_face, &r);
    let role = r.roles[b.inner_face];
    assert_eq!(&mf[0..3], &[(role == Role::Top) as u8 as f64, (role == Role::Bottom) as u8 as f64, 0.0]);
    assert_eq!((mf[3], mf[4], mf[5]), (1.0, -1.0, 4.0));
    assert!((mf[6] - 30.0).abs() < 1e-9 && (mf[7] - FRAC_PI_2).abs() < 1e-9);
    assert_eq!(mf[8], 1.0);
    assert_eq!(mf[9].abs(), 1.0);
    assert_eq!((mf[10], mf[11]), (4.0, 6.0));
    assert!((mf[12] - 30.0).abs() < 1e-9 && (mf[13] - FRAC_PI_2).abs() < 1e-9);
    assert_eq!(&mf[14..19], &b.flange_a.to_array());
    assert_eq!(&mf[19..24], &b.flange_b.to_array());
    assert_eq!(&mf[24..28], &[0.0, 0.0, 0.0, 0.0]);
    // the outer face carries the same bend block but is convex
    let mo = mf_vector(b.outer_face, &r);
    assert_eq!((mo[4], mo[5]), (1.0, 6.0));
    assert_eq!(&mo[8..24], &mf[8..24]);
}

#[test]
fn l_shaped_profile_mask_tracks_area() {
    let p = l_bracket().unwrap();
    // flanges 44, t 2, inner radius 4: two rectangles plus a quarter annulus
    let area = 2.0 * 44.0 * 2.0 + PI / 4.0 * (36.0 - 16.0);
    let profiles: Vec<usize> = (0..p.solid.faces.len())
        .filter(|&i| matches!(p.solid.faces[i].surface, SurfaceGeom::Plane { .. }))
        .filter(|&i| {
            let d = face_domain(&p.solid, i).unwrap();
            (d.signed_area().abs() - area).abs() < 0.05
        })
        .collect();
    assert_eq!(profiles.len(), 2);
    for f in profiles {
        let d = face_domain(&p.solid, f).unwrap();
        let frac = area / (d.u_span() * d.v_span());
        for g in [10, 40, 80] {
            let grid = sample_uv_grid(&p.solid, f, g).unwrap();
            assert!((grid.mask_fraction() - frac).abs() <= 2.0 / g as f64, "G={g}: {} vs {frac}", grid.mask_fraction());
        }
    }
}

#[test]
fn hole_samples_are_masked_out() {
    let p = plate_with_hole().unwrap();
    let r = recognize(&p.solid).unwrap();
    let g = 24;
    for f in (0..p.solid.faces.len()).filter(|&f| r.roles[f] != Role::Side) {
        let grid = sample_uv_grid(&p.solid, f, g).unwrap();
        let mut outside = 0;
        for i in 0..g {
            for j in 0..g {
                // independent oracle: evaluate the sample point and test against the drilled circle
                let d = face_domain(&p.solid, f).unwrap();
                let u = d.u_min + (i as f64 + 0.5) / g as f64 * d.u_span();
                let v = d.v_min + (j as f64 + 0.5) / g as f64 * d.v_span();
                let (q, _) = p.solid.faces[f].surface.eval(u, v).unwrap();
                let in_hole = (q.x - 50.0).hypot(q.y - 25.0) < 5.0;
                assert_eq!(grid.at(6, i, j) == 0.0, in_hole, "face {f} sample ({i},{j}) at {q:?}");
                if in_hole {
                    outside += 1;
                    assert!((0..GRID_CHANNELS).all(|c| grid.at(c, i, j) == 0.0));
                } else {
                    let n = (0..3).map(|c| grid.at(3 + c, i, j).powi(2)).sum::<f64>().sqrt();
                    assert!((n - 1.0).abs() < 1e-12);
                }
            }
        }
        assert!(outside > 0);
    }
    let wall = r.holes[0].wall_faces[0];
    let mf = mf_vector(wall, &r);
    assert_eq!((mf[3], mf[4], mf[24], mf[25]), (1.0, -1.0, 1.0, 0.0));
    assert!((mf[5] - 5.0).abs() < 1e-9 && (mf[7] - 2.0 * PI).abs() < 1e-9);
    assert!(mf[8..24].iter().all(|&x| x == 0.0));
}

#[test]
fn no_mf_mode_only_zeroes_mf() {
    let p = l_bracket().unwrap();
    let r = recognize(&p.solid).unwrap();
    let with = assemble_graph(&p.solid, &r, 6, true).unwrap();
    let without = assemble_graph(&p.solid, &r, 6, false).unwrap();
    assert_eq!(with.edges, without.edges);
    assert_eq!(with.globals, without.globals);
    for (a, b) in with.nodes.iter().zip(&without.nodes) {
        assert_eq!(a.uv_grid, b.uv_grid);
        assert!(b.mf.iter().all(|&x| x == 0.0));
    }
    assert_eq!(with.without_mf(), without);
}

#[test]
fn exports_are_deterministic_and_round_trip() {
    let p = plate_with_hole().unwrap();
    let r = recognize(&p.solid).unwrap();
    let mut g = assemble_graph(&p.solid, &r, 5, true).unwrap();
    g.label = Some(12.5);
    let a = serde_json::to_vec(&g.to_json()).unwrap();
    let mut g2 = assemble_graph(&p.solid, &r, 5, true).unwrap();
    g2.label = Some(12.5);
    let b = serde_json::to_vec(&g2.to_json()).unwrap();
    assert_eq!(a, b);
    let json = g.to_json();
    assert_eq!(json["grid_shape"], serde_json::json!([7, 5, 5]));
    assert_eq!(json["nodes"][0]["mf"].as_array().unwrap().len(), 28);

    let mut bytes = Vec::new();
    write_bgr1(&g, &mut bytes).unwrap();
    assert_eq!(&bytes[..4], b"BGR1");
    let back = read_bgr1(bytes.as_slice()).unwrap();
    assert_eq!(back.edges, g.edges);
    assert_eq!(back.dihedrals, g.dihedrals);
    assert_eq!(back.label, Some(12.5));
    for (x, y) in back.nodes.iter().zip(&g.nodes) {
        assert_eq!(x.surface_kind, y.surface_kind);
        for (u, v) in x.uv_grid.data.iter().chain(&x.mf).zip(y.uv_grid.data.iter().chain(&y.mf)) {
            assert_eq!(*u, *v as f32 as f64);
        }
    }
    let mut again = Vec::new();
    write_bgr1(&back, &mut again).unwrap();
    assert_eq!(bytes, again);
    assert!(read_bgr1(&bytes[..bytes.len() - 1]).is_err());
}

/// Boolean slot that must be set whenever slot `j` is nonzero.
fn owner(j: usize) -> Option<usize> {
    match j {
        5..=7 => Some(3),
        9..=23 => Some(8),
        25 => Some(24),
        27 => Some(8),
        _ => None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn mf_zero_consistency(seed in 0u64..10_000, k in 0usize..4) {
        let profile = [Profile::Plain, Profile::Holes, Profile::Corners, Profile::Tapered][k];
        let part = sample_part(seed, profile, None).unwrap();
        let r = recognize(&part.solid).unwrap();
        let g = assemble_graph(&part.solid, &r, 4, true).unwrap();
        prop_assert_eq!(g.nodes.len(), part.solid.faces.len());
        let bend_faces: Vec<usize> = r.bends.iter().flat_map(|b| [b.inner_face, b.outer_face]).collect();
        for n in &g.nodes {
            prop_assert_eq!(n.uv_grid.data.len(), GRID_CHANNELS * 16);
            prop_assert_eq!(n.mf.len(), MF_WIDTH);
            prop_assert_eq!(n.mf[0] + n.mf[1] + n.mf[2], 1.0);
            for j in 5..MF_WIDTH {
                if let (true, Some(o)) = (n.mf[j] != 0.0, owner(j)) {
                    prop_assert_eq!(n.mf[o], 1.0, "face {} slot {}", n.face_id, j);
                }
            }
            if n.mf[8] != 0.0 {
                prop_assert!(bend_faces.contains(&n.face_id));
            }
        }
    }
}
