use super::{CylFeature, HoleFeature, HoleHost, Role};
use crate::brep::BrepSolid;
use std::collections::{BTreeMap, BTreeSet};

/// Face-side location of every coedge: (face, is inner loop).
fn edge_sides(solid: &BrepSolid) -> Vec<Vec<(usize, bool)>> {
    let mut sides = vec![Vec::new(); solid.edges.len()];
    for (fi, f) in solid.faces.iter().enumerate() {
        for (li, l) in f.loops().enumerate() {
            for c in &l.coedges {
                sides[c.edge].push((fi, li > 0));
            }
        }
    }
    sides
}

/// Through holes found from inner loops. A wall set is grown from the faces
/// across an inner loop; it stops at faces that meet it through one of their
/// own inner loops (the host and the opposite face).
pub fn recognize_holes(solid: &BrepSolid, roles: &[Role], cylinders: &[CylFeature]) -> Vec<HoleFeature> {
    let sides = edge_sides(solid);
    let mut found: BTreeMap<Vec<usize>, HoleFeature> = BTreeMap::new();
    for (host, face) in solid.faces.iter().enumerate() {
        for inner in &face.inners {
            let mut walls = BTreeSet::new();
            let mut terminals = BTreeSet::from([host]);
            let mut stack = Vec::new();
            for c in &inner.coedges {
                for &(g, _) in &sides[c.edge] {
                    if g != host && walls.insert(g) {
                        stack.push(g);
                    }
                }
            }
            while let Some(w) = stack.pop() {
                for l in solid.faces[w].loops() {
                    for c in &l.coedges {
                        for &(g, g_inner) in &sides[c.edge] {
                            if g == w || walls.contains(&g) || terminals.contains(&g) {
                                continue;
                            }
                            if g_inner {
                                terminals.insert(g);
                            } else {
                                walls.insert(g);
                                stack.push(g);
                            }
                        }
                    }
                }
            }
            if walls.is_empty() || walls.iter().any(|w| terminals.contains(w)) {
                continue;
            }
            let host_role = roles[host];
            let hole = if host_role == Role::Side {
                HoleFeature { wall_faces: Vec::new(), host: HoleHost::Side, diameter: None, is_side_hole: true }
            } else {
                let opposite = if host_role == Role::Top { Role::Bottom } else { Role::Top };
                if !terminals.iter().any(|&t| roles[t] == opposite) {
                    continue;
                }
                HoleFeature { wall_faces: Vec::new(), host: HoleHost::Shell, diameter: None, is_side_hole: false }
            };
            let wall_faces: Vec<usize> = walls.into_iter().collect();
            let diameter = match wall_faces.as_slice() {
                [w] => cylinders.iter().find(|c| c.face == *w).map(|c| 2.0 * c.radius),
                _ => None,
            };
            found.entry(wall_faces.clone()).or_insert(HoleFeature { wall_faces, diameter, ..hole });
        }
    }
    found.into_values().collect()
}

/// Side faces that are not hole walls.
pub fn outer_contour(roles: &[Role], holes: &[HoleFeature]) -> Vec<usize> {
    (0..roles.len())
        .filter(|&f| roles[f] == Role::Side && !holes.iter().any(|h| h.wall_faces.contains(&f)))
        .collect()
}

/// Edges between top faces and contour faces, chained into closed cycles.
pub fn outer_contour_cycles(solid: &BrepSolid, roles: &[Role], contour: &[usize]) -> Vec<Vec<usize>> {
    let rim: Vec<usize> = solid
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            let fs: Vec<usize> = e.uses.iter().map(|u| u.face).collect();
            fs.iter().any(|&f| roles[f] == Role::Top) && fs.iter().any(|f| contour.contains(f))
        })
        .map(|(i, _)| i)
        .collect();
    let mut by_vertex: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &e in &rim {
        by_vertex.entry(solid.edges[e].start).or_default().push(e);
        by_vertex.entry(solid.edges[e].end).or_default().push(e);
    }
    let mut used = BTreeSet::new();
    let mut cycles = Vec::new();
    for &seed in &rim {
        if used.contains(&seed) {
            continue;
        }
        let mut cycle = vec![seed];
        used.insert(seed);
        let mut at = solid.edges[seed].end;
        loop {
            let next = by_vertex.get(&at).and_then(|es| es.iter().copied().find(|e| !used.contains(e)));
            let Some(e) = next else { break };
            used.insert(e);
            cycle.push(e);
            let ed = &solid.edges[e];
            at = if ed.start == at { ed.end } else { ed.start };
        }
        cycles.push(cycle);
    }
    cycles
}
