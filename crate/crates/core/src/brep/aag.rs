use super::attrs::face_area;
use super::BrepSolid;
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;

/// Normals closer than this angle are treated as tangent.
pub const SMOOTH_ANGLE_DEG: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dihedral {
    Convex,
    Concave,
    Smooth,
}

impl Dihedral {
    pub fn as_str(self) -> &'static str {
        match self {
            Dihedral::Convex => "convex",
            Dihedral::Concave => "concave",
            Dihedral::Smooth => "smooth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AagEdge {
    /// Smaller face id.
    pub a: usize,
    pub b: usize,
    pub dihedral: Dihedral,
    /// B-rep edges shared by the pair, ascending.
    pub brep_edges: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceAdjacencyGraph {
    pub node_count: usize,
    pub edges: Vec<AagEdge>,
}

impl FaceAdjacencyGraph {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<&AagEdge> {
        let (a, b) = (a.min(b), a.max(b));
        self.edges.iter().find(|e| e.a == a && e.b == b)
    }

    pub fn count(&self, d: Dihedral) -> usize {
        self.edges.iter().filter(|e| e.dihedral == d).count()
    }

    /// `{nodes:[{id, surface_kind, area}], edges:[{a, b, dihedral}]}`.
    pub fn to_json(&self, solid: &BrepSolid) -> serde_json::Value {
        let nodes: Vec<_> = (0..self.node_count)
            .map(|i| {
                json!({
                    "id": i,
                    "surface_kind": solid.faces[i].kind().as_str(),
                    "area": face_area(solid, i).unwrap_or(f64::NAN),
                })
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| json!({"a": e.a, "b": e.b, "dihedral": e.dihedral.as_str()}))
            .collect();
        json!({"nodes": nodes, "edges": edges})
    }
}

/// Classifies the junction of two faces along B-rep edge `edge`.
pub(crate) fn classify(solid: &BrepSolid, edge: usize) -> Dihedral {
    let e = &solid.edges[edge];
    let (p, t) = e.midpoint(&solid.vertices);
    let (u1, u2) = (e.uses[0], e.uses[1]);
    let n1 = solid.faces[u1.face].normal_at(&p);
    let n2 = solid.faces[u2.face].normal_at(&p);
    if n1.dot(&n2).clamp(-1.0, 1.0).acos() < SMOOTH_ANGLE_DEG.to_radians() {
        return Dihedral::Smooth;
    }
    let t1 = if u1.forward { t } else { -t };
    if n1.cross(&n2).dot(&t1) > 0.0 {
        Dihedral::Convex
    } else {
        Dihedral::Concave
    }
}

/// One graph edge per adjacent face pair. When several B-rep edges join the
/// same pair, the lowest-index edge decides the dihedral class.
pub fn build_aag(solid: &BrepSolid) -> FaceAdjacencyGraph {
    let mut pairs: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, e) in solid.edges.iter().enumerate() {
        if e.uses.len() != 2 {
            continue;
        }
        let (a, b) = (e.uses[0].face, e.uses[1].face);
        if a == b {
            continue;
        }
        pairs.entry((a.min(b), a.max(b))).or_default().push(i);
    }
    let edges = pairs
        .into_iter()
        .map(|((a, b), brep_edges)| AagEdge { a, b, dihedral: classify(solid, brep_edges[0]), brep_edges })
        .collect();
    FaceAdjacencyGraph { node_count: solid.faces.len(), edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::builder::box_solid;
    use crate::geom::Vec3;

    #[test]
    fn box_graph_is_all_convex() {
        let s = box_solid(Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0)).unwrap();
        let g = build_aag(&s);
        assert_eq!(g.node_count, 6);
        assert_eq!(g.edges.len(), 12);
        assert_eq!(g.count(Dihedral::Convex), 12);
        assert!(g.is_connected());
    }
}
