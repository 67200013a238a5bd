use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FemError;
use crate::geometry::{BoundaryTag, PlateGeometry};

/// Radial grading exponent of the mapped plate mesh; fixed so that halving
/// the target size produces nested meshes.
const GRADING: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Linear triangle mesh with tagged boundary edges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
}

impl TriMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Signed area of element `e` (positive for counter-clockwise ordering).
    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.elements[e].map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.element_area(e)).sum()
    }

    /// Sorted, deduplicated node indices on edges with the given tag.
    pub fn nodes_on(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary.iter().filter(|e| e.tag == tag).flat_map(|e| e.nodes).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Check element orientation and that every boundary edge carries exactly one tag.
    pub fn validate(&self) -> Result<(), FemError> {
        for (e, el) in self.elements.iter().enumerate() {
            if el.iter().any(|&i| i >= self.nodes.len()) {
                return Err(FemError::Mesh(format!("element {e} references a missing node")));
            }
            let a = self.element_area(e);
            if !(a > 0.0) {
                let c = self.centroid(e);
                return Err(FemError::Mesh(format!("element {e} near ({:.3}, {:.3}) has non-positive area {a:e}", c[0], c[1])));
            }
        }
        let mut count: HashMap<[usize; 2], usize> = HashMap::new();
        for el in &self.elements {
            for k in 0..3 {
                let (a, b) = (el[k], el[(k + 1) % 3]);
                *count.entry([a.min(b), a.max(b)]).or_default() += 1;
            }
        }
        let mut tagged: HashMap<[usize; 2], usize> = HashMap::new();
        for be in &self.boundary {
            let [a, b] = be.nodes;
            *tagged.entry([a.min(b), a.max(b)]).or_default() += 1;
        }
        for (edge, n) in &count {
            let t = tagged.get(edge).copied().unwrap_or(0);
            if *n == 1 && t != 1 {
                let p = self.nodes[edge[0]];
                return Err(FemError::Mesh(format!("boundary edge at ({:.3}, {:.3}) tagged {t} times", p[0], p[1])));
            }
            if *n > 2 {
                return Err(FemError::Mesh("non-manifold edge".into()));
            }
        }
        if let Some(edge) = tagged.keys().find(|e| count.get(*e) != Some(&1)) {
            let p = self.nodes[edge[0]];
            return Err(FemError::Mesh(format!("tagged edge at ({:.3}, {:.3}) is not on the boundary", p[0], p[1])));
        }
        Ok(())
    }

    fn centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[e].map(|i| self.nodes[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "nodes {}", self.nodes.len()).unwrap();
        for p in &self.nodes {
            writeln!(s, "{:?} {:?}", p[0], p[1]).unwrap();
        }
        writeln!(s, "elements {}", self.elements.len()).unwrap();
        for e in &self.elements {
            writeln!(s, "{} {} {}", e[0], e[1], e[2]).unwrap();
        }
        writeln!(s, "boundary {}", self.boundary.len()).unwrap();
        for b in &self.boundary {
            writeln!(s, "{} {} {}", b.nodes[0], b.nodes[1], b.tag).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, FemError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |n: usize, what: &str| FemError::Mesh(format!("line {}: {what}", n + 1));
        let mut next_line = |section: &str| lines.next().ok_or_else(|| FemError::Mesh(format!("truncated `{section}` section")));
        let header = |item: (usize, &str), name: &str| -> Result<usize, FemError> {
            let (n, l) = item;
            let mut it = l.split_whitespace();
            if it.next() != Some(name) {
                return Err(bad(n, &format!("expected `{name}` header")));
            }
            it.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad(n, "missing count"))
        };
        let mut mesh = TriMesh::default();
        let n_nodes = header(next_line("nodes")?, "nodes")?;
        for _ in 0..n_nodes {
            let (n, l) = next_line("nodes")?;
            let v: Vec<f64> = l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad(n, "bad coordinate"))?;
            if v.len() != 2 {
                return Err(bad(n, "expected two coordinates"));
            }
            mesh.nodes.push([v[0], v[1]]);
        }
        let n_el = header(next_line("elements")?, "elements")?;
        for _ in 0..n_el {
            let (n, l) = next_line("elements")?;
            let v: Vec<usize> = l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad(n, "bad element"))?;
            if v.len() != 3 {
                return Err(bad(n, "expected three node indices"));
            }
            mesh.elements.push([v[0], v[1], v[2]]);
        }
        let n_b = header(next_line("boundary")?, "boundary")?;
        for _ in 0..n_b {
            let (n, l) = next_line("boundary")?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad(n, "expected `a b tag`"));
            }
            let a = t[0].parse().map_err(|_| bad(n, "bad node index"))?;
            let b = t[1].parse().map_err(|_| bad(n, "bad node index"))?;
            let tag = BoundaryTag::parse(t[2]).ok_or_else(|| bad(n, "unknown boundary tag"))?;
            mesh.boundary.push(BoundaryEdge { nodes: [a, b], tag });
        }
        Ok(mesh)
    }

    pub fn write(&self, path: &Path) -> Result<(), FemError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, FemError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    fn push_quad(&mut self, a: usize, b: usize, c: usize, d: usize) {
        // a-b-c-d around the quad; split along the shorter diagonal
        let dist = |i: usize, j: usize| {
            let (p, q) = (self.nodes[i], self.nodes[j]);
            (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
        };
        let tris = if dist(a, c) <= dist(b, d) { [[a, b, c], [a, c, d]] } else { [[a, b, d], [b, c, d]] };
        for t in tris {
            self.elements.push(t);
            let e = self.elements.len() - 1;
            if self.element_area(e) < 0.0 {
                self.elements[e].swap(1, 2);
            }
        }
    }
}

fn graded(eta: f64) -> f64 {
    ((GRADING * eta).exp() - 1.0) / (GRADING.exp() - 1.0)
}

/// Mapped structured mesh of the plate with a quarter hole, built from two
/// blocks split along the 135° diagonal.
pub fn mesh_quarter_plate(edge_length: f64, hole_radius: f64, target_h: f64) -> Result<TriMesh, FemError> {
    if !(target_h > 0.0 && target_h < hole_radius) {
        return Err(FemError::Mesh(format!("target size {target_h} must lie in (0, hole radius {hole_radius})")));
    }
    if !(hole_radius < edge_length) {
        return Err(FemError::Mesh("hole does not fit into the plate".into()));
    }
    let (l, r) = (edge_length, hole_radius);
    let n = (l / target_h).ceil() as usize;
    let cols = 2 * n + 1;
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut mesh = TriMesh::default();
    for i in 0..cols {
        let (theta, outer) = if i <= n {
            let xi = i as f64 / n as f64;
            (PI - xi * FRAC_PI_4, [-l, l * xi])
        } else {
            let xi = (i - n) as f64 / n as f64;
            (0.75 * PI - xi * FRAC_PI_4, [-l * (1.0 - xi), l])
        };
        let inner = [r * theta.cos(), r * theta.sin()];
        for j in 0..=n {
            let g = graded(j as f64 / n as f64);
            let mut p = [inner[0] + g * (outer[0] - inner[0]), inner[1] + g * (outer[1] - inner[1])];
            // keep symmetry-plane nodes exactly on their planes
            if i == 0 {
                p[1] = 0.0;
            }
            if i == cols - 1 {
                p[0] = 0.0;
            }
            mesh.nodes.push(p);
        }
    }
    for i in 0..cols - 1 {
        for j in 0..n {
            mesh.push_quad(idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
        }
    }
    for i in 0..cols - 1 {
        mesh.boundary.push(BoundaryEdge { nodes: [idx(i, 0), idx(i + 1, 0)], tag: BoundaryTag::Hole });
        let outer_tag = if i < n { BoundaryTag::Left } else { BoundaryTag::Top };
        mesh.boundary.push(BoundaryEdge { nodes: [idx(i, n), idx(i + 1, n)], tag: outer_tag });
    }
    for j in 0..n {
        mesh.boundary.push(BoundaryEdge { nodes: [idx(0, j), idx(0, j + 1)], tag: BoundaryTag::Bottom });
        mesh.boundary.push(BoundaryEdge { nodes: [idx(cols - 1, j), idx(cols - 1, j + 1)], tag: BoundaryTag::Right });
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Structured mesh of the square `[−L, 0] × [0, L]` with `n` cells per side.
/// Interior nodes are moved randomly by up to `jitter` times the cell size.
pub fn mesh_square(edge_length: f64, n: usize, jitter: f64, seed: u64) -> Result<TriMesh, FemError> {
    if n == 0 || !(edge_length > 0.0) || !(0.0..0.5).contains(&jitter) {
        return Err(FemError::Mesh("square mesh needs n > 0, L > 0 and jitter in [0, 0.5)".into()));
    }
    let h = edge_length / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mesh = TriMesh::default();
    for j in 0..=n {
        for i in 0..=n {
            let mut p = [-edge_length + i as f64 * h, j as f64 * h];
            if i > 0 && i < n && j > 0 && j < n && jitter > 0.0 {
                p[0] += jitter * h * rng.random_range(-1.0..1.0);
                p[1] += jitter * h * rng.random_range(-1.0..1.0);
            }
            mesh.nodes.push(p);
        }
    }
    for j in 0..n {
        for i in 0..n {
            mesh.push_quad(idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
        }
    }
    for k in 0..n {
        mesh.boundary.push(BoundaryEdge { nodes: [idx(k, 0), idx(k + 1, 0)], tag: BoundaryTag::Bottom });
        mesh.boundary.push(BoundaryEdge { nodes: [idx(k, n), idx(k + 1, n)], tag: BoundaryTag::Top });
        mesh.boundary.push(BoundaryEdge { nodes: [idx(0, k), idx(0, k + 1)], tag: BoundaryTag::Left });
        mesh.boundary.push(BoundaryEdge { nodes: [idx(n, k), idx(n, k + 1)], tag: BoundaryTag::Right });
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Mesh for a plate geometry at the given target element size.
pub fn mesh_geometry(geometry: &PlateGeometry, target_h: f64) -> Result<TriMesh, FemError> {
    if geometry.has_hole() {
        mesh_quarter_plate(geometry.edge_length, geometry.hole_radius, target_h)
    } else {
        mesh_square(geometry.edge_length, (geometry.edge_length / target_h).ceil() as usize, 0.0, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_mesh_is_valid() {
        let m = mesh_quarter_plate(100.0, 10.0, 5.0).unwrap();
        assert!((0..m.elements.len()).all(|e| m.element_area(e) > 0.0));
    }

    #[test]
    fn refinement_quadruples_elements() {
        let a = mesh_quarter_plate(100.0, 10.0, 5.0).unwrap().elements.len();
        let b = mesh_quarter_plate(100.0, 10.0, 2.5).unwrap().elements.len();
        assert_eq!(b, 4 * a);
    }

    #[test]
    fn area_matches_analytic_value() {
        let m = mesh_quarter_plate(100.0, 10.0, 2.0).unwrap();
        let exact = 100.0f64 * 100.0 - PI * 100.0 / 4.0;
        assert!((m.area() - exact).abs() / exact < 1e-2);
        let hole_edges = m.boundary.iter().filter(|e| e.tag == BoundaryTag::Hole).count();
        assert!(hole_edges >= 32);
    }

    #[test]
    fn refinements_are_nested() {
        let coarse = mesh_quarter_plate(100.0, 10.0, 5.0).unwrap();
        let fine = mesh_quarter_plate(100.0, 10.0, 2.5).unwrap();
        for p in coarse.nodes.iter().step_by(37) {
            assert!(fine.nodes.iter().any(|q| (p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12));
        }
    }

    #[test]
    fn symmetry_nodes_lie_on_their_planes() {
        let m = mesh_quarter_plate(100.0, 10.0, 5.0).unwrap();
        assert!(m.nodes_on(BoundaryTag::Right).iter().all(|&i| m.nodes[i][0] == 0.0));
        assert!(m.nodes_on(BoundaryTag::Bottom).iter().all(|&i| m.nodes[i][1] == 0.0));
    }

    #[test]
    fn invalid_target_size() {
        assert!(mesh_quarter_plate(100.0, 10.0, 12.0).is_err());
        assert!(mesh_quarter_plate(100.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn jittered_square_is_valid() {
        let m = mesh_square(100.0, 8, 0.3, 4).unwrap();
        assert!((m.area() - 1e4).abs() < 1e-9);
    }

    #[test]
    fn text_round_trip() {
        let m = mesh_square(10.0, 3, 0.2, 1).unwrap();
        assert_eq!(TriMesh::from_text(&m.to_text()).unwrap(), m);
        assert!(TriMesh::from_text("nodes 2\n0 0\n").is_err());
    }

    #[test]
    fn untagged_boundary_is_reported() {
        let mut m = mesh_square(10.0, 2, 0.0, 0).unwrap();
        m.boundary.pop();
        assert!(matches!(m.validate(), Err(FemError::Mesh(_))));
    }
}
