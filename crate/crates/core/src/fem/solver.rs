use std::sync::Arc;


use super::mesh::TriMesh;
use super::FemError;
use crate::field::DisplacementField;
use crate::geometry::BoundaryTag;
use crate::mechanics::{kg_to_enu, MaterialParameters};

const CG_TOLERANCE: f64 = 1e-12;

/// Nodal displacements of a linear-elastic solve.
#[derive(Debug, Clone)]
pub struct FemSolution {
    pub mesh: Arc<TriMesh>,
    pub kappa: MaterialParameters,
    pub displacements: Vec<[f64; 2]>,
    /// Work of the applied loads, `fᵀu`.
    pub external_work: f64,
    /// Sum of applied nodal forces.
    pub applied_force: [f64; 2],
    /// Sum of support reactions on the constrained degrees of freedom.
    pub reaction_force: [f64; 2],
    pub iterations: usize,
    pub relative_residual: f64,
}

impl FemSolution {
    pub fn to_field(&self) -> DisplacementField {
        DisplacementField::new(self.mesh.nodes.clone(), self.displacements.clone())
    }

    /// Constant strain `(ε_xx, ε_yy, 2ε_xy)` of each element.
    pub fn element_strains(&self) -> Vec<[f64; 3]> {
        (0..self.mesh.elements.len())
            .map(|e| {
                let (b, _) = strain_operator(&self.mesh, e);
                let u: Vec<f64> = self.mesh.elements[e].iter().flat_map(|&n| self.displacements[n]).collect();
                let mut eps = [0.0; 3];
                for (r, row) in b.iter().enumerate() {
                    eps[r] = row.iter().zip(&u).map(|(a, b)| a * b).sum();
                }
                eps
            })
            .collect()
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(t.len() / 4);
        let mut vals: Vec<f64> = Vec::with_capacity(t.len() / 4);
        let mut last = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { row_ptr, cols, vals }
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.row_ptr.len() - 1)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).find(|&k| self.cols[k] == i).map_or(0.0, |k| self.vals[k]))
            .collect()
    }
}

/// Strain-displacement operator `B` (3 x 6) and area of a linear triangle.
fn strain_operator(mesh: &TriMesh, e: usize) -> ([[f64; 6]; 3], f64) {
    let [p1, p2, p3] = mesh.elements[e].map(|i| mesh.nodes[i]);
    let two_a = (p2[0] - p1[0]) * (p3[1] - p1[1]) - (p3[0] - p1[0]) * (p2[1] - p1[1]);
    let b = [p2[1] - p3[1], p3[1] - p1[1], p1[1] - p2[1]];
    let c = [p3[0] - p2[0], p1[0] - p3[0], p2[0] - p1[0]];
    let mut op = [[0.0; 6]; 3];
    for k in 0..3 {
        op[0][2 * k] = b[k] / two_a;
        op[1][2 * k + 1] = c[k] / two_a;
        op[2][2 * k] = c[k] / two_a;
        op[2][2 * k + 1] = b[k] / two_a;
    }
    (op, 0.5 * two_a)
}

fn assemble(mesh: &TriMesh, kappa: &MaterialParameters) -> Csr {
    let (e_mod, nu) = kg_to_enu(kappa);
    let s = e_mod / (1.0 - nu * nu);
    let d = [[s, s * nu, 0.0], [s * nu, s, 0.0], [0.0, 0.0, s * (1.0 - nu) / 2.0]];
    let mut trip = Vec::with_capacity(mesh.elements.len() * 36);
    for (e, el) in mesh.elements.iter().enumerate() {
        let (b, area) = strain_operator(mesh, e);
        let mut db = [[0.0; 6]; 3];
        for i in 0..3 {
            for j in 0..6 {
                db[i][j] = (0..3).map(|k| d[i][k] * b[k][j]).sum();
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                let kij: f64 = area * (0..3).map(|k| b[k][i] * db[k][j]).sum::<f64>();
                trip.push((2 * el[i / 2] + i % 2, 2 * el[j / 2] + j % 2, kij));
            }
        }
    }
    Csr::from_triplets(2 * mesh.n_nodes(), trip)
}

/// Name the rigid-body mode left free by the constraints, if any.
fn unconstrained_mode(mesh: &TriMesh, fixed: &[bool]) -> Option<&'static str> {
    // rows of the constraint operator applied to (translation x, translation y, rotation)
    let mut gram = [[0.0; 3]; 3];
    let (mut nx, mut ny) = (0, 0);
    for (dof, _) in fixed.iter().enumerate().filter(|(_, f)| **f) {
        let p = mesh.nodes[dof / 2];
        let row = if dof % 2 == 0 {
            nx += 1;
            [1.0, 0.0, -p[1]]
        } else {
            ny += 1;
            [0.0, 1.0, p[0]]
        };
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    if nx == 0 {
        return Some("rigid translation in x");
    }
    if ny == 0 {
        return Some("rigid translation in y");
    }
    let det = gram[0][0] * (gram[1][1] * gram[2][2] - gram[1][2] * gram[2][1]) - gram[0][1] * (gram[1][0] * gram[2][2] - gram[1][2] * gram[2][0])
        + gram[0][2] * (gram[1][0] * gram[2][1] - gram[1][1] * gram[2][0]);
    let scale = gram[0][0] * gram[1][1] * gram[2][2].max(1e-300);
    if det <= 1e-12 * scale {
        return Some("rigid rotation");
    }
    None
}

/// Jacobi-preconditioned conjugate gradients on the free degrees of freedom.
fn pcg(k: &Csr, f: &[f64], fixed: &[bool], max_iter: usize) -> Result<(Vec<f64>, usize, f64), FemError> {
    let n = f.len();
    let diag = k.diagonal();
    let inv_d: Vec<f64> = diag.iter().zip(fixed).map(|(d, &fx)| if fx { 0.0 } else { 1.0 / d }).collect();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = f.iter().zip(fixed).map(|(v, &fx)| if fx { 0.0 } else { *v }).collect();
    let f_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if f_norm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut q = vec![0.0; n];
    for it in 1..=max_iter {
        k.mul(&p, &mut q);
        for (qi, &fx) in q.iter_mut().zip(fixed) {
            if fx {
                *qi = 0.0;
            }
        }
        let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        if !(pq > 0.0) {
            return Err(FemError::Solver(format!("stiffness matrix not positive definite at iteration {it}")));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / f_norm;
        if rel <= CG_TOLERANCE {
            return Ok((x, it, rel));
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FemError::Solver(format!("conjugate gradients did not reach {CG_TOLERANCE:e} in {max_iter} iterations")))
}

/// Plane-stress linear triangle solve with `u_x = 0` on the right edge,
/// `u_y = 0` on the bottom edge and a uniform traction on the left edge.
pub fn solve_linear_elastic(mesh: &Arc<TriMesh>, kappa: &MaterialParameters, left_traction: [f64; 2]) -> Result<FemSolution, FemError> {
    let mut fixed = vec![false; 2 * mesh.n_nodes()];
    for n in mesh.nodes_on(BoundaryTag::Right) {
        fixed[2 * n] = true;
    }
    for n in mesh.nodes_on(BoundaryTag::Bottom) {
        fixed[2 * n + 1] = true;
    }
    solve_with_constraints(mesh, kappa, left_traction, &fixed)
}

/// Solve with an explicit list of constrained degrees of freedom (all
/// prescribed to zero); `fixed[2 n + c]` constrains component `c` of node `n`.
pub fn solve_with_constraints(mesh: &Arc<TriMesh>, kappa: &MaterialParameters, left_traction: [f64; 2], fixed: &[bool]) -> Result<FemSolution, FemError> {
    if !(kappa.k > 0.0 && kappa.g > 0.0) {
        return Err(FemError::Solver(format!("non-positive material parameters K = {}, G = {}", kappa.k, kappa.g)));
    }
    if let Some(mode) = unconstrained_mode(mesh, fixed) {
        return Err(FemError::Singular { mode });
    }
    let k = assemble(mesh, kappa);
    let mut f = vec![0.0; fixed.len()];
    for edge in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::Left) {
        let [a, b] = edge.nodes.map(|i| mesh.nodes[i]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        for &n in &edge.nodes {
            f[2 * n] += 0.5 * len * left_traction[0];
            f[2 * n + 1] += 0.5 * len * left_traction[1];
        }
    }
    let (u, iterations, relative_residual) = pcg(&k, &f, fixed, 20 * fixed.len() + 100)?;
    let mut ku = vec![0.0; u.len()];
    k.mul(&u, &mut ku);
    let mut reaction = [0.0; 2];
    let mut applied = [0.0; 2];
    for i in 0..u.len() {
        applied[i % 2] += f[i];
        if fixed[i] {
            reaction[i % 2] += ku[i] - f[i];
        }
    }
    Ok(FemSolution {
        mesh: Arc::clone(mesh),
        kappa: *kappa,
        displacements: u.chunks(2).map(|c| [c[0], c[1]]).collect(),
        external_work: f.iter().zip(&u).map(|(a, b)| a * b).sum(),
        applied_force: applied,
        reaction_force: reaction,
        iterations,
        relative_residual,
    })
}

/// Uniformly drawn nodes (without replacement) of a solution.
pub fn sample_snapshots(solution: &FemSolution, n: usize, seed: u64) -> Result<DisplacementField, FemError> {
    super::sample_field(&solution.to_field(), n, seed)
}
