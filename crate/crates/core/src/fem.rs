//! P1 finite elements for the Laplace problem on the meshed domain: zero trace
//! on the obstacle, a constant datum on the disk. The Dirichlet energy is
//! evaluated by two routes, a volume sum of elementwise gradients and a
//! boundary integral of the recovered flux, which agree by the discrete Green
//! identity.

use crate::error::{Error, Result};
use crate::linalg::{pcg_solve, CsrMatrix};
use crate::mesh::AnnularMesh;

pub const CG_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Free,
    InnerBoundary,
    OuterBoundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundarySide {
    Inner,
    Outer,
}

/// Assembled stiffness of the whole mesh plus the free/constrained split.
/// The unconstrained matrix is kept: its residual at boundary rows is the
/// variational flux.
#[derive(Clone, Debug)]
pub struct StiffnessSystem {
    pub full: CsrMatrix,
    pub free_matrix: CsrMatrix,
    pub node_kind: Vec<NodeKind>,
    /// Free-node index per mesh node (usize::MAX for constrained nodes).
    pub free_index: Vec<usize>,
    pub free_nodes: Vec<usize>,
}

/// Exact P1 stiffness: for a triangle with vertices p0, p1, p2 the local
/// matrix is `(b_i b_j + c_i c_j) / (4 A)` with `b_i = y_j - y_k`,
/// `c_i = x_k - x_j` (cyclic).
pub fn element_matrix(p: [[f64; 2]; 3]) -> Result<[[f64; 3]; 3]> {
    let area = 0.5
        * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    if area <= 0.0 {
        return Err(Error::DegenerateTriangle { index: 0, area });
    }
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        b[i] = p[j][1] - p[k][1];
        c[i] = p[k][0] - p[j][0];
    }
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    Ok(m)
}

pub fn assemble(mesh: &AnnularMesh) -> Result<StiffnessSystem> {
    let n = mesh.node_count();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        let local = element_matrix(p).map_err(|e| match e {
            Error::DegenerateTriangle { area, .. } => Error::DegenerateTriangle { index: t, area },
            other => other,
        })?;
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], local[i][j]));
            }
        }
    }
    let full = CsrMatrix::from_triplets(n, &triplets);

    let mut node_kind = vec![NodeKind::Free; n];
    for &i in &mesh.inner_boundary {
        node_kind[i] = NodeKind::InnerBoundary;
    }
    for &i in &mesh.outer_boundary {
        node_kind[i] = NodeKind::OuterBoundary;
    }
    let free_nodes: Vec<usize> = (0..n).filter(|&i| node_kind[i] == NodeKind::Free).collect();
    let mut free_index = vec![usize::MAX; n];
    for (k, &i) in free_nodes.iter().enumerate() {
        free_index[i] = k;
    }
    let mut free_triplets = Vec::new();
    for (k, &i) in free_nodes.iter().enumerate() {
        for (c, v) in full.row(i) {
            if free_index[c] != usize::MAX {
                free_triplets.push((k, free_index[c], v));
            }
        }
    }
    let free_matrix = CsrMatrix::from_triplets(free_nodes.len(), &free_triplets);

    Ok(StiffnessSystem {
        full,
        free_matrix,
        node_kind,
        free_index,
        free_nodes,
    })
}

/// Harmonic field and the derived quantities the shape calculus needs.
#[derive(Clone, Debug)]
pub struct FieldSolution {
    pub u: Vec<f64>,
    /// Boundary datum on the disk.
    pub m: f64,
    /// `sum_T area_T |grad u|_T^2`.
    pub energy_volume: f64,
    /// Recovered normal derivative per inner-loop node (outward normal of the
    /// domain, pointing into the obstacle). Negative for positive `m`.
    pub inner_flux: Vec<f64>,
    /// Recovered normal derivative per outer-loop node. Positive for
    /// positive `m`.
    pub outer_flux: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solve with `u = 0` on the obstacle and `u = m` on the disk, then recover
/// both boundary fluxes from the unconstrained residual.
pub fn solve_dirichlet(
    mesh: &AnnularMesh,
    system: &StiffnessSystem,
    m: f64,
) -> Result<FieldSolution> {
    let n = mesh.node_count();
    let mut u = vec![0.0; n];
    for &i in &mesh.outer_boundary {
        u[i] = m;
    }
    // rhs on free nodes: -(K u_bc)
    let mut ku = vec![0.0; n];
    system.full.mul_vec(&u, &mut ku);
    let rhs: Vec<f64> = system.free_nodes.iter().map(|&i| -ku[i]).collect();

    let dof = system.free_nodes.len();
    let max_iter = (10.0 * (dof.max(1) as f64).sqrt()).ceil() as usize;
    let sol = pcg_solve(&system.free_matrix, &rhs, CG_TOL, max_iter)?;
    for (k, &i) in system.free_nodes.iter().enumerate() {
        u[i] = sol.x[k];
    }

    let inner_flux = boundary_flux_from(mesh, system, &u, BoundarySide::Inner);
    let outer_flux = boundary_flux_from(mesh, system, &u, BoundarySide::Outer);
    let energy_volume = energy_volume_of(mesh, &u);

    Ok(FieldSolution {
        u,
        m,
        energy_volume,
        inner_flux,
        outer_flux,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

/// Solve with arbitrary Dirichlet data given per inner-loop and outer-loop
/// node position, reusing the assembled system.
pub fn solve_with_boundary_values(
    mesh: &AnnularMesh,
    system: &StiffnessSystem,
    inner_values: &[f64],
    outer_values: &[f64],
) -> Result<Vec<f64>> {
    assert_eq!(inner_values.len(), mesh.inner_boundary.len());
    assert_eq!(outer_values.len(), mesh.outer_boundary.len());
    let n = mesh.node_count();
    let mut u = vec![0.0; n];
    for (k, &i) in mesh.inner_boundary.iter().enumerate() {
        u[i] = inner_values[k];
    }
    for (k, &i) in mesh.outer_boundary.iter().enumerate() {
        u[i] = outer_values[k];
    }
    let mut ku = vec![0.0; n];
    system.full.mul_vec(&u, &mut ku);
    let rhs: Vec<f64> = system.free_nodes.iter().map(|&i| -ku[i]).collect();
    let dof = system.free_nodes.len();
    let max_iter = (10.0 * (dof.max(1) as f64).sqrt()).ceil() as usize;
    let sol = pcg_solve(&system.free_matrix, &rhs, CG_TOL, max_iter)?;
    for (k, &i) in system.free_nodes.iter().enumerate() {
        u[i] = sol.x[k];
    }
    Ok(u)
}

/// Consistent variational flux: the unconstrained residual `(K u)_b` at a
/// boundary node approximates `int (du/dn) psi_b`, so dividing by the lumped
/// boundary mass yields the nodal normal derivative with respect to the
/// outward normal of the domain.
pub fn boundary_flux_from(
    mesh: &AnnularMesh,
    system: &StiffnessSystem,
    u: &[f64],
    side: BoundarySide,
) -> Vec<f64> {
    let loop_nodes = match side {
        BoundarySide::Inner => &mesh.inner_boundary,
        BoundarySide::Outer => &mesh.outer_boundary,
    };
    let mut ku = vec![0.0; mesh.node_count()];
    system.full.mul_vec(u, &mut ku);
    let masses = mesh.boundary_masses(loop_nodes);
    loop_nodes
        .iter()
        .zip(&masses)
        .map(|(&i, &m)| ku[i] / m)
        .collect()
}

pub fn boundary_flux(
    mesh: &AnnularMesh,
    system: &StiffnessSystem,
    solution: &FieldSolution,
    side: BoundarySide,
) -> Vec<f64> {
    boundary_flux_from(mesh, system, &solution.u, side)
}

/// Volume route: P1 gradients are constant per triangle.
pub fn energy_volume_of(mesh: &AnnularMesh, u: &[f64]) -> f64 {
    let mut energy = 0.0;
    for tri in &mesh.triangles {
        let p = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let mut gx = 0.0;
        let mut gy = 0.0;
        for i in 0..3 {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            let b = p[j][1] - p[k][1];
            let c = p[k][0] - p[j][0];
            gx += u[tri[i]] * b / (2.0 * area);
            gy += u[tri[i]] * c / (2.0 * area);
        }
        energy += area * (gx * gx + gy * gy);
    }
    energy
}

/// Boundary route: `m` times the trapezoidal sum of the outer flux over the
/// disk boundary.
pub fn energy_boundary(mesh: &AnnularMesh, solution: &FieldSolution) -> f64 {
    let masses = mesh.boundary_masses(&mesh.outer_boundary);
    let integral: f64 = solution
        .outer_flux
        .iter()
        .zip(&masses)
        .map(|(f, m)| f * m)
        .sum();
    solution.m * integral
}

/// Max residual of the unconstrained system over free nodes, relative to the
/// lift load; bounded by the solver tolerance.
pub fn galerkin_residual(mesh: &AnnularMesh, system: &StiffnessSystem, u: &[f64]) -> f64 {
    let mut ku = vec![0.0; mesh.node_count()];
    system.full.mul_vec(u, &mut ku);
    let norm: f64 = system
        .free_nodes
        .iter()
        .map(|&i| ku[i] * ku[i])
        .sum::<f64>()
        .sqrt();
    let mut lift = vec![0.0; mesh.node_count()];
    for (i, &kind) in system.node_kind.iter().enumerate() {
        if kind != NodeKind::Free {
            lift[i] = u[i];
        }
    }
    let mut klift = vec![0.0; mesh.node_count()];
    system.full.mul_vec(&lift, &mut klift);
    let load: f64 = system
        .free_nodes
        .iter()
        .map(|&i| klift[i] * klift[i])
        .sum::<f64>()
        .sqrt();
    norm / load.max(f64::MIN_POSITIVE)
}

/// Text dump of nodal values and fluxes: `u idx value`, then
/// `flux inner|outer idx value` (1-based node indices).
pub fn write_solution_text<W: std::io::Write>(
    mesh: &AnnularMesh,
    solution: &FieldSolution,
    mut out: W,
) -> std::io::Result<()> {
    for (i, v) in solution.u.iter().enumerate() {
        writeln!(out, "u {} {:.17}", i + 1, v)?;
    }
    for (k, &i) in mesh.inner_boundary.iter().enumerate() {
        writeln!(out, "flux inner {} {:.17}", i + 1, solution.inner_flux[k])?;
    }
    for (k, &i) in mesh.outer_boundary.iter().enumerate() {
        writeln!(out, "flux outer {} {:.17}", i + 1, solution.outer_flux[k])?;
    }
    Ok(())
}
