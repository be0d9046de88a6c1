//! Structured triangulation of the domain between the obstacle and the disk.
//!
//! The domain is radially convex about the obstacle center (every ray from the
//! center crosses the obstacle boundary once and the disk boundary once), so a
//! polar grid works: `n_phi` spokes at uniform angles, `n_r + 1` rings
//! interpolated between the two boundaries with a grading exponent that
//! clusters rings toward the obstacle, where flux accuracy matters most. Each
//! quad is split along its shorter diagonal, ties broken toward the diagonal
//! emanating from the even spoke, so meshes are fully deterministic.

use std::collections::HashSet;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{admissible, disk_exit_radius, Configuration, TWO_PI};

/// Triangulation of the region between the obstacle and the disk, with tagged
/// boundary loops.
#[derive(Clone, Debug)]
pub struct AnnularMesh {
    /// Node coordinates in the obstacle-centered frame.
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise node-index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Ordered closed loop on the obstacle boundary (counterclockwise, first
    /// node not repeated).
    pub inner_boundary: Vec<usize>,
    /// Ordered closed loop on the disk boundary.
    pub outer_boundary: Vec<usize>,
    /// Per inner-loop node: does it sit on a sharp obstacle corner?
    pub inner_corner: Vec<bool>,
    /// Longest edge in the mesh.
    pub h_max: f64,
    pub n_phi: usize,
    pub n_r: usize,
}

/// Mesh resolution bundle; the defaults match the reference sweeps.
#[derive(Clone, Copy, Debug)]
pub struct Resolution {
    pub n_phi: usize,
    pub n_r: usize,
    pub grading: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            n_phi: 256,
            n_r: 64,
            grading: 1.5,
        }
    }
}

impl Resolution {
    pub fn new(n_phi: usize, n_r: usize) -> Self {
        Self {
            n_phi,
            n_r,
            ..Self::default()
        }
    }

    /// Round `n_phi` up to a multiple of `2n`, so obstacle symmetry axes are
    /// mesh lines.
    pub fn snapped(&self, n: u32) -> Self {
        let block = 2 * n as usize;
        Self {
            n_phi: self.n_phi.next_multiple_of(block).max(8),
            ..*self
        }
    }

    /// Halve the mesh size in both directions.
    pub fn refined(&self) -> Self {
        Self {
            n_phi: self.n_phi * 2,
            n_r: self.n_r * 2,
            grading: self.grading,
        }
    }
}

pub fn generate_mesh(cfg: &Configuration, res: Resolution) -> Result<AnnularMesh> {
    let obs = &cfg.obstacle;
    let placement = &cfg.placement;
    let n_phi = res.n_phi;
    let n_r = res.n_r;
    if n_phi < 8 || n_phi % (2 * obs.symmetry_order() as usize) != 0 {
        return Err(Error::Mesh(format!(
            "n_phi = {n_phi} must be >= 8 and a multiple of {}",
            2 * obs.symmetry_order()
        )));
    }
    if n_r < 2 {
        return Err(Error::Mesh(format!("n_r = {n_r} must be >= 2")));
    }
    if !(res.grading > 0.0) {
        return Err(Error::Mesh(format!("grading {} must be > 0", res.grading)));
    }
    let adm = admissible(obs, placement);
    if !adm.is_ok() {
        return Err(Error::Inadmissible {
            margin: adm.margin,
            phi: adm.worst_phi,
        });
    }

    let mut nodes = Vec::with_capacity(n_phi * (n_r + 1));
    let mut inner_corner = Vec::with_capacity(n_phi);
    for j in 0..=n_r {
        // grading > 1 clusters rings toward the obstacle boundary
        let s = (j as f64 / n_r as f64).powf(res.grading);
        for i in 0..n_phi {
            let phi = TWO_PI * i as f64 / n_phi as f64;
            let r_in = placement.lambda * obs.radial_support(phi - placement.t);
            let r_out = disk_exit_radius(placement, phi);
            let gap = r_out - r_in;
            if gap <= 1e-12 * placement.r1 {
                return Err(Error::Mesh(format!(
                    "degenerate radial gap {gap:.3e} in sector phi = {phi:.6}"
                )));
            }
            let r = r_in + gap * s;
            nodes.push([r * phi.cos(), r * phi.sin()]);
            if j == 0 {
                inner_corner.push(obs.is_corner_direction(phi - placement.t));
            }
        }
    }

    let idx = |i: usize, j: usize| j * n_phi + (i % n_phi);
    let mut triangles = Vec::with_capacity(2 * n_phi * n_r);
    for j in 0..n_r {
        for i in 0..n_phi {
            let a = idx(i, j); // inner-left
            let b = idx(i + 1, j); // inner-right
            let c = idx(i + 1, j + 1); // outer-right
            let d = idx(i, j + 1); // outer-left
            let diag_ac = dist(nodes[a], nodes[c]);
            let diag_bd = dist(nodes[b], nodes[d]);
            let tie = (diag_ac - diag_bd).abs() <= 1e-12 * diag_ac.max(diag_bd);
            let use_ac = if tie { i % 2 == 0 } else { diag_ac < diag_bd };
            // counterclockwise traversal of the sector quad is a, d, c, b
            if use_ac {
                triangles.push([a, d, c]);
                triangles.push([a, c, b]);
            } else {
                triangles.push([a, d, b]);
                triangles.push([d, c, b]);
            }
        }
    }

    let mut h_max = 0.0_f64;
    for tri in &triangles {
        let area = signed_area(&nodes, tri);
        if area <= 0.0 {
            return Err(Error::Mesh(format!(
                "non-positive triangle at nodes {tri:?} (area {area:.3e})"
            )));
        }
        for k in 0..3 {
            h_max = h_max.max(dist(nodes[tri[k]], nodes[tri[(k + 1) % 3]]));
        }
    }

    Ok(AnnularMesh {
        nodes,
        triangles,
        inner_boundary: (0..n_phi).collect(),
        outer_boundary: (n_r * n_phi..(n_r + 1) * n_phi).collect(),
        inner_corner,
        h_max,
        n_phi,
        n_r,
    })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn signed_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl AnnularMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Unique undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges = HashSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                edges.insert((u.min(v), u.max(v)));
            }
        }
        edges.len()
    }

    /// Lumped boundary mass per loop node: half the length of the two
    /// adjacent boundary edges.
    pub fn boundary_masses(&self, loop_nodes: &[usize]) -> Vec<f64> {
        let n = loop_nodes.len();
        let mut mass = vec![0.0; n];
        for k in 0..n {
            let a = self.nodes[loop_nodes[k]];
            let b = self.nodes[loop_nodes[(k + 1) % n]];
            let len = dist(a, b);
            mass[k] += 0.5 * len;
            mass[(k + 1) % n] += 0.5 * len;
        }
        mass
    }

    /// Plain-text dump: `v x y`, `t i j k`, `bi idx`, `bo idx` (1-based).
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for node in &self.nodes {
            writeln!(out, "v {:.17} {:.17}", node[0], node[1])?;
        }
        for tri in &self.triangles {
            writeln!(out, "t {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1)?;
        }
        for &i in &self.inner_boundary {
            writeln!(out, "bi {}", i + 1)?;
        }
        for &i in &self.outer_boundary {
            writeln!(out, "bo {}", i + 1)?;
        }
        Ok(())
    }
}

/// Everything `validate` measures about a mesh.
#[derive(Clone, Debug, Default)]
pub struct MeshReport {
    pub orientation_violations: usize,
    pub euler_characteristic: i64,
    pub boundary_edge_violations: usize,
    pub loop_violations: usize,
    pub min_angle_deg: f64,
    pub obtuse_count: usize,
    pub h_max: f64,
    pub h_min: f64,
    /// Max distance of inner-loop nodes from the obstacle boundary, when
    /// checked against a configuration.
    pub inner_fit: Option<f64>,
    /// Max deviation of outer-loop nodes from the disk radius.
    pub outer_fit: Option<f64>,
}

impl MeshReport {
    pub fn is_valid(&self) -> bool {
        self.orientation_violations == 0
            && self.euler_characteristic == 0
            && self.boundary_edge_violations == 0
            && self.loop_violations == 0
            && self.inner_fit.map_or(true, |v| v <= 1e-10)
            && self.outer_fit.map_or(true, |v| v <= 1e-10)
    }
}

/// Check every structural mesh invariant: positive orientation, the Euler
/// characteristic of an annulus, boundary-edge incidence, loop simplicity.
pub fn validate(mesh: &AnnularMesh) -> MeshReport {
    let mut report = MeshReport {
        h_min: f64::INFINITY,
        min_angle_deg: f64::INFINITY,
        ..Default::default()
    };

    for tri in &mesh.triangles {
        if signed_area(&mesh.nodes, tri) <= 0.0 {
            report.orientation_violations += 1;
        }
        let mut lengths = [0.0; 3];
        for k in 0..3 {
            lengths[k] = dist(mesh.nodes[tri[k]], mesh.nodes[tri[(k + 1) % 3]]);
        }
        let mut obtuse = false;
        for k in 0..3 {
            // angle at vertex k is opposite edge k+1
            let (a, b, c) = (lengths[(k + 1) % 3], lengths[k], lengths[(k + 2) % 3]);
            let cos = (b * b + c * c - a * a) / (2.0 * b * c);
            let angle = cos.clamp(-1.0, 1.0).acos().to_degrees();
            report.min_angle_deg = report.min_angle_deg.min(angle);
            if angle > 90.0 + 1e-12 {
                obtuse = true;
            }
        }
        if obtuse {
            report.obtuse_count += 1;
        }
        // element size = triangle diameter (longest edge)
        let diameter = lengths.iter().fold(0.0_f64, |m, &l| m.max(l));
        report.h_max = report.h_max.max(diameter);
        report.h_min = report.h_min.min(diameter);
    }

    let v = mesh.node_count() as i64;
    let e = mesh.edge_count() as i64;
    let f = mesh.triangles.len() as i64;
    report.euler_characteristic = v - e + f;

    // incidence count per undirected edge
    let mut incidence: std::collections::HashMap<(usize, usize), usize> =
        std::collections::HashMap::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (u, w) = (tri[k], tri[(k + 1) % 3]);
            *incidence.entry((u.min(w), u.max(w))).or_insert(0) += 1;
        }
    }
    for loop_nodes in [&mesh.inner_boundary, &mesh.outer_boundary] {
        let n = loop_nodes.len();
        let unique: HashSet<_> = loop_nodes.iter().collect();
        if unique.len() != n || n < 3 {
            report.loop_violations += 1;
        }
        for k in 0..n {
            let (u, w) = (loop_nodes[k], loop_nodes[(k + 1) % n]);
            match incidence.get(&(u.min(w), u.max(w))) {
                Some(1) => {}
                _ => report.boundary_edge_violations += 1,
            }
        }
    }
    if mesh
        .inner_boundary
        .iter()
        .any(|i| mesh.outer_boundary.contains(i))
    {
        report.loop_violations += 1;
    }

    report
}

/// `validate` plus boundary conformity against the generating configuration.
pub fn validate_with_geometry(mesh: &AnnularMesh, cfg: &Configuration) -> MeshReport {
    let mut report = validate(mesh);
    let mut inner_fit = 0.0_f64;
    for &i in &mesh.inner_boundary {
        let [x, y] = mesh.nodes[i];
        let phi = y.atan2(x);
        let target = cfg.placement.lambda * cfg.obstacle.radial_support(phi - cfg.placement.t);
        inner_fit = inner_fit.max(((x * x + y * y).sqrt() - target).abs());
    }
    let mut outer_fit = 0.0_f64;
    let c = cfg.placement.disk_center();
    for &i in &mesh.outer_boundary {
        let [x, y] = mesh.nodes[i];
        let r = ((x - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt();
        outer_fit = outer_fit.max((r - cfg.placement.r1).abs());
    }
    report.inner_fit = Some(inner_fit);
    report.outer_fit = Some(outer_fit);
    report
}

/// Pure measurement: longest/shortest edge, minimum angle, obtuse triangles.
#[derive(Clone, Copy, Debug)]
pub struct MeshStats {
    pub h_max: f64,
    pub h_min: f64,
    pub min_angle_deg: f64,
    pub obtuse_count: usize,
}

pub fn mesh_stats(mesh: &AnnularMesh) -> MeshStats {
    let report = validate(mesh);
    MeshStats {
        h_max: report.h_max,
        h_min: report.h_min,
        min_angle_deg: report.min_angle_deg,
        obtuse_count: report.obtuse_count,
    }
}
