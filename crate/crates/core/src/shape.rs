//! Shape sensitivity of the Dirichlet energy.
//!
//! For a velocity field `V` supported on the obstacle boundary (and vanishing
//! on the disk), the derivative of the energy under the induced domain
//! deformation reduces to a boundary integral
//!
//! ```text
//! dE(V) = -int_{dP} (du/dn)^2 <V, n> ds,
//! ```
//!
//! with `n` the outward normal of the domain (pointing into the obstacle).
//! This is cross-checked two independent ways: central finite differences of
//! the energy in the configuration parameter, and the Green identity linking
//! the auxiliary field `w` (the derivative of the state) to the same integral.

use crate::error::Result;
use crate::fem::{
    assemble, boundary_flux_from, solve_dirichlet, solve_with_boundary_values, BoundarySide,
    FieldSolution, StiffnessSystem,
};
use crate::geometry::{inner_normal, Configuration, TWO_PI};
use crate::mesh::{generate_mesh, AnnularMesh, Resolution};

/// Velocity field evaluated on the obstacle boundary. Conceptually each field
/// is cut off before reaching the disk; only values on the obstacle ever enter
/// the derivative, so the cutoff is never materialized.
#[derive(Clone, Copy, Debug)]
pub enum PerturbationField {
    /// `V(x) = i x`: infinitesimal rotation about the obstacle center.
    Rotation,
    /// `V(x) = v`: rigid translation.
    Translation([f64; 2]),
    /// `V(x) = x`: dilation about the obstacle center.
    Scaling,
}

impl PerturbationField {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            PerturbationField::Rotation => [-x[1], x[0]],
            PerturbationField::Translation(v) => v,
            PerturbationField::Scaling => x,
        }
    }
}

/// Mesh, assembled system and base solution for one configuration.
pub struct SolvedCase {
    pub mesh: AnnularMesh,
    pub system: StiffnessSystem,
    pub solution: FieldSolution,
}

pub fn solve_case(cfg: &Configuration, res: Resolution) -> Result<SolvedCase> {
    let res = res.snapped(cfg.obstacle.symmetry_order());
    let mesh = generate_mesh(cfg, res)?;
    let system = assemble(&mesh)?;
    let solution = solve_dirichlet(&mesh, &system, cfg.placement.m)?;
    Ok(SolvedCase {
        mesh,
        system,
        solution,
    })
}

/// `<V, n>` per inner-loop node, with averaged one-sided normals at sharp
/// corners.
fn field_normal_products(
    cfg: &Configuration,
    mesh: &AnnularMesh,
    field: &PerturbationField,
) -> Vec<f64> {
    mesh.inner_boundary
        .iter()
        .map(|&i| {
            let [x, y] = mesh.nodes[i];
            let phi = y.atan2(x);
            let normal = inner_normal(&cfg.obstacle, &cfg.placement, phi);
            let v = field.eval([x, y]);
            v[0] * normal.nx + v[1] * normal.ny
        })
        .collect()
}

/// Which one-sided slope to use when an evaluation point sits on a corner.
#[derive(Clone, Copy)]
enum SideLimit {
    /// Limit from below the corner angle (end of a segment).
    Below,
    /// Limit from above (start of a segment).
    Above,
}

/// Boundary point at angle `phi` for the placement.
fn boundary_point(cfg: &Configuration, phi: f64) -> [f64; 2] {
    let r = cfg.placement.lambda * cfg.obstacle.radial_support(phi - cfg.placement.t);
    [r * phi.cos(), r * phi.sin()]
}

/// `<V, n>` at angle `phi` with the slope taken one-sided at corners.
fn field_product_at(
    cfg: &Configuration,
    field: &PerturbationField,
    phi: f64,
    side: SideLimit,
) -> f64 {
    use crate::geometry::Slope;
    let psi = phi - cfg.placement.t;
    let f = cfg.obstacle.radial_support(psi);
    let fp = match cfg.obstacle.radial_support_derivative(psi) {
        Slope::Smooth(v) => v,
        Slope::Corner { left, right } => match side {
            SideLimit::Below => left,
            SideLimit::Above => right,
        },
    };
    let norm = (f * f + fp * fp).sqrt();
    let (s, c) = phi.sin_cos();
    let normal = [(-fp * s - f * c) / norm, (fp * c - f * s) / norm];
    let v = field.eval(boundary_point(cfg, phi));
    v[0] * normal[0] + v[1] * normal[1]
}

/// `int_{dP} flux^2 <V, n> ds` by edgewise trapezoids on the boundary
/// polyline, with exact geometry for the normals. Edges are split at sharp
/// corners so each piece sees a one-sided normal, confining the integrand
/// jump; corner nodes enter with the averaged one-sided normal.
fn flux_squared_field_integral(
    cfg: &Configuration,
    mesh: &AnnularMesh,
    flux: &[f64],
    field: &PerturbationField,
) -> f64 {
    let n_phi = mesh.n_phi;
    debug_assert_eq!(flux.len(), n_phi);
    let step = TWO_PI / n_phi as f64;
    let t = cfg.placement.t;
    let values: Vec<f64> = flux.iter().map(|f| f * f).collect();
    let chord = |phi_0: f64, phi_1: f64| {
        let x0 = boundary_point(cfg, phi_0);
        let x1 = boundary_point(cfg, phi_1);
        ((x1[0] - x0[0]).powi(2) + (x1[1] - x0[1]).powi(2)).sqrt()
    };
    let mut acc = 0.0;
    for k in 0..n_phi {
        let phi_a = step * k as f64;
        let phi_b = phi_a + step;
        let val_a = values[k];
        let val_b = values[(k + 1) % n_phi];
        let mut breaks = vec![(phi_a, val_a)];
        if let Some(psi_c) = cfg.obstacle.corner_inside(phi_a - t, phi_b - t) {
            let phi_c = psi_c + t;
            let w = (phi_c - phi_a) / step;
            breaks.push((phi_c, val_a + w * (val_b - val_a)));
        }
        breaks.push((phi_b, val_b));
        for pair in breaks.windows(2) {
            let (p0, v0) = pair[0];
            let (p1, v1) = pair[1];
            let f0 = v0 * field_product_at(cfg, field, p0, SideLimit::Above);
            let f1 = v1 * field_product_at(cfg, field, p1, SideLimit::Below);
            acc += 0.5 * (f0 + f1) * chord(p0, p1);
        }
    }
    acc
}

/// Boundary-integral form of the energy derivative:
/// `-int_{dP} flux^2 <V, n> ds` over the obstacle loop.
pub fn eulerian_derivative(
    cfg: &Configuration,
    mesh: &AnnularMesh,
    solution: &FieldSolution,
    field: &PerturbationField,
) -> f64 {
    -flux_squared_field_integral(cfg, mesh, &solution.inner_flux, field)
}

/// `dE/dt` for rotation of the obstacle about its center.
pub fn rotation_derivative(cfg: &Configuration, res: Resolution) -> Result<f64> {
    let case = solve_case(cfg, res)?;
    Ok(eulerian_derivative(
        cfg,
        &case.mesh,
        &case.solution,
        &PerturbationField::Rotation,
    ))
}

/// Directional derivative of the energy under translation of the obstacle.
pub fn translation_derivative(
    cfg: &Configuration,
    res: Resolution,
    direction: [f64; 2],
) -> Result<f64> {
    let case = solve_case(cfg, res)?;
    Ok(eulerian_derivative(
        cfg,
        &case.mesh,
        &case.solution,
        &PerturbationField::Translation(direction),
    ))
}

/// `dE/dlambda`. Growing the scale from `lambda` moves a boundary point `x`
/// with velocity `x / lambda`, so the dilation integral is divided by the
/// current scale. Strictly positive for any admissible configuration.
pub fn scaling_derivative(cfg: &Configuration, res: Resolution) -> Result<f64> {
    let case = solve_case(cfg, res)?;
    Ok(scaling_derivative_from(cfg, &case.mesh, &case.solution))
}

pub fn scaling_derivative_from(
    cfg: &Configuration,
    mesh: &AnnularMesh,
    solution: &FieldSolution,
) -> f64 {
    eulerian_derivative(cfg, mesh, solution, &PerturbationField::Scaling) / cfg.placement.lambda
}

/// The derivative `w` of the state under the deformation, plus the Green
/// identity residual tying it back to the boundary integral.
#[derive(Clone, Debug)]
pub struct ShapeDerivativeSolution {
    pub w: Vec<f64>,
    /// `|int_{dB} u dw/dn + int_{dP} (du/dn)^2 <V,n>|`; both sides equal
    /// `dE(V)` up to sign in the continuum.
    pub green_residual: f64,
    /// The boundary-integral derivative for the same field.
    pub eulerian: f64,
}

/// Solve the auxiliary problem: harmonic `w` with
/// `w = -(du/dn) <V,n>` on the obstacle and `w = 0` on the disk, reusing the
/// stiffness system of the base solve.
pub fn solve_shape_derivative_bvp(
    cfg: &Configuration,
    mesh: &AnnularMesh,
    system: &StiffnessSystem,
    solution: &FieldSolution,
    field: &PerturbationField,
) -> Result<ShapeDerivativeSolution> {
    let products = field_normal_products(cfg, mesh, field);
    let inner_values: Vec<f64> = solution
        .inner_flux
        .iter()
        .zip(&products)
        .map(|(flux, p)| -flux * p)
        .collect();
    let outer_values = vec![0.0; mesh.outer_boundary.len()];
    let w = solve_with_boundary_values(mesh, system, &inner_values, &outer_values)?;

    let w_outer_flux = boundary_flux_from(mesh, system, &w, BoundarySide::Outer);
    let outer_masses = mesh.boundary_masses(&mesh.outer_boundary);
    let disk_integral: f64 = mesh
        .outer_boundary
        .iter()
        .enumerate()
        .map(|(k, &i)| solution.u[i] * w_outer_flux[k] * outer_masses[k])
        .sum();

    let obstacle_integral = flux_squared_field_integral(cfg, mesh, &solution.inner_flux, field);

    Ok(ShapeDerivativeSolution {
        w,
        green_residual: (disk_integral + obstacle_integral).abs(),
        eulerian: -obstacle_integral,
    })
}

/// Which configuration parameter a finite-difference check perturbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeKind {
    /// Rotation angle `t`.
    Rotation,
    /// Center offset `d` (translation along +x1, toward the near boundary).
    Translation,
    /// Scale `lambda`.
    Scaling,
}

#[derive(Clone, Copy, Debug)]
pub struct FdCheck {
    pub analytic: f64,
    pub central_fd: f64,
    pub rel_error: f64,
    /// Step actually used (rotation steps snap to the angular grid when they
    /// span at least one cell, keeping perturbed meshes congruent).
    pub step: f64,
}

pub fn finite_difference_check(
    cfg: &Configuration,
    kind: DerivativeKind,
    step: f64,
    res: Resolution,
) -> Result<FdCheck> {
    let snapped = res.snapped(cfg.obstacle.symmetry_order());
    let step = match kind {
        DerivativeKind::Rotation => {
            // grid-commensurate rotation steps keep polygon corners on mesh
            // nodes in both perturbed meshes
            let cell = TWO_PI / snapped.n_phi as f64;
            (step / cell).round().max(1.0) * cell
        }
        _ => step,
    };

    let analytic = match kind {
        DerivativeKind::Rotation => rotation_derivative(cfg, res)?,
        DerivativeKind::Translation => translation_derivative(cfg, res, [1.0, 0.0])?,
        DerivativeKind::Scaling => scaling_derivative(cfg, res)?,
    };

    let perturbed = |delta: f64| -> Configuration {
        let placement = match kind {
            DerivativeKind::Rotation => cfg.placement.with_t(cfg.placement.t + delta),
            DerivativeKind::Translation => cfg.placement.with_d(cfg.placement.d + delta),
            DerivativeKind::Scaling => cfg.placement.with_lambda(cfg.placement.lambda + delta),
        };
        Configuration::new(cfg.obstacle.clone(), placement)
    };
    let plus = perturbed(step);
    let minus = perturbed(-step);
    let (sol_plus, sol_minus) = rayon::join(|| solve_case(&plus, res), || solve_case(&minus, res));
    let e_plus = sol_plus?.solution.energy_volume;
    let e_minus = sol_minus?.solution.energy_volume;
    let central_fd = (e_plus - e_minus) / (2.0 * step);
    let floor = f64::EPSILON.sqrt();
    let rel_error = (analytic - central_fd).abs() / analytic.abs().max(floor);
    Ok(FdCheck {
        analytic,
        central_fd,
        rel_error,
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ObstacleSpec, Placement};
    use std::f64::consts::PI;

    fn cfg(obs: ObstacleSpec, d: f64, t: f64) -> Configuration {
        Configuration::new(obs, Placement::new(d, t, 1.0, 1.0, 1.0).unwrap())
    }

    fn square() -> ObstacleSpec {
        ObstacleSpec::regular_polygon(4, 0.285).unwrap()
    }

    /// Zero tests use the flux-accuracy model `|dE| <= 5 h^2 E`.
    fn zero_tol(case: &SolvedCase) -> f64 {
        5.0 * case.mesh.h_max * case.mesh.h_max * case.solution.energy_volume
    }

    #[test]
    fn translation_derivative_vanishes_when_concentric() {
        let c = cfg(square(), 0.0, 0.0);
        let case = solve_case(&c, Resolution::new(128, 32)).unwrap();
        let de = eulerian_derivative(
            &c,
            &case.mesh,
            &case.solution,
            &PerturbationField::Translation([1.0, 0.0]),
        );
        assert!(de.abs() <= zero_tol(&case), "dE = {de}");
    }

    #[test]
    fn rotation_derivative_vanishes_at_symmetric_angles() {
        for t in [0.0, PI / 4.0, PI / 2.0] {
            let c = cfg(square(), 0.5, t);
            let case = solve_case(&c, Resolution::new(128, 32)).unwrap();
            let de =
                eulerian_derivative(&c, &case.mesh, &case.solution, &PerturbationField::Rotation);
            assert!(de.abs() <= zero_tol(&case), "dE({t}) = {de}");
        }
    }

    #[test]
    fn rotation_derivative_vanishes_for_any_concentric_obstacle() {
        // smooth obstacle at a generic angle
        let star = ObstacleSpec::cosine_star(5, 0.3, 0.2).unwrap();
        let c = cfg(star, 0.0, 0.19);
        let case = solve_case(&c, Resolution::new(128, 32)).unwrap();
        let de = eulerian_derivative(&c, &case.mesh, &case.solution, &PerturbationField::Rotation);
        assert!(de.abs() <= zero_tol(&case), "dE = {de}");

        // sharp obstacle at a generic grid angle, so corners stay on nodes
        let t = 7.0 * TWO_PI / 128.0;
        let c = cfg(square(), 0.0, t);
        let case = solve_case(&c, Resolution::new(128, 32)).unwrap();
        let de = eulerian_derivative(&c, &case.mesh, &case.solution, &PerturbationField::Rotation);
        assert!(de.abs() <= zero_tol(&case), "dE = {de}");
    }

    #[test]
    fn rotation_derivative_sign_flips_across_the_midpoint() {
        let res = Resolution::new(128, 32);
        let left = rotation_derivative(&cfg(square(), 0.5, 3.0 * PI / 16.0), res).unwrap();
        let right = rotation_derivative(&cfg(square(), 0.5, 5.0 * PI / 16.0), res).unwrap();
        assert!(left < 0.0, "dE on (0, pi/4) = {left}");
        assert!(right > 0.0, "dE on (pi/4, pi/2) = {right}");
        // evenness about the minimum makes the pair antisymmetric
        assert!((left + right).abs() <= 2.0 * 5.0 * 0.03 * 0.03 * 5.6);
    }

    #[test]
    fn scaling_derivative_matches_concentric_closed_form() {
        let c = cfg(ObstacleSpec::circle(0.3).unwrap(), 0.0, 0.0);
        let de = scaling_derivative(&c, Resolution::default()).unwrap();
        let log_ratio = (1.0_f64 / 0.3).ln();
        let exact = 2.0 * PI / (log_ratio * log_ratio);
        assert!(
            (de - exact).abs() / exact < 0.03,
            "dE/dlambda = {de}, closed form {exact}"
        );
        assert!(de > 0.0);
    }

    #[test]
    fn scaling_derivative_positive_for_square() {
        let c = Configuration::new(square(), Placement::new(0.4, 0.0, 1.0, 1.0, 1.0).unwrap());
        let de = scaling_derivative(&c, Resolution::new(128, 32)).unwrap();
        assert!(de > 0.0);
    }

    #[test]
    fn translation_derivative_points_at_the_near_boundary() {
        // moving the obstacle toward the closest stretch of the disk boundary
        // raises the energy
        for d in [0.2, 0.5] {
            let c = cfg(square(), d, 0.0);
            let de = translation_derivative(&c, Resolution::new(128, 32), [1.0, 0.0]).unwrap();
            assert!(de > 0.0, "dE/dx1 = {de} at d = {d}");
        }
    }

    #[test]
    fn dilation_boundary_integral_decays_with_the_obstacle() {
        // the raw boundary integral for the dilation field fades with the
        // logarithmic capacity as the obstacle shrinks toward a point
        let circle = ObstacleSpec::circle(0.3).unwrap();
        let res = Resolution::new(128, 32);
        let mut previous = f64::INFINITY;
        for lambda in [0.8, 0.4, 0.2, 0.1] {
            let c = Configuration::new(
                circle.clone(),
                Placement::new(0.0, 0.0, lambda, 1.0, 1.0).unwrap(),
            );
            let case = solve_case(&c, res).unwrap();
            let integral =
                eulerian_derivative(&c, &case.mesh, &case.solution, &PerturbationField::Scaling);
            assert!(integral > 0.0);
            assert!(integral < previous, "no decay at lambda = {lambda}");
            let log_ratio = (1.0 / (0.3 * lambda)).ln();
            let expected = 2.0 * PI / (log_ratio * log_ratio);
            assert!((integral - expected).abs() / expected < 0.05);
            previous = integral;
        }
    }

    #[test]
    fn eulerian_derivative_is_linear_in_the_field() {
        let c = cfg(square(), 0.5, PI / 8.0);
        let case = solve_case(&c, Resolution::new(64, 16)).unwrap();
        let de = |v: [f64; 2]| {
            eulerian_derivative(
                &c,
                &case.mesh,
                &case.solution,
                &PerturbationField::Translation(v),
            )
        };
        let (a, b) = (1.7, -0.6);
        let combo = de([a, b]);
        let split = a * de([1.0, 0.0]) + b * de([0.0, 1.0]);
        assert!((combo - split).abs() <= 1e-12 * combo.abs().max(1.0));
    }

    #[test]
    fn derivative_is_even_in_the_datum() {
        let c = cfg(square(), 0.5, PI / 8.0);
        let case_plus = solve_case(&c, Resolution::new(64, 16)).unwrap();
        let c_minus = Configuration::new(square(), c.placement.with_m(-1.0));
        let case_minus = solve_case(&c_minus, Resolution::new(64, 16)).unwrap();
        let de_plus = eulerian_derivative(
            &c,
            &case_plus.mesh,
            &case_plus.solution,
            &PerturbationField::Rotation,
        );
        let de_minus = eulerian_derivative(
            &c_minus,
            &case_minus.mesh,
            &case_minus.solution,
            &PerturbationField::Rotation,
        );
        assert!((de_plus - de_minus).abs() <= 1e-12 * de_plus.abs().max(1e-12));
    }

    #[test]
    fn fd_agreement_smoothed_square_rotation() {
        // the derivative formula assumes a C^2 boundary; sharp corners slow
        // its convergence, so the tight check runs on the smoothed square
        let obs = ObstacleSpec::smoothed_polygon(4, 0.285, 0.05).unwrap();
        let c = cfg(obs, 0.5, PI / 8.0);
        let check =
            finite_difference_check(&c, DerivativeKind::Rotation, 1e-3, Resolution::default())
                .unwrap();
        assert!(
            check.rel_error < 1e-2,
            "analytic {} vs fd {} (rel {})",
            check.analytic,
            check.central_fd,
            check.rel_error
        );
    }

    #[test]
    fn fd_agreement_sharp_square_rotation_coarse_bound() {
        // corner singularities limit the sharp square to a few percent here
        let c = cfg(square(), 0.5, PI / 8.0);
        let check =
            finite_difference_check(&c, DerivativeKind::Rotation, 1e-3, Resolution::new(128, 32))
                .unwrap();
        assert!(check.rel_error < 0.3, "{check:?}");
        assert!(check.analytic < 0.0 && check.central_fd < 0.0);
    }

    #[test]
    fn fd_agreement_circle_scaling() {
        let c = cfg(ObstacleSpec::circle(0.3).unwrap(), 0.0, 0.0);
        let check =
            finite_difference_check(&c, DerivativeKind::Scaling, 1e-3, Resolution::new(128, 32))
                .unwrap();
        assert!(check.rel_error < 1e-2, "{check:?}");
        let log_ratio = (1.0_f64 / 0.3).ln();
        let exact = 2.0 * PI / (log_ratio * log_ratio);
        assert!((check.analytic - exact).abs() / exact < 0.03);
        assert!((check.central_fd - exact).abs() / exact < 0.03);
    }

    #[test]
    fn shape_derivative_field_is_odd_at_symmetric_configuration() {
        let c = cfg(square(), 0.5, 0.0);
        let case = solve_case(&c, Resolution::new(128, 32)).unwrap();
        let sd = solve_shape_derivative_bvp(
            &c,
            &case.mesh,
            &case.system,
            &case.solution,
            &PerturbationField::Rotation,
        )
        .unwrap();
        let n_phi = case.mesh.n_phi;
        let w_max = sd.w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0_f64;
        for j in 0..=case.mesh.n_r {
            for i in 0..n_phi {
                let here = j * n_phi + i;
                let mirrored = j * n_phi + (n_phi - i) % n_phi;
                worst = worst.max((sd.w[here] + sd.w[mirrored]).abs());
            }
        }
        assert!(worst <= 1e-6 * w_max, "antisymmetry defect {worst}");
    }

    #[test]
    fn green_identity_residual_is_small() {
        let c = cfg(square(), 0.5, PI / 8.0);
        let case = solve_case(&c, Resolution::new(128, 32)).unwrap();
        let sd = solve_shape_derivative_bvp(
            &c,
            &case.mesh,
            &case.system,
            &case.solution,
            &PerturbationField::Rotation,
        )
        .unwrap();
        assert!(sd.green_residual / sd.eulerian.abs() < 1e-2);
    }

    #[test]
    fn zero_field_gives_zero_derivative_state() {
        let c = cfg(square(), 0.5, 0.0);
        let case = solve_case(&c, Resolution::new(64, 16)).unwrap();
        let sd = solve_shape_derivative_bvp(
            &c,
            &case.mesh,
            &case.system,
            &case.solution,
            &PerturbationField::Translation([0.0, 0.0]),
        )
        .unwrap();
        assert!(sd.w.iter().all(|&v| v == 0.0));
        assert_eq!(sd.eulerian, 0.0);
    }
}
