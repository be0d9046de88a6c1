//! Property tests for the geometric primitives: dihedral symmetry of the
//! support functions, normal identities, and the ray-circle relation behind
//! the exit radius.

use proptest::prelude::*;

use obstacle_lab::geometry::{
    disk_exit_radius, inner_normal, obstacle_point, ObstacleSpec, Placement, Slope, TWO_PI,
};

fn obstacles() -> impl Strategy<Value = ObstacleSpec> {
    prop_oneof![
        (0.05f64..0.45).prop_map(|r| ObstacleSpec::circle(r).unwrap()),
        (3u32..9, 0.05f64..0.45).prop_map(|(n, r)| ObstacleSpec::regular_polygon(n, r).unwrap()),
        (3u32..7, 0.05f64..0.45, 0.01f64..0.08)
            .prop_map(|(n, r, eps)| ObstacleSpec::smoothed_polygon(n, r, eps).unwrap()),
        (0.05f64..0.45, 0.3f64..1.0)
            .prop_map(|(r, ratio)| ObstacleSpec::ellipse(r, ratio).unwrap()),
        (3u32..9, 0.05f64..0.45, 0.05f64..0.45)
            .prop_map(|(n, r, eps)| ObstacleSpec::cosine_star(n, r, eps).unwrap()),
    ]
}

proptest! {
    #[test]
    fn support_is_periodic_and_even(obs in obstacles(), phi in 0.0..TWO_PI) {
        let period = TWO_PI / obs.symmetry_order() as f64;
        let f = obs.radial_support(phi);
        prop_assert!(f > 0.0);
        prop_assert!((obs.radial_support(phi + period) - f).abs() < 1e-12);
        prop_assert!((obs.radial_support(-phi) - f).abs() < 1e-12);
        prop_assert!(f <= obs.circumradius() + 1e-12);
        prop_assert!(f >= obs.incircle_radius() - 1e-12);
    }

    #[test]
    fn normal_is_unit_and_satisfies_radial_identity(
        obs in obstacles(),
        phi in 0.0..TWO_PI,
        d in 0.0f64..0.3,
        t in 0.0..TWO_PI,
        lambda in 0.5f64..1.5,
    ) {
        let placement = Placement::new(d, t, lambda, 1.0, 1.0).unwrap();
        let normal = inner_normal(&obs, &placement, phi);
        let len = (normal.nx * normal.nx + normal.ny * normal.ny).sqrt();
        if !normal.corner {
            prop_assert!((len - 1.0).abs() < 1e-12, "|n| = {len}");
            let x = obstacle_point(&obs, &placement, phi);
            let dot = x[0] * normal.nx + x[1] * normal.ny;
            let f = obs.radial_support(phi - t);
            let fp = match obs.radial_support_derivative(phi - t) {
                Slope::Smooth(v) => v,
                Slope::Corner { .. } => unreachable!("corner excluded above"),
            };
            // <x, n> = -lambda^2 f^2 / sqrt(lambda^2 f^2 + lambda^2 f'^2)
            let lf = lambda * f;
            let lfp = lambda * fp;
            let expected = -(lf * lf) / (lf * lf + lfp * lfp).sqrt();
            prop_assert!((dot - expected).abs() < 1e-10, "{dot} vs {expected}");
        } else {
            // averaged one-sided normals shorten the vector but never flip it
            prop_assert!(len <= 1.0 + 1e-12 && len > 0.5);
        }
    }

    #[test]
    fn exit_radius_lands_on_the_disk(
        phi in 0.0..TWO_PI,
        d in 0.0f64..0.99,
        r1 in 0.5f64..2.0,
    ) {
        prop_assume!(d < r1);
        let placement = Placement::new(d, 0.0, 1.0, r1, 1.0).unwrap();
        let g = disk_exit_radius(&placement, phi);
        prop_assert!(g > 0.0);
        let pos = [g * phi.cos(), g * phi.sin()];
        let center = placement.disk_center();
        let dist = ((pos[0] - center[0]).powi(2) + (pos[1] - center[1]).powi(2)).sqrt();
        prop_assert!((dist - r1).abs() < 1e-12, "|pos - c_B| = {dist}, r1 = {r1}");
    }

    #[test]
    fn corner_slopes_are_antisymmetric(n in 3u32..9, r in 0.05f64..0.45, k in 0u32..8) {
        let obs = ObstacleSpec::regular_polygon(n, r).unwrap();
        let corner = TWO_PI * (k % n) as f64 / n as f64;
        match obs.radial_support_derivative(corner) {
            Slope::Corner { left, right } => {
                prop_assert!(left > 0.0 && right < 0.0);
                prop_assert!((left + right).abs() < 1e-10);
            }
            Slope::Smooth(_) => prop_assert!(false, "corner not detected"),
        }
    }
}

/// Smooth families have a single slope sign between the vertex axis and the
/// edge-midpoint axis, sampled densely.
#[test]
fn support_is_monotone_per_sector() {
    let samples = 1000;
    let cases: Vec<(&str, ObstacleSpec)> = vec![
        (
            "cosine_star",
            ObstacleSpec::cosine_star(5, 0.3, 0.2).unwrap(),
        ),
        ("ellipse", ObstacleSpec::ellipse(0.3, 0.6).unwrap()),
        (
            "smoothed_polygon",
            ObstacleSpec::smoothed_polygon(4, 0.285, 0.05).unwrap(),
        ),
    ];
    for (name, obs) in &cases {
        let half = std::f64::consts::PI / obs.symmetry_order() as f64;
        for k in 0..samples {
            let phi = half * (k as f64 + 0.5) / samples as f64;
            let slope = obs.radial_support_derivative(phi).average();
            assert!(slope <= 0.0, "{name}: f'({phi}) = {slope} > 0");
        }
    }
    // sharp polygons are monotone away from the corner directions too
    let obs = ObstacleSpec::regular_polygon(4, 0.285).unwrap();
    let half = std::f64::consts::PI / 4.0;
    for k in 1..samples {
        let phi = half * k as f64 / samples as f64;
        assert!(obs.radial_support_derivative(phi).average() < 0.0);
    }
}

/// Nodal symmetry checks promised for the generated meshes: evenness of the
/// support makes mirrored angles exact mirrors.
#[test]
fn support_evenness_is_exact_on_dense_grid() {
    let obs = ObstacleSpec::regular_polygon(5, 0.3).unwrap();
    for k in 0..1000 {
        let phi = TWO_PI * k as f64 / 1000.0;
        let defect = (obs.radial_support(-phi) - obs.radial_support(phi)).abs();
        assert!(defect < 1e-12, "evenness defect {defect} at {phi}");
    }
}
