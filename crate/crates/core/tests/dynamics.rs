use std::f64::consts::TAU;

use nalgebra::Vector3;
use pendulum_core::integrator::rk4_step;
use pendulum_core::*;
use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};

fn sphere_state(theta: f64, phi: f64, raw_v: [f64; 3], ell: f64, t: f64) -> State {
    let n = Vector3::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    );
    let v = Vector3::from(raw_v);
    State::new(t, n * ell, v - n * n.dot(&v))
}

fn any_params() -> impl Strategy<Value = PendulumParams> {
    (0.1f64..5.0, 0.1f64..20.0, 0.01f64..5.0, 0.2f64..3.0)
        .prop_map(|(m, g, gamma, ell)| PendulumParams::new(m, g, gamma, ell).unwrap())
}

fn any_pivot() -> impl Strategy<Value = PivotMotion> {
    (
        0.5f64..10.0,
        prop::collection::vec(-0.5f64..0.5, 0..3),
        prop::collection::vec(-0.5f64..0.5, 0..3),
        prop::collection::vec(-0.5f64..0.5, 0..3),
        prop::collection::vec(-0.5f64..0.5, 0..3),
    )
        .prop_map(|(period, a, b, c, d)| PivotMotion::new(period, a, b, c, d).unwrap())
}

fn any_state(ell: f64) -> impl Strategy<Value = State> {
    (
        0.0f64..std::f64::consts::PI,
        0.0f64..TAU,
        prop::array::uniform3(-3.0f64..3.0),
        -10.0f64..10.0,
    )
        .prop_map(move |(th, ph, v, t)| sphere_state(th, ph, v, ell, t))
}

fn scenario() -> impl Strategy<Value = (PendulumParams, PivotMotion, State)> {
    (any_params(), any_pivot()).prop_flat_map(|(p, q)| {
        let ell = p.rod_length();
        (Just(p), Just(q), any_state(ell))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tangency_identity((params, pivot, s) in scenario()) {
        let d = vector_field(s.time, &s, &params, &pivot);
        prop_assert_eq!(d.dposition, s.velocity);
        let lhs = d.dvelocity.dot(&s.position) + s.velocity.norm_squared();
        let scale = 1.0 + s.velocity.norm_squared() + params.gravity() * params.rod_length();
        prop_assert!(lhs.abs() <= 1e-12 * scale, "residual {lhs:e}");
    }

    #[test]
    fn constraint_force_is_radial((params, pivot, s) in scenario()) {
        let d = vector_field(s.time, &s, &params, &pivot);
        let force = d.dvelocity
            + Vector3::new(0.0, 0.0, params.gravity())
            + pivot.accel(s.time)
            + s.velocity * (params.friction() / params.mass());
        let scale = (force.norm() + 1.0) * params.rod_length();
        prop_assert!(force.cross(&s.position).norm() <= 1e-12 * scale);
    }

    #[test]
    fn energy_rate_respects_shell_bound((params, pivot, s) in scenario()) {
        let m = params.mass();
        let f = kinetic_energy(&s, &params);
        let bound = (2.0 * f * m).sqrt() * (params.gravity() + pivot.accel(s.time).norm())
            - 2.0 * f * params.friction() / m;
        let fdot = energy_rate(s.time, &s, &params, &pivot);
        prop_assert!(fdot <= bound + 1e-12 * (1.0 + bound.abs()), "{fdot} > {bound}");
    }

    #[test]
    fn energy_rate_matches_power_balance((params, pivot, s) in scenario()) {
        let v = s.velocity;
        let expected = -params.mass() * params.gravity() * v.z
            - params.friction() * v.norm_squared()
            - params.mass() * pivot.accel(s.time).dot(&v);
        let fdot = energy_rate(s.time, &s, &params, &pivot);
        let scale = 1.0 + expected.abs() + params.mass() * params.gravity() * v.norm();
        prop_assert!((fdot - expected).abs() <= 1e-11 * scale);
    }

    #[test]
    fn horizontal_face_is_exactly_minus_g(
        params in any_params(),
        pivot in any_pivot(),
        phi in 0.0f64..TAU,
        speed in -5.0f64..5.0,
        t in -10.0f64..10.0,
    ) {
        let ell = params.rod_length();
        let pos = Vector3::new(phi.cos(), phi.sin(), 0.0) * ell;
        let vel = Vector3::new(-phi.sin(), phi.cos(), 0.0) * speed;
        let s = State::new(t, pos, vel);
        let zdd = vertical_acceleration_at_horizontal(t, &s, &params, &pivot, 1e-12).unwrap();
        prop_assert!((zdd + params.gravity()).abs() <= 1e-12 * params.gravity());
    }

    #[test]
    fn kinetic_energy_rotation_invariant(
        v in prop::array::uniform3(-3.0f64..3.0),
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..TAU,
    ) {
        let params = PendulumParams::new(1.7, 1.0, 1.0, 1.0).unwrap();
        let ax = Vector3::from(axis);
        prop_assume!(ax.norm() > 1e-3);
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(ax), angle);
        let s = State::new(0.0, Vector3::z(), Vector3::from(v));
        let r = State::new(0.0, Vector3::z(), rot * Vector3::from(v));
        let (a, b) = (kinetic_energy(&s, &params), kinetic_energy(&r, &params));
        prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a));
    }

    /// `d^2/dt^2 (r . r) = 2 (|v|^2 + r . a)` vanishes with the multiplier.
    #[test]
    fn multiplier_keeps_constraint_curvature_zero((params, pivot, s) in scenario()) {
        let d = vector_field(s.time, &s, &params, &pivot);
        let second = 2.0 * (s.velocity.norm_squared() + s.position.dot(&d.dvelocity));
        let scale = 1.0 + s.velocity.norm_squared() + params.gravity() * params.rod_length();
        prop_assert!(second.abs() <= 1e-12 * scale);
        // one short unprojected step stays on the sphere to high order
        let h = 1e-4;
        let next = rk4_step(s.time, &s, h, &params, &pivot);
        let drift = (next.position.norm_squared() - params.rod_length().powi(2)).abs();
        prop_assert!(drift <= 1e-12 * scale.powi(3));
    }
}

#[test]
fn stationary_pivot_energy_is_dissipated_pointwise() {
    let params = PendulumParams::new(1.0, 9.81, 0.3, 1.0).unwrap();
    let pivot = PivotMotion::stationary(TAU).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let mut next = || rng.gen::<f64>();
    for _ in 0..1000 {
        let s = sphere_state(
            next() * std::f64::consts::PI,
            next() * TAU,
            [next() * 4.0 - 2.0, next() * 4.0 - 2.0, next() * 4.0 - 2.0],
            1.0,
            0.0,
        );
        let d = vector_field(0.0, &s, &params, &pivot);
        // d/dt of (m/2)|v|^2 + m g z
        let rate = params.mass() * (d.dvelocity.dot(&s.velocity) + params.gravity() * s.velocity.z);
        let expected = -params.friction() * s.velocity.norm_squared();
        assert!((rate - expected).abs() <= 1e-11 * (1.0 + expected.abs()));
        assert!(rate <= 1e-12);
    }
}
