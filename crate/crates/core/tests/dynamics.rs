use approx::assert_abs_diff_eq;
use caffeine::dynamics::{propagate, propagate_sampled, LinearDrive, Method, PropagatorConfig};
use caffeine::operators::{materialize, OperatorSum, PauliLabel, QuantumState, C64};
use caffeine::Error;
use nalgebra::DVector;

fn pauli(label: PauliLabel) -> caffeine::operators::OperatorMatrix {
    let mut s = OperatorSum::new(1);
    s.add(1.0, &[(0, label)]).unwrap();
    materialize(&s).unwrap()
}

fn constant(label: PauliLabel, c: f64) -> LinearDrive {
    LinearDrive::new(vec![pauli(label)], move |_, out| out[0] = c, None).unwrap()
}

fn plus() -> QuantumState {
    QuantumState::normalized(DVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(1.0, 0.0),
    ]))
    .unwrap()
}

fn both_methods() -> [PropagatorConfig; 2] {
    [PropagatorConfig::default(), PropagatorConfig::magnus()]
}

#[test]
fn stationary_state_only_acquires_a_phase() {
    let up = QuantumState::basis(2, 0).unwrap();
    for cfg in both_methods() {
        let out = propagate(&constant(PauliLabel::Z, 1.0), &up, (0.0, 2.0), &cfg).unwrap();
        let expected = C64::from_polar(1.0, -2.0);
        assert_abs_diff_eq!(
            (out.state.as_slice()[0] - expected).norm(),
            0.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(out.state.fidelity(&up), 1.0, epsilon = 1e-10);
    }
}

#[test]
fn precession_about_z_matches_closed_form() {
    let t = 1.3;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for cfg in both_methods() {
        let out = propagate(&constant(PauliLabel::Z, 1.0), &plus(), (0.0, t), &cfg).unwrap();
        let s = out.state.as_slice();
        assert_abs_diff_eq!((s[0] - C64::from_polar(r, -t)).norm(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!((s[1] - C64::from_polar(r, t)).norm(), 0.0, epsilon = 1e-10);
    }
}

#[test]
fn rabi_oscillation_under_time_dependent_amplitude() {
    // H = f(t) X with f = 1 + cos t; ψ(t) = cos θ |0> - i sin θ |1>, θ = t + sin t
    let drive = LinearDrive::new(
        vec![pauli(PauliLabel::X)],
        |t, out| out[0] = 1.0 + t.cos(),
        None,
    )
    .unwrap();
    let up = QuantumState::basis(2, 0).unwrap();
    let t = 2.0;
    let theta = t + f64::sin(t);
    for cfg in both_methods() {
        let out = propagate(&drive, &up, (0.0, t), &cfg).unwrap();
        let s = out.state.as_slice();
        assert_abs_diff_eq!(
            (s[0] - C64::new(theta.cos(), 0.0)).norm(),
            0.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            (s[1] - C64::new(0.0, -theta.sin())).norm(),
            0.0,
            epsilon = 1e-9
        );
        assert!(out.stats.max_norm_drift < 1e-9);
    }
}

#[test]
fn sampled_states_follow_the_trajectory() {
    let up = QuantumState::basis(2, 0).unwrap();
    let times = [0.0, 0.25, 0.5, 1.0];
    let (_, rec) = propagate_sampled(
        &constant(PauliLabel::X, 1.0),
        &up,
        (0.0, 1.0),
        &PropagatorConfig::default(),
        &times,
    )
    .unwrap();
    assert_eq!(rec.times.len(), times.len());
    for (t, psi) in rec.times.iter().zip(&rec.states) {
        assert_abs_diff_eq!(psi.fidelity(&up), t.cos().powi(2), epsilon = 1e-10);
    }
}

#[test]
fn self_check_reports_tolerance_sensitivity() {
    let cfg = PropagatorConfig {
        self_check: true,
        ..PropagatorConfig::default()
    };
    let out = propagate(&constant(PauliLabel::X, 3.0), &plus(), (0.0, 1.0), &cfg).unwrap();
    assert!(out.stats.self_check_infidelity.unwrap() < 1e-10);
}

#[test]
fn step_budget_is_enforced() {
    let cfg = PropagatorConfig {
        max_steps: 5,
        ..PropagatorConfig::default()
    };
    let up = QuantumState::basis(2, 0).unwrap();
    let err = propagate(&constant(PauliLabel::X, 50.0), &up, (0.0, 10.0), &cfg).unwrap_err();
    assert!(matches!(err, Error::StepBudget { .. }), "{err}");
}

#[test]
fn invalid_tolerances_are_rejected() {
    let cfg = PropagatorConfig {
        rel_tol: 0.0,
        method: Method::AdaptiveRk45,
        ..PropagatorConfig::default()
    };
    let up = QuantumState::basis(2, 0).unwrap();
    assert!(matches!(
        propagate(&constant(PauliLabel::X, 1.0), &up, (0.0, 1.0), &cfg),
        Err(Error::Config(_))
    ));
}
