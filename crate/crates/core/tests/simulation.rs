use approx::assert_abs_diff_eq;
use cohsim::mio::*;
use cohsim::quantum::{rotation_unitary, DensityMatrix, PureState, QuantumChannel};
use cohsim::robustness::half_diamond_distance;
use cohsim::sdp::{check_feasibility, SolverConfig};
use cohsim::Error;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

fn unitary(theta: f64, l: usize) -> QuantumChannel {
    QuantumChannel::from_unitary(&rotation_unitary(theta))
        .unwrap()
        .tensor_power(l)
        .unwrap()
}

fn mio(target: QuantumChannel, resource: DensityMatrix, eps: f64) -> SimulationResult {
    max_success_mio(&SimulationQuery::new(target, resource, eps, OpClass::Mio).unwrap()).unwrap()
}

fn psi(m: usize) -> DensityMatrix {
    DensityMatrix::maximally_coherent(m).unwrap()
}

#[test]
fn two_rotations_with_a_qubit_resource() {
    let r = mio(unitary(FRAC_PI_4, 2), psi(2), 0.0);
    assert_abs_diff_eq!(r.probability, 1.0 / 3.0, epsilon = 1e-6);
    let l = r.realized_channel.expect("p > 0");
    assert!(half_diamond_distance(&l, &unitary(FRAC_PI_4, 2)).unwrap() <= 1e-6);
}

#[test]
fn free_target_needs_no_resource() {
    let r = mio(
        QuantumChannel::completely_dephasing(2).unwrap(),
        DensityMatrix::basis(2, 0).unwrap(),
        0.0,
    );
    assert_abs_diff_eq!(r.probability, 1.0, epsilon = 1e-6);
}

#[test]
fn incoherent_resource_cannot_rotate() {
    let r = mio(
        unitary(FRAC_PI_4, 1),
        DensityMatrix::basis(2, 0).unwrap(),
        0.0,
    );
    assert!(r.probability <= 1e-6, "{}", r.probability);
    if let Some(l) = r.realized_channel {
        assert!(l.cptp_deviation() <= REALIZED_CPTP_TOL);
    }
}

#[test]
fn matches_closed_form_on_rotations() {
    for k in 0..=4 {
        let theta = k as f64 * FRAC_PI_4 / 4.0;
        for l in 1..=2 {
            let r = mio(unitary(theta, l), psi(2), 0.0);
            let want = unitary_success(theta, l, 2).unwrap();
            assert!(
                (r.probability - want).abs() <= 1e-5,
                "θ={theta} l={l}: {} vs {want}",
                r.probability
            );
        }
    }
}

#[test]
fn larger_resources_help() {
    let target = unitary(3.0 * FRAC_PI_8 / 2.0, 2);
    let p2 = mio(target.clone(), psi(2), 0.0).probability;
    let p3 = mio(target, psi(3), 0.0).probability;
    assert!(p3 >= p2 - 1e-6);
}

#[test]
fn tolerance_helps_and_realized_channel_is_close() {
    let target = unitary(FRAC_PI_4, 2);
    let mut last = 0.0;
    for eps in [0.0, 0.05, 0.1, 0.2] {
        let r = mio(target.clone(), psi(2), eps);
        assert!(r.probability >= last - 1e-6);
        last = r.probability;
        let l = r.realized_channel.unwrap();
        assert!(half_diamond_distance(&l, &target).unwrap() <= eps + 1e-6);
    }
}

#[test]
fn homogenized_value_is_inverse_of_t_form() {
    let cfg = SolverConfig::default();
    for (target, eps) in [
        (unitary(FRAC_PI_4, 2), 0.0),
        (unitary(FRAC_PI_8, 2), 0.1),
        (unitary(FRAC_PI_4, 1), 0.05),
    ] {
        let q = SimulationQuery::new(target, psi(2), eps, OpClass::Mio).unwrap();
        let p = max_success_mio(&q).unwrap().probability;
        let t = min_inverse_probability(&q, &cfg).unwrap();
        assert_abs_diff_eq!(p, 1.0 / t, epsilon = 1e-6);
    }
}

#[test]
fn solutions_recheck_against_the_program() {
    let q = SimulationQuery::new(unitary(FRAC_PI_8, 1), psi(2), 0.1, OpClass::Mio).unwrap();
    let problem = simulation_problem(&q).unwrap();
    let sol = cohsim::sdp::solve(&problem, &SolverConfig::default());
    let rep = check_feasibility(&problem, &sol.assignments).unwrap();
    assert!(rep.max_equality_residual <= 1e-8);
    assert!(rep.min_psd_eigenvalue >= -1e-8);
}

#[test]
fn query_validation() {
    let t = unitary(0.1, 1);
    assert!(SimulationQuery::new(t.clone(), psi(2), 1.5, OpClass::Mio).is_err());
    let q = SimulationQuery::new(t, psi(2), 0.0, OpClass::Dio).unwrap();
    assert!(max_success_mio(&q).is_err());
}

#[test]
fn analytic_examples() {
    assert_abs_diff_eq!(
        analytic_success_maxcoherent(&unitary(FRAC_PI_4, 2), 2, 0.0).unwrap(),
        1.0 / 3.0,
        epsilon = 1e-6
    );
    let deph = QuantumChannel::completely_dephasing(2).unwrap();
    assert_eq!(analytic_success_maxcoherent(&deph, 2, 0.0).unwrap(), 1.0);
    assert!(matches!(
        analytic_success_maxcoherent(&deph, 1, 0.0),
        Err(Error::TrivialResource(1))
    ));
}

#[test]
fn pure_state_bounds() {
    let target = unitary(FRAC_PI_4, 1);
    let psi2 = PureState::maximally_coherent(2).unwrap();
    let b = pure_state_lower_bound(&psi2, 2, &target, 0.0).unwrap();
    assert_abs_diff_eq!(b.value, 0.5, epsilon = 1e-6);
    let skew = PureState::from_real(&[0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap();
    assert_abs_diff_eq!(
        pure_state_lower_bound(&skew, 2, &target, 0.0)
            .unwrap()
            .value,
        0.32,
        epsilon = 1e-6
    );
    let flat = PureState::from_real(&[1.0, 0.0]).unwrap();
    let b = pure_state_lower_bound(&flat, 2, &target, 0.0).unwrap();
    assert_eq!(b.value, 0.0);
    assert!(b.note.is_some());
}

#[test]
fn explicit_protocol_for_a_rotation() {
    let target = unitary(FRAC_PI_4, 1);
    let prot = construct_mio_protocol(&target, 2, 1.0).unwrap();
    assert!(mio_violation(&prot) <= 1e-8);
    let chk = verify_protocol(&prot, &psi(2), &target).unwrap();
    assert_abs_diff_eq!(chk.p_observed, 1.0, epsilon = 1e-8);
    assert!(chk.max_conditional_error <= 1e-8);

    // without coherence the flag-0 branch no longer implements the target
    let off = verify_protocol(&prot, &DensityMatrix::basis(2, 0).unwrap(), &target).unwrap();
    assert!(off.max_conditional_error > 1e-3);
}

#[test]
fn explicit_protocol_for_a_free_target() {
    let target = QuantumChannel::completely_dephasing(2).unwrap();
    let prot = construct_mio_protocol(&target, 2, 1.0).unwrap();
    assert!(mio_violation(&prot) <= 1e-8);
    let chk = verify_protocol(&prot, &psi(2), &target).unwrap();
    assert_abs_diff_eq!(chk.p_observed, 1.0, epsilon = 1e-8);
    assert!(chk.max_conditional_error <= 1e-8);
}

#[test]
fn protocol_beyond_the_bound_is_rejected() {
    let target = unitary(FRAC_PI_4, 2);
    assert!(matches!(
        construct_mio_protocol(&target, 2, 0.5),
        Err(Error::Infeasible(_))
    ));
    let prot = construct_mio_protocol(&target, 2, 0.3).unwrap();
    let chk = verify_protocol(&prot, &psi(2), &target).unwrap();
    assert_abs_diff_eq!(chk.p_observed, 0.3, epsilon = 1e-8);
    assert!(chk.max_conditional_error <= 1e-8);
}
