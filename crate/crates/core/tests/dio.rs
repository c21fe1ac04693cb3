use approx::assert_abs_diff_eq;
use cohsim::dio::*;
use cohsim::mio::{max_success_mio, simulation_problem, OpClass, SimulationQuery};
use cohsim::quantum::{
    fidelity_with_pure, hermitian_eigenvalues, identity, partial_trace, rotation_unitary,
    DensityMatrix, PureState, QuantumChannel,
};
use cohsim::sdp::check_feasibility;
use cohsim::Error;
use std::f64::consts::FRAC_PI_4;

fn replacement(sigma: &DensityMatrix) -> QuantumChannel {
    QuantumChannel::replacement(sigma, 2).unwrap()
}

fn dio(target: QuantumChannel, resource: DensityMatrix, eps: f64) -> f64 {
    max_success_dio(&SimulationQuery::new(target, resource, eps, OpClass::Dio).unwrap())
        .unwrap()
        .probability
}

#[test]
fn nonactivating_examples() {
    let u = QuantumChannel::from_unitary(&rotation_unitary(FRAC_PI_4)).unwrap();
    let r = is_resource_nonactivating(&u, DEFAULT_NONACTIVATING_TOL).unwrap();
    assert!(!r.is_nonactivating);
    assert_abs_diff_eq!(r.deviation, 0.5, epsilon = 1e-12);
    let plus = replacement(&DensityMatrix::plus());
    assert!(
        is_resource_nonactivating(&plus, DEFAULT_NONACTIVATING_TOL)
            .unwrap()
            .is_nonactivating
    );
    let deph = QuantumChannel::completely_dephasing(3).unwrap();
    assert!(
        is_resource_nonactivating(&deph, DEFAULT_NONACTIVATING_TOL)
            .unwrap()
            .is_nonactivating
    );
}

#[test]
fn replacement_step() {
    let target = replacement(&DensityMatrix::maximally_coherent(4).unwrap());
    let psi2 = DensityMatrix::maximally_coherent(2).unwrap();
    for k in 0..=6 {
        let eps = k as f64 / 10.0;
        let p = dio(target.clone(), psi2.clone(), eps);
        let want = replacement_step_probability(4, 2, eps).unwrap();
        assert!((p - want).abs() <= 1e-5, "eps {eps}: {p} vs {want}");
    }
    assert_abs_diff_eq!(dio(target.clone(), psi2.clone(), 0.4), 0.0, epsilon = 1e-5);
}

#[test]
fn step_function_values() {
    assert_eq!(replacement_step_probability(4, 2, 0.5).unwrap(), 1.0);
    assert_eq!(replacement_step_probability(4, 2, 0.49).unwrap(), 0.0);
    assert_eq!(replacement_step_probability(3, 3, 0.0).unwrap(), 1.0);
    assert!(replacement_step_probability(2, 3, 0.5).is_err());
    assert!(matches!(
        replacement_step_probability(4, 1, 0.5),
        Err(Error::TrivialResource(1))
    ));
}

#[test]
fn plus_from_a_matching_resource() {
    let p = dio(
        replacement(&DensityMatrix::plus()),
        DensityMatrix::maximally_coherent(2).unwrap(),
        0.0,
    );
    assert_abs_diff_eq!(p, 1.0, epsilon = 1e-6);
}

#[test]
fn activating_targets_are_out_of_reach() {
    let u = QuantumChannel::from_unitary(&rotation_unitary(FRAC_PI_4)).unwrap();
    for resource in [
        DensityMatrix::maximally_coherent(2).unwrap(),
        DensityMatrix::maximally_coherent(3).unwrap(),
        PureState::from_real(&[0.6, 0.8]).unwrap().projector(),
    ] {
        assert!(dio(u.clone(), resource, 0.0) <= 1e-6);
    }
}

#[test]
fn dio_never_beats_mio() {
    let psi2 = DensityMatrix::maximally_coherent(2).unwrap();
    for (target, eps) in [
        (
            replacement(&DensityMatrix::maximally_coherent(4).unwrap()),
            0.3,
        ),
        (
            QuantumChannel::from_unitary(&rotation_unitary(0.3)).unwrap(),
            0.1,
        ),
        (replacement(&DensityMatrix::plus()), 0.0),
    ] {
        let d = dio(target.clone(), psi2.clone(), eps);
        let m = max_success_mio(
            &SimulationQuery::new(target, psi2.clone(), eps, OpClass::Mio).unwrap(),
        )
        .unwrap()
        .probability;
        assert!(d <= m + 1e-6, "{d} > {m}");
    }
}

#[test]
fn dio_optimizers_are_mio_feasible() {
    let psi2 = DensityMatrix::maximally_coherent(2).unwrap();
    let target = replacement(&DensityMatrix::maximally_coherent(4).unwrap());
    let qd = SimulationQuery::new(target.clone(), psi2.clone(), 0.5, OpClass::Dio).unwrap();
    let sol = cohsim::sdp::solve(&simulation_problem(&qd).unwrap(), &Default::default());
    let qm = SimulationQuery::new(target, psi2, 0.5, OpClass::Mio).unwrap();
    let rep = check_feasibility(&simulation_problem(&qm).unwrap(), &sol.assignments).unwrap();
    assert!(rep.max_equality_residual <= 1e-8);
    assert!(rep.min_psd_eigenvalue >= -1e-8);
}

#[test]
fn explicit_replacement_solution() {
    let (n, m) = (4, 2);
    let s = appendix_feasible_solution(n, m).unwrap();
    let q = s.query(n, m).unwrap();
    let rep = check_feasibility(&simulation_problem(&q).unwrap(), &s.assignments()).unwrap();
    assert!(rep.max_equality_residual <= 1e-12, "{rep:?}");
    assert!(rep.min_psd_eigenvalue >= -1e-12, "{rep:?}");

    let marg = partial_trace(&s.j_e, &[m * 2, n], &[1]).unwrap();
    assert!((marg - identity(m * 2)).norm() <= 1e-12);

    // spectrum of J is {m/n, (n-m)/(n(n-1)), 0, 1/(n-1)}
    let eig = hermitian_eigenvalues(&s.j_e);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    assert_abs_diff_eq!(min, 0.0, epsilon = 1e-12);
    let gap = (n - m) as f64 / (n * (n - 1)) as f64;
    assert!(eig.iter().any(|&e| (e - gap).abs() < 1e-12));

    // output on a resource and incoherent input has fidelity m/n with Ψ_n
    let omega = DensityMatrix::maximally_coherent(m).unwrap();
    let ch = QuantumChannel::from_choi(m * 2, n, s.j_e.clone()).unwrap();
    let sigma = ch
        .apply(&omega.kron(&DensityMatrix::basis(2, 0).unwrap()))
        .unwrap();
    let f = fidelity_with_pure(&sigma, &PureState::maximally_coherent(n).unwrap()).unwrap();
    assert_abs_diff_eq!(f, m as f64 / n as f64, epsilon = 1e-12);
}

#[test]
fn literal_z_fails_the_tolerance_constraint() {
    let (n, m) = (4, 2);
    let s = appendix_feasible_solution(n, m).unwrap();
    let q = s.query(n, m).unwrap();
    let mut a = s.assignments();
    a.insert("Z".into(), appendix_literal_z(n, m, 2).unwrap());
    let rep = check_feasibility(&simulation_problem(&q).unwrap(), &a).unwrap();
    let want = -((n - m) as f64) / (n * (n - 1)) as f64;
    assert_abs_diff_eq!(rep.min_psd_eigenvalue, want, epsilon = 1e-12);
}

#[test]
fn equal_ranks_give_an_exact_simulator() {
    let s = appendix_feasible_solution(3, 3).unwrap();
    assert!(s.z.norm() <= 1e-15);
    let q = s.query(3, 3).unwrap();
    let rep = check_feasibility(&simulation_problem(&q).unwrap(), &s.assignments()).unwrap();
    assert!(rep.max_equality_residual <= 1e-12);
    assert!(rep.min_psd_eigenvalue >= -1e-12);
}
