use cohsim::quantum::*;
use cohsim::robustness::{robustness_channel, robustness_state};
use cohsim::sdp::{embed_hermitian, solve, AffineExpr, SdpProblem, SolverConfig};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_matrix(d: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * d * d).prop_map(move |v| {
        ComplexMatrix::from_fn(d, d, |r, c| {
            Complex64::new(v[2 * (r * d + c)], v[2 * (r * d + c) + 1])
        })
    })
}

fn hermitian(d: usize) -> impl Strategy<Value = ComplexMatrix> {
    complex_matrix(d).prop_map(|g| (&g + g.adjoint()).scale(0.5))
}

fn density(d: usize) -> impl Strategy<Value = DensityMatrix> {
    complex_matrix(d).prop_map(|g| {
        let m = &g * g.adjoint() + identity(g.nrows()).scale(1e-3);
        let t = m.trace();
        DensityMatrix::new(m.unscale(t.re)).unwrap()
    })
}

fn unitary(d: usize) -> impl Strategy<Value = ComplexMatrix> {
    complex_matrix(d).prop_map(move |g| {
        let g = g + identity(d).scale(0.1);
        g.qr().q()
    })
}

/// Stinespring-style channel `ρ ↦ tr_E[V ρ V†]` from a random isometry.
fn channel(da: usize, db: usize) -> impl Strategy<Value = QuantumChannel> {
    unitary(da * db * 2).prop_map(move |u| {
        let v = u.columns(0, da).into_owned();
        let mut choi = ComplexMatrix::zeros(da * db, da * db);
        for a in 0..da {
            for a2 in 0..da {
                let out = v.column(a) * v.column(a2).adjoint();
                let reduced = partial_trace(&out, &[db, da * 2], &[1]).unwrap();
                for b in 0..db {
                    for b2 in 0..db {
                        choi[(a * db + b, a2 * db + b2)] = reduced[(b, b2)];
                    }
                }
            }
        }
        QuantumChannel::from_choi(da, db, choi).unwrap()
    })
}

fn dim_and_unitary() -> impl Strategy<Value = (ComplexMatrix, DensityMatrix)> {
    (1usize..=4).prop_flat_map(|d| (unitary(d), density(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unitary_channel_conjugates((u, rho) in dim_and_unitary()) {
        let out = apply_channel(&choi_of_unitary(&u).unwrap(), &rho).unwrap();
        let direct = &u * rho.matrix() * u.adjoint();
        prop_assert!(max_abs_diff(out.matrix(), &direct) <= 1e-12);
    }

    #[test]
    fn cptp_choi_has_identity_marginal(ch in (1usize..=3, 1usize..=3).prop_flat_map(|(a, b)| channel(a, b))) {
        let m = partial_trace(ch.choi(), &[ch.dim_in(), ch.dim_out()], &[1]).unwrap();
        prop_assert!(max_abs_diff(&m, &identity(ch.dim_in())) <= 1e-9);
    }

    #[test]
    fn dephasing_is_idempotent(h in (1usize..=5).prop_flat_map(complex_matrix)) {
        let once = dephase(&h).unwrap();
        prop_assert_eq!(dephase(&once).unwrap(), once.clone());
        prop_assert_eq!(trace(&once), trace(&h));
    }

    #[test]
    fn tensor_power_acts_on_products(
        ch in channel(2, 2),
        r1 in density(2),
        r2 in density(2),
    ) {
        let two = channel_tensor_power(&ch, 2).unwrap();
        let joint = two.apply(&r1.kron(&r2)).unwrap();
        let sep = ch.apply(&r1).unwrap().kron(&ch.apply(&r2).unwrap());
        prop_assert!(max_abs_diff(joint.matrix(), sep.matrix()) <= 1e-11);
    }

    #[test]
    fn trace_distance_triangle(
        (a, b, c) in (1usize..=4).prop_flat_map(|d| (density(d), density(d), density(d)))
    ) {
        let ab = trace_distance(&a, &b).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-10);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn embedding_doubles_the_spectrum(h in (1usize..=8).prop_flat_map(hermitian)) {
        let d = h.nrows();
        let real = embed_hermitian(d).unwrap().embed(&h).unwrap();
        let mut got: Vec<f64> = real.symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut want: Vec<f64> = hermitian_eigenvalues(&h).iter().flat_map(|&e| [e, e]).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10);
        }
    }
}

#[test]
fn maximally_coherent_l1() {
    for m in 1..=8 {
        let psi = maximally_coherent_state(m).unwrap();
        assert!((l1_coherence(&psi) - (m - 1) as f64).abs() <= 1e-12);
    }
}

#[test]
fn repeated_solves_agree() {
    let mut p = SdpProblem::new();
    let x = p.add_psd_variable("X", 3).unwrap();
    p.add_equality("tr X = 1", AffineExpr::var(x).trace().unwrap(), identity(1))
        .unwrap();
    let b = DensityMatrix::maximally_coherent(3).unwrap().into_matrix();
    p.maximize(AffineExpr::var(x).mul_left(&b).unwrap().trace().unwrap())
        .unwrap();
    let cfg = SolverConfig::default();
    let (s1, s2) = (solve(&p, &cfg), solve(&p, &cfg));
    assert!((s1.primal_value - s2.primal_value).abs() <= 10.0 * cfg.tol_gap);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn state_robustness_is_multiplicative(r1 in density(2), r2 in density(2)) {
        let a = robustness_state(&r1).unwrap().value;
        let b = robustness_state(&r2).unwrap().value;
        let ab = robustness_state(&r1.kron(&r2)).unwrap().value;
        prop_assert!(((1.0 + ab) - (1.0 + a) * (1.0 + b)).abs() <= 1e-5);
    }

    #[test]
    fn replacement_reduces_to_state(sigma in density(3), d_in in 1usize..=2) {
        let ch = replacement_channel(&sigma, d_in).unwrap();
        let c = robustness_channel(&ch).unwrap().value;
        let s = robustness_state(&sigma).unwrap().value;
        prop_assert!((c - s).abs() <= 1e-6);
    }

    #[test]
    fn channel_robustness_ignores_basis_labels(ch in channel(2, 3), perm_in in Just([1usize, 0]), shift in 0usize..3) {
        // conjugate input and output by permutation matrices
        let pa = perm_matrix(&perm_in);
        let pb = perm_matrix(&[(shift) % 3, (shift + 1) % 3, (shift + 2) % 3]);
        let p = kron(&pa, &pb);
        let relabeled = QuantumChannel::from_choi(2, 3, &p * ch.choi() * p.transpose()).unwrap();
        let a = robustness_channel(&ch).unwrap().value;
        let b = robustness_channel(&relabeled).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-6);
    }
}

fn perm_matrix(perm: &[usize]) -> ComplexMatrix {
    let d = perm.len();
    let mut m = ComplexMatrix::zeros(d, d);
    for (i, &j) in perm.iter().enumerate() {
        m[(j, i)] = Complex64::new(1.0, 0.0);
    }
    m
}

#[test]
fn pure_state_amplitudes_normalize() {
    let v = DVector::from_vec(vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)]);
    let psi = PureState::normalized(v).unwrap();
    assert!((psi.amplitudes().norm() - 1.0).abs() <= 1e-15);
}
