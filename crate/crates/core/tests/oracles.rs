//! Library results checked against brute-force constructions built here from
//! dense matrices.

use qcomb::circuit::unitary_of;
use qcomb::comb::{comb_choi, generic_comb, link_vec, loss_comb, loss_process, output_channel, choi_layout};
use qcomb::protocols::{build_civ, build_streamlined_ansatz, StreamlinedVariant};
use qcomb::qmath::{haar_su2, haar_unitary, partial_trace, RandomSource};
use qcomb::train::{gradient, CombObjective};
use qcomb::{AncillaOutput, CombSpec, ComplexMatrix, GradientMethod, PerformanceOperator, C64};

fn random_params(comb: &CombSpec, rng: &mut RandomSource) -> Vec<f64> {
    (0..comb.num_params()).map(|_| rng.uniform(-3.2, 3.2)).collect()
}

/// Full unitary `T_m (I ⊗ U_m) ⋯ (I ⊗ U_1) T_0` on ancillas ⊗ main.
fn sequence_unitary(comb: &CombSpec, params: &[f64], slots: &[ComplexMatrix]) -> ComplexMatrix {
    let anc_dim = 1 << comb.ancilla_qubits();
    let mut w = ComplexMatrix::identity(2 * anc_dim);
    for (k, tooth) in comb.teeth().iter().enumerate() {
        if k > 0 {
            w = ComplexMatrix::identity(anc_dim).kron(&slots[k - 1]).matmul(&w);
        }
        w = unitary_of(tooth, params).unwrap().matmul(&w);
    }
    w
}

/// Choi operator on (P, F) of `ρ ↦ Tr_anc[W (|0⟩⟨0| ⊗ ρ) W†]`, or of the
/// `⟨0|_anc` branch when `reset` is set.
fn brute_force_channel(w: &ComplexMatrix, anc_dim: usize, reset: bool) -> ComplexMatrix {
    let kept = if reset { 1 } else { anc_dim };
    ComplexMatrix::from_fn(4, 4, |r, c| {
        let (a, f, b, g) = (r >> 1, r & 1, c >> 1, c & 1);
        (0..kept).map(|x| w[(2 * x + f, a)] * w[(2 * x + g, b)].conj()).sum()
    })
}

#[test]
fn output_channel_matches_sequence_unitary() {
    let mut rng = RandomSource::new(21);
    for m in 0..=3 {
        for na in 0..=2 {
            for output in [AncillaOutput::TraceOut, AncillaOutput::Reset] {
                let comb = generic_comb(m, na, 2).unwrap().with_ancilla_output(output);
                let params = random_params(&comb, &mut rng);
                let slots: Vec<_> = (0..m).map(|_| haar_unitary(&mut rng, 2)).collect();
                let w = sequence_unitary(&comb, &params, &slots);
                let expect = brute_force_channel(&w, 1 << na, output == AncillaOutput::Reset);
                let got = output_channel(&comb, &params, &slots).unwrap().matrix;
                assert!(got.max_abs_diff(&expect) < 1e-12, "m={m} na={na} {output:?}");
            }
        }
    }
}

#[test]
fn comb_choi_is_a_valid_comb() {
    let mut rng = RandomSource::new(22);
    for m in 1..=3 {
        for na in 0..=2 {
            let comb = generic_comb(m, na, 2).unwrap();
            let params = random_params(&comb, &mut rng);
            let choi = comb_choi(&comb, &params).unwrap();
            let c = &choi.matrix;
            assert!(c.is_hermitian(1e-12));
            assert!((c.trace().re - (1u64 << (m + 1)) as f64).abs() < 1e-9);
            let min_eig = c.hermitian_eigenvalues().unwrap().into_iter().fold(f64::INFINITY, f64::min);
            assert!(min_eig > -1e-9, "min eigenvalue {min_eig}");

            // Causality of the last tooth: Tr_F C = Tr_{O_m F} C ⊗ I / 2.
            let layout = choi_layout(m);
            let labels: Vec<String> = layout.labels().map(str::to_string).collect();
            let without_f: Vec<&str> = labels[..labels.len() - 1].iter().map(String::as_str).collect();
            let without_of: Vec<&str> = labels[..labels.len() - 2].iter().map(String::as_str).collect();
            let (tr_f, _) = partial_trace(c, &layout, &without_f).unwrap();
            let (tr_of, _) = partial_trace(c, &layout, &without_of).unwrap();
            let expect = tr_of.kron(&ComplexMatrix::identity(2)).scale(C64::new(0.5, 0.0));
            assert!(tr_f.max_abs_diff(&expect) < 1e-10, "m={m} na={na}");
        }
    }
}

#[test]
fn exact_inversion_comb_has_unit_score() {
    let comb = build_civ();
    let omega = PerformanceOperator::sample(4, 64, 5).unwrap();
    assert!(loss_comb(&comb, &[], &omega).unwrap().abs() < 1e-12);
}

#[test]
fn process_loss_equals_comb_loss_on_shared_samples() {
    let mut rng = RandomSource::new(23);
    for (m, na) in [(1, 0), (2, 1), (3, 2)] {
        let comb = generic_comb(m, na, 2).unwrap();
        let params = random_params(&comb, &mut rng);
        let us: Vec<ComplexMatrix> = (0..25).map(|_| haar_su2(&mut rng)).collect();
        let omega = PerformanceOperator::from_unitaries(m, &us).unwrap();
        let samples: Vec<Vec<ComplexMatrix>> = us.iter().map(|u| vec![u.clone(); m]).collect();
        let targets: Vec<ComplexMatrix> = us.iter().map(ComplexMatrix::adjoint).collect();
        let lp = loss_process(&comb, &params, &samples, &targets).unwrap();
        let lc = loss_comb(&comb, &params, &omega).unwrap();
        assert!((lp - lc).abs() < 1e-12, "m={m}: process {lp} vs comb {lc}");
    }
}

#[test]
fn link_vec_overlap_is_hilbert_schmidt() {
    let mut rng = RandomSource::new(24);
    for _ in 0..20 {
        let u = haar_unitary(&mut rng, 2);
        let v = haar_unitary(&mut rng, 2);
        let inner: C64 = link_vec(&u).iter().zip(link_vec(&v)).map(|(a, b)| a.conj() * b).sum();
        let hs = u.adjoint().matmul(&v).trace();
        assert!((inner - hs).norm() < 1e-12);
    }
}

#[test]
fn gradient_methods_agree_on_every_ansatz_family() {
    let mut rng = RandomSource::new(25);
    let omega3 = PerformanceOperator::sample(3, 40, 1).unwrap();
    let omega4 = PerformanceOperator::sample(4, 40, 1).unwrap();
    let omega5 = PerformanceOperator::sample(5, 40, 1).unwrap();
    let cases: Vec<(CombSpec, &PerformanceOperator)> = vec![
        (generic_comb(3, 0, 2).unwrap(), &omega3),
        (generic_comb(3, 2, 2).unwrap(), &omega3),
        (generic_comb(3, 1, 2).unwrap().with_ancilla_output(AncillaOutput::Reset), &omega3),
        (build_streamlined_ansatz(StreamlinedVariant::FourCall, 1).unwrap(), &omega4),
        (build_streamlined_ansatz(StreamlinedVariant::FiveCall, 1).unwrap(), &omega5),
    ];
    for (comb, omega) in cases {
        let obj = CombObjective::new(&comb, omega).unwrap();
        let params = random_params(&comb, &mut rng);
        let ps = gradient(&obj, &params, GradientMethod::ParameterShift).unwrap();
        let cd = gradient(&obj, &params, GradientMethod::CentralDifference { h: 1e-5 }).unwrap();
        let adj = gradient(&obj, &params, GradientMethod::Adjoint).unwrap();
        for i in 0..ps.len() {
            assert!((ps[i] - cd[i]).abs() < 1e-6, "param {i}: ps {} cd {}", ps[i], cd[i]);
            assert!((ps[i] - adj[i]).abs() < 1e-10, "param {i}: ps {} adjoint {}", ps[i], adj[i]);
        }
    }
}

#[test]
fn haar_trace_moment() {
    // E|tr U|² = 1 for Haar U(d) and SU(2).
    let mut rng = RandomSource::new(26);
    let n = 4000;
    for d in [2, 3, 4] {
        let mean = (0..n).map(|_| haar_unitary(&mut rng, d).trace().norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.1, "d={d}: {mean}");
    }
    let mean = (0..n).map(|_| haar_su2(&mut rng).trace().norm_sqr()).sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.1, "su2: {mean}");
}

#[test]
fn inversion_extends_to_u2_but_twirl_identity_does_not() {
    use qcomb::protocols::{build_cv5, pauli_twirl_identity_check, verify_inversion};
    use qcomb::qmath::random_state;
    let mut rng = RandomSource::new(27);
    let (civ, cv5) = (build_civ(), build_cv5());
    for _ in 0..20 {
        let u = haar_unitary(&mut rng, 2);
        assert!((u.det().unwrap() - C64::new(1.0, 0.0)).norm() > 1e-6);
        assert!(pauli_twirl_identity_check(&u).unwrap() > 1e-6);
        let psi = random_state(&mut rng, 1);
        for comb in [&civ, &cv5] {
            let r = verify_inversion(comb, &u, &psi).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
}
