use qvhs::amodel::curvature_check;
use qvhs::catalog;
use qvhs::correspondence::{gamma1_from_potential, integrability_check};
use qvhs::potential::{wdvv_check, CommutationVerdict, QuadrupleWitness};
use qvhs::potential::QuantumPotential;
use qvhs::Scalar;

fn verdicts(phi: &QuantumPotential) -> [CommutationVerdict; 3] {
    let g1 = gamma1_from_potential(phi).unwrap();
    [
        wdvv_check(phi).unwrap(),
        integrability_check(phi.module(), &g1).unwrap(),
        curvature_check(phi).unwrap(),
    ]
}

#[test]
fn consistent_weight5_potential_passes_all_three() {
    for v in verdicts(&catalog::p1p4_potential()) {
        assert!(v.holds(), "{:?}", v.first());
    }
}

// First failure of the perturbed fixture, computed independently by brute
// force over all third partials of the full potential.
#[test]
fn perturbed_witness_matches_brute_force() {
    let expected = QuadrupleWitness {
        j: 1,
        l: 2,
        a: 1,
        d: 5,
        monomial: vec![1, 0],
        value: Scalar::tau(),
    };
    let expected = QuadrupleWitness {
        value: Scalar::from_int(2) * expected.value,
        ..expected
    };
    let later = [
        (1, 6, vec![2, 1], Scalar::from_ratio(4, 3) * Scalar::tau_pow(4)),
        (2, 5, vec![1, 1], Scalar::from_int(2) * Scalar::tau_pow(3)),
    ];
    for v in verdicts(&catalog::p1p4_perturbed()) {
        assert_eq!(v.first(), Some(&expected));
        for (w, (a, d, mono, value)) in v.violations[1..3].iter().zip(&later) {
            assert_eq!((w.a, w.d, &w.monomial, &w.value), (*a, *d, mono, value));
        }
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]

    #[test]
    fn seeded_family_verdicts_agree(seed in 0u64..1000) {
        for (_, phi) in catalog::k5_family(seed, 1) {
            let [w, i, c] = verdicts(&phi);
            proptest::prop_assert_eq!(&w, &i);
            proptest::prop_assert_eq!(&i, &c);
        }
    }
}
