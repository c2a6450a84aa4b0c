use proptest::prelude::*;

use qvhs::amodel::{canonical_frame, flat_frame, frame_monodromy, monodromy, pvhs_certificate, residue, verify_frame_lemmas};
use qvhs::catalog;
use qvhs::correspondence::{gamma1_from_potential, q_preservation, reconstruct_gamma, round_trip};
use qvhs::format::{ModuleFile, PotentialFile};
use qvhs::frobenius::{classical_potential, q_defect, q_form, structure_constants_from_cubic};
use qvhs::hodge::{
    degree_filtration, module_to_orbit, orbit_to_module, weight_filtration, ConeSampling, SignCalibration,
};
use qvhs::matrix::MatSeries;
use qvhs::potential::{quantum_matrix, wdvv_check, QuantumPotential};
use qvhs::{FrobeniusModule, Matrix, Scalar};

fn module_for(k: u32, seed: u64) -> FrobeniusModule {
    catalog::random_polarizable(k, seed)
}

/// E1 potentials and weight-5 family members, by seed.
fn potential_for(seed: u64, pick: usize) -> QuantumPotential {
    match pick % 3 {
        0 => catalog::e1_potential(catalog::e1_random_series(seed, 6)),
        1 => catalog::k5_family(seed, 1)[1].1.clone(),
        _ => catalog::k5_family(seed, 1)[2].1.clone(),
    }
}

fn for_each_coefficient(s: &MatSeries, mut f: impl FnMut(&Matrix) -> bool) -> bool {
    s.terms().all(|(_, c)| f(c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn relabeling_is_a_degree_reversing_involution(k in 3u32..=5, seed in 0u64..500) {
        let m = module_for(k, seed);
        for a in 0..m.rank() {
            prop_assert_eq!(m.delta(m.delta(a)), a);
            prop_assert_eq!(m.degree(m.delta(a)), 2 * k - m.degree(a));
        }
    }

    #[test]
    fn divisor_products_commute(k in 3u32..=5, seed in 0u64..500) {
        let m = module_for(k, seed);
        for x in m.products() {
            for y in m.products() {
                prop_assert_eq!(x.mul(y), y.mul(x));
            }
        }
    }

    #[test]
    fn cubic_and_structure_constants_are_inverse(k in 3u32..=5, seed in 0u64..500) {
        let m = module_for(k, seed);
        let cubic = classical_potential(&m).unwrap();
        prop_assert_eq!(structure_constants_from_cubic(&m, &cubic).unwrap(), m.products().to_vec());
    }

    #[test]
    fn q_form_parity_and_infinitesimal_isometry(k in 3u32..=5, seed in 0u64..500) {
        let m = module_for(k, seed);
        let q = q_form(&m);
        let parity = if k % 2 == 0 { Scalar::one() } else { Scalar::from_int(-1) };
        prop_assert_eq!(q.transpose(), q.scale(&parity));
        for l in m.products() {
            prop_assert!(q_defect(&q, l).is_zero());
        }
    }

    #[test]
    fn hard_lefschetz_and_orbit_round_trip(k in 3u32..=5, seed in 0u64..500) {
        let m = module_for(k, seed);
        let w = weight_filtration(&m.product_by(&vec![Scalar::one(); m.r()])).unwrap();
        prop_assert_eq!(w.shift(-(k as i32)), degree_filtration(&m));
        let orbit = module_to_orbit(&m, &ConeSampling::default(), SignCalibration::Geometric).unwrap();
        let (back, basis) = orbit_to_module(&orbit).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(basis, Matrix::identity(m.rank()));
        let again = module_to_orbit(&back, &ConeSampling::default(), SignCalibration::Geometric).unwrap();
        prop_assert_eq!(again, orbit);
    }

    #[test]
    fn quantum_product_keeps_unit_pairing_and_degree(seed in 0u64..500, pick in 0usize..3) {
        let phi = potential_for(seed, pick);
        let m = phi.module();
        let b = m.pairing();
        for j in 1..=m.r() {
            let a = quantum_matrix(&phi, j).unwrap();
            let classical = a.constant_term().cloned().unwrap();
            prop_assert_eq!(&classical, m.product(j).unwrap());
            // T_j * T0 = T_j: the corrections never touch the unit column
            let unit_kept = a
                .terms()
                .all(|(mono, c)| mono.iter().all(|&e| e == 0) || (0..m.rank()).all(|i| c.get(i, 0).is_zero()));
            prop_assert!(unit_kept);
            let self_adjoint = for_each_coefficient(&a, |c| c.transpose().mul(b) == b.mul(c));
            prop_assert!(self_adjoint);
            let raises_by_two = for_each_coefficient(&a, |c| {
                c.entries().all(|(row, col, v)| v.is_zero() || m.degree(row) == m.degree(col) + 2)
            });
            prop_assert!(raises_by_two);
        }
    }

    #[test]
    fn associativity_iff_wdvv(seed in 0u64..500, pick in 1usize..3) {
        let phi = potential_for(seed, pick);
        let a1 = quantum_matrix(&phi, 1).unwrap();
        let a2 = quantum_matrix(&phi, 2).unwrap();
        let commute = a1.mul(&a2) == a2.mul(&a1);
        prop_assert_eq!(commute, wdvv_check(&phi).unwrap().holds());
    }

    #[test]
    fn correspondence_round_trips_at_every_order(seed in 0u64..500, order in 1u32..=6) {
        let phi = catalog::e1_potential(catalog::e1_random_series(seed, order));
        let rt = round_trip(&phi, order).unwrap();
        prop_assert!(rt.passed());
        prop_assert!(q_preservation(phi.module(), &rt.tower).passed());
    }

    #[test]
    fn weight5_family_tower_preserves_q(seed in 0u64..500) {
        let phi = potential_for(seed, 1);
        let g1 = gamma1_from_potential(&phi).unwrap();
        let tower = reconstruct_gamma(phi.module(), &g1, 3).unwrap();
        prop_assert!(q_preservation(phi.module(), &tower).passed());
    }

    #[test]
    fn frames_residues_and_monodromy(seed in 0u64..500, order in 1u32..=5) {
        let phi = catalog::e1_potential(catalog::e1_random_series(seed, order));
        let m = phi.module();
        let l = m.product(1).unwrap();
        prop_assert_eq!(residue(&phi, 1).unwrap(), l.scale(&Scalar::tau_pow(-1)));
        let flat = flat_frame(&phi, order).unwrap();
        let (mono, on_canonical) = frame_monodromy(&flat, 1).unwrap();
        prop_assert_eq!(mono, monodromy(m, 1).unwrap());
        prop_assert_eq!(&on_canonical, l);
        let canonical = canonical_frame(&phi, order).unwrap();
        let g1 = gamma1_from_potential(&phi).unwrap();
        let tower = reconstruct_gamma(m, &g1, order).unwrap();
        prop_assert_eq!(canonical.y, tower.exp_neg());
        let cert = pvhs_certificate(&phi, order).unwrap();
        prop_assert!(cert.get("pairing-flat").unwrap().passed);
        prop_assert!(verify_frame_lemmas(&phi, order).unwrap().get("canonical-normalization[T0]").unwrap().passed);
    }

    #[test]
    fn files_round_trip(k in 3u32..=5, seed in 0u64..500, pick in 0usize..3) {
        let m = module_for(k, seed);
        let file = ModuleFile::from_module(&m);
        let text = file.to_json();
        prop_assert_eq!(ModuleFile::parse(&text).unwrap().to_json(), text.clone());
        prop_assert_eq!(ModuleFile::parse(&text).unwrap().to_module().unwrap(), m);

        let phi = potential_for(seed, pick);
        let file = PotentialFile::from_potential(&phi);
        let text = file.to_json();
        let back = PotentialFile::parse(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.to_potential(phi.module()).unwrap(), phi);
    }
}
