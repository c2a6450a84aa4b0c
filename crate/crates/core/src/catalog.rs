//! Example modules and potentials: the weight-3 module E1, cohomology-like
//! modules of products of projective spaces, and seeded random variants.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::format::{ModuleFile, PotentialFile};
use crate::frobenius::FrobeniusModule;
use crate::matrix::Matrix;
use crate::potential::QuantumPotential;
use crate::scalar::Scalar;
use crate::series::QSeries;

const P1P4_POTENTIAL: &str = include_str!("../data/p1p4.potential.json");
const P1P4_PERTURBED: &str = include_str!("../data/p1p4_perturbed.potential.json");
const BROKEN_MODULE: &str = include_str!("../data/broken.module.json");

/// Weight 3, one class per degree, T₁*T₁ = κT₂, T₁*T₂ = T₃.
pub fn e1(kappa: i64) -> FrobeniusModule {
    let pairing = Matrix::from_ints(&[&[0, 0, 0, 1], &[0, 0, 1, 0], &[0, 1, 0, 0], &[1, 0, 0, 0]]);
    let l1 = Matrix::from_ints(&[&[0, 0, 0, 0], &[1, 0, 0, 0], &[0, kappa, 0, 0], &[0, 0, 1, 0]]);
    FrobeniusModule::new(3, vec![1, 1, 1, 1], pairing, vec![l1], true).expect("E1 shape")
}

/// The shapes used for random polarizable modules, by weight.
pub fn projective_shapes(k: u32) -> Vec<Vec<u32>> {
    match k {
        3 => vec![vec![3], vec![1, 2], vec![1, 1, 1]],
        4 => vec![vec![4], vec![1, 3], vec![2, 2], vec![1, 1, 2]],
        5 => vec![vec![5], vec![1, 4], vec![2, 3]],
        _ => Vec::new(),
    }
}

/// Exponent vectors of the monomial basis of ℚ[h]/(h_i^{n_i+1}), sorted by
/// degree and, within a degree, lexicographically descending.
pub fn monomial_basis(shape: &[u32]) -> Vec<Vec<u32>> {
    let mut all: Vec<Vec<u32>> = vec![Vec::new()];
    for &n in shape {
        all = all
            .into_iter()
            .flat_map(|p| {
                (0..=n).map(move |e| {
                    let mut q = p.clone();
                    q.push(e);
                    q
                })
            })
            .collect();
    }
    all.sort_by(|a, b| {
        let da: u32 = a.iter().sum();
        let db: u32 = b.iter().sum();
        da.cmp(&db).then(b.cmp(a))
    });
    all
}

/// Cohomology-like module of P^{n₁}×…×P^{n_s} with volume w² and basis
/// T_α = σ_α h^α. `scales` supplies σ for each degree-2 class and each
/// "lower" class of higher degree; dual classes get σ = 1/(w² σ).
pub fn projective_product(shape: &[u32], w: &Scalar, scales: &dyn Fn(&[u32]) -> Scalar) -> FrobeniusModule {
    let k: u32 = shape.iter().sum();
    let basis = monomial_basis(shape);
    let n = basis.len();
    let index: BTreeMap<Vec<u32>, usize> = basis.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
    let volume = w * w;
    let dual = |a: &[u32]| -> Vec<u32> { shape.iter().zip(a).map(|(n, e)| n - e).collect() };

    let mut sigma = vec![Scalar::zero(); n];
    for (i, a) in basis.iter().enumerate() {
        let d = dual(a);
        let deg: u32 = a.iter().sum();
        if 2 * deg < k || (2 * deg == k && *a > d) {
            sigma[i] = if deg == 0 { Scalar::one() } else { scales(a) };
        } else if *a == d {
            sigma[i] = w.inv().expect("nonzero volume");
        }
    }
    for (i, a) in basis.iter().enumerate() {
        let d = dual(a);
        let deg: u32 = a.iter().sum();
        if 2 * deg > k || (2 * deg == k && *a < d) {
            let partner = index[&d];
            sigma[i] = (&volume * &sigma[partner]).inv().expect("nonzero");
        }
    }

    let top: Vec<u32> = shape.to_vec();
    let pairing = Matrix::from_fn(n, n, |i, j| {
        let s: Vec<u32> = basis[i].iter().zip(&basis[j]).map(|(a, b)| a + b).collect();
        if s == top {
            &(&sigma[i] * &sigma[j]) * &volume
        } else {
            Scalar::zero()
        }
    });
    let r = shape.len();
    let products = (0..r)
        .map(|j| {
            let hj = index[&unit(r, j)];
            let mut l = Matrix::zeros(n, n);
            for (a, alpha) in basis.iter().enumerate() {
                let mut up = alpha.clone();
                up[j] += 1;
                if up[j] <= shape[j] {
                    let c = index[&up];
                    l.set(c, a, &(&sigma[hj] * &sigma[a]) / &sigma[c]);
                }
            }
            l
        })
        .collect();
    let dims = (0..=k)
        .map(|p| basis.iter().filter(|a| a.iter().sum::<u32>() == p).count())
        .collect();
    FrobeniusModule::new(k, dims, pairing, products, true).expect("projective product shape")
}

fn unit(r: usize, j: usize) -> Vec<u32> {
    let mut v = vec![0; r];
    v[j] = 1;
    v
}

/// Projective product with unit volume and unscaled monomial basis.
pub fn standard_projective(shape: &[u32]) -> FrobeniusModule {
    projective_product(shape, &Scalar::one(), &|_| Scalar::one())
}

fn small_positive(rng: &mut ChaCha8Rng) -> Scalar {
    Scalar::from_ratio(rng.gen_range(1..=5), rng.gen_range(1..=3))
}

/// A seeded random polarizable module of weight k: a rescaled projective
/// product of random shape.
pub fn random_polarizable(k: u32, seed: u64) -> FrobeniusModule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = projective_shapes(k);
    assert!(!shapes.is_empty(), "no shapes for weight {}", k);
    let shape = shapes[rng.gen_range(0..shapes.len())].clone();
    let w = small_positive(&mut rng);
    let basis = monomial_basis(&shape);
    let table: BTreeMap<Vec<u32>, Scalar> = basis.into_iter().map(|a| (a, small_positive(&mut rng))).collect();
    projective_product(&shape, &w, &|a| table[a].clone())
}

/// E1 with κ = 5 and φ_ħ = s.
pub fn e1_potential(s: QSeries) -> QuantumPotential {
    QuantumPotential::weight3(e1(5), s).expect("one-variable series")
}

/// A seeded E1 correction with terms q₁..q₁⁶ and small coefficients in ℚ[τ].
pub fn e1_random_series(seed: u64, order: u32) -> QSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = (1..=6u32).map(|m| {
        let c = Scalar::from_ratio(rng.gen_range(-6..=6), rng.gen_range(1..=4));
        let t = Scalar::tau_pow(rng.gen_range(0..=2));
        (vec![m], c * t)
    });
    QSeries::from_terms(1, order, terms)
}

/// E1 with one Frobenius condition broken: T₁*T₂ = 2T₃.
pub fn broken_e1() -> FrobeniusModule {
    ModuleFile::parse(BROKEN_MODULE)
        .and_then(|f| f.to_module())
        .expect("bundled module")
}

/// The weight-5 module of P¹×P⁴.
pub fn p1p4() -> FrobeniusModule {
    standard_projective(&[1, 4])
}

/// A WDVV-consistent potential on [`p1p4`] at order 4 with both divisor
/// variables mixing.
pub fn p1p4_potential() -> QuantumPotential {
    bundled_potential(P1P4_POTENTIAL)
}

/// [`p1p4_potential`] with q₁ added to φ^{34} and φ^{43}; violates WDVV.
pub fn p1p4_perturbed() -> QuantumPotential {
    bundled_potential(P1P4_PERTURBED)
}

fn bundled_potential(text: &str) -> QuantumPotential {
    PotentialFile::parse(text)
        .and_then(|f| f.to_potential(&p1p4()))
        .expect("bundled potential")
}

/// Substitute q_j → c_j q_j.
pub fn rescale(s: &QSeries, c: &[Scalar]) -> QSeries {
    let terms = s.terms().map(|(m, v)| {
        let f = m
            .iter()
            .zip(c)
            .fold(v.clone(), |acc, (&e, cj)| acc * cj.pow(e));
        (m.clone(), f)
    });
    QSeries::from_terms(s.nvars(), s.order(), terms)
}

fn rescale_potential(phi: &QuantumPotential, c: &[Scalar]) -> QuantumPotential {
    QuantumPotential::new(
        phi.module().clone(),
        phi.order(),
        phi.phi_a().iter().map(|(a, s)| (*a, rescale(s, c))).collect(),
        phi.phi_ab().iter().map(|(ab, s)| (*ab, rescale(s, c))).collect(),
        phi.weight3_series().map(|s| rescale(s, c)),
    )
    .expect("same shapes")
}

/// A seeded family of weight-5, two-variable potentials at order 4.
///
/// Each seed gives a rescaling of [`p1p4_potential`], which stays
/// consistent, and a copy with a random low-degree term added to one
/// coefficient series. The fixed perturbation [`p1p4_perturbed`] comes first.
pub fn k5_family(seed: u64, count: usize) -> Vec<(String, QuantumPotential)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = p1p4_potential();
    let mut out = vec![("perturbed".to_string(), p1p4_perturbed())];
    let nonzero = |rng: &mut ChaCha8Rng| loop {
        let v = rng.gen_range(-3..=3);
        if v != 0 {
            return Scalar::from_ratio(v, rng.gen_range(1..=2));
        }
    };
    for i in 0..count {
        let c = [nonzero(&mut rng), nonzero(&mut rng)];
        let scaled = rescale_potential(&base, &c);
        out.push((format!("rescaled-{}", i), scaled.clone()));

        let mut bumped = scaled;
        let deg = rng.gen_range(1..=2u32);
        let e1 = rng.gen_range(0..=deg);
        let mono = vec![e1, deg - e1];
        let bump = QSeries::monomial(2, base.order(), mono, nonzero(&mut rng) * Scalar::tau_pow(rng.gen_range(0..=2)));
        let keys: Vec<(usize, usize)> = bumped.phi_ab().keys().copied().filter(|(a, b)| a <= b).collect();
        let pick = rng.gen_range(0..keys.len() + bumped.phi_a().len());
        if pick < keys.len() {
            let (a, b) = keys[pick];
            let s = bumped.phi_ab()[&(a, b)].add(&bump);
            bumped.set_pair(a, b, s);
        } else {
            let a = *bumped.phi_a().keys().nth(pick - keys.len()).unwrap();
            let s = bumped.phi_a()[&a].add(&bump);
            bumped.set_linear(a, s);
        }
        out.push((format!("bumped-{}", i), bumped));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frobenius::validate_module;

    #[test]
    fn shapes_have_rank_at_most_twelve() {
        for k in 3..=5 {
            for s in projective_shapes(k) {
                assert_eq!(s.iter().sum::<u32>(), k);
                assert!(monomial_basis(&s).len() <= 12);
            }
        }
    }

    #[test]
    fn projective_modules_validate() {
        for k in 3..=5 {
            for s in projective_shapes(k) {
                let m = standard_projective(&s);
                let rep = validate_module(&m);
                assert!(rep.passed(), "{:?}: {}", s, rep);
            }
        }
        for seed in 0..12 {
            for k in 3..=5 {
                let m = random_polarizable(k, seed);
                let rep = validate_module(&m);
                assert!(rep.passed(), "k={} seed={}: {}", k, seed, rep);
            }
        }
    }

    #[test]
    fn p3_matches_e1_with_unit_volume() {
        assert_eq!(standard_projective(&[3]), e1(1));
    }

    #[test]
    fn bundled_fixtures_load() {
        assert!(!validate_module(&broken_e1()).passed());
        let phi = p1p4_potential();
        assert_eq!(phi.order(), 4);
        assert_eq!(phi.phi_ab().len(), 4);
        assert_ne!(phi, p1p4_perturbed());
    }

    #[test]
    fn rescaling_multiplies_by_monomials() {
        let s = QSeries::from_terms(2, 3, vec![(vec![1, 2], Scalar::one())]);
        let r = rescale(&s, &[Scalar::from_int(2), Scalar::from_int(3)]);
        assert_eq!(r.coeff(&[1, 2]), Some(&Scalar::from_int(18)));
    }

    #[test]
    fn family_is_seeded() {
        assert_eq!(k5_family(3, 2), k5_family(3, 2));
        assert_eq!(e1_random_series(1, 8), e1_random_series(1, 8));
        assert!(e1_random_series(1, 8).vanishes_at_zero());
    }
}
