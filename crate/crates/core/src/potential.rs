//! Quantum potentials: the classical cubic plus q-series corrections, the
//! deformed product they define, and the graded WDVV check.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frobenius::{classical_potential, CubicPotential, FrobeniusModule};
use crate::matrix::{mat_entry, mat_from_entries, MatSeries};
use crate::report::{Certificate, ValidationReport};
use crate::scalar::Scalar;
use crate::series::{mono_string, LogPoly, Mono, QSeries};

/// φ = φ₀ + φ_ħ on a framed module.
///
/// φ_ħ = Σ z_a φ^a + Σ z_a z_b φ^{ab}, the second sum running over ordered
/// pairs, so ∂²φ_ħ/∂z_a∂z_b = 2φ^{ab}. In weight 3 the correction is a
/// single series in the divisor variables.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumPotential {
    module: FrobeniusModule,
    order: u32,
    phi0: CubicPotential,
    phi_a: BTreeMap<usize, QSeries>,
    phi_ab: BTreeMap<(usize, usize), QSeries>,
    weight3: Option<QSeries>,
}

impl QuantumPotential {
    /// Shapes are checked here; index ranges and symmetry by [`validate_potential`].
    pub fn new(
        module: FrobeniusModule,
        order: u32,
        phi_a: BTreeMap<usize, QSeries>,
        phi_ab: BTreeMap<(usize, usize), QSeries>,
        weight3: Option<QSeries>,
    ) -> Result<Self> {
        let phi0 = classical_potential(&module)?;
        let n = module.rank();
        let r = module.r();
        let shape = |label: String, s: &QSeries| {
            if s.nvars() != r || s.order() != order {
                Err(Error::ShapeMismatch(format!(
                    "{} has {} variables at order {}, expected {} at order {}",
                    label,
                    s.nvars(),
                    s.order(),
                    r,
                    order
                )))
            } else {
                Ok(())
            }
        };
        let index = |i: usize| {
            if i < n {
                Ok(())
            } else {
                Err(Error::ShapeMismatch(format!("basis index {} outside 0..{}", i, n)))
            }
        };
        for (a, s) in &phi_a {
            index(*a)?;
            shape(format!("phi^{}", a), s)?;
        }
        for ((a, b), s) in &phi_ab {
            index(*a)?;
            index(*b)?;
            shape(format!("phi^{},{}", a, b), s)?;
        }
        if let Some(s) = &weight3 {
            shape("weight-3 series".into(), s)?;
        }
        Ok(QuantumPotential {
            module,
            order,
            phi0,
            phi_a,
            phi_ab,
            weight3,
        })
    }

    /// φ_ħ = 0.
    pub fn classical(module: FrobeniusModule, order: u32) -> Result<Self> {
        Self::new(module, order, BTreeMap::new(), BTreeMap::new(), None)
    }

    /// Weight-3 potential with the given correction series.
    pub fn weight3(module: FrobeniusModule, series: QSeries) -> Result<Self> {
        let order = series.order();
        Self::new(module, order, BTreeMap::new(), BTreeMap::new(), Some(series))
    }

    /// The same corrections truncated, or zero-extended, to `order`.
    pub fn with_order(&self, order: u32) -> Self {
        let cut = |s: &QSeries| s.with_order(order);
        QuantumPotential {
            module: self.module.clone(),
            order,
            phi0: self.phi0.clone(),
            phi_a: self.phi_a.iter().map(|(a, s)| (*a, cut(s))).collect(),
            phi_ab: self.phi_ab.iter().map(|(ab, s)| (*ab, cut(s))).collect(),
            weight3: self.weight3.as_ref().map(cut),
        }
    }

    pub fn module(&self) -> &FrobeniusModule {
        &self.module
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn phi0(&self) -> &CubicPotential {
        &self.phi0
    }

    pub fn phi_a(&self) -> &BTreeMap<usize, QSeries> {
        &self.phi_a
    }

    pub fn phi_ab(&self) -> &BTreeMap<(usize, usize), QSeries> {
        &self.phi_ab
    }

    pub fn weight3_series(&self) -> Option<&QSeries> {
        self.weight3.as_ref()
    }

    /// Set φ^{ab} and φ^{ba} together.
    pub fn set_pair(&mut self, a: usize, b: usize, s: QSeries) {
        self.phi_ab.insert((a, b), s.clone());
        self.phi_ab.insert((b, a), s);
    }

    pub fn set_linear(&mut self, a: usize, s: QSeries) {
        self.phi_a.insert(a, s);
    }

    pub fn is_classical(&self) -> bool {
        self.phi_a.values().all(QSeries::is_zero)
            && self.phi_ab.values().all(QSeries::is_zero)
            && self.weight3.as_ref().map_or(true, QSeries::is_zero)
    }

    fn zero_series(&self) -> QSeries {
        QSeries::zero(self.module.r(), self.order)
    }

    fn empty_poly(&self) -> LogPoly<Scalar> {
        LogPoly::zero(self.module.rank(), 1, self.module.r(), self.order)
    }

    /// φ_ħ as a polynomial in z₀..z_{n−1} with series coefficients; z_j is
    /// log q_j for the framing indices.
    pub fn hbar_poly(&self) -> LogPoly<Scalar> {
        let n = self.module.rank();
        let mut p = self.empty_poly();
        for (a, s) in &self.phi_a {
            let mut zm = vec![0; n];
            zm[*a] += 1;
            p.add_term(zm, s.clone());
        }
        for ((a, b), s) in &self.phi_ab {
            let mut zm = vec![0; n];
            zm[*a] += 1;
            zm[*b] += 1;
            p.add_term(zm, s.clone());
        }
        if let Some(s) = &self.weight3 {
            p.add_term(vec![0; n], s.clone());
        }
        p
    }

    /// φ₀ + φ_ħ.
    pub fn full_poly(&self) -> LogPoly<Scalar> {
        let n = self.module.rank();
        let mut p = self.hbar_poly();
        for (key, c) in self.phi0.monomials() {
            let mut zm = vec![0; n];
            for &i in key {
                zm[i] += 1;
            }
            p.add_term(zm, QSeries::constant(self.module.r(), self.order, c.clone()));
        }
        p
    }

    /// ∂²φ_ħ/∂z_a∂z_b, which has no z-dependence for a valid potential.
    pub fn second_partial(&self, a: usize, b: usize) -> Result<QSeries> {
        let p = self.hbar_poly().derive_z(a)?.derive_z(b)?;
        p.as_series()
            .ok_or_else(|| Error::Internal(format!("second partial in z{}, z{} keeps z-dependence", a, b)))
    }
}

/// Third partials of the full potential, memoized by sorted index triple.
pub(crate) struct ThirdPartials {
    first: Vec<LogPoly<Scalar>>,
    cache: BTreeMap<[usize; 3], QSeries>,
}

impl ThirdPartials {
    pub(crate) fn new(phi: &QuantumPotential) -> Result<Self> {
        let full = phi.full_poly();
        let first = (0..phi.module.rank())
            .map(|i| full.derive_z(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(ThirdPartials {
            first,
            cache: BTreeMap::new(),
        })
    }

    pub(crate) fn get(&mut self, i: usize, j: usize, l: usize) -> Result<QSeries> {
        let mut key = [i, j, l];
        key.sort_unstable();
        if let Some(s) = self.cache.get(&key) {
            return Ok(s.clone());
        }
        let p = self.first[key[0]].derive_z(key[1])?.derive_z(key[2])?;
        let s = p.as_series().ok_or_else(|| {
            Error::Internal(format!(
                "third partial in z{}, z{}, z{} keeps z-dependence",
                key[0], key[1], key[2]
            ))
        })?;
        self.cache.insert(key, s.clone());
        Ok(s)
    }
}

/// Index-range, symmetry, vanishing and weight-3 usage checks.
pub fn validate_potential(phi: &QuantumPotential) -> ValidationReport {
    let m = &phi.module;
    let k = m.k();
    let mut cert = Certificate::new();

    let mut range = None;
    for a in phi.phi_a.keys() {
        if k == 3 || m.degree(*a) != 2 * k - 4 {
            range = Some(format!("phi^{} on index of degree {}", a, m.degree(*a)));
            break;
        }
    }
    if range.is_none() {
        for (a, b) in phi.phi_ab.keys() {
            let (da, db) = (m.degree(*a), m.degree(*b));
            if k == 3 || da <= 2 || da >= 2 * k - 4 || da + db != 2 * k - 2 {
                range = Some(format!("phi^{},{} on degrees ({}, {})", a, b, da, db));
                break;
            }
        }
    }
    cert.record("index-range", range);

    let zero = phi.zero_series();
    let mut asym = None;
    for ((a, b), s) in &phi.phi_ab {
        let other = phi.phi_ab.get(&(*b, *a)).unwrap_or(&zero);
        if s != other {
            asym = Some(format!("phi^{},{} = {} but phi^{},{} = {}", a, b, s, b, a, other));
            break;
        }
    }
    cert.record("symmetry", asym);

    let mut constant = None;
    let named = phi
        .phi_a
        .iter()
        .map(|(a, s)| (format!("phi^{}", a), s))
        .chain(phi.phi_ab.iter().map(|((a, b), s)| (format!("phi^{},{}", a, b), s)))
        .chain(phi.weight3.iter().map(|s| ("weight-3 series".to_string(), s)));
    for (name, s) in named {
        if !s.vanishes_at_zero() {
            constant = Some(format!("{} has constant term {}", name, s.constant_term().unwrap()));
            break;
        }
    }
    cert.record("vanishing", constant);

    let usage = match (k == 3, &phi.weight3) {
        (false, Some(_)) => Some(format!("weight-3 series given in weight {}", k)),
        _ => None,
    };
    cert.record("weight3-usage", usage);
    cert
}

fn ensure_valid(phi: &QuantumPotential) -> Result<()> {
    let rep = validate_potential(phi);
    match rep.first_failure() {
        None => Ok(()),
        Some(item) => Err(Error::ShapeMismatch(format!(
            "{}: {}",
            item.name,
            item.witness.clone().unwrap_or_default()
        ))),
    }
}

/// T_j ·_q T_a as coefficients on T₀..T_{n−1}.
pub fn quantum_product(phi: &QuantumPotential, j: usize, a: usize) -> Result<Vec<QSeries>> {
    let m = &phi.module;
    if j == 0 || j > m.r() {
        return Err(Error::NotDivisorIndex(j));
    }
    if a >= m.rank() {
        return Err(Error::IndexOutOfRange {
            index: a,
            limit: m.rank(),
        });
    }
    ensure_valid(phi)?;
    let mut third = ThirdPartials::new(phi)?;
    product_column(phi, &mut third, j, a)
}

fn product_column(phi: &QuantumPotential, third: &mut ThirdPartials, j: usize, a: usize) -> Result<Vec<QSeries>> {
    let m = &phi.module;
    (0..m.rank())
        .map(|c| {
            if m.degree(c) == m.degree(a) + 2 {
                third.get(j, a, m.delta(c))
            } else {
                Ok(phi.zero_series())
            }
        })
        .collect()
}

/// Matrix series of T_j ·_q, column a holding T_j ·_q T_a.
pub fn quantum_matrix(phi: &QuantumPotential, j: usize) -> Result<MatSeries> {
    let m = &phi.module;
    if j == 0 || j > m.r() {
        return Err(Error::NotDivisorIndex(j));
    }
    ensure_valid(phi)?;
    let mut third = ThirdPartials::new(phi)?;
    quantum_matrix_with(phi, &mut third, j)
}

pub(crate) fn quantum_matrix_with(phi: &QuantumPotential, third: &mut ThirdPartials, j: usize) -> Result<MatSeries> {
    let n = phi.module.rank();
    let columns = (0..n)
        .map(|a| product_column(phi, third, j, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(mat_from_entries(n, phi.module.r(), phi.order, |c, a| columns[a][c].clone()))
}

/// A failing component of a commutation identity: the T_d-coefficient of
/// T_j·(T_l·T_a) − T_l·(T_j·T_a) at the first q-monomial where it is nonzero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadrupleWitness {
    pub j: usize,
    pub l: usize,
    pub a: usize,
    pub d: usize,
    pub monomial: Mono,
    pub value: Scalar,
}

impl fmt::Display for QuadrupleWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mono = mono_string("q", &self.monomial, 1);
        write!(
            f,
            "(j={}, l={}, a={}, d={}) at {}: {}",
            self.j,
            self.l,
            self.a,
            self.d,
            if mono.is_empty() { "1".to_string() } else { mono },
            self.value
        )
    }
}

/// Outcome of a commutation check, valid up to the stated order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommutationVerdict {
    pub order: u32,
    pub violations: Vec<QuadrupleWitness>,
}

impl CommutationVerdict {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&QuadrupleWitness> {
        self.violations.first()
    }

    pub fn to_certificate(&self, name: &str) -> Certificate {
        let mut c = Certificate::new();
        c.record(name, self.first().map(|w| w.to_string()));
        c
    }
}

fn first_monomial(s: &QSeries) -> Option<(Mono, Scalar)> {
    s.graded_terms().first().map(|(m, c)| ((*m).clone(), (*c).clone()))
}

/// Scan a matrix series, expected to vanish, in the (a, d) order.
pub(crate) fn scan_commutator(j: usize, l: usize, c: &MatSeries, n: usize, out: &mut Vec<QuadrupleWitness>) {
    if c.is_zero() {
        return;
    }
    for a in 0..n {
        for d in 0..n {
            if let Some((monomial, value)) = first_monomial(&mat_entry(c, d, a)) {
                out.push(QuadrupleWitness {
                    j,
                    l,
                    a,
                    d,
                    monomial,
                    value,
                });
            }
        }
    }
}

/// The graded WDVV equations, evaluated term by term from third partials.
pub fn wdvv_check(phi: &QuantumPotential) -> Result<CommutationVerdict> {
    ensure_valid(phi)?;
    let m = &phi.module;
    let n = m.rank();
    let r = m.r();
    let mut third = ThirdPartials::new(phi)?;
    let mut violations = Vec::new();
    for j in 1..=r {
        for l in j + 1..=r {
            for a in 0..n {
                let mids: Vec<usize> = (0..n).filter(|&c| m.degree(c) == m.degree(a) + 2).collect();
                for d in 0..n {
                    if m.degree(d) != m.degree(a) + 4 {
                        continue;
                    }
                    let mut lhs = phi.zero_series();
                    let mut rhs = phi.zero_series();
                    for &c in &mids {
                        let dc = m.delta(c);
                        let dd = m.delta(d);
                        lhs = lhs.add(&third.get(l, a, dc)?.mul(&third.get(j, c, dd)?));
                        rhs = rhs.add(&third.get(j, a, dc)?.mul(&third.get(l, c, dd)?));
                    }
                    if let Some((monomial, value)) = first_monomial(&lhs.sub(&rhs)) {
                        violations.push(QuadrupleWitness {
                            j,
                            l,
                            a,
                            d,
                            monomial,
                            value,
                        });
                    }
                }
            }
        }
    }
    Ok(CommutationVerdict {
        order: phi.order,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::frobenius::validate_module;
    use crate::matrix::mat_constant;

    fn e1q() -> QuantumPotential {
        QuantumPotential::weight3(catalog::e1(5), QSeries::q(1, 8, 1)).unwrap()
    }

    #[test]
    fn e1_potential_validates() {
        assert!(validate_potential(&e1q()).passed());
        let bad = QuantumPotential::weight3(
            catalog::e1(5),
            QSeries::q(1, 8, 1).add(&QSeries::constant(1, 8, Scalar::one())),
        )
        .unwrap();
        let rep = validate_potential(&bad);
        assert!(!rep.get("vanishing").unwrap().passed);
    }

    #[test]
    fn asymmetric_pairs_are_rejected() {
        let m = catalog::standard_projective(&[1, 4]);
        let mut phi = QuantumPotential::classical(m, 3).unwrap();
        phi.phi_ab.insert((3, 4), QSeries::q(2, 3, 1));
        phi.phi_ab.insert((4, 3), QSeries::q(2, 3, 2));
        let rep = validate_potential(&phi);
        assert!(!rep.get("symmetry").unwrap().passed);
        assert!(rep.get("index-range").unwrap().passed);
    }

    #[test]
    fn out_of_range_index() {
        let m = catalog::standard_projective(&[1, 4]);
        let mut phi = QuantumPotential::classical(m, 3).unwrap();
        phi.set_linear(4, QSeries::q(2, 3, 1));
        assert!(!validate_potential(&phi).get("index-range").unwrap().passed);
        let wrong = QuantumPotential::new(
            catalog::e1(5),
            3,
            BTreeMap::new(),
            BTreeMap::new(),
            Some(QSeries::q(2, 3, 1)),
        );
        assert!(matches!(wrong, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn e1_quantum_products() {
        let phi = e1q();
        let t11 = quantum_product(&phi, 1, 1).unwrap();
        let expected = QSeries::constant(1, 8, Scalar::from_int(5))
            .add(&QSeries::q(1, 8, 1).scale(&Scalar::tau_pow(3)));
        assert_eq!(t11[2], expected);
        assert!(t11.iter().enumerate().all(|(c, s)| c == 2 || s.is_zero()));
        let t12 = quantum_product(&phi, 1, 2).unwrap();
        assert_eq!(t12[3], QSeries::constant(1, 8, Scalar::one()));
        let t10 = quantum_product(&phi, 1, 0).unwrap();
        assert_eq!(t10[1], QSeries::constant(1, 8, Scalar::one()));
        assert!(matches!(quantum_product(&phi, 2, 0), Err(Error::NotDivisorIndex(2))));
    }

    #[test]
    fn classical_limit_and_pairing_symmetry() {
        for seed in 0..3 {
            for k in 3..=5 {
                let m = catalog::random_polarizable(k, seed);
                assert!(validate_module(&m).passed());
                let phi = QuantumPotential::classical(m.clone(), 2).unwrap();
                for j in 1..=m.r() {
                    let q = quantum_matrix(&phi, j).unwrap();
                    assert_eq!(q, mat_constant(m.r(), 2, m.product(j).unwrap().clone()));
                }
            }
        }
        let phi = e1q();
        let a = quantum_matrix(&phi, 1).unwrap();
        let b = phi.module().pairing().clone();
        // B(A v, w) = B(v, A w) termwise: Bᵀ A = Aᵀ B with B symmetric
        for (_, c) in a.terms() {
            assert_eq!(b.mul(c), c.transpose().mul(&b));
        }
    }

    #[test]
    fn rank_one_wdvv_passes() {
        assert!(wdvv_check(&e1q()).unwrap().holds());
    }

    #[test]
    fn witness_display() {
        let w = QuadrupleWitness {
            j: 1,
            l: 2,
            a: 1,
            d: 5,
            monomial: vec![1, 1],
            value: -Scalar::tau_pow(2),
        };
        assert_eq!(w.to_string(), "(j=1, l=2, a=1, d=5) at q1*q2: -tau^2");
    }
}
