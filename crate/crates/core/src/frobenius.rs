//! Graded V₂-Frobenius modules, their classical cubic potential, and the
//! signed pairing Q.
//!
//! Basis vectors T₀..T_m are sorted by degree, with T₀ = e and T₁..T_r the
//! degree-2 framing. Degrees are stored doubled-up as in the grading of
//! V = V₀ ⊕ V₂ ⊕ … ⊕ V_{2k}, so `degree(a)` is always even.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::report::{Certificate, ValidationReport};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct FrobeniusModule {
    k: u32,
    dims: Vec<usize>,
    degrees: Vec<u32>,
    pairing: Matrix,
    /// `products[j - 1]` is left multiplication by T_j; column a holds T_j * T_a.
    products: Vec<Matrix>,
    real: bool,
    /// `relabel[new] = old` when the framing order differed from the input order.
    relabel: Vec<usize>,
}

/// A product entry `T_j * T_a = Σ value·T_c`, in input labels.
pub type ProductEntry = ((usize, usize), Vec<(usize, Scalar)>);

pub fn basis_name(a: usize) -> String {
    format!("T{}", a)
}

impl FrobeniusModule {
    /// Assemble a module from explicit matrices. Only shapes are checked here;
    /// the axioms are the business of [`validate_module`].
    pub fn new(k: u32, dims: Vec<usize>, pairing: Matrix, products: Vec<Matrix>, real: bool) -> Result<Self> {
        if k < 3 {
            return Err(Error::UnsupportedWeight(k));
        }
        if dims.len() != k as usize + 1 {
            return Err(Error::ShapeMismatch(format!(
                "weight {} needs {} graded dimensions, got {}",
                k,
                k + 1,
                dims.len()
            )));
        }
        if dims[0] != 1 {
            return Err(Error::ShapeMismatch(format!("dim V0 must be 1, got {}", dims[0])));
        }
        let n: usize = dims.iter().sum();
        if pairing.rows() != n || pairing.cols() != n {
            return Err(Error::ShapeMismatch(format!(
                "pairing is {}x{}, rank is {}",
                pairing.rows(),
                pairing.cols(),
                n
            )));
        }
        if products.len() != dims[1] {
            return Err(Error::ShapeMismatch(format!(
                "{} product matrices for dim V2 = {}",
                products.len(),
                dims[1]
            )));
        }
        for (j, p) in products.iter().enumerate() {
            if p.rows() != n || p.cols() != n {
                return Err(Error::ShapeMismatch(format!("product matrix {} has wrong shape", j + 1)));
            }
        }
        let degrees = dims
            .iter()
            .enumerate()
            .flat_map(|(p, &d)| std::iter::repeat(2 * p as u32).take(d))
            .collect();
        Ok(FrobeniusModule {
            k,
            dims,
            degrees,
            pairing,
            products,
            real,
            relabel: (0..n).collect(),
        })
    }

    /// Assemble a module from sparse entries in the input labelling.
    ///
    /// Pairing entries are mirrored when only one of (a,b), (b,a) is given.
    /// A missing product T_j * e defaults to T_j. The framing must list every
    /// degree-2 index once; a non-identity order relabels the basis.
    pub fn from_entries(
        k: u32,
        dims: Vec<usize>,
        pairing: &[((usize, usize), Scalar)],
        products: &[ProductEntry],
        framing: &[usize],
        real: bool,
    ) -> Result<Self> {
        if k < 3 {
            return Err(Error::UnsupportedWeight(k));
        }
        let n: usize = dims.iter().sum();
        let r = dims.get(1).copied().unwrap_or(0);
        let check = |i: usize| {
            if i < n {
                Ok(())
            } else {
                Err(Error::IndexOutOfRange { index: i, limit: n })
            }
        };
        let mut b = Matrix::zeros(n, n);
        let mut given = std::collections::BTreeSet::new();
        for ((i, j), v) in pairing {
            check(*i)?;
            check(*j)?;
            b.set(*i, *j, v.clone());
            given.insert((*i, *j));
        }
        for ((i, j), v) in pairing {
            if !given.contains(&(*j, *i)) {
                b.set(*j, *i, v.clone());
            }
        }
        let mut ls = vec![Matrix::zeros(n, n); r];
        let mut unit_given = vec![false; r];
        for ((j, a), image) in products {
            check(*j)?;
            check(*a)?;
            if *j == 0 || *j > r {
                return Err(Error::NotDivisorIndex(*j));
            }
            if *a == 0 {
                unit_given[j - 1] = true;
            }
            for (c, v) in image {
                check(*c)?;
                ls[j - 1].set(*c, *a, v.clone());
            }
        }
        for j in 1..=r {
            if !unit_given[j - 1] {
                ls[j - 1].set(j, 0, Scalar::one());
            }
        }
        let mut sorted = framing.to_vec();
        sorted.sort_unstable();
        if sorted != (1..=r).collect::<Vec<_>>() {
            return Err(Error::ShapeMismatch(format!(
                "framing {:?} must list each degree-2 index 1..={} once",
                framing, r
            )));
        }
        let module = FrobeniusModule::new(k, dims, b, ls, real)?;
        if framing.iter().enumerate().all(|(i, &f)| f == i + 1) {
            return Ok(module);
        }
        let mut perm: Vec<usize> = vec![0];
        perm.extend_from_slice(framing);
        perm.extend(r + 1..n);
        Ok(module.permuted(&perm))
    }

    /// Relabel the basis so that new index i is old index `perm[i]`.
    fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.rank();
        let conj = |m: &Matrix| Matrix::from_fn(n, n, |i, j| m.get(perm[i], perm[j]).clone());
        let r = self.r();
        let products = (1..=r).map(|j| conj(&self.products[perm[j] - 1])).collect();
        FrobeniusModule {
            k: self.k,
            dims: self.dims.clone(),
            degrees: self.degrees.clone(),
            pairing: conj(&self.pairing),
            products,
            real: self.real,
            relabel: perm.iter().map(|&p| self.relabel[p]).collect(),
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total rank m + 1.
    pub fn rank(&self) -> usize {
        self.degrees.len()
    }

    /// Number of framing directions, dim V₂.
    pub fn r(&self) -> usize {
        self.dims[1]
    }

    pub fn degree(&self, a: usize) -> u32 {
        self.degrees[a]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn indices_of_degree(&self, d: u32) -> Vec<usize> {
        (0..self.rank()).filter(|&a| self.degrees[a] == d).collect()
    }

    pub fn pairing(&self) -> &Matrix {
        &self.pairing
    }

    /// Left multiplication by the framing vector T_j, 1 ≤ j ≤ r.
    pub fn product(&self, j: usize) -> Result<&Matrix> {
        if j == 0 || j > self.r() {
            return Err(Error::NotDivisorIndex(j));
        }
        Ok(&self.products[j - 1])
    }

    pub fn products(&self) -> &[Matrix] {
        &self.products
    }

    /// Left multiplication by Σ λ_j T_j.
    pub fn product_by(&self, lambda: &[Scalar]) -> Matrix {
        let n = self.rank();
        lambda
            .iter()
            .zip(&self.products)
            .fold(Matrix::zeros(n, n), |acc, (l, p)| acc.add(&p.scale(l)))
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn framing(&self) -> Vec<usize> {
        (1..=self.r()).collect()
    }

    pub fn relabel(&self) -> &[usize] {
        &self.relabel
    }

    /// δ(a): the index whose pairing row is the unit vector at a.
    ///
    /// Only meaningful on a module whose pairing passes validation; otherwise
    /// the first partner of complementary degree is used.
    pub fn delta(&self, a: usize) -> usize {
        let n = self.rank();
        let target = 2 * self.k - self.degrees[a];
        (0..n)
            .find(|&b| self.degrees[b] == target && !self.pairing.get(b, a).is_zero())
            .unwrap_or(a)
    }

    pub fn deltas(&self) -> Vec<usize> {
        (0..self.rank()).map(|a| self.delta(a)).collect()
    }

    /// Error out unless every axiom holds.
    pub fn ensure_valid(&self) -> Result<()> {
        let rep = validate_module(self);
        match rep.first_failure() {
            None => Ok(()),
            Some(item) => Err(Error::InvalidModule(format!(
                "{}: {}",
                item.name,
                item.witness.clone().unwrap_or_default()
            ))),
        }
    }

    /// The same module with every product scaled, as used for sign-flip tests.
    pub fn with_products(&self, products: Vec<Matrix>) -> Result<Self> {
        let mut m = FrobeniusModule::new(self.k, self.dims.clone(), self.pairing.clone(), products, self.real)?;
        m.relabel = self.relabel.clone();
        Ok(m)
    }

    pub fn with_pairing(&self, pairing: Matrix) -> Result<Self> {
        let mut m = FrobeniusModule::new(self.k, self.dims.clone(), pairing, self.products.clone(), self.real)?;
        m.relabel = self.relabel.clone();
        Ok(m)
    }
}

/// Check every axiom of a graded V₂-Frobenius module with adapted basis.
pub fn validate_module(m: &FrobeniusModule) -> ValidationReport {
    let n = m.rank();
    let k = m.k;
    let b = &m.pairing;
    let t = basis_name;
    let mut rep = Certificate::new();

    rep.record(
        "unit",
        (m.dims[0] != 1).then(|| format!("dim V0 = {}", m.dims[0])),
    );

    let grading = (0..n)
        .flat_map(|a| (0..n).map(move |c| (a, c)))
        .find(|&(a, c)| !b.get(a, c).is_zero() && m.degrees[a] + m.degrees[c] != 2 * k)
        .map(|(a, c)| format!("B({},{}) = {} across degrees {} and {}", t(a), t(c), b.get(a, c), m.degrees[a], m.degrees[c]));
    rep.record("pairing-grading", grading);

    let symmetric = (0..n)
        .flat_map(|a| (0..a).map(move |c| (a, c)))
        .find(|&(a, c)| b.get(a, c) != b.get(c, a))
        .map(|(a, c)| format!("B({},{}) = {} but B({},{}) = {}", t(a), t(c), b.get(a, c), t(c), t(a), b.get(c, a)));
    rep.record("pairing-symmetric", symmetric);

    let mut self_dual = None;
    for a in 0..n {
        let d = m.delta(a);
        let row_ok = (0..n).all(|c| {
            let want = if c == a { Scalar::one() } else { Scalar::zero() };
            *b.get(d, c) == want
        });
        if !row_ok || m.degrees[d] + m.degrees[a] != 2 * k || m.delta(d) != a {
            self_dual = Some(format!(
                "B({},{}) = {}; row {} is not the unit vector at {}",
                t(d),
                t(a),
                b.get(d, a),
                t(d),
                t(a)
            ));
            break;
        }
    }
    rep.record("self-dual", self_dual);

    let mut degree = None;
    'deg: for (j, l) in m.products.iter().enumerate() {
        for a in 0..n {
            for c in 0..n {
                if !l.get(c, a).is_zero() && m.degrees[c] != m.degrees[a] + 2 {
                    degree = Some(format!(
                        "{} * {} has a {} component",
                        t(j + 1),
                        t(a),
                        t(c)
                    ));
                    break 'deg;
                }
            }
        }
    }
    rep.record("product-degree", degree);

    let mut unit = None;
    for (j, l) in m.products.iter().enumerate() {
        let img = l.column(0);
        let ok = img.iter().enumerate().all(|(c, v)| {
            if c == j + 1 {
                v.is_one()
            } else {
                v.is_zero()
            }
        });
        if !ok {
            unit = Some(format!("{} * {} != {}", t(j + 1), t(0), t(j + 1)));
            break;
        }
    }
    rep.record("unit-action", unit);

    let mut frob = None;
    'frob: for (j, l) in m.products.iter().enumerate() {
        let bl = b.mul(l);
        let lt_b = l.transpose().mul(b);
        for a in 0..n {
            for c in 0..a {
                // B(T_j*T_a, T_c) vs B(T_a, T_j*T_c)
                let lhs = lt_b.get(a, c);
                let rhs = bl.get(a, c);
                if lhs != rhs {
                    frob = Some(format!(
                        "({},{},{}): B({}*{},{}) = {} but B({},{}*{}) = {}",
                        t(j + 1),
                        t(a),
                        t(c),
                        t(j + 1),
                        t(a),
                        t(c),
                        lhs,
                        t(a),
                        t(j + 1),
                        t(c),
                        rhs
                    ));
                    break 'frob;
                }
            }
        }
    }
    rep.record("frobenius", frob);

    let mut comm = None;
    'comm: for j in 0..m.products.len() {
        for l in (j + 1)..m.products.len() {
            if !m.products[j].commutator(&m.products[l]).is_zero() {
                comm = Some(format!("L_{} and L_{} do not commute", t(j + 1), t(l + 1)));
                break 'comm;
            }
        }
    }
    rep.record("commutative", comm);

    if m.real {
        let tau = if !b.is_tau_free() {
            Some("pairing involves tau".to_string())
        } else {
            m.products
                .iter()
                .position(|p| !p.is_tau_free())
                .map(|j| format!("product by {} involves tau", t(j + 1)))
        };
        rep.record("real", tau);
    }
    rep
}

/// The constant C(ã) weighting the classical potential.
pub fn cubic_weight(k: u32, degree: u32) -> Scalar {
    if k == 3 && degree == 2 {
        Scalar::from_ratio(1, 6)
    } else if k != 3 && (degree == 2 || degree == 2 * k - 4) {
        Scalar::from_ratio(1, 4)
    } else {
        Scalar::from_ratio(1, 2)
    }
}

/// Homogeneous cubic polynomial in z₀..z_m, keyed by sorted index triples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CubicPotential {
    coeffs: BTreeMap<[usize; 3], Scalar>,
}

fn sort3(i: usize, j: usize, l: usize) -> [usize; 3] {
    let mut t = [i, j, l];
    t.sort_unstable();
    t
}

impl CubicPotential {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add c·z_i z_j z_l.
    pub fn add_monomial(&mut self, i: usize, j: usize, l: usize, c: Scalar) {
        let key = sort3(i, j, l);
        let v = self.coeffs.get(&key).cloned().unwrap_or_default() + c;
        if v.is_zero() {
            self.coeffs.remove(&key);
        } else {
            self.coeffs.insert(key, v);
        }
    }

    pub fn monomials(&self) -> impl Iterator<Item = (&[usize; 3], &Scalar)> {
        self.coeffs.iter()
    }

    pub fn coefficient(&self, i: usize, j: usize, l: usize) -> Scalar {
        self.coeffs.get(&sort3(i, j, l)).cloned().unwrap_or_default()
    }

    /// ∂³/∂z_i∂z_j∂z_l, a constant.
    pub fn third_partial(&self, i: usize, j: usize, l: usize) -> Scalar {
        let key = sort3(i, j, l);
        let mult = if key[0] == key[2] {
            6
        } else if key[0] == key[1] || key[1] == key[2] {
            2
        } else {
            1
        };
        &self.coefficient(i, j, l) * &Scalar::from_int(mult)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl std::fmt::Display for CubicPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let terms = self
            .coeffs
            .iter()
            .map(|(key, c)| {
                let mut exps: BTreeMap<usize, u32> = BTreeMap::new();
                for &i in key {
                    *exps.entry(i).or_default() += 1;
                }
                let mono = exps
                    .iter()
                    .map(|(i, e)| if *e == 1 { format!("z{}", i) } else { format!("z{}^{}", i, e) })
                    .collect::<Vec<_>>()
                    .join("*");
                crate::series::term_string(c, &mono)
            })
            .collect();
        write!(f, "{}", crate::series::join_terms(terms))
    }
}

/// φ₀(z) = Σ z_j z_a z_b C(ã) B(T_j * T_a, T_b) over framing j and all a, b.
pub fn classical_potential(m: &FrobeniusModule) -> Result<CubicPotential> {
    m.ensure_valid()?;
    let n = m.rank();
    let mut phi = CubicPotential::new();
    for (jj, l) in m.products.iter().enumerate() {
        let j = jj + 1;
        let bl = m.pairing.transpose().mul(l);
        for a in 0..n {
            let c = cubic_weight(m.k, m.degrees[a]);
            for b in 0..n {
                // B(T_j*T_a, T_b) = Σ_c L[c][a] B[c][b]
                let v = bl.get(b, a);
                if !v.is_zero() {
                    phi.add_monomial(j, a, b, &c * v);
                }
            }
        }
    }
    Ok(phi)
}

/// Recover T_j * T_a = Σ ∂³φ₀/∂z_j∂z_a∂z_{δ(c)} T_c.
pub fn structure_constants_from_cubic(m: &FrobeniusModule, phi: &CubicPotential) -> Result<Vec<Matrix>> {
    let n = m.rank();
    let k = m.k;
    for (key, c) in phi.monomials() {
        let deg: u32 = key.iter().map(|&i| m.degrees[i]).sum();
        if key.iter().any(|&i| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: *key.iter().max().unwrap(),
                limit: n,
            });
        }
        if deg != 2 * k || !key.iter().any(|&i| m.degrees[i] == 2) {
            return Err(Error::GradingViolation(format!(
                "coefficient {} on z{}*z{}*z{} (total degree {})",
                c, key[0], key[1], key[2], deg
            )));
        }
    }
    let mut out = Vec::with_capacity(m.r());
    for j in 1..=m.r() {
        let mut l = Matrix::zeros(n, n);
        for a in 0..n {
            for c in 0..n {
                if m.degrees[c] == m.degrees[a] + 2 {
                    l.set(c, a, phi.third_partial(j, a, m.delta(c)));
                }
            }
        }
        out.push(l);
    }
    Ok(out)
}

/// Sign (−1)^{k + ã/2} relating Q to B on row degree ã.
pub fn q_sign(k: u32, degree: u32) -> Scalar {
    if (k + degree / 2) % 2 == 0 {
        Scalar::one()
    } else {
        Scalar::from_int(-1)
    }
}

/// Q(T_a, T_b) = (−1)^{k+ã/2} B(T_a, T_b).
pub fn q_form(m: &FrobeniusModule) -> Matrix {
    let n = m.rank();
    Matrix::from_fn(n, n, |a, b| &q_sign(m.k, m.degrees[a]) * m.pairing.get(a, b))
}

/// Q(X x, y) + Q(x, X y) as a matrix; zero exactly when X preserves Q infinitesimally.
pub fn q_defect(q: &Matrix, x: &Matrix) -> Matrix {
    x.transpose().mul(q).add(&q.mul(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn e1_validates_and_potential() {
        let m = catalog::e1(5);
        assert!(validate_module(&m).passed(), "{}", validate_module(&m));
        let phi = classical_potential(&m).unwrap();
        assert_eq!(phi.to_string(), "z0*z1*z2 + 5/6*z1^3");
        assert_eq!(phi.third_partial(1, 1, 1), Scalar::from_int(5));
        assert_eq!(phi.third_partial(0, 1, 2), Scalar::one());
        let back = structure_constants_from_cubic(&m, &phi).unwrap();
        assert_eq!(back, m.products().to_vec());
    }

    #[test]
    fn broken_frobenius_condition_witness() {
        let m = catalog::e1(5);
        let mut l = m.product(1).unwrap().clone();
        l.set(3, 2, Scalar::from_int(2));
        let bad = m.with_products(vec![l]).unwrap();
        let rep = validate_module(&bad);
        let item = rep.get("frobenius").unwrap();
        assert!(!item.passed);
        assert!(item.witness.as_ref().unwrap().starts_with("(T1,T2,T0)"));
    }

    #[test]
    fn broken_self_duality() {
        let m = catalog::e1(5);
        let mut b = m.pairing().clone();
        b.set(1, 2, Scalar::from_int(2));
        b.set(2, 1, Scalar::from_int(2));
        let bad = m.with_pairing(b).unwrap();
        assert!(!validate_module(&bad).get("self-dual").unwrap().passed);
    }

    #[test]
    fn q_form_signs_on_e1() {
        let m = catalog::e1(5);
        let q = q_form(&m);
        assert_eq!(*q.get(0, 3), Scalar::from_int(-1));
        assert_eq!(*q.get(1, 2), Scalar::from_int(1));
        assert_eq!(*q.get(2, 1), Scalar::from_int(-1));
        assert_eq!(*q.get(3, 0), Scalar::from_int(1));
        assert_eq!(q.transpose(), q.neg());
        assert!(q_defect(&q, m.product(1).unwrap()).is_zero());
    }

    #[test]
    fn zero_cubic_gives_zero_positive_action() {
        let m = catalog::e1(5);
        let back = structure_constants_from_cubic(&m, &CubicPotential::new()).unwrap();
        assert!(back[0].is_zero());
    }

    #[test]
    fn grading_violation() {
        let m = catalog::e1(5);
        let mut phi = CubicPotential::new();
        phi.add_monomial(1, 1, 3, Scalar::one());
        assert!(matches!(
            structure_constants_from_cubic(&m, &phi),
            Err(Error::GradingViolation(_))
        ));
    }

    #[test]
    fn framing_order_relabels() {
        let m = FrobeniusModule::from_entries(
            3,
            vec![1, 2, 2, 1],
            &[
                ((0, 5), Scalar::one()),
                ((1, 3), Scalar::one()),
                ((2, 4), Scalar::one()),
            ],
            &[
                ((1, 1), vec![(4, Scalar::one())]),
                ((1, 2), vec![(3, Scalar::one())]),
                ((2, 1), vec![(3, Scalar::one())]),
                ((1, 3), vec![(5, Scalar::one())]),
                ((2, 4), vec![(5, Scalar::one())]),
            ],
            &[2, 1],
            true,
        )
        .unwrap();
        assert_eq!(m.relabel(), &[0, 2, 1, 3, 4, 5]);
        assert!(validate_module(&m).passed(), "{}", validate_module(&m));
    }
}
