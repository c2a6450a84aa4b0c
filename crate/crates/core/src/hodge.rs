//! Weight filtrations, Hodge-Tate bigradings, polarized mixed Hodge structure
//! certificates, and the passage between framed real Frobenius modules and
//! nilpotent orbits.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frobenius::{basis_name, q_defect, q_form, q_sign, FrobeniusModule};
use crate::matrix::{basis_vector, definiteness_check, Definiteness, Matrix, Subspace, Vector};
use crate::report::Certificate;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiltrationKind {
    Increasing,
    Decreasing,
}

/// A finite filtration of an n-dimensional space.
///
/// Stored in a normal form: only the levels strictly between the trivial ends
/// are kept, plus the first level reaching the full space, so equal
/// filtrations compare equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Filtration {
    kind: FiltrationKind,
    ambient: usize,
    steps: BTreeMap<i32, Subspace>,
}

impl Filtration {
    /// Build from explicit levels; unspecified levels repeat the nearest
    /// specified one on the side of the smaller subspaces.
    pub fn new(kind: FiltrationKind, ambient: usize, levels: BTreeMap<i32, Subspace>) -> Self {
        let mut f = Filtration {
            kind,
            ambient,
            steps: levels,
        };
        f.normalize();
        f
    }

    fn normalize(&mut self) {
        if self.steps.is_empty() {
            return;
        }
        let lo = *self.steps.keys().next().unwrap();
        let hi = *self.steps.keys().next_back().unwrap();
        let mut full = BTreeMap::new();
        for l in lo..=hi {
            full.insert(l, self.raw_level(l));
        }
        let n = self.ambient;
        let zero = Subspace::zero(n);
        let all = Subspace::full(n);
        let keep: BTreeMap<i32, Subspace> = match self.kind {
            FiltrationKind::Increasing => {
                let first_full = full.iter().find(|(_, s)| **s == all).map(|(l, _)| *l);
                full.into_iter()
                    .filter(|(l, s)| *s != zero && first_full.map_or(true, |f| *l <= f))
                    .collect()
            }
            FiltrationKind::Decreasing => {
                let last_full = full.iter().rev().find(|(_, s)| **s == all).map(|(l, _)| *l);
                full.into_iter()
                    .filter(|(l, s)| *s != zero && last_full.map_or(true, |f| *l >= f))
                    .collect()
            }
        };
        self.steps = keep;
    }

    fn raw_level(&self, l: i32) -> Subspace {
        match self.kind {
            FiltrationKind::Increasing => match self.steps.range(..=l).next_back() {
                Some((_, s)) => s.clone(),
                None => Subspace::zero(self.ambient),
            },
            FiltrationKind::Decreasing => match self.steps.range(l..).next() {
                Some((_, s)) => s.clone(),
                None => Subspace::zero(self.ambient),
            },
        }
    }

    pub fn kind(&self) -> FiltrationKind {
        self.kind
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    /// The subspace at level l (W_l or F^l).
    pub fn level(&self, l: i32) -> Subspace {
        if self.steps.is_empty() {
            return Subspace::zero(self.ambient);
        }
        let lo = *self.steps.keys().next().unwrap();
        let hi = *self.steps.keys().next_back().unwrap();
        match self.kind {
            FiltrationKind::Increasing if l > hi => self.steps[&hi].clone(),
            FiltrationKind::Decreasing if l < lo => self.steps[&lo].clone(),
            _ => self.raw_level(l),
        }
    }

    pub fn levels(&self) -> &BTreeMap<i32, Subspace> {
        &self.steps
    }

    /// Lowest and highest stored level.
    pub fn range(&self) -> Option<(i32, i32)> {
        Some((*self.steps.keys().next()?, *self.steps.keys().next_back()?))
    }

    /// W[s] with W[s]_j = W_{j+s}.
    pub fn shift(&self, s: i32) -> Self {
        Filtration {
            kind: self.kind,
            ambient: self.ambient,
            steps: self.steps.iter().map(|(l, v)| (l - s, v.clone())).collect(),
        }
    }

    pub fn describe(&self) -> String {
        let sym = match self.kind {
            FiltrationKind::Increasing => "W",
            FiltrationKind::Decreasing => "F",
        };
        self.steps
            .iter()
            .map(|(l, s)| format!("{}{}: dim {}", sym, l, s.dim()))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// The weight filtration W(N) of a nilpotent endomorphism, centered at 0.
pub fn weight_filtration(n: &Matrix) -> Result<Filtration> {
    if !n.is_square() {
        return Err(Error::ShapeMismatch("weight filtration of a non-square matrix".into()));
    }
    if n.nilpotency_index().is_none() {
        return Err(Error::NotNilpotent(format!("{:?}", n)));
    }
    let dim = n.rows();
    let mut out = BTreeMap::new();
    weight_rec(n, Subspace::full(dim), Subspace::zero(dim), &mut out);
    let w = Filtration::new(FiltrationKind::Increasing, dim, out);
    verify_weight(n, &w)?;
    Ok(w)
}

/// Fill levels between `inner` and `outer` for the map induced by N on outer/inner.
fn weight_rec(n: &Matrix, outer: Subspace, inner: Subspace, out: &mut BTreeMap<i32, Subspace>) {
    if outer == inner {
        out.entry(0).or_insert(outer);
        return;
    }
    let mut m = 0i32;
    let mut img = outer.image(n);
    while !inner.contains_space(&img) {
        img = img.image(n);
        m += 1;
    }
    if m == 0 {
        out.insert(0, outer);
        out.insert(-1, inner);
        return;
    }
    let nm = n.pow(m as u32);
    let upper = outer.intersect(&inner.preimage(&nm));
    let lower = outer.image(&nm).sum(&inner);
    out.insert(m, outer);
    out.insert(-m - 1, inner);
    out.insert(m - 1, upper.clone());
    out.insert(-m, lower.clone());
    weight_rec(n, upper, lower, out);
}

/// Post-check the two characterizing properties of W(N).
fn verify_weight(n: &Matrix, w: &Filtration) -> Result<()> {
    let Some((lo, hi)) = w.range() else {
        return Ok(());
    };
    for l in lo..=hi + 2 {
        if !w.level(l - 2).contains_space(&w.level(l).image(n)) {
            return Err(Error::Internal(format!("N W_{} not inside W_{}", l, l - 2)));
        }
    }
    for l in 1..=hi.max(-lo) {
        let nl = n.pow(l as u32);
        let top = w.level(l).dim() - w.level(l - 1).dim();
        let bottom = w.level(-l).dim() - w.level(-l - 1).dim();
        let kernel = w.level(l).intersect(&w.level(-l - 1).preimage(&nl));
        if top != bottom || kernel != w.level(l - 1) {
            return Err(Error::Internal(format!("N^{} is not an isomorphism gr_{} -> gr_-{}", l, l, l)));
        }
    }
    Ok(())
}

/// A Hodge-Tate bigrading: I^{p,p} for each p.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bigrading {
    ambient: usize,
    pieces: BTreeMap<i32, Subspace>,
}

impl Bigrading {
    pub fn new(ambient: usize, pieces: BTreeMap<i32, Subspace>) -> Result<Self> {
        let total: usize = pieces.values().map(Subspace::dim).sum();
        let span = pieces
            .values()
            .fold(Subspace::zero(ambient), |acc, s| acc.sum(s));
        if total != ambient || span.dim() != ambient {
            return Err(Error::NotHodgeTate(format!(
                "pieces of total dimension {} spanning {} do not split a space of dimension {}",
                total,
                span.dim(),
                ambient
            )));
        }
        for (p, s) in &pieces {
            if s.basis().iter().any(|v| v.iter().any(|x| !x.is_tau_free())) {
                return Err(Error::NotHodgeTate(format!("I^{{{},{}}} is not defined over the rationals", p, p)));
            }
        }
        Ok(Bigrading { ambient, pieces })
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    /// I^{p,p}, zero when absent.
    pub fn piece(&self, p: i32) -> Subspace {
        self.pieces.get(&p).cloned().unwrap_or_else(|| Subspace::zero(self.ambient))
    }

    pub fn pieces(&self) -> &BTreeMap<i32, Subspace> {
        &self.pieces
    }

    /// F^a = ⊕_{p ≥ a} I^{p,p}.
    pub fn hodge_filtration(&self) -> Filtration {
        let mut levels = BTreeMap::new();
        for &p in self.pieces.keys() {
            let s = self
                .pieces
                .range(p..)
                .fold(Subspace::zero(self.ambient), |acc, (_, s)| acc.sum(s));
            levels.insert(p, s);
        }
        Filtration::new(FiltrationKind::Decreasing, self.ambient, levels)
    }

    /// W_l = ⊕_{2p ≤ l} I^{p,p}.
    pub fn weight_filtration(&self) -> Filtration {
        let mut levels = BTreeMap::new();
        for &p in self.pieces.keys() {
            let s = self
                .pieces
                .range(..=p)
                .fold(Subspace::zero(self.ambient), |acc, (_, s)| acc.sum(s));
            levels.insert(2 * p, s);
        }
        Filtration::new(FiltrationKind::Increasing, self.ambient, levels)
    }
}

/// I^{p,p} = V_{2(k−p)} for a module.
pub fn module_grading(m: &FrobeniusModule) -> Bigrading {
    let k = m.k() as i32;
    let n = m.rank();
    let pieces = (0..=k)
        .map(|p| (p, Subspace::coordinate(n, m.indices_of_degree(2 * (k - p) as u32))))
        .collect();
    Bigrading::new(n, pieces).expect("degree grading splits V")
}

/// The filtration by degree: W_l = ⊕_{d ≥ 2k−l} V_d.
pub fn degree_filtration(m: &FrobeniusModule) -> Filtration {
    module_grading(m).weight_filtration()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignCalibration {
    /// Positivity of (−1)^k Q(u, N^l u), matching Hodge-Riemann on Kähler examples.
    #[default]
    Geometric,
    /// Positivity of Q(u, N^l u).
    Literal,
}

impl std::str::FromStr for SignCalibration {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(SignCalibration::Geometric),
            "literal" => Ok(SignCalibration::Literal),
            _ => Err(Error::Parse {
                location: "sign-calibration".into(),
                message: format!("expected geometric or literal, got `{}`", s),
            }),
        }
    }
}

fn vector_string(v: &[Scalar]) -> String {
    let terms: Vec<String> = v
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| crate::series::term_string(c, &basis_name(i)))
        .collect();
    crate::series::join_terms(terms)
}

/// Certify that (grading, N, Q) is a polarized Hodge-Tate mixed Hodge structure
/// of weight k.
pub fn check_polarized_mhs(
    grading: &Bigrading,
    n: &Matrix,
    q: &Matrix,
    k: u32,
    calibration: SignCalibration,
) -> Result<Certificate> {
    let dim = grading.ambient();
    if n.rows() != dim || n.cols() != dim || q.rows() != dim || q.cols() != dim {
        return Err(Error::ShapeMismatch("grading, N and Q disagree in dimension".into()));
    }
    let k_i = k as i32;
    let mut cert = Certificate::new();

    let nilpotent = n.pow(k + 1).is_zero();
    cert.record("nilpotent", (!nilpotent).then(|| format!("N^{} != 0", k + 1)));

    let mut bideg = None;
    for (p, s) in grading.pieces() {
        let target = grading.piece(p - 1);
        if let Some(v) = s.basis().iter().find(|v| !target.contains(&n.apply(v))) {
            bideg = Some(format!("N({}) leaves I^{{{},{}}}", vector_string(v), p - 1, p - 1));
            break;
        }
    }
    cert.record("n-bidegree", bideg);

    let weight = if nilpotent {
        let w = weight_filtration(n)?.shift(-k_i);
        let expected = grading.weight_filtration();
        (w != expected).then(|| format!("W(N)[-{}] = {{{}}}, grading gives {{{}}}", k, w.describe(), expected.describe()))
    } else {
        Some("N is not nilpotent".into())
    };
    cert.record("weight", weight);

    let f = grading.hodge_filtration();
    let mut iso = None;
    'iso: for a in 0..=k_i + 1 {
        let fa = f.level(a);
        let fb = f.level(k_i - a + 1);
        for u in fa.basis() {
            for v in fb.basis() {
                let val = q.form(u, v);
                if !val.is_zero() {
                    iso = Some(format!(
                        "Q({}, {}) = {} with F^{} and F^{}",
                        vector_string(u),
                        vector_string(v),
                        val,
                        a,
                        k_i - a + 1
                    ));
                    break 'iso;
                }
            }
        }
    }
    cert.record("isotropy", iso);

    let sign = match calibration {
        SignCalibration::Geometric if k % 2 == 1 => Scalar::from_int(-1),
        _ => Scalar::one(),
    };
    for l in 0..=k {
        if (k + l) % 2 != 0 {
            continue;
        }
        let p = ((k + l) / 2) as i32;
        let nl = n.pow(l);
        let primitive = grading.piece(p).intersect(&n.pow(l + 1).kernel_space());
        let name = format!("positivity[l={}]", l);
        if primitive.dim() == 0 {
            cert.pass(name);
            continue;
        }
        let form = q.mul(&nl).scale(&sign);
        let gram = form.restrict_form(primitive.basis());
        let gram = Matrix::from_fn(gram.rows(), gram.cols(), |i, j| {
            // symmetrize defensively; asymmetry shows up as an indefinite verdict otherwise
            (&(gram.get(i, j) + gram.get(j, i))) * &Scalar::from_ratio(1, 2)
        });
        let rep = definiteness_check(&gram)?;
        if rep.verdict == Definiteness::PositiveDefinite {
            cert.pass(name);
        } else {
            let coeffs = rep.witness.unwrap_or_else(|| basis_vector(primitive.dim(), 0));
            let mut v = vec![Scalar::zero(); dim];
            for (c, b) in coeffs.iter().zip(primitive.basis()) {
                for (x, y) in v.iter_mut().zip(b) {
                    *x += &(c * y);
                }
            }
            let value = form.form(&v, &v);
            cert.fail(name, format!("{}: form value {} on {}", vector_string(&v), value, vector_string(&v)));
        }
    }
    Ok(cert)
}

/// First failing positivity witness vector, if any, as text.
fn failure_text(cert: &Certificate) -> String {
    cert.first_failure()
        .map(|i| format!("{}: {}", i.name, i.witness.clone().unwrap_or_default()))
        .unwrap_or_default()
}

/// {N₁..N_r; F₀} with the marked vector e and the form Q.
#[derive(Clone, Debug, PartialEq)]
pub struct NilpotentOrbit {
    pub k: u32,
    pub ns: Vec<Matrix>,
    pub f0: Filtration,
    pub e: Vector,
    pub q: Matrix,
}

impl NilpotentOrbit {
    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    pub fn barycenter(&self) -> Matrix {
        let n = self.dim();
        self.ns.iter().fold(Matrix::zeros(n, n), |acc, m| acc.add(m))
    }

    /// I^{p,p} = F^p ∩ W_{2p} with W = W(ΣN_j)[−k]; errors unless it splits V.
    pub fn grading(&self) -> Result<Bigrading> {
        let w = weight_filtration(&self.barycenter())?.shift(-(self.k as i32));
        let n = self.dim();
        let pieces = (0..=self.k as i32)
            .map(|p| (p, self.f0.level(p).intersect(&w.level(2 * p))))
            .filter(|(_, s)| s.dim() > 0)
            .collect();
        Bigrading::new(n, pieces)
    }
}

/// Deterministic sampling of the framing cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConeSampling {
    pub seed: u64,
    pub samples: usize,
}

impl Default for ConeSampling {
    fn default() -> Self {
        ConeSampling { seed: 0, samples: 5 }
    }
}

impl ConeSampling {
    /// Barycenter, one interior point near each vertex, then seeded samples.
    pub fn points(&self, r: usize) -> Vec<Vec<Scalar>> {
        let mut pts = vec![vec![Scalar::one(); r]];
        if r > 1 {
            for j in 0..r {
                pts.push(
                    (0..r)
                        .map(|i| Scalar::from_int(if i == j { 8 } else { 1 }))
                        .collect(),
                );
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.samples {
            pts.push(
                (0..r)
                    .map(|_| Scalar::from_ratio(rng.gen_range(1..=9), rng.gen_range(1..=4)))
                    .collect(),
            );
        }
        pts
    }
}

fn lambda_string(l: &[Scalar]) -> String {
    format!("({})", l.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "))
}

/// Sample the cone: W(Σλ_jN_j) must not depend on λ and the barycenter must polarize.
pub fn check_framing_cone(
    m: &FrobeniusModule,
    sampling: &ConeSampling,
    calibration: SignCalibration,
) -> Result<Certificate> {
    m.ensure_valid()?;
    let grading = module_grading(m);
    let q = q_form(m);
    let pts = sampling.points(m.r());
    let mut cert = Certificate::new();

    let bary = m.product_by(&pts[0]);
    let bary_cert = check_polarized_mhs(&grading, &bary, &q, m.k(), calibration)?;
    cert.record(
        "barycenter-polarized",
        (!bary_cert.passed()).then(|| failure_text(&bary_cert)),
    );

    let reference = weight_filtration(&bary).ok();
    let mut dependence = None;
    for lambda in &pts[1..] {
        let w = weight_filtration(&m.product_by(lambda)).ok();
        if w != reference {
            dependence = Some(format!("W changes at lambda = {}", lambda_string(lambda)));
            break;
        }
    }
    cert.record("weight-independent", dependence);
    Ok(cert)
}

/// N_j = L_{T_j}, F^p = ⊕_{a ≥ p} I^{a,a}, e = T₀, Q from B.
pub fn module_to_orbit(
    m: &FrobeniusModule,
    sampling: &ConeSampling,
    calibration: SignCalibration,
) -> Result<NilpotentOrbit> {
    m.ensure_valid()?;
    if !m.is_real() {
        return Err(Error::InvalidModule("module is not flagged real".into()));
    }
    let grading = module_grading(m);
    let q = q_form(m);
    let pts = sampling.points(m.r());
    for (i, lambda) in pts.iter().enumerate() {
        let n = m.product_by(lambda);
        let cert = check_polarized_mhs(&grading, &n, &q, m.k(), calibration)?;
        // a passing "weight" item pins W(N_λ) to the grading, so agreement
        // at every sample already means λ-independence
        match cert.first_failure() {
            None => {}
            Some(item) if i > 0 && item.name == "weight" => {
                return Err(Error::ConeDegenerate(format!(
                    "W changes at lambda = {}",
                    lambda_string(lambda)
                )))
            }
            Some(_) => {
                return Err(Error::NotPolarizable(format!(
                    "lambda = {}: {}",
                    lambda_string(lambda),
                    failure_text(&cert)
                )))
            }
        }
    }
    Ok(NilpotentOrbit {
        k: m.k(),
        ns: m.products().to_vec(),
        f0: grading.hodge_filtration(),
        e: basis_vector(m.rank(), 0),
        q,
    })
}

/// The two numbered conditions for a maximally unipotent boundary point.
pub fn check_max_unipotent(orbit: &NilpotentOrbit) -> Certificate {
    let mut cert = Certificate::new();
    let k = orbit.k as i32;
    let r = orbit.ns.len();
    let pieces = match weight_filtration(&orbit.barycenter()) {
        Ok(w) => {
            let w = w.shift(-k);
            Some((orbit.f0.level(k).intersect(&w.level(2 * k)), orbit.f0.level(k - 1).intersect(&w.level(2 * k - 2))))
        }
        Err(e) => {
            cert.fail("dimensions", e.to_string());
            None
        }
    };
    let Some((top, next)) = pieces else {
        return cert;
    };
    let dims = if top.dim() != 1 {
        Some(format!("dim I^{{{},{}}} = {}", k, k, top.dim()))
    } else if next.dim() != r {
        Some(format!("dim I^{{{},{}}} = {} but r = {}", k - 1, k - 1, next.dim(), r))
    } else {
        None
    };
    cert.record("dimensions", dims);
    let images: Vec<Vector> = orbit
        .ns
        .iter()
        .flat_map(|n| top.basis().iter().map(move |v| n.apply(v)))
        .collect();
    let span = Subspace::span(orbit.dim(), &images);
    cert.record(
        "span",
        (span != next).then(|| format!("N_j(I^{{{},{}}}) span dimension {} of {}", k, k, span.dim(), next.dim())),
    );
    cert
}

/// Module from a nilpotent orbit, with the basis used (columns in the orbit's
/// coordinates). T₀ = e and T_j = N_j(e); lower-degree pieces keep their
/// echelon basis and upper-degree pieces get the B-dual basis.
pub fn orbit_to_module(orbit: &NilpotentOrbit) -> Result<(FrobeniusModule, Matrix)> {
    let mu = check_max_unipotent(orbit);
    if !mu.passed() {
        return Err(Error::NotMaximallyUnipotent(failure_text(&mu)));
    }
    let k = orbit.k;
    let n = orbit.dim();
    let grading = orbit.grading()?;
    for nj in &orbit.ns {
        if !nj.is_tau_free() {
            return Err(Error::MalformedOrbit("N_j involves tau".into()));
        }
    }
    if !grading.piece(k as i32).contains(&orbit.e) || orbit.e.iter().all(Scalar::is_zero) {
        return Err(Error::MalformedOrbit("marked vector e is not a nonzero element of I^{k,k}".into()));
    }
    // B(v_a, v_b) = (−1)^{k+ã/2} Q(v_a, v_b) on vectors of degree ã
    let b_of = |u: &Vector, v: &Vector, deg: u32| &q_sign(k, deg) * &orbit.q.form(u, v);

    let mut by_degree: Vec<Vec<Vector>> = vec![Vec::new(); k as usize + 1];
    by_degree[0] = vec![orbit.e.clone()];
    by_degree[1] = orbit.ns.iter().map(|nj| nj.apply(&orbit.e)).collect();
    for p in 2..=k as usize {
        if 2 * p < k as usize {
            by_degree[p] = grading.piece(k as i32 - p as i32).basis().to_vec();
        }
    }
    for p in 0..=k as usize {
        let dual = k as usize - p;
        if 2 * p < k as usize {
            let lower = by_degree[p].clone();
            let space = grading.piece(k as i32 - dual as i32);
            let mut upper = dual_basis(&lower, space.basis(), |u, v| b_of(u, v, 2 * p as u32))?;
            // order by leading coordinate so coordinate bases come back unpermuted
            upper.sort_by_key(|v| v.iter().position(|x| !x.is_zero()));
            by_degree[dual] = upper;
        } else if 2 * p == k as usize {
            let space = grading.piece(k as i32 - p as i32);
            by_degree[p] = middle_basis(space.basis(), |u, v| b_of(u, v, 2 * p as u32))?;
        }
    }
    let dims: Vec<usize> = by_degree.iter().map(Vec::len).collect();
    let columns: Vec<Vector> = by_degree.into_iter().flatten().collect();
    if columns.len() != n {
        return Err(Error::NotHodgeTate("graded pieces do not fill V".into()));
    }
    let basis = Matrix::from_columns(n, &columns);
    let inv = basis
        .inverse()
        .ok_or_else(|| Error::Internal("adapted basis is singular".into()))?;
    let degrees: Vec<u32> = dims
        .iter()
        .enumerate()
        .flat_map(|(p, &d)| std::iter::repeat(2 * p as u32).take(d))
        .collect();
    let pairing = Matrix::from_fn(n, n, |a, c| b_of(&columns[a], &columns[c], degrees[a]));
    let products = orbit.ns.iter().map(|nj| inv.mul(nj).mul(&basis)).collect();
    let module = FrobeniusModule::new(k, dims, pairing, products, true)?;
    Ok((module, basis))
}

/// Basis of `space` dual to `lower` under the pairing: pair(lower_a, dual_b) = δ_ab.
fn dual_basis(
    lower: &[Vector],
    space: &[Vector],
    pair: impl Fn(&Vector, &Vector) -> Scalar,
) -> Result<Vec<Vector>> {
    if lower.len() != space.len() {
        return Err(Error::NotHodgeTate("dual pieces differ in dimension".into()));
    }
    let d = lower.len();
    let gram = Matrix::from_fn(d, d, |i, j| pair(&lower[i], &space[j]));
    let inv = gram
        .inverse()
        .ok_or_else(|| Error::NotPolarizable("pairing between dual pieces is degenerate".into()))?;
    // dual_b = Σ_j space_j · inv[j][b]
    Ok((0..d)
        .map(|b| {
            let mut v = vec![Scalar::zero(); space.first().map_or(0, Vec::len)];
            for (j, s) in space.iter().enumerate() {
                let c = inv.get(j, b);
                for (x, y) in v.iter_mut().zip(s) {
                    *x += &(c * y);
                }
            }
            v
        })
        .collect())
}

/// Self-dual basis of the middle piece, if one exists over the rationals.
fn middle_basis(space: &[Vector], pair: impl Fn(&Vector, &Vector) -> Scalar) -> Result<Vec<Vector>> {
    let d = space.len();
    let gram = Matrix::from_fn(d, d, |i, j| pair(&space[i], &space[j]));
    let is_perm = (0..d).all(|i| {
        let nonzero: Vec<usize> = (0..d).filter(|&j| !gram.get(i, j).is_zero()).collect();
        nonzero.len() == 1 && gram.get(i, nonzero[0]).is_one()
    });
    if is_perm {
        return Ok(space.to_vec());
    }
    let mut out = Vec::with_capacity(d);
    // Gram–Schmidt with rational square-root normalization
    let mut basis: Vec<Vector> = Vec::new();
    for v in space {
        let mut w = v.clone();
        for u in &basis {
            let c = pair(&w, u);
            for (x, y) in w.iter_mut().zip(u) {
                *x -= &(&c * y);
            }
        }
        let norm = pair(&w, &w);
        let root = norm.rational_sqrt().ok_or_else(|| {
            Error::NoRationalAdaptedBasis(format!("middle piece has self-pairing {}", norm))
        })?;
        if root.is_zero() {
            return Err(Error::NoRationalAdaptedBasis("isotropic vector in the middle piece".into()));
        }
        let inv = root.inv().expect("nonzero");
        let w: Vector = w.iter().map(|x| x * &inv).collect();
        basis.push(w.clone());
        out.push(w);
    }
    Ok(out)
}

/// True when every N_j is an infinitesimal automorphism of Q.
pub fn preserves_q(q: &Matrix, ns: &[Matrix]) -> bool {
    ns.iter().all(|n| q_defect(q, n).is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use proptest::prelude::*;

    /// W_l = Σ_{j ≥ max(0,−l)} ker N^{l+1+j} ∩ im N^j.
    fn weight_oracle(n: &Matrix, l: i32) -> Subspace {
        let dim = n.rows();
        let mut acc = Subspace::zero(dim);
        for j in 0..=dim as i32 {
            if j < -l || l + 1 + j < 0 {
                continue;
            }
            let k = n.pow((l + 1 + j) as u32).kernel_space();
            let i = n.pow(j as u32).image_space();
            acc = acc.sum(&k.intersect(&i));
        }
        acc
    }

    #[test]
    fn e1_weight_filtration() {
        let m = catalog::e1(5);
        let n = m.product(1).unwrap();
        let w = weight_filtration(n).unwrap();
        assert_eq!(w.level(-4).dim(), 0);
        assert_eq!(w.level(-3), Subspace::coordinate(4, [3]));
        assert_eq!(w.level(-2), Subspace::coordinate(4, [3]));
        assert_eq!(w.level(-1), Subspace::coordinate(4, [2, 3]));
        assert_eq!(w.level(0), Subspace::coordinate(4, [2, 3]));
        assert_eq!(w.level(1), Subspace::coordinate(4, [1, 2, 3]));
        assert_eq!(w.level(3), Subspace::full(4));
        assert_eq!(w.shift(-3), degree_filtration(&m));
    }

    #[test]
    fn zero_map_weight() {
        let w = weight_filtration(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(w.level(-1).dim(), 0);
        assert_eq!(w.level(0), Subspace::full(3));
    }

    #[test]
    fn not_nilpotent() {
        assert!(matches!(
            weight_filtration(&Matrix::identity(2)),
            Err(Error::NotNilpotent(_))
        ));
    }

    #[test]
    fn e1_polarized_and_sign_flip() {
        let m = catalog::e1(5);
        let cert = check_polarized_mhs(
            &module_grading(&m),
            m.product(1).unwrap(),
            &q_form(&m),
            3,
            SignCalibration::Geometric,
        )
        .unwrap();
        assert!(cert.passed(), "{}", cert);

        let bad = catalog::e1(-5);
        let cert = check_polarized_mhs(
            &module_grading(&bad),
            bad.product(1).unwrap(),
            &q_form(&bad),
            3,
            SignCalibration::Geometric,
        )
        .unwrap();
        let item = cert.get("positivity[l=3]").unwrap();
        assert!(!item.passed);
        assert!(item.witness.as_ref().unwrap().starts_with("T0:"));
        assert!(matches!(
            module_to_orbit(&bad, &ConeSampling::default(), SignCalibration::Geometric),
            Err(Error::NotPolarizable(_))
        ));
    }

    #[test]
    fn literal_calibration_flips_odd_weight() {
        let m = catalog::e1(5);
        let cert = check_polarized_mhs(
            &module_grading(&m),
            m.product(1).unwrap(),
            &q_form(&m),
            3,
            SignCalibration::Literal,
        )
        .unwrap();
        assert!(!cert.get("positivity[l=3]").unwrap().passed);
    }

    #[test]
    fn zero_map_on_middle_piece() {
        // k = 2 style: N = 0, grading in I^{1,1}; (4) reduces to definiteness of Q
        let mut pieces = BTreeMap::new();
        pieces.insert(1, Subspace::full(2));
        let g = Bigrading::new(2, pieces).unwrap();
        let q = Matrix::from_ints(&[&[1, 0], &[0, 2]]);
        let cert = check_polarized_mhs(&g, &Matrix::zeros(2, 2), &q, 2, SignCalibration::Geometric).unwrap();
        assert!(cert.passed(), "{}", cert);
        let q = Matrix::from_ints(&[&[1, 0], &[0, -2]]);
        let cert = check_polarized_mhs(&g, &Matrix::zeros(2, 2), &q, 2, SignCalibration::Geometric).unwrap();
        assert!(!cert.get("positivity[l=0]").unwrap().passed);
    }

    #[test]
    fn e1_orbit_round_trip() {
        let m = catalog::e1(5);
        let orbit = module_to_orbit(&m, &ConeSampling::default(), SignCalibration::Geometric).unwrap();
        assert_eq!(orbit.f0.level(3), Subspace::coordinate(4, [0]));
        assert_eq!(orbit.f0.level(2), Subspace::coordinate(4, [0, 1]));
        assert_eq!(orbit.f0.level(1), Subspace::coordinate(4, [0, 1, 2]));
        assert_eq!(orbit.f0.level(0), Subspace::full(4));
        assert!(check_max_unipotent(&orbit).passed());
        let (back, basis) = orbit_to_module(&orbit).unwrap();
        assert_eq!(basis, Matrix::identity(4));
        assert_eq!(back, m);
    }

    #[test]
    fn random_orbit_round_trip() {
        for k in 3..=5 {
            for seed in 0..4 {
                let m = catalog::random_polarizable(k, seed);
                let orbit = module_to_orbit(&m, &ConeSampling::default(), SignCalibration::Geometric).unwrap();
                let (back, basis) = orbit_to_module(&orbit).unwrap();
                assert_eq!(basis, Matrix::identity(m.rank()), "k={} seed={}", k, seed);
                assert_eq!(back, m);
            }
        }
    }

    #[test]
    fn max_unipotency_failures() {
        let m = catalog::e1(5);
        let orbit = module_to_orbit(&m, &ConeSampling::default(), SignCalibration::Geometric).unwrap();
        let mut empty = orbit.clone();
        empty.ns.clear();
        assert!(!check_max_unipotent(&empty).passed());
        assert!(matches!(orbit_to_module(&empty), Err(Error::NotMaximallyUnipotent(_))));

        let n = orbit.ns[0].clone();
        let doubled = NilpotentOrbit {
            k: 3,
            ns: vec![Matrix::block_diag(&[n.clone(), n])],
            f0: Filtration::new(
                FiltrationKind::Decreasing,
                8,
                (0..=3)
                    .map(|p| {
                        let idx: Vec<usize> = (0..4).filter(|&i| (i as i32) <= 3 - p).collect();
                        let both = idx.iter().flat_map(|&i| [i, i + 4]).collect::<Vec<_>>();
                        (p, Subspace::coordinate(8, both))
                    })
                    .collect(),
            ),
            e: basis_vector(8, 0),
            q: Matrix::block_diag(&[orbit.q.clone(), orbit.q.clone()]),
        };
        let cert = check_max_unipotent(&doubled);
        assert!(!cert.get("dimensions").unwrap().passed);

        let mut dead = orbit.clone();
        let mut n = dead.ns[0].clone();
        n.set(1, 0, Scalar::zero());
        dead.ns = vec![n];
        assert!(!check_max_unipotent(&dead).passed());
    }

    #[test]
    fn framing_cone_outside_kahler_cone() {
        let m = catalog::standard_projective(&[1, 1, 1]);
        let cert = check_framing_cone(&m, &ConeSampling::default(), SignCalibration::Geometric).unwrap();
        assert!(cert.passed(), "{}", cert);
        // framing (h1, h2, -h3): the top power of the barycenter is negative
        let flipped = catalog::projective_product(&[1, 1, 1], &Scalar::one(), &|a| {
            if a == [0, 0, 1] {
                Scalar::from_int(-1)
            } else {
                Scalar::one()
            }
        });
        assert!(crate::frobenius::validate_module(&flipped).passed());
        let cert = check_framing_cone(&flipped, &ConeSampling::default(), SignCalibration::Geometric).unwrap();
        assert!(!cert.get("barycenter-polarized").unwrap().passed);
        assert!(matches!(
            module_to_orbit(&flipped, &ConeSampling::default(), SignCalibration::Geometric),
            Err(Error::NotPolarizable(_))
        ));
    }

    fn arb_nilpotent(n: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-2i64..3, n * n).prop_map(move |v| {
            Matrix::from_fn(n, n, |i, j| {
                if i > j {
                    Scalar::from_int(v[i * n + j])
                } else {
                    Scalar::zero()
                }
            })
        })
    }

    proptest! {
        #[test]
        fn weight_filtration_matches_kernel_image_formula(n in arb_nilpotent(5)) {
            let w = weight_filtration(&n).unwrap();
            for l in -6..=6 {
                prop_assert_eq!(w.level(l), weight_oracle(&n, l));
            }
        }
    }
}
