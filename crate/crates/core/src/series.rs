//! Truncated multivariate power series in q₁..q_r and their log-polynomial
//! extension by z₁..z_r, where z_j stands for log(q_j)/τ.
//!
//! The primitive derivation is D_j = ∂/∂z_j, which acts on q^m as
//! multiplication by τ·m_j and on z-monomials as the ordinary derivative.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exponent vector of a monomial.
pub type Mono = Vec<u32>;

pub fn total_degree(m: &[u32]) -> u32 {
    m.iter().sum()
}

/// Coefficients a series can carry: scalars and matrices.
pub trait Coefficient: Clone + PartialEq + fmt::Debug {
    fn is_zero(&self) -> bool;
    fn plus(&self, o: &Self) -> Self;
    fn negated(&self) -> Self;
    fn scaled(&self, s: &Scalar) -> Self;
}

/// Coefficients that can also be multiplied with each other.
pub trait RingCoefficient: Coefficient {
    fn times(&self, o: &Self) -> Self;
}

impl Coefficient for Scalar {
    fn is_zero(&self) -> bool {
        Scalar::is_zero(self)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn negated(&self) -> Self {
        -self
    }
    fn scaled(&self, s: &Scalar) -> Self {
        self * s
    }
}

impl RingCoefficient for Scalar {
    fn times(&self, o: &Self) -> Self {
        self * o
    }
}

fn accumulate<C: Coefficient>(map: &mut BTreeMap<Mono, C>, key: Mono, c: C) {
    if c.is_zero() {
        return;
    }
    match map.entry(key) {
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut e) => {
            let s = e.get().plus(&c);
            if s.is_zero() {
                e.remove();
            } else {
                *e.get_mut() = s;
            }
        }
    }
}

/// A power series in `nvars` variables truncated at total degree `order`.
///
/// Zero coefficients are never stored, so equality is equality of maps.
#[derive(Clone, PartialEq)]
pub struct Series<C> {
    nvars: usize,
    order: u32,
    terms: BTreeMap<Mono, C>,
}

pub type QSeries = Series<Scalar>;

impl<C: Coefficient> Series<C> {
    pub fn zero(nvars: usize, order: u32) -> Self {
        Series {
            nvars,
            order,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, order: u32, c: C) -> Self {
        Self::monomial(nvars, order, vec![0; nvars], c)
    }

    pub fn monomial(nvars: usize, order: u32, m: Mono, c: C) -> Self {
        let mut s = Self::zero(nvars, order);
        s.add_term(m, c);
        s
    }

    /// Build from `(exponent, coefficient)` pairs; terms past the order are dropped.
    pub fn from_terms(nvars: usize, order: u32, terms: impl IntoIterator<Item = (Mono, C)>) -> Self {
        let mut s = Self::zero(nvars, order);
        for (m, c) in terms {
            s.add_term(m, c);
        }
        s
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &[u32]) -> Option<&C> {
        self.terms.get(m)
    }

    pub fn constant_term(&self) -> Option<&C> {
        self.terms.get(&vec![0; self.nvars])
    }

    pub fn vanishes_at_zero(&self) -> bool {
        self.constant_term().is_none()
    }

    /// Add `c·q^m`, discarding it when |m| exceeds the order.
    pub fn add_term(&mut self, m: Mono, c: C) {
        assert_eq!(m.len(), self.nvars, "exponent length mismatch");
        if total_degree(&m) <= self.order {
            accumulate(&mut self.terms, m, c);
        }
    }

    pub fn ensure_compatible<D>(&self, o: &Series<D>) -> Result<()> {
        if self.nvars != o.nvars || self.order != o.order {
            return Err(Error::ShapeMismatch(format!(
                "series in {} variables at order {} vs {} variables at order {}",
                self.nvars, self.order, o.nvars, o.order
            )));
        }
        Ok(())
    }

    fn assert_compatible<D>(&self, o: &Series<D>) {
        if let Err(e) = self.ensure_compatible(o) {
            panic!("{}", e);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.assert_compatible(o);
        let mut out = self.clone();
        for (m, c) in &o.terms {
            accumulate(&mut out.terms, m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.negated())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        self.map(|c| c.scaled(s))
    }

    /// Apply `f` to every coefficient, dropping results that vanish.
    pub fn map<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> Series<D> {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let d = f(c);
            if !d.is_zero() {
                terms.insert(m.clone(), d);
            }
        }
        Series {
            nvars: self.nvars,
            order: self.order,
            terms,
        }
    }

    /// Multiply by a scalar-valued series.
    pub fn mul_scalar_series(&self, s: &QSeries) -> Self {
        self.assert_compatible(s);
        let mut out = Self::zero(self.nvars, self.order);
        for (m1, c1) in &self.terms {
            let d1 = total_degree(m1);
            for (m2, c2) in &s.terms {
                if d1 + total_degree(m2) > self.order {
                    continue;
                }
                accumulate(&mut out.terms, add_mono(m1, m2), c1.scaled(c2));
            }
        }
        out
    }

    /// Same series at a lower truncation order.
    pub fn truncate(&self, order: u32) -> Self {
        let order = order.min(self.order);
        Series {
            nvars: self.nvars,
            order,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| total_degree(m) <= order)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Reinterpret at a different order, keeping only terms that fit.
    pub fn with_order(&self, order: u32) -> Self {
        let mut s = self.truncate(order);
        s.order = order;
        s
    }

    /// D_j with `j` counted from 1.
    pub fn dz_derive(&self, j: usize) -> Result<Self> {
        if j == 0 || j > self.nvars {
            return Err(Error::IndexOutOfRange {
                index: j,
                limit: self.nvars,
            });
        }
        Ok(self.dz(j - 1))
    }

    /// D along the 0-based variable `v`.
    pub(crate) fn dz(&self, v: usize) -> Self {
        let tau = Scalar::tau();
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            if m[v] > 0 {
                let f = &tau * &Scalar::from_int(m[v] as i64);
                terms.insert(m.clone(), c.scaled(&f));
            }
        }
        Series {
            nvars: self.nvars,
            order: self.order,
            terms,
        }
    }

    /// The q-monomials present, in graded order.
    pub fn graded_terms(&self) -> Vec<(&Mono, &C)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| total_degree(a.0).cmp(&total_degree(b.0)).then(a.0.cmp(b.0)));
        v
    }
}

impl<C: RingCoefficient> Series<C> {
    pub fn mul(&self, o: &Self) -> Self {
        self.assert_compatible(o);
        let mut out = Self::zero(self.nvars, self.order);
        for (m1, c1) in &self.terms {
            let d1 = total_degree(m1);
            for (m2, c2) in &o.terms {
                if d1 + total_degree(m2) > self.order {
                    continue;
                }
                accumulate(&mut out.terms, add_mono(m1, m2), c1.times(c2));
            }
        }
        out
    }
}

impl QSeries {
    /// The variable q_j, counted from 1.
    pub fn q(nvars: usize, order: u32, j: usize) -> Self {
        let mut m = vec![0; nvars];
        m[j - 1] = 1;
        Self::monomial(nvars, order, m, Scalar::one())
    }

    /// ∂/∂q_j on a series without constant dependence, via (τ q_j)⁻¹ D_j.
    pub fn dq_derive(&self, j: usize) -> Result<Self> {
        let d = self.dz_derive(j)?;
        let inv_tau = Scalar::tau_pow(-1);
        let mut terms = BTreeMap::new();
        for (m, c) in &d.terms {
            let mut m = m.clone();
            m[j - 1] -= 1;
            terms.insert(m, c * &inv_tau);
        }
        Ok(Series {
            nvars: self.nvars,
            order: self.order,
            terms,
        })
    }

    /// Apply the conjugation τ ↦ −τ to every coefficient.
    pub fn conj(&self) -> Self {
        self.map(|c| c.conj())
    }
}

pub(crate) fn add_mono(a: &[u32], b: &[u32]) -> Mono {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Render `q1^2*q2` style monomials; empty string for the unit monomial.
pub fn mono_string(prefix: &str, m: &[u32], first_index: usize) -> String {
    let mut parts = Vec::new();
    for (i, &e) in m.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(format!("{}{}", prefix, i + first_index)),
            _ => parts.push(format!("{}{}^{}", prefix, i + first_index, e)),
        }
    }
    parts.join("*")
}

/// Render a term `c·mono`, parenthesizing compound coefficients.
pub(crate) fn term_string(c: &Scalar, mono: &str) -> String {
    if mono.is_empty() {
        return c.to_string();
    }
    if c.is_one() {
        return mono.to_string();
    }
    if (-c).is_one() {
        return format!("-{}", mono);
    }
    let cs = c.to_string();
    if cs.contains(' ') || cs.contains('(') {
        format!("({})*{}", cs, mono)
    } else {
        format!("{}*{}", cs, mono)
    }
}

pub(crate) fn join_terms(terms: Vec<String>) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, t) in terms.into_iter().enumerate() {
        if i == 0 {
            out.push_str(&t);
        } else if let Some(rest) = t.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(&t);
        }
    }
    out
}

impl fmt::Display for QSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self
            .graded_terms()
            .into_iter()
            .map(|(m, c)| term_string(c, &mono_string("q", m, 1)))
            .collect();
        write!(f, "{}", join_terms(terms))
    }
}

impl<C: fmt::Debug> fmt::Debug for Series<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Series")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .field("terms", &self.terms)
            .finish()
    }
}

/// Polynomial in z-variables with series coefficients.
///
/// The z-variable with index `x` is the logarithm of q-variable
/// `x - offset` when that lies in range; other z-variables are plain
/// polynomial variables. Frames use `offset = 0` with one z per q; potentials
/// use `offset = 1` with one z per basis vector, so z₀ is unlinked.
#[derive(Clone, PartialEq, Debug)]
pub struct LogPoly<C> {
    nz: usize,
    offset: usize,
    nq: usize,
    order: u32,
    terms: BTreeMap<Mono, Series<C>>,
}

impl<C: Coefficient> LogPoly<C> {
    pub fn zero(nz: usize, offset: usize, nq: usize, order: u32) -> Self {
        LogPoly {
            nz,
            offset,
            nq,
            order,
            terms: BTreeMap::new(),
        }
    }

    /// Frame-style layout: one z per q-variable.
    pub fn zero_frame(nq: usize, order: u32) -> Self {
        Self::zero(nq, 0, nq, order)
    }

    pub fn from_series(nz: usize, offset: usize, s: Series<C>) -> Self {
        let mut p = Self::zero(nz, offset, s.nvars, s.order);
        p.add_term(vec![0; nz], s);
        p
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Series<C>)> {
        self.terms.iter()
    }

    fn zero_series(&self) -> Series<C> {
        Series::zero(self.nq, self.order)
    }

    pub fn add_term(&mut self, zm: Mono, s: Series<C>) {
        assert_eq!(zm.len(), self.nz, "z-exponent length mismatch");
        if s.is_zero() {
            return;
        }
        let sum = match self.terms.get(&zm) {
            Some(old) => old.add(&s),
            None => s,
        };
        if sum.is_zero() {
            self.terms.remove(&zm);
        } else {
            self.terms.insert(zm, sum);
        }
    }

    /// Coefficient series of a z-monomial (zero when absent).
    pub fn z_coeff(&self, zm: &[u32]) -> Series<C> {
        self.terms.get(zm).cloned().unwrap_or_else(|| self.zero_series())
    }

    /// The z-free part.
    pub fn series_part(&self) -> Series<C> {
        self.z_coeff(&vec![0; self.nz])
    }

    /// The part carrying at least one z, as a log-polynomial.
    pub fn log_part(&self) -> Self {
        let mut out = Self::zero(self.nz, self.offset, self.nq, self.order);
        for (zm, s) in &self.terms {
            if zm.iter().any(|&e| e > 0) {
                out.terms.insert(zm.clone(), s.clone());
            }
        }
        out
    }

    /// The underlying series when no z occurs.
    pub fn as_series(&self) -> Option<Series<C>> {
        if self.log_part().is_zero() {
            Some(self.series_part())
        } else {
            None
        }
    }

    fn same_layout(&self, o: &Self) {
        assert!(
            self.nz == o.nz && self.offset == o.offset && self.nq == o.nq && self.order == o.order,
            "log-polynomial layout mismatch"
        );
    }

    pub fn add(&self, o: &Self) -> Self {
        self.same_layout(o);
        let mut out = self.clone();
        for (zm, s) in &o.terms {
            out.add_term(zm.clone(), s.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.map_series(|s| s.neg())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        self.map_series(|s| s.scale(c))
    }

    pub fn map_series<D: Coefficient>(&self, f: impl Fn(&Series<C>) -> Series<D>) -> LogPoly<D> {
        let mut out = LogPoly::zero(self.nz, self.offset, self.nq, self.order);
        for (zm, s) in &self.terms {
            out.add_term(zm.clone(), f(s));
        }
        out
    }

    fn linked_q(&self, x: usize) -> Option<usize> {
        if x >= self.offset && x - self.offset < self.nq {
            Some(x - self.offset)
        } else {
            None
        }
    }

    /// ∂/∂z_x for the 0-based z-variable `x`.
    pub fn derive_z(&self, x: usize) -> Result<Self> {
        if x >= self.nz {
            return Err(Error::IndexOutOfRange {
                index: x,
                limit: self.nz,
            });
        }
        let mut out = Self::zero(self.nz, self.offset, self.nq, self.order);
        for (zm, s) in &self.terms {
            if zm[x] > 0 {
                let mut lower = zm.clone();
                lower[x] -= 1;
                out.add_term(lower, s.scale(&Scalar::from_int(zm[x] as i64)));
            }
            if let Some(v) = self.linked_q(x) {
                out.add_term(zm.clone(), s.dz(v));
            }
        }
        Ok(out)
    }

    /// D_j for the divisor direction `j`, counted from 1.
    pub fn dz_derive(&self, j: usize) -> Result<Self> {
        if j == 0 || j > self.nq {
            return Err(Error::IndexOutOfRange {
                index: j,
                limit: self.nq,
            });
        }
        self.derive_z(self.offset + j - 1)
    }

    /// Set every z to zero.
    pub fn eval_z_zero(&self) -> Series<C> {
        self.series_part()
    }

    /// Multiply by a scalar series.
    pub fn mul_scalar_series(&self, s: &QSeries) -> Self {
        self.map_series(|c| c.mul_scalar_series(s))
    }
}

impl<C: RingCoefficient> LogPoly<C> {
    pub fn mul(&self, o: &Self) -> Self {
        self.same_layout(o);
        let mut out = Self::zero(self.nz, self.offset, self.nq, self.order);
        for (z1, s1) in &self.terms {
            for (z2, s2) in &o.terms {
                out.add_term(add_mono(z1, z2), s1.mul(s2));
            }
        }
        out
    }

    /// Multiply on the right by a z-free series.
    pub fn mul_series_right(&self, s: &Series<C>) -> Self {
        self.map_series(|c| c.mul(s))
    }

    /// Multiply on the left by a z-free series.
    pub fn mul_series_left(&self, s: &Series<C>) -> Self {
        self.map_series(|c| s.mul(c))
    }
}

impl fmt::Display for LogPoly<Scalar> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (zm, s) in &self.terms {
            let zs = mono_string("z", zm, if self.offset == 0 { 1 } else { 0 });
            for (m, c) in s.graded_terms() {
                let qs = mono_string("q", m, 1);
                let mono = match (zs.is_empty(), qs.is_empty()) {
                    (true, _) => qs,
                    (false, true) => zs.clone(),
                    (false, false) => format!("{}*{}", zs, qs),
                };
                terms.push(term_string(c, &mono));
            }
        }
        write!(f, "{}", join_terms(terms))
    }
}

/// Witness text for a z/q monomial pair.
fn witness(zm: &[u32], m: &[u32], offset: usize) -> String {
    let zs = mono_string("z", zm, if offset == 0 { 1 } else { 0 });
    let qs = mono_string("q", m, 1);
    match (zs.is_empty(), qs.is_empty()) {
        (true, true) => "1".into(),
        (true, false) => qs,
        (false, true) => zs,
        (false, false) => format!("{}*{}", zs, qs),
    }
}

fn first_term_witness<C: Coefficient>(p: &LogPoly<C>) -> String {
    for (zm, s) in &p.terms {
        if let Some((m, _)) = s.graded_terms().first() {
            return witness(zm, m, p.offset);
        }
    }
    "1".into()
}

/// Primitive F of the closed form Σ_j ω_j dz_j with F vanishing at the origin.
///
/// `omega[j-1]` is the coefficient of dz_j for divisor direction j. Terms
/// without q-dependence integrate by the radial homotopy, and a term with
/// q-exponent m ≠ 0 is integrated along a direction with m_j > 0 by inverting
/// ∂_j + τ m_j on polynomials. The result is checked against every ω_j.
pub fn integrate_closed_one_form<C: Coefficient>(omega: &[LogPoly<C>]) -> Result<LogPoly<C>> {
    let r = omega.len();
    if r == 0 {
        return Err(Error::ShapeMismatch("empty one-form".into()));
    }
    let proto = &omega[0];
    for w in omega {
        if w.nz != proto.nz || w.offset != proto.offset || w.nq != proto.nq || w.order != proto.order {
            return Err(Error::ShapeMismatch("one-form components disagree in layout".into()));
        }
    }
    if r != proto.nq {
        return Err(Error::ShapeMismatch(format!(
            "one-form has {} components for {} variables",
            r, proto.nq
        )));
    }

    for j in 0..r {
        for l in (j + 1)..r {
            let lhs = omega[j].dz_derive(l + 1)?;
            let rhs = omega[l].dz_derive(j + 1)?;
            let diff = lhs.sub(&rhs);
            if !diff.is_zero() {
                return Err(Error::NotClosed {
                    j: j + 1,
                    l: l + 1,
                    monomial: first_term_witness(&diff),
                });
            }
        }
    }

    // Regroup each ω_j by q-monomial: m -> (z-monomial -> coefficient).
    type Slice<C> = BTreeMap<Mono, BTreeMap<Mono, C>>;
    let mut by_q: Vec<Slice<C>> = vec![BTreeMap::new(); r];
    for (j, w) in omega.iter().enumerate() {
        for (zm, s) in &w.terms {
            for (m, c) in &s.terms {
                by_q[j]
                    .entry(m.clone())
                    .or_default()
                    .insert(zm.clone(), c.clone());
            }
        }
    }
    let mut qmonos: Vec<Mono> = by_q.iter().flat_map(|b| b.keys().cloned()).collect();
    qmonos.sort();
    qmonos.dedup();

    let tau = Scalar::tau();
    let dz_index = |j: usize| proto.offset + j;
    let mut out = LogPoly::zero(proto.nz, proto.offset, proto.nq, proto.order);

    for m in qmonos {
        let mut prim: BTreeMap<Mono, C> = BTreeMap::new();
        match m.iter().position(|&e| e > 0) {
            None => {
                // radial homotopy over the divisor z-variables
                for (j, slice) in by_q.iter().enumerate() {
                    if let Some(poly) = slice.get(&m) {
                        for (zm, c) in poly {
                            let deg: u32 = (0..r).map(|i| zm[dz_index(i)]).sum();
                            let mut up = zm.clone();
                            up[dz_index(j)] += 1;
                            let f = Scalar::from_ratio(1, deg as i64 + 1);
                            accumulate(&mut prim, up, c.scaled(&f));
                        }
                    }
                }
            }
            Some(j) => {
                // (∂_j + λ)P = ω_j with λ = τ m_j, so P = Σ (−∂_j)^n ω_j / λ^{n+1}
                let lambda = &tau * &Scalar::from_int(m[j] as i64);
                let lambda_inv = lambda.inv().expect("nonzero");
                let x = dz_index(j);
                let mut cur: BTreeMap<Mono, C> = by_q[j].get(&m).cloned().unwrap_or_default();
                let mut factor = lambda_inv.clone();
                while !cur.is_empty() {
                    for (zm, c) in &cur {
                        accumulate(&mut prim, zm.clone(), c.scaled(&factor));
                    }
                    let mut next = BTreeMap::new();
                    for (zm, c) in &cur {
                        if zm[x] > 0 {
                            let mut lower = zm.clone();
                            lower[x] -= 1;
                            accumulate(&mut next, lower, c.scaled(&Scalar::from_int(-(zm[x] as i64))));
                        }
                    }
                    cur = next;
                    factor = &factor * &lambda_inv;
                }
            }
        }
        for (zm, c) in prim {
            out.add_term(zm, Series::monomial(proto.nq, proto.order, m.clone(), c));
        }
    }

    for (j, w) in omega.iter().enumerate() {
        let diff = out.dz_derive(j + 1)?.sub(w);
        if !diff.is_zero() {
            return Err(Error::InconsistentPrimitive {
                component: j + 1,
                monomial: first_term_witness(&diff),
            });
        }
    }
    Ok(out)
}
