//! The connection ∇_j = D_j + (T_j ·_q) defined by a quantum potential: flatness,
//! residues, monodromy, the flat and canonical frames, and the certificate
//! that the resulting variation is polarized and matches the Γ-tower.

use std::fmt;

use crate::correspondence::{gamma1_from_potential, reconstruct_gamma, vector_string};
use crate::error::{Error, Result};
use crate::frobenius::{basis_name, q_form, FrobeniusModule};
use crate::matrix::{mat_entry, MatSeries, Matrix};
use crate::potential::{
    quantum_matrix_with, scan_commutator, validate_potential, CommutationVerdict, QuantumPotential, ThirdPartials,
};
use crate::report::Certificate;
use crate::scalar::Scalar;
use crate::series::{mono_string, total_degree, LogPoly, Mono, QSeries};

fn connection_matrices(phi: &QuantumPotential) -> Result<Vec<MatSeries>> {
    let rep = validate_potential(phi);
    if let Some(item) = rep.first_failure() {
        return Err(Error::ShapeMismatch(format!(
            "{}: {}",
            item.name,
            item.witness.clone().unwrap_or_default()
        )));
    }
    let mut third = ThirdPartials::new(phi)?;
    (1..=phi.module().r())
        .map(|j| quantum_matrix_with(phi, &mut third, j))
        .collect()
}

/// res_{q_j=0}∇ = τ⁻¹ · (T_j ·_q)|_{q=0}.
pub fn residue(phi: &QuantumPotential, j: usize) -> Result<Matrix> {
    let m = phi.module();
    if j == 0 || j > m.r() {
        return Err(Error::NotDivisorIndex(j));
    }
    let a = &connection_matrices(phi)?[j - 1];
    let n = m.rank();
    let at_zero = a.constant_term().cloned().unwrap_or_else(|| Matrix::zeros(n, n));
    Ok(at_zero.scale(&Scalar::tau_pow(-1)))
}

/// [∇_j, ∇_l] = D_jA_l − D_lA_j + [A_j, A_l] for all j < l.
pub fn curvature_check(phi: &QuantumPotential) -> Result<CommutationVerdict> {
    let a = connection_matrices(phi)?;
    let m = phi.module();
    let mut violations = Vec::new();
    for j in 1..=m.r() {
        for l in j + 1..=m.r() {
            let (aj, al) = (&a[j - 1], &a[l - 1]);
            let curv = al
                .dz_derive(j)?
                .sub(&aj.dz_derive(l)?)
                .add(&aj.mul(al))
                .sub(&al.mul(aj));
            scan_commutator(j, l, &curv, m.rank(), &mut violations);
        }
    }
    Ok(CommutationVerdict {
        order: phi.order(),
        violations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameKind {
    /// Columns Y·exp(−Σ z_jN_j).
    Flat,
    /// Columns of Y itself, single-valued.
    Canonical,
}

/// A frame written as Y(q) with the nilpotent twist it carries.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameExpansion {
    pub kind: FrameKind,
    pub y: MatSeries,
    pub ns: Vec<Matrix>,
}

/// exp(s·Σ z_jN_j) as a polynomial in the z's.
fn twist(ns: &[Matrix], r: usize, order: u32, sign: i64) -> LogPoly<Matrix> {
    let n = ns.first().map_or(0, Matrix::rows);
    let mut x = LogPoly::zero(r, 0, r, order);
    for (j, nj) in ns.iter().enumerate() {
        let mut zm = vec![0; r];
        zm[j] = 1;
        x.add_term(zm, MatSeries::constant(r, order, nj.scale(&Scalar::from_int(sign))));
    }
    let mut acc = LogPoly::from_series(r, 0, MatSeries::constant(r, order, Matrix::identity(n)));
    let mut term = acc.clone();
    for i in 1..=(n as i64 + 1) {
        term = term.mul(&x).scale(&Scalar::from_ratio(1, i));
        if term.is_zero() {
            break;
        }
        acc = acc.add(&term);
    }
    acc
}

impl FrameExpansion {
    pub fn rank(&self) -> usize {
        self.ns.first().map_or_else(
            || self.y.terms().next().map_or(0, |(_, c)| c.rows()),
            Matrix::rows,
        )
    }

    /// The full frame matrix including its logarithmic part.
    pub fn matrix(&self) -> LogPoly<Matrix> {
        let r = self.y.nvars();
        let order = self.y.order();
        let y = LogPoly::from_series(r, 0, self.y.clone());
        match self.kind {
            FrameKind::Canonical => y,
            FrameKind::Flat => y.mul(&twist(&self.ns, r, order, -1)),
        }
    }

    /// Column a of Y as a vector of series.
    pub fn column(&self, a: usize) -> Vec<QSeries> {
        (0..self.rank()).map(|c| mat_entry(&self.y, c, a)).collect()
    }

    pub fn lines(&self) -> Vec<String> {
        let name = match self.kind {
            FrameKind::Flat => "Y",
            FrameKind::Canonical => "canonical",
        };
        (0..self.rank())
            .map(|a| format!("{}({}) = {}", name, basis_name(a), vector_string(&self.column(a))))
            .collect()
    }
}

impl fmt::Display for FrameExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.lines().join("\n"))
    }
}

/// All exponent vectors in r variables of total degree 1..=order, graded.
fn monomials(r: usize, order: u32) -> Vec<Mono> {
    let mut out: Vec<Mono> = vec![vec![0; r]];
    for v in 0..r {
        let mut next = Vec::new();
        for m in &out {
            for e in 0..=order - total_degree(m) {
                let mut m2 = m.clone();
                m2[v] = e;
                next.push(m2);
            }
        }
        out = next;
    }
    out.retain(|m| total_degree(m) > 0);
    out.sort_by(|a, b| total_degree(a).cmp(&total_degree(b)).then(a.cmp(b)));
    out
}

/// Residual D_jY − [Y, N_j] + B_jY of the frame equation, B_j = A_j − N_j.
fn frame_equation(y: &MatSeries, a: &MatSeries, nj: &Matrix, j: usize) -> Result<MatSeries> {
    let comm = y.map(|c| c.commutator(nj));
    let b = a.sub(&MatSeries::constant(y.nvars(), y.order(), nj.clone()));
    Ok(y.dz_derive(j)?.sub(&comm).add(&b.mul(y)))
}

/// Y with Y(0) = Id solving D_jY = [Y, N_j] − B_jY, so that Y·exp(−Σz_jN_j) is ∇-flat.
pub fn flat_frame(phi: &QuantumPotential, order: u32) -> Result<FrameExpansion> {
    let m = phi.module();
    let n = m.rank();
    let r = m.r();
    let a: Vec<MatSeries> = connection_matrices(phi)?.into_iter().map(|s| s.with_order(order)).collect();
    let ns = m.products().to_vec();
    let b: Vec<MatSeries> = a
        .iter()
        .zip(&ns)
        .map(|(aj, nj)| aj.sub(&MatSeries::constant(r, order, nj.clone())))
        .collect();

    let mut y = MatSeries::constant(r, order, Matrix::identity(n));
    for mono in monomials(r, order) {
        let j = mono.iter().position(|&e| e > 0).expect("nonconstant monomial");
        // (B_jY) at this monomial, from strictly lower terms of Y
        let mut rhs = Matrix::zeros(n, n);
        for (m1, c1) in b[j].terms() {
            if m1.iter().zip(&mono).all(|(x, y)| x <= y) {
                let rest: Mono = mono.iter().zip(m1).map(|(x, y)| x - y).collect();
                if let Some(c2) = y.coeff(&rest) {
                    rhs = rhs.add(&c1.mul(c2));
                }
            }
        }
        if rhs.is_zero() {
            continue;
        }
        let rhs = rhs.neg();
        // (λ − ad_{N_j}) Y_m = rhs with λ = τ m_j; ad is nilpotent
        let inv = (&Scalar::tau() * &Scalar::from_int(mono[j] as i64)).inv().expect("nonzero");
        let mut term = rhs.scale(&inv);
        let mut sol = term.clone();
        for _ in 0..(2 * n + 1) {
            term = term.commutator(&ns[j]).scale(&inv);
            if term.is_zero() {
                break;
            }
            sol = sol.add(&term);
        }
        y.add_term(mono, sol);
    }

    for j in 1..=r {
        let res = frame_equation(&y, &a[j - 1], &ns[j - 1], j)?;
        if let Some((mono, _)) = res.graded_terms().first() {
            return Err(Error::NotFlat(format!(
                "direction {} at {}",
                j,
                mono_string("q", mono, 1)
            )));
        }
    }
    Ok(FrameExpansion {
        kind: FrameKind::Flat,
        y,
        ns,
    })
}

/// ∇_j applied to the full frame matrix, one residual per direction.
pub fn connection_residuals(phi: &QuantumPotential, frame: &FrameExpansion) -> Result<Vec<LogPoly<Matrix>>> {
    let order = frame.y.order();
    let a = connection_matrices(phi)?;
    let f = frame.matrix();
    (1..=phi.module().r())
        .map(|j| {
            let aj = a[j - 1].with_order(order);
            Ok(f.dz_derive(j)?.add(&f.mul_series_left(&aj)))
        })
        .collect()
}

/// Y·exp(−Σz_jN_j)·exp(Σz_jN_j), asserted free of logarithms.
pub fn canonical_frame(phi: &QuantumPotential, order: u32) -> Result<FrameExpansion> {
    let flat = flat_frame(phi, order)?;
    let r = phi.module().r();
    let product = flat.matrix().mul(&twist(&flat.ns, r, order, 1));
    let y = product
        .as_series()
        .ok_or_else(|| Error::LogPartNonzero(format!("{:?}", product.log_part())))?;
    Ok(FrameExpansion {
        kind: FrameKind::Canonical,
        y,
        ns: flat.ns,
    })
}

/// Monodromy around q_j = 0 in the flat frame and its logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct Monodromy {
    pub matrix: Matrix,
    pub log: Matrix,
}

/// M_j = exp(−L_{T_j}) and N_j = −log M_j.
pub fn monodromy(m: &FrobeniusModule, j: usize) -> Result<Monodromy> {
    let l = m.product(j)?;
    let matrix = l.neg().exp_nilpotent()?;
    let log = matrix.log_unipotent()?.neg();
    Ok(Monodromy { matrix, log })
}

/// Substitute z_x ↦ z_x + 1.
fn shift_z(p: &LogPoly<Matrix>, x: usize) -> LogPoly<Matrix> {
    let mut out = LogPoly::zero(p.nz(), p.offset(), p.nq(), p.order());
    for (zm, s) in p.terms() {
        let e = zm[x];
        let mut binom = Scalar::one();
        for i in 0..=e {
            // C(e, i) z_x^{e−i}
            let mut lower = zm.clone();
            lower[x] = e - i;
            out.add_term(lower, s.scale(&binom));
            binom = &(&binom * &Scalar::from_int((e - i) as i64)) / &Scalar::from_int(i as i64 + 1);
        }
    }
    out
}

/// Monodromy read off the flat frame itself, with the matrix of its
/// logarithm on the canonical frame.
pub fn frame_monodromy(flat: &FrameExpansion, j: usize) -> Result<(Monodromy, Matrix)> {
    let f = flat.matrix();
    let r = f.nq();
    if j == 0 || j > r {
        return Err(Error::NotDivisorIndex(j));
    }
    let n = flat.rank();
    let moved = shift_z(&f, j - 1);
    let matrix = moved
        .eval_z_zero()
        .constant_term()
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(n, n));
    let expected = f.mul_series_right(&MatSeries::constant(r, f.order(), matrix.clone()));
    if moved != expected {
        return Err(Error::NotFlat(format!("continuation around q{} is not a constant change of frame", j)));
    }
    let log = matrix.log_unipotent()?.neg();
    // N acts on flat sections by F ↦ F·log; on the canonical frame C = F·E this is E⁻¹·log·E
    let order = f.order();
    let conj = twist(&flat.ns, r, order, -1)
        .mul(&LogPoly::from_series(r, 0, MatSeries::constant(r, order, log.clone())))
        .mul(&twist(&flat.ns, r, order, 1));
    let on_canonical = conj
        .as_series()
        .and_then(|s| {
            if s.terms().all(|(mono, _)| total_degree(mono) == 0) {
                Some(s.constant_term().cloned().unwrap_or_else(|| Matrix::zeros(n, n)))
            } else {
                None
            }
        })
        .ok_or_else(|| Error::Internal("monodromy logarithm is not constant on the canonical frame".into()))?;
    Ok((Monodromy { matrix, log }, on_canonical))
}

/// Move a potential-layout polynomial in the divisor z's to frame layout.
fn to_frame_layout(p: &LogPoly<Scalar>, r: usize) -> Result<LogPoly<Scalar>> {
    let mut out = LogPoly::zero(r, 0, r, p.order());
    for (zm, s) in p.terms() {
        if zm.iter().enumerate().any(|(x, &e)| e > 0 && (x == 0 || x > r)) {
            return Err(Error::Internal("unexpected non-divisor variable".into()));
        }
        out.add_term(zm[1..=r].to_vec(), s.clone());
    }
    Ok(out)
}

fn mod_degree_witness(
    actual: &[LogPoly<Scalar>],
    expected: &[LogPoly<Scalar>],
    degrees: &[u32],
    bound: Option<u32>,
) -> Option<String> {
    for (c, (x, e)) in actual.iter().zip(expected).enumerate() {
        if bound.map_or(false, |b| degrees[c] > b) {
            continue;
        }
        if x != e {
            return Some(format!("component {}: got {} expected {}", basis_name(c), x, e));
        }
    }
    None
}

/// Column a of the frame matrix as z-polynomials.
fn frame_column(f: &LogPoly<Matrix>, a: usize, n: usize) -> Vec<LogPoly<Scalar>> {
    (0..n)
        .map(|c| f.map_series(|s| {
            let mut out = QSeries::zero(s.nvars(), s.order());
            for (mono, mat) in s.terms() {
                out.add_term(mono.clone(), mat.get(c, a).clone());
            }
            out
        }))
        .collect()
}

/// Check the closed-form descriptions of the leading components of the flat
/// and canonical frames.
pub fn verify_frame_lemmas(phi: &QuantumPotential, order: u32) -> Result<Certificate> {
    let m = phi.module();
    let n = m.rank();
    let r = m.r();
    let k = m.k();
    let degrees = m.degrees().to_vec();
    let flat = flat_frame(phi, order)?;
    let canonical = canonical_frame(phi, order)?;
    let f = flat.matrix();
    let cmat = canonical.matrix();
    let full = phi.full_poly();
    let zero_poly = LogPoly::zero(r, 0, r, order);
    let unit = |a: usize| -> Vec<LogPoly<Scalar>> {
        (0..n)
            .map(|c| {
                if c == a {
                    LogPoly::from_series(r, 0, QSeries::constant(r, order, Scalar::one()))
                } else {
                    zero_poly.clone()
                }
            })
            .collect()
    };
    let series_poly = |s: QSeries| LogPoly::from_series(r, 0, s.with_order(order));
    let mut cert = Certificate::new();

    for a in 0..n {
        let da = degrees[a];
        let col = frame_column(&f, a, n);
        cert.record(
            format!("flat-normalization[{}]", basis_name(a)),
            mod_degree_witness(&col, &unit(a), &degrees, Some(da)),
        );
        let mut expected = unit(a);
        for c in 0..n {
            if degrees[c] == da + 2 {
                let p = full.derive_z(a)?.derive_z(m.delta(c))?;
                expected[c] = expected[c].sub(&to_frame_layout(&p, r)?.with_order_poly(order));
            }
        }
        cert.record(
            format!("flat-second[{}]", basis_name(a)),
            mod_degree_witness(&col, &expected, &degrees, Some(da + 2)),
        );
        let ccol = frame_column(&cmat, a, n);
        cert.record(
            format!("canonical-normalization[{}]", basis_name(a)),
            mod_degree_witness(&ccol, &unit(a), &degrees, Some(da)),
        );
    }

    if k > 3 {
        let top = m.indices_of_degree(2 * k)[0];
        let zero_series = QSeries::zero(r, order);
        for a in 0..n {
            let da = degrees[a];
            let ccol = frame_column(&cmat, a, n);
            let mut expected = unit(a);
            let (name, bound) = if da >= 2 * k - 2 {
                ("canonical-top", None)
            } else if da == 2 * k - 4 {
                let pa = phi.phi_a().get(&a).cloned().unwrap_or_else(|| zero_series.clone());
                for c in 0..n {
                    if degrees[c] == da + 2 {
                        expected[c] = expected[c].sub(&series_poly(pa.dz_derive(m.delta(c))?));
                    }
                }
                expected[top] = expected[top].add(&series_poly(pa));
                ("canonical-codim2", None)
            } else if da > 2 {
                for c in 0..n {
                    if degrees[c] == da + 2 {
                        let s = phi
                            .phi_ab()
                            .get(&(a, m.delta(c)))
                            .cloned()
                            .unwrap_or_else(|| zero_series.clone());
                        expected[c] = expected[c].sub(&series_poly(s.scale(&Scalar::from_int(2))));
                    }
                }
                ("canonical-middle", Some(da + 2))
            } else if da == 2 {
                for c in 0..n {
                    if degrees[c] == da + 2 {
                        let s = phi
                            .phi_a()
                            .get(&m.delta(c))
                            .cloned()
                            .unwrap_or_else(|| zero_series.clone());
                        expected[c] = expected[c].sub(&series_poly(s.dz_derive(a)?));
                    }
                }
                ("canonical-divisor", Some(da + 2))
            } else {
                ("canonical-unit", Some(da + 2))
            };
            cert.record(
                format!("{}[{}]", name, basis_name(a)),
                mod_degree_witness(&ccol, &expected, &degrees, bound),
            );
        }
    }
    Ok(cert)
}

trait WithOrderPoly {
    fn with_order_poly(&self, order: u32) -> Self;
}

impl WithOrderPoly for LogPoly<Scalar> {
    fn with_order_poly(&self, order: u32) -> Self {
        let mut out = LogPoly::zero(self.nz(), self.offset(), self.nq(), order);
        for (zm, s) in self.terms() {
            out.add_term(zm.clone(), s.with_order(order));
        }
        out
    }
}

fn first_series_witness(p: &LogPoly<Matrix>) -> Option<String> {
    p.terms().next().map(|(zm, s)| {
        let q = s
            .graded_terms()
            .first()
            .map(|(mono, _)| mono_string("q", mono, 1))
            .unwrap_or_default();
        format!("z-exponent {:?}, {}", zm, if q.is_empty() { "1".into() } else { q })
    })
}

/// Pairing flatness, formal transversality, real structure and agreement
/// with the Γ-tower, as exact identities up to the given order.
pub fn pvhs_certificate(phi: &QuantumPotential, order: u32) -> Result<Certificate> {
    let m = phi.module();
    let r = m.r();
    let degrees = m.degrees().to_vec();
    let a: Vec<MatSeries> = connection_matrices(phi)?.into_iter().map(|s| s.with_order(order)).collect();
    let mut cert = Certificate::new();

    let flat = match flat_frame(phi, order) {
        Ok(f) => Some(f),
        Err(e) => {
            cert.fail("flat-frame", e.to_string());
            None
        }
    };

    // (a) Q(σ_a, σ_b) constant on flat columns
    if let Some(flat) = &flat {
        let q = q_form(m);
        let f = flat.matrix();
        let ft = f.map_series(|s| s.map(Matrix::transpose));
        let gram = ft
            .mul_series_right(&MatSeries::constant(r, order, q.clone()))
            .mul(&f);
        let witness = if gram.as_series().map_or(false, |s| s == MatSeries::constant(r, order, q.clone())) {
            None
        } else {
            Some(first_series_witness(&gram.sub(&LogPoly::from_series(r, 0, MatSeries::constant(r, order, q)))).unwrap_or_default())
        };
        cert.record("pairing-flat", witness);
    }

    // (b) ∇_j F^p ⊂ F^{p−1} on the constant frame
    let mut transversal = None;
    'outer: for (j, aj) in a.iter().enumerate() {
        for (mono, c) in aj.graded_terms() {
            for (i, col, v) in c.entries() {
                if !v.is_zero() && degrees[i] > degrees[col] + 2 {
                    transversal = Some(format!(
                        "direction {} sends {} to {} at {}",
                        j + 1,
                        basis_name(col),
                        basis_name(i),
                        mono_string("q", mono, 1)
                    ));
                    break 'outer;
                }
            }
        }
    }
    cert.record("transversality", transversal);

    // (c) real structure: σ̃_v = Y·v is flat for ∇ − N with N acting through
    // the frame, and the sections generated by it have rational monodromy and
    // a rational constant polarization
    if let Some(flat) = &flat {
        let mut bad = None;
        for j in 1..=r {
            let res = frame_equation(&flat.y, &a[j - 1], &flat.ns[j - 1], j)?;
            if let Some((mono, _)) = res.graded_terms().first() {
                bad = Some(format!("direction {} at {}", j, mono_string("q", mono, 1)));
                break;
            }
        }
        cert.record("real-frame-flat", bad);
        let mut monodromy_bad = None;
        for j in 1..=r {
            match frame_monodromy(flat, j) {
                Ok((mono, _)) if mono.matrix.is_tau_free() && mono.matrix.conj() == mono.matrix => {}
                Ok(_) => {
                    monodromy_bad = Some(format!("monodromy around q{} is not rational", j));
                    break;
                }
                Err(e) => {
                    monodromy_bad = Some(e.to_string());
                    break;
                }
            }
        }
        cert.record("real-monodromy", monodromy_bad);
        let q = q_form(m);
        cert.record(
            "real-polarization",
            (!q.is_tau_free()).then(|| "polarization involves tau".to_string()),
        );
    }

    // (d) canonical frame = exp(−Γ)
    let agreement = (|| -> Result<Option<String>> {
        let canonical = canonical_frame(phi, order)?;
        let gamma1 = gamma1_from_potential(phi)?;
        let tower = reconstruct_gamma(m, &gamma1, order)?;
        let expected = tower.exp_neg();
        if canonical.y == expected {
            Ok(None)
        } else {
            let diff = canonical.y.sub(&expected);
            let (mono, c) = diff.graded_terms()[0];
            let (i, j, _) = c.entries().find(|(_, _, v)| !v.is_zero()).unwrap();
            Ok(Some(format!(
                "entry ({}, {}) differs at {}",
                basis_name(i),
                basis_name(j),
                mono_string("q", mono, 1)
            )))
        }
    })();
    match agreement {
        Ok(w) => cert.record("frame-agreement", w),
        Err(e) => cert.fail("frame-agreement", e.to_string()),
    }
    Ok(cert)
}
