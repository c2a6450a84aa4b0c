//! Potential ↔ Γ-tower: Γ₋₁ from a potential, the integrability check, the
//! graded reconstruction of the full tower, and extraction of a potential
//! back from a canonical tower.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::frobenius::{basis_name, q_defect, q_form, FrobeniusModule};
use crate::matrix::{mat_constant, mat_entry, mat_exp, mat_from_entries, mat_log, MatSeries, Matrix};
use crate::potential::{scan_commutator, wdvv_check, CommutationVerdict, QuantumPotential};
use crate::report::Certificate;
use crate::scalar::Scalar;
use crate::series::{integrate_closed_one_form, join_terms, LogPoly, QSeries};

/// Γ₋₁, …, Γ₋ₖ; Γ₋ℓ raises degree by 2ℓ and vanishes at q = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaTower {
    n: usize,
    r: usize,
    order: u32,
    levels: Vec<MatSeries>,
}

impl GammaTower {
    pub fn new(n: usize, r: usize, order: u32, levels: Vec<MatSeries>) -> Result<Self> {
        for (i, g) in levels.iter().enumerate() {
            if g.nvars() != r || g.order() != order {
                return Err(Error::ShapeMismatch(format!("level {} has the wrong series layout", i + 1)));
            }
            if let Some((_, c)) = g.terms().next() {
                if c.rows() != n || c.cols() != n {
                    return Err(Error::ShapeMismatch(format!("level {} is not {}x{}", i + 1, n, n)));
                }
            }
        }
        Ok(GammaTower { n, r, order, levels })
    }

    pub fn zero(m: &FrobeniusModule, order: u32) -> Self {
        GammaTower {
            n: m.rank(),
            r: m.r(),
            order,
            levels: vec![MatSeries::zero(m.r(), order); m.k() as usize],
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Γ₋ℓ for ℓ counted from 1; zero beyond the stored depth.
    pub fn level(&self, l: usize) -> MatSeries {
        self.levels
            .get(l.wrapping_sub(1))
            .cloned()
            .unwrap_or_else(|| MatSeries::zero(self.r, self.order))
    }

    pub fn levels(&self) -> &[MatSeries] {
        &self.levels
    }

    /// Γ = Σ Γ₋ℓ.
    pub fn total(&self) -> MatSeries {
        self.levels
            .iter()
            .fold(MatSeries::zero(self.r, self.order), |acc, g| acc.add(g))
    }

    /// exp(−Γ) as a matrix series.
    pub fn exp_neg(&self) -> MatSeries {
        mat_exp(&self.total().neg(), self.n)
    }

    /// Nonzero images Γ₋ℓ(T_a), one line each.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, g) in self.levels.iter().enumerate() {
            for a in 0..self.n {
                let image: Vec<QSeries> = (0..self.n).map(|c| mat_entry(g, c, a)).collect();
                if image.iter().all(QSeries::is_zero) {
                    continue;
                }
                out.push(format!("gamma[-{}]({}) = {}", i + 1, basis_name(a), vector_string(&image)));
            }
        }
        out
    }
}

impl fmt::Display for GammaTower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines = self.lines();
        if lines.is_empty() {
            return write!(f, "gamma = 0");
        }
        write!(f, "{}", lines.join("\n"))
    }
}

/// Σ s_c T_c with series coefficients.
pub fn vector_string(coeffs: &[QSeries]) -> String {
    let terms: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_zero())
        .map(|(c, s)| {
            let body = s.to_string();
            let name = basis_name(c);
            if s.len() == 1 {
                match body.strip_prefix('-') {
                    Some(rest) if rest == "1" => format!("-{}", name),
                    Some(rest) => format!("-{}*{}", rest, name),
                    None if body == "1" => name,
                    None => format!("{}*{}", body, name),
                }
            } else {
                format!("({})*{}", body, name)
            }
        })
        .collect();
    join_terms(terms)
}

/// Γ₋₁(T_a) = Σ_{ã(c)=ã(a)+2} ∂²φ_ħ/∂z_a∂z_{δ(c)} T_c.
pub fn gamma1_from_potential(phi: &QuantumPotential) -> Result<MatSeries> {
    let m = phi.module();
    let n = m.rank();
    let report = crate::potential::validate_potential(phi);
    if let Some(item) = report.first_failure() {
        return Err(Error::ShapeMismatch(format!(
            "{}: {}",
            item.name,
            item.witness.clone().unwrap_or_default()
        )));
    }
    let mut entries = BTreeMap::new();
    for a in 0..n {
        for c in 0..n {
            if m.degree(c) == m.degree(a) + 2 {
                let s = phi.second_partial(a, m.delta(c))?;
                if !s.is_zero() {
                    entries.insert((c, a), s);
                }
            }
        }
    }
    let zero = QSeries::zero(m.r(), phi.order());
    Ok(mat_from_entries(n, m.r(), phi.order(), |c, a| {
        entries.get(&(c, a)).cloned().unwrap_or_else(|| zero.clone())
    }))
}

fn check_layout(m: &FrobeniusModule, g: &MatSeries) -> Result<()> {
    if g.nvars() != m.r() {
        return Err(Error::ShapeMismatch(format!(
            "series in {} variables for a framing of size {}",
            g.nvars(),
            m.r()
        )));
    }
    if let Some((_, c)) = g.terms().next() {
        if c.rows() != m.rank() || c.cols() != m.rank() {
            return Err(Error::ShapeMismatch("endomorphism of the wrong size".into()));
        }
    }
    Ok(())
}

/// D_jX₋₁ for each framing direction, X₋₁ = Σ z_jN_j + Γ₋₁.
fn connection_forms(m: &FrobeniusModule, gamma1: &MatSeries) -> Result<Vec<MatSeries>> {
    (1..=m.r())
        .map(|j| {
            let nj = mat_constant(m.r(), gamma1.order(), m.product(j)?.clone());
            Ok(nj.add(&gamma1.dz_derive(j)?))
        })
        .collect()
}

/// D_jX₋₁ · D_lX₋₁ = D_lX₋₁ · D_jX₋₁ for all j < l.
pub fn integrability_check(m: &FrobeniusModule, gamma1: &MatSeries) -> Result<CommutationVerdict> {
    check_layout(m, gamma1)?;
    let forms = connection_forms(m, gamma1)?;
    let mut violations = Vec::new();
    for j in 1..=m.r() {
        for l in j + 1..=m.r() {
            let c = forms[j - 1].mul(&forms[l - 1]).sub(&forms[l - 1].mul(&forms[j - 1]));
            scan_commutator(j, l, &c, m.rank(), &mut violations);
        }
    }
    Ok(CommutationVerdict {
        order: gamma1.order(),
        violations,
    })
}

/// Keep only the entries raising degree by exactly 2ℓ.
fn graded_piece(m: &FrobeniusModule, g: &MatSeries, l: usize) -> MatSeries {
    let n = m.rank();
    let shift = 2 * l as u32;
    g.map(|c| {
        Matrix::from_fn(n, n, |i, a| {
            if m.degree(i) == m.degree(a) + shift {
                c.get(i, a).clone()
            } else {
                Scalar::zero()
            }
        })
    })
}

fn as_log_poly(g: &MatSeries) -> LogPoly<Matrix> {
    LogPoly::from_series(g.nvars(), 0, g.clone())
}

/// The full tower determined by Γ₋₁ through dG₋ℓ = [G₋ℓ₊₁, Θ] + G₋ℓ₊₁dΓ₋₁
/// with G = exp Γ and G(0) = Id.
pub fn reconstruct_gamma(m: &FrobeniusModule, gamma1: &MatSeries, order: u32) -> Result<GammaTower> {
    m.ensure_valid()?;
    check_layout(m, gamma1)?;
    let gamma1 = gamma1.with_order(order);
    let verdict = integrability_check(m, &gamma1)?;
    if let Some(w) = verdict.first() {
        return Err(Error::NotIntegrable(w.to_string()));
    }
    let n = m.rank();
    let r = m.r();
    let k = m.k() as usize;
    if !gamma1.vanishes_at_zero() {
        return Err(Error::ShapeMismatch("gamma[-1] does not vanish at q = 0".into()));
    }
    let b: Vec<MatSeries> = (1..=r).map(|j| gamma1.dz_derive(j)).collect::<Result<_>>()?;
    let ns: Vec<Matrix> = m.products().to_vec();

    let mut g_levels = vec![gamma1.clone()];
    for l in 2..=k {
        let prev = &g_levels[l - 2];
        let omega: Vec<LogPoly<Matrix>> = (0..r)
            .map(|j| {
                let comm = prev.map(|c| c.commutator(&ns[j]));
                as_log_poly(&comm.add(&prev.mul(&b[j])))
            })
            .collect();
        let primitive = integrate_closed_one_form(&omega).map_err(|e| match e {
            Error::NotClosed { .. } => Error::NotIntegrable(format!("level {}: {}", l, e)),
            other => other,
        })?;
        if !primitive.log_part().is_zero() {
            return Err(Error::LogPartNonzero(format!("level {}: {:?}", l, primitive.log_part())));
        }
        let g = primitive.series_part();
        if !g.vanishes_at_zero() {
            return Err(Error::Internal(format!("level {} has a constant term", l)));
        }
        g_levels.push(g);
    }

    let mut g_total = MatSeries::constant(r, order, Matrix::identity(n));
    for g in &g_levels {
        g_total = g_total.add(g);
    }
    let log = mat_log(&g_total, n);
    let levels = (1..=k).map(|l| graded_piece(m, &log, l)).collect();
    GammaTower::new(n, r, order, levels)
}

/// True when every Γ₋ℓ kills V_{2k−2}.
pub fn canonical_check(m: &FrobeniusModule, tower: &GammaTower) -> bool {
    let top = m.indices_of_degree(2 * m.k() - 2);
    tower.levels().iter().all(|g| {
        g.terms()
            .all(|(_, c)| top.iter().all(|&a| (0..m.rank()).all(|i| c.get(i, a).is_zero())))
    })
}

/// φ^{ab} = ½B(Γ₋₁T_a, T_b) and φ^a = B(−Γ₋₂T_a, T₀); in weight 3 the single
/// series is integrated from B(−Γ₋₂T_j, T₀) = D_jφ_ħ.
pub fn potential_from_gamma(m: &FrobeniusModule, tower: &GammaTower) -> Result<QuantumPotential> {
    m.ensure_valid()?;
    if !canonical_check(m, tower) {
        return Err(Error::NotCanonical("gamma does not vanish on the top divisor-dual degree".into()));
    }
    let k = m.k();
    let n = m.rank();
    let r = m.r();
    let order = tower.order();
    let b = m.pairing();
    // B(X T_a, T_b) as a series
    let pair = |x: &MatSeries, a: usize, bb: usize| -> QSeries {
        let mut s = QSeries::zero(r, order);
        for (mono, c) in x.terms() {
            let mut v = Scalar::zero();
            for i in 0..n {
                let xa = c.get(i, a);
                if !xa.is_zero() {
                    v += &(xa * b.get(i, bb));
                }
            }
            s.add_term(mono.clone(), v);
        }
        s
    };
    let g1 = tower.level(1);
    let g2 = tower.level(2);
    let half = Scalar::from_ratio(1, 2);

    if k == 3 {
        let omega: Vec<LogPoly<Scalar>> = (1..=r)
            .map(|j| LogPoly::from_series(r, 0, pair(&g2, j, 0).neg()))
            .collect();
        let primitive = integrate_closed_one_form(&omega)
            .map_err(|e| Error::IntegrationInconsistent(e.to_string()))?;
        if !primitive.log_part().is_zero() {
            return Err(Error::IntegrationInconsistent(
                "primitive of B(-gamma[-2] T_j, T0) has a logarithmic part".into(),
            ));
        }
        let series = primitive.series_part();
        let series = if series.is_zero() { None } else { Some(series) };
        return QuantumPotential::new(m.clone(), order, BTreeMap::new(), BTreeMap::new(), series);
    }

    let mut phi_a = BTreeMap::new();
    for a in m.indices_of_degree(2 * k - 4) {
        let s = pair(&g2, a, 0).neg();
        if !s.is_zero() {
            phi_a.insert(a, s);
        }
    }
    let mut phi_ab = BTreeMap::new();
    for a in 0..n {
        let da = m.degree(a);
        if da <= 2 || da >= 2 * k - 4 {
            continue;
        }
        for bb in m.indices_of_degree(2 * k - 2 - da) {
            let s = pair(&g1, a, bb).scale(&half);
            if !s.is_zero() {
                phi_ab.insert((a, bb), s);
            }
        }
    }
    QuantumPotential::new(m.clone(), order, phi_a, phi_ab, None)
}

/// Both composites of the correspondence, with the intermediate tower.
#[derive(Clone, Debug)]
pub struct RoundTrip {
    pub tower: GammaTower,
    pub recovered: QuantumPotential,
    pub potential_matches: bool,
    pub gamma_matches: bool,
}

impl RoundTrip {
    pub fn passed(&self) -> bool {
        self.potential_matches && self.gamma_matches
    }

    pub fn to_certificate(&self) -> Certificate {
        let mut c = Certificate::new();
        c.record(
            "potential-round-trip",
            (!self.potential_matches).then(|| "recovered potential differs from the input".to_string()),
        );
        c.record(
            "gamma-round-trip",
            (!self.gamma_matches).then(|| "gamma[-1] of the recovered potential differs".to_string()),
        );
        c
    }
}

/// Potential → Γ₋₁ → tower → potential → Γ₋₁, comparing at each end.
pub fn round_trip(phi: &QuantumPotential, order: u32) -> Result<RoundTrip> {
    let verdict = wdvv_check(phi)?;
    if let Some(w) = verdict.first() {
        return Err(Error::NotIntegrable(w.to_string()));
    }
    let m = phi.module();
    let gamma1 = gamma1_from_potential(phi)?;
    let tower = reconstruct_gamma(m, &gamma1, order)?;
    let recovered = potential_from_gamma(m, &tower)?;
    let potential_matches = same_corrections(phi, &recovered, order);
    let gamma_matches = gamma1_from_potential(&recovered)? == gamma1.with_order(order);
    Ok(RoundTrip {
        tower,
        recovered,
        potential_matches,
        gamma_matches,
    })
}

fn same_corrections(a: &QuantumPotential, b: &QuantumPotential, order: u32) -> bool {
    let norm = |s: &QSeries| s.with_order(order);
    let la: BTreeMap<_, _> = a.phi_a().iter().map(|(k, s)| (*k, norm(s))).filter(|(_, s)| !s.is_zero()).collect();
    let lb: BTreeMap<_, _> = b.phi_a().iter().map(|(k, s)| (*k, norm(s))).filter(|(_, s)| !s.is_zero()).collect();
    let pa: BTreeMap<_, _> = a.phi_ab().iter().map(|(k, s)| (*k, norm(s))).filter(|(_, s)| !s.is_zero()).collect();
    let pb: BTreeMap<_, _> = b.phi_ab().iter().map(|(k, s)| (*k, norm(s))).filter(|(_, s)| !s.is_zero()).collect();
    let wa = a.weight3_series().map(norm).filter(|s| !s.is_zero());
    let wb = b.weight3_series().map(norm).filter(|s| !s.is_zero());
    la == lb && pa == pb && wa == wb
}

/// Q(Γ₋ℓx, y) + Q(x, Γ₋ℓy) = 0 for every level, termwise.
pub fn q_preservation(m: &FrobeniusModule, tower: &GammaTower) -> Certificate {
    let q = q_form(m);
    let mut cert = Certificate::new();
    for (i, g) in tower.levels().iter().enumerate() {
        let bad = g
            .graded_terms()
            .into_iter()
            .find(|(_, c)| !q_defect(&q, c).is_zero())
            .map(|(mono, _)| format!("at {}", crate::series::mono_string("q", mono, 1)));
        cert.record(format!("q-preserved[-{}]", i + 1), bad);
    }
    cert
}
