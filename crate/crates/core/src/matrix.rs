//! Dense exact matrices over ℚ(τ), subspaces, and definiteness.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{Coefficient, QSeries, RingCoefficient, Series};

pub type Vector = Vec<Scalar>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Scalar::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Scalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Integer entries, for tests and fixtures.
    pub fn from_ints(rows: &[&[i64]]) -> Self {
        Matrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Scalar::from_int(x)).collect())
                .collect(),
        )
        .expect("rectangular")
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(n: usize, cols: &[Vector]) -> Self {
        Matrix::from_fn(n, cols.len(), |i, j| cols[j][i].clone())
    }

    /// Elementary matrix sending basis vector `from` to basis vector `to`.
    pub fn unit(n: usize, to: usize, from: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        m.set(to, from, Scalar::one());
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn row(&self, i: usize) -> Vector {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero)
    }

    pub fn is_tau_free(&self) -> bool {
        self.data.iter().all(Scalar::is_tau_free)
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn conj(&self) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(Scalar::conj).collect(),
        }
    }

    fn check_same_shape(&self, o: &Matrix) {
        assert!(
            self.rows == o.rows && self.cols == o.cols,
            "matrix shape mismatch {}x{} vs {}x{}",
            self.rows,
            self.cols,
            o.rows,
            o.cols
        );
    }

    pub fn add(&self, o: &Matrix) -> Matrix {
        self.check_same_shape(o);
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Matrix) -> Matrix {
        self.check_same_shape(o);
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn neg(&self) -> Matrix {
        self.scale(&Scalar::from_int(-1))
    }

    pub fn scale(&self, s: &Scalar) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn mul(&self, o: &Matrix) -> Matrix {
        assert_eq!(self.cols, o.rows, "matrix product shape mismatch");
        let mut out = Matrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        let idx = i * out.cols + j;
                        out.data[idx] = &out.data[idx] + &(a * b);
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Scalar]) -> Vector {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = Scalar::zero();
                for (j, x) in v.iter().enumerate() {
                    let a = self.get(i, j);
                    if !a.is_zero() && !x.is_zero() {
                        acc += &(a * x);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn commutator(&self, o: &Matrix) -> Matrix {
        self.mul(o).sub(&o.mul(self))
    }

    pub fn pow(&self, e: u32) -> Matrix {
        assert!(self.is_square());
        let mut acc = Matrix::identity(self.rows);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Smallest m with self^m = 0.
    pub fn nilpotency_index(&self) -> Option<u32> {
        if !self.is_square() {
            return None;
        }
        let mut p = Matrix::identity(self.rows);
        for m in 0..=self.rows as u32 {
            if p.is_zero() {
                return Some(m);
            }
            p = p.mul(self);
        }
        None
    }

    /// exp of a nilpotent matrix as a finite sum.
    pub fn exp_nilpotent(&self) -> Result<Matrix> {
        if self.nilpotency_index().is_none() {
            return Err(Error::NotNilpotent(format!("{:?}", self)));
        }
        let mut acc = Matrix::identity(self.rows);
        let mut term = Matrix::identity(self.rows);
        for i in 1..=self.rows as i64 {
            term = term.mul(self).scale(&Scalar::from_ratio(1, i));
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// log of a unipotent matrix as a finite sum.
    pub fn log_unipotent(&self) -> Result<Matrix> {
        let n = self.sub(&Matrix::identity(self.rows));
        if n.nilpotency_index().is_none() {
            return Err(Error::NotNilpotent("matrix is not unipotent".into()));
        }
        let mut acc = Matrix::zeros(self.rows, self.cols);
        let mut power = Matrix::identity(self.rows);
        for i in 1..=self.rows as i64 {
            power = power.mul(&n);
            if power.is_zero() {
                break;
            }
            let sign = if i % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&power.scale(&Scalar::from_ratio(sign, i)));
        }
        Ok(acc)
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (Matrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&i| !m.get(i, col).is_zero()) else {
                continue;
            };
            m.swap_rows(row, p);
            let inv = m.get(row, col).inv().expect("nonzero pivot");
            for j in col..m.cols {
                let v = m.get(row, j) * &inv;
                m.set(row, j, v);
            }
            for i in 0..m.rows {
                if i == row {
                    continue;
                }
                let f = m.get(i, col).clone();
                if f.is_zero() {
                    continue;
                }
                for j in col..m.cols {
                    let v = m.get(i, j) - &(&f * m.get(row, j));
                    m.set(i, j, v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the null space.
    pub fn kernel(&self) -> Vec<Vector> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Scalar::zero(); self.cols];
                v[f] = Scalar::one();
                for (i, &p) in pivots.iter().enumerate() {
                    v[p] = -r.get(i, f);
                }
                v
            })
            .collect()
    }

    pub fn kernel_space(&self) -> Subspace {
        Subspace::span(self.cols, &self.kernel())
    }

    pub fn image_space(&self) -> Subspace {
        let cols: Vec<Vector> = (0..self.cols).map(|j| self.column(j)).collect();
        Subspace::span(self.rows, &cols)
    }

    pub fn inverse(&self) -> Option<Matrix> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let aug = Matrix::from_fn(n, 2 * n, |i, j| {
            if j < n {
                self.get(i, j).clone()
            } else if j - n == i {
                Scalar::one()
            } else {
                Scalar::zero()
            }
        });
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(Matrix::from_fn(n, n, |i, j| r.get(i, j + n).clone()))
    }

    /// Determinant by fraction-free Bareiss elimination.
    pub fn det(&self) -> Scalar {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return Scalar::one();
        }
        let mut m = self.clone();
        let mut sign = Scalar::one();
        let mut prev = Scalar::one();
        for k in 0..n - 1 {
            if m.get(k, k).is_zero() {
                match ((k + 1)..n).find(|&i| !m.get(i, k).is_zero()) {
                    Some(p) => {
                        m.swap_rows(k, p);
                        sign = -sign;
                    }
                    None => return Scalar::zero(),
                }
            }
            for i in (k + 1)..n {
                for j in (k + 1)..n {
                    let v = &(&(m.get(i, j) * m.get(k, k)) - &(m.get(i, k) * m.get(k, j))) / &prev;
                    m.set(i, j, v);
                }
            }
            prev = m.get(k, k).clone();
        }
        &sign * m.get(n - 1, n - 1)
    }

    pub fn block_diag(blocks: &[Matrix]) -> Matrix {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut m = Matrix::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    m.set(r0 + i, c0 + j, b.get(i, j).clone());
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        m
    }

    /// Bilinear form vᵀ·self·w.
    pub fn form(&self, v: &[Scalar], w: &[Scalar]) -> Scalar {
        dot(v, &self.apply(w))
    }

    /// Gram matrix of the form restricted to the span of `basis`.
    pub fn restrict_form(&self, basis: &[Vector]) -> Matrix {
        let images: Vec<Vector> = basis.iter().map(|w| self.apply(w)).collect();
        Matrix::from_fn(basis.len(), basis.len(), |i, j| dot(&basis[i], &images[j]))
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Scalar)> {
        self.data
            .iter()
            .enumerate()
            .map(move |(idx, v)| (idx / self.cols, idx % self.cols, v))
    }
}

pub fn dot(v: &[Scalar], w: &[Scalar]) -> Scalar {
    let mut acc = Scalar::zero();
    for (a, b) in v.iter().zip(w) {
        if !a.is_zero() && !b.is_zero() {
            acc += &(a * b);
        }
    }
    acc
}

pub fn basis_vector(n: usize, i: usize) -> Vector {
    let mut v = vec![Scalar::zero(); n];
    v[i] = Scalar::one();
    v
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
        }
        write!(f, "]")
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Coefficient for Matrix {
    fn is_zero(&self) -> bool {
        Matrix::is_zero(self)
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn negated(&self) -> Self {
        self.neg()
    }
    fn scaled(&self, s: &Scalar) -> Self {
        self.scale(s)
    }
}

impl RingCoefficient for Matrix {
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
}

/// A subspace of an n-dimensional coordinate space, stored by its reduced
/// row echelon basis so that equal subspaces compare equal.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vector>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace::span(ambient, &(0..ambient).map(|i| basis_vector(ambient, i)).collect::<Vec<_>>())
    }

    pub fn span(ambient: usize, vectors: &[Vector]) -> Self {
        if vectors.is_empty() {
            return Subspace::zero(ambient);
        }
        let m = Matrix::from_fn(vectors.len(), ambient, |i, j| vectors[i][j].clone());
        let (r, pivots) = m.rref();
        Subspace {
            ambient,
            basis: (0..pivots.len()).map(|i| r.row(i)).collect(),
        }
    }

    /// Span of the given coordinate basis vectors.
    pub fn coordinate(ambient: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let vs: Vec<Vector> = indices.into_iter().map(|i| basis_vector(ambient, i)).collect();
        Subspace::span(ambient, &vs)
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    /// The basis is in reduced echelon form, so reducing `v` by it decides membership.
    pub fn contains(&self, v: &[Scalar]) -> bool {
        let mut w = v.to_vec();
        for b in &self.basis {
            let p = b.iter().position(|x| !x.is_zero()).expect("nonzero basis row");
            if w[p].is_zero() {
                continue;
            }
            let f = w[p].clone();
            for (x, y) in w.iter_mut().zip(b) {
                if !y.is_zero() {
                    *x -= &(&f * y);
                }
            }
        }
        w.iter().all(Scalar::is_zero)
    }

    pub fn contains_space(&self, o: &Subspace) -> bool {
        o.basis.iter().all(|v| self.contains(v))
    }

    pub fn sum(&self, o: &Subspace) -> Subspace {
        let mut vs = self.basis.clone();
        vs.extend(o.basis.iter().cloned());
        Subspace::span(self.ambient, &vs)
    }

    pub fn intersect(&self, o: &Subspace) -> Subspace {
        // solve Σ a_i u_i = Σ b_j w_j
        let (p, q) = (self.dim(), o.dim());
        if p == 0 || q == 0 {
            return Subspace::zero(self.ambient);
        }
        let m = Matrix::from_fn(self.ambient, p + q, |i, j| {
            if j < p {
                self.basis[j][i].clone()
            } else {
                -&o.basis[j - p][i]
            }
        });
        let vs: Vec<Vector> = m
            .kernel()
            .into_iter()
            .map(|k| {
                let mut v = vec![Scalar::zero(); self.ambient];
                for (a, u) in k[..p].iter().zip(&self.basis) {
                    for (x, y) in v.iter_mut().zip(u) {
                        *x += &(a * y);
                    }
                }
                v
            })
            .collect();
        Subspace::span(self.ambient, &vs)
    }

    pub fn image(&self, m: &Matrix) -> Subspace {
        let vs: Vec<Vector> = self.basis.iter().map(|v| m.apply(v)).collect();
        Subspace::span(m.rows(), &vs)
    }

    /// Preimage of this subspace under `m`.
    pub fn preimage(&self, m: &Matrix) -> Subspace {
        // v with m·v ∈ self: kernel of (projection to a complement)∘m
        let comp = self.annihilator();
        if comp.is_empty() {
            return Subspace::full(m.cols());
        }
        let a = Matrix::from_fn(comp.len(), self.ambient, |i, j| comp[i][j].clone());
        a.mul(m).kernel_space()
    }

    /// Linear functionals (as row vectors) vanishing exactly on this subspace.
    pub fn annihilator(&self) -> Vec<Vector> {
        if self.basis.is_empty() {
            return (0..self.ambient).map(|i| basis_vector(self.ambient, i)).collect();
        }
        let m = Matrix::from_fn(self.dim(), self.ambient, |i, j| self.basis[i][j].clone());
        m.kernel()
    }
}

impl fmt::Debug for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "span{:?}", self.basis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definiteness {
    PositiveDefinite,
    NegativeDefinite,
    Indefinite,
    Degenerate,
}

/// Verdict plus, unless positive definite, a vector v with vᵀSv ≤ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DefinitenessReport {
    pub verdict: Definiteness,
    pub witness: Option<Vector>,
}

/// Classify a rational symmetric matrix.
///
/// Uses the signs of the leading principal minors when none vanishes and
/// falls back to congruence diagonalization otherwise.
pub fn definiteness_check(s: &Matrix) -> Result<DefinitenessReport> {
    if !s.is_square() {
        return Err(Error::ShapeMismatch(format!("{}x{} form", s.rows(), s.cols())));
    }
    if !s.is_tau_free() {
        return Err(Error::TauPresent(format!("{:?}", s)));
    }
    if !s.is_symmetric() {
        return Err(Error::NotSymmetric(format!("{:?}", s)));
    }
    let n = s.rows();
    let minors: Vec<Scalar> = (1..=n)
        .map(|k| Matrix::from_fn(k, k, |i, j| s.get(i, j).clone()).det())
        .collect();
    let sylvester = if minors.iter().all(|m| !m.is_zero()) {
        let pos = |x: &Scalar| x.signum() == Some(std::cmp::Ordering::Greater);
        if minors.iter().all(pos) {
            Some(Definiteness::PositiveDefinite)
        } else if minors
            .iter()
            .enumerate()
            .all(|(i, m)| pos(m) == (i % 2 == 1))
        {
            Some(Definiteness::NegativeDefinite)
        } else {
            Some(Definiteness::Indefinite)
        }
    } else {
        None
    };

    let (diag, frame) = congruence_diagonalize(s);
    let signs: Vec<Option<std::cmp::Ordering>> = diag.iter().map(|d| d.signum()).collect();
    let verdict = sylvester.unwrap_or_else(|| {
        use std::cmp::Ordering::*;
        let has = |o| signs.iter().any(|s| *s == Some(o));
        if has(Greater) && has(Less) {
            Definiteness::Indefinite
        } else if has(Equal) || n == 0 {
            Definiteness::Degenerate
        } else if has(Less) {
            Definiteness::NegativeDefinite
        } else {
            Definiteness::PositiveDefinite
        }
    });
    let witness = if verdict == Definiteness::PositiveDefinite {
        None
    } else {
        signs
            .iter()
            .position(|s| *s != Some(std::cmp::Ordering::Greater))
            .map(|i| frame.column(i))
    };
    Ok(DefinitenessReport { verdict, witness })
}

/// Returns (d, C) with Cᵀ S C = diag(d).
fn congruence_diagonalize(s: &Matrix) -> (Vec<Scalar>, Matrix) {
    let n = s.rows();
    let mut a = s.clone();
    let mut c = Matrix::identity(n);
    for i in 0..n {
        if a.get(i, i).is_zero() {
            if let Some(j) = ((i + 1)..n).find(|&j| !a.get(j, j).is_zero()) {
                swap_sym(&mut a, i, j);
                swap_cols(&mut c, i, j);
            } else if let Some(j) = ((i + 1)..n).find(|&j| !a.get(i, j).is_zero()) {
                add_sym(&mut a, i, j, &Scalar::one());
                add_col(&mut c, i, j, &Scalar::one());
            } else {
                continue;
            }
        }
        let piv = a.get(i, i).clone();
        for j in (i + 1)..n {
            let f = -&(a.get(j, i) / &piv);
            if !f.is_zero() {
                add_sym(&mut a, j, i, &f);
                add_col(&mut c, j, i, &f);
            }
        }
    }
    ((0..n).map(|i| a.get(i, i).clone()).collect(), c)
}

fn swap_cols(m: &mut Matrix, i: usize, j: usize) {
    for r in 0..m.rows() {
        let a = m.get(r, i).clone();
        let b = m.get(r, j).clone();
        m.set(r, i, b);
        m.set(r, j, a);
    }
}

fn swap_sym(m: &mut Matrix, i: usize, j: usize) {
    swap_cols(m, i, j);
    m.swap_rows(i, j);
}

/// col_dst += f·col_src.
fn add_col(m: &mut Matrix, dst: usize, src: usize, f: &Scalar) {
    for r in 0..m.rows() {
        let v = m.get(r, dst) + &(f * m.get(r, src));
        m.set(r, dst, v);
    }
}

/// Congruence by the elementary operation col_dst += f·col_src, row_dst += f·row_src.
fn add_sym(m: &mut Matrix, dst: usize, src: usize, f: &Scalar) {
    add_col(m, dst, src, f);
    for c in 0..m.cols() {
        let v = m.get(dst, c) + &(f * m.get(src, c));
        m.set(dst, c, v);
    }
}

/// Endomorphism-valued series.
pub type MatSeries = Series<Matrix>;

pub fn mat_constant(nvars: usize, order: u32, m: Matrix) -> MatSeries {
    MatSeries::constant(nvars, order, m)
}

pub fn mat_identity(n: usize, nvars: usize, order: u32) -> MatSeries {
    mat_constant(nvars, order, Matrix::identity(n))
}

/// Entry (i, j) of a matrix series as a scalar series.
pub fn mat_entry(ms: &MatSeries, i: usize, j: usize) -> QSeries {
    let mut s = QSeries::zero(ms.nvars(), ms.order());
    for (m, c) in ms.terms() {
        s.add_term(m.clone(), c.get(i, j).clone());
    }
    s
}

/// Assemble a matrix series from scalar series entries.
pub fn mat_from_entries(
    n: usize,
    nvars: usize,
    order: u32,
    f: impl Fn(usize, usize) -> QSeries,
) -> MatSeries {
    let mut acc: std::collections::BTreeMap<Vec<u32>, Matrix> = Default::default();
    for i in 0..n {
        for j in 0..n {
            let e = f(i, j);
            for (m, c) in e.terms() {
                acc.entry(m.clone())
                    .or_insert_with(|| Matrix::zeros(n, n))
                    .set(i, j, c.clone());
            }
        }
    }
    MatSeries::from_terms(nvars, order, acc)
}

pub fn mat_commutator(a: &MatSeries, b: &MatSeries) -> MatSeries {
    a.mul(b).sub(&b.mul(a))
}

/// exp of a nilpotent matrix series (finite sum).
pub fn mat_exp(x: &MatSeries, n: usize) -> MatSeries {
    let mut acc = mat_identity(n, x.nvars(), x.order());
    let mut term = acc.clone();
    for i in 1..=(n as i64 + x.order() as i64 + 1) {
        term = term.mul(x).scale(&Scalar::from_ratio(1, i));
        if term.is_zero() {
            break;
        }
        acc = acc.add(&term);
    }
    acc
}

/// log of a unipotent matrix series I + X with X nilpotent (finite sum).
pub fn mat_log(g: &MatSeries, n: usize) -> MatSeries {
    let x = g.sub(&mat_identity(n, g.nvars(), g.order()));
    let mut acc = MatSeries::zero(g.nvars(), g.order());
    let mut power = mat_identity(n, g.nvars(), g.order());
    for i in 1..=(n as i64 + g.order() as i64 + 1) {
        power = power.mul(&x);
        if power.is_zero() {
            break;
        }
        let sign = if i % 2 == 1 { 1 } else { -1 };
        acc = acc.add(&power.scale(&Scalar::from_ratio(sign, i)));
    }
    acc
}

/// Apply a matrix series to a constant vector, giving one series per row.
pub fn mat_apply(ms: &MatSeries, n: usize, v: &[Scalar]) -> Vec<QSeries> {
    (0..n)
        .map(|i| {
            let mut s = QSeries::zero(ms.nvars(), ms.order());
            for (m, c) in ms.terms() {
                let x = dot(&c.row(i), v);
                s.add_term(m.clone(), x);
            }
            s
        })
        .collect()
}
