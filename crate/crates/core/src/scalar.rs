//! The scalar field ℚ(τ), where τ is a formal transcendental standing in for 2πi.
//!
//! A [`Scalar`] is a reduced fraction of two polynomials in τ with rational
//! coefficients. The representation is canonical: numerator and denominator are
//! coprime, the denominator is monic, and zero is `0/1`. Equality is therefore
//! structural.
//!
//! Complex conjugation acts by τ ↦ −τ; the τ-free scalars are exactly ℚ.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Dense univariate polynomial in τ, ascending powers, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub(crate) struct Poly(Vec<BigRational>);

impl Poly {
    fn zero() -> Self {
        Poly(Vec::new())
    }

    fn one() -> Self {
        Poly(vec![BigRational::one()])
    }

    fn constant(c: BigRational) -> Self {
        Poly::from_vec(vec![c])
    }

    fn monomial(c: BigRational, deg: usize) -> Self {
        if c.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![BigRational::zero(); deg + 1];
        v[deg] = c;
        Poly(v)
    }

    fn from_vec(mut v: Vec<BigRational>) -> Self {
        while v.last().map_or(false, |c| c.is_zero()) {
            v.pop();
        }
        Poly(v)
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn is_one(&self) -> bool {
        self.0.len() == 1 && self.0[0].is_one()
    }

    fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    /// Lowest power of τ with a nonzero coefficient.
    fn valuation(&self) -> Option<usize> {
        self.0.iter().position(|c| !c.is_zero())
    }

    /// True for c·τ^d.
    fn is_monomial(&self) -> bool {
        match self.valuation() {
            Some(v) => v + 1 == self.0.len(),
            None => false,
        }
    }

    fn leading(&self) -> Option<&BigRational> {
        self.0.last()
    }

    fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.0.get(i);
            let b = o.0.get(i);
            v.push(match (a, b) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            });
        }
        Poly::from_vec(v)
    }

    fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![BigRational::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.0.iter().enumerate() {
                if !b.is_zero() {
                    v[i + j] += a * b;
                }
            }
        }
        Poly::from_vec(v)
    }

    fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|x| x * c).collect())
    }

    /// Drop the lowest `k` powers (exact division by τ^k; caller guarantees divisibility).
    fn shift_down(&self, k: usize) -> Poly {
        Poly(self.0[k..].to_vec())
    }

    fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        let dd = d.degree().expect("division by zero polynomial");
        let lead = d.leading().unwrap().clone();
        let mut rem = self.0.clone();
        if rem.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut quo = vec![BigRational::zero(); rem.len() - dd];
        for i in (0..quo.len()).rev() {
            let c = &rem[i + dd] / &lead;
            if !c.is_zero() {
                for (j, dj) in d.0.iter().enumerate() {
                    rem[i + j] -= &c * dj;
                }
            }
            quo[i] = c;
        }
        rem.truncate(dd);
        (Poly::from_vec(quo), Poly::from_vec(rem))
    }

    fn monic(&self) -> Poly {
        match self.leading() {
            Some(l) => {
                let inv = l.recip();
                self.scale(&inv)
            }
            None => Poly::zero(),
        }
    }

    fn gcd(&self, o: &Poly) -> Poly {
        let mut a = self.clone();
        let mut b = o.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// p(τ) ↦ p(−τ).
    fn conj(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 1 { -c } else { c.clone() })
                .collect(),
        )
    }

    fn write(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (deg, c) in self.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let abs = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            match deg {
                0 => write!(f, "{}", abs)?,
                _ => {
                    if !abs.is_one() {
                        write!(f, "{}*", abs)?;
                    }
                    if deg == 1 {
                        write!(f, "tau")?;
                    } else {
                        write!(f, "tau^{}", deg)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// An element of ℚ(τ).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    num: Poly,
    den: Poly,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        Scalar::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        Scalar::from_rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        Scalar {
            num: Poly::constant(r),
            den: Poly::one(),
        }
    }

    /// The formal symbol τ = 2πi.
    pub fn tau() -> Self {
        Scalar::tau_pow(1)
    }

    /// τ^e for any integer e.
    pub fn tau_pow(e: i32) -> Self {
        let one = BigRational::one();
        if e >= 0 {
            Scalar {
                num: Poly::monomial(one, e as usize),
                den: Poly::one(),
            }
        } else {
            Scalar {
                num: Poly::constant(one.clone()),
                den: Poly::monomial(one, (-e) as usize),
            }
        }
    }

    /// Polynomial in τ from ascending rational coefficients.
    pub fn from_tau_coeffs(coeffs: Vec<BigRational>) -> Self {
        Scalar {
            num: Poly::from_vec(coeffs),
            den: Poly::one(),
        }
    }

    fn from_parts(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Scalar::zero();
        }
        let (num, den) = if den.is_monomial() {
            let k = den.valuation().unwrap().min(num.valuation().unwrap());
            (num.shift_down(k), den.shift_down(k))
        } else {
            let g = num.gcd(&den);
            if g.is_one() {
                (num, den)
            } else {
                (num.div_rem(&g).0, den.div_rem(&g).0)
            }
        };
        let lead = den.leading().unwrap().recip();
        if lead.is_one() {
            Scalar { num, den }
        } else {
            Scalar {
                num: num.scale(&lead),
                den: den.scale(&lead),
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    /// True when the value lies in ℚ.
    pub fn is_tau_free(&self) -> bool {
        self.num.degree().unwrap_or(0) == 0 && self.den.degree() == Some(0)
    }

    pub fn to_rational(&self) -> Option<BigRational> {
        if !self.is_tau_free() {
            return None;
        }
        Some(self.num.0.first().cloned().unwrap_or_else(BigRational::zero))
    }

    /// Sign of a τ-free scalar.
    pub fn signum(&self) -> Option<Ordering> {
        self.to_rational().map(|r| r.cmp(&BigRational::zero()))
    }

    /// Complex conjugation τ ↦ −τ.
    pub fn conj(&self) -> Self {
        Scalar::from_parts(self.num.conj(), self.den.conj())
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Scalar::from_parts(self.den.clone(), self.num.clone()))
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Scalar::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Exact rational square root of a τ-free scalar, when one exists.
    pub fn rational_sqrt(&self) -> Option<Self> {
        let r = self.to_rational()?;
        if r.is_negative() {
            return None;
        }
        let n = r.numer().sqrt();
        let d = r.denom().sqrt();
        if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
            Some(Scalar::from_rational(BigRational::new(n, d)))
        } else {
            None
        }
    }

    fn add_ref(&self, o: &Scalar) -> Scalar {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            if self.den.is_one() {
                return Scalar {
                    num: self.num.add(&o.num),
                    den: Poly::one(),
                };
            }
            return Scalar::from_parts(self.num.add(&o.num), self.den.clone());
        }
        if self.den.is_monomial() && o.den.is_monomial() {
            // both are τ^a, τ^b
            let a = self.den.valuation().unwrap();
            let b = o.den.valuation().unwrap();
            let m = a.max(b);
            let one = BigRational::one();
            let n1 = self.num.mul(&Poly::monomial(one.clone(), m - a));
            let n2 = o.num.mul(&Poly::monomial(one.clone(), m - b));
            return Scalar::from_parts(n1.add(&n2), Poly::monomial(one, m));
        }
        Scalar::from_parts(
            self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            self.den.mul(&o.den),
        )
    }

    fn mul_ref(&self, o: &Scalar) -> Scalar {
        if self.is_zero() || o.is_zero() {
            return Scalar::zero();
        }
        if self.den.is_one() && o.den.is_one() {
            return Scalar {
                num: self.num.mul(&o.num),
                den: Poly::one(),
            };
        }
        Scalar::from_parts(self.num.mul(&o.num), self.den.mul(&o.den))
    }

    fn neg_ref(&self) -> Scalar {
        Scalar {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl From<BigRational> for Scalar {
    fn from(r: BigRational) -> Self {
        Scalar::from_rational(r)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl<'a, 'b> $tr<&'b Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $m(self, o: &'b Scalar) -> Scalar {
                $body(self, o)
            }
        }
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, o: Scalar) -> Scalar {
                $body(&self, &o)
            }
        }
        impl<'b> $tr<&'b Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, o: &'b Scalar) -> Scalar {
                $body(&self, o)
            }
        }
        impl<'a> $tr<Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $m(self, o: Scalar) -> Scalar {
                $body(self, &o)
            }
        }
    };
}

forward_binop!(Add, add, |a: &Scalar, b: &Scalar| a.add_ref(b));
forward_binop!(Sub, sub, |a: &Scalar, b: &Scalar| a.add_ref(&b.neg_ref()));
forward_binop!(Mul, mul, |a: &Scalar, b: &Scalar| a.mul_ref(b));
forward_binop!(Div, div, |a: &Scalar, b: &Scalar| a
    .mul_ref(&b.inv().expect("division by zero scalar")));

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.neg_ref()
    }
}

impl<'a> Neg for &'a Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.neg_ref()
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, o: &Scalar) {
        *self = self.add_ref(o);
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, o: &Scalar) {
        *self = self.add_ref(&o.neg_ref());
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, o: &Scalar) {
        *self = self.mul_ref(o);
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return self.num.write(f);
        }
        write!(f, "(")?;
        self.num.write(f)?;
        write!(f, ")/(")?;
        self.den.write(f)?;
        write!(f, ")")
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_poly(s: &str) -> Result<Poly, String> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty polynomial".into());
    }
    // split into signed terms
    let mut terms = Vec::new();
    let mut cur = String::new();
    for (i, ch) in s.chars().enumerate() {
        if (ch == '+' || ch == '-') && i > 0 && !cur.ends_with('^') {
            terms.push(std::mem::take(&mut cur));
        }
        cur.push(ch);
    }
    terms.push(cur);
    let mut acc = Poly::zero();
    for t in terms {
        let (neg, body) = match t.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, t.strip_prefix('+').unwrap_or(&t)),
        };
        let (coeff, deg) = if let Some(pos) = body.find("tau") {
            let c = &body[..pos];
            let c = match c.strip_suffix('*') {
                Some(c) => parse_rational(c)?,
                None if c.is_empty() => BigRational::one(),
                None => return Err(format!("bad term `{}`", t)),
            };
            let rest = &body[pos + 3..];
            let deg = if rest.is_empty() {
                1
            } else if let Some(e) = rest.strip_prefix('^') {
                e.parse::<usize>().map_err(|_| format!("bad exponent `{}`", e))?
            } else {
                return Err(format!("bad term `{}`", t));
            };
            (c, deg)
        } else {
            (parse_rational(body)?, 0)
        };
        let coeff = if neg { -coeff } else { coeff };
        acc = acc.add(&Poly::monomial(coeff, deg));
    }
    Ok(acc)
}

fn parse_rational(s: &str) -> Result<BigRational, String> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| format!("bad rational `{}`", s))?;
    let d: BigInt = d.parse().map_err(|_| format!("bad rational `{}`", s))?;
    if d.is_zero() {
        return Err(format!("zero denominator in `{}`", s));
    }
    Ok(BigRational::new(n, d))
}

impl FromStr for Scalar {
    type Err = Error;

    /// Accepts `p/q`, polynomials such as `3/2*tau^2 - tau + 5`, and
    /// quotients written `(num)/(den)`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let parse_err = |msg: String| Error::Parse {
            location: "scalar".into(),
            message: msg,
        };
        if let Some(rest) = s.strip_prefix('(') {
            let close = rest
                .find(')')
                .ok_or_else(|| parse_err(format!("unbalanced parentheses in `{}`", s)))?;
            let num = parse_poly(&rest[..close]).map_err(parse_err)?;
            let tail = rest[close + 1..].trim();
            let den_str = tail
                .strip_prefix("/(")
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(|| parse_err(format!("expected `(num)/(den)` in `{}`", s)))?;
            let den = parse_poly(den_str).map_err(parse_err)?;
            if den.is_zero() {
                return Err(parse_err(format!("zero denominator in `{}`", s)));
            }
            return Ok(Scalar::from_parts(num, den));
        }
        let num = parse_poly(s).map_err(parse_err)?;
        Ok(Scalar::from_parts(num, Poly::one()))
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(x: &str) -> Scalar {
        x.parse().unwrap()
    }

    #[test]
    fn canonical_reduction() {
        let t = Scalar::tau();
        let a = &(&t * &t) / &t;
        assert_eq!(a, t);
        let b = &Scalar::from_int(6) / &Scalar::from_int(4);
        assert_eq!(b, Scalar::from_ratio(3, 2));
        // (τ² − 1)/(τ − 1) = τ + 1
        let num = &(&t * &t) - &Scalar::one();
        let den = &t - &Scalar::one();
        assert_eq!(&num / &den, &t + &Scalar::one());
    }

    #[test]
    fn display_and_parse() {
        for text in ["0", "-5/6", "tau^3 + 5", "-2*tau", "(1)/(tau)", "(3)/(tau^2 + 1/2)"] {
            let v = s(text);
            assert_eq!(v.to_string(), text);
            assert_eq!(s(&v.to_string()), v);
        }
        assert_eq!(s("5*tau^0"), Scalar::from_int(5));
        assert!("1/0".parse::<Scalar>().is_err());
        assert!("tau^x".parse::<Scalar>().is_err());
    }

    #[test]
    fn conjugation() {
        let t = Scalar::tau();
        assert_eq!(t.conj(), -&t);
        let x = &Scalar::one() / &(&t + &Scalar::from_int(2));
        assert_eq!(x.conj().conj(), x);
        assert_eq!(Scalar::from_ratio(7, 3).conj(), Scalar::from_ratio(7, 3));
    }

    #[test]
    fn rational_sqrt() {
        assert_eq!(Scalar::from_ratio(9, 4).rational_sqrt(), Some(Scalar::from_ratio(3, 2)));
        assert_eq!(Scalar::from_int(2).rational_sqrt(), None);
        assert_eq!(Scalar::tau().rational_sqrt(), None);
    }

    fn arb_scalar() -> impl Strategy<Value = Scalar> {
        (
            proptest::collection::vec(-5i64..=5, 0..3),
            proptest::collection::vec(-3i64..=3, 0..2),
            1i64..4,
        )
            .prop_map(|(n, d, c)| {
                let num = Scalar::from_tau_coeffs(
                    n.into_iter().map(|x| BigRational::from_integer(x.into())).collect(),
                );
                let mut den = Scalar::from_tau_coeffs(
                    d.into_iter().map(|x| BigRational::from_integer(x.into())).collect(),
                );
                den = &den * &Scalar::tau() + Scalar::from_int(c);
                &num / &den
            })
    }

    proptest! {
        #[test]
        fn field_axioms(a in arb_scalar(), b in arb_scalar(), c in arb_scalar()) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            if !b.is_zero() {
                prop_assert_eq!(&(&a / &b) * &b, a.clone());
            }
        }

        #[test]
        fn conj_is_involutive_automorphism(a in arb_scalar(), b in arb_scalar()) {
            prop_assert_eq!(a.conj().conj(), a.clone());
            prop_assert_eq!((&a * &b).conj(), &a.conj() * &b.conj());
            prop_assert_eq!((&a + &b).conj(), &a.conj() + &b.conj());
            if a.is_tau_free() {
                prop_assert_eq!(a.conj(), a);
            }
        }

        #[test]
        fn text_round_trip(a in arb_scalar()) {
            prop_assert_eq!(a.to_string().parse::<Scalar>().unwrap(), a);
        }
    }
}
