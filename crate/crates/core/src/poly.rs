//! Exact polynomials in `(p₁, p₂, 1/n)` with rational coefficients.
//!
//! Central moments of the scaled binomial and multinomial distributions are
//! polynomials in the cell probabilities and in `1/n`. The moment recursions
//! differentiate them with respect to `p₁` and `p₂`, so they are kept
//! symbolic and exact; floating point only enters at [`MomentPolynomial::evaluate`].

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::math::powi;
use crate::{Error, Result};

/// Exponent triple of a monomial `p₁^a · p₂^b · n^(−c)`.
///
/// Field order defines the canonical term order: by power of `1/n`, then
/// `p₁`, then `p₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponents {
    pub inv_n: u32,
    pub p1: u32,
    pub p2: u32,
}

impl Exponents {
    pub const fn new(p1: u32, p2: u32, inv_n: u32) -> Self {
        Exponents { inv_n, p1, p2 }
    }
}

/// A polynomial in `p₁`, `p₂` and `1/n` with exact rational coefficients.
///
/// Zero coefficients are never stored, so the zero polynomial has no terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MomentPolynomial {
    terms: BTreeMap<Exponents, BigRational>,
}

impl MomentPolynomial {
    pub fn zero() -> Self {
        MomentPolynomial::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::monomial(Exponents::new(0, 0, 0), c)
    }

    pub fn integer(c: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(c)))
    }

    pub fn monomial(e: Exponents, c: BigRational) -> Self {
        let mut p = MomentPolynomial::zero();
        p.add_term(e, c);
        p
    }

    /// The variable `p₁`.
    pub fn p1() -> Self {
        Self::monomial(Exponents::new(1, 0, 0), BigRational::one())
    }

    /// The variable `p₂`.
    pub fn p2() -> Self {
        Self::monomial(Exponents::new(0, 1, 0), BigRational::one())
    }

    /// The variable `1/n`.
    pub fn inv_n() -> Self {
        Self::monomial(Exponents::new(0, 0, 1), BigRational::one())
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

    /// Terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &BigRational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, e: Exponents) -> BigRational {
        self.terms
            .get(&e)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Smallest and largest power of `1/n` present, `None` for zero.
    pub fn inv_n_degree_range(&self) -> Option<(u32, u32)> {
        let lo = self.terms.keys().map(|e| e.inv_n).min()?;
        let hi = self.terms.keys().map(|e| e.inv_n).max()?;
        Some((lo, hi))
    }

    fn add_term(&mut self, e: Exponents, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    /// Multiply every coefficient by `c`.
    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return MomentPolynomial::zero();
        }
        MomentPolynomial {
            terms: self.terms.iter().map(|(e, v)| (*e, v * c)).collect(),
        }
    }

    pub fn scale_int(&self, c: i64) -> Self {
        self.scale(&BigRational::from_integer(BigInt::from(c)))
    }

    /// Partial derivative with respect to `p₁`.
    pub fn d_dp1(&self) -> Self {
        let mut out = MomentPolynomial::zero();
        for (e, c) in &self.terms {
            if e.p1 > 0 {
                let factor = BigRational::from_integer(BigInt::from(e.p1));
                out.add_term(Exponents::new(e.p1 - 1, e.p2, e.inv_n), c * factor);
            }
        }
        out
    }

    /// Partial derivative with respect to `p₂`.
    pub fn d_dp2(&self) -> Self {
        let mut out = MomentPolynomial::zero();
        for (e, c) in &self.terms {
            if e.p2 > 0 {
                let factor = BigRational::from_integer(BigInt::from(e.p2));
                out.add_term(Exponents::new(e.p1, e.p2 - 1, e.inv_n), c * factor);
            }
        }
        out
    }

    /// Exchange the roles of `p₁` and `p₂`.
    pub fn swap_probabilities(&self) -> Self {
        MomentPolynomial {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (Exponents::new(e.p2, e.p1, e.inv_n), c.clone()))
                .collect(),
        }
    }

    /// Drop every term whose power of `1/n` exceeds `max_power`.
    pub fn truncate_inv_n(&self, max_power: u32) -> Self {
        MomentPolynomial {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.inv_n <= max_power)
                .map(|(e, c)| (*e, c.clone()))
                .collect(),
        }
    }

    /// Keep only the terms with exactly `power` in `1/n`.
    pub fn inv_n_component(&self, power: u32) -> Self {
        MomentPolynomial {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.inv_n == power)
                .map(|(e, c)| (*e, c.clone()))
                .collect(),
        }
    }

    /// Numeric value at `(p₁, p₂, n)`.
    ///
    /// The domain is `0 < p₁`, `0 ≤ p₂`, `p₁ + p₂ ≤ 1` and `n ≥ 1`.
    pub fn evaluate(&self, p1: f64, p2: f64, n: f64) -> Result<f64> {
        check_domain(p1, p2, n)?;
        Ok(self.evaluate_unchecked(p1, p2, n))
    }

    pub(crate) fn evaluate_unchecked(&self, p1: f64, p2: f64, n: f64) -> f64 {
        let u = 1.0 / n;
        self.terms
            .iter()
            .map(|(e, c)| {
                c.to_f64().unwrap_or(f64::NAN) * powi(p1, e.p1) * powi(p2, e.p2) * powi(u, e.inv_n)
            })
            .sum()
    }

    /// Exact value at rational `(p₁, p₂)` and integer `n`.
    pub fn evaluate_exact(
        &self,
        p1: &BigRational,
        p2: &BigRational,
        n: u64,
    ) -> Result<BigRational> {
        if !p1.is_positive() || p2.is_negative() || (p1 + p2) > BigRational::one() || n == 0 {
            return Err(Error::invalid(
                "(p1, p2, n)",
                "require 0 < p1, 0 <= p2, p1 + p2 <= 1, n >= 1",
            ));
        }
        let u = BigRational::new(BigInt::one(), BigInt::from(n));
        Ok(self.evaluate_exact_unchecked(p1, p2, &u))
    }

    /// Exact value at rational `(p₁, p₂, 1/n)` without domain checks.
    pub(crate) fn evaluate_exact_unchecked(
        &self,
        p1: &BigRational,
        p2: &BigRational,
        u: &BigRational,
    ) -> BigRational {
        let powers = |x: &BigRational, max: u32| {
            let mut out = Vec::with_capacity(max as usize + 1);
            out.push(BigRational::one());
            for i in 0..max as usize {
                let next = &out[i] * x;
                out.push(next);
            }
            out
        };
        let max = |f: fn(&Exponents) -> u32| self.terms.keys().map(f).max().unwrap_or(0);
        let (pw1, pw2, pwu) = (
            powers(p1, max(|e| e.p1)),
            powers(p2, max(|e| e.p2)),
            powers(u, max(|e| e.inv_n)),
        );
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            acc += c * &pw1[e.p1 as usize] * &pw2[e.p2 as usize] * &pwu[e.inv_n as usize];
        }
        acc
    }
}

pub(crate) fn check_domain(p1: f64, p2: f64, n: f64) -> Result<()> {
    let ok = p1.is_finite()
        && p2.is_finite()
        && p1 > 0.0
        && p2 >= 0.0
        && p1 + p2 <= 1.0 + 1e-12
        && n.is_finite()
        && n >= 1.0;
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(
            "(p1, p2, n)",
            "require 0 < p1, 0 <= p2, p1 + p2 <= 1, n >= 1",
        ))
    }
}

impl Add<&MomentPolynomial> for &MomentPolynomial {
    type Output = MomentPolynomial;

    fn add(self, rhs: &MomentPolynomial) -> MomentPolynomial {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, c.clone());
        }
        out
    }
}

impl Add for MomentPolynomial {
    type Output = MomentPolynomial;

    fn add(mut self, rhs: MomentPolynomial) -> MomentPolynomial {
        for (e, c) in rhs.terms {
            self.add_term(e, c);
        }
        self
    }
}

impl Sub<&MomentPolynomial> for &MomentPolynomial {
    type Output = MomentPolynomial;

    fn sub(self, rhs: &MomentPolynomial) -> MomentPolynomial {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, -c.clone());
        }
        out
    }
}

impl Sub for MomentPolynomial {
    type Output = MomentPolynomial;

    fn sub(self, rhs: MomentPolynomial) -> MomentPolynomial {
        &self - &rhs
    }
}

impl Neg for MomentPolynomial {
    type Output = MomentPolynomial;

    fn neg(self) -> MomentPolynomial {
        MomentPolynomial {
            terms: self.terms.into_iter().map(|(e, c)| (e, -c)).collect(),
        }
    }
}

impl Mul<&MomentPolynomial> for &MomentPolynomial {
    type Output = MomentPolynomial;

    fn mul(self, rhs: &MomentPolynomial) -> MomentPolynomial {
        let mut out = MomentPolynomial::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = Exponents::new(ea.p1 + eb.p1, ea.p2 + eb.p2, ea.inv_n + eb.inv_n);
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

impl Mul for MomentPolynomial {
    type Output = MomentPolynomial;

    fn mul(self, rhs: MomentPolynomial) -> MomentPolynomial {
        &self * &rhs
    }
}

fn write_factor(out: &mut String, name: &str, power: u32, negative_power: bool) {
    use core::fmt::Write;
    if power == 0 {
        return;
    }
    if !out.is_empty() {
        out.push('*');
    }
    out.push_str(name);
    match (power, negative_power) {
        (1, false) => {}
        (p, false) => {
            let _ = write!(out, "^{p}");
        }
        (p, true) => {
            let _ = write!(out, "^-{p}");
        }
    }
}

/// Canonical form: terms sorted by power of `1/n`, then `p₁`, then `p₂`,
/// e.g. `-p1*p2*n^-1` or `3*p1^2 - 6*p1^3 + 3*p1^4` style products.
impl fmt::Display for MomentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            let mut factors = String::new();
            write_factor(&mut factors, "p1", e.p1, false);
            write_factor(&mut factors, "p2", e.p2, false);
            write_factor(&mut factors, "n", e.inv_n, true);
            let negative = c.is_negative();
            let magnitude = c.abs();
            match (first, negative) {
                (true, true) => f.write_str("-")?,
                (true, false) => {}
                (false, true) => f.write_str(" - ")?,
                (false, false) => f.write_str(" + ")?,
            }
            first = false;
            if factors.is_empty() {
                write!(f, "{magnitude}")?;
            } else if magnitude.is_one() {
                f.write_str(&factors)?;
            } else {
                write!(f, "{magnitude}*{factors}")?;
            }
        }
        Ok(())
    }
}

/// Rational from a ratio of small integers.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// All exponent triples with a non-zero coefficient, in canonical order.
pub fn support(p: &MomentPolynomial) -> Vec<Exponents> {
    p.terms.keys().copied().collect()
}
