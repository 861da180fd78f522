//! Central moments of `B(p, n)/n` and of the bivariate marginal of
//! `Multinomial(p, n)/n`.
//!
//! Both are produced symbolically by derivative recursions:
//!
//! ```text
//! μ_{m+1}   = p(1−p)/n · [ m μ_{m−1} + dμ_m/dp ]                        (binomial)
//! μ_{m+1,k} = p₁/n · [ (1−p₁) ∂₁μ_{m,k} − p₂ ∂₂μ_{m,k}
//!                      + (1−p₁) m μ_{m−1,k} − p₂ k μ_{m,k−1} ]            (multinomial)
//! ```
//!
//! with the mirror-image recursion for `μ_{m,k+1}`. [`exact_moment_bruteforce`]
//! enumerates the multinomial support and is the independent oracle.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};

use crate::poly::{check_domain, MomentPolynomial};
use crate::{Error, Result};

/// Total order up to which closed-form moments are needed for the `O(n⁻⁴)`
/// variance expansion.
pub const TRUNCATION_ORDER: u32 = 6;

/// Largest `n` accepted by the brute-force oracle.
pub const BRUTEFORCE_MAX_N: u64 = 12;

/// Order `(m, k)` of a mixed central moment `E[(p̂₁−p₁)^m (p̂₂−p₂)^k]`.
/// `k = 0` is the binomial case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MomentOrder {
    pub m: u32,
    pub k: u32,
}

impl MomentOrder {
    pub const fn new(m: u32, k: u32) -> Self {
        MomentOrder { m, k }
    }

    pub const fn binomial(m: u32) -> Self {
        MomentOrder { m, k: 0 }
    }

    pub const fn total(&self) -> u32 {
        self.m + self.k
    }

    /// Orders above [`TRUNCATION_ORDER`] are computable but lie beyond the
    /// truncation used by the variance expansion.
    pub const fn beyond_truncation(&self) -> bool {
        self.total() > TRUNCATION_ORDER
    }

    pub const fn swapped(&self) -> Self {
        MomentOrder {
            m: self.k,
            k: self.m,
        }
    }
}

/// `m`-th central moment of `B(p, n)/n` as a polynomial in `(p, 1/n)`, with
/// `p` stored as the `p₁` variable.
pub fn binomial_central_moment(m: u32) -> MomentPolynomial {
    let p = MomentPolynomial::p1();
    let spread = &(&p * &(&MomentPolynomial::one() - &p)) * &MomentPolynomial::inv_n();

    let mut prev = MomentPolynomial::one(); // μ_0
    let mut cur = MomentPolynomial::zero(); // μ_1
    match m {
        0 => return prev,
        1 => return cur,
        _ => {}
    }
    for j in 1..m {
        let bracket = &prev.scale_int(i64::from(j)) + &cur.d_dp1();
        let next = &spread * &bracket;
        prev = cur;
        cur = next;
    }
    cur
}

/// Memo table for multinomial moments; build once and query many orders.
#[derive(Clone, Debug, Default)]
pub struct MomentTable {
    cache: BTreeMap<MomentOrder, MomentPolynomial>,
}

impl MomentTable {
    pub fn new() -> Self {
        MomentTable::default()
    }

    pub fn get(&mut self, order: MomentOrder) -> MomentPolynomial {
        if let Some(p) = self.cache.get(&order) {
            return p.clone();
        }
        let p = self.compute(order);
        self.cache.insert(order, p.clone());
        p
    }

    fn get_signed(&mut self, m: i64, k: i64) -> MomentPolynomial {
        if m < 0 || k < 0 {
            MomentPolynomial::zero()
        } else {
            self.get(MomentOrder::new(m as u32, k as u32))
        }
    }

    fn compute(&mut self, order: MomentOrder) -> MomentPolynomial {
        let MomentOrder { m, k } = order;
        if m == 0 && k == 0 {
            return MomentPolynomial::one();
        }
        let p1 = MomentPolynomial::p1();
        let p2 = MomentPolynomial::p2();
        let one = MomentPolynomial::one();
        let u = MomentPolynomial::inv_n();
        if m >= 1 {
            // μ_{m,k} from the step in the first index applied to (m−1, k).
            let mm = i64::from(m) - 1;
            let kk = i64::from(k);
            let base = self.get_signed(mm, kk);
            let lower_m = self.get_signed(mm - 1, kk);
            let lower_k = self.get_signed(mm, kk - 1);
            let q1 = &one - &p1;
            let bracket = &(&(&q1 * &base.d_dp1()) - &(&p2 * &base.d_dp2()))
                + &(&(&q1 * &lower_m).scale_int(mm) - &(&p2 * &lower_k).scale_int(kk));
            &(&p1 * &u) * &bracket
        } else {
            let kk = i64::from(k) - 1;
            let base = self.get_signed(0, kk);
            let lower_k = self.get_signed(0, kk - 1);
            let q2 = &one - &p2;
            let bracket = &(&(&q2 * &base.d_dp2()) - &(&p1 * &base.d_dp1()))
                + &(&q2 * &lower_k).scale_int(kk);
            &(&p2 * &u) * &bracket
        }
    }
}

/// Mixed central moment `μ_{m,k}` of `(p̂₁, p̂₂) ~ Multinomial(p₁, p₂, n)/n`.
pub fn multinomial_central_moment(order: MomentOrder) -> MomentPolynomial {
    MomentTable::new().get(order)
}

/// Value of a moment polynomial at `(p₁, p₂, n)`, computed exactly at the
/// rational values of the inputs and rounded once.
///
/// The domain is `0 < p₁`, `0 ≤ p₂`, `p₁ + p₂ ≤ 1` and `n ≥ 1`.
pub fn evaluate(poly: &MomentPolynomial, p1: f64, p2: f64, n: u64) -> Result<f64> {
    check_domain(p1, p2, n as f64)?;
    let exact = |x: f64| {
        BigRational::from_float(x).ok_or_else(|| Error::invalid("probability", "must be finite"))
    };
    let u = BigRational::new(BigInt::from(1), BigInt::from(n));
    let v = poly.evaluate_exact_unchecked(&exact(p1)?, &exact(p2)?, &u);
    Ok(v.to_f64().unwrap_or(f64::NAN))
}

/// Closest small-denominator rational to `x`.
pub fn to_rational(x: f64) -> Result<BigRational> {
    let r: Ratio<i64> = Ratio::approximate_float(x)
        .ok_or_else(|| Error::invalid("probability", "not representable as a rational"))?;
    Ok(BigRational::new(
        BigInt::from(*r.numer()),
        BigInt::from(*r.denom()),
    ))
}

/// Exact `μ_{m,k}` by enumerating every outcome of `Multinomial(probs, n)`.
///
/// The moment is taken over the first two categories (`m` on the first, `k`
/// on the second); any further categories only shape the distribution.
pub fn exact_moment_bruteforce_rational(
    probs: &[BigRational],
    n: u64,
    order: MomentOrder,
) -> Result<BigRational> {
    if n > BRUTEFORCE_MAX_N {
        return Err(Error::EnumerationTooLarge {
            n,
            max: BRUTEFORCE_MAX_N,
        });
    }
    if probs.len() < 2 {
        return Err(Error::invalid("probs", "need at least two categories"));
    }
    if probs.iter().any(|p| *p <= BigRational::zero()) {
        return Err(Error::invalid(
            "probs",
            "every probability must be positive",
        ));
    }
    let total: BigRational = probs
        .iter()
        .cloned()
        .fold(BigRational::zero(), |a, b| a + b);
    if !total.is_one() {
        return Err(Error::invalid("probs", "must sum to exactly 1"));
    }

    let n_big = BigRational::from_integer(BigInt::from(n));
    let p1 = &probs[0];
    let p2 = &probs[1];
    let factorials = factorial_table(n);

    let mut acc = BigRational::zero();
    let mut counts = vec![0u64; probs.len()];
    enumerate_compositions(n, 0, &mut counts, &mut |x| {
        // multinomial coefficient · Π p_i^{x_i}
        let mut weight = BigRational::from_integer(factorials[n as usize].clone());
        for (xi, pi) in x.iter().zip(probs) {
            weight /= BigRational::from_integer(factorials[*xi as usize].clone());
            for _ in 0..*xi {
                weight *= pi;
            }
        }
        let d1 = BigRational::from_integer(BigInt::from(x[0])) / &n_big - p1;
        let d2 = BigRational::from_integer(BigInt::from(x[1])) / &n_big - p2;
        let mut v = weight;
        for _ in 0..order.m {
            v *= &d1;
        }
        for _ in 0..order.k {
            v *= &d2;
        }
        acc += v;
    });
    Ok(acc)
}

/// Floating-point front end for [`exact_moment_bruteforce_rational`].
///
/// Each probability is converted to its closest small-denominator rational;
/// the last entry absorbs any rounding so the vector sums to exactly 1.
pub fn exact_moment_bruteforce(probs: &[f64], n: u64, order: MomentOrder) -> Result<f64> {
    crate::entropy::validate_probabilities(probs)?;
    let mut rationals = probs
        .iter()
        .map(|&p| to_rational(p))
        .collect::<Result<Vec<_>>>()?;
    let head: BigRational = rationals[..rationals.len() - 1]
        .iter()
        .cloned()
        .fold(BigRational::zero(), |a, b| a + b);
    let last = BigRational::one() - head;
    let idx = rationals.len() - 1;
    rationals[idx] = last;
    let exact = exact_moment_bruteforce_rational(&rationals, n, order)?;
    Ok(exact.to_f64().unwrap_or(f64::NAN))
}

fn factorial_table(n: u64) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = BigInt::one();
    out.push(acc.clone());
    for i in 1..=n {
        acc *= BigInt::from(i);
        out.push(acc.clone());
    }
    out
}

fn enumerate_compositions(
    remaining: u64,
    idx: usize,
    counts: &mut [u64],
    visit: &mut impl FnMut(&[u64]),
) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        visit(counts);
        return;
    }
    for x in 0..=remaining {
        counts[idx] = x;
        enumerate_compositions(remaining - x, idx + 1, counts, visit);
    }
}

/// Number of points in the support of `Multinomial(·, n)` over `categories` cells.
pub fn support_size(categories: usize, n: u64) -> u64 {
    let mut c = vec![0u64; categories];
    let mut count = 0u64;
    enumerate_compositions(n, 0, &mut c, &mut |_| count += 1);
    count
}
