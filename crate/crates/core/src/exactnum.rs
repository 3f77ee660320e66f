//! Exact scalar arithmetic: big rationals with p-adic valuations, cyclotomic
//! roots of unity of prime-power order, and formal half-integer powers of p.
//!
//! Everything here is immutable and exact; the only bridge to floating point
//! is [`CyclotomicValue::to_complex`] / [`HalfPowerLaurent::to_complex`].
//! Cyclotomic orders are restricted to prime powers p^k — every additive
//! character value that appears in this crate has such an order — and
//! arithmetic between values attached to different primes is rejected unless
//! one side is plain rational.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Arbitrary-precision rational number, always in reduced canonical form.
pub type Rational = num_rational::BigRational;

/// Convenience constructor: the rational `n/d`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Convenience constructor: the rational integer `n`.
pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExactNumError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("cyclotomic values of coprime orders {0}^{1} and {2}^{3} cannot be combined")]
    MixedOrders(u64, u32, u64, u32),
}

/// Trial-division primality check; inputs here are small (p ≤ a few thousand).
pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p % 2 == 0 {
        return p == 2;
    }
    let mut d = 3u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// p-adic valuation of a rational: the exponent v with x = p^v·(unit), and
/// `Infinite` for x = 0 (so |0|_p = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    /// |x|_p = p^{-v} as a float; 0 for the infinite valuation.
    pub fn abs_p(&self, p: u64) -> f64 {
        match self {
            Valuation::Finite(v) => (p as f64).powi(-(*v as i32)),
            Valuation::Infinite => 0.0,
        }
    }

    pub fn finite(&self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(*v),
            Valuation::Infinite => None,
        }
    }

    /// True when the valuation is ≥ 0 (the value is a p-integer).
    pub fn is_nonnegative(&self) -> bool {
        match self {
            Valuation::Finite(v) => *v >= 0,
            Valuation::Infinite => true,
        }
    }
}

fn int_valuation(n: &BigInt, p: u64) -> i64 {
    debug_assert!(!n.is_zero());
    let pb = BigInt::from(p);
    let mut v = 0i64;
    let mut m = n.clone();
    loop {
        let (q, r) = num_integer::Integer::div_rem(&m, &pb);
        if r.is_zero() {
            v += 1;
            m = q;
        } else {
            return v;
        }
    }
}

/// p-adic valuation of `x`; errors when `p` is not prime.
pub fn valuation(x: &Rational, p: u64) -> Result<Valuation, ExactNumError> {
    if !is_prime(p) {
        return Err(ExactNumError::NotPrime(p));
    }
    if x.is_zero() {
        return Ok(Valuation::Infinite);
    }
    Ok(Valuation::Finite(
        int_valuation(x.numer(), p) - int_valuation(x.denom(), p),
    ))
}

/// A rational viewed through the p-adic absolute value.
#[derive(Debug, Clone, PartialEq)]
pub struct PAdicView {
    pub p: u64,
    pub value: Rational,
}

impl PAdicView {
    pub fn new(p: u64, value: Rational) -> Result<Self, ExactNumError> {
        if !is_prime(p) {
            return Err(ExactNumError::NotPrime(p));
        }
        Ok(PAdicView { p, value })
    }

    pub fn valuation(&self) -> Valuation {
        valuation(&self.value, self.p).expect("p checked prime at construction")
    }

    /// |x|_p as a float.
    pub fn abs(&self) -> f64 {
        self.valuation().abs_p(self.p)
    }

    /// x ∈ Z_p, i.e. valuation ≥ 0.
    pub fn is_integral(&self) -> bool {
        self.valuation().is_nonnegative()
    }

    /// x ∈ Z_p^×, i.e. valuation exactly 0.
    pub fn is_unit(&self) -> bool {
        self.valuation() == Valuation::Finite(0)
    }
}

/// Shorthand used throughout the crate: is `x` p-integral?
pub fn is_p_integral(x: &Rational, p: u64) -> bool {
    valuation(x, p).map(|v| v.is_nonnegative()).unwrap_or(false)
}

/// Shorthand: is `x` a p-adic unit?
pub fn is_p_unit(x: &Rational, p: u64) -> bool {
    valuation(x, p) == Ok(Valuation::Finite(0))
}

// ---------------------------------------------------------------------------
// Cyclotomic values
// ---------------------------------------------------------------------------

/// An element of Q(ζ_{p^k}) for a prime power p^k, stored on the power basis
/// ζ^0, …, ζ^{φ(p^k)−1} after reduction modulo the p^k-th cyclotomic
/// polynomial Φ_{p^k}(X) = Σ_{i<p} X^{i·p^{k−1}}.
///
/// Plain rationals are the degenerate case `p = 0, k = 0` (order 1); they
/// combine freely with any order. Values attached to different primes do not
/// combine (the crate never needs Q(ζ_m) for composite non-prime-power m).
#[derive(Clone, PartialEq, Eq)]
pub struct CyclotomicValue {
    p: u64,
    k: u32,
    coeffs: Vec<Rational>,
}

fn phi_pk(p: u64, k: u32) -> usize {
    debug_assert!(k >= 1);
    (p.pow(k - 1) * (p - 1)) as usize
}

impl CyclotomicValue {
    /// The rational r as a cyclotomic value of order 1.
    pub fn from_rational(r: Rational) -> Self {
        CyclotomicValue { p: 0, k: 0, coeffs: vec![r] }
    }

    pub fn zero_value() -> Self {
        Self::from_rational(Rational::zero())
    }

    pub fn one_value() -> Self {
        Self::from_rational(Rational::one())
    }

    /// ζ_{p^k}^a, reduced. `k = 0` gives 1 regardless of `a`.
    pub fn root_of_unity(p: u64, k: u32, a: u64) -> Result<Self, ExactNumError> {
        if !is_prime(p) {
            return Err(ExactNumError::NotPrime(p));
        }
        if k == 0 {
            return Ok(Self::one_value());
        }
        let order = p.pow(k);
        let mut dense = vec![Rational::zero(); order as usize];
        dense[(a % order) as usize] = Rational::one();
        Ok(Self::reduce(p, k, dense))
    }

    /// Reduce a dense coefficient vector on ζ^0..ζ^{p^k−1} to the power basis.
    fn reduce(p: u64, k: u32, mut dense: Vec<Rational>) -> Self {
        let phi = phi_pk(p, k);
        let step = p.pow(k - 1) as usize;
        for e in (phi..dense.len()).rev() {
            if dense[e].is_zero() {
                continue;
            }
            let c = std::mem::replace(&mut dense[e], Rational::zero());
            for j in 1..p as usize {
                let tgt = e - j * step;
                dense[tgt] = &dense[tgt] - &c;
            }
        }
        dense.truncate(phi);
        CyclotomicValue { p, k, coeffs: dense }.normalized()
    }

    /// Demote to a plain rational when possible; canonical form invariant.
    fn normalized(mut self) -> Self {
        if self.k >= 1 && self.coeffs[1..].iter().all(|c| c.is_zero()) {
            let c0 = self.coeffs.swap_remove(0);
            return Self::from_rational(c0);
        }
        self
    }

    /// The value as a rational, when it is one.
    pub fn as_rational(&self) -> Option<&Rational> {
        if self.k == 0 {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    pub fn order(&self) -> u64 {
        if self.k == 0 {
            1
        } else {
            self.p.pow(self.k)
        }
    }

    fn promote(&self, p: u64, k: u32) -> Vec<Rational> {
        // Re-express on the ζ_{p^k} power basis (k ≥ self.k).
        let order = p.pow(k) as usize;
        let mut dense = vec![Rational::zero(); order];
        if self.k == 0 {
            dense[0] = self.coeffs[0].clone();
        } else {
            let stretch = p.pow(k - self.k) as usize;
            for (e, c) in self.coeffs.iter().enumerate() {
                dense[e * stretch] = c.clone();
            }
        }
        dense
    }

    fn common_frame(&self, other: &Self) -> Result<(u64, u32), ExactNumError> {
        match (self.k, other.k) {
            (0, 0) => Ok((0, 0)),
            (0, _) => Ok((other.p, other.k)),
            (_, 0) => Ok((self.p, self.k)),
            _ if self.p == other.p => Ok((self.p, self.k.max(other.k))),
            _ => Err(ExactNumError::MixedOrders(self.p, self.k, other.p, other.k)),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, ExactNumError> {
        let (p, k) = self.common_frame(other)?;
        if k == 0 {
            return Ok(Self::from_rational(&self.coeffs[0] + &other.coeffs[0]));
        }
        let mut a = self.promote(p, k);
        let b = other.promote(p, k);
        for (x, y) in a.iter_mut().zip(b) {
            *x = &*x + y;
        }
        Ok(Self::reduce(p, k, a))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, ExactNumError> {
        let (p, k) = self.common_frame(other)?;
        if k == 0 {
            return Ok(Self::from_rational(&self.coeffs[0] * &other.coeffs[0]));
        }
        let order = p.pow(k) as usize;
        let a = self.promote(p, k);
        let b = other.promote(p, k);
        let mut prod = vec![Rational::zero(); order];
        for (i, ai) in a.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                if bj.is_zero() {
                    continue;
                }
                let t = (i + j) % order;
                prod[t] = &prod[t] + ai * bj;
            }
        }
        Ok(Self::reduce(p, k, prod))
    }

    /// Complex conjugate: ζ ↦ ζ^{-1} (coefficients are rational).
    pub fn conj(&self) -> Self {
        if self.k == 0 {
            return self.clone();
        }
        let order = self.p.pow(self.k) as usize;
        let mut dense = vec![Rational::zero(); order];
        for (e, c) in self.coeffs.iter().enumerate() {
            dense[(order - e) % order] = c.clone();
        }
        Self::reduce(self.p, self.k, dense)
    }

    pub fn is_zero_value(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Standard embedding ζ_{p^k} ↦ e^{2πi/p^k}.
    pub fn to_complex(&self) -> Complex64 {
        if self.k == 0 {
            let c = &self.coeffs[0];
            return Complex64::new(big_to_f64(c), 0.0);
        }
        let order = self.p.pow(self.k) as f64;
        let mut z = Complex64::new(0.0, 0.0);
        for (e, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let theta = 2.0 * std::f64::consts::PI * (e as f64) / order;
            z += big_to_f64(c) * Complex64::new(theta.cos(), theta.sin());
        }
        z
    }
}

impl fmt::Debug for CyclotomicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.as_rational() {
            return write!(f, "{}", r);
        }
        let mut first = true;
        for (e, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if e == 0 {
                write!(f, "{}", c)?;
            } else {
                write!(f, "{}·ζ{}^{}", c, self.order(), e)?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Add for CyclotomicValue {
    type Output = CyclotomicValue;
    fn add(self, rhs: Self) -> Self {
        self.try_add(&rhs).expect("cyclotomic orders must share a prime")
    }
}

impl Sub for CyclotomicValue {
    type Output = CyclotomicValue;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for CyclotomicValue {
    type Output = CyclotomicValue;
    fn mul(self, rhs: Self) -> Self {
        self.try_mul(&rhs).expect("cyclotomic orders must share a prime")
    }
}

impl Neg for CyclotomicValue {
    type Output = CyclotomicValue;
    fn neg(mut self) -> Self {
        for c in &mut self.coeffs {
            *c = -std::mem::take(c);
        }
        self
    }
}

impl Zero for CyclotomicValue {
    fn zero() -> Self {
        Self::zero_value()
    }
    fn is_zero(&self) -> bool {
        self.is_zero_value()
    }
}

impl One for CyclotomicValue {
    fn one() -> Self {
        Self::one_value()
    }
}

/// Convert a big rational to f64 (numerator/denominator division; fine for
/// the heights that occur here).
pub fn big_to_f64(r: &Rational) -> f64 {
    // Direct conversion overflows for big numerator/denominator, so scale
    // both down together when they are large.
    let n = r.numer();
    let d = r.denom();
    let nb = n.bits();
    let db = d.bits();
    if nb <= 52 && db <= 52 {
        let nf = n.to_string().parse::<f64>().unwrap_or(f64::NAN);
        let df = d.to_string().parse::<f64>().unwrap_or(f64::NAN);
        return nf / df;
    }
    let shift = nb.max(db).saturating_sub(52) as u32;
    let ns = n >> shift;
    let ds = d >> shift;
    let nf = ns.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let df = ds.to_string().parse::<f64>().unwrap_or(f64::NAN);
    nf / df
}

/// ψ_p(x) = e^{2πi · frac_p(x)} exactly, where frac_p(x) ∈ Z[1/p]/Z is the
/// p-fractional part. The result is a p^k-th root of unity for
/// k = max(0, −v_p(x)); in particular ψ_p is trivial on p-integers.
pub fn psi_p(x: &Rational, p: u64) -> Result<CyclotomicValue, ExactNumError> {
    let v = valuation(x, p)?;
    let k = match v {
        Valuation::Finite(v) if v < 0 => (-v) as u32,
        _ => return Ok(CyclotomicValue::one_value()),
    };
    let pk = BigInt::from(p.pow(k));
    // x = N / (p^k · D') with D' coprime to p; frac_p(x) = (N·D'^{-1} mod p^k)/p^k.
    let n = x.numer().clone();
    let dprime: BigInt = x.denom() / &pk;
    let inv = mod_inverse(&dprime, &pk).expect("denominator coprime to p^k");
    let a = num_integer::Integer::mod_floor(&(n * inv), &pk);
    let a_u64 = u64::try_from(&a).expect("residue fits in u64");
    CyclotomicValue::root_of_unity(p, k, a_u64)
}

/// ψ_p(x) as a complex double, bypassing the exact representation.
pub fn psi_p_complex(x: &Rational, p: u64) -> Complex64 {
    psi_p(x, p).expect("prime").to_complex()
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = num_integer::Integer::extended_gcd(a, m);
    if e.gcd.is_one() {
        Some(num_integer::Integer::mod_floor(&e.x, m))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Formal half-integer powers of p
// ---------------------------------------------------------------------------

/// Finite formal sum Σ_m c_m · q^{m/2} with q = p and cyclotomic coefficients.
///
/// Keys are the numerators m of the half-integer exponents m/2, so integer
/// powers of p sit at even keys. The base records which prime q stands for;
/// constants (only the m = 0 term) carry base 0 and combine with any prime.
/// In exact mode √p is never evaluated — only [`Self::to_complex`] does.
#[derive(Clone, PartialEq)]
pub struct HalfPowerLaurent {
    base: u64,
    terms: BTreeMap<i64, CyclotomicValue>,
}

impl HalfPowerLaurent {
    pub fn zero_value() -> Self {
        HalfPowerLaurent { base: 0, terms: BTreeMap::new() }
    }

    pub fn constant(c: CyclotomicValue) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero_value() {
            terms.insert(0, c);
        }
        HalfPowerLaurent { base: 0, terms }
    }

    pub fn from_rational(r: Rational) -> Self {
        Self::constant(CyclotomicValue::from_rational(r))
    }

    /// c · q^{m/2}.
    pub fn monomial(p: u64, m: i64, c: CyclotomicValue) -> Self {
        if c.is_zero_value() {
            return Self::zero_value();
        }
        let mut terms = BTreeMap::new();
        terms.insert(m, c);
        HalfPowerLaurent { base: if m == 0 { 0 } else { p }, terms }
    }

    /// q^{m/2} with unit coefficient.
    pub fn power(p: u64, m: i64) -> Self {
        Self::monomial(p, m, CyclotomicValue::one_value())
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn terms(&self) -> &BTreeMap<i64, CyclotomicValue> {
        &self.terms
    }

    fn unify_base(a: u64, b: u64) -> u64 {
        match (a, b) {
            (0, b) => b,
            (a, 0) => a,
            (a, b) => {
                assert_eq!(a, b, "half-power values must share their base prime");
                a
            }
        }
    }

    fn normalized(mut self) -> Self {
        self.terms.retain(|_, c| !c.is_zero_value());
        if self.terms.keys().all(|&m| m == 0) {
            self.base = 0;
        }
        self
    }

    /// The constant term as a rational, when the whole value is one.
    pub fn as_rational(&self) -> Option<Rational> {
        if self.terms.is_empty() {
            return Some(Rational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&0) {
                return c.as_rational().cloned();
            }
        }
        None
    }

    pub fn conj(&self) -> Self {
        HalfPowerLaurent {
            base: self.base,
            terms: self.terms.iter().map(|(&m, c)| (m, c.conj())).collect(),
        }
    }

    /// Evaluate with q^{1/2} ↦ √p.
    pub fn to_complex(&self) -> Complex64 {
        let sqrt_p = (self.base.max(1) as f64).sqrt();
        let mut z = Complex64::new(0.0, 0.0);
        for (&m, c) in &self.terms {
            z += c.to_complex() * sqrt_p.powi(m as i32);
        }
        z
    }
}

impl fmt::Debug for HalfPowerLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *m == 0 {
                write!(f, "({:?})", c)?;
            } else {
                write!(f, "({:?})·q^({}/2)", c, m)?;
            }
        }
        Ok(())
    }
}

impl Add for HalfPowerLaurent {
    type Output = HalfPowerLaurent;
    fn add(self, rhs: Self) -> Self {
        let base = Self::unify_base(self.base, rhs.base);
        let mut terms = self.terms;
        for (m, c) in rhs.terms {
            let entry = terms.entry(m).or_insert_with(CyclotomicValue::zero_value);
            *entry = entry.try_add(&c).expect("coefficient orders compatible");
        }
        HalfPowerLaurent { base, terms }.normalized()
    }
}

impl Sub for HalfPowerLaurent {
    type Output = HalfPowerLaurent;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for HalfPowerLaurent {
    type Output = HalfPowerLaurent;
    fn mul(self, rhs: Self) -> Self {
        let base = Self::unify_base(self.base, rhs.base);
        let mut terms: BTreeMap<i64, CyclotomicValue> = BTreeMap::new();
        for (&m1, c1) in &self.terms {
            for (&m2, c2) in &rhs.terms {
                let c = c1.try_mul(c2).expect("coefficient orders compatible");
                let entry = terms.entry(m1 + m2).or_insert_with(CyclotomicValue::zero_value);
                *entry = entry.try_add(&c).expect("coefficient orders compatible");
            }
        }
        HalfPowerLaurent { base, terms }.normalized()
    }
}

impl Neg for HalfPowerLaurent {
    type Output = HalfPowerLaurent;
    fn neg(self) -> Self {
        HalfPowerLaurent {
            base: self.base,
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl Zero for HalfPowerLaurent {
    fn zero() -> Self {
        Self::zero_value()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for HalfPowerLaurent {
    fn one() -> Self {
        Self::constant(CyclotomicValue::one_value())
    }
}

/// Positive-part helper: max(0, −v_p(x)) — the k with ψ_p(x) of order p^k.
pub fn psi_order_exponent(x: &Rational, p: u64) -> u32 {
    match valuation(x, p) {
        Ok(Valuation::Finite(v)) if v < 0 => (-v) as u32,
        _ => 0,
    }
}
