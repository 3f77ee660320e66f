//! Symmetric-function and matrix-identity engine.
//!
//! Sparse multivariate Laurent polynomials over an arbitrary coefficient ring,
//! square matrices over such rings, elementary/complete/Schur polynomials, the
//! Vandermonde factorization 𝕍 = 𝔼·ℍ with its closed-form inverse, the
//! matrices 𝔻(Z,T), 𝔻*(Z,T), ℙ_m(T), and a contour-quadrature oracle for the
//! (n−1)-fold residue identity used to collapse torus integrals to Satake
//! points.

use crate::exactnum::Rational;
use num_complex::Complex64;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SymfunError {
    #[error("index {0} is negative")]
    NegativeIndex(i64),
    #[error("tuple must be regular (pairwise distinct entries)")]
    NotRegular,
    #[error("e_n(T) = 0 is not allowed here")]
    SingularTorus,
    #[error("point outside the convergence region")]
    OutsideConvergenceRegion,
}

/// Coefficient-ring bound used across the symbolic engine. Blanket-implemented
/// for anything with exact ring operations and decidable equality: rationals,
/// complex doubles, cyclotomic values, half-power sums, and polynomials
/// themselves.
pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Neg<Output = Self>
    + Sub<Output = Self>
{
}

impl<T> Coeff for T where
    T: Clone + PartialEq + fmt::Debug + Zero + One + Neg<Output = T> + Sub<Output = T>
{
}

/// Coefficients that also support exact division (fields, numerically the
/// complex doubles).
pub trait FieldCoeff: Coeff + Div<Output = Self> {}
impl<T> FieldCoeff for T where T: Coeff + Div<Output = T> {}

// ---------------------------------------------------------------------------
// Sparse multivariate Laurent polynomials
// ---------------------------------------------------------------------------

/// Sparse multivariate Laurent polynomial: finitely many terms, each keyed by
/// an integer exponent vector (trailing zeros trimmed, so the key length is
/// the largest variable index actually used plus one).
#[derive(Clone, PartialEq)]
pub struct MultiPoly<C> {
    terms: BTreeMap<Vec<i32>, C>,
}

fn trim_key(mut k: Vec<i32>) -> Vec<i32> {
    while k.last() == Some(&0) {
        k.pop();
    }
    k
}

impl<C: Coeff> MultiPoly<C> {
    pub fn zero_poly() -> Self {
        MultiPoly { terms: BTreeMap::new() }
    }

    pub fn constant(c: C) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        MultiPoly { terms }
    }

    /// The variable x_i (0-indexed).
    pub fn var(i: usize) -> Self {
        let mut key = vec![0i32; i + 1];
        key[i] = 1;
        Self::monomial(key, C::one())
    }

    /// c · ∏ x_i^{e_i}; negative exponents give Laurent monomials.
    pub fn monomial(exps: Vec<i32>, c: C) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(trim_key(exps), c);
        }
        MultiPoly { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero_poly(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest variable index used, plus one.
    pub fn nvars(&self) -> usize {
        self.terms.keys().map(|k| k.len()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, var: usize) -> Option<i32> {
        self.terms
            .keys()
            .map(|k| k.get(var).copied().unwrap_or(0))
            .max()
    }

    fn insert_term(terms: &mut BTreeMap<Vec<i32>, C>, key: Vec<i32>, c: C) {
        if c.is_zero() {
            return;
        }
        match terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().clone() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    e.insert(s);
                }
            }
        }
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> MultiPoly<D> {
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            let d = f(c);
            if !d.is_zero() {
                terms.insert(k.clone(), d);
            }
        }
        MultiPoly { terms }
    }

    /// Apply a permutation of the variables: x_i ↦ x_{perm[i]}.
    pub fn permute_vars(&self, perm: &[usize]) -> Self {
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            let mut nk = vec![0i32; perm.len().max(k.len())];
            for (i, &e) in k.iter().enumerate() {
                let tgt = if i < perm.len() { perm[i] } else { i };
                if nk.len() <= tgt {
                    nk.resize(tgt + 1, 0);
                }
                nk[tgt] += e;
            }
            Self::insert_term(&mut terms, trim_key(nk), c.clone());
        }
        MultiPoly { terms }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut acc = Self::constant(C::one());
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }

    /// Exact division: returns `Some(q)` with `self = q·d` when `d` divides
    /// exactly, `None` otherwise. Lex-leading-term long division; coefficient
    /// divisions must be exact in C (used with field coefficients).
    pub fn div_exact(&self, d: &Self) -> Option<Self>
    where
        C: FieldCoeff,
    {
        assert!(!d.is_zero_poly(), "division by the zero polynomial");
        let (dk, dc) = d.terms.iter().next_back().map(|(k, c)| (k.clone(), c.clone()))?;
        let mut rem = self.clone();
        let mut q = MultiPoly::zero_poly();
        while !rem.is_zero_poly() {
            let (rk, rc) = {
                let (k, c) = rem.terms.iter().next_back().unwrap();
                (k.clone(), c.clone())
            };
            // monomial quotient rk - dk
            let len = rk.len().max(dk.len());
            let mut mk = vec![0i32; len];
            for i in 0..len {
                mk[i] = rk.get(i).copied().unwrap_or(0) - dk.get(i).copied().unwrap_or(0);
            }
            let mc = rc / dc.clone();
            let mono = MultiPoly::monomial(mk, mc);
            // In a lex order the leading term of mono*d is mono*lead(d) = lead(rem),
            // so the subtraction strictly decreases the leading key; if the
            // division is not exact we eventually fail to terminate on a
            // growing Laurent tail — guard with an iteration cap.
            if q.num_terms() > 1000 + 8 * (self.num_terms() + 1) * (d.num_terms() + 1) {
                return None;
            }
            q = q + mono.clone();
            rem = rem - mono * d.clone();
        }
        Some(q)
    }

    /// Evaluate at a point; requires field coefficients for negative powers.
    pub fn eval(&self, xs: &[C]) -> C
    where
        C: FieldCoeff,
    {
        let mut total = C::zero();
        for (k, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in k.iter().enumerate() {
                let x = xs.get(i).expect("evaluation point too short").clone();
                if e >= 0 {
                    for _ in 0..e {
                        t = t * x.clone();
                    }
                } else {
                    for _ in 0..(-e) {
                        t = t / x.clone();
                    }
                }
            }
            total = total + t;
        }
        total
    }
}

impl<C: Coeff> fmt::Debug for MultiPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:?})", c)?;
            for (i, &e) in k.iter().enumerate() {
                if e != 0 {
                    write!(f, "·x{}^{}", i, e)?;
                }
            }
        }
        Ok(())
    }
}

impl<C: Coeff> Add for MultiPoly<C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut terms = self.terms;
        for (k, c) in rhs.terms {
            Self::insert_term(&mut terms, k, c);
        }
        MultiPoly { terms }
    }
}

impl<C: Coeff> Sub for MultiPoly<C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<C: Coeff> Neg for MultiPoly<C> {
    type Output = Self;
    fn neg(self) -> Self {
        MultiPoly {
            terms: self.terms.into_iter().map(|(k, c)| (k, -c)).collect(),
        }
    }
}

impl<C: Coeff> Mul for MultiPoly<C> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut terms = BTreeMap::new();
        for (k1, c1) in &self.terms {
            for (k2, c2) in &rhs.terms {
                let len = k1.len().max(k2.len());
                let mut k = vec![0i32; len];
                for i in 0..len {
                    k[i] = k1.get(i).copied().unwrap_or(0) + k2.get(i).copied().unwrap_or(0);
                }
                Self::insert_term(&mut terms, trim_key(k), c1.clone() * c2.clone());
            }
        }
        MultiPoly { terms }
    }
}

impl<C: Coeff> Zero for MultiPoly<C> {
    fn zero() -> Self {
        Self::zero_poly()
    }
    fn is_zero(&self) -> bool {
        self.is_zero_poly()
    }
}

impl<C: Coeff> One for MultiPoly<C> {
    fn one() -> Self {
        Self::constant(C::one())
    }
}

// ---------------------------------------------------------------------------
// Rational functions (no gcd normalization; equality by cross-multiplication)
// ---------------------------------------------------------------------------

/// Fraction of two multivariate polynomials. No GCD reduction is attempted —
/// equality is decided exactly by cross-multiplication, which is all the
/// identity checks need. Additions over a common denominator are detected to
/// keep growth down.
#[derive(Clone)]
pub struct RatFun<C> {
    pub num: MultiPoly<C>,
    pub den: MultiPoly<C>,
}

impl<C: Coeff> RatFun<C> {
    pub fn from_poly(p: MultiPoly<C>) -> Self {
        RatFun { num: p, den: MultiPoly::one() }
    }

    pub fn new(num: MultiPoly<C>, den: MultiPoly<C>) -> Self {
        assert!(!den.is_zero_poly(), "zero denominator");
        RatFun { num, den }
    }

    pub fn is_zero_fun(&self) -> bool {
        self.num.is_zero_poly()
    }
}

impl<C: Coeff> PartialEq for RatFun<C> {
    fn eq(&self, other: &Self) -> bool {
        self.num.clone() * other.den.clone() == other.num.clone() * self.den.clone()
    }
}

impl<C: Coeff> fmt::Debug for RatFun<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] / [{:?}]", self.num, self.den)
    }
}

impl<C: Coeff> Add for RatFun<C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if self.den == rhs.den {
            return RatFun { num: self.num + rhs.num, den: self.den };
        }
        RatFun {
            num: self.num * rhs.den.clone() + rhs.num * self.den.clone(),
            den: self.den * rhs.den,
        }
    }
}

impl<C: Coeff> Sub for RatFun<C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<C: Coeff> Neg for RatFun<C> {
    type Output = Self;
    fn neg(self) -> Self {
        RatFun { num: -self.num, den: self.den }
    }
}

impl<C: Coeff> Mul for RatFun<C> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        RatFun { num: self.num * rhs.num, den: self.den * rhs.den }
    }
}

impl<C: Coeff> Div for RatFun<C> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert!(!rhs.num.is_zero_poly(), "division by zero rational function");
        RatFun { num: self.num * rhs.den, den: self.den * rhs.num }
    }
}

impl<C: Coeff> Zero for RatFun<C> {
    fn zero() -> Self {
        Self::from_poly(MultiPoly::zero_poly())
    }
    fn is_zero(&self) -> bool {
        self.is_zero_fun()
    }
}

impl<C: Coeff> One for RatFun<C> {
    fn one() -> Self {
        Self::from_poly(MultiPoly::one())
    }
}

// ---------------------------------------------------------------------------
// Square matrices over a coefficient ring
// ---------------------------------------------------------------------------

/// Dense square matrix over any [`Coeff`] ring (polynomials, rationals,
/// complex doubles, rational functions).
#[derive(Clone, PartialEq)]
pub struct SquareMatrix<C> {
    pub n: usize,
    entries: Vec<C>,
}

impl<C: Coeff> SquareMatrix<C> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        SquareMatrix { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { C::one() } else { C::zero() })
    }

    pub fn at(&self, i: usize, j: usize) -> &C {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, c: C) {
        self.entries[i * self.n + j] = c;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.at(j, i).clone())
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> SquareMatrix<D> {
        SquareMatrix {
            n: self.n,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self::from_fn(self.n, |i, j| {
            let mut acc = C::zero();
            for k in 0..self.n {
                acc = acc + self.at(i, k).clone() * rhs.at(k, j).clone();
            }
            acc
        })
    }

    pub fn scale(&self, c: &C) -> Self {
        self.map(|e| e.clone() * c.clone())
    }

    pub fn add_mat(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self::from_fn(self.n, |i, j| self.at(i, j).clone() + rhs.at(i, j).clone())
    }

    pub fn sub_mat(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self::from_fn(self.n, |i, j| self.at(i, j).clone() - rhs.at(i, j).clone())
    }

    /// Determinant by cofactor expansion — exact over any ring, intended for
    /// the small dimensions (n ≤ 6) used here.
    pub fn det(&self) -> C {
        fn rec<C: Coeff>(m: &SquareMatrix<C>, rows: &mut Vec<usize>, col: usize) -> C {
            if col == m.n {
                return C::one();
            }
            let mut acc = C::zero();
            for k in 0..rows.len() {
                let r = rows.remove(k);
                if !m.at(r, col).is_zero() {
                    let term = m.at(r, col).clone() * rec(m, rows, col + 1);
                    if k % 2 == 0 {
                        acc = acc + term;
                    } else {
                        acc = acc - term;
                    }
                }
                rows.insert(k, r);
            }
            acc
        }
        let mut rows: Vec<usize> = (0..self.n).collect();
        rec(self, &mut rows, 0)
    }
}

impl<C: Coeff> fmt::Debug for SquareMatrix<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[")?;
        for i in 0..self.n {
            write!(f, "  [")?;
            for j in 0..self.n {
                write!(f, "{:?}{}", self.at(i, j), if j + 1 < self.n { ", " } else { "" })?;
            }
            writeln!(f, "]")?;
        }
        write!(f, "]")
    }
}

// ---------------------------------------------------------------------------
// Elementary / complete / Schur polynomials
// ---------------------------------------------------------------------------

/// e_l(x) for 0 ≤ l (zero for l > #x, per the generating series ∏(1+x_jZ)).
pub fn e<C: Coeff>(l: usize, xs: &[C]) -> C {
    if l > xs.len() {
        return C::zero();
    }
    let mut table = vec![C::zero(); l + 1];
    table[0] = C::one();
    for x in xs {
        for k in (1..=l).rev() {
            table[k] = table[k].clone() + table[k - 1].clone() * x.clone();
        }
    }
    table.pop().unwrap()
}

/// Table of h_0..h_max (coefficients of ∏(1−x_jZ)^{-1}).
pub fn h_table<C: Coeff>(max: usize, xs: &[C]) -> Vec<C> {
    let mut table = vec![C::zero(); max + 1];
    table[0] = C::one();
    for x in xs {
        for k in 1..=max {
            let prev = table[k - 1].clone();
            table[k] = table[k].clone() + prev * x.clone();
        }
    }
    table
}

/// h_l(x).
pub fn h<C: Coeff>(l: usize, xs: &[C]) -> C {
    h_table(l, xs).pop().unwrap()
}

/// e_l with the module's index contract: l < 0 errors, l > #x gives 0.
pub fn elementary<C: Coeff>(l: i64, xs: &[C]) -> Result<C, SymfunError> {
    if l < 0 {
        return Err(SymfunError::NegativeIndex(l));
    }
    Ok(e(l as usize, xs))
}

/// h_l with the module's index contract: l < 0 errors.
pub fn complete<C: Coeff>(l: i64, xs: &[C]) -> Result<C, SymfunError> {
    if l < 0 {
        return Err(SymfunError::NegativeIndex(l));
    }
    Ok(h(l as usize, xs))
}

/// Schur polynomial of a weakly decreasing integer vector λ after shifting it
/// to a partition: returns (s_{λ − m·(1,…,1)}(x), m) with m = min(λ_r, 0).
/// The caller multiplies by (∏x_i)^m to get the Laurent Schur value — a
/// monomial correction that needs no division when m = 0.
///
/// Computed by the Jacobi–Trudi determinant det(h_{μ_i − i + j}), which is
/// division-free and well defined for repeated x.
pub fn schur_shifted<C: Coeff>(lambda: &[i64], xs: &[C]) -> (C, i64) {
    let r = lambda.len();
    assert!(r > 0, "empty weight");
    debug_assert!(lambda.windows(2).all(|w| w[0] >= w[1]), "weight must be dominant");
    let m = lambda[r - 1].min(0);
    let mu: Vec<i64> = lambda.iter().map(|&l| l - m).collect();
    let hmax = (mu[0] + r as i64) as usize;
    let table = h_table(hmax, xs);
    let jt = SquareMatrix::from_fn(r, |i, j| {
        let idx = mu[i] - i as i64 + j as i64;
        if idx < 0 {
            C::zero()
        } else {
            table[idx as usize].clone()
        }
    });
    (jt.det(), m)
}

/// Laurent Schur value over a field: s_λ(x) for weakly decreasing λ ∈ Z^r.
pub fn schur<C: FieldCoeff>(lambda: &[i64], xs: &[C]) -> C {
    let (v, m) = schur_shifted(lambda, xs);
    if m == 0 {
        return v;
    }
    let mut prod = C::one();
    for x in xs {
        prod = prod * x.clone();
    }
    let mut out = v;
    for _ in 0..(-m) {
        out = out / prod.clone();
    }
    out
}

/// The full set of Schur values over the Laurent polynomial ring in the
/// standard variables x_0..x_{r−1} (for symbolic identities): here the
/// monomial shift is applied exactly.
pub fn schur_symbolic(lambda: &[i64], r: usize) -> MultiPoly<Rational> {
    let xs: Vec<MultiPoly<Rational>> = (0..r).map(MultiPoly::var).collect();
    let (v, m) = schur_shifted(lambda, &xs);
    if m == 0 {
        return v;
    }
    let shift = MultiPoly::monomial(vec![m as i32; r], Rational::one());
    v * shift
}

// ---------------------------------------------------------------------------
// Vandermonde factorization
// ---------------------------------------------------------------------------

/// 𝕍(T) = (T_i^{j−1}).
pub fn vandermonde_matrix<C: Coeff>(ts: &[C]) -> SquareMatrix<C> {
    let n = ts.len();
    SquareMatrix::from_fn(n, |i, j| {
        let mut p = C::one();
        for _ in 0..j {
            p = p * ts[i].clone();
        }
        p
    })
}

fn hat<C: Clone>(ts: &[C], omit: usize) -> Vec<C> {
    ts.iter()
        .enumerate()
        .filter(|(k, _)| *k != omit)
        .map(|(_, t)| t.clone())
        .collect()
}

/// 𝔼(T) = (e_{j−1}(T̂_i)).
pub fn e_hat_matrix<C: Coeff>(ts: &[C]) -> SquareMatrix<C> {
    let n = ts.len();
    SquareMatrix::from_fn(n, |i, j| e(j, &hat(ts, i)))
}

/// ℍ(T) = ((−1)^{i−1} h_{j−i}(T)), upper triangular with ±1 diagonal.
pub fn h_sign_matrix<C: Coeff>(ts: &[C]) -> SquareMatrix<C> {
    let n = ts.len();
    let table = h_table(n, ts);
    SquareMatrix::from_fn(n, |i, j| {
        if j < i {
            return C::zero();
        }
        let v = table[j - i].clone();
        if i % 2 == 1 {
            -v
        } else {
            v
        }
    })
}

/// D(T) = det 𝕍(T) = ∏_{i<j}(T_j − T_i).
pub fn vandermonde_det<C: Coeff>(ts: &[C]) -> C {
    let n = ts.len();
    let mut prod = C::one();
    for i in 0..n {
        for j in (i + 1)..n {
            prod = prod * (ts[j].clone() - ts[i].clone());
        }
    }
    prod
}

/// Closed-form 𝕍(T)^{-1} with (i,j)-entry
/// (−1)^{r−i} e_{r−i}(T̂_j) / ∏_{α≠j}(T_j − T_α); needs pairwise-distinct T.
pub fn vandermonde_inverse<C: FieldCoeff>(ts: &[C]) -> Option<SquareMatrix<C>> {
    let r = ts.len();
    for i in 0..r {
        for j in (i + 1)..r {
            if ts[i] == ts[j] {
                return None;
            }
        }
    }
    Some(SquareMatrix::from_fn(r, |i, j| {
        // 1-based (i,j): numerator (−1)^{r−(i+1)} e_{r−(i+1)}(T̂_{j+1})
        let num = e(r - (i + 1), &hat(ts, j));
        let mut den = C::one();
        for (a, t) in ts.iter().enumerate() {
            if a != j {
                den = den * (ts[j].clone() - t.clone());
            }
        }
        let v = num / den;
        if (r - (i + 1)) % 2 == 1 {
            -v
        } else {
            v
        }
    }))
}

/// The factorization bundle (𝕍, 𝔼, ℍ, 𝕍^{-1}); the inverse is `None` when T
/// has a repeated entry (the factorization itself is still returned).
pub struct VandermondeFactorization<C> {
    pub v: SquareMatrix<C>,
    pub e: SquareMatrix<C>,
    pub h: SquareMatrix<C>,
    pub v_inv: Option<SquareMatrix<C>>,
}

pub fn vandermonde_factorization<C: FieldCoeff>(ts: &[C]) -> VandermondeFactorization<C> {
    VandermondeFactorization {
        v: vandermonde_matrix(ts),
        e: e_hat_matrix(ts),
        h: h_sign_matrix(ts),
        v_inv: vandermonde_inverse(ts),
    }
}

// ---------------------------------------------------------------------------
// Residue identity (quadrature oracle vs residue sum)
// ---------------------------------------------------------------------------

pub struct ResidueCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_err: f64,
}

/// Both sides of the (n−1)-fold torus-integral identity
///
///   (2πi)^{1−n}/(n−1)! ∮_{|z_j|=1} F(z) / ∏_{j,α}(z_j − x_α) ∏dz_j
///     = Σ_α (−1)^{(n−1)(n−2)/2} F(x̂_α) / ( D(x̂_α)² ∏_{i≠α}(x_i − x_α) )
///
/// for F symmetric and vanishing on the diagonal D(z) = 0, and x an n-tuple
/// of pairwise-distinct points inside the unit disc. The left side is
/// evaluated by a tensor trapezoid rule with `nodes` points per circle
/// (spectrally accurate: all poles stay strictly inside).
pub fn residue_identity_check(
    f: &dyn Fn(&[Complex64]) -> Complex64,
    x: &[Complex64],
    nodes: usize,
) -> Result<ResidueCheck, SymfunError> {
    let n = x.len();
    assert!(n >= 2, "need at least a 1-fold contour");
    for i in 0..n {
        if x[i].norm() >= 1.0 {
            return Err(SymfunError::OutsideConvergenceRegion);
        }
        for j in (i + 1)..n {
            if (x[i] - x[j]).norm() < 1e-14 {
                return Err(SymfunError::NotRegular);
            }
        }
    }
    let d = n - 1;
    // lhs by quadrature: z_j = e^{iθ_j}; (2πi)^{1−n}∏dz_j = (2π)^{1−n}∏ z_j dθ_j
    let mut acc = crate::numeric::CompensatedSum::new();
    let mut idx = vec![0usize; d];
    let mut z = vec![Complex64::new(0.0, 0.0); d];
    loop {
        let mut weight = Complex64::new(1.0, 0.0);
        for j in 0..d {
            let theta = 2.0 * std::f64::consts::PI * (idx[j] as f64) / (nodes as f64);
            z[j] = Complex64::new(theta.cos(), theta.sin());
            weight *= z[j];
            for xa in x {
                weight /= z[j] - xa;
            }
        }
        acc.add(f(&z) * weight);
        // odometer
        let mut carry = 0;
        while carry < d {
            idx[carry] += 1;
            if idx[carry] < nodes {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == d {
            break;
        }
    }
    let mut fact = 1.0;
    for k in 2..=d {
        fact *= k as f64;
    }
    let lhs = acc.total() / (nodes as f64).powi(d as i32) / fact;

    // rhs residue sum
    let sign = if ((n - 1) * (n - 2) / 2) % 2 == 1 { -1.0 } else { 1.0 };
    let mut rhs = Complex64::new(0.0, 0.0);
    for a in 0..n {
        let xh = hat(x, a);
        let dv: Complex64 = vandermonde_det(&xh);
        let mut den = dv * dv;
        for (i, xi) in x.iter().enumerate() {
            if i != a {
                den *= xi - x[a];
            }
        }
        rhs += sign * f(&xh) / den;
    }
    Ok(ResidueCheck { lhs, rhs, abs_err: (lhs - rhs).norm() })
}

// ---------------------------------------------------------------------------
// The matrices 𝔻(Z,T), 𝔻*(Z,T), ℙ_m(T)
// ---------------------------------------------------------------------------

/// 𝔻(Z,T) = 𝕍^{-1} diag(Q(Z·T_i; T)^{-1}) 𝕍 at a numeric regular T with
/// e_n(T) ≠ 0, evaluated at a single Z; Q(Z;T) = ∏_j (1 − Z·T_j^{-1}).
pub fn d_matrix_at(z: Complex64, t: &[Complex64]) -> Result<SquareMatrix<Complex64>, SymfunError> {
    let n = t.len();
    let en: Complex64 = t.iter().product();
    if en.norm() < 1e-14 {
        return Err(SymfunError::SingularTorus);
    }
    let vinv = vandermonde_inverse(t).ok_or(SymfunError::NotRegular)?;
    let v = vandermonde_matrix(t);
    let diag = SquareMatrix::from_fn(n, |i, j| {
        if i != j {
            return Complex64::new(0.0, 0.0);
        }
        let mut q = Complex64::new(1.0, 0.0);
        for tj in t {
            q *= Complex64::new(1.0, 0.0) - z * t[i] / tj;
        }
        Complex64::new(1.0, 0.0) / q
    });
    Ok(vinv.matmul(&diag).matmul(&v))
}

/// 𝔻*(Z,T) as a polynomial in Z (coefficient matrices), at a numeric regular
/// T: 𝔻* = 𝕍^{-1} diag( ∏_{l≠i} ∏_j (T_j − Z·T_l) ) 𝕍, which equals
/// e_n(T)^{n−1} ∏_{i,j}(1 − Z T_i T_j^{-1}) · 𝔻(Z,T). The Z-degree is at most
/// n(n−1); `zdeg_bound` is checked against the result.
pub fn d_star(
    zdeg_bound: usize,
    t: &[Complex64],
) -> Result<Vec<SquareMatrix<Complex64>>, SymfunError> {
    let n = t.len();
    let en: Complex64 = t.iter().product();
    if en.norm() < 1e-14 {
        return Err(SymfunError::SingularTorus);
    }
    if vandermonde_inverse(t).is_none() {
        // non-regular T: specialize the symbolic matrix (polynomiality makes
        // the specialization safe)
        let sym = d_star_symbolic(n);
        let pt: Vec<Complex64> = t.to_vec();
        let deg = n * (n - 1);
        let mut out = vec![SquareMatrix::from_fn(n, |_, _| Complex64::new(0.0, 0.0)); deg + 1];
        for i in 0..n {
            for j in 0..n {
                let entry = sym.at(i, j);
                for (k, c) in entry.terms() {
                    let zdeg = k.get(n).copied().unwrap_or(0) as usize;
                    let mut val = Complex64::new(crate::exactnum::big_to_f64(c), 0.0);
                    for (vi, &ei) in k.iter().take(n).enumerate() {
                        val *= pt[vi].powi(ei);
                    }
                    let cur = *out[zdeg].at(i, j);
                    out[zdeg].set(i, j, cur + val);
                }
            }
        }
        while out.len() > 1 && out.last().map(|m| matrix_sup_norm(m) < 1e-12) == Some(true) {
            out.pop();
        }
        assert!(
            out.len() - 1 <= zdeg_bound,
            "Z-degree {} exceeded the declared bound {}",
            out.len() - 1,
            zdeg_bound
        );
        return Ok(out);
    }
    // regular T: carry Z symbolically through the product
    type PZ = MultiPoly<Complex64>;
    let vinv = vandermonde_inverse(t).unwrap().map(|c| PZ::constant(*c));
    let v = vandermonde_matrix(t).map(|c| PZ::constant(*c));
    let zvar: PZ = MultiPoly::var(0);
    let diag = SquareMatrix::from_fn(n, |i, j| {
        if i != j {
            return PZ::zero_poly();
        }
        let mut prod = PZ::one();
        for l in 0..n {
            if l == i {
                continue;
            }
            for tj in t {
                let lin = PZ::constant(*tj) - zvar.clone() * PZ::constant(t[l]);
                prod = prod * lin;
            }
        }
        prod
    });
    let m = vinv.matmul(&diag).matmul(&v);
    let deg = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter_map(|(i, j)| m.at(i, j).degree_in(0))
        .max()
        .unwrap_or(0) as usize;
    assert!(
        deg <= zdeg_bound,
        "Z-degree {} exceeded the declared bound {}",
        deg,
        zdeg_bound
    );
    let mut out = Vec::with_capacity(deg + 1);
    for k in 0..=deg {
        out.push(SquareMatrix::from_fn(n, |i, j| {
            m.at(i, j)
                .terms()
                .find(|(key, _)| key.get(0).copied().unwrap_or(0) == k as i32)
                .map(|(_, c)| *c)
                .unwrap_or(Complex64::new(0.0, 0.0))
        }));
    }
    Ok(out)
}

/// Evaluate a Z-polynomial with matrix coefficients at a point.
pub fn eval_matrix_poly(coeffs: &[SquareMatrix<Complex64>], z: Complex64) -> SquareMatrix<Complex64> {
    let n = coeffs[0].n;
    let mut acc = SquareMatrix::from_fn(n, |_, _| Complex64::new(0.0, 0.0));
    for c in coeffs.iter().rev() {
        acc = acc.scale(&z).add_mat(c);
    }
    acc
}

pub fn matrix_sup_norm(m: &SquareMatrix<Complex64>) -> f64 {
    let mut s = 0.0f64;
    for i in 0..m.n {
        for j in 0..m.n {
            s = s.max(m.at(i, j).norm());
        }
    }
    s
}

/// Symbolic 𝔻*(Z,T) over Q in the variables (T_1..T_n = x_0..x_{n−1},
/// Z = x_n): computed as adj(𝕍)·diag(∏_{l≠i}∏_j(T_j − Z·T_l))·𝕍 followed by
/// exact division by D(T). Entries are symmetric polynomials in T with
/// coefficients in Z[Z] (Lemma-level fact; asserted by the tests).
pub fn d_star_symbolic(n: usize) -> SquareMatrix<MultiPoly<Rational>> {
    type P = MultiPoly<Rational>;
    let ts: Vec<P> = (0..n).map(MultiPoly::var).collect();
    let z: P = MultiPoly::var(n);
    // adj(𝕍)_{ij} = (−1)^{i+j} e_{n−i}(T̂_j) D(T̂_j)   (1-based i,j)
    let adj = SquareMatrix::from_fn(n, |i, j| {
        let th = hat(&ts, j);
        let v = e(n - (i + 1), &th) * vandermonde_det(&th);
        if (i + j) % 2 == 1 {
            -v
        } else {
            v
        }
    });
    let v = vandermonde_matrix(&ts);
    let diag = SquareMatrix::from_fn(n, |i, j| {
        if i != j {
            return P::zero_poly();
        }
        let mut prod = P::one();
        for l in 0..n {
            if l == i {
                continue;
            }
            for tj in &ts {
                prod = prod * (tj.clone() - z.clone() * ts[l].clone());
            }
        }
        prod
    });
    let num = adj.matmul(&diag).matmul(&v);
    let d = vandermonde_det(&ts);
    num.map(|entry| {
        entry
            .div_exact(&d)
            .expect("entries of adj(V)·diag·V are divisible by the Vandermonde determinant")
    })
}

/// ℙ_m(T)_{ij} at numeric regular T by the rational closed form
/// Σ_α (−1)^{n−i} e_{n−i}(T̂_α) T_α^{m+j−1} / ∏_{l≠α}(T_α − T_l).
pub fn p_m_matrix(m: usize, t: &[Complex64]) -> Result<SquareMatrix<Complex64>, SymfunError> {
    let n = t.len();
    if vandermonde_inverse(t).is_none() {
        return Err(SymfunError::NotRegular);
    }
    Ok(SquareMatrix::from_fn(n, |i, j| {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..n {
            let num: Complex64 = e(n - (i + 1), &hat(t, a));
            let mut den = Complex64::new(1.0, 0.0);
            for (l, tl) in t.iter().enumerate() {
                if l != a {
                    den *= t[a] - tl;
                }
            }
            let sign = if (n - (i + 1)) % 2 == 1 { -1.0 } else { 1.0 };
            acc += sign * num * t[a].powi((m + j) as i32) / den;
        }
        acc
    }))
}

/// ℙ_m(T) for exact rational T (used by the exact homogeneity test).
pub fn p_m_matrix_exact(m: usize, t: &[Rational]) -> Result<SquareMatrix<Rational>, SymfunError> {
    let n = t.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if t[i] == t[j] {
                return Err(SymfunError::NotRegular);
            }
        }
    }
    Ok(SquareMatrix::from_fn(n, |i, j| {
        let mut acc = Rational::zero();
        for a in 0..n {
            let num: Rational = e(n - (i + 1), &hat(t, a));
            let mut den = Rational::one();
            for (l, tl) in t.iter().enumerate() {
                if l != a {
                    den = den * (&t[a] - tl);
                }
            }
            let mut pw = Rational::one();
            for _ in 0..(m + j) {
                pw = pw * &t[a];
            }
            let sign = if (n - (i + 1)) % 2 == 1 {
                -Rational::one()
            } else {
                Rational::one()
            };
            acc = acc + sign * num * pw / den;
        }
        acc
    }))
}

pub struct PowerSeriesReport {
    pub truncation_order: usize,
    pub entrywise_error: f64,
}

/// Truncation error of the expansion 𝔻(z,x) = Σ_m h_m(x^{-1}) ℙ_m(x) z^m at
/// order M, against the direct evaluation. Preconditions: e_n(x) ≠ 0, x
/// regular, {x̄_j} = {x_j^{-1}} as multisets (so h_m(x^{-1}) = h_m(x̄)), and
/// |z| < min_{i,j} |x_i x̄_j|^{-1}.
pub fn power_series_check(
    z: Complex64,
    x: &[Complex64],
    order: usize,
) -> Result<PowerSeriesReport, SymfunError> {
    let n = x.len();
    let en: Complex64 = x.iter().product();
    if en.norm() < 1e-14 {
        return Err(SymfunError::SingularTorus);
    }
    // multiset check {x̄} = {x^{-1}}
    let mut conj: Vec<Complex64> = x.iter().map(|t| t.conj()).collect();
    for t in x {
        let inv = Complex64::new(1.0, 0.0) / t;
        let pos = conj
            .iter()
            .position(|c| (c - inv).norm() < 1e-9)
            .ok_or(SymfunError::OutsideConvergenceRegion)?;
        conj.swap_remove(pos);
    }
    let radius = x
        .iter()
        .flat_map(|xi| x.iter().map(move |xj| 1.0 / (xi * xj.conj()).norm()))
        .fold(f64::INFINITY, f64::min);
    if z.norm() >= radius {
        return Err(SymfunError::OutsideConvergenceRegion);
    }
    let xinv: Vec<Complex64> = x.iter().map(|t| Complex64::new(1.0, 0.0) / t).collect();
    let hs = h_table(order, &xinv);
    let direct = d_matrix_at(z, x)?;
    let mut acc = SquareMatrix::from_fn(n, |_, _| Complex64::new(0.0, 0.0));
    let mut zpow = Complex64::new(1.0, 0.0);
    for m in 0..=order {
        let pm = p_m_matrix(m, x)?;
        acc = acc.add_mat(&pm.scale(&(hs[m] * zpow)));
        zpow *= z;
    }
    Ok(PowerSeriesReport {
        truncation_order: order,
        entrywise_error: matrix_sup_norm(&acc.sub_mat(&direct)),
    })
}

/// Truncated Cauchy identity Σ_{λ: |λ|≤Λ} s_λ(x)·s_λ(y) (partitions with at
/// most min(#x,#y) parts), the brute-force side of ∏(1−x_iy_j)^{-1}.
pub fn cauchy_truncated(x: &[Complex64], y: &[Complex64], max_weight: usize) -> Complex64 {
    let r = x.len().min(y.len());
    let mut total = Complex64::new(0.0, 0.0);
    let mut lambda = vec![0i64; r];
    fn rec(
        pos: usize,
        rem: usize,
        cap: usize,
        lambda: &mut Vec<i64>,
        x: &[Complex64],
        y: &[Complex64],
        total: &mut Complex64,
    ) {
        if pos == lambda.len() {
            // pad weights to the variable counts
            let mut lam_x = lambda.clone();
            lam_x.resize(x.len(), 0);
            let mut lam_y = lambda.clone();
            lam_y.resize(y.len(), 0);
            let (sx, mx) = schur_shifted(&lam_x, x);
            let (sy, my) = schur_shifted(&lam_y, y);
            debug_assert_eq!(mx, 0);
            debug_assert_eq!(my, 0);
            *total += sx * sy;
            return;
        }
        let hi = cap.min(rem);
        for part in (0..=hi).rev() {
            lambda[pos] = part as i64;
            rec(pos + 1, rem - part, part, lambda, x, y, total);
        }
    }
    rec(0, max_weight, max_weight, &mut lambda, x, y, &mut total);
    total
}
