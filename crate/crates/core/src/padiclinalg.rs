//! Exact p-local linear algebra.
//!
//! Everything here works with rational matrices viewed through a p-adic
//! valuation — an element of Q_p is always an exact rational together with
//! its valuation, never a truncated p-adic expansion. The module provides
//! dense exact matrices ([`ExactMatrix`]), the generic Iwasawa decomposition
//! over Q_p by bottom-up column elimination ([`iwasawa_qp`]), the closed-form
//! Iwasawa data of a lower-unipotent last row ([`explicit_lower_iwasawa`])
//! together with its archimedean analogue ([`arch_lower_iwasawa`]), Smith
//! invariants at p ([`smith_at_p`]), and the congruence-subgroup membership
//! test ([`in_zk1`]) that cuts out the support of the local test functions.
//! The exact support predicate for the regular orbital integrands
//! ([`support_indicator`]) combines all of the above.

use crate::exactnum::{rat_int, valuation, Rational, Valuation};
use crate::symfun::SquareMatrix;
use num_traits::{One, Zero};

/// Errors for the exact p-local routines.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PadicError {
    #[error("matrix is singular")]
    Singular,
    #[error("{0} is not a prime")]
    BadPrime(u64),
    #[error("matrix is not p-integral")]
    NotPIntegral,
    #[error("level must be a positive integer")]
    ZeroLevel,
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
}

pub(crate) fn check_prime(p: u64) -> Result<(), PadicError> {
    valuation(&Rational::one(), p).map_err(|_| PadicError::BadPrime(p))?;
    Ok(())
}

/// Valuation of `x` once `p` is known to be prime.
fn vp(x: &Rational, p: u64) -> Valuation {
    valuation(x, p).expect("prime was validated at entry")
}

/// p^e as an exact rational (e may be negative).
pub(crate) fn p_pow(p: u64, e: i64) -> Rational {
    rat_int(p as i64).pow(e as i32)
}

fn is_p_integral_scalar(x: &Rational, p: u64) -> bool {
    vp(x, p).is_nonnegative()
}

fn is_p_unit(x: &Rational, p: u64) -> bool {
    vp(x, p) == Valuation::Finite(0)
}

// ---------------------------------------------------------------------------
// Exact matrices over Q
// ---------------------------------------------------------------------------

/// Dense square matrix over Q with exact arithmetic throughout. Indices are
/// 0-based; the order n may be zero (the empty matrix acts as the identity of
/// a zero-dimensional space, with determinant 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMatrix {
    n: usize,
    entries: Vec<Rational>,
}

impl ExactMatrix {
    pub fn zero(n: usize) -> Self {
        ExactMatrix {
            n,
            entries: vec![Rational::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<Rational>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "rows must form a square");
        Self::from_fn(n, |i, j| rows[i][j].clone())
    }

    /// Convenience constructor from machine integers.
    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "rows must form a square");
        Self::from_fn(n, |i, j| rat_int(rows[i][j]))
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.entries[i * self.n + j] = v;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.at(j, i).clone())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "order mismatch");
        Self::from_fn(self.n, |i, j| {
            let mut acc = Rational::zero();
            for k in 0..self.n {
                acc += self.at(i, k) * other.at(k, j);
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.n, v.len(), "order mismatch");
        (0..self.n)
            .map(|i| {
                let mut acc = Rational::zero();
                for k in 0..self.n {
                    acc += self.at(i, k) * &v[k];
                }
                acc
            })
            .collect()
    }

    /// Row-vector action `v ↦ v·A`.
    pub fn vec_mul(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.n, v.len(), "order mismatch");
        (0..self.n)
            .map(|j| {
                let mut acc = Rational::zero();
                for k in 0..self.n {
                    acc += &v[k] * self.at(k, j);
                }
                acc
            })
            .collect()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::from_fn(self.n, |i, j| self.at(i, j) * c)
    }

    /// Exact determinant by fraction arithmetic Gaussian elimination.
    pub fn det(&self) -> Rational {
        let n = self.n;
        let mut m = self.clone();
        let mut det = Rational::one();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !m.at(r, col).is_zero());
            let pr = match pivot {
                Some(pr) => pr,
                None => return Rational::zero(),
            };
            if pr != col {
                for j in 0..n {
                    let a = m.at(col, j).clone();
                    let b = m.at(pr, j).clone();
                    m.set(col, j, b);
                    m.set(pr, j, a);
                }
                det = -det;
            }
            let piv = m.at(col, col).clone();
            det *= &piv;
            for r in col + 1..n {
                if m.at(r, col).is_zero() {
                    continue;
                }
                let factor = m.at(r, col) / &piv;
                for j in col..n {
                    let v = m.at(r, j) - &factor * m.at(col, j);
                    m.set(r, j, v);
                }
            }
        }
        det
    }

    /// Exact inverse by Gauss–Jordan; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut m = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pr = (col..n).find(|&r| !m.at(r, col).is_zero())?;
            if pr != col {
                for j in 0..n {
                    let (a, b) = (m.at(col, j).clone(), m.at(pr, j).clone());
                    m.set(col, j, b);
                    m.set(pr, j, a);
                    let (a, b) = (inv.at(col, j).clone(), inv.at(pr, j).clone());
                    inv.set(col, j, b);
                    inv.set(pr, j, a);
                }
            }
            let piv = m.at(col, col).clone();
            for j in 0..n {
                let v = m.at(col, j) / &piv;
                m.set(col, j, v);
                let v = inv.at(col, j) / &piv;
                inv.set(col, j, v);
            }
            for r in 0..n {
                if r == col || m.at(r, col).is_zero() {
                    continue;
                }
                let factor = m.at(r, col).clone();
                for j in 0..n {
                    let v = m.at(r, j) - &factor * m.at(col, j);
                    m.set(r, j, v);
                    let v = inv.at(r, j) - &factor * inv.at(col, j);
                    inv.set(r, j, v);
                }
            }
        }
        Some(inv)
    }

    /// True when every entry has non-negative p-valuation.
    pub fn is_p_integral(&self, p: u64) -> bool {
        self.entries.iter().all(|x| is_p_integral_scalar(x, p))
    }

    /// True when the matrix is upper triangular with unit diagonal.
    pub fn is_upper_unipotent(&self) -> bool {
        for i in 0..self.n {
            if !self.at(i, i).is_one() {
                return false;
            }
            for j in 0..i {
                if !self.at(i, j).is_zero() {
                    return false;
                }
            }
        }
        true
    }

    /// Embeds an (n−1)×(n−1) matrix into the upper-left block of an n×n
    /// matrix with a 1 in the lower-right corner.
    pub fn embed_corner(&self) -> Self {
        let n = self.n + 1;
        Self::from_fn(n, |i, j| {
            if i < self.n && j < self.n {
                self.at(i, j).clone()
            } else if i == j {
                Rational::one()
            } else {
                Rational::zero()
            }
        })
    }
}

/// The matrix with identity block and last row (ξ′, 1): the transpose-style
/// lower-unipotent element attached to a row vector ξ′ of length r, living in
/// GL_{r+1}.
pub fn lower_unipotent_row(xi: &[Rational]) -> ExactMatrix {
    let r = xi.len();
    ExactMatrix::from_fn(r + 1, |i, j| {
        if i == j {
            Rational::one()
        } else if i == r {
            xi[j].clone()
        } else {
            Rational::zero()
        }
    })
}

// ---------------------------------------------------------------------------
// Generic Iwasawa decomposition over Q_p
// ---------------------------------------------------------------------------

/// Iwasawa datum `g = u·t·k` at p: `u` is upper-unipotent over Q, the torus
/// entries are reported as t_i = p^{exponents[i]}·units[i] with units of
/// valuation zero, and `k`, `k_inv` are mutually inverse and p-integral.
#[derive(Debug, Clone)]
pub struct IwasawaData {
    pub p: u64,
    pub u: ExactMatrix,
    pub exponents: Vec<i64>,
    pub units: Vec<Rational>,
    pub k: ExactMatrix,
    pub k_inv: ExactMatrix,
}

impl IwasawaData {
    /// The torus entries t_i = p^{a_i}·unit_i as exact rationals.
    pub fn torus(&self) -> Vec<Rational> {
        self.exponents
            .iter()
            .zip(&self.units)
            .map(|(a, u)| p_pow(self.p, *a) * u)
            .collect()
    }

    /// Reassembles u·t·k exactly.
    pub fn reconstruct(&self) -> ExactMatrix {
        let t = self.torus();
        let n = self.u.size();
        let ut = ExactMatrix::from_fn(n, |i, j| self.u.at(i, j) * &t[j]);
        ut.mul(&self.k)
    }
}

/// Iwasawa decomposition g = u·t·k over Q_p for an invertible rational
/// matrix: bottom-up column elimination, always taking the pivot of minimal
/// valuation in the active row (ties broken by the smallest column index), so
/// the output is deterministic. A p-integral matrix with p-integral inverse
/// short-circuits to (1, 1, g).
pub fn iwasawa_qp(g: &ExactMatrix, p: u64) -> Result<IwasawaData, PadicError> {
    check_prime(p)?;
    let n = g.size();
    let det = g.det();
    if det.is_zero() {
        return Err(PadicError::Singular);
    }

    if g.is_p_integral(p) && is_p_unit(&det, p) {
        return Ok(IwasawaData {
            p,
            u: ExactMatrix::identity(n),
            exponents: vec![0; n],
            units: vec![Rational::one(); n],
            k: g.clone(),
            k_inv: g.inverse().expect("unit determinant"),
        });
    }

    // m is transformed by right multiplications; k_inv accumulates them, and
    // k accumulates their inverses on the left, so m = g·k_inv and k_inv·k = 1
    // hold at every step.
    let mut m = g.clone();
    let mut k = ExactMatrix::identity(n);
    let mut k_inv = ExactMatrix::identity(n);

    let add_col = |m: &mut ExactMatrix,
                       k: &mut ExactMatrix,
                       k_inv: &mut ExactMatrix,
                       src: usize,
                       dst: usize,
                       lambda: &Rational| {
        // col_dst += λ·col_src on m and k_inv; row_src += λ·row_dst on k.
        for r in 0..n {
            let v = m.at(r, dst) + lambda * m.at(r, src);
            m.set(r, dst, v);
            let v = k_inv.at(r, dst) + lambda * k_inv.at(r, src);
            k_inv.set(r, dst, v);
        }
        for c in 0..n {
            let v = k.at(src, c) - lambda * k.at(dst, c);
            k.set(src, c, v);
        }
    };
    let swap_cols = |m: &mut ExactMatrix, k: &mut ExactMatrix, k_inv: &mut ExactMatrix, a: usize, b: usize| {
        if a == b {
            return;
        }
        for r in 0..n {
            let (x, y) = (m.at(r, a).clone(), m.at(r, b).clone());
            m.set(r, a, y);
            m.set(r, b, x);
            let (x, y) = (k_inv.at(r, a).clone(), k_inv.at(r, b).clone());
            k_inv.set(r, a, y);
            k_inv.set(r, b, x);
        }
        for c in 0..n {
            let (x, y) = (k.at(a, c).clone(), k.at(b, c).clone());
            k.set(a, c, y);
            k.set(b, c, x);
        }
    };

    for i in (0..n).rev() {
        // Pivot of minimal valuation among the not-yet-assigned columns 0..=i
        // of row i; ties go to the smallest column index.
        let mut best: Option<(i64, usize)> = None;
        for c in 0..=i {
            if let Valuation::Finite(v) = vp(m.at(i, c), p) {
                if best.map_or(true, |(bv, _)| v < bv) {
                    best = Some((v, c));
                }
            }
        }
        let (_, c) = best.expect("row cannot vanish on the active block when det ≠ 0");
        let piv = m.at(i, c).clone();
        for j in 0..=i {
            if j == c || m.at(i, j).is_zero() {
                continue;
            }
            let lambda = -(m.at(i, j) / &piv);
            debug_assert!(is_p_integral_scalar(&lambda, p));
            add_col(&mut m, &mut k, &mut k_inv, c, j, &lambda);
        }
        swap_cols(&mut m, &mut k, &mut k_inv, c, i);
    }

    // m is now upper triangular with m = g·k_inv, so g = m·k.
    let mut exponents = Vec::with_capacity(n);
    let mut units = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    for i in 0..n {
        let ti = m.at(i, i).clone();
        let a = vp(&ti, p).finite().expect("diagonal of a regular matrix");
        exponents.push(a);
        units.push(&ti * p_pow(p, -a));
        t.push(ti);
    }
    let u = ExactMatrix::from_fn(n, |i, j| m.at(i, j) / &t[j]);
    debug_assert!(u.is_upper_unipotent());
    debug_assert!(k.is_p_integral(p) && k_inv.is_p_integral(p));
    Ok(IwasawaData {
        p,
        u,
        exponents,
        units,
        k,
        k_inv,
    })
}

// ---------------------------------------------------------------------------
// Closed-form Iwasawa data for a lower-unipotent last row
// ---------------------------------------------------------------------------

/// Closed-form Iwasawa data (Υ, ℓ, α, t, κ) of the matrix with identity block
/// and last row (ξ′₊, 1): the upper-unipotent part is [[Υ, ℓ],[0, 1]], the
/// torus part diag(α, t), and κ is p-integral with p-integral inverse.
#[derive(Debug, Clone)]
pub struct LowerIwasawa {
    pub upsilon: ExactMatrix,
    pub ell: Vec<Rational>,
    pub alpha: Vec<Rational>,
    pub t: Rational,
    pub kappa: ExactMatrix,
}

impl LowerIwasawa {
    /// Reassembles [[Υ,ℓ],[0,1]]·diag(α,t)·κ exactly.
    pub fn reconstruct(&self) -> ExactMatrix {
        let r = self.alpha.len();
        let w = ExactMatrix::from_fn(r + 1, |i, j| {
            if i == j {
                Rational::one()
            } else if i < r && j < r {
                self.upsilon.at(i, j).clone()
            } else if i < r && j == r {
                self.ell[i].clone()
            } else {
                Rational::zero()
            }
        });
        let wd = ExactMatrix::from_fn(r + 1, |i, j| {
            let d = if j < r { &self.alpha[j] } else { &self.t };
            w.at(i, j) * d
        });
        wd.mul(&self.kappa)
    }

    /// The matrix Υ·diag(α), which is p-integral for all inputs.
    pub fn upsilon_alpha(&self) -> ExactMatrix {
        ExactMatrix::from_fn(self.alpha.len(), |i, j| self.upsilon.at(i, j) * &self.alpha[j])
    }
}

/// Closed-form Iwasawa decomposition of the lower-unipotent element with last
/// row (ξ′₊, 1) over Q_p, by the explicit sector construction: the indices
/// ι(0) > ι(1) > … are chosen greedily as the largest position attaining the
/// maximal |·|_p over the prefix below the previous one, as long as that
/// maximum exceeds 1. An everywhere-integral ξ′₊ yields (1, 0, 1, 1) with
/// κ equal to the input matrix. The construction is validated internally:
/// reconstruction is exact and κ is p-integral with unit determinant.
pub fn explicit_lower_iwasawa(xi: &[Rational], p: u64) -> Result<LowerIwasawa, PadicError> {
    check_prime(p)?;
    let r = xi.len();
    let nbar = lower_unipotent_row(xi);

    // Greedy sector indices, 1-based positions into ξ′₊.
    let mut iotas: Vec<usize> = Vec::new();
    let mut end = r; // active prefix is 1..=end
    loop {
        let mut best: Option<(i64, usize)> = None;
        for j in 1..=end {
            if let Valuation::Finite(v) = vp(&xi[j - 1], p) {
                // Non-strict comparison keeps the largest attaining index.
                if best.map_or(true, |(bv, _)| v <= bv) {
                    best = Some((v, j));
                }
            }
        }
        match best {
            Some((v, j)) if v < 0 => {
                iotas.push(j);
                end = j - 1;
            }
            _ => break,
        }
    }

    if iotas.is_empty() {
        // Integral input: the matrix itself is the compact part.
        return Ok(LowerIwasawa {
            upsilon: ExactMatrix::identity(r),
            ell: vec![Rational::zero(); r],
            alpha: vec![Rational::one(); r],
            t: Rational::one(),
            kappa: nbar,
        });
    }

    let a = iotas.len() - 1;
    // z_c for c in 1..=r+1, with the boundary convention z_{r+1} = −1.
    let z = |c: usize| -> Rational {
        if c == r + 1 {
            -Rational::one()
        } else {
            xi[c - 1].clone()
        }
    };

    // Upper-unipotent factor W = [[Υ, ℓ],[0, 1]] of size r+1: the nontrivial
    // row at each ι(ν) spans the columns up to the previous sector index.
    let mut w = ExactMatrix::identity(r + 1);
    for (nu, &i) in iotas.iter().enumerate() {
        let prev = if nu == 0 { r + 1 } else { iotas[nu - 1] };
        for c in i + 1..=prev {
            w.set(i - 1, c - 1, -(z(c) / z(i)));
        }
    }

    let mut alpha = vec![Rational::one(); r];
    alpha[iotas[a] - 1] = -z(iotas[a]).recip();
    for nu in 1..=a {
        alpha[iotas[nu - 1] - 1] = -(z(iotas[nu]) / z(iotas[nu - 1]));
    }
    let t = z(iotas[0]);

    let wd = ExactMatrix::from_fn(r + 1, |i, j| {
        let d = if j < r { &alpha[j] } else { &t };
        w.at(i, j) * d
    });
    let kappa = wd
        .inverse()
        .expect("unipotent times regular torus is invertible")
        .mul(&nbar);

    let out = LowerIwasawa {
        upsilon: ExactMatrix::from_fn(r, |i, j| w.at(i, j).clone()),
        ell: (0..r).map(|i| w.at(i, r).clone()).collect(),
        alpha,
        t,
        kappa,
    };
    assert!(
        out.kappa.is_p_integral(p) && is_p_unit(&out.kappa.det(), p),
        "compact factor must lie in GL(Z_p)"
    );
    assert!(
        out.upsilon_alpha().is_p_integral(p),
        "Υ·diag(α) must be p-integral"
    );
    assert!(
        out.ell.iter().all(|l| is_p_integral_scalar(&(l * &out.t), p)),
        "ℓ must lie in (1/t)·Z_p"
    );
    debug_assert_eq!(out.reconstruct(), nbar);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Archimedean analogue
// ---------------------------------------------------------------------------

/// Archimedean Iwasawa data of the lower-unipotent element with last row
/// (ξ′₊, 1): t = (1+‖ξ′₊‖²)^{1/2}, ℓ = t^{-2}·ξ′₊, α_i the partial-norm
/// ratios, Υ the upper-unipotent Gram factor and κ orthogonal.
#[derive(Debug, Clone)]
pub struct ArchLowerIwasawa {
    pub upsilon: SquareMatrix<f64>,
    pub ell: Vec<f64>,
    pub alpha: Vec<f64>,
    pub t: f64,
    pub kappa: SquareMatrix<f64>,
}

impl ArchLowerIwasawa {
    /// Residual of the Gram identity Υ·diag(α²)·ᵗΥ = 1 − t^{-2}·ξ′₊ᵗξ′₊.
    pub fn gram_residual(&self, xi: &[f64]) -> f64 {
        let r = self.alpha.len();
        let mut worst = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                let mut lhs = 0.0;
                for k in 0..r {
                    lhs += self.upsilon.at(i, k) * self.alpha[k] * self.alpha[k] * self.upsilon.at(j, k);
                }
                let rhs = (if i == j { 1.0 } else { 0.0 }) - xi[i] * xi[j] / (self.t * self.t);
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst
    }

    /// Hilbert–Schmidt norm of Υ·diag(α).
    pub fn upsilon_alpha_hs(&self) -> f64 {
        let r = self.alpha.len();
        let mut acc = 0.0;
        for i in 0..r {
            for j in 0..r {
                let v = self.upsilon.at(i, j) * self.alpha[j];
                acc += v * v;
            }
        }
        acc.sqrt()
    }
}

/// Archimedean Iwasawa decomposition of the lower-unipotent element with last
/// row (ξ′₊, 1): numerically stable via the bottom-up UDᵗU decomposition of
/// n̄·ᵗn̄, which plays the role of a Gram–Schmidt oracle run from the last row.
pub fn arch_lower_iwasawa(xi: &[f64]) -> ArchLowerIwasawa {
    let r = xi.len();
    let s = r + 1;
    let nbar = SquareMatrix::from_fn(s, |i, j| {
        if i == j {
            1.0
        } else if i == r {
            xi[j]
        } else {
            0.0
        }
    });
    let gram = nbar.matmul(&nbar.transpose());

    // gram = u·diag(d)·ᵗu with u upper unipotent, filled in from the corner.
    let mut u = SquareMatrix::<f64>::identity(s);
    let mut d = vec![0.0f64; s];
    for i in (0..s).rev() {
        for j in (i + 1..s).rev() {
            let mut acc = gram.at(i, j).clone();
            for k in j + 1..s {
                acc -= u.at(i, k) * u.at(j, k) * d[k];
            }
            u.set(i, j, acc / d[j]);
        }
        let mut acc = gram.at(i, i).clone();
        for k in i + 1..s {
            acc -= u.at(i, k) * u.at(i, k) * d[k];
        }
        assert!(acc > 0.0, "Gram matrix must be positive definite");
        d[i] = acc;
    }

    // κ = diag(d)^{-1/2}·u^{-1}·n̄; the unipotent inverse is exact back
    // substitution.
    let mut uinv = SquareMatrix::<f64>::identity(s);
    for i in (0..s).rev() {
        for j in i + 1..s {
            let mut acc = 0.0;
            for k in i + 1..=j {
                acc += u.at(i, k) * uinv.at(k, j);
            }
            uinv.set(i, j, -acc);
        }
    }
    let uinv_nbar = uinv.matmul(&nbar);
    let kappa = SquareMatrix::from_fn(s, |i, j| uinv_nbar.at(i, j) / d[i].sqrt());

    ArchLowerIwasawa {
        upsilon: SquareMatrix::from_fn(r, |i, j| u.at(i, j).clone()),
        ell: (0..r).map(|i| *u.at(i, r)).collect(),
        alpha: (0..r).map(|i| d[i].sqrt()).collect(),
        t: d[r].sqrt(),
        kappa,
    }
}

// ---------------------------------------------------------------------------
// Smith invariants at p
// ---------------------------------------------------------------------------

/// Exponents (d_1 ≤ … ≤ d_n) of the elementary divisors of a p-integral
/// matrix at p, computed from the minimal valuations of the k×k minors; this
/// is the GL_n(Z_(p))-equivalence datum A ~ diag(p^{d_i}).
pub fn smith_at_p(a: &ExactMatrix, p: u64) -> Result<Vec<i64>, PadicError> {
    check_prime(p)?;
    if !a.is_p_integral(p) {
        return Err(PadicError::NotPIntegral);
    }
    let n = a.size();
    if a.det().is_zero() {
        return Err(PadicError::Singular);
    }
    // minor_min[k] = min v_p over all (k+1)×(k+1) minors.
    let mut cumulative = vec![0i64; n + 1];
    for k in 1..=n {
        let mut best: Option<i64> = None;
        for rows in combinations(n, k) {
            for cols in combinations(n, k) {
                let sub = ExactMatrix::from_fn(k, |i, j| a.at(rows[i], cols[j]).clone());
                if let Valuation::Finite(v) = vp(&sub.det(), p) {
                    if best.map_or(true, |b| v < b) {
                        best = Some(v);
                    }
                }
            }
        }
        cumulative[k] = best.expect("a regular matrix has a nonzero k-minor");
    }
    let d: Vec<i64> = (1..=n).map(|k| cumulative[k] - cumulative[k - 1]).collect();
    debug_assert!(d.windows(2).all(|w| w[0] <= w[1]));
    Ok(d)
}

/// All k-subsets of {0,…,n−1} in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Congruence-subgroup membership
// ---------------------------------------------------------------------------

/// Membership of g in Z(Q_p)·K₁(N·Z_p), where K₁(N·Z_p) is the subgroup of
/// GL_n(Z_p) whose last row is ≡ (0,…,0,1) mod N·Z_p. Returns the witness
/// z ∈ Q^× with z^{-1}·g ∈ K₁(N·Z_p) when the answer is yes.
pub fn in_zk1(level: u64, g: &ExactMatrix, p: u64) -> Result<(bool, Option<Rational>), PadicError> {
    check_prime(p)?;
    if level == 0 {
        return Err(PadicError::ZeroLevel);
    }
    let n = g.size();
    let det = g.det();
    if det.is_zero() {
        return Ok((false, None));
    }
    // The central factor must make the determinant a unit: v_p(z) is forced.
    let vdet = vp(&det, p).finite().expect("nonzero determinant");
    if vdet.rem_euclid(n as i64) != 0 {
        return Ok((false, None));
    }
    let v = vdet.div_euclid(n as i64);
    let scaled = g.scale(&p_pow(p, -v));
    if !scaled.is_p_integral(p) {
        return Ok((false, None));
    }
    let e = level_exponent(level, p);
    if e == 0 {
        return Ok((true, Some(p_pow(p, v))));
    }
    // p | N: the last row must be ≡ (0,…,0, unit) mod p^e after scaling, and
    // the unit is absorbed into the witness.
    let corner = scaled.at(n - 1, n - 1);
    if !is_p_unit(corner, p) {
        return Ok((false, None));
    }
    for j in 0..n - 1 {
        match vp(scaled.at(n - 1, j), p) {
            Valuation::Infinite => {}
            Valuation::Finite(w) if w >= e => {}
            _ => return Ok((false, None)),
        }
    }
    Ok((true, Some(p_pow(p, v) * corner)))
}

/// v_p(N) for a positive level N.
fn level_exponent(level: u64, p: u64) -> i64 {
    let mut e = 0i64;
    let mut m = level;
    while m % p == 0 {
        e += 1;
        m /= p;
    }
    e
}

/// Exact membership test for the support of the regular orbital integrand at
/// a coset datum: given the level N, the prime p, an element Z of the
/// two-factor unipotent coordinate group (upper-unipotent of order n−1, with
/// vanishing lower-left (n−m)×(m−1) block), and the vector coordinates ξ
/// (length m−1) and ξ′ (length n−m, indexed by the positions m,…,n−1), the
/// predicate decides whether the assembled group element meets the scaled
/// congruence subgroup. All four conditions are checked exactly: the two
/// integrality systems solved through the closed-form lower-unipotent
/// Iwasawa data of the support part of ξ′, the integrality of the
/// complementary part, and the primitivity of the bottom row inside
/// N·Z_p^{n−1} ⊕ Z_p.
pub fn support_indicator(
    coset: &crate::weylcoset::WeylDoubleCoset,
    level: u64,
    p: u64,
    z_mat: &ExactMatrix,
    xi: &[Rational],
    xi_prime: &[Rational],
) -> Result<bool, PadicError> {
    check_prime(p)?;
    if level == 0 {
        return Err(PadicError::ZeroLevel);
    }
    let n = coset.n();
    let m = coset.m();
    if z_mat.size() != n - 1 || xi.len() != m - 1 || xi_prime.len() != n - m {
        return Err(PadicError::Dimension(
            "expected Z of order n-1, xi of length m-1, xi' of length n-m",
        ));
    }
    // Split ξ′ = ξ′₊ + ξ′₋ along the supports determined by w₀ and sp(y),
    // and read off η (the permuted y) on the same index range.
    let w0 = coset.w0();
    let spy = coset.support();
    let mut xi_plus = vec![Rational::zero(); n - m];
    let mut xi_minus = vec![Rational::zero(); n - m];
    let mut eta = vec![Rational::zero(); n - m];
    for j in 0..n - m {
        let target = w0.apply(m + j);
        if spy.contains(&target) {
            xi_plus[j] = xi_prime[j].clone();
        } else {
            xi_minus[j] = xi_prime[j].clone();
        }
        eta[j] = coset.y()[target - 1].clone();
    }
    let data = explicit_lower_iwasawa(&xi_plus, p)?;
    // Blocks of Z: A (order m−1), B ((m−1)×(n−m)), E (order n−m).
    let a = ExactMatrix::from_fn(m - 1, |i, j| z_mat.at(i, j).clone());
    let e = ExactMatrix::from_fn(n - m, |i, j| z_mat.at(m - 1 + i, m - 1 + j).clone());
    let a_inv = a.inverse().ok_or(PadicError::Singular)?;
    let e_inv = e.inverse().ok_or(PadicError::Singular)?;
    let ups_inv = data.upsilon.inverse().ok_or(PadicError::Singular)?;
    // u₁ = A^{-1}(ξ − B̃·E^{-1}η) with B̃ = B − ξ·ᵗξ′₊; u₂ = Υ^{-1}(ℓ + E^{-1}η).
    let e_inv_eta = e_inv.mul_vec(&eta);
    let mut shifted = Vec::with_capacity(m - 1);
    for i in 0..m - 1 {
        let mut acc = xi[i].clone();
        for j in 0..n - m {
            let btilde = z_mat.at(i, m - 1 + j) - &xi[i] * &xi_plus[j];
            acc -= btilde * &e_inv_eta[j];
        }
        shifted.push(acc);
    }
    let u1 = a_inv.mul_vec(&shifted);
    let ell_plus: Vec<Rational> = data
        .ell
        .iter()
        .zip(&e_inv_eta)
        .map(|(l, x)| l + x)
        .collect();
    let u2 = ups_inv.mul_vec(&ell_plus);
    // (a) t·u₁ integral.
    if !u1
        .iter()
        .all(|x| is_p_integral_scalar(&(x * &data.t), p))
    {
        return Ok(false);
    }
    // (b) t·α^{-1}·u₂ integral.
    for (x, al) in u2.iter().zip(&data.alpha) {
        if !is_p_integral_scalar(&(x * &data.t / al), p) {
            return Ok(false);
        }
    }
    // (c) t^{-1}·ξ′₋ integral.
    if !xi_minus
        .iter()
        .all(|x| is_p_integral_scalar(&(x / &data.t), p))
    {
        return Ok(false);
    }
    // (d) t^{-1}·(0,…,0,1,ξ′) lies in N·Z_p^{n−1} ⊕ Z_p and is primitive as a
    // vector of Z_p^n (the bottom row of an invertible p-integral matrix has
    // unit content; the congruence pins the first n−1 entries to N·Z_p).
    let e_level = level_exponent(level, p);
    let tinv = data.t.recip();
    let mut row = vec![Rational::zero(); n];
    row[m - 1] = Rational::one();
    for j in 0..n - m {
        row[m + j] = xi_prime[j].clone();
    }
    let mut content: Option<i64> = None;
    for (idx, x) in row.iter().enumerate() {
        let scaled = x * &tinv;
        match vp(&scaled, p) {
            Valuation::Infinite => {}
            Valuation::Finite(v) => {
                let need = if idx < n - 1 { e_level } else { 0 };
                if v < need {
                    return Ok(false);
                }
                if content.map_or(true, |c| v < c) {
                    content = Some(v);
                }
            }
        }
    }
    if content != Some(0) {
        return Ok(false);
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rational(rng: &mut ChaCha8Rng, height: i64) -> Rational {
        let num = rng.gen_range(-height..=height);
        let den = rng.gen_range(1..=height);
        rat(num, den)
    }

    /// Random rational with prescribed p-valuation spread: p^e times a
    /// p-unit of bounded height.
    fn random_with_valuation(rng: &mut ChaCha8Rng, p: u64, lo: i64, hi: i64) -> Rational {
        let e = rng.gen_range(lo..=hi);
        let mut unit;
        loop {
            unit = random_rational(rng, 9);
            if !unit.is_zero() && vp(&unit, p) == Valuation::Finite(0) {
                break;
            }
        }
        p_pow(p, e) * unit
    }

    fn random_regular_matrix(rng: &mut ChaCha8Rng, n: usize, height: i64) -> ExactMatrix {
        loop {
            let m = ExactMatrix::from_fn(n, |_, _| random_rational(rng, height));
            if !m.det().is_zero() {
                return m;
            }
        }
    }

    /// Random element of GL_n(Z_(p)): a product of integral elementary
    /// column operations and permutations, so the inverse is also integral.
    fn random_glzp(rng: &mut ChaCha8Rng, n: usize, p: u64) -> ExactMatrix {
        let mut k = ExactMatrix::identity(n);
        for _ in 0..12 {
            match rng.gen_range(0..3u8) {
                0 => {
                    let i = rng.gen_range(0..n);
                    let j = rng.gen_range(0..n);
                    if i != j {
                        let lambda = random_with_valuation(rng, p, 0, 2);
                        for r in 0..n {
                            let v = k.at(r, j) + &lambda * k.at(r, i);
                            k.set(r, j, v);
                        }
                    }
                }
                1 => {
                    let i = rng.gen_range(0..n);
                    let j = rng.gen_range(0..n);
                    if i != j {
                        for r in 0..n {
                            let (x, y) = (k.at(r, i).clone(), k.at(r, j).clone());
                            k.set(r, i, y);
                            k.set(r, j, x);
                        }
                    }
                }
                _ => {
                    let i = rng.gen_range(0..n);
                    let unit = random_with_valuation(rng, p, 0, 0);
                    for r in 0..n {
                        let v = k.at(r, i) * &unit;
                        k.set(r, i, v);
                    }
                }
            }
        }
        k
    }

    #[test]
    fn exact_matrix_det_and_inverse_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for n in 1..=4 {
            for _ in 0..10 {
                let m = random_regular_matrix(&mut rng, n, 10);
                let inv = m.inverse().expect("regular");
                assert_eq!(m.mul(&inv), ExactMatrix::identity(n));
                assert_eq!(m.det() * inv.det(), Rational::one());
            }
        }
        let singular = ExactMatrix::from_i64_rows(&[vec![1, 2], vec![2, 4]]);
        assert!(singular.det().is_zero());
        assert!(singular.inverse().is_none());
    }

    #[test]
    fn iwasawa_keeps_integral_matrices_whole() {
        let g = ExactMatrix::from_i64_rows(&[vec![1, 5, -2], vec![0, 1, 7], vec![0, 0, -1]]);
        let data = iwasawa_qp(&g, 3).unwrap();
        assert_eq!(data.u, ExactMatrix::identity(3));
        assert_eq!(data.exponents, vec![0, 0, 0]);
        assert_eq!(data.units, vec![Rational::one(); 3]);
        assert_eq!(data.k, g);
    }

    #[test]
    fn iwasawa_diagonal_example() {
        let p = 5u64;
        let g = ExactMatrix::from_i64_rows(&[vec![5, 0], vec![0, 1]]);
        let data = iwasawa_qp(&g, p).unwrap();
        assert_eq!(data.u, ExactMatrix::identity(2));
        assert_eq!(data.exponents, vec![1, 0]);
        assert_eq!(data.units, vec![Rational::one(), Rational::one()]);
        assert_eq!(data.k, ExactMatrix::identity(2));
    }

    #[test]
    fn iwasawa_lower_unipotent_torus_valuations() {
        // Last row (ξ, 1) with |ξ|_p > 1 turns into |t₁| = |ξ|^{-1}, |t₂| = |ξ|.
        for p in [2u64, 3, 5] {
            for k in 1..=3i64 {
                let xi = p_pow(p, -k) * rat_int(1);
                let g = lower_unipotent_row(&[xi]);
                let data = iwasawa_qp(&g, p).unwrap();
                assert_eq!(data.exponents, vec![k, -k]);
                assert_eq!(data.reconstruct(), g);
            }
        }
    }

    #[test]
    fn iwasawa_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for p in [2u64, 3, 5] {
            for n in 2..=4 {
                for _ in 0..12 {
                    let g = random_regular_matrix(&mut rng, n, 10);
                    let data = iwasawa_qp(&g, p).unwrap();
                    assert_eq!(data.reconstruct(), g, "u·t·k must equal g");
                    assert!(data.u.is_upper_unipotent());
                    assert!(data.k.is_p_integral(p));
                    assert!(data.k_inv.is_p_integral(p));
                    assert_eq!(data.k.mul(&data.k_inv), ExactMatrix::identity(n));
                    for unit in &data.units {
                        assert!(is_p_unit(unit, p));
                    }
                }
            }
        }
    }

    #[test]
    fn iwasawa_torus_is_right_k_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for p in [2u64, 3] {
            for _ in 0..10 {
                let g = random_regular_matrix(&mut rng, 3, 10);
                let k = random_glzp(&mut rng, 3, p);
                let a = iwasawa_qp(&g, p).unwrap();
                let b = iwasawa_qp(&g.mul(&k), p).unwrap();
                assert_eq!(a.exponents, b.exponents);
            }
        }
    }

    #[test]
    fn explicit_lower_iwasawa_integral_case_is_trivial() {
        let xi = vec![rat_int(3), rat(1, 7), rat_int(0)];
        let data = explicit_lower_iwasawa(&xi, 2).unwrap();
        assert_eq!(data.upsilon, ExactMatrix::identity(3));
        assert_eq!(data.ell, vec![Rational::zero(); 3]);
        assert_eq!(data.alpha, vec![Rational::one(); 3]);
        assert_eq!(data.t, Rational::one());
        assert_eq!(data.kappa, lower_unipotent_row(&xi));
    }

    #[test]
    fn explicit_lower_iwasawa_single_coordinate() {
        let p = 3u64;
        let xi = rat(2, 9); // v_3 = -2, so |ξ|_3 > 1
        let data = explicit_lower_iwasawa(&[xi.clone()], p).unwrap();
        assert_eq!(data.t, xi);
        assert_eq!(data.alpha, vec![-xi.clone().recip()]);
        assert_eq!(data.ell, vec![xi.clone().recip()]);
        assert_eq!(data.reconstruct(), lower_unipotent_row(&[xi]));
    }

    #[test]
    fn explicit_lower_iwasawa_reconstructs_and_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        for p in [2u64, 3] {
            for _ in 0..40 {
                // Random support pattern: ξ′₊ lives on it, ξ′₋ off it.
                let r = 3usize;
                let mut xi_plus = vec![Rational::zero(); r];
                let mut xi_minus = vec![Rational::zero(); r];
                for j in 0..r {
                    if rng.gen_bool(0.7) {
                        xi_plus[j] = random_with_valuation(&mut rng, p, -4, 2);
                    } else {
                        xi_minus[j] = random_with_valuation(&mut rng, p, -3, 3);
                    }
                }
                let data = explicit_lower_iwasawa(&xi_plus, p).unwrap();
                assert_eq!(data.reconstruct(), lower_unipotent_row(&xi_plus));

                // ᵗξ′₋·ℓ = 0 and ᵗξ′₋·(Υα) = ᵗξ′₋ exactly.
                let mut dot = Rational::zero();
                for (x, l) in xi_minus.iter().zip(&data.ell) {
                    dot += x * l;
                }
                assert!(dot.is_zero());
                let fixed = data.upsilon_alpha().vec_mul(&xi_minus);
                assert_eq!(fixed, xi_minus);
            }
        }
    }

    #[test]
    fn explicit_matches_generic_on_torus_valuations() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        for n in [3usize, 4] {
            for p in [2u64, 3, 5] {
                for _ in 0..500 {
                    let r = n - 1;
                    let xi: Vec<Rational> = (0..r)
                        .map(|_| {
                            if rng.gen_bool(0.2) {
                                Rational::zero()
                            } else {
                                random_with_valuation(&mut rng, p, -4, 3)
                            }
                        })
                        .collect();
                    let explicit = explicit_lower_iwasawa(&xi, p).unwrap();
                    let generic = iwasawa_qp(&lower_unipotent_row(&xi), p).unwrap();
                    let mut expected: Vec<i64> = explicit
                        .alpha
                        .iter()
                        .map(|a| vp(a, p).finite().unwrap())
                        .collect();
                    expected.push(vp(&explicit.t, p).finite().unwrap());
                    assert_eq!(generic.exponents, expected);
                }
            }
        }
    }

    #[test]
    fn arch_lower_iwasawa_examples() {
        let trivial = arch_lower_iwasawa(&[0.0, 0.0]);
        assert!((trivial.t - 1.0).abs() < 1e-15);
        assert!(trivial.ell.iter().all(|l| l.abs() < 1e-15));
        assert!(trivial.alpha.iter().all(|a| (a - 1.0).abs() < 1e-15));

        let z = 0.75f64;
        let single = arch_lower_iwasawa(&[z]);
        assert!((single.t - (1.0 + z * z).sqrt()).abs() < 1e-14);
        assert!((single.alpha[0] - (1.0 + z * z).powf(-0.5)).abs() < 1e-14);
        assert!((single.ell[0] - z / (1.0 + z * z)).abs() < 1e-14);
    }

    #[test]
    fn arch_lower_iwasawa_gram_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        for _ in 0..25 {
            let r = 4usize;
            let mut xi = vec![0.0f64; r];
            let mut xi_minus = vec![0.0f64; r];
            for j in 0..r {
                if rng.gen_bool(0.6) {
                    xi[j] = rng.gen_range(-3.0..3.0);
                } else {
                    xi_minus[j] = rng.gen_range(-3.0..3.0);
                }
            }
            let data = arch_lower_iwasawa(&xi);

            let norm2: f64 = xi.iter().map(|v| v * v).sum();
            assert!((data.t - (1.0 + norm2).sqrt()).abs() < 1e-12);
            for j in 0..r {
                assert!((data.ell[j] - xi[j] / (1.0 + norm2)).abs() < 1e-12);
                let head: f64 = xi[..j].iter().map(|v| v * v).sum();
                let closed = (1.0 + head).sqrt() / (1.0 + head + xi[j] * xi[j]).sqrt();
                assert!((data.alpha[j] - closed).abs() < 1e-12);
            }
            assert!(data.gram_residual(&xi) < 1e-12);
            assert!(data.upsilon_alpha_hs() <= r as f64 + 1e-12);

            // κ is orthogonal.
            let prod = data.kappa.matmul(&data.kappa.transpose());
            for i in 0..=r {
                for j in 0..=r {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((prod.at(i, j) - want).abs() < 1e-12);
                }
            }

            // The co-support part is fixed with preserved norm.
            let mut dot = 0.0;
            for j in 0..r {
                dot += xi_minus[j] * data.ell[j];
            }
            assert!(dot.abs() < 1e-12);
            let mut image = vec![0.0f64; r];
            for j in 0..r {
                for i in 0..r {
                    image[j] += xi_minus[i] * data.upsilon.at(i, j) * data.alpha[j];
                }
            }
            let n1: f64 = image.iter().map(|v| v * v).sum::<f64>().sqrt();
            let n2: f64 = xi_minus.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n1 - n2).abs() < 1e-12);
        }
    }

    #[test]
    fn smith_examples() {
        let p = 7u64;
        let a = ExactMatrix::from_i64_rows(&[vec![7, 0], vec![0, 1]]);
        assert_eq!(smith_at_p(&a, p).unwrap(), vec![0, 1]);
        let b = ExactMatrix::from_i64_rows(&[vec![7, 1], vec![0, 7]]);
        assert_eq!(smith_at_p(&b, p).unwrap(), vec![0, 2]);
        let c = ExactMatrix::from_i64_rows(&[vec![7, 0, 0], vec![0, 7, 0], vec![0, 0, 7]]);
        assert_eq!(smith_at_p(&c, p).unwrap(), vec![1, 1, 1]);
        let d = ExactMatrix::from_fn(2, |i, j| if i == j { rat(1, 7) } else { Rational::zero() });
        assert_eq!(smith_at_p(&d, 2).unwrap(), vec![0, 0]);
        assert_eq!(smith_at_p(&d, 7), Err(PadicError::NotPIntegral));
    }

    #[test]
    fn smith_is_a_two_sided_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = 3u64;
        for _ in 0..10 {
            let mut g = random_regular_matrix(&mut rng, 3, 6);
            // Force p-integrality by clearing denominators of p.
            let worst = g
                .entries
                .iter()
                .filter_map(|x| vp(x, p).finite())
                .min()
                .unwrap();
            if worst < 0 {
                g = g.scale(&p_pow(p, -worst));
            }
            let left = random_glzp(&mut rng, 3, p);
            let right = random_glzp(&mut rng, 3, p);
            let base = smith_at_p(&g, p).unwrap();
            assert_eq!(smith_at_p(&left.mul(&g), p).unwrap(), base);
            assert_eq!(smith_at_p(&g.mul(&right), p).unwrap(), base);
        }
    }

    #[test]
    fn zk1_membership_examples() {
        let p = 5u64;
        // A p-integral matrix with unit determinant and exact last row e_n.
        let g = ExactMatrix::from_i64_rows(&[vec![2, 3, 1], vec![1, 2, 4], vec![0, 0, 1]]);
        assert!(is_p_unit(&g.det(), p));
        let (ok, z) = in_zk1(1, &g, p).unwrap();
        assert!(ok);
        assert_eq!(z, Some(Rational::one()));

        let scalar = ExactMatrix::from_i64_rows(&[vec![5, 0], vec![0, 5]]);
        let (ok, z) = in_zk1(6, &scalar, p).unwrap();
        assert!(ok);
        assert_eq!(z, Some(rat_int(5)));

        let bad = lower_unipotent_row(&[rat(1, 5)]).transpose();
        let (ok, z) = in_zk1(1, &bad, p).unwrap();
        assert!(!ok);
        assert!(z.is_none());
    }

    #[test]
    fn zk1_witness_is_valid_and_level_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let p = 2u64;
        let mut hits = 0usize;
        for _ in 0..200 {
            let g = random_regular_matrix(&mut rng, 3, 6);
            for level in [1u64, 2, 4, 12] {
                let (ok, z) = in_zk1(level, &g, p).unwrap();
                if ok {
                    hits += 1;
                    let z = z.expect("witness accompanies membership");
                    let scaled = g.scale(&z.recip());
                    assert!(scaled.is_p_integral(p));
                    assert!(is_p_unit(&scaled.det(), p));
                    let e = level_exponent(level, p);
                    if e > 0 {
                        assert_eq!(scaled.at(2, 2), &Rational::one());
                        for j in 0..2 {
                            if let Valuation::Finite(v) = vp(scaled.at(2, j), p) {
                                assert!(v >= e);
                            }
                        }
                    }
                    // Monotone: membership at a level implies it at divisors.
                    for divisor in [1u64, 2] {
                        if level % divisor == 0 {
                            assert!(in_zk1(divisor, &g, p).unwrap().0);
                        }
                    }
                }
            }
        }
        // K-elements are plentiful enough for the fuzz to be meaningful.
        assert!(hits > 0);
    }

    use crate::weylcoset::{
        a_gamma, coset_parametrization, enumerate_snqy, CosetParametrization, Permutation,
        WeylDoubleCoset,
    };
    use std::collections::BTreeSet;

    /// All contributing coset data of order 3 with the given subset Q:
    /// support patterns allowed by the cone of Q, together with every
    /// admissible permutation. Returned as (support, w) pairs.
    fn contributing_data_n3(q: &BTreeSet<usize>) -> Vec<(Vec<usize>, Permutation)> {
        let n = 3;
        let cone: Vec<usize> = (1..n)
            .filter(|i| !q.contains(i) && q.iter().next().map_or(true, |qm| i < qm))
            .collect();
        let mut out = Vec::new();
        for mask in 0..1usize << cone.len() {
            let supp: Vec<usize> = cone
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &i)| i)
                .collect();
            let mut pattern = vec![Rational::zero(); n - 1];
            for &i in &supp {
                pattern[i - 1] = Rational::one();
            }
            for w in enumerate_snqy(n, q, &pattern).unwrap() {
                let coset = WeylDoubleCoset::new(q.clone(), pattern.clone(), w.clone()).unwrap();
                if a_gamma(&coset) == 1 {
                    out.push((supp.clone(), w));
                }
            }
        }
        out
    }

    /// Random coordinates for the unipotent factor and the two vector slots
    /// of the representative space, with mixed p-adic sizes.
    fn random_support_sample(
        rng: &mut ChaCha8Rng,
        p: u64,
        par: &CosetParametrization,
    ) -> (ExactMatrix, Vec<Rational>, Vec<Rational>) {
        let mut coord = |spread: i64| {
            if rng.gen_bool(0.25) {
                Rational::zero()
            } else {
                random_with_valuation(rng, p, -spread, spread)
            }
        };
        let v0: Vec<Rational> = (0..par.v0_positions.len()).map(|_| coord(2)).collect();
        let comp: Vec<Rational> = (0..par.complement_positions.len())
            .map(|_| coord(2))
            .collect();
        let z = par.v_element(&v0, &comp);
        let xi: Vec<Rational> = (0..par.xi_len).map(|_| coord(3)).collect();
        let xi_prime: Vec<Rational> = (0..par.xi_prime_len).map(|_| coord(3)).collect();
        (z, xi, xi_prime)
    }

    #[test]
    fn support_indicator_singular_datum() {
        // The full subset with the zero vector: the indicator reduces to
        // integrality of A^{-1}·ξ and the bottom row is automatically
        // primitive at level one.
        for &p in &[2u64, 3, 5] {
            let q: BTreeSet<usize> = [1, 2].into_iter().collect();
            let w = Permutation::longest_sub(3);
            let coset =
                WeylDoubleCoset::new(q, vec![Rational::zero(), Rational::zero()], w).unwrap();
            let mut z = ExactMatrix::identity(2);
            z.set(0, 1, rat(3, 1));
            let xi = [Rational::one(), rat_int(p as i64)];
            assert!(support_indicator(&coset, 1, p, &z, &xi, &[]).unwrap());
            let xi_bad = [rat(1, p as i64), Rational::zero()];
            assert!(!support_indicator(&coset, 1, p, &z, &xi_bad, &[]).unwrap());
            // Input validation.
            assert_eq!(
                support_indicator(&coset, 0, p, &z, &xi, &[]),
                Err(PadicError::ZeroLevel)
            );
            assert_eq!(
                support_indicator(&coset, 1, 4, &z, &xi, &[]),
                Err(PadicError::BadPrime(4))
            );
            assert_eq!(
                support_indicator(&coset, 1, p, &z, &[Rational::one()], &[]),
                Err(PadicError::Dimension(
                    "expected Z of order n-1, xi of length m-1, xi' of length n-m",
                ))
            );
        }
    }

    #[test]
    fn support_vanishes_at_ramified_level() {
        // Ramified level kills every regular coset whose vector is zero or
        // whose leading support entry is not divisible by the level: the
        // indicator must be identically false over the whole parameter
        // space. Proper subsets only; the full subset carries the
        // non-vanishing singular term.
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let qs: Vec<BTreeSet<usize>> = vec![
            BTreeSet::new(),
            [1].into_iter().collect(),
            [2].into_iter().collect(),
        ];
        let mut total = 0usize;
        for &p in &[2u64, 3] {
            let other = if p == 2 { 3 } else { 2 };
            for q in &qs {
                for (supp, w) in contributing_data_n3(q) {
                    let mut pattern = vec![Rational::zero(); 2];
                    for &i in &supp {
                        pattern[i - 1] = Rational::one();
                    }
                    let template =
                        WeylDoubleCoset::new(q.clone(), pattern, w.clone()).unwrap();
                    let par = coset_parametrization(&template).unwrap();
                    for _ in 0..6500 {
                        let e = rng.gen_range(1..=2i64);
                        let level = p.pow(e as u32) * if rng.gen_bool(0.5) { other } else { 1 };
                        let mut y = vec![Rational::zero(); 2];
                        for (k, &i) in supp.iter().enumerate() {
                            y[i - 1] = if k == 0 {
                                // Leading entry misses the level ideal.
                                random_with_valuation(&mut rng, p, -2, e - 1)
                            } else {
                                random_with_valuation(&mut rng, p, -2, 2)
                            };
                        }
                        let coset =
                            WeylDoubleCoset::new(q.clone(), y, w.clone()).unwrap();
                        let (z, xi, xi_prime) = random_support_sample(&mut rng, p, &par);
                        assert!(
                            !support_indicator(&coset, level, p, &z, &xi, &xi_prime).unwrap(),
                            "q={q:?} supp={supp:?} w={:?} level={level}",
                            w.images()
                        );
                        total += 1;
                    }
                }
            }
        }
        assert!(total >= 100_000, "fuzz volume too small: {total}");
    }

    #[test]
    fn support_indicator_monotone_in_level() {
        // Raising the p-part of the level can only shrink the support, and
        // the p-free part of the level is invisible.
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        for &p in &[2u64, 3] {
            let other = if p == 2 { 3 } else { 2 };
            let mut data: Vec<(BTreeSet<usize>, Vec<usize>, Permutation)> = Vec::new();
            let full: BTreeSet<usize> = [1, 2].into_iter().collect();
            for q in [
                BTreeSet::new(),
                [1].into_iter().collect(),
                [2].into_iter().collect(),
                full,
            ] {
                for (supp, w) in contributing_data_n3(&q) {
                    data.push((q.clone(), supp, w));
                }
            }
            for (q, supp, w) in &data {
                let mut pattern = vec![Rational::zero(); 2];
                for &i in supp {
                    pattern[i - 1] = Rational::one();
                }
                let template =
                    WeylDoubleCoset::new(q.clone(), pattern, w.clone()).unwrap();
                let par = coset_parametrization(&template).unwrap();
                for _ in 0..60 {
                    let mut y = vec![Rational::zero(); 2];
                    for &i in supp {
                        y[i - 1] = random_with_valuation(&mut rng, p, -1, 2);
                    }
                    let coset = WeylDoubleCoset::new(q.clone(), y, w.clone()).unwrap();
                    let (z, xi, xi_prime) = random_support_sample(&mut rng, p, &par);
                    let run =
                        |level: u64| support_indicator(&coset, level, p, &z, &xi, &xi_prime).unwrap();
                    let chain: Vec<bool> = (0..4).map(|e| run(p.pow(e))).collect();
                    for pair in chain.windows(2) {
                        assert!(pair[0] || !pair[1], "support must shrink with the level");
                    }
                    for e in 0..3 {
                        assert_eq!(run(p.pow(e) * other), chain[e as usize]);
                    }
                }
            }
        }
    }
}
