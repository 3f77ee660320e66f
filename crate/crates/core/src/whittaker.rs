//! Unramified Whittaker machinery over Q_p: spherical torus values through
//! symmetric functions, standard and Rankin–Selberg local L-factors, the
//! truncated lattice sums for local zeta integrals with their L-product
//! references, and the truncated twisted integral over the unipotent group
//! attached to the longest Weyl element.
//!
//! The torus value of the normalized spherical Whittaker function factors as
//! ψ-part × half-power of p × Schur polynomial in the Satake parameter. The
//! decomposition data (ψ-argument, torus exponents, half-exponent) is exact
//! and parameter-free; only the final Schur evaluation is numeric. Exact-mode
//! identity tests therefore compare decompositions, while the lattice sums
//! evaluate everything as complex doubles with compensated accumulation in a
//! fixed iteration order, so results are run-to-run identical.

use crate::exactnum::{psi_p, psi_p_complex, CyclotomicValue, HalfPowerLaurent, Rational};
use crate::numeric::{CompensatedSum, CompensatedSumReal};
use crate::padiclinalg::{check_prime, iwasawa_qp, ExactMatrix, PadicError};
use crate::weylcoset::Permutation;
use num_complex::Complex64;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WhittakerError {
    #[error("not a prime: {0}")]
    BadPrime(u64),
    #[error("matrix is singular")]
    Singular,
    #[error("level must be a nonzero positive integer")]
    ZeroLevel,
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("parameter fails the {0} condition")]
    BadParam(&'static str),
    #[error("spectral parameter outside the convergence cone (consecutive real gaps must exceed 1)")]
    OutsideCone,
}

impl From<PadicError> for WhittakerError {
    fn from(e: PadicError) -> Self {
        match e {
            PadicError::BadPrime(p) => WhittakerError::BadPrime(p),
            PadicError::Singular => WhittakerError::Singular,
            PadicError::ZeroLevel => WhittakerError::ZeroLevel,
            _ => WhittakerError::Dimension("p-adic decomposition failed"),
        }
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

const FLAG_TOL: f64 = 1e-12;

/// Satake parameter of an unramified representation: the multiset of nonzero
/// complex numbers t_1..t_n attached to a prime p. The two flags record
/// whether the product over the parameter is 1 (trivial central character)
/// and whether the conjugate multiset equals the inverse multiset (unitary);
/// both are measured at construction to 1e−12.
#[derive(Debug, Clone)]
pub struct SatakeParam {
    pub p: u64,
    pub t: Vec<Complex64>,
    pub trivial_central: bool,
    pub unitary_generic: bool,
}

/// Does some bijection match every left value to a right value within tol?
fn multiset_matches(left: &[Complex64], right: &[Complex64], tol: f64) -> bool {
    fn go(i: usize, left: &[Complex64], right: &[Complex64], used: &mut [bool], tol: f64) -> bool {
        if i == left.len() {
            return true;
        }
        for j in 0..right.len() {
            if !used[j] && (left[i] - right[j]).norm() <= tol {
                used[j] = true;
                if go(i + 1, left, right, used, tol) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    let mut used = vec![false; right.len()];
    go(0, left, right, &mut used, tol)
}

impl SatakeParam {
    pub fn new(p: u64, t: Vec<Complex64>) -> Result<Self, WhittakerError> {
        check_prime(p)?;
        if t.is_empty() {
            return Err(WhittakerError::Dimension("empty Satake parameter"));
        }
        if t.iter().any(|x| x.norm() == 0.0) {
            return Err(WhittakerError::BadParam("nonzero"));
        }
        let product: Complex64 = t.iter().product();
        let trivial_central = (product - Complex64::one()).norm() <= FLAG_TOL;
        let conj: Vec<Complex64> = t.iter().map(|x| x.conj()).collect();
        let inv: Vec<Complex64> = t.iter().map(|x| 1.0 / x).collect();
        let unitary_generic = multiset_matches(&conj, &inv, FLAG_TOL);
        Ok(SatakeParam { p, t, trivial_central, unitary_generic })
    }

    /// The parameter with values p^{−ν_j}.
    pub fn from_nu(p: u64, nu: &SpectralParamNu) -> Result<Self, WhittakerError> {
        Self::new(p, nu.satake_values(p))
    }

    pub fn n(&self) -> usize {
        self.t.len()
    }

    /// Entrywise complex conjugate; both flags are preserved by conjugation.
    pub fn conj_param(&self) -> SatakeParam {
        SatakeParam {
            p: self.p,
            t: self.t.iter().map(|x| x.conj()).collect(),
            trivial_central: self.trivial_central,
            unitary_generic: self.unitary_generic,
        }
    }
}

/// Spectral parameter ν ∈ C^m on the rank-m diagonal torus.
#[derive(Debug, Clone)]
pub struct SpectralParamNu {
    pub nu: Vec<Complex64>,
}

impl SpectralParamNu {
    pub fn new(nu: Vec<Complex64>) -> Self {
        SpectralParamNu { nu }
    }

    pub fn m(&self) -> usize {
        self.nu.len()
    }

    /// The attached Satake values p^{−ν_j}.
    pub fn satake_values(&self, p: u64) -> Vec<Complex64> {
        let lp = (p as f64).ln();
        self.nu.iter().map(|v| (-v * lp).exp()).collect()
    }

    /// Whether all consecutive real gaps Re(ν_j − ν_{j+1}) exceed 1 — the
    /// region on which the twisted unipotent integral converges absolutely
    /// and its closed form below is valid.
    pub fn in_shifted_cone(&self) -> bool {
        self.nu.windows(2).all(|w| (w[0] - w[1]).re > 1.0)
    }
}

/// Half the sum of positive roots for the rank-m torus: ((m−2j+1)/2)_{j=1..m}
/// as exact rationals.
pub fn rho_half(m: usize) -> Vec<Rational> {
    (1..=m)
        .map(|j| Rational::new((m as i64 - 2 * j as i64 + 1).into(), 2.into()))
        .collect()
}

/// Integral cocharacter λ ∈ Z^m, i.e. the torus point diag(p^{λ_1},…,p^{λ_m}).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CocharLattice {
    lambda: Vec<i64>,
}

impl CocharLattice {
    pub fn new(lambda: Vec<i64>) -> Self {
        CocharLattice { lambda }
    }

    pub fn lambda(&self) -> &[i64] {
        &self.lambda
    }

    /// Non-increasing coordinates — the support condition for spherical
    /// Whittaker values on the torus.
    pub fn is_dominant(&self) -> bool {
        self.lambda.windows(2).all(|w| w[0] >= w[1])
    }

    /// Append a trailing zero: the torus point diag(p^λ, 1) one rank up.
    pub fn embed(&self) -> CocharLattice {
        let mut lambda = self.lambda.clone();
        lambda.push(0);
        CocharLattice { lambda }
    }
}

// ---------------------------------------------------------------------------
// Modulus character and numeric Schur evaluation
// ---------------------------------------------------------------------------

/// The exponent H with δ_B(p^λ)^{1/2} = p^{H/2} on the rank-m torus
/// (m = λ.len()): H = −Σ_j λ_j(m−2j+1).
pub fn delta_b_half_exponent(lambda: &[i64]) -> i64 {
    let m = lambda.len() as i64;
    -lambda
        .iter()
        .enumerate()
        .map(|(j0, &l)| l * (m - 2 * (j0 as i64 + 1) + 1))
        .sum::<i64>()
}

/// δ_B(p^λ)^{1/2} as an exact half-power of p.
pub fn delta_b_half(lambda: &[i64], p: u64) -> Result<HalfPowerLaurent, WhittakerError> {
    check_prime(p)?;
    Ok(HalfPowerLaurent::power(p, delta_b_half_exponent(lambda)))
}

/// Complete homogeneous symmetric values h_0..h_max at t via the Newton
/// recurrence k·h_k = Σ_{j≤k} p_j·h_{k−j}.
fn complete_table(t: &[Complex64], max: usize) -> Vec<Complex64> {
    let mut powers = vec![Complex64::zero(); max + 1];
    let mut running: Vec<Complex64> = t.to_vec();
    for pj in powers.iter_mut().skip(1) {
        *pj = running.iter().sum();
        for (r, base) in running.iter_mut().zip(t) {
            *r *= base;
        }
    }
    let mut h = vec![Complex64::zero(); max + 1];
    h[0] = Complex64::one();
    for k in 1..=max {
        let mut acc = Complex64::zero();
        for j in 1..=k {
            acc += powers[j] * h[k - j];
        }
        h[k] = acc / (k as f64);
    }
    h
}

/// Determinant of a small complex matrix by Gaussian elimination with
/// partial pivoting.
fn det_small(mut a: Vec<Vec<Complex64>>) -> Complex64 {
    let n = a.len();
    let mut det = Complex64::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())
            .unwrap();
        if a[pivot][col].norm() == 0.0 {
            return Complex64::zero();
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for i in col + 1..n {
            let factor = a[i][col] / a[col][col];
            for j in col..n {
                let sub = factor * a[col][j];
                a[i][j] -= sub;
            }
        }
    }
    det
}

/// Schur value s_λ(t) for a dominant λ ∈ Z^m with m = t.len(): shift to a
/// partition by the last coordinate, then the complete-homogeneous
/// determinant (stable for repeated t where the bialternant degenerates).
fn laurent_schur(t: &[Complex64], lambda: &[i64]) -> Complex64 {
    let m = lambda.len();
    debug_assert_eq!(m, t.len());
    debug_assert!(lambda.windows(2).all(|w| w[0] >= w[1]));
    if m == 0 {
        return Complex64::one();
    }
    let shift = lambda[m - 1];
    let mu: Vec<i64> = lambda.iter().map(|&l| l - shift).collect();
    let h = complete_table(t, mu[0] as usize + m);
    let mat: Vec<Vec<Complex64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let idx = mu[i] - i as i64 + j as i64;
                    if idx < 0 {
                        Complex64::zero()
                    } else {
                        h[idx as usize]
                    }
                })
                .collect()
        })
        .collect();
    let base: Complex64 = t.iter().product();
    det_small(mat) * base.powi(shift as i32)
}

fn cs_raw(t: &[Complex64], p: u64, lambda: &[i64]) -> Complex64 {
    if !lambda.windows(2).all(|w| w[0] >= w[1]) {
        return Complex64::zero();
    }
    let half = delta_b_half_exponent(lambda);
    let scale = (p as f64).sqrt().powi(half as i32);
    laurent_schur(t, lambda) * scale
}

/// Spherical Whittaker value at the torus point p^λ: δ_B(p^λ)^{1/2}·s_λ(t)
/// for dominant λ, zero otherwise; normalized to 1 at λ = 0.
pub fn cs_value(param: &SatakeParam, lambda: &CocharLattice) -> Complex64 {
    assert_eq!(
        param.n(),
        lambda.lambda().len(),
        "cocharacter rank must match the Satake parameter"
    );
    cs_raw(&param.t, param.p, lambda.lambda())
}

/// Same torus value parametrized by ν through t_j = p^{−ν_j}.
pub fn cs_value_nu(nu: &SpectralParamNu, p: u64, lambda: &CocharLattice) -> Complex64 {
    assert_eq!(
        nu.m(),
        lambda.lambda().len(),
        "cocharacter rank must match the spectral parameter"
    );
    cs_raw(&nu.satake_values(p), p, lambda.lambda())
}

// ---------------------------------------------------------------------------
// Whittaker values at general group points
// ---------------------------------------------------------------------------

/// Parameter-free decomposition of a spherical Whittaker value: for any
/// Satake parameter t of matching rank,
/// value(t) = ψ_p(psi_arg) · p^{half_exponent/2} · s_{exponents}(t)
/// when `exponents` is dominant, and 0 otherwise. The ψ-argument is well
/// defined modulo p-integers whenever the value is nonzero.
#[derive(Debug, Clone)]
pub struct WhittakerData {
    pub p: u64,
    /// Superdiagonal sum of the unipotent Iwasawa factor.
    pub psi_arg: Rational,
    /// Valuations of the Iwasawa torus entries.
    pub exponents: Vec<i64>,
    /// δ_B(p^exponents)^{1/2} = p^{half_exponent/2}.
    pub half_exponent: i64,
}

impl WhittakerData {
    pub fn dominant(&self) -> bool {
        self.exponents.windows(2).all(|w| w[0] >= w[1])
    }

    /// The exact cyclotomic value of the additive character factor.
    pub fn psi_value(&self) -> CyclotomicValue {
        psi_p(&self.psi_arg, self.p).expect("prime was validated at construction")
    }

    /// Numeric evaluation at a Satake vector of matching rank.
    pub fn eval(&self, t: &[Complex64]) -> Complex64 {
        assert_eq!(t.len(), self.exponents.len(), "rank mismatch");
        if !self.dominant() {
            return Complex64::zero();
        }
        let scale = (self.p as f64).sqrt().powi(self.half_exponent as i32);
        psi_p_complex(&self.psi_arg, self.p) * scale * laurent_schur(t, &self.exponents)
    }
}

/// Iwasawa-decompose g = u·τ·k over Q_p and keep what a spherical Whittaker
/// evaluation needs: the superdiagonal ψ-argument of u and the valuation
/// vector of τ (torus units act trivially and are discarded).
pub fn whittaker_data(g: &ExactMatrix, p: u64) -> Result<WhittakerData, WhittakerError> {
    let data = iwasawa_qp(g, p)?;
    let n = g.size();
    let mut psi_arg = Rational::zero();
    for j in 0..n.saturating_sub(1) {
        psi_arg += data.u.at(j, j + 1);
    }
    let half_exponent = delta_b_half_exponent(&data.exponents);
    Ok(WhittakerData { p, psi_arg, exponents: data.exponents, half_exponent })
}

/// Value of the normalized spherical Whittaker function at g ∈ GL_n(Q_p):
/// ψ_p(Σu_{j,j+1}) times the torus value at the Iwasawa exponent vector.
pub fn whittaker_at(param: &SatakeParam, g: &ExactMatrix) -> Result<Complex64, WhittakerError> {
    if g.size() != param.n() {
        return Err(WhittakerError::Dimension("matrix size must match the Satake parameter"));
    }
    let data = whittaker_data(g, param.p)?;
    Ok(data.eval(&param.t))
}

// ---------------------------------------------------------------------------
// Local L-factors
// ---------------------------------------------------------------------------

/// Standard local L-factor ∏_j (1 − t_j·p^{−s})^{-1}.
pub fn local_l(s: Complex64, param: &SatakeParam) -> Complex64 {
    let ps = (-s * (param.p as f64).ln()).exp();
    param
        .t
        .iter()
        .map(|t| 1.0 / (Complex64::one() - t * ps))
        .product()
}

/// Rankin–Selberg local L-factor ∏_{i,j} (1 − t_i·t′_j·p^{−s})^{-1} for two
/// parameters at the same prime.
pub fn rs_l(s: Complex64, a: &SatakeParam, b: &SatakeParam) -> Complex64 {
    assert_eq!(a.p, b.p, "Rankin-Selberg factor needs a common prime");
    let ps = (-s * (a.p as f64).ln()).exp();
    let mut prod = Complex64::one();
    for ta in &a.t {
        for tb in &b.t {
            prod /= Complex64::one() - ta * tb * ps;
        }
    }
    prod
}

// ---------------------------------------------------------------------------
// Truncated sums and integrals
// ---------------------------------------------------------------------------

/// Result of a truncated sum or integral next to its closed-form reference.
#[derive(Debug, Clone)]
pub struct TruncatedSum {
    pub value: Complex64,
    pub reference: Complex64,
    /// |value − reference|.
    pub error: f64,
    /// Set when the error failed to shrink against the half-cutoff run — the
    /// empirical non-convergence signal for the lattice sums.
    pub flagged: bool,
}

impl TruncatedSum {
    fn against(value: Complex64, reference: Complex64, half_error: Option<f64>) -> Self {
        let error = (value - reference).norm();
        let flagged = match half_error {
            Some(he) => error > 2.0 * he + 1e-12,
            None => false,
        };
        TruncatedSum { value, reference, error, flagged }
    }
}

/// Iterate dominant λ ∈ Z^m with all consecutive gaps and the last
/// coordinate in [0, cutoff], calling f on each.
pub(crate) fn for_dominant_box(m: usize, cutoff: i64, mut f: impl FnMut(&[i64])) {
    let mut digits = vec![0i64; m];
    let mut lambda = vec![0i64; m];
    loop {
        // digits = (gaps, last coordinate) → λ by suffix sums.
        let mut acc = digits[m - 1];
        for j in (0..m).rev() {
            if j < m - 1 {
                acc += digits[j];
            }
            lambda[j] = acc;
        }
        f(&lambda);
        let mut i = 0;
        loop {
            if i == m {
                return;
            }
            digits[i] += 1;
            if digits[i] <= cutoff {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Truncated local Rankin–Selberg zeta lattice sum
/// Σ_λ δ_B(p^λ)^{-1}·W⁰(ν;p^λ)·conj(W(diag(p^λ,1)))·|det p^λ|^{z−1/2}
/// over dominant λ ∈ Z^{n−1} with gaps and last coordinate in [0, cutoff],
/// against the closed form ∏_j L(z+ν_j, t̄).
pub fn zeta_truncated(
    z: Complex64,
    nu: &SpectralParamNu,
    param: &SatakeParam,
    cutoff: i64,
) -> Result<TruncatedSum, WhittakerError> {
    if nu.m() == 0 || nu.m() + 1 != param.n() {
        return Err(WhittakerError::Dimension(
            "spectral rank must be one less than the Satake rank",
        ));
    }
    if cutoff < 1 {
        return Err(WhittakerError::BadParam("positive cutoff"));
    }
    let tbar = param.conj_param();
    let reference: Complex64 = nu.nu.iter().map(|&v| local_l(z + v, &tbar)).product();
    let value = zeta_sum(z, nu, &tbar, cutoff);
    let half_error = if cutoff >= 2 {
        Some((zeta_sum(z, nu, &tbar, cutoff / 2) - reference).norm())
    } else {
        None
    };
    Ok(TruncatedSum::against(value, reference, half_error))
}

fn zeta_sum(z: Complex64, nu: &SpectralParamNu, tbar: &SatakeParam, cutoff: i64) -> Complex64 {
    let m = nu.m();
    let p = tbar.p;
    let lp = (p as f64).ln();
    let t0 = nu.satake_values(p);
    let mut sum = CompensatedSum::new();
    for_dominant_box(m, cutoff, |lambda| {
        let cs0 = cs_raw(&t0, p, lambda);
        let mut embedded: Vec<i64> = lambda.to_vec();
        embedded.push(0);
        let cs1 = cs_raw(&tbar.t, p, &embedded);
        let total: i64 = lambda.iter().sum();
        let delta_inv = (p as f64).sqrt().powi(-2 * delta_b_half_exponent(lambda) as i32);
        let det_pow = (-(z - 0.5) * (total as f64) * lp).exp();
        sum.add(cs0 * cs1 * delta_inv * det_pow);
    });
    sum.total()
}

/// Truncated norm-squared lattice sum for the mirabolic inner product of the
/// normalized spherical Whittaker function with itself,
/// ζ_p(n)·Σ_λ δ_B(p^λ)^{-1}·|W(diag(p^λ,1))|², against the Rankin–Selberg
/// value L(1, π×π̄). All terms are nonnegative, so the truncation error is
/// exactly the omitted tail.
pub fn mirabolic_inner_truncated(
    param: &SatakeParam,
    cutoff: i64,
) -> Result<TruncatedSum, WhittakerError> {
    if param.n() < 2 {
        return Err(WhittakerError::Dimension("mirabolic sum needs rank at least 2"));
    }
    if !param.unitary_generic {
        return Err(WhittakerError::BadParam("unitary_generic"));
    }
    if cutoff < 1 {
        return Err(WhittakerError::BadParam("positive cutoff"));
    }
    let reference = rs_l(Complex64::one(), param, &param.conj_param());
    let value = mirabolic_sum(param, cutoff);
    let half_error = if cutoff >= 2 {
        Some((mirabolic_sum(param, cutoff / 2) - reference).norm())
    } else {
        None
    };
    Ok(TruncatedSum::against(value, reference, half_error))
}

fn mirabolic_sum(param: &SatakeParam, cutoff: i64) -> Complex64 {
    let n = param.n();
    let p = param.p;
    let zeta_p_n = 1.0 / (1.0 - (p as f64).powi(-(n as i32)));
    let mut sum = CompensatedSumReal::new();
    for_dominant_box(n - 1, cutoff, |lambda| {
        let mut embedded: Vec<i64> = lambda.to_vec();
        embedded.push(0);
        let cs = cs_raw(&param.t, p, &embedded);
        let delta_inv = (p as f64).sqrt().powi(-2 * delta_b_half_exponent(lambda) as i32);
        sum.add(cs.norm_sqr() * delta_inv);
    });
    Complex64::new(zeta_p_n * sum.total(), 0.0)
}

/// Truncated twisted integral of the normalized standard section over the
/// upper unipotent group of GL_m, m = ν.len(): the exact cell sum of
/// 𝗌^{(ν)}(w_ℓ·u)·ψ_p(Σu_{j,j+1})^{-1} over u ∈ U(p^{−depth}Z_p)/U(Z_p),
/// scaled by the inverse index of the level's congruence unit subgroup,
/// against the closed form index^{-1}·∏_{i<j}(1 − p^{−(1+ν_i−ν_j)}).
///
/// The integrand is constant on the cells (right invariance under the
/// integral points), so the truncation is exact on its region; the cell
/// count is p^{depth·m(m−1)/2}.
pub fn jacquet_truncated(
    nu: &SpectralParamNu,
    p: u64,
    depth: u32,
    level: u64,
) -> Result<TruncatedSum, WhittakerError> {
    check_prime(p)?;
    if level == 0 {
        return Err(WhittakerError::ZeroLevel);
    }
    if !nu.in_shifted_cone() {
        return Err(WhittakerError::OutsideCone);
    }
    let m = nu.m();
    if m < 2 {
        return Err(WhittakerError::Dimension("the unipotent group is trivial below rank 2"));
    }
    // Index of the congruence unit subgroup 1 + p^v·Z_p in Z_p^×, where v is
    // the p-part of the level; only that p-part matters.
    let mut v = 0u32;
    let mut rest = level;
    while rest % p == 0 {
        rest /= p;
        v += 1;
    }
    let index_inv = if v == 0 {
        1.0
    } else {
        1.0 / ((p - 1) as f64 * (p as f64).powi(v as i32 - 1))
    };

    let rho: Vec<f64> = rho_half(m).iter().map(crate::exactnum::big_to_f64).collect();
    let lp = (p as f64).ln();
    let longest = Permutation::longest(m).matrix();
    let modulus = p.pow(depth);
    let denom = Rational::new(1.into(), i64::pow(p as i64, depth).into());

    let slots: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let mut digits = vec![0u64; slots.len()];
    let mut sum = CompensatedSum::new();
    loop {
        let mut u = ExactMatrix::identity(m);
        let mut psi_arg = Rational::zero();
        for (digit, &(i, j)) in digits.iter().zip(&slots) {
            let entry = Rational::from_integer((*digit as i64).into()) * &denom;
            if j == i + 1 {
                psi_arg += &entry;
            }
            u.set(i, j, entry);
        }
        let data = iwasawa_qp(&longest.mul(&u), p)?;
        let mut exponent = Complex64::zero();
        for (e, (nu_j, rho_j)) in data.exponents.iter().zip(nu.nu.iter().zip(&rho)) {
            exponent += (*e as f64) * (*nu_j + *rho_j);
        }
        let section = (-exponent * lp).exp();
        sum.add(section * psi_p_complex(&psi_arg, p).conj());

        let mut i = 0;
        loop {
            if i == digits.len() {
                let value = sum.total() * index_inv;
                let mut reference = Complex64::new(index_inv, 0.0);
                for a in 0..m {
                    for b in a + 1..m {
                        let gap = nu.nu[a] - nu.nu[b];
                        reference *= Complex64::one() - (-(Complex64::one() + gap) * lp).exp();
                    }
                }
                return Ok(TruncatedSum::against(value, reference, None));
            }
            digits[i] += 1;
            if digits[i] < modulus {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}
