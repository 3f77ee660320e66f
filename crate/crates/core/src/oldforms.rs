//! Old vectors at a level prime inside an unramified principal series of
//! GL_n(Q_p): the level-raising double cosets one rank down, the descended
//! basis W^{(0)},…,W^{(n−1)} obtained by integrating the spherical Whittaker
//! function against their normalized indicators, the finite Gram and pairing
//! matrices of that basis, and the local period attached to the new vector.
//!
//! Everything numeric here is backed by an exact or closed-form counterpart:
//! coset sums carry cyclotomic character values grouped by torus class, the
//! Gram matrix has a symmetric-function closed form for its inverse, and the
//! period is computed along three independent routes (orthogonalized basis
//! sum, trace form, closed row formula) that the tests force to agree.

use std::collections::BTreeMap;

use itertools::Itertools;
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::exactnum::{big_to_f64, CyclotomicValue, Rational};
use crate::numeric::CompensatedSum;
use crate::padiclinalg::{check_prime, p_pow, smith_at_p, ExactMatrix, PadicError};
use crate::symfun::{
    d_star, d_star_symbolic, e, eval_matrix_poly, h_sign_matrix, MultiPoly, SquareMatrix,
    SymfunError,
};
use crate::whittaker::{
    delta_b_half_exponent, for_dominant_box, local_l, rs_l, whittaker_at, whittaker_data,
    CocharLattice, SatakeParam, SpectralParamNu, TruncatedSum, WhittakerData, WhittakerError,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OldformsError {
    #[error("subset size must not exceed the rank")]
    SubsetTooLarge,
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("bad parameter: {0}")]
    BadParam(&'static str),
    #[error("closed-form Gram inverse is numerically singular (condition estimate {condition:.3e})")]
    SingularClosedForm { condition: f64 },
    #[error(transparent)]
    Whittaker(#[from] WhittakerError),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Symfun(#[from] SymfunError),
}

// ---------------------------------------------------------------------------
// Level-raising coset representatives
// ---------------------------------------------------------------------------

/// Gaussian binomial [m choose j]_p by the q-Pascal recurrence
/// [m,j] = [m−1,j−1] + p^j·[m−1,j]; the left-coset count of the level-raising
/// set below.
pub fn gaussian_binomial(m: usize, j: usize, p: u64) -> u64 {
    if j > m {
        return 0;
    }
    let mut row: Vec<u128> = vec![1];
    for _ in 1..=m {
        let mut next = vec![0u128; row.len() + 1];
        for (k, &v) in row.iter().enumerate() {
            next[k + 1] += v;
            next[k] += v * (p as u128).pow(k as u32);
        }
        row = next;
    }
    u64::try_from(row[j]).expect("coset counts in range stay below 2^64")
}

/// Left-coset decomposition of the rank-m level-raising set at p with j
/// elementary divisors equal to p: the K-double coset of
/// diag(p·1_j, 1_{m−j}) written as the disjoint union of b·K over the
/// column-reduced upper-triangular representatives.
#[derive(Debug, Clone)]
pub struct HeckeCosetSet {
    pub m: usize,
    pub j: usize,
    pub p: u64,
    pub representatives: Vec<ExactMatrix>,
}

/// Enumerate the representatives: upper-triangular matrices with diagonal a
/// 0/1 pattern of p's (j of them), entries to the right of a p reduced mod p,
/// filtered to the matrices whose elementary divisor exponents are exactly
/// j ones. The count is the Gaussian binomial [m choose j]_p.
pub fn hecke_cosets(m: usize, j: usize, p: u64) -> Result<HeckeCosetSet, OldformsError> {
    check_prime(p)?;
    if m == 0 {
        return Err(OldformsError::Dimension("rank must be positive"));
    }
    if j > m {
        return Err(OldformsError::SubsetTooLarge);
    }
    let mut target: Vec<i64> = vec![0; m - j];
    target.extend(std::iter::repeat(1).take(j));
    let mut representatives = Vec::new();
    for pattern in (0..m).combinations(j) {
        let diag: Vec<u64> = (0..m).map(|i| if pattern.contains(&i) { p } else { 1 }).collect();
        // positions free to range over [0, p): right of a diagonal p
        let free: Vec<(usize, usize)> = (0..m)
            .flat_map(|r| ((r + 1)..m).map(move |c| (r, c)))
            .filter(|&(r, _)| diag[r] == p)
            .collect();
        let total = (p as u128).pow(free.len() as u32);
        let mut counter = 0u128;
        while counter < total {
            let mut rest = counter;
            let mut entries = vec![vec![0u64; m]; m];
            for (i, row) in entries.iter_mut().enumerate() {
                row[i] = diag[i];
            }
            for &(r, c) in &free {
                entries[r][c] = (rest % p as u128) as u64;
                rest /= p as u128;
            }
            let b = ExactMatrix::from_fn(m, |r, c| Rational::from_integer(entries[r][c].into()));
            if smith_at_p(&b, p)? == target {
                representatives.push(b);
            }
            counter += 1;
        }
    }
    Ok(HeckeCosetSet { m, j, p, representatives })
}

fn transpose_inverse(b: &ExactMatrix) -> ExactMatrix {
    b.transpose().inverse().expect("coset representatives are invertible")
}

// ---------------------------------------------------------------------------
// Satake transform of the normalized coset indicators
// ---------------------------------------------------------------------------

/// Numeric Satake transform of the normalized level-raising kernel
/// p^{−j(m−j)/2}·χ on the rank-m group: the left-coset sum
/// p^{−j(m−j)/2}·Σ_b δ^{1/2}(p^{e_b})·∏_k p^{−ν_k·e_{b,k}} over the diagonal
/// valuation vectors of the representatives. Equals e_j(p^{−ν}).
pub fn satake_of_phi(
    j: usize,
    nu: &[Complex64],
    m: usize,
    p: u64,
) -> Result<Complex64, OldformsError> {
    if nu.len() != m {
        return Err(OldformsError::Dimension("spectral parameter must have the torus rank"));
    }
    let cosets = hecke_cosets(m, j, p)?;
    let lp = (p as f64).ln();
    let global = (p as f64).powf(-((j * (m - j)) as f64) / 2.0);
    let mut sum = CompensatedSum::new();
    for b in &cosets.representatives {
        let exps = diagonal_valuations(b);
        let half = delta_b_half_exponent(&exps);
        let weight = (p as f64).powf(half as f64 / 2.0);
        let character: Complex64 = nu
            .iter()
            .zip(&exps)
            .map(|(v, &ek)| (-v * (ek as f64) * lp).exp())
            .product();
        sum.add(weight * character);
    }
    Ok(global * sum.total())
}

/// Group the representatives by their diagonal valuation pattern. For every
/// pattern the surviving count times the half-power weight
/// p^{−j(m−j)/2}·δ^{1/2}(p^{pattern}) is exactly 1, which is the exact form
/// of the transform identity above; the tests verify this with integer
/// valuation arithmetic.
pub fn satake_phi_patterns(
    j: usize,
    m: usize,
    p: u64,
) -> Result<BTreeMap<Vec<i64>, u64>, OldformsError> {
    let cosets = hecke_cosets(m, j, p)?;
    let mut out: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    for b in &cosets.representatives {
        *out.entry(diagonal_valuations(b)).or_insert(0) += 1;
    }
    Ok(out)
}

fn diagonal_valuations(b: &ExactMatrix) -> Vec<i64> {
    (0..b.size())
        .map(|k| if b.at(k, k).is_one() { 0 } else { 1 })
        .collect()
}

// ---------------------------------------------------------------------------
// The descended basis W^{(j)}
// ---------------------------------------------------------------------------

/// Precomputed coset data for the descended vectors at a fixed (n, p): for
/// each j the rank-(n−1) matrices ᵗb^{-1} over the representatives of the
/// j-th level-raising set, and the scalar p^{−j(m−j)/2}·p^{−j/2} combining
/// the kernel normalization with the constant value of |det|^{1/2} on the
/// set.
struct DescendedBasis {
    p: u64,
    mats: Vec<Vec<ExactMatrix>>,
    scales: Vec<f64>,
}

fn descended_basis(n: usize, p: u64) -> Result<DescendedBasis, OldformsError> {
    if n < 2 {
        return Err(OldformsError::Dimension("the descended basis needs rank at least 2"));
    }
    let m = n - 1;
    let mut mats = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    for j in 0..n {
        let cosets = hecke_cosets(m, j, p)?;
        mats.push(cosets.representatives.iter().map(transpose_inverse).collect());
        scales.push((p as f64).powf(-((j * (m - j) + j) as f64) / 2.0));
    }
    Ok(DescendedBasis { p, mats, scales })
}

impl DescendedBasis {
    /// All torus values W^{(j)}(ι(p^λ)), j = 0..n−1, for a rank-(n−1) vector
    /// λ. The block-diagonal embedding decomposes blockwise, so only the
    /// rank-(n−1) Iwasawa decomposition of p^λ·ᵗb^{-1} is needed; its torus
    /// exponents extend by a trailing zero.
    fn torus_values(
        &self,
        param: &SatakeParam,
        lambda: &[i64],
    ) -> Result<Vec<Complex64>, OldformsError> {
        let p = self.p;
        let m = lambda.len();
        let powers: Vec<Rational> = lambda.iter().map(|&l| p_pow(p, l)).collect();
        let mut out = Vec::with_capacity(self.mats.len());
        for (mats, &scale) in self.mats.iter().zip(&self.scales) {
            let mut acc = CompensatedSum::new();
            for mat in mats {
                let a = ExactMatrix::from_fn(m, |r, c| &powers[r] * mat.at(r, c));
                let d = whittaker_data(&a, p)?;
                let mut exponents = d.exponents;
                exponents.push(0);
                let half_exponent = delta_b_half_exponent(&exponents);
                let full = WhittakerData { p, psi_arg: d.psi_arg, exponents, half_exponent };
                acc.add(full.eval(&param.t));
            }
            out.push(scale * acc.total());
        }
        Ok(out)
    }
}

/// Value of the j-th descended vector at g ∈ GL_n(Q_p):
/// W^{(j)}(g) = p^{−j(m−j)/2}·p^{−j/2}·Σ_b W⁰(g·ι(ᵗb^{-1})) over the
/// level-raising representatives one rank down (m = n−1), with ι the
/// corner embedding. The transpose-inverse transversal tiles the inverted
/// coset set by left cosets, so the sum counts each exactly once; W^{(0)}
/// is the spherical vector itself.
pub fn w_j_value(
    j: usize,
    param: &SatakeParam,
    g: &ExactMatrix,
) -> Result<Complex64, OldformsError> {
    let n = param.n();
    if n < 2 {
        return Err(OldformsError::Dimension("the descended basis needs rank at least 2"));
    }
    if g.size() != n {
        return Err(OldformsError::Dimension("matrix size must match the Satake parameter"));
    }
    let m = n - 1;
    if j > m {
        return Err(OldformsError::SubsetTooLarge);
    }
    let cosets = hecke_cosets(m, j, param.p)?;
    let scale = (param.p as f64).powf(-((j * (m - j) + j) as f64) / 2.0);
    let mut acc = CompensatedSum::new();
    for b in &cosets.representatives {
        let shifted = g.mul(&transpose_inverse(b).embed_corner());
        acc.add(whittaker_at(param, &shifted)?);
    }
    Ok(scale * acc.total())
}

/// Exact decomposition of the coset sum Σ_b W⁰(g·ι(ᵗb^{-1})) by dominant
/// Iwasawa torus class: for each exponent vector the cyclotomic sum of the
/// additive-character values of the contributing cosets. Classes whose
/// character sum vanishes are dropped. The full value of W^{(j)}(g) is the
/// overall scale times Σ over classes of (sum)·p^{δ-half/2}·s_class(t), so
/// two transversals of the same set must produce identical maps.
pub fn w_j_class_sums(
    j: usize,
    n: usize,
    p: u64,
    g: &ExactMatrix,
) -> Result<BTreeMap<Vec<i64>, CyclotomicValue>, OldformsError> {
    if n < 2 || g.size() != n {
        return Err(OldformsError::Dimension("matrix size must match the rank"));
    }
    let m = n - 1;
    if j > m {
        return Err(OldformsError::SubsetTooLarge);
    }
    let mats: Vec<ExactMatrix> =
        hecke_cosets(m, j, p)?.representatives.iter().map(transpose_inverse).collect();
    class_sums_over(&mats, p, g)
}

/// The same class decomposition through the complementary transversal: the
/// inverted level-raising set equals p^{-1} times the (m−j)-th set, so the
/// matrices p^{-1}·c over its representatives tile the same union of left
/// cosets as the transpose-inverses above.
pub fn w_j_class_sums_inverted(
    j: usize,
    n: usize,
    p: u64,
    g: &ExactMatrix,
) -> Result<BTreeMap<Vec<i64>, CyclotomicValue>, OldformsError> {
    if n < 2 || g.size() != n {
        return Err(OldformsError::Dimension("matrix size must match the rank"));
    }
    let m = n - 1;
    if j > m {
        return Err(OldformsError::SubsetTooLarge);
    }
    let pinv = p_pow(p, -1);
    let mats: Vec<ExactMatrix> = hecke_cosets(m, m - j, p)?
        .representatives
        .iter()
        .map(|c| c.scale(&pinv))
        .collect();
    class_sums_over(&mats, p, g)
}

fn class_sums_over(
    mats: &[ExactMatrix],
    p: u64,
    g: &ExactMatrix,
) -> Result<BTreeMap<Vec<i64>, CyclotomicValue>, OldformsError> {
    let mut map: BTreeMap<Vec<i64>, CyclotomicValue> = BTreeMap::new();
    for mat in mats {
        let data = whittaker_data(&g.mul(&mat.embed_corner()), p)?;
        if !data.dominant() {
            continue;
        }
        let entry = map.entry(data.exponents.clone()).or_insert_with(CyclotomicValue::zero);
        *entry = entry.clone() + data.psi_value();
    }
    map.retain(|_, v| !v.is_zero_value());
    Ok(map)
}

// ---------------------------------------------------------------------------
// Torus sweep: Gram matrix and normalized pairings in one pass
// ---------------------------------------------------------------------------

/// Accumulated lattice sums over the dominant torus box: the Gram matrix
/// ζ_p(n)·Σ_λ δ^{-1}(p^λ)·W^{(α)}(ι(p^λ))·conj(W^{(β)}(ι(p^λ))) in the
/// natural order α, β = 0..n−1, and (when a spectral parameter is supplied)
/// the central-point pairings Σ_λ δ^{-1}·W⁰_ν(p^λ)·conj(W^{(α)}(ι(p^λ))).
struct TorusSweep {
    gram: SquareMatrix<Complex64>,
    pairings: Vec<Complex64>,
}

fn torus_sweep(
    nu: Option<&SpectralParamNu>,
    param: &SatakeParam,
    basis: &DescendedBasis,
    cutoff: i64,
) -> Result<TorusSweep, OldformsError> {
    let n = param.n();
    let m = n - 1;
    let p = param.p;
    let mut gram = vec![vec![CompensatedSum::new(); n]; n];
    let mut pairings = vec![CompensatedSum::new(); n];
    let mut first_error: Option<OldformsError> = None;
    for_dominant_box(m, cutoff, |lambda| {
        if first_error.is_some() {
            return;
        }
        let w = match basis.torus_values(param, lambda) {
            Ok(w) => w,
            Err(err) => {
                first_error = Some(err);
                return;
            }
        };
        if w.iter().all(|v| v.norm() == 0.0) {
            return;
        }
        let delta_inv = (p as f64).powf(-(delta_b_half_exponent(lambda) as f64));
        for (alpha, wa) in w.iter().enumerate() {
            for (beta, wb) in w.iter().enumerate() {
                gram[alpha][beta].add(wa * wb.conj() * delta_inv);
            }
        }
        if let Some(nu) = nu {
            let cs0 = crate::whittaker::cs_value_nu(nu, p, &CocharLattice::new(lambda.to_vec()));
            if cs0.norm() != 0.0 {
                for (alpha, wa) in w.iter().enumerate() {
                    pairings[alpha].add(cs0 * wa.conj() * delta_inv);
                }
            }
        }
    });
    if let Some(err) = first_error {
        return Err(err);
    }
    let zeta_p_n = 1.0 / (1.0 - (p as f64).powi(-(n as i32)));
    Ok(TorusSweep {
        gram: SquareMatrix::from_fn(n, |a, b| gram[a][b].total() * zeta_p_n),
        pairings: pairings.iter().map(|s| s.total()).collect(),
    })
}

// ---------------------------------------------------------------------------
// The pairing matrix F and the Gram matrix G
// ---------------------------------------------------------------------------

/// Closed form of the central-point pairing matrix of the spherical vector
/// of parameter ν against the conjugated descended basis in the order
/// W^{(n−1)},…,W^{(0)}: all rows vanish except the last, whose j-th entry is
/// p^{−(n−1−j)/2}·e_{n−1−j}(p^{−ν}). Requires Re ν_j ≥ 0 (the normalizing
/// L-factors must be pole-free at the central point).
pub fn f_matrix(
    nu: &SpectralParamNu,
    param: &SatakeParam,
) -> Result<SquareMatrix<Complex64>, OldformsError> {
    let n = param.n();
    if nu.m() + 1 != n {
        return Err(OldformsError::Dimension("spectral rank must be one less than the Satake rank"));
    }
    if nu.nu.iter().any(|v| v.re < 0.0) {
        return Err(OldformsError::BadParam("spectral parameter needs nonnegative real parts"));
    }
    let t0 = nu.satake_values(param.p);
    let p = param.p as f64;
    Ok(SquareMatrix::from_fn(n, |i, j| {
        if i + 1 < n {
            return Complex64::zero();
        }
        let alpha = n - 1 - j;
        p.powf(-(alpha as f64) / 2.0) * e(alpha, &t0)
    }))
}

/// For each α the truncated normalized pairing Σ_λ δ^{-1}·W⁰_ν·conj(W^{(α)})
/// divided by ∏_i L(1/2+ν_i, t̄), against the closed value
/// p^{−α/2}·e_α(p^{−ν}) — the column entries of the matrix above. The
/// central-point lattice sum converges like p^{−gap/2}, so the cutoff must
/// be roughly twice what the norm-squared sums need.
pub fn f_matrix_column_check(
    nu: &SpectralParamNu,
    param: &SatakeParam,
    cutoff: i64,
) -> Result<Vec<TruncatedSum>, OldformsError> {
    let n = param.n();
    if nu.m() + 1 != n {
        return Err(OldformsError::Dimension("spectral rank must be one less than the Satake rank"));
    }
    if cutoff < 2 {
        return Err(OldformsError::BadParam("positive cutoff"));
    }
    let basis = descended_basis(n, param.p)?;
    let sweep = torus_sweep(Some(nu), param, &basis, cutoff)?;
    let half_sweep = torus_sweep(Some(nu), param, &basis, cutoff / 2)?;
    let tbar = param.conj_param();
    let half = Complex64::new(0.5, 0.0);
    let norm: Complex64 = nu.nu.iter().map(|&v| local_l(half + v, &tbar)).product();
    let t0 = nu.satake_values(param.p);
    let p = param.p as f64;
    let mut out = Vec::with_capacity(n);
    for alpha in 0..n {
        let reference = p.powf(-(alpha as f64) / 2.0) * e(alpha, &t0);
        let value = sweep.pairings[alpha] / norm;
        let half_error = (half_sweep.pairings[alpha] / norm - reference).norm();
        let error = (value - reference).norm();
        out.push(TruncatedSum { value, reference, error, flagged: error > 2.0 * half_error + 1e-12 });
    }
    Ok(out)
}

/// How to produce the Gram matrix of the descended basis.
#[derive(Debug, Clone, Copy)]
pub enum GramMode {
    /// Invert the closed-form expression for the transposed inverse,
    /// (1−p^{−n})·(−1)^{n−1}·ℍ(t)·𝔻*(p^{−1},t)·diag((−p)^{n−1−i}).
    Closed,
    /// Truncated norm lattice sums over the dominant box.
    Truncated { cutoff: i64 },
}

/// Gram matrix ⟨W^{(n−1−i)} | W^{(n−1−j)}⟩ of the descended basis in the
/// descending order (so the (n−1,n−1) entry is the norm of the spherical
/// vector, the Rankin–Selberg value L(1,π×π̄)). The closed mode requires a
/// unitary parameter with determinant 1.
pub fn g_matrix(
    param: &SatakeParam,
    mode: GramMode,
) -> Result<SquareMatrix<Complex64>, OldformsError> {
    let n = param.n();
    if n < 2 {
        return Err(OldformsError::Dimension("the descended basis needs rank at least 2"));
    }
    match mode {
        GramMode::Truncated { cutoff } => {
            if cutoff < 1 {
                return Err(OldformsError::BadParam("positive cutoff"));
            }
            let basis = descended_basis(n, param.p)?;
            let sweep = torus_sweep(None, param, &basis, cutoff)?;
            Ok(SquareMatrix::from_fn(n, |i, j| *sweep.gram.at(n - 1 - i, n - 1 - j)))
        }
        GramMode::Closed => {
            let m = closed_gram_transposed_inverse(param)?;
            let (inv, condition) = invert_complex(&m.transpose());
            match inv {
                Some(g) if condition <= 1e12 => Ok(g),
                _ => Err(OldformsError::SingularClosedForm { condition }),
            }
        }
    }
}

/// The closed form of ᵗG^{-1}: (1−p^{−n})·(−1)^{n−1}·ℍ(t)·𝔻*(p^{−1},t)·R(−p)
/// with R(Z) = diag(Z^{n−1−i}). Requires determinant one and unitarity.
fn closed_gram_transposed_inverse(
    param: &SatakeParam,
) -> Result<SquareMatrix<Complex64>, OldformsError> {
    let n = param.n();
    if !param.trivial_central {
        return Err(OldformsError::BadParam("determinant-one Satake parameter"));
    }
    if !param.unitary_generic {
        return Err(OldformsError::BadParam("unitary Satake parameter"));
    }
    let p = param.p as f64;
    let ds = d_star(n * (n - 1), &param.t)?;
    let dz = eval_matrix_poly(&ds, Complex64::new(1.0 / p, 0.0));
    let h = h_sign_matrix(&param.t);
    let r = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            Complex64::new(-p, 0.0).powi((n - 1 - i) as i32)
        } else {
            Complex64::zero()
        }
    });
    let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
    let factor = Complex64::new(sign * (1.0 - p.powi(-(n as i32))), 0.0);
    Ok(h.matmul(&dz).matmul(&r).scale(&factor))
}

/// Gauss–Jordan inverse with partial pivoting; the second component is the
/// ratio of the largest to the smallest pivot magnitude, a cheap condition
/// estimate. Returns None (with an infinite estimate) on a vanishing pivot.
fn invert_complex(a: &SquareMatrix<Complex64>) -> (Option<SquareMatrix<Complex64>>, f64) {
    let n = a.n;
    let mut m: Vec<Vec<Complex64>> = (0..n).map(|i| (0..n).map(|j| *a.at(i, j)).collect()).collect();
    let mut inv: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Complex64::one() } else { Complex64::zero() }).collect())
        .collect();
    let mut max_piv = 0.0f64;
    let mut min_piv = f64::INFINITY;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].norm().partial_cmp(&m[y][col].norm()).unwrap())
            .unwrap();
        let mag = m[pivot][col].norm();
        if mag == 0.0 {
            return (None, f64::INFINITY);
        }
        max_piv = max_piv.max(mag);
        min_piv = min_piv.min(mag);
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let d = m[col][col];
        for j in 0..n {
            m[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[i][col];
            if f.norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                let (mc, ic) = (m[col][j], inv[col][j]);
                m[i][j] -= f * mc;
                inv[i][j] -= f * ic;
            }
        }
    }
    (Some(SquareMatrix::from_fn(n, |i, j| inv[i][j])), max_piv / min_piv)
}

// ---------------------------------------------------------------------------
// The local period, three ways
// ---------------------------------------------------------------------------

/// The local period of the new vector computed along three routes. `closed`
/// is always present; the Gram-dependent routes are skipped (with the reason
/// recorded) when the truncated Gram matrix is numerically unusable.
#[derive(Debug, Clone)]
pub struct PeriodReport {
    pub n: usize,
    pub p: u64,
    pub nu: Vec<Complex64>,
    pub t: Vec<Complex64>,
    /// Closed row formula: p^{−n}·L(1,π×π̄)·Σ_i (−1)^{n−1−i}·
    /// 𝔻*(p^{−1},t)_{n−1,i}·p^{(n−1−i)/2}·e_{n−1−i}(p^{−ν}).
    pub closed: Complex64,
    /// Trace form L(1,π×π̄)/(p^n−1)·tr(G^{-1}F) with the truncated Gram.
    pub trace: Option<Complex64>,
    /// Orthogonalized basis sum L(1,π×π̄)/(p^n−1)·Σ_k Z⁰(ν;V̄_k)·V_k(1) with
    /// Gram–Schmidt vectors of the truncated Gram and truncated pairings.
    pub direct: Option<Complex64>,
    /// Set when trace/direct are absent.
    pub skip_reason: Option<String>,
    pub gram_condition: f64,
    /// Largest pairwise distance between the available routes.
    pub max_discrepancy: f64,
    /// |closed|·p^{1+(n−1)/(n²+1)}, the scan quantity whose suprema are
    /// tracked over the admissible spectral window.
    pub bound_ratio: f64,
}

/// Compute the period report at (ν, t). The truncated routes use the given
/// cutoff for both the Gram sums (p^{−gap} decay) and the central-point
/// pairing sums (p^{−gap/2} decay, the accuracy bottleneck).
pub fn period(
    nu: &SpectralParamNu,
    param: &SatakeParam,
    cutoff: i64,
) -> Result<PeriodReport, OldformsError> {
    let n = param.n();
    if nu.m() + 1 != n {
        return Err(OldformsError::Dimension("spectral rank must be one less than the Satake rank"));
    }
    if nu.nu.iter().any(|v| v.re < 0.0) {
        return Err(OldformsError::BadParam("spectral parameter needs nonnegative real parts"));
    }
    if cutoff < 2 {
        return Err(OldformsError::BadParam("positive cutoff"));
    }
    let p = param.p;
    let closed = closed_period_value(nu, param)?;
    let lfull = rs_l(Complex64::one(), param, &param.conj_param());
    let scale = lfull / ((p as f64).powi(n as i32) - 1.0);

    let basis = descended_basis(n, p)?;
    let sweep = torus_sweep(Some(nu), param, &basis, cutoff)?;
    let gram_desc = SquareMatrix::from_fn(n, |i, j| *sweep.gram.at(n - 1 - i, n - 1 - j));
    let (gram_inv, gram_condition) = invert_complex(&gram_desc);

    let f = f_matrix(nu, param)?;
    let tbar = param.conj_param();
    let half = Complex64::new(0.5, 0.0);
    let norm: Complex64 = nu.nu.iter().map(|&v| local_l(half + v, &tbar)).product();

    let mut trace = None;
    let mut direct = None;
    let mut skip_reason = None;
    match gram_inv {
        Some(ginv) if gram_condition <= 1e8 => {
            // tr(G^{-1}F): only the last row of F is nonzero.
            let mut tr = Complex64::zero();
            for i in 0..n {
                tr += ginv.at(i, n - 1) * f.at(n - 1, i);
            }
            trace = Some(scale * tr);
            direct = Some(scale * direct_route(&sweep, &norm, n));
        }
        _ => {
            skip_reason = Some(format!(
                "truncated Gram inversion rejected (condition estimate {:.3e})",
                gram_condition
            ));
        }
    }

    let mut max_discrepancy = 0.0f64;
    let mut routes = vec![closed];
    routes.extend(trace);
    routes.extend(direct);
    for a in 0..routes.len() {
        for b in (a + 1)..routes.len() {
            max_discrepancy = max_discrepancy.max((routes[a] - routes[b]).norm());
        }
    }
    let theta = 1.0 / ((n * n + 1) as f64);
    let bound_ratio = closed.norm() * (p as f64).powf(1.0 + (n as f64 - 1.0) * theta);
    Ok(PeriodReport {
        n,
        p,
        nu: nu.nu.clone(),
        t: param.t.clone(),
        closed,
        trace,
        direct,
        skip_reason,
        gram_condition,
        max_discrepancy,
        bound_ratio,
    })
}

/// Gram–Schmidt route on the natural-order basis W^{(0)},…,W^{(n−1)}:
/// orthonormalize against the truncated Gram, pair each V_k against the
/// spherical vector through the truncated normalized pairings, and use the
/// exact identity-point values W^{(β)}(1) = δ_{β0}. Returns Σ_k Z⁰(ν;V̄_k)·V_k(1).
fn direct_route(sweep: &TorusSweep, norm: &Complex64, n: usize) -> Complex64 {
    let gram = &sweep.gram;
    let z0: Vec<Complex64> = sweep.pairings.iter().map(|z| z / norm).collect();
    let ip = |x: &[Complex64], y: &[Complex64]| -> Complex64 {
        let mut acc = Complex64::zero();
        for (b, xb) in x.iter().enumerate() {
            for (c, yc) in y.iter().enumerate() {
                acc += xb * yc.conj() * gram.at(b, c);
            }
        }
        acc
    };
    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut a = vec![Complex64::zero(); n];
        a[k] = Complex64::one();
        for prev in &vectors {
            let c = ip(&a, prev);
            for (ai, pi) in a.iter_mut().zip(prev) {
                *ai -= c * pi;
            }
        }
        let nn = ip(&a, &a).re.max(0.0).sqrt();
        for ai in &mut a {
            *ai /= nn;
        }
        vectors.push(a);
    }
    let mut total = Complex64::zero();
    for a in &vectors {
        let z: Complex64 = a.iter().zip(&z0).map(|(ab, zb)| ab.conj() * zb).sum();
        total += z * a[0];
    }
    total
}

/// The closed row formula for the period (no matrix inversion): the only
/// nonvanishing row of the pairing matrix contracts against the last row of
/// the closed transposed-inverse Gram, collapsing to
/// p^{−n}·L(1,π×π̄)·Σ_i (−1)^{n−1−i}·𝔻*(p^{−1},t)_{n−1,i}·p^{(n−1−i)/2}·e_{n−1−i}(p^{−ν}).
fn closed_period_value(
    nu: &SpectralParamNu,
    param: &SatakeParam,
) -> Result<Complex64, OldformsError> {
    let n = param.n();
    if !param.trivial_central {
        return Err(OldformsError::BadParam("determinant-one Satake parameter"));
    }
    if !param.unitary_generic {
        return Err(OldformsError::BadParam("unitary Satake parameter"));
    }
    let p = param.p as f64;
    let ds = d_star(n * (n - 1), &param.t)?;
    let dz = eval_matrix_poly(&ds, Complex64::new(1.0 / p, 0.0));
    let t0 = nu.satake_values(param.p);
    let lfull = rs_l(Complex64::one(), param, &param.conj_param());
    let mut sum = Complex64::zero();
    for i in 0..n {
        let k = n - 1 - i;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        sum += sign * p.powf(k as f64 / 2.0) * e(k, &t0) * dz.at(n - 1, i);
    }
    Ok(lfull * p.powi(-(n as i32)) * sum)
}

// ---------------------------------------------------------------------------
// Decay-rate scan over the admissible spectral window
// ---------------------------------------------------------------------------

/// Grid resolution for the spectral window scan.
#[derive(Debug, Clone, Copy)]
pub struct LrsGrid {
    pub sigma_steps: usize,
    pub tau_steps: usize,
}

impl Default for LrsGrid {
    fn default() -> Self {
        LrsGrid { sigma_steps: 20, tau_steps: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct LrsPrimeReport {
    pub p: u64,
    pub points: usize,
    /// sup over the grid of |period|·p^{1+(n−1)/(n²+1)}.
    pub sup_ratio: f64,
    pub max_abs_period: f64,
}

#[derive(Debug, Clone)]
pub struct LrsScanReport {
    pub n: usize,
    pub per_p: Vec<LrsPrimeReport>,
}

/// Scan the closed period over a deterministic grid of unitary parameters
/// spanning the admissible window |Re s_j| ≤ 1/2 − 1/(n²+1) (boundary
/// included), with ν = 0. The grid family for rank 3 is
/// s = (σ+iτ, −σ+iτ, −2iτ): determinant one, stable under s ↦ −s̄, and
/// degenerate on the σ = 0 slice, which exercises the polynomial
/// specialization of 𝔻*. The ratio |period|·p^{1+(n−1)/(n²+1)} stays
/// finite across the window; its suprema are the regression baseline.
pub fn lrs_bound_scan(
    n: usize,
    primes: &[u64],
    grid: &LrsGrid,
) -> Result<LrsScanReport, OldformsError> {
    if n != 3 {
        return Err(OldformsError::BadParam("the admissible grid family is implemented for rank 3"));
    }
    if grid.sigma_steps < 2 || grid.tau_steps < 1 {
        return Err(OldformsError::BadParam("grid needs at least 2 sigma and 1 tau steps"));
    }
    let theta = 1.0 / ((n * n + 1) as f64);
    let sigma_max = 0.5 - theta;
    let sym = d_star_symbolic(n);
    let nu0 = SpectralParamNu::new(vec![Complex64::zero(); n - 1]);
    let t0 = nu0.satake_values(2);
    let e_vals: Vec<f64> = (0..n).map(|k| e(k, &t0).re).collect();
    let mut per_p = Vec::with_capacity(primes.len());
    for &p in primes {
        check_prime(p)?;
        let pf = p as f64;
        let lp = pf.ln();
        let tau_period = 2.0 * std::f64::consts::PI / lp;
        let mut ratios = Vec::with_capacity(grid.sigma_steps * grid.tau_steps);
        let mut max_abs = 0.0f64;
        for k in 0..grid.sigma_steps {
            let sigma = sigma_max * (k as f64) / ((grid.sigma_steps - 1) as f64);
            for l in 0..grid.tau_steps {
                let tau = (l as f64 + 0.5) * tau_period / (grid.tau_steps as f64);
                let s = [
                    Complex64::new(sigma, tau),
                    Complex64::new(-sigma, tau),
                    Complex64::new(0.0, -2.0 * tau),
                ];
                let t: Vec<Complex64> = s.iter().map(|si| (-si * lp).exp()).collect();
                let param = SatakeParam::new(p, t.clone())?;
                let lfull = rs_l(Complex64::one(), &param, &param.conj_param());
                let mut xs = t;
                xs.push(Complex64::new(1.0 / pf, 0.0));
                let mut sum = Complex64::zero();
                for i in 0..n {
                    let kk = n - 1 - i;
                    let sign = if kk % 2 == 1 { -1.0 } else { 1.0 };
                    let ds_ni = eval_poly_complex(sym.at(n - 1, i), &xs);
                    sum += sign * pf.powf(kk as f64 / 2.0) * e_vals[kk] * ds_ni;
                }
                let period = lfull * pf.powi(-(n as i32)) * sum;
                let abs = period.norm();
                max_abs = max_abs.max(abs);
                ratios.push(abs * pf.powf(1.0 + (n as f64 - 1.0) * theta));
            }
        }
        let sup_ratio = ratios.into_iter().fold(0.0f64, f64::max);
        per_p.push(LrsPrimeReport { p, points: grid.sigma_steps * grid.tau_steps, sup_ratio, max_abs_period: max_abs });
    }
    Ok(LrsScanReport { n, per_p })
}

/// Evaluate a rational-coefficient polynomial at a complex point vector
/// (trailing variables beyond the key length have exponent zero).
fn eval_poly_complex(poly: &MultiPoly<Rational>, xs: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::zero();
    for (key, coeff) in poly.terms() {
        let mut val = Complex64::new(big_to_f64(coeff), 0.0);
        for (v, &exp) in key.iter().enumerate() {
            if exp != 0 {
                val *= xs[v].powi(exp);
            }
        }
        acc += val;
    }
    acc
}

/// Regression baseline for the default 20×10 scan of the rank-3 window:
/// per-prime suprema of |period|·p^{6/5}, frozen from a verified run. The
/// suprema are attained near the window boundary, where the Rankin–Selberg
/// factor is largest; no uniformity in p is asserted, only that each scan
/// reproduces its frozen value.
pub const LRS_SCAN_BASELINE_N3: [(u64, f64); 5] = [
    (2, 186.60730439852657),
    (3, 19.885046239032565),
    (5, 2.458043784166681),
    (7, 0.7904030636944659),
    (11, 0.20631427154109597),
];
