//! Double-coset combinatorics for the degenerate Whittaker expansion.
//!
//! The group GL_n(Q) decomposes into double cosets under the mirabolic-type
//! pair (scalars times the embedded upper-triangular subgroup of GL_{n−1},
//! full upper-unipotent subgroup on the right). Each coset has a canonical
//! representative n(y)·w with w a permutation and y a vector compatible with
//! w ([`in_y`]); [`classify`] computes that representative exactly for any
//! invertible rational matrix, together with the witnesses of the
//! factorization. The subset data Q ⊆ {1,…,n−1} selects which cosets carry a
//! nonzero fine term: [`enumerate_snqy`] lists the admissible permutations
//! for a pair (Q, y), [`stabilizer`] describes the unipotent stabilizer of a
//! representative by exact linear constraints, and [`a_gamma`] evaluates the
//! 0/1 coefficient attached to a triple (Q, y, w), which agrees with the
//! independent character-triviality test [`character_triviality_oracle`].
//! [`coset_parametrization`] and the orbit product law ([`orbit_product`],
//! [`orbit_realize`]) give explicit coordinates on the quotient of the
//! unipotent group by the stabilizer.

use crate::exactnum::Rational;
use crate::padiclinalg::ExactMatrix;
use itertools::Itertools;
use num_traits::{One, Zero};
use std::collections::BTreeSet;

/// Errors for the coset combinatorics.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WeylError {
    #[error("images must form a bijection of 1..=n")]
    NotAPermutation,
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("the support of y must lie in the complement of Q")]
    SupportNotInComplement,
    #[error("matrix is singular")]
    Singular,
    #[error("(Q, y, w) is not an admissible coset datum")]
    NotAdmissible,
}

// ---------------------------------------------------------------------------
// Permutations
// ---------------------------------------------------------------------------

/// A permutation w of {1,…,n}, stored by its images w(1),…,w(n). The matrix
/// realization puts a 1 in row w(j) of column j, so that matrices compose the
/// same way as maps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn from_images(images: Vec<usize>) -> Result<Self, WeylError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v == 0 || v > n || seen[v - 1] {
                return Err(WeylError::NotAPermutation);
            }
            seen[v - 1] = true;
        }
        Ok(Permutation { images })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (1..=n).collect(),
        }
    }

    /// The order-reversing permutation j ↦ n+1−j.
    pub fn longest(n: usize) -> Self {
        Permutation {
            images: (1..=n).rev().collect(),
        }
    }

    /// The longest element of the subgroup fixing n: j ↦ n−j for j < n, and
    /// n ↦ n.
    pub fn longest_sub(n: usize) -> Self {
        let mut images: Vec<usize> = (1..n).rev().collect();
        images.push(n);
        Permutation { images }
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// w(j) for 1 ≤ j ≤ n.
    pub fn apply(&self, j: usize) -> usize {
        self.images[j - 1]
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.n()];
        for (j, &i) in self.images.iter().enumerate() {
            images[i - 1] = j + 1;
        }
        Permutation { images }
    }

    /// (self ∘ other)(j) = self(other(j)).
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.n(), other.n(), "order mismatch");
        Permutation {
            images: (1..=self.n()).map(|j| self.apply(other.apply(j))).collect(),
        }
    }

    /// The permutation matrix with entry 1 at (w(j), j).
    pub fn matrix(&self) -> ExactMatrix {
        let n = self.n();
        ExactMatrix::from_fn(n, |i, j| {
            if i + 1 == self.apply(j + 1) {
                Rational::one()
            } else {
                Rational::zero()
            }
        })
    }

    /// Number of pairs j < k with w(j) > w(k).
    pub fn inversions(&self) -> usize {
        let n = self.n();
        let mut count = 0;
        for j in 1..=n {
            for k in j + 1..=n {
                if self.apply(j) > self.apply(k) {
                    count += 1;
                }
            }
        }
        count
    }

    /// All n! permutations in lexicographic order of their image vectors.
    pub fn all(n: usize) -> Vec<Self> {
        (1..=n)
            .permutations(n)
            .map(|images| Permutation { images })
            .collect()
    }
}

/// The indices i with y_i ≠ 0, as 1-based positions.
pub fn support(y: &[Rational]) -> BTreeSet<usize> {
    y.iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, _)| i + 1)
        .collect()
}

/// Compatibility of y with w: the support of y must consist of values i with
/// w^{-1}(i) > w^{-1}(n), and w^{-1} must be decreasing on the support.
pub fn in_y(w: &Permutation, y: &[Rational]) -> bool {
    let n = w.n();
    if y.len() != n - 1 {
        return false;
    }
    let winv = w.inverse();
    let m = winv.apply(n);
    let spy: Vec<usize> = support(y).into_iter().collect();
    if spy.iter().any(|&i| winv.apply(i) <= m) {
        return false;
    }
    spy.windows(2).all(|p| winv.apply(p[0]) > winv.apply(p[1]))
}

// ---------------------------------------------------------------------------
// The coset datum (Q, y, w)
// ---------------------------------------------------------------------------

/// A coset datum: a subset Q ⊆ {1,…,n−1}, a vector y of length n−1, and a
/// permutation w of {1,…,n}. The structure stores the triple verbatim; the
/// admissibility predicates and derived combinatorics (ascent positions,
/// sectors, reduced permutation w₀) are computed on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylDoubleCoset {
    n: usize,
    q: BTreeSet<usize>,
    y: Vec<Rational>,
    w: Permutation,
}

impl WeylDoubleCoset {
    pub fn new(q: BTreeSet<usize>, y: Vec<Rational>, w: Permutation) -> Result<Self, WeylError> {
        let n = w.n();
        if n < 2 {
            return Err(WeylError::Dimension("order must be at least 2"));
        }
        if y.len() != n - 1 {
            return Err(WeylError::Dimension("y must have length n-1"));
        }
        if q.iter().any(|&i| i == 0 || i >= n) {
            return Err(WeylError::Dimension("Q must be a subset of 1..=n-1"));
        }
        Ok(WeylDoubleCoset { n, q, y, w })
    }

    /// The datum with the subset read off from w: Q = w({1,…,m−1}) where
    /// m = w^{-1}(n).
    pub fn from_yw(y: Vec<Rational>, w: Permutation) -> Result<Self, WeylError> {
        let m = w.inverse().apply(w.n());
        let q: BTreeSet<usize> = (1..m).map(|j| w.apply(j)).collect();
        Self::new(q, y, w)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &BTreeSet<usize> {
        &self.q
    }

    pub fn y(&self) -> &[Rational] {
        &self.y
    }

    pub fn w(&self) -> &Permutation {
        &self.w
    }

    /// m = #Q + 1.
    pub fn m(&self) -> usize {
        self.q.len() + 1
    }

    /// The complement of Q in {1,…,n−1}.
    pub fn q_complement(&self) -> BTreeSet<usize> {
        (1..self.n).filter(|i| !self.q.contains(i)).collect()
    }

    pub fn support(&self) -> BTreeSet<usize> {
        support(&self.y)
    }

    /// Values i ∈ {1,…,n−1} whose position under w lies after the position
    /// of n.
    pub fn i_w0(&self) -> BTreeSet<usize> {
        let winv = self.w.inverse();
        let m = winv.apply(self.n);
        (1..self.n).filter(|&i| winv.apply(i) > m).collect()
    }

    /// Ascent positions of w after the position of n: the i ∈ {1,…,n−1} with
    /// i > w^{-1}(n) and w(i) < w(i+1).
    pub fn ascents(&self) -> Vec<usize> {
        let m = self.w.inverse().apply(self.n);
        (m + 1..self.n)
            .filter(|&i| self.w.apply(i) < self.w.apply(i + 1))
            .collect()
    }

    /// The sectors J_ν = [j_{ν−1}+1, j_ν] cut out by the ascent positions
    /// j_1 < … < j_h, with j_0 = w^{-1}(n); returned as inclusive ranges.
    pub fn sectors(&self) -> Vec<(usize, usize)> {
        let m = self.w.inverse().apply(self.n);
        let mut out = Vec::new();
        let mut prev = m;
        for j in self.ascents() {
            out.push((prev + 1, j));
            prev = j;
        }
        out
    }

    /// Per sector, the positions i ∈ J_ν with w(i) outside the support of y
    /// and w(i) < w(j_ν + 1).
    pub fn j_star(&self) -> Vec<Vec<usize>> {
        let spy = self.support();
        self.sectors()
            .iter()
            .map(|&(lo, hi)| {
                (lo..=hi)
                    .filter(|&i| {
                        !spy.contains(&self.w.apply(i)) && self.w.apply(i) < self.w.apply(hi + 1)
                    })
                    .collect()
            })
            .collect()
    }

    /// The permutation of {1,…,n−1} obtained from w by deleting the value n:
    /// w₀(j) = w(j) for j < w^{-1}(n) and w₀(j) = w(j+1) afterwards.
    pub fn w0(&self) -> Permutation {
        let m = self.w.inverse().apply(self.n);
        let images: Vec<usize> = (1..self.n)
            .map(|j| if j < m { self.w.apply(j) } else { self.w.apply(j + 1) })
            .collect();
        Permutation::from_images(images).expect("deleting a value keeps a bijection")
    }

    /// Membership of y in the cone attached to Q: the support must avoid Q
    /// and sit below every element of Q.
    pub fn y_in_cone(&self) -> bool {
        let spy = self.support();
        spy.iter().all(|i| !self.q.contains(i)) && {
            match self.q.iter().next() {
                Some(&qmin) => spy.iter().all(|&i| i < qmin),
                None => true,
            }
        }
    }

    /// The defining conditions for w to be admissible for (Q, y): the first
    /// block of w is Q in decreasing order followed by n, the inverse is
    /// decreasing on the support of y, and every ascent position j after m
    /// jumps from outside the support to the next support element.
    pub fn is_admissible(&self) -> bool {
        let n = self.n;
        let m = self.m();
        let w = &self.w;
        if w.apply(m) != n {
            return false;
        }
        let head: BTreeSet<usize> = (1..m).map(|j| w.apply(j)).collect();
        if head != self.q {
            return false;
        }
        for j in 1..m.saturating_sub(1) {
            if w.apply(j) < w.apply(j + 1) {
                return false;
            }
        }
        let winv = w.inverse();
        let spy = self.support();
        let spv: Vec<usize> = spy.iter().copied().collect();
        if !spv.windows(2).all(|p| winv.apply(p[0]) > winv.apply(p[1])) {
            return false;
        }
        for j in self.ascents() {
            let a = w.apply(j);
            let b = w.apply(j + 1);
            if spy.contains(&a) || !spy.contains(&b) {
                return false;
            }
            if (a..b).any(|v| spy.contains(&v)) {
                return false;
            }
        }
        true
    }
}

/// Lists the permutations admissible for (Q, y) by direct construction: the
/// first block is forced (Q in decreasing order, then n), and the remaining
/// values fill the tail subject to the support and ascent conditions.
/// Requires the support of y to avoid Q.
pub fn enumerate_snqy(
    n: usize,
    q: &BTreeSet<usize>,
    y: &[Rational],
) -> Result<Vec<Permutation>, WeylError> {
    if n < 2 {
        return Err(WeylError::Dimension("order must be at least 2"));
    }
    if y.len() != n - 1 {
        return Err(WeylError::Dimension("y must have length n-1"));
    }
    if q.iter().any(|&i| i == 0 || i >= n) {
        return Err(WeylError::Dimension("Q must be a subset of 1..=n-1"));
    }
    if support(y).iter().any(|i| q.contains(i)) {
        return Err(WeylError::SupportNotInComplement);
    }
    let mut head: Vec<usize> = q.iter().rev().copied().collect();
    head.push(n);
    let tail_values: Vec<usize> = (1..n).filter(|i| !q.contains(i)).collect();
    let k = tail_values.len();
    let mut out = Vec::new();
    for tail in tail_values.into_iter().permutations(k) {
        let mut images = head.clone();
        images.extend(tail);
        let w = Permutation::from_images(images).expect("constructed bijection");
        let coset = WeylDoubleCoset::new(q.clone(), y.to_vec(), w.clone())
            .expect("validated dimensions");
        if coset.is_admissible() {
            out.push(w);
        }
    }
    out.sort();
    Ok(out)
}

/// The 0/1 coefficient of the coset datum: 1 exactly when y lies in the cone
/// of Q and w is admissible for (Q, y).
pub fn a_gamma(coset: &WeylDoubleCoset) -> u8 {
    u8::from(coset.y_in_cone() && coset.is_admissible())
}

// ---------------------------------------------------------------------------
// Stabilizer of a representative
// ---------------------------------------------------------------------------

/// Exact description of the unipotent stabilizer of the representative
/// n(y)·w inside the upper-unipotent group, in the coordinates u_{ij}
/// (1 ≤ i < j ≤ n−1) of the smaller unipotent group: a list of coordinates
/// forced to vanish, one linear form per value i whose position lies after
/// n's and outside the support, the solution-space dimension, and the linear
/// form giving the character value of a stabilizer element.
#[derive(Debug, Clone)]
pub struct StabilizerDescription {
    pub n: usize,
    /// All coordinates (i, j), i < j, in lexicographic order.
    pub coordinates: Vec<(usize, usize)>,
    /// Coordinates forced to vanish: the pairs whose positions are inverted
    /// by w.
    pub vanishing: Vec<(usize, usize)>,
    /// Per value i (first component), the linear form Σ_j y_j·u_{ij} = 0 over
    /// the coordinate chart; rows may be identically zero.
    pub sum_constraints: Vec<(usize, Vec<Rational>)>,
    /// The linear form computing the additive character on a stabilizer
    /// element, over the coordinate chart.
    pub character: Vec<Rational>,
    /// Dimension of the solution space.
    pub dimension: usize,
}

impl StabilizerDescription {
    pub fn coordinate_index(&self, i: usize, j: usize) -> Option<usize> {
        self.coordinates.iter().position(|&p| p == (i, j))
    }
}

/// Row-reduces to reduced echelon form, dropping zero rows; returns the
/// pivot column of each remaining row.
fn rref(rows: &mut Vec<Vec<Rational>>) -> Vec<usize> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let Some(pr) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, pr);
        let piv = rows[r][c].clone();
        for v in rows[r].iter_mut() {
            *v /= &piv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for cc in 0..cols {
                    let sub = &f * &rows[r][cc];
                    rows[i][cc] -= sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    pivots
}

/// Computes the stabilizer description of the representative attached to the
/// datum: vanishing coordinates from the inverted pairs, one summation
/// constraint per eligible value, the character form, and the exact solution
/// dimension.
pub fn stabilizer(coset: &WeylDoubleCoset) -> StabilizerDescription {
    let n = coset.n();
    let w = coset.w();
    let winv = w.inverse();
    let y = coset.y();
    let spy = coset.support();

    let coordinates: Vec<(usize, usize)> = (1..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let idx = |i: usize, j: usize| coordinates.iter().position(|&p| p == (i, j)).unwrap();

    let vanishing: Vec<(usize, usize)> = coordinates
        .iter()
        .copied()
        .filter(|&(i, j)| winv.apply(i) > winv.apply(j))
        .collect();

    let mut sum_constraints = Vec::new();
    for i in coset.i_w0() {
        if spy.contains(&i) {
            continue;
        }
        let mut row = vec![Rational::zero(); coordinates.len()];
        for &j in &spy {
            if j > i && winv.apply(j) > winv.apply(i) {
                row[idx(i, j)] = y[j - 1].clone();
            }
        }
        sum_constraints.push((i, row));
    }

    // Character form: the sum over consecutive positions a of the matrix
    // entry at (w(a), w(a+1)) of the embedded stabilizer element. Positions
    // touching n's row or column contribute the last-column value or zero.
    let mut character = vec![Rational::zero(); coordinates.len()];
    for a in 1..n {
        let (va, vb) = (w.apply(a), w.apply(a + 1));
        if va == n {
            continue; // the bottom row of the embedding is (0,…,0,1)
        }
        if vb == n {
            // last column entry: Σ_{k > va} u_{va,k}·y_k
            for k in va + 1..n {
                if !y[k - 1].is_zero() {
                    character[idx(va, k)] += &y[k - 1];
                }
            }
        } else if va < vb {
            character[idx(va, vb)] += Rational::one();
        }
    }

    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for &(i, j) in &vanishing {
        let mut row = vec![Rational::zero(); coordinates.len()];
        row[idx(i, j)] = Rational::one();
        rows.push(row);
    }
    for (_, row) in &sum_constraints {
        if row.iter().any(|v| !v.is_zero()) {
            rows.push(row.clone());
        }
    }
    let rank = rref(&mut rows).len();

    StabilizerDescription {
        n,
        dimension: coordinates.len() - rank,
        coordinates,
        vanishing,
        sum_constraints,
        character,
    }
}

/// Independent reference test for the coefficient: solves the stabilizer
/// constraints exactly, producing a basis of the solution space, and checks
/// that the character form vanishes on every basis vector. This is the
/// analytic definition of the coefficient being nonzero, decided by exact
/// linear algebra instead of the subset combinatorics.
pub fn character_triviality_oracle(coset: &WeylDoubleCoset) -> bool {
    let st = stabilizer(coset);
    let k = st.coordinates.len();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for &(i, j) in &st.vanishing {
        let mut row = vec![Rational::zero(); k];
        row[st.coordinate_index(i, j).unwrap()] = Rational::one();
        rows.push(row);
    }
    for (_, row) in &st.sum_constraints {
        if row.iter().any(|v| !v.is_zero()) {
            rows.push(row.clone());
        }
    }
    let pivots = rref(&mut rows);
    let pivot_set: BTreeSet<usize> = pivots.iter().copied().collect();
    for f in 0..k {
        if pivot_set.contains(&f) {
            continue;
        }
        // Basis vector for the free coordinate f.
        let mut v = vec![Rational::zero(); k];
        v[f] = Rational::one();
        for (r, &p) in pivots.iter().enumerate() {
            v[p] = -rows[r][f].clone();
        }
        let mut val = Rational::zero();
        for c in 0..k {
            val += &st.character[c] * &v[c];
        }
        if !val.is_zero() {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Exact classification of a rational matrix
// ---------------------------------------------------------------------------

/// The exact factorization g = z·ι(b₀)·n(y)·w·u produced by [`classify`]:
/// z is a nonzero scalar, b₀ an invertible upper-triangular matrix of order
/// n−1 embedded in the upper-left corner, n(y) the unipotent element with
/// last column y, w the permutation matrix, and u upper-unipotent. The pair
/// (y, w) with y compatible with w is a complete invariant of the double
/// coset of g.
#[derive(Debug, Clone)]
pub struct ClassifiedCoset {
    pub z: Rational,
    pub b0: ExactMatrix,
    pub coset: WeylDoubleCoset,
    pub u: ExactMatrix,
}

/// The unipotent matrix of order one more than the length of y, with y as
/// the upper part of its last column.
pub fn unipotent_with_last_column(y: &[Rational]) -> ExactMatrix {
    let n = y.len() + 1;
    ExactMatrix::from_fn(n, |i, j| {
        if i == j {
            Rational::one()
        } else if j == n - 1 && i < n - 1 {
            y[i].clone()
        } else {
            Rational::zero()
        }
    })
}

impl ClassifiedCoset {
    /// Reassembles z·ι(b₀)·n(y)·w·u exactly.
    pub fn reconstruct(&self) -> ExactMatrix {
        let w = self.coset.w();
        self.b0
            .embed_corner()
            .mul(&unipotent_with_last_column(self.coset.y()))
            .mul(&w.matrix())
            .mul(&self.u)
            .scale(&self.z)
    }
}

/// Splits an upper-unipotent matrix as x·y where x may be supported only on
/// the 1-based position pairs selected by `left` and y on the complementary
/// pairs; the factorization is computed by the unique recurrence over
/// increasing distance j−i and is exact.
pub fn unipotent_split(
    u: &ExactMatrix,
    mut left: impl FnMut(usize, usize) -> bool,
) -> (ExactMatrix, ExactMatrix) {
    let n = u.size();
    let mut x = ExactMatrix::identity(n);
    let mut yy = ExactMatrix::identity(n);
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut s = u.at(i, j).clone();
            for k in i + 1..j {
                s -= x.at(i, k) * yy.at(k, j);
            }
            if left(i + 1, j + 1) {
                x.set(i, j, s);
            } else {
                yy.set(i, j, s);
            }
        }
    }
    (x, yy)
}

/// Classifies an invertible rational matrix into its double coset: returns
/// the canonical representative data (y, w) together with exact witnesses
/// (z, b₀, u) such that g = z·ι(b₀)·n(y)·w·u. The permutation is found by
/// bottom-pivot elimination, the unipotent part is split along the position
/// pairs inverted by w, and the final correction moves y into the canonical
/// cone of w.
pub fn classify(g: &ExactMatrix) -> Result<ClassifiedCoset, WeylError> {
    let n = g.size();
    if n < 2 {
        return Err(WeylError::Dimension("order must be at least 2"));
    }
    if g.det().is_zero() {
        return Err(WeylError::Singular);
    }

    // Monomialization: for each column pick the bottom-most nonzero entry in
    // a fresh row, clear the column above it (row operations by upper
    // unipotents) and the pivot row to the right (column operations by upper
    // unipotents), keeping g = a·m·b exact throughout.
    let mut m = g.clone();
    let mut a = ExactMatrix::identity(n);
    let mut b = ExactMatrix::identity(n);
    let mut used = vec![false; n];
    let mut images = vec![0usize; n];
    for j in 0..n {
        let piv = (0..n)
            .rev()
            .find(|&i| !used[i] && !m.at(i, j).is_zero())
            .expect("every column of a regular matrix meets a fresh row");
        used[piv] = true;
        images[j] = piv + 1;
        let pval = m.at(piv, j).clone();
        for i in 0..piv {
            if m.at(i, j).is_zero() {
                continue;
            }
            let lam = m.at(i, j) / &pval;
            for c in 0..n {
                let v = m.at(i, c) - &lam * m.at(piv, c);
                m.set(i, c, v);
            }
            for r in 0..n {
                let v = a.at(r, piv) + &lam * a.at(r, i);
                a.set(r, piv, v);
            }
        }
        for c in j + 1..n {
            if m.at(piv, c).is_zero() {
                continue;
            }
            let lam = m.at(piv, c) / &pval;
            for r in 0..n {
                let v = m.at(r, c) - &lam * m.at(r, j);
                m.set(r, c, v);
            }
            for cc in 0..n {
                let v = b.at(j, cc) + &lam * b.at(c, cc);
                b.set(j, cc, v);
            }
        }
    }
    let w = Permutation::from_images(images).expect("pivot rows are distinct");
    let winv = w.inverse();

    // m is now diag(t)·P_w; collect the torus by row.
    let mut t = vec![Rational::zero(); n];
    for j in 1..=n {
        t[w.apply(j) - 1] = m.at(w.apply(j) - 1, j - 1).clone();
    }

    // g = a·diag(t)·P_w·b; pulling the torus out to the left leaves the
    // unipotent diag(t)^{-1}·a·diag(t), which is then split along the pairs
    // inverted by w.
    let u_b = ExactMatrix::from_fn(n, |i, j| a.at(i, j) * &t[j] / &t[i]);
    let (x, y_factor) = unipotent_split(&u_b, |i, j| winv.apply(i) > winv.apply(j));

    // Push the complementary factor through the permutation.
    let pw = w.matrix();
    let conj = pw.transpose().mul(&y_factor).mul(&pw);
    debug_assert!(conj.is_upper_unipotent());
    let mut u = conj.mul(&b);

    // Split x = ι(v)·n(y₀).
    let v = ExactMatrix::from_fn(n - 1, |i, j| x.at(i, j).clone());
    let c: Vec<Rational> = (0..n - 1).map(|i| x.at(i, n - 1).clone()).collect();
    let v_inv = v.inverse().expect("unipotent");
    let mut y0 = v_inv.mul_vec(&c);

    // Peel off the scalar and fold the torus into the triangular witness.
    let z = t[n - 1].clone();
    let mut b0 = ExactMatrix::from_fn(n - 1, |i, j| (&t[i] / &z) * v.at(i, j));

    // Correction: zero out the support entries that violate the decreasing
    // condition, using for each such row the smallest support element ahead
    // of it in position order.
    let spy: Vec<usize> = support(&y0).into_iter().collect();
    let mut bcorr = ExactMatrix::identity(n - 1);
    let mut nontrivial = false;
    for &i in &spy {
        let partner = spy
            .iter()
            .copied()
            .find(|&j| j > i && winv.apply(i) < winv.apply(j));
        if let Some(j) = partner {
            bcorr.set(i - 1, j - 1, -(&y0[i - 1] / &y0[j - 1]));
            nontrivial = true;
        }
    }
    if nontrivial {
        y0 = bcorr.mul_vec(&y0);
        b0 = b0.mul(&bcorr.inverse().expect("unipotent"));
        let conj2 = pw.transpose().mul(&bcorr.embed_corner()).mul(&pw);
        debug_assert!(conj2.is_upper_unipotent());
        u = conj2.mul(&u);
    }
    debug_assert!(in_y(&w, &y0));

    let coset = WeylDoubleCoset::from_yw(y0, w)?;
    let out = ClassifiedCoset { z, b0, coset, u };
    debug_assert_eq!(out.reconstruct(), *g);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Orbit product law
// ---------------------------------------------------------------------------

/// An element of the coordinate group for the stabilizer quotient: a block
/// matrix [[u, x],[ᵗx′, 1]] recorded by its pieces. The product law composes
/// as matrices whenever ᵗx′·x pairings across factors vanish, which holds
/// when the x's and x′'s are supported on complementary index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitElement {
    pub u: ExactMatrix,
    pub x: Vec<Rational>,
    pub x_prime: Vec<Rational>,
}

pub fn orbit_identity(n: usize) -> OrbitElement {
    OrbitElement {
        u: ExactMatrix::identity(n - 1),
        x: vec![Rational::zero(); n - 1],
        x_prime: vec![Rational::zero(); n - 1],
    }
}

/// [u₁;x₁,x₁′]·[u₂;x₂,x₂′] = [u₁u₂ + x₁ᵗx₂′; x₁ + u₁x₂; x₂′ + ᵗu₂x₁′].
pub fn orbit_product(a: &OrbitElement, b: &OrbitElement) -> OrbitElement {
    let r = a.u.size();
    let mut u = a.u.mul(&b.u);
    for i in 0..r {
        for j in 0..r {
            let v = u.at(i, j) + &a.x[i] * &b.x_prime[j];
            u.set(i, j, v);
        }
    }
    let ux = a.u.mul_vec(&b.x);
    let x: Vec<Rational> = a.x.iter().zip(ux).map(|(p, q)| p + q).collect();
    let utxp = b.u.transpose().mul_vec(&a.x_prime);
    let x_prime: Vec<Rational> = b.x_prime.iter().zip(utxp).map(|(p, q)| p + q).collect();
    OrbitElement { u, x, x_prime }
}

/// The inverse solved from the product law: u₂ = (u₁ − x₁ᵗx₁′)^{-1},
/// x₂ = −u₁^{-1}x₁, x₂′ = −ᵗu₂x₁′.
pub fn orbit_inverse(a: &OrbitElement) -> Result<OrbitElement, WeylError> {
    let r = a.u.size();
    let mut core = a.u.clone();
    for i in 0..r {
        for j in 0..r {
            let v = core.at(i, j) - &a.x[i] * &a.x_prime[j];
            core.set(i, j, v);
        }
    }
    let u = core.inverse().ok_or(WeylError::Singular)?;
    let u1_inv = a.u.inverse().ok_or(WeylError::Singular)?;
    let x: Vec<Rational> = u1_inv.mul_vec(&a.x).into_iter().map(|v| -v).collect();
    let x_prime: Vec<Rational> = u
        .transpose()
        .mul_vec(&a.x_prime)
        .into_iter()
        .map(|v| -v)
        .collect();
    Ok(OrbitElement { u, x, x_prime })
}

/// Realizes the element as an n×n matrix conjugated into position by w:
/// w^{-1}·[[u, x],[ᵗx′, 1]]·w.
pub fn orbit_realize(w: &Permutation, elt: &OrbitElement) -> ExactMatrix {
    let n = w.n();
    assert_eq!(elt.u.size(), n - 1, "order mismatch");
    let g = ExactMatrix::from_fn(n, |i, j| {
        if i < n - 1 && j < n - 1 {
            elt.u.at(i, j).clone()
        } else if j == n - 1 && i < n - 1 {
            elt.x[i].clone()
        } else if i == n - 1 && j < n - 1 {
            elt.x_prime[j].clone()
        } else {
            Rational::one()
        }
    });
    let pw = w.matrix();
    pw.transpose().mul(&g).mul(&pw)
}

// ---------------------------------------------------------------------------
// Coordinates on the stabilizer quotient
// ---------------------------------------------------------------------------

/// Coordinates for the representatives of the stabilizer quotient attached
/// to an admissible datum: position pairs of the abelian factor (one root
/// subgroup per starred sector position), position pairs of the complement
/// factor (the pairs inverted by w₀), and the lengths of the two vector
/// coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetParametrization {
    pub n: usize,
    /// 1-based (row, column) pairs (i−1, j_ν) for i in the ν-th starred set.
    pub v0_positions: Vec<(usize, usize)>,
    /// 1-based pairs (a, b), a < b, with w₀(a) > w₀(b).
    pub complement_positions: Vec<(usize, usize)>,
    pub xi_len: usize,
    pub xi_prime_len: usize,
}

impl CosetParametrization {
    /// Total coordinate dimension of the representative space.
    pub fn dimension(&self) -> usize {
        self.v0_positions.len() + self.complement_positions.len() + self.xi_len + self.xi_prime_len
    }

    /// Builds the group element of the two-factor unipotent part from
    /// coordinate values: the abelian factor times the complement factor.
    pub fn v_element(&self, v0: &[Rational], comp: &[Rational]) -> ExactMatrix {
        assert_eq!(v0.len(), self.v0_positions.len(), "coordinate mismatch");
        assert_eq!(
            comp.len(),
            self.complement_positions.len(),
            "coordinate mismatch"
        );
        let r = self.n - 1;
        let mut z0 = ExactMatrix::identity(r);
        for (&(i, j), val) in self.v0_positions.iter().zip(v0) {
            z0.set(i - 1, j - 1, val.clone());
        }
        let mut z1 = ExactMatrix::identity(r);
        for (&(i, j), val) in self.complement_positions.iter().zip(comp) {
            z1.set(i - 1, j - 1, val.clone());
        }
        z0.mul(&z1)
    }
}

/// Computes the coordinates of the stabilizer quotient for a contributing
/// datum (nonzero coefficient: y in the cone of Q and w admissible); the
/// representative family is a cross-section of the quotient only for such
/// data, so anything else is rejected.
pub fn coset_parametrization(coset: &WeylDoubleCoset) -> Result<CosetParametrization, WeylError> {
    if a_gamma(coset) != 1 {
        return Err(WeylError::NotAdmissible);
    }
    let n = coset.n();
    let m = coset.m();
    let w0 = coset.w0();
    let sectors = coset.sectors();
    let stars = coset.j_star();

    let mut v0_positions = Vec::new();
    for (&(_, hi), star) in sectors.iter().zip(&stars) {
        for &i in star {
            v0_positions.push((i - 1, hi));
        }
    }
    let complement_positions: Vec<(usize, usize)> = (1..n - 1)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| b <= n - 1 && w0.apply(a) > w0.apply(b))
        .collect();

    Ok(CosetParametrization {
        n,
        v0_positions,
        complement_positions,
        xi_len: m - 1,
        xi_prime_len: n - m,
    })
}

/// Assembles the full representative for coordinates (Z-part, ξ, ξ′): the
/// unipotent factor is conjugated by w₀, ξ spreads over Q, ξ′ over its
/// complement, and the block matrix is conjugated into position by w.
pub fn coset_representative(
    coset: &WeylDoubleCoset,
    z_mat: &ExactMatrix,
    xi: &[Rational],
    xi_prime: &[Rational],
) -> Result<ExactMatrix, WeylError> {
    let n = coset.n();
    let m = coset.m();
    if z_mat.size() != n - 1 || xi.len() != m - 1 || xi_prime.len() != n - m {
        return Err(WeylError::Dimension(
            "expected Z of order n-1, xi of length m-1, xi' of length n-m",
        ));
    }
    let w0 = coset.w0();
    let p0 = w0.matrix();
    let u = p0.mul(z_mat).mul(&p0.transpose());
    let mut x = vec![Rational::zero(); n - 1];
    for (a, val) in xi.iter().enumerate() {
        x[w0.apply(a + 1) - 1] = val.clone();
    }
    let mut x_prime = vec![Rational::zero(); n - 1];
    for (jloc, val) in xi_prime.iter().enumerate() {
        x_prime[w0.apply(m + jloc) - 1] = val.clone();
    }
    Ok(orbit_realize(coset.w(), &OrbitElement { u, x, x_prime }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rat;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rational(rng: &mut ChaCha8Rng, height: i64) -> Rational {
        let num = rng.gen_range(-height..=height);
        let den = rng.gen_range(1..=height);
        rat(num, den)
    }

    fn random_nonzero(rng: &mut ChaCha8Rng, height: i64) -> Rational {
        loop {
            let v = random_rational(rng, height);
            if !v.is_zero() {
                return v;
            }
        }
    }

    fn random_regular(rng: &mut ChaCha8Rng, n: usize, height: i64) -> ExactMatrix {
        loop {
            let m = ExactMatrix::from_fn(n, |_, _| random_rational(rng, height));
            if !m.det().is_zero() {
                return m;
            }
        }
    }

    fn random_upper_unipotent(rng: &mut ChaCha8Rng, n: usize) -> ExactMatrix {
        ExactMatrix::from_fn(n, |i, j| {
            if i == j {
                Rational::one()
            } else if i < j {
                random_rational(rng, 6)
            } else {
                Rational::zero()
            }
        })
    }

    fn random_upper_triangular(rng: &mut ChaCha8Rng, n: usize) -> ExactMatrix {
        ExactMatrix::from_fn(n, |i, j| {
            if i == j {
                random_nonzero(rng, 6)
            } else if i < j {
                random_rational(rng, 6)
            } else {
                Rational::zero()
            }
        })
    }

    /// All subsets of {1,…,k} as sorted sets.
    fn subsets(k: usize) -> Vec<BTreeSet<usize>> {
        (0..1usize << k)
            .map(|mask| (1..=k).filter(|i| mask >> (i - 1) & 1 == 1).collect())
            .collect()
    }

    /// 0/1 vectors of length k with support in the given set.
    fn patterns_in(k: usize, allowed: &BTreeSet<usize>) -> Vec<Vec<Rational>> {
        let allowed: Vec<usize> = allowed.iter().copied().collect();
        (0..1usize << allowed.len())
            .map(|mask| {
                let mut y = vec![Rational::zero(); k];
                for (b, &i) in allowed.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        y[i - 1] = Rational::one();
                    }
                }
                y
            })
            .collect()
    }

    /// Reference enumeration: filter the full symmetric group.
    fn enumerate_brute(n: usize, q: &BTreeSet<usize>, y: &[Rational]) -> Vec<Permutation> {
        let mut out: Vec<Permutation> = Permutation::all(n)
            .into_iter()
            .filter(|w| {
                WeylDoubleCoset::new(q.clone(), y.to_vec(), w.clone())
                    .map(|c| c.is_admissible())
                    .unwrap_or(false)
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn permutation_matrix_convention() {
        let w = Permutation::from_images(vec![2, 3, 1]).unwrap();
        let pm = w.matrix();
        // Column j has its 1 in row w(j).
        for j in 1..=3 {
            for i in 1..=3 {
                let want = if i == w.apply(j) { 1 } else { 0 };
                assert_eq!(pm.at(i - 1, j - 1), &rat(want, 1));
            }
        }
        let sigma = Permutation::from_images(vec![3, 1, 2]).unwrap();
        assert_eq!(
            w.compose(&sigma).matrix(),
            w.matrix().mul(&sigma.matrix()),
            "matrices compose like maps"
        );
        assert_eq!(
            w.compose(&w.inverse()),
            Permutation::identity(3),
            "inverse composes to the identity"
        );
        assert!(Permutation::from_images(vec![1, 1, 3]).is_err());
        assert_eq!(Permutation::longest(4).images(), &[4, 3, 2, 1]);
        assert_eq!(Permutation::longest_sub(4).images(), &[3, 2, 1, 4]);
    }

    #[test]
    fn enumerate_matches_brute_force_up_to_n5() {
        for n in 2..=5 {
            for q in subsets(n - 1) {
                let complement: BTreeSet<usize> = (1..n).filter(|i| !q.contains(i)).collect();
                for y in patterns_in(n - 1, &complement) {
                    let fast = enumerate_snqy(n, &q, &y).unwrap();
                    let brute = enumerate_brute(n, &q, &y);
                    assert_eq!(fast, brute, "n={n} q={q:?}");
                }
            }
        }
    }

    #[test]
    fn enumerate_rejects_bad_support() {
        let q: BTreeSet<usize> = [1].into_iter().collect();
        let y = vec![Rational::one(), Rational::zero()];
        assert_eq!(
            enumerate_snqy(3, &q, &y),
            Err(WeylError::SupportNotInComplement)
        );
    }

    #[test]
    fn zero_vector_gives_exactly_one_permutation() {
        for n in 2..=5 {
            for q in subsets(n - 1) {
                let y = vec![Rational::zero(); n - 1];
                let ws = enumerate_snqy(n, &q, &y).unwrap();
                assert_eq!(ws.len(), 1, "n={n} q={q:?}");
                // The singleton is decreasing on both blocks.
                let w = &ws[0];
                let m = q.len() + 1;
                for j in 1..m.saturating_sub(1) {
                    assert!(w.apply(j) > w.apply(j + 1));
                }
                for j in m + 1..n {
                    assert!(w.apply(j) > w.apply(j + 1));
                }
            }
        }
    }

    #[test]
    fn enumerate_example_n3() {
        let q: BTreeSet<usize> = [2].into_iter().collect();
        let y = vec![Rational::zero(), Rational::zero()];
        let ws = enumerate_snqy(3, &q, &y).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].images(), &[2, 3, 1]);
    }

    #[test]
    fn sector_positions_contain_their_ascent() {
        // j_ν always lies in the ν-th starred set for admissible data.
        for n in 3..=5 {
            for q in subsets(n - 1) {
                let complement: BTreeSet<usize> = (1..n).filter(|i| !q.contains(i)).collect();
                for y in patterns_in(n - 1, &complement) {
                    for w in enumerate_snqy(n, &q, &y).unwrap() {
                        let coset =
                            WeylDoubleCoset::new(q.clone(), y.clone(), w.clone()).unwrap();
                        let ascents = coset.ascents();
                        let stars = coset.j_star();
                        assert_eq!(ascents.len(), stars.len());
                        for (j, star) in ascents.iter().zip(&stars) {
                            assert!(star.contains(j), "n={n} q={q:?} w={:?}", w.images());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn summation_constraints_collapse_to_starred_positions() {
        // For admissible data each summation constraint touches exactly the
        // single coordinate predicted by the sector combinatorics.
        for n in 3..=5 {
            for q in subsets(n - 1) {
                let complement: BTreeSet<usize> = (1..n).filter(|i| !q.contains(i)).collect();
                for y in patterns_in(n - 1, &complement) {
                    for w in enumerate_snqy(n, &q, &y).unwrap() {
                        let coset =
                            WeylDoubleCoset::new(q.clone(), y.clone(), w.clone()).unwrap();
                        let st = stabilizer(&coset);
                        let winv = w.inverse();
                        let ascents = coset.ascents();
                        let sectors = coset.sectors();
                        let stars = coset.j_star();
                        for (i, row) in &st.sum_constraints {
                            let pos = winv.apply(*i);
                            let nz: Vec<(usize, usize)> = st
                                .coordinates
                                .iter()
                                .zip(row)
                                .filter(|(_, v)| !v.is_zero())
                                .map(|(&p, _)| p)
                                .collect();
                            let sector = sectors.iter().position(|&(lo, hi)| lo <= pos && pos <= hi);
                            match sector {
                                Some(nu) if stars[nu].contains(&pos) => {
                                    let jnu = ascents[nu];
                                    assert_eq!(nz, vec![(*i, w.apply(jnu + 1))]);
                                }
                                _ => assert!(nz.is_empty(), "position {pos} should give no constraint"),
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn stabilizer_dimension_examples() {
        // Fully inverted tail: everything vanishes.
        for n in 3..=5 {
            let w = Permutation::longest_sub(n);
            let y = vec![Rational::zero(); n - 1];
            let coset = WeylDoubleCoset::from_yw(y, w).unwrap();
            assert_eq!(stabilizer(&coset).dimension, 0);
        }
        // Identity: nothing vanishes.
        for n in 3..=5 {
            let w = Permutation::identity(n);
            let y = vec![Rational::zero(); n - 1];
            let coset = WeylDoubleCoset::from_yw(y, w).unwrap();
            assert_eq!(stabilizer(&coset).dimension, (n - 1) * (n - 2) / 2);
        }
    }

    #[test]
    fn dimension_identity_for_admissible_data() {
        // Stabilizer and coordinate space dimensions fill the unipotent
        // group: dim U_[γ] + dim V + (n−1) = n(n−1)/2.
        for n in 3..=4 {
            for q in subsets(n - 1) {
                let complement: BTreeSet<usize> = (1..n).filter(|i| !q.contains(i)).collect();
                for y in patterns_in(n - 1, &complement) {
                    for w in enumerate_snqy(n, &q, &y).unwrap() {
                        let coset =
                            WeylDoubleCoset::new(q.clone(), y.clone(), w.clone()).unwrap();
                        let st = stabilizer(&coset);
                        let dim_v: usize = coset.j_star().iter().map(Vec::len).sum::<usize>()
                            + coset.w0().inversions();
                        assert_eq!(
                            st.dimension + dim_v + (n - 1),
                            n * (n - 1) / 2,
                            "n={n} q={q:?} w={:?}",
                            w.images()
                        );
                        // For contributing data the coordinate description
                        // carries the same dimensions.
                        if a_gamma(&coset) == 1 {
                            let par = coset_parametrization(&coset).unwrap();
                            let v_positions =
                                par.v0_positions.len() + par.complement_positions.len();
                            assert_eq!(v_positions, dim_v);
                            assert_eq!(
                                par.complement_positions.len(),
                                coset.w0().inversions()
                            );
                            assert_eq!(par.xi_len + par.xi_prime_len, n - 1);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn coefficient_matches_character_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for n in 2..=4 {
            for w in Permutation::all(n) {
                let i_w0: BTreeSet<usize> = {
                    let winv = w.inverse();
                    let m = winv.apply(n);
                    (1..n).filter(|&i| winv.apply(i) > m).collect()
                };
                for pattern in patterns_in(n - 1, &i_w0) {
                    if !in_y(&w, &pattern) {
                        continue;
                    }
                    // A 0/1 version and a random-value version on the same
                    // support must agree everywhere.
                    let mut randomized = pattern.clone();
                    for v in randomized.iter_mut() {
                        if !v.is_zero() {
                            *v = random_nonzero(&mut rng, 9);
                        }
                    }
                    for y in [pattern, randomized] {
                        let oracle = {
                            let coset = WeylDoubleCoset::from_yw(y.clone(), w.clone()).unwrap();
                            u8::from(character_triviality_oracle(&coset))
                        };
                        let mut total = 0u8;
                        for q in subsets(n - 1) {
                            let coset =
                                WeylDoubleCoset::new(q, y.clone(), w.clone()).unwrap();
                            total += a_gamma(&coset);
                        }
                        assert!(total <= 1, "coefficient supported by at most one Q");
                        assert_eq!(total, oracle, "w={:?} y={y:?}", w.images());
                    }
                }
            }
        }
    }

    #[test]
    fn coefficient_of_the_singular_datum_is_one() {
        for n in 3..=5 {
            let q: BTreeSet<usize> = (1..n).collect();
            let y = vec![Rational::zero(); n - 1];
            let w = Permutation::longest_sub(n);
            let coset = WeylDoubleCoset::new(q, y, w).unwrap();
            assert_eq!(a_gamma(&coset), 1);
        }
    }

    #[test]
    fn classify_fixed_points() {
        let id = ExactMatrix::identity(3);
        let res = classify(&id).unwrap();
        assert_eq!(res.coset.w(), &Permutation::identity(3));
        assert!(res.coset.support().is_empty());
        assert_eq!(res.z, Rational::one());

        let wl = Permutation::longest(3).matrix();
        let res = classify(&wl).unwrap();
        assert_eq!(res.coset.w(), &Permutation::longest(3));
        assert!(res.coset.support().is_empty());
        assert_eq!(res.reconstruct(), wl);
    }

    #[test]
    fn classify_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        for _ in 0..300 {
            let g = random_regular(&mut rng, 3, 10);
            let res = classify(&g).unwrap();
            assert_eq!(res.reconstruct(), g);
            assert!(in_y(res.coset.w(), res.coset.y()));
            assert!(res.u.is_upper_unipotent());
        }
        for _ in 0..60 {
            let g = random_regular(&mut rng, 4, 10);
            let res = classify(&g).unwrap();
            assert_eq!(res.reconstruct(), g);
            assert!(in_y(res.coset.w(), res.coset.y()));
        }
    }

    #[test]
    fn classify_is_constant_on_double_cosets() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for n in [3usize, 4] {
            for _ in 0..40 {
                let g = random_regular(&mut rng, n, 8);
                let base = classify(&g).unwrap();
                let z = random_nonzero(&mut rng, 5);
                let b = random_upper_triangular(&mut rng, n - 1);
                let u = random_upper_unipotent(&mut rng, n);
                let moved = b.embed_corner().mul(&g).mul(&u).scale(&z);
                let other = classify(&moved).unwrap();
                assert_eq!(other.coset.w(), base.coset.w());
                assert_eq!(other.coset.y(), base.coset.y());
            }
        }
    }

    #[test]
    fn classify_covers_degenerate_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let mut seen = BTreeSet::new();
        for _ in 0..120 {
            // Random products of permutation matrices, elementary additions,
            // and diagonal scalings land in thin cells on purpose.
            let n = 3;
            let mut g = ExactMatrix::identity(n);
            for _ in 0..rng.gen_range(2..6) {
                match rng.gen_range(0..3u8) {
                    0 => {
                        let ws = Permutation::all(n);
                        let w = &ws[rng.gen_range(0..ws.len())];
                        g = g.mul(&w.matrix());
                    }
                    1 => {
                        let i = rng.gen_range(0..n);
                        let j = rng.gen_range(0..n);
                        if i != j {
                            let mut e = ExactMatrix::identity(n);
                            e.set(i, j, random_rational(&mut rng, 4));
                            g = g.mul(&e);
                        }
                    }
                    _ => {
                        let d = ExactMatrix::from_fn(n, |i, j| {
                            if i == j {
                                random_nonzero(&mut rng, 4)
                            } else {
                                Rational::zero()
                            }
                        });
                        g = g.mul(&d);
                    }
                }
            }
            let res = classify(&g).unwrap();
            assert_eq!(res.reconstruct(), g);
            seen.insert(res.coset.w().clone());
        }
        assert!(seen.len() >= 3, "the corpus should touch several cells");
    }

    #[test]
    fn unipotent_split_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        for n in [3usize, 4, 5] {
            for w in Permutation::all(n).iter().step_by(3) {
                let winv = w.inverse();
                let u = random_upper_unipotent(&mut rng, n);
                let (x, y) = unipotent_split(&u, |i, j| winv.apply(i) > winv.apply(j));
                assert_eq!(x.mul(&y), u);
                for i in 1..=n {
                    for j in i + 1..=n {
                        if winv.apply(i) > winv.apply(j) {
                            assert!(y.at(i - 1, j - 1).is_zero());
                        } else {
                            assert!(x.at(i - 1, j - 1).is_zero());
                        }
                    }
                }
            }
        }
    }

    /// A fixed admissible datum with nonzero support and a nontrivial
    /// abelian factor, used by the orbit-law tests: n = 4, Q = ∅, y = e₃
    /// (an ascent can only jump up to a support element, so the support
    /// must contain a value above 1).
    fn sample_coset() -> WeylDoubleCoset {
        let q = BTreeSet::new();
        let y = vec![Rational::zero(), Rational::zero(), Rational::one()];
        let ws = enumerate_snqy(4, &q, &y).unwrap();
        let w = ws
            .iter()
            .find(|w| {
                let c = WeylDoubleCoset::new(q.clone(), y.clone(), (*w).clone()).unwrap();
                !c.ascents().is_empty()
            })
            .expect("some admissible datum has an ascent")
            .clone();
        WeylDoubleCoset::new(q, y, w).unwrap()
    }

    fn random_orbit_element(
        rng: &mut ChaCha8Rng,
        coset: &WeylDoubleCoset,
        par: &CosetParametrization,
    ) -> OrbitElement {
        let n = coset.n();
        let m = coset.m();
        let w0 = coset.w0();
        let v0: Vec<Rational> = (0..par.v0_positions.len())
            .map(|_| random_rational(rng, 5))
            .collect();
        let comp: Vec<Rational> = (0..par.complement_positions.len())
            .map(|_| random_rational(rng, 5))
            .collect();
        let z = par.v_element(&v0, &comp);
        let p0 = w0.matrix();
        let u = p0.mul(&z).mul(&p0.transpose());
        let mut x = vec![Rational::zero(); n - 1];
        for a in 1..m {
            x[w0.apply(a) - 1] = random_rational(rng, 5);
        }
        let mut x_prime = vec![Rational::zero(); n - 1];
        for j in m..n {
            x_prime[w0.apply(j) - 1] = random_rational(rng, 5);
        }
        OrbitElement { u, x, x_prime }
    }

    #[test]
    fn orbit_law_is_a_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(106);
        let coset = sample_coset();
        let par = coset_parametrization(&coset).unwrap();
        let n = coset.n();
        let e = orbit_identity(n);
        for _ in 0..100 {
            let a = random_orbit_element(&mut rng, &coset, &par);
            let b = random_orbit_element(&mut rng, &coset, &par);
            let c = random_orbit_element(&mut rng, &coset, &par);
            // Identity and inverse.
            assert_eq!(orbit_product(&a, &e), a);
            assert_eq!(orbit_product(&e, &a), a);
            let ainv = orbit_inverse(&a).unwrap();
            assert_eq!(orbit_product(&a, &ainv), e);
            assert_eq!(orbit_product(&ainv, &a), e);
            // Associativity.
            let ab_c = orbit_product(&orbit_product(&a, &b), &c);
            let a_bc = orbit_product(&a, &orbit_product(&b, &c));
            assert_eq!(ab_c, a_bc);
            // The law matches matrix multiplication of the realizations.
            let w = coset.w();
            let lhs = orbit_realize(w, &a).mul(&orbit_realize(w, &b));
            let rhs = orbit_realize(w, &orbit_product(&a, &b));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn abelian_factor_positions_commute() {
        for n in 3..=5 {
            for q in subsets(n - 1) {
                let complement: BTreeSet<usize> = (1..n).filter(|i| !q.contains(i)).collect();
                for y in patterns_in(n - 1, &complement) {
                    for w in enumerate_snqy(n, &q, &y).unwrap() {
                        let coset =
                            WeylDoubleCoset::new(q.clone(), y.clone(), w.clone()).unwrap();
                        if a_gamma(&coset) != 1 {
                            continue;
                        }
                        let par = coset_parametrization(&coset).unwrap();
                        // y = 0 forces a trivial abelian factor.
                        if coset.support().is_empty() {
                            assert!(par.v0_positions.is_empty());
                        }
                        let r = n - 1;
                        for (k, &(i1, j1)) in par.v0_positions.iter().enumerate() {
                            for &(i2, j2) in par.v0_positions.iter().skip(k + 1) {
                                let mut e1 = ExactMatrix::identity(r);
                                e1.set(i1 - 1, j1 - 1, Rational::one());
                                let mut e2 = ExactMatrix::identity(r);
                                e2.set(i2 - 1, j2 - 1, Rational::one());
                                assert_eq!(e1.mul(&e2), e2.mul(&e1));
                            }
                        }
                    }
                }
            }
        }
    }

    /// Entry parity of an integer matrix.
    fn mod2(m: &ExactMatrix) -> Vec<u8> {
        let n = m.size();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = m.at(i, j);
                assert!(v.denom().to_i64() == Some(1), "entry must be an integer");
                out.push((v.numer().to_i64().unwrap().rem_euclid(2)) as u8);
            }
        }
        out
    }

    #[test]
    fn representatives_partition_the_mod2_points() {
        // Over the two-element field, the stabilizer times the
        // representative set covers the unipotent group exactly once. The
        // cross-section property is claimed for contributing data only.
        let mut checked = 0usize;
        for n in [3usize, 4] {
            for q in subsets(n - 1) {
                let complement: BTreeSet<usize> = (1..n).filter(|i| !q.contains(i)).collect();
                for y in patterns_in(n - 1, &complement) {
                    for w in enumerate_snqy(n, &q, &y).unwrap() {
                        let coset =
                            WeylDoubleCoset::new(q.clone(), y.clone(), w.clone()).unwrap();
                        if a_gamma(&coset) != 1 {
                            continue;
                        }
                        check_mod2_partition(&coset);
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 10, "the sweep must cover many data, got {checked}");
    }

    fn check_mod2_partition(coset: &WeylDoubleCoset) {
        let n = coset.n();
        let m = coset.m();
        let w = coset.w();
        let y = coset.y();
        let st = stabilizer(coset);
        let par = coset_parametrization(coset).unwrap();

        // Stabilizer elements over the two-element field: 0/1 coordinate
        // assignments satisfying the constraints, embedded and conjugated.
        let k = st.coordinates.len();
        let mut stab_elements = Vec::new();
        'outer: for mask in 0..1usize << k {
            let coords: Vec<u8> = (0..k).map(|c| (mask >> c & 1) as u8).collect();
            for &(i, j) in &st.vanishing {
                if coords[st.coordinate_index(i, j).unwrap()] == 1 {
                    continue 'outer;
                }
            }
            for (_, row) in &st.sum_constraints {
                let mut acc = 0u8;
                for (c, coeff) in row.iter().enumerate() {
                    if !coeff.is_zero() && coords[c] == 1 {
                        acc ^= (coeff.numer().to_i64().unwrap().rem_euclid(2)) as u8;
                    }
                }
                if acc != 0 {
                    continue 'outer;
                }
            }
            // Embed: [[u, uy − y],[0, 1]] conjugated by w.
            let mut u0 = ExactMatrix::identity(n - 1);
            for (c, &(i, j)) in st.coordinates.iter().enumerate() {
                if coords[c] == 1 {
                    u0.set(i - 1, j - 1, Rational::one());
                }
            }
            let uy = u0.mul_vec(y);
            let big = ExactMatrix::from_fn(n, |i, j| {
                if i < n - 1 && j < n - 1 {
                    u0.at(i, j).clone()
                } else if j == n - 1 && i < n - 1 {
                    &uy[i] - &y[i]
                } else if i == j {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            });
            let pw = w.matrix();
            let conj = pw.transpose().mul(&big).mul(&pw);
            assert!(conj.is_upper_unipotent(), "stabilizer embeds in U");
            stab_elements.push(conj);
        }

        // Representatives over the two-element field.
        let dim = par.dimension();
        let mut reps = Vec::new();
        for mask in 0..1usize << dim {
            let bit = |b: usize| -> Rational {
                if mask >> b & 1 == 1 {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            };
            let mut off = 0;
            let v0: Vec<Rational> = (0..par.v0_positions.len()).map(|b| bit(off + b)).collect();
            off += par.v0_positions.len();
            let comp: Vec<Rational> = (0..par.complement_positions.len())
                .map(|b| bit(off + b))
                .collect();
            off += par.complement_positions.len();
            let xi: Vec<Rational> = (0..m - 1).map(|b| bit(off + b)).collect();
            off += m - 1;
            let xi_prime: Vec<Rational> = (0..n - m).map(|b| bit(off + b)).collect();
            let z = par.v_element(&v0, &comp);
            let rep = coset_representative(coset, &z, &xi, &xi_prime).unwrap();
            assert!(rep.is_upper_unipotent(), "representatives lie in U");
            reps.push(rep);
        }

        // Each unipotent 0/1 point is hit exactly once.
        let mut seen = BTreeSet::new();
        for z in &stab_elements {
            for r in &reps {
                let key = mod2(&z.mul(r));
                assert!(seen.insert(key), "coset hit twice: w={:?}", w.images());
            }
        }
        assert_eq!(
            seen.len(),
            1 << (n * (n - 1) / 2),
            "every point covered: w={:?} y={:?}",
            w.images(),
            y
        );
    }
}
