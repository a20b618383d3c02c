//! Truncated Hermite/Fock realization of a single symplectic-spinor fiber.
//!
//! A fiber of the spinor bundle over a `2n`-dimensional base is modelled by
//! `L²(ℝⁿ)`, spanned by products of unit-normalised Hermite functions
//! `h_{α₁}(x₁)…h_{αₙ}(xₙ)`. Truncating at total degree `|α| ≤ L` gives a
//! finite basis on which Clifford multiplication is realized by
//!
//! ```text
//! ê_j·  ↦  i·x_j        f_j·  ↦  ∂_j
//! ```
//!
//! Truncation corrupts the top levels: a product of `k` degree-one factors is
//! only trusted on input levels `≤ L − k`. Every [`FiberOperator`] carries this
//! bound as its `guard_level`, and comparisons and block traces refuse to look
//! past it.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Rank of the level-`l` subspace: `(l+n−1)! / (l!(n−1)!)`.
pub fn level_rank(n: usize, l: usize) -> usize {
    assert!(n >= 1, "need at least one oscillator");
    // C(l+n-1, n-1), accumulated so every intermediate stays integral
    let k = n - 1;
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc * (l as u128 + i) / i;
    }
    acc as usize
}

/// Graded-lexicographic enumeration of multi-indices `α ∈ ℕⁿ`, `|α| ≤ L`.
///
/// Within a level the order is descending lexicographic, so `(l,0,…,0)` is
/// the first vector of level `l` and each level occupies a contiguous block.
#[derive(Debug, Clone)]
pub struct FockBasis {
    n: usize,
    cutoff: usize,
    indices: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
    level_start: Vec<usize>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.cutoff == other.cutoff
    }
}

impl FockBasis {
    pub fn new(n: usize, cutoff: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::InvalidArgument("oscillator count must be positive".into()));
        }
        let mut indices = Vec::new();
        let mut level_start = Vec::with_capacity(cutoff + 2);
        for l in 0..=cutoff {
            level_start.push(indices.len());
            let mut level = Vec::new();
            compositions(n, l, &mut vec![0; n], 0, &mut level);
            indices.extend(level);
        }
        level_start.push(indices.len());
        let lookup = indices.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        Ok(Arc::new(Self {
            n,
            cutoff,
            indices,
            lookup,
            level_start,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn multi_index(&self, i: usize) -> &[usize] {
        &self.indices[i]
    }

    pub fn index_of(&self, alpha: &[usize]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    pub fn level_of(&self, i: usize) -> usize {
        self.indices[i].iter().sum()
    }

    /// Basis positions of level `l` (a contiguous range).
    pub fn level_range(&self, l: usize) -> Result<std::ops::Range<usize>> {
        if l > self.cutoff {
            return Err(Error::LevelAboveCutoff {
                level: l,
                cutoff: self.cutoff,
            });
        }
        Ok(self.level_start[l]..self.level_start[l + 1])
    }

    /// Unit vector `h_α`.
    pub fn basis_vector(&self, alpha: &[usize]) -> Result<CVector> {
        let i = self
            .index_of(alpha)
            .ok_or_else(|| Error::InvalidArgument(format!("multi-index {alpha:?} not in truncated basis")))?;
        let mut v = CVector::zeros(self.dim());
        v[i] = C64::new(1.0, 0.0);
        Ok(v)
    }

    /// Highest level on which a vector has a non-negligible component.
    pub fn max_level(&self, v: &CVector, tol: f64) -> Option<usize> {
        (0..self.dim())
            .filter(|&i| v[i].norm() > tol)
            .map(|i| self.level_of(i))
            .max()
    }
}

// descending-lex compositions of `total` into `n` parts
fn compositions(n: usize, total: usize, cur: &mut Vec<usize>, pos: usize, out: &mut Vec<Vec<usize>>) {
    if pos == n - 1 {
        cur[pos] = total;
        out.push(cur.clone());
        return;
    }
    for first in (0..=total).rev() {
        cur[pos] = first;
        compositions(n, total - first, cur, pos + 1, out);
    }
}

/// Dense matrix acting on a truncated fiber, with its truncation guard.
///
/// `degree` bounds how far the operator can shift the level; `guard_level`
/// is the highest input level on which the matrix agrees with the untruncated
/// operator (`None` when no level is trustworthy).
#[derive(Debug, Clone)]
pub struct FiberOperator {
    basis: Arc<FockBasis>,
    matrix: CMatrix,
    degree: usize,
    guard_level: Option<usize>,
}

impl FiberOperator {
    pub fn from_parts(
        basis: Arc<FockBasis>,
        matrix: CMatrix,
        degree: usize,
        guard_level: Option<usize>,
    ) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix {}x{} on basis of dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            basis,
            matrix,
            degree,
            guard_level,
        })
    }

    pub fn identity(basis: &Arc<FockBasis>) -> Self {
        let d = basis.dim();
        Self {
            basis: basis.clone(),
            matrix: CMatrix::identity(d, d),
            degree: 0,
            guard_level: Some(basis.cutoff()),
        }
    }

    pub fn zero(basis: &Arc<FockBasis>) -> Self {
        let d = basis.dim();
        Self {
            basis: basis.clone(),
            matrix: CMatrix::zeros(d, d),
            degree: 0,
            guard_level: Some(basis.cutoff()),
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn guard_level(&self) -> Option<usize> {
        self.guard_level
    }

    pub fn is_exact_on(&self, level: usize) -> bool {
        self.guard_level.is_some_and(|g| level <= g)
    }

    fn check_same_basis(&self, other: &Self) -> Result<()> {
        if *self.basis != *other.basis {
            return Err(Error::DimensionMismatch(format!(
                "operators on different fibers (n={}, L={}) vs (n={}, L={})",
                self.basis.n(),
                self.basis.cutoff(),
                other.basis.n(),
                other.basis.cutoff()
            )));
        }
        Ok(())
    }

    /// `self ∘ rhs`, with guard `min(g_rhs, g_self − deg_rhs)`.
    pub fn try_compose(&self, rhs: &Self) -> Result<Self> {
        self.check_same_basis(rhs)?;
        let guard = match (self.guard_level, rhs.guard_level) {
            (Some(gs), Some(gr)) => gs.checked_sub(rhs.degree).map(|g| g.min(gr)),
            _ => None,
        };
        Ok(Self {
            basis: self.basis.clone(),
            matrix: &self.matrix * &rhs.matrix,
            degree: self.degree + rhs.degree,
            guard_level: guard,
        })
    }

    fn try_combine(&self, rhs: &Self, sign: f64) -> Result<Self> {
        self.check_same_basis(rhs)?;
        let guard = match (self.guard_level, rhs.guard_level) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        };
        Ok(Self {
            basis: self.basis.clone(),
            matrix: &self.matrix + &rhs.matrix * C64::new(sign, 0.0),
            degree: self.degree.max(rhs.degree),
            guard_level: guard,
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            matrix: &self.matrix * c,
            ..self.clone()
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    /// Restriction to the level-`l` block (rows and columns of level `l`).
    pub fn level_block(&self, l: usize) -> Result<CMatrix> {
        let r = self.basis.level_range(l)?;
        if !self.is_exact_on(l) {
            return Err(Error::InsufficientCutoff {
                cutoff: self.basis.cutoff(),
                required: self.basis.cutoff() + l - self.guard_level.map_or(0, |g| g.min(l)),
            });
        }
        Ok(self
            .matrix
            .view((r.start, r.start), (r.len(), r.len()))
            .into_owned())
    }

    pub fn trace_on_level(&self, l: usize) -> Result<C64> {
        Ok(self.level_block(l)?.trace())
    }

    /// Largest entry of `self − other` over columns on the common guarded
    /// levels, i.e. the operator discrepancy on vectors supported there.
    pub fn guarded_residual(&self, other: &Self) -> Result<f64> {
        self.check_same_basis(other)?;
        let guard = match (self.guard_level, other.guard_level) {
            (Some(a), Some(b)) => a.min(b),
            _ => return Ok(0.0),
        };
        self.residual_up_to(other, guard)
    }

    /// Same as [`guarded_residual`](Self::guarded_residual) with an explicit
    /// level bound.
    pub fn residual_up_to(&self, other: &Self, level: usize) -> Result<f64> {
        self.check_same_basis(other)?;
        let end = self.basis.level_range(level.min(self.basis.cutoff()))?.end;
        let mut worst = 0.0_f64;
        for c in 0..end {
            for r in 0..self.basis.dim() {
                worst = worst.max((self.matrix[(r, c)] - other.matrix[(r, c)]).norm());
            }
        }
        Ok(worst)
    }
}

impl<'a> Mul<&'a FiberOperator> for &'a FiberOperator {
    type Output = FiberOperator;
    fn mul(self, rhs: &FiberOperator) -> FiberOperator {
        self.try_compose(rhs)
            .expect("operator product on mismatched fibers")
    }
}

impl<'a> Add<&'a FiberOperator> for &'a FiberOperator {
    type Output = FiberOperator;
    fn add(self, rhs: &FiberOperator) -> FiberOperator {
        self.try_combine(rhs, 1.0)
            .expect("operator sum on mismatched fibers")
    }
}

impl<'a> Sub<&'a FiberOperator> for &'a FiberOperator {
    type Output = FiberOperator;
    fn sub(self, rhs: &FiberOperator) -> FiberOperator {
        self.try_combine(rhs, -1.0)
            .expect("operator difference on mismatched fibers")
    }
}

impl Neg for &FiberOperator {
    type Output = FiberOperator;
    fn neg(self) -> FiberOperator {
        self.scale(C64::new(-1.0, 0.0))
    }
}

/// Real components `(a_1..a_n, b_1..b_n)` of a tangent vector in the unitary
/// frame `(ê_1..ê_n, f_1..f_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameVector {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FrameVector {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "frame vector halves of length {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite frame component".into()));
        }
        Ok(Self { a, b })
    }

    /// Vector with components in the real frame `e_1..e_{2n}`.
    pub fn from_components(c: &[f64]) -> Result<Self> {
        if !c.len().is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "odd component count {}",
                c.len()
            )));
        }
        let n = c.len() / 2;
        Self::new(c[..n].to_vec(), c[n..].to_vec())
    }

    pub fn e_hat(n: usize, j: usize) -> Self {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        Self { a, b: vec![0.0; n] }
    }

    pub fn f(n: usize, j: usize) -> Self {
        let mut b = vec![0.0; n];
        b[j] = 1.0;
        Self { a: vec![0.0; n], b }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn components(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).copied().collect()
    }

    /// `ω(V, W)` with `ω(ê_i, f_j) = δ_ij`.
    pub fn omega(&self, other: &Self) -> f64 {
        self.a.iter().zip(&other.b).map(|(x, y)| x * y).sum::<f64>()
            - self.b.iter().zip(&other.a).map(|(x, y)| x * y).sum::<f64>()
    }

    /// `g(V, W)`; the unitary frame is orthonormal.
    pub fn dot(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(x, y)| x * y)
            .sum()
    }

    /// `J V` with `Jê_j = f_j`, `Jf_j = −ê_j`.
    pub fn j_rotate(&self) -> Self {
        Self {
            a: self.b.iter().map(|x| -x).collect(),
            b: self.a.clone(),
        }
    }
}

fn check_axis(basis: &FockBasis, j: usize) -> Result<()> {
    if j >= basis.n() {
        return Err(Error::AxisOutOfRange {
            axis: j,
            n: basis.n(),
        });
    }
    Ok(())
}

fn one_step_operator(basis: &Arc<FockBasis>, j: usize, up: f64, down: f64) -> FiberOperator {
    let d = basis.dim();
    let mut m = CMatrix::zeros(d, d);
    for col in 0..d {
        let alpha = basis.multi_index(col);
        let aj = alpha[j] as f64;
        let mut raised = alpha.to_vec();
        raised[j] += 1;
        if let Some(row) = basis.index_of(&raised) {
            m[(row, col)] = C64::new(up * ((aj + 1.0) / 2.0).sqrt(), 0.0);
        }
        if alpha[j] > 0 {
            let mut lowered = alpha.to_vec();
            lowered[j] -= 1;
            let row = basis.index_of(&lowered).expect("lower level is always present");
            m[(row, col)] = C64::new(down * (aj / 2.0).sqrt(), 0.0);
        }
    }
    FiberOperator {
        basis: basis.clone(),
        matrix: m,
        degree: 1,
        guard_level: basis.cutoff().checked_sub(1),
    }
}

/// Multiplication by `x_j` (axis `j`, zero-based).
pub fn build_position(basis: &Arc<FockBasis>, j: usize) -> Result<FiberOperator> {
    check_axis(basis, j)?;
    Ok(one_step_operator(basis, j, 1.0, 1.0))
}

/// `d/dx_j`: `⟨h_{a+1}|∂|h_a⟩ = −√((a+1)/2)`, `⟨h_{a−1}|∂|h_a⟩ = √(a/2)`.
pub fn build_derivative(basis: &Arc<FockBasis>, j: usize) -> Result<FiberOperator> {
    check_axis(basis, j)?;
    Ok(one_step_operator(basis, j, -1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderSign {
    /// `L⁽⁺⁾ = (f − iê)·`, annihilates level 0.
    Plus,
    /// `L⁽⁻⁾ = (f + iê)·`, raises the level by one.
    Minus,
}

/// Clifford multiplication on a truncated fiber, with the frame operators
/// `e_k·` (k = 0..2n) built once.
#[derive(Debug, Clone)]
pub struct FiberAlgebra {
    basis: Arc<FockBasis>,
    frame_ops: Vec<FiberOperator>,
    pair_ops: OnceLock<Vec<FiberOperator>>,
}

impl FiberAlgebra {
    pub fn new(basis: Arc<FockBasis>) -> Self {
        let n = basis.n();
        let mut frame_ops = Vec::with_capacity(2 * n);
        for j in 0..n {
            frame_ops.push(build_position(&basis, j).expect("axis in range").scale(I));
        }
        for j in 0..n {
            frame_ops.push(build_derivative(&basis, j).expect("axis in range"));
        }
        Self {
            basis,
            frame_ops,
            pair_ops: OnceLock::new(),
        }
    }

    pub fn with_cutoff(n: usize, cutoff: usize) -> Result<Self> {
        Ok(Self::new(FockBasis::new(n, cutoff)?))
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    /// `e_k·` for the real frame index `k ∈ 0..2n`.
    pub fn frame_op(&self, k: usize) -> &FiberOperator {
        &self.frame_ops[k]
    }

    /// `(J e_k)·`.
    pub fn j_frame_op(&self, k: usize) -> FiberOperator {
        let n = self.n();
        if k < n {
            self.frame_ops[k + n].clone()
        } else {
            -&self.frame_ops[k - n]
        }
    }

    /// `e_k·(J e_j)·`, stored at `k * 2n + j` and built on first use.
    pub fn pair_op(&self, k: usize, j: usize) -> &FiberOperator {
        let m = 2 * self.n();
        let ops = self.pair_ops.get_or_init(|| {
            (0..m * m)
                .map(|i| &self.frame_ops[i / m] * &self.j_frame_op(i % m))
                .collect()
        });
        &ops[k * m + j]
    }

    /// Clifford multiplication by a vector given in real frame components.
    pub fn clifford_components(&self, c: &[f64]) -> Result<FiberOperator> {
        if c.len() != 2 * self.n() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} on fiber with n={}",
                c.len(),
                self.n()
            )));
        }
        let mut acc = FiberOperator::zero(&self.basis);
        acc.degree = 1;
        acc.guard_level = self.frame_ops[0].guard_level;
        for (k, &ck) in c.iter().enumerate() {
            if ck != 0.0 {
                acc = &acc + &self.frame_ops[k].scale(C64::new(ck, 0.0));
            }
        }
        Ok(acc)
    }

    /// `V· = Σ_j a_j (i x_j) + b_j ∂_j`.
    pub fn clifford_mult(&self, v: &FrameVector) -> Result<FiberOperator> {
        if v.n() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "frame vector with n={} on fiber with n={}",
                v.n(),
                self.n()
            )));
        }
        self.clifford_components(&v.components())
    }

    /// `H^J = ½ Σ_k e_k·e_k·`, equal to `q_l = −(l + n/2)` on level `l`.
    pub fn hamiltonian(&self) -> FiberOperator {
        let mut acc: Option<FiberOperator> = None;
        for op in &self.frame_ops {
            let sq = op * op;
            acc = Some(match acc {
                None => sq,
                Some(a) => &a + &sq,
            });
        }
        acc.expect("at least one frame operator")
            .scale(C64::new(0.5, 0.0))
    }

    pub fn ladder(&self, j: usize, sign: LadderSign) -> Result<FiberOperator> {
        check_axis(&self.basis, j)?;
        let n = self.n();
        let e_hat = &self.frame_ops[j];
        let f = &self.frame_ops[j + n];
        Ok(match sign {
            LadderSign::Plus => f - &e_hat.scale(I),
            LadderSign::Minus => f + &e_hat.scale(I),
        })
    }

    pub fn level_projector(&self, l: usize) -> Result<FiberOperator> {
        level_projector(&self.basis, l)
    }
}

/// Orthogonal projector onto `span{h_α : |α| = l}`.
pub fn level_projector(basis: &Arc<FockBasis>, l: usize) -> Result<FiberOperator> {
    let r = basis.level_range(l)?;
    let d = basis.dim();
    let mut m = CMatrix::zeros(d, d);
    for i in r {
        m[(i, i)] = C64::new(1.0, 0.0);
    }
    Ok(FiberOperator {
        basis: basis.clone(),
        matrix: m,
        degree: 0,
        guard_level: Some(basis.cutoff()),
    })
}

/// `q_l = −(l + n/2)`.
pub fn level_charge(n: usize, l: usize) -> f64 {
    -(l as f64 + n as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    const EXACT: f64 = 1e-12;

    // Gauss–Hermite rule (weight e^{-x²}) by Golub–Welsch.
    fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for k in 1..m {
            let off = (k as f64 / 2.0).sqrt();
            jac[(k, k - 1)] = off;
            jac[(k - 1, k)] = off;
        }
        let eig = SymmetricEigen::new(jac);
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..m)
            .map(|i| std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, i)].powi(2))
            .collect();
        (nodes, weights)
    }

    // h_k(x) e^{x²/2}: orthonormal Hermite polynomials, with derivatives
    fn hermite_poly(k: usize, x: f64) -> (f64, f64) {
        // physicists' H_k by recurrence, H_k' = 2k H_{k-1}
        let mut h = vec![1.0, 2.0 * x];
        for i in 1..k.max(1) {
            let next = 2.0 * x * h[i] - 2.0 * i as f64 * h[i - 1];
            h.push(next);
        }
        let norm =
            (2f64.powi(k as i32) * (1..=k).map(|i| i as f64).product::<f64>() * std::f64::consts::PI.sqrt())
                .sqrt();
        let d = if k == 0 { 0.0 } else { 2.0 * k as f64 * h[k - 1] };
        (h[k] / norm, d / norm)
    }

    fn quad_position(m: usize, k: usize) -> f64 {
        let (xs, ws) = gauss_hermite(40);
        xs.iter()
            .zip(&ws)
            .map(|(&x, &w)| w * hermite_poly(m, x).0 * x * hermite_poly(k, x).0)
            .sum()
    }

    fn quad_derivative(m: usize, k: usize) -> f64 {
        // h_k' = (p_k' − x p_k) e^{−x²/2}
        let (xs, ws) = gauss_hermite(40);
        xs.iter()
            .zip(&ws)
            .map(|(&x, &w)| {
                let (pk, dpk) = hermite_poly(k, x);
                w * hermite_poly(m, x).0 * (dpk - x * pk)
            })
            .sum()
    }

    #[test]
    fn level_counts_match_rank_formula() {
        for n in 1..=4 {
            let b = FockBasis::new(n, 6).unwrap();
            for l in 0..=6 {
                let count = (0..b.dim()).filter(|&i| b.level_of(i) == l).count();
                let fact = |k: usize| (1..=k).map(|i| i as u128).product::<u128>();
                let formula = fact(l + n - 1) / (fact(l) * fact(n - 1));
                assert_eq!(count as u128, formula);
                assert_eq!(level_rank(n, l) as u128, formula);
            }
        }
    }

    #[test]
    fn enumeration_is_graded_bijection() {
        let b = FockBasis::new(3, 5).unwrap();
        for i in 0..b.dim() {
            assert_eq!(b.index_of(b.multi_index(i)), Some(i));
            if i > 0 {
                assert!(b.level_of(i - 1) <= b.level_of(i));
            }
        }
        assert_eq!(b.multi_index(b.level_range(4).unwrap().start), &[4, 0, 0]);
    }

    #[test]
    fn position_matrix_elements_match_quadrature() {
        let b = FockBasis::new(1, 2).unwrap();
        let x = build_position(&b, 0).unwrap();
        let got = x.matrix()[(1, 0)].re;
        assert!((got - 0.5f64.sqrt()).abs() < EXACT);
        for m in 0..=2 {
            for k in 0..=2 {
                let q = quad_position(m, k);
                assert!((x.matrix()[(m, k)].re - q).abs() < 1e-12, "x[{m},{k}]");
            }
        }
        for i in 0..3 {
            assert_eq!(x.matrix()[(i, i)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn derivative_matrix_elements_match_quadrature() {
        let b = FockBasis::new(1, 4).unwrap();
        let d = build_derivative(&b, 0).unwrap();
        assert!((d.matrix()[(0, 1)].re - 0.5f64.sqrt()).abs() < EXACT);
        assert!((d.matrix()[(1, 0)].re + 0.5f64.sqrt()).abs() < EXACT);
        for m in 0..=3 {
            for k in 0..=3 {
                let q = quad_derivative(m, k);
                assert!((d.matrix()[(m, k)].re - q).abs() < 1e-12, "d[{m},{k}]");
            }
        }
    }

    #[test]
    fn position_acts_on_one_axis() {
        let b = FockBasis::new(2, 1).unwrap();
        let x1 = build_position(&b, 0).unwrap();
        let h00 = b.index_of(&[0, 0]).unwrap();
        let h01 = b.index_of(&[0, 1]).unwrap();
        assert_eq!(x1.matrix()[(h01, h00)], C64::new(0.0, 0.0));
        assert!(build_position(&b, 2).is_err());
        assert!(matches!(
            build_derivative(&b, 5),
            Err(Error::AxisOutOfRange { axis: 5, n: 2 })
        ));
    }

    #[test]
    fn canonical_commutator_on_guarded_levels() {
        let b = FockBasis::new(1, 7).unwrap();
        let x = build_position(&b, 0).unwrap();
        let d = build_derivative(&b, 0).unwrap();
        let comm = &(&x * &d) - &(&d * &x);
        assert_eq!(comm.guard_level(), Some(5));
        let minus_id = FiberOperator::identity(&b).scale(C64::new(-1.0, 0.0));
        assert!(comm.guarded_residual(&minus_id).unwrap() < EXACT);
        // the truncated top level is corrupted
        assert!(comm.residual_up_to(&minus_id, 7).unwrap() > 0.5);
    }

    #[test]
    fn annihilator_kills_ground_state() {
        let b = FockBasis::new(1, 3).unwrap();
        let x = build_position(&b, 0).unwrap();
        let d = build_derivative(&b, 0).unwrap();
        let h0 = b.basis_vector(&[0]).unwrap();
        assert!((&d + &x).apply(&h0).norm() < EXACT);
    }

    #[test]
    fn clifford_relation_for_frame_pairs() {
        let alg = FiberAlgebra::with_cutoff(1, 6).unwrap();
        let e = alg.clifford_mult(&FrameVector::e_hat(1, 0)).unwrap();
        let f = alg.clifford_mult(&FrameVector::f(1, 0)).unwrap();
        let target = FiberOperator::identity(alg.basis()).scale(-I);
        assert!(e.commutator(&f).guarded_residual(&target).unwrap() < EXACT);
        assert!(e.commutator(&e).matrix().norm() < EXACT);

        let alg2 = FiberAlgebra::with_cutoff(2, 5).unwrap();
        let e1 = alg2.clifford_mult(&FrameVector::e_hat(2, 0)).unwrap();
        let e2 = alg2.clifford_mult(&FrameVector::e_hat(2, 1)).unwrap();
        let zero = FiberOperator::zero(alg2.basis());
        assert!(e1.commutator(&e2).guarded_residual(&zero).unwrap() < EXACT);
    }

    #[test]
    fn clifford_rejects_wrong_dimension() {
        let alg = FiberAlgebra::with_cutoff(2, 3).unwrap();
        assert!(alg.clifford_mult(&FrameVector::e_hat(1, 0)).is_err());
    }

    #[test]
    fn hamiltonian_levels() {
        let alg = FiberAlgebra::with_cutoff(1, 5).unwrap();
        let h = alg.hamiltonian();
        assert_eq!(h.guard_level(), Some(3));
        let blk = h.level_block(0).unwrap();
        assert!((blk[(0, 0)] - C64::new(-0.5, 0.0)).norm() < EXACT);

        let alg2 = FiberAlgebra::with_cutoff(2, 5).unwrap();
        let h2 = alg2.hamiltonian();
        let blk = h2.level_block(3).unwrap();
        let target = CMatrix::identity(4, 4) * C64::new(-4.0, 0.0);
        assert!((blk - target).norm() < EXACT);
        assert!(matches!(h2.level_block(4), Err(Error::InsufficientCutoff { .. })));
    }

    #[test]
    fn hamiltonian_commutes_with_projectors() {
        let alg = FiberAlgebra::with_cutoff(1, 8).unwrap();
        let h = alg.hamiltonian();
        for l in 0..=6 {
            let p = alg.level_projector(l).unwrap();
            let zero = FiberOperator::zero(alg.basis());
            assert!(h.commutator(&p).guarded_residual(&zero).unwrap() < EXACT);
        }
    }

    #[test]
    fn ladder_structure() {
        let alg = FiberAlgebra::with_cutoff(1, 6).unwrap();
        let b = alg.basis();
        let plus = alg.ladder(0, LadderSign::Plus).unwrap();
        let minus = alg.ladder(0, LadderSign::Minus).unwrap();
        let h0 = b.basis_vector(&[0]).unwrap();
        assert!(plus.apply(&h0).norm() < EXACT);
        let raised = minus.apply(&h0);
        assert!((raised.dot(&raised).re - 2.0).abs() < EXACT);
        for l in 0..=4 {
            let v = b.basis_vector(&[l]).unwrap();
            let w = minus.apply(&v);
            assert_eq!(b.max_level(&w, EXACT), Some(l + 1));
            assert!(w[l + 1].norm() > 0.5);
            assert_eq!((0..b.dim()).filter(|&i| w[i].norm() > EXACT).count(), 1);
        }
        assert!(alg.ladder(1, LadderSign::Plus).is_err());
    }

    #[test]
    fn projector_traces() {
        let cases = [(2, 3, 4), (1, 0, 1), (1, 5, 1), (3, 2, 6)];
        for (n, l, rank) in cases {
            let alg = FiberAlgebra::with_cutoff(n, 5).unwrap();
            let p = alg.level_projector(l).unwrap();
            assert!((p.matrix().trace() - C64::new(rank as f64, 0.0)).norm() < EXACT);
        }
        let alg = FiberAlgebra::with_cutoff(2, 3).unwrap();
        assert!(matches!(
            alg.level_projector(4),
            Err(Error::LevelAboveCutoff { level: 4, cutoff: 3 })
        ));
    }

    #[test]
    fn projectors_resolve_identity() {
        let alg = FiberAlgebra::with_cutoff(3, 4).unwrap();
        let mut sum = FiberOperator::zero(alg.basis());
        for l in 0..=4 {
            sum = &sum + &alg.level_projector(l).unwrap();
        }
        assert!((sum.matrix() - CMatrix::identity(35, 35)).norm() < EXACT);
    }

    #[test]
    fn frame_vector_geometry() {
        let v = FrameVector::new(vec![1.0, 2.0], vec![3.0, -1.0]).unwrap();
        let w = FrameVector::new(vec![0.5, 0.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(v.omega(&w), -w.omega(&v));
        // g(X, Y) = ω(X, JY)
        assert!((v.dot(&w) - v.omega(&w.j_rotate())).abs() < EXACT);
        assert!(FrameVector::new(vec![f64::NAN], vec![0.0]).is_err());
    }
}
