//! The Lie algebra `u(n)` in its real `2n`-dimensional defining representation
//! and its action `r_Q` on the truncated fiber.
//!
//! `r_Q(A) = (i/2) Σ_{jk} A_{jk} e_k· Je_j·` preserves every level and restricts
//! on level `l` to the `su(n)` representation with Dynkin labels `(l,0,…,0)`
//! and `u(1)` charge `q_l`.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::{level_charge, level_rank, FiberAlgebra, FiberOperator, C64, I};

const CONSTRAINT_TOL: f64 = 1e-12;

/// Real antisymmetric `2n × 2n` matrix commuting with `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnAlgebraElement {
    n: usize,
    matrix: DMatrix<f64>,
}

impl UnAlgebraElement {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let d = matrix.nrows();
        if d != matrix.ncols() || d == 0 || !d.is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "u(n) element must be 2n x 2n, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = d / 2;
        let scale = matrix.amax().max(1.0);
        let tol = CONSTRAINT_TOL * scale;
        let anti = (&matrix + matrix.transpose()).amax();
        if anti > tol {
            return Err(Error::NotUnitaryAlgebra {
                n,
                reason: format!("not antisymmetric (|A + Aᵀ| = {anti:e})"),
            });
        }
        for j in 0..n {
            for k in 0..n {
                let diag = (matrix[(j, k)] - matrix[(j + n, k + n)]).abs();
                let off = (matrix[(j, k + n)] + matrix[(j + n, k)]).abs();
                if diag > tol || off > tol {
                    return Err(Error::NotUnitaryAlgebra {
                        n,
                        reason: format!("does not commute with J at block entry ({j},{k})"),
                    });
                }
            }
        }
        Ok(Self { n, matrix })
    }

    /// `[[X, S], [−S, X]]` from antisymmetric `X` and symmetric `S`.
    pub fn from_blocks(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if x.shape() != (n, n) || s.shape() != (n, n) {
            return Err(Error::DimensionMismatch("blocks must be square and equal".into()));
        }
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(x);
        m.view_mut((n, n), (n, n)).copy_from(x);
        m.view_mut((0, n), (n, n)).copy_from(s);
        m.view_mut((n, 0), (n, n)).copy_from(&(-s));
        Self::new(m)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            matrix: DMatrix::zeros(2 * n, 2 * n),
        }
    }

    /// Entries uniform in `[−1, 1]`, projected onto antisymmetric matrices
    /// commuting with `J`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let d = 2 * n;
        let raw = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..=1.0));
        let anti = (&raw - raw.transpose()) * 0.5;
        let j = complex_structure(n);
        let proj = (&anti + j.transpose() * &anti * &j) * 0.5;
        Self { n, matrix: proj }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.matrix[(j, k)]
    }

    /// `Σ_j A_{j,j+n}`, the `u(1)` component up to normalisation.
    pub fn u1_charge(&self) -> f64 {
        (0..self.n).map(|j| self.matrix[(j, j + self.n)]).sum()
    }

    /// `(1 − Π) A`: the `su(n)` part.
    pub fn traceless_part(&self) -> Self {
        let s = self.u1_charge() / self.n as f64;
        let mut m = self.matrix.clone();
        for j in 0..self.n {
            m[(j, j + self.n)] -= s;
            m[(j + self.n, j)] += s;
        }
        Self { n: self.n, matrix: m }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            matrix: &self.matrix * c,
        }
    }

    /// `tr(A B)` in the defining real representation.
    pub fn trace_product(&self, other: &Self) -> f64 {
        (&self.matrix * &other.matrix).trace()
    }
}

/// The matrix of `J` in the real frame: `J e_j = e_{j+n}`, `J e_{j+n} = −e_j`.
pub fn complex_structure(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(j + n, j)] = 1.0;
        m[(j, j + n)] = -1.0;
    }
    m
}

/// Cartan generator `K_j` (zero-based `j`).
pub fn defining_cartan(n: usize, j: usize) -> Result<UnAlgebraElement> {
    if j >= n {
        return Err(Error::AxisOutOfRange { axis: j, n });
    }
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m[(j, j + n)] = 1.0;
    m[(j + n, j)] = -1.0;
    Ok(UnAlgebraElement { n, matrix: m })
}

/// Orthonormal basis of `su(n)` with `tr(T_a T_b) = −2 δ_ab` in the real
/// representation (generalised Gell-Mann matrices `H_a` with
/// `tr(H_a H_b) = δ_ab`, embedded as `i H_a`).
pub fn su_basis(n: usize) -> Vec<UnAlgebraElement> {
    let mut out = Vec::with_capacity(n * n - 1);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let push = |re: DMatrix<f64>, im: DMatrix<f64>, out: &mut Vec<UnAlgebraElement>| {
        // i(Re + i Im) = −Im + i Re
        let x = -im;
        out.push(UnAlgebraElement::from_blocks(&x, &re).expect("hermitian input"));
    };
    for j in 0..n {
        for k in j + 1..n {
            let mut re = DMatrix::zeros(n, n);
            re[(j, k)] = h;
            re[(k, j)] = h;
            push(re, DMatrix::zeros(n, n), &mut out);
            let mut im = DMatrix::zeros(n, n);
            im[(j, k)] = -h;
            im[(k, j)] = h;
            push(DMatrix::zeros(n, n), im, &mut out);
        }
    }
    for m in 1..n {
        let norm = 1.0 / ((m * (m + 1)) as f64).sqrt();
        let mut re = DMatrix::zeros(n, n);
        for k in 0..m {
            re[(k, k)] = norm;
        }
        re[(m, m)] = -(m as f64) * norm;
        push(re, DMatrix::zeros(n, n), &mut out);
    }
    out
}

/// Image of a `u(n)` element on the fiber.
pub fn r_q(alg: &FiberAlgebra, a: &UnAlgebraElement) -> Result<FiberOperator> {
    if a.n() != alg.n() {
        return Err(Error::DimensionMismatch(format!(
            "u({}) element on fiber with n={}",
            a.n(),
            alg.n()
        )));
    }
    r_q_matrix(alg, a.matrix())
}

/// `r_Q` extended linearly to any real `2n × 2n` matrix, without checking
/// the `u(n)` constraints. Used for sampled curvature, which satisfies them
/// only up to discretisation error.
pub fn r_q_matrix(alg: &FiberAlgebra, a: &DMatrix<f64>) -> Result<FiberOperator> {
    let n = alg.n();
    if a.nrows() != 2 * n || a.ncols() != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix on fiber with n={n}",
            a.nrows(),
            a.ncols()
        )));
    }
    let d = alg.basis().dim();
    let mut sum = DMatrix::<C64>::zeros(d, d);
    let mut guard = alg.basis().cutoff().checked_sub(2);
    for j in 0..2 * n {
        for k in 0..2 * n {
            let c = a[(j, k)];
            if c != 0.0 {
                let op = alg.pair_op(k, j);
                sum += op.matrix() * C64::new(c, 0.0);
                guard = guard.min(op.guard_level());
            }
        }
    }
    FiberOperator::from_parts(alg.basis().clone(), sum * (I * 0.5), 2, guard)
}

/// Spinor connection coefficient `σ(A) = −r_Q(A)`, the lift of a frame
/// rotation `∇e_k = A_{km} e_m` to the fiber.
pub fn spinor_lift(alg: &FiberAlgebra, a: &UnAlgebraElement) -> Result<FiberOperator> {
    Ok(-&r_q(alg, a)?)
}

fn fact(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

/// Quadratic Casimir `l(n+l)(n−1)/n` of the `(l,0,…,0)` representation.
pub fn casimir_value(n: usize, l: usize) -> Result<BigRational> {
    if n < 2 {
        return Err(Error::InvalidArgument("su(1) has no Casimir; need n >= 2".into()));
    }
    Ok(ratio(BigInt::from(l * (n + l) * (n - 1)), BigInt::from(n)))
}

/// Trace-form constant `c(n,l)` with `tr_l(r_Q(A) r_Q(B)) = c(n,l) tr(AB)` on
/// `su(n)`: `(l+n)! / (2 (l−1)! (n+1)!)`.
pub fn proportionality_c(n: usize, l: usize) -> Result<BigRational> {
    if n < 2 {
        return Err(Error::InvalidArgument("su(1) is trivial; need n >= 2".into()));
    }
    if l == 0 {
        return Err(Error::InvalidArgument("level 0 carries no su(n) part".into()));
    }
    Ok(perp_prefactor(n, l))
}

// zero for l = 0 (empty (l-1)!)
fn perp_prefactor(n: usize, l: usize) -> BigRational {
    if l == 0 {
        return BigRational::zero();
    }
    ratio(fact(l + n), BigInt::from(2) * fact(l - 1) * fact(n + 1))
}

fn rational_to_f64(r: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(r).expect("finite rational")
}

/// Dimension of the `su(n)` irrep with the given Dynkin labels (Weyl formula).
pub fn weyl_dimension(labels: &[usize]) -> BigRational {
    let n = labels.len() + 1;
    // partition lengths λ_i = Σ_{k≥i} labels_k
    let lambda: Vec<i64> = (0..n)
        .map(|i| labels[i.min(labels.len())..].iter().sum::<usize>() as i64)
        .collect();
    let mut acc = BigRational::one();
    for i in 0..n {
        for j in i + 1..n {
            let num = lambda[i] - lambda[j] + (j - i) as i64;
            acc *= ratio(BigInt::from(num), BigInt::from((j - i) as i64));
        }
    }
    acc
}

/// `tr_l(r_Q(A)) = (i q_l rank_l / n) Σ_j A_{j,j+n}`.
pub fn trace_rq(a: &UnAlgebraElement, l: usize) -> C64 {
    let n = a.n();
    I * (level_charge(n, l) * level_rank(n, l) as f64 / n as f64 * a.u1_charge())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    /// `tr_l(Π r_Q(A) Π r_Q(B))`
    U1,
    /// `tr_l((1−Π) r_Q(A) (1−Π) r_Q(B))`
    Traceless,
    /// `tr_l(r_Q(A) r_Q(B))`
    Full,
}

/// `tr((1−Π)A(1−Π)B) = Σ A_{jk}B_{kj} + (2/n) Σ A_{i,i+n} B_{l,l+n}`.
pub fn traceless_trace_form(a: &UnAlgebraElement, b: &UnAlgebraElement) -> f64 {
    a.trace_product(b) + 2.0 / a.n() as f64 * a.u1_charge() * b.u1_charge()
}

/// Closed-form level-`l` trace of a product of two `r_Q` images.
pub fn trace_pair(a: &UnAlgebraElement, b: &UnAlgebraElement, l: usize, mode: TraceMode) -> Result<C64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch("u(n) elements of different n".into()));
    }
    let n = a.n();
    let q = level_charge(n, l);
    let u1 = -q * q * level_rank(n, l) as f64 / (n * n) as f64 * a.u1_charge() * b.u1_charge();
    let perp = if n < 2 {
        0.0
    } else {
        rational_to_f64(&perp_prefactor(n, l)) * traceless_trace_form(a, b)
    };
    Ok(C64::new(
        match mode {
            TraceMode::U1 => u1,
            TraceMode::Traceless => perp,
            TraceMode::Full => u1 + perp,
        },
        0.0,
    ))
}

/// Brute-force traces of assembled fiber matrices beside their closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct RepTraceReport {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
}

impl RepTraceReport {
    pub fn new(lhs: C64, rhs: C64) -> Self {
        Self {
            lhs,
            rhs,
            residual: (lhs - rhs).norm(),
        }
    }
}

impl fmt::Display for RepTraceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "closed {} vs fiber {} (residual {:.3e})",
            self.lhs, self.rhs, self.residual
        )
    }
}

/// Fiber trace of `r_Q(A)` on level `l` against [`trace_rq`].
pub fn check_trace_rq(alg: &FiberAlgebra, a: &UnAlgebraElement, l: usize) -> Result<RepTraceReport> {
    let brute = r_q(alg, a)?.trace_on_level(l)?;
    Ok(RepTraceReport::new(trace_rq(a, l), brute))
}

/// Fiber trace of a product of two images on level `l` against [`trace_pair`].
pub fn check_trace_pair(
    alg: &FiberAlgebra,
    a: &UnAlgebraElement,
    b: &UnAlgebraElement,
    l: usize,
    mode: TraceMode,
) -> Result<RepTraceReport> {
    let (pa, pb) = match mode {
        TraceMode::Full => (a.clone(), b.clone()),
        TraceMode::Traceless => (a.traceless_part(), b.traceless_part()),
        TraceMode::U1 => (
            a.add(&a.traceless_part().scale(-1.0)),
            b.add(&b.traceless_part().scale(-1.0)),
        ),
    };
    let brute = (&r_q(alg, &pa)? * &r_q(alg, &pb)?).trace_on_level(l)?;
    Ok(RepTraceReport::new(trace_pair(a, b, l, mode)?, brute))
}

/// Outcome of the highest-weight test for level `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct HighestWeightReport {
    /// Eigenvalues of `r_Q(K_j − K_{j+1})` on `h_l ⊗ h_0 ⊗ … ⊗ h_0`.
    pub weights: Vec<C64>,
    /// Expected `−i (l, 0, …, 0)`.
    pub expected: Vec<C64>,
    /// Norm of the part of `r_Q(K_j − K_{j+1}) v` orthogonal to `v`.
    pub eigen_residual: f64,
    pub weyl_dimension: BigRational,
    pub rank: usize,
}

impl HighestWeightReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.eigen_residual <= tol
            && self
                .weights
                .iter()
                .zip(&self.expected)
                .all(|(w, e)| (w - e).norm() <= tol)
            && self.weyl_dimension == BigRational::from_integer(BigInt::from(self.rank))
    }
}

pub fn highest_weight_check(alg: &FiberAlgebra, l: usize) -> Result<HighestWeightReport> {
    let n = alg.n();
    let cutoff = alg.basis().cutoff();
    if cutoff < l + 2 {
        return Err(Error::InsufficientCutoff {
            cutoff,
            required: l + 2,
        });
    }
    let mut alpha = vec![0; n];
    alpha[0] = l;
    let v = alg.basis().basis_vector(&alpha)?;
    let mut weights = Vec::new();
    let mut expected = Vec::new();
    let mut worst = 0.0_f64;
    for j in 0..n.saturating_sub(1) {
        let diff = defining_cartan(n, j)?.add(&defining_cartan(n, j + 1)?.scale(-1.0));
        let w = r_q(alg, &diff)?.apply(&v);
        let lambda = v.dotc(&w);
        worst = worst.max((&w - &v * lambda).norm());
        weights.push(lambda);
        expected.push(if j == 0 { -I * l as f64 } else { C64::new(0.0, 0.0) });
    }
    let mut labels = vec![0; n.saturating_sub(1)];
    if let Some(first) = labels.first_mut() {
        *first = l;
    }
    let weyl_dimension = if n == 1 {
        BigRational::one()
    } else {
        weyl_dimension(&labels)
    };
    Ok(HighestWeightReport {
        weights,
        expected,
        eigen_residual: worst,
        weyl_dimension,
        rank: level_rank(n, l),
    })
}

/// `−Σ_a r_Q(T_a)²` over [`su_basis`].
pub fn casimir_operator(alg: &FiberAlgebra) -> Result<FiberOperator> {
    let n = alg.n();
    if n < 2 {
        return Err(Error::InvalidArgument("su(1) has no Casimir; need n >= 2".into()));
    }
    let mut acc: Option<FiberOperator> = None;
    for t in su_basis(n) {
        let r = r_q(alg, &t)?;
        let sq = &r * &r;
        acc = Some(match acc {
            None => sq,
            Some(s) => &s + &sq,
        });
    }
    Ok(-&acc.expect("n >= 2 gives a nonempty basis"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frac(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn cartan_generators() {
        let k = defining_cartan(1, 0).unwrap();
        assert_eq!(k.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        for n in 1..=4 {
            let s: f64 = (0..n)
                .map(|j| defining_cartan(n, j).unwrap().entry(j, j + n))
                .sum();
            assert_eq!(s, n as f64);
        }
        let k1 = defining_cartan(2, 0).unwrap();
        let k2 = defining_cartan(2, 1).unwrap();
        assert_eq!(k1.commutator(&k2).matrix().amax(), 0.0);
        assert!(defining_cartan(2, 2).is_err());
    }

    #[test]
    fn constraint_validation() {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        assert!(matches!(
            UnAlgebraElement::new(m),
            Err(Error::NotUnitaryAlgebra { n: 2, .. })
        ));
        assert!(UnAlgebraElement::new(DMatrix::identity(2, 2)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=3 {
            let a = UnAlgebraElement::random(n, &mut rng);
            assert!(UnAlgebraElement::new(a.matrix().clone()).is_ok());
        }
    }

    #[test]
    fn su_basis_is_orthonormal() {
        for n in 2..=4 {
            let b = su_basis(n);
            assert_eq!(b.len(), n * n - 1);
            for (i, x) in b.iter().enumerate() {
                assert!(x.u1_charge().abs() < 1e-14);
                for (j, y) in b.iter().enumerate() {
                    let want = if i == j { -2.0 } else { 0.0 };
                    assert!((x.trace_product(y) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cartan_image_is_diagonal() {
        let alg = FiberAlgebra::with_cutoff(2, 5).unwrap();
        let r = r_q(&alg, &defining_cartan(2, 1).unwrap()).unwrap();
        assert_eq!(r.guard_level(), Some(3));
        let b = alg.basis();
        for i in b.level_range(0).unwrap().start..b.level_range(3).unwrap().end {
            let alpha = b.multi_index(i);
            let want = -I * (alpha[1] as f64 + 0.5);
            for k in 0..b.dim() {
                let expect = if k == i { want } else { C64::new(0.0, 0.0) };
                assert!((r.matrix()[(k, i)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_element_maps_to_zero() {
        let alg = FiberAlgebra::with_cutoff(2, 4).unwrap();
        let r = r_q(&alg, &UnAlgebraElement::zero(2)).unwrap();
        assert_eq!(r.matrix().norm(), 0.0);
        assert_eq!(r.guard_level(), Some(2));
        assert!(r_q(&alg, &UnAlgebraElement::zero(3)).is_err());
    }

    #[test]
    fn homomorphism_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alg = FiberAlgebra::with_cutoff(2, 6).unwrap();
        for _ in 0..10 {
            let a = UnAlgebraElement::random(2, &mut rng);
            let b = UnAlgebraElement::random(2, &mut rng);
            let lhs = r_q(&alg, &a).unwrap().commutator(&r_q(&alg, &b).unwrap());
            let rhs = r_q(&alg, &a.commutator(&b)).unwrap();
            assert_eq!(lhs.guard_level(), Some(2));
            assert!(lhs.guarded_residual(&rhs).unwrap() < 1e-10);
        }
    }

    #[test]
    fn u1_generator_is_i_times_hamiltonian() {
        for n in 1..=3 {
            let alg = FiberAlgebra::with_cutoff(n, 5).unwrap();
            let mut sum = UnAlgebraElement::zero(n);
            for j in 0..n {
                sum = sum.add(&defining_cartan(n, j).unwrap());
            }
            let lhs = r_q(&alg, &sum).unwrap();
            let rhs = alg.hamiltonian().scale(I);
            assert!(lhs.guarded_residual(&rhs).unwrap() < 1e-12);
        }
    }

    #[test]
    fn spinor_lift_rotates_clifford_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alg = FiberAlgebra::with_cutoff(2, 6).unwrap();
        let u = UnAlgebraElement::random(2, &mut rng);
        let sigma = spinor_lift(&alg, &u).unwrap();
        for k in 0..4 {
            let lhs = sigma.commutator(alg.frame_op(k));
            let row: Vec<f64> = (0..4).map(|m| u.entry(k, m)).collect();
            let rhs = alg.clifford_components(&row).unwrap();
            assert!(lhs.guarded_residual(&rhs).unwrap() < 1e-12);
        }
    }

    #[test]
    fn casimir_values() {
        assert_eq!(casimir_value(2, 1).unwrap(), frac(3, 2));
        assert_eq!(casimir_value(5, 0).unwrap(), frac(0, 1));
        assert_eq!(casimir_value(3, 2).unwrap(), frac(20, 3));
        assert!(casimir_value(1, 2).is_err());
    }

    #[test]
    fn casimir_operator_is_scalar_on_levels() {
        for n in 2..=3 {
            let alg = FiberAlgebra::with_cutoff(n, 5).unwrap();
            let c = casimir_operator(&alg).unwrap();
            for l in 0..=1 {
                let blk = c.level_block(l).unwrap();
                let want = rational_to_f64(&casimir_value(n, l).unwrap());
                let target = DMatrix::<C64>::identity(blk.nrows(), blk.ncols()) * C64::new(want, 0.0);
                assert!((blk - target).norm() < 1e-10, "n={n} l={l}");
            }
        }
    }

    #[test]
    fn single_trace_closed_form() {
        let k = defining_cartan(1, 0).unwrap();
        assert!((trace_rq(&k, 0) - C64::new(0.0, -0.5)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = UnAlgebraElement::random(3, &mut rng).traceless_part();
        assert!(trace_rq(&a, 2).norm() < 1e-14);
        let alg = FiberAlgebra::with_cutoff(2, 4).unwrap();
        let k12 = defining_cartan(2, 0)
            .unwrap()
            .add(&defining_cartan(2, 1).unwrap());
        assert!(check_trace_rq(&alg, &k12, 1).unwrap().residual < 1e-12);
    }

    #[test]
    fn pair_traces_closed_form() {
        let k = defining_cartan(1, 0).unwrap();
        let v = trace_pair(&k, &k, 0, TraceMode::U1).unwrap();
        assert!((v - C64::new(-0.25, 0.0)).norm() < 1e-15);
        assert_eq!(
            trace_pair(&k, &k, 0, TraceMode::Traceless).unwrap(),
            C64::new(0.0, 0.0)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let alg = FiberAlgebra::with_cutoff(2, 6).unwrap();
        let a = UnAlgebraElement::random(2, &mut rng);
        let b = UnAlgebraElement::random(2, &mut rng);
        for mode in [TraceMode::U1, TraceMode::Traceless, TraceMode::Full] {
            assert!(check_trace_pair(&alg, &a, &b, 2, mode).unwrap().residual < 1e-10);
        }
    }

    #[test]
    fn proportionality_constant() {
        assert_eq!(proportionality_c(2, 1).unwrap(), frac(1, 2));
        assert_eq!(proportionality_c(3, 1).unwrap(), frac(1, 2));
        assert!(proportionality_c(2, 0).is_err());
        assert!(proportionality_c(1, 1).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let alg = FiberAlgebra::with_cutoff(2, 6).unwrap();
        let a = UnAlgebraElement::random(2, &mut rng).traceless_part();
        let b = UnAlgebraElement::random(2, &mut rng).traceless_part();
        let brute = (&r_q(&alg, &a).unwrap() * &r_q(&alg, &b).unwrap())
            .trace_on_level(2)
            .unwrap();
        let c = rational_to_f64(&proportionality_c(2, 2).unwrap());
        assert!((brute - C64::new(c * a.trace_product(&b), 0.0)).norm() < 1e-10);
        // the traceless mode of trace_pair uses the same constant
        let tp = trace_pair(&a, &b, 2, TraceMode::Traceless).unwrap();
        assert!((tp.re - c * a.trace_product(&b)).abs() < 1e-12);
    }

    #[test]
    fn proportionality_follows_casimir_ratio() {
        for n in 2..=4 {
            for l in 1..=4 {
                let ratio = BigRational::from_integer(BigInt::from(level_rank(n, l)))
                    * casimir_value(n, l).unwrap()
                    / (BigRational::from_integer(BigInt::from(level_rank(n, 1)))
                        * casimir_value(n, 1).unwrap());
                assert_eq!(
                    proportionality_c(n, l).unwrap(),
                    proportionality_c(n, 1).unwrap() * ratio
                );
            }
        }
    }

    #[test]
    fn trace_form_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = UnAlgebraElement::random(3, &mut rng);
        let b = UnAlgebraElement::random(3, &mut rng);
        let direct = a.traceless_part().trace_product(&b.traceless_part());
        assert!((direct - traceless_trace_form(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn highest_weight() {
        let alg = FiberAlgebra::with_cutoff(2, 4).unwrap();
        let rep = highest_weight_check(&alg, 2).unwrap();
        assert!((rep.weights[0] - C64::new(0.0, -2.0)).norm() < 1e-12);
        assert!(rep.passes(1e-12));
        let rep0 = highest_weight_check(&alg, 0).unwrap();
        assert!(rep0.weights.iter().all(|w| w.norm() < 1e-12));
        let alg3 = FiberAlgebra::with_cutoff(3, 3).unwrap();
        let rep3 = highest_weight_check(&alg3, 1).unwrap();
        assert_eq!(rep3.rank, 3);
        assert_eq!(rep3.weyl_dimension, frac(3, 1));
        assert!(rep3.passes(1e-12));
        assert!(matches!(
            highest_weight_check(&alg, 3),
            Err(Error::InsufficientCutoff { .. })
        ));
    }

    #[test]
    fn weyl_dimensions() {
        assert_eq!(weyl_dimension(&[1, 1]), frac(8, 1));
        assert_eq!(weyl_dimension(&[3, 0, 0]), frac(20, 1));
        assert_eq!(weyl_dimension(&[0, 2]), frac(6, 1));
    }
}
