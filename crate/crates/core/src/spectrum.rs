//! Exact spectrum of `P_l` on `CP¹`, certified heat-trace sums, and the
//! small-`t` expansion by Euler–Maclaurin summation in exact arithmetic.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{bernoulli_even, factorial, int, rat, to_f64, Poly, Rational, BERNOULLI_MAX};

/// `λ_{l,j} = 4(l+j+1)² − 3(2l+1)² − 1`.
pub fn eigenvalue(l: u64, j: u64) -> i64 {
    let m = (l + j + 1) as i64;
    let s = (2 * l + 1) as i64;
    4 * m * m - 3 * s * s - 1
}

/// `m_{l,j} = 2(l+j+1)`.
pub fn degeneracy(l: u64, j: u64) -> u64 {
    2 * (l + j + 1)
}

/// `Σ p_{a,b} t^a x^b · e^{−4tx²}`, truncated above `t^{max_t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSeries {
    terms: BTreeMap<(usize, usize), Rational>,
    max_t: usize,
}

impl GaussianSeries {
    pub fn new(max_t: usize) -> Self {
        Self {
            terms: BTreeMap::new(),
            max_t,
        }
    }

    /// `f(x) = 2x e^{−4tx²}`.
    pub fn summand(max_t: usize) -> Self {
        let mut s = Self::new(max_t);
        s.add_term(0, 1, int(2));
        s
    }

    pub fn add_term(&mut self, t_pow: usize, x_pow: usize, c: Rational) {
        if t_pow > self.max_t || c.is_zero() {
            return;
        }
        let e = self.terms.entry((t_pow, x_pow)).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&(t_pow, x_pow));
        }
    }

    pub fn coeff(&self, t_pow: usize, x_pow: usize) -> Rational {
        self.terms
            .get(&(t_pow, x_pow))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lowest power of `t` present.
    pub fn t_valuation(&self) -> Option<usize> {
        self.terms.keys().map(|&(a, _)| a).min()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.max_t = self.max_t.min(other.max_t);
        out.terms.retain(|&(a, _), _| a <= out.max_t);
        for (&(a, b), c) in &other.terms {
            out.add_term(a, b, c.clone());
        }
        out
    }

    pub fn scale(&self, s: &Rational) -> Self {
        let mut out = Self::new(self.max_t);
        for (&(a, b), c) in &self.terms {
            out.add_term(a, b, c * s);
        }
        out
    }

    /// Product of the polynomial parts; the Gaussian factor is shared, so this
    /// is multiplication by a polynomial in `(t, x)`.
    pub fn mul_polynomial(&self, other: &Self) -> Self {
        let mut out = Self::new(self.max_t.min(other.max_t));
        for (&(a1, b1), c1) in &self.terms {
            for (&(a2, b2), c2) in &other.terms {
                out.add_term(a1 + a2, b1 + b2, c1 * c2);
            }
        }
        out
    }

    /// `d/dx [P e^{−4tx²}] = (∂ₓP − 8txP) e^{−4tx²}`.
    pub fn derivative(&self) -> Self {
        let mut out = Self::new(self.max_t);
        for (&(a, b), c) in &self.terms {
            if b > 0 {
                out.add_term(a, b - 1, c * int(b as i64));
            }
            out.add_term(a + 1, b + 1, c * int(-8));
        }
        out
    }

    /// Polynomial part at `x = m`, grouped by powers of `t`: entry `a` is the
    /// coefficient of `t^a` as a polynomial in `m`.
    pub fn polynomials_in_m(&self) -> Vec<Poly> {
        let mut out = vec![Vec::new(); self.max_t + 1];
        for (&(a, b), c) in &self.terms {
            let row: &mut Vec<Rational> = &mut out[a];
            if row.len() <= b {
                row.resize(b + 1, Rational::zero());
            }
            row[b] += c;
        }
        out.into_iter().map(Poly::new).collect()
    }
}

/// Coefficients `c₋₁, c₀, c₁, …` of `c₋₁/t + c₀ + c₁ t + …`, each a polynomial
/// in the lower summation limit `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticExpansion {
    coeffs: Vec<Poly>,
}

impl AsymptoticExpansion {
    /// Highest power of `t` kept.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 2
    }

    /// Coefficient of `t^k`, `k ≥ −1`.
    pub fn coefficient(&self, k: i64) -> Poly {
        usize::try_from(k + 1)
            .ok()
            .and_then(|i| self.coeffs.get(i).cloned())
            .unwrap_or_else(Poly::zero)
    }

    pub fn coefficients(&self) -> &[Poly] {
        &self.coeffs
    }

    pub fn at(&self, m: i64) -> Vec<Rational> {
        self.coeffs.iter().map(|p| p.eval(&int(m))).collect()
    }

    pub fn eval_f64(&self, m: i64, t: f64) -> f64 {
        self.at(m)
            .iter()
            .enumerate()
            .map(|(i, c)| to_f64(c) * t.powi(i as i32 - 1))
            .sum()
    }
}

/// Largest expansion order supported by the Bernoulli table.
pub const MAX_ORDER: usize = BERNOULLI_MAX / 2 - 1;

/// `Σ_{k≥m} 2k e^{−4tk²} ≃ e^{−4m²t} (c₋₁/t + c₀ + … + c_order t^order)`.
pub fn euler_maclaurin(order: usize) -> Result<AsymptoticExpansion> {
    if order > MAX_ORDER {
        return Err(Error::OrderBeyondBernoulli {
            order,
            max: MAX_ORDER,
        });
    }
    let mut coeffs = vec![Poly::zero(); order + 2];
    // ∫_m^∞ f = e^{−4tm²}/(4t)
    coeffs[0] = Poly::constant(rat(1, 4));
    // ½ f(m) = m
    coeffs[1] = Poly::x();
    let mut deriv = GaussianSeries::summand(order).derivative();
    for i in 1..=order + 1 {
        let b = bernoulli_even(2 * i).expect("within table");
        let w = -b / Rational::from_integer(factorial(2 * i));
        for (a, p) in deriv.polynomials_in_m().into_iter().enumerate() {
            coeffs[a + 1] = &coeffs[a + 1] + &p.scale(&w);
        }
        deriv = deriv.derivative().derivative();
    }
    Ok(AsymptoticExpansion { coeffs })
}

/// Exponent of the prefactor `e^{t(3(2l+1)²+1)} e^{−4m²t}` in terms of
/// `m = l+1`: `8m² − 12m + 4`.
pub fn prefactor_exponent() -> Poly {
    Poly::from_ints(&[(4, 1), (-12, 1), (8, 1)])
}

/// Small-`t` expansion of the `CP¹` heat trace `K(P_l, t)` as polynomials in
/// `m = l + 1`.
pub fn cp1_asymptotics(order: usize) -> Result<AsymptoticExpansion> {
    let em = euler_maclaurin(order)?;
    let a = prefactor_exponent();
    // e^{ta} = Σ a^k t^k / k!, kept to t^{order+1}
    let exp_terms: Vec<Poly> = (0..=order + 1)
        .map(|k| {
            a.pow(k)
                .scale(&(Rational::one() / Rational::from_integer(factorial(k))))
        })
        .collect();
    let mut coeffs = vec![Poly::zero(); order + 2];
    for (i, c) in em.coeffs.iter().enumerate() {
        // c multiplies t^{i−1}
        for (k, e) in exp_terms.iter().enumerate() {
            let slot = i + k;
            if slot < coeffs.len() {
                coeffs[slot] = &coeffs[slot] + &(c * e);
            }
        }
    }
    Ok(AsymptoticExpansion { coeffs })
}

/// Exact coefficients `(c₋₁, c₀, …)` for subbundle `l`.
pub fn cp1_coefficients(l: u64, order: usize) -> Result<Vec<Rational>> {
    Ok(cp1_asymptotics(order)?.at(l as i64 + 1))
}

/// A truncated sum together with a rigorous bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedSum {
    pub value: f64,
    pub tail_bound: f64,
    /// Last summation index included.
    pub last_index: u64,
}

// Neumaier's compensated summation
#[derive(Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn push(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `K(P_l, t) = e^{t(3(2l+1)²+1)} Σ_{k≥l+1} 2k e^{−4tk²}`, summed until the
/// tail past the summand's maximum is certified below `tol`.
pub fn heat_trace(l: u64, t: f64, tol: f64) -> Result<CertifiedSum> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("heat trace needs t > 0, got {t}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let shift = (3 * (2 * l + 1) * (2 * l + 1) + 1) as f64;
    let summand = |k: u64| {
        let kf = k as f64;
        2.0 * kf * (t * (shift - 4.0 * kf * kf)).exp()
    };
    // 2x e^{−4tx²} decreases for x ≥ 1/√(8t)
    let peak = (1.0 / (8.0 * t)).sqrt().ceil() as u64;
    let tail = |k: u64| {
        let kf = k as f64;
        let g = (t * (shift - 4.0 * kf * kf)).exp();
        g / (4.0 * t) + 2.0 * kf * g
    };
    let mut acc = Compensated::default();
    let mut k = l + 1;
    loop {
        acc.push(summand(k));
        if k >= peak {
            let bound = tail(k);
            if bound < tol {
                return Ok(CertifiedSum {
                    value: acc.value(),
                    tail_bound: bound,
                    last_index: k,
                });
            }
        }
        k += 1;
    }
}

/// `K(P_l, t)` from the explicit eigenvalue list, for cross-checking.
pub fn heat_trace_from_spectrum(l: u64, t: f64, terms: u64) -> f64 {
    let mut acc = Compensated::default();
    for j in 0..terms {
        acc.push(degeneracy(l, j) as f64 * (-t * eigenvalue(l, j) as f64).exp());
    }
    acc.value()
}

/// Least-squares fit of `K(P_l, t)` on `{1/t, 1, t, t², t³, t⁴}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// All fitted coefficients, starting with `1/t`.
    pub coefficients: Vec<f64>,
    /// Condition number of the column-scaled design matrix.
    pub condition: f64,
    pub max_residual: f64,
}

impl FitResult {
    /// `(c₋₁, c₀, c₁)`.
    pub fn leading(&self) -> [f64; 3] {
        [self.coefficients[0], self.coefficients[1], self.coefficients[2]]
    }
}

pub const FIT_BASIS_LEN: usize = 6;
pub const FIT_T_MAX: f64 = 0.05;
const FIT_TOL: f64 = 1e-14;
const MAX_CONDITION: f64 = 1e12;

/// `count` geometric points in `[t_max/20, t_max]` with `t_max = 0.005/m²`.
pub fn default_fit_grid(l: u64) -> Vec<f64> {
    let m = (l + 1) as f64;
    geometric_grid(0.005 / (m * m) / 20.0, 0.005 / (m * m), 16)
}

pub fn geometric_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    let r = (b / a).ln() / (count - 1) as f64;
    (0..count).map(|i| a * (r * i as f64).exp()).collect()
}

pub fn fit_asymptotics(l: u64, t_grid: &[f64]) -> Result<FitResult> {
    if let Some(bad) = t_grid.iter().find(|&&t| !(t > 0.0 && t <= FIT_T_MAX)) {
        return Err(Error::InvalidArgument(format!(
            "fit points must lie in (0, {FIT_T_MAX}], got {bad}"
        )));
    }
    let mut sorted = t_grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < FIT_BASIS_LEN {
        return Err(Error::IllConditioned(format!(
            "{} distinct points for {FIT_BASIS_LEN} basis functions",
            sorted.len()
        )));
    }
    let rows = t_grid.len();
    let mut design = DMatrix::from_fn(rows, FIT_BASIS_LEN, |i, j| t_grid[i].powi(j as i32 - 1));
    let scales: Vec<f64> = (0..FIT_BASIS_LEN).map(|j| design.column(j).amax()).collect();
    for (j, s) in scales.iter().enumerate() {
        design.column_mut(j).scale_mut(1.0 / s);
    }
    let values = t_grid
        .iter()
        .map(|&t| heat_trace(l, t, FIT_TOL).map(|c| c.value))
        .collect::<Result<Vec<_>>>()?;
    let rhs = DVector::from_vec(values);
    let svd = design.clone().svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::IllConditioned(format!("condition number {condition:e}")));
    }
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let max_residual = (&design * &sol - &rhs).amax();
    let coefficients = sol.iter().zip(&scales).map(|(c, s)| c / s).collect();
    Ok(FitResult {
        coefficients,
        condition,
        max_residual,
    })
}

/// `|K(P_l,t) − (c₋₁/t + c₀ + c₁t)|` with the exact coefficients.
pub fn remainder(l: u64, t: f64) -> Result<f64> {
    let exact = cp1_asymptotics(1)?;
    let k = heat_trace(l, t, FIT_TOL)?.value;
    Ok((k - exact.eval_f64(l as i64 + 1, t)).abs())
}

/// Observed power `p` in `remainder ≈ C t^p` between two times.
pub fn remainder_exponent(l: u64, t1: f64, t2: f64) -> Result<f64> {
    let r1 = remainder(l, t1)?;
    let r2 = remainder(l, t2)?;
    Ok((r2 / r1).ln() / (t2 / t1).ln())
}
